//! Tuning-parameter selection by generalized score matching (GSM).
//!
//! For each candidate triple the estimator is fitted and the empirical GSM
//! objective
//!
//! ```text
//! d_SM(θ̂) = (1/n) Σ [ 2 ∂²_y log f(Y_i; θ̂) + (∂_y log f(Y_i; θ̂))² ]
//! ```
//!
//! is evaluated in-sample; the triple with the smallest value wins. For the
//! Gaussian regression model `ρ_i = −2/σ² + (y_i − μ_i)²/σ⁴`.

use rayon::prelude::*;
use serde::Serialize;

use crate::divergence::TuningTriple;
use crate::error::{Error, Result};
use crate::estimation::{fit, EstimatorKind, FitOptions, ParamVector, RegressionProblem};

/// GSM contribution of one observation under `N(mu, sigma²)`.
pub fn sm_contribution(y: f64, mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Domain(format!("sigma must be > 0, got {sigma}")));
    }
    let s2 = sigma * sigma;
    let r = y - mu;
    Ok(-2.0 / s2 + r * r / (s2 * s2))
}

/// Mean GSM contribution over the sample.
pub fn gsm_objective(problem: &RegressionProblem, params: &ParamVector) -> Result<f64> {
    if params.coef.len() != problem.p() {
        return Err(Error::ShapeMismatch("coefficient length".into()));
    }
    let mu = problem.design() * &params.coef;
    let sigma = params.sigma();
    let mut acc = 0.0;
    for (y, m) in problem.response().iter().zip(mu.iter()) {
        acc += sm_contribution(*y, *m, sigma)?;
    }
    Ok(acc / problem.n() as f64)
}

/// Candidate values for each tuning parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuningGrid {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
}

fn lattice(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n)
        .map(|k| ((lo + k as f64 * step) * 1e10).round() / 1e10)
        .collect()
}

impl TuningGrid {
    pub fn new(alphas: Vec<f64>, betas: Vec<f64>, gammas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() || betas.is_empty() || gammas.is_empty() {
            return Err(Error::InvalidConfig(
                "tuning grids must be non-empty".into(),
            ));
        }
        if alphas.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidConfig("grid alphas must be > 0".into()));
        }
        if betas.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(Error::InvalidConfig("grid betas must lie in [0, 1]".into()));
        }
        if gammas.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
            return Err(Error::InvalidConfig("grid gammas must be > 0".into()));
        }
        let mut grid = Self {
            alphas,
            betas,
            gammas,
        };
        for v in [&mut grid.alphas, &mut grid.betas, &mut grid.gammas] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        Ok(grid)
    }

    /// α ∈ {0.1..1.0}, β ∈ {0.1..0.9}, γ ∈ {0.1..1.0}, step 0.1.
    pub fn default_epd() -> Self {
        Self::new(
            lattice(0.1, 1.0, 0.1),
            lattice(0.1, 0.9, 0.1),
            lattice(0.1, 1.0, 0.1),
        )
        .expect("static grid")
    }

    /// γ ∈ {0.05, 0.10, .., 1.0} for the density power divergence.
    pub fn default_dpd() -> Self {
        Self::new(vec![1.0], vec![0.0], lattice(0.05, 1.0, 0.05)).expect("static grid")
    }

    /// Triples visited for `family`; `Dpd` only walks the gammas.
    pub fn triples(&self, family: TuningFamily) -> Vec<TuningTriple> {
        match family {
            TuningFamily::Dpd => self
                .gammas
                .iter()
                .map(|&g| TuningTriple::dpd(g).expect("validated"))
                .collect(),
            TuningFamily::Epd => {
                let mut out =
                    Vec::with_capacity(self.alphas.len() * self.betas.len() * self.gammas.len());
                for &a in &self.alphas {
                    for &b in &self.betas {
                        for &g in &self.gammas {
                            out.push(TuningTriple::new(a, b, g).expect("validated"));
                        }
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TuningFamily {
    Dpd,
    Epd,
}

impl TuningFamily {
    pub fn estimator(&self) -> EstimatorKind {
        match self {
            TuningFamily::Dpd => EstimatorKind::Dpde,
            TuningFamily::Epd => EstimatorKind::Epde,
        }
    }
}

/// Tuning triples for the two robust estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TuningMap {
    pub dpd: TuningTriple,
    pub epd: TuningTriple,
}

impl TuningMap {
    pub fn for_kind(&self, kind: EstimatorKind) -> TuningTriple {
        match kind {
            EstimatorKind::Mle => TuningTriple::likelihood(),
            EstimatorKind::Dpde => self.dpd,
            EstimatorKind::Epde => self.epd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuningSelection {
    pub best: TuningTriple,
    pub best_score: f64,
    /// `(triple, S_n)` for every grid point that produced a converged fit.
    pub table: Vec<(TuningTriple, f64)>,
    /// Grid points whose fit failed or did not converge.
    pub failures: Vec<TuningTriple>,
}

/// Orders candidates by score, then smallest γ, β, α.
pub(crate) fn tie_break_key(
    a: &(TuningTriple, f64),
    b: &(TuningTriple, f64),
) -> std::cmp::Ordering {
    a.1.total_cmp(&b.1)
        .then(a.0.gamma().total_cmp(&b.0.gamma()))
        .then(a.0.beta().total_cmp(&b.0.beta()))
        .then(a.0.alpha().total_cmp(&b.0.alpha()))
}

/// Picks the argmin of a scored table with the documented tie-break.
pub(crate) fn pick_best(scored: Vec<(TuningTriple, Option<f64>)>) -> Result<TuningSelection> {
    let mut table = Vec::new();
    let mut failures = Vec::new();
    for (t, s) in scored {
        match s {
            Some(v) if v.is_finite() => table.push((t, v)),
            _ => failures.push(t),
        }
    }
    let best = table
        .iter()
        .min_by(|a, b| tie_break_key(a, b))
        .copied()
        .ok_or(Error::AllPointsFailed)?;
    Ok(TuningSelection {
        best: best.0,
        best_score: best.1,
        table,
        failures,
    })
}

/// Fits the estimator at every grid triple and returns the one minimizing
/// the in-sample GSM objective.
pub fn select_tuning(
    problem: &RegressionProblem,
    grid: &TuningGrid,
    family: TuningFamily,
    opts: &FitOptions,
) -> Result<TuningSelection> {
    let kind = family.estimator();
    let scored: Vec<(TuningTriple, Option<f64>)> = grid
        .triples(family)
        .into_par_iter()
        .map(|t| {
            let score = fit(problem, &t, kind, None, opts)
                .ok()
                .filter(|f| f.converged)
                .and_then(|f| gsm_objective(problem, &f.params).ok());
            (t, score)
        })
        .collect();
    pick_best(scored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn contribution_values() {
        assert_eq!(sm_contribution(1.0, 1.0, 1.0).unwrap(), -2.0);
        assert_eq!(sm_contribution(2.0, 1.0, 1.0).unwrap(), -1.0);
        assert!(sm_contribution(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn default_grids_are_on_lattice() {
        let g = TuningGrid::default_epd();
        assert_eq!(g.alphas.len(), 10);
        assert_eq!(g.betas.len(), 9);
        assert_eq!(g.gammas.len(), 10);
        assert!(g.gammas.contains(&0.3) && g.betas.contains(&0.7));
        let d = TuningGrid::default_dpd();
        assert_eq!(d.gammas.len(), 20);
        assert!(d.gammas.contains(&0.35));
    }

    #[test]
    fn grid_validation() {
        assert!(TuningGrid::new(vec![], vec![0.1], vec![0.1]).is_err());
        assert!(TuningGrid::new(vec![0.1], vec![1.5], vec![0.1]).is_err());
        assert!(TuningGrid::new(vec![0.1], vec![0.5], vec![0.0]).is_err());
    }

    #[test]
    fn single_point_grid_returns_that_point() {
        let x = DMatrix::from_fn(25, 2, |i, j| if j == 0 { 1.0 } else { i as f64 / 5.0 });
        let y = DVector::from_fn(25, |i, _| {
            1.0 + x[(i, 1)] + ((i * 5 % 9) as f64 - 4.0) * 0.1
        });
        let prob = RegressionProblem::new(x, y).unwrap();
        let grid = TuningGrid::new(vec![0.2], vec![0.4], vec![0.6]).unwrap();
        let sel = select_tuning(&prob, &grid, TuningFamily::Epd, &FitOptions::default()).unwrap();
        assert_eq!(sel.best, TuningTriple::new(0.2, 0.4, 0.6).unwrap());
        assert_eq!(sel.table.len() + sel.failures.len(), 1);
    }

    #[test]
    fn ties_prefer_small_gamma_then_beta_then_alpha() {
        let t = |a, b, g| TuningTriple::new(a, b, g).unwrap();
        let scored = vec![
            (t(0.1, 0.5, 0.4), Some(1.0)),
            (t(0.2, 0.3, 0.2), Some(1.0)),
            (t(0.1, 0.3, 0.2), Some(1.0)),
            (t(0.1, 0.1, 0.9), Some(2.0)),
            (t(0.1, 0.1, 0.1), None),
        ];
        let sel = pick_best(scored).unwrap();
        assert_eq!(sel.best, t(0.1, 0.3, 0.2));
        assert_eq!(sel.failures.len(), 1);
        assert!(matches!(
            pick_best(vec![(t(0.1, 0.1, 0.1), None)]),
            Err(Error::AllPointsFailed)
        ));
    }
}
