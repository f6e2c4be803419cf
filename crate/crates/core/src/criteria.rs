//! EPDIC / DPDIC / MLIC and influence-function diagnostics.
//!
//! All three criteria share the form `n·H_n(θ̂) + tr(Ω̂ Ψ̂⁻¹)`; they differ only
//! in the objective (and therefore in the sandwich matrices) used.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::divergence::{samplewise_contribution, UnivariateGaussian};
use crate::error::{Error, Result};
use crate::estimation::{sandwich, EstimatorKind, FitResult, RegressionProblem};
use crate::linalg::trace_solve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CriterionKind {
    Epdic,
    Dpdic,
    Mlic,
}

impl CriterionKind {
    pub const ALL: [CriterionKind; 3] = [
        CriterionKind::Epdic,
        CriterionKind::Dpdic,
        CriterionKind::Mlic,
    ];

    /// Estimator whose fit this criterion is evaluated at.
    pub fn estimator(&self) -> EstimatorKind {
        match self {
            CriterionKind::Epdic => EstimatorKind::Epde,
            CriterionKind::Dpdic => EstimatorKind::Dpde,
            CriterionKind::Mlic => EstimatorKind::Mle,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            CriterionKind::Epdic => "EPDIC",
            CriterionKind::Dpdic => "DPDIC",
            CriterionKind::Mlic => "MLIC",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "epdic" => Ok(CriterionKind::Epdic),
            "dpdic" => Ok(CriterionKind::Dpdic),
            "mlic" => Ok(CriterionKind::Mlic),
            other => Err(Error::InvalidConfig(format!("unknown criterion `{other}`"))),
        }
    }
}

impl std::fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// One criterion value with its decomposition; `total = fit_term + penalty`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub kind: CriterionKind,
    pub fit_term: f64,
    pub penalty: f64,
    pub total: f64,
}

impl CriterionReport {
    pub fn new(kind: CriterionKind, fit_term: f64, penalty: f64) -> Self {
        Self {
            kind,
            fit_term,
            penalty,
            total: fit_term + penalty,
        }
    }

    /// `n·objective + tr(Ω Ψ⁻¹)`.
    pub fn assemble(
        kind: CriterionKind,
        n: usize,
        objective: f64,
        omega: &DMatrix<f64>,
        psi: &DMatrix<f64>,
    ) -> Result<Self> {
        let penalty = trace_solve(omega, psi)?;
        Ok(Self::new(kind, n as f64 * objective, penalty))
    }
}

/// Checks that a fit of estimator `fit_kind` with `β = beta` may be scored
/// by `kind`.
pub fn check_kind(kind: CriterionKind, fit_kind: EstimatorKind, beta: f64) -> Result<()> {
    let ok = match kind {
        CriterionKind::Mlic => fit_kind == EstimatorKind::Mle,
        CriterionKind::Dpdic => fit_kind != EstimatorKind::Mle && beta == 0.0,
        CriterionKind::Epdic => fit_kind != EstimatorKind::Mle,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::KindMismatch(format!(
            "{kind} cannot score a {fit_kind} fit with beta = {beta}"
        )))
    }
}

/// Criterion value at a converged regression fit.
pub fn criterion(
    problem: &RegressionProblem,
    fit: &FitResult,
    kind: CriterionKind,
) -> Result<CriterionReport> {
    check_kind(kind, fit.kind, fit.tuning.beta())?;
    let sw = sandwich(problem, fit)?;
    CriterionReport::assemble(
        kind,
        fit.n_obs,
        fit.objective_value,
        &sw.omega_hat,
        &sw.psi_hat,
    )
}

/// Dominant influence term `n · V(y; N(xᵀβ̂, σ̂))` of the criterion at the
/// contamination point `(x_pt, y_pt)`. The penalty's influence is `O(1)` and
/// not included.
pub fn influence_value(fit: &FitResult, y_pt: f64, x_pt: &DVector<f64>) -> Result<f64> {
    if x_pt.len() != fit.params.coef.len() {
        return Err(Error::ShapeMismatch(
            "x_pt must have one entry per coefficient".into(),
        ));
    }
    let g = UnivariateGaussian::new(x_pt.dot(&fit.params.coef), fit.params.sigma())?;
    Ok(fit.n_obs as f64 * samplewise_contribution(y_pt, &g, &fit.tuning)?)
}

/// Symmetric scan grid around the fitted mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Half-width in units of `σ̂`.
    pub half_width: f64,
    /// Number of grid points (made odd so the mode is on the grid).
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            half_width: 100.0,
            points: 10_001,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundednessScan {
    pub sup_abs: f64,
    pub argmax_y: f64,
    /// Widening the grid tenfold changed the supremum by less than `1e-6`.
    pub bounded: bool,
    /// The `O(1)` penalty influence is not part of `sup_abs`.
    pub penalty_influence_excluded: bool,
}

fn scan_sup(
    fit: &FitResult,
    x_pt: &DVector<f64>,
    mode: f64,
    half: f64,
    points: usize,
) -> Result<(f64, f64)> {
    let points = points.max(3) | 1;
    let sigma = fit.params.sigma();
    let mut best = (f64::NEG_INFINITY, mode);
    for k in 0..points {
        let u = -1.0 + 2.0 * k as f64 / (points - 1) as f64;
        let y = mode + u * half * sigma;
        let v = influence_value(fit, y, x_pt)?.abs();
        if v > best.0 {
            best = (v, y);
        }
    }
    Ok(best)
}

/// Supremum of `|IF|` on the grid and whether it is stable under widening.
pub fn boundedness_scan(
    fit: &FitResult,
    x_pt: &DVector<f64>,
    grid: &GridSpec,
) -> Result<BoundednessScan> {
    if x_pt.len() != fit.params.coef.len() {
        return Err(Error::ShapeMismatch(
            "x_pt must have one entry per coefficient".into(),
        ));
    }
    let mode = x_pt.dot(&fit.params.coef);
    let (sup, arg) = scan_sup(fit, x_pt, mode, grid.half_width, grid.points)?;
    let (wide, wide_arg) = scan_sup(fit, x_pt, mode, 10.0 * grid.half_width, grid.points)?;
    let (sup_wide, _) = if wide > sup {
        (wide, wide_arg)
    } else {
        (sup, arg)
    };
    Ok(BoundednessScan {
        sup_abs: sup,
        argmax_y: arg,
        bounded: (sup_wide - sup).abs() < 1e-6,
        penalty_influence_excluded: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::TuningTriple;
    use crate::estimation::{fit, FitOptions};

    fn problem() -> RegressionProblem {
        let x = DMatrix::from_fn(
            40,
            2,
            |i, j| if j == 0 { 1.0 } else { (i as f64 * 0.71).cos() },
        );
        let y = DVector::from_fn(40, |i, _| {
            1.0 + 2.0 * x[(i, 1)] + ((i * 13 % 7) as f64 - 3.0) * 0.2
        });
        RegressionProblem::new(x, y).unwrap()
    }

    #[test]
    fn total_is_sum_of_parts() {
        let r = CriterionReport::new(CriterionKind::Epdic, 12.5, 3.25);
        assert_eq!(r.total, 15.75);
    }

    #[test]
    fn kind_mismatch_is_reported() {
        let prob = problem();
        let t = TuningTriple::new(0.1, 0.7, 0.3).unwrap();
        let f = fit(&prob, &t, EstimatorKind::Epde, None, &FitOptions::default()).unwrap();
        assert!(matches!(
            criterion(&prob, &f, CriterionKind::Mlic),
            Err(Error::KindMismatch(_))
        ));
        assert!(matches!(
            criterion(&prob, &f, CriterionKind::Dpdic),
            Err(Error::KindMismatch(_))
        ));
        assert!(criterion(&prob, &f, CriterionKind::Epdic).is_ok());
    }

    #[test]
    fn fit_term_is_n_times_objective() {
        let prob = problem();
        let t = TuningTriple::new(0.1, 0.7, 0.3).unwrap();
        let f = fit(&prob, &t, EstimatorKind::Epde, None, &FitOptions::default()).unwrap();
        let r = criterion(&prob, &f, CriterionKind::Epdic).unwrap();
        let h = crate::estimation::empirical_objective(&prob, &f.params, &t, EstimatorKind::Epde)
            .unwrap();
        assert!((r.fit_term - 40.0 * h).abs() < 1e-12);
        assert!(r.penalty >= 0.0);
    }

    #[test]
    fn scan_doubles_with_n() {
        let prob = problem();
        let t = TuningTriple::new(0.1, 0.5, 0.3).unwrap();
        let mut f = fit(&prob, &t, EstimatorKind::Epde, None, &FitOptions::default()).unwrap();
        let x = DVector::from_vec(vec![1.0, 0.3]);
        let grid = GridSpec {
            half_width: 100.0,
            points: 1001,
        };
        let a = boundedness_scan(&f, &x, &grid).unwrap();
        f.n_obs *= 2;
        let b = boundedness_scan(&f, &x, &grid).unwrap();
        assert_eq!(b.sup_abs, 2.0 * a.sup_abs);
    }

    #[test]
    fn parse_labels() {
        for k in CriterionKind::ALL {
            assert_eq!(CriterionKind::parse(k.label()).unwrap(), k);
        }
        assert!(CriterionKind::parse("bic").is_err());
    }
}
