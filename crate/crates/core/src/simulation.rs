//! Seeded Monte Carlo studies on contaminated linear regression.
//!
//! Data follow `y_i = x_iᵀβ₀ + ε_i` with `x_i ~ N(0, Σ)`, `Σ_jk = ρ^{|j−k|}`
//! and `ε_i ~ N(0, σ²)`. Two contamination schemes are available:
//! vertical outliers (a fraction of the errors redrawn from `N(10.6, 1)`) and
//! leverage outliers (a fraction of covariate rows redrawn from
//! `N(45.6, 6.3²)`).
//!
//! Replication `r` draws from ChaCha8 seeded with `base_seed` on stream `r`,
//! so every replication is reproducible on its own and the study result does
//! not depend on thread scheduling.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{criterion, CriterionKind, CriterionReport};
use crate::divergence::TuningTriple;
use crate::error::{Error, Result};
use crate::estimation::{fit, EstimatorKind, FitOptions, RegressionProblem};
use crate::io::fmt_num;
use crate::linalg::cholesky_lower;
pub use crate::tuning::TuningMap;
use crate::tuning::{select_tuning, TuningFamily, TuningGrid};

pub const ERROR_OUTLIER_MEAN: f64 = 10.6;
pub const ERROR_OUTLIER_SD: f64 = 1.0;
pub const LEVERAGE_MEAN: f64 = 45.6;
pub const LEVERAGE_SD: f64 = 6.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    Pure,
    /// Vertical outliers: errors replaced.
    ErrorContam,
    /// Leverage outliers: covariate rows replaced.
    CovContam,
}

impl Scheme {
    /// `0`, `1`, `2` or the variant name, case-insensitive.
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "0" | "pure" => Ok(Scheme::Pure),
            "1" | "errorcontam" | "error" => Ok(Scheme::ErrorContam),
            "2" | "covcontam" | "cov" | "covariate" => Ok(Scheme::CovContam),
            other => Err(Error::InvalidConfig(format!("unknown scheme `{other}`"))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Scheme::Pure => "pure",
            Scheme::ErrorContam => "error",
            Scheme::CovContam => "covariate",
        }
    }

    /// Contamination levels used in the reference study.
    pub fn preset_deltas(&self) -> &'static [f64] {
        match self {
            Scheme::Pure => &[0.0],
            Scheme::ErrorContam => &[0.052, 0.093, 0.134],
            Scheme::CovContam => &[0.058, 0.099, 0.140],
        }
    }
}

/// Which coordinates of a selected covariate row are redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LeverageMode {
    AllCoordinates,
    /// One uniformly chosen coordinate per selected row.
    SingleCoordinate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub beta0: Vec<f64>,
    pub sigma: f64,
    pub scheme: Scheme,
    pub delta: f64,
    pub reps: usize,
    pub base_seed: u64,
    pub leverage_mode: LeverageMode,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 150,
            p: 5,
            rho: 0.5,
            beta0: vec![1.5, -1.0, 0.8, 0.5, -0.7],
            sigma: 1.0,
            scheme: Scheme::Pure,
            delta: 0.0,
            reps: 1000,
            base_seed: 2024,
            leverage_mode: LeverageMode::AllCoordinates,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.delta) {
            return Err(Error::InvalidConfig(format!(
                "delta must lie in [0, 0.5), got {}",
                self.delta
            )));
        }
        if self.p == 0 || self.beta0.len() != self.p {
            return Err(Error::InvalidConfig(format!(
                "beta0 has {} entries but p = {}",
                self.beta0.len(),
                self.p
            )));
        }
        if self.n <= self.p + 1 {
            return Err(Error::InvalidConfig(format!(
                "n = {} too small for p = {}",
                self.n, self.p
            )));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "|rho| must be < 1, got {}",
                self.rho
            )));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "sigma must be > 0, got {}",
                self.sigma
            )));
        }
        if self.reps == 0 {
            return Err(Error::InvalidConfig("reps must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of contaminated rows, `⌈δn⌉` (zero for the pure scheme).
    pub fn contaminated_count(&self) -> usize {
        if self.scheme == Scheme::Pure || self.delta == 0.0 {
            0
        } else {
            // the epsilon keeps products such as 0.1·150 from rounding up
            (self.delta * self.n as f64 - 1e-9).ceil() as usize
        }
    }

    pub fn beta0_vector(&self) -> DVector<f64> {
        DVector::from_vec(self.beta0.clone())
    }
}

/// `Σ_jk = ρ^{|j−k|}`.
pub fn ar1_covariance(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |j, k| rho.powi((j as i32 - k as i32).abs()))
}

/// The RNG of replication `rep`.
pub fn replication_rng(base_seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(rep as u64);
    rng
}

/// One synthetic data set plus the indices of the contaminated rows.
#[derive(Debug, Clone)]
pub struct SimDraw {
    pub problem: RegressionProblem,
    /// Ascending.
    pub contaminated: Vec<usize>,
}

/// Draws replication `rep` of `config`.
pub fn generate(config: &SimConfig, rep: usize) -> Result<RegressionProblem> {
    generate_with_indices(config, rep).map(|d| d.problem)
}

pub fn generate_with_indices(config: &SimConfig, rep: usize) -> Result<SimDraw> {
    config.validate()?;
    let (n, p) = (config.n, config.p);
    let l = cholesky_lower(&ar1_covariance(p, config.rho), "AR(1) covariance")?;
    let mut rng = replication_rng(config.base_seed, rep);

    let z = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut x = z * l.transpose();
    let mut err = DVector::from_fn(n, |_, _| {
        config.sigma * rng.sample::<f64, _>(StandardNormal)
    });

    let k = config.contaminated_count();
    let mut idx = sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    let beta0 = config.beta0_vector();
    match config.scheme {
        Scheme::ErrorContam if k > 0 => {
            let d = Normal::new(ERROR_OUTLIER_MEAN, ERROR_OUTLIER_SD).expect("static parameters");
            for &i in &idx {
                err[i] = d.sample(&mut rng);
            }
        }
        _ => {}
    }
    let y = &x * &beta0 + err;
    if config.scheme == Scheme::CovContam && k > 0 {
        let d = Normal::new(LEVERAGE_MEAN, LEVERAGE_SD).expect("static parameters");
        for &i in &idx {
            match config.leverage_mode {
                LeverageMode::AllCoordinates => {
                    for j in 0..p {
                        x[(i, j)] = d.sample(&mut rng);
                    }
                }
                LeverageMode::SingleCoordinate => {
                    let j = rng.random_range(0..p);
                    x[(i, j)] = d.sample(&mut rng);
                }
            }
        }
    }
    Ok(SimDraw {
        problem: RegressionProblem::new(x, y)?,
        contaminated: idx,
    })
}

/// Reference tuning values per scheme and contamination level, when listed.
pub fn preset_tuning(scheme: Scheme, delta: f64) -> Option<TuningMap> {
    const TABLE: [(Scheme, f64, f64, f64, f64, f64); 7] = [
        (Scheme::Pure, 0.0, 0.95, 0.10, 0.70, 0.30),
        (Scheme::ErrorContam, 0.052, 0.25, 0.10, 0.60, 0.70),
        (Scheme::ErrorContam, 0.093, 0.35, 0.10, 0.70, 0.30),
        (Scheme::ErrorContam, 0.134, 0.40, 0.40, 0.70, 0.60),
        (Scheme::CovContam, 0.058, 0.15, 0.10, 0.70, 0.90),
        (Scheme::CovContam, 0.099, 0.25, 0.10, 0.60, 0.70),
        (Scheme::CovContam, 0.140, 0.20, 0.10, 0.70, 0.90),
    ];
    let scheme = if delta == 0.0 { Scheme::Pure } else { scheme };
    TABLE
        .iter()
        .find(|r| r.0 == scheme && (r.1 - delta).abs() < 1e-12)
        .map(|r| TuningMap {
            dpd: TuningTriple::dpd(r.2).expect("static"),
            epd: TuningTriple::new(r.3, r.4, r.5).expect("static"),
        })
}

/// Where each replication gets its tuning triples from.
#[derive(Debug, Clone, PartialEq)]
pub enum TuningSource {
    Fixed(TuningMap),
    /// Re-select by score matching on every replication.
    Gsm {
        dpd: TuningGrid,
        epd: TuningGrid,
    },
}

/// One estimator on one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepRecord {
    pub rep: usize,
    pub estimator: EstimatorKind,
    pub tuning: TuningTriple,
    pub coef: Vec<f64>,
    pub sigma_hat: f64,
    pub criterion: CriterionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepFailure {
    pub rep: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub estimator: EstimatorKind,
    pub criterion_kind: CriterionKind,
    pub coef_mean: Vec<f64>,
    pub coef_sd: Vec<f64>,
    pub sigma_mean: f64,
    pub fit_term_mean: f64,
    pub penalty_mean: f64,
    pub criterion_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub config: SimConfig,
    /// Ordered MLE, DPDE, EPDE.
    pub estimators: Vec<EstimatorSummary>,
    /// Rep-major, then estimator order.
    pub records: Vec<RepRecord>,
    pub failures: Vec<RepFailure>,
}

impl MonteCarloSummary {
    pub fn summary(&self, kind: EstimatorKind) -> &EstimatorSummary {
        self.estimators
            .iter()
            .find(|s| s.estimator == kind)
            .expect("every estimator is summarized")
    }

    /// Records of one estimator, in replication order.
    pub fn records_for(&self, kind: EstimatorKind) -> impl Iterator<Item = &RepRecord> {
        self.records.iter().filter(move |r| r.estimator == kind)
    }

    /// Long-format CSV: one row per (replication, estimator).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let p = self.config.p;
        let mut header = vec![
            "rep".to_string(),
            "scheme".into(),
            "delta".into(),
            "estimator".into(),
        ];
        header.extend((1..=p).map(|j| format!("beta{j}")));
        header.extend(
            [
                "sigma_hat",
                "criterion_kind",
                "fit_term",
                "penalty",
                "total",
            ]
            .map(String::from),
        );
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![
                r.rep.to_string(),
                self.config.scheme.label().to_string(),
                fmt_num(self.config.delta),
                r.estimator.label().to_string(),
            ];
            row.extend(r.coef.iter().map(|&b| fmt_num(b)));
            row.push(fmt_num(r.sigma_hat));
            row.push(r.criterion.kind.label().to_string());
            row.push(fmt_num(r.criterion.fit_term));
            row.push(fmt_num(r.criterion.penalty));
            row.push(fmt_num(r.criterion.total));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn matching_criterion(kind: EstimatorKind) -> CriterionKind {
    match kind {
        EstimatorKind::Mle => CriterionKind::Mlic,
        EstimatorKind::Dpde => CriterionKind::Dpdic,
        EstimatorKind::Epde => CriterionKind::Epdic,
    }
}

fn run_replication(
    config: &SimConfig,
    rep: usize,
    tuning: &TuningSource,
    opts: &FitOptions,
) -> Result<Vec<RepRecord>> {
    let problem = generate(config, rep)?;
    let map = match tuning {
        TuningSource::Fixed(m) => *m,
        TuningSource::Gsm { dpd, epd } => TuningMap {
            dpd: select_tuning(&problem, dpd, TuningFamily::Dpd, opts)?.best,
            epd: select_tuning(&problem, epd, TuningFamily::Epd, opts)?.best,
        },
    };
    EstimatorKind::ALL
        .iter()
        .map(|&kind| {
            let t = map.for_kind(kind);
            let f = fit(&problem, &t, kind, None, opts)?;
            let c = criterion(&problem, &f, matching_criterion(kind))?;
            Ok(RepRecord {
                rep,
                estimator: kind,
                tuning: f.tuning,
                coef: f.params.coef.iter().copied().collect(),
                sigma_hat: f.params.sigma(),
                criterion: c,
            })
        })
        .collect()
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

/// Runs `config.reps` replications, fitting all three estimators and scoring
/// each with its own criterion. A replication in which any fit fails or does
/// not converge is recorded as a failure; more than 10% failures abort.
pub fn run_study(
    config: &SimConfig,
    tuning: &TuningSource,
    opts: &FitOptions,
) -> Result<MonteCarloSummary> {
    config.validate()?;
    let outcomes: Vec<Result<Vec<RepRecord>>> = (0..config.reps)
        .into_par_iter()
        .map(|rep| run_replication(config, rep, tuning, opts))
        .collect();
    let mut records = Vec::with_capacity(config.reps * EstimatorKind::ALL.len());
    let mut failures = Vec::new();
    for (rep, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) => records.extend(r),
            Err(e) => failures.push(RepFailure {
                rep,
                message: e.to_string(),
            }),
        }
    }
    if failures.len() * 10 > config.reps {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total: config.reps,
        });
    }
    let estimators = EstimatorKind::ALL
        .iter()
        .map(|&kind| {
            let rs: Vec<&RepRecord> = records.iter().filter(|r| r.estimator == kind).collect();
            let (coef_mean, coef_sd) = (0..config.p)
                .map(|j| mean_sd(&rs.iter().map(|r| r.coef[j]).collect::<Vec<_>>()))
                .unzip();
            let col =
                |f: fn(&RepRecord) -> f64| mean_sd(&rs.iter().map(|r| f(r)).collect::<Vec<_>>()).0;
            EstimatorSummary {
                estimator: kind,
                criterion_kind: matching_criterion(kind),
                coef_mean,
                coef_sd,
                sigma_mean: col(|r| r.sigma_hat),
                fit_term_mean: col(|r| r.criterion.fit_term),
                penalty_mean: col(|r| r.criterion.penalty),
                criterion_mean: col(|r| r.criterion.total),
            }
        })
        .collect();
    Ok(MonteCarloSummary {
        config: config.clone(),
        estimators,
        records,
        failures,
    })
}
