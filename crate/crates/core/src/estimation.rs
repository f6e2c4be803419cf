//! Minimum-divergence estimation for Gaussian linear regression.
//!
//! The parameter is `θ = (coef, log σ)`; `σ` can optionally be held fixed, in
//! which case `θ = coef`. Three estimators share one code path:
//!
//! | kind   | objective                                     |
//! |--------|-----------------------------------------------|
//! | `Mle`  | mean negative log-likelihood                  |
//! | `Dpde` | EPD objective with `β = 0` (density power)    |
//! | `Epde` | EPD objective with the full `(α, β, γ)`       |
//!
//! Because the model density is Gaussian, every model-side integral depends on
//! `σ` only and is available in closed form (or as a rapidly converging power
//! series), so objective, gradient and the curvature matrix are exact.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::divergence::{
    d1_from_log, exp_curvature_series, log_gaussian_power_integral, model_term, model_term_dlogdet,
    weight_from_log, TuningTriple, LN_2PI,
};
use crate::error::{Error, Result};
use crate::linalg::{check_full_rank, cholesky_lower, ols, symmetrize};
use crate::optim::{minimize, MinimizeOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorKind {
    Mle,
    Dpde,
    Epde,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] =
        [EstimatorKind::Mle, EstimatorKind::Dpde, EstimatorKind::Epde];

    /// The triple actually used by this estimator: the likelihood limit for
    /// `Mle`, `(0, 0, γ)` for `Dpde`, and `t` unchanged for `Epde`.
    pub fn effective_tuning(&self, t: &TuningTriple) -> TuningTriple {
        match self {
            EstimatorKind::Mle => TuningTriple::likelihood(),
            EstimatorKind::Dpde => TuningTriple::dpd(t.gamma()).expect("valid gamma"),
            EstimatorKind::Epde => *t,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::Mle => "MLE",
            EstimatorKind::Dpde => "DPDE",
            EstimatorKind::Epde => "EPDE",
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Design matrix (rows `x_i`) and response `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    design: DMatrix<f64>,
    response: DVector<f64>,
    names: Vec<String>,
}

impl RegressionProblem {
    pub fn new(design: DMatrix<f64>, response: DVector<f64>) -> Result<Self> {
        let names = (1..=design.ncols()).map(|j| format!("x{j}")).collect();
        Self::with_names(design, response, names)
    }

    pub fn with_names(
        design: DMatrix<f64>,
        response: DVector<f64>,
        names: Vec<String>,
    ) -> Result<Self> {
        let (n, p) = design.shape();
        if response.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "design has {n} rows but response has {} entries",
                response.len()
            )));
        }
        if names.len() != p {
            return Err(Error::ShapeMismatch(
                "one name per design column required".into(),
            ));
        }
        if p == 0 || n <= p {
            return Err(Error::SingularDesign(format!(
                "need n > p >= 1, got n = {n}, p = {p}"
            )));
        }
        if design.iter().chain(response.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite value in data".into()));
        }
        let constant = (0..p)
            .filter(|&j| {
                let col = design.column(j);
                col.max() == col.min()
            })
            .count();
        if constant > 1 {
            return Err(Error::SingularDesign(format!(
                "{constant} constant columns; only a single intercept column is allowed"
            )));
        }
        check_full_rank(&design)?;
        Ok(Self {
            design,
            response,
            names,
        })
    }

    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn p(&self) -> usize {
        self.design.ncols()
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Index of the constant (intercept) column, if any.
    pub fn intercept_index(&self) -> Option<usize> {
        (0..self.p()).find(|&j| {
            let col = self.design.column(j);
            col.max() == col.min()
        })
    }

    /// Problem restricted to the given design columns.
    pub fn subset(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.p()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: self.p(),
            });
        }
        let design = self.design.select_columns(cols);
        let names = cols.iter().map(|&c| self.names[c].clone()).collect();
        Self::with_names(design, self.response.clone(), names)
    }

    /// Same design with a new response vector.
    pub fn with_response(&self, response: DVector<f64>) -> Result<Self> {
        Self::with_names(self.design.clone(), response, self.names.clone())
    }
}

/// `θ = (coef, log σ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub coef: DVector<f64>,
    pub log_sigma: f64,
}

impl ParamVector {
    pub fn new(coef: DVector<f64>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Domain(format!("sigma must be > 0, got {sigma}")));
        }
        Ok(Self {
            coef,
            log_sigma: sigma.ln(),
        })
    }

    pub fn sigma(&self) -> f64 {
        self.log_sigma.exp()
    }

    fn check(&self, p: usize) -> Result<()> {
        if self.coef.len() != p {
            return Err(Error::ShapeMismatch(format!(
                "coefficient vector has length {}, design has {p} columns",
                self.coef.len()
            )));
        }
        if self.coef.iter().any(|c| !c.is_finite()) || !self.log_sigma.is_finite() {
            return Err(Error::Domain("parameters must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub rel_obj_tol: f64,
    /// Hold `σ` at this value instead of estimating it.
    pub fixed_sigma: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-8,
            rel_obj_tol: 1e-10,
            fixed_sigma: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: ParamVector,
    pub kind: EstimatorKind,
    /// Effective triple (the likelihood limit for `Mle`).
    pub tuning: TuningTriple,
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub grad_inf_norm: f64,
    /// Per-sample gradient contributions, `n × q`.
    pub per_sample_scores: DMatrix<f64>,
    /// Accepted objective values, starting at the initial point.
    pub objective_trace: Vec<f64>,
    pub fixed_sigma: Option<f64>,
    pub n_obs: usize,
}

impl FitResult {
    /// Number of estimated parameters `q`.
    pub fn dim(&self) -> usize {
        self.params.coef.len() + usize::from(self.fixed_sigma.is_none())
    }
}

/// Plug-in sandwich matrices of the estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichMatrices {
    pub psi_hat: DMatrix<f64>,
    pub omega_hat: DMatrix<f64>,
    pub xi_hat: DVector<f64>,
}

impl SandwichMatrices {
    /// `Ψ⁻¹ Ω Ψ⁻¹`, the asymptotic covariance of `√n (θ̂ − θ)`.
    pub fn asymptotic_covariance(&self) -> Result<DMatrix<f64>> {
        let chol = self
            .psi_hat
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NonPositiveDefinite("psi_hat".into()))?;
        let left = chol.solve(&self.omega_hat);
        Ok(symmetrize(&chol.solve(&left.transpose())))
    }
}

struct Evaluation {
    value: f64,
    grad: DVector<f64>,
    scores: Option<DMatrix<f64>>,
}

fn evaluate(
    problem: &RegressionProblem,
    coef: &DVector<f64>,
    log_sigma: f64,
    t: &TuningTriple,
    kind: EstimatorKind,
    estimate_scale: bool,
    want_scores: bool,
) -> Result<Evaluation> {
    let (n, p) = (problem.n(), problem.p());
    let q = p + usize::from(estimate_scale);
    let sigma = log_sigma.exp();
    let t = kind.effective_tuning(t);
    let (model, dmodel) = match kind {
        EstimatorKind::Mle => (0.0, 0.0),
        _ => (
            model_term(1, 2.0 * log_sigma, &t)?,
            2.0 * model_term_dlogdet(1, 2.0 * log_sigma, &t)?,
        ),
    };
    let mu = problem.design() * coef;
    let mut value = 0.0;
    let mut grad = DVector::zeros(q);
    let mut scores = want_scores.then(|| DMatrix::zeros(n, q));
    for i in 0..n {
        let z = (problem.response()[i] - mu[i]) / sigma;
        let log_f = -0.5 * z * z - log_sigma - 0.5 * LN_2PI;
        let (v, w) = match kind {
            EstimatorKind::Mle => (-log_f, 1.0),
            _ => (model - d1_from_log(log_f, &t), weight_from_log(log_f, &t)),
        };
        value += v;
        let coef_scale = -w * z / sigma;
        for j in 0..p {
            let s = coef_scale * problem.design()[(i, j)];
            grad[j] += s;
            if let Some(sc) = scores.as_mut() {
                sc[(i, j)] = s;
            }
        }
        if estimate_scale {
            let s = dmodel - w * (z * z - 1.0);
            grad[p] += s;
            if let Some(sc) = scores.as_mut() {
                sc[(i, p)] = s;
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    value *= inv_n;
    grad *= inv_n;
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("objective or gradient".into()));
    }
    Ok(Evaluation {
        value,
        grad,
        scores,
    })
}

/// Value and gradient over `(coef[, log σ])` without allocating a
/// [`ParamVector`].
pub(crate) fn value_and_grad(
    problem: &RegressionProblem,
    coef: &DVector<f64>,
    log_sigma: f64,
    t: &TuningTriple,
    kind: EstimatorKind,
    estimate_scale: bool,
) -> Result<(f64, DVector<f64>)> {
    let e = evaluate(problem, coef, log_sigma, t, kind, estimate_scale, false)?;
    Ok((e.value, e.grad))
}

/// Empirical objective `H_n(θ) = (1/n) Σ V(Y_i; θ)` (mean negative
/// log-likelihood for `Mle`).
pub fn empirical_objective(
    problem: &RegressionProblem,
    params: &ParamVector,
    t: &TuningTriple,
    kind: EstimatorKind,
) -> Result<f64> {
    params.check(problem.p())?;
    Ok(evaluate(
        problem,
        &params.coef,
        params.log_sigma,
        t,
        kind,
        true,
        false,
    )?
    .value)
}

/// Gradient of [`empirical_objective`] with respect to `(coef, log σ)`.
pub fn objective_gradient(
    problem: &RegressionProblem,
    params: &ParamVector,
    t: &TuningTriple,
    kind: EstimatorKind,
) -> Result<DVector<f64>> {
    params.check(problem.p())?;
    Ok(evaluate(
        problem,
        &params.coef,
        params.log_sigma,
        t,
        kind,
        true,
        false,
    )?
    .grad)
}

/// Model-based curvature `Ψ = (1/n) Σ ∫ w(f_i) f_i u_i u_iᵀ` at `θ`, i.e. the
/// at-model plug-in in which every `(g − f)` term vanishes.
pub fn curvature_matrix(
    problem: &RegressionProblem,
    params: &ParamVector,
    t: &TuningTriple,
    kind: EstimatorKind,
    estimate_scale: bool,
) -> Result<DMatrix<f64>> {
    params.check(problem.p())?;
    let t = kind.effective_tuning(t);
    let log_det = 2.0 * params.log_sigma;
    let ik = |k: f64| log_gaussian_power_integral(1, log_det, k).exp();
    // E[z²] = 1/k and E[(z² − 1)²] = 3/k² − 2/k + 1 under the tilted density f^k / ∫f^k
    let scale_kernel = |k: f64| 3.0 / (k * k) - 2.0 / k + 1.0;
    let g1 = 1.0 + t.gamma();
    let mut coef_weight = (1.0 - t.beta()) * ik(g1);
    let mut scale_weight = (1.0 - t.beta()) * g1 * ik(g1) * scale_kernel(g1);
    if t.beta() > 0.0 {
        coef_weight += t.beta() * exp_curvature_series(t.alpha(), |k| ik(k) / k)?;
        scale_weight += t.beta() * exp_curvature_series(t.alpha(), |k| ik(k) * scale_kernel(k))?;
    }
    let (n, p) = (problem.n(), problem.p());
    let q = p + usize::from(estimate_scale);
    let sigma2 = (2.0 * params.log_sigma).exp();
    let xtx = problem.design().tr_mul(problem.design());
    let mut psi = DMatrix::zeros(q, q);
    psi.view_mut((0, 0), (p, p))
        .copy_from(&(xtx * (coef_weight / (n as f64 * sigma2))));
    if estimate_scale {
        psi[(p, p)] = scale_weight;
    }
    Ok(symmetrize(&psi))
}

fn default_init(problem: &RegressionProblem) -> Result<ParamVector> {
    let coef = ols(problem.design(), problem.response())?;
    let resid = problem.response() - problem.design() * &coef;
    let dof = (problem.n() - problem.p()) as f64;
    let sigma = (resid.norm_squared() / dof).sqrt().max(1e-8);
    ParamVector::new(coef, sigma)
}

/// Minimizes the objective of `kind` by damped quasi-Newton steps with
/// Armijo backtracking, starting from OLS and the residual standard
/// deviation unless `init` is given.
///
/// Hitting `max_iter` is not an error: the best iterate is returned with
/// `converged = false`.
pub fn fit(
    problem: &RegressionProblem,
    t: &TuningTriple,
    kind: EstimatorKind,
    init: Option<&ParamVector>,
    opts: &FitOptions,
) -> Result<FitResult> {
    let start = match init {
        Some(p) => {
            p.check(problem.p())?;
            p.clone()
        }
        None => default_init(problem)?,
    };
    let estimate_scale = opts.fixed_sigma.is_none();
    let log_sigma_fixed = match opts.fixed_sigma {
        Some(s) if s > 0.0 && s.is_finite() => s.ln(),
        Some(s) => return Err(Error::Domain(format!("fixed sigma must be > 0, got {s}"))),
        None => start.log_sigma,
    };
    let p = problem.p();
    let unpack = |x: &DVector<f64>| -> (DVector<f64>, f64) {
        let coef = x.rows(0, p).into_owned();
        let ls = if estimate_scale {
            x[p]
        } else {
            log_sigma_fixed
        };
        (coef, ls)
    };
    let mut x0 = start.coef.clone();
    if estimate_scale {
        x0 = x0.push(start.log_sigma);
    }
    let start_params = ParamVector {
        coef: start.coef.clone(),
        log_sigma: log_sigma_fixed,
    };
    let psi0 = curvature_matrix(problem, &start_params, t, kind, estimate_scale)?;
    let h0_inv = psi0
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .unwrap_or_else(|| DMatrix::identity(psi0.nrows(), psi0.ncols()));
    let mut caps = vec![f64::INFINITY; p];
    if estimate_scale {
        caps.push(1.0);
    }
    let mopts = MinimizeOptions {
        max_iter: opts.max_iter,
        grad_tol: opts.grad_tol,
        rel_obj_tol: opts.rel_obj_tol,
        step_caps: caps,
    };
    let out = minimize(
        |x| {
            let (c, ls) = unpack(x);
            let e = evaluate(problem, &c, ls, t, kind, estimate_scale, false)?;
            Ok((e.value, e.grad))
        },
        x0,
        h0_inv,
        &mopts,
    )?;
    let (coef, log_sigma) = unpack(&out.x);
    let fin = evaluate(problem, &coef, log_sigma, t, kind, estimate_scale, true)?;
    Ok(FitResult {
        params: ParamVector { coef, log_sigma },
        kind,
        tuning: kind.effective_tuning(t),
        objective_value: fin.value,
        iterations: out.iterations,
        converged: out.converged,
        grad_inf_norm: fin.grad.amax(),
        per_sample_scores: fin.scores.expect("scores requested"),
        objective_trace: out.trace,
        fixed_sigma: opts.fixed_sigma,
        n_obs: problem.n(),
    })
}

/// Empirical sandwich matrices at a converged fit: `Ψ̂` is the model-based
/// curvature at `θ̂`, `Ω̂ = (1/n) Σ s_i s_iᵀ` the outer product of per-sample
/// gradients and `ξ̂` their mean.
pub fn sandwich(problem: &RegressionProblem, fit: &FitResult) -> Result<SandwichMatrices> {
    if !fit.converged {
        return Err(Error::NotConverged);
    }
    let psi_hat = curvature_matrix(
        problem,
        &fit.params,
        &fit.tuning,
        fit.kind,
        fit.fixed_sigma.is_none(),
    )?;
    cholesky_lower(&psi_hat, "psi_hat")?;
    let s = &fit.per_sample_scores;
    let n = s.nrows() as f64;
    let omega_hat = symmetrize(&(s.tr_mul(s) / n));
    let xi_hat = s.row_mean().transpose();
    Ok(SandwichMatrices {
        psi_hat,
        omega_hat,
        xi_hat,
    })
}
