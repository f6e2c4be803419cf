//! Random-intercept linear mixed models for balanced panels.
//!
//! Individual `i` contributes `y_i = X_i β + z_i a_i + u_i` with
//! `a_i ~ N(0, σ_α²)` and `u_i ~ N(0, σ_u² I_m)`, so `y_i ~ N(X_i β, Ω_i)`
//! with `Ω_i = σ_α² z_i z_iᵀ + σ_u² I_m`. The divergence objective uses the
//! m-variate Gaussian marginal of each individual as one observation.
//!
//! The fit uses central-difference gradients. The curvature matrix `Ψ̂` is
//! model-based and in closed form; `Ω̂` comes from per-individual gradients.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::criteria::{check_kind, CriterionKind, CriterionReport};
use crate::divergence::{
    d1_from_log, exp_curvature_series, log_gaussian_power_integral, model_term, TuningTriple,
    LN_2PI,
};
use crate::error::{Error, Result};
use crate::estimation::{EstimatorKind, RegressionProblem};
use crate::io::Dataset;
use crate::linalg::{check_full_rank, ols, pairwise_sum, symmetrize};
use crate::optim::{minimize, MinimizeOptions};
use crate::selection::{CandidateModel, SubsetScorer};
use crate::tuning::{pick_best, TuningFamily, TuningGrid, TuningSelection};

/// One individual's block.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelBlock {
    /// `m × p`.
    pub x: DMatrix<f64>,
    /// Random-effect design (a column of ones for a random intercept).
    pub z: DVector<f64>,
    pub y: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelData {
    blocks: Vec<PanelBlock>,
    names: Vec<String>,
}

impl PanelData {
    /// Validates balance (equal `m`), shapes, finiteness and full rank of
    /// the stacked design.
    pub fn new(blocks: Vec<PanelBlock>, names: Vec<String>) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::ShapeMismatch("panel has no individuals".into()))?;
        let (m, p) = first.x.shape();
        if m == 0 || p == 0 {
            return Err(Error::ShapeMismatch("empty blocks".into()));
        }
        if names.len() != p {
            return Err(Error::ShapeMismatch(
                "one name per design column required".into(),
            ));
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.x.nrows() != m || b.y.len() != m || b.z.len() != m {
                return Err(Error::UnbalancedPanel(format!(
                    "individual {i} has {} rows, expected {m}",
                    b.y.len()
                )));
            }
            if b.x.ncols() != p {
                return Err(Error::ShapeMismatch(format!(
                    "individual {i} has {} columns",
                    b.x.ncols()
                )));
            }
            if b.x
                .iter()
                .chain(b.y.iter())
                .chain(b.z.iter())
                .any(|v| !v.is_finite())
            {
                return Err(Error::Domain("non-finite value in panel".into()));
            }
        }
        let data = Self { blocks, names };
        if data.n_obs_total() <= p {
            return Err(Error::SingularDesign("fewer rows than columns".into()));
        }
        check_full_rank(&data.stacked_design())?;
        Ok(data)
    }

    /// Random-intercept blocks (`z = 1`) with default names `x1..xp`.
    pub fn random_intercept(xs: Vec<DMatrix<f64>>, ys: Vec<DVector<f64>>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::ShapeMismatch("one response per design block".into()));
        }
        let p = xs.first().map_or(0, |x| x.ncols());
        let blocks = xs
            .into_iter()
            .zip(ys)
            .map(|(x, y)| PanelBlock {
                z: DVector::from_element(x.nrows(), 1.0),
                x,
                y,
            })
            .collect();
        Self::new(blocks, (1..=p).map(|j| format!("x{j}")).collect())
    }

    pub fn blocks(&self) -> &[PanelBlock] {
        &self.blocks
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Number of individuals.
    pub fn n(&self) -> usize {
        self.blocks.len()
    }

    /// Observations per individual.
    pub fn m(&self) -> usize {
        self.blocks[0].y.len()
    }

    pub fn p(&self) -> usize {
        self.blocks[0].x.ncols()
    }

    fn n_obs_total(&self) -> usize {
        self.n() * self.m()
    }

    pub fn stacked_design(&self) -> DMatrix<f64> {
        let (m, p) = (self.m(), self.p());
        DMatrix::from_fn(self.n_obs_total(), p, |r, j| {
            self.blocks[r / m].x[(r % m, j)]
        })
    }

    pub fn stacked_response(&self) -> DVector<f64> {
        let m = self.m();
        DVector::from_fn(self.n_obs_total(), |r, _| self.blocks[r / m].y[r % m])
    }

    /// Pooled regression over all rows, ignoring the grouping.
    pub fn pooled_problem(&self) -> Result<RegressionProblem> {
        RegressionProblem::with_names(
            self.stacked_design(),
            self.stacked_response(),
            self.names.clone(),
        )
    }

    /// Same panel restricted to design columns `cols`.
    pub fn subset(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&j) = cols.iter().find(|&&j| j >= self.p()) {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.p(),
            });
        }
        let blocks = self
            .blocks
            .iter()
            .map(|b| PanelBlock {
                x: b.x.select_columns(cols),
                z: b.z.clone(),
                y: b.y.clone(),
            })
            .collect();
        Self::new(
            blocks,
            cols.iter().map(|&j| self.names[j].clone()).collect(),
        )
    }

    /// Index of a constant column, if any.
    pub fn intercept_index(&self) -> Option<usize> {
        let x = self.stacked_design();
        (0..self.p()).find(|&j| {
            let c = x.column(j);
            c.max() == c.min() && c[0] != 0.0
        })
    }
}

/// `θ = (coef, log σ_α, log σ_u)`; `log σ_α = −∞` encodes `σ_α = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelParams {
    pub coef: DVector<f64>,
    pub log_sigma_alpha: f64,
    pub log_sigma_u: f64,
}

impl PanelParams {
    pub fn new(coef: DVector<f64>, sigma_alpha: f64, sigma_u: f64) -> Result<Self> {
        if !(sigma_alpha >= 0.0) || !sigma_alpha.is_finite() {
            return Err(Error::Domain(format!(
                "sigma_alpha must be >= 0, got {sigma_alpha}"
            )));
        }
        if !(sigma_u > 0.0) || !sigma_u.is_finite() {
            return Err(Error::Domain(format!("sigma_u must be > 0, got {sigma_u}")));
        }
        Ok(Self {
            coef,
            log_sigma_alpha: sigma_alpha.ln(),
            log_sigma_u: sigma_u.ln(),
        })
    }

    pub fn sigma_alpha(&self) -> f64 {
        self.log_sigma_alpha.exp()
    }

    pub fn sigma_u(&self) -> f64 {
        self.log_sigma_u.exp()
    }

    fn check(&self, p: usize) -> Result<()> {
        if self.coef.len() != p {
            return Err(Error::ShapeMismatch(format!(
                "coefficient vector has length {}, design has {p} columns",
                self.coef.len()
            )));
        }
        let alpha_ok =
            self.log_sigma_alpha.is_finite() || self.log_sigma_alpha == f64::NEG_INFINITY;
        if self.coef.iter().any(|c| !c.is_finite()) || !self.log_sigma_u.is_finite() || !alpha_ok {
            return Err(Error::Domain("parameters must be finite".into()));
        }
        Ok(())
    }

    fn to_vector(&self) -> DVector<f64> {
        let p = self.coef.len();
        let mut v = DVector::zeros(p + 2);
        v.rows_mut(0, p).copy_from(&self.coef);
        v[p] = self.log_sigma_alpha;
        v[p + 1] = self.log_sigma_u;
        v
    }

    fn from_vector(v: &DVector<f64>) -> Self {
        let p = v.len() - 2;
        Self {
            coef: v.rows(0, p).into_owned(),
            log_sigma_alpha: v[p],
            log_sigma_u: v[p + 1],
        }
    }
}

/// `σ_α² z zᵀ + σ_u² I`.
pub fn block_covariance(z: &DVector<f64>, params: &PanelParams) -> DMatrix<f64> {
    let m = z.len();
    let sa2 = (2.0 * params.log_sigma_alpha).exp();
    let su2 = (2.0 * params.log_sigma_u).exp();
    z * z.transpose() * sa2 + DMatrix::identity(m, m) * su2
}

/// Factorized block: Cholesky of `Ω_i` plus its log-determinant.
struct BlockModel {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    log_det: f64,
}

impl BlockModel {
    fn new(z: &DVector<f64>, params: &PanelParams) -> Result<Self> {
        let omega = block_covariance(z, params);
        let chol = omega
            .cholesky()
            .ok_or_else(|| Error::NonPositiveDefinite("block covariance".into()))?;
        let log_det = 2.0
            * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|d| d.ln())
                .sum::<f64>();
        Ok(Self { chol, log_det })
    }

    fn log_density(&self, r: &DVector<f64>) -> f64 {
        let m = r.len() as f64;
        let w = self
            .chol
            .l()
            .solve_lower_triangular(r)
            .expect("non-singular factor");
        -0.5 * (m * LN_2PI + self.log_det + w.norm_squared())
    }
}

/// Log of the m-variate normal density `N(Xβ, Ω)` at `y`.
pub fn log_marginal_density(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    z: &DVector<f64>,
    params: &PanelParams,
) -> Result<f64> {
    params.check(x.ncols())?;
    if y.len() != x.nrows() || z.len() != x.nrows() {
        return Err(Error::ShapeMismatch("y, X and z must have m rows".into()));
    }
    let bm = BlockModel::new(z, params)?;
    Ok(bm.log_density(&(y - x * &params.coef)))
}

pub fn marginal_density(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    z: &DVector<f64>,
    params: &PanelParams,
) -> Result<f64> {
    log_marginal_density(y, x, z, params).map(f64::exp)
}

fn block_contribution(
    b: &PanelBlock,
    params: &PanelParams,
    t: &TuningTriple,
    kind: EstimatorKind,
) -> Result<f64> {
    let bm = BlockModel::new(&b.z, params)?;
    let log_f = bm.log_density(&(&b.y - &b.x * &params.coef));
    match kind {
        EstimatorKind::Mle => Ok(-log_f),
        _ => {
            let t = kind.effective_tuning(t);
            Ok(model_term(b.y.len(), bm.log_det, &t)? - d1_from_log(log_f, &t))
        }
    }
}

/// `V_i` for every individual, in order.
pub fn block_contributions(
    data: &PanelData,
    params: &PanelParams,
    t: &TuningTriple,
    kind: EstimatorKind,
) -> Result<Vec<f64>> {
    params.check(data.p())?;
    let v: Vec<f64> = data
        .blocks
        .par_iter()
        .map(|b| block_contribution(b, params, t, kind))
        .collect::<Result<_>>()?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("panel contribution".into()));
    }
    Ok(v)
}

/// `(1/n) Σ_i V_i`, summed pairwise so the value does not depend on
/// scheduling.
pub fn panel_objective(
    data: &PanelData,
    params: &PanelParams,
    t: &TuningTriple,
    kind: EstimatorKind,
) -> Result<f64> {
    Ok(pairwise_sum(&block_contributions(data, params, t, kind)?) / data.n() as f64)
}

/// Relative central-difference step of the panel gradients.
pub const PANEL_FD_STEP: f64 = 1e-6;

/// Per-individual gradients `∂V_i/∂θ` (`n × (p+2)`) by central differences.
pub fn block_scores(
    data: &PanelData,
    params: &PanelParams,
    t: &TuningTriple,
    kind: EstimatorKind,
) -> Result<DMatrix<f64>> {
    let x = params.to_vector();
    let q = x.len();
    let mut s = DMatrix::zeros(data.n(), q);
    let mut xp = x.clone();
    for j in 0..q {
        let h = PANEL_FD_STEP * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let up = block_contributions(data, &PanelParams::from_vector(&xp), t, kind)?;
        xp[j] = x[j] - h;
        let dn = block_contributions(data, &PanelParams::from_vector(&xp), t, kind)?;
        xp[j] = x[j];
        for i in 0..data.n() {
            s[(i, j)] = (up[i] - dn[i]) / (2.0 * h);
        }
    }
    Ok(s)
}

/// Gradient of [`panel_objective`] by central differences.
pub fn panel_gradient(
    data: &PanelData,
    params: &PanelParams,
    t: &TuningTriple,
    kind: EstimatorKind,
) -> Result<DVector<f64>> {
    let s = block_scores(data, params, t, kind)?;
    Ok(DVector::from_fn(s.ncols(), |j, _| {
        pairwise_sum(s.column(j).as_slice()) / data.n() as f64
    }))
}

/// Closed-form model-based curvature `Ψ = (1/n) Σ ∫ w(f_i) f_i u_i u_iᵀ`.
///
/// Under the tilted density `f^k/∫f^k = N(μ, Ω/k)` the coefficient block is
/// `XᵀΩ⁻¹X/k`, the scale block is
/// `¼[c_a c_b (1 − 1/k)² + 2 T_ab/k²]` with `c_a = tr(Ω⁻¹Ω_a)` and
/// `T_ab = tr(Ω⁻¹Ω_aΩ⁻¹Ω_b)`, and the cross block vanishes.
pub fn panel_curvature(
    data: &PanelData,
    params: &PanelParams,
    t: &TuningTriple,
    kind: EstimatorKind,
) -> Result<DMatrix<f64>> {
    params.check(data.p())?;
    let t = kind.effective_tuning(t);
    let p = data.p();
    let q = p + 2;
    let mut psi = DMatrix::zeros(q, q);
    for b in &data.blocks {
        let m = b.y.len();
        let omega = block_covariance(&b.z, params);
        let chol = omega
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NonPositiveDefinite("block covariance".into()))?;
        let log_det = 2.0
            * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|d| d.ln())
                .sum::<f64>();
        let sa2 = (2.0 * params.log_sigma_alpha).exp();
        let su2 = (2.0 * params.log_sigma_u).exp();
        let d_omega = [
            &b.z * b.z.transpose() * (2.0 * sa2),
            DMatrix::identity(m, m) * (2.0 * su2),
        ];
        let a: Vec<DMatrix<f64>> = d_omega.iter().map(|d| chol.solve(d)).collect();
        let c = [a[0].trace(), a[1].trace()];
        let tt = |i: usize, j: usize| (&a[i] * &a[j]).trace();
        let xox = b.x.transpose() * chol.solve(&b.x);

        let ik = |k: f64| log_gaussian_power_integral(m, log_det, k).exp();
        let scale_entry = |k: f64, i: usize, j: usize| {
            0.25 * (c[i] * c[j] * (1.0 - 1.0 / k).powi(2) + 2.0 * tt(i, j) / (k * k))
        };
        let weighted = |f: &dyn Fn(f64) -> f64| -> Result<f64> {
            let g1 = 1.0 + t.gamma();
            let mut v = (1.0 - t.beta()) * g1 * ik(g1) * f(g1);
            if t.beta() > 0.0 {
                v += t.beta() * exp_curvature_series(t.alpha(), |k| ik(k) * f(k))?;
            }
            Ok(v)
        };
        let coef_w = weighted(&|k| 1.0 / k)?;
        psi.view_mut((0, 0), (p, p)).add_assign(&(&xox * coef_w));
        for i in 0..2 {
            for j in 0..2 {
                psi[(p + i, p + j)] += weighted(&|k| scale_entry(k, i, j))?;
            }
        }
    }
    Ok(symmetrize(&(psi / data.n() as f64)))
}

trait AddAssignView {
    fn add_assign(&mut self, other: &DMatrix<f64>);
}

impl AddAssignView for nalgebra::DMatrixViewMut<'_, f64> {
    fn add_assign(&mut self, other: &DMatrix<f64>) {
        for j in 0..other.ncols() {
            for i in 0..other.nrows() {
                self[(i, j)] += other[(i, j)];
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelFitOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub rel_obj_tol: f64,
}

impl Default for PanelFitOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-8,
            rel_obj_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelFitResult {
    pub params: PanelParams,
    pub kind: EstimatorKind,
    pub tuning: TuningTriple,
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub grad_inf_norm: f64,
    pub objective_trace: Vec<f64>,
    /// Number of individuals.
    pub n_obs: usize,
}

/// Pooled OLS coefficients and a moment split of the residual variance into
/// between- and within-individual parts.
pub fn moment_init(data: &PanelData) -> Result<PanelParams> {
    let coef = ols(&data.stacked_design(), &data.stacked_response())?;
    let (n, m) = (data.n(), data.m());
    let mut within = 0.0;
    let mut means = Vec::with_capacity(n);
    let mut total = 0.0;
    for b in &data.blocks {
        let r = &b.y - &b.x * &coef;
        let mean = r.mean();
        within += r.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        total += r.norm_squared();
        means.push(mean);
    }
    let total_var = (total / (n * m) as f64).max(1e-12);
    let su2 = if m > 1 {
        within / (n * (m - 1)) as f64
    } else {
        0.5 * total_var
    };
    let grand = means.iter().sum::<f64>() / n as f64;
    let between =
        means.iter().map(|v| (v - grand) * (v - grand)).sum::<f64>() / (n.max(2) - 1) as f64;
    let floor = 1e-3 * total_var;
    let sa2 = (between - su2 / m as f64).max(floor);
    PanelParams::new(coef, sa2.sqrt(), su2.max(floor).sqrt())
}

/// Quasi-Newton fit of `(coef, log σ_α, log σ_u)` with numeric gradients,
/// initialized at [`moment_init`] unless `init` is given.
pub fn fit_panel(
    data: &PanelData,
    t: &TuningTriple,
    kind: EstimatorKind,
    init: Option<&PanelParams>,
    opts: &PanelFitOptions,
) -> Result<PanelFitResult> {
    let start = match init {
        Some(p) => {
            p.check(data.p())?;
            p.clone()
        }
        None => moment_init(data)?,
    };
    let p = data.p();
    let psi0 = panel_curvature(data, &start, t, kind)?;
    let h0_inv = psi0
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .unwrap_or_else(|| DMatrix::identity(p + 2, p + 2));
    let mut caps = vec![f64::INFINITY; p];
    caps.extend([1.0, 1.0]);
    let mopts = MinimizeOptions {
        max_iter: opts.max_iter,
        grad_tol: opts.grad_tol,
        rel_obj_tol: opts.rel_obj_tol,
        step_caps: caps,
    };
    let out = minimize(
        |x| {
            let prm = PanelParams::from_vector(x);
            let s = block_scores(data, &prm, t, kind)?;
            let v = panel_objective(data, &prm, t, kind)?;
            let g = DVector::from_fn(s.ncols(), |j, _| {
                pairwise_sum(s.column(j).as_slice()) / data.n() as f64
            });
            Ok((v, g))
        },
        start.to_vector(),
        h0_inv,
        &mopts,
    )?;
    Ok(PanelFitResult {
        params: PanelParams::from_vector(&out.x),
        kind,
        tuning: kind.effective_tuning(t),
        objective_value: out.value,
        iterations: out.iterations,
        converged: out.converged,
        grad_inf_norm: out.grad.amax(),
        objective_trace: out.trace,
        n_obs: data.n(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelSandwich {
    pub psi_hat: DMatrix<f64>,
    pub omega_hat: DMatrix<f64>,
    pub xi_hat: DVector<f64>,
}

pub fn panel_sandwich(data: &PanelData, fit: &PanelFitResult) -> Result<PanelSandwich> {
    if !fit.converged {
        return Err(Error::NotConverged);
    }
    let psi_hat = panel_curvature(data, &fit.params, &fit.tuning, fit.kind)?;
    let s = block_scores(data, &fit.params, &fit.tuning, fit.kind)?;
    let n = data.n() as f64;
    let omega_hat = symmetrize(&(s.transpose() * &s / n));
    let xi_hat = DVector::from_fn(s.ncols(), |j, _| s.column(j).sum() / n);
    Ok(PanelSandwich {
        psi_hat,
        omega_hat,
        xi_hat,
    })
}

/// `n·H_n(θ̂) + tr(Ω̂ Ψ̂⁻¹)` at a converged panel fit.
pub fn panel_criterion(
    data: &PanelData,
    fit: &PanelFitResult,
    kind: CriterionKind,
) -> Result<CriterionReport> {
    check_kind(kind, fit.kind, fit.tuning.beta())?;
    let sw = panel_sandwich(data, fit)?;
    CriterionReport::assemble(
        kind,
        fit.n_obs,
        fit.objective_value,
        &sw.omega_hat,
        &sw.psi_hat,
    )
}

/// Mean over individuals of `ρ_i = −2 tr(Ω⁻¹) + ‖Ω⁻¹ r_i‖²`.
pub fn panel_gsm_objective(data: &PanelData, params: &PanelParams) -> Result<f64> {
    params.check(data.p())?;
    let v: Vec<f64> = data
        .blocks
        .iter()
        .map(|b| {
            let chol = block_covariance(&b.z, params)
                .cholesky()
                .ok_or_else(|| Error::NonPositiveDefinite("block covariance".into()))?;
            let inv = chol.inverse();
            let score = &inv * (&b.y - &b.x * &params.coef);
            Ok(-2.0 * inv.trace() + score.norm_squared())
        })
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(&v) / data.n() as f64)
}

/// Score-matching tuning selection for the panel model.
pub fn select_panel_tuning(
    data: &PanelData,
    grid: &TuningGrid,
    family: TuningFamily,
    opts: &PanelFitOptions,
) -> Result<TuningSelection> {
    let kind = family.estimator();
    let scored = grid
        .triples(family)
        .into_iter()
        .map(|t| {
            let s = fit_panel(data, &t, kind, None, opts)
                .ok()
                .filter(|f| f.converged)
                .and_then(|f| panel_gsm_objective(data, &f.params).ok());
            (t, s)
        })
        .collect();
    pick_best(scored)
}

/// Reference tuning for the wage application.
pub fn preset_wage_tuning() -> crate::tuning::TuningMap {
    crate::tuning::TuningMap {
        dpd: TuningTriple::dpd(0.5).expect("static"),
        epd: TuningTriple::new(0.1, 0.3, 0.3).expect("static"),
    }
}

/// Model-based draws: `n` individuals, `m` periods, covariates iid `N(0, 1)`
/// after an optional leading intercept column.
pub fn simulate_panel<R: Rng>(
    rng: &mut R,
    n: usize,
    m: usize,
    coef: &DVector<f64>,
    intercept: bool,
    sigma_alpha: f64,
    sigma_u: f64,
) -> Result<PanelData> {
    let p = coef.len();
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x = DMatrix::from_fn(m, p, |_, j| {
            if intercept && j == 0 {
                1.0
            } else {
                rng.sample(StandardNormal)
            }
        });
        let a: f64 = sigma_alpha * rng.sample::<f64, _>(StandardNormal);
        let y = &x * coef
            + DVector::from_fn(m, |_, _| a + sigma_u * rng.sample::<f64, _>(StandardNormal));
        xs.push(x);
        ys.push(y);
    }
    PanelData::random_intercept(xs, ys)
}

/// Builds a balanced random-intercept panel from a loaded table: rows are
/// grouped by `id`, ordered by `year`, and `covariates` (encoded names) form
/// the design after an intercept column.
pub fn panel_from_dataset(
    ds: &Dataset,
    id: &str,
    time: &str,
    response: &str,
    covariates: &[&str],
) -> Result<PanelData> {
    let ids = ds.column(id)?;
    let times = ds.column(time)?;
    let y = ds.column(response)?;
    let x = ds.matrix(covariates)?;
    let mut groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for r in 0..ds.n_rows() {
        groups.entry(ids[r].round() as i64).or_default().push(r);
    }
    let m = groups.values().next().map_or(0, Vec::len);
    let mut xs = Vec::with_capacity(groups.len());
    let mut ys = Vec::with_capacity(groups.len());
    for (gid, mut rows) in groups {
        if rows.len() != m {
            return Err(Error::UnbalancedPanel(format!(
                "id {gid} has {} rows, expected {m}",
                rows.len()
            )));
        }
        rows.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
        xs.push(DMatrix::from_fn(m, covariates.len() + 1, |t, j| {
            if j == 0 {
                1.0
            } else {
                x[(rows[t], j - 1)]
            }
        }));
        ys.push(DVector::from_fn(m, |t, _| y[rows[t]]));
    }
    let blocks = xs
        .into_iter()
        .zip(ys)
        .map(|(x, y)| PanelBlock {
            z: DVector::from_element(m, 1.0),
            x,
            y,
        })
        .collect();
    let mut names = vec!["intercept".to_string()];
    names.extend(covariates.iter().map(|s| s.to_string()));
    PanelData::new(blocks, names)
}

/// Subset scorer over panel design columns; forced columns are always kept.
#[derive(Debug, Clone)]
pub struct PanelScorer {
    pub data: PanelData,
    pub forced: Vec<usize>,
    pub candidates: Vec<usize>,
    pub opts: PanelFitOptions,
}

impl PanelScorer {
    pub fn new(data: PanelData) -> Self {
        let forced: Vec<usize> = data.intercept_index().into_iter().collect();
        let candidates = (0..data.p()).filter(|j| !forced.contains(j)).collect();
        Self {
            data,
            forced,
            candidates,
            opts: PanelFitOptions::default(),
        }
    }

    pub fn with_candidates(mut self, cols: Vec<usize>) -> Self {
        self.candidates = cols;
        self
    }
}

impl SubsetScorer for PanelScorer {
    fn candidate_names(&self) -> Vec<String> {
        self.candidates
            .iter()
            .map(|&j| self.data.names()[j].clone())
            .collect()
    }

    fn score(
        &self,
        model: &CandidateModel,
        kind: CriterionKind,
        tuning: &TuningTriple,
    ) -> Result<f64> {
        let mut cols = self.forced.clone();
        cols.extend(model.indices().into_iter().map(|j| self.candidates[j]));
        let sub = self.data.subset(&cols)?;
        let f = fit_panel(&sub, tuning, kind.estimator(), None, &self.opts)?;
        Ok(panel_criterion(&sub, &f, kind)?.total)
    }
}
