//! The exponential-polynomial generating function, its derivatives, and the
//! samplewise divergence contribution for Gaussian and finite-support models.
//!
//! The generating function is
//!
//! ```text
//! B(x) = (β/α²)(e^{αx} − 1 − αx) + ((1−β)/γ)(x^{γ+1} − x)
//! ```
//!
//! with the removable singularities at `α = 0` and `γ = 0` evaluated by their
//! limits. All evaluation is branch-free with respect to those limits except
//! below the thresholds [`ALPHA_SERIES_LIMIT`] and [`GAMMA_LOG_LIMIT`].

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Below this |α| the exponential part is evaluated by its series limit.
pub const ALPHA_SERIES_LIMIT: f64 = 1e-8;
/// Below this γ the polynomial part is evaluated by its logarithmic limit.
pub const GAMMA_LOG_LIMIT: f64 = 1e-8;

/// Maximum number of terms for the exponential-component power series.
pub const MAX_SERIES_TERMS: usize = 200;
const SERIES_REL_TOL: f64 = 1e-14;

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Robustness parameters `(α, β, γ)` of the divergence family.
///
/// `β = 0` gives the density power divergence with parameter `γ`, `β = 1` the
/// Bregman exponential divergence with parameter `α`, and `β = 0, γ → 0` the
/// Kullback-Leibler divergence (negative log-likelihood).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningTriple {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl TuningTriple {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::Domain(format!("alpha must be finite, got {alpha}")));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Domain(format!(
                "beta must lie in [0, 1], got {beta}"
            )));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::Domain(format!("gamma must be >= 0, got {gamma}")));
        }
        Ok(Self { alpha, beta, gamma })
    }

    /// Density power divergence triple (`β = 0`, α irrelevant).
    pub fn dpd(gamma: f64) -> Result<Self> {
        Self::new(0.0, 0.0, gamma)
    }

    /// The Kullback-Leibler limit `(0, 0, 0)`.
    pub fn likelihood() -> Self {
        Self {
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// True when the exponential part is evaluated by its `α → 0` limit.
    pub fn is_exp_limit(&self) -> bool {
        self.alpha.abs() < ALPHA_SERIES_LIMIT
    }

    /// True when the polynomial part is evaluated by its `γ → 0` limit.
    pub fn is_log_limit(&self) -> bool {
        self.gamma < GAMMA_LOG_LIMIT
    }
}

impl std::fmt::Display for TuningTriple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.alpha, self.beta, self.gamma)
    }
}

/// Normal distribution on the real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnivariateGaussian {
    mu: f64,
    sigma: f64,
}

impl UnivariateGaussian {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::Domain(format!("mu must be finite, got {mu}")));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Domain(format!("sigma must be > 0, got {sigma}")));
        }
        Ok(Self { mu, sigma })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn log_density(&self, y: f64) -> f64 {
        let z = (y - self.mu) / self.sigma;
        -0.5 * z * z - self.sigma.ln() - 0.5 * LN_2PI
    }

    pub fn density(&self, y: f64) -> f64 {
        self.log_density(y).exp()
    }
}

/// Probability mass function over a finite support `{0, .., len-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDensity {
    probs: Vec<f64>,
}

impl DiscreteDensity {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Domain("empty support".into()));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Domain("probabilities must lie in [0, 1]".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Two-point model with `P(1) = p`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::new(vec![1.0 - p, p])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

// ---------------------------------------------------------------------------
// scalar helpers for the removable singularities

/// `(e^z − 1)/z`
pub(crate) fn expm1_ratio(z: f64) -> f64 {
    if z.abs() < 1e-10 {
        1.0 + 0.5 * z
    } else {
        z.exp_m1() / z
    }
}

/// Sums `Σ_{k≥0} c_k z^k` for a coefficient sequence decaying at least like 1/k!.
fn small_series(z: f64, coef: impl Fn(u32) -> f64) -> f64 {
    let mut acc = 0.0;
    let mut zk = 1.0;
    for k in 0..40 {
        let term = coef(k) * zk;
        acc += term;
        if term.abs() <= 1e-17 * acc.abs() {
            break;
        }
        zk *= z;
    }
    acc
}

fn factorial(k: u32) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// `(e^z − 1 − z)/z²`
pub(crate) fn exp_rem2(z: f64) -> f64 {
    if z.abs() < 0.5 {
        small_series(z, |k| 1.0 / factorial(k + 2))
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

/// `(e^z (z − 1) + 1)/z²`, the integrand kernel of the exponential component.
pub(crate) fn exp_bracket2(z: f64) -> f64 {
    if z.abs() < 0.5 {
        small_series(z, |k| (k + 1) as f64 / factorial(k + 2))
    } else {
        (z.exp() * (z - 1.0) + 1.0) / (z * z)
    }
}

/// `(x^γ − 1)/γ` from `ln x`, with the `γ → 0` limit `ln x`.
pub(crate) fn pow_rem(log_x: f64, gamma: f64) -> f64 {
    if gamma < GAMMA_LOG_LIMIT {
        log_x
    } else {
        (gamma * log_x).exp_m1() / gamma
    }
}

fn check_x(x: f64, t: &TuningTriple) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!(
            "argument must be finite and >= 0, got {x}"
        )));
    }
    // re-validate in case of a hand-built triple from deserialization
    TuningTriple::new(t.alpha, t.beta, t.gamma).map(|_| ())
}

// ---------------------------------------------------------------------------
// generating function

/// `B(x)` for `x ≥ 0`.
pub fn generating_fn(x: f64, t: &TuningTriple) -> Result<f64> {
    check_x(x, t)?;
    let exp_part = if t.is_exp_limit() {
        0.5 * t.beta * x * x
    } else {
        t.beta * x * x * exp_rem2(t.alpha * x)
    };
    let poly_part = if x == 0.0 {
        0.0
    } else {
        (1.0 - t.beta) * x * pow_rem(x.ln(), t.gamma)
    };
    Ok(exp_part + poly_part)
}

/// `B'(x)`.
pub fn generating_fn_d1(x: f64, t: &TuningTriple) -> Result<f64> {
    check_x(x, t)?;
    if x == 0.0 {
        if t.is_log_limit() && t.beta < 1.0 {
            return Err(Error::Singularity(
                "B'(0) diverges in the logarithmic limit".into(),
            ));
        }
        let poly = if t.beta < 1.0 {
            -(1.0 - t.beta) / t.gamma
        } else {
            0.0
        };
        return Ok(poly);
    }
    Ok(d1_from_log(x.ln(), t))
}

/// `B''(x)`.
pub fn generating_fn_d2(x: f64, t: &TuningTriple) -> Result<f64> {
    check_x(x, t)?;
    let exp_part = t.beta * (t.alpha * x).exp();
    if t.beta == 1.0 {
        return Ok(exp_part);
    }
    if x == 0.0 && t.gamma < 1.0 {
        return Err(Error::Singularity(format!(
            "B''(0) diverges for gamma = {} < 1",
            t.gamma
        )));
    }
    Ok(exp_part + (1.0 - t.beta) * (t.gamma + 1.0) * x.powf(t.gamma - 1.0))
}

/// Weight function `w(f) = β f e^{αf} + (1−β)(1+γ) f^γ`, equal to `f·B''(f)`.
pub fn weight_fn(f_val: f64, t: &TuningTriple) -> Result<f64> {
    check_x(f_val, t)?;
    Ok(t.beta * f_val * (t.alpha * f_val).exp()
        + (1.0 - t.beta) * (1.0 + t.gamma) * f_val.powf(t.gamma))
}

/// `B'(f)` for `f = exp(log_f)`; avoids underflow of far-tail densities.
pub(crate) fn d1_from_log(log_f: f64, t: &TuningTriple) -> f64 {
    let f = log_f.exp();
    let exp_part = t.beta * f * expm1_ratio(t.alpha * f);
    let poly_part = if t.beta == 1.0 {
        0.0
    } else {
        (1.0 - t.beta) * ((t.gamma * log_f).exp() + pow_rem(log_f, t.gamma))
    };
    exp_part + poly_part
}

/// `w(f)` for `f = exp(log_f)`.
pub(crate) fn weight_from_log(log_f: f64, t: &TuningTriple) -> f64 {
    let f = log_f.exp();
    t.beta * f * (t.alpha * f).exp() + (1.0 - t.beta) * (1.0 + t.gamma) * (t.gamma * log_f).exp()
}

// ---------------------------------------------------------------------------
// model integrals

/// `ln ∫ f^k` for a Gaussian on ℝ^m with covariance determinant `exp(log_det)`.
pub(crate) fn log_gaussian_power_integral(m: usize, log_det: f64, k: f64) -> f64 {
    let m = m as f64;
    -0.5 * m * k.ln() - 0.5 * m * (k - 1.0) * LN_2PI - 0.5 * (k - 1.0) * log_det
}

/// `∫ f^k dy = k^{−1/2} (2πσ²)^{−(k−1)/2}` for the density of `g`.
pub fn gaussian_power_integral(g: &UnivariateGaussian, k: f64) -> Result<f64> {
    if !(k >= 1.0) || !k.is_finite() {
        return Err(Error::Domain(format!("power must be >= 1, got {k}")));
    }
    Ok(log_gaussian_power_integral(1, 2.0 * g.sigma.ln(), k).exp())
}

/// Sums `Σ_{k≥2} α^{k−2} (k−1)/k! · c(k)`.
///
/// With `c(k) = ∫ f^k` this is `α^{−2} ∫ [e^{αf}(αf − 1) + 1]`, the
/// exponential component already divided by `α²` (finite at `α = 0`).
pub(crate) fn exp_series(alpha: f64, c: impl Fn(f64) -> f64) -> Result<f64> {
    let mut scale = 0.5; // α^{k-2}/k! at k = 2
    let mut acc = 0.0;
    for k in 2..(2 + MAX_SERIES_TERMS) {
        let term = scale * (k - 1) as f64 * c(k as f64);
        acc += term;
        if k > 2 && term.abs() <= SERIES_REL_TOL * acc.abs() {
            return Ok(acc);
        }
        scale *= alpha / (k + 1) as f64;
    }
    Err(Error::NonConvergence {
        terms: MAX_SERIES_TERMS,
    })
}

/// Sums `Σ_{j≥0} α^j/j! · c(j+2)`, the expansion of `∫ f² e^{αf} (·)` used
/// by the curvature matrices.
pub(crate) fn exp_curvature_series(alpha: f64, c: impl Fn(f64) -> f64) -> Result<f64> {
    let mut scale = 1.0;
    let mut acc = 0.0;
    for j in 0..MAX_SERIES_TERMS {
        let term = scale * c((j + 2) as f64);
        acc += term;
        if j > 0 && term.abs() <= SERIES_REL_TOL * acc.abs() {
            return Ok(acc);
        }
        scale *= alpha / (j + 1) as f64;
    }
    Err(Error::NonConvergence {
        terms: MAX_SERIES_TERMS,
    })
}

/// `E(α) = ∫ [e^{αf}(αf − 1) + 1] dy` for the density `f` of `g`.
pub fn exp_component_integral(g: &UnivariateGaussian, alpha: f64) -> Result<f64> {
    if !alpha.is_finite() {
        return Err(Error::Domain("alpha must be finite".into()));
    }
    let log_det = 2.0 * g.sigma.ln();
    let scaled = exp_series(alpha, |k| log_gaussian_power_integral(1, log_det, k).exp())?;
    Ok(alpha * alpha * scaled)
}

/// Model-side part of `V`: `(β/α²)E(α) + (1−β)∫f^{1+γ}` for a Gaussian on
/// ℝ^m with covariance log-determinant `log_det`.
pub(crate) fn model_term(m: usize, log_det: f64, t: &TuningTriple) -> Result<f64> {
    let exp_part = if t.beta > 0.0 {
        t.beta
            * exp_series(t.alpha, |k| {
                log_gaussian_power_integral(m, log_det, k).exp()
            })?
    } else {
        0.0
    };
    let pow_part = (1.0 - t.beta) * log_gaussian_power_integral(m, log_det, 1.0 + t.gamma).exp();
    Ok(exp_part + pow_part)
}

/// Derivative of [`model_term`] with respect to `log_det`.
pub(crate) fn model_term_dlogdet(m: usize, log_det: f64, t: &TuningTriple) -> Result<f64> {
    let exp_part = if t.beta > 0.0 {
        t.beta
            * exp_series(t.alpha, |k| {
                -0.5 * (k - 1.0) * log_gaussian_power_integral(m, log_det, k).exp()
            })?
    } else {
        0.0
    };
    let pow_part = (1.0 - t.beta)
        * (-0.5 * t.gamma)
        * log_gaussian_power_integral(m, log_det, 1.0 + t.gamma).exp();
    Ok(exp_part + pow_part)
}

/// Samplewise contribution `V(y; θ)` of the empirical objective for a
/// Gaussian model `g` evaluated at the observation `y_obs`.
pub fn samplewise_contribution(
    y_obs: f64,
    g: &UnivariateGaussian,
    t: &TuningTriple,
) -> Result<f64> {
    check_x(0.0, t)?;
    if !y_obs.is_finite() {
        return Err(Error::Domain("observation must be finite".into()));
    }
    let model = model_term(1, 2.0 * g.sigma.ln(), t)?;
    Ok(model - d1_from_log(g.log_density(y_obs), t))
}

/// Samplewise contribution for a finite-support model, with integrals
/// replaced by sums over the support.
pub fn discrete_samplewise_contribution(
    y_obs: usize,
    d: &DiscreteDensity,
    t: &TuningTriple,
) -> Result<f64> {
    check_x(0.0, t)?;
    let f_obs = *d.probs.get(y_obs).ok_or(Error::IndexOutOfRange {
        index: y_obs,
        len: d.probs.len(),
    })?;
    let exp_part: f64 = d
        .probs
        .iter()
        .map(|&f| f * f * exp_bracket2(t.alpha * f))
        .sum();
    let pow_part: f64 = d.probs.iter().map(|&f| f.powf(1.0 + t.gamma)).sum();
    let data = generating_fn_d1(f_obs, t)?;
    Ok(t.beta * exp_part + (1.0 - t.beta) * pow_part - data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn triple(a: f64, b: f64, g: f64) -> TuningTriple {
        TuningTriple::new(a, b, g).unwrap()
    }

    #[test]
    fn generating_fn_vanishes_at_zero() {
        for t in [
            triple(0.5, 0.3, 0.2),
            triple(-1.0, 1.0, 0.0),
            triple(0.0, 0.0, 2.0),
        ] {
            assert_eq!(generating_fn(0.0, &t).unwrap(), 0.0);
        }
    }

    #[test]
    fn generating_fn_special_cases() {
        assert_relative_eq!(
            generating_fn(2.0, &triple(3.7, 0.0, 1.0)).unwrap(),
            2.0,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            generating_fn(1.0, &triple(1.0, 1.0, 0.4)).unwrap(),
            std::f64::consts::E - 2.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn limits_are_continuous() {
        let x = 0.8;
        let near = generating_fn(x, &triple(1e-6, 0.4, 1e-6)).unwrap();
        let at = generating_fn(x, &triple(0.0, 0.4, 0.0)).unwrap();
        assert_relative_eq!(near, at, epsilon = 1e-6);
        assert_relative_eq!(at, 0.2 * x * x + 0.6 * x * x.ln(), epsilon = 1e-15);
    }

    #[test]
    fn derivative_at_zero() {
        assert_relative_eq!(generating_fn_d1(0.0, &triple(0.3, 0.0, 0.5)).unwrap(), -2.0);
        assert!(matches!(
            generating_fn_d1(0.0, &TuningTriple::likelihood()),
            Err(Error::Singularity(_))
        ));
        assert!(matches!(
            generating_fn_d2(0.0, &triple(0.1, 0.5, 0.5)),
            Err(Error::Singularity(_))
        ));
    }

    #[test]
    fn weight_is_x_times_second_derivative() {
        let t = triple(0.3, 0.5, 0.4);
        let x = 0.7;
        assert_relative_eq!(
            weight_fn(x, &t).unwrap(),
            x * generating_fn_d2(x, &t).unwrap(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn weight_reductions() {
        assert_eq!(weight_fn(0.0, &triple(0.2, 0.4, 0.3)).unwrap(), 0.0);
        let f = 0.37;
        assert_relative_eq!(
            weight_fn(f, &triple(9.0, 0.0, 0.6)).unwrap(),
            1.6 * f.powf(0.6)
        );
        assert_relative_eq!(weight_fn(1.0, &triple(0.0, 1.0, 0.5)).unwrap(), 1.0);
    }

    #[test]
    fn domain_errors() {
        assert!(generating_fn(-1.0, &triple(0.1, 0.1, 0.1)).is_err());
        assert!(TuningTriple::new(0.1, 1.2, 0.1).is_err());
        assert!(TuningTriple::new(0.1, 0.2, -0.1).is_err());
        assert!(TuningTriple::new(f64::NAN, 0.2, 0.1).is_err());
        let g = UnivariateGaussian::new(0.0, 1.0).unwrap();
        assert!(gaussian_power_integral(&g, 0.5).is_err());
        assert!(UnivariateGaussian::new(0.0, 0.0).is_err());
    }

    #[test]
    fn power_integral_closed_forms() {
        let g = UnivariateGaussian::new(3.0, 2.5).unwrap();
        assert_relative_eq!(
            gaussian_power_integral(&g, 1.0).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        let g1 = UnivariateGaussian::new(0.0, 1.0).unwrap();
        assert_relative_eq!(
            gaussian_power_integral(&g1, 2.0).unwrap(),
            1.0 / (2.0 * PI.sqrt()),
            max_relative = 1e-14
        );
    }

    #[test]
    fn exp_component_small_alpha() {
        let g = UnivariateGaussian::new(0.0, 1.0).unwrap();
        assert_eq!(exp_component_integral(&g, 0.0).unwrap(), 0.0);
        let i2 = gaussian_power_integral(&g, 2.0).unwrap();
        let i3 = gaussian_power_integral(&g, 3.0).unwrap();
        // the first correction to E/α² → I₂/2 is α·I₃/3
        let a = 1e-4;
        let gap = exp_component_integral(&g, a).unwrap() / (a * a) - 0.5 * i2;
        assert!((gap - a * i3 / 3.0).abs() < 1e-9);
        let a = 1e-6;
        assert!((exp_component_integral(&g, a).unwrap() / (a * a) - 0.5 * i2).abs() < 1e-6);
    }

    #[test]
    fn series_gives_up_when_divergent_slowly() {
        // a constant power integral of huge magnitude needs many terms
        assert!(matches!(
            exp_series(400.0, |_| 1.0),
            Err(Error::NonConvergence { .. })
        ));
    }

    #[test]
    fn discrete_hand_value() {
        let d = DiscreteDensity::new(vec![0.5, 0.5]).unwrap();
        let v = discrete_samplewise_contribution(0, &d, &triple(0.7, 0.0, 1.0)).unwrap();
        assert_relative_eq!(v, 0.5, epsilon = 1e-15);
        assert!(matches!(
            discrete_samplewise_contribution(2, &d, &triple(0.7, 0.0, 1.0)),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn discrete_log_limit_is_negative_log_mass() {
        let d = DiscreteDensity::new(vec![0.3, 0.7]).unwrap();
        let v = discrete_samplewise_contribution(0, &d, &triple(0.2, 0.0, 1e-6)).unwrap();
        assert!((v + 0.3f64.ln()).abs() < 1e-4);
    }

    #[test]
    fn helper_series_match_direct_forms() {
        for z in [-0.49, -0.1, 1e-3, 0.3, 0.49] {
            assert_relative_eq!(exp_rem2(z), (z.exp_m1() - z) / (z * z), max_relative = 1e-9);
            assert_relative_eq!(
                exp_bracket2(z),
                (z.exp() * (z - 1.0) + 1.0) / (z * z),
                max_relative = 1e-8
            );
        }
        assert_eq!(exp_rem2(0.0), 0.5);
        assert_eq!(exp_bracket2(0.0), 0.5);
    }
}
