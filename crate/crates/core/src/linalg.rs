//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value threshold below which a design is rank deficient.
const RANK_TOL: f64 = 1e-10;

/// Fails with `SingularDesign` unless `x` has full column rank.
pub fn check_full_rank(x: &DMatrix<f64>) -> Result<()> {
    let sv = x.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(max > 0.0) || min <= RANK_TOL * max {
        return Err(Error::SingularDesign(format!(
            "smallest/largest singular value = {:e}",
            if max > 0.0 { min / max } else { 0.0 }
        )));
    }
    Ok(())
}

/// Ordinary least squares coefficients.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let xtx = x.tr_mul(x);
    let xty = x.tr_mul(y);
    let chol = xtx
        .cholesky()
        .ok_or_else(|| Error::SingularDesign("XᵀX is not positive definite".into()))?;
    Ok(chol.solve(&xty))
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// `tr(Ω Ψ⁻¹)` through a Cholesky factor of `Ψ`.
pub fn trace_solve(omega: &DMatrix<f64>, psi: &DMatrix<f64>) -> Result<f64> {
    let chol = psi
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NonPositiveDefinite("curvature matrix".into()))?;
    Ok(chol.solve(omega).trace())
}

/// `tr(Ω Ψ⁺)` with the Moore-Penrose pseudo-inverse of the symmetric `Ψ`;
/// eigenvalues below `rel_cut · λ_max` are treated as zero.
pub fn trace_pinv(omega: &DMatrix<f64>, psi: &DMatrix<f64>, rel_cut: f64) -> f64 {
    let eig = symmetrize(psi).symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let mut tr = 0.0;
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > rel_cut * lmax && lambda > 0.0 {
            let v = eig.eigenvectors.column(k);
            tr += (v.transpose() * omega * v)[(0, 0)] / lambda;
        }
    }
    tr
}

/// Lower Cholesky factor, or `NonPositiveDefinite`.
pub fn cholesky_lower(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    a.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::NonPositiveDefinite(what.to_string()))
}

/// Sums with pairwise reduction so the result does not depend on how a
/// parallel map split the input.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
