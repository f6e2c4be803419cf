//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    // pre-split so narrow peaks are not missed by the first Simpson estimate
    let pieces = 64;
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            rec(f, lo, hi, fa, fm, fb, whole, tol / pieces as f64, 50)
        })
        .sum()
}

/// Midpoint Riemann sum with `nodes` cells.
pub fn riemann<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, nodes: usize) -> f64 {
    let h = (b - a) / nodes as f64;
    (0..nodes).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

pub fn gauss_pdf(y: f64, mu: f64, sigma: f64) -> f64 {
    let z = (y - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Central differences of a scalar function, absolute step `h`.
pub fn fd_gradient<F: Fn(&DVector<f64>) -> f64>(f: F, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    for j in 0..x.len() {
        let mut a = x.clone();
        let mut b = x.clone();
        a[j] += h;
        b[j] -= h;
        g[j] = (f(&a) - f(&b)) / (2.0 * h);
    }
    g
}

/// Largest componentwise relative error, with `floor` guarding tiny entries.
pub fn max_rel_err(a: &DVector<f64>, b: &DVector<f64>, floor: f64) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Multivariate normal density from the explicit inverse and determinant.
pub fn mvn_density_explicit(y: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let m = y.len() as f64;
    let inv = cov.clone().try_inverse().expect("invertible");
    let det = cov.determinant();
    let r = y - mean;
    let q = (r.transpose() * inv * &r)[(0, 0)];
    (-0.5 * q).exp() / ((2.0 * std::f64::consts::PI).powf(m) * det).sqrt()
}

/// Lower Cholesky factor by the textbook recurrence.
pub fn cholesky_naive(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum();
            if i == j {
                l[(i, i)] = (a[(i, i)] - s).sqrt();
            } else {
                l[(i, j)] = (a[(i, j)] - s) / l[(j, j)];
            }
        }
    }
    l
}

/// Draw from `N(mean, cov)`.
pub fn mvn_draw(rng: &mut ChaCha8Rng, mean: &DVector<f64>, chol: &DMatrix<f64>) -> DVector<f64> {
    let z = DVector::from_fn(mean.len(), |_, _| normal(rng));
    mean + chol * z
}

/// Generalized least squares `(Σ Xᵢᵀ Ω⁻¹ Xᵢ)⁻¹ Σ Xᵢᵀ Ω⁻¹ yᵢ` with a shared `Ω`.
pub fn gls(xs: &[DMatrix<f64>], ys: &[DVector<f64>], omega: &DMatrix<f64>) -> DVector<f64> {
    let inv = omega.clone().try_inverse().expect("invertible");
    let p = xs[0].ncols();
    let mut a = DMatrix::zeros(p, p);
    let mut b = DVector::zeros(p);
    for (x, y) in xs.iter().zip(ys) {
        a += x.transpose() * &inv * x;
        b += x.transpose() * &inv * y;
    }
    a.try_inverse().expect("invertible") * b
}

/// Mean and standard error of a sample.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// AR(1) design with `Σ_jk = ρ^{|j−k|}` and rows drawn by a naive Cholesky.
pub fn ar1_design(rng: &mut ChaCha8Rng, n: usize, p: usize, rho: f64) -> DMatrix<f64> {
    let cov = DMatrix::from_fn(p, p, |j, k| rho.powi((j as i32 - k as i32).abs()));
    let l = cholesky_naive(&cov);
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let z = DVector::from_fn(p, |_, _| normal(rng));
        x.set_row(i, &(&l * z).transpose());
    }
    x
}
