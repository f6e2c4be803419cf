mod common;

use common::*;
use epdic::criteria::*;
use epdic::divergence::samplewise_contribution;
use epdic::estimation::*;
use epdic::{TuningTriple, UnivariateGaussian};
use nalgebra::DVector;

fn problem(seed: u64, n: usize) -> RegressionProblem {
    let mut r = rng(seed);
    let x = ar1_design(&mut r, n, 5, 0.5);
    let b = DVector::from_vec(vec![1.5, -1.0, 0.8, 0.5, -0.7]);
    let y = &x * &b + DVector::from_fn(n, |_, _| normal(&mut r));
    RegressionProblem::new(x, y).unwrap()
}

fn fit_with(pr: &RegressionProblem, a: f64, b: f64, g: f64, kind: EstimatorKind) -> FitResult {
    fit(
        pr,
        &TuningTriple::new(a, b, g).unwrap(),
        kind,
        None,
        &FitOptions::default(),
    )
    .unwrap()
}

#[test]
fn mlic_penalty_recovers_parameter_count() {
    let mut pens = Vec::new();
    for seed in 0..60 {
        let pr = problem(seed, 150);
        let f = fit_with(&pr, 0.1, 0.5, 0.5, EstimatorKind::Mle);
        pens.push(criterion(&pr, &f, CriterionKind::Mlic).unwrap().penalty);
    }
    let (m, _) = mean_se(&pens);
    assert!((m - 6.0).abs() <= 0.25 * 6.0, "mean MLIC penalty {m}");
}

#[test]
fn dpdic_equals_epdic_at_beta_zero() {
    let pr = problem(1, 150);
    let d = fit_with(&pr, 0.3, 0.0, 0.4, EstimatorKind::Dpde);
    let e = fit_with(&pr, 0.3, 0.0, 0.4, EstimatorKind::Epde);
    let cd = criterion(&pr, &d, CriterionKind::Dpdic).unwrap();
    let ce = criterion(&pr, &e, CriterionKind::Epdic).unwrap();
    assert!((cd.total - ce.total).abs() < 1e-9);
    // an EPDE fit with β = 0 is also a valid DPDIC input
    let cx = criterion(&pr, &e, CriterionKind::Dpdic).unwrap();
    assert!((cx.total - cd.total).abs() < 1e-9);
}

#[test]
fn kind_checks() {
    let pr = problem(2, 100);
    let e = fit_with(&pr, 0.1, 0.7, 0.3, EstimatorKind::Epde);
    assert!(matches!(
        criterion(&pr, &e, CriterionKind::Mlic),
        Err(epdic::Error::KindMismatch(_))
    ));
    assert!(matches!(
        criterion(&pr, &e, CriterionKind::Dpdic),
        Err(epdic::Error::KindMismatch(_))
    ));
    let m = fit_with(&pr, 0.1, 0.7, 0.3, EstimatorKind::Mle);
    assert!(criterion(&pr, &m, CriterionKind::Mlic).is_ok());
}

#[test]
fn report_parts_are_consistent() {
    let pr = problem(3, 120);
    let f = fit_with(&pr, 0.1, 0.7, 0.3, EstimatorKind::Epde);
    let r = criterion(&pr, &f, CriterionKind::Epdic).unwrap();
    assert_eq!(r.total, r.fit_term + r.penalty);
    assert!(r.penalty >= 0.0);
    let h = empirical_objective(&pr, &f.params, &f.tuning, EstimatorKind::Epde).unwrap();
    assert!((r.fit_term - pr.n() as f64 * h).abs() < 1e-12 * r.fit_term.abs().max(1.0));
    // scoring the same model twice gives the same totals
    let again = criterion(&pr, &f, CriterionKind::Epdic).unwrap();
    assert_eq!(again, r);
}

#[test]
fn influence_at_mode_is_n_times_contribution() {
    let pr = problem(4, 150);
    let f = fit_with(&pr, 0.1, 0.5, 0.3, EstimatorKind::Epde);
    let x = DVector::from_vec(vec![0.2, -0.1, 0.4, 0.0, 0.3]);
    let mode = x.dot(&f.params.coef);
    let g = UnivariateGaussian::new(mode, f.params.sigma()).unwrap();
    let want = 150.0 * samplewise_contribution(mode, &g, &f.tuning).unwrap();
    assert!((influence_value(&f, mode, &x).unwrap() - want).abs() < 1e-12 * want.abs().max(1.0));
}

fn max_abs_on(f: &FitResult, x: &DVector<f64>, half: f64, pts: usize) -> f64 {
    let mode = x.dot(&f.params.coef);
    let s = f.params.sigma();
    (0..pts)
        .map(|k| {
            let y = mode + half * s * (-1.0 + 2.0 * k as f64 / (pts - 1) as f64);
            influence_value(f, y, x).unwrap().abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn robust_influence_plateaus() {
    let pr = problem(5, 150);
    let f = fit_with(&pr, 0.1, 0.5, 0.3, EstimatorKind::Epde);
    let x = DVector::from_element(5, 0.1);
    let near = max_abs_on(&f, &x, 10.0, 2001);
    let far = max_abs_on(&f, &x, 100.0, 20_001);
    // f^γ at 10σ is still e^{-15}, so the plateau holds per observation
    // rather than after the factor n
    let n = pr.n() as f64;
    assert!((near - far).abs() / n < 1e-6, "{near} vs {far}");
}

#[test]
fn likelihood_limit_influence_grows_quadratically() {
    let pr = problem(6, 150);
    let f = fit_with(&pr, 0.1, 0.0, 1e-6, EstimatorKind::Dpde);
    let x = DVector::from_element(5, 0.1);
    let mode = x.dot(&f.params.coef);
    let s = f.params.sigma();
    let near = influence_value(&f, mode + 2.0 * s, &x).unwrap();
    let far = influence_value(&f, mode + 20.0 * s, &x).unwrap();
    assert!(far > 50.0 * near, "{far} vs {near}");
}

#[test]
fn scan_dichotomy() {
    let pr = problem(7, 150);
    let x = DVector::from_element(5, 0.0);
    let robust = fit_with(&pr, 0.1, 0.5, 0.3, EstimatorKind::Epde);
    assert!(
        boundedness_scan(&robust, &x, &GridSpec::default())
            .unwrap()
            .bounded
    );
    let kl = fit_with(&pr, 0.1, 0.0, 1e-6, EstimatorKind::Dpde);
    assert!(
        !boundedness_scan(&kl, &x, &GridSpec::default())
            .unwrap()
            .bounded
    );
}

#[test]
fn boundedness_over_tuning_grid() {
    let pr = problem(8, 150);
    let x = DVector::from_element(5, 0.2);
    let grid = GridSpec {
        half_width: 100.0,
        points: 4001,
    };
    for &b in &[0.0, 0.3, 0.7] {
        for &g in &[1e-6, 1e-4, 1e-3, 0.05, 0.1, 0.3, 0.7, 1.0] {
            let f = fit_with(&pr, 0.1, b, g, EstimatorKind::Epde);
            let scan = boundedness_scan(&f, &x, &grid).unwrap();
            assert_eq!(scan.bounded, g >= 0.05, "β={b} γ={g} sup={}", scan.sup_abs);
        }
    }
}

#[test]
fn doubling_n_doubles_sup() {
    let pr = problem(9, 100);
    let f = fit_with(&pr, 0.1, 0.5, 0.3, EstimatorKind::Epde);
    let mut f2 = f.clone();
    f2.n_obs *= 2;
    let x = DVector::from_element(5, 0.0);
    let a = boundedness_scan(&f, &x, &GridSpec::default()).unwrap();
    let b = boundedness_scan(&f2, &x, &GridSpec::default()).unwrap();
    assert_eq!(b.sup_abs, 2.0 * a.sup_abs);
    assert!(a.penalty_influence_excluded);
}
