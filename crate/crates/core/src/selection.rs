//! Covariate screening, exhaustive subset scoring and consolidated rankings.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::criteria::{criterion, CriterionKind};
use crate::divergence::TuningTriple;
use crate::error::{Error, Result};
use crate::estimation::{fit, value_and_grad, EstimatorKind, FitOptions, RegressionProblem};
use crate::io::fmt_num;
use crate::tuning::TuningMap;

/// Hard cap on the number of screened covariates enumerated exhaustively.
pub const MAX_SUBSET_COVARIATES: usize = 20;

/// A non-empty subset of candidate covariates (bit `j` ↔ candidate `j`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CandidateModel {
    pub mask: u64,
    pub labels: Vec<String>,
}

impl CandidateModel {
    pub fn from_mask(mask: u64, names: &[String]) -> Result<Self> {
        if mask == 0 {
            return Err(Error::InvalidConfig(
                "candidate model must be non-empty".into(),
            ));
        }
        if names.len() < 64 && mask >> names.len() != 0 {
            return Err(Error::IndexOutOfRange {
                index: 63 - mask.leading_zeros() as usize,
                len: names.len(),
            });
        }
        let labels = Self::indices_of(mask)
            .into_iter()
            .map(|j| names[j].clone())
            .collect();
        Ok(Self { mask, labels })
    }

    pub fn indices(&self) -> Vec<usize> {
        Self::indices_of(self.mask)
    }

    fn indices_of(mask: u64) -> Vec<usize> {
        (0..64).filter(|j| mask >> j & 1 == 1).collect()
    }

    pub fn size(&self) -> usize {
        self.mask.count_ones() as usize
    }

    /// Labels joined with `+`.
    pub fn name(&self) -> String {
        self.labels.join("+")
    }
}

/// A candidate with the criterion totals computed for it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredModel {
    pub model: CandidateModel,
    pub totals: BTreeMap<CriterionKind, f64>,
}

impl ScoredModel {
    pub fn total(&self, kind: CriterionKind) -> Option<f64> {
        self.totals.get(&kind).copied()
    }
}

/// Candidates ascending by one criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedList {
    pub kind: CriterionKind,
    pub entries: Vec<ScoredModel>,
}

impl RankedList {
    /// Sorts `entries` by `kind` ascending (ties by mask); entries without a
    /// `kind` total are dropped.
    pub fn new(kind: CriterionKind, entries: Vec<ScoredModel>) -> Self {
        let mut entries: Vec<ScoredModel> = entries
            .into_iter()
            .filter(|e| e.total(kind).is_some())
            .collect();
        entries.sort_by(|a, b| {
            a.total(kind)
                .unwrap()
                .total_cmp(&b.total(kind).unwrap())
                .then(a.model.mask.cmp(&b.model.mask))
        });
        Self { kind, entries }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rank", "model", "size", self.kind.label()])?;
        for (r, e) in self.entries.iter().enumerate() {
            w.write_record([
                (r + 1).to_string(),
                e.model.name(),
                e.model.size().to_string(),
                fmt_num(e.total(self.kind).unwrap()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fits a candidate subset under the estimator matched to a criterion and
/// returns the criterion total.
pub trait SubsetScorer: Sync {
    /// Names of the candidate covariates.
    fn candidate_names(&self) -> Vec<String>;

    fn score(
        &self,
        model: &CandidateModel,
        kind: CriterionKind,
        tuning: &TuningTriple,
    ) -> Result<f64>;
}

/// Linear regression: forced columns (e.g. the intercept) are always kept.
#[derive(Debug, Clone)]
pub struct RegressionScorer {
    pub problem: RegressionProblem,
    pub forced: Vec<usize>,
    pub candidates: Vec<usize>,
    pub opts: FitOptions,
}

impl RegressionScorer {
    /// Keeps the intercept column, if any, and offers every other column.
    pub fn new(problem: RegressionProblem) -> Self {
        let forced: Vec<usize> = problem.intercept_index().into_iter().collect();
        let candidates = (0..problem.p()).filter(|j| !forced.contains(j)).collect();
        Self {
            problem,
            forced,
            candidates,
            opts: FitOptions::default(),
        }
    }

    /// Restricts the candidates to `cols` (design column indices).
    pub fn with_candidates(mut self, cols: Vec<usize>) -> Self {
        self.candidates = cols;
        self
    }

    fn columns(&self, model: &CandidateModel) -> Vec<usize> {
        let mut cols = self.forced.clone();
        cols.extend(model.indices().into_iter().map(|j| self.candidates[j]));
        cols
    }
}

impl SubsetScorer for RegressionScorer {
    fn candidate_names(&self) -> Vec<String> {
        self.candidates
            .iter()
            .map(|&j| self.problem.names()[j].clone())
            .collect()
    }

    fn score(
        &self,
        model: &CandidateModel,
        kind: CriterionKind,
        tuning: &TuningTriple,
    ) -> Result<f64> {
        let sub = self.problem.subset(&self.columns(model))?;
        let f = fit(&sub, tuning, kind.estimator(), None, &self.opts)?;
        Ok(criterion(&sub, &f, kind)?.total)
    }
}

fn tuning_for(kind: CriterionKind, tunings: &TuningMap) -> TuningTriple {
    tunings.for_kind(kind.estimator())
}

/// Per-criterion ranked lists plus the subsets that could not be scored.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetRanking {
    pub lists: Vec<RankedList>,
    /// `(model, criterion, error message)`.
    pub failures: Vec<(CandidateModel, CriterionKind, String)>,
}

type Scores = Vec<(CriterionKind, Result<f64>)>;

/// Scores every non-empty subset of the candidates selected by `mask`
/// (indices into `scorer.candidate_names()`) under each criterion.
pub fn enumerate_and_rank<S: SubsetScorer>(
    scorer: &S,
    mask: &[usize],
    kinds: &[CriterionKind],
    tunings: &TuningMap,
) -> Result<SubsetRanking> {
    let names = scorer.candidate_names();
    if mask.len() > MAX_SUBSET_COVARIATES {
        return Err(Error::TooManyCovariates {
            got: mask.len(),
            cap: MAX_SUBSET_COVARIATES,
        });
    }
    if mask.is_empty() || kinds.is_empty() {
        return Err(Error::InvalidConfig(
            "need at least one covariate and one criterion".into(),
        ));
    }
    if let Some(&j) = mask.iter().find(|&&j| j >= names.len()) {
        return Err(Error::IndexOutOfRange {
            index: j,
            len: names.len(),
        });
    }
    let k = mask.len();
    let scored: Vec<(CandidateModel, Scores)> = (1..1u64 << k)
        .into_par_iter()
        .map(|sub| {
            let full = (0..k)
                .filter(|b| sub >> b & 1 == 1)
                .fold(0u64, |m, b| m | 1 << mask[b]);
            let model = CandidateModel::from_mask(full, &names).expect("mask within range");
            let res = kinds
                .iter()
                .map(|&kind| (kind, scorer.score(&model, kind, &tuning_for(kind, tunings))))
                .collect();
            (model, res)
        })
        .collect();
    let mut failures = Vec::new();
    let mut models = Vec::with_capacity(scored.len());
    for (model, res) in scored {
        let mut totals = BTreeMap::new();
        for (kind, r) in res {
            match r {
                Ok(v) => {
                    totals.insert(kind, v);
                }
                Err(e) => failures.push((model.clone(), kind, e.to_string())),
            }
        }
        models.push(ScoredModel { model, totals });
    }
    let lists = kinds
        .iter()
        .map(|&kind| RankedList::new(kind, models.clone()))
        .collect();
    Ok(SubsetRanking { lists, failures })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsolidatedEntry {
    pub model: CandidateModel,
    pub freq: usize,
    pub sel_freq: f64,
    pub totals: BTreeMap<CriterionKind, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsolidatedRanking {
    pub top_k: usize,
    pub n_lists: usize,
    pub entries: Vec<ConsolidatedEntry>,
}

impl ConsolidatedRanking {
    /// Columns `model, freq, sel_freq, EPDIC, DPDIC, MLIC`; absent totals
    /// are left empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        self.write_csv_labeled(out, "model")
    }

    /// Same as [`write_csv`](Self::write_csv) with a custom first column name.
    pub fn write_csv_labeled<W: Write>(&self, out: W, first: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([first, "freq", "sel_freq", "EPDIC", "DPDIC", "MLIC"])?;
        for e in &self.entries {
            let mut row = vec![
                e.model.name(),
                e.freq.to_string(),
                format!("{:.3}", e.sel_freq),
            ];
            for k in CriterionKind::ALL {
                row.push(e.totals.get(&k).map(|&v| fmt_num(v)).unwrap_or_default());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Merges the top `top_k` of each list by appearance frequency.
///
/// Sorted by frequency descending, then EPDIC ascending (models without an
/// EPDIC total last), then mask. The result does not depend on list order.
pub fn consolidate(lists: &[RankedList], top_k: usize) -> Result<ConsolidatedRanking> {
    if lists.len() < 2 {
        return Err(Error::InvalidConfig(
            "consolidation needs at least two ranked lists".into(),
        ));
    }
    if top_k == 0 {
        return Err(Error::InvalidConfig("top_k must be >= 1".into()));
    }
    let mut freq: BTreeMap<&CandidateModel, usize> = BTreeMap::new();
    for l in lists {
        for e in l.entries.iter().take(top_k) {
            *freq.entry(&e.model).or_default() += 1;
        }
    }
    let n_lists = lists.len();
    let mut entries: Vec<ConsolidatedEntry> = freq
        .into_iter()
        .map(|(model, f)| {
            let mut totals = BTreeMap::new();
            for l in lists {
                if let Some(e) = l.entries.iter().find(|e| &e.model == model) {
                    for (&k, &v) in &e.totals {
                        totals.entry(k).or_insert(v);
                    }
                }
            }
            ConsolidatedEntry {
                model: model.clone(),
                freq: f,
                sel_freq: f as f64 / n_lists as f64,
                totals,
            }
        })
        .collect();
    let epdic = |e: &ConsolidatedEntry| {
        e.totals
            .get(&CriterionKind::Epdic)
            .copied()
            .unwrap_or(f64::INFINITY)
    };
    entries.sort_by(|a, b| {
        b.freq
            .cmp(&a.freq)
            .then(epdic(a).total_cmp(&epdic(b)))
            .then(a.model.mask.cmp(&b.model.mask))
    });
    Ok(ConsolidatedRanking {
        top_k,
        n_lists,
        entries,
    })
}

/// Outcome of LASSO screening.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LassoScreen {
    /// Active penalized columns (design indices), ascending.
    pub active: Vec<usize>,
    pub lambda: f64,
    /// `(λ, active count, criterion total of the refit or NaN)` along the path.
    pub path: Vec<(f64, usize, f64)>,
}

/// Coefficients with `|coef_j| > 1e-6` count as active.
pub const ACTIVE_TOL: f64 = 1e-6;

fn soft(x: f64, thr: f64) -> f64 {
    x.signum() * (x.abs() - thr).max(0.0)
}

/// Minimizes `H_n(θ) + λ Σ_{j ∉ unpenalized} |coef_j|` by proximal gradient
/// with backtracking, from `start = (coef, log σ)`. With `fixed_log_sigma`
/// the scale is held fixed.
pub fn lasso_fit(
    problem: &RegressionProblem,
    t: &TuningTriple,
    kind: EstimatorKind,
    lambda: f64,
    unpenalized: &[usize],
    start: &DVector<f64>,
    fixed_log_sigma: Option<f64>,
) -> Result<DVector<f64>> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda must be >= 0, got {lambda}")));
    }
    let p = problem.p();
    let estimate_scale = fixed_log_sigma.is_none();
    let q = p + usize::from(estimate_scale);
    if start.len() != q {
        return Err(Error::ShapeMismatch(format!(
            "start has length {}, expected {q}",
            start.len()
        )));
    }
    let eval = |x: &DVector<f64>| {
        let coef = x.rows(0, p).into_owned();
        let ls = fixed_log_sigma.unwrap_or_else(|| x[p]);
        value_and_grad(problem, &coef, ls, t, kind, estimate_scale)
    };
    let penalized: Vec<bool> = (0..p).map(|j| !unpenalized.contains(&j)).collect();
    let penalty = |x: &DVector<f64>| {
        lambda
            * (0..p)
                .filter(|&j| penalized[j])
                .map(|j| x[j].abs())
                .sum::<f64>()
    };

    let mut x = start.clone();
    let (mut h, mut g) = eval(&x)?;
    let mut step = 1.0;
    for _ in 0..20_000 {
        let mut accepted = None;
        for _ in 0..60 {
            let mut y = &x - &g * step;
            for j in 0..p {
                if penalized[j] {
                    y[j] = soft(y[j], step * lambda);
                }
            }
            if estimate_scale {
                y[p] = y[p].clamp(x[p] - 1.0, x[p] + 1.0);
            }
            let d = &y - &x;
            if let Ok((hy, gy)) = eval(&y) {
                if hy <= h + g.dot(&d) + d.norm_squared() / (2.0 * step) + 1e-15 * h.abs() {
                    accepted = Some((y, hy, gy, d));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((y, hy, gy, d)) = accepted else {
            break;
        };
        let moved = d.amax();
        let rel = ((h + penalty(&x)) - (hy + penalty(&y))).abs() / (1.0 + (h + penalty(&x)).abs());
        x = y;
        h = hy;
        g = gy;
        if moved < 1e-11 || rel < 1e-15 {
            break;
        }
        step *= 2.0;
    }
    Ok(x)
}

/// `λ_max`: the smallest penalty that zeroes every penalized coefficient
/// under the likelihood, from the unpenalized-only MLE fit.
pub fn lambda_max(problem: &RegressionProblem, unpenalized: &[usize]) -> Result<f64> {
    let p = problem.p();
    let mut coef = DVector::zeros(p);
    let resid_ss;
    if unpenalized.is_empty() {
        resid_ss = problem.response().norm_squared();
    } else {
        let sub = problem.subset(unpenalized)?;
        let b = crate::linalg::ols(sub.design(), sub.response())?;
        for (k, &j) in unpenalized.iter().enumerate() {
            coef[j] = b[k];
        }
        resid_ss = (problem.response() - sub.design() * &b).norm_squared();
    }
    let log_sigma = 0.5 * (resid_ss / problem.n() as f64).max(1e-300).ln();
    let (_, g) = value_and_grad(
        problem,
        &coef,
        log_sigma,
        &TuningTriple::likelihood(),
        EstimatorKind::Mle,
        true,
    )?;
    Ok((0..p)
        .filter(|j| !unpenalized.contains(j))
        .map(|j| g[j].abs())
        .fold(0.0, f64::max))
}

/// `points` log-spaced values from `λ_max` down to `λ_max · 10⁻³`.
pub fn default_lambda_grid(lmax: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![lmax];
    }
    (0..points)
        .map(|k| lmax * 10f64.powf(-3.0 * k as f64 / (points - 1) as f64))
        .collect()
}

fn criterion_for(kind: EstimatorKind) -> CriterionKind {
    match kind {
        EstimatorKind::Mle => CriterionKind::Mlic,
        EstimatorKind::Dpde => CriterionKind::Dpdic,
        EstimatorKind::Epde => CriterionKind::Epdic,
    }
}

/// LASSO screening of the non-intercept columns (covariates assumed
/// standardized). Walks the grid from large to small `λ` with warm starts,
/// refits each distinct active set without penalty and keeps the `λ` whose
/// refit minimizes the criterion matched to `kind`; ties go to the larger `λ`.
pub fn lasso_screen(
    problem: &RegressionProblem,
    t: &TuningTriple,
    kind: EstimatorKind,
    lambda_grid: Option<&[f64]>,
) -> Result<LassoScreen> {
    let unpenalized: Vec<usize> = problem.intercept_index().into_iter().collect();
    let grid: Vec<f64> = match lambda_grid {
        Some(g) => {
            let mut g = g.to_vec();
            g.sort_by(|a, b| b.total_cmp(a));
            g
        }
        None => default_lambda_grid(lambda_max(problem, &unpenalized)?, 50),
    };
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty lambda grid".into()));
    }
    let p = problem.p();
    let init = crate::linalg::ols(problem.design(), problem.response())?;
    let resid = problem.response() - problem.design() * &init;
    let mut x = init.push(
        0.5 * (resid.norm_squared() / (problem.n() - p) as f64)
            .max(1e-300)
            .ln(),
    );
    let ckind = criterion_for(kind);
    let mut cache: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut path = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64, Vec<usize>)> = None;
    let mut smallest_nonempty_lambda = None;
    for &lambda in &grid {
        x = lasso_fit(problem, t, kind, lambda, &unpenalized, &x, None)?;
        let active: Vec<usize> = (0..p)
            .filter(|j| !unpenalized.contains(j) && x[*j].abs() > ACTIVE_TOL)
            .collect();
        if active.is_empty() {
            path.push((lambda, 0, f64::NAN));
            continue;
        }
        smallest_nonempty_lambda.get_or_insert(lambda);
        let score = match cache.get(&active) {
            Some(&s) => s,
            None => {
                let mut cols = unpenalized.clone();
                cols.extend(&active);
                cols.sort_unstable();
                let s = problem
                    .subset(&cols)
                    .and_then(|sub| {
                        let f = fit(&sub, t, kind, None, &FitOptions::default())?;
                        criterion(&sub, &f, ckind)
                    })
                    .map(|r| r.total)
                    .unwrap_or(f64::NAN);
                cache.insert(active.clone(), s);
                s
            }
        };
        path.push((lambda, active.len(), score));
        if score.is_finite() && best.as_ref().is_none_or(|b| score < b.1) {
            best = Some((lambda, score, active));
        }
    }
    match best {
        Some((lambda, _, active)) => Ok(LassoScreen {
            active,
            lambda,
            path,
        }),
        None => Err(Error::EmptyActiveSet {
            lambda: *grid.last().expect("non-empty grid"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|j| format!("v{j}")).collect()
    }

    fn list(kind: CriterionKind, masks: &[u64]) -> RankedList {
        let nm = names(8);
        let entries = masks
            .iter()
            .enumerate()
            .map(|(r, &m)| ScoredModel {
                model: CandidateModel::from_mask(m, &nm).unwrap(),
                totals: BTreeMap::from([(kind, r as f64), (CriterionKind::Epdic, m as f64)]),
            })
            .collect();
        RankedList::new(kind, entries)
    }

    #[test]
    fn candidate_masks() {
        let m = CandidateModel::from_mask(0b101, &names(3)).unwrap();
        assert_eq!(m.labels, ["v0", "v2"]);
        assert_eq!(m.name(), "v0+v2");
        assert!(CandidateModel::from_mask(0, &names(3)).is_err());
        assert!(CandidateModel::from_mask(0b1000, &names(3)).is_err());
    }

    #[test]
    fn identical_lists_give_full_frequency() {
        let a = list(CriterionKind::Mlic, &[1, 2, 3]);
        let b = list(CriterionKind::Dpdic, &[1, 2, 3]);
        let c = list(CriterionKind::Epdic, &[1, 2, 3]);
        let r = consolidate(&[a, b, c], 15).unwrap();
        assert!(r.entries.iter().all(|e| e.freq == 3 && e.sel_freq == 1.0));
    }

    #[test]
    fn disjoint_lists_give_unit_frequency() {
        let a = list(CriterionKind::Mlic, &[1, 2]);
        let b = list(CriterionKind::Dpdic, &[3, 4]);
        let r = consolidate(&[a, b], 2).unwrap();
        assert_eq!(r.entries.len(), 4);
        assert!(r.entries.iter().all(|e| e.freq == 1));
    }

    #[test]
    fn consolidation_needs_two_lists() {
        assert!(consolidate(&[list(CriterionKind::Mlic, &[1])], 3).is_err());
    }

    #[test]
    fn lambda_grid_shape() {
        let g = default_lambda_grid(2.0, 50);
        assert_eq!(g.len(), 50);
        assert_eq!(g[0], 2.0);
        assert!((g[49] - 2e-3).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[1] < w[0]));
    }
}
