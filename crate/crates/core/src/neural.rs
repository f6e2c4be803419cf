//! Small feed-forward binary classifiers trained under the EPD loss.
//!
//! Hidden layers use `tanh`; the output layer emits two logits turned into
//! `p̂ = P(y = 1)` by a softmax, computed from the clamped logit difference
//! so that `p̂` stays strictly inside `(0, 1)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::criteria::{check_kind, CriterionKind, CriterionReport};
use crate::divergence::{discrete_samplewise_contribution, DiscreteDensity, TuningTriple};
use crate::error::{Error, Result};
use crate::estimation::EstimatorKind;
use crate::io::Dataset;
use crate::linalg::{pairwise_sum, symmetrize, trace_pinv};
use crate::selection::{consolidate, CandidateModel, ConsolidatedRanking, RankedList, ScoredModel};
use crate::tuning::{pick_best, TuningFamily, TuningGrid, TuningMap, TuningSelection};

/// Logit differences are clamped to `±LOGIT_CLAMP`.
pub const LOGIT_CLAMP: f64 = 30.0;

/// Relative eigenvalue cut of the pseudo-inverse used for the penalty.
pub const PINV_REL_CUT: f64 = 1e-8;

/// Architectures ranked per criterion before consolidation.
pub const NN_TOP_K: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArchitectureSpec {
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub input_dim: usize,
    pub label: String,
}

impl ArchitectureSpec {
    /// A1 = (1, 2), A2 = (1, 3), A3 = (2, 2), A4 = (2, 3).
    pub fn grid(input_dim: usize) -> Vec<ArchitectureSpec> {
        [(1, 2, "A1"), (1, 3, "A2"), (2, 2, "A3"), (2, 3, "A4")]
            .into_iter()
            .map(|(l, h, label)| ArchitectureSpec {
                hidden_layers: l,
                hidden_width: h,
                input_dim,
                label: label.to_string(),
            })
            .collect()
    }

    pub fn from_label(label: &str, input_dim: usize) -> Result<Self> {
        Self::grid(input_dim)
            .into_iter()
            .find(|a| a.label.eq_ignore_ascii_case(label))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown architecture `{label}` (A1..A4)")))
    }

    /// `(rows, cols)` of each weight matrix, input to output.
    fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden_layers + 1);
        let mut fan_in = self.input_dim;
        for _ in 0..self.hidden_layers {
            shapes.push((self.hidden_width, fan_in));
            fan_in = self.hidden_width;
        }
        shapes.push((2, fan_in));
        shapes
    }

    pub fn n_params(&self) -> usize {
        self.layer_shapes().iter().map(|(r, c)| r * (c + 1)).sum()
    }

    /// `"A4 (3,3)"`-style display.
    pub fn display(&self) -> String {
        let widths = vec![self.hidden_width.to_string(); self.hidden_layers].join(",");
        format!("{} ({widths})", self.label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkParams {
    pub arch: ArchitectureSpec,
    /// `out × in`, input layer first; the last maps to the two logits.
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

impl NetworkParams {
    pub fn zeros(arch: &ArchitectureSpec) -> Self {
        let shapes = arch.layer_shapes();
        Self {
            arch: arch.clone(),
            weights: shapes.iter().map(|&(r, c)| DMatrix::zeros(r, c)).collect(),
            biases: shapes.iter().map(|&(r, _)| DVector::zeros(r)).collect(),
        }
    }

    /// Uniform in `[−0.5, 0.5]/√fan_in` for weights and biases.
    pub fn init(arch: &ArchitectureSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(arch);
        for (w, b) in p.weights.iter_mut().zip(p.biases.iter_mut()) {
            let scale = 1.0 / (w.ncols() as f64).sqrt();
            for v in w.iter_mut().chain(b.iter_mut()) {
                *v = scale * rng.random_range(-0.5..=0.5);
            }
        }
        p
    }

    /// Flattened layer by layer: weights column-major, then biases.
    pub fn to_vec(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(self.arch.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            v.extend(w.iter());
            v.extend(b.iter());
        }
        DVector::from_vec(v)
    }

    pub fn from_vec(arch: &ArchitectureSpec, v: &DVector<f64>) -> Result<Self> {
        if v.len() != arch.n_params() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters for an architecture with {}",
                v.len(),
                arch.n_params()
            )));
        }
        let mut p = Self::zeros(arch);
        let mut k = 0;
        for (w, b) in p.weights.iter_mut().zip(p.biases.iter_mut()) {
            for x in w.iter_mut().chain(b.iter_mut()) {
                *x = v[k];
                k += 1;
            }
        }
        Ok(p)
    }
}

/// Standardized features and binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationData {
    features: DMatrix<f64>,
    labels: Vec<u8>,
}

impl ClassificationData {
    pub fn new(features: DMatrix<f64>, labels: Vec<u8>) -> Result<Self> {
        if features.nrows() != labels.len() || labels.is_empty() {
            return Err(Error::ShapeMismatch(
                "one label per feature row required".into(),
            ));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::Domain("labels must be 0 or 1".into()));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite feature".into()));
        }
        Ok(Self { features, labels })
    }

    /// Centers and scales each column to unit sample sd (constant columns
    /// are only centered).
    pub fn standardized(features: DMatrix<f64>, labels: Vec<u8>) -> Result<Self> {
        let (n, d) = features.shape();
        let mut f = features;
        for j in 0..d {
            let mean = f.column(j).mean();
            let var = if n > 1 {
                f.column(j)
                    .iter()
                    .map(|v| (v - mean) * (v - mean))
                    .sum::<f64>()
                    / (n - 1) as f64
            } else {
                0.0
            };
            let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
            f.column_mut(j)
                .iter_mut()
                .for_each(|v| *v = (*v - mean) / sd);
        }
        Self::new(f, labels)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Rows `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        Self::new(
            self.features.select_rows(idx),
            idx.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    /// Builds a data set from encoded columns of a loaded table; features
    /// keep the table's encoding.
    pub fn from_dataset(ds: &Dataset, features: &[&str], label: &str) -> Result<Self> {
        let x = ds.matrix(features)?;
        let y = ds
            .column(label)?
            .iter()
            .enumerate()
            .map(|(row, &v)| {
                if v == 0.0 || v == 1.0 {
                    Ok(v as u8)
                } else {
                    Err(Error::NonNumericCell {
                        column: label.to_string(),
                        row: row + 1,
                        value: v.to_string(),
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(x, y)
    }
}

struct Trace {
    /// Layer inputs (activations), input first.
    acts: Vec<DVector<f64>>,
    clamped: bool,
    p: f64,
}

fn check_input(params: &NetworkParams, x: &DVector<f64>) -> Result<()> {
    if x.len() != params.arch.input_dim {
        return Err(Error::ShapeMismatch(format!(
            "input has {} features, network expects {}",
            x.len(),
            params.arch.input_dim
        )));
    }
    Ok(())
}

fn run_forward(params: &NetworkParams, x: &DVector<f64>) -> Trace {
    let last = params.weights.len() - 1;
    let mut acts = Vec::with_capacity(last + 1);
    let mut a = x.clone();
    for l in 0..last {
        let next = (&params.weights[l] * &a + &params.biases[l]).map(f64::tanh);
        acts.push(a);
        a = next;
    }
    let logits = &params.weights[last] * &a + &params.biases[last];
    acts.push(a);
    let raw = logits[1] - logits[0];
    let diff = raw.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
    Trace {
        acts,
        clamped: raw != diff,
        p: 1.0 / (1.0 + (-diff).exp()),
    }
}

/// Gradient with respect to the flattened parameters of a scalar whose
/// derivative with respect to the logit difference is `d_diff`.
fn backward(params: &NetworkParams, tr: &Trace, d_diff: f64, out: &mut [f64]) {
    let last = params.weights.len() - 1;
    let mut offsets = Vec::with_capacity(last + 1);
    let mut k = 0;
    for w in &params.weights {
        offsets.push(k);
        k += w.len() + w.nrows();
    }
    let mut delta = DVector::from_vec(vec![-d_diff, d_diff]);
    for l in (0..=last).rev() {
        let a = &tr.acts[l];
        let w = &params.weights[l];
        let (rows, cols) = w.shape();
        let off = offsets[l];
        for c in 0..cols {
            for r in 0..rows {
                out[off + c * rows + r] += delta[r] * a[c];
            }
        }
        for r in 0..rows {
            out[off + rows * cols + r] += delta[r];
        }
        if l > 0 {
            let back = w.tr_mul(&delta);
            delta = DVector::from_fn(cols, |i, _| back[i] * (1.0 - a[i] * a[i]));
        }
    }
}

/// `p̂ = P(y = 1 | x)`.
pub fn forward(params: &NetworkParams, x: &DVector<f64>) -> Result<f64> {
    check_input(params, x)?;
    Ok(run_forward(params, x).p)
}

/// Per-sample loss `V(y; Bernoulli(p))` of `kind`; `Mle` is `−ln f(y)`.
fn sample_loss(p: f64, y: u8, t: &TuningTriple, kind: EstimatorKind) -> Result<f64> {
    let f_obs = if y == 1 { p } else { 1.0 - p };
    match kind {
        EstimatorKind::Mle => Ok(-f_obs.ln()),
        _ => discrete_samplewise_contribution(
            y as usize,
            &DiscreteDensity::bernoulli(p)?,
            &kind.effective_tuning(t),
        ),
    }
}

/// `∂V/∂p`.
fn sample_loss_dp(p: f64, y: u8, t: &TuningTriple, kind: EstimatorKind) -> f64 {
    let s = if y == 1 { 1.0 } else { -1.0 };
    let f_obs = if y == 1 { p } else { 1.0 - p };
    if kind == EstimatorKind::Mle {
        return -s / f_obs;
    }
    let t = kind.effective_tuning(t);
    let (a, b, g) = (t.alpha(), t.beta(), t.gamma());
    let h1 = |f: f64| f * (a * f).exp();
    let model = b * (h1(p) - h1(1.0 - p)) + (1.0 - b) * (1.0 + g) * (p.powf(g) - (1.0 - p).powf(g));
    let d2 = b * (a * f_obs).exp() + (1.0 - b) * (1.0 + g) * f_obs.powf(g - 1.0);
    model - s * d2
}

/// `w(p)/p + w(1−p)/(1−p)`, the Gauss–Newton weight of `∇p ∇pᵀ`.
fn gn_weight(p: f64, t: &TuningTriple, kind: EstimatorKind) -> f64 {
    if kind == EstimatorKind::Mle {
        return 1.0 / (p * (1.0 - p));
    }
    let t = kind.effective_tuning(t);
    let w = |f: f64| {
        t.beta() * f * (t.alpha() * f).exp()
            + (1.0 - t.beta()) * (1.0 + t.gamma()) * f.powf(t.gamma())
    };
    w(p) / p + w(1.0 - p) / (1.0 - p)
}

/// Mean loss of `kind` over the data.
pub fn loss(
    params: &NetworkParams,
    data: &ClassificationData,
    t: &TuningTriple,
    kind: EstimatorKind,
) -> Result<f64> {
    if data.dim() != params.arch.input_dim {
        return Err(Error::ShapeMismatch(
            "feature dimension differs from the network input".into(),
        ));
    }
    let v = (0..data.n())
        .map(|i| {
            let tr = run_forward(params, &data.features.row(i).transpose());
            sample_loss(tr.p, data.labels[i], t, kind)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_sum(&v) / data.n() as f64)
}

/// `(1/N) Σ V(y_i; Bernoulli(p̂_i))` under the triple `t`.
pub fn epd_loss(
    params: &NetworkParams,
    data: &ClassificationData,
    t: &TuningTriple,
) -> Result<f64> {
    loss(params, data, t, EstimatorKind::Epde)
}

/// Per-sample loss gradients (`N × q`) by reverse-mode accumulation.
pub fn per_sample_gradients(
    params: &NetworkParams,
    data: &ClassificationData,
    t: &TuningTriple,
    kind: EstimatorKind,
) -> Result<DMatrix<f64>> {
    if data.dim() != params.arch.input_dim {
        return Err(Error::ShapeMismatch(
            "feature dimension differs from the network input".into(),
        ));
    }
    let q = params.arch.n_params();
    let mut g = DMatrix::zeros(q, data.n());
    for i in 0..data.n() {
        let tr = run_forward(params, &data.features.row(i).transpose());
        if tr.clamped {
            continue;
        }
        let d = sample_loss_dp(tr.p, data.labels[i], t, kind) * tr.p * (1.0 - tr.p);
        backward(params, &tr, d, g.column_mut(i).as_mut_slice());
    }
    Ok(g.transpose())
}

/// Gradient of [`loss`] with respect to the flattened parameters.
pub fn loss_gradient(
    params: &NetworkParams,
    data: &ClassificationData,
    t: &TuningTriple,
    kind: EstimatorKind,
) -> Result<DVector<f64>> {
    let s = per_sample_gradients(params, data, t, kind)?;
    let n = data.n() as f64;
    Ok(DVector::from_fn(s.ncols(), |j, _| {
        pairwise_sum(s.column(j).as_slice()) / n
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub seed: u64,
    pub max_epochs: usize,
    pub step: f64,
    /// Halvings tried per epoch before giving up.
    pub max_halvings: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            seed: 7,
            max_epochs: 500,
            step: 0.05,
            max_halvings: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub params: NetworkParams,
    pub kind: EstimatorKind,
    pub tuning: TuningTriple,
    pub loss_trace: Vec<f64>,
    pub epochs: usize,
    pub final_loss: f64,
    pub accuracy: f64,
}

/// Fraction of rows whose thresholded `p̂` matches the label.
pub fn accuracy(params: &NetworkParams, data: &ClassificationData) -> f64 {
    let hits = (0..data.n())
        .filter(|&i| {
            let p = run_forward(params, &data.features.row(i).transpose()).p;
            u8::from(p > 0.5) == data.labels[i]
        })
        .count();
    hits as f64 / data.n() as f64
}

/// Full-batch gradient descent from a seeded initialization. A step that
/// does not decrease the loss is halved and retried; the step size is then
/// kept for the next epoch.
pub fn train(
    arch: &ArchitectureSpec,
    data: &ClassificationData,
    t: &TuningTriple,
    kind: EstimatorKind,
    opts: &TrainOptions,
) -> Result<TrainReport> {
    if arch.input_dim != data.dim() {
        return Err(Error::ShapeMismatch(
            "architecture input_dim differs from the data".into(),
        ));
    }
    if !(opts.step > 0.0) {
        return Err(Error::InvalidConfig("step must be > 0".into()));
    }
    let mut params = NetworkParams::init(arch, opts.seed);
    let mut value = loss(&params, data, t, kind)?;
    if !value.is_finite() {
        return Err(Error::DivergentLoss { epoch: 0 });
    }
    let mut trace = vec![value];
    let mut step = opts.step;
    let mut epochs = 0;
    'outer: for epoch in 1..=opts.max_epochs {
        let g = loss_gradient(&params, data, t, kind)?;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::DivergentLoss { epoch });
        }
        if g.amax() == 0.0 {
            break;
        }
        let theta = params.to_vec();
        for _ in 0..=opts.max_halvings {
            let cand = NetworkParams::from_vec(arch, &(&theta - &g * step))?;
            match loss(&cand, data, t, kind) {
                Ok(v) if v.is_finite() && v < value => {
                    params = cand;
                    value = v;
                    trace.push(v);
                    epochs = epoch;
                    continue 'outer;
                }
                _ => step *= 0.5,
            }
        }
        break;
    }
    Ok(TrainReport {
        accuracy: accuracy(&params, data),
        params,
        kind,
        tuning: kind.effective_tuning(t),
        loss_trace: trace,
        epochs,
        final_loss: value,
    })
}

/// `n·L(θ̂) + tr(Ω̂ Ψ̂⁺)` with `Ω̂` from per-sample gradients and the
/// Gauss–Newton `Ψ̂ = (1/N) Σ [w(p̂)/p̂ + w(1−p̂)/(1−p̂)] ∇p̂ ∇p̂ᵀ`.
pub fn nn_criterion(
    report: &TrainReport,
    data: &ClassificationData,
    kind: CriterionKind,
) -> Result<CriterionReport> {
    check_kind(kind, report.kind, report.tuning.beta())?;
    let params = &report.params;
    let q = params.arch.n_params();
    let n = data.n();
    let s = per_sample_gradients(params, data, &report.tuning, report.kind)?;
    let omega = symmetrize(&(s.transpose() * &s / n as f64));
    let mut psi = DMatrix::zeros(q, q);
    let mut gp = vec![0.0; q];
    for i in 0..n {
        let tr = run_forward(params, &data.features.row(i).transpose());
        if tr.clamped {
            continue;
        }
        gp.iter_mut().for_each(|v| *v = 0.0);
        backward(params, &tr, tr.p * (1.0 - tr.p), &mut gp);
        let v = DVector::from_column_slice(&gp);
        psi += &v * v.transpose() * gn_weight(tr.p, &report.tuning, report.kind);
    }
    let psi = symmetrize(&(psi / n as f64));
    let penalty = trace_pinv(&omega, &psi, PINV_REL_CUT);
    Ok(CriterionReport::new(
        kind,
        n as f64 * report.final_loss,
        penalty,
    ))
}

/// One trained architecture scored by one criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArchitectureScore {
    pub arch: ArchitectureSpec,
    pub criterion: CriterionReport,
    pub final_loss: f64,
    pub accuracy: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArchitectureSelection {
    pub scores: Vec<ArchitectureScore>,
    pub lists: Vec<RankedList>,
    pub consolidated: ConsolidatedRanking,
}

/// Trains every architecture under the estimator matched to each criterion,
/// ranks per criterion and consolidates with `top_k`.
pub fn select_architecture(
    data: &ClassificationData,
    tunings: &TuningMap,
    kinds: &[CriterionKind],
    opts: &TrainOptions,
    top_k: usize,
) -> Result<ArchitectureSelection> {
    let archs = ArchitectureSpec::grid(data.dim());
    let labels: Vec<String> = archs.iter().map(|a| a.label.clone()).collect();
    let jobs: Vec<(usize, CriterionKind)> = (0..archs.len())
        .flat_map(|a| kinds.iter().map(move |&k| (a, k)))
        .collect();
    let scores: Vec<ArchitectureScore> = jobs
        .par_iter()
        .map(|&(a, kind)| {
            let est = kind.estimator();
            let rep = train(&archs[a], data, &tunings.for_kind(est), est, opts)?;
            Ok(ArchitectureScore {
                arch: archs[a].clone(),
                criterion: nn_criterion(&rep, data, kind)?,
                final_loss: rep.final_loss,
                accuracy: rep.accuracy,
                epochs: rep.epochs,
            })
        })
        .collect::<Result<_>>()?;
    let models: Vec<ScoredModel> = archs
        .iter()
        .enumerate()
        .map(|(a, arch)| ScoredModel {
            model: CandidateModel::from_mask(1 << a, &labels).expect("four architectures"),
            totals: scores
                .iter()
                .filter(|s| s.arch == *arch)
                .map(|s| (s.criterion.kind, s.criterion.total))
                .collect(),
        })
        .collect();
    let lists: Vec<RankedList> = kinds
        .iter()
        .map(|&k| RankedList::new(k, models.clone()))
        .collect();
    let consolidated = consolidate(&lists, top_k)?;
    Ok(ArchitectureSelection {
        scores,
        lists,
        consolidated,
    })
}

/// Mean squared error of `p̂` against the labels.
pub fn brier_score(params: &NetworkParams, data: &ClassificationData) -> f64 {
    let v: Vec<f64> = (0..data.n())
        .map(|i| {
            let p = run_forward(params, &data.features.row(i).transpose()).p;
            let y = f64::from(data.labels[i]);
            (p - y) * (p - y)
        })
        .collect();
    pairwise_sum(&v) / data.n() as f64
}

/// Seeded 80/20 split: `(train, holdout)` row indices.
pub fn holdout_split(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    let cut = (0.8 * n as f64).round() as usize;
    let hold = idx.split_off(cut);
    (idx, hold)
}

/// Tuning for classifiers: the triple whose network, trained on a fixed 80%
/// split, has the smallest held-out Brier score. Score matching needs a
/// response that is differentiable in `y`, which a binary label is not.
pub fn select_nn_tuning(
    data: &ClassificationData,
    arch: &ArchitectureSpec,
    grid: &TuningGrid,
    family: TuningFamily,
    opts: &TrainOptions,
) -> Result<TuningSelection> {
    let (tr_idx, ho_idx) = holdout_split(data.n(), opts.seed);
    let train_set = data.select(&tr_idx)?;
    let hold = data.select(&ho_idx)?;
    let kind = family.estimator();
    let scored = grid
        .triples(family)
        .into_par_iter()
        .map(|t| {
            let s = train(arch, &train_set, &t, kind, opts)
                .ok()
                .map(|r| brier_score(&r.params, &hold));
            (t, s)
        })
        .collect();
    pick_best(scored)
}

/// Reference triple for the classifier application.
pub fn preset_nn_tuning() -> TuningMap {
    TuningMap {
        dpd: TuningTriple::dpd(0.9).expect("static"),
        epd: TuningTriple::new(0.1, 0.7, 0.1).expect("static"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ClassificationData {
        let x = DMatrix::from_fn(30, 2, |i, j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0);
        let y = (0..30)
            .map(|i| u8::from(x[(i, 0)] + 0.3 * x[(i, 1)] > 0.0))
            .collect();
        ClassificationData::new(x, y).unwrap()
    }

    #[test]
    fn zero_network_is_even() {
        let a = ArchitectureSpec::from_label("A3", 4).unwrap();
        let p = NetworkParams::zeros(&a);
        assert_eq!(forward(&p, &DVector::from_element(4, 0.7)).unwrap(), 0.5);
        assert!(forward(&p, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn parameter_counts() {
        let g = ArchitectureSpec::grid(5);
        let counts: Vec<usize> = g.iter().map(ArchitectureSpec::n_params).collect();
        assert_eq!(counts, [18, 26, 24, 38]);
        assert_eq!(g[3].display(), "A4 (3,3)");
    }

    #[test]
    fn flatten_roundtrip() {
        let a = ArchitectureSpec::from_label("A4", 3).unwrap();
        let p = NetworkParams::init(&a, 3);
        assert_eq!(NetworkParams::from_vec(&a, &p.to_vec()).unwrap(), p);
    }

    #[test]
    fn gradient_matches_differences() {
        let d = toy();
        let t = TuningTriple::new(0.3, 0.4, 0.5).unwrap();
        for label in ["A1", "A4"] {
            let a = ArchitectureSpec::from_label(label, 2).unwrap();
            let p = NetworkParams::init(&a, 9);
            for kind in EstimatorKind::ALL {
                let g = loss_gradient(&p, &d, &t, kind).unwrap();
                let th = p.to_vec();
                for j in 0..th.len() {
                    let h = 1e-6;
                    let mut tp = th.clone();
                    tp[j] += h;
                    let up =
                        loss(&NetworkParams::from_vec(&a, &tp).unwrap(), &d, &t, kind).unwrap();
                    tp[j] -= 2.0 * h;
                    let dn =
                        loss(&NetworkParams::from_vec(&a, &tp).unwrap(), &d, &t, kind).unwrap();
                    let fd = (up - dn) / (2.0 * h);
                    assert!(
                        (fd - g[j]).abs() < 1e-6 * (1.0 + fd.abs()),
                        "{label} {kind} {j}"
                    );
                }
            }
        }
    }

    #[test]
    fn training_is_deterministic_and_descends() {
        let d = toy();
        let a = ArchitectureSpec::from_label("A2", 2).unwrap();
        let t = TuningTriple::new(0.1, 0.7, 0.1).unwrap();
        let opts = TrainOptions {
            max_epochs: 50,
            ..TrainOptions::default()
        };
        let r1 = train(&a, &d, &t, EstimatorKind::Epde, &opts).unwrap();
        let r2 = train(&a, &d, &t, EstimatorKind::Epde, &opts).unwrap();
        assert_eq!(r1.params, r2.params);
        assert!(r1.loss_trace.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn split_is_a_partition() {
        let (a, b) = holdout_split(101, 5);
        assert_eq!(a.len(), 81);
        let mut all: Vec<usize> = a.into_iter().chain(b).collect();
        all.sort_unstable();
        assert_eq!(all, (0..101).collect::<Vec<_>>());
    }
}
