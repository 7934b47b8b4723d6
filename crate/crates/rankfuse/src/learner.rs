//! Learning fusion weights from a validation dataset.
//!
//! Weights are never optimized directly. Each row is parameterized as
//! `flip(cumsum(cumsum(exp(x))))` over free parameters `x`, which makes every
//! reachable row strictly positive, strictly decreasing and strictly convex.
//! The training signal is a pairwise ranking loss: for every instance, every
//! model prediction `r-` differing from the ground truth `r+` contributes
//!
//! ```text
//! sigmoid((score(r-) - score(r+) + epsilon) / T)
//! ```
//!
//! a soft version of the misordering indicator that sharpens as the
//! temperature `T` anneals toward zero. Pairs whose relative order is the
//! same under *every* row-wise decreasing weight matrix carry no usable
//! signal and are skipped when the pair table is built. A ratio regularizer
//! keeps relative model importance from changing too rapidly across ranks.
//!
//! The fit itself is plain full-batch Adam with an exact, hand-chained
//! gradient; it is bitwise deterministic for fixed inputs and configuration,
//! with or without the `parallel` feature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::ranklist::{dataset_model_ids, EnsembleInstance, ThetaMatrix};
use std::collections::HashMap;

/// Rank sentinel for "absent from this model's list".
pub const ABSENT: u32 = u32::MAX;

/// Temperature floor for the linear annealing schedule.
const MIN_TEMPERATURE: f64 = 1e-6;

/// Unconstrained parameters, one row per model.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeParams {
    rows: Vec<Vec<f64>>,
}

impl FreeParams {
    pub fn zeros(m: usize, k_max: usize) -> Self {
        Self { rows: vec![vec![0.0; k_max]; m] }
    }

    /// Build from raw rows; entries must be finite and rows rectangular.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::InvalidArgument("free parameters must be non-empty".into()));
        }
        let k = rows[0].len();
        for row in &rows {
            if row.len() != k {
                return Err(Error::InvalidArgument("ragged free parameter rows".into()));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("non-finite free parameter".into()));
            }
        }
        Ok(Self { rows })
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn k_max(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// Annealing schedule for the learning rate and temperature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// Multiply by `decay_factor` every `decay_every` steps.
    Geometric,
    /// Anneal linearly to zero over the run; the temperature is floored at
    /// 1e-6 to keep the loss defined.
    Linear,
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr0: f64,
    pub t0: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub epsilon_margin: f64,
    pub w_reg: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub schedule_kind: ScheduleKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            lr0: 0.1,
            t0: 0.1,
            decay_factor: 0.9,
            decay_every: 25,
            epsilon_margin: 1e-4,
            w_reg: 0.2,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            schedule_kind: ScheduleKind::Geometric,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidArgument("steps must be positive".into()));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::InvalidArgument("lr0 must be positive".into()));
        }
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(Error::InvalidArgument("t0 must be positive".into()));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor < 1.0) {
            return Err(Error::InvalidArgument("decay_factor must be in (0, 1)".into()));
        }
        if self.decay_every == 0 {
            return Err(Error::InvalidArgument("decay_every must be positive".into()));
        }
        if !(self.epsilon_margin >= 0.0 && self.epsilon_margin.is_finite()) {
            return Err(Error::InvalidArgument("epsilon_margin must be non-negative".into()));
        }
        if !(self.w_reg >= 0.0 && self.w_reg.is_finite()) {
            return Err(Error::InvalidArgument("w_reg must be non-negative".into()));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(b >= 0.0 && b < 1.0) {
                return Err(Error::InvalidArgument(format!("{name} must be in [0, 1)")));
            }
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::InvalidArgument("adam_eps must be positive".into()));
        }
        Ok(())
    }

    /// Learning rate and temperature at a given (0-based) step.
    pub fn schedule(&self, step: usize) -> (f64, f64) {
        match self.schedule_kind {
            ScheduleKind::Geometric => {
                let factor = self.decay_factor.powi((step / self.decay_every) as i32);
                (self.lr0 * factor, self.t0 * factor)
            }
            ScheduleKind::Linear => {
                let frac = (1.0 - step as f64 / self.steps as f64).max(0.0);
                (self.lr0 * frac, (self.t0 * frac).max(MIN_TEMPERATURE))
            }
        }
    }
}

/// Ranks of the ground truth and of the surviving negatives for one instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstancePairs {
    /// Rank of the ground truth per model ([`ABSENT`] when missing).
    pub pos_ranks: Vec<u32>,
    /// Per surviving negative: its rank per model.
    pub neg_ranks: Vec<Vec<u32>>,
}

/// The validation set mapped to rank tensors, dominance-filtered.
#[derive(Debug, Clone)]
pub struct PairTable {
    m: usize,
    k_max: usize,
    instances: Vec<InstancePairs>,
}

impl PairTable {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn instances(&self) -> &[InstancePairs] {
        &self.instances
    }

    pub fn n_instances(&self) -> usize {
        self.instances.len()
    }

    pub fn n_pairs(&self) -> usize {
        self.instances.iter().map(|i| i.neg_ranks.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

/// True when the pair's relative order is fixed for every valid weight
/// matrix: one side ranks at least as high as the other in all models.
pub fn pair_is_dominated(pos_ranks: &[u32], neg_ranks: &[u32]) -> bool {
    let pos_better = pos_ranks.iter().zip(neg_ranks).all(|(p, n)| p <= n);
    let neg_better = pos_ranks.iter().zip(neg_ranks).all(|(p, n)| p >= n);
    pos_better || neg_better
}

/// Map each (instance, negative) pair into rank vectors, skipping pairs whose
/// ordering cannot change and dropping instances left with no pairs.
pub fn build_pair_table(dataset: &[EnsembleInstance], k_max: usize) -> Result<PairTable> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be positive".into()));
    }
    let model_ids = dataset_model_ids(dataset)?;
    let m = model_ids.len();

    let chunks = exec::map_chunks(dataset, exec::CHUNK, |chunk| {
        chunk.iter().filter_map(|inst| instance_pairs(inst, m, k_max)).collect::<Vec<_>>()
    });
    let instances: Vec<InstancePairs> = chunks.into_iter().flatten().collect();
    Ok(PairTable { m, k_max, instances })
}

fn instance_pairs(inst: &EnsembleInstance, m: usize, k_max: usize) -> Option<InstancePairs> {
    let gt = inst.ground_truth.as_str();
    let rank_maps: Vec<HashMap<&str, u32>> = inst
        .outputs
        .iter()
        .map(|out| {
            let limit = out.predictions.len().min(k_max);
            out.predictions[..limit]
                .iter()
                .enumerate()
                .map(|(pos, key)| (key.as_str(), (pos + 1) as u32))
                .collect()
        })
        .collect();

    let pos_ranks: Vec<u32> =
        rank_maps.iter().map(|map| map.get(gt).copied().unwrap_or(ABSENT)).collect();

    let mut seen: std::collections::HashSet<&str> = std::collections::HashSet::new();
    let mut neg_ranks = Vec::new();
    for out in &inst.outputs {
        let limit = out.predictions.len().min(k_max);
        for key in &out.predictions[..limit] {
            let key = key.as_str();
            if key == gt || !seen.insert(key) {
                continue;
            }
            let ranks: Vec<u32> =
                (0..m).map(|j| rank_maps[j].get(key).copied().unwrap_or(ABSENT)).collect();
            if !pair_is_dominated(&pos_ranks, &ranks) {
                neg_ranks.push(ranks);
            }
        }
    }

    if neg_ranks.is_empty() {
        None
    } else {
        Some(InstancePairs { pos_ranks, neg_ranks })
    }
}

/// Constrain free parameters to a valid weight matrix:
/// `theta_i = flip(cumsum(cumsum(exp(x_i))))` per row.
///
/// Total and smooth in `x`; every output row is strictly positive, strictly
/// decreasing and strictly convex.
pub fn param_to_theta(x: &FreeParams, model_ids: &[String]) -> ThetaMatrix {
    assert_eq!(model_ids.len(), x.m(), "one model id per parameter row");
    let rows = theta_rows(x.rows());
    ThetaMatrix::from_parts_unchecked(model_ids.to_vec(), x.k_max(), rows)
}

fn theta_rows(x_rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    x_rows
        .iter()
        .map(|row| {
            let mut buf: Vec<f64> = row.iter().map(|v| v.exp()).collect();
            let mut acc = 0.0;
            for v in buf.iter_mut() {
                acc += *v;
                *v = acc;
            }
            let mut acc = 0.0;
            for v in buf.iter_mut() {
                acc += *v;
                *v = acc;
            }
            buf.reverse();
            buf
        })
        .collect()
}

/// Adjoint of [`theta_rows`]: pull a gradient w.r.t. theta back to `x`.
fn pull_back(x_rows: &[Vec<f64>], grad_theta: &[Vec<f64>]) -> Vec<Vec<f64>> {
    x_rows
        .iter()
        .zip(grad_theta)
        .map(|(x_row, g_row)| {
            // flip adjoint, then two reverse-cumsum (suffix sum) adjoints,
            // then the exp factor.
            let mut g: Vec<f64> = g_row.iter().rev().copied().collect();
            suffix_sum_in_place(&mut g);
            suffix_sum_in_place(&mut g);
            for (gv, xv) in g.iter_mut().zip(x_row) {
                *gv *= xv.exp();
            }
            g
        })
        .collect()
}

fn suffix_sum_in_place(values: &mut [f64]) {
    let mut acc = 0.0;
    for v in values.iter_mut().rev() {
        acc += *v;
        *v = acc;
    }
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Subgradient convention: sign(0) = 0.
fn sign(u: f64) -> f64 {
    if u > 0.0 {
        1.0
    } else if u < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn score_of(rows: &[Vec<f64>], ranks: &[u32]) -> f64 {
    let mut s = 0.0;
    for (row, &r) in rows.iter().zip(ranks) {
        if r != ABSENT {
            s += row[(r - 1) as usize];
        }
    }
    s
}

fn check_theta_table(m: usize, k_max: usize, table: &PairTable) -> Result<()> {
    if m != table.m || k_max != table.k_max {
        return Err(Error::InvalidArgument(format!(
            "theta is {m}x{k_max} but the pair table was built for {}x{}",
            table.m, table.k_max
        )));
    }
    Ok(())
}

/// Mean over instances of the summed per-pair sigmoid losses.
pub fn rank_loss(theta: &ThetaMatrix, table: &PairTable, temperature: f64, epsilon_margin: f64) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidArgument("temperature must be positive".into()));
    }
    check_theta_table(theta.n_models(), theta.k_max(), table)?;
    if table.is_empty() {
        return Ok(0.0);
    }
    let rows = theta.rows();
    let inv_t = 1.0 / temperature;
    let partials = exec::map_chunks(table.instances(), exec::CHUNK, |chunk| {
        let mut sum = 0.0;
        for inst in chunk {
            let pos = score_of(rows, &inst.pos_ranks);
            for neg in &inst.neg_ranks {
                sum += sigmoid((score_of(rows, neg) - pos + epsilon_margin) * inv_t);
            }
        }
        sum
    });
    Ok(partials.iter().sum::<f64>() / table.n_instances() as f64)
}

/// Mean absolute rank-to-rank change of the pairwise row ratios.
///
/// Zero when all rows are proportional; zero by definition for one model or
/// `k_max == 1`.
pub fn reg_loss(theta: &ThetaMatrix) -> f64 {
    reg_loss_rows(theta.rows())
}

fn reg_loss_rows(rows: &[Vec<f64>]) -> f64 {
    let m = rows.len();
    if m < 2 {
        return 0.0;
    }
    let k_max = rows[0].len();
    if k_max < 2 {
        return 0.0;
    }
    let pair_norm = 1.0 / (m * (m - 1)) as f64;
    let rank_norm = 1.0 / (k_max - 1) as f64;
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            for k in 0..k_max - 1 {
                total += (rows[i][k] / rows[j][k] - rows[i][k + 1] / rows[j][k + 1]).abs();
            }
        }
    }
    pair_norm * rank_norm * total
}

/// Gradient of [`reg_loss`] w.r.t. theta, accumulated into `grad`.
fn reg_loss_grad_rows(rows: &[Vec<f64>], weight: f64, grad: &mut [Vec<f64>]) -> f64 {
    let m = rows.len();
    if m < 2 {
        return 0.0;
    }
    let k_max = rows[0].len();
    if k_max < 2 {
        return 0.0;
    }
    let norm = weight / ((m * (m - 1)) as f64 * (k_max - 1) as f64);
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            for k in 0..k_max - 1 {
                let diff = rows[i][k] / rows[j][k] - rows[i][k + 1] / rows[j][k + 1];
                total += diff.abs();
                let s = norm * sign(diff);
                if s != 0.0 {
                    grad[i][k] += s / rows[j][k];
                    grad[j][k] -= s * rows[i][k] / (rows[j][k] * rows[j][k]);
                    grad[i][k + 1] -= s / rows[j][k + 1];
                    grad[j][k + 1] += s * rows[i][k + 1] / (rows[j][k + 1] * rows[j][k + 1]);
                }
            }
        }
    }
    norm * total
}

/// Full training loss at `x` and its exact gradient w.r.t. `x`.
///
/// The loss is `rank_loss(param_to_theta(x)) + w_reg * reg_loss(...)`; the
/// gradient chains through the constraining parameterization.
pub fn total_loss_grad(
    x: &FreeParams,
    table: &PairTable,
    cfg: &TrainConfig,
    temperature: f64,
) -> Result<(f64, Vec<Vec<f64>>)> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidArgument("temperature must be positive".into()));
    }
    check_theta_table(x.m(), x.k_max(), table)?;

    let m = x.m();
    let k_max = x.k_max();
    let rows = theta_rows(x.rows());
    let mut grad_theta = vec![vec![0.0; k_max]; m];
    let mut loss = 0.0;

    if !table.is_empty() {
        let inv_t = 1.0 / temperature;
        let inv_n = 1.0 / table.n_instances() as f64;
        let eps = cfg.epsilon_margin;
        let rows_ref = &rows;
        let partials = exec::map_chunks(table.instances(), exec::CHUNK, move |chunk| {
            let mut sum = 0.0;
            let mut grad = vec![vec![0.0; k_max]; m];
            for inst in chunk {
                let pos = score_of(rows_ref, &inst.pos_ranks);
                for neg in &inst.neg_ranks {
                    let s = sigmoid((score_of(rows_ref, neg) - pos + eps) * inv_t);
                    sum += s;
                    let w = s * (1.0 - s) * inv_t;
                    for (i, &r) in neg.iter().enumerate() {
                        if r != ABSENT {
                            grad[i][(r - 1) as usize] += w;
                        }
                    }
                    for (i, &r) in inst.pos_ranks.iter().enumerate() {
                        if r != ABSENT {
                            grad[i][(r - 1) as usize] -= w;
                        }
                    }
                }
            }
            (sum, grad)
        });
        for (sum, grad) in partials {
            loss += sum;
            for (acc, part) in grad_theta.iter_mut().zip(grad) {
                for (a, p) in acc.iter_mut().zip(part) {
                    *a += p;
                }
            }
        }
        loss *= inv_n;
        for row in grad_theta.iter_mut() {
            for g in row.iter_mut() {
                *g *= inv_n;
            }
        }
    }

    if cfg.w_reg > 0.0 {
        // Returns the already-weighted regularizer value.
        loss += reg_loss_grad_rows(&rows, cfg.w_reg, &mut grad_theta);
    }

    Ok((loss, pull_back(x.rows(), &grad_theta)))
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub lr: f64,
    pub temperature: f64,
    pub loss: f64,
}

/// Result of a fit, including the per-step log.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub theta: ThetaMatrix,
    pub log: Vec<StepRecord>,
    /// True when the dominance filter removed every pair, in which case
    /// `theta` is the (constrained) initialization, unchanged.
    pub degenerate: bool,
}

/// Fit fusion weights on a validation dataset with full-batch Adam.
///
/// Deterministic given `(dataset, k_max, cfg, init)`; no batching, no
/// randomness. When `init` is `None` the free parameters start at zero.
pub fn fit(
    dataset: &[EnsembleInstance],
    k_max: usize,
    cfg: &TrainConfig,
    init: Option<FreeParams>,
) -> Result<FitOutcome> {
    cfg.validate()?;
    let model_ids = dataset_model_ids(dataset)?;
    let m = model_ids.len();
    let table = build_pair_table(dataset, k_max)?;

    let mut x = match init {
        Some(x0) => {
            if x0.m() != m || x0.k_max() != k_max {
                return Err(Error::InvalidArgument(format!(
                    "init is {}x{} but the dataset needs {m}x{k_max}",
                    x0.m(),
                    x0.k_max()
                )));
            }
            x0
        }
        None => FreeParams::zeros(m, k_max),
    };

    if table.is_empty() {
        return Ok(FitOutcome {
            theta: param_to_theta(&x, &model_ids),
            log: Vec::new(),
            degenerate: true,
        });
    }

    let mut log = Vec::with_capacity(cfg.steps + 1);
    let mut moment1 = vec![vec![0.0; k_max]; m];
    let mut moment2 = vec![vec![0.0; k_max]; m];

    for step in 0..cfg.steps {
        let (lr, temperature) = cfg.schedule(step);
        let (loss, grad) = total_loss_grad(&x, &table, cfg, temperature)?;
        log.push(StepRecord { step, lr, temperature, loss });

        let t = (step + 1) as i32;
        let bias1 = 1.0 - cfg.adam_beta1.powi(t);
        let bias2 = 1.0 - cfg.adam_beta2.powi(t);
        for i in 0..m {
            for k in 0..k_max {
                let g = grad[i][k];
                let m1 = &mut moment1[i][k];
                let m2 = &mut moment2[i][k];
                *m1 = cfg.adam_beta1 * *m1 + (1.0 - cfg.adam_beta1) * g;
                *m2 = cfg.adam_beta2 * *m2 + (1.0 - cfg.adam_beta2) * g * g;
                let m_hat = *m1 / bias1;
                let v_hat = *m2 / bias2;
                x.rows[i][k] -= lr * m_hat / (v_hat.sqrt() + cfg.adam_eps);
            }
        }
    }

    let (lr, temperature) = cfg.schedule(cfg.steps);
    let (final_loss, _) = total_loss_grad(&x, &table, cfg, temperature)?;
    log.push(StepRecord { step: cfg.steps, lr, temperature, loss: final_loss });

    Ok(FitOutcome { theta: param_to_theta(&x, &model_ids), log, degenerate: false })
}
