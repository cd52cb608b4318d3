//! Listwise training of the linear ranking model with teacher-forced beams.
//!
//! At step `t` the pool is `C_t ∪ G_{t-1}`: the candidates plus the gold
//! sub-plans one step shorter. Every gold sub-plan of length `t` is a
//! positive. The beam passed to step `t+1` is the model's top-K of `C_t`
//! plus all gold sub-plans of length `<= t`. Steps run for `t = 1..=T+1`
//! with `G_{T+1} = G_T`, so the model also learns to prefer the finished
//! plan over its extensions. The loss is the summed negative
//! log-likelihood of the positives divided by the total pool size.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::enumerate::{candidate_plans, Constraints, EnumerateError};
use crate::eval::DatasetExample;
use crate::kb::KnowledgeBase;
use crate::plan::{GoldDecomposition, Plan, PlanError};
use crate::scorer::{FeatureVector, RankingModel, ScoreError, Utterance, FEATURE_DIM};
use crate::search::{top_k, ScoredPlan};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("example `{qid}` has no gold plan")]
    MissingGold { qid: String },
    #[error("gold sub-plan `{plan}` of `{qid}` is not among the step-{step} candidates")]
    GoldNotReproducible { qid: String, step: usize, plan: String },
    #[error("invalid gold plan for `{qid}`: {source}")]
    Gold { qid: String, source: PlanError },
    #[error(transparent)]
    Enumerate(#[from] EnumerateError),
    #[error(transparent)]
    Model(#[from] ScoreError),
    #[error("loss became non-finite in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("no trainable examples")]
    NoExamples,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2_penalty: f64,
    pub rng_seed: u64,
    pub beam_size: usize,
    /// Examples per update; `None` uses the whole dataset (deterministic
    /// full-batch gradient descent).
    pub batch_size: Option<usize>,
    pub constraints: Constraints,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 20.0,
            epochs: 50,
            l2_penalty: 0.0,
            rng_seed: 0,
            beam_size: 5,
            batch_size: None,
            constraints: Constraints::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning rate must be finite and non-negative");
        }
        if !(self.l2_penalty.is_finite() && self.l2_penalty >= 0.0) {
            return bad("l2 penalty must be finite and non-negative");
        }
        if self.beam_size == 0 {
            return bad("beam size must be at least 1");
        }
        if self.batch_size == Some(0) {
            return bad("batch size must be at least 1");
        }
        self.constraints.validate()?;
        Ok(())
    }
}

/// One scored pool: feature rows and the indices of the positives.
#[derive(Debug, Clone, PartialEq)]
pub struct Pool {
    pub step: usize,
    pub plans: Vec<Plan>,
    pub features: Vec<FeatureVector>,
    pub gold: Vec<usize>,
}

/// Loss and gradient of one example.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub loss: f64,
    pub gradient: Vec<f64>,
    /// Total pool size, the loss normalizer.
    pub pool_size: usize,
    pub pools: Vec<Pool>,
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Summed negative log-likelihood of the positives of each `(scores, gold)`
/// pool, divided by the total number of pool items.
pub fn listwise_loss(pools: &[(Vec<f64>, Vec<usize>)]) -> f64 {
    let mut total = 0.0;
    let mut z = 0usize;
    for (scores, gold) in pools {
        let lse = log_sum_exp(scores);
        total += gold.iter().map(|&g| lse - scores[g]).sum::<f64>();
        z += scores.len();
    }
    if z == 0 {
        0.0
    } else {
        total / z as f64
    }
}

/// Loss and gradient of the model on precomputed pools.
pub fn pool_loss_and_gradient(model: &RankingModel, pools: &[Pool]) -> (f64, Vec<f64>) {
    let mut loss = 0.0;
    let mut grad = vec![0.0; FEATURE_DIM];
    let mut z = 0usize;
    for pool in pools {
        let scores: Vec<f64> = pool.features.iter().map(|f| model.dot(f)).collect();
        let lse = log_sum_exp(&scores);
        let mut expected = [0.0; FEATURE_DIM];
        for (f, s) in pool.features.iter().zip(&scores) {
            let prob = (s - lse).exp();
            for (e, x) in expected.iter_mut().zip(f.as_slice()) {
                *e += prob * x;
            }
        }
        for &g in &pool.gold {
            loss += lse - scores[g];
            for ((acc, e), x) in grad.iter_mut().zip(&expected).zip(pool.features[g].as_slice()) {
                *acc += e - x;
            }
        }
        z += pool.plans.len();
    }
    if z > 0 {
        loss /= z as f64;
        grad.iter_mut().for_each(|g| *g /= z as f64);
    }
    (loss, grad)
}

/// Build the teacher-forced pools of one example under `model`.
pub fn build_pools(
    kb: &KnowledgeBase,
    example: &DatasetExample,
    model: &RankingModel,
    config: &TrainConfig,
) -> Result<Vec<Pool>, TrainError> {
    let qid = &example.qid;
    let target = example.gold_plan.as_ref().ok_or_else(|| TrainError::MissingGold { qid: qid.clone() })?;
    let gold = GoldDecomposition::derive(target).map_err(|source| TrainError::Gold { qid: qid.clone(), source })?;
    let utterance = Utterance::new(&example.utterance);
    let t_max = gold.len();
    let mut beam = example.initial_plans();
    let mut pools = Vec::new();

    for t in 1..=t_max + 1 {
        let candidates = candidate_plans(kb, &beam, &config.constraints)?;
        let positives = gold.step(t.min(t_max));
        let renders: BTreeMap<String, usize> =
            candidates.iter().enumerate().map(|(i, c)| (c.render(), i)).collect();
        if t <= t_max {
            if let Some(missing) = positives.iter().find(|g| !renders.contains_key(&g.render())) {
                return Err(TrainError::GoldNotReproducible { qid: qid.clone(), step: t, plan: missing.render() });
            }
        }
        let features: Vec<FeatureVector> = candidates.iter().map(|c| utterance.featurize(c)).collect();

        if !positives.is_empty() {
            let mut plans = candidates.clone();
            let mut pool_features = features.clone();
            let mut index = renders.clone();
            for g in gold.step(t - 1) {
                let r = g.render();
                if !index.contains_key(&r) {
                    index.insert(r, plans.len());
                    pool_features.push(utterance.featurize(g));
                    plans.push(g.clone());
                }
            }
            let gold_idx = positives.iter().map(|g| index[&g.render()]).collect();
            pools.push(Pool { step: t, plans, features: pool_features, gold: gold_idx });
        }

        if t == t_max + 1 {
            break;
        }
        let scored = candidates
            .iter()
            .zip(&features)
            .map(|(c, f)| (ScoredPlan { plan: c.clone(), score: model.dot(f) }, c.render()))
            .collect();
        let mut next: Vec<Plan> = top_k(scored, config.beam_size).into_iter().map(|s| s.plan).collect();
        let have: BTreeSet<String> = next.iter().map(Plan::render).collect();
        next.extend(gold.up_to(t).filter(|g| !have.contains(&g.render())).cloned());
        beam = next;
    }
    Ok(pools)
}

/// Loss and gradient of one example.
pub fn training_step(
    kb: &KnowledgeBase,
    example: &DatasetExample,
    model: &RankingModel,
    config: &TrainConfig,
) -> Result<StepOutcome, TrainError> {
    model.validate()?;
    let pools = build_pools(kb, example, model, config)?;
    let (loss, gradient) = pool_loss_and_gradient(model, &pools);
    let pool_size = pools.iter().map(|p| p.plans.len()).sum();
    Ok(StepOutcome { loss, gradient, pool_size, pools })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedExample {
    pub qid: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub model: RankingModel,
    /// Full-batch mode: objective (mean loss plus L2 term) at the zero start.
    /// `NaN` in mini-batch mode.
    pub initial_loss: f64,
    /// Full-batch mode: objective after each epoch's update. Mini-batch
    /// mode: mean loss over the epoch's batches.
    pub epoch_losses: Vec<f64>,
    pub skipped: Vec<SkippedExample>,
    pub trained_examples: usize,
}

impl TrainReport {
    pub fn loss_csv(&self) -> String {
        let mut out = String::from("epoch,loss\n");
        for (i, l) in self.epoch_losses.iter().enumerate() {
            out.push_str(&format!("{},{l}\n", i + 1));
        }
        out
    }
}

/// Train from zero weights. Examples whose gold plan the enumerator cannot
/// reproduce are skipped and reported.
pub fn train(
    kb: &KnowledgeBase,
    dataset: &[DatasetExample],
    config: &TrainConfig,
) -> Result<TrainReport, TrainError> {
    train_with_progress(kb, dataset, config, |_, _| {})
}

/// [`train`] with a callback receiving `(epoch, mean loss)` after each epoch.
pub fn train_with_progress(
    kb: &KnowledgeBase,
    dataset: &[DatasetExample],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainReport, TrainError> {
    config.validate()?;
    let mut model = RankingModel::zeros();
    let mut skipped = Vec::new();
    let mut active: Vec<&DatasetExample> = Vec::new();
    for ex in dataset {
        match build_pools(kb, ex, &model, config) {
            Ok(_) => active.push(ex),
            Err(e @ (TrainError::GoldNotReproducible { .. } | TrainError::MissingGold { .. } | TrainError::Gold { .. })) => {
                skipped.push(SkippedExample { qid: ex.qid.clone(), reason: e.to_string() })
            }
            Err(e) => return Err(e),
        }
    }
    if active.is_empty() {
        return Err(TrainError::NoExamples);
    }
    let mut initial_loss = f64::NAN;
    let epoch_losses = match config.batch_size {
        None => full_batch(kb, &mut active, config, &mut model, &mut skipped, &mut initial_loss, &mut on_epoch)?,
        Some(b) => mini_batch(kb, &mut active, config, b, &mut model, &mut skipped, &mut on_epoch)?,
    };
    Ok(TrainReport { model, initial_loss, epoch_losses, skipped, trained_examples: active.len() })
}

/// Step halvings tried before an epoch keeps its weights unchanged.
const MAX_HALVINGS: usize = 30;

struct BatchEval {
    loss: f64,
    gradient: Vec<f64>,
    failed: Vec<SkippedExample>,
}

fn batch_eval(
    kb: &KnowledgeBase,
    examples: &[&DatasetExample],
    model: &RankingModel,
    config: &TrainConfig,
) -> Result<BatchEval, TrainError> {
    let outcomes: Vec<Result<StepOutcome, TrainError>> =
        examples.par_iter().map(|ex| training_step(kb, ex, model, config)).collect();
    let mut loss = 0.0;
    let mut gradient = vec![0.0; FEATURE_DIM];
    let mut n = 0usize;
    let mut failed = Vec::new();
    for (ex, outcome) in examples.iter().zip(outcomes) {
        match outcome {
            Ok(o) => {
                loss += o.loss;
                n += 1;
                gradient.iter_mut().zip(&o.gradient).for_each(|(g, x)| *g += x);
            }
            Err(e @ TrainError::GoldNotReproducible { .. }) => {
                failed.push(SkippedExample { qid: ex.qid.clone(), reason: e.to_string() })
            }
            Err(e) => return Err(e),
        }
    }
    if n > 0 {
        loss /= n as f64;
        gradient.iter_mut().for_each(|g| *g /= n as f64);
    }
    Ok(BatchEval { loss, gradient, failed })
}

fn penalized(loss: f64, model: &RankingModel, l2: f64) -> f64 {
    loss + 0.5 * l2 * model.weights.iter().map(|w| w * w).sum::<f64>()
}

fn drop_failed(active: &mut Vec<&DatasetExample>, skipped: &mut Vec<SkippedExample>, failed: Vec<SkippedExample>) {
    active.retain(|e| !failed.iter().any(|f| f.qid == e.qid));
    skipped.extend(failed);
}

/// Gradient descent on the whole dataset with step halving. After the first
/// update a step is accepted only if the objective does not increase, so
/// the per-epoch losses never go up. The all-zero start is exempt: every
/// score ties there and beams follow canonical order, so its loss is not
/// comparable with any trained point.
fn full_batch(
    kb: &KnowledgeBase,
    active: &mut Vec<&DatasetExample>,
    config: &TrainConfig,
    model: &mut RankingModel,
    skipped: &mut Vec<SkippedExample>,
    initial_loss: &mut f64,
    on_epoch: &mut impl FnMut(usize, f64),
) -> Result<Vec<f64>, TrainError> {
    let mut losses = Vec::with_capacity(config.epochs);
    let mut current = batch_eval(kb, active, model, config)?;
    while !current.failed.is_empty() {
        drop_failed(active, skipped, std::mem::take(&mut current.failed));
        current = batch_eval(kb, active, model, config)?;
    }
    *initial_loss = penalized(current.loss, model, config.l2_penalty);
    let mut stalled = false;
    for epoch in 1..=config.epochs {
        if active.is_empty() {
            return Err(TrainError::NoExamples);
        }
        let objective = penalized(current.loss, model, config.l2_penalty);
        let mut step = config.learning_rate;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            if stalled {
                break;
            }
            let trial = RankingModel::from_weights(
                model
                    .weights
                    .iter()
                    .zip(&current.gradient)
                    .map(|(w, g)| w - step * (g + config.l2_penalty * w))
                    .collect(),
            );
            let eval = batch_eval(kb, active, &trial, config)?;
            if !eval.failed.is_empty() {
                drop_failed(active, skipped, eval.failed);
                current = batch_eval(kb, active, model, config)?;
                break;
            }
            if epoch == 1 || penalized(eval.loss, &trial, config.l2_penalty) <= objective {
                *model = trial;
                current = eval;
                accepted = true;
                break;
            }
            step /= 2.0;
        }
        // Nothing changes once every step size is rejected.
        stalled = stalled || !accepted;
        let after = penalized(current.loss, model, config.l2_penalty);
        if !after.is_finite() {
            return Err(TrainError::NonFiniteLoss { epoch });
        }
        on_epoch(epoch, after);
        losses.push(after);
    }
    Ok(losses)
}

/// Shuffled mini-batch gradient descent with a fixed step.
fn mini_batch(
    kb: &KnowledgeBase,
    active: &mut Vec<&DatasetExample>,
    config: &TrainConfig,
    batch: usize,
    model: &mut RankingModel,
    skipped: &mut Vec<SkippedExample>,
    on_epoch: &mut impl FnMut(usize, f64),
) -> Result<Vec<f64>, TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut losses = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let mut order = active.clone();
        order.shuffle(&mut rng);
        let (mut total, mut counted) = (0.0, 0usize);
        for chunk in order.chunks(batch) {
            let eval = batch_eval(kb, chunk, model, config)?;
            let n = chunk.len() - eval.failed.len();
            drop_failed(active, skipped, eval.failed);
            if n == 0 {
                continue;
            }
            total += eval.loss * n as f64;
            counted += n;
            for (w, g) in model.weights.iter_mut().zip(&eval.gradient) {
                *w -= config.learning_rate * (g + config.l2_penalty * *w);
            }
        }
        let mean = if counted == 0 { 0.0 } else { total / counted as f64 };
        if !mean.is_finite() || model.weights.iter().any(|w| !w.is_finite()) {
            return Err(TrainError::NonFiniteLoss { epoch });
        }
        on_epoch(epoch, mean);
        losses.push(mean);
    }
    Ok(losses)
}
