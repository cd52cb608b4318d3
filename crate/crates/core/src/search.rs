//! Scorer-guided beam search over candidate plans.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::enumerate::{candidate_plans, Constraints, EnumerateError};
use crate::kb::KnowledgeBase;
use crate::plan::{GoldDecomposition, Plan, PlanError};
use crate::scorer::{check_scores, ScoreError, Scorer};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("no initial plans")]
    EmptyInitialPlans,
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Enumerate(#[from] EnumerateError),
    #[error("scorer failed: {0}")]
    Scorer(#[from] ScoreError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub beam_size: usize,
    pub max_steps: usize,
    pub constraints: Constraints,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { beam_size: 5, max_steps: 10, constraints: Constraints::default() }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.beam_size == 0 {
            return Err(SearchError::InvalidConfig("beam size must be at least 1".into()));
        }
        if self.max_steps == 0 {
            return Err(SearchError::InvalidConfig("max steps must be at least 1".into()));
        }
        self.constraints.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPlan {
    pub plan: Plan,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: usize,
    /// Every candidate of the step, in canonical order.
    pub candidates: Vec<ScoredPlan>,
    /// The kept beam, best first.
    pub beam: Vec<ScoredPlan>,
    pub best_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The step's best score fell below the previous step's.
    ScoreDecreased,
    /// Enumeration produced no candidates.
    NoCandidates,
    /// The step limit was reached.
    MaxSteps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestPlan {
    pub plan: Plan,
    pub score: f64,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub utterance: String,
    pub steps: Vec<StepTrace>,
    /// Highest-scoring plan over all beams; `None` when step 1 had no candidates.
    pub best: Option<BestPlan>,
    /// The last step executed.
    pub termination_step: usize,
    pub termination: Termination,
}

impl SearchTrace {
    pub fn best_plan(&self) -> Option<&Plan> {
        self.best.as_ref().map(|b| &b.plan)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }
}

/// Search stops once the best score strictly drops; equal scores continue.
pub fn check_termination(prev_best: f64, curr_best: f64) -> bool {
    curr_best < prev_best
}

/// Keep the `k` best of `scored`: higher score first, ties by canonical string.
pub fn top_k(mut scored: Vec<(ScoredPlan, String)>, k: usize) -> Vec<ScoredPlan> {
    scored.sort_by(|(a, ra), (b, rb)| b.score.total_cmp(&a.score).then_with(|| ra.cmp(rb)));
    scored.truncate(k);
    scored.into_iter().map(|(s, _)| s).collect()
}

pub fn search(
    kb: &KnowledgeBase,
    utterance: &str,
    initial_plans: &[Plan],
    scorer: &dyn Scorer,
    config: &SearchConfig,
) -> Result<SearchTrace, SearchError> {
    config.validate()?;
    if initial_plans.is_empty() {
        return Err(SearchError::EmptyInitialPlans);
    }
    let mut beam: Vec<Plan> = initial_plans.to_vec();
    let mut steps: Vec<StepTrace> = Vec::new();
    let mut best: Option<BestPlan> = None;
    let mut termination = Termination::MaxSteps;

    for t in 1..=config.max_steps {
        let candidates = candidate_plans(kb, &beam, &config.constraints)?;
        if candidates.is_empty() {
            termination = Termination::NoCandidates;
            break;
        }
        let scores = scorer.score(utterance, &candidates)?;
        check_scores(&scores, candidates.len())?;
        let scored: Vec<ScoredPlan> =
            candidates.into_iter().zip(scores).map(|(plan, score)| ScoredPlan { plan, score }).collect();
        let kept = top_k(scored.iter().map(|s| (s.clone(), s.plan.render())).collect(), config.beam_size);
        let step_best = kept[0].score;
        if best.as_ref().is_none_or(|b| step_best > b.score) {
            best = Some(BestPlan { plan: kept[0].plan.clone(), score: step_best, step: t });
        }
        let prev_best = steps.last().map(|s| s.best_score);
        beam = kept.iter().map(|s| s.plan.clone()).collect();
        steps.push(StepTrace { step: t, candidates: scored, beam: kept, best_score: step_best });
        if prev_best.is_some_and(|prev| check_termination(prev, step_best)) {
            termination = Termination::ScoreDecreased;
            break;
        }
    }
    let termination_step = match termination {
        Termination::NoCandidates => steps.len() + 1,
        _ => steps.len(),
    };
    Ok(SearchTrace { utterance: utterance.to_string(), steps, best, termination_step, termination })
}

/// Reference scorer that knows the gold plan: one point per distinct gold
/// sub-plan contained in the candidate, minus one per function application
/// that is not part of the gold plan.
#[derive(Debug, Clone)]
pub struct OracleScorer {
    gold: BTreeSet<String>,
}

impl OracleScorer {
    pub fn new(gold: &Plan) -> Result<Self, PlanError> {
        let decomposition = GoldDecomposition::derive(gold)?;
        Ok(Self { gold: decomposition.renders_up_to(decomposition.len()) })
    }

    pub fn score_plan(&self, plan: &Plan) -> f64 {
        let mut matched = BTreeSet::new();
        let mut extra = 0usize;
        for sub in plan.subplans().into_iter().filter(|p| !p.is_leaf()) {
            let r = sub.render();
            if self.gold.contains(&r) {
                matched.insert(r);
            } else {
                extra += 1;
            }
        }
        matched.len() as f64 - extra as f64
    }
}

impl Scorer for OracleScorer {
    fn score(&self, _utterance: &str, candidates: &[Plan]) -> Result<Vec<f64>, ScoreError> {
        Ok(candidates.iter().map(|c| self.score_plan(c)).collect())
    }
}
