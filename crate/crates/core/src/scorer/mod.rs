//! Plausibility scoring `S(utterance, plan) -> f64`.
//!
//! Three implementations sit behind [`Scorer`]: a deterministic lexical
//! baseline, a trainable linear model over [`features`], and a client for
//! remote scoring services speaking the `/score` JSON protocol.

pub mod features;
pub mod mock;
pub mod remote;
pub mod retrieval;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plan::Plan;
pub use features::{featurize, lexical_score, tokenize_schema, FeatureVector, Utterance, FEATURE_DIM, FEATURE_VERSION};
pub use remote::{RemoteScorer, RetryPolicy};
pub use retrieval::{build_prompt, select_in_context_examples, InContextExample, PROMPT_INSTRUCTION};

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("model has {found} weights, features have {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("model feature version `{found}` does not match `{expected}`")]
    FeatureVersion { expected: String, found: String },
    #[error("model weights must be finite")]
    NonFiniteWeight,
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: usize, message: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("scorer returned a non-finite score for candidate {index}")]
    NonFiniteScore { index: usize },
    #[error("invalid score request: {0}")]
    InvalidRequest(String),
    #[error("example pool is empty")]
    EmptyPool,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("cannot read model {path}: {message}")]
    ModelIo { path: String, message: String },
}

/// Scores a batch of candidates for one utterance. Implementations must be
/// deterministic and return exactly one finite score per candidate.
pub trait Scorer: Send + Sync {
    fn score(&self, utterance: &str, candidates: &[Plan]) -> Result<Vec<f64>, ScoreError>;
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn score(&self, utterance: &str, candidates: &[Plan]) -> Result<Vec<f64>, ScoreError> {
        (**self).score(utterance, candidates)
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn score(&self, utterance: &str, candidates: &[Plan]) -> Result<Vec<f64>, ScoreError> {
        (**self).score(utterance, candidates)
    }
}

/// Wire-level request: canonical plan strings plus optional demonstrations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub utterance: String,
    pub candidates: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub examples: Option<Vec<InContextExample>>,
}

impl ScoreRequest {
    pub fn new(utterance: &str, candidates: &[Plan], examples: Option<Vec<InContextExample>>) -> Result<Self, ScoreError> {
        let req = Self {
            utterance: utterance.to_string(),
            candidates: candidates.iter().map(Plan::render).collect(),
            examples,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<(), ScoreError> {
        if self.candidates.is_empty() {
            return Err(ScoreError::InvalidRequest("no candidates".into()));
        }
        let mut seen = BTreeSet::new();
        for c in &self.candidates {
            if !seen.insert(c) {
                return Err(ScoreError::InvalidRequest(format!("duplicate candidate `{c}`")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub scores: Vec<f64>,
}

/// Checks one finite score per candidate.
pub(crate) fn check_scores(scores: &[f64], expected: usize) -> Result<(), ScoreError> {
    if scores.len() != expected {
        return Err(ScoreError::Protocol(format!("expected {expected} scores, got {}", scores.len())));
    }
    if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
        return Err(ScoreError::NonFiniteScore { index });
    }
    Ok(())
}

/// Token-recall baseline, see [`features::lexical_score`].
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalScorer;

impl Scorer for LexicalScorer {
    fn score(&self, utterance: &str, candidates: &[Plan]) -> Result<Vec<f64>, ScoreError> {
        let u = Utterance::new(utterance);
        Ok(candidates.iter().map(|c| features::lexical_score_with(&u, c)).collect())
    }
}

/// Weights of the linear ranking scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingModel {
    pub feature_version: String,
    pub weights: Vec<f64>,
}

impl Default for RankingModel {
    fn default() -> Self {
        Self::zeros()
    }
}

impl RankingModel {
    pub fn zeros() -> Self {
        Self { feature_version: FEATURE_VERSION.to_string(), weights: vec![0.0; FEATURE_DIM] }
    }

    pub fn from_weights(weights: Vec<f64>) -> Self {
        Self { feature_version: FEATURE_VERSION.to_string(), weights }
    }

    pub fn validate(&self) -> Result<(), ScoreError> {
        if self.feature_version != FEATURE_VERSION {
            return Err(ScoreError::FeatureVersion {
                expected: FEATURE_VERSION.into(),
                found: self.feature_version.clone(),
            });
        }
        if self.weights.len() != FEATURE_DIM {
            return Err(ScoreError::DimensionMismatch { expected: FEATURE_DIM, found: self.weights.len() });
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(ScoreError::NonFiniteWeight);
        }
        Ok(())
    }

    pub fn dot(&self, f: &FeatureVector) -> f64 {
        self.weights.iter().zip(f.as_slice()).map(|(w, x)| w * x).sum()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScoreError> {
        let path = path.as_ref();
        let io = |message: String| ScoreError::ModelIo { path: path.display().to_string(), message };
        let text = fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
        let model: RankingModel = serde_json::from_str(&text).map_err(|e| io(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }
}

/// `dot(weights, featurize(utterance, candidate))`.
pub fn linear_score(model: &RankingModel, utterance: &str, candidate: &Plan) -> Result<f64, ScoreError> {
    if model.weights.len() != FEATURE_DIM {
        return Err(ScoreError::DimensionMismatch { expected: FEATURE_DIM, found: model.weights.len() });
    }
    Ok(model.dot(&featurize(utterance, candidate)))
}

#[derive(Debug, Clone)]
pub struct LinearScorer {
    model: RankingModel,
}

impl LinearScorer {
    pub fn new(model: RankingModel) -> Result<Self, ScoreError> {
        model.validate()?;
        Ok(Self { model })
    }

    pub fn model(&self) -> &RankingModel {
        &self.model
    }
}

impl Scorer for LinearScorer {
    fn score(&self, utterance: &str, candidates: &[Plan]) -> Result<Vec<f64>, ScoreError> {
        let u = Utterance::new(utterance);
        Ok(candidates.iter().map(|c| self.model.dot(&u.featurize(c))).collect())
    }
}
