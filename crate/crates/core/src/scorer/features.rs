//! Lexical features linking an utterance to a candidate plan.

use std::collections::{BTreeMap, BTreeSet};

use crate::plan::{Function, Plan};

/// Bumped whenever tokenization, stopwords or the feature layout change.
pub const FEATURE_VERSION: &str = "lexfeat-v1";

pub const FEATURE_DIM: usize = 13;

/// Fixed English stopword list (25 words).
pub const STOPWORDS: [&str; 25] = [
    "a", "an", "and", "are", "at", "by", "do", "does", "for", "has", "how", "in", "is", "of", "on", "or",
    "that", "the", "to", "was", "what", "which", "who", "whose", "with",
];

pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "jaccard", "recall", "precision", "length", "JOIN", "AND", "ARGMAX", "ARGMIN", "LT", "LE", "GT", "GE", "COUNT",
];

/// Surface word each function contributes to a plan's token bag. JOIN and
/// AND are expressed by their relations and operands alone.
pub fn function_gloss(f: Function) -> Option<&'static str> {
    match f {
        Function::Join | Function::And => None,
        Function::ArgMax => Some("highest"),
        Function::ArgMin => Some("lowest"),
        Function::Lt => Some("below"),
        Function::Le => Some("most"),
        Function::Gt => Some("above"),
        Function::Ge => Some("least"),
        Function::Count => Some("many"),
    }
}

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.contains(&token)
}

/// Split a schema identifier on `.`, `_`, `~` and camelCase boundaries,
/// lowercasing each piece.
pub fn tokenize_schema(identifier: &str) -> Vec<String> {
    let mut out = Vec::new();
    for piece in identifier.split(['.', '_', '~']) {
        let chars: Vec<char> = piece.chars().collect();
        let mut current = String::new();
        for (i, &c) in chars.iter().enumerate() {
            let boundary = i > 0
                && c.is_uppercase()
                && (chars[i - 1].is_lowercase()
                    || chars[i - 1].is_ascii_digit()
                    || (chars[i - 1].is_uppercase() && chars.get(i + 1).is_some_and(|n| n.is_lowercase())));
            if boundary && !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            current.extend(c.to_lowercase());
        }
        if !current.is_empty() {
            out.push(current);
        }
    }
    out
}

/// Lowercased alphanumeric runs of free text.
pub fn tokenize_text(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Utterance tokens with stopwords removed.
pub fn content_tokens(utterance: &str) -> Vec<String> {
    tokenize_text(utterance).into_iter().filter(|t| !is_stopword(t)).collect()
}

/// Token bag of a plan: schema tokens of every identifier, literal lexical
/// forms, and function glosses, stopwords removed.
pub fn plan_tokens(plan: &Plan) -> Vec<String> {
    let mut out = Vec::new();
    for sub in plan.subplans() {
        match sub {
            Plan::Symbol(s) => out.extend(tokenize_schema(s)),
            Plan::Literal(l) => out.extend(tokenize_text(&l.lexical())),
            Plan::Join { relation, .. } => out.extend(tokenize_schema(&relation.name)),
            Plan::Superlative { relation, .. } | Plan::Compare { relation, .. } => {
                out.extend(tokenize_schema(relation))
            }
            Plan::And(..) | Plan::Count(_) => {}
        }
        if let Some(g) = sub.function().and_then(function_gloss) {
            out.push(g.to_string());
        }
    }
    out.retain(|t| !is_stopword(t));
    out
}

fn bag(tokens: &[String]) -> BTreeMap<&str, usize> {
    let mut m = BTreeMap::new();
    for t in tokens {
        *m.entry(t.as_str()).or_insert(0) += 1;
    }
    m
}

/// Feature vector `[jaccard, recall, precision, length/10, one-hot root]`.
///
/// Jaccard is over token sets. Recall and precision count tokens with
/// multiplicity: recall is the share of utterance tokens matched by the
/// plan, precision the share of plan tokens matched by the utterance, so a
/// plan repeating a relation the utterance mentions once loses precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn jaccard(&self) -> f64 {
        self.0[0]
    }

    pub fn recall(&self) -> f64 {
        self.0[1]
    }

    pub fn precision(&self) -> f64 {
        self.0[2]
    }
}

/// Pre-tokenized utterance, reusable across many candidates.
#[derive(Debug, Clone)]
pub struct Utterance {
    tokens: Vec<String>,
}

impl Utterance {
    pub fn new(text: &str) -> Self {
        Self { tokens: content_tokens(text) }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn featurize(&self, plan: &Plan) -> FeatureVector {
        let mut v = [0.0; FEATURE_DIM];
        let ptoks = plan_tokens(plan);
        if !self.tokens.is_empty() && !ptoks.is_empty() {
            let uset: BTreeSet<&str> = self.tokens.iter().map(String::as_str).collect();
            let pset: BTreeSet<&str> = ptoks.iter().map(String::as_str).collect();
            let inter = uset.intersection(&pset).count() as f64;
            let union = uset.union(&pset).count() as f64;
            let (ubag, pbag) = (bag(&self.tokens), bag(&ptoks));
            let matched: usize = pbag.iter().map(|(t, n)| (*n).min(ubag.get(t).copied().unwrap_or(0))).sum();
            v[0] = inter / union;
            v[1] = matched as f64 / self.tokens.len() as f64;
            v[2] = matched as f64 / ptoks.len() as f64;
        }
        v[3] = plan.length() as f64 / 10.0;
        if let Some(f) = plan.function() {
            v[4 + f.index()] = 1.0;
        }
        FeatureVector(v)
    }
}

pub fn featurize(utterance: &str, plan: &Plan) -> FeatureVector {
    Utterance::new(utterance).featurize(plan)
}

/// Deterministic baseline: utterance-token recall plus a small bonus per
/// function application, so a complete extension beats its prefix.
pub fn lexical_score(utterance: &str, plan: &Plan) -> f64 {
    lexical_score_with(&Utterance::new(utterance), plan)
}

pub(crate) fn lexical_score_with(u: &Utterance, plan: &Plan) -> f64 {
    u.featurize(plan).recall() + 0.01 * plan.length() as f64
}
