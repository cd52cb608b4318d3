//! BM25 selection of in-context demonstrations and prompt assembly for
//! remote LLM scorers.

use serde::{Deserialize, Serialize};

use super::features::tokenize_text;
use super::ScoreError;

pub const PROMPT_INSTRUCTION: &str = "Please translate the following questions to lisp like programs.";

pub const DEFAULT_K: usize = 10;
pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

/// An (utterance, plan) demonstration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InContextExample {
    pub utterance: String,
    pub plan: String,
}

impl InContextExample {
    pub fn new(utterance: impl Into<String>, plan: impl Into<String>) -> Self {
        Self { utterance: utterance.into(), plan: plan.into() }
    }
}

/// BM25 index over pool utterances.
#[derive(Debug, Clone)]
pub struct Bm25 {
    docs: Vec<Vec<String>>,
    avg_len: f64,
}

impl Bm25 {
    pub fn new<'a>(documents: impl IntoIterator<Item = &'a str>) -> Self {
        let docs: Vec<Vec<String>> = documents.into_iter().map(tokenize_text).collect();
        let total: usize = docs.iter().map(Vec::len).sum();
        let avg_len = if docs.is_empty() { 0.0 } else { total as f64 / docs.len() as f64 };
        Self { docs, avg_len }
    }

    fn idf(&self, term: &str) -> f64 {
        let n = self.docs.iter().filter(|d| d.iter().any(|t| t == term)).count() as f64;
        let total = self.docs.len() as f64;
        ((total - n + 0.5) / (n + 0.5) + 1.0).ln()
    }

    /// Score of every document for `query`, in pool order.
    pub fn scores(&self, query: &str) -> Vec<f64> {
        let terms = tokenize_text(query);
        let idfs: Vec<f64> = terms.iter().map(|t| self.idf(t)).collect();
        self.docs
            .iter()
            .map(|doc| {
                let len_norm = if self.avg_len > 0.0 { doc.len() as f64 / self.avg_len } else { 0.0 };
                terms
                    .iter()
                    .zip(&idfs)
                    .map(|(t, idf)| {
                        let tf = doc.iter().filter(|d| *d == t).count() as f64;
                        idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * (1.0 - BM25_B + BM25_B * len_norm))
                    })
                    .sum()
            })
            .collect()
    }
}

/// Top-`k` pool items by BM25 similarity of their utterance to `query`;
/// ties keep pool order.
pub fn select_in_context_examples(
    pool: &[InContextExample],
    query: &str,
    k: usize,
) -> Result<Vec<InContextExample>, ScoreError> {
    if k == 0 {
        return Err(ScoreError::InvalidK);
    }
    if pool.is_empty() {
        return Err(ScoreError::EmptyPool);
    }
    let scores = Bm25::new(pool.iter().map(|e| e.utterance.as_str())).scores(query);
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Ok(order.into_iter().take(k).map(|i| pool[i].clone()).collect())
}

pub fn build_prompt(examples: &[InContextExample], query: &str) -> String {
    let mut out = String::from(PROMPT_INSTRUCTION);
    out.push('\n');
    for ex in examples {
        out.push_str(&format!("Question: {}\nProgram: {}\n", ex.utterance, ex.plan));
    }
    out.push_str(&format!("Question: {query}\nProgram:"));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool() -> Vec<InContextExample> {
        vec![
            InContextExample::new("which emulator emulates java", "(AND Emulator (JOIN emulates java))"),
            InContextExample::new("who knows basic", "(JOIN knows basic)"),
            InContextExample::new("how many knows java", "(COUNT (JOIN knows java))"),
        ]
    }

    #[test]
    fn single_item_pool() {
        let pool = vec![InContextExample::new("a b", "x")];
        assert_eq!(select_in_context_examples(&pool, "zzz", 1).unwrap(), pool);
    }

    #[test]
    fn exact_query_ranks_first() {
        let got = select_in_context_examples(&pool(), "who knows basic", 3).unwrap();
        assert_eq!(got[0].utterance, "who knows basic");
        assert_eq!(got.len(), 3);
    }

    #[test]
    fn ties_keep_pool_order() {
        let got = select_in_context_examples(&pool(), "unrelated words", 2).unwrap();
        assert_eq!(got, pool()[..2]);
    }

    #[test]
    fn errors() {
        assert!(matches!(select_in_context_examples(&[], "q", 1), Err(ScoreError::EmptyPool)));
        assert!(matches!(select_in_context_examples(&pool(), "q", 0), Err(ScoreError::InvalidK)));
    }

    #[test]
    fn prompt_layout() {
        assert_eq!(
            build_prompt(&[], "who knows java"),
            "Please translate the following questions to lisp like programs.\nQuestion: who knows java\nProgram:"
        );
        let p = build_prompt(&pool()[..2], "q");
        let lines: Vec<&str> = p.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[1], "Question: which emulator emulates java");
        assert_eq!(lines[2], "Program: (AND Emulator (JOIN emulates java))");
        assert_eq!(lines[3], "Question: who knows basic");
        assert_eq!(lines[6], "Program:");
    }
}
