//! HTTP client for remote scoring services.
//!
//! `POST <endpoint>/score` with a [`ScoreRequest`] body; a `200` response
//! carries `{"scores": [..]}` aligned with the candidates. Transport errors,
//! `429` and `5xx` responses are retried with exponential backoff; any other
//! status or a malformed body fails immediately.

use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;

use super::retrieval::{select_in_context_examples, InContextExample};
use super::{check_scores, ScoreError, ScoreRequest, ScoreResponse, Scorer};
use crate::plan::Plan;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: usize,
    pub base_delay: Duration,
    pub timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 2, base_delay: Duration::from_millis(200), timeout: Duration::from_secs(30) }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based).
    pub fn backoff(&self, retry: usize) -> Duration {
        self.base_delay.saturating_mul(1u32 << retry.min(16))
    }
}

#[derive(Debug, Clone)]
pub struct RemoteScorer {
    url: String,
    client: Client,
    policy: RetryPolicy,
    examples: Option<(Vec<InContextExample>, usize)>,
}

enum Attempt {
    Retryable(String),
    Fatal(ScoreError),
}

impl RemoteScorer {
    /// `endpoint` is the service base URL; `/score` is appended unless present.
    pub fn new(endpoint: &str, policy: RetryPolicy) -> Result<Self, ScoreError> {
        let trimmed = endpoint.trim_end_matches('/');
        let url = if trimmed.ends_with("/score") { trimmed.to_string() } else { format!("{trimmed}/score") };
        let client = Client::builder()
            .timeout(policy.timeout)
            .build()
            .map_err(|e| ScoreError::Transport { attempts: 0, message: e.to_string() })?;
        Ok(Self { url, client, policy, examples: None })
    }

    /// Attach the top-`k` BM25 demonstrations from `pool` to every request.
    pub fn with_example_pool(mut self, pool: Vec<InContextExample>, k: usize) -> Result<Self, ScoreError> {
        if pool.is_empty() {
            return Err(ScoreError::EmptyPool);
        }
        if k == 0 {
            return Err(ScoreError::InvalidK);
        }
        self.examples = Some((pool, k));
        Ok(self)
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// Send one request, retrying transient failures.
    pub fn send(&self, request: &ScoreRequest) -> Result<Vec<f64>, ScoreError> {
        request.validate()?;
        let mut last = String::new();
        for attempt in 0..=self.policy.max_retries {
            if attempt > 0 {
                thread::sleep(self.policy.backoff(attempt - 1));
            }
            match self.attempt(request) {
                Ok(scores) => return Ok(scores),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retryable(msg)) => last = msg,
            }
        }
        Err(ScoreError::Transport { attempts: self.policy.max_retries + 1, message: last })
    }

    fn attempt(&self, request: &ScoreRequest) -> Result<Vec<f64>, Attempt> {
        let resp = self
            .client
            .post(&self.url)
            .json(request)
            .send()
            .map_err(|e| Attempt::Retryable(error_chain(&e)))?;
        let status = resp.status();
        let body = resp.text().map_err(|e| Attempt::Retryable(error_chain(&e)))?;
        if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
            return Err(Attempt::Retryable(format!("status {status}: {}", body.trim())));
        }
        if status != StatusCode::OK {
            return Err(Attempt::Fatal(ScoreError::Protocol(format!("status {status}: {}", body.trim()))));
        }
        let parsed: ScoreResponse = serde_json::from_str(&body)
            .map_err(|e| Attempt::Fatal(ScoreError::Protocol(format!("malformed response: {e}"))))?;
        check_scores(&parsed.scores, request.candidates.len()).map_err(Attempt::Fatal)?;
        Ok(parsed.scores)
    }
}

fn error_chain(e: &dyn std::error::Error) -> String {
    let mut msg = e.to_string();
    let mut src = e.source();
    while let Some(s) = src {
        msg.push_str(": ");
        msg.push_str(&s.to_string());
        src = s.source();
    }
    msg
}

impl Scorer for RemoteScorer {
    fn score(&self, utterance: &str, candidates: &[Plan]) -> Result<Vec<f64>, ScoreError> {
        let examples = match &self.examples {
            Some((pool, k)) => Some(select_in_context_examples(pool, utterance, *k)?),
            None => None,
        };
        let request = ScoreRequest::new(utterance, candidates, examples)?;
        self.send(&request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_normalization() {
        let p = RetryPolicy::default();
        assert_eq!(RemoteScorer::new("http://h:1", p).unwrap().url(), "http://h:1/score");
        assert_eq!(RemoteScorer::new("http://h:1/", p).unwrap().url(), "http://h:1/score");
        assert_eq!(RemoteScorer::new("http://h:1/score", p).unwrap().url(), "http://h:1/score");
    }

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy { base_delay: Duration::from_millis(10), ..Default::default() };
        assert_eq!(p.backoff(0), Duration::from_millis(10));
        assert_eq!(p.backoff(1), Duration::from_millis(20));
        assert_eq!(RetryPolicy::default().max_retries, 2);
        assert_eq!(RetryPolicy::default().timeout, Duration::from_secs(30));
    }
}
