//! A small HTTP server answering `/score` with lexical scores, for
//! integration tests and local experiments.

use std::io::Write;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use tiny_http::{Header, Method, Request, Response, Server};

use super::features::{lexical_score_with, Utterance};
use super::{ScoreRequest, ScoreResponse};
use crate::plan::parse_plan;

/// How an injected failure manifests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultMode {
    /// Reply with a malformed status line so the client sees a transport error.
    BrokenResponse,
    /// Reply `503 Service Unavailable`.
    Unavailable,
}

/// Fail every request whose 0-based arrival index is a multiple of `every`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaultInjection {
    pub every: usize,
    pub mode: FaultMode,
}

#[derive(Debug, Default)]
pub struct MockStats {
    pub requests: AtomicUsize,
    pub injected_failures: AtomicUsize,
}

pub struct MockScorerServer {
    server: Arc<Server>,
    addr: SocketAddr,
    workers: Vec<JoinHandle<()>>,
    stats: Arc<MockStats>,
}

impl MockScorerServer {
    /// Bind `addr` (use port 0 for an ephemeral port) and start serving.
    pub fn start(addr: &str, faults: Option<FaultInjection>) -> std::io::Result<Self> {
        Self::start_with_workers(addr, faults, 4)
    }

    pub fn start_with_workers(addr: &str, faults: Option<FaultInjection>, workers: usize) -> std::io::Result<Self> {
        let server = Server::http(addr).map_err(std::io::Error::other)?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("mock scorer must listen on an IP socket"))?;
        let server = Arc::new(server);
        let stats = Arc::new(MockStats::default());
        let workers = (0..workers.max(1))
            .map(|_| {
                let server = Arc::clone(&server);
                let stats = Arc::clone(&stats);
                std::thread::spawn(move || {
                    for request in server.incoming_requests() {
                        handle(request, faults, &stats);
                    }
                })
            })
            .collect();
        Ok(Self { server, addr, workers, stats })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stats(&self) -> &MockStats {
        &self.stats
    }

    /// Block the calling thread until the server is shut down elsewhere.
    pub fn join(mut self) {
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for MockScorerServer {
    fn drop(&mut self) {
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

fn json_response(status: u16, body: String) -> Response<std::io::Cursor<Vec<u8>>> {
    Response::from_string(body)
        .with_status_code(status)
        .with_header(Header::from_bytes("Content-Type", "application/json").unwrap())
}

fn handle(mut request: Request, faults: Option<FaultInjection>, stats: &MockStats) {
    let index = stats.requests.fetch_add(1, Ordering::SeqCst);
    if let Some(f) = faults {
        if f.every > 0 && index % f.every == 0 {
            stats.injected_failures.fetch_add(1, Ordering::SeqCst);
            match f.mode {
                FaultMode::Unavailable => {
                    let _ = request.respond(json_response(503, r#"{"error":"injected"}"#.into()));
                }
                FaultMode::BrokenResponse => {
                    let mut w = request.into_writer();
                    let _ = w.write_all(b"garbage\r\n\r\n");
                    let _ = w.flush();
                }
            }
            return;
        }
    }
    if request.method() != &Method::Post || request.url() != "/score" {
        let _ = request.respond(json_response(404, r#"{"error":"not found"}"#.into()));
        return;
    }
    let mut body = String::new();
    if request.as_reader().read_to_string(&mut body).is_err() {
        let _ = request.respond(json_response(400, r#"{"error":"unreadable body"}"#.into()));
        return;
    }
    let (status, out) = match score_body(&body) {
        Ok(resp) => (200, serde_json::to_string(&resp).expect("response serializes")),
        Err(msg) => (400, serde_json::json!({ "error": msg }).to_string()),
    };
    let _ = request.respond(json_response(status, out));
}

fn score_body(body: &str) -> Result<ScoreResponse, String> {
    let req: ScoreRequest = serde_json::from_str(body).map_err(|e| e.to_string())?;
    req.validate().map_err(|e| e.to_string())?;
    let u = Utterance::new(&req.utterance);
    let scores = req
        .candidates
        .iter()
        .map(|c| parse_plan(c).map(|p| lexical_score_with(&u, &p)).map_err(|e| format!("`{c}`: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ScoreResponse { scores })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scores_body() {
        let resp = score_body(r#"{"utterance":"who knows java","candidates":["(JOIN knows java)","java"]}"#).unwrap();
        assert_eq!(resp.scores.len(), 2);
        assert!(resp.scores[0] > resp.scores[1]);
        assert!(score_body(r#"{"utterance":"u","candidates":["(JOIN"]}"#).is_err());
        assert!(score_body(r#"{"utterance":"u","candidates":[]}"#).is_err());
    }
}
