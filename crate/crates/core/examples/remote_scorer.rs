//! Score candidates through the HTTP `/score` endpoint. Starts the bundled
//! mock server with fault injection and shows that retries make the remote
//! search identical to a local one.
//!
//! ```text
//! cargo run --example remote_scorer
//! ```

use std::sync::atomic::Ordering;
use std::time::Duration;

use groundplan::scorer::mock::{FaultInjection, FaultMode, MockScorerServer};
use groundplan::scorer::remote::RetryPolicy;
use groundplan::{fixtures, parse_plan, search, LexicalScorer, RemoteScorer, SearchConfig};

fn main() -> anyhow::Result<()> {
    let faults = FaultInjection { every: 3, mode: FaultMode::Unavailable };
    let server = MockScorerServer::start("127.0.0.1:0", Some(faults))?;
    println!("mock scorer at {}", server.url());

    let policy = RetryPolicy { base_delay: Duration::from_millis(10), ..RetryPolicy::default() };
    let remote = RemoteScorer::new(&server.url(), policy)?;
    let kb = fixtures::mini();
    let initial = vec![parse_plan("java")?];
    let utterance = "who knows java";
    let config = SearchConfig { max_steps: 3, ..SearchConfig::default() };

    let local = search(&kb, utterance, &initial, &LexicalScorer, &config)?;
    let over_http = search(&kb, utterance, &initial, &remote, &config)?;
    println!("local  best {}", local.best_plan().unwrap());
    println!("remote best {}", over_http.best_plan().unwrap());
    println!("traces identical: {}", local == over_http);
    println!(
        "{} requests, {} injected failures",
        server.stats().requests.load(Ordering::Relaxed),
        server.stats().injected_failures.load(Ordering::Relaxed)
    );
    Ok(())
}
