//! Search driven by an oracle scorer that knows the gold plan. Every suite
//! question should be recovered exactly, which shows the enumerator can
//! reach each gold plan within a short beam search.
//!
//! ```text
//! cargo run --release --example oracle_search
//! ```

use groundplan::eval::parse_dataset;
use groundplan::{exact_match, fixtures, search, GoldDecomposition, OracleScorer, SearchConfig};

const SUITE: &str = include_str!("../fixtures/tech_suite.jsonl");

fn main() -> anyhow::Result<()> {
    let kb = fixtures::tech();
    let suite = parse_dataset(SUITE, "tech_suite.jsonl")?;
    let config = SearchConfig::default();
    let mut hits = 0;
    for ex in &suite {
        let gold = ex.gold_plan.as_ref().expect("suite has golds");
        let depth = GoldDecomposition::derive(gold)?.len();
        let trace = search(&kb, &ex.utterance, &ex.initial_plans(), &OracleScorer::new(gold)?, &config)?;
        let ok = trace.best_plan().is_some_and(|p| exact_match(p, gold));
        hits += ok as usize;
        println!("{:<10} depth {depth} stopped at {:>2}  {}  {gold}", ex.qid, trace.termination_step, if ok { "ok  " } else { "MISS" });
    }
    println!("{hits}/{} exact", suite.len());
    Ok(())
}
