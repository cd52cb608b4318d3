//! Beam search with the untrained lexical-overlap scorer on a few tech-suite
//! questions, printing the per-step beams of the first one. Overlap-driven
//! AND growth keeps lexical scores rising, so the step cap is kept small.
//!
//! ```text
//! cargo run --release --example lexical_search -- [n=5]
//! ```

use groundplan::eval::parse_dataset;
use groundplan::{exact_match, fixtures, search, LexicalScorer, SearchConfig};

const SUITE: &str = include_str!("../fixtures/tech_suite.jsonl");

fn main() -> anyhow::Result<()> {
    let n: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(5);
    let kb = fixtures::tech();
    let suite = parse_dataset(SUITE, "tech_suite.jsonl")?;
    let config = SearchConfig { max_steps: 4, ..SearchConfig::default() };
    for (i, ex) in suite.iter().take(n).enumerate() {
        let trace = search(&kb, &ex.utterance, &ex.initial_plans(), &LexicalScorer, &config)?;
        if i == 0 {
            for step in &trace.steps {
                println!("step {} ({} candidates, best {:.3})", step.step, step.candidates.len(), step.best_score);
                for sp in &step.beam {
                    println!("    {:.3}  {}", sp.score, sp.plan);
                }
            }
        }
        let gold = ex.gold_plan.as_ref().expect("suite has golds");
        let best = trace.best.as_ref().expect("non-empty search");
        println!(
            "{}: {}\n    predicted {} (step {}, {:?})\n    gold      {}  em={}",
            ex.qid,
            ex.utterance,
            best.plan,
            best.step,
            trace.termination,
            gold,
            exact_match(&best.plan, gold)
        );
    }
    Ok(())
}
