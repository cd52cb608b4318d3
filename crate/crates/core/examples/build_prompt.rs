//! Select in-context examples by BM25 similarity and render the few-shot
//! prompt a language-model scorer would receive.
//!
//! ```text
//! cargo run --example build_prompt -- ["query" [k=3]]
//! ```

use groundplan::eval::parse_dataset;
use groundplan::scorer::retrieval::{build_prompt, select_in_context_examples, InContextExample};

const TRAIN: &str = include_str!("../fixtures/tech_train.jsonl");

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let query = args.next().unwrap_or_else(|| "which people know rust".to_string());
    let k: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(3);
    let pool: Vec<InContextExample> = parse_dataset(TRAIN, "tech_train.jsonl")?
        .into_iter()
        .filter_map(|e| e.gold_plan.map(|p| InContextExample::new(e.utterance, p.render())))
        .collect();
    let chosen = select_in_context_examples(&pool, &query, k)?;
    println!("{}", build_prompt(&chosen, &query));
    Ok(())
}
