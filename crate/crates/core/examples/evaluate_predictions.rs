//! Exact match and denotation F1 for a handful of hand-written predictions,
//! followed by the report's breakdown table.
//!
//! ```text
//! cargo run --example evaluate_predictions
//! ```

use std::collections::BTreeMap;

use groundplan::eval::parse_dataset;
use groundplan::{denotation_f1, evaluate, execute, fixtures, parse_plan};

const QUESTIONS: &str = include_str!("../fixtures/mini_questions.jsonl");

fn main() -> anyhow::Result<()> {
    let kb = fixtures::mini();
    let dataset = parse_dataset(QUESTIONS, "mini_questions.jsonl")?;

    let pred = execute(&kb, &parse_plan("(JOIN knows java)")?)?;
    let gold = execute(&kb, &parse_plan("(JOIN knows basic)")?)?;
    println!("F1({pred}, {gold}) = {:.3}", denotation_f1(&pred, &gold));

    let mut predictions = BTreeMap::new();
    predictions.insert("m1".to_string(), Some(parse_plan("(AND (JOIN emulates java) Emulator)")?));
    predictions.insert("m2".to_string(), Some(parse_plan("(JOIN knows java)")?));
    predictions.insert("m3".to_string(), Some(parse_plan("(COUNT Emulator)")?));
    predictions.insert("m4".to_string(), None);
    let report = evaluate(&kb, &dataset, &predictions)?;
    for row in &report.per_example {
        println!("{:<4} em={:<5} f1={:.3}", row.qid, row.em, row.f1);
    }
    print!("{}", report.summary_table());
    Ok(())
}
