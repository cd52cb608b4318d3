//! Parse, type-check and execute plans against the bundled mini KB.
//!
//! ```text
//! cargo run --example execute_plans -- ["(JOIN knows java)" ...]
//! ```

use groundplan::{execute, fixtures, parse_plan, type_check};

fn main() {
    let kb = fixtures::mini();
    let mut plans: Vec<String> = std::env::args().skip(1).collect();
    if plans.is_empty() {
        plans = [
            "(JOIN knows java)",
            "(AND Emulator (JOIN emulates java))",
            "(COUNT (JOIN emulates java))",
            "(ARGMAX Person age)",
            "(GT age \"40\"^^integer)",
            "(JOIN age~ alice)",
            "(COUNT Person)",
            "(JOIN flies java)",
            "(AND java",
        ]
        .map(String::from)
        .to_vec();
    }
    for text in &plans {
        let outcome = parse_plan(text)
            .map_err(|e| e.to_string())
            .and_then(|p| type_check(&p, &kb).map(|t| (p, t)).map_err(|e| e.to_string()))
            .and_then(|(p, t)| execute(&kb, &p).map(|d| (p, t, d)).map_err(|e| e.to_string()));
        match outcome {
            Ok((p, t, d)) => println!("{p}\n    type {t:?}, length {}, denotation {d}", p.length()),
            Err(e) => println!("{text}\n    error: {e}"),
        }
    }
}
