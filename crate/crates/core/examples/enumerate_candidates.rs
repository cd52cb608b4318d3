//! One enumeration step: every valid extension of a beam, optionally under
//! relation and function constraints.
//!
//! ```text
//! cargo run --example enumerate_candidates
//! ```

use groundplan::{candidate_plans, fixtures, parse_plan, Constraints, Function};

fn main() -> anyhow::Result<()> {
    let kb = fixtures::mini();
    let beam = vec![parse_plan("java")?, parse_plan("Person")?];

    let all = candidate_plans(&kb, &beam, &Constraints::default())?;
    println!("beam {{java, Person}}: {} candidates", all.len());
    for p in &all {
        println!("  {p}");
    }

    let mut constraints = Constraints::default();
    constraints.denied_relations.insert("knows".into());
    constraints.denied_functions.insert(Function::ArgMax);
    let restricted = candidate_plans(&kb, &beam, &constraints)?;
    println!("without `knows` and ARGMAX: {} candidates", restricted.len());
    for p in &restricted {
        println!("  {p}");
    }

    let second = candidate_plans(&kb, &[parse_plan("(JOIN emulates java)")?], &Constraints::default())?;
    println!("extensions of (JOIN emulates java):");
    for p in &second {
        println!("  {p}");
    }
    Ok(())
}
