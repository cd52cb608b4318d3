//! The same question searched with and without a denied relation and a
//! denied function.
//!
//! ```text
//! cargo run --example constrained_search
//! ```

use groundplan::{fixtures, parse_plan, search, Constraints, Function, LexicalScorer, SearchConfig};

fn main() -> anyhow::Result<()> {
    let kb = fixtures::mini();
    let utterance = "how many emulators emulate java";
    let initial = vec![parse_plan("java")?];

    let mut runs = vec![("unconstrained", Constraints::default())];
    let mut no_count = Constraints::default();
    no_count.denied_functions.insert(Function::Count);
    runs.push(("no COUNT", no_count));
    let mut no_emulates = Constraints::default();
    no_emulates.denied_relations.insert("emulates".into());
    runs.push(("no emulates", no_emulates));

    for (label, constraints) in runs {
        let config = SearchConfig { beam_size: 3, max_steps: 3, constraints };
        let trace = search(&kb, utterance, &initial, &LexicalScorer, &config)?;
        match &trace.best {
            Some(b) => println!("{label:<14} {:.3}  {}", b.score, b.plan),
            None => println!("{label:<14} no candidates"),
        }
    }
    Ok(())
}
