//! Write synthetic question datasets over the bundled tech KB.
//!
//! ```text
//! cargo run --example synthetic_dataset -- <out-dir> [train] [dev] [seed]
//! ```

use std::path::PathBuf;

use groundplan::eval::write_dataset;
use groundplan::fixtures;
use groundplan::synthetic::{question_suite, train_dev_split};

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = PathBuf::from(args.first().map(String::as_str).unwrap_or("."));
    let n_train: usize = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(200);
    let n_dev: usize = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(50);
    let seed: u64 = args.get(3).map(|s| s.parse()).transpose()?.unwrap_or(1);

    let kb = fixtures::tech();
    std::fs::create_dir_all(&out)?;
    let suite = question_suite(&kb, 50, 7);
    std::fs::write(out.join("tech_suite.jsonl"), write_dataset(&suite))?;
    let (train, dev) = train_dev_split(&kb, n_train, n_dev, seed);
    std::fs::write(out.join("tech_train.jsonl"), write_dataset(&train))?;
    std::fs::write(out.join("tech_dev.jsonl"), write_dataset(&dev))?;
    for ex in suite.iter().take(5) {
        println!("{:<10} {:<55} {}", ex.qid, ex.utterance, ex.gold_plan.as_ref().map(|p| p.render()).unwrap_or_default());
    }
    println!("wrote {} suite, {} train, {} dev questions to {}", suite.len(), train.len(), dev.len(), out.display());
    Ok(())
}
