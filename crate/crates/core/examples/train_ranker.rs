//! Train the linear ranking model on synthetic tech questions and compare
//! it with the lexical baseline on a held-out split.
//!
//! ```text
//! cargo run --release --example train_ranker -- [train=200] [dev=50] [seed=1]
//! ```

use std::collections::BTreeMap;

use groundplan::synthetic::train_dev_split;
use groundplan::{evaluate, fixtures, search, train, LexicalScorer, LinearScorer, Scorer, SearchConfig, TrainConfig};

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: u64| -> anyhow::Result<u64> { Ok(args.get(i).map(|s| s.parse()).transpose()?.unwrap_or(d)) };
    let (n_train, n_dev, seed) = (arg(0, 200)? as usize, arg(1, 50)? as usize, arg(2, 1)?);

    let kb = fixtures::tech();
    let (train_set, dev) = train_dev_split(&kb, n_train, n_dev, seed);
    let config = TrainConfig { rng_seed: seed, ..TrainConfig::default() };
    let report = train(&kb, &train_set, &config)?;
    println!("trained on {} examples, skipped {}", report.trained_examples, report.skipped.len());
    println!("loss {:.4} -> {:.4}", report.initial_loss, report.epoch_losses.last().copied().unwrap_or(f64::NAN));
    println!("weights {:?}", report.model.weights.iter().map(|w| format!("{w:.2}")).collect::<Vec<_>>());

    let linear = LinearScorer::new(report.model.clone())?;
    for (name, scorer) in [("lexical", &LexicalScorer as &dyn Scorer), ("trained", &linear)] {
        let mut preds = BTreeMap::new();
        for ex in &dev {
            let trace = search(&kb, &ex.utterance, &ex.initial_plans(), scorer, &SearchConfig::default())?;
            preds.insert(ex.qid.clone(), trace.best_plan().cloned());
        }
        let eval = evaluate(&kb, &dev, &preds)?;
        println!("{name:<8} dev EM {:.3}  F1 {:.3}", eval.aggregates.mean_em, eval.aggregates.mean_f1);
    }
    Ok(())
}
