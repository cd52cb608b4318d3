//! Datasets, EM / F1 metrics and evaluation reports.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{execute, Denotation, ExecError};
use crate::kb::KnowledgeBase;
use crate::literal::{Literal, LiteralKind};
use crate::plan::{parse_plan, Plan};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("prediction for unknown qid `{0}`")]
    UnknownQid(String),
    #[error("gold plan of `{qid}` does not execute: {source}")]
    BadGold { qid: String, source: ExecError },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiteralProposal {
    pub kind: LiteralKind,
    pub lexical: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct RawExample {
    qid: String,
    utterance: String,
    #[serde(default)]
    entities: Vec<String>,
    #[serde(default)]
    literals: Vec<LiteralProposal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold_plan: Option<String>,
}

/// A question with its entity / literal proposals and optional gold plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetExample {
    pub qid: String,
    pub utterance: String,
    pub entity_proposals: Vec<String>,
    pub literal_proposals: Vec<Literal>,
    pub gold_plan: Option<Plan>,
}

impl DatasetExample {
    /// Initial plans: one leaf per entity and literal proposal.
    pub fn initial_plans(&self) -> Vec<Plan> {
        self.entity_proposals
            .iter()
            .map(|e| Plan::Symbol(e.clone()))
            .chain(self.literal_proposals.iter().cloned().map(Plan::Literal))
            .collect()
    }

    pub fn to_json_line(&self) -> String {
        let raw = RawExample {
            qid: self.qid.clone(),
            utterance: self.utterance.clone(),
            entities: self.entity_proposals.clone(),
            literals: self
                .literal_proposals
                .iter()
                .map(|l| LiteralProposal { kind: l.kind(), lexical: l.lexical() })
                .collect(),
            gold_plan: self.gold_plan.as_ref().map(Plan::render),
        };
        serde_json::to_string(&raw).expect("example serializes")
    }
}

fn read_file(path: &Path) -> Result<String, EvalError> {
    fs::read_to_string(path).map_err(|e| EvalError::Io { path: path.display().to_string(), message: e.to_string() })
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<DatasetExample>, EvalError> {
    let path = path.as_ref();
    parse_dataset(&read_file(path)?, &path.display().to_string())
}

/// Parse JSONL dataset text; `source` labels errors.
pub fn parse_dataset(text: &str, source: &str) -> Result<Vec<DatasetExample>, EvalError> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| EvalError::Parse { path: source.to_string(), line: i + 1, message };
        let raw: RawExample = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        if !seen.insert(raw.qid.clone()) {
            return Err(err(format!("duplicate qid `{}`", raw.qid)));
        }
        let literal_proposals = raw
            .literals
            .iter()
            .map(|l| Literal::parse(l.kind, &l.lexical))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| err(format!("qid `{}`: {e}", raw.qid)))?;
        let gold_plan = raw
            .gold_plan
            .as_deref()
            .map(parse_plan)
            .transpose()
            .map_err(|e| err(format!("qid `{}`: gold plan: {e}", raw.qid)))?;
        out.push(DatasetExample {
            qid: raw.qid,
            utterance: raw.utterance,
            entity_proposals: raw.entities,
            literal_proposals,
            gold_plan,
        });
    }
    Ok(out)
}

pub fn write_dataset(examples: &[DatasetExample]) -> String {
    examples.iter().map(|e| e.to_json_line() + "\n").collect()
}

/// One row of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub qid: String,
    pub plan: Option<String>,
    #[serde(default)]
    pub score: Option<f64>,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Read a predictions JSONL file into `qid -> plan` (`None` for failed rows).
pub fn load_predictions(path: impl AsRef<Path>) -> Result<BTreeMap<String, Option<Plan>>, EvalError> {
    let path = path.as_ref();
    let text = read_file(path)?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| EvalError::Parse { path: path.display().to_string(), line: i + 1, message };
        let row: PredictionRow = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        let plan = row.plan.as_deref().map(parse_plan).transpose().map_err(|e| err(e.to_string()))?;
        if out.insert(row.qid.clone(), plan).is_some() {
            return Err(err(format!("duplicate qid `{}`", row.qid)));
        }
    }
    Ok(out)
}

/// Canonical-structure equality.
pub fn exact_match(pred: &Plan, gold: &Plan) -> bool {
    pred.render() == gold.render()
}

/// Set F1 between denotations. Both-empty sets score 1; counts score 1 only
/// when equal; mismatched variants score 0.
pub fn denotation_f1(pred: &Denotation, gold: &Denotation) -> f64 {
    fn set_f1<T: Ord>(p: &BTreeSet<T>, g: &BTreeSet<T>) -> f64 {
        match (p.is_empty(), g.is_empty()) {
            (true, true) => return 1.0,
            (true, false) | (false, true) => return 0.0,
            _ => {}
        }
        let inter = p.intersection(g).count() as f64;
        if inter == 0.0 {
            return 0.0;
        }
        let precision = inter / p.len() as f64;
        let recall = inter / g.len() as f64;
        2.0 * precision * recall / (precision + recall)
    }
    match (pred, gold) {
        (Denotation::EntitySet(p), Denotation::EntitySet(g)) => set_f1(p, g),
        (Denotation::LiteralSet(p), Denotation::LiteralSet(g)) => set_f1(p, g),
        (Denotation::Count(p), Denotation::Count(g)) => f64::from(u8::from(p == g)),
        _ => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExampleResult {
    pub qid: String,
    pub predicted: Option<String>,
    pub gold: String,
    pub em: bool,
    pub f1: f64,
    pub plan_length: usize,
    pub relation_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Breakdown {
    pub count: usize,
    pub mean_em: f64,
    pub mean_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregates {
    pub count: usize,
    pub mean_em: f64,
    pub mean_f1: f64,
    /// Keyed by number of function applications in the gold plan.
    pub by_plan_length: BTreeMap<usize, Breakdown>,
    /// Keyed by number of relation uses (JOIN, comparative, superlative) in the gold plan.
    pub by_relation_count: BTreeMap<usize, Breakdown>,
    /// Dataset examples without a gold plan, not scored.
    pub skipped_without_gold: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub per_example: Vec<ExampleResult>,
    pub aggregates: Aggregates,
}

fn breakdown<'a>(rows: impl Iterator<Item = &'a ExampleResult>) -> Breakdown {
    let (mut n, mut em, mut f1) = (0usize, 0.0, 0.0);
    for r in rows {
        n += 1;
        em += f64::from(u8::from(r.em));
        f1 += r.f1;
    }
    let div = |x: f64| if n == 0 { 0.0 } else { x / n as f64 };
    Breakdown { count: n, mean_em: div(em), mean_f1: div(f1) }
}

impl EvalReport {
    pub fn from_rows(per_example: Vec<ExampleResult>, skipped_without_gold: usize) -> Self {
        let all = breakdown(per_example.iter());
        let group = |key: fn(&ExampleResult) -> usize| {
            let keys: BTreeSet<usize> = per_example.iter().map(key).collect();
            keys.into_iter()
                .map(|k| (k, breakdown(per_example.iter().filter(|r| key(r) == k))))
                .collect::<BTreeMap<_, _>>()
        };
        let aggregates = Aggregates {
            count: all.count,
            mean_em: all.mean_em,
            mean_f1: all.mean_f1,
            by_plan_length: group(|r| r.plan_length),
            by_relation_count: group(|r| r.relation_count),
            skipped_without_gold,
        };
        Self { per_example, aggregates }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text summary with the two breakdown tables.
    pub fn summary_table(&self) -> String {
        let a = &self.aggregates;
        let mut out = String::new();
        let _ = writeln!(out, "examples  {:>6}", a.count);
        let _ = writeln!(out, "EM        {:>6.4}", a.mean_em);
        let _ = writeln!(out, "F1        {:>6.4}", a.mean_f1);
        for (title, table) in [("plan length", &a.by_plan_length), ("# relations", &a.by_relation_count)] {
            let _ = writeln!(out, "\n{title:<12} {:>6} {:>8} {:>8}", "count", "EM", "F1");
            for (k, b) in table {
                let _ = writeln!(out, "{k:<12} {:>6} {:>8.4} {:>8.4}", b.count, b.mean_em, b.mean_f1);
            }
        }
        if a.skipped_without_gold > 0 {
            let _ = writeln!(out, "\n{} example(s) without gold plan not scored", a.skipped_without_gold);
        }
        out
    }
}

/// Score predictions against gold plans. A missing prediction, or one that
/// fails to execute, counts as EM false / F1 0.
pub fn evaluate(
    kb: &KnowledgeBase,
    dataset: &[DatasetExample],
    predictions: &BTreeMap<String, Option<Plan>>,
) -> Result<EvalReport, EvalError> {
    let qids: HashMap<&str, ()> = dataset.iter().map(|e| (e.qid.as_str(), ())).collect();
    if let Some(q) = predictions.keys().find(|q| !qids.contains_key(q.as_str())) {
        return Err(EvalError::UnknownQid(q.clone()));
    }
    let mut rows = Vec::new();
    let mut skipped = 0;
    for ex in dataset {
        let Some(gold) = &ex.gold_plan else {
            skipped += 1;
            continue;
        };
        let gold_den = execute(kb, gold).map_err(|source| EvalError::BadGold { qid: ex.qid.clone(), source })?;
        let pred = predictions.get(&ex.qid).and_then(Option::as_ref);
        let (em, f1) = match pred {
            Some(p) => (
                exact_match(p, gold),
                execute(kb, p).map(|d| denotation_f1(&d, &gold_den)).unwrap_or(0.0),
            ),
            None => (false, 0.0),
        };
        rows.push(ExampleResult {
            qid: ex.qid.clone(),
            predicted: pred.map(Plan::render),
            gold: gold.render(),
            em,
            f1,
            plan_length: gold.length(),
            relation_count: gold.relation_names().len(),
        });
    }
    Ok(EvalReport::from_rows(rows, skipped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn ents(xs: &[&str]) -> Denotation {
        Denotation::EntitySet(xs.iter().map(|s| s.to_string()).collect())
    }

    fn p(s: &str) -> Plan {
        parse_plan(s).unwrap()
    }

    const THREE: &str = r#"{"qid":"q1","utterance":"what emulates java","entities":["java"],"gold_plan":"(JOIN emulates java)"}
{"qid":"q2","utterance":"who has age above 40","entities":[],"literals":[{"kind":"integer","lexical":"40"}],"gold_plan":"(GT age \"40\"^^integer)"}
{"qid":"q3","utterance":"who knows basic","entities":["basic"]}
"#;

    #[test]
    fn loads_in_order() {
        let ds = parse_dataset(THREE, "t").unwrap();
        assert_eq!(ds.iter().map(|e| e.qid.as_str()).collect::<Vec<_>>(), ["q1", "q2", "q3"]);
        assert_eq!(ds[1].literal_proposals, [Literal::integer(40)]);
        assert_eq!(ds[1].initial_plans(), [Plan::Literal(Literal::integer(40))]);
        assert!(ds[2].gold_plan.is_none());
        let again = parse_dataset(&write_dataset(&ds), "t").unwrap();
        assert_eq!(again, ds);
    }

    #[test]
    fn duplicate_qid_and_bad_lines() {
        let dup = "{\"qid\":\"a\",\"utterance\":\"x\"}\n{\"qid\":\"a\",\"utterance\":\"y\"}\n";
        assert!(matches!(parse_dataset(dup, "t"), Err(EvalError::Parse { line: 2, .. })));
        let bad_gold = "{\"qid\":\"a\",\"utterance\":\"x\",\"gold_plan\":\"(JOIN r\"}\n";
        match parse_dataset(bad_gold, "t") {
            Err(EvalError::Parse { message, .. }) => assert!(message.contains("qid `a`")),
            other => panic!("{other:?}"),
        }
        assert!(parse_dataset("not json\n", "t").is_err());
    }

    #[test]
    fn em_cases() {
        assert!(exact_match(&p("(AND (JOIN knows java) (JOIN knows basic))"), &p("(AND (JOIN knows basic) (JOIN knows java))")));
        assert!(!exact_match(&p("(JOIN emulates java)"), &p("(JOIN knows java)")));
        let x = p("(COUNT (JOIN knows java))");
        assert!(exact_match(&x, &x));
    }

    #[test]
    fn f1_cases() {
        assert_eq!(denotation_f1(&ents(&["alice"]), &ents(&["alice", "bob"])), 2.0 / 3.0);
        assert_eq!(denotation_f1(&ents(&[]), &ents(&[])), 1.0);
        assert_eq!(denotation_f1(&ents(&[]), &ents(&["a"])), 0.0);
        assert_eq!(denotation_f1(&ents(&["b"]), &ents(&["a"])), 0.0);
        assert_eq!(denotation_f1(&Denotation::Count(2), &Denotation::Count(2)), 1.0);
        assert_eq!(denotation_f1(&Denotation::Count(2), &Denotation::Count(3)), 0.0);
        assert_eq!(denotation_f1(&Denotation::Count(2), &ents(&["alice"])), 0.0);
    }

    #[test]
    fn evaluate_reports() {
        let kb = fixtures::mini();
        let ds = parse_dataset(THREE, "t").unwrap();
        let perfect: BTreeMap<_, _> = ds
            .iter()
            .filter_map(|e| e.gold_plan.clone().map(|g| (e.qid.clone(), Some(g))))
            .collect();
        let r = evaluate(&kb, &ds, &perfect).unwrap();
        assert_eq!((r.aggregates.mean_em, r.aggregates.mean_f1), (1.0, 1.0));
        assert_eq!(r.aggregates.count, 2);
        assert_eq!(r.aggregates.skipped_without_gold, 1);

        let r = evaluate(&kb, &ds, &BTreeMap::new()).unwrap();
        assert_eq!(r.aggregates.mean_em, 0.0);

        // q1 gold {emu1, emu2}; predicting {emu2} gives F1 2/3. q2 gold {alice}; GE 35 gives {alice, bob}, F1 2/3.
        let partial = BTreeMap::from([
            ("q1".to_string(), Some(p("(JOIN emulates basic)"))),
            ("q2".to_string(), Some(p("(GE age \"35\"^^integer)"))),
        ]);
        let r = evaluate(&kb, &ds, &partial).unwrap();
        assert!((r.aggregates.mean_f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.aggregates.by_plan_length[&1].count, 2);

        let unknown = BTreeMap::from([("zz".to_string(), None)]);
        assert!(matches!(evaluate(&kb, &ds, &unknown), Err(EvalError::UnknownQid(_))));
        assert!(r.summary_table().contains("plan length"));
    }

    #[test]
    fn mean_f1_arithmetic() {
        let row = |q: &str, f1: f64| ExampleResult {
            qid: q.into(),
            predicted: None,
            gold: "x".into(),
            em: false,
            f1,
            plan_length: 1,
            relation_count: 1,
        };
        let r = EvalReport::from_rows(vec![row("a", 1.0), row("b", 1.0 / 3.0)], 0);
        assert!((r.aggregates.mean_f1 - 2.0 / 3.0).abs() < 1e-15);
    }
}
