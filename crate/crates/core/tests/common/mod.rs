//! Independent reference implementations shared by the integration tests.
//!
//! Nothing here uses the library's indexes, executor or enumerator; plans
//! are evaluated by scanning a flat triple list.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use groundplan::plan::{Comparison, Extremum, RelationRef};
use groundplan::{type_check, Denotation, KnowledgeBase, Literal, LiteralKind, Plan};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub enum RawRange {
    Class(String),
    Kind(LiteralKind),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawObj {
    Entity(String),
    Lit(Literal),
}

/// A KB as plain lists.
#[derive(Debug, Clone, Default)]
pub struct RawKb {
    pub classes: Vec<String>,
    pub relations: Vec<(String, String, RawRange)>,
    pub membership: Vec<(String, String)>,
    pub triples: Vec<(String, String, RawObj)>,
}

fn kind_name(k: LiteralKind) -> &'static str {
    match k {
        LiteralKind::Integer => "integer",
        LiteralKind::Float => "float",
        LiteralKind::String => "string",
        LiteralKind::Date => "date",
    }
}

fn kind_from(name: &str) -> Option<LiteralKind> {
    Some(match name {
        "integer" => LiteralKind::Integer,
        "float" => LiteralKind::Float,
        "string" => LiteralKind::String,
        "date" => LiteralKind::Date,
        _ => return None,
    })
}

fn literal_surface(l: &Literal) -> String {
    format!("\"{}\"^^{}", l.lexical(), kind_name(l.kind()))
}

impl RawKb {
    /// Parse the schema and triples file formats with plain string splitting.
    pub fn parse(schema: &str, triples: &str) -> Self {
        let mut kb = RawKb::default();
        for line in schema.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let w: Vec<&str> = line.split_whitespace().collect();
            match w[0] {
                "class" => kb.classes.push(w[1].into()),
                "relation" => {
                    let range = kind_from(w[3]).map(RawRange::Kind).unwrap_or_else(|| RawRange::Class(w[3].into()));
                    kb.relations.push((w[1].into(), w[2].into(), range));
                }
                "type" => kb.membership.push((w[1].into(), w[2].into())),
                other => panic!("unexpected schema keyword {other}"),
            }
        }
        for line in triples.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')) {
            let f: Vec<&str> = line.split('\t').collect();
            let obj = if let Some(rest) = f[2].strip_prefix('"') {
                let (lex, kind) = rest.rsplit_once("\"^^").expect("literal surface");
                RawObj::Lit(Literal::parse(kind_from(kind).expect("kind"), lex).expect("literal"))
            } else {
                RawObj::Entity(f[2].into())
            };
            kb.triples.push((f[0].into(), f[1].into(), obj));
        }
        kb
    }

    pub fn schema_text(&self) -> String {
        let mut s = String::new();
        for c in &self.classes {
            s += &format!("class {c}\n");
        }
        for (r, d, range) in &self.relations {
            let range = match range {
                RawRange::Class(c) => c.clone(),
                RawRange::Kind(k) => kind_name(*k).to_string(),
            };
            s += &format!("relation {r} {d} {range}\n");
        }
        for (e, c) in &self.membership {
            s += &format!("type {e} {c}\n");
        }
        s
    }

    pub fn triples_text(&self) -> String {
        let mut s = String::new();
        for (subj, r, o) in &self.triples {
            let o = match o {
                RawObj::Entity(e) => e.clone(),
                RawObj::Lit(l) => literal_surface(l),
            };
            s += &format!("{subj}\t{r}\t{o}\n");
        }
        s
    }

    pub fn build(&self) -> KnowledgeBase {
        KnowledgeBase::from_strs(&self.triples_text(), &self.schema_text()).expect("generated KB is valid")
    }

    pub fn entities(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.membership.iter().map(|(e, _)| e).collect();
        set.into_iter().cloned().collect()
    }

    pub fn members(&self, class: &str) -> BTreeSet<String> {
        self.membership.iter().filter(|(_, c)| c == class).map(|(e, _)| e.clone()).collect()
    }

    pub fn is_entity(&self, id: &str) -> bool {
        self.membership.iter().any(|(e, _)| e == id)
    }

    pub fn range(&self, relation: &str) -> Option<&RawRange> {
        self.relations.iter().find(|(r, _, _)| r == relation).map(|(_, _, g)| g)
    }

    pub fn literals(&self) -> Vec<Literal> {
        let set: BTreeSet<Literal> = self
            .triples
            .iter()
            .filter_map(|(_, _, o)| match o {
                RawObj::Lit(l) => Some(l.clone()),
                RawObj::Entity(_) => None,
            })
            .collect();
        set.into_iter().collect()
    }

    fn ordered_relations(&self) -> Vec<&str> {
        self.relations
            .iter()
            .filter(|(_, _, g)| matches!(g, RawRange::Kind(k) if *k != LiteralKind::String))
            .map(|(r, _, _)| r.as_str())
            .collect()
    }
}

/// Random literal of `kind` from a small value range, so ties are common.
pub fn random_literal(rng: &mut impl Rng, kind: LiteralKind) -> Literal {
    match kind {
        LiteralKind::Integer => Literal::integer(rng.random_range(0..8)),
        LiteralKind::Float => Literal::parse(kind, &format!("{}.5", rng.random_range(0..8))).unwrap(),
        LiteralKind::String => Literal::parse(kind, ["red", "green", "blue"].choose(rng).unwrap()).unwrap(),
        LiteralKind::Date => Literal::parse(kind, &format!("2020-01-0{}", rng.random_range(1..8))).unwrap(),
    }
}

/// Random KB with at most `max_entities` entities and `max_relations` relations.
pub fn random_kb(rng: &mut impl Rng, max_entities: usize, max_relations: usize) -> RawKb {
    let n_classes = rng.random_range(1..=3);
    let classes: Vec<String> = (0..n_classes).map(|i| format!("Class{i}")).collect();
    let n_entities = rng.random_range(1..=max_entities);
    let mut membership = Vec::new();
    for i in 0..n_entities {
        let e = format!("e{i}");
        let first = classes.choose(rng).unwrap().clone();
        if rng.random_bool(0.2) {
            let second = classes.choose(rng).unwrap().clone();
            if second != first {
                membership.push((e.clone(), second));
            }
        }
        membership.push((e, first));
    }
    let mut kb = RawKb { classes: classes.clone(), membership, ..Default::default() };
    let n_relations = rng.random_range(1..=max_relations);
    for i in 0..n_relations {
        let domain = classes.choose(rng).unwrap().clone();
        let range = match rng.random_range(0..10) {
            0..=4 => RawRange::Class(classes.choose(rng).unwrap().clone()),
            5..=6 => RawRange::Kind(LiteralKind::Integer),
            7 => RawRange::Kind(LiteralKind::Float),
            8 => RawRange::Kind(LiteralKind::Date),
            _ => RawRange::Kind(LiteralKind::String),
        };
        kb.relations.push((format!("rel{i}"), domain, range));
    }
    let relations = kb.relations.clone();
    for (r, domain, range) in &relations {
        let subjects: Vec<String> = kb.members(domain).into_iter().collect();
        if subjects.is_empty() {
            continue;
        }
        let objects: Vec<String> = match range {
            RawRange::Class(c) => kb.members(c).into_iter().collect(),
            RawRange::Kind(_) => vec![],
        };
        let n_edges = rng.random_range(0..=2 * n_entities);
        let mut seen = BTreeSet::new();
        for _ in 0..n_edges {
            let s = subjects.choose(rng).unwrap().clone();
            let o = match range {
                RawRange::Class(_) => match objects.choose(rng) {
                    Some(o) => RawObj::Entity(o.clone()),
                    None => continue,
                },
                RawRange::Kind(k) => RawObj::Lit(random_literal(rng, *k)),
            };
            let key = format!("{s}\t{r}\t{o:?}");
            if seen.insert(key) {
                kb.triples.push((s, r.clone(), o));
            }
        }
    }
    kb
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Naive executor

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NaiveValue {
    Entities(BTreeSet<String>),
    Literals(BTreeSet<Literal>),
    Count(u64),
}

impl NaiveValue {
    pub fn matches(&self, d: &Denotation) -> bool {
        match (self, d) {
            (NaiveValue::Entities(a), Denotation::EntitySet(b)) => a == b,
            (NaiveValue::Literals(a), Denotation::LiteralSet(b)) => a == b,
            (NaiveValue::Count(a), Denotation::Count(b)) => a == b,
            _ => false,
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            NaiveValue::Entities(s) => s.is_empty(),
            NaiveValue::Literals(s) => s.is_empty(),
            NaiveValue::Count(_) => false,
        }
    }

    fn entities(self) -> BTreeSet<String> {
        match self {
            NaiveValue::Entities(s) => s,
            other => panic!("expected entities, got {other:?}"),
        }
    }
}

fn holds(op: Comparison, ord: Ordering) -> bool {
    match op {
        Comparison::Lt => ord == Ordering::Less,
        Comparison::Le => ord != Ordering::Greater,
        Comparison::Gt => ord == Ordering::Greater,
        Comparison::Ge => ord != Ordering::Less,
    }
}

fn value_cmp(a: &Literal, b: &Literal) -> Option<Ordering> {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => x.partial_cmp(&y),
        _ if a.kind() == LiteralKind::Date && b.kind() == LiteralKind::Date => Some(a.lexical().cmp(&b.lexical())),
        _ => None,
    }
}

/// Evaluate a well-typed plan by scanning the triple list.
pub fn naive_eval(kb: &RawKb, plan: &Plan) -> NaiveValue {
    match plan {
        Plan::Symbol(s) => {
            if kb.is_entity(s) {
                NaiveValue::Entities(BTreeSet::from([s.clone()]))
            } else {
                NaiveValue::Entities(kb.members(s))
            }
        }
        Plan::Literal(l) => NaiveValue::Literals(BTreeSet::from([l.clone()])),
        Plan::Join { relation, arg } => {
            let xs = naive_eval(kb, arg).entities();
            let RelationRef { name, direction } = relation;
            let edges = kb.triples.iter().filter(|(_, r, _)| r == name);
            match direction {
                groundplan::Direction::Backward => NaiveValue::Entities(
                    edges
                        .filter(|(_, _, o)| matches!(o, RawObj::Entity(e) if xs.contains(e)))
                        .map(|(s, _, _)| s.clone())
                        .collect(),
                ),
                groundplan::Direction::Forward => {
                    let reached: Vec<&RawObj> = edges.filter(|(s, _, _)| xs.contains(s)).map(|(_, _, o)| o).collect();
                    match kb.range(name) {
                        Some(RawRange::Kind(_)) => NaiveValue::Literals(
                            reached
                                .into_iter()
                                .filter_map(|o| match o {
                                    RawObj::Lit(l) => Some(l.clone()),
                                    RawObj::Entity(_) => None,
                                })
                                .collect(),
                        ),
                        _ => NaiveValue::Entities(
                            reached
                                .into_iter()
                                .filter_map(|o| match o {
                                    RawObj::Entity(e) => Some(e.clone()),
                                    RawObj::Lit(_) => None,
                                })
                                .collect(),
                        ),
                    }
                }
            }
        }
        Plan::And(a, b) => {
            let (a, b) = (naive_eval(kb, a).entities(), naive_eval(kb, b).entities());
            NaiveValue::Entities(a.intersection(&b).cloned().collect())
        }
        Plan::Superlative { extremum, arg, relation } => {
            let xs = naive_eval(kb, arg).entities();
            let want = if *extremum == Extremum::Max { Ordering::Greater } else { Ordering::Less };
            // Each member's own value: its most extreme value in the wanted direction.
            let mut own: Vec<(String, Literal)> = Vec::new();
            for x in &xs {
                let mut best: Option<Literal> = None;
                for (s, r, o) in &kb.triples {
                    if s == x && r == relation {
                        if let RawObj::Lit(l) = o {
                            if best.as_ref().is_none_or(|b| value_cmp(l, b) == Some(want)) {
                                best = Some(l.clone());
                            }
                        }
                    }
                }
                if let Some(b) = best {
                    own.push((x.clone(), b));
                }
            }
            let Some(top) = own
                .iter()
                .map(|(_, l)| l)
                .reduce(|a, b| if value_cmp(b, a) == Some(want) { b } else { a })
                .cloned()
            else {
                return NaiveValue::Entities(BTreeSet::new());
            };
            NaiveValue::Entities(
                own.into_iter().filter(|(_, l)| value_cmp(l, &top) == Some(Ordering::Equal)).map(|(e, _)| e).collect(),
            )
        }
        Plan::Compare { op, relation, value } => {
            let NaiveValue::Literals(bounds) = naive_eval(kb, value) else { panic!("comparison bound") };
            NaiveValue::Entities(
                kb.triples
                    .iter()
                    .filter(|(_, r, _)| r == relation)
                    .filter(|(_, _, o)| match o {
                        RawObj::Lit(x) => bounds.iter().any(|v| value_cmp(x, v).is_some_and(|ord| holds(*op, ord))),
                        RawObj::Entity(_) => false,
                    })
                    .map(|(s, _, _)| s.clone())
                    .collect(),
            )
        }
        Plan::Count(arg) => NaiveValue::Count(naive_eval(kb, arg).entities().len() as u64),
    }
}

// ---------------------------------------------------------------------------
// Random plans

/// Random plan over the KB's vocabulary, shaped to type-check most of the time.
pub fn random_plan(kb: &RawKb, rng: &mut impl Rng, depth: usize) -> Plan {
    match rng.random_range(0..10) {
        0 => Plan::count(random_entity_plan(kb, rng, depth)),
        1 => random_literal_plan(kb, rng, depth),
        _ => random_entity_plan(kb, rng, depth),
    }
}

pub fn random_entity_plan(kb: &RawKb, rng: &mut impl Rng, depth: usize) -> Plan {
    let entities = kb.entities();
    if depth == 0 || rng.random_bool(0.25) {
        return if rng.random_bool(0.15) {
            Plan::symbol(kb.classes.choose(rng).unwrap().clone())
        } else {
            Plan::symbol(entities.choose(rng).unwrap().clone())
        };
    }
    let (name, _, range) = kb.relations.choose(rng).unwrap().clone();
    let ordered = kb.ordered_relations();
    match rng.random_range(0..6) {
        0 => Plan::join(RelationRef::backward(name), random_entity_plan(kb, rng, depth - 1)),
        1 if matches!(range, RawRange::Class(_)) => {
            Plan::join(RelationRef::forward(name), random_entity_plan(kb, rng, depth - 1))
        }
        2 => {
            let a = random_entity_plan(kb, rng, depth - 1);
            let b = if rng.random_bool(0.3) {
                Plan::symbol(kb.classes.choose(rng).unwrap().clone())
            } else {
                random_entity_plan(kb, rng, depth - 1)
            };
            Plan::and(a, b)
        }
        3 if !ordered.is_empty() => {
            let e = if rng.random_bool(0.5) { Extremum::Max } else { Extremum::Min };
            Plan::superlative(e, random_entity_plan(kb, rng, depth - 1), *ordered.choose(rng).unwrap())
        }
        4 if !ordered.is_empty() => {
            let r = *ordered.choose(rng).unwrap();
            let op = *Comparison::ALL.choose(rng).unwrap();
            let value = match kb.range(r) {
                Some(RawRange::Kind(k)) if rng.random_bool(0.7) => Plan::Literal(random_literal(rng, *k)),
                _ => random_literal_plan(kb, rng, depth - 1),
            };
            Plan::compare(op, r, value)
        }
        _ => Plan::join(RelationRef::backward(name), random_entity_plan(kb, rng, depth - 1)),
    }
}

pub fn random_literal_plan(kb: &RawKb, rng: &mut impl Rng, depth: usize) -> Plan {
    let literal_relations: Vec<&(String, String, RawRange)> =
        kb.relations.iter().filter(|(_, _, g)| matches!(g, RawRange::Kind(_))).collect();
    if depth > 0 && !literal_relations.is_empty() && rng.random_bool(0.5) {
        let (r, _, _) = literal_relations.choose(rng).unwrap();
        return Plan::join(RelationRef::forward(r.clone()), random_entity_plan(kb, rng, depth - 1));
    }
    let kind = *[LiteralKind::Integer, LiteralKind::Float, LiteralKind::Date].choose(rng).unwrap();
    Plan::Literal(random_literal(rng, kind))
}

/// A random plan that type-checks against `kb`, or `None` after many misses.
pub fn random_typed_plan(raw: &RawKb, kb: &KnowledgeBase, rng: &mut impl Rng, depth: usize) -> Option<Plan> {
    (0..200).map(|_| random_plan(raw, rng, depth)).find(|p| type_check(p, kb).is_ok())
}

// ---------------------------------------------------------------------------
// Brute-force enumeration

/// Every plan of length 1..=`max_len` built from `leaves` (plus class
/// symbols as AND operands) whose subexpressions all denote non-empty values
/// and which itself type-checks and is non-empty (COUNT exempt). COUNT of a
/// bare leaf is excluded.
pub fn brute_force_plans(raw: &RawKb, kb: &KnowledgeBase, leaves: &[Plan], max_len: usize) -> BTreeSet<String> {
    let relations: Vec<String> = raw.relations.iter().map(|(r, _, _)| r.clone()).collect();
    // by_len[l] holds every valid extendable plan of length l.
    let mut by_len: Vec<Vec<Plan>> = vec![leaves.to_vec()];
    let mut out = BTreeSet::new();
    for len in 1..=max_len {
        let mut raw_candidates: Vec<Plan> = Vec::new();
        let prev = by_len[len - 1].clone();
        for p in &prev {
            for r in &relations {
                raw_candidates.push(Plan::join(RelationRef::backward(r.clone()), p.clone()));
                raw_candidates.push(Plan::join(RelationRef::forward(r.clone()), p.clone()));
                raw_candidates.push(Plan::superlative(Extremum::Max, p.clone(), r.clone()));
                raw_candidates.push(Plan::superlative(Extremum::Min, p.clone(), r.clone()));
                for op in Comparison::ALL {
                    raw_candidates.push(Plan::compare(op, r.clone(), p.clone()));
                }
            }
            for c in &raw.classes {
                raw_candidates.push(Plan::and(Plan::symbol(c.clone()), p.clone()));
            }
            if len > 1 {
                raw_candidates.push(Plan::count(p.clone()));
            }
        }
        // AND of two non-class plans whose lengths sum to len - 1.
        for la in 0..len {
            let lb = len - 1 - la;
            if la > lb {
                continue;
            }
            for a in &by_len[la] {
                for b in &by_len[lb] {
                    if a != b {
                        raw_candidates.push(Plan::and(a.clone(), b.clone()));
                    }
                }
            }
        }
        let mut level = Vec::new();
        for p in raw_candidates {
            if type_check(&p, kb).is_err() {
                continue;
            }
            let v = naive_eval(raw, &p);
            if matches!(v, NaiveValue::Count(_)) {
                out.insert(p.render());
            } else if !v.is_empty() && out.insert(p.render()) {
                level.push(p);
            }
        }
        by_len.push(level);
    }
    out
}

// ---------------------------------------------------------------------------
// Reference BM25 (k1 = 1.2, b = 0.75, idf = ln(1 + (N - n + 0.5) / (n + 0.5)))

pub fn bm25_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

pub fn reference_bm25(docs: &[&str], query: &str) -> Vec<f64> {
    let docs: Vec<Vec<String>> = docs.iter().map(|d| bm25_tokens(d)).collect();
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(|d| d.len() as f64).sum::<f64>() / n;
    let mut df: BTreeMap<&str, f64> = BTreeMap::new();
    for d in &docs {
        let uniq: BTreeSet<&str> = d.iter().map(String::as_str).collect();
        for t in uniq {
            *df.entry(t).or_default() += 1.0;
        }
    }
    let q = bm25_tokens(query);
    docs.iter()
        .map(|d| {
            q.iter()
                .map(|t| {
                    let nq = df.get(t.as_str()).copied().unwrap_or(0.0);
                    let idf = (1.0 + (n - nq + 0.5) / (nq + 0.5)).ln();
                    let f = d.iter().filter(|x| *x == t).count() as f64;
                    idf * f * 2.2 / (f + 1.2 * (0.25 + 0.75 * d.len() as f64 / avgdl))
                })
                .sum()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Listwise loss by hand

/// `sum over pools of sum over golds of (logsumexp(scores) - score_gold)`,
/// divided by the total pool size.
pub fn reference_listwise_loss(pools: &[(Vec<f64>, Vec<usize>)]) -> f64 {
    let mut total = 0.0;
    let mut z = 0usize;
    for (scores, golds) in pools {
        let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
        for &g in golds {
            total += lse - scores[g];
        }
        z += scores.len();
    }
    total / z as f64
}

pub fn mini_raw() -> RawKb {
    RawKb::parse(groundplan::fixtures::MINI_SCHEMA, groundplan::fixtures::MINI_TRIPLES)
}

pub fn tech_raw() -> RawKb {
    RawKb::parse(groundplan::fixtures::TECH_SCHEMA, groundplan::fixtures::TECH_TRIPLES)
}
