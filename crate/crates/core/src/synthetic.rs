//! Template-generated questions over a KB, with compositional English
//! utterances and perfect entity / literal proposals.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eval::DatasetExample;
use crate::exec::execute;
use crate::kb::{KnowledgeBase, Object};
use crate::literal::Literal;
use crate::plan::{Comparison, Extremum, Plan, RelationRef};
use crate::scorer::RankingModel;
use crate::train::{build_pools, TrainConfig};

/// Plan templates, from length 1 to 4. Class-restricted superlatives are
/// left out: `(ARGMAX (AND C p) r)` and `(AND C (ARGMAX p r))` share a token
/// bag, so no lexical scorer can tell them apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Shape {
    Join,
    ForwardJoin,
    Compare,
    ClassJoin,
    TwoHop,
    CountJoin,
    SuperlativeJoin,
    AndAtoms,
    CountClassJoin,
    SuperlativeTwoHop,
    ClassTwoHop,
    CountTwoHop,
    CountAnd,
    SuperlativeAnd,
    ClassAnd,
}

impl Shape {
    pub const ALL: [Shape; 15] = [
        Shape::Join,
        Shape::ForwardJoin,
        Shape::Compare,
        Shape::ClassJoin,
        Shape::TwoHop,
        Shape::CountJoin,
        Shape::SuperlativeJoin,
        Shape::AndAtoms,
        Shape::CountClassJoin,
        Shape::SuperlativeTwoHop,
        Shape::ClassTwoHop,
        Shape::CountTwoHop,
        Shape::CountAnd,
        Shape::SuperlativeAnd,
        Shape::ClassAnd,
    ];
}

/// English rendering of a plan, built bottom-up.
pub fn describe(kb: &KnowledgeBase, plan: &Plan) -> String {
    match plan {
        Plan::Symbol(s) if kb.has_class(s) => s.to_lowercase(),
        Plan::Symbol(s) => s.clone(),
        Plan::Literal(l) => l.lexical(),
        Plan::Join { relation, arg } if relation.direction == crate::kb::Direction::Forward => {
            format!("the {} of {}", relation.name, describe(kb, arg))
        }
        Plan::Join { relation, arg } => format!("{} {}", relation.name, describe(kb, arg)),
        Plan::And(a, b) => match (a.as_ref(), b.as_ref()) {
            (Plan::Symbol(c), other) | (other, Plan::Symbol(c)) if kb.has_class(c) => {
                format!("{} that {}", c.to_lowercase(), describe(kb, other))
            }
            _ => format!("{} and {}", describe(kb, a), describe(kb, b)),
        },
        Plan::Superlative { extremum, arg, relation } => {
            let word = match extremum {
                Extremum::Max => "highest",
                Extremum::Min => "lowest",
            };
            format!("{} with the {word} {relation}", describe(kb, arg))
        }
        Plan::Compare { op, relation, value } => {
            let word = match op {
                Comparison::Lt => "below",
                Comparison::Le => "at most",
                Comparison::Gt => "above",
                Comparison::Ge => "at least",
            };
            format!("{relation} {word} {}", describe(kb, value))
        }
        Plan::Count(arg) => format!("how many {}", describe(kb, arg)),
    }
}

/// Question text for a gold plan.
pub fn utterance(kb: &KnowledgeBase, plan: &Plan) -> String {
    match plan {
        Plan::Count(_) => describe(kb, plan),
        _ => format!("what {}", describe(kb, plan)),
    }
}

/// Build a dataset example whose proposals are exactly the gold leaves.
pub fn example_for(kb: &KnowledgeBase, qid: impl Into<String>, gold: Plan) -> DatasetExample {
    let mut entities = Vec::new();
    let mut literals = Vec::new();
    for sub in gold.subplans() {
        match sub {
            Plan::Symbol(s) if kb.has_entity(s) && !entities.contains(s) => entities.push(s.clone()),
            Plan::Literal(l) if !literals.contains(l) => literals.push(l.clone()),
            _ => {}
        }
    }
    DatasetExample {
        qid: qid.into(),
        utterance: utterance(kb, &gold),
        entity_proposals: entities,
        literal_proposals: literals,
        gold_plan: Some(gold),
    }
}

/// Seeded sampler of gold plans that the enumerator can reproduce.
pub struct QuestionGenerator<'a> {
    kb: &'a KnowledgeBase,
    rng: ChaCha8Rng,
    entity_edges: Vec<(String, String, String)>,
    literal_edges: Vec<(String, String, Literal)>,
    next_op: usize,
}

impl<'a> QuestionGenerator<'a> {
    pub fn new(kb: &'a KnowledgeBase, seed: u64) -> Self {
        let mut entity_edges = Vec::new();
        let mut literal_edges = Vec::new();
        for t in kb.triples() {
            match &t.object {
                Object::Entity(o) => entity_edges.push((t.subject.clone(), t.relation.clone(), o.clone())),
                Object::Literal(l) if l.kind().is_ordered() => {
                    literal_edges.push((t.subject.clone(), t.relation.clone(), l.clone()))
                }
                Object::Literal(_) => {}
            }
        }
        Self { kb, rng: ChaCha8Rng::seed_from_u64(seed), entity_edges, literal_edges, next_op: 0 }
    }

    fn join(&mut self) -> Option<Plan> {
        let (_, r, o) = self.entity_edges.choose(&mut self.rng)?.clone();
        Some(Plan::join(RelationRef::backward(r), Plan::symbol(o)))
    }

    fn forward_join(&mut self) -> Option<Plan> {
        let n = self.entity_edges.len() + self.literal_edges.len();
        let i = self.rng.random_range(0..n.max(1));
        let (s, r) = match self.entity_edges.get(i) {
            Some((s, r, _)) => (s.clone(), r.clone()),
            None => {
                let (s, r, _) = self.literal_edges.get(i - self.entity_edges.len())?;
                (s.clone(), r.clone())
            }
        };
        Some(Plan::join(RelationRef::forward(r), Plan::symbol(s)))
    }

    /// Comparative satisfied by `subject`'s value `v` for `relation`.
    fn compare_for(&mut self, relation: &str, v: &Literal) -> Option<Plan> {
        let op = Comparison::ALL[self.next_op % 4];
        self.next_op += 1;
        let bounds: Vec<Literal> = self
            .literal_edges
            .iter()
            .filter(|(_, r, b)| r == relation && b.compare_value(v).is_some_and(|ord| op.holds(ord.reverse())))
            .map(|(_, _, b)| b.clone())
            .collect();
        let bound = bounds.choose(&mut self.rng)?.clone();
        Some(Plan::compare(op, relation.to_string(), Plan::Literal(bound)))
    }

    fn compare(&mut self) -> Option<Plan> {
        let (_, r, v) = self.literal_edges.choose(&mut self.rng)?.clone();
        self.compare_for(&r, &v)
    }

    fn class_of(&mut self, plan: &Plan) -> Option<Plan> {
        let den = execute(self.kb, plan).ok()?;
        let members: Vec<&String> = den.entities()?.iter().collect();
        let member = members.choose(&mut self.rng)?;
        let classes: Vec<String> = self.kb.classes_of(&BTreeSet::from([(*member).clone()])).ok()?.into_iter().collect();
        classes.choose(&mut self.rng).map(|c| Plan::symbol(c.clone()))
    }

    fn two_hop(&mut self) -> Option<Plan> {
        let (s, r2, m) = self.entity_edges.choose(&mut self.rng)?.clone();
        if self.rng.random_bool(0.5) {
            let inner: Vec<_> = self.entity_edges.iter().filter(|(x, _, _)| *x == m).cloned().collect();
            let (_, r1, o) = inner.choose(&mut self.rng)?.clone();
            Some(Plan::join(RelationRef::backward(r2), Plan::join(RelationRef::backward(r1), Plan::symbol(o))))
        } else {
            let outer: Vec<_> = self.entity_edges.iter().filter(|(x, _, _)| *x == m).cloned().collect();
            let (_, r3, _) = outer.choose(&mut self.rng)?.clone();
            Some(Plan::join(RelationRef::forward(r3), Plan::join(RelationRef::forward(r2), Plan::symbol(s))))
        }
    }

    /// Two distinct one-step constraints sharing a subject.
    fn and_atoms(&mut self) -> Option<Plan> {
        let subjects: Vec<String> = self.entity_edges.iter().map(|(s, _, _)| s.clone()).collect();
        let s = subjects.choose(&mut self.rng)?.clone();
        let mut atoms: Vec<Plan> = self
            .entity_edges
            .iter()
            .filter(|(x, _, _)| *x == s)
            .map(|(_, r, o)| Plan::join(RelationRef::backward(r.clone()), Plan::symbol(o.clone())))
            .collect();
        let lits: Vec<_> = self.literal_edges.iter().filter(|(x, _, _)| *x == s).cloned().collect();
        for (_, r, v) in lits {
            atoms.extend(self.compare_for(&r, &v));
        }
        if atoms.len() < 2 {
            return None;
        }
        let picked: Vec<Plan> = atoms.choose_multiple(&mut self.rng, 2).cloned().collect();
        Some(Plan::and(picked[0].clone(), picked[1].clone()))
    }

    fn superlative(&mut self, arg: Plan) -> Option<Plan> {
        let den = execute(self.kb, &arg).ok()?;
        let members = den.entities()?;
        let rels: Vec<String> = self
            .literal_edges
            .iter()
            .filter(|(s, r, _)| members.contains(s) && self.kb.relation(r).is_ok_and(|d| d.is_ordered()))
            .map(|(_, r, _)| r.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let r = rels.choose(&mut self.rng)?.clone();
        let ext = if self.rng.random_bool(0.5) { Extremum::Max } else { Extremum::Min };
        Some(Plan::superlative(ext, arg, r))
    }

    fn with_class(&mut self, arg: Plan) -> Option<Plan> {
        let c = self.class_of(&arg)?;
        Some(Plan::and(c, arg))
    }

    fn draw(&mut self, shape: Shape) -> Option<Plan> {
        match shape {
            Shape::Join => self.join(),
            Shape::ForwardJoin => self.forward_join(),
            Shape::Compare => self.compare(),
            Shape::ClassJoin => {
                let j = self.join()?;
                self.with_class(j)
            }
            Shape::TwoHop => self.two_hop(),
            Shape::CountJoin => self.join().map(Plan::count),
            Shape::SuperlativeJoin => {
                let j = self.join()?;
                self.superlative(j)
            }
            Shape::AndAtoms => self.and_atoms(),
            Shape::CountClassJoin => {
                let j = self.join()?;
                self.with_class(j).map(Plan::count)
            }
            Shape::SuperlativeTwoHop => {
                let h = self.two_hop()?;
                self.superlative(h)
            }
            Shape::ClassTwoHop => {
                let h = self.two_hop()?;
                self.with_class(h)
            }
            Shape::CountTwoHop => self.two_hop().map(Plan::count),
            Shape::CountAnd => self.and_atoms().map(Plan::count),
            Shape::SuperlativeAnd => {
                let a = self.and_atoms()?;
                self.superlative(a)
            }
            Shape::ClassAnd => {
                let a = self.and_atoms()?;
                self.with_class(a)
            }
        }
    }

    fn usable(&self, plan: &Plan) -> bool {
        let probe = example_for(self.kb, "probe", plan.clone());
        build_pools(self.kb, &probe, &RankingModel::zeros(), &TrainConfig::default()).is_ok()
    }

    /// A reproducible gold plan of `shape`, or `None` after repeated failures.
    pub fn sample(&mut self, shape: Shape) -> Option<Plan> {
        for _ in 0..200 {
            if let Some(p) = self.draw(shape) {
                let p = p.canonicalize();
                if self.usable(&p) {
                    return Some(p);
                }
            }
        }
        None
    }

    /// A shape drawn uniformly, then a plan of that shape.
    pub fn sample_any(&mut self) -> Plan {
        loop {
            let shape = *Shape::ALL.choose(&mut self.rng).expect("shapes");
            if let Some(p) = self.sample(shape) {
                return p;
            }
        }
    }
}

/// `n` questions with distinct gold plans, cycling through every shape.
pub fn question_suite(kb: &KnowledgeBase, n: usize, seed: u64) -> Vec<DatasetExample> {
    let mut gen = QuestionGenerator::new(kb, seed);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut misses = 0;
    while out.len() < n && misses < 10_000 {
        let shape = Shape::ALL[(out.len() + misses) % Shape::ALL.len()];
        match gen.sample(shape) {
            Some(p) if seen.insert(p.render()) => out.push(example_for(kb, format!("suite-{:03}", out.len()), p)),
            _ => misses += 1,
        }
    }
    out
}

/// Independent draws for a train / dev split.
pub fn train_dev_split(
    kb: &KnowledgeBase,
    n_train: usize,
    n_dev: usize,
    seed: u64,
) -> (Vec<DatasetExample>, Vec<DatasetExample>) {
    let mut gen = QuestionGenerator::new(kb, seed);
    let train = (0..n_train).map(|i| example_for(kb, format!("train-{i:03}"), gen.sample_any())).collect();
    let dev = (0..n_dev).map(|i| example_for(kb, format!("dev-{i:03}"), gen.sample_any())).collect();
    (train, dev)
}
