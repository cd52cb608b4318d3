//! Candidate enumeration: extend beam plans into every valid plan one
//! function application longer, by executing them and exploring the KB
//! around their denotations.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{execute, Denotation};
use crate::kb::{Direction, KnowledgeBase};
use crate::plan::{Comparison, Extremum, Function, Plan, RelationRef};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnumerateError {
    #[error("beam plan `{plan}` cannot be executed: {reason}")]
    InvalidBeamPlan { plan: String, reason: String },
    #[error("max_candidates must be at least 1")]
    InvalidConstraints,
}

/// Disallowed actions and output limits.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraints {
    pub denied_relations: BTreeSet<String>,
    pub denied_functions: BTreeSet<Function>,
    pub max_candidates: Option<usize>,
    /// Whether `(COUNT e)` is proposed for a bare entity leaf `e`.
    pub allow_count_of_leaf: bool,
}

impl Constraints {
    pub fn deny_relation(mut self, r: impl Into<String>) -> Self {
        self.denied_relations.insert(r.into());
        self
    }

    pub fn deny_function(mut self, f: Function) -> Self {
        self.denied_functions.insert(f);
        self
    }

    pub fn validate(&self) -> Result<(), EnumerateError> {
        if self.max_candidates == Some(0) {
            return Err(EnumerateError::InvalidConstraints);
        }
        Ok(())
    }

    fn allows(&self, f: Function) -> bool {
        !self.denied_functions.contains(&f)
    }

    fn allows_relation(&self, r: &str) -> bool {
        !self.denied_relations.contains(r)
    }
}

/// Every valid extension of the beam, deduplicated and sorted by canonical
/// rendering, truncated to `max_candidates`.
pub fn candidate_plans(
    kb: &KnowledgeBase,
    beam: &[Plan],
    constraints: &Constraints,
) -> Result<Vec<Plan>, EnumerateError> {
    constraints.validate()?;
    let mut denotations = Vec::with_capacity(beam.len());
    for p in beam {
        let d = execute(kb, p).map_err(|e| EnumerateError::InvalidBeamPlan {
            plan: p.render(),
            reason: e.to_string(),
        })?;
        denotations.push(d);
    }

    let mut out: BTreeMap<String, Plan> = BTreeMap::new();
    let mut emit = |plan: Plan| {
        out.entry(plan.render()).or_insert(plan);
    };

    for (p, d) in beam.iter().zip(&denotations) {
        match d {
            Denotation::EntitySet(set) => extend_entity_plan(kb, p, set, constraints, &mut emit),
            Denotation::LiteralSet(values) => {
                if values.len() == 1 && constraints.allows_any_comparison() {
                    extend_literal_plan(kb, p, values.iter().next().unwrap(), constraints, &mut emit);
                }
            }
            Denotation::Count(_) => {}
        }
    }

    if constraints.allows(Function::And) {
        for i in 0..beam.len() {
            let Some(a) = denotations[i].entities() else { continue };
            for j in i + 1..beam.len() {
                let Some(b) = denotations[j].entities() else { continue };
                if beam[i] == beam[j] || (is_class_leaf(kb, &beam[i]) && is_class_leaf(kb, &beam[j])) {
                    continue;
                }
                if a.intersection(b).next().is_some() {
                    emit(Plan::and(beam[i].clone(), beam[j].clone()));
                }
            }
        }
    }

    let mut plans: Vec<Plan> = out.into_values().collect();
    if let Some(max) = constraints.max_candidates {
        plans.truncate(max);
    }
    Ok(plans)
}

fn is_class_leaf(kb: &KnowledgeBase, p: &Plan) -> bool {
    matches!(p, Plan::Symbol(s) if !kb.has_entity(s))
}

impl Constraints {
    fn allows_any_comparison(&self) -> bool {
        Comparison::ALL.iter().any(|c| self.allows(c.function()))
    }
}

fn extend_entity_plan(
    kb: &KnowledgeBase,
    p: &Plan,
    set: &std::collections::BTreeSet<String>,
    c: &Constraints,
    emit: &mut impl FnMut(Plan),
) {
    if set.is_empty() {
        return;
    }
    // A class leaf is only accepted where signatures take a class operand.
    let is_class = is_class_leaf(kb, p);
    // Beam members were executed successfully, so their entities exist.
    let classes = kb.classes_of(set).unwrap_or_default();
    let backward = kb.relations_from(set, Direction::Backward).unwrap_or_default();
    let forward = kb.relations_from(set, Direction::Forward).unwrap_or_default();

    if c.allows(Function::And) && !is_class {
        for t in classes {
            emit(Plan::and(Plan::Symbol(t), p.clone()));
        }
    }
    if c.allows(Function::Join) && !is_class {
        for r in backward.iter().filter(|r| c.allows_relation(r)) {
            emit(Plan::join(RelationRef::backward(r.clone()), p.clone()));
        }
        for r in forward.iter().filter(|r| c.allows_relation(r)) {
            emit(Plan::join(RelationRef::forward(r.clone()), p.clone()));
        }
    }
    for r in forward.iter().filter(|r| c.allows_relation(r)) {
        if !kb.relation(r).is_ok_and(|d| d.is_ordered()) {
            continue;
        }
        for (f, extremum) in [(Function::ArgMax, Extremum::Max), (Function::ArgMin, Extremum::Min)] {
            if c.allows(f) {
                emit(Plan::superlative(extremum, p.clone(), r.clone()));
            }
        }
    }
    if c.allows(Function::Count) && !is_class && (!p.is_leaf() || c.allow_count_of_leaf) {
        emit(Plan::count(p.clone()));
    }
}

fn extend_literal_plan(
    kb: &KnowledgeBase,
    p: &Plan,
    value: &crate::literal::Literal,
    c: &Constraints,
    emit: &mut impl FnMut(Plan),
) {
    for (r, decl) in kb.relations() {
        if !c.allows_relation(r) {
            continue;
        }
        let Some(kind) = decl.literal_range() else { continue };
        if !kind.is_ordered() || !kind.comparable_with(value.kind()) {
            continue;
        }
        for op in Comparison::ALL {
            if !c.allows(op.function()) {
                continue;
            }
            let candidate = Plan::compare(op, r.clone(), p.clone());
            if execute(kb, &candidate).is_ok_and(|d| !d.is_empty()) {
                emit(candidate);
            }
        }
    }
}
