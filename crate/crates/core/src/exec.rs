//! Plan execution against a [`KnowledgeBase`].

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::kb::{Direction, EntityId, KnowledgeBase, Object};
use crate::literal::Literal;
use crate::plan::{type_check, Extremum, Plan, PlanError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
}

impl From<PlanError> for ExecError {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::UnknownIdentifier(id) => ExecError::UnknownIdentifier(id),
            other => ExecError::TypeMismatch(other.to_string()),
        }
    }
}

/// The value of a plan.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Denotation {
    EntitySet(BTreeSet<EntityId>),
    LiteralSet(BTreeSet<Literal>),
    Count(u64),
}

impl Denotation {
    pub fn is_empty(&self) -> bool {
        match self {
            Denotation::EntitySet(s) => s.is_empty(),
            Denotation::LiteralSet(s) => s.is_empty(),
            Denotation::Count(_) => false,
        }
    }

    pub fn entities(&self) -> Option<&BTreeSet<EntityId>> {
        match self {
            Denotation::EntitySet(s) => Some(s),
            _ => None,
        }
    }

    /// JSON form: sorted array of entity ids or literal surface strings, or a number.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Denotation::EntitySet(s) => serde_json::json!(s),
            Denotation::LiteralSet(s) => serde_json::json!(s.iter().map(Literal::to_surface).collect::<Vec<_>>()),
            Denotation::Count(n) => serde_json::json!(n),
        }
    }
}

impl Serialize for Denotation {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

impl fmt::Display for Denotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

/// Type-check and then evaluate `plan`.
pub fn execute(kb: &KnowledgeBase, plan: &Plan) -> Result<Denotation, ExecError> {
    type_check(plan, kb)?;
    eval(kb, plan)
}

/// Evaluate a plan already known to type-check.
pub(crate) fn eval(kb: &KnowledgeBase, plan: &Plan) -> Result<Denotation, ExecError> {
    match plan {
        Plan::Symbol(s) => {
            if kb.has_entity(s) {
                Ok(Denotation::EntitySet(BTreeSet::from([s.clone()])))
            } else {
                let members = kb.instances(s).map_err(|_| ExecError::UnknownIdentifier(s.clone()))?;
                Ok(Denotation::EntitySet(members.clone()))
            }
        }
        Plan::Literal(l) => Ok(Denotation::LiteralSet(BTreeSet::from([l.clone()]))),
        Plan::Join { relation, arg } => {
            let frontier = entity_arg(kb, arg)?;
            let reached = kb
                .follow(&frontier, &relation.name, relation.direction)
                .map_err(|e| ExecError::UnknownIdentifier(e.to_string()))?;
            let forward_literal = relation.direction == Direction::Forward
                && kb.relation(&relation.name).is_ok_and(|d| d.literal_range().is_some());
            if forward_literal {
                Ok(Denotation::LiteralSet(
                    reached
                        .into_iter()
                        .filter_map(|o| match o {
                            Object::Literal(l) => Some(l),
                            Object::Entity(_) => None,
                        })
                        .collect(),
                ))
            } else {
                Ok(Denotation::EntitySet(
                    reached
                        .into_iter()
                        .filter_map(|o| match o {
                            Object::Entity(e) => Some(e),
                            Object::Literal(_) => None,
                        })
                        .collect(),
                ))
            }
        }
        Plan::And(a, b) => {
            let (sa, sb) = (entity_arg(kb, a)?, entity_arg(kb, b)?);
            Ok(Denotation::EntitySet(sa.intersection(&sb).cloned().collect()))
        }
        Plan::Superlative { extremum, arg, relation } => {
            let members = entity_arg(kb, arg)?;
            Ok(Denotation::EntitySet(superlative(kb, &members, relation, *extremum)))
        }
        Plan::Compare { op, relation, value } => {
            let bounds = match eval(kb, value)? {
                Denotation::LiteralSet(s) => s,
                other => return Err(ExecError::TypeMismatch(format!("comparison bound is {other}"))),
            };
            let mut out = BTreeSet::new();
            for (subject, object) in kb.edges(relation) {
                if let Object::Literal(x) = object {
                    // Existential over both the subject's values and the bounds.
                    let hit = bounds
                        .iter()
                        .any(|v| x.compare_value(v).is_some_and(|ord| op.holds(ord)));
                    if hit {
                        out.insert(subject.clone());
                    }
                }
            }
            Ok(Denotation::EntitySet(out))
        }
        Plan::Count(arg) => match eval(kb, arg)? {
            Denotation::EntitySet(s) => Ok(Denotation::Count(s.len() as u64)),
            other => Err(ExecError::TypeMismatch(format!("COUNT of {other}"))),
        },
    }
}

fn entity_arg(kb: &KnowledgeBase, plan: &Plan) -> Result<BTreeSet<EntityId>, ExecError> {
    match eval(kb, plan)? {
        Denotation::EntitySet(s) => Ok(s),
        other => Err(ExecError::TypeMismatch(format!("`{plan}` denotes {other}, not an entity set"))),
    }
}

/// Members attaining the extreme value of `relation`. An entity with several
/// values is represented by its maximum (for ARGMAX) or minimum (ARGMIN).
fn superlative(kb: &KnowledgeBase, members: &BTreeSet<EntityId>, relation: &str, extremum: Extremum) -> BTreeSet<EntityId> {
    let want = match extremum {
        Extremum::Max => Ordering::Greater,
        Extremum::Min => Ordering::Less,
    };
    let mut best: Option<Literal> = None;
    let mut winners = BTreeSet::new();
    for e in members {
        let Some(values) = kb.values(e, relation) else { continue };
        let own = values
            .iter()
            .filter_map(|o| match o {
                Object::Literal(l) => Some(l),
                Object::Entity(_) => None,
            })
            .reduce(|a, b| if b.compare_value(a) == Some(want) { b } else { a });
        let Some(own) = own else { continue };
        match best.as_ref().and_then(|b| own.compare_value(b)) {
            None if best.is_none() => {
                best = Some(own.clone());
                winners.insert(e.clone());
            }
            Some(ord) if ord == want => {
                best = Some(own.clone());
                winners.clear();
                winners.insert(e.clone());
            }
            Some(Ordering::Equal) => {
                winners.insert(e.clone());
            }
            _ => {}
        }
    }
    winners
}
