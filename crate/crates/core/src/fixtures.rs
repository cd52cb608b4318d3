//! Bundled fixture knowledge bases.

use crate::kb::KnowledgeBase;

pub const MINI_TRIPLES: &str = include_str!("../fixtures/mini.triples");
pub const MINI_SCHEMA: &str = include_str!("../fixtures/mini.schema");

/// The six-entity "mini" KB: two languages, two emulators, two people.
pub fn mini() -> KnowledgeBase {
    KnowledgeBase::from_strs(MINI_TRIPLES, MINI_SCHEMA).expect("bundled mini fixture is valid")
}

pub const TECH_TRIPLES: &str = include_str!("../fixtures/tech.triples");
pub const TECH_SCHEMA: &str = include_str!("../fixtures/tech.schema");

/// The 30-entity "tech" KB: languages, emulators, people, companies, cities.
pub fn tech() -> KnowledgeBase {
    KnowledgeBase::from_strs(TECH_TRIPLES, TECH_SCHEMA).expect("bundled tech fixture is valid")
}
