//! Immutable typed triple store.
//!
//! A [`KnowledgeBase`] is built once from a schema file (classes, relations,
//! class membership) and a triples file, validated against the declared
//! domains and ranges, and indexed in both directions. Nothing mutates it
//! after loading, so it can be shared freely across threads.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::literal::{scan_surface, Literal, LiteralKind};

pub type EntityId = String;
pub type ClassId = String;
pub type RelationId = String;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("{file}:{line}:{column}: {message}")]
    Parse { file: String, line: usize, column: usize, message: String },
    #[error("{file}:{line}: schema violation: {message}")]
    SchemaViolation { file: String, line: usize, message: String },
    #[error("{file}:{line}: duplicate declaration of `{name}`")]
    DuplicateDeclaration { file: String, line: usize, name: String },
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Range of a relation: either a class of entities or a literal kind.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Range {
    Class(ClassId),
    Literal(LiteralKind),
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Range::Class(c) => f.write_str(c),
            Range::Literal(k) => f.write_str(k.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationDecl {
    pub domain: ClassId,
    pub range: Range,
}

impl RelationDecl {
    pub fn literal_range(&self) -> Option<LiteralKind> {
        match self.range {
            Range::Literal(k) => Some(k),
            Range::Class(_) => None,
        }
    }

    /// Relations whose values support ordering (numeric or date range).
    pub fn is_ordered(&self) -> bool {
        self.literal_range().is_some_and(LiteralKind::is_ordered)
    }
}

/// Object position of a triple.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Object {
    Entity(EntityId),
    Literal(Literal),
}

impl fmt::Display for Object {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Object::Entity(e) => f.write_str(e),
            Object::Literal(l) => write!(f, "{l}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: Object,
}

/// Traversal direction along a relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Subject to object.
    Forward,
    /// Object to subject.
    Backward,
}

type Adjacency<K, V> = HashMap<K, BTreeMap<RelationId, BTreeSet<V>>>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Schema {
    pub classes: BTreeSet<ClassId>,
    pub relations: BTreeMap<RelationId, RelationDecl>,
    pub class_membership: BTreeMap<EntityId, BTreeSet<ClassId>>,
}

#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    schema: Schema,
    class_instances: BTreeMap<ClassId, BTreeSet<EntityId>>,
    triples: BTreeSet<Triple>,
    forward: Adjacency<EntityId, Object>,
    backward: Adjacency<Object, EntityId>,
    by_relation: BTreeMap<RelationId, Vec<(EntityId, Object)>>,
}

impl PartialEq for KnowledgeBase {
    fn eq(&self, other: &Self) -> bool {
        // Indexes are derived from these two.
        self.schema == other.schema && self.triples == other.triples
    }
}

impl Eq for KnowledgeBase {}

impl KnowledgeBase {
    /// Load and validate a KB from a triples file and a schema file.
    pub fn load(triples_path: impl AsRef<Path>, schema_path: impl AsRef<Path>) -> Result<Self, KbError> {
        let read = |p: &Path| {
            fs::read_to_string(p).map_err(|source| KbError::Io { path: p.display().to_string(), source })
        };
        let (tp, sp) = (triples_path.as_ref(), schema_path.as_ref());
        let schema = parse_schema(&read(sp)?, &sp.display().to_string())?;
        let triples = parse_triples(&read(tp)?, &tp.display().to_string(), &schema)?;
        Ok(Self::build(schema, triples))
    }

    /// Same as [`KnowledgeBase::load`] but from in-memory text.
    pub fn from_strs(triples: &str, schema: &str) -> Result<Self, KbError> {
        let schema = parse_schema(schema, "<schema>")?;
        let triples = parse_triples(triples, "<triples>", &schema)?;
        Ok(Self::build(schema, triples))
    }

    /// Build from already-parsed parts, validating every triple.
    pub fn from_parts(schema: Schema, triples: impl IntoIterator<Item = Triple>) -> Result<Self, KbError> {
        validate_schema(&schema)?;
        let mut set = BTreeSet::new();
        for (i, t) in triples.into_iter().enumerate() {
            check_triple(&schema, &t).map_err(|message| KbError::SchemaViolation {
                file: "<triples>".into(),
                line: i + 1,
                message,
            })?;
            set.insert(t);
        }
        Ok(Self::build(schema, set))
    }

    fn build(schema: Schema, triples: BTreeSet<Triple>) -> Self {
        let mut class_instances: BTreeMap<ClassId, BTreeSet<EntityId>> =
            schema.classes.iter().map(|c| (c.clone(), BTreeSet::new())).collect();
        for (e, classes) in &schema.class_membership {
            for c in classes {
                class_instances.entry(c.clone()).or_default().insert(e.clone());
            }
        }
        let mut forward: Adjacency<EntityId, Object> = HashMap::new();
        let mut backward: Adjacency<Object, EntityId> = HashMap::new();
        let mut by_relation: BTreeMap<RelationId, Vec<(EntityId, Object)>> = BTreeMap::new();
        for t in &triples {
            forward
                .entry(t.subject.clone())
                .or_default()
                .entry(t.relation.clone())
                .or_default()
                .insert(t.object.clone());
            backward
                .entry(t.object.clone())
                .or_default()
                .entry(t.relation.clone())
                .or_default()
                .insert(t.subject.clone());
            by_relation
                .entry(t.relation.clone())
                .or_default()
                .push((t.subject.clone(), t.object.clone()));
        }
        Self { schema, class_instances, triples, forward, backward, by_relation }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn entities(&self) -> impl Iterator<Item = &EntityId> {
        self.schema.class_membership.keys()
    }

    pub fn num_entities(&self) -> usize {
        self.schema.class_membership.len()
    }

    pub fn classes(&self) -> &BTreeSet<ClassId> {
        &self.schema.classes
    }

    pub fn relations(&self) -> &BTreeMap<RelationId, RelationDecl> {
        &self.schema.relations
    }

    pub fn triples(&self) -> &BTreeSet<Triple> {
        &self.triples
    }

    pub fn has_entity(&self, id: &str) -> bool {
        self.schema.class_membership.contains_key(id)
    }

    pub fn has_class(&self, id: &str) -> bool {
        self.schema.classes.contains(id)
    }

    pub fn relation(&self, id: &str) -> Result<&RelationDecl, KbError> {
        self.schema.relations.get(id).ok_or_else(|| KbError::UnknownRelation(id.to_string()))
    }

    pub fn instances(&self, class: &str) -> Result<&BTreeSet<EntityId>, KbError> {
        self.class_instances.get(class).ok_or_else(|| KbError::UnknownClass(class.to_string()))
    }

    fn check_frontier<'a>(&self, frontier: impl IntoIterator<Item = &'a EntityId>) -> Result<(), KbError> {
        for e in frontier {
            if !self.has_entity(e) {
                return Err(KbError::UnknownEntity(e.clone()));
            }
        }
        Ok(())
    }

    /// Relations with at least one edge leaving (`Forward`) or entering
    /// (`Backward`) the frontier.
    pub fn relations_from(
        &self,
        frontier: &BTreeSet<EntityId>,
        direction: Direction,
    ) -> Result<BTreeSet<RelationId>, KbError> {
        self.check_frontier(frontier)?;
        let mut out = BTreeSet::new();
        for e in frontier {
            match direction {
                Direction::Forward => {
                    if let Some(edges) = self.forward.get(e) {
                        out.extend(edges.keys().cloned());
                    }
                }
                Direction::Backward => {
                    if let Some(edges) = self.backward.get(&Object::Entity(e.clone())) {
                        out.extend(edges.keys().cloned());
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn classes_of(&self, frontier: &BTreeSet<EntityId>) -> Result<BTreeSet<ClassId>, KbError> {
        self.check_frontier(frontier)?;
        Ok(frontier
            .iter()
            .flat_map(|e| self.schema.class_membership[e].iter().cloned())
            .collect())
    }

    /// One hop along `relation`. `Backward` returns subjects pointing into the
    /// frontier; `Forward` returns objects reached from it.
    pub fn follow(
        &self,
        frontier: &BTreeSet<EntityId>,
        relation: &str,
        direction: Direction,
    ) -> Result<BTreeSet<Object>, KbError> {
        self.relation(relation)?;
        self.check_frontier(frontier)?;
        let mut out = BTreeSet::new();
        for e in frontier {
            match direction {
                Direction::Forward => {
                    if let Some(objs) = self.forward.get(e).and_then(|m| m.get(relation)) {
                        out.extend(objs.iter().cloned());
                    }
                }
                Direction::Backward => {
                    if let Some(subjs) = self.backward.get(&Object::Entity(e.clone())).and_then(|m| m.get(relation)) {
                        out.extend(subjs.iter().cloned().map(Object::Entity));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Values of `relation` for a single subject.
    pub fn values(&self, subject: &str, relation: &str) -> Option<&BTreeSet<Object>> {
        self.forward.get(subject).and_then(|m| m.get(relation))
    }

    /// All `(subject, object)` pairs of a relation, in triple order.
    pub fn edges(&self, relation: &str) -> &[(EntityId, Object)] {
        self.by_relation.get(relation).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Render the KB back to `(triples, schema)` text in the file formats
    /// [`KnowledgeBase::load`] accepts.
    pub fn to_strings(&self) -> (String, String) {
        let mut schema = String::new();
        for c in &self.schema.classes {
            schema.push_str(&format!("class {c}\n"));
        }
        for (r, d) in &self.schema.relations {
            schema.push_str(&format!("relation {r} {} {}\n", d.domain, d.range));
        }
        for (e, cs) in &self.schema.class_membership {
            for c in cs {
                schema.push_str(&format!("type {e} {c}\n"));
            }
        }
        let mut triples = String::new();
        for t in &self.triples {
            triples.push_str(&format!("{}\t{}\t{}\n", t.subject, t.relation, t.object));
        }
        (triples, schema)
    }
}

fn is_comment_or_blank(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}

fn valid_identifier(id: &str) -> bool {
    !id.is_empty()
        && !id.ends_with('~')
        && !id.chars().any(|c| c.is_whitespace() || c == '(' || c == ')' || c == '"')
}

fn parse_schema(text: &str, file: &str) -> Result<Schema, KbError> {
    let mut schema = Schema::default();
    let mut seen_types: BTreeSet<(String, String)> = BTreeSet::new();
    let parse_err = |line: usize, column: usize, message: String| KbError::Parse {
        file: file.to_string(),
        line,
        column,
        message,
    };
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if is_comment_or_blank(raw) {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        let column_of = |i: usize| raw.find(fields[i]).map_or(1, |c| c + 1);
        for (i, f) in fields.iter().enumerate().skip(1) {
            if !valid_identifier(f) {
                return Err(parse_err(line_no, column_of(i), format!("invalid identifier `{f}`")));
            }
        }
        let dup = |name: &str| KbError::DuplicateDeclaration {
            file: file.to_string(),
            line: line_no,
            name: name.to_string(),
        };
        match fields.as_slice() {
            ["class", id] => {
                if !schema.classes.insert(id.to_string()) {
                    return Err(dup(id));
                }
            }
            ["relation", id, domain, range] => {
                let range = match range.parse::<LiteralKind>() {
                    Ok(kind) => Range::Literal(kind),
                    Err(_) => Range::Class(range.to_string()),
                };
                let decl = RelationDecl { domain: domain.to_string(), range };
                if schema.relations.insert(id.to_string(), decl).is_some() {
                    return Err(dup(id));
                }
            }
            ["type", entity, class] => {
                if !seen_types.insert((entity.to_string(), class.to_string())) {
                    return Err(dup(&format!("type {entity} {class}")));
                }
                schema
                    .class_membership
                    .entry(entity.to_string())
                    .or_default()
                    .insert(class.to_string());
            }
            [kw, ..] if matches!(*kw, "class" | "relation" | "type") => {
                return Err(parse_err(line_no, 1, format!("wrong number of fields for `{kw}` line")));
            }
            [kw, ..] => return Err(parse_err(line_no, column_of(0), format!("unknown directive `{kw}`"))),
            [] => unreachable!(),
        }
    }
    validate_schema(&schema).map_err(|e| match e {
        KbError::SchemaViolation { line: 0, message, .. } => KbError::SchemaViolation {
            file: file.to_string(),
            line: 0,
            message,
        },
        other => other,
    })?;
    Ok(schema)
}

fn validate_schema(schema: &Schema) -> Result<(), KbError> {
    let violation = |message: String| KbError::SchemaViolation { file: "<schema>".into(), line: 0, message };
    for (r, d) in &schema.relations {
        if !schema.classes.contains(&d.domain) {
            return Err(violation(format!("relation `{r}` has undeclared domain class `{}`", d.domain)));
        }
        if let Range::Class(c) = &d.range {
            if !schema.classes.contains(c) {
                return Err(violation(format!("relation `{r}` has undeclared range class `{c}`")));
            }
        }
    }
    for (e, cs) in &schema.class_membership {
        for c in cs {
            if !schema.classes.contains(c) {
                return Err(violation(format!("entity `{e}` typed with undeclared class `{c}`")));
            }
        }
        // Plan leaves are bare identifiers, so entity and class ids must not collide.
        if schema.classes.contains(e) {
            return Err(violation(format!("`{e}` is declared both as a class and as an entity")));
        }
    }
    Ok(())
}

fn check_triple(schema: &Schema, t: &Triple) -> Result<(), String> {
    let decl = schema
        .relations
        .get(&t.relation)
        .ok_or_else(|| format!("unknown relation `{}`", t.relation))?;
    let subject_classes = schema
        .class_membership
        .get(&t.subject)
        .ok_or_else(|| format!("unknown subject entity `{}`", t.subject))?;
    if !subject_classes.contains(&decl.domain) {
        return Err(format!(
            "`{}` is not in domain class `{}` of relation `{}`",
            t.subject, decl.domain, t.relation
        ));
    }
    match (&decl.range, &t.object) {
        (Range::Class(c), Object::Entity(o)) => {
            let classes = schema
                .class_membership
                .get(o)
                .ok_or_else(|| format!("unknown object entity `{o}`"))?;
            if !classes.contains(c) {
                return Err(format!("`{o}` is not in range class `{c}` of relation `{}`", t.relation));
            }
        }
        (Range::Literal(k), Object::Literal(l)) => {
            if l.kind() != *k {
                return Err(format!(
                    "relation `{}` expects {k} objects, got {}",
                    t.relation,
                    l.kind()
                ));
            }
        }
        (Range::Class(c), Object::Literal(l)) => {
            return Err(format!("relation `{}` expects `{c}` entities, got literal {l}", t.relation));
        }
        (Range::Literal(k), Object::Entity(o)) => {
            return Err(format!("relation `{}` expects {k} literals, got entity `{o}`", t.relation));
        }
    }
    Ok(())
}

fn parse_triples(text: &str, file: &str, schema: &Schema) -> Result<BTreeSet<Triple>, KbError> {
    let mut triples = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if is_comment_or_blank(raw) {
            continue;
        }
        let parse_err = |column: usize, message: String| KbError::Parse {
            file: file.to_string(),
            line: line_no,
            column,
            message,
        };
        let fields: Vec<&str> = raw.trim_end_matches('\r').splitn(3, '\t').collect();
        if fields.len() != 3 {
            return Err(parse_err(1, "expected subject<TAB>relation<TAB>object".into()));
        }
        let object_col = fields[0].len() + fields[1].len() + 3;
        for (i, f) in fields[..2].iter().enumerate() {
            if !valid_identifier(f) {
                let col = if i == 0 { 1 } else { fields[0].len() + 2 };
                return Err(parse_err(col, format!("invalid identifier `{f}`")));
            }
        }
        let obj_text = fields[2].trim_end();
        let object = if obj_text.starts_with('"') {
            match scan_surface(obj_text) {
                Some(Ok((lit, used))) if used == obj_text.len() => Object::Literal(lit),
                Some(Ok(_)) | None => return Err(parse_err(object_col, format!("malformed literal `{obj_text}`"))),
                Some(Err(e)) => return Err(parse_err(object_col, e.to_string())),
            }
        } else if valid_identifier(obj_text) {
            Object::Entity(obj_text.to_string())
        } else {
            return Err(parse_err(object_col, format!("invalid object `{obj_text}`")));
        };
        let triple = Triple { subject: fields[0].to_string(), relation: fields[1].to_string(), object };
        check_triple(schema, &triple).map_err(|message| KbError::SchemaViolation {
            file: file.to_string(),
            line: line_no,
            message,
        })?;
        triples.insert(triple);
    }
    Ok(triples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn mini_counts() {
        let kb = fixtures::mini();
        assert_eq!(kb.num_entities(), 6);
        assert_eq!(kb.classes().len(), 3);
        assert_eq!(kb.relations().len(), 3);
        assert_eq!(kb.triples().len(), 7);
    }

    #[test]
    fn empty_triples_keep_schema() {
        let kb = KnowledgeBase::from_strs("# nothing\n", fixtures::MINI_SCHEMA).unwrap();
        assert_eq!(kb.triples().len(), 0);
        assert_eq!(kb.num_entities(), 6);
        assert_eq!(kb.relations().len(), 3);
    }

    #[test]
    fn domain_violation() {
        let err = KnowledgeBase::from_strs("alice\temulates\tjava\n", fixtures::MINI_SCHEMA).unwrap_err();
        assert!(matches!(err, KbError::SchemaViolation { line: 1, .. }), "{err}");
        assert!(err.to_string().contains("Emulator"));
    }

    #[test]
    fn range_and_unknowns() {
        let schema = fixtures::MINI_SCHEMA;
        for bad in [
            "alice\tage\t\"42\"^^float\n",
            "alice\tage\tjava\n",
            "alice\tknows\talice\n",
            "alice\tlikes\tjava\n",
            "carol\tknows\tjava\n",
        ] {
            assert!(
                matches!(KnowledgeBase::from_strs(bad, schema), Err(KbError::SchemaViolation { .. })),
                "{bad:?}"
            );
        }
    }

    #[test]
    fn parse_errors_have_positions() {
        let err = KnowledgeBase::from_strs("alice knows java\n", fixtures::MINI_SCHEMA).unwrap_err();
        assert!(matches!(err, KbError::Parse { line: 1, .. }));
        let err = KnowledgeBase::from_strs("# c\nalice\tage\t\"4x\"^^integer\n", fixtures::MINI_SCHEMA).unwrap_err();
        match err {
            KbError::Parse { line, column, .. } => assert_eq!((line, column), (2, 11)),
            other => panic!("{other}"),
        }
        let err = KnowledgeBase::from_strs("", "class A\nbogus A\n").unwrap_err();
        assert!(matches!(err, KbError::Parse { line: 2, column: 1, .. }));
    }

    #[test]
    fn duplicate_declarations() {
        for schema in ["class A\nclass A\n", "class A\nrelation r A A\nrelation r A A\n", "class A\ntype x A\ntype x A\n"] {
            assert!(matches!(KnowledgeBase::from_strs("", schema), Err(KbError::DuplicateDeclaration { .. })));
        }
    }

    #[test]
    fn class_entity_collision_rejected() {
        assert!(KnowledgeBase::from_strs("", "class A\ntype A A\n").is_err());
    }

    #[test]
    fn relations_from_mini() {
        let kb = fixtures::mini();
        assert_eq!(kb.relations_from(&set(&["java"]), Direction::Backward).unwrap(), set(&["emulates", "knows"]));
        assert!(kb.relations_from(&set(&["java"]), Direction::Forward).unwrap().is_empty());
        assert!(kb.relations_from(&set(&[]), Direction::Forward).unwrap().is_empty());
        assert!(matches!(
            kb.relations_from(&set(&["cobol"]), Direction::Forward),
            Err(KbError::UnknownEntity(_))
        ));
    }

    #[test]
    fn classes_of_mini() {
        let kb = fixtures::mini();
        assert_eq!(kb.classes_of(&set(&["emu1", "emu2"])).unwrap(), set(&["Emulator"]));
        assert_eq!(kb.classes_of(&set(&["alice", "java"])).unwrap(), set(&["Person", "Language"]));
        assert!(kb.classes_of(&set(&[])).unwrap().is_empty());
        assert!(kb.classes_of(&set(&["nobody"])).is_err());
    }

    #[test]
    fn follow_mini() {
        let kb = fixtures::mini();
        let ents = |xs: &[&str]| xs.iter().map(|s| Object::Entity(s.to_string())).collect::<BTreeSet<_>>();
        assert_eq!(kb.follow(&set(&["java"]), "emulates", Direction::Backward).unwrap(), ents(&["emu1", "emu2"]));
        assert_eq!(
            kb.follow(&set(&["alice"]), "age", Direction::Forward).unwrap(),
            BTreeSet::from([Object::Literal(Literal::integer(42))])
        );
        assert!(kb.follow(&set(&["basic"]), "age", Direction::Backward).unwrap().is_empty());
        assert!(matches!(
            kb.follow(&set(&["java"]), "likes", Direction::Backward),
            Err(KbError::UnknownRelation(_))
        ));
    }

    #[test]
    fn to_strings_reloads_identically() {
        let kb = fixtures::mini();
        let (t, s) = kb.to_strings();
        assert_eq!(KnowledgeBase::from_strs(&t, &s).unwrap(), kb);
    }
}
