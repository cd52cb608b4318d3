//! The S-expression plan language.
//!
//! Surface syntax:
//!
//! ```text
//! plan   := IDENT | LITERAL | "(" FUNC arg* ")"
//! LITERAL:= "\"" lexical "\"^^" kind
//! ```
//!
//! with per-function argument shapes `(JOIN rel plan)`, `(AND plan plan)`,
//! `(ARGMAX plan rel)`, `(ARGMIN plan rel)`, `(LT|LE|GT|GE rel plan)` and
//! `(COUNT plan)`. A JOIN relation suffixed with `~` is traversed forward
//! (subject to object); the bare form goes from objects back to subjects.
//!
//! Bare identifiers in plan position name either an entity or a class. The
//! syntax cannot tell the two apart, so the AST keeps a single
//! [`Plan::Symbol`] leaf and the KB resolves it during type checking.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::kb::{Direction, KnowledgeBase, Range, RelationId};
use crate::literal::{scan_surface, Literal, LiteralKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("{function} expects {expected} arguments, found {found}")]
    Arity { function: Function, expected: usize, found: usize },
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("type error in `{subexpr}`: {message}")]
    Type { subexpr: String, message: String },
    #[error("gold plan `{0}` has no function application")]
    DegenerateGold(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Function {
    Join,
    And,
    ArgMax,
    ArgMin,
    Lt,
    Le,
    Gt,
    Ge,
    Count,
}

impl Function {
    pub const ALL: [Function; 9] = [
        Function::Join,
        Function::And,
        Function::ArgMax,
        Function::ArgMin,
        Function::Lt,
        Function::Le,
        Function::Gt,
        Function::Ge,
        Function::Count,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Function::Join => "JOIN",
            Function::And => "AND",
            Function::ArgMax => "ARGMAX",
            Function::ArgMin => "ARGMIN",
            Function::Lt => "LT",
            Function::Le => "LE",
            Function::Gt => "GT",
            Function::Ge => "GE",
            Function::Count => "COUNT",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Function::Count => 1,
            _ => 2,
        }
    }

    pub fn index(self) -> usize {
        Function::ALL.iter().position(|f| *f == self).unwrap()
    }
}

impl fmt::Display for Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Function {
    type Err = PlanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Function::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| PlanError::UnknownFunction(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Extremum {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparison {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparison {
    pub const ALL: [Comparison; 4] = [Comparison::Lt, Comparison::Le, Comparison::Gt, Comparison::Ge];

    pub fn function(self) -> Function {
        match self {
            Comparison::Lt => Function::Lt,
            Comparison::Le => Function::Le,
            Comparison::Gt => Function::Gt,
            Comparison::Ge => Function::Ge,
        }
    }

    /// Whether `value op bound` holds given `value.cmp(bound)`.
    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            Comparison::Lt => ord == Ordering::Less,
            Comparison::Le => ord != Ordering::Greater,
            Comparison::Gt => ord == Ordering::Greater,
            Comparison::Ge => ord != Ordering::Less,
        }
    }
}

/// A relation reference inside JOIN: name plus traversal direction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RelationRef {
    pub name: RelationId,
    pub direction: Direction,
}

impl RelationRef {
    pub fn backward(name: impl Into<String>) -> Self {
        Self { name: name.into(), direction: Direction::Backward }
    }

    pub fn forward(name: impl Into<String>) -> Self {
        Self { name: name.into(), direction: Direction::Forward }
    }
}

impl fmt::Display for RelationRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if self.direction == Direction::Forward {
            f.write_str("~")?;
        }
        Ok(())
    }
}

/// Plan AST. Build `And` nodes through [`Plan::and`] so operands are stored
/// in canonical order; structural equality then coincides with equality of
/// canonical renderings.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Plan {
    /// An entity or class identifier.
    Symbol(String),
    Literal(Literal),
    Join { relation: RelationRef, arg: Box<Plan> },
    And(Box<Plan>, Box<Plan>),
    Superlative { extremum: Extremum, arg: Box<Plan>, relation: RelationId },
    Compare { op: Comparison, relation: RelationId, value: Box<Plan> },
    Count(Box<Plan>),
}

impl Plan {
    pub fn symbol(id: impl Into<String>) -> Self {
        Plan::Symbol(id.into())
    }

    pub fn join(relation: RelationRef, arg: Plan) -> Self {
        Plan::Join { relation, arg: Box::new(arg) }
    }

    pub fn and(a: Plan, b: Plan) -> Self {
        if and_operand_order(&a, &b) == Ordering::Greater {
            Plan::And(Box::new(b), Box::new(a))
        } else {
            Plan::And(Box::new(a), Box::new(b))
        }
    }

    pub fn superlative(extremum: Extremum, arg: Plan, relation: impl Into<String>) -> Self {
        Plan::Superlative { extremum, arg: Box::new(arg), relation: relation.into() }
    }

    pub fn compare(op: Comparison, relation: impl Into<String>, value: Plan) -> Self {
        Plan::Compare { op, relation: relation.into(), value: Box::new(value) }
    }

    pub fn count(arg: Plan) -> Self {
        Plan::Count(Box::new(arg))
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Plan::Symbol(_) | Plan::Literal(_))
    }

    /// Root function, `None` for leaves.
    pub fn function(&self) -> Option<Function> {
        Some(match self {
            Plan::Symbol(_) | Plan::Literal(_) => return None,
            Plan::Join { .. } => Function::Join,
            Plan::And(..) => Function::And,
            Plan::Superlative { extremum: Extremum::Max, .. } => Function::ArgMax,
            Plan::Superlative { extremum: Extremum::Min, .. } => Function::ArgMin,
            Plan::Compare { op, .. } => op.function(),
            Plan::Count(_) => Function::Count,
        })
    }

    /// Plan-valued children, in argument order.
    pub fn children(&self) -> Vec<&Plan> {
        match self {
            Plan::Symbol(_) | Plan::Literal(_) => vec![],
            Plan::Join { arg, .. } | Plan::Superlative { arg, .. } | Plan::Count(arg) => vec![arg],
            Plan::Compare { value, .. } => vec![value],
            Plan::And(a, b) => vec![a, b],
        }
    }

    /// Number of function applications; leaves have length 0.
    pub fn length(&self) -> usize {
        match self {
            Plan::Symbol(_) | Plan::Literal(_) => 0,
            _ => 1 + self.children().into_iter().map(Plan::length).sum::<usize>(),
        }
    }

    /// Every subexpression, the plan itself first (pre-order).
    pub fn subplans(&self) -> Vec<&Plan> {
        let mut out = vec![self];
        let mut i = 0;
        while i < out.len() {
            let kids = out[i].children();
            out.extend(kids);
            i += 1;
        }
        out
    }

    /// Relation names referenced anywhere in the plan, with repeats.
    pub fn relation_names(&self) -> Vec<&str> {
        self.subplans()
            .into_iter()
            .filter_map(|p| match p {
                Plan::Join { relation, .. } => Some(relation.name.as_str()),
                Plan::Superlative { relation, .. } | Plan::Compare { relation, .. } => Some(relation.as_str()),
                _ => None,
            })
            .collect()
    }

    /// Canonical text form.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(&mut out);
        out
    }

    fn render_into(&self, out: &mut String) {
        match self {
            Plan::Symbol(s) => out.push_str(s),
            Plan::Literal(l) => out.push_str(&l.to_surface()),
            Plan::Join { relation, arg } => {
                out.push_str(&format!("(JOIN {relation} "));
                arg.render_into(out);
                out.push(')');
            }
            Plan::And(a, b) => {
                let (ra, rb) = (a.render(), b.render());
                let swap = b.is_leaf().cmp(&a.is_leaf()).then_with(|| ra.cmp(&rb)) == Ordering::Greater;
                let (first, second) = if swap { (rb, ra) } else { (ra, rb) };
                out.push_str("(AND ");
                out.push_str(&first);
                out.push(' ');
                out.push_str(&second);
                out.push(')');
            }
            Plan::Superlative { extremum, arg, relation } => {
                out.push_str(if *extremum == Extremum::Max { "(ARGMAX " } else { "(ARGMIN " });
                arg.render_into(out);
                out.push(' ');
                out.push_str(relation);
                out.push(')');
            }
            Plan::Compare { op, relation, value } => {
                out.push_str(&format!("({} {relation} ", op.function()));
                value.render_into(out);
                out.push(')');
            }
            Plan::Count(arg) => {
                out.push_str("(COUNT ");
                arg.render_into(out);
                out.push(')');
            }
        }
    }

    /// Rebuild with every AND in canonical operand order.
    pub fn canonicalize(&self) -> Plan {
        match self {
            Plan::Symbol(_) | Plan::Literal(_) => self.clone(),
            Plan::Join { relation, arg } => Plan::join(relation.clone(), arg.canonicalize()),
            Plan::And(a, b) => Plan::and(a.canonicalize(), b.canonicalize()),
            Plan::Superlative { extremum, arg, relation } => Plan::superlative(*extremum, arg.canonicalize(), relation),
            Plan::Compare { op, relation, value } => Plan::compare(*op, relation, value.canonicalize()),
            Plan::Count(arg) => Plan::count(arg.canonicalize()),
        }
    }
}

/// AND operands: leaves before applications, then by rendered text.
fn and_operand_order(a: &Plan, b: &Plan) -> Ordering {
    a.is_leaf()
        .cmp(&b.is_leaf())
        .reverse()
        .then_with(|| a.render().cmp(&b.render()))
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl FromStr for Plan {
    type Err = PlanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_plan(s)
    }
}

impl Serialize for Plan {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.render())
    }
}

impl<'de> Deserialize<'de> for Plan {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_plan(&s).map_err(serde::de::Error::custom)
    }
}

/// Orders plans by canonical rendering.
pub fn canonical_cmp(a: &Plan, b: &Plan) -> Ordering {
    a.render().cmp(&b.render())
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug)]
enum SExpr {
    Atom { text: String, pos: usize },
    Lit { lit: Literal },
    List { items: Vec<SExpr>, pos: usize },
}

impl SExpr {
    fn pos(&self) -> usize {
        match self {
            SExpr::Atom { pos, .. } | SExpr::List { pos, .. } => *pos,
            SExpr::Lit { .. } => 0,
        }
    }
}

struct Reader<'a> {
    text: &'a str,
    at: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, position: usize, message: impl Into<String>) -> PlanError {
        // Positions are reported 1-based.
        PlanError::Syntax { position: position + 1, message: message.into() }
    }

    fn skip_ws(&mut self) {
        let rest = &self.text[self.at..];
        self.at += rest.len() - rest.trim_start().len();
    }

    fn read(&mut self) -> Result<SExpr, PlanError> {
        self.skip_ws();
        let start = self.at;
        let rest = &self.text[start..];
        match rest.chars().next() {
            None => Err(self.err(start, "unexpected end of input")),
            Some(')') => Err(self.err(start, "unexpected `)`")),
            Some('(') => {
                self.at += 1;
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    match self.text[self.at..].chars().next() {
                        None => return Err(self.err(self.at, "unclosed `(`")),
                        Some(')') => {
                            self.at += 1;
                            return Ok(SExpr::List { items, pos: start });
                        }
                        Some(_) => items.push(self.read()?),
                    }
                }
            }
            Some('"') => match scan_surface(rest) {
                Some(Ok((lit, used))) => {
                    self.at += used;
                    Ok(SExpr::Lit { lit })
                }
                Some(Err(e)) => Err(self.err(start, e.to_string())),
                None => Err(self.err(start, "malformed literal; expected \"lexical\"^^kind")),
            },
            Some(_) => {
                let len = rest
                    .find(|c: char| c.is_whitespace() || c == '(' || c == ')' || c == '"')
                    .unwrap_or(rest.len());
                self.at += len;
                Ok(SExpr::Atom { text: rest[..len].to_string(), pos: start })
            }
        }
    }
}

/// Parse a plan from its surface syntax.
pub fn parse_plan(text: &str) -> Result<Plan, PlanError> {
    let mut reader = Reader { text, at: 0 };
    let sexpr = reader.read()?;
    reader.skip_ws();
    if reader.at != text.len() {
        return Err(reader.err(reader.at, "trailing input after plan"));
    }
    to_plan(&sexpr, &reader)
}

fn to_plan(expr: &SExpr, r: &Reader<'_>) -> Result<Plan, PlanError> {
    match expr {
        SExpr::Lit { lit } => Ok(Plan::Literal(lit.clone())),
        SExpr::Atom { text, pos } => {
            if text.ends_with('~') {
                return Err(r.err(*pos, format!("`{text}`: `~` is only allowed on JOIN relations")));
            }
            Ok(Plan::Symbol(text.clone()))
        }
        SExpr::List { items, pos } => {
            let (head, args) = items.split_first().ok_or_else(|| r.err(*pos, "empty application"))?;
            let function = match head {
                SExpr::Atom { text, .. } => text.parse::<Function>()?,
                other => return Err(r.err(other.pos().max(*pos + 1), "expected a function name")),
            };
            if args.len() != function.arity() {
                return Err(PlanError::Arity { function, expected: function.arity(), found: args.len() });
            }
            let plan_arg = |e: &SExpr| to_plan(e, r);
            let relation_arg = |e: &SExpr, allow_inverse: bool| -> Result<RelationRef, PlanError> {
                match e {
                    SExpr::Atom { text, pos } => match text.strip_suffix('~') {
                        Some(name) if allow_inverse && !name.is_empty() && !name.ends_with('~') => {
                            Ok(RelationRef::forward(name))
                        }
                        Some(_) => Err(r.err(*pos, format!("invalid relation `{text}`"))),
                        None => Ok(RelationRef::backward(text.clone())),
                    },
                    other => Err(r.err(other.pos().max(*pos + 1), format!("{function} expects a relation here"))),
                }
            };
            Ok(match function {
                Function::Join => Plan::join(relation_arg(&args[0], true)?, plan_arg(&args[1])?),
                Function::And => Plan::and(plan_arg(&args[0])?, plan_arg(&args[1])?),
                Function::ArgMax | Function::ArgMin => {
                    let extremum = if function == Function::ArgMax { Extremum::Max } else { Extremum::Min };
                    Plan::superlative(extremum, plan_arg(&args[0])?, relation_arg(&args[1], false)?.name)
                }
                Function::Lt | Function::Le | Function::Gt | Function::Ge => {
                    let op = Comparison::ALL.into_iter().find(|c| c.function() == function).unwrap();
                    Plan::compare(op, relation_arg(&args[0], false)?.name, plan_arg(&args[1])?)
                }
                Function::Count => Plan::count(plan_arg(&args[0])?),
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Type checking

/// Result type of a well-typed plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultType {
    EntitySet,
    LiteralSet(LiteralKind),
    Integer,
}

/// Internal sort: class leaves are entity sets that only some functions accept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sort {
    Class,
    Entities,
    Literals(LiteralKind),
    Integer,
}

impl Sort {
    fn describe(self) -> String {
        match self {
            Sort::Class => "a class".into(),
            Sort::Entities => "an entity set".into(),
            Sort::Literals(k) => format!("a {k} literal set"),
            Sort::Integer => "an integer".into(),
        }
    }
}

/// Type-check `plan` against the signatures and the KB's schema.
pub fn type_check(plan: &Plan, kb: &KnowledgeBase) -> Result<ResultType, PlanError> {
    Ok(match sort_of(plan, kb)? {
        Sort::Class | Sort::Entities => ResultType::EntitySet,
        Sort::Literals(k) => ResultType::LiteralSet(k),
        Sort::Integer => ResultType::Integer,
    })
}

fn sort_of(plan: &Plan, kb: &KnowledgeBase) -> Result<Sort, PlanError> {
    let type_err = |message: String| PlanError::Type { subexpr: plan.render(), message };
    let relation = |name: &str| kb.relation(name).map_err(|_| PlanError::UnknownIdentifier(name.to_string()));
    match plan {
        Plan::Symbol(s) => {
            if kb.has_entity(s) {
                Ok(Sort::Entities)
            } else if kb.has_class(s) {
                Ok(Sort::Class)
            } else {
                Err(PlanError::UnknownIdentifier(s.clone()))
            }
        }
        Plan::Literal(l) => Ok(Sort::Literals(l.kind())),
        Plan::Join { relation: rel, arg } => {
            let decl = relation(&rel.name)?;
            let arg_sort = sort_of(arg, kb)?;
            if arg_sort != Sort::Entities {
                return Err(type_err(format!("JOIN needs an entity set, got {}", arg_sort.describe())));
            }
            match (rel.direction, &decl.range) {
                (Direction::Backward, Range::Class(_)) => Ok(Sort::Entities),
                (Direction::Backward, Range::Literal(k)) => Err(type_err(format!(
                    "relation `{}` has {k} range; traverse it forward with `{}~`",
                    rel.name, rel.name
                ))),
                (Direction::Forward, Range::Class(_)) => Ok(Sort::Entities),
                (Direction::Forward, Range::Literal(k)) => Ok(Sort::Literals(*k)),
            }
        }
        Plan::And(a, b) => {
            let (sa, sb) = (sort_of(a, kb)?, sort_of(b, kb)?);
            for s in [sa, sb] {
                if !matches!(s, Sort::Class | Sort::Entities) {
                    return Err(type_err(format!("AND operands must be entity sets, got {}", s.describe())));
                }
            }
            if sa == Sort::Class && sb == Sort::Class {
                return Err(type_err("AND takes at most one class operand".into()));
            }
            Ok(Sort::Entities)
        }
        Plan::Superlative { arg, relation: r, .. } => {
            let decl = relation(r)?;
            let s = sort_of(arg, kb)?;
            if !matches!(s, Sort::Class | Sort::Entities) {
                return Err(type_err(format!("superlatives need an entity set or class, got {}", s.describe())));
            }
            if !decl.is_ordered() {
                return Err(type_err(format!("relation `{r}` has no ordered literal range")));
            }
            Ok(Sort::Entities)
        }
        Plan::Compare { relation: r, value, .. } => {
            let decl = relation(r)?;
            let range = match decl.literal_range() {
                Some(k) if k.is_ordered() => k,
                _ => return Err(type_err(format!("relation `{r}` has no ordered literal range"))),
            };
            match sort_of(value, kb)? {
                Sort::Literals(k) if k.comparable_with(range) => Ok(Sort::Entities),
                other => Err(type_err(format!("cannot compare {range} values of `{r}` with {}", other.describe()))),
            }
        }
        Plan::Count(arg) => match sort_of(arg, kb)? {
            Sort::Entities => Ok(Sort::Integer),
            other => Err(type_err(format!("COUNT needs an entity set, got {}", other.describe()))),
        },
    }
}

// ---------------------------------------------------------------------------
// Gold decomposition

/// Gold sub-plans of a target, grouped by length: `step(t)` holds every
/// distinct function-rooted subexpression of length `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldDecomposition {
    steps: Vec<Vec<Plan>>,
    target: Plan,
}

impl GoldDecomposition {
    pub fn derive(target: &Plan) -> Result<Self, PlanError> {
        let target = target.canonicalize();
        let len = target.length();
        if len == 0 {
            return Err(PlanError::DegenerateGold(target.render()));
        }
        let mut by_len: BTreeMap<usize, BTreeMap<String, Plan>> = BTreeMap::new();
        for sub in target.subplans() {
            if !sub.is_leaf() {
                by_len.entry(sub.length()).or_default().insert(sub.render(), sub.clone());
            }
        }
        let steps = (1..=len)
            .map(|t| by_len.remove(&t).map(|m| m.into_values().collect()).unwrap_or_default())
            .collect();
        Ok(Self { steps, target })
    }

    pub fn target(&self) -> &Plan {
        &self.target
    }

    /// T, the target's length.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// G_t for `t` in `1..=T`; empty outside that range.
    pub fn step(&self, t: usize) -> &[Plan] {
        if t == 0 || t > self.steps.len() {
            return &[];
        }
        &self.steps[t - 1]
    }

    /// Canonical renderings of all gold sub-plans of length `<= t`.
    pub fn renders_up_to(&self, t: usize) -> BTreeSet<String> {
        (1..=t.min(self.len())).flat_map(|i| self.step(i).iter().map(Plan::render)).collect()
    }

    /// All gold sub-plans of length `<= t`.
    pub fn up_to(&self, t: usize) -> impl Iterator<Item = &Plan> {
        (1..=t.min(self.len())).flat_map(move |i| self.step(i).iter())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn p(s: &str) -> Plan {
        parse_plan(s).unwrap()
    }

    #[test]
    fn parse_join() {
        assert_eq!(
            p("(JOIN emulates java)"),
            Plan::join(RelationRef::backward("emulates"), Plan::symbol("java"))
        );
        assert_eq!(
            p("(JOIN emulates~ emu2)"),
            Plan::join(RelationRef::forward("emulates"), Plan::symbol("emu2"))
        );
    }

    #[test]
    fn parse_nested_length() {
        let plan = p("(COUNT (AND Emulator (JOIN emulates java)))");
        assert_eq!(plan.length(), 3);
        assert_eq!(plan.function(), Some(Function::Count));
    }

    #[test]
    fn arity_errors() {
        assert_eq!(
            parse_plan("(JOIN emulates)"),
            Err(PlanError::Arity { function: Function::Join, expected: 2, found: 1 })
        );
        assert!(matches!(parse_plan("(COUNT a b)"), Err(PlanError::Arity { .. })));
        assert!(matches!(parse_plan("(AND a)"), Err(PlanError::Arity { .. })));
    }

    #[test]
    fn syntax_errors() {
        assert_eq!(parse_plan("(FOO a b)"), Err(PlanError::UnknownFunction("FOO".into())));
        for bad in ["", "(JOIN r a", "(JOIN r a))", ")", "()", "(JOIN (r) a)", "(ARGMAX a r~)", "java~", "(JOIN r \"x\")"] {
            assert!(matches!(parse_plan(bad), Err(PlanError::Syntax { .. })), "{bad:?}");
        }
        match parse_plan("(JOIN emulates java) x") {
            Err(PlanError::Syntax { position, .. }) => assert_eq!(position, 22),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn render_sorts_and_operands() {
        let a = p("(JOIN knows basic)");
        let b = p("(JOIN knows java)");
        assert_eq!(Plan::and(b.clone(), a.clone()).render(), "(AND (JOIN knows basic) (JOIN knows java))");
        let raw = Plan::And(Box::new(b), Box::new(a));
        assert_eq!(raw.render(), "(AND (JOIN knows basic) (JOIN knows java))");
        assert_eq!(p("(AND (JOIN emulates java) Emulator)").render(), "(AND Emulator (JOIN emulates java))");
        assert_eq!(p("(AND java Language)").render(), "(AND Language java)");
    }

    #[test]
    fn render_leaves_and_literals() {
        assert_eq!(p("java").render(), "java");
        assert_eq!(p("(GT age \"40\"^^integer)").render(), "(GT age \"40\"^^integer)");
        assert_eq!(p("(GT age \"040\"^^integer)").render(), "(GT age \"40\"^^integer)");
        assert_eq!(p("  (ARGMAX   Person age ) ").render(), "(ARGMAX Person age)");
    }

    #[test]
    fn lengths() {
        assert_eq!(p("java").length(), 0);
        assert_eq!(p("(JOIN emulates java)").length(), 1);
        assert_eq!(p("(COUNT (AND Emulator (JOIN emulates java)))").length(), 3);
    }

    #[test]
    fn type_checks() {
        let kb = fixtures::mini();
        let tc = |s: &str| type_check(&p(s), &kb);
        assert_eq!(tc("(JOIN emulates java)"), Ok(ResultType::EntitySet));
        assert_eq!(tc("(COUNT (JOIN emulates java))"), Ok(ResultType::Integer));
        assert_eq!(tc("(JOIN age~ alice)"), Ok(ResultType::LiteralSet(LiteralKind::Integer)));
        assert_eq!(tc("(ARGMAX Person age)"), Ok(ResultType::EntitySet));
        assert_eq!(tc("(GT age \"40.5\"^^float)"), Ok(ResultType::EntitySet));
        assert_eq!(tc("Person"), Ok(ResultType::EntitySet));
        match tc("(AND Person (COUNT java))") {
            Err(PlanError::Type { subexpr, .. }) => assert_eq!(subexpr, "(AND Person (COUNT java))"),
            other => panic!("{other:?}"),
        }
        for bad in [
            "(AND Person Language)",
            "(JOIN knows Language)",
            "(JOIN age alice)",
            "(ARGMAX Person knows)",
            "(GT age \"x\"^^string)",
            "(GT age \"2020-01-01\"^^date)",
            "(COUNT (JOIN age~ alice))",
            "(COUNT Person)",
            "(JOIN knows (COUNT java))",
        ] {
            assert!(matches!(tc(bad), Err(PlanError::Type { .. })), "{bad}");
        }
        assert_eq!(tc("(JOIN likes java)"), Err(PlanError::UnknownIdentifier("likes".into())));
        assert_eq!(tc("cobol"), Err(PlanError::UnknownIdentifier("cobol".into())));
    }

    #[test]
    fn gold_decomposition_chain() {
        let gold = GoldDecomposition::derive(&p("(COUNT (AND Emulator (JOIN emulates java)))")).unwrap();
        assert_eq!(gold.len(), 3);
        assert_eq!(gold.step(1), [p("(JOIN emulates java)")]);
        assert_eq!(gold.step(2), [p("(AND Emulator (JOIN emulates java))")]);
        assert_eq!(gold.step(3), [p("(COUNT (AND Emulator (JOIN emulates java)))")]);
        assert!(gold.step(4).is_empty());
    }

    #[test]
    fn gold_decomposition_single_and_branching() {
        let gold = GoldDecomposition::derive(&p("(JOIN knows java)")).unwrap();
        assert_eq!(gold.len(), 1);
        assert_eq!(gold.step(1), [p("(JOIN knows java)")]);

        let gold = GoldDecomposition::derive(&p("(AND (JOIN knows java) (JOIN knows basic))")).unwrap();
        assert_eq!(gold.step(1).len(), 2);
        assert!(gold.step(2).is_empty());
        assert_eq!(gold.step(3), [p("(AND (JOIN knows basic) (JOIN knows java))")]);

        assert_eq!(GoldDecomposition::derive(&p("java")), Err(PlanError::DegenerateGold("java".into())));
    }
}
