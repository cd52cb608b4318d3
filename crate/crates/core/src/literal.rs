//! Typed literal values and their `"lexical"^^kind` surface form.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use ordered_float::NotNan;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LiteralError {
    #[error("unknown literal kind `{0}`")]
    UnknownKind(String),
    #[error("invalid {kind} lexical form `{lexical}`")]
    BadLexical { kind: LiteralKind, lexical: String },
    #[error("malformed literal `{0}`; expected \"lexical\"^^kind")]
    Malformed(String),
}

/// The four literal kinds a relation range or a literal leaf may carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiteralKind {
    Integer,
    Float,
    String,
    Date,
}

impl LiteralKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LiteralKind::Integer => "integer",
            LiteralKind::Float => "float",
            LiteralKind::String => "string",
            LiteralKind::Date => "date",
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, LiteralKind::Integer | LiteralKind::Float)
    }

    /// Kinds that support `<`, `>` and superlatives.
    pub fn is_ordered(self) -> bool {
        self != LiteralKind::String
    }

    /// Whether values of the two kinds can be compared with each other.
    pub fn comparable_with(self, other: LiteralKind) -> bool {
        (self.is_numeric() && other.is_numeric()) || (self == LiteralKind::Date && other == LiteralKind::Date)
    }
}

impl fmt::Display for LiteralKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LiteralKind {
    type Err = LiteralError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "integer" => Ok(LiteralKind::Integer),
            "float" => Ok(LiteralKind::Float),
            "string" => Ok(LiteralKind::String),
            "date" => Ok(LiteralKind::Date),
            other => Err(LiteralError::UnknownKind(other.to_string())),
        }
    }
}

/// A literal value. Equality and hashing are by `(kind, value)`; the derived
/// `Ord` is a storage order (kind first), not the comparison used by
/// comparatives, see [`Literal::compare_value`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Literal {
    Integer(i64),
    Float(NotNan<f64>),
    String(String),
    Date(NaiveDate),
}

impl Literal {
    pub fn parse(kind: LiteralKind, lexical: &str) -> Result<Self, LiteralError> {
        let bad = || LiteralError::BadLexical { kind, lexical: lexical.to_string() };
        match kind {
            LiteralKind::Integer => lexical.trim().parse::<i64>().map(Literal::Integer).map_err(|_| bad()),
            LiteralKind::Float => {
                let v: f64 = lexical.trim().parse().map_err(|_| bad())?;
                if !v.is_finite() {
                    return Err(bad());
                }
                // -0.0 and 0.0 are the same value.
                let v = if v == 0.0 { 0.0 } else { v };
                Ok(Literal::Float(NotNan::new(v).map_err(|_| bad())?))
            }
            LiteralKind::String => Ok(Literal::String(lexical.to_string())),
            LiteralKind::Date => NaiveDate::parse_from_str(lexical.trim(), "%Y-%m-%d")
                .map(Literal::Date)
                .map_err(|_| bad()),
        }
    }

    pub fn integer(v: i64) -> Self {
        Literal::Integer(v)
    }

    pub fn float(v: f64) -> Option<Self> {
        Literal::parse(LiteralKind::Float, &v.to_string()).ok()
    }

    pub fn kind(&self) -> LiteralKind {
        match self {
            Literal::Integer(_) => LiteralKind::Integer,
            Literal::Float(_) => LiteralKind::Float,
            Literal::String(_) => LiteralKind::String,
            Literal::Date(_) => LiteralKind::Date,
        }
    }

    /// Canonical text form; `Literal::parse(kind, &lexical)` gives back `self`.
    pub fn lexical(&self) -> String {
        match self {
            Literal::Integer(v) => v.to_string(),
            Literal::Float(v) => v.into_inner().to_string(),
            Literal::String(s) => s.clone(),
            Literal::Date(d) => d.format("%Y-%m-%d").to_string(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Literal::Integer(v) => Some(*v as f64),
            Literal::Float(v) => Some(v.into_inner()),
            _ => None,
        }
    }

    /// Value comparison: numeric kinds compare numerically across integer and
    /// float, dates chronologically. `None` for incomparable kinds.
    pub fn compare_value(&self, other: &Literal) -> Option<Ordering> {
        match (self, other) {
            (Literal::Integer(a), Literal::Integer(b)) => Some(a.cmp(b)),
            (Literal::Date(a), Literal::Date(b)) => Some(a.cmp(b)),
            _ => {
                let (a, b) = (self.as_f64()?, other.as_f64()?);
                a.partial_cmp(&b)
            }
        }
    }

    /// The `"lexical"^^kind` form used in triples files and plans.
    pub fn to_surface(&self) -> String {
        let mut out = String::with_capacity(16);
        out.push('"');
        for c in self.lexical().chars() {
            if c == '"' || c == '\\' {
                out.push('\\');
            }
            out.push(c);
        }
        out.push_str("\"^^");
        out.push_str(self.kind().as_str());
        out
    }

    /// Parse a complete `"lexical"^^kind` token.
    pub fn from_surface(text: &str) -> Result<Self, LiteralError> {
        let (lit, used) = scan_surface(text).ok_or_else(|| LiteralError::Malformed(text.to_string()))??;
        if used != text.len() {
            return Err(LiteralError::Malformed(text.to_string()));
        }
        Ok(lit)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_surface())
    }
}

/// Scan a literal at the start of `text`. Returns `None` if `text` does not
/// start with a quote or the quoted section / `^^kind` suffix is incomplete;
/// otherwise the parsed literal and the number of bytes consumed.
pub(crate) fn scan_surface(text: &str) -> Option<Result<(Literal, usize), LiteralError>> {
    let mut chars = text.char_indices();
    if chars.next()?.1 != '"' {
        return None;
    }
    let mut lexical = String::new();
    let mut end_quote = None;
    while let Some((i, c)) = chars.next() {
        match c {
            '\\' => lexical.push(chars.next()?.1),
            '"' => {
                end_quote = Some(i);
                break;
            }
            c => lexical.push(c),
        }
    }
    let rest = &text[end_quote? + 1..];
    let rest = rest.strip_prefix("^^")?;
    let kind_len = rest
        .find(|c: char| !c.is_ascii_alphanumeric())
        .unwrap_or(rest.len());
    if kind_len == 0 {
        return None;
    }
    let consumed = text.len() - rest.len() + kind_len;
    Some(
        rest[..kind_len]
            .parse::<LiteralKind>()
            .and_then(|kind| Literal::parse(kind, &lexical))
            .map(|lit| (lit, consumed)),
    )
}
