//! Typed domains, values, guard ASTs, guard parsing and evaluation, and
//! constant extraction.
//!
//! Guards are negation-free boolean combinations of definedness atoms and
//! variable-vs-constant comparisons. A read occurrence is written as a bare
//! identifier, a write occurrence carries a trailing prime (`amount'`).

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;

use ordered_float::NotNan;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The four variable kinds and the comparison predicates each permits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Int,
    Real,
    Bool,
    #[serde(rename = "string")]
    Str,
}

impl DomainKind {
    pub fn is_numeric(self) -> bool {
        matches!(self, DomainKind::Int | DomainKind::Real)
    }

    /// Whether the comparison symbol belongs to this kind's predicate set.
    /// Integers and reals permit `< > = ≠`, booleans `= ≠`, strings `=` only.
    pub fn permits(self, cmp: Cmp) -> bool {
        match self {
            DomainKind::Int | DomainKind::Real => true,
            DomainKind::Bool => matches!(cmp, Cmp::Eq | Cmp::Neq),
            DomainKind::Str => matches!(cmp, Cmp::Eq),
        }
    }
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DomainKind::Int => "int",
            DomainKind::Real => "real",
            DomainKind::Bool => "bool",
            DomainKind::Str => "string",
        };
        f.write_str(s)
    }
}

/// A runtime value. `Undefined` belongs to every variable's value space but
/// never to a domain; writes never produce it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Real(NotNan<f64>),
    Str(String),
    Undefined,
}

impl Value {
    pub fn real(x: f64) -> Value {
        Value::Real(NotNan::new(x).expect("real value must not be NaN"))
    }

    pub fn is_undefined(&self) -> bool {
        matches!(self, Value::Undefined)
    }

    /// The kind of a defined value; `None` for `Undefined`.
    pub fn kind(&self) -> Option<DomainKind> {
        match self {
            Value::Int(_) => Some(DomainKind::Int),
            Value::Real(_) => Some(DomainKind::Real),
            Value::Bool(_) => Some(DomainKind::Bool),
            Value::Str(_) => Some(DomainKind::Str),
            Value::Undefined => None,
        }
    }

    /// Whether this value may be assigned to a variable of kind `kind`
    /// (undefined is allowed everywhere).
    pub fn fits(&self, kind: DomainKind) -> bool {
        self.kind().map_or(true, |k| k == kind)
    }
}

// Total order: undefined first, then by tag, then within kind. Used for
// canonical multiset sorting and deterministic enumeration.
impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        fn tag(v: &Value) -> u8 {
            match v {
                Value::Undefined => 0,
                Value::Bool(_) => 1,
                Value::Int(_) => 2,
                Value::Real(_) => 3,
                Value::Str(_) => 4,
            }
        }
        match (self, other) {
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Real(a), Value::Real(b)) => a.cmp(b),
            (Value::Str(a), Value::Str(b)) => a.cmp(b),
            (a, b) => tag(a).cmp(&tag(b)),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Real(x) => {
                if x.fract() == 0.0 {
                    write!(f, "{:.1}", x.into_inner())
                } else {
                    write!(f, "{}", x.into_inner())
                }
            }
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Undefined => f.write_str("⊥"),
        }
    }
}

/// Binary comparison predicates of the guard language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cmp {
    Lt,
    Gt,
    Eq,
    Neq,
}

impl Cmp {
    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Gt => ">",
            Cmp::Eq => "==",
            Cmp::Neq => "!=",
        }
    }

    /// Evaluates `x ⊙ k` on two defined values of the same kind.
    pub fn holds(self, x: &Value, k: &Value) -> bool {
        debug_assert!(!x.is_undefined() && !k.is_undefined());
        debug_assert_eq!(x.kind(), k.kind());
        match self {
            Cmp::Lt => x < k,
            Cmp::Gt => x > k,
            Cmp::Eq => x == k,
            Cmp::Neq => x != k,
        }
    }
}

/// Read or write occurrence of a variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Read,
    Write,
}

/// A variable occurrence inside a guard.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarRef {
    pub name: String,
    pub mode: Mode,
}

impl VarRef {
    pub fn read(name: impl Into<String>) -> VarRef {
        VarRef { name: name.into(), mode: Mode::Read }
    }

    pub fn write(name: impl Into<String>) -> VarRef {
        VarRef { name: name.into(), mode: Mode::Write }
    }
}

impl fmt::Display for VarRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            Mode::Read => write!(f, "{}", self.name),
            Mode::Write => write!(f, "{}'", self.name),
        }
    }
}

/// A variable with its declared kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypedVariable {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: DomainKind,
}

impl TypedVariable {
    pub fn new(name: impl Into<String>, kind: DomainKind) -> TypedVariable {
        TypedVariable { name: name.into(), kind }
    }
}

/// Guard AST. The grammar has only atoms, conjunction and disjunction; there
/// is no negation node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Guard {
    /// True iff the occurrence is bound to a defined value.
    Defined(VarRef),
    /// True iff the occurrence is defined and the comparison holds.
    Compare(VarRef, Cmp, Value),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
}

impl Guard {
    pub fn and(a: Guard, b: Guard) -> Guard {
        Guard::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Guard, b: Guard) -> Guard {
        Guard::Or(Box::new(a), Box::new(b))
    }

    /// A guard that is always true: `defined(v')` would not do for guardless
    /// transitions, so the encoding uses the absence of a guard at the DPN
    /// layer. Conjunction helper over an optional left side.
    pub fn and_opt(a: Option<Guard>, b: Guard) -> Guard {
        match a {
            Some(a) => Guard::and(a, b),
            None => b,
        }
    }

    /// Variable names occurring in read mode and in write mode.
    pub fn occurrences(&self) -> (BTreeSet<String>, BTreeSet<String>) {
        let mut reads = BTreeSet::new();
        let mut writes = BTreeSet::new();
        self.visit_occurrences(&mut |var| {
            match var.mode {
                Mode::Read => reads.insert(var.name.clone()),
                Mode::Write => writes.insert(var.name.clone()),
            };
        });
        (reads, writes)
    }

    fn visit_occurrences(&self, f: &mut impl FnMut(&VarRef)) {
        match self {
            Guard::Defined(v) => f(v),
            Guard::Compare(v, _, _) => f(v),
            Guard::And(a, b) | Guard::Or(a, b) => {
                a.visit_occurrences(f);
                b.visit_occurrences(f);
            }
        }
    }

    /// All comparison atoms `(occurrence, predicate, constant)`.
    pub fn atoms(&self) -> Vec<(&VarRef, Cmp, &Value)> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<(&'a VarRef, Cmp, &'a Value)>) {
        match self {
            Guard::Defined(_) => {}
            Guard::Compare(v, cmp, k) => out.push((v, *cmp, k)),
            Guard::And(a, b) | Guard::Or(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent_is_and: bool) -> fmt::Result {
        match self {
            Guard::Defined(v) => write!(f, "defined({v})"),
            Guard::Compare(v, cmp, k) => write!(f, "{v} {} {k}", cmp.symbol()),
            Guard::And(a, b) => {
                a.fmt_prec(f, true)?;
                f.write_str(" && ")?;
                b.fmt_prec(f, true)
            }
            Guard::Or(a, b) => {
                if parent_is_and {
                    f.write_str("(")?;
                }
                a.fmt_prec(f, false)?;
                f.write_str(" || ")?;
                b.fmt_prec(f, false)?;
                if parent_is_and {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, false)
    }
}

/// Partial map from variable occurrences to values.
pub type VariableAssignment = BTreeMap<VarRef, Value>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GuardError {
    #[error("unbound occurrence {0} in guard")]
    Unbound(String),
}

/// Evaluates a guard under an assignment total on its occurrences.
///
/// A definedness atom holds iff the occurrence is bound to a defined value; a
/// comparison holds iff the occurrence is defined and the predicate holds.
pub fn eval_guard(g: &Guard, beta: &VariableAssignment) -> Result<bool, GuardError> {
    match g {
        Guard::Defined(v) => {
            let x = beta.get(v).ok_or_else(|| GuardError::Unbound(v.to_string()))?;
            Ok(!x.is_undefined())
        }
        Guard::Compare(v, cmp, k) => {
            let x = beta.get(v).ok_or_else(|| GuardError::Unbound(v.to_string()))?;
            if x.is_undefined() {
                return Ok(false);
            }
            Ok(cmp.holds(x, k))
        }
        Guard::And(a, b) => Ok(eval_guard(a, beta)? && eval_guard(b, beta)?),
        Guard::Or(a, b) => Ok(eval_guard(a, beta)? || eval_guard(b, beta)?),
    }
}

/// Read and write variable names occurring in a guard.
pub fn guard_occurrences(g: &Guard) -> (BTreeSet<String>, BTreeSet<String>) {
    g.occurrences()
}

/// The set of constants `C_v`: every `k` such that `v ⊙ k` (in either mode)
/// occurs in some guard. Sorted ascending for ordered kinds.
pub fn extract_constants<'a>(
    guards: impl IntoIterator<Item = &'a Guard>,
    v: &TypedVariable,
) -> BTreeSet<Value> {
    let mut out = BTreeSet::new();
    for g in guards {
        for (var, _, k) in g.atoms() {
            if var.name == v.name {
                out.insert(k.clone());
            }
        }
    }
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown variable `{0}` at offset {1}")]
    UnknownVariable(String, usize),
    #[error("predicate `{cmp}` not permitted on {kind} variable `{var}`")]
    PredicateNotPermitted { var: String, kind: DomainKind, cmp: String },
    #[error("constant `{constant}` does not match {kind} variable `{var}`")]
    ConstantKindMismatch { var: String, kind: DomainKind, constant: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Prime,
    Int(i64),
    Real(f64),
    Str(String),
    Cmp(&'static str),
    AndAnd,
    OrOr,
    LParen,
    RParen,
    Comma,
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        match c {
            '(' => {
                toks.push((Token::LParen, start));
                i += 1;
            }
            ')' => {
                toks.push((Token::RParen, start));
                i += 1;
            }
            ',' => {
                toks.push((Token::Comma, start));
                i += 1;
            }
            '\'' => {
                toks.push((Token::Prime, start));
                i += 1;
            }
            '&' => {
                if bytes.get(i + 1) == Some(&b'&') {
                    toks.push((Token::AndAnd, start));
                    i += 2;
                } else {
                    return Err(ParseError::Syntax { pos: start, msg: "expected `&&`".into() });
                }
            }
            '|' => {
                if bytes.get(i + 1) == Some(&b'|') {
                    toks.push((Token::OrOr, start));
                    i += 2;
                } else {
                    return Err(ParseError::Syntax { pos: start, msg: "expected `||`".into() });
                }
            }
            '<' | '>' | '=' | '!' => {
                let two = bytes.get(i + 1) == Some(&b'=');
                let sym = match (c, two) {
                    ('<', true) => "<=",
                    ('<', false) => "<",
                    ('>', true) => ">=",
                    ('>', false) => ">",
                    ('=', true) => "==",
                    ('!', true) => "!=",
                    _ => {
                        return Err(ParseError::Syntax {
                            pos: start,
                            msg: format!("unexpected character `{c}`"),
                        })
                    }
                };
                toks.push((Token::Cmp(sym), start));
                i += sym.len();
            }
            '"' => {
                i += 1;
                let mut s = String::new();
                loop {
                    match bytes.get(i) {
                        Some(b'"') => {
                            i += 1;
                            break;
                        }
                        Some(&b) => {
                            s.push(b as char);
                            i += 1;
                        }
                        None => {
                            return Err(ParseError::Syntax {
                                pos: start,
                                msg: "unterminated string literal".into(),
                            })
                        }
                    }
                }
                toks.push((Token::Str(s), start));
            }
            _ if c.is_ascii_digit() || c == '-' => {
                i += 1;
                let mut is_real = false;
                while i < bytes.len() {
                    let d = bytes[i] as char;
                    if d.is_ascii_digit() {
                        i += 1;
                    } else if d == '.' && !is_real {
                        is_real = true;
                        i += 1;
                    } else {
                        break;
                    }
                }
                let lit = &text[start..i];
                if is_real {
                    let x: f64 = lit.parse().map_err(|_| ParseError::Syntax {
                        pos: start,
                        msg: format!("bad real literal `{lit}`"),
                    })?;
                    toks.push((Token::Real(x), start));
                } else {
                    let n: i64 = lit.parse().map_err(|_| ParseError::Syntax {
                        pos: start,
                        msg: format!("bad integer literal `{lit}`"),
                    })?;
                    toks.push((Token::Int(n), start));
                }
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                i += 1;
                while i < bytes.len() {
                    let d = bytes[i] as char;
                    if d.is_ascii_alphanumeric() || d == '_' {
                        i += 1;
                    } else {
                        break;
                    }
                }
                toks.push((Token::Ident(text[start..i].to_string()), start));
            }
            _ => {
                return Err(ParseError::Syntax {
                    pos: start,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: Vec<(Token, usize)>,
    pos: usize,
    vars: &'a [TypedVariable],
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(_, p)| *p)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: &Token, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(ParseError::Syntax { pos: self.here(), msg: format!("expected {what}") })
        }
    }

    fn lookup(&self, name: &str, at: usize) -> Result<&'a TypedVariable, ParseError> {
        self.vars
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| ParseError::UnknownVariable(name.to_string(), at))
    }

    fn disj(&mut self) -> Result<Guard, ParseError> {
        let mut g = self.conj()?;
        while self.peek() == Some(&Token::OrOr) {
            self.pos += 1;
            g = Guard::or(g, self.conj()?);
        }
        Ok(g)
    }

    fn conj(&mut self) -> Result<Guard, ParseError> {
        let mut g = self.atom()?;
        while self.peek() == Some(&Token::AndAnd) {
            self.pos += 1;
            g = Guard::and(g, self.atom()?);
        }
        Ok(g)
    }

    fn var_ref(&mut self, name: String, at: usize) -> Result<(VarRef, DomainKind), ParseError> {
        let var = self.lookup(&name, at)?;
        let mode = if self.peek() == Some(&Token::Prime) {
            self.pos += 1;
            Mode::Write
        } else {
            Mode::Read
        };
        Ok((VarRef { name: var.name.clone(), mode }, var.kind))
    }

    fn literal(&mut self, var: &VarRef, kind: DomainKind) -> Result<Value, ParseError> {
        let at = self.here();
        let mismatch = |constant: String| ParseError::ConstantKindMismatch {
            var: var.name.clone(),
            kind,
            constant,
        };
        match self.bump() {
            Some(Token::Int(n)) => match kind {
                DomainKind::Int => Ok(Value::Int(n)),
                DomainKind::Real => Ok(Value::real(n as f64)),
                _ => Err(mismatch(n.to_string())),
            },
            Some(Token::Real(x)) => match kind {
                DomainKind::Real => Ok(Value::real(x)),
                _ => Err(mismatch(x.to_string())),
            },
            Some(Token::Str(s)) => match kind {
                DomainKind::Str => Ok(Value::Str(s)),
                _ => Err(mismatch(format!("{s:?}"))),
            },
            Some(Token::Ident(w)) if w == "true" || w == "false" => match kind {
                DomainKind::Bool => Ok(Value::Bool(w == "true")),
                _ => Err(mismatch(w)),
            },
            _ => Err(ParseError::Syntax { pos: at, msg: "expected literal".into() }),
        }
    }

    fn atom(&mut self) -> Result<Guard, ParseError> {
        let at = self.here();
        match self.bump() {
            Some(Token::LParen) => {
                let g = self.disj()?;
                self.expect(&Token::RParen, "`)`")?;
                Ok(g)
            }
            Some(Token::Ident(name)) if name == "defined" => {
                self.expect(&Token::LParen, "`(` after `defined`")?;
                let ident_at = self.here();
                let name = match self.bump() {
                    Some(Token::Ident(n)) => n,
                    _ => {
                        return Err(ParseError::Syntax {
                            pos: ident_at,
                            msg: "expected variable name".into(),
                        })
                    }
                };
                let (var, _) = self.var_ref(name, ident_at)?;
                self.expect(&Token::RParen, "`)`")?;
                Ok(Guard::Defined(var))
            }
            Some(Token::Ident(name)) => {
                let (var, kind) = self.var_ref(name, at)?;
                let sym = match self.bump() {
                    Some(Token::Cmp(s)) => s,
                    _ => {
                        return Err(ParseError::Syntax {
                            pos: at,
                            msg: "expected comparison operator".into(),
                        })
                    }
                };
                let not_permitted = |cmp: &str| ParseError::PredicateNotPermitted {
                    var: var.name.clone(),
                    kind,
                    cmp: cmp.to_string(),
                };
                let k = self.literal(&var, kind)?;
                // `<=`/`>=` desugar to disjunctions so constant extraction
                // sees only the core predicates.
                match sym {
                    "==" => Ok(Guard::Compare(var, Cmp::Eq, k)),
                    "!=" => {
                        if !kind.permits(Cmp::Neq) {
                            return Err(not_permitted("!="));
                        }
                        Ok(Guard::Compare(var, Cmp::Neq, k))
                    }
                    "<" | ">" | "<=" | ">=" => {
                        if !kind.is_numeric() {
                            return Err(not_permitted(sym));
                        }
                        let strict = if sym.starts_with('<') { Cmp::Lt } else { Cmp::Gt };
                        if sym.len() == 1 {
                            Ok(Guard::Compare(var, strict, k))
                        } else {
                            Ok(Guard::or(
                                Guard::Compare(var.clone(), strict, k.clone()),
                                Guard::Compare(var, Cmp::Eq, k),
                            ))
                        }
                    }
                    _ => unreachable!(),
                }
            }
            _ => Err(ParseError::Syntax { pos: at, msg: "expected guard atom".into() }),
        }
    }
}

/// Parses the concrete guard syntax against a set of declared variables.
pub fn parse_guard(text: &str, vars: &[TypedVariable]) -> Result<Guard, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0, vars, end: text.len() };
    let g = p.disj()?;
    if p.pos != p.toks.len() {
        return Err(ParseError::Syntax { pos: p.here(), msg: "trailing input".into() });
    }
    Ok(g)
}
