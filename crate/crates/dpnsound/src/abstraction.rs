//! Finite representative-value abstraction: per-variable constant sets,
//! interval partitioning with a fixed pick rule, and the `rep` map that sends
//! any concrete value to its interval representative.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::dpn::{Dpn, SvAssignment};
use crate::guards::{extract_constants, DomainKind, TypedVariable, Value};

/// One interval of the partition induced by the constants of a variable.
/// `None` bounds are infinite; a `None` representative marks an empty integer
/// interval that was dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Interval {
    pub lower: Option<Value>,
    pub upper: Option<Value>,
    pub representative: Option<Value>,
}

impl Interval {
    fn point(c: &Value) -> Interval {
        Interval {
            lower: Some(c.clone()),
            upper: Some(c.clone()),
            representative: Some(c.clone()),
        }
    }

    pub fn is_point(&self) -> bool {
        self.lower.is_some() && self.lower == self.upper
    }

    /// Renders the interval for witness annotations, e.g. `(5000, 10000)`.
    pub fn render(&self) -> String {
        if self.is_point() {
            return format!("= {}", self.lower.as_ref().unwrap());
        }
        let lo = self.lower.as_ref().map_or("-inf".to_string(), |v| v.to_string());
        let hi = self.upper.as_ref().map_or("+inf".to_string(), |v| v.to_string());
        format!("any value in ({lo}, {hi})")
    }
}

/// Constants, representatives and interval structure for one variable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarAbstraction {
    pub kind: DomainKind,
    pub constants: BTreeSet<Value>,
    pub representatives: BTreeSet<Value>,
    pub intervals: Vec<Interval>,
    /// Sentinel standing for "any string not mentioned in a guard".
    pub string_sentinel: Option<String>,
}

/// Per-variable abstraction for a whole net.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepresentativeMap {
    vars: BTreeMap<String, VarAbstraction>,
}

impl RepresentativeMap {
    pub fn get(&self, var: &str) -> Option<&VarAbstraction> {
        self.vars.get(var)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &VarAbstraction)> {
        self.vars.iter()
    }

    /// Representatives of a variable in ascending order.
    pub fn representatives(&self, var: &str) -> Vec<Value> {
        self.vars
            .get(var)
            .map(|a| a.representatives.iter().cloned().collect())
            .unwrap_or_default()
    }

    /// Notes about empty integer intervals dropped during construction.
    pub fn notes(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, a) in &self.vars {
            for iv in &a.intervals {
                if iv.representative.is_none() {
                    out.push(format!(
                        "variable `{name}`: interval ({}, {}) contains no value and was dropped",
                        iv.lower.as_ref().unwrap(),
                        iv.upper.as_ref().unwrap()
                    ));
                }
            }
        }
        out
    }

    /// The interval a defined value falls into, for witness annotations.
    pub fn interval_of(&self, var: &str, x: &Value) -> Option<&Interval> {
        let a = self.vars.get(var)?;
        a.intervals.iter().find(|iv| interval_contains(iv, x))
    }
}

fn interval_contains(iv: &Interval, x: &Value) -> bool {
    if iv.is_point() {
        return iv.lower.as_ref() == Some(x);
    }
    let above = iv.lower.as_ref().map_or(true, |lo| x > lo);
    let below = iv.upper.as_ref().map_or(true, |hi| x < hi);
    above && below
}

fn int_of(v: &Value) -> i64 {
    match v {
        Value::Int(n) => *n,
        _ => unreachable!("constant kind checked at parse time"),
    }
}

fn real_of(v: &Value) -> f64 {
    match v {
        Value::Real(x) => x.into_inner(),
        _ => unreachable!("constant kind checked at parse time"),
    }
}

fn ordered_intervals(kind: DomainKind, constants: &BTreeSet<Value>) -> Vec<Interval> {
    let consts: Vec<&Value> = constants.iter().collect();
    let mut out = Vec::new();
    if consts.is_empty() {
        // whole line, representative fixed at zero
        let rep = match kind {
            DomainKind::Int => Value::Int(0),
            DomainKind::Real => Value::real(0.0),
            _ => unreachable!(),
        };
        out.push(Interval { lower: None, upper: None, representative: Some(rep) });
        return out;
    }
    let below = match kind {
        DomainKind::Int => Value::Int(int_of(consts[0]) - 1),
        DomainKind::Real => Value::real(real_of(consts[0]) - 1.0),
        _ => unreachable!(),
    };
    out.push(Interval {
        lower: None,
        upper: Some((*consts[0]).clone()),
        representative: Some(below),
    });
    for w in consts.windows(2) {
        out.push(Interval::point(w[0]));
        let rep = match kind {
            DomainKind::Int => {
                let (a, b) = (int_of(w[0]), int_of(w[1]));
                // pick rule: lower endpoint + 1, undefined when the open
                // integer interval is empty
                if a + 1 < b {
                    Some(Value::Int(a + 1))
                } else {
                    None
                }
            }
            DomainKind::Real => Some(Value::real((real_of(w[0]) + real_of(w[1])) / 2.0)),
            _ => unreachable!(),
        };
        out.push(Interval {
            lower: Some((*w[0]).clone()),
            upper: Some((*w[1]).clone()),
            representative: rep,
        });
    }
    let last = consts[consts.len() - 1];
    out.push(Interval::point(last));
    let above = match kind {
        DomainKind::Int => Value::Int(int_of(last) + 1),
        DomainKind::Real => Value::real(real_of(last) + 1.0),
        _ => unreachable!(),
    };
    out.push(Interval { lower: Some(last.clone()), upper: None, representative: Some(above) });
    out
}

fn string_sentinel(constants: &BTreeSet<Value>) -> String {
    let mut s = "⊛other".to_string();
    while constants.contains(&Value::Str(s.clone())) {
        s.insert(0, '⊛');
    }
    s
}

fn build_var(kind: DomainKind, constants: BTreeSet<Value>) -> VarAbstraction {
    match kind {
        DomainKind::Int | DomainKind::Real => {
            let intervals = ordered_intervals(kind, &constants);
            let representatives =
                intervals.iter().filter_map(|iv| iv.representative.clone()).collect();
            VarAbstraction { kind, constants, representatives, intervals, string_sentinel: None }
        }
        DomainKind::Bool => VarAbstraction {
            kind,
            constants,
            representatives: [Value::Bool(false), Value::Bool(true)].into_iter().collect(),
            intervals: Vec::new(),
            string_sentinel: None,
        },
        DomainKind::Str => {
            let sentinel = string_sentinel(&constants);
            let mut representatives = constants.clone();
            representatives.insert(Value::Str(sentinel.clone()));
            VarAbstraction {
                kind,
                constants,
                representatives,
                intervals: Vec::new(),
                string_sentinel: Some(sentinel),
            }
        }
    }
}

/// Builds the abstraction of a single variable from an explicit constant
/// set. Useful outside a net, e.g. for decision-table overlap checks.
pub fn var_abstraction(kind: DomainKind, constants: BTreeSet<Value>) -> VarAbstraction {
    build_var(kind, constants)
}

/// Builds the per-variable representative domains for a validated net.
pub fn build_representatives(net: &Dpn) -> RepresentativeMap {
    let guards: Vec<_> = net.guards().collect();
    let mut vars = BTreeMap::new();
    for v in &net.variables {
        let constants = extract_constants(guards.iter().copied(), v);
        vars.insert(v.name.clone(), build_var(v.kind, constants));
    }
    RepresentativeMap { vars }
}

/// Maps a concrete value to its representative: identity on constants, the
/// interval representative otherwise, and undefined maps to undefined.
pub fn rep(x: &Value, v: &TypedVariable, m: &RepresentativeMap) -> Value {
    if x.is_undefined() {
        return Value::Undefined;
    }
    let a = match m.get(&v.name) {
        Some(a) => a,
        None => return x.clone(),
    };
    match a.kind {
        DomainKind::Bool => x.clone(),
        DomainKind::Str => {
            if a.constants.contains(x) {
                x.clone()
            } else {
                Value::Str(a.string_sentinel.clone().expect("string abstraction has sentinel"))
            }
        }
        DomainKind::Int | DomainKind::Real => {
            if a.constants.contains(x) {
                return x.clone();
            }
            for iv in &a.intervals {
                if !iv.is_point() && interval_contains(iv, x) {
                    return iv.representative.clone().expect(
                        "a non-constant value always lies in a nonempty interval",
                    );
                }
            }
            unreachable!("intervals partition the whole domain")
        }
    }
}

/// Pointwise restriction of a state-variable assignment to representatives.
pub fn restrict_assignment(
    alpha: &SvAssignment,
    vars: &[TypedVariable],
    m: &RepresentativeMap,
) -> SvAssignment {
    let mut out = SvAssignment::new();
    for v in vars {
        let x = alpha.get(&v.name).cloned().unwrap_or(Value::Undefined);
        out.insert(v.name.clone(), rep(&x, v, m));
    }
    out
}
