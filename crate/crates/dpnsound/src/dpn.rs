//! The Data Petri Net model: places, transitions, arcs, typed case variables,
//! states, legal transition firings and structural validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::guards::{
    eval_guard, Guard, Mode, TypedVariable, Value, VarRef, VariableAssignment,
};

/// Multiset of places in canonical form: absent place ⇔ count zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Marking(BTreeMap<usize, u32>);

impl Marking {
    pub fn new() -> Marking {
        Marking::default()
    }

    pub fn from_counts(counts: impl IntoIterator<Item = (usize, u32)>) -> Marking {
        let mut m = Marking::new();
        for (p, n) in counts {
            m.add(p, n);
        }
        m
    }

    pub fn count(&self, place: usize) -> u32 {
        self.0.get(&place).copied().unwrap_or(0)
    }

    pub fn add(&mut self, place: usize, n: u32) {
        if n > 0 {
            *self.0.entry(place).or_insert(0) += n;
        }
    }

    /// Removes up to `n` tokens; returns false if fewer than `n` are present.
    pub fn remove(&mut self, place: usize, n: u32) -> bool {
        match self.0.get_mut(&place) {
            Some(c) if *c >= n => {
                *c -= n;
                if *c == 0 {
                    self.0.remove(&place);
                }
                true
            }
            _ => false,
        }
    }

    pub fn total(&self) -> u32 {
        self.0.values().sum()
    }

    /// Pointwise `self(p) >= other(p)`.
    pub fn dominates(&self, other: &Marking) -> bool {
        other.0.iter().all(|(p, n)| self.count(*p) >= *n)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.0.iter().map(|(p, n)| (*p, *n))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Total map from variable name to its current value.
pub type SvAssignment = BTreeMap<String, Value>;

/// A DPN state: control marking plus state-variable assignment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DpnState {
    pub marking: Marking,
    pub assignment: SvAssignment,
}

/// A transition together with a binding of its read and write occurrences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionFiring {
    pub transition: usize,
    pub beta: VariableAssignment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub id: String,
    pub label: Option<String>,
    pub guard: Option<Guard>,
    /// Variables the transition reads; a superset of the guard's read
    /// occurrences.
    pub read: BTreeSet<String>,
    /// Variables the transition writes; a superset of the guard's write
    /// occurrences.
    pub write: BTreeSet<String>,
    /// Internal routing transitions are hidden in user-facing reports.
    pub invisible: bool,
}

impl Transition {
    pub fn new(id: impl Into<String>) -> Transition {
        Transition {
            id: id.into(),
            label: None,
            guard: None,
            read: BTreeSet::new(),
            write: BTreeSet::new(),
            invisible: false,
        }
    }

    pub fn with_guard(mut self, guard: Guard) -> Transition {
        let (reads, writes) = guard.occurrences();
        self.read.extend(reads);
        self.write.extend(writes);
        self.guard = Some(guard);
        self
    }

    pub fn display_name(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.id)
    }
}

/// Arc between a place and a transition (both by index, multiplicity 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arc {
    PlaceToTransition(usize, usize),
    TransitionToPlace(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dpn {
    pub places: Vec<String>,
    pub transitions: Vec<Transition>,
    pub arcs: Vec<Arc>,
    pub variables: Vec<TypedVariable>,
    pub initial_assignment: SvAssignment,
    pub initial_marking: Marking,
    pub final_marking: Marking,
}

impl Dpn {
    pub fn place_index(&self, name: &str) -> Option<usize> {
        self.places.iter().position(|p| p == name)
    }

    pub fn transition_index(&self, id: &str) -> Option<usize> {
        self.transitions.iter().position(|t| t.id == id)
    }

    pub fn variable(&self, name: &str) -> Option<&TypedVariable> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn input_places(&self, t: usize) -> Vec<usize> {
        self.arcs
            .iter()
            .filter_map(|a| match a {
                Arc::PlaceToTransition(p, tt) if *tt == t => Some(*p),
                _ => None,
            })
            .collect()
    }

    pub fn output_places(&self, t: usize) -> Vec<usize> {
        self.arcs
            .iter()
            .filter_map(|a| match a {
                Arc::TransitionToPlace(tt, p) if *tt == t => Some(*p),
                _ => None,
            })
            .collect()
    }

    /// All guards of the net, in transition declaration order.
    pub fn guards(&self) -> impl Iterator<Item = &Guard> {
        self.transitions.iter().filter_map(|t| t.guard.as_ref())
    }

    pub fn initial_state(&self) -> DpnState {
        DpnState {
            marking: self.initial_marking.clone(),
            assignment: self.initial_assignment.clone(),
        }
    }

    /// True iff the control marking equals the final marking exactly
    /// (variable values are unconstrained).
    pub fn is_final(&self, s: &DpnState) -> bool {
        s.marking == self.final_marking
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    DuplicatePlace(String),
    DuplicateTransition(String),
    DuplicateVariable(String),
    ArcEndpointOutOfRange,
    /// Guard reads `v` but the transition does not declare `v` in its read set.
    ReadNotDeclared { transition: String, variable: String },
    /// Guard writes `v` but the transition does not declare `v` in its write set.
    WriteNotDeclared { transition: String, variable: String },
    UnknownVariable { transition: String, variable: String },
    InitialValueKindMismatch { variable: String },
    MissingInitialValue { variable: String },
    NoInputPlace { transition: String },
    EmptyFinalMarking,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::DuplicatePlace(p) => write!(f, "duplicate place id `{p}`"),
            Diagnostic::DuplicateTransition(t) => write!(f, "duplicate transition id `{t}`"),
            Diagnostic::DuplicateVariable(v) => write!(f, "duplicate variable `{v}`"),
            Diagnostic::ArcEndpointOutOfRange => write!(f, "arc endpoint out of range"),
            Diagnostic::ReadNotDeclared { transition, variable } => {
                write!(f, "guard of `{transition}` reads `{variable}` which is not in its read set")
            }
            Diagnostic::WriteNotDeclared { transition, variable } => write!(
                f,
                "guard of `{transition}` writes `{variable}` which is not in its write set"
            ),
            Diagnostic::UnknownVariable { transition, variable } => {
                write!(f, "transition `{transition}` refers to undeclared variable `{variable}`")
            }
            Diagnostic::InitialValueKindMismatch { variable } => {
                write!(f, "initial value of `{variable}` does not match its kind")
            }
            Diagnostic::MissingInitialValue { variable } => {
                write!(f, "no initial value for variable `{variable}`")
            }
            Diagnostic::NoInputPlace { transition } => {
                write!(f, "transition `{transition}` has no input place")
            }
            Diagnostic::EmptyFinalMarking => write!(f, "final marking is empty"),
        }
    }
}

/// Structural well-formedness check. Returns an empty list iff the net
/// satisfies every DPN invariant, its final marking is nonempty, and every
/// transition has at least one input place.
pub fn validate(net: &Dpn) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for p in &net.places {
        if !seen.insert(p.clone()) {
            out.push(Diagnostic::DuplicatePlace(p.clone()));
        }
    }
    seen.clear();
    for t in &net.transitions {
        if !seen.insert(t.id.clone()) {
            out.push(Diagnostic::DuplicateTransition(t.id.clone()));
        }
    }
    seen.clear();
    for v in &net.variables {
        if !seen.insert(v.name.clone()) {
            out.push(Diagnostic::DuplicateVariable(v.name.clone()));
        }
    }
    for a in &net.arcs {
        let ok = match a {
            Arc::PlaceToTransition(p, t) | Arc::TransitionToPlace(t, p) => {
                *p < net.places.len() && *t < net.transitions.len()
            }
        };
        if !ok {
            out.push(Diagnostic::ArcEndpointOutOfRange);
        }
    }
    for (i, t) in net.transitions.iter().enumerate() {
        for v in t.read.iter().chain(t.write.iter()) {
            if net.variable(v).is_none() {
                out.push(Diagnostic::UnknownVariable {
                    transition: t.id.clone(),
                    variable: v.clone(),
                });
            }
        }
        if let Some(g) = &t.guard {
            let (reads, writes) = g.occurrences();
            for v in reads.difference(&t.read) {
                out.push(Diagnostic::ReadNotDeclared {
                    transition: t.id.clone(),
                    variable: v.clone(),
                });
            }
            for v in writes.difference(&t.write) {
                out.push(Diagnostic::WriteNotDeclared {
                    transition: t.id.clone(),
                    variable: v.clone(),
                });
            }
        }
        if net.input_places(i).is_empty() {
            out.push(Diagnostic::NoInputPlace { transition: t.id.clone() });
        }
    }
    for v in &net.variables {
        match net.initial_assignment.get(&v.name) {
            Some(x) if !x.fits(v.kind) => {
                out.push(Diagnostic::InitialValueKindMismatch { variable: v.name.clone() })
            }
            Some(_) => {}
            None => out.push(Diagnostic::MissingInitialValue { variable: v.name.clone() }),
        }
    }
    if net.final_marking.is_empty() {
        out.push(Diagnostic::EmptyFinalMarking);
    }
    out
}

/// Advisory notes that do not make a net invalid.
pub fn validation_notes(net: &Dpn) -> Vec<String> {
    let mut out = Vec::new();
    for t in &net.transitions {
        if let Some(g) = &t.guard {
            let mut unusual = Vec::new();
            collect_defined_writes(g, &mut unusual);
            for v in unusual {
                out.push(format!(
                    "transition `{}` uses defined({v}') on a write occurrence; writes always \
                     produce a defined value, so the atom is trivially true",
                    t.id
                ));
            }
        }
    }
    out
}

fn collect_defined_writes(g: &Guard, out: &mut Vec<String>) {
    match g {
        Guard::Defined(v) if v.mode == Mode::Write => out.push(v.name.clone()),
        Guard::Defined(_) | Guard::Compare(..) => {}
        Guard::And(a, b) | Guard::Or(a, b) => {
            collect_defined_writes(a, out);
            collect_defined_writes(b, out);
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FiringError {
    #[error("no write candidates supplied for variable `{0}`")]
    MissingWriteChoices(String),
    #[error("illegal firing of `{transition}`: {reason}")]
    IllegalFiring { transition: String, reason: String },
}

/// Finite per-variable candidate sets for written values.
pub type WriteChoices = BTreeMap<String, Vec<Value>>;

/// Enumerates every legal transition firing from `s`, pairing each with its
/// successor state. Transitions are visited in declaration order and write
/// values in candidate-set order, so the result is deterministic.
pub fn legal_firings(
    net: &Dpn,
    s: &DpnState,
    write_choices: &WriteChoices,
) -> Result<Vec<(TransitionFiring, DpnState)>, FiringError> {
    let mut out = Vec::new();
    for (ti, t) in net.transitions.iter().enumerate() {
        if !net.input_places(ti).iter().all(|p| s.marking.count(*p) > 0) {
            continue;
        }
        let mut base = VariableAssignment::new();
        for v in &t.read {
            let x = s.assignment.get(v).cloned().unwrap_or(Value::Undefined);
            base.insert(VarRef::read(v.clone()), x);
        }
        let write_vars: Vec<&String> = t.write.iter().collect();
        let candidate_sets: Vec<&Vec<Value>> = write_vars
            .iter()
            .map(|v| {
                write_choices
                    .get(v.as_str())
                    .ok_or_else(|| FiringError::MissingWriteChoices((*v).clone()))
            })
            .collect::<Result<_, _>>()?;
        let mut idx = vec![0usize; write_vars.len()];
        loop {
            let mut beta = base.clone();
            for (k, v) in write_vars.iter().enumerate() {
                beta.insert(VarRef::write((*v).clone()), candidate_sets[k][idx[k]].clone());
            }
            let ok = match &t.guard {
                Some(g) => eval_guard(g, &beta).unwrap_or(false),
                None => true,
            };
            if ok {
                let firing = TransitionFiring { transition: ti, beta: beta.clone() };
                let succ = successor(net, s, ti, &beta);
                out.push((firing, succ));
            }
            // odometer over the write candidate sets
            let mut k = 0;
            loop {
                if k == write_vars.len() {
                    break;
                }
                idx[k] += 1;
                if idx[k] < candidate_sets[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == write_vars.len() {
                break;
            }
        }
    }
    Ok(out)
}

fn successor(net: &Dpn, s: &DpnState, t: usize, beta: &VariableAssignment) -> DpnState {
    let mut marking = s.marking.clone();
    for p in net.input_places(t) {
        let removed = marking.remove(p, 1);
        debug_assert!(removed);
    }
    for p in net.output_places(t) {
        marking.add(p, 1);
    }
    let mut assignment = s.assignment.clone();
    for v in &net.transitions[t].write {
        let x = beta.get(&VarRef::write(v.clone())).cloned().unwrap_or(Value::Undefined);
        assignment.insert(v.clone(), x);
    }
    DpnState { marking, assignment }
}

/// Fires a single transition firing, checking every legality clause.
pub fn fire(net: &Dpn, s: &DpnState, f: &TransitionFiring) -> Result<DpnState, FiringError> {
    let t = &net.transitions[f.transition];
    let illegal = |reason: &str| FiringError::IllegalFiring {
        transition: t.id.clone(),
        reason: reason.to_string(),
    };
    for p in net.input_places(f.transition) {
        if s.marking.count(p) == 0 {
            return Err(illegal(&format!("input place `{}` is empty", net.places[p])));
        }
    }
    for v in &t.read {
        let expected = s.assignment.get(v).cloned().unwrap_or(Value::Undefined);
        match f.beta.get(&VarRef::read(v.clone())) {
            Some(x) if *x == expected => {}
            _ => return Err(illegal(&format!("read binding for `{v}` disagrees with the state"))),
        }
    }
    for v in &t.write {
        match f.beta.get(&VarRef::write(v.clone())) {
            Some(x) if !x.is_undefined() => {
                let kind = net.variable(v).map(|tv| tv.kind);
                if let Some(kind) = kind {
                    if !x.fits(kind) {
                        return Err(illegal(&format!("write binding for `{v}` has wrong kind")));
                    }
                }
            }
            Some(_) => return Err(illegal(&format!("write binding for `{v}` is undefined"))),
            None => return Err(illegal(&format!("missing write binding for `{v}`"))),
        }
    }
    if let Some(g) = &t.guard {
        if !eval_guard(g, &f.beta).unwrap_or(false) {
            return Err(illegal("guard is not satisfied"));
        }
    }
    Ok(successor(net, s, f.transition, &f.beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guards::{parse_guard, DomainKind};

    /// p_in -> t(write x, x' > 0) -> p_mid -> u(read x, x > 2) -> p_out
    fn small_net() -> Dpn {
        let x = TypedVariable::new("x", DomainKind::Int);
        let gt = parse_guard("x' > 0", std::slice::from_ref(&x)).unwrap();
        let gu = parse_guard("x > 2", std::slice::from_ref(&x)).unwrap();
        Dpn {
            places: vec!["p_in".into(), "p_mid".into(), "p_out".into()],
            transitions: vec![
                Transition::new("t").with_guard(gt),
                Transition::new("u").with_guard(gu),
            ],
            arcs: vec![
                Arc::PlaceToTransition(0, 0),
                Arc::TransitionToPlace(0, 1),
                Arc::PlaceToTransition(1, 1),
                Arc::TransitionToPlace(1, 2),
            ],
            variables: vec![x],
            initial_assignment: [("x".to_string(), Value::Undefined)].into_iter().collect(),
            initial_marking: Marking::from_counts([(0, 1)]),
            final_marking: Marking::from_counts([(2, 1)]),
        }
    }

    #[test]
    fn validates_clean_net() {
        assert_eq!(validate(&small_net()), vec![]);
    }

    #[test]
    fn flags_undeclared_write() {
        let mut net = small_net();
        net.transitions[0].write.clear();
        let diags = validate(&net);
        assert!(diags.iter().any(|d| matches!(
            d,
            Diagnostic::WriteNotDeclared { transition, variable }
                if transition == "t" && variable == "x"
        )));
    }

    #[test]
    fn flags_transition_without_input_place() {
        let mut net = small_net();
        net.arcs.retain(|a| !matches!(a, Arc::PlaceToTransition(_, 0)));
        let diags = validate(&net);
        assert!(diags
            .iter()
            .any(|d| matches!(d, Diagnostic::NoInputPlace { transition } if transition == "t")));
    }

    #[test]
    fn notes_defined_on_write_occurrence() {
        let x = TypedVariable::new("x", DomainKind::Int);
        let g = parse_guard("defined(x')", std::slice::from_ref(&x)).unwrap();
        let mut net = small_net();
        net.transitions[0] = Transition::new("t").with_guard(g);
        assert_eq!(validation_notes(&net).len(), 1);
    }

    fn choices(values: &[i64]) -> WriteChoices {
        [("x".to_string(), values.iter().map(|n| Value::Int(*n)).collect())]
            .into_iter()
            .collect()
    }

    #[test]
    fn enumerates_write_candidates_through_guard() {
        let net = small_net();
        let firings = legal_firings(&net, &net.initial_state(), &choices(&[-1, 1, 2, 5])).unwrap();
        // x' > 0 admits 1, 2 and 5
        assert_eq!(firings.len(), 3);
        assert!(firings.iter().all(|(f, _)| f.transition == 0));
        let written: Vec<_> = firings
            .iter()
            .map(|(f, _)| f.beta.get(&VarRef::write("x")).unwrap().clone())
            .collect();
        assert_eq!(written, vec![Value::Int(1), Value::Int(2), Value::Int(5)]);
    }

    #[test]
    fn transition_with_empty_input_place_is_not_enumerated() {
        let net = small_net();
        let s = DpnState {
            marking: Marking::from_counts([(1, 1)]),
            assignment: [("x".to_string(), Value::Int(1))].into_iter().collect(),
        };
        let firings = legal_firings(&net, &s, &choices(&[1])).unwrap();
        // only `u` has its input marked, and x=1 fails x > 2
        assert!(firings.is_empty());
    }

    #[test]
    fn missing_write_choices_is_an_error() {
        let net = small_net();
        let err = legal_firings(&net, &net.initial_state(), &WriteChoices::new()).unwrap_err();
        assert_eq!(err, FiringError::MissingWriteChoices("x".into()));
    }

    #[test]
    fn fire_moves_token_and_updates_assignment() {
        let net = small_net();
        let s = net.initial_state();
        let (f, succ) = legal_firings(&net, &s, &choices(&[7])).unwrap().remove(0);
        let fired = fire(&net, &s, &f).unwrap();
        assert_eq!(fired, succ);
        assert_eq!(fired.marking, Marking::from_counts([(1, 1)]));
        assert_eq!(fired.assignment.get("x"), Some(&Value::Int(7)));
        // purity: firing again from the same state gives the identical result
        assert_eq!(fire(&net, &s, &f).unwrap(), fired);
    }

    #[test]
    fn fire_rejects_unsatisfied_guard() {
        let net = small_net();
        let s = net.initial_state();
        let f = TransitionFiring {
            transition: 0,
            beta: [(VarRef::write("x"), Value::Int(-3))].into_iter().collect(),
        };
        assert!(matches!(fire(&net, &s, &f), Err(FiringError::IllegalFiring { .. })));
    }

    #[test]
    fn fire_without_writes_keeps_assignment() {
        let net = small_net();
        let s = DpnState {
            marking: Marking::from_counts([(1, 1)]),
            assignment: [("x".to_string(), Value::Int(5))].into_iter().collect(),
        };
        let (f, _) = legal_firings(&net, &s, &choices(&[5])).unwrap().remove(0);
        assert_eq!(f.transition, 1);
        let fired = fire(&net, &s, &f).unwrap();
        assert_eq!(fired.assignment, s.assignment);
        assert!(net.is_final(&fired));
    }

    #[test]
    fn token_count_is_conserved_per_firing() {
        let net = small_net();
        let s = net.initial_state();
        for (f, succ) in legal_firings(&net, &s, &choices(&[1, 3])).unwrap() {
            let expected = s.marking.total() - net.input_places(f.transition).len() as u32
                + net.output_places(f.transition).len() as u32;
            assert_eq!(succ.marking.total(), expected);
        }
    }

    #[test]
    fn final_marking_must_match_exactly() {
        let net = small_net();
        let assignment: SvAssignment = [("x".to_string(), Value::Int(1))].into_iter().collect();
        let exact = DpnState {
            marking: Marking::from_counts([(2, 1)]),
            assignment: assignment.clone(),
        };
        assert!(net.is_final(&exact));
        let dominated = DpnState {
            marking: Marking::from_counts([(2, 1), (1, 1)]),
            assignment,
        };
        assert!(!net.is_final(&dominated));
        assert!(!net.is_final(&net.initial_state()));
    }
}
