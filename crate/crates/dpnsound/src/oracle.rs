//! Brute-force concrete semantics over finite value domains, and bounded
//! trace-set comparison against the abstract pipeline. This module never
//! touches the colored translation internals: it replays the plain net
//! directly, so agreement between the two sides is meaningful evidence.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::abstraction::RepresentativeMap;
use crate::cpn::Cpn;
use crate::dpn::{legal_firings, Arc, Dpn, DpnState, Marking, SvAssignment, Transition, WriteChoices};
use crate::guards::{Cmp, DomainKind, Guard, TypedVariable, Value, VarRef};
use crate::statespace::ReachabilityGraph;

/// Explicit finite domains, one value list per variable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FiniteDomainSpec {
    pub domains: BTreeMap<String, Vec<Value>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("domain spec: {0}")]
    InvalidSpec(String),
    #[error("concrete state space exceeds {limit} states")]
    Explosion { limit: usize },
}

impl FiniteDomainSpec {
    pub fn new(domains: BTreeMap<String, Vec<Value>>) -> FiniteDomainSpec {
        FiniteDomainSpec { domains }
    }

    /// Parses the JSON form: either an explicit array per variable or
    /// `{"range": [a, b], "step": s}` for integers.
    pub fn from_json(text: &str, net: &Dpn) -> Result<FiniteDomainSpec, OracleError> {
        let doc: serde_json::Value =
            serde_json::from_str(text).map_err(|e| OracleError::InvalidSpec(e.to_string()))?;
        let obj = doc
            .as_object()
            .ok_or_else(|| OracleError::InvalidSpec("expected a JSON object".into()))?;
        let mut domains = BTreeMap::new();
        for (name, entry) in obj {
            let var = net
                .variable(name)
                .ok_or_else(|| OracleError::InvalidSpec(format!("unknown variable `{name}`")))?;
            let values = match entry {
                serde_json::Value::Array(items) => items
                    .iter()
                    .map(|it| json_value(it, var))
                    .collect::<Result<Vec<_>, _>>()?,
                serde_json::Value::Object(m) => {
                    let range = m
                        .get("range")
                        .and_then(|r| r.as_array())
                        .filter(|r| r.len() == 2)
                        .ok_or_else(|| {
                            OracleError::InvalidSpec(format!(
                                "`{name}`: expected {{\"range\": [a, b], \"step\": s}}"
                            ))
                        })?;
                    let a = range[0].as_i64().ok_or_else(|| {
                        OracleError::InvalidSpec(format!("`{name}`: range bound must be an integer"))
                    })?;
                    let b = range[1].as_i64().ok_or_else(|| {
                        OracleError::InvalidSpec(format!("`{name}`: range bound must be an integer"))
                    })?;
                    let step = m.get("step").map_or(Ok(1), |s| {
                        s.as_i64().filter(|s| *s > 0).ok_or_else(|| {
                            OracleError::InvalidSpec(format!("`{name}`: step must be positive"))
                        })
                    })?;
                    if var.kind != DomainKind::Int {
                        return Err(OracleError::InvalidSpec(format!(
                            "`{name}`: range form is only for int variables"
                        )));
                    }
                    (a..=b).step_by(step as usize).map(Value::Int).collect()
                }
                _ => {
                    return Err(OracleError::InvalidSpec(format!(
                        "`{name}`: expected an array or a range object"
                    )))
                }
            };
            domains.insert(name.clone(), values);
        }
        let spec = FiniteDomainSpec { domains };
        spec.validate(net)?;
        Ok(spec)
    }

    /// Checks the spec against the net: every written variable has a
    /// nonempty domain of the right kind that contains the initial value
    /// and every guard constant of the variable.
    pub fn validate(&self, net: &Dpn) -> Result<(), OracleError> {
        let m = crate::abstraction::build_representatives(net);
        for v in &net.variables {
            let written = net.transitions.iter().any(|t| t.write.contains(&v.name));
            let dom = self.domains.get(&v.name);
            if written && dom.map_or(true, |d| d.is_empty()) {
                return Err(OracleError::InvalidSpec(format!(
                    "written variable `{}` needs a nonempty domain",
                    v.name
                )));
            }
            let Some(dom) = dom else { continue };
            for x in dom {
                if x.is_undefined() || !x.fits(v.kind) {
                    return Err(OracleError::InvalidSpec(format!(
                        "`{}`: value {} does not fit kind {}",
                        v.name, x, v.kind
                    )));
                }
            }
            if let Some(init) = net.initial_assignment.get(&v.name) {
                if !init.is_undefined() && !dom.contains(init) {
                    return Err(OracleError::InvalidSpec(format!(
                        "`{}`: domain misses the initial value {}",
                        v.name, init
                    )));
                }
            }
            if let Some(a) = m.get(&v.name) {
                for c in &a.constants {
                    if !dom.contains(c) {
                        return Err(OracleError::InvalidSpec(format!(
                            "`{}`: domain misses the guard constant {}",
                            v.name, c
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn write_choices(&self) -> WriteChoices {
        self.domains.clone()
    }
}

fn json_value(it: &serde_json::Value, var: &TypedVariable) -> Result<Value, OracleError> {
    let err = |msg: String| OracleError::InvalidSpec(format!("`{}`: {msg}", var.name));
    match (var.kind, it) {
        (DomainKind::Int, serde_json::Value::Number(n)) => {
            n.as_i64().map(Value::Int).ok_or_else(|| err(format!("{n} is not an integer")))
        }
        (DomainKind::Real, serde_json::Value::Number(n)) => n
            .as_f64()
            .filter(|x| x.is_finite())
            .map(Value::real)
            .ok_or_else(|| err(format!("{n} is not finite"))),
        (DomainKind::Bool, serde_json::Value::Bool(b)) => Ok(Value::Bool(*b)),
        (DomainKind::Str, serde_json::Value::String(s)) => Ok(Value::Str(s.clone())),
        (kind, other) => Err(err(format!("{other} does not fit kind {kind}"))),
    }
}

/// A finite domain dense enough for equivalence testing: every abstraction
/// interval of every variable contains at least one domain value, and all
/// guard constants and initial values are included.
pub fn dense_spec(net: &Dpn, m: &RepresentativeMap) -> FiniteDomainSpec {
    let mut domains = BTreeMap::new();
    for v in &net.variables {
        let Some(a) = m.get(&v.name) else { continue };
        let mut dom: BTreeSet<Value> = a.representatives.clone();
        dom.extend(a.constants.iter().cloned());
        match v.kind {
            DomainKind::Int => {
                // second witnesses inside the unbounded and roomy intervals
                let ints: Vec<i64> = dom
                    .iter()
                    .filter_map(|x| match x {
                        Value::Int(n) => Some(*n),
                        _ => None,
                    })
                    .collect();
                if let (Some(lo), Some(hi)) = (ints.iter().min(), ints.iter().max()) {
                    dom.insert(Value::Int(lo - 1));
                    dom.insert(Value::Int(hi + 1));
                }
            }
            DomainKind::Real => {
                let reals: Vec<f64> = dom
                    .iter()
                    .filter_map(|x| match x {
                        Value::Real(r) => Some(r.into_inner()),
                        _ => None,
                    })
                    .collect();
                if let (Some(lo), Some(hi)) = (
                    reals.iter().cloned().reduce(f64::min),
                    reals.iter().cloned().reduce(f64::max),
                ) {
                    dom.insert(Value::real(lo - 1.0));
                    dom.insert(Value::real(hi + 1.0));
                }
            }
            DomainKind::Bool | DomainKind::Str => {}
        }
        if let Some(init) = net.initial_assignment.get(&v.name) {
            if !init.is_undefined() {
                dom.insert(init.clone());
            }
        }
        domains.insert(v.name.clone(), dom.into_iter().collect());
    }
    FiniteDomainSpec { domains }
}

/// Transition-id sequences of length at most `depth`, prefix-closed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundedTraceSet {
    pub depth: usize,
    pub traces: BTreeSet<Vec<String>>,
}

pub const DEFAULT_STATE_CAP: usize = 100_000;

/// Exhaustively unrolls the concrete semantics up to `depth` steps.
pub fn concrete_traces(
    net: &Dpn,
    spec: &FiniteDomainSpec,
    depth: usize,
    cap: usize,
) -> Result<BoundedTraceSet, OracleError> {
    spec.validate(net)?;
    let choices = spec.write_choices();
    let mut traces = BTreeSet::new();
    traces.insert(Vec::new());
    // states reached by each distinct transition sequence of the layer
    let mut layer: BTreeMap<Vec<String>, BTreeSet<DpnState>> = BTreeMap::new();
    layer.insert(Vec::new(), [net.initial_state()].into_iter().collect());
    for _ in 0..depth {
        let mut next: BTreeMap<Vec<String>, BTreeSet<DpnState>> = BTreeMap::new();
        let mut budget = 0usize;
        for (trace, states) in &layer {
            for s in states {
                let firings = legal_firings(net, s, &choices)
                    .map_err(|e| OracleError::InvalidSpec(e.to_string()))?;
                for (f, succ) in firings {
                    let mut t = trace.clone();
                    t.push(net.transitions[f.transition].id.clone());
                    budget += 1;
                    if budget > cap {
                        return Err(OracleError::Explosion { limit: cap });
                    }
                    next.entry(t).or_default().insert(succ);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        traces.extend(next.keys().cloned());
        layer = next;
    }
    Ok(BoundedTraceSet { depth, traces })
}

/// Transition-sequence projection of all paths of length at most `depth`
/// from the initial node of an already-explored reachability graph.
pub fn abstract_traces(cpn: &Cpn, g: &ReachabilityGraph, depth: usize) -> BoundedTraceSet {
    let mut traces = BTreeSet::new();
    traces.insert(Vec::new());
    let mut layer: BTreeMap<Vec<String>, BTreeSet<u32>> = BTreeMap::new();
    layer.insert(Vec::new(), [g.initial].into_iter().collect());
    for _ in 0..depth {
        let mut next: BTreeMap<Vec<String>, BTreeSet<u32>> = BTreeMap::new();
        for (trace, nodes) in &layer {
            for n in nodes {
                for e in g.out_edges(*n) {
                    let mut t = trace.clone();
                    t.push(cpn.transitions[e.transition].id.clone());
                    next.entry(t).or_default().insert(e.target);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        traces.extend(next.keys().cloned());
        layer = next;
    }
    BoundedTraceSet { depth, traces }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CompareResult {
    Equal,
    /// A shortest sequence present on exactly one side.
    Differs { sequence: Vec<String>, only_in_first: bool },
}

pub fn compare(a: &BoundedTraceSet, b: &BoundedTraceSet) -> CompareResult {
    debug_assert_eq!(a.depth, b.depth);
    let mut diff: Option<(Vec<String>, bool)> = None;
    for t in a.traces.symmetric_difference(&b.traces) {
        let better = diff.as_ref().map_or(true, |(d, _)| t.len() < d.len());
        if better {
            diff = Some((t.clone(), a.traces.contains(t)));
        }
    }
    match diff {
        None => CompareResult::Equal,
        Some((sequence, only_in_first)) => CompareResult::Differs { sequence, only_in_first },
    }
}

/// Fully explored concrete state space.
#[derive(Debug, Clone)]
pub struct ConcreteGraph {
    pub states: Vec<DpnState>,
    pub edges: Vec<(usize, usize, usize)>,
    pub initial: usize,
    pub finals: BTreeSet<usize>,
}

pub fn explore_concrete(
    net: &Dpn,
    spec: &FiniteDomainSpec,
    cap: usize,
) -> Result<ConcreteGraph, OracleError> {
    spec.validate(net)?;
    let choices = spec.write_choices();
    let mut states = vec![net.initial_state()];
    let mut index: BTreeMap<DpnState, usize> = [(states[0].clone(), 0)].into_iter().collect();
    let mut edges = Vec::new();
    let mut finals = BTreeSet::new();
    if net.is_final(&states[0]) {
        finals.insert(0);
    }
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let s = states[i].clone();
        let firings =
            legal_firings(net, &s, &choices).map_err(|e| OracleError::InvalidSpec(e.to_string()))?;
        for (f, succ) in firings {
            let j = match index.get(&succ) {
                Some(j) => *j,
                None => {
                    if states.len() >= cap {
                        return Err(OracleError::Explosion { limit: cap });
                    }
                    let j = states.len();
                    states.push(succ.clone());
                    index.insert(succ.clone(), j);
                    if net.is_final(&succ) {
                        finals.insert(j);
                    }
                    queue.push_back(j);
                    j
                }
            };
            edges.push((i, f.transition, j));
        }
    }
    Ok(ConcreteGraph { states, edges, initial: 0, finals })
}

/// The three soundness conditions computed directly on the concrete graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConcreteVerdict {
    pub p1: bool,
    pub p2: bool,
    pub p3: bool,
}

impl ConcreteVerdict {
    pub fn sound(&self) -> bool {
        self.p1 && self.p2 && self.p3
    }
}

pub fn concrete_verdict(net: &Dpn, g: &ConcreteGraph) -> ConcreteVerdict {
    // P1: every state can still reach a final state
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); g.states.len()];
    for (src, _, dst) in &g.edges {
        preds[*dst].push(*src);
    }
    let mut ok = vec![false; g.states.len()];
    let mut queue: VecDeque<usize> = g.finals.iter().copied().collect();
    for f in &g.finals {
        ok[*f] = true;
    }
    while let Some(i) = queue.pop_front() {
        for p in &preds[i] {
            if !ok[*p] {
                ok[*p] = true;
                queue.push_back(*p);
            }
        }
    }
    let p1 = ok.iter().all(|x| *x);

    let p2 = g.states.iter().all(|s| {
        s.marking == net.final_marking || !s.marking.dominates(&net.final_marking)
    });

    let mut fired = vec![false; net.transitions.len()];
    for (_, t, _) in &g.edges {
        fired[*t] = true;
    }
    let p3 = fired.iter().all(|x| *x);

    ConcreteVerdict { p1, p2, p3 }
}

/// Outcome of one model-vs-abstraction comparison run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleReport {
    pub depth: usize,
    pub trace_result: CompareResult,
    pub concrete: ConcreteVerdict,
    pub abstracted: ConcreteVerdict,
    pub concrete_states: usize,
    pub abstract_nodes: usize,
}

impl OracleReport {
    pub fn agrees(&self) -> bool {
        self.trace_result == CompareResult::Equal && self.concrete == self.abstracted
    }
}

/// Runs both sides and compares bounded traces and verdicts.
pub fn run_comparison(
    net: &Dpn,
    spec: &FiniteDomainSpec,
    depth: usize,
    cap: usize,
) -> Result<OracleReport, OracleError> {
    let m = crate::abstraction::build_representatives(net);
    let cpn = crate::cpn::translate(net, &m);
    let cfg = crate::statespace::ExplorationConfig::default();
    let g = crate::statespace::explore(&cpn, &cfg)
        .map_err(|e| OracleError::InvalidSpec(e.to_string()))?;
    let abs_traces = abstract_traces(&cpn, &g, depth);
    let report = crate::soundness::analyze(&cpn, &g, &crate::soundness::DecisionSet::default());
    let abstracted = ConcreteVerdict {
        p1: report.p1.holds() == Some(true),
        p2: report.p2.holds() == Some(true),
        p3: report.p3.holds() == Some(true),
    };

    let conc_traces = concrete_traces(net, spec, depth, cap)?;
    let cg = explore_concrete(net, spec, cap)?;
    let concrete = concrete_verdict(net, &cg);

    Ok(OracleReport {
        depth,
        trace_result: compare(&conc_traces, &abs_traces),
        concrete,
        abstracted,
        concrete_states: cg.states.len(),
        abstract_nodes: g.node_count(),
    })
}

/// Deterministic generator of small workflow-shaped nets with integer
/// variables and constants in `[0, 10]`: a chain backbone from a unique
/// source to a unique sink, at most one shortcut and at most one loop-back.
pub fn random_net(seed: u64) -> Dpn {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_places = rng.gen_range(3..=6usize);
    let places: Vec<String> = (0..n_places).map(|i| format!("p{i}")).collect();

    let n_vars = rng.gen_range(0..=2usize);
    let names = ["x", "y"];
    let variables: Vec<TypedVariable> =
        (0..n_vars).map(|i| TypedVariable::new(names[i], DomainKind::Int)).collect();
    let mut initial_assignment = SvAssignment::new();
    for v in &variables {
        let init = if rng.gen_bool(0.5) {
            Value::Undefined
        } else {
            Value::Int(rng.gen_range(0..=10))
        };
        initial_assignment.insert(v.name.clone(), init);
    }

    let mut transitions = Vec::new();
    let mut arcs = Vec::new();
    let add_transition = |transitions: &mut Vec<Transition>,
                              arcs: &mut Vec<Arc>,
                              rng: &mut ChaCha8Rng,
                              from: usize,
                              to: usize| {
        let ti = transitions.len();
        let id = format!("t{ti}");
        let guard = random_guard(rng, &variables, &initial_assignment, ti == 0);
        let t = match guard {
            Some(g) => Transition::new(&id).with_guard(g),
            None => Transition::new(&id),
        };
        transitions.push(t);
        arcs.push(Arc::PlaceToTransition(from, ti));
        arcs.push(Arc::TransitionToPlace(ti, to));
    };

    for i in 0..n_places - 1 {
        add_transition(&mut transitions, &mut arcs, &mut rng, i, i + 1);
    }
    // one optional shortcut forward, one optional loop backward
    if n_places >= 3 && rng.gen_bool(0.5) {
        let from = rng.gen_range(0..n_places - 2);
        let to = rng.gen_range(from + 1..n_places);
        add_transition(&mut transitions, &mut arcs, &mut rng, from, to);
    }
    if n_places >= 3 && transitions.len() < 6 && rng.gen_bool(0.3) {
        let to = rng.gen_range(0..n_places - 2);
        let from = rng.gen_range(to + 1..n_places - 1);
        add_transition(&mut transitions, &mut arcs, &mut rng, from, to);
    }

    Dpn {
        places,
        transitions,
        arcs,
        variables,
        initial_assignment,
        initial_marking: Marking::from_counts([(0, 1)]),
        final_marking: Marking::from_counts([(n_places - 1, 1)]),
    }
}

fn random_guard(
    rng: &mut ChaCha8Rng,
    variables: &[TypedVariable],
    initial: &SvAssignment,
    first: bool,
) -> Option<Guard> {
    if variables.is_empty() || rng.gen_bool(0.25) {
        return None;
    }
    // the first transition tends to write, so later reads can succeed
    let atom = |rng: &mut ChaCha8Rng, force_write: bool| {
        let v = &variables[rng.gen_range(0..variables.len())];
        let write = force_write || rng.gen_bool(0.4);
        let r = if write { VarRef::write(&v.name) } else { VarRef::read(&v.name) };
        if rng.gen_bool(0.15) {
            Guard::Defined(r)
        } else {
            let cmp = match rng.gen_range(0..4) {
                0 => Cmp::Lt,
                1 => Cmp::Gt,
                2 => Cmp::Eq,
                _ => Cmp::Neq,
            };
            Guard::Compare(r, cmp, Value::Int(rng.gen_range(0..=10)))
        }
    };
    let force_write = first && initial.values().any(|x| x.is_undefined());
    let a = atom(rng, force_write);
    if rng.gen_bool(0.5) {
        let b = atom(rng, false);
        Some(if rng.gen_bool(0.7) { Guard::and(a, b) } else { Guard::or(a, b) })
    } else {
        Some(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::build_representatives;
    use crate::dpn::validate;

    fn two_step_net() -> Dpn {
        let x = TypedVariable::new("x", DomainKind::Int);
        let xs = std::slice::from_ref(&x);
        Dpn {
            places: vec!["p0".into(), "p1".into(), "p2".into()],
            transitions: vec![
                Transition::new("a")
                    .with_guard(crate::guards::parse_guard("defined(x')", xs).unwrap()),
                Transition::new("b")
                    .with_guard(crate::guards::parse_guard("x > 5", xs).unwrap()),
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

    fn dense(net: &Dpn) -> FiniteDomainSpec {
        dense_spec(net, &build_representatives(net))
    }

    #[test]
    fn depth_zero_is_empty_trace_only() {
        let net = two_step_net();
        let ts = concrete_traces(&net, &dense(&net), 0, 1000).unwrap();
        assert_eq!(ts.traces, [Vec::new()].into_iter().collect());
    }

    #[test]
    fn depth_one_fires_only_the_first_transition() {
        let net = two_step_net();
        let ts = concrete_traces(&net, &dense(&net), 1, 1000).unwrap();
        assert_eq!(
            ts.traces,
            [vec![], vec!["a".to_string()]].into_iter().collect()
        );
    }

    #[test]
    fn guarded_second_step_depends_on_chosen_value() {
        let net = two_step_net();
        let ts = concrete_traces(&net, &dense(&net), 2, 10_000).unwrap();
        assert!(ts.traces.contains(&vec!["a".to_string(), "b".to_string()]));
        // with only small values, b can never fire
        let small = FiniteDomainSpec::new(
            [("x".to_string(), vec![Value::Int(0), Value::Int(5)])].into_iter().collect(),
        );
        let ts = concrete_traces(&net, &small, 2, 10_000).unwrap();
        assert!(!ts.traces.contains(&vec!["a".to_string(), "b".to_string()]));
    }

    #[test]
    fn unsatisfiable_initial_guard_leaves_epsilon_only() {
        let x = TypedVariable::new("x", DomainKind::Int);
        let xs = std::slice::from_ref(&x);
        let mut net = two_step_net();
        net.transitions[0] =
            Transition::new("a").with_guard(crate::guards::parse_guard("x' < 0 && x' > 0", xs).unwrap());
        let ts = concrete_traces(&net, &dense(&net), 3, 1000).unwrap();
        assert_eq!(ts.traces, [Vec::new()].into_iter().collect());
    }

    #[test]
    fn abstract_and_concrete_traces_agree_on_two_step_net() {
        let net = two_step_net();
        let r = run_comparison(&net, &dense(&net), 6, 100_000).unwrap();
        assert_eq!(r.trace_result, CompareResult::Equal);
        assert_eq!(r.concrete, r.abstracted);
    }

    #[test]
    fn omitting_an_interval_is_detected() {
        // without any value above 5, the concrete side misses trace <a, b>:
        // the comparison must be able to fail
        let net = two_step_net();
        let small = FiniteDomainSpec::new(
            [("x".to_string(), vec![Value::Int(0), Value::Int(5)])].into_iter().collect(),
        );
        let conc = concrete_traces(&net, &small, 6, 10_000).unwrap();
        let m = build_representatives(&net);
        let cpn = crate::cpn::translate(&net, &m);
        let g = crate::statespace::explore(&cpn, &Default::default()).unwrap();
        let abs = abstract_traces(&cpn, &g, 6);
        assert_eq!(
            compare(&conc, &abs),
            CompareResult::Differs {
                sequence: vec!["a".to_string(), "b".to_string()],
                only_in_first: false
            }
        );
    }

    #[test]
    fn spec_validation_catches_missing_constant() {
        let net = two_step_net();
        let bad = FiniteDomainSpec::new(
            [("x".to_string(), vec![Value::Int(0)])].into_iter().collect(),
        );
        assert!(matches!(bad.validate(&net), Err(OracleError::InvalidSpec(_))));
    }

    #[test]
    fn spec_json_forms() {
        let net = two_step_net();
        let spec = FiniteDomainSpec::from_json(r#"{"x": {"range": [0, 10], "step": 1}}"#, &net)
            .unwrap();
        assert_eq!(spec.domains["x"].len(), 11);
        let spec = FiniteDomainSpec::from_json(r#"{"x": [0, 5, 6]}"#, &net).unwrap();
        assert_eq!(spec.domains["x"], vec![Value::Int(0), Value::Int(5), Value::Int(6)]);
        assert!(FiniteDomainSpec::from_json(r#"{"z": [1]}"#, &net).is_err());
        assert!(FiniteDomainSpec::from_json(r#"{"x": [true]}"#, &net).is_err());
    }

    #[test]
    fn generated_nets_validate_and_are_workflow_shaped() {
        for seed in 0..50 {
            let net = random_net(seed);
            assert!(validate(&net).is_empty(), "seed {seed}");
            assert_eq!(net.initial_marking, Marking::from_counts([(0, 1)]));
            assert_eq!(
                net.final_marking,
                Marking::from_counts([(net.places.len() - 1, 1)])
            );
        }
    }

    #[test]
    fn generator_is_deterministic() {
        assert_eq!(random_net(7), random_net(7));
    }

    #[test]
    fn sampled_generated_nets_agree_with_abstraction() {
        for seed in 0..20 {
            let net = random_net(seed);
            let spec = dense(&net);
            let r = run_comparison(&net, &spec, 6, 200_000).unwrap();
            assert!(
                r.agrees(),
                "seed {seed}: traces {:?}, concrete {:?}, abstract {:?}",
                r.trace_result,
                r.concrete,
                r.abstracted
            );
        }
    }
}
