//! Decision tables with unary-test cells, and their compilation into plain
//! net fragments: each rule merged with the branch that covers its outputs
//! becomes one transition guarded by the rule's input conditions (read mode)
//! and its output literals (write mode).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::var_abstraction;
use crate::dpn::{Arc, Dpn, Transition};
use crate::guards::{
    eval_guard, extract_constants, parse_guard, Cmp, DomainKind, Guard, Mode, TypedVariable, Value,
    VarRef, VariableAssignment,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    /// One unary test per table input, e.g. `"<= 5000"`, `"-"`, `"[2..8)"`.
    #[serde(rename = "when")]
    pub input_entries: Vec<String>,
    /// One literal per table output.
    #[serde(rename = "then")]
    pub output_entries: Vec<String>,
}

/// A condition over the table's outputs routing to one successor transition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branch {
    pub guard: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionTable {
    pub name: String,
    #[serde(rename = "hitPolicy")]
    pub hit_policy: String,
    pub inputs: Vec<TypedVariable>,
    pub outputs: Vec<TypedVariable>,
    pub rules: Vec<Rule>,
    #[serde(default)]
    pub branches: Vec<Branch>,
}

/// The compiled shape of one table: transitions ready to be stitched into a
/// host net. Arcs are decided at embed time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionFragment {
    pub table: String,
    /// Merged rule-and-branch transitions; ids follow the branch targets.
    pub transitions: Vec<CompiledTransition>,
    /// Rules whose outputs match no branch, kept as dead-end transitions so
    /// the miss shows up in the state space rather than vanishing.
    pub stranded: Vec<CompiledTransition>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledTransition {
    pub rule: usize,
    pub transition: Transition,
    /// Host transition id the covering branch routes to; `None` for
    /// stranded rules.
    pub target: Option<String>,
}

impl DecisionFragment {
    /// Ids of every transition encoding a rule, stranded ones included.
    pub fn transition_ids(&self) -> Vec<String> {
        self.transitions
            .iter()
            .chain(&self.stranded)
            .map(|c| c.transition.id.clone())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DmnDiagnostic {
    /// The rule's outputs satisfy no branch guard: a completion risk.
    UncoveredOutput { rule: usize },
}

impl std::fmt::Display for DmnDiagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DmnDiagnostic::UncoveredOutput { rule } => {
                write!(f, "outputs of rule {rule} match no branch")
            }
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DmnError {
    #[error("hit policy `{0}` is not supported: only `unique` is accepted, other policies multiply the output combinations")]
    NonUniqueHitPolicy(String),
    #[error("rule {rule}: expected {expected} {what} entries, got {got}")]
    RuleArity { rule: usize, what: &'static str, expected: usize, got: usize },
    #[error("rule {rule}, column `{column}`: {message}")]
    BadCell { rule: usize, column: String, message: String },
    #[error("rules {first} and {second} overlap on inputs {inputs}: unique hit policy violated")]
    OverlappingRules { first: usize, second: usize, inputs: String },
    #[error("branch targeting `{target}` mentions `{var}`, which is not a table output")]
    BranchMentionsNonOutput { target: String, var: String },
    #[error("branch targeting `{target}`: {message}")]
    BadBranch { target: String, message: String },
    #[error("unknown place `{0}` in host net")]
    UnknownPlace(String),
    #[error("branch target `{0}` is not a transition of the host net")]
    UnknownTransition(String),
}

fn parse_literal(text: &str, v: &TypedVariable) -> Result<Value, String> {
    let t = text.trim();
    if t.starts_with('"') {
        if t.len() < 2 || !t.ends_with('"') {
            return Err(format!("unterminated string literal `{t}`"));
        }
        let s = &t[1..t.len() - 1];
        if v.kind != DomainKind::Str {
            return Err(format!("string literal on {} variable `{}`", v.kind, v.name));
        }
        return Ok(Value::Str(s.to_string()));
    }
    if t == "true" || t == "false" {
        if v.kind != DomainKind::Bool {
            return Err(format!("boolean literal on {} variable `{}`", v.kind, v.name));
        }
        return Ok(Value::Bool(t == "true"));
    }
    match v.kind {
        DomainKind::Int => t
            .parse::<i64>()
            .map(Value::Int)
            .map_err(|_| format!("`{t}` is not an integer literal")),
        DomainKind::Real => t
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .map(Value::real)
            .ok_or_else(|| format!("`{t}` is not a numeric literal")),
        DomainKind::Bool => Err(format!("`{t}` is not a boolean literal")),
        DomainKind::Str => Err(format!("`{t}` is not a quoted string literal")),
    }
}

fn cmp_guard(v: &TypedVariable, cmp: Cmp, k: Value) -> Guard {
    Guard::Compare(VarRef::read(&v.name), cmp, k)
}

fn le_guard(v: &TypedVariable, k: Value) -> Guard {
    Guard::or(cmp_guard(v, Cmp::Lt, k.clone()), cmp_guard(v, Cmp::Eq, k))
}

fn ge_guard(v: &TypedVariable, k: Value) -> Guard {
    Guard::or(cmp_guard(v, Cmp::Gt, k.clone()), cmp_guard(v, Cmp::Eq, k))
}

/// Splits on commas that sit outside string quotes.
fn split_list(text: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut cur = String::new();
    let mut in_str = false;
    for c in text.chars() {
        match c {
            '"' => {
                in_str = !in_str;
                cur.push(c);
            }
            ',' if !in_str => {
                parts.push(std::mem::take(&mut cur));
            }
            _ => cur.push(c),
        }
    }
    parts.push(cur);
    parts
}

/// Parses a unary test cell into a read-mode guard over `v`.
///
/// Accepted forms: `-` (any defined value), a literal (equality), `⊙ lit`
/// with `⊙` one of `< <= > >=`, an interval such as `[2..8)` or `]2..8[`,
/// and a comma-separated list of literals (disjunction of equalities).
pub fn parse_sfeel(test: &str, v: &TypedVariable) -> Result<Guard, String> {
    let t = test.trim();
    if t.is_empty() {
        return Err("empty cell".into());
    }
    if t == "-" {
        return Ok(Guard::Defined(VarRef::read(&v.name)));
    }
    if let Some(rest) = t.strip_prefix("<=") {
        let k = require_ordered(v, parse_literal(rest, v)?)?;
        return Ok(le_guard(v, k));
    }
    if let Some(rest) = t.strip_prefix(">=") {
        let k = require_ordered(v, parse_literal(rest, v)?)?;
        return Ok(ge_guard(v, k));
    }
    if let Some(rest) = t.strip_prefix('<') {
        let k = require_ordered(v, parse_literal(rest, v)?)?;
        return Ok(cmp_guard(v, Cmp::Lt, k));
    }
    if let Some(rest) = t.strip_prefix('>') {
        let k = require_ordered(v, parse_literal(rest, v)?)?;
        return Ok(cmp_guard(v, Cmp::Gt, k));
    }
    let first = t.chars().next().unwrap();
    if matches!(first, '[' | '(' | ']') && t.contains("..") {
        return parse_interval(t, v);
    }
    let parts = split_list(t);
    let mut g: Option<Guard> = None;
    for p in &parts {
        let k = parse_literal(p, v)?;
        let atom = cmp_guard(v, Cmp::Eq, k);
        g = Some(match g {
            None => atom,
            Some(prev) => Guard::or(prev, atom),
        });
    }
    Ok(g.unwrap())
}

fn require_ordered(v: &TypedVariable, k: Value) -> Result<Value, String> {
    if v.kind.is_numeric() {
        Ok(k)
    } else {
        Err(format!("ordered test on {} variable `{}`", v.kind, v.name))
    }
}

fn parse_interval(t: &str, v: &TypedVariable) -> Result<Guard, String> {
    if !v.kind.is_numeric() {
        return Err(format!("interval test on {} variable `{}`", v.kind, v.name));
    }
    let open = t.chars().next().unwrap();
    let close = t.chars().last().unwrap();
    let lower_closed = match open {
        '[' => true,
        '(' | ']' => false,
        _ => return Err(format!("bad interval delimiter `{open}`")),
    };
    let upper_closed = match close {
        ']' => true,
        ')' | '[' => false,
        _ => return Err(format!("bad interval delimiter `{close}`")),
    };
    let inner = &t[open.len_utf8()..t.len() - close.len_utf8()];
    let (lo, hi) = inner
        .split_once("..")
        .ok_or_else(|| format!("interval `{t}` is missing `..`"))?;
    let lo = parse_literal(lo, v)?;
    let hi = parse_literal(hi, v)?;
    let lower = if lower_closed { ge_guard(v, lo) } else { cmp_guard(v, Cmp::Gt, lo) };
    let upper = if upper_closed { le_guard(v, hi) } else { cmp_guard(v, Cmp::Lt, hi) };
    Ok(Guard::and(lower, upper))
}

/// Flattens nested conjunctions into their conjunct list.
fn conjuncts(g: &Guard, out: &mut Vec<Guard>) {
    match g {
        Guard::And(a, b) => {
            conjuncts(a, out);
            conjuncts(b, out);
        }
        other => out.push(other.clone()),
    }
}

/// Builds a right-leaning conjunction, dropping syntactically repeated
/// conjuncts so that branch conditions identical to output literals do not
/// show up twice in the merged guard.
fn conjoin(parts: Vec<Guard>) -> Option<Guard> {
    let mut seen: Vec<Guard> = Vec::new();
    for p in parts {
        let mut flat = Vec::new();
        conjuncts(&p, &mut flat);
        for c in flat {
            if !seen.contains(&c) {
                seen.push(c);
            }
        }
    }
    let mut it = seen.into_iter();
    let first = it.next()?;
    Some(it.fold(first, Guard::and))
}

fn rewrite_to_write(g: &Guard, vars: &BTreeSet<String>) -> Guard {
    let fix = |r: &VarRef| {
        if vars.contains(&r.name) {
            VarRef { name: r.name.clone(), mode: Mode::Write }
        } else {
            r.clone()
        }
    };
    match g {
        Guard::Defined(r) => Guard::Defined(fix(r)),
        Guard::Compare(r, c, k) => Guard::Compare(fix(r), *c, k.clone()),
        Guard::And(a, b) => {
            Guard::and(rewrite_to_write(a, vars), rewrite_to_write(b, vars))
        }
        Guard::Or(a, b) => Guard::or(rewrite_to_write(a, vars), rewrite_to_write(b, vars)),
    }
}

struct ParsedRule {
    input_guard: Option<Guard>,
    outputs: Vec<Value>,
}

fn parse_rules(tbl: &DecisionTable) -> Result<Vec<ParsedRule>, DmnError> {
    let mut out = Vec::new();
    for (i, r) in tbl.rules.iter().enumerate() {
        if r.input_entries.len() != tbl.inputs.len() {
            return Err(DmnError::RuleArity {
                rule: i,
                what: "input",
                expected: tbl.inputs.len(),
                got: r.input_entries.len(),
            });
        }
        if r.output_entries.len() != tbl.outputs.len() {
            return Err(DmnError::RuleArity {
                rule: i,
                what: "output",
                expected: tbl.outputs.len(),
                got: r.output_entries.len(),
            });
        }
        let mut input_guard = None;
        for (v, cell) in tbl.inputs.iter().zip(&r.input_entries) {
            let g = parse_sfeel(cell, v).map_err(|message| DmnError::BadCell {
                rule: i,
                column: v.name.clone(),
                message,
            })?;
            input_guard = Some(Guard::and_opt(input_guard, g));
        }
        let mut outputs = Vec::new();
        for (v, cell) in tbl.outputs.iter().zip(&r.output_entries) {
            let k = parse_literal(cell, v).map_err(|message| DmnError::BadCell {
                rule: i,
                column: v.name.clone(),
                message,
            })?;
            outputs.push(k);
        }
        out.push(ParsedRule { input_guard, outputs });
    }
    Ok(out)
}

/// Unique hit policy means pairwise unsatisfiable input conditions. Because
/// guards cannot tell apart values inside one abstract interval, it is
/// enough to test every representative input tuple.
fn check_unique(tbl: &DecisionTable, rules: &[ParsedRule]) -> Result<(), DmnError> {
    let guards: Vec<&Guard> = rules.iter().filter_map(|r| r.input_guard.as_ref()).collect();
    let mut axes: Vec<Vec<Value>> = Vec::new();
    for v in &tbl.inputs {
        let constants = extract_constants(guards.iter().copied(), v);
        let a = var_abstraction(v.kind, constants);
        axes.push(a.representatives.iter().cloned().collect());
    }
    let mut idx = vec![0usize; axes.len()];
    loop {
        let mut beta = VariableAssignment::new();
        for (v, (axis, i)) in tbl.inputs.iter().zip(axes.iter().zip(&idx)) {
            beta.insert(VarRef::read(&v.name), axis[*i].clone());
        }
        let mut hit: Option<usize> = None;
        for (ri, r) in rules.iter().enumerate() {
            let sat = match &r.input_guard {
                Some(g) => eval_guard(g, &beta).expect("inputs are bound"),
                None => true,
            };
            if sat {
                if let Some(first) = hit {
                    let inputs = tbl
                        .inputs
                        .iter()
                        .map(|v| format!("{}={}", v.name, beta[&VarRef::read(&v.name)]))
                        .collect::<Vec<_>>()
                        .join(", ");
                    return Err(DmnError::OverlappingRules { first, second: ri, inputs });
                }
                hit = Some(ri);
            }
        }
        let mut k = axes.len();
        loop {
            if k == 0 {
                return Ok(());
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Compiles a table into one transition per rule, merged with the branch
/// covering its outputs. Rules left without a branch become stranded
/// dead-end transitions and an [`DmnDiagnostic::UncoveredOutput`] entry.
pub fn compile_table(
    tbl: &DecisionTable,
) -> Result<(DecisionFragment, Vec<DmnDiagnostic>), DmnError> {
    if tbl.hit_policy.to_lowercase() != "unique" {
        return Err(DmnError::NonUniqueHitPolicy(tbl.hit_policy.clone()));
    }
    let rules = parse_rules(tbl)?;
    check_unique(tbl, &rules)?;

    let output_names: BTreeSet<String> = tbl.outputs.iter().map(|v| v.name.clone()).collect();
    let mut branch_guards = Vec::new();
    for b in &tbl.branches {
        let g = parse_guard(&b.guard, &tbl.outputs).map_err(|e| DmnError::BadBranch {
            target: b.target.clone(),
            message: e.to_string(),
        })?;
        let (reads, writes) = g.occurrences();
        for var in reads.iter().chain(&writes) {
            if !output_names.contains(var) {
                return Err(DmnError::BranchMentionsNonOutput {
                    target: b.target.clone(),
                    var: var.clone(),
                });
            }
        }
        if !writes.is_empty() {
            return Err(DmnError::BadBranch {
                target: b.target.clone(),
                message: "branch guards read the decided outputs, they do not write".into(),
            });
        }
        branch_guards.push(g);
    }

    let mut transitions = Vec::new();
    let mut stranded = Vec::new();
    let mut diagnostics = Vec::new();
    let mut used_ids: BTreeSet<String> = BTreeSet::new();
    for (ri, r) in rules.iter().enumerate() {
        // outputs are literals, so branch satisfiability is substitution
        let mut beta = VariableAssignment::new();
        for (v, k) in tbl.outputs.iter().zip(&r.outputs) {
            beta.insert(VarRef::read(&v.name), k.clone());
        }
        let output_eqs: Vec<Guard> = tbl
            .outputs
            .iter()
            .zip(&r.outputs)
            .map(|(v, k)| Guard::Compare(VarRef::write(&v.name), Cmp::Eq, k.clone()))
            .collect();
        let mut covered = false;
        for (b, bg) in tbl.branches.iter().zip(&branch_guards) {
            if !eval_guard(bg, &beta).expect("outputs are bound") {
                continue;
            }
            covered = true;
            let mut parts = Vec::new();
            if let Some(g) = &r.input_guard {
                parts.push(g.clone());
            }
            parts.extend(output_eqs.iter().cloned());
            parts.push(rewrite_to_write(bg, &output_names));
            let guard = conjoin(parts).expect("output equalities are never empty");
            let mut id = b.target.clone();
            if !used_ids.insert(id.clone()) {
                id = format!("{}__r{}", b.target, ri);
                used_ids.insert(id.clone());
            }
            let t = Transition::new(&id).with_guard(guard);
            transitions.push(CompiledTransition {
                rule: ri,
                transition: t,
                target: Some(b.target.clone()),
            });
        }
        if !covered {
            diagnostics.push(DmnDiagnostic::UncoveredOutput { rule: ri });
            let mut parts = Vec::new();
            if let Some(g) = &r.input_guard {
                parts.push(g.clone());
            }
            parts.extend(output_eqs.iter().cloned());
            let guard = conjoin(parts).expect("output equalities are never empty");
            let id = format!("{}__uncovered_r{}", tbl.name, ri);
            let t = Transition::new(&id).with_guard(guard);
            stranded.push(CompiledTransition { rule: ri, transition: t, target: None });
        }
    }
    Ok((DecisionFragment { table: tbl.name.clone(), transitions, stranded }, diagnostics))
}

/// Stitches a compiled fragment into `host` at place `at`.
///
/// Each merged transition takes over the output arcs of the host transition
/// its branch targets; the original transition is removed. When `siblings`
/// other transitions or fragments share the place, the fragment gets a
/// private entry place behind an invisible internal transition so that
/// choosing this decision does not disable the others halfway.
pub fn embed_fragment(
    host: &Dpn,
    at: &str,
    frag: &DecisionFragment,
    siblings: usize,
) -> Result<Dpn, DmnError> {
    let mut net = host.clone();
    let shared = net
        .place_index(at)
        .ok_or_else(|| DmnError::UnknownPlace(at.to_string()))?;

    let entry = if siblings > 0 {
        let entry = net.places.len();
        net.places.push(format!("{}__entry", frag.table));
        let mut internal = Transition::new(format!("{}__enter", frag.table));
        internal.invisible = true;
        let ti = net.transitions.len();
        net.transitions.push(internal);
        net.arcs.push(Arc::PlaceToTransition(shared, ti));
        net.arcs.push(Arc::TransitionToPlace(ti, entry));
        entry
    } else {
        shared
    };

    // several merged transitions may share a branch target: resolve each
    // target's routing once, then drop the originals
    let mut routing: BTreeMap<String, (Vec<usize>, Option<String>)> = BTreeMap::new();
    for c in &frag.transitions {
        let target = c.target.as_ref().expect("covered transition has a target");
        if routing.contains_key(target) {
            continue;
        }
        let old = net
            .transition_index(target)
            .ok_or_else(|| DmnError::UnknownTransition(target.clone()))?;
        routing.insert(
            target.clone(),
            (net.output_places(old), net.transitions[old].label.clone()),
        );
    }
    let mut removed: Vec<usize> = routing
        .keys()
        .map(|id| net.transition_index(id).expect("target resolved above"))
        .collect();
    removed.sort_unstable_by(|a, b| b.cmp(a));
    for i in removed {
        remove_transition(&mut net, i);
    }
    for c in &frag.transitions {
        let target = c.target.as_ref().expect("covered transition has a target");
        let (outputs, label) = &routing[target];
        let ti = net.transitions.len();
        let mut t = c.transition.clone();
        t.label = label.clone();
        net.transitions.push(t);
        net.arcs.push(Arc::PlaceToTransition(entry, ti));
        for p in outputs {
            net.arcs.push(Arc::TransitionToPlace(ti, *p));
        }
    }

    if !frag.stranded.is_empty() {
        let dead = net.places.len();
        net.places.push(format!("{}__uncovered", frag.table));
        for c in &frag.stranded {
            let ti = net.transitions.len();
            net.transitions.push(c.transition.clone());
            net.arcs.push(Arc::PlaceToTransition(entry, ti));
            net.arcs.push(Arc::TransitionToPlace(ti, dead));
        }
    }
    Ok(net)
}

fn remove_transition(net: &mut Dpn, index: usize) {
    net.transitions.remove(index);
    net.arcs.retain(|a| match a {
        Arc::PlaceToTransition(_, t) | Arc::TransitionToPlace(t, _) => *t != index,
    });
    for a in &mut net.arcs {
        match a {
            Arc::PlaceToTransition(_, t) | Arc::TransitionToPlace(t, _) => {
                if *t > index {
                    *t -= 1;
                }
            }
        }
    }
}

/// Transition indices of the embedded fragment in `net`, for use as one
/// decision set.
pub fn decision_set_of(net: &Dpn, frag: &DecisionFragment) -> BTreeSet<usize> {
    frag.transition_ids()
        .iter()
        .filter_map(|id| net.transition_index(id))
        .collect()
}

/// Loads a table from its JSON form.
pub fn table_from_json(text: &str) -> Result<DecisionTable, serde_json::Error> {
    serde_json::from_str(text)
}

pub fn table_to_json(tbl: &DecisionTable) -> String {
    serde_json::to_string_pretty(tbl).expect("table serializes")
}

/// The running example's table: assessment type from `ok` and `amount`.
#[cfg(test)]
pub(crate) fn sample_table() -> DecisionTable {
    DecisionTable {
        name: "assessment".into(),
        hit_policy: "unique".into(),
        inputs: vec![
            TypedVariable::new("ok", DomainKind::Bool),
            TypedVariable::new("amount", DomainKind::Int),
        ],
        outputs: vec![TypedVariable::new("atype", DomainKind::Str)],
        rules: vec![
            Rule { input_entries: vec!["false".into(), "-".into()], output_entries: vec!["\"none\"".into()] },
            Rule {
                input_entries: vec!["true".into(), "<= 5000".into()],
                output_entries: vec!["\"simple\"".into()],
            },
            Rule {
                input_entries: vec!["true".into(), "> 5000".into()],
                output_entries: vec!["\"advanced\"".into()],
            },
        ],
        branches: vec![
            Branch { guard: "atype == \"none\"".into(), target: "t1".into() },
            Branch { guard: "atype == \"simple\"".into(), target: "t2".into() },
            Branch { guard: "atype == \"advanced\"".into(), target: "t3".into() },
        ],
    }
}
