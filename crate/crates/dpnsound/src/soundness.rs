//! Property checks over the reachability graph: the three data-aware
//! soundness conditions, the decision-aware conditions, and the
//! classification of the soundness-notion family.

use std::collections::{BTreeMap, BTreeSet};

use crate::cpn::{ArcExpr, Cpn, PlaceRole, Token};
use crate::statespace::{backward_reach, shortest_witness, ReachabilityGraph, TraceStep};

/// Sets of transition indices, each encoding the rules of one decision table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecisionSet(pub Vec<BTreeSet<usize>>);

impl DecisionSet {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn contains(&self, t: usize) -> bool {
        self.0.iter().any(|set| set.contains(&t))
    }
}

/// Evidence for a violated property: the offending node, its control
/// marking, and a shortest trace reaching it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub node: u32,
    pub control_marking: BTreeMap<String, u32>,
    pub trace: Vec<TraceStep>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Violated(Vec<Violation>),
    /// The property quantifies over decision sets and none were declared.
    Vacuous,
    /// The property could not be evaluated (e.g. no unique output place).
    Unavailable(String),
}

impl Verdict {
    pub fn holds(&self) -> Option<bool> {
        match self {
            Verdict::Holds | Verdict::Vacuous => Some(true),
            Verdict::Violated(_) => Some(false),
            Verdict::Unavailable(_) => None,
        }
    }

    pub fn violations(&self) -> &[Violation] {
        match self {
            Verdict::Violated(v) => v,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Notion {
    DataAware,
    DecisionAware,
    DecisionAwareRelaxed,
    DecisionAwareWeak,
    DecisionAwareLazy,
    DecisionAwareEasy,
}

impl Notion {
    pub const ALL: [Notion; 6] = [
        Notion::DataAware,
        Notion::DecisionAware,
        Notion::DecisionAwareRelaxed,
        Notion::DecisionAwareWeak,
        Notion::DecisionAwareLazy,
        Notion::DecisionAwareEasy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Notion::DataAware => "data-aware",
            Notion::DecisionAware => "decision-aware",
            Notion::DecisionAwareRelaxed => "decision-aware-relaxed",
            Notion::DecisionAwareWeak => "decision-aware-weak",
            Notion::DecisionAwareLazy => "decision-aware-lazy",
            Notion::DecisionAwareEasy => "decision-aware-easy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotionVerdict {
    pub holds: Option<bool>,
    /// True when the verdict degrades to its control part because no
    /// decision sets were declared.
    pub vacuous: bool,
}

/// One deadlock control marking with its shortest witness. Several graph
/// nodes may share a control marking; the witness is the shortest among them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeadlockReport {
    pub control_marking: BTreeMap<String, u32>,
    pub witness: Vec<TraceStep>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stats {
    pub nodes: usize,
    pub edges: usize,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SoundnessReport {
    pub p1: Verdict,
    pub p2: Verdict,
    pub p3: Verdict,
    pub p4: Verdict,
    pub p5: Verdict,
    pub p2b: Verdict,
    pub p1b: Verdict,
    /// Transition ids with no edge in the reachability graph.
    pub dead_transitions: Vec<String>,
    pub deadlocks: Vec<DeadlockReport>,
    /// Nodes with no path to a final marking but with outgoing edges.
    pub livelocks: Vec<Violation>,
    /// Control markings strictly dominating the final marking.
    pub improper_completions: Vec<Violation>,
    pub notions: BTreeMap<Notion, NotionVerdict>,
    pub stats: Stats,
}

impl SoundnessReport {
    pub fn data_aware_sound(&self) -> bool {
        self.notions[&Notion::DataAware].holds == Some(true)
    }

    /// True iff every evaluated property holds.
    pub fn all_hold(&self) -> bool {
        [&self.p1, &self.p2, &self.p3, &self.p4, &self.p5, &self.p2b, &self.p1b]
            .iter()
            .all(|v| v.holds() != Some(false))
    }
}

fn control_marking(cpn: &Cpn, g: &ReachabilityGraph, node: u32) -> BTreeMap<String, u32> {
    let mk = &g.nodes[node as usize];
    let mut out = BTreeMap::new();
    for (i, p) in cpn.places.iter().enumerate() {
        if matches!(p.role, PlaceRole::Control(_)) {
            let n = mk.tokens(i).len() as u32;
            if n > 0 {
                out.insert(p.name.clone(), n);
            }
        }
    }
    out
}

fn violation(cpn: &Cpn, g: &ReachabilityGraph, node: u32, detail: String) -> Violation {
    Violation {
        node,
        control_marking: control_marking(cpn, g, node),
        trace: shortest_witness(g, node).expect("node is in the graph"),
        detail,
    }
}

/// P1: from every reachable state a final marking remains reachable.
pub fn check_p1(cpn: &Cpn, g: &ReachabilityGraph) -> Verdict {
    let ok = backward_reach(g, &g.final_nodes);
    let bad: Vec<Violation> = (0..g.node_count() as u32)
        .filter(|n| !ok.contains(n))
        .map(|n| {
            let kind = if g.deadlock_nodes.contains(&n) { "deadlock" } else { "livelock" };
            violation(cpn, g, n, format!("{kind}: no path to a final marking"))
        })
        .collect();
    if bad.is_empty() {
        Verdict::Holds
    } else {
        Verdict::Violated(bad)
    }
}

/// P2: no reachable control marking strictly dominates the final marking.
pub fn check_p2(cpn: &Cpn, g: &ReachabilityGraph) -> Verdict {
    let bad: Vec<Violation> = (0..g.node_count() as u32)
        .filter(|n| {
            let proj = cpn.control_projection(&g.nodes[*n as usize]);
            proj != cpn.final_control && proj.dominates(&cpn.final_control)
        })
        .map(|n| violation(cpn, g, n, "improper completion: final marking strictly dominated".into()))
        .collect();
    if bad.is_empty() {
        Verdict::Holds
    } else {
        Verdict::Violated(bad)
    }
}

/// P3: every transition fires on some edge of the graph. Returns the verdict
/// together with the dead transition ids.
pub fn check_p3(cpn: &Cpn, g: &ReachabilityGraph) -> (Verdict, Vec<String>) {
    let mut fired = vec![false; cpn.transitions.len()];
    for e in &g.edges {
        fired[e.transition] = true;
    }
    let dead: Vec<String> = cpn
        .transitions
        .iter()
        .enumerate()
        .filter(|(i, _)| !fired[*i])
        .map(|(_, t)| t.id.clone())
        .collect();
    let verdict = if dead.is_empty() {
        Verdict::Holds
    } else {
        Verdict::Violated(
            dead.iter()
                .map(|id| Violation {
                    node: g.initial,
                    control_marking: BTreeMap::new(),
                    trace: Vec::new(),
                    detail: format!("transition `{id}` never fires"),
                })
                .collect(),
        )
    };
    (verdict, dead)
}

/// Control-enablement of a transition in a marking: every place feeding it
/// through a black arc holds a black token. Variable and restriction places
/// are always populated, so they never block enablement.
fn control_enabled(cpn: &Cpn, g: &ReachabilityGraph, node: u32, t: usize) -> bool {
    let mk = &g.nodes[node as usize];
    cpn.in_arcs(t).all(|a| match a.expr {
        ArcExpr::Black => mk.tokens(a.place).contains(&Token::Black),
        ArcExpr::Var(_) => true,
    })
}

/// P4 (conditional completeness): wherever a decision set is enabled by the
/// marking, at least one of its transitions can legally fire.
pub fn check_p4(cpn: &Cpn, g: &ReachabilityGraph, decs: &DecisionSet) -> Verdict {
    if decs.is_empty() {
        return Verdict::Vacuous;
    }
    let mut bad = Vec::new();
    for node in 0..g.node_count() as u32 {
        for (di, dec) in decs.0.iter().enumerate() {
            let enabled = dec.iter().any(|t| control_enabled(cpn, g, node, *t));
            if !enabled {
                continue;
            }
            let fires = g.out_edges(node).any(|e| dec.contains(&e.transition));
            if !fires {
                bad.push(violation(
                    cpn,
                    g,
                    node,
                    format!("decision set #{di} is enabled but no rule can fire"),
                ));
            }
        }
    }
    if bad.is_empty() {
        Verdict::Holds
    } else {
        Verdict::Violated(bad)
    }
}

/// P5 (conditional output coverage): no decision transition fires into a
/// dead-end state.
pub fn check_p5(cpn: &Cpn, g: &ReachabilityGraph, decs: &DecisionSet) -> Verdict {
    if decs.is_empty() {
        return Verdict::Vacuous;
    }
    let mut bad = Vec::new();
    let mut seen = BTreeSet::new();
    for e in &g.edges {
        if !decs.contains(e.transition) {
            continue;
        }
        let target_is_dead_end =
            !g.final_nodes.contains(&e.target) && g.out_edges(e.target).next().is_none();
        if target_is_dead_end && seen.insert(e.target) {
            bad.push(violation(
                cpn,
                g,
                e.target,
                format!(
                    "decision transition `{}` leads to a dead end",
                    cpn.transitions[e.transition].id
                ),
            ));
        }
    }
    if bad.is_empty() {
        Verdict::Holds
    } else {
        Verdict::Violated(bad)
    }
}

/// P2b: the output place never accumulates two or more tokens.
pub fn check_p2b(cpn: &Cpn, g: &ReachabilityGraph, out_place: usize) -> Verdict {
    let bad: Vec<Violation> = (0..g.node_count() as u32)
        .filter(|n| g.nodes[*n as usize].tokens(out_place).len() > 1)
        .map(|n| {
            violation(cpn, g, n, format!("output place `{}` holds more than one token", cpn.places[out_place].name))
        })
        .collect();
    if bad.is_empty() {
        Verdict::Holds
    } else {
        Verdict::Violated(bad)
    }
}

/// P1b: at least one run reaches the final marking.
pub fn check_p1b(g: &ReachabilityGraph) -> Verdict {
    if g.final_nodes.is_empty() {
        Verdict::Violated(vec![Violation {
            node: g.initial,
            control_marking: BTreeMap::new(),
            trace: Vec::new(),
            detail: "no run reaches the final marking".into(),
        }])
    } else {
        Verdict::Holds
    }
}

fn and(xs: &[Option<bool>]) -> Option<bool> {
    let mut acc = true;
    for x in xs {
        match x {
            Some(false) => return Some(false),
            Some(true) => {}
            None => return None,
        }
    }
    acc &= true;
    Some(acc)
}

/// Applies the notion formulas to the individual property verdicts.
pub fn classify(
    p1: &Verdict,
    p2: &Verdict,
    p3: &Verdict,
    p4: &Verdict,
    p5: &Verdict,
    p2b: &Verdict,
    p1b: &Verdict,
    decs_declared: bool,
) -> BTreeMap<Notion, NotionVerdict> {
    let v = |holds: Option<bool>, uses_decisions: bool| NotionVerdict {
        holds,
        vacuous: uses_decisions && !decs_declared,
    };
    let data_aware = and(&[p1.holds(), p2.holds(), p3.holds()]);
    let mut out = BTreeMap::new();
    out.insert(Notion::DataAware, v(data_aware, false));
    // equivalent to data-aware soundness once decisions are encoded as
    // transitions
    out.insert(Notion::DecisionAware, v(data_aware, false));
    out.insert(
        Notion::DecisionAwareRelaxed,
        v(and(&[p3.holds(), p4.holds(), p5.holds()]), true),
    );
    out.insert(
        Notion::DecisionAwareWeak,
        v(and(&[p1.holds(), p2.holds(), p4.holds()]), true),
    );
    out.insert(Notion::DecisionAwareLazy, v(and(&[p1.holds(), p2b.holds()]), false));
    out.insert(Notion::DecisionAwareEasy, v(p1b.holds(), false));
    out
}

/// Runs every property check and assembles the report.
pub fn analyze(cpn: &Cpn, g: &ReachabilityGraph, decs: &DecisionSet) -> SoundnessReport {
    let p1 = check_p1(cpn, g);
    let p2 = check_p2(cpn, g);
    let (p3, dead_transitions) = check_p3(cpn, g);
    let p4 = check_p4(cpn, g, decs);
    let p5 = check_p5(cpn, g, decs);
    let out_places: Vec<usize> = cpn.final_control.iter().map(|(p, _)| p).collect();
    let p2b = if out_places.len() == 1 {
        check_p2b(cpn, g, out_places[0])
    } else {
        Verdict::Unavailable(format!(
            "final marking spans {} places; lazy soundness needs a unique output place",
            out_places.len()
        ))
    };
    let p1b = check_p1b(g);

    // group deadlock nodes by control marking, keeping the shortest witness
    let mut deadlock_map: BTreeMap<BTreeMap<String, u32>, Vec<TraceStep>> = BTreeMap::new();
    for n in &g.deadlock_nodes {
        let cm = control_marking(cpn, g, *n);
        let w = shortest_witness(g, *n).expect("deadlock node is in the graph");
        deadlock_map
            .entry(cm)
            .and_modify(|cur| {
                if w.len() < cur.len() {
                    *cur = w.clone();
                }
            })
            .or_insert(w);
    }
    let deadlocks = deadlock_map
        .into_iter()
        .map(|(control_marking, witness)| DeadlockReport { control_marking, witness })
        .collect();

    let livelocks = p1
        .violations()
        .iter()
        .filter(|v| !g.deadlock_nodes.contains(&v.node))
        .cloned()
        .collect();
    let improper_completions = p2.violations().to_vec();

    let notions = classify(&p1, &p2, &p3, &p4, &p5, &p2b, &p1b, !decs.is_empty());

    SoundnessReport {
        p1,
        p2,
        p3,
        p4,
        p5,
        p2b,
        p1b,
        dead_transitions,
        deadlocks,
        livelocks,
        improper_completions,
        notions,
        stats: Stats { nodes: g.node_count(), edges: g.edges.len(), wall_ms: 0 },
    }
}
