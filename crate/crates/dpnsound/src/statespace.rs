//! Reachability-graph construction for translated CPNs: breadth-first
//! exploration with canonical marking deduplication and explicit resource
//! bounds.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::cpn::{fire_cpn, legal_bindings, Cpn, CpnMarking, PlaceRole};
use crate::guards::{Mode, Value};

#[derive(Debug, Clone)]
pub struct ExplorationConfig {
    /// Hard cap on tokens per control place; exceeding it aborts the run
    /// rather than producing a verdict on a truncated graph.
    pub max_tokens_per_place: u32,
    pub max_nodes: usize,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        ExplorationConfig { max_tokens_per_place: 4, max_nodes: 1_000_000 }
    }
}

/// One step of a witness trace: a transition with the values it wrote.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub transition: usize,
    pub writes: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub source: u32,
    pub transition: usize,
    /// Written values only; read values are recoverable from the source
    /// marking.
    pub writes: BTreeMap<String, Value>,
    pub target: u32,
}

#[derive(Debug, Clone)]
pub struct ReachabilityGraph {
    /// Full markings in BFS discovery order; index is the node id.
    pub nodes: Vec<CpnMarking>,
    pub edges: Vec<Edge>,
    pub initial: u32,
    pub final_nodes: BTreeSet<u32>,
    /// Non-final nodes without outgoing edges.
    pub deadlock_nodes: BTreeSet<u32>,
    out_edges: Vec<Vec<usize>>,
    /// BFS tree: the edge through which each node was first discovered.
    parent_edge: Vec<Option<usize>>,
}

impl ReachabilityGraph {
    pub fn out_edges(&self, node: u32) -> impl Iterator<Item = &Edge> {
        self.out_edges[node as usize].iter().map(|i| &self.edges[*i])
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// BFS depth of a node (length of its discovery path).
    pub fn depth(&self, node: u32) -> usize {
        self.witness_path(node).len()
    }

    fn witness_path(&self, node: u32) -> Vec<usize> {
        let mut path = Vec::new();
        let mut cur = node;
        while let Some(e) = self.parent_edge[cur as usize] {
            path.push(e);
            cur = self.edges[e].source;
        }
        path.reverse();
        path
    }
}

#[derive(Debug, Error)]
pub enum ExploreError {
    #[error("token bound exceeded in place `{place}` after {} steps; net may be unbounded", path.len())]
    TokenBoundExceeded { place: String, path: Vec<TraceStep> },
    #[error("node budget of {limit} states exceeded")]
    NodeBudgetExceeded { limit: usize },
}

/// Canonical dedup key: the marking with restriction places removed (their
/// contents are provably constant).
fn canonical_key(cpn: &Cpn, mk: &CpnMarking) -> CpnMarking {
    let mut key = CpnMarking::default();
    for (p, toks) in mk.places() {
        if matches!(cpn.places[p].role, PlaceRole::Restriction(_)) {
            continue;
        }
        for t in toks {
            key.add(p, t.clone());
        }
    }
    key
}

fn binding_writes(binding: &crate::cpn::Binding) -> BTreeMap<String, Value> {
    binding
        .iter()
        .filter(|(v, _)| v.mode == Mode::Write)
        .map(|(v, x)| (v.name.clone(), x.clone()))
        .collect()
}

/// Builds the complete reachability graph of a translated CPN by
/// deterministic breadth-first search from the initial marking.
pub fn explore(cpn: &Cpn, cfg: &ExplorationConfig) -> Result<ReachabilityGraph, ExploreError> {
    let mut nodes = vec![cpn.initial.clone()];
    let mut ids: HashMap<CpnMarking, u32> = HashMap::new();
    ids.insert(canonical_key(cpn, &cpn.initial), 0);
    let mut edges: Vec<Edge> = Vec::new();
    let mut out_edges: Vec<Vec<usize>> = vec![Vec::new()];
    let mut parent_edge: Vec<Option<usize>> = vec![None];
    let mut queue = VecDeque::from([0u32]);

    let witness = |edges: &[Edge], parent_edge: &[Option<usize>], node: u32, last: TraceStep| {
        let mut path = Vec::new();
        let mut cur = node;
        while let Some(e) = parent_edge[cur as usize] {
            path.push(TraceStep {
                transition: edges[e].transition,
                writes: edges[e].writes.clone(),
            });
            cur = edges[e].source;
        }
        path.reverse();
        path.push(last);
        path
    };

    while let Some(src) = queue.pop_front() {
        let mk = nodes[src as usize].clone();
        for t in 0..cpn.transitions.len() {
            for gamma in legal_bindings(cpn, &mk, t) {
                let next = fire_cpn(cpn, &mk, t, &gamma)
                    .expect("legal binding must fire");
                let writes = binding_writes(&gamma);
                // resource bound: cap applies to control places only
                for (p, toks) in next.places() {
                    if matches!(cpn.places[p].role, PlaceRole::Control(_))
                        && toks.len() as u32 > cfg.max_tokens_per_place
                    {
                        return Err(ExploreError::TokenBoundExceeded {
                            place: cpn.places[p].name.clone(),
                            path: witness(
                                &edges,
                                &parent_edge,
                                src,
                                TraceStep { transition: t, writes },
                            ),
                        });
                    }
                }
                debug_assert!(check_data_place_invariants(cpn, &next));
                let key = canonical_key(cpn, &next);
                let target = match ids.get(&key) {
                    Some(id) => *id,
                    None => {
                        let id = nodes.len() as u32;
                        if nodes.len() >= cfg.max_nodes {
                            return Err(ExploreError::NodeBudgetExceeded { limit: cfg.max_nodes });
                        }
                        ids.insert(key, id);
                        nodes.push(next);
                        out_edges.push(Vec::new());
                        parent_edge.push(Some(edges.len()));
                        queue.push_back(id);
                        id
                    }
                };
                let edge_idx = edges.len();
                edges.push(Edge { source: src, transition: t, writes, target });
                out_edges[src as usize].push(edge_idx);
            }
        }
    }

    let final_nodes: BTreeSet<u32> = nodes
        .iter()
        .enumerate()
        .filter(|(_, mk)| cpn.control_projection(mk) == cpn.final_control)
        .map(|(i, _)| i as u32)
        .collect();
    let deadlock_nodes: BTreeSet<u32> = (0..nodes.len() as u32)
        .filter(|n| out_edges[*n as usize].is_empty() && !final_nodes.contains(n))
        .collect();

    Ok(ReachabilityGraph {
        nodes,
        edges,
        initial: 0,
        final_nodes,
        deadlock_nodes,
        out_edges,
        parent_edge,
    })
}

/// Variable places hold exactly one token and restriction places exactly the
/// initial representative multiset, in every reachable marking.
fn check_data_place_invariants(cpn: &Cpn, mk: &CpnMarking) -> bool {
    cpn.places.iter().enumerate().all(|(i, p)| match p.role {
        PlaceRole::Variable(_) => mk.tokens(i).len() == 1,
        PlaceRole::Restriction(_) => mk.tokens(i) == cpn.initial.tokens(i),
        PlaceRole::Control(_) => true,
    })
}

/// All nodes with a directed path into `targets`, including the targets.
pub fn backward_reach(g: &ReachabilityGraph, targets: &BTreeSet<u32>) -> BTreeSet<u32> {
    let mut preds: Vec<Vec<u32>> = vec![Vec::new(); g.nodes.len()];
    for e in &g.edges {
        preds[e.target as usize].push(e.source);
    }
    let mut seen = targets.clone();
    let mut queue: VecDeque<u32> = targets.iter().copied().collect();
    while let Some(n) = queue.pop_front() {
        for p in &preds[n as usize] {
            if seen.insert(*p) {
                queue.push_back(*p);
            }
        }
    }
    seen
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WitnessError {
    #[error("node {0} is not in the graph")]
    UnknownNode(u32),
}

/// A minimum-length trace from the initial node to `to`, following the BFS
/// discovery tree (ties resolved by edge enumeration order).
pub fn shortest_witness(g: &ReachabilityGraph, to: u32) -> Result<Vec<TraceStep>, WitnessError> {
    if (to as usize) >= g.nodes.len() {
        return Err(WitnessError::UnknownNode(to));
    }
    Ok(g.witness_path(to)
        .into_iter()
        .map(|e| TraceStep {
            transition: g.edges[e].transition,
            writes: g.edges[e].writes.clone(),
        })
        .collect())
}

/// Replays a witness trace from the initial marking, resolving each step to
/// the first legal binding with matching written values.
pub fn replay(cpn: &Cpn, steps: &[TraceStep]) -> Result<CpnMarking, String> {
    let mut mk = cpn.initial.clone();
    for (i, step) in steps.iter().enumerate() {
        let gamma = legal_bindings(cpn, &mk, step.transition)
            .into_iter()
            .find(|g| binding_writes(g) == step.writes)
            .ok_or_else(|| {
                format!(
                    "step {i}: no legal binding of `{}` writes {:?}",
                    cpn.transitions[step.transition].id, step.writes
                )
            })?;
        mk = fire_cpn(cpn, &mk, step.transition, &gamma).map_err(|e| e.to_string())?;
    }
    Ok(mk)
}
