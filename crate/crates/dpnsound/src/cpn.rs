//! Colored Petri nets, legal bindings and firing, and the DPN→CPN
//! translation with variable places and restriction places.
//!
//! Each DPN variable `v` becomes a variable place holding exactly one token
//! (the current value of `v`) and a restriction place holding one token per
//! representative value. Writes consume a representative token and return it,
//! so the restriction place contents never change.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::abstraction::RepresentativeMap;
use crate::dpn::{Dpn, DpnState, Marking, SvAssignment, Transition};
use crate::guards::{eval_guard, TypedVariable, Value, VarRef, VariableAssignment};

/// Token color: a plain black token or a data value. Undefined values occur
/// only as initial tokens of variable places.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Token {
    Black,
    Color(Value),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Black => f.write_str("•"),
            Token::Color(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ColorSet {
    Black,
    Data(crate::guards::DomainKind),
}

/// What a CPN place stands for in the translated net.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PlaceRole {
    /// A place of the original net (index into the DPN's place list).
    Control(usize),
    /// Variable place ξ(v) (index into the variable list).
    Variable(usize),
    /// Restriction place ρ(v) (index into the variable list).
    Restriction(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpnPlace {
    pub name: String,
    pub role: PlaceRole,
    pub color: ColorSet,
}

/// Arc inscription: the dummy black variable or a read/write occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ArcExpr {
    Black,
    Var(VarRef),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpnArc {
    /// Place index for place→transition arcs.
    pub place: usize,
    pub transition: usize,
    pub into_transition: bool,
    pub expr: ArcExpr,
}

/// Marking of a CPN: a canonical (sorted) multiset of tokens per place.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct CpnMarking(BTreeMap<usize, Vec<Token>>);

impl CpnMarking {
    pub fn tokens(&self, place: usize) -> &[Token] {
        self.0.get(&place).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn add(&mut self, place: usize, token: Token) {
        let ts = self.0.entry(place).or_default();
        let pos = ts.partition_point(|t| t <= &token);
        ts.insert(pos, token);
    }

    pub fn remove(&mut self, place: usize, token: &Token) -> bool {
        if let Some(ts) = self.0.get_mut(&place) {
            if let Some(pos) = ts.iter().position(|t| t == token) {
                ts.remove(pos);
                if ts.is_empty() {
                    self.0.remove(&place);
                }
                return true;
            }
        }
        false
    }

    pub fn places(&self) -> impl Iterator<Item = (usize, &[Token])> {
        self.0.iter().map(|(p, ts)| (*p, ts.as_slice()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cpn {
    pub places: Vec<CpnPlace>,
    pub transitions: Vec<Transition>,
    pub arcs: Vec<CpnArc>,
    pub variables: Vec<TypedVariable>,
    pub initial: CpnMarking,
    /// Final control marking, over CPN place indices of control places.
    pub final_control: Marking,
    in_arcs: Vec<Vec<usize>>,
    out_arcs: Vec<Vec<usize>>,
}

/// Assignment of data values to read/write occurrence variables; the dummy
/// black variable is implicit.
pub type Binding = BTreeMap<VarRef, Value>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CpnError {
    #[error("illegal binding for transition `{transition}`: {reason}")]
    IllegalBinding { transition: String, reason: String },
    #[error("malformed marking: variable place `{0}` holds {1} tokens")]
    MalformedMarking(String, usize),
}

impl Cpn {
    pub fn in_arcs(&self, t: usize) -> impl Iterator<Item = &CpnArc> {
        self.in_arcs[t].iter().map(|i| &self.arcs[*i])
    }

    pub fn out_arcs(&self, t: usize) -> impl Iterator<Item = &CpnArc> {
        self.out_arcs[t].iter().map(|i| &self.arcs[*i])
    }

    pub fn variable_place(&self, var: usize) -> usize {
        self.places
            .iter()
            .position(|p| p.role == PlaceRole::Variable(var))
            .expect("every variable has a variable place")
    }

    /// Control projection of a marking: token counts of control places keyed
    /// by CPN place index.
    pub fn control_projection(&self, mk: &CpnMarking) -> Marking {
        let mut m = Marking::new();
        for (i, p) in self.places.iter().enumerate() {
            if matches!(p.role, PlaceRole::Control(_)) {
                m.add(i, mk.tokens(i).len() as u32);
            }
        }
        m
    }

    /// Checks the structural constraints of the colored-net definition:
    /// every guard variable annotates some arc entering its transition.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (ti, t) in self.transitions.iter().enumerate() {
            if let Some(g) = &t.guard {
                let in_vars: BTreeSet<&VarRef> = self
                    .in_arcs(ti)
                    .filter_map(|a| match &a.expr {
                        ArcExpr::Var(v) => Some(v),
                        ArcExpr::Black => None,
                    })
                    .collect();
                let mut occs = Vec::new();
                collect_var_refs(g, &mut occs);
                for v in occs {
                    if !in_vars.contains(&v) {
                        out.push(format!(
                            "guard of `{}` uses {v} which annotates no incoming arc",
                            t.id
                        ));
                    }
                }
            }
        }
        out
    }
}

fn collect_var_refs(g: &crate::guards::Guard, out: &mut Vec<VarRef>) {
    use crate::guards::Guard;
    match g {
        Guard::Defined(v) | Guard::Compare(v, _, _) => out.push(v.clone()),
        Guard::And(a, b) | Guard::Or(a, b) => {
            collect_var_refs(a, out);
            collect_var_refs(b, out);
        }
    }
}

fn index_arcs(arcs: &[CpnArc], transitions: usize) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let mut in_arcs = vec![Vec::new(); transitions];
    let mut out_arcs = vec![Vec::new(); transitions];
    for (i, a) in arcs.iter().enumerate() {
        if a.into_transition {
            in_arcs[a.transition].push(i);
        } else {
            out_arcs[a.transition].push(i);
        }
    }
    (in_arcs, out_arcs)
}

/// Translates a validated DPN into a CPN over the given representative map.
pub fn translate(net: &Dpn, m: &RepresentativeMap) -> Cpn {
    let mut places = Vec::new();
    for (i, p) in net.places.iter().enumerate() {
        places.push(CpnPlace { name: p.clone(), role: PlaceRole::Control(i), color: ColorSet::Black });
    }
    let var_place_base = places.len();
    for (i, v) in net.variables.iter().enumerate() {
        places.push(CpnPlace {
            name: format!("xi({})", v.name),
            role: PlaceRole::Variable(i),
            color: ColorSet::Data(v.kind),
        });
    }
    let rho_base = places.len();
    for (i, v) in net.variables.iter().enumerate() {
        places.push(CpnPlace {
            name: format!("rho({})", v.name),
            role: PlaceRole::Restriction(i),
            color: ColorSet::Data(v.kind),
        });
    }

    let var_index: BTreeMap<&str, usize> = net
        .variables
        .iter()
        .enumerate()
        .map(|(i, v)| (v.name.as_str(), i))
        .collect();

    let mut arcs = Vec::new();
    for a in &net.arcs {
        match a {
            crate::dpn::Arc::PlaceToTransition(p, t) => arcs.push(CpnArc {
                place: *p,
                transition: *t,
                into_transition: true,
                expr: ArcExpr::Black,
            }),
            crate::dpn::Arc::TransitionToPlace(t, p) => arcs.push(CpnArc {
                place: *p,
                transition: *t,
                into_transition: false,
                expr: ArcExpr::Black,
            }),
        }
    }
    for (ti, t) in net.transitions.iter().enumerate() {
        for v in t.read.union(&t.write) {
            let vi = var_index[v.as_str()];
            let xi = var_place_base + vi;
            let written = t.write.contains(v);
            arcs.push(CpnArc {
                place: xi,
                transition: ti,
                into_transition: true,
                expr: ArcExpr::Var(VarRef::read(v.clone())),
            });
            arcs.push(CpnArc {
                place: xi,
                transition: ti,
                into_transition: false,
                expr: ArcExpr::Var(if written {
                    VarRef::write(v.clone())
                } else {
                    VarRef::read(v.clone())
                }),
            });
            if written {
                let rho = rho_base + vi;
                // the representative token is consumed and returned
                arcs.push(CpnArc {
                    place: rho,
                    transition: ti,
                    into_transition: true,
                    expr: ArcExpr::Var(VarRef::write(v.clone())),
                });
                arcs.push(CpnArc {
                    place: rho,
                    transition: ti,
                    into_transition: false,
                    expr: ArcExpr::Var(VarRef::write(v.clone())),
                });
            }
        }
    }

    let mut initial = CpnMarking::default();
    for (p, n) in net.initial_marking.iter() {
        for _ in 0..n {
            initial.add(p, Token::Black);
        }
    }
    for (i, v) in net.variables.iter().enumerate() {
        let x = net.initial_assignment.get(&v.name).cloned().unwrap_or(Value::Undefined);
        initial.add(var_place_base + i, Token::Color(x));
        for r in m.representatives(&v.name) {
            initial.add(rho_base + i, Token::Color(r));
        }
    }

    let final_control = Marking::from_counts(net.final_marking.iter());

    let (in_arcs, out_arcs) = index_arcs(&arcs, net.transitions.len());
    Cpn {
        places,
        transitions: net.transitions.clone(),
        arcs,
        variables: net.variables.clone(),
        initial,
        final_control,
        in_arcs,
        out_arcs,
    }
}

/// Enumerates every legal binding of `t` in `mk`, in a deterministic order
/// (occurrence variables sorted, candidate values ascending).
pub fn legal_bindings(cpn: &Cpn, mk: &CpnMarking, t: usize) -> Vec<Binding> {
    // condition 2 for the dummy variable: every black in-arc needs a token
    for a in cpn.in_arcs(t) {
        if a.expr == ArcExpr::Black && !mk.tokens(a.place).contains(&Token::Black) {
            return Vec::new();
        }
    }
    // candidate values per occurrence variable: intersection over the places
    // feeding t through arcs labeled with that variable
    let mut candidates: BTreeMap<VarRef, BTreeSet<Value>> = BTreeMap::new();
    for a in cpn.in_arcs(t) {
        let var = match &a.expr {
            ArcExpr::Var(v) => v.clone(),
            ArcExpr::Black => continue,
        };
        let here: BTreeSet<Value> = mk
            .tokens(a.place)
            .iter()
            .filter_map(|tok| match tok {
                Token::Color(v) => Some(v.clone()),
                Token::Black => None,
            })
            .collect();
        candidates
            .entry(var)
            .and_modify(|set| *set = set.intersection(&here).cloned().collect())
            .or_insert(here);
    }
    let vars: Vec<&VarRef> = candidates.keys().collect();
    let sets: Vec<Vec<&Value>> = candidates.values().map(|s| s.iter().collect()).collect();
    if sets.iter().any(|s| s.is_empty()) && !vars.is_empty() {
        return Vec::new();
    }
    let guard = cpn.transitions[t].guard.as_ref();
    let mut out = Vec::new();
    let mut idx2 = vec![0usize; vars.len()];
    loop {
        let mut binding = Binding::new();
        for (k, v) in vars.iter().enumerate() {
            binding.insert((*v).clone(), sets[k][idx2[k]].clone());
        }
        let ok = match guard {
            Some(g) => {
                let beta: VariableAssignment = binding.clone();
                eval_guard(g, &beta).unwrap_or(false)
            }
            None => true,
        };
        if ok {
            out.push(binding);
        }
        let mut k = 0;
        loop {
            if k == vars.len() {
                break;
            }
            idx2[k] += 1;
            if idx2[k] < sets[k].len() {
                break;
            }
            idx2[k] = 0;
            k += 1;
        }
        if k == vars.len() || vars.is_empty() {
            break;
        }
    }
    out
}

fn arc_token(expr: &ArcExpr, gamma: &Binding) -> Option<Token> {
    match expr {
        ArcExpr::Black => Some(Token::Black),
        ArcExpr::Var(v) => gamma.get(v).cloned().map(Token::Color),
    }
}

/// Fires `t` under `gamma`: input places lose the bound tokens, output places
/// gain them; a place on both sides sees removal before addition.
pub fn fire_cpn(cpn: &Cpn, mk: &CpnMarking, t: usize, gamma: &Binding) -> Result<CpnMarking, CpnError> {
    let illegal = |reason: &str| CpnError::IllegalBinding {
        transition: cpn.transitions[t].id.clone(),
        reason: reason.to_string(),
    };
    if let Some(g) = &cpn.transitions[t].guard {
        let beta: VariableAssignment = gamma.clone();
        if !eval_guard(g, &beta).unwrap_or(false) {
            return Err(illegal("guard is not satisfied"));
        }
    }
    let mut next = mk.clone();
    for a in cpn.in_arcs(t) {
        let tok = arc_token(&a.expr, gamma)
            .ok_or_else(|| illegal(&format!("no binding for arc into `{}`", cpn.places[a.place].name)))?;
        if !next.remove(a.place, &tok) {
            return Err(illegal(&format!(
                "token {tok} not present in `{}`",
                cpn.places[a.place].name
            )));
        }
    }
    for a in cpn.out_arcs(t) {
        let tok = arc_token(&a.expr, gamma)
            .ok_or_else(|| illegal(&format!("no binding for arc out of `{}`", cpn.places[a.place].name)))?;
        next.add(a.place, tok);
    }
    Ok(next)
}

/// Embeds a DPN state into the corresponding CPN marking: black tokens for
/// control places, the current value in each variable place, the full
/// representative multiset in each restriction place.
pub fn state_to_marking(s: &DpnState, cpn: &Cpn) -> CpnMarking {
    let mut mk = CpnMarking::default();
    for (i, p) in cpn.places.iter().enumerate() {
        match p.role {
            PlaceRole::Control(orig) => {
                for _ in 0..s.marking.count(orig) {
                    mk.add(i, Token::Black);
                }
            }
            PlaceRole::Variable(vi) => {
                let name = &cpn.variables[vi].name;
                let x = s.assignment.get(name).cloned().unwrap_or(Value::Undefined);
                mk.add(i, Token::Color(x));
            }
            PlaceRole::Restriction(_) => {
                for tok in cpn.initial.tokens(i) {
                    mk.add(i, tok.clone());
                }
            }
        }
    }
    mk
}

/// Projects a CPN marking back onto a DPN state. Restriction places are
/// ignored; each variable place must hold exactly one token.
pub fn marking_to_state(mk: &CpnMarking, cpn: &Cpn) -> Result<DpnState, CpnError> {
    let mut marking = Marking::new();
    let mut assignment = SvAssignment::new();
    for (i, p) in cpn.places.iter().enumerate() {
        match p.role {
            PlaceRole::Control(orig) => marking.add(orig, mk.tokens(i).len() as u32),
            PlaceRole::Variable(vi) => {
                let toks = mk.tokens(i);
                if toks.len() != 1 {
                    return Err(CpnError::MalformedMarking(p.name.clone(), toks.len()));
                }
                let x = match &toks[0] {
                    Token::Color(v) => v.clone(),
                    Token::Black => {
                        return Err(CpnError::MalformedMarking(p.name.clone(), toks.len()))
                    }
                };
                assignment.insert(cpn.variables[vi].name.clone(), x);
            }
            PlaceRole::Restriction(_) => {}
        }
    }
    Ok(DpnState { marking, assignment })
}
