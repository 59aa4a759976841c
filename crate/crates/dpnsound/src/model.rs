//! The on-disk model format: a single JSON document describing places,
//! transitions with textual guards, arcs, typed variables and markings,
//! plus optional decision sets. Guards round-trip through their printed
//! form, so the document is structurally lossless.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cpn::{ArcExpr, ColorSet, Cpn, PlaceRole, Token};
use crate::dpn::{validate, Arc, Diagnostic, Dpn, Marking, SvAssignment, Transition};
use crate::guards::{parse_guard, DomainKind, TypedVariable, Value};
use crate::soundness::DecisionSet;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionDoc {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub read: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub write: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub invisible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableDoc {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: String,
    /// `null` stands for the undefined value.
    pub initial: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema: u32,
    pub places: Vec<String>,
    pub transitions: Vec<TransitionDoc>,
    /// Name pairs; direction follows from which endpoint is the place.
    pub arcs: Vec<(String, String)>,
    #[serde(default)]
    pub variables: Vec<VariableDoc>,
    pub initial_marking: BTreeMap<String, u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_marking: Option<BTreeMap<String, u32>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub decisions: Vec<Vec<String>>,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema version {0}")]
    UnsupportedSchema(u32),
    #[error("unknown field `{field}` in {context}")]
    UnknownField { context: String, field: String },
    #[error("variable `{name}`: unsupported type `{ty}`")]
    UnsupportedType { name: String, ty: String },
    #[error("variable `{name}`: initial value {value} does not fit kind {kind}")]
    BadInitial { name: String, value: serde_json::Value, kind: DomainKind },
    #[error("transition `{id}`: {message}")]
    BadGuard { id: String, message: String },
    #[error("arc ({from}, {to}): endpoints must be one place and one transition")]
    BadArc { from: String, to: String },
    #[error("`{0}` names both a place and a transition")]
    AmbiguousName(String),
    #[error("unknown place `{0}` in marking")]
    UnknownMarkingPlace(String),
    #[error("final_marking omitted and the net has no unique sink place")]
    NoUniqueSink,
    #[error("decision set {index} names unknown transition `{id}`")]
    UnknownDecisionTransition { index: usize, id: String },
    #[error("model fails validation:\n{}", .0.iter().map(|d| format!("  - {d}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
}

fn check_known_fields(doc: &serde_json::Value) -> Result<(), ModelError> {
    let check = |v: &serde_json::Value, context: &str, allowed: &[&str]| {
        if let Some(obj) = v.as_object() {
            for k in obj.keys() {
                if !allowed.contains(&k.as_str()) {
                    return Err(ModelError::UnknownField {
                        context: context.to_string(),
                        field: k.clone(),
                    });
                }
            }
        }
        Ok(())
    };
    check(
        doc,
        "model",
        &[
            "schema",
            "places",
            "transitions",
            "arcs",
            "variables",
            "initial_marking",
            "final_marking",
            "decisions",
        ],
    )?;
    if let Some(ts) = doc.get("transitions").and_then(|t| t.as_array()) {
        for t in ts {
            check(t, "transition", &["id", "label", "guard", "read", "write", "invisible"])?;
        }
    }
    if let Some(vs) = doc.get("variables").and_then(|v| v.as_array()) {
        for v in vs {
            check(v, "variable", &["name", "type", "initial"])?;
        }
    }
    Ok(())
}

fn kind_of(name: &str, ty: &str) -> Result<DomainKind, ModelError> {
    match ty {
        "int" => Ok(DomainKind::Int),
        "real" => Ok(DomainKind::Real),
        "bool" => Ok(DomainKind::Bool),
        "string" => Ok(DomainKind::Str),
        _ => Err(ModelError::UnsupportedType { name: name.to_string(), ty: ty.to_string() }),
    }
}

fn value_of(name: &str, kind: DomainKind, v: &serde_json::Value) -> Result<Value, ModelError> {
    let bad = || ModelError::BadInitial { name: name.to_string(), value: v.clone(), kind };
    match (kind, v) {
        (_, serde_json::Value::Null) => Ok(Value::Undefined),
        (DomainKind::Int, serde_json::Value::Number(n)) => {
            n.as_i64().map(Value::Int).ok_or_else(bad)
        }
        (DomainKind::Real, serde_json::Value::Number(n)) => {
            n.as_f64().filter(|x| x.is_finite()).map(Value::real).ok_or_else(bad)
        }
        (DomainKind::Bool, serde_json::Value::Bool(b)) => Ok(Value::Bool(*b)),
        (DomainKind::Str, serde_json::Value::String(s)) => Ok(Value::Str(s.clone())),
        _ => Err(bad()),
    }
}

fn value_to_json(v: &Value) -> serde_json::Value {
    match v {
        Value::Undefined => serde_json::Value::Null,
        Value::Int(n) => serde_json::json!(n),
        Value::Real(x) => serde_json::json!(x.into_inner()),
        Value::Bool(b) => serde_json::json!(b),
        Value::Str(s) => serde_json::json!(s),
    }
}

fn marking_of(
    places: &[String],
    counts: &BTreeMap<String, u32>,
) -> Result<Marking, ModelError> {
    let mut m = Marking::new();
    for (name, n) in counts {
        let p = places
            .iter()
            .position(|q| q == name)
            .ok_or_else(|| ModelError::UnknownMarkingPlace(name.clone()))?;
        m.add(p, *n);
    }
    Ok(m)
}

/// Converts a document into a validated net plus its decision sets.
pub fn model_from_document(doc: &ModelDocument) -> Result<(Dpn, DecisionSet), ModelError> {
    if doc.schema != SCHEMA_VERSION {
        return Err(ModelError::UnsupportedSchema(doc.schema));
    }
    let mut variables = Vec::new();
    let mut initial_assignment = SvAssignment::new();
    for v in &doc.variables {
        let kind = kind_of(&v.name, &v.kind)?;
        variables.push(TypedVariable::new(&v.name, kind));
        initial_assignment.insert(v.name.clone(), value_of(&v.name, kind, &v.initial)?);
    }

    let mut transitions = Vec::new();
    for t in &doc.transitions {
        let guard = match &t.guard {
            Some(text) => Some(parse_guard(text, &variables).map_err(|e| {
                ModelError::BadGuard { id: t.id.clone(), message: e.to_string() }
            })?),
            None => None,
        };
        let mut tr = match guard {
            Some(g) => Transition::new(&t.id).with_guard(g),
            None => Transition::new(&t.id),
        };
        tr.label = t.label.clone();
        tr.invisible = t.invisible;
        // explicit read/write lists extend what the guard implies
        tr.read.extend(t.read.iter().cloned());
        tr.write.extend(t.write.iter().cloned());
        transitions.push(tr);
    }

    for p in &doc.places {
        if transitions.iter().any(|t| &t.id == p) {
            return Err(ModelError::AmbiguousName(p.clone()));
        }
    }

    let mut arcs = Vec::new();
    for (from, to) in &doc.arcs {
        let fp = doc.places.iter().position(|p| p == from);
        let tt = transitions.iter().position(|t| &t.id == to);
        let ft = transitions.iter().position(|t| &t.id == from);
        let tp = doc.places.iter().position(|p| p == to);
        match (fp, tt, ft, tp) {
            (Some(p), Some(t), _, _) => arcs.push(Arc::PlaceToTransition(p, t)),
            (_, _, Some(t), Some(p)) => arcs.push(Arc::TransitionToPlace(t, p)),
            _ => return Err(ModelError::BadArc { from: from.clone(), to: to.clone() }),
        }
    }

    let initial_marking = marking_of(&doc.places, &doc.initial_marking)?;
    let final_marking = match &doc.final_marking {
        Some(counts) => marking_of(&doc.places, counts)?,
        None => {
            let sinks: Vec<usize> = (0..doc.places.len())
                .filter(|p| {
                    !arcs.iter().any(|a| matches!(a, Arc::PlaceToTransition(q, _) if q == p))
                })
                .collect();
            match sinks.as_slice() {
                [sink] => Marking::from_counts([(*sink, 1)]),
                _ => return Err(ModelError::NoUniqueSink),
            }
        }
    };

    let net = Dpn {
        places: doc.places.clone(),
        transitions,
        arcs,
        variables,
        initial_assignment,
        initial_marking,
        final_marking,
    };
    let diags = validate(&net);
    if !diags.is_empty() {
        return Err(ModelError::Invalid(diags));
    }

    let mut decisions = Vec::new();
    for (index, set) in doc.decisions.iter().enumerate() {
        let mut s = BTreeSet::new();
        for id in set {
            let t = net.transition_index(id).ok_or_else(|| {
                ModelError::UnknownDecisionTransition { index, id: id.clone() }
            })?;
            s.insert(t);
        }
        decisions.push(s);
    }
    Ok((net, DecisionSet(decisions)))
}

/// Parses model JSON. In strict mode unknown fields are rejected.
pub fn load_model_str(text: &str, strict: bool) -> Result<(Dpn, DecisionSet), ModelError> {
    let raw: serde_json::Value = serde_json::from_str(text)?;
    if strict {
        check_known_fields(&raw)?;
    }
    let doc: ModelDocument = serde_json::from_value(raw)?;
    model_from_document(&doc)
}

/// Serializes a net (plus decision sets) back into its document form.
pub fn model_to_document(net: &Dpn, decisions: &DecisionSet) -> ModelDocument {
    let transitions = net
        .transitions
        .iter()
        .map(|t| {
            let (greads, gwrites) = match &t.guard {
                Some(g) => g.occurrences(),
                None => Default::default(),
            };
            TransitionDoc {
                id: t.id.clone(),
                label: t.label.clone(),
                guard: t.guard.as_ref().map(|g| g.to_string()),
                // persist only what the guard text cannot reproduce
                read: t.read.difference(&greads).cloned().collect(),
                write: t.write.difference(&gwrites).cloned().collect(),
                invisible: t.invisible,
            }
        })
        .collect();
    let arcs = net
        .arcs
        .iter()
        .map(|a| match a {
            Arc::PlaceToTransition(p, t) => {
                (net.places[*p].clone(), net.transitions[*t].id.clone())
            }
            Arc::TransitionToPlace(t, p) => {
                (net.transitions[*t].id.clone(), net.places[*p].clone())
            }
        })
        .collect();
    let variables = net
        .variables
        .iter()
        .map(|v| VariableDoc {
            name: v.name.clone(),
            kind: v.kind.to_string(),
            initial: value_to_json(
                net.initial_assignment.get(&v.name).unwrap_or(&Value::Undefined),
            ),
        })
        .collect();
    let counts = |m: &Marking| {
        m.iter().map(|(p, n)| (net.places[p].clone(), n)).collect::<BTreeMap<_, _>>()
    };
    ModelDocument {
        schema: SCHEMA_VERSION,
        places: net.places.clone(),
        transitions,
        arcs,
        variables,
        initial_marking: counts(&net.initial_marking),
        final_marking: Some(counts(&net.final_marking)),
        decisions: decisions
            .0
            .iter()
            .map(|s| s.iter().map(|t| net.transitions[*t].id.clone()).collect())
            .collect(),
    }
}

pub fn save_model_str(net: &Dpn, decisions: &DecisionSet) -> String {
    serde_json::to_string_pretty(&model_to_document(net, decisions)).expect("model serializes")
}

/// Debug export of a translated colored net.
pub fn cpn_to_json(cpn: &Cpn) -> serde_json::Value {
    let places: Vec<_> = cpn
        .places
        .iter()
        .map(|p| {
            let role = match p.role {
                PlaceRole::Control(_) => "control",
                PlaceRole::Variable(_) => "variable",
                PlaceRole::Restriction(_) => "restriction",
            };
            let color = match &p.color {
                ColorSet::Black => "black".to_string(),
                ColorSet::Data(k) => k.to_string(),
            };
            serde_json::json!({"name": p.name, "role": role, "color": color})
        })
        .collect();
    let transitions: Vec<_> = cpn
        .transitions
        .iter()
        .map(|t| {
            serde_json::json!({
                "id": t.id,
                "guard": t.guard.as_ref().map(|g| g.to_string()),
            })
        })
        .collect();
    let arcs: Vec<_> = cpn
        .arcs
        .iter()
        .map(|a| {
            let expr = match &a.expr {
                ArcExpr::Black => "•".to_string(),
                ArcExpr::Var(r) => r.to_string(),
            };
            let (from, to) = if a.into_transition {
                (cpn.places[a.place].name.clone(), cpn.transitions[a.transition].id.clone())
            } else {
                (cpn.transitions[a.transition].id.clone(), cpn.places[a.place].name.clone())
            };
            serde_json::json!({"from": from, "to": to, "expr": expr})
        })
        .collect();
    let initial: BTreeMap<String, Vec<String>> = cpn
        .places
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let tokens = cpn.initial.tokens(i);
            if tokens.is_empty() {
                return None;
            }
            let rendered = tokens
                .iter()
                .map(|tok| match tok {
                    Token::Black => "•".to_string(),
                    Token::Color(v) => v.to_string(),
                })
                .collect();
            Some((p.name.clone(), rendered))
        })
        .collect();
    serde_json::json!({
        "places": places,
        "transitions": transitions,
        "arcs": arcs,
        "initial_marking": initial,
    })
}
