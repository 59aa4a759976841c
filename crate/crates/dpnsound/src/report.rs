//! Structured report document and its renderers. The JSON form is
//! schema-stable and round-trips; the text form is for terminals, with
//! written values annotated by the interval they stand for.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::abstraction::RepresentativeMap;
use crate::cpn::Cpn;
use crate::guards::Value;
use crate::soundness::{SoundnessReport, Verdict, Violation};
use crate::statespace::TraceStep;

pub const TOOL_NAME: &str = "dpnsound";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Violations listed per property are capped at this many entries; the
/// total count is always reported.
pub const MAX_VIOLATIONS_LISTED: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WriteDoc {
    pub value: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDoc {
    pub transition: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub writes: BTreeMap<String, WriteDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationDoc {
    pub marking: BTreeMap<String, u32>,
    pub detail: String,
    pub trace: Vec<StepDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyDoc {
    /// `holds`, `violated`, `vacuous` or `unavailable`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub violation_count: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<ViolationDoc>,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotionDoc {
    /// `yes`, `no` or `undecided`.
    pub sound: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub vacuous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeadlockDoc {
    pub marking: BTreeMap<String, u32>,
    pub witness: Vec<StepDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsDoc {
    pub nodes: usize,
    pub edges: usize,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub tool: String,
    pub version: String,
    pub data_aware_sound: bool,
    pub properties: BTreeMap<String, PropertyDoc>,
    pub notions: BTreeMap<String, NotionDoc>,
    pub dead_transitions: Vec<String>,
    pub deadlocks: Vec<DeadlockDoc>,
    pub stats: StatsDoc,
}

fn annotate(var: &str, value: &Value, m: &RepresentativeMap) -> Option<String> {
    let a = m.get(var)?;
    if let Some(sentinel) = &a.string_sentinel {
        if matches!(value, Value::Str(s) if s == sentinel) {
            return Some("any other string".to_string());
        }
        return None;
    }
    let iv = m.interval_of(var, value)?;
    if iv.is_point() {
        None
    } else {
        Some(iv.render())
    }
}

fn step_doc(step: &TraceStep, cpn: &Cpn, m: &RepresentativeMap) -> StepDoc {
    let t = &cpn.transitions[step.transition];
    StepDoc {
        transition: t.id.clone(),
        label: t.label.clone(),
        writes: step
            .writes
            .iter()
            .map(|(var, value)| {
                let note = annotate(var, value, m);
                (var.clone(), WriteDoc { value: value.clone(), note })
            })
            .collect(),
    }
}

fn violation_docs(vs: &[Violation], cpn: &Cpn, m: &RepresentativeMap) -> Vec<ViolationDoc> {
    vs.iter()
        .take(MAX_VIOLATIONS_LISTED)
        .map(|v| ViolationDoc {
            marking: v.control_marking.clone(),
            detail: v.detail.clone(),
            trace: v.trace.iter().map(|s| step_doc(s, cpn, m)).collect(),
        })
        .collect()
}

fn property_doc(v: &Verdict, cpn: &Cpn, m: &RepresentativeMap) -> PropertyDoc {
    match v {
        Verdict::Holds => PropertyDoc {
            status: "holds".into(),
            detail: None,
            violation_count: 0,
            violations: Vec::new(),
        },
        Verdict::Vacuous => PropertyDoc {
            status: "vacuous".into(),
            detail: Some("no decision sets declared".into()),
            violation_count: 0,
            violations: Vec::new(),
        },
        Verdict::Unavailable(why) => PropertyDoc {
            status: "unavailable".into(),
            detail: Some(why.clone()),
            violation_count: 0,
            violations: Vec::new(),
        },
        Verdict::Violated(vs) => PropertyDoc {
            status: "violated".into(),
            detail: None,
            violation_count: vs.len(),
            violations: violation_docs(vs, cpn, m),
        },
    }
}

/// Assembles the serializable report from an analysis result.
pub fn build_document(r: &SoundnessReport, cpn: &Cpn, m: &RepresentativeMap) -> ReportDocument {
    let mut properties = BTreeMap::new();
    properties.insert("P1".to_string(), property_doc(&r.p1, cpn, m));
    properties.insert("P2".to_string(), property_doc(&r.p2, cpn, m));
    properties.insert("P3".to_string(), property_doc(&r.p3, cpn, m));
    properties.insert("P4".to_string(), property_doc(&r.p4, cpn, m));
    properties.insert("P5".to_string(), property_doc(&r.p5, cpn, m));
    properties.insert("P2b".to_string(), property_doc(&r.p2b, cpn, m));
    properties.insert("P1b".to_string(), property_doc(&r.p1b, cpn, m));
    let notions = r
        .notions
        .iter()
        .map(|(n, v)| {
            let sound = match v.holds {
                Some(true) => "yes",
                Some(false) => "no",
                None => "undecided",
            };
            (n.name().to_string(), NotionDoc { sound: sound.into(), vacuous: v.vacuous })
        })
        .collect();
    ReportDocument {
        tool: TOOL_NAME.to_string(),
        version: TOOL_VERSION.to_string(),
        data_aware_sound: r.data_aware_sound(),
        properties,
        notions,
        dead_transitions: r.dead_transitions.clone(),
        deadlocks: r
            .deadlocks
            .iter()
            .map(|d| DeadlockDoc {
                marking: d.control_marking.clone(),
                witness: d.witness.iter().map(|s| step_doc(s, cpn, m)).collect(),
            })
            .collect(),
        stats: StatsDoc { nodes: r.stats.nodes, edges: r.stats.edges, wall_ms: r.stats.wall_ms },
    }
}

pub fn to_json(doc: &ReportDocument) -> String {
    serde_json::to_string_pretty(doc).expect("report serializes")
}

fn marking_str(m: &BTreeMap<String, u32>) -> String {
    let inner = m
        .iter()
        .map(|(p, n)| format!("{p}:{n}"))
        .collect::<Vec<_>>()
        .join(", ");
    format!("{{{inner}}}")
}

fn witness_str(steps: &[StepDoc]) -> String {
    if steps.is_empty() {
        return "(initial marking)".to_string();
    }
    steps
        .iter()
        .map(|s| {
            let name = s.label.as_deref().unwrap_or(&s.transition);
            if s.writes.is_empty() {
                name.to_string()
            } else {
                let writes = s
                    .writes
                    .iter()
                    .map(|(var, w)| match &w.note {
                        Some(note) => format!("{var}'={} ({note})", w.value),
                        None => format!("{var}'={}", w.value),
                    })
                    .collect::<Vec<_>>()
                    .join(", ");
                format!("{name} [{writes}]")
            }
        })
        .collect::<Vec<_>>()
        .join(" ; ")
}

struct Style {
    color: bool,
}

impl Style {
    fn paint(&self, code: &str, s: &str) -> String {
        if self.color {
            format!("\x1b[{code}m{s}\x1b[0m")
        } else {
            s.to_string()
        }
    }

    fn good(&self, s: &str) -> String {
        self.paint("32", s)
    }

    fn bad(&self, s: &str) -> String {
        self.paint("31", s)
    }

    fn dim(&self, s: &str) -> String {
        self.paint("2", s)
    }
}

const PROPERTY_TITLES: [(&str, &str); 7] = [
    ("P1", "completion always reachable"),
    ("P2", "clean completion"),
    ("P3", "no dead transitions"),
    ("P4", "conditional completeness"),
    ("P5", "conditional output coverage"),
    ("P2b", "single output token"),
    ("P1b", "some completing run"),
];

/// Renders the terminal form. ANSI colors are used unless `color` is false
/// (the CLI maps `DPNSOUND_COLOR=0` here).
pub fn render_text(doc: &ReportDocument, color: bool) -> String {
    let st = Style { color };
    let mut out = String::new();
    let verdict = if doc.data_aware_sound {
        st.good("YES")
    } else {
        st.bad("NO")
    };
    out.push_str(&format!("data-aware sound: {verdict}\n"));
    out.push_str(&st.dim(&format!(
        "explored {} nodes, {} edges in {} ms\n",
        doc.stats.nodes, doc.stats.edges, doc.stats.wall_ms
    )));
    out.push_str("\nproperties:\n");
    for (key, title) in PROPERTY_TITLES {
        let p = &doc.properties[key];
        let status = match p.status.as_str() {
            "holds" => st.good("holds"),
            "violated" => st.bad(&format!("VIOLATED ({})", p.violation_count)),
            other => st.dim(other),
        };
        out.push_str(&format!("  {key:<4} {title:<30} {status}\n"));
        if let Some(detail) = &p.detail {
            out.push_str(&format!("       {}\n", st.dim(detail)));
        }
    }
    out.push_str("\nnotions:\n");
    for (name, n) in &doc.notions {
        let s = match n.sound.as_str() {
            "yes" => st.good("YES"),
            "no" => st.bad("NO"),
            other => st.dim(other),
        };
        let vac = if n.vacuous { st.dim(" (vacuous: no decision sets)") } else { String::new() };
        out.push_str(&format!("  {name:<24} {s}{vac}\n"));
    }
    if doc.dead_transitions.is_empty() {
        out.push_str("\ndead transitions: none\n");
    } else {
        out.push_str(&format!(
            "\ndead transitions: {}\n",
            doc.dead_transitions.join(", ")
        ));
    }
    for d in &doc.deadlocks {
        out.push_str(&st.bad(&format!("DEADLOCK: {}\n", marking_str(&d.marking))));
        out.push_str(&format!("  witness: {}\n", witness_str(&d.witness)));
    }
    for (key, _) in PROPERTY_TITLES {
        let p = &doc.properties[key];
        for v in &p.violations {
            if key == "P1" && doc.deadlocks.iter().any(|d| d.marking == v.marking) {
                continue;
            }
            if p.status == "violated" && key != "P1" {
                out.push_str(&format!(
                    "{}: {} at {}\n  witness: {}\n",
                    key,
                    v.detail,
                    marking_str(&v.marking),
                    witness_str(&v.trace)
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::build_representatives;
    use crate::cpn::translate;
    use crate::model::load_model_str;
    use crate::soundness::analyze;
    use crate::statespace::{explore, ExplorationConfig};

    fn report_for(text: &str) -> ReportDocument {
        let (net, decs) = load_model_str(text, true).unwrap();
        let m = build_representatives(&net);
        let cpn = translate(&net, &m);
        let g = explore(&cpn, &ExplorationConfig::default()).unwrap();
        let r = analyze(&cpn, &g, &decs);
        build_document(&r, &cpn, &m)
    }

    fn sound_model() -> &'static str {
        r#"{
            "schema": 1,
            "places": ["p0", "p1"],
            "transitions": [{"id": "t"}],
            "arcs": [["p0", "t"], ["t", "p1"]],
            "initial_marking": {"p0": 1},
            "final_marking": {"p1": 1}
        }"#
    }

    fn deadlocking_model() -> &'static str {
        r#"{
            "schema": 1,
            "places": ["p0", "p1"],
            "transitions": [{"id": "t", "guard": "x' > 5 && x' < 9 && x' > 6"}],
            "arcs": [["p0", "t"], ["t", "p1"]],
            "variables": [{"name": "x", "type": "int", "initial": null}],
            "initial_marking": {"p0": 1},
            "final_marking": {"p1": 1}
        }"#
    }

    #[test]
    fn sound_net_renders_yes() {
        let doc = report_for(sound_model());
        let text = render_text(&doc, false);
        assert!(text.contains("data-aware sound: YES"));
        assert!(text.contains("dead transitions: none"));
        assert!(!text.contains("DEADLOCK"));
    }

    #[test]
    fn json_round_trips() {
        let doc = report_for(sound_model());
        let text = to_json(&doc);
        let back: ReportDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(back, doc);
    }

    #[test]
    fn witness_values_carry_interval_notes() {
        // x' must land strictly between 6 and 9: the representative is
        // annotated with its interval
        let doc = report_for(deadlocking_model());
        assert!(doc.data_aware_sound);
        let text = render_text(&doc, false);
        assert!(text.contains("data-aware sound: YES"));
        // witnesses appear on violated properties only; force one by
        // shrinking the guard to an unsatisfiable one
        let unsound = deadlocking_model().replace("x' > 6", "x' > 9");
        let doc = report_for(&unsound);
        assert!(!doc.data_aware_sound);
        let text = render_text(&doc, false);
        assert!(text.contains("DEADLOCK: {p0:1}"));
    }

    #[test]
    fn interval_annotation_appears_in_trace_steps() {
        let (net, decs) = load_model_str(deadlocking_model(), true).unwrap();
        let m = build_representatives(&net);
        let cpn = translate(&net, &m);
        let g = explore(&cpn, &ExplorationConfig::default()).unwrap();
        let r = analyze(&cpn, &g, &decs);
        let doc = build_document(&r, &cpn, &m);
        // the completing run writes the representative of (6, 9)
        assert!(doc.data_aware_sound);
        // build a witness by hand through the P1b machinery: explore edges
        let step = crate::statespace::TraceStep {
            transition: 0,
            writes: [("x".to_string(), Value::Int(7))].into_iter().collect(),
        };
        let s = step_doc(&step, &cpn, &m);
        assert_eq!(
            s.writes["x"].note.as_deref(),
            Some("any value in (6, 9)")
        );
    }

    #[test]
    fn color_can_be_disabled() {
        let doc = report_for(sound_model());
        assert!(render_text(&doc, true).contains("\x1b["));
        assert!(!render_text(&doc, false).contains("\x1b["));
    }
}
