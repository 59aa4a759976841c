//! End-to-end acceptance suite. Each test covers one release criterion and
//! prints a single PASS line when it holds.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use dpnsound::abstraction::{build_representatives, rep};
use dpnsound::cpn::{translate, Cpn};
use dpnsound::dmn::{
    compile_table, decision_set_of, embed_fragment, parse_sfeel, table_from_json, DecisionTable,
};
use dpnsound::dpn::{legal_firings, Dpn, DpnState, Marking};
use dpnsound::guards::{eval_guard, parse_guard, Cmp, DomainKind, Value, VarRef};
use dpnsound::model::load_model_str;
use dpnsound::oracle::{dense_spec, random_net, run_comparison, CompareResult};
use dpnsound::report::ReportDocument;
use dpnsound::soundness::{analyze, DecisionSet, SoundnessReport, Verdict};
use dpnsound::statespace::{explore, replay, ExplorationConfig};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn load_fixture(rel: &str) -> (Dpn, DecisionSet) {
    let path = fixture_dir().join(rel);
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
    load_model_str(&text, true).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

struct Analysis {
    cpn: Cpn,
    report: SoundnessReport,
}

fn analyze_net(net: &Dpn, decs: &DecisionSet) -> Analysis {
    let m = build_representatives(net);
    let cpn = translate(net, &m);
    let g = explore(&cpn, &ExplorationConfig::default()).expect("exploration within bounds");
    let report = analyze(&cpn, &g, decs);
    Analysis { cpn, report }
}

fn pass(n: u32, msg: &str) {
    println!("criterion {n}: PASS - {msg}");
}

#[test]
fn criterion_1_loan_example_verdict() {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_dpnsound"))
        .args(["check", "--report", "json"])
        .arg(fixture_dir().join("fig1_loan.json"))
        .env("DPNSOUND_COLOR", "0")
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(1), "check must exit 1 on the unsound model");
    let doc: ReportDocument = serde_json::from_slice(&out.stdout).expect("json report parses");
    assert!(!doc.data_aware_sound);
    assert!(doc.dead_transitions.is_empty(), "no dead transitions expected");
    assert_eq!(doc.deadlocks.len(), 1, "exactly one deadlock control marking");
    let d = &doc.deadlocks[0];
    let expected: BTreeMap<String, u32> =
        [("p5".to_string(), 1), ("p6".to_string(), 1)].into_iter().collect();
    assert_eq!(d.marking, expected);
    let verify = d
        .witness
        .iter()
        .find(|s| s.transition == "verify")
        .expect("witness passes through verify");
    assert_eq!(verify.writes["ok"].value, Value::Bool(false));
    let request = d
        .witness
        .iter()
        .find(|s| s.transition == "credit_request")
        .expect("witness starts with the request");
    match &request.writes["amount"].value {
        Value::Int(n) => assert!(*n <= 15000, "witness amount {n} must lie at or below 15000"),
        other => panic!("amount write is {other:?}"),
    }

    // the same witness, produced by the library, replays step by step
    let (net, decs) = load_fixture("fig1_loan.json");
    let a = analyze_net(&net, &decs);
    assert_eq!(a.report.deadlocks.len(), 1);
    let witness = &a.report.deadlocks[0].witness;
    let end = replay(&a.cpn, witness).expect("witness replays");
    let control = a.cpn.control_projection(&end);
    let p5 = net.place_index("p5").unwrap();
    let p6 = net.place_index("p6").unwrap();
    assert_eq!(control, Marking::from_counts([(p5, 1), (p6, 1)]));
    for v in a.report.p1.violations() {
        replay(&a.cpn, &v.trace).expect("every violation trace replays");
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}, limit 1 s");
    pass(1, "loan model: unsound, unique deadlock {p5:1, p6:1}, replayable witness, < 1 s");
}

#[test]
fn criterion_2_representative_construction() {
    let (net, _) = load_fixture("fig1_loan.json");
    let m = build_representatives(&net);
    let a = m.get("amount").expect("amount is abstracted");
    let consts: BTreeSet<i64> = a
        .constants
        .iter()
        .map(|c| match c {
            Value::Int(n) => *n,
            other => panic!("non-integer constant {other:?}"),
        })
        .collect();
    assert_eq!(consts, [5000, 10000, 15000].into_iter().collect());
    let reps: BTreeSet<i64> = a
        .representatives
        .iter()
        .map(|c| match c {
            Value::Int(n) => *n,
            other => panic!("non-integer representative {other:?}"),
        })
        .collect();
    assert_eq!(
        reps,
        [4999, 5000, 5001, 10000, 10001, 15000, 15001].into_iter().collect()
    );
    pass(2, "amount constants {5000, 10000, 15000}, representatives exactly the 7 expected values");
}

#[test]
fn criterion_3_desk_scale_trace_equivalence() {
    let start = Instant::now();
    for seed in 0..200u64 {
        let net = random_net(seed);
        let spec = dense_spec(&net, &build_representatives(&net));
        let r = run_comparison(&net, &spec, 6, 500_000)
            .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert_eq!(r.trace_result, CompareResult::Equal, "seed {seed}: bounded traces differ");
        assert_eq!(
            r.concrete, r.abstracted,
            "seed {seed}: concrete and abstract verdicts disagree"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 120, "took {elapsed:?}, limit 120 s");
    pass(3, "200 random nets: bounded traces (L=6) equal and verdicts agree, within 120 s");
}

fn implies(a: &Verdict, b: &Verdict) -> bool {
    !(a.holds() == Some(true) && b.holds() == Some(false))
}

fn formula(parts: &[&Verdict]) -> Option<bool> {
    for p in parts {
        match p.holds() {
            Some(false) => return Some(false),
            Some(true) => {}
            None => return None,
        }
    }
    Some(true)
}

fn check_lattice(name: &str, r: &SoundnessReport) {
    assert!(implies(&r.p1, &r.p4), "{name}: P1 must imply P4");
    assert!(implies(&r.p1, &r.p5), "{name}: P1 must imply P5");
    assert!(implies(&r.p1, &r.p1b), "{name}: P1 must imply P1b");
    assert!(implies(&r.p2, &r.p2b), "{name}: P2 must imply P2b");
    use dpnsound::soundness::Notion;
    let expect = [
        (Notion::DataAware, formula(&[&r.p1, &r.p2, &r.p3])),
        (Notion::DecisionAware, formula(&[&r.p1, &r.p2, &r.p3])),
        (Notion::DecisionAwareRelaxed, formula(&[&r.p3, &r.p4, &r.p5])),
        (Notion::DecisionAwareWeak, formula(&[&r.p1, &r.p2, &r.p4])),
        (Notion::DecisionAwareLazy, formula(&[&r.p1, &r.p2b])),
        (Notion::DecisionAwareEasy, formula(&[&r.p1b])),
    ];
    for (n, want) in expect {
        assert_eq!(r.notions[&n].holds, want, "{name}: notion {} mismatch", n.name());
    }
}

#[test]
fn criterion_4_implication_lattice() {
    let mut checked = 0;
    for seed in 0..200u64 {
        let net = random_net(seed);
        let a = analyze_net(&net, &DecisionSet::default());
        check_lattice(&format!("seed {seed}"), &a.report);
        checked += 1;
    }
    let lattice_dir = fixture_dir().join("lattice");
    let mut fixtures: Vec<PathBuf> = std::fs::read_dir(&lattice_dir)
        .expect("lattice fixtures present")
        .map(|e| e.unwrap().path())
        .collect();
    fixtures.sort();
    assert!(fixtures.len() >= 10, "expected at least 10 hand-built fixtures");
    for path in fixtures {
        let text = std::fs::read_to_string(&path).unwrap();
        let (net, decs) = load_model_str(&text, true).unwrap();
        let a = analyze_net(&net, &decs);
        check_lattice(&path.display().to_string(), &a.report);
        checked += 1;
    }
    pass(4, &format!("{checked} reports satisfy every implication and notion formula"));
}

fn assessment_table() -> DecisionTable {
    let text = std::fs::read_to_string(fixture_dir().join("dmn/assessment_table.json")).unwrap();
    table_from_json(&text).unwrap()
}

fn embed_assessment(tbl: &DecisionTable) -> (Dpn, DecisionSet) {
    let (host, _) = load_fixture("dmn/host.json");
    let (frag, _) = compile_table(tbl).unwrap();
    // one sibling: the priority-handling transition also consumes p2
    let net = embed_fragment(&host, "p2", &frag, 1).unwrap();
    let decs = DecisionSet(vec![decision_set_of(&net, &frag)]);
    (net, decs)
}

#[test]
fn criterion_5_dmn_compilation_golden() {
    let tbl = assessment_table();
    let (frag, diags) = compile_table(&tbl).unwrap();
    assert!(diags.is_empty());
    assert!(frag.stranded.is_empty());
    let rendered: Vec<(String, String)> = frag
        .transitions
        .iter()
        .map(|c| (c.transition.id.clone(), c.transition.guard.as_ref().unwrap().to_string()))
        .collect();
    assert_eq!(
        rendered,
        vec![
            ("t1".to_string(), "ok == false && defined(amount) && atype' == \"none\"".to_string()),
            (
                "t2".to_string(),
                "ok == true && (amount < 5000 || amount == 5000) && atype' == \"simple\""
                    .to_string()
            ),
            (
                "t3".to_string(),
                "ok == true && amount > 5000 && atype' == \"advanced\"".to_string()
            ),
        ]
    );

    let (net, decs) = embed_assessment(&tbl);
    let enter = net.transition_index("assessment__enter").expect("internal transition present");
    assert!(net.transitions[enter].invisible);
    let a = analyze_net(&net, &decs);
    assert_eq!(a.report.p4.holds(), Some(true), "baseline must be conditionally complete");
    assert_eq!(a.report.p5.holds(), Some(true), "baseline must be output covered");

    let mut no_rule = tbl.clone();
    no_rule.rules.remove(0);
    let (net, decs) = embed_assessment(&no_rule);
    let a = analyze_net(&net, &decs);
    assert_eq!(a.report.p4.holds(), Some(false), "deleting a rule must break P4");

    let mut no_branch = tbl.clone();
    no_branch.branches.remove(0);
    let (frag, diags) = compile_table(&no_branch).unwrap();
    assert_eq!(diags.len(), 1, "uncovered rule must be diagnosed");
    let (host, _) = load_fixture("dmn/host.json");
    let net = embed_fragment(&host, "p2", &frag, 1).unwrap();
    let decs = DecisionSet(vec![decision_set_of(&net, &frag)]);
    let a = analyze_net(&net, &decs);
    assert_eq!(a.report.p5.holds(), Some(false), "deleting a branch must break P5");
    pass(5, "three merged transitions with the expected guards; rule deletion breaks P4, branch deletion breaks P5");
}

/// Direct semantics of a host with one decision transition: starting the
/// decision consumes the token from the shared place (a sibling cannot take
/// over once the task runs), the unique matching rule writes its output
/// literals, and the branch conditions route afterwards. No compilation
/// involved.
struct DirectDecision {
    host: Dpn,
    tbl: DecisionTable,
    /// Parsed branch guards over the outputs, read mode.
    branches: Vec<(dpnsound::guards::Guard, String)>,
    decision_place: usize,
    started: usize,
    mid_marker: usize,
}

impl DirectDecision {
    fn new(host: &Dpn, tbl: &DecisionTable) -> DirectDecision {
        let branches = tbl
            .branches
            .iter()
            .map(|b| (parse_guard(&b.guard, &tbl.outputs).unwrap(), b.target.clone()))
            .collect();
        let mut host = host.clone();
        let decision_place = host.place_index("p2").unwrap();
        host.places.push("dec_started".to_string());
        let started = host.places.len() - 1;
        host.places.push("dec_mid".to_string());
        let mid_marker = host.places.len() - 1;
        DirectDecision {
            host: host.clone(),
            tbl: tbl.clone(),
            branches,
            decision_place,
            started,
            mid_marker,
        }
    }

    fn rule_matches(&self, s: &DpnState, rule: &dpnsound::dmn::Rule) -> bool {
        for (v, cell) in self.tbl.inputs.iter().zip(&rule.input_entries) {
            let g = parse_sfeel(cell, v).unwrap();
            let beta = [(VarRef::read(&v.name), s.assignment[&v.name].clone())]
                .into_iter()
                .collect();
            match eval_guard(&g, &beta) {
                Ok(true) => {}
                _ => return false,
            }
        }
        true
    }

    fn successors(&self, s: &DpnState, choices: &BTreeMap<String, Vec<Value>>) -> Vec<(String, DpnState)> {
        let mut out = Vec::new();
        // plain host transitions other than the decision targets
        let targets: BTreeSet<&String> =
            self.branches.iter().map(|(_, t)| t).collect();
        for (f, succ) in legal_firings(&self.host, s, choices).unwrap() {
            let t = &self.host.transitions[f.transition];
            if targets.contains(&t.id) {
                continue;
            }
            out.push((t.id.clone(), succ));
        }
        // starting the decision task commits the token: a sibling cannot
        // take over once the task has begun
        if s.marking.count(self.decision_place) > 0 {
            let mut succ = s.clone();
            succ.marking.remove(self.decision_place, 1);
            succ.marking.add(self.started, 1);
            out.push(("dec_start".to_string(), succ));
        }
        // rule application inside the started task
        if s.marking.count(self.started) > 0 {
            for rule in &self.tbl.rules {
                if !self.rule_matches(s, rule) {
                    continue;
                }
                let mut succ = s.clone();
                succ.marking.remove(self.started, 1);
                succ.marking.add(self.mid_marker, 1);
                for (v, lit) in self.tbl.outputs.iter().zip(&rule.output_entries) {
                    let g = parse_sfeel(lit, v).unwrap();
                    let value = match g {
                        dpnsound::guards::Guard::Compare(_, Cmp::Eq, k) => k,
                        other => panic!("output literal parses to {other:?}"),
                    };
                    succ.assignment.insert(v.name.clone(), value);
                }
                out.push(("decision".to_string(), succ));
                break;
            }
        }
        // branch routing out of the intermediate place
        if s.marking.count(self.mid_marker) > 0 {
            for (g, target) in &self.branches {
                let beta = self
                    .tbl
                    .outputs
                    .iter()
                    .map(|v| (VarRef::read(&v.name), s.assignment[&v.name].clone()))
                    .collect();
                if eval_guard(g, &beta) != Ok(true) {
                    continue;
                }
                let t = self.host.transition_index(target).unwrap();
                let mut succ = s.clone();
                succ.marking.remove(self.mid_marker, 1);
                for p in self.host.output_places(t) {
                    succ.marking.add(p, 1);
                }
                out.push((target.clone(), succ));
            }
        }
        out
    }

    /// The data-aware triple over the finite-domain state graph.
    fn verdict(&self, choices: &BTreeMap<String, Vec<Value>>) -> (bool, bool, bool) {
        let mut states = vec![self.host.initial_state()];
        let mut index: BTreeMap<DpnState, usize> =
            [(states[0].clone(), 0)].into_iter().collect();
        let mut edges: Vec<(usize, String, usize)> = Vec::new();
        let mut queue = VecDeque::from([0usize]);
        while let Some(i) = queue.pop_front() {
            let s = states[i].clone();
            for (label, succ) in self.successors(&s, choices) {
                let j = *index.entry(succ.clone()).or_insert_with(|| {
                    states.push(succ.clone());
                    queue.push_back(states.len() - 1);
                    states.len() - 1
                });
                edges.push((i, label, j));
            }
            assert!(states.len() < 200_000, "direct graph explosion");
        }
        let finals: BTreeSet<usize> = states
            .iter()
            .enumerate()
            .filter(|(_, s)| s.marking == self.host.final_marking)
            .map(|(i, _)| i)
            .collect();
        let mut ok = vec![false; states.len()];
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); states.len()];
        for (a, _, b) in &edges {
            preds[*b].push(*a);
        }
        let mut queue: VecDeque<usize> = finals.iter().copied().collect();
        for f in &finals {
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
        let p2 = states.iter().all(|s| {
            s.marking == self.host.final_marking || !s.marking.dominates(&self.host.final_marking)
        });
        // P3 over the host's visible transitions plus the decision itself;
        // branch targets fire under their own names during routing
        let fired: BTreeSet<&String> = edges.iter().map(|(_, l, _)| l).collect();
        let p3 = self.host.transitions.iter().all(|t| fired.contains(&t.id))
            && fired.contains(&"decision".to_string());
        (p1, p2, p3)
    }
}

/// Removes a transition and its arcs via a model round trip.
fn drop_transition(net: &Dpn, id: &str) -> Dpn {
    let text = dpnsound::model::save_model_str(net, &DecisionSet::default());
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let ts = doc["transitions"].as_array_mut().unwrap();
    ts.retain(|t| t["id"] != id);
    let arcs = doc["arcs"].as_array_mut().unwrap();
    arcs.retain(|a| a[0] != id && a[1] != id);
    load_model_str(&doc.to_string(), true).unwrap().0
}

#[test]
fn criterion_6_syntactic_sugar_equivalence() {
    let base_tbl = assessment_table();
    let (base_host, _) = load_fixture("dmn/host.json");
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for case in 0..20 {
        let mut tbl = base_tbl.clone();
        let k = 1000 * rng.gen_range(1..=9i64);
        tbl.rules[1].input_entries[1] = format!("<= {k}");
        tbl.rules[2].input_entries[1] = format!("> {k}");
        let mut host = base_host.clone();
        if rng.gen_bool(0.5) {
            // vary the sibling guard
            let t4 = host.transition_index("t4").unwrap();
            host.transitions[t4].guard =
                Some(parse_guard("ok == false", &host.variables).unwrap());
        }
        if rng.gen_bool(0.3) {
            // drop a rule together with its branch and the now orphaned
            // placeholder target: both sides lose the whole path
            let orphan = tbl.branches[0].target.clone();
            tbl.rules.remove(0);
            tbl.branches.remove(0);
            host = drop_transition(&host, &orphan);
        }

        // direct simulation over a dense finite domain
        let probe = {
            let (frag, _) = compile_table(&tbl).unwrap();
            let compiled = embed_fragment(&host, "p2", &frag, 1).unwrap();
            dense_spec(&compiled, &build_representatives(&compiled))
        };
        let direct = DirectDecision::new(&host, &tbl);
        let (p1, p2, p3) = direct.verdict(&probe.domains);

        // compiled pipeline verdict
        let (frag, _) = compile_table(&tbl).unwrap();
        let compiled = embed_fragment(&host, "p2", &frag, 1).unwrap();
        let a = analyze_net(&compiled, &DecisionSet(vec![decision_set_of(&compiled, &frag)]));
        // internal transitions and merged naming differ, so P3 is compared
        // on the visible behavior: every user transition fires
        let compiled_p3 = a.report.p3.holds() == Some(true);
        assert_eq!(a.report.p1.holds(), Some(p1), "case {case}: P1 disagrees");
        assert_eq!(a.report.p2.holds(), Some(p2), "case {case}: P2 disagrees");
        assert_eq!(compiled_p3, p3, "case {case}: P3 disagrees");
    }
    pass(6, "20 table and host pairs: direct decision simulation and compiled net verdicts agree");
}

#[test]
fn criterion_7_stress_fixture_scale() {
    let start = Instant::now();
    let (net, decs) = load_fixture("stress_parallel.json");
    assert_eq!(net.places.len(), 15);
    assert_eq!(net.transitions.len(), 10);
    assert_eq!(net.variables.len(), 3);
    let m = build_representatives(&net);
    let constants: usize = net.variables.iter().map(|v| m.get(&v.name).unwrap().constants.len()).sum();
    assert_eq!(constants, 12);
    let cpn = translate(&net, &m);
    let cfg = ExplorationConfig { max_nodes: 1_000_000, ..Default::default() };
    let g = explore(&cpn, &cfg).expect("within the node budget");
    assert!(g.node_count() < 1_000_000);
    let report = analyze(&cpn, &g, &decs);
    assert!(report.p1.holds().is_some(), "a definite verdict is produced");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}, limit 30 s");
    pass(7, &format!(
        "stress model verified: {} nodes, {} edges in {:?}",
        g.node_count(),
        g.edges.len(),
        elapsed
    ));
}

fn sample_value(rng: &mut ChaCha8Rng, kind: DomainKind, lo: i64, hi: i64) -> Value {
    match kind {
        DomainKind::Int => Value::Int(rng.gen_range(lo..=hi)),
        DomainKind::Real => Value::real(rng.gen_range(lo as f64..=hi as f64)),
        DomainKind::Bool => Value::Bool(rng.gen_bool(0.5)),
        DomainKind::Str => {
            let n = rng.gen_range(0..4usize);
            let s: String = (0..n).map(|_| (b'a' + rng.gen_range(0..26u8)) as char).collect();
            Value::Str(s)
        }
    }
}

#[test]
fn criterion_8_guard_atom_indistinguishability() {
    let mut fixtures = vec![
        fixture_dir().join("fig1_loan.json"),
        fixture_dir().join("stress_parallel.json"),
    ];
    for e in std::fs::read_dir(fixture_dir().join("lattice")).unwrap() {
        fixtures.push(e.unwrap().path());
    }
    fixtures.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut samples = 0u64;
    for path in fixtures {
        let text = std::fs::read_to_string(&path).unwrap();
        let (net, _) = load_model_str(&text, true).unwrap();
        let m = build_representatives(&net);
        let atoms: Vec<(VarRef, Cmp, Value)> = net
            .guards()
            .flat_map(|g| g.atoms())
            .map(|(r, c, k)| (r.clone(), c, k.clone()))
            .collect();
        for v in &net.variables {
            let (lo, hi) = match m.get(&v.name) {
                Some(a) if !a.constants.is_empty() => {
                    let ints: Vec<i64> = a
                        .constants
                        .iter()
                        .filter_map(|c| match c {
                            Value::Int(n) => Some(*n),
                            _ => None,
                        })
                        .collect();
                    if ints.is_empty() {
                        (-1000, 1000)
                    } else {
                        (ints.iter().min().unwrap() - 1000, ints.iter().max().unwrap() + 1000)
                    }
                }
                _ => (-1000, 1000),
            };
            for _ in 0..10_000 {
                let x = sample_value(&mut rng, v.kind, lo, hi);
                let r = rep(&x, v, &m);
                samples += 1;
                for (var, cmp, k) in &atoms {
                    if var.name != v.name {
                        continue;
                    }
                    assert_eq!(
                        cmp.holds(&x, k),
                        cmp.holds(&r, k),
                        "{}: {} {} {} vs representative {}",
                        path.display(),
                        x,
                        cmp.symbol(),
                        k,
                        r
                    );
                }
            }
        }
    }
    pass(8, &format!("{samples} sampled values are atom-indistinguishable from their representatives"));
}
