use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use dpnsound::abstraction::build_representatives;
use dpnsound::cpn::translate;
use dpnsound::dmn::{compile_table, decision_set_of, embed_fragment, table_from_json};
use dpnsound::dpn::{Arc, Dpn};
use dpnsound::model::{cpn_to_json, load_model_str, save_model_str};
use dpnsound::oracle::{run_comparison, CompareResult, FiniteDomainSpec, OracleError, DEFAULT_STATE_CAP};
use dpnsound::report::{build_document, render_text, to_json};
use dpnsound::soundness::{analyze, DecisionSet};
use dpnsound::statespace::{explore, ExplorationConfig, ExploreError};

const EXIT_OK: u8 = 0;
const EXIT_VIOLATIONS: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_BOUND: u8 = 3;

#[derive(Parser)]
#[command(name = "dpnsound", version, about = "Soundness checking for Petri nets with data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum PropertySuite {
    /// Only the three data-aware conditions decide the exit code.
    DataAware,
    /// Every evaluated property must hold.
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a model and report its soundness properties.
    Check {
        model: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        report: ReportFormat,
        #[arg(long, value_enum, default_value = "data-aware")]
        properties: PropertySuite,
        #[arg(long, default_value_t = ExplorationConfig::default().max_tokens_per_place)]
        max_tokens_per_place: u32,
        #[arg(long, default_value_t = ExplorationConfig::default().max_nodes)]
        max_states: usize,
        /// Accept unknown fields in the model file.
        #[arg(long)]
        lenient: bool,
    },
    /// Print the guard constants and representative values per variable.
    Explain { model: PathBuf },
    /// Compile a decision table and embed it into a host model.
    CompileDmn {
        table: PathBuf,
        #[arg(long)]
        host: PathBuf,
        #[arg(long)]
        place: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare concrete finite-domain semantics against the abstraction.
    OracleCompare {
        model: PathBuf,
        #[arg(long)]
        domains: PathBuf,
        #[arg(long, default_value_t = 6)]
        depth: usize,
        #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
        max_states: usize,
    },
    /// Write the colored translation as JSON (debugging aid).
    Translate {
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read(path: &PathBuf) -> Result<String, u8> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        EXIT_USAGE
    })
}

fn load(path: &PathBuf, strict: bool) -> Result<(Dpn, DecisionSet), u8> {
    let text = read(path)?;
    load_model_str(&text, strict).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        EXIT_USAGE
    })
}

fn explore_exit(e: ExploreError) -> u8 {
    eprintln!("error: {e}");
    EXIT_BOUND
}

fn color_enabled() -> bool {
    std::env::var("DPNSOUND_COLOR").map_or(true, |v| v != "0")
}

fn run_check(
    model: PathBuf,
    report: ReportFormat,
    properties: PropertySuite,
    max_tokens_per_place: u32,
    max_states: usize,
    lenient: bool,
) -> Result<u8, u8> {
    let (net, decs) = load(&model, !lenient)?;
    let start = Instant::now();
    let m = build_representatives(&net);
    let cpn = translate(&net, &m);
    let cfg = ExplorationConfig { max_tokens_per_place, max_nodes: max_states };
    let g = explore(&cpn, &cfg).map_err(explore_exit)?;
    let mut r = analyze(&cpn, &g, &decs);
    r.stats.wall_ms = start.elapsed().as_millis() as u64;
    let doc = build_document(&r, &cpn, &m);
    match report {
        ReportFormat::Text => print!("{}", render_text(&doc, color_enabled())),
        ReportFormat::Json => println!("{}", to_json(&doc)),
    }
    let holds = match properties {
        PropertySuite::DataAware => r.data_aware_sound(),
        PropertySuite::All => r.all_hold(),
    };
    Ok(if holds { EXIT_OK } else { EXIT_VIOLATIONS })
}

fn run_explain(model: PathBuf) -> Result<u8, u8> {
    let (net, _) = load(&model, true)?;
    let m = build_representatives(&net);
    for (name, a) in m.iter() {
        let consts = a.constants.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ");
        let reps =
            a.representatives.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ");
        println!("{name} ({}):", a.kind);
        println!("  constants: {{{consts}}}");
        println!("  representatives: {{{reps}}}");
        for iv in &a.intervals {
            match (&iv.representative, iv.is_point()) {
                (_, true) => {}
                (Some(rep), _) => println!("    {rep} stands for {}", iv.render()),
                (None, _) => println!("    (empty interval {})", iv.render()),
            }
        }
        if let Some(s) = &a.string_sentinel {
            println!("    {:?} stands for any other string", s);
        }
    }
    for note in m.notes() {
        println!("note: {note}");
    }
    Ok(EXIT_OK)
}

fn run_compile_dmn(
    table: PathBuf,
    host: PathBuf,
    place: String,
    out: PathBuf,
) -> Result<u8, u8> {
    let (net, mut decs) = load(&host, true)?;
    let text = read(&table)?;
    let tbl = table_from_json(&text).map_err(|e| {
        eprintln!("error: {}: {e}", table.display());
        EXIT_USAGE
    })?;
    let (frag, diags) = compile_table(&tbl).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_USAGE
    })?;
    for d in &diags {
        eprintln!("warning: {d}");
    }
    let shared = net.place_index(&place).ok_or_else(|| {
        eprintln!("error: unknown place `{place}` in {}", host.display());
        EXIT_USAGE
    })?;
    let targets: BTreeSet<&String> =
        frag.transitions.iter().filter_map(|c| c.target.as_ref()).collect();
    let siblings = net
        .arcs
        .iter()
        .filter(|a| matches!(a, Arc::PlaceToTransition(p, _) if *p == shared))
        .filter(|a| match a {
            Arc::PlaceToTransition(_, t) => !targets.contains(&net.transitions[*t].id),
            _ => false,
        })
        .count();
    let compiled = embed_fragment(&net, &place, &frag, siblings).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_USAGE
    })?;
    decs.0.push(decision_set_of(&compiled, &frag));
    std::fs::write(&out, save_model_str(&compiled, &decs)).map_err(|e| {
        eprintln!("error: cannot write {}: {e}", out.display());
        EXIT_USAGE
    })?;
    println!(
        "compiled `{}`: {} rule transitions, {} stranded, {} sibling(s) at `{place}`",
        frag.table,
        frag.transitions.len(),
        frag.stranded.len(),
        siblings
    );
    Ok(EXIT_OK)
}

fn run_oracle_compare(
    model: PathBuf,
    domains: PathBuf,
    depth: usize,
    max_states: usize,
) -> Result<u8, u8> {
    let (net, _) = load(&model, true)?;
    let text = read(&domains)?;
    let spec = FiniteDomainSpec::from_json(&text, &net).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_USAGE
    })?;
    let r = run_comparison(&net, &spec, depth, max_states).map_err(|e| match e {
        OracleError::Explosion { .. } => {
            eprintln!("error: {e}");
            EXIT_BOUND
        }
        other => {
            eprintln!("error: {other}");
            EXIT_USAGE
        }
    })?;
    println!(
        "concrete: {} states, abstract: {} nodes, depth {}",
        r.concrete_states, r.abstract_nodes, r.depth
    );
    match &r.trace_result {
        CompareResult::Equal => println!("bounded traces: equal"),
        CompareResult::Differs { sequence, only_in_first } => {
            let side = if *only_in_first { "concrete" } else { "abstract" };
            println!("bounded traces: differ, <{}> only on the {side} side", sequence.join(", "));
        }
    }
    println!(
        "verdicts: concrete P1={} P2={} P3={}, abstract P1={} P2={} P3={}",
        r.concrete.p1, r.concrete.p2, r.concrete.p3, r.abstracted.p1, r.abstracted.p2, r.abstracted.p3
    );
    Ok(if r.agrees() { EXIT_OK } else { EXIT_VIOLATIONS })
}

fn run_translate(model: PathBuf, out: PathBuf) -> Result<u8, u8> {
    let (net, _) = load(&model, true)?;
    let m = build_representatives(&net);
    let cpn = translate(&net, &m);
    let doc = cpn_to_json(&cpn);
    std::fs::write(&out, serde_json::to_string_pretty(&doc).expect("serializes")).map_err(
        |e| {
            eprintln!("error: cannot write {}: {e}", out.display());
            EXIT_USAGE
        },
    )?;
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check { model, report, properties, max_tokens_per_place, max_states, lenient } => {
            run_check(model, report, properties, max_tokens_per_place, max_states, lenient)
        }
        Command::Explain { model } => run_explain(model),
        Command::CompileDmn { table, host, place, out } => {
            run_compile_dmn(table, host, place, out)
        }
        Command::OracleCompare { model, domains, depth, max_states } => {
            run_oracle_compare(model, domains, depth, max_states)
        }
        Command::Translate { model, out } => run_translate(model, out),
    };
    ExitCode::from(result.unwrap_or_else(|code| code))
}
