use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde_json::{json, Value};

use ovigo_core::config::PipelineConfig;
use ovigo_core::eval::{evaluate_locations, parse_benchmark, run_benchmark, EvalError, MatchOrder};
use ovigo_core::export::{graph_dot, write_bev_pngs};
use ovigo_core::fixture::scene::GroundTruth;
use ovigo_core::fixture::spec::FixtureSpec;
use ovigo_core::fixture::{generate, FixtureError};
use ovigo_core::graph::{load_graph, save_graph, SceneGraph};
use ovigo_core::llm::{CallLog, ChatClient, HttpChatClient, ScriptedClient};
use ovigo_core::pipeline::{build_scene_graph, load_manifest};
use ovigo_core::reasoning::run_pipeline;

use crate::{CliError, Cli, Command, ExportKind, Global, Order};

type Result<T> = std::result::Result<T, CliError>;

/// A ground-truth storey pairs with the graph floor whose lower boundary is
/// within this distance of its floor height.
const FLOOR_MATCH_TOLERANCE: f64 = 0.5;

pub fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::BuildGraph { manifest, out, transcript } => build(g, manifest, out, transcript.as_deref()),
        Command::Ground {
            graph,
            query,
            benchmark,
            transcript,
            out,
        } => match (query, benchmark) {
            (Some(q), _) => ground_query(g, graph, q, transcript.as_deref(), out.as_deref()),
            (None, Some(b)) => ground_benchmark(g, graph, b, transcript.as_deref(), out.as_deref()),
            (None, None) => Err(CliError::input(anyhow!("either --query or --benchmark is required"))),
        },
        Command::EvalLocations {
            graph,
            ground_truth,
            deltas,
            order,
            out,
        } => eval_locations(g, graph, ground_truth, deltas, *order, out.as_deref()),
        Command::EvalGrounding {
            graph,
            benchmark,
            transcript,
            out,
        } => eval_grounding(g, graph, benchmark, transcript.as_deref(), out.as_deref()),
        Command::GenFixture { spec, seed, out } => gen_fixture(spec.as_deref(), *seed, out),
        Command::Export { graph, kind, out, scale } => export(graph, *kind, out, *scale),
    }
}

fn config(g: &Global) -> Result<PipelineConfig> {
    let mut overrides = g.overrides.clone();
    if g.force_extend {
        overrides.push("floors.force_extend=true".into());
    }
    PipelineConfig::load(g.config.as_deref(), &overrides).map_err(CliError::input)
}

fn threads(g: &Global) -> usize {
    g.threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(CliError::input)
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(CliError::input)?;
    }
    std::fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(CliError::input)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

/// Pretty JSON to `out`, or to stdout without one.
fn emit(out: Option<&Path>, v: &Value) -> Result<()> {
    match out {
        Some(p) => write(p, &pretty(v)),
        None => {
            print!("{}", pretty(v));
            Ok(())
        }
    }
}

fn client(transcript: Option<&Path>, cfg: &PipelineConfig) -> Result<Box<dyn ChatClient>> {
    match transcript {
        Some(p) => {
            let text = read(p)?;
            let c = ScriptedClient::from_jsonl(&text)
                .with_context(|| format!("loading transcript {}", p.display()))
                .map_err(CliError::input)?;
            Ok(Box::new(c))
        }
        None => {
            let c = HttpChatClient::from_config(&cfg.llm)
                .context("no --transcript given, so an LLM endpoint must be configured")
                .map_err(CliError::input)?;
            Ok(Box::new(c))
        }
    }
}

fn load(path: &Path) -> Result<SceneGraph> {
    load_graph(path)
        .with_context(|| format!("loading graph {}", path.display()))
        .map_err(CliError::input)
}

/// `graph.json` becomes `graph.<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "graph".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn build(g: &Global, manifest_path: &Path, out: &Path, transcript: Option<&Path>) -> Result<()> {
    let cfg = config(g)?;
    let manifest = load_manifest(manifest_path).map_err(CliError::input)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let llm = client(transcript, &cfg)?;
    let calls = CallLog::new();
    let (graph, blog) = build_scene_graph(&manifest, base, &cfg, llm.as_ref(), &calls, threads(g)).map_err(|e| {
        let ctx = format!("building from {}", manifest_path.display());
        if e.is_input() {
            CliError::input(anyhow::Error::new(e).context(ctx))
        } else {
            CliError::pipeline(anyhow::Error::new(e).context(ctx))
        }
    })?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(CliError::input)?;
    }
    save_graph(&graph, out)
        .with_context(|| format!("writing {}", out.display()))
        .map_err(CliError::input)?;
    let bl = json!({ "config": cfg.to_value(), "build_log": blog });
    write(&sibling(out, "build.json"), &pretty(&bl))?;
    write(&sibling(out, "calls.jsonl"), &calls.to_jsonl())?;
    let summary = json!({
        "graph": out,
        "floors": graph.floors.len(),
        "rooms": graph.rooms.len(),
        "locations": graph.locations.len(),
        "objects": graph.objects.len(),
        "llm_calls": calls.len(),
    });
    print!("{}", pretty(&summary));
    Ok(())
}

fn ground_query(g: &Global, graph_path: &Path, query: &str, transcript: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let cfg = config(g)?;
    let graph = load(graph_path)?;
    let llm = client(transcript, &cfg)?;
    let log = CallLog::new();
    let res = run_pipeline(&graph, query, llm.as_ref(), &log, &cfg.reasoning);
    let mut v = json!({
        "config": cfg.to_value(),
        "graph_config": graph.config,
        "query": query,
    });
    let outcome = match res {
        Ok(o) => {
            v["result"] = serde_json::to_value(&o.result).expect("serializable");
            v["trace"] = serde_json::to_value(&o.trace).expect("serializable");
            Ok(())
        }
        Err(e) => {
            v["error"] = json!({ "stage": e.stage, "message": e.kind.to_string() });
            Err(CliError::pipeline(anyhow::Error::new(e).context(format!("grounding {query:?}"))))
        }
    };
    v["transcript"] = serde_json::to_value(log.records()).expect("serializable");
    emit(out, &v)?;
    outcome
}

fn benchmark_error(e: EvalError) -> CliError {
    match e {
        EvalError::Parse { .. } | EvalError::EmptyBenchmark => CliError::input(e),
        other => CliError::pipeline(other),
    }
}

fn ground_benchmark(g: &Global, graph_path: &Path, bench: &Path, transcript: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let cfg = config(g)?;
    let graph = load(graph_path)?;
    let items = parse_benchmark(&read(bench)?).map_err(benchmark_error)?;
    let llm = client(transcript, &cfg)?;
    let report = run_benchmark(&graph, &items, llm.as_ref(), &cfg.reasoning).map_err(benchmark_error)?;
    let v = json!({
        "config": cfg.to_value(),
        "graph_config": graph.config,
        "report": report,
        "transcript": report.transcript,
    });
    emit(out, &v)
}

fn eval_grounding(g: &Global, graph_path: &Path, bench: &Path, transcript: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let cfg = config(g)?;
    let graph = load(graph_path)?;
    let items = parse_benchmark(&read(bench)?).map_err(benchmark_error)?;
    let llm = client(transcript, &cfg)?;
    let report = run_benchmark(&graph, &items, llm.as_ref(), &cfg.reasoning).map_err(benchmark_error)?;
    print!("{}", report.table());
    if let Some(p) = out {
        let v = json!({
            "config": cfg.to_value(),
            "graph_config": graph.config,
            "accuracy": report.accuracy,
            "queries": report.queries,
        });
        write(p, &pretty(&v))?;
    }
    Ok(())
}

fn eval_locations(g: &Global, graph_path: &Path, gt_path: &Path, deltas: &[f64], order: Order, out: Option<&Path>) -> Result<()> {
    let cfg = config(g)?;
    if deltas.is_empty() || deltas.iter().any(|d| !(0.0..=1.0).contains(d)) {
        return Err(CliError::input(anyhow!("--deltas must be IoU thresholds in [0, 1]")));
    }
    let graph = load(graph_path)?;
    let gt: GroundTruth = serde_json::from_str(&read(gt_path)?)
        .with_context(|| format!("parsing ground truth {}", gt_path.display()))
        .map_err(CliError::input)?;
    let order = match order {
        Order::BestIou => MatchOrder::BestIou,
        Order::Input => MatchOrder::Input,
    };
    let eval = evaluate_locations(&graph, &gt.location_floors(), deltas, order, FLOOR_MATCH_TOLERANCE).map_err(CliError::pipeline)?;
    eprintln!("{:>6}  {:>4}  {:>4}  {:>4}  {:>6}", "delta", "tp", "fp", "fn", "f1");
    for r in &eval.overall {
        eprintln!("{:>6.2}  {:>4}  {:>4}  {:>4}  {:>6.3}", r.delta, r.tp, r.fp, r.fn_, r.f1);
    }
    let v = json!({
        "config": cfg.to_value(),
        "graph_config": graph.config,
        "order": format!("{order:?}"),
        "evaluation": eval,
    });
    emit(out, &v)
}

fn gen_fixture(spec_path: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut spec = match spec_path {
        Some(p) => FixtureSpec::parse(&read(p)?)
            .with_context(|| format!("fixture spec {}", p.display()))
            .map_err(CliError::input)?,
        None => FixtureSpec::apartment(seed.unwrap_or(7)),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let summary = generate(&spec, out).map_err(|e| match e {
        FixtureError::Spec(_) | FixtureError::Io(_) => CliError::input(e),
        FixtureError::Build(_) => CliError::pipeline(e),
    })?;
    print!("{}", pretty(&serde_json::to_value(&summary).expect("serializable")));
    Ok(())
}

fn export(graph_path: &Path, kind: ExportKind, out: &Path, scale: u32) -> Result<()> {
    let graph = load(graph_path)?;
    match kind {
        ExportKind::BevPng => {
            let files = write_bev_pngs(&graph, out, scale).map_err(CliError::input)?;
            for f in files {
                println!("{}", f.display());
            }
        }
        ExportKind::GraphDot => {
            let dot = graph_dot(&graph).map_err(CliError::input)?;
            write(out, &dot)?;
            println!("{}", out.display());
        }
    }
    Ok(())
}
