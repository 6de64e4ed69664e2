//! `macromine` command-line driver.
//!
//! Exit codes: 0 success, 2 bad input, 3 generation backend failure,
//! 4 internal error.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use macromine::eval::{self, EvalPair};
use macromine::fixtures;
use macromine::graph::build_graph;
use macromine::llm::{GenerationBackend, HttpBackend, HttpBackendConfig, ScriptedBackend};
use macromine::macros::Macro;
use macromine::pipeline::{self, derive_seed, macro_file_name, PipelineConfig, PipelineError};
use macromine::replay::{batch_replay, replay_with_parameters};
use macromine::sim::{random_crawl, SimulatedApp, SimulatedDevice, DEFAULT_MAX_STEPS};
use macromine::trace::{parse_trace_json, trace_to_json, Trace};

#[derive(Debug)]
enum CliError {
    Input(anyhow::Error),
    Backend(anyhow::Error),
    Internal(anyhow::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Backend(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Backend(_) => CliError::Backend(e.into()),
            PipelineError::NoTraces | PipelineError::Threshold { .. } | PipelineError::ZeroRetryCap => {
                CliError::Input(e.into())
            }
            PipelineError::Graph(_) | PipelineError::MissingScreen { .. } => CliError::Internal(e.into()),
        }
    }
}

fn input<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Input(e.into())
}

fn internal<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Internal(e.into())
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "macromine", version, about = "Mine, replay and evaluate UI macros from interaction traces")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum BackendKind {
    Scripted,
    Live,
}

#[derive(Subcommand)]
enum Command {
    /// Mine macros from trace files or directories of traces.
    Mine {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(long, value_enum)]
        backend: Option<BackendKind>,
        /// Scripted completions (JSON map of prompt fingerprint to completions).
        #[arg(long)]
        script: Option<PathBuf>,
        /// Similarity threshold for grouping descriptions.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Replay macro files on a simulated app.
    Replay {
        #[arg(required = true)]
        macros: Vec<PathBuf>,
        /// Simulated app definition.
        #[arg(long)]
        app: PathBuf,
        /// Fuzzy element-match threshold.
        #[arg(long)]
        threshold: Option<f64>,
        /// Parameter value, `name=value`; repeatable.
        #[arg(long = "param", value_parser = parse_kv)]
        params: Vec<(String, String)>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score extracted descriptions against ground truth.
    Eval {
        /// JSON list of {trace_id, ground_truth, extracted}.
        input: PathBuf,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, value_enum, default_value_t = Baseline::None)]
        baseline: Baseline,
        /// Traces for the element-text baseline, matched by trace id.
        #[arg(long)]
        traces: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize traces and their interaction graphs.
    Stats {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the merged interaction graph of one app as Graphviz DOT.
    ExportGraph {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate traces by random crawling, or write the built-in fixtures.
    Fixtures {
        /// Simulated app definition to crawl.
        #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
        app: Option<PathBuf>,
        #[arg(long, value_enum)]
        builtin: Option<Builtin>,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
        max_steps: usize,
        #[arg(long, default_value = "fixtures")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Baseline {
    /// Score the extracted descriptions as given.
    None,
    /// Give every trace another trace's descriptions.
    RandomTrace,
    /// Use element texts of the trace as descriptions.
    ElementText,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Builtin {
    Calendar,
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .ok_or_else(|| format!("expected name=value, got {s:?}"))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    dedup_threshold: Option<f64>,
    match_threshold: Option<f64>,
    retry_cap: Option<usize>,
    backend: Option<BackendKind>,
    script: Option<PathBuf>,
    live: Option<HttpBackendConfig>,
}

fn load_config(path: Option<&Path>) -> CliResult<FileConfig> {
    let Some(path) = path else { return Ok(FileConfig::default()) };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(input)?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display())).map_err(input)
}

fn pipeline_config(cli: &Cli, file: &FileConfig, threshold: Option<f64>) -> PipelineConfig {
    let d = PipelineConfig::default();
    PipelineConfig {
        seed: cli.seed.or(file.seed).unwrap_or(d.seed),
        dedup_threshold: threshold.or(file.dedup_threshold).unwrap_or(d.dedup_threshold),
        match_threshold: file.match_threshold.unwrap_or(d.match_threshold),
        retry_cap: file.retry_cap.unwrap_or(d.retry_cap),
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(input)
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display())).map_err(internal)?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display())).map_err(internal)
}

fn emit(out: Option<&Path>, contents: &str) -> CliResult<()> {
    match out {
        Some(p) => write(p, contents),
        None => match writeln!(std::io::stdout().lock(), "{contents}") {
            // a closed reader (e.g. `| head`) is not an error
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(internal(e)),
            _ => Ok(()),
        },
    }
}

/// Expands directories to their `.json` files, sorted.
fn expand(paths: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))
                .map_err(input)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "json"))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn load_traces(paths: &[PathBuf]) -> CliResult<Vec<Trace>> {
    let files = expand(paths)?;
    if files.is_empty() {
        return Err(input(anyhow!("no trace files found")));
    }
    files
        .iter()
        .map(|f| {
            parse_trace_json(&read(f)?)
                .with_context(|| format!("parsing {}", f.display()))
                .map_err(input)
        })
        .collect()
}

fn make_backend(kind: BackendKind, script: Option<&Path>, file: &FileConfig) -> CliResult<Box<dyn GenerationBackend>> {
    match kind {
        BackendKind::Scripted => {
            let path = script.ok_or_else(|| input(anyhow!("the scripted backend needs --script or `script` in the config")))?;
            Ok(Box::new(ScriptedBackend::load(path).map_err(input)?))
        }
        BackendKind::Live => {
            let mut cfg = file
                .live
                .clone()
                .ok_or_else(|| input(anyhow!("the live backend needs a [live] section in the config")))?;
            if let Ok(url) = std::env::var("MACROMINE_BASE_URL") {
                cfg.base_url = url;
            }
            if let Ok(key) = std::env::var("MACROMINE_API_KEY") {
                cfg.api_key = Some(key);
            }
            Ok(Box::new(HttpBackend::new(cfg).map_err(|e| CliError::Backend(e.into()))?))
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> CliResult<String> {
    serde_json::to_string_pretty(v).map_err(internal)
}

fn cmd_mine(
    cli: &Cli,
    traces: &[PathBuf],
    backend: Option<BackendKind>,
    script: Option<&Path>,
    threshold: Option<f64>,
    out: &Path,
) -> CliResult<()> {
    let file = load_config(cli.config.as_deref())?;
    let cfg = pipeline_config(cli, &file, threshold);
    let traces = load_traces(traces)?;
    let kind = backend.or(file.backend).unwrap_or(BackendKind::Scripted);
    let script = script.map(Path::to_path_buf).or(file.script.clone());
    let backend = make_backend(kind, script.as_deref(), &file)?;
    let mined = pipeline::mine(&traces, backend.as_ref(), &cfg)?;
    let dir = out.join("macros");
    if dir.exists() {
        fs::remove_dir_all(&dir).with_context(|| format!("clearing {}", dir.display())).map_err(internal)?;
    }
    for (i, m) in mined.macros.iter().enumerate() {
        write(&dir.join(macro_file_name(i, m)), &m.to_json())?;
    }
    write(&out.join("report.json"), &to_json(&mined.report)?)?;
    eprintln!("mined {} macros from {} traces into {}", mined.macros.len(), traces.len(), out.display());
    Ok(())
}

fn load_macros(paths: &[PathBuf]) -> CliResult<Vec<Macro>> {
    let files = expand(paths)?;
    if files.is_empty() {
        return Err(input(anyhow!("no macro files found")));
    }
    files
        .iter()
        .map(|f| Macro::from_json(&read(f)?).with_context(|| format!("parsing {}", f.display())).map_err(input))
        .collect()
}

#[derive(Serialize)]
struct ReplayOutput {
    success_rate: Option<f64>,
    reports: Vec<macromine::replay::ReplayReport>,
}

fn cmd_replay(
    cli: &Cli,
    macros: &[PathBuf],
    app: &Path,
    threshold: Option<f64>,
    params: &[(String, String)],
    out: Option<&Path>,
) -> CliResult<()> {
    let file = load_config(cli.config.as_deref())?;
    let threshold = threshold.or(file.match_threshold).unwrap_or(macromine::replay::DEFAULT_MATCH_THRESHOLD);
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(input(anyhow!("threshold must be in (0, 1], got {threshold}")));
    }
    let app = SimulatedApp::load(app).map_err(input)?;
    let macros = load_macros(macros)?;
    let report = if params.is_empty() {
        let b = batch_replay(&macros, |_| SimulatedDevice::new(&app), threshold);
        ReplayOutput { success_rate: b.success_rate, reports: b.reports }
    } else {
        let values: BTreeMap<String, String> = params.iter().cloned().collect();
        let reports: Vec<_> = macros
            .iter()
            .map(|m| replay_with_parameters(m, &mut SimulatedDevice::new(&app), threshold, &values))
            .collect();
        let ok = reports.iter().filter(|r| r.succeeded()).count();
        ReplayOutput { success_rate: Some(ok as f64 / reports.len() as f64), reports }
    };
    emit(out, &to_json(&report)?)
}

fn cmd_eval(
    cli: &Cli,
    input_path: &Path,
    repeats: usize,
    baseline: Baseline,
    traces: &[PathBuf],
    out: Option<&Path>,
) -> CliResult<()> {
    let file = load_config(cli.config.as_deref())?;
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let pairs: Vec<EvalPair> = serde_json::from_str(&read(input_path)?)
        .with_context(|| format!("parsing {}", input_path.display()))
        .map_err(input)?;
    let result = match baseline {
        Baseline::None => eval::dataset_eval(&pairs, repeats),
        Baseline::ElementText => {
            let by_id: BTreeMap<String, Trace> =
                load_traces(traces)?.into_iter().map(|t| (t.trace_id.clone(), t)).collect();
            let mut swapped = pairs.clone();
            for p in &mut swapped {
                let t = by_id
                    .get(&p.trace_id)
                    .ok_or_else(|| input(anyhow!("no trace with id {:?}", p.trace_id)))?;
                p.extracted = eval::baseline_element_text(t);
            }
            eval::dataset_eval(&swapped, repeats)
        }
        Baseline::RandomTrace => {
            let extractions: BTreeMap<String, Vec<String>> =
                pairs.iter().map(|p| (p.trace_id.clone(), p.extracted.clone())).collect();
            if extractions.len() != pairs.len() {
                return Err(input(anyhow!("trace ids must be unique for the random-trace baseline")));
            }
            let assignments = (0..repeats)
                .map(|r| eval::baseline_random_trace(&extractions, derive_seed(seed, &format!("random-trace/{r}"))))
                .collect::<Result<Vec<_>, _>>()
                .map_err(input)?;
            eval::dataset_eval_with(repeats, |r| {
                pairs
                    .iter()
                    .map(|p| EvalPair { extracted: assignments[r][&p.trace_id].clone(), ..p.clone() })
                    .collect()
            })
        }
    }
    .map_err(input)?;
    emit(out, &to_json(&result)?)
}

#[derive(Serialize)]
struct AppStats {
    app_id: String,
    traces: usize,
    steps: usize,
    mean_steps: f64,
    graph_nodes: usize,
    graph_edges: usize,
}

fn cmd_stats(traces: &[PathBuf], out: Option<&Path>) -> CliResult<()> {
    let traces = load_traces(traces)?;
    let mut by_app: BTreeMap<String, Vec<Trace>> = BTreeMap::new();
    for t in traces {
        by_app.entry(t.app_id.clone()).or_default().push(t);
    }
    let mut stats = Vec::new();
    for (app_id, ts) in by_app {
        let g = build_graph(&ts).map_err(internal)?;
        let steps: usize = ts.iter().map(|t| t.steps.len()).sum();
        stats.push(AppStats {
            app_id,
            traces: ts.len(),
            steps,
            mean_steps: steps as f64 / ts.len() as f64,
            // the root is bookkeeping, not an action
            graph_nodes: g.node_count() - 1,
            graph_edges: g.edge_count(),
        });
    }
    emit(out, &to_json(&stats)?)
}

fn cmd_export_graph(traces: &[PathBuf], out: Option<&Path>) -> CliResult<()> {
    let traces = load_traces(traces)?;
    let g = build_graph(&traces).map_err(input)?;
    emit(out, &g.to_dot())
}

fn cmd_fixtures(
    cli: &Cli,
    app: Option<&Path>,
    builtin: Option<Builtin>,
    n: usize,
    max_steps: usize,
    out: &Path,
) -> CliResult<()> {
    if let Some(Builtin::Calendar) = builtin {
        let trace = fixtures::reminder_trace();
        write(&out.join("calendar_app.json"), &fixtures::calendar_app().to_json())?;
        write(&out.join("calendar_app_no_onboarding.json"), &fixtures::calendar_app_without_onboarding().to_json())?;
        write(&out.join("traces").join(format!("{}.json", trace.trace_id)), &trace_to_json(&trace))?;
        write(&out.join("calendar_script.json"), &fixtures::reminder_script().to_json())?;
        eprintln!("wrote calendar fixtures to {}", out.display());
        return Ok(());
    }
    let app_path = app.ok_or_else(|| input(anyhow!("--app or --builtin is required")))?;
    let file = load_config(cli.config.as_deref())?;
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    if max_steps == 0 {
        return Err(input(anyhow!("--max-steps must be positive")));
    }
    if n == 0 {
        return Err(input(anyhow!("--n must be positive")));
    }
    let app = SimulatedApp::load(app_path).map_err(input)?;
    for i in 0..n {
        let t = random_crawl(&app, max_steps, derive_seed(seed, &format!("crawl/{}/{i}", app.app_id))).map_err(input)?;
        write(&out.join(format!("{}.json", t.trace_id)), &trace_to_json(&t))?;
    }
    eprintln!("wrote {n} traces to {}", out.display());
    Ok(())
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Mine { traces, backend, script, threshold, out } => {
            cmd_mine(cli, traces, *backend, script.as_deref(), *threshold, out)
        }
        Command::Replay { macros, app, threshold, params, out } => {
            cmd_replay(cli, macros, app, *threshold, params, out.as_deref())
        }
        Command::Eval { input, repeats, baseline, traces, out } => {
            cmd_eval(cli, input, *repeats, *baseline, traces, out.as_deref())
        }
        Command::Stats { traces, out } => cmd_stats(traces, out.as_deref()),
        Command::ExportGraph { traces, out } => cmd_export_graph(traces, out.as_deref()),
        Command::Fixtures { app, builtin, n, max_steps, out } => {
            cmd_fixtures(cli, app.as_deref(), *builtin, *n, *max_steps, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::Input(err) | CliError::Backend(err) | CliError::Internal(err)) = &e;
            eprintln!("error: {err:#}");
            ExitCode::from(e.code())
        }
    }
}
