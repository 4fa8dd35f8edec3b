//! `guidroid`: runs exploration sessions over simulated app models or a
//! device bridge, and inspects their outputs.
//!
//! Exit status: 0 on success, 1 when a session lost its driver or backend
//! (or a replay diverged), 2 on configuration and input errors.

mod config;

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use clap::{Parser, Subcommand};
use guidroid::device::{load_app_model, serve_bridge, AppModel, BridgeDriver, Driver, Simulator};
use guidroid::gui::AppInfo;
use guidroid::llm::{ChatBackend, HeuristicOracle, HttpBackend, HttpConfig, RandomBackend, ScriptedBackend};
use guidroid::report::{emit_coverage_series, read_trace_jsonl, replay_trace, summarize, write_trace_jsonl};
use guidroid::session::{run_session, SessionReport, TerminationReason};
use serde::Deserialize;

use config::{BackendKind, FileConfig, RunFlags, Settings};

#[derive(Parser)]
#[command(name = "guidroid", version, about = "LLM-driven GUI exploration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Explore app models (or a bridged device) and write traces and reports.
    Run(Box<RunArgs>),
    /// Check an app model file.
    Validate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Re-execute a trace on the model and compare result kinds.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Aggregate the report.json files under a results directory.
    Summarize {
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve a model over the bridge protocol, on stdio or a TCP port.
    Serve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        listen: Option<String>,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// App model files or directories of them.
    #[arg(long, num_args = 1.., required_unless_present = "bridge", conflicts_with = "bridge")]
    apps: Vec<PathBuf>,
    /// `host:port` of a device bridge.
    #[arg(long, requires = "app_info")]
    bridge: Option<String>,
    /// App info for the bridged app: a model file or `{app_name, activities, description}`.
    #[arg(long)]
    app_info: Option<PathBuf>,
    /// TOML file with defaults for the flags below.
    #[arg(long, env = "GUIDROID_CONFIG")]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: RunFlags,
}

/// Failure carrying its exit status.
struct Failure(u8, String);

fn usage(message: impl Into<String>) -> Failure {
    Failure(2, message.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(*args),
        Command::Validate { model } => validate(&model),
        Command::Replay { trace, model } => replay(&trace, &model),
        Command::Summarize { out } => summarize_dir(&out),
        Command::Serve { model, listen } => serve(&model, listen.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, message)) => {
            eprintln!("guidroid: {message}");
            ExitCode::from(code)
        }
    }
}

fn read_model(path: &Path) -> Result<AppModel, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    load_app_model(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Expands directories to their `*.json` files, sorted.
fn model_paths(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut paths = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let entries = fs::read_dir(input).map_err(|e| usage(format!("{}: {e}", input.display())))?;
            let mut found: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            found.sort();
            paths.extend(found);
        } else {
            paths.push(input.clone());
        }
    }
    if paths.is_empty() {
        return Err(usage("no app models found"));
    }
    Ok(paths)
}

#[derive(Deserialize)]
struct BareAppInfo {
    app_name: String,
    activities: Vec<String>,
    #[serde(default)]
    description: String,
}

fn read_app_info(path: &Path) -> Result<(AppInfo, String), Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if let Ok(model) = load_app_model(&text) {
        return Ok((model.app_info, model.description));
    }
    let bare: BareAppInfo = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let app = AppInfo::new(&bare.app_name, bare.activities).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok((app, bare.description))
}

/// One unit of work for the run loop.
enum Target {
    Model { label: String, model: Arc<AppModel> },
    Bridge { label: String, addr: String, app: AppInfo, description: String },
}

impl Target {
    fn label(&self) -> &str {
        match self {
            Target::Model { label, .. } | Target::Bridge { label, .. } => label,
        }
    }
}

struct Backends {
    kind: BackendKind,
    shared: Option<Arc<HttpBackend>>,
    script: Option<String>,
}

impl Backends {
    fn new(settings: &Settings) -> Result<Self, Failure> {
        let shared = match (settings.backend, &settings.endpoint) {
            (BackendKind::Http, Some(endpoint)) => {
                let mut http = HttpConfig::new(endpoint.clone()).with_key_from_env(&settings.api_key_env);
                http.max_concurrent = settings.parallel;
                Some(Arc::new(HttpBackend::new(http).map_err(|e| usage(e.to_string()))?))
            }
            _ => None,
        };
        let script = match &settings.script {
            Some(path) if settings.backend == BackendKind::Scripted => {
                let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
                ScriptedBackend::from_json(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
                Some(text)
            }
            _ => None,
        };
        Ok(Self { kind: settings.backend, shared, script })
    }

    /// A backend for one session. Stateful backends are per session; the
    /// HTTP client is shared so its request cap is global.
    fn for_session(&self, seed: u64) -> Box<dyn ChatBackend> {
        match self.kind {
            BackendKind::Http => Box::new(Arc::clone(self.shared.as_ref().expect("http backend built"))),
            BackendKind::Scripted => {
                Box::new(ScriptedBackend::from_json(self.script.as_deref().unwrap_or("[]")).expect("script checked"))
            }
            BackendKind::Oracle => Box::new(HeuristicOracle::new()),
            BackendKind::Random => Box::new(RandomBackend::new(seed)),
        }
    }
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let RunArgs { apps, bridge, app_info, config, flags } = args;
    let file = match &config {
        Some(path) => FileConfig::load(path).map_err(usage)?,
        None => FileConfig::default(),
    };
    let settings = Settings::resolve(flags, file).map_err(usage)?;
    let targets = match (bridge, app_info) {
        (Some(addr), Some(path)) => {
            let (app, description) = read_app_info(&path)?;
            vec![Target::Bridge { label: stem(&path), addr, app, description }]
        }
        _ => model_paths(&apps)?
            .into_iter()
            .map(|path| {
                read_model(&path).map(|m| Target::Model { label: stem(&path), model: Arc::new(m) })
            })
            .collect::<Result<_, _>>()?,
    };
    let backends = Backends::new(&settings)?;
    fs::create_dir_all(&settings.out).map_err(|e| usage(format!("{}: {e}", settings.out.display())))?;

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<SessionReport, String>>>> = Mutex::new((0..targets.len()).map(|_| None).collect());
    let workers = settings.parallel.min(targets.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(target) = targets.get(i) else { break };
                let outcome = run_target(target, &backends, &settings);
                match &outcome {
                    Ok(r) => eprintln!(
                        "{}: {} steps, coverage {:.3}, {} bugs, {:?}",
                        target.label(),
                        r.steps_executed,
                        r.activity_coverage,
                        r.bugs.len(),
                        r.termination_reason
                    ),
                    Err(e) => eprintln!("{}: {e}", target.label()),
                }
                results.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(outcome);
            });
        }
    });

    let mut reports = Vec::new();
    let mut degraded = Vec::new();
    for (target, outcome) in targets.iter().zip(results.into_inner().unwrap_or_else(|e| e.into_inner())) {
        match outcome.expect("every target ran") {
            Ok(report) => {
                if matches!(report.termination_reason, TerminationReason::DriverGone | TerminationReason::BackendExhausted) {
                    degraded.push(format!("{} ended with {:?}", target.label(), report.termination_reason));
                }
                reports.push(report);
            }
            Err(e) => degraded.push(format!("{}: {e}", target.label())),
        }
    }
    let summary = summarize(&reports);
    write_json(&settings.out.join("summary.json"), &summary).map_err(|e| Failure(2, e))?;
    println!(
        "{} apps, mean activity coverage {:.3}, mean steps {:.1}, {} bugs",
        summary.apps.len(),
        summary.mean_activity_coverage,
        summary.mean_steps,
        summary.total_bugs
    );
    if degraded.is_empty() {
        Ok(())
    } else {
        Err(Failure(1, degraded.join("; ")))
    }
}

fn run_target(target: &Target, backends: &Backends, settings: &Settings) -> Result<SessionReport, String> {
    let backend = backends.for_session(settings.session.seed);
    let report = match target {
        Target::Model { model, .. } => {
            let mut sim = Simulator::new(model.clone());
            run_session(&mut sim, &backend, &model.app_info, &model.description, &settings.session)
        }
        Target::Bridge { addr, app, description, .. } => {
            let mut driver = BridgeDriver::connect_tcp(addr).map_err(|e| format!("connect {addr}: {e}"))?;
            run_session(&mut driver, &backend, app, description, &settings.session)
        }
    }
    .map_err(|e| e.to_string())?;
    let dir = settings.out.join(target.label());
    fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let trace_path = dir.join("trace.jsonl");
    let file = File::create(&trace_path).map_err(|e| format!("{}: {e}", trace_path.display()))?;
    let mut out = BufWriter::new(file);
    write_trace_jsonl(&mut out, &report.trace)
        .and_then(|_| out.flush())
        .map_err(|e| format!("{}: {e}", trace_path.display()))?;
    write_json(&dir.join("report.json"), &report)?;
    fs::write(dir.join("coverage.csv"), emit_coverage_series(&report)).map_err(|e| format!("{}: {e}", dir.display()))?;
    Ok(report)
}

/// Output directory name for a target.
fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "app".into(), |s| s.to_string_lossy().into_owned())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), String> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    text.push('\n');
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn validate(path: &Path) -> Result<(), Failure> {
    let model = read_model(path)?;
    let reachable = model.reachable_pages();
    println!(
        "ok: {} ({} activities, {} pages, {} transitions, {} crash rules, {} reachable)",
        model.app_info.app_name,
        model.app_info.activities.len(),
        model.pages.len(),
        model.transitions.len(),
        model.crash_rules.len(),
        reachable.len()
    );
    Ok(())
}

fn replay(trace_path: &Path, model_path: &Path) -> Result<(), Failure> {
    let model = read_model(model_path)?;
    let file = File::open(trace_path).map_err(|e| usage(format!("{}: {e}", trace_path.display())))?;
    let trace = read_trace_jsonl(BufReader::new(file)).map_err(|e| usage(format!("{}: {e}", trace_path.display())))?;
    let outcome = replay_trace(Arc::new(model), &trace);
    for m in &outcome.mismatches {
        println!(
            "step {}: expected {:?} on {}, got {:?} on {}",
            m.step, m.expected, m.expected_activity, m.actual, m.actual_activity
        );
    }
    if outcome.is_faithful() {
        println!("faithful: {} steps", outcome.steps);
        Ok(())
    } else {
        Err(Failure(1, format!("{} of {} steps diverged", outcome.mismatches.len(), outcome.steps)))
    }
}

fn summarize_dir(out: &Path) -> Result<(), Failure> {
    let entries = fs::read_dir(out).map_err(|e| usage(format!("{}: {e}", out.display())))?;
    let mut paths: Vec<PathBuf> =
        entries.filter_map(|e| e.ok().map(|e| e.path().join("report.json"))).filter(|p| p.is_file()).collect();
    paths.sort();
    let mut reports = Vec::new();
    for path in paths {
        let text = fs::read_to_string(&path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        reports.push(serde_json::from_str::<SessionReport>(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?);
    }
    if reports.is_empty() {
        return Err(usage(format!("no reports under {}", out.display())));
    }
    let summary = summarize(&reports);
    println!("{}", serde_json::to_string_pretty(&summary).map_err(|e| usage(e.to_string()))?);
    Ok(())
}

fn serve(model_path: &Path, listen: Option<&str>) -> Result<(), Failure> {
    let model = Arc::new(read_model(model_path)?);
    let io_err = |e: io::Error| Failure(1, e.to_string());
    match listen {
        None => {
            let mut sim = Simulator::new(model);
            serve_bridge(&mut sim, io::stdin().lock(), io::stdout().lock()).map_err(io_err)
        }
        Some(addr) => {
            let listener = TcpListener::bind(addr).map_err(|e| usage(format!("bind {addr}: {e}")))?;
            eprintln!("listening on {}", listener.local_addr().map_err(io_err)?);
            for stream in listener.incoming() {
                let stream = stream.map_err(io_err)?;
                let mut sim = Simulator::new(model.clone());
                sim.restart().map_err(|e| Failure(1, e.to_string()))?;
                let reader = BufReader::new(stream.try_clone().map_err(io_err)?);
                if let Err(e) = serve_bridge(&mut sim, reader, stream) {
                    eprintln!("connection closed: {e}");
                }
            }
            Ok(())
        }
    }
}
