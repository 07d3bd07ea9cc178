//! `lqm`: validate, run, compare, scaffold and plot link queue model scenarios.
//!
//! Exit codes: 0 success, 1 scenario failed validation, 2 runtime invariant
//! breach or non-deterministic run, 3 unreadable input or incompatible
//! traces, 64 usage error.

mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use lqm_core::io::builders::{self, BUILTIN_NAMES};
use lqm_core::io::{compare, load_scenario, save_scenario};
use lqm_core::network::validate_report;
use lqm_core::{run_with, EngineError, ExecutionMode, LinkId, Quantity, RunOptions, Scenario, TraceSet};

#[derive(Parser)]
#[command(name = "lqm", version, about = "Link queue model network loading")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and list every violation.
    Validate { scenario: PathBuf },
    /// Simulate one or more scenarios and write traces and summaries.
    Run(RunArgs),
    /// Per-link error between two traces.
    Compare(CompareArgs),
    /// Write a built-in scenario as an editable JSON file.
    Scaffold { template: String, out: PathBuf },
    /// Render per-link SVG plots from a trace file.
    Plot {
        trace: PathBuf,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
        /// Comma-separated link ids; all links when omitted.
        #[arg(long, value_delimiter = ',')]
        links: Vec<u32>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file; repeatable.
    #[arg(long)]
    scenario: Vec<PathBuf>,
    /// Built-in scenario name; repeatable.
    #[arg(long)]
    builtin: Vec<String>,
    /// Output directory. With several scenarios each gets a subdirectory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Step length in seconds; step-indexed inputs are re-gridded.
    #[arg(long)]
    dt: Option<f64>,
    /// Number of steps to simulate.
    #[arg(long)]
    horizon: Option<usize>,
    /// Block-averaging window for demand profiles.
    #[arg(long)]
    smooth_window: Option<usize>,
    /// Run the link and node phases on the thread pool.
    #[arg(long)]
    parallel: bool,
    /// Run serially and in parallel and fail unless the traces are identical.
    #[arg(long)]
    check_determinism: bool,
    /// Scenarios simulated at once.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Also write per-link SVG plots.
    #[arg(long)]
    plot: bool,
    /// Reserved. The model has no randomness, so this is always rejected.
    #[arg(long)]
    seedless: bool,
    /// Skip the per-step invariant checks.
    #[arg(long)]
    no_checks: bool,
}

#[derive(Args)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
    /// Comma-separated quantities; all when omitted.
    #[arg(long, value_delimiter = ',')]
    quantities: Vec<Quantity>,
    /// Scenario file used to group links by approach.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Built-in scenario used to group links by approach.
    #[arg(long)]
    builtin: Option<String>,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
    /// Also write the output to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Runtime(String),
    Input(String),
    Usage(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Runtime(_) => 2,
            Failure::Input(_) => 3,
            Failure::Usage(_) => 64,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Runtime(m) | Failure::Input(m) | Failure::Usage(m) => m,
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Invalid(v) => Failure::Invalid(
                v.iter().map(|x| format!("violation: {x}")).collect::<Vec<_>>().join("\n"),
            ),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn input<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Input(e.to_string())
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn builtin(name: &str) -> Result<Scenario, Failure> {
    builders::builtin(name)
        .ok_or_else(|| Failure::Usage(format!("unknown built-in `{name}` (expected one of {})", BUILTIN_NAMES.join(", "))))
}

fn validate(path: &Path) -> Result<(), Failure> {
    let s = load_scenario(path).map_err(input)?;
    let report = validate_report(&s);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for v in &report.violations {
        println!("{v}");
    }
    println!("{} violations", report.violations.len());
    if report.is_valid() {
        Ok(())
    } else {
        Err(Failure::Invalid(format!("{} failed validation", path.display())))
    }
}

/// One scenario to run and the name its outputs are filed under.
struct Job {
    name: String,
    scenario: Scenario,
}

fn jobs(args: &RunArgs) -> Result<Vec<Job>, Failure> {
    let mut out = Vec::new();
    for path in &args.scenario {
        let scenario = load_scenario(path).map_err(input)?;
        let name = path.file_stem().map_or("scenario".into(), |s| s.to_string_lossy().into_owned());
        out.push(Job { name, scenario });
    }
    for name in &args.builtin {
        out.push(Job {
            name: name.clone(),
            scenario: builtin(name)?,
        });
    }
    if out.is_empty() {
        return Err(Failure::Usage("run needs --scenario or --builtin".into()));
    }
    let mut names: Vec<&str> = out.iter().map(|j| j.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Failure::Usage("two scenarios would share an output directory".into()));
    }
    for job in &mut out {
        if let Some(dt) = args.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Failure::Usage(format!("--dt must be positive, got {dt}")));
            }
            job.scenario = job.scenario.with_dt(dt);
        }
        if let Some(h) = args.horizon {
            job.scenario.horizon = h;
        }
        if let Some(w) = args.smooth_window {
            if w == 0 {
                return Err(Failure::Usage("--smooth-window must be at least 1".into()));
            }
            job.scenario.demand.smooth_window = w;
        }
    }
    Ok(out)
}

/// Runs one job and returns the line printed for it.
fn run_job(job: &Job, args: &RunArgs, dir: &Path) -> Result<String, Failure> {
    let opts = RunOptions {
        mode: if args.parallel { ExecutionMode::Parallel } else { ExecutionMode::Serial },
        check_invariants: !args.no_checks,
    };
    let (trace, _, mut report) = run_with(&job.scenario, &opts)?;
    if args.check_determinism {
        let other = RunOptions {
            mode: match opts.mode {
                ExecutionMode::Serial => ExecutionMode::Parallel,
                ExecutionMode::Parallel => ExecutionMode::Serial,
            },
            ..opts.clone()
        };
        let (again, _, _) = run_with(&job.scenario, &other)?;
        if again != trace {
            return Err(Failure::Runtime(format!("{}: serial and parallel traces differ", job.name)));
        }
    }
    eprintln!(
        "{}: {} steps in {:.3} s, {:.3} ms per step",
        job.name,
        report.steps,
        report.wall_time_s,
        report.mean_step_time_s * 1e3
    );

    fs::create_dir_all(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
    let trace_path = dir.join("trace.csv");
    trace.write(&trace_path).map_err(input)?;
    report.outputs.push(trace_path.display().to_string());
    if args.plot {
        let plots = plot::write_plots(&trace, &dir.join("plots"), &[]).map_err(input)?;
        report.outputs.extend(plots.iter().map(|p| p.display().to_string()));
    }
    let summary_path = dir.join("summary.json");
    report.outputs.push(summary_path.display().to_string());
    // timing varies between runs; it goes to stderr so file outputs stay reproducible
    let mut summary = serde_json::to_value(&report).expect("report serializes");
    if let Some(map) = summary.as_object_mut() {
        map.remove("wall_time_s");
        map.remove("mean_step_time_s");
        map.insert("determinism_checked".into(), args.check_determinism.into());
    }
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    write_file(&summary_path, &text)?;

    Ok(format!(
        "{}: {} links, {} steps, {:.3} vehicles injected, {:.3} absorbed, {:.3} on road -> {}",
        job.name,
        report.links,
        report.steps,
        report.vehicles_injected,
        report.vehicles_absorbed,
        report.vehicles_on_road,
        dir.display()
    ))
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    if args.seedless {
        return Err(Failure::Usage("--seedless is reserved: the model has no randomness to seed".into()));
    }
    if args.jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    let jobs = jobs(args)?;
    let dir_for = |job: &Job| {
        if jobs.len() == 1 {
            args.out.clone()
        } else {
            args.out.join(&job.name)
        }
    };

    let results: Mutex<Vec<Option<Result<String, Failure>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..args.jobs.min(jobs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let r = run_job(job, args, &dir_for(job));
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });

    // report in input order whatever order the jobs finished in
    let mut failures: Vec<Failure> = Vec::new();
    for r in results.into_inner().unwrap().into_iter().flatten() {
        match r {
            Ok(line) => println!("{line}"),
            Err(f) => failures.push(f),
        }
    }
    if failures.is_empty() {
        return Ok(());
    }
    let text = failures.iter().map(Failure::message).collect::<Vec<_>>().join("\n");
    // the most severe failure decides the exit code
    let code = failures.iter().map(Failure::code).min().unwrap();
    Err(match code {
        1 => Failure::Invalid(text),
        2 => Failure::Runtime(text),
        _ => Failure::Input(text),
    })
}

fn compare_cmd(args: &CompareArgs) -> Result<(), Failure> {
    let a = TraceSet::load(&args.a).map_err(input)?;
    let b = TraceSet::load(&args.b).map_err(input)?;
    let quantities = if args.quantities.is_empty() {
        Quantity::ALL.to_vec()
    } else {
        args.quantities.clone()
    };
    let report = compare(&a, &b, &quantities).map_err(input)?;
    let scenario = match (&args.scenario, &args.builtin) {
        (Some(_), Some(_)) => return Err(Failure::Usage("give --scenario or --builtin, not both".into())),
        (Some(p), None) => Some(load_scenario(p).map_err(input)?),
        (None, Some(n)) => Some(builtin(n)?),
        (None, None) => None,
    };
    let groups = scenario.as_ref().map(builders::link_groups);
    let text = if args.json {
        let mut t = serde_json::to_string_pretty(&report).expect("report serializes");
        t.push('\n');
        t
    } else {
        report.render(groups.as_ref())
    };
    print!("{text}");
    if let Some(path) = &args.out {
        write_file(path, &text)?;
    }
    Ok(())
}

fn scaffold(template: &str, out: &Path) -> Result<(), Failure> {
    let s = builtin(template)?;
    save_scenario(&s, out).map_err(input)?;
    println!(
        "wrote {} ({} road links, {} nodes)",
        out.display(),
        s.road_links().count(),
        s.nodes.len()
    );
    Ok(())
}

fn plot_cmd(trace: &Path, out: &Path, links: &[u32]) -> Result<(), Failure> {
    let t = TraceSet::load(trace).map_err(input)?;
    let ids: Vec<LinkId> = links.iter().map(|l| LinkId(*l)).collect();
    let written = plot::write_plots(&t, out, &ids).map_err(input)?;
    println!("wrote {} plots to {}", written.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LQM_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(64) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Validate { scenario } => validate(scenario),
        Command::Run(args) => run(args),
        Command::Compare(args) => compare_cmd(args),
        Command::Scaffold { template, out } => scaffold(template, out),
        Command::Plot { trace, out, links } => plot_cmd(trace, out, links),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
