use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use streamnav::io::{self as sio, SEED_ENV};
use streamnav::navigator::Pacing;
use streamnav::safety::{self, Check, SafetyReport};
use streamnav::sim::{self, Activation, Scenario};
use streamnav::{Error, FlowField, SafetyMargins};

/// Streamline navigation for formations that lose agents mid-flight.
#[derive(Parser)]
#[command(name = "streamnav", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write the step log and summary.
    Simulate(SimulateArgs),
    /// Print the pre-flight safety checks of a scenario.
    Check(CheckArgs),
    /// Export (x, y, phi, psi) on a grid as CSV.
    Field(FieldArgs),
    /// Time navigator ticks on a synthetic formation.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario TOML file.
    config: PathBuf,
    /// Run as fast as possible (default).
    #[arg(long, conflicts_with = "realtime")]
    fast: bool,
    /// Sleep out the remainder of every control period.
    #[arg(long)]
    realtime: bool,
    /// Output directory.
    #[arg(long, default_value = "streamnav-out")]
    out: PathBuf,
    /// Override the scenario seed (takes precedence over the environment).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CheckArgs {
    /// Scenario TOML file.
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FieldArgs {
    /// Obstacles as "x,y,a_p;x,y,a_p"; empty for the uniform flow.
    #[arg(long, allow_hyphen_values = true, default_value = "")]
    obstacles: String,
    /// Sampling box as "x_min,x_max,y_min,y_max".
    #[arg(long, allow_hyphen_values = true)]
    bbox: String,
    /// Grid spacing, meters.
    #[arg(long, default_value_t = 0.05)]
    step: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Tracking error bound, meters.
    #[arg(long, default_value_t = 0.40)]
    delta: f64,
    /// Vehicle radius, meters.
    #[arg(long, default_value_t = 0.28)]
    epsilon: f64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 6)]
    agents: usize,
    /// Retune passes; a comma-separated list runs a sweep.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    k: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Outcome of a subcommand that ran to completion.
enum Outcome {
    Ok,
    Warnings,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Check(a) => check(a),
        Command::Field(a) => field(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Warnings) => ExitCode::from(2),
        Err(e) => {
            eprintln!("{}", describe(&e));
            ExitCode::from(1)
        }
    }
}

fn describe(e: &Error) -> String {
    match e {
        Error::Parse(m) => format!("error: could not parse input: {m}"),
        Error::ConfigInvalid(_) => format!("error: scenario rejected: {e}"),
        Error::Io(m) => format!("error: {m}"),
        e => format!("error: scenario failed: {e}"),
    }
}

fn load(path: &Path, seed: Option<u64>) -> Result<Scenario, Error> {
    let mut s = sio::load_scenario(path)?;
    let env = std::env::var(SEED_ENV).ok();
    s.seed = sio::resolve_seed(seed, env.as_deref(), s.seed)?;
    Ok(s)
}

fn simulate(a: SimulateArgs) -> Result<Outcome, Error> {
    let s = load(&a.config, a.seed)?;
    let pacing = if a.realtime { Pacing::RealTime } else { Pacing::Fast };
    let log = sim::run_scenario(&s, pacing)?;
    let paths = sio::write_outputs(&a.out, &log, &s.margins)?;
    let sep = safety::monitor_separations(&log, &s.margins);
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4} m"));

    println!("scenario:           {} (seed {})", s.name, s.seed);
    println!("steps:              {}", log.len());
    println!("activations:        {}", log.activations.len());
    println!("min separation:     {} (floor {:.4} m)", fmt(sep.min_d_commanded()), sep.floor);
    println!("min a_f clearance:  {} actual", fmt(sep.min_clearance_actual()));
    println!("peak cmd speed:     {:.4} m/s", log.peak_commanded_speed());
    let stats = sio::RuntimeStats::from_ns(&log.navigation_runtimes());
    println!(
        "step runtime:       p50 {:.3} ms, p99 {:.3} ms, {} deadline misses",
        stats.p50_ns as f64 * 1e-6,
        stats.p99_ns as f64 * 1e-6,
        log.deadline_misses()
    );
    println!("step log:           {}", paths.steps.display());
    println!("summary:            {}", paths.summary.display());

    let warnings = activation_warnings(&log.activations);
    if !sep.floor_respected() {
        println!("warning: commanded separation fell below {:.4} m", sep.floor);
        return Ok(Outcome::Warnings);
    }
    Ok(if warnings { Outcome::Warnings } else { Outcome::Ok })
}

fn activation_warnings(acts: &[Activation]) -> bool {
    let mut any = false;
    for act in acts {
        for w in act.report.warnings() {
            println!("warning: t = {:.3} s: {w}", act.time);
            any = true;
        }
    }
    any
}

fn check(a: CheckArgs) -> Result<Outcome, Error> {
    let s = load(&a.config, a.seed)?;
    let acts = sim::preflight(&s)?;
    if acts.is_empty() {
        println!("no failures scripted");
        println!("theorem 1: not applicable (no obstacles)");
        println!("theorem 2: not applicable (no obstacles)");
        return Ok(Outcome::Ok);
    }
    let mut warned = false;
    for act in &acts {
        let failed: Vec<String> = act.failed.iter().map(ToString::to_string).collect();
        println!("activation at t = {:.3} s (failed: {})", act.time, failed.join(", "));
        print_report(&act.report);
        warned |= !act.report.passed();
    }
    Ok(if warned { Outcome::Warnings } else { Outcome::Ok })
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn print_report(r: &SafetyReport) {
    println!("  healthy agents: {}, obstacles: {}", r.healthy_agents, r.obstacles);
    match r.d_min0 {
        Some(d) => println!("  d_min0:         {d:.4} m"),
        None => println!("  d_min0:         n/a (fewer than two agents)"),
    }
    match &r.theorem1 {
        Check::Evaluated(t) => {
            println!(
                "  theorem 1: {}  p_min0 = {:.4}, lambda_max = {:.4}, required p_min0 = {:.4}, margin {:.4} m",
                pass(t.satisfied),
                t.p_min0,
                t.lambda_max,
                t.required_p_min,
                t.margin
            );
            let d = t.lambda_domain;
            println!(
                "    lambda_max over [{:.2}, {:.2}] x [{:.2}, {:.2}] minus exclusion disks, step {} m{}",
                d.x_min,
                d.x_max,
                d.y_min,
                d.y_max,
                t.lambda_grid_step,
                t.lambda_refinement
                    .map_or(String::new(), |c| format!(", refinement change {:.3}%", 100.0 * c))
            );
        }
        Check::NotApplicable { reason } => println!("  theorem 1: not applicable ({reason})"),
    }
    match &r.theorem2 {
        Check::Evaluated(t) => println!(
            "  theorem 2: {}  d_min0 = {:.4} m, required = {:.4} m, margin {:.2} m",
            pass(t.satisfied),
            t.d_min0,
            t.required_d_min,
            t.margin
        ),
        Check::NotApplicable { reason } => println!("  theorem 2: not applicable ({reason})"),
    }
    for n in r.notes() {
        println!("  note: {n} (theorem 2 governs a single obstacle)");
    }
    for w in r.warnings() {
        println!("  warning: {w}");
    }
}

fn field(a: FieldArgs) -> Result<Outcome, Error> {
    let margins = SafetyMargins::new(a.delta, a.epsilon)?;
    let field = FlowField::new(sio::parse_obstacles(&a.obstacles, &margins)?)?;
    let domain = sio::parse_bbox(&a.bbox)?;
    if !(a.step > 0.0 && a.step.is_finite()) {
        return Err(Error::InvalidDomain(format!("step must be > 0, got {}", a.step)));
    }
    let rows = match &a.out {
        Some(p) => {
            let f = File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            sio::write_field_grid(BufWriter::new(f), &field, &domain, a.step)?
        }
        None => sio::write_field_grid(io::stdout().lock(), &field, &domain, a.step)?,
    };
    if let Some(p) = &a.out {
        println!("wrote {rows} grid points to {}", p.display());
    }
    Ok(Outcome::Ok)
}

fn bench(a: BenchArgs) -> Result<Outcome, Error> {
    let mut out = io::stdout().lock();
    writeln!(out, "agents  K  steps   p50 ms   p99 ms  mean ms  misses")?;
    let mut warned = false;
    for &k in &a.k {
        let r = sio::run_bench(a.agents, k, a.steps, a.seed)?;
        writeln!(
            out,
            "{:>6} {:>2} {:>6} {:>8.3} {:>8.3} {:>8.3} {:>7}",
            r.agents,
            r.k,
            r.steps,
            r.stats.p50_ns as f64 * 1e-6,
            r.stats.p99_ns as f64 * 1e-6,
            r.stats.mean_ns * 1e-6,
            r.deadline_misses
        )?;
        warned |= r.stats.p99_ns > r.deadline_ns;
    }
    if warned {
        writeln!(out, "warning: p99 step runtime exceeds the control period")?;
    }
    Ok(if warned { Outcome::Warnings } else { Outcome::Ok })
}
