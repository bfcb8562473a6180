//! `ehcap`: rate tables, parameter sweeps and buffer simulations for
//! energy-harvesting links.
//!
//! Exit codes: 0 on success, 1 on usage or validation errors, 2 when a
//! `--check` fails.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ehcap_core::config::{load_scenario, save_scenario};
use ehcap_core::model::Scenario;
use ehcap_core::rates::{applicable_cells, sleep_optimize, FormulaId, DEFAULT_P_GRID_STEP};
use ehcap_core::simulator::{
    analytic_rate, replicate, simulate_traced, PolicyKind, SimConfig, DEFAULT_DELTA,
};
use ehcap_core::sweep::{run_sweep, Preset, SweepParameter, SweepSpec};

use output::{write_csv, RateRow, ReplicationRow, SweepCsvRow, TraceRow, Units};

#[derive(Debug, Parser)]
#[command(
    name = "ehcap",
    version,
    about = "Capacities and achievable rates of energy-harvesting links"
)]
struct Cli {
    /// Worker threads for sweeps and replications (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Units for rates printed to the terminal; CSV files carry both.
    #[arg(long, global = true, value_enum, default_value = "nats")]
    units: Units,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Every applicable rate formula evaluated on one scenario.
    Rates {
        #[arg(long)]
        scenario: PathBuf,
        /// Also write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rates over a range of one scenario parameter, as CSV.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// One of beta1, beta2, mean_harvest_scale, alpha.
        #[arg(long)]
        parameter: String,
        /// Comma-separated parameter values.
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_hyphen_values = true
        )]
        values: Vec<f64>,
        /// Comma-separated formula ids; default is every applicable cell.
        #[arg(long, value_delimiter = ',')]
        cells: Vec<String>,
        /// CSV destination (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo simulation of a policy through the energy buffer.
    Simulate(SimulateArgs),
    /// Storage-efficiency sweep on the lossy-storage example.
    Example1(PresetArgs),
    /// Harvest-rate sweep on the processing/sleep example, fade
    /// probabilities {0.1, 0.8, 0.1}.
    Example2a(PresetArgs),
    /// Harvest-rate sweep on the processing/sleep example, fade
    /// probabilities {1/9, 7/9, 1/9}.
    Example2b(PresetArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// IDEAL_CSIT, IDEAL_NCSIT, HSU_LOSSY_CSIT, HSU_LOSSY_NCSIT, HUS_CSIT,
    /// HUS_NCSIT (or HUS), HU, PROCESSING, SLEEP(p), or SLEEP for the
    /// optimal sleep probability.
    #[arg(long)]
    policy: String,
    #[arg(long, default_value_t = 1_000_000)]
    steps: usize,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Slack between the harvest rate and the policy's mean spend.
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    /// Buffer content before the first step.
    #[arg(long, default_value_t = 0.0)]
    initial_energy: f64,
    /// Send Gaussian symbols clipped at the buffer level.
    #[arg(long)]
    signaling: bool,
    /// Exit with status 2 unless the analytic rate lies in the 95% CI.
    #[arg(long)]
    check: bool,
    /// Per-replication CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-step CSV of replication 0.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PresetArgs {
    /// CSV destination (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the preset's base scenario as a scenario file.
    #[arg(long)]
    emit_scenario: Option<PathBuf>,
}

/// Why a run stopped, mapped to the process exit code.
enum Outcome {
    Ok,
    CheckFailed,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("cannot size the worker pool")?;
    }
    match cli.command {
        Command::Rates { scenario, out } => cmd_rates(&scenario, out.as_deref(), cli.units),
        Command::Sweep {
            scenario,
            parameter,
            values,
            cells,
            out,
        } => {
            let base = load_scenario(&scenario)?;
            let spec = SweepSpec {
                parameter: parameter.parse::<SweepParameter>()?,
                values,
                cells: cells
                    .iter()
                    .map(|c| c.parse::<FormulaId>())
                    .collect::<Result<_, _>>()?,
            };
            cmd_sweep(&base, &spec, out.as_deref())
        }
        Command::Simulate(args) => cmd_simulate(&args, cli.units),
        Command::Example1(args) => cmd_preset(Preset::Example1, &args),
        Command::Example2a(args) => cmd_preset(Preset::Example2a, &args),
        Command::Example2b(args) => cmd_preset(Preset::Example2b, &args),
    }
}

fn cmd_rates(path: &Path, out: Option<&Path>, units: Units) -> Result<Outcome> {
    let s = load_scenario(path)?;
    let rows: Vec<RateRow> = applicable_cells(&s)
        .into_iter()
        .map(|cell| cell.evaluate(&s).map(|r| RateRow::from(&r)))
        .collect::<Result<_, _>>()?;
    let rate_col = format!("rate_{}", units.label());
    println!(
        "{:<12} {:>14} {:>11} {:>10} {:>11} {:>9}",
        "formula_id", rate_col, "lower_bound", "iterations", "quad_error", "p_sleep"
    );
    for r in &rows {
        let p = r
            .p_sleep
            .map_or_else(|| "-".to_string(), |p| format!("{p:.5}"));
        println!(
            "{:<12} {:>14.9} {:>11} {:>10} {:>11.2e} {:>9}",
            r.formula_id,
            units.convert(r.rate_nats),
            r.lower_bound_flag,
            r.iterations,
            r.quad_error,
            p
        );
    }
    if let Some(out) = out {
        write_csv(Some(out), &rows)?;
    }
    Ok(Outcome::Ok)
}

fn cmd_sweep(base: &Scenario, spec: &SweepSpec, out: Option<&Path>) -> Result<Outcome> {
    let rows = run_sweep(base, spec)?;
    write_csv(out, rows.iter().map(SweepCsvRow::from))?;
    Ok(Outcome::Ok)
}

fn cmd_preset(preset: Preset, args: &PresetArgs) -> Result<Outcome> {
    let base = preset.scenario();
    if let Some(path) = &args.emit_scenario {
        save_scenario(path, &base)?;
    }
    cmd_sweep(&base, &preset.sweep(), args.out.as_deref())
}

fn parse_policy(name: &str, s: &Scenario) -> Result<PolicyKind> {
    if name.trim().eq_ignore_ascii_case("SLEEP") {
        let report = sleep_optimize(s, DEFAULT_P_GRID_STEP)?;
        let p = report.sleep.map_or(0.0, |sol| sol.p_sleep);
        return Ok(PolicyKind::Sleep(p));
    }
    Ok(name.parse()?)
}

fn cmd_simulate(args: &SimulateArgs, units: Units) -> Result<Outcome> {
    if args.steps == 0 {
        bail!("--steps must be positive");
    }
    let s = load_scenario(&args.scenario)?;
    let policy = parse_policy(&args.policy, &s)?;
    let cfg = SimConfig::new(policy)
        .with_delta(args.delta)
        .with_initial_energy(args.initial_energy);
    let target = analytic_rate(&s, &cfg)?;
    let rep = replicate(&s, &cfg, args.steps, args.reps, args.seed, args.signaling)?;

    if let Some(path) = &args.out {
        let rows = rep
            .runs
            .iter()
            .enumerate()
            .map(|(i, t)| ReplicationRow::new(i, t));
        write_csv(Some(path), rows)?;
    }
    if let Some(path) = &args.trace {
        let mut rows = Vec::with_capacity(args.steps);
        simulate_traced(&s, &cfg, args.steps, args.seed, args.signaling, &mut |r| {
            rows.push(TraceRow::from(r))
        })?;
        write_csv(Some(path), rows)?;
    }

    let u = |x: f64| units.convert(x);
    let inside = rep.contains(target);
    println!("policy               {policy}");
    println!("steps x reps         {} x {}", args.steps, rep.n_reps);
    println!("seed                 {}", args.seed);
    println!("delta                {}", cfg.delta);
    println!("analytic rate        {:.9} {}", u(target), units.label());
    println!(
        "empirical mean       {:.9} {}",
        u(rep.mean_rate_nats),
        units.label()
    );
    println!(
        "95% CI               [{:.9}, {:.9}]",
        u(rep.ci_low),
        u(rep.ci_high)
    );
    println!("truncation fraction  {:.6}", rep.mean_truncation_fraction);
    if args.signaling {
        println!("clip fraction        {:.6}", rep.mean_clip_fraction);
    }
    println!("buffer slope         {:.6e}", rep.mean_buffer_slope);
    println!("analytic in CI       {}", if inside { "yes" } else { "no" });
    if args.check && !inside {
        return Ok(Outcome::CheckFailed);
    }
    Ok(Outcome::Ok)
}
