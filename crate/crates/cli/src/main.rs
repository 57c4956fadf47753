use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lcx_core::experiments::{
    fig3_experiment, prop_check, run_sweep, run_trial, write_gnuplot_script, write_sweep_csv,
    Benchmark, ExperimentConfig, Fig3Spec, PowerStatus, SweepSpec, SweepVar,
};
use lcx_core::Error;

/// Environment variable holding the worker thread count.
const THREADS_VAR: &str = "LCX_THREADS";

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "lcx",
    version,
    about = "LCX pinching-antenna downlink simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides rng.seed from the configuration
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one scenario draw under each benchmark
    Trial {
        #[command(flatten)]
        common: Common,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "lcx_optimized,lcx_initial,fixed_antenna"
        )]
        benchmarks: Vec<String>,
    },
    /// Monte Carlo sweep over one parameter
    Sweep {
        #[command(flatten)]
        common: Common,
        /// pt_dbm, r_min, n_users, height, cables or slots
        #[arg(long)]
        var: String,
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_negative_numbers = true
        )]
        values: Vec<f64>,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "lcx_optimized,lcx_initial,fixed_antenna"
        )]
        benchmarks: Vec<String>,
        /// Also write a gnuplot script plotting the CSV
        #[arg(long, requires = "out")]
        gnuplot: Option<PathBuf>,
    },
    /// Single-user rate versus position along one cable
    Fig3 {
        #[command(flatten)]
        common: Common,
        /// Scatterer draws per position
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Evaluate the analytic comparison conditions on the configured geometry
    PropCheck {
        #[command(flatten)]
        common: Common,
        /// Monte Carlo user drops
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
    },
}

fn load(common: &Common) -> lcx_core::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn output(path: Option<&Path>) -> lcx_core::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn benchmarks(names: &[String]) -> lcx_core::Result<Vec<Benchmark>> {
    let mut out: Vec<Benchmark> = names
        .iter()
        .map(|s| s.trim().parse())
        .collect::<lcx_core::Result<_>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

fn configure_threads() -> lcx_core::Result<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw.parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "{THREADS_VAR} must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {n} worker threads: {e}")))
}

/// Runs the command; `Ok(true)` means no optimized run produced a feasible
/// power allocation.
fn run(cli: Cli) -> lcx_core::Result<bool> {
    configure_threads()?;
    match cli.command {
        Command::Trial {
            common,
            benchmarks: names,
        } => {
            let cfg = load(&common)?;
            let result = run_trial(&cfg, cfg.seed, &benchmarks(&names)?)?;
            let mut w = csv::Writer::from_writer(output(common.out.as_deref())?);
            w.write_record(["benchmark", "user", "rate", "qos_ok", "power"])?;
            for o in &result.outcomes {
                let power = match o.power {
                    PowerStatus::Optimized => "ok",
                    PowerStatus::InfeasibleQos => "infeasible_qos",
                    PowerStatus::SolverStall => "solver_stall",
                };
                for (n, (r, ok)) in o.report.rates.iter().zip(&o.report.qos_ok).enumerate() {
                    w.write_record([
                        o.benchmark.name(),
                        &n.to_string(),
                        &r.to_string(),
                        &ok.to_string(),
                        power,
                    ])?;
                }
            }
            w.flush()?;
            Ok(result
                .get(Benchmark::LcxOptimized)
                .is_some_and(|o| o.power == PowerStatus::InfeasibleQos))
        }
        Command::Sweep {
            common,
            var,
            values,
            trials,
            benchmarks: names,
            gnuplot,
        } => {
            let cfg = load(&common)?;
            let spec = SweepSpec {
                variable: var.parse::<SweepVar>()?,
                values,
                trials,
                seed: cfg.seed,
                benchmarks: benchmarks(&names)?,
            };
            let result = run_sweep(&spec, &cfg)?;
            write_sweep_csv(&result, output(common.out.as_deref())?)?;
            if let (Some(script), Some(csv_path)) = (gnuplot, &common.out) {
                write_gnuplot_script(&result, &csv_path.to_string_lossy(), File::create(script)?)?;
            }
            let optimized = result.series(Benchmark::LcxOptimized);
            Ok(!optimized.is_empty() && optimized.iter().all(|p| p.fallbacks == p.trials))
        }
        Command::Fig3 { common, trials } => {
            let cfg = load(&common)?;
            let mut spec = Fig3Spec::standard(cfg.seed);
            if common.config.is_some() {
                spec.scenario = cfg.scenario.clone();
                spec.scenario.cables = 1;
                spec.offsets.retain(|o| *o <= spec.scenario.dy / 2.0);
            }
            spec.draws = trials;
            let result = fig3_experiment(&spec)?;
            result.write_csv(output(common.out.as_deref())?)?;
            log::info!(
                "mean |full - los_only| is {:.3}% of the LoS-only rate",
                100.0 * result.relative_los_gap()
            );
            Ok(false)
        }
        Command::PropCheck { common, trials } => {
            let cfg = load(&common)?;
            let report = prop_check(&cfg.scenario, trials, 1000, cfg.seed)?;
            eprintln!("{report}");
            let mut w = csv::Writer::from_writer(output(common.out.as_deref())?);
            w.write_record(["quantity", "value"])?;
            let p1 = &report.prop1;
            let p2 = &report.prop2;
            let rows = [
                ("a", p1.geometry.a.to_string()),
                ("b2", p1.geometry.b2.to_string()),
                ("condition_holds", p1.verdict.holds.to_string()),
                ("condition_margin_ln", p1.verdict.margin_ln().to_string()),
                ("gap_bound", p1.bound.value.to_string()),
                ("gap_bound_snr_db", p1.bound.snr_db.to_string()),
                ("mc_gap", p1.mc_gap.to_string()),
                ("mc_drops", p1.drops.to_string()),
                ("slot_condition_samples", p2.samples.to_string()),
                (
                    "slot_condition_high_snr_agree",
                    p2.high_snr_agree.to_string(),
                ),
                (
                    "slot_condition_finite_snr_agree",
                    p2.finite_snr_agree.to_string(),
                ),
            ];
            for (k, v) in rows {
                w.write_record([k, v.as_str()])?;
            }
            w.flush()?;
            Ok(false)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("lcx: every optimized run was QoS-infeasible");
            ExitCode::from(EXIT_INFEASIBLE)
        }
        Err(e) => {
            eprintln!("lcx: {e}");
            match e {
                Error::InvalidConfig(_) | Error::Toml(_) | Error::InvalidArgument(_) => {
                    ExitCode::from(EXIT_CONFIG)
                }
                _ => ExitCode::FAILURE,
            }
        }
    }
}
