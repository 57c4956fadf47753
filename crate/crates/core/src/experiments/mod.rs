//! Monte Carlo drivers: single trials, parameter sweeps, the rate-versus-
//! position profile and the analytic condition checks.

mod config;
mod fig3;
mod props;
mod sweep;
mod trial;

pub use config::{ExperimentConfig, DEFAULT_R_MIN};
pub use fig3::{fig3_experiment, Fig3Result, Fig3Row, Fig3Spec};
pub use props::{prop1_report, prop2_report, prop_check, Prop1Report, Prop2Report, PropCheck};
pub use sweep::{
    read_sweep_csv, run_sweep, trial_seed, write_gnuplot_script, write_sweep_csv, SweepPoint,
    SweepResult, SweepSpec, SweepVar,
};
pub use trial::{
    fixed_antenna_benchmark, optimize, run_trial, Benchmark, PowerStatus, TrialOutcome, TrialResult,
};
