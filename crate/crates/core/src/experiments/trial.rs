use std::fmt;
use std::str::FromStr;

use crate::channel::{compose_channels, ChannelFlags, ChannelSet};
use crate::error::{Error, Result};
use crate::game::{CoalitionGame, GameLimits};
use crate::geometry::Point3;
use crate::power::{build_dc_model, run_sca, ScaOptions};
use crate::rate::{evaluate, AssignmentState, PowerAllocation, RateReport};
use crate::scenario::Scenario;

use super::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Benchmark {
    LcxOptimized,
    LcxInitial,
    FixedAntenna,
}

impl Benchmark {
    pub const ALL: [Benchmark; 3] = [
        Benchmark::LcxOptimized,
        Benchmark::LcxInitial,
        Benchmark::FixedAntenna,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::LcxOptimized => "lcx_optimized",
            Benchmark::LcxInitial => "lcx_initial",
            Benchmark::FixedAntenna => "fixed_antenna",
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Benchmark::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown benchmark {s:?}")))
    }
}

/// How the optimized benchmark's power allocation was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerStatus {
    /// SCA ran to completion (or to its iteration cap).
    Optimized,
    /// No power split meets every QoS target under the game's assignment;
    /// rates fall back to the equal split.
    InfeasibleQos,
    /// The interior-point solver stalled; rates fall back to the equal split.
    SolverStall,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub benchmark: Benchmark,
    pub report: RateReport,
    pub power: PowerStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub seed: u64,
    pub outcomes: Vec<TrialOutcome>,
}

impl TrialResult {
    pub fn get(&self, b: Benchmark) -> Option<&TrialOutcome> {
        self.outcomes.iter().find(|o| o.benchmark == b)
    }
}

/// Fixed-antenna reference: one antenna at `(0, 0, d)` radiating every
/// user's signal with power `P_t / N`. As on the cables, each user treats
/// the other users' signals as interference; with one user this is the
/// plain free-space rate.
pub fn fixed_antenna_benchmark(sc: &Scenario, r_min: f64) -> RateReport {
    let bs = Point3::new(0.0, 0.0, sc.height);
    let c = &sc.constants;
    let n = sc.num_users() as f64;
    let p_n = c.p_t / n;
    let rates = sc
        .users
        .iter()
        .map(|u| {
            let g = c.eta().powi(2) / bs.distance(u).powi(2);
            (1.0 + p_n * g / ((n - 1.0) * p_n * g + c.sigma2)).log2()
        })
        .collect();
    RateReport::from_rates(rates, r_min, 0, Vec::new())
}

/// Coalition game followed by SCA power allocation on one realization.
pub fn optimize(
    sc: &Scenario,
    cs: &ChannelSet,
    r_min: f64,
) -> (AssignmentState, PowerAllocation, PowerStatus) {
    let (structure, trace) = CoalitionGame::new(sc, cs).run(GameLimits::default());
    if !trace.converged {
        log::warn!("coalition game hit its pass limit without converging");
    }
    let state = structure.to_assignment(sc.num_slots(), sc.num_users());
    let equal = PowerAllocation::equal_split(&state);
    let result = build_dc_model(cs, &state, &sc.constants, r_min)
        .and_then(|model| run_sca(&model, &equal, ScaOptions::default()));
    match result {
        Ok(run) => (state, run.iterate.p, PowerStatus::Optimized),
        Err(Error::InfeasibleQos) => (state, equal, PowerStatus::InfeasibleQos),
        Err(e) => {
            log::warn!("power allocation failed, keeping equal split: {e}");
            (state, equal, PowerStatus::SolverStall)
        }
    }
}

/// One scenario draw evaluated under each requested benchmark. All
/// benchmarks share the same users, scatterers and channel realization.
pub fn run_trial(
    cfg: &ExperimentConfig,
    seed: u64,
    benchmarks: &[Benchmark],
) -> Result<TrialResult> {
    let sc = Scenario::build(&cfg.scenario, seed)?;
    let cs = compose_channels(&sc, ChannelFlags::FULL);
    let outcomes = benchmarks
        .iter()
        .map(|&benchmark| {
            let (report, power) = match benchmark {
                Benchmark::LcxInitial => {
                    let s = CoalitionGame::new(&sc, &cs).init_structure();
                    let state = s.to_assignment(sc.num_slots(), sc.num_users());
                    let p = PowerAllocation::equal_split(&state);
                    (
                        evaluate(&cs, &state, &p, &sc.constants, cfg.r_min),
                        PowerStatus::Optimized,
                    )
                }
                Benchmark::LcxOptimized => {
                    let (state, p, status) = optimize(&sc, &cs, cfg.r_min);
                    (evaluate(&cs, &state, &p, &sc.constants, cfg.r_min), status)
                }
                Benchmark::FixedAntenna => (
                    fixed_antenna_benchmark(&sc, cfg.r_min),
                    PowerStatus::Optimized,
                ),
            };
            TrialOutcome {
                benchmark,
                report,
                power,
            }
        })
        .collect();
    Ok(TrialResult { seed, outcomes })
}
