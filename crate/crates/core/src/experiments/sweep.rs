use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::trial::{run_trial, Benchmark, PowerStatus, TrialResult};

/// Normal quantile for a two-sided 95% interval.
const Z_95: f64 = 1.959963984540054;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    PtDbm,
    RMin,
    NUsers,
    Height,
    Cables,
    Slots,
}

impl SweepVar {
    pub const ALL: [SweepVar; 6] = [
        SweepVar::PtDbm,
        SweepVar::RMin,
        SweepVar::NUsers,
        SweepVar::Height,
        SweepVar::Cables,
        SweepVar::Slots,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepVar::PtDbm => "pt_dbm",
            SweepVar::RMin => "r_min",
            SweepVar::NUsers => "n_users",
            SweepVar::Height => "height",
            SweepVar::Cables => "cables",
            SweepVar::Slots => "slots",
        }
    }

    fn is_count(self) -> bool {
        matches!(self, SweepVar::NUsers | SweepVar::Cables | SweepVar::Slots)
    }

    /// `cfg` with this variable set to `value`.
    pub fn apply(self, cfg: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut out = cfg.clone();
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::InvalidConfig(format!(
                    "{} takes positive integers, got {value}",
                    self.name()
                )))
            }
        };
        match self {
            SweepVar::PtDbm => out.scenario.phys.pt_dbm = value,
            SweepVar::RMin => out.r_min = value,
            SweepVar::NUsers => out.scenario.users = count()?,
            SweepVar::Height => out.scenario.height = value,
            SweepVar::Cables => out.scenario.cables = count()?,
            SweepVar::Slots => out.scenario.slots = count()?,
        }
        out.validate()?;
        Ok(out)
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepVar::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown sweep variable {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVar,
    pub values: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub benchmarks: Vec<Benchmark>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.values.is_empty() || self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "sweep values must be finite and nonempty".into(),
            ));
        }
        if self.values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "sweep values must be strictly increasing".into(),
            ));
        }
        if self.benchmarks.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one benchmark is required".into(),
            ));
        }
        if self.variable.is_count() && self.values.iter().any(|v| *v < 1.0 || v.fract() != 0.0) {
            return Err(Error::InvalidArgument(format!(
                "{} takes positive integers",
                self.variable
            )));
        }
        Ok(())
    }
}

/// Seed of trial `t`. Trial seeds do not depend on the sweep value, so
/// every point of a sweep sees the same sequence of draws.
pub fn trial_seed(base: u64, t: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(t as u64);
    rng.next_u64()
}

/// Aggregates for one (benchmark, value) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub benchmark: Benchmark,
    pub value: f64,
    pub trials: usize,
    pub mean_sum_rate: f64,
    /// 95% normal-approximation half-width; `None` for a single trial.
    pub ci_half_width: Option<f64>,
    pub user_trials: usize,
    pub outages: usize,
    /// Trials whose power allocation fell back to the equal split.
    pub fallbacks: usize,
}

impl SweepPoint {
    pub fn outage(&self) -> f64 {
        self.outages as f64 / self.user_trials as f64
    }

    /// Builds a point from per-trial sum rates, outage counts and fallback flags.
    pub fn from_trials(
        benchmark: Benchmark,
        value: f64,
        sums: &[f64],
        outages: usize,
        user_trials: usize,
        fallbacks: usize,
    ) -> Self {
        let n = sums.len();
        let mean = sums.iter().sum::<f64>() / n as f64;
        let ci = (n > 1).then(|| {
            let var = sums.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            Z_95 * (var / n as f64).sqrt()
        });
        Self {
            benchmark,
            value,
            trials: n,
            mean_sum_rate: mean,
            ci_half_width: ci,
            user_trials,
            outages,
            fallbacks,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub variable: SweepVar,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn point(&self, b: Benchmark, value: f64) -> Option<&SweepPoint> {
        self.points
            .iter()
            .find(|p| p.benchmark == b && p.value == value)
    }

    pub fn series(&self, b: Benchmark) -> Vec<&SweepPoint> {
        self.points.iter().filter(|p| p.benchmark == b).collect()
    }
}

/// Runs every trial of every sweep point. Trials run in parallel on the
/// global rayon pool; results are reduced in trial order, so output does
/// not depend on scheduling.
pub fn run_sweep(spec: &SweepSpec, cfg: &ExperimentConfig) -> Result<SweepResult> {
    spec.validate()?;
    let mut points = Vec::new();
    for &value in &spec.values {
        let point_cfg = spec.variable.apply(cfg, value)?;
        let results: Vec<TrialResult> = (0..spec.trials)
            .into_par_iter()
            .map(|t| run_trial(&point_cfg, trial_seed(spec.seed, t), &spec.benchmarks))
            .collect::<Result<_>>()?;
        for &b in &spec.benchmarks {
            let outcomes: Vec<_> = results
                .iter()
                .map(|r| r.get(b).expect("benchmark was run"))
                .collect();
            let sums: Vec<f64> = outcomes.iter().map(|o| o.report.sum_rate).collect();
            let outages = outcomes.iter().map(|o| o.report.outages()).sum();
            let user_trials = outcomes.iter().map(|o| o.report.rates.len()).sum();
            let fallbacks = outcomes
                .iter()
                .filter(|o| o.power != PowerStatus::Optimized)
                .count();
            points.push(SweepPoint::from_trials(
                b,
                value,
                &sums,
                outages,
                user_trials,
                fallbacks,
            ));
        }
    }
    Ok(SweepResult {
        variable: spec.variable,
        points,
    })
}

const HEADER: [&str; 8] = [
    "variable",
    "value",
    "benchmark",
    "metric",
    "estimate",
    "ci_half_width",
    "samples",
    "events",
];

/// Tidy CSV: one row per (value, benchmark, metric). Floats are written in
/// shortest round-trip form, so [`read_sweep_csv`] recovers every field
/// exactly.
pub fn write_sweep_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    let var = result.variable.name();
    for p in &result.points {
        let ci = p.ci_half_width.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            var,
            &p.value.to_string(),
            p.benchmark.name(),
            "sum_rate",
            &p.mean_sum_rate.to_string(),
            &ci,
            &p.trials.to_string(),
            &p.fallbacks.to_string(),
        ])?;
        w.write_record([
            var,
            &p.value.to_string(),
            p.benchmark.name(),
            "outage",
            &p.outage().to_string(),
            "",
            &p.user_trials.to_string(),
            &p.outages.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(input: R) -> Result<SweepResult> {
    let bad = |msg: String| Error::InvalidArgument(format!("malformed sweep CSV: {msg}"));
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(HEADER) {
        return Err(bad("unexpected header".into()));
    }
    let mut variable = None;
    let mut points: Vec<SweepPoint> = Vec::new();
    let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
    let int = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("{s:?}: {e}")));
    for row in r.records() {
        let row = row?;
        let var: SweepVar = row[0].parse()?;
        if *variable.get_or_insert(var) != var {
            return Err(bad("mixed sweep variables".into()));
        }
        let value = num(&row[1])?;
        let benchmark: Benchmark = row[2].parse()?;
        let (samples, events) = (int(&row[6])?, int(&row[7])?);
        match &row[3] {
            "sum_rate" => points.push(SweepPoint {
                benchmark,
                value,
                trials: samples,
                mean_sum_rate: num(&row[4])?,
                ci_half_width: if row[5].is_empty() {
                    None
                } else {
                    Some(num(&row[5])?)
                },
                user_trials: 0,
                outages: 0,
                fallbacks: events,
            }),
            "outage" => {
                let p = points
                    .iter_mut()
                    .rev()
                    .find(|p| p.benchmark == benchmark && p.value == value)
                    .ok_or_else(|| bad("outage row without a sum_rate row".into()))?;
                p.user_trials = samples;
                p.outages = events;
            }
            other => return Err(bad(format!("unknown metric {other:?}"))),
        }
    }
    let variable = variable.ok_or_else(|| bad("no rows".into()))?;
    Ok(SweepResult { variable, points })
}

/// Gnuplot script plotting mean sum rate per benchmark from `csv_path`.
pub fn write_gnuplot_script<W: Write>(
    result: &SweepResult,
    csv_path: &str,
    mut out: W,
) -> Result<()> {
    let mut benchmarks: Vec<Benchmark> = result.points.iter().map(|p| p.benchmark).collect();
    benchmarks.dedup();
    writeln!(out, "set datafile separator ','")?;
    writeln!(out, "set xlabel '{}'", result.variable)?;
    writeln!(out, "set ylabel 'sum rate (bits/s/Hz)'")?;
    writeln!(out, "set key left top")?;
    let series: Vec<String> = benchmarks
        .iter()
        .map(|b| {
            format!(
                "\"< awk -F, '$3==\\\"{b}\\\" && $4==\\\"sum_rate\\\"' {csv_path}\" using 2:5:6 with yerrorlines title '{b}'"
            )
        })
        .collect();
    writeln!(out, "plot {}", series.join(", \\\n     "))?;
    Ok(())
}
