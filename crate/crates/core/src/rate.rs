//! Achievable rates with every other stream treated as interference.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::channel::{effective_channel, ChannelSet};
use crate::error::{Error, Result};
use crate::scenario::PhysConstants;

/// Slack applied when checking `R_n >= R_min`.
pub const QOS_TOLERANCE: f64 = 1e-9;

/// User-to-cable assignment `α[k][n]` and slot activation `β[k][m]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentState {
    pub alpha: Vec<Vec<bool>>,
    pub beta: Vec<Vec<bool>>,
}

impl AssignmentState {
    /// Builds `α` from a user→cable map.
    pub fn from_cables(cable_of: &[usize], beta: Vec<Vec<bool>>) -> Result<Self> {
        let cables = beta.len();
        let mut alpha = vec![vec![false; cable_of.len()]; cables];
        for (n, &k) in cable_of.iter().enumerate() {
            if k >= cables {
                return Err(Error::InvalidArgument(format!(
                    "user {n} assigned to missing cable {k}"
                )));
            }
            alpha[k][n] = true;
        }
        let state = Self { alpha, beta };
        state.validate()?;
        Ok(state)
    }

    pub fn num_cables(&self) -> usize {
        self.alpha.len()
    }

    pub fn num_users(&self) -> usize {
        self.alpha.first().map_or(0, Vec::len)
    }

    /// Serving cable of user `n`.
    pub fn cable_of(&self, n: usize) -> Option<usize> {
        self.alpha.iter().position(|row| row[n])
    }

    pub fn users_on(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        self.alpha[k]
            .iter()
            .enumerate()
            .filter(|(_, a)| **a)
            .map(|(n, _)| n)
    }

    pub fn is_serving(&self, k: usize) -> bool {
        self.alpha[k].iter().any(|a| *a)
    }

    /// Checks that every user has exactly one cable and every serving cable
    /// has at least one active slot.
    pub fn validate(&self) -> Result<()> {
        if self.beta.len() != self.alpha.len() {
            return Err(Error::Constraint(
                "alpha and beta disagree on the cable count".into(),
            ));
        }
        let users = self.num_users();
        if self.alpha.iter().any(|row| row.len() != users) {
            return Err(Error::Constraint("ragged alpha".into()));
        }
        for n in 0..users {
            let count = self.alpha.iter().filter(|row| row[n]).count();
            if count != 1 {
                return Err(Error::Constraint(format!(
                    "user {n} is assigned to {count} cables"
                )));
            }
        }
        for k in 0..self.num_cables() {
            if self.is_serving(k) && !self.beta[k].iter().any(|b| *b) {
                return Err(Error::Constraint(format!(
                    "cable {k} serves users but has no active slot"
                )));
            }
        }
        Ok(())
    }
}

/// Power-split coefficients `p[k][n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub p: Vec<Vec<f64>>,
}

impl PowerAllocation {
    /// Equal split of each cable's power among its assigned users.
    pub fn equal_split(state: &AssignmentState) -> Self {
        let p = state
            .alpha
            .iter()
            .map(|row| {
                let count = row.iter().filter(|a| **a).count();
                row.iter()
                    .map(|&a| if a { 1.0 / count as f64 } else { 0.0 })
                    .collect()
            })
            .collect();
        Self { p }
    }

    /// Checks `0 <= p <= α` and `Σ_n p <= 1` with absolute slack `tol`.
    pub fn validate(&self, state: &AssignmentState, tol: f64) -> Result<()> {
        for (k, row) in self.p.iter().enumerate() {
            let mut total = 0.0;
            for (n, &v) in row.iter().enumerate() {
                let cap = if state.alpha[k][n] { 1.0 } else { 0.0 };
                if !(v >= -tol && v <= cap + tol) {
                    return Err(Error::Constraint(format!(
                        "p[{k}][{n}] = {v} outside [0, {cap}]"
                    )));
                }
                total += v;
            }
            if total > 1.0 + tol {
                return Err(Error::Constraint(format!(
                    "cable {k} power fractions sum to {total}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub rates: Vec<f64>,
    pub sum_rate: f64,
    pub qos_ok: Vec<bool>,
    pub n_c: usize,
    pub n_k: Vec<usize>,
}

impl RateReport {
    pub fn from_rates(rates: Vec<f64>, r_min: f64, n_c: usize, n_k: Vec<usize>) -> Self {
        let sum_rate = rates.iter().sum();
        let qos_ok = rates.iter().map(|&r| meets_qos(r, r_min)).collect();
        Self {
            rates,
            sum_rate,
            qos_ok,
            n_c,
            n_k,
        }
    }

    pub fn outages(&self) -> usize {
        self.qos_ok.iter().filter(|ok| !**ok).count()
    }

    /// Writes `trial,n,rate,qos_ok` rows (no header).
    pub fn write_csv_rows<W: Write>(&self, trial: usize, w: &mut csv::Writer<W>) -> Result<()> {
        for (n, (r, ok)) in self.rates.iter().zip(&self.qos_ok).enumerate() {
            w.write_record(&[
                trial.to_string(),
                n.to_string(),
                r.to_string(),
                ok.to_string(),
            ])?;
        }
        Ok(())
    }
}

pub fn meets_qos(rate: f64, r_min: f64) -> bool {
    rate >= r_min - QOS_TOLERANCE
}

/// Number of serving cables `N_c` and per-cable divisor
/// `N_k = max(1, Σ_m β_{k,m})`.
pub fn active_counts(state: &AssignmentState) -> (usize, Vec<usize>) {
    let n_c = (0..state.num_cables())
        .filter(|&k| state.is_serving(k))
        .count();
    let n_k = state
        .beta
        .iter()
        .map(|row| row.iter().filter(|b| **b).count().max(1))
        .collect();
    (n_c, n_k)
}

/// `|h_{k,n}|²` of the activation-weighted channel, indexed `[k][n]`.
pub fn effective_gains(cs: &ChannelSet, state: &AssignmentState) -> Vec<Vec<f64>> {
    (0..state.num_cables())
        .map(|k| {
            (0..cs.num_users())
                .map(|n| effective_channel(cs, &state.beta[k], k, n).norm_sqr())
                .collect()
        })
        .collect()
}

fn rate_from_gains(
    gains: &[Vec<f64>],
    state: &AssignmentState,
    p: &PowerAllocation,
    n_c: usize,
    n_k: &[usize],
    n: usize,
    consts: &PhysConstants,
) -> f64 {
    if n_c == 0 {
        return 0.0;
    }
    let scale = consts.p_t / n_c as f64;
    let mut signal = 0.0;
    let mut interference = 0.0;
    for k in 0..state.num_cables() {
        let g = gains[k][n] / n_k[k] as f64;
        for i in 0..state.num_users() {
            if !state.alpha[k][i] {
                continue;
            }
            if i == n {
                signal += g * p.p[k][i];
            } else {
                interference += g * p.p[k][i];
            }
        }
    }
    (1.0 + scale * signal / (scale * interference + consts.sigma2)).log2()
}

/// Rate of user `n`, bits/s/Hz.
pub fn user_rate(
    cs: &ChannelSet,
    state: &AssignmentState,
    p: &PowerAllocation,
    n: usize,
    consts: &PhysConstants,
) -> f64 {
    let (n_c, n_k) = active_counts(state);
    let gains = effective_gains(cs, state);
    rate_from_gains(&gains, state, p, n_c, &n_k, n, consts)
}

pub fn user_rates(
    cs: &ChannelSet,
    state: &AssignmentState,
    p: &PowerAllocation,
    consts: &PhysConstants,
) -> Vec<f64> {
    let (n_c, n_k) = active_counts(state);
    let gains = effective_gains(cs, state);
    (0..state.num_users())
        .map(|n| rate_from_gains(&gains, state, p, n_c, &n_k, n, consts))
        .collect()
}

pub fn sum_rate(
    cs: &ChannelSet,
    state: &AssignmentState,
    p: &PowerAllocation,
    consts: &PhysConstants,
) -> f64 {
    user_rates(cs, state, p, consts).iter().sum()
}

/// Full report for one configuration.
pub fn evaluate(
    cs: &ChannelSet,
    state: &AssignmentState,
    p: &PowerAllocation,
    consts: &PhysConstants,
    r_min: f64,
) -> RateReport {
    let (n_c, n_k) = active_counts(state);
    RateReport::from_rates(user_rates(cs, state, p, consts), r_min, n_c, n_k)
}
