use std::f64::consts::LN_2;
use std::io::Write;

use nalgebra::{DMatrix, DVector};

use super::dc::DcModel;
use super::ipm::{maximize, nnls, BarrierOptions};
use crate::error::{Error, Result};
use crate::rate::PowerAllocation;

/// Phase-I margins below this (in normalized units) count as infeasible.
const FEASIBILITY_MARGIN: f64 = 1e-9;

/// Tangent minorant of `-log2 ν` at `ν_t`, applied to the rate's
/// interference term.
#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    pub nu_t: Vec<f64>,
}

pub fn linearize(nu_t: &[f64]) -> Result<Surrogate> {
    if nu_t.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidArgument(
            "expansion points must be positive".into(),
        ));
    }
    Ok(Surrogate {
        nu_t: nu_t.to_vec(),
    })
}

impl Surrogate {
    /// `Σ [ln μ_n − ν_n / ν_n^(t)]`, the subproblem objective with constants dropped.
    pub fn objective(&self, mu: &[f64], nu: &[f64]) -> f64 {
        mu.iter()
            .zip(nu)
            .zip(&self.nu_t)
            .map(|((m, v), t)| m.ln() - v / t)
            .sum()
    }

    /// Lower bound on `Σ log2(μ_n / ν_n)`, tight at `ν = ν_t`.
    pub fn rate(&self, mu: &[f64], nu: &[f64]) -> f64 {
        mu.iter()
            .zip(nu)
            .zip(&self.nu_t)
            .map(|((m, v), t)| m.log2() - t.log2() - (v - t) / (LN_2 * t))
            .sum()
    }

    /// `∂ rate / ∂ ν_n = −1 / (ln 2 · ν_n^(t))`.
    pub fn nu_gradient(&self) -> Vec<f64> {
        self.nu_t.iter().map(|t| -1.0 / (LN_2 * t)).collect()
    }
}

/// Multipliers of the noise-normalized subproblem, one entry per
/// constraint: received-power cap, interference floor, QoS ratio,
/// nonnegativity of each user's coefficient and each cable's budget
/// (zero for cables without users).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Multipliers {
    pub received: Vec<f64>,
    pub interference: Vec<f64>,
    pub qos: Vec<f64>,
    pub nonneg: Vec<f64>,
    pub budget: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaIterate {
    pub p: PowerAllocation,
    /// Slack values in mW.
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    /// `Σ log2(μ_n / ν_n)`, bits/s/Hz.
    pub objective: f64,
    pub kkt_residual: f64,
    pub multipliers: Multipliers,
    pub newton_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaOptions {
    pub kkt_tol: f64,
    pub eps: f64,
    pub t_max: usize,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self {
            kkt_tol: 1e-8,
            eps: 1e-4,
            t_max: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaStep {
    pub t: usize,
    pub objective: f64,
    /// `None` for the initial point, which is not a subproblem solution.
    pub kkt_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScaTrace {
    pub steps: Vec<ScaStep>,
    pub converged: bool,
}

impl ScaTrace {
    pub fn objectives(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.objective).collect()
    }

    /// Writes `t,objective,kkt_residual` with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "objective", "kkt_residual"])?;
        for s in &self.steps {
            let kkt = s.kkt_residual.map(|v| v.to_string()).unwrap_or_default();
            w.write_record(&[s.t.to_string(), s.objective.to_string(), kkt])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaRun {
    pub iterate: ScaIterate,
    pub trace: ScaTrace,
}

fn users_by_cable(model: &DcModel) -> Vec<Vec<usize>> {
    let mut by = vec![Vec::new(); model.num_cables()];
    for n in 0..model.num_users() {
        by[model.cable_of(n)].push(n);
    }
    by
}

/// A power split strictly inside the simplex that meets every QoS target
/// strictly, or `InfeasibleQos`.
///
/// The QoS constraint `μ_n >= 2^{R_min} ν_n` is linear in the coefficients
/// once the slacks are tight, so feasibility is a linear program: minimize
/// the largest normalized violation `s` and require `s < 0`.
pub fn phase_one(model: &DcModel) -> Result<Vec<f64>> {
    let n = model.num_users();
    let g = model.coupling();
    let c = model.qos_ratio();
    let cables = users_by_cable(model);
    let serving: Vec<&Vec<usize>> = cables.iter().filter(|u| !u.is_empty()).collect();
    let rows = 2 * n + serving.len();
    let mut a = DMatrix::zeros(rows, n + 1);
    let mut b = DVector::zeros(rows);
    for i in 0..n {
        let others: f64 = (0..n).filter(|&j| j != i).map(|j| g[i][j]).sum();
        let w = g[i][i] + (c - 1.0) * (1.0 + others);
        if w <= 0.0 {
            return Err(Error::InfeasibleQos);
        }
        for j in 0..n {
            a[(i, j)] = if j == i {
                -g[i][i]
            } else {
                (c - 1.0) * g[i][j]
            } / w;
        }
        a[(i, n)] = -1.0;
        b[i] = -(c - 1.0) / w;
        a[(n + i, i)] = -1.0;
    }
    let mut q0 = vec![0.0; n];
    for (r, users) in serving.iter().enumerate() {
        for &j in users.iter() {
            a[(2 * n + r, j)] = 1.0;
            q0[j] = 1.0 / (users.len() + 1) as f64;
        }
        b[2 * n + r] = 1.0;
    }
    let mut z0 = DVector::from_vec(q0);
    z0 = z0.push(0.0);
    let worst = (&a * &z0 - &b).rows(0, n).max();
    z0[n] = worst + 1.0;
    let objective = |_: &DVector<f64>| {
        let mut grad = DVector::zeros(n + 1);
        grad[n] = -1.0;
        Some((0.0, grad, DMatrix::zeros(n + 1, n + 1)))
    };
    let opts = BarrierOptions {
        gap_tol: 1e-11,
        ..Default::default()
    };
    let out = maximize(objective, &a, &b, z0, opts, |z| z[n] < -1e-2)?;
    if out.z[n] > -FEASIBILITY_MARGIN {
        return Err(Error::InfeasibleQos);
    }
    Ok(out.z.rows(0, n).iter().copied().collect())
}

/// Solves the convexified power subproblem at expansion point `nu_t` (mW).
///
/// Internally all powers are divided by `σ²`. The barrier solution is
/// polished by setting both slacks to their bounds, which can only raise
/// the objective and keeps every constraint satisfied exactly.
pub fn solve_subproblem(model: &DcModel, nu_t: &[f64], tol: f64) -> Result<ScaIterate> {
    let surrogate = linearize(nu_t)?;
    let n = model.num_users();
    if nu_t.len() != n {
        return Err(Error::InvalidArgument(
            "one expansion point per user".into(),
        ));
    }
    let sigma2 = model.sigma2;
    let nu_t_norm: Vec<f64> = surrogate.nu_t.iter().map(|v| v / sigma2).collect();
    let g = model.coupling();
    let c = model.qos_ratio();
    let cables = users_by_cable(model);
    let serving: Vec<usize> = (0..cables.len())
        .filter(|&k| !cables[k].is_empty())
        .collect();

    // variables: q (n), μ (n), ν (n)
    let rows = 4 * n + serving.len();
    let mut a = DMatrix::zeros(rows, 3 * n);
    let mut b = DVector::zeros(rows);
    for i in 0..n {
        a[(i, n + i)] = 1.0;
        for j in 0..n {
            a[(i, j)] = -g[i][j];
            if j != i {
                a[(n + i, j)] = g[i][j];
            }
        }
        b[i] = 1.0;
        a[(n + i, 2 * n + i)] = -1.0;
        b[n + i] = -1.0;
        a[(2 * n + i, 2 * n + i)] = c;
        a[(2 * n + i, n + i)] = -1.0;
        a[(3 * n + i, i)] = -1.0;
    }
    for (r, &k) in serving.iter().enumerate() {
        for &j in &cables[k] {
            a[(4 * n + r, j)] = 1.0;
        }
        b[4 * n + r] = 1.0;
    }

    let q0 = phase_one(model)?;
    let mut z0 = DVector::zeros(3 * n);
    for i in 0..n {
        let interference: f64 = (0..n).filter(|&j| j != i).map(|j| g[i][j] * q0[j]).sum();
        let total = 1.0 + interference + g[i][i] * q0[i];
        let margin = total - c * (1.0 + interference);
        z0[i] = q0[i];
        z0[n + i] = total - margin / 4.0;
        z0[2 * n + i] = 1.0 + interference + margin / (4.0 * c);
    }

    let objective = |z: &DVector<f64>| {
        let mut value = 0.0;
        let mut grad = DVector::zeros(3 * n);
        let mut hess = DMatrix::zeros(3 * n, 3 * n);
        for i in 0..n {
            let mu = z[n + i];
            if mu <= 0.0 {
                return None;
            }
            value += mu.ln() - z[2 * n + i] / nu_t_norm[i];
            grad[n + i] = 1.0 / mu;
            grad[2 * n + i] = -1.0 / nu_t_norm[i];
            hess[(n + i, n + i)] = -1.0 / (mu * mu);
        }
        Some((value, grad, hess))
    };

    let mut gap_tol = (tol * 1e-2).min(1e-10);
    let mut steps = 0;
    loop {
        let opts = BarrierOptions {
            gap_tol,
            ..Default::default()
        };
        let out = maximize(objective, &a, &b, z0.clone(), opts, |_| false)?;
        steps += out.newton_steps;
        let q: Vec<f64> = out.z.rows(0, n).iter().copied().collect();
        let (mu, nu) = model.received(&q);
        let mut zp = DVector::zeros(3 * n);
        for i in 0..n {
            zp[i] = q[i];
            zp[n + i] = mu[i] / sigma2;
            zp[2 * n + i] = nu[i] / sigma2;
        }
        let grad = objective(&zp).expect("polished slacks stay positive").1;
        let lam = &refine_multipliers(&a, &grad, &out.lambda);
        let mut budget = vec![0.0; cables.len()];
        for (r, &k) in serving.iter().enumerate() {
            budget[k] = lam[4 * n + r];
        }
        let multipliers = Multipliers {
            received: lam.rows(0, n).iter().copied().collect(),
            interference: lam.rows(n, n).iter().copied().collect(),
            qos: lam.rows(2 * n, n).iter().copied().collect(),
            nonneg: lam.rows(3 * n, n).iter().copied().collect(),
            budget,
        };
        let objective = mu.iter().zip(&nu).map(|(m, v)| (m / v).log2()).sum();
        let mut it = ScaIterate {
            p: model.allocation(&q),
            mu,
            nu,
            objective,
            kkt_residual: 0.0,
            multipliers,
            newton_steps: steps,
        };
        it.kkt_residual = kkt_residual(model, nu_t, &it);
        if it.kkt_residual <= tol {
            return Ok(it);
        }
        if gap_tol < 1e-15 {
            return Err(Error::SolverStall {
                iterations: steps,
                gap: it.kkt_residual,
            });
        }
        gap_tol *= 1e-2;
    }
}

/// Multipliers at the polished point by nonnegative least squares on
/// stationarity,
/// restricted to constraints the barrier marks as active.
///
/// The barrier estimates `1 / (t s_i)` carry the rounding error of slacks
/// that are near zero, roughly `1e-6` relative at the final `t`; the
/// stationarity system itself is well conditioned.
fn refine_multipliers(
    a: &DMatrix<f64>,
    grad: &DVector<f64>,
    barrier: &DVector<f64>,
) -> DVector<f64> {
    let active: Vec<usize> = (0..a.nrows()).filter(|&i| barrier[i] > 1e-9).collect();
    let mut lambda = DVector::zeros(a.nrows());
    if active.is_empty() {
        return lambda;
    }
    let mut cols = DMatrix::zeros(a.ncols(), active.len());
    for (c, &i) in active.iter().enumerate() {
        cols.set_column(c, &a.row(i).transpose());
    }
    let sol = nnls(&cols, grad);
    for (c, &i) in active.iter().enumerate() {
        lambda[i] = sol[c];
    }
    lambda
}

/// Largest violation of the subproblem's optimality conditions at
/// `it`, evaluated directly from the model data in noise-normalized
/// units: stationarity (relative to the magnitude of the terms that must
/// cancel), complementary slackness, primal and dual feasibility.
pub fn kkt_residual(model: &DcModel, nu_t: &[f64], it: &ScaIterate) -> f64 {
    let n = model.num_users();
    let s2 = model.sigma2;
    let c = model.qos_ratio();
    let q = model.user_powers(&it.p);
    let lam = &it.multipliers;
    let mut worst: f64 = 0.0;
    let mut note = |v: f64| worst = worst.max(if v.is_nan() { f64::INFINITY } else { v });

    let gain = |i: usize, j: usize| model.g[model.cable_of(j)][i] / s2;
    for i in 0..n {
        let mu = it.mu[i] / s2;
        let nu = it.nu[i] / s2;
        let nt = nu_t[i] / s2;
        // stationarity in μ_i and ν_i
        let r_mu = 1.0 / mu - lam.received[i] + lam.qos[i];
        note(r_mu.abs() / (1.0 / mu + lam.received[i] + lam.qos[i]));
        let r_nu = -1.0 / nt + lam.interference[i] - c * lam.qos[i];
        note(r_nu.abs() / (1.0 / nt + lam.interference[i] + c * lam.qos[i]));

        let interference: f64 = (0..n).filter(|&j| j != i).map(|j| gain(i, j) * q[j]).sum();
        let cap = 1.0 + interference + gain(i, i) * q[i];
        let h_received = mu - cap;
        let h_interference = 1.0 + interference - nu;
        let h_qos = c * nu - mu;
        note(h_received.max(0.0) / cap);
        note(h_interference.max(0.0) / (1.0 + interference));
        note(h_qos.max(0.0) / mu);
        note((lam.received[i] * h_received).abs());
        note((lam.interference[i] * h_interference).abs());
        note((lam.qos[i] * h_qos).abs());
        note((lam.nonneg[i] * q[i]).abs());
        note((-q[i]).max(0.0));
    }
    // stationarity in each user's coefficient
    for j in 0..n {
        let k = model.cable_of(j);
        let mut r = lam.nonneg[j] - lam.budget[k];
        let mut scale = lam.nonneg[j] + lam.budget[k];
        for i in 0..n {
            let gij = gain(i, j);
            r += lam.received[i] * gij;
            scale += lam.received[i] * gij;
            if i != j {
                r -= lam.interference[i] * gij;
                scale += lam.interference[i] * gij;
            }
        }
        if scale > 0.0 {
            note(r.abs() / scale);
        }
    }
    for k in 0..model.num_cables() {
        let used: f64 = (0..n)
            .filter(|&j| model.cable_of(j) == k)
            .map(|j| q[j])
            .sum();
        note((used - 1.0).max(0.0));
        note((lam.budget[k] * (1.0 - used)).abs());
    }
    for v in lam
        .received
        .iter()
        .chain(&lam.interference)
        .chain(&lam.qos)
        .chain(&lam.nonneg)
        .chain(&lam.budget)
    {
        note((-v).max(0.0));
    }
    worst
}

/// Successive convex approximation from `init`. If `init` misses a QoS
/// target the run starts from the phase-I point instead, so the objective
/// trace is nondecreasing from its first entry.
pub fn run_sca(model: &DcModel, init: &PowerAllocation, opts: ScaOptions) -> Result<ScaRun> {
    if opts.t_max == 0 {
        return Err(Error::InvalidArgument("t_max must be at least 1".into()));
    }
    let mut q = model.user_powers(init);
    for (k, users) in users_by_cable(model).iter().enumerate() {
        let used: f64 = users.iter().map(|&j| q[j]).sum();
        if users.iter().any(|&j| q[j] < 0.0) || used > 1.0 + 1e-12 {
            return Err(Error::Constraint(format!(
                "initial power split on cable {k} leaves the simplex"
            )));
        }
    }
    if !model.meets_qos(&q) {
        q = phase_one(model)?;
    }
    let (_, mut nu) = model.received(&q);
    let mut prev: f64 = model.user_rates(&q).iter().sum();
    let mut trace = ScaTrace {
        steps: vec![ScaStep {
            t: 0,
            objective: prev,
            kkt_residual: None,
        }],
        converged: false,
    };
    let mut last = None;
    for t in 1..=opts.t_max {
        let it = solve_subproblem(model, &nu, opts.kkt_tol)?;
        trace.steps.push(ScaStep {
            t,
            objective: it.objective,
            kkt_residual: Some(it.kkt_residual),
        });
        let delta = (it.objective - prev).abs();
        prev = it.objective;
        nu.clone_from(&it.nu);
        last = Some(it);
        if delta <= opts.eps {
            trace.converged = true;
            break;
        }
    }
    if !trace.converged {
        log::warn!(
            "SCA stopped at t_max = {} without meeting eps = {}",
            opts.t_max,
            opts.eps
        );
    }
    Ok(ScaRun {
        iterate: last.expect("t_max >= 1"),
        trace,
    })
}
