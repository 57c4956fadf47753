//! Log-barrier interior-point method for smooth concave maximization over
//! `A z <= b`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Objective value, gradient and Hessian, or `None` outside its domain.
pub(crate) type Eval = Option<(f64, DVector<f64>, DMatrix<f64>)>;

const MAX_CENTERING_STEPS: usize = 60;

#[derive(Debug, Clone, Copy)]
pub(crate) struct BarrierOptions {
    pub t0: f64,
    pub growth: f64,
    /// Stop once the duality-gap bound `m / t` falls below this.
    pub gap_tol: f64,
    /// Centering stops when half the squared Newton decrement is below this.
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self {
            t0: 1.0,
            growth: 10.0,
            gap_tol: 1e-10,
            newton_tol: 1e-12,
            max_newton: 3000,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BarrierOutcome {
    pub z: DVector<f64>,
    /// Multiplier estimates `1 / (t s_i)`.
    pub lambda: DVector<f64>,
    pub newton_steps: usize,
}

fn slacks(a: &DMatrix<f64>, b: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
    b - a * z
}

/// Maximizes `f` subject to `A z <= b` from a strictly feasible `z0`.
///
/// Newton steps are damped by `1 / (1 + λ)` outside the quadratic region,
/// which keeps iterates feasible for self-concordant barriers; a halving
/// safeguard catches the rest. `early_stop` is polled after each step.
pub(crate) fn maximize<F, S>(
    f: F,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    z0: DVector<f64>,
    opts: BarrierOptions,
    mut early_stop: S,
) -> Result<BarrierOutcome>
where
    F: Fn(&DVector<f64>) -> Eval,
    S: FnMut(&DVector<f64>) -> bool,
{
    let m = a.nrows() as f64;
    let mut z = z0;
    if slacks(a, b, &z).iter().any(|s| *s <= 0.0) || f(&z).is_none() {
        return Err(Error::InvalidArgument(
            "barrier start is not strictly feasible".into(),
        ));
    }
    let mut t = opts.t0;
    let mut steps = 0;
    let outcome = |z: DVector<f64>, t: f64, steps: usize| {
        let lambda = slacks(a, b, &z).map(|s| 1.0 / (t * s));
        BarrierOutcome {
            z,
            lambda,
            newton_steps: steps,
        }
    };
    loop {
        let mut prev_lam2 = f64::INFINITY;
        for _ in 0..MAX_CENTERING_STEPS {
            let s = slacks(a, b, &z);
            let (_, grad, hess) = f(&z).expect("iterate left the objective domain");
            let inv = s.map(|v| 1.0 / v);
            let g = grad * t - a.transpose() * &inv;
            let mut scaled = a.clone();
            for (mut row, w) in scaled.row_iter_mut().zip(inv.iter()) {
                row *= *w;
            }
            let neg_h = scaled.transpose() * &scaled - hess * t;
            let dz = solve_spd(neg_h, &g)?;
            let lam2 = g.dot(&dz);
            steps += 1;
            // past the quadratic region, rounding sets a floor on the
            // decrement; stop once it no longer shrinks
            let stagnant = lam2 < 1e-6 && lam2 > 0.25 * prev_lam2;
            if lam2 / 2.0 <= opts.newton_tol || stagnant || !lam2.is_finite() {
                break;
            }
            prev_lam2 = lam2;
            let lam = lam2.max(0.0).sqrt();
            let mut step = if lam > 0.25 { 1.0 / (1.0 + lam) } else { 1.0 };
            loop {
                let next = &z + &dz * step;
                if slacks(a, b, &next).iter().all(|v| *v > 0.0) && f(&next).is_some() {
                    z = next;
                    break;
                }
                step *= 0.5;
                if step < 1e-16 {
                    return Err(Error::SolverStall {
                        iterations: steps,
                        gap: m / t,
                    });
                }
            }
            if early_stop(&z) {
                return Ok(outcome(z, t, steps));
            }
            if steps >= opts.max_newton {
                return Err(Error::SolverStall {
                    iterations: steps,
                    gap: m / t,
                });
            }
        }
        if m / t <= opts.gap_tol {
            return Ok(outcome(z, t, steps));
        }
        t *= opts.growth;
    }
}

/// Solves `M x = r` for symmetric positive-definite `M`, adding a small
/// diagonal shift if rounding has cost definiteness.
fn solve_spd(mat: DMatrix<f64>, r: &DVector<f64>) -> Result<DVector<f64>> {
    let scale = mat.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut shift = 0.0;
    for _ in 0..8 {
        let mut shifted = mat.clone();
        for i in 0..shifted.nrows() {
            shifted[(i, i)] += shift;
        }
        if let Some(chol) = shifted.cholesky() {
            return Ok(chol.solve(r));
        }
        shift = if shift == 0.0 {
            scale * 1e-14
        } else {
            shift * 100.0
        };
    }
    Err(Error::SolverStall {
        iterations: 0,
        gap: f64::NAN,
    })
}

/// Lawson–Hanson nonnegative least squares: `min ||C x - d||`, `x >= 0`.
pub(crate) fn nnls(c: &DMatrix<f64>, d: &DVector<f64>) -> DVector<f64> {
    // unit columns keep the passive-set solves well conditioned
    let norms: Vec<f64> = c.column_iter().map(|col| col.norm()).collect();
    let mut unit = c.clone();
    for (mut col, &nrm) in unit.column_iter_mut().zip(&norms) {
        if nrm > 0.0 {
            col /= nrm;
        }
    }
    let x = nnls_unit(&unit, d);
    DVector::from_fn(
        x.len(),
        |j, _| if norms[j] > 0.0 { x[j] / norms[j] } else { 0.0 },
    )
}

fn nnls_unit(c: &DMatrix<f64>, d: &DVector<f64>) -> DVector<f64> {
    let cols = c.ncols();
    let mut x = DVector::zeros(cols);
    let mut passive = vec![false; cols];
    let tol = 1e-14 * d.norm().max(f64::MIN_POSITIVE) * cols.max(1) as f64;
    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..cols).filter(|&j| passive[j]).collect();
        let sub = DMatrix::from_fn(c.nrows(), idx.len(), |r, k| c[(r, idx[k])]);
        let sol = sub
            .svd(true, true)
            .solve(d, 1e-15)
            .unwrap_or_else(|_| DVector::zeros(idx.len()));
        let mut full = DVector::zeros(cols);
        for (k, &j) in idx.iter().enumerate() {
            full[j] = sol[k];
        }
        full
    };
    for _ in 0..3 * cols + 10 {
        let w = c.transpose() * (d - c * &x);
        let Some(j) = (0..cols)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&a, &b| w[a].total_cmp(&w[b]))
        else {
            break;
        };
        passive[j] = true;
        loop {
            let s = solve_passive(&passive);
            if (0..cols).filter(|&i| passive[i]).all(|i| s[i] > 0.0) {
                x = s;
                break;
            }
            let alpha = (0..cols)
                .filter(|&i| passive[i] && s[i] <= 0.0)
                .map(|i| x[i] / (x[i] - s[i]))
                .fold(f64::INFINITY, f64::min);
            x += (s - &x) * alpha;
            for i in 0..cols {
                if passive[i] && x[i] <= tol {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
    }
    x
}
