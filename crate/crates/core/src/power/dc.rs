use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::rate::{
    active_counts, effective_gains, AssignmentState, PowerAllocation, QOS_TOLERANCE,
};
use crate::scenario::PhysConstants;

/// Rates written as a difference of two concave functions of the power
/// coefficients, with link gains `g[k][n] = P_t |h_{k,n}|² / (N_c N_k)` in mW.
#[derive(Debug, Clone, PartialEq)]
pub struct DcModel {
    pub g: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<bool>>,
    pub sigma2: f64,
    pub r_min: f64,
    cable_of: Vec<usize>,
}

impl DcModel {
    pub fn new(g: Vec<Vec<f64>>, alpha: Vec<Vec<bool>>, sigma2: f64, r_min: f64) -> Result<Self> {
        if g.len() != alpha.len() || g.is_empty() {
            return Err(Error::InvalidArgument(
                "gain and assignment matrices disagree on cable count".into(),
            ));
        }
        let users = alpha[0].len();
        if g.iter().any(|row| row.len() != users) || alpha.iter().any(|r| r.len() != users) {
            return Err(Error::InvalidArgument(
                "ragged gain or assignment matrix".into(),
            ));
        }
        if g.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument(
                "link gains must be finite and nonnegative".into(),
            ));
        }
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise power {sigma2} must be positive"
            )));
        }
        if !(r_min.is_finite() && r_min >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "minimum rate {r_min} must be nonnegative"
            )));
        }
        let mut cable_of = Vec::with_capacity(users);
        for n in 0..users {
            let cables: Vec<usize> = (0..alpha.len()).filter(|&k| alpha[k][n]).collect();
            match cables.as_slice() {
                [k] => cable_of.push(*k),
                _ => {
                    return Err(Error::Constraint(format!(
                        "user {n} must be served by exactly one cable"
                    )))
                }
            }
        }
        Ok(Self {
            g,
            alpha,
            sigma2,
            r_min,
            cable_of,
        })
    }

    pub fn num_cables(&self) -> usize {
        self.g.len()
    }

    pub fn num_users(&self) -> usize {
        self.cable_of.len()
    }

    pub fn cable_of(&self, n: usize) -> usize {
        self.cable_of[n]
    }

    /// `2^{R_min}`, the minimum ratio `μ_n / ν_n`.
    pub fn qos_ratio(&self) -> f64 {
        self.r_min.exp2()
    }

    /// Noise-normalized coupling `G[n][j] = g_{c(j),n} / σ²`: the gain with
    /// which user `j`'s power coefficient reaches user `n`.
    pub fn coupling(&self) -> Vec<Vec<f64>> {
        (0..self.num_users())
            .map(|n| {
                (0..self.num_users())
                    .map(|j| self.g[self.cable_of[j]][n] / self.sigma2)
                    .collect()
            })
            .collect()
    }

    /// Per-user coefficients `q_n = p[c(n)][n]`.
    pub fn user_powers(&self, p: &PowerAllocation) -> Vec<f64> {
        self.cable_of
            .iter()
            .enumerate()
            .map(|(n, &k)| p.p[k][n])
            .collect()
    }

    pub fn allocation(&self, q: &[f64]) -> PowerAllocation {
        let mut p = vec![vec![0.0; self.num_users()]; self.num_cables()];
        for (n, &k) in self.cable_of.iter().enumerate() {
            p[k][n] = q[n];
        }
        PowerAllocation { p }
    }

    /// Received power plus noise `μ_n` and interference plus noise `ν_n`, mW.
    pub fn received(&self, q: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut mu = Vec::with_capacity(q.len());
        let mut nu = Vec::with_capacity(q.len());
        for n in 0..self.num_users() {
            let mut interference = 0.0;
            for (j, &qj) in q.iter().enumerate() {
                if j != n {
                    interference += self.g[self.cable_of[j]][n] * qj;
                }
            }
            let own = self.g[self.cable_of[n]][n] * q[n];
            mu.push(own + interference + self.sigma2);
            nu.push(interference + self.sigma2);
        }
        (mu, nu)
    }

    pub fn user_rates(&self, q: &[f64]) -> Vec<f64> {
        let (mu, nu) = self.received(q);
        mu.iter().zip(&nu).map(|(m, v)| (m / v).log2()).collect()
    }

    pub fn rates(&self, p: &PowerAllocation) -> Vec<f64> {
        self.user_rates(&self.user_powers(p))
    }

    pub fn sum_rate(&self, p: &PowerAllocation) -> f64 {
        self.rates(p).iter().sum()
    }

    pub fn meets_qos(&self, q: &[f64]) -> bool {
        self.user_rates(q)
            .iter()
            .all(|&r| r >= self.r_min - QOS_TOLERANCE)
    }
}

/// Gains for the current assignment and activation. Fails when a serving
/// cable has no active slot.
pub fn build_dc_model(
    cs: &ChannelSet,
    state: &AssignmentState,
    consts: &PhysConstants,
    r_min: f64,
) -> Result<DcModel> {
    for k in 0..state.num_cables() {
        if state.is_serving(k) && !state.beta[k].iter().any(|b| *b) {
            return Err(Error::Constraint(format!(
                "cable {k} serves users but has no active slot"
            )));
        }
    }
    let (n_c, n_k) = active_counts(state);
    if n_c == 0 {
        return Err(Error::Constraint("no cable serves any user".into()));
    }
    let gains = effective_gains(cs, state);
    let g = gains
        .iter()
        .zip(&n_k)
        .map(|(row, &nk)| {
            row.iter()
                .map(|h2| consts.p_t / (n_c * nk) as f64 * h2)
                .collect()
        })
        .collect();
    DcModel::new(g, state.alpha.clone(), consts.sigma2, r_min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::compose_channels;
    use crate::channel::ChannelFlags;
    use crate::rate::user_rates;
    use crate::scenario::{Scenario, ScenarioConfig};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};

    #[test]
    fn single_link_gain() {
        let cs = ChannelSet::from_gains(1, 1, 1, vec![Complex64::new(3e-3, -4e-3)]);
        let state = AssignmentState::from_cables(&[0], vec![vec![true]]).unwrap();
        let consts = PhysConstants::new(0.1, 1.26, 3.5e9, 1e-6, 100.0).unwrap();
        let m = build_dc_model(&cs, &state, &consts, 0.0).unwrap();
        assert!((m.g[0][0] - 100.0 * 25e-6).abs() < 1e-15);
        let doubled = build_dc_model(
            &cs,
            &state,
            &PhysConstants {
                p_t: 200.0,
                ..consts
            },
            0.0,
        )
        .unwrap();
        assert!((doubled.g[0][0] - 2.0 * m.g[0][0]).abs() < 1e-15);
    }

    #[test]
    fn matches_rate_module() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let cfg = ScenarioConfig {
            cables: 3,
            users: 5,
            slots: 10,
            ..Default::default()
        };
        for seed in 0..30 {
            let sc = Scenario::build(&cfg, seed).unwrap();
            let cs = compose_channels(&sc, ChannelFlags::FULL);
            let cable_of: Vec<usize> = (0..5).map(|_| rng.random_range(0..3)).collect();
            let beta = (0..3)
                .map(|_| (0..10).map(|m| m == 0 || rng.random_bool(0.3)).collect())
                .collect();
            let state = AssignmentState::from_cables(&cable_of, beta).unwrap();
            let mut p = PowerAllocation::equal_split(&state);
            for (n, &k) in cable_of.iter().enumerate() {
                p.p[k][n] *= rng.random_range(0.1..1.0);
            }
            let model = build_dc_model(&cs, &state, &sc.constants, 0.1).unwrap();
            let expect = user_rates(&cs, &state, &p, &sc.constants);
            for (a, b) in model.rates(&p).iter().zip(&expect) {
                assert!((a - b).abs() <= 1e-12 * b.max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn serving_cable_without_slot_is_rejected() {
        let cs = ChannelSet::from_gains(1, 2, 1, vec![Complex64::new(1.0, 0.0); 2]);
        let state = AssignmentState {
            alpha: vec![vec![true]],
            beta: vec![vec![false, false]],
        };
        let consts = PhysConstants::new(0.1, 1.26, 3.5e9, 1e-6, 100.0).unwrap();
        assert!(matches!(
            build_dc_model(&cs, &state, &consts, 0.0),
            Err(Error::Constraint(_))
        ));
    }

    #[test]
    fn unassigned_user_is_rejected() {
        let r = DcModel::new(vec![vec![1.0, 1.0]], vec![vec![true, false]], 1.0, 0.0);
        assert!(r.is_err());
    }
}
