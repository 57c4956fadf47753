use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{
    appendix_a_gap_bound, mc_rate_gap, pinching_pair_rates, prop1_condition, prop2_condition,
    prop2_high_snr, GapBound, GeometrySummary, Prop1Verdict,
};
use crate::error::Result;
use crate::geometry::Point3;
use crate::scenario::{PhysConstants, Scenario, ScenarioConfig};

/// Noise power used for the high-SNR comparison, mW.
const HIGH_SNR_SIGMA2: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prop1Report {
    pub geometry: GeometrySummary,
    pub verdict: Prop1Verdict,
    pub bound: GapBound,
    /// Monte-Carlo estimate of the worst-cell LCX rate minus the mean
    /// fixed-antenna rate, at full transmit power.
    pub mc_gap: f64,
    pub drops: usize,
}

impl Prop1Report {
    pub fn agrees(&self) -> bool {
        self.verdict.holds == (self.mc_gap >= 0.0)
    }
}

/// Agreement between the two-slot radiation condition and a direct rate
/// comparison over random geometries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Prop2Report {
    pub samples: usize,
    pub high_snr_agree: usize,
    pub finite_snr_agree: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropCheck {
    pub prop1: Prop1Report,
    pub prop2: Prop2Report,
}

pub fn prop1_report(cfg: &ScenarioConfig, drops: usize, seed: u64) -> Result<Prop1Report> {
    let consts = cfg.validate()?;
    let geometry = GeometrySummary::from_config(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Prop1Report {
        geometry,
        verdict: prop1_condition(&geometry),
        bound: appendix_a_gap_bound(&geometry, &consts, consts.p_t),
        mc_gap: mc_rate_gap(
            &geometry, cfg.dx, cfg.dy, &consts, consts.p_t, drops, &mut rng,
        ),
        drops,
    })
}

/// Draws `samples` two-cable geometries (one user, one serving and one
/// interfering slot, random power) and counts how often each form of the
/// condition predicts the winner of the direct rate comparison.
pub fn prop2_report(cfg: &ScenarioConfig, samples: usize, seed: u64) -> Result<Prop2Report> {
    let cfg = ScenarioConfig {
        cables: 2,
        users: 1,
        scatterers: 0,
        ..cfg.clone()
    };
    let consts = cfg.validate()?;
    let high = PhysConstants {
        sigma2: HIGH_SNR_SIGMA2,
        ..consts
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = Prop2Report {
        samples,
        high_snr_agree: 0,
        finite_snr_agree: 0,
    };
    for _ in 0..samples {
        let user = Point3::new(
            rng.random_range(-cfg.dx / 2.0..=cfg.dx / 2.0),
            rng.random_range(-cfg.dy / 2.0..=cfg.dy / 2.0),
            0.0,
        );
        let sc = Scenario::with_parts(&cfg, vec![user], vec![], vec![])?;
        let (k, kp) = if rng.random_bool(0.5) { (0, 1) } else { (1, 0) };
        let m = rng.random_range(0..cfg.slots);
        let mp = rng.random_range(0..cfg.slots);
        let p = consts.p_t * rng.random_range(0.01..=1.0);

        let (lcx, pin) = pinching_pair_rates(&sc, k, m, kp, mp, 0, p);
        report.finite_snr_agree +=
            usize::from(prop2_condition(&sc, k, m, kp, mp, 0, p).holds == (lcx >= pin));

        let sc_high = sc.with_constants(high)?;
        let (lcx, pin) = pinching_pair_rates(&sc_high, k, m, kp, mp, 0, p);
        report.high_snr_agree +=
            usize::from(prop2_high_snr(&sc_high, k, m, kp, mp, 0).holds == (lcx >= pin));
    }
    Ok(report)
}

pub fn prop_check(
    cfg: &ScenarioConfig,
    drops: usize,
    samples: usize,
    seed: u64,
) -> Result<PropCheck> {
    Ok(PropCheck {
        prop1: prop1_report(cfg, drops, seed)?,
        prop2: prop2_report(cfg, samples, seed)?,
    })
}

impl fmt::Display for PropCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p1 = &self.prop1;
        let g = &p1.geometry;
        writeln!(f, "geometry: a = {:.4}, b^2 = {:.4}", g.a, g.b2)?;
        writeln!(
            f,
            "lcx-vs-fixed condition: {} (margin {:+.4} nats)",
            if p1.verdict.holds { "holds" } else { "fails" },
            p1.verdict.margin_ln()
        )?;
        writeln!(
            f,
            "gap bound: {:+.4} bits/s/Hz at {:.1} dB{}",
            p1.bound.value,
            p1.bound.snr_db,
            if p1.bound.high_snr {
                ""
            } else {
                " (below high-SNR threshold)"
            }
        )?;
        writeln!(
            f,
            "monte-carlo gap: {:+.4} bits/s/Hz over {} drops ({})",
            p1.mc_gap,
            p1.drops,
            if p1.agrees() { "agrees" } else { "disagrees" }
        )?;
        let p2 = &self.prop2;
        writeln!(
            f,
            "slot radiation condition, high SNR: {}/{} agree",
            p2.high_snr_agree, p2.samples
        )?;
        write!(
            f,
            "slot radiation condition, finite SNR: {}/{} agree",
            p2.finite_snr_agree, p2.samples
        )
    }
}
