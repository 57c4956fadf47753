use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{compose_channels, ChannelFlags, ChannelSet};
use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::scenario::{Scenario, ScenarioConfig};

/// Rate-versus-position profile of a single user served by its nearest
/// slot, under the full channel, without scattering, and with a lossless
/// cable.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig3Spec {
    /// Deployment; cable, slot and scatterer counts are taken from here.
    pub scenario: ScenarioConfig,
    /// Lateral user offsets from the cable, metres.
    pub offsets: Vec<f64>,
    /// User spacing along the cable, metres.
    pub step: f64,
    /// Independent scatterer draws averaged per position.
    pub draws: usize,
    pub seed: u64,
}

impl Fig3Spec {
    /// Single cable of 50 slots, ten scatterers, users 0, 5 and 10 m off
    /// the cable every metre.
    pub fn standard(seed: u64) -> Self {
        Self {
            scenario: ScenarioConfig {
                cables: 1,
                slots: 50,
                users: 1,
                scatterers: 10,
                ..Default::default()
            },
            offsets: vec![0.0, 5.0, 10.0],
            step: 1.0,
            draws: 100,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.scenario.cables != 1 {
            return Err(Error::InvalidConfig(
                "the position profile needs exactly one cable".into(),
            ));
        }
        if self.draws == 0 || !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidArgument(
                "draws and step must be positive".into(),
            ));
        }
        if self.offsets.is_empty()
            || self
                .offsets
                .iter()
                .any(|o| !o.is_finite() || o.abs() > self.scenario.dy / 2.0)
        {
            return Err(Error::InvalidArgument(
                "offsets must be nonempty and inside the region".into(),
            ));
        }
        Ok(())
    }

    fn positions(&self) -> Vec<Point3> {
        let dx = self.scenario.dx;
        let steps = (dx / self.step + 1e-9).floor() as usize;
        self.offsets
            .iter()
            .flat_map(|&y| {
                (0..=steps)
                    .map(move |i| Point3::new(-dx / 2.0 + (i as f64 * self.step).min(dx), y, 0.0))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fig3Row {
    pub offset: f64,
    /// Distance from the cable feed along the cable.
    pub distance: f64,
    /// Mean over scatterer draws.
    pub full: f64,
    pub los_only: f64,
    /// Mean over scatterer draws.
    pub no_attenuation: f64,
    /// Mean over draws of `|full − los_only|`.
    pub abs_diff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig3Result {
    pub rows: Vec<Fig3Row>,
    pub draws: usize,
}

impl Fig3Result {
    /// Mean absolute full-versus-LoS difference relative to the mean LoS
    /// rate, over all positions.
    pub fn relative_los_gap(&self) -> f64 {
        let diff: f64 = self.rows.iter().map(|r| r.abs_diff).sum();
        let los: f64 = self.rows.iter().map(|r| r.los_only).sum();
        diff / los
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "offset",
            "distance",
            "full",
            "los_only",
            "no_attenuation",
            "abs_diff_full_los",
        ])?;
        for r in &self.rows {
            w.write_record(
                [
                    r.offset,
                    r.distance,
                    r.full,
                    r.los_only,
                    r.no_attenuation,
                    r.abs_diff,
                ]
                .map(|v| v.to_string()),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Rates of every user in `sc`, each served alone at full power by its
/// nearest slot on cable 0.
fn nearest_slot_rates(sc: &Scenario, cs: &ChannelSet) -> Vec<f64> {
    let c = &sc.constants;
    (0..sc.num_users())
        .map(|n| {
            let m = sc.nearest_slot(0, &sc.users[n]);
            (1.0 + c.p_t * cs.h(0, m, n).norm_sqr() / c.sigma2).log2()
        })
        .collect()
}

pub fn fig3_experiment(spec: &Fig3Spec) -> Result<Fig3Result> {
    spec.validate()?;
    let positions = spec.positions();
    let n = positions.len();
    let bare = Scenario::with_parts(&spec.scenario, positions.clone(), vec![], vec![])?;
    let los = nearest_slot_rates(&bare, &compose_channels(&bare, ChannelFlags::LOS_ONLY));

    let mut full = vec![0.0; n];
    let mut no_att = vec![0.0; n];
    let mut abs_diff = vec![0.0; n];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for _ in 0..spec.draws {
        let draw = Scenario::build_with_rng(&spec.scenario, &mut rng)?;
        let sc = Scenario::with_parts(
            &spec.scenario,
            positions.clone(),
            draw.scatterers,
            draw.scat_gains,
        )?;
        let f = nearest_slot_rates(&sc, &compose_channels(&sc, ChannelFlags::FULL));
        let a = nearest_slot_rates(&sc, &compose_channels(&sc, ChannelFlags::NO_ATTENUATION));
        for i in 0..n {
            full[i] += f[i];
            no_att[i] += a[i];
            abs_diff[i] += (f[i] - los[i]).abs();
        }
    }
    let scale = 1.0 / spec.draws as f64;
    let rows = positions
        .iter()
        .enumerate()
        .map(|(i, p)| Fig3Row {
            offset: p.y,
            distance: p.x + spec.scenario.dx / 2.0,
            full: full[i] * scale,
            los_only: los[i],
            no_attenuation: no_att[i] * scale,
            abs_diff: abs_diff[i] * scale,
        })
        .collect();
    Ok(Fig3Result {
        rows,
        draws: spec.draws,
    })
}
