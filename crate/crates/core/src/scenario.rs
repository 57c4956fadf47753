//! Deployment geometry: region, cables, slots, users and wall scatterers.
//!
//! Cables run parallel to the x-axis at height `d`, fed from the `x = -D_x/2`
//! wall and spread evenly across the y extent. Slots are evenly spaced along
//! each cable, first slot at the feed point and last slot at the far wall.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point3;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Physical constants of one deployment. Power quantities are linear mW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysConstants {
    /// Longitudinal cable attenuation, dB/m.
    pub kappa: f64,
    pub eps_r: f64,
    /// Carrier frequency, Hz.
    pub f_c: f64,
    pub sigma2: f64,
    pub p_t: f64,
}

impl PhysConstants {
    pub fn new(kappa: f64, eps_r: f64, f_c: f64, sigma2: f64, p_t: f64) -> Result<Self> {
        let c = Self {
            kappa,
            eps_r,
            f_c,
            sigma2,
            p_t,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn from_db(kappa: f64, eps_r: f64, f_c: f64, noise_dbm: f64, pt_dbm: f64) -> Result<Self> {
        Self::new(kappa, eps_r, f_c, dbm_to_mw(noise_dbm), dbm_to_mw(pt_dbm))
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite();
        if !(ok(self.kappa) && self.kappa >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "kappa must be >= 0, got {}",
                self.kappa
            )));
        }
        if !(ok(self.eps_r) && self.eps_r >= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "eps_r must be >= 1, got {}",
                self.eps_r
            )));
        }
        if !(ok(self.f_c) && self.f_c > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "f_c must be > 0, got {}",
                self.f_c
            )));
        }
        if !(ok(self.sigma2) && self.sigma2 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise power must be > 0, got {}",
                self.sigma2
            )));
        }
        if !(ok(self.p_t) && self.p_t > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "transmit power must be > 0, got {}",
                self.p_t
            )));
        }
        Ok(())
    }

    /// Free-space wavelength, m.
    pub fn lambda(&self) -> f64 {
        SPEED_OF_LIGHT / self.f_c
    }

    /// Aperture constant `c / (4π f_c)`, m.
    pub fn eta(&self) -> f64 {
        SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * self.f_c)
    }

    /// Free-space wavenumber `2π/λ`, rad/m.
    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.lambda()
    }
}

/// Physical parameters as they appear in configuration files (dB units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysConfig {
    pub kappa_db_per_m: f64,
    pub eps_r: f64,
    pub fc_hz: f64,
    pub noise_dbm: f64,
    pub pt_dbm: f64,
}

impl Default for PhysConfig {
    fn default() -> Self {
        Self {
            kappa_db_per_m: 0.1,
            eps_r: 1.26,
            fc_hz: 3.5e9,
            noise_dbm: -64.0,
            pt_dbm: 20.0,
        }
    }
}

impl PhysConfig {
    pub fn constants(&self) -> Result<PhysConstants> {
        PhysConstants::from_db(
            self.kappa_db_per_m,
            self.eps_r,
            self.fc_hz,
            self.noise_dbm,
            self.pt_dbm,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub dx: f64,
    pub dy: f64,
    /// Cable height `d`, m.
    pub height: f64,
    pub cables: usize,
    pub slots: usize,
    pub users: usize,
    pub scatterers: usize,
    pub phys: PhysConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            dx: 50.0,
            dy: 30.0,
            height: 3.0,
            cables: 2,
            slots: 50,
            users: 2,
            scatterers: 10,
            phys: PhysConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<PhysConstants> {
        for (name, v) in [
            ("region.dx", self.dx),
            ("region.dy", self.dy),
            ("region.height", self.height),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.cables < 1 {
            return Err(Error::InvalidConfig("cables.count must be >= 1".into()));
        }
        if self.slots < 2 {
            return Err(Error::InvalidConfig("cables.slots must be >= 2".into()));
        }
        if self.users < 1 {
            return Err(Error::InvalidConfig("users.count must be >= 1".into()));
        }
        let consts = self.phys.constants()?;
        let spacing = self.slot_spacing();
        let half_lambda = consts.lambda() / 2.0;
        if spacing < half_lambda {
            return Err(Error::InvalidConfig(format!(
                "slot spacing {spacing:.4} m is below half a wavelength ({half_lambda:.4} m); reduce cables.slots"
            )));
        }
        Ok(consts)
    }

    /// `Δd = D_x / (M - 1)`.
    pub fn slot_spacing(&self) -> f64 {
        self.dx / (self.slots as f64 - 1.0)
    }
}

/// Immutable deployment: everything the channel model needs for one
/// realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub dx: f64,
    pub dy: f64,
    pub height: f64,
    pub feeds: Vec<Point3>,
    /// `slots[k][m]`
    pub slots: Vec<Vec<Point3>>,
    pub users: Vec<Point3>,
    pub scatterers: Vec<Point3>,
    pub scat_gains: Vec<Complex64>,
    pub constants: PhysConstants,
}

fn cable_y(dy: f64, cables: usize, k: usize) -> f64 {
    -dy / 2.0 + (k as f64 + 0.5) * dy / cables as f64
}

impl Scenario {
    /// Draws users and scatterers from a generator seeded with `seed`.
    pub fn build(config: &ScenarioConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build_with_rng(config, &mut rng)
    }

    pub fn build_with_rng<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let users = (0..config.users)
            .map(|_| {
                Point3::new(
                    rng.random_range(-config.dx / 2.0..=config.dx / 2.0),
                    rng.random_range(-config.dy / 2.0..=config.dy / 2.0),
                    0.0,
                )
            })
            .collect();
        let scatterers = (0..config.scatterers)
            .map(|_| wall_point(rng, config.dx, config.dy, config.height))
            .collect();
        let scat_gains = (0..config.scatterers)
            .map(|_| circular_gaussian(rng))
            .collect();
        Self::with_parts(config, users, scatterers, scat_gains)
    }

    /// Builds a scenario from explicit user and scatterer placements.
    pub fn with_parts(
        config: &ScenarioConfig,
        users: Vec<Point3>,
        scatterers: Vec<Point3>,
        scat_gains: Vec<Complex64>,
    ) -> Result<Self> {
        let constants = config.validate()?;
        if users.is_empty() {
            return Err(Error::InvalidConfig("at least one user is required".into()));
        }
        if scatterers.len() != scat_gains.len() {
            return Err(Error::InvalidConfig(format!(
                "{} scatterers but {} scattering gains",
                scatterers.len(),
                scat_gains.len()
            )));
        }
        let (hx, hy) = (config.dx / 2.0, config.dy / 2.0);
        for (n, u) in users.iter().enumerate() {
            if u.z != 0.0 || u.x.abs() > hx || u.y.abs() > hy {
                return Err(Error::InvalidConfig(format!(
                    "user {n} at {u:?} is outside the floor region"
                )));
            }
        }
        for (l, s) in scatterers.iter().enumerate() {
            if !(0.0..=config.height).contains(&s.z) {
                return Err(Error::InvalidConfig(format!(
                    "scatterer {l} height {} outside [0, d]",
                    s.z
                )));
            }
        }

        let spacing = config.slot_spacing();
        let feeds: Vec<Point3> = (0..config.cables)
            .map(|k| Point3::new(-hx, cable_y(config.dy, config.cables, k), config.height))
            .collect();
        let slots = feeds
            .iter()
            .map(|feed| {
                (0..config.slots)
                    .map(|m| Point3::new(-hx + m as f64 * spacing, feed.y, config.height))
                    .collect()
            })
            .collect();

        Ok(Self {
            dx: config.dx,
            dy: config.dy,
            height: config.height,
            feeds,
            slots,
            users,
            scatterers,
            scat_gains,
            constants,
        })
    }

    /// Same geometry with different physical constants.
    pub fn with_constants(&self, constants: PhysConstants) -> Result<Self> {
        constants.validate()?;
        Ok(Self {
            constants,
            ..self.clone()
        })
    }

    pub fn num_cables(&self) -> usize {
        self.feeds.len()
    }

    pub fn num_slots(&self) -> usize {
        self.slots.first().map_or(0, Vec::len)
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_scatterers(&self) -> usize {
        self.scatterers.len()
    }

    pub fn slot_spacing(&self) -> f64 {
        self.dx / (self.num_slots() as f64 - 1.0)
    }

    pub fn slot(&self, k: usize, m: usize) -> &Point3 {
        &self.slots[k][m]
    }

    /// Distance from the feed of cable `k` to its slot `m`.
    pub fn cable_distance(&self, k: usize, m: usize) -> f64 {
        self.feeds[k].distance(&self.slots[k][m])
    }

    /// Elevation angle between slot `(k, m)` and user `n`.
    pub fn elevation_angle(&self, k: usize, m: usize, n: usize) -> f64 {
        crate::geometry::elevation_angle(&self.slots[k][m], &self.users[n])
    }

    /// Slot on cable `k` closest to `point`, lowest index on ties.
    pub fn nearest_slot(&self, k: usize, point: &Point3) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (m, s) in self.slots[k].iter().enumerate() {
            let d = s.distance(point);
            if d < best_d {
                best_d = d;
                best = m;
            }
        }
        best
    }

    /// Cable whose y-coordinate is closest to `point.y`, lowest index on ties.
    pub fn nearest_cable(&self, point: &Point3) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, f) in self.feeds.iter().enumerate() {
            let d = (point.y - f.y).abs();
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        best
    }
}

/// Uniform point on the four wall planes, height uniform in `[0, height]`.
fn wall_point<R: Rng + ?Sized>(rng: &mut R, dx: f64, dy: f64, height: f64) -> Point3 {
    let perimeter = 2.0 * (dx + dy);
    let u = rng.random_range(0.0..perimeter);
    let z = rng.random_range(0.0..=height);
    let (hx, hy) = (dx / 2.0, dy / 2.0);
    let (x, y) = if u < dx {
        (-hx + u, -hy)
    } else if u < dx + dy {
        (hx, -hy + (u - dx))
    } else if u < 2.0 * dx + dy {
        (hx - (u - dx - dy), hy)
    } else {
        (-hx, hy - (u - 2.0 * dx - dy))
    };
    Point3::new(x, y, z)
}

/// Sample of `CN(0, 1)`.
pub fn circular_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table_config() -> ScenarioConfig {
        ScenarioConfig {
            cables: 1,
            slots: 50,
            ..Default::default()
        }
    }

    #[test]
    fn slot_spacing_and_first_slot() {
        let sc = Scenario::build(&table_config(), 1).unwrap();
        assert!((sc.slot_spacing() - 50.0 / 49.0).abs() < 1e-15);
        assert_eq!(sc.slot(0, 0).x, -25.0);
        assert!((sc.slot(0, 49).x - 25.0).abs() < 1e-12);
        assert_eq!(sc.cable_distance(0, 0), 0.0);
    }

    #[test]
    fn feed_rows_for_two_cables() {
        let sc = Scenario::build(
            &ScenarioConfig {
                cables: 2,
                dy: 30.0,
                ..Default::default()
            },
            3,
        )
        .unwrap();
        let ys: Vec<f64> = sc.feeds.iter().map(|f| f.y).collect();
        assert_eq!(ys, vec![-7.5, 7.5]);
        assert!(sc.feeds.iter().all(|f| f.x == -25.0 && f.z == 3.0));
    }

    #[test]
    fn seeded_builds_are_identical() {
        let cfg = ScenarioConfig::default();
        let a = Scenario::build(&cfg, 99).unwrap();
        let b = Scenario::build(&cfg, 99).unwrap();
        assert_eq!(a, b);
        let c = Scenario::build(&cfg, 100).unwrap();
        assert_ne!(a.users, c.users);
    }

    #[test]
    fn rejects_sub_half_wavelength_spacing() {
        // λ/2 at 3.5 GHz is about 4.28 cm; 50 m over 2000 slots is 2.5 cm.
        let cfg = ScenarioConfig {
            slots: 2000,
            ..Default::default()
        };
        assert!(matches!(
            Scenario::build(&cfg, 0),
            Err(Error::InvalidConfig(_))
        ));
        let ok = ScenarioConfig {
            slots: 1000,
            ..Default::default()
        };
        assert!(Scenario::build(&ok, 0).is_ok());
    }

    #[test]
    fn rejects_bad_dimensions_and_counts() {
        for cfg in [
            ScenarioConfig {
                dx: 0.0,
                ..Default::default()
            },
            ScenarioConfig {
                dy: -1.0,
                ..Default::default()
            },
            ScenarioConfig {
                height: 0.0,
                ..Default::default()
            },
            ScenarioConfig {
                cables: 0,
                ..Default::default()
            },
            ScenarioConfig {
                slots: 1,
                ..Default::default()
            },
            ScenarioConfig {
                users: 0,
                ..Default::default()
            },
        ] {
            assert!(Scenario::build(&cfg, 0).is_err(), "{cfg:?}");
        }
        let bad_phys = ScenarioConfig {
            phys: PhysConfig {
                eps_r: 0.5,
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(Scenario::build(&bad_phys, 0).is_err());
    }

    #[test]
    fn eta_is_lambda_over_four_pi() {
        let c = PhysConfig::default().constants().unwrap();
        let rel = (c.eta() - c.lambda() / (4.0 * std::f64::consts::PI)).abs() / c.eta();
        assert!(rel < 1e-12);
        assert!((c.eta() - 6.8161e-3).abs() < 1e-6);
        assert!((c.sigma2 - 10f64.powf(-6.4)).abs() < 1e-20);
    }

    #[test]
    fn explicit_parts_are_validated() {
        let cfg = ScenarioConfig::default();
        let outside = vec![Point3::new(30.0, 0.0, 0.0)];
        assert!(Scenario::with_parts(&cfg, outside, vec![], vec![]).is_err());
        let lifted = vec![Point3::new(0.0, 0.0, 1.0)];
        assert!(Scenario::with_parts(&cfg, lifted, vec![], vec![]).is_err());
        let mismatch = Scenario::with_parts(
            &cfg,
            vec![Point3::default()],
            vec![Point3::new(25.0, 0.0, 1.0)],
            vec![],
        );
        assert!(mismatch.is_err());
    }

    proptest! {
        #[test]
        fn geometry_invariants(seed in any::<u64>(), cables in 1usize..5, slots in 2usize..80, users in 1usize..6) {
            let cfg = ScenarioConfig { cables, slots, users, ..Default::default() };
            let sc = Scenario::build(&cfg, seed).unwrap();
            let step = cfg.dy / cables as f64;
            for w in sc.feeds.windows(2) {
                prop_assert!((w[1].y - w[0].y - step).abs() < 1e-12);
            }
            for u in &sc.users {
                prop_assert_eq!(u.z, 0.0);
                prop_assert!(u.x.abs() <= cfg.dx / 2.0 && u.y.abs() <= cfg.dy / 2.0);
            }
            for s in &sc.scatterers {
                let on_wall = (s.x.abs() - cfg.dx / 2.0).abs() < 1e-9 || (s.y.abs() - cfg.dy / 2.0).abs() < 1e-9;
                prop_assert!(on_wall);
                prop_assert!((0.0..=cfg.height).contains(&s.z));
            }
            for k in 0..cables {
                for m in 0..slots {
                    for n in 0..users {
                        let r = sc.slot(k, m).distance(&sc.users[n]);
                        let s = sc.elevation_angle(k, m, n).sin();
                        prop_assert!((s * r - cfg.height).abs() <= 1e-12 * cfg.height);
                    }
                }
            }
        }
    }
}
