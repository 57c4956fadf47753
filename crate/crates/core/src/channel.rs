//! Two-stage propagation: guided transmission from the feed to a slot, then
//! radiation from the slot to a user over the direct path and over
//! single-bounce wall reflections.

use std::io::Write;

use num_complex::Complex64;

use crate::error::Result;
use crate::geometry::elevation_sine;
use crate::scenario::Scenario;

/// Which physical effects `compose_channels` includes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelFlags {
    pub include_nlos: bool,
    pub include_cable_attenuation: bool,
}

impl ChannelFlags {
    pub const FULL: Self = Self {
        include_nlos: true,
        include_cable_attenuation: true,
    };
    pub const LOS_ONLY: Self = Self {
        include_nlos: false,
        include_cable_attenuation: true,
    };
    pub const NO_ATTENUATION: Self = Self {
        include_nlos: true,
        include_cable_attenuation: false,
    };
    /// Free-space LoS with a lossless cable; the closed-form single-slot model.
    pub const IDEAL: Self = Self {
        include_nlos: false,
        include_cable_attenuation: false,
    };
}

impl Default for ChannelFlags {
    fn default() -> Self {
        Self::FULL
    }
}

/// Amplitude factor `A_{k,m}` of the guided path.
pub fn cable_amplitude(sc: &Scenario, k: usize, m: usize) -> f64 {
    10f64.powf(-sc.constants.kappa * sc.cable_distance(k, m) / 20.0)
}

/// Guided phase `(2π/λ)·√ε_r·|ψ_{k,0} − ψ_{k,m}|`, radians, not reduced.
pub fn cable_phase(sc: &Scenario, k: usize, m: usize) -> f64 {
    sc.constants.wavenumber() * sc.constants.eps_r.sqrt() * sc.cable_distance(k, m)
}

/// Feed-to-slot channel of cable `k`, slot `m`.
pub fn cable_channel(k: usize, m: usize, sc: &Scenario) -> Complex64 {
    Complex64::from_polar(cable_amplitude(sc, k, m), -cable_phase(sc, k, m))
}

/// Direct slot-to-user radiation, `η e^{-j2πr/λ} sin(φ) / r`.
pub fn radiated_los(k: usize, m: usize, n: usize, sc: &Scenario) -> Complex64 {
    let slot = sc.slot(k, m);
    let user = &sc.users[n];
    let r = slot.distance(user);
    let c = &sc.constants;
    Complex64::from_polar(
        c.eta() * elevation_sine(slot, user) / r,
        -c.wavenumber() * r,
    )
}

/// Slot-to-user radiation summed over single-bounce scatterer paths.
///
/// The slot-side angle for scatterer `ℓ` uses the height drop `d − z_ℓ`,
/// so a scatterer at cable height contributes nothing.
pub fn scattered_channel(k: usize, m: usize, n: usize, sc: &Scenario) -> Complex64 {
    let slot = sc.slot(k, m);
    let user = &sc.users[n];
    let c = &sc.constants;
    let kw = c.wavenumber();
    sc.scatterers
        .iter()
        .zip(&sc.scat_gains)
        .map(|(scat, gain)| {
            let r1 = scat.distance(slot);
            let r2 = user.distance(scat);
            let term =
                Complex64::from_polar(elevation_sine(slot, scat) / (r1 * r2), -kw * (r1 + r2));
            gain * term
        })
        .sum::<Complex64>()
        * c.eta()
}

/// Per-slot channel gains for one realization, indexed `[k][m][n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    cables: usize,
    slots: usize,
    users: usize,
    los: Vec<Complex64>,
    nlos: Vec<Complex64>,
    total: Vec<Complex64>,
    pub flags: ChannelFlags,
}

impl ChannelSet {
    /// Builds a channel set from explicit per-slot gains, `[k][m][n]`
    /// flattened with `n` fastest. NLoS gains are taken as zero.
    pub fn from_gains(cables: usize, slots: usize, users: usize, gains: Vec<Complex64>) -> Self {
        assert_eq!(
            gains.len(),
            cables * slots * users,
            "gain tensor has wrong length"
        );
        Self {
            cables,
            slots,
            users,
            nlos: vec![Complex64::new(0.0, 0.0); gains.len()],
            total: gains.clone(),
            los: gains,
            flags: ChannelFlags::LOS_ONLY,
        }
    }

    fn idx(&self, k: usize, m: usize, n: usize) -> usize {
        (k * self.slots + m) * self.users + n
    }

    pub fn num_cables(&self) -> usize {
        self.cables
    }

    pub fn num_slots(&self) -> usize {
        self.slots
    }

    pub fn num_users(&self) -> usize {
        self.users
    }

    pub fn h_los(&self, k: usize, m: usize, n: usize) -> Complex64 {
        self.los[self.idx(k, m, n)]
    }

    pub fn h_nlos(&self, k: usize, m: usize, n: usize) -> Complex64 {
        self.nlos[self.idx(k, m, n)]
    }

    /// Composite gain `h_{k,m,n}`.
    pub fn h(&self, k: usize, m: usize, n: usize) -> Complex64 {
        self.total[self.idx(k, m, n)]
    }

    /// Composite gains of slot `(k, m)` towards every user.
    pub fn slot_row(&self, k: usize, m: usize) -> &[Complex64] {
        let start = self.idx(k, m, 0);
        &self.total[start..start + self.users]
    }

    /// Writes `k,m,n,re,im,abs` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "m", "n", "re", "im", "abs"])?;
        for k in 0..self.cables {
            for m in 0..self.slots {
                for n in 0..self.users {
                    let h = self.h(k, m, n);
                    w.write_record(&[
                        k.to_string(),
                        m.to_string(),
                        n.to_string(),
                        h.re.to_string(),
                        h.im.to_string(),
                        h.norm().to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluates every `(k, m, n)` gain under `flags`.
pub fn compose_channels(sc: &Scenario, flags: ChannelFlags) -> ChannelSet {
    let (cables, slots, users) = (sc.num_cables(), sc.num_slots(), sc.num_users());
    let len = cables * slots * users;
    let mut los = Vec::with_capacity(len);
    let mut nlos = Vec::with_capacity(len);
    for k in 0..cables {
        for m in 0..slots {
            let amp = if flags.include_cable_attenuation {
                cable_amplitude(sc, k, m)
            } else {
                1.0
            };
            let cable = Complex64::from_polar(amp, -cable_phase(sc, k, m));
            for n in 0..users {
                los.push(cable * radiated_los(k, m, n, sc));
                nlos.push(if flags.include_nlos && !sc.scatterers.is_empty() {
                    cable * scattered_channel(k, m, n, sc)
                } else {
                    Complex64::new(0.0, 0.0)
                });
            }
        }
    }
    let total = los.iter().zip(&nlos).map(|(a, b)| a + b).collect();
    ChannelSet {
        cables,
        slots,
        users,
        los,
        nlos,
        total,
        flags,
    }
}

/// `Σ_m β_{k,m} h_{k,m,n}` for one cable and user.
pub fn effective_channel(cs: &ChannelSet, beta: &[bool], k: usize, n: usize) -> Complex64 {
    beta.iter()
        .enumerate()
        .filter(|(_, on)| **on)
        .map(|(m, _)| cs.h(k, m, n))
        .sum()
}
