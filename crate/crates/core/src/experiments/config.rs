use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{PhysConfig, ScenarioConfig};

/// Default minimum rate, bits/s/Hz.
pub const DEFAULT_R_MIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Region {
    dx: f64,
    dy: f64,
    height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Cables {
    count: usize,
    slots: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Count {
    count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Rng {
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Qos {
    r_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    region: Region,
    cables: Cables,
    users: Count,
    scatterers: Count,
    phys: PhysConfig,
    rng: Rng,
    qos: Qos,
}

impl Default for ConfigFile {
    fn default() -> Self {
        ExperimentConfig::default().to_file()
    }
}

impl Default for Region {
    fn default() -> Self {
        ConfigFile::default().region
    }
}

impl Default for Cables {
    fn default() -> Self {
        ConfigFile::default().cables
    }
}

impl Default for Qos {
    fn default() -> Self {
        Self {
            r_min: DEFAULT_R_MIN,
        }
    }
}

/// Everything one experiment needs: the deployment, the base seed and the
/// QoS target.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub seed: u64,
    pub r_min: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            seed: 0,
            r_min: DEFAULT_R_MIN,
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates a TOML document. Missing keys take defaults;
    /// unknown keys are rejected.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text)?;
        let cfg = Self {
            scenario: ScenarioConfig {
                dx: file.region.dx,
                dy: file.region.dy,
                height: file.region.height,
                cables: file.cables.count,
                slots: file.cables.slots,
                users: file.users.count,
                scatterers: file.scatterers.count,
                phys: file.phys,
            },
            seed: file.rng.seed,
            r_min: file.qos.r_min,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if !(self.r_min.is_finite() && self.r_min >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "qos.r_min must be nonnegative, got {}",
                self.r_min
            )));
        }
        Ok(())
    }

    fn to_file(&self) -> ConfigFile {
        let s = &self.scenario;
        ConfigFile {
            region: Region {
                dx: s.dx,
                dy: s.dy,
                height: s.height,
            },
            cables: Cables {
                count: s.cables,
                slots: s.slots,
            },
            users: Count { count: s.users },
            scatterers: Count {
                count: s.scatterers,
            },
            phys: s.phys,
            rng: Rng { seed: self.seed },
            qos: Qos { r_min: self.r_min },
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_file()).expect("config serializes")
    }
}
