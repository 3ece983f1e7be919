//! Experiment configuration: one TOML file with `plant`, `sim`, `model`,
//! `mpc` and `paths` sections.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identify::RlsConfig;
use crate::mpc::MpcConfig;
use crate::regressors::{RegressorSpec, Structure};
use crate::sim::SimConfig;
use crate::thermal::ZoneParams;

/// Text of the built-in configuration.
pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Zone model used by `identify` and `mpc-run`.
    pub structure: Structure,
    /// Structures compared by `compare` when no `--spec` is given.
    #[serde(default = "default_compare")]
    pub compare: Vec<Structure>,
    #[serde(default)]
    pub rls: RlsConfig,
}

fn default_compare() -> Vec<Structure> {
    vec![Structure::Lrm, Structure::NrmMi]
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub out_dir: Option<PathBuf>,
    /// Dataset to read instead of simulating.
    pub dataset: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: ZoneParams,
    pub sim: SimConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub mpc: MpcConfig,
    #[serde(default)]
    pub paths: PathsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_CONFIG).expect("built-in configuration is valid")
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn n_neighbors(&self) -> usize {
        self.plant.n_neighbors()
    }

    pub fn spec(&self, structure: Structure) -> Result<RegressorSpec> {
        RegressorSpec::new(structure, self.n_neighbors())
    }

    /// Section-level checks plus cross-section consistency.
    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.sim.validate()?;
        self.model.rls.validate()?;
        self.mpc.validate()?;
        if self.sim.disturbances.n_neighbors() != self.n_neighbors() {
            return Err(Error::Config(format!(
                "sim.disturbances define {} neighbours but plant.separators has {}",
                self.sim.disturbances.n_neighbors(),
                self.n_neighbors()
            )));
        }
        if (self.sim.epsilon - self.mpc.t_sam).abs() > 1e-9 * self.mpc.t_sam {
            return Err(Error::Config(format!(
                "sim.epsilon ({}) and mpc.t_sam ({}) must agree",
                self.sim.epsilon, self.mpc.t_sam
            )));
        }
        if self.model.structure == Structure::NrmFiRh {
            return Err(Error::Config(
                "model.structure must be a zone model; NRM_FI_RH is trained alongside it".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_validate() {
        let c = ExperimentConfig::default();
        assert_eq!(c.n_neighbors(), 1);
        assert_eq!(c.mpc.n_hor().unwrap(), 60);
    }

    #[test]
    fn missing_key_is_named() {
        let text = DEFAULT_CONFIG.replace("c_r =", "# c_r =");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("c_r"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn roundtrip_through_toml() {
        let c = ExperimentConfig::default();
        let again = ExperimentConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn epsilon_mismatch_rejected() {
        let mut c = ExperimentConfig::default();
        c.mpc.t_sam = 0.5;
        c.mpc.t_opt = 1.0;
        assert!(c.validate().is_err());
    }
}
