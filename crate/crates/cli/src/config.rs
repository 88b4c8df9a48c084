//! Sectioned TOML pipeline configuration. Every key is optional; an empty
//! file describes the homogeneous worst-case optimisation.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use nanocarrier::evolve::EvolveConfig;
use nanocarrier::tissue::Backend;
use nanocarrier::tumour::TumourConfig;
use nanocarrier::{Dosimetry, DrugModel, HostModel, PenetrationGeometry};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Seed for everything stochastic; `--seed` takes precedence.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    /// Output directory; `--out` takes precedence.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub tumour: TumourConfig,
    pub host: HostModel,
    pub drug: DrugModel,
    pub geometry: PenetrationGeometry,
    pub scenario: ScenarioSection,
    pub tissue: TissueSection,
    pub evolve: EvolveConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    /// Chains cut by `sample`.
    pub n: usize,
    /// Chain depth in cells; absent means `ceil(p95 / 10 μm)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    /// Scenario pool for `optimize`; absent means the worst case matching
    /// `evolve.species`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            n: 100,
            depth: None,
            file: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Ssa,
    Tau,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TissueSection {
    pub backend: BackendKind,
    /// Tau-leap accuracy.
    pub epsilon: f64,
    /// Stop simulating once every killable cell is dead.
    pub fast_forward: bool,
    /// Trajectory sampling interval, s.
    pub trajectory_interval: f64,
}

impl Default for TissueSection {
    fn default() -> Self {
        Self {
            backend: BackendKind::Tau,
            epsilon: nanocarrier::tissue::DEFAULT_EPSILON,
            fast_forward: true,
            trajectory_interval: nanocarrier::tissue::trajectory::DEFAULT_INTERVAL,
        }
    }
}

impl TissueSection {
    pub fn backend(&self) -> Result<Backend> {
        let b = match self.backend {
            BackendKind::Ssa => Backend::Ssa,
            BackendKind::Tau => Backend::Tau(self.epsilon),
        };
        b.validate()?;
        if !(self.trajectory_interval > 0.0 && self.trajectory_interval.is_finite()) {
            bail!("tissue.trajectory_interval must be positive");
        }
        Ok(b)
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.tumour.validate()?;
        self.evolve.validate()?;
        self.dosimetry()?;
        self.tissue.backend()?;
        if self.scenario.depth == Some(0) {
            bail!("scenario.depth must be at least 1");
        }
        Ok(())
    }

    pub fn dosimetry(&self) -> Result<Dosimetry> {
        Ok(Dosimetry::new(self.drug.clone(), self.host.clone(), self.geometry)?)
    }

    /// The configuration as it was effectively used.
    pub fn echo(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        assert_eq!(PipelineConfig::parse("").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn reference_file_matches_defaults() {
        let text = include_str!("../../../config/reference.toml");
        assert_eq!(PipelineConfig::parse(text).unwrap(), PipelineConfig::default());
    }

    #[test]
    fn echo_round_trips() {
        let mut c = PipelineConfig {
            master_seed: Some(17),
            ..PipelineConfig::default()
        };
        c.scenario.depth = Some(12);
        c.tissue.backend = BackendKind::Ssa;
        c.tumour.vp_initial_positions = vec![[1, 2, 3]];
        c.evolve.generations = 3;
        assert_eq!(PipelineConfig::parse(&c.echo().unwrap()).unwrap(), c);
    }

    #[test]
    fn unknown_and_invalid_keys_rejected() {
        assert!(PipelineConfig::parse("[evolve]\npopulaton = 3").is_err());
        assert!(PipelineConfig::parse("[tissue]\nepsilon = 0.5").is_err());
        assert!(PipelineConfig::parse("[host]\npid_fraction = 2.0").is_err());
        assert!(PipelineConfig::parse("[scenario]\ndepth = 0").is_err());
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let c = PipelineConfig::parse("[host]\nweight = 25.0\n[evolve]\nspecies = 2").unwrap();
        assert_eq!(c.host.weight, 25.0);
        assert_eq!(c.host.receptors_per_cell, 100_000);
        assert_eq!(c.evolve.species, 2);
        assert_eq!(c.evolve.population, 20);
    }
}
