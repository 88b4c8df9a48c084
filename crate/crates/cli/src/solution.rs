//! Best-solution record: genes plus the derived particle properties.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use nanocarrier::evolve::{decode_designs, Individual};
use nanocarrier::{Dosimetry, NanoparticleDesign};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionRecord {
    pub fitness: f64,
    pub generation: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cc_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csc_fraction: Option<f64>,
    pub genes: Vec<f64>,
    pub species: Vec<SpeciesRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesRecord {
    /// cm²/s
    pub diffusion: f64,
    /// 1/(M·s)
    pub binding_rate: f64,
    pub extravasated_count: f64,
    pub payload_count: f64,
    pub dose_mg_per_kg: f64,
    pub radius_nm: f64,
    pub dissociation_constant_nm: f64,
    pub lethal_threshold: u64,
}

impl SpeciesRecord {
    pub fn new(d: &NanoparticleDesign, dosimetry: &Dosimetry) -> Result<Self> {
        Ok(Self {
            diffusion: d.diffusion,
            binding_rate: d.binding_rate,
            extravasated_count: d.extravasated_count,
            payload_count: d.payload_count,
            dose_mg_per_kg: dosimetry.design_dose(d)?,
            radius_nm: d.radius_nm(),
            dissociation_constant_nm: d.dissociation_constant_nm(),
            lethal_threshold: dosimetry.lethal_threshold(d.payload_count)?,
        })
    }
}

impl SolutionRecord {
    pub fn new(best: &Individual, generation: usize, dosimetry: &Dosimetry) -> Result<Self> {
        let species = decode_designs(&best.genes)?
            .iter()
            .map(|d| SpeciesRecord::new(d, dosimetry))
            .collect::<Result<_>>()?;
        Ok(Self {
            fitness: best.fitness(),
            generation,
            cc_fraction: best.evaluation.cc_fraction,
            csc_fraction: best.evaluation.csc_fraction,
            genes: best.genes.clone(),
            species,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing solution {}", path.display()))
    }

    pub fn designs(&self) -> Result<Vec<NanoparticleDesign>> {
        Ok(decode_designs(&self.genes)?)
    }
}
