use serde::{Deserialize, Serialize};

use crate::dosimetry::NanoparticleDesign;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Log,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gene {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub scale: Scale,
}

impl Gene {
    pub fn new(name: impl Into<String>, lower: f64, upper: f64, scale: Scale) -> Result<Self> {
        let gene = Self {
            name: name.into(),
            lower,
            upper,
            scale,
        };
        gene.validate()?;
        Ok(gene)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower < self.upper) {
            return Err(invalid("gene bounds", format!("{}: need lower < upper", self.name)));
        }
        if self.scale == Scale::Log && self.lower <= 0.0 {
            return Err(invalid("gene bounds", format!("{}: log scale needs lower > 0", self.name)));
        }
        Ok(())
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lower, self.upper)
    }

    pub fn contains(&self, v: f64) -> bool {
        (self.lower..=self.upper).contains(&v)
    }

    /// Position of `v` in `[0, 1]` along the gene's scale.
    pub fn normalise(&self, v: f64) -> f64 {
        match self.scale {
            Scale::Log => (v.ln() - self.lower.ln()) / (self.upper.ln() - self.lower.ln()),
            Scale::Linear => (v - self.lower) / (self.upper - self.lower),
        }
    }

    /// Inverse of [`Gene::normalise`].
    pub fn denormalise(&self, u: f64) -> f64 {
        let v = match self.scale {
            Scale::Log => (self.lower.ln() + u * (self.upper.ln() - self.lower.ln())).exp(),
            Scale::Linear => self.lower + u * (self.upper - self.lower),
        };
        self.clamp(v)
    }
}

/// Ordered gene set of a search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneBounds {
    pub genes: Vec<Gene>,
}

const SPECIES_GENES: [(&str, f64, f64); 4] = [
    ("diffusion", 1e-8, 1e-6),
    ("binding_rate", 1e3, 1e6),
    ("extravasated_count", 1e4, 1e6),
    ("payload_count", 1e2, 1e4),
];

impl GeneBounds {
    pub fn new(genes: Vec<Gene>) -> Result<Self> {
        if genes.is_empty() {
            return Err(invalid("gene bounds", "no genes"));
        }
        for g in &genes {
            g.validate()?;
        }
        Ok(Self { genes })
    }

    /// `(D, kₐ, NP₀, E)` per species, all log-scaled.
    pub fn for_species(n_species: usize) -> Self {
        let mut genes = Vec::new();
        for s in 0..n_species {
            for (name, lo, hi) in SPECIES_GENES {
                let name = if n_species == 1 { name.to_string() } else { format!("{name}_np{}", s + 1) };
                genes.push(Gene {
                    name,
                    lower: lo,
                    upper: hi,
                    scale: Scale::Log,
                });
            }
        }
        Self { genes }
    }

    pub fn homogeneous() -> Self {
        Self::for_species(1)
    }

    pub fn heterogeneous() -> Self {
        Self::for_species(2)
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn contains(&self, genes: &[f64]) -> bool {
        genes.len() == self.len() && self.genes.iter().zip(genes).all(|(g, &v)| g.contains(v))
    }
}

/// Read a gene vector as one design per consecutive `(D, kₐ, NP₀, E)` block.
pub fn decode_designs(genes: &[f64]) -> Result<Vec<NanoparticleDesign<f64>>> {
    if genes.is_empty() || !genes.len().is_multiple_of(4) {
        return Err(invalid("genes", format!("expected a multiple of 4 values, got {}", genes.len())));
    }
    genes
        .chunks(4)
        .map(|g| NanoparticleDesign::new(g[0], g[1], g[2], g[3]))
        .collect()
}

/// Inverse of [`decode_designs`].
pub fn encode_designs(designs: &[NanoparticleDesign<f64>]) -> Vec<f64> {
    designs
        .iter()
        .flat_map(|d| [d.diffusion, d.binding_rate, d.extravasated_count, d.payload_count])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gene_sets_have_the_right_shape() {
        let homo = GeneBounds::homogeneous();
        assert_eq!(homo.len(), 4);
        assert_eq!(homo.genes[0].name, "diffusion");
        let het = GeneBounds::heterogeneous();
        assert_eq!(het.len(), 8);
        assert_eq!(het.genes[4].name, "diffusion_np2");
        assert_eq!(het.genes[7].upper, 1e4);
    }

    #[test]
    fn normalise_round_trips() {
        let g = Gene::new("x", 1e3, 1e6, Scale::Log).unwrap();
        assert!((g.normalise(1e3)).abs() < 1e-12);
        assert!((g.normalise(1e6) - 1.0).abs() < 1e-12);
        assert!((g.normalise(31_622.776_601_683_792) - 0.5).abs() < 1e-12);
        assert!((g.denormalise(g.normalise(4_321.0)) - 4_321.0).abs() < 1e-8);
        let lin = Gene::new("y", -1.0, 3.0, Scale::Linear).unwrap();
        assert_eq!(lin.denormalise(0.25), 0.0);
    }

    #[test]
    fn bad_bounds_rejected() {
        assert!(Gene::new("x", 2.0, 1.0, Scale::Linear).is_err());
        assert!(Gene::new("x", 0.0, 1.0, Scale::Log).is_err());
        assert!(GeneBounds::new(vec![]).is_err());
    }

    #[test]
    fn designs_round_trip() {
        let genes = vec![1e-6, 7e5, 6e4, 5e3, 6.4e-7, 2e5, 1e5, 1e3];
        let designs = decode_designs(&genes).unwrap();
        assert_eq!(designs.len(), 2);
        assert_eq!(designs[1].binding_rate, 2e5);
        assert_eq!(encode_designs(&designs), genes);
        assert!(decode_designs(&genes[..5]).is_err());
    }
}
