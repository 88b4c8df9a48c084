use serde::{Deserialize, Serialize};

use super::genes::{decode_designs, GeneBounds};
use crate::dosimetry::Dosimetry;
use crate::error::Result;
use crate::scenario::Scenario;
use crate::seed::evaluation_seed;
use crate::tissue::{simulate, Backend, TissueSystem};

/// Where an evaluation sits in a run; used to derive its seeds.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    pub master_seed: u64,
    pub generation: usize,
    pub individual: usize,
    pub scenarios: &'a [Scenario],
}

impl EvalContext<'_> {
    pub fn seed(&self, scenario: usize, replicate: usize) -> u64 {
        evaluation_seed(self.master_seed, self.generation, self.individual, scenario, replicate)
    }
}

/// Result of scoring one gene vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub fitness: f64,
    /// Injected dose per species, mg/kg.
    pub doses: Vec<f64>,
    /// Mean kill fractions; absent when no simulation ran.
    pub cc_fraction: Option<f64>,
    pub csc_fraction: Option<f64>,
    /// Dose cap exceeded; scored without simulation.
    pub penalized: bool,
    pub scenario_ids: Vec<String>,
    pub seeds: Vec<u64>,
}

/// Scores gene vectors. Implementations must be deterministic in
/// `(genes, ctx)` so evaluations can run in any order.
pub trait Evaluator: Sync {
    fn evaluate(&self, genes: &[f64], ctx: &EvalContext<'_>) -> Result<Evaluation>;
}

/// Dose weighting and simulation settings of the treatment fitness.
#[derive(Debug, Clone, PartialEq)]
pub struct FitnessConfig {
    /// Weight of the kill term.
    pub weight_w: f64,
    /// mg/kg per species mapping dose onto [0, 1].
    pub dose_normalizer: f64,
    /// mg/kg per species above which a design is not simulated.
    pub dose_cap: f64,
    pub replicates: usize,
}

impl Default for FitnessConfig {
    fn default() -> Self {
        Self {
            weight_w: 1.0,
            dose_normalizer: 250.0,
            dose_cap: 55.0,
            replicates: 1,
        }
    }
}

impl FitnessConfig {
    /// Score from kill fractions and doses. `csc` is only counted with two
    /// species.
    pub fn score(&self, doses: &[f64], cc: f64, csc: f64) -> f64 {
        let n = doses.len() as f64;
        let kill = if doses.len() == 2 { cc + csc } else { cc };
        self.weight_w * kill - doses.iter().sum::<f64>() / (n * self.dose_normalizer)
    }

    pub fn penalty(&self, doses: &[f64]) -> f64 {
        -doses.iter().sum::<f64>() / self.dose_normalizer
    }

    pub fn over_cap(&self, doses: &[f64]) -> bool {
        doses.iter().any(|&d| d > self.dose_cap)
    }
}

/// Treatment fitness backed by tissue simulations.
#[derive(Debug, Clone)]
pub struct TissueEvaluator {
    pub dosimetry: Dosimetry<f64>,
    pub backend: Backend,
    pub fitness: FitnessConfig,
    /// Skip ahead once every killable cell is dead.
    pub fast_forward: bool,
}

impl TissueEvaluator {
    pub fn new(dosimetry: Dosimetry<f64>, backend: Backend, fitness: FitnessConfig) -> Self {
        Self {
            dosimetry,
            backend,
            fitness,
            fast_forward: true,
        }
    }
}

impl Evaluator for TissueEvaluator {
    fn evaluate(&self, genes: &[f64], ctx: &EvalContext<'_>) -> Result<Evaluation> {
        let designs = decode_designs(genes)?;
        let doses = designs
            .iter()
            .map(|d| self.dosimetry.design_dose(d))
            .collect::<Result<Vec<_>>>()?;
        if self.fitness.over_cap(&doses) {
            return Ok(Evaluation {
                fitness: self.fitness.penalty(&doses),
                doses,
                cc_fraction: None,
                csc_fraction: None,
                penalized: true,
                scenario_ids: Vec::new(),
                seeds: Vec::new(),
            });
        }
        let replicates = self.fitness.replicates.max(1);
        let (mut cc, mut csc) = (0.0, 0.0);
        let mut seeds = Vec::new();
        for (j, scenario) in ctx.scenarios.iter().enumerate() {
            let system = TissueSystem::build(scenario, &designs, &self.dosimetry)?.with_fast_forward(self.fast_forward);
            for r in 0..replicates {
                let seed = ctx.seed(j, r);
                let sim = simulate(&system, self.backend, seed, None)?;
                cc += sim.outcome.cc_fraction();
                csc += sim.outcome.csc_fraction();
                seeds.push(seed);
            }
        }
        let runs = seeds.len().max(1) as f64;
        let (cc, csc) = (cc / runs, csc / runs);
        Ok(Evaluation {
            fitness: self.fitness.score(&doses, cc, csc),
            doses,
            cc_fraction: Some(cc),
            csc_fraction: Some(csc),
            penalized: false,
            scenario_ids: ctx.scenarios.iter().map(|s| s.id.clone()).collect(),
            seeds,
        })
    }
}

/// Synthetic objective: minus the squared distance to a hidden point,
/// measured in normalised gene coordinates.
#[derive(Debug, Clone)]
pub struct ConvexMock {
    pub bounds: GeneBounds,
    pub target: Vec<f64>,
}

impl ConvexMock {
    pub fn distance(&self, genes: &[f64]) -> f64 {
        self.bounds
            .genes
            .iter()
            .zip(genes.iter().zip(&self.target))
            .map(|(g, (&x, &t))| (g.normalise(x) - g.normalise(t)).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

impl Evaluator for ConvexMock {
    fn evaluate(&self, genes: &[f64], _ctx: &EvalContext<'_>) -> Result<Evaluation> {
        Ok(Evaluation {
            fitness: -self.distance(genes).powi(2),
            doses: Vec::new(),
            cc_fraction: None,
            csc_fraction: None,
            penalized: false,
            scenario_ids: Vec::new(),
            seeds: Vec::new(),
        })
    }
}
