//! Evolutionary search over particle and treatment parameters.
//!
//! Parents are picked by tournament, recombined by uniform crossover and
//! perturbed by a bounded multiplicative mutation. Replacement is
//! generational with one elite (the best individual found so far), or
//! steady-state by replacement tournaments. Each generation's evaluations
//! run as a deterministic parallel map: every evaluation derives its own
//! seed from the master seed and its coordinates.

pub mod fitness;
pub mod genes;
pub mod operators;

use std::io::Write;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::seed::{derive_seed, rng_from_seed};

pub use fitness::{ConvexMock, EvalContext, Evaluation, Evaluator, FitnessConfig, TissueEvaluator};
pub use genes::{decode_designs, encode_designs, Gene, GeneBounds, Scale};
pub use operators::{apply_step, crossover, init_population, mutate, tournament_reject, tournament_select};

const OPERATOR_STREAM: u64 = 0x4541;
const SCENARIO_STREAM: u64 = 0x5343;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioMode {
    /// Every generation uses the whole scenario list given to [`run`].
    WorstCase,
    /// Every generation draws `k` scenarios from the pool.
    RandomK,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Replacement {
    Generational,
    SteadyState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    pub population: usize,
    pub tournament: usize,
    pub mutation_prob: f64,
    /// Relative half-width of a mutation step.
    pub mutation_step: f64,
    pub generations: usize,
    pub scenario_mode: ScenarioMode,
    /// Scenarios per generation in `random_k` mode.
    pub k: usize,
    pub replacement: Replacement,
    /// Particle species: 1 (homogeneous) or 2 (heterogeneous).
    pub species: usize,
    /// Weight of the kill term.
    pub weight_w: f64,
    /// mg/kg per species.
    pub dose_normalizer: f64,
    /// mg/kg per species.
    pub dose_cap: f64,
    pub replicates: usize,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            population: 20,
            tournament: 2,
            mutation_prob: 0.2,
            mutation_step: 0.05,
            generations: 100,
            scenario_mode: ScenarioMode::WorstCase,
            k: 5,
            replacement: Replacement::Generational,
            species: 1,
            weight_w: 1.0,
            dose_normalizer: 250.0,
            dose_cap: 55.0,
            replicates: 1,
        }
    }
}

impl EvolveConfig {
    pub fn fitness(&self) -> FitnessConfig {
        FitnessConfig {
            weight_w: self.weight_w,
            dose_normalizer: self.dose_normalizer,
            dose_cap: self.dose_cap,
            replicates: self.replicates,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("evolve: {m}")));
        if self.population < 2 {
            return bad("population must be >= 2");
        }
        if self.tournament < 1 {
            return bad("tournament must be >= 1");
        }
        if self.generations < 1 {
            return bad("generations must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) || !(0.0..1.0).contains(&self.mutation_step) {
            return bad("mutation_prob must lie in [0, 1] and mutation_step in [0, 1)");
        }
        if self.scenario_mode == ScenarioMode::RandomK && self.k == 0 {
            return bad("k must be >= 1");
        }
        if !(1..=2).contains(&self.species) {
            return bad("species must be 1 or 2");
        }
        if !(self.dose_normalizer > 0.0) || !(self.dose_cap > 0.0) {
            return bad("dose_normalizer and dose_cap must be positive");
        }
        Ok(())
    }
}

/// A scored gene vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genes: Vec<f64>,
    pub evaluation: Evaluation,
}

impl Individual {
    pub fn fitness(&self) -> f64 {
        self.evaluation.fitness
    }
}

/// One line of the audit log.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub generation: usize,
    pub individual: usize,
    pub genes: Vec<f64>,
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    /// Best fitness found up to and including this generation.
    pub best: f64,
    pub mean: f64,
    pub min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionRun {
    pub bounds: GeneBounds,
    pub stats: Vec<GenerationStats>,
    pub best: Individual,
    /// Generation in which `best` was evaluated.
    pub best_generation: usize,
    pub records: Vec<EvalRecord>,
}

/// Scenarios used in generation `g`.
fn generation_scenarios(config: &EvolveConfig, pool: &[Scenario], master: u64, g: usize) -> Vec<Scenario> {
    match config.scenario_mode {
        ScenarioMode::WorstCase => pool.to_vec(),
        ScenarioMode::RandomK => {
            let mut rng = rng_from_seed(derive_seed(master, &[SCENARIO_STREAM, g as u64]));
            let k = config.k.min(pool.len());
            let mut picks = sample(&mut rng, pool.len(), k).into_vec();
            picks.sort_unstable();
            picks.into_iter().map(|i| pool[i].clone()).collect()
        }
    }
}

fn evaluate_all<E: Evaluator + ?Sized>(
    evaluator: &E,
    genes: &[Vec<f64>],
    master: u64,
    generation: usize,
    scenarios: &[Scenario],
) -> Result<Vec<Evaluation>> {
    genes
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            let ctx = EvalContext {
                master_seed: master,
                generation,
                individual: i,
                scenarios,
            };
            evaluator.evaluate(g, &ctx).map_err(|e| Error::Evaluation {
                generation,
                individual: i,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Run the search. `pool` is the fixed scenario list in `worst_case` mode
/// and the pool to draw from in `random_k` mode. `on_generation` sees each
/// generation's statistics as they are produced.
pub fn run<E: Evaluator + ?Sized>(
    config: &EvolveConfig,
    bounds: &GeneBounds,
    pool: &[Scenario],
    evaluator: &E,
    master_seed: u64,
    mut on_generation: impl FnMut(&GenerationStats),
) -> Result<EvolutionRun> {
    config.validate()?;
    let mut rng = rng_from_seed(derive_seed(master_seed, &[OPERATOR_STREAM]));
    let mut genes = init_population(bounds, config.population, &mut rng);
    let mut scores: Vec<f64> = Vec::new();
    let mut best: Option<(Individual, usize)> = None;
    let mut records = Vec::new();
    let mut stats = Vec::with_capacity(config.generations);

    for g in 0..config.generations {
        let scenarios = generation_scenarios(config, pool, master_seed, g);
        // steady-state generations after the first score offspring only
        let steady = config.replacement == Replacement::SteadyState && g > 0;
        let candidates = if steady {
            (0..config.population)
                .map(|_| breed(config, bounds, &genes, &scores, &mut rng))
                .collect()
        } else {
            genes.clone()
        };
        let evals = evaluate_all(evaluator, &candidates, master_seed, g, &scenarios)?;

        for (i, (gv, ev)) in candidates.iter().zip(&evals).enumerate() {
            records.push(EvalRecord {
                generation: g,
                individual: i,
                genes: gv.clone(),
                evaluation: ev.clone(),
            });
            if best.as_ref().is_none_or(|(b, _)| ev.fitness > b.fitness()) {
                best = Some((
                    Individual {
                        genes: gv.clone(),
                        evaluation: ev.clone(),
                    },
                    g,
                ));
            }
        }

        if steady {
            for (child, ev) in candidates.into_iter().zip(&evals) {
                let loser = tournament_reject(&scores, config.tournament, &mut rng);
                if ev.fitness > scores[loser] {
                    genes[loser] = child;
                    scores[loser] = ev.fitness;
                }
            }
        } else {
            scores = evals.iter().map(|e| e.fitness).collect();
        }

        let fit: Vec<f64> = evals.iter().map(|e| e.fitness).collect();
        let s = GenerationStats {
            generation: g,
            best: best.as_ref().expect("population evaluated").0.fitness(),
            mean: fit.iter().sum::<f64>() / fit.len() as f64,
            min: fit.iter().copied().fold(f64::INFINITY, f64::min),
        };
        on_generation(&s);
        stats.push(s);

        if g + 1 < config.generations && !steady_next(config) {
            let elite = best.as_ref().expect("population evaluated").0.genes.clone();
            let mut next = Vec::with_capacity(config.population);
            next.push(elite);
            while next.len() < config.population {
                next.push(breed(config, bounds, &genes, &scores, &mut rng));
            }
            genes = next;
        }
    }

    let (best, best_generation) = best.expect("at least one generation");
    Ok(EvolutionRun {
        bounds: bounds.clone(),
        stats,
        best,
        best_generation,
        records,
    })
}

fn steady_next(config: &EvolveConfig) -> bool {
    config.replacement == Replacement::SteadyState
}

fn breed(
    config: &EvolveConfig,
    bounds: &GeneBounds,
    genes: &[Vec<f64>],
    scores: &[f64],
    rng: &mut crate::seed::SimRng,
) -> Vec<f64> {
    let a = tournament_select(scores, config.tournament, rng);
    let b = tournament_select(scores, config.tournament, rng);
    let mut child = crossover(&genes[a], &genes[b], rng);
    mutate(&mut child, bounds, config.mutation_prob, config.mutation_step, rng);
    child
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl EvolutionRun {
    /// `generation,individual,gene_0..gene_n,fitness,dose_np1,dose_np2,cc_frac,csc_frac,penalized`
    pub fn write_run_log<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "generation,individual")?;
        for k in 0..self.bounds.len() {
            write!(out, ",gene_{k}")?;
        }
        writeln!(out, ",fitness,dose_np1,dose_np2,cc_frac,csc_frac,penalized")?;
        for r in &self.records {
            write!(out, "{},{}", r.generation, r.individual)?;
            for g in &r.genes {
                write!(out, ",{g}")?;
            }
            let e = &r.evaluation;
            writeln!(
                out,
                ",{},{},{},{},{},{}",
                e.fitness,
                opt(e.doses.first().copied()),
                opt(e.doses.get(1).copied()),
                opt(e.cc_fraction),
                opt(e.csc_fraction),
                u8::from(e.penalized)
            )?;
        }
        Ok(())
    }

    /// `generation,best,mean,min`
    pub fn write_summary<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "generation,best,mean,min")?;
        for s in &self.stats {
            writeln!(out, "{},{},{},{}", s.generation, s.best, s.mean, s.min)?;
        }
        Ok(())
    }
}
