use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use nanocarrier::evolve::{self, ConvexMock, Evaluator, GeneBounds, GenerationStats, TissueEvaluator};
use nanocarrier::scenario::{depth_stats, extract_scenarios, read_scenarios, write_scenarios, Scenario};
use nanocarrier::seed::derive_seed;
use nanocarrier::tissue::{simulate, Backend, Simulation, TissueSystem, Trajectory};
use nanocarrier::tumour::{TumourSnapshot, TumourState};
use nanocarrier::{Dosimetry, NanoparticleDesign};

use crate::config::{BackendKind, PipelineConfig};
use crate::solution::{SolutionRecord, SpeciesRecord};

/// Resolved settings shared by every subcommand.
pub struct RunContext {
    pub config: PipelineConfig,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum WorstCase {
    Homo,
    Hetero,
}

impl WorstCase {
    fn scenario(self) -> Scenario {
        match self {
            WorstCase::Homo => Scenario::worst_case_homogeneous(),
            WorstCase::Hetero => Scenario::worst_case_heterogeneous(),
        }
    }

    /// Reference designs for the worst case.
    fn designs(self) -> Vec<NanoparticleDesign> {
        let d = |v: [f64; 4]| NanoparticleDesign::new(v[0], v[1], v[2], v[3]).expect("reference design is valid");
        match self {
            WorstCase::Homo => vec![d([1e-6, 7e5, 6e4, 5e3])],
            WorstCase::Hetero => vec![d([9.8e-7, 2.17e5, 9.23e5, 400.0]), d([6.4e-7, 1.17e5, 1.5e5, 2_500.0])],
        }
    }
}

/// Where scenarios come from: a file, or a worst-case chain.
pub struct ScenarioSource {
    pub file: Option<PathBuf>,
    pub worst_case: Option<WorstCase>,
}

impl ScenarioSource {
    fn load(&self, fallback: WorstCase) -> Result<Vec<Scenario>> {
        match &self.file {
            Some(path) => read_scenario_file(path),
            None => Ok(vec![self.worst_case.unwrap_or(fallback).scenario()]),
        }
    }
}

fn read_scenario_file(path: &Path) -> Result<Vec<Scenario>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_scenarios(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

impl RunContext {
    fn prepare_out(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Effective configuration, including the seed, for re-running.
    fn write_echo(&self) -> Result<()> {
        let mut echo = self.config.clone();
        echo.master_seed = Some(self.seed);
        echo.out = None;
        let text = echo.echo()?;
        write_file(&self.path("config.toml"), |w| Ok(w.write_all(text.as_bytes())?))
    }

    fn warn_toxic(&self, doses: &[f64]) {
        for (s, d) in doses.iter().enumerate() {
            if *d > self.config.evolve.dose_cap {
                println!(
                    "warning: NP{} dose {d:.2} mg/kg exceeds the {} mg/kg toxicity limit",
                    s + 1,
                    self.config.evolve.dose_cap
                );
            }
        }
    }
}

pub fn grow(mut ctx: RunContext, target: Option<usize>, oxygen: bool) -> Result<()> {
    ctx.config.tumour.seed = ctx.seed;
    if let Some(t) = target {
        ctx.config.tumour.target_cell_count = t;
    }
    ctx.config.validate()?;
    ctx.prepare_out()?;
    ctx.write_echo()?;
    let target = ctx.config.tumour.target_cell_count;
    let mut state = TumourState::init(ctx.config.tumour.clone())?;
    let grown = state.grow_until(target);
    let snap = &grown.snapshot;
    write_file(&ctx.path("snapshot.txt"), |w| Ok(snap.write(w)?))?;
    if oxygen {
        write_file(&ctx.path("oxygen.txt"), |w| Ok(snap.write_oxygen(w)?))?;
    }
    let counts = snap.type_counts();
    write_file(&ctx.path("type_counts.csv"), |w| {
        writeln!(w, "type,count")?;
        for (kind, n) in counts.iter() {
            writeln!(w, "{},{n}", kind.code())?;
        }
        Ok(())
    })?;
    let summary: Vec<String> = counts.iter().map(|(k, n)| format!("{} {n}", k.code())).collect();
    println!("step {}: {}", snap.step, summary.join(", "));
    println!("live cells {}, CSC fraction {:.4}", counts.live_cells(), counts.csc_fraction());
    if grown.stalled {
        bail!(
            "growth stalled at {} live cells (target {target}); partial snapshot written to {}",
            counts.live_cells(),
            ctx.path("snapshot.txt").display()
        );
    }
    Ok(())
}

pub fn sample(
    mut ctx: RunContext,
    snapshot: Option<PathBuf>,
    worst_case: Option<WorstCase>,
    n: Option<usize>,
    depth: Option<Option<usize>>,
) -> Result<()> {
    if let Some(n) = n {
        ctx.config.scenario.n = n;
    }
    if let Some(d) = depth {
        ctx.config.scenario.depth = d;
    }
    ctx.config.validate()?;
    let scenarios = match (snapshot, worst_case) {
        (_, Some(wc)) => vec![wc.scenario()],
        (Some(path), None) => {
            let f = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
            let snap = TumourSnapshot::read(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))?;
            let stats = depth_stats(&snap)?;
            let depth = ctx.config.scenario.depth.unwrap_or(stats.depth_cells.max(1));
            println!("p95 {} um, depth {depth} cells", stats.p95);
            extract_scenarios(&snap, ctx.config.scenario.n, depth, ctx.seed)?
        }
        (None, None) => bail!("sample needs --snapshot or --worst-case"),
    };
    ctx.prepare_out()?;
    ctx.write_echo()?;
    write_file(&ctx.path("scenarios.txt"), |w| Ok(write_scenarios(w, &scenarios)?))?;
    println!("{} scenarios written to {}", scenarios.len(), ctx.path("scenarios.txt").display());
    Ok(())
}

/// One simulation per (scenario, replicate), seeded from the master seed.
struct Batch {
    systems: Vec<TissueSystem>,
    replicates: usize,
    backend: Backend,
    seed: u64,
}

impl Batch {
    fn new(ctx: &RunContext, scenarios: &[Scenario], designs: &[NanoparticleDesign], replicates: usize) -> Result<Self> {
        let dos = ctx.config.dosimetry()?;
        let systems = scenarios
            .iter()
            .map(|s| Ok(TissueSystem::build(s, designs, &dos)?.with_fast_forward(ctx.config.tissue.fast_forward)))
            .collect::<Result<_>>()?;
        Ok(Self {
            systems,
            replicates: replicates.max(1),
            backend: ctx.config.tissue.backend()?,
            seed: ctx.seed,
        })
    }

    fn run_seed(&self, scenario: usize, replicate: usize) -> u64 {
        derive_seed(self.seed, &[scenario as u64, replicate as u64])
    }

    /// Results in (scenario, replicate) order regardless of thread count.
    fn run(&self, interval: Option<f64>) -> Result<Vec<(Simulation, Option<Trajectory>)>> {
        let jobs: Vec<(usize, usize)> = (0..self.systems.len())
            .flat_map(|j| (0..self.replicates).map(move |r| (j, r)))
            .collect();
        jobs.par_iter()
            .map(|&(j, r)| {
                let mut traj = interval.map(Trajectory::new);
                let sim = simulate(&self.systems[j], self.backend, self.run_seed(j, r), traj.as_mut())?;
                Ok((sim, traj))
            })
            .collect()
    }
}

fn doses(dos: &Dosimetry, designs: &[NanoparticleDesign]) -> Result<Vec<f64>> {
    Ok(designs.iter().map(|d| dos.design_dose(d)).collect::<nanocarrier::Result<_>>()?)
}

#[derive(Serialize)]
struct DesignsFile {
    species: Vec<SpeciesRecord>,
}

pub fn simulate_cmd(
    mut ctx: RunContext,
    source: ScenarioSource,
    designs: Vec<NanoparticleDesign>,
    backend: Option<BackendKind>,
    replicates: usize,
    trajectory: bool,
) -> Result<()> {
    if let Some(b) = backend {
        ctx.config.tissue.backend = b;
    }
    ctx.config.validate()?;
    let scenarios = source.load(WorstCase::Homo)?;
    let designs = if designs.is_empty() {
        source.worst_case.unwrap_or(WorstCase::Homo).designs()
    } else {
        designs
    };
    let dos = ctx.config.dosimetry()?;
    let records = designs
        .iter()
        .map(|d| SpeciesRecord::new(d, &dos))
        .collect::<Result<Vec<_>>>()?;
    for (s, r) in records.iter().enumerate() {
        println!(
            "NP{}: dose {:.3} mg/kg, radius {:.3} nm, K_D {:.3} nM, lethal threshold {}",
            s + 1,
            r.dose_mg_per_kg,
            r.radius_nm,
            r.dissociation_constant_nm,
            r.lethal_threshold
        );
    }
    ctx.warn_toxic(&doses(&dos, &designs)?);

    let batch = Batch::new(&ctx, &scenarios, &designs, replicates)?;
    let interval = trajectory.then_some(ctx.config.tissue.trajectory_interval);
    let results = batch.run(interval)?;

    ctx.prepare_out()?;
    ctx.write_echo()?;
    let designs_toml = toml::to_string(&DesignsFile { species: records })?;
    write_file(&ctx.path("designs.toml"), |w| Ok(w.write_all(designs_toml.as_bytes())?))?;
    write_file(&ctx.path("outcomes.csv"), |w| {
        writeln!(w, "scenario,replicate,seed,cc_total,cc_killed,csc_total,csc_killed,cc_frac,csc_frac")?;
        for (k, (sim, _)) in results.iter().enumerate() {
            let (j, r) = (k / batch.replicates, k % batch.replicates);
            let o = &sim.outcome;
            writeln!(
                w,
                "{},{r},{},{},{},{},{},{},{}",
                scenarios[j].id,
                batch.run_seed(j, r),
                o.cc_total,
                o.cc_killed,
                o.csc_total,
                o.csc_killed,
                o.cc_fraction(),
                o.csc_fraction()
            )?;
        }
        Ok(())
    })?;
    for (k, (_, traj)) in results.iter().enumerate() {
        if let Some(t) = traj {
            let (j, r) = (k / batch.replicates, k % batch.replicates);
            let name = format!("trajectory_{}_{r}.csv", scenarios[j].id);
            write_file(&ctx.path(&name), |w| Ok(t.write_csv(w)?))?;
        }
    }
    let runs = results.len().max(1) as f64;
    let cc: usize = results.iter().map(|(s, _)| s.outcome.cc_killed).sum();
    let cc_total: usize = results.iter().map(|(s, _)| s.outcome.cc_total).sum();
    let csc: usize = results.iter().map(|(s, _)| s.outcome.csc_killed).sum();
    let csc_total: usize = results.iter().map(|(s, _)| s.outcome.csc_total).sum();
    println!(
        "{} runs: CC killed {cc}/{cc_total} (mean {:.2} per run), CSC killed {csc}/{csc_total}",
        results.len(),
        cc as f64 / runs
    );
    Ok(())
}

fn mock_target(species: usize) -> Vec<f64> {
    [3e-7, 2e4, 8e4, 700.0].repeat(species)
}

pub fn optimize(ctx: RunContext, mock: bool) -> Result<()> {
    ctx.config.validate()?;
    let evo = &ctx.config.evolve;
    let bounds = GeneBounds::for_species(evo.species);
    let fallback = if evo.species == 2 { WorstCase::Hetero } else { WorstCase::Homo };
    let pool = ScenarioSource {
        file: ctx.config.scenario.file.clone(),
        worst_case: None,
    }
    .load(fallback)?;
    if pool.is_empty() {
        bail!("scenario pool is empty");
    }
    let dos = ctx.config.dosimetry()?;
    let evaluator: Box<dyn Evaluator> = if mock {
        Box::new(ConvexMock {
            bounds: bounds.clone(),
            target: mock_target(evo.species),
        })
    } else {
        let mut e = TissueEvaluator::new(dos.clone(), ctx.config.tissue.backend()?, evo.fitness());
        e.fast_forward = ctx.config.tissue.fast_forward;
        Box::new(e)
    };
    let report = |s: &GenerationStats| {
        println!("generation {}: best {} mean {} min {}", s.generation, s.best, s.mean, s.min);
    };
    let run = evolve::run(evo, &bounds, &pool, evaluator.as_ref(), ctx.seed, report)?;

    ctx.prepare_out()?;
    ctx.write_echo()?;
    write_file(&ctx.path("scenarios.txt"), |w| Ok(write_scenarios(w, &pool)?))?;
    write_file(&ctx.path("run_log.csv"), |w| Ok(run.write_run_log(w)?))?;
    write_file(&ctx.path("summary.csv"), |w| Ok(run.write_summary(w)?))?;
    let record = SolutionRecord::new(&run.best, run.best_generation, &dos)?;
    let text = toml::to_string(&record)?;
    write_file(&ctx.path("best.toml"), |w| Ok(w.write_all(text.as_bytes())?))?;

    println!("best fitness {} (generation {})", record.fitness, record.generation);
    for (s, sp) in record.species.iter().enumerate() {
        println!(
            "NP{}: D {:e} cm2/s, k_a {:e} 1/(M s), NP0 {:.0}, E {:.0}, dose {:.3} mg/kg, radius {:.3} nm, K_D {:.3} nM, NP_max {}",
            s + 1,
            sp.diffusion,
            sp.binding_rate,
            sp.extravasated_count,
            sp.payload_count,
            sp.dose_mg_per_kg,
            sp.radius_nm,
            sp.dissociation_constant_nm,
            sp.lethal_threshold
        );
    }
    if !mock {
        ctx.warn_toxic(&record.species.iter().map(|s| s.dose_mg_per_kg).collect::<Vec<_>>());
    }
    Ok(())
}

pub fn evaluate(
    ctx: RunContext,
    solution: Option<PathBuf>,
    designs: Vec<NanoparticleDesign>,
    source: ScenarioSource,
    seeds: usize,
) -> Result<()> {
    ctx.config.validate()?;
    let designs = match solution {
        Some(path) => SolutionRecord::read(&path)?.designs()?,
        None if !designs.is_empty() => designs,
        None => bail!("evaluate needs --solution or --design"),
    };
    let fallback = if designs.len() == 2 { WorstCase::Hetero } else { WorstCase::Homo };
    let scenarios = source.load(fallback)?;
    let dos = ctx.config.dosimetry()?;
    ctx.warn_toxic(&doses(&dos, &designs)?);
    let batch = Batch::new(&ctx, &scenarios, &designs, seeds)?;
    let results = batch.run(None)?;

    // per-scenario means over replicates
    let per_scenario: Vec<(f64, f64)> = results
        .chunks(batch.replicates)
        .map(|c| {
            let n = c.len() as f64;
            (
                c.iter().map(|(s, _)| s.outcome.cc_fraction()).sum::<f64>() / n,
                c.iter().map(|(s, _)| s.outcome.csc_fraction()).sum::<f64>() / n,
            )
        })
        .collect();

    ctx.prepare_out()?;
    ctx.write_echo()?;
    write_file(&ctx.path("evaluation.csv"), |w| {
        writeln!(w, "scenario,replicate,seed,cc_frac,csc_frac")?;
        for (k, (sim, _)) in results.iter().enumerate() {
            let (j, r) = (k / batch.replicates, k % batch.replicates);
            writeln!(
                w,
                "{},{r},{},{},{}",
                scenarios[j].id,
                batch.run_seed(j, r),
                sim.outcome.cc_fraction(),
                sim.outcome.csc_fraction()
            )?;
        }
        Ok(())
    })?;
    let n = per_scenario.len();
    let mean = |f: fn(&(f64, f64)) -> f64| per_scenario.iter().map(f).sum::<f64>() / n as f64;
    let share = |f: fn(&(f64, f64)) -> f64| per_scenario.iter().filter(|p| f(p) >= 0.99).count() as f64 / n as f64;
    write_file(&ctx.path("evaluation_summary.csv"), |w| {
        writeln!(w, "scenarios,replicates,mean_cc_frac,mean_csc_frac,cc_kill99_share,csc_kill99_share")?;
        if n > 0 {
            writeln!(
                w,
                "{n},{},{},{},{},{}",
                batch.replicates,
                mean(|p| p.0),
                mean(|p| p.1),
                share(|p| p.0),
                share(|p| p.1)
            )?;
        }
        Ok(())
    })?;
    if n == 0 {
        println!("no scenarios to evaluate");
    } else {
        println!(
            "{n} scenarios x {} seeds: mean CC kill {:.4}, mean CSC kill {:.4}; scenarios with >= 99% CC kill {:.2}",
            batch.replicates,
            mean(|p| p.0),
            mean(|p| p.1),
            share(|p| p.0)
        );
    }
    Ok(())
}
