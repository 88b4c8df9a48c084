//! Stochastic particle transport and cell kill along a compartment chain.
//!
//! Per compartment and particle species the state holds free particles
//! (`np_f`), receptor complexes (`c`) and internalised particles (`np_i`);
//! each compartment also has one free-receptor pool `r` shared by all
//! species. Channels, per compartment and species:
//!
//! | channel     | effect                     | propensity        |
//! |-------------|----------------------------|-------------------|
//! | release     | `∅ → np_f` (vessels only)  | `NP₀ / T`         |
//! | hop ±1      | `np_f → np_f'`             | `D / L²` · np_f   |
//! | bind        | `np_f + r → c`             | `kₐ/(N_A V)` · np_f · r |
//! | unbind      | `c → np_f + r`             | `k_d` · c         |
//! | internalise | `c → np_i + r`             | `k_i` · c         |
//!
//! Binding channels only exist in living cells. A cell dies once its
//! internalised count of the matching species reaches the lethal threshold:
//! its receptors are removed and its complexes fall back to free particles.
//! The chain ends reflect, so particles are conserved.

mod engine;
mod tau;
pub mod trajectory;

use serde::{Deserialize, Serialize};

use crate::dosimetry::{Dosimetry, NanoparticleDesign, AVOGADRO};
use crate::error::{invalid, Error, Result};
use crate::scenario::{CompartmentKind, Scenario};

use engine::Engine;
pub use trajectory::{Trajectory, TrajectoryRow};

/// Tau-leap accuracy used when none is given.
pub const DEFAULT_EPSILON: f64 = 0.03;

/// Stochastic rates of one particle species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeciesRates {
    /// Particles per second per vessel compartment.
    pub release: f64,
    /// Per particle per second, in each direction.
    pub hop: f64,
    /// Per particle–receptor pair per second.
    pub bind: f64,
    pub unbind: f64,
    pub internalise: f64,
}

impl SpeciesRates {
    /// Convert a design into per-particle rates for the host's compartment size.
    pub fn from_design(design: &NanoparticleDesign<f64>, dosimetry: &Dosimetry<f64>) -> Result<Self> {
        design.validate()?;
        let host = &dosimetry.host;
        let length = dosimetry.geometry.compartment_length;
        let diffusion_m2 = design.diffusion * 1e-4;
        Ok(Self {
            release: design.extravasated_count / host.circulation_time,
            hop: diffusion_m2 / (length * length),
            bind: design.binding_rate / (AVOGADRO * host.compartment_volume_litres()),
            unbind: design.dissoc_rate,
            internalise: design.internal_rate,
        })
    }

    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(self.hop.is_finite() && self.hop > 0.0) {
            return Err(invalid("hop", "must be positive"));
        }
        if ![self.release, self.bind, self.unbind, self.internalise].into_iter().all(ok) {
            return Err(invalid("rates", "must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Simulation backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Exact direct-method Gillespie.
    Ssa,
    /// Adaptive tau-leaping with the given accuracy.
    Tau(f64),
}

impl Backend {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Backend::Tau(eps) if !(eps > 0.0 && eps <= 0.1) => Err(invalid("epsilon", "must lie in (0, 0.1]")),
            _ => Ok(()),
        }
    }
}

/// A compartment chain with its particle species, ready to simulate.
#[derive(Debug, Clone, PartialEq)]
pub struct TissueSystem {
    kinds: Vec<CompartmentKind>,
    rates: Vec<SpeciesRates>,
    thresholds: Vec<u64>,
    receptors_per_cell: u64,
    t_end: f64,
    initial_free: Vec<u64>,
    fast_forward: bool,
}

impl TissueSystem {
    /// Assemble a system for one scenario and one or two designs. With two
    /// designs the first kills CCs and the second CSCs.
    pub fn build(scenario: &Scenario, designs: &[NanoparticleDesign<f64>], dosimetry: &Dosimetry<f64>) -> Result<Self> {
        if designs.is_empty() || designs.len() > 2 {
            return Err(invalid("designs", format!("expected 1 or 2, got {}", designs.len())));
        }
        let rates = designs
            .iter()
            .map(|d| SpeciesRates::from_design(d, dosimetry))
            .collect::<Result<Vec<_>>>()?;
        let thresholds = designs
            .iter()
            .map(|d| dosimetry.lethal_threshold(d.payload_count))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(
            scenario.compartments.clone(),
            rates,
            thresholds,
            dosimetry.host.receptors_per_cell,
            dosimetry.host.circulation_time,
        )
    }

    /// Assemble a system from raw rates. Chains need not start at a vessel.
    pub fn from_parts(
        kinds: Vec<CompartmentKind>,
        rates: Vec<SpeciesRates>,
        thresholds: Vec<u64>,
        receptors_per_cell: u64,
        t_end: f64,
    ) -> Result<Self> {
        if kinds.is_empty() {
            return Err(invalid("compartments", "chain is empty"));
        }
        if rates.is_empty() || rates.len() > 2 {
            return Err(invalid("species", format!("expected 1 or 2, got {}", rates.len())));
        }
        if thresholds.len() != rates.len() {
            return Err(invalid("thresholds", "one lethal threshold per species required"));
        }
        if thresholds.contains(&0) {
            return Err(invalid("thresholds", "must be >= 1"));
        }
        for r in &rates {
            r.validate()?;
        }
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(invalid("t_end", "must be positive"));
        }
        let n = kinds.len() * rates.len();
        Ok(Self {
            kinds,
            rates,
            thresholds,
            receptors_per_cell,
            t_end,
            initial_free: vec![0; n],
            fast_forward: false,
        })
    }

    pub fn with_t_end(mut self, t_end: f64) -> Result<Self> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(invalid("t_end", "must be positive"));
        }
        self.t_end = t_end;
        Ok(self)
    }

    /// Place `count` free particles of `species` in `compartment` at t = 0.
    pub fn with_initial_free(mut self, species: usize, compartment: usize, count: u64) -> Result<Self> {
        if species >= self.n_species() || compartment >= self.n_compartments() {
            return Err(invalid("initial_free", "species or compartment out of range"));
        }
        let idx = compartment * self.n_species() + species;
        self.initial_free[idx] = count;
        Ok(self)
    }

    pub fn with_thresholds(mut self, thresholds: Vec<u64>) -> Result<Self> {
        if thresholds.len() != self.n_species() || thresholds.contains(&0) {
            return Err(invalid("thresholds", "one positive threshold per species required"));
        }
        self.thresholds = thresholds;
        Ok(self)
    }

    /// Once no cell that could still die remains, draw the outstanding
    /// releases in one go and jump to the end. Kill tallies are unaffected;
    /// the other counts are not evolved further. Ignored when a trajectory
    /// is being recorded.
    pub fn with_fast_forward(mut self, on: bool) -> Self {
        self.fast_forward = on;
        self
    }

    pub fn n_compartments(&self) -> usize {
        self.kinds.len()
    }

    pub fn n_species(&self) -> usize {
        self.rates.len()
    }

    pub fn kinds(&self) -> &[CompartmentKind] {
        &self.kinds
    }

    pub fn rates(&self) -> &[SpeciesRates] {
        &self.rates
    }

    pub fn thresholds(&self) -> &[u64] {
        &self.thresholds
    }

    pub fn receptors_per_cell(&self) -> u64 {
        self.receptors_per_cell
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// Species whose internalised count kills a cell of this kind.
    pub fn killer(&self, kind: CompartmentKind) -> Option<usize> {
        match kind {
            CompartmentKind::Cc => Some(0),
            CompartmentKind::Csc if self.n_species() == 2 => Some(1),
            _ => None,
        }
    }

    pub fn initial_state(&self) -> TissueState {
        let n = self.n_compartments();
        let s = self.n_species();
        let mut injected = vec![0u64; s];
        for (k, &f) in self.initial_free.iter().enumerate() {
            injected[k % s] += f;
        }
        TissueState {
            clock: 0.0,
            n_species: s,
            free: self.initial_free.clone(),
            complex: vec![0; n * s],
            internal: vec![0; n * s],
            receptors: self
                .kinds
                .iter()
                .map(|k| if k.is_cell() { self.receptors_per_cell } else { 0 })
                .collect(),
            alive: self.kinds.iter().map(|k| k.is_cell()).collect(),
            death_time: vec![None; n],
            injected,
        }
    }
}

/// Counts along the chain at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct TissueState {
    pub clock: f64,
    n_species: usize,
    /// Indexed `compartment * n_species + species`.
    pub free: Vec<u64>,
    pub complex: Vec<u64>,
    pub internal: Vec<u64>,
    /// Free receptors per compartment.
    pub receptors: Vec<u64>,
    /// False for dead cells and for non-cell compartments.
    pub alive: Vec<bool>,
    pub death_time: Vec<Option<f64>>,
    /// Particles of each species that have entered the chain.
    pub injected: Vec<u64>,
}

impl TissueState {
    pub fn n_species(&self) -> usize {
        self.n_species
    }

    pub fn n_compartments(&self) -> usize {
        self.receptors.len()
    }

    #[inline]
    pub fn idx(&self, compartment: usize, species: usize) -> usize {
        compartment * self.n_species + species
    }

    pub fn free_at(&self, compartment: usize, species: usize) -> u64 {
        self.free[self.idx(compartment, species)]
    }

    pub fn complex_at(&self, compartment: usize, species: usize) -> u64 {
        self.complex[self.idx(compartment, species)]
    }

    pub fn internal_at(&self, compartment: usize, species: usize) -> u64 {
        self.internal[self.idx(compartment, species)]
    }

    /// Free + bound + internalised particles of one species over the chain.
    pub fn total_particles(&self, species: usize) -> u64 {
        (0..self.n_compartments())
            .map(|c| {
                let i = self.idx(c, species);
                self.free[i] + self.complex[i] + self.internal[i]
            })
            .sum()
    }

    /// Free receptors plus complexes of all species in one compartment.
    pub fn receptor_total(&self, compartment: usize) -> u64 {
        self.receptors[compartment] + (0..self.n_species).map(|s| self.complex_at(compartment, s)).sum::<u64>()
    }
}

/// Kill tallies at the end of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TreatmentOutcome {
    pub cc_total: usize,
    pub cc_killed: usize,
    pub csc_total: usize,
    pub csc_killed: usize,
    /// Final internalised counts, indexed `compartment * n_species + species`.
    pub internalised: Vec<u64>,
    pub injected: Vec<u64>,
}

impl TreatmentOutcome {
    pub fn from_state(state: &TissueState, kinds: &[CompartmentKind]) -> Self {
        let tally = |kind: CompartmentKind| {
            let total = kinds.iter().filter(|&&k| k == kind).count();
            let killed = kinds
                .iter()
                .zip(&state.death_time)
                .filter(|(&k, d)| k == kind && d.is_some())
                .count();
            (total, killed)
        };
        let (cc_total, cc_killed) = tally(CompartmentKind::Cc);
        let (csc_total, csc_killed) = tally(CompartmentKind::Csc);
        Self {
            cc_total,
            cc_killed,
            csc_total,
            csc_killed,
            internalised: state.internal.clone(),
            injected: state.injected.clone(),
        }
    }

    /// Fraction of CCs killed; 1 when there are none.
    pub fn cc_fraction(&self) -> f64 {
        fraction(self.cc_killed, self.cc_total)
    }

    /// Fraction of CSCs killed; 1 when there are none.
    pub fn csc_fraction(&self) -> f64 {
        fraction(self.csc_killed, self.csc_total)
    }
}

fn fraction(killed: usize, total: usize) -> f64 {
    if total == 0 {
        1.0
    } else {
        killed as f64 / total as f64
    }
}

/// Final state and kill tallies of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub state: TissueState,
    pub outcome: TreatmentOutcome,
}

pub fn outcome_metrics(state: &TissueState, system: &TissueSystem) -> TreatmentOutcome {
    TreatmentOutcome::from_state(state, &system.kinds)
}

/// Run `system` to its end time with the chosen backend.
pub fn simulate(system: &TissueSystem, backend: Backend, seed: u64, trajectory: Option<&mut Trajectory>) -> Result<Simulation> {
    backend.validate()?;
    if let Some(t) = &trajectory {
        if !(t.interval() > 0.0) {
            return Err(Error::InvalidConfig("trajectory interval must be positive".into()));
        }
    }
    let mut engine = Engine::new(system, seed, trajectory);
    match backend {
        Backend::Ssa => engine.run_ssa(),
        Backend::Tau(eps) => engine.run_tau(eps),
    }
    let state = engine.finish();
    let outcome = outcome_metrics(&state, system);
    Ok(Simulation { state, outcome })
}

/// Exact Gillespie run.
pub fn simulate_ssa(system: &TissueSystem, seed: u64) -> Simulation {
    simulate(system, Backend::Ssa, seed, None).expect("exact backend has no parameters to reject")
}

/// Tau-leaping run.
pub fn simulate_tau(system: &TissueSystem, seed: u64, epsilon: f64) -> Result<Simulation> {
    simulate(system, Backend::Tau(epsilon), seed, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(ka: f64, np0: f64) -> NanoparticleDesign<f64> {
        NanoparticleDesign::new(1e-6, ka, np0, 5000.0).unwrap()
    }

    #[test]
    fn homogeneous_worst_case_layout() {
        let dos = Dosimetry::standard();
        let sys = TissueSystem::build(&Scenario::worst_case_homogeneous(), &[design(7e5, 6e4)], &dos).unwrap();
        assert_eq!(sys.n_compartments(), 23);
        let s0 = sys.initial_state();
        assert_eq!(s0.receptors[0], 0);
        assert!(s0.receptors[1..].iter().all(|&r| r == 100_000));
        assert_eq!(sys.thresholds(), &[1204]);
        assert_eq!(sys.t_end(), 172_800.0);
        let r = sys.rates()[0];
        assert!((r.hop - 1.0).abs() < 1e-12);
        assert!((r.release - 60_000.0 / 172_800.0).abs() < 1e-12);
        assert!((r.bind - 7e5 / (AVOGADRO * 1e-12)).abs() < 1e-18);
    }

    #[test]
    fn species_count_is_checked() {
        let dos = Dosimetry::standard();
        let sc = Scenario::worst_case_heterogeneous();
        assert!(TissueSystem::build(&sc, &[], &dos).is_err());
        let d = design(1e5, 1e4);
        assert!(TissueSystem::build(&sc, &[d.clone(), d.clone(), d.clone()], &dos).is_err());
        let two = TissueSystem::build(&sc, &[d.clone(), d], &dos).unwrap();
        assert_eq!(two.killer(CompartmentKind::Csc), Some(1));
        assert_eq!(two.killer(CompartmentKind::Cc), Some(0));
        assert_eq!(two.killer(CompartmentKind::Ecm), None);
    }

    #[test]
    fn threshold_count_must_match_species() {
        let rates = SpeciesRates {
            release: 1.0,
            hop: 1.0,
            bind: 0.0,
            unbind: 1.0,
            internalise: 1.0,
        };
        let kinds = vec![CompartmentKind::Vp, CompartmentKind::Cc];
        assert!(TissueSystem::from_parts(kinds.clone(), vec![rates], vec![1, 2], 10, 1.0).is_err());
        assert!(TissueSystem::from_parts(kinds, vec![rates], vec![5], 10, 1.0).is_ok());
    }

    #[test]
    fn zero_over_zero_counts_as_full_kill() {
        let kinds = vec![CompartmentKind::Vp, CompartmentKind::Ecm];
        let sys = TissueSystem::from_parts(
            kinds,
            vec![SpeciesRates {
                release: 0.0,
                hop: 1.0,
                bind: 0.0,
                unbind: 0.0,
                internalise: 0.0,
            }],
            vec![1],
            0,
            10.0,
        )
        .unwrap();
        let out = outcome_metrics(&sys.initial_state(), &sys);
        assert_eq!(out.cc_total, 0);
        assert_eq!(out.cc_fraction(), 1.0);
        assert_eq!(out.csc_fraction(), 1.0);
    }

    #[test]
    fn tau_epsilon_is_validated() {
        assert!(Backend::Tau(0.0).validate().is_err());
        assert!(Backend::Tau(0.2).validate().is_err());
        assert!(Backend::Tau(0.1).validate().is_ok());
    }
}
