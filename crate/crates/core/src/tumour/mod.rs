//! Lattice tumour growth.
//!
//! A cellular automaton on a cubic voxel lattice (one voxel per 10 μm cell).
//! Vessel points (VPs) secrete oxygen and sprout along lattice axes; cancer
//! cells (CCs) and cancer stem cells (CSCs) consume it, divide into free face
//! neighbours when oxygenated, and respond to hypoxia: CCs turn necrotic,
//! CSCs go dormant.

pub mod division;
pub mod oxygen;
pub mod snapshot;

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{rng_from_seed, SimRng};
use division::DivisionRules;
use oxygen::{OxygenField, OxygenParams, VoxelRole};

pub use snapshot::TumourSnapshot;

/// Integer lattice coordinate.
pub type Voxel = [i32; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgentType {
    Cc,
    Csc,
    Vp,
    Necrotic,
}

impl AgentType {
    pub const ALL: [AgentType; 4] = [AgentType::Cc, AgentType::Csc, AgentType::Vp, AgentType::Necrotic];

    /// Token used in snapshot files.
    pub fn code(self) -> &'static str {
        match self {
            AgentType::Cc => "CC",
            AgentType::Csc => "CSC",
            AgentType::Vp => "VP",
            AgentType::Necrotic => "NEC",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }

    pub fn is_live_cell(self) -> bool {
        matches!(self, AgentType::Cc | AgentType::Csc)
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for AgentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// One of the six lattice axis directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    PlusX,
    MinusX,
    PlusY,
    MinusY,
    PlusZ,
    MinusZ,
}

impl Direction {
    pub const ALL: [Direction; 6] = [
        Direction::PlusX,
        Direction::MinusX,
        Direction::PlusY,
        Direction::MinusY,
        Direction::PlusZ,
        Direction::MinusZ,
    ];

    pub fn offset(self) -> Voxel {
        match self {
            Direction::PlusX => [1, 0, 0],
            Direction::MinusX => [-1, 0, 0],
            Direction::PlusY => [0, 1, 0],
            Direction::MinusY => [0, -1, 0],
            Direction::PlusZ => [0, 0, 1],
            Direction::MinusZ => [0, 0, -1],
        }
    }

    pub fn axis(self) -> usize {
        self as usize / 2
    }

    pub fn perpendicular(self) -> [Direction; 4] {
        let mut out = [Direction::PlusX; 4];
        let mut n = 0;
        for d in Self::ALL {
            if d.axis() != self.axis() {
                out[n] = d;
                n += 1;
            }
        }
        out
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::ALL[rng.random_range(0..6)]
    }

    pub fn step(self, from: Voxel) -> Voxel {
        let o = self.offset();
        [from[0] + o[0], from[1] + o[1], from[2] + o[2]]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: u64,
    pub kind: AgentType,
    pub pos: Voxel,
    /// Only meaningful for CSCs.
    pub dormant: bool,
    /// Sprouting direction, VPs only.
    pub vp_direction: Option<Direction>,
    /// Whether this VP is an active sprout tip.
    pub vp_tip: bool,
}

/// Tumour growth parameters. Oxygen quantities are in arbitrary concentration
/// units; distances in voxels, times in steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TumourConfig {
    pub lattice_dims: [usize; 3],
    pub dediff_prob: f64,
    pub csc_asym_prob: f64,
    pub csc_sym_two_csc_prob: f64,
    /// Initial vessel points. Empty means "the default ring around the centre".
    pub vp_initial_positions: Vec<Voxel>,
    pub vp_max_count: usize,
    /// Chance per extension that a tip also sprouts a perpendicular branch.
    pub vp_branch_freq: f64,
    /// Chance per step that a tip attempts to extend.
    pub vp_growth_prob: f64,
    pub o2_secretion: f64,
    pub o2_decay: f64,
    pub o2_diffusion: f64,
    /// Consumption rate of live cells.
    pub o2_uptake: f64,
    pub o2_sweeps: usize,
    pub o2_prolif_threshold: f64,
    pub o2_necrosis_threshold: f64,
    pub division_prob_per_step: f64,
    pub target_cell_count: usize,
    /// Give up after this many steps without a division or vessel growth.
    pub stall_patience: usize,
    pub max_steps: usize,
    pub seed: u64,
}

impl Default for TumourConfig {
    fn default() -> Self {
        Self {
            lattice_dims: [80, 80, 80],
            dediff_prob: 0.005,
            csc_asym_prob: 0.99,
            csc_sym_two_csc_prob: 0.99,
            vp_initial_positions: Vec::new(),
            vp_max_count: 650,
            vp_branch_freq: 0.1,
            vp_growth_prob: 0.25,
            o2_secretion: 1.0,
            o2_decay: 0.002,
            o2_diffusion: 1.0,
            o2_uptake: 0.15,
            o2_sweeps: 20,
            o2_prolif_threshold: 0.02,
            o2_necrosis_threshold: 0.015,
            division_prob_per_step: 0.2,
            target_cell_count: 50_000,
            stall_patience: 50,
            max_steps: 5_000,
            seed: 0,
        }
    }
}

impl TumourConfig {
    pub fn division_rules(&self) -> DivisionRules {
        DivisionRules {
            dediff_prob: self.dediff_prob,
            csc_asym_prob: self.csc_asym_prob,
            csc_sym_two_csc_prob: self.csc_sym_two_csc_prob,
        }
    }

    pub fn oxygen_params(&self) -> OxygenParams<f64> {
        OxygenParams {
            diffusion: self.o2_diffusion,
            decay: self.o2_decay,
            secretion: self.o2_secretion,
            uptake: self.o2_uptake,
        }
    }

    pub fn centre(&self) -> Voxel {
        let [x, y, z] = self.lattice_dims;
        [(x / 2) as i32, (y / 2) as i32, (z / 2) as i32]
    }

    /// Initial vessel points: the configured list, or four points on a ring
    /// of radius 4 around the centre.
    pub fn initial_vessels(&self) -> Vec<Voxel> {
        if !self.vp_initial_positions.is_empty() {
            return self.vp_initial_positions.clone();
        }
        let [cx, cy, cz] = self.centre();
        vec![[cx + 4, cy, cz], [cx - 4, cy, cz], [cx, cy + 4, cz], [cx, cy - 4, cz]]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("tumour: {m}")));
        if self.lattice_dims.iter().any(|&d| d == 0 || d > i32::MAX as usize / 2) {
            return bad("lattice dimensions must be positive");
        }
        let probs = [
            self.dediff_prob,
            self.csc_asym_prob,
            self.csc_sym_two_csc_prob,
            self.vp_branch_freq,
            self.vp_growth_prob,
            self.division_prob_per_step,
        ];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("probabilities must lie in [0, 1]");
        }
        if self.o2_necrosis_threshold >= self.o2_prolif_threshold {
            return bad("o2_necrosis_threshold must be below o2_prolif_threshold");
        }
        if self.o2_diffusion < 0.0 || self.o2_decay < 0.0 || self.o2_secretion < 0.0 || self.o2_uptake < 0.0 {
            return bad("oxygen coefficients must be non-negative");
        }
        if self.target_cell_count == 0 {
            return bad("target_cell_count must be >= 1");
        }
        Ok(())
    }
}

/// Tally of agents by type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TypeCounts([usize; 4]);

impl TypeCounts {
    pub fn from_agents<'a>(agents: impl IntoIterator<Item = &'a Agent>) -> Self {
        let mut counts = [0; 4];
        for a in agents {
            counts[a.kind.slot()] += 1;
        }
        Self(counts)
    }

    pub fn get(&self, kind: AgentType) -> usize {
        self.0[kind.slot()]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn live_cells(&self) -> usize {
        self.get(AgentType::Cc) + self.get(AgentType::Csc)
    }

    /// CSCs as a fraction of live cells (CC + CSC).
    pub fn csc_fraction(&self) -> f64 {
        match self.live_cells() {
            0 => 0.0,
            n => self.get(AgentType::Csc) as f64 / n as f64,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (AgentType, usize)> + '_ {
        AgentType::ALL.into_iter().map(|k| (k, self.get(k)))
    }
}

/// What happened during one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepReport {
    pub divisions: usize,
    pub necrotic_conversions: usize,
    pub vessels_added: usize,
    /// Oxygenated cells that could not divide for lack of a free neighbour.
    pub blocked: usize,
    /// No cell was able to place a daughter this step.
    pub stalled: bool,
}

/// Result of growing towards a target size.
#[derive(Debug, Clone)]
pub struct GrowOutcome {
    pub snapshot: TumourSnapshot,
    pub stalled: bool,
}

const EMPTY: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct TumourState {
    config: TumourConfig,
    rules: DivisionRules,
    step: u64,
    agents: Vec<Agent>,
    occupancy: Vec<u32>,
    roles: Vec<VoxelRole>,
    oxygen: OxygenField<f64>,
    counts: TypeCounts,
    rng: SimRng,
}

impl TumourState {
    /// One CC at the lattice centre plus the initial vessel points, with the
    /// oxygen field at steady state.
    pub fn init(config: TumourConfig) -> Result<Self> {
        config.validate()?;
        let dims = config.lattice_dims;
        let n = dims.iter().product();
        let mut state = Self {
            rules: config.division_rules(),
            step: 0,
            agents: Vec::new(),
            occupancy: vec![EMPTY; n],
            roles: vec![VoxelRole::Inert; n],
            oxygen: OxygenField::zeros(dims),
            counts: TypeCounts::default(),
            rng: rng_from_seed(config.seed),
            config,
        };
        let centre = state.config.centre();
        state.place(AgentType::Cc, centre, None)?;
        for v in state.config.initial_vessels() {
            let dir = Direction::random(&mut state.rng);
            state.place(AgentType::Vp, v, Some(dir))?;
        }
        let params = state.config.oxygen_params();
        state.oxygen.solve_steady(&state.roles, &params, 1e-9, 20_000);
        Ok(state)
    }

    pub fn config(&self) -> &TumourConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn oxygen(&self) -> &OxygenField<f64> {
        &self.oxygen
    }

    pub fn type_counts(&self) -> TypeCounts {
        self.counts
    }

    pub fn live_cells(&self) -> usize {
        self.counts.live_cells()
    }

    pub fn snapshot(&self) -> TumourSnapshot {
        TumourSnapshot {
            step: self.step,
            dims: self.config.lattice_dims,
            agents: self.agents.clone(),
            oxygen: Some(self.oxygen.clone()),
        }
    }

    fn index(&self, v: Voxel) -> Option<usize> {
        let [nx, ny, nz] = self.config.lattice_dims;
        let inside = |c: i32, n: usize| c >= 0 && (c as usize) < n;
        (inside(v[0], nx) && inside(v[1], ny) && inside(v[2], nz))
            .then(|| (v[0] as usize * ny + v[1] as usize) * nz + v[2] as usize)
    }

    fn occupant(&self, v: Voxel) -> Option<Option<usize>> {
        self.index(v)
            .map(|i| (self.occupancy[i] != EMPTY).then_some(self.occupancy[i] as usize))
    }

    fn role_of(kind: AgentType) -> VoxelRole {
        match kind {
            AgentType::Vp => VoxelRole::Source,
            AgentType::Cc | AgentType::Csc => VoxelRole::Consumer,
            AgentType::Necrotic => VoxelRole::Inert,
        }
    }

    fn place(&mut self, kind: AgentType, pos: Voxel, dir: Option<Direction>) -> Result<usize> {
        let idx = self
            .index(pos)
            .ok_or_else(|| Error::InvalidConfig(format!("voxel {pos:?} lies outside the lattice")))?;
        if self.occupancy[idx] != EMPTY {
            return Err(Error::InvalidConfig(format!("voxel {pos:?} is already occupied")));
        }
        let id = self.agents.len();
        self.agents.push(Agent {
            id: id as u64,
            kind,
            pos,
            dormant: false,
            vp_direction: dir,
            vp_tip: kind == AgentType::Vp,
        });
        self.occupancy[idx] = id as u32;
        self.roles[idx] = Self::role_of(kind);
        self.counts.0[kind.slot()] += 1;
        Ok(id)
    }

    fn retype(&mut self, agent: usize, kind: AgentType) {
        let old = self.agents[agent].kind;
        self.counts.0[old.slot()] -= 1;
        self.counts.0[kind.slot()] += 1;
        self.agents[agent].kind = kind;
        self.agents[agent].dormant = false;
        let idx = self.index(self.agents[agent].pos).expect("agent inside lattice");
        self.roles[idx] = Self::role_of(kind);
    }

    fn free_neighbours(&self, pos: Voxel) -> ([Voxel; 6], usize) {
        let mut out = [[0; 3]; 6];
        let mut n = 0;
        for d in Direction::ALL {
            let v = d.step(pos);
            if self.occupant(v) == Some(None) {
                out[n] = v;
                n += 1;
            }
        }
        (out, n)
    }

    /// Advance one synchronous step.
    pub fn step(&mut self) -> StepReport {
        let params = self.config.oxygen_params();
        self.oxygen.relax(&self.roles, &params, self.config.o2_sweeps);

        let mut order: Vec<usize> = (0..self.agents.len()).collect();
        order.shuffle(&mut self.rng);

        let mut report = StepReport::default();
        let mut could_divide = 0usize;
        for i in order {
            let kind = self.agents[i].kind;
            let pos = self.agents[i].pos;
            match kind {
                AgentType::Cc | AgentType::Csc => {
                    let idx = self.index(pos).expect("agent inside lattice");
                    let o2 = self.oxygen.values()[idx];
                    if kind == AgentType::Cc && o2 < self.config.o2_necrosis_threshold {
                        self.retype(i, AgentType::Necrotic);
                        report.necrotic_conversions += 1;
                        continue;
                    }
                    if kind == AgentType::Csc {
                        self.agents[i].dormant = o2 < self.config.o2_prolif_threshold;
                    }
                    if o2 < self.config.o2_prolif_threshold {
                        continue;
                    }
                    let (free, n_free) = self.free_neighbours(pos);
                    if n_free == 0 {
                        report.blocked += 1;
                        continue;
                    }
                    could_divide += 1;
                    if self.rng.random::<f64>() >= self.config.division_prob_per_step {
                        continue;
                    }
                    let outcome = self.rules.sample(kind, &mut self.rng).expect("live cells divide");
                    let (mut keep, mut spawn) = outcome.daughters();
                    if self.rng.random::<bool>() {
                        std::mem::swap(&mut keep, &mut spawn);
                    }
                    let target = free[self.rng.random_range(0..n_free)];
                    if keep != kind {
                        self.retype(i, keep);
                    }
                    self.place(spawn, target, None).expect("target voxel is free");
                    report.divisions += 1;
                }
                AgentType::Vp => {
                    if self.agents[i].vp_tip {
                        report.vessels_added += self.extend_vessel(i);
                    }
                }
                AgentType::Necrotic => {}
            }
        }
        report.stalled = could_divide == 0;
        self.step += 1;
        report
    }

    fn vessel_room(&self) -> bool {
        self.counts.get(AgentType::Vp) < self.config.vp_max_count
    }

    fn extend_vessel(&mut self, tip: usize) -> usize {
        if !self.vessel_room() || self.rng.random::<f64>() >= self.config.vp_growth_prob {
            return 0;
        }
        let pos = self.agents[tip].pos;
        let dir = self.agents[tip].vp_direction.unwrap_or(Direction::PlusX);
        let ahead = dir.step(pos);
        if self.occupant(ahead) != Some(None) {
            // blocked: turn and try again next step
            let turns = dir.perpendicular();
            self.agents[tip].vp_direction = Some(turns[self.rng.random_range(0..4)]);
            return 0;
        }
        let mut added = 0;
        self.place(AgentType::Vp, ahead, Some(dir)).expect("voxel checked free");
        self.agents[tip].vp_tip = false;
        added += 1;
        if self.vessel_room() && self.rng.random::<f64>() < self.config.vp_branch_freq {
            let turns = dir.perpendicular();
            let branch = turns[self.rng.random_range(0..4)];
            let side = branch.step(pos);
            if self.occupant(side) == Some(None) {
                self.place(AgentType::Vp, side, Some(branch)).expect("voxel checked free");
                added += 1;
            }
        }
        added
    }

    /// Step until the live cell count reaches `target`, or growth stalls.
    pub fn grow_until(&mut self, target: usize) -> GrowOutcome {
        let mut idle = 0;
        let mut stalled = false;
        while self.live_cells() < target {
            if self.step as usize >= self.config.max_steps {
                stalled = true;
                break;
            }
            let report = self.step();
            if report.divisions == 0 && report.vessels_added == 0 {
                idle += 1;
                if idle >= self.config.stall_patience {
                    stalled = true;
                    break;
                }
            } else {
                idle = 0;
            }
        }
        GrowOutcome {
            snapshot: self.snapshot(),
            stalled,
        }
    }
}
