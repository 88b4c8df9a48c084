use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::{TissueState, TissueSystem, Trajectory};
use crate::scenario::CompartmentKind;
use crate::seed::{rng_from_seed, SimRng};

pub(super) const RELEASE: usize = 0;
pub(super) const HOP_LEFT: usize = 1;
pub(super) const HOP_RIGHT: usize = 2;
pub(super) const BIND: usize = 3;
pub(super) const UNBIND: usize = 4;
pub(super) const INTERNALISE: usize = 5;
pub(super) const CHANNELS: usize = 6;

/// Binary sum tree over per-compartment propensity totals. Parents are
/// recomputed from their children on every update, so no rounding drift
/// accumulates.
#[derive(Debug, Clone)]
pub(super) struct SumTree {
    size: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    fn new(n: usize) -> Self {
        let size = n.next_power_of_two();
        Self {
            size,
            nodes: vec![0.0; 2 * size],
        }
    }

    fn set(&mut self, leaf: usize, value: f64) {
        let mut j = self.size + leaf;
        self.nodes[j] = value;
        j /= 2;
        while j >= 1 {
            self.nodes[j] = self.nodes[2 * j] + self.nodes[2 * j + 1];
            j /= 2;
        }
    }

    pub(super) fn total(&self) -> f64 {
        self.nodes[1]
    }

    fn leaf(&self, i: usize) -> f64 {
        self.nodes[self.size + i]
    }

    /// Leaf whose cumulative interval contains `r`, and the offset into it.
    fn find(&self, mut r: f64) -> (usize, f64) {
        let mut j = 1;
        while j < self.size {
            let left = self.nodes[2 * j];
            if r < left {
                j *= 2;
            } else {
                r -= left;
                j = 2 * j + 1;
            }
        }
        (j - self.size, r)
    }
}

pub(super) fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
}

pub(super) struct Engine<'a> {
    pub(super) sys: &'a TissueSystem,
    pub(super) state: TissueState,
    /// `compartment * slots + species * CHANNELS + channel`.
    pub(super) props: Vec<f64>,
    pub(super) slots: usize,
    pub(super) tree: SumTree,
    pub(super) rng: SimRng,
    living: usize,
    trajectory: Option<&'a mut Trajectory>,
    pub(super) done: bool,
}

impl<'a> Engine<'a> {
    pub(super) fn new(sys: &'a TissueSystem, seed: u64, trajectory: Option<&'a mut Trajectory>) -> Self {
        let state = sys.initial_state();
        let n = sys.n_compartments();
        let slots = CHANNELS * sys.n_species();
        // cells that can still die
        let living = (0..n)
            .filter(|&c| state.alive[c] && sys.killer(sys.kinds[c]).is_some())
            .count();
        let mut engine = Self {
            sys,
            state,
            props: vec![0.0; n * slots],
            slots,
            tree: SumTree::new(n),
            rng: rng_from_seed(seed),
            living,
            trajectory,
            done: false,
        };
        engine.refresh_all();
        engine
    }

    pub(super) fn n(&self) -> usize {
        self.sys.n_compartments()
    }

    pub(super) fn refresh(&mut self, c: usize) {
        let n = self.n();
        let s = self.sys.n_species();
        let alive = self.state.alive[c];
        let r = self.state.receptors[c] as f64;
        let source = self.sys.kinds[c] == CompartmentKind::Vp;
        let mut total = 0.0;
        for i in 0..s {
            let rates = &self.sys.rates[i];
            let k = self.state.idx(c, i);
            let f = self.state.free[k] as f64;
            let cx = self.state.complex[k] as f64;
            let base = c * self.slots + i * CHANNELS;
            let p = &mut self.props[base..base + CHANNELS];
            p[RELEASE] = if source { rates.release } else { 0.0 };
            p[HOP_LEFT] = if c > 0 { rates.hop * f } else { 0.0 };
            p[HOP_RIGHT] = if c + 1 < n { rates.hop * f } else { 0.0 };
            if alive {
                p[BIND] = rates.bind * f * r;
                p[UNBIND] = rates.unbind * cx;
                p[INTERNALISE] = rates.internalise * cx;
            } else {
                p[BIND] = 0.0;
                p[UNBIND] = 0.0;
                p[INTERNALISE] = 0.0;
            }
            total += p.iter().sum::<f64>();
        }
        self.tree.set(c, total);
    }

    pub(super) fn refresh_all(&mut self) {
        for c in 0..self.n() {
            self.refresh(c);
        }
    }

    /// Apply one firing of `slot` in compartment `c` and update propensities.
    fn fire(&mut self, c: usize, slot: usize) {
        let species = slot / CHANNELS;
        let k = self.state.idx(c, species);
        let ns = self.state.n_species();
        let st = &mut self.state;
        match slot % CHANNELS {
            RELEASE => {
                st.free[k] += 1;
                st.injected[species] += 1;
            }
            HOP_LEFT => {
                st.free[k] -= 1;
                st.free[k - ns] += 1;
                self.refresh(c - 1);
            }
            HOP_RIGHT => {
                st.free[k] -= 1;
                st.free[k + ns] += 1;
                self.refresh(c + 1);
            }
            BIND => {
                st.free[k] -= 1;
                st.receptors[c] -= 1;
                st.complex[k] += 1;
            }
            UNBIND => {
                st.complex[k] -= 1;
                st.free[k] += 1;
                st.receptors[c] += 1;
            }
            INTERNALISE => {
                st.complex[k] -= 1;
                st.internal[k] += 1;
                st.receptors[c] += 1;
                self.check_death(c);
            }
            _ => unreachable!(),
        }
        self.refresh(c);
    }

    /// Kill `c` if it is a living cell at or over its lethal threshold.
    pub(super) fn check_death(&mut self, c: usize) -> bool {
        if !self.state.alive[c] {
            return false;
        }
        let Some(killer) = self.sys.killer(self.sys.kinds[c]) else {
            return false;
        };
        if self.state.internal_at(c, killer) < self.sys.thresholds[killer] {
            return false;
        }
        let st = &mut self.state;
        st.alive[c] = false;
        st.death_time[c] = Some(st.clock);
        st.receptors[c] = 0;
        for s in 0..st.n_species() {
            let k = st.idx(c, s);
            st.free[k] += st.complex[k];
            st.complex[k] = 0;
        }
        self.living -= 1;
        true
    }

    pub(super) fn record_until(&mut self, until: f64, inclusive: bool) {
        if let Some(t) = self.trajectory.as_deref_mut() {
            t.record_until(&self.state, until, self.sys.t_end, inclusive);
        }
    }

    pub(super) fn advance_to_end(&mut self) {
        self.state.clock = self.sys.t_end;
        self.record_until(self.sys.t_end, true);
        self.done = true;
    }

    /// Jump to the end once no cell is left that could die.
    pub(super) fn maybe_fast_forward(&mut self) {
        if self.done || self.living > 0 || !self.sys.fast_forward || self.trajectory.is_some() {
            return;
        }
        let remaining = self.sys.t_end - self.state.clock;
        for c in 0..self.n() {
            if self.sys.kinds[c] != CompartmentKind::Vp {
                continue;
            }
            for s in 0..self.sys.n_species() {
                let k = poisson(&mut self.rng, self.sys.rates[s].release * remaining);
                let idx = self.state.idx(c, s);
                self.state.free[idx] += k;
                self.state.injected[s] += k;
            }
        }
        self.state.clock = self.sys.t_end;
        self.done = true;
    }

    /// One exact Gillespie event, or the final advance to `t_end`.
    pub(super) fn ssa_step(&mut self) {
        let a0 = self.tree.total();
        if a0 <= 0.0 {
            self.advance_to_end();
            return;
        }
        let dt = self.rng.sample::<f64, _>(rand_distr::Exp1) / a0;
        let t_new = self.state.clock + dt;
        if t_new > self.sys.t_end {
            self.advance_to_end();
            return;
        }
        let target = self.rng.random::<f64>() * a0;
        let (c, slot) = self.locate(target);
        self.record_until(t_new, false);
        self.state.clock = t_new;
        let living = self.living;
        self.fire(c, slot);
        if self.living < living {
            self.maybe_fast_forward();
        }
    }

    /// Map a point in `[0, a0)` to a channel, guarding against rounding
    /// landing on an empty leaf or past the last positive slot.
    fn locate(&self, target: f64) -> (usize, usize) {
        let n = self.n();
        let (mut c, mut r) = self.tree.find(target);
        if c >= n || self.tree.leaf(c) <= 0.0 {
            c = (0..n.min(c + 1)).rev().find(|&i| self.tree.leaf(i) > 0.0).unwrap_or_else(|| {
                (0..n).find(|&i| self.tree.leaf(i) > 0.0).expect("positive total")
            });
            r = self.tree.leaf(c);
        }
        let props = &self.props[c * self.slots..(c + 1) * self.slots];
        let mut last = None;
        for (j, &p) in props.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            if r < p {
                return (c, j);
            }
            r -= p;
            last = Some(j);
        }
        (c, last.expect("leaf with positive total has a positive slot"))
    }

    pub(super) fn run_ssa(&mut self) {
        self.maybe_fast_forward();
        while !self.done {
            self.ssa_step();
        }
    }

    pub(super) fn finish(self) -> TissueState {
        self.state
    }
}
