//! Regularly sampled state dumps.

use std::io::Write;

use super::TissueState;
use crate::error::Result;

pub const DEFAULT_INTERVAL: f64 = 600.0;
pub const CSV_HEADER: &str = "t,compartment,species,np_f,r,c,np_i,alive";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajectoryRow {
    /// Sample index; the sample time is `index * interval`.
    pub sample: usize,
    pub compartment: usize,
    pub species: usize,
    pub np_f: u64,
    pub r: u64,
    pub c: u64,
    pub np_i: u64,
    pub alive: bool,
    /// Particles of this species released into the chain so far. Not
    /// written to CSV.
    pub injected: u64,
}

/// Recorder for states at `0, Δ, 2Δ, …` up to the end time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    interval: f64,
    next: usize,
    rows: Vec<TrajectoryRow>,
}

impl Default for Trajectory {
    fn default() -> Self {
        Self::new(DEFAULT_INTERVAL)
    }
}

impl Trajectory {
    pub fn new(interval: f64) -> Self {
        Self {
            interval,
            next: 0,
            rows: Vec::new(),
        }
    }

    pub fn interval(&self) -> f64 {
        self.interval
    }

    pub fn rows(&self) -> &[TrajectoryRow] {
        &self.rows
    }

    pub fn samples(&self) -> usize {
        self.next
    }

    pub fn time_of(&self, sample: usize) -> f64 {
        sample as f64 * self.interval
    }

    /// Record `state` for every pending sample time strictly before `until`
    /// (and not after `t_end`). The state is the one holding over that span.
    pub(crate) fn record_until(&mut self, state: &TissueState, until: f64, t_end: f64, inclusive: bool) {
        loop {
            let t = self.time_of(self.next);
            let due = if inclusive { t <= until } else { t < until };
            if !due || t > t_end {
                break;
            }
            self.push(state);
        }
    }

    fn push(&mut self, state: &TissueState) {
        for c in 0..state.n_compartments() {
            for s in 0..state.n_species() {
                self.rows.push(TrajectoryRow {
                    sample: self.next,
                    compartment: c,
                    species: s,
                    np_f: state.free_at(c, s),
                    r: state.receptors[c],
                    c: state.complex_at(c, s),
                    np_i: state.internal_at(c, s),
                    alive: state.alive[c],
                    injected: state.injected[s],
                });
            }
        }
        self.next += 1;
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.time_of(r.sample),
                r.compartment,
                r.species,
                r.np_f,
                r.r,
                r.c,
                r.np_i,
                u8::from(r.alive)
            )?;
        }
        Ok(())
    }
}
