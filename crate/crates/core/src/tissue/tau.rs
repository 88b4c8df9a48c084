//! Adaptive tau-leaping.
//!
//! Leap sizes follow the Cao–Gillespie–Petzold bound on the expected
//! relative change of every species touched by non-critical channels.
//! Channels with fewer than `CRITICAL_POPULATION` reactant molecules are
//! critical: at most one of them fires per leap, at an exponential waiting
//! time. When a leap would cover fewer than `SSA_CUTOFF` expected events the
//! kernel runs a burst of exact steps instead.

use rand::Rng;

use super::engine::{poisson, Engine, BIND, CHANNELS, HOP_LEFT, HOP_RIGHT, INTERNALISE, RELEASE, UNBIND};

const CRITICAL_POPULATION: u64 = 10;
const SSA_CUTOFF: f64 = 10.0;
const SSA_BURST: usize = 100;

/// Per-species drift and variance accumulators plus leap deltas.
struct Scratch {
    mu_free: Vec<f64>,
    var_free: Vec<f64>,
    mu_complex: Vec<f64>,
    var_complex: Vec<f64>,
    mu_rec: Vec<f64>,
    var_rec: Vec<f64>,
    d_free: Vec<i64>,
    d_complex: Vec<i64>,
    d_internal: Vec<i64>,
    d_rec: Vec<i64>,
    d_injected: Vec<u64>,
    critical: Vec<bool>,
}

impl Scratch {
    fn new(n: usize, s: usize) -> Self {
        Self {
            mu_free: vec![0.0; n * s],
            var_free: vec![0.0; n * s],
            mu_complex: vec![0.0; n * s],
            var_complex: vec![0.0; n * s],
            mu_rec: vec![0.0; n],
            var_rec: vec![0.0; n],
            d_free: vec![0; n * s],
            d_complex: vec![0; n * s],
            d_internal: vec![0; n * s],
            d_rec: vec![0; n],
            d_injected: vec![0; s],
            critical: vec![false; n * s * CHANNELS],
        }
    }
}

fn bound(eps: f64, x: u64, g: f64, mu: f64, var: f64) -> f64 {
    let b = (eps * x as f64 / g).max(1.0);
    let mut tau = f64::INFINITY;
    if mu != 0.0 {
        tau = tau.min(b / mu.abs());
    }
    if var > 0.0 {
        tau = tau.min(b * b / var);
    }
    tau
}

impl Engine<'_> {
    pub(super) fn run_tau(&mut self, epsilon: f64) {
        let mut scratch = Scratch::new(self.n(), self.sys.n_species());
        self.maybe_fast_forward();
        while !self.done {
            self.tau_step(epsilon, &mut scratch);
        }
    }

    /// Smallest population among the reactants of a channel.
    fn reactant_limit(&self, c: usize, species: usize, channel: usize) -> u64 {
        let k = self.state.idx(c, species);
        match channel {
            RELEASE => u64::MAX,
            HOP_LEFT | HOP_RIGHT => self.state.free[k],
            BIND => self.state.free[k].min(self.state.receptors[c]),
            UNBIND | INTERNALISE => self.state.complex[k],
            _ => unreachable!(),
        }
    }

    fn tau_step(&mut self, eps: f64, sc: &mut Scratch) {
        let a0 = self.tree.total();
        if a0 <= 0.0 {
            self.advance_to_end();
            return;
        }
        let n = self.n();
        let s = self.sys.n_species();

        // classify channels and accumulate drift/variance of non-critical ones
        sc.mu_free.iter_mut().for_each(|v| *v = 0.0);
        sc.var_free.iter_mut().for_each(|v| *v = 0.0);
        sc.mu_complex.iter_mut().for_each(|v| *v = 0.0);
        sc.var_complex.iter_mut().for_each(|v| *v = 0.0);
        sc.mu_rec.iter_mut().for_each(|v| *v = 0.0);
        sc.var_rec.iter_mut().for_each(|v| *v = 0.0);
        let mut a0c = 0.0;
        for c in 0..n {
            for i in 0..s {
                let k = self.state.idx(c, i);
                for ch in 0..CHANNELS {
                    let j = c * self.slots + i * CHANNELS + ch;
                    let a = self.props[j];
                    sc.critical[j] = false;
                    if a <= 0.0 {
                        continue;
                    }
                    if self.reactant_limit(c, i, ch) < CRITICAL_POPULATION {
                        sc.critical[j] = true;
                        a0c += a;
                        continue;
                    }
                    match ch {
                        RELEASE => {
                            sc.mu_free[k] += a;
                            sc.var_free[k] += a;
                        }
                        HOP_LEFT | HOP_RIGHT => {
                            let other = if ch == HOP_LEFT { k - s } else { k + s };
                            sc.mu_free[k] -= a;
                            sc.var_free[k] += a;
                            sc.mu_free[other] += a;
                            sc.var_free[other] += a;
                        }
                        BIND | UNBIND => {
                            let sign = if ch == BIND { 1.0 } else { -1.0 };
                            sc.mu_free[k] -= sign * a;
                            sc.var_free[k] += a;
                            sc.mu_rec[c] -= sign * a;
                            sc.var_rec[c] += a;
                            sc.mu_complex[k] += sign * a;
                            sc.var_complex[k] += a;
                        }
                        INTERNALISE => {
                            sc.mu_complex[k] -= a;
                            sc.var_complex[k] += a;
                            sc.mu_rec[c] += a;
                            sc.var_rec[c] += a;
                        }
                        _ => unreachable!(),
                    }
                }
            }
        }

        let mut tau1 = f64::INFINITY;
        for c in 0..n {
            // free particles and receptors are second order in living cells
            let g = if self.state.alive[c] { 2.0 } else { 1.0 };
            tau1 = tau1.min(bound(eps, self.state.receptors[c], g, sc.mu_rec[c], sc.var_rec[c]));
            for i in 0..s {
                let k = self.state.idx(c, i);
                tau1 = tau1.min(bound(eps, self.state.free[k], g, sc.mu_free[k], sc.var_free[k]));
                tau1 = tau1.min(bound(eps, self.state.complex[k], 1.0, sc.mu_complex[k], sc.var_complex[k]));
            }
        }

        let critical_wait = if a0c > 0.0 { 1.0 / a0c } else { f64::INFINITY };
        if a0 * tau1.min(critical_wait) < SSA_CUTOFF {
            for _ in 0..SSA_BURST {
                if self.done {
                    break;
                }
                self.ssa_step();
            }
            return;
        }

        loop {
            let tau2 = if a0c > 0.0 {
                self.rng.sample::<f64, _>(rand_distr::Exp1) / a0c
            } else {
                f64::INFINITY
            };
            let (mut tau, mut fire_critical) = if tau1 < tau2 { (tau1, false) } else { (tau2, true) };
            let remaining = self.sys.t_end - self.state.clock;
            let last = tau >= remaining;
            if last {
                tau = remaining;
                fire_critical = false;
            }
            if self.try_leap(tau, fire_critical, a0c, sc) {
                if last {
                    self.state.clock = self.sys.t_end;
                }
                break;
            }
            tau1 /= 2.0;
        }

        let mut killed = false;
        for c in 0..n {
            killed |= self.check_death(c);
        }
        self.refresh_all();
        if killed {
            self.maybe_fast_forward();
        }
        if !self.done && self.state.clock >= self.sys.t_end {
            self.advance_to_end();
        }
    }

    /// Draw and apply one leap of length `tau`. Returns false, leaving the
    /// state untouched, if any population would go negative.
    fn try_leap(&mut self, tau: f64, fire_critical: bool, a0c: f64, sc: &mut Scratch) -> bool {
        let s = self.sys.n_species();
        sc.d_free.iter_mut().for_each(|v| *v = 0);
        sc.d_complex.iter_mut().for_each(|v| *v = 0);
        sc.d_internal.iter_mut().for_each(|v| *v = 0);
        sc.d_rec.iter_mut().for_each(|v| *v = 0);
        sc.d_injected.iter_mut().for_each(|v| *v = 0);

        let chosen = if fire_critical {
            let mut r = self.rng.random::<f64>() * a0c;
            let mut pick = None;
            for (j, &crit) in sc.critical.iter().enumerate() {
                if !crit {
                    continue;
                }
                pick = Some(j);
                if r < self.props[j] {
                    break;
                }
                r -= self.props[j];
            }
            pick
        } else {
            None
        };

        for j in 0..self.props.len() {
            let count = if sc.critical[j] {
                if chosen == Some(j) {
                    1
                } else {
                    continue;
                }
            } else {
                poisson(&mut self.rng, self.props[j] * tau)
            };
            if count == 0 {
                continue;
            }
            let q = count as i64;
            let c = j / self.slots;
            let i = (j % self.slots) / CHANNELS;
            let k = c * s + i;
            match j % CHANNELS {
                RELEASE => {
                    sc.d_free[k] += q;
                    sc.d_injected[i] += count;
                }
                HOP_LEFT => {
                    sc.d_free[k] -= q;
                    sc.d_free[k - s] += q;
                }
                HOP_RIGHT => {
                    sc.d_free[k] -= q;
                    sc.d_free[k + s] += q;
                }
                BIND => {
                    sc.d_free[k] -= q;
                    sc.d_rec[c] -= q;
                    sc.d_complex[k] += q;
                }
                UNBIND => {
                    sc.d_complex[k] -= q;
                    sc.d_free[k] += q;
                    sc.d_rec[c] += q;
                }
                INTERNALISE => {
                    sc.d_complex[k] -= q;
                    sc.d_internal[k] += q;
                    sc.d_rec[c] += q;
                }
                _ => unreachable!(),
            }
        }

        let st = &self.state;
        let negative = |x: &[u64], d: &[i64]| x.iter().zip(d).any(|(&x, &d)| (x as i64) + d < 0);
        if negative(&st.free, &sc.d_free) || negative(&st.complex, &sc.d_complex) || negative(&st.receptors, &sc.d_rec) {
            return false;
        }

        self.record_until(self.state.clock + tau, false);
        let st = &mut self.state;
        let apply = |x: &mut [u64], d: &[i64]| {
            for (x, &d) in x.iter_mut().zip(d) {
                *x = (*x as i64 + d) as u64;
            }
        };
        apply(&mut st.free, &sc.d_free);
        apply(&mut st.complex, &sc.d_complex);
        apply(&mut st.internal, &sc.d_internal);
        apply(&mut st.receptors, &sc.d_rec);
        for (inj, &d) in st.injected.iter_mut().zip(&sc.d_injected) {
            *inj += d;
        }
        st.clock += tau;
        true
    }
}
