use nanocarrier::scenario::{CompartmentKind, Scenario};
use nanocarrier::tissue::trajectory::CSV_HEADER;
use nanocarrier::tissue::*;
use nanocarrier::{Dosimetry, NanoparticleDesign};
use proptest::prelude::*;

use CompartmentKind::{Cc, Csc, Ecm, Vp};

fn rates(release: f64, hop: f64, bind: f64) -> SpeciesRates {
    SpeciesRates {
        release,
        hop,
        bind,
        unbind: 1e-3,
        internalise: 5e-3,
    }
}

fn kind_strategy() -> impl Strategy<Value = CompartmentKind> {
    prop_oneof![Just(Cc), Just(Csc), Just(Ecm), Just(Vp)]
}

fn backends() -> [Backend; 2] {
    [Backend::Ssa, Backend::Tau(DEFAULT_EPSILON)]
}

/// Bolus-only chain: no vessel, so particle totals are fixed.
fn closed_system(kinds: Vec<CompartmentKind>, species: usize, bolus: u64, threshold: u64) -> TissueSystem {
    let kinds: Vec<_> = kinds.into_iter().map(|k| if k == Vp { Ecm } else { k }).collect();
    let mut sys = TissueSystem::from_parts(
        kinds,
        vec![rates(0.0, 0.05, 2e-4); species],
        vec![threshold; species],
        200,
        3_000.0,
    )
    .unwrap();
    for s in 0..species {
        sys = sys.with_initial_free(s, 0, bolus).unwrap();
    }
    sys
}

fn sampled(sys: &TissueSystem, backend: Backend, seed: u64, interval: f64) -> (Simulation, Trajectory) {
    let mut traj = Trajectory::new(interval);
    let sim = simulate(sys, backend, seed, Some(&mut traj)).unwrap();
    (sim, traj)
}

/// Rows of one sample, grouped.
fn by_sample(traj: &Trajectory) -> Vec<Vec<TrajectoryRow>> {
    let mut out = vec![Vec::new(); traj.samples()];
    for r in traj.rows() {
        out[r.sample].push(*r);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn particles_and_receptors_are_conserved(
        kinds in prop::collection::vec(kind_strategy(), 2..8),
        species in 1usize..=2,
        bolus in 0u64..300,
        threshold in 1u64..40,
        seed in any::<u64>(),
    ) {
        let sys = closed_system(kinds, species, bolus, threshold);
        for backend in backends() {
            let (sim, traj) = sampled(&sys, backend, seed, 250.0);
            prop_assert_eq!(traj.samples(), 13);
            for rows in by_sample(&traj) {
                for s in 0..species {
                    let total: u64 = rows.iter().filter(|r| r.species == s).map(|r| r.np_f + r.c + r.np_i).sum();
                    prop_assert_eq!(total, bolus);
                }
                for c in 0..sys.n_compartments() {
                    let here: Vec<_> = rows.iter().filter(|r| r.compartment == c).collect();
                    let bound: u64 = here.iter().map(|r| r.c).sum();
                    if here[0].alive {
                        prop_assert_eq!(here[0].r + bound, sys.receptors_per_cell());
                    } else {
                        prop_assert_eq!(here[0].r, 0);
                        prop_assert_eq!(bound, 0);
                    }
                }
            }
            for s in 0..species {
                prop_assert_eq!(sim.state.total_particles(s), bolus);
            }
        }
    }

    #[test]
    fn deaths_are_final_and_uptake_only_grows(
        kinds in prop::collection::vec(kind_strategy(), 2..8),
        species in 1usize..=2,
        threshold in 1u64..20,
        seed in any::<u64>(),
    ) {
        let sys = closed_system(kinds, species, 200, threshold);
        for backend in backends() {
            let (sim, traj) = sampled(&sys, backend, seed, 100.0);
            let samples = by_sample(&traj);
            for w in samples.windows(2) {
                for (a, b) in w[0].iter().zip(&w[1]) {
                    prop_assert!(b.np_i >= a.np_i);
                    prop_assert!(a.alive || !b.alive);
                }
            }
            for c in 0..sys.n_compartments() {
                let killer = sys.killer(sys.kinds()[c]);
                match (sim.state.death_time[c], killer) {
                    (Some(t), Some(k)) => {
                        prop_assert!(t > 0.0 && t <= sys.t_end());
                        prop_assert!(sim.state.internal_at(c, k) >= threshold);
                    }
                    (Some(_), None) => prop_assert!(false, "unkillable compartment {} died", c),
                    (None, Some(k)) => prop_assert!(sim.state.internal_at(c, k) < threshold),
                    (None, None) => {}
                }
            }
        }
    }

    #[test]
    fn open_chain_totals_match_releases(
        tail in prop::collection::vec(kind_strategy(), 1..6),
        seed in any::<u64>(),
    ) {
        let mut kinds = vec![Vp];
        kinds.extend(tail);
        let sys = TissueSystem::from_parts(kinds, vec![rates(0.05, 0.05, 2e-4)], vec![5], 100, 2_000.0).unwrap();
        for backend in backends() {
            let (sim, traj) = sampled(&sys, backend, seed, 200.0);
            prop_assert_eq!(sim.state.total_particles(0), sim.state.injected[0]);
            for rows in by_sample(&traj) {
                let total: u64 = rows.iter().map(|r| r.np_f + r.c + r.np_i).sum();
                prop_assert_eq!(total, rows[0].injected);
            }
        }
    }
}

#[test]
fn zero_affinity_never_binds() {
    let sys = TissueSystem::from_parts(
        vec![Vp, Cc, Cc, Ecm, Cc],
        vec![rates(0.1, 0.05, 0.0)],
        vec![1],
        500,
        5_000.0,
    )
    .unwrap();
    for backend in backends() {
        for seed in 0..5 {
            let sim = simulate(&sys, backend, seed, None).unwrap();
            assert!(sim.state.injected[0] > 0);
            assert!(sim.state.complex.iter().chain(&sim.state.internal).all(|&x| x == 0));
            assert_eq!(sim.outcome.cc_killed, 0);
            assert!((sim.state.clock - 5_000.0).abs() < 1e-9);
        }
    }
}

#[test]
fn zero_dose_changes_nothing() {
    let dos = Dosimetry::standard();
    let d = NanoparticleDesign::new(1e-6, 7e5, 0.0, 5000.0).unwrap();
    let sys = TissueSystem::build(&Scenario::worst_case_homogeneous(), &[d], &dos).unwrap();
    let mut expected = sys.initial_state();
    expected.clock = sys.t_end();
    for backend in backends() {
        let sim = simulate(&sys, backend, 1, None).unwrap();
        assert_eq!(sim.state, expected);
        assert_eq!(sim.outcome.cc_killed, 0);
        assert_eq!(sim.outcome.cc_fraction(), 0.0);
    }
}

#[test]
fn runs_are_reproducible() {
    let dos = Dosimetry::standard();
    let d = NanoparticleDesign::new(1e-6, 7e5, 6e4, 5000.0).unwrap();
    let sys = TissueSystem::build(&Scenario::worst_case_homogeneous(), &[d], &dos)
        .unwrap()
        .with_t_end(20_000.0)
        .unwrap();
    for backend in backends() {
        let a = simulate(&sys, backend, 77, None).unwrap();
        let b = simulate(&sys, backend, 77, None).unwrap();
        assert_eq!(a, b);
        let c = simulate(&sys, backend, 78, None).unwrap();
        assert_ne!(a.state, c.state);
    }
}

#[test]
fn fast_forward_keeps_kill_tally() {
    let sys = TissueSystem::from_parts(vec![Vp, Cc, Cc], vec![rates(1.0, 0.05, 1e-3)], vec![3], 50, 3_000.0).unwrap();
    for seed in 0..10 {
        let slow = simulate_ssa(&sys, seed);
        let fast = simulate_ssa(&sys.clone().with_fast_forward(true), seed);
        // identical event streams up to the last death
        assert_eq!(slow.outcome.cc_killed, 2);
        assert_eq!(fast.outcome.cc_killed, 2);
        assert_eq!(slow.state.death_time, fast.state.death_time);
        assert_eq!(fast.state.total_particles(0), fast.state.injected[0]);
        assert_eq!(fast.state.clock, 3_000.0);
    }
}

#[test]
fn trajectory_csv_layout() {
    let sys = closed_system(vec![Cc, Ecm, Csc], 2, 50, 5).with_t_end(1_000.0).unwrap();
    let (_, traj) = sampled(&sys, Backend::Ssa, 3, 600.0);
    assert_eq!(traj.samples(), 2);
    assert_eq!(traj.rows().len(), 2 * 3 * 2);
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 13);
    assert_eq!(lines[1], "0,0,0,50,200,0,0,1");
    assert_eq!(lines[3], "0,1,0,0,0,0,0,0");
    assert!(lines[7].starts_with("600,0,0,"));
    assert!(lines.iter().skip(1).all(|l| l.split(',').count() == 8));
}

#[test]
fn trajectory_interval_is_validated() {
    let sys = closed_system(vec![Cc, Cc], 1, 10, 5);
    let mut traj = Trajectory::new(0.0);
    assert!(simulate(&sys, Backend::Ssa, 0, Some(&mut traj)).is_err());
    assert!(simulate(&sys, Backend::Tau(0.5), 0, None).is_err());
}
