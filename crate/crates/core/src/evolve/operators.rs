//! Variation and selection operators.

use rand::Rng;

use super::genes::{GeneBounds, Scale};

/// Draw `n` gene vectors: log-uniform on log genes, uniform on linear ones.
pub fn init_population<R: Rng + ?Sized>(bounds: &GeneBounds, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            bounds
                .genes
                .iter()
                .map(|g| {
                    let u: f64 = rng.random();
                    match g.scale {
                        Scale::Log => g.denormalise(u),
                        Scale::Linear => g.clamp(g.lower + u * (g.upper - g.lower)),
                    }
                })
                .collect()
        })
        .collect()
}

/// Index of the winner of a size-`t` tournament drawn with replacement.
/// Ties go to the lower index.
pub fn tournament_select<R: Rng + ?Sized>(fitness: &[f64], t: usize, rng: &mut R) -> usize {
    assert!(!fitness.is_empty() && t >= 1, "tournament needs entrants");
    let mut best = rng.random_range(0..fitness.len());
    for _ in 1..t {
        let i = rng.random_range(0..fitness.len());
        if fitness[i] > fitness[best] || (fitness[i] == fitness[best] && i < best) {
            best = i;
        }
    }
    best
}

/// Loser of a size-`t` tournament: the lowest fitness, ties to the higher index.
pub fn tournament_reject<R: Rng + ?Sized>(fitness: &[f64], t: usize, rng: &mut R) -> usize {
    assert!(!fitness.is_empty() && t >= 1, "tournament needs entrants");
    let mut worst = rng.random_range(0..fitness.len());
    for _ in 1..t {
        let i = rng.random_range(0..fitness.len());
        if fitness[i] < fitness[worst] || (fitness[i] == fitness[worst] && i > worst) {
            worst = i;
        }
    }
    worst
}

/// Uniform crossover: each gene from `a` or `b` with probability ½.
pub fn crossover<R: Rng + ?Sized>(a: &[f64], b: &[f64], rng: &mut R) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| if rng.random::<bool>() { x } else { y })
        .collect()
}

/// Multiply gene `index` by `1 + u` and clamp it to its bounds.
pub fn apply_step(genes: &mut [f64], index: usize, u: f64, bounds: &GeneBounds) {
    genes[index] = bounds.genes[index].clamp(genes[index] * (1.0 + u));
}

/// With probability `prob`, perturb one uniformly chosen gene by a relative
/// step drawn from `U(-step, step)`. Returns whether a mutation happened.
pub fn mutate<R: Rng + ?Sized>(genes: &mut [f64], bounds: &GeneBounds, prob: f64, step: f64, rng: &mut R) -> bool {
    if rng.random::<f64>() >= prob {
        return false;
    }
    let index = rng.random_range(0..genes.len());
    let u = if step > 0.0 { rng.random_range(-step..=step) } else { 0.0 };
    apply_step(genes, index, u, bounds);
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::genes::Gene;
    use crate::seed::rng_from_seed;
    use proptest::prelude::*;

    fn sigma3(p: f64, n: usize) -> f64 {
        3.0 * (p * (1.0 - p) / n as f64).sqrt()
    }

    #[test]
    fn population_is_in_bounds_and_reproducible() {
        let b = GeneBounds::homogeneous();
        let pop = init_population(&b, 20, &mut rng_from_seed(5));
        assert_eq!(pop.len(), 20);
        assert!(pop.iter().all(|g| b.contains(g)));
        assert_eq!(pop, init_population(&b, 20, &mut rng_from_seed(5)));
    }

    #[test]
    fn degenerate_bounds_pin_the_gene() {
        let b = GeneBounds::new(vec![Gene::new("x", 2.0, 2.0 * (1.0 + 1e-12), Scale::Log).unwrap()]).unwrap();
        for g in init_population(&b, 50, &mut rng_from_seed(1)) {
            assert!((g[0] - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn tournament_obvious_winner_and_ties() {
        let mut rng = rng_from_seed(2);
        // with both entrants drawn, the fitter always wins
        for _ in 0..100 {
            let w = tournament_select(&[0.9, 0.1], 50, &mut rng);
            assert_eq!(w, 0);
        }
        for _ in 0..100 {
            assert_eq!(tournament_select(&[0.5, 0.5], 60, &mut rng), 0);
        }
    }

    #[test]
    fn size_one_tournament_is_uniform() {
        let mut rng = rng_from_seed(3);
        let n = 100_000;
        let mut hits = [0usize; 4];
        for _ in 0..n {
            hits[tournament_select(&[4.0, 3.0, 2.0, 1.0], 1, &mut rng)] += 1;
        }
        for h in hits {
            assert!((h as f64 / n as f64 - 0.25).abs() < sigma3(0.25, n));
        }
    }

    #[test]
    fn best_of_twenty_win_rate() {
        // P(best among 2 draws with replacement) = 1 - (19/20)^2
        let expected = 1.0 - (19.0f64 / 20.0).powi(2);
        let fitness: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let mut rng = rng_from_seed(4);
        let n = 100_000;
        let wins = (0..n).filter(|_| tournament_select(&fitness, 2, &mut rng) == 19).count();
        assert!((wins as f64 / n as f64 - expected).abs() < 0.005);
    }

    #[test]
    fn crossover_frequency_and_identity() {
        let mut rng = rng_from_seed(6);
        let a = vec![1.0, 2.0, 3.0];
        assert_eq!(crossover(&a, &a, &mut rng), a);
        let b = vec![-1.0, -2.0, -3.0];
        let n = 10_000;
        let mut from_a = [0usize; 3];
        for _ in 0..n {
            for (k, v) in crossover(&a, &b, &mut rng).iter().enumerate() {
                if *v > 0.0 {
                    from_a[k] += 1;
                }
            }
        }
        for f in from_a {
            assert!((f as f64 / n as f64 - 0.5).abs() < sigma3(0.5, n));
        }
    }

    #[test]
    fn forced_step_is_exact() {
        let b = GeneBounds::new(vec![Gene::new("x", 1.0, 1000.0, Scale::Log).unwrap()]).unwrap();
        let mut g = vec![100.0];
        apply_step(&mut g, 0, 0.05, &b);
        assert!((g[0] - 105.0).abs() < 1e-12);
        let mut top = vec![999.0];
        apply_step(&mut top, 0, 0.05, &b);
        assert_eq!(top[0], 1000.0);
    }

    #[test]
    fn mutation_frequency_and_locality() {
        let b = GeneBounds::homogeneous();
        let mut rng = rng_from_seed(7);
        let base = init_population(&b, 1, &mut rng).remove(0);
        let n = 10_000;
        let mut changed = 0;
        for _ in 0..n {
            let mut g = base.clone();
            let hit = mutate(&mut g, &b, 0.2, 0.05, &mut rng);
            let diff = g.iter().zip(&base).filter(|(x, y)| x != y).count();
            assert!(diff <= 1);
            if hit {
                changed += 1;
            } else {
                assert_eq!(g, base);
            }
        }
        assert!((changed as f64 / n as f64 - 0.2).abs() < sigma3(0.2, n));
    }

    proptest! {
        #[test]
        fn operators_keep_genes_in_bounds(seed in any::<u64>(), rounds in 1usize..50) {
            let b = GeneBounds::heterogeneous();
            let mut rng = rng_from_seed(seed);
            let mut pop = init_population(&b, 6, &mut rng);
            for _ in 0..rounds {
                let fitness: Vec<f64> = pop.iter().map(|g| g[0]).collect();
                let i = tournament_select(&fitness, 2, &mut rng);
                let j = tournament_select(&fitness, 2, &mut rng);
                let mut child = crossover(&pop[i], &pop[j], &mut rng);
                let before = child.clone();
                mutate(&mut child, &b, 1.0, 0.05, &mut rng);
                for (x, y) in child.iter().zip(&before) {
                    prop_assert!((x / y - 1.0).abs() <= 0.05 + 1e-12);
                }
                prop_assert!(b.contains(&child));
                let k = tournament_reject(&fitness, 2, &mut rng);
                pop[k] = child;
            }
        }
    }
}
