//! Statistical checks of the Mallows sampler and the bounds built on it.

use jrank::mallows::{
    instance_rng, kendall_tau, mixture_price_bound, sample_mallows_bottom_up,
    sample_mixture_instance, top_s_miss_bound, MallowsConfig, MallowsMixtureConfig, PriceBound,
};
use jrank::scoring::{ItemScores, Rule, ScoringRule};
use jrank::solve::{price_of_jr_with, PriceMethod, DEFAULT_BUDGET};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(m - 1) {
        for slot in 0..=p.len() {
            let mut q = p.clone();
            q.insert(slot, m - 1);
            out.push(q);
        }
    }
    out
}

fn index_of(all: &[Vec<usize>], pi: &[usize]) -> usize {
    all.iter()
        .position(|p| p == pi)
        .expect("sample is a permutation")
}

/// Pearson statistic and p-value of `counts` against probabilities `pmf`.
fn chi_square(counts: &[u64], pmf: &[f64], draws: u64) -> (f64, f64) {
    let stat: f64 = counts
        .iter()
        .zip(pmf)
        .map(|(&c, &p)| {
            let e = p * draws as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    (stat, 1.0 - dist.cdf(stat))
}

#[test]
fn five_item_sampler_matches_pmf_within_three_sigma() {
    let all = permutations(5);
    let draws = 100_000u64;
    for (seed, &phi) in [0.25, 0.6, 1.0].iter().enumerate() {
        let config = MallowsConfig::new(phi, vec![4, 2, 0, 1, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
        let mut counts = vec![0u64; all.len()];
        for _ in 0..draws {
            counts[index_of(&all, &sample_mallows_bottom_up(&config, &mut rng))] += 1;
        }
        for (pi, &c) in all.iter().zip(&counts) {
            let p = config.probability(pi).unwrap();
            let expected = p * draws as f64;
            let sd = (draws as f64 * p * (1.0 - p)).sqrt();
            // Three sigma per cell, with a floor for cells expecting ~0 draws.
            assert!(
                (c as f64 - expected).abs() <= 3.0 * sd + 3.0,
                "phi {phi} pi {pi:?}: {c} vs {expected:.1}"
            );
        }
        // The global test needs every cell to expect at least five draws.
        let pmf: Vec<f64> = all
            .iter()
            .map(|pi| config.probability(pi).unwrap())
            .collect();
        if pmf.iter().all(|&p| p * draws as f64 >= 5.0) {
            let (_, p_value) = chi_square(&counts, &pmf, draws);
            assert!(p_value > 0.001, "phi {phi}: p = {p_value}");
        }
    }
}

#[test]
fn single_component_mixture_is_the_mallows_pmf() {
    let component = MallowsConfig::new(0.45, vec![2, 0, 3, 1]).unwrap();
    let mixture = MallowsMixtureConfig::new(vec![component.clone()], vec![1.0], 4).unwrap();
    for pi in permutations(4) {
        assert_eq!(
            mixture.probability(&pi).unwrap(),
            component.probability(&pi).unwrap()
        );
    }

    // Sampled instances carry only approval sets, so check the top-item
    // marginal against the pmf.
    let mixture = MallowsMixtureConfig::new(vec![component.clone()], vec![1.0], 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let inst = sample_mixture_instance(&mixture, 20_000, 1, &mut rng).unwrap();
    assert_eq!(inst.groups().unwrap().gamma(), 1);
    let all = permutations(4);
    for item in 0..4 {
        let expected: f64 = all
            .iter()
            .filter(|pi| pi[0] == item)
            .map(|pi| component.probability(pi).unwrap())
            .sum();
        let observed = inst.profile().approval_count(item) as f64 / 20_000.0;
        let se = (expected * (1.0 - expected) / 20_000.0).sqrt();
        assert!((observed - expected).abs() <= 4.0 * se, "item {item}");
    }
}

#[test]
fn exact_pmf_sums_to_one() {
    for &phi in &[0.0, 0.3, 1.0] {
        let config = MallowsConfig::identity(phi, 5).unwrap();
        let total: f64 = permutations(5)
            .iter()
            .map(|pi| config.probability(pi).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
    assert_eq!(kendall_tau(&[4, 3, 2, 1, 0], &[0, 1, 2, 3, 4]).unwrap(), 10);
}

#[test]
fn miss_bound_dominates_monte_carlo() {
    let draws = 10_000;
    for &(phi, m, tau, s) in &[
        (0.5, 6, 2, 1),
        (0.8, 10, 3, 2),
        (0.95, 12, 4, 3),
        (1.0, 8, 2, 2),
    ] {
        let config = MallowsConfig::identity(phi, m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(m as u64);
        let misses = (0..draws)
            .filter(|_| {
                let pi = sample_mallows_bottom_up(&config, &mut rng);
                (0..s).all(|item| !pi[..tau].contains(&item))
            })
            .count();
        let p_hat = misses as f64 / draws as f64;
        let bound = top_s_miss_bound(phi, m, tau, s).unwrap();
        let se = (bound * (1.0 - bound) / draws as f64).sqrt();
        assert!(
            p_hat <= bound + 3.0 * se,
            "{phi} {m} {tau} {s}: {p_hat} > {bound}"
        );
    }
}

/// At small sizes the exact price is computable, so the high-probability
/// bound can be checked directly: it may fail on at most a `delta` fraction
/// of instances, plus sampling slack.
#[test]
fn mixture_bound_covers_exact_prices() {
    let (n, m, k, tau, delta) = (12usize, 10usize, 5usize, 2usize, 0.05);
    let sims = 200;
    let mut checked = 0;
    for (phi_index, &phi) in [0.0, 0.05, 0.1, 0.15].iter().enumerate() {
        let mixture = MallowsMixtureConfig::polarized(phi, m, tau).unwrap();
        let bound = mixture_price_bound(k, 2, phi, m, tau, delta).unwrap();
        let PriceBound::Finite(b) = bound.bound else {
            continue;
        };
        checked += 1;
        let mut exceed = 0;
        for rule in [Rule::Engagement, Rule::MaximinDiverseApproval] {
            for index in 0..sims {
                let mut rng = instance_rng(7, phi_index, index);
                let inst = sample_mixture_instance(&mixture, n, k, &mut rng).unwrap();
                let scores = ItemScores::compute(&rule, &inst).unwrap();
                let report = price_of_jr_with(
                    &inst,
                    &scores,
                    rule.name(),
                    PriceMethod::Exact {
                        budget: DEFAULT_BUDGET,
                    },
                )
                .unwrap();
                if report.price.to_f64().is_some_and(|p| p > b + 1e-12) {
                    exceed += 1;
                }
            }
        }
        let total = 2 * sims;
        let slack = 3.0 * (delta * (1.0 - delta) / total as f64).sqrt();
        let rate = exceed as f64 / total as f64;
        assert!(rate <= delta + slack, "phi {phi}: {rate}");
    }
    assert!(checked > 0, "no grid point had a finite bound");
}
