//! Property checks and brute-force metric oracles shared by the core
//! integration tests and the workspace acceptance run.

#![allow(dead_code)]

use evobag::data::Dataset;
use evobag::evobag::{
    bag_fitness, crossover_pair, generation_gap, init_population, mutate_bag, run_evobagging, Bag, EvoConfig,
};
use evobag::metrics::{self, Average, PredictionMatrix};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

fn masked_bag() -> impl Strategy<Value = Bag> {
    prop::collection::vec((0usize..40, any::<bool>()), 1..60).prop_map(|cells| {
        let (indices, mask): (Vec<usize>, Vec<bool>) = cells.into_iter().unzip();
        Bag {
            indices,
            fitness: 0.0,
            correct_mask: Some(mask),
        }
    })
}

pub fn crossover_conserves_multiset(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(masked_bag(), masked_bag(), any::<u64>()), |(a, b, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (ca, cb) = crossover_pair(&a, &b, &mut rng).expect("masks present");
            let mut before = a.indices.clone();
            before.extend(&b.indices);
            let mut after = ca.indices.clone();
            after.extend(&cb.indices);
            prop_assert_eq!(sorted(before), sorted(after));
            prop_assert!(!ca.is_empty() && !cb.is_empty());
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn mutation_preserves_size(cases: u32) -> Result<(), String> {
    let strategy = (1usize..60).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec(0..n, 1..80),
            0usize..100,
            any::<u64>(),
        )
    });
    runner(cases)
        .run(&strategy, |(n, indices, ms, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut bag = Bag::new(indices.clone());
            mutate_bag(&mut bag, n, ms, &mut rng);
            prop_assert_eq!(bag.len(), indices.len());
            prop_assert!(bag.indices.iter().all(|&i| i < n));
            // At most min(ms, len) occurrences differ as a multiset.
            let mut kept = 0;
            let mut pool = sorted(indices.clone());
            for i in sorted(bag.indices.clone()) {
                if let Ok(pos) = pool.binary_search(&i) {
                    pool.remove(pos);
                    kept += 1;
                }
            }
            prop_assert!(kept >= indices.len() - ms.min(indices.len()));
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn tiny_dataset(cells: Vec<(u8, u8, bool)>) -> Dataset {
    let rows = cells.iter().map(|&(a, b, _)| vec![a as f64, b as f64]).collect();
    let labels = cells.iter().map(|&(_, _, y)| usize::from(y)).collect();
    Dataset::new(rows, labels, 2).expect("valid dataset")
}

pub fn population_size_constant(cases: u32) -> Result<(), String> {
    let strategy = (2usize..10, 4usize..20).prop_flat_map(|(n_bags, rows)| {
        (
            prop::collection::vec((0u8..4, 0u8..4, any::<bool>()), rows),
            Just(n_bags),
            0..n_bags,
            0..=n_bags,
            0..=n_bags,
            0usize..4,
            0usize..4,
            any::<u64>(),
        )
    });
    runner(cases)
        .run(&strategy, |(cells, n_bags, gap, elite, mutation, ms, iterations, seed)| {
            let train = tiny_dataset(cells);
            let mut cfg = EvoConfig::from_percentages(n_bags, train.n_samples(), 0.0, 0.0, 0.0, 100.0, iterations);
            cfg.gap_count = gap;
            cfg.elitist_count = elite.min(n_bags - gap);
            cfg.mutation_count = mutation;
            cfg.mutation_size = ms;
            cfg.seed = seed;
            let out = run_evobagging(&train, None, &cfg).expect("valid config");
            prop_assert_eq!(out.population.len(), n_bags);
            prop_assert_eq!(out.ensemble.members().len(), n_bags);
            prop_assert_eq!(out.history.len(), iterations + 1);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn init_obeys_size_law(cases: u32) -> Result<(), String> {
    let strategy = (1usize..200, 1usize..40, any::<u64>())
        .prop_flat_map(|(train, n, seed)| (Just(train), 1..=train, Just(n), 0..n.max(1), Just(seed)));
    runner(cases)
        .run(&strategy, |(train, s, n, gap, seed)| {
            let mut cfg = EvoConfig::from_percentages(n, s, 0.0, 0.0, 0.0, 100.0, 1);
            cfg.gap_count = gap;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let init = init_population(train, &cfg, &mut rng);
            let fresh = generation_gap(&cfg, train, &mut rng);
            prop_assert_eq!(init.len(), n);
            prop_assert_eq!(fresh.len(), gap);
            for bag in init.iter().chain(&fresh) {
                prop_assert!(bag.len() >= s.div_ceil(2) && bag.len() <= s, "size {} for S={}", bag.len(), s);
                prop_assert!(bag.indices.iter().all(|&i| i < train));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn fitness_is_monotone(cases: u32) -> Result<(), String> {
    let strategy = (
        0.001f64..=1.0,
        0.001f64..=1.0,
        0usize..100_000,
        1usize..100_000,
        1.0f64..50_000.0,
    );
    runner(cases)
        .run(&strategy, |(a1, a2, size, extra, k)| {
            prop_assert!(bag_fitness(a1, size + extra, k) > bag_fitness(a1, size, k));
            let (lo, hi) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
            if lo < hi {
                prop_assert!(bag_fitness(hi, size, k) > bag_fitness(lo, size, k));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// The five operator properties at `cases` randomized cases each.
pub fn operator_suite(cases: u32) -> Vec<(&'static str, Result<(), String>)> {
    vec![
        ("crossover multiset conservation", crossover_conserves_multiset(cases)),
        ("mutation size preservation", mutation_preserves_size(cases)),
        ("population-size constancy", population_size_constant(cases)),
        ("init size law", init_obeys_size_law(cases)),
        ("fitness monotonicity", fitness_is_monotone(cases)),
    ]
}

/// Diversity measures straight from their definitions, in the order
/// Q, disagreement, double fault, KW variance, entropy, generalized diversity.
pub fn diversity_oracle(pred: &[Vec<usize>], truth: &[usize]) -> [f64; 6] {
    let l = pred.len();
    let n = truth.len();
    let ok = |i: usize, j: usize| pred[i][j] == truth[j];

    let mut q = Vec::new();
    let mut dis = Vec::new();
    let mut df = Vec::new();
    for i in 0..l {
        for k in 0..l {
            if i >= k {
                continue;
            }
            let count = |a: bool, b: bool| (0..n).filter(|&j| ok(i, j) == a && ok(k, j) == b).count() as f64;
            let (n11, n10, n01, n00) = (count(true, true), count(true, false), count(false, true), count(false, false));
            let den = n11 * n00 + n01 * n10;
            q.push(if den == 0.0 { 0.0 } else { (n11 * n00 - n01 * n10) / den });
            dis.push((n01 + n10) / n as f64);
            df.push(n00 / n as f64);
        }
    }
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;

    let lf = l as f64;
    let mut kw = 0.0;
    let mut entropy = 0.0;
    for j in 0..n {
        let right = (0..l).filter(|&i| ok(i, j)).count();
        let wrong = l - right;
        kw += (right * wrong) as f64;
        entropy += right.min(wrong) as f64 / (l - l.div_ceil(2)) as f64;
    }
    kw /= n as f64 * lf * lf;
    entropy /= n as f64;

    // p1: mean learner error; p2: chance an ordered pair of distinct learners both fail.
    let p1 = (0..l)
        .map(|i| (0..n).filter(|&j| !ok(i, j)).count() as f64 / n as f64)
        .sum::<f64>()
        / lf;
    let mut both = 0.0;
    for i in 0..l {
        for k in 0..l {
            if i != k {
                both += (0..n).filter(|&j| !ok(i, j) && !ok(k, j)).count() as f64 / n as f64;
            }
        }
    }
    let p2 = both / (lf * (lf - 1.0));
    let gd = if p1 == 0.0 { 0.0 } else { 1.0 - p2 / p1 };

    [avg(&q), avg(&dis), avg(&df), kw, entropy, gd]
}

/// Trapezoidal area under the ROC points of every threshold `score >= t`.
pub fn auc_oracle(scores: &[f64], truth: &[usize], positive: usize) -> f64 {
    let pos = truth.iter().filter(|&&t| t == positive).count() as f64;
    let neg = truth.len() as f64 - pos;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.push(f64::INFINITY);
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let point = |t: f64| {
        let hit = |want: bool| {
            scores
                .iter()
                .zip(truth)
                .filter(|(&s, &y)| s >= t && (y == positive) == want)
                .count() as f64
        };
        (hit(false) / neg, hit(true) / pos)
    };
    let pts: Vec<(f64, f64)> = thresholds.into_iter().map(point).collect();
    pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum()
}

pub fn f1_oracle(pred: &[usize], truth: &[usize], average: Average) -> f64 {
    let f1_for = |c: usize| {
        let tp = pred.iter().zip(truth).filter(|(&p, &t)| p == c && t == c).count();
        let fp = pred.iter().zip(truth).filter(|(&p, &t)| p == c && t != c).count();
        let fne = pred.iter().zip(truth).filter(|(&p, &t)| p != c && t == c).count();
        let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fne == 0 { 0.0 } else { tp as f64 / (tp + fne) as f64 };
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    };
    match average {
        Average::Binary(c) => f1_for(c),
        Average::Macro(k) => (0..k).map(f1_for).sum::<f64>() / k as f64,
    }
}

fn close(name: &str, case: usize, got: f64, want: f64, tol: f64) -> Result<(), String> {
    if (got - want).abs() <= tol {
        Ok(())
    } else {
        Err(format!("matrix {case}: {name} = {got}, oracle {want}"))
    }
}

/// Compares the library metrics with the oracles on `matrices` random
/// prediction matrices of at most 5 learners by 20 samples. Returns the
/// number of values compared.
pub fn metric_oracle_suite(matrices: usize, seed: u64, tol: f64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut compared = 0;
    for case in 0..matrices {
        let l = rng.random_range(2..=5);
        let n = rng.random_range(2..=20);
        let k = rng.random_range(2..=3);
        let mut truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        truth[0] = 0;
        truth[1] = 1;
        // Learners biased toward the truth so every error pattern occurs.
        let skill: Vec<f64> = (0..l).map(|_| rng.random_range(0.0..1.0)).collect();
        let pred: Vec<Vec<usize>> = skill
            .iter()
            .map(|&s| {
                truth
                    .iter()
                    .map(|&t| if rng.random_bool(s) { t } else { rng.random_range(0..k) })
                    .collect()
            })
            .collect();

        let m = PredictionMatrix::new(pred.clone(), truth.clone(), k).map_err(|e| e.to_string())?;
        let r = metrics::diversity_measures(&m).map_err(|e| e.to_string())?;
        let got = [
            r.q_statistic,
            r.disagreement,
            r.double_fault,
            r.kohavi_wolpert,
            r.entropy,
            r.generalized_diversity,
        ];
        let names = ["Q", "disagreement", "double fault", "KW", "entropy", "GD"];
        for ((name, g), w) in names.iter().zip(got).zip(diversity_oracle(&pred, &truth)) {
            close(name, case, g, w, tol)?;
            compared += 1;
        }

        for p in &pred {
            for avg in [Average::Binary(0), Average::Binary(1), Average::Macro(k)] {
                let g = metrics::f1(p, &truth, avg).map_err(|e| e.to_string())?;
                close("f1", case, g, f1_oracle(p, &truth, avg), tol)?;
                compared += 1;
            }
        }

        for positive in 0..2 {
            let scores: Vec<f64> = (0..n)
                .map(|j| pred.iter().filter(|p| p[j] == positive).count() as f64 / l as f64)
                .collect();
            let g = metrics::roc_auc(&scores, &truth, positive).map_err(|e| e.to_string())?;
            close("auc", case, g, auc_oracle(&scores, &truth, positive), tol)?;
            let noisy: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let g = metrics::roc_auc(&noisy, &truth, positive).map_err(|e| e.to_string())?;
            close("auc", case, g, auc_oracle(&noisy, &truth, positive), tol)?;
            compared += 2;
        }
    }
    Ok(compared)
}
