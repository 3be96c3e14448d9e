//! Evolutionary bagging.
//!
//! A population of `N` bootstrap bags is evolved for a fixed number of
//! generations. Each generation keeps the `k` fittest bags (elitism, off by
//! default), injects `G` fresh random bags, breeds the remaining slots from
//! rank-selected parents with prediction-directed crossover, mutates `M`
//! random non-elite bags and refits every changed bag.
//!
//! Fitness is `alpha * (K + size) / K`, where `alpha` is the bag tree's
//! accuracy (or F1) on the whole training set.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{bootstrap_indices, Dataset};
use crate::ensemble::{AccuracySource, Ensemble, Member, Voting};
use crate::error::{Error, Result};
use crate::metrics::{self, Average, PredictionMatrix};
use crate::rng;
use crate::tree::{DecisionTree, TreeConfig};

const EVO_STREAM: u64 = 0xe7b0;
const INIT: u64 = 0;
const GAP: u64 = 1;
const SELECT: u64 = 2;
const CROSS: u64 = 3;
const MUTATE_PICK: u64 = 4;
const MUTATE: u64 = 5;
const FIT: u64 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FitnessMetric {
    #[default]
    Accuracy,
    /// Positive class = minority class for binary tasks; macro average otherwise.
    F1,
}

impl FitnessMetric {
    pub fn score(self, pred: &[usize], truth: &[usize], average: Average) -> f64 {
        match self {
            FitnessMetric::Accuracy => metrics::accuracy(pred, truth),
            FitnessMetric::F1 => metrics::f1(pred, truth, average),
        }
        .expect("equal lengths")
    }
}

/// The averaging F1 uses on `d`.
pub fn default_average(d: &Dataset) -> Average {
    if d.n_classes() == 2 {
        Average::Binary(d.minority_class())
    } else {
        Average::Macro(d.n_classes())
    }
}

/// `round(pct% of base)`, halves rounded up.
pub fn percent_count(pct: f64, base: usize) -> usize {
    (pct / 100.0 * base as f64 + 0.5 + 1e-9).floor().max(0.0) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvoConfig {
    /// N
    pub n_bags: usize,
    /// S
    pub max_bag_size: usize,
    /// G
    pub gap_count: usize,
    /// M
    pub mutation_count: usize,
    /// MS
    pub mutation_size: usize,
    /// K
    pub size_bias: f64,
    pub max_iterations: usize,
    pub fitness_metric: FitnessMetric,
    pub elitist_count: usize,
    pub seed: u64,
    /// Data the fitness metric is measured on.
    pub alpha_source: AccuracySource,
    pub tree: TreeConfig,
    pub voting: Voting,
}

impl EvoConfig {
    /// Builds a config from the usual percentages: `G` and `M` as % of `N`,
    /// `MS` as % of `S`, with `S` set to the training-set size.
    pub fn from_percentages(
        n_bags: usize,
        train_size: usize,
        gap_pct: f64,
        mutation_pct: f64,
        mutation_size_pct: f64,
        size_bias: f64,
        max_iterations: usize,
    ) -> Self {
        Self {
            n_bags,
            max_bag_size: train_size,
            gap_count: percent_count(gap_pct, n_bags),
            mutation_count: percent_count(mutation_pct, n_bags),
            mutation_size: percent_count(mutation_size_pct, train_size),
            size_bias,
            max_iterations,
            fitness_metric: FitnessMetric::Accuracy,
            elitist_count: 0,
            seed: 0,
            alpha_source: AccuracySource::FullTrain,
            tree: TreeConfig::default(),
            voting: Voting::Majority,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_bags == 0 {
            return bad("n_bags must be >= 1".into());
        }
        if self.max_bag_size == 0 {
            return bad("max_bag_size must be >= 1".into());
        }
        if self.gap_count >= self.n_bags && self.n_bags > 1 {
            return bad(format!("gap_count {} must be < n_bags {}", self.gap_count, self.n_bags));
        }
        if self.gap_count + self.elitist_count > self.n_bags {
            return bad(format!(
                "gap_count {} + elitist_count {} exceed n_bags {}",
                self.gap_count, self.elitist_count, self.n_bags
            ));
        }
        if self.mutation_count > self.n_bags {
            return bad(format!("mutation_count {} exceeds n_bags {}", self.mutation_count, self.n_bags));
        }
        if self.mutation_size > self.max_bag_size {
            return bad(format!(
                "mutation_size {} exceeds max_bag_size {}",
                self.mutation_size, self.max_bag_size
            ));
        }
        if !(self.size_bias >= 1.0 && self.size_bias.is_finite()) {
            return bad(format!("size_bias must be a finite value >= 1, got {}", self.size_bias));
        }
        Ok(())
    }

    /// Crossover parent count `C = N - G - k`, rounded down to even.
    pub fn crossover_count(&self) -> usize {
        let c = self.n_bags.saturating_sub(self.gap_count + self.elitist_count);
        c - c % 2
    }

    /// Fresh bags per generation, including the slot freed by an odd `C`.
    pub fn effective_gap(&self) -> usize {
        self.n_bags - self.elitist_count - self.crossover_count()
    }
}

/// An evolutionary individual: a multiset of training-row indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bag {
    pub indices: Vec<usize>,
    pub fitness: f64,
    /// Per occurrence: whether the bag's own tree classifies it correctly.
    pub correct_mask: Option<Vec<bool>>,
}

impl Bag {
    pub fn new(indices: Vec<usize>) -> Self {
        Self {
            indices,
            fitness: 0.0,
            correct_mask: None,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Bootstrap bag whose size is uniform on `[ceil(S/2), S]`.
pub fn random_bag<R: Rng + ?Sized>(train_size: usize, max_bag_size: usize, rng: &mut R) -> Bag {
    let size = rng.random_range(max_bag_size.div_ceil(2)..=max_bag_size);
    Bag::new(bootstrap_indices(train_size, size, rng))
}

pub fn init_population<R: Rng + ?Sized>(train_size: usize, cfg: &EvoConfig, rng: &mut R) -> Vec<Bag> {
    (0..cfg.n_bags)
        .map(|_| random_bag(train_size, cfg.max_bag_size, rng))
        .collect()
}

/// The `G` fresh bags of one generation.
pub fn generation_gap<R: Rng + ?Sized>(cfg: &EvoConfig, train_size: usize, rng: &mut R) -> Vec<Bag> {
    (0..cfg.gap_count)
        .map(|_| random_bag(train_size, cfg.max_bag_size, rng))
        .collect()
}

/// `alpha * (K + bag_size) / K`.
pub fn bag_fitness(alpha: f64, bag_size: usize, size_bias: f64) -> f64 {
    alpha * (size_bias + bag_size as f64) / size_bias
}

/// Fits the bag's tree, caches fitness and correctness on `bag`, and returns
/// the fitted member with its full training-set predictions.
pub fn evaluate_bag<R: Rng + ?Sized>(
    bag: &mut Bag,
    train: &Dataset,
    cfg: &EvoConfig,
    rng: &mut R,
) -> Result<(Member, Vec<usize>)> {
    let tree = DecisionTree::fit(train, &bag.indices, &cfg.tree, rng)?;
    let preds = tree.predict_dataset(train)?;
    let average = default_average(train);
    let correct: Vec<bool> = bag.indices.iter().map(|&i| preds[i] == train.label(i)).collect();
    let bag_preds: Vec<usize> = bag.indices.iter().map(|&i| preds[i]).collect();
    let bag_truth: Vec<usize> = bag.indices.iter().map(|&i| train.label(i)).collect();
    let train_alpha = cfg.fitness_metric.score(&preds, train.labels(), average);
    let bag_alpha = cfg.fitness_metric.score(&bag_preds, &bag_truth, average);
    let alpha = match cfg.alpha_source {
        AccuracySource::FullTrain => train_alpha,
        AccuracySource::OwnBag => bag_alpha,
    };
    bag.fitness = bag_fitness(alpha, bag.len(), cfg.size_bias);
    bag.correct_mask = Some(correct.clone());

    let hits = preds.iter().zip(train.labels()).filter(|(p, t)| p == t).count();
    let member = Member {
        bag: bag.indices.clone(),
        tree,
        train_accuracy: hits as f64 / train.n_samples() as f64,
        bag_accuracy: correct.iter().filter(|&&c| c).count() as f64 / bag.len() as f64,
    };
    Ok((member, preds))
}

/// Positions of the `count` fittest bags (ties to the lower position), in
/// rank order.
pub fn top_by_fitness(population: &[Bag], count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..population.len()).collect();
    order.sort_by(|&a, &b| population[b].fitness.total_cmp(&population[a].fitness).then(a.cmp(&b)));
    order.truncate(count);
    order
}

/// Rank selection of `count` crossover parents, returned in random pairing order.
pub fn select_crossover_parents<R: Rng + ?Sized>(
    population: &[Bag],
    count: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if count > population.len() {
        return Err(Error::OutOfRange {
            name: "crossover parent count",
            expected: "<= population size",
            value: count.to_string(),
        });
    }
    let mut chosen = top_by_fitness(population, count);
    chosen.shuffle(rng);
    Ok(chosen)
}

/// Positions of the `k` fittest bags, carried unchanged to the next generation.
pub fn elitist_carryover(population: &[Bag], k: usize) -> Vec<usize> {
    top_by_fitness(population, k.min(population.len()))
}

/// Each child keeps its parent's correctly classified occurrences and
/// receives the other parent's misclassified ones. A child left empty takes
/// one random occurrence from its sibling.
pub fn crossover_pair<R: Rng + ?Sized>(a: &Bag, b: &Bag, rng: &mut R) -> Result<(Bag, Bag)> {
    let mask_a = a.correct_mask.as_ref().ok_or(Error::MissingCorrectness)?;
    let mask_b = b.correct_mask.as_ref().ok_or(Error::MissingCorrectness)?;
    if mask_a.len() != a.len() || mask_b.len() != b.len() {
        return Err(Error::MissingCorrectness);
    }
    let split = |bag: &Bag, mask: &[bool]| -> (Vec<usize>, Vec<usize>) {
        let (right, wrong): (Vec<_>, Vec<_>) = bag.indices.iter().zip(mask).partition(|(_, &ok)| ok);
        (
            right.into_iter().map(|(&i, _)| i).collect(),
            wrong.into_iter().map(|(&i, _)| i).collect(),
        )
    };
    let (a_right, a_wrong) = split(a, mask_a);
    let (b_right, b_wrong) = split(b, mask_b);
    let mut child_a = a_right;
    child_a.extend(b_wrong);
    let mut child_b = b_right;
    child_b.extend(a_wrong);

    if child_a.is_empty() && !child_b.is_empty() {
        let pos = rng.random_range(0..child_b.len());
        child_a.push(child_b.swap_remove(pos));
    } else if child_b.is_empty() && !child_a.is_empty() {
        let pos = rng.random_range(0..child_a.len());
        child_b.push(child_a.swap_remove(pos));
    }
    Ok((Bag::new(child_a), Bag::new(child_b)))
}

/// Replaces `min(MS, |bag|)` random occurrences with rows drawn from outside
/// the bag (without replacement when enough exist). A bag that already
/// covers every row draws from the whole training set instead.
pub fn mutate_bag<R: Rng + ?Sized>(bag: &mut Bag, train_size: usize, mutation_size: usize, rng: &mut R) {
    let r = mutation_size.min(bag.len());
    if r == 0 {
        return;
    }
    let mut present = vec![false; train_size];
    for &i in &bag.indices {
        present[i] = true;
    }
    let complement: Vec<usize> = (0..train_size).filter(|&i| !present[i]).collect();

    let mut removed: Vec<usize> = sample(rng, bag.len(), r).into_vec();
    removed.sort_unstable_by(|a, b| b.cmp(a));
    for pos in removed {
        bag.indices.swap_remove(pos);
    }
    let inserted: Vec<usize> = if complement.is_empty() {
        bootstrap_indices(train_size, r, rng)
    } else if complement.len() >= r {
        sample(rng, complement.len(), r).into_iter().map(|p| complement[p]).collect()
    } else {
        (0..r).map(|_| complement[rng.random_range(0..complement.len())]).collect()
    };
    bag.indices.extend(inserted);
    bag.fitness = 0.0;
    bag.correct_mask = None;
}

/// Share of training rows present in at least one bag.
pub fn coverage_ratio(population: &[Bag], train_size: usize) -> f64 {
    let mut seen = vec![false; train_size];
    for bag in population {
        for &i in &bag.indices {
            seen[i] = true;
        }
    }
    seen.iter().filter(|&&s| s).count() as f64 / train_size as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub iteration: usize,
    pub mean_fitness: f64,
    pub mean_bag_size: f64,
    pub coverage_ratio: f64,
    pub train_metric: f64,
    pub test_metric: Option<f64>,
    pub mean_bias: f64,
}

#[derive(Debug, Clone)]
pub struct EvoOutcome {
    pub ensemble: Ensemble,
    pub history: Vec<GenerationStats>,
    pub population: Vec<Bag>,
}

#[derive(Clone)]
struct Slot {
    bag: Bag,
    member: Option<Member>,
    train_preds: Vec<usize>,
}

fn evaluate_slots(slots: &mut [Slot], train: &Dataset, cfg: &EvoConfig, iteration: usize) -> Result<()> {
    slots
        .par_iter_mut()
        .enumerate()
        .filter(|(_, s)| s.member.is_none())
        .try_for_each(|(pos, s)| {
            let mut r = rng::stream(cfg.seed, &[EVO_STREAM, iteration as u64, FIT, pos as u64]);
            let (member, preds) = evaluate_bag(&mut s.bag, train, cfg, &mut r)?;
            s.member = Some(member);
            s.train_preds = preds;
            Ok(())
        })
}

fn generation_stats(
    slots: &[Slot],
    train: &Dataset,
    test: Option<&Dataset>,
    cfg: &EvoConfig,
    iteration: usize,
) -> Result<GenerationStats> {
    let n = slots.len() as f64;
    let train_preds: Vec<Vec<usize>> = slots.iter().map(|s| s.train_preds.clone()).collect();
    let ensemble = current_ensemble(slots, train.n_classes(), cfg.voting)?;
    let average = default_average(train);
    let train_metric = cfg
        .fitness_metric
        .score(&ensemble.aggregate(&train_preds), train.labels(), average);
    let (test_metric, bias_matrix) = match test {
        Some(t) => {
            let preds = ensemble.member_predictions(t)?;
            let metric = cfg.fitness_metric.score(&ensemble.aggregate(&preds), t.labels(), average);
            (Some(metric), PredictionMatrix::new(preds, t.labels().to_vec(), t.n_classes())?)
        }
        None => (None, PredictionMatrix::new(train_preds, train.labels().to_vec(), train.n_classes())?),
    };
    let bags: Vec<Bag> = slots.iter().map(|s| s.bag.clone()).collect();
    Ok(GenerationStats {
        iteration,
        mean_fitness: slots.iter().map(|s| s.bag.fitness).sum::<f64>() / n,
        mean_bag_size: slots.iter().map(|s| s.bag.len() as f64).sum::<f64>() / n,
        coverage_ratio: coverage_ratio(&bags, train.n_samples()),
        train_metric,
        test_metric,
        mean_bias: metrics::average_ensemble_bias(&bias_matrix),
    })
}

fn current_ensemble(slots: &[Slot], n_classes: usize, voting: Voting) -> Result<Ensemble> {
    let members = slots
        .iter()
        .map(|s| s.member.clone().expect("evaluated slot"))
        .collect();
    Ensemble::new(members, n_classes, voting)
}

/// Runs the full evolutionary loop. `history[0]` describes the initial
/// population; `history[i]` the population after generation `i`.
pub fn run_evobagging(train: &Dataset, test: Option<&Dataset>, cfg: &EvoConfig) -> Result<EvoOutcome> {
    cfg.validate()?;
    let train_size = train.n_samples();
    if train_size < 2 {
        return Err(Error::InvalidDataset("need at least 2 training rows".into()));
    }
    if let Some(t) = test {
        if t.n_features() != train.n_features() {
            return Err(Error::WidthMismatch {
                expected: train.n_features(),
                found: t.n_features(),
            });
        }
    }

    let mut r = rng::stream(cfg.seed, &[EVO_STREAM, 0, INIT]);
    let mut slots: Vec<Slot> = init_population(train_size, cfg, &mut r)
        .into_iter()
        .map(|bag| Slot {
            bag,
            member: None,
            train_preds: Vec::new(),
        })
        .collect();
    evaluate_slots(&mut slots, train, cfg, 0)?;
    let mut history = vec![generation_stats(&slots, train, test, cfg, 0)?];

    let n_parents = cfg.crossover_count();
    let n_gap = cfg.effective_gap();
    for iteration in 1..=cfg.max_iterations {
        let it = iteration as u64;
        let bags: Vec<Bag> = slots.iter().map(|s| s.bag.clone()).collect();
        let mut next: Vec<Slot> = Vec::with_capacity(cfg.n_bags);

        for pos in elitist_carryover(&bags, cfg.elitist_count) {
            next.push(slots[pos].clone());
        }
        let n_elite = next.len();

        let gap_cfg = EvoConfig {
            gap_count: n_gap,
            ..cfg.clone()
        };
        let mut r = rng::stream(cfg.seed, &[EVO_STREAM, it, GAP]);
        next.extend(generation_gap(&gap_cfg, train_size, &mut r).into_iter().map(|bag| Slot {
            bag,
            member: None,
            train_preds: Vec::new(),
        }));

        let mut r = rng::stream(cfg.seed, &[EVO_STREAM, it, SELECT]);
        let parents = select_crossover_parents(&bags, n_parents, &mut r)?;
        for (pair, p) in parents.chunks_exact(2).enumerate() {
            let mut r = rng::stream(cfg.seed, &[EVO_STREAM, it, CROSS, pair as u64]);
            let (a, b) = crossover_pair(&bags[p[0]], &bags[p[1]], &mut r)?;
            for bag in [a, b] {
                next.push(Slot {
                    bag,
                    member: None,
                    train_preds: Vec::new(),
                });
            }
        }
        debug_assert_eq!(next.len(), cfg.n_bags);

        let mutable = next.len() - n_elite;
        let mut r = rng::stream(cfg.seed, &[EVO_STREAM, it, MUTATE_PICK]);
        let picks = sample(&mut r, mutable, cfg.mutation_count.min(mutable));
        for pick in picks {
            let pos = n_elite + pick;
            let mut r = rng::stream(cfg.seed, &[EVO_STREAM, it, MUTATE, pos as u64]);
            mutate_bag(&mut next[pos].bag, train_size, cfg.mutation_size, &mut r);
        }
        // Crossover children and mutants have stale caches; gap bags have none.
        for slot in &mut next[n_elite..] {
            slot.member = None;
        }

        evaluate_slots(&mut next, train, cfg, iteration)?;
        slots = next;
        history.push(generation_stats(&slots, train, test, cfg, iteration)?);
    }

    let ensemble = current_ensemble(&slots, train.n_classes(), cfg.voting)?;
    Ok(EvoOutcome {
        ensemble,
        history,
        population: slots.into_iter().map(|s| s.bag).collect(),
    })
}
