//! Bagged tree ensembles and vote aggregation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{bootstrap_indices, Dataset};
use crate::error::{Error, Result};
use crate::metrics::PredictionMatrix;
use crate::rng;
use crate::tree::DecisionTree;

const BAGGING_STREAM: u64 = 0xba66;

/// Which accuracy weights a member in weighted voting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AccuracySource {
    /// Accuracy on the whole training set.
    #[default]
    FullTrain,
    /// Accuracy on the member's own bag (occurrences counted with multiplicity).
    OwnBag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Voting {
    #[default]
    Majority,
    Weighted(AccuracySource),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub bag: Vec<usize>,
    pub tree: DecisionTree,
    pub train_accuracy: f64,
    pub bag_accuracy: f64,
}

impl Member {
    /// Fits a tree on `bag` and records its accuracies.
    pub fn fit<R: rand::Rng + ?Sized>(
        train: &Dataset,
        bag: Vec<usize>,
        config: &crate::tree::TreeConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let tree = DecisionTree::fit(train, &bag, config, rng)?;
        let preds = tree.predict_dataset(train)?;
        let hits = preds.iter().zip(train.labels()).filter(|(p, t)| p == t).count();
        let bag_hits = bag.iter().filter(|&&i| preds[i] == train.label(i)).count();
        Ok(Self {
            train_accuracy: hits as f64 / train.n_samples() as f64,
            bag_accuracy: bag_hits as f64 / bag.len() as f64,
            bag,
            tree,
        })
    }

    pub fn weight(&self, source: AccuracySource) -> f64 {
        match source {
            AccuracySource::FullTrain => self.train_accuracy,
            AccuracySource::OwnBag => self.bag_accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<Member>,
    n_classes: usize,
    voting: Voting,
}

impl Ensemble {
    pub fn new(members: Vec<Member>, n_classes: usize, voting: Voting) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::TooFewLearners { needed: 1, found: 0 });
        }
        Ok(Self {
            members,
            n_classes,
            voting,
        })
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn voting(&self) -> Voting {
        self.voting
    }

    pub fn with_voting(mut self, voting: Voting) -> Self {
        self.voting = voting;
        self
    }

    pub fn mean_depth(&self) -> f64 {
        self.members.iter().map(|m| m.tree.depth() as f64).sum::<f64>() / self.members.len() as f64
    }

    /// Learners x samples prediction table.
    pub fn member_predictions(&self, data: &Dataset) -> Result<Vec<Vec<usize>>> {
        self.members
            .par_iter()
            .map(|m| m.tree.predict_dataset(data))
            .collect()
    }

    pub fn prediction_matrix(&self, data: &Dataset) -> Result<PredictionMatrix> {
        PredictionMatrix::new(self.member_predictions(data)?, data.labels().to_vec(), self.n_classes)
    }

    pub fn predict(&self, data: &Dataset) -> Result<Vec<usize>> {
        let preds = self.member_predictions(data)?;
        Ok(self.aggregate(&preds))
    }

    /// Aggregates an already computed prediction table with this ensemble's rule.
    pub fn aggregate(&self, preds: &[Vec<usize>]) -> Vec<usize> {
        match self.voting {
            Voting::Majority => majority_vote(preds, self.n_classes),
            Voting::Weighted(source) => {
                let weights: Vec<f64> = self.members.iter().map(|m| m.weight(source)).collect();
                weighted_vote(preds, &weights, self.n_classes).expect("one weight per member")
            }
        }
    }

    /// `fractions[c][i]`: share of members voting class `c` on sample `i`.
    pub fn vote_fractions(&self, data: &Dataset) -> Result<Vec<Vec<f64>>> {
        Ok(vote_fractions(&self.member_predictions(data)?, self.n_classes))
    }
}

/// Fits `n_bags` trees, each on a bootstrap of `bag_size` rows (default: all
/// of `train`). Member `m` draws from its own stream keyed by `(seed, m)`.
pub fn fit_bagging(
    train: &Dataset,
    n_bags: usize,
    bag_size: Option<usize>,
    config: &crate::tree::TreeConfig,
    seed: u64,
) -> Result<Ensemble> {
    if n_bags == 0 {
        return Err(Error::OutOfRange {
            name: "n_bags",
            expected: ">= 1",
            value: "0".into(),
        });
    }
    let size = bag_size.unwrap_or(train.n_samples());
    if size == 0 {
        return Err(Error::OutOfRange {
            name: "bag_size",
            expected: ">= 1",
            value: "0".into(),
        });
    }
    let members = (0..n_bags)
        .into_par_iter()
        .map(|m| {
            let mut r = rng::stream(seed, &[BAGGING_STREAM, m as u64]);
            let bag = bootstrap_indices(train.n_samples(), size, &mut r);
            Member::fit(train, bag, config, &mut r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(members, train.n_classes(), Voting::Majority)
}

fn tally(preds: &[Vec<usize>], n_classes: usize, j: usize, counts: &mut [usize]) {
    counts.iter_mut().for_each(|c| *c = 0);
    for row in preds {
        counts[row[j]] += 1;
    }
    debug_assert_eq!(counts.len(), n_classes);
}

fn argmax_lowest<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for c in 1..values.len() {
        if values[c] > values[best] {
            best = c;
        }
    }
    best
}

/// Per-sample plurality; ties go to the lowest class index.
pub fn majority_vote(preds: &[Vec<usize>], n_classes: usize) -> Vec<usize> {
    let n = preds.first().map_or(0, Vec::len);
    let mut counts = vec![0; n_classes];
    (0..n)
        .map(|j| {
            tally(preds, n_classes, j, &mut counts);
            argmax_lowest(&counts)
        })
        .collect()
}

/// Per-sample class with the largest weight sum. Ties go to the class with
/// more raw votes, then to the lowest class index, so equal weights
/// reproduce [`majority_vote`] exactly.
pub fn weighted_vote(preds: &[Vec<usize>], weights: &[f64], n_classes: usize) -> Result<Vec<usize>> {
    if preds.len() != weights.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: weights.len(),
        });
    }
    let n = preds.first().map_or(0, Vec::len);
    let mut sums = vec![0.0; n_classes];
    let mut counts = vec![0usize; n_classes];
    Ok((0..n)
        .map(|j| {
            sums.iter_mut().for_each(|s| *s = 0.0);
            tally(preds, n_classes, j, &mut counts);
            for (row, &w) in preds.iter().zip(weights) {
                sums[row[j]] += w;
            }
            let mut best = 0;
            for c in 1..n_classes {
                if sums[c] > sums[best] || (sums[c] == sums[best] && counts[c] > counts[best]) {
                    best = c;
                }
            }
            best
        })
        .collect())
}

/// Class-major vote shares (`out[c][i]`).
pub fn vote_fractions(preds: &[Vec<usize>], n_classes: usize) -> Vec<Vec<f64>> {
    let n = preds.first().map_or(0, Vec::len);
    let l = preds.len() as f64;
    let mut out = vec![vec![0.0; n]; n_classes];
    for row in preds {
        for (j, &p) in row.iter().enumerate() {
            out[p][j] += 1.0;
        }
    }
    out.iter_mut().flatten().for_each(|v| *v /= l);
    out
}
