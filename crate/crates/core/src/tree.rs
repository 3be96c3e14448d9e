//! CART classification trees with Gini impurity.
//!
//! Trees are stored as a flat arena in preorder. Sample multisets are
//! compressed to `(row, multiplicity)` pairs before fitting, so duplicated
//! bag entries act as integer sample weights.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// How candidate splits are searched at each node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitMode {
    /// Exact search over every feature (bagging).
    AllFeatures,
    /// Exact search over a random subset of `k` features per node; `None`
    /// means `ceil(sqrt(n_features))` (random forest).
    RandomSubspace(Option<usize>),
    /// One uniform random threshold per feature, best one kept (extra-trees).
    RandomThreshold,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub split_mode: SplitMode,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            split_mode: SplitMode::AllFeatures,
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

impl TreeConfig {
    pub fn with_mode(split_mode: SplitMode) -> Self {
        Self {
            split_mode,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        class_counts: Vec<usize>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_features: usize,
    n_classes: usize,
}

/// `1 - sum(p_c^2)`.
pub fn gini_impurity(class_counts: &[usize]) -> Result<f64> {
    let total: usize = class_counts.iter().sum();
    if total == 0 {
        return Err(Error::ZeroCounts);
    }
    let t = total as f64;
    Ok(1.0 - class_counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>())
}

fn argmax_lowest(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &v) in counts.iter().enumerate().skip(1) {
        if v > counts[best] {
            best = c;
        }
    }
    best
}

#[derive(Clone, Copy)]
struct Weighted {
    row: usize,
    weight: u64,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

struct Builder<'a, R: Rng + ?Sized> {
    data: &'a Dataset,
    config: &'a TreeConfig,
    rng: &'a mut R,
    subspace: Option<usize>,
    // scratch: (value, class, weight)
    column: Vec<(f64, usize, u64)>,
    left: Vec<u64>,
    right: Vec<u64>,
}

impl<R: Rng + ?Sized> Builder<'_, R> {
    fn counts(&self, samples: &[Weighted]) -> Vec<usize> {
        let mut counts = vec![0usize; self.data.n_classes()];
        for s in samples {
            counts[self.data.label(s.row)] += s.weight as usize;
        }
        counts
    }

    /// Best split on one feature, scored by `sum_children sum_c n_c^2 / n_child`
    /// (maximising it minimises weighted child Gini).
    fn evaluate_feature(&mut self, samples: &[Weighted], feature: usize, parent: &[usize]) -> Option<Candidate> {
        self.column.clear();
        self.column.extend(
            samples
                .iter()
                .map(|s| (self.data.value(s.row, feature), self.data.label(s.row), s.weight)),
        );
        let (lo, hi) = self
            .column
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(v, _, _)| (lo.min(v), hi.max(v)));
        if lo >= hi {
            return None;
        }

        if self.config.split_mode == SplitMode::RandomThreshold {
            let threshold = self.rng.random_range(lo..hi);
            self.left.iter_mut().for_each(|c| *c = 0);
            self.right.iter_mut().for_each(|c| *c = 0);
            for &(v, c, w) in &self.column {
                if v <= threshold {
                    self.left[c] += w;
                } else {
                    self.right[c] += w;
                }
            }
            let score = split_score(&self.left) + split_score(&self.right);
            return Some(Candidate { feature, threshold, score });
        }

        self.column
            .sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
        self.left.iter_mut().for_each(|c| *c = 0);
        for (r, &p) in self.right.iter_mut().zip(parent) {
            *r = p as u64;
        }
        let total: u64 = parent.iter().map(|&c| c as u64).sum();
        let mut sq_left: u64 = 0;
        let mut sq_right: u64 = self.right.iter().map(|c| c * c).sum();
        let mut w_left: u64 = 0;
        let mut best: Option<Candidate> = None;
        for i in 0..self.column.len() - 1 {
            let (v, c, w) = self.column[i];
            sq_left += 2 * self.left[c] * w + w * w;
            sq_right -= 2 * self.right[c] * w - w * w;
            self.left[c] += w;
            self.right[c] -= w;
            w_left += w;
            let next = self.column[i + 1].0;
            if next <= v {
                continue;
            }
            let score = sq_left as f64 / w_left as f64 + sq_right as f64 / (total - w_left) as f64;
            if best.as_ref().is_none_or(|b| better(score, b.score)) {
                let mut threshold = 0.5 * (v + next);
                if threshold >= next {
                    threshold = v;
                }
                best = Some(Candidate { feature, threshold, score });
            }
        }
        best
    }

    fn best_split(&mut self, samples: &[Weighted], parent: &[usize]) -> Option<Candidate> {
        let d = self.data.n_features();
        let mut features: Vec<usize> = (0..d).collect();
        let (primary, rest): (Vec<usize>, Vec<usize>) = match self.subspace {
            Some(k) if k < d => {
                features.shuffle(self.rng);
                let mut head = features[..k].to_vec();
                head.sort_unstable();
                (head, features[k..].to_vec())
            }
            _ => (features, Vec::new()),
        };

        let mut best: Option<Candidate> = None;
        for f in primary {
            if let Some(c) = self.evaluate_feature(samples, f, parent) {
                if best.as_ref().is_none_or(|b| better(c.score, b.score)) {
                    best = Some(c);
                }
            }
        }
        if best.is_none() {
            // Drawn features were all constant here: keep drawing until one splits.
            for f in rest {
                if let Some(c) = self.evaluate_feature(samples, f, parent) {
                    return Some(c);
                }
            }
        }
        best
    }

    fn build(&mut self, mut samples: Vec<Weighted>) -> Vec<Node> {
        struct Task {
            lo: usize,
            hi: usize,
            depth: usize,
            parent: Option<(usize, bool)>,
        }
        let mut nodes = Vec::new();
        let mut stack = vec![Task {
            lo: 0,
            hi: samples.len(),
            depth: 0,
            parent: None,
        }];
        while let Some(task) = stack.pop() {
            let id = nodes.len();
            if let Some((p, is_left)) = task.parent {
                if let Node::Split { left, right, .. } = &mut nodes[p] {
                    *(if is_left { left } else { right }) = id;
                }
            }
            let segment = &samples[task.lo..task.hi];
            let counts = self.counts(segment);
            let weight: usize = counts.iter().sum();
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let depth_capped = self.config.max_depth.is_some_and(|m| task.depth >= m);
            let split = if pure || depth_capped || weight < self.config.min_samples_split {
                None
            } else {
                self.best_split(segment, &counts)
            };
            let Some(split) = split else {
                nodes.push(Node::Leaf { class_counts: counts });
                continue;
            };

            let segment = &mut samples[task.lo..task.hi];
            let mut mid = 0;
            for i in 0..segment.len() {
                if self.data.value(segment[i].row, split.feature) <= split.threshold {
                    segment.swap(i, mid);
                    mid += 1;
                }
            }
            debug_assert!(mid > 0 && mid < segment.len());
            nodes.push(Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left: usize::MAX,
                right: usize::MAX,
            });
            let mid = task.lo + mid;
            stack.push(Task {
                lo: mid,
                hi: task.hi,
                depth: task.depth + 1,
                parent: Some((id, false)),
            });
            stack.push(Task {
                lo: task.lo,
                hi: mid,
                depth: task.depth + 1,
                parent: Some((id, true)),
            });
        }
        nodes
    }
}

fn split_score(counts: &[u64]) -> f64 {
    let w: u64 = counts.iter().sum();
    if w == 0 {
        return 0.0;
    }
    counts.iter().map(|c| c * c).sum::<u64>() as f64 / w as f64
}

fn better(score: f64, best: f64) -> bool {
    score > best + 1e-12 * best.abs().max(1.0)
}

impl DecisionTree {
    /// Fits a tree on the multiset `sample_indices` of rows of `train`.
    pub fn fit<R: Rng + ?Sized>(
        train: &Dataset,
        sample_indices: &[usize],
        config: &TreeConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if sample_indices.is_empty() {
            return Err(Error::EmptySample);
        }
        let n = train.n_samples();
        if let Some(&bad) = sample_indices.iter().find(|&&i| i >= n) {
            return Err(Error::OutOfRange {
                name: "sample index",
                expected: "0..n_samples",
                value: bad.to_string(),
            });
        }
        let d = train.n_features();
        let subspace = match config.split_mode {
            SplitMode::RandomSubspace(k) => {
                let k = k.unwrap_or_else(|| (d as f64).sqrt().ceil() as usize);
                if k == 0 || k > d {
                    return Err(Error::OutOfRange {
                        name: "random subspace size",
                        expected: "1..=n_features",
                        value: k.to_string(),
                    });
                }
                Some(k)
            }
            _ => None,
        };

        let mut multiplicity = vec![0u64; n];
        for &i in sample_indices {
            multiplicity[i] += 1;
        }
        let samples: Vec<Weighted> = multiplicity
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0)
            .map(|(row, &weight)| Weighted { row, weight })
            .collect();

        let k = train.n_classes();
        let mut builder = Builder {
            data: train,
            config,
            rng,
            subspace,
            column: Vec::with_capacity(samples.len()),
            left: vec![0; k],
            right: vec![0; k],
        };
        let nodes = builder.build(samples);
        Ok(Self {
            nodes,
            n_features: d,
            n_classes: k,
        })
    }

    /// A single-leaf tree.
    pub fn constant(class_counts: Vec<usize>, n_features: usize) -> Result<Self> {
        if class_counts.iter().sum::<usize>() == 0 {
            return Err(Error::ZeroCounts);
        }
        Ok(Self {
            n_classes: class_counts.len(),
            nodes: vec![Node::Leaf { class_counts }],
            n_features,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Longest root-to-leaf path in edges.
    pub fn depth(&self) -> usize {
        let mut deepest = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((id, d)) = stack.pop() {
            match &self.nodes[id] {
                Node::Leaf { .. } => deepest = deepest.max(d),
                Node::Split { left, right, .. } => {
                    stack.push((*left, d + 1));
                    stack.push((*right, d + 1));
                }
            }
        }
        deepest
    }

    fn leaf_for(&self, row: &[f64]) -> &[usize] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { class_counts } => return class_counts,
                Node::Split { feature, threshold, left, right } => {
                    id = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Class for `row`; leaf ties resolve to the lowest class index.
    pub fn predict(&self, row: &[f64]) -> Result<usize> {
        if row.len() != self.n_features {
            return Err(Error::WidthMismatch {
                expected: self.n_features,
                found: row.len(),
            });
        }
        Ok(argmax_lowest(self.leaf_for(row)))
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<usize>> {
        if data.n_features() != self.n_features {
            return Err(Error::WidthMismatch {
                expected: self.n_features,
                found: data.n_features(),
            });
        }
        Ok(data.rows().map(|r| argmax_lowest(self.leaf_for(r))).collect())
    }

    /// Preorder text dump, one node per line:
    /// `split <feature> <threshold>` or `leaf <count> <count> ...`.
    pub fn to_text(&self) -> String {
        let mut out = format!("tree {} {}\n", self.n_features, self.n_classes);
        for node in &self.nodes {
            match node {
                Node::Split { feature, threshold, .. } => {
                    let _ = writeln!(out, "split {feature} {threshold:?}");
                }
                Node::Leaf { class_counts } => {
                    out.push_str("leaf");
                    for c in class_counts {
                        let _ = write!(out, " {c}");
                    }
                    out.push('\n');
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let err = |line: usize, message: &str| Error::TreeParse {
            line,
            message: message.to_owned(),
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, head) = lines.next().ok_or_else(|| err(1, "empty input"))?;
        let head: Vec<&str> = head.split_whitespace().collect();
        let (n_features, n_classes) = match head.as_slice() {
            ["tree", f, c] => (
                f.parse::<usize>().map_err(|_| err(1, "bad feature count"))?,
                c.parse::<usize>().map_err(|_| err(1, "bad class count"))?,
            ),
            _ => return Err(err(1, "expected `tree <features> <classes>`")),
        };

        let mut nodes = Vec::new();
        // open splits awaiting children: (node id, children seen)
        let mut open: Vec<(usize, u8)> = Vec::new();
        for (i, line) in lines {
            let line_no = i + 1;
            if nodes.len() > 0 && open.is_empty() {
                return Err(err(line_no, "trailing node after complete tree"));
            }
            let id = nodes.len();
            if let Some((p, seen)) = open.last_mut() {
                if let Node::Split { left, right, .. } = &mut nodes[*p] {
                    if *seen == 0 {
                        *left = id;
                    } else {
                        *right = id;
                    }
                }
                *seen += 1;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.as_slice() {
                ["split", f, t] => {
                    let feature = f.parse::<usize>().map_err(|_| err(line_no, "bad feature"))?;
                    let threshold = t.parse::<f64>().map_err(|_| err(line_no, "bad threshold"))?;
                    if feature >= n_features {
                        return Err(err(line_no, "feature index out of range"));
                    }
                    nodes.push(Node::Split {
                        feature,
                        threshold,
                        left: usize::MAX,
                        right: usize::MAX,
                    });
                    open.push((id, 0));
                }
                ["leaf", counts @ ..] => {
                    let class_counts = counts
                        .iter()
                        .map(|c| c.parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| err(line_no, "bad class count"))?;
                    if class_counts.len() != n_classes || class_counts.iter().sum::<usize>() == 0 {
                        return Err(err(line_no, "leaf counts must be nonzero, one per class"));
                    }
                    nodes.push(Node::Leaf { class_counts });
                    while open.last().is_some_and(|&(_, seen)| seen == 2) {
                        open.pop();
                    }
                }
                _ => return Err(err(line_no, "expected `split` or `leaf`")),
            }
        }
        if nodes.is_empty() || !open.is_empty() {
            return Err(err(text.lines().count(), "incomplete tree"));
        }
        Ok(Self {
            nodes,
            n_features,
            n_classes,
        })
    }
}
