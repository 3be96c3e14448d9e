//! Datasets, CSV ingestion, synthetic benchmarks and resampling helpers.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng;

/// Dense feature matrix with integer class labels.
///
/// Rows are stored contiguously (row-major). Labels are always in
/// `0..n_classes` and there are at least two classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<usize>,
    n_classes: usize,
    feature_names: Option<Vec<String>>,
    class_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n_features) {
            return Err(Error::InvalidDataset(format!(
                "row {i} has {} features, expected {n_features}",
                r.len()
            )));
        }
        let features = rows.into_iter().flatten().collect();
        Self::from_flat(features, n_features, labels, n_classes)
    }

    /// Builds a dataset from a row-major buffer of `labels.len() * n_features` values.
    pub fn from_flat(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::InvalidDataset(format!(
                "{} feature values do not fill {} rows of width {n_features}",
                features.len(),
                labels.len()
            )));
        }
        if n_classes < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 classes, got {n_classes}"
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::InvalidDataset(format!(
                "label {bad} outside 0..{n_classes}"
            )));
        }
        Ok(Self {
            features,
            n_features,
            labels,
            n_classes,
            feature_names: None,
            class_names: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features {
            return Err(Error::LengthMismatch {
                left: names.len(),
                right: self.n_features,
            });
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_classes {
            return Err(Error::LengthMismatch {
                left: names.len(),
                right: self.n_classes,
            });
        }
        self.class_names = Some(names);
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    #[inline]
    pub fn value(&self, i: usize, feature: usize) -> f64 {
        self.features[i * self.n_features + feature]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_samples()).map(move |i| self.row(i))
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Class with the fewest samples; ties go to the higher class index.
    pub fn minority_class(&self) -> usize {
        let counts = self.class_counts();
        (0..self.n_classes)
            .rev()
            .min_by_key(|&c| counts[c])
            .unwrap_or(0)
    }

    /// Class with the most samples; ties go to the lower class index.
    pub fn majority_class(&self) -> usize {
        let counts = self.class_counts();
        let mut best = 0;
        for c in 1..self.n_classes {
            if counts[c] > counts[best] {
                best = c;
            }
        }
        best
    }

    /// Rows `indices` in the given order (duplicates allowed). Class count and
    /// names are kept even if some class no longer appears.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            features,
            n_features: self.n_features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
        }
    }

    /// One-vs-rest relabelling: `target` becomes class 1, everything else class 0.
    pub fn binarize(&self, target: usize) -> Result<Dataset> {
        if target >= self.n_classes {
            return Err(Error::OutOfRange {
                name: "target class",
                expected: "0..n_classes",
                value: target.to_string(),
            });
        }
        let labels = self.labels.iter().map(|&l| usize::from(l == target)).collect();
        let target_name = self
            .class_names
            .as_ref()
            .map_or_else(|| target.to_string(), |n| n[target].clone());
        let mut out = Dataset::from_flat(self.features.clone(), self.n_features, labels, 2)?
            .with_class_names(vec![format!("not_{target_name}"), target_name])?;
        out.feature_names = self.feature_names.clone();
        Ok(out)
    }
}

/// Train/test partition with the source row indices of each side.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "?" | "NA" | "NaN" | "nan" | "null")
}

/// Reads a comma-separated file.
///
/// Non-numeric feature columns are ordinal-encoded by first appearance, and
/// labels are re-indexed to `0..n_classes` the same way. Missing cells are
/// rejected rather than imputed.
pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn, header: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut names: Option<Vec<String>> = None;
    let mut cells: Vec<Vec<String>> = Vec::new();
    let mut lines: Vec<u64> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row: Vec<String> = record.iter().map(str::to_owned).collect();
        if header && names.is_none() {
            names = Some(row);
        } else {
            cells.push(row);
            lines.push(line);
        }
    }

    let width = match (&names, cells.first()) {
        (Some(n), _) => n.len(),
        (None, Some(r)) => r.len(),
        (None, None) => return Err(Error::EmptyDataset),
    };
    if cells.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for (row, line) in cells.iter().zip(&lines) {
        if row.len() != width {
            return Err(Error::RaggedRow {
                path: path.to_path_buf(),
                row: *line as usize,
                found: row.len(),
                expected: width,
            });
        }
    }

    let label_idx = match label {
        LabelColumn::Index(i) if *i < width => *i,
        LabelColumn::Index(i) => {
            return Err(Error::LabelColumnMissing {
                path: path.to_path_buf(),
                column: i.to_string(),
            })
        }
        LabelColumn::Name(name) => names
            .as_ref()
            .and_then(|n| n.iter().position(|h| h == name))
            .ok_or_else(|| Error::LabelColumnMissing {
                path: path.to_path_buf(),
                column: name.clone(),
            })?,
    };

    for (row, line) in cells.iter().zip(&lines) {
        if let Some(col) = row.iter().position(|c| is_missing(c)) {
            return Err(Error::MissingValue {
                path: path.to_path_buf(),
                row: *line as usize,
                column: col,
            });
        }
    }

    let n = cells.len();
    let n_features = width - 1;
    let mut features = vec![0.0; n * n_features];
    let mut out_col = 0;
    for col in (0..width).filter(|&c| c != label_idx) {
        let numeric: Option<Vec<f64>> = cells
            .iter()
            .map(|r| r[col].parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        let values = numeric.unwrap_or_else(|| {
            let mut codes: HashMap<&str, usize> = HashMap::new();
            cells
                .iter()
                .map(|r| {
                    let next = codes.len();
                    *codes.entry(r[col].as_str()).or_insert(next) as f64
                })
                .collect()
        });
        for (i, v) in values.into_iter().enumerate() {
            features[i * n_features + out_col] = v;
        }
        out_col += 1;
    }

    let mut class_names: Vec<String> = Vec::new();
    let mut class_codes: HashMap<&str, usize> = HashMap::new();
    let labels: Vec<usize> = cells
        .iter()
        .map(|r| {
            let tok = r[label_idx].as_str();
            *class_codes.entry(tok).or_insert_with(|| {
                class_names.push(tok.to_owned());
                class_names.len() - 1
            })
        })
        .collect();

    let n_classes = class_names.len();
    let mut ds = Dataset::from_flat(features, n_features, labels, n_classes)?
        .with_class_names(class_names)?;
    if let Some(names) = names {
        let feature_names = names
            .into_iter()
            .enumerate()
            .filter(|(i, _)| *i != label_idx)
            .map(|(_, n)| n)
            .collect();
        ds = ds.with_feature_names(feature_names)?;
    }
    Ok(ds)
}

/// All `2^n` binary strings of length `n` (most significant bit first) with
/// the odd-parity bit as label: 1 when the number of ones is even.
pub fn gen_nbit_parity(n: usize) -> Result<Dataset> {
    if !(1..=20).contains(&n) {
        return Err(Error::OutOfRange {
            name: "parity bits",
            expected: "1..=20",
            value: n.to_string(),
        });
    }
    let rows = 1usize << n;
    let mut features = Vec::with_capacity(rows * n);
    let mut labels = Vec::with_capacity(rows);
    for r in 0..rows {
        for bit in (0..n).rev() {
            features.push(((r >> bit) & 1) as f64);
        }
        labels.push(usize::from(r.count_ones() % 2 == 0));
    }
    let names = (0..n).map(|i| format!("b{i}")).collect();
    Dataset::from_flat(features, n, labels, 2)?.with_feature_names(names)
}

/// Two interleaved planar spirals, `n_points / 2` per class.
///
/// Point `i` of class 0 sits at angle `i * pi / 16` with radius
/// `6.5 * (m + 7 - i) / (m + 7)` where `m = n_points / 2`; class 1 is class 0
/// reflected through the origin. `m = 97` gives the classic 194-point layout.
/// Gaussian noise with standard deviation `noise` is added per coordinate.
pub fn gen_two_spiral(n_points: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n_points < 2 || n_points % 2 != 0 {
        return Err(Error::OutOfRange {
            name: "n_points",
            expected: "an even number >= 2",
            value: n_points.to_string(),
        });
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::OutOfRange {
            name: "noise",
            expected: "[0, inf)",
            value: noise.to_string(),
        });
    }
    let m = n_points / 2;
    let mut rng = rng::stream(seed, &[0x5b1a]);
    let normal = Normal::new(0.0, noise.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let mut jitter = |v: f64| {
        if noise > 0.0 {
            v + normal.sample(&mut rng)
        } else {
            v
        }
    };
    let mut features = Vec::with_capacity(n_points * 2);
    let mut labels = Vec::with_capacity(n_points);
    for i in 0..m {
        let angle = i as f64 * PI / 16.0;
        let radius = 6.5 * (m + 7 - i) as f64 / (m + 7) as f64;
        let (x, y) = (radius * angle.sin(), radius * angle.cos());
        features.extend([jitter(x), jitter(y)]);
        labels.push(0);
        features.extend([jitter(-x), jitter(-y)]);
        labels.push(1);
    }
    Dataset::from_flat(features, 2, labels, 2)?
        .with_feature_names(vec!["x1".into(), "x2".into()])
}

fn indices_by_class(d: &Dataset) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); d.n_classes()];
    for (i, &l) in d.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    by_class
}

/// Per-class test counts by largest remainder. The total is
/// `ceil(fraction * n)`; remainders tie-break towards the lower class index.
/// Every class that is present keeps at least one sample on each side.
fn stratified_test_counts(class_sizes: &[usize], fraction: f64) -> Vec<usize> {
    let n: usize = class_sizes.iter().sum();
    let total = ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let quotas: Vec<f64> = class_sizes.iter().map(|&c| fraction * c as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| (q + 1e-9).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..class_sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - counts[a] as f64;
        let rb = quotas[b] - counts[b] as f64;
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &c in order.iter().take(total.saturating_sub(assigned)) {
        counts[c] += 1;
    }
    for (count, &size) in counts.iter_mut().zip(class_sizes) {
        if size >= 2 {
            *count = (*count).clamp(1, size - 1);
        }
    }
    counts
}

/// Stratified train/test partition.
///
/// Each class contributes its largest-remainder share of `ceil(fraction * n)`
/// test rows, drawn uniformly within the class. Index lists are sorted.
pub fn stratified_split(d: &Dataset, test_fraction: f64, seed: u64) -> Result<SplitPair> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::OutOfRange {
            name: "test_fraction",
            expected: "(0, 1)",
            value: test_fraction.to_string(),
        });
    }
    let by_class = indices_by_class(d);
    for (class, idx) in by_class.iter().enumerate() {
        if !idx.is_empty() && idx.len() < 2 {
            return Err(Error::ClassTooSmall {
                class,
                count: idx.len(),
                needed: 2,
            });
        }
    }
    let sizes: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let counts = stratified_test_counts(&sizes, test_fraction);

    let mut rng = rng::stream(seed, &[0x5eed_5b17]);
    let mut train_indices = Vec::new();
    let mut test_indices = Vec::new();
    for (mut idx, k) in by_class.into_iter().zip(counts) {
        idx.shuffle(&mut rng);
        test_indices.extend_from_slice(&idx[..k]);
        train_indices.extend_from_slice(&idx[k..]);
    }
    train_indices.sort_unstable();
    test_indices.sort_unstable();
    Ok(SplitPair {
        train: d.subset(&train_indices),
        test: d.subset(&test_indices),
        train_indices,
        test_indices,
    })
}

/// Stratified k-fold partition; returns `(train, validation)` index lists per fold.
pub fn stratified_kfold(d: &Dataset, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 || k > d.n_samples() {
        return Err(Error::OutOfRange {
            name: "folds",
            expected: "2..=n_samples",
            value: k.to_string(),
        });
    }
    let mut rng = rng::stream(seed, &[0xf01d]);
    let mut fold_of = vec![0usize; d.n_samples()];
    let mut offset = 0;
    for mut idx in indices_by_class(d) {
        idx.shuffle(&mut rng);
        for (pos, &i) in idx.iter().enumerate() {
            fold_of[i] = (offset + pos) % k;
        }
        offset += idx.len();
    }
    Ok((0..k)
        .map(|f| {
            let (val, train): (Vec<usize>, Vec<usize>) =
                (0..d.n_samples()).partition(|&i| fold_of[i] == f);
            (train, val)
        })
        .collect())
}

/// `size` indices drawn i.i.d. uniformly from `0..n_population`.
///
/// # Panics
/// If `n_population` is zero.
pub fn bootstrap_indices<R: Rng + ?Sized>(n_population: usize, size: usize, rng: &mut R) -> Vec<usize> {
    assert!(n_population > 0, "bootstrap from an empty population");
    (0..size).map(|_| rng.random_range(0..n_population)).collect()
}

/// Keeps `ceil(keep_fraction * count)` majority-class rows, chosen uniformly
/// without replacement; minority rows are untouched and row order is kept.
pub fn undersample_majority(d: &Dataset, keep_fraction: f64, seed: u64) -> Result<Dataset> {
    if d.n_classes() != 2 {
        return Err(Error::NotBinary(d.n_classes()));
    }
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::OutOfRange {
            name: "keep_fraction",
            expected: "(0, 1]",
            value: keep_fraction.to_string(),
        });
    }
    let majority = d.majority_class();
    let majority_rows: Vec<usize> = (0..d.n_samples()).filter(|&i| d.label(i) == majority).collect();
    let keep = ((keep_fraction * majority_rows.len() as f64) - 1e-9)
        .ceil()
        .clamp(1.0, majority_rows.len() as f64) as usize;
    let mut rng = rng::stream(seed, &[0x0b5a]);
    let mut keep_mask = vec![true; d.n_samples()];
    for &i in &majority_rows {
        keep_mask[i] = false;
    }
    for pos in sample(&mut rng, majority_rows.len(), keep) {
        keep_mask[majority_rows[pos]] = true;
    }
    let rows: Vec<usize> = (0..d.n_samples()).filter(|&i| keep_mask[i]).collect();
    Ok(d.subset(&rows))
}
