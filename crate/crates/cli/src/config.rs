//! Flat `key = value` experiment configuration.
//!
//! Files hold one assignment per line; `#` starts a comment. Command-line
//! `--set key=value` overrides are applied after the file, so they win.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use evobag::ensemble::{AccuracySource, Voting};
use evobag::evobag::{EvoConfig, FitnessMetric};
use evobag::tree::{SplitMode, TreeConfig};
use evobag::LabelColumn;
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Csv(PathBuf),
    Parity(usize),
    TwoSpiral { n_points: usize, noise: f64 },
}

impl Display for DatasetSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DatasetSource::Csv(p) => write!(f, "csv:{}", p.display()),
            DatasetSource::Parity(n) => write!(f, "parity:{n}"),
            DatasetSource::TwoSpiral { n_points, noise } => write!(f, "two_spiral:{n_points}:{noise}"),
        }
    }
}

impl DatasetSource {
    fn parse(value: &str, base: Option<&Path>) -> Result<Self, String> {
        let mut parts = value.splitn(3, ':');
        let kind = parts.next().unwrap_or_default();
        match kind {
            "parity" => {
                let n = parts.next().ok_or("parity needs a bit count, e.g. parity:6")?;
                Ok(Self::Parity(n.parse().map_err(|_| format!("bad parity bit count {n:?}"))?))
            }
            "two_spiral" => {
                let n_points = parts.next().unwrap_or("194");
                let noise = parts.next().unwrap_or("0");
                Ok(Self::TwoSpiral {
                    n_points: n_points.parse().map_err(|_| format!("bad point count {n_points:?}"))?,
                    noise: noise.parse().map_err(|_| format!("bad noise {noise:?}"))?,
                })
            }
            _ => {
                let path = value.strip_prefix("csv:").unwrap_or(value);
                if path.is_empty() {
                    return Err("empty dataset path".into());
                }
                let path = PathBuf::from(path);
                Ok(Self::Csv(match base {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path,
                }))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Bagging,
    RandomForest,
    ExtraTrees,
    #[serde(rename = "evobagging")]
    EvoBagging,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [Self::Bagging, Self::RandomForest, Self::ExtraTrees, Self::EvoBagging];

    pub fn name(self) -> &'static str {
        match self {
            Self::Bagging => "bagging",
            Self::RandomForest => "random_forest",
            Self::ExtraTrees => "extra_trees",
            Self::EvoBagging => "evobagging",
        }
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown model {s:?} (expected bagging, random_forest, extra_trees or evobagging)"))
    }
}

impl Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: Option<DatasetSource>,
    pub label_column: String,
    pub label_index: Option<usize>,
    pub header: bool,
    pub binarize: Option<String>,
    pub models: Vec<ModelKind>,
    pub n_bags: usize,
    pub bag_size: Option<usize>,
    pub rf_features: Option<usize>,
    pub gap_pct: f64,
    pub mutation_pct: f64,
    pub mutation_size_pct: f64,
    pub mutation_size: Option<usize>,
    pub size_bias: f64,
    pub iterations: usize,
    pub elitist_count: usize,
    pub fitness_metric: FitnessMetric,
    pub alpha_source: AccuracySource,
    pub voting: Voting,
    pub test_fraction: f64,
    pub repetitions: usize,
    pub seed: u64,
    pub keep_fraction: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub sweep_from: usize,
    pub sweep_to: usize,
    pub sweep_step: usize,
    pub variance_runs: usize,
    pub variance_fixed_seed: bool,
    pub keep_fractions: Vec<f64>,
    pub cv_folds: usize,
    pub gap_grid: Vec<f64>,
    pub mutation_grid: Vec<f64>,
    pub mutation_size_grid: Vec<f64>,
    pub size_bias_grid: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            label_column: "class".into(),
            label_index: None,
            header: true,
            binarize: None,
            models: ModelKind::ALL.to_vec(),
            n_bags: 50,
            bag_size: None,
            rf_features: None,
            gap_pct: 20.0,
            mutation_pct: 10.0,
            mutation_size_pct: 5.0,
            mutation_size: None,
            size_bias: 5000.0,
            iterations: 20,
            elitist_count: 0,
            fitness_metric: FitnessMetric::Accuracy,
            alpha_source: AccuracySource::FullTrain,
            voting: Voting::Majority,
            test_fraction: 0.2,
            repetitions: 30,
            seed: 0,
            keep_fraction: None,
            out_dir: None,
            sweep_from: 10,
            sweep_to: 100,
            sweep_step: 10,
            variance_runs: 30,
            variance_fixed_seed: false,
            keep_fractions: vec![1.0, 0.75, 0.5, 0.25],
            cv_folds: 5,
            gap_grid: vec![10.0, 15.0, 20.0, 25.0, 30.0],
            mutation_grid: vec![5.0, 6.0, 7.0, 8.0, 9.0, 10.0],
            mutation_size_grid: vec![5.0, 10.0],
            size_bias_grid: (1..=20).map(|k| f64::from(k) * 1000.0).collect(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("{key}: cannot parse {value:?}"))
}

fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>, String> {
    if value == "none" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("{key}: expected true or false, got {value:?}")),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn join<T: Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn show_opt<T: Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".into(), ToString::to_string)
}

impl ExperimentConfig {
    /// Reads a config file; relative dataset paths resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        let base = path.parent();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{}:{}: expected key = value", path.display(), no + 1)))?;
            cfg.set_with_base(key.trim(), value.trim(), base)
                .map_err(|m| CliError::Config(format!("{}:{}: {m}", path.display(), no + 1)))?;
        }
        Ok(cfg)
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override {assignment:?} is not key=value")))?;
        self.set_with_base(key.trim(), value.trim(), None).map_err(CliError::Config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        self.set_with_base(key, value, None)
    }

    fn set_with_base(&mut self, key: &str, value: &str, base: Option<&Path>) -> Result<(), String> {
        match key {
            "dataset" => self.dataset = Some(DatasetSource::parse(value, base)?),
            "label_column" => self.label_column = value.to_owned(),
            "label_index" => self.label_index = parse_opt(key, value)?,
            "header" => self.header = parse_bool(key, value)?,
            "binarize" => self.binarize = (value != "none").then(|| value.to_owned()),
            "models" => self.models = parse_list(key, value)?,
            "n_bags" => self.n_bags = parse(key, value)?,
            "bag_size" => self.bag_size = parse_opt(key, value)?,
            "rf_features" => self.rf_features = parse_opt(key, value)?,
            "gap_pct" => self.gap_pct = parse(key, value)?,
            "mutation_pct" => self.mutation_pct = parse(key, value)?,
            "mutation_size_pct" => self.mutation_size_pct = parse(key, value)?,
            "mutation_size" => self.mutation_size = parse_opt(key, value)?,
            "size_bias" => self.size_bias = parse(key, value)?,
            "iterations" => self.iterations = parse(key, value)?,
            "elitist_count" => self.elitist_count = parse(key, value)?,
            "fitness_metric" => {
                self.fitness_metric = match value {
                    "accuracy" => FitnessMetric::Accuracy,
                    "f1" => FitnessMetric::F1,
                    _ => return Err(format!("{key}: expected accuracy or f1, got {value:?}")),
                }
            }
            "alpha_source" => self.alpha_source = parse_source(key, value)?,
            "voting" => {
                self.voting = match value {
                    "majority" => Voting::Majority,
                    "weighted" | "weighted_full_train" => Voting::Weighted(AccuracySource::FullTrain),
                    "weighted_own_bag" => Voting::Weighted(AccuracySource::OwnBag),
                    _ => {
                        return Err(format!(
                            "{key}: expected majority, weighted or weighted_own_bag, got {value:?}"
                        ))
                    }
                }
            }
            "test_fraction" => self.test_fraction = parse(key, value)?,
            "repetitions" => self.repetitions = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "keep_fraction" => self.keep_fraction = parse_opt(key, value)?,
            "out_dir" => self.out_dir = (value != "none").then(|| PathBuf::from(value)),
            "sweep_from" => self.sweep_from = parse(key, value)?,
            "sweep_to" => self.sweep_to = parse(key, value)?,
            "sweep_step" => self.sweep_step = parse(key, value)?,
            "variance_runs" => self.variance_runs = parse(key, value)?,
            "variance_fixed_seed" => self.variance_fixed_seed = parse_bool(key, value)?,
            "keep_fractions" => self.keep_fractions = parse_list(key, value)?,
            "cv_folds" => self.cv_folds = parse(key, value)?,
            "gap_grid" => self.gap_grid = parse_list(key, value)?,
            "mutation_grid" => self.mutation_grid = parse_list(key, value)?,
            "mutation_size_grid" => self.mutation_size_grid = parse_list(key, value)?,
            "size_bias_grid" => self.size_bias_grid = parse_list(key, value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Every key with its resolved value, in a fixed order.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let voting = match self.voting {
            Voting::Majority => "majority",
            Voting::Weighted(AccuracySource::FullTrain) => "weighted",
            Voting::Weighted(AccuracySource::OwnBag) => "weighted_own_bag",
        };
        vec![
            ("dataset", show_opt(&self.dataset)),
            ("label_column", self.label_column.clone()),
            ("label_index", show_opt(&self.label_index)),
            ("header", self.header.to_string()),
            ("binarize", show_opt(&self.binarize)),
            ("models", join(&self.models)),
            ("n_bags", self.n_bags.to_string()),
            ("bag_size", show_opt(&self.bag_size)),
            ("rf_features", show_opt(&self.rf_features)),
            ("gap_pct", self.gap_pct.to_string()),
            ("mutation_pct", self.mutation_pct.to_string()),
            ("mutation_size_pct", self.mutation_size_pct.to_string()),
            ("mutation_size", show_opt(&self.mutation_size)),
            ("size_bias", self.size_bias.to_string()),
            ("iterations", self.iterations.to_string()),
            ("elitist_count", self.elitist_count.to_string()),
            (
                "fitness_metric",
                match self.fitness_metric {
                    FitnessMetric::Accuracy => "accuracy",
                    FitnessMetric::F1 => "f1",
                }
                .into(),
            ),
            ("alpha_source", show_source(self.alpha_source).into()),
            ("voting", voting.into()),
            ("test_fraction", self.test_fraction.to_string()),
            ("repetitions", self.repetitions.to_string()),
            ("seed", self.seed.to_string()),
            ("keep_fraction", show_opt(&self.keep_fraction)),
            ("sweep_from", self.sweep_from.to_string()),
            ("sweep_to", self.sweep_to.to_string()),
            ("sweep_step", self.sweep_step.to_string()),
            ("variance_runs", self.variance_runs.to_string()),
            ("variance_fixed_seed", self.variance_fixed_seed.to_string()),
            ("keep_fractions", join(&self.keep_fractions)),
            ("cv_folds", self.cv_folds.to_string()),
            ("gap_grid", join(&self.gap_grid)),
            ("mutation_grid", join(&self.mutation_grid)),
            ("mutation_size_grid", join(&self.mutation_size_grid)),
            ("size_bias_grid", join(&self.size_bias_grid)),
        ]
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_owned()));
        if self.dataset.is_none() {
            return bad("dataset: required (csv path, parity:<n> or two_spiral:<n>[:noise])");
        }
        if self.models.is_empty() {
            return bad("models: at least one model is required");
        }
        if self.n_bags == 0 {
            return bad("n_bags: must be >= 1");
        }
        if self.repetitions == 0 {
            return bad("repetitions: must be >= 1");
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return bad("test_fraction: must be in [0, 1)");
        }
        if let Some(k) = self.keep_fraction {
            if !(k > 0.0 && k <= 1.0) {
                return bad("keep_fraction: must be in (0, 1]");
            }
        }
        if self.keep_fractions.iter().any(|&k| !(k > 0.0 && k <= 1.0)) {
            return bad("keep_fractions: every value must be in (0, 1]");
        }
        if self.sweep_step == 0 || self.sweep_from == 0 || self.sweep_from > self.sweep_to {
            return bad("sweep_from/sweep_to/sweep_step: need 1 <= sweep_from <= sweep_to and sweep_step >= 1");
        }
        if self.cv_folds < 2 {
            return bad("cv_folds: must be >= 2");
        }
        if self.variance_runs < 2 {
            return bad("variance_runs: must be >= 2");
        }
        if self.bag_size == Some(0) {
            return bad("bag_size: must be >= 1");
        }
        if !(self.size_bias >= 1.0) {
            return bad("size_bias: must be >= 1");
        }
        for (name, v) in [
            ("gap_pct", self.gap_pct),
            ("mutation_pct", self.mutation_pct),
            ("mutation_size_pct", self.mutation_size_pct),
        ] {
            if !(0.0..=100.0).contains(&v) {
                return Err(CliError::Config(format!("{name}: must be a percentage in [0, 100]")));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> LabelColumn {
        match self.label_index {
            Some(i) => LabelColumn::Index(i),
            None => LabelColumn::Name(self.label_column.clone()),
        }
    }

    pub fn tree_config(&self, model: ModelKind) -> TreeConfig {
        TreeConfig::with_mode(match model {
            ModelKind::Bagging | ModelKind::EvoBagging => SplitMode::AllFeatures,
            ModelKind::RandomForest => SplitMode::RandomSubspace(self.rf_features),
            ModelKind::ExtraTrees => SplitMode::RandomThreshold,
        })
    }

    /// EvoBagging hyperparameters for a training set of `train_size` rows.
    pub fn evo_config(&self, train_size: usize, seed: u64) -> EvoConfig {
        let mut c = EvoConfig::from_percentages(
            self.n_bags,
            train_size,
            self.gap_pct,
            self.mutation_pct,
            self.mutation_size_pct,
            self.size_bias,
            self.iterations,
        );
        if let Some(ms) = self.mutation_size {
            c.mutation_size = ms;
        }
        c.fitness_metric = self.fitness_metric;
        c.alpha_source = self.alpha_source;
        c.elitist_count = self.elitist_count;
        c.voting = self.voting;
        c.seed = seed;
        c
    }
}

fn parse_source(key: &str, value: &str) -> Result<AccuracySource, String> {
    match value {
        "full_train" => Ok(AccuracySource::FullTrain),
        "own_bag" => Ok(AccuracySource::OwnBag),
        _ => Err(format!("{key}: expected full_train or own_bag, got {value:?}")),
    }
}

fn show_source(s: AccuracySource) -> &'static str {
    match s {
        AccuracySource::FullTrain => "full_train",
        AccuracySource::OwnBag => "own_bag",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.cfg");
        std::fs::write(&path, "# pima\ndataset = pima.csv\nn_bags = 60 # N\nmodels=bagging,evobagging\n").unwrap();
        let mut cfg = ExperimentConfig::from_file(&path).unwrap();
        assert_eq!(cfg.dataset, Some(DatasetSource::Csv(dir.path().join("pima.csv"))));
        assert_eq!(cfg.n_bags, 60);
        assert_eq!(cfg.models, vec![ModelKind::Bagging, ModelKind::EvoBagging]);
        cfg.apply_override("n_bags=70").unwrap();
        assert_eq!(cfg.n_bags, 70);
    }

    #[test]
    fn errors_name_the_field() {
        let mut cfg = ExperimentConfig::default();
        let err = cfg.apply_override("n_bags=many").unwrap_err().to_string();
        assert!(err.contains("n_bags"), "{err}");
        let err = cfg.apply_override("colour=red").unwrap_err().to_string();
        assert!(err.contains("colour"), "{err}");
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("dataset"), "{err}");
    }

    #[test]
    fn generators_parse() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("dataset", "parity:6").unwrap();
        assert_eq!(cfg.dataset, Some(DatasetSource::Parity(6)));
        cfg.set("dataset", "two_spiral:194").unwrap();
        assert_eq!(cfg.dataset, Some(DatasetSource::TwoSpiral { n_points: 194, noise: 0.0 }));
    }

    #[test]
    fn pairs_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("dataset", "parity:4").unwrap();
        cfg.set("voting", "weighted_own_bag").unwrap();
        cfg.set("keep_fraction", "0.5").unwrap();
        let mut back = ExperimentConfig::default();
        for (k, v) in cfg.pairs() {
            back.set(k, &v).unwrap();
        }
        assert_eq!(back, cfg);
    }

    #[test]
    fn evo_config_counts() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("n_bags", "60").unwrap();
        cfg.set("gap_pct", "15").unwrap();
        cfg.set("mutation_pct", "8").unwrap();
        let evo = cfg.evo_config(614, 3);
        assert_eq!((evo.gap_count, evo.mutation_count, evo.mutation_size, evo.seed), (9, 5, 31, 3));
        cfg.set("mutation_size", "1").unwrap();
        assert_eq!(cfg.evo_config(614, 3).mutation_size, 1);
    }
}
