//! Experiment protocols: repeated runs, bag-count sweeps, the variance
//! protocol, imbalance studies and cross-validated hyperparameter search.
//!
//! Repetition `r` draws its split (and undersampling) from a seed derived
//! from `(seed, r)`; every model in that repetition sees the same split.

use rayon::prelude::*;
use serde::Serialize;

use evobag::data::{bootstrap_indices, gen_nbit_parity, gen_two_spiral, load_csv, stratified_kfold, stratified_split, undersample_majority};
use evobag::ensemble::{fit_bagging, Ensemble};
use evobag::evobag::{coverage_ratio, default_average, run_evobagging, Bag, GenerationStats};
use evobag::metrics::{self, Average, DiversityReport, PredictionMatrix};
use evobag::{rng, Dataset};

use crate::config::{DatasetSource, ExperimentConfig, ModelKind};
use crate::error::CliError;

const REP_STREAM: u64 = 0x4e9;
const VARIANCE_STREAM: u64 = 0x7a8;
const FOLD_STREAM: u64 = 0xcf0;

pub fn rep_seed(seed: u64, rep: usize) -> u64 {
    rng::derive_seed(seed, &[REP_STREAM, rep as u64])
}

/// Loads or generates the configured dataset and applies `binarize`.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset, CliError> {
    let source = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| CliError::Config("dataset: required".into()))?;
    let d = match source {
        DatasetSource::Csv(path) => load_csv(path, &cfg.label(), cfg.header)?,
        DatasetSource::Parity(n) => gen_nbit_parity(*n)?,
        DatasetSource::TwoSpiral { n_points, noise } => gen_two_spiral(*n_points, *noise, cfg.seed)?,
    };
    match &cfg.binarize {
        None => Ok(d),
        Some(target) => {
            let idx = d
                .class_names()
                .and_then(|names| names.iter().position(|n| n == target))
                .or_else(|| target.parse().ok().filter(|&i: &usize| i < d.n_classes()))
                .ok_or_else(|| CliError::Config(format!("binarize: no class named {target:?}")))?;
            Ok(d.binarize(idx)?)
        }
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub test: Option<Dataset>,
}

/// The data repetition `rep` trains and tests on.
pub fn prepare_split(base: &Dataset, cfg: &ExperimentConfig, rep: usize) -> Result<Split, CliError> {
    let seed = rep_seed(cfg.seed, rep);
    let data = match cfg.keep_fraction {
        Some(k) if k < 1.0 => undersample_majority(base, k, seed)?,
        _ => base.clone(),
    };
    if cfg.test_fraction == 0.0 {
        return Ok(Split { train: data, test: None });
    }
    let s = stratified_split(&data, cfg.test_fraction, seed)?;
    Ok(Split {
        train: s.train,
        test: Some(s.test),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: Option<f64>,
}

/// Scores an ensemble; ROC uses the per-class vote shares.
pub fn score(ensemble: &Ensemble, data: &Dataset, average: Average) -> Result<Scores, CliError> {
    let table = ensemble.member_predictions(data)?;
    let pred = ensemble.aggregate(&table);
    let truth = data.labels();
    let fractions = evobag::ensemble::vote_fractions(&table, ensemble.n_classes());
    let auc = match average {
        Average::Binary(pos) => match metrics::roc_auc(&fractions[pos], truth, pos) {
            Ok(v) => Some(v),
            Err(evobag::Error::SingleClass) => None,
            Err(e) => return Err(e.into()),
        },
        Average::Macro(_) => {
            let per_class: Vec<f64> = metrics::roc_auc_ovr(&fractions, truth)?.into_iter().flatten().collect();
            (!per_class.is_empty()).then(|| per_class.iter().sum::<f64>() / per_class.len() as f64)
        }
    };
    Ok(Scores {
        accuracy: metrics::accuracy(&pred, truth)?,
        precision: metrics::precision(&pred, truth, average)?,
        recall: metrics::recall(&pred, truth, average)?,
        f1: metrics::f1(&pred, truth, average)?,
        auc,
    })
}

pub struct Fitted {
    pub ensemble: Ensemble,
    pub history: Option<Vec<GenerationStats>>,
}

pub fn fit_model(
    model: ModelKind,
    cfg: &ExperimentConfig,
    train: &Dataset,
    test: Option<&Dataset>,
    seed: u64,
) -> Result<Fitted, CliError> {
    if model == ModelKind::EvoBagging {
        let out = run_evobagging(train, test, &cfg.evo_config(train.n_samples(), seed))?;
        return Ok(Fitted {
            ensemble: out.ensemble,
            history: Some(out.history),
        });
    }
    let ensemble = fit_bagging(train, cfg.n_bags, cfg.bag_size, &cfg.tree_config(model), seed)?;
    Ok(Fitted {
        ensemble: ensemble.with_voting(cfg.voting),
        history: None,
    })
}

fn ensemble_coverage(e: &Ensemble, train_size: usize) -> f64 {
    let bags: Vec<Bag> = e.members().iter().map(|m| Bag::new(m.bag.clone())).collect();
    coverage_ratio(&bags, train_size)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRow {
    pub rep: usize,
    pub model: ModelKind,
    pub n_bags: usize,
    pub train: Scores,
    pub test: Option<Scores>,
    pub mean_depth: f64,
    pub mean_bag_size: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub rows: Vec<RunRow>,
    /// `(rep, stats)` for every EvoBagging generation.
    pub telemetry: Vec<(usize, GenerationStats)>,
}

impl RunReport {
    pub fn rows_for(&self, model: ModelKind) -> impl Iterator<Item = &RunRow> + '_ {
        self.rows.iter().filter(move |r| r.model == model)
    }
}

/// Runs every configured model for every repetition.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport, CliError> {
    cfg.validate()?;
    let base = load_dataset(cfg)?;
    run_on(&base, cfg)
}

fn run_on(base: &Dataset, cfg: &ExperimentConfig) -> Result<RunReport, CliError> {
    let average = default_average(base);
    let per_rep: Vec<(Vec<RunRow>, Vec<(usize, GenerationStats)>)> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| {
            let split = prepare_split(base, cfg, rep)?;
            let seed = rep_seed(cfg.seed, rep);
            let mut rows = Vec::new();
            let mut telemetry = Vec::new();
            for &model in &cfg.models {
                let fitted = fit_model(model, cfg, &split.train, split.test.as_ref(), seed)?;
                let e = &fitted.ensemble;
                let members = e.members();
                rows.push(RunRow {
                    rep,
                    model,
                    n_bags: members.len(),
                    train: score(e, &split.train, average)?,
                    test: split.test.as_ref().map(|t| score(e, t, average)).transpose()?,
                    mean_depth: e.mean_depth(),
                    mean_bag_size: members.iter().map(|m| m.bag.len() as f64).sum::<f64>() / members.len() as f64,
                    coverage: ensemble_coverage(e, split.train.n_samples()),
                });
                if let Some(h) = fitted.history {
                    telemetry.extend(h.into_iter().map(|g| (rep, g)));
                }
            }
            Ok((rows, telemetry))
        })
        .collect::<Result<_, CliError>>()?;
    let mut report = RunReport::default();
    for (rows, telemetry) in per_rep {
        report.rows.extend(rows);
        report.telemetry.extend(telemetry);
    }
    Ok(report)
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub n_bags: usize,
    pub model: ModelKind,
    pub train_accuracy: (f64, f64),
    pub test_accuracy: Option<(f64, f64)>,
}

impl SweepRow {
    /// Test accuracy when a test set exists, otherwise training accuracy.
    pub fn selection_metric(&self) -> f64 {
        self.test_accuracy.map_or(self.train_accuracy.0, |t| t.0)
    }
}

/// One row per (bag count, model), bag counts ascending.
pub fn sweep_bag_count(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, CliError> {
    cfg.validate()?;
    let base = load_dataset(cfg)?;
    let mut rows = Vec::new();
    for n_bags in (cfg.sweep_from..=cfg.sweep_to).step_by(cfg.sweep_step) {
        let c = ExperimentConfig { n_bags, ..cfg.clone() };
        let report = run_on(&base, &c)?;
        for &model in &cfg.models {
            let train: Vec<f64> = report.rows_for(model).map(|r| r.train.accuracy).collect();
            let test: Vec<f64> = report.rows_for(model).filter_map(|r| r.test.map(|t| t.accuracy)).collect();
            rows.push(SweepRow {
                n_bags,
                model,
                train_accuracy: mean_std(&train),
                test_accuracy: (!test.is_empty()).then(|| mean_std(&test)),
            });
        }
    }
    Ok(rows)
}

/// Bag count with the best selection metric per model; ties to the smaller count.
pub fn best_bag_counts(rows: &[SweepRow], models: &[ModelKind]) -> Vec<(ModelKind, usize)> {
    models
        .iter()
        .map(|&m| {
            let best = rows
                .iter()
                .filter(|r| r.model == m)
                .fold(None::<&SweepRow>, |best, r| match best {
                    Some(b) if b.selection_metric() >= r.selection_metric() => Some(b),
                    _ => Some(r),
                });
            (m, best.map_or(0, |r| r.n_bags))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceRow {
    pub model: ModelKind,
    pub runs: usize,
    pub mean_test_accuracy: f64,
    pub diversity: DiversityReport,
}

/// Fixes one stratified test set; each run trains on a fresh bootstrap of the
/// training partition, and the ensembles' test predictions are compared with
/// the diversity measures (one ensemble = one learner row).
pub fn variance_protocol(cfg: &ExperimentConfig) -> Result<Vec<VarianceRow>, CliError> {
    cfg.validate()?;
    if cfg.test_fraction == 0.0 {
        return Err(CliError::Config("test_fraction: the variance protocol needs a test set".into()));
    }
    let base = load_dataset(cfg)?;
    let split = prepare_split(&base, cfg, 0)?;
    let test = split.test.expect("test_fraction > 0");
    let train = split.train;
    cfg.models
        .iter()
        .map(|&model| {
            let preds: Vec<Vec<usize>> = (0..cfg.variance_runs)
                .into_par_iter()
                .map(|run| {
                    let seed = rep_seed(cfg.seed, if cfg.variance_fixed_seed { 0 } else { run });
                    let mut r = rng::stream(seed, &[VARIANCE_STREAM]);
                    let idx = bootstrap_indices(train.n_samples(), train.n_samples(), &mut r);
                    let boot = train.subset(&idx);
                    let fitted = fit_model(model, cfg, &boot, None, seed)?;
                    Ok(fitted.ensemble.predict(&test)?)
                })
                .collect::<Result<_, CliError>>()?;
            let accs: Vec<f64> = preds
                .iter()
                .map(|p| metrics::accuracy(p, test.labels()))
                .collect::<Result<_, _>>()?;
            let m = PredictionMatrix::new(preds, test.labels().to_vec(), test.n_classes())?;
            Ok(VarianceRow {
                model,
                runs: cfg.variance_runs,
                mean_test_accuracy: mean_std(&accs).0,
                diversity: metrics::diversity_measures(&m)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ImbalanceRow {
    pub keep_fraction: f64,
    /// `majority / minority` after undersampling.
    pub imbalance_ratio: f64,
    pub model: ModelKind,
    pub train: Scores,
    pub test: Option<Scores>,
    pub test_f1_std: Option<f64>,
}

fn mean_scores(rows: &[Scores]) -> Scores {
    let avg = |f: &dyn Fn(&Scores) -> f64| mean_std(&rows.iter().map(f).collect::<Vec<_>>()).0;
    let aucs: Vec<f64> = rows.iter().filter_map(|s| s.auc).collect();
    Scores {
        accuracy: avg(&|s| s.accuracy),
        precision: avg(&|s| s.precision),
        recall: avg(&|s| s.recall),
        f1: avg(&|s| s.f1),
        auc: (!aucs.is_empty()).then(|| mean_std(&aucs).0),
    }
}

/// Undersamples the majority class at each keep fraction and runs every
/// model with F1 as the EvoBagging fitness metric.
pub fn imbalance_study(cfg: &ExperimentConfig) -> Result<Vec<ImbalanceRow>, CliError> {
    cfg.validate()?;
    let base = load_dataset(cfg)?;
    if base.n_classes() != 2 {
        return Err(evobag::Error::NotBinary(base.n_classes()).into());
    }
    let counts = base.class_counts();
    let (maj, min) = (counts[base.majority_class()], counts[base.minority_class()]);
    let mut rows = Vec::new();
    for &keep in &cfg.keep_fractions {
        let c = ExperimentConfig {
            keep_fraction: Some(keep),
            fitness_metric: evobag::evobag::FitnessMetric::F1,
            ..cfg.clone()
        };
        let kept = ((keep * maj as f64) - 1e-9).ceil().clamp(1.0, maj as f64);
        let report = run_on(&base, &c)?;
        for &model in &cfg.models {
            let train: Vec<Scores> = report.rows_for(model).map(|r| r.train).collect();
            let test: Vec<Scores> = report.rows_for(model).filter_map(|r| r.test).collect();
            rows.push(ImbalanceRow {
                keep_fraction: keep,
                imbalance_ratio: kept / min as f64,
                model,
                train: mean_scores(&train),
                test: (!test.is_empty()).then(|| mean_scores(&test)),
                test_f1_std: (!test.is_empty()).then(|| mean_std(&test.iter().map(|s| s.f1).collect::<Vec<_>>()).1),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HyperCandidate {
    pub gap_pct: f64,
    pub mutation_pct: f64,
    pub mutation_size_pct: f64,
    pub size_bias: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HyperRow {
    pub candidate: HyperCandidate,
    pub cv_accuracy: (f64, f64),
}

/// Grid search over G, M, MS and K by k-fold CV accuracy of EvoBagging on the
/// training partition of repetition 0. Candidates are listed grid-major in
/// G, M, MS, K order.
pub fn sweep_hyper(cfg: &ExperimentConfig) -> Result<Vec<HyperRow>, CliError> {
    cfg.validate()?;
    let base = load_dataset(cfg)?;
    let train = prepare_split(&base, cfg, 0)?.train;
    let average = default_average(&base);
    let folds = stratified_kfold(&train, cfg.cv_folds, rng::derive_seed(cfg.seed, &[FOLD_STREAM]))?;
    let mut candidates = Vec::new();
    for &gap_pct in &cfg.gap_grid {
        for &mutation_pct in &cfg.mutation_grid {
            for &mutation_size_pct in &cfg.mutation_size_grid {
                for &size_bias in &cfg.size_bias_grid {
                    candidates.push(HyperCandidate {
                        gap_pct,
                        mutation_pct,
                        mutation_size_pct,
                        size_bias,
                    });
                }
            }
        }
    }
    if candidates.is_empty() {
        return Err(CliError::Config("gap_grid/mutation_grid/mutation_size_grid/size_bias_grid: empty grid".into()));
    }
    candidates
        .par_iter()
        .map(|&cand| {
            let c = ExperimentConfig {
                gap_pct: cand.gap_pct,
                mutation_pct: cand.mutation_pct,
                mutation_size_pct: cand.mutation_size_pct,
                mutation_size: None,
                size_bias: cand.size_bias,
                ..cfg.clone()
            };
            let accs: Vec<f64> = folds
                .iter()
                .enumerate()
                .map(|(f, (tr, va))| {
                    let fit_set = train.subset(tr);
                    let val = train.subset(va);
                    let fitted = fit_model(ModelKind::EvoBagging, &c, &fit_set, None, rep_seed(cfg.seed, f))?;
                    Ok(score(&fitted.ensemble, &val, average)?.accuracy)
                })
                .collect::<Result<_, CliError>>()?;
            Ok(HyperRow {
                candidate: cand,
                cv_accuracy: mean_std(&accs),
            })
        })
        .collect()
}

/// Index of the best candidate; ties to the earliest.
pub fn best_candidate(rows: &[HyperRow]) -> Option<usize> {
    (0..rows.len()).fold(None, |best, i| match best {
        Some(b) if rows[b].cv_accuracy.0 >= rows[i].cv_accuracy.0 => Some(b),
        _ => Some(i),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parity_cfg() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.set("dataset", "parity:4").unwrap();
        c.set("test_fraction", "0").unwrap();
        c.set("repetitions", "2").unwrap();
        c.set("n_bags", "5").unwrap();
        c.set("iterations", "2").unwrap();
        c.set("size_bias", "500").unwrap();
        c
    }

    #[test]
    fn run_covers_models_and_reps() {
        let r = run_experiment(&parity_cfg()).unwrap();
        assert_eq!(r.rows.len(), 8);
        assert!(r.rows.iter().all(|row| row.test.is_none()));
        assert_eq!(r.telemetry.len(), 2 * 3);
    }

    #[test]
    fn single_point_sweep_matches_run() {
        let mut c = parity_cfg();
        c.set("sweep_from", "5").unwrap();
        c.set("sweep_to", "5").unwrap();
        let sweep = sweep_bag_count(&c).unwrap();
        assert_eq!(sweep.len(), 4);
        let run = run_experiment(&c).unwrap();
        for row in &sweep {
            let train: Vec<f64> = run.rows_for(row.model).map(|r| r.train.accuracy).collect();
            assert_eq!(row.train_accuracy, mean_std(&train));
        }
        c.set("sweep_to", "25").unwrap();
        assert_eq!(sweep_bag_count(&c).unwrap().len(), 4 * 3);
    }

    #[test]
    fn best_count_ties_to_smallest() {
        let row = |n, acc| SweepRow {
            n_bags: n,
            model: ModelKind::Bagging,
            train_accuracy: (acc, 0.0),
            test_accuracy: None,
        };
        let rows = vec![row(10, 0.9), row(20, 1.0), row(30, 1.0)];
        assert_eq!(best_bag_counts(&rows, &[ModelKind::Bagging]), vec![(ModelKind::Bagging, 20)]);
    }

    #[test]
    fn forced_identical_variance_runs_agree() {
        let mut c = parity_cfg();
        c.set("dataset", "parity:5").unwrap();
        c.set("test_fraction", "0.25").unwrap();
        c.set("variance_runs", "2").unwrap();
        c.set("variance_fixed_seed", "true").unwrap();
        let rows = variance_protocol(&c).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.diversity.disagreement == 0.0));
    }

    #[test]
    fn imbalance_rows_and_identity() {
        let mut c = parity_cfg();
        c.set("dataset", "parity:5").unwrap();
        c.set("test_fraction", "0.25").unwrap();
        c.set("keep_fractions", "1.0,0.5").unwrap();
        c.set("models", "bagging").unwrap();
        let rows = imbalance_study(&c).unwrap();
        assert_eq!(rows.len(), 2);
        let base = run_experiment(&c).unwrap();
        let test: Vec<Scores> = base.rows.iter().filter_map(|r| r.test).collect();
        assert_eq!(rows[0].test.unwrap().f1, mean_scores(&test).f1);
        let mut multi = c.clone();
        multi.set("dataset", "two_spiral:20").unwrap();
        assert!(imbalance_study(&multi).is_ok());
    }

    #[test]
    fn hyper_grid_is_complete() {
        let mut c = parity_cfg();
        c.set("dataset", "parity:5").unwrap();
        c.set("gap_grid", "20,40").unwrap();
        c.set("mutation_grid", "10").unwrap();
        c.set("mutation_size_grid", "5").unwrap();
        c.set("size_bias_grid", "100,200").unwrap();
        c.set("cv_folds", "2").unwrap();
        let rows = sweep_hyper(&c).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[1].candidate.size_bias, 200.0);
        assert!(best_candidate(&rows).is_some());
    }
}
