//! Verb implementations: run a protocol, then write its result files.

use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::experiment::{self, mean_std, Scores};
use crate::output::{self, num, opt};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    Run,
    SweepBags,
    Variance,
    Imbalance,
    SweepHyper,
}

impl Verb {
    pub fn name(self) -> &'static str {
        match self {
            Verb::Run => "run",
            Verb::SweepBags => "sweep-bags",
            Verb::Variance => "variance",
            Verb::Imbalance => "imbalance",
            Verb::SweepHyper => "sweep-hyper",
        }
    }
}

fn score_cells(s: Option<&Scores>) -> Vec<String> {
    match s {
        Some(s) => vec![num(s.accuracy), num(s.precision), num(s.recall), num(s.f1), opt(s.auc)],
        None => vec![String::new(); 5],
    }
}

fn stat(values: &[f64]) -> Value {
    let (mean, std) = mean_std(values);
    json!({ "mean": mean, "std": std })
}

/// Runs `verb` and writes its outputs into `out_dir`; returns the files written.
pub fn execute(verb: Verb, cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate()?;
    output::ensure_dir(out_dir)?;
    let name = verb.name();
    match verb {
        Verb::Run => {
            let report = experiment::run_experiment(cfg)?;
            let header = [
                "rep", "model", "n_bags", "train_accuracy", "train_precision", "train_recall", "train_f1",
                "train_auc", "test_accuracy", "test_precision", "test_recall", "test_f1", "test_auc",
                "mean_depth", "mean_bag_size", "coverage",
            ];
            let rows: Vec<Vec<String>> = report
                .rows
                .iter()
                .map(|r| {
                    let mut row = vec![r.rep.to_string(), r.model.to_string(), r.n_bags.to_string()];
                    row.extend(score_cells(Some(&r.train)));
                    row.extend(score_cells(r.test.as_ref()));
                    row.extend([num(r.mean_depth), num(r.mean_bag_size), num(r.coverage)]);
                    row
                })
                .collect();
            let mut files = vec![output::write_csv(out_dir, "results.csv", name, cfg, &header, &rows)?];
            if !report.telemetry.is_empty() {
                let header = [
                    "rep", "iteration", "mean_fitness", "mean_bag_size", "coverage_ratio", "train_metric",
                    "test_metric", "mean_bias",
                ];
                let rows: Vec<Vec<String>> = report
                    .telemetry
                    .iter()
                    .map(|(rep, g)| {
                        vec![
                            rep.to_string(),
                            g.iteration.to_string(),
                            num(g.mean_fitness),
                            num(g.mean_bag_size),
                            num(g.coverage_ratio),
                            num(g.train_metric),
                            opt(g.test_metric),
                            num(g.mean_bias),
                        ]
                    })
                    .collect();
                files.push(output::write_csv(out_dir, "telemetry.csv", name, cfg, &header, &rows)?);
            }
            let mut models = Map::new();
            for &m in &cfg.models {
                let rows: Vec<_> = report.rows_for(m).collect();
                let col = |f: &dyn Fn(&experiment::RunRow) -> Option<f64>| -> Vec<f64> {
                    rows.iter().filter_map(|r| f(r)).collect()
                };
                let mut entry = Map::new();
                entry.insert("train_accuracy".into(), stat(&col(&|r| Some(r.train.accuracy))));
                entry.insert("train_f1".into(), stat(&col(&|r| Some(r.train.f1))));
                if rows.iter().any(|r| r.test.is_some()) {
                    entry.insert("test_accuracy".into(), stat(&col(&|r| r.test.map(|t| t.accuracy))));
                    entry.insert("test_f1".into(), stat(&col(&|r| r.test.map(|t| t.f1))));
                    entry.insert("test_auc".into(), stat(&col(&|r| r.test.and_then(|t| t.auc))));
                }
                entry.insert("mean_depth".into(), stat(&col(&|r| Some(r.mean_depth))));
                entry.insert("coverage".into(), stat(&col(&|r| Some(r.coverage))));
                models.insert(m.to_string(), Value::Object(entry));
            }
            files.push(output::write_summary(out_dir, name, cfg, Value::Object(models))?);
            Ok(files)
        }
        Verb::SweepBags => {
            let rows = experiment::sweep_bag_count(cfg)?;
            let header = ["n_bags", "model", "train_accuracy_mean", "train_accuracy_std", "test_accuracy_mean", "test_accuracy_std"];
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.n_bags.to_string(),
                        r.model.to_string(),
                        num(r.train_accuracy.0),
                        num(r.train_accuracy.1),
                        opt(r.test_accuracy.map(|t| t.0)),
                        opt(r.test_accuracy.map(|t| t.1)),
                    ]
                })
                .collect();
            let best: Map<String, Value> = experiment::best_bag_counts(&rows, &cfg.models)
                .into_iter()
                .map(|(m, n)| (m.to_string(), json!(n)))
                .collect();
            Ok(vec![
                output::write_csv(out_dir, "sweep.csv", name, cfg, &header, &table)?,
                output::write_summary(out_dir, name, cfg, json!({ "best_n_bags": best }))?,
            ])
        }
        Verb::Variance => {
            let rows = experiment::variance_protocol(cfg)?;
            let header = [
                "model", "runs", "mean_test_accuracy", "q_statistic", "disagreement", "double_fault",
                "kohavi_wolpert", "entropy", "generalized_diversity",
            ];
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    let d = &r.diversity;
                    vec![
                        r.model.to_string(),
                        r.runs.to_string(),
                        num(r.mean_test_accuracy),
                        num(d.q_statistic),
                        num(d.disagreement),
                        num(d.double_fault),
                        num(d.kohavi_wolpert),
                        num(d.entropy),
                        num(d.generalized_diversity),
                    ]
                })
                .collect();
            let results: Map<String, Value> = rows
                .iter()
                .map(|r| (r.model.to_string(), serde_json::to_value(r.diversity).expect("plain floats")))
                .collect();
            Ok(vec![
                output::write_csv(out_dir, "variance.csv", name, cfg, &header, &table)?,
                output::write_summary(out_dir, name, cfg, Value::Object(results))?,
            ])
        }
        Verb::Imbalance => {
            let rows = experiment::imbalance_study(cfg)?;
            let header = [
                "keep_fraction", "imbalance_ratio", "model", "train_accuracy", "train_precision", "train_recall",
                "train_f1", "train_auc", "test_accuracy", "test_precision", "test_recall", "test_f1", "test_auc",
                "test_f1_std",
            ];
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    let mut row = vec![num(r.keep_fraction), num(r.imbalance_ratio), r.model.to_string()];
                    row.extend(score_cells(Some(&r.train)));
                    row.extend(score_cells(r.test.as_ref()));
                    row.push(opt(r.test_f1_std));
                    row
                })
                .collect();
            let results: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "keep_fraction": r.keep_fraction,
                        "imbalance_ratio": r.imbalance_ratio,
                        "model": r.model.to_string(),
                        "train": r.train,
                        "test": r.test,
                    })
                })
                .collect();
            Ok(vec![
                output::write_csv(out_dir, "imbalance.csv", name, cfg, &header, &table)?,
                output::write_summary(out_dir, name, cfg, Value::Array(results))?,
            ])
        }
        Verb::SweepHyper => {
            let rows = experiment::sweep_hyper(cfg)?;
            let header = ["gap_pct", "mutation_pct", "mutation_size_pct", "size_bias", "cv_accuracy_mean", "cv_accuracy_std"];
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    let c = r.candidate;
                    vec![
                        num(c.gap_pct),
                        num(c.mutation_pct),
                        num(c.mutation_size_pct),
                        num(c.size_bias),
                        num(r.cv_accuracy.0),
                        num(r.cv_accuracy.1),
                    ]
                })
                .collect();
            let best = experiment::best_candidate(&rows).map(|i| json!({ "candidate": rows[i].candidate, "cv_accuracy": rows[i].cv_accuracy.0 }));
            Ok(vec![
                output::write_csv(out_dir, "sweep_hyper.csv", name, cfg, &header, &table)?,
                output::write_summary(out_dir, name, cfg, json!({ "best": best }))?,
            ])
        }
    }
}
