//! Result files. Every CSV starts with a `# key=value` block holding the
//! fully resolved configuration; JSON summaries embed the same map.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn config_json(cfg: &ExperimentConfig) -> Value {
    Value::Object(cfg.pairs().into_iter().map(|(k, v)| (k.to_owned(), Value::String(v))).collect::<Map<_, _>>())
}

pub fn write_csv(
    dir: &Path,
    name: &str,
    command: &str,
    cfg: &ExperimentConfig,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let mut text = format!("# command={command}\n");
    for (k, v) in cfg.pairs() {
        text.push_str(&format!("# {k}={v}\n"));
    }
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::Io {
        path: path.clone(),
        source: e.into(),
    })?;
    for row in rows {
        w.write_record(row).map_err(|e| CliError::Io {
            path: path.clone(),
            source: e.into(),
        })?;
    }
    let body = w.into_inner().map_err(|e| CliError::Io {
        path: path.clone(),
        source: e.into_error(),
    })?;
    text.push_str(&String::from_utf8(body).expect("utf-8 csv"));
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

pub fn write_summary(dir: &Path, command: &str, cfg: &ExperimentConfig, results: Value) -> Result<PathBuf, CliError> {
    let path = dir.join("summary.json");
    let doc = json!({
        "command": command,
        "config": config_json(cfg),
        "results": results,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("serialisable summary");
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}
