//! Scenario runner for relational quantum-clock universes.

pub mod analyses;
pub mod build;
pub mod config;
pub mod output;
pub mod verify;

use std::path::{Path, PathBuf};

use serde_json::json;

use crate::analyses::{run_analysis, Context};
use crate::config::{LoadedConfig, ScenarioConfig};
use crate::output::{pretty, report_json, AnalysisResult, Status, Writer};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("invariant failure: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Invariant(_) => EXIT_INVARIANT,
        }
    }
}

#[derive(Debug)]
pub struct RunSummary {
    pub results: Vec<AnalysisResult>,
    pub report_path: PathBuf,
    pub artifacts: Vec<String>,
}

impl RunSummary {
    pub fn failed(&self) -> Vec<&AnalysisResult> {
        self.results.iter().filter(|r| r.status() == Status::Fail).collect()
    }
}

fn writer(cfg: &ScenarioConfig) -> Writer {
    Writer {
        root: output::output_root(&cfg.output.directory),
        formats: cfg.output.formats.clone(),
        precision: cfg.output.precision,
    }
}

pub fn evaluate(cfg: &ScenarioConfig) -> Result<Vec<AnalysisResult>, CliError> {
    let ctx = Context::new(cfg)?;
    Ok(cfg.analyses.iter().enumerate().map(|(i, a)| run_analysis(&ctx, i, a)).collect())
}

pub fn run(loaded: &LoadedConfig) -> Result<RunSummary, CliError> {
    let cfg = &loaded.config;
    let results = evaluate(cfg)?;
    let w = writer(cfg);
    let mut with_paths = Vec::new();
    let mut artifacts = Vec::new();
    for a in results {
        let meta = json!({
            "schema_version": output::SCHEMA_VERSION,
            "scenario": cfg.name,
            "config_hash": loaded.hash,
            "analysis": a.name,
            "op": a.op,
            "tags": a.tags,
        });
        let paths = w.artifacts(&cfg.name, &a, meta)?;
        artifacts.extend(paths.iter().cloned());
        with_paths.push((a, paths));
    }
    let report = report_json(&cfg.name, &loaded.hash, cfg.seed, &with_paths);
    let rel = w.write(&format!("{}/report.json", cfg.name), &pretty(&report))?;
    artifacts.push(rel.clone());
    Ok(RunSummary { results: with_paths.into_iter().map(|(a, _)| a).collect(), report_path: w.root.join(rel), artifacts })
}

#[derive(Debug)]
pub struct SweepSummary {
    pub path: PathBuf,
    /// `(analysis, slope of log metric against log value)`.
    pub slopes: Vec<(String, f64)>,
}

pub fn sweep(loaded: &LoadedConfig, key: &str, values: &[f64]) -> Result<SweepSummary, CliError> {
    if values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".into()));
    }
    if !config::SWEEPABLE.contains(&key) {
        return Err(CliError::Config(format!("{key:?} is not sweepable (expected one of {:?})", config::SWEEPABLE)));
    }
    let cfg = &loaded.config;
    let mut table = output::Table::new(vec!["value", "analysis", "metric"]);
    let mut series: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    for &v in values {
        let c = config::with_override(cfg, key, v)?;
        for a in evaluate(&c)? {
            if let Some(m) = a.metric {
                table.push(vec![v.into(), output::Cell::Text(a.name.clone()), m.into()]);
                match series.iter_mut().find(|s| s.0 == a.name) {
                    Some(s) => {
                        s.1.push(v);
                        s.2.push(m);
                    }
                    None => series.push((a.name.clone(), vec![v], vec![m])),
                }
            }
        }
    }
    let mut slopes = Vec::new();
    for (name, xs, ys) in &series {
        if xs.len() >= 2 && xs.iter().chain(ys).all(|&z| z > 0.0) {
            let s = paw_core::relational::loglog_slope(xs, ys);
            table.push(vec![output::Cell::Text("slope".into()), output::Cell::Text(name.clone()), s.into()]);
            slopes.push((name.clone(), s));
        }
    }
    let w = writer(cfg);
    let rel = w.write(&format!("{}/sweep_{key}.csv", cfg.name), &output::to_csv(&table, w.precision))?;
    Ok(SweepSummary { path: w.root.join(rel), slopes })
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    config::load(path)
}
