//! Experiment orchestration: design grids, cached generation, per-cell
//! metrics, resumable run directories and reports.
//!
//! A run directory holds `manifest.json`, `transcripts/`, `metrics/` (one
//! outcome file per cell plus `records.jsonl` and `failures.jsonl`),
//! `reports/` and, once imported, `labels/human.jsonl`. The response cache
//! lives in `<run>/cache` unless `CONVSIM_CACHE_DIR` points elsewhere.

mod aggregate;
mod config;
mod execute;
mod grid;
mod report;

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use aggregate::{
    aggregate, AdherenceRow, Aggregates, ClusterRow, CoherenceRow, DiversityRow, DriftRow, RevisitRow, RevisitTurnRow,
    StabilityRow,
};
pub use config::{EmbeddingSlots, ExperimentConfig, ExperimentKind, PRESETS};
pub use execute::{topic_text, CellFailure, CellMetrics, CellOutcome, CellRecord, StabilityCheckpoint};
pub use grid::{cell_parameters, cell_prompt, derive_seed, design_grid, Cell, ProfileBank, BASELINE, PARAMETERIZED};
pub use report::{
    report, tables, ReportFormat, Table, ADHERENCE_COLUMNS, CLUSTER_COLUMNS, COHERENCE_COLUMNS, DIVERSITY_COLUMNS,
    DRIFT_COLUMNS, FAILURE_COLUMNS, REVISIT_COLUMNS, REVISIT_TURN_COLUMNS, STABILITY_COLUMNS,
};

use crate::error::{Error, Result};
use crate::gateway::{Gateway, InferredParameters};
use crate::metrics::ScoringConfig;
use crate::prompt::TEMPLATE_VERSION;
use crate::util::write_atomic;

pub const CACHE_DIR_ENV: &str = "CONVSIM_CACHE_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub template_version: String,
    pub crate_version: String,
    pub created_at: String,
    pub updated_at: String,
    pub grid_size: usize,
    pub completed: usize,
    pub failed: usize,
}

impl Manifest {
    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// The stored hash must match the stored config.
    pub fn verify(&self) -> Result<()> {
        let actual = self.config.hash()?;
        if actual != self.config_hash {
            return Err(Error::Integrity(format!(
                "manifest config hashes to {actual}, but the manifest records {}; refusing to continue",
                self.config_hash
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub run_dir: PathBuf,
    pub manifest: Manifest,
    pub records: Vec<CellRecord>,
    pub failures: Vec<CellFailure>,
    pub aggregates: Aggregates,
    /// Requests that reached a provider during this invocation.
    pub provider_calls: usize,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Default cache location for a run directory.
pub fn cache_dir_for(run_dir: &Path) -> PathBuf {
    match std::env::var_os(CACHE_DIR_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => run_dir.join("cache"),
    }
}

fn scoring(cfg: &ExperimentConfig) -> Result<ScoringConfig> {
    match &cfg.scoring {
        Some(p) => ScoringConfig::from_path(p),
        None => Ok(ScoringConfig::default()),
    }
}

fn labels_path(run_dir: &Path) -> PathBuf {
    run_dir.join("labels").join("human.jsonl")
}

/// Human judgments previously imported into the run.
pub fn load_human_labels(run_dir: &Path) -> Result<Vec<InferredParameters>> {
    let path = labels_path(run_dir);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(&path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Store human judgments for use by adherence reports.
pub fn store_human_labels(run_dir: &Path, labels: &[InferredParameters]) -> Result<PathBuf> {
    let mut bytes = Vec::new();
    for l in labels {
        serde_json::to_writer(&mut bytes, l)?;
        bytes.push(b'\n');
    }
    let path = labels_path(run_dir);
    write_atomic(&path, &bytes)?;
    Ok(path)
}

/// Runs experiments through one shared gateway.
pub struct Runner {
    gateway: Arc<Gateway>,
}

impl Runner {
    pub fn new(gateway: Arc<Gateway>) -> Self {
        Self { gateway }
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    /// Run every missing cell of the design and regenerate reports.
    ///
    /// An existing run directory is continued if it was created by the same
    /// configuration and refused otherwise.
    pub fn run(&self, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
        cfg.check()?;
        let run_dir = cfg.output_dir.clone();
        let hash = cfg.hash()?;
        let manifest_path = run_dir.join("manifest.json");
        let created_at = if manifest_path.exists() {
            let old = Manifest::load(&run_dir)?;
            old.verify()?;
            if old.config_hash != hash {
                return Err(Error::Integrity(format!(
                    "{} holds a run of a different configuration ({}); use another output directory",
                    run_dir.display(),
                    old.config_hash
                )));
            }
            old.created_at
        } else {
            now()
        };
        let cells = design_grid(cfg)?;
        let mut manifest = Manifest {
            config: cfg.clone(),
            config_hash: hash,
            template_version: TEMPLATE_VERSION.into(),
            crate_version: env!("CARGO_PKG_VERSION").into(),
            created_at,
            updated_at: now(),
            grid_size: cells.len(),
            completed: 0,
            failed: 0,
        };
        write_atomic(&manifest_path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;

        let calls_before = self.gateway.provider_calls();
        let pending: Vec<&Cell> = cells
            .iter()
            .filter(|c| !matches!(execute::read_outcome(&run_dir, c), Some(CellOutcome::Ok(_))))
            .collect();
        log::info!("{}: {} of {} cells to run", cfg.name, pending.len(), cells.len());
        if !pending.is_empty() {
            let scoring = scoring(cfg)?;
            let bank = ProfileBank::new(cfg)?;
            let ctx = execute::Context {
                cfg,
                bank: &bank,
                gateway: &self.gateway,
                scoring: &scoring,
                drift_embedder: cfg.embeddings.drift.build()?,
                run_dir: &run_dir,
            };
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.workers)
                .build()
                .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
            pool.install(|| {
                pending.par_iter().try_for_each(|cell| {
                    let outcome = execute::execute_cell(&ctx, cell);
                    execute::write_outcome(&run_dir, &outcome)
                })
            })?;
        }
        let provider_calls = self.gateway.provider_calls() - calls_before;

        let mut result = collect(&run_dir, manifest.clone(), &cells, provider_calls)?;
        manifest.completed = result.records.len();
        manifest.failed = result.failures.len();
        manifest.updated_at = now();
        write_atomic(&manifest_path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
        result.manifest = manifest;
        write_records(&result)?;
        for f in ReportFormat::ALL {
            report(&result, f)?;
        }
        Ok(result)
    }

    /// Finish the missing cells of an existing run.
    pub fn resume(&self, run_dir: &Path) -> Result<ExperimentResult> {
        let manifest = Manifest::load(run_dir)?;
        manifest.verify()?;
        let mut cfg = manifest.config.clone();
        cfg.output_dir = run_dir.to_path_buf();
        self.run(&cfg)
    }
}

/// Run with a gateway caching under the run directory (or the override).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let gw = Gateway::new(Some(cache_dir_for(&cfg.output_dir)));
    Runner::new(Arc::new(gw)).run(cfg)
}

pub fn resume(run_dir: &Path) -> Result<ExperimentResult> {
    let gw = Gateway::new(Some(cache_dir_for(run_dir)));
    Runner::new(Arc::new(gw)).resume(run_dir)
}

/// Read a run directory's outcomes and recompute aggregates.
pub fn load_result(run_dir: &Path) -> Result<ExperimentResult> {
    let manifest = Manifest::load(run_dir)?;
    manifest.verify()?;
    let cells = design_grid(&manifest.config)?;
    collect(run_dir, manifest, &cells, 0)
}

fn collect(run_dir: &Path, manifest: Manifest, cells: &[Cell], provider_calls: usize) -> Result<ExperimentResult> {
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for cell in cells {
        match execute::read_outcome(run_dir, cell) {
            Some(CellOutcome::Ok(r)) => records.push(r),
            Some(CellOutcome::Failed(f)) => failures.push(f),
            None => {}
        }
    }
    let cfg = &manifest.config;
    let embedder = cfg.embeddings.diversity.build()?;
    let labels = load_human_labels(run_dir)?;
    let aggregates = aggregate(&records, &labels, embedder.as_ref(), cfg.cluster_threshold)?;
    Ok(ExperimentResult {
        run_dir: run_dir.to_path_buf(),
        manifest,
        records,
        failures,
        aggregates,
        provider_calls,
    })
}

fn write_records(result: &ExperimentResult) -> Result<()> {
    let dir = result.run_dir.join("metrics");
    let mut bytes = Vec::new();
    for r in &result.records {
        serde_json::to_writer(&mut bytes, r)?;
        bytes.push(b'\n');
    }
    write_atomic(&dir.join("records.jsonl"), &bytes)?;
    bytes.clear();
    for f in &result.failures {
        serde_json::to_writer(&mut bytes, f)?;
        bytes.push(b'\n');
    }
    write_atomic(&dir.join("failures.jsonl"), &bytes)
}
