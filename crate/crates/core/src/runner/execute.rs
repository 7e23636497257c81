use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind};
use super::grid::{cell_prompt, Cell, ProfileBank};
use crate::embed::Embedder;
use crate::error::{Error, Result};
use crate::gateway::{save_transcript, Gateway, InferredParameters, ProviderConfig, Transcript};
use crate::metrics::{
    extract_entities, revisit_rate, stability_score, topic_coherence, topic_drift_series, DriftSeries, ParamMap,
    RevisitResult, ScoringConfig, StabilityScore,
};
use crate::schema::ConversationParameters;
use crate::util::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCheckpoint {
    /// Prefix length in turns.
    pub turns: u32,
    pub score: StabilityScore,
}

/// Per-conversation metric values, by experiment kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CellMetrics {
    Diversity {
        topic: String,
    },
    Adherence {
        set: ParamMap,
        inferred: InferredParameters,
        focus_level: i64,
        coherence: f64,
    },
    Drift {
        opening_topic: String,
        series: DriftSeries,
        coherence: f64,
    },
    Stability {
        checkpoints: Vec<StabilityCheckpoint>,
    },
    Revisit {
        result: RevisitResult,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell: Cell,
    pub model_id: String,
    pub prompt_hash: String,
    /// Transcript path relative to the run directory.
    pub transcript: String,
    pub turns_generated: usize,
    #[serde(default)]
    pub quality_flags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ConversationParameters>,
    pub metrics: CellMetrics,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellFailure {
    pub cell: Cell,
    /// `prompt`, `generate`, `judge` or `metrics`.
    pub stage: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
#[allow(clippy::large_enum_variant)]
pub enum CellOutcome {
    Ok(CellRecord),
    Failed(CellFailure),
}

impl CellOutcome {
    pub fn cell(&self) -> &Cell {
        match self {
            CellOutcome::Ok(r) => &r.cell,
            CellOutcome::Failed(f) => &f.cell,
        }
    }
}

pub(crate) fn outcome_path(run_dir: &Path, cell: &Cell) -> PathBuf {
    run_dir.join("metrics").join("cells").join(format!("{}.json", cell.id))
}

pub(crate) fn read_outcome(run_dir: &Path, cell: &Cell) -> Option<CellOutcome> {
    let text = std::fs::read_to_string(outcome_path(run_dir, cell)).ok()?;
    serde_json::from_str(&text).ok()
}

pub(crate) struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub bank: &'a ProfileBank,
    pub gateway: &'a Gateway,
    pub scoring: &'a ScoringConfig,
    pub drift_embedder: Arc<dyn Embedder>,
    pub run_dir: &'a Path,
}

/// The topic a conversation is about: a `topic` metadata field when the
/// generator emitted one, otherwise the opening user utterance.
pub fn topic_text(t: &Transcript) -> String {
    if let Some(topic) = t.metadata.extra.get("topic").and_then(|v| v.as_str()) {
        if !topic.trim().is_empty() {
            return topic.to_string();
        }
    }
    opening_utterance(t)
}

fn opening_utterance(t: &Transcript) -> String {
    t.user_turns()
        .next()
        .or(t.conversation.first())
        .map(|turn| turn.content.clone())
        .unwrap_or_default()
}

fn prefix(t: &Transcript, turns: usize) -> Transcript {
    let mut p = t.clone();
    p.conversation.truncate(turns);
    p.metadata.total_turns = p.conversation.len() as u32;
    p
}

fn provider<'a>(cfg: &'a ExperimentConfig, id: &str) -> Result<&'a ProviderConfig> {
    cfg.providers
        .iter()
        .find(|p| p.id == id)
        .ok_or_else(|| Error::Config(format!("cell names unknown provider `{id}`")))
}

fn fail(cell: &Cell, stage: &str, e: Error) -> CellOutcome {
    log::warn!("cell {} failed at {stage}: {e}", cell.id);
    CellOutcome::Failed(CellFailure {
        cell: cell.clone(),
        stage: stage.into(),
        error: e.to_string(),
    })
}

pub(crate) fn execute_cell(ctx: &Context, cell: &Cell) -> CellOutcome {
    let (bundle, params) = match cell_prompt(ctx.cfg, ctx.bank, cell) {
        Ok(x) => x,
        Err(e) => return fail(cell, "prompt", e),
    };
    let generated = provider(ctx.cfg, &cell.provider).and_then(|p| {
        let seed = super::grid::derive_seed(ctx.cfg.seed, &[&cell.id]);
        let t = ctx.gateway.generate_conversation(&bundle, p, Some(seed))?;
        Ok((p, t))
    });
    let (pcfg, transcript) = match generated {
        Ok(x) => x,
        Err(e) => return fail(cell, "generate", e),
    };
    let saved = match save_transcript(&ctx.run_dir.join("transcripts"), &transcript) {
        Ok(p) => p,
        Err(e) => return fail(cell, "generate", e),
    };
    let rel = saved
        .strip_prefix(ctx.run_dir)
        .unwrap_or(&saved)
        .to_string_lossy()
        .replace('\\', "/");
    let metrics = match cell_metrics(ctx, cell, &transcript, params.as_ref()) {
        Ok(m) => m,
        Err((stage, e)) => return fail(cell, stage, e),
    };
    CellOutcome::Ok(CellRecord {
        cell: cell.clone(),
        model_id: pcfg.model.clone(),
        prompt_hash: bundle.content_hash.clone(),
        transcript: rel,
        turns_generated: transcript.len(),
        quality_flags: transcript.quality_flags.clone(),
        params,
        metrics,
    })
}

fn cell_metrics(
    ctx: &Context,
    cell: &Cell,
    t: &Transcript,
    params: Option<&ConversationParameters>,
) -> std::result::Result<CellMetrics, (&'static str, Error)> {
    let m = |e| ("metrics", e);
    let need = || params.ok_or_else(|| m(Error::Config(format!("{} cells must be parameterized", ctx.cfg.kind))));
    Ok(match ctx.cfg.kind {
        ExperimentKind::Diversity => CellMetrics::Diversity { topic: topic_text(t) },
        ExperimentKind::Adherence => {
            let p = need()?;
            let judge = ctx
                .cfg
                .judge
                .as_ref()
                .ok_or_else(|| m(Error::Config("no judge configured".into())))?;
            let inferred = ctx
                .gateway
                .judge_infer_parameters(t, judge, &cell.id)
                .map_err(|e| ("judge", e))?;
            CellMetrics::Adherence {
                set: p.judged_values(),
                inferred,
                focus_level: p.participants.user.focus_level,
                coherence: topic_coherence(t, ctx.drift_embedder.as_ref()).map_err(m)?,
            }
        }
        ExperimentKind::Drift => {
            let opening_topic = opening_utterance(t);
            CellMetrics::Drift {
                series: topic_drift_series(t, &opening_topic, ctx.drift_embedder.as_ref()).map_err(m)?,
                coherence: topic_coherence(t, ctx.drift_embedder.as_ref()).map_err(m)?,
                opening_topic,
            }
        }
        ExperimentKind::Stability => {
            let p = need()?;
            let mut lengths: Vec<u32> = ctx
                .cfg
                .checkpoints
                .iter()
                .copied()
                .filter(|&k| k as usize <= t.len())
                .collect();
            if lengths.is_empty() {
                lengths.push(t.len() as u32);
            }
            let mut checkpoints = Vec::new();
            for k in lengths {
                let part = prefix(t, k as usize);
                if part.user_turns().next().is_none() {
                    continue;
                }
                checkpoints.push(StabilityCheckpoint {
                    turns: k,
                    score: stability_score(&part, p, ctx.scoring).map_err(m)?,
                });
            }
            CellMetrics::Stability { checkpoints }
        }
        ExperimentKind::Revisit => {
            let sets = extract_entities(t, &ctx.cfg.ner, ctx.scoring, None).map_err(m)?;
            CellMetrics::Revisit {
                result: revisit_rate(&sets).map_err(m)?,
            }
        }
    })
}

pub(crate) fn write_outcome(run_dir: &Path, outcome: &CellOutcome) -> Result<()> {
    let path = outcome_path(run_dir, outcome.cell());
    write_atomic(&path, serde_json::to_string_pretty(outcome)?.as_bytes())
}
