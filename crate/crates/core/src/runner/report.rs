use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use serde_json::Value;

use super::aggregate::Aggregates;
use super::config::ExperimentKind;
use super::ExperimentResult;
use crate::error::{Error, Result};
use crate::util::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Jsonl,
    Markdown,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Csv, ReportFormat::Jsonl, ReportFormat::Markdown];
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "jsonl" => Ok(Self::Jsonl),
            "markdown" | "md" => Ok(Self::Markdown),
            _ => Err(Error::Input(format!(
                "unknown report format `{s}`; expected csv, jsonl or markdown"
            ))),
        }
    }
}

pub const DIVERSITY_COLUMNS: &[&str] = &[
    "model",
    "topic_diversity",
    "topic_entropy",
    "embedding_diversity",
    "conversations",
];
pub const CLUSTER_COLUMNS: &[&str] = &["model", "rank", "representative", "count"];
pub const ADHERENCE_COLUMNS: &[&str] = &[
    "model",
    "turns",
    "parameter",
    "metric",
    "llm",
    "human",
    "blended",
    "human_weight",
    "llm_weight",
    "llm_judgments",
    "human_judgments",
];
pub const COHERENCE_COLUMNS: &[&str] = &["model", "focus_level", "topic_coherence", "conversations"];
pub const DRIFT_COLUMNS: &[&str] = &[
    "model",
    "smoothness",
    "turn",
    "cosine_similarity",
    "drift",
    "conversations",
];
pub const STABILITY_COLUMNS: &[&str] = &[
    "model",
    "condition",
    "turns",
    "formality_error",
    "technical_error",
    "error",
    "stability",
    "conversations",
];
pub const REVISIT_COLUMNS: &[&str] = &[
    "model",
    "condition",
    "knowledge_gap_level",
    "turns",
    "revisit_rate",
    "raw_count",
    "conversations",
];
pub const REVISIT_TURN_COLUMNS: &[&str] = &[
    "model",
    "condition",
    "knowledge_gap_level",
    "turns",
    "turn",
    "revisit_fraction",
    "conversations",
];
pub const FAILURE_COLUMNS: &[&str] = &["cell", "model", "condition", "turns", "stage", "error"];

/// A named table with a fixed column order.
pub struct Table {
    pub name: &'static str,
    pub title: &'static str,
    pub columns: &'static [&'static str],
    pub rows: Vec<Value>,
}

fn rows<T: Serialize>(items: &[T]) -> Result<Vec<Value>> {
    items.iter().map(|r| Ok(serde_json::to_value(r)?)).collect()
}

/// The tables a run of this kind reports, plus failures.
pub fn tables(kind: ExperimentKind, agg: &Aggregates, result: &ExperimentResult) -> Result<Vec<Table>> {
    use ExperimentKind::*;
    let t = |name, title, columns, rows| Table {
        name,
        title,
        columns,
        rows,
    };
    let mut out = match kind {
        Diversity => vec![
            t(
                "diversity",
                "Topic and embedding diversity",
                DIVERSITY_COLUMNS,
                rows(&agg.diversity)?,
            ),
            t(
                "topic_clusters",
                "Topic cluster frequencies",
                CLUSTER_COLUMNS,
                rows(&agg.topic_clusters)?,
            ),
        ],
        Adherence => vec![
            t(
                "adherence",
                "Parameter adherence by conversation length",
                ADHERENCE_COLUMNS,
                rows(&agg.adherence)?,
            ),
            t(
                "coherence",
                "Topic coherence by focus level",
                COHERENCE_COLUMNS,
                rows(&agg.coherence)?,
            ),
        ],
        Drift => vec![t(
            "drift",
            "Similarity to the opening topic by turn",
            DRIFT_COLUMNS,
            rows(&agg.drift)?,
        )],
        Stability => vec![t(
            "stability",
            "Character stability by turns",
            STABILITY_COLUMNS,
            rows(&agg.stability)?,
        )],
        Revisit => vec![
            t(
                "revisit",
                "Entity revisit rate by knowledge gap level",
                REVISIT_COLUMNS,
                rows(&agg.revisit)?,
            ),
            t(
                "revisit_turns",
                "Entity revisit fraction by turn",
                REVISIT_TURN_COLUMNS,
                rows(&agg.revisit_turns)?,
            ),
        ],
    };
    let failures = result
        .failures
        .iter()
        .map(|f| {
            serde_json::json!({
                "cell": f.cell.id,
                "model": f.cell.provider,
                "condition": f.cell.condition,
                "turns": f.cell.turns,
                "stage": f.stage,
                "error": f.error,
            })
        })
        .collect();
    out.push(t("failures", "Failed cells", FAILURE_COLUMNS, failures));
    Ok(out)
}

fn cell_text(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
    }
}

fn markdown_cell(v: Option<&Value>) -> String {
    match v {
        Some(Value::Number(n)) if n.is_f64() => format!("{:.4}", n.as_f64().unwrap_or(f64::NAN)),
        _ => cell_text(v).replace('|', "\\|").replace('\n', " "),
    }
}

fn csv_bytes(table: &Table) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::Input(format!("csv: {e}"));
    w.write_record(table.columns).map_err(fail)?;
    for row in &table.rows {
        w.write_record(table.columns.iter().map(|c| cell_text(row.get(*c))))
            .map_err(fail)?;
    }
    w.into_inner().map_err(|e| Error::Input(format!("csv: {e}")))
}

fn jsonl_bytes(table: &Table) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for row in &table.rows {
        serde_json::to_writer(&mut out, row)?;
        out.push(b'\n');
    }
    Ok(out)
}

fn markdown(tables: &[Table], result: &ExperimentResult) -> String {
    let m = &result.manifest;
    let mut s = String::new();
    let _ = writeln!(s, "# {} ({})\n", m.config.name, m.config.kind);
    let _ = writeln!(s, "- config hash: `{}`", m.config_hash);
    let _ = writeln!(s, "- template version: {}", m.template_version);
    let _ = writeln!(s, "- seed: {}", m.config.seed);
    let _ = writeln!(
        s,
        "- cells: {} ({} completed, {} failed)",
        m.grid_size, m.completed, m.failed
    );
    if let Some((h, l)) = result.aggregates.judge_agreement {
        let _ = writeln!(s, "- judge agreement: human {h:.4}, llm {l:.4}");
    }
    for t in tables {
        let _ = writeln!(s, "\n## {}\n", t.title);
        let _ = writeln!(s, "| {} |", t.columns.join(" | "));
        let _ = writeln!(s, "|{}", "---|".repeat(t.columns.len()));
        for row in &t.rows {
            let cells: Vec<String> = t.columns.iter().map(|c| markdown_cell(row.get(*c))).collect();
            let _ = writeln!(s, "| {} |", cells.join(" | "));
        }
    }
    s
}

/// Write report files under `<run>/reports` and return their paths.
pub fn report(result: &ExperimentResult, format: ReportFormat) -> Result<Vec<PathBuf>> {
    let dir = result.run_dir.join("reports");
    let tables = tables(result.manifest.config.kind, &result.aggregates, result)?;
    let mut written = Vec::new();
    match format {
        ReportFormat::Csv | ReportFormat::Jsonl => {
            for t in &tables {
                let (ext, bytes) = match format {
                    ReportFormat::Csv => ("csv", csv_bytes(t)?),
                    _ => ("jsonl", jsonl_bytes(t)?),
                };
                let path = dir.join(format!("{}.{ext}", t.name));
                write_atomic(&path, &bytes)?;
                written.push(path);
            }
        }
        ReportFormat::Markdown => {
            let path = dir.join("report.md");
            write_atomic(&path, markdown(&tables, result).as_bytes())?;
            written.push(path);
        }
    }
    Ok(written)
}
