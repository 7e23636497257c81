//! Blinded parameter inference and human label import.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::provider::{ChatRequest, Purpose};
use super::transcript::{outermost_object, Transcript};
use crate::error::{Error, Result};
use crate::metrics::{ParamMap, ParamValue};
use crate::prompt::{render, render_parameter_definitions, TEMPLATE_VERSION};
use crate::schema::{resolve_path, DecisionMakingStyle, FeedbackReception, SmoothnessGrade, PARAMETER_PATHS};

const JUDGE_SYSTEM: &str = include_str!("../../templates/judge_system.txt");
const JUDGE: &str = include_str!("../../templates/judge.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Integer scale 1–5.
    Level,
    Labels(&'static [&'static str]),
}

/// Parameters a judge is asked to reconstruct.
pub const JUDGED: &[(&str, Domain)] = &[
    ("participants.knowledgeGapLevel", Domain::Level),
    ("participants.user.focusLevel", Domain::Level),
    ("participants.user.priorKnowledgeLevel", Domain::Level),
    (
        "participants.user.decisionMakingStyle",
        Domain::Labels(DecisionMakingStyle::LABELS),
    ),
    (
        "participants.user.feedbackReception",
        Domain::Labels(FeedbackReception::LABELS),
    ),
    (
        "conversationDynamics.smoothnessFactor",
        Domain::Labels(SmoothnessGrade::LABELS),
    ),
];

fn domain(path: &str) -> Option<Domain> {
    JUDGED.iter().find(|(p, _)| *p == path).map(|(_, d)| *d)
}

fn leaf(path: &str) -> &str {
    path.rsplit('.').next().unwrap_or(path)
}

/// Check a judged value against its domain, returning the canonical form.
fn check_value(d: Domain, value: &Value) -> Option<ParamValue> {
    match d {
        Domain::Level => {
            let x = value
                .as_f64()
                .or_else(|| value.as_str().and_then(|s| s.trim().parse().ok()))?;
            (x.is_finite() && (1.0..=5.0).contains(&x)).then_some(ParamValue::Number(x))
        }
        Domain::Labels(labels) => {
            let s = value.as_str()?.trim();
            labels
                .iter()
                .find(|l| l.eq_ignore_ascii_case(s))
                .map(|l| ParamValue::Label(l.to_string()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JudgeKind {
    Llm,
    Human,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferredParameters {
    pub conversation_id: String,
    pub judge: JudgeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator_id: Option<String>,
    pub numeric: BTreeMap<String, f64>,
    pub categorical: BTreeMap<String, String>,
    /// Out-of-domain answers, excluded from scoring.
    #[serde(default)]
    pub invalid: BTreeMap<String, Value>,
    /// Requested paths the judge did not answer.
    #[serde(default)]
    pub missing: Vec<String>,
    #[serde(default)]
    pub raw: String,
}

impl InferredParameters {
    fn empty(conversation_id: &str, judge: JudgeKind) -> Self {
        Self {
            conversation_id: conversation_id.to_string(),
            judge,
            annotator_id: None,
            numeric: BTreeMap::new(),
            categorical: BTreeMap::new(),
            invalid: BTreeMap::new(),
            missing: Vec::new(),
            raw: String::new(),
        }
    }

    fn insert(&mut self, path: &str, value: ParamValue) {
        match value {
            ParamValue::Number(x) => {
                self.numeric.insert(path.to_string(), x);
            }
            ParamValue::Label(s) => {
                self.categorical.insert(path.to_string(), s);
            }
        }
    }

    /// Valid inferences only.
    pub fn values(&self) -> ParamMap {
        let mut map = ParamMap::new();
        for (k, v) in &self.numeric {
            map.insert(k.clone(), ParamValue::Number(*v));
        }
        for (k, v) in &self.categorical {
            map.insert(k.clone(), ParamValue::Label(v.clone()));
        }
        map
    }
}

fn render_turns(transcript: &Transcript) -> String {
    transcript
        .conversation
        .iter()
        .map(|t| {
            let content: String = t.content.split_whitespace().collect::<Vec<_>>().join(" ");
            format!("Turn {} ({}): {content}", t.turn, t.speaker)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn answer_keys() -> String {
    JUDGED
        .iter()
        .map(|(p, d)| match d {
            Domain::Level => format!("- \"{}\": integer from 1 to 5", leaf(p)),
            Domain::Labels(l) => format!("- \"{}\": one of {}", leaf(p), l.join(", ")),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// The judge request sees turn contents and the definition catalog only.
pub fn judge_request(transcript: &Transcript) -> ChatRequest {
    let user = render(
        JUDGE.trim_end(),
        &[
            ("definitions", &render_parameter_definitions()),
            ("conversation", &render_turns(transcript)),
            ("answer_keys", &answer_keys()),
        ],
    );
    let system = JUDGE_SYSTEM.trim_end().to_string();
    let mut h = Sha256::new();
    for part in ["judge", TEMPLATE_VERSION, &system, &user] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    ChatRequest {
        key: hex::encode(h.finalize()),
        purpose: Purpose::Judge,
        system,
        user,
    }
}

/// Parse a judge's JSON answer. Unknown keys are ignored; out-of-range or
/// off-label answers are kept in `invalid`; unanswered paths in `missing`.
pub fn parse_judge_answer(raw: &str, conversation_id: &str) -> Result<InferredParameters> {
    let object: serde_json::Map<String, Value> = serde_json::from_str(raw.trim())
        .ok()
        .or_else(|| outermost_object(raw).and_then(|o| serde_json::from_str(o).ok()))
        .ok_or_else(|| Error::OutputParse {
            message: "judge answer contains no JSON object".into(),
            raw: raw.to_string(),
        })?;
    let mut out = InferredParameters::empty(conversation_id, JudgeKind::Llm);
    out.raw = raw.to_string();
    let mut answered = BTreeMap::new();
    for (key, value) in object {
        match resolve_path(&key).filter(|p| domain(p).is_some()) {
            Some(path) => {
                answered.insert(path, value);
            }
            None => log::debug!("judge answered unrequested key `{key}`"),
        }
    }
    for (path, d) in JUDGED {
        match answered.get(path) {
            None => {
                log::warn!("judge answer for {conversation_id} is missing `{path}`");
                out.missing.push(path.to_string());
            }
            Some(v) => match check_value(*d, v) {
                Some(value) => out.insert(path, value),
                None => {
                    out.invalid.insert(path.to_string(), v.clone());
                }
            },
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelRow {
    conversation_id: String,
    annotator_id: String,
    parameter_path: String,
    value: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LabelImport {
    pub records: Vec<InferredParameters>,
    pub errors: Vec<RowError>,
}

/// Read human labels: JSONL rows of
/// `{conversation_id, annotator_id, parameter_path, value}`.
///
/// Rows are grouped into one record per (annotator, conversation). A bad row
/// is reported and skipped; the rest still load.
pub fn import_human_labels(path: &Path) -> Result<LabelImport> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut import = LabelImport::default();
    let mut index: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fail = |message: String| RowError { line: line_no, message };
        let row: LabelRow = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                import.errors.push(fail(format!("malformed row: {e}")));
                continue;
            }
        };
        let Some(param) = PARAMETER_PATHS.iter().find(|p| **p == row.parameter_path) else {
            import
                .errors
                .push(fail(format!("unknown parameter path `{}`", row.parameter_path)));
            continue;
        };
        let Some(d) = domain(param) else {
            import.errors.push(fail(format!("parameter `{param}` is not judged")));
            continue;
        };
        let Some(value) = check_value(d, &row.value) else {
            import
                .errors
                .push(fail(format!("value {} is outside the domain of `{param}`", row.value)));
            continue;
        };
        let key = (row.annotator_id.clone(), row.conversation_id.clone());
        let slot = *index.entry(key).or_insert_with(|| {
            let mut rec = InferredParameters::empty(&row.conversation_id, JudgeKind::Human);
            rec.annotator_id = Some(row.annotator_id.clone());
            import.records.push(rec);
            import.records.len() - 1
        });
        let rec = &mut import.records[slot];
        if rec.numeric.contains_key(*param) || rec.categorical.contains_key(*param) {
            import.errors.push(fail(format!(
                "duplicate label for `{param}` by `{}` on `{}`",
                row.annotator_id, row.conversation_id
            )));
            continue;
        }
        rec.insert(param, value);
    }
    for rec in &mut import.records {
        rec.missing = JUDGED
            .iter()
            .map(|(p, _)| p.to_string())
            .filter(|p| !rec.numeric.contains_key(p) && !rec.categorical.contains_key(p))
            .collect();
    }
    Ok(import)
}
