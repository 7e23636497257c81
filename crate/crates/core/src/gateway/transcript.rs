//! Conversation transcripts in the generator's output format.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::schema::Speaker;

/// Quality flag: the provider produced a different number of turns than the
/// bundle asked for.
pub const FLAG_TURN_COUNT_MISMATCH: &str = "turn-count-mismatch";
/// Quality flag: metadata `totalTurns` disagreed with the turn list and was
/// corrected to the list length.
pub const FLAG_TOTAL_TURNS_CORRECTED: &str = "metadata-total-turns-corrected";
/// Quality flag: a `complexityLevel` outside [0, 1] was dropped.
pub const FLAG_COMPLEXITY_DROPPED: &str = "complexity-level-dropped";
/// Quality flag: the output needed the repair pass to parse.
pub const FLAG_REPAIRED: &str = "repaired-output";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TranscriptMetadata {
    #[serde(default)]
    pub participant_roles: Value,
    #[serde(default)]
    pub conversation_arc: String,
    pub total_turns: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initiator: Option<Speaker>,
    /// Any further keys the generator emitted, kept verbatim.
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TranscriptTurn {
    pub turn: u32,
    pub speaker: Speaker,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emotional_state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complexity_level: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub prompt_hash: String,
    pub provider_id: String,
    pub model_id: String,
    pub timestamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub metadata: TranscriptMetadata,
    pub conversation: Vec<TranscriptTurn>,
    /// Generator self-analysis; stored but never scored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub quality_flags: Vec<String>,
}

impl Transcript {
    /// Check ordering, alternation and content invariants.
    pub fn check(&self) -> std::result::Result<(), String> {
        if self.conversation.is_empty() {
            return Err("conversation has no turns".into());
        }
        for (i, t) in self.conversation.iter().enumerate() {
            if t.turn as usize != i + 1 {
                return Err(format!(
                    "non-contiguous turn indices: position {} has turn {}",
                    i + 1,
                    t.turn
                ));
            }
            if t.content.trim().is_empty() {
                return Err(format!("turn {} has empty content", t.turn));
            }
            if let Some(c) = t.complexity_level {
                if !(0.0..=1.0).contains(&c) {
                    return Err(format!("turn {} complexityLevel {c} outside [0, 1]", t.turn));
                }
            }
        }
        let first = self.metadata.initiator.unwrap_or(self.conversation[0].speaker);
        for (i, t) in self.conversation.iter().enumerate() {
            let expected = if i % 2 == 0 { first } else { first.other() };
            if t.speaker != expected {
                return Err(format!(
                    "speakers do not alternate: turn {} is {}, expected {}",
                    t.turn, t.speaker, expected
                ));
            }
        }
        if self.metadata.total_turns as usize != self.conversation.len() {
            return Err(format!(
                "metadata totalTurns {} but {} turns present",
                self.metadata.total_turns,
                self.conversation.len()
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.conversation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conversation.is_empty()
    }

    pub fn user_turns(&self) -> impl Iterator<Item = &TranscriptTurn> {
        self.conversation.iter().filter(|t| t.speaker == Speaker::User)
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.quality_flags.iter().any(|f| f == flag)
    }

    pub(crate) fn flag(&mut self, flag: &str) {
        if !self.has_flag(flag) {
            self.quality_flags.push(flag.to_string());
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `<prompt hash>--<model slug>.json`; transcripts without provenance
    /// are addressed by their own content hash.
    pub fn file_name(&self) -> Result<String> {
        Ok(match &self.provenance {
            Some(p) => format!("{}--{}.json", p.prompt_hash, slug(&p.model_id)),
            None => {
                use sha2::{Digest, Sha256};
                format!("{}.json", hex::encode(Sha256::digest(self.to_json()?.as_bytes())))
            }
        })
    }
}

pub(crate) fn slug(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Write a transcript under its content-addressed name and return the path.
pub fn save_transcript(dir: &Path, transcript: &Transcript) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(transcript.file_name()?);
    crate::util::write_atomic(&path, transcript.to_json()?.as_bytes())?;
    Ok(path)
}

pub fn load_transcript(path: &Path) -> Result<Transcript> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_output(&text)
}

/// Parse generator output into a transcript.
///
/// A strict parse is tried first. If it fails, one repair pass strips code
/// fences and keeps the outermost balanced `{...}` block, then parses again.
pub fn parse_output(raw: &str) -> Result<Transcript> {
    match strict(raw) {
        Ok(t) => Ok(t),
        Err(first) => {
            let repaired = repair(raw).ok_or_else(|| parse_error(&first, raw))?;
            let mut t =
                strict(&repaired).map_err(|second| parse_error(&format!("{first}; after repair: {second}"), raw))?;
            t.flag(FLAG_REPAIRED);
            Ok(t)
        }
    }
}

fn parse_error(message: &str, raw: &str) -> Error {
    Error::OutputParse {
        message: message.to_string(),
        raw: raw.to_string(),
    }
}

fn strict(text: &str) -> std::result::Result<Transcript, String> {
    let mut t: Transcript = serde_json::from_str(text.trim()).map_err(|e| e.to_string())?;
    if t.conversation
        .iter()
        .any(|x| x.complexity_level.is_some_and(|c| !(0.0..=1.0).contains(&c)))
    {
        for turn in &mut t.conversation {
            if turn.complexity_level.is_some_and(|c| !(0.0..=1.0).contains(&c)) {
                turn.complexity_level = None;
            }
        }
        t.flag(FLAG_COMPLEXITY_DROPPED);
    }
    if t.metadata.total_turns as usize != t.conversation.len() {
        t.metadata.total_turns = t.conversation.len() as u32;
        t.flag(FLAG_TOTAL_TURNS_CORRECTED);
    }
    t.check()?;
    Ok(t)
}

fn repair(raw: &str) -> Option<String> {
    let unfenced: String = raw
        .lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n");
    outermost_object(&unfenced).map(str::to_string)
}

/// The first balanced top-level `{...}` span, honouring JSON strings.
pub(crate) fn outermost_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in text[start..].char_indices() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + i + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const SAMPLE_DOC: &str = r#"{
  "metadata": {
    "participantRoles": {"user": "early-stage food business entrepreneur", "assistant": "experienced business advisor"},
    "conversationArc": "problem-solution",
    "totalTurns": 4
  },
  "conversation": [
    {"turn": 1, "speaker": "user", "content": "I want to open a vegan bakery but I'm unsure about pricing.", "emotionalState": "uncertainty", "complexityLevel": 0.3},
    {"turn": 2, "speaker": "assistant", "content": "What do comparable bakeries in your area charge?", "emotionalState": "curiosity", "complexityLevel": 0.4},
    {"turn": 3, "speaker": "user", "content": "Around four dollars per pastry.", "emotionalState": "understanding", "complexityLevel": 0.5},
    {"turn": 4, "speaker": "assistant", "content": "Then work backwards from ingredient cost to a target margin.", "emotionalState": "confidence", "complexityLevel": 0.6}
  ],
  "analysis": {
    "parameterAdherence": {"formality": 0.7},
    "learningObjectivesMet": ["pricing"],
    "stakeholderPerspectivesCovered": ["customer"]
  }
}"#;

    #[test]
    fn parses_the_output_format() {
        let t = parse_output(SAMPLE_DOC).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t.metadata.total_turns, 4);
        assert_eq!(t.conversation[1].speaker, Speaker::Assistant);
        assert_eq!(t.conversation[0].complexity_level, Some(0.3));
        assert!(t.analysis.is_some());
        assert!(t.quality_flags.is_empty());
        assert_eq!(t.user_turns().count(), 2);
    }

    #[test]
    fn round_trips_through_serialization() {
        let mut t = parse_output(SAMPLE_DOC).unwrap();
        t.provenance = Some(Provenance {
            prompt_hash: "abc".into(),
            provider_id: "mock".into(),
            model_id: "mock-1".into(),
            timestamp: "2026-01-01T00:00:00Z".into(),
            seed: Some(4),
        });
        t.quality_flags.push(FLAG_TURN_COUNT_MISMATCH.into());
        assert_eq!(parse_output(&t.to_json().unwrap()).unwrap(), t);
        assert_eq!(t.file_name().unwrap(), "abc--mock-1.json");
    }

    #[test]
    fn fenced_output_is_repaired() {
        let fenced = format!("Here you go:\n```json\n{SAMPLE_DOC}\n```\nHope this helps {{}}!");
        let t = parse_output(&fenced).unwrap();
        assert_eq!(t.len(), 4);
        assert!(t.has_flag(FLAG_REPAIRED));
    }

    #[test]
    fn prose_is_a_parse_error_with_raw_text() {
        let raw = "Sure! The entrepreneur asked about pricing and the adviser answered.";
        match parse_output(raw).unwrap_err() {
            Error::OutputParse { raw: kept, .. } => assert_eq!(kept, raw),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gaps_are_rejected() {
        let doc = SAMPLE_DOC.replace("\"turn\": 2", "\"turn\": 3");
        match parse_output(&doc).unwrap_err() {
            Error::OutputParse { message, .. } => {
                assert!(message.contains("non-contiguous turn indices"), "{message}")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_alternating_speakers_are_rejected() {
        let doc = SAMPLE_DOC.replacen("\"speaker\": \"assistant\"", "\"speaker\": \"user\"", 1);
        assert!(parse_output(&doc).is_err());
        let declared = SAMPLE_DOC.replace("\"totalTurns\": 4", "\"totalTurns\": 4, \"initiator\": \"assistant\"");
        assert!(parse_output(&declared).is_err());
    }

    #[test]
    fn metadata_count_is_corrected_and_flagged() {
        let doc = SAMPLE_DOC.replace("\"totalTurns\": 4", "\"totalTurns\": 12");
        let t = parse_output(&doc).unwrap();
        assert_eq!(t.metadata.total_turns, 4);
        assert!(t.has_flag(FLAG_TOTAL_TURNS_CORRECTED));
    }

    #[test]
    fn empty_content_is_rejected() {
        let doc = SAMPLE_DOC.replace("Around four dollars per pastry.", " ");
        assert!(parse_output(&doc).is_err());
    }

    #[test]
    fn outermost_object_respects_strings() {
        assert_eq!(outermost_object(r#"x {"a": "}{"} y"#), Some(r#"{"a": "}{"}"#));
        assert_eq!(outermost_object("no braces"), None);
    }
}
