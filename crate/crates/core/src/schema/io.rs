use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::validate::{validate, RuleId, ValidationReport, Violation};
use super::{ConversationParameters, ENUM_FIELDS, SECTIONS};
use crate::error::{Error, Result};

/// Top-level wrapper of a parameter file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ParameterDocument {
    pub conversation_parameters: ConversationParameters,
}

const ROOT_KEY: &str = "conversationParameters";
const PRIOR_KNOWLEDGE: &str = "/conversationParameters/participants/user/priorKnowledgeLevel";

/// Parse a parameter document. Unknown fields are rejected with their path.
pub fn parse_parameters(document: &str) -> Result<ConversationParameters> {
    let (params, warnings) = parse_parameters_with_warnings(document)?;
    for w in warnings {
        log::warn!("{w}");
    }
    Ok(params)
}

/// Like [`parse_parameters`] but returns normalization warnings to the caller.
pub fn parse_parameters_with_warnings(document: &str) -> Result<(ConversationParameters, Vec<String>)> {
    let mut value = read_value(document)?;
    let warnings = normalize(&mut value);
    let params = from_value(value)?;
    Ok((params, warnings))
}

/// Emit canonical JSON for parameters that validate clean.
///
/// Key order follows the schema; identical parameters give identical bytes.
pub fn serialize_parameters(params: &ConversationParameters) -> Result<String> {
    let report = validate(params);
    if !report.ok {
        return Err(Error::Validation(report));
    }
    let doc = ParameterDocument {
        conversation_parameters: params.clone(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Validate a raw document, including label membership of categorical
/// fields, which typed parameters cannot represent.
///
/// Structural problems (malformed JSON, missing or unknown fields, wrong
/// value types) are still errors.
pub fn validate_document(document: &str) -> Result<ValidationReport> {
    let mut value = read_value(document)?;
    let notes = normalize(&mut value);
    let mut enum_violations = Vec::new();
    for (path, labels) in ENUM_FIELDS {
        let pointer = format!("/{ROOT_KEY}/{}", path.replace('.', "/"));
        let Some(slot) = value.pointer_mut(&pointer) else {
            continue;
        };
        let Some(label) = slot.as_str() else {
            continue;
        };
        if !labels.contains(&label) {
            enum_violations.push(Violation {
                path: path.to_string(),
                rule: RuleId::EnumMembership,
                message: format!("`{label}` is not one of {}", labels.join(", ")),
            });
            *slot = Value::String(labels[0].to_string());
        }
    }
    let params = from_value(value)?;
    let report = validate(&params);
    let mut violations = enum_violations;
    violations.extend(report.violations);
    let mut warnings = report.warnings;
    warnings.extend(notes.into_iter().map(|message| Violation {
        path: "participants.user.priorKnowledgeLevel".into(),
        rule: RuleId::LevelRange,
        message,
    }));
    Ok(ValidationReport::from_parts(violations, warnings))
}

fn read_value(document: &str) -> Result<Value> {
    if document.trim().is_empty() {
        return Err(missing_sections(&Value::Null));
    }
    let value: Value = serde_json::from_str(document).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if !value.is_object() {
        return Err(Error::Schema {
            path: "$".into(),
            message: "document root must be an object".into(),
        });
    }
    let missing = match value.get(ROOT_KEY) {
        Some(Value::Object(map)) => SECTIONS.iter().any(|s| !map.contains_key(*s)),
        Some(_) => false,
        None => value.as_object().is_some_and(|m| m.is_empty()),
    };
    if missing {
        return Err(missing_sections(&value));
    }
    Ok(value)
}

fn missing_sections(value: &Value) -> Error {
    let present = value.get(ROOT_KEY).and_then(Value::as_object);
    let missing: Vec<&str> = SECTIONS
        .iter()
        .filter(|s| present.is_none_or(|m| !m.contains_key(**s)))
        .copied()
        .collect();
    Error::Schema {
        path: ROOT_KEY.into(),
        message: format!("missing sections: {}", missing.join(", ")),
    }
}

/// Map unit-interval prior-knowledge values onto the 1–5 scale.
fn normalize(value: &mut Value) -> Vec<String> {
    let mut warnings = Vec::new();
    if let Some(slot) = value.pointer_mut(PRIOR_KNOWLEDGE) {
        if let Some(x) = slot.as_f64().filter(|_| slot.is_f64()) {
            if (0.0..=1.0).contains(&x) {
                let level = (1.0 + 4.0 * x).round() as i64;
                warnings.push(format!(
                    "priorKnowledgeLevel {x} read as a unit-interval value and mapped to level {level}"
                ));
                *slot = Value::from(level);
            } else if x.fract() == 0.0 {
                *slot = Value::from(x as i64);
            }
        }
    }
    warnings
}

fn from_value(value: Value) -> Result<ConversationParameters> {
    let doc: ParameterDocument = serde_path_to_error::deserialize(value).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    Ok(doc.conversation_parameters)
}
