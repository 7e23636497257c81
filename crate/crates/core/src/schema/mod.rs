//! Hierarchical conversation-parameter model.
//!
//! Parameters are grouped into six categories (fundamentals, participants,
//! learning approach, conversation dynamics, linguistic patterns and content
//! attributes). The JSON wire format mirrors the documented example input key
//! for key, wrapped in a top-level `conversationParameters` object.

mod io;
mod labels;
mod random;
mod validate;

use std::fmt;
use std::str::FromStr;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use io::{
    parse_parameters, parse_parameters_with_warnings, serialize_parameters, validate_document, ParameterDocument,
};
pub use labels::{
    Arc, DecisionMakingStyle, DisagreementHandling, FeedbackReception, Framework, Purpose, SmoothnessGrade, Speaker,
};
pub use random::{randomize_parameters, Constraints};
pub use validate::{validate, RuleId, ValidationReport, Violation};

/// Tolerance for the question-type distribution summing to one.
pub const QUESTION_TYPE_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ConversationParameters {
    pub fundamentals: Fundamentals,
    pub participants: Participants,
    pub learning_approach: LearningApproach,
    pub conversation_dynamics: ConversationDynamics,
    pub linguistic_patterns: LinguisticPatterns,
    pub content_attributes: ContentAttributes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Fundamentals {
    pub purpose: Purpose,
    /// Number of exchanges in the conversation.
    pub turns: i64,
    pub turn_balance: TurnBalance,
    pub arc: Arc,
    pub initiator: Speaker,
    pub topic_scope: Vec<String>,
}

/// Percentage split of turns between user and advisor, written `"55:45"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TurnBalance {
    pub user: i64,
    pub assistant: i64,
}

impl TurnBalance {
    pub fn new(user: i64, assistant: i64) -> Self {
        Self { user, assistant }
    }
}

impl fmt::Display for TurnBalance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.user, self.assistant)
    }
}

impl FromStr for TurnBalance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (user, assistant) = s
            .split_once(':')
            .ok_or_else(|| format!("turn balance `{s}` is not of the form `user:assistant`"))?;
        let parse = |part: &str| {
            part.trim()
                .parse::<i64>()
                .map_err(|_| format!("turn balance component `{part}` is not an integer"))
        };
        Ok(TurnBalance {
            user: parse(user)?,
            assistant: parse(assistant)?,
        })
    }
}

impl Serialize for TurnBalance {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TurnBalance {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Participants {
    /// 1 = expert, 5 = complete novice.
    pub knowledge_gap_level: i64,
    pub assistant: AssistantSpec,
    pub user: UserSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AssistantSpec {
    pub identity: String,
    pub consistency_level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct UserSpec {
    pub identity: String,
    /// 1 = free-flowing, 5 = laser-focused on implementation details.
    pub focus_level: i64,
    /// 1 = complete novice, 5 = expert level.
    pub prior_knowledge_level: i64,
    pub decision_making_style: DecisionMakingStyle,
    pub feedback_reception: FeedbackReception,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LearningApproach {
    pub framework: Framework,
    pub practical_theoretical_balance: f64,
    pub complexity_progression: Vec<f64>,
    pub industry_context: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ConversationDynamics {
    pub formality: f64,
    pub emotional_journey: Vec<EmotionPoint>,
    pub relationship_development: f64,
    pub disagreement_handling: DisagreementHandling,
    #[serde(default)]
    pub smoothness_factor: SmoothnessGrade,
}

/// One step of the emotional journey, written `{"uncertainty": 0.8}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmotionPoint {
    pub emotion: String,
    pub intensity: f64,
}

impl EmotionPoint {
    pub fn new(emotion: impl Into<String>, intensity: f64) -> Self {
        Self {
            emotion: emotion.into(),
            intensity,
        }
    }
}

impl Serialize for EmotionPoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(1))?;
        map.serialize_entry(&self.emotion, &self.intensity)?;
        map.end()
    }
}

impl<'de> Deserialize<'de> for EmotionPoint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct PointVisitor;

        impl<'de> Visitor<'de> for PointVisitor {
            type Value = EmotionPoint;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a single-entry object mapping an emotion to its intensity")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let (emotion, intensity): (String, f64) = map
                    .next_entry()?
                    .ok_or_else(|| de::Error::custom("empty emotion entry"))?;
                if map.next_key::<String>()?.is_some() {
                    return Err(de::Error::custom("emotion entry must contain exactly one emotion"));
                }
                Ok(EmotionPoint { emotion, intensity })
            }
        }

        deserializer.deserialize_map(PointVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LinguisticPatterns {
    pub technical_language_level: f64,
    pub question_types: QuestionTypes,
    pub response_style: ResponseStyle,
}

/// Distribution over inquiry styles; must sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionTypes {
    pub closed: f64,
    pub open: f64,
    pub rhetorical: f64,
    pub clarifying: f64,
}

impl QuestionTypes {
    pub fn sum(&self) -> f64 {
        self.closed + self.open + self.rhetorical + self.clarifying
    }

    pub fn entries(&self) -> [(&'static str, f64); 4] {
        [
            ("closed", self.closed),
            ("open", self.open),
            ("rhetorical", self.rhetorical),
            ("clarifying", self.clarifying),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseStyle {
    pub conciseness: f64,
    pub directness: f64,
    pub formality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ContentAttributes {
    pub factual_accuracy: f64,
    pub example_specificity: f64,
    pub stakeholder_perspectives: Vec<String>,
}

/// Paths of every enum-valued field, with its legal labels.
pub(crate) const ENUM_FIELDS: &[(&str, &[&str])] = &[
    ("fundamentals.purpose", Purpose::LABELS),
    ("fundamentals.arc", Arc::LABELS),
    ("fundamentals.initiator", Speaker::LABELS),
    ("participants.user.decisionMakingStyle", DecisionMakingStyle::LABELS),
    ("participants.user.feedbackReception", FeedbackReception::LABELS),
    ("learningApproach.framework", Framework::LABELS),
    (
        "conversationDynamics.disagreementHandling",
        DisagreementHandling::LABELS,
    ),
    ("conversationDynamics.smoothnessFactor", SmoothnessGrade::LABELS),
];

/// Every leaf path of the schema, in canonical order.
pub const PARAMETER_PATHS: &[&str] = &[
    "fundamentals.purpose",
    "fundamentals.turns",
    "fundamentals.turnBalance",
    "fundamentals.arc",
    "fundamentals.initiator",
    "fundamentals.topicScope",
    "participants.knowledgeGapLevel",
    "participants.assistant.identity",
    "participants.assistant.consistencyLevel",
    "participants.user.identity",
    "participants.user.focusLevel",
    "participants.user.priorKnowledgeLevel",
    "participants.user.decisionMakingStyle",
    "participants.user.feedbackReception",
    "learningApproach.framework",
    "learningApproach.practicalTheoreticalBalance",
    "learningApproach.complexityProgression",
    "learningApproach.industryContext",
    "conversationDynamics.formality",
    "conversationDynamics.emotionalJourney",
    "conversationDynamics.relationshipDevelopment",
    "conversationDynamics.disagreementHandling",
    "conversationDynamics.smoothnessFactor",
    "linguisticPatterns.technicalLanguageLevel",
    "linguisticPatterns.questionTypes.closed",
    "linguisticPatterns.questionTypes.open",
    "linguisticPatterns.questionTypes.rhetorical",
    "linguisticPatterns.questionTypes.clarifying",
    "linguisticPatterns.responseStyle.conciseness",
    "linguisticPatterns.responseStyle.directness",
    "linguisticPatterns.responseStyle.formality",
    "contentAttributes.factualAccuracy",
    "contentAttributes.exampleSpecificity",
    "contentAttributes.stakeholderPerspectives",
];

/// Top-level sections in canonical order.
pub const SECTIONS: &[&str] = &[
    "fundamentals",
    "participants",
    "learningApproach",
    "conversationDynamics",
    "linguisticPatterns",
    "contentAttributes",
];

/// Resolve a full dotted path or a unique leaf name (e.g. `turns`) to a full path.
pub fn resolve_path(name: &str) -> Option<&'static str> {
    let all = || PARAMETER_PATHS.iter().chain(SUBTREE_PATHS.iter());
    if let Some(p) = all().find(|p| **p == name) {
        return Some(p);
    }
    let mut matches = all().filter(|p| p.rsplit('.').next() == Some(name));
    match (matches.next(), matches.next()) {
        (Some(p), None) => Some(p),
        _ => None,
    }
}

const SUBTREE_PATHS: &[&str] = &[
    "fundamentals",
    "participants",
    "participants.assistant",
    "participants.user",
    "learningApproach",
    "conversationDynamics",
    "linguisticPatterns",
    "linguisticPatterns.questionTypes",
    "linguisticPatterns.responseStyle",
    "contentAttributes",
];

impl ConversationParameters {
    /// The parameter values a blinded judge is asked to reconstruct, keyed by path.
    pub fn judged_values(&self) -> crate::metrics::ParamMap {
        use crate::metrics::ParamValue;
        let mut map = crate::metrics::ParamMap::new();
        map.insert(
            "participants.knowledgeGapLevel".into(),
            ParamValue::Number(self.participants.knowledge_gap_level as f64),
        );
        map.insert(
            "participants.user.focusLevel".into(),
            ParamValue::Number(self.participants.user.focus_level as f64),
        );
        map.insert(
            "participants.user.priorKnowledgeLevel".into(),
            ParamValue::Number(self.participants.user.prior_knowledge_level as f64),
        );
        map.insert(
            "participants.user.decisionMakingStyle".into(),
            ParamValue::Label(self.participants.user.decision_making_style.to_string()),
        );
        map.insert(
            "participants.user.feedbackReception".into(),
            ParamValue::Label(self.participants.user.feedback_reception.to_string()),
        );
        map.insert(
            "conversationDynamics.smoothnessFactor".into(),
            ParamValue::Label(self.conversation_dynamics.smoothness_factor.to_string()),
        );
        map
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn turn_balance_parses_and_displays() {
        let tb: TurnBalance = "55:45".parse().unwrap();
        assert_eq!(tb, TurnBalance::new(55, 45));
        assert_eq!(tb.to_string(), "55:45");
        assert!("55-45".parse::<TurnBalance>().is_err());
        assert!("a:b".parse::<TurnBalance>().is_err());
    }

    #[test]
    fn emotion_point_uses_single_key_objects() {
        let p: EmotionPoint = serde_json::from_str(r#"{"curiosity": 0.7}"#).unwrap();
        assert_eq!(p, EmotionPoint::new("curiosity", 0.7));
        assert_eq!(serde_json::to_string(&p).unwrap(), r#"{"curiosity":0.7}"#);
        assert!(serde_json::from_str::<EmotionPoint>(r#"{"a": 0.1, "b": 0.2}"#).is_err());
        assert!(serde_json::from_str::<EmotionPoint>("{}").is_err());
    }

    #[test]
    fn resolve_path_accepts_unique_leaves_only() {
        assert_eq!(resolve_path("turns"), Some("fundamentals.turns"));
        assert_eq!(
            resolve_path("smoothnessFactor"),
            Some("conversationDynamics.smoothnessFactor")
        );
        // `formality` exists in both dynamics and response style.
        assert_eq!(resolve_path("formality"), None);
        assert_eq!(
            resolve_path("linguisticPatterns.questionTypes"),
            Some("linguisticPatterns.questionTypes")
        );
        assert_eq!(resolve_path("nonsense"), None);
    }

    #[test]
    fn every_parameter_path_exists_in_the_serialized_example() {
        let value = serde_json::to_value(fixtures::example()).unwrap();
        for path in PARAMETER_PATHS {
            let pointer = format!("/{}", path.replace('.', "/"));
            assert!(value.pointer(&pointer).is_some(), "missing {path}");
        }
    }
}
