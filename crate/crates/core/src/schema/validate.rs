use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ConversationParameters, Purpose, QUESTION_TYPE_SUM_TOLERANCE};

/// Identifier of a validation rule. Each rule maps to exactly one id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleId {
    /// A unit-interval parameter lies outside `[0, 1]`.
    UnitRange,
    /// A 1–5 level (knowledge gap, focus, prior knowledge) is out of range.
    LevelRange,
    /// Question-type distribution does not sum to one.
    QuestionTypeSum,
    /// Turn balance components are not positive or do not sum to 100.
    TurnBalance,
    /// Complexity progression is empty or decreases somewhere.
    ComplexityProgression,
    /// A categorical field holds a label outside its set.
    EnumMembership,
    /// Turn count below one.
    TurnCount,
    /// Topic scope is empty or holds a blank topic.
    TopicScope,
    /// An emotional-journey entry has a blank emotion label.
    EmotionLabel,
    /// Advisory conversation without stakeholder perspectives. Warning only.
    StakeholderRelevance,
}

impl RuleId {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::UnitRange => "unit-range",
            RuleId::LevelRange => "level-range",
            RuleId::QuestionTypeSum => "question-type-sum",
            RuleId::TurnBalance => "turn-balance",
            RuleId::ComplexityProgression => "complexity-progression",
            RuleId::EnumMembership => "enum-membership",
            RuleId::TurnCount => "turn-count",
            RuleId::TopicScope => "topic-scope",
            RuleId::EmotionLabel => "emotion-label",
            RuleId::StakeholderRelevance => "stakeholder-relevance",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub rule: RuleId,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.rule, self.path, self.message)
    }
}

/// Outcome of validation. `ok` holds exactly when `violations` is empty;
/// warnings never affect `ok`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<Violation>,
}

impl ValidationReport {
    pub(crate) fn from_parts(violations: Vec<Violation>, warnings: Vec<Violation>) -> Self {
        Self {
            ok: violations.is_empty(),
            violations,
            warnings,
        }
    }

    pub fn has_rule(&self, rule: RuleId) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return f.write_str("ok");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

#[derive(Default)]
struct Collector {
    violations: Vec<Violation>,
    warnings: Vec<Violation>,
}

impl Collector {
    fn push(&mut self, path: impl Into<String>, rule: RuleId, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            rule,
            message: message.into(),
        });
    }

    fn unit(&mut self, path: &str, value: f64) {
        if !(0.0..=1.0).contains(&value) || !value.is_finite() {
            self.push(
                path,
                RuleId::UnitRange,
                format!("{} out of range 0.0–1.0", fmt_num(value)),
            );
        }
    }

    fn level(&mut self, path: &str, label: &str, value: i64) {
        if !(1..=5).contains(&value) {
            self.push(path, RuleId::LevelRange, format!("{label} {value} out of range 1–5"));
        }
    }
}

fn fmt_num(x: f64) -> String {
    let rounded = (x * 1e6).round() / 1e6;
    format!("{rounded}")
}

/// Check every validation rule and report all violations. Never fails.
pub fn validate(params: &ConversationParameters) -> ValidationReport {
    let mut c = Collector::default();

    let f = &params.fundamentals;
    if f.turns < 1 {
        c.push(
            "fundamentals.turns",
            RuleId::TurnCount,
            format!("turn count {} must be at least 1", f.turns),
        );
    }
    let tb = f.turn_balance;
    if tb.user <= 0 || tb.assistant <= 0 || tb.user + tb.assistant != 100 {
        c.push(
            "fundamentals.turnBalance",
            RuleId::TurnBalance,
            format!("turn balance {tb} must be two positive shares summing to 100"),
        );
    }
    if f.topic_scope.is_empty() {
        c.push("fundamentals.topicScope", RuleId::TopicScope, "topic scope is empty");
    }
    for (i, topic) in f.topic_scope.iter().enumerate() {
        if topic.trim().is_empty() {
            c.push(
                format!("fundamentals.topicScope[{i}]"),
                RuleId::TopicScope,
                "blank topic",
            );
        }
    }

    let p = &params.participants;
    c.level(
        "participants.knowledgeGapLevel",
        "knowledge gap level (KGL)",
        p.knowledge_gap_level,
    );
    c.unit("participants.assistant.consistencyLevel", p.assistant.consistency_level);
    c.level("participants.user.focusLevel", "focus level", p.user.focus_level);
    c.level(
        "participants.user.priorKnowledgeLevel",
        "prior knowledge level",
        p.user.prior_knowledge_level,
    );

    let la = &params.learning_approach;
    c.unit(
        "learningApproach.practicalTheoreticalBalance",
        la.practical_theoretical_balance,
    );
    if la.complexity_progression.is_empty() {
        c.push(
            "learningApproach.complexityProgression",
            RuleId::ComplexityProgression,
            "complexity progression is empty",
        );
    }
    for (i, &v) in la.complexity_progression.iter().enumerate() {
        c.unit(&format!("learningApproach.complexityProgression[{i}]"), v);
    }
    if let Some(i) = la.complexity_progression.windows(2).position(|w| w[1] < w[0]) {
        c.push(
            format!("learningApproach.complexityProgression[{}]", i + 1),
            RuleId::ComplexityProgression,
            format!(
                "complexity decreases from {} to {}",
                fmt_num(la.complexity_progression[i]),
                fmt_num(la.complexity_progression[i + 1])
            ),
        );
    }

    let d = &params.conversation_dynamics;
    c.unit("conversationDynamics.formality", d.formality);
    for (i, point) in d.emotional_journey.iter().enumerate() {
        let path = format!("conversationDynamics.emotionalJourney[{i}]");
        if point.emotion.trim().is_empty() {
            c.push(&path, RuleId::EmotionLabel, "blank emotion label");
        }
        c.unit(&path, point.intensity);
    }
    c.unit(
        "conversationDynamics.relationshipDevelopment",
        d.relationship_development,
    );

    let l = &params.linguistic_patterns;
    c.unit("linguisticPatterns.technicalLanguageLevel", l.technical_language_level);
    for (name, v) in l.question_types.entries() {
        c.unit(&format!("linguisticPatterns.questionTypes.{name}"), v);
    }
    let sum = l.question_types.sum();
    if (sum - 1.0).abs() > QUESTION_TYPE_SUM_TOLERANCE {
        c.push(
            "linguisticPatterns.questionTypes",
            RuleId::QuestionTypeSum,
            format!("question types sum {} ≠ 1.0", fmt_num(sum)),
        );
    }
    c.unit(
        "linguisticPatterns.responseStyle.conciseness",
        l.response_style.conciseness,
    );
    c.unit(
        "linguisticPatterns.responseStyle.directness",
        l.response_style.directness,
    );
    c.unit("linguisticPatterns.responseStyle.formality", l.response_style.formality);

    let ca = &params.content_attributes;
    c.unit("contentAttributes.factualAccuracy", ca.factual_accuracy);
    c.unit("contentAttributes.exampleSpecificity", ca.example_specificity);
    if ca.stakeholder_perspectives.is_empty() && f.purpose == Purpose::Advisory {
        c.warnings.push(Violation {
            path: "contentAttributes.stakeholderPerspectives".into(),
            rule: RuleId::StakeholderRelevance,
            message: format!(
                "no stakeholder perspectives given for an advisory conversation in `{}`",
                la.industry_context
            ),
        });
    }

    ValidationReport::from_parts(c.violations, c.warnings)
}
