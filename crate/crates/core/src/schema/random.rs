use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use super::io::ParameterDocument;
use super::validate::validate;
use super::*;
use crate::error::{Error, Result};

/// Turn counts drawn when `fundamentals.turns` is unconstrained.
pub const RANDOM_TURNS: std::ops::RangeInclusive<i64> = 5..=20;

const TOPICS: &[&str] = &[
    "marketing",
    "operations",
    "finance",
    "pricing",
    "hiring",
    "legal compliance",
    "product development",
    "sales",
    "fundraising",
    "supply chain",
    "customer retention",
    "branding",
];

const INDUSTRIES: &[&str] = &[
    "food-business",
    "technology",
    "healthcare",
    "retail",
    "education",
    "construction",
    "hospitality",
    "manufacturing",
    "personal services",
    "agriculture",
];

const ASSISTANT_IDENTITIES: &[&str] = &[
    "experienced business advisor",
    "experienced business advisor with small business expertise",
    "small business development center counselor",
    "startup mentor and former founder",
];

const USER_IDENTITIES: &[&str] = &[
    "early-stage entrepreneur",
    "first-time founder",
    "small business owner planning to expand",
    "career changer exploring a business idea",
];

const EMOTIONS: &[&str] = &[
    "uncertainty",
    "curiosity",
    "confusion",
    "frustration",
    "understanding",
    "optimism",
    "confidence",
    "relief",
];

const STAKEHOLDERS: &[&str] = &[
    "customer",
    "supplier",
    "regulator",
    "competitor",
    "investor",
    "employee",
    "lender",
    "community",
];

/// Partial parameter assignment, keyed by dotted path (`fundamentals.turns`)
/// or by a leaf name that is unique in the schema (`turns`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Constraints {
    values: BTreeMap<String, Value>,
}

impl Constraints {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(mut self, path: &str, value: impl Into<Value>) -> Self {
        self.values.insert(path.to_string(), value.into());
        self
    }

    pub fn insert(&mut self, path: &str, value: impl Into<Value>) {
        self.values.insert(path.to_string(), value.into());
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.values.iter()
    }
}

impl FromIterator<(String, Value)> for Constraints {
    fn from_iter<I: IntoIterator<Item = (String, Value)>>(iter: I) -> Self {
        Self {
            values: iter.into_iter().collect(),
        }
    }
}

/// Draw a parameter bundle uniformly from the legal domain of every field,
/// then pin the constrained fields.
///
/// The same `(seed, constraints)` always yields the same parameters, and the
/// result always validates clean; unsatisfiable constraints are an error.
pub fn randomize_parameters(seed: u64, constraints: &Constraints) -> Result<ConversationParameters> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drawn = draw(&mut rng);
    if constraints.is_empty() {
        return Ok(drawn);
    }

    let mut value = serde_json::to_value(&drawn)?;
    let mut pinned_question_types = Vec::new();
    for (name, v) in constraints.iter() {
        let path =
            resolve_path(name).ok_or_else(|| Error::Constraint(format!("unknown or ambiguous path `{name}`")))?;
        if let Some(kind) = path.strip_prefix("linguisticPatterns.questionTypes.") {
            pinned_question_types.push(kind.to_string());
        } else if path == "linguisticPatterns.questionTypes" {
            pinned_question_types.extend(["closed", "open", "rhetorical", "clarifying"].map(String::from));
        }
        let pointer = format!("/{}", path.replace('.', "/"));
        let slot = value
            .pointer_mut(&pointer)
            .ok_or_else(|| Error::Constraint(format!("path `{path}` not present")))?;
        *slot = v.clone();
    }
    if !pinned_question_types.is_empty() {
        rebalance_question_types(&mut value, &pinned_question_types)?;
    }

    let doc = serde_json::json!({ "conversationParameters": value });
    let params = serde_path_to_error::deserialize::<_, ParameterDocument>(doc)
        .map_err(|e| Error::Constraint(format!("`{}`: {}", e.path(), e.inner())))?
        .conversation_parameters;
    let report = validate(&params);
    if !report.ok {
        return Err(Error::Constraint(format!("constraints are contradictory: {report}")));
    }
    Ok(params)
}

/// Rescale the unpinned question types so the distribution sums to one.
fn rebalance_question_types(value: &mut Value, pinned: &[String]) -> Result<()> {
    let qt = value
        .pointer_mut("/linguisticPatterns/questionTypes")
        .and_then(Value::as_object_mut)
        .ok_or_else(|| Error::Constraint("questionTypes must be an object".into()))?;
    let mut fixed = 0.0;
    let mut free = 0.0;
    for (k, v) in qt.iter() {
        let x = v
            .as_f64()
            .ok_or_else(|| Error::Constraint(format!("questionTypes.{k} must be a number")))?;
        if pinned.iter().any(|p| p == k) {
            fixed += x;
        } else {
            free += x;
        }
    }
    let remaining = 1.0 - fixed;
    if remaining < -QUESTION_TYPE_SUM_TOLERANCE {
        return Err(Error::Constraint(format!(
            "pinned question types already sum to {fixed}, above 1.0"
        )));
    }
    let unpinned = qt.len() - pinned.iter().filter(|p| qt.contains_key(p.as_str())).count();
    if unpinned == 0 {
        if (fixed - 1.0).abs() > QUESTION_TYPE_SUM_TOLERANCE {
            return Err(Error::Constraint(format!(
                "pinned question types sum to {fixed}, not 1.0"
            )));
        }
        return Ok(());
    }
    let remaining = remaining.max(0.0);
    for (k, v) in qt.iter_mut() {
        if !pinned.iter().any(|p| p == k) {
            let x = v.as_f64().unwrap_or(0.0);
            let scaled = if free > 0.0 {
                x / free * remaining
            } else {
                remaining / unpinned as f64
            };
            *v = Value::from(scaled);
        }
    }
    Ok(())
}

fn pick<'a, R: Rng>(rng: &mut R, items: &'a [&'a str]) -> &'a str {
    items[rng.gen_range(0..items.len())]
}

fn pick_label<T: Copy, R: Rng>(rng: &mut R, items: &[T]) -> T {
    items[rng.gen_range(0..items.len())]
}

fn sample_distinct<R: Rng>(rng: &mut R, items: &[&str], min: usize, max: usize) -> Vec<String> {
    let n = rng.gen_range(min..=max);
    items.choose_multiple(rng, n).map(|s| s.to_string()).collect()
}

fn unit<R: Rng>(rng: &mut R) -> f64 {
    // Two decimals keeps drawn values readable in prompts.
    (rng.gen_range(0.0..=1.0f64) * 100.0).round() / 100.0
}

/// Uniform draw from the probability simplex over four categories.
fn simplex4<R: Rng>(rng: &mut R) -> [f64; 4] {
    let e: Vec<f64> = (0..4).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = e.iter().sum();
    let a = e[0] / total;
    let b = e[1] / total;
    let c = e[2] / total;
    [a, b, c, (1.0 - a - b - c).max(0.0)]
}

fn draw<R: Rng>(rng: &mut R) -> ConversationParameters {
    let user_share = rng.gen_range(1..=99);
    let topic_scope = sample_distinct(rng, TOPICS, 1, 4);

    let fundamentals = Fundamentals {
        purpose: pick_label(rng, Purpose::ALL),
        turns: rng.gen_range(RANDOM_TURNS),
        turn_balance: TurnBalance::new(user_share, 100 - user_share),
        arc: pick_label(rng, Arc::ALL),
        initiator: pick_label(rng, Speaker::ALL),
        topic_scope,
    };

    let participants = Participants {
        knowledge_gap_level: rng.gen_range(1..=5),
        assistant: AssistantSpec {
            identity: pick(rng, ASSISTANT_IDENTITIES).to_string(),
            consistency_level: unit(rng),
        },
        user: UserSpec {
            identity: pick(rng, USER_IDENTITIES).to_string(),
            focus_level: rng.gen_range(1..=5),
            prior_knowledge_level: rng.gen_range(1..=5),
            decision_making_style: pick_label(rng, DecisionMakingStyle::ALL),
            feedback_reception: pick_label(rng, FeedbackReception::ALL),
        },
    };

    let steps = rng.gen_range(2..=6);
    let mut progression: Vec<f64> = (0..steps).map(|_| unit(rng)).collect();
    progression.sort_by(f64::total_cmp);
    let learning_approach = LearningApproach {
        framework: pick_label(rng, Framework::ALL),
        practical_theoretical_balance: unit(rng),
        complexity_progression: progression,
        industry_context: pick(rng, INDUSTRIES).to_string(),
    };

    let journey_len = rng.gen_range(2..=5);
    let emotional_journey = (0..journey_len)
        .map(|_| EmotionPoint::new(pick(rng, EMOTIONS), unit(rng)))
        .collect();
    let conversation_dynamics = ConversationDynamics {
        formality: unit(rng),
        emotional_journey,
        relationship_development: unit(rng),
        disagreement_handling: pick_label(rng, DisagreementHandling::ALL),
        smoothness_factor: pick_label(rng, SmoothnessGrade::ALL),
    };

    let [closed, open, rhetorical, clarifying] = simplex4(rng);
    let linguistic_patterns = LinguisticPatterns {
        technical_language_level: unit(rng),
        question_types: QuestionTypes {
            closed,
            open,
            rhetorical,
            clarifying,
        },
        response_style: ResponseStyle {
            conciseness: unit(rng),
            directness: unit(rng),
            formality: unit(rng),
        },
    };

    let content_attributes = ContentAttributes {
        factual_accuracy: unit(rng),
        example_specificity: unit(rng),
        stakeholder_perspectives: sample_distinct(rng, STAKEHOLDERS, 1, 4),
    };

    ConversationParameters {
        fundamentals,
        participants,
        learning_approach,
        conversation_dynamics,
        linguistic_patterns,
        content_attributes,
    }
}
