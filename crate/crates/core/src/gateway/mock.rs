//! Offline provider.
//!
//! Generation requests are answered with a synthetic conversation in the
//! requested output format. The synthesis reads the prompt the same way a
//! model would: turn count and business topic from the scenario, parameter
//! values from the fenced parameter block. Smoothness drives off-topic turns,
//! formality and technical level pick the register of user turns, the
//! knowledge gap level sets how often earlier concepts are revisited, and
//! trait parameters leave recognizable phrases. Judge requests are answered
//! by looking for those phrases in the transcript, with seeded noise.
//!
//! Everything is a pure function of the request key and text.

use std::fs;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::provider::{ChatProvider, ChatRequest, Purpose};
use crate::error::Result;
use crate::schema::{DecisionMakingStyle, FeedbackReception, SmoothnessGrade};

pub struct MockProvider {
    fixtures_dir: Option<PathBuf>,
}

impl MockProvider {
    pub fn new(fixtures_dir: Option<PathBuf>) -> Self {
        Self { fixtures_dir }
    }
}

impl ChatProvider for MockProvider {
    fn complete(&self, request: &ChatRequest) -> Result<String> {
        if let Some(dir) = &self.fixtures_dir {
            if let Ok(text) = fs::read_to_string(dir.join(format!("{}.txt", request.key))) {
                return Ok(text);
            }
        }
        let mut rng = rng_for(&request.key);
        Ok(match request.purpose {
            Purpose::Generate => generate(&request.user, &mut rng),
            Purpose::Judge => judge(&request.user, &mut rng),
        })
    }
}

fn rng_for(key: &str) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(Sha256::digest(format!("mock\0{key}").as_bytes()).into())
}

const KGL_MARKERS: [&str; 5] = [
    "I have run several businesses in this space",
    "I have solid experience, though a few areas are new to me",
    "I know the basics of running a business",
    "I only have a basic understanding and need guidance",
    "I am completely new to business",
];
const FOCUS_MARKERS: [&str; 5] = [
    "I would like to talk about a bit of everything",
    "Mostly I want the big picture, maybe with a deep dive or two",
    "Let's keep a balance between the core plan and side questions",
    "I want to stay on the core issues",
    "I want to nail down the exact implementation details",
];
const PRIOR_MARKERS: [&str; 5] = [
    "I have never worked in this field",
    "I have read a little about this field",
    "I have worked around this field for a while",
    "I spent many years working in this field",
    "I am an expert in this field",
];
const DMS_MARKERS: [(&str, DecisionMakingStyle); 5] = [
    ("Can we look at the numbers first?", DecisionMakingStyle::Analytical),
    ("My gut tells me this will work.", DecisionMakingStyle::Intuitive),
    (
        "I want to hear a few perspectives before I decide.",
        DecisionMakingStyle::Consultative,
    ),
    ("I am worried about the downside here.", DecisionMakingStyle::RiskAverse),
    ("Let's just go for it.", DecisionMakingStyle::Impulsive),
];
const FR_MARKERS: [(&str, FeedbackReception); 4] = [
    (
        "That is great advice, I will do exactly that.",
        FeedbackReception::Receptive,
    ),
    (
        "That seems reasonable, let me think it over.",
        FeedbackReception::Balanced,
    ),
    ("I am not convinced that is right.", FeedbackReception::Skeptical),
    ("I don't think that will work for me.", FeedbackReception::Resistant),
];
const OFF_TOPIC_MARKER: &str = "Completely unrelated, but";

const CONCEPTS: [&str; 24] = [
    "business plan",
    "cash flow",
    "SBA loan",
    "target market",
    "pricing strategy",
    "marketing plan",
    "break-even point",
    "profit margin",
    "supply chain",
    "customer acquisition",
    "lease agreement",
    "business license",
    "startup cost",
    "working capital",
    "social media",
    "sales forecast",
    "insurance policy",
    "employee handbook",
    "vendor contract",
    "brand identity",
    "market research",
    "payroll system",
    "tax filing",
    "customer retention",
];
const JARGON: [&str; 8] = [
    "EBITDA",
    "CAC",
    "LTV",
    "unit economics",
    "gross margin",
    "burn rate",
    "runway",
    "KPI",
];
const OFF_TOPICS: [&str; 12] = [
    "learning to play the guitar",
    "a trip to Japan next spring",
    "which phone to buy",
    "my neighbour's new puppy",
    "the best way to brew coffee",
    "a documentary about whales",
    "training for a marathon",
    "redecorating my kitchen",
    "a novel I just finished",
    "the weather lately",
    "repairing an old bicycle",
    "a chess tournament",
];

struct Plan {
    turns: usize,
    industry: String,
    idea: String,
    formality: f64,
    technical: f64,
    smoothness: usize,
    kgl: usize,
    focus: usize,
    prior: usize,
    dms: Option<usize>,
    fr: Option<usize>,
    initiator_user: bool,
    emotions: Vec<String>,
    complexity: Vec<f64>,
    user_identity: String,
    assistant_identity: String,
    arc: String,
}

fn capture(re: &str, text: &str) -> Option<String> {
    Regex::new(re).ok()?.captures(text).map(|c| c[1].trim().to_string())
}

fn read_plan(prompt: &str, rng: &mut ChaCha8Rng) -> Plan {
    let turns = capture(r"Create a (\d+)-turn", prompt)
        .and_then(|s| s.parse().ok())
        .unwrap_or(10usize)
        .max(1);
    let industry = capture(r"trying to work on ([^.\n]+)\.", prompt).unwrap_or_else(|| "a small business".into());
    let idea = capture(r"with a focus on ([^\n]+?)\.\s*(?:\n|$)", prompt).unwrap_or_else(|| industry.clone());
    let block: Option<Value> =
        capture(r"(?s)```json\s*\n(.*?)\n```", prompt).and_then(|b| serde_json::from_str(&b).ok());
    let p = |ptr: &str| {
        block
            .as_ref()
            .and_then(|b| b.pointer(&format!("/conversationParameters{ptr}")).cloned())
    };
    let num = |ptr: &str| p(ptr).and_then(|v| v.as_f64());
    let text = |ptr: &str| p(ptr).and_then(|v| v.as_str().map(str::to_string));
    let level = |ptr: &str, rng: &mut ChaCha8Rng| {
        num(ptr).map_or_else(|| rng.gen_range(1..=5), |x| x.round().clamp(1.0, 5.0) as usize)
    };
    let baseline = block.is_none();
    let smoothness = match text("/conversationDynamics/smoothnessFactor") {
        Some(g) => g.parse::<SmoothnessGrade>().map_or(0, |g| g as usize),
        // Without a smoothness instruction the conversation wanders a little.
        None if baseline => rng.gen_range(1..=3),
        None => 0,
    };
    let dms = text("/participants/user/decisionMakingStyle")
        .and_then(|s| s.parse::<DecisionMakingStyle>().ok())
        .and_then(|d| DMS_MARKERS.iter().position(|(_, x)| *x == d));
    let fr = text("/participants/user/feedbackReception")
        .and_then(|s| s.parse::<FeedbackReception>().ok())
        .and_then(|d| FR_MARKERS.iter().position(|(_, x)| *x == d));
    let emotions = p("/conversationDynamics/emotionalJourney")
        .and_then(|v| v.as_array().cloned())
        .unwrap_or_default()
        .iter()
        .filter_map(|e| e.as_object().and_then(|m| m.keys().next().cloned()))
        .collect();
    let complexity = p("/learningApproach/complexityProgression")
        .and_then(|v| v.as_array().cloned())
        .unwrap_or_default()
        .iter()
        .filter_map(Value::as_f64)
        .collect();
    Plan {
        turns,
        industry,
        idea,
        formality: num("/conversationDynamics/formality").unwrap_or_else(|| rng.gen_range(0.3..0.7)),
        technical: num("/linguisticPatterns/technicalLanguageLevel").unwrap_or_else(|| rng.gen_range(0.2..0.6)),
        smoothness,
        kgl: level("/participants/knowledgeGapLevel", rng),
        focus: level("/participants/user/focusLevel", rng),
        prior: level("/participants/user/priorKnowledgeLevel", rng),
        dms,
        fr,
        initiator_user: text("/fundamentals/initiator").as_deref() != Some("assistant"),
        emotions,
        complexity,
        user_identity: text("/participants/user/identity").unwrap_or_else(|| "entrepreneur".into()),
        assistant_identity: text("/participants/assistant/identity").unwrap_or_else(|| "small business adviser".into()),
        arc: text("/fundamentals/arc").unwrap_or_else(|| "question-answer".into()),
    }
}

fn user_line(plan: &Plan, concept: &str, rng: &mut ChaCha8Rng) -> String {
    let idea = &plan.idea;
    let mut s = if rng.gen_bool(plan.formality.clamp(0.0, 1.0)) {
        let formal = [
            format!("Regarding {idea}, what considerations should determine the {concept}?"),
            format!("Could you elaborate on the appropriate {concept} for {idea}?"),
            format!("Additionally, what documentation would substantiate the {concept} within this enterprise?"),
            format!("Subsequently, how should the {concept} be evaluated for {idea}?"),
        ];
        formal.choose(rng).unwrap().clone()
    } else {
        let casual = [
            format!("ok so what do u think about the {concept} for {idea}?"),
            format!("hey, i'm kinda lost on the {concept}. can you help me?"),
            format!("yeah but how do i even do the {concept}? we're small lol"),
            format!("cool. what's my {concept} gonna look like?"),
        ];
        casual.choose(rng).unwrap().clone()
    };
    if rng.gen_bool(plan.technical.clamp(0.0, 1.0)) {
        let j1 = JARGON.choose(rng).unwrap();
        let j2 = JARGON.choose(rng).unwrap();
        s.push_str(&format!(
            " Specifically, how does that affect {j1} and {j2} across the operational amortization schedule?"
        ));
    } else {
        s.push_str(" Will that help us make money?");
    }
    s
}

fn assistant_line(plan: &Plan, concept: &str, rng: &mut ChaCha8Rng) -> String {
    let idea = &plan.idea;
    let opener = [
        format!("Good question about the {concept}."),
        format!("Let's look at the {concept} together."),
        format!("The {concept} matters a lot for {idea}."),
    ];
    let body = if plan.kgl >= 4 {
        format!(
            "In simple terms, the {concept} is one of the first things to sort out, so we will take it step by step."
        )
    } else {
        format!(
            "Given your background, benchmark the {concept} against comparable firms in {} and adjust.",
            plan.industry
        )
    };
    format!("{} {body}", opener.choose(rng).unwrap())
}

fn generate(prompt: &str, rng: &mut ChaCha8Rng) -> String {
    let plan = read_plan(prompt, rng);
    // Experts (low gap) circle back to earlier concepts more often.
    let revisit_p = (6 - plan.kgl.clamp(1, 5)) as f64 / 6.0;
    let off_topic_p = plan.smoothness as f64 / 5.0 * 0.9;
    let mut fresh: Vec<&str> = CONCEPTS.to_vec();
    fresh.shuffle(rng);
    let mut seen: Vec<&str> = Vec::new();
    let mut turns = Vec::with_capacity(plan.turns);
    let mut current = fresh.pop().unwrap_or("business plan");
    let mut user_count = 0usize;
    for i in 0..plan.turns {
        let is_user = (i % 2 == 0) == plan.initiator_user;
        let content = if is_user {
            user_count += 1;
            if user_count > 1 {
                current = if !seen.is_empty() && rng.gen_bool(revisit_p) {
                    seen.choose(rng).copied().unwrap()
                } else {
                    fresh.pop().unwrap_or_else(|| CONCEPTS.choose(rng).unwrap())
                };
            }
            let mut text = if user_count > 1 && rng.gen_bool(off_topic_p) {
                format!(
                    "{OFF_TOPIC_MARKER} what do you think about {}?",
                    OFF_TOPICS.choose(rng).unwrap()
                )
            } else {
                user_line(&plan, current, rng)
            };
            if user_count == 1 {
                text = format!(
                    "I'm working on {} in {}. {}. {}. {}. {text}",
                    plan.idea,
                    plan.industry,
                    KGL_MARKERS[plan.kgl - 1],
                    FOCUS_MARKERS[plan.focus - 1],
                    PRIOR_MARKERS[plan.prior - 1]
                );
            }
            if let Some(d) = plan.dms.filter(|_| user_count.is_multiple_of(2) || plan.turns < 4) {
                text.push(' ');
                text.push_str(DMS_MARKERS[d].0);
            }
            if let Some(f) = plan.fr.filter(|_| user_count % 3 == 2 || plan.turns < 6) {
                text.push(' ');
                text.push_str(FR_MARKERS[f].0);
            }
            if !seen.contains(&current) {
                seen.push(current);
            }
            text
        } else {
            assistant_line(&plan, current, rng)
        };
        let mut turn = json!({
            "turn": i + 1,
            "speaker": if is_user { "user" } else { "assistant" },
            "content": content,
        });
        if !plan.emotions.is_empty() {
            let k = i * plan.emotions.len() / plan.turns;
            turn["emotionalState"] = json!(plan.emotions[k]);
        }
        if !plan.complexity.is_empty() {
            let k = i * plan.complexity.len() / plan.turns;
            turn["complexityLevel"] = json!(plan.complexity[k]);
        }
        turns.push(turn);
    }
    let doc = json!({
        "metadata": {
            "participantRoles": {"user": plan.user_identity, "assistant": plan.assistant_identity},
            "conversationArc": plan.arc,
            "totalTurns": plan.turns,
        },
        "conversation": turns,
        "analysis": {
            "parameterAdherence": {},
            "learningObjectivesMet": [],
            "stakeholderPerspectivesCovered": [],
        },
    });
    serde_json::to_string_pretty(&doc).expect("json")
}

fn noisy_level(found: Option<usize>, rng: &mut ChaCha8Rng) -> usize {
    let base = found.unwrap_or_else(|| rng.gen_range(1..=5));
    if rng.gen_bool(0.75) {
        base
    } else if rng.gen_bool(0.5) {
        (base + 1).min(5)
    } else {
        base.saturating_sub(1).max(1)
    }
}

fn judge(prompt: &str, rng: &mut ChaCha8Rng) -> String {
    let user_text: Vec<&str> = prompt
        .lines()
        .filter_map(|l| l.split_once("(user): ").map(|(_, c)| c))
        .collect();
    let all = user_text.join("\n");
    let find = |markers: &[&str]| markers.iter().position(|m| all.contains(m)).map(|i| i + 1);
    let kgl = noisy_level(find(&KGL_MARKERS), rng);
    let focus = noisy_level(find(&FOCUS_MARKERS), rng);
    let prior = noisy_level(find(&PRIOR_MARKERS), rng);
    let dms = DMS_MARKERS
        .iter()
        .find(|(m, _)| all.contains(m))
        .map(|(_, d)| *d)
        .filter(|_| rng.gen_bool(0.8))
        .unwrap_or_else(|| *DecisionMakingStyle::ALL.choose(rng).unwrap());
    let fr = FR_MARKERS
        .iter()
        .find(|(m, _)| all.contains(m))
        .map(|(_, f)| *f)
        .filter(|_| rng.gen_bool(0.8))
        .unwrap_or_else(|| *FeedbackReception::ALL.choose(rng).unwrap());
    let later = user_text.len().saturating_sub(1).max(1) as f64;
    let off = user_text.iter().filter(|t| t.contains(OFF_TOPIC_MARKER)).count() as f64;
    let grade = ((off / later / 0.9) * 5.0).round().clamp(0.0, 5.0) as usize;
    let grade = SmoothnessGrade::ALL[grade.min(SmoothnessGrade::ALL.len() - 1)];
    let answer = json!({
        "knowledgeGapLevel": kgl,
        "focusLevel": focus,
        "priorKnowledgeLevel": prior,
        "decisionMakingStyle": dms.as_str(),
        "feedbackReception": fr.as_str(),
        "smoothnessFactor": grade.as_str(),
    });
    format!("```json\n{}\n```", serde_json::to_string_pretty(&answer).expect("json"))
}
