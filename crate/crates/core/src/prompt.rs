//! Prompt compilation.
//!
//! A parameterized prompt is assembled in a fixed order: advisory scenario,
//! parameter definitions, the serialized parameter values, then the output
//! format contract. Baseline prompts carry the scenario and output format
//! only. Template text lives in `templates/` and is versioned by
//! [`TEMPLATE_VERSION`], which is folded into every bundle's content hash.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::persona::EntrepreneurProfile;
use crate::schema::{serialize_parameters, ConversationParameters};

/// Bump whenever any template file changes.
pub const TEMPLATE_VERSION: &str = "1";

const SYSTEM: &str = include_str!("../templates/system.txt");
const SCENARIO: &str = include_str!("../templates/scenario.txt");
const PARAMETERIZED: &str = include_str!("../templates/parameterized.txt");
const BASELINE: &str = include_str!("../templates/baseline.txt");
const DEFINITIONS: &str = include_str!("../templates/definitions.txt");
const OUTPUT_FORMAT: &str = include_str!("../templates/output_format.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptMode {
    Parameterized,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub template_version: String,
    pub mode: PromptMode,
    pub system_text: String,
    pub instruction_text: String,
    /// Canonical serialized parameters; `None` for baseline prompts.
    pub parameter_block: Option<String>,
    pub target_turns: u32,
    pub content_hash: String,
}

impl PromptBundle {
    fn seal(
        mode: PromptMode,
        system_text: String,
        instruction_text: String,
        parameter_block: Option<String>,
        target_turns: u32,
    ) -> Self {
        let content_hash = content_hash(
            TEMPLATE_VERSION,
            mode,
            &system_text,
            &instruction_text,
            parameter_block.as_deref(),
            target_turns,
        );
        Self {
            template_version: TEMPLATE_VERSION.to_string(),
            mode,
            system_text,
            instruction_text,
            parameter_block,
            target_turns,
            content_hash,
        }
    }

    /// Recompute the hash from the other fields.
    pub fn verify_hash(&self) -> bool {
        content_hash(
            &self.template_version,
            self.mode,
            &self.system_text,
            &self.instruction_text,
            self.parameter_block.as_deref(),
            self.target_turns,
        ) == self.content_hash
    }
}

fn content_hash(
    version: &str,
    mode: PromptMode,
    system: &str,
    instruction: &str,
    block: Option<&str>,
    turns: u32,
) -> String {
    let mut h = Sha256::new();
    for part in [
        version,
        match mode {
            PromptMode::Parameterized => "parameterized",
            PromptMode::Baseline => "baseline",
        },
        system,
        instruction,
    ] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    match block {
        Some(b) => {
            h.update([1u8]);
            h.update(b.as_bytes());
        }
        None => h.update([2u8]),
    }
    h.update(turns.to_le_bytes());
    hex::encode(h.finalize())
}

/// Substitute `{{name}}` placeholders. Every placeholder must be bound.
pub(crate) fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (key, value) in vars {
        out = out.replace(&format!("{{{{{key}}}}}"), value);
    }
    debug_assert!(!out.contains("{{"), "unbound placeholder in template");
    out
}

/// The parameter definition catalog shown to generators and judges.
pub fn render_parameter_definitions() -> String {
    DEFINITIONS.trim_end().to_string()
}

pub fn output_format_contract() -> &'static str {
    OUTPUT_FORMAT.trim_end()
}

fn scenario(profile: &EntrepreneurProfile, turns: u32) -> String {
    render(
        SCENARIO.trim_end(),
        &[
            ("turns", &turns.to_string()),
            ("industry", &profile.industry),
            ("demographic", &profile.demographic),
            ("idea", &profile.business_idea),
        ],
    )
}

/// Compile a profile and validated parameters into a generation prompt.
pub fn compile_parameterized(profile: &EntrepreneurProfile, params: &ConversationParameters) -> Result<PromptBundle> {
    compile_parameterized_omitting(profile, params, &[])
}

/// Like [`compile_parameterized`] but leaves the given parameter paths out of
/// the parameter block, for ablations that withhold a parameter from the
/// generator.
pub fn compile_parameterized_omitting(
    profile: &EntrepreneurProfile,
    params: &ConversationParameters,
    omit: &[&str],
) -> Result<PromptBundle> {
    let canonical = serialize_parameters(params)?;
    let block = if omit.is_empty() {
        canonical
    } else {
        let mut value: Value = serde_json::from_str(&canonical)?;
        for path in omit {
            remove_path(&mut value, path)?;
        }
        serde_json::to_string_pretty(&value)?
    };
    let turns = u32::try_from(params.fundamentals.turns).map_err(|_| Error::Input("turn count out of range".into()))?;
    let instruction = render(
        PARAMETERIZED.trim_end(),
        &[
            ("scenario", &scenario(profile, turns)),
            ("industry", &profile.industry),
            ("demographic", &profile.demographic),
            ("idea", &profile.business_idea),
            ("experience", &profile.prior_experience),
            ("definitions", &render_parameter_definitions()),
            ("parameter_block", &block),
            ("output_format", output_format_contract()),
        ],
    );
    Ok(PromptBundle::seal(
        PromptMode::Parameterized,
        SYSTEM.trim_end().to_string(),
        instruction,
        Some(block),
        turns,
    ))
}

fn remove_path(doc: &mut Value, path: &str) -> Result<()> {
    let (parent, leaf) = match path.rsplit_once('.') {
        Some((p, l)) => (format!("/conversationParameters/{}", p.replace('.', "/")), l),
        None => ("/conversationParameters".to_string(), path),
    };
    doc.pointer_mut(&parent)
        .and_then(Value::as_object_mut)
        .and_then(|m| m.shift_remove(leaf))
        .map(|_| ())
        .ok_or_else(|| Error::Input(format!("cannot omit unknown parameter `{path}`")))
}

/// Compile the unparameterized baseline prompt.
pub fn compile_baseline(profile: &EntrepreneurProfile, turns: u32) -> Result<PromptBundle> {
    if turns == 0 {
        return Err(Error::Input("baseline prompt needs at least one turn".into()));
    }
    let instruction = render(
        BASELINE.trim_end(),
        &[
            ("scenario", &scenario(profile, turns)),
            ("experience", &profile.prior_experience),
            ("output_format", output_format_contract()),
        ],
    );
    Ok(PromptBundle::seal(
        PromptMode::Baseline,
        SYSTEM.trim_end().to_string(),
        instruction,
        None,
        turns,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persona::{baseline_profile, generate_profiles};
    use crate::schema::{fixtures::example, PARAMETER_PATHS};

    fn profile() -> EntrepreneurProfile {
        EntrepreneurProfile {
            id: "ent-test".into(),
            demographic: "35-44 year-old woman from a college town".into(),
            industry: "food and beverage".into(),
            business_idea: "a vegan bakery".into(),
            prior_experience: "no prior business ownership experience".into(),
        }
    }

    #[test]
    fn parameterized_bundle_embeds_values_and_definitions() {
        let bundle = compile_parameterized(&profile(), &example()).unwrap();
        let block = bundle.parameter_block.as_deref().unwrap();
        assert!(block.contains("\"knowledgeGapLevel\": 3"));
        assert_eq!(bundle.target_turns, 12);
        assert_eq!(bundle.mode, PromptMode::Parameterized);
        let text = &bundle.instruction_text;
        assert!(text.starts_with("Create a 12-turn conversation"));
        assert!(text.contains("Laser-focused on specific details of implementation"));
        assert!(text.contains(block));
        assert!(text.contains("\"totalTurns\": n"));
        // Fixed component order.
        let scenario = text.find("Small Business Development Corporation").unwrap();
        let defs = text.find("Implementation Guidelines").unwrap();
        let values = text.find(block).unwrap();
        let contract = text.find("Generated conversations should follow").unwrap();
        assert!(scenario < defs && defs < values && values < contract);
        assert!(bundle.verify_hash());
    }

    #[test]
    fn every_parameter_appears_once_in_the_block() {
        let bundle = compile_parameterized(&profile(), &example()).unwrap();
        let block = bundle.parameter_block.unwrap();
        let value: Value = serde_json::from_str(&block).unwrap();
        for path in PARAMETER_PATHS {
            let pointer = format!("/conversationParameters/{}", path.replace('.', "/"));
            assert!(value.pointer(&pointer).is_some(), "{path}");
            let leaf = path.rsplit('.').next().unwrap();
            let expected = PARAMETER_PATHS
                .iter()
                .filter(|p| p.rsplit('.').next() == Some(leaf))
                .count();
            assert_eq!(block.matches(&format!("\"{leaf}\":")).count(), expected, "{leaf}");
        }
    }

    #[test]
    fn compilation_is_deterministic() {
        let a = compile_parameterized(&profile(), &example()).unwrap();
        let b = compile_parameterized(&profile(), &example()).unwrap();
        assert_eq!(a.content_hash, b.content_hash);
        let mut other = example();
        other.fundamentals.turns = 13;
        let c = compile_parameterized(&profile(), &other).unwrap();
        assert_ne!(a.content_hash, c.content_hash);
    }

    #[test]
    fn invalid_parameters_are_refused() {
        let mut p = example();
        p.participants.knowledge_gap_level = 7;
        assert!(matches!(
            compile_parameterized(&profile(), &p),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn omitted_parameters_leave_the_block() {
        let b = compile_parameterized_omitting(&profile(), &example(), &["conversationDynamics.formality"]).unwrap();
        let block = b.parameter_block.unwrap();
        let value: Value = serde_json::from_str(&block).unwrap();
        assert!(value
            .pointer("/conversationParameters/conversationDynamics/formality")
            .is_none());
        assert!(value
            .pointer("/conversationParameters/linguisticPatterns/responseStyle/formality")
            .is_some());
        assert!(compile_parameterized_omitting(&profile(), &example(), &["nope.x"]).is_err());
    }

    #[test]
    fn baseline_uses_the_raw_prompt_only() {
        let b = compile_baseline(&profile(), 10).unwrap();
        assert!(b
            .instruction_text
            .starts_with("Create a 10-turn conversation between an AI adviser and an entrepreneur trying to work on food and beverage."));
        assert!(b.instruction_text.contains("with a focus on a vegan bakery."));
        assert!(b.parameter_block.is_none());
        assert!(!b.instruction_text.contains("Knowledge Gap Level"));
        assert!(!b.instruction_text.contains("Implementation Guidelines"));
        assert_eq!(b.mode, PromptMode::Baseline);

        let one = compile_baseline(&profile(), 1).unwrap();
        assert!(one.instruction_text.starts_with("Create a 1-turn conversation"));
        assert_eq!(one.target_turns, 1);
        assert!(compile_baseline(&profile(), 0).is_err());

        let again = compile_baseline(&profile(), 10).unwrap();
        assert_eq!(b.content_hash, again.content_hash);
    }

    #[test]
    fn definitions_are_stable_and_complete() {
        let a = render_parameter_definitions();
        assert_eq!(a, render_parameter_definitions());
        assert!(a.contains("Complete novice with minimal business knowledge"));
        assert!(a.contains("Laser-focused on specific details of implementation"));
        assert!(a.contains("F: Highly disjointed conversation with random topic jumping"));
        for grade in ["A:", "B:", "C:", "D:", "E:", "F:"] {
            assert!(a.contains(&format!("  - {grade}")));
        }
    }

    #[test]
    fn works_with_generated_profiles() {
        let p = &generate_profiles(3, 1, &["retail".into()]).unwrap()[0];
        let bundle = compile_parameterized(p, &example()).unwrap();
        assert!(bundle.instruction_text.contains(&p.business_idea));
        let base = compile_baseline(&baseline_profile(3), 5).unwrap();
        assert!(base.verify_hash());
    }
}
