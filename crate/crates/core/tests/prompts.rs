mod common;

use std::sync::Arc;

use convsim::gateway::{judge_request, Gateway, ProviderConfig};
use convsim::prompt::{render_parameter_definitions, PromptMode};

use common::*;

#[test]
fn compiled_prompts_match_snapshots() {
    check_goldens().unwrap();
}

#[test]
fn compilation_is_stable() {
    assert_eq!(parameterized_bundle(), parameterized_bundle());
    assert_eq!(baseline_bundle(), baseline_bundle());
    assert!(parameterized_bundle().verify_hash());
    assert_ne!(parameterized_bundle().content_hash, baseline_bundle().content_hash);
}

#[test]
fn baseline_is_the_raw_prompt() {
    let b = baseline_bundle();
    assert_eq!(b.mode, PromptMode::Baseline);
    assert!(b.parameter_block.is_none());
    assert!(b
        .instruction_text
        .contains("-turn conversation between an AI adviser and an entrepreneur"));
    assert!(b
        .instruction_text
        .contains("informed business coach in a Small Business Development Corporation"));
    let defs = render_parameter_definitions();
    for line in defs.lines().filter(|l| l.len() > 20) {
        assert!(!b.instruction_text.contains(line), "definition leaked: {line}");
    }
    assert!(!b.instruction_text.contains("knowledgeGapLevel"));
}

#[test]
fn parameterized_prompt_carries_block_and_definitions() {
    let b = parameterized_bundle();
    let block = b.parameter_block.as_deref().unwrap();
    assert!(b.instruction_text.contains(block));
    assert!(b.instruction_text.contains(&render_parameter_definitions()));
    assert!(b.instruction_text.contains(&profile().business_idea));
}

#[test]
fn judge_never_sees_the_configured_values() {
    let tmp = tempfile::tempdir().unwrap();
    let gw = Arc::new(Gateway::new(Some(tmp.path().to_path_buf())));
    let bundle = parameterized_bundle();
    let t = gw
        .generate_conversation(&bundle, &ProviderConfig::mock(), Some(1))
        .unwrap();
    let req = judge_request(&t);
    // the definition catalog is shared with the generator and carries its own examples
    let text = format!("{}\n{}", req.system, req.user).replace(&render_parameter_definitions(), "");
    let block = bundle.parameter_block.unwrap();
    assert!(!text.contains(&block));
    for pair in key_value_pairs(&block) {
        assert!(!text.contains(&pair), "judge prompt contains {pair}");
    }
    // provenance and metadata stay out of the judge prompt too
    assert!(!text.contains(&bundle.content_hash));
    assert!(!text.contains("totalTurns"));
}
