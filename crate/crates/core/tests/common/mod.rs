#![allow(dead_code)]

use std::fs;
use std::path::PathBuf;

use convsim::gateway::{judge_request, parse_output, Transcript};
use convsim::persona::{baseline_profile, generate_profiles, EntrepreneurProfile, Facets};
use convsim::prompt::{compile_baseline, compile_parameterized, PromptBundle};
use convsim::schema::{parse_parameters, ConversationParameters};

/// Set to regenerate the files under tests/golden.
pub const UPDATE_ENV: &str = "CONVSIM_UPDATE_GOLDEN";

pub fn fixture(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name);
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn example_params() -> ConversationParameters {
    parse_parameters(&fixture("params.json")).unwrap()
}

pub fn example_transcript() -> Transcript {
    parse_output(&fixture("transcript.json")).unwrap()
}

pub fn profile() -> EntrepreneurProfile {
    generate_profiles(7, 1, &Facets::default().industries)
        .unwrap()
        .remove(0)
}

pub fn parameterized_bundle() -> PromptBundle {
    compile_parameterized(&profile(), &example_params()).unwrap()
}

pub fn baseline_bundle() -> PromptBundle {
    compile_baseline(&baseline_profile(7), 10).unwrap()
}

pub fn render_bundle(b: &PromptBundle) -> String {
    format!("{}\n\n{}\n", b.system_text, b.instruction_text)
}

pub fn render_judge(t: &Transcript) -> String {
    let req = judge_request(t);
    format!("{}\n\n{}\n", req.system, req.user)
}

/// The rendered prompts and their snapshot names.
pub fn golden_prompts() -> Vec<(&'static str, String)> {
    vec![
        ("parameterized.txt", render_bundle(&parameterized_bundle())),
        ("baseline.txt", render_bundle(&baseline_bundle())),
        ("judge.txt", render_judge(&example_transcript())),
    ]
}

/// Compare against the snapshot, or rewrite it when `UPDATE_ENV` is set.
/// Returns the name of the first mismatching snapshot, if any.
pub fn check_goldens() -> Result<(), String> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let update = std::env::var_os(UPDATE_ENV).is_some();
    for (name, text) in golden_prompts() {
        let path = dir.join(name);
        if update {
            fs::create_dir_all(&dir).unwrap();
            fs::write(&path, &text).unwrap();
            continue;
        }
        let want = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        if want != text {
            return Err(format!(
                "{name} differs from its snapshot; rerun with {UPDATE_ENV}=1 to accept"
            ));
        }
    }
    Ok(())
}

/// Scalar `"key": value` pairs of a pretty-printed JSON document, in both
/// pretty and compact spellings.
pub fn key_value_pairs(json: &str) -> Vec<String> {
    let value: serde_json::Value = serde_json::from_str(json).unwrap();
    let mut out = Vec::new();
    fn walk(v: &serde_json::Value, out: &mut Vec<String>) {
        match v {
            serde_json::Value::Object(m) => {
                for (k, v) in m {
                    if !v.is_object() {
                        let s = v.to_string();
                        out.push(format!("\"{k}\": {s}"));
                        out.push(format!("\"{k}\":{s}"));
                    }
                    walk(v, out);
                }
            }
            serde_json::Value::Array(a) => a.iter().for_each(|x| walk(x, out)),
            _ => {}
        }
    }
    walk(&value, &mut out);
    out
}
