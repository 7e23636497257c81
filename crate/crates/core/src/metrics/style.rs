//! Formality and technical-level scorers and the stability score.
//!
//! Each scorer is an equal-weight mean of three sub-scores. Every sub-score
//! is a ratio feature mapped linearly onto [0, 1] between calibration bounds
//! and clamped. The bounds and word lists ship in `data/scoring.json`.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::text::{canonical_phrase, match_phrases, sentences, syllables, Token};
use crate::error::{Error, Result};
use crate::gateway::Transcript;
use crate::schema::ConversationParameters;

const DEFAULT_SCORING: &str = include_str!("../../data/scoring.json");

/// Linear calibration range `[low, high]`.
pub type Bounds = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormalityBounds {
    pub word_length: Bounds,
    pub type_token_ratio: Bounds,
    pub sentence_length: Bounds,
    pub pronoun_rate: Bounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechnicalBounds {
    pub term_density: Bounds,
    pub grade_level: Bounds,
    pub jargon_per_sentence: Bounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoringConfig {
    pub formality: FormalityBounds,
    pub technical: TechnicalBounds,
    /// First- and second-person pronouns.
    pub pronouns: Vec<String>,
    /// Domain terminology, matched as lemmatized phrases.
    pub domain_terms: Vec<String>,
    pub jargon: Vec<String>,
    /// Words never treated as entity starts.
    pub stopwords: Vec<String>,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_SCORING).expect("bundled scoring config is valid")
    }
}

impl ScoringConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        let f = &self.formality;
        let t = &self.technical;
        for (name, b) in [
            ("word_length", f.word_length),
            ("type_token_ratio", f.type_token_ratio),
            ("sentence_length", f.sentence_length),
            ("pronoun_rate", f.pronoun_rate),
            ("term_density", t.term_density),
            ("grade_level", t.grade_level),
            ("jargon_per_sentence", t.jargon_per_sentence),
        ] {
            if !(b[0].is_finite() && b[1].is_finite() && b[0] < b[1]) {
                return Err(Error::Config(format!("bounds `{name}` must satisfy low < high")));
            }
        }
        Ok(())
    }

    fn lexicon(list: &[String]) -> Vec<Vec<String>> {
        list.iter()
            .map(|p| canonical_phrase(p))
            .filter(|p| !p.is_empty())
            .collect()
    }
}

/// `(x - low) / (high - low)`, clamped to [0, 1].
pub fn normalize(x: f64, bounds: Bounds) -> f64 {
    ((x - bounds[0]) / (bounds[1] - bounds[0])).clamp(0.0, 1.0)
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormalityParts {
    pub vocabulary: f64,
    pub structure: f64,
    pub pronouns: f64,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TechnicalParts {
    pub terminology: f64,
    pub complexity: f64,
    pub jargon: f64,
    pub score: f64,
}

fn parse(text: &str) -> Result<(Vec<Vec<Token>>, usize)> {
    let sents = sentences(text);
    let n: usize = sents.iter().map(Vec::len).sum();
    if n == 0 {
        return Err(Error::Input("text has no words to score".into()));
    }
    Ok((sents, n))
}

pub fn formality_parts(text: &str, cfg: &ScoringConfig) -> Result<FormalityParts> {
    let (sents, n) = parse(text)?;
    let b = &cfg.formality;
    let all = || sents.iter().flatten();
    let word_len = mean(all().map(|t| t.lower.chars().count() as f64));
    let ttr = mean(sents.iter().map(|s| {
        let types: HashSet<&str> = s.iter().map(|t| t.lower.as_str()).collect();
        types.len() as f64 / s.len() as f64
    }));
    let vocabulary = 0.5 * (normalize(word_len, b.word_length) + normalize(ttr, b.type_token_ratio));
    let structure = normalize(n as f64 / sents.len() as f64, b.sentence_length);
    let pronouns: HashSet<&str> = cfg.pronouns.iter().map(String::as_str).collect();
    let rate = all().filter(|t| pronouns.contains(t.lower.as_str())).count() as f64 / n as f64;
    let pronoun_score = 1.0 - normalize(rate, b.pronoun_rate);
    Ok(FormalityParts {
        vocabulary,
        structure,
        pronouns: pronoun_score,
        score: (vocabulary + structure + pronoun_score) / 3.0,
    })
}

/// Register formality in [0, 1].
pub fn formality_score(text: &str, cfg: &ScoringConfig) -> Result<f64> {
    Ok(formality_parts(text, cfg)?.score)
}

pub fn technical_parts(text: &str, cfg: &ScoringConfig) -> Result<TechnicalParts> {
    let terms = ScoringConfig::lexicon(&cfg.domain_terms);
    let jargon = ScoringConfig::lexicon(&cfg.jargon);
    if terms.is_empty() || jargon.is_empty() {
        return Err(Error::Input("technical scoring needs non-empty lexicons".into()));
    }
    let (sents, n) = parse(text)?;
    let b = &cfg.technical;
    let term_hits: usize = sents.iter().map(|s| match_phrases(s, &terms).len()).sum();
    let jargon_hits: usize = sents.iter().map(|s| match_phrases(s, &jargon).len()).sum();
    let syl: usize = sents.iter().flatten().map(|t| syllables(&t.lower)).sum();
    let words_per_sentence = n as f64 / sents.len() as f64;
    let grade = 0.39 * words_per_sentence + 11.8 * (syl as f64 / n as f64) - 15.59;
    let terminology = normalize(term_hits as f64 / n as f64, b.term_density);
    let complexity = normalize(grade, b.grade_level);
    let jargon_score = normalize(jargon_hits as f64 / sents.len() as f64, b.jargon_per_sentence);
    Ok(TechnicalParts {
        terminology,
        complexity,
        jargon: jargon_score,
        score: (terminology + complexity + jargon_score) / 3.0,
    })
}

/// Technical level in [0, 1].
pub fn technical_score(text: &str, cfg: &ScoringConfig) -> Result<f64> {
    Ok(technical_parts(text, cfg)?.score)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityScore {
    pub formality_error: f64,
    pub technical_error: f64,
    pub stability: f64,
    pub measured_formality: f64,
    pub measured_technical: f64,
}

/// `1 - 0.5 (eF + eT)`.
pub fn stability_from_errors(formality_error: f64, technical_error: f64) -> f64 {
    1.0 - 0.5 * (formality_error + technical_error)
}

/// Score each user turn, average per dimension, and compare against the
/// configured formality and technical-language targets.
pub fn stability_score(
    transcript: &Transcript,
    params: &ConversationParameters,
    cfg: &ScoringConfig,
) -> Result<StabilityScore> {
    let user: Vec<&str> = transcript.user_turns().map(|t| t.content.as_str()).collect();
    if user.is_empty() {
        return Err(Error::Input("transcript has no user turns".into()));
    }
    let formality = user
        .iter()
        .map(|t| formality_score(t, cfg))
        .collect::<Result<Vec<_>>>()?;
    let technical = user
        .iter()
        .map(|t| technical_score(t, cfg))
        .collect::<Result<Vec<_>>>()?;
    let measured_formality = mean(formality);
    let measured_technical = mean(technical);
    let formality_error = (measured_formality - params.conversation_dynamics.formality).abs();
    let technical_error = (measured_technical - params.linguistic_patterns.technical_language_level).abs();
    Ok(StabilityScore {
        formality_error,
        technical_error,
        stability: stability_from_errors(formality_error, technical_error),
        measured_formality,
        measured_technical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> ScoringConfig {
        ScoringConfig::default()
    }

    #[test]
    fn bundled_config_is_valid() {
        cfg().check().unwrap();
    }

    #[test]
    fn casual_text_scores_low() {
        // Words hey/u/there: mean length 3 -> 0; TTR 1 -> 1; vocabulary 0.5.
        // Three-word sentence -> 0. Pronoun rate 1/3 >= 0.15 -> 0.
        let p = formality_parts("hey u there?", &cfg()).unwrap();
        assert!((p.vocabulary - 0.5).abs() < 1e-12);
        assert_eq!(p.structure, 0.0);
        assert_eq!(p.pronouns, 0.0);
        assert!((p.score - 0.5 / 3.0).abs() < 1e-12);
        assert!(p.score < 0.3);
    }

    #[test]
    fn formal_register_saturates() {
        let text = "Organizational considerations regarding regulatory compliance \
            necessitate comprehensive documentation, rigorous procedural verification, \
            systematic financial reconciliation, independent auditing, quarterly \
            performance benchmarking, consolidated operational reporting, detailed \
            contractual stipulations, thorough environmental assessments, extensive \
            stakeholder consultation, transparent governance structures, prudent \
            capital allocation, and meticulous inventory management.";
        let p = formality_parts(text, &cfg()).unwrap();
        assert_eq!(p.score, 1.0, "{p:?}");
    }

    #[test]
    fn technical_zero_and_saturated() {
        assert_eq!(
            technical_score("I am not sure. It is hot. We go now.", &cfg()).unwrap(),
            0.0
        );
        let heavy = "EBITDA runway analysis quantifies amortization depreciation capitalization \
            revenue. Churn undermines profitability differentiation.";
        let p = technical_parts(heavy, &cfg()).unwrap();
        assert_eq!(p.score, 1.0, "{p:?}");
    }

    #[test]
    fn technical_hand_computed_fixture() {
        // One sentence, 10 words, 11 syllables:
        // our(1) cash(1) flow(1) and(1) revenue(2) look(1) fine(1) but(1) churn(1) is(1)
        // Terms: "cash flow", "revenue" -> 2/10 = 0.2 -> density sub-score 1.0.
        // Grade: 0.39*10 + 11.8*1.1 - 15.59 = 1.29 -> below 6 -> 0.
        // Jargon: "churn" 1 per sentence -> 1.0.
        let p = technical_parts("our cash flow and revenue look fine but churn is", &cfg()).unwrap();
        assert_eq!(p.terminology, 1.0);
        assert_eq!(p.complexity, 0.0);
        assert_eq!(p.jargon, 1.0);
        assert!((p.score - 2.0 / 3.0).abs() < 1e-12);

        // Half the density: 1 term in 10 words -> 0.1/0.15.
        let q = technical_parts("our revenue is low and it will look fine now", &cfg()).unwrap();
        assert!((q.terminology - 0.1 / 0.15).abs() < 1e-12);
        assert_eq!(q.jargon, 0.0);
    }

    #[test]
    fn empty_inputs_are_errors() {
        assert!(matches!(formality_score("", &cfg()), Err(Error::Input(_))));
        assert!(matches!(technical_score("?!", &cfg()), Err(Error::Input(_))));
        let mut c = cfg();
        c.jargon.clear();
        assert!(matches!(technical_score("hello there", &c), Err(Error::Input(_))));
    }

    #[test]
    fn stability_examples() {
        assert_eq!(stability_from_errors(0.0, 0.0), 1.0);
        assert!((stability_from_errors(0.2, 0.3) - 0.75).abs() < 1e-15);
        // A combined error of 0.184 across both dimensions.
        assert!((stability_from_errors(0.092, 0.092) - 0.908).abs() < 1e-12);
    }

    fn sentence() -> impl Strategy<Value = String> {
        proptest::collection::vec(
            prop_oneof![
                "[a-z]{1,12}",
                Just("you".to_string()),
                Just("revenue".to_string()),
                Just("EBITDA".to_string()),
                Just("cash flow".to_string()),
            ],
            1..15,
        )
        .prop_map(|w| w.join(" ") + ".")
    }

    proptest! {
        #[test]
        fn scores_are_duplication_invariant(sents in proptest::collection::vec(sentence(), 1..5)) {
            let text = sents.join(" ");
            let twice = format!("{text}\n{text}");
            let c = cfg();
            let (f1, f2) = (formality_score(&text, &c).unwrap(), formality_score(&twice, &c).unwrap());
            let (t1, t2) = (technical_score(&text, &c).unwrap(), technical_score(&twice, &c).unwrap());
            prop_assert!((f1 - f2).abs() < 1e-12);
            prop_assert!((t1 - t2).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&f1) && (0.0..=1.0).contains(&t1));
        }

        #[test]
        fn stability_is_bounded_and_decreasing(ef in 0.0f64..=1.0, et in 0.0f64..=1.0, d in 0.001f64..0.5) {
            let s = stability_from_errors(ef, et);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!(stability_from_errors(ef + d, et) < s);
            prop_assert!(stability_from_errors(ef, et + d) < s);
        }

        #[test]
        fn more_pronouns_never_raise_formality(n in 0usize..10, m in 1usize..10) {
            // Same sentence, growing share of pronouns.
            let base: Vec<&str> = std::iter::repeat_n("consideration", 10).collect();
            let mk = |k: usize| {
                let mut w = base.clone();
                for slot in w.iter_mut().take(k) { *slot = "you"; }
                w.join(" ")
            };
            let c = cfg();
            let lo = formality_parts(&mk(n), &c).unwrap().pronouns;
            let hi = formality_parts(&mk((n + m).min(10)), &c).unwrap().pronouns;
            prop_assert!(hi <= lo);
        }
    }
}
