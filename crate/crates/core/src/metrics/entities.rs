//! Entity and concept extraction, and the entity revisit rate.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::style::ScoringConfig;
use super::text::{canonical_phrase, match_phrases, sentences};
use crate::error::{Error, Result};
use crate::gateway::Transcript;

pub type EntitySet = BTreeSet<String>;

/// A pluggable extraction backend.
pub trait EntityExtractor: Send + Sync {
    fn name(&self) -> &str;
    fn extract(&self, text: &str) -> Result<EntitySet>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NerBackend {
    /// Built-in rules only.
    RuleBased,
    /// An external extractor supplied by the caller.
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NerConfig {
    pub backend: NerBackend,
    /// Use the rule-based extractor when the external backend is missing
    /// or fails.
    pub fallback: bool,
    /// Extra concept phrases on top of the scoring lexicons.
    #[serde(default)]
    pub extra_terms: Vec<String>,
}

impl Default for NerConfig {
    fn default() -> Self {
        Self {
            backend: NerBackend::RuleBased,
            fallback: true,
            extra_terms: Vec::new(),
        }
    }
}

/// Deterministic fallback extractor.
///
/// Per sentence, on lowercased lemmatized tokens:
/// 1. lexicon phrases (domain terms, jargon, extra terms) match first,
///    longest match wins, matches do not overlap;
/// 2. among the remaining tokens, maximal runs of capitalized words form
///    entities. "I" and stopwords never start or join a run, and a single
///    capitalized word at the start of a sentence is ignored unless it is
///    an all-caps acronym.
///
/// Entities are emitted as space-joined lemmas.
pub struct RuleBasedExtractor {
    lexicon: Vec<Vec<String>>,
    stopwords: HashSet<String>,
}

impl RuleBasedExtractor {
    pub fn new(scoring: &ScoringConfig, extra_terms: &[String]) -> Self {
        let lexicon = scoring
            .domain_terms
            .iter()
            .chain(&scoring.jargon)
            .chain(extra_terms)
            .map(|p| canonical_phrase(p))
            .filter(|p| !p.is_empty())
            .collect();
        Self {
            lexicon,
            stopwords: scoring.stopwords.iter().cloned().collect(),
        }
    }
}

fn capitalized(raw: &str) -> bool {
    raw.chars().next().is_some_and(char::is_uppercase)
}

fn acronym(raw: &str) -> bool {
    raw.chars().count() >= 2 && raw.chars().all(|c| c.is_uppercase() || c.is_ascii_digit())
}

impl EntityExtractor for RuleBasedExtractor {
    fn name(&self) -> &str {
        "rule-based"
    }

    fn extract(&self, text: &str) -> Result<EntitySet> {
        let mut out = EntitySet::new();
        for sent in sentences(text) {
            let mut used = vec![false; sent.len()];
            for (start, len) in match_phrases(&sent, &self.lexicon) {
                used[start..start + len].iter_mut().for_each(|u| *u = true);
                let phrase: Vec<&str> = sent[start..start + len].iter().map(|t| t.lemma.as_str()).collect();
                out.insert(phrase.join(" "));
            }
            let eligible = |i: usize| {
                let t = &sent[i];
                !used[i] && capitalized(&t.raw) && t.raw != "I" && !self.stopwords.contains(&t.lower)
            };
            let mut i = 0;
            while i < sent.len() {
                if !eligible(i) {
                    i += 1;
                    continue;
                }
                let mut j = i + 1;
                while j < sent.len() && eligible(j) {
                    j += 1;
                }
                let single_initial = i == 0 && j == 1 && !acronym(&sent[0].raw);
                if !single_initial {
                    let lemmas: Vec<&str> = sent[i..j].iter().map(|t| t.lemma.as_str()).collect();
                    out.insert(lemmas.join(" "));
                }
                i = j;
            }
        }
        Ok(out)
    }
}

/// Per-turn entity sets, in turn order.
///
/// With [`NerBackend::External`], `external` is used; if it is absent or
/// fails, the rule-based extractor takes over when `fallback` is set, and a
/// provider error is returned otherwise.
pub fn extract_entities(
    transcript: &Transcript,
    cfg: &NerConfig,
    scoring: &ScoringConfig,
    external: Option<&dyn EntityExtractor>,
) -> Result<Vec<EntitySet>> {
    let rules = RuleBasedExtractor::new(scoring, &cfg.extra_terms);
    transcript
        .conversation
        .iter()
        .map(|turn| match (cfg.backend, external) {
            (NerBackend::RuleBased, _) => rules.extract(&turn.content),
            (NerBackend::External, Some(ext)) => match ext.extract(&turn.content) {
                Ok(set) => Ok(set),
                Err(e) if cfg.fallback => {
                    log::warn!("entity backend `{}` failed, using rules: {e}", ext.name());
                    rules.extract(&turn.content)
                }
                Err(e) => Err(e),
            },
            (NerBackend::External, None) if cfg.fallback => rules.extract(&turn.content),
            (NerBackend::External, None) => Err(Error::provider(
                "ner",
                "external entity backend unavailable and fallback disabled",
            )),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisitResult {
    /// Fraction of turn t's entities seen before t, for t = 2..T.
    /// `None` marks a skipped turn with no entities.
    pub per_turn: Vec<Option<f64>>,
    /// Mean of the non-skipped fractions; 0 when every turn was skipped.
    pub rate: f64,
    /// `sum_t |E_t ∩ ∪_{i<t} E_i| / (T - 1)`, unnormalized.
    pub raw_count: f64,
    pub skipped_turns: Vec<usize>,
    pub entity_sets: Vec<EntitySet>,
}

pub fn revisit_rate(entity_sets: &[EntitySet]) -> Result<RevisitResult> {
    let t = entity_sets.len();
    if t < 2 {
        return Err(Error::Input(format!("revisit rate needs at least 2 turns, got {t}")));
    }
    let mut seen: HashSet<&str> = entity_sets[0].iter().map(String::as_str).collect();
    let mut per_turn = Vec::with_capacity(t - 1);
    let mut skipped = Vec::new();
    let mut total_hits = 0usize;
    for (idx, set) in entity_sets.iter().enumerate().skip(1) {
        let hits = set.iter().filter(|e| seen.contains(e.as_str())).count();
        total_hits += hits;
        if set.is_empty() {
            per_turn.push(None);
            skipped.push(idx + 1);
        } else {
            per_turn.push(Some(hits as f64 / set.len() as f64));
        }
        seen.extend(set.iter().map(String::as_str));
    }
    let fractions: Vec<f64> = per_turn.iter().flatten().copied().collect();
    let rate = if fractions.is_empty() {
        0.0
    } else {
        fractions.iter().sum::<f64>() / fractions.len() as f64
    };
    Ok(RevisitResult {
        per_turn,
        rate,
        raw_count: total_hits as f64 / (t - 1) as f64,
        skipped_turns: skipped,
        entity_sets: entity_sets.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::parse_output;
    use proptest::prelude::*;

    fn set(items: &[&str]) -> EntitySet {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn rules() -> RuleBasedExtractor {
        RuleBasedExtractor::new(&ScoringConfig::default(), &[])
    }

    #[test]
    fn documented_fallback_example() {
        let got = rules().extract("I met Acme Corp about SBA loans").unwrap();
        assert_eq!(got, set(&["acme corp", "sba loan"]));
    }

    #[test]
    fn sentence_initial_words_and_acronyms() {
        let got = rules()
            .extract("Pricing matters. The Main Street Bakery uses SBA funding. NASA called.")
            .unwrap();
        assert_eq!(got, set(&["main street bakery", "sba", "nasa"]));
    }

    #[test]
    fn extraction_is_deterministic() {
        let doc = r#"{"metadata":{"totalTurns":2},"conversation":[
            {"turn":1,"speaker":"user","content":"We talked to Acme Corp about cash flow."},
            {"turn":2,"speaker":"assistant","content":"Then revisit your cash flow forecast with Acme Corp."}]}"#;
        let t = parse_output(doc).unwrap();
        let cfg = NerConfig::default();
        let a = extract_entities(&t, &cfg, &ScoringConfig::default(), None).unwrap();
        let b = extract_entities(&t, &cfg, &ScoringConfig::default(), None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0], set(&["acme corp", "cash flow"]));
        assert_eq!(a[1], set(&["acme corp", "cash flow", "forecast"]));
        let r = revisit_rate(&a).unwrap();
        assert!((r.rate - 2.0 / 3.0).abs() < 1e-12);

        let strict = NerConfig {
            backend: NerBackend::External,
            fallback: false,
            extra_terms: vec![],
        };
        assert!(matches!(
            extract_entities(&t, &strict, &ScoringConfig::default(), None),
            Err(Error::Provider { .. })
        ));
    }

    #[test]
    fn revisit_examples() {
        let fresh = [set(&["a"]), set(&["b"]), set(&["c"])];
        assert_eq!(revisit_rate(&fresh).unwrap().rate, 0.0);
        let contained = [set(&["a", "b"]), set(&["a"])];
        assert_eq!(revisit_rate(&contained).unwrap().rate, 1.0);
        assert!(matches!(revisit_rate(&[set(&["a"])]), Err(Error::Input(_))));
        let gaps = [set(&["a"]), set(&[]), set(&["a", "b"])];
        let r = revisit_rate(&gaps).unwrap();
        assert_eq!(r.per_turn, vec![None, Some(0.5)]);
        assert_eq!(r.skipped_turns, vec![2]);
        assert_eq!(r.rate, 0.5);
        assert_eq!(r.raw_count, 0.5);
    }

    fn sets() -> impl Strategy<Value = Vec<EntitySet>> {
        proptest::collection::vec(
            proptest::collection::btree_set((0u8..12).prop_map(|x| format!("e{x}")), 0..5),
            2..10,
        )
    }

    proptest! {
        #[test]
        fn rate_is_a_fraction(s in sets()) {
            let r = revisit_rate(&s).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.rate));
        }

        #[test]
        fn adding_a_seen_entity_never_lowers_the_rate(s in sets(), t_pick in 1usize..10, e_pick in 0usize..100) {
            let t = 1 + t_pick % (s.len() - 1);
            let earlier: BTreeSet<&String> = s[..t].iter().flatten().collect();
            prop_assume!(!earlier.is_empty());
            let e = (*earlier.iter().nth(e_pick % earlier.len()).unwrap()).clone();
            let before = revisit_rate(&s).unwrap().rate;
            let mut more = s.clone();
            more[t].insert(e);
            prop_assert!(revisit_rate(&more).unwrap().rate >= before - 1e-12);
        }
    }
}
