//! Parameter adherence: configured parameters against judge-inferred ones.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{InferredParameters, JudgeKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Label(String),
}

pub type ParamMap = BTreeMap<String, ParamValue>;

/// Width of the 1..=5 level scale, used to turn numeric gaps into agreement.
const LEVEL_SPAN: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdherenceScore {
    pub numeric_mse: BTreeMap<String, f64>,
    pub categorical_accuracy: BTreeMap<String, f64>,
    /// `(human, llm)`, non-negative and summing to 1.
    pub weights: (f64, f64),
}

impl AdherenceScore {
    /// Score backed by the LLM judge alone.
    pub fn llm_only(set: &[ParamMap], inferred: &[ParamMap]) -> Result<Self> {
        Ok(Self {
            numeric_mse: adherence_numeric(set, inferred)?,
            categorical_accuracy: adherence_categorical(set, inferred)?,
            weights: (0.0, 1.0),
        })
    }

    pub fn human_only(set: &[ParamMap], inferred: &[ParamMap]) -> Result<Self> {
        Ok(Self {
            weights: (1.0, 0.0),
            ..Self::llm_only(set, inferred)?
        })
    }
}

/// Per-path observation totals, kept so partial results can be merged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdherenceTally {
    /// path -> (sum of squared errors, observations)
    pub numeric: BTreeMap<String, (f64, usize)>,
    /// path -> (correct, observations)
    pub categorical: BTreeMap<String, (usize, usize)>,
}

impl AdherenceTally {
    pub fn add(&mut self, set: &ParamMap, inferred: &ParamMap) -> Result<()> {
        for (path, got) in inferred {
            let want = set
                .get(path)
                .ok_or_else(|| Error::Input(format!("inferred path `{path}` has no configured value")))?;
            match (want, got) {
                (ParamValue::Number(a), ParamValue::Number(b)) => {
                    let e = self.numeric.entry(path.clone()).or_default();
                    e.0 += (a - b) * (a - b);
                    e.1 += 1;
                }
                (ParamValue::Label(a), ParamValue::Label(b)) => {
                    let e = self.categorical.entry(path.clone()).or_default();
                    e.0 += usize::from(a == b);
                    e.1 += 1;
                }
                _ => {
                    return Err(Error::Input(format!(
                        "scale mismatch at `{path}`: configured {want:?}, inferred {got:?}"
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &AdherenceTally) {
        for (p, (s, n)) in &other.numeric {
            let e = self.numeric.entry(p.clone()).or_default();
            e.0 += s;
            e.1 += n;
        }
        for (p, (c, n)) in &other.categorical {
            let e = self.categorical.entry(p.clone()).or_default();
            e.0 += c;
            e.1 += n;
        }
    }

    pub fn mse(&self) -> BTreeMap<String, f64> {
        self.numeric
            .iter()
            .filter(|(_, (_, n))| *n > 0)
            .map(|(p, (s, n))| (p.clone(), s / *n as f64))
            .collect()
    }

    pub fn accuracy(&self) -> BTreeMap<String, f64> {
        self.categorical
            .iter()
            .filter(|(_, (_, n))| *n > 0)
            .map(|(p, (c, n))| (p.clone(), *c as f64 / *n as f64))
            .collect()
    }
}

fn tally(set: &[ParamMap], inferred: &[ParamMap]) -> Result<AdherenceTally> {
    if set.len() != inferred.len() {
        return Err(Error::Input(format!(
            "{} configured maps but {} inferred maps",
            set.len(),
            inferred.len()
        )));
    }
    let mut t = AdherenceTally::default();
    for (s, i) in set.iter().zip(inferred) {
        t.add(s, i)?;
    }
    Ok(t)
}

/// Mean squared error per numeric path, over conversations aligned by index.
///
/// Paths a judge left unanswered (or answered out of range) are simply absent
/// from its map and drop out of that path's denominator.
pub fn adherence_numeric(set: &[ParamMap], inferred: &[ParamMap]) -> Result<BTreeMap<String, f64>> {
    Ok(tally(set, inferred)?.mse())
}

/// Fraction of exact label matches per categorical path.
pub fn adherence_categorical(set: &[ParamMap], inferred: &[ParamMap]) -> Result<BTreeMap<String, f64>> {
    Ok(tally(set, inferred)?.accuracy())
}

fn blend_map(h: &BTreeMap<String, f64>, l: &BTreeMap<String, f64>, w: (f64, f64)) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for path in h.keys().chain(l.keys()) {
        if out.contains_key(path) {
            continue;
        }
        let v = match (h.get(path), l.get(path)) {
            (Some(a), Some(b)) => w.0 * a + w.1 * b,
            (Some(a), None) => *a,
            (None, Some(b)) => *b,
            (None, None) => unreachable!(),
        };
        out.insert(path.clone(), v);
    }
    out
}

/// Agreement-weighted mean of human and LLM scores.
///
/// Without human labels the LLM score passes through with weights `(0, 1)`.
/// A path scored by only one side keeps that side's value.
pub fn blend_judgments(
    human: Option<&AdherenceScore>,
    llm: &AdherenceScore,
    agreement: (f64, f64),
) -> Result<AdherenceScore> {
    let Some(human) = human else {
        return Ok(AdherenceScore {
            weights: (0.0, 1.0),
            ..llm.clone()
        });
    };
    let (a, b) = agreement;
    if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0) {
        return Err(Error::Config(format!(
            "agreement values must be non-negative, got ({a}, {b})"
        )));
    }
    if a + b == 0.0 {
        return Err(Error::Config("both agreement values are zero".into()));
    }
    let w = (a / (a + b), b / (a + b));
    Ok(AdherenceScore {
        numeric_mse: blend_map(&human.numeric_mse, &llm.numeric_mse, w),
        categorical_accuracy: blend_map(&human.categorical_accuracy, &llm.categorical_accuracy, w),
        weights: w,
    })
}

/// Mean per-path agreement between two judgments of one conversation.
/// Levels agree by `1 - |a - b| / 4`, labels by exact match.
fn pair_agreement(a: &ParamMap, b: &ParamMap) -> Option<f64> {
    let scores: Vec<f64> = a
        .iter()
        .filter_map(|(path, x)| match (x, b.get(path)?) {
            (ParamValue::Number(x), ParamValue::Number(y)) => Some((1.0 - (x - y).abs() / LEVEL_SPAN).max(0.0)),
            (ParamValue::Label(x), ParamValue::Label(y)) => Some(if x == y { 1.0 } else { 0.0 }),
            _ => None,
        })
        .collect();
    (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64)
}

/// `(human, llm)` agreement on a calibration subset.
///
/// Each judgment is compared with every other judgment of the same
/// conversation; a judge kind's agreement is the mean over its judgments.
/// Kinds with no comparable pair default to 0.5.
pub fn judge_agreement(calibration: &[InferredParameters]) -> (f64, f64) {
    let mut by_conv: BTreeMap<&str, Vec<(JudgeKind, ParamMap)>> = BTreeMap::new();
    for j in calibration {
        by_conv
            .entry(&j.conversation_id)
            .or_default()
            .push((j.judge, j.values()));
    }
    let mut sums = [(0.0, 0usize); 2];
    for judgments in by_conv.values() {
        for (i, (kind, map)) in judgments.iter().enumerate() {
            let others: Vec<f64> = judgments
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != i)
                .filter_map(|(_, (_, other))| pair_agreement(map, other))
                .collect();
            if others.is_empty() {
                continue;
            }
            let slot = &mut sums[usize::from(*kind == JudgeKind::Llm)];
            slot.0 += others.iter().sum::<f64>() / others.len() as f64;
            slot.1 += 1;
        }
    }
    let mean = |(s, n): (f64, usize)| if n == 0 { 0.5 } else { s / n as f64 };
    (mean(sums[0]), mean(sums[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn num(pairs: &[(&str, f64)]) -> ParamMap {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), ParamValue::Number(*v)))
            .collect()
    }

    fn lab(pairs: &[(&str, &str)]) -> ParamMap {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), ParamValue::Label(v.to_string())))
            .collect()
    }

    #[test]
    fn direct_formula() {
        let set = [num(&[("focus", 3.0), ("kgl", 5.0)])];
        let got = [num(&[("focus", 1.0), ("kgl", 5.0)])];
        let mse = adherence_numeric(&set, &got).unwrap();
        assert_eq!(mse["focus"], 4.0);
        assert_eq!(mse["kgl"], 0.0);
        assert!(adherence_numeric(&set, &set).unwrap().values().all(|v| *v == 0.0));
    }

    #[test]
    fn categorical_fraction_and_exclusions() {
        let set: Vec<_> = (0..5).map(|_| lab(&[("dms", "analytical")])).collect();
        let mut got: Vec<_> = (0..4).map(|_| lab(&[("dms", "analytical")])).collect();
        got[3] = lab(&[("dms", "intuitive")]);
        // fifth judgment was invalid, so the path is absent
        got.push(ParamMap::new());
        assert_eq!(adherence_categorical(&set, &got).unwrap()["dms"], 0.75);
        assert_eq!(adherence_categorical(&set[..3], &got[..3]).unwrap()["dms"], 1.0);
    }

    #[test]
    fn mismatches_are_input_errors() {
        let set = [num(&[("x", 1.0)])];
        assert!(matches!(
            adherence_numeric(&set, &[lab(&[("x", "a")])]),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            adherence_numeric(&set, &[num(&[("y", 1.0)])]),
            Err(Error::Input(_))
        ));
        assert!(matches!(adherence_numeric(&set, &[]), Err(Error::Input(_))));
    }

    fn score(mse: f64, acc: f64) -> AdherenceScore {
        AdherenceScore {
            numeric_mse: [("focus".to_string(), mse)].into(),
            categorical_accuracy: [("dms".to_string(), acc)].into(),
            weights: (0.0, 1.0),
        }
    }

    #[test]
    fn blending() {
        let h = score(0.1, 1.0);
        let l = score(0.5, 0.5);
        let even = blend_judgments(Some(&h), &l, (1.0, 1.0)).unwrap();
        assert_eq!(even.weights, (0.5, 0.5));
        assert_eq!(even.numeric_mse["focus"], (0.1 + 0.5) / 2.0);
        assert_eq!(even.categorical_accuracy["dms"], 0.75);

        let skew = blend_judgments(Some(&h), &l, (0.8, 0.2)).unwrap();
        assert!((skew.numeric_mse["focus"] - 0.18).abs() < 1e-12);

        let pass = blend_judgments(None, &l, (0.0, 0.0)).unwrap();
        assert_eq!(pass.weights, (0.0, 1.0));
        assert_eq!(pass.numeric_mse, l.numeric_mse);

        assert!(matches!(
            blend_judgments(Some(&h), &l, (0.0, 0.0)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            blend_judgments(Some(&h), &l, (-1.0, 2.0)),
            Err(Error::Config(_))
        ));
    }

    fn judgment(conv: &str, kind: JudgeKind, kgl: f64, dms: &str) -> InferredParameters {
        InferredParameters {
            conversation_id: conv.into(),
            judge: kind,
            annotator_id: None,
            numeric: [("participants.knowledgeGapLevel".to_string(), kgl)].into(),
            categorical: [("participants.user.decisionMakingStyle".to_string(), dms.to_string())].into(),
            invalid: Default::default(),
            missing: vec![],
            raw: String::new(),
        }
    }

    #[test]
    fn agreement_defaults_and_values() {
        assert_eq!(judge_agreement(&[]), (0.5, 0.5));
        let lone = [judgment("c1", JudgeKind::Llm, 3.0, "analytical")];
        assert_eq!(judge_agreement(&lone), (0.5, 0.5));

        // two humans agree exactly, the LLM is off by 2 levels and the label
        let pool = [
            judgment("c1", JudgeKind::Human, 3.0, "analytical"),
            judgment("c1", JudgeKind::Human, 3.0, "analytical"),
            judgment("c1", JudgeKind::Llm, 5.0, "intuitive"),
        ];
        let (h, l) = judge_agreement(&pool);
        // human: mean(1.0, mean(0.5, 0.0)) = 0.625; llm: 0.25
        assert!((h - 0.625).abs() < 1e-12);
        assert!((l - 0.25).abs() < 1e-12);
    }

    fn pairs() -> impl Strategy<Value = (Vec<ParamMap>, Vec<ParamMap>)> {
        let conv = (
            proptest::collection::vec(1u8..=5, 3),
            proptest::collection::vec(proptest::option::of(1u8..=5), 3),
            0u8..4,
            proptest::option::of(0u8..4),
        );
        proptest::collection::vec(conv, 1..12).prop_map(|rows| {
            let labels = ["a", "b", "c", "d"];
            let paths = ["p0", "p1", "p2"];
            let mut set = Vec::new();
            let mut inf = Vec::new();
            for (s, i, sl, il) in rows {
                let mut sm = ParamMap::new();
                let mut im = ParamMap::new();
                for k in 0..3 {
                    sm.insert(paths[k].into(), ParamValue::Number(s[k] as f64));
                    if let Some(v) = i[k] {
                        im.insert(paths[k].into(), ParamValue::Number(v as f64));
                    }
                }
                sm.insert("cat".into(), ParamValue::Label(labels[sl as usize].into()));
                if let Some(l) = il {
                    im.insert("cat".into(), ParamValue::Label(labels[l as usize].into()));
                }
                set.push(sm);
                inf.push(im);
            }
            (set, inf)
        })
    }

    proptest! {
        #[test]
        fn matches_loop_oracle((set, inf) in pairs()) {
            let mse = adherence_numeric(&set, &inf).unwrap();
            let acc = adherence_categorical(&set, &inf).unwrap();
            for p in ["p0", "p1", "p2"] {
                let mut sq = Vec::new();
                for c in 0..set.len() {
                    if let (Some(ParamValue::Number(a)), Some(ParamValue::Number(b))) = (set[c].get(p), inf[c].get(p)) {
                        sq.push((a - b).powi(2));
                    }
                }
                match mse.get(p) {
                    Some(v) => prop_assert!((v - sq.iter().sum::<f64>() / sq.len() as f64).abs() < 1e-12),
                    None => prop_assert!(sq.is_empty()),
                }
            }
            let hits: Vec<bool> = (0..set.len())
                .filter_map(|c| inf[c].get("cat").map(|v| Some(v) == set[c].get("cat")))
                .collect();
            match acc.get("cat") {
                Some(v) => prop_assert!((v - hits.iter().filter(|h| **h).count() as f64 / hits.len() as f64).abs() < 1e-12),
                None => prop_assert!(hits.is_empty()),
            }
        }

        #[test]
        fn mse_zero_iff_exact((set, inf) in pairs()) {
            let mse = adherence_numeric(&set, &inf).unwrap();
            for (p, v) in &mse {
                prop_assert!(*v >= 0.0);
                let exact = (0..set.len()).all(|c| inf[c].get(p).is_none_or(|x| Some(x) == set[c].get(p)));
                prop_assert_eq!(*v == 0.0, exact);
            }
        }

        #[test]
        fn blend_weights_normalize(a in 0.0f64..10.0, b in 0.0f64..10.0, x in 0.0f64..16.0, y in 0.0f64..16.0) {
            prop_assume!(a + b > 0.0);
            let h = score(x, 0.0);
            let l = score(y, 1.0);
            let s = blend_judgments(Some(&h), &l, (a, b)).unwrap();
            prop_assert!((s.weights.0 + s.weights.1 - 1.0).abs() < 1e-12);
            let v = s.numeric_mse["focus"];
            prop_assert!(v >= x.min(y) - 1e-9 && v <= x.max(y) + 1e-9);
        }
    }
}
