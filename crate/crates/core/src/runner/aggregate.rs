//! Descriptive aggregates over per-conversation records, grouped the way
//! the result tables and figures are: by model, turn length and parameter
//! level.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::execute::{CellMetrics, CellRecord};
use super::grid::BASELINE;
use crate::embed::Embedder;
use crate::error::Result;
use crate::gateway::{InferredParameters, JudgeKind};
use crate::metrics::{
    blend_judgments, cluster_topics, embedding_diversity, judge_agreement, topic_entropy, AdherenceScore,
    AdherenceTally,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityRow {
    pub model: String,
    pub topic_diversity: usize,
    pub topic_entropy: f64,
    pub embedding_diversity: Option<f64>,
    pub conversations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRow {
    pub model: String,
    pub rank: usize,
    pub representative: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdherenceRow {
    pub model: String,
    pub turns: u32,
    pub parameter: String,
    /// `mse` or `accuracy`.
    pub metric: String,
    pub llm: Option<f64>,
    pub human: Option<f64>,
    pub blended: f64,
    pub human_weight: f64,
    pub llm_weight: f64,
    pub llm_judgments: usize,
    pub human_judgments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceRow {
    pub model: String,
    pub focus_level: i64,
    pub topic_coherence: f64,
    pub conversations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub model: String,
    pub smoothness: String,
    /// 1-based entrepreneur turn.
    pub turn: usize,
    pub cosine_similarity: f64,
    pub drift: f64,
    pub conversations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub model: String,
    pub condition: String,
    pub turns: u32,
    pub formality_error: f64,
    pub technical_error: f64,
    /// `formality_error + technical_error`.
    pub error: f64,
    pub stability: f64,
    pub conversations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisitRow {
    pub model: String,
    pub condition: String,
    pub knowledge_gap_level: Option<u8>,
    pub turns: u32,
    pub revisit_rate: f64,
    pub raw_count: f64,
    pub conversations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisitTurnRow {
    pub model: String,
    pub condition: String,
    pub knowledge_gap_level: Option<u8>,
    pub turns: u32,
    /// Transcript turn, 2..T.
    pub turn: usize,
    pub revisit_fraction: f64,
    pub conversations: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub diversity: Vec<DiversityRow>,
    pub topic_clusters: Vec<ClusterRow>,
    pub adherence: Vec<AdherenceRow>,
    pub coherence: Vec<CoherenceRow>,
    pub drift: Vec<DriftRow>,
    pub stability: Vec<StabilityRow>,
    pub revisit: Vec<RevisitRow>,
    pub revisit_turns: Vec<RevisitTurnRow>,
    /// `(human, llm)` agreement behind the blend weights.
    pub judge_agreement: Option<(f64, f64)>,
}

#[derive(Default)]
struct Mean {
    sum: f64,
    n: usize,
}

impl Mean {
    fn add(&mut self, x: f64) {
        self.sum += x;
        self.n += 1;
    }
    fn get(&self) -> f64 {
        self.sum / self.n as f64
    }
}

fn model_label(r: &CellRecord) -> String {
    r.cell.provider.clone()
}

pub fn aggregate(
    records: &[CellRecord],
    human_labels: &[InferredParameters],
    diversity_embedder: &dyn Embedder,
    cluster_threshold: f64,
) -> Result<Aggregates> {
    let mut out = Aggregates::default();
    diversity(records, diversity_embedder, cluster_threshold, &mut out)?;
    adherence(records, human_labels, &mut out)?;
    series(records, &mut out);
    Ok(out)
}

fn diversity(records: &[CellRecord], embedder: &dyn Embedder, threshold: f64, out: &mut Aggregates) -> Result<()> {
    let mut topics: BTreeMap<String, Vec<&str>> = BTreeMap::new();
    for r in records {
        if let CellMetrics::Diversity { topic } = &r.metrics {
            let label = if r.cell.condition == BASELINE {
                BASELINE.to_string()
            } else {
                model_label(r)
            };
            topics.entry(label).or_default().push(topic);
        }
    }
    for (model, list) in topics {
        let list: Vec<&str> = list.into_iter().filter(|t| !t.trim().is_empty()).collect();
        if list.is_empty() {
            continue;
        }
        let set = cluster_topics(&list, threshold, embedder)?;
        let mut clusters = set.clusters.clone();
        clusters.sort_by_key(|c| std::cmp::Reverse(c.count));
        out.diversity.push(DiversityRow {
            model: model.clone(),
            topic_diversity: clusters.len(),
            topic_entropy: topic_entropy(&set.counts())?,
            embedding_diversity: if list.len() >= 2 {
                Some(embedding_diversity(&list, embedder)?)
            } else {
                None
            },
            conversations: list.len(),
        });
        for (i, c) in clusters.into_iter().enumerate() {
            out.topic_clusters.push(ClusterRow {
                model: model.clone(),
                rank: i + 1,
                representative: c.representative,
                count: c.count,
            });
        }
    }
    Ok(())
}

fn adherence(records: &[CellRecord], human_labels: &[InferredParameters], out: &mut Aggregates) -> Result<()> {
    let mut humans: HashMap<&str, Vec<&InferredParameters>> = HashMap::new();
    for h in human_labels.iter().filter(|h| h.judge == JudgeKind::Human) {
        humans.entry(&h.conversation_id).or_default().push(h);
    }
    let mut llm: BTreeMap<(String, u32), AdherenceTally> = BTreeMap::new();
    let mut human: BTreeMap<(String, u32), AdherenceTally> = BTreeMap::new();
    let mut coherence: BTreeMap<(String, i64), Mean> = BTreeMap::new();
    let mut calibration: Vec<InferredParameters> = Vec::new();
    for r in records {
        let CellMetrics::Adherence {
            set,
            inferred,
            focus_level,
            coherence: c,
        } = &r.metrics
        else {
            continue;
        };
        let key = (model_label(r), r.cell.turns);
        llm.entry(key.clone()).or_default().add(set, &inferred.values())?;
        coherence.entry((key.0.clone(), *focus_level)).or_default().add(*c);
        if let Some(hs) = humans.get(r.cell.id.as_str()) {
            calibration.push(inferred.clone());
            for h in hs {
                human.entry(key.clone()).or_default().add(set, &h.values())?;
                calibration.push((*h).clone());
            }
        }
    }
    let agreement = judge_agreement(&calibration);
    if !human.is_empty() {
        out.judge_agreement = Some(agreement);
    }
    for (key, tally) in &llm {
        let l = AdherenceScore {
            numeric_mse: tally.mse(),
            categorical_accuracy: tally.accuracy(),
            weights: (0.0, 1.0),
        };
        let h_tally = human.get(key);
        let h = h_tally.map(|t| AdherenceScore {
            numeric_mse: t.mse(),
            categorical_accuracy: t.accuracy(),
            weights: (1.0, 0.0),
        });
        let b = blend_judgments(h.as_ref(), &l, agreement)?;
        let empty = AdherenceTally::default();
        let ht = h_tally.unwrap_or(&empty);
        for (path, blended) in &b.numeric_mse {
            out.adherence.push(AdherenceRow {
                model: key.0.clone(),
                turns: key.1,
                parameter: path.clone(),
                metric: "mse".into(),
                llm: l.numeric_mse.get(path).copied(),
                human: h.as_ref().and_then(|h| h.numeric_mse.get(path).copied()),
                blended: *blended,
                human_weight: b.weights.0,
                llm_weight: b.weights.1,
                llm_judgments: tally.numeric.get(path).map_or(0, |x| x.1),
                human_judgments: ht.numeric.get(path).map_or(0, |x| x.1),
            });
        }
        for (path, blended) in &b.categorical_accuracy {
            out.adherence.push(AdherenceRow {
                model: key.0.clone(),
                turns: key.1,
                parameter: path.clone(),
                metric: "accuracy".into(),
                llm: l.categorical_accuracy.get(path).copied(),
                human: h.as_ref().and_then(|h| h.categorical_accuracy.get(path).copied()),
                blended: *blended,
                human_weight: b.weights.0,
                llm_weight: b.weights.1,
                llm_judgments: tally.categorical.get(path).map_or(0, |x| x.1),
                human_judgments: ht.categorical.get(path).map_or(0, |x| x.1),
            });
        }
    }
    for ((model, focus_level), m) in coherence {
        out.coherence.push(CoherenceRow {
            model,
            focus_level,
            topic_coherence: m.get(),
            conversations: m.n,
        });
    }
    Ok(())
}

/// (model, condition, knowledge gap level, turns)
type RevisitKey = (String, String, Option<u8>, u32);

fn series(records: &[CellRecord], out: &mut Aggregates) {
    let mut drift: BTreeMap<(String, String, usize), (Mean, Mean)> = BTreeMap::new();
    let mut stability: BTreeMap<(String, String, u32), [Mean; 3]> = BTreeMap::new();
    let mut revisit: BTreeMap<RevisitKey, (Mean, Mean)> = BTreeMap::new();
    let mut revisit_turns: BTreeMap<(String, String, Option<u8>, u32, usize), Mean> = BTreeMap::new();
    for r in records {
        let model = model_label(r);
        let cond = r.cell.condition.clone();
        match &r.metrics {
            CellMetrics::Drift { series, .. } => {
                for p in &series.points {
                    let e = drift.entry((model.clone(), cond.clone(), p.user_turn)).or_default();
                    e.0.add(p.similarity);
                    e.1.add(p.drift);
                }
            }
            CellMetrics::Stability { checkpoints } => {
                for c in checkpoints {
                    let e = stability.entry((model.clone(), cond.clone(), c.turns)).or_default();
                    e[0].add(c.score.formality_error);
                    e[1].add(c.score.technical_error);
                    e[2].add(c.score.stability);
                }
            }
            CellMetrics::Revisit { result } => {
                let key = (model.clone(), cond.clone(), r.cell.level, r.cell.turns);
                let e = revisit.entry(key).or_default();
                e.0.add(result.rate);
                e.1.add(result.raw_count);
                for (i, f) in result.per_turn.iter().enumerate() {
                    if let Some(f) = f {
                        revisit_turns
                            .entry((model.clone(), cond.clone(), r.cell.level, r.cell.turns, i + 2))
                            .or_default()
                            .add(*f);
                    }
                }
            }
            _ => {}
        }
    }
    for ((model, smoothness, turn), (s, d)) in drift {
        out.drift.push(DriftRow {
            model,
            smoothness,
            turn,
            cosine_similarity: s.get(),
            drift: d.get(),
            conversations: s.n,
        });
    }
    for ((model, condition, turns), [f, t, s]) in stability {
        out.stability.push(StabilityRow {
            model,
            condition,
            turns,
            formality_error: f.get(),
            technical_error: t.get(),
            error: f.get() + t.get(),
            stability: s.get(),
            conversations: s.n,
        });
    }
    for ((model, condition, knowledge_gap_level, turns), (rate, raw)) in revisit {
        out.revisit.push(RevisitRow {
            model,
            condition,
            knowledge_gap_level,
            turns,
            revisit_rate: rate.get(),
            raw_count: raw.get(),
            conversations: rate.n,
        });
    }
    for ((model, condition, knowledge_gap_level, turns, turn), m) in revisit_turns {
        out.revisit_turns.push(RevisitTurnRow {
            model,
            condition,
            knowledge_gap_level,
            turns,
            turn,
            revisit_fraction: m.get(),
            conversations: m.n,
        });
    }
}
