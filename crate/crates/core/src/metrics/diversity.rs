//! Topic clustering, topic entropy and embedding diversity.

use serde::{Deserialize, Serialize};

use crate::embed::{cosine, embed_sentences, Embedder, EmbeddingVector};
use crate::error::{Error, Result};

pub const DEFAULT_CLUSTER_THRESHOLD: f64 = 0.85;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicCluster {
    pub representative: String,
    pub members: Vec<String>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicClusterSet {
    pub clusters: Vec<TopicCluster>,
    pub threshold: f64,
}

impl TopicClusterSet {
    pub fn counts(&self) -> Vec<u64> {
        self.clusters.iter().map(|c| c.count as u64).collect()
    }
}

/// Greedy threshold clustering: each topic joins the first cluster whose
/// representative (its founding topic) has cosine similarity at least
/// `threshold`, and otherwise founds a new cluster.
pub fn cluster_topics<S: AsRef<str>>(topics: &[S], threshold: f64, embedder: &dyn Embedder) -> Result<TopicClusterSet> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Input(format!("threshold {threshold} must lie in (0, 1)")));
    }
    let vectors = embed_sentences(topics, embedder)?;
    let mut clusters: Vec<TopicCluster> = Vec::new();
    let mut reps: Vec<&EmbeddingVector> = Vec::new();
    for (topic, v) in topics.iter().zip(&vectors) {
        let mut home = None;
        for (i, r) in reps.iter().enumerate() {
            if cosine(&r.values, &v.values)? >= threshold {
                home = Some(i);
                break;
            }
        }
        match home {
            Some(i) => {
                clusters[i].members.push(topic.as_ref().to_string());
                clusters[i].count += 1;
            }
            None => {
                clusters.push(TopicCluster {
                    representative: topic.as_ref().to_string(),
                    members: vec![topic.as_ref().to_string()],
                    count: 1,
                });
                reps.push(v);
            }
        }
    }
    Ok(TopicClusterSet { clusters, threshold })
}

/// Shannon entropy in bits of the distribution `count_i / sum`.
pub fn topic_entropy(counts: &[u64]) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::Input("entropy needs at least one count".into()));
    }
    if counts.contains(&0) {
        return Err(Error::Input("entropy counts must be positive".into()));
    }
    let total: f64 = counts.iter().map(|&c| c as f64).sum();
    let h: f64 = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum();
    Ok(h.max(0.0))
}

/// Mean pairwise cosine distance `1 - cos` over unordered pairs.
pub fn embedding_diversity<S: AsRef<str>>(texts: &[S], embedder: &dyn Embedder) -> Result<f64> {
    if texts.len() < 2 {
        return Err(Error::Input("embedding diversity needs at least two texts".into()));
    }
    let vectors = embed_sentences(texts, embedder)?;
    mean_pairwise_distance(&vectors)
}

pub fn mean_pairwise_distance(vectors: &[EmbeddingVector]) -> Result<f64> {
    if vectors.len() < 2 {
        return Err(Error::Input("embedding diversity needs at least two vectors".into()));
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            sum += 1.0 - cosine(&vectors[i].values, &vectors[j].values)?;
            pairs += 1;
        }
    }
    Ok(sum / pairs as f64)
}
