//! Topic drift and topic coherence.

use serde::{Deserialize, Serialize};

use crate::embed::{cosine, embed_sentences, Embedder};
use crate::error::{Error, Result};
use crate::gateway::Transcript;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftPoint {
    /// Transcript turn index.
    pub turn: u32,
    /// 1-based index among user turns.
    pub user_turn: usize,
    pub similarity: f64,
    /// `1 - similarity`.
    pub drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSeries {
    pub points: Vec<DriftPoint>,
}

impl DriftSeries {
    pub fn similarities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.similarity).collect()
    }
}

/// Cosine similarity of every user utterance to the opening topic.
pub fn topic_drift_series(
    transcript: &Transcript,
    opening_topic: &str,
    embedder: &dyn Embedder,
) -> Result<DriftSeries> {
    if opening_topic.trim().is_empty() {
        return Err(Error::Input("opening topic is empty".into()));
    }
    let user: Vec<_> = transcript.user_turns().collect();
    if user.is_empty() {
        return Err(Error::Input("transcript has no user turns".into()));
    }
    let mut texts: Vec<&str> = vec![opening_topic];
    texts.extend(user.iter().map(|t| t.content.as_str()));
    let vectors = embed_sentences(&texts, embedder)?;
    let anchor = &vectors[0].values;
    let points = user
        .iter()
        .zip(&vectors[1..])
        .enumerate()
        .map(|(i, (turn, v))| {
            let similarity = cosine(&v.values, anchor)?;
            Ok(DriftPoint {
                turn: turn.turn,
                user_turn: i + 1,
                similarity,
                drift: 1.0 - similarity,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DriftSeries { points })
}

/// Mean cosine similarity between adjacent turns.
pub fn topic_coherence(transcript: &Transcript, embedder: &dyn Embedder) -> Result<f64> {
    if transcript.len() < 2 {
        return Err(Error::Input("coherence needs at least two turns".into()));
    }
    let texts: Vec<&str> = transcript.conversation.iter().map(|t| t.content.as_str()).collect();
    let vectors = embed_sentences(&texts, embedder)?;
    let mut sum = 0.0;
    for pair in vectors.windows(2) {
        sum += cosine(&pair[0].values, &pair[1].values)?;
    }
    Ok(sum / (vectors.len() - 1) as f64)
}
