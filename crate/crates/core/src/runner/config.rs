use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embed::EmbeddingConfig;
use crate::error::{Error, Result};
use crate::gateway::ProviderConfig;
use crate::metrics::{NerConfig, DEFAULT_CLUSTER_THRESHOLD};
use crate::persona::Facets;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Diversity,
    Adherence,
    Drift,
    Stability,
    Revisit,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Diversity,
        ExperimentKind::Adherence,
        ExperimentKind::Drift,
        ExperimentKind::Stability,
        ExperimentKind::Revisit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Diversity => "diversity",
            ExperimentKind::Adherence => "adherence",
            ExperimentKind::Drift => "drift",
            ExperimentKind::Stability => "stability",
            ExperimentKind::Revisit => "revisit",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Input(format!("unknown experiment kind `{s}`")))
    }
}

/// Embedding models: a compact one for topic diversity and one for drift.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSlots {
    #[serde(default)]
    pub diversity: EmbeddingConfig,
    #[serde(default)]
    pub drift: EmbeddingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: ExperimentKind,
    pub seed: u64,
    /// Entrepreneurs per repetition (drift: conversations per condition).
    pub profiles: usize,
    /// Generated conversation lengths.
    pub turn_lengths: Vec<u32>,
    #[serde(default = "one")]
    pub repetitions: usize,
    /// Prefix lengths at which stability is scored.
    #[serde(default)]
    pub checkpoints: Vec<u32>,
    /// Add unparameterized baseline cells.
    #[serde(default)]
    pub include_baseline: bool,
    pub providers: Vec<ProviderConfig>,
    /// LLM judge for adherence runs.
    #[serde(default)]
    pub judge: Option<ProviderConfig>,
    #[serde(default)]
    pub industries: Vec<String>,
    #[serde(default)]
    pub embeddings: EmbeddingSlots,
    #[serde(default)]
    pub ner: NerConfig,
    /// Scoring lexicons and bounds; the bundled defaults when unset.
    #[serde(default)]
    pub scoring: Option<PathBuf>,
    #[serde(default = "default_threshold")]
    pub cluster_threshold: f64,
    /// Run directory. Not part of the config hash.
    #[serde(default)]
    pub output_dir: PathBuf,
    /// Not part of the config hash.
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn one() -> usize {
    1
}
fn default_threshold() -> f64 {
    DEFAULT_CLUSTER_THRESHOLD
}
fn default_workers() -> usize {
    4
}

pub const PRESETS: &[&str] = &[
    "paper-diversity",
    "paper-adherence",
    "paper-drift",
    "paper-stability",
    "paper-revisit",
];

const PAPER_MODELS: &[&str] = &[
    "claude-3.7-sonnet",
    "gemini-2.5-pro",
    "o3",
    "o4-mini",
    "deepseek-r1",
    "gpt-4o-mini",
    "gpt-4.1",
    "llama3.1:70b",
];

fn builtins(ids: &[&str]) -> Vec<ProviderConfig> {
    ids.iter()
        .map(|id| ProviderConfig::builtin(id).expect("preset provider is built in"))
        .collect()
}

impl ExperimentConfig {
    fn base(name: &str, kind: ExperimentKind, profiles: usize, turn_lengths: Vec<u32>) -> Self {
        Self {
            name: name.into(),
            kind,
            seed: 20250601,
            profiles,
            turn_lengths,
            repetitions: 1,
            checkpoints: Vec::new(),
            include_baseline: false,
            providers: builtins(PAPER_MODELS),
            judge: None,
            industries: Vec::new(),
            embeddings: EmbeddingSlots::default(),
            ner: NerConfig::default(),
            scoring: None,
            cluster_threshold: DEFAULT_CLUSTER_THRESHOLD,
            output_dir: PathBuf::from("runs").join(name),
            workers: default_workers(),
        }
    }

    /// Paper-scale experiment designs.
    pub fn preset(name: &str) -> Result<Self> {
        use ExperimentKind::*;
        let cfg = match name {
            "paper-diversity" => Self {
                include_baseline: true,
                ..Self::base(name, Diversity, 800, vec![10])
            },
            "paper-adherence" => Self {
                judge: ProviderConfig::builtin("claude-3.7-sonnet"),
                ..Self::base(name, Adherence, 200, vec![5, 10, 15, 20])
            },
            "paper-drift" => Self {
                include_baseline: true,
                providers: builtins(&["claude-3.7-sonnet", "gpt-4o-mini"]),
                ..Self::base(name, Drift, 200, vec![20])
            },
            "paper-stability" => Self {
                checkpoints: vec![5, 10, 15, 20],
                providers: builtins(&["claude-3.7-sonnet", "o3"]),
                ..Self::base(name, Stability, 500, vec![20])
            },
            "paper-revisit" => Self {
                include_baseline: true,
                providers: builtins(&["claude-3.7-sonnet", "gemini-2.5-pro"]),
                ..Self::base(name, Revisit, 100, vec![5, 10, 15, 20])
            },
            _ => {
                return Err(Error::Config(format!(
                    "unknown preset `{name}`; expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(cfg)
    }

    /// Load a TOML or JSON config file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
            _ => {
                let de = &mut serde_json::Deserializer::from_str(&text);
                serde_path_to_error::deserialize(de).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
        };
        cfg.check()?;
        Ok(cfg)
    }

    /// A preset name or a config file path.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        if PRESETS.contains(&name_or_path) {
            Self::preset(name_or_path)
        } else {
            Self::from_path(Path::new(name_or_path))
        }
    }

    /// Multiply the profile count by `factor`, keeping at least one.
    pub fn scaled(mut self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::Config(format!("scale must be positive, got {factor}")));
        }
        self.profiles = ((self.profiles as f64 * factor).round() as usize).max(1);
        Ok(self)
    }

    /// Replace every provider, and the judge, with the offline mock.
    pub fn with_mock(mut self) -> Self {
        self.providers = vec![ProviderConfig::mock()];
        if self.judge.is_some() {
            self.judge = Some(ProviderConfig::mock());
        }
        self
    }

    /// Keep only the named providers; built-in ids not yet listed are added.
    pub fn with_providers(mut self, ids: &[String]) -> Result<Self> {
        let mut out = Vec::new();
        for id in ids {
            let p = self
                .providers
                .iter()
                .find(|p| &p.id == id)
                .cloned()
                .or_else(|| ProviderConfig::builtin(id))
                .ok_or_else(|| Error::Config(format!("unknown provider `{id}`")))?;
            out.push(p);
        }
        self.providers = out;
        Ok(self)
    }

    pub fn check(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.name.trim().is_empty() {
            return fail("experiment name is empty".into());
        }
        if self.profiles == 0 || self.repetitions == 0 || self.workers == 0 {
            return fail("profiles, repetitions and workers must be at least 1".into());
        }
        if self.turn_lengths.is_empty() || self.turn_lengths.contains(&0) {
            return fail("turn lengths must be non-empty and at least 1".into());
        }
        if self.checkpoints.contains(&0) {
            return fail("checkpoints must be at least 1".into());
        }
        if self.providers.is_empty() {
            return fail("at least one provider is required".into());
        }
        let mut ids: Vec<&str> = self.providers.iter().map(|p| p.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return fail("provider ids must be unique".into());
        }
        for p in self.providers.iter().chain(&self.judge) {
            p.check()?;
        }
        if self.kind == ExperimentKind::Adherence && self.judge.is_none() {
            return fail("adherence runs need a judge provider".into());
        }
        if self.industries.iter().any(|s| s.trim().is_empty()) {
            return fail("industry entries must not be blank".into());
        }
        if !(self.cluster_threshold > 0.0 && self.cluster_threshold < 1.0) {
            return fail(format!(
                "cluster threshold {} must lie in (0, 1)",
                self.cluster_threshold
            ));
        }
        Ok(())
    }

    pub fn industry_pool(&self) -> Vec<String> {
        if self.industries.is_empty() {
            Facets::default().industries
        } else {
            self.industries.clone()
        }
    }

    /// SHA-256 of the canonical JSON form, ignoring output dir and workers.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        c.workers = 1;
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(&c)?)))
    }
}
