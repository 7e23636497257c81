use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};
use crate::gateway::slug;
use crate::persona::{baseline_profile, generate_profiles, EntrepreneurProfile};
use crate::prompt::{compile_baseline, compile_parameterized_omitting, PromptBundle};
use crate::schema::{randomize_parameters, Constraints, ConversationParameters};

pub const BASELINE: &str = "baseline";
pub const PARAMETERIZED: &str = "parameterized";
pub const STABILITY_CONDITIONS: [&str; 3] = ["full", "formality-omitted", "technical-omitted"];

const FORMALITY_PATH: &str = "conversationDynamics.formality";
const TECHNICAL_PATH: &str = "linguisticPatterns.technicalLanguageLevel";

/// One conversation in the design grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub index: usize,
    pub id: String,
    pub provider: String,
    /// `baseline`, `parameterized`, a smoothness grade or a stability condition.
    pub condition: String,
    pub turns: u32,
    /// Pinned knowledge gap level (revisit runs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u8>,
    pub rep: usize,
    pub profile: usize,
}

impl Cell {
    pub fn is_baseline(&self) -> bool {
        self.condition == BASELINE
    }
}

/// First 8 bytes of SHA-256 over the seed and labels.
pub fn derive_seed(seed: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 8 bytes"))
}

fn kgl_for(profile: usize) -> u8 {
    (profile % 5) as u8 + 1
}

/// Enumerate cells in a fixed order: provider, repetition, turn length,
/// condition, profile.
pub fn design_grid(cfg: &ExperimentConfig) -> Result<Vec<Cell>> {
    use ExperimentKind::*;
    let mut cells = Vec::new();
    let mut push = |provider: &str, condition: &str, turns: u32, level: Option<u8>, rep: usize, profile: usize| {
        let mut id = format!(
            "{}-{}-{}-t{turns}-r{rep}-p{profile:05}",
            cfg.kind,
            slug(provider),
            condition
        );
        if let Some(l) = level {
            id.push_str(&format!("-k{l}"));
        }
        cells.push(Cell {
            index: cells.len(),
            id,
            provider: provider.to_string(),
            condition: condition.to_string(),
            turns,
            level,
            rep,
            profile,
        });
    };
    for (pi, provider) in cfg.providers.iter().enumerate() {
        let p = provider.id.as_str();
        for rep in 0..cfg.repetitions {
            for &turns in &cfg.turn_lengths {
                let conditions: Vec<&str> = match cfg.kind {
                    Diversity | Adherence | Revisit => vec![PARAMETERIZED],
                    Drift => vec!["A", "F"],
                    Stability => STABILITY_CONDITIONS.to_vec(),
                };
                for cond in conditions {
                    for profile in 0..cfg.profiles {
                        let level = (cfg.kind == Revisit).then(|| kgl_for(profile));
                        push(p, cond, turns, level, rep, profile);
                    }
                }
                // Diversity has a single baseline row, generated by the first provider.
                let baseline = cfg.include_baseline && (cfg.kind != Diversity || pi == 0);
                if baseline {
                    for profile in 0..cfg.profiles {
                        push(p, BASELINE, turns, None, rep, profile);
                    }
                }
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::Config("design grid is empty".into()));
    }
    Ok(cells)
}

/// Profiles per repetition, generated once and shared by all cells.
pub struct ProfileBank {
    reps: Vec<Vec<EntrepreneurProfile>>,
}

impl ProfileBank {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let pool = cfg.industry_pool();
        let reps = (0..cfg.repetitions)
            .map(|r| {
                generate_profiles(
                    derive_seed(cfg.seed, &["profiles", &r.to_string()]),
                    cfg.profiles,
                    &pool,
                )
            })
            .collect::<Result<_>>()?;
        Ok(Self { reps })
    }

    pub fn get(&self, cell: &Cell) -> &EntrepreneurProfile {
        &self.reps[cell.rep][cell.profile]
    }
}

/// Parameters for a parameterized cell.
///
/// The random draw depends only on (seed, repetition, profile), so all turn
/// lengths and conditions of one entrepreneur share the same persona; only
/// the pinned fields differ.
pub fn cell_parameters(cfg: &ExperimentConfig, cell: &Cell) -> Result<ConversationParameters> {
    let seed = derive_seed(cfg.seed, &["params", &cell.rep.to_string(), &cell.profile.to_string()]);
    let mut c = Constraints::new().set("fundamentals.turns", cell.turns);
    if cfg.kind == ExperimentKind::Drift {
        c.insert("conversationDynamics.smoothnessFactor", cell.condition.as_str());
    }
    if let Some(l) = cell.level {
        c.insert("participants.knowledgeGapLevel", l);
    }
    randomize_parameters(seed, &c)
}

/// Compile the prompt for a cell. Baseline cells carry no parameters.
pub fn cell_prompt(
    cfg: &ExperimentConfig,
    bank: &ProfileBank,
    cell: &Cell,
) -> Result<(PromptBundle, Option<ConversationParameters>)> {
    if cell.is_baseline() {
        let seed = derive_seed(
            cfg.seed,
            &["baseline", &cell.rep.to_string(), &cell.profile.to_string()],
        );
        return Ok((compile_baseline(&baseline_profile(seed), cell.turns)?, None));
    }
    let params = cell_parameters(cfg, cell)?;
    let omit: &[&str] = match cell.condition.as_str() {
        "formality-omitted" => &[FORMALITY_PATH],
        "technical-omitted" => &[TECHNICAL_PATH],
        _ => &[],
    };
    let bundle = compile_parameterized_omitting(bank.get(cell), &params, omit)?;
    Ok((bundle, Some(params)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drift() -> ExperimentConfig {
        ExperimentConfig::preset("paper-drift")
            .unwrap()
            .with_mock()
            .scaled(0.02)
            .unwrap()
    }

    #[test]
    fn drift_grid_covers_a_f_and_baseline() {
        let cells = design_grid(&drift()).unwrap();
        assert_eq!(cells.len(), 12);
        for cond in ["A", "F", BASELINE] {
            assert_eq!(cells.iter().filter(|c| c.condition == cond).count(), 4);
        }
        let full = ExperimentConfig::preset("paper-drift").unwrap();
        assert_eq!(design_grid(&full).unwrap().len(), 2 * 600);
    }

    #[test]
    fn paper_grid_sizes() {
        let size = |n| {
            design_grid(&ExperimentConfig::preset(n).unwrap().with_mock())
                .unwrap()
                .len()
        };
        assert_eq!(size("paper-diversity"), 800 + 800);
        assert_eq!(size("paper-adherence"), 800);
        assert_eq!(size("paper-stability"), 1500);
        assert_eq!(size("paper-revisit"), 400 + 400);
    }

    #[test]
    fn ids_are_unique_and_indices_dense() {
        let mut cfg = ExperimentConfig::preset("paper-revisit").unwrap().scaled(0.1).unwrap();
        cfg.repetitions = 2;
        let cells = design_grid(&cfg).unwrap();
        let ids: std::collections::BTreeSet<_> = cells.iter().map(|c| &c.id).collect();
        assert_eq!(ids.len(), cells.len());
        assert!(cells.iter().enumerate().all(|(i, c)| c.index == i));
        let levels: std::collections::BTreeSet<_> = cells.iter().filter_map(|c| c.level).collect();
        assert_eq!(levels.into_iter().collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn prompts_pin_the_cell_design() {
        let cfg = drift();
        let bank = ProfileBank::new(&cfg).unwrap();
        let cells = design_grid(&cfg).unwrap();
        for cell in &cells {
            let (bundle, params) = cell_prompt(&cfg, &bank, cell).unwrap();
            assert_eq!(bundle.target_turns, 20);
            if cell.is_baseline() {
                assert!(bundle.parameter_block.is_none());
                assert!(params.is_none());
            } else {
                let p = params.unwrap();
                assert_eq!(p.conversation_dynamics.smoothness_factor.to_string(), cell.condition);
            }
        }
        // same entrepreneur under A and F differs only by the pinned grade
        let a = cell_parameters(&cfg, &cells[0]).unwrap();
        let mut f = cell_parameters(&cfg, &cells[4]).unwrap();
        assert_eq!(cells[4].condition, "F");
        f.conversation_dynamics.smoothness_factor = a.conversation_dynamics.smoothness_factor;
        assert_eq!(a, f);
    }

    #[test]
    fn stability_conditions_withhold_one_target() {
        let cfg = ExperimentConfig::preset("paper-stability")
            .unwrap()
            .with_mock()
            .scaled(0.002)
            .unwrap();
        let bank = ProfileBank::new(&cfg).unwrap();
        let cells = design_grid(&cfg).unwrap();
        assert_eq!(cells.len(), 3);
        let blocks: Vec<String> = cells
            .iter()
            .map(|c| cell_prompt(&cfg, &bank, c).unwrap().0.parameter_block.unwrap())
            .collect();
        assert!(blocks[0].contains("\"formality\"") && blocks[0].contains("technicalLanguageLevel"));
        assert!(!blocks[2].contains("technicalLanguageLevel"));
        assert!(blocks[1].contains("technicalLanguageLevel"));
    }
}
