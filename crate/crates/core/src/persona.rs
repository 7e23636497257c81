//! Entrepreneur background profiles.
//!
//! Profiles are expanded from curated facet lists (see `data/facets.json`)
//! with a seeded RNG, one independent stream per profile index, so batches are
//! reproducible and prefix-stable.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const DEFAULT_FACETS: &str = include_str!("../data/facets.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntrepreneurProfile {
    pub id: String,
    pub demographic: String,
    pub industry: String,
    pub business_idea: String,
    pub prior_experience: String,
}

/// Facet lists profiles are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Facets {
    pub age_bands: Vec<String>,
    pub genders: Vec<String>,
    pub locales: Vec<String>,
    pub backgrounds: Vec<String>,
    pub experience: Vec<String>,
    pub name_syllables: Vec<String>,
    pub differentiators: Vec<String>,
    /// Default industry pool.
    pub industries: Vec<String>,
    /// Idea stems per industry.
    pub ideas: BTreeMap<String, Vec<String>>,
    /// Stems for industries without their own list.
    pub generic_ideas: Vec<String>,
}

impl Default for Facets {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_FACETS).expect("bundled facets are valid")
    }
}

impl Facets {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let facets: Facets = serde_json::from_str(&text)?;
        facets.check()?;
        Ok(facets)
    }

    fn check(&self) -> Result<()> {
        let lists: [(&str, &Vec<String>); 8] = [
            ("age_bands", &self.age_bands),
            ("genders", &self.genders),
            ("locales", &self.locales),
            ("backgrounds", &self.backgrounds),
            ("experience", &self.experience),
            ("name_syllables", &self.name_syllables),
            ("differentiators", &self.differentiators),
            ("generic_ideas", &self.generic_ideas),
        ];
        for (name, list) in lists {
            if list.is_empty() || list.iter().any(|s| s.trim().is_empty()) {
                return Err(Error::Config(format!(
                    "facet list `{name}` must be non-empty with no blank entries"
                )));
            }
        }
        Ok(())
    }
}

fn profile_rng(seed: u64, index: u64, domain: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(domain.as_bytes());
    hasher.update(seed.to_le_bytes());
    hasher.update(index.to_le_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

fn pick<'a, R: Rng>(rng: &mut R, items: &'a [String]) -> &'a str {
    &items[rng.gen_range(0..items.len())]
}

fn venture_name<R: Rng>(rng: &mut R, facets: &Facets) -> String {
    let parts = rng.gen_range(2..=3);
    let raw: String = (0..parts).map(|_| pick(rng, &facets.name_syllables)).collect();
    let mut chars = raw.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => raw,
    }
}

fn business_idea<R: Rng>(rng: &mut R, facets: &Facets, industry: &str) -> String {
    let stems = facets
        .ideas
        .get(industry)
        .filter(|s| !s.is_empty())
        .unwrap_or(&facets.generic_ideas);
    let stem = pick(rng, stems);
    let twist = pick(rng, &facets.differentiators);
    let name = venture_name(rng, facets);
    format!("{name}, {stem} {twist}")
}

/// Generate `n` profiles with the bundled facet lists.
pub fn generate_profiles(seed: u64, n: usize, industry_pool: &[String]) -> Result<Vec<EntrepreneurProfile>> {
    generate_profiles_with(&Facets::default(), seed, n, industry_pool)
}

pub fn generate_profiles_with(
    facets: &Facets,
    seed: u64,
    n: usize,
    industry_pool: &[String],
) -> Result<Vec<EntrepreneurProfile>> {
    if n > 0 && industry_pool.is_empty() {
        return Err(Error::Config(
            "industry pool must be non-empty to generate profiles".into(),
        ));
    }
    if let Some(blank) = industry_pool.iter().position(|s| s.trim().is_empty()) {
        return Err(Error::Config(format!("industry pool entry {blank} is blank")));
    }
    Ok((0..n as u64)
        .map(|i| {
            let mut rng = profile_rng(seed, i, "profile");
            let industry = pick(&mut rng, industry_pool).to_string();
            let demographic = format!(
                "{} year-old {} from {}, {}",
                pick(&mut rng, &facets.age_bands),
                pick(&mut rng, &facets.genders),
                pick(&mut rng, &facets.locales),
                pick(&mut rng, &facets.backgrounds),
            );
            let business_idea = business_idea(&mut rng, facets, &industry);
            let prior_experience = pick(&mut rng, &facets.experience).to_string();
            EntrepreneurProfile {
                id: format!("ent-{seed}-{i:05}"),
                demographic,
                industry,
                business_idea,
                prior_experience,
            }
        })
        .collect())
}

/// A single profile with only a brief background and prior experience, as
/// used for unparameterized baseline prompts.
pub fn baseline_profile(seed: u64) -> EntrepreneurProfile {
    let facets = Facets::default();
    let mut rng = profile_rng(seed, 0, "baseline");
    let industry = pick(&mut rng, &facets.industries).to_string();
    let demographic = format!(
        "{} year-old {}",
        pick(&mut rng, &facets.age_bands),
        pick(&mut rng, &facets.genders)
    );
    let business_idea = business_idea(&mut rng, &facets, &industry);
    let prior_experience = pick(&mut rng, &facets.experience).to_string();
    EntrepreneurProfile {
        id: format!("baseline-{seed}"),
        demographic,
        industry,
        business_idea,
        prior_experience,
    }
}

pub fn write_profiles_jsonl<W: Write>(mut out: W, profiles: &[EntrepreneurProfile]) -> Result<()> {
    for p in profiles {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n").map_err(|e| Error::io("<profiles>", e))?;
    }
    Ok(())
}

pub fn read_profiles_jsonl<R: BufRead>(input: R) -> Result<Vec<EntrepreneurProfile>> {
    let mut profiles = Vec::new();
    for line in input.lines() {
        let line = line.map_err(|e| Error::io("<profiles>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        profiles.push(serde_json::from_str(&line)?);
    }
    Ok(profiles)
}
