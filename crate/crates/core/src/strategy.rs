//! Applying an anonymization strategy to a labeled embedding set.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::anonymizer::{baseline_anonymize, AnonymizerModel, BaselineConfig, FdConfig};
use crate::error::{Error, Result};
use crate::par;
use crate::rng::{derive_seed, label_tag};
use crate::types::{mean_vector, Embedding, EmbeddingSet, Gender};

/// Per-gender lookup that falls back to the `unspecified` entry.
#[derive(Clone, Debug, Default)]
pub struct Strata<T> {
    pub by_gender: BTreeMap<Gender, T>,
}

impl<T> Strata<T> {
    pub fn new() -> Self {
        Self {
            by_gender: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, gender: Gender, value: T) {
        self.by_gender.insert(gender, value);
    }

    pub fn get(&self, gender: Gender) -> Result<&T> {
        self.by_gender
            .get(&gender)
            .or_else(|| self.by_gender.get(&Gender::Unspecified))
            .ok_or_else(|| Error::invalid(format!("no entry for gender stratum `{gender}`")))
    }
}

impl<T> FromIterator<(Gender, T)> for Strata<T> {
    fn from_iter<I: IntoIterator<Item = (Gender, T)>>(iter: I) -> Self {
        Self {
            by_gender: iter.into_iter().collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StrategyKind {
    None,
    Ours,
    OursFd,
    Baseline,
}

impl StrategyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::None => "none",
            StrategyKind::Ours => "ours",
            StrategyKind::OursFd => "ours_fd",
            StrategyKind::Baseline => "baseline",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(StrategyKind::None),
            "ours" => Ok(StrategyKind::Ours),
            "ours_fd" | "ours-fd" => Ok(StrategyKind::OursFd),
            "baseline" => Ok(StrategyKind::Baseline),
            other => Err(Error::invalid(format!("unknown strategy `{other}`"))),
        }
    }
}

/// How fake vectors are produced.
#[derive(Clone, Copy, Debug)]
pub enum Strategy<'a> {
    /// Leave vectors untouched.
    None,
    Ours(&'a Strata<AnonymizerModel>),
    OursFd(&'a Strata<AnonymizerModel>, FdConfig),
    Baseline(&'a Strata<EmbeddingSet>, BaselineConfig),
}

impl Strategy<'_> {
    pub fn kind(&self) -> StrategyKind {
        match self {
            Strategy::None => StrategyKind::None,
            Strategy::Ours(_) => StrategyKind::Ours,
            Strategy::OursFd(..) => StrategyKind::OursFd,
            Strategy::Baseline(..) => StrategyKind::Baseline,
        }
    }

    /// One fake for a group of original vectors (one speaker, or one
    /// utterance) of the given gender. Returns the fake and the number of
    /// draws it took.
    pub fn fake_for(&self, gender: Gender, originals: &[&[f64]], seed: u64) -> Result<(Vec<f64>, u32)> {
        match self {
            Strategy::None => Err(Error::invalid("strategy `none` produces no fakes")),
            Strategy::Ours(models) => {
                let m = models.get(gender)?;
                check_dim(m.input_dim(), originals)?;
                Ok((m.generate_fake(seed), 1))
            }
            Strategy::OursFd(models, cfg) => {
                let out = models.get(gender)?.generate_fake_fd_multi(originals, cfg, seed)?;
                Ok((out.vector, out.attempts))
            }
            Strategy::Baseline(pools, cfg) => {
                let pool = pools.get(gender)?;
                check_dim(pool.dimension(), originals)?;
                let center = mean_vector(originals.iter().copied(), pool.dimension());
                Ok((baseline_anonymize(pool, &center, cfg, seed)?, 1))
            }
        }
    }
}

fn check_dim(dim: usize, originals: &[&[f64]]) -> Result<()> {
    match originals.iter().find(|o| o.len() != dim) {
        Some(o) => Err(Error::invalid(format!(
            "embedding dimension {} does not match model dimension {dim}",
            o.len()
        ))),
        None => Ok(()),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FakeGranularity {
    /// Every utterance of a speaker maps to the same pseudo-speaker.
    #[default]
    PerSpeaker,
    PerUtterance,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnonymizedSet {
    pub set: EmbeddingSet,
    /// Total draws across all fakes (equals the number of fakes without FD).
    pub total_attempts: u64,
    pub n_fakes: usize,
}

/// Replaces every vector in `set` with a fake. Labels and order are kept.
///
/// Per-speaker fakes are seeded from `(seed, speaker_id)`, per-utterance fakes
/// from `(seed, utterance_id)`, so results do not depend on set order or
/// thread count.
pub fn anonymize_set(
    set: &EmbeddingSet,
    strategy: &Strategy<'_>,
    granularity: FakeGranularity,
    seed: u64,
) -> Result<AnonymizedSet> {
    if let Strategy::None = strategy {
        return Ok(AnonymizedSet {
            set: set.clone(),
            total_attempts: 0,
            n_fakes: 0,
        });
    }
    let groups: Vec<(String, Vec<&Embedding>)> = match granularity {
        FakeGranularity::PerSpeaker => set
            .group_by_speaker()
            .into_iter()
            .map(|(s, g)| (s.to_string(), g))
            .collect(),
        FakeGranularity::PerUtterance => set
            .iter()
            .map(|e| (e.utterance_id().to_string(), vec![e]))
            .collect(),
    };
    let fakes = par::map_slice(&groups, |(label, members)| {
        let originals: Vec<&[f64]> = members.iter().map(|e| e.vector()).collect();
        let gender = members[0].gender();
        strategy.fake_for(gender, &originals, derive_seed(seed, &[label_tag(label)]))
    });

    let mut replacement: BTreeMap<&str, usize> = BTreeMap::new();
    let mut total_attempts = 0;
    let mut vectors = Vec::with_capacity(groups.len());
    for (gi, ((_, members), fake)) in groups.iter().zip(fakes).enumerate() {
        let (v, attempts) = fake?;
        total_attempts += u64::from(attempts);
        vectors.push(v);
        for e in members {
            replacement.insert(e.utterance_id(), gi);
        }
    }
    let embeddings = set
        .iter()
        .map(|e| e.with_vector(vectors[replacement[e.utterance_id()]].clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok(AnonymizedSet {
        set: EmbeddingSet::new(set.dimension(), embeddings)?,
        total_attempts,
        n_fakes: groups.len(),
    })
}
