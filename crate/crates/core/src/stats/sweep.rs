//! Retained-variance × component-count sweep scored by the KS distance
//! between cross-similarity distributions of fakes and held-out vectors.

use crate::anonymizer::AnonymizerModel;
use crate::error::{Error, Result};
use crate::par;
use crate::rng::{derive_seed, label_tag, SeededRng};
use crate::stats::similarity::{cross_similarities, cross_similarities_of, ks_statistic};
use crate::types::{EmbeddingSet, Gender};

const FAKE_TAG: u64 = 0xFA4E;

#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub gender: Gender,
    pub retained_variance_target: f64,
    pub n_components: usize,
    /// `Err` holds the training error message for a failed cell.
    pub ks: std::result::Result<f64, String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn cell(&self, gender: Gender, variance: f64, k: usize) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.gender == gender && c.retained_variance_target == variance && c.n_components == k)
    }
}

/// Seed for one sweep cell, independent of evaluation order.
pub fn cell_seed(master: u64, variance: f64, k: usize, gender: Gender) -> u64 {
    derive_seed(master, &[variance.to_bits(), k as u64, label_tag(gender.as_str())])
}

/// Speaker-disjoint split: a seeded shuffle of the speaker list, with the
/// first `fraction` of speakers (at least one, leaving at least one) in the
/// training part. Both parts keep the input order.
pub fn speaker_split(set: &EmbeddingSet, fraction: f64, seed: u64) -> Result<(EmbeddingSet, EmbeddingSet)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("split fraction {fraction} outside (0, 1)")));
    }
    let mut speakers: Vec<&str> = set.speakers();
    if speakers.len() < 2 {
        return Err(Error::invalid("speaker split needs at least two speakers"));
    }
    speakers.sort_unstable();
    SeededRng::new(seed).shuffle(&mut speakers);
    let n_train = ((speakers.len() as f64 * fraction).round() as usize).clamp(1, speakers.len() - 1);
    let train_speakers: std::collections::HashSet<&str> = speakers[..n_train].iter().copied().collect();
    let train = set.filter(|e| train_speakers.contains(e.speaker_id()));
    let test = set.filter(|e| !train_speakers.contains(e.speaker_id()));
    Ok((train, test))
}

/// KS distance between the cross-similarities of `n` fakes from `model` and
/// those of `reference`.
pub fn fake_vs_reference_ks(model: &AnonymizerModel, reference: &EmbeddingSet, seed: u64) -> Result<f64> {
    let fakes = model.generate_fakes(reference.len(), seed);
    let fake_refs: Vec<&[f64]> = fakes.iter().map(Vec::as_slice).collect();
    let fake_sims = cross_similarities_of(&fake_refs)?;
    let ref_sims = cross_similarities(reference)?;
    ks_statistic(&fake_sims, &ref_sims.values)
}

/// Runs every `(gender, variance, K)` cell. Each gender stratum is split once
/// (speaker-disjoint, `split_fraction` for training); cells train on the
/// training part and compare as many fakes as there are test vectors.
pub fn parameter_sweep(
    pool: &EmbeddingSet,
    variance_targets: &[f64],
    component_counts: &[usize],
    split_fraction: f64,
    seed: u64,
) -> Result<SweepResult> {
    let max_k = component_counts.iter().copied().max().unwrap_or(0);
    if variance_targets.is_empty() || component_counts.is_empty() {
        return Err(Error::invalid("sweep needs at least one variance target and component count"));
    }
    if pool.len() < 2 * max_k {
        return Err(Error::invalid(format!(
            "pool of {} vectors is smaller than 2 × max components ({max_k})",
            pool.len()
        )));
    }

    let mut splits = Vec::new();
    for (gender, stratum) in pool.by_gender() {
        let split_seed = derive_seed(seed, &[label_tag("split"), label_tag(gender.as_str())]);
        splits.push((gender, speaker_split(&stratum, split_fraction, split_seed)?));
    }

    let mut jobs = Vec::new();
    for (si, (gender, _)) in splits.iter().enumerate() {
        for &v in variance_targets {
            for &k in component_counts {
                jobs.push((si, *gender, v, k));
            }
        }
    }
    let cells = par::map_slice(&jobs, |&(si, gender, variance, k)| {
        let (train, test) = &splits[si].1;
        let cs = cell_seed(seed, variance, k, gender);
        let ks = AnonymizerModel::train_for(train, gender, variance, k, cs)
            .and_then(|m| fake_vs_reference_ks(&m, test, derive_seed(cs, &[FAKE_TAG])))
            .map_err(|e| e.to_string());
        SweepCell {
            gender,
            retained_variance_target: variance,
            n_components: k,
            ks,
        }
    });
    Ok(SweepResult { cells })
}
