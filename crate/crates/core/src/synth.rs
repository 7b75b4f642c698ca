//! Seeded synthetic speaker populations.
//!
//! Each gender gets its own set of mode centers on a sphere of radius
//! `between_speaker_scale`. A speaker mean is a random center of its gender
//! plus isotropic jitter, and each utterance is the speaker mean plus
//! isotropic noise. Noise scales are norm scales: per-coordinate standard
//! deviations are `scale / sqrt(dim)`, so the expected noise norm is close to
//! `scale` in any dimension.

use crate::error::{Error, Result};
use crate::rng::{derive_seed, SeededRng};
use crate::types::{Embedding, EmbeddingSet, Gender};

#[derive(Clone, Debug, PartialEq)]
pub struct PopulationSpec {
    pub n_speakers: usize,
    pub utterances_per_speaker: usize,
    pub dim: usize,
    /// Mode centers per gender.
    pub n_modes: usize,
    pub between_speaker_scale: f64,
    /// Spread of speaker means around their mode center.
    pub speaker_jitter_scale: f64,
    pub within_speaker_scale: f64,
    /// `(male, female)` fractions of speakers.
    pub gender_fractions: (f64, f64),
    pub seed: u64,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        Self {
            n_speakers: 500,
            utterances_per_speaker: 4,
            dim: 64,
            n_modes: 5,
            between_speaker_scale: 1.0,
            speaker_jitter_scale: 0.6,
            within_speaker_scale: 0.5,
            gender_fractions: (0.5, 0.5),
            seed: 0,
        }
    }
}

impl PopulationSpec {
    /// Validates the parameters and returns advisory warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.n_speakers == 0 || self.utterances_per_speaker == 0 || self.dim == 0 || self.n_modes == 0 {
            return Err(Error::invalid("population counts must all be at least 1"));
        }
        if !(self.between_speaker_scale > 0.0 && self.between_speaker_scale.is_finite()) {
            return Err(Error::invalid("between_speaker_scale must be positive"));
        }
        for (name, v) in [
            ("speaker_jitter_scale", self.speaker_jitter_scale),
            ("within_speaker_scale", self.within_speaker_scale),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be non-negative")));
            }
        }
        let (m, f) = self.gender_fractions;
        if !(m >= 0.0 && f >= 0.0 && ((m + f) - 1.0).abs() < 1e-9) {
            return Err(Error::invalid("gender fractions must be non-negative and sum to 1"));
        }
        let mut warnings = Vec::new();
        if self.within_speaker_scale >= self.between_speaker_scale {
            warnings.push(format!(
                "within_speaker_scale {} >= between_speaker_scale {}: speakers will not be separable",
                self.within_speaker_scale, self.between_speaker_scale
            ));
        }
        Ok(warnings)
    }
}

fn gaussian_vec(rng: &mut SeededRng, dim: usize, sd: f64) -> Vec<f64> {
    (0..dim).map(|_| sd * rng.standard_normal()).collect()
}

fn mode_centers(spec: &PopulationSpec, gender_tag: u64) -> Vec<Vec<f64>> {
    let mut rng = SeededRng::new(derive_seed(spec.seed, &[0xC0, gender_tag]));
    (0..spec.n_modes)
        .map(|_| loop {
            let v = gaussian_vec(&mut rng, spec.dim, 1.0);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                break v.iter().map(|x| x * spec.between_speaker_scale / norm).collect();
            }
        })
        .collect()
}

pub fn generate_population(spec: &PopulationSpec) -> Result<EmbeddingSet> {
    spec.validate()?;
    let n_male = ((spec.n_speakers as f64) * spec.gender_fractions.0).round() as usize;
    let mut genders: Vec<Gender> = (0..spec.n_speakers)
        .map(|i| if i < n_male { Gender::Male } else { Gender::Female })
        .collect();
    let mut rng = SeededRng::new(spec.seed);
    rng.shuffle(&mut genders);

    let male_modes = mode_centers(spec, 1);
    let female_modes = mode_centers(spec, 2);
    let sd_jitter = spec.speaker_jitter_scale / (spec.dim as f64).sqrt();
    let sd_within = spec.within_speaker_scale / (spec.dim as f64).sqrt();

    let width = spec.n_speakers.saturating_sub(1).to_string().len().max(4);
    let mut out = Vec::with_capacity(spec.n_speakers * spec.utterances_per_speaker);
    for (s, &gender) in genders.iter().enumerate() {
        let modes = if gender == Gender::Male { &male_modes } else { &female_modes };
        let center = &modes[rng.below(modes.len() as u64) as usize];
        let jitter = gaussian_vec(&mut rng, spec.dim, sd_jitter);
        let speaker_mean: Vec<f64> = center.iter().zip(&jitter).map(|(c, j)| c + j).collect();
        let spk = format!("spk{s:0width$}");
        for u in 0..spec.utterances_per_speaker {
            let noise = gaussian_vec(&mut rng, spec.dim, sd_within);
            let v = speaker_mean.iter().zip(&noise).map(|(m, n)| m + n).collect();
            out.push(Embedding::new(format!("{spk}-utt{u:02}"), spk.clone(), gender, v)?);
        }
    }
    EmbeddingSet::new(spec.dim, out)
}
