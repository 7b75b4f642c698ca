//! Embedding records, gender strata and cosine similarity.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    Unspecified,
}

impl Gender {
    pub const ALL: [Gender; 3] = [Gender::Male, Gender::Female, Gender::Unspecified];

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Unspecified => "unspecified",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" => Ok(Gender::Male),
            "female" | "f" => Ok(Gender::Female),
            "unspecified" | "u" | "" => Ok(Gender::Unspecified),
            other => Err(Error::invalid(format!("unknown gender `{other}`"))),
        }
    }
}

/// One labeled speaker embedding. The vector is finite with nonzero norm.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    utterance_id: String,
    speaker_id: String,
    gender: Gender,
    vector: Vec<f64>,
}

impl Embedding {
    pub fn new(
        utterance_id: impl Into<String>,
        speaker_id: impl Into<String>,
        gender: Gender,
        vector: Vec<f64>,
    ) -> Result<Self> {
        let utterance_id = utterance_id.into();
        check_vector(&vector).map_err(|e| match e {
            Error::InvalidInput(msg) => Error::invalid(format!("{utterance_id}: {msg}")),
            other => other,
        })?;
        Ok(Self {
            utterance_id,
            speaker_id: speaker_id.into(),
            gender,
            vector,
        })
    }

    pub fn utterance_id(&self) -> &str {
        &self.utterance_id
    }

    pub fn speaker_id(&self) -> &str {
        &self.speaker_id
    }

    pub fn gender(&self) -> Gender {
        self.gender
    }

    pub fn vector(&self) -> &[f64] {
        &self.vector
    }

    /// Same labels, new vector.
    pub fn with_vector(&self, vector: Vec<f64>) -> Result<Self> {
        Embedding::new(
            self.utterance_id.clone(),
            self.speaker_id.clone(),
            self.gender,
            vector,
        )
    }
}

fn check_vector(v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::invalid("empty vector"));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("non-finite entry at index {i}")));
    }
    if squared_norm(v) == 0.0 {
        return Err(Error::invalid("zero-norm vector"));
    }
    Ok(())
}

/// Ordered embeddings of one common dimension with unique utterance ids.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    dimension: usize,
    embeddings: Vec<Embedding>,
}

impl EmbeddingSet {
    pub fn new(dimension: usize, embeddings: Vec<Embedding>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        let mut seen = HashSet::with_capacity(embeddings.len());
        for e in &embeddings {
            if e.vector.len() != dimension {
                return Err(Error::invalid(format!(
                    "{}: dimension {} != set dimension {dimension}",
                    e.utterance_id,
                    e.vector.len()
                )));
            }
            if !seen.insert(e.utterance_id.as_str()) {
                return Err(Error::invalid(format!(
                    "duplicate utterance id `{}`",
                    e.utterance_id
                )));
            }
        }
        Ok(Self {
            dimension,
            embeddings,
        })
    }

    /// Builds a set whose dimension comes from the first embedding.
    pub fn from_embeddings(embeddings: Vec<Embedding>) -> Result<Self> {
        let dim = embeddings
            .first()
            .map(|e| e.vector.len())
            .ok_or_else(|| Error::invalid("cannot infer dimension of an empty set"))?;
        Self::new(dim, embeddings)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn embeddings(&self) -> &[Embedding] {
        &self.embeddings
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Embedding> {
        self.embeddings.iter()
    }

    pub fn vectors(&self) -> Vec<&[f64]> {
        self.embeddings.iter().map(|e| e.vector()).collect()
    }

    pub fn into_embeddings(self) -> Vec<Embedding> {
        self.embeddings
    }

    /// Subset keeping order.
    pub fn filter(&self, mut keep: impl FnMut(&Embedding) -> bool) -> EmbeddingSet {
        EmbeddingSet {
            dimension: self.dimension,
            embeddings: self.embeddings.iter().filter(|e| keep(e)).cloned().collect(),
        }
    }

    /// Splits the set into gender strata, each keeping the original order.
    pub fn by_gender(&self) -> BTreeMap<Gender, EmbeddingSet> {
        let mut out: BTreeMap<Gender, EmbeddingSet> = BTreeMap::new();
        for e in &self.embeddings {
            out.entry(e.gender)
                .or_insert_with(|| EmbeddingSet {
                    dimension: self.dimension,
                    embeddings: Vec::new(),
                })
                .embeddings
                .push(e.clone());
        }
        out
    }

    /// Distinct speaker ids in order of first appearance.
    pub fn speakers(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.embeddings
            .iter()
            .map(|e| e.speaker_id.as_str())
            .filter(|s| seen.insert(*s))
            .collect()
    }

    /// Utterances grouped per speaker, speakers in order of first appearance.
    pub fn group_by_speaker(&self) -> Vec<(&str, Vec<&Embedding>)> {
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        let mut groups: Vec<(&str, Vec<&Embedding>)> = Vec::new();
        for e in &self.embeddings {
            let slot = *index.entry(e.speaker_id.as_str()).or_insert_with(|| {
                groups.push((e.speaker_id.as_str(), Vec::new()));
                groups.len() - 1
            });
            groups[slot].1.push(e);
        }
        groups
    }
}

impl<'a> IntoIterator for &'a EmbeddingSet {
    type Item = &'a Embedding;
    type IntoIter = std::slice::Iter<'a, Embedding>;

    fn into_iter(self) -> Self::IntoIter {
        self.embeddings.iter()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn squared_norm(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Cosine similarity from a dot product and two squared norms, clamped to `[-1, 1]`.
#[inline]
pub(crate) fn cosine_from_parts(dot: f64, sq_norm_a: f64, sq_norm_b: f64) -> f64 {
    (dot / (sq_norm_a * sq_norm_b).sqrt()).clamp(-1.0, 1.0)
}

/// ⟨a,b⟩ / (‖a‖‖b‖). Fails on length mismatch or a zero-norm argument.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (squared_norm(a), squared_norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::invalid("cosine similarity of a zero-norm vector"));
    }
    Ok(cosine_from_parts(dot(a, b), na, nb))
}

/// Element-wise mean of equally sized vectors.
pub(crate) fn mean_vector<'a>(vectors: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    let mut n = 0usize;
    for v in vectors {
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
        n += 1;
    }
    let inv = 1.0 / n as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    acc
}
