//! Fake-embedding generation: GMM sample in PCA space, mapped back through the
//! inverse transform. Also hosts forced dissimilarity, the pool-averaging
//! baseline generator, and model persistence.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::gmm::{self, GmmConfig, GmmModel};
use crate::io::write_atomic;
use crate::pca::{self, PcaModel};
use crate::rng::{derive_seed, SeededRng, RNG_ALGORITHM};
use crate::types::{cosine_similarity, dot, squared_norm, cosine_from_parts, EmbeddingSet, Gender};

pub const FORMAT_VERSION: &str = "1";
pub const DEFAULT_RETAINED_VARIANCE: f64 = 0.95;
pub const DEFAULT_COMPONENTS: usize = 20;
pub const DEFAULT_FD_THRESHOLD: f64 = 0.8;
pub const DEFAULT_MAX_ATTEMPTS: u32 = 100;
pub const DEFAULT_N_FAR: usize = 200;
pub const DEFAULT_N_AVG: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub n_training_vectors: usize,
    pub retained_variance_target: f64,
    pub n_components: usize,
    pub seed: u64,
    pub format_version: String,
}

/// PCA + GMM pair for one gender stratum. Holds no training rows.
#[derive(Clone, Debug, PartialEq)]
pub struct AnonymizerModel {
    gender: Gender,
    pca: PcaModel,
    gmm: GmmModel,
    metadata: TrainingMetadata,
}

/// Forced-dissimilarity settings: a fake is accepted only when its cosine
/// similarity to the original is strictly below `similarity_threshold`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdConfig {
    pub similarity_threshold: f64,
    pub max_attempts: u32,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self {
            similarity_threshold: DEFAULT_FD_THRESHOLD,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

impl FdConfig {
    pub fn new(similarity_threshold: f64, max_attempts: u32) -> Result<Self> {
        if !(similarity_threshold > -1.0 && similarity_threshold <= 1.0) {
            return Err(Error::invalid(format!(
                "similarity threshold {similarity_threshold} outside (-1, 1]"
            )));
        }
        if max_attempts == 0 {
            return Err(Error::invalid("max_attempts must be at least 1"));
        }
        Ok(Self {
            similarity_threshold,
            max_attempts,
        })
    }
}

/// Accepted fake plus how many draws it took.
#[derive(Clone, Debug, PartialEq)]
pub struct FdOutcome {
    pub vector: Vec<f64>,
    pub attempts: u32,
    pub similarity: f64,
}

/// Seed for the `attempt`-th forced-dissimilarity draw. Attempt 0 uses the
/// caller's seed unchanged, so an always-accepting threshold reproduces
/// [`AnonymizerModel::generate_fake`].
pub fn attempt_seed(seed: u64, attempt: u32) -> u64 {
    if attempt == 0 {
        seed
    } else {
        derive_seed(seed, &[0xFD, u64::from(attempt)])
    }
}

impl AnonymizerModel {
    /// Fits PCA on `pool`, then a GMM on the reduced pool. The pool should be
    /// a single gender stratum; its majority gender labels the model.
    pub fn train(
        pool: &EmbeddingSet,
        retained_variance_target: f64,
        n_components: usize,
        seed: u64,
    ) -> Result<Self> {
        let gender = dominant_gender(pool);
        Self::train_for(pool, gender, retained_variance_target, n_components, seed)
    }

    pub fn train_for(
        pool: &EmbeddingSet,
        gender: Gender,
        retained_variance_target: f64,
        n_components: usize,
        seed: u64,
    ) -> Result<Self> {
        Self::train_with(pool, gender, retained_variance_target, &GmmConfig::new(n_components, seed))
    }

    /// Like [`train_for`](Self::train_for) with full control over EM.
    pub fn train_with(
        pool: &EmbeddingSet,
        gender: Gender,
        retained_variance_target: f64,
        config: &GmmConfig,
    ) -> Result<Self> {
        let n_components = config.n_components;
        if n_components == 0 {
            return Err(Error::invalid("n_components must be at least 1"));
        }
        if pool.len() < n_components.max(2) {
            return Err(Error::invalid(format!(
                "pool of {} vectors is too small for {n_components} components",
                pool.len()
            )));
        }
        let pca = pca::fit(pool, retained_variance_target)?;
        let reduced = pca.transform_all(pool.vectors())?;
        let gmm = gmm::fit(&reduced, config)?;
        Ok(Self {
            gender,
            pca,
            gmm,
            metadata: TrainingMetadata {
                n_training_vectors: pool.len(),
                retained_variance_target,
                n_components,
                seed: config.seed,
                format_version: FORMAT_VERSION.to_string(),
            },
        })
    }

    pub fn from_parts(gender: Gender, pca: PcaModel, gmm: GmmModel, metadata: TrainingMetadata) -> Result<Self> {
        if gmm.dim() != pca.reduced_dim() {
            return Err(Error::Format(format!(
                "gmm.dim {} != pca.reduced_dim {}",
                gmm.dim(),
                pca.reduced_dim()
            )));
        }
        if metadata.n_components != gmm.n_components() {
            return Err(Error::Format(format!(
                "training_metadata.n_components {} != gmm.n_components {}",
                metadata.n_components,
                gmm.n_components()
            )));
        }
        if metadata.retained_variance_target != pca.retained_variance_target() {
            return Err(Error::Format(
                "training_metadata.retained_variance_target disagrees with pca".into(),
            ));
        }
        Ok(Self {
            gender,
            pca,
            gmm,
            metadata,
        })
    }

    pub fn gender(&self) -> Gender {
        self.gender
    }

    pub fn pca(&self) -> &PcaModel {
        &self.pca
    }

    pub fn gmm(&self) -> &GmmModel {
        &self.gmm
    }

    pub fn metadata(&self) -> &TrainingMetadata {
        &self.metadata
    }

    pub fn input_dim(&self) -> usize {
        self.pca.input_dim()
    }

    /// `n` fakes from one random stream.
    pub fn generate_fakes(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        self.gmm
            .sample(n, seed)
            .iter()
            .map(|z| self.pca.inverse_transform(z).expect("gmm.dim == pca.reduced_dim"))
            .collect()
    }

    pub fn generate_fake(&self, seed: u64) -> Vec<f64> {
        self.generate_fakes(1, seed).pop().expect("one sample")
    }

    /// Redraws until the fake's cosine similarity to `original` is below the
    /// threshold.
    pub fn generate_fake_fd(&self, original: &[f64], config: &FdConfig, seed: u64) -> Result<FdOutcome> {
        self.generate_fake_fd_multi(&[original], config, seed)
    }

    /// Forced dissimilarity against several originals at once (for example
    /// all utterances of one speaker): a fake is accepted only when it is
    /// below the threshold for every one of them.
    pub fn generate_fake_fd_multi(&self, originals: &[&[f64]], config: &FdConfig, seed: u64) -> Result<FdOutcome> {
        if originals.is_empty() {
            return Err(Error::invalid("forced dissimilarity needs an original"));
        }
        let mut norms = Vec::with_capacity(originals.len());
        for o in originals {
            if o.len() != self.input_dim() {
                return Err(Error::invalid(format!(
                    "original has dimension {}, model expects {}",
                    o.len(),
                    self.input_dim()
                )));
            }
            let n = squared_norm(o);
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::invalid("original must be finite with nonzero norm"));
            }
            norms.push(n);
        }
        let mut last = f64::NAN;
        for attempt in 0..config.max_attempts {
            let fake = self.generate_fake(attempt_seed(seed, attempt));
            let fake_norm = squared_norm(&fake);
            let worst = originals
                .iter()
                .zip(&norms)
                .map(|(o, &n)| cosine_from_parts(dot(&fake, o), fake_norm, n))
                .fold(f64::NEG_INFINITY, f64::max);
            last = worst;
            if worst < config.similarity_threshold {
                return Ok(FdOutcome {
                    vector: fake,
                    attempts: attempt + 1,
                    similarity: worst,
                });
            }
        }
        Err(Error::RejectionExhausted {
            attempts: config.max_attempts,
            last_similarity: last,
        })
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format_version: FORMAT_VERSION.to_string(),
            gender: self.gender,
            pca: PcaFile {
                input_dim: self.pca.input_dim(),
                reduced_dim: self.pca.reduced_dim(),
                mean: self.pca.mean().to_vec(),
                components: (0..self.pca.reduced_dim())
                    .map(|i| self.pca.component(i).to_vec())
                    .collect(),
                explained_variance_ratio: self.pca.explained_variance_ratio().to_vec(),
                retained_variance_target: self.pca.retained_variance_target(),
            },
            gmm: GmmFile {
                n_components: self.gmm.n_components(),
                dim: self.gmm.dim(),
                weights: self.gmm.weights().to_vec(),
                means: (0..self.gmm.n_components()).map(|k| self.gmm.mean(k).to_vec()).collect(),
                variances: (0..self.gmm.n_components())
                    .map(|k| self.gmm.variance(k).to_vec())
                    .collect(),
                final_log_likelihood: self.gmm.final_log_likelihood(),
                n_iterations_run: self.gmm.n_iterations_run(),
            },
            training_metadata: self.metadata.clone(),
            rng_algorithm: RNG_ALGORITHM.to_string(),
        };
        let mut buf = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, SeventeenDigits::default());
        file.serialize(&mut ser).expect("model serializes");
        let mut text = String::from_utf8(buf).expect("JSON is UTF-8");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        check_required_fields(&value)?;
        let version = value["format_version"].as_str().unwrap_or_default();
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported format_version `{version}` (expected `{FORMAT_VERSION}`)"
            )));
        }
        let rng = value["rng_algorithm"].as_str().unwrap_or_default();
        if rng != RNG_ALGORITHM {
            return Err(Error::Format(format!(
                "model was written with rng_algorithm `{rng}`, this build uses `{RNG_ALGORITHM}`"
            )));
        }
        let file: ModelFile = serde_json::from_value(value).map_err(|e| Error::Format(e.to_string()))?;
        if file.pca.components.len() != file.pca.reduced_dim || file.pca.mean.len() != file.pca.input_dim {
            return Err(Error::Format("pca shape fields disagree with arrays".into()));
        }
        if file.gmm.weights.len() != file.gmm.n_components || file.gmm.means.first().map(Vec::len) != Some(file.gmm.dim) {
            return Err(Error::Format("gmm shape fields disagree with arrays".into()));
        }
        let as_format = |e: Error| Error::Format(e.to_string());
        let pca = PcaModel::from_parts(
            file.pca.mean,
            file.pca.components,
            file.pca.explained_variance_ratio,
            file.pca.retained_variance_target,
        )
        .map_err(as_format)?;
        let gmm = GmmModel::from_parts(
            file.gmm.weights,
            file.gmm.means,
            file.gmm.variances,
            file.gmm.final_log_likelihood,
            file.gmm.n_iterations_run,
        )
        .map_err(as_format)?;
        Self::from_parts(file.gender, pca, gmm, file.training_metadata)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn dominant_gender(pool: &EmbeddingSet) -> Gender {
    let strata = pool.by_gender();
    match strata.len() {
        1 => *strata.keys().next().expect("one stratum"),
        _ => Gender::Unspecified,
    }
}

const REQUIRED_FIELDS: &[&str] = &[
    "format_version",
    "gender",
    "pca",
    "pca.input_dim",
    "pca.reduced_dim",
    "pca.mean",
    "pca.components",
    "pca.explained_variance_ratio",
    "pca.retained_variance_target",
    "gmm",
    "gmm.n_components",
    "gmm.dim",
    "gmm.weights",
    "gmm.means",
    "gmm.variances",
    "gmm.final_log_likelihood",
    "gmm.n_iterations_run",
    "training_metadata",
    "rng_algorithm",
];

fn check_required_fields(value: &Value) -> Result<()> {
    for path in REQUIRED_FIELDS {
        let mut cur = value;
        for part in path.split('.') {
            cur = cur
                .get(part)
                .ok_or_else(|| Error::Format(format!("missing field `{path}`")))?;
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: String,
    gender: Gender,
    pca: PcaFile,
    gmm: GmmFile,
    training_metadata: TrainingMetadata,
    rng_algorithm: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PcaFile {
    input_dim: usize,
    reduced_dim: usize,
    mean: Vec<f64>,
    components: Vec<Vec<f64>>,
    explained_variance_ratio: Vec<f64>,
    retained_variance_target: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GmmFile {
    n_components: usize,
    dim: usize,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
    final_log_likelihood: f64,
    n_iterations_run: usize,
}

/// Pretty JSON with every float written as 17 significant digits.
#[derive(Default)]
struct SeventeenDigits<'a> {
    inner: serde_json::ser::PrettyFormatter<'a>,
}

impl serde_json::ser::Formatter for SeventeenDigits<'_> {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(crate::io::fmt_f64(value).as_bytes())
    }

    fn begin_array<W: ?Sized + std::io::Write>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.inner.begin_array(writer)
    }
    fn end_array<W: ?Sized + std::io::Write>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.inner.end_array(writer)
    }
    fn begin_array_value<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, first: bool) -> std::io::Result<()> {
        self.inner.begin_array_value(writer, first)
    }
    fn end_array_value<W: ?Sized + std::io::Write>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.inner.end_array_value(writer)
    }
    fn begin_object<W: ?Sized + std::io::Write>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.inner.begin_object(writer)
    }
    fn end_object<W: ?Sized + std::io::Write>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.inner.end_object(writer)
    }
    fn begin_object_key<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, first: bool) -> std::io::Result<()> {
        self.inner.begin_object_key(writer, first)
    }
    fn begin_object_value<W: ?Sized + std::io::Write>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.inner.begin_object_value(writer)
    }
    fn end_object_value<W: ?Sized + std::io::Write>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.inner.end_object_value(writer)
    }
}

/// Which pool vectors count as "far" from the original.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FarMetric {
    #[default]
    Cosine,
    Euclidean,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BaselineConfig {
    pub n_far: usize,
    pub n_avg: usize,
    pub metric: FarMetric,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            n_far: DEFAULT_N_FAR,
            n_avg: DEFAULT_N_AVG,
            metric: FarMetric::Cosine,
        }
    }
}

/// Pool-averaging generator: rank the pool by distance from `original`, keep
/// the `n_far` farthest, and average a random `n_avg` of those.
pub fn baseline_anonymize(
    pool: &EmbeddingSet,
    original: &[f64],
    config: &BaselineConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let BaselineConfig { n_far, n_avg, metric } = *config;
    if n_avg == 0 || n_avg > n_far {
        return Err(Error::invalid(format!(
            "need 1 <= n_avg <= n_far, got n_avg={n_avg}, n_far={n_far}"
        )));
    }
    if pool.len() < n_far {
        return Err(Error::invalid(format!(
            "pool has {} vectors, fewer than n_far={n_far}",
            pool.len()
        )));
    }
    if original.len() != pool.dimension() {
        return Err(Error::invalid(format!(
            "original has dimension {}, pool has {}",
            original.len(),
            pool.dimension()
        )));
    }
    let mut distances: Vec<(f64, usize)> = pool
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let d = match metric {
                FarMetric::Cosine => cosine_similarity(e.vector(), original).map(|s| 1.0 - s),
                FarMetric::Euclidean => Ok(e
                    .vector()
                    .iter()
                    .zip(original)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt()),
            };
            d.map(|d| (d, i))
        })
        .collect::<Result<_>>()?;
    distances.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let far: Vec<usize> = distances[..n_far].iter().map(|&(_, i)| i).collect();

    let mut rng = SeededRng::new(seed);
    let picked = rng.sample_without_replacement(n_far, n_avg);
    let mut avg = vec![0.0; pool.dimension()];
    for &p in &picked {
        for (a, x) in avg.iter_mut().zip(pool.embeddings()[far[p]].vector()) {
            *a += x;
        }
    }
    avg.iter_mut().for_each(|a| *a /= n_avg as f64);
    Ok(avg)
}
