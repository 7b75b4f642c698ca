//! Distribution-preserving anonymization of speaker embeddings.
//!
//! Fake embeddings are drawn from a diagonal-covariance GMM fitted in a PCA
//! subspace of a population of real embeddings, then mapped back to the full
//! embedding space. The crate also provides the pool-averaging baseline
//! generator, forced dissimilarity, and the evaluation tools used to compare
//! them (cross-similarity KS statistics, EER, Cllr and Cllr_min).
//!
//! Data-parallel loops run on rayon when the default `parallel` feature is
//! on and sequentially otherwise; results are bit-identical either way.

pub mod anonymizer;
pub mod error;
pub mod gmm;
pub mod io;
pub mod par;
pub mod pca;
pub mod rng;
pub mod stats;
pub mod strategy;
pub mod synth;
pub mod types;

pub use anonymizer::{baseline_anonymize, AnonymizerModel, BaselineConfig, FdConfig, FdOutcome};
pub use error::{Error, Result};
pub use gmm::{GmmConfig, GmmModel};
pub use io::{read_embeddings, write_embeddings, EmbeddingFormat};
pub use pca::PcaModel;
pub use types::{cosine_similarity, Embedding, EmbeddingSet, Gender};
