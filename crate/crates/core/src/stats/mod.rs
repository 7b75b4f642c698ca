//! Evaluation: cross-similarity distributions, KS distances, linkage metrics
//! and parameter sweeps.

pub mod linkage;
pub mod metrics;
pub mod report;
pub mod similarity;
pub mod sweep;

pub use linkage::{linkage_scenario, Scenario};
pub use metrics::{cllr, cllr_min, eer, ScoreSet};
pub use similarity::{cross_similarities, ecdf_eval, ecdf_points, ks_statistic, SimilaritySample};
pub use sweep::{parameter_sweep, speaker_split, SweepCell, SweepResult};
