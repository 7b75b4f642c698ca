//! Attacker linkage scenarios: score enrollment against trial utterances by
//! cosine similarity after optionally anonymizing either side.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::par;
use crate::rng::derive_seed;
use crate::stats::metrics::ScoreSet;
use crate::strategy::{anonymize_set, FakeGranularity, Strategy};
use crate::types::{cosine_from_parts, dot, squared_norm, EmbeddingSet};

const ENROLL_SIDE: u64 = 0xE;
const TRIAL_SIDE: u64 = 0x7;

/// Which sides are anonymized: `o` = original, `a` = anonymized (enroll, trial).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scenario {
    Oo,
    Oa,
    Aa,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Oo => "oo",
            Scenario::Oa => "oa",
            Scenario::Aa => "aa",
        }
    }

    fn anonymizes_enroll(self) -> bool {
        self == Scenario::Aa
    }

    fn anonymizes_trial(self) -> bool {
        self != Scenario::Oo
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oo" => Ok(Scenario::Oo),
            "oa" => Ok(Scenario::Oa),
            "aa" => Ok(Scenario::Aa),
            other => Err(Error::invalid(format!("unknown scenario `{other}`"))),
        }
    }
}

/// Scores every enrollment × trial utterance pair. Anonymized sides get one
/// fake per speaker; the two sides use independent seeds.
pub fn linkage_scenario(
    enroll: &EmbeddingSet,
    trial: &EmbeddingSet,
    scenario: Scenario,
    strategy: &Strategy<'_>,
    seed: u64,
) -> Result<ScoreSet> {
    if enroll.dimension() != trial.dimension() {
        return Err(Error::invalid("enrollment and trial dimensions differ"));
    }
    let side = |set: &EmbeddingSet, anonymize: bool, tag: u64| -> Result<EmbeddingSet> {
        if anonymize {
            Ok(anonymize_set(set, strategy, FakeGranularity::PerSpeaker, derive_seed(seed, &[tag]))?.set)
        } else {
            Ok(set.clone())
        }
    };
    let enroll = side(enroll, scenario.anonymizes_enroll(), ENROLL_SIDE)?;
    let trial = side(trial, scenario.anonymizes_trial(), TRIAL_SIDE)?;
    score_pairs(&enroll, &trial)
}

/// Cosine scores of all enrollment × trial pairs, split by speaker identity.
pub fn score_pairs(enroll: &EmbeddingSet, trial: &EmbeddingSet) -> Result<ScoreSet> {
    let trial_norms: Vec<f64> = trial.iter().map(|t| squared_norm(t.vector())).collect();
    let rows = par::map_slice(enroll.embeddings(), |e| {
        let en = squared_norm(e.vector());
        let mut genuine = Vec::new();
        let mut impostor = Vec::new();
        for (t, &tn) in trial.iter().zip(&trial_norms) {
            let s = cosine_from_parts(dot(e.vector(), t.vector()), en, tn);
            if e.speaker_id() == t.speaker_id() {
                genuine.push(s);
            } else {
                impostor.push(s);
            }
        }
        (genuine, impostor)
    });
    let mut scores = ScoreSet::default();
    for (g, i) in rows {
        scores.genuine.extend(g);
        scores.impostor.extend(i);
    }
    if scores.genuine.is_empty() {
        return Err(Error::invalid("no enrollment/trial pairs share a speaker id"));
    }
    if scores.impostor.is_empty() {
        return Err(Error::invalid("no impostor pairs: need at least two speakers"));
    }
    Ok(scores)
}

/// Splits each speaker's utterances into enrollment (first half, rounded up)
/// and trial (rest). Speakers with a single utterance go to enrollment only.
pub fn enroll_trial_split(set: &EmbeddingSet) -> Result<(EmbeddingSet, EmbeddingSet)> {
    let mut enroll = Vec::new();
    let mut trial = Vec::new();
    for (_, utts) in set.group_by_speaker() {
        let cut = utts.len().div_ceil(2);
        enroll.extend(utts[..cut].iter().map(|e| (*e).clone()));
        trial.extend(utts[cut..].iter().map(|e| (*e).clone()));
    }
    Ok((
        EmbeddingSet::new(set.dimension(), enroll)?,
        EmbeddingSet::new(set.dimension(), trial)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Embedding, Gender};

    fn labeled(rows: &[(&str, &str, [f64; 2])]) -> EmbeddingSet {
        EmbeddingSet::from_embeddings(
            rows.iter()
                .map(|(u, s, v)| Embedding::new(*u, *s, Gender::Male, v.to_vec()).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn pair_counts_follow_labels() {
        let enroll = labeled(&[("e1", "a", [1.0, 0.0]), ("e2", "a", [1.0, 0.1]), ("e3", "b", [0.0, 1.0])]);
        let trial = labeled(&[("t1", "a", [1.0, 0.2]), ("t2", "b", [0.1, 1.0]), ("t3", "c", [1.0, 1.0])]);
        let s = linkage_scenario(&enroll, &trial, Scenario::Oo, &Strategy::None, 0).unwrap();
        // a: 2 enroll × 1 trial, b: 1 × 1
        assert_eq!(s.genuine.len(), 3);
        assert_eq!(s.impostor.len(), 9 - 3);
    }

    #[test]
    fn oa_without_anonymization_is_oo() {
        let enroll = labeled(&[("e1", "a", [1.0, 0.0]), ("e2", "b", [0.0, 1.0])]);
        let trial = labeled(&[("t1", "a", [1.0, 0.2]), ("t2", "b", [0.3, 1.0])]);
        let oo = linkage_scenario(&enroll, &trial, Scenario::Oo, &Strategy::None, 1).unwrap();
        let oa = linkage_scenario(&enroll, &trial, Scenario::Oa, &Strategy::None, 1).unwrap();
        assert_eq!(oo, oa);
    }

    #[test]
    fn no_shared_speakers_is_an_error() {
        let enroll = labeled(&[("e1", "a", [1.0, 0.0])]);
        let trial = labeled(&[("t1", "b", [1.0, 0.2])]);
        assert!(linkage_scenario(&enroll, &trial, Scenario::Oo, &Strategy::None, 0).is_err());
    }

    #[test]
    fn enroll_trial_split_halves_speakers() {
        let set = labeled(&[
            ("1", "a", [1.0, 0.0]),
            ("2", "a", [1.0, 0.1]),
            ("3", "a", [1.0, 0.2]),
            ("4", "b", [0.0, 1.0]),
            ("5", "b", [0.1, 1.0]),
        ]);
        let (e, t) = enroll_trial_split(&set).unwrap();
        assert_eq!(e.len(), 3);
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn scenario_parse_round_trip() {
        for s in [Scenario::Oo, Scenario::Oa, Scenario::Aa] {
            assert_eq!(s.as_str().parse::<Scenario>().unwrap(), s);
        }
        assert!("ao".parse::<Scenario>().is_err());
    }
}
