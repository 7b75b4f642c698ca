use crate::error::{Error, Result};
use crate::par;
use crate::types::{cosine_from_parts, dot, squared_norm, EmbeddingSet};

/// Pairwise cosine similarities of one set of vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilaritySample {
    pub values: Vec<f64>,
    pub source_label: String,
}

impl SimilaritySample {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// All `n(n−1)/2` unordered-pair similarities, ordered by `(i, j)` with `i < j`.
pub fn cross_similarities(set: &EmbeddingSet) -> Result<SimilaritySample> {
    let values = cross_similarities_of(&set.vectors())?;
    Ok(SimilaritySample {
        values,
        source_label: String::new(),
    })
}

/// [`cross_similarities`] over raw vectors.
pub fn cross_similarities_of(vectors: &[&[f64]]) -> Result<Vec<f64>> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::invalid(format!(
            "cross similarities need at least 2 vectors, got {n}"
        )));
    }
    let norms: Vec<f64> = vectors.iter().map(|v| squared_norm(v)).collect();
    if let Some(i) = norms.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::invalid(format!("vector {i} has zero norm")));
    }
    Ok(par::flat_map_range(n, |i| {
        ((i + 1)..n)
            .map(|j| cosine_from_parts(dot(vectors[i], vectors[j]), norms[i], norms[j]))
            .collect()
    }))
}

fn check_sample(name: &str, s: &[f64]) -> Result<()> {
    if s.is_empty() {
        return Err(Error::invalid(format!("{name} sample is empty")));
    }
    if s.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid(format!("{name} sample contains NaN")));
    }
    Ok(())
}

/// Fraction of `sample` at or below `x`.
pub fn ecdf_eval(sample: &[f64], x: f64) -> Result<f64> {
    check_sample("eCDF", sample)?;
    Ok(sample.iter().filter(|&&v| v <= x).count() as f64 / sample.len() as f64)
}

/// `(x, F(x))` at every distinct sample value, ascending.
pub fn ecdf_points(sample: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_sample("eCDF", sample)?;
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in sorted.iter().enumerate() {
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = (i + 1) as f64 / n,
            _ => out.push((x, (i + 1) as f64 / n)),
        }
    }
    Ok(out)
}

/// Two-sample KS statistic `sup_x |F_a(x) − F_b(x)|`, evaluated exactly over
/// the merged support.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    check_sample("first", a)?;
    check_sample("second", b)?;
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Embedding, Gender};

    fn set(vs: &[&[f64]]) -> EmbeddingSet {
        EmbeddingSet::from_embeddings(
            vs.iter()
                .enumerate()
                .map(|(i, v)| Embedding::new(format!("u{i}"), "s", Gender::Male, v.to_vec()).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn cross_similarity_counts_and_values() {
        let s = cross_similarities(&set(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]])).unwrap();
        assert_eq!(s.values.len(), 3);
        assert_eq!(s.values[0], 0.0);
        let same = cross_similarities(&set(&[&[2.0, 1.0], &[2.0, 1.0], &[2.0, 1.0]])).unwrap();
        assert!(same.values.iter().all(|&v| v == 1.0));
        assert_eq!(cross_similarities(&set(&[&[1.0, 0.0], &[0.0, 3.0]])).unwrap().values, vec![0.0]);
        assert!(cross_similarities(&set(&[&[1.0]])).is_err());
    }

    #[test]
    fn ecdf_examples() {
        assert_eq!(ecdf_eval(&[1.0, 2.0, 3.0], 2.0).unwrap(), 2.0 / 3.0);
        assert_eq!(ecdf_eval(&[1.0, 2.0, 3.0], 0.5).unwrap(), 0.0);
        assert_eq!(ecdf_eval(&[1.0, 2.0, 3.0], 3.0).unwrap(), 1.0);
        assert_eq!(ecdf_eval(&[1.0, 1.0, 2.0], 1.0).unwrap(), 2.0 / 3.0);
        assert!(ecdf_eval(&[], 1.0).is_err());
        assert_eq!(ecdf_points(&[2.0, 1.0, 1.0]).unwrap(), vec![(1.0, 2.0 / 3.0), (2.0, 1.0)]);
    }

    #[test]
    fn ks_examples() {
        let a = [0.3, 0.1, 0.7];
        assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_statistic(&[1.0, 2.0], &[3.0, 4.0, 5.0]).unwrap(), 1.0);
        assert_eq!(ks_statistic(&[1.0, 2.0], &[1.5, 2.5]).unwrap(), 0.5);
        assert!(ks_statistic(&[], &[1.0]).is_err());
        assert!(ks_statistic(&[f64::NAN], &[1.0]).is_err());
    }
}
