//! Principal-component transform with a retained-variance target.
//!
//! The basis comes from the SVD of the mean-centered data matrix; component
//! variances use the unbiased `n - 1` denominator and explained-variance
//! ratios are taken over all `min(D, n - 1)` components.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::types::EmbeddingSet;

/// Components whose variance falls below this fraction of the largest are
/// treated as numerically zero and never retained.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Slack when comparing a cumulative ratio against the target, so that a
/// target of exactly 1.0 is reachable despite rounding in the ratio sums.
pub const COVERAGE_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    pub(crate) input_dim: usize,
    pub(crate) reduced_dim: usize,
    pub(crate) mean: Vec<f64>,
    /// `reduced_dim × input_dim`, row-major, rows orthonormal.
    pub(crate) components: Vec<f64>,
    pub(crate) explained_variance_ratio: Vec<f64>,
    pub(crate) retained_variance_target: f64,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn reduced_dim(&self) -> usize {
        self.reduced_dim
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.components[i * self.input_dim..(i + 1) * self.input_dim]
    }

    /// Row-major `reduced_dim × input_dim` basis.
    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn explained_variance_ratio(&self) -> &[f64] {
        &self.explained_variance_ratio
    }

    pub fn retained_variance_target(&self) -> f64 {
        self.retained_variance_target
    }

    /// Assembles a model from stored parts, checking shapes and orthonormality.
    pub fn from_parts(
        mean: Vec<f64>,
        components: Vec<Vec<f64>>,
        explained_variance_ratio: Vec<f64>,
        retained_variance_target: f64,
    ) -> Result<Self> {
        let input_dim = mean.len();
        let reduced_dim = components.len();
        if input_dim == 0 || reduced_dim == 0 || reduced_dim > input_dim {
            return Err(Error::invalid(format!(
                "bad PCA shape: {reduced_dim} components of dimension {input_dim}"
            )));
        }
        if components.iter().any(|r| r.len() != input_dim) {
            return Err(Error::invalid("PCA component row length != input_dim"));
        }
        if explained_variance_ratio.len() != reduced_dim {
            return Err(Error::invalid("explained_variance_ratio length != reduced_dim"));
        }
        if !(retained_variance_target > 0.0 && retained_variance_target <= 1.0) {
            return Err(Error::invalid("retained_variance_target must be in (0, 1]"));
        }
        let model = PcaModel {
            input_dim,
            reduced_dim,
            mean,
            components: components.concat(),
            explained_variance_ratio,
            retained_variance_target,
        };
        if model.mean.iter().chain(&model.components).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite PCA parameter"));
        }
        let err = model.orthonormality_error();
        if err > 1e-8 {
            return Err(Error::invalid(format!(
                "PCA components are not orthonormal (max deviation {err:e})"
            )));
        }
        Ok(model)
    }

    /// Max |C·Cᵀ − I| entry.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.reduced_dim {
            for j in 0..=i {
                let d: f64 = self
                    .component(i)
                    .iter()
                    .zip(self.component(j))
                    .map(|(a, b)| a * b)
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((d - target).abs());
            }
        }
        worst
    }

    /// `components · (x − mean)`.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::invalid(format!(
                "transform input has dimension {}, model expects {}",
                x.len(),
                self.input_dim
            )));
        }
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        Ok((0..self.reduced_dim)
            .map(|i| {
                self.component(i)
                    .iter()
                    .zip(&centered)
                    .map(|(c, v)| c * v)
                    .sum()
            })
            .collect())
    }

    /// `mean + zᵀ · components`.
    pub fn inverse_transform(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.reduced_dim {
            return Err(Error::invalid(format!(
                "inverse transform input has dimension {}, model expects {}",
                z.len(),
                self.reduced_dim
            )));
        }
        let mut out = self.mean.clone();
        for (i, &zi) in z.iter().enumerate() {
            for (o, c) in out.iter_mut().zip(self.component(i)) {
                *o += zi * c;
            }
        }
        Ok(out)
    }

    pub fn transform_all<'a>(&self, rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Vec<Vec<f64>>> {
        rows.into_iter().map(|r| self.transform(r)).collect()
    }
}

/// Chooses the retained dimension from full-spectrum variances (descending).
///
/// Returns the smallest `m` whose cumulative ratio reaches `target`, never
/// exceeding the numerical rank.
pub fn select_dimension(variances: &[f64], target: f64) -> usize {
    let total: f64 = variances.iter().sum();
    let largest = variances.first().copied().unwrap_or(0.0);
    let rank = variances
        .iter()
        .take_while(|&&v| v > RANK_TOLERANCE * largest)
        .count();
    let mut cumulative = 0.0;
    for (i, v) in variances.iter().take(rank).enumerate() {
        cumulative += v / total;
        if cumulative >= target - COVERAGE_SLACK {
            return i + 1;
        }
    }
    rank
}

pub fn fit(data: &EmbeddingSet, retained_variance_target: f64) -> Result<PcaModel> {
    let rows = data.vectors();
    fit_rows(&rows, data.dimension(), retained_variance_target)
}

/// Fits on raw rows of length `dim`.
pub fn fit_rows(rows: &[&[f64]], dim: usize, retained_variance_target: f64) -> Result<PcaModel> {
    if !(retained_variance_target > 0.0 && retained_variance_target <= 1.0) {
        return Err(Error::invalid(format!(
            "retained variance target {retained_variance_target} outside (0, 1]"
        )));
    }
    let n = rows.len();
    if n < 2 {
        return Err(Error::DegenerateData(format!(
            "PCA needs at least 2 samples, got {n}"
        )));
    }
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::invalid("row dimension mismatch"));
    }

    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r.iter()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centered = DMatrix::from_fn(n, dim, |i, j| rows[i][j] - mean[j]);
    if centered.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateData("all samples are identical".into()));
    }

    let svd = centered.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::DegenerateData("SVD did not produce right singular vectors".into()))?;

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    let n_spectrum = dim.min(n - 1);
    order.truncate(n_spectrum);

    let variances: Vec<f64> = order
        .iter()
        .map(|&i| svd.singular_values[i].powi(2) / (n - 1) as f64)
        .collect();
    let total: f64 = variances.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateData("data has zero variance".into()));
    }
    let reduced_dim = select_dimension(&variances, retained_variance_target);

    let mut components = Vec::with_capacity(reduced_dim * dim);
    for &src in &order[..reduced_dim] {
        let mut row: Vec<f64> = v_t.row(src).iter().copied().collect();
        canonicalize_sign(&mut row);
        components.extend(row);
    }

    Ok(PcaModel {
        input_dim: dim,
        reduced_dim,
        mean,
        components,
        explained_variance_ratio: variances[..reduced_dim].iter().map(|v| v / total).collect(),
        retained_variance_target,
    })
}

/// Flips `row` so its largest-magnitude entry (lowest index on ties) is positive.
pub(crate) fn canonicalize_sign(row: &mut [f64]) {
    let mut pivot = 0;
    for (i, v) in row.iter().enumerate() {
        if v.abs() > row[pivot].abs() {
            pivot = i;
        }
    }
    if row[pivot] < 0.0 {
        row.iter_mut().for_each(|v| *v = -*v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use crate::types::{Embedding, Gender};

    fn set_from(rows: &[Vec<f64>]) -> EmbeddingSet {
        EmbeddingSet::from_embeddings(
            rows.iter()
                .enumerate()
                .map(|(i, r)| Embedding::new(format!("u{i}"), "s", Gender::Unspecified, r.clone()).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn random_rows(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
        let mut rng = SeededRng::new(seed);
        (0..n)
            .map(|_| (0..d).map(|j| rng.standard_normal() * (1.0 + j as f64) + 3.0).collect())
            .collect()
    }

    #[test]
    fn line_data_is_rank_one() {
        let rows: Vec<Vec<f64>> = (1..=6).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let m = fit(&set_from(&rows), 0.5).unwrap();
        assert_eq!(m.reduced_dim(), 1);
        assert!((m.explained_variance_ratio()[0] - 1.0).abs() < 1e-12);
        let m = fit(&set_from(&rows), 1.0).unwrap();
        assert_eq!(m.reduced_dim(), 1);
    }

    #[test]
    fn full_variance_round_trip() {
        let rows = random_rows(1, 30, 6);
        let m = fit(&set_from(&rows), 1.0).unwrap();
        assert_eq!(m.reduced_dim(), 6);
        for r in &rows {
            let back = m.inverse_transform(&m.transform(r).unwrap()).unwrap();
            for (a, b) in r.iter().zip(&back) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn fewer_samples_than_dims_caps_at_n_minus_one() {
        let rows = random_rows(2, 4, 10);
        let m = fit(&set_from(&rows), 1.0).unwrap();
        assert_eq!(m.reduced_dim(), 3);
        for r in &rows {
            let back = m.inverse_transform(&m.transform(r).unwrap()).unwrap();
            for (a, b) in r.iter().zip(&back) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn transform_edge_cases() {
        let rows = random_rows(3, 40, 5);
        let m = fit(&set_from(&rows), 0.9).unwrap();
        let z = m.transform(m.mean()).unwrap();
        assert!(z.iter().all(|v| *v == 0.0));
        let x: Vec<f64> = m.mean().iter().zip(m.component(0)).map(|(a, c)| a + c).collect();
        let e0 = m.transform(&x).unwrap();
        assert!((e0[0] - 1.0).abs() < 1e-10);
        assert!(e0[1..].iter().all(|v| v.abs() < 1e-10));
        assert_eq!(m.inverse_transform(&vec![0.0; m.reduced_dim()]).unwrap(), m.mean());
        assert!(m.transform(&[1.0]).is_err());
        assert!(m.inverse_transform(&vec![0.0; m.reduced_dim() + 1]).is_err());
    }

    #[test]
    fn projection_is_idempotent() {
        let rows = random_rows(4, 50, 8);
        let m = fit(&set_from(&rows), 0.7).unwrap();
        assert!(m.reduced_dim() < 8);
        let z = m.transform(&rows[0]).unwrap();
        let again = m.transform(&m.inverse_transform(&z).unwrap()).unwrap();
        for (a, b) in z.iter().zip(&again) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            fit(&set_from(&[vec![1.0, 2.0]]), 0.9),
            Err(Error::DegenerateData(_))
        ));
        assert!(matches!(
            fit(&set_from(&[vec![1.0, 2.0], vec![1.0, 2.0]]), 0.9),
            Err(Error::DegenerateData(_))
        ));
        assert!(fit(&set_from(&random_rows(0, 5, 2)), 0.0).is_err());
    }

    #[test]
    fn orthonormal_and_canonical_signs() {
        let rows = random_rows(5, 100, 7);
        let m = fit(&set_from(&rows), 0.99).unwrap();
        assert!(m.orthonormality_error() < 1e-8);
        for i in 0..m.reduced_dim() {
            let row = m.component(i);
            let pivot = row
                .iter()
                .enumerate()
                .fold(0, |p, (j, v)| if v.abs() > row[p].abs() { j } else { p });
            assert!(row[pivot] > 0.0);
        }
        let ratios = m.explained_variance_ratio();
        assert!(ratios.windows(2).all(|w| w[0] >= w[1]));
        assert!(ratios.iter().sum::<f64>() <= 1.0 + 1e-12);
    }

    #[test]
    fn deterministic_fit() {
        let rows = random_rows(6, 60, 9);
        assert_eq!(fit(&set_from(&rows), 0.95).unwrap(), fit(&set_from(&rows), 0.95).unwrap());
    }

    #[test]
    fn monotone_coverage() {
        let rows = random_rows(7, 80, 10);
        let set = set_from(&rows);
        let dims: Vec<usize> = [0.5, 0.8, 0.9, 0.95, 0.99, 1.0]
            .iter()
            .map(|&t| fit(&set, t).unwrap().reduced_dim())
            .collect();
        assert!(dims.windows(2).all(|w| w[0] <= w[1]), "{dims:?}");
    }

    #[test]
    fn from_parts_rejects_non_orthonormal() {
        let err = PcaModel::from_parts(vec![0.0, 0.0], vec![vec![1.0, 1.0]], vec![1.0], 0.9);
        assert!(err.is_err());
        let ok = PcaModel::from_parts(vec![0.0, 0.0], vec![vec![0.0, 1.0]], vec![1.0], 0.9);
        assert!(ok.is_ok());
    }
}
