//! Slow, direct reference computations for tests.
//!
//! Nothing here shares code with the `xvanon` implementation: covariance is a
//! double loop, eigenvectors come from cyclic Jacobi rotations, eCDF distances
//! and ROC points are obtained by counting.

/// Unbiased sample covariance by explicit double loop.
pub fn sample_covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let d = rows[0].len();
    let mut mean = vec![0.0; d];
    for r in rows {
        for j in 0..d {
            mean[j] += r[j];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = vec![vec![0.0; d]; d];
    for a in 0..d {
        for b in 0..d {
            let mut s = 0.0;
            for r in rows {
                s += (r[a] - mean[a]) * (r[b] - mean[b]);
            }
            cov[a][b] = s / (n as f64 - 1.0);
        }
    }
    cov
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order with matching unit eigenvectors.
pub fn jacobi_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..d)
        .map(|i| (a[i][i], (0..d).map(|k| v[k][i]).collect()))
        .collect();
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    pairs.into_iter().unzip()
}

/// Smallest number of leading eigenvalues whose cumulative share of the total
/// reaches `target` (with `slack`), ignoring eigenvalues at or below
/// `rank_tol × largest`.
pub fn retained_dimension(eigenvalues_desc: &[f64], target: f64, rank_tol: f64, slack: f64) -> usize {
    let total: f64 = eigenvalues_desc.iter().sum();
    let largest = eigenvalues_desc[0];
    let usable: Vec<f64> = eigenvalues_desc
        .iter()
        .copied()
        .filter(|&e| e > rank_tol * largest)
        .collect();
    for m in 1..=usable.len() {
        let covered: f64 = usable[..m].iter().map(|e| e / total).sum();
        if covered >= target - slack {
            return m;
        }
    }
    usable.len()
}

/// Mean squared reconstruction error when keeping only the coordinate axes in
/// `axes` (other coordinates replaced by their mean).
pub fn axis_reconstruction_error(rows: &[Vec<f64>], axes: &[usize]) -> f64 {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let mut err = 0.0;
    for r in rows {
        for j in 0..d {
            if !axes.contains(&j) {
                err += (r[j] - mean[j]).powi(2);
            }
        }
    }
    err / n
}

/// Lowest reconstruction error over every choice of `m` coordinate axes.
pub fn best_axis_subset_error(rows: &[Vec<f64>], m: usize) -> f64 {
    let d = rows[0].len();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << d) {
        if mask.count_ones() as usize != m {
            continue;
        }
        let axes: Vec<usize> = (0..d).filter(|j| mask & (1 << j) != 0).collect();
        best = best.min(axis_reconstruction_error(rows, &axes));
    }
    best
}

/// Fraction of `sample` at or below `x`, by counting.
pub fn ecdf_count(sample: &[f64], x: f64) -> f64 {
    sample.iter().filter(|&&v| v <= x).count() as f64 / sample.len() as f64
}

/// sup |F_a − F_b| evaluated at every sample point of either set.
pub fn ks_double_loop(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .chain(b)
        .map(|&x| (ecdf_count(a, x) - ecdf_count(b, x)).abs())
        .fold(0.0, f64::max)
}

/// Equal error rate from a brute-force threshold sweep.
///
/// Candidate thresholds are −∞, every midpoint between consecutive distinct
/// scores, and +∞; a trial is accepted when its score is ≥ the threshold. The
/// first ROC segment on which FRR − FAR turns non-negative is intersected with
/// the FAR = FRR line.
pub fn eer_sweep(genuine: &[f64], impostor: &[f64]) -> f64 {
    let mut all: Vec<f64> = genuine.iter().chain(impostor).copied().collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    all.dedup();
    let mut thresholds = vec![f64::NEG_INFINITY];
    for w in all.windows(2) {
        thresholds.push(0.5 * (w[0] + w[1]));
    }
    thresholds.push(f64::INFINITY);

    let point = |t: f64| {
        let frr = genuine.iter().filter(|&&s| s < t).count() as f64 / genuine.len() as f64;
        let far = impostor.iter().filter(|&&s| s >= t).count() as f64 / impostor.len() as f64;
        (frr, far)
    };
    let mut prev = point(thresholds[0]);
    if prev.0 >= prev.1 {
        return prev.0;
    }
    for &t in &thresholds[1..] {
        let cur = point(t);
        if cur.0 >= cur.1 {
            let gap_prev = prev.1 - prev.0;
            let gap_cur = cur.0 - cur.1;
            let lambda = gap_prev / (gap_prev + gap_cur);
            return prev.0 + lambda * (cur.0 - prev.0);
        }
        prev = cur;
    }
    unreachable!("FRR reaches 1 and FAR reaches 0 at +inf")
}

/// Closed-form single-Gaussian MLE: sample mean and biased per-dimension variance.
pub fn gaussian_mle(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let var: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n)
        .collect();
    (mean, var)
}

/// Diagonal-mixture log density by direct summation of densities (no
/// log-sum-exp), valid for points not too far from the components.
pub fn diag_mixture_log_density(weights: &[f64], means: &[Vec<f64>], vars: &[Vec<f64>], x: &[f64]) -> f64 {
    let mut total = 0.0;
    for k in 0..weights.len() {
        let mut dens = weights[k];
        for j in 0..x.len() {
            let v = vars[k][j];
            dens *= (-(x[j] - means[k][j]).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
        }
        total += dens;
    }
    total.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_diagonalizes_known_matrix() {
        let (vals, vecs) = jacobi_eigen(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        assert!((vecs[0][0].abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn ks_hand_example() {
        assert_eq!(ks_double_loop(&[1.0, 2.0], &[1.5, 2.5]), 0.5);
    }

    #[test]
    fn eer_hand_example() {
        let e = eer_sweep(&[0.8, 0.6, 0.4], &[0.5, 0.3, 0.1]);
        assert!((e - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(eer_sweep(&[2.0, 3.0], &[0.0, 1.0]), 0.0);
    }
}
