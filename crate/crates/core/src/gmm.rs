//! Diagonal-covariance Gaussian mixtures fitted by EM.
//!
//! Initial means come from greedy k-means++ seeding (2 + ⌊ln k⌋ D²-weighted
//! candidates per center, keeping the one with the lowest potential),
//! initial weights are uniform and initial variances equal the global
//! per-dimension variance. Every M-step floors variances at `VARIANCE_FLOOR_RATIO` times
//! the global variance. Sufficient statistics are accumulated in fixed
//! [`REDUCTION_CHUNK`](crate::par::REDUCTION_CHUNK) row blocks and summed in
//! block order, so a fit is bit-identical for any number of threads.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::par;
use crate::rng::{derive_seed, SeededRng};

pub const VARIANCE_FLOOR_RATIO: f64 = 1e-6;
/// Floor used for dimensions whose global variance is exactly zero.
const ABSOLUTE_VARIANCE_FLOOR: f64 = 1e-12;

pub const DEFAULT_MAX_ITERATIONS: usize = 1000;
pub const DEFAULT_TOLERANCE: f64 = 1e-16;

#[derive(Clone, Debug, PartialEq)]
pub struct GmmConfig {
    pub n_components: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
    /// Independent EM runs; the best final log-likelihood wins. Run 0 uses
    /// `seed`, run `r` uses a seed derived from `(seed, r)`.
    pub restarts: usize,
}

impl GmmConfig {
    pub fn new(n_components: usize, seed: u64) -> Self {
        Self {
            n_components,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            tolerance: DEFAULT_TOLERANCE,
            seed,
            restarts: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GmmModel {
    pub(crate) n_components: usize,
    pub(crate) dim: usize,
    pub(crate) weights: Vec<f64>,
    /// `n_components × dim`, row-major.
    pub(crate) means: Vec<f64>,
    /// `n_components × dim`, row-major.
    pub(crate) variances: Vec<f64>,
    pub(crate) final_log_likelihood: f64,
    pub(crate) n_iterations_run: usize,
}

/// Diagnostics recorded during a fit.
#[derive(Clone, Debug, Default)]
pub struct FitTrace {
    /// Mean per-sample log-likelihood: entry 0 for the initial parameters,
    /// entry `t` after the `t`-th M-step.
    pub log_likelihoods: Vec<f64>,
    /// Largest |Σ_k r_nk − 1| seen in any E-step.
    pub max_responsibility_error: f64,
}

impl GmmModel {
    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self, k: usize) -> &[f64] {
        &self.means[k * self.dim..(k + 1) * self.dim]
    }

    pub fn variance(&self, k: usize) -> &[f64] {
        &self.variances[k * self.dim..(k + 1) * self.dim]
    }

    pub fn final_log_likelihood(&self) -> f64 {
        self.final_log_likelihood
    }

    pub fn n_iterations_run(&self) -> usize {
        self.n_iterations_run
    }

    /// Assembles a model from stored parameters, validating the invariants.
    pub fn from_parts(
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        variances: Vec<Vec<f64>>,
        final_log_likelihood: f64,
        n_iterations_run: usize,
    ) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::invalid("mixture needs at least one component"));
        }
        if means.len() != k || variances.len() != k {
            return Err(Error::invalid("means/variances row count != n_components"));
        }
        let dim = means[0].len();
        if dim == 0 || means.iter().chain(&variances).any(|r| r.len() != dim) {
            return Err(Error::invalid("inconsistent mixture dimension"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("mixture weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("mixture weights sum to {total}, not 1")));
        }
        if means.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite mixture mean"));
        }
        if variances.iter().flatten().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("mixture variances must be finite and positive"));
        }
        Ok(GmmModel {
            n_components: k,
            dim,
            weights,
            means: means.concat(),
            variances: variances.concat(),
            final_log_likelihood,
            n_iterations_run,
        })
    }

    /// `log Σ_k w_k N(x; μ_k, diag σ²_k)` with log-sum-exp stabilization.
    pub fn log_likelihood(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::invalid(format!(
                "point has dimension {}, mixture expects {}",
                x.len(),
                self.dim
            )));
        }
        let cache = ComponentCache::new(self);
        let mut scratch = vec![0.0; self.n_components];
        Ok(cache.log_density(self, x, &mut scratch))
    }

    /// Draws `n` points: a component from the weights, then each coordinate
    /// from its Gaussian. Output is fully determined by `(self, n, seed)`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = SeededRng::new(seed);
        let stddev: Vec<f64> = self.variances.iter().map(|v| v.sqrt()).collect();
        (0..n)
            .map(|_| {
                let k = rng.categorical(&self.weights);
                let mu = self.mean(k);
                let sd = &stddev[k * self.dim..(k + 1) * self.dim];
                mu.iter()
                    .zip(sd)
                    .map(|(m, s)| m + s * rng.standard_normal())
                    .collect()
            })
            .collect()
    }
}

/// Per-component constants for density evaluation.
struct ComponentCache {
    log_weight: Vec<f64>,
    log_norm: Vec<f64>,
    inv_var: Vec<f64>,
}

impl ComponentCache {
    fn new(model: &GmmModel) -> Self {
        let d = model.dim;
        let log_norm = (0..model.n_components)
            .map(|k| {
                let log_det: f64 = model.variance(k).iter().map(|v| v.ln()).sum();
                -0.5 * (d as f64 * (2.0 * PI).ln() + log_det)
            })
            .collect();
        Self {
            log_weight: model.weights.iter().map(|w| w.ln()).collect(),
            log_norm,
            inv_var: model.variances.iter().map(|v| 1.0 / v).collect(),
        }
    }

    /// Fills `joint[k] = log w_k + log N_k(x)` and returns the log-sum-exp.
    fn log_density(&self, model: &GmmModel, x: &[f64], joint: &mut [f64]) -> f64 {
        let d = model.dim;
        let mut max = f64::NEG_INFINITY;
        for (k, slot) in joint.iter_mut().enumerate() {
            let mu = &model.means[k * d..(k + 1) * d];
            let iv = &self.inv_var[k * d..(k + 1) * d];
            let mut quad = 0.0;
            for j in 0..d {
                let diff = x[j] - mu[j];
                quad += diff * diff * iv[j];
            }
            *slot = self.log_weight[k] + self.log_norm[k] - 0.5 * quad;
            max = max.max(*slot);
        }
        let sum: f64 = joint.iter().map(|v| (v - max).exp()).sum();
        max + sum.ln()
    }
}

pub fn fit(data: &[Vec<f64>], config: &GmmConfig) -> Result<GmmModel> {
    fit_traced(data, config).map(|(m, _)| m)
}

/// Fits and also returns the per-iteration trace of the winning run.
pub fn fit_traced(data: &[Vec<f64>], config: &GmmConfig) -> Result<(GmmModel, FitTrace)> {
    let k = config.n_components;
    if k == 0 {
        return Err(Error::invalid("n_components must be at least 1"));
    }
    if data.is_empty() {
        return Err(Error::invalid("no training data"));
    }
    if k > data.len() {
        return Err(Error::invalid(format!(
            "n_components {k} exceeds number of samples {}",
            data.len()
        )));
    }
    let dim = data[0].len();
    if dim == 0 || data.iter().any(|r| r.len() != dim) {
        return Err(Error::invalid("training rows must share a positive dimension"));
    }
    if data.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("training data contains non-finite values"));
    }
    if config.max_iterations == 0 || config.restarts == 0 {
        return Err(Error::invalid("max_iterations and restarts must be positive"));
    }

    let flat: Vec<f64> = data.concat();
    let problem = Problem::new(&flat, data.len(), dim);
    let mut best: Option<(GmmModel, FitTrace)> = None;
    for r in 0..config.restarts {
        let seed = if r == 0 {
            config.seed
        } else {
            derive_seed(config.seed, &[r as u64])
        };
        let run = problem.run_em(k, seed, config.max_iterations, config.tolerance);
        let better = best
            .as_ref()
            .is_none_or(|(b, _)| run.0.final_log_likelihood > b.final_log_likelihood);
        if better {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

struct Problem<'a> {
    data: &'a [f64],
    n: usize,
    dim: usize,
    global_var: Vec<f64>,
    floor: Vec<f64>,
}

struct EStep {
    resp: Vec<f64>,
    mean_ll: f64,
    max_resp_error: f64,
}

impl<'a> Problem<'a> {
    fn new(data: &'a [f64], n: usize, dim: usize) -> Self {
        let mut mean = vec![0.0; dim];
        for row in data.chunks_exact(dim) {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut global_var = vec![0.0; dim];
        for row in data.chunks_exact(dim) {
            for j in 0..dim {
                global_var[j] += (row[j] - mean[j]).powi(2);
            }
        }
        global_var.iter_mut().for_each(|v| *v /= n as f64);
        let floor = global_var
            .iter()
            .map(|&v| {
                let f = VARIANCE_FLOOR_RATIO * v;
                if f > 0.0 {
                    f
                } else {
                    ABSOLUTE_VARIANCE_FLOOR
                }
            })
            .collect();
        Self {
            data,
            n,
            dim,
            global_var,
            floor,
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn sq_dist(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
    }

    /// k-means++ seeding of the means.
    fn init(&self, k: usize, seed: u64) -> GmmModel {
        let mut rng = SeededRng::new(seed);
        let first = rng.below(self.n as u64) as usize;
        let mut means: Vec<f64> = self.row(first).to_vec();
        let mut nearest: Vec<f64> = (0..self.n)
            .map(|i| self.sq_dist(self.row(i), self.row(first)))
            .collect();
        // Greedy k-means++: several D²-weighted candidates per step, keeping the
        // one that leaves the smallest total squared distance.
        let trials = 2 + (k as f64).ln() as usize;
        for _ in 1..k {
            let mut best: Option<(f64, usize, Vec<f64>)> = None;
            for _ in 0..trials {
                let candidate = rng.categorical(&nearest);
                let dists: Vec<f64> = (0..self.n)
                    .map(|i| nearest[i].min(self.sq_dist(self.row(i), self.row(candidate))))
                    .collect();
                let potential: f64 = dists.iter().sum();
                if best.as_ref().is_none_or(|(p, _, _)| potential < *p) {
                    best = Some((potential, candidate, dists));
                }
            }
            let (_, chosen, dists) = best.expect("at least two trials");
            nearest = dists;
            means.extend_from_slice(self.row(chosen));
        }
        let variances = (0..k)
            .flat_map(|_| {
                self.global_var
                    .iter()
                    .zip(&self.floor)
                    .map(|(v, f)| v.max(*f))
            })
            .collect();
        GmmModel {
            n_components: k,
            dim: self.dim,
            weights: vec![1.0 / k as f64; k],
            means,
            variances,
            final_log_likelihood: f64::NEG_INFINITY,
            n_iterations_run: 0,
        }
    }

    fn e_step(&self, model: &GmmModel) -> EStep {
        let k = model.n_components;
        let cache = ComponentCache::new(model);
        let partials = par::map_chunks(self.n, |rows| {
            let mut resp = vec![0.0; rows.len() * k];
            let mut ll_sum = 0.0;
            let mut max_err: f64 = 0.0;
            for (local, i) in rows.enumerate() {
                let joint = &mut resp[local * k..(local + 1) * k];
                let ll = cache.log_density(model, self.row(i), joint);
                let mut total = 0.0;
                for r in joint.iter_mut() {
                    *r = (*r - ll).exp();
                    total += *r;
                }
                max_err = max_err.max((total - 1.0).abs());
                ll_sum += ll;
            }
            (resp, ll_sum, max_err)
        });
        let mut resp = Vec::with_capacity(self.n * k);
        let mut ll_sum = 0.0;
        let mut max_resp_error: f64 = 0.0;
        for (r, ll, err) in partials {
            resp.extend(r);
            ll_sum += ll;
            max_resp_error = max_resp_error.max(err);
        }
        EStep {
            resp,
            mean_ll: ll_sum / self.n as f64,
            max_resp_error,
        }
    }

    fn m_step(&self, model: &mut GmmModel, resp: &[f64]) {
        let (k, d) = (model.n_components, self.dim);
        let firsts = par::map_chunks(self.n, |rows| {
            let mut nk = vec![0.0; k];
            let mut sx = vec![0.0; k * d];
            for i in rows {
                let x = self.row(i);
                for c in 0..k {
                    let r = resp[i * k + c];
                    nk[c] += r;
                    for j in 0..d {
                        sx[c * d + j] += r * x[j];
                    }
                }
            }
            (nk, sx)
        });
        let mut nk = vec![0.0; k];
        let mut sx = vec![0.0; k * d];
        for (pn, ps) in firsts {
            nk.iter_mut().zip(&pn).for_each(|(a, b)| *a += b);
            sx.iter_mut().zip(&ps).for_each(|(a, b)| *a += b);
        }
        for c in 0..k {
            if nk[c] > 0.0 {
                for j in 0..d {
                    model.means[c * d + j] = sx[c * d + j] / nk[c];
                }
            }
        }

        let means = &model.means;
        let seconds = par::map_chunks(self.n, |rows| {
            let mut sq = vec![0.0; k * d];
            for i in rows {
                let x = self.row(i);
                for c in 0..k {
                    let r = resp[i * k + c];
                    for j in 0..d {
                        let diff = x[j] - means[c * d + j];
                        sq[c * d + j] += r * diff * diff;
                    }
                }
            }
            sq
        });
        let mut sq = vec![0.0; k * d];
        for ps in seconds {
            sq.iter_mut().zip(&ps).for_each(|(a, b)| *a += b);
        }
        for c in 0..k {
            model.weights[c] = nk[c] / self.n as f64;
            if nk[c] > 0.0 {
                for j in 0..d {
                    model.variances[c * d + j] = (sq[c * d + j] / nk[c]).max(self.floor[j]);
                }
            }
        }
    }

    fn run_em(&self, k: usize, seed: u64, max_iterations: usize, tolerance: f64) -> (GmmModel, FitTrace) {
        let mut model = self.init(k, seed);
        let first = self.e_step(&model);
        let mut trace = FitTrace {
            log_likelihoods: vec![first.mean_ll],
            max_responsibility_error: first.max_resp_error,
        };
        let mut resp = first.resp;
        let mut prev = first.mean_ll;
        for it in 1..=max_iterations {
            self.m_step(&mut model, &resp);
            let e = self.e_step(&model);
            trace.log_likelihoods.push(e.mean_ll);
            trace.max_responsibility_error = trace.max_responsibility_error.max(e.max_resp_error);
            model.n_iterations_run = it;
            model.final_log_likelihood = e.mean_ll;
            let change = (e.mean_ll - prev).abs() / e.mean_ll.abs().max(1.0);
            resp = e.resp;
            prev = e.mean_ll;
            if change < tolerance {
                break;
            }
        }
        (model, trace)
    }
}
