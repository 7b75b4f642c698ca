//! Verification metrics over genuine/impostor score sets.
//!
//! Higher scores mean "more likely the same speaker". `eer` traces the ROC at
//! every distinct score and linearly interpolates the FAR/FRR crossing.
//! `cllr` treats scores as natural-log likelihood ratios; `cllr_min` first
//! recalibrates them with pool-adjacent-violators isotonic regression.

use crate::error::{Error, Result};

/// Calibrated posteriors are clipped to `[P_CLIP, 1 − P_CLIP]` before taking logs.
pub const P_CLIP: f64 = 1e-12;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoreSet {
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
}

impl ScoreSet {
    pub fn new(genuine: Vec<f64>, impostor: Vec<f64>) -> Self {
        Self { genuine, impostor }
    }

    fn check(&self) -> Result<()> {
        if self.genuine.is_empty() || self.impostor.is_empty() {
            return Err(Error::invalid(format!(
                "need genuine and impostor scores (got {} / {})",
                self.genuine.len(),
                self.impostor.len()
            )));
        }
        if self.genuine.iter().chain(&self.impostor).any(|s| !s.is_finite()) {
            return Err(Error::invalid("scores must be finite"));
        }
        Ok(())
    }
}

pub fn eer(scores: &ScoreSet) -> Result<f64> {
    scores.check()?;
    let mut g = scores.genuine.clone();
    let mut imp = scores.impostor.clone();
    g.sort_by(f64::total_cmp);
    imp.sort_by(f64::total_cmp);
    let (ng, ni) = (g.len() as f64, imp.len() as f64);

    // Operating point after threshold s: reject scores <= s.
    let (mut gi, mut ii) = (0usize, 0usize);
    let mut prev = (0.0, 1.0);
    loop {
        let next = match (g.get(gi), imp.get(ii)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => break,
        };
        while gi < g.len() && g[gi] <= next {
            gi += 1;
        }
        while ii < imp.len() && imp[ii] <= next {
            ii += 1;
        }
        let cur = (gi as f64 / ng, 1.0 - ii as f64 / ni);
        if cur.0 >= cur.1 {
            let (frr0, far0) = prev;
            let gap_prev = far0 - frr0;
            let gap_cur = cur.0 - cur.1;
            let lambda = if gap_prev + gap_cur > 0.0 {
                gap_prev / (gap_prev + gap_cur)
            } else {
                0.0
            };
            return Ok(frr0 + lambda * (cur.0 - frr0));
        }
        prev = cur;
    }
    unreachable!("FRR reaches 1 at the largest score")
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Mean computed as an offset from the first element, so that a constant
/// sequence yields that constant exactly.
fn shifted_mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut values = values.peekable();
    let first = *values.peek().expect("non-empty");
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v - first;
        n += 1;
    }
    first + sum / n as f64
}

pub fn cllr(scores: &ScoreSet) -> Result<f64> {
    scores.check()?;
    Ok(cllr_unchecked(&scores.genuine, &scores.impostor))
}

fn cllr_unchecked(genuine: &[f64], impostor: &[f64]) -> f64 {
    let g = shifted_mean(genuine.iter().map(|&s| softplus(-s)));
    let i = shifted_mean(impostor.iter().map(|&s| softplus(s)));
    0.5 * (g + i) / std::f64::consts::LN_2
}

/// Isotonic (non-decreasing) fit of binary labels ordered by score, with tied
/// scores pooled. Returns the fitted posterior for every input position.
pub fn pav_posteriors(scored: &[(f64, bool)]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[a].0.total_cmp(&scored[b].0));

    // (label sum, count, number of tie groups merged) per block.
    let mut blocks: Vec<(f64, f64, usize)> = Vec::new();
    let mut group_sizes: Vec<usize> = Vec::new();
    let mut idx = 0;
    while idx < order.len() {
        let s = scored[order[idx]].0;
        let mut sum = 0.0;
        let mut count = 0usize;
        while idx < order.len() && scored[order[idx]].0 == s {
            sum += f64::from(u8::from(scored[order[idx]].1));
            count += 1;
            idx += 1;
        }
        group_sizes.push(count);
        blocks.push((sum, count as f64, 1));
        while blocks.len() > 1 {
            let (s1, c1, g1) = blocks[blocks.len() - 2];
            let (s2, c2, g2) = blocks[blocks.len() - 1];
            if s1 / c1 <= s2 / c2 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().expect("two blocks") = (s1 + s2, c1 + c2, g1 + g2);
        }
    }

    let mut out = vec![0.0; scored.len()];
    let mut pos = 0;
    let mut group = 0;
    for (sum, count, groups) in blocks {
        let p = sum / count;
        for _ in 0..groups {
            for _ in 0..group_sizes[group] {
                out[order[pos]] = p;
                pos += 1;
            }
            group += 1;
        }
    }
    out
}

pub fn cllr_min(scores: &ScoreSet) -> Result<f64> {
    scores.check()?;
    let scored: Vec<(f64, bool)> = scores
        .genuine
        .iter()
        .map(|&s| (s, true))
        .chain(scores.impostor.iter().map(|&s| (s, false)))
        .collect();
    let posteriors = pav_posteriors(&scored);
    let prior_log_odds = (scores.genuine.len() as f64 / scores.impostor.len() as f64).ln();
    let llr = |p: f64| {
        let p = p.clamp(P_CLIP, 1.0 - P_CLIP);
        (p / (1.0 - p)).ln() - prior_log_odds
    };
    let ng = scores.genuine.len();
    let g: Vec<f64> = posteriors[..ng].iter().map(|&p| llr(p)).collect();
    let i: Vec<f64> = posteriors[ng..].iter().map(|&p| llr(p)).collect();
    Ok(cllr_unchecked(&g, &i))
}
