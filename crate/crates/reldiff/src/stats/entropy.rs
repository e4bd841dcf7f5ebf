//! Relative entropy between two sample clouds.

use super::{mean_and_stderr, StatsError};
use kiddo::{ImmutableKdTree, SquaredEuclidean};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyEstimator {
    /// k-nearest-neighbour estimator of Wang, Kulkarni and Verdu.
    Knn { k: usize },
    /// Plug-in estimator on a common grid with `bins` cells per axis.
    Histogram { bins: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyEstimate {
    pub value: f64,
    /// Spread of the estimate over disjoint batches, divided by sqrt(batches).
    pub stderr: f64,
    /// The raw estimate was negative and has been clipped to 0.
    pub clipped: bool,
    pub raw: f64,
}

/// Checkpoint series of relative-entropy estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropySeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub estimator: EntropyEstimator,
}

impl EntropySeries {
    /// Largest increase between consecutive checkpoints, in units of the
    /// combined error bar `sqrt(se_i^2 + se_{i+1}^2)`.
    pub fn worst_increase_in_error_bars(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for i in 1..self.values.len() {
            let se = (self.stderrs[i].powi(2) + self.stderrs[i - 1].powi(2)).sqrt().max(1e-300);
            worst = worst.max((self.values[i] - self.values[i - 1]) / se);
        }
        worst
    }
}

fn knn_kl<const K: usize>(p: &[[f64; K]], q: &[[f64; K]], k: usize) -> Result<f64, StatsError> {
    let (n, m) = (p.len(), q.len());
    let tp: ImmutableKdTree<f64, K> = ImmutableKdTree::new_from_slice(p);
    let tq: ImmutableKdTree<f64, K> = ImmutableKdTree::new_from_slice(q);
    let mut sum = 0.0;
    for x in p {
        // the nearest point in P is x itself
        let rho2 = tp.nearest_n::<SquaredEuclidean>(x, k + 1).iter().fold(0.0f64, |a, nn| a.max(nn.distance));
        let nu2 = tq.nearest_n::<SquaredEuclidean>(x, k).iter().fold(0.0f64, |a, nn| a.max(nn.distance));
        if !(rho2 > 0.0) || !(nu2 > 0.0) {
            return Err(StatsError::Degenerate("coincident samples".into()));
        }
        sum += 0.5 * (nu2 / rho2).ln();
    }
    Ok(K as f64 * sum / n as f64 + (m as f64 / (n as f64 - 1.0)).ln())
}

fn histogram_kl<const K: usize>(p: &[[f64; K]], q: &[[f64; K]], bins: usize) -> Result<f64, StatsError> {
    let mut lo = [f64::INFINITY; K];
    let mut hi = [f64::NEG_INFINITY; K];
    for x in p.iter().chain(q) {
        for d in 0..K {
            lo[d] = lo[d].min(x[d]);
            hi[d] = hi[d].max(x[d]);
        }
    }
    if (0..K).any(|d| !(hi[d] > lo[d])) {
        return Err(StatsError::Degenerate("zero extent".into()));
    }
    let cell = |x: &[f64; K]| -> usize {
        let mut idx = 0;
        for d in 0..K {
            let b = (((x[d] - lo[d]) / (hi[d] - lo[d])) * bins as f64) as usize;
            idx = idx * bins + b.min(bins - 1);
        }
        idx
    };
    let total = bins.pow(K as u32);
    let mut cp = vec![0.0f64; total];
    let mut cq = vec![0.0f64; total];
    for x in p {
        cp[cell(x)] += 1.0;
    }
    for x in q {
        cq[cell(x)] += 1.0;
    }
    let (np, nq) = (p.len() as f64, q.len() as f64);
    let mut kl = 0.0;
    for i in 0..total {
        if cp[i] > 0.0 {
            // half-count floor keeps empty Q cells finite
            let pq = cq[i].max(0.5) / nq;
            kl += cp[i] / np * ((cp[i] / np) / pq).ln();
        }
    }
    Ok(kl)
}

fn estimate_raw<const K: usize>(p: &[[f64; K]], q: &[[f64; K]], est: EntropyEstimator) -> Result<f64, StatsError> {
    match est {
        EntropyEstimator::Knn { k } => knn_kl(p, q, k),
        EntropyEstimator::Histogram { bins } => histogram_kl(p, q, bins),
    }
}

/// `H(P; Q)` from samples of `P` and `Q`, with a batch error bar over
/// `batches` disjoint subsets of both clouds.
pub fn relative_entropy<const K: usize>(
    p: &[[f64; K]],
    q: &[[f64; K]],
    est: EntropyEstimator,
    batches: usize,
) -> Result<EntropyEstimate, StatsError> {
    let need = 1000;
    if p.len() < need || q.len() < need {
        return Err(StatsError::TooFewSamples { needed: need, got: p.len().min(q.len()) });
    }
    if p.iter().all(|x| x == &p[0]) || q.iter().all(|x| x == &q[0]) {
        return Err(StatsError::Degenerate("all samples equal".into()));
    }
    let raw = estimate_raw(p, q, est)?;
    let batches = batches.max(2);
    let (bp, bq) = (p.len() / batches, q.len() / batches);
    let parts: Result<Vec<f64>, StatsError> = (0..batches)
        .map(|b| estimate_raw(&p[b * bp..(b + 1) * bp], &q[b * bq..(b + 1) * bq], est))
        .collect();
    let (_, stderr) = mean_and_stderr(&parts?);
    Ok(EntropyEstimate { value: raw.max(0.0), stderr, clipped: raw < 0.0, raw })
}
