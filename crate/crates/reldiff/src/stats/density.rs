//! Hitting-density estimators and the one-particle function.

use super::hits::HitRecord;
use super::{Moments, StatsError};
use crate::minkowski::{euclidean_ball_volume, hyperbolic_ball_volume, q_inner, FourVector, SPATIAL_DIM};
use crate::rng::PathRng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Marginal {
    PositionComponent(usize),
    PositionRadius,
    Lambda,
}

impl Marginal {
    pub fn extract(&self, h: &HitRecord) -> f64 {
        match *self {
            Marginal::PositionComponent(i) => h.x[i],
            Marginal::PositionRadius => h.x.norm(),
            Marginal::Lambda => h.lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DensityMethod {
    /// `bins` equal cells; the range defaults to the sample range.
    Histogram { bins: usize, range: Option<(f64, f64)> },
    /// Gaussian kernel on `grid`; bandwidth defaults to Silverman's rule.
    Kernel { grid: Vec<f64>, bandwidth: Option<f64> },
}

/// Density of a one-dimensional hit marginal, normalized per launched path so
/// that it integrates to the hit fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub marginal: Marginal,
    pub points: Vec<f64>,
    /// Cell width (histogram) or bandwidth (kernel).
    pub width: f64,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_hits: usize,
    pub n_paths: usize,
}

impl DensityEstimate {
    pub fn hit_fraction(&self) -> f64 {
        self.n_hits as f64 / self.n_paths as f64
    }
}

fn evaluate(values: &[f64], n_paths: usize, method: &DensityMethod, layout: &(Vec<f64>, f64, f64)) -> Vec<f64> {
    let (points, width, lo) = layout;
    let np = n_paths as f64;
    match method {
        DensityMethod::Histogram { bins, .. } => {
            let mut counts = vec![0.0; *bins];
            for &v in values {
                let b = (((v - lo) / width) as usize).min(bins - 1);
                counts[b] += 1.0;
            }
            counts.iter().map(|c| c / (np * width)).collect()
        }
        DensityMethod::Kernel { .. } => {
            let norm = 1.0 / (np * width * (2.0 * std::f64::consts::PI).sqrt());
            points
                .iter()
                .map(|&x| values.iter().map(|&v| (-0.5 * ((x - v) / width).powi(2)).exp()).sum::<f64>() * norm)
                .collect()
        }
    }
}

/// Histogram or kernel estimate with bootstrap standard errors (`bootstrap`
/// resamples of the hit set, drawn from the stream `seed`).
pub fn estimate_hitting_density(
    hits: &[HitRecord],
    n_paths: usize,
    marginal: Marginal,
    method: &DensityMethod,
    bootstrap: usize,
    seed: u64,
) -> Result<DensityEstimate, StatsError> {
    if hits.len() < 100 {
        return Err(StatsError::TooFewSamples { needed: 100, got: hits.len() });
    }
    if n_paths < hits.len() {
        return Err(StatsError::InvalidInput("more hits than paths".into()));
    }
    let values: Vec<f64> = hits.iter().map(|h| marginal.extract(h)).collect();
    let layout = match method {
        DensityMethod::Histogram { bins, range } => {
            let (lo, hi) = range.unwrap_or_else(|| {
                let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            });
            if !(hi > lo) || *bins == 0 {
                return Err(StatsError::Degenerate("empty histogram range".into()));
            }
            if range.is_some() && values.iter().any(|&v| v < lo || v > hi) {
                return Err(StatsError::InvalidInput("samples outside the histogram range".into()));
            }
            let w = (hi - lo) / *bins as f64;
            ((0..*bins).map(|b| lo + (b as f64 + 0.5) * w).collect(), w, lo)
        }
        DensityMethod::Kernel { grid, bandwidth } => {
            let (mean, _) = super::mean_and_stderr(&values);
            let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)).sqrt();
            let h = bandwidth.unwrap_or(1.06 * sd * (values.len() as f64).powf(-0.2));
            if !(h > 0.0) {
                return Err(StatsError::Degenerate("zero bandwidth".into()));
            }
            (grid.clone(), h, 0.0)
        }
    };
    let est = evaluate(&values, n_paths, method, &layout);
    let mut rng = PathRng::new(seed, 0);
    let mut acc = vec![Moments::default(); est.len()];
    let mut resample = vec![0.0; values.len()];
    for _ in 0..bootstrap {
        for slot in resample.iter_mut() {
            *slot = values[((rng.uniform() * values.len() as f64) as usize).min(values.len() - 1)];
        }
        for (a, v) in acc.iter_mut().zip(evaluate(&resample, n_paths, method, &layout)) {
            a.push(v);
        }
    }
    let stderr = acc
        .iter()
        .map(|a| {
            let n = a.n as f64;
            ((a.sum_sq - a.sum * a.sum / n) / (n - 1.0)).max(0.0).sqrt()
        })
        .collect();
    Ok(DensityEstimate {
        marginal,
        points: layout.0,
        width: layout.1,
        values: est,
        stderr,
        n_hits: hits.len(),
        n_paths,
    })
}

/// `f = h / q(normal, g0)`: the one-particle function from a hitting density.
pub fn one_particle_from_hits(hitting_density: f64, lambda: f64) -> Result<f64, StatsError> {
    if !(lambda >= 1.0 - 1e-9) {
        return Err(StatsError::InvalidInput(format!("lambda = {lambda} < 1")));
    }
    Ok(hitting_density / lambda)
}

/// Pointwise window estimate of the one-particle function at `(m*, u*)`,
/// marginalized over spatial rotations of the frame: a Euclidean ball of
/// radius `radius_x` around `m*` in the plane times a hyperbolic ball of
/// radius `radius_rapidity` around `u*`. Each path contributes `1 / lambda`
/// when its hit falls in the window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointWindow {
    pub target_u: FourVector,
    pub radius_x: f64,
    pub radius_rapidity: f64,
}

impl PointWindow {
    pub fn volume(&self) -> f64 {
        euclidean_ball_volume(SPATIAL_DIM, self.radius_x) * hyperbolic_ball_volume(SPATIAL_DIM, self.radius_rapidity)
    }

    /// Hits must be expressed in plane coordinates centred on the target event.
    pub fn contribution(&self, hit: &HitRecord) -> f64 {
        let inside_x = hit.x.norm() < self.radius_x;
        let inside_u = q_inner(&self.target_u, &hit.g0()) < self.radius_rapidity.cosh();
        if inside_x && inside_u {
            1.0 / hit.lambda
        } else {
            0.0
        }
    }
}

/// Accumulated per-path contributions of a point window.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WindowTally {
    pub moments: Moments,
    pub in_window: u64,
}

impl WindowTally {
    /// Adds one path: `contribution` is 0 when the path missed the window.
    pub fn push(&mut self, contribution: f64) {
        self.moments.push(contribution);
        if contribution > 0.0 {
            self.in_window += 1;
        }
    }

    pub fn merge(&mut self, o: &WindowTally) {
        self.moments.merge(&o.moments);
        self.in_window += o.in_window;
    }

    /// `(f, stderr)` for the window.
    pub fn estimate(&self, window: &PointWindow) -> (f64, f64) {
        let v = window.volume();
        (self.moments.mean() / v, self.moments.stderr() / v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minkowski::{Matrix, SpatialVector};

    fn hit(x: f64, lambda: f64) -> HitRecord {
        let mut xv = SpatialVector::zeros();
        xv[0] = x;
        HitRecord { path_id: 0, s: 1.0, x: xv, frame: Matrix::identity(), lambda }
    }

    #[test]
    fn histogram_integrates_to_hit_fraction() {
        let mut r = PathRng::new(1, 0);
        let hits: Vec<HitRecord> = (0..1000).map(|_| hit(r.normal(), 1.0)).collect();
        let est = estimate_hitting_density(
            &hits,
            4000,
            Marginal::PositionComponent(0),
            &DensityMethod::Histogram { bins: 25, range: None },
            50,
            2,
        )
        .unwrap();
        let total: f64 = est.values.iter().sum::<f64>() * est.width;
        assert!((total - 0.25).abs() < 1e-10);
        assert!((est.hit_fraction() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn deterministic_hits_fill_one_cell() {
        let hits: Vec<HitRecord> = (0..200).map(|_| hit(0.3, 1.0)).collect();
        let est = estimate_hitting_density(
            &hits,
            200,
            Marginal::PositionComponent(0),
            &DensityMethod::Histogram { bins: 10, range: Some((0.0, 1.0)) },
            20,
            0,
        )
        .unwrap();
        assert_eq!(est.values.iter().filter(|&&v| v > 0.0).count(), 1);
    }

    #[test]
    fn kernel_estimate_of_a_normal() {
        let mut r = PathRng::new(5, 0);
        let hits: Vec<HitRecord> = (0..20_000).map(|_| hit(r.normal(), 1.0)).collect();
        let grid = vec![-1.0, 0.0, 1.0];
        let est = estimate_hitting_density(
            &hits,
            20_000,
            Marginal::PositionComponent(0),
            &DensityMethod::Kernel { grid, bandwidth: None },
            20,
            0,
        )
        .unwrap();
        let phi0 = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((est.values[1] - phi0).abs() < 0.02);
        assert!(estimate_hitting_density(&hits[..10], 10, Marginal::Lambda, &DensityMethod::Histogram { bins: 3, range: None }, 1, 0).is_err());
    }

    #[test]
    fn bootstrap_errors_shrink_with_sample_size() {
        let mut r = PathRng::new(9, 0);
        let make = |n: usize, r: &mut PathRng| -> Vec<HitRecord> { (0..n).map(|_| hit(r.normal(), 1.0)).collect() };
        let m = DensityMethod::Histogram { bins: 10, range: Some((-6.0, 6.0)) };
        let a = estimate_hitting_density(&make(20_000, &mut r), 20_000, Marginal::PositionComponent(0), &m, 200, 1).unwrap();
        let b = estimate_hitting_density(&make(40_000, &mut r), 40_000, Marginal::PositionComponent(0), &m, 200, 1).unwrap();
        let ratio = b.stderr[5] / a.stderr[5];
        assert!((ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.2 * std::f64::consts::FRAC_1_SQRT_2, "{ratio}");
    }

    #[test]
    fn one_particle_divides_by_lambda() {
        assert_eq!(one_particle_from_hits(2.0, 1.0).unwrap(), 2.0);
        let l = 0.5f64.cosh();
        assert!((one_particle_from_hits(1.0, l).unwrap() - 1.0 / 1.127_625_965_206_380_8).abs() < 1e-15);
        assert!(one_particle_from_hits(1.0, 0.5).is_err());
    }
}
