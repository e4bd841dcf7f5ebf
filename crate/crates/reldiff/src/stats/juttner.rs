//! The relativistic Maxwellian `exp(-4 alpha gamma(q))` in velocity coordinates.

use super::quadrature::{integrate_half_line, sphere_area, QuadratureError};
use super::StatsError;
use crate::minkowski::{SpatialMatrix, SpatialVector};
use crate::rng::PathRng;

/// Density `exp(-b gamma(q)) / Z` on `R^d` with `b = 4 alpha`.
#[derive(Debug, Clone)]
pub struct JuttnerCandidate {
    pub alpha: f64,
    pub dim: usize,
    /// `Z = int_{R^d} exp(-b gamma) dq`.
    pub normalization: f64,
    radial_grid: Vec<f64>,
    radial_cdf: Vec<f64>,
}

impl JuttnerCandidate {
    pub fn new(alpha: f64, dim: usize) -> Result<Self, StatsError> {
        if !(alpha > 0.0) || dim == 0 {
            return Err(StatsError::InvalidInput(format!("alpha = {alpha}, d = {dim}")));
        }
        let b = 4.0 * alpha;
        let radial = |rho: f64| (-b * ((1.0 + rho * rho).sqrt() - 1.0)).exp() * rho.powi(dim as i32 - 1);
        // shift by exp(-b) to keep the scaled integrand O(1)
        let (shifted, _) = integrate_half_line(radial, 1e-12)?;
        let normalization = sphere_area(dim) * shifted * (-b).exp();
        let (radial_grid, radial_cdf) = radial_table(b, dim, shifted)?;
        Ok(Self { alpha, dim, normalization, radial_grid, radial_cdf })
    }

    fn rate(&self) -> f64 {
        4.0 * self.alpha
    }

    /// Density with respect to Lebesgue measure `dq`.
    pub fn density_q(&self, q: &[f64]) -> f64 {
        let g = (1.0 + q.iter().map(|x| x * x).sum::<f64>()).sqrt();
        (-self.rate() * g).exp() / self.normalization
    }

    /// Density with respect to the Riemannian volume of the hyperboloid, using
    /// the computed Jacobian `dvol/dq`.
    pub fn density_hyperboloid(&self, q: &[f64]) -> f64 {
        self.density_q(q) / hyperboloid_volume_jacobian(q)
    }

    /// Probability that `|q| <= rho`.
    pub fn radial_cdf(&self, rho: f64) -> f64 {
        interp(&self.radial_grid, &self.radial_cdf, rho)
    }

    /// Inverse of the radial law.
    pub fn radial_quantile(&self, u: f64) -> f64 {
        interp(&self.radial_cdf, &self.radial_grid, u)
    }

    /// Exact draws: inverse CDF in `|q|`, uniform direction.
    pub fn sample(&self, n: usize, rng: &mut PathRng) -> Vec<Vec<f64>> {
        let mut z = vec![0.0; self.dim];
        (0..n)
            .map(|_| {
                let rho = self.radial_quantile(rng.uniform());
                rng.fill_normals(&mut z);
                let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                z.iter().map(|v| rho * v / norm).collect()
            })
            .collect()
    }
}

/// `sqrt(det h)` for the metric `h = I - q q^T / gamma^2` induced on the
/// hyperboloid by the chart `q -> (gamma(q), q)`.
pub fn hyperboloid_volume_jacobian(q: &[f64]) -> f64 {
    let d = q.len();
    let g2 = 1.0 + q.iter().map(|x| x * x).sum::<f64>();
    let h = nalgebra::DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { 0.0 } - q[i] * q[j] / g2);
    h.determinant().sqrt()
}

/// Fixed-size variant for the build dimension.
pub fn hyperboloid_volume_jacobian_fixed(q: &SpatialVector) -> f64 {
    let g2 = 1.0 + q.norm_squared();
    (SpatialMatrix::identity() - q * q.transpose() / g2).determinant().sqrt()
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[xs.len() - 1] {
        return ys[ys.len() - 1];
    }
    let i = xs.partition_point(|&v| v <= x);
    let (x0, x1) = (xs[i - 1], xs[i]);
    let w = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
    ys[i - 1] + w * (ys[i] - ys[i - 1])
}

fn radial_table(b: f64, dim: usize, total: f64) -> Result<(Vec<f64>, Vec<f64>), QuadratureError> {
    let radial = |rho: f64| (-b * ((1.0 + rho * rho).sqrt() - 1.0)).exp() * rho.powi(dim as i32 - 1);
    // tail below 1e-15 of the mass: b (gamma - 1) ~ 40 + d ln rho
    let mut rho_max: f64 = 1.0;
    while b * ((1.0 + rho_max * rho_max).sqrt() - 1.0) - (dim as f64 - 1.0) * rho_max.max(1.0).ln() < 40.0 {
        rho_max *= 1.25;
    }
    let n = 4096;
    let (x, w) = super::quadrature::gauss_legendre(8);
    let mut grid = Vec::with_capacity(n + 1);
    let mut cdf = Vec::with_capacity(n + 1);
    grid.push(0.0);
    cdf.push(0.0);
    let mut acc = 0.0;
    for k in 0..n {
        let (a, c) = (rho_max * k as f64 / n as f64, rho_max * (k + 1) as f64 / n as f64);
        let (mid, half) = (0.5 * (a + c), 0.5 * (c - a));
        acc += half * x.iter().zip(&w).map(|(xi, wi)| wi * radial(mid + half * xi)).sum::<f64>();
        grid.push(c);
        cdf.push((acc / total).min(1.0));
    }
    let last = cdf.len() - 1;
    cdf[last] = 1.0;
    Ok((grid, cdf))
}

/// Binned comparison of velocity samples with the candidate: equiprobable
/// radial bins in `|q|`.
#[derive(Debug, Clone)]
pub struct JuttnerFit {
    pub tv: f64,
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub z_scores: Vec<f64>,
    pub n_samples: usize,
}

impl JuttnerFit {
    pub fn max_abs_z(&self) -> f64 {
        self.z_scores.iter().fold(0.0, |m, z| m.max(z.abs()))
    }
}

pub fn juttner_fit(samples: &[Vec<f64>], candidate: &JuttnerCandidate, n_bins: usize) -> Result<JuttnerFit, StatsError> {
    if samples.len() < 10_000 {
        return Err(StatsError::TooFewSamples { needed: 10_000, got: samples.len() });
    }
    let mut edges: Vec<f64> = (0..=n_bins).map(|k| candidate.radial_quantile(k as f64 / n_bins as f64)).collect();
    edges[0] = 0.0;
    edges[n_bins] = f64::INFINITY;
    let mut counts = vec![0usize; n_bins];
    for q in samples {
        let rho = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        let b = edges.partition_point(|&e| e <= rho).clamp(1, n_bins) - 1;
        counts[b] += 1;
    }
    let n = samples.len() as f64;
    let p = 1.0 / n_bins as f64;
    let mut tv = 0.0;
    let z_scores = counts
        .iter()
        .map(|&c| {
            tv += 0.5 * (c as f64 / n - p).abs();
            (c as f64 - n * p) / (n * p * (1.0 - p)).sqrt()
        })
        .collect();
    Ok(JuttnerFit { tv, edges, counts, z_scores, n_samples: samples.len() })
}
