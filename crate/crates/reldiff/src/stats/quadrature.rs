//! Gauss-Legendre and Gauss-Kronrod rules, and integration over the fibre
//! hyperboloid in polar rapidity coordinates.

use crate::minkowski::{FourVector, DIM};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("adaptive quadrature did not reach tolerance: estimate {value}, error {error}")]
    NotConverged { value: f64, error: f64 },
    #[error("declared decay leaves a tail of {tail} beyond rapidity {cutoff}")]
    TailTooLarge { tail: f64, cutoff: f64 },
    #[error("unsupported fibre dimension {0}")]
    Dimension(usize),
    #[error("non-finite integrand value")]
    NonFinite,
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Composite Gauss-Legendre on `[a, b]` with `panels` panels of `n` nodes.
pub fn gl_composite<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize, n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let (lo, hi) = (a + p as f64 * h, a + (p + 1) as f64 * h);
        let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        total += r * x.iter().zip(&w).map(|(xi, wi)| wi * f(c + r * xi)).sum::<f64>();
    }
    total
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let (f1, f2) = (f(c - h * XGK[j]), f(c + h * XGK[j]));
        kron += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) on a finite interval by global bisection.
pub fn adaptive_gk15<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<(f64, f64), QuadratureError> {
    let mut parts = vec![(a, b, gk15(&mut f, a, b))];
    for _ in 0..2000 {
        let value: f64 = parts.iter().map(|p| p.2 .0).sum();
        let error: f64 = parts.iter().map(|p| p.2 .1).sum();
        if !value.is_finite() {
            return Err(QuadratureError::NonFinite);
        }
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok((value, error));
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, p)| if p.2 .1 > best.1 { (i, p.2 .1) } else { best });
        let (lo, hi, _) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        parts.push((lo, mid, gk15(&mut f, lo, mid)));
        parts.push((mid, hi, gk15(&mut f, mid, hi)));
    }
    let value = parts.iter().map(|p| p.2 .0).sum();
    let error = parts.iter().map(|p| p.2 .1).sum();
    Err(QuadratureError::NotConverged { value, error })
}

/// `int_0^inf f` via `x = t / (1 - t)`.
pub fn integrate_half_line<F: FnMut(f64) -> f64>(mut f: F, rel_tol: f64) -> Result<(f64, f64), QuadratureError> {
    adaptive_gk15(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let x = t / (1.0 - t);
            let v = f(x) / ((1.0 - t) * (1.0 - t));
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        rel_tol,
        1e-300,
    )
}

/// Area of the unit sphere `S^{d-1}` in `R^d` (2 for `d = 1`).
pub fn sphere_area(d: usize) -> f64 {
    crate::minkowski::euclidean_ball_volume(d, 1.0) * d as f64
}

/// What the caller guarantees about the integrand beyond the quadrature cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailDecay {
    /// Zero for rapidity above `r0`; integration stops there.
    CompactRapidity(f64),
    /// `|h| <= bound * exp(-rate * gamma)`.
    ExpGamma { rate: f64, bound: f64 },
}

/// Product rule on the unit hyperboloid of `R^{1,d}`: Gauss-Legendre panels in
/// rapidity with weight `sinh^{d-1} r`, Gauss-Legendre in `cos theta` and a
/// uniform azimuth grid on the sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberQuadrature {
    pub dim: usize,
    pub cutoff: f64,
    pub radial_nodes: usize,
    pub polar_nodes: usize,
    pub azimuth_nodes: usize,
    /// Largest admissible tail bound.
    pub tail_tol: f64,
}

impl Default for FiberQuadrature {
    fn default() -> Self {
        Self { dim: crate::minkowski::SPATIAL_DIM, cutoff: 12.0, radial_nodes: 64, polar_nodes: 24, azimuth_nodes: 32, tail_tol: 1e-10 }
    }
}

/// Value and the declared tail bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberIntegral {
    pub value: f64,
    pub tail_bound: f64,
}

impl FiberQuadrature {
    pub fn with_dim(dim: usize) -> Self {
        Self { dim, ..Self::default() }
    }

    /// Directions on `S^{d-1}` with weights summing to the sphere area.
    fn sphere_rule(&self) -> Result<Vec<(Vec<f64>, f64)>, QuadratureError> {
        let n_az = self.azimuth_nodes;
        Ok(match self.dim {
            1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
            2 => (0..n_az)
                .map(|k| {
                    let phi = 2.0 * PI * k as f64 / n_az as f64;
                    (vec![phi.cos(), phi.sin()], 2.0 * PI / n_az as f64)
                })
                .collect(),
            3 => {
                let (x, w) = gauss_legendre(self.polar_nodes);
                let mut out = Vec::with_capacity(x.len() * n_az);
                for (ct, wt) in x.iter().zip(&w) {
                    let st = (1.0 - ct * ct).sqrt();
                    for k in 0..n_az {
                        let phi = 2.0 * PI * k as f64 / n_az as f64;
                        out.push((vec![st * phi.cos(), st * phi.sin(), *ct], wt * 2.0 * PI / n_az as f64));
                    }
                }
                out
            }
            d => return Err(QuadratureError::Dimension(d)),
        })
    }

    fn radial_extent(&self, decay: TailDecay) -> Result<(f64, f64), QuadratureError> {
        match decay {
            TailDecay::CompactRapidity(r0) => {
                if r0 > self.cutoff {
                    Err(QuadratureError::TailTooLarge { tail: f64::INFINITY, cutoff: self.cutoff })
                } else {
                    Ok((r0, 0.0))
                }
            }
            TailDecay::ExpGamma { rate, bound } => {
                let d = self.dim as i32;
                let r = self.cutoff;
                let (tail, _) = adaptive_gk15(
                    |x| (-rate * x.cosh()).exp() * x.sinh().powi(d - 1),
                    r,
                    r + 40.0,
                    1e-6,
                    1e-300,
                )?;
                let tail = bound * sphere_area(self.dim) * tail;
                if !(tail <= self.tail_tol) {
                    return Err(QuadratureError::TailTooLarge { tail, cutoff: r });
                }
                Ok((r, tail))
            }
        }
    }

    /// `int_H h dvol` for several integrands at once. `h` receives the ambient
    /// unit vector `(cosh r, sinh r * omega)` and writes `out.len()` values.
    pub fn integrate_many<H>(&self, n_out: usize, decay: TailDecay, mut h: H) -> Result<(Vec<f64>, f64), QuadratureError>
    where
        H: FnMut(&[f64], &mut [f64]),
    {
        let (r_max, tail) = self.radial_extent(decay)?;
        let sphere = self.sphere_rule()?;
        let panels = (self.radial_nodes / 16).max(1);
        let per_panel = self.radial_nodes / panels;
        let (x, w) = gauss_legendre(per_panel);
        let hpan = r_max / panels as f64;
        let mut total = vec![0.0; n_out];
        let mut buf = vec![0.0; n_out];
        let mut point = vec![0.0; self.dim + 1];
        for p in 0..panels {
            let c = (p as f64 + 0.5) * hpan;
            for (xi, wi) in x.iter().zip(&w) {
                let r = c + 0.5 * hpan * xi;
                let (sh, ch) = (r.sinh(), r.cosh());
                let radial_w = 0.5 * hpan * wi * sh.powi(self.dim as i32 - 1);
                for (omega, ws) in &sphere {
                    point[0] = ch;
                    for k in 0..self.dim {
                        point[k + 1] = sh * omega[k];
                    }
                    h(&point, &mut buf);
                    for k in 0..n_out {
                        total[k] += radial_w * ws * buf[k];
                    }
                }
            }
        }
        if total.iter().any(|v| !v.is_finite()) {
            return Err(QuadratureError::NonFinite);
        }
        Ok((total, tail))
    }

    pub fn integrate<H>(&self, decay: TailDecay, mut h: H) -> Result<FiberIntegral, QuadratureError>
    where
        H: FnMut(&[f64]) -> f64,
    {
        let (v, tail) = self.integrate_many(1, decay, |p, out| out[0] = h(p))?;
        Ok(FiberIntegral { value: v[0], tail_bound: tail })
    }
}

/// `X(m) = -int g0 f ln(f/g) dvol` over the fibre at `m`, for densities given
/// as functions of `(m, g0)` in Minkowski space.
pub fn entropy_flux_x<F, G>(
    f: F,
    g: G,
    m: &FourVector,
    quad: &FiberQuadrature,
    decay: TailDecay,
) -> Result<FourVector, QuadratureError>
where
    F: Fn(&FourVector, &[f64]) -> f64,
    G: Fn(&FourVector, &[f64]) -> f64,
{
    assert_eq!(quad.dim + 1, DIM, "entropy flux uses the build dimension");
    let (v, _) = quad.integrate_many(DIM, decay, |u, out| {
        let fv = f(m, u);
        let w = if fv > 0.0 { -fv * (fv / g(m, u)).ln() } else { 0.0 };
        for k in 0..DIM {
            out[k] = u[k] * w;
        }
    })?;
    Ok(FourVector::from_column_slice(&v))
}

/// Both sides of `div X = int H0 h dvol` with `X(m) = int g0 h(m, g0) dvol`,
/// Minkowski space, derivatives by five-point central differences of step `fd`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
}

pub fn divergence_check<H>(
    h: H,
    m: &FourVector,
    fd: f64,
    quad: &FiberQuadrature,
    decay: TailDecay,
) -> Result<DivergenceCheck, QuadratureError>
where
    H: Fn(&FourVector, &[f64]) -> f64,
{
    assert_eq!(quad.dim + 1, DIM, "divergence check uses the build dimension");
    let stencil = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];
    let x_at = |mm: &FourVector| -> Result<Vec<f64>, QuadratureError> {
        Ok(quad
            .integrate_many(DIM, decay, |u, out| {
                let v = h(mm, u);
                for k in 0..DIM {
                    out[k] = u[k] * v;
                }
            })?
            .0)
    };
    let mut lhs = 0.0;
    for mu in 0..DIM {
        for &(o, w) in &stencil {
            let mut mm = *m;
            mm[mu] += o * fd;
            lhs += w * x_at(&mm)?[mu];
        }
    }
    lhs /= 12.0 * fd;
    let rhs = quad
        .integrate(decay, |u| {
            let u4 = FourVector::from_column_slice(u);
            stencil.iter().map(|&(o, w)| w * h(&(m + o * fd * u4), u)).sum::<f64>() / (12.0 * fd)
        })?
        .value;
    let scale = lhs.abs().max(rhs.abs());
    let rel_err = if scale > 0.0 { (lhs - rhs).abs() / scale } else { 0.0 };
    Ok(DivergenceCheck { lhs, rhs, rel_err })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1, 2, 5, 16, 64] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let deg = 2 * n - 1;
            let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
            let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
            assert!((got - exact).abs() < 1e-13, "n = {n}");
            let even: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(2 * (n as i32 - 1))).sum();
            assert!((even - 2.0 / (2.0 * n as f64 - 1.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn adaptive_rules() {
        let (v, _) = adaptive_gk15(|x| x.sin(), 0.0, PI, 1e-13, 0.0).unwrap();
        assert!((v - 2.0).abs() < 1e-13);
        let (v, _) = integrate_half_line(|x| (-x * x).exp(), 1e-12).unwrap();
        assert!((v - PI.sqrt() / 2.0).abs() < 1e-12);
        let (v, _) = adaptive_gk15(|x| x.sqrt(), 0.0, 1.0, 1e-10, 0.0).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn hyperbolic_ball_areas() {
        let r = 1.7;
        let q2 = FiberQuadrature::with_dim(2);
        let a = q2.integrate(TailDecay::CompactRapidity(r), |_| 1.0).unwrap().value;
        assert!((a - 2.0 * PI * (r.cosh() - 1.0)).abs() < 1e-12);
        let q3 = FiberQuadrature::with_dim(3);
        let v = q3.integrate(TailDecay::CompactRapidity(r), |_| 1.0).unwrap().value;
        assert!((v - crate::minkowski::hyperbolic_ball_volume(3, r)).abs() < 1e-11);
        let q1 = FiberQuadrature::with_dim(1);
        let l = q1.integrate(TailDecay::CompactRapidity(r), |_| 1.0).unwrap().value;
        assert!((l - 2.0 * r).abs() < 1e-13);
    }

    #[test]
    fn odd_integrand_vanishes() {
        let q = FiberQuadrature::default();
        let decay = TailDecay::ExpGamma { rate: 2.0, bound: 1.0 };
        let v = q.integrate(decay, |u| u[1] * (-2.0 * u[0]).exp()).unwrap().value;
        assert!(v.abs() < 1e-14);
    }

    #[test]
    fn insufficient_decay_is_rejected() {
        let q = FiberQuadrature::default();
        assert!(q.integrate(TailDecay::ExpGamma { rate: 1e-4, bound: 1.0 }, |_| 1.0).is_err());
        assert!(q.integrate(TailDecay::CompactRapidity(20.0), |_| 1.0).is_err());
    }

    #[test]
    fn entropy_flux_basics() {
        let q = FiberQuadrature::default();
        let decay = TailDecay::ExpGamma { rate: 2.0, bound: 1.0 };
        let m = FourVector::zeros();
        let f = |_: &FourVector, u: &[f64]| (-2.0 * u[0]).exp();
        let x = entropy_flux_x(f, f, &m, &q, decay).unwrap();
        assert_eq!(x, FourVector::zeros());
        let g = |_: &FourVector, u: &[f64]| (-1.5 * u[0]).exp();
        let x = entropy_flux_x(f, g, &m, &q, decay).unwrap();
        assert!(x.rows(1, DIM - 1).amax() < 1e-13 * x[0].abs());
        // g -> c g shifts X by ln(c) int g0 f
        let c: f64 = 2.5;
        let gc = |mm: &FourVector, u: &[f64]| c * g(mm, u);
        let xc = entropy_flux_x(f, gc, &m, &q, decay).unwrap();
        let mass = q.integrate(decay, |u| u[0] * f(&m, u)).unwrap().value;
        assert!((xc[0] - x[0] - c.ln() * mass).abs() < 1e-12 * mass);
    }

    #[test]
    fn divergence_identity_for_separable_h() {
        let q = FiberQuadrature::default();
        let r0 = 1.5;
        let bump = move |u: &[f64]| {
            let r = u[0].acosh();
            if r < r0 {
                (1.0 - (r / r0).powi(2)).powi(4) * (1.0 + 0.4 * u[1])
            } else {
                0.0
            }
        };
        let h = |m: &FourVector, u: &[f64]| {
            let c = FourVector::from_fn(|i, _| [0.2, -0.3, 0.1, 0.4][i]);
            (-(m - c).norm_squared()).exp() * bump(u)
        };
        let m = FourVector::from_fn(|i, _| [0.1, 0.2, -0.1, 0.3][i]);
        let chk = divergence_check(h, &m, 1e-3, &q, TailDecay::CompactRapidity(r0)).unwrap();
        assert!(chk.rel_err < 1e-6, "{chk:?}");
        let flat = |_: &FourVector, u: &[f64]| bump(u);
        let chk = divergence_check(flat, &m, 1e-3, &q, TailDecay::CompactRapidity(r0)).unwrap();
        assert!(chk.lhs.abs() < 1e-9 && chk.rhs.abs() < 1e-9);
    }
}
