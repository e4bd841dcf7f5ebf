//! Linear algebra of the Minkowski space R^{1,d}.
//!
//! Vectors are expressed in the canonical basis e0..ed with the quadratic form
//! `q(u, v) = u0 v0 - sum ui vi`. A frame is a square matrix whose columns are
//! the frame vectors g0..gd; it is Lorentz orthonormal when `G^T eta G = eta`.
//!
//! The spatial dimension `d` is fixed at compile time ([`SPATIAL_DIM`], 3 by
//! default, 2 with the `dim2` feature).

use nalgebra::{SMatrix, SVector};
use thiserror::Error;

#[cfg(feature = "dim2")]
pub const SPATIAL_DIM: usize = 2;
#[cfg(not(feature = "dim2"))]
pub const SPATIAL_DIM: usize = 3;

/// Spacetime dimension `1 + d`.
pub const DIM: usize = SPATIAL_DIM + 1;

pub type FourVector = SVector<f64, DIM>;
/// Square matrix on R^{1,d}; frames and Lie algebra elements use this type.
pub type Matrix = SMatrix<f64, DIM, DIM>;
pub type SpatialVector = SVector<f64, SPATIAL_DIM>;
pub type SpatialMatrix = SMatrix<f64, SPATIAL_DIM, SPATIAL_DIM>;

/// Tolerance used to decide membership in so(1,d).
pub const ALGEBRA_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MinkowskiError {
    #[error("matrix is not in so(1,d): residual {residual:e}")]
    NotInAlgebra { residual: f64 },
    #[error("q(u, v) = {value} is below 1, points are not on the same sheet of the hyperboloid")]
    NotOnHyperboloid { value: f64 },
    #[error("matrix exponential produced a non-finite result")]
    NonFinite,
}

/// The Minkowski metric `diag(1, -1, ..., -1)`.
pub fn eta() -> Matrix {
    let mut m = Matrix::zeros();
    m[(0, 0)] = 1.0;
    for i in 1..DIM {
        m[(i, i)] = -1.0;
    }
    m
}

/// Canonical basis vector `e_i`.
pub fn basis(i: usize) -> FourVector {
    let mut v = FourVector::zeros();
    v[i] = 1.0;
    v
}

pub fn q_inner(u: &FourVector, v: &FourVector) -> f64 {
    let mut s = u[0] * v[0];
    for i in 1..DIM {
        s -= u[i] * v[i];
    }
    s
}

/// Boost generator `E_i`, `i` in `1..=d`.
pub fn boost_generator(i: usize) -> Matrix {
    assert!((1..DIM).contains(&i), "boost index {i} out of range 1..={SPATIAL_DIM}");
    let mut e = Matrix::zeros();
    e[(0, i)] = 1.0;
    e[(i, 0)] = 1.0;
    e
}

/// Generator of the rotation in the `(e_i, e_j)` plane, `1 <= i, j <= d`.
pub fn rotation_generator(i: usize, j: usize) -> Matrix {
    assert!((1..DIM).contains(&i) && (1..DIM).contains(&j) && i != j);
    let mut r = Matrix::zeros();
    r[(i, j)] = -1.0;
    r[(j, i)] = 1.0;
    r
}

/// `sum_i xi_i E_i`.
pub fn boost_algebra(xi: &SpatialVector) -> Matrix {
    let mut x = Matrix::zeros();
    for i in 0..SPATIAL_DIM {
        x[(0, i + 1)] = xi[i];
        x[(i + 1, 0)] = xi[i];
    }
    x
}

/// `exp(t E_i)`: hyperbolic rotation in the `(e0, ei)` plane.
pub fn boost_exp(i: usize, t: f64) -> Matrix {
    assert!((1..DIM).contains(&i), "boost index {i} out of range 1..={SPATIAL_DIM}");
    let mut b = Matrix::identity();
    // cosh taken from sinh so the rounded pair satisfies c^2 - s^2 = 1 as closely as possible
    let s = t.sinh();
    let c = s.mul_add(s, 1.0).sqrt();
    b[(0, 0)] = c;
    b[(i, i)] = c;
    b[(0, i)] = s;
    b[(i, 0)] = s;
    b
}

/// Coefficients of the pure boost `exp(sum chi_i E_i)`: `(cosh r, sinh(r)/r, (cosh r - 1)/r^2)`
/// with `r = |chi|`, stable for small `r`.
fn boost_coefficients(chi: &SpatialVector) -> (f64, f64, f64) {
    let r = chi.norm();
    if r < 1e-6 {
        let r2 = r * r;
        (1.0 + 0.5 * r2, 1.0 + r2 / 6.0, 0.5 + r2 / 24.0)
    } else {
        let half = (0.5 * r).sinh();
        (r.cosh(), r.sinh() / r, 2.0 * half * half / (r * r))
    }
}

/// Closed form of `exp(sum chi_i E_i)` for a rapidity vector `chi`.
pub fn boost_from_rapidity(chi: &SpatialVector) -> Matrix {
    let (c, k1, k2) = boost_coefficients(chi);
    let mut b = Matrix::identity();
    b[(0, 0)] = c;
    for i in 0..SPATIAL_DIM {
        b[(0, i + 1)] = k1 * chi[i];
        b[(i + 1, 0)] = k1 * chi[i];
        for j in 0..SPATIAL_DIM {
            b[(i + 1, j + 1)] += k2 * chi[i] * chi[j];
        }
    }
    b
}

/// `G * exp(sum chi_i E_i)` without forming the boost matrix.
pub fn right_mul_boost(g: &Matrix, chi: &SpatialVector) -> Matrix {
    let (c, k1, k2) = boost_coefficients(chi);
    let mut w = FourVector::zeros();
    for i in 0..SPATIAL_DIM {
        w += chi[i] * g.column(i + 1);
    }
    let g0 = g.column(0).into_owned();
    let shift = k1 * g0 + k2 * w;
    let mut out = *g;
    out.set_column(0, &(c * g0 + k1 * w));
    for j in 0..SPATIAL_DIM {
        let col = g.column(j + 1) + chi[j] * shift;
        out.set_column(j + 1, &col);
    }
    out
}

/// Embeds a spatial rotation as `diag(1, R)`.
pub fn spatial_rotation(r: &SpatialMatrix) -> Matrix {
    let mut m = Matrix::identity();
    m.fixed_view_mut::<SPATIAL_DIM, SPATIAL_DIM>(1, 1).copy_from(r);
    m
}

/// Rotation by `angle` in the `(e_i, e_j)` spatial plane (indices in `1..=d`).
pub fn plane_rotation(i: usize, j: usize, angle: f64) -> Matrix {
    let mut m = Matrix::identity();
    let (s, c) = angle.sin_cos();
    m[(i, i)] = c;
    m[(j, j)] = c;
    m[(i, j)] = -s;
    m[(j, i)] = s;
    m
}

/// Max-abs entry of `X eta + eta X^T`.
pub fn algebra_residual(x: &Matrix) -> f64 {
    let e = eta();
    (x * e + e * x.transpose()).amax()
}

/// Matrix exponential of an element of so(1,d).
///
/// Uses nalgebra's scaling-and-squaring Pade approximant.
pub fn group_exp(x: &Matrix) -> Result<Matrix, MinkowskiError> {
    let residual = algebra_residual(x);
    if residual > ALGEBRA_TOL * x.amax().max(1.0) {
        return Err(MinkowskiError::NotInAlgebra { residual });
    }
    let g = x.exp();
    if g.iter().any(|v| !v.is_finite()) {
        return Err(MinkowskiError::NonFinite);
    }
    Ok(g)
}

/// Max-abs entry of `G^T Q G - eta` for a metric `Q`.
pub fn defect_in_metric(g: &Matrix, q: &Matrix) -> f64 {
    (g.transpose() * q * g - eta()).amax()
}

/// Max-abs entry of `G^T eta G - eta`.
pub fn orthonormality_defect(g: &Matrix) -> f64 {
    defect_in_metric(g, &eta())
}

/// Inverse of a frame that is orthonormal for `Q`: `eta G^T Q`.
pub fn frame_inverse(g: &Matrix, q: &Matrix) -> Matrix {
    eta() * g.transpose() * q
}

/// Hyperbolic distance `arcosh q(u, v)` between two points of the unit hyperboloid.
pub fn hyperbolic_distance(u: &FourVector, v: &FourVector) -> Result<f64, MinkowskiError> {
    let c = q_inner(u, v);
    if !(c >= 1.0 - 1e-8) {
        return Err(MinkowskiError::NotOnHyperboloid { value: c });
    }
    Ok(c.max(1.0).acosh())
}

/// Volume of a geodesic ball of radius `rho` in hyperbolic space of dimension `d`.
pub fn hyperbolic_ball_volume(d: usize, rho: f64) -> f64 {
    use std::f64::consts::PI;
    match d {
        1 => 2.0 * rho,
        2 => 2.0 * PI * (rho.cosh() - 1.0),
        3 => PI * ((2.0 * rho).sinh() - 2.0 * rho),
        _ => panic!("hyperbolic ball volume implemented for d <= 3"),
    }
}

/// Volume of a Euclidean ball of radius `r` in dimension `d`.
pub fn euclidean_ball_volume(d: usize, r: f64) -> f64 {
    use std::f64::consts::PI;
    match d {
        1 => 2.0 * r,
        2 => PI * r * r,
        3 => 4.0 / 3.0 * PI * r * r * r,
        _ => panic!("ball volume implemented for d <= 3"),
    }
}

/// Velocity coordinates `q` of a unit future timelike vector `(gamma, q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityCoords {
    pub q: SpatialVector,
}

impl VelocityCoords {
    pub fn new(q: SpatialVector) -> Self {
        Self { q }
    }

    pub fn gamma(&self) -> f64 {
        (1.0 + self.q.norm_squared()).sqrt()
    }

    /// Spatial part of `g0`; the time component is discarded and recomputed on the way back.
    pub fn from_four_velocity(g0: &FourVector) -> Self {
        Self { q: g0.fixed_rows::<SPATIAL_DIM>(1).into_owned() }
    }

    pub fn to_four_velocity(&self) -> FourVector {
        let mut v = FourVector::zeros();
        v[0] = self.gamma();
        v.fixed_rows_mut::<SPATIAL_DIM>(1).copy_from(&self.q);
        v
    }

    /// The pure boost taking `e0` to this velocity.
    pub fn boost(&self) -> Matrix {
        let n = self.q.norm();
        if n == 0.0 {
            return Matrix::identity();
        }
        let chi = self.q * (n.asinh() / n);
        boost_from_rapidity(&chi)
    }
}
