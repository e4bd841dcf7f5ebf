//! Frames stored as unevaluated sums `hi + lo` of f64 matrices (double-double).
//!
//! A Lorentz frame at rapidity `r` has entries of size `cosh r`. Rounding a
//! boost factor to f64 leaves a non-Lorentz error of order 1e-16, and every
//! later boost conjugates that error, so after the path has moved a further
//! rapidity `R` the frame defect is about `cosh(R)^2 * 1e-16`. Long Dudley runs
//! reach `cosh R ~ 1e6`. Building the boost factors and the products in
//! double-double arithmetic moves that floor below 1e-20.

use crate::minkowski::{Matrix, SpatialVector, DIM, SPATIAL_DIM};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn fast_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Double-double number.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = fast_two_sum(s, e + t);
        let (hi, lo) = fast_two_sum(s, e + f);
        Dd { hi, lo }
    }

    pub fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let (hi, lo) = fast_two_sum(p, e + (self.hi * b.lo + self.lo * b.hi));
        Dd { hi, lo }
    }

    pub fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = fast_two_sum(p, e + self.lo * b);
        Dd { hi, lo }
    }

    pub fn div_f64(self, b: f64) -> Dd {
        let q1 = self.hi / b;
        let r = self.add(Dd::from_f64(q1).mul_f64(-b));
        let q2 = r.hi / b;
        let (hi, lo) = fast_two_sum(q1, q2);
        Dd { hi, lo }
    }
}

/// Dot-product accumulator in double-double.
#[derive(Clone, Copy, Default)]
struct Acc {
    hi: f64,
    lo: f64,
}

impl Acc {
    #[inline]
    fn add_prod(&mut self, ah: f64, al: f64, bh: f64, bl: f64) {
        let (p, e) = two_prod(ah, bh);
        let (s, t) = two_sum(self.hi, p);
        self.hi = s;
        self.lo += t + e + (ah * bl + al * bh);
    }

    #[inline]
    fn add(&mut self, a: f64) {
        let (s, t) = two_sum(self.hi, a);
        self.hi = s;
        self.lo += t;
    }

    #[inline]
    fn finish(self) -> (f64, f64) {
        fast_two_sum(self.hi, self.lo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompensatedMatrix {
    pub hi: Matrix,
    pub lo: Matrix,
}

impl CompensatedMatrix {
    pub fn new(m: Matrix) -> Self {
        Self { hi: m, lo: Matrix::zeros() }
    }

    /// `self * b` in double-double arithmetic.
    pub fn mul(&self, b: &CompensatedMatrix) -> Self {
        let mut hi = Matrix::zeros();
        let mut lo = Matrix::zeros();
        for i in 0..DIM {
            for j in 0..DIM {
                let mut acc = Acc::default();
                for k in 0..DIM {
                    acc.add_prod(self.hi[(i, k)], self.lo[(i, k)], b.hi[(k, j)], b.lo[(k, j)]);
                }
                let (h, l) = acc.finish();
                hi[(i, j)] = h;
                lo[(i, j)] = l;
            }
        }
        Self { hi, lo }
    }

    /// `self + d` with `d` a plain f64 increment.
    pub fn add_plain(&self, d: &Matrix) -> Self {
        let mut out = *self;
        for idx in 0..DIM * DIM {
            let (s, e) = two_sum(self.hi[idx], d[idx]);
            let (h, l) = fast_two_sum(s, e + self.lo[idx]);
            out.hi[idx] = h;
            out.lo[idx] = l;
        }
        out
    }

    /// `exp(sum chi_i E_i)` for an f64 rapidity vector, correct to double-double precision.
    pub fn boost(chi: &SpatialVector) -> Self {
        let mut r2 = Acc::default();
        for i in 0..SPATIAL_DIM {
            r2.add_prod(chi[i], 0.0, chi[i], 0.0);
        }
        let (h, l) = r2.finish();
        let r2 = Dd { hi: h, lo: l };
        // k1 = sinh(r)/r = sum r^2k/(2k+1)!, k2 = (cosh r - 1)/r^2 = sum r^2k/(2k+2)!
        let mut k1 = Dd::ONE;
        let mut k2 = Dd::from_f64(0.5);
        let mut t1 = Dd::ONE;
        let mut t2 = Dd::from_f64(0.5);
        for k in 1..200 {
            let kf = k as f64;
            t1 = t1.mul(r2).div_f64((2.0 * kf) * (2.0 * kf + 1.0));
            t2 = t2.mul(r2).div_f64((2.0 * kf + 1.0) * (2.0 * kf + 2.0));
            k1 = k1.add(t1);
            k2 = k2.add(t2);
            if t1.hi.abs() < 1e-34 * k1.hi && t2.hi.abs() < 1e-34 * k2.hi {
                break;
            }
        }
        let c = Dd::ONE.add(k2.mul(r2));
        let mut out = Self::new(Matrix::identity());
        let mut set = |i: usize, j: usize, v: Dd| {
            out.hi[(i, j)] = v.hi;
            out.lo[(i, j)] = v.lo;
        };
        set(0, 0, c);
        for i in 0..SPATIAL_DIM {
            let b = k1.mul_f64(chi[i]);
            set(0, i + 1, b);
            set(i + 1, 0, b);
            for j in 0..SPATIAL_DIM {
                let (p, e) = two_prod(chi[i], chi[j]);
                let mut v = k2.mul(Dd { hi: p, lo: e });
                if i == j {
                    v = v.add(Dd::ONE);
                }
                set(i + 1, j + 1, v);
            }
        }
        out
    }

    /// Max-abs entry of `M^T Q M - eta` for a diagonal metric `Q`, evaluated in
    /// double-double arithmetic.
    pub fn defect_diag_metric(&self, q_diag: &[f64; DIM]) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..DIM {
            for b in a..DIM {
                let mut acc = Acc::default();
                for k in 0..DIM {
                    let x = Dd { hi: self.hi[(k, a)], lo: self.lo[(k, a)] }.mul_f64(q_diag[k]);
                    acc.add_prod(x.hi, x.lo, self.hi[(k, b)], self.lo[(k, b)]);
                }
                let target = match (a == b, a) {
                    (false, _) => 0.0,
                    (true, 0) => 1.0,
                    (true, _) => -1.0,
                };
                acc.add(-target);
                let (h, l) = acc.finish();
                worst = worst.max((h + l).abs());
            }
        }
        worst
    }

    /// `q(g0, g0)` of the first column for a diagonal metric, in double-double.
    pub fn timelike_norm_diag_metric(&self, q_diag: &[f64; DIM]) -> f64 {
        let mut acc = Acc::default();
        for k in 0..DIM {
            let x = Dd { hi: self.hi[(k, 0)], lo: self.lo[(k, 0)] }.mul_f64(q_diag[k]);
            acc.add_prod(x.hi, x.lo, self.hi[(k, 0)], self.lo[(k, 0)]);
        }
        let (h, l) = acc.finish();
        h + l
    }
}
