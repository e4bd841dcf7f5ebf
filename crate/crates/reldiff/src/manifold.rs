//! Chart-based Lorentzian spacetimes: Minkowski and spatially flat
//! Robertson-Walker `dt^2 - a(t)^2 |dx|^2`.
//!
//! Both presets admit a single global chart, so an [`Event`] is just chart
//! coordinates tagged with the chart it belongs to. Geodesics and parallel
//! transport are integrated with classical RK4.

use crate::minkowski::{FourVector, Matrix, DIM, SPATIAL_DIM};
use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("event at t = {t} is outside the chart domain t >= {t_min}")]
    OutOfDomain { t: f64, t_min: f64 },
    #[error("event belongs to chart {found:?}, spacetime uses {expected:?}")]
    ChartMismatch { expected: ChartId, found: ChartId },
    #[error("non-finite coordinates")]
    NonFinite,
    #[error("step size must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("invalid spacetime parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChartId {
    Minkowski,
    RobertsonWalker,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub coords: FourVector,
    pub chart: ChartId,
}

impl Event {
    pub fn t(&self) -> f64 {
        self.coords[0]
    }
}

/// Scale factor of a spatially flat Robertson-Walker metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScaleFactor {
    /// `a(t) = t^p`
    PowerLaw { p: f64 },
    /// `a(t) = exp(h t)`
    Exponential { h: f64 },
    /// `a(t) = a0`
    Constant { a0: f64 },
}

impl ScaleFactor {
    pub fn a(&self, t: f64) -> f64 {
        match *self {
            ScaleFactor::PowerLaw { p } => t.powf(p),
            ScaleFactor::Exponential { h } => (h * t).exp(),
            ScaleFactor::Constant { a0 } => a0,
        }
    }

    pub fn a_dot(&self, t: f64) -> f64 {
        match *self {
            ScaleFactor::PowerLaw { p } => p * t.powf(p - 1.0),
            ScaleFactor::Exponential { h } => h * (h * t).exp(),
            ScaleFactor::Constant { .. } => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RwParams {
    pub scale: ScaleFactor,
    /// Lower edge of the chart; stepping below it terminates a path.
    pub t_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Spacetime {
    Minkowski,
    RobertsonWalker(RwParams),
}

impl Spacetime {
    pub fn robertson_walker(scale: ScaleFactor, t_min: f64) -> Result<Self, GeometryError> {
        if let ScaleFactor::PowerLaw { .. } = scale {
            if !(t_min > 0.0) {
                return Err(GeometryError::InvalidParameter(format!(
                    "power-law scale factor needs t_min > 0, got {t_min}"
                )));
            }
        }
        if let ScaleFactor::Constant { a0 } = scale {
            if !(a0 > 0.0) {
                return Err(GeometryError::InvalidParameter(format!("a0 must be positive, got {a0}")));
            }
        }
        Ok(Spacetime::RobertsonWalker(RwParams { scale, t_min }))
    }

    pub fn chart(&self) -> ChartId {
        match self {
            Spacetime::Minkowski => ChartId::Minkowski,
            Spacetime::RobertsonWalker(_) => ChartId::RobertsonWalker,
        }
    }

    pub fn is_minkowski(&self) -> bool {
        matches!(self, Spacetime::Minkowski)
    }

    pub fn event(&self, coords: FourVector) -> Event {
        Event { coords, chart: self.chart() }
    }

    pub fn check(&self, m: &Event) -> Result<(), GeometryError> {
        if m.chart != self.chart() {
            return Err(GeometryError::ChartMismatch { expected: self.chart(), found: m.chart });
        }
        if m.coords.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if let Spacetime::RobertsonWalker(rw) = self {
            let t = m.t();
            if t < rw.t_min || !(rw.scale.a(t) > 0.0) {
                return Err(GeometryError::OutOfDomain { t, t_min: rw.t_min });
            }
        }
        Ok(())
    }

    /// Scale factor and its derivative at `m` (`(1, 0)` in Minkowski).
    fn scale_at(&self, m: &Event) -> Result<(f64, f64), GeometryError> {
        self.check(m)?;
        Ok(match self {
            Spacetime::Minkowski => (1.0, 0.0),
            Spacetime::RobertsonWalker(rw) => (rw.scale.a(m.t()), rw.scale.a_dot(m.t())),
        })
    }

    /// Diagonal of the metric `Q_m`.
    pub fn metric_diag(&self, m: &Event) -> Result<[f64; DIM], GeometryError> {
        let (a, _) = self.scale_at(m)?;
        let mut d = [-a * a; DIM];
        d[0] = 1.0;
        Ok(d)
    }

    pub fn metric_at(&self, m: &Event) -> Result<Matrix, GeometryError> {
        let d = self.metric_diag(m)?;
        Ok(Matrix::from_diagonal(&FourVector::from_column_slice(&d)))
    }

    pub fn inverse_metric_at(&self, m: &Event) -> Result<Matrix, GeometryError> {
        let d = self.metric_diag(m)?;
        Ok(Matrix::from_diagonal(&FourVector::from_fn(|i, _| 1.0 / d[i])))
    }

    /// `q_m(u, v)`.
    pub fn inner(&self, m: &Event, u: &FourVector, v: &FourVector) -> Result<f64, GeometryError> {
        let d = self.metric_diag(m)?;
        Ok((0..DIM).map(|k| d[k] * u[k] * v[k]).sum())
    }

    /// Signature check `(+, -, ..., -)` from the eigenvalues of `Q_m`.
    pub fn has_lorentzian_signature(&self, m: &Event) -> Result<bool, GeometryError> {
        let eig = SymmetricEigen::new(self.metric_at(m)?);
        let pos = eig.eigenvalues.iter().filter(|&&l| l > 0.0).count();
        let neg = eig.eigenvalues.iter().filter(|&&l| l < 0.0).count();
        Ok(pos == 1 && neg == SPATIAL_DIM)
    }

    /// Christoffel contraction `Gamma_m(u, v)`.
    pub fn christoffel_at(&self, m: &Event, u: &FourVector, v: &FourVector) -> Result<FourVector, GeometryError> {
        let (a, ad) = self.scale_at(m)?;
        let mut out = FourVector::zeros();
        if ad == 0.0 {
            return Ok(out);
        }
        let mut dot = 0.0;
        for i in 1..DIM {
            dot += u[i] * v[i];
            out[i] = (ad / a) * (u[0] * v[i] + v[0] * u[i]);
        }
        out[0] = a * ad * dot;
        Ok(out)
    }

    /// Future-directed unit normal of the constant-time slices, `d/dt`.
    pub fn time_orientation(&self, _m: &Event) -> FourVector {
        let mut v = FourVector::zeros();
        v[0] = 1.0;
        v
    }

    /// Orthonormal frame of the observers at rest in the chart: `diag(1, 1/a, ..., 1/a)`.
    pub fn observer_frame(&self, m: &Event) -> Result<Matrix, GeometryError> {
        let (a, _) = self.scale_at(m)?;
        let mut f = Matrix::identity();
        for i in 1..DIM {
            f[(i, i)] = 1.0 / a;
        }
        Ok(f)
    }

    /// One RK4 step of the geodesic equation `m' = u, u' = -Gamma(u, u)`.
    pub fn geodesic_step(&self, m: &Event, u: &FourVector, dt: f64) -> Result<(Event, FourVector), GeometryError> {
        if !(dt > 0.0) {
            return Err(GeometryError::NonPositiveStep(dt));
        }
        let mut g = Matrix::zeros();
        g.set_column(0, u);
        let (m2, g2) = self.transport_frame(m, &g, dt)?;
        Ok((m2, g2.column(0).into_owned()))
    }

    /// One RK4 step transporting `w` along the geodesic with initial velocity `u`.
    pub fn parallel_transport_step(
        &self,
        m: &Event,
        u: &FourVector,
        w: &FourVector,
        dt: f64,
    ) -> Result<FourVector, GeometryError> {
        if !(dt > 0.0) {
            return Err(GeometryError::NonPositiveStep(dt));
        }
        let mut g = Matrix::zeros();
        g.set_column(0, u);
        g.set_column(1, w);
        let (_, g2) = self.transport_frame(m, &g, dt)?;
        Ok(g2.column(1).into_owned())
    }

    /// Moves `m` along the geodesic with velocity `g0` (first column of `G`) for
    /// parameter `ds` and parallel transports every column of `G`. A negative
    /// `ds` runs the flow backwards.
    pub fn transport_frame(&self, m: &Event, g: &Matrix, ds: f64) -> Result<(Event, Matrix), GeometryError> {
        self.check(m)?;
        if let Spacetime::Minkowski = self {
            let next = Event { coords: m.coords + ds * g.column(0), chart: m.chart };
            return Ok((next, *g));
        }
        let rhs = |x: &FourVector, g: &Matrix| -> Result<(FourVector, Matrix), GeometryError> {
            let ev = Event { coords: *x, chart: m.chart };
            let g0 = g.column(0).into_owned();
            let mut dg = Matrix::zeros();
            for a in 0..DIM {
                let col = g.column(a).into_owned();
                dg.set_column(a, &(-self.christoffel_at(&ev, &g0, &col)?));
            }
            Ok((g0, dg))
        };
        let x0 = m.coords;
        let (k1x, k1g) = rhs(&x0, g)?;
        let (k2x, k2g) = rhs(&(x0 + 0.5 * ds * k1x), &(g + 0.5 * ds * k1g))?;
        let (k3x, k3g) = rhs(&(x0 + 0.5 * ds * k2x), &(g + 0.5 * ds * k2g))?;
        let (k4x, k4g) = rhs(&(x0 + ds * k3x), &(g + ds * k3g))?;
        let x = x0 + ds / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        let dg = ds / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g);
        let next = Event { coords: x, chart: m.chart };
        self.check(&next)?;
        Ok((next, g + dg))
    }

    /// Increment of the frame over one transport step; used by compensated storage.
    pub fn transport_increment(&self, m: &Event, g: &Matrix, ds: f64) -> Result<(Event, Matrix), GeometryError> {
        let (next, g2) = self.transport_frame(m, g, ds)?;
        Ok((next, g2 - g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minkowski::{basis, boost_exp, defect_in_metric, eta, plane_rotation, q_inner};

    fn rw_linear() -> Spacetime {
        Spacetime::robertson_walker(ScaleFactor::PowerLaw { p: 1.0 }, 0.1).unwrap()
    }

    fn rw_exp(h: f64) -> Spacetime {
        Spacetime::robertson_walker(ScaleFactor::Exponential { h }, f64::NEG_INFINITY).unwrap()
    }

    fn at(st: &Spacetime, t: f64) -> Event {
        let mut c = FourVector::zeros();
        c[0] = t;
        c[1] = 0.3;
        st.event(c)
    }

    /// Unit timelike vector for the metric at `m` with coordinate speed components `v`.
    fn unit_velocity(st: &Spacetime, m: &Event, v: &[f64]) -> FourVector {
        let mut u = FourVector::zeros();
        u[0] = 1.0;
        for (i, x) in v.iter().take(SPATIAL_DIM).enumerate() {
            u[i + 1] = *x;
        }
        let n = st.inner(m, &u, &u).unwrap();
        u / n.sqrt()
    }

    #[test]
    fn metrics() {
        let m = Spacetime::Minkowski.event(FourVector::zeros());
        assert_eq!(Spacetime::Minkowski.metric_at(&m).unwrap(), eta());
        let flat = rw_exp(0.0);
        assert_eq!(flat.metric_at(&at(&flat, 3.0)).unwrap(), eta());
        let q = rw_linear().metric_at(&at(&rw_linear(), 2.0)).unwrap();
        let mut want = -4.0 * Matrix::identity();
        want[(0, 0)] = 1.0;
        assert_eq!(q, want);
    }

    #[test]
    fn domain_guard() {
        let st = rw_linear();
        assert!(matches!(st.metric_at(&at(&st, 0.05)), Err(GeometryError::OutOfDomain { .. })));
        assert!(Spacetime::robertson_walker(ScaleFactor::PowerLaw { p: 0.5 }, 0.0).is_err());
        let wrong = Spacetime::Minkowski.event(FourVector::zeros());
        assert!(matches!(st.check(&wrong), Err(GeometryError::ChartMismatch { .. })));
    }

    #[test]
    fn christoffel_symmetric_and_matches_hubble_terms() {
        let st = rw_linear();
        let m = at(&st, 2.0);
        let u = FourVector::from_fn(|i, _| [1.3, 0.2, -0.4, 0.7][i]);
        let v = FourVector::from_fn(|i, _| [0.9, -1.1, 0.5, 0.1][i]);
        let a = st.christoffel_at(&m, &u, &v).unwrap();
        let b = st.christoffel_at(&m, &v, &u).unwrap();
        assert!((a - b).amax() <= 1e-14);
        // a = t, a' = 1 at t = 2: time component a a' |x'|^2
        let g0 = u;
        let c = st.christoffel_at(&m, &g0, &g0).unwrap();
        let speed2: f64 = (1..DIM).map(|i| g0[i] * g0[i]).sum();
        assert!((c[0] - 2.0 * speed2).abs() < 1e-14);
        assert!((c[1] - 2.0 * 0.5 * g0[0] * g0[1]).abs() < 1e-14);
        assert_eq!(Spacetime::Minkowski.christoffel_at(&m_mink(), &u, &v).unwrap(), FourVector::zeros());
    }

    fn m_mink() -> Event {
        Spacetime::Minkowski.event(FourVector::zeros())
    }

    #[test]
    fn minkowski_geodesic_is_straight() {
        let u = boost_exp(2, 0.4) * basis(0);
        let m = m_mink();
        let (m2, u2) = Spacetime::Minkowski.geodesic_step(&m, &u, 0.25).unwrap();
        assert_eq!(m2.coords, m.coords + 0.25 * u);
        assert_eq!(u2, u);
        let w = basis(SPATIAL_DIM);
        assert_eq!(Spacetime::Minkowski.parallel_transport_step(&m, &u, &w, 0.1).unwrap(), w);
    }

    #[test]
    fn rw_geodesic_preserves_norm() {
        let st = rw_linear();
        let m = at(&st, 1.5);
        let u = unit_velocity(&st, &m, &[0.4, 0.1, -0.2]);
        let (m2, u2) = st.geodesic_step(&m, &u, 1e-2).unwrap();
        let n = st.inner(&m2, &u2, &u2).unwrap();
        assert!((n - 1.0).abs() <= 1e-10, "{n}");
    }

    #[test]
    fn transport_is_isometry() {
        let st = rw_linear();
        let m = at(&st, 1.5);
        let u = unit_velocity(&st, &m, &[0.4, 0.1, -0.2]);
        let w = FourVector::from_fn(|i, _| [0.3, 0.1, 0.2, -0.5][i]);
        let w2 = st.parallel_transport_step(&m, &u, &w, 1e-2).unwrap();
        let (m2, u2) = st.geodesic_step(&m, &u, 1e-2).unwrap();
        let before = st.inner(&m, &w, &w).unwrap();
        let after = st.inner(&m2, &w2, &w2).unwrap();
        assert!((after - before).abs() <= 1e-10);
        let c0 = st.inner(&m, &w, &u).unwrap();
        let c1 = st.inner(&m2, &w2, &u2).unwrap();
        assert!((c1 - c0).abs() <= 1e-10);
        let (m0, g0) = st.transport_frame(&m, &Matrix::identity(), 0.0).unwrap();
        assert_eq!((m0.coords, g0), (m.coords, Matrix::identity()));
    }

    #[test]
    fn exponential_radial_geodesic_matches_fine_reference() {
        let st = rw_exp(0.5);
        let m0 = at(&st, 0.0);
        let u0 = unit_velocity(&st, &m0, &[0.8, 0.0, 0.0]);
        let run = |n: usize| {
            let dt = 1.0 / n as f64;
            let (mut m, mut u) = (m0, u0);
            for _ in 0..n {
                (m, u) = st.geodesic_step(&m, &u, dt).unwrap();
            }
            (m.coords, u)
        };
        let (mc, uc) = run(100);
        let (mf, uf) = run(10_000);
        assert!((mc - mf).amax() <= 1e-8);
        assert!((uc - uf).amax() <= 1e-8);
        // Conserved comoving momentum a^2 dx/ds along the radial geodesic.
        let a0 = 1.0;
        let a1 = (0.5 * mf[0]).exp();
        assert!((a1 * a1 * uf[1] - a0 * a0 * u0[1]).abs() < 1e-10);
    }

    #[test]
    fn frame_transport_keeps_orthonormality() {
        let st = rw_linear();
        let m = at(&st, 1.0);
        let u = unit_velocity(&st, &m, &[0.5, -0.3, 0.2]);
        // Orthonormal frame for Q_m: metric Gram-Schmidt on a boosted observer frame.
        let f = st.observer_frame(&m).unwrap();
        let mut g = f * boost_exp(1, 0.3) * plane_rotation(SPATIAL_DIM - 1, SPATIAL_DIM, 0.7);
        g.set_column(0, &u);
        let q = st.metric_at(&m).unwrap();
        let g = crate::framebundle::gram_schmidt(&g, &q);
        assert!(defect_in_metric(&g, &q) < 1e-14);
        let (mut m, mut g) = (m, g);
        for _ in 0..10_000 {
            (m, g) = st.transport_frame(&m, &g, 1e-3).unwrap();
        }
        let q = st.metric_at(&m).unwrap();
        assert!(defect_in_metric(&g, &q) <= 1e-9);
        assert!(q_inner(&basis(0), &basis(0)) == 1.0);
    }

    #[test]
    fn signatures() {
        let st = rw_linear();
        for k in 0..1000 {
            let t = 0.1 + 0.05 * k as f64;
            assert!(st.has_lorentzian_signature(&at(&st, t)).unwrap());
        }
        assert!(Spacetime::Minkowski.has_lorentzian_signature(&m_mink()).unwrap());
    }
}
