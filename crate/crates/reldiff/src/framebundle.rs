//! Stochastic flows on the orthonormal frame bundle.
//!
//! A state `e = (m, G)` is an event together with a frame orthonormal for the
//! metric at `m`. The diffusion is driven by
//!
//! ```text
//! de = H0(e) ds + V(e) ds + sum_i V_i(e) o dbeta^i,
//! dbeta = lambda^{1/2} A^{-1} M o dw,
//! ```
//!
//! where `H0` is the geodesic spray, `V_i(e) = G E_i` are the boost fields,
//! `(A, lambda)` is the interaction of `G` with the rest frame `f = z(e)` and `M`
//! mixes the driving Brownian motion `w`.
//!
//! One step is Strang-split: half a vertical step, a full horizontal step, half
//! a vertical step. The vertical half-step moves the frame by the group
//! exponential of a pure boost and uses a Heun predictor-corrector on the
//! state-dependent coefficients, which gives the Stratonovich reading.

use crate::compensated::CompensatedMatrix;
use crate::manifold::{Event, GeometryError, Spacetime};
use crate::minkowski::{
    boost_exp, eta, right_mul_boost, FourVector, Matrix, SpatialMatrix, SpatialVector, DIM, SPATIAL_DIM,
};
use crate::rng::PathRng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BundleError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("rest frame gives a singular interaction matrix")]
    DegenerateRestFrame,
    #[error("q(f0, g0) = {lambda} < 1: frames are not a valid pair")]
    InvalidFramePair { lambda: f64 },
    #[error("invalid process specification: {0}")]
    InvalidSpec(String),
}

/// Why a path stopped before its step budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Exploded,
    ChartExit(String),
    DegenerateRestFrame,
    InvalidFramePair,
}

impl From<BundleError> for Termination {
    fn from(e: BundleError) -> Self {
        match e {
            BundleError::Geometry(g) => Termination::ChartExit(g.to_string()),
            BundleError::DegenerateRestFrame => Termination::DegenerateRestFrame,
            BundleError::InvalidFramePair { .. } => Termination::InvalidFramePair,
            BundleError::InvalidSpec(s) => Termination::ChartExit(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BundlePoint {
    pub m: Event,
    pub frame: CompensatedMatrix,
}

impl BundlePoint {
    pub fn new(m: Event, g: Matrix) -> Self {
        Self { m, frame: CompensatedMatrix::new(g) }
    }

    /// The frame rounded to f64.
    pub fn g(&self) -> &Matrix {
        &self.frame.hi
    }

    pub fn g0(&self) -> FourVector {
        self.frame.hi.column(0).into_owned()
    }

    fn with_frame(&self, g: Matrix) -> Self {
        Self { m: self.m, frame: CompensatedMatrix::new(g) }
    }
}

pub type FrameFn = Arc<dyn Fn(&BundlePoint) -> Matrix + Send + Sync>;
pub type VerticalFn = Arc<dyn Fn(&BundlePoint) -> SpatialVector + Send + Sync>;

/// The rest frame `z(e)` of the medium, based at the same event as `e`.
#[derive(Clone)]
pub enum RestFrameMap {
    Comoving,
    /// The chart's observer frame: the identity in Minkowski, the comoving
    /// observers in Robertson-Walker.
    LabFrame,
    Custom(FrameFn),
}

impl fmt::Debug for RestFrameMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RestFrameMap::Comoving => write!(f, "Comoving"),
            RestFrameMap::LabFrame => write!(f, "LabFrame"),
            RestFrameMap::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Vertical drift field.
#[derive(Clone)]
pub enum Forcing {
    Zero,
    /// Friction towards the rest frame. The boost coefficients are those of
    /// `-grad(2 alpha ln lambda - 1/(4 lambda))` on the hyperboloid, `lambda = q(f0, g0)`;
    /// in Minkowski with the lab rest frame the velocity `q` then obeys
    /// `dq = -2 alpha q / gamma dt + dW` in lab time.
    RoupGradient { alpha: f64 },
    /// User map `e -> (a_1..a_d)`, the field `sum a_i V_i`.
    CustomVertical(VerticalFn),
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::Zero => write!(f, "Zero"),
            Forcing::RoupGradient { alpha } => write!(f, "RoupGradient {{ alpha: {alpha} }}"),
            Forcing::CustomVertical(_) => write!(f, "CustomVertical(..)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub mixing: SpatialMatrix,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn isotropic(seed: u64) -> Self {
        Self { mixing: SpatialMatrix::identity(), seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorParams {
    pub dt: f64,
    /// Paths whose `g0` time component exceeds this are flagged exploded.
    pub gamma_cap: f64,
    pub coord_cap: f64,
    /// Gram-Schmidt is applied when the orthonormality defect exceeds this.
    pub reorthonormalize_above: f64,
    /// Store frames in double-double arithmetic. Needed to keep the defect at
    /// the 1e-8 level once rapidities reach ~10; about ten times slower.
    pub compensated: bool,
}

impl Default for IntegratorParams {
    fn default() -> Self {
        Self { dt: 1e-3, gamma_cap: 1e6, coord_cap: 1e12, reorthonormalize_above: 1e-10, compensated: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Future,
    Past,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Future => 1.0,
            Direction::Past => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetTag {
    Dudley,
    FljChart,
    RoupMink,
    RoupRw,
    FljRw,
    Reverse,
    Custom,
}

#[derive(Debug, Clone)]
pub struct ProcessSpec {
    pub preset: PresetTag,
    pub spacetime: Spacetime,
    pub rest_frame: RestFrameMap,
    pub forcing: Forcing,
    pub noise: NoiseSpec,
    pub integrator: IntegratorParams,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// Proper time at the end of the step.
    pub s: f64,
    /// Orthonormality defect before any re-projection.
    pub defect: f64,
    /// `|q(g0, g0) - 1|`.
    pub unit_norm_error: f64,
    /// `q(f0, g0)` against the rest frame at the end of the step.
    pub lambda: f64,
    /// Time component of `g0` in the chart (lambda against the observer frame).
    pub gamma: f64,
    pub exploded: bool,
    pub reprojected: bool,
}

impl StepDiagnostics {
    pub fn flags(&self) -> u32 {
        u32::from(self.reprojected) | (u32::from(self.exploded) << 1)
    }
}

/// `(A, lambda)` with `A_ij = -q(f^i, g^j)` and `lambda = q(f0, g0)`.
pub fn interaction_matrix(
    spacetime: &Spacetime,
    e: &BundlePoint,
    f: &Matrix,
) -> Result<(SpatialMatrix, f64), BundleError> {
    let qd = spacetime.metric_diag(&e.m)?;
    let g = e.g();
    let qf = |a: usize, b: usize| -> f64 { (0..DIM).map(|k| qd[k] * f[(k, a)] * g[(k, b)]).sum() };
    let lambda = qf(0, 0);
    if !(lambda >= 1.0 - 1e-8) {
        return Err(BundleError::InvalidFramePair { lambda });
    }
    let a = SpatialMatrix::from_fn(|i, j| -qf(i + 1, j + 1));
    if !(a.determinant().abs() > 1e-12) {
        return Err(BundleError::DegenerateRestFrame);
    }
    Ok((a, lambda.max(1.0)))
}

/// `lambda^{1/2} A^{-1} M dw`.
pub fn beta_increment(
    a: &SpatialMatrix,
    lambda: f64,
    dw: &SpatialVector,
    mixing: &SpatialMatrix,
) -> Result<SpatialVector, BundleError> {
    let rhs = lambda.sqrt() * (mixing * dw);
    a.lu().solve(&rhs).ok_or(BundleError::DegenerateRestFrame)
}

/// Metric Gram-Schmidt, `g0` first.
pub fn gram_schmidt(g: &Matrix, q: &Matrix) -> Matrix {
    let ip = |u: &FourVector, v: &FourVector| (u.transpose() * q * v)[(0, 0)];
    let mut out = *g;
    let g0 = g.column(0).into_owned();
    out.set_column(0, &(g0 / ip(&g0, &g0).sqrt()));
    for i in 1..DIM {
        let mut v = g.column(i).into_owned();
        let e0 = out.column(0).into_owned();
        v -= ip(&v, &e0) * e0;
        for j in 1..i {
            let ej = out.column(j).into_owned();
            v += ip(&v, &ej) * ej;
        }
        out.set_column(i, &(v / (-ip(&v, &v)).sqrt()));
    }
    out
}

fn defect_plain(g: &Matrix, qd: &[f64; DIM]) -> f64 {
    let mut worst: f64 = 0.0;
    for a in 0..DIM {
        for b in a..DIM {
            let v: f64 = (0..DIM).map(|k| qd[k] * g[(k, a)] * g[(k, b)]).sum();
            let target = if a != b {
                0.0
            } else if a == 0 {
                1.0
            } else {
                -1.0
            };
            worst = worst.max((v - target).abs());
        }
    }
    worst
}

/// Five-point central difference of `f` at 0.
fn d5<F: FnMut(f64) -> Result<f64, BundleError>>(mut f: F, h: f64) -> Result<f64, BundleError> {
    Ok((f(-2.0 * h)? - 8.0 * f(-h)? + 8.0 * f(h)? - f(2.0 * h)?) / (12.0 * h))
}

const STENCIL: [(f64, f64); 4] = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];

/// Stored path: points `0..=n`, proper times, and per-step diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub path_id: u64,
    pub points: Vec<BundlePoint>,
    pub s: Vec<f64>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub termination: Option<Termination>,
}

impl ProcessSpec {
    pub fn validate(&self) -> Result<(), BundleError> {
        if self.noise.mixing.determinant().abs() < 1e-14 && self.noise.mixing != SpatialMatrix::zeros() {
            return Err(BundleError::InvalidSpec("mixing matrix M is singular".into()));
        }
        if let Forcing::RoupGradient { alpha } = self.forcing {
            if !(alpha >= 0.0) {
                return Err(BundleError::InvalidSpec(format!("alpha must be >= 0, got {alpha}")));
            }
            if matches!(self.rest_frame, RestFrameMap::Comoving) && alpha > 0.0 {
                return Err(BundleError::InvalidSpec("friction needs a rest frame distinct from the comoving one".into()));
            }
        }
        let ip = &self.integrator;
        if !(ip.dt > 0.0 && ip.gamma_cap > 1.0 && ip.coord_cap > 0.0 && ip.reorthonormalize_above > 0.0) {
            return Err(BundleError::InvalidSpec("integrator parameters must be positive".into()));
        }
        Ok(())
    }

    /// Same dynamics with the horizontal part reversed.
    pub fn reverse_flag(&self) -> ProcessSpec {
        let mut s = self.clone();
        s.direction = match self.direction {
            Direction::Future => Direction::Past,
            Direction::Past => Direction::Future,
        };
        s
    }

    /// The rest frame at `e`, or `None` when it is `e`'s own frame.
    pub fn rest_frame_at(&self, e: &BundlePoint) -> Result<Option<Matrix>, BundleError> {
        Ok(match &self.rest_frame {
            RestFrameMap::Comoving => None,
            RestFrameMap::LabFrame => Some(self.spacetime.observer_frame(&e.m)?),
            RestFrameMap::Custom(f) => Some(f(e)),
        })
    }

    /// `(A, lambda)` against the rest frame; exactly `(I, 1)` for the comoving map.
    pub fn interaction(&self, e: &BundlePoint) -> Result<(SpatialMatrix, f64), BundleError> {
        match self.rest_frame_at(e)? {
            None => Ok((SpatialMatrix::identity(), 1.0)),
            Some(f) => interaction_matrix(&self.spacetime, e, &f),
        }
    }

    /// Noise coefficients `C = lambda^{1/2} A^{-1} M` (column k is the field `Y_k`
    /// in the `V_i` basis) and the drift boost coefficients `a`.
    pub fn vertical_fields(&self, e: &BundlePoint) -> Result<(SpatialMatrix, SpatialVector), BundleError> {
        let f = self.rest_frame_at(e)?;
        let (c, lambda) = match &f {
            None => (self.noise.mixing, 1.0),
            Some(f) => {
                let (a, lambda) = interaction_matrix(&self.spacetime, e, f)?;
                // closed-form inverse; an LU per call dominated the ROUP step
                let c = a.try_inverse().ok_or(BundleError::DegenerateRestFrame)? * (lambda.sqrt() * self.noise.mixing);
                (c, lambda)
            }
        };
        let drift = match (&self.forcing, &f) {
            (Forcing::Zero, _) | (Forcing::RoupGradient { .. }, None) => SpatialVector::zeros(),
            (Forcing::RoupGradient { alpha }, Some(f)) => {
                let qd = self.spacetime.metric_diag(&e.m)?;
                let g = e.g();
                let k = -2.0 * alpha / lambda - 0.25 / (lambda * lambda);
                SpatialVector::from_fn(|i, _| k * (0..DIM).map(|r| qd[r] * g[(r, i + 1)] * f[(r, 0)]).sum::<f64>())
            }
            (Forcing::CustomVertical(v), _) => v(e),
        };
        Ok((c, drift))
    }

    fn state_independent_vertical(&self) -> bool {
        matches!(self.rest_frame, RestFrameMap::Comoving) && matches!(self.forcing, Forcing::Zero)
    }

    fn vertical_increment(&self, e: &BundlePoint, h: f64, dw: &SpatialVector) -> Result<SpatialVector, BundleError> {
        if self.state_independent_vertical() {
            return Ok(self.noise.mixing * dw);
        }
        let (c, a) = self.vertical_fields(e)?;
        Ok(c * dw + h * a)
    }

    fn vertical_half(&self, e: &mut BundlePoint, h: f64, dw: &SpatialVector) -> Result<(), BundleError> {
        let xi0 = self.vertical_increment(e, h, dw)?;
        let xi = if self.state_independent_vertical() {
            xi0
        } else {
            let pred = e.with_frame(right_mul_boost(e.g(), &xi0));
            0.5 * (xi0 + self.vertical_increment(&pred, h, dw)?)
        };
        if self.integrator.compensated {
            e.frame = e.frame.mul(&CompensatedMatrix::boost(&xi));
        } else {
            e.frame = CompensatedMatrix::new(right_mul_boost(e.g(), &xi));
        }
        Ok(())
    }

    fn horizontal(&self, e: &mut BundlePoint, dt: f64) -> Result<(), BundleError> {
        let ds = self.direction.sign() * dt;
        if self.integrator.compensated {
            let (m, dg) = self.spacetime.transport_increment(&e.m, e.g(), ds)?;
            e.m = m;
            if !self.spacetime.is_minkowski() {
                e.frame = e.frame.add_plain(&dg);
            }
        } else {
            let (m, g) = self.spacetime.transport_frame(&e.m, e.g(), ds)?;
            e.m = m;
            e.frame = CompensatedMatrix::new(g);
        }
        Ok(())
    }

    /// One Strang-split step of length `dt` starting at proper time `s`.
    pub fn sde_step(
        &self,
        e: &BundlePoint,
        s: f64,
        dt: f64,
        rng: &mut PathRng,
    ) -> Result<(BundlePoint, StepDiagnostics), BundleError> {
        let (dw1, dw2) = rng.spatial_normal_pair(0.5 * dt);
        let mut next = *e;
        self.vertical_half(&mut next, 0.5 * dt, &dw1)?;
        self.horizontal(&mut next, dt)?;
        self.vertical_half(&mut next, 0.5 * dt, &dw2)?;
        Ok(self.finish_step(next, s + dt)?)
    }

    fn finish_step(&self, mut e: BundlePoint, s: f64) -> Result<(BundlePoint, StepDiagnostics), BundleError> {
        let qd = self.spacetime.metric_diag(&e.m)?;
        let (defect, norm) = if self.integrator.compensated {
            (e.frame.defect_diag_metric(&qd), e.frame.timelike_norm_diag_metric(&qd))
        } else {
            let g = e.g();
            (defect_plain(g, &qd), (0..DIM).map(|k| qd[k] * g[(k, 0)] * g[(k, 0)]).sum())
        };
        let mut reprojected = false;
        if !(defect <= self.integrator.reorthonormalize_above) {
            let q = self.spacetime.metric_at(&e.m)?;
            e.frame = CompensatedMatrix::new(gram_schmidt(e.g(), &q));
            reprojected = true;
        }
        let gamma = e.g()[(0, 0)];
        let exploded = !(gamma <= self.integrator.gamma_cap) || !(e.m.coords.amax() <= self.integrator.coord_cap);
        let lambda = match self.rest_frame_at(&e) {
            Ok(None) => 1.0,
            Ok(Some(f)) => {
                let g = e.g();
                (0..DIM).map(|k| qd[k] * f[(k, 0)] * g[(k, 0)]).sum()
            }
            Err(_) => f64::NAN,
        };
        let diag = StepDiagnostics {
            s,
            defect,
            unit_norm_error: (norm - 1.0).abs(),
            lambda,
            gamma,
            exploded,
            reprojected,
        };
        Ok((e, diag))
    }

    /// Runs one path, calling `visit(step, before, after, diag)` after every step.
    /// Returns the final point, its proper time and the termination reason, if any.
    pub fn run_path<F>(&self, e0: &BundlePoint, n_steps: usize, path_id: u64, mut visit: F) -> (BundlePoint, f64, Option<Termination>)
    where
        F: FnMut(usize, &BundlePoint, &BundlePoint, &StepDiagnostics) -> bool,
    {
        let dt = self.integrator.dt;
        let mut rng = PathRng::new(self.noise.seed, path_id);
        let mut e = *e0;
        let mut s = 0.0;
        for k in 0..n_steps {
            match self.sde_step(&e, s, dt, &mut rng) {
                Ok((next, diag)) => {
                    let keep_going = visit(k, &e, &next, &diag);
                    e = next;
                    s = diag.s;
                    if diag.exploded {
                        return (e, s, Some(Termination::Exploded));
                    }
                    if !keep_going {
                        break;
                    }
                }
                Err(err) => return (e, s, Some(err.into())),
            }
        }
        (e, s, None)
    }

    /// Simulates and stores a whole path. Deterministic in `(seed, path_id, dt, n_steps)`.
    pub fn simulate_path(&self, e0: &BundlePoint, n_steps: usize, path_id: u64) -> Trajectory {
        let mut points = Vec::with_capacity(n_steps + 1);
        let mut s = Vec::with_capacity(n_steps + 1);
        let mut diagnostics = Vec::with_capacity(n_steps);
        points.push(*e0);
        s.push(0.0);
        let (_, _, termination) = self.run_path(e0, n_steps, path_id, |_, _, next, diag| {
            points.push(*next);
            s.push(diag.s);
            diagnostics.push(*diag);
            true
        });
        Trajectory { path_id, points, s, diagnostics, termination }
    }

    fn vertical_flow(e: &BundlePoint, i: usize, t: f64) -> BundlePoint {
        e.with_frame(e.g() * boost_exp(i + 1, t))
    }

    fn horizontal_flow(&self, e: &BundlePoint, t: f64) -> Result<BundlePoint, BundleError> {
        let (m, g) = self.spacetime.transport_frame(&e.m, e.g(), self.direction.sign() * t)?;
        Ok(BundlePoint::new(m, g))
    }

    /// `L h(e)` by central differences along the horizontal and vertical flows.
    ///
    /// `L = s H0 + sum_i a_i V_i + 1/2 sum_k Y_k Y_k` with `Y_k = sum_i C_ik V_i`
    /// and `s = +1` (future) or `-1` (past). This is the exact Stratonovich
    /// generator; its second-order part is `lambda/2 V_i B^ij V_j` with
    /// `B = A^{-1} M M^T A^{-T}`.
    pub fn apply_generator<H>(&self, h: &H, e: &BundlePoint, fd: f64) -> Result<f64, BundleError>
    where
        H: Fn(&BundlePoint) -> f64,
    {
        let h0 = d5(|t| Ok(h(&self.horizontal_flow(e, t)?)), fd)?;
        let (c, a) = self.vertical_fields(e)?;
        let grad = |p: &BundlePoint| -> Result<SpatialVector, BundleError> {
            let mut g = SpatialVector::zeros();
            for j in 0..SPATIAL_DIM {
                g[j] = d5(|t| Ok(h(&Self::vertical_flow(p, j, t))), fd)?;
            }
            Ok(g)
        };
        let g_here = grad(e)?;
        let drift = a.dot(&g_here);
        let mut second = 0.0;
        for i in 0..SPATIAL_DIM {
            // D_i of phi_k = sum_j C_jk V_j h, for every k at once.
            let mut d_phi = SpatialVector::zeros();
            for &(off, w) in &STENCIL {
                let p = Self::vertical_flow(e, i, off * fd);
                let (cp, _) = self.vertical_fields(&p)?;
                d_phi += w * (cp.transpose() * grad(&p)?);
            }
            d_phi /= 12.0 * fd;
            for k in 0..SPATIAL_DIM {
                second += c[(i, k)] * d_phi[k];
            }
        }
        Ok(h0 + drift + 0.5 * second)
    }

    /// `L* rho(e)` with respect to the Liouville measure (Haar on the fibres).
    ///
    /// `L* rho = -s H0 rho - sum_i V_i(rho a_i) + 1/2 sum_k sum_i V_i(C_ik psi_k)`
    /// with `psi_k = sum_j V_j(rho C_jk)`. The boost fields are divergence free,
    /// so the divergence of a vertical field `sum z_i V_i` is `sum_i V_i z_i`.
    pub fn apply_adjoint<R>(&self, rho: &R, e: &BundlePoint, fd: f64) -> Result<f64, BundleError>
    where
        R: Fn(&BundlePoint) -> f64,
    {
        let h0 = d5(|t| Ok(rho(&self.horizontal_flow(e, t)?)), fd)?;
        let mut div_v = 0.0;
        for i in 0..SPATIAL_DIM {
            div_v += d5(
                |t| {
                    let p = Self::vertical_flow(e, i, t);
                    let (_, a) = self.vertical_fields(&p)?;
                    Ok(rho(&p) * a[i])
                },
                fd,
            )?;
        }
        let psi = |p: &BundlePoint| -> Result<SpatialVector, BundleError> {
            let mut out = SpatialVector::zeros();
            for j in 0..SPATIAL_DIM {
                for &(off, w) in &STENCIL {
                    let q = Self::vertical_flow(p, j, off * fd);
                    let (cq, _) = self.vertical_fields(&q)?;
                    let r = rho(&q);
                    for k in 0..SPATIAL_DIM {
                        out[k] += w * r * cq[(j, k)];
                    }
                }
            }
            Ok(out / (12.0 * fd))
        };
        let mut second = 0.0;
        for i in 0..SPATIAL_DIM {
            for &(off, w) in &STENCIL {
                let p = Self::vertical_flow(e, i, off * fd);
                let (cp, _) = self.vertical_fields(&p)?;
                let ps = psi(&p)?;
                let row: f64 = (0..SPATIAL_DIM).map(|k| cp[(i, k)] * ps[k]).sum();
                second += w * row;
            }
        }
        second /= 12.0 * fd;
        Ok(-h0 - div_v + 0.5 * second)
    }
}

/// Writes trajectory rows `path_id, step, s, x0..xd, g0_0..g0_d, defect, flags`.
/// Row 0 is the initial point with zero defect and flags.
pub fn write_trajectory_csv<W: Write>(w: &mut W, trajectories: &[Trajectory]) -> io::Result<()> {
    write!(w, "path_id,step,s")?;
    for i in 0..DIM {
        write!(w, ",x{i}")?;
    }
    for i in 0..DIM {
        write!(w, ",g0_{i}")?;
    }
    writeln!(w, ",defect,flags")?;
    for traj in trajectories {
        for (k, p) in traj.points.iter().enumerate() {
            let (defect, mut flags) = match k {
                0 => (0.0, 0),
                _ => (traj.diagnostics[k - 1].defect, traj.diagnostics[k - 1].flags()),
            };
            if k + 1 == traj.points.len() && traj.termination.is_some() {
                flags |= 4;
            }
            write!(w, "{},{},{:.16e}", traj.path_id, k, traj.s[k])?;
            for i in 0..DIM {
                write!(w, ",{:.16e}", p.m.coords[i])?;
            }
            for i in 0..DIM {
                write!(w, ",{:.16e}", p.g()[(i, 0)])?;
            }
            writeln!(w, ",{defect:.16e},{flags}")?;
        }
    }
    Ok(())
}

/// Frame at the origin of Minkowski space used by most experiments.
pub fn minkowski_origin() -> BundlePoint {
    BundlePoint::new(Spacetime::Minkowski.event(FourVector::zeros()), Matrix::identity())
}

/// `eta`-orthonormal check helper for tests and diagnostics.
pub fn minkowski_defect(e: &BundlePoint) -> f64 {
    crate::minkowski::defect_in_metric(e.g(), &eta())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::ScaleFactor;
    use crate::minkowski::{boost_from_rapidity, orthonormality_defect, plane_rotation, VelocityCoords};

    fn spec(rest_frame: RestFrameMap, forcing: Forcing) -> ProcessSpec {
        ProcessSpec {
            preset: PresetTag::Custom,
            spacetime: Spacetime::Minkowski,
            rest_frame,
            forcing,
            noise: NoiseSpec::isotropic(5),
            integrator: IntegratorParams { dt: 1e-2, ..Default::default() },
            direction: Direction::Future,
        }
    }

    fn chi(a: f64, b: f64) -> SpatialVector {
        SpatialVector::from_fn(|i, _| if i == 0 { a } else if i == 1 { b } else { -0.3 * a })
    }

    fn boosted(x: &SpatialVector) -> BundlePoint {
        let o = minkowski_origin();
        BundlePoint::new(o.m, boost_from_rapidity(x) * plane_rotation(1, 2, 0.4))
    }

    #[test]
    fn gram_schmidt_restores_frame() {
        let mut g = boost_from_rapidity(&chi(0.8, -0.4));
        g[(1, 2)] += 1e-4;
        g[(0, 3 % DIM)] -= 2e-5;
        let dir = g.column(0).normalize();
        let h = gram_schmidt(&g, &eta());
        assert!(orthonormality_defect(&h) < 1e-13);
        assert!((h.column(0).normalize() - dir).amax() < 1e-14);
    }

    #[test]
    fn interaction_against_lab_frame() {
        let x = chi(0.6, 0.2);
        let e = BundlePoint::new(minkowski_origin().m, boost_from_rapidity(&x));
        let (a, lambda) = interaction_matrix(&Spacetime::Minkowski, &e, &Matrix::identity()).unwrap();
        assert!((lambda - x.norm().cosh()).abs() < 1e-14);
        let r = x.norm();
        let k2 = (r.cosh() - 1.0) / (r * r);
        let expected = SpatialMatrix::identity() + k2 * x * x.transpose();
        assert!((a - expected).amax() < 1e-14);
        let s = spec(RestFrameMap::Comoving, Forcing::Zero);
        assert_eq!(s.interaction(&e).unwrap(), (SpatialMatrix::identity(), 1.0));
    }

    #[test]
    fn past_frame_pair_is_rejected() {
        let mut g = Matrix::identity();
        g[(0, 0)] = -1.0;
        let e = BundlePoint::new(minkowski_origin().m, g);
        let err = interaction_matrix(&Spacetime::Minkowski, &e, &Matrix::identity()).unwrap_err();
        assert!(matches!(err, BundleError::InvalidFramePair { .. }));
    }

    #[test]
    fn steps_are_deterministic_and_orthonormal() {
        let s = spec(RestFrameMap::LabFrame, Forcing::RoupGradient { alpha: 0.5 });
        let a = s.simulate_path(&minkowski_origin(), 300, 9);
        let b = s.simulate_path(&minkowski_origin(), 300, 9);
        assert_eq!(a.points, b.points);
        assert!(a.diagnostics.iter().all(|d| d.defect < 1e-10 && d.unit_norm_error < 1e-10));
        let last = a.points.last().unwrap();
        assert!((a.s[300] - 3.0).abs() < 1e-12);
        assert!(last.m.t() > 3.0 - 1e-12);
    }

    #[test]
    fn compensated_mode_tracks_plain_mode() {
        let mut s = spec(RestFrameMap::Comoving, Forcing::Zero);
        let a = s.simulate_path(&minkowski_origin(), 200, 1);
        s.integrator.compensated = true;
        let b = s.simulate_path(&minkowski_origin(), 200, 1);
        let (ga, gb) = (a.points[200].g(), b.points[200].g());
        assert!((ga - gb).amax() < 1e-11 * ga.amax());
    }

    #[test]
    fn reverse_flow_retraces_geodesics() {
        let st = Spacetime::robertson_walker(ScaleFactor::PowerLaw { p: 0.5 }, 0.05).unwrap();
        let mut fwd = spec(RestFrameMap::Comoving, Forcing::Zero);
        fwd.spacetime = st.clone();
        fwd.noise.mixing = SpatialMatrix::zeros();
        let mut c = FourVector::zeros();
        c[0] = 1.0;
        let f = st.observer_frame(&st.event(c)).unwrap();
        let e0 = BundlePoint::new(st.event(c), f * boost_from_rapidity(&chi(0.5, 0.1)));
        let mid = fwd.simulate_path(&e0, 50, 0).points[50];
        let back = fwd.reverse_flag().simulate_path(&mid, 50, 0).points[50];
        assert!((back.m.coords - e0.m.coords).amax() < 1e-10);
        assert!((back.g() - e0.g()).amax() < 1e-10);
        assert_eq!(fwd.reverse_flag().reverse_flag().direction, Direction::Future);
    }

    #[test]
    fn dudley_generator_on_gamma() {
        // V_i V_i g0^0 = g0^0, so L gamma = (d/2) gamma.
        let s = spec(RestFrameMap::Comoving, Forcing::Zero);
        let e = boosted(&chi(0.9, 0.3));
        let lg = s.apply_generator(&|p: &BundlePoint| p.g()[(0, 0)], &e, 2e-3).unwrap();
        let gamma = e.g()[(0, 0)];
        assert!((lg - 0.5 * SPATIAL_DIM as f64 * gamma).abs() < 1e-7 * gamma);
    }

    #[test]
    fn roup_generator_matches_lab_time_drift() {
        // In lab time q solves dq = -2 alpha q / gamma dt + dW; in proper time
        // L gamma = gamma * (q/gamma . drift + 1/2 Lap_q gamma).
        let alpha = 0.7;
        let s = spec(RestFrameMap::LabFrame, Forcing::RoupGradient { alpha });
        for x in [chi(0.2, 0.1), chi(1.1, -0.5), chi(-0.4, 1.6)] {
            let e = boosted(&x);
            let q = VelocityCoords::from_four_velocity(&e.g0());
            let gamma = q.gamma();
            let q2 = q.q.norm_squared();
            let d = SPATIAL_DIM as f64;
            let expected = -2.0 * alpha * q2 / gamma + 0.5 * (d - q2 / (gamma * gamma));
            let lg = s.apply_generator(&|p: &BundlePoint| p.g()[(0, 0)], &e, 2e-3).unwrap();
            assert!((lg - expected).abs() < 1e-6 * gamma.max(1.0), "{lg} vs {expected}");
        }
    }

    #[test]
    fn exponential_weight_is_annihilated_by_roup_adjoint() {
        let alpha = 0.6;
        let s = spec(RestFrameMap::LabFrame, Forcing::RoupGradient { alpha });
        let rho = |p: &BundlePoint| (-4.0 * alpha * p.g()[(0, 0)]).exp();
        for x in [chi(0.3, 0.0), chi(0.9, -0.6), chi(-1.2, 0.5)] {
            let e = boosted(&x);
            let v = s.apply_adjoint(&rho, &e, 2e-3).unwrap();
            assert!(v.abs() < 1e-6 * rho(&e), "{v}");
        }
    }

    #[test]
    fn csv_layout() {
        let s = spec(RestFrameMap::Comoving, Forcing::Zero);
        let t = s.simulate_path(&minkowski_origin(), 3, 2);
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &[t]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0].split(',').count(), 5 + 2 * DIM);
        assert!(lines[1].starts_with("2,0,0.0000000000000000e0"));
    }
}
