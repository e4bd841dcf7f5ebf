//! Named presets, reduced integrators used as oracles, and frame-time resampling.

use crate::framebundle::{
    BundleError, BundlePoint, Direction, Forcing, IntegratorParams, NoiseSpec, PresetTag, ProcessSpec, RestFrameMap,
    Trajectory,
};
use crate::manifold::{Event, ScaleFactor, Spacetime};
use crate::minkowski::{q_inner, FourVector, Matrix, SpatialVector, DIM, SPATIAL_DIM};
use crate::rng::PathRng;
use serde::{Deserialize, Serialize};

/// Preset processes, selectable by name in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum Preset {
    Dudley,
    FljChart { spacetime: Spacetime },
    RoupMink { alpha: f64 },
    RoupRw { alpha: f64, scale: ScaleFactor, t_min: f64 },
    FljRw { scale: ScaleFactor, t_min: f64 },
    Reverse { spacetime: Spacetime },
}

pub fn make_process(preset: Preset, noise: NoiseSpec, integrator: IntegratorParams) -> Result<ProcessSpec, BundleError> {
    let base = |tag, spacetime, rest_frame, forcing| ProcessSpec {
        preset: tag,
        spacetime,
        rest_frame,
        forcing,
        noise: noise.clone(),
        integrator,
        direction: Direction::Future,
    };
    let spec = match preset {
        Preset::Dudley => base(PresetTag::Dudley, Spacetime::Minkowski, RestFrameMap::Comoving, Forcing::Zero),
        Preset::FljChart { spacetime } => base(PresetTag::FljChart, spacetime, RestFrameMap::Comoving, Forcing::Zero),
        Preset::RoupMink { alpha } => base(
            PresetTag::RoupMink,
            Spacetime::Minkowski,
            RestFrameMap::LabFrame,
            Forcing::RoupGradient { alpha },
        ),
        Preset::RoupRw { alpha, scale, t_min } => base(
            PresetTag::RoupRw,
            Spacetime::robertson_walker(scale, t_min)?,
            RestFrameMap::LabFrame,
            Forcing::RoupGradient { alpha },
        ),
        Preset::FljRw { scale, t_min } => base(
            PresetTag::FljRw,
            Spacetime::robertson_walker(scale, t_min)?,
            RestFrameMap::Comoving,
            Forcing::Zero,
        ),
        Preset::Reverse { spacetime } => {
            let mut s = base(PresetTag::Reverse, spacetime, RestFrameMap::Comoving, Forcing::Zero);
            s.direction = Direction::Past;
            s
        }
    };
    spec.validate()?;
    Ok(spec)
}

/// Lab-frame state `(x, q)` of the reduced velocity processes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoupState {
    pub x: SpatialVector,
    pub q: SpatialVector,
}

fn gamma_of(q: &SpatialVector) -> f64 {
    (1.0 + q.norm_squared()).sqrt()
}

/// Euler-Maruyama step of `dx = q/gamma dt`, `dq = -2 alpha q/gamma dt + dw`.
pub fn roup_reduced_step(state: &RoupState, alpha: f64, dt: f64, rng: &mut PathRng) -> RoupState {
    let g = gamma_of(&state.q);
    let dw = rng.spatial_normal(dt);
    RoupState { x: state.x + state.q * (dt / g), q: state.q - state.q * (2.0 * alpha * dt / g) + dw }
}

/// Euler-Maruyama step of the Robertson-Walker velocity equations in the
/// coordinate time `t`, taken literally:
/// `dx = q/gamma_t dt`, `dq = -2 alpha a^2 q/gamma_t dt + dw/a`, `gamma_t = sqrt(1 + a^2 |q|^2)`.
pub fn roup_rw_reduced_step(
    state: &RoupState,
    alpha: f64,
    scale: &ScaleFactor,
    t_now: f64,
    dt: f64,
    rng: &mut PathRng,
) -> Result<RoupState, BundleError> {
    let a = scale.a(t_now);
    if !(a > 0.0) || !(dt > 0.0) {
        return Err(BundleError::InvalidSpec(format!("scale factor {a} at t = {t_now}")));
    }
    let g = rw_gamma(a, &state.q);
    let dw = rng.spatial_normal(dt);
    Ok(RoupState {
        x: state.x + state.q * (dt / g),
        q: state.q - state.q * (2.0 * alpha * a * a * dt / g) + dw / a,
    })
}

/// `sqrt(1 + a^2 |q|^2)`.
pub fn rw_gamma(a: f64, q: &SpatialVector) -> f64 {
    (1.0 + a * a * q.norm_squared()).sqrt()
}

/// Ito-Euler step of the chart equations of the comoving diffusion:
///
/// ```text
/// dm  = g0 ds
/// dg0 = (-Gamma(g0, g0) + (d/2) g0) ds + sum_i g^i dw^i
/// dgj = (-Gamma(g0, gj) + (1/2) gj) ds + g0 dw^j
/// ```
///
/// Nothing is re-projected; this is an independent check on the geometric scheme.
pub fn flj_chart_step_ito(
    spacetime: &Spacetime,
    m: &Event,
    g: &Matrix,
    dt: f64,
    rng: &mut PathRng,
) -> Result<(Event, Matrix), BundleError> {
    let dw = rng.spatial_normal(dt);
    let g0 = g.column(0).into_owned();
    let mut next = *g;
    let mut dg0 = -spacetime.christoffel_at(m, &g0, &g0)? * dt + (0.5 * SPATIAL_DIM as f64 * dt) * g0;
    for i in 0..SPATIAL_DIM {
        dg0 += dw[i] * g.column(i + 1);
    }
    next.set_column(0, &(g0 + dg0));
    for j in 1..DIM {
        let gj = g.column(j).into_owned();
        let d = -spacetime.christoffel_at(m, &g0, &gj)? * dt + (0.5 * dt) * gj + dw[j - 1] * g0;
        next.set_column(j, &(gj + d));
    }
    let m2 = spacetime.event(m.coords + dt * g0);
    spacetime.check(&m2)?;
    Ok((m2, next))
}

/// Spatial drift of `xdot` in Robertson-Walker, per unit `xdot` component: the
/// coefficient from the chart equations, `d/2 - 2 (a'/a) tdot`, and the printed
/// variant `3/2 - 2 (a/a') tdot`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RwDriftComparison {
    pub t: f64,
    pub tdot: f64,
    pub chart_form: f64,
    pub printed_form: f64,
}

pub fn rw_drift_comparison(scale: &ScaleFactor, t: f64, tdot: f64) -> RwDriftComparison {
    let (a, ad) = (scale.a(t), scale.a_dot(t));
    RwDriftComparison {
        t,
        tdot,
        chart_form: 0.5 * SPATIAL_DIM as f64 - 2.0 * (ad / a) * tdot,
        printed_form: 1.5 - 2.0 * (a / ad) * tdot,
    }
}

/// One resampled point: frame time, proper time, position and velocity in the frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSample {
    pub time: f64,
    pub s: f64,
    pub x: SpatialVector,
    pub q: SpatialVector,
}

/// Minkowski frame coordinates of an event and a velocity: `tau = q(a0, m)`,
/// `x_i = -q(a^i, m)`, `q_i = -q(a^i, g0)`.
fn frame_coords(alpha: &Matrix, m: &FourVector, g0: &FourVector) -> (f64, SpatialVector, SpatialVector) {
    let col = |i: usize| alpha.column(i).into_owned();
    let tau = q_inner(&col(0), m);
    let x = SpatialVector::from_fn(|i, _| -q_inner(&col(i + 1), m));
    let q = SpatialVector::from_fn(|i, _| -q_inner(&col(i + 1), g0));
    (tau, x, q)
}

/// Streaming resampler at fixed frame-time levels; feed it consecutive points.
#[derive(Debug, Clone)]
pub struct FrameClock {
    alpha: Matrix,
    levels: Vec<f64>,
    next: usize,
    pub samples: Vec<FrameSample>,
}

impl FrameClock {
    pub fn new(alpha: Matrix, levels: Vec<f64>) -> Self {
        Self { alpha, levels, next: 0, samples: Vec::new() }
    }

    pub fn done(&self) -> bool {
        self.next >= self.levels.len()
    }

    /// Records every level crossed between `(s0, e0)` and `(s1, e1)`.
    pub fn observe(&mut self, s0: f64, e0: &BundlePoint, s1: f64, e1: &BundlePoint) {
        let (t0, x0, q0) = frame_coords(&self.alpha, &e0.m.coords, &e0.g0());
        let (t1, x1, q1) = frame_coords(&self.alpha, &e1.m.coords, &e1.g0());
        while self.next < self.levels.len() {
            let level = self.levels[self.next];
            if level < t0 || level > t1 || t1 <= t0 {
                break;
            }
            let w = (level - t0) / (t1 - t0);
            self.samples.push(FrameSample {
                time: level,
                s: s0 + w * (s1 - s0),
                x: x0 + w * (x1 - x0),
                q: q0 + w * (q1 - q0),
            });
            self.next += 1;
        }
    }
}

/// Resampled path; `complete` is false when the path ended before the last level.
#[derive(Debug, Clone)]
pub struct Resampled {
    pub samples: Vec<FrameSample>,
    pub complete: bool,
}

/// Linear interpolation of a Minkowski trajectory at the requested frame-time
/// levels (increasing). The frame time must increase along the path, which
/// holds for every timelike path.
pub fn reparametrize_by_frame_time(traj: &Trajectory, alpha: &Matrix, levels: &[f64]) -> Resampled {
    let mut clock = FrameClock::new(*alpha, levels.to_vec());
    for k in 1..traj.points.len() {
        clock.observe(traj.s[k - 1], &traj.points[k - 1], traj.s[k], &traj.points[k]);
        if clock.done() {
            break;
        }
    }
    let complete = clock.done();
    Resampled { samples: clock.samples, complete }
}

/// Realized quadratic covariation of the martingale part of `g0` against the
/// integrated prediction `int (g0 g0^T - Q^{-1}) ds` (trapezoid rule).
#[derive(Debug, Clone)]
pub struct CovarianceProbe {
    pub realized: Matrix,
    pub predicted: Matrix,
    /// Standard error of the per-path difference realized - predicted.
    pub stderr: Matrix,
    pub n_paths: usize,
}

impl CovarianceProbe {
    /// Largest `|realized - predicted| / stderr` over entries with a nonzero error bar.
    pub fn max_abs_z(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for idx in 0..DIM * DIM {
            if self.stderr[idx] > 0.0 {
                worst = worst.max(((self.realized[idx] - self.predicted[idx]) / self.stderr[idx]).abs());
            }
        }
        worst
    }
}

/// Ito drift of `g0` for the comoving diffusion: `-Gamma(g0, g0) + (d/2) g0`.
pub fn comoving_g0_drift(spacetime: &Spacetime, e: &BundlePoint) -> Result<FourVector, BundleError> {
    let g0 = e.g0();
    Ok(-spacetime.christoffel_at(&e.m, &g0, &g0)? + (0.5 * SPATIAL_DIM as f64) * g0)
}

/// Per-path contribution: realized and predicted covariation over steps whose
/// start lies in `[s_from, s_to)`. Increments are corrected by `drift`
/// evaluated at the step start.
pub fn covariation_of_path<D>(
    spacetime: &Spacetime,
    traj: &Trajectory,
    window: (f64, f64),
    drift: D,
) -> Result<(Matrix, Matrix), BundleError>
where
    D: Fn(&BundlePoint) -> Result<FourVector, BundleError>,
{
    let mut realized = Matrix::zeros();
    let mut predicted = Matrix::zeros();
    for k in 1..traj.points.len() {
        let s0 = traj.s[k - 1];
        if s0 < window.0 || s0 >= window.1 {
            continue;
        }
        let (p0, p1) = (&traj.points[k - 1], &traj.points[k]);
        let ds = traj.s[k] - s0;
        let g0 = p0.g0();
        let dm = p1.g0() - g0 - ds * drift(p0)?;
        realized += dm * dm.transpose();
        // the left-point rule leaves an O(ds) bias of the same size as the noise
        let g1 = p1.g0();
        let at0 = g0 * g0.transpose() - spacetime.inverse_metric_at(&p0.m)?;
        let at1 = g1 * g1.transpose() - spacetime.inverse_metric_at(&p1.m)?;
        predicted += 0.5 * ds * (at0 + at1);
    }
    Ok((realized, predicted))
}

/// Combines per-path `(realized, predicted)` pairs into a probe.
pub fn covariance_probe(per_path: &[(Matrix, Matrix)]) -> Result<CovarianceProbe, BundleError> {
    let n = per_path.len();
    if n < 2 {
        return Err(BundleError::InvalidSpec("covariance probe needs at least two paths".into()));
    }
    let nf = n as f64;
    let realized = per_path.iter().fold(Matrix::zeros(), |acc, (r, _)| acc + r) / nf;
    let predicted = per_path.iter().fold(Matrix::zeros(), |acc, (_, p)| acc + p) / nf;
    let mean_diff = realized - predicted;
    let mut var = Matrix::zeros();
    for (r, p) in per_path {
        let d = r - p - mean_diff;
        var += d.component_mul(&d);
    }
    let stderr = (var / ((nf - 1.0) * nf)).map(f64::sqrt);
    Ok(CovarianceProbe { realized, predicted, stderr, n_paths: n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framebundle::minkowski_origin;
    use crate::minkowski::{eta, SpatialMatrix};

    fn noise() -> NoiseSpec {
        NoiseSpec::isotropic(3)
    }

    #[test]
    fn presets_wire_the_expected_pieces() {
        let ip = IntegratorParams::default();
        let d = make_process(Preset::Dudley, noise(), ip).unwrap();
        assert!(matches!(d.rest_frame, RestFrameMap::Comoving));
        let r = make_process(Preset::RoupMink { alpha: 0.5 }, noise(), ip).unwrap();
        assert!(matches!(r.forcing, Forcing::RoupGradient { alpha } if alpha == 0.5));
        let rev = make_process(Preset::Reverse { spacetime: Spacetime::Minkowski }, noise(), ip).unwrap();
        assert_eq!(rev.direction, Direction::Past);
        let bad = make_process(
            Preset::FljRw { scale: ScaleFactor::PowerLaw { p: 1.0 }, t_min: 0.0 },
            noise(),
            ip,
        );
        assert!(bad.is_err());
        let singular = NoiseSpec { mixing: SpatialMatrix::from_element(1.0), seed: 0 };
        assert!(make_process(Preset::Dudley, singular, ip).is_err());
    }

    #[test]
    fn dudley_interaction_is_identity_along_path() {
        let spec = make_process(Preset::Dudley, noise(), IntegratorParams::default()).unwrap();
        let traj = spec.simulate_path(&minkowski_origin(), 50, 0);
        for p in &traj.points {
            assert_eq!(spec.interaction(p).unwrap(), (SpatialMatrix::identity(), 1.0));
        }
        assert!(traj.points.windows(2).all(|w| w[1].m.t() > w[0].m.t()));
    }

    #[test]
    fn reduced_roup_at_rest_is_pure_diffusion() {
        let mut a = PathRng::new(1, 0);
        let mut b = PathRng::new(1, 0);
        let s = RoupState { x: SpatialVector::zeros(), q: SpatialVector::zeros() };
        let next = roup_reduced_step(&s, 0.5, 1e-2, &mut a);
        assert_eq!(next.q, b.spatial_normal(1e-2));
        assert_eq!(next.x, SpatialVector::zeros());
    }

    #[test]
    fn reduced_rw_with_unit_scale_is_minkowski() {
        let s = RoupState { x: SpatialVector::zeros(), q: SpatialVector::from_element(0.4) };
        let mut a = PathRng::new(2, 0);
        let mut b = PathRng::new(2, 0);
        let one = ScaleFactor::Constant { a0: 1.0 };
        for _ in 0..10 {
            let u = roup_reduced_step(&s, 0.5, 1e-3, &mut a);
            let v = roup_rw_reduced_step(&s, 0.5, &one, 0.0, 1e-3, &mut b).unwrap();
            assert_eq!(u, v);
        }
        let mut q = SpatialVector::zeros();
        q[0] = 1.0;
        assert!((rw_gamma(2.0, &q) - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn reduced_roup_is_subluminal() {
        let mut rng = PathRng::new(4, 1);
        let mut s = RoupState { x: SpatialVector::zeros(), q: SpatialVector::from_element(3.0) };
        let dt = 1e-2;
        for k in 1..=500 {
            s = roup_reduced_step(&s, 0.5, dt, &mut rng);
            assert!(s.x.norm() <= k as f64 * dt);
        }
    }

    #[test]
    fn ito_chart_drift_in_minkowski() {
        // Averaging dg0 over many draws leaves (d/2) g0 dt.
        let e = minkowski_origin();
        let dt = 1e-2;
        let n = 40_000;
        let mut mean = FourVector::zeros();
        let mut rng = PathRng::new(8, 0);
        for _ in 0..n {
            let (_, g) = flj_chart_step_ito(&Spacetime::Minkowski, &e.m, e.g(), dt, &mut rng).unwrap();
            mean += g.column(0) - e.g0();
        }
        mean /= n as f64;
        assert!((mean[0] - 0.5 * SPATIAL_DIM as f64 * dt).abs() < 1e-12);
        for i in 1..DIM {
            assert!(mean[i].abs() < 4.0 * (dt / n as f64).sqrt());
        }
    }

    #[test]
    fn ito_chart_drift_in_rw() {
        let scale = ScaleFactor::PowerLaw { p: 1.0 };
        let st = Spacetime::robertson_walker(scale, 0.1).unwrap();
        let mut c = FourVector::zeros();
        c[0] = 2.0;
        let m = st.event(c);
        let mut g0 = FourVector::zeros();
        g0[1] = 0.3 / 2.0;
        g0[0] = (1.0 + 4.0 * g0[1] * g0[1]).sqrt();
        let f = st.observer_frame(&m).unwrap();
        let q = st.metric_at(&m).unwrap();
        let mut g = f;
        g.set_column(0, &g0);
        let g = crate::framebundle::gram_schmidt(&g, &q);
        let mut rng = PathRng::new(0, 0);
        // zero the noise by differencing against the martingale part
        let dt = 1e-3;
        let mut rng2 = rng.clone();
        let (_, g1) = flj_chart_step_ito(&st, &m, &g, dt, &mut rng).unwrap();
        let dw = rng2.spatial_normal(dt);
        let mut noise = FourVector::zeros();
        for i in 0..SPATIAL_DIM {
            noise += dw[i] * g.column(i + 1);
        }
        let drift = (g1.column(0) - g.column(0) - noise) / dt;
        let (tdot, xdot) = (g[(0, 0)], g[(1, 0)]);
        let (a, ad) = (2.0, 1.0);
        assert!((drift[0] - (0.5 * SPATIAL_DIM as f64 * tdot - a * ad * xdot * xdot)).abs() < 1e-12);
        let cmp = rw_drift_comparison(&scale, 2.0, tdot);
        assert!((drift[1] - cmp.chart_form * xdot).abs() < 1e-12);
        assert!((cmp.printed_form - (1.5 - 4.0 * tdot)).abs() < 1e-15);
    }

    #[test]
    fn frame_time_of_geodesic() {
        let mut spec = make_process(Preset::Dudley, noise(), IntegratorParams { dt: 1e-2, ..Default::default() }).unwrap();
        spec.noise.mixing = SpatialMatrix::zeros();
        let mut q = SpatialVector::zeros();
        q[0] = 0.75;
        let v = crate::minkowski::VelocityCoords::new(q);
        let e0 = BundlePoint::new(minkowski_origin().m, v.boost());
        let traj = spec.simulate_path(&e0, 200, 0);
        let r = reparametrize_by_frame_time(&traj, &Matrix::identity(), &[0.5, 1.0, 2.0]);
        assert!(r.complete);
        for smp in &r.samples {
            // dt/ds = gamma along a geodesic, so s = t / gamma.
            assert!((smp.s - smp.time / v.gamma()).abs() < 1e-12);
            assert!((smp.q - q).amax() < 1e-12);
        }
        let short = reparametrize_by_frame_time(&traj, &Matrix::identity(), &[0.5, 1e3]);
        assert!(!short.complete);
        assert_eq!(short.samples.len(), 1);
    }

    #[test]
    fn covariance_of_dudley_at_rest() {
        let spec = make_process(Preset::Dudley, noise(), IntegratorParams { dt: 1e-3, ..Default::default() }).unwrap();
        let traj = spec.simulate_path(&minkowski_origin(), 1, 0);
        let st = Spacetime::Minkowski;
        let (_, predicted) = covariation_of_path(&st, &traj, (0.0, 1.0), |e| comoving_g0_drift(&st, e)).unwrap();
        let mut at_rest = Matrix::identity();
        at_rest[(0, 0)] = 0.0;
        let g1 = traj.points[1].g0();
        let target = 0.5e-3 * (at_rest + g1 * g1.transpose() - eta());
        assert!((predicted - target).amax() < 1e-15);

        let mut quiet = spec.clone();
        quiet.noise.mixing = SpatialMatrix::zeros();
        let traj = quiet.simulate_path(&minkowski_origin(), 20, 0);
        let (realized, _) = covariation_of_path(&st, &traj, (0.0, 1.0), |_| Ok(FourVector::zeros())).unwrap();
        assert_eq!(realized, Matrix::zeros());
    }
}
