//! Hitting laws of Dudley paths on Minkowski hyperplanes.

use super::super::{CheckRecord, Ctx, HarnessError};
use crate::framebundle::{minkowski_origin, IntegratorParams, NoiseSpec};
use crate::minkowski::{basis, boost_exp, Matrix, SpatialVector};
use crate::processes::Preset;
use crate::stats::density::{PointWindow, WindowTally};
use crate::stats::hits::{HitDetector, HitRecord, HyperplaneSpec};
use crate::stats::{mean_and_stderr, Moments};

const TILT: f64 = 0.5;

pub fn hitting_density_relation(cx: &mut Ctx) -> Result<(), HarnessError> {
    let name = cx.name();
    let paths = cx.paths(1_000_000, 2_000);
    let dt = cx.dt(2e-3, 1e-2);
    // both planes are crossed before t = e^{tilt} cosh(tilt) < 2, and s <= t
    let cap = cx.steps((2.0 / dt).ceil() as usize, (2.0 / dt).ceil() as usize);
    let radius_x = cx.cfg.estimator.bandwidth.unwrap_or(0.25);
    let window = PointWindow { target_u: basis(0), radius_x, radius_rapidity: 2.0 * radius_x };
    let event = basis(0);
    let planes = [
        HyperplaneSpec::through(Matrix::identity(), event).map_err(HarnessError::Runtime)?,
        HyperplaneSpec::through(boost_exp(1, TILT), event).map_err(HarnessError::Runtime)?,
    ];
    let spec = cx.process(Preset::Dudley, NoiseSpec::isotropic(cx.seed("paths")), IntegratorParams { dt, ..Default::default() })?;
    let e0 = minkowski_origin();
    let keep = super::super::MAX_HIT_ROWS as u64;
    let per = cx.par_map(paths, |id| {
        let mut det = [HitDetector::new(planes[0]), HitDetector::new(planes[1])];
        let mut hits: [Option<HitRecord>; 2] = [None, None];
        spec.run_path(&e0, cap, id, |_, before, after, d| {
            for k in 0..2 {
                if hits[k].is_none() {
                    hits[k] = det[k].observe(id, d.s - dt, before, d.s, after);
                }
            }
            hits.iter().any(|h| h.is_none())
        });
        let contrib = [0, 1].map(|k| hits[k].as_ref().map_or(0.0, |h| window.contribution(h)));
        let stored = if id < keep { hits } else { [None, None] };
        (contrib, [hits[0].is_some(), hits[1].is_some()], stored)
    });
    let mut tallies = [WindowTally::default(); 2];
    let mut counts = [0usize; 2];
    let mut records: [Vec<HitRecord>; 2] = [Vec::new(), Vec::new()];
    for (contrib, hit, stored) in &per {
        for k in 0..2 {
            tallies[k].push(contrib[k]);
            counts[k] += usize::from(hit[k]);
            if let Some(h) = stored[k] {
                records[k].push(h);
            }
        }
    }
    let [(f1, s1), (f2, s2)] = [tallies[0].estimate(&window), tallies[1].estimate(&window)];
    let rel = (f1 - f2).abs() / (0.5 * (f1 + f2));
    cx.stat("f_hat", [f1, f2]);
    cx.stat("f_hat_stderr", [s1, s2]);
    cx.stat("hits_per_plane", counts);
    cx.stat("hits_in_window", [tallies[0].in_window, tallies[1].in_window]);
    cx.stat("window", serde_json::json!({ "radius_x": window.radius_x, "radius_rapidity": window.radius_rapidity, "volume": window.volume() }));
    cx.stat("tilt_rapidity", TILT);
    cx.check(CheckRecord::at_most(&name, "relative_difference", rel, 0.1));
    // error bars are two standard errors wide on each side
    cx.check(CheckRecord::at_most(&name, "difference_over_error_bars", (f1 - f2).abs() / (2.0 * (s1 + s2)), 1.0));
    cx.check(CheckRecord::at_least(&name, "min_hit_fraction", counts[0].min(counts[1]) as f64 / paths as f64, 1.0));
    let [r0, r1] = records;
    cx.store_hits("hits", r0);
    cx.store_hits("hits_tilted", r1);
    cx.store_paths(&spec, &e0, cap, paths);
    Ok(())
}

/// Bounded test functions of a point on the plane `t = 1`: in-plane position
/// and the frame's time axis.
fn test_functions(x: &SpatialVector, g0: &crate::minkowski::FourVector) -> [f64; 3] {
    let gamma = g0[0];
    [(-x.norm_squared() / (2.0 * 0.3 * 0.3)).exp(), 1.0 / gamma, x[0].cos() * (1.0 - gamma).exp()]
}

pub fn weak_form_hitting(cx: &mut Ctx) -> Result<(), HarnessError> {
    let name = cx.name();
    let paths = cx.paths(100_000, 1_000);
    let dt = cx.dt(2e-3, 1e-2);
    let delta = 0.04;
    let level = 1.0;
    let cap = cx.steps(((level + delta) / dt).ceil() as usize + 2, ((level + delta) / dt).ceil() as usize + 2);
    let ip = IntegratorParams { dt, ..Default::default() };
    let plane = HyperplaneSpec::TimeSlice { level };
    let e0 = minkowski_origin();
    // Monte Carlo side: test functions at the first crossing
    let mc = cx.process(Preset::Dudley, NoiseSpec::isotropic(cx.seed("hits")), ip)?;
    let hits = cx.par_map(paths, |id| {
        let mut det = HitDetector::new(plane);
        let mut hit = None;
        mc.run_path(&e0, cap, id, |_, before, after, d| {
            hit = det.observe(id, d.s - dt, before, d.s, after);
            hit.is_none()
        });
        hit
    });
    // quadrature side: occupation density of an independent path set in the
    // slab |t - 1| < delta, weighted by lambda = q(alpha0, g0)
    let occ = cx.process(Preset::Dudley, NoiseSpec::isotropic(cx.seed("occupation")), ip)?;
    let quad = cx.par_map(paths, |id| {
        let mut acc = [0.0; 3];
        occ.run_path(&e0, cap, id, |_, _, after, _| {
            let t = after.m.t();
            if (t - level).abs() < delta {
                let g0 = after.g0();
                let x = plane.coordinates(&after.m.coords);
                let phi = test_functions(&x, &g0);
                let w = plane.lambda(&g0) * dt / (2.0 * delta);
                for k in 0..3 {
                    acc[k] += w * phi[k];
                }
            }
            t < level + delta
        });
        acc
    });
    let missed = hits.iter().filter(|h| h.is_none()).count();
    let mut rows = Vec::new();
    for (k, label) in ["gaussian_position", "inverse_gamma", "mixed"].iter().enumerate() {
        let a: Vec<f64> = hits.iter().flatten().map(|h| test_functions(&h.x, &h.g0())[k]).collect();
        let mut q = Moments::default();
        for v in &quad {
            q.push(v[k]);
        }
        let (ma, sa) = mean_and_stderr(&a);
        let (mq, sq) = (q.mean(), q.stderr());
        let se = (sa * sa + sq * sq).sqrt();
        rows.push(serde_json::json!({ "name": label, "mc": ma, "mc_stderr": sa, "quadrature": mq, "quadrature_stderr": sq }));
        cx.check(CheckRecord::within_stderr(&name, &format!("{label}_difference"), ma - mq, 0.0, se, 3.0));
    }
    cx.stat("functions", rows);
    cx.stat("slab_half_width", delta);
    cx.check(CheckRecord::at_most(&name, "paths_without_hit", missed as f64, 0.0));
    let records: Vec<HitRecord> = hits.into_iter().flatten().collect();
    cx.store_hits("hits", records);
    cx.store_paths(&mc, &e0, cap, paths);
    Ok(())
}
