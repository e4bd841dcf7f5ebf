//! WebAssembly bindings for a small in-browser demo.
//!
//! Three operations, each returning a flat `Float64Array`:
//! worldlines of a preset, ROUP velocities against the relativistic
//! Maxwellian, and hitting profiles on a lab plane and a tilted plane.

use reldiff::framebundle::{minkowski_origin, IntegratorParams, NoiseSpec};
use reldiff::minkowski::{basis, boost_exp, Matrix, SPATIAL_DIM};
use reldiff::processes::{make_process, FrameClock, Preset};
use reldiff::stats::hits::{HitDetector, HyperplaneSpec};
use reldiff::stats::juttner::JuttnerCandidate;
use wasm_bindgen::prelude::*;

const MAX_PATHS: u32 = 20_000;
const MAX_STEPS: u32 = 20_000;

fn preset(kind: &str, alpha: f64) -> Result<Preset, String> {
    match kind {
        "dudley" => Ok(Preset::Dudley),
        "roup" => Ok(Preset::RoupMink { alpha }),
        other => Err(format!("unknown preset `{other}`; use `dudley` or `roup`")),
    }
}

fn bounded(n_paths: u32, n_steps: u32, dt: f64) -> Result<(), String> {
    if n_paths == 0 || n_paths > MAX_PATHS || n_steps == 0 || n_steps > MAX_STEPS {
        return Err(format!("need 1..={MAX_PATHS} paths and 1..={MAX_STEPS} steps"));
    }
    if !(dt > 0.0 && dt <= 0.1) {
        return Err(format!("dt must lie in (0, 0.1], got {dt}"));
    }
    Ok(())
}

/// Rows `(path, t, x1, x2)` for every stored point of every path.
pub fn worldlines(kind: &str, alpha: f64, n_paths: u32, n_steps: u32, dt: f64, seed: u32) -> Result<Vec<f64>, String> {
    bounded(n_paths, n_steps, dt)?;
    let ip = IntegratorParams { dt, ..Default::default() };
    let spec = make_process(preset(kind, alpha)?, NoiseSpec::isotropic(seed as u64), ip).map_err(|e| e.to_string())?;
    let e0 = minkowski_origin();
    let mut out = Vec::with_capacity(4 * (n_paths as usize) * (n_steps as usize + 1));
    for id in 0..n_paths as u64 {
        let traj = spec.simulate_path(&e0, n_steps as usize, id);
        for p in &traj.points {
            let c = p.m.coords;
            out.extend_from_slice(&[id as f64, c[0], c[1], c[2]]);
        }
    }
    Ok(out)
}

/// Radial histogram of `|q|` at lab time `lab_time` against the candidate.
/// Rows `(bin_lo, bin_hi, empirical density, candidate density)`, then one
/// trailing row `(tv, samples, 0, 0)`.
pub fn juttner_histogram(alpha: f64, n_paths: u32, lab_time: f64, dt: f64, bins: u32, seed: u32) -> Result<Vec<f64>, String> {
    let cap = (lab_time / dt).ceil() as u32 + 1;
    bounded(n_paths, cap, dt)?;
    if bins == 0 || bins > 200 || !(lab_time > 0.0) {
        return Err("need 1..=200 bins and a positive lab time".into());
    }
    let ip = IntegratorParams { dt, ..Default::default() };
    let spec = make_process(Preset::RoupMink { alpha }, NoiseSpec::isotropic(seed as u64), ip).map_err(|e| e.to_string())?;
    let candidate = JuttnerCandidate::new(alpha, SPATIAL_DIM).map_err(|e| e.to_string())?;
    let e0 = minkowski_origin();
    let mut radii = Vec::with_capacity(n_paths as usize);
    for id in 0..n_paths as u64 {
        let mut clock = FrameClock::new(Matrix::identity(), vec![lab_time]);
        spec.run_path(&e0, cap as usize, id, |_, before, after, d| {
            clock.observe(d.s - dt, before, d.s, after);
            !clock.done()
        });
        if let Some(s) = clock.samples.first() {
            radii.push(s.q.norm());
        }
    }
    let top = candidate.radial_quantile(0.999);
    let width = top / bins as f64;
    let mut counts = vec![0.0; bins as usize];
    for r in &radii {
        if *r < top {
            counts[(r / width) as usize] += 1.0;
        }
    }
    let n = radii.len().max(1) as f64;
    let mut out = Vec::with_capacity(4 * (bins as usize + 1));
    let mut tv = 0.0;
    for (b, c) in counts.iter().enumerate() {
        let (lo, hi) = (b as f64 * width, (b + 1) as f64 * width);
        let p = candidate.radial_cdf(hi) - candidate.radial_cdf(lo);
        tv += 0.5 * (c / n - p).abs();
        out.extend_from_slice(&[lo, hi, c / (n * width), p / width]);
    }
    out.extend_from_slice(&[tv, radii.len() as f64, 0.0, 0.0]);
    Ok(out)
}

/// Histograms of the in-plane coordinate `x1` of first hits on the lab plane
/// through `(1, 0, ..)` and on the plane through the same event tilted by
/// rapidity `tilt`. Rows `(bin_centre, lab density, tilted density)`.
pub fn hitting_profile(tilt: f64, n_paths: u32, dt: f64, bins: u32, seed: u32) -> Result<Vec<f64>, String> {
    let cap = (3.0 / dt).ceil() as u32;
    bounded(n_paths, cap, dt)?;
    if bins == 0 || bins > 200 || !(tilt.abs() <= 1.5) {
        return Err("need 1..=200 bins and |tilt| <= 1.5".into());
    }
    let event = basis(0);
    let planes = [
        HyperplaneSpec::through(Matrix::identity(), event)?,
        HyperplaneSpec::through(boost_exp(1, tilt), event)?,
    ];
    let ip = IntegratorParams { dt, ..Default::default() };
    let spec = make_process(Preset::Dudley, NoiseSpec::isotropic(seed as u64), ip).map_err(|e| e.to_string())?;
    let e0 = minkowski_origin();
    let half = 2.0;
    let width = 2.0 * half / bins as f64;
    let mut counts = vec![[0.0f64; 2]; bins as usize];
    for id in 0..n_paths as u64 {
        let mut det = planes.map(HitDetector::new);
        let mut done = [false; 2];
        spec.run_path(&e0, cap as usize, id, |_, before, after, d| {
            for k in 0..2 {
                if done[k] {
                    continue;
                }
                if let Some(h) = det[k].observe(id, d.s - dt, before, d.s, after) {
                    done[k] = true;
                    let b = ((h.x[0] + half) / width).floor();
                    if b >= 0.0 && (b as usize) < counts.len() {
                        counts[b as usize][k] += 1.0;
                    }
                }
            }
            !(done[0] && done[1])
        });
    }
    let norm = n_paths as f64 * width;
    Ok(counts
        .iter()
        .enumerate()
        .flat_map(|(b, c)| [-half + (b as f64 + 0.5) * width, c[0] / norm, c[1] / norm])
        .collect())
}

#[wasm_bindgen(js_name = worldlines)]
pub fn worldlines_js(kind: &str, alpha: f64, n_paths: u32, n_steps: u32, dt: f64, seed: u32) -> Result<Vec<f64>, JsError> {
    worldlines(kind, alpha, n_paths, n_steps, dt, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = juttnerHistogram)]
pub fn juttner_histogram_js(alpha: f64, n_paths: u32, lab_time: f64, dt: f64, bins: u32, seed: u32) -> Result<Vec<f64>, JsError> {
    juttner_histogram(alpha, n_paths, lab_time, dt, bins, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = hittingProfile)]
pub fn hitting_profile_js(tilt: f64, n_paths: u32, dt: f64, bins: u32, seed: u32) -> Result<Vec<f64>, JsError> {
    hitting_profile(tilt, n_paths, dt, bins, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = spatialDimension)]
pub fn spatial_dimension() -> u32 {
    SPATIAL_DIM as u32
}
