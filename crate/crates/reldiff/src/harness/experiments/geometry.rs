//! Frame integrity, Dudley moments, scheme and symmetry checks, the
//! divergence identity and the determinism sweep.

use super::super::config::ExperimentConfig;
use super::super::{registry, run_experiment, CheckRecord, Ctx, HarnessError};
use crate::framebundle::{minkowski_origin, BundlePoint, IntegratorParams, NoiseSpec, Trajectory};
use crate::manifold::{ScaleFactor, Spacetime};
use crate::minkowski::{plane_rotation, FourVector, Matrix, SpatialMatrix, DIM, SPATIAL_DIM};
use crate::processes::{comoving_g0_drift, covariance_probe, covariation_of_path, flj_chart_step_ito, Preset};
use crate::rng::PathRng;
use crate::stats::ks::ks_two_sample;
use crate::stats::mean_and_stderr;
use crate::stats::quadrature::{divergence_check, FiberQuadrature, TailDecay};

fn integrator(dt: f64) -> IntegratorParams {
    IntegratorParams { dt, ..Default::default() }
}

fn steps_to(s: f64, dt: f64) -> usize {
    (s / dt).round().max(1.0) as usize
}

/// `(gamma at the end, terminated)` for each path.
fn final_gammas(cx: &Ctx, spec: &crate::framebundle::ProcessSpec, e0: &BundlePoint, n: usize, paths: usize) -> (Vec<f64>, usize) {
    let out = cx.par_map(paths, |id| {
        let (e, _, term) = spec.run_path(e0, n, id, |_, _, _, _| true);
        (e.g()[(0, 0)], term.is_some())
    });
    let failed = out.iter().filter(|o| o.1).count();
    (out.into_iter().filter(|o| !o.1).map(|o| o.0).collect(), failed)
}

pub fn frame_integrity(cx: &mut Ctx) -> Result<(), HarnessError> {
    let name = cx.name();
    let paths = cx.paths(100, 4);
    let dt = cx.dt(1e-3, 1e-3);
    let n = cx.steps(10_000, 500);
    // rapidity grows like s, so gamma passes the default cap of 1e6 near s = 10
    let ip = IntegratorParams { compensated: true, gamma_cap: 1e12, ..integrator(dt) };
    let spec = cx.process(Preset::Dudley, NoiseSpec::isotropic(cx.seed("paths")), ip)?;
    let e0 = minkowski_origin();
    let per = cx.par_map(paths, |id| {
        let (mut defect, mut norm, mut gamma, mut reproj) = (0.0f64, 0.0f64, 0.0f64, 0u64);
        let (_, _, term) = spec.run_path(&e0, n, id, |_, _, _, d| {
            defect = defect.max(d.defect);
            norm = norm.max(d.unit_norm_error);
            gamma = gamma.max(d.gamma);
            reproj += u64::from(d.reprojected);
            true
        });
        (defect, norm, gamma, reproj, term.is_some())
    });
    let max_defect = per.iter().fold(0.0f64, |a, p| a.max(p.0));
    let max_norm = per.iter().fold(0.0f64, |a, p| a.max(p.1));
    let max_gamma = per.iter().fold(0.0f64, |a, p| a.max(p.2));
    let reprojections: u64 = per.iter().map(|p| p.3).sum();
    let terminated = per.iter().filter(|p| p.4).count();
    cx.stat("paths", paths);
    cx.stat("steps", n);
    cx.stat("dt", dt);
    cx.stat("max_gamma", max_gamma);
    cx.stat("reprojections", reprojections);
    cx.check(CheckRecord::at_most(&name, "max_orthonormality_defect", max_defect, 1e-8));
    cx.check(CheckRecord::at_most(&name, "max_unit_norm_error", max_norm, 1e-8));
    cx.check(CheckRecord::at_most(&name, "terminated_paths", terminated as f64, 0.0));
    cx.store_paths(&spec, &e0, n, paths);
    Ok(())
}

pub fn dudley_radial_moment(cx: &mut Ctx) -> Result<(), HarnessError> {
    let name = cx.name();
    let paths = cx.paths(100_000, 500);
    let dt = cx.dt(1e-3, 1e-2);
    let n = cx.steps(steps_to(1.0, dt), steps_to(1.0, dt));
    let s_end = n as f64 * dt;
    let spec = cx.process(Preset::Dudley, NoiseSpec::isotropic(cx.seed("paths")), integrator(dt))?;
    let e0 = minkowski_origin();
    let (gammas, failed) = final_gammas(cx, &spec, &e0, n, paths);
    let (mean, se) = mean_and_stderr(&gammas);
    // cosh r is an eigenfunction of the generator with eigenvalue d/2
    let target = (0.5 * SPATIAL_DIM as f64 * s_end).exp();
    cx.stat("s_end", s_end);
    cx.stat("target", target);
    cx.stat("paths", paths);
    cx.check(CheckRecord::within_stderr(&name, "mean_cosh_r", mean, target, se, 3.0));
    cx.check(CheckRecord::at_most(&name, "terminated_paths", failed as f64, 0.0));
    cx.store_paths(&spec, &e0, n, paths);
    Ok(())
}

pub fn scheme_equivalence(cx: &mut Ctx) -> Result<(), HarnessError> {
    let name = cx.name();
    let paths = cx.paths(10_000, 300);
    let dt = cx.dt(1e-3, 1e-2);
    let n = cx.steps(steps_to(1.0, dt), steps_to(1.0, dt));
    let spec = cx.process(Preset::Dudley, NoiseSpec::isotropic(cx.seed("geometric")), integrator(dt))?;
    let e0 = minkowski_origin();
    let (geometric, failed) = final_gammas(cx, &spec, &e0, n, paths);
    let chart_seed = cx.seed("chart");
    let chart: Vec<Result<f64, String>> = cx.par_map(paths, |id| {
        let mut rng = PathRng::new(chart_seed, id);
        let (mut m, mut g) = (e0.m, *e0.g());
        for _ in 0..n {
            let (m1, g1) = flj_chart_step_ito(&Spacetime::Minkowski, &m, &g, dt, &mut rng).map_err(|e| e.to_string())?;
            m = m1;
            g = g1;
        }
        Ok(g[(0, 0)])
    });
    let chart: Vec<f64> = chart.into_iter().collect::<Result<_, _>>().map_err(HarnessError::Runtime)?;
    let ks = ks_two_sample(&geometric, &chart)?;
    let (mg, sg) = mean_and_stderr(&geometric);
    let (mc, sc) = mean_and_stderr(&chart);
    cx.stat("mean_gamma_geometric", [mg, sg]);
    cx.stat("mean_gamma_chart", [mc, sc]);
    cx.stat("ks_statistic", ks.statistic);
    cx.check(CheckRecord::at_least(&name, "ks_p_value", ks.p_value, 0.01));
    cx.check(CheckRecord::at_most(&name, "terminated_paths", failed as f64, 0.0));
    cx.store_paths(&spec, &e0, n, paths);
    Ok(())
}

pub fn martingale_covariance(cx: &mut Ctx) -> Result<(), HarnessError> {
    let name = cx.name();
    let paths = cx.paths(2_000, 50);
    let dt = cx.dt(1e-3, 1e-2);
    let window = 0.5;
    let n = cx.steps(steps_to(window, dt), steps_to(window, dt));
    let rw = Spacetime::robertson_walker(ScaleFactor::PowerLaw { p: 1.0 }, 0.05)?;
    let cases = [
        ("minkowski", Preset::Dudley, Spacetime::Minkowski, FourVector::zeros()),
        (
            "rw_linear",
            Preset::FljRw { scale: ScaleFactor::PowerLaw { p: 1.0 }, t_min: 0.05 },
            rw,
            FourVector::from_fn(|i, _| if i == 0 { 1.0 } else { 0.0 }),
        ),
    ];
    for (label, preset, st, start) in cases {
        let spec = crate::processes::make_process(preset, NoiseSpec::isotropic(cx.seed(label)), integrator(dt))?;
        let ev = st.event(start);
        let e0 = BundlePoint::new(ev, st.observer_frame(&ev)?);
        let per: Vec<Result<(Matrix, Matrix), String>> = cx.par_map(paths, |id| {
            let traj = spec.simulate_path(&e0, n, id);
            if traj.termination.is_some() {
                return Err(format!("path {id} terminated: {:?}", traj.termination));
            }
            covariation_of_path(&st, &traj, (0.0, window), |e| comoving_g0_drift(&st, e)).map_err(|e| e.to_string())
        });
        let per: Vec<(Matrix, Matrix)> = per.into_iter().collect::<Result<_, _>>().map_err(HarnessError::Runtime)?;
        let probe = covariance_probe(&per)?;
        let diag = |m: &Matrix| (0..DIM).map(|i| m[(i, i)]).collect::<Vec<f64>>();
        cx.stat(&format!("{label}_realized_diag"), diag(&probe.realized));
        cx.stat(&format!("{label}_predicted_diag"), diag(&probe.predicted));
        cx.stat(&format!("{label}_stderr_diag"), diag(&probe.stderr));
        let z: Vec<Vec<f64>> = (0..DIM)
            .map(|i| (0..DIM).map(|j| (probe.realized[(i, j)] - probe.predicted[(i, j)]) / probe.stderr[(i, j)]).collect())
            .collect();
        cx.stat(&format!("{label}_z"), z);
        cx.check(CheckRecord::at_most(&name, &format!("{label}_max_abs_z"), probe.max_abs_z(), 3.0));
        if label == "minkowski" {
            cx.store_paths(&spec, &e0, n, paths);
        }
    }
    Ok(())
}

/// A rotation touching every pair of spatial axes.
fn generic_rotation() -> Matrix {
    let mut r = Matrix::identity();
    let mut angle = 0.7;
    for i in 1..DIM {
        for j in i + 1..DIM {
            r *= plane_rotation(i, j, angle);
            angle += 0.4;
        }
    }
    r
}

pub fn rotation_invariance(cx: &mut Ctx) -> Result<(), HarnessError> {
    let name = cx.name();
    let paths = cx.paths(10_000, 300);
    let dt = cx.dt(1e-3, 1e-2);
    let n = cx.steps(steps_to(1.0, dt), steps_to(1.0, dt));
    let plain = cx.process(Preset::Dudley, NoiseSpec::isotropic(cx.seed("plain")), integrator(dt))?;
    let rotated = cx.process(Preset::Dudley, NoiseSpec::isotropic(cx.seed("rotated")), integrator(dt))?;
    let e0 = minkowski_origin();
    let e0r = BundlePoint::new(e0.m, e0.g() * generic_rotation());
    let (a, fa) = final_gammas(cx, &plain, &e0, n, paths);
    let (b, fb) = final_gammas(cx, &rotated, &e0r, n, paths);
    let ks = ks_two_sample(&a, &b)?;
    cx.stat("ks_statistic", ks.statistic);
    cx.stat("mean_gamma", [mean_and_stderr(&a).0, mean_and_stderr(&b).0]);
    cx.check(CheckRecord::at_least(&name, "ks_p_value", ks.p_value, 0.01));
    cx.check(CheckRecord::at_most(&name, "terminated_paths", (fa + fb) as f64, 0.0));
    cx.store_paths(&rotated, &e0r, n, paths);
    Ok(())
}

pub fn anisotropy(cx: &mut Ctx) -> Result<(), HarnessError> {
    let name = cx.name();
    let paths = cx.paths(10_000, 200);
    let dt = cx.dt(1e-5, 1e-5);
    let n = cx.steps(100, 100);
    let mixing = SpatialMatrix::from_fn(|i, j| if i != j { 0.0 } else if i + 1 == SPATIAL_DIM { 2.0 } else { 1.0 });
    let spec = cx.process(Preset::Dudley, NoiseSpec { mixing, seed: cx.seed("paths") }, integrator(dt))?;
    let e0 = minkowski_origin();
    let st = Spacetime::Minkowski;
    let per: Vec<Result<Vec<f64>, String>> = cx.par_map(paths, |id| {
        let traj: Trajectory = spec.simulate_path(&e0, n, id);
        let mut qv = vec![0.0; SPATIAL_DIM];
        for k in 1..traj.points.len() {
            let (p0, p1) = (&traj.points[k - 1], &traj.points[k]);
            let ds = traj.s[k] - traj.s[k - 1];
            let drift = comoving_g0_drift(&st, p0).map_err(|e| e.to_string())?;
            let dm = p1.g0() - p0.g0() - ds * drift;
            for i in 0..SPATIAL_DIM {
                qv[i] += dm[i + 1] * dm[i + 1];
            }
        }
        Ok(qv)
    });
    let per: Vec<Vec<f64>> = per.into_iter().collect::<Result<_, _>>().map_err(HarnessError::Runtime)?;
    let nf = per.len() as f64;
    let mean: Vec<f64> = (0..SPATIAL_DIM).map(|i| per.iter().map(|q| q[i]).sum::<f64>() / nf).collect();
    let cov = |i: usize, j: usize| per.iter().map(|q| (q[i] - mean[i]) * (q[j] - mean[j])).sum::<f64>() / (nf - 1.0);
    let mut ratios = Vec::new();
    for i in 1..SPATIAL_DIM {
        let r = mean[i] / mean[0];
        // delta method for a ratio of means
        let var = (cov(i, i) - 2.0 * r * cov(i, 0) + r * r * cov(0, 0)) / (mean[0] * mean[0] * nf);
        let m = mixing[(i, i)] / mixing[(0, 0)];
        cx.check(CheckRecord::within_stderr(&name, &format!("qv_ratio_axis{}", i + 1), r, m * m, var.sqrt(), 3.0));
        ratios.push(r);
    }
    cx.stat("qv_means", mean);
    cx.stat("window", n as f64 * dt);
    cx.store_paths(&spec, &e0, n, paths);
    Ok(())
}

fn bump(u0: f64, r0: f64) -> f64 {
    let r = u0.max(1.0).acosh();
    if r < r0 {
        (1.0 - (r / r0).powi(2)).powi(4)
    } else {
        0.0
    }
}

pub fn divergence_identity(cx: &mut Ctx) -> Result<(), HarnessError> {
    let name = cx.name();
    let quad = FiberQuadrature::default();
    let r0 = 1.5;
    let decay = TailDecay::CompactRapidity(r0);
    let centre = FourVector::from_fn(|i, _| [0.3, -0.2, 0.1, 0.25][i % 4]);
    let m = FourVector::from_fn(|i, _| [0.5, 0.2, -0.1, 0.3][i % 4]);
    let gauss = move |mm: &FourVector| (-0.5 * (mm - centre).norm_squared()).exp();
    let fd = 1e-3;
    type H = Box<dyn Fn(&FourVector, &[f64]) -> f64>;
    let cases: [(&str, H); 3] = [
        ("gaussian_times_bump", Box::new(move |mm, u| gauss(mm) * bump(u[0], r0))),
        ("gaussian_times_tilted_bump", Box::new(move |mm, u| gauss(mm) * bump(u[0], r0) * (1.0 + 0.4 * u[1]))),
        (
            "coupled",
            Box::new(move |mm, u| {
                let shifted = FourVector::from_fn(|i, _| mm[i] - centre[i] - 0.5 * u[i]);
                (-0.5 * shifted.norm_squared()).exp() * bump(u[0], r0)
            }),
        ),
    ];
    let mut rows = serde_json::Map::new();
    for (label, h) in cases.iter() {
        let c = divergence_check(h, &m, fd, &quad, decay).map_err(|e| HarnessError::Runtime(e.to_string()))?;
        rows.insert((*label).into(), serde_json::json!({ "lhs": c.lhs, "rhs": c.rhs }));
        cx.check(CheckRecord::at_most(&name, &format!("{label}_relative_error"), c.rel_err, 1e-3));
    }
    // m-independent h: both sides vanish
    let flat = divergence_check(|_: &FourVector, u: &[f64]| bump(u[0], r0), &m, fd, &quad, decay)
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    cx.stat("sides", rows);
    cx.stat("constant_in_m_sides", [flat.lhs, flat.rhs]);
    Ok(())
}

pub fn determinism(cx: &mut Ctx) -> Result<(), HarnessError> {
    let name = cx.name();
    let mut mismatches = 0usize;
    let mut rows = serde_json::Map::new();
    for info in registry::list_experiments() {
        if info.name == "determinism" {
            continue;
        }
        let mut reports = Vec::new();
        for workers in [1usize, 4, 8] {
            let mut cfg = ExperimentConfig::smoke(info.name);
            cfg.seed = cx.cfg.seed;
            cfg.workers = Some(workers);
            reports.push(run_experiment(&cfg)?.report.to_json());
        }
        let same = reports.iter().all(|r| r == &reports[0]);
        mismatches += usize::from(!same);
        rows.insert(info.name.into(), serde_json::Value::Bool(same));
    }
    cx.stat("identical", rows);
    cx.check(CheckRecord::at_most(&name, "mismatched_experiments", mismatches as f64, 0.0));
    Ok(())
}
