//! First crossings of spacelike hyperplanes and constant-time slices.

use crate::framebundle::{BundlePoint, Trajectory};
use crate::minkowski::{q_inner, FourVector, Matrix, SpatialVector, DIM};
use serde::Serialize;
use std::io::{self, Write};

/// Minkowski hyperplane `{m : q(a0, m) = level}` with in-plane coordinates
/// `x_i = -q(a^i, m - anchor)`, or a coordinate-time slice `{t = level}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HyperplaneSpec {
    Plane { alpha: Matrix, level: f64, anchor: FourVector },
    TimeSlice { level: f64 },
}

impl HyperplaneSpec {
    /// Plane orthogonal to `alpha`'s time axis at frame time `level`.
    pub fn plane(alpha: Matrix, level: f64) -> Result<Self, String> {
        check_frame(&alpha)?;
        let anchor = level * alpha.column(0).into_owned();
        Ok(HyperplaneSpec::Plane { alpha, level, anchor })
    }

    /// Plane orthogonal to `alpha`'s time axis through `point`, which becomes
    /// the origin of the in-plane coordinates.
    pub fn through(alpha: Matrix, point: FourVector) -> Result<Self, String> {
        check_frame(&alpha)?;
        let level = q_inner(&alpha.column(0).into_owned(), &point);
        Ok(HyperplaneSpec::Plane { alpha, level, anchor: point })
    }

    /// Signed distance in the normal's time, negative before the crossing.
    pub fn height(&self, m: &FourVector) -> f64 {
        match self {
            HyperplaneSpec::Plane { alpha, level, .. } => q_inner(&alpha.column(0).into_owned(), m) - level,
            HyperplaneSpec::TimeSlice { level } => m[0] - level,
        }
    }

    /// In-surface coordinates of an event on the surface.
    pub fn coordinates(&self, m: &FourVector) -> SpatialVector {
        match self {
            HyperplaneSpec::Plane { alpha, anchor, .. } => {
                let rel = m - anchor;
                SpatialVector::from_fn(|i, _| -q_inner(&alpha.column(i + 1).into_owned(), &rel))
            }
            HyperplaneSpec::TimeSlice { .. } => SpatialVector::from_fn(|i, _| m[i + 1]),
        }
    }

    /// `q(normal, g0)`. For time slices the normal is `d/dt`, a unit vector
    /// for the metrics used here.
    pub fn lambda(&self, g0: &FourVector) -> f64 {
        match self {
            HyperplaneSpec::Plane { alpha, .. } => q_inner(&alpha.column(0).into_owned(), g0),
            HyperplaneSpec::TimeSlice { .. } => g0[0],
        }
    }
}

fn check_frame(alpha: &Matrix) -> Result<(), String> {
    let defect = crate::minkowski::orthonormality_defect(alpha);
    if defect > 1e-9 || alpha[(0, 0)] <= 0.0 {
        return Err(format!("plane frame must be a future-directed Lorentz frame (defect {defect:.3e})"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HitRecord {
    pub path_id: u64,
    pub s: f64,
    #[serde(skip)]
    pub x: SpatialVector,
    #[serde(skip)]
    pub frame: Matrix,
    pub lambda: f64,
}

impl HitRecord {
    pub fn g0(&self) -> FourVector {
        self.frame.column(0).into_owned()
    }
}

/// Linear interpolation in proper time between two consecutive points that
/// straddle the surface.
fn interpolate(plane: &HyperplaneSpec, path_id: u64, s0: f64, e0: &BundlePoint, s1: f64, e1: &BundlePoint) -> HitRecord {
    let (h0, h1) = (plane.height(&e0.m.coords), plane.height(&e1.m.coords));
    let w = if h1 != h0 { -h0 / (h1 - h0) } else { 0.0 };
    let m = e0.m.coords + w * (e1.m.coords - e0.m.coords);
    let frame = e0.g() + w * (e1.g() - e0.g());
    let g0 = frame.column(0).into_owned();
    HitRecord { path_id, s: s0 + w * (s1 - s0), x: plane.coordinates(&m), frame, lambda: plane.lambda(&g0) }
}

/// Streaming first-crossing detector for one surface and one path.
#[derive(Debug, Clone)]
pub struct HitDetector {
    pub plane: HyperplaneSpec,
    pub hit: Option<HitRecord>,
}

impl HitDetector {
    pub fn new(plane: HyperplaneSpec) -> Self {
        Self { plane, hit: None }
    }

    /// Feeds one step; returns the hit when this step produced it.
    pub fn observe(&mut self, path_id: u64, s0: f64, e0: &BundlePoint, s1: f64, e1: &BundlePoint) -> Option<HitRecord> {
        if self.hit.is_some() {
            return None;
        }
        let (h0, h1) = (self.plane.height(&e0.m.coords), self.plane.height(&e1.m.coords));
        if h0 < 0.0 && h1 >= 0.0 {
            let rec = interpolate(&self.plane, path_id, s0, e0, s1, e1);
            self.hit = Some(rec);
            return Some(rec);
        }
        None
    }
}

/// First crossing from the past side along a stored trajectory.
pub fn detect_hits(traj: &Trajectory, plane: &HyperplaneSpec) -> Option<HitRecord> {
    let mut det = HitDetector::new(*plane);
    for k in 1..traj.points.len() {
        if let Some(h) = det.observe(traj.path_id, traj.s[k - 1], &traj.points[k - 1], traj.s[k], &traj.points[k]) {
            return Some(h);
        }
    }
    None
}

/// Number of sign changes of the height along a trajectory, in either direction.
pub fn count_crossings(traj: &Trajectory, plane: &HyperplaneSpec) -> usize {
    traj.points
        .windows(2)
        .filter(|w| (plane.height(&w[0].m.coords) < 0.0) != (plane.height(&w[1].m.coords) < 0.0))
        .count()
}

/// Rows `path_id, s, x1..xd, g00..g(d)(d) (row-major), lambda`.
pub fn write_hits_csv<W: Write>(w: &mut W, hits: &[HitRecord]) -> io::Result<()> {
    write!(w, "path_id,s")?;
    for i in 1..DIM {
        write!(w, ",x{i}")?;
    }
    for r in 0..DIM {
        for c in 0..DIM {
            write!(w, ",g{r}{c}")?;
        }
    }
    writeln!(w, ",lambda")?;
    for h in hits {
        write!(w, "{},{:.16e}", h.path_id, h.s)?;
        for v in h.x.iter() {
            write!(w, ",{v:.16e}")?;
        }
        for r in 0..DIM {
            for c in 0..DIM {
                write!(w, ",{:.16e}", h.frame[(r, c)])?;
            }
        }
        writeln!(w, ",{:.16e}", h.lambda)?;
    }
    Ok(())
}
