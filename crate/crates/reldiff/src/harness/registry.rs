//! The experiment registry, in listing order.

use super::experiments as ex;
use super::{Ctx, HarnessError};
use crate::processes::Preset;

pub type RunFn = fn(&mut Ctx) -> Result<(), HarnessError>;
pub type AcceptsFn = fn(&Preset) -> Result<(), String>;

#[derive(Clone, Copy)]
pub struct ExperimentInfo {
    pub name: &'static str,
    pub description: &'static str,
    /// The relation or formula the experiment reproduces.
    pub anchor: &'static str,
    pub accepts: AcceptsFn,
    pub run: RunFn,
}

impl std::fmt::Debug for ExperimentInfo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExperimentInfo").field("name", &self.name).finish_non_exhaustive()
    }
}

fn none(_: &Preset) -> Result<(), String> {
    Err("this experiment has a fixed process".into())
}

fn dudley(p: &Preset) -> Result<(), String> {
    match p {
        Preset::Dudley => Ok(()),
        _ => Err("expected preset `dudley`".into()),
    }
}

fn roup(p: &Preset) -> Result<(), String> {
    match p {
        Preset::RoupMink { .. } => Ok(()),
        _ => Err("expected preset `roup_mink`".into()),
    }
}

static REGISTRY: [ExperimentInfo; 13] = [
    ExperimentInfo {
        name: "frame_integrity",
        description: "Dudley paths keep q-orthonormal frames and unit g0 over 10^4 steps",
        anchor: "q(g^a, g^b) = eta_ab along the frame diffusion",
        accepts: dudley,
        run: ex::frame_integrity,
    },
    ExperimentInfo {
        name: "dudley_radial_moment",
        description: "Monte Carlo mean of cosh r_s against exp(d s / 2)",
        anchor: "Laplacian on H^d: Delta cosh r = d cosh r",
        accepts: dudley,
        run: ex::dudley_radial_moment,
    },
    ExperimentInfo {
        name: "scheme_equivalence",
        description: "geometric Stratonovich scheme vs Ito chart equations, KS test on gamma at s = 1",
        anchor: "Stratonovich SDE on the frame bundle vs its Ito form in coordinates",
        accepts: none,
        run: ex::scheme_equivalence,
    },
    ExperimentInfo {
        name: "martingale_covariance",
        description: "realized covariation of g0 against the integral of g0 g0^T - Q^{-1}, Minkowski and a(t) = t",
        anchor: "d<g0, g0> = (g0 (g0)^* - Q^{-1}) ds",
        accepts: none,
        run: ex::martingale_covariance,
    },
    ExperimentInfo {
        name: "rotation_invariance",
        description: "Dudley from e0 and from e0 R give the same law of gamma at s = 1",
        anchor: "law of the frame diffusion is invariant under the right SO(d) action",
        accepts: dudley,
        run: ex::rotation_invariance,
    },
    ExperimentInfo {
        name: "roup_juttner",
        description: "long-run ROUP velocities against the quadrature-normalized relativistic Maxwellian",
        anchor: "invariant density proportional to exp(-4 alpha gamma(q))",
        accepts: roup,
        run: ex::roup_juttner,
    },
    ExperimentInfo {
        name: "adjoint_stationarity",
        description: "L* applied to the full-bundle stationary candidate at random fiber points",
        anchor: "L* rho = 0 for rho = exp(-4 alpha q(f0, g0)) against Haar measure",
        accepts: roup,
        run: ex::adjoint_stationarity,
    },
    ExperimentInfo {
        name: "hitting_density_relation",
        description: "one-particle function from two planes through one event, normal tilt 0.5",
        anchor: "f_V(e0, e) = q(pi_V(e), g0) f(e0; e)",
        accepts: dudley,
        run: ex::hitting_density_relation,
    },
    ExperimentInfo {
        name: "weak_form_hitting",
        description: "E f(e_H) at a lab plane against the occupation-density quadrature",
        anchor: "E[f(e_H)] = int f(e) q(alpha0, g0) f(e0; e) VOL(de)",
        accepts: dudley,
        run: ex::weak_form_hitting,
    },
    ExperimentInfo {
        name: "lemma18_divergence",
        description: "finite-difference div X against the fiber quadrature of H0 h",
        anchor: "(div X)(m) = int (H0 h)(m, g) VOL_m(dg)",
        accepts: none,
        run: ex::divergence_identity,
    },
    ExperimentInfo {
        name: "entropy_decay",
        description: "k-NN relative entropy between ROUP velocity laws from two initial laws",
        anchor: "H(P; Q) = E_P[ln dP/dQ] decreasing along the flow",
        accepts: roup,
        run: ex::entropy_decay,
    },
    ExperimentInfo {
        name: "determinism",
        description: "every other experiment at smoke scale gives byte-identical reports on 1, 4 and 8 workers",
        anchor: "reproducibility contract of the harness",
        accepts: none,
        run: ex::determinism,
    },
    ExperimentInfo {
        name: "anisotropy",
        description: "noise mixing M = diag(1, 1, 2): quadratic-variation ratios (1, 1, 4) along lab axes",
        anchor: "dB = M dW in the rest frame",
        accepts: dudley,
        run: ex::anisotropy,
    },
];

/// Registered experiments in stable order.
pub fn list_experiments() -> &'static [ExperimentInfo] {
    &REGISTRY
}

pub fn find(name: &str) -> Option<&'static ExperimentInfo> {
    REGISTRY.iter().find(|e| e.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique_and_ordered() {
        let names: Vec<_> = list_experiments().iter().map(|e| e.name).collect();
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
        assert_eq!(names[0], "frame_integrity");
        assert_eq!(names[12], "anisotropy");
        assert!(find("hitting_density_relation").unwrap().anchor.contains("q(pi_V(e), g0)"));
        assert!(find("lemma18_divergence").is_some());
        assert!(find("nope").is_none());
    }
}
