//! Full-scale acceptance run: one registered experiment per criterion, at the
//! default configuration and seed. Prints one line per criterion.

use reldiff::harness::config::ExperimentConfig;
use reldiff::harness::run_experiment;
use std::io::{self, Write};

/// `(criterion, experiment, wall-clock budget in seconds)`.
const CRITERIA: [(u32, &str, Option<f64>); 13] = [
    (1, "frame_integrity", Some(30.0)),
    (2, "dudley_radial_moment", Some(120.0)),
    (3, "scheme_equivalence", None),
    (4, "martingale_covariance", None),
    (5, "rotation_invariance", None),
    (6, "roup_juttner", Some(180.0)),
    (7, "adjoint_stationarity", None),
    (8, "hitting_density_relation", Some(600.0)),
    (9, "weak_form_hitting", None),
    (10, "lemma18_divergence", None),
    (11, "entropy_decay", None),
    (12, "determinism", None),
    (13, "anisotropy", None),
];

#[test]
fn acceptance() {
    let mut out = io::stdout();
    // libtest has already written "test acceptance ... " without a newline
    writeln!(out).unwrap();
    let mut failed = Vec::new();
    for (n, name, budget) in CRITERIA {
        let outcome = run_experiment(&ExperimentConfig::new(name)).expect("default configuration is valid");
        let r = &outcome.report;
        let in_time = budget.map_or(true, |b| outcome.wall_seconds <= b);
        let pass = r.pass && in_time;
        let detail: Vec<String> = r
            .checks
            .iter()
            .map(|c| format!("{}={:.4e}{}", c.statistic, c.value, if c.pass { "" } else { "(x)" }))
            .collect();
        let time = match budget {
            Some(b) => format!("{:.1}s/{b:.0}s", outcome.wall_seconds),
            None => format!("{:.1}s", outcome.wall_seconds),
        };
        let err = r.error.as_deref().map(|e| format!(" error: {e}")).unwrap_or_default();
        writeln!(out, "criterion {n:>2} {name:<26} {} [{time}] {}{err}", if pass { "PASS" } else { "FAIL" }, detail.join(" ")).unwrap();
        out.flush().unwrap();
        if !pass {
            failed.push(n);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
