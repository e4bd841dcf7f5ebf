use reldiff::harness::config::{ConfigError, ExperimentConfig, Scale};
use reldiff::harness::{list_experiments, run_experiment};

#[test]
fn every_registered_experiment_has_a_valid_default_config() {
    for e in list_experiments() {
        ExperimentConfig::new(e.name).validate().unwrap_or_else(|err| panic!("{}: {err}", e.name));
        ExperimentConfig::smoke(e.name).validate().unwrap();
    }
}

#[test]
fn overrides_parse() {
    let cfg = ExperimentConfig::from_toml(
        "schema_version = 1\nexperiment = \"roup_juttner\"\nscale = \"smoke\"\npaths = 10\n\
         [process]\npreset = \"roup_mink\"\nalpha = 0.7\n[estimator]\nbins = 12\n",
    )
    .unwrap();
    cfg.validate().unwrap();
    assert_eq!(cfg.scale, Scale::Smoke);
    assert_eq!(cfg.paths, Some(10));
    assert_eq!(cfg.estimator.bins, Some(12));
}

#[test]
fn wrong_schema_and_bad_alpha_are_rejected() {
    let v2 = ExperimentConfig::from_toml("schema_version = 2\nexperiment = \"anisotropy\"\n").and_then(|c| c.validate());
    assert!(matches!(v2, Err(ConfigError::Field { ref field, .. }) if field == "schema_version"), "{v2:?}");
    let alpha = ExperimentConfig::from_toml(
        "schema_version = 1\nexperiment = \"roup_juttner\"\n[process]\npreset = \"roup_mink\"\nalpha = -1.0\n",
    )
    .and_then(|c| c.validate());
    assert!(alpha.is_err());
}

#[test]
fn unknown_experiment_fails_before_running() {
    let cfg = ExperimentConfig::new("nope");
    assert!(matches!(cfg.validate(), Err(ConfigError::UnknownExperiment(_))));
    assert!(run_experiment(&cfg).is_err());
}

#[test]
fn report_bytes_do_not_depend_on_workers() {
    let mut cfg = ExperimentConfig::smoke("anisotropy");
    cfg.paths = Some(200);
    let mut reports = Vec::new();
    for w in [1, 2, 5] {
        cfg.workers = Some(w);
        reports.push(run_experiment(&cfg).unwrap().report.to_json());
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[0], reports[2]);
}

#[test]
fn seeds_change_the_numbers() {
    let mut cfg = ExperimentConfig::smoke("dudley_radial_moment");
    let a = run_experiment(&cfg).unwrap().report;
    cfg.seed += 1;
    let b = run_experiment(&cfg).unwrap().report;
    assert_ne!(a.checks[0].value, b.checks[0].value);
}
