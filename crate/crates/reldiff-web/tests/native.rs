use reldiff_web::{hitting_profile, juttner_histogram, spatial_dimension, worldlines};

#[test]
fn worldlines_start_at_origin_and_are_timelike() {
    let rows = worldlines("dudley", 0.5, 3, 200, 1e-3, 7).unwrap();
    assert_eq!(rows.len() % 4, 0);
    let pts: Vec<&[f64]> = rows.chunks(4).collect();
    assert_eq!(pts[0][1..], [0.0, 0.0, 0.0]);
    for w in pts.windows(2).filter(|w| w[0][0] == w[1][0]) {
        assert!(w[1][1] >= w[0][1], "lab time decreased");
        assert!((w[1][2] - w[0][2]).abs() <= w[1][1] - w[0][1] + 1e-12);
    }
    assert_eq!(pts.last().unwrap()[0], 2.0);
}

#[test]
fn worldlines_are_reproducible() {
    let a = worldlines("roup", 0.5, 2, 100, 1e-2, 3).unwrap();
    let b = worldlines("roup", 0.5, 2, 100, 1e-2, 3).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, worldlines("roup", 0.5, 2, 100, 1e-2, 4).unwrap());
}

#[test]
fn bad_inputs_are_rejected() {
    assert!(worldlines("brownian", 0.5, 1, 10, 1e-3, 0).is_err());
    assert!(worldlines("dudley", 0.5, 0, 10, 1e-3, 0).is_err());
    assert!(juttner_histogram(0.5, 10, 1.0, 1e-2, 0, 0).is_err());
    assert!(hitting_profile(3.0, 10, 1e-2, 10, 0).is_err());
}

#[test]
fn juttner_histogram_rows() {
    let bins = 10;
    let rows = juttner_histogram(0.5, 200, 1.0, 5e-2, bins, 1).unwrap();
    assert_eq!(rows.len(), 4 * (bins as usize + 1));
    let candidate_mass: f64 = rows[..4 * bins as usize].chunks(4).map(|r| r[3] * (r[1] - r[0])).sum();
    assert!((candidate_mass - 0.999).abs() < 1e-6, "{candidate_mass}");
    let tail = &rows[4 * bins as usize..];
    assert_eq!(tail[1], 200.0);
    assert!((0.0..=1.0).contains(&tail[0]));
}

#[test]
fn hitting_profile_is_a_sub_density() {
    let bins = 20;
    let rows = hitting_profile(0.5, 300, 1e-2, bins, 2).unwrap();
    assert_eq!(rows.len(), 3 * bins as usize);
    let width = rows[3] - rows[0];
    for k in 1..3 {
        let mass: f64 = rows.chunks(3).map(|r| r[k] * width).sum();
        assert!(mass > 0.5 && mass <= 1.0 + 1e-12, "{mass}");
    }
}

#[test]
fn dimension_is_reported() {
    assert!(spatial_dimension() == 2 || spatial_dimension() == 3);
}
