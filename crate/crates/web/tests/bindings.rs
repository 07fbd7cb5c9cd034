use sdcfr_web::{cfr_curve, reservoir_retention, trajectory_rows};

#[test]
fn curve_reaches_known_kuhn_level() {
    let c = cfr_curve("kuhn", false, false, 10_000, 1000).unwrap();
    assert_eq!(c.len(), 20);
    assert_eq!(c[18], 10_000.0);
    assert!(c[19] < 5.0 && c[1] > c[19]);
    assert!(cfr_curve("chess", false, false, 10, 1).is_err());
}

#[test]
fn trajectory_frequencies_track_explicit_average() {
    let rows = trajectory_rows(12, 20_000, 3).unwrap();
    assert_eq!(rows.len(), 12);
    for (label, p, f, n) in rows {
        assert!(n > 0, "{label}");
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((f - p).abs() <= 4.0 * sd + 1e-12, "{label}: {f} vs {p}");
    }
}

#[test]
fn retention_is_near_k_over_n() {
    let r = reservoir_retention(10, 40, 4000, 1).unwrap();
    let sum: f64 = r.iter().sum();
    assert!((sum - 10.0).abs() < 1e-9);
    assert!(r.iter().all(|f| (f - 0.25).abs() < 0.04));
}
