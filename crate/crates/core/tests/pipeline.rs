//! End-to-end checks across modules: config text -> run -> CSV file -> reread.

use simplex_orlicz::domain::{QuadratureSpec, ScalarField};
use simplex_orlicz::harness::{read_csv_file, run_convergence, write_csv_file, ExperimentConfig};
use simplex_orlicz::orlicz::orlicz_norm;
use simplex_orlicz::smoothness::{full_modulus2, SteklovField};
use simplex_orlicz::NFunction;

fn quick(op: &str) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::parse(&format!(
        "operator = {op}\nn = 4,8,16,32\nphi = power:p=2, power:p=3\nfield = quadratic\nquad_levels = 1\n"
    ))
    .unwrap();
    cfg.set("directions", "8").unwrap();
    cfg
}

#[test]
fn csv_file_round_trip_is_exact() {
    let report = run_convergence(&quick("stancu")).unwrap();
    assert_eq!(report.records.len(), 8);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    write_csv_file(&path, &report.records).unwrap();
    let back = read_csv_file(&path).unwrap();
    assert_eq!(back.len(), report.records.len());
    for (a, b) in back.iter().zip(&report.records) {
        assert_eq!((a.n, a.s, &a.phi), (b.n, b.s, &b.phi));
        assert_eq!(a.error_norm.to_bits(), b.error_norm.to_bits());
        assert_eq!(a.bound.to_bits(), b.bound.to_bits());
    }

    let again = dir.path().join("again.csv");
    write_csv_file(&again, &run_convergence(&quick("stancu")).unwrap().records).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = read_csv_file(&dir.path().join("nope.csv")).unwrap_err();
    assert!(err.to_string().contains("nope.csv"), "{err}");
}

#[test]
fn error_decreases_and_stays_below_bound() {
    for op in ["mkz", "stancu"] {
        let mut cfg = quick(op);
        cfg.set("n", "4,8,16,32").unwrap();
        let report = run_convergence(&cfg).unwrap();
        for phi in ["power:p=2", "power:p=3"] {
            let rows: Vec<_> = report.records.iter().filter(|r| r.phi == phi).collect();
            for w in rows.windows(2) {
                assert!(w[1].error_norm < w[0].error_norm, "{op} {phi}: {:?}", w);
            }
            for r in &rows {
                assert!(r.ratio.is_finite() && r.ratio > 0.0 && r.ratio < 1.0, "{op} {phi} n={}: {}", r.n, r.ratio);
            }
        }
    }
}

#[test]
fn steklov_mean_does_not_increase_the_norm() {
    // averaging against a probability kernel contracts every Orlicz norm
    let q = QuadratureSpec::new(6, 2, 1e-9).unwrap();
    let f = ScalarField::builtin("oscillatory").unwrap();
    for key in ["power:p=2", "power:p=3", "powerlog:p=2"] {
        let nf = NFunction::from_key(key).unwrap();
        let base = orlicz_norm(&nf, &f, &q).unwrap().value;
        for r in [0.05, 0.2] {
            let smooth = SteklovField::new(f.clone(), r, 8).unwrap().to_field();
            let v = orlicz_norm(&nf, &smooth, &q).unwrap().value;
            assert!(v <= base * (1.0 + 1e-6), "{key} r={r}: {v} > {base}");
        }
    }
}

#[test]
fn modulus_is_stable_under_direction_doubling() {
    let q = QuadratureSpec::new(6, 1, 1e-9).unwrap();
    let nf = NFunction::power(2.0).unwrap();
    let f = ScalarField::builtin("quadratic").unwrap();
    let coarse = full_modulus2(&nf, &f, 0.1, &q, 16, 8).unwrap();
    let fine = full_modulus2(&nf, &f, 0.1, &q, 32, 8).unwrap();
    // the fine set contains the coarse one
    assert!(fine.value >= coarse.value);
    assert!(fine.value <= coarse.value * 1.05, "{} vs {}", fine.value, coarse.value);
    assert!(fine.argmax_direction.norm() > 0.0);
}
