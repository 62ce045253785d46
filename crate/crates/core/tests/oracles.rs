//! Cross-checks against independent implementations.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use statrs::function::erf as reference;

use photon_chaos::analysis::io::{load_pattern, write_csv_matrix, write_mask_pgm, write_pgm, PgmFormat};
use photon_chaos::analysis::{normalized_entropy, synthetic_pattern, PatternKind};
use photon_chaos::billiard::WedgeGeometry;
use photon_chaos::special::{erf, erf_inv, erfc, erfc_inv, normal_cdf};
use photon_chaos::stability::{exceedance_probability, porter_thomas_cdf};

// (x, erf x, erfc x) from the C library's erf/erfc.
const LIBM: [(f64, f64, f64); 15] = [
    (-5.0, -0.9999999999984626, 1.9999999999984626),
    (-3.0, -0.9999779095030014, 1.9999779095030015),
    (-2.28, -0.998737661150219, 1.998737661150219),
    (-1.0, -0.8427007929497149, 1.842700792949715),
    (-0.3, -0.3286267594591274, 1.3286267594591274),
    (0.0, 0.0, 1.0),
    (1e-08, 1.1283791670955126e-08, 0.9999999887162083),
    (0.1, 0.1124629160182849, 0.8875370839817152),
    (0.5, 0.5204998778130465, 0.4795001221869535),
    (0.9, 0.7969082124228322, 0.20309178757716786),
    (1.5, 0.9661051464753108, 0.033894853524689274),
    (2.28, 0.998737661150219, 0.0012623388497809494),
    (3.5, 0.9999992569016276, 7.430983723414128e-07),
    (5.0, 0.9999999999984626, 1.5374597944280351e-12),
    (8.0, 1.0, 1.1224297172982928e-29),
];

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

#[test]
fn error_functions_match_libm() {
    for &(x, e, ec) in &LIBM {
        assert!(close(erf(x), e, 1e-14), "erf({x}) = {:e}", erf(x));
        assert!(close(erfc(x), ec, 1e-14), "erfc({x}) = {:e}", erfc(x));
    }
}

// statrs' erf family is accurate to roughly 1e-10, so it only serves as a
// coarse cross-check.
#[test]
fn error_functions_match_statrs() {
    for i in 0..=600 {
        let x = -6.0 + 0.02 * i as f64;
        assert!(close(erf(x), reference::erf(x), 1e-9), "erf({x})");
        assert!(close(erfc(x), reference::erfc(x), 1e-9), "erfc({x})");
    }
    for i in 1..1000 {
        let p = i as f64 / 1000.0;
        let y = 2.0 * p - 1.0;
        assert!(close(erf_inv(y), reference::erf_inv(y), 1e-9), "erf_inv({y})");
        assert!(
            close(erfc_inv(2.0 * p), reference::erfc_inv(2.0 * p), 1e-9),
            "erfc_inv({})",
            2.0 * p
        );
    }
}

#[test]
fn inverses_are_exact_on_the_forward_functions() {
    for i in 1..2000 {
        let y = -1.0 + i as f64 / 1000.0;
        assert!((erf(erf_inv(y)) - y).abs() <= 4.0 * f64::EPSILON, "erf(erf_inv({y}))");
    }
    for k in 1..300 {
        let q = 10f64.powf(-(k as f64) / 10.0);
        assert!(close(erfc(erfc_inv(q)), q, 1e-13), "erfc(erfc_inv({q}))");
    }
}

#[test]
fn normal_cdf_matches_statrs() {
    let n = Normal::new(0.0, 1.0).unwrap();
    for i in 0..=200 {
        let x = -8.0 + 0.08 * i as f64;
        assert!(close(normal_cdf(x), n.cdf(x), 1e-9), "Phi({x})");
        assert!(
            close(normal_cdf(x), 0.5 * erfc(-x / std::f64::consts::SQRT_2), 1e-15),
            "Phi({x})"
        );
    }
}

#[test]
fn porter_thomas_is_chi_square_with_one_degree() {
    let chi = ChiSquared::new(1.0).unwrap();
    for i in 1..=400 {
        let x = 0.05 * i as f64;
        assert!(close(porter_thomas_cdf(x), chi.cdf(x), 1e-12), "cdf({x})");
        assert!(close(exceedance_probability(x), chi.sf(x), 1e-10), "sf({x})");
    }
}

#[test]
fn pattern_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let w = WedgeGeometry::from_degrees(35.0).unwrap();
    let e = w.mass * w.gravity * 2e-3;
    let p = synthetic_pattern(PatternKind::Chaotic, &w, e, 40, 40, 9).unwrap();
    let s0 = normalized_entropy(&p, 128).unwrap().normalized;

    let pgm = dir.path().join("p.pgm");
    let mask = dir.path().join("mask.pgm");
    let csv = dir.path().join("p.csv");
    write_pgm(&p, PgmFormat::Raw, 65535, std::fs::File::create(&pgm).unwrap()).unwrap();
    write_mask_pgm(&p, std::fs::File::create(&mask).unwrap()).unwrap();
    write_csv_matrix(&p, std::fs::File::create(&csv).unwrap()).unwrap();

    let from_pgm = load_pattern(&pgm, Some(&mask)).unwrap();
    assert_eq!(from_pgm.mask(), p.mask());
    let quantum = p.max() / 65535.0;
    for (a, b) in from_pgm.values().iter().zip(p.values()) {
        assert!((a - b).abs() <= quantum, "{a} vs {b}");
    }
    assert!((normalized_entropy(&from_pgm, 128).unwrap().normalized - s0).abs() < 1e-3);

    let from_csv = load_pattern(&csv, None).unwrap();
    assert_eq!(from_csv.mask(), p.mask());
    assert_eq!(normalized_entropy(&from_csv, 128).unwrap().normalized, s0);
}
