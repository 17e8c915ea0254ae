//! Frozen values from independent computations (mpmath quadrature of the
//! one-dimensional sub-level lengths, closed-form enumerations).

use morse_entropy::measure::{estimate_sublevel_volume, SamplerConfig};
use morse_entropy::morse::{classify_critical_point, find_critical_points, SearchConfig, Tolerances};
use morse_entropy::potential::BuiltinKind;
use morse_entropy::PotentialModel;

fn double_well(n: usize) -> PotentialModel {
    PotentialModel::builtin(BuiltinKind::UncoupledDoubleWell, n).unwrap()
}

/// Length of `{x : x⁴/4 − x²/2 ≤ e}`.
fn dw_length(e: f64) -> f64 {
    if e < -0.25 {
        0.0
    } else if e >= 0.0 {
        2.0 * (1.0 + (1.0 + 4.0 * e).sqrt()).sqrt()
    } else {
        let s = (1.0 + 4.0 * e).sqrt();
        2.0 * ((1.0 + s).sqrt() - (1.0 - s).sqrt())
    }
}

#[test]
fn one_dimensional_lengths() {
    assert!((dw_length(0.2) - 3.060_484_135_884_304).abs() < 1e-14);
    assert!((dw_length(-0.1) - 1.714_746_553_788_808).abs() < 1e-14);
    let m = double_well(1);
    for (v, exact) in [(0.2, 3.060_484_135_884_304), (-0.1, 1.714_746_553_788_808)] {
        let e = estimate_sublevel_volume(&m, v, &SamplerConfig::new(1_000_000, 4)).unwrap();
        assert!((e.mean - exact).abs() < 3.0 * e.stderr, "v={v}: {e:?}");
    }
}

#[test]
fn two_dimensional_areas() {
    let m = double_well(2);
    for (v, exact) in [
        (0.2, 9.996_710_953_015_385),
        (-0.3, 3.115_073_250_519_016),
        (0.0, 8.885_765_876_316_733),
        (1.0, 13.100_649_605_610_513),
    ] {
        let e = estimate_sublevel_volume(&m, v, &SamplerConfig::new(2_000_000, 6)).unwrap();
        assert!((e.mean - exact).abs() < 3.0 * e.stderr, "v={v}: {e:?} vs {exact}");
    }
}

#[test]
fn epsilon0_and_level_index() {
    let cat = find_critical_points(&double_well(3), 0.1, &SearchConfig::with_seed(3)).unwrap();
    assert_eq!(cat.critical_values.len(), 4);
    assert!((cat.epsilon0().unwrap() - 0.225).abs() < 1e-12);
    assert_eq!(cat.level_index_nu(-0.3), 2);
    assert_eq!(cat.multiplicities_below(-0.3).unwrap(), vec![8, 12, 0, 0]);
    assert_eq!(cat.euler_characteristic(-0.3).unwrap(), -4);
}

#[test]
fn small_catalogs() {
    let one = double_well(1);
    assert_eq!(find_critical_points(&one, -0.5, &SearchConfig::with_seed(1)).unwrap().points.len(), 0);
    assert_eq!(find_critical_points(&one, -0.2, &SearchConfig::with_seed(1)).unwrap().points.len(), 2);
    let h = PotentialModel::builtin(BuiltinKind::Harmonic, 4).unwrap();
    let cat = find_critical_points(&h, 10.0, &SearchConfig::with_seed(1)).unwrap();
    assert_eq!(cat.points.len(), 1);
    assert_eq!(cat.multiplicities_below(1.0).unwrap(), vec![1, 0, 0, 0, 0]);
    assert!(matches!(cat.epsilon0(), Err(morse_entropy::Error::SingleLevel)));
}

#[test]
fn jacobian_factors() {
    let tol = Tolerances::default();
    let saddle = classify_critical_point(&double_well(1), &[0.0], &tol).unwrap();
    assert_eq!(saddle.morse_index, 1);
    assert!((saddle.jacobian().unwrap() - std::f64::consts::SQRT_2).abs() < 1e-14);
    let min = classify_critical_point(&double_well(1), &[1.0], &tol).unwrap();
    assert!((min.jacobian().unwrap() - 1.0).abs() < 1e-14);
    let p = classify_critical_point(&double_well(3), &[0.0, 0.0, 1.0], &tol).unwrap();
    assert_eq!(p.morse_index, 2);
    assert_eq!(p.eigenvalues, vec![-1.0, -1.0, 2.0]);
}
