//! Morse-chart neighborhoods of critical points.
//!
//! Near a nondegenerate critical point of index `k`, in Morse coordinates
//! `x = (X, Y)` with `X ∈ R^k` and `Y ∈ R^{N−k}`, the potential reads
//! `v_c + ξ` with `ξ = |Y|² − |X|²`. The pseudo-cylinder
//! `{|X||Y| <= r, |ξ| <= ε₀}` is sliced by the level sets of `ξ`; its slice
//! density is `½ Surf(k) Surf(N−k) F(ξ, k, N)` (see [`slice`]). Integrating
//! the density gives the coefficients `A` (whole cylinder) and `B` (the part
//! below a level inside the band), from which the topological contribution
//! to `vol(M_v)` is assembled.

pub mod slice;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::morse::CriticalCatalog;
use crate::quad::integrate_with;

pub use slice::{eval_F, eval_F_closed, eval_F_edge, eval_F_recursive, f_at_zero};

use slice::{f_closed, F_QUAD};

/// Surface of the unit sphere in `R^n`, `2 π^{n/2} / Γ(n/2)`.
pub fn sphere_surface(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("sphere_surface needs n >= 1".into()));
    }
    Ok(surf(n))
}

pub(crate) fn surf(n: usize) -> f64 {
    use std::f64::consts::PI;
    // Surf(n + 2) = 2π/n · Surf(n)
    let (mut s, mut m) = if n % 2 == 1 { (2.0, 1) } else { (2.0 * PI, 2) };
    while m < n {
        s *= 2.0 * PI / m as f64;
        m += 2;
    }
    s
}

/// `α = (√(ξ² + 4r²) − ξ)/2` and `β = √((√(ξ² + 4r²) + ξ)/2)`.
///
/// Each branch avoids the subtractive form, so `α β² = r²` and
/// `β² − ξ = α` hold to rounding.
pub fn alpha_beta(xi: f64, r: f64) -> (f64, f64) {
    let s = xi.hypot(2.0 * r);
    let r2 = r * r;
    if xi >= 0.0 {
        let b2 = 0.5 * (s + xi);
        (r2 / b2, b2.sqrt())
    } else {
        let alpha = 0.5 * (s - xi);
        (alpha, (r2 / alpha).sqrt())
    }
}

/// `d vol / dξ` of the pseudo-cylinder of an index-`k` point.
///
/// Interior indexes use `½ Surf(k) Surf(N−k) F`; `k = 0` and `k = N` are the
/// ball slices, independent of `r`. Valid for `N >= 1`; at `N = 2`, `k = 1`
/// the density diverges logarithmically at `ξ = 0`.
pub fn slice_density(xi: f64, k: usize, n: usize, r: f64) -> Result<f64> {
    if k > n || n == 0 {
        return Err(Error::EdgeIndex { k, dim: n });
    }
    if k == 0 || k == n {
        return eval_F_edge(xi, k, n, r);
    }
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("r = {r} must be positive")));
    }
    Ok(0.5 * surf(k) * surf(n - k) * f_closed(xi, k, n, r))
}

/// `∫_{lo}^{hi}` of the slice density, split at `ξ = 0`.
fn density_integral(lo: f64, hi: f64, k: usize, n: usize, r: f64) -> Result<f64> {
    if hi <= lo {
        return Ok(0.0);
    }
    let ball = |s: f64| if s > 0.0 { surf(n) / n as f64 * s.powf(0.5 * n as f64) } else { 0.0 };
    if k == 0 {
        return Ok(ball(hi) - ball(lo));
    }
    if k == n {
        return Ok(ball(-lo) - ball(-hi));
    }
    let c = 0.5 * surf(k) * surf(n - k);
    let f = |x: f64| f_closed(x, k, n, r);
    let mut total = 0.0;
    if lo < 0.0 {
        total += integrate_with(f, lo, hi.min(0.0), F_QUAD)?.value;
    }
    if hi > 0.0 {
        total += integrate_with(f, lo.max(0.0), hi, F_QUAD)?.value;
    }
    Ok(c * total)
}

fn check_neck(n: usize, k: usize, eps0: f64, r: f64) -> Result<()> {
    if n == 0 || k > n {
        return Err(Error::EdgeIndex { k, dim: n });
    }
    if !(eps0 > 0.0 && eps0.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps0 = {eps0} must be positive")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("r = {r} must be positive")));
    }
    Ok(())
}

/// `A(N, k, ε₀) = ½ Surf(k) Surf(N−k) ∫_{−ε₀}^{ε₀} F(ξ, k, N) dξ`, the
/// volume of the pseudo-cylinder in Morse coordinates.
#[allow(non_snake_case)]
pub fn coefficient_A(n: usize, k: usize, eps0: f64, r: f64) -> Result<f64> {
    check_neck(n, k, eps0, r)?;
    density_integral(-eps0, eps0, k, n, r)
}

/// `B(N, k, Δv, ε₀) = J · ½ Surf(k) Surf(N−k) ∫_{−ε₀}^{Δv} F(ξ, k, N) dξ`
/// for `Δv ∈ [−ε₀, ε₀]`: the part of one point's pseudo-cylinder lying in
/// `M_{v_c + Δv}`, in `q` units.
#[allow(non_snake_case)]
pub fn coefficient_B(n: usize, k: usize, delta_v: f64, eps0: f64, r: f64, jacobian: f64) -> Result<f64> {
    check_neck(n, k, eps0, r)?;
    if !(delta_v >= -eps0 && delta_v <= eps0) {
        return Err(Error::InvalidArgument(format!("delta_v = {delta_v} outside [-{eps0}, {eps0}]")));
    }
    if !(jacobian > 0.0 && jacobian.is_finite()) {
        return Err(Error::InvalidArgument(format!("J = {jacobian} must be positive")));
    }
    Ok(jacobian * density_integral(-eps0, delta_v, k, n, r)?)
}

/// `g_i`: mean Jacobian factor over index-`i` points with `v_c <= v`;
/// `None` where no such point exists.
pub fn g_weights(catalog: &CriticalCatalog, v: f64) -> Result<Vec<Option<f64>>> {
    let n = catalog.dim();
    let mut sum = vec![0.0; n + 1];
    let mut count = vec![0usize; n + 1];
    for p in catalog.points_below(v) {
        sum[p.morse_index] += p.jacobian()?;
        count[p.morse_index] += 1;
    }
    Ok(sum.iter().zip(&count).map(|(&s, &c)| (c > 0).then(|| s / c as f64)).collect())
}

/// Pseudo-cylinder geometry shared by all points of a catalog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeckParams {
    #[serde(rename = "N")]
    pub n: usize,
    pub eps0: f64,
    pub r: f64,
}

/// `A_k` for every index at fixed `(N, ε₀, r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodCoefficients {
    #[serde(flatten)]
    pub params: NeckParams,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
}

impl NeighborhoodCoefficients {
    pub fn new(n: usize, eps0: f64, r: f64) -> Result<Self> {
        let a = (0..=n).map(|k| coefficient_A(n, k, eps0, r)).collect::<Result<Vec<_>>>()?;
        Ok(NeighborhoodCoefficients { params: NeckParams { n, eps0, r }, a })
    }

    /// `B` for a single point of index `k`.
    #[allow(non_snake_case)]
    pub fn B(&self, k: usize, delta_v: f64, jacobian: f64) -> Result<f64> {
        let NeckParams { n, eps0, r } = self.params;
        coefficient_B(n, k, delta_v, eps0, r, jacobian)
    }
}

/// One row of a coefficient table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub k: usize,
    pub eps0: f64,
    pub r: f64,
    #[serde(rename = "A")]
    pub a: f64,
    /// `F(0, k, N)`; absent for edge indexes and `N <= 2`.
    #[serde(rename = "F0")]
    pub f0: Option<f64>,
}

pub fn coefficient_table(n: usize, eps0: f64, r: f64) -> Result<Vec<CoefficientRow>> {
    let coeffs = NeighborhoodCoefficients::new(n, eps0, r)?;
    Ok(coeffs
        .a
        .iter()
        .enumerate()
        .map(|(k, &a)| CoefficientRow {
            n,
            k,
            eps0,
            r,
            a,
            f0: (n > 2 && k > 0 && k < n).then(|| f_at_zero(n, r)),
        })
        .collect())
}

/// The topological part of `vol(M_v)`.
///
/// Every point whose band `(v_c − ε₀, v_c + ε₀)` lies below `v` contributes
/// its whole cylinder `A_k J`; summed, these give `Σ_i A_i g_i μ_i(M_{v−ε₀})`.
/// A point whose band contains `v` contributes the bridge `B(v − v_c)`.
/// The result is continuous in `v`, constant between bands, and zero below
/// the lowest band.
pub fn topological_term(catalog: &CriticalCatalog, coeffs: &NeighborhoodCoefficients, v: f64) -> Result<f64> {
    let NeckParams { n, eps0, .. } = coeffs.params;
    if n != catalog.dim() {
        return Err(Error::DimensionMismatch { expected: catalog.dim(), got: n });
    }
    let mut total = 0.0;
    for p in &catalog.points {
        let dv = v - p.value;
        if dv <= -eps0 {
            continue;
        }
        let j = p.jacobian()?;
        total += if dv >= eps0 { coeffs.a[p.morse_index] * j } else { coeffs.B(p.morse_index, dv, j)? };
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morse::{find_critical_points, SearchConfig};
    use crate::potential::{BuiltinKind, PotentialModel};
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn sphere_surfaces() {
        assert!((sphere_surface(1).unwrap() - 2.0).abs() < 1e-15);
        assert!(rel(sphere_surface(2).unwrap(), 2.0 * PI) < 1e-15);
        assert!(rel(sphere_surface(3).unwrap(), 4.0 * PI) < 1e-15);
        assert!(rel(sphere_surface(4).unwrap(), 2.0 * PI * PI) < 1e-15);
        assert!(rel(sphere_surface(5).unwrap(), 8.0 * PI * PI / 3.0) < 1e-15);
        assert!(sphere_surface(0).is_err());
    }

    #[test]
    fn alpha_beta_values() {
        assert_eq!(alpha_beta(0.0, 1.0), (1.0, 1.0));
        let (a, b) = alpha_beta(0.5, 1.0);
        assert!((a - 0.780_776_406_404_415_1).abs() < 1e-15);
        assert!((b - 1.131_713_924_277_869_4).abs() < 1e-15);
        let (a, b) = alpha_beta(-0.5, 1.0);
        assert!((a - 1.280_776_406_404_415_1).abs() < 1e-15);
        assert!((a * b * b - 1.0).abs() < 1e-15);
    }

    #[test]
    fn a_golden_values() {
        // Nested adaptive quadrature at 40 digits.
        assert!(rel(coefficient_A(4, 2, 0.1, 1.0).unwrap(), 1.925_395_017_095_757_0) < 1e-11);
        assert!(rel(coefficient_A(4, 3, 0.1, 1.0).unwrap(), 1.256_637_061_435_917_4) < 1e-11);
        assert!(rel(coefficient_A(2, 1, 0.2, 1.0).unwrap(), 1.598_625_495_716_018_2) < 1e-10);
    }

    #[test]
    fn a_symmetry_and_small_eps() {
        for n in 3..=8 {
            for k in 1..n {
                let a = coefficient_A(n, k, 0.2, 0.8).unwrap();
                let b = coefficient_A(n, n - k, 0.2, 0.8).unwrap();
                assert!(rel(a, b) < 1e-11, "n={n} k={k}");
                let eps = 1e-8;
                let small = coefficient_A(n, k, eps, 0.8).unwrap();
                let lead = eps * surf(k) * surf(n - k) * f_at_zero(n, 0.8);
                assert!(rel(small, lead) < 1e-3, "n={n} k={k} {small} {lead}");
            }
        }
    }

    #[test]
    fn edge_coefficients_are_balls() {
        let a = coefficient_A(3, 0, 0.25, 1.0).unwrap();
        assert!(rel(a, 4.0 / 3.0 * PI * 0.125) < 1e-14);
        assert_eq!(coefficient_A(3, 3, 0.25, 1.0).unwrap(), a);
    }

    #[test]
    fn b_boundaries_and_monotonicity() {
        let (n, k, e, r, j) = (5, 2, 0.15, 1.0, 1.7);
        assert_eq!(coefficient_B(n, k, -e, e, r, j).unwrap(), 0.0);
        let full = coefficient_B(n, k, e, e, r, j).unwrap();
        assert!(rel(full, j * coefficient_A(n, k, e, r).unwrap()) < 1e-13);
        let mut last = 0.0;
        for i in 0..=40 {
            let dv = -e + 2.0 * e * i as f64 / 40.0;
            let b = coefficient_B(n, k, dv, e, r, j).unwrap();
            assert!(b >= last);
            last = b;
        }
        assert!(coefficient_B(n, k, 1.1 * e, e, r, j).is_err());
    }

    #[test]
    fn g_weights_double_well() {
        let m = PotentialModel::builtin(BuiltinKind::UncoupledDoubleWell, 3).unwrap();
        let cat = find_critical_points(&m, 0.1, &SearchConfig::with_seed(5)).unwrap();
        let g = g_weights(&cat, 0.1).unwrap();
        assert!((g[0].unwrap() - 1.0).abs() < 1e-12);
        assert!((g[3].unwrap() - 2f64.powf(1.5)).abs() < 1e-12);
        let g = g_weights(&cat, -0.4).unwrap();
        assert!(g[0].is_some() && g[1].is_some() && g[2].is_none());
    }

    #[test]
    fn topological_term_staircase() {
        let m = PotentialModel::builtin(BuiltinKind::UncoupledDoubleWell, 2).unwrap();
        let cat = find_critical_points(&m, 0.5, &SearchConfig::with_seed(2)).unwrap();
        let eps0 = cat.epsilon0().unwrap();
        let coeffs = NeighborhoodCoefficients::new(2, eps0, 0.3).unwrap();
        assert_eq!(topological_term(&cat, &coeffs, -0.5 - eps0).unwrap(), 0.0);
        // Plateau above every band: Σ A_i g_i μ_i.
        let top = topological_term(&cat, &coeffs, 0.3).unwrap();
        let g = g_weights(&cat, 0.3).unwrap();
        let mu = cat.multiplicities_below(0.3).unwrap();
        let plateau: f64 = (0..=2).map(|i| coeffs.a[i] * g[i].unwrap() * mu[i] as f64).sum();
        assert!(rel(top, plateau) < 1e-13);
        // Continuity on a fine grid.
        let mut prev = topological_term(&cat, &coeffs, -0.6).unwrap();
        for i in 1..=400 {
            let v = -0.6 + 0.9 * i as f64 / 400.0;
            let t = topological_term(&cat, &coeffs, v).unwrap();
            assert!(t >= prev - 1e-12);
            assert!(t - prev < 0.2, "jump at v={v}");
            prev = t;
        }
    }
}
