//! The quadric slice integral
//!
//! ```text
//! F(ξ, k, N) = ∫ y^{N−k−1} (y² − ξ)^{(k−2)/2} dy
//! ```
//!
//! over `[√ξ, β]` when `ξ > 0` (`F₊`) and over `[0, β]` when `ξ <= 0`
//! (`F₋`). Three evaluation paths are provided: adaptive quadrature,
//! closed forms built from recursions in the power of `y`, and the
//! double recursion in the half-integer exponent used for `F₊` at odd `k`.

use super::alpha_beta;
use crate::error::{Error, Result};
use crate::quad::{integrate_with, QuadSettings};

pub(crate) const F_QUAD: QuadSettings = QuadSettings { abs_tol: 1e-14, rel_tol: 1e-13, max_intervals: 4000 };

fn check_generic(k: usize, n: usize) -> Result<()> {
    if n <= 2 {
        return Err(Error::DimensionTooSmall(n));
    }
    if k == 0 || k >= n {
        return Err(Error::EdgeIndex { k, dim: n });
    }
    Ok(())
}

fn check_xi_r(xi: f64, r: f64) -> Result<()> {
    if !xi.is_finite() {
        return Err(Error::NonFinite { what: "xi" });
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("r = {r} must be positive")));
    }
    Ok(())
}

/// `F(0, k, N) = r^{(N−2)/2} / (N − 2)`, the common limit of `F₊` and `F₋`.
pub fn f_at_zero(n: usize, r: f64) -> f64 {
    r.powf(0.5 * (n as f64 - 2.0)) / (n as f64 - 2.0)
}

/// `F` by adaptive quadrature.
///
/// For `ξ > 0` the substitution `y = √(ξ + t²)` turns the integrand into
/// `(ξ + t²)^{(N−k−2)/2} t^{k−1}` on `[0, √α]`, which removes the
/// endpoint singularity at `y = √ξ` for `k = 1`.
#[allow(non_snake_case)]
pub fn eval_F(xi: f64, k: usize, n: usize, r: f64) -> Result<f64> {
    check_generic(k, n)?;
    check_xi_r(xi, r)?;
    f_quadrature(xi, k, n, r)
}

pub(crate) fn f_quadrature(xi: f64, k: usize, n: usize, r: f64) -> Result<f64> {
    if xi == 0.0 {
        return Ok(f_at_zero(n, r));
    }
    let (alpha, beta) = alpha_beta(xi, r);
    let p = (n - k - 1) as f64;
    let res = if xi > 0.0 {
        let e = 0.5 * (n as f64 - k as f64 - 2.0);
        let km1 = k as i32 - 1;
        integrate_with(|t| (xi + t * t).powf(e) * t.powi(km1), 0.0, alpha.sqrt(), F_QUAD)?
    } else {
        let e = 0.5 * (k as f64 - 2.0);
        integrate_with(|y| y.powf(p) * (y * y - xi).powf(e), 0.0, beta, F_QUAD)?
    };
    Ok(res.value)
}

/// `F` through the recursion in the power of `y`, for odd `k`.
///
/// Integrating `y^{p−1} · y (y²−ξ)^{(k−2)/2}` by parts gives, with
/// `p = N − k − 1`,
///
/// ```text
/// I_p = β^{p−1} α^{k/2} / (p + k − 1) + (p − 1) ξ / (p + k − 1) · I_{p−2}
/// ```
///
/// (the lower-limit terms vanish for `p >= 2`). The chain bottoms out at
/// `N = k + 2` (`p = 1`, elementary) or at `N = k + 1` (`p = 0`), where the
/// half-integer power of `y² − ξ` is reduced by the double recursion for
/// `F₊` and by power reduction for `F₋`, down to the logarithmic integral of
/// `(y² − ξ)^{−1/2}`.
#[allow(non_snake_case)]
pub fn eval_F_recursive(xi: f64, k: usize, n: usize, r: f64) -> Result<f64> {
    check_generic(k, n)?;
    check_xi_r(xi, r)?;
    if k % 2 == 0 {
        return Err(Error::InvalidArgument(format!("the recursive path needs odd k, got {k}")));
    }
    Ok(f_closed(xi, k, n, r))
}

/// `F` from closed forms for any `1 <= k <= N−1`; even `k` has an
/// integer exponent and an elementary antiderivative.
#[allow(non_snake_case)]
pub fn eval_F_closed(xi: f64, k: usize, n: usize, r: f64) -> Result<f64> {
    check_generic(k, n)?;
    check_xi_r(xi, r)?;
    Ok(f_closed(xi, k, n, r))
}

/// Closed-form `F` without argument checks; also valid for `N = 2`, `k = 1`
/// away from `ξ = 0`, where `F` has a logarithmic singularity.
pub(crate) fn f_closed(xi: f64, k: usize, n: usize, r: f64) -> f64 {
    if xi == 0.0 {
        return if n > 2 { f_at_zero(n, r) } else { f64::INFINITY };
    }
    let (alpha, beta) = alpha_beta(xi, r);
    let half_k = 0.5 * k as f64;
    let a_k2 = alpha.powf(half_k);
    let p_top = n - k - 1;

    let mut acc = if p_top % 2 == 1 {
        // ∫ y (y²−ξ)^{k/2−1} dy = [(y²−ξ)^{k/2}] / k
        if xi > 0.0 {
            a_k2 / k as f64
        } else {
            // α^{k/2} − (−ξ)^{k/2} with α = β² + |ξ|, without cancellation
            let b = -xi;
            b.powf(half_k) * (half_k * (beta * beta / b).ln_1p()).exp_m1() / k as f64
        }
    } else {
        zeroth_power(xi, k, alpha, beta)
    };
    let mut p = 2 + p_top % 2;
    while p <= p_top {
        let d = (p + k - 1) as f64;
        acc = beta.powi(p as i32 - 1) * a_k2 / d + (p as f64 - 1.0) * xi / d * acc;
        p += 2;
    }
    acc
}

/// `∫ (y² − ξ)^{(k−2)/2} dy` over the `F` range.
fn zeroth_power(xi: f64, k: usize, alpha: f64, beta: f64) -> f64 {
    let sa = alpha.sqrt();
    if k % 2 == 0 {
        // Integer exponent m: power reduction from ∫ dy = β − lo.
        let lo = if xi > 0.0 { xi.sqrt() } else { 0.0 };
        let mut acc = beta - lo;
        for m in 1..=(k - 2) / 2 {
            let m = m as f64;
            acc = beta * alpha.powf(m) / (2.0 * m + 1.0) - 2.0 * m * xi / (2.0 * m + 1.0) * acc;
        }
        return acc;
    }
    if xi > 0.0 {
        let log_base = log_ratio(beta, sa, xi);
        if k == 1 {
            return log_base;
        }
        double_recursion_plus(xi, (k - 3) / 2, alpha, beta, log_base)
    } else {
        // ∫_0^β (y² − ξ)^{−1/2} dy = asinh(β/√−ξ), then raise the exponent.
        let mut acc = log_ratio(beta, sa, xi);
        let mut m = 0.5;
        while m <= 0.5 * (k as f64 - 2.0) + 1e-9 {
            acc = beta * alpha.powf(m) / (2.0 * m + 1.0) - 2.0 * m * xi / (2.0 * m + 1.0) * acc;
            m += 1.0;
        }
        acc
    }
}

/// `ln(β + √α) − ln √|ξ|`, i.e. `acosh(β/√ξ)` or `asinh(β/√−ξ)`.
fn log_ratio(beta: f64, sa: f64, xi: f64) -> f64 {
    ((beta + sa) / xi.abs().sqrt()).ln()
}

/// `P(n) = ∫_{√ξ}^β (y² − ξ)^{n+1/2} dy` for `ξ > 0`, `n >= 0`.
///
/// With `I(n) = ∫ (y²−ξ)^{n+1/2} / y²` and `H(n) = ∫ (y²−ξ)^{n+1/2} / y⁴`,
///
/// ```text
/// P(n) = α^{n+3/2} / (2(n+1) β) − ξ I(n) / (2(n+1))
/// I(n) = [α^{n+3/2} / β³ − 3 ξ H(n)] / (2n)          n >= 1
/// H(n) = I(n−1) − ξ H(n−1)
/// ```
///
/// started from `I(0) = ln((β+√α)/√ξ) − √α/β` and
/// `ξ H(0) = α^{3/2} / (3 β³)`. Only the products `ξ H(n)` are carried,
/// so the `1/ξ` in `H` never appears.
fn double_recursion_plus(xi: f64, n: usize, alpha: f64, beta: f64, log_base: f64) -> f64 {
    let sa = alpha.sqrt();
    let b3 = beta * beta * beta;
    let mut i_n = log_base - sa / beta;
    let mut xh = alpha * sa / (3.0 * b3);
    for j in 1..=n {
        xh = xi * i_n - xi * xh;
        i_n = (alpha.powf(j as f64 + 1.5) / b3 - 3.0 * xh) / (2.0 * j as f64);
    }
    let c = 2.0 * (n as f64 + 1.0);
    alpha.powf(n as f64 + 1.5) / (c * beta) - xi * i_n / c
}

/// Slice density at an edge index: `½ Surf(N) ξ^{(N−2)/2}` for a minimum
/// (`k = 0`, `ξ > 0`), its mirror `ξ → −ξ` for a maximum (`k = N`).
#[allow(non_snake_case)]
pub fn eval_F_edge(xi: f64, k: usize, n: usize, _r: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::DimensionTooSmall(n));
    }
    if !xi.is_finite() {
        return Err(Error::NonFinite { what: "xi" });
    }
    let s = match k {
        0 => xi,
        k if k == n => -xi,
        _ => return Err(Error::InvalidArgument(format!("k = {k} is not an edge index for N = {n}"))),
    };
    if s <= 0.0 {
        return Ok(0.0);
    }
    Ok(0.5 * super::surf(n) * s.powf(0.5 * (n as f64 - 2.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn zero_closed_form() {
        assert!((eval_F(0.0, 3, 6, 1.0).unwrap() - 0.25).abs() < 1e-15);
        for n in 3..=12 {
            for k in 1..n {
                let f0 = f_at_zero(n, 1.3);
                assert!(rel(f_quadrature(1e-12, k, n, 1.3).unwrap(), f0) < 1e-5, "k={k} n={n}");
                assert!(rel(f_quadrature(-1e-12, k, n, 1.3).unwrap(), f0) < 1e-5, "k={k} n={n}");
            }
        }
    }

    #[test]
    fn even_k_elementary() {
        let (alpha, _) = alpha_beta(0.5, 1.0);
        let q = eval_F(0.5, 2, 4, 1.0).unwrap();
        assert!(rel(q, alpha / 2.0) < 1e-13);
        assert!(rel(eval_F_closed(0.5, 2, 4, 1.0).unwrap(), alpha / 2.0) < 1e-14);
    }

    #[test]
    fn paths_agree() {
        for n in 3..=14 {
            for k in 1..n {
                for &xi in &[0.5, 0.1, 0.01, -0.01, -0.1, -0.5, 1.7, -2.3] {
                    let q = f_quadrature(xi, k, n, 1.0).unwrap();
                    let c = f_closed(xi, k, n, 1.0);
                    assert!(rel(c, q) < 1e-10, "k={k} n={n} xi={xi}: {c} vs {q}");
                }
            }
        }
    }

    #[test]
    fn n_two_log_forms() {
        // N = 2, k = 1: F₊ = acosh(β/√ξ), F₋ = asinh(β/√−ξ)
        for &xi in &[0.3, -0.3, 1e-4, -1e-4] {
            let (_, beta) = alpha_beta(xi, 0.7);
            let expect = if xi > 0.0 { (beta / xi.sqrt()).acosh() } else { (beta / (-xi).sqrt()).asinh() };
            assert!(rel(f_closed(xi, 1, 2, 0.7), expect) < 1e-13);
            assert!(rel(f_quadrature(xi, 1, 2, 0.7).unwrap(), expect) < 1e-10);
        }
    }

    #[test]
    fn golden_k1_n4_negative() {
        // Independent high-precision evaluation of ∫_0^β y²/√(y²+½) dy, r = 1.
        let q = eval_F(-0.5, 1, 4, 1.0).unwrap();
        assert!(rel(q, 0.238_160_931_592_362_34) < 1e-12, "{q}");
    }

    #[test]
    fn argument_errors() {
        assert!(matches!(eval_F(0.1, 0, 4, 1.0), Err(Error::EdgeIndex { .. })));
        assert!(matches!(eval_F(0.1, 4, 4, 1.0), Err(Error::EdgeIndex { .. })));
        assert!(matches!(eval_F(0.1, 1, 2, 1.0), Err(Error::DimensionTooSmall(2))));
        assert!(eval_F_recursive(0.1, 2, 5, 1.0).is_err());
        assert!(eval_F(0.1, 1, 4, 0.0).is_err());
    }

    #[test]
    fn edge_values() {
        let v = eval_F_edge(0.25, 0, 4, 1.0).unwrap();
        assert!(rel(v, 0.5 * 2.0 * std::f64::consts::PI.powi(2) * 0.25) < 1e-14);
        assert_eq!(eval_F_edge(-0.25, 0, 4, 1.0).unwrap(), 0.0);
        assert_eq!(eval_F_edge(-0.25, 4, 4, 1.0).unwrap(), v);
        assert!(eval_F_edge(0.1, 2, 4, 1.0).is_err());
    }
}
