//! Configurational entropy `S(v̄) = (1/N) log M(N v̄)` and its derivatives.

mod scaling;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{analytic_volume, sublevel_sweep, EstimatorKind, SamplerConfig};
use crate::potential::{Potential, PotentialModel};

pub use scaling::{detect_transition, scaling_scan, ScalingReport, ScanConfig, TransitionVerdict, Verdict};

/// Largest relative volume error for which `log M` is taken.
pub const MAX_REL_ERR: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyCurve {
    #[serde(rename = "N")]
    pub n: usize,
    pub vbar: Vec<f64>,
    #[serde(rename = "S")]
    pub s: Vec<f64>,
    pub stderr_s: Vec<f64>,
    /// Hit fractions of the shared sample set; empty for analytic curves.
    pub p: Vec<f64>,
    pub n_samples: u64,
    pub seed: u64,
    pub estimator: EstimatorKind,
}

impl EntropyCurve {
    /// `Cov(S_a, S_b)` from the nested hit-or-miss sets.
    pub fn cov(&self, a: usize, b: usize) -> f64 {
        if self.p.is_empty() {
            return 0.0;
        }
        let (pa, pb) = (self.p[a], self.p[b]);
        let c = pa.min(pb) * (1.0 - pa.max(pb)) / self.n_samples as f64;
        c / (pa * pb) / (self.n * self.n) as f64
    }

    /// Uniform grid step, or an error if the grid is not uniform.
    pub fn step(&self) -> Result<f64> {
        if self.vbar.len() < 2 {
            return Err(Error::GridTooCoarse("need at least two grid points".into()));
        }
        let d = self.vbar[1] - self.vbar[0];
        for w in self.vbar.windows(2) {
            if !((w[1] - w[0] - d).abs() <= 1e-9 * d.abs().max(1e-300)) {
                return Err(Error::InvalidArgument("v̄ grid must be uniform".into()));
            }
        }
        Ok(d)
    }
}

/// `S` on a v̄ grid.
///
/// The hit-or-miss estimator evaluates every grid point on one sample set,
/// so the curve is monotone and neighbouring values share their noise. The
/// analytic estimator is exact for the harmonic model.
pub fn entropy_curve(
    model: &PotentialModel,
    vbar_grid: &[f64],
    estimator: EstimatorKind,
    config: &SamplerConfig,
) -> Result<EntropyCurve> {
    if vbar_grid.is_empty() {
        return Err(Error::InvalidArgument("empty v̄ grid".into()));
    }
    if vbar_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("v̄ grid must be strictly increasing".into()));
    }
    let n = model.dim();
    let nf = n as f64;
    let vs: Vec<f64> = vbar_grid.iter().map(|x| x * nf).collect();
    let mut curve = EntropyCurve {
        n,
        vbar: vbar_grid.to_vec(),
        s: Vec::with_capacity(vs.len()),
        stderr_s: Vec::with_capacity(vs.len()),
        p: Vec::new(),
        n_samples: 0,
        seed: config.seed,
        estimator,
    };
    match estimator {
        EstimatorKind::Analytic => {
            for &v in &vs {
                let m = analytic_volume(model, v)?.mean;
                if m <= 0.0 {
                    return Err(Error::ZeroVolume { v });
                }
                curve.s.push(m.ln() / nf);
                curve.stderr_s.push(0.0);
            }
        }
        EstimatorKind::HitOrMiss => {
            let sweep = sublevel_sweep(model, &vs, config)?;
            sweep.check_boundary()?;
            curve.n_samples = sweep.n_samples;
            for (i, &v) in vs.iter().enumerate() {
                let est = sweep.estimate(i);
                if sweep.hits[i] == 0 {
                    return Err(Error::ZeroVolume { v });
                }
                let rel = est.rel_err();
                if rel > MAX_REL_ERR {
                    return Err(Error::NoisyEstimate { v, rel });
                }
                curve.s.push(est.mean.ln() / nf);
                curve.stderr_s.push(rel / nf);
                curve.p.push(sweep.p(i));
            }
        }
        EstimatorKind::ThinShell => {
            return Err(Error::InvalidArgument("entropy curves use hit_or_miss or analytic volumes".into()))
        }
    }
    Ok(curve)
}

/// Central stencil for the `k`-th derivative: `(half-width, weights)`,
/// weights to be divided by `step^k`.
pub fn stencil(k: usize) -> Result<(usize, &'static [f64])> {
    Ok(match k {
        1 => (1, &[-0.5, 0.0, 0.5]),
        2 => (1, &[1.0, -2.0, 1.0]),
        3 => (2, &[-0.5, 1.0, 0.0, -1.0, 0.5]),
        4 => (2, &[1.0, -4.0, 6.0, -4.0, 1.0]),
        _ => return Err(Error::InvalidArgument(format!("derivative order {k} not in 1..=4"))),
    })
}

/// `d^k S / dv̄^k` at the interior points of a curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derivative {
    pub k: usize,
    /// Grid index of each value.
    pub index: Vec<usize>,
    pub vbar: Vec<f64>,
    pub value: Vec<f64>,
    /// Propagated Monte Carlo error.
    pub stderr: Vec<f64>,
    /// `(D(2Δ) − D(Δ))/3`, the leading stencil error, where the doubled
    /// stencil fits on the grid.
    pub truncation: Vec<Option<f64>>,
}

impl Derivative {
    /// Value at grid index `i`, if computed.
    pub fn at(&self, i: usize) -> Option<(f64, f64, Option<f64>)> {
        self.index.iter().position(|&j| j == i).map(|p| (self.value[p], self.stderr[p], self.truncation[p]))
    }
}

fn apply(curve: &EntropyCurve, k: usize, i: usize, stride: usize, h: f64) -> Result<(f64, f64)> {
    let (w, weights) = stencil(k)?;
    let scale = (h * stride as f64).powi(k as i32);
    let idx: Vec<usize> = (0..weights.len()).map(|j| i + j * stride - w * stride).collect();
    let value: f64 = weights.iter().zip(&idx).map(|(c, &j)| c * curve.s[j]).sum::<f64>() / scale;
    let mut var = 0.0;
    for (ca, &a) in weights.iter().zip(&idx) {
        for (cb, &b) in weights.iter().zip(&idx) {
            var += ca * cb * curve.cov(a, b);
        }
    }
    Ok((value, var.max(0.0).sqrt() / scale))
}

/// Finite-difference derivative of order `k` (3-point stencils for `k <= 2`,
/// 5-point for `k = 3, 4`) with the grid step as difference step.
///
/// Errors with `GridTooCoarse` when the grid cannot host the doubled-step
/// stencil anywhere, since the truncation estimate would be missing.
pub fn fd_derivatives(curve: &EntropyCurve, k: usize) -> Result<Derivative> {
    let (w, _) = stencil(k)?;
    let h = curve.step()?;
    let len = curve.s.len();
    if len < 4 * w + 1 {
        return Err(Error::GridTooCoarse(format!(
            "order {k} needs at least {} grid points, got {len}",
            4 * w + 1
        )));
    }
    let mut out = Derivative {
        k,
        index: Vec::new(),
        vbar: Vec::new(),
        value: Vec::new(),
        stderr: Vec::new(),
        truncation: Vec::new(),
    };
    for i in w..len - w {
        let (value, err) = apply(curve, k, i, 1, h)?;
        let trunc = if i >= 2 * w && i + 2 * w < len {
            let (coarse, _) = apply(curve, k, i, 2, h)?;
            Some((coarse - value) / 3.0)
        } else {
            None
        };
        out.index.push(i);
        out.vbar.push(curve.vbar[i]);
        out.value.push(value);
        out.stderr.push(err);
        out.truncation.push(trunc);
    }
    Ok(out)
}

/// CSV rows `vbar,S,stderr_S,dS1,dS2,dS3,dS4,in_band`; derivative cells
/// are empty where the stencil does not fit.
pub fn curve_csv(curve: &EntropyCurve, in_band: Option<&[bool]>) -> String {
    let derivs: Vec<Option<Derivative>> = (1..=4).map(|k| fd_derivatives(curve, k).ok()).collect();
    let mut out = String::from("vbar,S,stderr_S,dS1,dS2,dS3,dS4,in_band\n");
    for i in 0..curve.vbar.len() {
        out.push_str(&format!("{:?},{:?},{:?}", curve.vbar[i], curve.s[i], curve.stderr_s[i]));
        for d in &derivs {
            match d.as_ref().and_then(|d| d.at(i)) {
                Some((v, _, _)) => out.push_str(&format!(",{v:?}")),
                None => out.push(','),
            }
        }
        let band = in_band.and_then(|b| b.get(i)).copied().unwrap_or(false);
        out.push_str(if band { ",1\n" } else { ",0\n" });
    }
    out
}

/// Uniform grid of `steps + 1` points on `[a, b]`.
pub fn uniform_grid(a: f64, b: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| if i == steps { b } else { a + (b - a) * i as f64 / steps as f64 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::BuiltinKind;

    fn harmonic(n: usize) -> PotentialModel {
        PotentialModel::builtin(BuiltinKind::Harmonic, n).unwrap()
    }

    #[test]
    fn harmonic_entropy_values() {
        let m = harmonic(2);
        let c = entropy_curve(&m, &[0.5], EstimatorKind::HitOrMiss, &SamplerConfig::new(1_000_000, 1)).unwrap();
        let exact = 0.5 * std::f64::consts::PI.ln();
        assert!((c.s[0] - exact).abs() < 3.0 * c.stderr_s[0]);
        let c = entropy_curve(&harmonic(4), &[0.25], EstimatorKind::Analytic, &SamplerConfig::default()).unwrap();
        assert!((c.s[0] - 0.25 * (std::f64::consts::PI.powi(2) / 2.0).ln()).abs() < 1e-14);
    }

    #[test]
    fn analytic_derivatives() {
        let m = harmonic(8).with_box(-4.0, 4.0);
        let grid = uniform_grid(0.6, 1.4, 16);
        let c = entropy_curve(&m, &grid, EstimatorKind::Analytic, &SamplerConfig::default()).unwrap();
        let exact = [0.5, -0.5, 1.0, -3.0];
        for k in 1..=4 {
            let d = fd_derivatives(&c, k).unwrap();
            let (v, e, t) = d.at(8).unwrap();
            assert_eq!(e, 0.0);
            let t = t.unwrap();
            assert!((v - exact[k - 1]).abs() < 2.0 * t.abs() + 1e-6, "k={k}: {v} trunc {t}");
        }
    }

    #[test]
    fn errors() {
        let m = harmonic(2);
        let cfg = SamplerConfig::new(1000, 1);
        assert!(matches!(
            entropy_curve(&m, &[-0.1], EstimatorKind::HitOrMiss, &cfg),
            Err(Error::ZeroVolume { .. })
        ));
        assert!(matches!(
            entropy_curve(&m, &[1e-4], EstimatorKind::HitOrMiss, &cfg),
            Err(Error::ZeroVolume { .. } | Error::NoisyEstimate { .. })
        ));
        let c = entropy_curve(&m, &uniform_grid(0.5, 1.0, 5), EstimatorKind::Analytic, &cfg).unwrap();
        assert!(fd_derivatives(&c, 1).is_ok());
        assert!(matches!(fd_derivatives(&c, 3), Err(Error::GridTooCoarse(_))));
    }

    #[test]
    fn csv_layout() {
        let m = harmonic(2);
        let c = entropy_curve(&m, &uniform_grid(0.5, 1.0, 10), EstimatorKind::Analytic, &SamplerConfig::default())
            .unwrap();
        let csv = curve_csv(&c, None);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 12);
        assert_eq!(lines[1].split(',').count(), 8);
        assert!(lines[1].ends_with(",,,,,0"));
    }
}
