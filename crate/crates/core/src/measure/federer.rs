use serde::{Deserialize, Serialize};

use super::{draw, SamplerConfig};
use crate::error::{Error, Result};
use crate::potential::{Potential, PotentialModel};
use crate::rng::{map_blocks, substream, NS_SAMPLES};

/// `∇·(∇V/‖∇V‖²) = ΔV/‖∇V‖² − 2 ∇Vᵀ Hess ∇V / ‖∇V‖⁴`.
///
/// Its average over `M_v` is `Ω(v)/M(v) = d log M / dv` by the divergence
/// theorem, as long as the critical points inside contribute no flux.
pub fn federer_integrand(model: &PotentialModel, q: &[f64], grad_floor: f64) -> Result<f64> {
    let n = model.dim();
    if q.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: q.len() });
    }
    let mut g = vec![0.0; n];
    model.gradient(q, &mut g);
    let g2: f64 = g.iter().map(|x| x * x).sum();
    let norm = g2.sqrt();
    if !(norm >= grad_floor) {
        return Err(Error::NearCritical { norm, floor: grad_floor });
    }
    let h = model.hessian(q);
    let lap = h.trace();
    let mut ghg = 0.0;
    for i in 0..n {
        let row: f64 = (0..n).map(|j| h[(i, j)] * g[j]).sum();
        ghg += g[i] * row;
    }
    let out = lap / g2 - 2.0 * ghg / (g2 * g2);
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::NonFinite { what: "Federer integrand" })
    }
}

/// Microcanonical average of the Federer integrand over `M_v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_accepted: u64,
    /// Sub-level samples within `grad_floor` of a critical point.
    pub n_rejected: u64,
    pub rejected_fraction: f64,
    #[serde(rename = "n")]
    pub n_samples: u64,
    pub seed: u64,
}

pub fn estimate_beta(model: &PotentialModel, v: f64, config: &SamplerConfig) -> Result<BetaEstimate> {
    config.validate()?;
    let bounds = &model.domain().bounds;
    let n = model.dim();
    let floor = config.grad_floor;
    let parts = map_blocks(config.n_samples, config.workers, |block, len| {
        let mut rng = substream(config.seed, NS_SAMPLES + block);
        let mut q = vec![0.0; n];
        let (mut acc, mut rej, mut sum, mut sum2) = (0u64, 0u64, 0.0f64, 0.0f64);
        for _ in 0..len {
            draw(&mut rng, bounds, &mut q);
            if model.value(&q) > v {
                continue;
            }
            match federer_integrand(model, &q, floor) {
                Ok(x) => {
                    acc += 1;
                    sum += x;
                    sum2 += x * x;
                }
                Err(_) => rej += 1,
            }
        }
        (acc, rej, sum, sum2)
    });
    let (acc, rej, sum, sum2) =
        parts.into_iter().fold((0, 0, 0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2, a.3 + b.3));
    if acc < 2 {
        return Err(Error::ZeroVolume { v });
    }
    let k = acc as f64;
    let mean = sum / k;
    let var = (sum2 / k - mean * mean).max(0.0) * k / (k - 1.0);
    Ok(BetaEstimate {
        mean,
        stderr: (var / k).sqrt(),
        n_accepted: acc,
        n_rejected: rej,
        rejected_fraction: rej as f64 / (acc + rej) as f64,
        n_samples: config.n_samples,
        seed: config.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::BuiltinKind;

    #[test]
    fn harmonic_closed_form() {
        let m = PotentialModel::builtin(BuiltinKind::Harmonic, 4).unwrap();
        let x = federer_integrand(&m, &[0.5, 0.5, 0.5, 0.5], 1e-8).unwrap();
        assert!((x - 1.0).abs() < 1e-14);
        let m = PotentialModel::builtin(BuiltinKind::Harmonic, 3).unwrap();
        let x = federer_integrand(&m, &[1.0, 1.0, 0.0], 1e-8).unwrap();
        assert!((x - 0.25).abs() < 1e-14);
    }

    #[test]
    fn near_critical_rejected() {
        let m = PotentialModel::builtin(BuiltinKind::UncoupledDoubleWell, 2).unwrap();
        assert!(matches!(federer_integrand(&m, &[1.0, 0.0], 1e-8), Err(Error::NearCritical { .. })));
    }

    #[test]
    fn matches_finite_difference_divergence() {
        let m = PotentialModel::from_dsl("q[0]^4/4 - q[0]^2/2 + 0.3*q[0]*q[1] + q[1]^2 + sin(q[2])", 3).unwrap();
        let q = [0.4, -0.7, 0.9];
        let field = |p: &[f64]| {
            let mut g = vec![0.0; 3];
            m.gradient(p, &mut g);
            let g2: f64 = g.iter().map(|x| x * x).sum();
            g.iter().map(|x| x / g2).collect::<Vec<_>>()
        };
        let h = 1e-5;
        let mut div = 0.0;
        for i in 0..3 {
            let (mut a, mut b) = (q.to_vec(), q.to_vec());
            a[i] += h;
            b[i] -= h;
            div += (field(&a)[i] - field(&b)[i]) / (2.0 * h);
        }
        let exact = federer_integrand(&m, &q, 1e-8).unwrap();
        assert!((div - exact).abs() < 1e-5 * exact.abs().max(1.0), "{div} vs {exact}");
    }

    #[test]
    fn beta_harmonic() {
        let m = PotentialModel::builtin(BuiltinKind::Harmonic, 8).unwrap().with_box(-1.5, 1.5);
        let b = estimate_beta(&m, 2.0, &SamplerConfig::new(2_000_000, 2)).unwrap();
        assert!((b.mean - 2.0).abs() < 3.0 * b.stderr, "{b:?}");
    }
}
