use serde::{Deserialize, Serialize};

use super::{entropy_curve, fd_derivatives, uniform_grid};
use crate::error::{Error, Result};
use crate::measure::{EstimatorKind, SamplerConfig};
use crate::morse::{find_critical_points, SearchConfig};
use crate::potential::{Potential, PotentialModel};

/// Relative spread of the sup-norms below which a series counts as flat.
pub const FLAT_SPREAD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub sampler: SamplerConfig,
    pub estimator: EstimatorKind,
    /// Grid steps across the window.
    pub steps: usize,
    /// When set, each `N` gets a critical-point search so that grid points
    /// inside critical bands can be annotated.
    pub band_search: Option<SearchConfig>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig { sampler: SamplerConfig::default(), estimator: EstimatorKind::HitOrMiss, steps: 40, band_search: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    pub window: [f64; 2],
    pub step: f64,
    /// `sup_norms[j][k-1] = sup over the window of |dS[k]|` for `N_list[j]`.
    pub sup_norms: Vec<[f64; 4]>,
    /// Noise band of each sup-norm: 3 MC standard errors plus the stencil
    /// truncation estimate at the maximizing grid point.
    pub bands: Vec<[f64; 4]>,
    pub growth_flags: [bool; 4],
    /// Per `N`, which window grid points lie inside a critical band.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub in_band: Option<Vec<Vec<bool>>>,
}

/// Scans `N ↦ sup_window |d^k S/dv̄^k|` for `k = 1..=4`.
///
/// The grid is the window extended by four steps on each side, so every
/// window point carries all four derivatives and a truncation estimate.
pub fn scaling_scan<F>(family: F, n_list: &[usize], window: [f64; 2], config: &ScanConfig) -> Result<ScalingReport>
where
    F: Fn(usize) -> Result<PotentialModel>,
{
    if n_list.is_empty() {
        return Err(Error::InvalidArgument("empty N list".into()));
    }
    if !(window[1] > window[0]) {
        return Err(Error::InvalidArgument("window must be increasing".into()));
    }
    if config.steps < 2 {
        return Err(Error::GridTooCoarse("at least two steps across the window".into()));
    }
    let step = (window[1] - window[0]) / config.steps as f64;
    let pad = 4;
    let grid = uniform_grid(window[0] - pad as f64 * step, window[1] + pad as f64 * step, config.steps + 2 * pad);
    let inside = pad..=pad + config.steps;

    let mut sup_norms = Vec::new();
    let mut bands = Vec::new();
    let mut in_band = config.band_search.as_ref().map(|_| Vec::new());
    for &n in n_list {
        let model = family(n)?;
        if model.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: model.dim() });
        }
        let curve = entropy_curve(&model, &grid, config.estimator, &config.sampler)?;
        let mut sup = [0.0; 4];
        let mut band = [0.0; 4];
        for k in 1..=4 {
            let d = fd_derivatives(&curve, k)?;
            for i in inside.clone() {
                let (v, e, t) = d.at(i).ok_or_else(|| Error::GridTooCoarse("window point without stencil".into()))?;
                if v.abs() > sup[k - 1] {
                    sup[k - 1] = v.abs();
                    band[k - 1] = 3.0 * e + t.map_or(0.0, f64::abs);
                }
            }
        }
        sup_norms.push(sup);
        bands.push(band);
        if let (Some(search), Some(flags)) = (&config.band_search, in_band.as_mut()) {
            let nf = n as f64;
            let cat = find_critical_points(&model, nf * grid[grid.len() - 1] + 1.0, search)?;
            let eps0 = cat.epsilon0().unwrap_or(0.0);
            flags.push(
                inside
                    .clone()
                    .map(|i| {
                        let v = nf * grid[i];
                        cat.critical_values.iter().any(|c| (v - c).abs() < eps0)
                    })
                    .collect(),
            );
        }
    }
    let mut growth_flags = [false; 4];
    for (k, flag) in growth_flags.iter_mut().enumerate() {
        let series: Vec<(f64, f64)> = sup_norms.iter().zip(&bands).map(|(s, b)| (s[k], b[k])).collect();
        *flag = grows(&series);
    }
    Ok(ScalingReport { n_list: n_list.to_vec(), window, step, sup_norms, bands, growth_flags, in_band })
}

/// Every consecutive increase beats the combined noise bands.
fn grows(series: &[(f64, f64)]) -> bool {
    series.len() >= 2 && series.windows(2).all(|w| w[1].0 - w[0].0 > w[0].1.hypot(w[1].1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NoGrowth,
    GrowthDetected,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionVerdict {
    pub k: usize,
    pub verdict: Verdict,
    /// `(N, sup-norm, band)` for each scanned size.
    pub evidence: Vec<(usize, f64, f64)>,
}

/// Finite-N trend verdict for `k = 3` and `k = 4`.
///
/// `growth_detected` when the sup-norm rises beyond the noise at every step
/// in `N`; `no_growth` when all values lie within 10% of their mean plus the
/// largest band and the bands themselves are below half the mean;
/// `inconclusive` otherwise. No statement about `N → ∞` is made.
pub fn detect_transition(report: &ScalingReport) -> Vec<TransitionVerdict> {
    [3usize, 4]
        .iter()
        .map(|&k| {
            let evidence: Vec<(usize, f64, f64)> = report
                .n_list
                .iter()
                .zip(report.sup_norms.iter().zip(&report.bands))
                .map(|(&n, (s, b))| (n, s[k - 1], b[k - 1]))
                .collect();
            let series: Vec<(f64, f64)> = evidence.iter().map(|e| (e.1, e.2)).collect();
            let verdict = if grows(&series) {
                Verdict::GrowthDetected
            } else {
                let mean = series.iter().map(|s| s.0).sum::<f64>() / series.len() as f64;
                let max = series.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
                let min = series.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
                let band = series.iter().map(|s| s.1).fold(0.0, f64::max);
                if max - min <= FLAT_SPREAD * mean + band && band < 0.5 * mean {
                    Verdict::NoGrowth
                } else {
                    Verdict::Inconclusive
                }
            };
            TransitionVerdict { k, verdict, evidence }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::BuiltinKind;

    fn report(sups: &[f64], band: f64) -> ScalingReport {
        ScalingReport {
            n_list: (1..=sups.len()).map(|i| 4 * i).collect(),
            window: [0.5, 1.5],
            step: 0.05,
            sup_norms: sups.iter().map(|&s| [s; 4]).collect(),
            bands: sups.iter().map(|_| [band; 4]).collect(),
            growth_flags: [false; 4],
            in_band: None,
        }
    }

    #[test]
    fn harmonic_analytic_scan_is_flat() {
        let cfg = ScanConfig { estimator: EstimatorKind::Analytic, steps: 20, ..Default::default() };
        let r = scaling_scan(
            |n| Ok(PotentialModel::builtin(BuiltinKind::Harmonic, n)?.with_box(-6.0, 6.0)),
            &[4, 8, 16],
            [0.5, 1.5],
            &cfg,
        )
            .unwrap();
        for s in &r.sup_norms {
            assert!((s[0] - 1.0).abs() < 5e-3, "{s:?}");
        }
        assert_eq!(r.growth_flags, [false; 4]);
        assert!(detect_transition(&r).iter().all(|v| v.verdict == Verdict::NoGrowth));
    }

    #[test]
    fn planted_growth() {
        let r = report(&[1.0, 2.0, 3.0, 4.0], 0.1);
        assert!(detect_transition(&r).iter().all(|v| v.verdict == Verdict::GrowthDetected));
    }

    #[test]
    fn overlapping_bands_are_inconclusive() {
        let r = report(&[1.0, 1.5, 1.2], 2.0);
        assert!(detect_transition(&r).iter().all(|v| v.verdict == Verdict::Inconclusive));
    }
}
