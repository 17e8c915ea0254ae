//! Volume, structure-integral and microcanonical-average estimators.
//!
//! All Monte Carlo estimators draw uniform points from the model's domain
//! box through [`crate::rng`], so a result depends on `(seed, n_samples)`
//! and never on the number of workers. Sub-level sets are
//! `M_v = {q : V(q) <= v}`.

mod cylinder;
mod federer;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{BuiltinKind, Potential, PotentialModel};
use crate::rng::{map_blocks, substream, NS_PILOT, NS_SAMPLES};

pub use cylinder::{
    estimate_excised_volume, estimate_pseudocylinder_volume, excision_pass, Cylinder, ExcisionCounts, MorseChart,
};
pub use federer::{estimate_beta, federer_integrand, BetaEstimate};

/// Faces of the box are "touched" when a sub-level hit lies this close
/// (relative to the box width) to a non-periodic face.
pub const BOUNDARY_SHELL: f64 = 1e-3;

/// Fewer shell hits than this make the thin-shell difference meaningless.
pub const MIN_SHELL_HITS: u64 = 16;

const PILOT_SAMPLES: u64 = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    HitOrMiss,
    ThinShell,
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub mean: f64,
    pub stderr: f64,
    #[serde(rename = "n")]
    pub n_samples: u64,
    pub seed: u64,
    #[serde(rename = "estimator")]
    pub estimator_kind: EstimatorKind,
    /// Shell half-width of a thin-shell estimate.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub h: Option<f64>,
    /// Thin-shell estimate at `h/2` from the same samples.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub half_h_mean: Option<f64>,
}

impl VolumeEstimate {
    fn zero(n: u64, seed: u64, kind: EstimatorKind) -> Self {
        VolumeEstimate { mean: 0.0, stderr: 0.0, n_samples: n, seed, estimator_kind: kind, h: None, half_h_mean: None }
    }

    pub fn rel_err(&self) -> f64 {
        self.stderr / self.mean
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_samples: u64,
    pub seed: u64,
    /// Worker threads, 0 for the global pool.
    pub workers: usize,
    /// Thin-shell half-width; `None` picks `1e-2 · (v − v_min)`.
    pub shell_halfwidth: Option<f64>,
    /// Gradient norm below which the Federer integrand is not evaluated.
    pub grad_floor: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { n_samples: 1_000_000, seed: 0, workers: 0, shell_halfwidth: None, grad_floor: 1e-8 }
    }
}

impl SamplerConfig {
    pub fn new(n_samples: u64, seed: u64) -> Self {
        SamplerConfig { n_samples, seed, ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidArgument("n_samples must be >= 1".into()));
        }
        Ok(())
    }
}

/// Fills `q` with a uniform point of the box `[lo_i, hi_i]`.
#[inline]
pub(crate) fn draw(rng: &mut impl Rng, bounds: &[(f64, f64)], q: &mut [f64]) {
    for (x, (lo, hi)) in q.iter_mut().zip(bounds) {
        *x = lo + (hi - lo) * rng.gen::<f64>();
    }
}

/// Whether `q` lies in the thin shell along a non-periodic face.
#[inline]
pub(crate) fn near_face(bounds: &[(f64, f64)], q: &[f64]) -> bool {
    q.iter().zip(bounds).any(|(x, (lo, hi))| {
        let w = BOUNDARY_SHELL * (hi - lo);
        x - lo < w || hi - x < w
    })
}

/// Hit counts of nested sub-level sets from one set of samples.
///
/// `hits[i]` counts samples with `V <= thresholds[i]`; since every threshold
/// sees the same points, `v_i < v_j` implies `hits[i] <= hits[j]` exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SublevelSweep {
    pub thresholds: Vec<f64>,
    pub hits: Vec<u64>,
    pub boundary_hits: Vec<u64>,
    pub n_samples: u64,
    pub box_volume: f64,
    pub seed: u64,
}

impl SublevelSweep {
    pub fn p(&self, i: usize) -> f64 {
        self.hits[i] as f64 / self.n_samples as f64
    }

    /// `Cov(p_i, p_j) = p_lo (1 − p_hi) / n` for nested indicator sets.
    pub fn cov(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.p(i), self.p(j));
        a.min(b) * (1.0 - a.max(b)) / self.n_samples as f64
    }

    pub fn estimate(&self, i: usize) -> VolumeEstimate {
        let p = self.p(i);
        VolumeEstimate {
            mean: self.box_volume * p,
            stderr: self.box_volume * (p * (1.0 - p) / self.n_samples as f64).sqrt(),
            n_samples: self.n_samples,
            seed: self.seed,
            estimator_kind: EstimatorKind::HitOrMiss,
            h: None,
            half_h_mean: None,
        }
    }

    /// Errors with `BoxTooSmall` if any threshold's set reaches a face.
    pub fn check_boundary(&self) -> Result<()> {
        match self.boundary_hits.iter().max() {
            Some(&b) if b > 0 => Err(Error::BoxTooSmall { boundary_hits: b }),
            _ => Ok(()),
        }
    }
}

/// Counts samples below every threshold in a single pass.
pub fn sublevel_sweep(model: &PotentialModel, thresholds: &[f64], config: &SamplerConfig) -> Result<SublevelSweep> {
    config.validate()?;
    if let Some(t) = thresholds.iter().find(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument(format!("threshold {t} is not finite")));
    }
    let mut order: Vec<usize> = (0..thresholds.len()).collect();
    order.sort_by(|&a, &b| thresholds[a].total_cmp(&thresholds[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| thresholds[i]).collect();
    let m = sorted.len();
    let bounds = &model.domain().bounds;
    let periodic = model.is_periodic();
    let n = model.dim();

    let per_block = map_blocks(config.n_samples, config.workers, |block, len| {
        let mut rng = substream(config.seed, NS_SAMPLES + block);
        let mut q = vec![0.0; n];
        // Histogram by the first threshold at or above V.
        let mut hist = vec![0u64; m + 1];
        let mut edge = vec![0u64; m + 1];
        for _ in 0..len {
            draw(&mut rng, bounds, &mut q);
            let v = model.value(&q);
            let slot = sorted.partition_point(|&t| t < v);
            hist[slot] += 1;
            if !periodic && slot < m && near_face(bounds, &q) {
                edge[slot] += 1;
            }
        }
        (hist, edge)
    });

    let mut hist = vec![0u64; m + 1];
    let mut edge = vec![0u64; m + 1];
    for (h, e) in per_block {
        for i in 0..=m {
            hist[i] += h[i];
            edge[i] += e[i];
        }
    }
    let mut hits = vec![0; m];
    let mut boundary_hits = vec![0; m];
    let (mut acc, mut acc_e) = (0, 0);
    for (slot, &orig) in order.iter().enumerate() {
        acc += hist[slot];
        acc_e += edge[slot];
        hits[orig] = acc;
        boundary_hits[orig] = acc_e;
    }
    Ok(SublevelSweep {
        thresholds: thresholds.to_vec(),
        hits,
        boundary_hits,
        n_samples: config.n_samples,
        box_volume: model.domain().volume(),
        seed: config.seed,
    })
}

/// Hit-or-miss estimate of `vol(M_v)` inside the domain box.
pub fn estimate_sublevel_volume(model: &PotentialModel, v: f64, config: &SamplerConfig) -> Result<VolumeEstimate> {
    let sweep = sublevel_sweep(model, &[v], config)?;
    sweep.check_boundary()?;
    Ok(sweep.estimate(0))
}

/// Smallest `V` over a pilot run; an upper bound on `min V`.
pub fn pilot_min(model: &PotentialModel, config: &SamplerConfig) -> f64 {
    let bounds = &model.domain().bounds;
    let n = model.dim();
    map_blocks(PILOT_SAMPLES, config.workers, |block, len| {
        let mut rng = substream(config.seed, NS_PILOT + block);
        let mut q = vec![0.0; n];
        let mut best = f64::INFINITY;
        for _ in 0..len {
            draw(&mut rng, bounds, &mut q);
            best = best.min(model.value(&q));
        }
        best
    })
    .into_iter()
    .fold(f64::INFINITY, f64::min)
}

/// Thin-shell estimate `Ω(v) ≈ [M(v+h) − M(v−h)] / 2h` with common random
/// numbers; `half_h_mean` repeats it at `h/2` as a Richardson check.
pub fn estimate_structure_integral(model: &PotentialModel, v: f64, config: &SamplerConfig) -> Result<VolumeEstimate> {
    let h = match config.shell_halfwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(Error::InvalidArgument(format!("shell half-width {h} must be positive"))),
        None => {
            let gap = v - pilot_min(model, config);
            if gap > 0.0 {
                1e-2 * gap
            } else {
                1e-2 * v.abs().max(1e-2)
            }
        }
    };
    let sweep = sublevel_sweep(model, &[v - h, v + h, v - 0.5 * h, v + 0.5 * h], config)?;
    sweep.check_boundary()?;
    let mut est = VolumeEstimate::zero(config.n_samples, config.seed, EstimatorKind::ThinShell);
    est.h = Some(h);
    if sweep.hits[1] == 0 {
        return Ok(est);
    }
    let shell = sweep.hits[1] - sweep.hits[0];
    if shell < MIN_SHELL_HITS {
        return Err(Error::HTooSmall { h, hits: shell });
    }
    let n = sweep.n_samples as f64;
    let ps = shell as f64 / n;
    est.mean = sweep.box_volume * ps / (2.0 * h);
    est.stderr = sweep.box_volume * (ps * (1.0 - ps) / n).sqrt() / (2.0 * h);
    est.half_h_mean = Some(sweep.box_volume * (sweep.hits[3] - sweep.hits[2]) as f64 / n / h);
    Ok(est)
}

/// Five-point finite difference of `log M` at `v` with step `h`, and its
/// delta-method standard error (the four volumes share samples).
pub fn estimate_log_volume_slope(model: &PotentialModel, v: f64, h: f64, config: &SamplerConfig) -> Result<(f64, f64)> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step {h} must be positive")));
    }
    let sweep = sublevel_sweep(model, &[v - 2.0 * h, v - h, v + h, v + 2.0 * h], config)?;
    sweep.check_boundary()?;
    if sweep.hits[0] == 0 {
        return Err(Error::ZeroVolume { v: v - 2.0 * h });
    }
    let w = [1.0, -8.0, 8.0, -1.0].map(|x| x / (12.0 * h));
    let slope: f64 = (0..4).map(|i| w[i] * sweep.p(i).ln()).sum();
    let mut var = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            var += w[i] * w[j] * sweep.cov(i, j) / (sweep.p(i) * sweep.p(j));
        }
    }
    Ok((slope, var.max(0.0).sqrt()))
}

/// `ln Surf(n)` without overflow.
pub fn ln_sphere_surface(n: usize) -> f64 {
    use std::f64::consts::PI;
    let (mut s, mut m) = if n % 2 == 1 { (2f64.ln(), 1) } else { ((2.0 * PI).ln(), 2) };
    while m < n {
        s += (2.0 * PI / m as f64).ln();
        m += 2;
    }
    s
}

/// `ln vol{Σ q² <= v} = ln(Surf(N)/N) + (N/2) ln v`.
pub fn harmonic_log_volume(n: usize, v: f64) -> f64 {
    ln_sphere_surface(n) - (n as f64).ln() + 0.5 * n as f64 * v.ln()
}

/// Exact `M(v)` for the untilted harmonic model whose ball fits the box.
pub fn analytic_volume(model: &PotentialModel, v: f64) -> Result<VolumeEstimate> {
    if model.builtin_kind() != Some(BuiltinKind::Harmonic) {
        return Err(Error::InvalidArgument("the analytic estimator covers the untilted harmonic model only".into()));
    }
    let mut est = VolumeEstimate::zero(0, 0, EstimatorKind::Analytic);
    if v <= 0.0 {
        return Ok(est);
    }
    let radius = v.sqrt();
    if model.domain().bounds.iter().any(|(lo, hi)| -radius < *lo || radius > *hi) {
        return Err(Error::BoxTooSmall { boundary_hits: 0 });
    }
    est.mean = harmonic_log_volume(model.dim(), v).exp();
    Ok(est)
}
