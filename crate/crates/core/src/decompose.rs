//! Assembly and verification of `vol(M_v) = excised volume + topological term`.
//!
//! The excised volume is `M_v` with every pseudo-cylinder removed, estimated
//! by hit-or-miss. The topological term replaces each removed piece by its
//! Morse-chart value, `A_k J` for a whole cylinder or `B(v − v_c)` inside a
//! band. The direct and excised estimates share samples, so their difference
//! is an estimate of the removed volume with little noise, and the residual
//! `|direct − (excised + topological)| / direct` isolates the chart error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{
    draw, estimate_pseudocylinder_volume, excision_pass, near_face, Cylinder, EstimatorKind, MorseChart,
    SamplerConfig, VolumeEstimate,
};
use crate::morse::CriticalCatalog;
use crate::neckgeom::{topological_term, NeighborhoodCoefficients};
use crate::potential::{Potential, PotentialModel};
use crate::rng::{map_blocks, substream, NS_OVERLAP, NS_SAMPLES};

/// `r` is capped at this fraction of the smallest distance between points.
pub const R_DISTANCE_FRACTION: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionConfig {
    pub sampler: SamplerConfig,
    /// Halvings of `r` tried when cylinders overlap.
    pub max_shrink: usize,
    /// Samples per cylinder for the independent cylinder-volume oracle;
    /// 0 skips it.
    pub cylinder_samples: u64,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        DecompositionConfig { sampler: SamplerConfig::default(), max_shrink: 3, cylinder_samples: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `v` lies outside every critical band.
    Plateau,
    /// `v` lies inside at least one band `(v_c − ε₀, v_c + ε₀)`.
    Band,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub v: f64,
    pub eps0: f64,
    /// Requested wall parameter.
    pub r: f64,
    /// Wall parameter actually used after the distance cap and shrinking.
    pub r_eff: f64,
    pub nu: usize,
    pub regime: Regime,
    pub n_cylinders: usize,
    pub direct_volume: VolumeEstimate,
    pub excised_volume: VolumeEstimate,
    /// `direct − excised`, the MC volume of `M_v` inside the cylinders.
    pub removed_volume: VolumeEstimate,
    pub topo_term: f64,
    /// Sum of per-cylinder MC volumes, sampled around each cylinder.
    pub cylinder_mc_total: Option<VolumeEstimate>,
    /// Volume of `M_v` counted more than once by the cylinders. The
    /// topological term sums whole cylinders, so this is subtracted from it
    /// before comparing with the direct volume.
    pub overlap_volume: f64,
    pub overlap_stderr: f64,
    /// `|direct − (excised + topo − overlap)| / direct`.
    pub residual_rel: f64,
    /// The same without the overlap correction.
    pub residual_uncorrected_rel: f64,
    /// Standard error of `residual_rel` from the MC volumes.
    pub residual_stderr: f64,
    /// `|cylinder_mc_total − topo_term| / direct`.
    pub residual_vs_mc_rel: Option<f64>,
    #[serde(rename = "S_decomposed")]
    pub s_decomposed: f64,
    #[serde(rename = "S_direct")]
    pub s_direct: f64,
    pub warnings: Vec<String>,
}

/// `|direct − (excised + topo − overlap)| / direct`.
pub fn decomposition_residual(report: &DecompositionReport) -> f64 {
    let d = report.direct_volume.mean;
    (d - report.excised_volume.mean - report.topo_term + report.overlap_volume).abs() / d
}

fn catalog_warnings(catalog: &CriticalCatalog, v: f64, eps0: f64) -> Vec<String> {
    let mut w = Vec::new();
    if catalog.v_max < v + eps0 {
        w.push(format!(
            "IncompleteCatalog: catalog cutoff {} is below v + eps0 = {}",
            catalog.v_max,
            v + eps0
        ));
    }
    if catalog.search.singletons > 0 {
        w.push(format!(
            "IncompleteCatalog: {} critical points were reached from a single start",
            catalog.search.singletons
        ));
    }
    w
}

struct Fitted {
    cylinders: Vec<Cylinder>,
    r_eff: f64,
    overlap: f64,
    overlap_stderr: f64,
    pair: Option<(usize, usize)>,
}

/// Cylinders for every catalog point with `v_c − ε₀ < v_top`, and the `r`
/// that keeps them disjoint (at most `max_shrink` halvings).
///
fn fit_cylinders(
    model: &PotentialModel,
    catalog: &CriticalCatalog,
    v_top: f64,
    eps0: f64,
    r: f64,
    config: &DecompositionConfig,
) -> Result<Fitted> {
    let charts = catalog
        .points
        .iter()
        .filter(|p| p.value - eps0 < v_top)
        .map(|p| MorseChart::new(model, p))
        .collect::<Result<Vec<_>>>()?;
    let mut r_eff = r;
    if let Some(d) = catalog.min_pairwise_distance(model) {
        r_eff = r_eff.min(R_DISTANCE_FRACTION * d);
    }
    let overlap_cfg = SamplerConfig { seed: config.sampler.seed ^ NS_OVERLAP, ..config.sampler };
    let mut shrinks = 0;
    loop {
        let cylinders =
            charts.iter().map(|c| Cylinder::new(c.clone(), eps0, r_eff)).collect::<Result<Vec<_>>>()?;
        let (overlap, overlap_stderr, pair) = overlap_volume(model, &cylinders, v_top, &overlap_cfg);
        if pair.is_none() || shrinks >= config.max_shrink {
            return Ok(Fitted { cylinders, r_eff, overlap, overlap_stderr, pair });
        }
        r_eff *= 0.5;
        shrinks += 1;
    }
}

/// Volume of `M_v` counted more than once by the cylinders,
/// `Σ_i vol(Γ_i ∩ M_v) − vol(∪Γ_i ∩ M_v)`, with its standard error.
///
/// Each cylinder's bounding box is sampled; a point is charged to the
/// lowest-index cylinder holding it, once per later cylinder holding it too.
fn overlap_volume(
    model: &PotentialModel,
    cylinders: &[Cylinder],
    v: f64,
    config: &SamplerConfig,
) -> (f64, f64, Option<(usize, usize)>) {
    let n = model.dim();
    let per = (config.n_samples / 4).max(1 << 14);
    let (mut total, mut var) = (0.0, 0.0);
    let mut first = None;
    for (i, c) in cylinders.iter().enumerate() {
        let bounds: Vec<(f64, f64)> =
            c.half_widths().iter().zip(&c.chart.center).map(|(w, x)| (x - w, x + w)).collect();
        let box_volume: f64 = bounds.iter().map(|(lo, hi)| hi - lo).product();
        let parts = map_blocks(per, config.workers, |block, len| {
            let mut rng = substream(config.seed, NS_OVERLAP + ((i as u64) << 32) + block);
            let mut q = vec![0.0; n];
            let (mut sum, mut sum2, mut pair) = (0u64, 0u64, None);
            for _ in 0..len {
                draw(&mut rng, &bounds, &mut q);
                model.wrap(&mut q);
                let vq = model.value(&q);
                if vq > v || !c.contains(model, &q, vq) {
                    continue;
                }
                if cylinders[..i].iter().any(|o| o.contains(model, &q, vq)) {
                    continue;
                }
                let mut extra = 0u64;
                for (j, o) in cylinders.iter().enumerate().skip(i + 1) {
                    if o.contains(model, &q, vq) {
                        extra += 1;
                        pair.get_or_insert((i, j));
                    }
                }
                sum += extra;
                sum2 += extra * extra;
            }
            (sum, sum2, pair)
        });
        let (mut sum, mut sum2) = (0u64, 0u64);
        for (a, b, p) in parts {
            sum += a;
            sum2 += b;
            if first.is_none() {
                first = p;
            }
        }
        let k = per as f64;
        let mean = sum as f64 / k;
        total += box_volume * mean;
        var += box_volume * box_volume * (sum2 as f64 / k - mean * mean).max(0.0) / k;
    }
    (total, var.sqrt(), first)
}

/// Builds the decomposition at level `v`.
pub fn assemble_entropy_decomposition(
    model: &PotentialModel,
    catalog: &CriticalCatalog,
    v: f64,
    eps0: f64,
    r: f64,
    config: &DecompositionConfig,
) -> Result<DecompositionReport> {
    if !(eps0 > 0.0 && r > 0.0) {
        return Err(Error::InvalidArgument(format!("eps0 = {eps0} and r = {r} must be positive")));
    }
    if catalog.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: catalog.dim() });
    }
    let n = model.dim();
    let mut warnings = catalog_warnings(catalog, v, eps0);
    let Fitted { cylinders, r_eff, overlap, overlap_stderr, pair } =
        fit_cylinders(model, catalog, v, eps0, r, config)?;
    if let Some((a, b)) = pair {
        warnings.push(format!(
            "OverlapDetected: cylinders {a} and {b} still intersect at r = {r_eff:e}; overlap volume {overlap:e} is subtracted from the topological term"
        ));
    }
    let counts = excision_pass(model, &cylinders, v, &config.sampler)?;
    let direct = counts.direct();
    if direct.mean <= 0.0 {
        return Err(Error::ZeroVolume { v });
    }
    let excised = counts.excised();
    let removed = counts.union();
    let coeffs = NeighborhoodCoefficients::new(n, eps0, r_eff)?;
    let topo = topological_term(catalog, &coeffs, v)?;

    let cylinder_mc_total = if config.cylinder_samples > 0 {
        let (mut mean, mut var) = (0.0, 0.0);
        for (i, p) in catalog.points.iter().filter(|p| p.value - eps0 < v).enumerate() {
            let cfg = SamplerConfig {
                n_samples: config.cylinder_samples,
                seed: config.sampler.seed.wrapping_add(1 + i as u64),
                ..config.sampler
            };
            let e = estimate_pseudocylinder_volume(model, p, v, eps0, r_eff, &cfg)?;
            mean += e.mean;
            var += e.stderr * e.stderr;
        }
        Some(VolumeEstimate {
            mean,
            stderr: var.sqrt(),
            n_samples: config.cylinder_samples,
            seed: config.sampler.seed,
            estimator_kind: EstimatorKind::HitOrMiss,
            h: None,
            half_h_mean: None,
        })
    } else {
        None
    };

    let in_band = catalog.points.iter().any(|p| (v - p.value).abs() < eps0);
    let mut report = DecompositionReport {
        v,
        eps0,
        r,
        r_eff,
        nu: catalog.level_index_nu(v),
        regime: if in_band { Regime::Band } else { Regime::Plateau },
        n_cylinders: cylinders.len(),
        residual_stderr: removed.stderr.hypot(overlap_stderr) / direct.mean,
        residual_vs_mc_rel: cylinder_mc_total.as_ref().map(|c| (c.mean - topo).abs() / direct.mean),
        cylinder_mc_total,
        overlap_volume: overlap,
        overlap_stderr,
        residual_rel: 0.0,
        residual_uncorrected_rel: (direct.mean - excised.mean - topo).abs() / direct.mean,
        s_decomposed: (excised.mean + topo - overlap).ln() / n as f64,
        s_direct: direct.mean.ln() / n as f64,
        direct_volume: direct,
        excised_volume: excised,
        removed_volume: removed,
        topo_term: topo,
        warnings,
    };
    report.residual_rel = decomposition_residual(&report);
    Ok(report)
}

/// One report per `ε₀`, all on the same samples.
pub fn epsilon_sweep(
    model: &PotentialModel,
    catalog: &CriticalCatalog,
    v: f64,
    eps_list: &[f64],
    r: f64,
    config: &DecompositionConfig,
) -> Result<Vec<DecompositionReport>> {
    eps_list.iter().map(|&e| assemble_entropy_decomposition(model, catalog, v, e, r, config)).collect()
}

/// `S_decomposed` and `S_direct` on a grid of levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposedCurve {
    pub v: Vec<f64>,
    pub eps0: f64,
    pub r_eff: f64,
    #[serde(rename = "S_decomposed")]
    pub s_decomposed: Vec<f64>,
    #[serde(rename = "S_direct")]
    pub s_direct: Vec<f64>,
    pub topo_term: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Decomposed and direct entropies over `v_grid` from one sample set.
///
/// A cylinder whose band lies above `v` holds no point of `M_v`, so the
/// cylinders fitted at the top of the grid serve every grid point.
pub fn decomposed_curve(
    model: &PotentialModel,
    catalog: &CriticalCatalog,
    v_grid: &[f64],
    eps0: f64,
    r: f64,
    config: &DecompositionConfig,
) -> Result<DecomposedCurve> {
    let top = v_grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::InvalidArgument("empty or non-finite grid".into()));
    }
    let n = model.dim();
    let mut warnings = catalog_warnings(catalog, top, eps0);
    let Fitted { cylinders, r_eff, overlap, pair, .. } = fit_cylinders(model, catalog, top, eps0, r, config)?;
    if pair.is_some() {
        warnings.push(format!("OverlapDetected: overlap volume {overlap:e} at r = {r_eff:e} is not corrected"));
    }
    let coeffs = NeighborhoodCoefficients::new(n, eps0, r_eff)?;

    let mut order: Vec<usize> = (0..v_grid.len()).collect();
    order.sort_by(|&a, &b| v_grid[a].total_cmp(&v_grid[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| v_grid[i]).collect();
    let m = sorted.len();
    let cfg = &config.sampler;
    let bounds = &model.domain().bounds;
    let periodic = model.is_periodic();
    let parts = map_blocks(cfg.n_samples, cfg.workers, |block, len| {
        let mut rng = substream(cfg.seed, NS_SAMPLES + block);
        let mut q = vec![0.0; n];
        let mut direct = vec![0u64; m + 1];
        let mut excised = vec![0u64; m + 1];
        let mut edge = 0u64;
        for _ in 0..len {
            draw(&mut rng, bounds, &mut q);
            let vq = model.value(&q);
            let slot = sorted.partition_point(|&t| t < vq);
            if slot == m {
                continue;
            }
            direct[slot] += 1;
            if !cylinders.iter().any(|c| c.contains(model, &q, vq)) {
                excised[slot] += 1;
            }
            if !periodic && near_face(bounds, &q) {
                edge += 1;
            }
        }
        (direct, excised, edge)
    });
    let mut direct = vec![0u64; m + 1];
    let mut excised = vec![0u64; m + 1];
    let mut edge = 0;
    for (d, e, b) in parts {
        for i in 0..=m {
            direct[i] += d[i];
            excised[i] += e[i];
        }
        edge += b;
    }
    if edge > 0 {
        return Err(Error::BoxTooSmall { boundary_hits: edge });
    }
    let scale = model.domain().volume() / cfg.n_samples as f64;
    let nf = n as f64;
    let mut out = DecomposedCurve {
        v: v_grid.to_vec(),
        eps0,
        r_eff,
        s_decomposed: vec![0.0; m],
        s_direct: vec![0.0; m],
        topo_term: vec![0.0; m],
        warnings,
    };
    let (mut acc_d, mut acc_e) = (0u64, 0u64);
    for (slot, &orig) in order.iter().enumerate() {
        acc_d += direct[slot];
        acc_e += excised[slot];
        let v = v_grid[orig];
        if acc_d == 0 {
            return Err(Error::ZeroVolume { v });
        }
        let topo = topological_term(catalog, &coeffs, v)?;
        out.topo_term[orig] = topo;
        out.s_direct[orig] = (scale * acc_d as f64).ln() / nf;
        out.s_decomposed[orig] = (scale * acc_e as f64 + topo).ln() / nf;
    }
    Ok(out)
}
