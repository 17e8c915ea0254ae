//! Pseudo-cylindrical neighborhoods realized in linear Morse coordinates.
//!
//! Around a critical point `q_c` with Hessian `E Λ Eᵀ`, set `y = Eᵀ(q − q_c)`
//! and `x_l = √(|λ_l|/2) y_l`, so that the second-order expansion of `V` is
//! `v_c − |X|² + |Y|²` with `X` the unstable and `Y` the stable components.
//! The neighborhood is bounded by the true level sets `|V − v_c| = ε₀` and
//! by the wall `|X||Y| = r`. A cap `|x|² <= 3R²` (with `R²` the largest
//! squared radius of the quadratic model's cylinder) keeps it local when
//! other parts of the level set reach the same values far away.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{draw, near_face, EstimatorKind, SamplerConfig, VolumeEstimate};
use crate::error::{Error, Result};
use crate::morse::{sorted_eigen, CriticalPoint};
use crate::neckgeom::alpha_beta;
use crate::potential::{Potential, PotentialModel};
use crate::rng::{map_blocks, substream, NS_SAMPLES};

const CAP_FACTOR: f64 = 3.0;

/// Linear Morse chart at a nondegenerate critical point.
#[derive(Debug, Clone)]
pub struct MorseChart {
    pub center: Vec<f64>,
    pub value: f64,
    pub index: usize,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
    /// `√(|λ_l|/2)`
    pub scale: Vec<f64>,
    pub jacobian: f64,
}

impl MorseChart {
    pub fn new(model: &PotentialModel, point: &CriticalPoint) -> Result<Self> {
        let jacobian = point.jacobian()?;
        let (eigenvalues, eigenvectors) = sorted_eigen(model.hessian(&point.coords));
        let scale = eigenvalues.iter().map(|l| (0.5 * l.abs()).sqrt()).collect();
        Ok(MorseChart {
            center: point.coords.clone(),
            value: point.value,
            index: eigenvalues.iter().filter(|&&l| l < 0.0).count(),
            eigenvalues,
            eigenvectors,
            scale,
            jacobian,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `(|X|², |Y|²)` of a displacement `d = q − q_c`.
    pub fn split_norms(&self, d: &[f64]) -> (f64, f64) {
        let n = self.dim();
        let (mut xx, mut yy) = (0.0, 0.0);
        for l in 0..n {
            let col = self.eigenvectors.column(l);
            let y: f64 = col.iter().zip(d).map(|(e, di)| e * di).sum();
            let x = self.scale[l] * y;
            if self.eigenvalues[l] < 0.0 {
                xx += x * x;
            } else {
                yy += x * x;
            }
        }
        (xx, yy)
    }

    /// Second-order model value `v_c − |X|² + |Y|²`.
    pub fn quadratic_value(&self, d: &[f64]) -> f64 {
        let (xx, yy) = self.split_norms(d);
        self.value - xx + yy
    }
}

/// `Γ(q_c, ε₀)` with wall parameter `r`.
#[derive(Debug, Clone)]
pub struct Cylinder {
    pub chart: MorseChart,
    pub eps0: f64,
    pub r: f64,
    cap: f64,
    reach2: f64,
}

impl Cylinder {
    pub fn new(chart: MorseChart, eps0: f64, r: f64) -> Result<Self> {
        if !(eps0 > 0.0 && r > 0.0) {
            return Err(Error::InvalidArgument(format!("eps0 = {eps0} and r = {r} must be positive")));
        }
        let n = chart.dim();
        let radius2 = if chart.index == 0 || chart.index == n {
            eps0
        } else {
            let (_, beta) = alpha_beta(eps0, r);
            beta * beta
        };
        let cap = CAP_FACTOR * radius2;
        let min_scale = chart.scale.iter().cloned().fold(f64::INFINITY, f64::min);
        let reach = cap.sqrt() / min_scale;
        Ok(Cylinder { chart, eps0, r, cap, reach2: reach * reach })
    }

    /// Half-widths of a `q`-space box containing the cylinder.
    pub fn half_widths(&self) -> Vec<f64> {
        let c = self.cap.sqrt();
        let e = &self.chart.eigenvectors;
        (0..self.chart.dim())
            .map(|i| (0..self.chart.dim()).map(|l| e[(i, l)].abs() * c / self.chart.scale[l]).sum())
            .collect()
    }

    /// Membership of `q` with known `V(q)`.
    pub fn contains(&self, model: &PotentialModel, q: &[f64], vq: f64) -> bool {
        if (vq - self.chart.value).abs() > self.eps0 {
            return false;
        }
        let d = model.displacement(&self.chart.center, q);
        if d.iter().map(|x| x * x).sum::<f64>() > self.reach2 {
            return false;
        }
        let (xx, yy) = self.chart.split_norms(&d);
        xx + yy <= self.cap && xx * yy <= self.r * self.r
    }
}

/// MC estimate of `vol(M_v ∩ Γ(q_c, ε₀))`, sampling a box around the
/// cylinder in the original coordinates. No Jacobian factor enters, which
/// makes it an independent check of `J · ½ Surf(k) Surf(N−k) ∫ F`.
pub fn estimate_pseudocylinder_volume(
    model: &PotentialModel,
    point: &CriticalPoint,
    v: f64,
    eps0: f64,
    r: f64,
    config: &SamplerConfig,
) -> Result<VolumeEstimate> {
    config.validate()?;
    let cyl = Cylinder::new(MorseChart::new(model, point)?, eps0, r)?;
    let n = model.dim();
    let bounds: Vec<(f64, f64)> =
        cyl.half_widths().iter().zip(&point.coords).map(|(w, c)| (c - w, c + w)).collect();
    let box_volume: f64 = bounds.iter().map(|(lo, hi)| hi - lo).product();
    let hits: u64 = map_blocks(config.n_samples, config.workers, |block, len| {
        let mut rng = substream(config.seed, NS_SAMPLES + block);
        let mut q = vec![0.0; n];
        let mut hits = 0u64;
        for _ in 0..len {
            draw(&mut rng, &bounds, &mut q);
            model.wrap(&mut q);
            let vq = model.value(&q);
            if vq <= v && cyl.contains(model, &q, vq) {
                hits += 1;
            }
        }
        hits
    })
    .into_iter()
    .sum();
    let p = hits as f64 / config.n_samples as f64;
    Ok(VolumeEstimate {
        mean: box_volume * p,
        stderr: box_volume * (p * (1.0 - p) / config.n_samples as f64).sqrt(),
        n_samples: config.n_samples,
        seed: config.seed,
        estimator_kind: EstimatorKind::HitOrMiss,
        h: None,
        half_h_mean: None,
    })
}

/// Counts from one pass over the domain box with a set of cylinders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcisionCounts {
    pub n_samples: u64,
    pub seed: u64,
    pub box_volume: f64,
    /// Samples in `M_v`.
    pub direct_hits: u64,
    /// Samples in `M_v` outside every cylinder.
    pub excised_hits: u64,
    /// Samples in `M_v` inside each cylinder.
    pub cylinder_hits: Vec<u64>,
    /// Samples (anywhere in the box) inside two or more cylinders.
    pub overlap_hits: u64,
    /// First overlapping pair seen, in block order.
    pub overlap_pair: Option<(usize, usize)>,
    pub boundary_hits: u64,
}

impl ExcisionCounts {
    fn volume(&self, hits: u64) -> VolumeEstimate {
        let p = hits as f64 / self.n_samples as f64;
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

    pub fn direct(&self) -> VolumeEstimate {
        self.volume(self.direct_hits)
    }

    pub fn excised(&self) -> VolumeEstimate {
        self.volume(self.excised_hits)
    }

    /// `vol(M_v ∩ ∪Γ)` from the same samples.
    pub fn union(&self) -> VolumeEstimate {
        self.volume(self.direct_hits - self.excised_hits)
    }

    pub fn overlap(&self) -> VolumeEstimate {
        self.volume(self.overlap_hits)
    }
}

/// One hit-or-miss pass recording sub-level, cylinder and overlap counts.
pub fn excision_pass(
    model: &PotentialModel,
    cylinders: &[Cylinder],
    v: f64,
    config: &SamplerConfig,
) -> Result<ExcisionCounts> {
    config.validate()?;
    let bounds = &model.domain().bounds;
    let n = model.dim();
    let periodic = model.is_periodic();
    let m = cylinders.len();
    let parts = map_blocks(config.n_samples, config.workers, |block, len| {
        let mut rng = substream(config.seed, NS_SAMPLES + block);
        let mut q = vec![0.0; n];
        let (mut direct, mut excised, mut overlap, mut edge) = (0u64, 0u64, 0u64, 0u64);
        let mut per = vec![0u64; m];
        let mut pair = None;
        for _ in 0..len {
            draw(&mut rng, bounds, &mut q);
            let vq = model.value(&q);
            let below = vq <= v;
            let mut inside = None;
            let mut count = 0;
            for (i, c) in cylinders.iter().enumerate() {
                if c.contains(model, &q, vq) {
                    count += 1;
                    match inside {
                        None => inside = Some(i),
                        Some(first) => {
                            if pair.is_none() {
                                pair = Some((first, i));
                            }
                        }
                    }
                    if below {
                        per[i] += 1;
                    }
                }
            }
            if count > 1 {
                overlap += 1;
            }
            if below {
                direct += 1;
                if count == 0 {
                    excised += 1;
                }
                if !periodic && near_face(bounds, &q) {
                    edge += 1;
                }
            }
        }
        (direct, excised, overlap, edge, per, pair)
    });
    let mut out = ExcisionCounts {
        n_samples: config.n_samples,
        seed: config.seed,
        box_volume: model.domain().volume(),
        direct_hits: 0,
        excised_hits: 0,
        cylinder_hits: vec![0; m],
        overlap_hits: 0,
        overlap_pair: None,
        boundary_hits: 0,
    };
    for (d, e, o, b, per, pair) in parts {
        out.direct_hits += d;
        out.excised_hits += e;
        out.overlap_hits += o;
        out.boundary_hits += b;
        for (t, p) in out.cylinder_hits.iter_mut().zip(per) {
            *t += p;
        }
        if out.overlap_pair.is_none() {
            out.overlap_pair = pair;
        }
    }
    if out.boundary_hits > 0 {
        return Err(Error::BoxTooSmall { boundary_hits: out.boundary_hits });
    }
    Ok(out)
}

/// Cylinders of the catalog points with `v_c − ε₀ < v`.
pub(crate) fn active_cylinders(
    model: &PotentialModel,
    points: &[CriticalPoint],
    v: f64,
    eps0: f64,
    r: f64,
) -> Result<(Vec<usize>, Vec<Cylinder>)> {
    let mut idx = Vec::new();
    let mut cyl = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if p.value - eps0 < v {
            idx.push(i);
            cyl.push(Cylinder::new(MorseChart::new(model, p)?, eps0, r)?);
        }
    }
    Ok((idx, cyl))
}

/// Hit-or-miss volume of `M_v` with every active cylinder removed.
///
/// Errors with `OverlapDetected` when two cylinders share samples; the
/// caller is expected to shrink `r` and retry.
pub fn estimate_excised_volume(
    model: &PotentialModel,
    catalog: &crate::morse::CriticalCatalog,
    v: f64,
    eps0: f64,
    r: f64,
    config: &SamplerConfig,
) -> Result<VolumeEstimate> {
    let (idx, cylinders) = active_cylinders(model, &catalog.points, v, eps0, r)?;
    let counts = excision_pass(model, &cylinders, v, config)?;
    if let Some((a, b)) = counts.overlap_pair {
        return Err(Error::OverlapDetected { first: idx[a], second: idx[b] });
    }
    Ok(counts.excised())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morse::{classify_critical_point, CriticalCatalog, Tolerances};
    use crate::neckgeom::coefficient_B;
    use crate::potential::BuiltinKind;

    #[test]
    fn disk_around_harmonic_minimum() {
        // V = q², full cylinder: the disk of radius √ε₀, area π ε₀.
        let m = PotentialModel::builtin(BuiltinKind::Harmonic, 2).unwrap();
        let p = classify_critical_point(&m, &[0.0, 0.0], &Tolerances::default()).unwrap();
        let eps0 = 0.3;
        let est = estimate_pseudocylinder_volume(&m, &p, eps0, eps0, 1.0, &SamplerConfig::new(400_000, 1)).unwrap();
        let exact = std::f64::consts::PI * eps0;
        assert!((est.mean - exact).abs() < 3.0 * est.stderr, "{est:?} vs {exact}");
        let empty = estimate_pseudocylinder_volume(&m, &p, -eps0, eps0, 1.0, &SamplerConfig::new(10_000, 1)).unwrap();
        assert_eq!(empty.mean, 0.0);
    }

    #[test]
    fn rotated_quadratic_saddle() {
        let m = PotentialModel::from_dsl("0.8*q[0]^2 - 1.1*q[1]^2 + 0.6*q[0]*q[1] + 0.5*q[2]^2", 3).unwrap();
        let p = classify_critical_point(&m, &[0.0; 3], &Tolerances::default()).unwrap();
        assert_eq!(p.morse_index, 1);
        let (eps0, r) = (0.2, 0.4);
        for &dv in &[0.2, 0.05, -0.1] {
            let est = estimate_pseudocylinder_volume(&m, &p, dv, eps0, r, &SamplerConfig::new(1_000_000, 7)).unwrap();
            let exact = coefficient_B(3, 1, dv, eps0, r, p.jacobian_factor.unwrap()).unwrap();
            assert!((est.mean - exact).abs() < 3.0 * est.stderr, "dv={dv}: {est:?} vs {exact}");
        }
    }

    #[test]
    fn empty_catalog_excision_is_direct() {
        let m = PotentialModel::builtin(BuiltinKind::Harmonic, 2).unwrap();
        let cat = CriticalCatalog::empty(&m, 5.0);
        let cfg = SamplerConfig::new(100_000, 3);
        let e = estimate_excised_volume(&m, &cat, 1.0, 0.1, 0.5, &cfg).unwrap();
        let d = super::super::estimate_sublevel_volume(&m, 1.0, &cfg).unwrap();
        assert_eq!(e, d);
    }
}
