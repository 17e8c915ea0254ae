use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{classify_critical_point, sorted_eigen, CriticalCatalog, SearchMetadata, Tolerances};
use crate::error::{Error, Result};
use crate::potential::{Potential, PotentialModel};
use crate::rng::{map_indexed, substream, NS_STARTS};

/// Multistart Newton settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Number of starts; `None` picks [`default_starts`].
    pub starts: Option<usize>,
    pub seed: u64,
    /// Worker threads, 0 for the global pool.
    pub workers: usize,
    pub tolerances: Tolerances,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { starts: None, seed: 0, workers: 0, tolerances: Tolerances::default() }
    }
}

impl SearchConfig {
    pub fn with_seed(seed: u64) -> Self {
        SearchConfig { seed, ..Default::default() }
    }
}

/// `200 · N · 3^min(N,5)`, capped at one million.
pub fn default_starts(n: usize) -> usize {
    (200 * n * 3usize.pow(n.min(5) as u32)).min(1_000_000)
}

enum Outcome {
    Converged(Vec<f64>),
    NoConvergence,
    OutsideBox,
}

fn newton(model: &PotentialModel, mut x: Vec<f64>, tol: &Tolerances) -> Outcome {
    let n = x.len();
    let mut g = vec![0.0; n];
    let (lo_guard, hi_guard): (Vec<f64>, Vec<f64>) =
        model.domain().bounds.iter().map(|(lo, hi)| (lo - (hi - lo), hi + (hi - lo))).unzip();
    for _ in 0..=tol.max_iter {
        model.gradient(&x, &mut g);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Outcome::NoConvergence;
        }
        if norm <= tol.tol_grad {
            model.wrap(&mut x);
            return match model.domain().violation(&x) {
                None => Outcome::Converged(x),
                Some(_) => Outcome::OutsideBox,
            };
        }
        // Pseudo-inverse step through the eigenbasis; zero modes are left alone.
        let (vals, vecs) = sorted_eigen(model.hessian(&x));
        let scale = vals.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        if !(scale > 0.0) {
            return Outcome::NoConvergence;
        }
        for (l, lambda) in vals.iter().enumerate() {
            if lambda.abs() <= 1e-12 * scale {
                continue;
            }
            let col = vecs.column(l);
            let coef = col.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() / lambda;
            for (xi, ci) in x.iter_mut().zip(col.iter()) {
                *xi -= coef * ci;
            }
        }
        model.wrap(&mut x);
        if !model.is_periodic() && x.iter().zip(lo_guard.iter().zip(&hi_guard)).any(|(v, (lo, hi))| v < lo || v > hi) {
            return Outcome::OutsideBox;
        }
    }
    Outcome::NoConvergence
}

/// Finds the critical points of `model` with value `<= v_max`.
///
/// Starts are drawn uniformly from the domain box, one counter-based
/// substream per start, so the catalog depends only on the configuration and
/// seed. Non-converging starts are counted in the metadata, never fatal;
/// degenerate points are kept and flagged.
pub fn find_critical_points(model: &PotentialModel, v_max: f64, config: &SearchConfig) -> Result<CriticalCatalog> {
    let n = model.dim();
    let starts = config.starts.unwrap_or_else(|| default_starts(n));
    if starts == 0 {
        return Err(Error::InvalidArgument("at least one start is required".into()));
    }
    if !v_max.is_finite() {
        return Err(Error::InvalidArgument("v_max must be finite".into()));
    }
    let tol = config.tolerances;
    let bounds = model.domain().bounds.clone();
    let outcomes = map_indexed(starts, config.workers, |i| {
        let mut rng = substream(config.seed, NS_STARTS + i as u64);
        let x0: Vec<f64> = bounds.iter().map(|(lo, hi)| rng.gen_range(*lo..*hi)).collect();
        newton(model, x0, &tol)
    });

    let mut meta = SearchMetadata { starts, ..Default::default() };
    let mut unique: Vec<(Vec<f64>, usize)> = Vec::new();
    for outcome in outcomes {
        match outcome {
            Outcome::NoConvergence => meta.no_convergence += 1,
            Outcome::OutsideBox => meta.outside_box += 1,
            Outcome::Converged(x) => {
                meta.converged += 1;
                match unique.iter_mut().find(|(u, _)| model.distance(u, &x) < tol.dedup) {
                    Some((_, hits)) => *hits += 1,
                    None => unique.push((x, 1)),
                }
            }
        }
    }

    let mut points = Vec::new();
    for (x, hits) in unique {
        let value = model.value(&x);
        if value > v_max {
            meta.above_cutoff += 1;
            continue;
        }
        if hits == 1 {
            meta.singletons += 1;
        }
        let p = classify_critical_point(model, &x, &tol)?;
        if p.degenerate {
            meta.degenerate += 1;
        }
        points.push(p);
    }
    Ok(CriticalCatalog::new(model, v_max, config.seed, tol, meta, points))
}
