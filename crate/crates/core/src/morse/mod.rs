//! Critical points of `V_N`, their Morse data, and sub-level topology.
//!
//! A [`CriticalCatalog`] lists every critical point found below a cutoff
//! `v_max`, sorted by value. From it follow the Morse multiplicities
//! `μ_i(M_v)`, the Euler characteristic `χ(M_v) = Σ (−1)^i μ_i`, the
//! pseudo-cylinder thickness `ε₀` and the level index `ν(v)`.

mod search;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{ModelSpec, Potential, PotentialModel};

pub use search::{default_starts, find_critical_points, SearchConfig};

/// Two critical values closer than this (relative to `1 + |v|`) share a level.
pub const LEVEL_MERGE_TOL: f64 = 1e-9;

/// Safety factor applied to the minimum gap between critical values.
pub const EPS0_SAFETY: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub coords: Vec<f64>,
    pub value: f64,
    #[serde(rename = "index")]
    pub morse_index: usize,
    /// Hessian eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// `2^{N/2} |det Hess|^{-1/2}`; absent for degenerate points.
    #[serde(rename = "J")]
    pub jacobian_factor: Option<f64>,
    pub degenerate: bool,
}

impl CriticalPoint {
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn jacobian(&self) -> Result<f64> {
        self.jacobian_factor.ok_or_else(|| Error::DegenerateHessian { ratio: self.degeneracy_ratio() })
    }

    fn degeneracy_ratio(&self) -> f64 {
        let max = self.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        let min = self.eigenvalues.iter().fold(f64::INFINITY, |m, l| m.min(l.abs()));
        if max > 0.0 {
            min / max
        } else {
            0.0
        }
    }
}

/// Tolerances of the critical-point search and classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub tol_grad: f64,
    pub dedup: f64,
    pub degeneracy: f64,
    pub max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { tol_grad: 1e-10, dedup: 1e-6, degeneracy: 1e-8, max_iter: 100 }
    }
}

/// Bookkeeping of a multistart search.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchMetadata {
    pub starts: usize,
    pub converged: usize,
    /// Starts that hit the iteration cap or left the box (`NoConvergence`).
    pub no_convergence: usize,
    pub outside_box: usize,
    pub above_cutoff: usize,
    /// Unique points reached from exactly one start; a completeness warning sign.
    pub singletons: usize,
    pub degenerate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalCatalog {
    pub model: ModelSpec,
    pub v_max: f64,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub search: SearchMetadata,
    pub points: Vec<CriticalPoint>,
    /// Distinct critical values, strictly increasing.
    pub critical_values: Vec<f64>,
    /// Number of points on each critical level.
    pub per_level_counts: Vec<usize>,
}

impl CriticalCatalog {
    /// Builds a catalog from classified points, sorting them by value and
    /// then lexicographically by coordinates.
    pub fn new(
        model: &PotentialModel,
        v_max: f64,
        seed: u64,
        tolerances: Tolerances,
        search: SearchMetadata,
        mut points: Vec<CriticalPoint>,
    ) -> Self {
        points.sort_by(|a, b| {
            a.value.total_cmp(&b.value).then_with(|| {
                a.coords
                    .iter()
                    .zip(&b.coords)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
        });
        let mut catalog = CriticalCatalog {
            model: model.spec().clone(),
            v_max,
            seed,
            tolerances,
            search,
            points,
            critical_values: Vec::new(),
            per_level_counts: Vec::new(),
        };
        catalog.rebuild_levels();
        catalog
    }

    /// An empty catalog, for models or windows without critical points.
    pub fn empty(model: &PotentialModel, v_max: f64) -> Self {
        Self::new(model, v_max, 0, Tolerances::default(), SearchMetadata::default(), Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.model.n
    }

    fn rebuild_levels(&mut self) {
        self.critical_values.clear();
        self.per_level_counts.clear();
        for p in &self.points {
            match self.critical_values.last() {
                Some(&last) if (p.value - last).abs() <= LEVEL_MERGE_TOL * (1.0 + last.abs()) => {
                    *self.per_level_counts.last_mut().unwrap() += 1;
                }
                _ => {
                    self.critical_values.push(p.value);
                    self.per_level_counts.push(1);
                }
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let mut catalog: CriticalCatalog = serde_json::from_str(json)?;
        catalog.rebuild_levels();
        Ok(catalog)
    }

    fn check_cutoff(&self, v: f64) -> Result<()> {
        if v > self.v_max + LEVEL_MERGE_TOL * (1.0 + self.v_max.abs()) {
            Err(Error::CutoffExceeded { v, v_max: self.v_max })
        } else {
            Ok(())
        }
    }

    /// Points with `v_c <= v`.
    pub fn points_below(&self, v: f64) -> impl Iterator<Item = &CriticalPoint> {
        self.points.iter().filter(move |p| p.value <= v)
    }

    /// `μ_i(M_v)` for `i = 0..=N`.
    pub fn multiplicities_below(&self, v: f64) -> Result<Vec<usize>> {
        self.check_cutoff(v)?;
        let mut mu = vec![0; self.dim() + 1];
        for p in self.points_below(v) {
            mu[p.morse_index] += 1;
        }
        Ok(mu)
    }

    /// `χ(M_v) = Σ_i (−1)^i μ_i(M_v)`.
    pub fn euler_characteristic(&self, v: f64) -> Result<i64> {
        let mu = self.multiplicities_below(v)?;
        Ok(euler_from_multiplicities(&mu))
    }

    /// `ε₀ = 0.9 · min_j (v_c^{j+1} − v_c^j)`.
    pub fn epsilon0(&self) -> Result<f64> {
        self.epsilon0_with_safety(EPS0_SAFETY)
    }

    pub fn epsilon0_with_safety(&self, safety: f64) -> Result<f64> {
        if self.critical_values.len() < 2 {
            return Err(Error::SingleLevel);
        }
        let gap = self.critical_values.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        Ok(safety * gap)
    }

    /// `ν(v)`: 1-based index of the greatest critical value `<= v`, 0 if none.
    pub fn level_index_nu(&self, v: f64) -> usize {
        self.critical_values.iter().take_while(|&&c| c <= v).count()
    }

    /// Smallest distance between two catalog points (wrap-aware).
    pub fn min_pairwise_distance(&self, model: &PotentialModel) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                let d = model.distance(&a.coords, &b.coords);
                best = Some(best.map_or(d, |x| x.min(d)));
            }
        }
        best
    }
}

pub fn euler_from_multiplicities(mu: &[usize]) -> i64 {
    mu.iter().enumerate().map(|(i, &m)| if i % 2 == 0 { m as i64 } else { -(m as i64) }).sum()
}

/// Free-function form of [`CriticalCatalog::multiplicities_below`].
pub fn multiplicities_below(catalog: &CriticalCatalog, v: f64) -> Result<Vec<usize>> {
    catalog.multiplicities_below(v)
}

pub fn euler_characteristic(catalog: &CriticalCatalog, v: f64) -> Result<i64> {
    catalog.euler_characteristic(v)
}

pub fn compute_epsilon0(catalog: &CriticalCatalog) -> Result<f64> {
    catalog.epsilon0()
}

pub fn level_index_nu(catalog: &CriticalCatalog, v: f64) -> usize {
    catalog.level_index_nu(v)
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
pub(crate) fn sorted_eigen(h: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = h.nrows();
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// `2^{N/2} |Π λ|^{-1/2}`, the volume factor of the map `x_l = √(|λ_l|/2) y_l`.
pub fn jacobian_factor(eigenvalues: &[f64]) -> f64 {
    let n = eigenvalues.len() as f64;
    let log_det: f64 = eigenvalues.iter().map(|l| l.abs().ln()).sum();
    (0.5 * n * std::f64::consts::LN_2 - 0.5 * log_det).exp()
}

/// `V'(q) = V(q) + a·q`. A generic small `a` breaks continuous symmetries
/// and leaves only nondegenerate critical points.
pub fn perturb_degenerate(model: &PotentialModel, a: &[f64]) -> Result<PotentialModel> {
    model.perturbed(a)
}

/// Classifies the critical point at `coords`.
pub fn classify_critical_point(model: &PotentialModel, coords: &[f64], tol: &Tolerances) -> Result<CriticalPoint> {
    let n = model.dim();
    if coords.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: coords.len() });
    }
    let mut g = vec![0.0; n];
    model.gradient(coords, &mut g);
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm <= tol.tol_grad) {
        return Err(Error::NotCritical { norm, tol: tol.tol_grad });
    }
    let (eigenvalues, _) = sorted_eigen(model.hessian(coords));
    let max = eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let min = eigenvalues.iter().fold(f64::INFINITY, |m, l| m.min(l.abs()));
    let degenerate = !(max > 0.0) || min < tol.degeneracy * max;
    let morse_index = eigenvalues.iter().filter(|&&l| l < 0.0).count();
    Ok(CriticalPoint {
        coords: coords.to_vec(),
        value: model.value(coords),
        morse_index,
        jacobian_factor: (!degenerate).then(|| jacobian_factor(&eigenvalues)),
        eigenvalues,
        degenerate,
    })
}
