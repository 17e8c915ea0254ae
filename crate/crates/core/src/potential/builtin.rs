use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinKind {
    /// `V = Σ q_i²`
    Harmonic,
    /// `V = Σ (q_i⁴/4 − q_i²/2)`
    UncoupledDoubleWell,
    /// `V = Σ (q_i⁴/4 − q_i²/2) + (J/2) Σ (q_{i+1} − q_i)²`, periodic chain.
    LatticePhi41d,
    /// `V = Σ [1 − cos(q_{i+1} − q_i)] + h Σ [1 − cos q_i]`, periodic chain of angles.
    XyChain1d,
}

impl BuiltinKind {
    pub fn name(self) -> &'static str {
        match self {
            BuiltinKind::Harmonic => "harmonic",
            BuiltinKind::UncoupledDoubleWell => "uncoupled_double_well",
            BuiltinKind::LatticePhi41d => "lattice_phi4_1d",
            BuiltinKind::XyChain1d => "xy_chain_1d",
        }
    }

    pub fn from_name(name: &str) -> Option<BuiltinKind> {
        Some(match name {
            "harmonic" => BuiltinKind::Harmonic,
            "uncoupled_double_well" | "double_well" => BuiltinKind::UncoupledDoubleWell,
            "lattice_phi4_1d" | "phi4" => BuiltinKind::LatticePhi41d,
            "xy_chain_1d" | "xy_chain" => BuiltinKind::XyChain1d,
            _ => return None,
        })
    }

    fn allowed_parameters(self) -> &'static [&'static str] {
        match self {
            BuiltinKind::Harmonic | BuiltinKind::UncoupledDoubleWell => &[],
            BuiltinKind::LatticePhi41d => &["J"],
            BuiltinKind::XyChain1d => &["h"],
        }
    }

    pub fn is_periodic(self) -> bool {
        self == BuiltinKind::XyChain1d
    }

    /// Coordinates enter only through single-site terms.
    pub fn is_uncoupled(self) -> bool {
        matches!(self, BuiltinKind::Harmonic | BuiltinKind::UncoupledDoubleWell)
    }

    pub fn default_box(self) -> (f64, f64) {
        match self {
            BuiltinKind::XyChain1d => (-std::f64::consts::PI, std::f64::consts::PI),
            _ => (-2.0, 2.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinModel {
    pub kind: BuiltinKind,
    coupling: f64,
    field: f64,
}

impl BuiltinModel {
    pub fn new(kind: BuiltinKind, parameters: &BTreeMap<String, f64>) -> Result<Self> {
        for (name, value) in parameters {
            if !kind.allowed_parameters().contains(&name.as_str()) {
                return Err(Error::InvalidModel(format!(
                    "{} does not take parameter `{name}` (allowed: {:?})",
                    kind.name(),
                    kind.allowed_parameters()
                )));
            }
            if !value.is_finite() {
                return Err(Error::InvalidModel(format!("parameter `{name}` must be finite")));
            }
        }
        let coupling = parameters.get("J").copied().unwrap_or(1.0);
        let field = parameters.get("h").copied().unwrap_or(0.0);
        if field < 0.0 {
            return Err(Error::InvalidModel(format!("field h = {field} must be >= 0")));
        }
        Ok(BuiltinModel { kind, coupling, field })
    }

    pub fn value(&self, q: &[f64]) -> f64 {
        let n = q.len();
        match self.kind {
            BuiltinKind::Harmonic => q.iter().map(|x| x * x).sum(),
            BuiltinKind::UncoupledDoubleWell => q.iter().map(|&x| double_well(x)).sum(),
            BuiltinKind::LatticePhi41d => {
                let onsite: f64 = q.iter().map(|&x| double_well(x)).sum();
                let bonds: f64 = (0..n).map(|i| (q[(i + 1) % n] - q[i]).powi(2)).sum();
                onsite + 0.5 * self.coupling * bonds
            }
            BuiltinKind::XyChain1d => {
                let bonds: f64 = (0..n).map(|i| 1.0 - (q[(i + 1) % n] - q[i]).cos()).sum();
                let field: f64 = q.iter().map(|x| 1.0 - x.cos()).sum();
                bonds + self.field * field
            }
        }
    }

    pub fn gradient(&self, q: &[f64], g: &mut [f64]) {
        let n = q.len();
        match self.kind {
            BuiltinKind::Harmonic => {
                for (gi, &x) in g.iter_mut().zip(q) {
                    *gi = 2.0 * x;
                }
            }
            BuiltinKind::UncoupledDoubleWell => {
                for (gi, &x) in g.iter_mut().zip(q) {
                    *gi = x * x * x - x;
                }
            }
            BuiltinKind::LatticePhi41d => {
                for (gi, &x) in g.iter_mut().zip(q) {
                    *gi = x * x * x - x;
                }
                for i in 0..n {
                    let j = (i + 1) % n;
                    let d = self.coupling * (q[j] - q[i]);
                    g[j] += d;
                    g[i] -= d;
                }
            }
            BuiltinKind::XyChain1d => {
                for (gi, &x) in g.iter_mut().zip(q) {
                    *gi = self.field * x.sin();
                }
                for i in 0..n {
                    let j = (i + 1) % n;
                    let s = (q[j] - q[i]).sin();
                    g[j] += s;
                    g[i] -= s;
                }
            }
        }
    }

    pub fn hessian(&self, q: &[f64]) -> DMatrix<f64> {
        let n = q.len();
        let mut h = DMatrix::zeros(n, n);
        match self.kind {
            BuiltinKind::Harmonic => h.fill_diagonal(2.0),
            BuiltinKind::UncoupledDoubleWell => {
                for i in 0..n {
                    h[(i, i)] = 3.0 * q[i] * q[i] - 1.0;
                }
            }
            BuiltinKind::LatticePhi41d => {
                for i in 0..n {
                    h[(i, i)] = 3.0 * q[i] * q[i] - 1.0;
                }
                for i in 0..n {
                    let j = (i + 1) % n;
                    if j != i {
                        add_bond(&mut h, i, j, self.coupling);
                    }
                }
            }
            BuiltinKind::XyChain1d => {
                for i in 0..n {
                    h[(i, i)] = self.field * q[i].cos();
                }
                for i in 0..n {
                    let j = (i + 1) % n;
                    if j != i {
                        add_bond(&mut h, i, j, (q[j] - q[i]).cos());
                    }
                }
            }
        }
        h
    }

    pub fn parameters(&self) -> BTreeMap<String, f64> {
        match self.kind {
            BuiltinKind::LatticePhi41d => BTreeMap::from([("J".to_string(), self.coupling)]),
            BuiltinKind::XyChain1d => BTreeMap::from([("h".to_string(), self.field)]),
            _ => BTreeMap::new(),
        }
    }
}

#[inline]
fn double_well(x: f64) -> f64 {
    let x2 = x * x;
    0.25 * x2 * x2 - 0.5 * x2
}

fn add_bond(h: &mut DMatrix<f64>, i: usize, j: usize, k: f64) {
    h[(i, i)] += k;
    h[(j, j)] += k;
    h[(i, j)] -= k;
    h[(j, i)] -= k;
}
