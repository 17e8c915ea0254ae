//! Evaluatable potentials `V_N` with exact gradients and Hessians.
//!
//! A [`PotentialModel`] is either one of the built-in lattice models or an
//! expression in the small language of [`parser`], optionally tilted by a
//! linear term `a·q`. Models are described on disk by a JSON [`ModelSpec`]:
//!
//! ```json
//! {"kind": "lattice_phi4_1d", "N": 8, "parameters": {"J": 0.5}, "domain_box": [-2, 2]}
//! {"kind": "dsl", "N": 2, "source": "q[0]^2 - q[1]^2", "domain_box": [[-1, 1], [-2, 2]]}
//! ```
//!
//! The domain box is a hard sampling region; evaluation outside it through
//! the checked entry points ([`eval_potential`] and friends) is an error.

pub mod ast;
pub mod builtin;
pub mod dual;
pub mod parser;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use ast::ExpressionAst;
pub use builtin::{BuiltinKind, BuiltinModel};
use dual::Dual;
pub use parser::{parse_potential_dsl, parse_with_params};

use crate::error::{Error, Result};

/// Value, gradient and Hessian of a smooth function on `R^N`.
///
/// Implementations are pure and may be shared across threads.
pub trait Potential: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, q: &[f64]) -> f64;
    fn gradient(&self, q: &[f64], out: &mut [f64]);
    fn hessian(&self, q: &[f64]) -> DMatrix<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoxSpec {
    Uniform([f64; 2]),
    PerCoordinate(Vec<[f64; 2]>),
}

/// JSON description of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parameters: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_box: Option<BoxSpec>,
    /// Expression source, for `kind = "dsl"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    /// Coordinates are angles identified modulo the box width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periodic: Option<bool>,
    /// Linear tilt `a` added as `a·q`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilt: Option<Vec<f64>>,
    /// Interaction range, recorded as metadata only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<f64>,
}

impl ModelSpec {
    pub fn builtin(kind: BuiltinKind, n: usize) -> Self {
        ModelSpec {
            kind: kind.name().to_string(),
            n,
            parameters: BTreeMap::new(),
            domain_box: None,
            source: None,
            periodic: None,
            tilt: None,
            range: None,
        }
    }

    pub fn dsl(source: &str, n: usize) -> Self {
        ModelSpec { kind: "dsl".into(), source: Some(source.into()), ..ModelSpec::builtin(BuiltinKind::Harmonic, n) }
    }

    pub fn with_parameter(mut self, name: &str, value: f64) -> Self {
        self.parameters.insert(name.into(), value);
        self
    }

    pub fn with_box(mut self, lo: f64, hi: f64) -> Self {
        self.domain_box = Some(BoxSpec::Uniform([lo, hi]));
        self
    }

    pub fn build(&self) -> Result<PotentialModel> {
        PotentialModel::from_spec(self)
    }
}

/// Axis-aligned closed box `Π [lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBox {
    pub bounds: Vec<(f64, f64)>,
}

impl DomainBox {
    pub fn uniform(n: usize, lo: f64, hi: f64) -> Self {
        DomainBox { bounds: vec![(lo, hi); n] }
    }

    pub fn volume(&self) -> f64 {
        self.bounds.iter().map(|(lo, hi)| hi - lo).product()
    }

    /// Index of the first coordinate outside the box, if any.
    pub fn violation(&self, q: &[f64]) -> Option<usize> {
        q.iter().zip(&self.bounds).position(|(x, (lo, hi))| !(*x >= *lo && *x <= *hi))
    }
}

#[derive(Debug, Clone)]
enum Evaluator {
    Builtin(BuiltinModel),
    Expression { ast: ExpressionAst, params: BTreeMap<String, f64> },
}

/// A potential together with its sampling box and periodicity.
#[derive(Debug, Clone)]
pub struct PotentialModel {
    spec: ModelSpec,
    dim: usize,
    domain: DomainBox,
    periodic: bool,
    evaluator: Evaluator,
    tilt: Option<Vec<f64>>,
}

impl PotentialModel {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let n = spec.n;
        if n == 0 {
            return Err(Error::InvalidModel("N must be positive".into()));
        }
        let (evaluator, default_box, default_periodic) = if spec.kind == "dsl" {
            let source = spec
                .source
                .as_deref()
                .ok_or_else(|| Error::InvalidModel("dsl model requires `source`".into()))?;
            let names: Vec<&str> = spec.parameters.keys().map(String::as_str).collect();
            let ast = parse_with_params(source, n, &names)?;
            for (name, v) in &spec.parameters {
                if !v.is_finite() {
                    return Err(Error::InvalidModel(format!("parameter `{name}` must be finite")));
                }
            }
            (Evaluator::Expression { ast, params: spec.parameters.clone() }, (-2.0, 2.0), false)
        } else {
            let kind = BuiltinKind::from_name(&spec.kind)
                .ok_or_else(|| Error::InvalidModel(format!("unknown model kind `{}`", spec.kind)))?;
            if spec.source.is_some() {
                return Err(Error::InvalidModel("`source` is only valid for dsl models".into()));
            }
            let model = BuiltinModel::new(kind, &spec.parameters)?;
            (Evaluator::Builtin(model), kind.default_box(), kind.is_periodic())
        };
        let domain = match &spec.domain_box {
            None => DomainBox::uniform(n, default_box.0, default_box.1),
            Some(BoxSpec::Uniform([lo, hi])) => DomainBox::uniform(n, *lo, *hi),
            Some(BoxSpec::PerCoordinate(b)) => {
                if b.len() != n {
                    return Err(Error::InvalidModel(format!("domain_box has {} entries, N = {n}", b.len())));
                }
                DomainBox { bounds: b.iter().map(|[lo, hi]| (*lo, *hi)).collect() }
            }
        };
        for (lo, hi) in &domain.bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidModel(format!("invalid box interval [{lo}, {hi}]")));
            }
        }
        if let Some(t) = &spec.tilt {
            if t.len() != n || t.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidModel("tilt must have N finite entries".into()));
            }
        }
        let mut spec = spec.clone();
        if let Some(kind) = BuiltinKind::from_name(&spec.kind) {
            spec.kind = kind.name().to_string();
        }
        Ok(PotentialModel {
            dim: n,
            periodic: spec.periodic.unwrap_or(default_periodic),
            domain,
            evaluator,
            tilt: spec.tilt.clone(),
            spec,
        })
    }

    pub fn builtin(kind: BuiltinKind, n: usize) -> Result<Self> {
        ModelSpec::builtin(kind, n).build()
    }

    pub fn from_dsl(source: &str, n: usize) -> Result<Self> {
        ModelSpec::dsl(source, n).build()
    }

    pub fn with_box(mut self, lo: f64, hi: f64) -> Self {
        self.domain = DomainBox::uniform(self.dim, lo, hi);
        self.spec.domain_box = Some(BoxSpec::Uniform([lo, hi]));
        self
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn builtin_kind(&self) -> Option<BuiltinKind> {
        match &self.evaluator {
            Evaluator::Builtin(m) if self.tilt.is_none() => Some(m.kind),
            _ => None,
        }
    }

    /// Hex SHA-256 of the canonical JSON spec.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&self.spec).unwrap_or_default();
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// The same model with `a·q` added: `V'(q) = V(q) + Σ a_i q_i`.
    ///
    /// Tilts accumulate. A zero vector returns an identical model.
    pub fn perturbed(&self, a: &[f64]) -> Result<Self> {
        if a.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: a.len() });
        }
        if a.iter().all(|x| *x == 0.0) {
            return Ok(self.clone());
        }
        let tilt: Vec<f64> = match &self.tilt {
            Some(t) => t.iter().zip(a).map(|(x, y)| x + y).collect(),
            None => a.to_vec(),
        };
        let mut model = self.clone();
        model.spec.tilt = Some(tilt.clone());
        model.tilt = Some(tilt);
        Ok(model)
    }

    /// Maps periodic coordinates into `[lo, hi)`; no-op otherwise.
    pub fn wrap(&self, q: &mut [f64]) {
        if !self.periodic {
            return;
        }
        for (x, (lo, hi)) in q.iter_mut().zip(&self.domain.bounds) {
            let w = hi - lo;
            *x = lo + (*x - lo).rem_euclid(w);
            if *x >= *hi {
                *x = *lo;
            }
        }
    }

    /// `b − a`, taking the shortest image for periodic coordinates.
    pub fn displacement(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(b)
            .zip(&self.domain.bounds)
            .map(|((x, y), (lo, hi))| {
                let d = y - x;
                if self.periodic {
                    let w = hi - lo;
                    d - w * (d / w).round()
                } else {
                    d
                }
            })
            .collect()
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.displacement(a, b).iter().map(|d| d * d).sum::<f64>().sqrt()
    }

    fn check(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: q.len() });
        }
        if let Some(i) = self.domain.violation(q) {
            return Err(Error::Domain { coordinate: i });
        }
        Ok(())
    }
}

impl Potential for PotentialModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, q: &[f64]) -> f64 {
        let base = match &self.evaluator {
            Evaluator::Builtin(m) => m.value(q),
            Evaluator::Expression { ast, params } => ast.eval(q, params),
        };
        match &self.tilt {
            Some(a) => base + a.iter().zip(q).map(|(a, x)| a * x).sum::<f64>(),
            None => base,
        }
    }

    fn gradient(&self, q: &[f64], out: &mut [f64]) {
        match &self.evaluator {
            Evaluator::Builtin(m) => m.gradient(q, out),
            Evaluator::Expression { ast, params } => {
                let mut seeded: Vec<Dual<f64>> = q.iter().map(|&x| Dual::constant(x)).collect();
                for i in 0..q.len() {
                    seeded[i].eps = 1.0;
                    out[i] = ast.eval(&seeded, params).eps;
                    seeded[i].eps = 0.0;
                }
            }
        }
        if let Some(a) = &self.tilt {
            for (g, a) in out.iter_mut().zip(a) {
                *g += a;
            }
        }
    }

    fn hessian(&self, q: &[f64]) -> DMatrix<f64> {
        match &self.evaluator {
            Evaluator::Builtin(m) => m.hessian(q),
            Evaluator::Expression { ast, params } => {
                let n = q.len();
                let mut h = DMatrix::zeros(n, n);
                let zero = Dual::constant(0.0);
                let mut seeded: Vec<Dual<Dual<f64>>> =
                    q.iter().map(|&x| Dual::new(Dual::constant(x), zero)).collect();
                for i in 0..n {
                    seeded[i].eps.re = 1.0;
                    for j in i..n {
                        seeded[j].re.eps = 1.0;
                        let v = ast.eval(&seeded, params).eps.eps;
                        h[(i, j)] = v;
                        h[(j, i)] = v;
                        seeded[j].re.eps = 0.0;
                    }
                    seeded[i].eps.re = 0.0;
                }
                h
            }
        }
    }
}

/// `V_N(q)`, checked against the domain box and for finiteness.
pub fn eval_potential(model: &PotentialModel, q: &[f64]) -> Result<f64> {
    model.check(q)?;
    let v = model.value(q);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { what: "potential" })
    }
}

pub fn eval_gradient(model: &PotentialModel, q: &[f64]) -> Result<Vec<f64>> {
    model.check(q)?;
    let mut g = vec![0.0; model.dim];
    model.gradient(q, &mut g);
    if g.iter().all(|x| x.is_finite()) {
        Ok(g)
    } else {
        Err(Error::NonFinite { what: "gradient" })
    }
}

pub fn eval_hessian(model: &PotentialModel, q: &[f64]) -> Result<DMatrix<f64>> {
    model.check(q)?;
    let h = model.hessian(q);
    if h.iter().all(|x| x.is_finite()) {
        Ok(h)
    } else {
        Err(Error::NonFinite { what: "Hessian" })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dw(n: usize) -> PotentialModel {
        PotentialModel::builtin(BuiltinKind::UncoupledDoubleWell, n).unwrap()
    }

    #[test]
    fn builtin_values() {
        let h = PotentialModel::builtin(BuiltinKind::Harmonic, 4).unwrap();
        assert_eq!(eval_potential(&h, &[1.0, 0.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(eval_potential(&dw(1), &[1.0]).unwrap(), -0.25);
        assert_eq!(eval_potential(&dw(3), &[1.0, -1.0, 1.0]).unwrap(), -0.75);
    }

    #[test]
    fn double_well_derivatives() {
        let m = dw(1);
        assert_eq!(eval_gradient(&m, &[0.0]).unwrap(), vec![0.0]);
        assert_eq!(eval_hessian(&m, &[0.0]).unwrap()[(0, 0)], -1.0);
        assert_eq!(eval_hessian(&m, &[1.0]).unwrap()[(0, 0)], 2.0);
    }

    #[test]
    fn dsl_gradient_at_minimum() {
        let m = PotentialModel::from_dsl("0.25*q[0]^4-0.5*q[0]^2", 1).unwrap();
        assert_eq!(eval_gradient(&m, &[1.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn domain_and_dimension_errors() {
        let m = dw(2);
        assert!(matches!(eval_potential(&m, &[0.0, 2.5]), Err(Error::Domain { coordinate: 1 })));
        assert!(matches!(eval_potential(&m, &[0.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn non_finite_expression() {
        let m = PotentialModel::from_dsl("1/q[0]", 1).unwrap();
        assert!(matches!(eval_potential(&m, &[0.0]), Err(Error::NonFinite { .. })));
        let m = PotentialModel::from_dsl("exp(1000*q[0])", 1).unwrap();
        assert!(matches!(eval_potential(&m, &[1.0]), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn spec_json_round_trip() {
        let json = r#"{"kind":"lattice_phi4_1d","N":3,"parameters":{"J":0.5},"domain_box":[-2.5,2.5]}"#;
        let spec: ModelSpec = serde_json::from_str(json).unwrap();
        let model = spec.build().unwrap();
        assert_eq!(serde_json::to_string(model.spec()).unwrap(), json);
        let bad = r#"{"kind":"harmonic","N":3,"colour":"red"}"#;
        assert!(serde_json::from_str::<ModelSpec>(bad).is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        let spec = ModelSpec::builtin(BuiltinKind::XyChain1d, 3).with_parameter("h", -1.0);
        assert!(spec.build().is_err());
        let spec = ModelSpec::builtin(BuiltinKind::Harmonic, 3).with_parameter("J", 1.0);
        assert!(spec.build().is_err());
        let spec = ModelSpec::builtin(BuiltinKind::LatticePhi41d, 3).with_parameter("J", f64::NAN);
        assert!(spec.build().is_err());
    }

    #[test]
    fn tilt_shifts_gradient() {
        let m = PotentialModel::builtin(BuiltinKind::Harmonic, 2).unwrap();
        let same = m.perturbed(&[0.0, 0.0]).unwrap();
        assert_eq!(same.spec(), m.spec());
        let t = m.perturbed(&[0.1, -0.2]).unwrap();
        let q = [0.3, 0.4];
        let mut g0 = [0.0; 2];
        let mut g1 = [0.0; 2];
        m.gradient(&q, &mut g0);
        t.gradient(&q, &mut g1);
        assert!((g1[0] - g0[0] - 0.1).abs() < 1e-15 && (g1[1] - g0[1] + 0.2).abs() < 1e-15);
        assert!((t.value(&q) - m.value(&q) - (0.03 - 0.08)).abs() < 1e-15);
    }

    #[test]
    fn periodic_wrap_and_distance() {
        let m = PotentialModel::builtin(BuiltinKind::XyChain1d, 2).unwrap();
        let pi = std::f64::consts::PI;
        let mut q = [pi + 0.1, -3.0 * pi];
        m.wrap(&mut q);
        assert!((q[0] - (-pi + 0.1)).abs() < 1e-12);
        assert!((q[1] - (-pi)).abs() < 1e-12);
        assert!((m.distance(&[pi - 0.05, 0.0], &[-pi + 0.05, 0.0]) - 0.1).abs() < 1e-12);
    }
}
