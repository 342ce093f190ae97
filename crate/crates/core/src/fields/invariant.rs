use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{QemError, Result};
use crate::geometry::Signature;

/// Which symmetry group the invariant belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InvariantKind {
    /// `ξ = Σ a ε_k x_k² + b_k x_k + c_k` (pseudo-orthogonal orbits when `a ≠ 0`).
    Quadratic,
    /// `ξ = Σ b_k x_k + c_k` (translation group).
    Translation,
}

/// Value, gradient and Hessian of a scalar field on ℝⁿ at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldJet {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl FieldJet {
    pub fn constant(n: usize, value: f64) -> Self {
        Self {
            value,
            grad: DVector::zeros(n),
            hess: DMatrix::zeros(n, n),
        }
    }
}

/// An invariant `ξ(x) = Σ_k U_k(x_k)` with `U_k = a ε_k x_k² + b_k x_k + c_k`.
///
/// The outer reparameterisation `P` is fixed to the identity; it can always be
/// absorbed into the profiles of φ, h and λ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantSpec {
    pub kind: InvariantKind,
    pub a: f64,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// `S = Σ_k (ε_k b_k² − 4 a c_k)`, so that `Σ ε_k (U_k')² = 4aξ + S`.
    pub s: f64,
    /// `Σ_k ε_k b_k²`, the causal character of the translation direction.
    pub eps_i0: f64,
    pub signature: Signature,
}

/// Serializable description of an invariant, without the derived constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvariantDescription {
    pub kind: InvariantKind,
    #[serde(default)]
    pub a: f64,
    pub b: Vec<f64>,
    #[serde(default)]
    pub c: Option<Vec<f64>>,
}

impl InvariantDescription {
    pub fn build(&self, sig: &Signature) -> Result<InvariantSpec> {
        let c = self.c.clone().unwrap_or_else(|| vec![0.0; sig.dim()]);
        build_invariant(self.kind, self.a, &self.b, &c, sig)
    }
}

pub fn build_invariant(
    kind: InvariantKind,
    a: f64,
    b: &[f64],
    c: &[f64],
    sig: &Signature,
) -> Result<InvariantSpec> {
    let n = sig.dim();
    for (what, len) in [("b coefficients", b.len()), ("c coefficients", c.len())] {
        if len != n {
            return Err(QemError::LengthMismatch {
                what,
                expected: n,
                got: len,
            });
        }
    }
    let b_is_zero = b.iter().all(|v| *v == 0.0);
    match kind {
        InvariantKind::Quadratic if a == 0.0 && b_is_zero => {
            return Err(QemError::DegenerateInvariant)
        }
        InvariantKind::Translation if a != 0.0 || b_is_zero => {
            return Err(QemError::InvalidTranslation)
        }
        _ => {}
    }
    let eps_i0: f64 = (0..n).map(|k| sig.eps(k) * b[k] * b[k]).sum();
    let s = eps_i0 - 4.0 * a * c.iter().sum::<f64>();
    Ok(InvariantSpec {
        kind,
        a,
        b: b.to_vec(),
        c: c.to_vec(),
        s,
        eps_i0,
        signature: sig.clone(),
    })
}

impl InvariantSpec {
    /// `ξ = Σ ε_k x_k²`.
    pub fn radial(sig: &Signature) -> Self {
        let n = sig.dim();
        build_invariant(InvariantKind::Quadratic, 1.0, &vec![0.0; n], &vec![0.0; n], sig)
            .expect("radial invariant is never degenerate")
    }

    /// `ξ = Σ b_k x_k`.
    pub fn translation(sig: &Signature, direction: &[f64]) -> Result<Self> {
        build_invariant(
            InvariantKind::Translation,
            0.0,
            direction,
            &vec![0.0; sig.dim()],
            sig,
        )
    }

    pub fn dim(&self) -> usize {
        self.signature.dim()
    }

    pub fn description(&self) -> InvariantDescription {
        InvariantDescription {
            kind: self.kind,
            a: self.a,
            b: self.b.clone(),
            c: Some(self.c.clone()),
        }
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        (0..self.dim())
            .map(|k| self.a * self.signature.eps(k) * p[k] * p[k] + self.b[k] * p[k] + self.c[k])
            .sum()
    }

    /// `U_k'(x_k) = 2 a ε_k x_k + b_k`.
    pub fn component_slope(&self, k: usize, x: f64) -> f64 {
        2.0 * self.a * self.signature.eps(k) * x + self.b[k]
    }

    /// `4 a ξ + S`, which equals `Σ ε_k (U_k')²`.
    pub fn gradient_norm_sq(&self, xi: f64) -> f64 {
        4.0 * self.a * xi + self.s
    }
}

pub fn invariant_jet(spec: &InvariantSpec, p: &[f64]) -> FieldJet {
    let n = spec.dim();
    FieldJet {
        value: spec.value(p),
        grad: DVector::from_fn(n, |k, _| spec.component_slope(k, p[k])),
        hess: DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                2.0 * spec.a * spec.signature.eps(i)
            } else {
                0.0
            }
        }),
    }
}
