use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{QemError, Result};
use crate::fields::invariant::{invariant_jet, FieldJet, InvariantSpec};

/// Closed interval in ξ; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(QemError::InvalidInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub const fn real_line() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub const fn positive() -> Self {
        Self {
            lo: 0.0,
            hi: f64::INFINITY,
        }
    }

    pub fn contains(&self, xi: f64) -> bool {
        xi >= self.lo && xi <= self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn intersect(&self, other: &Interval) -> Result<Interval> {
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    /// `count` evenly spaced abscissae including both ends.
    pub fn linspace(&self, count: usize) -> Vec<f64> {
        match count {
            0 => vec![],
            1 => vec![0.5 * (self.lo + self.hi)],
            _ => (0..count)
                .map(|i| self.lo + self.width() * i as f64 / (count - 1) as f64)
                .collect(),
        }
    }
}

// Infinite ends travel as `null` so JSON can carry them.
impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let end = |v: f64| v.is_finite().then_some(v);
        [end(self.lo), end(self.hi)].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let [lo, hi] = <[Option<f64>; 2]>::deserialize(deserializer)?;
        Interval::new(
            lo.unwrap_or(f64::NEG_INFINITY),
            hi.unwrap_or(f64::INFINITY),
        )
        .map_err(serde::de::Error::custom)
    }
}

/// Value and first two derivatives of a one-variable function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileJet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl ProfileJet {
    pub const fn constant(value: f64) -> Self {
        Self {
            value,
            d1: 0.0,
            d2: 0.0,
        }
    }
}

/// Closed-form one-variable expressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileExpr {
    Constant {
        value: f64,
    },
    /// `offset + slope·ξ`
    Affine {
        offset: f64,
        slope: f64,
    },
    /// `scale·exp(rate·ξ + shift)`
    Exp {
        #[serde(default = "one")]
        scale: f64,
        rate: f64,
        #[serde(default)]
        shift: f64,
    },
    /// `c1·exp(r1·ξ) + c2·exp(r2·ξ)`
    ExpPair {
        c1: f64,
        r1: f64,
        c2: f64,
        r2: f64,
    },
    /// `scale·ξ^exponent`, ξ > 0
    Power {
        #[serde(default = "one")]
        scale: f64,
        exponent: f64,
    },
    /// `c1 + c2·ln ξ`, ξ > 0
    LogAffine {
        c1: f64,
        c2: f64,
    },
    /// `c1·sin(μ ln ξ) + c2·cos(μ ln ξ)`, ξ > 0
    SinCosLog {
        c1: f64,
        c2: f64,
        mu: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl ProfileExpr {
    /// Largest interval on which the expression is smooth.
    pub fn natural_domain(&self) -> Interval {
        match self {
            ProfileExpr::Power { exponent, .. } if exponent.fract() == 0.0 && *exponent >= 0.0 => {
                Interval::real_line()
            }
            ProfileExpr::Power { .. }
            | ProfileExpr::LogAffine { .. }
            | ProfileExpr::SinCosLog { .. } => Interval {
                lo: f64::MIN_POSITIVE,
                hi: f64::INFINITY,
            },
            _ => Interval::real_line(),
        }
    }

    pub fn jet(&self, xi: f64) -> ProfileJet {
        match *self {
            ProfileExpr::Constant { value } => ProfileJet::constant(value),
            ProfileExpr::Affine { offset, slope } => ProfileJet {
                value: offset + slope * xi,
                d1: slope,
                d2: 0.0,
            },
            ProfileExpr::Exp { scale, rate, shift } => {
                let v = scale * (rate * xi + shift).exp();
                ProfileJet {
                    value: v,
                    d1: rate * v,
                    d2: rate * rate * v,
                }
            }
            ProfileExpr::ExpPair { c1, r1, c2, r2 } => {
                let e1 = c1 * (r1 * xi).exp();
                let e2 = c2 * (r2 * xi).exp();
                ProfileJet {
                    value: e1 + e2,
                    d1: r1 * e1 + r2 * e2,
                    d2: r1 * r1 * e1 + r2 * r2 * e2,
                }
            }
            ProfileExpr::Power { scale, exponent } => {
                let p = exponent;
                ProfileJet {
                    value: scale * xi.powf(p),
                    d1: if p == 0.0 { 0.0 } else { scale * p * xi.powf(p - 1.0) },
                    d2: if p == 0.0 || p == 1.0 {
                        0.0
                    } else {
                        scale * p * (p - 1.0) * xi.powf(p - 2.0)
                    },
                }
            }
            ProfileExpr::LogAffine { c1, c2 } => ProfileJet {
                value: c1 + c2 * xi.ln(),
                d1: c2 / xi,
                d2: -c2 / (xi * xi),
            },
            ProfileExpr::SinCosLog { c1, c2, mu } => {
                let t = mu * xi.ln();
                let (s, c) = t.sin_cos();
                let v = c1 * s + c2 * c;
                // w = dv/dt
                let w = mu * (c1 * c - c2 * s);
                ProfileJet {
                    value: v,
                    d1: w / xi,
                    d2: (-mu * mu * v - w) / (xi * xi),
                }
            }
        }
    }
}

/// A one-variable function whose jet can be evaluated without domain checks.
pub trait ProfileSource: Send + Sync + fmt::Debug {
    fn jet(&self, xi: f64) -> Result<ProfileJet>;
}

#[derive(Clone)]
enum Repr {
    Closed(ProfileExpr),
    Source(Arc<dyn ProfileSource>),
    /// `f = −m ln h`
    Potential { h: Box<ScalarProfile>, m: f64 },
    Offset { base: Box<ScalarProfile>, delta: f64 },
    Scaled { base: Box<ScalarProfile>, factor: f64 },
}

impl fmt::Debug for Repr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Repr::Closed(e) => write!(f, "{e:?}"),
            Repr::Source(s) => write!(f, "{s:?}"),
            Repr::Potential { h, m } => write!(f, "Potential(-{m} ln {h:?})"),
            Repr::Offset { base, delta } => write!(f, "({base:?} + {delta})"),
            Repr::Scaled { base, factor } => write!(f, "({factor} * {base:?})"),
        }
    }
}

/// A function `ξ ↦ value` with first and second derivatives, restricted to a
/// closed domain.
#[derive(Debug, Clone)]
pub struct ScalarProfile {
    domain: Interval,
    repr: Repr,
}

impl ScalarProfile {
    pub fn closed(expr: ProfileExpr) -> Self {
        Self {
            domain: expr.natural_domain(),
            repr: Repr::Closed(expr),
        }
    }

    pub fn constant(value: f64) -> Self {
        Self::closed(ProfileExpr::Constant { value })
    }

    pub fn from_source(domain: Interval, source: Arc<dyn ProfileSource>) -> Self {
        Self {
            domain,
            repr: Repr::Source(source),
        }
    }

    /// Restricts the domain; fails if the restriction is empty.
    pub fn restricted(mut self, domain: Interval) -> Result<Self> {
        self.domain = self.domain.intersect(&domain)?;
        Ok(self)
    }

    pub fn offset(&self, delta: f64) -> Self {
        Self {
            domain: self.domain,
            repr: Repr::Offset {
                base: Box::new(self.clone()),
                delta,
            },
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            domain: self.domain,
            repr: Repr::Scaled {
                base: Box::new(self.clone()),
                factor,
            },
        }
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    /// The closed-form expression, if this profile is one.
    pub fn expression(&self) -> Option<&ProfileExpr> {
        match &self.repr {
            Repr::Closed(e) => Some(e),
            _ => None,
        }
    }

    pub fn describe(&self) -> String {
        format!("{:?}", self.repr)
    }

    pub fn eval(&self, xi: f64) -> Result<ProfileJet> {
        if !self.domain.contains(xi) {
            return Err(QemError::OutsideDomain {
                xi,
                lo: self.domain.lo,
                hi: self.domain.hi,
            });
        }
        self.eval_inner(xi)
    }

    fn eval_inner(&self, xi: f64) -> Result<ProfileJet> {
        match &self.repr {
            Repr::Closed(e) => Ok(e.jet(xi)),
            Repr::Source(s) => s.jet(xi),
            Repr::Potential { h, m } => {
                let hj = h.eval(xi)?;
                if !(hj.value > 0.0) {
                    return Err(QemError::NonPositivePotential { value: hj.value, xi });
                }
                let q = hj.d1 / hj.value;
                Ok(ProfileJet {
                    value: -m * hj.value.ln(),
                    d1: -m * q,
                    d2: -m * (hj.d2 / hj.value - q * q),
                })
            }
            Repr::Offset { base, delta } => {
                let j = base.eval(xi)?;
                Ok(ProfileJet {
                    value: j.value + delta,
                    ..j
                })
            }
            Repr::Scaled { base, factor } => {
                let j = base.eval(xi)?;
                Ok(ProfileJet {
                    value: factor * j.value,
                    d1: factor * j.d1,
                    d2: factor * j.d2,
                })
            }
        }
    }

    pub fn value(&self, xi: f64) -> Result<f64> {
        self.eval(xi).map(|j| j.value)
    }
}

/// A profile given only by values; derivatives come from central differences
/// shrunk to stay inside the domain.
pub struct SampledProfile {
    label: String,
    domain: Interval,
    f: Box<dyn Fn(f64) -> Result<f64> + Send + Sync>,
}

impl SampledProfile {
    pub fn new(
        label: impl Into<String>,
        domain: Interval,
        f: impl Fn(f64) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            domain,
            f: Box::new(f),
        }
    }

    pub fn into_profile(self) -> ScalarProfile {
        let domain = self.domain;
        ScalarProfile::from_source(domain, Arc::new(self))
    }
}

impl fmt::Debug for SampledProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sampled({})", self.label)
    }
}

impl ProfileSource for SampledProfile {
    fn jet(&self, xi: f64) -> Result<ProfileJet> {
        let value = (self.f)(xi)?;
        let mut step = 1e-4 * xi.abs().max(1.0);
        if self.domain.is_bounded() {
            step = step.min(0.25 * self.domain.width());
        }
        if step <= 0.0 {
            return Ok(ProfileJet::constant(value));
        }
        // Shift the three-point stencil inward at the domain ends.
        let center = xi.clamp(self.domain.lo + step, self.domain.hi - step);
        let center = if center.is_finite() { center } else { xi };
        let fm = (self.f)(center - step)?;
        let fc = if center == xi { value } else { (self.f)(center)? };
        let fp = (self.f)(center + step)?;
        let d2 = (fp - 2.0 * fc + fm) / (step * step);
        let d1 = (fp - fm) / (2.0 * step) + d2 * (xi - center);
        Ok(ProfileJet { value, d1, d2 })
    }
}

/// Chain rule for `x ↦ profile(ξ(x))`.
pub fn lift_profile(profile: &ScalarProfile, spec: &InvariantSpec, p: &[f64]) -> Result<FieldJet> {
    let xi = invariant_jet(spec, p);
    let j = profile.eval(xi.value)?;
    let n = xi.grad.len();
    let hess = nalgebra::DMatrix::from_fn(n, n, |a, b| {
        j.d2 * (xi.grad[a] * xi.grad[b]) + j.d1 * xi.hess[(a, b)]
    });
    Ok(FieldJet {
        value: j.value,
        grad: &xi.grad * j.d1,
        hess,
    })
}

/// `f = −m ln h`, the inverse of the change of variables `h = e^{−f/m}`.
///
/// On bounded domains positivity of `h` is probed on a uniform grid; points
/// between probes are still checked at evaluation time.
pub fn potential_from_h(h: &ScalarProfile, m: f64) -> Result<ScalarProfile> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(QemError::InvalidM(m));
    }
    let domain = h.domain();
    let probes = if domain.is_bounded() {
        domain.linspace(257)
    } else {
        let lo = if domain.lo.is_finite() { domain.lo } else { -1.0 };
        let hi = if domain.hi.is_finite() { domain.hi } else { lo.max(0.0) + 1.0 };
        Interval::new(lo, hi)?.linspace(65)
    };
    for xi in probes {
        let v = h.value(xi)?;
        if !(v > 0.0) {
            return Err(QemError::NonPositivePotential { value: v, xi });
        }
    }
    Ok(ScalarProfile {
        domain,
        repr: Repr::Potential {
            h: Box::new(h.clone()),
            m,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{fd_gradient, fd_hessian, Signature};

    fn all_exprs() -> Vec<(ProfileExpr, f64)> {
        vec![
            (ProfileExpr::Constant { value: 2.0 }, 0.3),
            (ProfileExpr::Affine { offset: 1.0, slope: -2.0 }, 0.7),
            (ProfileExpr::Exp { scale: 1.5, rate: -0.7, shift: 0.2 }, 0.4),
            (ProfileExpr::ExpPair { c1: 1.0, r1: 0.3, c2: -0.5, r2: -1.2 }, 0.9),
            (ProfileExpr::Power { scale: 2.0, exponent: 0.5 }, 1.7),
            (ProfileExpr::Power { scale: 1.0, exponent: 3.0 }, -0.6),
            (ProfileExpr::LogAffine { c1: 1.0, c2: 0.5 }, 2.5),
            (ProfileExpr::SinCosLog { c1: 0.3, c2: 1.0, mu: 0.8 }, 1.9),
        ]
    }

    #[test]
    fn derivative_evaluators_match_difference_quotients() {
        for (expr, xi) in all_exprs() {
            let jet = expr.jet(xi);
            let step = 1e-5;
            let fd1 = (expr.jet(xi + step).value - expr.jet(xi - step).value) / (2.0 * step);
            let fd2 = (expr.jet(xi + step).d1 - expr.jet(xi - step).d1) / (2.0 * step);
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
            assert!(rel(fd1, jet.d1) < 1e-6, "{expr:?} d1");
            assert!(rel(fd2, jet.d2) < 1e-6, "{expr:?} d2");
        }
    }

    #[test]
    fn evaluation_outside_domain_fails() {
        let p = ScalarProfile::closed(ProfileExpr::Power { scale: 1.0, exponent: 0.5 });
        assert!(matches!(p.eval(-1.0), Err(QemError::OutsideDomain { .. })));
        let q = ScalarProfile::constant(1.0)
            .restricted(Interval::new(0.0, 1.0).unwrap())
            .unwrap();
        assert!(q.eval(1.5).is_err());
        assert!(q.eval(1.0).is_ok());
    }

    #[test]
    fn lift_examples() {
        let sig = Signature::euclidean(2).unwrap();
        let radial = InvariantSpec::radial(&sig);
        let c = lift_profile(&ScalarProfile::constant(3.0), &radial, &[0.2, 0.5]).unwrap();
        assert_eq!(c.grad.amax(), 0.0);
        assert_eq!(c.hess.amax(), 0.0);

        let id = ScalarProfile::closed(ProfileExpr::Affine { offset: 0.0, slope: 1.0 });
        let j = lift_profile(&id, &radial, &[0.2, 0.5]).unwrap();
        assert_eq!(j.hess, nalgebra::DMatrix::identity(2, 2) * 2.0);

        let e = ScalarProfile::closed(ProfileExpr::Exp { scale: 1.0, rate: -1.0, shift: 0.0 });
        let j = lift_profile(&e, &radial, &[1.0, 0.0]).unwrap();
        let em1 = (-1.0f64).exp();
        assert!((j.grad[0] + 2.0 * em1).abs() < 1e-15);
        assert_eq!(j.grad[1], 0.0);
        // hess = e^{-ξ} ∇ξ∇ξᵀ − e^{-ξ}·2I at ξ = 1, ∇ξ = (2, 0)
        assert!((j.hess[(0, 0)] - (4.0 * em1 - 2.0 * em1)).abs() < 1e-15);
        assert!((j.hess[(1, 1)] + 2.0 * em1).abs() < 1e-15);

        let f = |x: &[f64]| (-(x[0] * x[0] + x[1] * x[1])).exp();
        let g = fd_gradient(&f, &[1.0, 0.0], 1e-5);
        let h = fd_hessian(&f, &[1.0, 0.0], 1e-4);
        assert!((g[0] - j.grad[0]).abs() < 1e-8);
        assert!((h - j.hess).amax() < 1e-6);
    }

    #[test]
    fn potential_examples() {
        let f = potential_from_h(&ScalarProfile::constant(1.0), 3.0).unwrap();
        assert_eq!(f.eval(0.7).unwrap(), ProfileJet::constant(0.0));

        let m = 2.5;
        let h = ScalarProfile::closed(ProfileExpr::Exp { scale: 1.0, rate: -1.0 / m, shift: 0.0 });
        let f = potential_from_h(&h, m).unwrap();
        let j = f.eval(1.3).unwrap();
        assert!((j.value - 1.3).abs() < 1e-14);
        assert!((j.d1 - 1.0).abs() < 1e-14);
        assert!(j.d2.abs() < 1e-14);

        let (c1, r1) = (2.0, 0.4);
        let h = ScalarProfile::closed(ProfileExpr::Exp { scale: c1, rate: r1, shift: 0.0 });
        let f = potential_from_h(&h, m).unwrap();
        let xi = -0.8;
        assert!((f.value(xi).unwrap() + m * (c1.ln() + r1 * xi)).abs() < 1e-14);
    }

    #[test]
    fn potential_rejects_sign_change() {
        let h = ScalarProfile::closed(ProfileExpr::Affine { offset: 0.5, slope: -1.0 })
            .restricted(Interval::new(0.0, 1.0).unwrap())
            .unwrap();
        assert!(matches!(
            potential_from_h(&h, 1.0),
            Err(QemError::NonPositivePotential { .. })
        ));
        assert_eq!(
            potential_from_h(&ScalarProfile::constant(1.0), 0.0).unwrap_err(),
            QemError::InvalidM(0.0)
        );
    }

    #[test]
    fn sampled_profile_differentiates_near_edges() {
        let domain = Interval::new(0.0, 1.0).unwrap();
        let p = SampledProfile::new("cube", domain, |x| Ok(x * x * x)).into_profile();
        for xi in [0.0, 0.5, 1.0] {
            let j = p.eval(xi).unwrap();
            assert!((j.d1 - 3.0 * xi * xi).abs() < 1e-6);
            assert!((j.d2 - 6.0 * xi).abs() < 1e-3);
        }
    }
}
