//! Reduction of the PDE system to the ODE
//! `(n−2)hφ'' − mφh'' − 2mφ'h' = 0`, the accompanying λ formula, the
//! closed-form example families and the triviality witness for invariants of
//! the wrong shape.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::conformal::{SolutionCandidate, CONDITIONING_FLOOR};
use crate::error::{QemError, Result};
use crate::fields::{
    Interval, InvariantSpec, ProfileExpr, ProfileJet, ProfileSource, SampledProfile, ScalarProfile,
};
use crate::geometry::Signature;

pub const DEFAULT_ODE_STEP: f64 = 1e-3;
/// Required sup-norm relative agreement between the step and half-step runs.
pub const RICHARDSON_TOLERANCE: f64 = 1e-8;

fn check_m(m: f64) -> Result<()> {
    if m > 0.0 && m.is_finite() {
        Ok(())
    } else {
        Err(QemError::InvalidM(m))
    }
}

fn rhs_from_jet(n: usize, m: f64, phi: &ProfileJet, xi: f64, h: f64, dh: f64) -> Result<f64> {
    if !(phi.value.abs() >= CONDITIONING_FLOOR) {
        return Err(QemError::SingularReduction { xi });
    }
    Ok(((n as f64 - 2.0) * h * phi.d2 - 2.0 * m * phi.d1 * dh) / (m * phi.value))
}

/// `h'' = [(n−2)hφ'' − 2mφ'h'] / (mφ)`.
pub fn ode_rhs(n: usize, m: f64, phi: &ScalarProfile, xi: f64, h: f64, dh: f64) -> Result<f64> {
    check_m(m)?;
    rhs_from_jet(n, m, &phi.eval(xi)?, xi, h, dh)
}

/// Initial value problem for `h` on `[ξ₀, ξ₁]`.
#[derive(Debug, Clone)]
pub struct OdeProblem {
    pub n: usize,
    pub m: f64,
    pub phi: ScalarProfile,
    pub interval: Interval,
    pub h0: f64,
    pub dh0: f64,
    pub step: f64,
}

impl OdeProblem {
    fn validate(&self) -> Result<()> {
        check_m(self.m)?;
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(QemError::InvalidStep { step: self.step });
        }
        if !self.interval.is_bounded() || !(self.interval.width() > 0.0) {
            return Err(QemError::InvalidInterval {
                lo: self.interval.lo,
                hi: self.interval.hi,
            });
        }
        Ok(())
    }
}

/// RK4 nodes `(ξ_i, h_i, h'_i)` on a uniform mesh.
struct Trajectory {
    xs: Vec<f64>,
    hs: Vec<f64>,
    dhs: Vec<f64>,
}

fn rk4(problem: &OdeProblem, steps: usize) -> Result<Trajectory> {
    let OdeProblem { n, m, .. } = *problem;
    let lo = problem.interval.lo;
    let dt = problem.interval.width() / steps as f64;
    let f = |x: f64, h: f64, dh: f64| -> Result<(f64, f64)> {
        Ok((dh, rhs_from_jet(n, m, &problem.phi.eval(x)?, x, h, dh)?))
    };
    let mut xs = Vec::with_capacity(steps + 1);
    let mut hs = Vec::with_capacity(steps + 1);
    let mut dhs = Vec::with_capacity(steps + 1);
    let (mut h, mut dh) = (problem.h0, problem.dh0);
    xs.push(lo);
    hs.push(h);
    dhs.push(dh);
    for i in 0..steps {
        let x = lo + dt * i as f64;
        let k1 = f(x, h, dh)?;
        let k2 = f(x + 0.5 * dt, h + 0.5 * dt * k1.0, dh + 0.5 * dt * k1.1)?;
        let k3 = f(x + 0.5 * dt, h + 0.5 * dt * k2.0, dh + 0.5 * dt * k2.1)?;
        // Pin the last node to the interval end to avoid rounding past it.
        let x_next = if i + 1 == steps { problem.interval.hi } else { lo + dt * (i + 1) as f64 };
        let k4 = f(x_next, h + dt * k3.0, dh + dt * k3.1)?;
        h += dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        dh += dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        xs.push(x_next);
        hs.push(h);
        dhs.push(dh);
    }
    Ok(Trajectory { xs, hs, dhs })
}

/// Dense RK4 solution: cubic Hermite in `(h, h')` between nodes, with `h''`
/// reconstructed from the ODE itself.
pub struct DenseSolution {
    n: usize,
    m: f64,
    phi: ScalarProfile,
    traj: Trajectory,
}

impl fmt::Debug for DenseSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Rk4Dense(n={}, m={}, nodes={}, phi={})",
            self.n,
            self.m,
            self.traj.xs.len(),
            self.phi.describe()
        )
    }
}

impl ProfileSource for DenseSolution {
    fn jet(&self, xi: f64) -> Result<ProfileJet> {
        let xs = &self.traj.xs;
        let last = xs.len() - 1;
        let dt = (xs[last] - xs[0]) / last as f64;
        let i = (((xi - xs[0]) / dt).floor().max(0.0) as usize).min(last - 1);
        let (x0, x1) = (xs[i], xs[i + 1]);
        let w = x1 - x0;
        let t = (xi - x0) / w;
        let (y0, y1) = (self.traj.hs[i], self.traj.hs[i + 1]);
        let (d0, d1) = (self.traj.dhs[i] * w, self.traj.dhs[i + 1] * w);
        let t2 = t * t;
        let t3 = t2 * t;
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * d1;
        let slope = ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * d1)
            / w;
        let d2 = rhs_from_jet(self.n, self.m, &self.phi.eval(xi)?, xi, value, slope)?;
        Ok(ProfileJet {
            value,
            d1: slope,
            d2,
        })
    }
}

/// Result of [`integrate_h_detailed`].
#[derive(Debug, Clone)]
pub struct Integration {
    pub profile: ScalarProfile,
    pub steps: usize,
    /// `max|h_step − h_half| / max|h_half|` over shared nodes.
    pub richardson_agreement: f64,
}

pub fn integrate_h_detailed(problem: &OdeProblem) -> Result<Integration> {
    problem.validate()?;
    let steps = (problem.interval.width() / problem.step).round().max(1.0) as usize;
    let coarse = rk4(problem, steps)?;
    let fine = rk4(problem, 2 * steps)?;
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (i, h) in coarse.hs.iter().enumerate() {
        let hf = fine.hs[2 * i];
        diff = diff.max((h - hf).abs());
        scale = scale.max(hf.abs());
    }
    let agreement = if scale > 0.0 { diff / scale } else { diff };
    if !(agreement <= RICHARDSON_TOLERANCE) {
        return Err(QemError::StepTooCoarse {
            step: problem.step,
            agreement,
            tolerance: RICHARDSON_TOLERANCE,
        });
    }
    let dense = DenseSolution {
        n: problem.n,
        m: problem.m,
        phi: problem.phi.clone(),
        traj: coarse,
    };
    Ok(Integration {
        profile: ScalarProfile::from_source(problem.interval, Arc::new(dense)),
        steps,
        richardson_agreement: agreement,
    })
}

/// Fixed-step RK4 solution of the reduction ODE as a dense profile.
pub fn integrate_h(problem: &OdeProblem) -> Result<ScalarProfile> {
    integrate_h_detailed(problem).map(|i| i.profile)
}

/// `λ = 2aφ[(n−2)φ' − mφh'/h] + [φφ'' − (n−1)φ'² + mφφ'h'/h](4aξ+S) + 2naφφ'`.
pub fn lambda_formula(n: usize, m: f64, a: f64, s: f64, phi: &ProfileJet, h: &ProfileJet, xi: f64) -> f64 {
    let nf = n as f64;
    let (f, f1, f2) = (phi.value, phi.d1, phi.d2);
    let q = h.d1 / h.value;
    2.0 * a * f * ((nf - 2.0) * f1 - m * f * q)
        + (f * f2 - (nf - 1.0) * f1 * f1 + m * f * f1 * q) * (4.0 * a * xi + s)
        + 2.0 * nf * a * f * f1
}

pub fn compute_lambda(
    n: usize,
    m: f64,
    a: f64,
    s: f64,
    phi: &ScalarProfile,
    h: &ScalarProfile,
    xi: f64,
) -> Result<f64> {
    let pj = phi.eval(xi)?;
    let hj = h.eval(xi)?;
    if !(pj.value.abs() >= CONDITIONING_FLOOR) {
        return Err(QemError::BelowFloor { which: "phi", value: pj.value, xi });
    }
    if !(hj.value.abs() >= CONDITIONING_FLOOR) {
        return Err(QemError::BelowFloor { which: "h", value: hj.value, xi });
    }
    Ok(lambda_formula(n, m, a, s, &pj, &hj, xi))
}

/// λ of a candidate with arbitrary φ, h over the given invariant, as a profile.
pub fn lambda_profile(
    n: usize,
    m: f64,
    spec: &InvariantSpec,
    phi: &ScalarProfile,
    h: &ScalarProfile,
) -> Result<ScalarProfile> {
    check_m(m)?;
    let domain = phi.domain().intersect(&h.domain())?;
    let (a, s) = (spec.a, spec.s);
    let (phi, h) = (phi.clone(), h.clone());
    Ok(SampledProfile::new("lambda formula", domain, move |xi| {
        compute_lambda(n, m, a, s, &phi, &h, xi)
    })
    .into_profile())
}

/// Roots of `r² + 2αr − ((n−2)/m)α² = 0`, the characteristic polynomial of
/// the reduction ODE for `φ = e^{αξ+β}`.
pub fn exp_family_roots(n: usize, m: f64, alpha: f64) -> Result<(f64, f64)> {
    check_m(m)?;
    if n < 2 {
        return Err(QemError::DimensionTooSmall(n));
    }
    if !(m > n as f64 - 2.0) {
        return Err(QemError::RootCondition { n, m });
    }
    let spread = alpha.abs() * ((m + (n as f64 - 2.0)) / m).sqrt();
    Ok((-alpha + spread, -alpha - spread))
}

fn exp_pair_zero(c1: f64, r1: f64, c2: f64, r2: f64) -> Option<f64> {
    if r1 == r2 {
        return (c1 + c2 == 0.0).then_some(0.0);
    }
    let ratio = -c2 / c1;
    (c1 != 0.0 && ratio > 0.0).then(|| ratio.ln() / (r1 - r2))
}

/// Parameters of the radial exponential family `φ = e^{αξ+β}`, `ξ = Σ ε_k x_k²`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpRadial {
    pub signature: Signature,
    pub m: f64,
    pub alpha: f64,
    pub beta: f64,
    pub c1: f64,
    pub c2: f64,
    /// Domain of the profiles in ξ; defaults to `[0, ∞)` for Euclidean
    /// signatures and the real line otherwise.
    pub domain: Option<Interval>,
}

impl ExpRadial {
    pub fn euclidean(n: usize, m: f64, alpha: f64, beta: f64, c1: f64, c2: f64) -> Result<Self> {
        Ok(Self {
            signature: Signature::euclidean(n)?,
            m,
            alpha,
            beta,
            c1,
            c2,
            domain: None,
        })
    }
}

fn exp_h_profile(c1: f64, r1: f64, c2: f64, r2: f64, domain: Interval) -> Result<ScalarProfile> {
    if c1 == 0.0 && c2 == 0.0 {
        return Err(QemError::ZeroConstants);
    }
    if let Some(z) = exp_pair_zero(c1, r1, c2, r2) {
        if domain.contains(z) {
            return Err(QemError::PotentialVanishes { xi: z });
        }
    }
    ScalarProfile::closed(ProfileExpr::ExpPair { c1, r1, c2, r2 }).restricted(domain)
}

pub fn family_exp_radial(params: &ExpRadial) -> Result<SolutionCandidate> {
    let sig = &params.signature;
    let n = sig.dim();
    let (r1, r2) = exp_family_roots(n, params.m, params.alpha)?;
    let domain = params.domain.unwrap_or(if sig.entries().iter().all(|e| *e > 0) {
        Interval::positive()
    } else {
        Interval::real_line()
    });
    let spec = InvariantSpec::radial(sig);
    let phi = ScalarProfile::closed(ProfileExpr::Exp {
        scale: 1.0,
        rate: params.alpha,
        shift: params.beta,
    })
    .restricted(domain)?;
    let h = exp_h_profile(params.c1, r1, params.c2, r2, domain)?;
    let lambda = lambda_profile(n, params.m, &spec, &phi, &h)?;
    SolutionCandidate::new(
        format!("exp-radial(n={n}, m={}, alpha={})", params.m, params.alpha),
        params.m,
        spec,
        phi,
        h,
        lambda,
    )
}

/// Translation family `ξ = Σ b_k x_k`, `φ = e^{aξ+b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpTranslation {
    pub signature: Signature,
    pub m: f64,
    pub direction: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub c1: f64,
    pub c2: f64,
    pub domain: Option<Interval>,
}

/// `λ = ε_{i0} a e^{2(aξ+b)} [m h'/h − (n−2)a]`.
pub fn translation_lambda(n: usize, m: f64, eps_i0: f64, a: f64, b: f64, h: &ProfileJet, xi: f64) -> f64 {
    eps_i0 * a * (2.0 * (a * xi + b)).exp() * (m * h.d1 / h.value - (n as f64 - 2.0) * a)
}

pub fn family_translation(params: &ExpTranslation) -> Result<SolutionCandidate> {
    let sig = &params.signature;
    let n = sig.dim();
    let (r1, r2) = exp_family_roots(n, params.m, params.a)?;
    let spec = InvariantSpec::translation(sig, &params.direction)?;
    let domain = params.domain.unwrap_or(Interval::real_line());
    let phi = ScalarProfile::closed(ProfileExpr::Exp {
        scale: 1.0,
        rate: params.a,
        shift: params.b,
    })
    .restricted(domain)?;
    let h = exp_h_profile(params.c1, r1, params.c2, r2, domain)?;
    let lambda = if spec.eps_i0 == 0.0 {
        ScalarProfile::constant(0.0).restricted(domain)?
    } else {
        let (m, eps_i0, a, b) = (params.m, spec.eps_i0, params.a, params.b);
        let h = h.clone();
        SampledProfile::new("translation lambda", domain, move |xi| {
            let hj = h.eval(xi)?;
            if !(hj.value.abs() >= CONDITIONING_FLOOR) {
                return Err(QemError::BelowFloor { which: "h", value: hj.value, xi });
            }
            Ok(translation_lambda(n, m, eps_i0, a, b, &hj, xi))
        })
        .into_profile()
    };
    SolutionCandidate::new(
        format!("exp-translation(n={n}, m={}, a={})", params.m, params.a),
        params.m,
        spec,
        phi,
        h,
        lambda,
    )
}

/// `μ = ½√((n−2)/m)`.
pub fn sqrt_family_mu(n: usize, m: f64) -> f64 {
    0.5 * ((n as f64 - 2.0) / m).sqrt()
}

/// Radial family `φ = √r` on an interval `[r₀, r₁] ⊂ (0, ∞)`.
pub fn family_sqrt_radial(
    n: usize,
    m: f64,
    c1: f64,
    c2: f64,
    interval: Interval,
) -> Result<SolutionCandidate> {
    check_m(m)?;
    let sig = Signature::euclidean(n)?;
    if !(interval.lo > 0.0) || !interval.is_bounded() || !(interval.width() > 0.0) {
        return Err(QemError::InvalidInterval {
            lo: interval.lo,
            hi: interval.hi,
        });
    }
    if c1 == 0.0 && c2 == 0.0 {
        return Err(QemError::ZeroConstants);
    }
    let (h, lambda) = if n == 2 {
        if c2 != 0.0 {
            let z = (-c1 / c2).exp();
            if interval.contains(z) {
                return Err(QemError::PotentialVanishes { xi: z });
            }
        }
        (ProfileExpr::LogAffine { c1, c2 }, 0.0)
    } else {
        let mu = sqrt_family_mu(n, m);
        // c1 sin t + c2 cos t vanishes at t = kπ − atan2(c2, c1).
        let shift = c2.atan2(c1);
        let (t0, t1) = (mu * interval.lo.ln(), mu * interval.hi.ln());
        let k = ((t0 + shift) / std::f64::consts::PI).ceil();
        let t_zero = k * std::f64::consts::PI - shift;
        if t_zero <= t1 {
            return Err(QemError::PotentialVanishes {
                xi: (t_zero / mu).exp(),
            });
        }
        (ProfileExpr::SinCosLog { c1, c2, mu }, n as f64 - 2.0)
    };
    SolutionCandidate::new(
        format!("sqrt-radial(n={n}, m={m})"),
        m,
        InvariantSpec::radial(&sig),
        ScalarProfile::closed(ProfileExpr::Power {
            scale: 1.0,
            exponent: 0.5,
        })
        .restricted(interval)?,
        ScalarProfile::closed(h).restricted(interval)?,
        ScalarProfile::constant(lambda).restricted(interval)?,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessRow {
    pub xi: f64,
    pub phi: f64,
    pub dphi: f64,
    /// `(n−2)hφ' − mφh'` for `h = |φ|^{(n−2)/m}`; zero up to rounding.
    pub first_order: f64,
    /// `[(n−2)hφ'' − mφh'' − 2mφ'h'] / h` for the same `h`.
    pub obstruction: f64,
}

/// Certificate that an invariant `ξ = Σ_{k<n} ε_k x_k²` (or any invariant
/// that forces `(n−2)hφ' = mφh'`) only admits trivial solutions.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum TrivialityWitness {
    /// `n = 2`: the first-order condition reads `mφh' = 0`.
    ConstantH,
    Obstruction {
        n: usize,
        m: f64,
        signature: Signature,
        h_exponent: f64,
        rows: Vec<WitnessRow>,
        min_abs_obstruction: f64,
        /// `(n−2)(1+(n−2)/m)·min φ'²/|φ|` over the rows.
        lower_bound: f64,
    },
}

impl TrivialityWitness {
    /// True when the obstruction never vanishes where `φ' ≠ 0`.
    pub fn certifies_triviality(&self) -> bool {
        match self {
            TrivialityWitness::ConstantH => true,
            TrivialityWitness::Obstruction { rows, .. } => rows
                .iter()
                .all(|r| r.dphi == 0.0 || r.obstruction.abs() > 0.0),
        }
    }
}

/// Closed form `−(n−2)(1 + (n−2)/m) φ'²/φ` of the obstruction.
pub fn obstruction_closed_form(n: usize, m: f64, phi: &ProfileJet) -> f64 {
    let k = n as f64 - 2.0;
    -k * (1.0 + k / m) * phi.d1 * phi.d1 / phi.value
}

pub fn triviality_witness(
    n: usize,
    m: f64,
    sig: &Signature,
    phi: &ScalarProfile,
    abscissae: &[f64],
) -> Result<TrivialityWitness> {
    check_m(m)?;
    if sig.dim() != n {
        return Err(QemError::LengthMismatch {
            what: "signature",
            expected: n,
            got: sig.dim(),
        });
    }
    if abscissae.is_empty() {
        return Err(QemError::WitnessPrecondition("at least one abscissa"));
    }
    let jets = abscissae
        .iter()
        .map(|&xi| phi.eval(xi).map(|j| (xi, j)))
        .collect::<Result<Vec<_>>>()?;
    if jets.iter().all(|(_, j)| j.d1.abs() <= 1e-14) {
        return Err(QemError::VacuousWitness);
    }
    if n == 2 {
        return Ok(TrivialityWitness::ConstantH);
    }

    let k = n as f64 - 2.0;
    let p = k / m;
    let mut rows = Vec::with_capacity(jets.len());
    let mut min_abs = f64::INFINITY;
    let mut min_ratio = f64::INFINITY;
    for (xi, j) in jets {
        if !(j.value.abs() >= CONDITIONING_FLOOR) {
            return Err(QemError::BelowFloor { which: "phi", value: j.value, xi });
        }
        // h = |φ|^p solves the first-order condition; substitute into the ODE.
        let abs_phi = j.value.abs();
        let h = abs_phi.powf(p);
        let q = j.d1 / j.value;
        let dh = p * h * q;
        let d2h = p * h * (j.d2 / j.value + (p - 1.0) * q * q);
        let first_order = k * h * j.d1 - m * j.value * dh;
        let obstruction = (k * h * j.d2 - m * j.value * d2h - 2.0 * m * j.d1 * dh) / h;
        if j.d1 != 0.0 {
            min_abs = min_abs.min(obstruction.abs());
            min_ratio = min_ratio.min(j.d1 * j.d1 / abs_phi);
        }
        rows.push(WitnessRow {
            xi,
            phi: j.value,
            dphi: j.d1,
            first_order,
            obstruction,
        });
    }
    Ok(TrivialityWitness::Obstruction {
        n,
        m,
        signature: sig.clone(),
        h_exponent: p,
        rows,
        min_abs_obstruction: min_abs,
        lower_bound: k * (1.0 + p) * min_ratio,
    })
}
