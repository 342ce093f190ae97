//! Closed-form curvature of `ḡ = g/φ²` over the flat background and the
//! quasi-Einstein residuals built from it.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{QemError, Result};
use crate::fields::{lift_profile, potential_from_h, FieldJet, InvariantSpec, ScalarProfile};
use crate::geometry::{flat_metric, Region, SampleGrid, Signature};

/// `|φ|` and `|h|` must stay above this on every evaluated point.
pub const CONDITIONING_FLOOR: f64 = 1e-6;

/// A conformally flat candidate `(ḡ = g/φ(ξ)², h(ξ), λ(ξ))`.
#[derive(Debug, Clone)]
pub struct SolutionCandidate {
    pub label: String,
    /// In `(0, ∞]`; `∞` is only meaningful for the f-form residual.
    pub m: f64,
    pub spec: InvariantSpec,
    pub phi: ScalarProfile,
    pub h: ScalarProfile,
    pub lambda: ScalarProfile,
    /// Explicit potential `f`; derived from `h` when absent.
    pub potential: Option<ScalarProfile>,
}

impl SolutionCandidate {
    pub fn new(
        label: impl Into<String>,
        m: f64,
        spec: InvariantSpec,
        phi: ScalarProfile,
        h: ScalarProfile,
        lambda: ScalarProfile,
    ) -> Result<Self> {
        if !(m > 0.0) {
            return Err(QemError::InvalidM(m));
        }
        Ok(Self {
            label: label.into(),
            m,
            spec,
            phi,
            h,
            lambda,
            potential: None,
        })
    }

    pub fn with_potential(mut self, f: ScalarProfile) -> Self {
        self.potential = Some(f);
        self
    }

    pub fn with_lambda(mut self, lambda: ScalarProfile) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn signature(&self) -> &Signature {
        &self.spec.signature
    }

    pub fn xi(&self, p: &[f64]) -> f64 {
        self.spec.value(p)
    }

    /// `ḡ(p) = g/φ(ξ(p))²`.
    pub fn metric(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let phi = self.phi.value(self.xi(p))?;
        Ok(flat_metric(self.signature()) / (phi * phi))
    }

    /// Whether every profile is defined and well conditioned at `p`.
    pub fn admits(&self, p: &[f64]) -> bool {
        let xi = self.xi(p);
        let ok = |prof: &ScalarProfile, floor: bool| match prof.value(xi) {
            Ok(v) => v.is_finite() && (!floor || v.abs() >= CONDITIONING_FLOOR),
            Err(_) => false,
        };
        ok(&self.phi, true) && ok(&self.h, true) && ok(&self.lambda, false)
    }

    /// Seeded grid over `region` restricted to points the candidate admits.
    pub fn grid(&self, region: &Region, count: usize, seed: u64) -> Result<SampleGrid> {
        if region.dim() != self.dim() {
            return Err(QemError::LengthMismatch {
                what: "region",
                expected: self.dim(),
                got: region.dim(),
            });
        }
        SampleGrid::generate(region, count, seed, |p| self.admits(p))
    }

    fn phi_jet(&self, p: &[f64]) -> Result<FieldJet> {
        let jet = lift_profile(&self.phi, &self.spec, p)?;
        if !(jet.value.abs() >= CONDITIONING_FLOOR) {
            return Err(QemError::BelowFloor {
                which: "phi",
                value: jet.value,
                xi: self.xi(p),
            });
        }
        Ok(jet)
    }

    fn h_jet(&self, p: &[f64]) -> Result<FieldJet> {
        let jet = lift_profile(&self.h, &self.spec, p)?;
        if !(jet.value.abs() >= CONDITIONING_FLOOR) {
            return Err(QemError::BelowFloor {
                which: "h",
                value: jet.value,
                xi: self.xi(p),
            });
        }
        Ok(jet)
    }

    fn finite_m(&self) -> Result<f64> {
        if self.m.is_finite() {
            Ok(self.m)
        } else {
            Err(QemError::InvalidM(self.m))
        }
    }

    /// `f` as a profile: the explicit potential, or `−m ln h`.
    pub fn f_profile(&self) -> Result<ScalarProfile> {
        match &self.potential {
            Some(f) => Ok(f.clone()),
            None if self.m.is_finite() => potential_from_h(&self.h, self.m),
            None => Err(QemError::MissingPotential),
        }
    }
}

/// `(Δ_g u, |∇_g u|²)` for a field jet over the flat metric.
pub fn laplacian_gradnorm(field: &FieldJet, sig: &Signature) -> (f64, f64) {
    let mut lap = 0.0;
    let mut grad2 = 0.0;
    for k in 0..sig.dim() {
        lap += sig.eps(k) * field.hess[(k, k)];
        grad2 += sig.eps(k) * field.grad[k] * field.grad[k];
    }
    (lap, grad2)
}

/// `Ric_ḡ = φ⁻²{(n−2)φ Hess_g φ + [φΔ_gφ − (n−1)|∇_gφ|²] g}` for flat `g`.
pub fn ricci_from_phi(sig: &Signature, phi: &FieldJet) -> DMatrix<f64> {
    let n = sig.dim() as f64;
    let (lap, grad2) = laplacian_gradnorm(phi, sig);
    let scalar = phi.value * lap - (n - 1.0) * grad2;
    let mut ric = &phi.hess * ((n - 2.0) * phi.value);
    for k in 0..sig.dim() {
        ric[(k, k)] += scalar * sig.eps(k);
    }
    ric / (phi.value * phi.value)
}

/// `Hess_ḡ u` in the coordinate frame, from the jets of `φ` and `u`.
pub fn hessian_from_jets(sig: &Signature, phi: &FieldJet, field: &FieldJet) -> DMatrix<f64> {
    let n = sig.dim();
    let dphi = &phi.grad / phi.value;
    let cross: f64 = (0..n).map(|k| sig.eps(k) * dphi[k] * field.grad[k]).sum();
    DMatrix::from_fn(n, n, |i, j| {
        let base = field.hess[(i, j)] + (dphi[j] * field.grad[i] + dphi[i] * field.grad[j]);
        if i == j {
            base - sig.eps(i) * cross
        } else {
            base
        }
    })
}

pub fn conformal_ricci(cand: &SolutionCandidate, p: &[f64]) -> Result<DMatrix<f64>> {
    Ok(ricci_from_phi(cand.signature(), &cand.phi_jet(p)?))
}

/// `Hess_ḡ` of `field ∘ ξ`.
pub fn conformal_hessian(
    cand: &SolutionCandidate,
    p: &[f64],
    field: &ScalarProfile,
) -> Result<DMatrix<f64>> {
    let phi = cand.phi_jet(p)?;
    let u = lift_profile(field, &cand.spec, p)?;
    Ok(hessian_from_jets(cand.signature(), &phi, &u))
}

/// `Δ_ḡ u = φ² Σ ε_i (Hess_ḡ u)_ii`.
pub fn conformal_laplacian(
    cand: &SolutionCandidate,
    p: &[f64],
    field: &ScalarProfile,
) -> Result<f64> {
    let phi = cand.phi_jet(p)?;
    let hess = conformal_hessian(cand, p, field)?;
    let sig = cand.signature();
    Ok(phi.value * phi.value * (0..sig.dim()).map(|i| sig.eps(i) * hess[(i, i)]).sum::<f64>())
}

fn einstein_part(cand: &SolutionCandidate, p: &[f64]) -> Result<(DMatrix<f64>, FieldJet)> {
    let m = cand.finite_m()?;
    let sig = cand.signature();
    let phi = cand.phi_jet(p)?;
    let h = cand.h_jet(p)?;
    let ric = ricci_from_phi(sig, &phi);
    let hess = hessian_from_jets(sig, &phi, &h);
    Ok((ric - hess * (m / h.value), phi))
}

/// `Ric_ḡ − (m/h) Hess_ḡ h − λ ḡ` at `p`.
pub fn qem_residual(cand: &SolutionCandidate, p: &[f64]) -> Result<DMatrix<f64>> {
    let (lhs, phi) = einstein_part(cand, p)?;
    let lambda = cand.lambda.value(cand.xi(p))?;
    Ok(lhs - flat_metric(cand.signature()) * (lambda / (phi.value * phi.value)))
}

/// `Ric_ḡ + Hess_ḡ f − (1/m) df⊗df − λ ḡ` with `f = −m ln h` (or the
/// candidate's explicit potential); the `1/m` term is dropped for `m = ∞`.
pub fn qem_residual_f_form(cand: &SolutionCandidate, p: &[f64]) -> Result<DMatrix<f64>> {
    let f = cand.f_profile()?;
    f_form_with(cand, &f, p)
}

fn f_form_with(cand: &SolutionCandidate, f: &ScalarProfile, p: &[f64]) -> Result<DMatrix<f64>> {
    let sig = cand.signature();
    let phi = cand.phi_jet(p)?;
    let fj = lift_profile(f, &cand.spec, p)?;
    let lambda = cand.lambda.value(cand.xi(p))?;
    let mut out = ricci_from_phi(sig, &phi) + hessian_from_jets(sig, &phi, &fj);
    if cand.m.is_finite() {
        out -= &fj.grad * fj.grad.transpose() / cand.m;
    }
    Ok(out - flat_metric(sig) * (lambda / (phi.value * phi.value)))
}

/// Component-wise form of the equation after clearing denominators.
///
/// `off_diagonal[(i, j)]` is `φh` times the tensor residual and `diagonal[i]`
/// is `φ²h` times it, so both vanish together with [`qem_residual`].
#[derive(Debug, Clone, PartialEq)]
pub struct EdpResiduals {
    pub off_diagonal: Vec<((usize, usize), f64)>,
    pub diagonal: Vec<f64>,
}

impl EdpResiduals {
    pub fn max_abs(&self) -> f64 {
        self.off_diagonal
            .iter()
            .map(|(_, v)| v.abs())
            .chain(self.diagonal.iter().map(|v| v.abs()))
            .fold(0.0, f64::max)
    }
}

pub fn edp_residuals(cand: &SolutionCandidate, p: &[f64]) -> Result<EdpResiduals> {
    let m = cand.finite_m()?;
    let sig = cand.signature();
    let n = sig.dim();
    let nf = n as f64;
    let phi = cand.phi_jet(p)?;
    let h = cand.h_jet(p)?;
    let lambda = cand.lambda.value(cand.xi(p))?;
    let (f, hv) = (phi.value, h.value);

    let mut off_diagonal = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let r = (nf - 2.0) * hv * phi.hess[(i, j)]
                - m * (f * h.hess[(i, j)] + phi.grad[j] * h.grad[i] + phi.grad[i] * h.grad[j]);
            off_diagonal.push(((i, j), r));
        }
    }

    let mut flat_sum = 0.0;
    let mut mixed_sum = 0.0;
    for k in 0..n {
        let e = sig.eps(k);
        flat_sum += e * (f * phi.hess[(k, k)] - (nf - 1.0) * phi.grad[k] * phi.grad[k]);
        mixed_sum += e * f * phi.grad[k] * h.grad[k];
    }
    let diagonal = (0..n)
        .map(|i| {
            let e = sig.eps(i);
            (nf - 2.0) * hv * f * phi.hess[(i, i)] + e * hv * flat_sum
                - m * (f * f * h.hess[(i, i)] + 2.0 * f * phi.grad[i] * h.grad[i] - e * mixed_sum)
                - e * lambda * hv
        })
        .collect();
    Ok(EdpResiduals {
        off_diagonal,
        diagonal,
    })
}

/// `λ = (1/n) tr_ḡ (Ric_ḡ − (m/h) Hess_ḡ h)`.
pub fn lambda_from_trace(cand: &SolutionCandidate, p: &[f64]) -> Result<f64> {
    let (lhs, phi) = einstein_part(cand, p)?;
    let sig = cand.signature();
    let tr: f64 = (0..sig.dim()).map(|i| sig.eps(i) * lhs[(i, i)]).sum();
    Ok(phi.value * phi.value * tr / sig.dim() as f64)
}

/// Residual channels tracked over a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel {
    /// Entry `(i, j)` of the tensor residual.
    Qem,
    EdpOffDiagonal,
    EdpDiagonal,
    /// `|λ_trace − λ(ξ)|`.
    LambdaTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualEntry {
    pub channel: Channel,
    pub i: usize,
    pub j: usize,
    pub max_abs: f64,
    pub rms: f64,
    pub worst_point: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridMeta {
    pub seed: u64,
    pub region: Region,
    pub count: usize,
}

impl GridMeta {
    pub fn of(grid: &SampleGrid) -> Self {
        Self {
            seed: grid.seed,
            region: grid.region.clone(),
            count: grid.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub entries: Vec<ResidualEntry>,
    pub grid: GridMeta,
}

impl ResidualReport {
    pub fn max_over(&self, channel: Channel) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.channel == channel)
            .map(|e| e.max_abs)
            .fold(0.0, f64::max)
    }

    pub fn max_residual(&self) -> f64 {
        self.entries.iter().map(|e| e.max_abs).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&ResidualEntry> {
        self.entries
            .iter()
            .max_by(|a, b| a.max_abs.total_cmp(&b.max_abs))
    }

    /// Entries whose max exceeds `tol`.
    pub fn breaches(&self, tol: f64) -> Vec<&ResidualEntry> {
        self.entries.iter().filter(|e| !(e.max_abs <= tol)).collect()
    }

    pub fn within(&self, tol: f64) -> bool {
        self.breaches(tol).is_empty()
    }
}

/// Everything evaluated at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResidual {
    pub point: Vec<f64>,
    pub xi: f64,
    pub phi: f64,
    pub h: f64,
    pub lambda: f64,
    pub lambda_trace: f64,
    pub qem: DMatrix<f64>,
    pub edp: EdpResiduals,
}

pub fn evaluate_point(cand: &SolutionCandidate, p: &[f64]) -> Result<PointResidual> {
    let xi = cand.xi(p);
    Ok(PointResidual {
        point: p.to_vec(),
        xi,
        phi: cand.phi.value(xi)?,
        h: cand.h.value(xi)?,
        lambda: cand.lambda.value(xi)?,
        lambda_trace: lambda_from_trace(cand, p)?,
        qem: qem_residual(cand, p)?,
        edp: edp_residuals(cand, p)?,
    })
}

#[derive(Debug, Clone)]
struct Accumulator {
    max_abs: f64,
    sum_sq: f64,
    count: usize,
    worst_point: Vec<f64>,
}

impl Accumulator {
    fn new() -> Self {
        Self {
            max_abs: 0.0,
            sum_sq: 0.0,
            count: 0,
            worst_point: Vec::new(),
        }
    }

    fn push(&mut self, value: f64, p: &[f64]) {
        let a = value.abs();
        if self.count == 0 || a > self.max_abs || a.is_nan() {
            self.max_abs = if a.is_nan() { f64::NAN } else { a };
            self.worst_point = p.to_vec();
        }
        self.sum_sq += value * value;
        self.count += 1;
    }

    fn finish(self, channel: Channel, i: usize, j: usize) -> ResidualEntry {
        ResidualEntry {
            channel,
            i,
            j,
            max_abs: self.max_abs,
            rms: if self.count > 0 {
                (self.sum_sq / self.count as f64).sqrt()
            } else {
                0.0
            },
            worst_point: self.worst_point,
        }
    }
}

/// Evaluates every channel at every grid point.
pub fn verify_candidate(
    cand: &SolutionCandidate,
    grid: &SampleGrid,
) -> Result<(ResidualReport, Vec<PointResidual>)> {
    let n = cand.dim();
    let points = grid
        .points
        .iter()
        .map(|p| evaluate_point(cand, p))
        .collect::<Result<Vec<_>>>()?;

    let mut qem = vec![Accumulator::new(); n * n];
    let mut off = vec![Accumulator::new(); n * n];
    let mut diag = vec![Accumulator::new(); n];
    let mut trace = Accumulator::new();
    for pr in &points {
        for i in 0..n {
            for j in i..n {
                qem[i * n + j].push(pr.qem[(i, j)], &pr.point);
            }
        }
        for ((i, j), v) in &pr.edp.off_diagonal {
            off[i * n + j].push(*v, &pr.point);
        }
        for (i, v) in pr.edp.diagonal.iter().enumerate() {
            diag[i].push(*v, &pr.point);
        }
        trace.push(pr.lambda_trace - pr.lambda, &pr.point);
    }

    let mut entries = Vec::new();
    for i in 0..n {
        for j in i..n {
            entries.push(qem[i * n + j].clone().finish(Channel::Qem, i, j));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            entries.push(off[i * n + j].clone().finish(Channel::EdpOffDiagonal, i, j));
        }
    }
    for (i, acc) in diag.into_iter().enumerate() {
        entries.push(acc.finish(Channel::EdpDiagonal, i, i));
    }
    entries.push(trace.finish(Channel::LambdaTrace, 0, 0));

    Ok((
        ResidualReport {
            entries,
            grid: GridMeta::of(grid),
        },
        points,
    ))
}

/// Largest entrywise gap between the h-form and f-form residuals over a grid.
pub fn form_gap(cand: &SolutionCandidate, grid: &SampleGrid) -> Result<f64> {
    let f = cand.f_profile()?;
    let mut gap: f64 = 0.0;
    for p in &grid.points {
        let d = qem_residual(cand, p)? - f_form_with(cand, &f, p)?;
        gap = gap.max(d.amax());
    }
    Ok(gap)
}
