//! Static perfect-fluid reading of `m = 1` candidates: density `μ` and
//! pressure `ρ` with `μ − ρ = (n−1)λ` and `(n−2)μ + nρ = (n−1)Δh/h`.

use serde::{Deserialize, Serialize};

use crate::conformal::{conformal_laplacian, SolutionCandidate, CONDITIONING_FLOOR};
use crate::error::{QemError, Result};
use crate::fields::{lift_profile, ProfileJet, SampledProfile, ScalarProfile};

/// Which metric the Laplacian of `h` is taken in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LaplacianMetric {
    /// `Δ_ḡ`, the Laplacian of the conformal metric.
    #[default]
    Conformal,
    /// `Δ_g` of the flat background, kept for comparison.
    Flat,
}

/// `(μ, ρ)` from `λ` and `Δh/h`.
pub fn solve_fluid_system(n: usize, lambda: f64, lap_ratio: f64) -> (f64, f64) {
    let nf = n as f64;
    (0.5 * (lap_ratio + nf * lambda), 0.5 * (lap_ratio - (nf - 2.0) * lambda))
}

/// `Δh` along the invariant: `Δ_g h = h''Q + 2na h'` with `Q = 4aξ + S`,
/// and `Δ_ḡ h = φ²[Δ_g h − (n−2)φ'h'Q/φ]`.
pub fn laplacian_along_invariant(
    n: usize,
    a: f64,
    s: f64,
    metric: LaplacianMetric,
    phi: &ProfileJet,
    h: &ProfileJet,
    xi: f64,
) -> f64 {
    let nf = n as f64;
    let q = 4.0 * a * xi + s;
    let flat = h.d2 * q + 2.0 * nf * a * h.d1;
    match metric {
        LaplacianMetric::Flat => flat,
        LaplacianMetric::Conformal => {
            phi.value * phi.value * (flat - (nf - 2.0) * phi.d1 * h.d1 * q / phi.value)
        }
    }
}

#[derive(Debug, Clone)]
pub struct FluidDecomposition {
    pub n: usize,
    pub laplacian: LaplacianMetric,
    /// Density.
    pub mu: ScalarProfile,
    /// Pressure.
    pub rho: ScalarProfile,
}

pub fn fluid_decompose(cand: &SolutionCandidate, laplacian: LaplacianMetric) -> Result<FluidDecomposition> {
    if cand.m != 1.0 {
        return Err(QemError::FluidRequiresUnitM(cand.m));
    }
    let n = cand.dim();
    let (a, s) = (cand.spec.a, cand.spec.s);
    let domain = cand
        .phi
        .domain()
        .intersect(&cand.h.domain())?
        .intersect(&cand.lambda.domain())?;
    let part = |density: bool| {
        let (phi, h, lambda) = (cand.phi.clone(), cand.h.clone(), cand.lambda.clone());
        let label = if density { "fluid density" } else { "fluid pressure" };
        SampledProfile::new(label, domain, move |xi| {
            let pj = phi.eval(xi)?;
            let hj = h.eval(xi)?;
            if !(hj.value.abs() >= CONDITIONING_FLOOR) {
                return Err(QemError::BelowFloor { which: "h", value: hj.value, xi });
            }
            let ratio = laplacian_along_invariant(n, a, s, laplacian, &pj, &hj, xi) / hj.value;
            let (mu, rho) = solve_fluid_system(n, lambda.value(xi)?, ratio);
            Ok(if density { mu } else { rho })
        })
        .into_profile()
    };
    Ok(FluidDecomposition {
        n,
        laplacian,
        mu: part(true),
        rho: part(false),
    })
}

/// `Δh` at a point, computed from the coordinate Hessian rather than the
/// invariant reduction.
pub fn pointwise_laplacian(cand: &SolutionCandidate, p: &[f64], metric: LaplacianMetric) -> Result<f64> {
    match metric {
        LaplacianMetric::Conformal => conformal_laplacian(cand, p, &cand.h),
        LaplacianMetric::Flat => {
            let jet = lift_profile(&cand.h, &cand.spec, p)?;
            let sig = cand.signature();
            Ok((0..sig.dim()).map(|i| sig.eps(i) * jet.hess[(i, i)]).sum())
        }
    }
}

/// `r₁ = (n−1)λ − (μ−ρ)` and `r₂ = Δh − ((n−2)μ + nρ)h/(n−1)`, with `n` taken
/// from the candidate.
pub fn fluid_residual(
    cand: &SolutionCandidate,
    decomp: &FluidDecomposition,
    p: &[f64],
) -> Result<(f64, f64)> {
    let n = cand.dim() as f64;
    let xi = cand.xi(p);
    let lambda = cand.lambda.value(xi)?;
    let h = cand.h.value(xi)?;
    let mu = decomp.mu.value(xi)?;
    let rho = decomp.rho.value(xi)?;
    let lap = pointwise_laplacian(cand, p, decomp.laplacian)?;
    Ok((
        (n - 1.0) * lambda - (mu - rho),
        lap - ((n - 2.0) * mu + n * rho) * h / (n - 1.0),
    ))
}
