use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{QemError, Result};
use crate::geometry::{fd_gradient, DomainBox, Region, SampleGrid, Signature, DEFAULT_SEED};

/// Relative fit residual above which a sampler matches neither group.
pub const CLASSIFY_RESIDUAL_LIMIT: f64 = 1e-3;
const CLASSIFY_POINTS: usize = 64;
const A_ZERO_RATIO: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum InvariantClass {
    /// Coefficients normalised so that `a = 1`.
    Quadratic { a: f64, b: Vec<f64>, residual: f64 },
    /// Unit direction, first nonzero entry positive.
    Translation { b: Vec<f64>, residual: f64 },
    Neither { residual: f64 },
}

/// Decides whether `xi` is a function of `Σ a ε_k x_k² + b_k x_k`.
///
/// Every gradient must be parallel to `v_k = 2aε_k x_k + b_k`, which is linear
/// in `θ = (a, b)`: each pair `(i, j)` at each sample gives one row
/// `g_i v_j − g_j v_i = 0`. The fit is the smallest right singular vector of
/// the stacked system, scored by `σ_min / σ_max`. Any monotone outer
/// function only rescales the gradient and drops out.
pub fn classify_invariant<F>(xi: &F, sig: &Signature, domain: &DomainBox) -> Result<InvariantClass>
where
    F: Fn(&[f64]) -> f64,
{
    let n = sig.dim();
    if domain.dim() != n {
        return Err(QemError::LengthMismatch {
            what: "domain box",
            expected: n,
            got: domain.dim(),
        });
    }
    let width = domain
        .bounds
        .iter()
        .fold(0.0f64, |acc, [lo, hi]| acc.max(hi - lo));
    let step = 1e-4 * width.max(1e-6);
    let inner = DomainBox::new(
        domain
            .bounds
            .iter()
            .map(|[lo, hi]| {
                let margin = (2.0 * step).min(0.25 * (hi - lo));
                [lo + margin, hi - margin]
            })
            .collect(),
    )?;
    let grid = SampleGrid::generate(
        &Region::Box {
            bounds: inner.bounds,
        },
        CLASSIFY_POINTS,
        DEFAULT_SEED,
        |_| true,
    )?;

    let grads: Vec<Vec<f64>> = grid.points.iter().map(|p| fd_gradient(xi, p, step)).collect();
    let norms: Vec<f64> = grads
        .iter()
        .map(|g| g.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let largest = norms.iter().cloned().fold(0.0, f64::max);
    if !(largest > 1e-10) {
        return Err(QemError::ConstantSampler);
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for ((p, g), norm) in grid.points.iter().zip(&grads).zip(&norms) {
        if *norm <= 1e-8 * largest {
            continue;
        }
        let g: Vec<f64> = g.iter().map(|v| v / norm).collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let mut row = vec![0.0; n + 1];
                row[0] = 2.0 * (g[i] * sig.eps(j) * p[j] - g[j] * sig.eps(i) * p[i]);
                row[1 + j] += g[i];
                row[1 + i] -= g[j];
                rows.push(row);
            }
        }
    }
    if rows.is_empty() {
        // n must be ≥ 2, so this only happens when every gradient vanished.
        return Err(QemError::ConstantSampler);
    }
    let m = DMatrix::from_fn(rows.len(), n + 1, |r, c| rows[r][c]);
    // Work with the normal matrix so the null vector is always available even
    // when there are fewer rows than unknowns.
    let gram = m.transpose() * &m;
    let eig = gram.symmetric_eigen();
    let (imin, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if *v < acc.1 { (i, *v) } else { acc });
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let lmin = eig.eigenvalues[imin].max(0.0);
    let residual = if lmax > 0.0 { (lmin / lmax).sqrt() } else { 0.0 };
    if residual > CLASSIFY_RESIDUAL_LIMIT {
        return Ok(InvariantClass::Neither { residual });
    }

    let theta: Vec<f64> = eig.eigenvectors.column(imin).iter().cloned().collect();
    let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
    let a = theta[0];
    if a.abs() <= A_ZERO_RATIO * norm {
        let mut b: Vec<f64> = theta[1..].iter().map(|v| v / norm).collect();
        let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        b.iter_mut().for_each(|v| *v /= b_norm);
        if let Some(first) = b.iter().find(|v| v.abs() > 1e-9).copied() {
            if first < 0.0 {
                b.iter_mut().for_each(|v| *v = -*v);
            }
        }
        b.iter_mut().for_each(|v| {
            if v.abs() < 1e-12 {
                *v = 0.0
            }
        });
        Ok(InvariantClass::Translation { b, residual })
    } else {
        Ok(InvariantClass::Quadratic {
            a: 1.0,
            b: theta[1..].iter().map(|v| v / a).collect(),
            residual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::invariant::{build_invariant, InvariantKind};
    use proptest::prelude::*;

    #[test]
    fn radial_sampler_is_quadratic() {
        let sig = Signature::lorentz(3).unwrap();
        let xi = |x: &[f64]| (0..3).map(|k| sig.eps(k) * x[k] * x[k]).sum::<f64>();
        match classify_invariant(&xi, &sig, &DomainBox::cube(3, 1.0)).unwrap() {
            InvariantClass::Quadratic { a, b, .. } => {
                assert_eq!(a, 1.0);
                assert!(b.iter().all(|v| v.abs() < 1e-8), "{b:?}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tanh_of_linear_is_translation() {
        let sig = Signature::euclidean(3).unwrap();
        let xi = |x: &[f64]| (x[0] + x[1]).tanh();
        match classify_invariant(&xi, &sig, &DomainBox::cube(3, 1.0)).unwrap() {
            InvariantClass::Translation { b, .. } => {
                let s = 0.5f64.sqrt();
                assert!((b[0] - s).abs() < 1e-6 && (b[1] - s).abs() < 1e-6 && b[2].abs() < 1e-6, "{b:?}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mixed_and_product_samplers_are_neither() {
        let sig = Signature::euclidean(3).unwrap();
        let domain = DomainBox::cube(3, 1.0);
        let mixed = |x: &[f64]| x[0] * x[0] + x[1];
        assert!(matches!(
            classify_invariant(&mixed, &sig, &domain).unwrap(),
            InvariantClass::Neither { residual } if residual > CLASSIFY_RESIDUAL_LIMIT
        ));
        let product = |x: &[f64]| x[0] * x[1];
        assert!(matches!(
            classify_invariant(&product, &sig, &domain).unwrap(),
            InvariantClass::Neither { .. }
        ));
    }

    #[test]
    fn constant_sampler_is_an_error() {
        let sig = Signature::euclidean(2).unwrap();
        assert_eq!(
            classify_invariant(&|_: &[f64]| 4.0, &sig, &DomainBox::cube(2, 1.0)),
            Err(QemError::ConstantSampler)
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn round_trip_recovers_coefficients(
            eps in proptest::collection::vec(prop_oneof![Just(-1i8), Just(1i8)], 3),
            quadratic in any::<bool>(),
            a in 0.3..2.0f64,
            b in proptest::collection::vec(-2.0..2.0f64, 3),
            c in proptest::collection::vec(-1.0..1.0f64, 3),
        ) {
            prop_assume!(b.iter().map(|v| v * v).sum::<f64>() > 0.1);
            let sig = Signature::new(eps).unwrap();
            let (kind, a) = if quadratic { (InvariantKind::Quadratic, a) } else { (InvariantKind::Translation, 0.0) };
            let spec = build_invariant(kind, a, &b, &c, &sig).unwrap();
            let xi = |x: &[f64]| spec.value(x);
            let class = classify_invariant(&xi, &sig, &DomainBox::cube(3, 1.0)).unwrap();
            match (kind, class) {
                (InvariantKind::Quadratic, InvariantClass::Quadratic { b: got, .. }) => {
                    for k in 0..3 {
                        prop_assert!((got[k] - b[k] / a).abs() < 1e-6);
                    }
                }
                (InvariantKind::Translation, InvariantClass::Translation { b: got, .. }) => {
                    let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let sign = if b.iter().find(|v| v.abs() > 1e-9).unwrap() < &0.0 { -1.0 } else { 1.0 };
                    for k in 0..3 {
                        prop_assert!((got[k] - sign * b[k] / norm).abs() < 1e-6);
                    }
                }
                (k, other) => prop_assert!(false, "{k:?} classified as {other:?}"),
            }
        }
    }
}
