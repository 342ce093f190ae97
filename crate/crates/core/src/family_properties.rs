//! Cross-module properties of the solution families.

use proptest::prelude::*;

use crate::conformal::{edp_residuals, lambda_from_trace, qem_residual, SolutionCandidate};
use crate::fields::{Interval, ProfileExpr, ScalarProfile};
use crate::fluid::{fluid_decompose, fluid_residual, LaplacianMetric};
use crate::geometry::{Region, Signature};
use crate::reduction::{
    exp_family_roots, family_exp_radial, family_sqrt_radial, family_translation, integrate_h,
    ExpRadial, ExpTranslation, OdeProblem,
};

fn scale(cand: &SolutionCandidate, p: &[f64]) -> f64 {
    let xi = cand.xi(p);
    let phi = cand.phi.value(xi).unwrap();
    1.0 + cand.lambda.value(xi).unwrap().abs() / (phi * phi)
}

fn signature(n: usize, lorentz: bool) -> Signature {
    if lorentz {
        Signature::lorentz(n).unwrap()
    } else {
        Signature::euclidean(n).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn radial_family_solves_the_system(
        n in 2usize..7,
        extra in 0.1..4.0f64,
        alpha in -1.5..1.5f64,
        beta in -0.5..0.5f64,
        c2 in 0.0..2.0f64,
        lorentz in any::<bool>(),
        seed in 0u64..1000,
    ) {
        let m = (n as f64 - 2.0) + extra;
        let sig = signature(n, lorentz);
        let cand = family_exp_radial(&ExpRadial {
            signature: sig, m, alpha, beta, c1: 1.0, c2, domain: None,
        }).unwrap();
        let grid = cand.grid(&Region::unit_ball(n), 20, seed).unwrap();
        for p in &grid.points {
            let s = scale(&cand, p);
            prop_assert!(qem_residual(&cand, p).unwrap().amax() <= 1e-9 * s);
            prop_assert!(edp_residuals(&cand, p).unwrap().max_abs() <= 1e-9 * s);
            let xi = cand.xi(p);
            prop_assert!((lambda_from_trace(&cand, p).unwrap() - cand.lambda.value(xi).unwrap()).abs() <= 1e-9 * s);
        }
    }

    #[test]
    fn translation_family_solves_the_system(
        n in 2usize..6,
        extra in 0.1..4.0f64,
        a in -1.2..1.2f64,
        dir in proptest::collection::vec(-1.0..1.0f64, 5),
        lorentz in any::<bool>(),
        seed in 0u64..1000,
    ) {
        let direction = dir[..n].to_vec();
        prop_assume!(direction.iter().any(|v| v.abs() > 0.1));
        let m = (n as f64 - 2.0) + extra;
        let cand = family_translation(&ExpTranslation {
            signature: signature(n, lorentz), m, direction, a, b: 0.0, c1: 1.0, c2: 0.5, domain: None,
        }).unwrap();
        let grid = cand.grid(&Region::unit_ball(n), 20, seed).unwrap();
        for p in &grid.points {
            prop_assert!(qem_residual(&cand, p).unwrap().amax() <= 1e-9 * scale(&cand, p));
        }
    }

    #[test]
    fn lambda_shift_moves_residual_by_metric(delta in -1.0..1.0f64) {
        let base = family_exp_radial(&ExpRadial::euclidean(4, 3.0, -0.5, 0.0, 1.0, 0.2).unwrap()).unwrap();
        let shifted = base.clone().with_lambda(base.lambda.offset(delta));
        let p = [0.2, -0.1, 0.4, 0.3];
        let phi = base.phi.value(base.xi(&p)).unwrap();
        let d = qem_residual(&shifted, &p).unwrap() - qem_residual(&base, &p).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { -delta / (phi * phi) } else { 0.0 };
                prop_assert!((d[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ode_reproduces_exponential_solutions(
        n in 3usize..6,
        extra in 0.5..4.0f64,
        alpha in -1.0..1.0f64,
    ) {
        let m = (n as f64 - 2.0) + extra;
        let (r1, _) = exp_family_roots(n, m, alpha).unwrap();
        let h = integrate_h(&OdeProblem {
            n, m,
            phi: ScalarProfile::closed(ProfileExpr::Exp { scale: 1.0, rate: alpha, shift: 0.0 }),
            interval: Interval::new(0.0, 1.0).unwrap(),
            h0: 1.0, dh0: r1, step: 1e-3,
        }).unwrap();
        for xi in [0.25, 0.5, 1.0] {
            let want = (r1 * xi).exp();
            prop_assert!(((h.value(xi).unwrap() - want) / want).abs() < 1e-6);
        }
    }

    #[test]
    fn fluid_round_trip(n in 3usize..6, c1 in -0.5..0.5f64, seed in 0u64..1000) {
        let cand = family_sqrt_radial(n, 1.0, c1, 1.0, Interval::new(1.0, 2.0).unwrap()).unwrap();
        let d = fluid_decompose(&cand, LaplacianMetric::Conformal).unwrap();
        let grid = cand.grid(&Region::squared_radius_shell(n, 1.0, 2.0), 20, seed).unwrap();
        for p in &grid.points {
            let (r1, r2) = fluid_residual(&cand, &d, p).unwrap();
            prop_assert!(r1.abs() <= 1e-10 && r2.abs() <= 1e-10);
        }
    }
}
