//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;

use qem_core::conformal::{
    conformal_ricci, form_gap, lambda_from_trace, qem_residual, verify_candidate, SolutionCandidate,
};
use qem_core::fields::{build_invariant, Interval, InvariantKind, InvariantSpec, ProfileExpr, ScalarProfile};
use qem_core::fluid::{fluid_decompose, fluid_residual, solve_fluid_system, LaplacianMetric};
use qem_core::geometry::{fd_ricci, Region, SampleGrid, Signature, DEFAULT_FD_STEP, DEFAULT_SEED};
use qem_core::reduction::{
    compute_lambda, exp_family_roots, family_exp_radial, family_sqrt_radial, family_translation,
    integrate_h_detailed, triviality_witness, ExpRadial, ExpTranslation, OdeProblem, TrivialityWitness,
};
use qem_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRID: usize = 200;
const EXACT_TOL: f64 = 1e-9;
const STEADY_TOL: f64 = 1e-12;
const ODE_REL_TOL: f64 = 1e-6;
const RICHARDSON_TOL: f64 = 1e-8;
const ORACLE_TOL: f64 = 1e-5;
const S_TOL: f64 = 1e-10;
const WITNESS_TOL: f64 = 1e-12;
const FORM_TOL: f64 = 1e-10;
const FLUID_TOL: f64 = 1e-10;

type Criterion = (&'static str, fn() -> Result<Outcome>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome { pass, detail: detail.into() })
}

fn exp_radial_cases() -> Result<Vec<SolutionCandidate>> {
    [(3, 4.0, -1.0, 0.0, 1.0, 0.0), (4, 3.0, -1.0, 0.0, 1.0, 1.0), (5, 7.0, 0.5, 0.0, 1.0, -0.5)]
        .into_iter()
        .map(|(n, m, a, b, c1, c2)| family_exp_radial(&ExpRadial::euclidean(n, m, a, b, c1, c2)?))
        .collect()
}

fn lightlike() -> Result<SolutionCandidate> {
    family_translation(&ExpTranslation {
        signature: Signature::lorentz(4)?,
        m: 3.0,
        direction: vec![1.0, 1.0, 0.0, 0.0],
        a: 0.8,
        b: 0.0,
        c1: 1.0,
        c2: 0.4,
        domain: None,
    })
}

fn sqrt_interval() -> Interval {
    Interval::new(1.0, 3.0).expect("static interval")
}

fn sqrt_cases() -> Result<Vec<SolutionCandidate>> {
    (3..=5)
        .map(|n| family_sqrt_radial(n, 1.0, 0.3, 1.0, sqrt_interval()))
        .collect()
}

fn sqrt_region(n: usize) -> Region {
    Region::squared_radius_shell(n, 1.0, 3.0)
}

/// Every family candidate with the region it is sampled on.
fn all_candidates() -> Result<Vec<(SolutionCandidate, Region)>> {
    let mut out = Vec::new();
    for c in exp_radial_cases()? {
        let n = c.dim();
        out.push((c, Region::unit_ball(n)));
    }
    out.push((lightlike()?, Region::unit_ball(4)));
    for (sig, dir, a) in [
        (Signature::euclidean(3)?, vec![1.0, 2.0, 0.0], -0.6),
        (Signature::lorentz(3)?, vec![1.0, 0.0, 0.0], 0.5),
    ] {
        out.push((
            family_translation(&ExpTranslation {
                signature: sig,
                m: 2.0,
                direction: dir,
                a,
                b: 0.1,
                c1: 1.0,
                c2: 0.3,
                domain: None,
            })?,
            Region::unit_ball(3),
        ));
    }
    for c in sqrt_cases()? {
        let n = c.dim();
        out.push((c, sqrt_region(n)));
    }
    Ok(out)
}

fn criterion_1() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    for cand in exp_radial_cases()? {
        let start = Instant::now();
        let grid = cand.grid(&Region::unit_ball(cand.dim()), GRID, DEFAULT_SEED)?;
        let mut max: f64 = 0.0;
        for p in &grid.points {
            max = max.max(qem_residual(&cand, p)?.amax());
        }
        slowest = slowest.max(start.elapsed().as_secs_f64());
        worst = worst.max(max);
    }
    outcome(
        worst <= EXACT_TOL && slowest < 1.0,
        format!("max residual {worst:.3e} (tol {EXACT_TOL:e}), slowest case {slowest:.3}s"),
    )
}

fn criterion_2() -> Result<Outcome> {
    let cand = lightlike()?;
    let grid = cand.grid(&Region::unit_ball(4), GRID, DEFAULT_SEED)?;
    let mut lambda: f64 = 0.0;
    for p in &grid.points {
        lambda = lambda
            .max(lambda_from_trace(&cand, p)?.abs())
            .max(cand.lambda.value(cand.xi(p))?.abs());
    }
    let (report, _) = verify_candidate(&cand, &grid)?;
    let res = report.max_residual();
    outcome(
        cand.spec.eps_i0 == 0.0 && lambda <= STEADY_TOL && res <= EXACT_TOL,
        format!("eps_i0 {}, max |lambda| {lambda:.3e}, max residual {res:.3e}", cand.spec.eps_i0),
    )
}

fn criterion_3() -> Result<Outcome> {
    let mut dev: f64 = 0.0;
    let mut res: f64 = 0.0;
    for cand in sqrt_cases()? {
        let n = cand.dim();
        let grid = cand.grid(&sqrt_region(n), GRID, DEFAULT_SEED)?;
        for p in &grid.points {
            dev = dev.max((lambda_from_trace(&cand, p)? - (n as f64 - 2.0)).abs());
        }
        res = res.max(verify_candidate(&cand, &grid)?.0.max_residual());
    }
    outcome(
        dev <= EXACT_TOL && res <= EXACT_TOL,
        format!("max |lambda_trace - (n-2)| {dev:.3e}, max residual {res:.3e}"),
    )
}

fn criterion_4() -> Result<Outcome> {
    let r1 = 1.0 + 3f64.sqrt() / 2.0;
    let interval = Interval::new(0.0, 2.0)?;
    let out = integrate_h_detailed(&OdeProblem {
        n: 3,
        m: 4.0,
        phi: ScalarProfile::closed(ProfileExpr::Exp { scale: 1.0, rate: -1.0, shift: 0.0 }),
        interval,
        h0: 1.0,
        dh0: r1,
        step: 1e-3,
    })?;
    let mut rel: f64 = 0.0;
    for xi in interval.linspace(401) {
        let want = (r1 * xi).exp();
        rel = rel.max(((out.profile.value(xi)? - want) / want).abs());
    }
    let char_root = exp_family_roots(3, 4.0, -1.0)?.0;
    outcome(
        rel <= ODE_REL_TOL && out.richardson_agreement <= RICHARDSON_TOL,
        format!(
            "max rel error vs exp((1+sqrt3/2)xi) {rel:.3e} (tol {ODE_REL_TOL:e}), richardson {:.3e}; \
             characteristic root of the ODE is {char_root:.12}",
            out.richardson_agreement
        ),
    )
}

/// `ḡ` as a plain matrix-valued map for the oracle; undefined points give NaN.
fn metric_of(cand: &SolutionCandidate) -> impl Fn(&[f64]) -> DMatrix<f64> + '_ {
    move |x| {
        cand.metric(x)
            .unwrap_or_else(|_| DMatrix::from_element(cand.dim(), cand.dim(), f64::NAN))
    }
}

fn oracle_gap(cand: &SolutionCandidate, grid: &SampleGrid) -> Result<f64> {
    let mut gap: f64 = 0.0;
    for p in &grid.points {
        let analytic = conformal_ricci(cand, p)?;
        let fd = fd_ricci(&metric_of(cand), p, DEFAULT_FD_STEP, None)?;
        gap = gap.max((analytic - fd).amax());
    }
    Ok(gap)
}

fn phi_only(spec: InvariantSpec, phi: ProfileExpr) -> Result<SolutionCandidate> {
    SolutionCandidate::new(
        "oracle",
        1.0,
        spec,
        ScalarProfile::closed(phi),
        ScalarProfile::constant(1.0),
        ScalarProfile::constant(0.0),
    )
}

fn criterion_5() -> Result<Outcome> {
    let e3 = Signature::euclidean(3)?;
    let radial = InvariantSpec::radial(&e3);
    let sphere = phi_only(radial.clone(), ProfileExpr::Affine { offset: 0.5, slope: 0.5 })?;
    let cases = [
        (
            phi_only(radial.clone(), ProfileExpr::Exp { scale: 1.0, rate: -0.5, shift: 0.0 })?,
            Region::unit_ball(3),
        ),
        (
            phi_only(radial.clone(), ProfileExpr::Power { scale: 1.0, exponent: 0.5 })?,
            sqrt_region(3),
        ),
        (sphere.clone(), Region::unit_ball(3)),
        (
            phi_only(
                InvariantSpec::translation(&Signature::lorentz(3)?, &[0.6, 1.0, -0.4])?,
                ProfileExpr::Exp { scale: 1.0, rate: 0.7, shift: 0.0 },
            )?,
            Region::unit_ball(3),
        ),
    ];
    let mut gap: f64 = 0.0;
    for (cand, region) in &cases {
        gap = gap.max(oracle_gap(cand, &cand.grid(region, 50, DEFAULT_SEED)?)?);
    }
    let mut sphere_gap: f64 = 0.0;
    for p in &sphere.grid(&Region::unit_ball(3), 50, DEFAULT_SEED)?.points {
        let target = sphere.metric(p)? * 2.0;
        let fd = fd_ricci(&metric_of(&sphere), p, DEFAULT_FD_STEP, None)?;
        sphere_gap = sphere_gap
            .max((conformal_ricci(&sphere, p)? - &target).amax())
            .max((fd - target).amax());
    }
    outcome(
        gap <= ORACLE_TOL && sphere_gap <= ORACLE_TOL,
        format!("closed form vs FD {gap:.3e}, sphere vs (n-1)g {sphere_gap:.3e} (tol {ORACLE_TOL:e})"),
    )
}

fn criterion_6() -> Result<Outcome> {
    let mut cands = all_candidates()?;
    let phi = ScalarProfile::closed(ProfileExpr::Exp { scale: 1.0, rate: -0.4, shift: 0.0 });
    let integrated = integrate_h_detailed(&OdeProblem {
        n: 3,
        m: 2.5,
        phi: phi.clone(),
        interval: Interval::new(0.0, 1.0)?,
        h0: 1.0,
        dh0: 0.3,
        step: 1e-3,
    })?;
    let e3 = Signature::euclidean(3)?;
    let spec = InvariantSpec::radial(&e3);
    let lambda = qem_core::reduction::lambda_profile(3, 2.5, &spec, &phi, &integrated.profile)?;
    cands.push((
        SolutionCandidate::new("ode", 2.5, spec, phi.restricted(Interval::new(0.0, 1.0)?)?, integrated.profile, lambda)?,
        Region::unit_ball(3),
    ));
    let mut worst: f64 = 0.0;
    for (cand, region) in &cands {
        let grid = cand.grid(region, GRID, DEFAULT_SEED)?;
        let n = cand.dim();
        for p in &grid.points {
            let xi = cand.xi(p);
            let formula = compute_lambda(n, cand.m, cand.spec.a, cand.spec.s, &cand.phi, &cand.h, xi)?;
            worst = worst.max((formula - lambda_from_trace(cand, p)?).abs());
        }
    }
    outcome(
        worst <= EXACT_TOL,
        format!("{} candidates, max |compute_lambda - lambda_trace| {worst:.3e}", cands.len()),
    )
}

fn criterion_7() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut worst: f64 = 0.0;
    let mut specs = 0;
    while specs < 100 {
        let n = rng.random_range(2..=6);
        let eps: Vec<i8> = (0..n).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect();
        let sig = Signature::new(eps)?;
        let a = rng.random_range(-3.0..3.0);
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let Ok(spec) = build_invariant(InvariantKind::Quadratic, a, &b, &c, &sig) else {
            continue;
        };
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let lhs: f64 = (0..n).map(|k| sig.eps(k) * spec.component_slope(k, p[k]).powi(2)).sum();
        worst = worst.max((lhs - 4.0 * a * spec.value(&p) - spec.s).abs());
        specs += 1;
    }
    outcome(worst <= S_TOL, format!("{specs} specs, max |sum eps (U')^2 - 4a xi - S| {worst:.3e}"))
}

fn criterion_8() -> Result<Outcome> {
    let phi = ScalarProfile::closed(ProfileExpr::Exp { scale: 1.0, rate: -1.0, shift: 0.0 });
    let abscissae = Interval::new(0.0, 1.0)?.linspace(1001);
    let w = triviality_witness(4, 2.0, &Signature::euclidean(4)?, &phi, &abscissae)?;
    let TrivialityWitness::Obstruction { rows, min_abs_obstruction, .. } = &w else {
        return outcome(false, "n=4 witness did not produce an obstruction table");
    };
    let at_one = rows.iter().find(|r| r.xi == 1.0).map(|r| r.obstruction).unwrap_or(f64::NAN);
    let value_err = (at_one + 4.0 * (-1.0f64).exp()).abs();
    let bound = 4.0 * abscissae.iter().map(|x| (-x).exp()).fold(f64::INFINITY, f64::min);
    let n2 = triviality_witness(2, 2.0, &Signature::euclidean(2)?, &phi, &abscissae)?;
    outcome(
        value_err <= WITNESS_TOL
            && *min_abs_obstruction >= bound - WITNESS_TOL
            && n2 == TrivialityWitness::ConstantH,
        format!(
            "A/h at xi=1 off by {value_err:.3e}, min |A/h| {min_abs_obstruction:.6} vs bound {bound:.6}, n=2 -> {}",
            if n2 == TrivialityWitness::ConstantH { "constant h" } else { "unexpected" }
        ),
    )
}

fn criterion_9() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (cand, region) in all_candidates()? {
        let grid = cand.grid(&region, GRID, DEFAULT_SEED)?;
        let mut positive = true;
        for p in &grid.points {
            positive &= cand.h.value(cand.xi(p))? > 0.0;
        }
        if positive {
            worst = worst.max(form_gap(&cand, &grid)?);
            checked += 1;
        }
    }
    outcome(worst <= FORM_TOL && checked > 0, format!("{checked} candidates, max h-form vs f-form gap {worst:.3e}"))
}

fn criterion_10() -> Result<Outcome> {
    let cand = family_sqrt_radial(3, 1.0, 0.3, 1.0, sqrt_interval())?;
    let decomp = fluid_decompose(&cand, LaplacianMetric::Conformal)?;
    let grid = cand.grid(&sqrt_region(3), GRID, DEFAULT_SEED)?;
    let (mut r1, mut r2): (f64, f64) = (0.0, 0.0);
    for p in &grid.points {
        let (a, b) = fluid_residual(&cand, &decomp, p)?;
        r1 = r1.max(a.abs());
        r2 = r2.max(b.abs());
    }
    let (mu, rho) = solve_fluid_system(3, 1.0, 2.0);
    outcome(
        r1 <= FLUID_TOL && r2 <= FLUID_TOL && mu == 2.5 && rho == 0.5,
        format!("max |r1| {r1:.3e}, max |r2| {r2:.3e}, hand case mu={mu} rho={rho}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("radial exponential family exact", criterion_1),
        ("lightlike translation steady", criterion_2),
        ("sqrt family shrinking constant", criterion_3),
        ("ode vs closed form", criterion_4),
        ("oracle equivalence", criterion_5),
        ("lambda trace consistency", criterion_6),
        ("S identity", criterion_7),
        ("triviality witness", criterion_8),
        ("form equivalence", criterion_9),
        ("fluid round trip", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("{} criterion {:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" }, i + 1);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
