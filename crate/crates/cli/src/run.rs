use nalgebra::DMatrix;

use qem_core::conformal::{
    conformal_ricci, verify_candidate, Channel, GridMeta, PointResidual,
    ResidualEntry, SolutionCandidate,
};
use qem_core::fields::{Interval, InvariantSpec, ScalarProfile};
use qem_core::fluid::{fluid_decompose, fluid_residual};
use qem_core::geometry::{fd_ricci, Region, DEFAULT_FD_STEP};
use qem_core::reduction::{
    exp_family_roots, family_exp_radial, family_sqrt_radial, family_translation,
    integrate_h_detailed, lambda_profile, triviality_witness, ExpRadial, ExpTranslation,
    OdeProblem, TrivialityWitness,
};
use qem_core::QemError;

use crate::config::{Command, Family, RunConfig};
use crate::report::{CandidateEcho, Report, Summary, Table};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Breach,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::Breach => 1,
        }
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub status: Status,
    pub report: Report,
    pub table: Table,
    /// Description of the worst breach, if any.
    pub breach: Option<String>,
}

fn need<T: Copy>(v: Option<T>, key: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config(format!("{key} is required for this family or command")))
}

/// Candidate and default sampling region described by the config.
pub fn build_candidate(cfg: &RunConfig) -> Result<(SolutionCandidate, Region), CliError> {
    let sig = cfg.signature()?;
    let n = sig.dim();
    let m = cfg.require_m()?;
    let c1 = cfg.c1.unwrap_or(1.0);
    let c2 = cfg.c2.unwrap_or(0.0);
    let (cand, region) = match cfg.family()? {
        Family::ExpRadial => (
            family_exp_radial(&ExpRadial {
                signature: sig,
                m,
                alpha: need(cfg.alpha, "alpha")?,
                beta: cfg.beta.unwrap_or(0.0),
                c1,
                c2,
                domain: cfg.interval,
            })?,
            Region::unit_ball(n),
        ),
        Family::ExpTranslation => (
            family_translation(&ExpTranslation {
                signature: sig,
                m,
                direction: cfg
                    .direction
                    .clone()
                    .ok_or_else(|| CliError::Config("direction is required for exp-translation".into()))?,
                a: need(cfg.a, "a")?,
                b: cfg.b.unwrap_or(0.0),
                c1,
                c2,
                domain: cfg.interval,
            })?,
            Region::unit_ball(n),
        ),
        Family::SqrtRadial => {
            if cfg.signature.is_some() && sig.entries().iter().any(|e| *e < 0) {
                return Err(CliError::Config("sqrt-radial is Euclidean only".into()));
            }
            let interval = cfg.interval.unwrap_or(Interval::new(1.0, 4.0)?);
            (
                family_sqrt_radial(n, m, c1, c2, interval)?,
                Region::squared_radius_shell(n, interval.lo, interval.hi),
            )
        }
        Family::Custom => {
            let block = cfg
                .candidate
                .as_ref()
                .ok_or_else(|| CliError::Config("family custom needs a candidate block".into()))?;
            let spec = block.invariant.build(&sig)?;
            let phi = ScalarProfile::closed(block.phi.clone());
            let h = ScalarProfile::closed(block.h.clone());
            let lambda = match &block.lambda {
                Some(expr) => ScalarProfile::closed(expr.clone()),
                None => lambda_profile(n, m, &spec, &phi, &h)?,
            };
            (
                SolutionCandidate::new("custom", m, spec, phi, h, lambda)?,
                Region::unit_ball(n),
            )
        }
    };
    Ok((apply_offset(cand, cfg), region))
}

fn apply_offset(cand: SolutionCandidate, cfg: &RunConfig) -> SolutionCandidate {
    match cfg.lambda_offset {
        Some(d) if d != 0.0 => {
            let shifted = cand.lambda.offset(d);
            cand.with_lambda(shifted)
        }
        _ => cand,
    }
}

fn echo(cand: &SolutionCandidate, cfg: &RunConfig) -> Result<CandidateEcho, CliError> {
    let roots = match cfg.family {
        Some(Family::ExpRadial) => Some(exp_family_roots(cand.dim(), cand.m, need(cfg.alpha, "alpha")?)?),
        Some(Family::ExpTranslation) => Some(exp_family_roots(cand.dim(), cand.m, need(cfg.a, "a")?)?),
        _ => None,
    };
    Ok(CandidateEcho::of(cand, roots))
}

fn residual_header(n: usize) -> Vec<String> {
    let mut h: Vec<String> = (0..n).map(|k| format!("x{k}")).collect();
    h.extend(["xi", "phi", "h", "lambda", "lambda_trace"].map(String::from));
    for i in 0..n {
        for j in i..n {
            h.push(format!("qem_{i}_{j}"));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            h.push(format!("edp_{i}_{j}"));
        }
    }
    for i in 0..n {
        h.push(format!("edp_{i}_{i}"));
    }
    h
}

fn residual_row(pr: &PointResidual) -> Vec<f64> {
    let n = pr.point.len();
    let mut row = pr.point.clone();
    row.extend([pr.xi, pr.phi, pr.h, pr.lambda, pr.lambda_trace]);
    for i in 0..n {
        for j in i..n {
            row.push(pr.qem[(i, j)]);
        }
    }
    row.extend(pr.edp.off_diagonal.iter().map(|(_, v)| *v));
    row.extend(pr.edp.diagonal.iter().copied());
    row
}

fn describe_breach(e: &ResidualEntry, tol: f64) -> String {
    let eq = match e.channel {
        Channel::Qem => format!("qem[{},{}]", e.i, e.j),
        Channel::EdpOffDiagonal => format!("edp-off-diagonal[{},{}]", e.i, e.j),
        Channel::EdpDiagonal => format!("edp-diagonal[{}]", e.i),
        Channel::LambdaTrace => "lambda-trace".to_string(),
    };
    format!("{eq}: max |residual| {:e} exceeds {tol:e} at point {:?}", e.max_abs, e.worst_point)
}

fn residual_run(cfg: &RunConfig, command: Command) -> Result<Outcome, CliError> {
    let (cand, default_region) = build_candidate(cfg)?;
    let region = cfg.grid.region.clone().unwrap_or(default_region);
    let grid = cand.grid(&region, cfg.grid.count, cfg.grid.seed)?;
    let (report, points) = verify_candidate(&cand, &grid)?;
    let tol = cfg.tolerance();
    let worst = report.worst().cloned();
    let breaches = report.breaches(tol);
    let within = breaches.is_empty();
    let breach = breaches.first().map(|_| describe_breach(worst.as_ref().expect("non-empty"), tol));
    let lambda_gap = report.max_over(Channel::LambdaTrace);

    let mut out = Report::new(command, cfg);
    out.candidate = Some(echo(&cand, cfg)?);
    out.grid = Some(report.grid.clone());
    out.summary = Some(Summary {
        tolerance: tol,
        max_residual: report.max_residual(),
        lambda_trace_gap: Some(lambda_gap),
        worst,
        within_tolerance: within,
    });
    out.residuals = Some(report.entries.clone());

    let mut table = Table {
        header: residual_header(cand.dim()),
        rows: points.iter().map(residual_row).collect(),
    };
    let mut status = if within || command == Command::Generate { Status::Ok } else { Status::Breach };

    if command == Command::Fluid {
        let decomp = fluid_decompose(&cand, cfg.laplacian)?;
        let (mut r1max, mut r2max): (f64, f64) = (0.0, 0.0);
        table.header.extend(["mu", "rho", "fluid_r1", "fluid_r2"].map(String::from));
        let mut rows = Vec::with_capacity(grid.len());
        for (p, row) in grid.points.iter().zip(table.rows.iter_mut()) {
            let xi = cand.xi(p);
            let (mu, rho) = (decomp.mu.value(xi)?, decomp.rho.value(xi)?);
            let (r1, r2) = fluid_residual(&cand, &decomp, p)?;
            r1max = r1max.max(r1.abs());
            r2max = r2max.max(r2.abs());
            row.extend([mu, rho, r1, r2]);
            rows.push(crate::report::FluidRow { xi, mu, rho, r1, r2 });
        }
        let fluid_ok = r1max <= tol && r2max <= tol;
        out.fluid = Some(crate::report::FluidBlock {
            laplacian: decomp.laplacian,
            max_abs_r1: r1max,
            max_abs_r2: r2max,
            within_tolerance: fluid_ok,
            points: rows,
        });
        // The fluid equations are the checked quantity; the quasi-Einstein
        // channels are still reported.
        status = if fluid_ok { Status::Ok } else { Status::Breach };
        return Ok(Outcome {
            status,
            report: out,
            table,
            breach: (!fluid_ok).then(|| format!("fluid: max |r1| {r1max:e}, max |r2| {r2max:e} exceed {tol:e}")),
        });
    }
    Ok(Outcome { status, report: out, table, breach })
}

fn metric_map(cand: &SolutionCandidate) -> impl Fn(&[f64]) -> DMatrix<f64> + '_ {
    move |x| {
        cand.metric(x)
            .unwrap_or_else(|_| DMatrix::from_element(cand.dim(), cand.dim(), f64::NAN))
    }
}

fn oracle_run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (cand, default_region) = build_candidate(cfg)?;
    let region = cfg.grid.region.clone().unwrap_or(default_region);
    let grid = cand.grid(&region, cfg.grid.count, cfg.grid.seed)?;
    let tol = cfg.tolerance();
    let n = cand.dim();
    let mut header: Vec<String> = (0..n).map(|k| format!("x{k}")).collect();
    header.extend(["xi", "max_abs_gap"].map(String::from));
    let mut rows = Vec::with_capacity(grid.len());
    let mut worst = (0.0f64, Vec::new());
    for p in &grid.points {
        let gap = (conformal_ricci(&cand, p)? - fd_ricci(&metric_map(&cand), p, DEFAULT_FD_STEP, None)?).amax();
        if !(gap <= worst.0) {
            worst = (gap, p.clone());
        }
        let mut row = p.clone();
        row.extend([cand.xi(p), gap]);
        rows.push(row);
    }
    let within = worst.0 <= tol;
    let mut out = Report::new(Command::Oracle, cfg);
    out.candidate = Some(echo(&cand, cfg)?);
    out.grid = Some(GridMeta::of(&grid));
    out.oracle = Some(crate::report::OracleBlock {
        fd_step: DEFAULT_FD_STEP,
        max_abs_gap: worst.0,
        worst_point: worst.1.clone(),
    });
    out.summary = Some(Summary {
        tolerance: tol,
        max_residual: worst.0,
        lambda_trace_gap: None,
        worst: None,
        within_tolerance: within,
    });
    Ok(Outcome {
        status: if within { Status::Ok } else { Status::Breach },
        report: out,
        table: Table { header, rows },
        breach: (!within).then(|| format!("oracle: max |Ric - Ric_fd| {:e} exceeds {tol:e} at point {:?}", worst.0, worst.1)),
    })
}

fn ode_run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let sig = cfg.signature()?;
    let n = sig.dim();
    let m = cfg.require_m()?;
    let phi = ScalarProfile::closed(
        cfg.phi.clone().ok_or_else(|| CliError::Config("phi is required for ode".into()))?,
    );
    let interval = cfg.interval.unwrap_or(Interval::new(0.0, 1.0)?);
    let [h0, dh0] = cfg.initial.ok_or_else(|| CliError::Config("initial = [h, h'] is required for ode".into()))?;
    let problem = OdeProblem {
        n,
        m,
        phi: phi.clone(),
        interval,
        h0,
        dh0,
        step: cfg.step,
    };
    let integration = match integrate_h_detailed(&problem) {
        Err(e @ QemError::StepTooCoarse { .. }) => {
            let mut out = Report::new(Command::Ode, cfg);
            out.error = Some(e.to_string());
            return Ok(Outcome {
                status: Status::Breach,
                report: out,
                table: Table::default(),
                breach: Some(e.to_string()),
            });
        }
        other => other?,
    };

    let spec = InvariantSpec::radial(&sig);
    let lambda = lambda_profile(n, m, &spec, &phi, &integration.profile)?;
    let cand = apply_offset(
        SolutionCandidate::new(
            "ode",
            m,
            spec,
            phi.restricted(interval)?,
            integration.profile.clone(),
            lambda,
        )?,
        cfg,
    );
    let euclidean = sig.entries().iter().all(|e| *e > 0);
    let region = match &cfg.grid.region {
        Some(r) => r.clone(),
        None if euclidean && interval.lo >= 0.0 => Region::squared_radius_shell(n, interval.lo, interval.hi),
        None => Region::unit_ball(n),
    };
    let grid = cand.grid(&region, cfg.grid.count, cfg.grid.seed)?;
    let (report, _) = verify_candidate(&cand, &grid)?;
    let tol = cfg.tolerance();
    let within = report.within(tol);

    let mut rows = Vec::new();
    for xi in interval.linspace(cfg.samples.max(2)) {
        let j = integration.profile.eval(xi)?;
        rows.push(vec![xi, j.value, j.d1, j.d2, cand.lambda.value(xi)?]);
    }
    let mut out = Report::new(Command::Ode, cfg);
    out.candidate = Some(CandidateEcho::of(&cand, None));
    out.ode = Some(crate::report::OdeBlock {
        interval,
        steps: integration.steps,
        richardson_agreement: integration.richardson_agreement,
    });
    out.grid = Some(report.grid.clone());
    out.summary = Some(Summary {
        tolerance: tol,
        max_residual: report.max_residual(),
        lambda_trace_gap: Some(report.max_over(Channel::LambdaTrace)),
        worst: report.worst().cloned(),
        within_tolerance: within,
    });
    out.residuals = Some(report.entries.clone());
    Ok(Outcome {
        status: if within { Status::Ok } else { Status::Breach },
        breach: (!within).then(|| describe_breach(report.worst().expect("non-empty"), tol)),
        report: out,
        table: Table {
            header: ["xi", "h", "dh", "d2h", "lambda"].map(String::from).to_vec(),
            rows,
        },
    })
}

fn witness_run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let sig = cfg.signature()?;
    let m = cfg.require_m()?;
    let phi = ScalarProfile::closed(
        cfg.phi.clone().ok_or_else(|| CliError::Config("phi is required for witness".into()))?,
    );
    let interval = cfg.interval.unwrap_or(Interval::new(0.0, 1.0)?);
    let w = triviality_witness(sig.dim(), m, &sig, &phi, &interval.linspace(cfg.samples))?;
    let certified = w.certifies_triviality();
    let mut table = Table {
        header: ["xi", "phi", "dphi", "first_order", "obstruction"].map(String::from).to_vec(),
        rows: Vec::new(),
    };
    if let TrivialityWitness::Obstruction { rows, .. } = &w {
        table.rows = rows.iter().map(|r| vec![r.xi, r.phi, r.dphi, r.first_order, r.obstruction]).collect();
    }
    let mut out = Report::new(Command::Witness, cfg);
    out.witness = Some(w);
    Ok(Outcome {
        status: if certified { Status::Ok } else { Status::Breach },
        report: out,
        table,
        breach: (!certified).then(|| "witness: obstruction vanishes where phi' != 0".to_string()),
    })
}

/// Executes the configured command.
pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let command = cfg.command()?;
    match command {
        Command::Generate | Command::Verify | Command::Fluid => residual_run(cfg, command),
        Command::Oracle => oracle_run(cfg),
        Command::Ode => ode_run(cfg),
        Command::Witness => witness_run(cfg),
    }
}
