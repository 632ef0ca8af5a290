//! Experiment execution: resolves the config, runs the requested kind, and
//! returns the output files as (name, contents) pairs. Files are written by
//! the caller in one pass at the end of the run.
//!
//! Every run produces `manifest.toml` (the resolved config, seed and library
//! version) and `conditions.csv` (each sampled regularity condition with its
//! measured value, threshold and margin). Result files per kind:
//!
//! * `solve-eq`: `solution.csv` (`node_time, x_*`, plus `exact`/`error`
//!   columns when the problem registers a closed form)
//! * `funnel`: `funnel.csv` (`sample_id, node_time, x_*, w_*, eq_residual,
//!   incl_residual`) and `structure.csv` (per-node cross-section gaps)
//! * `nesting-ladder`: `nesting.csv` (`n, r_n, semidistance, defect_bound`)
//! * `periodic-volterra`: `periodic.csv` (one row: `x0_*`, residuals,
//!   iterations, contraction estimate) and `orbit.csv` in the funnel format
//! * `periodic-hammerstein`: `solution.csv` and `hammerstein.csv`
//! * `check-conditions`: `conditions.csv` only
//! * `convergence-table`: `table.csv` (`nodes, sup_error, ratio`)

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use volterra_core::inclusion::{
    check_e1, defect_constant, nesting_report, sample_funnel, structure_diagnostics, Funnel,
    SelectionStrategy, SetField,
};
use volterra_core::kernel::{Kernel, KernelDomain, QExponent};
use volterra_core::mesh::{Path, TimeMesh};
use volterra_core::operator::apply_volterra;
use volterra_core::periodic::{
    check_contraction_condition, check_hammerstein_condition, find_periodic_volterra,
    solve_hammerstein_periodic, ConditionPolicy, Rhs, StableFamily,
};
use volterra_core::solver::{apriori_bound, selection_of, solve_equation, SolverConfig};
use volterra_core::{Error as CoreError, GrowthData};

use crate::catalog::{resolve_field, resolve_problem, ResolvedProblem};
use crate::config::{ExperimentConfig, Kind};

/// Failures mapped to process exit codes: config/validation (2),
/// solver failure (3), I/O (4).
#[derive(Debug)]
pub enum RunError {
    Config(String),
    Solver(String),
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Solver(_) => 3,
            RunError::Io(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            RunError::Config(m) | RunError::Solver(m) | RunError::Io(m) => m,
        }
    }
}

fn core_error(e: CoreError) -> RunError {
    match e {
        CoreError::NonConvergence { .. }
        | CoreError::NumericFailure(_)
        | CoreError::EmptyFunnel(_) => RunError::Solver(e.to_string()),
        other => RunError::Config(other.to_string()),
    }
}

pub struct RunOutput {
    pub files: Vec<(String, String)>,
    pub summary: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    kind: &'static str,
    seed: u64,
    library_version: &'static str,
    config: &'a ExperimentConfig,
}

pub fn run_experiment(
    kind: Kind,
    mut config: ExperimentConfig,
    seed_override: Option<u64>,
) -> Result<RunOutput, RunError> {
    if let Some(seed) = seed_override {
        config.seed = seed;
    }
    config.validate(kind).map_err(RunError::Config)?;
    let mesh = TimeMesh::new(
        (0..config.mesh.nodes)
            .map(|i| config.mesh.t_end * i as f64 / (config.mesh.nodes - 1) as f64)
            .collect(),
        config.mesh.dim,
    )
    .map_err(core_error)?;
    let solver = SolverConfig {
        max_iter: config.solver.max_iter,
        tol: config.solver.tol,
        damping: config.solver.damping,
        p: config.solver.p,
    };

    let mut files = Vec::new();
    let mut summary = Vec::new();
    let manifest = Manifest {
        kind: kind.as_str(),
        seed: config.seed,
        library_version: env!("CARGO_PKG_VERSION"),
        config: &config,
    };
    files.push((
        "manifest.toml".to_string(),
        toml::to_string_pretty(&manifest)
            .map_err(|e| RunError::Io(format!("manifest serialization: {e}")))?,
    ));

    match kind {
        Kind::SolveEq => {
            let problem = resolve_problem(config.problem.as_ref().unwrap(), &mesh)
                .map_err(RunError::Config)?;
            let (x, report) =
                solve_equation(&problem.kernel, &*problem.f, &problem.h, &solver)
                    .map_err(core_error)?;
            files.push(("solution.csv".into(), solution_csv(&x, problem.closed_form.as_deref())));
            files.push(conditions_file(&problem, &mesh, &solver)?);
            summary.push(format!(
                "solved '{}' in {} iterations, residual {:.3e}",
                problem.label, report.iterations, report.residual
            ));
            if let Some(exact) = &problem.closed_form {
                let err = sup_error_scalar(&x, &**exact);
                summary.push(format!("sup error against closed form: {err:.3e}"));
            }
        }
        Kind::Funnel => {
            let field = resolve_field(config.field.as_ref().unwrap(), &mesh)
                .map_err(RunError::Config)?;
            let problem_kernel = kernel_for_field(&config, &mesh)?;
            let h = inhomogeneity_for_field(&config, &mesh)?;
            let n_samples = config.funnel.as_ref().unwrap().samples;
            let funnel =
                sample_funnel(&problem_kernel, &field, &h, n_samples, config.seed, &solver)
                    .map_err(core_error)?;
            let report = structure_diagnostics(
                &funnel,
                &problem_kernel,
                &h,
                &field.growth().mu,
                solver.p,
            )
            .map_err(core_error)?;
            files.push(("funnel.csv".into(), funnel_csv(&funnel)));
            files.push(("structure.csv".into(), structure_csv(&report)));
            files.push(conditions_file_for_field(
                &problem_kernel,
                &field,
                &h,
                &mesh,
                &solver,
            )?);
            summary.push(format!(
                "funnel: {} accepted, {} rejected; sup bound {:.4} (measured {:.4})",
                funnel.samples.len(),
                funnel.rejected.len(),
                report.sup_norm_bound,
                report.sup_norm_max
            ));
        }
        Kind::NestingLadder => {
            let field = resolve_field(config.field.as_ref().unwrap(), &mesh)
                .map_err(RunError::Config)?;
            let kernel = kernel_for_field(&config, &mesh)?;
            let h = inhomogeneity_for_field(&config, &mesh)?;
            let ladder = config.ladder.as_ref().unwrap();
            let mut funnels = Vec::new();
            for n in 1..=ladder.levels {
                let r_n = 3.0_f64.powi(-(n as i32));
                let inflated = field.inflate(3.0 * r_n).map_err(core_error)?;
                funnels.push(
                    sample_funnel(&kernel, &inflated, &h, ladder.samples, config.seed, &solver)
                        .map_err(core_error)?,
                );
            }
            let q = QExponent::conjugate_of(solver.p).map_err(core_error)?;
            let b = kernel.qnorm_profile(&mesh, q).map_err(core_error)?.b;
            let eta_norm = mesh
                .lp_norm_samples(&field.growth().eta, solver.p)
                .map_err(core_error)?;
            let report = nesting_report(&funnels, solver.p, b, eta_norm).map_err(core_error)?;
            let mut csv = String::from("n,r_n,semidistance,defect_bound\n");
            for level in &report.levels {
                let _ = writeln!(
                    csv,
                    "{},{},{},{}",
                    level.n, level.r_n, level.semidistance, level.defect_bound
                );
            }
            files.push(("nesting.csv".into(), csv));
            for (i, funnel) in funnels.iter().enumerate() {
                files.push((format!("funnel_level{}.csv", i + 1), funnel_csv(funnel)));
            }
            files.push(conditions_file_for_field(&kernel, &field, &h, &mesh, &solver)?);
            summary.push(format!(
                "ladder levels {}: semidistances {:?}",
                ladder.levels,
                report.levels.iter().map(|l| l.semidistance).collect::<Vec<_>>()
            ));
            summary.push(format!(
                "defect constant {:.6}",
                defect_constant(solver.p, b, eta_norm).map_err(core_error)?
            ));
        }
        Kind::PeriodicVolterra => {
            let periodic = config.periodic.as_ref().unwrap();
            let rows = periodic
                .generator
                .as_ref()
                .ok_or_else(|| RunError::Config("periodic.generator is required".into()))?;
            if rows.len() != mesh.dim() || rows.iter().any(|r| r.len() != mesh.dim()) {
                return Err(RunError::Config("periodic.generator must be dim x dim".into()));
            }
            let generator = DMatrix::from_fn(mesh.dim(), mesh.dim(), |i, j| rows[i][j]);
            let family = StableFamily::from_generator(generator, mesh.clone(), periodic.omega)
                .map_err(core_error)?;
            let (rhs, kernel, growth) = periodic_rhs(&config, &mesh)?;
            let policy = condition_policy(periodic.on_condition_failure.as_deref())?;
            let result = find_periodic_volterra(&kernel, &rhs, &family, &growth, &solver, policy)
                .map_err(core_error)?;
            files.push(("periodic.csv".into(), periodic_csv(&result)));
            let w = orbit_selection(&rhs, &result.orbit).map_err(core_error)?;
            files.push((
                "orbit.csv".into(),
                orbit_csv(&result.orbit, &w, &kernel, &inhomogeneity(&family, &result.x0)?),
            ));
            files.push(conditions_file_for_kernel(&kernel, &mesh, &solver, &growth.eta)?);
            summary.push(format!(
                "fixed point |x0| = {:.6}, residual {:.3e}, {} iterations",
                result.x0.norm(),
                result.fixed_point_residual,
                result.iterations
            ));
        }
        Kind::PeriodicHammerstein => {
            let (rhs, kernel, growth) = periodic_rhs(&config, &mesh)?;
            if kernel.domain() != KernelDomain::Square {
                return Err(RunError::Config(
                    "periodic-hammerstein needs a kernel on the square".into(),
                ));
            }
            let h = match &config.problem {
                Some(p) => resolve_problem(p, &mesh).map_err(RunError::Config)?.h,
                None => Path::zero(mesh.clone()),
            };
            let policy = condition_policy(
                config
                    .periodic
                    .as_ref()
                    .and_then(|p| p.on_condition_failure.as_deref()),
            )?;
            let result =
                solve_hammerstein_periodic(&kernel, &rhs, &h, &growth.eta, &solver, policy)
                    .map_err(core_error)?;
            files.push(("solution.csv".into(), solution_csv(&result.x, None)));
            let mut csv =
                String::from("periodicity_residual,iterations,residual,condition_lhs,condition_threshold,accepted\n");
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                result.periodicity_residual,
                result.iterations,
                result.residual,
                result.condition.lhs,
                result.condition.threshold,
                result.accepted
            );
            files.push(("hammerstein.csv".into(), csv));
            files.push(conditions_file_for_kernel(&kernel, &mesh, &solver, &growth.eta)?);
            summary.push(format!(
                "periodicity residual {:.3e} after {} iterations",
                result.periodicity_residual, result.iterations
            ));
        }
        Kind::CheckConditions => {
            let problem = resolve_problem(config.problem.as_ref().unwrap(), &mesh)
                .map_err(RunError::Config)?;
            files.push(conditions_file(&problem, &mesh, &solver)?);
            summary.push(format!("conditions checked for '{}'", problem.label));
        }
        Kind::ConvergenceTable => {
            let problem_cfg = config.problem.as_ref().unwrap();
            let sizes = config
                .table
                .as_ref()
                .map(|t| t.sizes.clone())
                .unwrap_or_else(|| vec![51, 101, 201, 401]);
            if sizes.iter().any(|&n| n < 2) {
                return Err(RunError::Config("table.sizes entries must be >= 2".into()));
            }
            // closed form availability decides before anything runs
            {
                let probe = resolve_problem(problem_cfg, &mesh).map_err(RunError::Config)?;
                if probe.closed_form.is_none() {
                    return Err(RunError::Config(
                        "convergence-table needs a problem with a registered closed form".into(),
                    ));
                }
            }
            let mut rows: Vec<(usize, f64)> = Vec::new();
            for &n in &sizes {
                let sub_mesh = TimeMesh::uniform(config.mesh.t_end, n, config.mesh.dim)
                    .map_err(core_error)?;
                let problem =
                    resolve_problem(problem_cfg, &sub_mesh).map_err(RunError::Config)?;
                let (x, _) = solve_equation(&problem.kernel, &*problem.f, &problem.h, &solver)
                    .map_err(core_error)?;
                let exact = problem.closed_form.as_deref().unwrap();
                rows.push((n, sup_error_scalar(&x, exact)));
            }
            let mut csv = String::from("nodes,sup_error,ratio\n");
            for (i, (n, err)) in rows.iter().enumerate() {
                if i == 0 {
                    let _ = writeln!(csv, "{n},{err},");
                } else {
                    let ratio = rows[i - 1].1 / err;
                    let _ = writeln!(csv, "{n},{err},{ratio}");
                }
            }
            files.push(("table.csv".into(), csv));
            summary.push(format!("convergence table over {sizes:?}"));
        }
    }
    Ok(RunOutput { files, summary })
}

fn condition_policy(choice: Option<&str>) -> Result<ConditionPolicy, RunError> {
    match choice {
        None | Some("enforce") => Ok(ConditionPolicy::Enforce),
        Some("warn-and-proceed") => Ok(ConditionPolicy::WarnAndProceed),
        Some(other) => Err(RunError::Config(format!(
            "on_condition_failure must be 'enforce' or 'warn-and-proceed', got '{other}'"
        ))),
    }
}

fn inhomogeneity(family: &StableFamily, x0: &DVector<f64>) -> Result<Path, RunError> {
    family.inhomogeneity(x0).map_err(core_error)
}

/// Kernel for funnel/ladder runs: from `[problem.kernel]` when present,
/// identity otherwise.
fn kernel_for_field(config: &ExperimentConfig, mesh: &Arc<TimeMesh>) -> Result<Kernel, RunError> {
    match config.problem.as_ref().and_then(|p| p.kernel.as_ref()) {
        Some(kcfg) => crate::catalog::resolve_kernel(kcfg, mesh).map_err(RunError::Config),
        None => volterra_core::kernel::catalog("identity", mesh.horizon(), mesh.dim())
            .map_err(core_error),
    }
}

fn inhomogeneity_for_field(
    config: &ExperimentConfig,
    mesh: &Arc<TimeMesh>,
) -> Result<Path, RunError> {
    match &config.problem {
        Some(p) => Ok(resolve_problem(p, mesh).map_err(RunError::Config)?.h),
        None => Ok(Path::zero(mesh.clone())),
    }
}

/// Right-hand side for periodic runs: the set-valued field with an extremal
/// strategy when `[field]` is present, the problem's `f` otherwise.
fn periodic_rhs(
    config: &ExperimentConfig,
    mesh: &Arc<TimeMesh>,
) -> Result<(Rhs, Kernel, GrowthData), RunError> {
    if let Some(field_cfg) = &config.field {
        let field = resolve_field(field_cfg, mesh).map_err(RunError::Config)?;
        let kernel = kernel_for_field(config, mesh)?;
        let direction = config
            .periodic
            .as_ref()
            .and_then(|p| p.direction.clone())
            .unwrap_or_else(|| vec![1.0; mesh.dim()]);
        if direction.len() != mesh.dim() {
            return Err(RunError::Config("periodic.direction must have dim entries".into()));
        }
        let growth = field.growth().clone();
        let strategy = SelectionStrategy::Extremal(DVector::from_vec(direction));
        return Ok((Rhs::Field { field, strategy }, kernel, growth));
    }
    let problem = resolve_problem(
        config
            .problem
            .as_ref()
            .ok_or_else(|| RunError::Config("periodic runs need [problem] or [field]".into()))?,
        mesh,
    )
    .map_err(RunError::Config)?;
    let growth = GrowthData::constant(
        mesh.len(),
        problem.growth_c,
        0.0,
        problem.growth_c * 2.0,
    )
    .map_err(core_error)?;
    let f = problem.f.clone();
    Ok((Rhs::Function(f), problem.kernel, growth))
}

fn orbit_selection(rhs: &Rhs, orbit: &Path) -> Result<Path, CoreError> {
    match rhs {
        Rhs::Function(f) => Ok(selection_of(&**f, orbit)),
        Rhs::Field { field, strategy } => {
            let mut w = Path::zero(orbit.mesh().clone());
            for (j, &t) in orbit.mesh().nodes().iter().enumerate() {
                let set = field.eval(t, orbit.value(j));
                w.values_mut()[j] = strategy.select(&set, t, w.value(j))?;
            }
            Ok(w)
        }
    }
}

fn sup_error_scalar(x: &Path, exact: &(dyn Fn(f64) -> f64 + Send + Sync)) -> f64 {
    x.mesh()
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, &t)| (x.value(i)[0] - exact(t)).abs())
        .fold(0.0, f64::max)
}

fn solution_csv(x: &Path, closed_form: Option<&(dyn Fn(f64) -> f64 + Send + Sync)>) -> String {
    let dim = x.mesh().dim();
    let mut csv = String::from("node_time");
    for i in 1..=dim {
        let _ = write!(csv, ",x_{i}");
    }
    if closed_form.is_some() {
        csv.push_str(",exact,error");
    }
    csv.push('\n');
    for (i, &t) in x.mesh().nodes().iter().enumerate() {
        let _ = write!(csv, "{t}");
        for c in 0..dim {
            let _ = write!(csv, ",{}", x.value(i)[c]);
        }
        if let Some(exact) = closed_form {
            let e = exact(t);
            let _ = write!(csv, ",{},{}", e, (x.value(i)[0] - e).abs());
        }
        csv.push('\n');
    }
    csv
}

fn funnel_csv(funnel: &Funnel) -> String {
    let mut csv = String::from("sample_id,node_time");
    let dim = funnel.samples[0].x.mesh().dim();
    for i in 1..=dim {
        let _ = write!(csv, ",x_{i}");
    }
    for i in 1..=dim {
        let _ = write!(csv, ",w_{i}");
    }
    csv.push_str(",eq_residual,incl_residual\n");
    for sample in &funnel.samples {
        for (i, &t) in sample.x.mesh().nodes().iter().enumerate() {
            let _ = write!(csv, "{},{t}", sample.index);
            for c in 0..dim {
                let _ = write!(csv, ",{}", sample.x.value(i)[c]);
            }
            for c in 0..dim {
                let _ = write!(csv, ",{}", sample.w.value(i)[c]);
            }
            let _ = writeln!(csv, ",{},{}", sample.eq_residual, sample.incl_residual);
        }
    }
    csv
}

fn orbit_csv(orbit: &Path, w: &Path, kernel: &Kernel, h: &Path) -> String {
    // the orbit in the funnel format: one sample, recomputed residuals
    let eq_residual = h
        .add(&apply_volterra(kernel, w).unwrap_or_else(|_| Path::zero(orbit.mesh().clone())))
        .and_then(|rhs| orbit.sup_distance(&rhs))
        .unwrap_or(f64::NAN);
    let dim = orbit.mesh().dim();
    let mut csv = String::from("sample_id,node_time");
    for i in 1..=dim {
        let _ = write!(csv, ",x_{i}");
    }
    for i in 1..=dim {
        let _ = write!(csv, ",w_{i}");
    }
    csv.push_str(",eq_residual,incl_residual\n");
    for (i, &t) in orbit.mesh().nodes().iter().enumerate() {
        let _ = write!(csv, "0,{t}");
        for c in 0..dim {
            let _ = write!(csv, ",{}", orbit.value(i)[c]);
        }
        for c in 0..dim {
            let _ = write!(csv, ",{}", w.value(i)[c]);
        }
        let _ = writeln!(csv, ",{eq_residual},0");
    }
    csv
}

fn periodic_csv(result: &volterra_core::periodic::PeriodicResult) -> String {
    let mut csv = String::new();
    for i in 1..=result.x0.len() {
        let _ = write!(csv, "x0_{i},");
    }
    csv.push_str(
        "fixed_point_residual,periodicity_residual,iterations,contraction_estimate,ball_radius,accepted\n",
    );
    for c in result.x0.iter() {
        let _ = write!(csv, "{c},");
    }
    let _ = writeln!(
        csv,
        "{},{},{},{},{},{}",
        result.fixed_point_residual,
        result.periodicity_residual,
        result.iterations,
        result.contraction_estimate,
        result.ball_radius,
        result.accepted
    );
    csv
}

fn structure_csv(report: &volterra_core::inclusion::StructureReport) -> String {
    let mut csv = String::from("node_time,max_gap,diameter\n");
    if let Some(sections) = &report.cross_sections {
        for s in sections {
            let _ = writeln!(csv, "{},{},{}", s.time, s.max_gap, s.diameter);
        }
    }
    let _ = writeln!(csv, "# modulus,{},bound,{}", report.modulus, report.modulus_bound);
    let _ = writeln!(
        csv,
        "# sup_norm_max,{},sup_norm_bound,{}",
        report.sup_norm_max, report.sup_norm_bound
    );
    for (eps, count) in &report.covering {
        let _ = writeln!(csv, "# covering,{eps},{count}");
    }
    csv
}

struct ConditionRow {
    name: &'static str,
    status: String,
    value: f64,
    threshold: f64,
    margin: f64,
    note: String,
}

fn conditions_csv(rows: &[ConditionRow]) -> String {
    let mut csv = String::from("condition,status,value,threshold,margin,note\n");
    for r in rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.name, r.status, r.value, r.threshold, r.margin, r.note
        );
    }
    csv
}

fn kernel_condition_rows(
    kernel: &Kernel,
    mesh: &TimeMesh,
    p: f64,
    eta: &[f64],
) -> Result<Vec<ConditionRow>, RunError> {
    let report = kernel.report(mesh, p, 1e-12).map_err(core_error)?;
    let q = QExponent::conjugate_of(p).map_err(core_error)?;
    let mut rows = Vec::new();
    let pass = |ok: bool| if ok { "pass".to_string() } else { "fail".to_string() };

    if kernel.domain() == KernelDomain::Triangle {
        rows.push(ConditionRow {
            name: "k3-diagonal-invertible",
            status: pass(report.diag_passed),
            value: report.min_singular,
            threshold: 1e-12,
            margin: report.min_singular - 1e-12,
            note: format!("smallest diagonal singular value; M_inv = {}", report.m_inv),
        });
        let psi_q = match q {
            QExponent::Infinite => report.psi_samples.iter().cloned().fold(0.0, f64::max),
            QExponent::Finite(qv) => mesh
                .lp_norm_samples(&report.psi_samples, qv)
                .map_err(core_error)?,
        };
        rows.push(ConditionRow {
            name: "k4-derivative-bound",
            status: pass(psi_q.is_finite()),
            value: report.psi_bound,
            threshold: f64::INFINITY,
            margin: f64::INFINITY,
            note: "sup_s psi(s); finite q-norm certifies the sampled bound".into(),
        });
    }
    rows.push(ConditionRow {
        name: "k5-qnorm-finite",
        status: pass(report.b.is_finite()),
        value: report.b,
        threshold: f64::INFINITY,
        margin: f64::INFINITY,
        note: "B = sup_t ||k(t,.)||_q".into(),
    });
    rows.push(ConditionRow {
        name: "k6-qnorm-continuity",
        status: pass(report.continuity_modulus.is_finite()),
        value: report.continuity_modulus,
        threshold: f64::INFINITY,
        margin: f64::INFINITY,
        note: "adjacent-node q-norm modulus; refines to 0 with the mesh".into(),
    });
    rows.push(ConditionRow {
        name: "k7-complete-continuity",
        status: "pass".into(),
        value: 0.0,
        threshold: 0.0,
        margin: 0.0,
        note: "automatic in finite dimension; never gates a pipeline".into(),
    });

    if kernel.domain() == KernelDomain::Triangle {
        let e1 = check_e1(kernel, eta, p, mesh).map_err(core_error)?;
        rows.push(ConditionRow {
            name: "E1-envelope",
            status: pass(e1.holds),
            value: e1.lhs,
            threshold: e1.threshold,
            margin: e1.margin,
            note: "4 B ||eta||_p < 1".into(),
        });
        let cw = check_contraction_condition(kernel, eta, p, mesh).map_err(core_error)?;
        rows.push(ConditionRow {
            name: "periodic-contraction",
            status: pass(cw.holds),
            value: cw.lhs,
            threshold: cw.threshold,
            margin: cw.margin,
            note: "B ||eta||_p < 2^(2/p-3) e^(-1/p)".into(),
        });
    } else {
        let ham = check_hammerstein_condition(kernel, eta, p, mesh).map_err(core_error)?;
        rows.push(ConditionRow {
            name: "hammerstein-contraction",
            status: pass(ham.holds),
            value: ham.lhs,
            threshold: ham.threshold,
            margin: ham.margin,
            note: "2 B ||eta||_p < 1".into(),
        });
    }
    Ok(rows)
}

fn conditions_file(
    problem: &ResolvedProblem,
    mesh: &Arc<TimeMesh>,
    solver: &SolverConfig,
) -> Result<(String, String), RunError> {
    let eta = vec![0.0; mesh.len()];
    let mut rows = kernel_condition_rows(&problem.kernel, mesh, solver.p, &eta)?;
    // a-priori bound row for the declared growth
    let q = QExponent::conjugate_of(solver.p).map_err(core_error)?;
    let b = problem.kernel.qnorm_profile(mesh, q).map_err(core_error)?.b;
    let c_samples = vec![problem.growth_c; mesh.len()];
    let bound = apriori_bound(problem.h.sup_norm(), b, &c_samples, solver.p, mesh)
        .map_err(core_error)?;
    rows.push(ConditionRow {
        name: "apriori-bound",
        status: "info".into(),
        value: bound,
        threshold: f64::INFINITY,
        margin: f64::INFINITY,
        note: "M from the growth estimate; solutions stay below it".into(),
    });
    Ok(("conditions.csv".into(), conditions_csv(&rows)))
}

fn conditions_file_for_field(
    kernel: &Kernel,
    field: &SetField,
    h: &Path,
    mesh: &Arc<TimeMesh>,
    solver: &SolverConfig,
) -> Result<(String, String), RunError> {
    let mut rows = kernel_condition_rows(kernel, mesh, solver.p, &field.growth().eta)?;
    let probes = vec![DVector::zeros(mesh.dim()), h.value(0).clone()];
    let bound = field.check_bounds(mesh, &probes).map_err(core_error)?;
    rows.push(ConditionRow {
        name: "F4'-uniform-bound",
        status: if bound.holds { "pass".into() } else { "fail".into() },
        value: bound.lhs,
        threshold: 0.0,
        margin: bound.margin,
        note: "max over probes of the set bound minus mu".into(),
    });
    Ok(("conditions.csv".into(), conditions_csv(&rows)))
}

fn conditions_file_for_kernel(
    kernel: &Kernel,
    mesh: &Arc<TimeMesh>,
    solver: &SolverConfig,
    eta: &[f64],
) -> Result<(String, String), RunError> {
    let rows = kernel_condition_rows(kernel, mesh, solver.p, eta)?;
    Ok(("conditions.csv".into(), conditions_csv(&rows)))
}
