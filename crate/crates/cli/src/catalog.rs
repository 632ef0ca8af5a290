//! Resolution of config sections into core objects: named catalog problems
//! with registered closed forms, inline expression-defined problems, and
//! constant set-valued fields.

use std::sync::Arc;

use nalgebra::DVector;
use volterra_core::inclusion::SetField;
use volterra_core::kernel::{self, Kernel, KernelDomain};
use volterra_core::mesh::{Path, TimeMesh};
use volterra_core::set::ConvexSet;
use volterra_core::solver::GrowthData;

use crate::config::{FieldConfig, KernelConfig, KernelDomainConfig, ProblemConfig};
use crate::expr;

pub type RhsFn = Arc<dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type ClosedForm = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub struct ResolvedProblem {
    pub label: String,
    pub kernel: Kernel,
    pub f: RhsFn,
    pub h: Path,
    /// Exact scalar solution, when the problem registers one.
    pub closed_form: Option<ClosedForm>,
    /// Declared constant growth bound `c`.
    pub growth_c: f64,
}

/// Resolves a problem on the given mesh: either one of the named catalog
/// problems (`exp-growth`, `exp-decay`, `cosh`, `constant`: all scalar,
/// with registered closed forms) or an inline (kernel, f, h) triple.
pub fn resolve_problem(
    cfg: &ProblemConfig,
    mesh: &Arc<TimeMesh>,
) -> Result<ResolvedProblem, String> {
    if let Some(name) = &cfg.name {
        if cfg.kernel.is_some() || cfg.f.is_some() || cfg.h.is_some() {
            return Err("problem.name excludes inline kernel/f/h definitions".into());
        }
        return named_problem(name, mesh);
    }
    let kernel_cfg = cfg
        .kernel
        .as_ref()
        .ok_or("inline problems need [problem.kernel]")?;
    let kernel = resolve_kernel(kernel_cfg, mesh)?;
    let dim = mesh.dim();

    let f: RhsFn = match &cfg.f {
        Some(section) => compile_rhs(&section.expr, dim)?,
        None => Arc::new(move |_t, _x: &DVector<f64>| DVector::zeros(dim)),
    };
    let h = match &cfg.h {
        Some(section) => compile_path(&section.expr, mesh)?,
        None => Path::zero(mesh.clone()),
    };
    Ok(ResolvedProblem {
        label: "inline".into(),
        kernel,
        f,
        h,
        closed_form: None,
        growth_c: cfg.growth_c.unwrap_or(1.0),
    })
}

fn named_problem(name: &str, mesh: &Arc<TimeMesh>) -> Result<ResolvedProblem, String> {
    if mesh.dim() != 1 {
        return Err(format!("catalog problem '{name}' is scalar; set mesh.dim = 1"));
    }
    let horizon = mesh.horizon();
    let identity = kernel::catalog("identity", horizon, 1).map_err(|e| e.to_string())?;
    let ones = Path::from_scalar_fn(mesh.clone(), |_| 1.0).map_err(|e| e.to_string())?;
    let problem = match name {
        "exp-growth" => ResolvedProblem {
            label: name.into(),
            kernel: identity,
            f: Arc::new(|_t, x: &DVector<f64>| x.clone()),
            h: ones,
            closed_form: Some(Arc::new(|t: f64| t.exp())),
            growth_c: 1.0,
        },
        "exp-decay" => ResolvedProblem {
            label: name.into(),
            kernel: identity,
            f: Arc::new(|_t, x: &DVector<f64>| -x),
            h: ones,
            closed_form: Some(Arc::new(|t: f64| (-t).exp())),
            growth_c: 1.0,
        },
        "cosh" => ResolvedProblem {
            label: name.into(),
            kernel: Kernel::scalar_times_identity(
                KernelDomain::Triangle,
                horizon,
                1,
                "difference",
                |t, s| t - s,
            )
            .map_err(|e| e.to_string())?,
            f: Arc::new(|_t, x: &DVector<f64>| x.clone()),
            h: ones,
            closed_form: Some(Arc::new(|t: f64| t.cosh())),
            growth_c: 1.0,
        },
        "constant" => ResolvedProblem {
            label: name.into(),
            kernel: identity,
            f: Arc::new(|_t, _x: &DVector<f64>| DVector::zeros(1)),
            h: ones,
            closed_form: Some(Arc::new(|_t: f64| 1.0)),
            growth_c: 0.0,
        },
        other => return Err(format!("unknown catalog problem '{other}'")),
    };
    Ok(problem)
}

pub fn resolve_kernel(cfg: &KernelConfig, mesh: &Arc<TimeMesh>) -> Result<Kernel, String> {
    let horizon = mesh.horizon();
    let dim = mesh.dim();
    match (&cfg.name, &cfg.expr) {
        (Some(name), None) => kernel::catalog(name, horizon, dim).map_err(|e| e.to_string()),
        (None, Some(source)) => {
            let parsed = expr::parse(source).map_err(|e| format!("kernel expr: {e}"))?;
            if parsed.max_state_index().is_some() {
                return Err("kernel expressions may only use t and s".into());
            }
            let domain = match cfg.domain.unwrap_or(KernelDomainConfig::Triangle) {
                KernelDomainConfig::Triangle => KernelDomain::Triangle,
                KernelDomainConfig::Square => KernelDomain::Square,
            };
            Kernel::scalar_times_identity(domain, horizon, dim, "inline", move |t, s| {
                parsed.eval(t, s, &[])
            })
            .map_err(|e| e.to_string())
        }
        _ => Err("kernel needs exactly one of 'name' or 'expr'".into()),
    }
}

/// Compiles per-component expressions in `t`, `x1..xd` into a vector field.
fn compile_rhs(sources: &[String], dim: usize) -> Result<RhsFn, String> {
    if sources.len() != dim {
        return Err(format!("f needs {dim} component expressions, got {}", sources.len()));
    }
    let mut parsed = Vec::with_capacity(dim);
    for src in sources {
        let e = expr::parse(src).map_err(|err| format!("f component: {err}"))?;
        if e.uses_second_time() {
            return Err("f expressions use t and x components, not s".into());
        }
        if let Some(idx) = e.max_state_index() {
            if idx >= dim {
                return Err(format!("f references x{} beyond dim {dim}", idx + 1));
            }
        }
        parsed.push(e);
    }
    Ok(Arc::new(move |t, x: &DVector<f64>| {
        DVector::from_iterator(parsed.len(), parsed.iter().map(|e| e.eval(t, 0.0, x.as_slice())))
    }))
}

/// Compiles per-component expressions in `t` into a sampled path.
fn compile_path(sources: &[String], mesh: &Arc<TimeMesh>) -> Result<Path, String> {
    let dim = mesh.dim();
    if sources.len() != dim {
        return Err(format!("h needs {dim} component expressions, got {}", sources.len()));
    }
    let mut parsed = Vec::with_capacity(dim);
    for src in sources {
        let e = expr::parse(src).map_err(|err| format!("h component: {err}"))?;
        if e.uses_second_time() || e.max_state_index().is_some() {
            return Err("h expressions may only use t".into());
        }
        parsed.push(e);
    }
    Path::from_fn(mesh.clone(), |t| {
        DVector::from_iterator(parsed.len(), parsed.iter().map(|e| e.eval(t, 0.0, &[])))
    })
    .map_err(|e| e.to_string())
}

/// Builds the constant set-valued field declared in `[field]` together with
/// its growth data.
pub fn resolve_field(cfg: &FieldConfig, mesh: &Arc<TimeMesh>) -> Result<SetField, String> {
    let dim = mesh.dim();
    let (set, geometric_bound) = match cfg.kind.as_str() {
        "interval" => {
            if dim != 1 {
                return Err("interval fields need mesh.dim = 1".into());
            }
            let lo = one_value(&cfg.lo, "field.lo")?;
            let hi = one_value(&cfg.hi, "field.hi")?;
            if lo > hi {
                return Err("field.lo exceeds field.hi".into());
            }
            (
                ConvexSet::interval(lo, hi).map_err(|e| e.to_string())?,
                lo.abs().max(hi.abs()),
            )
        }
        "box" => {
            let lo = vector_value(&cfg.lo, dim, "field.lo")?;
            let hi = vector_value(&cfg.hi, dim, "field.hi")?;
            let set = ConvexSet::cuboid(lo, hi).map_err(|e| e.to_string())?;
            let bound = set.norm_bound();
            (set, bound)
        }
        "ball" => {
            let center = vector_value(&cfg.center, dim, "field.center")?;
            let radius = cfg.radius.ok_or("ball fields need field.radius")?;
            let set = ConvexSet::ball(center, radius).map_err(|e| e.to_string())?;
            let bound = set.norm_bound();
            (set, bound)
        }
        other => return Err(format!("unknown field kind '{other}' (interval, box, ball)")),
    };
    let mu = cfg.mu.unwrap_or(geometric_bound);
    if mu < geometric_bound - 1e-12 {
        return Err(format!(
            "declared field.mu = {mu} is below the set bound {geometric_bound}"
        ));
    }
    let growth = GrowthData::constant(mesh.len(), mu.max(1e-12), cfg.eta, mu)
        .map_err(|e| e.to_string())?;
    SetField::constant(format!("{}-field", cfg.kind), set, growth).map_err(|e| e.to_string())
}

fn one_value(v: &Option<Vec<f64>>, what: &str) -> Result<f64, String> {
    match v.as_deref() {
        Some([x]) => Ok(*x),
        _ => Err(format!("{what} needs exactly one value")),
    }
}

fn vector_value(v: &Option<Vec<f64>>, dim: usize, what: &str) -> Result<DVector<f64>, String> {
    match v {
        Some(vals) if vals.len() == dim => Ok(DVector::from_vec(vals.clone())),
        _ => Err(format!("{what} needs {dim} values")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExprVec;

    #[test]
    fn named_problems_resolve() {
        let mesh = TimeMesh::uniform(1.0, 11, 1).unwrap();
        for name in ["exp-growth", "exp-decay", "cosh", "constant"] {
            let cfg = ProblemConfig {
                name: Some(name.into()),
                kernel: None,
                f: None,
                h: None,
                growth_c: None,
            };
            let p = resolve_problem(&cfg, &mesh).unwrap();
            assert!(p.closed_form.is_some());
        }
        let bad = ProblemConfig {
            name: Some("nope".into()),
            kernel: None,
            f: None,
            h: None,
            growth_c: None,
        };
        assert!(resolve_problem(&bad, &mesh).is_err());
    }

    #[test]
    fn inline_problem_resolves() {
        let mesh = TimeMesh::uniform(1.0, 11, 2).unwrap();
        let cfg = ProblemConfig {
            name: None,
            kernel: Some(KernelConfig {
                name: None,
                expr: Some("exp(-(t - s))".into()),
                domain: None,
            }),
            f: Some(ExprVec { expr: vec!["x2".into(), "-x1".into()] }),
            h: Some(ExprVec { expr: vec!["cos(t)".into(), "sin(t)".into()] }),
            growth_c: None,
        };
        let p = resolve_problem(&cfg, &mesh).unwrap();
        let x = DVector::from_vec(vec![1.0, 2.0]);
        let fx = (p.f)(0.0, &x);
        assert_eq!(fx[0], 2.0);
        assert_eq!(fx[1], -1.0);
        assert!((p.h.value(0)[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn field_resolution() {
        let mesh = TimeMesh::uniform(1.0, 11, 1).unwrap();
        let cfg = FieldConfig {
            kind: "interval".into(),
            lo: Some(vec![-1.0]),
            hi: Some(vec![1.0]),
            center: None,
            radius: None,
            eta: 0.3,
            mu: None,
        };
        let field = resolve_field(&cfg, &mesh).unwrap();
        assert_eq!(field.growth().mu[0], 1.0);
        assert_eq!(field.growth().eta[0], 0.3);
    }
}
