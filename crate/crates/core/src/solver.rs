//! Damped Picard solver for the single-valued integral equation
//! `x(t) = h(t) + ∫_0^t k(t,s) f(s, x(s)) ds`, continuation solves that keep
//! a committed selection on a prefix `[0, aT]`, the homotopy built from them,
//! and the scalar condensing machinery (a-priori bound, `phi(L)`, threshold
//! search for `L`).
//!
//! The solver iterates `x <- (1 - damping) x + damping (h + V(f(., x(.))))`
//! from `x_0 = h`. When the iteration fails to settle within its budget the
//! interval is split in half: the equation is solved on the left part, the
//! computed selection is frozen, and the right part is solved as a
//! continuation problem. Splitting recurses, so stiff problems degrade into
//! short subintervals where the iteration contracts.
//!
//! Uniqueness of the limit is guaranteed for locally Lipschitz `f`; for
//! merely continuous right-hand sides the iteration converges to one of the
//! solutions and the pick depends on mesh and damping.

use nalgebra::DVector;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelDomain, QExponent};
use crate::mesh::{Path, TimeMesh};
use crate::operator::{apply_volterra, invert_volterra, row_integral};

/// Function-valued right-hand side `f(t, x)`.
pub type VectorField<'a> = &'a (dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Sync);

/// Owned, shareable right-hand side.
pub type SharedVectorField = Arc<dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Iteration controls shared by every fixed-point loop in the crate.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Relative sup-norm tolerance for both the residual and the step.
    pub tol: f64,
    /// Damping factor in `(0, 1]`; 1 is the undamped iteration.
    pub damping: f64,
    /// Integrability exponent `p >= 1` of the selection space.
    pub p: f64,
}

impl SolverConfig {
    pub fn new(max_iter: usize, tol: f64, damping: f64, p: f64) -> Result<Self> {
        let cfg = SolverConfig { max_iter, tol, damping, p };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be positive"));
        }
        if !self.tol.is_finite() || self.tol <= 0.0 {
            return Err(Error::invalid("tol must be positive"));
        }
        if self.damping.is_nan() || self.damping <= 0.0 || self.damping > 1.0 {
            return Err(Error::invalid("damping must lie in (0, 1]"));
        }
        if self.p < 1.0 {
            return Err(Error::invalid("exponent p must be >= 1"));
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { max_iter: 200, tol: 1e-10, damping: 1.0, p: 2.0 }
    }
}

/// Sampled growth data of a right-hand side: `c` bounds growth,
/// `eta` is the contraction density, `mu` the uniform bound. One sample per
/// mesh node, all nonnegative.
#[derive(Debug, Clone)]
pub struct GrowthData {
    pub c: Vec<f64>,
    pub eta: Vec<f64>,
    pub mu: Vec<f64>,
}

impl GrowthData {
    pub fn new(c: Vec<f64>, eta: Vec<f64>, mu: Vec<f64>) -> Result<Self> {
        if c.len() != eta.len() || c.len() != mu.len() {
            return Err(Error::invalid("growth samples must have equal lengths"));
        }
        for v in c.iter().chain(&eta).chain(&mu) {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::invalid("growth samples must be finite and nonnegative"));
            }
        }
        Ok(GrowthData { c, eta, mu })
    }

    pub fn constant(len: usize, c: f64, eta: f64, mu: f64) -> Result<Self> {
        GrowthData::new(vec![c; len], vec![eta; len], vec![mu; len])
    }

    pub fn from_fns(
        mesh: &TimeMesh,
        c: impl Fn(f64) -> f64,
        eta: impl Fn(f64) -> f64,
        mu: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let sample = |f: &dyn Fn(f64) -> f64| mesh.nodes().iter().map(|&t| f(t)).collect();
        GrowthData::new(sample(&c), sample(&eta), sample(&mu))
    }
}

/// What a fixed-point solve reports back.
#[derive(Debug, Clone, Default)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
    pub splits: usize,
}

/// A-priori sup-norm bound on solutions from the growth estimate:
/// `A = h_sup + B ||c||_p`, `M = 2^{1 - 1/p} A exp(p^{-1} 2^{p-1} B^p ||c||_p^p)`.
pub fn apriori_bound(
    h_sup: f64,
    b: f64,
    c_samples: &[f64],
    p: f64,
    mesh: &TimeMesh,
) -> Result<f64> {
    if h_sup < 0.0 || b < 0.0 {
        return Err(Error::invalid("a-priori inputs must be nonnegative"));
    }
    let c_norm = mesh.lp_norm_samples(c_samples, p)?;
    let a = h_sup + b * c_norm;
    let exponent = 2.0_f64.powf(p - 1.0) / p * b.powf(p) * c_norm.powf(p);
    Ok(2.0_f64.powf(1.0 - 1.0 / p) * a * exponent.exp())
}

fn validate_problem(k: &Kernel, h: &Path, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if k.domain() != KernelDomain::Triangle {
        return Err(Error::invalid("equation solver needs a triangular kernel"));
    }
    if k.dim() != h.mesh().dim() {
        return Err(Error::invalid("kernel and inhomogeneity dimensions differ"));
    }
    if h.mesh().horizon() > k.horizon() * (1.0 + 1e-12) {
        return Err(Error::invalid("mesh horizon exceeds kernel horizon"));
    }
    Ok(())
}

/// Solves `x = h + V(f(., x(.)))` by damped Picard iteration started from
/// `x_0 = h`, splitting the interval on stall.
pub fn solve_equation(
    k: &Kernel,
    f: VectorField,
    h: &Path,
    cfg: &SolverConfig,
) -> Result<(Path, SolveReport)> {
    solve_equation_with_start(k, f, h, h, cfg)
}

/// Same as [`solve_equation`] but with an explicit initial iterate.
pub fn solve_equation_with_start(
    k: &Kernel,
    f: VectorField,
    h: &Path,
    start: &Path,
    cfg: &SolverConfig,
) -> Result<(Path, SolveReport)> {
    validate_problem(k, h, cfg)?;
    if !h.mesh().compatible(start.mesh()) {
        return Err(Error::invalid("start iterate lives on a different mesh"));
    }
    let mesh = h.mesh().clone();
    let mut report = SolveReport::default();
    let g_tail: Vec<DVector<f64>> = h.values()[1..].to_vec();
    let start_tail: Vec<DVector<f64>> = start.values()[1..].to_vec();
    let tail = picard_tail(
        k,
        &mesh,
        f,
        0.0,
        h.value(0),
        &g_tail,
        &start_tail,
        cfg,
        0,
        &mut report,
    )?;
    let mut values = Vec::with_capacity(mesh.len());
    values.push(h.value(0).clone());
    values.extend(tail);
    let x = Path::new(mesh, values)?;

    // independent residual check through the public operator
    let w = selection_of(f, &x);
    let residual = x.sup_distance(&h.add(&apply_volterra(k, &w)?)?)?;
    report.residual = residual;
    Ok((x, report))
}

/// Evaluates `t -> f(t, x(t))` at the mesh nodes.
pub fn selection_of(f: VectorField, x: &Path) -> Path {
    let values = x
        .mesh()
        .nodes()
        .iter()
        .zip(x.values())
        .map(|(&t, v)| f(t, v))
        .collect();
    Path::new(x.mesh().clone(), values).expect("selection matches mesh by construction")
}

/// Solves the continuation problem: the selection `w_prefix` is committed on
/// `[0, s_frac T]` and the equation runs freely after the cut,
/// `x(t) = h(t) + ∫_0^{aT} k(t,s) w_prefix(s) ds + ∫_{aT}^t k(t,s) f(s, x(s)) ds`.
/// Nodes before the cut carry `h + V(w_prefix)`; the solved tail starts at
/// the first node past the cut.
pub fn solve_continuation(
    k: &Kernel,
    f: VectorField,
    w_prefix: &Path,
    s_frac: f64,
    h: &Path,
    cfg: &SolverConfig,
) -> Result<(Path, SolveReport)> {
    validate_problem(k, h, cfg)?;
    if !(0.0..=1.0).contains(&s_frac) {
        return Err(Error::invalid(format!(
            "continuation fraction must lie in [0, 1], got {s_frac}"
        )));
    }
    if !h.mesh().compatible(w_prefix.mesh()) {
        return Err(Error::invalid("prefix selection lives on a different mesh"));
    }
    let mesh = h.mesh().clone();
    let nodes = mesh.nodes();
    let n = nodes.len();
    let a = s_frac * mesh.horizon();
    let m = mesh.floor_index(a);

    let mut values: Vec<DVector<f64>> = (0..=m)
        .map(|i| h.value(i) + row_integral(k, w_prefix, nodes[i], nodes[i].min(a)))
        .collect();
    let mut report = SolveReport::default();
    if m < n - 1 {
        let v_a = h.eval(a) + row_integral(k, w_prefix, a, a);
        let g_tail: Vec<DVector<f64>> = (m + 1..n)
            .map(|i| h.value(i) + row_integral(k, w_prefix, nodes[i], a))
            .collect();
        let tail = picard_tail(k, &mesh, f, a, &v_a, &g_tail, &g_tail, cfg, 0, &mut report)?;
        values.extend(tail);
    }
    let x = Path::new(mesh, values)?;
    Ok((x, report))
}

/// Homotopy between a solution `y` (with its recovered selection `w_y`) and
/// the distinguished solution of the single-valued equation: equal to `y` up
/// to the cut `s T`, and to the continuation solve past it. `s = 1` returns
/// `y`; `s = 0` does not depend on `y` beyond `y(0) = h(0)`.
pub fn homotopy_eval(
    k: &Kernel,
    f: VectorField,
    y: &Path,
    w_y: &Path,
    s: f64,
    h: &Path,
    cfg: &SolverConfig,
) -> Result<Path> {
    validate_problem(k, h, cfg)?;
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::invalid(format!("homotopy parameter must lie in [0, 1], got {s}")));
    }
    if !h.mesh().compatible(y.mesh()) || !h.mesh().compatible(w_y.mesh()) {
        return Err(Error::invalid("homotopy inputs live on different meshes"));
    }
    let consistency = y.sup_distance(&h.add(&apply_volterra(k, w_y)?)?)?;
    if consistency > cfg.tol * (1.0 + y.sup_norm()) {
        return Err(Error::InconsistentData(format!(
            "pair (y, w_y) violates y = h + V(w_y): defect {consistency:.3e}"
        )));
    }
    let mesh = h.mesh().clone();
    let nodes = mesh.nodes();
    let n = nodes.len();
    let a = s * mesh.horizon();
    let m = mesh.floor_index(a);
    if m == n - 1 {
        return Ok(y.clone());
    }
    let mut values: Vec<DVector<f64>> = y.values()[..=m].to_vec();
    let v_a = h.eval(a) + row_integral(k, w_y, a, a);
    let g_tail: Vec<DVector<f64>> = (m + 1..n)
        .map(|i| h.value(i) + row_integral(k, w_y, nodes[i], a))
        .collect();
    let mut report = SolveReport::default();
    let tail = picard_tail(k, &mesh, f, a, &v_a, &g_tail, &g_tail, cfg, 0, &mut report)?;
    values.extend(tail);
    Path::new(mesh, values)
}

/// Recovers the unique selection behind a solution, `w = V^{-1}(y - h)`.
pub fn recover_selection(k: &Kernel, y: &Path, h: &Path) -> Result<Path> {
    let diff = y.add(&h.scale(-1.0))?;
    Ok(invert_volterra(k, &diff)?.0)
}

const MAX_SPLIT_DEPTH: usize = 8;

/// Damped Picard iteration for the tail problem
/// `x(t_i) = g(t_i) + ∫_a^{t_i} k(t_i, s) f(s, x(s)) ds`, `i = m+1 .. n-1`,
/// with the boundary value `x(a) = v_a` fixed. Splits the tail in half and
/// recurses when the iteration does not settle.
#[allow(clippy::too_many_arguments)]
fn picard_tail(
    k: &Kernel,
    mesh: &Arc<TimeMesh>,
    f: VectorField,
    a: f64,
    v_a: &DVector<f64>,
    g_tail: &[DVector<f64>],
    start_tail: &[DVector<f64>],
    cfg: &SolverConfig,
    depth: usize,
    report: &mut SolveReport,
) -> Result<Vec<DVector<f64>>> {
    let nodes = mesh.nodes();
    let m = mesh.floor_index(a);
    // the tail may be a sub-problem of a split and end before the last node
    let len = g_tail.len();
    if len == 0 {
        return Ok(Vec::new());
    }
    let dim = mesh.dim();
    let f_at_a = f(a, v_a);
    if f_at_a.len() != dim || f_at_a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericFailure(format!(
            "right-hand side is not finite at the split point t = {a}"
        )));
    }

    // kernel samples reused across iterations; row i needs k(t_i, a) and
    // k(t_i, t_j) for m+1 <= j <= i
    let cache_entries = len * (len + 3) / 2;
    let cache_bytes = cache_entries * (dim * dim * 8 + 48);
    let cache: Option<Vec<Vec<nalgebra::DMatrix<f64>>>> = if cache_bytes <= 200_000_000 {
        Some(
            (0..len)
                .map(|i_rel| {
                    let t_i = nodes[m + 1 + i_rel];
                    let mut row = Vec::with_capacity(i_rel + 2);
                    row.push(k.eval_unchecked(t_i, a));
                    for j_rel in 0..=i_rel {
                        row.push(k.eval_unchecked(t_i, nodes[m + 1 + j_rel]));
                    }
                    row
                })
                .collect(),
        )
    } else {
        None
    };

    let mut x: Vec<DVector<f64>> = start_tail.to_vec();
    let g_scale = 1.0 + g_tail.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut last_residual = f64::INFINITY;
    let mut converged = false;
    let mut scratch: Vec<nalgebra::DMatrix<f64>> = Vec::new();

    for _ in 0..cfg.max_iter {
        report.iterations += 1;
        let fs: Vec<DVector<f64>> = x
            .iter()
            .enumerate()
            .map(|(i_rel, xv)| f(nodes[m + 1 + i_rel], xv))
            .collect();
        if fs.iter().any(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(Error::NumericFailure(
                "right-hand side produced NaN or infinity".into(),
            ));
        }
        let mut residual: f64 = 0.0;
        let mut sup_x: f64 = 0.0;
        let mut next: Vec<DVector<f64>> = Vec::with_capacity(len);
        for i_rel in 0..len {
            let row: &[nalgebra::DMatrix<f64>] = match &cache {
                Some(rows) => &rows[i_rel],
                None => {
                    scratch.clear();
                    let t_i = nodes[m + 1 + i_rel];
                    scratch.push(k.eval_unchecked(t_i, a));
                    for j_rel in 0..=i_rel {
                        scratch.push(k.eval_unchecked(t_i, nodes[m + 1 + j_rel]));
                    }
                    &scratch
                }
            };
            // panel [a, t_{m+1}] then whole panels up to t_i
            let first_half = (nodes[m + 1] - a) / 2.0;
            let mut q = DVector::zeros(dim);
            q.gemv(first_half, &row[0], &f_at_a, 1.0);
            q.gemv(first_half, &row[1], &fs[0], 1.0);
            for j_rel in 0..i_rel {
                let half = (nodes[m + 2 + j_rel] - nodes[m + 1 + j_rel]) / 2.0;
                q.gemv(half, &row[1 + j_rel], &fs[j_rel], 1.0);
                q.gemv(half, &row[2 + j_rel], &fs[j_rel + 1], 1.0);
            }
            let candidate = &g_tail[i_rel] + q;
            residual = residual.max((&candidate - &x[i_rel]).norm());
            sup_x = sup_x.max(x[i_rel].norm());
            next.push(candidate);
        }
        if !residual.is_finite() {
            return Err(Error::NumericFailure("iteration produced NaN or infinity".into()));
        }
        let scale = 1.0 + sup_x;
        let step = cfg.damping * residual;
        if residual <= cfg.tol * scale && step <= cfg.tol * scale {
            converged = true;
            last_residual = residual;
            break;
        }
        for (xi, cand) in x.iter_mut().zip(next) {
            *xi = &*xi * (1.0 - cfg.damping) + cand * cfg.damping;
        }
        last_residual = residual;
        if residual > 1e8 * g_scale {
            break; // diverging; go split
        }
    }
    if converged {
        return Ok(x);
    }
    if len < 2 || depth >= MAX_SPLIT_DEPTH {
        return Err(Error::NonConvergence {
            iterations: report.iterations,
            residual: last_residual,
        });
    }

    // split the tail in half: solve the left part, freeze its selection,
    // continue on the right
    report.splits += 1;
    let mid_rel = (len - 1) / 2;
    let mid = m + 1 + mid_rel;
    let left = picard_tail(
        k,
        mesh,
        f,
        a,
        v_a,
        &g_tail[..=mid_rel],
        &start_tail[..=mid_rel],
        cfg,
        depth + 1,
        report,
    )?;
    // prefix integral ∫_a^{t_mid} k(t_i, s) f(s, x(s)) ds for rows past mid
    let f_left: Vec<DVector<f64>> = left
        .iter()
        .enumerate()
        .map(|(i_rel, xv)| f(nodes[m + 1 + i_rel], xv))
        .collect();
    let mut g_right: Vec<DVector<f64>> = Vec::with_capacity(len - 1 - mid_rel);
    for i in mid + 1..m + 1 + len {
        let t_i = nodes[i];
        let first_half = (nodes[m + 1] - a) / 2.0;
        let mut q = DVector::zeros(dim);
        q.gemv(first_half, &k.eval_unchecked(t_i, a), &f_at_a, 1.0);
        q.gemv(first_half, &k.eval_unchecked(t_i, nodes[m + 1]), &f_left[0], 1.0);
        for j_rel in 0..mid_rel {
            let half = (nodes[m + 2 + j_rel] - nodes[m + 1 + j_rel]) / 2.0;
            q.gemv(half, &k.eval_unchecked(t_i, nodes[m + 1 + j_rel]), &f_left[j_rel], 1.0);
            q.gemv(half, &k.eval_unchecked(t_i, nodes[m + 2 + j_rel]), &f_left[j_rel + 1], 1.0);
        }
        g_right.push(&g_tail[i - m - 1] + q);
    }
    let right = picard_tail(
        k,
        mesh,
        f,
        nodes[mid],
        &left[mid_rel],
        &g_right,
        &g_right,
        cfg,
        depth + 1,
        report,
    )?;
    let mut out = left;
    out.extend(right);
    Ok(out)
}

/// The condensing modulus
/// `phi(L) = sup_t e^{-L t} (∫_0^t (eta(s) e^{L s})^p ds)^{1/p}`.
///
/// Panels integrate `eta^p` against the exponential weight exactly for
/// piecewise-linear `eta^p`, with every exponential evaluated in the stable
/// form `e^{L(s - t)} <= 1`, so large `L` neither overflows nor plateaus at
/// the node spacing.
pub fn phi_of_l(eta_samples: &[f64], p: f64, l: f64, mesh: &TimeMesh) -> Result<f64> {
    if p < 1.0 {
        return Err(Error::invalid("exponent p must be >= 1"));
    }
    let nodes = mesh.nodes();
    if eta_samples.len() != nodes.len() {
        return Err(Error::invalid("eta samples must match the mesh"));
    }
    let alpha = p * l;
    let g: Vec<f64> = eta_samples.iter().map(|e| e.abs().powf(p)).collect();
    let mut sup: f64 = 0.0;
    for (i, &t) in nodes.iter().enumerate() {
        let mut integral = 0.0;
        for j in 0..i {
            integral += weighted_panel(g[j], g[j + 1], nodes[j] - t, nodes[j + 1] - t, alpha);
        }
        sup = sup.max(integral.max(0.0).powf(1.0 / p));
    }
    Ok(sup)
}

/// `∫_{u0}^{u1} (linear interpolant of g0, g1) e^{alpha u} du` for `u <= 0`.
fn weighted_panel(g0: f64, g1: f64, u0: f64, u1: f64, alpha: f64) -> f64 {
    let delta = u1 - u0;
    if delta <= 0.0 {
        return 0.0;
    }
    let z = alpha * delta;
    if z.abs() < 1e-8 {
        // exponential is flat across the panel
        let mid = ((u0 + u1) / 2.0 * alpha).exp();
        return delta * (g0 + g1) / 2.0 * mid;
    }
    let e0 = (alpha * u0).exp();
    let e1 = (alpha * u1).exp();
    // ∫ e^{alpha u} = (e1 - e0)/alpha ; ∫ (u - u0)/delta e^{alpha u} du
    let int_const = (e1 - e0) / alpha;
    let int_ramp = e1 / alpha - (e1 - e0) / (alpha * z);
    g0 * int_const + (g1 - g0) * int_ramp
}

/// Outcome of the doubling search for the condensing weight `L`.
#[derive(Debug, Clone)]
pub struct ChosenL {
    pub l: f64,
    pub phi: f64,
    /// `(2 B)^{-1}` with `B` the kernel q-norm bound.
    pub threshold: f64,
    pub margin: f64,
    /// Set when `B = 0` or `eta = 0` made the condition vacuous.
    pub trivial: bool,
}

/// Finds the smallest `L` in the doubling ladder `0, 1, 2, 4, ...` with
/// `phi(L) < (2 B)^{-1}`, `B` taken from the kernel q-norm profile with `q`
/// conjugate to `p`.
pub fn choose_l(k: &Kernel, eta_samples: &[f64], p: f64, mesh: &TimeMesh) -> Result<ChosenL> {
    let q = QExponent::conjugate_of(p)?;
    let b = k.qnorm_profile(mesh, q)?.b;
    if b == 0.0 {
        return Ok(ChosenL { l: 0.0, phi: 0.0, threshold: f64::INFINITY, margin: f64::INFINITY, trivial: true });
    }
    let threshold = 1.0 / (2.0 * b);
    let phi0 = phi_of_l(eta_samples, p, 0.0, mesh)?;
    if phi0 < threshold {
        let trivial = eta_samples.iter().all(|&e| e == 0.0);
        return Ok(ChosenL { l: 0.0, phi: phi0, threshold, margin: threshold - phi0, trivial });
    }
    let mut l = 1.0;
    while l <= (1u64 << 40) as f64 {
        let phi = phi_of_l(eta_samples, p, l, mesh)?;
        if phi < threshold {
            return Ok(ChosenL { l, phi, threshold, margin: threshold - phi, trivial: false });
        }
        l *= 2.0;
    }
    Err(Error::NonConvergence { iterations: 41, residual: phi_of_l(eta_samples, p, (1u64 << 40) as f64, mesh)? })
}
