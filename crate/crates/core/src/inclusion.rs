//! Set-valued right-hand sides and the sampled solution funnel of the
//! integral inclusion `x(t) ∈ h(t) + ∫_0^t k(t,s) F(s, x(s)) ds`.
//!
//! A funnel sample is a pair `(x, w)` produced by a selection strategy: the
//! strategy picks `w(t) ∈ F(t, x(t))` node by node, the path is updated
//! through the Volterra operator, and the pair is accepted when both the
//! equation residual `||x - h - V(w)||` and the inclusion residual
//! `max_t dist(w(t), F(t, x(t)))` fall below tolerance. Sampling many
//! strategies gives a finite, residual-certified stand-in for the solution
//! set, which the diagnostics here probe for spread, equicontinuity and
//! cross-section coverage.
//!
//! The approximation ladder replaces `F` by its inflation over probe balls
//! of radius `3 r_n`, `r_n = 3^{-n}`; nested funnels sampled with shared
//! per-index seeds are compared against the Gronwall defect bound
//! `3 r_n (e^{2^{2p-1} B^p ||eta||_p^p} - 1)^{1/p}`.

use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{ConditionCheck, Kernel, KernelDomain, QExponent};
use crate::mesh::{Path, PathFamily, TimeMesh};
use crate::operator::apply_volterra;
use crate::set::{certificate_directions, ConvexSet};
use crate::solver::{GrowthData, SolverConfig};

pub type SetFieldFn = Arc<dyn Fn(f64, &DVector<f64>) -> ConvexSet + Send + Sync>;

/// A map `(t, x) -> F(t, x)`, a convex compact subset of `R^d`, together with
/// its declared growth data.
#[derive(Clone)]
pub struct SetField {
    name: String,
    dim: usize,
    eval_fn: SetFieldFn,
    growth: GrowthData,
}

impl std::fmt::Debug for SetField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SetField")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .finish()
    }
}

impl SetField {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        growth: GrowthData,
        eval_fn: SetFieldFn,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("field dimension must be positive"));
        }
        Ok(SetField { name: name.into(), dim, eval_fn, growth })
    }

    /// Constant field `F(t, x) = set`.
    pub fn constant(name: impl Into<String>, set: ConvexSet, growth: GrowthData) -> Result<Self> {
        let dim = set.dim();
        SetField::new(name, dim, growth, Arc::new(move |_t, _x| set.clone()))
    }

    /// Singleton field `F(t, x) = {f(t, x)}`.
    pub fn singleton(
        name: impl Into<String>,
        dim: usize,
        growth: GrowthData,
        f: crate::solver::SharedVectorField,
    ) -> Result<Self> {
        SetField::new(
            name,
            dim,
            growth,
            Arc::new(move |t, x| ConvexSet::singleton(f(t, x))),
        )
    }

    pub fn eval(&self, t: f64, x: &DVector<f64>) -> ConvexSet {
        (self.eval_fn)(t, x)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn growth(&self) -> &GrowthData {
        &self.growth
    }

    /// Sampled check of the value conditions on a probe grid: sets are
    /// nonempty by construction; verified here is the uniform bound
    /// `||F(t, x)|| <= mu(t)` at the mesh nodes and probe states.
    pub fn check_bounds(&self, mesh: &TimeMesh, probes: &[DVector<f64>]) -> Result<ConditionCheck> {
        if self.growth.mu.len() != mesh.len() {
            return Err(Error::invalid("growth samples do not match the mesh"));
        }
        let mut worst: f64 = f64::NEG_INFINITY;
        for (i, &t) in mesh.nodes().iter().enumerate() {
            for x in probes {
                let bound = self.eval(t, x).norm_bound();
                worst = worst.max(bound - self.growth.mu[i]);
            }
        }
        // holds when every sampled set stays inside the declared bound
        Ok(ConditionCheck { holds: worst <= 1e-9, lhs: worst, threshold: 0.0, margin: -worst })
    }

    /// The inflated field `F_r(t, x) = hull of F(t, y)` over the probe set of
    /// `y` in the ball `B(x, r)` (center, axis points, scaled diagonals),
    /// widened to a single representable convex set containing all probes.
    /// `r = 0` returns the field evaluation unchanged.
    pub fn inflate(&self, r: f64) -> Result<SetField> {
        if !r.is_finite() || r < 0.0 {
            return Err(Error::invalid("inflation radius must be nonnegative"));
        }
        let base = self.eval_fn.clone();
        let dim = self.dim;
        let name = format!("{}+inflate({r})", self.name);
        let eval: SetFieldFn = Arc::new(move |t, x| {
            if r == 0.0 {
                return base(t, x);
            }
            let sets: Vec<ConvexSet> = probe_points(x, r).iter().map(|y| base(t, y)).collect();
            widen_to_hull(&sets)
        });
        SetField::new(name, dim, self.growth.clone(), eval)
    }
}

/// Deterministic probe set in the ball `B(x, r)`: the center, the `2d` axis
/// points and the `2^d` scaled diagonal corners.
pub fn probe_points(x: &DVector<f64>, r: f64) -> Vec<DVector<f64>> {
    let d = x.len();
    let mut pts = Vec::with_capacity(1 + 2 * d + (1 << d));
    pts.push(x.clone());
    for i in 0..d {
        let mut p = x.clone();
        p[i] += r;
        pts.push(p);
        let mut m = x.clone();
        m[i] -= r;
        pts.push(m);
    }
    let scale = r / (d as f64).sqrt();
    for mask in 0..(1usize << d) {
        let mut p = x.clone();
        for i in 0..d {
            p[i] += if mask & (1 << i) != 0 { scale } else { -scale };
        }
        pts.push(p);
    }
    pts
}

/// A convex set containing every listed set: the concatenated polytope when
/// all sets are polytopes (the exact hull), the componentwise support-bound
/// box otherwise.
fn widen_to_hull(sets: &[ConvexSet]) -> ConvexSet {
    let all_polytopes = sets.iter().all(|s| matches!(s, ConvexSet::Polytope { .. }));
    if all_polytopes {
        let vertices: Vec<DVector<f64>> = sets
            .iter()
            .flat_map(|s| match s {
                ConvexSet::Polytope { vertices } => vertices.clone(),
                _ => unreachable!(),
            })
            .collect();
        return ConvexSet::Polytope { vertices };
    }
    let (mut lower, mut upper) = sets[0].bounding_box();
    for s in &sets[1..] {
        let (lo, hi) = s.bounding_box();
        for i in 0..lower.len() {
            lower[i] = lower[i].min(lo[i]);
            upper[i] = upper[i].max(hi[i]);
        }
    }
    ConvexSet::Box { lower, upper }
}

/// How a selection `w(t) ∈ F(t, x(t))` is picked at each node.
#[derive(Debug, Clone)]
pub enum SelectionStrategy {
    /// Support point in one fixed direction.
    Extremal(DVector<f64>),
    /// Support point in piecewise-constant directions: `dirs[i]` applies on
    /// `[switches[i-1], switches[i])`, with `dirs.len() = switches.len() + 1`.
    PiecewiseExtremal { switches: Vec<f64>, dirs: Vec<DVector<f64>> },
    /// Metric projection of the previous selection onto the current set;
    /// the first sweep projects the zero path.
    ProjectRelax,
}

impl SelectionStrategy {
    fn direction_at(&self, t: f64) -> Option<&DVector<f64>> {
        match self {
            SelectionStrategy::Extremal(d) => Some(d),
            SelectionStrategy::PiecewiseExtremal { switches, dirs } => {
                let idx = switches.partition_point(|&s| s <= t);
                Some(&dirs[idx])
            }
            SelectionStrategy::ProjectRelax => None,
        }
    }

    /// Applies the strategy to one set value: the support point for the
    /// extremal kinds, the projection of `prev` for project-relax.
    pub fn select(
        &self,
        set: &ConvexSet,
        t: f64,
        prev: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        match self.direction_at(t) {
            Some(dir) => Ok(set.support(dir)?.point),
            None => Ok(set.project(prev)),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            SelectionStrategy::Extremal(d) => format!("extremal({:?})", d.as_slice()),
            SelectionStrategy::PiecewiseExtremal { switches, .. } => {
                format!("piecewise-extremal({} switches)", switches.len())
            }
            SelectionStrategy::ProjectRelax => "project-relax".into(),
        }
    }
}

/// One residual-certified funnel member.
#[derive(Debug, Clone)]
pub struct FunnelSample {
    pub index: usize,
    pub x: Path,
    pub w: Path,
    pub eq_residual: f64,
    pub incl_residual: f64,
    pub accepted: bool,
    pub iterations: usize,
}

/// Provenance of a funnel run.
#[derive(Debug, Clone, Default)]
pub struct FunnelTag {
    pub kernel: String,
    pub field: String,
    pub strategy: String,
    pub seed: u64,
    pub requested: usize,
    pub nodes: usize,
    pub horizon: f64,
    pub h_sup: f64,
}

/// A finite sample of the solution set: accepted members plus the rejects.
#[derive(Debug, Clone)]
pub struct Funnel {
    pub samples: Vec<FunnelSample>,
    pub rejected: Vec<FunnelSample>,
    pub tag: FunnelTag,
}

impl Funnel {
    /// Accepted solution paths as a family.
    pub fn family(&self) -> Result<PathFamily> {
        PathFamily::new(self.samples.iter().map(|s| s.x.clone()).collect())
    }
}

/// Fixed-point iteration for one selection strategy:
/// `w(t) <- select(F(t, x(t)))`, `x <- (1 - damping) x + damping (h + V(w))`.
/// The returned residuals are recomputed from the final pair through the
/// public operator and the metric projection.
pub fn solve_inclusion_selection(
    k: &Kernel,
    field: &SetField,
    h: &Path,
    strategy: &SelectionStrategy,
    cfg: &SolverConfig,
) -> Result<FunnelSample> {
    cfg.validate()?;
    if k.domain() != KernelDomain::Triangle {
        return Err(Error::invalid("inclusion solver needs a triangular kernel"));
    }
    if field.dim() != h.mesh().dim() || k.dim() != h.mesh().dim() {
        return Err(Error::invalid("field, kernel and mesh dimensions differ"));
    }
    // sampled value-bound check at the origin and along the inhomogeneity
    let mid = h.mesh().len() / 2;
    let probes = vec![
        DVector::zeros(field.dim()),
        h.value(0).clone(),
        h.value(mid).clone(),
        h.values().last().unwrap().clone(),
    ];
    let bound_check = field.check_bounds(h.mesh(), &probes)?;
    if !bound_check.holds {
        return Err(Error::invalid(format!(
            "field violates its declared uniform bound by {:.3e}",
            bound_check.lhs
        )));
    }

    let mesh = h.mesh().clone();
    let nodes = mesh.nodes();
    let mut x = h.clone();
    let mut w = Path::zero(mesh.clone());
    // initial sweep fills w from the strategy at x = h
    for (j, &t) in nodes.iter().enumerate() {
        let set = field.eval(t, x.value(j));
        w.values_mut()[j] = strategy.select(&set, t, w.value(j))?;
    }

    let mut iterations = 0;
    let mut settled = false;
    for _ in 0..cfg.max_iter {
        iterations += 1;
        let candidate = h.add(&apply_volterra(k, &w)?)?;
        let step = candidate.sup_distance(&x)? * cfg.damping;
        let scale = 1.0 + x.sup_norm();
        let x_next = if cfg.damping == 1.0 {
            candidate
        } else {
            x.scale(1.0 - cfg.damping).add(&candidate.scale(cfg.damping))?
        };
        if x_next.values().iter().any(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(Error::NumericFailure("inclusion iterate is not finite".into()));
        }
        x = x_next;
        for (j, &t) in nodes.iter().enumerate() {
            let set = field.eval(t, x.value(j));
            w.values_mut()[j] = strategy.select(&set, t, w.value(j))?;
        }
        if step <= cfg.tol * scale {
            settled = true;
            break;
        }
    }
    // final sync and independent residual measurements
    let x = h.add(&apply_volterra(k, &w)?)?;
    let eq_residual = x.sup_distance(&h.add(&apply_volterra(k, &w)?)?)?;
    let incl_residual = nodes
        .iter()
        .enumerate()
        .map(|(j, &t)| field.eval(t, x.value(j)).distance_to(w.value(j)))
        .fold(0.0, f64::max);
    let tol = cfg.tol * (1.0 + x.sup_norm());
    let accepted = settled && eq_residual <= tol && incl_residual <= tol;
    Ok(FunnelSample { index: 0, x, w, eq_residual, incl_residual, accepted, iterations })
}

fn per_sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    // splitmix finalizer keeps per-index streams decorrelated
    let mut z = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

fn random_unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_iterator(dim, (0..dim).map(|_| rng.random_range(-1.0..1.0)));
        let n = v.norm();
        if n > 1e-3 {
            return v / n;
        }
    }
}

/// The default strategy for sample `index` of `total`: a bang-bang selection
/// with one switch. The switch time is stratified over `[0, T]` with
/// seed-dependent jitter and the orientation alternates with the index, so
/// the endpoint cross-section of an interval-valued funnel tiles its range.
pub fn default_strategy(
    seed: u64,
    index: usize,
    total: usize,
    horizon: f64,
    dim: usize,
) -> SelectionStrategy {
    let mut rng = per_sample_rng(seed, index);
    let jitter: f64 = rng.random_range(0.0..1.0);
    let tau = horizon * (index as f64 + jitter) / total as f64;
    let dir = if dim == 1 {
        DVector::from_element(1, 1.0)
    } else {
        random_unit_vector(&mut rng, dim)
    };
    let flip = if index.is_multiple_of(2) { 1.0 } else { -1.0 };
    SelectionStrategy::PiecewiseExtremal {
        switches: vec![tau],
        dirs: vec![&dir * flip, &dir * -flip],
    }
}

/// Draws `n_samples` funnel members with deterministic per-index strategies.
/// Sample `i` uses the strategy derived from `(seed, i)` alone, so replays
/// and ladder runs pair up member by member regardless of thread count.
pub fn sample_funnel(
    k: &Kernel,
    field: &SetField,
    h: &Path,
    n_samples: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<Funnel> {
    if n_samples == 0 {
        return Err(Error::invalid("need at least one funnel sample"));
    }
    let horizon = h.mesh().horizon();
    let dim = field.dim();
    let runs: Vec<Result<FunnelSample>> = (0..n_samples)
        .into_par_iter()
        .map(|index| {
            let strategy = default_strategy(seed, index, n_samples, horizon, dim);
            let mut sample = solve_inclusion_selection(k, field, h, &strategy, cfg)?;
            sample.index = index;
            Ok(sample)
        })
        .collect();

    let mut samples = Vec::new();
    let mut rejected = Vec::new();
    for run in runs {
        let sample = run?;
        if sample.accepted {
            samples.push(sample);
        } else {
            rejected.push(sample);
        }
    }
    if samples.is_empty() {
        return Err(Error::EmptyFunnel(n_samples));
    }
    Ok(Funnel {
        samples,
        rejected,
        tag: FunnelTag {
            kernel: k.name().to_string(),
            field: field.name().to_string(),
            strategy: "stratified-bang-bang".into(),
            seed,
            requested: n_samples,
            nodes: h.mesh().len(),
            horizon,
            h_sup: h.sup_norm(),
        },
    })
}

/// Hypothesis check `4 B ||eta||_p < 1` backing the compact-envelope
/// construction.
pub fn check_e1(k: &Kernel, eta_samples: &[f64], p: f64, mesh: &TimeMesh) -> Result<ConditionCheck> {
    let q = QExponent::conjugate_of(p)?;
    let b = k.qnorm_profile(mesh, q)?.b;
    let eta_norm = mesh.lp_norm_samples(eta_samples, p)?;
    Ok(ConditionCheck::strict(4.0 * b * eta_norm, 1.0))
}

/// The funnel-spread constant `3 (e^{2^{2p-1} B^p ||eta||_p^p} - 1)^{1/p}`;
/// multiplied by `r_n` it bounds the spread of the level-`n` funnel around
/// the limit set.
pub fn defect_constant(p: f64, b: f64, eta_norm: f64) -> Result<f64> {
    if p < 1.0 {
        return Err(Error::invalid("exponent p must be >= 1"));
    }
    let exponent = 2.0_f64.powf(2.0 * p - 1.0) * b.powf(p) * eta_norm.powf(p);
    Ok(3.0 * (exponent.exp() - 1.0).powf(1.0 / p))
}

/// One rung of the nesting ladder.
#[derive(Debug, Clone)]
pub struct NestingLevel {
    pub n: usize,
    pub r_n: f64,
    /// Directed semidistance from the level `n+1` funnel into the level `n`
    /// funnel.
    pub semidistance: f64,
    /// `defect_constant * r_n`.
    pub defect_bound: f64,
}

#[derive(Debug, Clone)]
pub struct NestingReport {
    pub levels: Vec<NestingLevel>,
}

/// Compares consecutive funnels of the approximation ladder built from
/// `inflate(3 r_n)`, `r_n = 3^{-n}`, `n = 1, 2, ...` (funnel `i` in the slice
/// is level `n = i + 1`).
pub fn nesting_report(
    funnels: &[Funnel],
    p: f64,
    b: f64,
    eta_norm: f64,
) -> Result<NestingReport> {
    if funnels.len() < 2 {
        return Err(Error::invalid("nesting report needs at least two funnels"));
    }
    let constant = defect_constant(p, b, eta_norm)?;
    let families: Vec<PathFamily> = funnels.iter().map(|f| f.family()).collect::<Result<_>>()?;
    let mut levels = Vec::new();
    for i in 0..families.len() - 1 {
        let n = i + 1;
        let r_n = 3.0_f64.powi(-(n as i32));
        let semidistance = families[i + 1].semidistance_to(&families[i])?;
        levels.push(NestingLevel { n, r_n, semidistance, defect_bound: constant * r_n });
    }
    Ok(NestingReport { levels })
}

/// Per-node cross-section coverage for scalar funnels.
#[derive(Debug, Clone)]
pub struct CrossSection {
    pub time: f64,
    pub max_gap: f64,
    pub diameter: f64,
}

/// Structure diagnostics of a funnel: equicontinuity modulus against its
/// kernel-growth bound, covering numbers on a geometric ladder of radii, and
/// (for scalar states) sorted-gap cross sections.
#[derive(Debug, Clone)]
pub struct StructureReport {
    pub xi: f64,
    pub modulus: f64,
    /// `mod_h(xi) + ||k(t,.) - k(tau,.)||_q ||mu||_p + B (∫ mu^p over a xi-gap)^{1/p}`.
    pub modulus_bound: f64,
    pub covering: Vec<(f64, usize)>,
    pub cross_sections: Option<Vec<CrossSection>>,
    /// Largest member sup norm, against the ball bound `||h|| + B ||mu||_p`.
    pub sup_norm_max: f64,
    pub sup_norm_bound: f64,
}

pub fn structure_diagnostics(
    funnel: &Funnel,
    k: &Kernel,
    h: &Path,
    mu_samples: &[f64],
    p: f64,
) -> Result<StructureReport> {
    let family = funnel.family()?;
    let mesh = family.mesh().clone();
    let q = QExponent::conjugate_of(p)?;
    let xi = mesh.max_step();

    let modulus = family.modulus_of_continuity(xi)?;
    let mu_norm = mesh.lp_norm_samples(mu_samples, p)?;
    let qn = k.qnorm_profile(&mesh, q)?;
    let kernel_mod = k.qnorm_modulus(&mesh, q, xi)?;
    let h_mod = PathFamily::new(vec![h.clone()])?.modulus_of_continuity(xi)?;
    // largest (∫_tau^t mu^p)^{1/p} over gaps of length at most xi
    let nodes = mesh.nodes();
    let mut local_mu: f64 = 0.0;
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            if nodes[j] - nodes[i] > xi {
                break;
            }
            let seg: f64 = (i..j)
                .map(|l| {
                    (nodes[l + 1] - nodes[l])
                        * (mu_samples[l].powf(p) + mu_samples[l + 1].powf(p))
                        / 2.0
                })
                .sum();
            local_mu = local_mu.max(seg.powf(1.0 / p));
        }
    }
    let modulus_bound = h_mod + kernel_mod * mu_norm + qn.b * local_mu;

    let diam = family.diameter();
    let mut covering = Vec::new();
    if diam > 0.0 {
        for level in 0..6 {
            let eps = diam / 2.0_f64.powi(level);
            covering.push((eps, family.covering_number(eps)?));
        }
    }

    let cross_sections = if mesh.dim() == 1 {
        let mut sections = Vec::with_capacity(nodes.len());
        for (i, &t) in nodes.iter().enumerate() {
            let mut vals: Vec<f64> = family.members().iter().map(|m| m.value(i)[0]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let diameter = vals.last().unwrap() - vals.first().unwrap();
            let max_gap = vals.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
            sections.push(CrossSection { time: t, max_gap, diameter });
        }
        Some(sections)
    } else {
        None
    };

    let sup_norm_max = family.members().iter().map(|m| m.sup_norm()).fold(0.0, f64::max);
    let sup_norm_bound = h.sup_norm() + qn.b * mu_norm;

    Ok(StructureReport {
        xi,
        modulus,
        modulus_bound,
        covering,
        cross_sections,
        sup_norm_max,
        sup_norm_bound,
    })
}

/// Monotonicity certificate for the inflation: at every probe point the
/// larger-radius field contains the smaller one (support dominance on the
/// certificate directions).
pub fn inflation_is_monotone(
    field: &SetField,
    r_small: f64,
    r_large: f64,
    mesh: &TimeMesh,
    states: &[DVector<f64>],
) -> Result<bool> {
    let small = field.inflate(r_small)?;
    let large = field.inflate(r_large)?;
    let dirs = certificate_directions(field.dim());
    for &t in mesh.nodes() {
        for x in states {
            let inner = small.eval(t, x);
            let outer = large.eval(t, x);
            if !crate::set::contains_certified(&outer, &inner, &dirs)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
