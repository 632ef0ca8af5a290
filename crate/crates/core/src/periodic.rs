//! Poincaré-type periodic solution finders.
//!
//! For the Volterra problem the inhomogeneity is generated by a stable
//! operator family: `h(t) = U(t) x0` with `U(t) = e^{t A}`. The map
//! `P(x0) = x(T)` evaluates the solution at the end time; its fixed points
//! generate `T`-periodic solutions. The family certificate is either uniform
//! exponential decay `||U(t)|| <= e^{-omega t}` or the weaker endpoint
//! contraction `||U(T)|| < 1`, and the invariant ball radius
//! `R = (1 - rate)^{-1} ||k(T, .)||_q ||mu||_p` comes with it.
//!
//! For the Hammerstein problem on the square, a `T`-periodic kernel and
//! inhomogeneity make every converged solution `T`-periodic without the
//! iteration enforcing it; the solver reports `|x(0) - x(T)|` post hoc.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::inclusion::{solve_inclusion_selection, SelectionStrategy, SetField};
use crate::kernel::{spectral_norm, ConditionCheck, Kernel, KernelDomain, QExponent};
use crate::mesh::{Path, TimeMesh};
use crate::operator::apply_fredholm;
use crate::solver::{solve_equation, GrowthData, SolverConfig};

/// Right-hand side of a periodic problem: a plain function or a set-valued
/// field driven by one selection strategy.
#[derive(Clone)]
pub enum Rhs {
    Function(crate::solver::SharedVectorField),
    Field { field: SetField, strategy: SelectionStrategy },
}

impl Rhs {
    pub fn function(f: impl Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static) -> Self {
        Rhs::Function(Arc::new(f))
    }
}

/// Which stability certificate the family carries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StabilityCertificate {
    /// `||U(t)|| <= e^{-omega t}` at every node.
    ExponentialDecay { omega: f64 },
    /// Only `||U(T)|| < 1`.
    EndpointContraction { endpoint_norm: f64 },
}

/// The family `U(t_i) = e^{t_i A}` sampled on a mesh, with its certificate.
#[derive(Debug, Clone)]
pub struct StableFamily {
    generator: DMatrix<f64>,
    mesh: Arc<TimeMesh>,
    samples: Vec<DMatrix<f64>>,
    certificate: StabilityCertificate,
}

impl StableFamily {
    /// Builds the matrix exponentials at the nodes and certifies stability:
    /// exponential decay at the claimed rate when it holds node by node,
    /// otherwise the endpoint contraction; an error when neither does.
    pub fn from_generator(
        generator: DMatrix<f64>,
        mesh: Arc<TimeMesh>,
        omega_claim: f64,
    ) -> Result<Self> {
        let d = mesh.dim();
        if generator.nrows() != d || generator.ncols() != d {
            return Err(Error::invalid("generator dimension does not match mesh"));
        }
        if !omega_claim.is_finite() || omega_claim <= 0.0 {
            return Err(Error::invalid("claimed decay rate must be positive"));
        }
        let mut samples: Vec<DMatrix<f64>> = mesh
            .nodes()
            .iter()
            .map(|&t| (&generator * t).exp())
            .collect();
        samples[0] = DMatrix::identity(d, d);

        let decay_ok = mesh
            .nodes()
            .iter()
            .zip(&samples)
            .all(|(&t, u)| spectral_norm(u) <= (-omega_claim * t).exp() * (1.0 + 1e-9));
        let certificate = if decay_ok {
            StabilityCertificate::ExponentialDecay { omega: omega_claim }
        } else {
            let endpoint_norm = spectral_norm(samples.last().unwrap());
            if endpoint_norm < 1.0 {
                StabilityCertificate::EndpointContraction { endpoint_norm }
            } else {
                return Err(Error::NotStable(format!(
                    "neither exponential decay at rate {omega_claim} nor ||U(T)|| < 1 \
                     (endpoint norm {endpoint_norm:.6})"
                )));
            }
        };
        Ok(StableFamily { generator, mesh, samples, certificate })
    }

    pub fn mesh(&self) -> &Arc<TimeMesh> {
        &self.mesh
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    pub fn certificate(&self) -> StabilityCertificate {
        self.certificate
    }

    pub fn sample(&self, i: usize) -> &DMatrix<f64> {
        &self.samples[i]
    }

    /// Contraction rate of the endpoint map: `e^{-omega T}` under decay,
    /// `||U(T)||` under the endpoint certificate.
    pub fn contraction_rate(&self) -> f64 {
        match self.certificate {
            StabilityCertificate::ExponentialDecay { omega } => {
                (-omega * self.mesh.horizon()).exp()
            }
            StabilityCertificate::EndpointContraction { endpoint_norm } => endpoint_norm,
        }
    }

    /// The inhomogeneity `t -> U(t) x0` as a path.
    pub fn inhomogeneity(&self, x0: &DVector<f64>) -> Result<Path> {
        let values = self.samples.iter().map(|u| u * x0).collect();
        Path::new(self.mesh.clone(), values)
    }
}

/// Whether failed threshold checks abort a run or merely annotate it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionPolicy {
    Enforce,
    WarnAndProceed,
}

/// Contraction threshold for the periodic Volterra problem:
/// `B ||eta||_p < 2^{2/p - 3} e^{-1/p}`.
pub fn check_contraction_condition(
    k: &Kernel,
    eta_samples: &[f64],
    p: f64,
    mesh: &TimeMesh,
) -> Result<ConditionCheck> {
    let q = QExponent::conjugate_of(p)?;
    let b = k.qnorm_profile(mesh, q)?.b;
    let eta_norm = mesh.lp_norm_samples(eta_samples, p)?;
    let threshold = 2.0_f64.powf(2.0 / p - 3.0) * (-1.0 / p).exp();
    Ok(ConditionCheck::strict(b * eta_norm, threshold))
}

/// Contraction threshold for the Hammerstein problem: `2 B ||eta||_p < 1`
/// with `B` over the full square.
pub fn check_hammerstein_condition(
    k: &Kernel,
    eta_samples: &[f64],
    p: f64,
    mesh: &TimeMesh,
) -> Result<ConditionCheck> {
    if k.domain() != KernelDomain::Square {
        return Err(Error::invalid("Hammerstein condition needs a kernel on the square"));
    }
    let q = QExponent::conjugate_of(p)?;
    let b = k.qnorm_profile(mesh, q)?.b;
    let eta_norm = mesh.lp_norm_samples(eta_samples, p)?;
    Ok(ConditionCheck::strict(2.0 * b * eta_norm, 1.0))
}

fn solve_with_rhs(k: &Kernel, rhs: &Rhs, h: &Path, cfg: &SolverConfig) -> Result<(Path, usize)> {
    match rhs {
        Rhs::Function(f) => {
            let (x, report) = solve_equation(k, &**f, h, cfg)?;
            Ok((x, report.iterations))
        }
        Rhs::Field { field, strategy } => {
            let sample = solve_inclusion_selection(k, field, h, strategy, cfg)?;
            if !sample.accepted {
                return Err(Error::NonConvergence {
                    iterations: sample.iterations,
                    residual: sample.eq_residual.max(sample.incl_residual),
                });
            }
            Ok((sample.x, sample.iterations))
        }
    }
}

/// Evaluates the Poincaré-type map once: solve with `h = U(.) x0`, return
/// `x(T)`.
pub fn poincare_map(
    k: &Kernel,
    rhs: &Rhs,
    family: &StableFamily,
    x0: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<DVector<f64>> {
    let h = family.inhomogeneity(x0)?;
    let (x, _) = solve_with_rhs(k, rhs, &h, cfg)?;
    Ok(x.values().last().unwrap().clone())
}

/// Set-valued version: one end value per strategy.
pub fn poincare_map_set(
    k: &Kernel,
    field: &SetField,
    strategies: &[SelectionStrategy],
    family: &StableFamily,
    x0: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<Vec<DVector<f64>>> {
    strategies
        .iter()
        .map(|strategy| {
            let rhs = Rhs::Field { field: field.clone(), strategy: strategy.clone() };
            poincare_map(k, &rhs, family, x0, cfg)
        })
        .collect()
}

/// A fixed point of the end-time map together with the orbit it generates.
#[derive(Debug, Clone)]
pub struct PeriodicResult {
    pub x0: DVector<f64>,
    pub orbit: Path,
    pub fixed_point_residual: f64,
    pub periodicity_residual: f64,
    pub iterations: usize,
    /// Geometric mean of trailing step ratios; 0 when the iteration settled
    /// before two steps were measured.
    pub contraction_estimate: f64,
    pub condition: ConditionCheck,
    pub ball_radius: f64,
    pub accepted: bool,
}

/// Iterates the Poincaré map from `x0 = 0`, projecting back into the
/// invariant ball `D(0, R)`, `R = (1 - rate)^{-1} ||k(T,.)||_q ||mu||_p`,
/// until `|x0 - P(x0)|` settles. The orbit of the fixed point is returned
/// with both residuals measured.
pub fn find_periodic_volterra(
    k: &Kernel,
    rhs: &Rhs,
    family: &StableFamily,
    growth: &GrowthData,
    cfg: &SolverConfig,
    policy: ConditionPolicy,
) -> Result<PeriodicResult> {
    cfg.validate()?;
    let mesh = family.mesh();
    let condition = check_contraction_condition(k, &growth.eta, cfg.p, mesh)?;
    if !condition.holds && policy == ConditionPolicy::Enforce {
        return Err(Error::invalid(format!(
            "contraction condition fails: B ||eta||_p = {:.6} >= {:.6}",
            condition.lhs, condition.threshold
        )));
    }
    let q = QExponent::conjugate_of(cfg.p)?;
    let profile = k.qnorm_profile(mesh, q)?;
    let end_row_norm = *profile.profile.last().unwrap();
    let mu_norm = mesh.lp_norm_samples(&growth.mu, cfg.p)?;
    let rate = family.contraction_rate();
    let ball_radius = end_row_norm * mu_norm / (1.0 - rate);

    let dim = mesh.dim();
    let mut x0: DVector<f64> = DVector::zeros(dim);
    let mut iterations = 0;
    let mut prev_step: Option<f64> = None;
    let mut ratios: Vec<f64> = Vec::new();
    let mut residual = f64::INFINITY;
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        iterations += 1;
        let px = poincare_map(k, rhs, family, &x0, cfg)?;
        let step = (&px - &x0).norm();
        if let Some(prev) = prev_step {
            if prev > 1e-14 {
                ratios.push(step / prev);
            }
        }
        prev_step = Some(step);
        residual = step;
        if step <= cfg.tol * (1.0 + x0.norm()) {
            converged = true;
            break;
        }
        let norm = px.norm();
        x0 = if norm > ball_radius && norm > 0.0 { px * (ball_radius / norm) } else { px };
    }
    if !converged {
        return Err(Error::NonConvergence { iterations, residual });
    }
    let contraction_estimate = if ratios.is_empty() {
        0.0
    } else {
        let tail = &ratios[ratios.len().saturating_sub(5)..];
        (tail.iter().map(|r| r.max(1e-300).ln()).sum::<f64>() / tail.len() as f64).exp()
    };

    let h = family.inhomogeneity(&x0)?;
    let (orbit, _) = solve_with_rhs(k, rhs, &h, cfg)?;
    let fixed_point_residual = (orbit.values().last().unwrap() - &x0).norm();
    let periodicity_residual = (orbit.value(0) - orbit.values().last().unwrap()).norm();
    let tol = cfg.tol * (1.0 + x0.norm());
    let accepted = fixed_point_residual <= tol && periodicity_residual <= tol;
    Ok(PeriodicResult {
        x0,
        orbit,
        fixed_point_residual,
        periodicity_residual,
        iterations,
        contraction_estimate,
        condition,
        ball_radius,
        accepted,
    })
}

/// A converged Hammerstein run with its post-hoc periodicity measurement.
#[derive(Debug, Clone)]
pub struct HammersteinPeriodic {
    pub x: Path,
    pub w: Path,
    pub iterations: usize,
    pub residual: f64,
    pub periodicity_residual: f64,
    pub condition: ConditionCheck,
    pub accepted: bool,
}

/// Fixed-point iteration `x <- h + V_T(select(F(., x(.))))` for the
/// full-interval problem. Requires a `T`-periodic inhomogeneity and kernel
/// (sampled check); periodicity of the solution is *measured*, never
/// enforced.
pub fn solve_hammerstein_periodic(
    k: &Kernel,
    rhs: &Rhs,
    h: &Path,
    eta_samples: &[f64],
    cfg: &SolverConfig,
    policy: ConditionPolicy,
) -> Result<HammersteinPeriodic> {
    cfg.validate()?;
    if k.domain() != KernelDomain::Square {
        return Err(Error::invalid("Hammerstein solver needs a kernel on the square"));
    }
    let mesh = h.mesh().clone();
    let n = mesh.len();
    let ptol = cfg.tol.max(1e-9);

    let h_gap = (h.value(0) - h.value(n - 1)).norm();
    if h_gap > ptol * (1.0 + h.sup_norm()) {
        return Err(Error::invalid(format!(
            "inhomogeneity is not T-periodic: |h(0) - h(T)| = {h_gap:.3e}"
        )));
    }
    let q = QExponent::conjugate_of(cfg.p)?;
    let profile = k.qnorm_profile(&mesh, q)?;
    let nodes = mesh.nodes();
    let horizon = mesh.horizon();
    let row_gap: Vec<f64> = nodes
        .iter()
        .map(|&s| spectral_norm(&(k.eval_unchecked(0.0, s) - k.eval_unchecked(horizon, s))))
        .collect();
    let kernel_gap = match q {
        QExponent::Infinite => row_gap.iter().cloned().fold(0.0, f64::max),
        QExponent::Finite(qv) => mesh.lp_norm_samples(&row_gap, qv)?,
    };
    if kernel_gap > ptol * (1.0 + profile.b) {
        return Err(Error::invalid(format!(
            "kernel is not T-periodic in t: ||k(0,.) - k(T,.)||_q = {kernel_gap:.3e}"
        )));
    }

    let condition = check_hammerstein_condition(k, eta_samples, cfg.p, &mesh)?;
    if !condition.holds && policy == ConditionPolicy::Enforce {
        return Err(Error::invalid(format!(
            "Hammerstein contraction condition fails: 2 B ||eta||_p = {:.6} >= 1",
            condition.lhs
        )));
    }

    let select = |x: &Path, w_prev: &Path| -> Result<Path> {
        let mut w = w_prev.clone();
        match rhs {
            Rhs::Function(f) => {
                for (j, &t) in nodes.iter().enumerate() {
                    w.values_mut()[j] = f(t, x.value(j));
                }
            }
            Rhs::Field { field, strategy } => {
                for (j, &t) in nodes.iter().enumerate() {
                    let set = field.eval(t, x.value(j));
                    w.values_mut()[j] = strategy.select(&set, t, w_prev.value(j))?;
                }
            }
        }
        Ok(w)
    };

    let mut x = h.clone();
    let mut w = select(&x, &Path::zero(mesh.clone()))?;
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        iterations += 1;
        let candidate = h.add(&apply_fredholm(k, &w)?)?;
        if candidate.values().iter().any(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(Error::NumericFailure("Hammerstein iterate is not finite".into()));
        }
        let residual = candidate.sup_distance(&x)?;
        let scale = 1.0 + x.sup_norm();
        let x_next = if cfg.damping == 1.0 {
            candidate
        } else {
            x.scale(1.0 - cfg.damping).add(&candidate.scale(cfg.damping))?
        };
        x = x_next;
        w = select(&x, &w)?;
        if residual <= cfg.tol * scale && cfg.damping * residual <= cfg.tol * scale {
            converged = true;
            break;
        }
    }
    let final_residual = x.sup_distance(&h.add(&apply_fredholm(k, &w)?)?)?;
    if !converged {
        return Err(Error::NonConvergence { iterations, residual: final_residual });
    }
    let periodicity_residual = (x.value(0) - x.value(n - 1)).norm();
    let accepted = periodicity_residual <= cfg.tol * (1.0 + x.sup_norm());
    Ok(HammersteinPeriodic {
        x,
        w,
        iterations,
        residual: final_residual,
        periodicity_residual,
        condition,
        accepted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inclusion::SetField;
    use crate::kernel::catalog;
    use crate::set::ConvexSet;
    use std::f64::consts::E;

    #[test]
    fn stable_family_certificates() {
        let mesh = TimeMesh::uniform(1.0, 51, 2).unwrap();
        let a = DMatrix::identity(2, 2) * -1.0;
        let fam = StableFamily::from_generator(a, mesh.clone(), 1.0).unwrap();
        assert!(matches!(fam.certificate(), StabilityCertificate::ExponentialDecay { .. }));
        for (i, &t) in mesh.nodes().iter().enumerate() {
            assert!((spectral_norm(fam.sample(i)) - (-t).exp()).abs() < 1e-12);
        }

        let zero = DMatrix::zeros(2, 2);
        assert!(matches!(
            StableFamily::from_generator(zero, mesh.clone(), 1.0),
            Err(Error::NotStable(_))
        ));
    }

    #[test]
    fn transient_growth_downgrades_to_endpoint_certificate() {
        let mesh = TimeMesh::uniform(6.0, 121, 2).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 5.0, 0.0, -1.0]);
        let fam = StableFamily::from_generator(a, mesh, 1.0).unwrap();
        match fam.certificate() {
            StabilityCertificate::EndpointContraction { endpoint_norm } => {
                assert!(endpoint_norm < 1.0);
                // e^{-6} || [[1, 30], [0, 1]] || computed directly
                let m = DMatrix::from_row_slice(2, 2, &[1.0, 30.0, 0.0, 1.0]);
                let expected = (-6.0_f64).exp() * spectral_norm(&m);
                assert!((endpoint_norm - expected).abs() < 1e-9);
            }
            other => panic!("expected endpoint certificate, got {other:?}"),
        }
    }

    #[test]
    fn poincare_map_closed_forms() {
        let mesh = TimeMesh::uniform(1.0, 401, 1).unwrap();
        let k = catalog("convolution-exp(1)", 1.0, 1).unwrap();
        let a = DMatrix::from_element(1, 1, -1.0);
        let fam = StableFamily::from_generator(a, mesh, 1.0).unwrap();
        let cfg = SolverConfig::default();

        // free dynamics: P(x0) = U(T) x0
        let zero_rhs = Rhs::function(|_t, x: &DVector<f64>| x * 0.0);
        let x0 = DVector::from_element(1, 0.7);
        let p = poincare_map(&k, &zero_rhs, &fam, &x0, &cfg).unwrap();
        assert!((p[0] - 0.7 * (-1.0_f64).exp()).abs() < 1e-12);

        // constant forcing: x(t) = e^{-t} x0 + 1 - e^{-t}
        let one = Rhs::function(|_t, x: &DVector<f64>| DVector::from_element(x.len(), 1.0));
        let p = poincare_map(&k, &one, &fam, &x0, &cfg).unwrap();
        let expected = (0.7 - 1.0) / E + 1.0;
        assert!((p[0] - expected).abs() < 1e-6, "{} vs {expected}", p[0]);

        // x0 = 1 is the fixed point
        let p = poincare_map(&k, &one, &fam, &DVector::from_element(1, 1.0), &cfg).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn contraction_thresholds() {
        let mesh = TimeMesh::uniform(1.0, 101, 1).unwrap();
        let k = catalog("identity", 1.0, 1).unwrap();
        let zeros = vec![0.0; mesh.len()];

        let c1 = check_contraction_condition(&k, &zeros, 1.0, &mesh).unwrap();
        assert!(c1.holds);
        assert!((c1.threshold - 1.0 / (2.0 * E)).abs() < 1e-15);

        let c2 = check_contraction_condition(&k, &zeros, 2.0, &mesh).unwrap();
        assert!((c2.threshold - 0.25 * (-0.5_f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn periodic_volterra_scalar_instance() {
        let mesh = TimeMesh::uniform(1.0, 1001, 1).unwrap();
        let k = catalog("convolution-exp(1)", 1.0, 1).unwrap();
        let a = DMatrix::from_element(1, 1, -1.0);
        let fam = StableFamily::from_generator(a, mesh.clone(), 1.0).unwrap();
        let growth = GrowthData::constant(mesh.len(), 1.0, 0.0, 1.0).unwrap();
        let cfg = SolverConfig::default();
        let rhs = Rhs::function(|_t, x: &DVector<f64>| DVector::from_element(x.len(), 1.0));
        let result =
            find_periodic_volterra(&k, &rhs, &fam, &growth, &cfg, ConditionPolicy::Enforce)
                .unwrap();
        assert!((result.x0[0] - 1.0).abs() < 1e-6, "x0 = {}", result.x0[0]);
        assert!(result.fixed_point_residual < 1e-8);
        assert!(result.iterations < 50);
        assert!(result.accepted);
        let worst = result
            .orbit
            .values()
            .iter()
            .map(|v| (v[0] - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-5, "orbit deviates by {worst}");
    }

    #[test]
    fn periodic_volterra_free_dynamics() {
        let mesh = TimeMesh::uniform(1.0, 201, 1).unwrap();
        let k = catalog("convolution-exp(1)", 1.0, 1).unwrap();
        let a = DMatrix::from_element(1, 1, -1.0);
        let fam = StableFamily::from_generator(a, mesh.clone(), 1.0).unwrap();
        let growth = GrowthData::constant(mesh.len(), 0.0, 0.0, 0.0).unwrap();
        let cfg = SolverConfig::default();
        let rhs = Rhs::function(|_t, x: &DVector<f64>| x * 0.0);
        let result =
            find_periodic_volterra(&k, &rhs, &fam, &growth, &cfg, ConditionPolicy::Enforce)
                .unwrap();
        assert!(result.x0.norm() < 1e-12);
        assert!(result.orbit.sup_norm() < 1e-12);
    }

    #[test]
    fn periodic_volterra_set_valued_branch() {
        let mesh = TimeMesh::uniform(1.0, 401, 1).unwrap();
        let k = catalog("convolution-exp(1)", 1.0, 1).unwrap();
        let a = DMatrix::from_element(1, 1, -1.0);
        let fam = StableFamily::from_generator(a, mesh.clone(), 1.0).unwrap();
        let growth = GrowthData::constant(mesh.len(), 1.1, 0.0, 1.1).unwrap();
        let cfg = SolverConfig::default();

        let field = SetField::constant(
            "interval[0.9,1.1]",
            ConvexSet::interval(0.9, 1.1).unwrap(),
            growth.clone(),
        )
        .unwrap();
        let rhs = Rhs::Field {
            field,
            strategy: SelectionStrategy::Extremal(DVector::from_element(1, 1.0)),
        };
        let set_result =
            find_periodic_volterra(&k, &rhs, &fam, &growth, &cfg, ConditionPolicy::Enforce)
                .unwrap();

        // oracle: the single-valued problem with f = 1.1
        let single = Rhs::function(|_t, x: &DVector<f64>| DVector::from_element(x.len(), 1.1));
        let single_result =
            find_periodic_volterra(&k, &single, &fam, &growth, &cfg, ConditionPolicy::Enforce)
                .unwrap();
        assert!((set_result.x0[0] - single_result.x0[0]).abs() < 1e-8);
        assert!((set_result.x0[0] - 1.1).abs() < 1e-6);
    }

    #[test]
    fn poincare_map_set_returns_one_value_per_strategy() {
        let mesh = TimeMesh::uniform(1.0, 201, 1).unwrap();
        let k = catalog("convolution-exp(1)", 1.0, 1).unwrap();
        let a = DMatrix::from_element(1, 1, -1.0);
        let fam = StableFamily::from_generator(a, mesh.clone(), 1.0).unwrap();
        let growth = GrowthData::constant(mesh.len(), 1.1, 0.0, 1.1).unwrap();
        let field = SetField::constant(
            "interval[0.9,1.1]",
            ConvexSet::interval(0.9, 1.1).unwrap(),
            growth,
        )
        .unwrap();
        let strategies = vec![
            SelectionStrategy::Extremal(DVector::from_element(1, 1.0)),
            SelectionStrategy::Extremal(DVector::from_element(1, -1.0)),
        ];
        let cfg = SolverConfig::default();
        let x0 = DVector::zeros(1);
        let values = poincare_map_set(&k, &field, &strategies, &fam, &x0, &cfg).unwrap();
        assert_eq!(values.len(), 2);
        // each branch behaves like the constant forcing it selects
        let gamma = 1.0 - (-1.0_f64).exp();
        assert!((values[0][0] - 1.1 * gamma).abs() < 1e-5);
        assert!((values[1][0] - 0.9 * gamma).abs() < 1e-5);
    }

    #[test]
    fn hammerstein_affine_is_periodic() {
        let mesh = TimeMesh::uniform(1.0, 201, 1).unwrap();
        let k = catalog("fredholm-periodic", 1.0, 1).unwrap();
        let h = Path::from_scalar_fn(mesh.clone(), |t| (2.0 * std::f64::consts::PI * t).cos())
            .unwrap();
        let cfg = SolverConfig::default();
        let zeros = vec![0.0; mesh.len()];
        let gamma = 0.25;
        let rhs = Rhs::function(move |_t, x: &DVector<f64>| DVector::from_element(x.len(), gamma));
        let out =
            solve_hammerstein_periodic(&k, &rhs, &h, &zeros, &cfg, ConditionPolicy::Enforce)
                .unwrap();
        assert!(out.periodicity_residual < 1e-8, "{}", out.periodicity_residual);
        assert!(out.accepted);
        // x(t) = h(t) + gamma (1 + cos(2 pi t)/2) T
        for (i, &t) in mesh.nodes().iter().enumerate() {
            let expected = h.value(i)[0]
                + gamma * (1.0 + (2.0 * std::f64::consts::PI * t).cos() / 2.0);
            assert!((out.x.value(i)[0] - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn hammerstein_zero_field_returns_h() {
        let mesh = TimeMesh::uniform(1.0, 101, 1).unwrap();
        let k = catalog("fredholm-periodic", 1.0, 1).unwrap();
        let h = Path::from_scalar_fn(mesh.clone(), |t| (2.0 * std::f64::consts::PI * t).sin())
            .unwrap();
        let cfg = SolverConfig::default();
        let zeros = vec![0.0; mesh.len()];
        let rhs = Rhs::function(|_t, x: &DVector<f64>| x * 0.0);
        let out =
            solve_hammerstein_periodic(&k, &rhs, &h, &zeros, &cfg, ConditionPolicy::Enforce)
                .unwrap();
        assert_eq!(out.x.sup_distance(&h).unwrap(), 0.0);
        assert!((out.periodicity_residual - (h.value(0) - h.value(mesh.len() - 1)).norm()).abs() < 1e-15);
    }

    #[test]
    fn hammerstein_nonlinear_contraction() {
        let mesh = TimeMesh::uniform(1.0, 201, 1).unwrap();
        let k = catalog("fredholm-periodic", 1.0, 1).unwrap();
        let h = Path::from_scalar_fn(mesh.clone(), |t| (2.0 * std::f64::consts::PI * t).cos())
            .unwrap();
        let cfg = SolverConfig::default();
        let eta = vec![0.2; mesh.len()];
        let rhs = Rhs::function(|_t, x: &DVector<f64>| DVector::from_element(1, 0.2 * x[0].sin()));
        let out =
            solve_hammerstein_periodic(&k, &rhs, &h, &eta, &cfg, ConditionPolicy::Enforce)
                .unwrap();
        assert!(out.periodicity_residual < 1e-8);

        // independent oracle: the same contraction at double resolution
        let fine = TimeMesh::uniform(1.0, 401, 1).unwrap();
        let kf = catalog("fredholm-periodic", 1.0, 1).unwrap();
        let hf = Path::from_scalar_fn(fine.clone(), |t| (2.0 * std::f64::consts::PI * t).cos())
            .unwrap();
        let eta_f = vec![0.2; fine.len()];
        let rhs_f =
            Rhs::function(|_t, x: &DVector<f64>| DVector::from_element(1, 0.2 * x[0].sin()));
        let fine_out =
            solve_hammerstein_periodic(&kf, &rhs_f, &hf, &eta_f, &cfg, ConditionPolicy::Enforce)
                .unwrap();
        // coarse nodes are every second fine node
        let worst = (0..mesh.len())
            .map(|i| (out.x.value(i)[0] - fine_out.x.value(2 * i)[0]).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-4, "resolution disagreement {worst}");
    }

    #[test]
    fn hammerstein_rejects_nonperiodic_data() {
        let mesh = TimeMesh::uniform(1.0, 51, 1).unwrap();
        let k = catalog("fredholm-periodic", 1.0, 1).unwrap();
        let cfg = SolverConfig::default();
        let zeros = vec![0.0; mesh.len()];
        let rhs = Rhs::function(|_t, x: &DVector<f64>| x * 0.0);

        let ramp = Path::from_scalar_fn(mesh.clone(), |t| t).unwrap();
        assert!(solve_hammerstein_periodic(&k, &rhs, &ramp, &zeros, &cfg, ConditionPolicy::Enforce)
            .is_err());

        // non-periodic kernel on the square
        let bad = Kernel::scalar_times_identity(KernelDomain::Square, 1.0, 1, "ramp", |t, _| t)
            .unwrap();
        let h = Path::zero(mesh);
        assert!(solve_hammerstein_periodic(&bad, &rhs, &h, &zeros, &cfg, ConditionPolicy::Enforce)
            .is_err());
    }

    #[test]
    fn hammerstein_condition_arithmetic() {
        let mesh = TimeMesh::uniform(1.0, 101, 1).unwrap();
        let one = Kernel::scalar_times_identity(KernelDomain::Square, 1.0, 1, "one", |_, _| 1.0)
            .unwrap();
        // B = 1 at q = 2, ||eta||_2 = 0.6 -> 1.2 >= 1
        let eta = vec![0.6; mesh.len()];
        let c = check_hammerstein_condition(&one, &eta, 2.0, &mesh).unwrap();
        assert!(!c.holds);
        // B = 0.5 scaled kernel, ||eta|| = 0.9 -> 0.9 < 1
        let half = Kernel::scalar_times_identity(KernelDomain::Square, 1.0, 1, "half", |_, _| 0.5)
            .unwrap();
        let eta = vec![0.9; mesh.len()];
        let c = check_hammerstein_condition(&half, &eta, 2.0, &mesh).unwrap();
        assert!(c.holds);
        assert!((c.lhs - 0.9).abs() < 1e-10);
    }
}
