//! Matrix-valued integral kernels on the triangle `{0 <= s <= t <= T}` or the
//! full square `[0,T]^2`, together with sampled checkers for the regularity
//! conditions the solvers rely on (invertible diagonal, bounded time
//! derivative, finite q-norm profile, q-norm continuity).
//!
//! A checker pass is a sampled certificate on the given mesh, not a proof;
//! every report carries the quantities it measured.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mesh::TimeMesh;

pub type MatrixFn = Arc<dyn Fn(f64, f64) -> DMatrix<f64> + Send + Sync>;

/// Where the kernel lives: the lower triangle (Volterra) or the square
/// (Hammerstein / Fredholm).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelDomain {
    Triangle,
    Square,
}

/// A kernel `k(t, s)` with values in the d x d real matrices. On triangular
/// domains `k(t, s) = 0` for `s > t` by convention.
#[derive(Clone)]
pub struct Kernel {
    domain: KernelDomain,
    dim: usize,
    horizon: f64,
    name: String,
    eval_fn: MatrixFn,
    /// Optional exact time derivative `(t, s) -> d/dt k(t, s)`.
    dt_fn: Option<MatrixFn>,
}

impl std::fmt::Debug for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Kernel")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("dim", &self.dim)
            .field("horizon", &self.horizon)
            .finish()
    }
}

impl Kernel {
    pub fn new(
        domain: KernelDomain,
        horizon: f64,
        dim: usize,
        name: impl Into<String>,
        eval_fn: MatrixFn,
    ) -> Result<Self> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::invalid("kernel horizon must be positive"));
        }
        if dim == 0 {
            return Err(Error::invalid("kernel dimension must be positive"));
        }
        Ok(Kernel {
            domain,
            dim,
            horizon,
            name: name.into(),
            eval_fn,
            dt_fn: None,
        })
    }

    pub fn with_derivative(mut self, dt_fn: MatrixFn) -> Self {
        self.dt_fn = Some(dt_fn);
        self
    }

    /// Scalar kernel `f(t, s)` times the identity.
    pub fn scalar_times_identity(
        domain: KernelDomain,
        horizon: f64,
        dim: usize,
        name: impl Into<String>,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let eval = Arc::new(move |t: f64, s: f64| DMatrix::identity(dim, dim) * f(t, s));
        Kernel::new(domain, horizon, dim, name, eval)
    }

    /// Separable kernel `k(t, s) = f(t) g(s)` (matrix product). The factors
    /// are sampled on a probe grid to reject non-finite data early.
    pub fn separable(
        domain: KernelDomain,
        horizon: f64,
        dim: usize,
        name: impl Into<String>,
        f: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
        g: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        let probes = 129;
        for i in 0..probes {
            let t = horizon * i as f64 / (probes - 1) as f64;
            let ft = f(t);
            let gt = g(t);
            if ft.nrows() != dim || ft.ncols() != dim || gt.nrows() != dim || gt.ncols() != dim {
                return Err(Error::invalid("separable factor has wrong dimensions"));
            }
            if ft.iter().any(|v| !v.is_finite()) || gt.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericFailure(format!(
                    "separable kernel factor is not finite at t = {t}"
                )));
            }
        }
        let eval = Arc::new(move |t: f64, s: f64| f(t) * g(s));
        Kernel::new(domain, horizon, dim, name, eval)
    }

    pub fn domain(&self) -> KernelDomain {
        self.domain
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn has_derivative(&self) -> bool {
        self.dt_fn.is_some()
    }

    /// Evaluates `k(t, s)` with domain checks. On a triangular domain the
    /// value for `s > t` is the zero matrix.
    pub fn eval(&self, t: f64, s: f64) -> Result<DMatrix<f64>> {
        if !(0.0..=self.horizon).contains(&t) || !(0.0..=self.horizon).contains(&s) {
            return Err(Error::invalid(format!(
                "kernel arguments ({t}, {s}) outside [0, {}]",
                self.horizon
            )));
        }
        Ok(self.eval_unchecked(t, s))
    }

    /// Evaluation without bound checks; used by the quadrature loops which
    /// only pass mesh nodes.
    pub(crate) fn eval_unchecked(&self, t: f64, s: f64) -> DMatrix<f64> {
        if self.domain == KernelDomain::Triangle && s > t {
            return DMatrix::zeros(self.dim, self.dim);
        }
        (self.eval_fn)(t, s)
    }

    fn dt_exact(&self, t: f64, s: f64) -> Option<DMatrix<f64>> {
        self.dt_fn.as_ref().map(|f| f(t, s))
    }

    /// Sampled check of the invertible-diagonal condition: passes iff the
    /// smallest singular value of `k(t, t)` exceeds `tol` at every node.
    pub fn check_diagonal_invertible(&self, mesh: &TimeMesh, tol: f64) -> Result<DiagonalReport> {
        if self.domain != KernelDomain::Triangle {
            return Err(Error::invalid(
                "diagonal invertibility applies to triangular kernels",
            ));
        }
        let mut min_singular = f64::INFINITY;
        let mut m_inv: f64 = 0.0;
        for &t in mesh.nodes() {
            let sigma = smallest_singular_value(&self.eval_unchecked(t, t));
            min_singular = min_singular.min(sigma);
            m_inv = m_inv.max(if sigma > 0.0 { 1.0 / sigma } else { f64::INFINITY });
        }
        Ok(DiagonalReport {
            passed: min_singular > tol,
            min_singular,
            m_inv,
        })
    }

    /// Per-node bound `psi(s) = max_{t >= s} ||d/dt k(t, s)||`, using the
    /// exact derivative when present and finite differences otherwise
    /// (one-sided three-point stencils at the boundaries, central inside).
    /// Without an exact derivative the last column `s = T` has a single
    /// admissible node and samples as 0.
    pub fn estimate_psi(&self, mesh: &TimeMesh) -> Result<Vec<f64>> {
        if self.domain != KernelDomain::Triangle {
            return Err(Error::invalid("psi estimation applies to triangular kernels"));
        }
        let nodes = mesh.nodes();
        let n = nodes.len();
        let mut psi = vec![0.0; n];
        for j in 0..n {
            let s = nodes[j];
            let mut bound: f64 = 0.0;
            for i in j..n {
                let d = match self.dt_exact(nodes[i], s) {
                    Some(m) => m,
                    None => self.dt_finite_difference(nodes, i, j),
                };
                bound = bound.max(spectral_norm(&d));
            }
            psi[j] = bound;
        }
        Ok(psi)
    }

    /// Three-point finite difference of `t -> k(t, s_j)` at `t_i`, restricted
    /// to mesh nodes with `t >= s_j`.
    fn dt_finite_difference(&self, nodes: &[f64], i: usize, j: usize) -> DMatrix<f64> {
        let n = nodes.len();
        let s = nodes[j];
        let avail = n - j;
        if avail == 1 {
            return DMatrix::zeros(self.dim, self.dim);
        }
        if avail == 2 {
            let (a, b) = (nodes[j], nodes[j + 1]);
            return (self.eval_unchecked(b, s) - self.eval_unchecked(a, s)) / (b - a);
        }
        // pick a 3-node stencil containing t_i inside [s_j, T]
        let lo = if i == j {
            j
        } else if i == n - 1 {
            n - 3
        } else {
            i - 1
        };
        let ts = [nodes[lo], nodes[lo + 1], nodes[lo + 2]];
        let ks = [
            self.eval_unchecked(ts[0], s),
            self.eval_unchecked(ts[1], s),
            self.eval_unchecked(ts[2], s),
        ];
        lagrange_derivative(&ts, &ks, nodes[i])
    }

    /// Per-node profile `t -> ||k(t, .)||_q` (over `[0, t]` on the triangle,
    /// `[0, T]` on the square), the bound `B = max` of the profile, and the
    /// q-norm continuity modulus over adjacent nodes. `q = infinity` takes the
    /// max over sampled `s`.
    pub fn qnorm_profile(&self, mesh: &TimeMesh, q: QExponent) -> Result<QnormProfile> {
        if let QExponent::Finite(q) = q {
            if q < 1.0 {
                return Err(Error::invalid(format!("q must be >= 1, got {q}")));
            }
        }
        let nodes = mesh.nodes();
        let n = nodes.len();
        // norms[i][j] = ||k(t_i, s_j)|| with the triangle zero convention
        let norms: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| spectral_norm(&self.eval_unchecked(nodes[i], nodes[j])))
                    .collect()
            })
            .collect();
        let row_limit = |i: usize| match self.domain {
            KernelDomain::Triangle => i,
            KernelDomain::Square => n - 1,
        };
        let mut profile = vec![0.0; n];
        for i in 0..n {
            profile[i] = row_qnorm(nodes, &norms[i], row_limit(i), q);
        }
        let b = profile.iter().cloned().fold(0.0, f64::max);

        let mut continuity_modulus: f64 = 0.0;
        for i in 1..n {
            // difference of rows i-1 and i over [0, t_i] (zero extension on
            // the triangle supplies the missing tail of row i-1)
            let diff: Vec<f64> = (0..n)
                .map(|j| {
                    let a = self.eval_unchecked(nodes[i], nodes[j]);
                    let b = self.eval_unchecked(nodes[i - 1], nodes[j]);
                    spectral_norm(&(a - b))
                })
                .collect();
            continuity_modulus = continuity_modulus.max(row_qnorm(nodes, &diff, row_limit(i), q));
        }
        Ok(QnormProfile {
            profile,
            b,
            continuity_modulus,
        })
    }

    /// q-norm oscillation over node pairs at most `xi` apart:
    /// `max { ||k(t,.) - k(tau,.)||_q : |t - tau| <= xi }`, rows compared
    /// over `[0, max(t, tau)]` with the triangle zero convention.
    pub fn qnorm_modulus(&self, mesh: &TimeMesh, q: QExponent, xi: f64) -> Result<f64> {
        if !xi.is_finite() || xi <= 0.0 {
            return Err(Error::invalid("xi must be positive"));
        }
        let nodes = mesh.nodes();
        let n = nodes.len();
        let row_limit = |i: usize| match self.domain {
            KernelDomain::Triangle => i,
            KernelDomain::Square => n - 1,
        };
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                if nodes[j] - nodes[i] > xi {
                    break;
                }
                let diff: Vec<f64> = (0..n)
                    .map(|col| {
                        let a = self.eval_unchecked(nodes[j], nodes[col]);
                        let b = self.eval_unchecked(nodes[i], nodes[col]);
                        spectral_norm(&(a - b))
                    })
                    .collect();
                worst = worst.max(row_qnorm(nodes, &diff, row_limit(j), q));
            }
        }
        Ok(worst)
    }

    /// Assembles the full condition report for exponent `p` (q conjugate).
    pub fn report(&self, mesh: &TimeMesh, p: f64, diag_tol: f64) -> Result<KernelReport> {
        let q = QExponent::conjugate_of(p)?;
        let qn = self.qnorm_profile(mesh, q)?;
        let (m_inv, min_singular, diag_passed) = if self.domain == KernelDomain::Triangle {
            let d = self.check_diagonal_invertible(mesh, diag_tol)?;
            (d.m_inv, d.min_singular, d.passed)
        } else {
            (f64::INFINITY, 0.0, false)
        };
        let psi_samples = if self.domain == KernelDomain::Triangle {
            self.estimate_psi(mesh)?
        } else {
            Vec::new()
        };
        let psi_bound = psi_samples.iter().cloned().fold(0.0, f64::max);
        Ok(KernelReport {
            b: qn.b,
            m_inv,
            min_singular,
            diag_passed,
            psi_bound,
            psi_samples,
            continuity_modulus: qn.continuity_modulus,
        })
    }
}

/// q-norm of one kernel row over `[0, t_limit]`: trapezoid of `||k||^q` for
/// finite q, max over the sampled nodes for `q = infinity`.
fn row_qnorm(nodes: &[f64], row: &[f64], limit: usize, q: QExponent) -> f64 {
    match q {
        QExponent::Infinite => row[..=limit].iter().cloned().fold(0.0, f64::max),
        QExponent::Finite(q) => {
            let mut acc = 0.0;
            for j in 0..limit {
                let dt = nodes[j + 1] - nodes[j];
                acc += dt * (row[j].powf(q) + row[j + 1].powf(q)) / 2.0;
            }
            acc.powf(1.0 / q)
        }
    }
}

/// Conjugate exponent `q` with `1/p + 1/q = 1`; `p = 1` pairs with
/// `q = infinity`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QExponent {
    Finite(f64),
    Infinite,
}

impl QExponent {
    pub fn conjugate_of(p: f64) -> Result<Self> {
        if p < 1.0 {
            return Err(Error::invalid(format!("exponent p must be >= 1, got {p}")));
        }
        if p == 1.0 {
            Ok(QExponent::Infinite)
        } else {
            Ok(QExponent::Finite(p / (p - 1.0)))
        }
    }
}

/// Result of the diagonal-invertibility check.
#[derive(Debug, Clone)]
pub struct DiagonalReport {
    pub passed: bool,
    pub min_singular: f64,
    /// `max_t ||k(t,t)^{-1}||`; infinite when some diagonal is singular.
    pub m_inv: f64,
}

/// q-norm profile of the kernel over the mesh.
#[derive(Debug, Clone)]
pub struct QnormProfile {
    /// `t_i -> ||k(t_i, .)||_q`.
    pub profile: Vec<f64>,
    /// `B = sup_t ||k(t, .)||_q` over the mesh.
    pub b: f64,
    /// `max_i ||k(t_i, .) - k(t_{i-1}, .)||_q`, the sampled continuity
    /// certificate.
    pub continuity_modulus: f64,
}

/// Bundled condition quantities for one kernel on one mesh.
#[derive(Debug, Clone)]
pub struct KernelReport {
    pub b: f64,
    pub m_inv: f64,
    pub min_singular: f64,
    pub diag_passed: bool,
    pub psi_bound: f64,
    pub psi_samples: Vec<f64>,
    pub continuity_modulus: f64,
}

/// Outcome of one scalar inequality check `lhs < threshold`.
#[derive(Debug, Clone)]
pub struct ConditionCheck {
    pub holds: bool,
    pub lhs: f64,
    pub threshold: f64,
    pub margin: f64,
}

impl ConditionCheck {
    pub fn strict(lhs: f64, threshold: f64) -> Self {
        ConditionCheck { holds: lhs < threshold, lhs, threshold, margin: threshold - lhs }
    }
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].abs();
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Smallest singular value.
pub fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].abs();
    }
    m.clone().svd(false, false).singular_values.min()
}

/// Derivative of the quadratic interpolant through `(ts[k], ks[k])` at `x`.
fn lagrange_derivative(ts: &[f64; 3], ks: &[DMatrix<f64>; 3], x: f64) -> DMatrix<f64> {
    let (a, b, c) = (ts[0], ts[1], ts[2]);
    let da = (2.0 * x - b - c) / ((a - b) * (a - c));
    let db = (2.0 * x - a - c) / ((b - a) * (b - c));
    let dc = (2.0 * x - a - b) / ((c - a) * (c - b));
    &ks[0] * da + &ks[1] * db + &ks[2] * dc
}

/// Built-in kernel catalog addressable by name.
///
/// * `identity`: `k(t,s) = Id` on the triangle.
/// * `convolution-exp(lambda)`: `k(t,s) = e^{-lambda (t-s)} Id` on the
///   triangle; diagonal is the identity.
/// * `separable-cos`: `k(t,s) = cos(t) cos(s) Id` on the triangle.
/// * `fredholm-periodic`: `k(t,s) = (1 + cos(2 pi t / T) / 2) Id` on the
///   square; `T`-periodic in `t`.
pub fn catalog(name: &str, horizon: f64, dim: usize) -> Result<Kernel> {
    let ident = move |d: usize| DMatrix::<f64>::identity(d, d);
    match name {
        "identity" => {
            let k = Kernel::scalar_times_identity(
                KernelDomain::Triangle,
                horizon,
                dim,
                "identity",
                |_, _| 1.0,
            )?;
            Ok(k.with_derivative(Arc::new(move |_t, _s| DMatrix::zeros(dim, dim))))
        }
        "separable-cos" => {
            let k = Kernel::scalar_times_identity(
                KernelDomain::Triangle,
                horizon,
                dim,
                "separable-cos",
                |t, s| t.cos() * s.cos(),
            )?;
            Ok(k.with_derivative(Arc::new(move |t: f64, s: f64| {
                ident(dim) * (-t.sin() * s.cos())
            })))
        }
        "fredholm-periodic" => {
            let t_end = horizon;
            Kernel::scalar_times_identity(
                KernelDomain::Square,
                horizon,
                dim,
                "fredholm-periodic",
                move |t, _s| 1.0 + (2.0 * std::f64::consts::PI * t / t_end).cos() / 2.0,
            )
        }
        _ => {
            if let Some(arg) = name
                .strip_prefix("convolution-exp(")
                .and_then(|rest| rest.strip_suffix(')'))
            {
                let lambda: f64 = arg.parse().map_err(|_| {
                    Error::invalid(format!("bad decay rate in kernel name '{name}'"))
                })?;
                let k = Kernel::scalar_times_identity(
                    KernelDomain::Triangle,
                    horizon,
                    dim,
                    name,
                    move |t, s| (-lambda * (t - s)).exp(),
                )?;
                return Ok(k.with_derivative(Arc::new(move |t: f64, s: f64| {
                    ident(dim) * (-lambda * (-lambda * (t - s)).exp())
                })));
            }
            Err(Error::invalid(format!("unknown catalog kernel '{name}'")))
        }
    }
}
