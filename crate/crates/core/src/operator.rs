//! Product-quadrature realizations of the integral operators: the Volterra
//! map `w -> ∫_0^t k(t,s) w(s) ds`, its truncation to `[0, aT]`, the
//! full-interval Hammerstein map `w -> ∫_0^T k(t,s) w(s) ds`, and the
//! discrete inverse of the Volterra map by forward substitution on the
//! lower-triangular collocation system.
//!
//! All quadratures are composite trapezoidal on the path mesh, so applying
//! the operator to piecewise-linear data and inverting are exact mirror
//! images of each other: the collocation matrix of `invert_volterra` is the
//! same triangular array of weighted kernel samples that `apply_volterra`
//! sums against.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::kernel::{smallest_singular_value, spectral_norm, Kernel, KernelDomain};
use crate::mesh::Path;

fn check_kernel_path(k: &Kernel, w: &Path) -> Result<()> {
    let mesh = w.mesh();
    if k.dim() != mesh.dim() {
        return Err(Error::invalid(format!(
            "kernel dimension {} does not match mesh dimension {}",
            k.dim(),
            mesh.dim()
        )));
    }
    if mesh.horizon() > k.horizon() * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "mesh horizon {} exceeds kernel horizon {}",
            mesh.horizon(),
            k.horizon()
        )));
    }
    Ok(())
}

/// Trapezoidal integral `∫_0^upper k(t_row, s) w(s) ds` over the mesh nodes
/// plus a partial panel when `upper` falls between nodes.
pub(crate) fn row_integral(k: &Kernel, w: &Path, t_row: f64, upper: f64) -> DVector<f64> {
    let mesh = w.mesh();
    let nodes = mesh.nodes();
    let dim = mesh.dim();
    let mut acc = DVector::zeros(dim);
    if upper <= nodes[0] {
        return acc;
    }
    let m = mesh.floor_index(upper);
    // composite trapezoid over the whole panels [t_0, t_m]
    for j in 0..m {
        let half = (nodes[j + 1] - nodes[j]) / 2.0;
        acc += k.eval_unchecked(t_row, nodes[j]) * w.value(j) * half;
        acc += k.eval_unchecked(t_row, nodes[j + 1]) * w.value(j + 1) * half;
    }
    // partial panel [t_m, upper]
    if upper > nodes[m] {
        let half = (upper - nodes[m]) / 2.0;
        acc += k.eval_unchecked(t_row, nodes[m]) * w.value(m) * half;
        acc += k.eval_unchecked(t_row, upper) * w.eval(upper) * half;
    }
    acc
}

/// Volterra operator: `y(t_i) = ∫_0^{t_i} k(t_i, s) w(s) ds`. `y(0) = 0`
/// exactly.
pub fn apply_volterra(k: &Kernel, w: &Path) -> Result<Path> {
    if k.domain() != KernelDomain::Triangle {
        return Err(Error::invalid("Volterra operator needs a triangular kernel"));
    }
    check_kernel_path(k, w)?;
    let mesh = w.mesh().clone();
    let values = mesh
        .nodes()
        .iter()
        .map(|&t| row_integral(k, w, t, t))
        .collect();
    Path::new(mesh, values)
}

/// Truncated Volterra operator: `y(t_i) = ∫_0^{min(t_i, a T)} k(t_i, s) w(s) ds`
/// with `a = s_frac`. Coincides with [`apply_volterra`] at `s_frac = 1`.
pub fn apply_volterra_truncated(k: &Kernel, w: &Path, s_frac: f64) -> Result<Path> {
    if k.domain() != KernelDomain::Triangle {
        return Err(Error::invalid("truncated operator needs a triangular kernel"));
    }
    if !(0.0..=1.0).contains(&s_frac) {
        return Err(Error::invalid(format!(
            "truncation fraction must lie in [0, 1], got {s_frac}"
        )));
    }
    check_kernel_path(k, w)?;
    let mesh = w.mesh().clone();
    let cut = s_frac * mesh.horizon();
    let values = mesh
        .nodes()
        .iter()
        .map(|&t| row_integral(k, w, t, t.min(cut)))
        .collect();
    Path::new(mesh, values)
}

/// Hammerstein (full-interval) operator: `y(t_i) = ∫_0^T k(t_i, s) w(s) ds`
/// for a kernel on the square.
pub fn apply_fredholm(k: &Kernel, w: &Path) -> Result<Path> {
    if k.domain() != KernelDomain::Square {
        return Err(Error::invalid(
            "full-interval operator needs a kernel on the square",
        ));
    }
    check_kernel_path(k, w)?;
    let mesh = w.mesh().clone();
    let horizon = mesh.horizon();
    let values = mesh
        .nodes()
        .iter()
        .map(|&t| row_integral(k, w, t, horizon))
        .collect();
    Path::new(mesh, values)
}

/// Outcome of a discrete inversion.
#[derive(Debug, Clone)]
pub struct InversionReport {
    /// `||apply_volterra(k, w) - y||_sup` for the returned `w`.
    pub roundtrip_residual: f64,
}

/// Inverts the discrete Volterra map: finds the mesh function `w` with
/// `apply_volterra(k, w) ≈ y` by forward substitution on the triangular
/// collocation system.
///
/// The value at node 0 is not determined by `y` (it only enters through
/// quadrature weights of measure-zero panels as the mesh refines); the
/// substitution is seeded through the differentiated relation
/// `w(0) = k(0,0)^{-1} y'(0)` with a one-sided second-order difference for
/// `y'(0)`, and the reported node-0 value is the limit value from node 1.
pub fn invert_volterra(k: &Kernel, y: &Path) -> Result<(Path, InversionReport)> {
    if k.domain() != KernelDomain::Triangle {
        return Err(Error::invalid("inversion needs a triangular kernel"));
    }
    check_kernel_path(k, y)?;
    let mesh = y.mesh().clone();
    let nodes = mesh.nodes();
    let n = nodes.len();

    let y0 = y.value(0).norm();
    if y0 > 1e-9 * (1.0 + y.sup_norm()) {
        return Err(Error::InconsistentData(format!(
            "y(0) must vanish for a Volterra image, got |y(0)| = {y0:.3e}"
        )));
    }
    // reject singular diagonals up front; the substitution divides by them
    for &t in nodes {
        let diag = k.eval_unchecked(t, t);
        let sigma = smallest_singular_value(&diag);
        if sigma <= 1e-12 * (1.0 + spectral_norm(&diag)) {
            return Err(Error::NotInvertible(format!(
                "kernel diagonal k({t}, {t}) is numerically singular (sigma = {sigma:.3e})"
            )));
        }
    }

    let solve_diag = |t: f64, rhs: &DVector<f64>| -> Result<DVector<f64>> {
        let diag = k.eval_unchecked(t, t);
        diag.lu()
            .solve(rhs)
            .ok_or_else(|| Error::NotInvertible(format!("diagonal solve failed at t = {t}")))
    };

    // w(0) from the differentiated relation k(0,0) w(0) = y'(0)
    let dy0 = if n >= 3 {
        let (a, b, c) = (nodes[0], nodes[1], nodes[2]);
        let da = (2.0 * a - b - c) / ((a - b) * (a - c));
        let db = (a - c) / ((b - a) * (b - c));
        let dc = (a - b) / ((c - a) * (c - b));
        y.value(0) * da + y.value(1) * db + y.value(2) * dc
    } else {
        (y.value(1) - y.value(0)) / (nodes[1] - nodes[0])
    };
    let mut w: Vec<DVector<f64>> = Vec::with_capacity(n);
    w.push(solve_diag(nodes[0], &dy0)?);

    for i in 1..n {
        let t = nodes[i];
        // weights of the trapezoid rule on [0, t_i]
        let weight = |j: usize| -> f64 {
            if j == 0 {
                (nodes[1] - nodes[0]) / 2.0
            } else if j == i {
                (nodes[i] - nodes[i - 1]) / 2.0
            } else {
                (nodes[j + 1] - nodes[j - 1]) / 2.0
            }
        };
        let mut rhs = y.value(i).clone();
        for (j, wj) in w.iter().enumerate() {
            rhs -= k.eval_unchecked(t, nodes[j]) * wj * weight(j);
        }
        let solved = solve_diag(t, &(rhs / weight(i)))?;
        if solved.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericFailure(format!(
                "inversion produced non-finite values at t = {t}"
            )));
        }
        w.push(solved);
    }
    // node 0 reports the limit value from node 1
    w[0] = w[1].clone();

    let w = Path::new(mesh, w)?;
    let roundtrip = apply_volterra(k, &w)?;
    let residual = roundtrip.sup_distance(y)?;
    Ok((w, InversionReport { roundtrip_residual: residual }))
}
