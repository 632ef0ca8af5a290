//! Convex compact values in `R^d`: balls, boxes and vertex-represented
//! polytopes, with the two primitives the inclusion machinery needs: the
//! support function and the Euclidean metric projection.
//!
//! Projection onto a ball or box is closed-form. Projection onto a polytope
//! runs the distance subalgorithm over growing simplices driven by support
//! points, which terminates after finitely many vertex insertions.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// A nonempty convex compact subset of `R^d`.
#[derive(Debug, Clone)]
pub enum ConvexSet {
    Ball { center: DVector<f64>, radius: f64 },
    Box { lower: DVector<f64>, upper: DVector<f64> },
    Polytope { vertices: Vec<DVector<f64>> },
}

/// A support evaluation: the maximum of `<dir, y>` over the set and a point
/// attaining it.
#[derive(Debug, Clone)]
pub struct SupportPoint {
    pub value: f64,
    pub point: DVector<f64>,
}

impl ConvexSet {
    pub fn ball(center: DVector<f64>, radius: f64) -> Result<Self> {
        if !radius.is_finite() || radius < 0.0 {
            return Err(Error::invalid("ball radius must be nonnegative"));
        }
        Ok(ConvexSet::Ball { center, radius })
    }

    pub fn cuboid(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::invalid("box bounds have different dimensions"));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
            return Err(Error::invalid("box lower bound exceeds upper bound"));
        }
        Ok(ConvexSet::Box { lower, upper })
    }

    /// Scalar interval `[lo, hi]` as a one-dimensional box.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        ConvexSet::cuboid(DVector::from_element(1, lo), DVector::from_element(1, hi))
    }

    pub fn polytope(vertices: Vec<DVector<f64>>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::invalid("polytope needs at least one vertex"));
        }
        let dim = vertices[0].len();
        if vertices.iter().any(|v| v.len() != dim) {
            return Err(Error::invalid("polytope vertices have mixed dimensions"));
        }
        Ok(ConvexSet::Polytope { vertices })
    }

    pub fn singleton(point: DVector<f64>) -> Self {
        ConvexSet::Polytope { vertices: vec![point] }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Ball { center, .. } => center.len(),
            ConvexSet::Box { lower, .. } => lower.len(),
            ConvexSet::Polytope { vertices } => vertices[0].len(),
        }
    }

    /// Support function and an attaining point. The direction is normalized
    /// internally. Tie rules on flat faces: lowest-index vertex for
    /// polytopes, `center + radius * dir` for balls, and the componentwise
    /// sign rule mapping zero components to the upper bound for boxes.
    pub fn support(&self, dir: &DVector<f64>) -> Result<SupportPoint> {
        let norm = dir.norm();
        if !norm.is_finite() || norm <= 0.0 {
            return Err(Error::invalid("support direction must be nonzero"));
        }
        let u = dir / norm;
        let sp = match self {
            ConvexSet::Ball { center, radius } => {
                let point = center + &u * *radius;
                SupportPoint { value: u.dot(center) + radius, point }
            }
            ConvexSet::Box { lower, upper } => {
                let point = DVector::from_iterator(
                    lower.len(),
                    u.iter()
                        .zip(lower.iter().zip(upper.iter()))
                        .map(|(&c, (&l, &h))| if c < 0.0 { l } else { h }),
                );
                SupportPoint { value: u.dot(&point), point }
            }
            ConvexSet::Polytope { vertices } => {
                let mut best = 0usize;
                let mut best_val = u.dot(&vertices[0]);
                for (i, v) in vertices.iter().enumerate().skip(1) {
                    let val = u.dot(v);
                    if val > best_val {
                        best = i;
                        best_val = val;
                    }
                }
                SupportPoint { value: best_val, point: vertices[best].clone() }
            }
        };
        Ok(sp)
    }

    /// Support value only.
    pub fn support_value(&self, dir: &DVector<f64>) -> Result<f64> {
        Ok(self.support(dir)?.value)
    }

    /// The unique Euclidean nearest point of the set to `x`.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            ConvexSet::Ball { center, radius } => {
                let offset = x - center;
                let dist = offset.norm();
                if dist <= *radius {
                    x.clone()
                } else {
                    center + offset * (*radius / dist)
                }
            }
            ConvexSet::Box { lower, upper } => DVector::from_iterator(
                lower.len(),
                x.iter()
                    .zip(lower.iter().zip(upper.iter()))
                    .map(|(&c, (&l, &h))| c.clamp(l, h)),
            ),
            ConvexSet::Polytope { vertices } => project_polytope(vertices, x),
        }
    }

    /// Euclidean distance from `x` to the set.
    pub fn distance_to(&self, x: &DVector<f64>) -> f64 {
        (x - self.project(x)).norm()
    }

    /// `max { |y| : y in set }`.
    pub fn norm_bound(&self) -> f64 {
        match self {
            ConvexSet::Ball { center, radius } => center.norm() + radius,
            ConvexSet::Box { lower, upper } => lower
                .iter()
                .zip(upper.iter())
                .map(|(&l, &h)| l.abs().max(h.abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
            ConvexSet::Polytope { vertices } => {
                vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
            }
        }
    }

    /// Componentwise support bounds `[-sigma(-e_i), sigma(e_i)]`.
    pub fn bounding_box(&self) -> (DVector<f64>, DVector<f64>) {
        let d = self.dim();
        let mut lower = DVector::zeros(d);
        let mut upper = DVector::zeros(d);
        for i in 0..d {
            let mut e = DVector::zeros(d);
            e[i] = 1.0;
            upper[i] = self.support_value(&e).unwrap();
            e[i] = -1.0;
            lower[i] = -self.support_value(&e).unwrap();
        }
        (lower, upper)
    }
}

/// The `2d + 2` certificate directions: signed axes plus both diagonals.
pub fn certificate_directions(dim: usize) -> Vec<DVector<f64>> {
    let mut dirs = Vec::with_capacity(2 * dim + 2);
    for i in 0..dim {
        let mut e = DVector::zeros(dim);
        e[i] = 1.0;
        dirs.push(e.clone());
        e[i] = -1.0;
        dirs.push(e);
    }
    let diag = DVector::from_element(dim, 1.0 / (dim as f64).sqrt());
    dirs.push(diag.clone());
    dirs.push(-diag);
    dirs
}

/// Containment certificate by support-function dominance on the given
/// directions. Necessary for containment and exact on the certificate
/// directions themselves.
pub fn contains_certified(
    outer: &ConvexSet,
    inner: &ConvexSet,
    dirs: &[DVector<f64>],
) -> Result<bool> {
    for dir in dirs {
        let o = outer.support_value(dir)?;
        let i = inner.support_value(dir)?;
        if i > o + 1e-10 * (1.0 + o.abs()) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Nearest point of `conv(vertices)` to `x`.
fn project_polytope(vertices: &[DVector<f64>], x: &DVector<f64>) -> DVector<f64> {
    if vertices.len() == 1 {
        return vertices[0].clone();
    }
    let scale = 1.0 + x.norm() + vertices.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let tol = 1e-13 * scale;

    // start from the vertex nearest to x
    let start = vertices
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            (*a - x).norm().partial_cmp(&(*b - x).norm()).unwrap()
        })
        .map(|(i, _)| i)
        .unwrap();
    let mut simplex: Vec<DVector<f64>> = vec![vertices[start].clone()];

    for _ in 0..vertices.len() + simplex[0].len() + 2 {
        let (p, keep) = closest_point_on_simplex(&simplex, x);
        simplex = keep;
        let dir = x - &p;
        if dir.norm() <= tol {
            return p;
        }
        // best vertex in the improvement direction
        let mut best = 0usize;
        let mut best_val = dir.dot(&vertices[0]);
        for (i, v) in vertices.iter().enumerate().skip(1) {
            let val = dir.dot(v);
            if val > best_val {
                best = i;
                best_val = val;
            }
        }
        if best_val <= dir.dot(&p) + tol {
            return p; // no vertex improves: p is the projection
        }
        simplex.push(vertices[best].clone());
    }
    closest_point_on_simplex(&simplex, x).0
}

/// Closest point of the simplex spanned by `points` to `x`, together with
/// the sub-simplex that supports it. Enumerates the faces; every face solve
/// is a small Gram system.
fn closest_point_on_simplex(
    points: &[DVector<f64>],
    x: &DVector<f64>,
) -> (DVector<f64>, Vec<DVector<f64>>) {
    let n = points.len();
    let mut best: Option<(f64, DVector<f64>, Vec<DVector<f64>>)> = None;
    for mask in 1u32..(1 << n) {
        let subset: Vec<&DVector<f64>> = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| &points[i])
            .collect();
        if let Some(p) = affine_projection(&subset, x) {
            let dist = (&p - x).norm();
            if best.as_ref().is_none_or(|(d, _, _)| dist < *d - 1e-15) {
                let kept = subset.iter().map(|v| (*v).clone()).collect();
                best = Some((dist, p, kept));
            }
        }
    }
    let (_, p, kept) = best.expect("simplex is nonempty");
    (p, kept)
}

/// Projection of `x` onto the affine hull of `subset` when the barycentric
/// coordinates are all nonnegative; `None` otherwise.
fn affine_projection(subset: &[&DVector<f64>], x: &DVector<f64>) -> Option<DVector<f64>> {
    let m = subset.len();
    if m == 1 {
        return Some(subset[0].clone());
    }
    let base = subset[0];
    let dirs: Vec<DVector<f64>> = subset[1..].iter().map(|v| *v - base).collect();
    let k = dirs.len();
    let mut gram = nalgebra::DMatrix::zeros(k, k);
    let mut rhs = DVector::zeros(k);
    let offset = x - base;
    for i in 0..k {
        for j in 0..k {
            gram[(i, j)] = dirs[i].dot(&dirs[j]);
        }
        rhs[i] = dirs[i].dot(&offset);
    }
    let mu = gram.lu().solve(&rhs)?;
    let lambda0 = 1.0 - mu.sum();
    if lambda0 < -1e-12 || mu.iter().any(|&c| c < -1e-12) {
        return None;
    }
    let mut p = base.clone();
    for (d, &c) in dirs.iter().zip(mu.iter()) {
        p += d * c;
    }
    Some(p)
}
