//! Time meshes, piecewise-linear paths and the finite-family diagnostics
//! (covering numbers, continuity moduli, Hausdorff distances) used to probe
//! compactness of sampled trajectory sets.
//!
//! A [`Path`] stores one state vector per mesh node and is interpreted as the
//! piecewise-linear interpolant between nodes. All norms and integrals are
//! mesh quadratures: the sup norm is exact for piecewise-linear data, the
//! `L^p` norms use the composite trapezoidal rule.

use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Ordered quadrature nodes on `[0, T]` together with the state dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMesh {
    nodes: Vec<f64>,
    dim: usize,
}

impl TimeMesh {
    /// Builds a mesh from explicit nodes. The nodes must start at 0, be
    /// strictly increasing and end at some `T > 0`.
    pub fn new(nodes: Vec<f64>, dim: usize) -> Result<Arc<Self>> {
        if nodes.len() < 2 {
            return Err(Error::invalid("mesh needs at least 2 nodes"));
        }
        if dim == 0 {
            return Err(Error::invalid("state dimension must be positive"));
        }
        if nodes[0] != 0.0 {
            return Err(Error::invalid("first mesh node must be 0"));
        }
        if !nodes.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::invalid("mesh nodes must be strictly increasing"));
        }
        if !nodes.iter().all(|t| t.is_finite()) {
            return Err(Error::invalid("mesh nodes must be finite"));
        }
        Ok(Arc::new(TimeMesh { nodes, dim }))
    }

    /// `N` equally spaced nodes from 0 to `T`.
    pub fn uniform(t_end: f64, n: usize, dim: usize) -> Result<Arc<Self>> {
        if !t_end.is_finite() || t_end <= 0.0 {
            return Err(Error::invalid(format!("horizon T must be positive, got {t_end}")));
        }
        if n < 2 {
            return Err(Error::invalid(format!("node count must be at least 2, got {n}")));
        }
        let nodes = (0..n)
            .map(|i| t_end * i as f64 / (n - 1) as f64)
            .collect();
        TimeMesh::new(nodes, dim)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// End time `T`.
    pub fn horizon(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Largest gap between adjacent nodes.
    pub fn max_step(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Trapezoidal weight of node `i` on the full interval.
    pub fn weight(&self, i: usize) -> f64 {
        let n = self.nodes.len();
        if i == 0 {
            (self.nodes[1] - self.nodes[0]) / 2.0
        } else if i == n - 1 {
            (self.nodes[n - 1] - self.nodes[n - 2]) / 2.0
        } else {
            (self.nodes[i + 1] - self.nodes[i - 1]) / 2.0
        }
    }

    /// Index of the last node `t_m <= t` (clamped to the mesh).
    pub fn floor_index(&self, t: f64) -> usize {
        match self
            .nodes
            .binary_search_by(|node| node.partial_cmp(&t).unwrap())
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        }
    }

    /// Two meshes are compatible when they carry the same nodes and dimension.
    pub fn compatible(&self, other: &TimeMesh) -> bool {
        self.dim == other.dim && self.nodes == other.nodes
    }

    /// Composite trapezoidal integral of scalar node samples.
    pub fn integrate(&self, samples: &[f64]) -> Result<f64> {
        if samples.len() != self.nodes.len() {
            return Err(Error::invalid("sample count does not match mesh"));
        }
        Ok(self
            .nodes
            .windows(2)
            .zip(samples.windows(2))
            .map(|(t, v)| (t[1] - t[0]) * (v[0] + v[1]) / 2.0)
            .sum())
    }

    /// `L^p` norm of scalar node samples, `(∫ |g|^p)^{1/p}` by trapezoid.
    pub fn lp_norm_samples(&self, samples: &[f64], p: f64) -> Result<f64> {
        if p < 1.0 {
            return Err(Error::invalid(format!("exponent p must be >= 1, got {p}")));
        }
        let powered: Vec<f64> = samples.iter().map(|v| v.abs().powf(p)).collect();
        Ok(self.integrate(&powered)?.powf(1.0 / p))
    }
}

/// A piecewise-linear function from the mesh into `R^d`.
#[derive(Debug, Clone)]
pub struct Path {
    mesh: Arc<TimeMesh>,
    values: Vec<DVector<f64>>,
}

impl Path {
    pub fn new(mesh: Arc<TimeMesh>, values: Vec<DVector<f64>>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::invalid(format!(
                "path has {} values for a {}-node mesh",
                values.len(),
                mesh.len()
            )));
        }
        if values.iter().any(|v| v.len() != mesh.dim()) {
            return Err(Error::invalid("path value dimension does not match mesh"));
        }
        Ok(Path { mesh, values })
    }

    /// Samples a vector-valued function at the mesh nodes.
    pub fn from_fn(mesh: Arc<TimeMesh>, f: impl Fn(f64) -> DVector<f64>) -> Result<Self> {
        let values: Vec<DVector<f64>> = mesh.nodes().iter().map(|&t| f(t)).collect();
        Path::new(mesh, values)
    }

    /// Samples a scalar function on a one-dimensional mesh.
    pub fn from_scalar_fn(mesh: Arc<TimeMesh>, f: impl Fn(f64) -> f64) -> Result<Self> {
        Path::from_fn(mesh, |t| DVector::from_element(1, f(t)))
    }

    pub fn zero(mesh: Arc<TimeMesh>) -> Self {
        let dim = mesh.dim();
        let values = vec![DVector::zeros(dim); mesh.len()];
        Path { mesh, values }
    }

    pub fn constant(mesh: Arc<TimeMesh>, value: DVector<f64>) -> Result<Self> {
        let values = vec![value; mesh.len()];
        Path::new(mesh, values)
    }

    pub fn mesh(&self) -> &Arc<TimeMesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [DVector<f64>] {
        &mut self.values
    }

    pub fn value(&self, i: usize) -> &DVector<f64> {
        &self.values[i]
    }

    /// Linear interpolation between nodes; clamps outside `[0, T]`.
    pub fn eval(&self, t: f64) -> DVector<f64> {
        let nodes = self.mesh.nodes();
        if t <= nodes[0] {
            return self.values[0].clone();
        }
        if t >= *nodes.last().unwrap() {
            return self.values.last().unwrap().clone();
        }
        let i = self.mesh.floor_index(t);
        if nodes[i] == t {
            return self.values[i].clone();
        }
        let lambda = (t - nodes[i]) / (nodes[i + 1] - nodes[i]);
        &self.values[i] * (1.0 - lambda) + &self.values[i + 1] * lambda
    }

    /// Maximum norm over the nodes; exact for piecewise-linear paths.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `(∫_0^T |x(t)|^p dt)^{1/p}` by composite trapezoidal quadrature.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        let samples: Vec<f64> = self.values.iter().map(|v| v.norm()).collect();
        self.mesh.lp_norm_samples(&samples, p)
    }

    /// Node-wise sup distance to another path on the same mesh.
    pub fn sup_distance(&self, other: &Path) -> Result<f64> {
        if !self.mesh.compatible(other.mesh()) {
            return Err(Error::invalid("paths live on different meshes"));
        }
        Ok(self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn scale(&self, a: f64) -> Path {
        Path {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|v| v * a).collect(),
        }
    }

    pub fn add(&self, other: &Path) -> Result<Path> {
        if !self.mesh.compatible(other.mesh()) {
            return Err(Error::invalid("paths live on different meshes"));
        }
        Ok(Path {
            mesh: self.mesh.clone(),
            values: self
                .values
                .iter()
                .zip(other.values.iter())
                .map(|(a, b)| a + b)
                .collect(),
        })
    }
}

/// A finite family of paths sharing one mesh; the sampled stand-in for a
/// bounded subset of `C(I, R^d)`.
#[derive(Debug, Clone)]
pub struct PathFamily {
    mesh: Arc<TimeMesh>,
    members: Vec<Path>,
}

impl PathFamily {
    pub fn new(members: Vec<Path>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::invalid("path family must be nonempty"))?;
        let mesh = first.mesh().clone();
        if !members.iter().all(|m| mesh.compatible(m.mesh())) {
            return Err(Error::invalid("family members live on different meshes"));
        }
        Ok(PathFamily { mesh, members })
    }

    pub fn mesh(&self) -> &Arc<TimeMesh> {
        &self.mesh
    }

    pub fn members(&self) -> &[Path] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Largest oscillation `|x(t) - x(tau)|` over members and node pairs with
    /// `|t - tau| <= xi`. Monotone nondecreasing in `xi`.
    pub fn modulus_of_continuity(&self, xi: f64) -> Result<f64> {
        if !xi.is_finite() || xi <= 0.0 {
            return Err(Error::invalid(format!("xi must be positive, got {xi}")));
        }
        let nodes = self.mesh.nodes();
        let mut worst: f64 = 0.0;
        for member in &self.members {
            let values = member.values();
            for i in 0..nodes.len() {
                for j in i + 1..nodes.len() {
                    if nodes[j] - nodes[i] > xi {
                        break;
                    }
                    worst = worst.max((&values[j] - &values[i]).norm());
                }
            }
        }
        Ok(worst)
    }

    /// Size of a greedy farthest-point `eps`-net of the members under the sup
    /// norm. Deterministic given member order; an upper bound on the minimal
    /// covering number (and at most the optimal `eps/2`-cover, since the
    /// chosen centers are pairwise more than `eps` apart).
    ///
    /// Finite families are always compact, so this is a refinement
    /// diagnostic for how the net size shrinks as `eps` grows or sampling
    /// densifies, not a noncompactness measure.
    pub fn covering_number(&self, eps: f64) -> Result<usize> {
        if !eps.is_finite() || eps <= 0.0 {
            return Err(Error::invalid(format!("eps must be positive, got {eps}")));
        }
        // dist[i] = distance of member i to its nearest chosen center
        let mut dist: Vec<f64> = self.members[0..]
            .iter()
            .map(|m| m.sup_distance(&self.members[0]).unwrap())
            .collect();
        let mut centers = 1;
        loop {
            let (far_idx, far_dist) = dist
                .iter()
                .enumerate()
                .fold((0, 0.0_f64), |(bi, bd), (i, &d)| {
                    if d > bd {
                        (i, d)
                    } else {
                        (bi, bd)
                    }
                });
            if far_dist <= eps {
                return Ok(centers);
            }
            centers += 1;
            for (i, d) in dist.iter_mut().enumerate() {
                let to_new = self.members[i].sup_distance(&self.members[far_idx]).unwrap();
                if to_new < *d {
                    *d = to_new;
                }
            }
        }
    }

    /// Directed semidistance `sup_{a in self} inf_{b in other} ||a - b||_sup`.
    pub fn semidistance_to(&self, other: &PathFamily) -> Result<f64> {
        if !self.mesh.compatible(other.mesh()) {
            return Err(Error::invalid("families live on different meshes"));
        }
        let mut worst: f64 = 0.0;
        for a in &self.members {
            let nearest = other
                .members
                .iter()
                .map(|b| a.sup_distance(b).unwrap())
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(nearest);
        }
        Ok(worst)
    }

    /// Hausdorff distance between the two sampled families: the max of the
    /// two directed semidistances.
    pub fn hausdorff_distance(&self, other: &PathFamily) -> Result<f64> {
        let fwd = self.semidistance_to(other)?;
        let bwd = other.semidistance_to(self)?;
        Ok(fwd.max(bwd))
    }

    /// Sup-norm diameter of the family.
    pub fn diameter(&self) -> f64 {
        let mut diam: f64 = 0.0;
        for (i, a) in self.members.iter().enumerate() {
            for b in &self.members[i + 1..] {
                diam = diam.max(a.sup_distance(b).unwrap());
            }
        }
        diam
    }
}
