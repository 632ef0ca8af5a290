//! Shared fixtures for the criterion benchmarks.

use std::sync::Arc;

use volterra_core::kernel::{catalog, Kernel};
use volterra_core::mesh::{Path, TimeMesh};

pub fn convolution_kernel() -> Kernel {
    catalog("convolution-exp(1)", 1.0, 1).unwrap()
}

pub fn mesh(n: usize) -> Arc<TimeMesh> {
    TimeMesh::uniform(1.0, n, 1).unwrap()
}

pub fn smooth_path(mesh: &Arc<TimeMesh>) -> Path {
    Path::from_scalar_fn(mesh.clone(), |t| 0.4 + 0.6 * (1.7 * t).sin() + 0.3 * t * t).unwrap()
}
