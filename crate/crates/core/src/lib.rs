//! Numerical machinery for Volterra and Hammerstein integral equations and
//! inclusions on a compact interval, at desk scale (states in `R^d`, sampled
//! paths on a quadrature mesh).
//!
//! The crate provides
//! * time meshes, piecewise-linear paths and family diagnostics ([`mesh`]),
//! * matrix kernels with sampled regularity checkers and a small catalog
//!   ([`kernel`]),
//! * the product-quadrature integral operators and the triangular inversion
//!   ([`operator`]),
//! * a damped Picard solver with interval splitting, continuation solves and
//!   the homotopy built on them ([`solver`]),
//! * convex set values, selection strategies and solution-funnel sampling
//!   for set-valued right-hand sides ([`inclusion`]),
//! * Poincaré-type periodic solution finders with the explicit contraction
//!   threshold checkers ([`periodic`]).

pub mod error;
pub mod inclusion;
pub mod kernel;
pub mod mesh;
pub mod operator;
pub mod periodic;
pub mod set;
pub mod solver;

pub use error::{Error, Result};
pub use kernel::{Kernel, KernelDomain, KernelReport, QExponent};
pub use mesh::{Path, PathFamily, TimeMesh};
pub use solver::{GrowthData, SolveReport, SolverConfig};
