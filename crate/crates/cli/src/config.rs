//! Experiment configuration: one TOML file per run. Catalog names or inline
//! closed-form expressions define the problem; everything that affects the
//! output (mesh, solver knobs, seeds, declared growth data) lives here and
//! is echoed verbatim into the run manifest.

use serde::{Deserialize, Serialize};

/// The experiment kinds; each is also a CLI subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    SolveEq,
    Funnel,
    NestingLadder,
    PeriodicVolterra,
    PeriodicHammerstein,
    CheckConditions,
    ConvergenceTable,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::SolveEq => "solve-eq",
            Kind::Funnel => "funnel",
            Kind::NestingLadder => "nesting-ladder",
            Kind::PeriodicVolterra => "periodic-volterra",
            Kind::PeriodicHammerstein => "periodic-hammerstein",
            Kind::CheckConditions => "check-conditions",
            Kind::ConvergenceTable => "convergence-table",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional; when present it must match the subcommand.
    pub kind: Option<Kind>,
    #[serde(default)]
    pub seed: u64,
    pub mesh: MeshConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub problem: Option<ProblemConfig>,
    #[serde(default)]
    pub field: Option<FieldConfig>,
    #[serde(default)]
    pub funnel: Option<FunnelConfig>,
    #[serde(default)]
    pub ladder: Option<LadderConfig>,
    #[serde(default)]
    pub periodic: Option<PeriodicConfig>,
    #[serde(default)]
    pub table: Option<TableConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub t_end: f64,
    pub nodes: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub max_iter: usize,
    pub tol: f64,
    pub damping: f64,
    pub p: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection { max_iter: 200, tol: 1e-10, damping: 1.0, p: 2.0 }
    }
}

/// A named catalog problem, or an inline (kernel, f, h) triple.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub kernel: Option<KernelConfig>,
    #[serde(default)]
    pub f: Option<ExprVec>,
    #[serde(default)]
    pub h: Option<ExprVec>,
    /// Declared growth bound samples `c(t) = const` (used in condition
    /// reports and the a-priori bound).
    #[serde(default)]
    pub growth_c: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default)]
    pub name: Option<String>,
    /// Scalar expression in `t`, `s`, times the identity matrix.
    #[serde(default)]
    pub expr: Option<String>,
    #[serde(default)]
    pub domain: Option<KernelDomainConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelDomainConfig {
    Triangle,
    Square,
}

/// One expression per state component.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExprVec {
    pub expr: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    /// interval | ball | box
    pub kind: String,
    #[serde(default)]
    pub lo: Option<Vec<f64>>,
    #[serde(default)]
    pub hi: Option<Vec<f64>>,
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    #[serde(default)]
    pub radius: Option<f64>,
    /// Declared contraction density (constant sample).
    #[serde(default)]
    pub eta: f64,
    /// Declared uniform bound; defaults to the set geometry.
    #[serde(default)]
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunnelConfig {
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    #[serde(default = "default_levels")]
    pub levels: usize,
    pub samples: usize,
}

fn default_levels() -> usize {
    4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicConfig {
    /// Generator matrix rows for `U(t) = exp(t A)` (Volterra runs).
    #[serde(default)]
    pub generator: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_omega")]
    pub omega: f64,
    /// Extremal direction for set-valued runs.
    #[serde(default)]
    pub direction: Option<Vec<f64>>,
    /// `enforce` (default) or `warn-and-proceed`.
    #[serde(default)]
    pub on_condition_failure: Option<String>,
}

fn default_omega() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    pub sizes: Vec<usize>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("config parse error: {e}"))
    }

    /// Structural validation shared by every kind.
    pub fn validate(&self, kind: Kind) -> Result<(), String> {
        if let Some(declared) = self.kind {
            if declared != kind {
                return Err(format!(
                    "config declares kind '{}' but the subcommand is '{}'",
                    declared.as_str(),
                    kind.as_str()
                ));
            }
        }
        if self.mesh.nodes < 2 {
            return Err(format!("mesh.nodes must be at least 2, got {}", self.mesh.nodes));
        }
        if !self.mesh.t_end.is_finite() || self.mesh.t_end <= 0.0 {
            return Err(format!("mesh.t_end must be positive, got {}", self.mesh.t_end));
        }
        if self.mesh.dim == 0 || self.mesh.dim > 9 {
            return Err(format!("mesh.dim must be in 1..=9, got {}", self.mesh.dim));
        }
        if self.solver.max_iter == 0 || !self.solver.tol.is_finite() || self.solver.tol <= 0.0 {
            return Err("solver.max_iter and solver.tol must be positive".into());
        }
        if self.solver.damping.is_nan() || self.solver.damping <= 0.0 || self.solver.damping > 1.0 {
            return Err(format!("solver.damping must lie in (0, 1], got {}", self.solver.damping));
        }
        if self.solver.p < 1.0 {
            return Err(format!("solver.p must be >= 1, got {}", self.solver.p));
        }
        match kind {
            Kind::SolveEq | Kind::ConvergenceTable | Kind::CheckConditions => {
                if self.problem.is_none() {
                    return Err(format!("kind '{}' needs a [problem] section", kind.as_str()));
                }
            }
            Kind::Funnel | Kind::NestingLadder => {
                if self.field.is_none() {
                    return Err(format!("kind '{}' needs a [field] section", kind.as_str()));
                }
                if kind == Kind::Funnel && self.funnel.is_none() {
                    return Err("kind 'funnel' needs a [funnel] section".into());
                }
                if kind == Kind::NestingLadder && self.ladder.is_none() {
                    return Err("kind 'nesting-ladder' needs a [ladder] section".into());
                }
            }
            Kind::PeriodicVolterra => {
                if self.periodic.is_none() {
                    return Err("kind 'periodic-volterra' needs a [periodic] section".into());
                }
            }
            Kind::PeriodicHammerstein => {}
        }
        if let Some(funnel) = &self.funnel {
            if funnel.samples == 0 {
                return Err("funnel.samples must be positive".into());
            }
        }
        if let Some(ladder) = &self.ladder {
            if ladder.samples == 0 || ladder.levels < 2 {
                return Err("ladder needs samples >= 1 and levels >= 2".into());
            }
        }
        Ok(())
    }
}
