//! JSON run configuration and its validation.
//!
//! Sets are described by shape primitives evaluated at node positions with
//! strict inequalities. Relative paths (mask files) resolve against the
//! directory of the configuration file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::convolution::{KernelPair, SpaceKernel, SpatialStencil, TimeKernel};
use crate::coupling::CouplingConfig;
use crate::diagnostics::SuiteOptions;
use crate::elliptic::{Fragments, PoissonOptions};
use crate::error::{Error, Result};
use crate::grid::{boundary_nodes, DomainIssue, DomainSpec, Grid, Mask};
use crate::hamiltonian::{verify_bounds, HamiltonianModel, Profile, SupportEvaluator};
use crate::scalar::norm;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub origin: Vec<f64>,
    pub spacing: f64,
    pub shape: Vec<usize>,
}

/// Set primitive; points are members where the strict inequality holds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    All,
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { centre: Vec<f64>, radius: f64 },
    /// `normal · x < offset`.
    HalfSpace { normal: Vec<f64>, offset: f64 },
    Union { of: Vec<Shape> },
    Intersection { of: Vec<Shape> },
    Difference { a: Box<Shape>, b: Box<Shape> },
    /// A mask written by this crate (`0`/`1` values); the grids must agree.
    MaskFile { path: PathBuf },
}

impl Shape {
    pub fn contains(&self, p: &[f64]) -> bool {
        match self {
            Shape::All => true,
            Shape::Box { lo, hi } => p.iter().zip(lo).zip(hi).all(|((x, l), h)| l < x && x < h),
            Shape::Ball { centre, radius } => {
                p.iter().zip(centre).map(|(x, c)| (x - c) * (x - c)).sum::<f64>() < radius * radius
            }
            Shape::HalfSpace { normal, offset } => p.iter().zip(normal).map(|(x, n)| x * n).sum::<f64>() < *offset,
            Shape::Union { of } => of.iter().any(|s| s.contains(p)),
            Shape::Intersection { of } => of.iter().all(|s| s.contains(p)),
            Shape::Difference { a, b } => a.contains(p) && !b.contains(p),
            Shape::MaskFile { .. } => false,
        }
    }

    fn is_free_space(&self) -> bool {
        matches!(self, Shape::All)
    }

    fn check_dims(&self, dim: usize) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("{what} has the wrong dimension")));
        match self {
            Shape::Box { lo, hi } if lo.len() != dim || hi.len() != dim => bad("box"),
            Shape::Ball { centre, .. } if centre.len() != dim => bad("ball"),
            Shape::HalfSpace { normal, .. } if normal.len() != dim => bad("half_space"),
            Shape::Union { of } | Shape::Intersection { of } => of.iter().try_for_each(|s| s.check_dims(dim)),
            Shape::Difference { a, b } => {
                a.check_dims(dim)?;
                b.check_dims(dim)
            }
            _ => Ok(()),
        }
    }

    /// Membership over a grid. Mask files are read relative to `base`.
    pub fn rasterize(&self, grid: &Grid<f64>, base: &Path) -> Result<Mask<f64>> {
        self.check_dims(grid.dim())?;
        match self {
            Shape::MaskFile { path } => {
                let m = crate::io::read_mask::<f64>(&base.join(path))?;
                if m.grid() != grid {
                    return Err(Error::GridMismatch);
                }
                Ok(m)
            }
            Shape::Union { of } => of.iter().try_fold(Mask::empty(*grid), |acc, s| Ok(acc.union(&s.rasterize(grid, base)?))),
            Shape::Intersection { of } => {
                of.iter().try_fold(Mask::full(*grid), |acc, s| Ok(acc.intersection(&s.rasterize(grid, base)?)))
            }
            Shape::Difference { a, b } => Ok(a.rasterize(grid, base)?.difference(&b.rasterize(grid, base)?)),
            _ => Ok(Mask::from_predicate_unchecked(*grid, |p| self.contains(p))),
        }
    }
}

fn default_one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub omega: Shape,
    pub seed: Shape,
    /// Region selecting the Dirichlet nodes among the boundary nodes of the
    /// domain. When absent, every boundary node in or next to the seed.
    #[serde(default)]
    pub gamma: Option<Shape>,
    /// John centre; snapped to the nearest node.
    pub x0: Vec<f64>,
    #[serde(default = "default_one")]
    pub lipschitz: f64,
    #[serde(default = "default_one")]
    pub kappa0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileConfig {
    Constant { value: f64 },
    Affine { base: f64, slope: f64, u_min: f64, u_max: f64 },
    Tabulated { knots: Vec<f64>, values: Vec<f64> },
}

impl ProfileConfig {
    pub fn profile(&self) -> Profile<f64> {
        match self.clone() {
            ProfileConfig::Constant { value } => Profile::Constant(value),
            ProfileConfig::Affine { base, slope, u_min, u_max } => Profile::Affine { base, slope, u_min, u_max },
            ProfileConfig::Tabulated { knots, values } => Profile::Tabulated { knots, values },
        }
    }

    /// Activation values at which the sandwich is probed.
    fn probe_values(&self) -> Vec<f64> {
        match self {
            ProfileConfig::Constant { .. } => vec![0.0],
            ProfileConfig::Affine { u_min, u_max, .. } => vec![*u_min, 0.5 * (u_min + u_max), *u_max],
            ProfileConfig::Tabulated { knots, .. } => knots.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianConfig {
    /// `γ(u) |p| - 1`.
    Eikonal {
        gamma: ProfileConfig,
        #[serde(default)]
        sigma_lower: Option<f64>,
        #[serde(default)]
        sigma_upper: Option<f64>,
    },
    /// Constant ellipsoid with semi-axes `axes`.
    Ellipsoidal {
        axes: Vec<f64>,
        #[serde(default)]
        sigma_lower: Option<f64>,
        #[serde(default)]
        sigma_upper: Option<f64>,
    },
}

impl HamiltonianConfig {
    /// Model with the declared sandwich radii, defaulting to the analytic ones.
    pub fn model(&self) -> Result<HamiltonianModel<f64>> {
        let (base, lo, hi) = match self {
            HamiltonianConfig::Eikonal { gamma, sigma_lower, sigma_upper } => {
                (HamiltonianModel::eikonal(gamma.profile())?, sigma_lower, sigma_upper)
            }
            HamiltonianConfig::Ellipsoidal { axes, sigma_lower, sigma_upper } => {
                (HamiltonianModel::ellipsoidal(axes)?, sigma_lower, sigma_upper)
            }
        };
        base.with_bounds(lo.unwrap_or(base.sigma_lower()), hi.unwrap_or(base.sigma_upper()))
    }

    fn probe_values(&self) -> Vec<f64> {
        match self {
            HamiltonianConfig::Eikonal { gamma, .. } => gamma.probe_values(),
            HamiltonianConfig::Ellipsoidal { .. } => vec![0.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeKernelConfig {
    Exponential { rate: f64 },
    Tabulated { horizon: f64, values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceKernelConfig {
    Gaussian {
        width: f64,
        #[serde(default)]
        radius: Option<f64>,
    },
    Radial { spacing: f64, values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub time: TimeKernelConfig,
    pub space: SpaceKernelConfig,
}

impl KernelConfig {
    pub fn pair(&self) -> KernelPair<f64> {
        let time = match self.time.clone() {
            TimeKernelConfig::Exponential { rate } => TimeKernel::Exponential { rate },
            TimeKernelConfig::Tabulated { horizon, values } => TimeKernel::Tabulated { horizon, values },
        };
        let space = match self.space.clone() {
            SpaceKernelConfig::Gaussian { width, radius } => SpaceKernel::Gaussian { width, radius },
            SpaceKernelConfig::Radial { spacing, values } => SpaceKernel::Radial { spacing, values },
        };
        KernelPair { time, space }
    }
}

fn default_tol() -> f64 {
    1e-3
}
fn default_max_iter() -> usize {
    50
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    pub horizon: f64,
    pub samples: usize,
    /// Defaults to the largest node distance from the origin.
    #[serde(default)]
    pub window_radius: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_one")]
    pub relaxation: f64,
}

fn default_stencil() -> usize {
    2
}
fn default_cg_tol() -> f64 {
    1e-8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_stencil")]
    pub stencil_radius: usize,
    #[serde(default = "default_cg_tol")]
    pub cg_tol: f64,
    #[serde(default)]
    pub cg_max_iter: Option<usize>,
    /// Solve time slices in parallel (no warm start).
    #[serde(default)]
    pub parallel: bool,
    /// Fail instead of dropping sublevel pieces cut off from the Dirichlet set.
    #[serde(default)]
    pub reject_fragments: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { stencil_radius: 2, cg_tol: 1e-8, cg_max_iter: None, parallel: false, reject_fragments: false }
    }
}

fn default_est0() -> usize {
    100
}
fn default_john() -> usize {
    64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    #[serde(default = "default_est0")]
    pub est0_samples: usize,
    #[serde(default = "default_john")]
    pub john_samples: usize,
    #[serde(default)]
    pub box_scales: Option<Vec<f64>>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig { est0_samples: 100, john_samples: 64, box_scales: None }
    }
}

/// Complete description of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub domain: DomainConfig,
    pub hamiltonian: HamiltonianConfig,
    pub kernel: KernelConfig,
    pub coupling: CouplingSection,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    /// Worker threads; the `ACCRETA_THREADS` variable takes precedence.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Reserved; the default pipeline is deterministic.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

/// A violated assumption, named by the structural requirement it encodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigIssue {
    pub assumption: String,
    pub message: String,
    pub severity: Severity,
}

impl ConfigIssue {
    fn error(assumption: &str, message: impl Into<String>) -> Self {
        ConfigIssue { assumption: assumption.into(), message: message.into(), severity: Severity::Error }
    }

    fn warning(assumption: &str, message: impl Into<String>) -> Self {
        ConfigIssue { assumption: assumption.into(), message: message.into(), severity: Severity::Warning }
    }
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag} [{}]: {}", self.assumption, self.message)
    }
}

pub const DOMAIN: &str = "domain nonempty, open and connected";
pub const SEED: &str = "seed nonempty, connected, inside the domain";
pub const CENTRE: &str = "John centre inside the seed";
pub const DIRICHLET: &str = "Dirichlet part on the domain boundary, next to the seed";
pub const CONSTANTS: &str = "positive geometric constants";
pub const SANDWICH: &str = "ball sandwich of Hamiltonian sublevels";
pub const KERNELS: &str = "kernel integrability";
pub const WINDOW: &str = "window contains the growth up to the horizon";
pub const SOLVER: &str = "solver parameters";

/// Everything a run needs, built from a [`RunConfig`].
#[derive(Clone, Debug)]
pub struct Problem {
    pub grid: Grid<f64>,
    pub domain: DomainSpec<f64>,
    pub model: Arc<HamiltonianModel<f64>>,
    pub evaluator: SupportEvaluator<f64>,
    pub coupling: CouplingConfig<f64>,
    pub diagnostics: SuiteOptions<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn build_grid(&self) -> Result<Grid<f64>> {
        Grid::new(&self.grid.origin, self.grid.spacing, &self.grid.shape)
    }

    /// Domain as configured, without checking its invariants.
    pub fn build_domain(&self, grid: &Grid<f64>, base: &Path) -> Result<DomainSpec<f64>> {
        let d = &self.domain;
        let omega = d.omega.rasterize(grid, base)?;
        let v0 = d.seed.rasterize(grid, base)?;
        let x0 = grid
            .nearest_node(&d.x0)
            .ok_or_else(|| Error::InvalidArgument("John centre outside the grid window".into()))?;
        let near_seed = |i: usize| v0.contains(i) || grid.axis_neighbors(i).flatten().any(|n| v0.contains(n));
        let gamma = match &d.gamma {
            Some(shape) => {
                let region = shape.rasterize(grid, base)?;
                boundary_nodes(&omega).into_iter().filter(|&i| region.contains(i)).collect()
            }
            None => boundary_nodes(&omega).into_iter().filter(|&i| near_seed(i)).collect(),
        };
        Ok(DomainSpec { omega, v0, gamma, x0, lipschitz: d.lipschitz, kappa0: d.kappa0 })
    }

    pub fn window_radius(&self, grid: &Grid<f64>) -> f64 {
        self.coupling.window_radius.unwrap_or_else(|| {
            (0..grid.len()).map(|i| norm(&grid.position(i)[..grid.dim()])).fold(0.0, f64::max)
        })
    }

    pub fn poisson_options(&self) -> PoissonOptions<f64> {
        PoissonOptions {
            cg_tol: self.solver.cg_tol,
            max_iter: self.solver.cg_max_iter,
            fragments: if self.solver.reject_fragments { Fragments::Reject } else { Fragments::Drop },
            parallel: self.solver.parallel,
        }
    }

    pub fn coupling_config(&self, grid: &Grid<f64>) -> CouplingConfig<f64> {
        CouplingConfig {
            horizon: self.coupling.horizon,
            samples: self.coupling.samples,
            window_radius: self.window_radius(grid),
            tol: self.coupling.tol,
            max_iter: self.coupling.max_iter,
            relaxation: self.coupling.relaxation,
            stencil_radius: self.solver.stencil_radius,
            poisson: self.poisson_options(),
            kernels: self.kernel.pair(),
        }
    }

    pub fn suite_options(&self, grid: &Grid<f64>) -> SuiteOptions<f64> {
        SuiteOptions {
            horizon: self.coupling.horizon,
            samples: self.coupling.samples,
            window_radius: self.window_radius(grid),
            est0_samples: self.diagnostics.est0_samples,
            john_samples: self.diagnostics.john_samples,
            box_scales: self.diagnostics.box_scales.clone(),
        }
    }

    /// Every violated assumption checkable on the grid. Errors block a run;
    /// warnings are reported only.
    pub fn validate(&self, base: &Path) -> Vec<ConfigIssue> {
        let mut out = Vec::new();
        let grid = match self.build_grid() {
            Ok(g) => g,
            Err(e) => return vec![ConfigIssue::error(SOLVER, format!("grid: {e}"))],
        };
        let domain = match self.build_domain(&grid, base) {
            Ok(d) => Some(d),
            Err(e) => {
                out.push(ConfigIssue::error(DOMAIN, e.to_string()));
                None
            }
        };
        if let Some(d) = &domain {
            for issue in d.issues() {
                out.push(match issue {
                    DomainIssue::OmegaEmpty => ConfigIssue::error(DOMAIN, "domain has no nodes"),
                    DomainIssue::OmegaDisconnected => ConfigIssue::error(DOMAIN, "domain is not connected"),
                    DomainIssue::SeedEmpty => ConfigIssue::error(SEED, "seed has no nodes"),
                    DomainIssue::SeedOutsideDomain => ConfigIssue::error(SEED, "seed not contained in the domain"),
                    DomainIssue::SeedDisconnected => ConfigIssue::error(SEED, "seed is not connected"),
                    DomainIssue::CentreOutsideSeed => ConfigIssue::error(CENTRE, "x0 snaps to a node outside the seed"),
                    DomainIssue::DirichletEmpty => ConfigIssue::error(DIRICHLET, "no Dirichlet nodes selected"),
                    DomainIssue::DirichletOffBoundary(n) => {
                        ConfigIssue::error(DIRICHLET, format!("node {n} is not on the domain boundary"))
                    }
                    DomainIssue::DirichletNotAdjacentToSeed(n) => {
                        ConfigIssue::error(DIRICHLET, format!("node {n} is neither in nor next to the seed"))
                    }
                    DomainIssue::BadConstant(what) => ConfigIssue::error(CONSTANTS, what),
                    DomainIssue::SeedBeyondJohnBall => {
                        ConfigIssue::error(CENTRE, "seed reaches beyond depth(x0) / kappa0; move x0 inward or lower kappa0")
                    }
                });
            }
        }
        let model = match self.hamiltonian.model() {
            Ok(m) => Some(m),
            Err(e) => {
                out.push(ConfigIssue::error(SANDWICH, e.to_string()));
                None
            }
        };
        if let (Some(m), Some(d)) = (&model, &domain) {
            let nodes: Vec<usize> = d.omega.iter().collect();
            let picks: Vec<usize> = if nodes.is_empty() { Vec::new() } else { (0..8).map(|k| nodes[k * nodes.len() / 8]).collect() };
            let probes: Vec<(Vec<f64>, f64)> = picks
                .iter()
                .flat_map(|&i| {
                    let p = grid.position(i)[..grid.dim()].to_vec();
                    self.hamiltonian.probe_values().into_iter().map(move |u| (p.clone(), u))
                })
                .collect();
            if !probes.is_empty() {
                match verify_bounds(m, &probes, 64, 1e-9) {
                    Ok(report) => {
                        if let Some(bad) = report.probes.iter().find(|p| !p.pass) {
                            out.push(ConfigIssue::error(
                                SANDWICH,
                                format!(
                                    "measured gauge range [{}, {}] at u = {} leaves the declared [{}, {}]",
                                    bad.min_gauge,
                                    bad.max_gauge,
                                    bad.activation,
                                    m.sigma_lower(),
                                    m.sigma_upper()
                                ),
                            ));
                        }
                    }
                    Err(e) => out.push(ConfigIssue::error(SANDWICH, e.to_string())),
                }
            }
        }
        let kernels = self.kernel.pair();
        match kernels.check().and_then(|_| SpatialStencil::new(&grid, &kernels.space)) {
            Ok(stencil) => {
                if !(stencil.l2_norm().is_finite() && kernels.time.total_variation().is_finite()) {
                    out.push(ConfigIssue::error(KERNELS, "kernel norms are not finite"));
                }
                if stencil.offsets.len() == 1 {
                    out.push(ConfigIssue::warning(KERNELS, "spatial kernel narrower than one grid cell"));
                }
            }
            Err(e) => out.push(ConfigIssue::error(KERNELS, e.to_string())),
        }
        if let Some(reach) = kernels.time.horizon() {
            if reach < self.coupling.horizon {
                out.push(ConfigIssue::error(KERNELS, format!("kernel table ends at {reach} before the horizon {}", self.coupling.horizon)));
            }
        }
        if let Err(e) = self.coupling_config(&grid).check() {
            out.push(ConfigIssue::error(SOLVER, e.to_string()));
        }
        if !(1..=3).contains(&self.solver.stencil_radius) {
            out.push(ConfigIssue::error(SOLVER, format!("stencil radius {} not in 1..=3", self.solver.stencil_radius)));
        }
        if !(self.solver.cg_tol > 0.0) {
            out.push(ConfigIssue::error(SOLVER, "cg_tol must be positive"));
        }
        if let (Some(m), Some(d)) = (&model, &domain) {
            let c3 = d.containment_radius(self.coupling.horizon, m.sigma_lower());
            let clearance = window_inradius(&grid);
            let touches = d.omega.iter().any(|i| grid.on_frame(i));
            if touches && c3 > clearance {
                let msg = format!("containment radius {c3} at the horizon exceeds the window clearance {clearance}");
                // a bounded domain confines growth by itself
                out.push(if self.domain.omega.is_free_space() {
                    ConfigIssue::error(WINDOW, msg)
                } else {
                    ConfigIssue::warning(WINDOW, msg)
                });
            }
        }
        out
    }

    /// Builds a runnable problem, failing on the first validation error.
    pub fn build(&self, base: &Path) -> Result<Problem> {
        let issues: Vec<ConfigIssue> = self.validate(base).into_iter().filter(|i| i.severity == Severity::Error).collect();
        if !issues.is_empty() {
            let text: Vec<String> = issues.iter().map(|i| i.to_string()).collect();
            return Err(Error::InvalidArgument(text.join("; ")));
        }
        let grid = self.build_grid()?;
        let domain = self.build_domain(&grid, base)?;
        let model = Arc::new(self.hamiltonian.model()?);
        let evaluator = SupportEvaluator::new(model.clone(), grid.dim());
        Ok(Problem {
            coupling: self.coupling_config(&grid),
            diagnostics: self.suite_options(&grid),
            grid,
            domain,
            model,
            evaluator,
        })
    }
}

/// Smallest distance from the origin to a face of the window.
fn window_inradius(grid: &Grid<f64>) -> f64 {
    let h = grid.spacing();
    (0..grid.dim())
        .map(|a| {
            let lo = grid.origin()[a];
            let hi = lo + h * (grid.shape()[a] - 1) as f64;
            (-lo).min(hi)
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn benchmark() -> RunConfig {
        RunConfig::from_json(
            r#"{
              "grid": {"origin": [-2.0, -2.0], "spacing": 0.04, "shape": [101, 101]},
              "domain": {
                "omega": {"type": "half_space", "normal": [-1.0, 0.0], "offset": 0.01},
                "seed": {"type": "intersection", "of": [
                  {"type": "ball", "centre": [0.0, 0.0], "radius": 0.5},
                  {"type": "half_space", "normal": [-1.0, 0.0], "offset": 0.01}
                ]},
                "x0": [0.24, 0.0],
                "kappa0": 0.5
              },
              "hamiltonian": {"kind": "eikonal", "gamma": {"profile": "constant", "value": 1.0}},
              "kernel": {"time": {"family": "exponential", "rate": 1.0}, "space": {"family": "gaussian", "width": 0.1}},
              "coupling": {"horizon": 1.0, "samples": 10}
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn parses_defaults() {
        let c = benchmark();
        assert_eq!(c.solver.stencil_radius, 2);
        assert_eq!(c.solver.cg_tol, 1e-8);
        assert_eq!(c.coupling.tol, 1e-3);
        assert_eq!(c.diagnostics.john_samples, 64);
    }

    #[test]
    fn shapes_rasterize() {
        let g = Grid::cube(2, -1.0, 1.0, 21).unwrap();
        let ring = Shape::Difference {
            a: Box::new(Shape::Ball { centre: vec![0.0, 0.0], radius: 0.9 }),
            b: Box::new(Shape::Ball { centre: vec![0.0, 0.0], radius: 0.5 }),
        };
        let m = ring.rasterize(&g, Path::new(".")).unwrap();
        for i in 0..g.len() {
            let p = g.position(i);
            let r2 = p[0] * p[0] + p[1] * p[1];
            assert_eq!(m.contains(i), (0.25..0.81).contains(&r2));
        }
        let half = Shape::HalfSpace { normal: vec![1.0, 0.0], offset: 0.0 };
        assert_eq!(half.rasterize(&g, Path::new(".")).unwrap().count(), 10 * 21);
    }

    #[test]
    fn free_space_window_violation_is_an_error() {
        let mut c = benchmark();
        c.coupling.horizon = 3.0;
        let issues = c.validate(Path::new("."));
        assert!(issues.iter().any(|i| i.assumption == WINDOW && i.severity == Severity::Warning), "{issues:?}");
        c.domain.omega = Shape::All;
        let issues = c.validate(Path::new("."));
        assert!(issues.iter().any(|i| i.assumption == WINDOW && i.severity == Severity::Error), "{issues:?}");
    }

    #[test]
    fn oversized_sigma_lower_is_reported() {
        let mut c = benchmark();
        c.hamiltonian = HamiltonianConfig::Eikonal {
            gamma: ProfileConfig::Constant { value: 1.0 },
            sigma_lower: Some(0.9),
            sigma_upper: Some(1.0),
        };
        assert!(c.validate(Path::new(".")).is_empty());
        c.hamiltonian = HamiltonianConfig::Eikonal {
            gamma: ProfileConfig::Constant { value: 1.0 },
            sigma_lower: Some(2.0),
            sigma_upper: Some(2.0),
        };
        let issues = c.validate(Path::new("."));
        assert!(issues.iter().any(|i| i.assumption == SANDWICH), "{issues:?}");
    }

    #[test]
    fn dirichlet_away_from_seed_is_reported() {
        let mut c = benchmark();
        assert!(c.validate(Path::new(".")).is_empty(), "{:?}", c.validate(Path::new(".")));
        c.domain.gamma = Some(Shape::Box { lo: vec![1.0, -3.0], hi: vec![3.0, 3.0] });
        let issues = c.validate(Path::new("."));
        assert!(issues.iter().any(|i| i.assumption == DIRICHLET), "{issues:?}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = serde_json::to_string(&benchmark()).unwrap().replacen("\"seed\":0", "\"seed\":0,\"bogus\":1", 1);
        assert!(RunConfig::from_json(&text).is_err());
    }
}
