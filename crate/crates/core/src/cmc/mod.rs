//! Constant-mean-curvature graphs: the discrete operator, the barrier-sandwiched
//! Dirichlet solver, the exhaustion by growing boxes, and CMC foliations.

mod entire;
mod foliation;
mod newton;
pub(crate) mod operator;

use thiserror::Error;

pub use entire::{solve_dirichlet, solve_entire, BoxRecord, DirichletSolve, EntireSolve, StopReason};
pub use foliation::{foliate, FoliationResult, Leaf};
pub use newton::IterationRecord;

use crate::domain::DomainError;
use crate::grid::{GridDomain, GridError, InteriorField, Mesh};
use crate::support::{Preset, SupportFunction};

/// Tolerance of the barrier sandwich v₀ ≤ u ≤ v_{1/H} on solver output.
pub const SANDWICH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("slope violation at node {node}: |Du| = {slope}")]
    SlopeViolation { node: usize, slope: f64 },
    #[error("Newton diverged after {iterations} iterations (last residual {last_residual:e}, damping {damping:?})")]
    NewtonDiverged { iterations: usize, last_residual: f64, damping: Vec<f64> },
    #[error("no stabilization after {boxes} boxes (last window change {last_change:e})")]
    NoStabilization { boxes: usize, last_change: f64 },
    #[error("leaf H = {larger_h} lies above leaf H = {smaller_h} by {excess:e} at node {node}")]
    OrderingViolation { larger_h: f64, smaller_h: f64, excess: f64, node: usize },
    #[error("boundary value {value} at node {node} is outside the barriers [{lower}, {upper}]")]
    BoundaryOutsideBarriers { node: usize, value: f64, lower: f64, upper: f64 },
    #[error("boundary data is not spacelike between nodes {0} and {1}")]
    BoundaryNotSpacelike(usize, usize),
    #[error("solution leaves the barriers at node {node}: u = {value}, barriers [{lower}, {upper}]")]
    BarrierViolation { node: usize, value: f64, lower: f64, upper: f64 },
    #[error("expected {expected} values, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("mean curvature must be positive, got {0}")]
    NonPositiveCurvature(f64),
    #[error("curvature list must be strictly increasing with at least two entries")]
    BadCurvatureList,
    #[error("domain has dimension {domain}, grid has dimension {grid}")]
    DimensionMismatch { domain: usize, grid: usize },
    #[error("invalid solver option: {0}")]
    InvalidOption(&'static str),
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Max-norm of L_H(u) at which Newton stops.
    pub tol_newton: f64,
    /// Minimum 1 − |Du| required on returned graphs.
    pub slope_margin: f64,
    pub max_iter: usize,
    /// Number of box doublings tried by [`solve_entire`].
    pub max_boxes: usize,
    /// Max-norm change of the window restriction at which the exhaustion stops.
    pub stabilization_tol: f64,
    /// Grading rate of the auxiliary boxes outside the window, in units of
    /// 1/R_window. Spacing grows like `grading · |x| · h / R_window` far out.
    pub grading: f64,
    /// Level set of the cosmological time used as Dirichlet data on the boxes.
    pub boundary: BoundaryData,
}

/// Dirichlet data of the exhaustion boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryData {
    /// v_{1/H}: the supersolution; restrictions decrease with the box.
    Upper,
    /// v_{1/(nH)}: the subsolution; restrictions increase with the box.
    Lower,
    /// `Upper` for the round cone, `Lower` for sampled (polyhedral) data, where
    /// each one is the asymptotically exact choice.
    #[default]
    Auto,
}

impl BoundaryData {
    pub fn resolve(self, sf: &SupportFunction) -> BoundaryData {
        match (self, sf.preset()) {
            (BoundaryData::Auto, Preset::Cone { .. }) => BoundaryData::Upper,
            (BoundaryData::Auto, _) => BoundaryData::Lower,
            (b, _) => b,
        }
    }

    /// Cosmological-time level of the data for curvature `h` in dimension `n`.
    pub fn level(self, n: usize, h: f64) -> f64 {
        match self {
            BoundaryData::Lower => 1.0 / (n as f64 * h),
            _ => 1.0 / h,
        }
    }
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_newton: 1e-10,
            slope_margin: 1e-3,
            max_iter: 60,
            max_boxes: 6,
            stabilization_tol: 1e-4,
            grading: 0.5,
            boundary: BoundaryData::Auto,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SolveError> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.tol_newton) {
            return Err(SolveError::InvalidOption("tol_newton"));
        }
        if !(self.slope_margin > 0.0 && self.slope_margin < 1.0) {
            return Err(SolveError::InvalidOption("slope_margin"));
        }
        if !positive(self.stabilization_tol) {
            return Err(SolveError::InvalidOption("stabilization_tol"));
        }
        if !positive(self.grading) {
            return Err(SolveError::InvalidOption("grading"));
        }
        if self.max_iter == 0 {
            return Err(SolveError::InvalidOption("max_iter"));
        }
        if self.max_boxes == 0 {
            return Err(SolveError::InvalidOption("max_boxes"));
        }
        Ok(())
    }
}

/// A function on a uniform lattice viewed as the graph Σ_u ⊂ ℝ^{n,1}.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacelikeGraph {
    grid: GridDomain,
    u: Vec<f64>,
    h_target: f64,
    residual_norm: f64,
    slope_margin: f64,
}

impl SpacelikeGraph {
    /// Wraps node values; the residual against `h_target` and the slope margin
    /// min(1 − |Du|) over interior nodes are computed here (the residual is +∞ and
    /// the margin non-positive when the data is not spacelike).
    pub fn new(grid: GridDomain, u: Vec<f64>, h_target: f64) -> Result<Self, SolveError> {
        if u.len() != grid.node_count() {
            return Err(SolveError::LengthMismatch { expected: grid.node_count(), found: u.len() });
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(SolveError::InvalidOption("non-finite height"));
        }
        let mesh = grid.to_mesh();
        let mut margin = f64::INFINITY;
        let mut res = 0.0f64;
        for k in (0..mesh.node_count()).filter(|&k| !mesh.is_boundary(k)) {
            let l = operator::local(&mesh, &u, k);
            margin = margin.min(1.0 - l.grad_sq().sqrt());
            match operator::residual(&l, grid.dim(), h_target) {
                Some(f) => res = res.max(f.abs()),
                None => res = f64::INFINITY,
            }
        }
        Ok(Self { grid, u, h_target, residual_norm: res, slope_margin: margin })
    }

    /// Samples `f` at every node.
    pub fn sampled(grid: GridDomain, h_target: f64, f: impl Fn(&[f64]) -> f64) -> Result<Self, SolveError> {
        let u = (0..grid.node_count()).map(|k| f(&grid.coords(k))).collect();
        Self::new(grid, u, h_target)
    }

    pub fn grid(&self) -> &GridDomain {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn h_target(&self) -> f64 {
        self.h_target
    }

    pub fn residual_norm(&self) -> f64 {
        self.residual_norm
    }

    pub fn slope_margin(&self) -> f64 {
        self.slope_margin
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Height at an arbitrary point of the box, by (bi)linear interpolation.
    pub fn interpolate(&self, x: &[f64]) -> Option<f64> {
        let g = &self.grid;
        if !g.contains_point(x) {
            return None;
        }
        let m = g.nodes_per_axis();
        let cell = |c: f64| {
            let r = (c + g.half_width()) / g.spacing();
            let i = (r.floor() as usize).min(m - 2);
            (i, (r - i as f64).clamp(0.0, 1.0))
        };
        let (i, fx) = cell(x[0]);
        if g.dim() == 1 {
            return Some(self.u[i] * (1.0 - fx) + self.u[i + 1] * fx);
        }
        let (j, fy) = cell(x[1]);
        let at = |a: usize, b: usize| self.u[g.index(a, b)];
        Some(
            at(i, j) * (1.0 - fx) * (1.0 - fy)
                + at(i + 1, j) * fx * (1.0 - fy)
                + at(i, j + 1) * (1.0 - fx) * fy
                + at(i + 1, j + 1) * fx * fy,
        )
    }

    /// Restriction to the centered sub-box of half-width `half_width`.
    pub fn restrict(&self, half_width: f64) -> Result<SpacelikeGraph, SolveError> {
        let sub = self.grid.sub_box(half_width)?;
        let off = (self.grid.nodes_per_axis() - sub.nodes_per_axis()) / 2;
        let u = (0..sub.node_count())
            .map(|k| {
                let (i, j) = sub.multi_index(k);
                let jj = if sub.dim() == 1 { 0 } else { j + off };
                self.u[self.grid.index(i + off, jj)]
            })
            .collect();
        SpacelikeGraph::new(sub, u, self.h_target)
    }
}

fn interior_map(g: &SpacelikeGraph, f: impl Fn(&operator::Local) -> Option<f64>) -> Result<InteriorField, SolveError> {
    let mesh = g.grid.to_mesh();
    let mut nodes = Vec::new();
    let mut values = Vec::new();
    for k in (0..mesh.node_count()).filter(|&k| !mesh.is_boundary(k)) {
        let l = operator::local(&mesh, &g.u, k);
        let v = f(&l).ok_or(SolveError::SlopeViolation { node: k, slope: l.grad_sq().sqrt() })?;
        nodes.push(k);
        values.push(v);
    }
    Ok(InteriorField::new(g.grid.clone(), nodes, values))
}

/// Mean curvature of Σ_u at every interior node.
pub fn mean_curvature_graph(g: &SpacelikeGraph) -> Result<InteriorField, SolveError> {
    let n = g.dim();
    interior_map(g, |l| operator::mean_curvature(l, n))
}

/// L_H(u) at every interior node.
pub fn cmc_residual(g: &SpacelikeGraph, h: f64) -> Result<InteriorField, SolveError> {
    let n = g.dim();
    interior_map(g, |l| operator::residual(l, n, h))
}

/// Lower and upper barriers v₀ and v_{1/H} at every mesh node.
pub(crate) fn barriers(
    domain: &crate::domain::RegularDomainModel,
    mesh: &Mesh,
    h: f64,
) -> Result<(Vec<f64>, Vec<f64>), SolveError> {
    let mut lower = Vec::with_capacity(mesh.node_count());
    let mut upper = Vec::with_capacity(mesh.node_count());
    for k in 0..mesh.node_count() {
        let x = mesh.coords(k);
        lower.push(domain.horizon_height(&x));
        upper.push(domain.level_set_height(1.0 / h, &x)?);
    }
    Ok((lower, upper))
}
