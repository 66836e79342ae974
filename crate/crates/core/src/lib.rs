//! Entire spacelike constant-mean-curvature hypersurfaces in Minkowski space ℝ^{n,1}.
//!
//! A regular domain is described by its null support function; the CMC-H graph with
//! that asymptotic data is squeezed between the past horizon and the cosmological
//! level set T⁻¹(1/H) and computed on an exhaustion by growing boxes.

// `!(x > 0.0)` is used on purpose: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cmc;
pub mod domain;
pub mod geometry;
pub mod grid;
pub mod lorentz;
pub mod support;
pub mod verify;

pub use cmc::{
    cmc_residual, foliate, mean_curvature_graph, solve_dirichlet, solve_entire, BoundaryData, FoliationResult,
    SolveError, SolverOptions, SpacelikeGraph,
};
pub use domain::{DomainError, RegularDomainModel};
pub use grid::{GridDomain, GridError, InteriorField};
pub use lorentz::{causal_class, lorentzian_distance, minkowski_inner, CausalClass, LorentzError, MinkVector};
pub use support::{make_support_function, null_cut, Preset, Sample, SupportError, SupportFunction};
