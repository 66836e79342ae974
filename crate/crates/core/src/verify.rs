//! Numerical checks of the comparison principle, the 1/H distance bound, the
//! asymptotic data of solved graphs and grid convergence.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::cmc::{cmc_residual, solve_entire, SolveError, SolverOptions, SpacelikeGraph};
use crate::domain::{DomainError, RegularDomainModel};
use crate::grid::GridDomain;
use crate::lorentz::MinkVector;
use crate::support::SupportFunction;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("graphs live on different lattices")]
    GridMismatch,
    #[error("comparison needs H1 >= H2 > 0, got H1 = {h1}, H2 = {h2}")]
    CurvatureOrder { h1: f64, h2: f64 },
    #[error("domains are not nested: horizon of the second domain is {excess} below the first at node {node}")]
    DomainNotNested { node: usize, excess: f64 },
    #[error("probe {index} ({probe}) is not in the domain")]
    ProbeOutsideDomain { index: usize, probe: MinkVector },
    #[error("probe {index} ({probe}) is not strictly below the surface")]
    ProbeNotBelowSurface { index: usize, probe: MinkVector },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no probe could be placed below the surface")]
    NoProbes,
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// min(u₂ − u₁) over the common lattice and the nodes where u₂ < u₁ − tol.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub min_gap: f64,
    pub argmin: usize,
    pub violations: usize,
    pub tolerance: f64,
}

impl ComparisonReport {
    pub fn pass(&self) -> bool {
        self.violations == 0
    }
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} comparison: min gap {:.6e} at node {}, {} violations at tol {:e}",
            verdict(self.pass()),
            self.min_gap,
            self.argmin,
            self.violations,
            self.tolerance
        )
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Checks u₂ ≥ u₁ for a graph g1 of curvature H₁ over `d1` and g2 of curvature
/// H₂ ≤ H₁ over the smaller domain `d2` (horizon of `d2` above that of `d1`).
pub fn comparison_check(
    g1: &SpacelikeGraph,
    d1: &SupportFunction,
    g2: &SpacelikeGraph,
    d2: &SupportFunction,
    tol: f64,
) -> Result<ComparisonReport, VerifyError> {
    if g1.grid() != g2.grid() {
        return Err(VerifyError::GridMismatch);
    }
    let (h1, h2) = (g1.h_target(), g2.h_target());
    if !(h1 >= h2 && h2 > 0.0) {
        return Err(VerifyError::CurvatureOrder { h1, h2 });
    }
    let (m1, m2) = (RegularDomainModel::new(d1.clone()), RegularDomainModel::new(d2.clone()));
    let grid = g1.grid();
    for k in 0..grid.node_count() {
        let x = grid.coords(k);
        let (v1, v2) = (m1.horizon_height(&x), m2.horizon_height(&x));
        if v2 < v1 - 1e-12 * (1.0 + v1.abs()) {
            return Err(VerifyError::DomainNotNested { node: k, excess: v1 - v2 });
        }
    }
    let mut report = ComparisonReport { min_gap: f64::INFINITY, argmin: 0, violations: 0, tolerance: tol };
    for (k, (a, b)) in g1.values().iter().zip(g2.values()).enumerate() {
        let gap = b - a;
        if gap < report.min_gap {
            report.min_gap = gap;
            report.argmin = k;
        }
        if gap < -tol {
            report.violations += 1;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub probe: MinkVector,
    pub distance: f64,
    pub bound: f64,
}

impl ProbeResult {
    pub fn pass(&self) -> bool {
        self.distance < self.bound
    }
}

/// d(p, Σ) for each probe below the graph, as the largest Lorentzian distance
/// from p to a lattice node of Σ in its causal future (the point of Σ straight
/// above p is included), against the bound 1/H.
pub fn distance_bound_check(
    g: &SpacelikeGraph,
    domain: &RegularDomainModel,
    probes: &[MinkVector],
) -> Result<Vec<ProbeResult>, VerifyError> {
    if domain.dim() != g.dim() {
        return Err(VerifyError::DimensionMismatch(format!("domain n = {}, graph n = {}", domain.dim(), g.dim())));
    }
    for (index, p) in probes.iter().enumerate() {
        if p.dim() != g.dim() {
            return Err(VerifyError::DimensionMismatch(format!("probe {index} has n = {}", p.dim())));
        }
        if !domain.contains(p) {
            return Err(VerifyError::ProbeOutsideDomain { index, probe: p.clone() });
        }
        match g.interpolate(p.spatial()) {
            Some(u) if p.time() < u => {}
            _ => return Err(VerifyError::ProbeNotBelowSurface { index, probe: p.clone() }),
        }
    }
    let bound = 1.0 / g.h_target();
    let grid = g.grid();
    Ok(probes
        .par_iter()
        .map(|p| {
            let above = g.interpolate(p.spatial()).expect("checked") - p.time();
            let mut best = above;
            for k in 0..grid.node_count() {
                let x = grid.coords(k);
                let dt = g.values()[k] - p.time();
                let r2: f64 = x.iter().zip(p.spatial()).map(|(a, b)| (a - b) * (a - b)).sum();
                if dt > 0.0 && dt * dt >= r2 {
                    best = best.max((dt * dt - r2).sqrt());
                }
            }
            ProbeResult { probe: p.clone(), distance: best, bound }
        })
        .collect())
}

/// `count` probes p = (x, v_τ(x)) with x uniform on the lattice box and τ uniform
/// in (0, 1/H), kept when strictly below the graph. Deterministic in `seed`.
pub fn random_probes(
    g: &SpacelikeGraph,
    domain: &RegularDomainModel,
    count: usize,
    seed: u64,
) -> Result<Vec<MinkVector>, VerifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = g.grid().half_width();
    let tau_max = 1.0 / g.h_target();
    let mut probes = Vec::with_capacity(count);
    let mut attempts = 0;
    while probes.len() < count {
        attempts += 1;
        if attempts > 100 * count.max(1) {
            return Err(VerifyError::NoProbes);
        }
        let x: Vec<f64> = (0..g.dim()).map(|_| rng.gen_range(-r..=r)).collect();
        let tau = rng.gen_range(0.0..tau_max);
        if tau <= 0.0 {
            continue;
        }
        let t = domain.level_set_height(tau, &x)?;
        let u = g.interpolate(&x).expect("inside the box");
        if t < u {
            probes.push(MinkVector::new(x, t).expect("finite probe"));
        }
    }
    Ok(probes)
}

/// Behaviour of r − u(rθ) along one direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Asymptotics {
    /// Bounded: θ ∈ L, with the extrapolated limit f₀(θ).
    Limit(f64),
    Diverging,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticEstimate {
    pub direction: Vec<f64>,
    pub radii: Vec<f64>,
    /// r_k − u(r_k θ).
    pub samples: Vec<f64>,
    pub monotone: bool,
    pub behaviour: Asymptotics,
    /// φ(θ) when θ is a sampled direction of the support function.
    pub support_value: Option<f64>,
}

impl AsymptoticEstimate {
    /// |f₀(θ) − φ(θ)| when both exist.
    pub fn limit_error(&self) -> Option<f64> {
        match (self.behaviour, self.support_value) {
            (Asymptotics::Limit(f0), Some(phi)) => Some((f0 - phi).abs()),
            _ => None,
        }
    }
}

/// Slope above which r − u(rθ) counts as growing linearly.
pub const DIVERGENCE_SLOPE: f64 = 0.5;
/// A slower but non-decaying slope also counts, when at least four radii are
/// given: the slope of f₀ + c/r drops like 1/r², a linear one stays put.
const SLOPE_FLOOR: f64 = 0.02;
const SLOPE_DECAY: f64 = 0.7;
const MONOTONE_TOLERANCE: f64 = 1e-9;

/// Samples r − u(rθ) (bilinear interpolation) along each unit direction and
/// classifies it. Limits are extrapolated by a least-squares fit of
/// f₀ + c/r over the outer half of the radii, the decay of r − u toward the
/// horizon. The classification is only as good as the window allows.
pub fn asymptotic_data(
    g: &SpacelikeGraph,
    sf: &SupportFunction,
    directions: &[Vec<f64>],
    radii: &[f64],
) -> Result<Vec<AsymptoticEstimate>, VerifyError> {
    if radii.len() < 2 || radii.windows(2).any(|w| !(w[1] > w[0])) || radii[0] <= 0.0 {
        return Err(VerifyError::DimensionMismatch("radii must be positive and increasing, at least two".into()));
    }
    directions
        .iter()
        .map(|theta| {
            if theta.len() != g.dim() {
                return Err(VerifyError::DimensionMismatch(format!("direction has n = {}", theta.len())));
            }
            let norm = theta.iter().map(|c| c * c).sum::<f64>().sqrt();
            let theta: Vec<f64> = theta.iter().map(|c| c / norm).collect();
            let samples = radii
                .iter()
                .map(|&r| {
                    let x: Vec<f64> = theta.iter().map(|c| c * r).collect();
                    g.interpolate(&x)
                        .map(|u| r - u)
                        .ok_or_else(|| VerifyError::DimensionMismatch(format!("radius {r} leaves the lattice box")))
                })
                .collect::<Result<Vec<f64>, _>>()?;
            let monotone = samples.windows(2).all(|w| w[1] >= w[0] - MONOTONE_TOLERANCE);
            let half = radii.len() / 2;
            let (tail_r, tail_s) = (&radii[half.min(radii.len() - 2)..], &samples[half.min(radii.len() - 2)..]);
            let late = linear_slope(tail_r, tail_s);
            let steady = radii.len() >= 4 && late > SLOPE_FLOOR && {
                let early = linear_slope(&radii[..=half], &samples[..=half]);
                late > SLOPE_DECAY * early
            };
            let behaviour = if late > DIVERGENCE_SLOPE || steady {
                Asymptotics::Diverging
            } else {
                Asymptotics::Limit(inverse_fit(tail_r, tail_s))
            };
            Ok(AsymptoticEstimate {
                support_value: sf.value_at(&theta),
                direction: theta,
                radii: radii.to_vec(),
                samples,
                monotone,
                behaviour,
            })
        })
        .collect()
}

/// Least-squares slope of y against x.
fn linear_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Intercept f₀ of the least-squares fit y ≈ f₀ + c/x.
fn inverse_fit(x: &[f64], y: &[f64]) -> f64 {
    let inv: Vec<f64> = x.iter().map(|r| 1.0 / r).collect();
    let c = linear_slope(&inv, y);
    let n = x.len() as f64;
    y.iter().sum::<f64>() / n - c * inv.iter().sum::<f64>() / n
}

/// Closed-form graphs used as references.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExactSolution {
    /// √(ρ² + |x|²): the hyperboloid, CMC with H = 1/ρ.
    Hyperboloid { radius: f64 },
    /// √(ρ² + x₁²): the trough, CMC with H = 1/(nρ).
    Trough { radius: f64 },
    /// ⟨a, x⟩ + b, |a| < 1: maximal; only its discrete residual is studied.
    Plane { slope: [f64; 2], offset: f64 },
}

impl ExactSolution {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            ExactSolution::Hyperboloid { radius } => (radius * radius + x.iter().map(|c| c * c).sum::<f64>()).sqrt(),
            ExactSolution::Trough { radius } => (radius * radius + x[0] * x[0]).sqrt(),
            ExactSolution::Plane { slope, offset } => x.iter().zip(slope).map(|(c, a)| c * a).sum::<f64>() + offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub spacing: f64,
    pub nodes_per_axis: usize,
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of log(error) against log(h); NaN when an error is 0.
    pub order: f64,
}

/// Max-norm error against `exact` on a window of half-width `half_width` for each
/// lattice spacing. Curved oracles run [`solve_entire`]; the plane reports the
/// discrete maximal-surface residual of its exact samples.
pub fn convergence_study(
    exact: ExactSolution,
    sf: &SupportFunction,
    h: f64,
    half_width: f64,
    spacings: &[f64],
    opts: &SolverOptions,
) -> Result<ConvergenceReport, VerifyError> {
    let rows = spacings
        .iter()
        .map(|&sp| {
            let grid = GridDomain::new(sf.dim(), half_width, sp).map_err(SolveError::from)?;
            let max_error = match exact {
                ExactSolution::Plane { .. } => {
                    let g = SpacelikeGraph::sampled(grid.clone(), 0.0, |x| exact.eval(x))?;
                    cmc_residual(&g, 0.0)?.max_abs()
                }
                _ => {
                    let s = solve_entire(sf, h, &grid, opts)?;
                    (0..grid.node_count())
                        .map(|k| (s.graph.values()[k] - exact.eval(&grid.coords(k))).abs())
                        .fold(0.0, f64::max)
                }
            };
            Ok(ConvergenceRow { spacing: sp, nodes_per_axis: grid.nodes_per_axis(), max_error })
        })
        .collect::<Result<Vec<_>, VerifyError>>()?;
    let order = if rows.len() >= 2 && rows.iter().all(|r| r.max_error > 0.0) {
        let lx: Vec<f64> = rows.iter().map(|r| r.spacing.ln()).collect();
        let ly: Vec<f64> = rows.iter().map(|r| r.max_error.ln()).collect();
        linear_slope(&lx, &ly)
    } else {
        f64::NAN
    };
    Ok(ConvergenceReport { rows, order })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cone() -> SupportFunction {
        SupportFunction::cone(MinkVector::origin(2), 16).unwrap()
    }

    fn hyperboloid(radius: f64, h: f64) -> SpacelikeGraph {
        let grid = GridDomain::new(2, 2.0, 0.1).unwrap();
        SpacelikeGraph::sampled(grid, h, |x| ExactSolution::Hyperboloid { radius }.eval(x)).unwrap()
    }

    #[test]
    fn nested_hyperboloids_compare() {
        let r = comparison_check(&hyperboloid(1.0, 1.0), &cone(), &hyperboloid(2.0, 0.5), &cone(), 1e-3).unwrap();
        assert!(r.pass());
        // √(4 + r²) − √(1 + r²) decreases in r: the smallest gap is at the corners
        assert!((r.min_gap - (12f64.sqrt() - 3.0)).abs() < 1e-12);
        let same = comparison_check(&hyperboloid(1.0, 1.0), &cone(), &hyperboloid(1.0, 1.0), &cone(), 0.0).unwrap();
        assert_eq!(same.min_gap, 0.0);
        assert!(same.pass());
    }

    #[test]
    fn comparison_preconditions() {
        let g = hyperboloid(1.0, 1.0);
        let e = comparison_check(&hyperboloid(2.0, 0.5), &cone(), &g, &cone(), 1e-3).unwrap_err();
        assert!(matches!(e, VerifyError::CurvatureOrder { .. }));
        let shifted = cone().shifted(1.0);
        let e = comparison_check(&g, &shifted, &hyperboloid(2.0, 0.5), &cone(), 1e-3).unwrap_err();
        assert!(matches!(e, VerifyError::DomainNotNested { .. }));
    }

    #[test]
    fn distance_examples() {
        let d = RegularDomainModel::new(cone());
        let g = hyperboloid(2.0, 0.5);
        let p = MinkVector::new(vec![0.0, 0.0], 1.0).unwrap();
        let r = distance_bound_check(&g, &d, &[p]).unwrap();
        assert!((r[0].distance - 1.0).abs() < 1e-12 && r[0].pass());
        let above = MinkVector::new(vec![0.0, 0.0], 5.0).unwrap();
        assert!(matches!(
            distance_bound_check(&g, &d, &[above]),
            Err(VerifyError::ProbeNotBelowSurface { index: 0, .. })
        ));
        let outside = MinkVector::new(vec![1.0, 0.0], 0.5).unwrap();
        assert!(matches!(distance_bound_check(&g, &d, &[outside]), Err(VerifyError::ProbeOutsideDomain { .. })));
    }

    #[test]
    fn probes_are_reproducible() {
        let d = RegularDomainModel::new(cone());
        let g = hyperboloid(1.0, 1.0);
        let a = random_probes(&g, &d, 10, 7).unwrap();
        assert_eq!(a, random_probes(&g, &d, 10, 7).unwrap());
        assert_ne!(a, random_probes(&g, &d, 10, 8).unwrap());
    }

    #[test]
    fn trough_asymptotics() {
        let grid = GridDomain::new(2, 8.0, 0.25).unwrap();
        let g = SpacelikeGraph::sampled(grid, 0.5, |x| (1.0 + x[0] * x[0]).sqrt()).unwrap();
        let wedge = SupportFunction::wedge(vec![1.0, 0.0], (0.0, 0.0)).unwrap();
        let radii: Vec<f64> = (1..=8).map(f64::from).collect();
        let est = asymptotic_data(&g, &wedge, &[vec![1.0, 0.0], vec![0.0, 1.0]], &radii).unwrap();
        assert!(matches!(est[0].behaviour, Asymptotics::Limit(_)));
        assert!(est[0].limit_error().unwrap() < 0.05);
        assert!(est[0].monotone && est[1].monotone);
        assert_eq!(est[1].behaviour, Asymptotics::Diverging);
        assert_eq!(est[1].support_value, None);
    }

    #[test]
    fn plane_residual_is_round_off() {
        let plane = ExactSolution::Plane { slope: [0.3, -0.2], offset: 1.0 };
        let rep = convergence_study(plane, &cone(), 1.0, 1.0, &[0.2, 0.1], &SolverOptions::default()).unwrap();
        assert!(rep.rows.iter().all(|r| r.max_error < 1e-12));
    }
}
