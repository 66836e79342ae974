use super::newton::{newton_solve, IterationRecord};
use super::{barriers, BoundaryData, SolveError, SolverOptions, SpacelikeGraph, SANDWICH_TOLERANCE};
use crate::domain::RegularDomainModel;
use crate::grid::{GridDomain, Mesh};
use crate::support::SupportFunction;

#[derive(Debug, Clone)]
pub struct DirichletSolve {
    pub graph: SpacelikeGraph,
    pub log: Vec<IterationRecord>,
}

/// One box of the exhaustion.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxRecord {
    pub half_width: f64,
    pub nodes_per_axis: usize,
    pub newton_iterations: usize,
    /// Max-norm change of the window restriction against the previous box
    /// (+∞ for the first box).
    pub window_change: f64,
    /// Largest pointwise increase of the window restriction against the previous box.
    pub max_increase: f64,
    /// Largest pointwise decrease of the window restriction against the previous box.
    pub max_decrease: f64,
}

/// Why the exhaustion stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Two successive window restrictions agreed to the stabilization tolerance.
    Tolerance,
    /// The window change grew from one box to the next: the far-field truncation
    /// error of the graded outer mesh now dominates the effect of moving the
    /// boundary, so the previous box is returned.
    DiscretizationFloor,
    /// Newton failed on the next, larger box (its near-null far field is no
    /// longer resolved by the graded outer mesh), so the previous box is returned.
    OuterBoxUnresolved,
}

#[derive(Debug, Clone)]
pub struct EntireSolve {
    pub stop: StopReason,
    pub graph: SpacelikeGraph,
    /// Data actually used (never `Auto`).
    pub boundary: BoundaryData,
    pub boxes: Vec<BoxRecord>,
    pub log: Vec<IterationRecord>,
}

impl EntireSolve {
    /// Whether the window restrictions moved monotonically in the direction
    /// predicted by comparison with the boundary data, up to `tol`.
    pub fn is_monotone(&self, tol: f64) -> bool {
        match self.boundary {
            BoundaryData::Lower => self.boxes.iter().all(|b| b.max_decrease <= tol),
            _ => self.boxes.iter().all(|b| b.max_increase <= tol),
        }
    }
}

fn check_h(h: f64) -> Result<(), SolveError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(SolveError::NonPositiveCurvature(h));
    }
    Ok(())
}

/// Solves L_H(u) = 0 on `grid` with Dirichlet values `boundary`, given on the
/// nodes of [`GridDomain::boundary_indices`] in that order.
pub fn solve_dirichlet(
    domain: &RegularDomainModel,
    grid: &GridDomain,
    h: f64,
    boundary: &[f64],
    opts: &SolverOptions,
) -> Result<DirichletSolve, SolveError> {
    check_h(h)?;
    opts.validate()?;
    if domain.dim() != grid.dim() {
        return Err(SolveError::DimensionMismatch { domain: domain.dim(), grid: grid.dim() });
    }
    let bnodes = grid.boundary_indices();
    if boundary.len() != bnodes.len() {
        return Err(SolveError::LengthMismatch { expected: bnodes.len(), found: boundary.len() });
    }
    let mesh = grid.to_mesh();
    let (lower, upper) = barriers(domain, &mesh, h)?;
    let mut data = vec![f64::NAN; grid.node_count()];
    for (&k, &b) in bnodes.iter().zip(boundary) {
        let tol = SANDWICH_TOLERANCE * (1.0 + b.abs());
        if !b.is_finite() || b < lower[k] - tol || b > upper[k] + tol {
            return Err(SolveError::BoundaryOutsideBarriers { node: k, value: b, lower: lower[k], upper: upper[k] });
        }
        data[k] = b;
    }
    check_boundary_spacelike(grid, &data)?;

    let u0 = initial_iterate(grid, &data, &upper, opts.slope_margin);
    let out = newton_solve(&mesh, h, u0, opts)?;
    let graph = SpacelikeGraph::new(grid.clone(), out.u, h)?;
    check_margin(&graph, opts)?;
    check_sandwich(graph.values(), &lower, &upper)?;
    Ok(DirichletSolve { graph, log: out.log })
}

fn check_boundary_spacelike(grid: &GridDomain, data: &[f64]) -> Result<(), SolveError> {
    let m = grid.nodes_per_axis();
    let h = grid.spacing();
    if grid.dim() == 1 {
        if (data[m - 1] - data[0]).abs() >= (m - 1) as f64 * h {
            return Err(SolveError::BoundaryNotSpacelike(0, m - 1));
        }
        return Ok(());
    }
    let last = m - 1;
    let mut pairs = Vec::new();
    for a in 0..last {
        pairs.push((grid.index(a, 0), grid.index(a + 1, 0)));
        pairs.push((grid.index(a, last), grid.index(a + 1, last)));
        pairs.push((grid.index(0, a), grid.index(0, a + 1)));
        pairs.push((grid.index(last, a), grid.index(last, a + 1)));
    }
    for (p, q) in pairs {
        if (data[p] - data[q]).abs() >= h {
            return Err(SolveError::BoundaryNotSpacelike(p, q));
        }
    }
    Ok(())
}

/// Interior start: min(v_{1/H}, upper Lipschitz extension of the boundary data
/// with constant 1 − ε_s). Equals v_{1/H} when the data is v_{1/H}.
fn initial_iterate(grid: &GridDomain, data: &[f64], upper: &[f64], slope_margin: f64) -> Vec<f64> {
    let bnodes = grid.boundary_indices();
    let matches_upper = bnodes.iter().all(|&k| (data[k] - upper[k]).abs() <= 1e-14 * (1.0 + upper[k].abs()));
    let lip = 1.0 - slope_margin;
    let bcoords: Vec<(Vec<f64>, f64)> = bnodes.iter().map(|&k| (grid.coords(k), data[k])).collect();
    (0..grid.node_count())
        .map(|k| {
            if grid.is_boundary(k) {
                return data[k];
            }
            if matches_upper {
                return upper[k];
            }
            let x = grid.coords(k);
            let ext = bcoords
                .iter()
                .map(|(y, b)| {
                    let d: f64 = x.iter().zip(y).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
                    b + lip * d
                })
                .fold(f64::INFINITY, f64::min);
            upper[k].min(ext)
        })
        .collect()
}

fn check_margin(graph: &SpacelikeGraph, opts: &SolverOptions) -> Result<(), SolveError> {
    if graph.slope_margin() < opts.slope_margin {
        let mesh = graph.grid().to_mesh();
        let node = (0..mesh.node_count())
            .filter(|&k| !mesh.is_boundary(k))
            .max_by(|&a, &b| {
                let sa = super::operator::local(&mesh, graph.values(), a).grad_sq();
                let sb = super::operator::local(&mesh, graph.values(), b).grad_sq();
                sa.total_cmp(&sb)
            })
            .unwrap_or(0);
        return Err(SolveError::SlopeViolation { node, slope: 1.0 - graph.slope_margin() });
    }
    Ok(())
}

fn check_sandwich(u: &[f64], lower: &[f64], upper: &[f64]) -> Result<(), SolveError> {
    for (k, ((&v, &lo), &hi)) in u.iter().zip(lower).zip(upper).enumerate() {
        let tol = SANDWICH_TOLERANCE * (1.0 + v.abs());
        if v < lo - tol || v > hi + tol {
            return Err(SolveError::BarrierViolation { node: k, value: v, lower: lo, upper: hi });
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn finish(
    window: &GridDomain,
    h: f64,
    opts: &SolverOptions,
    w: Vec<f64>,
    boundary: BoundaryData,
    stop: StopReason,
    boxes: Vec<BoxRecord>,
    log: Vec<IterationRecord>,
) -> Result<EntireSolve, SolveError> {
    let graph = SpacelikeGraph::new(window.clone(), w, h)?;
    check_margin(&graph, opts)?;
    Ok(EntireSolve { graph, boundary, stop, boxes, log })
}

/// Entire CMC-H graph with asymptotic data `sf`, restricted to `window`.
///
/// Solves the Dirichlet problem with data v_a (a = 1/H or 1/(nH), see
/// [`BoundaryData`]) on boxes of half-width R_window·2^k, k = 1, 2, …, until two
/// successive window restrictions agree to `stabilization_tol`. Each box keeps
/// the window lattice and grades the spacing smoothly outside it; box k + 1 is
/// warm-started from box k. If the change grows between successive boxes the
/// previous restriction is returned with [`StopReason::DiscretizationFloor`];
/// if Newton fails on a box after the second, with
/// [`StopReason::OuterBoxUnresolved`].
pub fn solve_entire(
    sf: &SupportFunction,
    h: f64,
    window: &GridDomain,
    opts: &SolverOptions,
) -> Result<EntireSolve, SolveError> {
    check_h(h)?;
    opts.validate()?;
    if sf.dim() != window.dim() {
        return Err(SolveError::DimensionMismatch { domain: sf.dim(), grid: window.dim() });
    }
    let domain = RegularDomainModel::new(sf.clone());
    let boundary = opts.boundary.resolve(sf);
    let level = boundary.level(sf.dim(), h);
    let r_w = window.half_width();
    let kappa = opts.grading / r_w;
    let core_m = window.nodes_per_axis();

    let mut boxes: Vec<BoxRecord> = Vec::new();
    let mut log = Vec::new();
    let mut previous: Option<(Mesh, Vec<f64>)> = None;
    let mut prev_window: Option<Vec<f64>> = None;

    for k in 1..=opts.max_boxes {
        let outer = r_w * f64::powi(2.0, k as i32);
        let mesh = Mesh::graded(window.dim(), window, outer, kappa);
        let (lower, upper) = barriers(&domain, &mesh, h)?;
        let mut u0 = match boundary {
            BoundaryData::Lower => (0..mesh.node_count())
                .map(|k| domain.level_set_height(level, &mesh.coords(k)))
                .collect::<Result<Vec<f64>, _>>()?,
            _ => upper.clone(),
        };
        if let Some((pm, pu)) = &previous {
            let off = (mesh.m() - pm.m()) / 2;
            for (pk, &v) in pu.iter().enumerate() {
                let (i, j) = pm.multi_index(pk);
                let jj = if mesh.dim == 1 { 0 } else { j + off };
                u0[mesh.index(i + off, jj)] = v;
            }
        }
        let out = match newton_solve(&mesh, h, u0, opts) {
            Ok(out) => out,
            Err(e @ (SolveError::SlopeViolation { .. } | SolveError::NewtonDiverged { .. })) if boxes.len() >= 2 => {
                log::debug!("box {k} failed: {e}");
                let w = prev_window.take().expect("previous window");
                return finish(window, h, opts, w, boundary, StopReason::OuterBoxUnresolved, boxes, log);
            }
            Err(e) => return Err(e),
        };
        log.extend(out.log.iter().copied());

        let off = mesh.core_offset(core_m);
        let restrict = |u: &[f64]| -> Vec<f64> {
            (0..window.node_count())
                .map(|c| {
                    let (i, j) = window.multi_index(c);
                    let jj = if mesh.dim == 1 { 0 } else { j + off };
                    u[mesh.index(i + off, jj)]
                })
                .collect()
        };
        let w = restrict(&out.u);
        check_sandwich(&w, &restrict(&lower), &restrict(&upper))?;
        let (increase, decrease) = match &prev_window {
            Some(p) => w
                .iter()
                .zip(p)
                .fold((f64::NEG_INFINITY, f64::NEG_INFINITY), |(inc, dec), (a, b)| (inc.max(a - b), dec.max(b - a))),
            None => (f64::NEG_INFINITY, f64::NEG_INFINITY),
        };
        let change = if prev_window.is_some() { increase.max(decrease).max(0.0) } else { f64::INFINITY };
        let record = BoxRecord {
            half_width: mesh.half_width(),
            nodes_per_axis: mesh.m(),
            newton_iterations: out.log.len() - 1,
            window_change: change,
            max_increase: increase,
            max_decrease: decrease,
        };
        log::debug!("box {k}: {record:?}");
        boxes.push(record);

        if change <= opts.stabilization_tol {
            return finish(window, h, opts, w, boundary, StopReason::Tolerance, boxes, log);
        }
        let n = boxes.len();
        if n >= 3 && change > boxes[n - 2].window_change {
            let w = prev_window.take().expect("previous window");
            return finish(window, h, opts, w, boundary, StopReason::DiscretizationFloor, boxes, log);
        }
        prev_window = Some(w);
        previous = Some((mesh, out.u));
    }
    Err(SolveError::NoStabilization {
        boxes: opts.max_boxes,
        last_change: boxes.last().map_or(f64::INFINITY, |b| b.window_change),
    })
}
