//! Damped Newton iteration for L_H(u) = 0 with fixed Dirichlet values.
//!
//! Steps and the line search use the mean-curvature form n(H_num − H) of the
//! equation, which penalizes near-null gradients; convergence is tested on L_H.

use std::fmt;

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};

use super::operator::{local, scaled_jacobian_row, scaled_residual};
use super::{SolveError, SolverOptions};
use crate::grid::Mesh;

/// Armijo constant for the max-norm sufficient-decrease test.
const ARMIJO: f64 = 1e-4;
/// Fraction of the current slope margin a single step may consume.
const MARGIN_FRACTION: f64 = 0.5;
const MAX_HALVINGS: usize = 40;
const LINEAR_RELATIVE_TOL: f64 = 1e-12;
/// Give up after this many consecutive steps damped to at most `STALL_DAMPING`.
const STALL_STEPS: usize = 8;
const STALL_DAMPING: f64 = 1.0 / 32.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// max |L_H(u)| over the unknowns.
    pub residual: f64,
    /// Damping factor of the step that produced this iterate (1 for the initial one).
    pub step: f64,
}

impl fmt::Display for IterationRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "iter={} res={:e} step={}", self.iter, self.residual, self.step)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct NewtonOutcome {
    pub u: Vec<f64>,
    pub log: Vec<IterationRecord>,
}

struct Evaluation {
    /// n(H_num − H) per unknown.
    residual: Vec<f64>,
    margin: Vec<f64>,
    max_residual: f64,
    /// max |L_H|, the stopping criterion.
    max_operator: f64,
}

struct System<'a> {
    mesh: &'a Mesh,
    h: f64,
    interior: Vec<usize>,
    /// Unknown number of each mesh node, `usize::MAX` on the boundary.
    unknown: Vec<usize>,
}

impl<'a> System<'a> {
    fn new(mesh: &'a Mesh, h: f64) -> Self {
        let interior: Vec<usize> = (0..mesh.node_count()).filter(|&k| !mesh.is_boundary(k)).collect();
        let mut unknown = vec![usize::MAX; mesh.node_count()];
        for (r, &k) in interior.iter().enumerate() {
            unknown[k] = r;
        }
        Self { mesh, h, interior, unknown }
    }

    /// Residual and slope margin at every unknown; `Err(node)` at the first
    /// non-spacelike node.
    fn evaluate(&self, u: &[f64]) -> Result<Evaluation, usize> {
        let mut res = Vec::with_capacity(self.interior.len());
        let mut margin = Vec::with_capacity(self.interior.len());
        let mut max_residual = 0.0f64;
        let mut max_operator = 0.0f64;
        for &k in &self.interior {
            let l = local(self.mesh, u, k);
            let f = scaled_residual(&l, self.mesh.dim, self.h).ok_or(k)?;
            let w2 = 1.0 - l.grad_sq();
            max_residual = max_residual.max(f.abs());
            max_operator = max_operator.max((f * w2 * w2.sqrt()).abs());
            res.push(f);
            margin.push(1.0 - l.grad_sq().sqrt());
        }
        Ok(Evaluation { residual: res, margin, max_residual, max_operator })
    }

    fn jacobian(&self, u: &[f64]) -> Result<SparseColMat<usize, f64>, SolveError> {
        let n = self.interior.len();
        let mut triplets = Vec::with_capacity(n * 9);
        for (r, &k) in self.interior.iter().enumerate() {
            let (i, j) = self.mesh.multi_index(k);
            let l = local(self.mesh, u, k);
            let row = scaled_jacobian_row(&l, self.mesh.dim, self.h)
                .ok_or_else(|| SolveError::SlopeViolation { node: k, slope: l.grad_sq().sqrt() })?;
            for (di, dj, v) in row {
                let kk = self.mesh.index((i as isize + di) as usize, (j as isize + dj) as usize);
                let c = self.unknown[kk];
                if c != usize::MAX {
                    triplets.push(Triplet::new(r, c, v));
                }
            }
        }
        SparseColMat::try_new_from_triplets(n, n, &triplets).map_err(|e| SolveError::LinearSolve(format!("{e:?}")))
    }
}

/// Solves L_H(u) = 0 on the mesh interior starting from `u` (boundary entries are
/// the Dirichlet data and are never changed).
pub(crate) fn newton_solve(
    mesh: &Mesh,
    h_target: f64,
    mut u: Vec<f64>,
    opts: &SolverOptions,
) -> Result<NewtonOutcome, SolveError> {
    let sys = System::new(mesh, h_target);
    let n = sys.interior.len();
    let mut eval =
        sys.evaluate(&u).map_err(|node| SolveError::SlopeViolation { node, slope: slope_at(mesh, &u, node) })?;
    let mut log = Vec::new();
    let mut damping = Vec::new();
    let mut symbolic: Option<SymbolicLu<usize>> = None;
    let mut step = 1.0;
    let noise = roundoff_floor(mesh, &u);

    for iter in 0..=opts.max_iter {
        let record = IterationRecord { iter, residual: eval.max_operator, step };
        log::debug!("{record}");
        log.push(record);
        if eval.max_operator <= opts.tol_newton {
            return Ok(NewtonOutcome { u, log });
        }
        if iter == opts.max_iter || n == 0 {
            break;
        }

        let jac = sys.jacobian(&u)?;
        let sym = match &symbolic {
            Some(s) => s.clone(),
            None => {
                let s = SymbolicLu::try_new(jac.symbolic()).map_err(|e| SolveError::LinearSolve(format!("{e:?}")))?;
                symbolic = Some(s.clone());
                s
            }
        };
        let lu = Lu::try_new_with_symbolic(sym, jac.as_ref()).map_err(|e| SolveError::LinearSolve(format!("{e:?}")))?;
        let rhs = Col::<f64>::from_fn(n, |r| -eval.residual[r]);
        let mut delta = lu.solve(&rhs);
        let rhs_norm = rhs.norm_max();
        let lin_res = &rhs - &jac * &delta;
        if lin_res.norm_max() > LINEAR_RELATIVE_TOL * rhs_norm {
            let correction = lu.solve(&lin_res);
            delta += correction;
        }
        if !delta.norm_max().is_finite() {
            return Err(SolveError::LinearSolve("non-finite Newton step".into()));
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        let mut slope_blocked = false;
        for _ in 0..MAX_HALVINGS {
            let mut trial = u.clone();
            for (r, &k) in sys.interior.iter().enumerate() {
                trial[k] += alpha * delta[r];
            }
            match sys.evaluate(&trial) {
                Ok(te) => {
                    let guarded = te
                        .margin
                        .iter()
                        .zip(&eval.margin)
                        .all(|(&m_new, &m_old)| m_new >= opts.slope_margin.min(MARGIN_FRACTION * m_old));
                    if !guarded {
                        slope_blocked = true;
                    } else if te.max_residual <= (1.0 - ARMIJO * alpha) * eval.max_residual {
                        accepted = Some((trial, te));
                        break;
                    } else {
                        slope_blocked = false;
                    }
                }
                Err(_) => slope_blocked = true,
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, te)) => {
                u = trial;
                eval = te;
                step = alpha;
                damping.push(alpha);
                if damping.len() >= STALL_STEPS
                    && damping[damping.len() - STALL_STEPS..].iter().all(|&a| a <= STALL_DAMPING)
                {
                    return Err(SolveError::NewtonDiverged {
                        iterations: iter + 1,
                        last_residual: eval.max_operator,
                        damping,
                    });
                }
            }
            None if eval.max_operator <= noise => {
                log::debug!("stopping at the roundoff floor {noise:e} of the second differences");
                return Ok(NewtonOutcome { u, log });
            }
            None if slope_blocked => {
                let (r, _) = eval.margin.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
                let node = sys.interior[r];
                return Err(SolveError::SlopeViolation { node, slope: slope_at(mesh, &u, node) });
            }
            None => {
                return Err(SolveError::NewtonDiverged {
                    iterations: iter + 1,
                    last_residual: eval.max_operator,
                    damping,
                });
            }
        }
    }
    Err(SolveError::NewtonDiverged { iterations: opts.max_iter, last_residual: eval.max_operator, damping })
}

fn slope_at(mesh: &Mesh, u: &[f64], node: usize) -> f64 {
    local(mesh, u, node).grad_sq().sqrt()
}

/// Size of the rounding error of L_H: second differences of values of size
/// max|u| on the finest spacing, with a safety factor.
fn roundoff_floor(mesh: &Mesh, u: &[f64]) -> f64 {
    let finest = mesh.axis.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    64.0 * f64::EPSILON * scale / (finest * finest)
}
