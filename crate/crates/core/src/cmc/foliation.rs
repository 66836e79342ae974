use rayon::prelude::*;

use super::entire::solve_entire;
use super::{SolveError, SolverOptions, SpacelikeGraph};
use crate::grid::GridDomain;
use crate::lorentz::MinkVector;
use crate::support::SupportFunction;

#[derive(Debug, Clone)]
pub struct Leaf {
    pub h: f64,
    pub graph: SpacelikeGraph,
}

/// CMC leaves Σ_H on one window, ordered by increasing H (so decreasing height).
#[derive(Debug, Clone)]
pub struct FoliationResult {
    support: SupportFunction,
    leaves: Vec<Leaf>,
    gaps: Vec<f64>,
}

impl FoliationResult {
    pub fn support(&self) -> &SupportFunction {
        &self.support
    }

    pub fn leaves(&self) -> &[Leaf] {
        &self.leaves
    }

    /// min over interior nodes of u_{H_i} − u_{H_{i+1}} for each adjacent pair.
    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    pub fn strictly_ordered(&self) -> bool {
        self.gaps.iter().all(|g| *g > 0.0)
    }

    /// Adjacent pair `(H_i, H_{i+1})` with u_{H_{i+1}}(p_x) ≤ p_t ≤ u_{H_i}(p_x), i.e.
    /// the CMC time of `p` lies in [H_i, H_{i+1}]. `None` outside the family or window.
    pub fn bracket(&self, p: &MinkVector) -> Option<(f64, f64)> {
        let heights: Vec<f64> = self.leaves.iter().map(|l| l.graph.interpolate(p.spatial())).collect::<Option<_>>()?;
        (0..heights.len() - 1)
            .find(|&i| heights[i + 1] <= p.time() && p.time() <= heights[i])
            .map(|i| (self.leaves[i].h, self.leaves[i + 1].h))
    }
}

/// Solves one entire leaf per curvature in `h_list` (strictly increasing) and
/// certifies that the leaves are nested.
pub fn foliate(
    sf: &SupportFunction,
    h_list: &[f64],
    window: &GridDomain,
    opts: &SolverOptions,
) -> Result<FoliationResult, SolveError> {
    if h_list.len() < 2 || h_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SolveError::BadCurvatureList);
    }
    let graphs: Vec<SpacelikeGraph> =
        h_list.par_iter().map(|&h| solve_entire(sf, h, window, opts).map(|s| s.graph)).collect::<Result<_, _>>()?;
    let leaves: Vec<Leaf> = h_list.iter().zip(graphs).map(|(&h, graph)| Leaf { h, graph }).collect();

    let interior = window.interior_indices();
    let mut gaps = Vec::with_capacity(leaves.len() - 1);
    for pair in leaves.windows(2) {
        let (low_h, high_h) = (&pair[0], &pair[1]);
        let (gap, node) = interior
            .iter()
            .map(|&k| (low_h.graph.values()[k] - high_h.graph.values()[k], k))
            .fold((f64::INFINITY, 0), |acc, v| if v.0 < acc.0 { v } else { acc });
        if -gap > 10.0 * opts.stabilization_tol {
            return Err(SolveError::OrderingViolation { larger_h: high_h.h, smaller_h: low_h.h, excess: -gap, node });
        }
        gaps.push(gap);
    }
    Ok(FoliationResult { support: sf.clone(), leaves, gaps })
}
