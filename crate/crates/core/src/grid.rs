//! Node lattices on boxes [−R, R]ⁿ, n ∈ {1, 2}.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid dimension must be 1 or 2, got {0}")]
    UnsupportedDimension(usize),
    #[error("spacing must be positive and finite, got {0}")]
    BadSpacing(f64),
    #[error("half-width must be positive and finite, got {0}")]
    BadHalfWidth(f64),
    #[error("half-width {half_width} is not an integer multiple of spacing {spacing}")]
    NotCommensurate { half_width: f64, spacing: f64 },
    #[error("need at least 5 nodes per axis, got {0}")]
    TooFewNodes(usize),
}

/// Uniform lattice with spacing h on [−R, R]ⁿ.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    dim: usize,
    half_width: f64,
    spacing: f64,
    nodes_per_axis: usize,
}

impl GridDomain {
    pub fn new(dim: usize, half_width: f64, spacing: f64) -> Result<Self, GridError> {
        if !(1..=2).contains(&dim) {
            return Err(GridError::UnsupportedDimension(dim));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(GridError::BadSpacing(spacing));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(GridError::BadHalfWidth(half_width));
        }
        let cells = half_width / spacing;
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-9 * cells.max(1.0) {
            return Err(GridError::NotCommensurate { half_width, spacing });
        }
        let nodes_per_axis = 2 * rounded as usize + 1;
        if nodes_per_axis < 5 {
            return Err(GridError::TooFewNodes(nodes_per_axis));
        }
        Ok(Self { dim, half_width, spacing, nodes_per_axis })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_axis.pow(self.dim as u32)
    }

    /// Coordinate of lattice index `i` along an axis; symmetric about 0.
    pub fn axis_coord(&self, i: usize) -> f64 {
        let center = (self.nodes_per_axis - 1) as f64 / 2.0;
        (i as f64 - center) * self.spacing
    }

    pub fn axis_coords(&self) -> Vec<f64> {
        (0..self.nodes_per_axis).map(|i| self.axis_coord(i)).collect()
    }

    /// Flat index of the multi-index (i, j) (j ignored for n = 1).
    pub fn index(&self, i: usize, j: usize) -> usize {
        if self.dim == 1 {
            i
        } else {
            j * self.nodes_per_axis + i
        }
    }

    pub fn multi_index(&self, k: usize) -> (usize, usize) {
        if self.dim == 1 {
            (k, 0)
        } else {
            (k % self.nodes_per_axis, k / self.nodes_per_axis)
        }
    }

    pub fn coords(&self, k: usize) -> Vec<f64> {
        let (i, j) = self.multi_index(k);
        if self.dim == 1 {
            vec![self.axis_coord(i)]
        } else {
            vec![self.axis_coord(i), self.axis_coord(j)]
        }
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        let last = self.nodes_per_axis - 1;
        let (i, j) = self.multi_index(k);
        i == 0 || i == last || (self.dim == 2 && (j == 0 || j == last))
    }

    /// Boundary nodes in increasing flat-index order; this order defines
    /// Dirichlet data vectors.
    pub fn boundary_indices(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&k| self.is_boundary(k)).collect()
    }

    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&k| !self.is_boundary(k)).collect()
    }

    /// Index of the node at coordinates `x` if it lies on the lattice.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let to_index = |c: f64| {
            let center = (self.nodes_per_axis - 1) as f64 / 2.0;
            let r = c / self.spacing + center;
            let ri = r.round();
            ((r - ri).abs() < 1e-6 && ri >= 0.0 && ri < self.nodes_per_axis as f64).then_some(ri as usize)
        };
        match (self.dim, x) {
            (1, [a]) => to_index(*a),
            (2, [a, b]) => Some(self.index(to_index(*a)?, to_index(*b)?)),
            _ => None,
        }
    }

    /// Centered sub-box of half-width `half_width` (a multiple of h).
    pub fn sub_box(&self, half_width: f64) -> Result<GridDomain, GridError> {
        GridDomain::new(self.dim, half_width, self.spacing)
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.dim && x.iter().all(|c| c.abs() <= self.half_width + 1e-12)
    }

    pub(crate) fn to_mesh(&self) -> Mesh {
        Mesh { dim: self.dim, axis: self.axis_coords() }
    }
}

/// Values on the interior nodes of a grid, stored in increasing flat-index order.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorField {
    grid: GridDomain,
    nodes: Vec<usize>,
    values: Vec<f64>,
}

impl InteriorField {
    pub(crate) fn new(grid: GridDomain, nodes: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(nodes.len(), values.len());
        Self { grid, nodes, values }
    }

    pub fn grid(&self) -> &GridDomain {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at a flat grid index, `None` for boundary nodes.
    pub fn at(&self, k: usize) -> Option<f64> {
        self.nodes.binary_search(&k).ok().map(|p| self.values[p])
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_deviation(&self, target: f64) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max((v - target).abs()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes.iter().copied().zip(self.values.iter().copied())
    }
}

/// Tensor-product lattice with the same (possibly graded) node sequence on every axis.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Mesh {
    pub dim: usize,
    pub axis: Vec<f64>,
}

impl Mesh {
    /// Nodes ξ = k·h mapped through X(ξ) = ξ on |ξ| ≤ R_core and
    /// X(ξ) = R_core + sinh(κ(ξ − R_core))/κ beyond, truncated where |X| first
    /// reaches `outer`. X agrees with the identity to second order at R_core, so the
    /// graded stencils keep second-order consistency in h.
    pub fn graded(dim: usize, core: &GridDomain, outer: f64, kappa: f64) -> Mesh {
        let h = core.spacing();
        let r_core = core.half_width();
        let core_cells = (core.nodes_per_axis() - 1) / 2;
        let map = |k: usize| {
            let xi = k as f64 * h;
            if k <= core_cells {
                core.axis_coord(core_cells + k)
            } else {
                r_core + (kappa * (xi - r_core)).sinh() / kappa
            }
        };
        let mut half = Vec::new();
        let mut k = 0;
        loop {
            let x = map(k);
            half.push(x);
            if x >= outer - 1e-12 {
                break;
            }
            k += 1;
        }
        let mut axis: Vec<f64> = half.iter().rev().map(|x| -x).collect();
        axis.pop();
        axis.extend(half);
        Mesh { dim, axis }
    }

    pub fn m(&self) -> usize {
        self.axis.len()
    }

    pub fn node_count(&self) -> usize {
        self.m().pow(self.dim as u32)
    }

    pub fn half_width(&self) -> f64 {
        *self.axis.last().expect("non-empty axis")
    }

    pub fn multi_index(&self, k: usize) -> (usize, usize) {
        if self.dim == 1 {
            (k, 0)
        } else {
            (k % self.m(), k / self.m())
        }
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        if self.dim == 1 {
            i
        } else {
            j * self.m() + i
        }
    }

    pub fn coords(&self, k: usize) -> Vec<f64> {
        let (i, j) = self.multi_index(k);
        if self.dim == 1 {
            vec![self.axis[i]]
        } else {
            vec![self.axis[i], self.axis[j]]
        }
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        let last = self.m() - 1;
        let (i, j) = self.multi_index(k);
        i == 0 || i == last || (self.dim == 2 && (j == 0 || j == last))
    }

    /// Offset of the axis index `i` in this mesh for coordinate index `i_core` of
    /// a uniform core lattice with `core_m` nodes.
    pub fn core_offset(&self, core_m: usize) -> usize {
        (self.m() - core_m) / 2
    }
}

/// Three-point weights at node `i` of a (possibly non-uniform) axis:
/// first derivative and second derivative, for offsets −1, 0, +1.
pub(crate) fn stencil_weights(axis: &[f64], i: usize) -> ([f64; 3], [f64; 3]) {
    let hm = axis[i] - axis[i - 1];
    let hp = axis[i + 1] - axis[i];
    let s = hm + hp;
    let d1 = [-hp / (hm * s), (hp - hm) / (hm * hp), hm / (hp * s)];
    let d2 = [2.0 / (hm * s), -2.0 / (hm * hp), 2.0 / (hp * s)];
    (d1, d2)
}
