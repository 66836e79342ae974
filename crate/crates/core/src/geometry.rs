//! Extrinsic geometry of spacelike graphs in ℝ^{2,1} and the normal flow.
//!
//! Tensors are written in the graph chart x ↦ (x, u(x)):
//! I = δ − Du Duᵀ, II = D²u / W, B = I⁻¹ II, ν = (Du, 1) / W with W = √(1 − |Du|²).

use nalgebra::{Matrix2, Vector2};
use thiserror::Error;

use crate::cmc::{operator, SolveError, SpacelikeGraph};
use crate::grid::{GridDomain, InteriorField};
use crate::lorentz::MinkVector;

/// Tolerance on negative eigenvalues of quantities that must be semidefinite.
pub const SEMIDEFINITE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("surface geometry is implemented for n = 2, got n = {0}")]
    UnsupportedDimension(usize),
    #[error("graph is not spacelike at node {node} (|Du| = {slope})")]
    SlopeViolation { node: usize, slope: f64 },
    #[error("normal flow degenerates at node {node}: smallest eigenvalue of 1 + tB is {eigenvalue}")]
    FlowDegenerate { node: usize, eigenvalue: f64 },
    #[error("1 + tB is singular (det = {0})")]
    Singular(f64),
    #[error("second fundamental form is not positive semidefinite at node {node} (eigenvalue {eigenvalue})")]
    NotConvex { node: usize, eigenvalue: f64 },
    #[error("flowed surface covers no centered box of the lattice")]
    NoGraphRegion,
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Fundamental forms and curvatures at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeGeometry {
    pub first: Matrix2<f64>,
    pub second: Matrix2<f64>,
    pub shape: Matrix2<f64>,
    pub mean: f64,
    pub gauss: f64,
}

impl NodeGeometry {
    pub fn from_derivatives(du: Vector2<f64>, d2u: Matrix2<f64>) -> Option<Self> {
        let w2 = 1.0 - du.norm_squared();
        if !(w2 > 0.0) {
            return None;
        }
        let first = Matrix2::identity() - du * du.transpose();
        let second = d2u / w2.sqrt();
        let shape = first.try_inverse()? * second;
        Some(Self { first, second, shape, mean: shape.trace() / 2.0, gauss: shape.determinant() })
    }

    /// Principal curvatures, ascending. B is self-adjoint for I, so they are real;
    /// a tiny negative discriminant from round-off is clamped.
    pub fn principal_curvatures(&self) -> (f64, f64) {
        eigenvalues(&self.shape)
    }

    /// Third fundamental form III = II I⁻¹ II.
    pub fn third(&self) -> Matrix2<f64> {
        self.second * self.shape
    }
}

/// Real eigenvalues (ascending) of a 2×2 matrix with real spectrum.
pub fn eigenvalues(m: &Matrix2<f64>) -> (f64, f64) {
    let half_tr = m.trace() / 2.0;
    let disc = (half_tr * half_tr - m.determinant()).max(0.0).sqrt();
    (half_tr - disc, half_tr + disc)
}

fn min_symmetric_eigenvalue(m: &Matrix2<f64>) -> f64 {
    let s = (m + m.transpose()) / 2.0;
    eigenvalues(&s).0
}

/// Per-node geometry on the interior nodes of a graph.
#[derive(Debug, Clone)]
pub struct SurfaceGeometry {
    grid: GridDomain,
    nodes: Vec<usize>,
    data: Vec<NodeGeometry>,
}

impl SurfaceGeometry {
    pub fn grid(&self) -> &GridDomain {
        &self.grid
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn data(&self) -> &[NodeGeometry] {
        &self.data
    }

    pub fn at(&self, node: usize) -> Option<&NodeGeometry> {
        self.nodes.binary_search(&node).ok().map(|r| &self.data[r])
    }

    pub fn mean_curvature(&self) -> InteriorField {
        self.field(|g| g.mean)
    }

    pub fn gauss_curvature(&self) -> InteriorField {
        self.field(|g| g.gauss)
    }

    pub fn field(&self, f: impl Fn(&NodeGeometry) -> f64) -> InteriorField {
        InteriorField::new(self.grid.clone(), self.nodes.clone(), self.data.iter().map(f).collect())
    }
}

fn check_planar(g: &SpacelikeGraph) -> Result<(), GeometryError> {
    if g.dim() != 2 {
        return Err(GeometryError::UnsupportedDimension(g.dim()));
    }
    Ok(())
}

/// I, II, B, H and K at every interior node, from centered differences.
pub fn fundamental_forms(g: &SpacelikeGraph) -> Result<SurfaceGeometry, GeometryError> {
    check_planar(g)?;
    let mesh = g.grid().to_mesh();
    let mut nodes = Vec::new();
    let mut data = Vec::new();
    for k in g.grid().interior_indices() {
        let l = operator::local(&mesh, g.values(), k);
        let du = Vector2::new(l.ux, l.uy);
        let d2u = Matrix2::new(l.uxx, l.uxy, l.uxy, l.uyy);
        let geo = NodeGeometry::from_derivatives(du, d2u)
            .ok_or(GeometryError::SlopeViolation { node: k, slope: du.norm() })?;
        nodes.push(k);
        data.push(geo);
    }
    Ok(SurfaceGeometry { grid: g.grid().clone(), nodes, data })
}

/// Future unit normal ν = (Du, 1) / W at every interior node, in node order of
/// [`GridDomain::interior_indices`]. Works for n = 1 and n = 2.
pub fn gauss_map(g: &SpacelikeGraph) -> Result<Vec<(usize, MinkVector)>, GeometryError> {
    let mesh = g.grid().to_mesh();
    g.grid()
        .interior_indices()
        .into_iter()
        .map(|k| {
            let l = operator::local(&mesh, g.values(), k);
            let grad: Vec<f64> = if g.dim() == 1 { vec![l.ux] } else { vec![l.ux, l.uy] };
            let w2 = 1.0 - l.grad_sq();
            if !(w2 > 0.0) {
                return Err(GeometryError::SlopeViolation { node: k, slope: l.grad_sq().sqrt() });
            }
            let w = w2.sqrt();
            let spatial = grad.iter().map(|d| d / w).collect();
            Ok((k, MinkVector::new(spatial, 1.0 / w).expect("finite normal")))
        })
        .collect()
}

/// B_t = (1 + tB)⁻¹ B and its trace.
pub fn flow_form_algebra(b: &Matrix2<f64>, t: f64) -> Result<(Matrix2<f64>, f64), GeometryError> {
    let m = Matrix2::identity() + b * t;
    let det = m.determinant();
    if det.abs() <= 1e-14 * (1.0 + (b * t).norm()) {
        return Err(GeometryError::Singular(det));
    }
    let bt = m.try_inverse().ok_or(GeometryError::Singular(det))? * b;
    Ok((bt, bt.trace()))
}

/// Threshold on the eigenvalues of 1 + tB below which the flow counts as
/// degenerate on a lattice of spacing `h`: discrete curvatures carry O(h²)
/// errors, so at a focal point 1 + tλ is only resolved to that order.
pub fn degeneracy_threshold(h: f64) -> f64 {
    (h * h).max(1e-8)
}

/// Value, gradient and Hessian of a height function at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub gradient: Vector2<f64>,
    pub hessian: Matrix2<f64>,
}

/// Centered-difference jets at the interior nodes, in increasing node order.
pub fn graph_jets(g: &SpacelikeGraph) -> Result<Vec<(usize, Jet)>, GeometryError> {
    check_planar(g)?;
    let mesh = g.grid().to_mesh();
    Ok(g.grid()
        .interior_indices()
        .into_iter()
        .map(|k| {
            let l = operator::local(&mesh, g.values(), k);
            let jet = Jet {
                value: g.values()[k],
                gradient: Vector2::new(l.ux, l.uy),
                hessian: Matrix2::new(l.uxx, l.uxy, l.uxy, l.uyy),
            };
            (k, jet)
        })
        .collect())
}

/// The surface σ_t = σ + tν at the interior nodes of a lattice.
#[derive(Debug, Clone)]
pub struct FlowedSurface {
    source: GridDomain,
    nodes: Vec<usize>,
    points: Vec<[f64; 3]>,
    first: Vec<Matrix2<f64>>,
    shape: Vec<Matrix2<f64>>,
    t: f64,
}

impl FlowedSurface {
    pub fn t(&self) -> f64 {
        self.t
    }

    /// Source nodes, in the order of the other per-node vectors.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// σ_t at each node as (x, y, time).
    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    /// I_t = (1 + tB)ᵀ I (1 + tB).
    pub fn first_forms(&self) -> &[Matrix2<f64>] {
        &self.first
    }

    /// B_t = (1 + tB)⁻¹ B.
    pub fn shape_operators(&self) -> &[Matrix2<f64>] {
        &self.shape
    }

    fn interior_side(&self) -> usize {
        self.source.nodes_per_axis() - 2
    }

    /// Two triangles per cell of the interior lattice, as indices into
    /// [`FlowedSurface::points`].
    pub fn triangles(&self) -> Vec<[usize; 3]> {
        let m = self.interior_side();
        let idx = |i: usize, j: usize| j * m + i;
        let mut tris = Vec::with_capacity(2 * (m - 1) * (m - 1));
        for j in 0..m - 1 {
            for i in 0..m - 1 {
                tris.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
                tris.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
        tris
    }

    /// Re-samples σ_t as a graph on the source lattice and returns its largest
    /// centered box of covered nodes.
    ///
    /// Coverage and a first guess come from the piecewise-linear triangulation;
    /// the height is then taken from the Catmull–Rom interpolant of σ_t over the
    /// source parameters, inverting its horizontal part by Newton's method, so that
    /// second differences of the result stay consistent.
    pub fn regraph(&self, h_target: f64) -> Result<SpacelikeGraph, GeometryError> {
        let g = &self.source;
        let m = g.nodes_per_axis();
        let sp = g.spacing();
        let r = g.half_width();
        let patch =
            CubicPatch { side: self.interior_side(), spacing: sp, origin: g.axis_coord(1), points: &self.points };
        let mut heights: Vec<Option<f64>> = vec![None; g.node_count()];
        let lattice = |c: f64| (c + r) / sp;
        for tri in self.triangles() {
            let [a, b, c] = tri.map(|q| self.points[q]);
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            if det.abs() < 1e-300 {
                continue;
            }
            let lo = |k: usize| lattice(a[k].min(b[k]).min(c[k])).ceil().max(0.0) as usize;
            let hi = |k: usize| lattice(a[k].max(b[k]).max(c[k])).floor().min(m as f64 - 1.0);
            let (hx, hy) = (hi(0), hi(1));
            if hx < 0.0 || hy < 0.0 {
                continue;
            }
            for j in lo(1)..=hy as usize {
                for i in lo(0)..=hx as usize {
                    let k = g.index(i, j);
                    if heights[k].is_some() {
                        continue;
                    }
                    let y = [g.axis_coord(i), g.axis_coord(j)];
                    let l1 = ((y[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (y[1] - a[1])) / det;
                    let l2 = ((b[0] - a[0]) * (y[1] - a[1]) - (y[0] - a[0]) * (b[1] - a[1])) / det;
                    let l0 = 1.0 - l1 - l2;
                    if l0 < -1e-12 || l1 < -1e-12 || l2 < -1e-12 {
                        continue;
                    }
                    let [pa, pb, pc] = tri.map(|q| patch.parameter(q));
                    let guess = [l0 * pa[0] + l1 * pb[0] + l2 * pc[0], l0 * pa[1] + l1 * pb[1] + l2 * pc[1]];
                    heights[k] = patch.height_over(y, guess);
                }
            }
        }
        let center = (m - 1) / 2;
        let mut best = 0;
        for rad in 2..=center {
            let covered = (center - rad..=center + rad)
                .all(|j| (center - rad..=center + rad).all(|i| heights[g.index(i, j)].is_some()));
            if !covered {
                break;
            }
            best = rad;
        }
        if best < 2 {
            return Err(GeometryError::NoGraphRegion);
        }
        let sub = g.sub_box(best as f64 * sp).map_err(SolveError::from)?;
        let off = center - best;
        let u = (0..sub.node_count())
            .map(|k| {
                let (i, j) = sub.multi_index(k);
                heights[g.index(i + off, j + off)].expect("covered")
            })
            .collect();
        Ok(SpacelikeGraph::new(sub, u, h_target)?)
    }
}

/// Catmull–Rom interpolation of σ_t over the (uniform) interior source lattice.
struct CubicPatch<'a> {
    side: usize,
    spacing: f64,
    origin: f64,
    points: &'a [[f64; 3]],
}

fn catmull_rom(s: f64) -> ([f64; 4], [f64; 4]) {
    let (s2, s3) = (s * s, s * s * s);
    (
        [
            (-s3 + 2.0 * s2 - s) / 2.0,
            (3.0 * s3 - 5.0 * s2 + 2.0) / 2.0,
            (-3.0 * s3 + 4.0 * s2 + s) / 2.0,
            (s3 - s2) / 2.0,
        ],
        [
            (-3.0 * s2 + 4.0 * s - 1.0) / 2.0,
            (9.0 * s2 - 10.0 * s) / 2.0,
            (-9.0 * s2 + 8.0 * s + 1.0) / 2.0,
            (3.0 * s2 - 2.0 * s) / 2.0,
        ],
    )
}

impl CubicPatch<'_> {
    fn parameter(&self, q: usize) -> [f64; 2] {
        let (i, j) = (q % self.side, q / self.side);
        [self.origin + i as f64 * self.spacing, self.origin + j as f64 * self.spacing]
    }

    fn cell(&self, c: f64) -> (usize, f64) {
        let r = (c - self.origin) / self.spacing;
        let i = (r.floor().max(1.0) as usize).min(self.side - 3);
        (i, r - i as f64)
    }

    /// σ_t and its two parameter derivatives at source parameter `p`.
    fn eval(&self, p: [f64; 2]) -> ([f64; 3], [f64; 3], [f64; 3]) {
        let (i, s) = self.cell(p[0]);
        let (j, q) = self.cell(p[1]);
        let (wx, dx) = catmull_rom(s);
        let (wy, dy) = catmull_rom(q);
        let mut val = [0.0; 3];
        let mut d1 = [0.0; 3];
        let mut d2 = [0.0; 3];
        for b in 0..4 {
            for a in 0..4 {
                let pt = self.points[(j + b - 1) * self.side + i + a - 1];
                for c in 0..3 {
                    val[c] += wx[a] * wy[b] * pt[c];
                    d1[c] += dx[a] * wy[b] * pt[c] / self.spacing;
                    d2[c] += wx[a] * dy[b] * pt[c] / self.spacing;
                }
            }
        }
        (val, d1, d2)
    }

    /// Time coordinate of the interpolated surface above the point `y`.
    fn height_over(&self, y: [f64; 2], mut p: [f64; 2]) -> Option<f64> {
        for _ in 0..30 {
            let (val, d1, d2) = self.eval(p);
            let f = [val[0] - y[0], val[1] - y[1]];
            if f[0].abs().max(f[1].abs()) <= 1e-13 * (1.0 + y[0].abs().max(y[1].abs())) {
                return Some(val[2]);
            }
            let det = d1[0] * d2[1] - d2[0] * d1[1];
            if !(det.abs() > 1e-300) {
                return None;
            }
            p[0] -= (d2[1] * f[0] - d2[0] * f[1]) / det;
            p[1] -= (-d1[1] * f[0] + d1[0] * f[1]) / det;
        }
        None
    }
}

/// σ_t = σ + tν with its transported forms, from centered-difference jets.
/// Fails with `FlowDegenerate` where an eigenvalue of 1 + tB drops below
/// [`degeneracy_threshold`] (a focal point, or past one).
pub fn normal_flow(g: &SpacelikeGraph, t: f64) -> Result<FlowedSurface, GeometryError> {
    let jets = graph_jets(g)?;
    flow_jets(g.grid(), &jets, t, degeneracy_threshold(g.grid().spacing()))
}

/// [`normal_flow`] for jets supplied by the caller (e.g. exact derivatives), on
/// the interior nodes of `grid` in increasing order.
pub fn flow_jets(
    grid: &GridDomain,
    jets: &[(usize, Jet)],
    t: f64,
    threshold: f64,
) -> Result<FlowedSurface, GeometryError> {
    if grid.dim() != 2 {
        return Err(GeometryError::UnsupportedDimension(grid.dim()));
    }
    let mut nodes = Vec::with_capacity(jets.len());
    let mut points = Vec::with_capacity(jets.len());
    let mut first = Vec::with_capacity(jets.len());
    let mut shape = Vec::with_capacity(jets.len());
    for &(k, jet) in jets {
        let ng = NodeGeometry::from_derivatives(jet.gradient, jet.hessian)
            .ok_or(GeometryError::SlopeViolation { node: k, slope: jet.gradient.norm() })?;
        let (l0, l1) = ng.principal_curvatures();
        let eigenvalue = (1.0 + t * l0).min(1.0 + t * l1);
        if eigenvalue <= threshold {
            return Err(GeometryError::FlowDegenerate { node: k, eigenvalue });
        }
        let m = Matrix2::identity() + ng.shape * t;
        first.push(m.transpose() * ng.first * m);
        shape.push(flow_form_algebra(&ng.shape, t)?.0);
        let w = (1.0 - jet.gradient.norm_squared()).sqrt();
        let x = grid.coords(k);
        points.push([x[0] + t * jet.gradient[0] / w, x[1] + t * jet.gradient[1] / w, jet.value + t / w]);
        nodes.push(k);
    }
    Ok(FlowedSurface { source: grid.clone(), nodes, points, first, shape, t })
}

/// Certificate that the Gauss map pair is bi-Lipschitz: 2II ⪰ 0 and
/// I − 2II + III ⪰ 0 at every node (smallest eigenvalues reported).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiLipschitzCertificate {
    pub left_min_eigenvalue: f64,
    pub right_min_eigenvalue: f64,
    pub holds: bool,
}

#[derive(Debug, Clone)]
pub struct MinimalLagrangianData {
    pub det_shape: InteriorField,
    /// |Codazzi defect| of B on nodes whose four neighbours are interior.
    pub codazzi: InteriorField,
    pub bilipschitz: BiLipschitzCertificate,
}

/// det B, the Codazzi residual d^∇B, and the bi-Lipschitz certificate of a
/// convex graph (II ⪰ 0 up to [`SEMIDEFINITE_TOLERANCE`]).
pub fn minimal_lagrangian_data(g: &SpacelikeGraph) -> Result<MinimalLagrangianData, GeometryError> {
    let geo = fundamental_forms(g)?;
    let mut left = f64::INFINITY;
    let mut right = f64::INFINITY;
    for (&k, ng) in geo.nodes().iter().zip(geo.data()) {
        let ev = min_symmetric_eigenvalue(&ng.second);
        if ev < -SEMIDEFINITE_TOLERANCE {
            return Err(GeometryError::NotConvex { node: k, eigenvalue: ev });
        }
        left = left.min(2.0 * ev);
        right = right.min(min_symmetric_eigenvalue(&(ng.first - ng.second * 2.0 + ng.third())));
    }
    let holds = left >= -SEMIDEFINITE_TOLERANCE && right >= -SEMIDEFINITE_TOLERANCE;
    Ok(MinimalLagrangianData {
        det_shape: geo.gauss_curvature(),
        codazzi: codazzi_residual(&geo),
        bilipschitz: BiLipschitzCertificate { left_min_eigenvalue: left, right_min_eigenvalue: right, holds },
    })
}

/// (d^∇B)^k = ∂₁B^k₂ − ∂₂B^k₁ + Γ^k_{1l} B^l₂ − Γ^k_{2l} B^l₁, with the
/// Christoffel symbols of I; all derivatives centered.
fn codazzi_residual(geo: &SurfaceGeometry) -> InteriorField {
    let g = geo.grid();
    let sp = g.spacing();
    let inner = |i: usize, j: usize| geo.at(g.index(i, j));
    let mut nodes = Vec::new();
    let mut values = Vec::new();
    for &k in geo.nodes() {
        let (i, j) = g.multi_index(k);
        let (Some(c), Some(e), Some(w), Some(n), Some(s)) =
            (geo.at(k), inner(i + 1, j), inner(i - 1, j), inner(i, j + 1), inner(i, j - 1))
        else {
            continue;
        };
        let d_b = [(e.shape - w.shape) / (2.0 * sp), (n.shape - s.shape) / (2.0 * sp)];
        let d_g = [(e.first - w.first) / (2.0 * sp), (n.first - s.first) / (2.0 * sp)];
        let g_inv = c.first.try_inverse().expect("spacelike metric is invertible");
        // Γ^k_{ab} = ½ g^{kl} (∂_a g_{lb} + ∂_b g_{la} − ∂_l g_{ab})
        let gamma = |kk: usize, a: usize, b: usize| -> f64 {
            (0..2).map(|l| g_inv[(kk, l)] * (d_g[a][(l, b)] + d_g[b][(l, a)] - d_g[l][(a, b)])).sum::<f64>() / 2.0
        };
        let b = &c.shape;
        let defect: Vec<f64> = (0..2)
            .map(|kk| {
                let mut v = d_b[0][(kk, 1)] - d_b[1][(kk, 0)];
                for l in 0..2 {
                    v += gamma(kk, 0, l) * b[(l, 1)] - gamma(kk, 1, l) * b[(l, 0)];
                }
                v
            })
            .collect();
        nodes.push(k);
        values.push(defect[0].hypot(defect[1]));
    }
    InteriorField::new(g.clone(), nodes, values)
}
