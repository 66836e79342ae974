//! Discrete CMC graph operator
//!
//! L_H(u) = (1 − |Du|²) Σ Dᵢᵢu + Σ DᵢuDⱼu Dᵢⱼu − nH (1 − |Du|²)^{3/2}
//!
//! with three-point central differences on each axis and the product stencil for
//! the mixed derivative (the four-point cross on uniform lattices).

use crate::grid::{stencil_weights, Mesh};

/// First and second derivatives at one interior node, with the stencil weights
/// that produced them.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Local {
    pub ux: f64,
    pub uy: f64,
    pub uxx: f64,
    pub uyy: f64,
    pub uxy: f64,
    pub d1x: [f64; 3],
    pub d2x: [f64; 3],
    pub d1y: [f64; 3],
    pub d2y: [f64; 3],
}

impl Local {
    pub fn grad_sq(&self) -> f64 {
        self.ux * self.ux + self.uy * self.uy
    }

    /// (1 − |Du|²) Σ Dᵢᵢu + Σ DᵢuDⱼuDᵢⱼu.
    pub fn principal(&self) -> f64 {
        (1.0 - self.uy * self.uy) * self.uxx + (1.0 - self.ux * self.ux) * self.uyy + 2.0 * self.ux * self.uy * self.uxy
    }
}

pub(crate) fn local(mesh: &Mesh, u: &[f64], k: usize) -> Local {
    let (i, j) = mesh.multi_index(k);
    let (d1x, d2x) = stencil_weights(&mesh.axis, i);
    let ux = (0..3).map(|a| d1x[a] * u[mesh.index(i + a - 1, j)]).sum();
    let uxx = (0..3).map(|a| d2x[a] * u[mesh.index(i + a - 1, j)]).sum();
    if mesh.dim == 1 {
        return Local { ux, uy: 0.0, uxx, uyy: 0.0, uxy: 0.0, d1x, d2x, d1y: [0.0; 3], d2y: [0.0; 3] };
    }
    let (d1y, d2y) = stencil_weights(&mesh.axis, j);
    let uy = (0..3).map(|b| d1y[b] * u[mesh.index(i, j + b - 1)]).sum();
    let uyy = (0..3).map(|b| d2y[b] * u[mesh.index(i, j + b - 1)]).sum();
    let mut uxy = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            let w = d1x[a] * d1y[b];
            if w != 0.0 {
                uxy += w * u[mesh.index(i + a - 1, j + b - 1)];
            }
        }
    }
    Local { ux, uy, uxx, uyy, uxy, d1x, d2x, d1y, d2y }
}

/// L_H(u) at a node, `None` where the discrete gradient is not spacelike.
pub(crate) fn residual(l: &Local, n: usize, h: f64) -> Option<f64> {
    let w2 = 1.0 - l.grad_sq();
    if !(w2 > 0.0) {
        return None;
    }
    Some(l.principal() - n as f64 * h * w2 * w2.sqrt())
}

/// Mean curvature of the graph at a node.
pub(crate) fn mean_curvature(l: &Local, n: usize) -> Option<f64> {
    let w2 = 1.0 - l.grad_sq();
    if !(w2 > 0.0) {
        return None;
    }
    Some(l.principal() / (n as f64 * w2 * w2.sqrt()))
}

/// Partial derivatives of L_H with respect to every stencil value, as
/// `(di, dj, ∂L/∂u)` with offsets in {−1, 0, 1}.
pub(crate) fn jacobian_row(l: &Local, dim: usize, h: f64) -> Vec<(isize, isize, f64)> {
    let w = (1.0 - l.grad_sq()).max(0.0).sqrt();
    let nh = dim as f64 * h;
    let f_ux = -2.0 * l.ux * l.uyy + 2.0 * l.uy * l.uxy + 3.0 * nh * w * l.ux;
    let f_uxx = 1.0 - l.uy * l.uy;
    let mut row = Vec::with_capacity(9);
    if dim == 1 {
        for a in 0..3 {
            row.push((a as isize - 1, 0, f_ux * l.d1x[a] + f_uxx * l.d2x[a]));
        }
        return row;
    }
    let f_uy = -2.0 * l.uy * l.uxx + 2.0 * l.ux * l.uxy + 3.0 * nh * w * l.uy;
    let f_uyy = 1.0 - l.ux * l.ux;
    let f_uxy = 2.0 * l.ux * l.uy;
    for a in 0..3 {
        for b in 0..3 {
            let mut v = f_uxy * l.d1x[a] * l.d1y[b];
            if b == 1 {
                v += f_ux * l.d1x[a] + f_uxx * l.d2x[a];
            }
            if a == 1 {
                v += f_uy * l.d1y[b] + f_uyy * l.d2y[b];
            }
            row.push((a as isize - 1, b as isize - 1, v));
        }
    }
    row
}

/// L_H divided by (1 − |Du|²)^{3/2}, i.e. n(H_num − H): the form Newton works
/// with. It blows up toward null gradients instead of degenerating there.
pub(crate) fn scaled_residual(l: &Local, n: usize, h: f64) -> Option<f64> {
    let w2 = 1.0 - l.grad_sq();
    residual(l, n, h).map(|r| r / (w2 * w2.sqrt()))
}

/// Row of the Jacobian of [`scaled_residual`].
pub(crate) fn scaled_jacobian_row(l: &Local, dim: usize, h: f64) -> Option<Vec<(isize, isize, f64)>> {
    let w2 = 1.0 - l.grad_sq();
    let r = residual(l, dim, h)?;
    let w3 = w2 * w2.sqrt();
    let c = 3.0 * r / (w3 * w2);
    let mut row = jacobian_row(l, dim, h);
    for (di, dj, v) in row.iter_mut() {
        let (a, b) = ((*di + 1) as usize, (*dj + 1) as usize);
        let mut dgrad = 0.0;
        if dim == 1 || b == 1 {
            dgrad += l.ux * l.d1x[a];
        }
        if dim == 2 && a == 1 {
            dgrad += l.uy * l.d1y[b];
        }
        *v = *v / w3 + c * dgrad;
    }
    Some(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridDomain;

    fn sample(mesh: &Mesh, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..mesh.node_count()).map(|k| f(&mesh.coords(k))).collect()
    }

    /// Jacobian entries against centered finite differences of the residual.
    #[test]
    fn jacobian_matches_finite_differences() {
        let core = GridDomain::new(2, 1.0, 0.25).unwrap();
        let mesh = Mesh::graded(2, &core, 3.0, 1.0);
        let u = sample(&mesh, |x| (1.3 + 0.4 * x[0] * x[0] + 0.2 * x[0] * x[1] + 0.3 * x[1] * x[1]).sqrt() * 0.8);
        let h = 0.7;
        for k in [mesh.index(3, 4), mesh.index(mesh.m() - 3, 2), mesh.index(1, mesh.m() - 2)] {
            let (i, j) = mesh.multi_index(k);
            let row = jacobian_row(&local(&mesh, &u, k), 2, h);
            for (di, dj, v) in row {
                let kk = mesh.index((i as isize + di) as usize, (j as isize + dj) as usize);
                let eps = 1e-6;
                let mut up = u.clone();
                up[kk] += eps;
                let mut dn = u.clone();
                dn[kk] -= eps;
                let fd = (residual(&local(&mesh, &up, k), 2, h).unwrap()
                    - residual(&local(&mesh, &dn, k), 2, h).unwrap())
                    / (2.0 * eps);
                assert!((fd - v).abs() <= 1e-5 * (1.0 + v.abs()), "({di},{dj}) fd={fd} an={v}");
            }
        }
    }

    #[test]
    fn scaled_jacobian_matches_finite_differences() {
        let core = GridDomain::new(2, 1.0, 0.25).unwrap();
        let mesh = Mesh::graded(2, &core, 3.0, 1.0);
        let u = sample(&mesh, |x| (0.2 + 0.3 * x[0] * x[0] + 0.25 * x[0] * x[1] + 0.4 * x[1] * x[1]).sqrt());
        for dim in [1, 2] {
            let (mesh, u) = if dim == 1 {
                let m = GridDomain::new(1, 1.0, 0.1).unwrap().to_mesh();
                let u = sample(&m, |x| (0.1 + 0.8 * x[0] * x[0]).sqrt());
                (m, u)
            } else {
                (mesh.clone(), u.clone())
            };
            let k = if dim == 1 { 3 } else { mesh.index(2, 5) };
            let (i, j) = mesh.multi_index(k);
            for (di, dj, v) in scaled_jacobian_row(&local(&mesh, &u, k), dim, 0.6).unwrap() {
                let kk = mesh.index((i as isize + di) as usize, (j as isize + dj) as usize);
                let eps = 1e-7;
                let mut up = u.clone();
                up[kk] += eps;
                let mut dn = u.clone();
                dn[kk] -= eps;
                let fd = (scaled_residual(&local(&mesh, &up, k), dim, 0.6).unwrap()
                    - scaled_residual(&local(&mesh, &dn, k), dim, 0.6).unwrap())
                    / (2.0 * eps);
                assert!((fd - v).abs() <= 1e-5 * (1.0 + v.abs()), "n={dim} ({di},{dj}) fd={fd} an={v}");
            }
        }
    }

    #[test]
    fn one_dimensional_jacobian() {
        let g = GridDomain::new(1, 1.0, 0.1).unwrap();
        let mesh = g.to_mesh();
        let u = sample(&mesh, |x| 0.3 * x[0] * x[0] + 0.1 * x[0]);
        let k = 4;
        for (di, _, v) in jacobian_row(&local(&mesh, &u, k), 1, 1.0) {
            let kk = (k as isize + di) as usize;
            let eps = 1e-6;
            let mut up = u.clone();
            up[kk] += eps;
            let mut dn = u.clone();
            dn[kk] -= eps;
            let fd = (residual(&local(&mesh, &up, k), 1, 1.0).unwrap()
                - residual(&local(&mesh, &dn, k), 1, 1.0).unwrap())
                / (2.0 * eps);
            assert!((fd - v).abs() < 1e-5);
        }
    }
}
