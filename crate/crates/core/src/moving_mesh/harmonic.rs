//! Boundary equidistribution and the Winslow-type harmonic map.

use crate::error::{Error, Result};
use crate::fem::assemble_element_weighted_stiffness;
use crate::mesh::{BoundaryTag, Point, Side, TriMesh};
use crate::sparse::DirichletSolver;

/// Computational coordinates prescribed on the boundary nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCoordinates {
    /// True on every node with a boundary or corner tag.
    pub mask: Vec<bool>,
    /// Prescribed `ξ` on masked nodes; zero elsewhere.
    pub xi: Vec<Point>,
}

/// Equidistributes each side with respect to the monitor trace: the
/// computational coordinate along a side is the normalized cumulative
/// integral of `M̃`, so nodes cluster where the monitor is large. Corners
/// stay pinned to the unit-square corners.
pub fn redistribute_boundary(mesh: &TriMesh, m: &[f64]) -> Result<BoundaryCoordinates> {
    if m.len() != mesh.num_nodes() {
        return Err(Error::InvalidArgument("monitor length does not match the mesh".into()));
    }
    let n = mesh.num_nodes();
    let mask: Vec<bool> = mesh.tags().iter().map(|t| *t != BoundaryTag::Interior).collect();
    let mut xi = vec![[0.0; 2]; n];
    let x = mesh.physical();
    for side in [Side::Bottom, Side::Top, Side::Left, Side::Right] {
        let nodes = mesh.side_nodes(side);
        let along = |k: usize| match side {
            Side::Bottom | Side::Top => x[nodes[k]][0],
            Side::Left | Side::Right => x[nodes[k]][1],
        };
        let mut cum = vec![0.0; nodes.len()];
        for k in 1..nodes.len() {
            let ds = along(k) - along(k - 1);
            cum[k] = cum[k - 1] + 0.5 * ds * (m[nodes[k]] + m[nodes[k - 1]]);
        }
        let total = *cum.last().unwrap();
        if !(total > 0.0) {
            return Err(Error::NumericalBreakdown(format!("monitor trace on {side:?} side has no mass")));
        }
        let last = nodes.len() - 1;
        for (k, &node) in nodes.iter().enumerate() {
            let c = if k == last { 1.0 } else { cum[k] / total };
            xi[node] = match side {
                Side::Bottom => [c, 0.0],
                Side::Top => [c, 1.0],
                Side::Left => [0.0, c],
                Side::Right => [1.0, c],
            };
        }
    }
    Ok(BoundaryCoordinates { mask, xi })
}

/// Solves `∇·(M̃⁻¹ ∇ξ) = 0` on the physical mesh for both components with
/// the boundary data `ξ_b`. The element coefficient is the inverse of the
/// vertex mean of `M̃`.
pub fn solve_harmonic_map(mesh: &TriMesh, m: &[f64], xi_b: &BoundaryCoordinates) -> Result<Vec<Point>> {
    let coeff: Vec<f64> = mesh
        .triangles()
        .iter()
        .map(|t| 3.0 / (m[t[0]] + m[t[1]] + m[t[2]]))
        .collect();
    if let Some(t) = coeff.iter().position(|c| !(*c > 0.0 && c.is_finite())) {
        return Err(Error::NonpositiveCoefficient {
            triangle: t,
            value: coeff[t],
        });
    }
    let a = assemble_element_weighted_stiffness(mesh, &coeff)?;
    let solver = DirichletSolver::new(&a, &xi_b.mask)?;
    let n = mesh.num_nodes();
    let mut out = vec![[0.0; 2]; n];
    for c in 0..2 {
        let b: Vec<f64> = (0..n).map(|i| if xi_b.mask[i] { xi_b.xi[i][c] } else { 0.0 }).collect();
        let sol = solver.solve(&b);
        for i in 0..n {
            out[i][c] = sol[i];
        }
    }
    Ok(out)
}
