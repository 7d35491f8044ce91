//! Linear finite element operators of the mixed discretization on the
//! current physical mesh: mass `M₁`, stiffness `K₂`, mobility-weighted
//! stiffness `K₁(u)`, the convection load `F̄(u)`, quadrature, Dirichlet
//! rows and the L² error.
//!
//! Coefficient-weighted integrals use the three-point edge-midpoint rule,
//! which is exact for quadratics. Cubic mobilities are therefore integrated
//! approximately.

use crate::error::{Error, Result};
use crate::mesh::{triangle_geometry, Frame, Point, TriMesh};
use crate::sparse::{SparseOperator, TripletBuilder};

/// Polynomial `Σ cₖ uᵏ`, used for fluxes and mobilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut coeffs = coeffs;
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial::new(vec![0.0])
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    /// `u`
    pub fn identity() -> Self {
        Polynomial::new(vec![0.0, 1.0])
    }

    /// `u³`
    pub fn cubic() -> Self {
        Polynomial::new(vec![0.0, 0.0, 0.0, 1.0])
    }

    /// `u² − u³`
    pub fn square_minus_cube() -> Self {
        Polynomial::new(vec![0.0, 0.0, 1.0, -1.0])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() == 1 {
            return Polynomial::zero();
        }
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() == 1
    }
}

/// `u_t + ∂F̂(u)/∂z − ∇·[K(u)∇w] = 0`, `w = βu − γΔu`, `F̂(u) = F(u) − s u`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsModel {
    pub flux: Polynomial,
    pub mobility: Polynomial,
    pub beta: f64,
    pub gamma: f64,
    pub frame_speed: f64,
}

impl PhysicsModel {
    pub fn new(flux: Polynomial, mobility: Polynomial, beta: f64, gamma: f64, frame_speed: f64) -> Result<Self> {
        if !(beta >= 0.0) {
            return Err(Error::InvalidArgument(format!("beta must be nonnegative, got {beta}")));
        }
        if !(gamma > 0.0) {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
        }
        if !frame_speed.is_finite() {
            return Err(Error::InvalidArgument("frame speed must be finite".into()));
        }
        Ok(PhysicsModel {
            flux,
            mobility,
            beta,
            gamma,
            frame_speed,
        })
    }

    /// Flux in the moving frame, `F(u) − s u`.
    pub fn flux_in_frame(&self, u: f64) -> f64 {
        self.flux.eval(u) - self.frame_speed * u
    }

    pub fn mobility_at(&self, u: f64) -> f64 {
        self.mobility.eval(u)
    }
}

/// Nodal coefficients of `u_h` and `w_h` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub t: f64,
}

impl FieldState {
    pub fn new(u: Vec<f64>, w: Vec<f64>, t: f64) -> Result<Self> {
        if u.len() != w.len() {
            return Err(Error::InvalidArgument(format!(
                "u has {} entries but w has {}",
                u.len(),
                w.len()
            )));
        }
        let s = FieldState { u, w, t };
        s.check_finite()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.u.iter().chain(&self.w).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NumericalBreakdown("non-finite field value".into()))
        }
    }
}

/// Barycentric coordinates of the three edge midpoints.
const MIDPOINTS: [[f64; 3]; 3] = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureRule {
    /// One point, exact for linear integrands.
    Centroid,
    /// Edge midpoints, exact for quadratics.
    EdgeMidpoint,
}

/// `∫_T f` for a triangle with vertices `v`.
pub fn integrate_element(v: &[Point; 3], f: impl Fn(Point) -> f64, rule: QuadratureRule) -> f64 {
    let area = crate::mesh::signed_area(v).abs();
    let at = |l: [f64; 3]| -> Point {
        [
            l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
            l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
        ]
    };
    match rule {
        QuadratureRule::Centroid => area * f(at([1.0 / 3.0; 3])),
        QuadratureRule::EdgeMidpoint => area / 3.0 * MIDPOINTS.iter().map(|l| f(at(*l))).sum::<f64>(),
    }
}

/// Mean of `g(u_h)` over the edge midpoints of one element.
fn midpoint_mean(vals: [f64; 3], g: impl Fn(f64) -> f64) -> f64 {
    MIDPOINTS
        .iter()
        .map(|l| g(l[0] * vals[0] + l[1] * vals[1] + l[2] * vals[2]))
        .sum::<f64>()
        / 3.0
}

fn element_values(tri: &[usize; 3], u: &[f64]) -> [f64; 3] {
    [u[tri[0]], u[tri[1]], u[tri[2]]]
}

/// Consistent mass matrix `M₁ᵢⱼ = ∫ φᵢ φⱼ` in the given frame.
pub fn assemble_mass_in(mesh: &TriMesh, frame: Frame) -> Result<SparseOperator> {
    let mut b = TripletBuilder::with_capacity(mesh.num_nodes(), 9 * mesh.num_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = mesh.element_geometry(t, frame)?;
        for i in 0..3 {
            for j in 0..3 {
                let f = if i == j { 2.0 } else { 1.0 };
                b.add(tri[i], tri[j], g.area * f / 12.0);
            }
        }
    }
    Ok(b.finalize(true))
}

pub fn assemble_mass(mesh: &TriMesh) -> Result<SparseOperator> {
    assemble_mass_in(mesh, Frame::Physical)
}

/// Lumped (row-sum) mass in the given frame.
pub fn lumped_mass_in(mesh: &TriMesh, frame: Frame) -> Result<Vec<f64>> {
    let mut d = vec![0.0; mesh.num_nodes()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = mesh.element_geometry(t, frame)?;
        for &n in tri {
            d[n] += g.area / 3.0;
        }
    }
    Ok(d)
}

/// `∫ ∇φᵢ · A ∇φⱼ` with a constant diagonal tensor `A = diag(a_x, a_z)` and a
/// per-element scalar weight.
pub fn assemble_anisotropic_stiffness(
    mesh: &TriMesh,
    frame: Frame,
    tensor: [f64; 2],
    element_weight: Option<&[f64]>,
) -> Result<SparseOperator> {
    let mut b = TripletBuilder::with_capacity(mesh.num_nodes(), 9 * mesh.num_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = mesh.element_geometry(t, frame)?;
        let c = match element_weight {
            Some(w) => {
                let c = w[t];
                if !(c > 0.0) || !c.is_finite() {
                    return Err(Error::NonpositiveCoefficient { triangle: t, value: c });
                }
                c
            }
            None => 1.0,
        };
        for i in 0..3 {
            for j in 0..3 {
                let gi = g.grads[i];
                let gj = g.grads[j];
                let v = tensor[0] * gi[0] * gj[0] + tensor[1] * gi[1] * gj[1];
                b.add(tri[i], tri[j], c * g.area * v);
            }
        }
    }
    Ok(b.finalize(true))
}

/// `K₂ᵢⱼ = ∫ ∇φᵢ · ∇φⱼ` on the physical mesh.
pub fn assemble_stiffness(mesh: &TriMesh) -> Result<SparseOperator> {
    assemble_anisotropic_stiffness(mesh, Frame::Physical, [1.0, 1.0], None)
}

/// Stiffness with one positive coefficient per element.
pub fn assemble_element_weighted_stiffness(mesh: &TriMesh, element_coeff: &[f64]) -> Result<SparseOperator> {
    assemble_anisotropic_stiffness(mesh, Frame::Physical, [1.0, 1.0], Some(element_coeff))
}

/// Per-element coefficient `∫_T g(c_h) / |T|` by the edge-midpoint rule.
pub fn element_coefficients(mesh: &TriMesh, coeff: &[f64], transform: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    mesh.triangles()
        .iter()
        .enumerate()
        .map(|(t, tri)| {
            let c = midpoint_mean(element_values(tri, coeff), &transform);
            if c > 0.0 && c.is_finite() {
                Ok(c)
            } else {
                Err(Error::NonpositiveCoefficient { triangle: t, value: c })
            }
        })
        .collect()
}

/// `∫ g(c_h) ∇φᵢ · ∇φⱼ`; with `g = K` and `c = u` this is `K₁(u)`.
pub fn assemble_weighted_stiffness(
    mesh: &TriMesh,
    coeff: &[f64],
    transform: impl Fn(f64) -> f64,
) -> Result<SparseOperator> {
    if coeff.len() != mesh.num_nodes() {
        return Err(Error::InvalidArgument("coefficient length does not match the mesh".into()));
    }
    if coeff.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidArgument("non-finite coefficient".into()));
    }
    let c = element_coefficients(mesh, coeff, transform)?;
    assemble_element_weighted_stiffness(mesh, &c)
}

/// `F̄(u)ᵢ = ∫ F̂(u_h) ∂φᵢ/∂z`.
pub fn assemble_convection(mesh: &TriMesh, u: &[f64], model: &PhysicsModel) -> Result<Vec<f64>> {
    if u.len() != mesh.num_nodes() {
        return Err(Error::InvalidArgument("field length does not match the mesh".into()));
    }
    let mut out = vec![0.0; mesh.num_nodes()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = mesh.element_geometry(t, Frame::Physical)?;
        let flux = g.area * midpoint_mean(element_values(tri, u), |v| model.flux_in_frame(v));
        for k in 0..3 {
            out[tri[k]] += flux * g.grads[k][1];
        }
    }
    Ok(out)
}

/// Replaces each Dirichlet row by an identity row and sets the matching
/// right-hand side entry to the boundary value. Neumann conditions are
/// natural and need no action.
pub fn impose_dirichlet(
    op: &SparseOperator,
    rhs: &mut [f64],
    mesh: &TriMesh,
    values: impl Fn(Point) -> f64,
) -> SparseOperator {
    let mask = mesh.dirichlet_mask();
    for (n, &d) in mask.iter().enumerate() {
        if d {
            rhs[n] = values(mesh.physical()[n]);
        }
    }
    if mesh.has_dirichlet() {
        op.with_identity_rows(mask)
    } else {
        op.clone()
    }
}

/// `‖u_h − u_exact‖_{L²}` by the edge-midpoint rule on every element.
pub fn l2_error(mesh: &TriMesh, u: &[f64], exact: impl Fn(Point) -> f64) -> f64 {
    let nodes = mesh.physical();
    let mut sum = 0.0;
    for tri in mesh.triangles() {
        let v = [nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]];
        let uh = element_values(tri, u);
        let area = crate::mesh::signed_area(&v).abs();
        for l in &MIDPOINTS {
            let p = [
                l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
                l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
            ];
            let e = l[0] * uh[0] + l[1] * uh[1] + l[2] * uh[2] - exact(p);
            sum += area / 3.0 * e * e;
        }
    }
    sum.sqrt()
}

/// Discrete mass `1ᵀ M₁ u = ∫ u_h`.
pub fn integral(mesh: &TriMesh, u: &[f64]) -> f64 {
    let nodes = mesh.physical();
    mesh.triangles()
        .iter()
        .map(|tri| {
            let v = [nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]];
            triangle_geometry(&v).map_or(0.0, |g| g.area) * (u[tri[0]] + u[tri[1]] + u[tri[2]]) / 3.0
        })
        .sum()
}
