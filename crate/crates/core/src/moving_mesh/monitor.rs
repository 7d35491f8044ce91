//! Monitor functions built from recovered derivatives.

use crate::error::{Error, Result};
use crate::mesh::{Frame, TriMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonitorKind {
    /// `ω = |∇u|`
    ArcLength,
    /// `ω = |Δu|^{1/2}`
    Curvature,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorSpec {
    pub kind: MonitorKind,
    pub kappa: f64,
    pub floor_eps: f64,
}

impl MonitorSpec {
    pub fn new(kind: MonitorKind, kappa: f64) -> Result<Self> {
        let s = MonitorSpec {
            kind,
            kappa,
            floor_eps: 1e-6,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(Error::InvalidArgument(format!("kappa must lie in [0, 1], got {}", self.kappa)));
        }
        if !(self.floor_eps > 0.0) {
            return Err(Error::InvalidArgument("monitor floor must be positive".into()));
        }
        Ok(())
    }
}

/// Nodal gradient from area-weighted averaging of the element gradients.
pub fn recover_gradient(mesh: &TriMesh, u: &[f64]) -> Result<Vec<[f64; 2]>> {
    let n = mesh.num_nodes();
    let mut g = vec![[0.0; 2]; n];
    let mut w = vec![0.0; n];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let geo = mesh.element_geometry(t, Frame::Physical)?;
        let mut grad = [0.0; 2];
        for k in 0..3 {
            grad[0] += u[tri[k]] * geo.grads[k][0];
            grad[1] += u[tri[k]] * geo.grads[k][1];
        }
        for &v in tri {
            g[v][0] += geo.area * grad[0];
            g[v][1] += geo.area * grad[1];
            w[v] += geo.area;
        }
    }
    for (gi, wi) in g.iter_mut().zip(&w) {
        gi[0] /= wi;
        gi[1] /= wi;
    }
    Ok(g)
}

/// Nodal Laplacian as the trace of the recovered gradient of the recovered gradient.
pub fn recover_laplacian(mesh: &TriMesh, u: &[f64]) -> Result<Vec<f64>> {
    let g = recover_gradient(mesh, u)?;
    let gx: Vec<f64> = g.iter().map(|v| v[0]).collect();
    let gz: Vec<f64> = g.iter().map(|v| v[1]).collect();
    let hx = recover_gradient(mesh, &gx)?;
    let hz = recover_gradient(mesh, &gz)?;
    Ok(hx.iter().zip(&hz).map(|(a, b)| a[0] + b[1]).collect())
}

/// `M = (1 − κ) γ(u) + κ ω`, with `γ(u)` the domain mean of `ω`.
pub fn compute_monitor(mesh: &TriMesh, u: &[f64], spec: &MonitorSpec) -> Result<Vec<f64>> {
    if u.len() != mesh.num_nodes() {
        return Err(Error::InvalidArgument("field length does not match the mesh".into()));
    }
    let omega: Vec<f64> = match spec.kind {
        MonitorKind::ArcLength => recover_gradient(mesh, u)?.iter().map(|g| g[0].hypot(g[1])).collect(),
        MonitorKind::Curvature => recover_laplacian(mesh, u)?.iter().map(|l| l.abs().sqrt()).collect(),
    };
    let mut integral = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.signed_area(t, Frame::Physical);
        integral += area * (omega[tri[0]] + omega[tri[1]] + omega[tri[2]]) / 3.0;
    }
    let gamma = integral / mesh.total_area(Frame::Physical);
    if !(gamma >= spec.floor_eps) {
        return Ok(vec![1.0; u.len()]);
    }
    let floor = spec.floor_eps * gamma;
    Ok(omega
        .iter()
        .map(|w| ((1.0 - spec.kappa) * gamma + spec.kappa * w).max(floor))
        .collect())
}
