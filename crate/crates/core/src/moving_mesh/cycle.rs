//! The outer mesh-movement iteration.

use log::{debug, warn};

use crate::error::{Error, Result};
use crate::fem::FieldState;
use crate::mesh::{BoundaryTag, Frame, Point, PointLocator, Side, TriMesh};

use super::harmonic::{redistribute_boundary, solve_harmonic_map};
use super::monitor::{compute_monitor, MonitorSpec};
use super::smoothing::{MonitorSmoother, SmoothingParams};
use super::transfer::{FieldTransfer, Interpolate};

/// How an interior node turns `δξ` into a physical displacement.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Displacement {
    /// Evaluate the piecewise-affine map `ξⁿ ↦ x` at the node's reference
    /// coordinate, i.e. apply the Jacobian of the element that contains the
    /// target. Falls back to `StarAverage` if the `ξⁿ` mesh folds.
    #[default]
    Inverse,
    /// Apply the area-weighted mean Jacobian of the node's star.
    StarAverage,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovingMeshParams {
    pub max_outer_iter: usize,
    /// `None` selects `0.1 · min(Δξ, Δη)`.
    pub delta_xi_tol: Option<f64>,
    pub tau_initial: f64,
    pub area_guard: f64,
    /// Motion is abandoned once `τ` falls below this.
    pub tau_min: f64,
    pub displacement: Displacement,
}

impl Default for MovingMeshParams {
    fn default() -> Self {
        MovingMeshParams {
            max_outer_iter: 5,
            delta_xi_tol: None,
            tau_initial: 1.0,
            area_guard: 0.1,
            tau_min: 1.0 / 64.0,
            displacement: Displacement::default(),
        }
    }
}

impl MovingMeshParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_initial > 0.0 && self.tau_initial <= 1.0) {
            return Err(Error::InvalidArgument("tau_initial must lie in (0, 1]".into()));
        }
        if !(self.area_guard > 0.0 && self.area_guard < 1.0) {
            return Err(Error::InvalidArgument("area_guard must lie in (0, 1)".into()));
        }
        if let Some(t) = self.delta_xi_tol {
            if !(t > 0.0) {
                return Err(Error::InvalidArgument("delta_xi_tol must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn tolerance_for(&self, mesh: &TriMesh) -> f64 {
        self.delta_xi_tol
            .unwrap_or_else(|| 0.1 * (1.0 / mesh.nx() as f64).min(1.0 / mesh.nz() as f64))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CycleReport {
    /// Number of accepted node moves.
    pub iterations: usize,
    /// `‖δξ‖∞` at the last check.
    pub delta_xi: f64,
    pub converged: bool,
    /// Motion abandoned because `τ` underflowed.
    pub frozen: bool,
    /// Smallest `τ` accepted.
    pub tau: f64,
    pub min_area: f64,
}

/// Owns the cached smoother and runs mesh-movement cycles.
#[derive(Debug, Clone)]
pub struct MeshMover {
    pub spec: MonitorSpec,
    pub params: MovingMeshParams,
    smoother: MonitorSmoother,
}

impl MeshMover {
    pub fn new(mesh: &TriMesh, spec: MonitorSpec, smoothing: SmoothingParams, params: MovingMeshParams) -> Result<Self> {
        spec.validate()?;
        params.validate()?;
        Ok(MeshMover {
            spec,
            params,
            smoother: MonitorSmoother::new(mesh, smoothing)?,
        })
    }

    /// Smoothed monitor of `u` on the current mesh.
    pub fn monitor(&self, mesh: &TriMesh, u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.smoother.smooth(&compute_monitor(mesh, u, &self.spec)?))
    }

    /// Target computational coordinates of the current nodes.
    pub fn harmonic_map(&self, mesh: &TriMesh, u: &[f64]) -> Result<Vec<Point>> {
        let m = self.monitor(mesh, u)?;
        let b = redistribute_boundary(mesh, &m)?;
        solve_harmonic_map(mesh, &m, &b)
    }

    pub fn run(&self, mesh: &mut TriMesh, state: &mut FieldState) -> Result<CycleReport> {
        self.run_with(mesh, state, &Interpolate)
    }

    pub fn run_with(&self, mesh: &mut TriMesh, state: &mut FieldState, transfer: &dyn FieldTransfer) -> Result<CycleReport> {
        let tol = self.params.tolerance_for(mesh);
        let mut report = CycleReport {
            tau: self.params.tau_initial,
            min_area: mesh.min_area(Frame::Physical),
            ..Default::default()
        };
        for outer in 0..=self.params.max_outer_iter {
            let xi_n = self.harmonic_map(mesh, &state.u)?;
            let dxi: Vec<Point> = mesh
                .computational()
                .iter()
                .zip(&xi_n)
                .map(|(a, b)| [a[0] - b[0], a[1] - b[1]])
                .collect();
            report.delta_xi = dxi.iter().fold(0.0, |m, d| m.max(d[0].abs()).max(d[1].abs()));
            if report.delta_xi < tol {
                report.converged = true;
                break;
            }
            if outer == self.params.max_outer_iter {
                break;
            }
            let dx = physical_displacement(mesh, &xi_n, &dxi, self.params.displacement);
            let Some((positions, tau)) = self.guarded_positions(mesh, &dx) else {
                warn!(
                    "mesh motion frozen at t={:.6}: step length fell below {} (‖δξ‖∞ = {:e})",
                    state.t, self.params.tau_min, report.delta_xi
                );
                report.frozen = true;
                break;
            };
            let mut next = transfer.transfer(mesh, &positions, state);
            for (i, &d) in mesh.dirichlet_mask().iter().enumerate() {
                if d {
                    next.u[i] = state.u[i];
                }
            }
            mesh.set_physical(positions)?;
            *state = next;
            report.iterations += 1;
            report.tau = report.tau.min(tau);
            report.min_area = mesh.min_area(Frame::Physical);
            if report.min_area <= 0.0 {
                return Err(Error::DegenerateElement {
                    triangle: 0,
                    area: report.min_area,
                });
            }
        }
        debug!(
            "mesh cycle: iterations={} |dxi|={:e} tau={} min_area={:e}",
            report.iterations, report.delta_xi, report.tau, report.min_area
        );
        Ok(report)
    }

    /// Halves `τ` until every triangle keeps at least `area_guard` of its
    /// area; `None` if that needs `τ < tau_min`.
    fn guarded_positions(&self, mesh: &TriMesh, dx: &[Point]) -> Option<(Vec<Point>, f64)> {
        let x = mesh.physical();
        let old: Vec<f64> = (0..mesh.num_triangles()).map(|t| mesh.signed_area(t, Frame::Physical)).collect();
        let mut tau = self.params.tau_initial;
        while tau >= self.params.tau_min {
            let cand: Vec<Point> = x.iter().zip(dx).map(|(p, d)| [p[0] + tau * d[0], p[1] + tau * d[1]]).collect();
            let ok = mesh.triangles().iter().zip(&old).all(|(tri, a0)| {
                let v = [cand[tri[0]], cand[tri[1]], cand[tri[2]]];
                crate::mesh::signed_area(&v) >= self.params.area_guard * a0
            });
            if ok {
                return Some((cand, tau));
            }
            tau *= 0.5;
        }
        None
    }
}

/// `δx = (∂x/∂ξ) δξ` for interior nodes, see [`Displacement`]. Boundary
/// nodes instead move along their side to where the piecewise-linear trace
/// of `ξⁿ` takes the node's reference coordinate; corners stay fixed.
fn physical_displacement(mesh: &TriMesh, xi_n: &[Point], dxi: &[Point], mode: Displacement) -> Vec<Point> {
    let n = mesh.num_nodes();
    let x = mesh.physical();
    let mut jac_sum = vec![[0.0; 4]; n];
    let mut wsum = vec![0.0; n];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let [a, b, c] = *tri;
        let xm = [x[b][0] - x[a][0], x[c][0] - x[a][0], x[b][1] - x[a][1], x[c][1] - x[a][1]];
        let e = [
            xi_n[b][0] - xi_n[a][0],
            xi_n[c][0] - xi_n[a][0],
            xi_n[b][1] - xi_n[a][1],
            xi_n[c][1] - xi_n[a][1],
        ];
        let det = e[0] * e[3] - e[1] * e[2];
        if det.abs() < 1e-300 || !det.is_finite() {
            continue;
        }
        let inv = [e[3] / det, -e[1] / det, -e[2] / det, e[0] / det];
        let j = [
            xm[0] * inv[0] + xm[1] * inv[2],
            xm[0] * inv[1] + xm[1] * inv[3],
            xm[2] * inv[0] + xm[3] * inv[2],
            xm[2] * inv[1] + xm[3] * inv[3],
        ];
        let area = mesh.signed_area(t, Frame::Physical);
        for &v in tri {
            for k in 0..4 {
                jac_sum[v][k] += area * j[k];
            }
            wsum[v] += area;
        }
    }
    let mut dx: Vec<Point> = (0..n)
        .map(|i| {
            if wsum[i] == 0.0 || mesh.tags()[i] != BoundaryTag::Interior {
                return [0.0, 0.0];
            }
            let j = jac_sum[i].map(|v| v / wsum[i]);
            [j[0] * dxi[i][0] + j[1] * dxi[i][1], j[2] * dxi[i][0] + j[3] * dxi[i][1]]
        })
        .collect();
    if mode == Displacement::Inverse {
        inverse_displacement(mesh, xi_n, &mut dx);
    }
    for side in [Side::Bottom, Side::Top, Side::Left, Side::Right] {
        let c = match side {
            Side::Bottom | Side::Top => 0,
            Side::Left | Side::Right => 1,
        };
        let nodes = mesh.side_nodes(side);
        let trace: Vec<f64> = nodes.iter().map(|&i| xi_n[i][c]).collect();
        for &i in &nodes[1..nodes.len() - 1] {
            let target = mesh.computational()[i][c];
            let k = trace.partition_point(|&v| v <= target).clamp(1, nodes.len() - 1);
            let (a, b) = (nodes[k - 1], nodes[k]);
            let span = trace[k] - trace[k - 1];
            let s = if span > 0.0 { ((target - trace[k - 1]) / span).clamp(0.0, 1.0) } else { 0.5 };
            dx[i][c] = x[a][c] + s * (x[b][c] - x[a][c]) - x[i][c];
        }
    }
    dx
}

/// Overwrites interior rows of `dx` with `x(ξ⁰) − x`, where `x(·)` is the
/// piecewise-linear map on the triangulation of `ξⁿ`. Leaves `dx` untouched
/// when that triangulation is folded.
fn inverse_displacement(mesh: &TriMesh, xi_n: &[Point], dx: &mut [Point]) {
    let mut image = mesh.clone();
    if image.set_physical(xi_n.to_vec()).is_err() || image.min_area(Frame::Physical) <= 0.0 {
        debug!("harmonic map folded; using star-averaged Jacobians");
        return;
    }
    let x = mesh.physical();
    let locator = PointLocator::new(&image, Frame::Physical);
    for (i, d) in dx.iter_mut().enumerate() {
        if mesh.tags()[i] != BoundaryTag::Interior {
            continue;
        }
        let loc = locator.locate(mesh.computational()[i]);
        let tri = mesh.triangles()[loc.triangle];
        let mut p = [0.0; 2];
        for (k, &v) in tri.iter().enumerate() {
            p[0] += loc.bary[k] * x[v][0];
            p[1] += loc.bary[k] * x[v][1];
        }
        *d = [p[0] - x[i][0], p[1] - x[i][1]];
    }
}

/// Runs one cycle with a freshly built smoother.
pub fn mesh_move_cycle(
    mesh: &mut TriMesh,
    state: &mut FieldState,
    spec: &MonitorSpec,
    smoothing: &SmoothingParams,
    params: &MovingMeshParams,
) -> Result<CycleReport> {
    MeshMover::new(mesh, *spec, *smoothing, *params)?.run(mesh, state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_rect_mesh, Rect, SideSet};
    use crate::moving_mesh::monitor::MonitorKind;
    use crate::moving_mesh::transfer::Resample;

    fn front(p: Point) -> f64 {
        0.5 - 0.4 * (20.0 * (p[1] - 0.5)).tanh()
    }

    #[test]
    fn flat_field_needs_no_motion() {
        let mut m = generate_rect_mesh(8, 8, Rect::new(0.0, 1.0, 0.0, 1.0), SideSet::NONE).unwrap();
        let mut st = FieldState::new(vec![0.2; m.num_nodes()], vec![0.0; m.num_nodes()], 0.0).unwrap();
        let spec = MonitorSpec::new(MonitorKind::ArcLength, 0.5).unwrap();
        let rep = mesh_move_cycle(&mut m, &mut st, &spec, &SmoothingParams::default(), &MovingMeshParams::default()).unwrap();
        assert_eq!(rep.iterations, 0);
        assert!(rep.converged);
        assert_eq!(m.version(), 0);
    }

    #[test]
    fn front_attracts_nodes_and_keeps_boundary_and_dirichlet_values() {
        let mut m = generate_rect_mesh(6, 30, Rect::new(0.0, 0.5, 0.0, 1.0), SideSet::BOTTOM_TOP).unwrap();
        let u: Vec<f64> = m.physical().iter().map(|p| front(*p)).collect();
        let mut st = FieldState::new(u, vec![0.0; m.num_nodes()], 0.0).unwrap();
        let before = st.clone();
        let spec = MonitorSpec::new(MonitorKind::ArcLength, 0.5).unwrap();
        let mover = MeshMover::new(&m, spec, SmoothingParams::default(), MovingMeshParams::default()).unwrap();
        let rep = mover.run_with(&mut m, &mut st, &Resample(front)).unwrap();
        assert!(rep.iterations >= 1);
        assert!(m.min_area(Frame::Physical) > 0.0);
        m.check_conformity().unwrap();
        // the row spacing at the front shrinks below uniform
        let col = |j: usize| m.physical()[m.node_index(3, j)][1];
        let mid = (0..30).min_by(|&a, &b| (col(a) - 0.5).abs().total_cmp(&(col(b) - 0.5).abs())).unwrap();
        assert!(col(mid + 1) - col(mid) < 1.0 / 30.0);
        for (i, tag) in m.tags().iter().enumerate() {
            let p = m.physical()[i];
            match tag {
                BoundaryTag::Side(Side::Left) => assert_eq!(p[0], 0.0),
                BoundaryTag::Side(Side::Right) => assert_eq!(p[0], 0.5),
                BoundaryTag::Side(Side::Bottom) => assert_eq!(p[1], 0.0),
                BoundaryTag::Side(Side::Top) => assert_eq!(p[1], 1.0),
                _ => {}
            }
            if m.dirichlet_mask()[i] {
                assert_eq!(st.u[i], before.u[i]);
            }
        }
    }

    #[test]
    fn converged_cycle_is_idempotent() {
        let mut m = generate_rect_mesh(6, 24, Rect::new(0.0, 0.5, 0.0, 1.0), SideSet::NONE).unwrap();
        let u: Vec<f64> = m.physical().iter().map(|p| front(*p)).collect();
        let mut st = FieldState::new(u, vec![0.0; m.num_nodes()], 0.0).unwrap();
        let spec = MonitorSpec::new(MonitorKind::ArcLength, 0.5).unwrap();
        let params = MovingMeshParams {
            max_outer_iter: 50,
            ..Default::default()
        };
        let mover = MeshMover::new(&m, spec, SmoothingParams::default(), params).unwrap();
        let rep = mover.run_with(&mut m, &mut st, &Resample(front)).unwrap();
        assert!(rep.converged);
        let snapshot = m.physical().to_vec();
        let rep2 = mover.run_with(&mut m, &mut st, &Resample(front)).unwrap();
        assert_eq!(rep2.iterations, 0);
        assert_eq!(snapshot, m.physical());
    }
}
