//! Diffusive smoothing of the monitor on the fixed computational mesh.
//!
//! Solves `(L + D) M̃ = L M` where `L` is the lumped ξ-mass and `D` the
//! stiffness with tensor `diag(σ_ξ(σ_ξ+1)Δξ², σ_η(σ_η+1)Δη²)`. Lumping keeps
//! the nodal stencil identical to the finite-difference smoother, whose
//! neighbour ratios are bounded by `(σ+1)/σ`.

use crate::error::{Error, Result};
use crate::fem::{assemble_anisotropic_stiffness, lumped_mass_in};
use crate::mesh::{Frame, TriMesh};
use crate::sparse::{pcg, SparseOperator, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingParams {
    pub sigma_xi: f64,
    pub sigma_eta: f64,
    pub cg_max_iter: usize,
    pub cg_rel_tol: f64,
}

impl SmoothingParams {
    pub fn new(sigma_xi: f64, sigma_eta: f64) -> Result<Self> {
        let p = SmoothingParams {
            sigma_xi,
            sigma_eta,
            ..Default::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_xi >= 0.0 && self.sigma_eta >= 0.0) {
            return Err(Error::InvalidArgument("smoothing parameters must be nonnegative".into()));
        }
        if self.cg_max_iter == 0 || !(self.cg_rel_tol > 0.0) {
            return Err(Error::InvalidArgument("CG limits must be positive".into()));
        }
        Ok(())
    }

    fn is_identity(&self) -> bool {
        self.sigma_xi == 0.0 && self.sigma_eta == 0.0
    }
}

impl Default for SmoothingParams {
    fn default() -> Self {
        SmoothingParams {
            sigma_xi: 1.0,
            sigma_eta: 1.0,
            cg_max_iter: 20,
            cg_rel_tol: 1e-3,
        }
    }
}

/// Smoother with its operator assembled once on the computational mesh.
#[derive(Debug, Clone)]
pub struct MonitorSmoother {
    params: SmoothingParams,
    lumped: Vec<f64>,
    op: SparseOperator,
}

impl MonitorSmoother {
    pub fn new(mesh: &TriMesh, params: SmoothingParams) -> Result<Self> {
        params.validate()?;
        let lumped = lumped_mass_in(mesh, Frame::Computational)?;
        let dxi = 1.0 / mesh.nx() as f64;
        let deta = 1.0 / mesh.nz() as f64;
        let tensor = [
            params.sigma_xi * (params.sigma_xi + 1.0) * dxi * dxi,
            params.sigma_eta * (params.sigma_eta + 1.0) * deta * deta,
        ];
        let stiff = assemble_anisotropic_stiffness(mesh, Frame::Computational, tensor, None)?;
        let mut b = TripletBuilder::new(lumped.len());
        for (i, l) in lumped.iter().enumerate() {
            b.add(i, i, *l);
        }
        let mass = b.finalize(true);
        let op = SparseOperator::linear_combination(&[(1.0, &mass), (1.0, &stiff)]);
        Ok(MonitorSmoother { params, lumped, op })
    }

    pub fn params(&self) -> &SmoothingParams {
        &self.params
    }

    /// Lumped computational-frame mass, the weights under which smoothing
    /// preserves the integral.
    pub fn weights(&self) -> &[f64] {
        &self.lumped
    }

    pub fn smooth(&self, m: &[f64]) -> Vec<f64> {
        if self.params.is_identity() {
            return m.to_vec();
        }
        let rhs: Vec<f64> = m.iter().zip(&self.lumped).map(|(v, l)| v * l).collect();
        let mut out = m.to_vec();
        pcg(&self.op, &rhs, &mut out, self.params.cg_rel_tol, self.params.cg_max_iter);
        // A truncated solve drifts in the mean; constants lie in the kernel of
        // the diffusion part, so a shift restores it without other effect.
        let total: f64 = self.lumped.iter().sum();
        let drift = rhs.iter().zip(&out).zip(&self.lumped).map(|((r, o), l)| r - o * l).sum::<f64>() / total;
        out.iter_mut().for_each(|v| *v += drift);
        let lo = m.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        out.iter_mut().for_each(|v| *v = v.clamp(lo, hi));
        out
    }
}

pub fn smooth_monitor(mesh: &TriMesh, m: &[f64], params: &SmoothingParams) -> Result<Vec<f64>> {
    Ok(MonitorSmoother::new(mesh, *params)?.smooth(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_rect_mesh, Rect, SideSet};

    fn mesh() -> TriMesh {
        generate_rect_mesh(12, 9, Rect::new(-1.0, 2.0, 0.0, 4.0), SideSet::NONE).unwrap()
    }

    fn spike(m: &TriMesh) -> Vec<f64> {
        m.computational()
            .iter()
            .map(|p| 1.0 + 10.0 * (-80.0 * ((p[0] - 0.4).powi(2) + (p[1] - 0.6).powi(2))).exp())
            .collect()
    }

    #[test]
    fn constants_are_invariant() {
        let m = mesh();
        let out = smooth_monitor(&m, &vec![2.5; m.num_nodes()], &SmoothingParams::default()).unwrap();
        assert!(out.iter().all(|v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn zero_sigma_is_identity() {
        let m = mesh();
        let input = spike(&m);
        let p = SmoothingParams::new(0.0, 0.0).unwrap();
        assert_eq!(smooth_monitor(&m, &input, &p).unwrap(), input);
    }

    #[test]
    fn exact_solve_preserves_mean_and_range() {
        let m = mesh();
        let input = spike(&m);
        let p = SmoothingParams {
            sigma_xi: 3.0,
            sigma_eta: 1.0,
            cg_max_iter: 500,
            cg_rel_tol: 1e-14,
        };
        let s = MonitorSmoother::new(&m, p).unwrap();
        let out = s.smooth(&input);
        let mean = |v: &[f64]| v.iter().zip(s.weights()).map(|(a, b)| a * b).sum::<f64>();
        assert!((mean(&out) - mean(&input)).abs() <= 1e-8 * mean(&input));
        let hi = input.iter().cloned().fold(f64::MIN, f64::max);
        assert!(out.iter().all(|&v| v >= 1.0 - 1e-10 && v <= hi + 1e-10));
        assert!(out.iter().cloned().fold(f64::MIN, f64::max) < hi);
    }

    #[test]
    fn one_dimensional_neighbour_ratio_bound() {
        // A monitor varying only along ξ; the smoothed ratios obey (σ+1)/σ.
        let m = generate_rect_mesh(40, 2, Rect::new(0.0, 1.0, 0.0, 1.0), SideSet::NONE).unwrap();
        let input: Vec<f64> = m
            .computational()
            .iter()
            .map(|p| if (p[0] - 0.5).abs() < 0.02 { 1000.0 } else { 1.0 })
            .collect();
        let sigma = 2.0;
        let p = SmoothingParams {
            sigma_xi: sigma,
            sigma_eta: 0.0,
            cg_max_iter: 1000,
            cg_rel_tol: 1e-14,
        };
        let out = smooth_monitor(&m, &input, &p).unwrap();
        for i in 0..40 {
            let r = out[m.node_index(i + 1, 1)] / out[m.node_index(i, 1)];
            assert!(r <= (sigma + 1.0) / sigma + 1e-9 && r >= sigma / (sigma + 1.0) - 1e-9);
        }
    }
}
