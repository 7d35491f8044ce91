//! Moving nodal fields from an old mesh onto new node positions.

use crate::fem::FieldState;
use crate::mesh::{evaluate, Frame, Point, PointLocator, TriMesh};

/// Piecewise-linear evaluation of `values` (on `old`) at each new position.
pub fn interpolate_field(old: &TriMesh, values: &[f64], positions: &[Point]) -> Vec<f64> {
    let loc = PointLocator::new(old, Frame::Physical);
    positions.iter().map(|p| evaluate(old, values, &loc.locate(*p))).collect()
}

/// How the state follows the mesh when nodes move.
pub trait FieldTransfer {
    fn transfer(&self, old: &TriMesh, positions: &[Point], state: &FieldState) -> FieldState;
}

/// Interpolates both unknowns from the old mesh.
#[derive(Debug, Clone, Copy, Default)]
pub struct Interpolate;

impl FieldTransfer for Interpolate {
    fn transfer(&self, old: &TriMesh, positions: &[Point], state: &FieldState) -> FieldState {
        let loc = PointLocator::new(old, Frame::Physical);
        let located: Vec<_> = positions.iter().map(|p| loc.locate(*p)).collect();
        FieldState {
            u: located.iter().map(|l| evaluate(old, &state.u, l)).collect(),
            w: located.iter().map(|l| evaluate(old, &state.w, l)).collect(),
            t: state.t,
        }
    }
}

/// Resamples `u` from a known function, for static adaptation to analytic
/// data. `w` is interpolated.
pub struct Resample<F: Fn(Point) -> f64>(pub F);

impl<F: Fn(Point) -> f64> FieldTransfer for Resample<F> {
    fn transfer(&self, old: &TriMesh, positions: &[Point], state: &FieldState) -> FieldState {
        FieldState {
            u: positions.iter().map(|p| (self.0)(*p)).collect(),
            w: interpolate_field(old, &state.w, positions),
            t: state.t,
        }
    }
}
