//! r-adaptivity: monitor construction and smoothing, harmonic-map node
//! redistribution, guarded node motion and solution transfer.

mod cycle;
mod density;
mod harmonic;
mod monitor;
mod smoothing;
mod transfer;

pub use cycle::{mesh_move_cycle, CycleReport, Displacement, MeshMover, MovingMeshParams};
pub use density::{density_ratio_report, Axis, DensityReport};
pub use harmonic::{redistribute_boundary, solve_harmonic_map, BoundaryCoordinates};
pub use monitor::{compute_monitor, recover_gradient, recover_laplacian, MonitorKind, MonitorSpec};
pub use smoothing::{smooth_monitor, MonitorSmoother, SmoothingParams};
pub use transfer::{interpolate_field, FieldTransfer, Interpolate, Resample};
