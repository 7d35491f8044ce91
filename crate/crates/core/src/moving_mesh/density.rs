//! Neighbour cell-size ratios along the boundary strips.

use crate::mesh::{Frame, TriMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Z,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Z => "z",
        }
    }
}

/// Ratios `a_{k+1}/a_k` of consecutive quad areas along the two boundary
/// strips orthogonal to `axis`, with the first and last cell of each strip
/// left out.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityReport {
    pub axis: Axis,
    pub strips: [Vec<f64>; 2],
}

impl DensityReport {
    pub fn ratios(&self) -> impl Iterator<Item = f64> + '_ {
        self.strips.iter().flatten().copied()
    }

    pub fn min(&self) -> f64 {
        self.ratios().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.ratios().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Whether every ratio lies in `[σ/(σ+1), (σ+1)/σ]` widened by `slack`
    /// (relative).
    pub fn within(&self, sigma: f64, slack: f64) -> bool {
        let lo = sigma / (sigma + 1.0) * (1.0 - slack);
        let hi = (sigma + 1.0) / sigma * (1.0 + slack);
        self.ratios().all(|r| r >= lo && r <= hi)
    }
}

pub fn density_ratio_report(mesh: &TriMesh, axis: Axis) -> DensityReport {
    let (nx, nz) = (mesh.nx(), mesh.nz());
    let strip = |fixed: usize| -> Vec<f64> {
        let areas: Vec<f64> = match axis {
            Axis::X => (0..nx).map(|i| mesh.cell_area(i, fixed, Frame::Physical)).collect(),
            Axis::Z => (0..nz).map(|j| mesh.cell_area(fixed, j, Frame::Physical)).collect(),
        };
        if areas.len() < 4 {
            return Vec::new();
        }
        let inner = &areas[1..areas.len() - 1];
        inner.windows(2).map(|w| w[1] / w[0]).collect()
    };
    let strips = match axis {
        Axis::X => [strip(0), strip(nz - 1)],
        Axis::Z => [strip(0), strip(nx - 1)],
    };
    DensityReport { axis, strips }
}
