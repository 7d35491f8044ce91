//! Profile extraction and front, plateau and finger measurements.

use crate::mesh::{Point, TriMesh};
use crate::moving_mesh::interpolate_field;
use crate::tw::{shifted_distance, TwProfile};

pub const CENTERLINE_POINTS: usize = 1000;
/// Plateau detection: `|u′| < PLATEAU_SLOPE` and `u > PLATEAU_MIN`.
pub const PLATEAU_SLOPE: f64 = 0.02;
pub const PLATEAU_MIN: f64 = 0.4;

/// `u` along the vertical line `x`, on `n` equally spaced points spanning the
/// physical z-extent.
pub fn vertical_profile(mesh: &TriMesh, u: &[f64], x: f64, n: usize) -> Vec<(f64, f64)> {
    let b = mesh.bounds();
    let zs: Vec<f64> = (0..n).map(|k| b.z0 + b.height() * k as f64 / (n - 1) as f64).collect();
    let pts: Vec<Point> = zs.iter().map(|&z| [x, z]).collect();
    zs.into_iter().zip(interpolate_field(mesh, u, &pts)).collect()
}

/// Mid-domain vertical profile on [`CENTERLINE_POINTS`] points.
pub fn centerline(mesh: &TriMesh, u: &[f64]) -> Vec<(f64, f64)> {
    let b = mesh.bounds();
    vertical_profile(mesh, u, 0.5 * (b.x0 + b.x1), CENTERLINE_POINTS)
}

/// Central differences (one-sided at the ends).
pub fn derivative(profile: &[(f64, f64)]) -> Vec<f64> {
    let n = profile.len();
    (0..n)
        .map(|k| {
            let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
            (profile[b].1 - profile[a].1) / (profile[b].0 - profile[a].0)
        })
        .collect()
}

/// Largest z where the profile crosses `level`, by linear interpolation.
pub fn front_position(profile: &[(f64, f64)], level: f64) -> Option<f64> {
    profile.windows(2).rev().find_map(|w| crossing(w[0], w[1], level))
}

/// Smallest z where the profile crosses `level`.
pub fn rear_position(profile: &[(f64, f64)], level: f64) -> Option<f64> {
    profile.windows(2).find_map(|w| crossing(w[0], w[1], level))
}

fn crossing((z0, u0): (f64, f64), (z1, u1): (f64, f64), level: f64) -> Option<f64> {
    let (a, b) = (u0 - level, u1 - level);
    if a == 0.0 {
        Some(z0)
    } else if a * b < 0.0 || b == 0.0 {
        Some(z0 + (z1 - z0) * a / (a - b))
    } else {
        None
    }
}

/// Median of `u` over the flat, raised part of the profile.
pub fn plateau(profile: &[(f64, f64)]) -> Option<f64> {
    let du = derivative(profile);
    let mut vals: Vec<f64> = profile
        .iter()
        .zip(&du)
        .filter(|((_, u), d)| d.abs() < PLATEAU_SLOPE && *u > PLATEAU_MIN)
        .map(|((_, u), _)| *u)
        .collect();
    if vals.is_empty() {
        return None;
    }
    vals.sort_by(f64::total_cmp);
    let n = vals.len();
    Some(if n % 2 == 1 { vals[n / 2] } else { 0.5 * (vals[n / 2 - 1] + vals[n / 2]) })
}

/// L∞ distance to the oracle profile after the best translation, searched
/// over the whole profile extent.
pub fn distance_to_profile(profile: &[(f64, f64)], oracle: &TwProfile) -> (f64, f64) {
    let span = profile.last().map_or(0.0, |p| p.0) - profile.first().map_or(0.0, |p| p.0);
    shifted_distance(profile, oracle, span, span / 500.0)
}

/// Plain L∞ distance between two profiles sampled on the same grid.
pub fn profile_distance(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (p, q)| m.max((p.1 - q.1).abs()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FingerFronts {
    /// `(x, front z)` on each sampled column with a crossing.
    pub fronts: Vec<(f64, f64)>,
}

impl FingerFronts {
    pub fn tip(&self) -> f64 {
        self.fronts.iter().map(|f| f.1).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn root(&self) -> f64 {
        self.fronts.iter().map(|f| f.1).fold(f64::INFINITY, f64::min)
    }

    pub fn gap(&self) -> f64 {
        self.tip() - self.root()
    }
}

/// Half-height front positions on `columns` equally spaced vertical lines.
pub fn finger_fronts(mesh: &TriMesh, u: &[f64], level: f64, columns: usize) -> FingerFronts {
    let b = mesh.bounds();
    let fronts = (0..columns)
        .filter_map(|k| {
            let x = b.x0 + b.width() * k as f64 / (columns - 1) as f64;
            front_position(&vertical_profile(mesh, u, x, 4 * CENTERLINE_POINTS), level).map(|z| (x, z))
        })
        .collect();
    FingerFronts { fronts }
}


#[cfg(test)]
mod tests {
    use super::*;

    fn line(f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        (0..101).map(|k| k as f64 * 0.05).map(|z| (z, f(z))).collect()
    }

    #[test]
    fn front_is_found_from_the_right() {
        let p = line(|z| if z < 1.0 { 0.0 } else { 0.6 - 0.5 * (4.0 * (z - 3.2)).tanh() });
        let f = front_position(&p, 0.3).unwrap();
        let exact = 3.2 + (0.6f64).atanh() / 4.0;
        assert!((f - exact).abs() < 2e-3);
        assert!(rear_position(&p, 0.3).unwrap() < 1.01);
        assert!(front_position(&p, 2.0).is_none());
    }

    #[test]
    fn plateau_of_a_double_step() {
        let p = line(|z| 0.33 + 0.24 * 0.5 * (1.0 + (5.0 * (z - 1.0)).tanh()) - 0.47 * 0.5 * (1.0 + (5.0 * (z - 4.0)).tanh()));
        let v = plateau(&p).unwrap();
        assert!((v - 0.57).abs() < 2e-3, "{v}");
        assert!(plateau(&line(|_| 0.2)).is_none());
    }
}
