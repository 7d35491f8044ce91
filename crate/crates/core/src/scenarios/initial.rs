//! Initial data of the experiments. The traveling-wave cases split at
//! `z = 2.5` (the vertical coordinate), not `x`.

use crate::error::{Error, Result};
use crate::mesh::Point;

use super::config::{Scenario, ScenarioConfig};

/// Height of the intermediate bump in the two-wave cases.
pub const BUMP: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialCondition {
    scenario: Scenario,
    u_minus: f64,
    u_plus: f64,
    amplitude: f64,
    wavelength: f64,
    beta: f64,
    gamma: f64,
}

impl InitialCondition {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        InitialCondition {
            scenario: cfg.scenario,
            u_minus: cfg.u_minus,
            u_plus: cfg.u_plus,
            amplitude: cfg.amplitude,
            wavelength: cfg.wavelength,
            beta: cfg.beta,
            gamma: cfg.gamma,
        }
    }

    pub fn eval(&self, p: Point) -> f64 {
        let [x, z] = p;
        let (um, up) = (self.u_minus, self.u_plus);
        let front = |a: f64, b: f64, c: f64, k: f64| 0.5 * (a - b) * (1.0 - (k * (z - c)).tanh()) + b;
        match self.scenario {
            Scenario::Converge => converge_exact(self.beta, self.gamma, p, 0.0),
            Scenario::Tw1 => front(um, up, 2.5, 10.0),
            Scenario::Tw2 | Scenario::Tw3 => {
                let (left, right) = if self.scenario == Scenario::Tw2 { (2.0, 3.0) } else { (1.5, 3.5) };
                if z <= 2.5 {
                    front(um, BUMP, left, 10.0)
                } else {
                    front(BUMP, up, right, 10.0)
                }
            }
            Scenario::Finger => {
                let c = 15.0 - self.amplitude * (2.0 * std::f64::consts::PI * x / self.wavelength).cos();
                front(um, up, c, 1.0)
            }
            Scenario::Meshdemo => meshdemo_function(p),
        }
    }
}

/// Exact solution of the linear convergence test on the unit square.
pub fn converge_exact(beta: f64, gamma: f64, p: Point, t: f64) -> f64 {
    use std::f64::consts::PI;
    let decay = (-(8.0 * beta * PI * PI + 64.0 * gamma * PI.powi(4)) * t).exp();
    decay * (2.0 * PI * p[0]).cos() * (2.0 * PI * p[1]).cos()
}

/// Static test function for mesh adaptation.
pub fn meshdemo_function(p: Point) -> f64 {
    -(100.0 * p[1]).tanh() * (100.0 * p[0]).tanh()
}

/// Initial value by scenario name, for callers without a full config.
pub fn initial_condition(case: &str, p: Point) -> Result<f64> {
    let scenario: Scenario = case.parse().map_err(|_| Error::InvalidArgument(format!("unknown case '{case}'")))?;
    if !matches!(scenario, Scenario::Tw1 | Scenario::Tw2 | Scenario::Tw3 | Scenario::Finger) {
        return Err(Error::InvalidArgument(format!("'{case}' has no initial front")));
    }
    Ok(InitialCondition::new(&ScenarioConfig::defaults(scenario)).eval(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_limits_and_bumps() {
        let v = |c: &str, x: f64, z: f64| initial_condition(c, [x, z]).unwrap();
        assert!((v("tw1", 0.2, 0.0) - 0.3323).abs() < 1e-12);
        assert!((v("tw1", 0.2, 5.0) - 0.1).abs() < 1e-12);
        assert!((v("tw1", 0.2, 2.5) - 0.5 * (0.3323 + 0.1)).abs() < 1e-15);
        assert!((v("tw2", 0.0, 2.5) - 0.6).abs() < 1e-3);
        // ten tanh widths from the nearest centre: tail ≈ 2e-9
        assert!((v("tw3", 0.0, 2.5) - 0.6).abs() < 1e-8);
        // Case 2 is continuous up to tanh tails at the split.
        assert!((v("tw2", 0.0, 2.5) - v("tw2", 0.0, 2.5 + 1e-12)).abs() < 1e-4);
    }

    #[test]
    fn finger_midpoint_sits_on_the_perturbed_front() {
        for x in [0.0, 3.0, 7.5, 11.0] {
            let zc = 15.0 - 0.2 * (2.0 * std::f64::consts::PI * x / 15.0).cos();
            assert!((initial_condition("finger", [x, zc]).unwrap() - 0.55).abs() < 1e-14);
        }
        let left = initial_condition("finger", [2.0, 14.0]).unwrap();
        let right = initial_condition("finger", [13.0, 14.0]).unwrap();
        assert!((left - right).abs() < 1e-14);
    }

    #[test]
    fn unknown_case() {
        assert!(initial_condition("tw7", [0.0, 0.0]).is_err());
        assert!(initial_condition("converge", [0.0, 0.0]).is_err());
    }

    #[test]
    fn decay_factor() {
        let beta = 0.5;
        let gamma = 0.0025;
        let pi = std::f64::consts::PI;
        let factor = (-(8.0 * beta * pi * pi + 64.0 * gamma * pi.powi(4)) * 0.01).exp();
        assert!((converge_exact(beta, gamma, [0.0, 0.0], 0.01) - factor).abs() < 1e-15);
        assert!((factor - 0.5766).abs() < 5e-4);
    }
}
