//! Flat `key = value` scenario configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mesh::{Rect, SideSet};
use crate::moving_mesh::{Displacement, MonitorKind};
use crate::solver::InnerSolver;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Converge,
    Tw1,
    Tw2,
    Tw3,
    Finger,
    Meshdemo,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Converge,
        Scenario::Tw1,
        Scenario::Tw2,
        Scenario::Tw3,
        Scenario::Finger,
        Scenario::Meshdemo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Converge => "converge",
            Scenario::Tw1 => "tw1",
            Scenario::Tw2 => "tw2",
            Scenario::Tw3 => "tw3",
            Scenario::Finger => "finger",
            Scenario::Meshdemo => "meshdemo",
        }
    }

    pub fn tw_case(case: u32) -> Result<Scenario> {
        match case {
            1 => Ok(Scenario::Tw1),
            2 => Ok(Scenario::Tw2),
            3 => Ok(Scenario::Tw3),
            _ => Err(Error::Config(format!("traveling-wave case must be 1, 2 or 3, got {case}"))),
        }
    }

    pub fn is_tw(self) -> bool {
        matches!(self, Scenario::Tw1 | Scenario::Tw2 | Scenario::Tw3)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub h: f64,
    pub dt: f64,
    pub t_end: f64,
    pub monitor: MonitorKind,
    pub kappa: f64,
    pub sigma_xi: f64,
    pub sigma_eta: f64,
    pub moving: bool,
    /// Steps between snapshots; 0 disables periodic snapshots.
    pub snapshot_every: usize,
    pub out_dir: Option<PathBuf>,
    pub bounds: Rect,
    pub beta: f64,
    pub gamma: f64,
    pub u_minus: f64,
    pub u_plus: f64,
    /// Finger perturbation amplitude and wavelength.
    pub amplitude: f64,
    pub wavelength: f64,
    /// Frame speed; `None` means the Rankine–Hugoniot speed of the far-field states.
    pub speed: Option<f64>,
    /// Round non-integer cell counts up instead of rejecting them.
    pub round_cells: bool,
    pub inner: InnerSolver,
    pub displacement: Displacement,
    /// Also run the finest convergence level.
    pub finest: bool,
    /// Grid size of the traveling-wave oracle.
    pub ode_points: usize,
    /// Extra output times (finger snapshots).
    pub snapshot_times: Vec<f64>,
}

impl ScenarioConfig {
    pub fn defaults(scenario: Scenario) -> Self {
        let base = ScenarioConfig {
            scenario,
            h: 0.1,
            dt: 0.1,
            t_end: 100.0,
            monitor: MonitorKind::ArcLength,
            kappa: 0.3,
            sigma_xi: 1.0,
            sigma_eta: 1.0,
            moving: true,
            snapshot_every: 100,
            out_dir: None,
            bounds: Rect::new(0.0, 1.0, 0.0, 1.0),
            beta: 0.0,
            gamma: 0.001,
            u_minus: 0.3323,
            u_plus: 0.1,
            amplitude: 0.2,
            wavelength: 15.0,
            speed: None,
            round_cells: false,
            inner: InnerSolver::Direct,
            displacement: Displacement::Inverse,
            finest: false,
            ode_points: 2000,
            snapshot_times: Vec::new(),
        };
        match scenario {
            Scenario::Converge => ScenarioConfig {
                h: 0.1,
                dt: 1e-5,
                t_end: 0.01,
                kappa: 0.5,
                moving: false,
                snapshot_every: 0,
                beta: 0.5,
                gamma: 0.0025,
                speed: Some(0.0),
                ..base
            },
            Scenario::Tw1 | Scenario::Tw2 | Scenario::Tw3 => ScenarioConfig {
                h: 1.0 / 16.0,
                monitor: MonitorKind::Curvature,
                bounds: Rect::new(0.0, 0.5, 0.0, 5.0),
                ..base
            },
            Scenario::Finger => ScenarioConfig {
                h: 0.4,
                t_end: 80.0,
                monitor: MonitorKind::Curvature,
                kappa: 0.5,
                bounds: Rect::new(0.0, 15.0, 0.0, 30.0),
                gamma: 1.0,
                u_minus: 1.0,
                round_cells: true,
                snapshot_times: vec![0.0, 20.0, 40.0, 80.0],
                ..base
            },
            Scenario::Meshdemo => ScenarioConfig {
                h: 0.025,
                dt: 1.0,
                t_end: 1.0,
                sigma_xi: 3.0,
                kappa: 0.5,
                snapshot_every: 0,
                bounds: Rect::new(-0.5, 0.5, -0.5, 0.5),
                speed: Some(0.0),
                ..base
            },
        }
    }

    /// Reads a `key = value` file on top of the scenario defaults. The file
    /// must name its scenario unless `fallback` is given.
    pub fn load(path: &Path, fallback: Option<Scenario>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, fallback)
    }

    pub fn parse(text: &str, fallback: Option<Scenario>) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let scenario = match pairs.iter().find(|(k, _)| k == "scenario") {
            Some((_, v)) => v.parse()?,
            None => fallback.ok_or_else(|| Error::Config("no scenario given".into()))?,
        };
        let mut cfg = Self::defaults(scenario);
        for (k, v) in pairs.iter().filter(|(k, _)| k != "scenario") {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let real = || parse_real(key, value);
        match key {
            "scenario" => {
                let s: Scenario = value.parse()?;
                if s != self.scenario {
                    return Err(Error::Config(format!(
                        "scenario '{s}' conflicts with '{}'",
                        self.scenario
                    )));
                }
            }
            "h" => self.h = real()?,
            "dt" => self.dt = real()?,
            "T" | "t_end" => self.t_end = real()?,
            "monitor" => self.monitor = parse_monitor(value)?,
            "kappa" => self.kappa = real()?,
            "sigma" => {
                self.sigma_xi = real()?;
                self.sigma_eta = self.sigma_xi;
            }
            "sigma_xi" => self.sigma_xi = real()?,
            "sigma_eta" => self.sigma_eta = real()?,
            "moving" => self.moving = parse_bool(key, value)?,
            "snapshot_every" => self.snapshot_every = parse_int(key, value)?,
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            "x0" => self.bounds.x0 = real()?,
            "x1" => self.bounds.x1 = real()?,
            "z0" => self.bounds.z0 = real()?,
            "z1" => self.bounds.z1 = real()?,
            "beta" => self.beta = real()?,
            "gamma" => self.gamma = real()?,
            "u_minus" => self.u_minus = real()?,
            "u_plus" => self.u_plus = real()?,
            "amplitude" | "A0" => self.amplitude = real()?,
            "wavelength" | "lambda0" => self.wavelength = real()?,
            "speed" => self.speed = Some(real()?),
            "round_cells" => self.round_cells = parse_bool(key, value)?,
            "inner" => self.inner = parse_inner(value)?,
            "displacement" => self.displacement = parse_displacement(value)?,
            "finest" => self.finest = parse_bool(key, value)?,
            "ode_points" => self.ode_points = parse_int(key, value)?,
            "snapshot_times" => {
                self.snapshot_times = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse_real(key, s.trim()))
                    .collect::<Result<_>>()?
            }
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= self.dt) {
            return Err(Error::Config(format!("T = {} is shorter than dt = {}", self.t_end, self.dt)));
        }
        if !(self.h > 0.0) {
            return Err(Error::Config(format!("h must be positive, got {}", self.h)));
        }
        if !(self.bounds.width() > 0.0 && self.bounds.height() > 0.0) {
            return Err(Error::Config("domain bounds are empty".into()));
        }
        if !(self.kappa >= 0.0 && self.kappa < 1.0) {
            return Err(Error::Config(format!("kappa must lie in [0, 1), got {}", self.kappa)));
        }
        if !(self.sigma_xi >= 0.0 && self.sigma_eta >= 0.0) {
            return Err(Error::Config("smoothing parameters must be nonnegative".into()));
        }
        if !(self.gamma > 0.0 && self.beta >= 0.0) {
            return Err(Error::Config("need gamma > 0 and beta >= 0".into()));
        }
        if self.ode_points < 10 {
            return Err(Error::Config("ode_points must be at least 10".into()));
        }
        self.cells_for(self.h).map(|_| ())
    }

    /// Cell counts `(nx, nz)` for mesh size `h`.
    pub fn cells_for(&self, h: f64) -> Result<(usize, usize)> {
        let count = |len: f64, axis: &str| -> Result<usize> {
            let r = len / h;
            let n = r.round();
            if (r - n).abs() <= 1e-8 * r.max(1.0) && n >= 1.0 {
                Ok(n as usize)
            } else if self.round_cells {
                Ok(r.ceil() as usize)
            } else {
                Err(Error::Config(format!(
                    "h = {h} does not divide the {axis} extent {len}; set round_cells = true to round up"
                )))
            }
        };
        Ok((count(self.bounds.width(), "x")?, count(self.bounds.height(), "z")?))
    }

    /// Dirichlet sides of the scenario; the rest are natural (zero-flux).
    pub fn dirichlet_sides(&self) -> SideSet {
        match self.scenario {
            Scenario::Converge | Scenario::Meshdemo => SideSet::NONE,
            _ => SideSet::BOTTOM_TOP,
        }
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil() as usize
    }
}

fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Parses `key=value` command-line overrides.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{s}' is not key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn parse_real(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| Error::Config(format!("{key}: '{v}' is not a number")))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Config(format!("{key}: value must be finite")))
    }
}

fn parse_int(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: '{v}' is not a nonnegative integer")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: '{v}' is not a boolean"))),
    }
}

pub fn parse_monitor(v: &str) -> Result<MonitorKind> {
    match v {
        "arc" | "arclength" | "arc-length" => Ok(MonitorKind::ArcLength),
        "curv" | "curvature" => Ok(MonitorKind::Curvature),
        _ => Err(Error::Config(format!("unknown monitor '{v}'"))),
    }
}

pub fn parse_displacement(v: &str) -> Result<Displacement> {
    match v {
        "inverse" => Ok(Displacement::Inverse),
        "star" | "star-average" => Ok(Displacement::StarAverage),
        _ => Err(Error::Config(format!("displacement must be 'inverse' or 'star', got '{v}'"))),
    }
}

pub fn parse_inner(v: &str) -> Result<InnerSolver> {
    if v == "direct" {
        return Ok(InnerSolver::Direct);
    }
    if let Some(k) = v.strip_prefix("sweeps:") {
        let k = parse_int("inner", k)?;
        if k > 0 {
            return Ok(InnerSolver::Sweeps(k));
        }
    }
    Err(Error::Config(format!("inner solver must be 'direct' or 'sweeps:K', got '{v}'")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for s in Scenario::ALL {
            ScenarioConfig::defaults(s).validate().unwrap();
        }
    }

    #[test]
    fn file_and_comments() {
        let cfg = ScenarioConfig::parse("scenario = tw3\n# note\ndt = 0.05 # halved\nmonitor=arc\nmoving = false\n", None).unwrap();
        assert_eq!(cfg.scenario, Scenario::Tw3);
        assert_eq!(cfg.dt, 0.05);
        assert_eq!(cfg.monitor, MonitorKind::ArcLength);
        assert!(!cfg.moving);
        assert_eq!(cfg.n_steps(), 2000);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ScenarioConfig::parse("dt = 0.1", None).is_err());
        assert!(ScenarioConfig::parse("scenario = tw9", None).is_err());
        assert!(ScenarioConfig::parse("scenario = tw1\ndt = -1", None).is_err());
        assert!(ScenarioConfig::parse("scenario = tw1\nT = 0.01", None).is_err());
        assert!(ScenarioConfig::parse("scenario = tw1\nh = 0.3", None).is_err());
        assert!(ScenarioConfig::parse("scenario = tw1\nfoo = 1", None).is_err());
        assert!(ScenarioConfig::parse("scenario = tw1\ndt 1", None).is_err());
        assert!(parse_inner("sweeps:0").is_err());
    }

    #[test]
    fn rounded_cells() {
        let cfg = ScenarioConfig::defaults(Scenario::Finger);
        assert_eq!(cfg.cells_for(0.4).unwrap(), (38, 75));
        assert_eq!(cfg.cells_for(0.2).unwrap(), (75, 150));
        let tw = ScenarioConfig::defaults(Scenario::Tw1);
        assert_eq!(tw.cells_for(1.0 / 16.0).unwrap(), (8, 80));
    }
}
