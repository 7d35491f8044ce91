//! End-to-end experiment drivers with optional CSV/VTK output.

use std::path::{Path, PathBuf};

use log::info;

use crate::error::{Error, Result};
use crate::fem::{l2_error, Polynomial, PhysicsModel};
use crate::io::{write_csv, write_vtk, Cell, Table};
use crate::mesh::{generate_rect_mesh, Frame, TriMesh};
use crate::moving_mesh::{compute_monitor, density_ratio_report, Axis, DensityReport, MonitorKind, MonitorSpec};
use crate::tw::{rankine_hugoniot_speed, solve_tw_profile, TwProblem, TwProfile};

use super::config::{Scenario, ScenarioConfig};
use super::diagnostics::{
    centerline, distance_to_profile, finger_fronts, front_position, plateau, rear_position,
};
use super::driver::{adapt_to_data, mover_for, Simulation};
use super::initial::{converge_exact, meshdemo_function, InitialCondition, BUMP};

/// Columns sampled for finger fronts.
pub const FINGER_COLUMNS: usize = 61;

fn join(dir: &Option<PathBuf>, name: &str) -> Option<PathBuf> {
    dir.as_ref().map(|d| d.join(name))
}

/// Writes `u`, `w` and the monitor of a simulation.
pub fn write_snapshot(sim: &Simulation, spec: &MonitorSpec, path: &Path) -> Result<()> {
    let monitor = match sim.mover() {
        Some(m) => m.monitor(&sim.mesh, &sim.state.u)?,
        None => compute_monitor(&sim.mesh, &sim.state.u, spec)?,
    };
    write_vtk(
        &sim.mesh,
        &[("u", &sim.state.u), ("w", &sim.state.w), ("monitor", &monitor)],
        path,
    )
}

fn monitor_spec(cfg: &ScenarioConfig) -> Result<MonitorSpec> {
    MonitorSpec::new(cfg.monitor, cfg.kappa)
}

// ---------------------------------------------------------------- converge

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshMethod {
    Fixed,
    Moving(MonitorKind),
}

impl MeshMethod {
    pub const ALL: [MeshMethod; 3] = [
        MeshMethod::Fixed,
        MeshMethod::Moving(MonitorKind::ArcLength),
        MeshMethod::Moving(MonitorKind::Curvature),
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeshMethod::Fixed => "fixed",
            MeshMethod::Moving(MonitorKind::ArcLength) => "arclength",
            MeshMethod::Moving(MonitorKind::Curvature) => "curvature",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub method: MeshMethod,
    pub h: f64,
    pub nodes: usize,
    pub l2_error: f64,
    /// `log₂(e_{2h} / e_h)`; absent on the coarsest level.
    pub order: Option<f64>,
}

/// Mesh sizes of the convergence study.
pub fn convergence_levels(cfg: &ScenarioConfig) -> Vec<f64> {
    let mut hs = vec![cfg.h, cfg.h / 2.0, cfg.h / 4.0];
    if cfg.finest {
        hs.push(cfg.h / 8.0);
    }
    hs
}

fn linear_model(cfg: &ScenarioConfig) -> Result<PhysicsModel> {
    PhysicsModel::new(Polynomial::zero(), Polynomial::constant(1.0), cfg.beta, cfg.gamma, 0.0)
}

/// Time-dependent simulation of `cfg` at its own mesh size, starting from the
/// scenario's initial condition. `Meshdemo` has no dynamics and is rejected.
pub fn simulation_for(cfg: &ScenarioConfig) -> Result<Simulation> {
    cfg.validate()?;
    match cfg.scenario {
        Scenario::Converge => {
            let (beta, gamma) = (cfg.beta, cfg.gamma);
            Simulation::from_config(cfg, cfg.h, linear_model(cfg)?, &move |p| converge_exact(beta, gamma, p, 0.0))
        }
        Scenario::Meshdemo => Err(Error::Config("meshdemo has no time evolution".into())),
        _ => {
            let ic = InitialCondition::new(cfg);
            Simulation::from_config(cfg, cfg.h, film_model(cfg)?, &|p| ic.eval(p))
        }
    }
}

/// L² error at `T` of one convergence run.
pub fn convergence_error(cfg: &ScenarioConfig, method: MeshMethod, h: f64) -> Result<(f64, usize)> {
    let mut c = cfg.clone();
    match method {
        MeshMethod::Fixed => c.moving = false,
        MeshMethod::Moving(kind) => {
            c.moving = true;
            c.monitor = kind;
        }
    }
    let (beta, gamma) = (c.beta, c.gamma);
    let u0 = move |p| converge_exact(beta, gamma, p, 0.0);
    let mut sim = Simulation::from_config(&c, h, linear_model(&c)?, &u0)?;
    sim.run_until(c.t_end, |_, _| Ok(()))?;
    let t = sim.state.t;
    let err = l2_error(&sim.mesh, &sim.state.u, |p| converge_exact(beta, gamma, p, t));
    Ok((err, sim.mesh.num_nodes()))
}

/// Runs every method on every level. Rows are written as they complete, so a
/// failure leaves a partial table behind.
pub fn run_convergence(cfg: &ScenarioConfig, methods: &[MeshMethod]) -> Result<Vec<ConvergenceRow>> {
    let path = join(&cfg.out_dir, "convergence.csv");
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &method in methods {
        let mut prev: Option<f64> = None;
        for h in convergence_levels(cfg) {
            let (err, nodes) = convergence_error(cfg, method, h)?;
            let order = prev.map(|e| (e / err).log2());
            info!("{} h={h} L2={err:.4e} order={order:?}", method.name());
            rows.push(ConvergenceRow {
                method,
                h,
                nodes,
                l2_error: err,
                order,
            });
            prev = Some(err);
            if let Some(p) = &path {
                write_csv(&convergence_table(&rows), p)?;
            }
        }
    }
    Ok(rows)
}

pub fn convergence_table(rows: &[ConvergenceRow]) -> Table {
    let mut t = Table::new(&["method", "h", "nodes", "l2_error", "order"]);
    for r in rows {
        t.push(vec![
            r.method.name().into(),
            r.h.into(),
            r.nodes.into(),
            r.l2_error.into(),
            r.order.map_or(Cell::Text(String::new()), Cell::Real),
        ]);
    }
    t
}

// ---------------------------------------------------------------- traveling waves

/// Thin-film flux, mobility and frame speed of a front scenario.
pub fn film_model(cfg: &ScenarioConfig) -> Result<PhysicsModel> {
    let (flux, mobility) = match cfg.scenario {
        Scenario::Finger => (Polynomial::cubic(), Polynomial::cubic()),
        Scenario::Tw1 | Scenario::Tw2 | Scenario::Tw3 => (Polynomial::square_minus_cube(), Polynomial::cubic()),
        s => return Err(Error::Config(format!("scenario {s} has no thin-film model"))),
    };
    let s = match cfg.speed {
        Some(s) => s,
        None => rankine_hugoniot_speed(&flux, cfg.u_minus, cfg.u_plus)?,
    };
    PhysicsModel::new(flux, mobility, cfg.beta, cfg.gamma, s)
}

/// Traveling-wave oracle for the far-field states of `cfg`.
pub fn tw_oracle(cfg: &ScenarioConfig) -> Result<TwProfile> {
    let model = film_model(cfg)?;
    let s = model.frame_speed;
    let mut p = TwProblem::new(model, cfg.u_minus, cfg.u_plus);
    p.n_ode = cfg.ode_points;
    solve_tw_profile(&p, s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwSample {
    pub t: f64,
    /// Leading half-height crossing `(u₋ + u₊)/2`.
    pub front: f64,
    /// Trailing crossing between `u₋` and the plateau (two-wave cases).
    pub rear: Option<f64>,
    pub plateau: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TwRun {
    pub speed: f64,
    pub nodes: usize,
    pub history: Vec<TwSample>,
    /// Centerline at the final time.
    pub profile: Vec<(f64, f64)>,
    pub t_final: f64,
    pub frozen_cycles: usize,
}

impl TwRun {
    /// Largest front excursion over samples with `t ≥ t_from`.
    pub fn front_drift(&self, t_from: f64) -> f64 {
        spread(self.history.iter().filter(|s| s.t >= t_from - 1e-9).map(|s| s.front))
    }

    pub fn rear_drift(&self, t_from: f64) -> Option<f64> {
        let v: Option<Vec<f64>> = self.history.iter().filter(|s| s.t >= t_from - 1e-9).map(|s| s.rear).collect();
        v.map(|v| spread(v.into_iter()))
    }

    pub fn final_plateau(&self) -> Option<f64> {
        plateau(&self.profile)
    }
}

fn spread(v: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

fn tw_sample(cfg: &ScenarioConfig, t: f64, profile: &[(f64, f64)]) -> Result<TwSample> {
    let level = 0.5 * (cfg.u_minus + cfg.u_plus);
    let front = front_position(profile, level)
        .ok_or_else(|| Error::NumericalBreakdown(format!("no front crossing at t = {t}")))?;
    let pl = plateau(profile);
    let rear = match (cfg.scenario, pl) {
        (Scenario::Tw2 | Scenario::Tw3, Some(p)) => rear_position(profile, 0.5 * (cfg.u_minus + p)),
        _ => None,
    };
    Ok(TwSample { t, front, rear, plateau: pl })
}

/// Runs a traveling-wave case to `T`, recording fronts after every step.
pub fn run_tw(cfg: &ScenarioConfig) -> Result<TwRun> {
    if !cfg.scenario.is_tw() {
        return Err(Error::Config(format!("{} is not a traveling-wave case", cfg.scenario)));
    }
    let mut sim = simulation_for(cfg)?;
    let speed = sim.model.frame_speed;
    let spec = monitor_spec(cfg)?;
    let mut history = vec![tw_sample(cfg, 0.0, &centerline(&sim.mesh, &sim.state.u))?];
    let vtk = |sim: &Simulation, k: usize| -> Result<()> {
        match join(&cfg.out_dir, &format!("{}_{k:06}.vtk", cfg.scenario)) {
            Some(p) => write_snapshot(sim, &spec, &p),
            None => Ok(()),
        }
    };
    vtk(&sim, 0)?;
    sim.run_until(cfg.t_end, |sim, rec| {
        history.push(tw_sample(cfg, rec.t, &centerline(&sim.mesh, &sim.state.u))?);
        if cfg.snapshot_every > 0 && rec.step % cfg.snapshot_every == 0 {
            vtk(sim, rec.step)?;
        }
        Ok(())
    })?;
    let run = TwRun {
        speed,
        nodes: sim.mesh.num_nodes(),
        history,
        profile: centerline(&sim.mesh, &sim.state.u),
        t_final: sim.state.t,
        frozen_cycles: sim.frozen_cycles(),
    };
    if let Some(p) = join(&cfg.out_dir, &format!("{}_history.csv", cfg.scenario)) {
        let mut t = Table::new(&["t", "front", "rear", "plateau"]);
        let opt = |v: Option<f64>| v.map_or(Cell::Text(String::new()), Cell::Real);
        for s in &run.history {
            t.push(vec![s.t.into(), s.front.into(), opt(s.rear), opt(s.plateau)]);
        }
        write_csv(&t, &p)?;
    }
    if let Some(p) = join(&cfg.out_dir, &format!("{}_profile.csv", cfg.scenario)) {
        write_csv(&profile_table(&run.profile), &p)?;
    }
    Ok(run)
}

pub fn profile_table(profile: &[(f64, f64)]) -> Table {
    let mut t = Table::new(&["z", "u"]);
    for (z, u) in profile {
        t.push(vec![(*z).into(), (*u).into()]);
    }
    t
}

/// Shifted L∞ distance of a finished run to the oracle.
pub fn tw_distance(run: &TwRun, oracle: &TwProfile) -> (f64, f64) {
    distance_to_profile(&run.profile, oracle)
}

/// Speeds of the two waves around a measured plateau.
pub fn plateau_speeds(cfg: &ScenarioConfig, u_mid: f64) -> Result<(f64, f64)> {
    let flux = film_model(cfg)?.flux;
    Ok((
        rankine_hugoniot_speed(&flux, cfg.u_minus, u_mid)?,
        rankine_hugoniot_speed(&flux, u_mid, cfg.u_plus)?,
    ))
}

/// Speeds of the two initial waves around the bump.
pub fn bump_speeds(cfg: &ScenarioConfig) -> Result<(f64, f64)> {
    plateau_speeds(cfg, BUMP)
}

// ---------------------------------------------------------------- finger

#[derive(Debug, Clone, PartialEq)]
pub struct FingerSample {
    pub t: f64,
    pub tip: f64,
    pub root: f64,
    pub gap: f64,
    pub min_u: f64,
    pub oscillation: f64,
}

#[derive(Debug, Clone)]
pub struct FingerRun {
    pub speed: f64,
    pub nodes: usize,
    pub samples: Vec<FingerSample>,
    pub mesh: TriMesh,
    pub u: Vec<f64>,
}

impl FingerRun {
    pub fn at(&self, t: f64) -> Option<&FingerSample> {
        self.samples.iter().find(|s| (s.t - t).abs() < 1e-6)
    }
}

/// Largest undershoot of `u` below zero, zero if there is none. The
/// unphysical negative values show up in the thin precursor dip just ahead
/// of the front, so the whole domain is scanned.
pub fn oscillation_indicator(u: &[f64]) -> f64 {
    u.iter().fold(0.0_f64, |m, v| m.max(-v))
}

fn finger_sample(cfg: &ScenarioConfig, sim: &Simulation) -> FingerSample {
    let level = 0.5 * (cfg.u_minus + cfg.u_plus);
    let ff = finger_fronts(&sim.mesh, &sim.state.u, level, FINGER_COLUMNS);
    FingerSample {
        t: sim.state.t,
        tip: ff.tip(),
        root: ff.root(),
        gap: ff.gap(),
        min_u: sim.state.u.iter().copied().fold(f64::INFINITY, f64::min),
        oscillation: oscillation_indicator(&sim.state.u),
    }
}

/// Runs the fingering experiment, sampling at `snapshot_times` and every
/// `snapshot_every` steps.
pub fn run_finger(cfg: &ScenarioConfig) -> Result<FingerRun> {
    if cfg.scenario != Scenario::Finger {
        return Err(Error::Config("run_finger needs the finger scenario".into()));
    }
    let mut sim = simulation_for(cfg)?;
    let speed = sim.model.frame_speed;
    let spec = monitor_spec(cfg)?;
    let tag = if cfg.moving { "moving" } else { "fixed" };
    let mut samples = Vec::new();
    let record = |samples: &mut Vec<FingerSample>, sim: &Simulation| -> Result<()> {
        let s = finger_sample(cfg, sim);
        info!("finger t={:.1} tip={:.3} root={:.3} gap={:.4} min_u={:.4}", s.t, s.tip, s.root, s.gap, s.min_u);
        samples.push(s);
        if let Some(p) = join(&cfg.out_dir, &format!("finger_{tag}_t{:07.2}.vtk", sim.state.t)) {
            write_snapshot(sim, &spec, &p)?;
        }
        Ok(())
    };
    let wanted = |t: f64| cfg.snapshot_times.iter().any(|s| (s - t).abs() < 1e-6 * cfg.dt.max(1.0));
    if wanted(0.0) || cfg.snapshot_every > 0 {
        record(&mut samples, &sim)?;
    }
    sim.run_until(cfg.t_end, |sim, rec| {
        let periodic = cfg.snapshot_every > 0 && rec.step % cfg.snapshot_every == 0;
        if periodic || wanted(rec.t) {
            record(&mut samples, sim)?;
        }
        Ok(())
    })?;
    if samples.last().map_or(true, |s| (s.t - sim.state.t).abs() > 1e-9) {
        record(&mut samples, &sim)?;
    }
    if let Some(p) = join(&cfg.out_dir, &format!("finger_{tag}.csv")) {
        let mut t = Table::new(&["t", "tip", "root", "gap", "min_u", "oscillation"]);
        for s in &samples {
            t.push(vec![s.t.into(), s.tip.into(), s.root.into(), s.gap.into(), s.min_u.into(), s.oscillation.into()]);
        }
        write_csv(&t, &p)?;
    }
    Ok(FingerRun {
        speed,
        nodes: sim.mesh.num_nodes(),
        samples,
        mesh: sim.mesh,
        u: sim.state.u,
    })
}

// ---------------------------------------------------------------- meshdemo

#[derive(Debug, Clone)]
pub struct MeshdemoRun {
    pub mesh: TriMesh,
    pub u: Vec<f64>,
    pub x_ratios: DensityReport,
    pub z_ratios: DensityReport,
    pub converged: bool,
    pub delta_xi: f64,
}

/// Adapts a mesh to the static test function and reports density ratios.
pub fn run_meshdemo(cfg: &ScenarioConfig) -> Result<MeshdemoRun> {
    let (nx, nz) = cfg.cells_for(cfg.h)?;
    let mut mesh = generate_rect_mesh(nx, nz, cfg.bounds, cfg.dirichlet_sides())?;
    let mover = mover_for(cfg, &mesh)?;
    let u: Vec<f64> = mesh.physical().iter().map(|p| meshdemo_function(*p)).collect();
    let mut state = crate::fem::FieldState::new(u, vec![0.0; mesh.num_nodes()], 0.0)?;
    let rep = adapt_to_data(&mover, &mut mesh, &mut state)?;
    let x_ratios = density_ratio_report(&mesh, Axis::X);
    let z_ratios = density_ratio_report(&mesh, Axis::Z);
    if let Some(dir) = &cfg.out_dir {
        let m = mover.monitor(&mesh, &state.u)?;
        write_vtk(&mesh, &[("u", &state.u), ("monitor", &m)], &dir.join(format!("meshdemo_k{:.2}.vtk", cfg.kappa)))?;
        let mut t = Table::new(&["index", "ratio", "axis"]);
        for r in [&x_ratios, &z_ratios] {
            for (i, v) in r.ratios().enumerate() {
                t.push(vec![i.into(), v.into(), r.axis.name().into()]);
            }
        }
        write_csv(&t, &dir.join(format!("meshdemo_k{:.2}.csv", cfg.kappa)))?;
    }
    info!(
        "meshdemo kappa={} x-ratios [{:.4}, {:.4}] z-ratios [{:.4}, {:.4}] min area {:e}",
        cfg.kappa,
        x_ratios.min(),
        x_ratios.max(),
        z_ratios.min(),
        z_ratios.max(),
        mesh.min_area(Frame::Physical)
    );
    Ok(MeshdemoRun {
        mesh,
        u: state.u,
        x_ratios,
        z_ratios,
        converged: rep.converged,
        delta_xi: rep.delta_xi,
    })
}
