//! Time loop coupling mesh movement and the quasi-Newton stepper.

use log::{debug, info, warn};

use crate::error::Result;
use crate::fem::{FieldState, PhysicsModel};
use crate::mesh::{generate_rect_mesh, Point, TriMesh};
use crate::moving_mesh::{CycleReport, MeshMover, MonitorSpec, MovingMeshParams, Resample, SmoothingParams};
use crate::solver::{consistent_w, StepReport, TimeStepper, TimeStepperConfig};

use super::config::ScenarioConfig;

/// Upper bound on adaptation cycles against the analytic initial data.
pub const INITIAL_ADAPT_CYCLES: usize = 20;

/// Per-step log entry.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub step_report: StepReport,
    pub cycle: Option<CycleReport>,
}

pub struct Simulation {
    pub mesh: TriMesh,
    pub model: PhysicsModel,
    pub state: FieldState,
    stepper: TimeStepper,
    mover: Option<MeshMover>,
    steps_taken: usize,
    frozen_cycles: usize,
}

impl Simulation {
    /// Samples `u0` on `mesh`, adapts the mesh to it when `mover` is given, and
    /// sets `w` consistently with `u`.
    pub fn new(
        mut mesh: TriMesh,
        model: PhysicsModel,
        u0: &dyn Fn(Point) -> f64,
        stepper: TimeStepperConfig,
        mover: Option<MeshMover>,
    ) -> Result<Self> {
        let u: Vec<f64> = mesh.physical().iter().map(|p| u0(*p)).collect();
        let mut state = FieldState::new(u, vec![0.0; mesh.num_nodes()], 0.0)?;
        if let Some(m) = &mover {
            adapt_to_function(m, &mut mesh, &mut state, u0)?;
        }
        state.w = consistent_w(&mesh, &model, &state.u)?;
        Ok(Simulation {
            mesh,
            model,
            state,
            stepper: TimeStepper::new(stepper)?,
            mover,
            steps_taken: 0,
            frozen_cycles: 0,
        })
    }

    /// Builds the mesh, model and mover described by `cfg` at mesh size `h`.
    pub fn from_config(cfg: &ScenarioConfig, h: f64, model: PhysicsModel, u0: &dyn Fn(Point) -> f64) -> Result<Self> {
        let (nx, nz) = cfg.cells_for(h)?;
        let mesh = generate_rect_mesh(nx, nz, cfg.bounds, cfg.dirichlet_sides())?;
        let mover = if cfg.moving { Some(mover_for(cfg, &mesh)?) } else { None };
        let stepper = TimeStepperConfig {
            inner_solver: cfg.inner,
            ..TimeStepperConfig::with_dt(cfg.dt)
        };
        Simulation::new(mesh, model, u0, stepper, mover)
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    pub fn is_moving(&self) -> bool {
        self.mover.is_some()
    }

    /// Stops mesh movement for the rest of the run.
    pub fn freeze_mesh(&mut self) {
        self.mover = None;
    }

    pub fn mover(&self) -> Option<&MeshMover> {
        self.mover.as_ref()
    }

    /// Mesh-movement cycles that ended frozen by the area guard.
    pub fn frozen_cycles(&self) -> usize {
        self.frozen_cycles
    }

    /// One mesh-movement cycle (if moving) followed by one time step.
    pub fn advance(&mut self) -> Result<StepRecord> {
        let cycle = match &self.mover {
            Some(m) => {
                let r = m.run(&mut self.mesh, &mut self.state)?;
                if r.frozen {
                    self.frozen_cycles += 1;
                }
                debug!(
                    "cycle t={:.4} iterations={} delta_xi={:.3e} converged={} tau={} min_area={:.3e}",
                    self.state.t, r.iterations, r.delta_xi, r.converged, r.tau, r.min_area
                );
                Some(r)
            }
            None => None,
        };
        let (next, rep) = self.stepper.step(&self.mesh, &self.model, &self.state)?;
        self.state = next;
        self.steps_taken += 1;
        Ok(StepRecord {
            step: self.steps_taken,
            t: self.state.t,
            step_report: rep,
            cycle,
        })
    }

    /// Steps until `t_end`, calling `observe` after every step. The last step
    /// is shortened to land exactly on `t_end`.
    pub fn run_until(&mut self, t_end: f64, mut observe: impl FnMut(&Simulation, &StepRecord) -> Result<()>) -> Result<()> {
        let dt = self.stepper.config().dt;
        while self.state.t < t_end - 1e-9 * dt {
            let remaining = t_end - self.state.t;
            let rec = if remaining < dt * (1.0 - 1e-9) {
                let saved = self.stepper.config().clone();
                self.stepper = TimeStepper::new(TimeStepperConfig { dt: remaining, ..saved.clone() })?;
                let r = self.advance();
                self.stepper = TimeStepper::new(saved)?;
                r?
            } else {
                self.advance()?
            };
            if rec.step % 100 == 0 {
                info!(
                    "step {} t={:.4} newton={} krylov={}",
                    rec.step, rec.t, rec.step_report.newton_iterations, rec.step_report.krylov_iterations
                );
            }
            observe(self, &rec)?;
        }
        Ok(())
    }
}

pub fn mover_for(cfg: &ScenarioConfig, mesh: &TriMesh) -> Result<MeshMover> {
    MeshMover::new(
        mesh,
        MonitorSpec::new(cfg.monitor, cfg.kappa)?,
        SmoothingParams::new(cfg.sigma_xi, cfg.sigma_eta)?,
        MovingMeshParams {
            displacement: cfg.displacement,
            ..Default::default()
        },
    )
}

/// Repeats movement cycles with interpolated data until a cycle converges.
pub fn adapt_to_data(mover: &MeshMover, mesh: &mut TriMesh, state: &mut FieldState) -> Result<CycleReport> {
    repeat_cycles(|| mover.run(mesh, state))
}

/// Repeats movement cycles, resampling `f` exactly, until a cycle converges.
pub fn adapt_to_function(
    mover: &MeshMover,
    mesh: &mut TriMesh,
    state: &mut FieldState,
    f: &dyn Fn(Point) -> f64,
) -> Result<CycleReport> {
    let transfer = Resample(f);
    repeat_cycles(|| mover.run_with(mesh, state, &transfer))
}

fn repeat_cycles(mut cycle: impl FnMut() -> Result<CycleReport>) -> Result<CycleReport> {
    let mut last = CycleReport::default();
    for _ in 0..INITIAL_ADAPT_CYCLES {
        last = cycle()?;
        if last.converged || last.frozen {
            return Ok(last);
        }
    }
    warn!(
        "initial adaptation stopped after {INITIAL_ADAPT_CYCLES} cycles (delta_xi = {:e})",
        last.delta_xi
    );
    Ok(last)
}
