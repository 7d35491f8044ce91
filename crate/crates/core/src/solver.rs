//! IMEX time stepping of the mixed system with a frozen-Jacobian quasi-Newton
//! iteration. Linear solves use GMRES with a block lower-triangular
//! preconditioner whose Schur complement is replaced by `Ŝ₁ M₁⁻¹ Ŝ₂`.

use log::{debug, warn};

use crate::error::{Error, Result};
use crate::fem::{assemble_convection, assemble_mass, assemble_stiffness, assemble_weighted_stiffness, FieldState, PhysicsModel};
use crate::krylov::{gmres, GmresConfig, Identity, KrylovOutcome, LinearOperator, Preconditioner};
use crate::mesh::TriMesh;
use crate::sparse::{norm_inf, symmetric_gauss_seidel, Cholesky, DirichletSolver, SparseOperator};

/// How the three inner inverses of the preconditioner are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerSolver {
    /// Sparse Cholesky, factored once per step.
    Direct,
    /// `k` symmetric Gauss–Seidel sweeps from a zero guess.
    Sweeps(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeStepperConfig {
    pub dt: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub krylov_tol: f64,
    pub krylov_restart: usize,
    pub krylov_max_iter: usize,
    pub inner_solver: InnerSolver,
    /// Number of times a failed step may be retried with half the step size.
    pub max_halvings: usize,
    /// Disable to run GMRES without the block preconditioner.
    pub precondition: bool,
}

impl Default for TimeStepperConfig {
    fn default() -> Self {
        TimeStepperConfig {
            dt: 1e-3,
            newton_tol: 1e-6,
            newton_max_iter: 30,
            krylov_tol: 1e-8,
            krylov_restart: 60,
            krylov_max_iter: 500,
            inner_solver: InnerSolver::Direct,
            max_halvings: 3,
            precondition: true,
        }
    }
}

impl TimeStepperConfig {
    pub fn with_dt(dt: f64) -> Self {
        TimeStepperConfig {
            dt,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {}", self.dt)));
        }
        if !unit(self.newton_tol) || !unit(self.krylov_tol) {
            return Err(Error::InvalidArgument("tolerances must lie in (0, 1)".into()));
        }
        if self.newton_max_iter == 0 || self.krylov_restart == 0 || self.krylov_max_iter == 0 {
            return Err(Error::InvalidArgument("iteration limits must be positive".into()));
        }
        if self.inner_solver == InnerSolver::Sweeps(0) {
            return Err(Error::InvalidArgument("sweep count must be positive".into()));
        }
        Ok(())
    }

    fn gmres(&self) -> GmresConfig {
        GmresConfig {
            restart: self.krylov_restart,
            max_iter: self.krylov_max_iter,
            tol: self.krylov_tol,
        }
    }
}

/// Operators depending only on the mesh geometry.
#[derive(Debug, Clone)]
pub struct MeshOperators {
    pub m1: SparseOperator,
    pub k2: SparseOperator,
    version: u64,
}

impl MeshOperators {
    pub fn assemble(mesh: &TriMesh) -> Result<Self> {
        Ok(MeshOperators {
            m1: assemble_mass(mesh)?,
            k2: assemble_stiffness(mesh)?,
            version: mesh.version(),
        })
    }

    pub fn is_current(&self, mesh: &TriMesh) -> bool {
        self.version == mesh.version()
    }
}

enum InnerInverse {
    Direct(Cholesky),
    DirectDirichlet(DirichletSolver),
    Sweeps { op: SparseOperator, diag: Vec<f64>, k: usize },
}

impl InnerInverse {
    fn new(op: &SparseOperator, mask: Option<&[bool]>, kind: InnerSolver, block: &'static str) -> Result<Self> {
        let wrap = |e: Error| Error::InnerSolver {
            block,
            reason: e.to_string(),
        };
        match (kind, mask) {
            (InnerSolver::Direct, None) => Ok(InnerInverse::Direct(Cholesky::factor(op).map_err(wrap)?)),
            (InnerSolver::Direct, Some(m)) => Ok(InnerInverse::DirectDirichlet(DirichletSolver::new(op, m).map_err(wrap)?)),
            (InnerSolver::Sweeps(k), mask) => {
                let op = match mask {
                    Some(m) => op.with_identity_rows(m),
                    None => op.clone(),
                };
                let diag = op.diagonal();
                if let Some(i) = diag.iter().position(|d| !(*d > 0.0)) {
                    return Err(Error::InnerSolver {
                        block,
                        reason: format!("nonpositive diagonal entry at row {i}"),
                    });
                }
                Ok(InnerInverse::Sweeps { op, diag, k })
            }
        }
    }

    fn apply(&self, b: &[f64]) -> Vec<f64> {
        match self {
            InnerInverse::Direct(c) => c.solve(b),
            InnerInverse::DirectDirichlet(d) => d.solve(b),
            InnerInverse::Sweeps { op, diag, k } => symmetric_gauss_seidel(op, diag, b, *k),
        }
    }
}

/// The frozen Jacobian
/// `J = [[M₁, Δt K₁(uⁿ)], [−βM₁ − γK₂, M₁]]`
/// with Dirichlet rows of the first block row replaced by `[I, 0]`, together
/// with the step data needed by the residual.
pub struct BlockSystem {
    pub m1: SparseOperator,
    pub k1: SparseOperator,
    pub k2: SparseOperator,
    pub beta: f64,
    pub gamma: f64,
    pub dt: f64,
    mask: Vec<bool>,
    /// `βM₁ + γK₂`
    elliptic: SparseOperator,
}

impl BlockSystem {
    pub fn new(ops: &MeshOperators, k1: SparseOperator, model: &PhysicsModel, dt: f64, mask: &[bool]) -> Self {
        let elliptic = SparseOperator::linear_combination(&[(model.beta, &ops.m1), (model.gamma, &ops.k2)]);
        BlockSystem {
            m1: ops.m1.clone(),
            k1,
            k2: ops.k2.clone(),
            beta: model.beta,
            gamma: model.gamma,
            dt,
            mask: mask.to_vec(),
            elliptic,
        }
    }

    pub fn half(&self) -> usize {
        self.m1.dim()
    }

    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.mask
    }

    /// Builds the block preconditioner with the requested inner solver.
    pub fn preconditioner(&self, kind: InnerSolver) -> Result<SchurPreconditioner<'_>> {
        let sq = self.dt.sqrt();
        let s1 = SparseOperator::linear_combination(&[(1.0, &self.m1), (sq, &self.elliptic)]);
        let s2 = SparseOperator::linear_combination(&[(1.0, &self.m1), (sq, &self.k1)]);
        let mask = self.mask.iter().any(|&m| m).then_some(self.mask.as_slice());
        Ok(SchurPreconditioner {
            sys: self,
            m1_inv: InnerInverse::new(&self.m1, mask, kind, "M1")?,
            s1_inv: InnerInverse::new(&s1, None, kind, "S1")?,
            s2_inv: InnerInverse::new(&s2, None, kind, "S2")?,
        })
    }
}

impl LinearOperator for BlockSystem {
    fn dim(&self) -> usize {
        2 * self.half()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.half();
        let (x0, x1) = x.split_at(n);
        let (y0, y1) = y.split_at_mut(n);
        self.m1.apply(x0, y0);
        self.k1.apply_add(self.dt, x1, y0);
        for i in 0..n {
            if self.mask[i] {
                y0[i] = x0[i];
            }
        }
        self.m1.apply(x1, y1);
        self.elliptic.apply_add(-1.0, x0, y1);
    }
}

/// `P̂⁻¹` for `P̂ = [[M₁, 0], [−βM₁ − γK₂, Ŝ]]`, `Ŝ = Ŝ₁ M₁⁻¹ Ŝ₂`.
pub struct SchurPreconditioner<'a> {
    sys: &'a BlockSystem,
    m1_inv: InnerInverse,
    s1_inv: InnerInverse,
    s2_inv: InnerInverse,
}

impl SchurPreconditioner<'_> {
    /// Returns `(x̄₀, x̄₁)` for the right-hand side `(f̄₀, f̄₁)`.
    pub fn solve(&self, f0: &[f64], f1: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let x0 = self.m1_inv.apply(f0);
        let mut r = f1.to_vec();
        self.sys.elliptic.apply_add(1.0, &x0, &mut r);
        let t = self.s1_inv.apply(&r);
        let t = self.sys.m1.mul(&t);
        let x1 = self.s2_inv.apply(&t);
        (x0, x1)
    }
}

impl Preconditioner for SchurPreconditioner<'_> {
    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        let n = self.sys.half();
        let (x0, x1) = self.solve(&r[..n], &r[n..]);
        if x0.iter().chain(&x1).any(|v| !v.is_finite()) {
            return Err(Error::InnerSolver {
                block: "Schur",
                reason: "non-finite preconditioner output".into(),
            });
        }
        z[..n].copy_from_slice(&x0);
        z[n..].copy_from_slice(&x1);
        Ok(())
    }
}

/// Applies the block preconditioner once, building it from scratch.
pub fn apply_schur_preconditioner(sys: &BlockSystem, kind: InnerSolver, f0: &[f64], f1: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = sys.preconditioner(kind)?;
    Ok(p.solve(f0, f1))
}

/// Assembles the frozen Jacobian at the state `state_n`.
pub fn build_jacobian(mesh: &TriMesh, model: &PhysicsModel, state_n: &FieldState, cfg: &TimeStepperConfig) -> Result<BlockSystem> {
    let ops = MeshOperators::assemble(mesh)?;
    let k1 = assemble_weighted_stiffness(mesh, &state_n.u, |u| model.mobility_at(u))?;
    Ok(BlockSystem::new(&ops, k1, model, cfg.dt, mesh.dirichlet_mask()))
}

/// `(f̄₀, f̄₁)` for the candidate `(ū^{n+1}, w̄^{n+1})`. Dirichlet data are
/// the values of `state_n.u` on Dirichlet nodes.
pub fn imex_residual(
    mesh: &TriMesh,
    model: &PhysicsModel,
    state_n: &FieldState,
    candidate: &FieldState,
    cfg: &TimeStepperConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let ops = MeshOperators::assemble(mesh)?;
    let conv = assemble_convection(mesh, &state_n.u, model)?;
    let m1_un = ops.m1.mul(&state_n.u);
    residual(mesh, model, &ops, &conv, &m1_un, &state_n.u, candidate, cfg.dt)
}

#[allow(clippy::too_many_arguments)]
fn residual(
    mesh: &TriMesh,
    model: &PhysicsModel,
    ops: &MeshOperators,
    conv: &[f64],
    m1_un: &[f64],
    u_b: &[f64],
    cand: &FieldState,
    dt: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if cand.u.iter().chain(&cand.w).any(|v| !v.is_finite()) {
        return Err(Error::NumericalBreakdown("non-finite quasi-Newton iterate".into()));
    }
    let n = mesh.num_nodes();
    let k1 = assemble_weighted_stiffness(mesh, &cand.u, |u| model.mobility_at(u))?;
    let mut f0 = ops.m1.mul(&cand.u);
    k1.apply_add(dt, &cand.w, &mut f0);
    for i in 0..n {
        f0[i] -= dt * conv[i] + m1_un[i];
    }
    for (i, &d) in mesh.dirichlet_mask().iter().enumerate() {
        if d {
            f0[i] = cand.u[i] - u_b[i];
        }
    }
    let mut f1 = ops.m1.mul(&cand.w);
    ops.m1.apply_add(-model.beta, &cand.u, &mut f1);
    ops.k2.apply_add(-model.gamma, &cand.u, &mut f1);
    Ok((f0, f1))
}

/// Solves `J x = b` with GMRES, optionally block-preconditioned.
pub fn krylov_solve(sys: &BlockSystem, b: &[f64], cfg: &TimeStepperConfig) -> Result<(Vec<f64>, KrylovOutcome)> {
    let mut x = vec![0.0; b.len()];
    let out = if cfg.precondition {
        let p = sys.preconditioner(cfg.inner_solver)?;
        gmres(sys, &p, b, &mut x, &cfg.gmres())?
    } else {
        gmres(sys, &Identity, b, &mut x, &cfg.gmres())?
    };
    Ok((x, out))
}

/// `w̄ = M₁⁻¹(βM₁ + γK₂)ū`, the auxiliary field consistent with `ū`.
pub fn consistent_w(mesh: &TriMesh, model: &PhysicsModel, u: &[f64]) -> Result<Vec<f64>> {
    let ops = MeshOperators::assemble(mesh)?;
    let mut rhs = ops.m1.mul(u);
    rhs.iter_mut().for_each(|v| *v *= model.beta);
    ops.k2.apply_add(model.gamma, u, &mut rhs);
    Ok(Cholesky::factor(&ops.m1)?.solve(&rhs))
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepReport {
    pub newton_iterations: usize,
    pub krylov_iterations: usize,
    pub halvings: usize,
    pub substeps: usize,
    /// `‖x̄^{s+1} − x̄^s‖∞` of the last accepted update.
    pub last_update: f64,
    /// `‖−βM₁ū − γK₂ū + M₁w̄‖∞` at the accepted state.
    pub elliptic_residual: f64,
}

impl StepReport {
    fn absorb(&mut self, other: &StepReport) {
        self.newton_iterations += other.newton_iterations;
        self.krylov_iterations += other.krylov_iterations;
        self.halvings = self.halvings.max(other.halvings);
        self.substeps += other.substeps;
        self.last_update = other.last_update;
        self.elliptic_residual = other.elliptic_residual;
    }
}

/// Advances states by one time step, caching mesh operators across steps.
pub struct TimeStepper {
    cfg: TimeStepperConfig,
    ops: Option<MeshOperators>,
}

impl TimeStepper {
    pub fn new(cfg: TimeStepperConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(TimeStepper { cfg, ops: None })
    }

    pub fn config(&self) -> &TimeStepperConfig {
        &self.cfg
    }

    fn operators(&mut self, mesh: &TriMesh) -> Result<MeshOperators> {
        match &self.ops {
            Some(ops) if ops.is_current(mesh) => Ok(ops.clone()),
            _ => {
                let ops = MeshOperators::assemble(mesh)?;
                self.ops = Some(ops.clone());
                Ok(ops)
            }
        }
    }

    /// One step of size `cfg.dt`, retried with halved steps on failure.
    pub fn step(&mut self, mesh: &TriMesh, model: &PhysicsModel, state: &FieldState) -> Result<(FieldState, StepReport)> {
        let ops = self.operators(mesh)?;
        self.step_recursive(mesh, model, &ops, state, self.cfg.dt, 0)
    }

    fn step_recursive(
        &self,
        mesh: &TriMesh,
        model: &PhysicsModel,
        ops: &MeshOperators,
        state: &FieldState,
        dt: f64,
        depth: usize,
    ) -> Result<(FieldState, StepReport)> {
        match self.newton(mesh, model, ops, state, dt) {
            Ok(r) => Ok(r),
            Err(e) if e.is_nonconvergence() && depth < self.cfg.max_halvings => {
                warn!("step at t={:.6} with dt={dt:e} failed ({e}); retrying with dt/2", state.t);
                let (mid, mut rep) = self.step_recursive(mesh, model, ops, state, 0.5 * dt, depth + 1)?;
                let (end, rep2) = self.step_recursive(mesh, model, ops, &mid, 0.5 * dt, depth + 1)?;
                rep.absorb(&rep2);
                rep.halvings = rep.halvings.max(depth + 1);
                Ok((end, rep))
            }
            Err(e) => Err(e),
        }
    }

    fn newton(
        &self,
        mesh: &TriMesh,
        model: &PhysicsModel,
        ops: &MeshOperators,
        state: &FieldState,
        dt: f64,
    ) -> Result<(FieldState, StepReport)> {
        let n = mesh.num_nodes();
        let k1 = assemble_weighted_stiffness(mesh, &state.u, |u| model.mobility_at(u))?;
        let sys = BlockSystem::new(ops, k1, model, dt, mesh.dirichlet_mask());
        let precond = if self.cfg.precondition {
            Some(sys.preconditioner(self.cfg.inner_solver)?)
        } else {
            None
        };
        let conv = assemble_convection(mesh, &state.u, model)?;
        let m1_un = ops.m1.mul(&state.u);
        // With constant mobility the residual is affine and J is its exact
        // Jacobian, so a single solve is the answer.
        let exact_jacobian = model.mobility.is_constant();

        let mut cand = FieldState {
            u: state.u.clone(),
            w: state.w.clone(),
            t: state.t + dt,
        };
        let mut report = StepReport {
            substeps: 1,
            ..Default::default()
        };
        let gcfg = self.cfg.gmres();
        let mut rhs = vec![0.0; 2 * n];
        for s in 1..=self.cfg.newton_max_iter {
            let (f0, f1) = residual(mesh, model, ops, &conv, &m1_un, &state.u, &cand, dt)?;
            rhs[..n].copy_from_slice(&f0);
            rhs[n..].copy_from_slice(&f1);
            let mut delta = vec![0.0; 2 * n];
            let out = match &precond {
                Some(p) => gmres(&sys, p, &rhs, &mut delta, &gcfg)?,
                None => gmres(&sys, &Identity, &rhs, &mut delta, &gcfg)?,
            };
            report.krylov_iterations += out.iterations;
            for i in 0..n {
                cand.u[i] -= delta[i];
                cand.w[i] -= delta[n + i];
            }
            let upd = norm_inf(&delta);
            report.newton_iterations = s;
            report.last_update = upd;
            if !upd.is_finite() {
                return Err(Error::NumericalBreakdown("non-finite quasi-Newton update".into()));
            }
            if upd <= self.cfg.newton_tol || exact_jacobian {
                let mut ell = ops.m1.mul(&cand.w);
                ops.m1.apply_add(-model.beta, &cand.u, &mut ell);
                ops.k2.apply_add(-model.gamma, &cand.u, &mut ell);
                report.elliptic_residual = norm_inf(&ell);
                debug!(
                    "t={:.6} newton={} krylov={} update={upd:e}",
                    cand.t, report.newton_iterations, report.krylov_iterations
                );
                return Ok((cand, report));
            }
        }
        Err(Error::NewtonNonConvergence {
            iterations: self.cfg.newton_max_iter,
            update: report.last_update,
        })
    }
}

/// One time step from `state_n` without operator caching.
pub fn quasi_newton_step(
    mesh: &TriMesh,
    model: &PhysicsModel,
    state_n: &FieldState,
    cfg: &TimeStepperConfig,
) -> Result<(FieldState, StepReport)> {
    TimeStepper::new(cfg.clone())?.step(mesh, model, state_n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::Polynomial;
    use crate::mesh::{generate_rect_mesh, Rect, SideSet};
    use crate::sparse::TripletBuilder;
    use nalgebra::{DMatrix, DVector};

    fn diffusion_model() -> PhysicsModel {
        PhysicsModel::new(Polynomial::zero(), Polynomial::constant(1.0), 0.5, 0.0025, 0.0).unwrap()
    }

    fn film_model() -> PhysicsModel {
        PhysicsModel::new(Polynomial::square_minus_cube(), Polynomial::cubic(), 0.2, 0.01, 0.1).unwrap()
    }

    fn bumpy(mesh: &TriMesh) -> Vec<f64> {
        mesh.physical()
            .iter()
            .map(|p| 0.5 + 0.2 * (3.0 * p[0]).sin() * (2.0 * p[1]).cos())
            .collect()
    }

    fn scalar(v: f64) -> SparseOperator {
        let mut b = TripletBuilder::new(1);
        b.add(0, 0, v);
        b.finalize(true)
    }

    fn dense(op: &dyn LinearOperator) -> DMatrix<f64> {
        let n = op.dim();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut y = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            op.apply(&e, &mut y);
            for i in 0..n {
                m[(i, j)] = y[i];
            }
            e[j] = 0.0;
        }
        m
    }

    fn dense_op(a: &SparseOperator) -> DMatrix<f64> {
        let d = a.to_dense();
        DMatrix::from_fn(a.dim(), a.dim(), |i, j| d[i][j])
    }

    #[test]
    fn config_validation() {
        assert!(TimeStepperConfig::with_dt(0.1).validate().is_ok());
        assert!(TimeStepperConfig::with_dt(0.0).validate().is_err());
        let bad = TimeStepperConfig {
            newton_tol: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn scalar_jacobian_layout() {
        let ops = MeshOperators {
            m1: scalar(2.0),
            k2: scalar(3.0),
            version: 0,
        };
        let model = PhysicsModel::new(Polynomial::zero(), Polynomial::constant(1.0), 0.5, 0.25, 0.0).unwrap();
        let sys = BlockSystem::new(&ops, scalar(5.0), &model, 0.1, &[false]);
        let j = dense(&sys);
        let expect = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, -(0.5 * 2.0 + 0.25 * 3.0), 2.0]);
        assert!((j - expect).abs().max() < 1e-15);
    }

    #[test]
    fn zero_dt_and_coefficients_give_block_diagonal_mass() {
        let mesh = generate_rect_mesh(2, 2, Rect::new(0.0, 1.0, 0.0, 1.0), SideSet::NONE).unwrap();
        let model = PhysicsModel::new(Polynomial::zero(), Polynomial::constant(1.0), 0.0, 1e-300, 0.0).unwrap();
        let st = FieldState::new(vec![0.3; 9], vec![0.0; 9], 0.0).unwrap();
        let cfg = TimeStepperConfig {
            dt: 0.0,
            ..Default::default()
        };
        let sys = build_jacobian(&mesh, &model, &st, &cfg).unwrap();
        let j = dense(&sys);
        let m = dense_op(&sys.m1);
        assert!((j.view((0, 0), (9, 9)) - &m).abs().max() < 1e-15);
        assert!((j.view((9, 9), (9, 9)) - &m).abs().max() < 1e-15);
        assert!(j.view((0, 9), (9, 9)).abs().max() < 1e-15);
        assert!(j.view((9, 0), (9, 9)).abs().max() < 1e-250);
    }

    #[test]
    fn scalar_preconditioner_closed_form() {
        let (m, k, q, beta, gamma, dt) = (1.0, 1.0, 1.0, 0.5, 0.0025, 1e-5);
        let ops = MeshOperators {
            m1: scalar(m),
            k2: scalar(q),
            version: 0,
        };
        let model = PhysicsModel::new(Polynomial::zero(), Polynomial::constant(1.0), beta, gamma, 0.0).unwrap();
        let sys = BlockSystem::new(&ops, scalar(k), &model, dt, &[false]);
        let (f0, f1) = (0.7, -0.4);
        let (x0, x1) = apply_schur_preconditioner(&sys, InnerSolver::Direct, &[f0], &[f1]).unwrap();
        let ex0 = f0 / m;
        let s1 = m + dt.sqrt() * (beta * m + gamma * q);
        let s2 = m + dt.sqrt() * k;
        let shat = s1 * s2 / m;
        let ex1 = (f1 + (beta * m + gamma * q) * ex0) / shat;
        assert!((x0[0] - ex0).abs() < 1e-15);
        assert!((x1[0] - ex1).abs() < 1e-15);
    }

    #[test]
    fn preconditioner_matches_dense_block_inverse() {
        let mesh = generate_rect_mesh(3, 3, Rect::new(0.0, 1.0, 0.0, 1.0), SideSet::NONE).unwrap();
        let model = film_model();
        let u = bumpy(&mesh);
        let st = FieldState::new(u.clone(), vec![0.0; u.len()], 0.0).unwrap();
        let cfg = TimeStepperConfig::with_dt(0.05);
        let sys = build_jacobian(&mesh, &model, &st, &cfg).unwrap();
        let n = mesh.num_nodes();
        let m1 = dense_op(&sys.m1);
        let k1 = dense_op(&sys.k1);
        let ell = dense_op(&sys.k2) * model.gamma + &m1 * model.beta;
        let sq = cfg.dt.sqrt();
        let s1 = &m1 + &ell * sq;
        let s2 = &m1 + &k1 * sq;
        let shat = &s1 * m1.clone().try_inverse().unwrap() * &s2;
        let mut p = DMatrix::zeros(2 * n, 2 * n);
        p.view_mut((0, 0), (n, n)).copy_from(&m1);
        p.view_mut((n, 0), (n, n)).copy_from(&(-&ell));
        p.view_mut((n, n), (n, n)).copy_from(&shat);
        let rhs = DVector::from_fn(2 * n, |i, _| ((i * 7) % 5) as f64 - 2.0);
        let exact = p.lu().solve(&rhs).unwrap();
        let (x0, x1) = apply_schur_preconditioner(&sys, InnerSolver::Direct, &rhs.as_slice()[..n], &rhs.as_slice()[n..]).unwrap();
        for i in 0..n {
            assert!((x0[i] - exact[i]).abs() < 1e-10);
            assert!((x1[i] - exact[n + i]).abs() < 1e-10);
        }
    }

    #[test]
    fn jacobian_w_block_matches_finite_difference() {
        let mesh = generate_rect_mesh(2, 2, Rect::new(0.0, 1.0, 0.0, 1.0), SideSet::NONE).unwrap();
        let model = film_model();
        let u = bumpy(&mesh);
        let n = u.len();
        let st = FieldState::new(u.clone(), vec![0.1; n], 0.0).unwrap();
        let cfg = TimeStepperConfig::with_dt(0.05);
        let sys = build_jacobian(&mesh, &model, &st, &cfg).unwrap();
        let dir: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let eps = 1e-3;
        let plus = FieldState::new(u.clone(), st.w.iter().zip(&dir).map(|(w, d)| w + eps * d).collect(), 0.0).unwrap();
        let (a0, a1) = imex_residual(&mesh, &model, &st, &st, &cfg).unwrap();
        let (b0, b1) = imex_residual(&mesh, &model, &st, &plus, &cfg).unwrap();
        let mut x = vec![0.0; 2 * n];
        x[n..].copy_from_slice(&dir);
        let mut jx = vec![0.0; 2 * n];
        LinearOperator::apply(&sys, &x, &mut jx);
        for i in 0..n {
            assert!(((b0[i] - a0[i]) / eps - jx[i]).abs() < 1e-12);
            assert!(((b1[i] - a1[i]) / eps - jx[n + i]).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_matches_dense_reimplementation() {
        let mesh = generate_rect_mesh(2, 2, Rect::new(0.0, 1.0, 0.0, 1.0), SideSet::BOTTOM_TOP).unwrap();
        let model = film_model();
        let n = mesh.num_nodes();
        let un = bumpy(&mesh);
        let st = FieldState::new(un.clone(), vec![0.05; n], 0.0).unwrap();
        let cu: Vec<f64> = un.iter().enumerate().map(|(i, u)| u + 0.01 * (i as f64).cos()).collect();
        let cw: Vec<f64> = (0..n).map(|i| 0.2 * (i as f64 * 0.5).sin()).collect();
        let cand = FieldState::new(cu.clone(), cw.clone(), 0.1).unwrap();
        let cfg = TimeStepperConfig::with_dt(0.1);
        let (f0, f1) = imex_residual(&mesh, &model, &st, &cand, &cfg).unwrap();

        let m1 = dense_op(&assemble_mass(&mesh).unwrap());
        let k2 = dense_op(&assemble_stiffness(&mesh).unwrap());
        let k1 = dense_op(&assemble_weighted_stiffness(&mesh, &cu, |u| u * u * u).unwrap());
        let conv = DVector::from_vec(assemble_convection(&mesh, &un, &model).unwrap());
        let (u1, w1, u0) = (DVector::from_vec(cu.clone()), DVector::from_vec(cw), DVector::from_vec(un.clone()));
        let e0 = &m1 * &u1 + &k1 * &w1 * cfg.dt - conv * cfg.dt - &m1 * &u0;
        let e1 = -&m1 * &u1 * model.beta - &k2 * &u1 * model.gamma + &m1 * &w1;
        for i in 0..n {
            let want = if mesh.dirichlet_mask()[i] { cu[i] - un[i] } else { e0[i] };
            assert!((f0[i] - want).abs() < 1e-13);
            assert!((f1[i] - e1[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn constant_state_is_a_fixed_point() {
        let mesh = generate_rect_mesh(4, 4, Rect::new(0.0, 1.0, 0.0, 1.0), SideSet::NONE).unwrap();
        let model = PhysicsModel::new(Polynomial::zero(), Polynomial::cubic(), 0.3, 0.01, 0.0).unwrap();
        let n = mesh.num_nodes();
        let st = FieldState::new(vec![0.4; n], vec![0.3 * 0.4; n], 0.0).unwrap();
        let (f0, f1) = imex_residual(&mesh, &model, &st, &st, &TimeStepperConfig::with_dt(0.1)).unwrap();
        assert!(norm_inf(&f0) < 1e-12 && norm_inf(&f1) < 1e-12);
        let (next, rep) = quasi_newton_step(&mesh, &model, &st, &TimeStepperConfig::with_dt(0.1)).unwrap();
        assert_eq!(rep.newton_iterations, 1);
        for i in 0..n {
            assert!((next.u[i] - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_dt_limit_residual_is_mass_difference() {
        let mesh = generate_rect_mesh(3, 2, Rect::new(0.0, 1.0, 0.0, 1.0), SideSet::NONE).unwrap();
        let model = film_model();
        let n = mesh.num_nodes();
        let un = bumpy(&mesh);
        let st = FieldState::new(un.clone(), vec![0.0; n], 0.0).unwrap();
        let cu: Vec<f64> = un.iter().map(|u| u * 1.1).collect();
        let cand = FieldState::new(cu.clone(), vec![1.0; n], 0.0).unwrap();
        let cfg = TimeStepperConfig {
            dt: 0.0,
            ..Default::default()
        };
        let (f0, _) = imex_residual(&mesh, &model, &st, &cand, &cfg).unwrap();
        let m1 = assemble_mass(&mesh).unwrap();
        let diff: Vec<f64> = cu.iter().zip(&un).map(|(a, b)| a - b).collect();
        let want = m1.mul(&diff);
        for i in 0..n {
            assert!((f0[i] - want[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn linear_problem_takes_one_newton_iteration_and_conserves_mass() {
        let mesh = generate_rect_mesh(10, 10, Rect::new(0.0, 1.0, 0.0, 1.0), SideSet::NONE).unwrap();
        let model = diffusion_model();
        let u: Vec<f64> = mesh
            .physical()
            .iter()
            .map(|p| (2.0 * std::f64::consts::PI * p[0]).cos() * (2.0 * std::f64::consts::PI * p[1]).cos() + 0.1)
            .collect();
        let w = consistent_w(&mesh, &model, &u).unwrap();
        let st = FieldState::new(u, w, 0.0).unwrap();
        let cfg = TimeStepperConfig::with_dt(1e-5);
        let (next, rep) = quasi_newton_step(&mesh, &model, &st, &cfg).unwrap();
        assert_eq!(rep.newton_iterations, 1);
        let m1 = assemble_mass(&mesh).unwrap();
        let before: f64 = m1.mul(&st.u).iter().sum();
        let after: f64 = m1.mul(&next.u).iter().sum();
        assert!((after - before).abs() <= 1e-10 * before.abs().max(1.0));
        assert!(rep.elliptic_residual <= 10.0 * cfg.newton_tol);
    }

    #[test]
    fn sweeps_and_direct_agree_on_the_step() {
        let mesh = generate_rect_mesh(6, 6, Rect::new(0.0, 1.0, 0.0, 1.0), SideSet::BOTTOM_TOP).unwrap();
        let model = film_model();
        let u = bumpy(&mesh);
        let w = consistent_w(&mesh, &model, &u).unwrap();
        let st = FieldState::new(u, w, 0.0).unwrap();
        let direct = quasi_newton_step(&mesh, &model, &st, &TimeStepperConfig::with_dt(0.01)).unwrap().0;
        let cfg = TimeStepperConfig {
            inner_solver: InnerSolver::Sweeps(4),
            ..TimeStepperConfig::with_dt(0.01)
        };
        let sweeps = quasi_newton_step(&mesh, &model, &st, &cfg).unwrap().0;
        for i in 0..st.len() {
            assert!((direct.u[i] - sweeps.u[i]).abs() < 1e-6);
        }
        for (i, &d) in mesh.dirichlet_mask().iter().enumerate() {
            if d {
                assert_eq!(direct.u[i], st.u[i]);
            }
        }
    }

    #[test]
    fn nonlinear_step_conserves_mass_under_neumann() {
        let mesh = generate_rect_mesh(8, 8, Rect::new(0.0, 1.0, 0.0, 1.0), SideSet::NONE).unwrap();
        let model = film_model();
        let u = bumpy(&mesh);
        let w = consistent_w(&mesh, &model, &u).unwrap();
        let mut st = FieldState::new(u, w, 0.0).unwrap();
        let m1 = assemble_mass(&mesh).unwrap();
        let mut stepper = TimeStepper::new(TimeStepperConfig::with_dt(0.02)).unwrap();
        for _ in 0..3 {
            let before: f64 = m1.mul(&st.u).iter().sum();
            let (next, rep) = stepper.step(&mesh, &model, &st).unwrap();
            let after: f64 = m1.mul(&next.u).iter().sum();
            assert!((after - before).abs() <= 1e-9 * before.abs());
            assert!(rep.newton_iterations > 1);
            st = next;
        }
    }
}
