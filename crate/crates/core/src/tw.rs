//! One-dimensional traveling waves: Rankine–Hugoniot speeds and the profile
//! boundary value problem
//!
//! ```text
//! u' = v,  v' = w,
//! w' = [s(u − u₊) − (F(u) − F(u₊)) + βK(u)v] / (γK(u)),
//! u(ζ₋) = u₋,  w(ζ₋) = 0,  u(ζ₊) = u₊,
//! ```
//!
//! solved by second-order box collocation and damped Newton.

use crate::error::{Error, Result};
use crate::fem::{PhysicsModel, Polynomial};

/// `s = (F(a) − F(b)) / (a − b)`
pub fn rankine_hugoniot_speed(flux: &Polynomial, u_minus: f64, u_plus: f64) -> Result<f64> {
    if u_minus == u_plus || !u_minus.is_finite() || !u_plus.is_finite() {
        return Err(Error::InvalidArgument("Rankine-Hugoniot speed needs two distinct finite states".into()));
    }
    Ok((flux.eval(u_minus) - flux.eval(u_plus)) / (u_minus - u_plus))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwProblem {
    /// Flux, mobility, β and γ are used; the frame speed is ignored.
    pub model: PhysicsModel,
    pub u_minus: f64,
    pub u_plus: f64,
    pub interval: (f64, f64),
    pub n_ode: usize,
    pub newton_tol: f64,
    pub newton_max: usize,
    /// Centre and width of the tanh initial guess; the half-height
    /// crossing of the solution is pinned at the centre.
    pub guess_center: f64,
    pub guess_width: f64,
}

impl TwProblem {
    pub fn new(model: PhysicsModel, u_minus: f64, u_plus: f64) -> Self {
        TwProblem {
            model,
            u_minus,
            u_plus,
            interval: (-2.5, 2.5),
            n_ode: 2000,
            newton_tol: 1e-9,
            newton_max: 50,
            guess_center: 0.5,
            guess_width: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.u_minus == self.u_plus {
            return Err(Error::InvalidArgument("end states must differ".into()));
        }
        if self.n_ode < 100 {
            return Err(Error::InvalidArgument("at least 100 grid intervals are required".into()));
        }
        if !(self.interval.1 > self.interval.0) {
            return Err(Error::InvalidArgument("empty interval".into()));
        }
        if !(self.guess_width > 0.0) {
            return Err(Error::InvalidArgument("initial guess width must be positive".into()));
        }
        let (lo, hi) = (self.u_minus.min(self.u_plus), self.u_minus.max(self.u_plus));
        for k in 0..=100 {
            let u = lo + (hi - lo) * k as f64 / 100.0;
            if !(self.model.mobility_at(u) > 0.0) {
                return Err(Error::InvalidArgument(format!("mobility is not positive at u = {u}")));
            }
        }
        Ok(())
    }

    fn step(&self) -> f64 {
        (self.interval.1 - self.interval.0) / self.n_ode as f64
    }
}

/// Sampled profile with derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct TwProfile {
    pub speed: f64,
    /// Converged `c` in `γK u‴ = s u − F(u) − c + βK u′`; equals
    /// `s u₊ − F(u₊)` up to the truncation of the interval.
    pub integration_constant: f64,
    pub zeta: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub d2u: Vec<f64>,
    pub newton_iterations: usize,
    /// Max-norm collocation residual at convergence.
    pub residual: f64,
}

impl TwProfile {
    pub fn len(&self) -> usize {
        self.zeta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeta.is_empty()
    }

    /// Linear interpolation of `u`, extended by the end values.
    pub fn value_at(&self, z: f64) -> f64 {
        let n = self.zeta.len();
        if z <= self.zeta[0] {
            return self.u[0];
        }
        if z >= self.zeta[n - 1] {
            return self.u[n - 1];
        }
        let h = (self.zeta[n - 1] - self.zeta[0]) / (n - 1) as f64;
        let k = (((z - self.zeta[0]) / h) as usize).min(n - 2);
        let t = (z - self.zeta[k]) / h;
        (1.0 - t) * self.u[k] + t * self.u[k + 1]
    }
}

/// Right-hand side with the integration constant `c = s u₊ − F(u₊)`
/// written explicitly: `w' = [s u − F(u) − c + βK(u)v] / (γK(u))`.
fn rhs(model: &PhysicsModel, s: f64, c: f64, y: [f64; 3]) -> [f64; 3] {
    let [u, v, w] = y;
    let k = model.mobility.eval(u);
    let num = s * u - model.flux.eval(u) - c + model.beta * k * v;
    [v, w, num / (model.gamma * k)]
}

/// Jacobian of `rhs` with respect to `(u, v, w)`, and `∂w'/∂c`.
fn rhs_jacobian(model: &PhysicsModel, s: f64, c: f64, y: [f64; 3]) -> ([[f64; 3]; 3], f64) {
    let [u, v, _] = y;
    let k = model.mobility.eval(u);
    let dk = model.mobility.derivative().eval(u);
    let df = model.flux.derivative().eval(u);
    let num = s * u - model.flux.eval(u) - c + model.beta * k * v;
    let dnum_du = s - df + model.beta * dk * v;
    let g = model.gamma;
    let d3_du = (dnum_du * k - num * dk) / (g * k * k);
    let d3_dv = model.beta / g;
    ([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [d3_du, d3_dv, 0.0]], -1.0 / (g * k))
}

const KL: usize = 4;
const KU: usize = 3;

/// Banded matrix with LU by partial pivoting. Row `i` stores columns
/// `i − KL ..= i + KL + KU`; the extra `KL` columns hold pivoting fill.
struct Banded {
    n: usize,
    a: Vec<[f64; 2 * KL + KU + 1]>,
}

impl Banded {
    fn new(n: usize) -> Self {
        Banded {
            n,
            a: vec![[0.0; 2 * KL + KU + 1]; n],
        }
    }

    fn slot(i: usize, j: usize) -> usize {
        j + KL - i
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i][Self::slot(i, j)] = v;
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        if j + KL < i || j > i + KL + KU {
            0.0
        } else {
            self.a[i][Self::slot(i, j)]
        }
    }

    /// LU factorization with partial pivoting, done in place.
    fn factor(mut self) -> Result<BandedLu> {
        let n = self.n;
        let mut piv = vec![0; n];
        for k in 0..n {
            let last = (k + KL).min(n - 1);
            let p = (k..=last)
                .max_by(|&x, &y| self.get(x, k).abs().total_cmp(&self.get(y, k).abs()))
                .unwrap();
            piv[k] = p;
            let pv = self.get(p, k);
            if pv == 0.0 || !pv.is_finite() {
                return Err(Error::ProfileNonConvergence(format!("singular collocation matrix at row {k}")));
            }
            let hi = (k + KL + KU).min(n - 1);
            if p != k {
                for j in k..=hi {
                    let (a, c) = (self.get(k, j), self.get(p, j));
                    self.set(k, j, c);
                    self.set(p, j, a);
                }
            }
            for i in k + 1..=last {
                let f = self.get(i, k) / pv;
                // the multiplier is kept in the eliminated slot
                self.set(i, k, f);
                if f == 0.0 {
                    continue;
                }
                for j in k + 1..=hi {
                    let v = self.get(i, j) - f * self.get(k, j);
                    self.set(i, j, v);
                }
            }
        }
        Ok(BandedLu { m: self, piv })
    }
}

struct BandedLu {
    m: Banded,
    piv: Vec<usize>,
}

impl BandedLu {
    fn solve(&self, b: &mut [f64]) {
        let n = self.m.n;
        for k in 0..n {
            b.swap(k, self.piv[k]);
            for i in k + 1..=(k + KL).min(n - 1) {
                b[i] -= self.m.get(i, k) * b[k];
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + KL + KU).min(n - 1) {
                s -= self.m.get(k, j) * b[j];
            }
            b[k] = s / self.m.get(k, k);
        }
    }
}

/// Collocation residual; unknown `3i + c` is component `c` at node `i`.
fn residual(p: &TwProblem, s: f64, c: f64, y: &[f64]) -> Vec<f64> {
    let n = p.n_ode;
    let h = p.step();
    let mut r = vec![0.0; 3 * n + 3];
    r[0] = y[0] - p.u_minus;
    r[1] = y[2];
    for i in 0..n {
        let a = [y[3 * i], y[3 * i + 1], y[3 * i + 2]];
        let b = [y[3 * i + 3], y[3 * i + 4], y[3 * i + 5]];
        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])];
        let f = rhs(&p.model, s, c, mid);
        for k in 0..3 {
            r[2 + 3 * i + k] = (b[k] - a[k]) / h - f[k];
        }
    }
    r[3 * n + 2] = y[3 * n] - p.u_plus;
    r
}

/// Banded Jacobian in `y` and the dense column `∂r/∂c`.
fn jacobian(p: &TwProblem, s: f64, c: f64, y: &[f64]) -> (Banded, Vec<f64>) {
    let n = p.n_ode;
    let h = p.step();
    let mut m = Banded::new(3 * n + 3);
    let mut col = vec![0.0; 3 * n + 3];
    m.set(0, 0, 1.0);
    m.set(1, 2, 1.0);
    for i in 0..n {
        let mid = [
            0.5 * (y[3 * i] + y[3 * i + 3]),
            0.5 * (y[3 * i + 1] + y[3 * i + 4]),
            0.5 * (y[3 * i + 2] + y[3 * i + 5]),
        ];
        let (jf, dc) = rhs_jacobian(&p.model, s, c, mid);
        for k in 0..3 {
            let row = 2 + 3 * i + k;
            for d in 0..3 {
                let diag = if k == d { 1.0 / h } else { 0.0 };
                m.set(row, 3 * i + d, -diag - 0.5 * jf[k][d]);
                m.set(row, 3 * i + 3 + d, diag - 0.5 * jf[k][d]);
            }
        }
        col[2 + 3 * i + 2] = -dc;
    }
    m.set(3 * n + 2, 3 * n, 1.0);
    (m, col)
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn initial_guess(p: &TwProblem) -> Vec<f64> {
    let n = p.n_ode;
    let h = p.step();
    let (mean, half) = (0.5 * (p.u_minus + p.u_plus), 0.5 * (p.u_minus - p.u_plus));
    let l = p.guess_width;
    let mut y = vec![0.0; 3 * n + 3];
    for i in 0..=n {
        let x = (p.interval.0 + i as f64 * h - p.guess_center) / l;
        let t = x.tanh();
        let sech2 = 1.0 - t * t;
        y[3 * i] = mean - half * t;
        y[3 * i + 1] = -half * sech2 / l;
        y[3 * i + 2] = 2.0 * half * sech2 * t / (l * l);
    }
    y[2] = 0.0;
    y
}

/// Collocation system bordered by the phase condition
/// `u(ζ_c) = (u₋ + u₊)/2` with the integration constant as extra unknown.
/// Pinning the phase removes the near-null translation mode that otherwise
/// makes Newton erratic on a truncated interval.
struct Bordered<'a> {
    p: &'a TwProblem,
    s: f64,
    phase_node: usize,
    phase_value: f64,
}

impl Bordered<'_> {
    fn residual(&self, y: &[f64], c: f64) -> (Vec<f64>, f64) {
        (residual(self.p, self.s, c, y), y[3 * self.phase_node] - self.phase_value)
    }

    fn norm(r: &(Vec<f64>, f64)) -> f64 {
        norm_inf(&r.0).max(r.1.abs())
    }

    /// Solves `[J col; eᵀ 0] (dy, dc) = (r, q)` by block elimination.
    fn solve(&self, lu: &BandedLu, col: &[f64], r: &(Vec<f64>, f64)) -> (Vec<f64>, f64) {
        let mut z1 = r.0.clone();
        lu.solve(&mut z1);
        let mut z2 = col.to_vec();
        lu.solve(&mut z2);
        let k = 3 * self.phase_node;
        let dc = (z1[k] - r.1) / z2[k];
        let dy = z1.iter().zip(&z2).map(|(a, b)| a - dc * b).collect();
        (dy, dc)
    }
}

/// Damped Newton from `(y, c)`; returns the iteration count and residual.
fn newton(sys: &Bordered, y: &mut Vec<f64>, c: &mut f64) -> Result<(usize, f64)> {
    let p = sys.p;
    let mut r = sys.residual(y, *c);
    let mut rn = Bordered::norm(&r);
    let mut iters = 0;
    while rn > p.newton_tol {
        if iters == p.newton_max {
            return Err(Error::ProfileNonConvergence(format!(
                "{iters} Newton iterations, residual {rn:e}"
            )));
        }
        iters += 1;
        let (jac, col) = jacobian(p, sys.s, *c, y);
        let lu = jac.factor()?;
        let (dy, dc) = sys.solve(&lu, &col, &r);
        let dn = norm_inf(&dy).max(dc.abs());
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=8 {
            let ty: Vec<f64> = y.iter().zip(&dy).map(|(a, d)| a - lambda * d).collect();
            let tc = *c - lambda * dc;
            let tr = sys.residual(&ty, tc);
            let tn = Bordered::norm(&tr);
            // Accept on a residual decrease or on the affine-invariant test
            // ‖J⁻¹F(trial)‖ < (1 − λ/4)‖δ‖.
            let mut ok = tn.is_finite() && tn < rn;
            if !ok && tn.is_finite() {
                let (sy, sc) = sys.solve(&lu, &col, &tr);
                ok = norm_inf(&sy).max(sc.abs()) < (1.0 - 0.25 * lambda) * dn;
            }
            if ok {
                *y = ty;
                *c = tc;
                rn = tn;
                r = tr;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::ProfileNonConvergence(format!(
                "damped Newton stalled at residual {rn:e}"
            )));
        }
    }
    Ok((iters, rn))
}

/// Solves the profile BVP for the given frame speed, with the front's
/// half-height crossing pinned at `guess_center`.
pub fn solve_tw_profile(p: &TwProblem, s: f64) -> Result<TwProfile> {
    p.validate()?;
    if !s.is_finite() {
        return Err(Error::InvalidArgument("speed must be finite".into()));
    }
    let n = p.n_ode;
    let h = p.step();
    let phase_node = (((p.guess_center - p.interval.0) / h).round().max(1.0) as usize).min(n - 1);
    let sys = Bordered {
        p,
        s,
        phase_node,
        phase_value: 0.5 * (p.u_minus + p.u_plus),
    };
    // A guess much wider than the front can stall; narrower ones are retried.
    let mut guess = p.clone();
    let mut attempt = 0;
    let (y, c, iters, rn) = loop {
        let mut y = initial_guess(&guess);
        let mut c = s * p.u_plus - p.model.flux.eval(p.u_plus);
        match newton(&sys, &mut y, &mut c) {
            Ok((it, rn)) => break (y, c, it, rn),
            Err(e) if attempt == 3 => return Err(e),
            Err(_) => {
                attempt += 1;
                guess.guess_width *= 0.5;
            }
        }
    };
    Ok(TwProfile {
        speed: s,
        integration_constant: c,
        zeta: (0..=n).map(|i| p.interval.0 + i as f64 * h).collect(),
        u: (0..=n).map(|i| y[3 * i]).collect(),
        du: (0..=n).map(|i| y[3 * i + 1]).collect(),
        d2u: (0..=n).map(|i| y[3 * i + 2]).collect(),
        newton_iterations: iters,
        residual: rn,
    })
}

/// `(u, u′)` pairs ordered by `ζ`.
pub fn phase_plane(profile: &TwProfile) -> Vec<(f64, f64)> {
    profile.u.iter().copied().zip(profile.du.iter().copied()).collect()
}

/// Max-norm residual of the once-integrated equation
/// `s(u − u₊) − (F(u) − F(u₊)) + K(u)(βu′ − γu‴) = 0` at interval midpoints,
/// with `u‴` from differences of the sampled `u″`.
pub fn first_integral_residual(p: &TwProblem, profile: &TwProfile) -> f64 {
    let m = &p.model;
    let mut worst: f64 = 0.0;
    for i in 0..profile.len() - 1 {
        let h = profile.zeta[i + 1] - profile.zeta[i];
        let u = 0.5 * (profile.u[i] + profile.u[i + 1]);
        let v = 0.5 * (profile.du[i] + profile.du[i + 1]);
        let u3 = (profile.d2u[i + 1] - profile.d2u[i]) / h;
        let k = m.mobility.eval(u);
        let e = profile.speed * (u - p.u_plus) - (m.flux.eval(u) - m.flux.eval(p.u_plus)) + k * (m.beta * v - m.gamma * u3);
        worst = worst.max(e.abs());
    }
    worst
}

/// Smallest `max |a(z) − b(z − shift)|` over shifts on a grid of step
/// `resolution` in `[-max_shift, max_shift]`, refined by golden-section
/// search. Returns `(distance, shift)`.
pub fn shifted_distance(
    samples: &[(f64, f64)],
    reference: &TwProfile,
    max_shift: f64,
    resolution: f64,
) -> (f64, f64) {
    let dist = |shift: f64| {
        samples
            .iter()
            .fold(0.0_f64, |m, (z, u)| m.max((u - reference.value_at(z - shift)).abs()))
    };
    let steps = (2.0 * max_shift / resolution).ceil() as i64;
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..=steps {
        let s = -max_shift + k as f64 * resolution;
        let d = dist(s);
        if d < best.0 {
            best = (d, s);
        }
    }
    let (mut a, mut b) = (best.1 - resolution, best.1 + resolution);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if dist(c) < dist(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let s = 0.5 * (a + b);
    let d = dist(s);
    if d < best.0 {
        (d, s)
    } else {
        best
    }
}
