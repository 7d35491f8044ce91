//! Restarted, left-preconditioned GMRES.

use crate::error::{Error, Result};
use crate::sparse::{axpy, dot, norm2, SparseOperator};

pub trait LinearOperator {
    fn dim(&self) -> usize;
    /// `y = A x`
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

pub trait Preconditioner {
    /// `z ≈ A⁻¹ r`
    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()>;
}

impl LinearOperator for SparseOperator {
    fn dim(&self) -> usize {
        SparseOperator::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        SparseOperator::apply(self, x, y)
    }
}

pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        z.copy_from_slice(r);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresConfig {
    pub restart: usize,
    pub max_iter: usize,
    /// Relative tolerance on the preconditioned residual.
    pub tol: f64,
}

impl Default for GmresConfig {
    fn default() -> Self {
        GmresConfig {
            restart: 60,
            max_iter: 500,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOutcome {
    pub iterations: usize,
    /// Final preconditioned residual relative to the preconditioned right-hand side.
    pub relative_residual: f64,
}

/// Solves `A x = b` by GMRES applied to `P⁻¹ A x = P⁻¹ b`, starting from the
/// contents of `x`.
pub fn gmres(
    a: &dyn LinearOperator,
    precond: &dyn Preconditioner,
    b: &[f64],
    x: &mut [f64],
    cfg: &GmresConfig,
) -> Result<KrylovOutcome> {
    let n = a.dim();
    if b.len() != n || x.len() != n {
        return Err(Error::InvalidArgument("GMRES dimension mismatch".into()));
    }
    let m = cfg.restart.max(1);
    let mut work = vec![0.0; n];
    let mut r = vec![0.0; n];

    let mut pb = vec![0.0; n];
    precond.apply(b, &mut pb)?;
    let bnorm = norm2(&pb);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(KrylovOutcome {
            iterations: 0,
            relative_residual: 0.0,
        });
    }

    let mut v: Vec<Vec<f64>> = vec![vec![0.0; n]; m + 1];
    let mut hess = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];
    let mut total = 0usize;

    loop {
        // r = P⁻¹ (b − A x)
        a.apply(x, &mut work);
        for i in 0..n {
            work[i] = b[i] - work[i];
        }
        precond.apply(&work, &mut r)?;
        let beta = norm2(&r);
        let mut rel = beta / bnorm;
        if !rel.is_finite() {
            return Err(Error::NumericalBreakdown("non-finite GMRES residual".into()));
        }
        if rel <= cfg.tol {
            return Ok(KrylovOutcome {
                iterations: total,
                relative_residual: rel,
            });
        }
        if total >= cfg.max_iter {
            return Err(Error::KrylovNonConvergence {
                iterations: total,
                residual: rel,
            });
        }

        for i in 0..n {
            v[0][i] = r[i] / beta;
        }
        g.iter_mut().for_each(|e| *e = 0.0);
        g[0] = beta;
        let mut k_used = 0;

        for k in 0..m {
            a.apply(&v[k], &mut work);
            let (head, tail) = v.split_at_mut(k + 1);
            let w = &mut tail[0];
            precond.apply(&work, w)?;
            // Modified Gram–Schmidt.
            for (j, vj) in head.iter().enumerate() {
                let h = dot(w, vj);
                hess[j][k] = h;
                axpy(-h, vj, w);
            }
            let hnext = norm2(w);
            hess[k + 1][k] = hnext;
            if hnext > 0.0 {
                w.iter_mut().for_each(|e| *e /= hnext);
            }
            for j in 0..k {
                let t = cs[j] * hess[j][k] + sn[j] * hess[j + 1][k];
                hess[j + 1][k] = -sn[j] * hess[j][k] + cs[j] * hess[j + 1][k];
                hess[j][k] = t;
            }
            let denom = hess[k][k].hypot(hess[k + 1][k]);
            if denom == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = hess[k][k] / denom;
                sn[k] = hess[k + 1][k] / denom;
            }
            hess[k][k] = denom;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];

            total += 1;
            k_used = k + 1;
            rel = g[k + 1].abs() / bnorm;
            if rel <= cfg.tol || total >= cfg.max_iter || hnext == 0.0 {
                break;
            }
        }

        // Back substitution for the least-squares coefficients.
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= hess[i][j] * y[j];
            }
            y[i] = s / hess[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            axpy(*yj, &v[j], x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::TripletBuilder;
    use nalgebra::{DMatrix, DVector};

    struct Jacobi(Vec<f64>);

    impl Preconditioner for Jacobi {
        fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
            for i in 0..r.len() {
                z[i] = r[i] / self.0[i];
            }
            Ok(())
        }
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (*seed >> 11) as f64 / (1u64 << 53) as f64
    }

    #[test]
    fn identity_converges_in_one_iteration() {
        let a = SparseOperator::identity(7);
        let b: Vec<f64> = (0..7).map(|i| i as f64 - 3.0).collect();
        let mut x = vec![0.0; 7];
        let out = gmres(&a, &Identity, &b, &mut x, &GmresConfig::default()).unwrap();
        assert_eq!(out.iterations, 1);
        for (u, v) in x.iter().zip(&b) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn random_spd_matches_dense_solve() {
        let n = 20;
        let mut seed = 7;
        let r = DMatrix::from_fn(n, n, |_, _| lcg(&mut seed) - 0.5);
        let spd = &r * r.transpose() + DMatrix::identity(n, n) * (n as f64);
        let rhs = DVector::from_fn(n, |_, _| lcg(&mut seed));
        let exact = spd.clone().lu().solve(&rhs).unwrap();

        let mut tb = TripletBuilder::new(n);
        for i in 0..n {
            for j in 0..n {
                tb.add(i, j, spd[(i, j)]);
            }
        }
        let a = tb.finalize(true);
        let mut x = vec![0.0; n];
        let cfg = GmresConfig {
            tol: 1e-12,
            ..Default::default()
        };
        gmres(&a, &Jacobi(a.diagonal()), rhs.as_slice(), &mut x, &cfg).unwrap();
        for i in 0..n {
            assert!((x[i] - exact[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn restarts_still_converge() {
        let n = 40;
        let mut tb = TripletBuilder::new(n);
        for i in 0..n {
            tb.add(i, i, 3.0);
            if i > 0 {
                tb.add(i, i - 1, -1.2);
            }
            if i + 1 < n {
                tb.add(i, i + 1, -0.8);
            }
        }
        let a = tb.finalize(false);
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let cfg = GmresConfig {
            restart: 5,
            max_iter: 500,
            tol: 1e-10,
        };
        let out = gmres(&a, &Identity, &b, &mut x, &cfg).unwrap();
        assert!(out.iterations > 5);
        let mut ax = vec![0.0; n];
        LinearOperator::apply(&a, &x, &mut ax);
        for i in 0..n {
            assert!((ax[i] - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn reports_nonconvergence() {
        let n = 30;
        let mut tb = TripletBuilder::new(n);
        for i in 0..n {
            tb.add(i, (i + 1) % n, 1.0);
        }
        let a = tb.finalize(false);
        let mut b = vec![0.0; n];
        b[0] = 1.0;
        let mut x = vec![0.0; n];
        let cfg = GmresConfig {
            restart: 3,
            max_iter: 9,
            tol: 1e-10,
        };
        let err = gmres(&a, &Identity, &b, &mut x, &cfg).unwrap_err();
        assert!(matches!(err, Error::KrylovNonConvergence { iterations: 9, .. }));
    }
}
