//! Compressed-row sparse operators and the direct/iterative kernels built on
//! them: envelope Cholesky with reverse Cuthill–McKee ordering, symmetric
//! Gauss–Seidel sweeps, and Jacobi-preconditioned conjugate gradients.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Triplet accumulator; duplicates are summed on finalization.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        TripletBuilder { n, entries: Vec::new() }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        TripletBuilder {
            n,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n && col < self.n);
        self.entries.push((row, col, value));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sorts, sums duplicates and builds the CSR operator. Duplicates are
    /// summed in ascending value order, so the result is bitwise independent
    /// of the order in which triplets were added.
    pub fn finalize(mut self, symmetric: bool) -> SparseOperator {
        self.entries
            .sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut cols = Vec::with_capacity(self.entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &self.entries {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseOperator {
            n: self.n,
            row_ptr,
            cols,
            vals,
            symmetric,
        }
    }
}

/// Square sparse matrix in compressed row storage with sorted, unique columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    symmetric: bool,
}

impl SparseOperator {
    pub fn identity(n: usize) -> Self {
        SparseOperator {
            n,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: vec![1.0; n],
            symmetric: true,
        }
    }

    pub fn from_dense(a: &[Vec<f64>], symmetric: bool) -> Self {
        let mut b = TripletBuilder::new(a.len());
        for (i, row) in a.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    b.add(i, j, v);
                }
            }
        }
        b.finalize(symmetric)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `y = A x`
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            y[i] = s;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.apply(x, &mut y);
        y
    }

    /// `y += alpha * A x`
    pub fn apply_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            y[i] += alpha * s;
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `Σ cₖ Aₖ` over operators of equal dimension; sparsity patterns are merged.
    pub fn linear_combination(terms: &[(f64, &SparseOperator)]) -> Self {
        assert!(!terms.is_empty());
        let n = terms[0].1.n;
        let symmetric = terms.iter().all(|(_, a)| a.symmetric);
        let same_pattern = terms
            .iter()
            .all(|(_, a)| a.n == n && a.row_ptr == terms[0].1.row_ptr && a.cols == terms[0].1.cols);
        if same_pattern {
            let mut out = terms[0].1.clone();
            out.symmetric = symmetric;
            for (k, v) in out.vals.iter_mut().enumerate() {
                *v = terms.iter().map(|(c, a)| c * a.vals[k]).sum();
            }
            return out;
        }
        let cap = terms.iter().map(|(_, a)| a.nnz()).sum();
        let mut b = TripletBuilder::with_capacity(n, cap);
        for (c, a) in terms {
            assert_eq!(a.n, n, "dimension mismatch in linear combination");
            for i in 0..n {
                for (j, v) in a.row(i) {
                    b.add(i, j, c * v);
                }
            }
        }
        b.finalize(symmetric)
    }

    /// `max |A − Aᵀ|`
    pub fn asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m = m.max((v - self.get(j, i)).abs());
            }
        }
        m
    }

    /// Replaces the listed rows by identity rows.
    pub fn with_identity_rows(&self, mask: &[bool]) -> Self {
        let mut b = TripletBuilder::with_capacity(self.n, self.nnz());
        for i in 0..self.n {
            if mask[i] {
                b.add(i, i, 1.0);
            } else {
                for (j, v) in self.row(i) {
                    b.add(i, j, v);
                }
            }
        }
        b.finalize(!mask.iter().any(|&m| m) && self.symmetric)
    }

    /// Replaces the listed rows and columns by identity (symmetric elimination).
    pub fn with_identity_rows_cols(&self, mask: &[bool]) -> Self {
        let mut b = TripletBuilder::with_capacity(self.n, self.nnz());
        for i in 0..self.n {
            if mask[i] {
                b.add(i, i, 1.0);
                continue;
            }
            for (j, v) in self.row(i) {
                if !mask[j] {
                    b.add(i, j, v);
                }
            }
        }
        b.finalize(self.symmetric)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }
}

/// Reverse Cuthill–McKee ordering of the symmetric sparsity graph; returns
/// `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &SparseOperator) -> Vec<usize> {
    let n = a.dim();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).filter(|&(j, _)| j != i).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let start = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| degree[i])
            .expect("unvisited node");
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = a.row(v).map(|(j, _)| j).filter(|&j| !visited[j]).collect();
            nbrs.sort_by_key(|&j| (degree[j], j));
            for j in nbrs {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

/// Envelope (profile) Cholesky factorization `P A Pᵀ = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &SparseOperator) -> Result<Self> {
        let n = a.dim();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for (old_i, &i) in inv.iter().enumerate() {
            for (old_j, _) in a.row(old_i) {
                let j = inv[old_j];
                if j < i {
                    first[i] = first[i].min(j);
                } else if i < j {
                    first[j] = first[j].min(i);
                }
            }
        }
        let mut offset = vec![0usize; n + 1];
        for i in 0..n {
            offset[i + 1] = offset[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; offset[n]];
        for (old_i, &i) in inv.iter().enumerate() {
            for (old_j, v) in a.row(old_i) {
                let j = inv[old_j];
                if j <= i {
                    data[offset[i] + (j - first[i])] = v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let row_i = offset[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let row_j = offset[j];
                let s = data[row_i + (j - fi)]
                    - dot(&data[row_i + (k0 - fi)..row_i + (j - fi)], &data[row_j + (k0 - fj)..row_j + (j - fj)]);
                data[row_i + (j - fi)] = s / data[row_j + (j - fj)];
            }
            let l = &data[row_i..row_i + (i - fi)];
            let d = data[row_i + (i - fi)] - dot(l, l);
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite { pivot: perm[i], value: d });
            }
            data[row_i + (i - fi)] = d.sqrt();
        }
        Ok(Cholesky {
            n,
            perm,
            first,
            offset,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        self.solve_into(b, &mut x);
        x
    }

    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = self.offset[i];
            let s = y[i] - dot(&self.data[row..row + (i - fi)], &y[fi..i]);
            y[i] = s / self.data[row + (i - fi)];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = self.offset[i];
            y[i] /= self.data[row + (i - fi)];
            let yi = y[i];
            axpy(-yi, &self.data[row..row + (i - fi)], &mut y[fi..i]);
        }
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
    }
}

/// Inverse of a symmetric operator whose masked rows were replaced by
/// identity rows, applied through a Cholesky factor of the symmetrically
/// eliminated operator.
#[derive(Debug, Clone)]
pub struct DirichletSolver {
    op: SparseOperator,
    mask: Vec<bool>,
    factor: Cholesky,
}

impl DirichletSolver {
    pub fn new(op: &SparseOperator, mask: &[bool]) -> Result<Self> {
        let factor = Cholesky::factor(&op.with_identity_rows_cols(mask))?;
        Ok(DirichletSolver {
            op: op.clone(),
            mask: mask.to_vec(),
            factor,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.op.dim();
        let mut rhs = b.to_vec();
        if self.mask.iter().any(|&m| m) {
            for i in 0..n {
                if self.mask[i] {
                    continue;
                }
                for (j, v) in self.op.row(i) {
                    if self.mask[j] {
                        rhs[i] -= v * b[j];
                    }
                }
            }
        }
        self.factor.solve(&rhs)
    }
}

/// `k` symmetric Gauss–Seidel sweeps on `A x = b` starting from zero.
pub fn symmetric_gauss_seidel(a: &SparseOperator, diag: &[f64], b: &[f64], sweeps: usize) -> Vec<f64> {
    let n = a.dim();
    let mut x = vec![0.0; n];
    let relax = |i: usize, x: &mut Vec<f64>| {
        let mut s = b[i];
        for (j, v) in a.row(i) {
            if j != i {
                s -= v * x[j];
            }
        }
        x[i] = s / diag[i];
    };
    for _ in 0..sweeps {
        for i in 0..n {
            relax(i, &mut x);
        }
        for i in (0..n).rev() {
            relax(i, &mut x);
        }
    }
    x
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients from the initial guess in `x`.
/// Stops at `rel_tol` (relative to `‖b‖`) or `max_iter`, whichever is first.
pub fn pcg(a: &SparseOperator, b: &[f64], x: &mut [f64], rel_tol: f64, max_iter: usize) -> CgOutcome {
    let n = a.dim();
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
    let bnorm = norm2(b).max(f64::MIN_POSITIVE);
    let mut r = b.to_vec();
    a.apply_add(-1.0, x, &mut r);
    let mut rnorm = norm2(&r);
    if rnorm <= rel_tol * bnorm {
        return CgOutcome {
            iterations: 0,
            relative_residual: rnorm / bnorm,
        };
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rnorm = norm2(&r);
        if rnorm <= rel_tol * bnorm || it == max_iter {
            return CgOutcome {
                iterations: it,
                relative_residual: rnorm / bnorm,
            };
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    CgOutcome {
        iterations: max_iter,
        relative_residual: rnorm / bnorm,
    }
}

/// Four partial sums so the loop vectorizes.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}
