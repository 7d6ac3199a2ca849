//! CSR storage, Krylov solvers and the small direct solvers used as oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

pub const DEFAULT_TOL: f64 = 1e-12;

/// Rows per rayon task in the matrix-vector product.
const MATVEC_CHUNK: usize = 2048;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinsolveError {
    #[error("no convergence after {} iterations (relative residual {:e})", .0.iterations, .0.residual)]
    NotConverged(Box<SolveOutput>),
    #[error("matrix is not symmetric: |a_ij - a_ji| = {diff:e} at ({row}, {col})")]
    AsymmetricInput { row: usize, col: usize, diff: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is singular")]
    Singular,
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutput {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative true residual `‖b − Ax‖/‖b‖`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preconditioner {
    None,
    #[default]
    Jacobi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from `(row, col, value)` triplets; duplicates are summed.
    ///
    /// The sort is stable, so duplicate contributions are added in input
    /// order and the result is independent of thread scheduling upstream.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Self {
        triplets.par_sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len() / 2);
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len() / 2);
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < n_rows && c < n_cols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|k| vals[k]).unwrap_or(0.0)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
    }

    /// `y = A x`; rows are independent, so the result is bit-identical for
    /// any thread count.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        y.par_chunks_mut(MATVEC_CHUNK)
            .enumerate()
            .for_each(|(chunk, ys)| {
                let base = chunk * MATVEC_CHUNK;
                for (k, yi) in ys.iter_mut().enumerate() {
                    *yi = self.row_dot(base + k, x);
                }
            });
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                t.push((c, i, v));
            }
        }
        Self::from_triplets(self.n_cols, self.n_rows, t)
    }

    /// `(A + Aᵀ)/2`.
    pub fn symmetric_part(&self) -> Self {
        let mut t = Vec::with_capacity(2 * self.nnz());
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                t.push((i, c, 0.5 * v));
                t.push((c, i, 0.5 * v));
            }
        }
        Self::from_triplets(self.n_rows, self.n_cols, t)
    }

    /// Submatrix on `rows × cols`, given as sorted index lists.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.n_cols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut t = Vec::new();
        for (ri, &r) in rows.iter().enumerate() {
            let (cs, vs) = self.row(r);
            for (&c, &v) in cs.iter().zip(vs) {
                if col_map[c] != usize::MAX {
                    t.push((ri, col_map[c], v));
                }
            }
        }
        Self::from_triplets(rows.len(), cols.len(), t)
    }

    /// Largest `|a_ij − a_ji|` over all stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                m = m.max((v - self.get(c, i)).abs());
            }
        }
        m
    }

    /// Half-bandwidth `max |i − j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n_rows)
            .flat_map(|i| self.row(i).0.iter().map(move |&c| i.abs_diff(c)))
            .max()
            .unwrap_or(0)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n_rows * self.n_cols];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                d[i * self.n_cols + c] = v;
            }
        }
        d
    }

    /// Sample 100 stored entries and compare each with its transpose.
    pub fn check_symmetric_sampled(&self, tol: f64, seed: u64) -> Result<(), LinsolveError> {
        if self.nnz() == 0 {
            return Ok(());
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let k = rng.gen_range(0..self.nnz());
            let row = self.row_ptr.partition_point(|&p| p <= k) - 1;
            let col = self.col_idx[k];
            let diff = (self.values[k] - self.get(col, row)).abs();
            if diff > tol * scale {
                return Err(LinsolveError::AsymmetricInput { row, col, diff });
            }
        }
        Ok(())
    }

    fn check_square(&self, b: &[f64]) -> Result<(), LinsolveError> {
        if self.n_rows != self.n_cols || b.len() != self.n_rows {
            return Err(LinsolveError::DimensionMismatch(format!(
                "{}x{} matrix, rhs of length {}",
                self.n_rows,
                self.n_cols,
                b.len()
            )));
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

struct Precond {
    inv_diag: Option<Vec<f64>>,
}

impl Precond {
    fn new(a: &CsrMatrix, kind: Preconditioner) -> Self {
        let inv_diag = match kind {
            Preconditioner::None => None,
            Preconditioner::Jacobi => Some(
                a.diagonal()
                    .into_iter()
                    .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
                    .collect(),
            ),
        };
        Self { inv_diag }
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match &self.inv_diag {
            None => z.copy_from_slice(r),
            Some(d) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(d) {
                    *zi = ri * di;
                }
            }
        }
    }
}

fn true_residual(a: &CsrMatrix, b: &[f64], x: &[f64], r: &mut [f64]) -> f64 {
    a.matvec_into(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    norm(r)
}

/// Preconditioned conjugate gradients for symmetric positive definite `A`.
///
/// Symmetry is checked on a sample of 100 entries first. Convergence is
/// declared on the true residual `‖b − Ax‖ ≤ tol·‖b‖`.
pub fn cg(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    precond: Preconditioner,
) -> Result<SolveOutput, LinsolveError> {
    a.check_square(b)?;
    a.check_symmetric_sampled(1e-12, 0x5eed)?;
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(SolveOutput { x: vec![0.0; n], iterations: 0, residual: 0.0 });
    }
    let pc = Precond::new(a, precond);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut it = 0;
    let mut best = (f64::INFINITY, x.clone());
    // outer loop restarts from the true residual if recursion drifted
    for _restart in 0..4 {
        let mut rnorm = true_residual(a, b, &x, &mut r);
        if rnorm < best.0 {
            best = (rnorm, x.clone());
        }
        if rnorm <= tol * bnorm || it >= max_iter {
            break;
        }
        pc.apply(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while it < max_iter {
            it += 1;
            a.matvec_into(&p, &mut q);
            let pq = dot(&p, &q);
            if pq == 0.0 || !pq.is_finite() {
                break;
            }
            let alpha = rz / pq;
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &q, &mut r);
            rnorm = norm(&r);
            if rnorm <= 0.5 * tol * bnorm {
                break;
            }
            pc.apply(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
        }
    }
    finish(a, b, bnorm, tol, x, it, best)
}

fn finish(
    a: &CsrMatrix,
    b: &[f64],
    bnorm: f64,
    tol: f64,
    x: Vec<f64>,
    iterations: usize,
    best: (f64, Vec<f64>),
) -> Result<SolveOutput, LinsolveError> {
    let mut r = vec![0.0; b.len()];
    let rnorm = true_residual(a, b, &x, &mut r);
    let (rnorm, x) = if rnorm <= best.0 { (rnorm, x) } else { best };
    let out = SolveOutput { x, iterations, residual: rnorm / bnorm };
    if rnorm <= tol * bnorm {
        Ok(out)
    } else {
        Err(LinsolveError::NotConverged(Box::new(out)))
    }
}

/// Preconditioned BiCGSTAB for general square `A`.
///
/// On breakdown (`ρ` or `⟨r̂, v⟩` vanishing) the iteration restarts from the
/// current iterate with a perturbed shadow vector, at most three times.
pub fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    precond: Preconditioner,
) -> Result<SolveOutput, LinsolveError> {
    a.check_square(b)?;
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(SolveOutput { x: vec![0.0; n], iterations: 0, residual: 0.0 });
    }
    let pc = Precond::new(a, precond);
    let mut rng = ChaCha8Rng::seed_from_u64(0xb1c6);
    let mut x = vec![0.0; n];
    let mut r = vec![0.0; n];
    let (mut p, mut v) = (vec![0.0; n], vec![0.0; n]);
    let (mut phat, mut shat, mut t) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut it = 0;
    let mut best = (f64::INFINITY, x.clone());
    let mut breakdowns = 0;
    // restarts: breakdown recovery plus true-residual refreshes
    for restart in 0..8 {
        let rnorm0 = true_residual(a, b, &x, &mut r);
        if rnorm0 < best.0 {
            best = (rnorm0, x.clone());
        }
        if rnorm0 <= tol * bnorm || it >= max_iter {
            break;
        }
        let mut rhat = r.clone();
        if restart > 0 {
            let scale = rnorm0 / (n as f64).sqrt();
            for ri in rhat.iter_mut() {
                *ri += 1e-3 * scale * rng.gen_range(-1.0..1.0);
            }
        }
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        p.fill(0.0);
        v.fill(0.0);
        let mut broke = false;
        while it < max_iter {
            it += 1;
            let rho_new = dot(&rhat, &r);
            if rho_new.abs() < 1e-300 || omega == 0.0 {
                broke = true;
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for ((pi, ri), vi) in p.iter_mut().zip(&r).zip(&v) {
                *pi = ri + beta * (*pi - omega * vi);
            }
            pc.apply(&p, &mut phat);
            a.matvec_into(&phat, &mut v);
            let rv = dot(&rhat, &v);
            if rv.abs() < 1e-300 || !rv.is_finite() {
                broke = true;
                break;
            }
            alpha = rho / rv;
            // s overwrites r
            axpy(-alpha, &v, &mut r);
            if norm(&r) <= 0.5 * tol * bnorm {
                axpy(alpha, &phat, &mut x);
                break;
            }
            pc.apply(&r, &mut shat);
            a.matvec_into(&shat, &mut t);
            let tt = dot(&t, &t);
            omega = if tt > 0.0 { dot(&t, &r) / tt } else { 0.0 };
            axpy(alpha, &phat, &mut x);
            axpy(omega, &shat, &mut x);
            axpy(-omega, &t, &mut r);
            if norm(&r) <= 0.5 * tol * bnorm {
                break;
            }
        }
        if broke {
            breakdowns += 1;
            if breakdowns > 3 {
                break;
            }
        }
    }
    finish(a, b, bnorm, tol, x, it, best)
}

/// Krylov dimension between GMRES restarts.
pub const GMRES_RESTART: usize = 60;

/// Restarted GMRES with right preconditioning, for nonsymmetric systems on
/// which BiCGSTAB stagnates. Each restart recomputes the true residual.
pub fn gmres(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    precond: Preconditioner,
) -> Result<SolveOutput, LinsolveError> {
    a.check_square(b)?;
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(SolveOutput { x: vec![0.0; n], iterations: 0, residual: 0.0 });
    }
    let pc = Precond::new(a, precond);
    let m = GMRES_RESTART.min(n.max(1));
    let mut x = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut it = 0;
    let mut best = (f64::INFINITY, x.clone());
    loop {
        let beta = true_residual(a, b, &x, &mut r);
        if beta < best.0 {
            best = (beta, x.clone());
        }
        if beta <= tol * bnorm || it >= max_iter {
            break;
        }
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        // column-major Hessenberg, h[j] has j + 2 entries
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(m);
        let (mut cs, mut sn): (Vec<f64>, Vec<f64>) = (Vec::with_capacity(m), Vec::with_capacity(m));
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && it < max_iter {
            it += 1;
            pc.apply(&basis[k], &mut z);
            a.matvec_into(&z, &mut w);
            let mut col = vec![0.0; k + 2];
            // modified Gram-Schmidt
            for (i, v) in basis.iter().enumerate() {
                col[i] = dot(&w, v);
                axpy(-col[i], v, &mut w);
            }
            col[k + 1] = norm(&w);
            for i in 0..k {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let rho = col[k].hypot(col[k + 1]);
            let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (col[k] / rho, col[k + 1] / rho) };
            cs.push(c);
            sn.push(s);
            let hk1 = col[k + 1];
            col[k] = rho;
            col[k + 1] = 0.0;
            g[k + 1] = -s * g[k];
            g[k] *= c;
            h.push(col);
            k += 1;
            if hk1 == 0.0 || g[k].abs() <= 0.5 * tol * bnorm {
                break;
            }
            basis.push(w.iter().map(|v| v / hk1).collect());
        }
        // back substitution for the k Krylov coefficients
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[j][i] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut dz = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            axpy(*yj, &basis[j], &mut dz);
        }
        pc.apply(&dz, &mut z);
        axpy(1.0, &z, &mut x);
    }
    finish(a, b, bnorm, tol, x, it, best)
}

/// Dense LU with partial pivoting; the oracle for small systems.
pub fn dense_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>, LinsolveError> {
    a.check_square(b)?;
    let n = b.len();
    let mut m = a.to_dense();
    let mut x = b.to_vec();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| m[r * n + col].abs().total_cmp(&m[s * n + col].abs()))
            .unwrap();
        if m[piv * n + col] == 0.0 {
            return Err(LinsolveError::Singular);
        }
        if piv != col {
            for k in 0..n {
                m.swap(piv * n + k, col * n + k);
            }
            x.swap(piv, col);
        }
        let d = m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] / d;
            if f != 0.0 {
                for k in col..n {
                    m[r * n + k] -= f * m[col * n + k];
                }
                x[r] -= f * x[col];
            }
        }
    }
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| m[i * n + k] * x[k]).sum();
        x[i] = (x[i] - s) / m[i * n + i];
    }
    Ok(x)
}

/// Banded Cholesky factorization of a symmetric matrix; succeeds iff the
/// matrix is numerically positive definite.
///
/// Pivots below `1e-14·max|aᵢᵢ|` count as failure.
pub fn banded_cholesky(a: &CsrMatrix) -> Result<(), LinsolveError> {
    let n = a.n_rows;
    let bw = a.bandwidth();
    let w = bw + 1;
    // band[i * w + k] holds L[i][i - bw + k]
    let mut band = vec![0.0; n * w];
    for i in 0..n {
        let (cols, vals) = a.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            if c <= i {
                band[i * w + (c + bw - i)] = v;
            }
        }
    }
    let dmax = a.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        let lo = i.saturating_sub(bw);
        for j in lo..=i {
            let jlo = j.saturating_sub(bw).max(lo);
            let mut s = band[i * w + (j + bw - i)];
            for k in jlo..j {
                s -= band[i * w + (k + bw - i)] * band[j * w + (k + bw - j)];
            }
            if j == i {
                if !(s > 1e-14 * dmax) {
                    return Err(LinsolveError::NotPositiveDefinite { pivot: i, value: s });
                }
                band[i * w + bw] = s.sqrt();
            } else {
                band[i * w + (j + bw - i)] = s / band[j * w + bw];
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn duplicates_merge_and_sort() {
        let a = CsrMatrix::from_triplets(2, 3, vec![(1, 2, 1.0), (0, 1, 2.0), (1, 0, 3.0), (1, 2, 4.0)]);
        assert_eq!(a.row_ptr, vec![0, 1, 3]);
        assert_eq!(a.col_idx, vec![1, 0, 2]);
        assert_eq!(a.values, vec![2.0, 3.0, 5.0]);
        assert_eq!(a.get(1, 2), 5.0);
        assert_eq!(a.get(0, 0), 0.0);
    }

    #[test]
    fn identity_one_iteration() {
        let a = CsrMatrix::identity(5);
        let b = vec![1.0, -2.0, 3.0, 0.5, 7.0];
        let out = cg(&a, &b, 1e-12, 100, Preconditioner::None).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.x, b);
    }

    #[test]
    fn cg_matches_dense_on_laplacian() {
        let a = laplace_1d(10);
        let mut b = vec![0.0; 10];
        b[0] = 1.0;
        let x = cg(&a, &b, 1e-14, 200, Preconditioner::Jacobi).unwrap().x;
        let y = dense_solve(&a, &b).unwrap();
        // exact: x_i = (n − i)/(n + 1)
        for i in 0..10 {
            assert!((x[i] - y[i]).abs() < 1e-12);
            assert!((y[i] - (10 - i) as f64 / 11.0).abs() < 1e-13);
        }
    }

    #[test]
    fn cg_rejects_asymmetric() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 2.0), (0, 1, 1.0), (1, 1, 2.0)]);
        assert!(matches!(
            cg(&a, &[1.0, 1.0], 1e-12, 10, Preconditioner::Jacobi),
            Err(LinsolveError::AsymmetricInput { .. })
        ));
    }

    #[test]
    fn not_converged_returns_best_iterate() {
        let a = laplace_1d(50);
        let b = vec![1.0; 50];
        match cg(&a, &b, 1e-12, 3, Preconditioner::None) {
            Err(LinsolveError::NotConverged(out)) => {
                assert_eq!(out.x.len(), 50);
                assert!(out.residual > 1e-12 && out.residual.is_finite());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bicgstab_symmetric_agrees_with_cg() {
        let a = laplace_1d(40);
        let b: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
        let x1 = cg(&a, &b, 1e-13, 400, Preconditioner::Jacobi).unwrap().x;
        let x2 = bicgstab(&a, &b, 1e-13, 400, Preconditioner::Jacobi).unwrap().x;
        for (u, v) in x1.iter().zip(&x2) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn bicgstab_random_dominant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        let mut t = Vec::new();
        for i in 0..n {
            let mut off = 0.0;
            for j in 0..n {
                if i != j && rng.gen_bool(0.2) {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    off += v.abs();
                    t.push((i, j, v));
                }
            }
            t.push((i, i, off + 1.0));
        }
        let a = CsrMatrix::from_triplets(n, n, t);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = bicgstab(&a, &b, 1e-13, 1000, Preconditioner::Jacobi).unwrap().x;
        let y = dense_solve(&a, &b).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn gmres_nonsymmetric_indefinite() {
        // convection-diffusion stencil with a sign-indefinite shift, n beyond one restart
        let n = 150;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 - 0.3 * ((i % 7) as f64 - 3.0)));
            if i > 0 {
                t.push((i, i - 1, -1.2));
                t.push((i - 1, i, -0.8));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, t);
        let b: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let out = gmres(&a, &b, 1e-12, 5000, Preconditioner::Jacobi).unwrap();
        assert!(out.iterations > GMRES_RESTART);
        let y = dense_solve(&a, &b).unwrap();
        let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (u, v) in out.x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-8 * scale);
        }
    }

    #[test]
    fn cholesky_detects_indefinite() {
        assert!(banded_cholesky(&laplace_1d(30)).is_ok());
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(banded_cholesky(&a), Err(LinsolveError::NotPositiveDefinite { pivot: 1, .. })));
    }

    #[test]
    fn submatrix_and_symmetric_part() {
        let a = CsrMatrix::from_triplets(3, 3, vec![(0, 1, 2.0), (1, 0, 4.0), (2, 2, 1.0), (1, 2, 6.0)]);
        let s = a.symmetric_part();
        assert_eq!(s.get(0, 1), 3.0);
        assert_eq!(s.get(2, 1), 3.0);
        assert_eq!(s.asymmetry(), 0.0);
        let sub = a.submatrix(&[1, 2], &[1, 2]);
        assert_eq!(sub.to_dense(), vec![0.0, 6.0, 0.0, 1.0]);
    }
}
