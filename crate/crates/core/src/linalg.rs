//! Sparse storage and Krylov solvers.
//!
//! Reductions are chunked with a fixed chunk size and summed sequentially, so
//! results do not depend on the number of worker threads.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use rayon::prelude::*;

const CHUNK: usize = 4096;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// y += alpha * x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.par_iter_mut().zip(x.par_iter()).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// Symmetric sparse matrix in CSR form (both triangles stored).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseSymmetric {
    /// Builds from per-row (column, value) lists; duplicates are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let merged: Vec<Vec<(usize, f64)>> = rows
            .into_par_iter()
            .map(|mut r| {
                r.sort_by_key(|e| e.0);
                let mut out: Vec<(usize, f64)> = Vec::with_capacity(r.len());
                for (c, v) in r {
                    match out.last_mut() {
                        Some(last) if last.0 == c => last.1 += v,
                        _ => out.push((c, v)),
                    }
                }
                out
            })
            .collect();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let nnz: usize = merged.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for r in merged {
            for (c, v) in r {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
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

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let r = self.row_ptr[i]..self.row_ptr[i + 1];
            *yi = self.cols[r.clone()].iter().zip(&self.vals[r]).map(|(&c, &v)| v * x[c]).sum();
        });
    }

    /// Principal submatrix on the given (sorted) index set.
    pub fn submatrix(&self, idx: &[usize]) -> SparseSymmetric {
        let mut pos = vec![usize::MAX; self.n];
        for (k, &i) in idx.iter().enumerate() {
            pos[i] = k;
        }
        let rows = idx
            .iter()
            .map(|&i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .filter(|&k| pos[self.cols[k]] != usize::MAX)
                    .map(|k| (pos[self.cols[k]], self.vals[k]))
                    .collect()
            })
            .collect();
        SparseSymmetric::from_rows(rows)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                worst = worst.max((self.vals[k] - self.get(self.cols[k], i)).abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Preconditioned conjugate gradients for `A x = b`.
///
/// `x` holds the initial guess on entry. Stops when ‖r‖ ≤ tol·‖b‖.
pub fn cg(
    apply: impl Fn(&[f64], &mut [f64]),
    precond: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<SolveStats> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats { iterations: 0, residual: 0.0 });
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    r.par_iter_mut().zip(b.par_iter()).for_each(|(ri, bi)| *ri = bi - *ri);
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = norm(&r) / bnorm;
    let mut it = 0;
    while res > tol {
        if it >= max_iter {
            return Err(Error::NotConverged { iterations: it, residual: res });
        }
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(z.par_iter()).for_each(|(pi, zi)| *pi = zi + beta * *pi);
        res = norm(&r) / bnorm;
        it += 1;
    }
    Ok(SolveStats { iterations: it, residual: res })
}

/// Diagonal scaling as a preconditioner.
pub fn jacobi_precond(inv_diag: &[f64]) -> impl Fn(&[f64], &mut [f64]) + '_ {
    move |r, z| z.par_iter_mut().zip(r.par_iter().zip(inv_diag.par_iter())).for_each(|(zi, (ri, di))| *zi = ri * di)
}

/// Block-diagonal preconditioner over contiguous index ranges.
#[derive(Debug, Clone)]
pub struct BlockJacobi {
    starts: Vec<usize>,
    inverses: Vec<DMatrix<f64>>,
}

impl BlockJacobi {
    /// `sizes` partitions 0..n into consecutive blocks.
    pub fn new(a: &SparseSymmetric, sizes: &[usize]) -> Self {
        let mut starts = Vec::with_capacity(sizes.len());
        let mut s = 0;
        for &k in sizes {
            starts.push(s);
            s += k;
        }
        assert_eq!(s, a.n, "blocks must cover the matrix");
        let inverses = starts
            .par_iter()
            .zip(sizes.par_iter())
            .map(|(&s, &k)| {
                let block = DMatrix::from_fn(k, k, |i, j| a.get(s + i, s + j));
                block
                    .clone()
                    .cholesky()
                    .map(|c| c.inverse())
                    .unwrap_or_else(|| DMatrix::from_diagonal(&block.diagonal().map(|d| 1.0 / d)))
            })
            .collect();
        Self { starts, inverses }
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let mut chunks: Vec<&mut [f64]> = Vec::with_capacity(self.starts.len());
        let mut rest = z;
        for inv in &self.inverses {
            let (head, tail) = rest.split_at_mut(inv.nrows());
            chunks.push(head);
            rest = tail;
        }
        chunks.into_par_iter().zip(self.starts.par_iter().zip(self.inverses.par_iter())).for_each(|(zb, (&s, inv))| {
            let k = inv.nrows();
            for i in 0..k {
                zb[i] = (0..k).map(|j| inv[(i, j)] * r[s + j]).sum();
            }
        });
    }
}
