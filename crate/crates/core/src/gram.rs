//! Growing symmetric Gram matrices and regularized solves against them.
//!
//! Both [`GramMatrix`] and [`RegularizedInverse`] keep the lower triangle in
//! row-packed order, so appending a sample is a push of one row.

use crate::error::{check_len, Error, Result};
use crate::linalg::{Cholesky, PSD_TOLERANCE};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Default hard cap on the number of rows a Gram matrix may grow to.
pub const DEFAULT_CAPACITY: usize = 10_000;

#[inline]
fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

/// Symmetric kernel matrix over a sample history, with its ridge regularizer.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    packed: Vec<f64>,
    dim: usize,
    lambda: f64,
    capacity: usize,
}

impl GramMatrix {
    pub fn new(lambda: f64) -> Result<Self> {
        Self::with_capacity_limit(lambda, DEFAULT_CAPACITY)
    }

    pub fn with_capacity_limit(lambda: f64, capacity: usize) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Argument(format!("regularizer must be positive, got {lambda}")));
        }
        Ok(Self { packed: Vec::new(), dim: 0, lambda, capacity })
    }

    /// Builds the Gram matrix of `samples` under `kernel` in one pass.
    pub fn from_samples<T>(
        lambda: f64,
        samples: &[T],
        mut kernel: impl FnMut(&T, &T) -> f64,
    ) -> Result<Self> {
        let mut g = Self::new(lambda)?;
        g.capacity = g.capacity.max(samples.len());
        for (i, s) in samples.iter().enumerate() {
            for t in &samples[..=i] {
                g.packed.push(kernel(s, t));
            }
            g.dim += 1;
        }
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        self.packed[row_start(i) + j]
    }

    /// Lower-triangle row `i` including its diagonal entry.
    pub fn row_lower(&self, i: usize) -> &[f64] {
        &self.packed[row_start(i)..row_start(i) + i + 1]
    }

    /// Appends `new_row` as the last row/column and `diag` as its diagonal.
    pub fn extend(&mut self, new_row: &[f64], diag: f64) -> Result<()> {
        check_len(self.dim, new_row.len())?;
        if self.dim + 1 > self.capacity {
            return Err(Error::Capacity { limit: self.capacity, requested: self.dim + 1 });
        }
        if !(diag >= 0.0) {
            return Err(Error::Argument(format!("diagonal entry must be non-negative, got {diag}")));
        }
        self.packed.extend_from_slice(new_row);
        self.packed.push(diag);
        self.dim += 1;
        Ok(())
    }

    /// Full dense form, row-major.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim;
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = self.packed[row_start(i) + j];
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        d
    }

    /// Solves `(G + lambda I) x = y` from a fresh Cholesky factorization.
    pub fn regularized_solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim, y.len())?;
        Cholesky::factor(&self.to_dense(), self.dim, self.lambda)?.solve(y)
    }
}

/// Result of bordering a [`RegularizedInverse`] with one more sample.
#[derive(Debug, Clone)]
pub struct Border {
    /// `(G + lambda I)^-1 k` against the matrix before the extension.
    pub projected: Vec<f64>,
    /// Schur complement `diag + lambda - k . projected`.
    pub schur: f64,
}

/// Explicit `(G + lambda I)^-1`, updated by block bordering each time the
/// underlying Gram matrix gains a row. Each extension costs `O(tau^2)`.
#[derive(Debug, Clone)]
pub struct RegularizedInverse {
    packed: Vec<f64>,
    dim: usize,
    lambda: f64,
}

impl RegularizedInverse {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Argument(format!("regularizer must be positive, got {lambda}")));
        }
        Ok(Self { packed: Vec::new(), dim: 0, lambda })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        self.packed[row_start(i) + j]
    }

    pub fn row_lower(&self, i: usize) -> &[f64] {
        &self.packed[row_start(i)..row_start(i) + i + 1]
    }

    /// `M v` for the current inverse `M`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim, v.len())?;
        let mut y = vec![0.0; self.dim];
        for i in 0..self.dim {
            let row = self.row_lower(i);
            let vi = v[i];
            let mut acc = row[i] * vi;
            for (j, (&m, &vj)) in row[..i].iter().zip(&v[..i]).enumerate() {
                acc += m * vj;
                y[j] += m * vi;
            }
            y[i] += acc;
        }
        Ok(y)
    }

    /// `v^T M v`.
    pub fn quad_form(&self, v: &[f64]) -> Result<f64> {
        check_len(self.dim, v.len())?;
        let mut total = 0.0;
        for i in 0..self.dim {
            let row = self.row_lower(i);
            let off: f64 = row[..i].iter().zip(&v[..i]).map(|(m, x)| m * x).sum();
            total += v[i] * (2.0 * off + row[i] * v[i]);
        }
        Ok(total)
    }

    /// Computes the bordering terms for a new sample whose kernel row against
    /// the history is `row` and whose self-kernel is `diag`, without mutating.
    pub fn border(&self, row: &[f64], diag: f64) -> Result<Border> {
        let projected = self.apply(row)?;
        let quad: f64 = projected.iter().zip(row).map(|(a, b)| a * b).sum();
        let mut schur = diag + self.lambda - quad;
        if schur - self.lambda < -PSD_TOLERANCE || !schur.is_finite() {
            return Err(Error::Numerical { pivot: self.dim, value: schur - self.lambda });
        }
        if schur < self.lambda {
            schur = self.lambda;
        }
        Ok(Border { projected, schur })
    }

    /// Applies a border produced by [`RegularizedInverse::border`] on the
    /// current state.
    pub fn apply_border(&mut self, border: &Border) {
        debug_assert_eq!(border.projected.len(), self.dim);
        let inv_s = 1.0 / border.schur;
        let projected = &border.projected;
        for i in 0..self.dim {
            let start = row_start(i);
            let ui = projected[i] * inv_s;
            for (m, &uj) in self.packed[start..=start + i].iter_mut().zip(&projected[..=i]) {
                *m += ui * uj;
            }
        }
        self.packed.extend(projected.iter().map(|u| -u * inv_s));
        self.packed.push(inv_s);
        self.dim += 1;
    }

    /// Borders the inverse with a new sample. The inverse is left untouched
    /// on error.
    pub fn extend(&mut self, row: &[f64], diag: f64) -> Result<Border> {
        let border = self.border(row, diag)?;
        self.apply_border(&border);
        Ok(border)
    }
}

/// Online kernel ridge regression: a Gram matrix, its regularized inverse, the
/// regression targets and the dual coefficients `(G + lambda I)^-1 targets`.
#[derive(Debug, Clone)]
pub struct KernelRidge {
    gram: GramMatrix,
    inverse: RegularizedInverse,
    targets: Vec<f64>,
    coef: Vec<f64>,
}

impl KernelRidge {
    pub fn new(lambda: f64, capacity: usize) -> Result<Self> {
        Ok(Self {
            gram: GramMatrix::with_capacity_limit(lambda, capacity)?,
            inverse: RegularizedInverse::new(lambda)?,
            targets: Vec::new(),
            coef: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    pub fn inverse(&self) -> &RegularizedInverse {
        &self.inverse
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn coef(&self) -> &[f64] {
        &self.coef
    }

    /// Validates a new sample and computes its bordering terms.
    pub fn prepare(&self, row: &[f64], diag: f64) -> Result<Border> {
        check_len(self.len(), row.len())?;
        if self.gram.dim() + 1 > self.gram.capacity() {
            return Err(Error::Capacity {
                limit: self.gram.capacity(),
                requested: self.gram.dim() + 1,
            });
        }
        if !(diag >= 0.0) {
            return Err(Error::Argument(format!("diagonal entry must be non-negative, got {diag}")));
        }
        self.inverse.border(row, diag)
    }

    /// Appends a sample prepared by [`KernelRidge::prepare`] with regression
    /// target `target`.
    pub fn commit(&mut self, border: &Border, row: &[f64], diag: f64, target: f64) {
        self.inverse.apply_border(border);
        self.gram.extend(row, diag).expect("validated by prepare");
        let fitted: f64 = row.iter().zip(&self.coef).map(|(k, c)| k * c).sum();
        let delta = (fitted - target) / border.schur;
        for (c, u) in self.coef.iter_mut().zip(&border.projected) {
            *c += u * delta;
        }
        self.coef.push(-delta);
        self.targets.push(target);
    }

    /// Appends one sample with kernel row `row`, self-kernel `diag` and
    /// regression target `target`.
    pub fn push(&mut self, row: &[f64], diag: f64, target: f64) -> Result<()> {
        let border = self.prepare(row, diag)?;
        self.commit(&border, row, diag, target);
        Ok(())
    }

    /// `k (G + lambda I)^-1 targets` for a cross-kernel row `k`.
    pub fn predict(&self, cross: &[f64]) -> Result<f64> {
        check_len(self.len(), cross.len())?;
        Ok(cross.iter().zip(&self.coef).map(|(k, c)| k * c).sum())
    }

    /// `k_self - k (G + lambda I)^-1 k^T`, before any clamping.
    pub fn residual_variance(&self, cross: &[f64], self_kernel: f64) -> Result<f64> {
        Ok(self_kernel - self.inverse.quad_form(cross)?)
    }
}
