//! Dense symmetric positive-definite helpers shared by the estimators.

use crate::error::{check_len, Error, Result};
use alloc::vec;
use alloc::vec::Vec;

/// A pivot (net of the regularizer) below this value means the matrix is not
/// positive semi-definite; pivots between it and zero are floating-point jitter.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// Lower Cholesky factor of a dense `n x n` symmetric matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors `a + shift * I` (row-major, only the lower triangle is read).
    ///
    /// A pivot whose value net of `shift` falls below `-PSD_TOLERANCE` fails
    /// with [`Error::Numerical`]; smaller shortfalls are clamped to `shift`.
    pub fn factor(a: &[f64], n: usize, shift: f64) -> Result<Self> {
        check_len(n * n, a.len())?;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut p = a[j * n + j] + shift;
            for k in 0..j {
                p -= l[j * n + k] * l[j * n + k];
            }
            if p - shift < -PSD_TOLERANCE || !p.is_finite() {
                return Err(Error::Numerical { pivot: j, value: p - shift });
            }
            if p < shift {
                p = shift;
            }
            if p <= 0.0 {
                return Err(Error::Numerical { pivot: j, value: p });
            }
            let d = libm::sqrt(p);
            l[j * n + j] = d;
            for i in (j + 1)..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `L y = b` in place.
    fn forward(&self, y: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
    }

    /// Solves `L^T x = y` in place.
    fn backward(&self, x: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, b.len())?;
        let mut x = b.to_vec();
        self.forward(&mut x);
        self.backward(&mut x);
        Ok(x)
    }

    /// `b^T (factored matrix)^-1 b`.
    pub fn quad_form(&self, b: &[f64]) -> Result<f64> {
        check_len(self.n, b.len())?;
        let mut y = b.to_vec();
        self.forward(&mut y);
        Ok(y.iter().map(|v| v * v).sum())
    }

    /// Dense inverse, row-major.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            col.iter_mut().for_each(|c| *c = 0.0);
            col[j] = 1.0;
            self.forward(&mut col);
            self.backward(&mut col);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        inv
    }
}

/// Eigenvalues of a dense symmetric matrix by cyclic Jacobi rotations,
/// sorted ascending. Intended for the small matrices used in diagnostics.
pub fn symmetric_eigenvalues(a: &[f64], n: usize) -> Result<Vec<f64>> {
    check_len(n * n, a.len())?;
    let mut m = a.to_vec();
    let scale: f64 = m.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_diagonal() {
        let c = Cholesky::factor(&[2.0, 0.0, 0.0, 2.0], 2, 1.0).unwrap();
        let x = c.solve(&[3.0, 6.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn indefinite_reports_pivot() {
        let err = Cholesky::factor(&[1.0, 2.0, 2.0, 1.0], 2, 0.5).unwrap_err();
        assert!(matches!(err, Error::Numerical { pivot: 1, .. }));
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let c = Cholesky::factor(&a, 3, 0.0).unwrap();
        let inv = c.inverse();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        let q = c.quad_form(&[1.0, -1.0, 2.0]).unwrap();
        let direct: f64 = {
            let b = [1.0, -1.0, 2.0];
            (0..3).map(|i| (0..3).map(|j| b[i] * inv[i * 3 + j] * b[j]).sum::<f64>()).sum()
        };
        assert!((q - direct).abs() < 1e-12);
    }

    #[test]
    fn jacobi_eigenvalues() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let ev = symmetric_eigenvalues(&[2.0, 1.0, 1.0, 2.0], 2).unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let ev = symmetric_eigenvalues(&a, 3).unwrap();
        let trace: f64 = ev.iter().sum();
        assert!((trace - 9.0).abs() < 1e-10);
        let det = 4.0 * (3.0 * 2.0 - 0.04) - 1.0 * (2.0 - 0.1) + 0.5 * (0.2 - 1.5);
        assert!((ev.iter().product::<f64>() - det).abs() < 1e-9);
    }
}
