//! Small dense complex linear-algebra helpers and a contiguous store for
//! time series of square matrices.

use nalgebra::{DMatrix, DMatrixView};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `max |m - m†|`.
pub fn hermiticity_residual(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut r: f64 = 0.0;
    for i in 0..n {
        for j in 0..m.ncols() {
            r = r.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    r
}

/// Returns `(m + m†)/2` and the residual of `m` before symmetrization.
pub fn hermitize(m: &CMat) -> (CMat, f64) {
    let residual = hermiticity_residual(m);
    let h = (m + m.adjoint()).scale(0.5);
    (h, residual)
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    m.clone().lu().try_inverse()
}

/// 2-norm condition number from singular values; `inf` for singular input.
pub fn condition_number(m: &CMat) -> f64 {
    if m.nrows() == 1 {
        return if m[(0, 0)].norm() > 0.0 { 1.0 } else { f64::INFINITY };
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Eigenvalues of a Hermitian matrix (ascending).
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let (h, _) = hermitize(m);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// A sequence of `dim × dim` complex matrices in one column-major buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct MatSeq {
    dim: usize,
    data: Vec<C64>,
}

impl MatSeq {
    pub fn zeros(dim: usize, len: usize) -> Self {
        Self {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim * len],
        }
    }

    pub fn from_matrices(dim: usize, mats: &[CMat]) -> Self {
        let mut s = Self::zeros(dim, mats.len());
        for (k, m) in mats.iter().enumerate() {
            s.set(k, m);
        }
        s
    }

    pub fn from_scalars(values: &[C64]) -> Self {
        Self {
            dim: 1,
            data: values.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / (self.dim * self.dim)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn slice(&self, k: usize) -> &[C64] {
        let s = self.dim * self.dim;
        &self.data[k * s..(k + 1) * s]
    }

    #[inline]
    pub fn slice_mut(&mut self, k: usize) -> &mut [C64] {
        let s = self.dim * self.dim;
        &mut self.data[k * s..(k + 1) * s]
    }

    pub fn view(&self, k: usize) -> DMatrixView<'_, C64> {
        DMatrixView::from_slice(self.slice(k), self.dim, self.dim)
    }

    pub fn get(&self, k: usize) -> CMat {
        self.view(k).into_owned()
    }

    pub fn set(&mut self, k: usize, m: &CMat) {
        assert_eq!(m.nrows(), self.dim);
        assert_eq!(m.ncols(), self.dim);
        self.slice_mut(k).copy_from_slice(m.as_slice());
    }

    /// Entry `(i, j)` at sample `k`.
    #[inline]
    pub fn at(&self, k: usize, i: usize, j: usize) -> C64 {
        self.slice(k)[i + self.dim * j]
    }

    /// Scalar series for `dim == 1`; `(0,0)` entries otherwise.
    pub fn diagonal_entry(&self, i: usize) -> Vec<C64> {
        (0..self.len()).map(|k| self.at(k, i, i)).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = CMat> + '_ {
        (0..self.len()).map(move |k| self.get(k))
    }
}

/// `acc += a * b` for column-major `d × d` slices.
#[inline]
pub fn gemm_acc(acc: &mut [C64], a: &[C64], b: &[C64], d: usize) {
    if d == 1 {
        acc[0] += a[0] * b[0];
        return;
    }
    for j in 0..d {
        for m in 0..d {
            let bmj = b[m + d * j];
            for i in 0..d {
                acc[i + d * j] += a[i + d * m] * bmj;
            }
        }
    }
}

/// `acc += scale * a * b`.
#[inline]
pub fn gemm_acc_scaled(acc: &mut [C64], scale: f64, a: &[C64], b: &[C64], d: usize) {
    if d == 1 {
        acc[0] += a[0] * b[0] * scale;
        return;
    }
    for j in 0..d {
        for m in 0..d {
            let bmj = b[m + d * j] * scale;
            for i in 0..d {
                acc[i + d * j] += a[i + d * m] * bmj;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_matches_nalgebra() {
        let a = CMat::from_fn(3, 3, |i, j| C64::new(i as f64 + 0.5, j as f64 - 1.0));
        let b = CMat::from_fn(3, 3, |i, j| C64::new((i * j) as f64, 1.0 + i as f64));
        let mut acc = vec![C64::new(0.0, 0.0); 9];
        gemm_acc(&mut acc, a.as_slice(), b.as_slice(), 3);
        let want = &a * &b;
        for (x, y) in acc.iter().zip(want.iter()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn hermitize_reports_residual() {
        let mut m = CMat::identity(2, 2);
        m[(0, 1)] = C64::new(1.0, 0.0);
        let (h, r) = hermitize(&m);
        assert!((r - 1.0).abs() < 1e-15);
        assert_eq!(hermiticity_residual(&h), 0.0);
    }

    #[test]
    fn matseq_roundtrip() {
        let m = CMat::from_fn(2, 2, |i, j| C64::new(i as f64, j as f64));
        let mut s = MatSeq::zeros(2, 3);
        s.set(1, &m);
        assert_eq!(s.get(1), m);
        assert_eq!(s.at(1, 1, 0), C64::new(1.0, 0.0));
        assert_eq!(s.len(), 3);
    }
}
