//! Dense symmetric positive-definite linear algebra.
//!
//! Row-major lower-triangular Cholesky factor; inner loops are contiguous
//! dot products so they vectorize well.

use crate::error::{Error, Result};

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix { n, data: vec![0.0; n * n] }
    }

    /// Fills entry (i, j) and (j, i) from `f(i, j)` for j <= i.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), v)).collect()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    #[cfg(target_arch = "x86_64")]
    {
        if n >= 16 && std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the required CPU features were detected at runtime.
            return unsafe { dot_avx2(a, b) };
        }
    }
    dot_portable(a, b)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn dot_avx2(a: &[f64], b: &[f64]) -> f64 {
    dot_portable(a, b)
}

/// Eight independent accumulators break the dependency chain so the loop
/// vectorizes.
#[inline(always)]
fn dot_portable(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// y ← y + α·x.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    {
        if y.len() >= 16 && std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the required CPU features were detected at runtime.
            unsafe { axpy_avx2(alpha, x, y) };
            return;
        }
    }
    axpy_portable(alpha, x, y)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn axpy_avx2(alpha: f64, x: &[f64], y: &mut [f64]) {
    axpy_portable(alpha, x, y)
}

#[inline(always)]
fn axpy_portable(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Strided matrix view for [`gemm`]: data, row stride, column stride.
pub(crate) type View<'a> = (&'a [f64], isize, isize);

/// C ← α·A·B + β·C with A m×k, B k×n and C m×n given by strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(m: usize, k: usize, n: usize, alpha: f64, a: View, b: View, beta: f64, c: &mut [f64], rsc: isize, csc: isize) {
    if m == 0 || n == 0 {
        return;
    }
    let extent = |rows: usize, cols: usize, rs: isize, cs: isize| {
        if rows == 0 || cols == 0 {
            0
        } else {
            ((rows - 1) as isize * rs + (cols - 1) as isize * cs) as usize + 1
        }
    };
    assert!(a.1 >= 0 && a.2 >= 0 && b.1 >= 0 && b.2 >= 0 && rsc >= 0 && csc >= 0);
    assert!(a.0.len() >= extent(m, k, a.1, a.2));
    assert!(b.0.len() >= extent(k, n, b.1, b.2));
    assert!(c.len() >= extent(m, n, rsc, csc));
    // SAFETY: the asserts above keep every strided access in bounds.
    unsafe {
        matrixmultiply::dgemm(m, k, n, alpha, a.0.as_ptr(), a.1, a.2, b.0.as_ptr(), b.1, b.2, beta, c.as_mut_ptr(), rsc, csc);
    }
}

/// Lower Cholesky factor L with A + jitter·I = L Lᵀ.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    /// Row-major, only the lower triangle is meaningful.
    l: Vec<f64>,
    jitter: f64,
}

impl Cholesky {
    /// Plain factorization; `None` when a pivot is not positive.
    ///
    /// Left-looking by column blocks: each block column is first updated
    /// with all earlier columns in one matrix product, then factored.
    pub fn factor(a: &SymMatrix, jitter: f64) -> Option<Cholesky> {
        const NB: usize = 64;
        let n = a.n;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            l[i * n..=i * n + i].copy_from_slice(&a.data[i * n..=i * n + i]);
            l[i * n + i] += jitter;
        }
        for kb in (0..n).step_by(NB) {
            let b = NB.min(n - kb);
            if kb > 0 {
                // SAFETY: the product reads columns 0..kb and writes columns
                // kb..kb+b of rows kb..n; the regions are disjoint and in
                // bounds of the n × n buffer.
                unsafe {
                    let p = l.as_mut_ptr();
                    matrixmultiply::dgemm(
                        n - kb,
                        kb,
                        b,
                        -1.0,
                        p.add(kb * n),
                        n as isize,
                        1,
                        p.add(kb * n),
                        1,
                        n as isize,
                        1.0,
                        p.add(kb * n + kb),
                        n as isize,
                        1,
                    );
                }
            }
            for j in kb..kb + b {
                let (head, tail) = l.split_at_mut(j * n + j);
                let rj = &head[j * n + kb..j * n + j];
                let s = tail[0] - dot(rj, rj);
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                let d = s.sqrt();
                tail[0] = d;
                for i in j + 1..n {
                    let off = (i - j) * n;
                    let ri = &tail[off - j + kb..off];
                    let v = (tail[off] - dot(ri, rj)) / d;
                    tail[off] = v;
                }
            }
        }
        // Clear what the block products left above the diagonal.
        for i in 0..n {
            let end = n.min((i / NB + 1) * NB);
            l[i * n + i + 1..i * n + end].iter_mut().for_each(|v| *v = 0.0);
        }
        Some(Cholesky { n, l, jitter })
    }

    /// Factorization with the jitter ladder 0, 1e-10·scale, 1e-9·scale, …, 1e-6·scale.
    pub fn factor_with_jitter(a: &SymMatrix, scale: f64) -> Result<Cholesky> {
        debug_assert!(a.is_symmetric());
        if let Some(c) = Cholesky::factor(a, 0.0) {
            return Ok(c);
        }
        let mut last = 0.0;
        for e in [-10, -9, -8, -7, -6] {
            last = scale * 10f64.powi(e);
            if let Some(c) = Cholesky::factor(a, last) {
                log::debug!("cholesky of size {} needed jitter {last:e}", a.n);
                return Ok(c);
            }
        }
        Err(Error::NotFactorizable { size: a.n, jitter: last })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.l[i * self.n..i * self.n + i + 1]
    }

    /// L·v.
    pub fn mul_lower(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), &v[..=i])).collect()
    }

    /// Solves L y = b.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let r = self.row(i);
            y[i] = (b[i] - dot(&r[..i], &y[..i])) / r[i];
        }
        y
    }

    /// Solves Lᵀ x = y.
    pub fn solve_upper(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            x[i] /= self.l[i * n + i];
            let xi = x[i];
            let r = &self.l[i * n..i * n + i];
            for (xk, lk) in x[..i].iter_mut().zip(r) {
                *xk -= lk * xi;
            }
        }
        x
    }

    /// Solves (L Lᵀ) x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// (L Lᵀ)⁻¹ as a dense symmetric matrix.
    pub fn inverse(&self) -> SymMatrix {
        let n = self.n;
        // Columns of L⁻¹, then A⁻¹ = L⁻ᵀ L⁻¹.
        let mut inv = SymMatrix::zeros(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv.data[i * n + j] = col[i];
            }
        }
        // Symmetrize round-off.
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (inv.data[i * n + j] + inv.data[j * n + i]);
                inv.data[i * n + j] = v;
                inv.data[j * n + i] = v;
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> SymMatrix {
        SymMatrix::from_fn(n, |i, j| {
            let d = (i as f64 - j as f64).abs();
            (-d / 3.0).exp() + if i == j { 0.1 } else { 0.0 }
        })
    }

    #[test]
    fn factor_reconstructs() {
        // 150 spans several column blocks and a ragged last one.
        for n in [20, 150] {
            let a = spd(n);
            let c = Cholesky::factor(&a, 0.0).unwrap();
            for i in 0..n {
                assert!(c.l[i * n + i + 1..(i + 1) * n].iter().all(|&v| v == 0.0));
                for j in 0..=i {
                    let s: f64 = (0..=j).map(|k| c.l[i * n + k] * c.l[j * n + k]).sum();
                    assert!((s - a.get(i, j)).abs() < 1e-12);
                }
            }
        }
        let mut bad = spd(150);
        bad.data[100 * 150 + 100] = -1.0;
        assert!(Cholesky::factor(&bad, 0.0).is_none());
    }

    #[test]
    fn solve_and_inverse() {
        let a = spd(15);
        let c = Cholesky::factor(&a, 0.0).unwrap();
        let b: Vec<f64> = (0..15).map(|i| (i as f64).sin()).collect();
        let x = c.solve(&b);
        let back = a.mul_vec(&x);
        for (u, v) in back.iter().zip(&b) {
            assert!((u - v).abs() < 1e-10);
        }
        let inv = c.inverse();
        for i in 0..15 {
            for j in 0..15 {
                let s: f64 = (0..15).map(|k| a.get(i, k) * inv.get(k, j)).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn jitter_ladder_rescues_singular_matrix() {
        let a = SymMatrix::from_fn(5, |_, _| 1.0);
        assert!(Cholesky::factor(&a, 0.0).is_none());
        let c = Cholesky::factor_with_jitter(&a, 1.0).unwrap();
        assert!(c.jitter() > 0.0 && c.jitter() <= 1e-6);
        let neg = SymMatrix::from_fn(2, |i, j| if i == j { -1.0 } else { 0.0 });
        assert!(matches!(Cholesky::factor_with_jitter(&neg, 1.0), Err(Error::NotFactorizable { .. })));
    }
}
