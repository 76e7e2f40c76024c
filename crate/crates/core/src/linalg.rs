//! Dense complex matrices and the handful of factorizations the solver needs.
//!
//! Everything here is written against `alloc` only: Hermitian
//! eigendecomposition (Householder reduction to a real tridiagonal followed by
//! implicit QL), complex Cholesky, and a real Cholesky for the SDP's Schur
//! complement.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    /// `u v^H`.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diag_real(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)].re).collect()
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    /// `(A + A^H) / 2`.
    pub fn hermitian_part(&self) -> Self {
        debug_assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn max_hermitian_deviation(&self) -> f64 {
        let mut dev = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max(abs(self[(i, j)] - self[(j, i)].conj()));
            }
        }
        dev
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|z| z.norm_sqr()).sum())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_mut(&mut self, s: f64) {
        self.data.iter_mut().for_each(|z| *z *= s);
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, s: f64, other: &Self) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn add_diag(&mut self, s: f64) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)].re += s;
        }
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, x.len(), "mul_vec dimension mismatch");
        (0..self.rows).map(|i| dot_u(self.row(i), x)).collect()
    }

    /// `x^H A x` (real part; exact for Hermitian `A`).
    pub fn quad_form(&self, x: &[C64]) -> f64 {
        dot(x, &self.mul_vec(x)).re
    }

    /// `Re Tr(A B)` without forming the product.
    pub fn re_trace_product(&self, rhs: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (rhs.cols, rhs.rows));
        let mut acc = 0.0;
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                let b = rhs.data[k * rhs.cols + i];
                acc += a.re * b.re - a.im * b.im;
            }
        }
        acc
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// `r exp(j theta)`, evaluated with `libm` like every other transcendental in the crate.
pub fn polar(r: f64, theta: f64) -> C64 {
    let (s, c) = libm::sincos(theta);
    C64::new(r * c, r * s)
}

pub fn abs(z: C64) -> f64 {
    libm::hypot(z.re, z.im)
}

pub fn arg(z: C64) -> f64 {
    libm::atan2(z.im, z.re)
}

/// `x^H y`.
pub fn dot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// Unconjugated `sum x_i y_i`.
pub fn dot_u(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2_sqr(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm2(x: &[C64]) -> f64 {
    libm::sqrt(norm2_sqr(x))
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Eigenvectors stored as columns, unit norm.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn max_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn vector(&self, j: usize) -> Vec<C64> {
        self.vectors.column(j)
    }
}

/// Full Hermitian eigendecomposition. Only the lower triangle is read.
pub fn eigh(a: &CMatrix) -> Result<HermitianEigen> {
    let (mut d, mut e, q) = tridiagonalize(a, true)?;
    let mut z = q.expect("vectors requested");
    tql2(&mut d, &mut e, Some(&mut z))?;
    sort_eigenpairs(&mut d, Some(&mut z));
    Ok(HermitianEigen { values: d, vectors: z })
}

/// Eigenvalues of a Hermitian matrix, ascending. Only the lower triangle is read.
pub fn eigvalsh(a: &CMatrix) -> Result<Vec<f64>> {
    let (mut d, mut e, _) = tridiagonalize(a, false)?;
    tql2(&mut d, &mut e, None)?;
    sort_eigenpairs(&mut d, None);
    Ok(d)
}

/// Householder reduction `A = Q T Q^H` with `T` real symmetric tridiagonal.
///
/// Returns the diagonal, the sub-diagonal (length `n`, last entry zero) and,
/// if requested, the unitary `Q` with the phase fix-up already folded in.
fn tridiagonalize(a: &CMatrix, want_q: bool) -> Result<(Vec<f64>, Vec<f64>, Option<CMatrix>)> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows, found: a.cols });
    }
    if a.data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NumericalBreakdown("non-finite matrix entry"));
    }
    let n = a.rows;
    // Work on the lower triangle, mirrored, so stray upper-triangle noise is ignored.
    let mut w = CMatrix::from_fn(n, n, |i, j| {
        if i > j {
            a[(i, j)]
        } else if i == j {
            C64::new(a[(i, i)].re, 0.0)
        } else {
            a[(j, i)].conj()
        }
    });
    let mut q = if want_q { Some(CMatrix::identity(n)) } else { None };
    let mut sub = vec![ZERO; n];
    let mut v = vec![ZERO; n];
    let mut p = vec![ZERO; n];

    for k in 0..n.saturating_sub(1) {
        let len = n - k - 1;
        let x0 = w[(k + 1, k)];
        let xnorm = libm::sqrt((k + 1..n).map(|i| w[(i, k)].norm_sqr()).sum::<f64>());
        if len == 1 || xnorm == 0.0 {
            sub[k] = x0;
            continue;
        }
        let phase = if abs(x0) > 0.0 { x0 / abs(x0) } else { ONE };
        let alpha = -phase * xnorm;
        for i in 0..len {
            v[i] = w[(k + 1 + i, k)];
        }
        v[0] -= alpha;
        let vnorm = norm2(&v[..len]);
        if vnorm == 0.0 {
            sub[k] = x0;
            continue;
        }
        for vi in v[..len].iter_mut() {
            *vi /= vnorm;
        }
        // Trailing block update B <- B - 2 (v w^H + w v^H), w = Bv - (v^H B v) v.
        for i in 0..len {
            let row = &w.data[(k + 1 + i) * n + k + 1..(k + 1 + i) * n + n];
            p[i] = dot_u(row, &v[..len]);
        }
        let kappa = dot(&v[..len], &p[..len]).re;
        for i in 0..len {
            p[i] -= v[i] * kappa;
        }
        for i in 0..len {
            for j in 0..len {
                let upd = v[i] * p[j].conj() + p[i] * v[j].conj();
                w[(k + 1 + i, k + 1 + j)] -= upd * 2.0;
            }
        }
        sub[k] = alpha;
        if let Some(q) = q.as_mut() {
            for r in 0..n {
                let row = &mut q.data[r * n + k + 1..r * n + n];
                let s = dot_u(row, &v[..len]);
                for (qj, vj) in row.iter_mut().zip(&v[..len]) {
                    *qj -= s * vj.conj() * 2.0;
                }
            }
        }
    }

    let d: Vec<f64> = (0..n).map(|i| w[(i, i)].re).collect();
    let mut e = vec![0.0; n];
    let mut delta = vec![ONE; n];
    for k in 0..n.saturating_sub(1) {
        let c = sub[k];
        let m = abs(c);
        e[k] = m;
        delta[k + 1] = if m > 0.0 { delta[k] * (c / m) } else { delta[k] };
    }
    if let Some(q) = q.as_mut() {
        for r in 0..n {
            for j in 0..n {
                q[(r, j)] *= delta[j];
            }
        }
    }
    Ok((d, e, q))
}

/// Implicit QL on a symmetric tridiagonal (`d` diagonal, `e[i] = T[i+1, i]`).
/// Rotations are accumulated into the columns of `z` when given.
fn tql2(d: &mut [f64], e: &mut [f64], mut z: Option<&mut CMatrix>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::NumericalBreakdown("tridiagonal QL did not converge"));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = z.as_deref_mut() {
                        let cols = z.cols;
                        for k in 0..z.rows {
                            let base = k * cols;
                            let h = z.data[base + i + 1];
                            let zi = z.data[base + i];
                            z.data[base + i + 1] = zi * s + h * c;
                            z.data[base + i] = zi * c - h * s;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if !(e[l].abs() > eps * tst1) {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalBreakdown("non-finite eigenvalue"));
    }
    Ok(())
}

fn sort_eigenpairs(d: &mut [f64], z: Option<&mut CMatrix>) {
    let n = d.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    d.copy_from_slice(&sorted);
    if let Some(z) = z {
        let old = z.clone();
        for (new_j, &old_j) in order.iter().enumerate() {
            for r in 0..z.rows {
                z[(r, new_j)] = old[(r, old_j)];
            }
        }
    }
}

/// Lower Cholesky factor `A = L L^H`; `None` if `A` is not positive definite.
pub fn cholesky(a: &CMatrix) -> Option<CMatrix> {
    let n = a.rows;
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut s = a[(j, j)].re;
        for k in 0..j {
            s -= l[(j, k)].norm_sqr();
        }
        if !(s > 0.0) {
            return None;
        }
        let ljj = libm::sqrt(s);
        l[(j, j)] = C64::new(ljj, 0.0);
        for i in j + 1..n {
            let mut acc = a[(i, j)];
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = acc / ljj;
        }
    }
    Some(l)
}

/// Inverse of a lower-triangular matrix.
pub fn lower_inverse(l: &CMatrix) -> CMatrix {
    let n = l.rows;
    let mut inv = CMatrix::zeros(n, n);
    for j in 0..n {
        inv[(j, j)] = ONE / l[(j, j)];
        for i in j + 1..n {
            let mut acc = ZERO;
            for k in j..i {
                acc += l[(i, k)] * inv[(k, j)];
            }
            inv[(i, j)] = -acc / l[(i, i)];
        }
    }
    inv
}

/// Inverse of a Hermitian positive definite matrix.
pub fn hpd_inverse(a: &CMatrix) -> Option<CMatrix> {
    let l = cholesky(a)?;
    let linv = lower_inverse(&l);
    let mut out = linv.adjoint().matmul(&linv);
    out = out.hermitian_part();
    Some(out)
}

/// Real symmetric positive definite factorization, row-major `n x n`.
#[derive(Clone, Debug)]
pub struct RealCholesky {
    n: usize,
    l: Vec<f64>,
}

impl RealCholesky {
    pub fn factor(a: &[f64], n: usize) -> Option<Self> {
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut s = a[j * n + j];
            for k in 0..j {
                s -= l[j * n + k] * l[j * n + k];
            }
            if !(s > 0.0) {
                return None;
            }
            let ljj = libm::sqrt(s);
            l[j * n + j] = ljj;
            for i in j + 1..n {
                let mut acc = a[i * n + j];
                for k in 0..j {
                    acc -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = acc / ljj;
            }
        }
        Some(Self { n, l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut acc = y[i];
            for k in 0..i {
                acc -= self.l[i * n + k] * y[k];
            }
            y[i] = acc / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for k in i + 1..n {
                acc -= self.l[k * n + i] * y[k];
            }
            y[i] = acc / self.l[i * n + i];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pseudo_random(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
    }

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        let mut s = seed;
        let g = CMatrix::from_fn(n, n, |_, _| C64::new(pseudo_random(&mut s), pseudo_random(&mut s)));
        g.hermitian_part()
    }

    #[test]
    fn eigh_reconstructs_random_hermitian() {
        for n in [1, 2, 3, 7, 20] {
            let a = random_hermitian(n, 42 + n as u64);
            let eig = eigh(&a).unwrap();
            let lam = CMatrix::from_diag(&eig.values);
            let rec = eig.vectors.matmul(&lam).matmul(&eig.vectors.adjoint());
            let mut diff = rec.clone();
            diff.add_scaled(-1.0, &a);
            assert!(diff.frobenius_norm() < 1e-12 * (1.0 + a.frobenius_norm()), "n={n}");
            let gram = eig.vectors.adjoint().matmul(&eig.vectors);
            let mut off = gram;
            off.add_diag(-1.0);
            assert!(off.frobenius_norm() < 1e-12);
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn eigvalsh_matches_eigh() {
        let a = random_hermitian(9, 7);
        let v1 = eigvalsh(&a).unwrap();
        let v2 = eigh(&a).unwrap().values;
        for (x, y) in v1.iter().zip(&v2) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn eigh_handles_diagonal_and_zero() {
        let a = CMatrix::from_diag(&[3.0, -1.0, 2.0]);
        let eig = eigh(&a).unwrap();
        assert_eq!(eig.values, std::vec![-1.0, 2.0, 3.0]);
        let z = eigh(&CMatrix::zeros(4, 4)).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn eigh_rejects_nan() {
        let mut a = CMatrix::identity(3);
        a[(1, 0)] = C64::new(f64::NAN, 0.0);
        assert!(eigh(&a).is_err());
    }

    #[test]
    fn cholesky_inverse_roundtrip() {
        let mut a = random_hermitian(6, 3);
        a.add_diag(4.0);
        let inv = hpd_inverse(&a).unwrap();
        let mut prod = a.matmul(&inv);
        prod.add_diag(-1.0);
        assert!(prod.frobenius_norm() < 1e-12);
        let mut b = CMatrix::identity(2);
        b[(1, 1)] = C64::new(-1.0, 0.0);
        assert!(cholesky(&b).is_none());
    }

    #[test]
    fn real_cholesky_solves() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let ch = RealCholesky::factor(&a, 3).unwrap();
        let x = ch.solve(&[1.0, 2.0, 3.0]);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((r - [1.0, 2.0, 3.0][i]).abs() < 1e-14);
        }
    }

    #[test]
    fn re_trace_product_matches_matmul() {
        let a = random_hermitian(5, 1);
        let b = random_hermitian(5, 2);
        let direct = a.matmul(&b).trace().re;
        assert!((a.re_trace_product(&b) - direct).abs() < 1e-13);
    }
}
