//! Dense complex column-major matrices and the column-normalized
//! pseudo-inverse used by the zero-forcing precoders.

use num_complex::Complex;

use crate::scalar::{lit, Real};

/// Column-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex::new(T::zero(), T::zero()); rows * cols] }
    }

    pub fn from_columns(rows: usize, columns: &[Vec<Complex<T>>]) -> Self {
        let mut m = Self::zeros(rows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            assert_eq!(c.len(), rows, "column {j} has the wrong length");
            m.col_mut(j).copy_from_slice(c);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, j: usize) -> &[Complex<T>] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [Complex<T>] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn get(&self, r: usize, c: usize) -> Complex<T> {
        self.data[c * self.rows + r]
    }

    /// Appends a column; `column.len()` must equal `rows`.
    pub fn push_column(&mut self, column: &[Complex<T>]) {
        assert_eq!(column.len(), self.rows);
        self.data.extend_from_slice(column);
        self.cols += 1;
    }

    /// Keeps the first `n` columns.
    pub fn truncate_columns(&mut self, n: usize) {
        self.cols = self.cols.min(n);
        self.data.truncate(self.cols * self.rows);
    }
}

/// a^H b.
#[inline]
pub fn dot<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    // Two independent accumulator pairs shorten the add dependency chain.
    let mut acc = [T::zero(); 4];
    let mut ca = a.chunks_exact(2);
    let mut cb = b.chunks_exact(2);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] = acc[0] + x[0].re * y[0].re + x[0].im * y[0].im;
        acc[1] = acc[1] + x[0].re * y[0].im - x[0].im * y[0].re;
        acc[2] = acc[2] + x[1].re * y[1].re + x[1].im * y[1].im;
        acc[3] = acc[3] + x[1].re * y[1].im - x[1].im * y[1].re;
    }
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        acc[0] = acc[0] + x.re * y.re + x.im * y.im;
        acc[1] = acc[1] + x.re * y.im - x.im * y.re;
    }
    Complex::new(acc[0] + acc[2], acc[1] + acc[3])
}

#[inline]
pub fn norm_sqr<T: Real>(a: &[Complex<T>]) -> T {
    let mut acc = [T::zero(); 2];
    let mut it = a.chunks_exact(2);
    for x in &mut it {
        acc[0] = acc[0] + x[0].re * x[0].re + x[0].im * x[0].im;
        acc[1] = acc[1] + x[1].re * x[1].re + x[1].im * x[1].im;
    }
    for x in it.remainder() {
        acc[0] = acc[0] + x.re * x.re + x.im * x.im;
    }
    acc[0] + acc[1]
}

/// y -= alpha * x.
#[inline]
fn axpy_sub<T: Real>(alpha: Complex<T>, x: &[Complex<T>], y: &mut [Complex<T>]) {
    for (xi, yi) in x.iter().zip(y.iter_mut()) {
        yi.re = yi.re - (alpha.re * xi.re - alpha.im * xi.im);
        yi.im = yi.im - (alpha.re * xi.im + alpha.im * xi.re);
    }
}

/// Scales every column to unit norm. Zero columns are left as they are.
pub fn normalize_columns<T: Real>(m: &mut CMatrix<T>) {
    for j in 0..m.cols() {
        let n = norm_sqr(m.col(j)).sqrt();
        if n > T::zero() {
            for x in m.col_mut(j) {
                *x = *x / n;
            }
        }
    }
}

/// Column-pivoted QR found the matrix numerically rank deficient.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RankDeficient {
    pub rank: usize,
}

/// UNorm(M^+) restricted to its first `keep` columns, with
/// M^+ = M (M^H M)^-1.
///
/// Columns of M are normalized first, which only rescales the columns of
/// M^+ and so leaves the result unchanged. The factorization is column
/// pivoted Gram-Schmidt with one reorthogonalization pass; a pivot below
/// `rel_tol` times the first one is reported as rank deficiency.
pub fn normalized_pinv<T: Real>(m: &CMatrix<T>, keep: usize, rel_tol: T) -> Result<CMatrix<T>, RankDeficient> {
    let (n, p) = (m.rows(), m.cols());
    assert!(keep <= p);
    if p > n {
        return Err(RankDeficient { rank: n });
    }
    let mut a = m.clone();
    normalize_columns(&mut a);
    let mut perm: Vec<usize> = (0..p).collect();
    // r is p x p upper triangular, column-major.
    let mut r = vec![Complex::new(T::zero(), T::zero()); p * p];
    let mut first = T::zero();
    // Remaining squared column norms, downdated after each step and
    // recomputed once cancellation has eaten most of them.
    let mut norms: Vec<T> = (0..p).map(|j| norm_sqr(a.col(j))).collect();
    let mut reference = norms.clone();
    let stale = lit::<T>(0.01);
    for k in 0..p {
        let pivot = (k..p)
            .map(|j| (j, norms[j]))
            .fold((k, T::neg_infinity()), |best, cur| if cur.1 > best.1 { cur } else { best })
            .0;
        if pivot != k {
            swap_columns(&mut a, k, pivot);
            perm.swap(k, pivot);
            norms.swap(k, pivot);
            reference.swap(k, pivot);
            for row in 0..k {
                r.swap(k * p + row, pivot * p + row);
            }
        }
        // Reorthogonalize against the accepted basis.
        for i in 0..k {
            let (qi, ak) = split_pair(&mut a, i, k);
            let c = dot(qi, ak);
            axpy_sub(c, qi, ak);
            r[k * p + i] = r[k * p + i] + c;
        }
        let rkk = norm_sqr(a.col(k)).sqrt();
        if k == 0 {
            first = rkk;
        }
        if !(rkk > rel_tol * first) || !rkk.is_finite() {
            return Err(RankDeficient { rank: k });
        }
        r[k * p + k] = Complex::new(rkk, T::zero());
        for x in a.col_mut(k) {
            *x = *x / rkk;
        }
        for j in k + 1..p {
            let (qk, aj) = split_pair(&mut a, k, j);
            let c = dot(qk, aj);
            axpy_sub(c, qk, aj);
            r[j * p + k] = c;
            norms[j] = norms[j] - c.norm_sqr();
            if norms[j] < stale * reference[j] {
                norms[j] = norm_sqr(a.col(j));
                reference[j] = norms[j];
            }
        }
    }
    // Y = Q R^-H by back substitution: Q_j = sum_{l >= j} Y_l conj(R_{j,l}).
    let mut y = a;
    for j in (0..p).rev() {
        for l in j + 1..p {
            let c = r[l * p + j].conj();
            let (yl, yj) = split_pair(&mut y, l, j);
            axpy_sub(c, yl, yj);
        }
        let d = r[j * p + j].re;
        for x in y.col_mut(j) {
            *x = *x / d;
        }
    }
    let mut out = CMatrix::zeros(n, keep);
    for (j, &orig) in perm.iter().enumerate() {
        if orig < keep {
            out.col_mut(orig).copy_from_slice(y.col(j));
        }
    }
    normalize_columns(&mut out);
    Ok(out)
}

fn swap_columns<T: Real>(m: &mut CMatrix<T>, i: usize, j: usize) {
    let rows = m.rows;
    for r in 0..rows {
        m.data.swap(i * rows + r, j * rows + r);
    }
}

/// Disjoint (immutable, mutable) views of columns `i` and `j`, i != j.
fn split_pair<T: Real>(m: &mut CMatrix<T>, i: usize, j: usize) -> (&[Complex<T>], &mut [Complex<T>]) {
    let rows = m.rows;
    if i < j {
        let (lo, hi) = m.data.split_at_mut(j * rows);
        (&lo[i * rows..(i + 1) * rows], &mut hi[..rows])
    } else {
        let (lo, hi) = m.data.split_at_mut(i * rows);
        (&hi[..rows], &mut lo[j * rows..(j + 1) * rows])
    }
}

/// Default relative rank tolerance for the pseudo-inverse.
pub fn rank_tolerance<T: Real>() -> T {
    lit(1e-12)
}
