//! Dense column-major matrices and the handful of factorizations the
//! latent-variable fits need.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norm below which a cross-product matrix counts as exhausted.
pub const ZERO_CROSS_PRODUCT: f64 = 1e-14;

/// Squared column norm below which a least-squares design is rank deficient.
pub const ZERO_COLUMN_NORM_SQ: f64 = 1e-14;

/// Real matrix stored column by column.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    pub fn from_column_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "matrix data length",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    /// Builds a matrix from row slices; all rows must have equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.as_ref().len());
        for r in rows {
            if r.as_ref().len() != m {
                return Err(Error::DimensionMismatch {
                    what: "row length",
                    expected: m,
                    found: r.as_ref().len(),
                });
            }
        }
        Ok(Self::from_fn(n, m, |i, j| rows[i].as_ref()[j]))
    }

    pub fn from_columns<C: AsRef<[f64]>>(rows: usize, cols: &[C]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols.len());
        for c in cols {
            let c = c.as_ref();
            if c.len() != rows {
                return Err(Error::DimensionMismatch {
                    what: "column length",
                    expected: rows,
                    found: c.len(),
                });
            }
            data.extend_from_slice(c);
        }
        Ok(DenseMatrix {
            rows,
            cols: cols.len(),
            data,
        })
    }

    pub fn column_vector(v: &[f64]) -> Self {
        DenseMatrix {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .chunks(16)
            .all(|c| c.iter().fold(true, |ok, v| ok & v.is_finite()))
    }

    pub fn ensure_finite(&self, what: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite { what })
        }
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self * rhs`
    pub fn matmul(&self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = DenseMatrix::zeros(self.rows, rhs.cols);
        for j in 0..rhs.cols {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for k in 0..self.cols {
                let b = rhs[(k, j)];
                if b == 0.0 {
                    continue;
                }
                axpy(b, self.col(k), dst);
            }
        }
        out
    }

    /// `selfᵗ * rhs`
    pub fn tr_matmul(&self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.rows, rhs.rows, "tr_matmul shape mismatch");
        DenseMatrix::from_fn(self.cols, rhs.cols, |i, j| dot(self.col(i), rhs.col(j)))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "mul_vec shape mismatch");
        let mut out = vec![0.0; self.rows];
        for (k, &vk) in v.iter().enumerate() {
            if vk != 0.0 {
                axpy(vk, self.col(k), &mut out);
            }
        }
        out
    }

    /// `selfᵗ * v`
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len(), "tr_mul_vec shape mismatch");
        (0..self.cols).map(|j| dot(self.col(j), v)).collect()
    }

    /// `self += alpha * u * vᵗ`
    pub fn rank_one_update(&mut self, alpha: f64, u: &[f64], v: &[f64]) {
        assert_eq!(u.len(), self.rows);
        assert_eq!(v.len(), self.cols);
        let rows = self.rows;
        for (j, &vj) in v.iter().enumerate() {
            axpy(alpha * vj, u, &mut self.data[j * rows..(j + 1) * rows]);
        }
    }

    /// Removes the direction of the score `t` from every column:
    /// `pⱼ = colⱼᵗt / tᵗt`, `colⱼ -= pⱼ t`. Returns the loadings `p` and the
    /// squared Frobenius norm of the result.
    pub fn project_out(&mut self, t: &[f64], tt: f64) -> (Vec<f64>, f64) {
        assert_eq!(t.len(), self.rows);
        if self.rows == 0 {
            return (vec![0.0; self.cols], 0.0);
        }
        let rows = self.rows;
        let mut p = Vec::with_capacity(self.cols);
        let mut acc = [0.0; 4];
        let mut tail = 0.0;
        for col in self.data.chunks_exact_mut(rows) {
            let pj = dot(col, t) / tt;
            p.push(pj);
            let mut cc = col.chunks_exact_mut(4);
            let mut ct = t.chunks_exact(4);
            for (c, w) in (&mut cc).zip(&mut ct) {
                c[0] -= pj * w[0];
                c[1] -= pj * w[1];
                c[2] -= pj * w[2];
                c[3] -= pj * w[3];
                acc[0] += c[0] * c[0];
                acc[1] += c[1] * c[1];
                acc[2] += c[2] * c[2];
                acc[3] += c[3] * c[3];
            }
            for (c, &w) in cc.into_remainder().iter_mut().zip(ct.remainder()) {
                *c -= pj * w;
                tail += *c * *c;
            }
        }
        (p, (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail)
    }

    pub fn sub(&self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.shape(), rhs.shape());
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add(&self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.shape(), rhs.shape());
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scaled(&self, alpha: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * alpha).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| f(a)).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn select_rows(&self, idx: &[usize]) -> DenseMatrix {
        DenseMatrix::from_fn(idx.len(), self.cols, |i, j| self[(idx[i], j)])
    }

    pub fn select_cols(&self, idx: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(self.rows * idx.len());
        for &j in idx {
            data.extend_from_slice(self.col(j));
        }
        DenseMatrix {
            rows: self.rows,
            cols: idx.len(),
            data,
        }
    }

    /// Keeps the leading `k` columns.
    pub fn truncate_cols(&self, k: usize) -> DenseMatrix {
        let k = k.min(self.cols);
        DenseMatrix {
            rows: self.rows,
            cols: k,
            data: self.data[..self.rows * k].to_vec(),
        }
    }

    pub fn column_means(&self) -> Vec<f64> {
        (0..self.cols).map(|j| mean(self.col(j))).collect()
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                write!(f, "{:>12.6} ", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four independent partial sums so the additions pipeline.
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    let mut cy = y.chunks_exact_mut(4);
    let mut cx = x.chunks_exact(4);
    for (a, b) in (&mut cy).zip(&mut cx) {
        a[0] += alpha * b[0];
        a[1] += alpha * b[1];
        a[2] += alpha * b[2];
        a[3] += alpha * b[3];
    }
    for (yi, xi) in cy.into_remainder().iter_mut().zip(cx.remainder()) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    sum(v) / v.len() as f64
}

/// `(Σa, Σa·b)` in a single pass.
pub fn sum_and_dot(a: &[f64], b: &[f64]) -> (f64, f64) {
    debug_assert_eq!(a.len(), b.len());
    let (mut s, mut d) = ([0.0; 4], [0.0; 4]);
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        s[0] += x[0];
        s[1] += x[1];
        s[2] += x[2];
        s[3] += x[3];
        d[0] += x[0] * y[0];
        d[1] += x[1] * y[1];
        d[2] += x[2] * y[2];
        d[3] += x[3] * y[3];
    }
    let mut s = (s[0] + s[1]) + (s[2] + s[3]);
    let mut d = (d[0] + d[1]) + (d[2] + d[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x;
        d += x * y;
    }
    (s, d)
}

/// Sum with four partial accumulators.
pub fn sum(v: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = v.chunks_exact(4);
    let tail: f64 = chunks.remainder().iter().sum();
    for c in chunks {
        acc[0] += c[0];
        acc[1] += c[1];
        acc[2] += c[2];
        acc[3] += c[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Variance with the 1/n normalization.
pub fn population_variance(v: &[f64]) -> f64 {
    let mu = mean(v);
    v.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / v.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CenteringMode {
    #[default]
    Mean,
    None,
}

impl std::str::FromStr for CenteringMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(CenteringMode::Mean),
            "none" => Ok(CenteringMode::None),
            other => Err(Error::InvalidArgument(format!(
                "unknown centering mode '{other}' (expected mean or none)"
            ))),
        }
    }
}

/// Column centers subtracted from a training matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenteringInfo {
    pub centers: Vec<f64>,
    pub mode: CenteringMode,
}

impl CenteringInfo {
    /// Subtracts the stored centers from the columns of `m`.
    pub fn apply(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        if m.ncols() != self.centers.len() {
            return Err(Error::DimensionMismatch {
                what: "column count",
                expected: self.centers.len(),
                found: m.ncols(),
            });
        }
        Ok(DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
            m[(i, j)] - self.centers[j]
        }))
    }

    /// Adds the stored centers back.
    pub fn restore(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        if m.ncols() != self.centers.len() {
            return Err(Error::DimensionMismatch {
                what: "column count",
                expected: self.centers.len(),
                found: m.ncols(),
            });
        }
        Ok(DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
            m[(i, j)] + self.centers[j]
        }))
    }
}

pub fn center_columns(m: &DenseMatrix, mode: CenteringMode) -> Result<(DenseMatrix, CenteringInfo)> {
    m.ensure_finite("matrix")?;
    let centers = match mode {
        CenteringMode::Mean => m.column_means(),
        CenteringMode::None => vec![0.0; m.ncols()],
    };
    let info = CenteringInfo { centers, mode };
    Ok((info.apply(m)?, info))
}

/// Dominant left singular direction of a cross-product matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct LeadingDirection {
    /// Unit vector maximizing `‖Sᵗw‖²`.
    pub w: Vec<f64>,
    /// `‖Sᵗw‖²`, the largest eigenvalue of `S·Sᵗ`.
    pub lambda: f64,
}

const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 10_000;

/// Leading eigenvector of `S·Sᵗ`, with the largest-magnitude entry made positive.
///
/// When `S` has fewer columns than rows the small Gram matrix `SᵗS` is
/// diagonalized and the direction mapped back through `S`; otherwise power
/// iteration runs on `S·Sᵗ` with a dense eigensolver as fallback.
pub fn leading_left_singular_vector(s: &DenseMatrix) -> Result<LeadingDirection> {
    s.ensure_finite("cross-product matrix")?;
    if s.nrows() == 0 || s.ncols() == 0 || s.frobenius_norm() <= ZERO_CROSS_PRODUCT {
        return Err(Error::AllZeroCrossProduct);
    }
    let mut w = if s.ncols() < s.nrows() {
        let gram = s.tr_matmul(s);
        let (_, vecs) = symmetric_eigen(&gram);
        let sv = s.mul_vec(vecs.col(0));
        let nrm = norm2(&sv);
        if nrm <= ZERO_CROSS_PRODUCT {
            return Err(Error::AllZeroCrossProduct);
        }
        sv.into_iter().map(|x| x / nrm).collect()
    } else {
        let sst = s.matmul(&s.transpose());
        power_iteration(&sst).unwrap_or_else(|| {
            let (_, vecs) = symmetric_eigen(&sst);
            vecs.col(0).to_vec()
        })
    };
    fix_sign(&mut w);
    let stw = s.tr_mul_vec(&w);
    let lambda = dot(&stw, &stw);
    Ok(LeadingDirection { w, lambda })
}

fn power_iteration(a: &DenseMatrix) -> Option<Vec<f64>> {
    let n = a.nrows();
    let mut v: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[(i, j)]).sum()).collect();
    let nrm = norm2(&v);
    if !(nrm > 0.0) {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= nrm);
    for _ in 0..POWER_MAX_ITER {
        let mut next = a.mul_vec(&v);
        let nrm = norm2(&next);
        if !(nrm > 0.0) {
            return None;
        }
        next.iter_mut().for_each(|x| *x /= nrm);
        let diff = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        v = next;
        if diff < POWER_TOL {
            return Some(v);
        }
    }
    None
}

fn fix_sign(w: &mut [f64]) {
    let mut best = 0;
    for (i, x) in w.iter().enumerate() {
        if x.abs() > w[best].abs() {
            best = i;
        }
    }
    if w[best] < 0.0 {
        w.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Eigenvalues are returned in descending order with eigenvectors as the
/// matching columns.
pub fn symmetric_eigen(a: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "symmetric_eigen needs a square matrix");
    let mut m = a.clone();
    let mut v = DenseMatrix::identity(n);
    let scale = a.frobenius_norm();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for j in 0..n {
            for i in 0..j {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off.sqrt() <= 1e-15 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    (values, v.select_cols(&order))
}

/// Least-squares coefficients `Γ̂ = argmin ‖Y − TΓ‖²` via Householder QR.
pub fn least_squares(t: &DenseMatrix, y: &DenseMatrix) -> Result<DenseMatrix> {
    let (n, h) = t.shape();
    if y.nrows() != n {
        return Err(Error::DimensionMismatch {
            what: "response rows",
            expected: n,
            found: y.nrows(),
        });
    }
    if n < h {
        return Err(Error::DimensionMismatch {
            what: "least-squares rows (need rows >= columns)",
            expected: h,
            found: n,
        });
    }
    for j in 0..h {
        if dot(t.col(j), t.col(j)) <= ZERO_COLUMN_NORM_SQ {
            return Err(Error::RankDeficient { column: j });
        }
    }
    let mut a = t.clone();
    let mut b = y.clone();
    let mut diag = vec![0.0; h];
    for k in 0..h {
        let col = &mut a.col_mut(k)[k..];
        let alpha = norm2(col);
        if alpha == 0.0 {
            return Err(Error::RankDeficient { column: k });
        }
        let alpha = if col[0] > 0.0 { -alpha } else { alpha };
        col[0] -= alpha;
        let vnorm_sq = dot(col, col);
        diag[k] = alpha;
        let v: Vec<f64> = col.to_vec();
        let reflect = |target: &mut [f64]| {
            let s = 2.0 * dot(&v, target) / vnorm_sq;
            axpy(-s, &v, target);
        };
        for j in (k + 1)..h {
            reflect(&mut a.col_mut(j)[k..]);
        }
        for j in 0..b.ncols() {
            reflect(&mut b.col_mut(j)[k..]);
        }
    }
    let scale = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let mut gamma = DenseMatrix::zeros(h, y.ncols());
    for c in 0..y.ncols() {
        for k in (0..h).rev() {
            if diag[k].abs() <= 1e-13 * scale {
                return Err(Error::RankDeficient { column: k });
            }
            let mut acc = b[(k, c)];
            for j in (k + 1)..h {
                acc -= a[(k, j)] * gamma[(j, c)];
            }
            gamma[(k, c)] = acc / diag[k];
        }
    }
    Ok(gamma)
}

/// LU factorization with partial pivoting of a square matrix.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: DenseMatrix,
    piv: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &DenseMatrix) -> Result<Lu> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "LU needs a square matrix");
        let mut lu = a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in (k + 1)..n {
                if lu[(i, k)].abs() > best {
                    best = lu[(i, k)].abs();
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular);
            }
            if p != k {
                piv.swap(p, k);
                for j in 0..n {
                    let tmp = lu[(p, j)];
                    lu[(p, j)] = lu[(k, j)];
                    lu[(k, j)] = tmp;
                }
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                lu[(i, k)] /= pivot;
            }
            for j in (k + 1)..n {
                let ukj = lu[(k, j)];
                if ukj == 0.0 {
                    continue;
                }
                for i in (k + 1)..n {
                    lu[(i, j)] -= lu[(i, k)] * ukj;
                }
            }
        }
        Ok(Lu { lu, piv })
    }

    pub fn dim(&self) -> usize {
        self.piv.len()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        // Column-oriented substitution so the inner loops run over contiguous data.
        for k in 0..n {
            let xk = x[k];
            if xk != 0.0 {
                axpy(-xk, &self.lu.col(k)[k + 1..], &mut x[k + 1..]);
            }
        }
        for k in (0..n).rev() {
            let col = self.lu.col(k);
            x[k] /= col[k];
            let xk = x[k];
            if xk != 0.0 {
                axpy(-xk, &col[..k], &mut x[..k]);
            }
        }
        x
    }

    /// Solves `Aᵗ x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut z = b.to_vec();
        for i in 0..n {
            let col = self.lu.col(i);
            z[i] = (z[i] - dot(&col[..i], &z[..i])) / col[i];
        }
        for i in (0..n).rev() {
            let col = self.lu.col(i);
            z[i] -= dot(&col[i + 1..], &z[i + 1..]);
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.piv.iter().enumerate() {
            x[p] = z[i];
        }
        x
    }

    pub fn solve_matrix(&self, b: &DenseMatrix) -> DenseMatrix {
        let cols: Vec<Vec<f64>> = (0..b.ncols()).map(|j| self.solve(b.col(j))).collect();
        DenseMatrix::from_columns(self.dim(), &cols).expect("consistent shapes")
    }

    pub fn inverse(&self) -> DenseMatrix {
        self.solve_matrix(&DenseMatrix::identity(self.dim()))
    }
}

fn one_norm(a: &DenseMatrix) -> f64 {
    (0..a.ncols())
        .map(|j| a.col(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Reciprocal 1-norm condition number `1 / (‖A‖₁ ‖A⁻¹‖₁)`.
pub fn reciprocal_condition(a: &DenseMatrix, inverse: &DenseMatrix) -> f64 {
    let denom = one_norm(a) * one_norm(inverse);
    if denom > 0.0 && denom.is_finite() {
        1.0 / denom
    } else {
        0.0
    }
}

/// Solves the symmetric positive definite system `A x = b` in place.
/// `a` is a row-major `n×n` buffer; returns `false` when `A` is not
/// numerically positive definite.
pub(crate) fn cholesky_solve(a: &mut [f64], b: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    true
}
