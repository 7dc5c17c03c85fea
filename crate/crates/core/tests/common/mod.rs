//! Test-only oracles and data helpers shared by the integration suites.
#![allow(dead_code)]

use fpqr::linalg::DenseMatrix;
use fpqr::quantreg::{check_loss, QuantileLevel};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DenseMatrix {
    DenseMatrix::from_fn(r, c, |_, _| rng.random_range(-2.0..2.0))
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DenseMatrix {
    use rand_distr::{Distribution, StandardNormal};
    DenseMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

pub fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(m.nrows(), m.ncols(), m.as_slice())
}

pub fn from_na(m: &DMatrix<f64>) -> DenseMatrix {
    DenseMatrix::from_column_major(m.nrows(), m.ncols(), m.as_slice().to_vec()).unwrap()
}

fn combinations(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::with_capacity(k), f);
}

/// Exact LP optimum of the mean check loss by enumerating every basic
/// solution (coefficients interpolating `p` observations). Returns
/// `(objective, coefficients)` where the intercept, if any, comes first.
pub fn brute_force_qr(x: &DenseMatrix, y: &[f64], tau: QuantileLevel, intercept: bool) -> (f64, Vec<f64>) {
    let n = x.nrows();
    let p = x.ncols() + usize::from(intercept);
    let design = DMatrix::from_fn(n, p, |i, j| {
        if intercept {
            if j == 0 {
                1.0
            } else {
                x[(i, j - 1)]
            }
        } else {
            x[(i, j)]
        }
    });
    let yv = DVector::from_column_slice(y);
    let mut best = (f64::INFINITY, vec![]);
    combinations(n, p, &mut |rows| {
        let a = DMatrix::from_fn(p, p, |r, c| design[(rows[r], c)]);
        let b = DVector::from_fn(p, |r, _| y[rows[r]]);
        let lu = a.clone().lu();
        if a.determinant().abs() < 1e-10 {
            return;
        }
        if let Some(beta) = lu.solve(&b) {
            let res = &yv - &design * &beta;
            let obj = res.iter().map(|&r| check_loss(r, tau)).sum::<f64>() / n as f64;
            if obj < best.0 {
                best = (obj, beta.iter().copied().collect());
            }
        }
    });
    best
}

/// Mean check loss of `y − intercept − X·coef`.
pub fn qr_objective(x: &DenseMatrix, y: &[f64], tau: QuantileLevel, intercept: f64, coef: &[f64]) -> f64 {
    let n = x.nrows();
    (0..n)
        .map(|i| {
            let fit = intercept + (0..x.ncols()).map(|j| x[(i, j)] * coef[j]).sum::<f64>();
            check_loss(y[i] - fit, tau)
        })
        .sum::<f64>()
        / n as f64
}

/// Dense symmetric eigen-solver oracle; eigenvalues descending.
pub fn dense_eigen(a: &DenseMatrix) -> (Vec<f64>, Vec<Vec<f64>>) {
    let eig = nalgebra::SymmetricEigen::new(to_na(a));
    let mut idx: Vec<usize> = (0..a.nrows()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = idx
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    (vals, vecs)
}

/// Checks that no single coordinate step of size `eps` lowers the mean
/// check loss by more than `tol`. The intercept is stepped only when the
/// model has one.
pub fn subgradient_certificate(
    x: &DenseMatrix,
    y: &[f64],
    tau: QuantileLevel,
    has_intercept: bool,
    intercept: f64,
    coef: &[f64],
    eps: f64,
    tol: f64,
) -> bool {
    let base = qr_objective(x, y, tau, intercept, coef);
    let first = if has_intercept { 0 } else { 1 };
    for d in first..=coef.len() {
        for s in [-eps, eps] {
            let (mut b0, mut b) = (intercept, coef.to_vec());
            if d == 0 {
                b0 += s;
            } else {
                b[d - 1] += s;
            }
            if qr_objective(x, y, tau, b0, &b) < base - tol {
                return false;
            }
        }
    }
    true
}

/// Li covariance written out with a sort-based quantile.
pub fn li_oracle(z1: &[f64], z2: &[f64], tau: f64) -> f64 {
    let n = z1.len();
    let mut sorted = z2.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = ((tau * n as f64).ceil() as usize).clamp(1, n);
    let q = sorted[k - 1];
    let mu = z1.iter().sum::<f64>() / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let psi = tau - if z2[i] - q < 0.0 { 1.0 } else { 0.0 };
        acc += psi * (z1[i] - mu);
    }
    acc / n as f64
}

/// Population variance.
pub fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mu = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n
}

/// Slope of the exact LP quantile fit of `y` on one predictor.
pub fn oracle_slope(z: &[f64], y: &[f64], tau: QuantileLevel) -> f64 {
    brute_force_qr(&DenseMatrix::column_vector(z), y, tau, true).1[1]
}

pub struct ReferencePls {
    pub w: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub bhat: DMatrix<f64>,
}

/// Textbook NIPALS on mean-centered blocks: weights from the eigenvector of
/// `XᵃᵗYᵃ YᵃᵗXᵃ`, least-squares Γ on the scores.
pub fn reference_nipals(x: &DenseMatrix, y: &DenseMatrix, h: usize) -> ReferencePls {
    let center = |m: DMatrix<f64>| {
        let mut m = m;
        for mut c in m.column_iter_mut() {
            let mu = c.mean();
            c.add_scalar_mut(-mu);
        }
        m
    };
    let x0 = center(to_na(x));
    let y0 = center(to_na(y));
    let (n, m, l) = (x0.nrows(), x0.ncols(), y0.ncols());
    let (mut xa, mut ya) = (x0.clone(), y0.clone());
    let mut w = DMatrix::zeros(m, h);
    let mut t = DMatrix::zeros(n, h);
    let mut p = DMatrix::zeros(m, h);
    let mut q = DMatrix::zeros(l, h);
    for a in 0..h {
        let s = xa.transpose() * &ya;
        let (_, vecs) = dense_eigen(&from_na(&(&s * s.transpose())));
        let mut wa = DVector::from_vec(vecs[0].clone());
        let imax = wa.iamax();
        if wa[imax] < 0.0 {
            wa = -wa;
        }
        let ta = &xa * &wa;
        let tt = ta.dot(&ta);
        let pa = xa.transpose() * &ta / tt;
        let qa = ya.transpose() * &ta / tt;
        xa -= &ta * pa.transpose();
        ya -= &ta * qa.transpose();
        w.set_column(a, &wa);
        t.set_column(a, &ta);
        p.set_column(a, &pa);
        q.set_column(a, &qa);
    }
    let gamma = (t.transpose() * &t).try_inverse().unwrap() * t.transpose() * &y0;
    let bhat = &w * (p.transpose() * &w).try_inverse().unwrap() * gamma;
    ReferencePls { w, t, p, q, bhat }
}

pub fn max_abs_diff(a: &DenseMatrix, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    (to_na(a) - b).abs().max()
}

pub fn max_abs_diff_dense(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.sub(b).max_abs()
}

pub mod props;
