//! Linear quantile regression: minimization of the mean check loss
//! `(1/n) Σ ρ_τ(yᵢ − xᵢβ)` for a single response.
//!
//! The solver is an exact vertex descent on the underlying LP. It starts from
//! the `p` observations closest to the least-squares fit, then moves between
//! basic solutions (fits interpolating `p` observations) along improving
//! edges, with an exact line search over the breakpoints of the piecewise
//! linear objective, until no edge decreases the objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, cholesky_solve, dot, norm2, DenseMatrix};

/// A quantile level strictly between 0 and 1.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct QuantileLevel(f64);

impl QuantileLevel {
    pub const MEDIAN: QuantileLevel = QuantileLevel(0.5);

    pub fn new(tau: f64) -> Result<Self> {
        if tau > 0.0 && tau < 1.0 {
            Ok(QuantileLevel(tau))
        } else {
            Err(Error::InvalidQuantile(tau))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for QuantileLevel {
    type Error = Error;

    fn try_from(tau: f64) -> Result<Self> {
        QuantileLevel::new(tau)
    }
}

impl From<QuantileLevel> for f64 {
    fn from(q: QuantileLevel) -> f64 {
        q.0
    }
}

impl std::fmt::Display for QuantileLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Check loss `ρ_τ(u) = u(τ − I(u<0))`.
#[inline]
pub fn check_loss(u: f64, tau: QuantileLevel) -> f64 {
    if u < 0.0 {
        u * (tau.0 - 1.0)
    } else {
        u * tau.0
    }
}

/// `ψ_τ(u) = τ − I(u<0)`; the indicator is strict so `ψ_τ(0) = τ`.
#[inline]
pub fn psi(u: f64, tau: QuantileLevel) -> f64 {
    if u < 0.0 {
        tau.0 - 1.0
    } else {
        tau.0
    }
}

/// Inverted-CDF sample quantile: the order statistic `v₍⌈nτ⌉₎`.
pub fn empirical_quantile(v: &[f64], tau: QuantileLevel) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::EmptyInput);
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { what: "quantile input" });
    }
    let n = v.len();
    // The small offset keeps nτ that is an integer up to rounding from
    // jumping to the next order statistic.
    let k = ((n as f64 * tau.0 - 1e-9).ceil() as usize).clamp(1, n);
    let mut buf = v.to_vec();
    let (_, kth, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*kth)
}

/// Mean check loss of the residuals `y − Xβ − intercept`.
pub fn mean_check_loss(residuals: &[f64], tau: QuantileLevel) -> f64 {
    residuals.iter().map(|&r| check_loss(r, tau)).sum::<f64>() / residuals.len() as f64
}

/// Result of a single-response quantile regression.
#[derive(Clone, Debug, PartialEq)]
pub struct QrFit {
    /// One entry per predictor column; dropped columns hold 0.
    pub coefficients: Vec<f64>,
    /// 0 when fitted without intercept.
    pub intercept: f64,
    /// Mean check loss at the returned coefficients.
    pub objective: f64,
    /// Vertex pivots taken after the starting basis.
    pub iterations: usize,
    /// Predictor columns removed because they were constant (with an
    /// intercept) or linearly dependent on earlier columns.
    pub dropped_columns: Vec<usize>,
}

impl QrFit {
    pub fn is_degenerate(&self) -> bool {
        !self.dropped_columns.is_empty()
    }
}

/// Fits the τ-th conditional quantile of `y` on the columns of `x`.
pub fn fit_quantile_regression(
    x: &DenseMatrix,
    y: &[f64],
    tau: QuantileLevel,
    with_intercept: bool,
) -> Result<QrFit> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            what: "response length",
            expected: n,
            found: y.len(),
        });
    }
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    x.ensure_finite("design matrix")?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "response" });
    }
    let requested = x.ncols() + usize::from(with_intercept);
    if requested == 0 {
        return Err(Error::InvalidArgument(
            "quantile regression needs at least one predictor or an intercept".into(),
        ));
    }
    if n < requested {
        return Err(Error::DimensionMismatch {
            what: "observations (need at least one per coefficient)",
            expected: requested,
            found: n,
        });
    }

    let design = Design::build(x, with_intercept);
    if !design.dropped.is_empty() {
        log::warn!(
            "quantile regression: dropped degenerate predictor columns {:?}",
            design.dropped
        );
    }
    let p = design.p;
    if p == 0 {
        // Every predictor was zero and no intercept: the fit is identically 0.
        return Ok(QrFit {
            coefficients: vec![0.0; x.ncols()],
            intercept: 0.0,
            objective: mean_check_loss(y, tau),
            iterations: 0,
            dropped_columns: design.dropped,
        });
    }

    let start = design.least_squares(y).unwrap_or_else(|| vec![0.0; p]);
    let basis = design.initial_basis(y, &start);
    let (beta, pivots) = design.vertex_descent(y, tau, basis)?;

    let mut coefficients = vec![0.0; x.ncols()];
    let mut intercept = 0.0;
    for (k, &src) in design.columns.iter().enumerate() {
        match src {
            Column::Intercept => intercept = beta[k],
            Column::Predictor(j) => coefficients[j] = beta[k],
        }
    }
    let residuals: Vec<f64> = (0..n)
        .map(|i| y[i] - intercept - (0..x.ncols()).map(|j| x[(i, j)] * coefficients[j]).sum::<f64>())
        .collect();
    Ok(QrFit {
        coefficients,
        intercept,
        objective: mean_check_loss(&residuals, tau),
        iterations: pivots,
        dropped_columns: design.dropped,
    })
}

#[derive(Clone, Copy, Debug)]
enum Column {
    Intercept,
    Predictor(usize),
}

/// Full-column-rank design, stored both row-major (per-observation access)
/// and column-major (whole-sample products).
struct Design {
    n: usize,
    p: usize,
    rows: Vec<f64>,
    cols: Vec<f64>,
    columns: Vec<Column>,
    dropped: Vec<usize>,
}

impl Design {
    fn build(x: &DenseMatrix, with_intercept: bool) -> Design {
        let n = x.nrows();
        let mut kept: Vec<Vec<f64>> = Vec::new();
        let mut ortho: Vec<Vec<f64>> = Vec::new();
        let mut columns = Vec::new();
        let mut dropped = Vec::new();

        let mut consider = |col: Vec<f64>, src: Column, kept: &mut Vec<Vec<f64>>| -> bool {
            let norm = dot(&col, &col).sqrt();
            if norm == 0.0 {
                return false;
            }
            let mut res = col.clone();
            let mut rn = norm;
            for _ in 0..2 {
                for q in &ortho {
                    axpy(-dot(q, &res), q, &mut res);
                }
                let before = rn;
                rn = dot(&res, &res).sqrt();
                // A second pass only matters after heavy cancellation.
                if rn > 0.5 * before {
                    break;
                }
            }
            if rn <= 1e-10 * norm {
                return false;
            }
            res.iter_mut().for_each(|r| *r /= rn);
            ortho.push(res);
            kept.push(col);
            columns.push(src);
            true
        };

        if with_intercept {
            consider(vec![1.0; n], Column::Intercept, &mut kept);
        }
        for j in 0..x.ncols() {
            if !consider(x.col(j).to_vec(), Column::Predictor(j), &mut kept) {
                dropped.push(j);
            }
        }
        let p = kept.len();
        let mut rows = vec![0.0; n * p];
        for (k, col) in kept.iter().enumerate() {
            for i in 0..n {
                rows[i * p + k] = col[i];
            }
        }
        Design {
            n,
            p,
            rows,
            cols: kept.concat(),
            columns,
            dropped,
        }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.p..(i + 1) * self.p]
    }

    #[inline]
    fn col(&self, k: usize) -> &[f64] {
        &self.cols[k * self.n..(k + 1) * self.n]
    }

    /// `out = Σ_k v_k · column_k`
    fn combine(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (k, &vk) in v.iter().enumerate() {
            axpy(vk, self.col(k), out);
        }
    }

    fn residuals(&self, y: &[f64], beta: &[f64], out: &mut [f64]) {
        out.copy_from_slice(y);
        for (k, &bk) in beta.iter().enumerate() {
            axpy(-bk, self.col(k), out);
        }
    }

    /// Least-squares coefficients via the normal equations; `None` if they
    /// are not numerically positive definite.
    fn least_squares(&self, y: &[f64]) -> Option<Vec<f64>> {
        let p = self.p;
        let mut a = vec![0.0; p * p];
        let mut b: Vec<f64> = (0..p).map(|r| dot(self.col(r), y)).collect();
        for r in 0..p {
            for c in 0..=r {
                let v = dot(self.col(r), self.col(c));
                a[r * p + c] = v;
                a[c * p + r] = v;
            }
        }
        if cholesky_solve(&mut a, &mut b, p) && b.iter().all(|v| v.is_finite()) {
            Some(b)
        } else {
            None
        }
    }

    /// Picks `p` linearly independent observations, closest residuals first.
    fn initial_basis(&self, y: &[f64], beta: &[f64]) -> Vec<usize> {
        let mut r = vec![0.0; self.n];
        self.residuals(y, beta, &mut r);
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| r[a].abs().total_cmp(&r[b].abs()).then(a.cmp(&b)));
        for threshold in [1e-8, 1e-13] {
            let mut basis = Vec::with_capacity(self.p);
            let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(self.p);
            for &i in &order {
                let z = self.row(i);
                let norm = dot(z, z).sqrt();
                if norm == 0.0 {
                    continue;
                }
                let mut res = z.to_vec();
                let mut rn = norm;
                for _ in 0..2 {
                    for q in &ortho {
                        axpy(-dot(q, &res), q, &mut res);
                    }
                    let before = rn;
                    rn = dot(&res, &res).sqrt();
                    if rn > 0.5 * before {
                        break;
                    }
                }
                if rn > threshold * norm {
                    res.iter_mut().for_each(|v| *v /= rn);
                    ortho.push(res);
                    basis.push(i);
                    if basis.len() == self.p {
                        return basis;
                    }
                }
            }
        }
        // Full column rank guarantees p independent rows; unreachable in practice.
        order.truncate(self.p);
        order
    }

    fn basis_inverse(&self, basis: &[usize]) -> Result<BasisInverse> {
        let p = self.p;
        let mut rows = Vec::with_capacity(p * p);
        for &i in basis {
            rows.extend_from_slice(self.row(i));
        }
        BasisInverse::new(p, rows)
    }

    /// Simplex-style descent over basic solutions; returns the optimal
    /// coefficients and the pivot count.
    fn vertex_descent(
        &self,
        y: &[f64],
        tau: QuantileLevel,
        mut basis: Vec<usize>,
    ) -> Result<(Vec<f64>, usize)> {
        let (n, p) = (self.n, self.p);
        let t = tau.0;
        let y_scale = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let zero_tol = 1e-12 * y_scale;
        let max_pivots = 50 * n + 100;

        let mut in_basis = vec![false; n];
        let mut r = vec![0.0; n];
        let mut g = vec![0.0; n];
        // Gradient weights −ψ(r_i) of off-basis, off-zero points and a = Xᵗ·weights.
        let mut wgt = vec![0.0; n];
        let mut a = vec![0.0; p];
        // Residuals and gradient are carried forward between pivots and
        // recomputed from β whenever the basis inverse is rebuilt.
        let mut fresh = true;
        let mut breaks: Vec<(f64, usize)> = Vec::with_capacity(n);

        let mut binv = self.basis_inverse(&basis)?;
        let mut beta = binv.solve(&basis.iter().map(|&i| y[i]).collect::<Vec<_>>());
        let mut best_obj = f64::INFINITY;
        let mut best_beta = beta.clone();

        for pivots in 0..=max_pivots {
            in_basis.iter_mut().for_each(|b| *b = false);
            basis.iter().for_each(|&i| in_basis[i] = true);
            if fresh {
                self.residuals(y, &beta, &mut r);
                for &i in &basis {
                    r[i] = 0.0;
                }
            }
            let obj: f64 = r.iter().map(|&v| check_loss(v, tau)).sum();
            if obj >= best_obj && pivots > 0 {
                // No strict progress: the previous vertex is optimal up to rounding.
                return Ok((best_beta, pivots));
            }
            best_obj = obj;
            best_beta.clone_from(&beta);

            // Gradient of the objective w.r.t. β from points off zero.
            let mut degenerate = Vec::new();
            for i in 0..n {
                let mut w = 0.0;
                if !in_basis[i] {
                    if r[i].abs() <= zero_tol {
                        degenerate.push(i);
                    } else {
                        w = -psi(r[i], tau);
                    }
                }
                if !fresh && w != wgt[i] {
                    axpy(w - wgt[i], self.row(i), &mut a);
                }
                wgt[i] = w;
            }
            if fresh {
                for (k, ak) in a.iter_mut().enumerate() {
                    *ak = dot(self.col(k), &wgt);
                }
                fresh = false;
            }
            let u = binv.solve_transpose(&a);
            let deg_coords: Vec<Vec<f64>> =
                degenerate.iter().map(|&i| binv.solve_transpose(self.row(i))).collect();

            // Directional derivative along ±X_h⁻¹e_j (releasing basis point j).
            let mut best: Option<(f64, usize, f64)> = None;
            for j in 0..p {
                for sigma in [1.0, -1.0] {
                    let mut d = sigma * u[j] + if sigma > 0.0 { 1.0 - t } else { t };
                    let mut scale = 1.0 + u[j].abs();
                    for c in &deg_coords {
                        let v = -sigma * c[j];
                        d += if v > 0.0 { t * v } else { (t - 1.0) * v };
                        scale += c[j].abs();
                    }
                    if d < -1e-12 * scale && best.is_none_or(|(bd, _, _)| d < bd) {
                        best = Some((d, j, sigma));
                    }
                }
            }
            let Some((_, j, sigma)) = best else {
                return Ok((beta, pivots));
            };

            let delta: Vec<f64> = binv.column(j).iter().map(|v| sigma * v).collect();
            let mut slope = 0.0;
            breaks.clear();
            self.combine(&delta, &mut g);
            for i in 0..n {
                if in_basis[i] {
                    g[i] = 0.0;
                    continue;
                }
                if r[i].abs() <= zero_tol {
                    let v = -g[i];
                    slope += if v > 0.0 { t * v } else { (t - 1.0) * v };
                } else {
                    slope += -psi(r[i], tau) * g[i];
                    if g[i] != 0.0 {
                        let step = r[i] / g[i];
                        if step > 0.0 {
                            breaks.push((step, i));
                        }
                    }
                }
            }
            slope += if sigma > 0.0 { 1.0 - t } else { t };
            if slope >= 0.0 {
                return Ok((beta, pivots));
            }
            breaks.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut entering = None;
            for &(step, i) in &breaks {
                slope += g[i].abs();
                if slope >= 0.0 {
                    entering = Some((step, i));
                    break;
                }
            }
            let Some((step, k)) = entering else {
                return Err(Error::SolverFailure { iterations: pivots });
            };
            let leaving = basis[j];
            axpy(-step, &g, &mut r);
            r[k] = 0.0;
            r[leaving] = -step * sigma;
            basis[j] = k;
            // Rebuild from scratch every p pivots to shed accumulated rounding.
            let updated = if (pivots + 1) % p == 0 {
                fresh = true;
                self.basis_inverse(&basis).ok()
            } else {
                binv.replace_row(j, self.row(k))
            };
            match updated {
                Some(next) => binv = next,
                None => return Ok((best_beta, pivots)),
            }
            beta = binv.solve(&basis.iter().map(|&i| y[i]).collect::<Vec<_>>());
        }
        Err(Error::SolverFailure {
            iterations: max_pivots,
        })
    }
}

/// Explicit row-major inverse of the basis rows `X_h`, updated in O(p²)
/// when one basis row is exchanged.
struct BasisInverse {
    p: usize,
    inv: Vec<f64>,
}

impl BasisInverse {
    /// Gauss-Jordan inversion with partial pivoting of the row-major `a`.
    fn new(p: usize, mut a: Vec<f64>) -> Result<BasisInverse> {
        let mut inv = vec![0.0; p * p];
        for k in 0..p {
            inv[k * p + k] = 1.0;
        }
        for k in 0..p {
            let piv = (k..p)
                .max_by(|&i, &j| a[i * p + k].abs().total_cmp(&a[j * p + k].abs()))
                .expect("non-empty range");
            let pv = a[piv * p + k];
            if pv == 0.0 || !pv.is_finite() {
                return Err(Error::Singular);
            }
            if piv != k {
                for c in 0..p {
                    a.swap(piv * p + c, k * p + c);
                    inv.swap(piv * p + c, k * p + c);
                }
            }
            let scale = 1.0 / pv;
            a[k * p..(k + 1) * p].iter_mut().for_each(|v| *v *= scale);
            inv[k * p..(k + 1) * p].iter_mut().for_each(|v| *v *= scale);
            let (a_k, inv_k) = (a[k * p..(k + 1) * p].to_vec(), inv[k * p..(k + 1) * p].to_vec());
            for r in 0..p {
                if r == k {
                    continue;
                }
                let f = a[r * p + k];
                if f != 0.0 {
                    axpy(-f, &a_k, &mut a[r * p..(r + 1) * p]);
                    axpy(-f, &inv_k, &mut inv[r * p..(r + 1) * p]);
                }
            }
        }
        Ok(BasisInverse { p, inv })
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.inv[r * self.p + c]
    }

    /// `X_h⁻¹ b`
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.inv.chunks_exact(self.p).map(|row| dot(row, b)).collect()
    }

    /// `X_h⁻ᵀ a`
    fn solve_transpose(&self, a: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.p];
        for (row, &ar) in self.inv.chunks_exact(self.p).zip(a) {
            axpy(ar, row, &mut out);
        }
        out
    }

    /// `X_h⁻¹ e_j`
    fn column(&self, j: usize) -> Vec<f64> {
        (0..self.p).map(|r| self.at(r, j)).collect()
    }

    /// Inverse after row `j` of `X_h` becomes `z`; `None` if that is singular.
    fn replace_row(&self, j: usize, z: &[f64]) -> Option<BasisInverse> {
        let p = self.p;
        let c = self.column(j);
        let denom = dot(z, &c);
        let scale = norm2(z) * norm2(&c);
        if !(denom.abs() > 1e-12 * scale) {
            return None;
        }
        // zᵀX_h⁻¹ − e_jᵀ
        let mut v = self.solve_transpose(z);
        v[j] -= 1.0;
        let mut inv = self.inv.clone();
        for r in 0..p {
            axpy(-c[r] / denom, &v, &mut inv[r * p..(r + 1) * p]);
        }
        Some(BasisInverse { p, inv })
    }
}
