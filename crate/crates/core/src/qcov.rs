//! Quantile dependence metrics between a predictor and a response.
//!
//! * Li: `E{ψ_τ(Z₂ − Q_τ(Z₂)) (Z₁ − EZ₁)}`, cheap and vectorizable.
//! * Dodge: `var(Z₁) · β̃`, with `β̃` the τ-quantile regression slope of
//!   `Z₂` on `Z₁`. Needs one regression per column pair.
//! * Choi: signed geometric mean of the two reciprocal quantile slopes
//!   (a correlation), and the matching symmetric covariance.
//!
//! All sample moments use the `1/n` normalization.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{mean, population_variance, sum, sum_and_dot, DenseMatrix};
use crate::quantreg::{empirical_quantile, fit_quantile_regression, psi, QuantileLevel};

/// Variance at or below which a column is treated as constant.
pub const ZERO_VARIANCE: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Classical,
    Li,
    Dodge,
    Choi,
}

impl MetricKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Classical => "classical",
            MetricKind::Li => "li",
            MetricKind::Dodge => "dodge",
            MetricKind::Choi => "choi",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "classical" => Ok(MetricKind::Classical),
            "li" => Ok(MetricKind::Li),
            "dodge" => Ok(MetricKind::Dodge),
            "choi" => Ok(MetricKind::Choi),
            other => Err(Error::InvalidArgument(format!(
                "unknown metric '{other}' (expected li, dodge or choi)"
            ))),
        }
    }
}

/// A dependence metric together with its quantile level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QcovMetric {
    pub kind: MetricKind,
    /// Ignored for [`MetricKind::Classical`].
    pub tau: QuantileLevel,
}

impl QcovMetric {
    pub fn classical() -> Self {
        QcovMetric {
            kind: MetricKind::Classical,
            tau: QuantileLevel::MEDIAN,
        }
    }

    pub fn li(tau: QuantileLevel) -> Self {
        QcovMetric {
            kind: MetricKind::Li,
            tau,
        }
    }

    pub fn dodge(tau: QuantileLevel) -> Self {
        QcovMetric {
            kind: MetricKind::Dodge,
            tau,
        }
    }

    pub fn choi(tau: QuantileLevel) -> Self {
        QcovMetric {
            kind: MetricKind::Choi,
            tau,
        }
    }
}

/// Why a metric fell back to 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Degeneracy {
    /// An argument has (numerically) zero variance.
    ZeroVariance,
    /// The two Choi slopes have opposite signs, so their geometric mean is undefined.
    DiscordantSlopes,
}

/// A metric value, flagged when a degenerate input forced it to 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub degeneracy: Option<Degeneracy>,
}

impl Estimate {
    fn ok(value: f64) -> Self {
        Estimate {
            value,
            degeneracy: None,
        }
    }

    fn degenerate(kind: Degeneracy) -> Self {
        Estimate {
            value: 0.0,
            degeneracy: Some(kind),
        }
    }
}

fn check_pair(z1: &[f64], z2: &[f64]) -> Result<()> {
    if z1.len() != z2.len() {
        return Err(Error::DimensionMismatch {
            what: "paired vector length",
            expected: z1.len(),
            found: z2.len(),
        });
    }
    if z1.len() < 2 {
        return Err(Error::EmptyInput);
    }
    if z1.iter().chain(z2).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "metric input" });
    }
    Ok(())
}

/// Li quantile covariance `(1/n) Σ ψ_τ(z2ᵢ − Q̂_τ(z2)) (z1ᵢ − z̄1)`.
pub fn qcov_li(z1: &[f64], z2: &[f64], tau: QuantileLevel) -> Result<f64> {
    check_pair(z1, z2)?;
    let q = empirical_quantile(z2, tau)?;
    let mu = mean(z1);
    let n = z1.len() as f64;
    Ok(z1
        .iter()
        .zip(z2)
        .map(|(a, b)| psi(b - q, tau) * (a - mu))
        .sum::<f64>()
        / n)
}

/// τ-quantile regression slope of `response` on `predictor` (with intercept).
fn quantile_slope(predictor: &[f64], response: &[f64], tau: QuantileLevel) -> Result<f64> {
    let fit = fit_quantile_regression(&DenseMatrix::column_vector(predictor), response, tau, true)?;
    Ok(fit.coefficients[0])
}

/// Dodge quantile covariance `var(z1) · β̃(z2 ~ z1)`.
pub fn qcov_dodge(z1: &[f64], z2: &[f64], tau: QuantileLevel) -> Result<Estimate> {
    check_pair(z1, z2)?;
    let v1 = population_variance(z1);
    if v1 <= ZERO_VARIANCE {
        return Ok(Estimate::degenerate(Degeneracy::ZeroVariance));
    }
    Ok(Estimate::ok(v1 * quantile_slope(z1, z2, tau)?))
}

struct ChoiParts {
    sign: f64,
    slope_product: f64,
    variance_product: f64,
}

fn choi_parts(z1: &[f64], z2: &[f64], tau: QuantileLevel) -> Result<std::result::Result<ChoiParts, Degeneracy>> {
    check_pair(z1, z2)?;
    let v1 = population_variance(z1);
    let v2 = population_variance(z2);
    if v1 <= ZERO_VARIANCE || v2 <= ZERO_VARIANCE {
        return Ok(Err(Degeneracy::ZeroVariance));
    }
    let b21 = quantile_slope(z1, z2, tau)?;
    let b12 = quantile_slope(z2, z1, tau)?;
    let slope_product = b21 * b12;
    if slope_product < 0.0 {
        log::warn!("Choi metric: discordant quantile slopes ({b21:.3e}, {b12:.3e}); using 0");
        return Ok(Err(Degeneracy::DiscordantSlopes));
    }
    // Zero product gives 0 whatever the sign, so either slope's sign works.
    let sign = if b21 != 0.0 { b21.signum() } else { b12.signum() };
    Ok(Ok(ChoiParts {
        sign,
        slope_product,
        variance_product: v1 * v2,
    }))
}

/// Choi quantile correlation `sign(β₂.₁)·√(β₂.₁ β₁.₂)`.
pub fn qcor_choi(z1: &[f64], z2: &[f64], tau: QuantileLevel) -> Result<Estimate> {
    Ok(match choi_parts(z1, z2, tau)? {
        Ok(parts) => Estimate::ok(parts.sign * parts.slope_product.sqrt()),
        Err(kind) => Estimate::degenerate(kind),
    })
}

/// Symmetric Choi quantile covariance `sign(β₂.₁)·√(qcov*(z1,z2)·qcov*(z2,z1))`.
pub fn qcov_choi(z1: &[f64], z2: &[f64], tau: QuantileLevel) -> Result<Estimate> {
    Ok(match choi_parts(z1, z2, tau)? {
        Ok(parts) => Estimate::ok(parts.sign * (parts.variance_product * parts.slope_product).sqrt()),
        Err(kind) => Estimate::degenerate(kind),
    })
}

/// A degenerate entry of a metric matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EntryNote {
    pub row: usize,
    pub col: usize,
    pub kind: Degeneracy,
}

/// `m×l` matrix of a metric between predictor and response columns.
#[derive(Clone, Debug, PartialEq)]
pub struct QcovMatrix {
    pub values: DenseMatrix,
    pub metric: QcovMetric,
    pub notes: Vec<EntryNote>,
}

/// Metric between every predictor column of `x` and response column of `y`.
///
/// Classical and Li are whole-column products (`(1/n) Xcᵗ·Yc` and
/// `(1/n) Xcᵗ·Ψ`); Dodge and Choi run one scalar evaluation per column pair.
pub fn qcov_matrix(x: &DenseMatrix, y: &DenseMatrix, metric: QcovMetric) -> Result<QcovMatrix> {
    let n = x.nrows();
    if y.nrows() != n {
        return Err(Error::DimensionMismatch {
            what: "response rows",
            expected: n,
            found: y.nrows(),
        });
    }
    if n < 2 {
        return Err(Error::EmptyInput);
    }
    x.ensure_finite("predictor matrix")?;
    y.ensure_finite("response matrix")?;
    qcov_matrix_finite(x, y, metric)
}

/// [`qcov_matrix`] for inputs already known to be finite with matching rows.
fn qcov_matrix_finite(x: &DenseMatrix, y: &DenseMatrix, metric: QcovMetric) -> Result<QcovMatrix> {
    let n = x.nrows();
    let (m, l) = (x.ncols(), y.ncols());
    let mut notes = Vec::new();
    let values = match metric.kind {
        MetricKind::Classical => {
            let centered_y = centered(y);
            // Σ(x − x̄)z = Σxz − x̄Σz, without materializing the centered x.
            let z_sums: Vec<f64> = (0..l).map(|k| sum(centered_y.col(k))).collect();
            let inv_n = 1.0 / n as f64;
            let mut out = DenseMatrix::zeros(m, l);
            for j in 0..m {
                for k in 0..l {
                    let (x_sum, xz) = sum_and_dot(x.col(j), centered_y.col(k));
                    out[(j, k)] = (xz - x_sum * inv_n * z_sums[k]) * inv_n;
                }
            }
            out
        }
        MetricKind::Li => {
            // ψ_τ takes only the values τ and τ − 1 and Σ(x − x̄) = 0, so
            // Σ(x − x̄)ψ = −(Σ_N x − |N|·x̄) over the set N of rows below the
            // quantile. N is held as a 0/1 mask to keep the pass contiguous.
            let mut masks = DenseMatrix::zeros(n, l);
            let mut counts = vec![0.0; l];
            for k in 0..l {
                let q = empirical_quantile(y.col(k), metric.tau)?;
                for (dst, &v) in masks.col_mut(k).iter_mut().zip(y.col(k)) {
                    if psi(v - q, metric.tau) < 0.0 {
                        *dst = 1.0;
                        counts[k] += 1.0;
                    }
                }
            }
            let inv_n = 1.0 / n as f64;
            let mut out = DenseMatrix::zeros(m, l);
            for j in 0..m {
                for k in 0..l {
                    let (x_sum, below) = sum_and_dot(x.col(j), masks.col(k));
                    out[(j, k)] = (counts[k] * x_sum * inv_n - below) * inv_n;
                }
            }
            out
        }
        MetricKind::Dodge | MetricKind::Choi => {
            let mut out = DenseMatrix::zeros(m, l);
            for k in 0..l {
                for j in 0..m {
                    let est = match metric.kind {
                        MetricKind::Dodge => qcov_dodge(x.col(j), y.col(k), metric.tau),
                        _ => qcov_choi(x.col(j), y.col(k), metric.tau),
                    }
                    .map_err(|e| Error::Entry {
                        row: j,
                        col: k,
                        source: Box::new(e),
                    })?;
                    if let Some(kind) = est.degeneracy {
                        notes.push(EntryNote { row: j, col: k, kind });
                    }
                    out[(j, k)] = est.value;
                }
            }
            out
        }
    };
    Ok(QcovMatrix {
        values,
        metric,
        notes,
    })
}

fn centered(m: &DenseMatrix) -> DenseMatrix {
    let means = m.column_means();
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] - means[j])
}

/// Source of the cross-dependence matrix `S` that the latent loop
/// diagonalizes; lets callers plug in the metric. The loop only passes
/// finite blocks with matching row counts and at least two rows.
pub trait CrossCovariance {
    fn cross_covariance(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<QcovMatrix>;

    /// Metric recorded on the fitted model.
    fn metric(&self) -> QcovMetric;
}

impl CrossCovariance for QcovMetric {
    fn cross_covariance(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<QcovMatrix> {
        if x.nrows() != y.nrows() || x.nrows() < 2 {
            return qcov_matrix(x, y, *self);
        }
        qcov_matrix_finite(x, y, *self)
    }

    fn metric(&self) -> QcovMetric {
        *self
    }
}
