//! Evaluation: error metrics, component-count cross-validation, and the
//! simulation studies used to compare fPQR against PLS.

mod cv;
mod simulate;
mod study;

use std::fmt;
use std::str::FromStr;

pub use cv::{cross_validate, fold_assignment, CvResult};
pub use simulate::{generate_simulation, ErrorLaw, Scheme, SimulatedData, SimulationSpec};
pub use study::{aggregate, run_study, write_study_csv, Aggregate, StudyResult, StudyRow, Summary};

use crate::error::{Error, Result};
use crate::fpqr::{fit_fpqr_with, FpqrOptions};
use crate::linalg::{CenteringMode, DenseMatrix};
use crate::pls::{fit_pls_with, FittedModel};
use crate::qcov::MetricKind;
use crate::quantreg::{check_loss, QuantileLevel};

fn check_same_shape(a: &DenseMatrix, b: &DenseMatrix) -> Result<()> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch {
            what: "row count",
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            what: "column count",
            expected: a.ncols(),
            found: b.ncols(),
        });
    }
    Ok(())
}

/// `E_τ`: check loss summed over response columns, averaged over rows.
pub fn quantile_error(y_true: &DenseMatrix, y_pred: &DenseMatrix, tau: QuantileLevel) -> Result<f64> {
    check_same_shape(y_true, y_pred)?;
    let total: f64 = y_true
        .as_slice()
        .iter()
        .zip(y_pred.as_slice())
        .map(|(t, p)| check_loss(t - p, tau))
        .sum();
    Ok(total / y_true.nrows() as f64)
}

/// Absolute error summed over response columns, averaged over rows.
pub fn mean_absolute_error(y_true: &DenseMatrix, y_pred: &DenseMatrix) -> Result<f64> {
    check_same_shape(y_true, y_pred)?;
    let total: f64 = y_true
        .as_slice()
        .iter()
        .zip(y_pred.as_slice())
        .map(|(t, p)| (t - p).abs())
        .sum();
    Ok(total / y_true.nrows() as f64)
}

/// Mean squared prediction error over all entries.
pub fn test_mse(y_true: &DenseMatrix, y_pred: &DenseMatrix) -> Result<f64> {
    check_same_shape(y_true, y_pred)?;
    let total: f64 = y_true
        .as_slice()
        .iter()
        .zip(y_pred.as_slice())
        .map(|(t, p)| (t - p) * (t - p))
        .sum();
    Ok(total / y_true.as_slice().len() as f64)
}

/// Frobenius distance between estimated and true coefficients.
pub fn beta_distance(b_hat: &DenseMatrix, b_true: &DenseMatrix) -> Result<f64> {
    check_same_shape(b_hat, b_true)?;
    Ok(b_hat.sub(b_true).frobenius_norm())
}

/// A model family plus its hyper-parameters other than the component count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Recipe {
    Pls,
    Fpqr { metric: MetricKind, tau: QuantileLevel },
}

impl Recipe {
    pub fn fpqr(metric: MetricKind, tau: QuantileLevel) -> Self {
        Recipe::Fpqr { metric, tau }
    }

    pub fn fit(
        &self,
        x: &DenseMatrix,
        y: &DenseMatrix,
        components: usize,
        centering: CenteringMode,
    ) -> Result<FittedModel> {
        match *self {
            Recipe::Pls => fit_pls_with(x, y, components, centering),
            Recipe::Fpqr { metric, tau } => fit_fpqr_with(
                x,
                y,
                &FpqrOptions {
                    components,
                    tau,
                    metric,
                    centering,
                },
            ),
        }
    }

    /// Quantile level the recipe targets; PLS is scored at the median.
    pub fn tau(&self) -> QuantileLevel {
        match *self {
            Recipe::Pls => QuantileLevel::MEDIAN,
            Recipe::Fpqr { tau, .. } => tau,
        }
    }

    pub fn tag(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Recipe::Pls => f.write_str("pls"),
            Recipe::Fpqr { metric, tau } if tau == QuantileLevel::MEDIAN => {
                write!(f, "fpqr-{metric}")
            }
            Recipe::Fpqr { metric, tau } => write!(f, "fpqr-{metric}@{tau}"),
        }
    }
}

/// Parses `pls`, `fpqr-li`, `fpqr-dodge@0.25`, ... (τ defaults to 0.5).
impl FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("pls") {
            return Ok(Recipe::Pls);
        }
        let rest = s
            .strip_prefix("fpqr-")
            .ok_or_else(|| Error::InvalidArgument(format!("unknown recipe '{s}'")))?;
        let (metric, tau) = match rest.split_once('@') {
            Some((m, t)) => {
                let t: f64 = t
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad quantile level in recipe '{s}'")))?;
                (m, QuantileLevel::new(t)?)
            }
            None => (rest, QuantileLevel::MEDIAN),
        };
        let metric: MetricKind = metric.parse()?;
        if metric == MetricKind::Classical {
            return Err(Error::InvalidArgument(format!("unknown recipe '{s}'")));
        }
        Ok(Recipe::Fpqr { metric, tau })
    }
}

/// Metrics of one fitted recipe on one data set.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub beta_distance: Option<f64>,
    pub test_mse: f64,
    pub quantile_error: f64,
    pub wall_time_seconds: f64,
    pub seed: u64,
    pub model_tag: String,
}
