//! Fast partial quantile regression.
//!
//! The NIPALS loop of [`crate::pls`] with a quantile dependence metric in
//! place of the covariance and τ-quantile regression of each response
//! column on the scores in place of least squares. Deflation still uses
//! least-squares loadings.

use crate::error::{Error, Result};
use crate::linalg::{CenteringMode, DenseMatrix};
use crate::pls::{fit_latent, predict, FittedModel, GammaFit, LatentConfig};
use crate::qcov::{MetricKind, QcovMetric};
use crate::quantreg::QuantileLevel;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FpqrOptions {
    pub components: usize,
    pub tau: QuantileLevel,
    pub metric: MetricKind,
    pub centering: CenteringMode,
}

impl FpqrOptions {
    pub fn new(components: usize, tau: QuantileLevel, metric: MetricKind) -> Self {
        FpqrOptions {
            components,
            tau,
            metric,
            centering: CenteringMode::Mean,
        }
    }
}

/// Fits fPQR with `h` components at quantile level `tau`.
pub fn fit_fpqr(
    x: &DenseMatrix,
    y: &DenseMatrix,
    h: usize,
    tau: QuantileLevel,
    metric: MetricKind,
) -> Result<FittedModel> {
    fit_fpqr_with(x, y, &FpqrOptions::new(h, tau, metric))
}

pub fn fit_fpqr_with(x: &DenseMatrix, y: &DenseMatrix, opts: &FpqrOptions) -> Result<FittedModel> {
    if opts.metric == MetricKind::Classical {
        return Err(Error::InvalidArgument(
            "fPQR needs a quantile metric (li, dodge or choi)".into(),
        ));
    }
    let metric = QcovMetric {
        kind: opts.metric,
        tau: opts.tau,
    };
    let cfg = LatentConfig {
        components: opts.components,
        centering: opts.centering,
        gamma: GammaFit::Quantile(opts.tau),
    };
    fit_latent(x, y, &metric, &cfg)
}

/// Estimated conditional τ-quantile of each response at the rows of `x_new`.
pub fn predict_quantile(model: &FittedModel, x_new: &DenseMatrix) -> Result<DenseMatrix> {
    if model.tau.is_none() {
        return Err(Error::InvalidArgument(
            "model was not fitted at a quantile level".into(),
        ));
    }
    predict(model, x_new)
}
