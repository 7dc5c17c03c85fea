//! Fast partial quantile regression (fPQR) and NIPALS partial least squares.
//!
//! fPQR runs the PLS extraction loop with a quantile covariance in place of
//! the covariance and fits the response on the latent scores by quantile
//! regression, giving a robust, quantile-specific latent-variable model.
//!
//! ```
//! use fpqr::{fit_fpqr, predict, DenseMatrix, MetricKind, QuantileLevel};
//!
//! let x = DenseMatrix::from_fn(20, 4, |i, j| ((i * 3 + j * 5) % 7) as f64);
//! let y = DenseMatrix::from_fn(20, 1, |i, _| x[(i, 0)] - 2.0 * x[(i, 3)]);
//! let model = fit_fpqr(&x, &y, 2, QuantileLevel::MEDIAN, MetricKind::Li).unwrap();
//! let yhat = predict(&model, &x).unwrap();
//! assert_eq!(yhat.shape(), (20, 1));
//! ```

pub mod error;
pub mod eval;
pub mod fpqr;
pub mod io;
pub mod linalg;
pub mod pls;
pub mod qcov;
pub mod quantreg;

pub use error::{Error, Result};
pub use eval::{
    beta_distance, cross_validate, generate_simulation, quantile_error, run_study, test_mse, CvResult,
    ErrorLaw, EvalReport, Recipe, Scheme, SimulationSpec, StudyResult,
};
pub use fpqr::{fit_fpqr, fit_fpqr_with, predict_quantile, FpqrOptions};
pub use io::{Dataset, ModelFile, MODEL_FORMAT_VERSION};
pub use linalg::{CenteringMode, DenseMatrix};
pub use pls::{fit_pls, fit_pls_with, predict, FittedModel, LatentDecomposition, Method};
pub use qcov::{qcov_matrix, CrossCovariance, MetricKind, QcovMetric};
pub use quantreg::{fit_quantile_regression, QrFit, QuantileLevel};
