//! NIPALS latent-variable regression.
//!
//! [`fit_latent`] is the extraction-and-deflation loop shared by PLS and
//! fPQR. Per component it forms the cross-dependence matrix `S` of the
//! deflated blocks, takes the leading eigenvector of `S·Sᵗ` as weight `w`,
//! scores `t = X·w`, least-squares loadings `p = Xᵗt/tᵗt`, `q = Yᵗt/tᵗt`,
//! and deflates both blocks. The regression of `Y` on the scores is then
//! solved by least squares (PLS) or per-column quantile regression (fPQR)
//! and mapped back to predictor space as `B̂ = W(PᵗW)⁻¹Γ̂`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    center_columns, dot, leading_left_singular_vector, least_squares, reciprocal_condition,
    CenteringInfo, CenteringMode, DenseMatrix, Lu,
};
use crate::qcov::{CrossCovariance, QcovMatrix, QcovMetric};
use crate::quantreg::{fit_quantile_regression, QuantileLevel};

/// Relative size below which the deflated predictor block counts as exhausted.
const EXHAUSTED: f64 = 1e-10;

/// Reciprocal condition below which `PᵗW` triggers a warning.
const RCOND_WARN: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pls,
    Fpqr,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Pls => "pls",
            Method::Fpqr => "fpqr",
        }
    }
}

/// Weights, loadings and scores of the extracted components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentDecomposition {
    /// `m×h` unit-norm weights.
    pub w: DenseMatrix,
    /// `m×h` predictor loadings.
    pub p: DenseMatrix,
    /// `l×h` response loadings.
    pub q: DenseMatrix,
    /// `n×h` training scores.
    pub t: DenseMatrix,
}

impl LatentDecomposition {
    pub fn components(&self) -> usize {
        self.w.ncols()
    }
}

/// How the response is regressed on the latent scores.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GammaFit {
    LeastSquares,
    /// One τ-quantile regression (with intercept) per response column.
    Quantile(QuantileLevel),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatentConfig {
    pub components: usize,
    pub centering: CenteringMode,
    pub gamma: GammaFit,
}

/// A fitted PLS or fPQR model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub method: Method,
    pub decomposition: LatentDecomposition,
    /// `h×l` regression of the centered response on the scores.
    pub gamma: DenseMatrix,
    /// Per-response intercepts of the score regression (zero for least squares).
    pub intercepts: Vec<f64>,
    /// `m×l` coefficients in predictor space.
    pub bhat: DenseMatrix,
    pub x_centering: CenteringInfo,
    pub y_centering: CenteringInfo,
    pub metric: QcovMetric,
    pub tau: Option<QuantileLevel>,
    pub requested_components: usize,
    /// Early stops, degenerate metric entries and conditioning warnings.
    #[serde(default)]
    pub notes: Vec<String>,
}

impl FittedModel {
    pub fn n_predictors(&self) -> usize {
        self.bhat.nrows()
    }

    pub fn n_responses(&self) -> usize {
        self.bhat.ncols()
    }

    pub fn effective_components(&self) -> usize {
        self.decomposition.components()
    }

    /// In-sample fitted values through the score path `T·Γ̂`.
    pub fn fitted_values(&self) -> DenseMatrix {
        let tg = self.decomposition.t.matmul(&self.gamma);
        DenseMatrix::from_fn(tg.nrows(), tg.ncols(), |i, k| {
            tg[(i, k)] + self.intercepts[k] + self.y_centering.centers[k]
        })
    }

    /// `W(PᵗW)⁻¹Γ̂` recomputed from the stored parts.
    pub fn recompute_bhat(&self) -> Result<DenseMatrix> {
        back_project(&self.decomposition, &self.gamma).map(|(b, _)| b)
    }
}

/// `(Xnew − x̄)·B̂ + intercepts + ȳ`.
pub fn predict(model: &FittedModel, x_new: &DenseMatrix) -> Result<DenseMatrix> {
    if x_new.ncols() != model.n_predictors() {
        return Err(Error::DimensionMismatch {
            what: "predictor columns",
            expected: model.n_predictors(),
            found: x_new.ncols(),
        });
    }
    x_new.ensure_finite("prediction input")?;
    // (X − 1x̄ᵗ)·B accumulated column by column, centering on the fly.
    let (n, l) = (x_new.nrows(), model.n_responses());
    let centers = &model.x_centering.centers;
    let mut out = DenseMatrix::zeros(n, l);
    for k in 0..l {
        let dst = out.col_mut(k);
        for (j, &b) in model.bhat.col(k).iter().enumerate() {
            if b == 0.0 {
                continue;
            }
            let c = centers[j];
            for (o, &v) in dst.iter_mut().zip(x_new.col(j)) {
                *o += b * (v - c);
            }
        }
        let offset = model.intercepts[k] + model.y_centering.centers[k];
        dst.iter_mut().for_each(|v| *v += offset);
    }
    Ok(out)
}

/// Largest admissible component count for an `n×m` predictor block.
pub fn max_components(n: usize, m: usize) -> usize {
    n.saturating_sub(1).min(m)
}

/// Default component count `min(10, m, n−1)`.
pub fn default_components(n: usize, m: usize) -> usize {
    max_components(n, m).min(10)
}

/// The cross-product `X_aᵗY_a` used by classical NIPALS.
#[derive(Clone, Copy, Debug, Default)]
pub struct CrossProduct;

impl CrossCovariance for CrossProduct {
    fn cross_covariance(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<QcovMatrix> {
        Ok(QcovMatrix {
            values: x.tr_matmul(y),
            metric: QcovMetric::classical(),
            notes: Vec::new(),
        })
    }

    fn metric(&self) -> QcovMetric {
        QcovMetric::classical()
    }
}

/// Classical multivariate NIPALS-PLS with `h` components and mean centering.
pub fn fit_pls(x: &DenseMatrix, y: &DenseMatrix, h: usize) -> Result<FittedModel> {
    fit_pls_with(x, y, h, CenteringMode::Mean)
}

pub fn fit_pls_with(
    x: &DenseMatrix,
    y: &DenseMatrix,
    h: usize,
    centering: CenteringMode,
) -> Result<FittedModel> {
    let cfg = LatentConfig {
        components: h,
        centering,
        gamma: GammaFit::LeastSquares,
    };
    fit_latent(x, y, &CrossProduct, &cfg)
}

/// Shared extraction loop. The metric decides the weights; `cfg.gamma`
/// decides the score regression.
pub fn fit_latent<M: CrossCovariance + ?Sized>(
    x: &DenseMatrix,
    y: &DenseMatrix,
    metric: &M,
    cfg: &LatentConfig,
) -> Result<FittedModel> {
    let (n, m) = x.shape();
    let l = y.ncols();
    if y.nrows() != n {
        return Err(Error::DimensionMismatch {
            what: "response rows",
            expected: n,
            found: y.nrows(),
        });
    }
    if n < 2 || m == 0 || l == 0 {
        return Err(Error::EmptyInput);
    }
    x.ensure_finite("predictor matrix")?;
    y.ensure_finite("response matrix")?;
    let max_h = max_components(n, m);
    if cfg.components == 0 || cfg.components > max_h {
        return Err(Error::InvalidComponents {
            requested: cfg.components,
            max: max_h,
        });
    }

    let (mut xa, x_centering) = center_columns(x, cfg.centering)?;
    let (y0, y_centering) = center_columns(y, cfg.centering)?;
    let x_scale = xa.frobenius_norm();
    let mut xa_norm = x_scale;
    let mut ya = y0.clone();
    let mut ws = Vec::with_capacity(cfg.components);
    let mut ps = Vec::with_capacity(cfg.components);
    let mut qs = Vec::with_capacity(cfg.components);
    let mut ts = Vec::with_capacity(cfg.components);
    let mut notes = Vec::new();

    for a in 0..cfg.components {
        if xa_norm <= EXHAUSTED * x_scale {
            notes.push(format!(
                "stopped after {a} components: predictor block exhausted"
            ));
            break;
        }
        let s = metric
            .cross_covariance(&xa, &ya)
            .map_err(|e| e.in_component(a))?;
        for note in &s.notes {
            notes.push(format!(
                "component {a}: {:?} at entry ({}, {}), value set to 0",
                note.kind, note.row, note.col
            ));
        }
        let dir = match leading_left_singular_vector(&s.values) {
            Ok(d) => d,
            Err(Error::AllZeroCrossProduct) => {
                notes.push(format!(
                    "stopped after {a} components: cross-dependence matrix vanished"
                ));
                break;
            }
            Err(e) => return Err(e.in_component(a)),
        };
        let t = xa.mul_vec(&dir.w);
        let tt = dot(&t, &t);
        if tt <= (EXHAUSTED * x_scale).powi(2) {
            notes.push(format!("stopped after {a} components: score vector vanished"));
            break;
        }
        let (p, rest) = xa.project_out(&t, tt);
        xa_norm = rest.sqrt();
        let q: Vec<f64> = ya.tr_mul_vec(&t).into_iter().map(|v| v / tt).collect();
        ya.rank_one_update(-1.0, &t, &q);
        ws.push(dir.w);
        ps.push(p);
        qs.push(q);
        ts.push(t);
    }
    if ws.is_empty() {
        return Err(Error::NoComponents);
    }
    for note in &notes {
        log::warn!("{note}");
    }

    let decomposition = LatentDecomposition {
        w: DenseMatrix::from_columns(m, &ws)?,
        p: DenseMatrix::from_columns(m, &ps)?,
        q: DenseMatrix::from_columns(l, &qs)?,
        t: DenseMatrix::from_columns(n, &ts)?,
    };

    let (gamma, intercepts, method, tau) = match cfg.gamma {
        GammaFit::LeastSquares => (
            least_squares(&decomposition.t, &y0)?,
            vec![0.0; l],
            Method::Pls,
            None,
        ),
        GammaFit::Quantile(tau) => {
            let h = decomposition.components();
            let mut gamma = DenseMatrix::zeros(h, l);
            let mut intercepts = vec![0.0; l];
            for k in 0..l {
                let fit = fit_quantile_regression(&decomposition.t, y0.col(k), tau, true)?;
                if fit.is_degenerate() {
                    notes.push(format!(
                        "response {k}: score columns {:?} dropped from the quantile fit",
                        fit.dropped_columns
                    ));
                }
                gamma.col_mut(k).copy_from_slice(&fit.coefficients);
                intercepts[k] = fit.intercept;
            }
            (gamma, intercepts, Method::Fpqr, Some(tau))
        }
    };

    let (bhat, rcond) = back_project(&decomposition, &gamma)?;
    if rcond < RCOND_WARN {
        let msg = format!("PᵗW is nearly singular (rcond {rcond:.2e}); too many components?");
        log::warn!("{msg}");
        notes.push(msg);
    }

    Ok(FittedModel {
        method,
        decomposition,
        gamma,
        intercepts,
        bhat,
        x_centering,
        y_centering,
        metric: metric.metric(),
        tau,
        requested_components: cfg.components,
        notes,
    })
}

fn back_project(d: &LatentDecomposition, gamma: &DenseMatrix) -> Result<(DenseMatrix, f64)> {
    let ptw = d.p.tr_matmul(&d.w);
    let lu = Lu::factor(&ptw)?;
    let inv = lu.inverse();
    let rcond = reciprocal_condition(&ptw, &inv);
    Ok((d.w.matmul(&lu.solve_matrix(gamma)), rcond))
}
