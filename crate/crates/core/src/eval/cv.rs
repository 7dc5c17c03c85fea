use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{test_mse, Recipe};
use crate::error::{Error, Result};
use crate::linalg::{CenteringMode, DenseMatrix};
use crate::pls::predict;

/// Stream reserved for fold shuffling so it never collides with simulation draws.
const CV_STREAM: u64 = u64::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct CvResult {
    pub candidate_components: Vec<usize>,
    /// Held-out MSE averaged over folds; `None` when a candidate could not be
    /// fitted on every fold.
    pub mean_cv_error: Vec<Option<f64>>,
    pub chosen_components: usize,
}

/// Held-out index sets of a seeded `k`-fold partition of `0..n`.
///
/// Rows are shuffled once and cut into contiguous blocks whose sizes differ
/// by at most one.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {folds}")));
    }
    if n < folds {
        return Err(Error::InvalidArgument(format!(
            "{folds} folds requested for {n} rows"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(CV_STREAM);
    order.shuffle(&mut rng);
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        let mut held: Vec<usize> = order[start..start + len].to_vec();
        held.sort_unstable();
        out.push(held);
        start += len;
    }
    Ok(out)
}

/// Picks the component count with the lowest mean held-out MSE.
///
/// Ties go to the smaller count. A candidate that exceeds the admissible
/// count of some training fold, or whose fit fails there, is marked invalid.
pub fn cross_validate(
    x: &DenseMatrix,
    y: &DenseMatrix,
    candidates: &[usize],
    folds: usize,
    recipe: &Recipe,
    centering: CenteringMode,
    seed: u64,
) -> Result<CvResult> {
    if x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch {
            what: "row count",
            expected: x.nrows(),
            found: y.nrows(),
        });
    }
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidate component counts".into()));
    }
    if let Some(&bad) = candidates.iter().find(|&&h| h == 0) {
        return Err(Error::InvalidComponents {
            requested: bad,
            max: x.ncols(),
        });
    }
    x.ensure_finite("predictor matrix")?;
    y.ensure_finite("response matrix")?;

    let partition = fold_assignment(x.nrows(), folds, seed)?;
    let mut sums = vec![0.0; candidates.len()];
    let mut valid = vec![true; candidates.len()];

    for (f, held) in partition.iter().enumerate() {
        let mut is_held = vec![false; x.nrows()];
        for &i in held {
            is_held[i] = true;
        }
        let train: Vec<usize> = (0..x.nrows()).filter(|&i| !is_held[i]).collect();
        let (xt, yt) = (x.select_rows(&train), y.select_rows(&train));
        let (xv, yv) = (x.select_rows(held), y.select_rows(held));
        for (c, &h) in candidates.iter().enumerate() {
            if !valid[c] {
                continue;
            }
            let scored = recipe
                .fit(&xt, &yt, h, centering)
                .and_then(|model| predict(&model, &xv))
                .and_then(|pred| test_mse(&yv, &pred));
            match scored {
                Ok(e) if e.is_finite() => sums[c] += e,
                Ok(_) => valid[c] = false,
                Err(e) => {
                    log::debug!("fold {f}: {h} components rejected: {e}");
                    valid[c] = false;
                }
            }
        }
    }

    let mean_cv_error: Vec<Option<f64>> = sums
        .iter()
        .zip(&valid)
        .map(|(s, &ok)| ok.then(|| s / folds as f64))
        .collect();
    let chosen = candidates
        .iter()
        .zip(&mean_cv_error)
        .filter_map(|(&h, e)| e.map(|e| (h, e)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(h, _)| h)
        .ok_or_else(|| {
            Error::InvalidArgument("no candidate component count could be fitted on every fold".into())
        })?;

    Ok(CvResult {
        candidate_components: candidates.to_vec(),
        mean_cv_error,
        chosen_components: chosen,
    })
}
