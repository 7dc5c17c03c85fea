//! Fixed-seed invariant checks. Each returns `Err(description)` on the
//! first violation so both the property tests and the acceptance report
//! can call them.

use fpqr::eval::{fold_assignment, SimulatedData};
use fpqr::{
    cross_validate, fit_fpqr, fit_pls, generate_simulation, predict, run_study, CenteringMode,
    DenseMatrix, ErrorLaw, FittedModel, MetricKind, QuantileLevel, Recipe, Scheme, SimulationSpec,
};
use rand::Rng;

use super::{max_abs_diff_dense, rng, uniform_matrix};

pub type Check = std::result::Result<(), String>;

const SEEDS: std::ops::Range<u64> = 0..12;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fit_err(e: fpqr::Error) -> String {
    format!("fit failed: {e}")
}

/// Random instance with a little structure so several components exist.
fn instance(seed: u64) -> (DenseMatrix, DenseMatrix, usize) {
    let mut r = rng(seed);
    let n = r.random_range(20..=40);
    let m = r.random_range(4..=10);
    let l = r.random_range(1..=3);
    let x = uniform_matrix(&mut r, n, m);
    let b = uniform_matrix(&mut r, m, l);
    let noise = uniform_matrix(&mut r, n, l);
    let y = x.matmul(&b).add(&noise.scaled(0.3));
    let h = r.random_range(2..=m.min(5));
    (x, y, h)
}

fn models(x: &DenseMatrix, y: &DenseMatrix, h: usize) -> Result<Vec<(&'static str, FittedModel)>, String> {
    let tau = QuantileLevel::MEDIAN;
    Ok(vec![
        ("pls", fit_pls(x, y, h).map_err(fit_err)?),
        ("fpqr-li", fit_fpqr(x, y, h, tau, MetricKind::Li).map_err(fit_err)?),
        ("fpqr-dodge", fit_fpqr(x, y, h, tau, MetricKind::Dodge).map_err(fit_err)?),
        ("fpqr-choi", fit_fpqr(x, y, h, tau, MetricKind::Choi).map_err(fit_err)?),
    ])
}

/// Off-diagonal entries of `TᵗT` vanish for every metric.
pub fn score_orthogonality() -> Check {
    for seed in SEEDS {
        let (x, y, h) = instance(seed);
        for (name, model) in models(&x, &y, h)? {
            let t = &model.decomposition.t;
            for a in 0..t.ncols() {
                for b in 0..a {
                    let ta = t.col(a);
                    let tb = t.col(b);
                    let cross: f64 = ta.iter().zip(tb).map(|(u, v)| u * v).sum();
                    let scale = fpqr::linalg::norm2(ta) * fpqr::linalg::norm2(tb);
                    ensure(cross.abs() <= 1e-10 * scale, || {
                        format!("seed {seed} {name}: t{a}·t{b} = {cross:.3e} (scale {scale:.3e})")
                    })?;
                }
            }
        }
    }
    Ok(())
}

/// `X₀ = TPᵗ + Xₕ` with `Xₕ ⟂ T` (same for Y), and `Xₕ = 0` at full rank.
pub fn deflation_telescoping() -> Check {
    for seed in SEEDS {
        let (x, y, h) = instance(seed);
        let mut cases = models(&x, &y, h)?;
        cases.push(("pls-full", fit_pls(&x, &y, x.ncols()).map_err(fit_err)?));
        for (name, model) in cases {
            let d = &model.decomposition;
            let x0 = model.x_centering.apply(&x).map_err(fit_err)?;
            let y0 = model.y_centering.apply(&y).map_err(fit_err)?;
            let rx = x0.sub(&d.t.matmul(&d.p.transpose()));
            let ry = y0.sub(&d.t.matmul(&d.q.transpose()));
            let tn = d.t.frobenius_norm();
            for (block, r, full) in [("X", &rx, x0.frobenius_norm()), ("Y", &ry, y0.frobenius_norm())] {
                let ortho = d.t.tr_matmul(r).max_abs();
                ensure(ortho <= 1e-10 * tn * full, || {
                    format!("seed {seed} {name}: Tᵗ·residual({block}) = {ortho:.3e}")
                })?;
            }
            if name == "pls-full" {
                let left = rx.max_abs();
                ensure(left <= 1e-9 * x0.max_abs(), || {
                    format!("seed {seed}: full-rank X residual {left:.3e}")
                })?;
            }
        }
    }
    Ok(())
}

/// In-sample τ-coverage of the quantile fit on the scores: at most `nτ`
/// residuals are negative and at least `nτ` are non-positive. Also checks
/// that the score path and `B̂` give the same fitted values.
pub fn median_coverage() -> Check {
    for seed in SEEDS {
        let (x, y, h) = instance(seed);
        let n = x.nrows() as f64;
        for tau in [0.25, 0.5, 0.75] {
            let tau = QuantileLevel::new(tau).unwrap();
            for metric in [MetricKind::Li, MetricKind::Dodge] {
                let model = fit_fpqr(&x, &y, h, tau, metric).map_err(fit_err)?;
                let path = model.fitted_values();
                let direct = predict(&model, &x).map_err(fit_err)?;
                let gap = max_abs_diff_dense(&path, &direct);
                ensure(gap <= 1e-8 * (1.0 + y.max_abs()), || {
                    format!("seed {seed} {metric}: score path vs B̂ differ by {gap:.3e}")
                })?;
                let delta = 1e-9 * (1.0 + y.max_abs());
                for k in 0..y.ncols() {
                    let res: Vec<f64> = (0..x.nrows()).map(|i| y[(i, k)] - path[(i, k)]).collect();
                    let neg = res.iter().filter(|&&r| r < -delta).count() as f64;
                    let nonpos = res.iter().filter(|&&r| r <= delta).count() as f64;
                    let target = n * tau.value();
                    ensure(neg <= target + 1e-9 && nonpos >= target - 1e-9, || {
                        format!("seed {seed} {metric} τ={tau} col {k}: {neg} negative, {nonpos} non-positive of {n}")
                    })?;
                }
            }
        }
    }
    Ok(())
}

/// Shifting Y moves predictions by the shift; shifting X leaves them put.
/// `B̂` is unchanged either way.
pub fn translation_equivariance() -> Check {
    for seed in SEEDS {
        let (x, y, h) = instance(seed);
        let mut r = rng(seed ^ 0xabc);
        let dy: Vec<f64> = (0..y.ncols()).map(|_| r.random_range(-50.0..50.0)).collect();
        let dx: Vec<f64> = (0..x.ncols()).map(|_| r.random_range(-50.0..50.0)).collect();
        let y2 = DenseMatrix::from_fn(y.nrows(), y.ncols(), |i, k| y[(i, k)] + dy[k]);
        let x2 = DenseMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] + dx[j]);
        let tau = QuantileLevel::new(0.3).unwrap();
        let fits: [(&str, &dyn Fn(&DenseMatrix, &DenseMatrix) -> fpqr::Result<FittedModel>); 3] = [
            ("pls", &|x, y| fit_pls(x, y, h)),
            ("fpqr-li", &|x, y| fit_fpqr(x, y, h, tau, MetricKind::Li)),
            ("fpqr-dodge", &|x, y| fit_fpqr(x, y, h, tau, MetricKind::Dodge)),
        ];
        for (name, fit) in fits {
            let base = fit(&x, &y).map_err(fit_err)?;
            let pred = predict(&base, &x).map_err(fit_err)?;
            let scale = 1e-8 * (1.0 + pred.max_abs() + 50.0);

            let ys = fit(&x, &y2).map_err(fit_err)?;
            let shifted = predict(&ys, &x).map_err(fit_err)?;
            let expect = DenseMatrix::from_fn(pred.nrows(), pred.ncols(), |i, k| pred[(i, k)] + dy[k]);
            let gap = max_abs_diff_dense(&shifted, &expect);
            ensure(gap <= scale, || format!("seed {seed} {name}: Y shift moved predictions by {gap:.3e}"))?;
            let gap = max_abs_diff_dense(&ys.bhat, &base.bhat);
            ensure(gap <= 1e-8 * (1.0 + base.bhat.max_abs()), || {
                format!("seed {seed} {name}: Y shift changed B̂ by {gap:.3e}")
            })?;

            let xs = fit(&x2, &y).map_err(fit_err)?;
            let moved = predict(&xs, &x2).map_err(fit_err)?;
            let gap = max_abs_diff_dense(&moved, &pred);
            ensure(gap <= scale, || format!("seed {seed} {name}: X shift moved predictions by {gap:.3e}"))?;
        }
    }
    Ok(())
}

/// Folds partition `0..n` with sizes differing by at most one, and the
/// assignment depends only on the seed.
pub fn cv_partition() -> Check {
    for seed in SEEDS {
        for (n, k) in [(10, 2), (17, 5), (30, 3), (31, 10), (100, 7), (12, 12)] {
            let folds = fold_assignment(n, k, seed).map_err(|e| e.to_string())?;
            ensure(folds.len() == k, || format!("n={n} k={k}: {} folds", folds.len()))?;
            let mut seen = vec![0usize; n];
            for f in &folds {
                ensure(f.windows(2).all(|w| w[0] < w[1]), || format!("n={n} k={k}: unsorted fold"))?;
                for &i in f {
                    ensure(i < n, || format!("n={n} k={k}: index {i} out of range"))?;
                    seen[i] += 1;
                }
            }
            ensure(seen.iter().all(|&c| c == 1), || {
                format!("seed {seed} n={n} k={k}: not a partition")
            })?;
            let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
            let spread = sizes.iter().max().unwrap() - sizes.iter().min().unwrap();
            ensure(spread <= 1, || format!("n={n} k={k}: fold sizes {sizes:?}"))?;
            let again = fold_assignment(n, k, seed).map_err(|e| e.to_string())?;
            ensure(again == folds, || format!("seed {seed} n={n} k={k}: assignment not reproducible"))?;
        }
    }
    Ok(())
}

fn same_bits(a: &DenseMatrix, b: &DenseMatrix) -> bool {
    a.shape() == b.shape() && a.as_slice().iter().zip(b.as_slice()).all(|(u, v)| u.to_bits() == v.to_bits())
}

fn same_data(a: &SimulatedData, b: &SimulatedData) -> bool {
    same_bits(&a.x_train, &b.x_train)
        && same_bits(&a.y_train, &b.y_train)
        && same_bits(&a.x_test, &b.x_test)
        && same_bits(&a.y_test, &b.y_test)
        && same_bits(&a.b_true, &b.b_true)
}

/// Same inputs and seed give bit-identical fits, data, CV and study rows.
pub fn determinism() -> Check {
    for seed in SEEDS {
        let (x, y, h) = instance(seed);
        let first = models(&x, &y, h)?;
        let second = models(&x, &y, h)?;
        for ((name, a), (_, b)) in first.iter().zip(&second) {
            ensure(same_bits(&a.bhat, &b.bhat) && same_bits(&a.decomposition.t, &b.decomposition.t), || {
                format!("seed {seed} {name}: refit differs")
            })?;
        }
    }
    for (scheme, law) in [
        (Scheme::Sim1, ErrorLaw::Chi2_3),
        (Scheme::Sim2, ErrorLaw::Chi2_3),
        (Scheme::Sim3Low, ErrorLaw::Normal),
        (Scheme::Sim3High, ErrorLaw::Slash),
    ] {
        let spec = SimulationSpec::new(scheme, law, 2, 99).map_err(|e| e.to_string())?;
        for rep in 0..2 {
            let a = generate_simulation(&spec, rep).map_err(|e| e.to_string())?;
            let b = generate_simulation(&spec, rep).map_err(|e| e.to_string())?;
            ensure(same_data(&a, &b), || format!("{scheme:?} rep {rep}: data not reproducible"))?;
        }
    }

    let (x, y, _) = instance(3);
    let recipe = Recipe::fpqr(MetricKind::Li, QuantileLevel::MEDIAN);
    let cv = |s| cross_validate(&x, &y, &[1, 2, 3, 4], 4, &recipe, CenteringMode::Mean, s);
    let (a, b) = (cv(5).map_err(|e| e.to_string())?, cv(5).map_err(|e| e.to_string())?);
    ensure(a == b, || "cross-validation not reproducible".into())?;

    let spec = SimulationSpec::new(Scheme::Sim3Low, ErrorLaw::Normal, 3, 11).map_err(|e| e.to_string())?;
    let recipes = [recipe, Recipe::Pls];
    let a = run_study(&spec, &recipes).map_err(|e| e.to_string())?;
    let b = run_study(&spec, &recipes).map_err(|e| e.to_string())?;
    ensure(a.rows.len() == b.rows.len(), || "study row counts differ".into())?;
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        let (pa, pb) = (&ra.report, &rb.report);
        let same = ra.repetition == rb.repetition
            && ra.recipe == rb.recipe
            && pa.beta_distance.map(f64::to_bits) == pb.beta_distance.map(f64::to_bits)
            && pa.test_mse.to_bits() == pb.test_mse.to_bits()
            && pa.quantile_error.to_bits() == pb.quantile_error.to_bits();
        ensure(same, || format!("study rep {} {} differs", ra.repetition, ra.recipe))?;
    }
    Ok(())
}

pub const ALL: [(&str, fn() -> Check); 6] = [
    ("score orthogonality", score_orthogonality),
    ("deflation telescoping", deflation_telescoping),
    ("median coverage", median_coverage),
    ("translation equivariance", translation_equivariance),
    ("cv partition", cv_partition),
    ("determinism", determinism),
];
