use std::io::Write;
use std::time::Instant;

use super::{beta_distance, generate_simulation, quantile_error, test_mse, EvalReport, Recipe, SimulationSpec};
use crate::error::{Error, Result};
use crate::linalg::CenteringMode;
use crate::pls::predict;

#[derive(Clone, Debug, PartialEq)]
pub struct StudyRow {
    pub repetition: usize,
    pub recipe: Recipe,
    pub report: EvalReport,
}

/// Mean and sample standard deviation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
}

impl Summary {
    /// Order-independent: values are sorted before summation.
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = if v.len() < 2 {
            0.0
        } else {
            let mut dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
            dev.sort_by(f64::total_cmp);
            (dev.iter().sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Summary { mean, sd })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub recipe: Recipe,
    pub count: usize,
    /// Repetitions in which this recipe failed to fit or predict.
    pub excluded: usize,
    pub beta_distance: Option<Summary>,
    pub test_mse: Option<Summary>,
    pub quantile_error: Option<Summary>,
    pub seconds: Option<Summary>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyResult {
    pub spec: SimulationSpec,
    pub recipes: Vec<Recipe>,
    pub rows: Vec<StudyRow>,
    /// `(repetition, recipe, message)` for each failed fit.
    pub failures: Vec<(usize, Recipe, String)>,
    pub aggregates: Vec<Aggregate>,
}

impl StudyResult {
    pub fn aggregate_for(&self, recipe: &Recipe) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| &a.recipe == recipe)
    }
}

/// Per-recipe summaries of `rows`, in the order of `recipes`.
pub fn aggregate(rows: &[StudyRow], recipes: &[Recipe], repetitions: usize) -> Vec<Aggregate> {
    recipes
        .iter()
        .map(|recipe| {
            let mine: Vec<&EvalReport> = rows
                .iter()
                .filter(|r| &r.recipe == recipe)
                .map(|r| &r.report)
                .collect();
            let pick = |f: &dyn Fn(&EvalReport) -> Option<f64>| -> Option<Summary> {
                let v: Vec<f64> = mine.iter().filter_map(|r| f(r)).collect();
                Summary::of(&v)
            };
            Aggregate {
                recipe: *recipe,
                count: mine.len(),
                excluded: repetitions.saturating_sub(mine.len()),
                beta_distance: pick(&|r| r.beta_distance),
                test_mse: pick(&|r| Some(r.test_mse)),
                quantile_error: pick(&|r| Some(r.quantile_error)),
                seconds: pick(&|r| Some(r.wall_time_seconds)),
            }
        })
        .collect()
}

/// Fits every recipe on every repetition of `spec`.
///
/// Wall time covers fitting plus prediction on the test set.
/// Repetitions run sequentially so timings are comparable across recipes.
pub fn run_study(spec: &SimulationSpec, recipes: &[Recipe]) -> Result<StudyResult> {
    spec.validate()?;
    if recipes.is_empty() {
        return Err(Error::InvalidArgument("no recipes given".into()));
    }
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for rep in 0..spec.repetitions {
        let data = generate_simulation(spec, rep)?;
        for recipe in recipes {
            let start = Instant::now();
            let fitted = recipe
                .fit(&data.x_train, &data.y_train, spec.h, CenteringMode::Mean)
                .and_then(|model| predict(&model, &data.x_test).map(|pred| (model, pred)));
            let seconds = start.elapsed().as_secs_f64();
            let scored = fitted.and_then(|(model, pred)| {
                Ok(EvalReport {
                    beta_distance: Some(beta_distance(&model.bhat, &data.b_true)?),
                    test_mse: test_mse(&data.y_test, &pred)?,
                    quantile_error: quantile_error(&data.y_test, &pred, recipe.tau())?,
                    wall_time_seconds: seconds,
                    seed: spec.seed,
                    model_tag: recipe.tag(),
                })
            });
            match scored {
                Ok(report) => rows.push(StudyRow {
                    repetition: rep,
                    recipe: *recipe,
                    report,
                }),
                Err(e) => {
                    log::warn!("repetition {rep}, {recipe}: {e}");
                    failures.push((rep, *recipe, e.to_string()));
                }
            }
        }
    }
    let aggregates = aggregate(&rows, recipes, spec.repetitions);
    Ok(StudyResult {
        spec: *spec,
        recipes: recipes.to_vec(),
        rows,
        failures,
        aggregates,
    })
}

fn fmt_summary(s: Option<Summary>) -> String {
    s.map_or_else(|| "NA".to_string(), |s| format!("{} ({})", s.mean, s.sd))
}

/// One row per fitted repetition, then one `aggregate` row per recipe with
/// cells formatted as `mean (sd)`.
pub fn write_study_csv<W: Write>(result: &StudyResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Data(e.to_string());
    w.write_record([
        "scheme",
        "recipe",
        "repetition",
        "betaDistance",
        "testMse",
        "quantileError",
        "seconds",
    ])
    .map_err(csv_err)?;
    let scheme = result.spec.scheme.as_str();
    for row in &result.rows {
        let r = &row.report;
        w.write_record([
            scheme.to_string(),
            r.model_tag.clone(),
            row.repetition.to_string(),
            r.beta_distance.map_or_else(|| "NA".into(), |b| b.to_string()),
            r.test_mse.to_string(),
            r.quantile_error.to_string(),
            r.wall_time_seconds.to_string(),
        ])
        .map_err(csv_err)?;
    }
    for a in &result.aggregates {
        w.write_record([
            scheme.to_string(),
            a.recipe.tag(),
            "aggregate".to_string(),
            fmt_summary(a.beta_distance),
            fmt_summary(a.test_mse),
            fmt_summary(a.quantile_error),
            fmt_summary(a.seconds),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
