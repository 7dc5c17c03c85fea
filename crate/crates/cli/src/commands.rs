use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use fpqr::eval::write_study_csv;
use fpqr::io::write_matrix_csv;
use fpqr::pls::default_components;
use fpqr::{
    cross_validate, quantile_error, run_study, test_mse, Dataset, Error, FittedModel, ModelFile,
    Recipe, Result, SimulationSpec,
};

use crate::{CvArgs, DataArgs, FitArgs, MethodArg, PredictArgs, SimulateArgs};

struct Training {
    x: Dataset,
    y: Dataset,
}

fn load_training(a: &DataArgs) -> Result<Training> {
    let (x, y) = match (&a.x, &a.y, &a.data) {
        (Some(xp), Some(yp), None) => (Dataset::read(xp)?, Dataset::read(yp)?),
        (None, None, Some(dp)) => Dataset::read(dp)?.split(&a.response_cols)?,
        _ => {
            return Err(Error::InvalidArgument(
                "give either --x and --y, or --data with --response-cols".into(),
            ))
        }
    };
    if x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch {
            what: "response rows",
            expected: x.nrows(),
            found: y.nrows(),
        });
    }
    Ok(Training { x, y })
}

fn recipe(a: &DataArgs) -> Recipe {
    match a.method {
        MethodArg::Pls => Recipe::Pls,
        MethodArg::Fpqr => Recipe::fpqr(a.metric.into(), a.tau),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Training-set loss matching the model: check loss at τ for fPQR, MSE for PLS.
fn training_objective(model: &FittedModel, t: &Training) -> Result<f64> {
    let fitted = fpqr::predict(model, &t.x.values)?;
    match model.tau {
        Some(tau) => quantile_error(&t.y.values, &fitted, tau),
        None => test_mse(&t.y.values, &fitted),
    }
}

pub fn fit(a: FitArgs) -> Result<()> {
    let t = load_training(&a.data)?;
    let h = a
        .components
        .unwrap_or_else(|| default_components(t.x.nrows(), t.x.ncols()));
    let model = recipe(&a.data).fit(&t.x.values, &t.y.values, h, a.data.center.into())?;
    for note in &model.notes {
        eprintln!("note: {note}");
    }
    let objective = training_objective(&model, &t)?;
    let file = ModelFile::new(model, t.x.names.clone(), t.y.names.clone())?;
    file.save(&a.out)?;
    let md = &file.metadata;
    let (metric, tau) = match md.tau {
        Some(tau) => (md.metric.as_str(), tau.to_string()),
        None => ("classical", "-".to_string()),
    };
    println!(
        "method={} metric={metric} tau={tau} components={} objective={objective:.6e}",
        md.method.as_str(),
        md.effective_components
    );
    Ok(())
}

pub fn predict(a: PredictArgs) -> Result<()> {
    let file = ModelFile::load(&a.model)?;
    let input = Dataset::read(&a.x)?;
    let names = &file.metadata.predictor_names;
    // Match columns by name when all training names are present (so the
    // training CSV itself can be scored); otherwise take them positionally.
    let x = if names.iter().all(|n| input.column_index(n).is_some()) {
        input.select(names)?.values
    } else if input.ncols() == names.len() {
        input.values
    } else {
        return Err(Error::DimensionMismatch {
            what: "predictor columns",
            expected: names.len(),
            found: input.ncols(),
        });
    };
    let yhat = fpqr::predict(&file.model, &x)?;
    let mut out = output(a.out.as_deref())?;
    write_matrix_csv(&mut out, &file.metadata.response_names, &yhat)?;
    out.flush()?;
    Ok(())
}

/// `1..6` (inclusive) or `1,3,5`.
pub fn parse_candidates(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidArgument(format!("cannot read component list '{s}'"));
    let s = s.trim();
    let out: Vec<usize> = if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        (lo..=hi).collect()
    } else {
        s.split(',')
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

pub fn cv(a: CvArgs) -> Result<()> {
    let candidates = parse_candidates(&a.components)?;
    if a.folds < 2 {
        return Err(Error::InvalidArgument(format!("--folds must be at least 2, got {}", a.folds)));
    }
    let t = load_training(&a.data)?;
    let res = cross_validate(
        &t.x.values,
        &t.y.values,
        &candidates,
        a.folds,
        &recipe(&a.data),
        a.data.center.into(),
        a.data.seed,
    )?;
    let mut out = output(a.out.as_deref())?;
    writeln!(out, "h,meanCvError,chosen")?;
    for (h, e) in res.candidate_components.iter().zip(&res.mean_cv_error) {
        let e = e.map_or_else(|| "NA".to_string(), |v| v.to_string());
        writeln!(out, "{h},{e},{}", *h == res.chosen_components)?;
    }
    out.flush()?;
    drop(out);
    let summary = format!("chosen components: {}", res.chosen_components);
    if a.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let error = a.error.unwrap_or_else(|| a.scheme.default_error());
    let spec = SimulationSpec::new(a.scheme, error, a.reps, a.seed)?;
    let res = run_study(&spec, &a.recipes)?;
    for (rep, recipe, msg) in &res.failures {
        eprintln!("repetition {rep}, {recipe}: {msg}");
    }
    for agg in &res.aggregates {
        if agg.excluded > 0 {
            eprintln!("{}: {} repetition(s) excluded", agg.recipe, agg.excluded);
        }
    }
    let mut out = output(a.out.as_deref())?;
    write_study_csv(&res, &mut out)?;
    out.flush()?;
    Ok(())
}
