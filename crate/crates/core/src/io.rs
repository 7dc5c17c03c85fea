//! CSV datasets and versioned model files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::pls::{FittedModel, Method};
use crate::qcov::MetricKind;

/// Version written by this build; files with any other version are refused.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A numeric table with named columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    pub values: DenseMatrix,
}

impl Dataset {
    pub fn new(names: Vec<String>, values: DenseMatrix) -> Result<Dataset> {
        if names.len() != values.ncols() {
            return Err(Error::DimensionMismatch {
                what: "column names",
                expected: values.ncols(),
                found: names.len(),
            });
        }
        check_unique(&names)?;
        Ok(Dataset { names, values })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Dataset> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| {
            Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
        })?;
        Dataset::from_reader(BufReader::new(file))
    }

    /// Comma-separated, mandatory header row, every body cell a finite decimal.
    pub fn from_reader<R: Read>(reader: R) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let names: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Data(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if names.is_empty() || names.iter().all(String::is_empty) {
            return Err(Error::Data("missing header row".into()));
        }
        if let Some(i) = names.iter().position(String::is_empty) {
            return Err(Error::Data(format!("column {} has an empty name", i + 1)));
        }
        check_unique(&names)?;

        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| match e.kind() {
                csv::ErrorKind::UnequalLengths { len, .. } => Error::Data(format!(
                    "row {}: expected {} fields, found {len}",
                    r + 1,
                    names.len()
                )),
                _ => Error::Data(e.to_string()),
            })?;
            let mut row = Vec::with_capacity(names.len());
            for (c, cell) in record.iter().enumerate() {
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => row.push(v),
                    _ => {
                        return Err(Error::Cell {
                            row: r + 1,
                            column: names[c].clone(),
                            value: cell.to_string(),
                        })
                    }
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        let values = DenseMatrix::from_rows(&rows)?;
        Ok(Dataset { names, values })
    }

    pub fn ncols(&self) -> usize {
        self.names.len()
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Columns in the order of `names`.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<Dataset> {
        let idx = names
            .iter()
            .map(|n| {
                self.column_index(n.as_ref())
                    .ok_or_else(|| Error::Data(format!("no column named '{}'", n.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(
            idx.iter().map(|&i| self.names[i].clone()).collect(),
            self.values.select_cols(&idx),
        )
    }

    /// Splits into (predictors, responses); predictors are every column not
    /// named in `responses`, in file order.
    pub fn split<S: AsRef<str>>(&self, responses: &[S]) -> Result<(Dataset, Dataset)> {
        let y = self.select(responses)?;
        let rest: Vec<&str> = self
            .names
            .iter()
            .filter(|n| !y.names.contains(n))
            .map(String::as_str)
            .collect();
        if rest.is_empty() {
            return Err(Error::Data("no predictor columns left".into()));
        }
        Ok((self.select(&rest)?, y))
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        write_matrix_csv(out, &self.names, &self.values)
    }
}

fn check_unique(names: &[String]) -> Result<()> {
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(Error::Data(format!("duplicate column name '{n}'")));
        }
    }
    Ok(())
}

/// Writes a header plus one row per matrix row, floats in shortest
/// round-trip form.
pub fn write_matrix_csv<W: Write, S: AsRef<str>>(out: W, names: &[S], m: &DenseMatrix) -> Result<()> {
    if names.len() != m.ncols() {
        return Err(Error::DimensionMismatch {
            what: "column names",
            expected: m.ncols(),
            found: names.len(),
        });
    }
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Data(e.to_string());
    w.write_record(names.iter().map(AsRef::as_ref)).map_err(csv_err)?;
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(f64::to_string)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub method: Method,
    pub metric: MetricKind,
    pub tau: Option<f64>,
    pub components: usize,
    pub effective_components: usize,
    pub predictor_names: Vec<String>,
    pub response_names: Vec<String>,
}

/// On-disk form of a fitted model: JSON text whose numbers round-trip exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub metadata: ModelMetadata,
    pub model: FittedModel,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

impl ModelFile {
    pub fn new(model: FittedModel, predictor_names: Vec<String>, response_names: Vec<String>) -> Result<ModelFile> {
        let metadata = ModelMetadata {
            method: model.method,
            metric: model.metric.kind,
            tau: model.tau.map(f64::from),
            components: model.requested_components,
            effective_components: model.effective_components(),
            predictor_names,
            response_names,
        };
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            metadata,
            model,
        };
        file.validate()?;
        Ok(file)
    }

    fn validate(&self) -> Result<()> {
        let (md, m) = (&self.metadata, &self.model);
        let bad = |msg: String| Err(Error::ModelFormat(msg));
        if md.predictor_names.len() != m.n_predictors() {
            return bad(format!(
                "{} predictor names for {} predictors",
                md.predictor_names.len(),
                m.n_predictors()
            ));
        }
        if md.response_names.len() != m.n_responses() {
            return bad(format!(
                "{} response names for {} responses",
                md.response_names.len(),
                m.n_responses()
            ));
        }
        let h = m.effective_components();
        let d = &m.decomposition;
        let shapes_ok = d.p.shape() == d.w.shape()
            && d.q.shape() == (m.n_responses(), h)
            && d.t.ncols() == h
            && m.gamma.shape() == (h, m.n_responses())
            && m.intercepts.len() == m.n_responses()
            && m.x_centering.centers.len() == m.n_predictors()
            && m.y_centering.centers.len() == m.n_responses()
            && d.w.nrows() == m.n_predictors();
        if !shapes_ok {
            return bad("matrix shapes are inconsistent".into());
        }
        if md.effective_components != h || md.method != m.method || md.metric != m.metric.kind {
            return bad("metadata does not match the stored model".into());
        }
        Ok(())
    }

    pub fn to_writer<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self).map_err(|e| Error::ModelFormat(e.to_string()))
    }

    pub fn from_reader<R: Read>(mut reader: R) -> Result<ModelFile> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        let probe: VersionProbe = serde_json::from_str(&text)
            .map_err(|e| Error::ModelFormat(format!("missing or invalid format_version: {e}")))?;
        if probe.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::UnsupportedFormat {
                found: probe.format_version,
                supported: MODEL_FORMAT_VERSION,
            });
        }
        let file: ModelFile =
            serde_json::from_str(&text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        file.validate()?;
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.to_writer(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ModelFile> {
        ModelFile::from_reader(BufReader::new(File::open(path)?))
    }
}
