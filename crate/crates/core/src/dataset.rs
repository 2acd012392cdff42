//! Tabular numeric data, CSV ingestion/emission and the column-wise
//! standardization every metric and the PCA stage work on.
//!
//! Standard deviations use the population (divide-by-`n`) form. Statistics are
//! always taken from the true database and reused for its anonymized
//! counterpart, so both live on the same standardized axes.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// An `n × p` table of finite reals with unique column names, `n ≥ 2`, `p ≥ 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    column_names: Vec<String>,
    values: Matrix<T>,
}

impl<T: Real> Dataset<T> {
    pub fn new(column_names: Vec<String>, values: Matrix<T>) -> Result<Self> {
        let (n, p) = values.shape();
        if n < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 rows, found {n}"
            )));
        }
        if p < 1 {
            return Err(Error::InvalidDataset("need at least 1 column".into()));
        }
        if column_names.len() != p {
            return Err(Error::DimensionMismatch {
                expected: format!("{p} column names"),
                found: format!("{}", column_names.len()),
            });
        }
        let mut seen = HashSet::new();
        for name in &column_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidDataset(format!(
                    "duplicate column name {name:?}"
                )));
            }
        }
        if let Some(pos) = values.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite value at row {}, column {:?}",
                pos / p + 1,
                column_names[pos % p]
            )));
        }
        Ok(Dataset {
            column_names,
            values,
        })
    }

    /// Columns named `col0..col{p-1}`.
    pub fn from_matrix(values: Matrix<T>) -> Result<Self> {
        let names = default_names(values.cols());
        Self::new(names, values)
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn into_values(self) -> Matrix<T> {
        self.values
    }

    pub fn n_rows(&self) -> usize {
        self.values.rows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.cols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    /// Same column names, new values of identical shape.
    pub fn with_values(&self, values: Matrix<T>) -> Result<Self> {
        if values.shape() != self.shape() {
            return Err(Error::shape(self.shape(), values.shape()));
        }
        Self::new(self.column_names.clone(), values)
    }
}

fn default_names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("col{j}")).collect()
}

/// Per-column mean and population standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats<T> {
    pub means: Vec<T>,
    pub std_devs: Vec<T>,
}

impl<T: Real> ColumnStats<T> {
    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }
}

/// Data expressed as `(value − μ_j) / σ_j`, together with the statistics used.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardizedDataset<T> {
    pub(crate) column_names: Vec<String>,
    pub(crate) values: Matrix<T>,
    pub(crate) stats: ColumnStats<T>,
}

impl<T: Real> StandardizedDataset<T> {
    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn stats(&self) -> &ColumnStats<T> {
        &self.stats
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    /// Same names and statistics, new standardized values of identical shape.
    pub fn with_values(&self, values: Matrix<T>) -> Result<Self> {
        if values.shape() != self.shape() {
            return Err(Error::shape(self.shape(), values.shape()));
        }
        Ok(StandardizedDataset {
            column_names: self.column_names.clone(),
            values,
            stats: self.stats.clone(),
        })
    }
}

/// Mean and population standard deviation of every column. Fails on the first
/// zero-variance column.
pub fn column_stats<T: Real>(d: &Dataset<T>) -> Result<ColumnStats<T>> {
    let (n, p) = d.shape();
    let nf = T::from_usize_lossy(n);
    let mut means = vec![T::zero(); p];
    for row in d.values.row_iter() {
        for (m, &v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= nf;
    }
    let mut ss = vec![T::zero(); p];
    for row in d.values.row_iter() {
        for ((s, &v), &m) in ss.iter_mut().zip(row).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    let mut std_devs = Vec::with_capacity(p);
    for (j, s) in ss.into_iter().enumerate() {
        let sd = (s / nf).sqrt();
        if !(sd > T::zero()) {
            return Err(Error::ZeroVariance(d.column_names[j].clone()));
        }
        std_devs.push(sd);
    }
    Ok(ColumnStats { means, std_devs })
}

pub fn standardize<T: Real>(d: &Dataset<T>, stats: &ColumnStats<T>) -> Result<StandardizedDataset<T>> {
    let p = d.n_cols();
    if stats.means.len() != p || stats.std_devs.len() != p {
        return Err(Error::DimensionMismatch {
            expected: format!("stats for {p} columns"),
            found: format!("{}", stats.means.len()),
        });
    }
    if let Some(j) = stats.std_devs.iter().position(|&s| !(s > T::zero())) {
        return Err(Error::ZeroVariance(d.column_names[j].clone()));
    }
    let values = Matrix::from_fn(d.n_rows(), p, |i, j| {
        (d.values[(i, j)] - stats.means[j]) / stats.std_devs[j]
    });
    Ok(StandardizedDataset {
        column_names: d.column_names.clone(),
        values,
        stats: stats.clone(),
    })
}

pub fn destandardize<T: Real>(s: &StandardizedDataset<T>) -> Result<Dataset<T>> {
    let (n, p) = s.shape();
    if s.stats.means.len() != p || s.stats.std_devs.len() != p {
        return Err(Error::DimensionMismatch {
            expected: format!("stats for {p} columns"),
            found: format!("{}", s.stats.means.len()),
        });
    }
    let values = Matrix::from_fn(n, p, |i, j| {
        s.values[(i, j)] * s.stats.std_devs[j] + s.stats.means[j]
    });
    Dataset::new(s.column_names.clone(), values)
}

pub fn load_csv<T: Real>(path: impl AsRef<Path>, has_header: bool) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, has_header)
}

/// Parses CSV from any reader. Data rows are numbered from 1, not counting the
/// header.
pub fn read_csv<T: Real, R: Read>(reader: R, has_header: bool) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();

    let mut names: Option<Vec<String>> = None;
    if has_header {
        match records.next() {
            Some(rec) => {
                let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
                names = Some(rec.iter().map(str::to_owned).collect());
            }
            None => return Err(Error::Empty),
        }
    }

    let mut data: Vec<T> = Vec::new();
    let mut width = names.as_ref().map(Vec::len);
    let mut n = 0usize;
    for rec in records {
        let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
        n += 1;
        let expected = *width.get_or_insert(rec.len());
        if rec.len() != expected {
            return Err(Error::Ragged {
                row: n,
                expected,
                found: rec.len(),
            });
        }
        for (j, cell) in rec.iter().enumerate() {
            let parsed = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .and_then(T::from_f64);
            match parsed {
                Some(v) => data.push(v),
                None => {
                    let column = names
                        .as_ref()
                        .map_or_else(|| format!("col{j}"), |h| h[j].clone());
                    return Err(Error::Parse {
                        row: n,
                        column,
                        value: cell.to_owned(),
                    });
                }
            }
        }
    }
    let p = match width {
        Some(p) if n > 0 => p,
        _ => return Err(Error::Empty),
    };
    let names = names.unwrap_or_else(|| default_names(p));
    Dataset::new(names, Matrix::new(n, p, data)?)
}

pub fn write_csv<T: Real>(d: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    to_csv_writer(d, &mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Writes header and rows. Numbers use the shortest representation that
/// parses back to the identical value.
pub fn to_csv_writer<T: Real, W: Write>(d: &Dataset<T>, writer: W) -> Result<()> {
    // Re-validate: a dataset that slipped past construction must not be emitted.
    let d = Dataset::new(d.column_names.clone(), d.values.clone())?;
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(&d.column_names)
        .map_err(|e| Error::Csv(e.to_string()))?;
    for row in d.values.row_iter() {
        wtr.write_record(row.iter().map(|v| format!("{v}")))
            .map_err(|e| Error::Csv(e.to_string()))?;
    }
    wtr.flush()
        .map_err(|e| Error::Csv(e.to_string()))
}
