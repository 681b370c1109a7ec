//! Row-major matrices, datasets and the handful of vector helpers the
//! estimators need.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};

/// Dense row-major `rows x cols` matrix of observations or block averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("matrix rows"))?;
        let cols = first.len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols, "row length");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    /// Copy of rows `start..end`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Matrix {
        assert!(start <= end && end <= self.rows);
        Matrix {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    /// Projections `<row_j, u>` for every row.
    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        debug_assert_eq!(u.len(), self.cols);
        self.iter_rows().map(|r| dot(r, u)).collect()
    }

    /// Adds `shift` to every row.
    pub fn translated(&self, shift: &[f64]) -> Matrix {
        assert_eq!(shift.len(), self.cols);
        let mut out = self.clone();
        for r in out.data.chunks_exact_mut(self.cols) {
            for (x, a) in r.iter_mut().zip(shift) {
                *x += a;
            }
        }
        out
    }

    /// `(1/rows) * sum_j row_j row_j^T` as a nalgebra matrix.
    pub fn second_moment(&self) -> nalgebra::DMatrix<f64> {
        let d = self.cols;
        let mut s = nalgebra::DMatrix::<f64>::zeros(d, d);
        for r in self.iter_rows() {
            for a in 0..d {
                for b in a..d {
                    s[(a, b)] += r[a] * r[b];
                }
            }
        }
        let scale = 1.0 / self.rows.max(1) as f64;
        for a in 0..d {
            for b in a..d {
                let v = s[(a, b)] * scale;
                s[(a, b)] = v;
                s[(b, a)] = v;
            }
        }
        s
    }
}

/// Where a dataset came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub spec: Option<DistributionSpec>,
    pub source: Option<String>,
}

/// Observation matrix (one i.i.d. observation per row) plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(x: Matrix) -> Self {
        Dataset {
            x,
            provenance: Provenance::default(),
        }
    }

    pub fn rows(&self) -> usize {
        self.x.rows()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    /// Reads a headerless CSV file, one observation per line.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let row = rec
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| Error::parse(path, format!("{f:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::parse(path, "non-finite value"));
            }
            rows.push(row);
        }
        let x = Matrix::from_rows(&rows).map_err(|e| Error::parse(path, e))?;
        Ok(Dataset {
            x,
            provenance: Provenance {
                source: Some(path.display().to_string()),
                ..Provenance::default()
            },
        })
    }

    /// Writes a headerless CSV with shortest round-trip decimals.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut line = String::new();
        for r in self.x.iter_rows() {
            line.clear();
            for (k, v) in r.iter().enumerate() {
                if k > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{v:?}"));
            }
            line.push('\n');
            w.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::parse(path, format!("{other:?}")),
        }
    } else {
        Error::parse(path, e)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Tolerance on `|‖u‖ - 1|` accepted for directions.
pub const UNIT_TOL: f64 = 1e-12;

pub fn check_unit(u: &[f64]) -> Result<()> {
    let n = norm(u);
    if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
        return Err(Error::NonUnitDirection { norm: n });
    }
    Ok(())
}

/// Normalizes in place; returns false for the zero vector.
pub fn normalize(u: &mut [f64]) -> bool {
    let n = norm(u);
    if n == 0.0 || !n.is_finite() {
        return false;
    }
    u.iter_mut().for_each(|x| *x /= n);
    true
}

pub fn canonical(d: usize, k: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[k] = 1.0;
    e
}

/// Uniform draw from the unit sphere in `R^d`.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let mut u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if normalize(&mut u) {
            return u;
        }
    }
}
