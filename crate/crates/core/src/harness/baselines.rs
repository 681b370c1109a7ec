//! Comparator estimators.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::numeric::{median, CompensatedSum};

/// Arithmetic mean of the rows.
pub fn empirical_mean(x: &Matrix) -> Result<Vec<f64>> {
    if x.rows() == 0 {
        return Err(Error::Empty("rows"));
    }
    Ok(column_means(x, 0, x.rows()))
}

fn column_means(x: &Matrix, start: usize, end: usize) -> Vec<f64> {
    let mut acc = vec![CompensatedSum::default(); x.cols()];
    for i in start..end {
        for (a, v) in acc.iter_mut().zip(x.row(i)) {
            a.add(*v);
        }
    }
    let count = (end - start) as f64;
    acc.iter().map(|a| a.value() / count).collect()
}

/// Coordinatewise median of `k` contiguous block means; trailing rows
/// beyond `k * floor(N/k)` are dropped.
pub fn median_of_means(x: &Matrix, k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::invalid("median-of-means needs at least one block"));
    }
    if k > x.rows() {
        return Err(Error::Sizing {
            what: "median-of-means blocks",
            got: x.rows(),
            minimal: k,
        });
    }
    let size = x.rows() / k;
    let means: Vec<Vec<f64>> = (0..k)
        .map(|b| column_means(x, b * size, (b + 1) * size))
        .collect();
    Ok((0..x.cols())
        .map(|c| median(&means.iter().map(|m| m[c]).collect::<Vec<_>>()))
        .collect())
}

/// `ceil(8 ln(e / delta))`.
pub fn default_mom_blocks(delta: f64) -> usize {
    (8.0 * (1.0 - delta.ln())).ceil() as usize
}
