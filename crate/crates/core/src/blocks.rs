//! Pairwise differencing, block planning and `1/sqrt(m)` block averages.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Contiguous blocks of `m` rows; the trailing `discarded` rows are unused.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockPlan {
    pub m: usize,
    pub n: usize,
    pub used: usize,
    pub discarded: usize,
    /// Trim count per side applied to the `n` block statistics.
    pub trim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "purpose", rename_all = "kebab-case")]
pub enum BlockPurpose {
    /// Target block count `ceil(c_blocks * ln(e / delta))`.
    Mean { c_blocks: f64 },
    /// Target block size `ceil(c1 / gamma^2)`.
    Variance { gamma: f64, c1: f64 },
}

/// `X_i - X_{N+i}` for a sample of `2N` rows.
pub fn pair_differences(x: &Matrix) -> Result<Matrix> {
    let total = x.rows();
    if !total.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "pairing needs an even row count, got {total}"
        )));
    }
    let half = total / 2;
    let d = x.cols();
    let mut out = Matrix::zeros(half, d);
    for i in 0..half {
        let (a, b) = (x.row(i), x.row(half + i));
        for (o, (p, q)) in out.row_mut(i).iter_mut().zip(a.iter().zip(b)) {
            *o = p - q;
        }
    }
    Ok(out)
}

/// Row `j` is `(1/sqrt(m)) * sum` of rows `j*m .. (j+1)*m`.
pub fn block_averages(x: &Matrix, m: usize) -> Result<Matrix> {
    if m == 0 {
        return Err(Error::invalid("block size must be at least 1"));
    }
    if m > x.rows() {
        return Err(Error::Sizing {
            what: "block averages",
            got: x.rows(),
            minimal: m,
        });
    }
    let n = x.rows() / m;
    let d = x.cols();
    let scale = (m as f64).sqrt();
    let mut out = Matrix::zeros(n, d);
    if d == 0 {
        return Ok(out);
    }
    out.as_mut_slice()
        .par_chunks_mut(d)
        .enumerate()
        .for_each(|(j, row)| {
            for i in j * m..(j + 1) * m {
                for (o, v) in row.iter_mut().zip(x.row(i)) {
                    *o += v;
                }
            }
            for o in row.iter_mut() {
                *o /= scale;
            }
        });
    Ok(out)
}

/// Smallest block count making `theta * n` integral.
pub fn trim_unit(theta: f64) -> usize {
    (1.0 / theta - 1e-9).ceil().max(1.0) as usize
}

fn check_theta(theta: f64) -> Result<usize> {
    if !(theta > 0.0 && theta < 0.5) {
        return Err(Error::invalid(format!("theta must lie in (0, 1/2), got {theta}")));
    }
    Ok(trim_unit(theta))
}

fn finish(rows: usize, n: usize, theta: f64) -> Result<BlockPlan> {
    let m = rows / n;
    let trim = (theta * n as f64).round() as usize;
    if trim == 0 || 2 * trim >= n {
        return Err(Error::invalid(format!(
            "theta = {theta} gives trim count {trim} for {n} blocks"
        )));
    }
    Ok(BlockPlan {
        m,
        n,
        used: n * m,
        discarded: rows - n * m,
        trim,
    })
}

/// `n` is the smallest multiple of `ceil(1/theta)` that is at least
/// `ceil(c_blocks * ln(e/delta))`, and `m = floor(rows / n)`.
pub fn plan_mean_blocks(rows: usize, delta: f64, theta: f64, c_blocks: f64) -> Result<BlockPlan> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(c_blocks > 0.0 && c_blocks.is_finite()) {
        return Err(Error::invalid(format!(
            "c_blocks must be positive, got {c_blocks}"
        )));
    }
    let unit = check_theta(theta)?;
    let target = (c_blocks * (1.0 - delta.ln())).ceil().max(1.0) as usize;
    let n = target.div_ceil(unit) * unit;
    if n > rows {
        return Err(Error::Sizing {
            what: "mean blocks",
            got: rows,
            minimal: n,
        });
    }
    finish(rows, n, theta)
}

/// `m0 = max(1, ceil(c1/gamma^2))`; `n` is `floor(rows/m0)` rounded down to a
/// multiple of `ceil(1/theta)` and `m = floor(rows / n)`. When fewer than
/// `ceil(1/theta)` blocks of size `m0` fit, the block count falls back to
/// `ceil(1/theta)` and the blocks shrink accordingly.
pub fn plan_variance_blocks(rows: usize, theta: f64, gamma: f64, c1: f64) -> Result<BlockPlan> {
    if !(gamma > 0.0 && gamma.is_finite() && c1 > 0.0 && c1.is_finite()) {
        return Err(Error::invalid("gamma and c1 must be positive"));
    }
    let unit = check_theta(theta)?;
    if rows < unit {
        return Err(Error::Sizing {
            what: "variance blocks",
            got: rows,
            minimal: unit,
        });
    }
    let m0 = ((c1 / (gamma * gamma)).ceil() as usize).max(1);
    let n0 = rows / m0;
    let n = if n0 >= unit { unit * (n0 / unit) } else { unit };
    finish(rows, n, theta)
}

/// Dispatches on `purpose`; `delta` only matters for the mean purpose.
pub fn plan_blocks(rows: usize, delta: f64, theta: f64, purpose: BlockPurpose) -> Result<BlockPlan> {
    match purpose {
        BlockPurpose::Mean { c_blocks } => plan_mean_blocks(rows, delta, theta, c_blocks),
        BlockPurpose::Variance { gamma, c1 } => plan_variance_blocks(rows, theta, gamma, c1),
    }
}

/// Averages of `x` truncated to the planned rows.
pub fn planned_averages(x: &Matrix, plan: &BlockPlan) -> Result<Matrix> {
    block_averages(&x.slice_rows(0, plan.used), plan.m)
}
