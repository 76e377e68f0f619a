//! Design-matrix utilities: column standardization, principal-component
//! reduction, and market-local spatial lags.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::collections::BTreeMap;

use crate::linalg::check_finite;
use crate::{Error, Result};

/// Columns whose standard deviation falls below this (relative to
/// `max(1, |mean|)`) are treated as constant: they are centered but not
/// rescaled, so standardization stays idempotent.
const SCALE_FLOOR: f64 = 1e-12;

/// Per-column location and scale recorded by [`standardize`], used to map
/// fitted coefficients back into raw units.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardization {
    /// Applies a recorded standardization to new data with the same columns.
    pub fn apply(&self, x: &mut DMatrix<f64>) -> Result<()> {
        if x.ncols() != self.means.len() {
            return Err(Error::InvalidInput(format!(
                "standardization has {} columns, data has {}",
                self.means.len(),
                x.ncols()
            )));
        }
        for c in 0..x.ncols() {
            for r in 0..x.nrows() {
                x[(r, c)] = (x[(r, c)] - self.means[c]) / self.scales[c];
            }
        }
        Ok(())
    }
}

/// Centers every column to mean zero and rescales to unit variance in place,
/// returning the per-column location/scale. Variance is the population
/// variance (divide by n). Constant columns are centered only and get scale
/// 1, which makes the operation idempotent on any input.
pub fn standardize(x: &mut DMatrix<f64>) -> Result<Standardization> {
    check_finite(x, "standardization input")?;
    let n = x.nrows();
    if n == 0 {
        return Err(Error::InvalidInput(
            "cannot standardize an empty design".into(),
        ));
    }
    let mut means = Vec::with_capacity(x.ncols());
    let mut scales = Vec::with_capacity(x.ncols());
    for c in 0..x.ncols() {
        let col = x.column(c);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        let scale = if sd <= SCALE_FLOOR * mean.abs().max(1.0) {
            1.0
        } else {
            sd
        };
        for r in 0..n {
            x[(r, c)] = (x[(r, c)] - mean) / scale;
        }
        means.push(mean);
        scales.push(scale);
    }
    Ok(Standardization { means, scales })
}

/// Standardizes a single column vector, returning (mean, scale).
pub fn standardize_vector(v: &mut DVector<f64>) -> Result<(f64, f64)> {
    let mut m = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
    let s = standardize(&mut m)?;
    v.copy_from(&m.column(0));
    Ok((s.means[0], s.scales[0]))
}

/// Principal-component reduction of a standardized design.
#[derive(Debug, Clone)]
pub struct Pca {
    /// Component scores, one column per kept component (n x kept).
    pub scores: DMatrix<f64>,
    /// Orthonormal loading vectors, one column per kept component.
    pub loadings: DMatrix<f64>,
    /// All eigenvalues of the column covariance, sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Number of components kept (minimal prefix reaching the target).
    pub n_kept: usize,
    /// Share of total variance carried by the kept prefix.
    pub variance_explained: f64,
    /// Indices (into the kept set) flagged for price-interaction use.
    pub top_components: Vec<usize>,
}

/// Eigendecomposes the column covariance of `x` and keeps the smallest
/// prefix of the descending spectrum whose cumulative share reaches
/// `variance_target`. The first `n_flagged` kept components are flagged for
/// forming heterogeneous price coefficients.
///
/// `x` is expected to be standardized; the covariance is X'X / n.
pub fn pca_reduce(x: &DMatrix<f64>, variance_target: f64, n_flagged: usize) -> Result<Pca> {
    check_finite(x, "pca input")?;
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(Error::Config(format!(
            "variance target must lie in (0, 1], got {variance_target}"
        )));
    }
    let n = x.nrows();
    let p = x.ncols();
    if n == 0 || p == 0 {
        return Err(Error::InvalidInput("pca input is empty".into()));
    }
    let cov = x.transpose() * x / n as f64;
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("eigenvalues of a finite symmetric matrix are finite")
    });
    let eigenvalues: Vec<f64> = order
        .iter()
        .map(|&i| eig.eigenvalues[i].max(0.0))
        .collect();
    let total: f64 = eigenvalues.iter().sum();
    if total <= 1e-12 {
        return Err(Error::Data(
            "design has no variance (all columns constant); nothing to reduce".into(),
        ));
    }
    let mut cum = 0.0;
    let mut n_kept = p;
    for (i, ev) in eigenvalues.iter().enumerate() {
        cum += ev;
        // Tiny slack so exact-boundary targets are not missed to rounding.
        if cum >= variance_target * total - 1e-12 * total {
            n_kept = i + 1;
            break;
        }
    }
    let mut loadings = DMatrix::zeros(p, n_kept);
    for (k, &i) in order.iter().take(n_kept).enumerate() {
        loadings.set_column(k, &eig.eigenvectors.column(i));
    }
    let scores = x * &loadings;
    let variance_explained = eigenvalues.iter().take(n_kept).sum::<f64>() / total;
    let top_components = (0..n_flagged.min(n_kept)).collect();
    Ok(Pca {
        scores,
        loadings,
        eigenvalues,
        n_kept,
        variance_explained,
        top_components,
    })
}

/// Appends market-local spatial lags `W^j x` for `j = 1..=j_max` to a block
/// of design columns.
///
/// Rows of `cols` are (good, market) observations: `good_of_row[i]` indexes
/// into `w`, and rows sharing `market_of_row[i]` form one market. Each lag is
/// computed inside its market's block using the sub-matrix of `w` restricted
/// to the goods present there, which zeroes absent goods' rows and columns
/// for that market. Columns are returned unstandardized, ordered lag-major:
/// all of `W^1 x`, then `W^2 x`, and so on.
pub fn spatial_lags(
    w: &DMatrix<f64>,
    good_of_row: &[usize],
    market_of_row: &[usize],
    cols: &DMatrix<f64>,
    j_max: usize,
) -> Result<DMatrix<f64>> {
    check_finite(w, "proxy matrix")?;
    check_finite(cols, "lag input columns")?;
    if j_max == 0 {
        return Err(Error::InvalidInput("j_max must be at least 1".into()));
    }
    if w.nrows() != w.ncols() {
        return Err(Error::InvalidInput(format!(
            "proxy matrix must be square, got {}x{}",
            w.nrows(),
            w.ncols()
        )));
    }
    let n = cols.nrows();
    if good_of_row.len() != n || market_of_row.len() != n {
        return Err(Error::InvalidInput(format!(
            "row keys ({} goods, {} markets) do not match {} design rows",
            good_of_row.len(),
            market_of_row.len(),
            n
        )));
    }
    if let Some(&g) = good_of_row.iter().find(|&&g| g >= w.nrows()) {
        return Err(Error::InvalidInput(format!(
            "good index {g} out of range for a {}-good proxy matrix",
            w.nrows()
        )));
    }
    for i in 0..w.nrows() {
        if w[(i, i)].abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "proxy matrix must be hollow; diagonal entry {i} is {}",
                w[(i, i)]
            )));
        }
    }

    let mut markets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (row, &m) in market_of_row.iter().enumerate() {
        markets.entry(m).or_default().push(row);
    }
    for rows in markets.values() {
        let mut seen: Vec<usize> = rows.iter().map(|&r| good_of_row[r]).collect();
        seen.sort_unstable();
        if seen.windows(2).any(|p| p[0] == p[1]) {
            return Err(Error::InvalidInput(
                "a market contains the same good twice; rows must be unique per (good, market)"
                    .into(),
            ));
        }
    }

    let c = cols.ncols();
    let blocks: Vec<(Vec<usize>, DMatrix<f64>)> = markets
        .into_iter()
        .par_bridge()
        .map(|(_, rows)| {
            let goods: Vec<usize> = rows.iter().map(|&r| good_of_row[r]).collect();
            let w_sub = w.select_rows(goods.iter()).select_columns(goods.iter());
            let mut out = DMatrix::zeros(rows.len(), c * j_max);
            for col in 0..c {
                let mut cur =
                    DVector::from_iterator(rows.len(), rows.iter().map(|&r| cols[(r, col)]));
                for j in 0..j_max {
                    cur = &w_sub * cur;
                    out.set_column(j * c + col, &cur);
                }
            }
            (rows, out)
        })
        .collect();

    let mut out = DMatrix::zeros(n, c * j_max);
    for (rows, block) in blocks {
        for (local, &row) in rows.iter().enumerate() {
            for col in 0..c * j_max {
                out[(row, col)] = block[(local, col)];
            }
        }
    }
    Ok(out)
}
