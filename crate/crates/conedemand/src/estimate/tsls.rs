//! Low-level two-stage least squares with cluster-robust inference.
//!
//! [`iv_regression`] is the kernel shared by the panel-level fits: it
//! projects endogenous columns on the instrument set, solves the second
//! stage, and reports a CR1 cluster-robust covariance together with the
//! standard diagnostics (adjusted R-squared, a robust Wald F on the slopes,
//! and a Durbin-Wu-Hausman exogeneity statistic).

use nalgebra::{Cholesky, DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::collections::BTreeMap;

use crate::linalg::{check_finite, pseudoinverse};
use crate::{Error, Result};

/// Output of [`iv_regression`]. Coefficients are ordered exogenous block
/// first, then endogenous block, matching `names`.
#[derive(Debug, Clone)]
pub struct LinearFit {
    pub names: Vec<String>,
    pub coefficients: DVector<f64>,
    /// CR1 cluster-robust covariance of the coefficients.
    pub covariance: DMatrix<f64>,
    pub standard_errors: DVector<f64>,
    /// Structural fitted values X̂β evaluated at the actual regressors.
    pub fitted: DVector<f64>,
    pub residuals: DVector<f64>,
    pub rss: f64,
    pub adjusted_r_squared: f64,
    /// Robust Wald test of all coefficients except the first exogenous
    /// column (the intercept by convention), as an F statistic.
    pub wald_f: f64,
    pub wald_df: (usize, usize),
    /// Durbin-Wu-Hausman exogeneity statistic (None when there is nothing to
    /// test: no endogenous columns, or instruments identical to regressors).
    pub dwh_chi2: Option<f64>,
    pub dwh_df: usize,
    pub dwh_p: Option<f64>,
    pub n_obs: usize,
    pub n_clusters: usize,
}

/// Finds columns of `m` that are numerically dependent on earlier columns,
/// by modified Gram-Schmidt. Returns indices of the dependent columns.
fn dependent_columns(m: &DMatrix<f64>) -> Vec<usize> {
    let n = m.nrows();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for c in 0..m.ncols() {
        let mut v = DVector::from_iterator(n, m.column(c).iter().copied());
        let scale = v.norm().max(1e-300);
        for b in &basis {
            let coef = b.dot(&v);
            v -= b * coef;
        }
        if v.norm() <= 1e-10 * scale {
            dependent.push(c);
        } else {
            let norm = v.norm();
            basis.push(v / norm);
        }
    }
    dependent
}

fn solve_spd(
    gram: &DMatrix<f64>,
    context: &str,
    names: &[String],
    design: &DMatrix<f64>,
) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    Cholesky::new(gram.clone()).ok_or_else(|| {
        let dep = dependent_columns(design);
        let listed: Vec<&str> = dep.iter().map(|&i| names[i].as_str()).collect();
        Error::Identification(format!(
            "{context} is rank-deficient; dependent columns: [{}]",
            listed.join(", ")
        ))
    })
}

/// CR1 cluster-robust covariance: bread * meat * bread scaled by
/// G/(G-1) * (n-1)/(n-k). With every observation its own cluster this is
/// exactly the Eicker-Huber-White HC1 estimator.
fn cluster_covariance(
    score_design: &DMatrix<f64>,
    residuals: &DVector<f64>,
    clusters: &[usize],
    bread: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, usize)> {
    let k = score_design.ncols();
    let n = score_design.nrows();
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in clusters.iter().enumerate() {
        groups.entry(c).or_default().push(i);
    }
    let g = groups.len();
    if g < 2 {
        return Err(Error::Data(
            "cluster-robust inference needs at least two clusters".into(),
        ));
    }
    if n <= k {
        return Err(Error::Data(format!(
            "{n} observations cannot support {k} coefficients"
        )));
    }
    let mut meat = DMatrix::zeros(k, k);
    for rows in groups.values() {
        let mut s: DVector<f64> = DVector::zeros(k);
        for &i in rows {
            for c in 0..k {
                s[c] += score_design[(i, c)] * residuals[i];
            }
        }
        meat += &s * s.transpose();
    }
    let adj = g as f64 / (g - 1) as f64 * (n - 1) as f64 / (n - k) as f64;
    Ok((adj * bread * meat * bread, g))
}

/// Two-stage least squares of `y` on `[exog | endog]`, instrumenting the
/// endogenous block with `[exog | instruments]`.
///
/// The exogenous block must put the intercept first; the Wald F tests all
/// other coefficients jointly. `clusters` assigns each observation to an
/// inference cluster (pass `0..n` for heteroskedasticity-robust errors
/// without clustering). `endog` may have zero columns, in which case the fit
/// is ordinary least squares and no exogeneity test is reported.
pub fn iv_regression(
    y: &DVector<f64>,
    exog: &DMatrix<f64>,
    exog_names: &[String],
    endog: &DMatrix<f64>,
    endog_names: &[String],
    instruments: &DMatrix<f64>,
    instrument_names: &[String],
    clusters: &[usize],
) -> Result<LinearFit> {
    let n = y.len();
    let k1 = exog.ncols();
    let k2 = endog.ncols();
    let kz = instruments.ncols();
    check_finite(exog, "exogenous block")?;
    check_finite(endog, "endogenous block")?;
    check_finite(instruments, "instrument block")?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("dependent variable contains NaN".into()));
    }
    if exog.nrows() != n || endog.nrows() != n || instruments.nrows() != n {
        return Err(Error::InvalidInput(format!(
            "row counts disagree: y {n}, exog {}, endog {}, instruments {}",
            exog.nrows(),
            endog.nrows(),
            instruments.nrows()
        )));
    }
    if clusters.len() != n {
        return Err(Error::InvalidInput(format!(
            "cluster key has {} entries for {n} observations",
            clusters.len()
        )));
    }
    if exog_names.len() != k1 || endog_names.len() != k2 || instrument_names.len() != kz {
        return Err(Error::InvalidInput("column name counts disagree".into()));
    }
    if k1 == 0 {
        return Err(Error::InvalidInput(
            "exogenous block must contain at least an intercept".into(),
        ));
    }
    if kz < k2 {
        return Err(Error::Identification(format!(
            "order condition fails: {k2} endogenous columns but only {kz} excluded instruments"
        )));
    }

    // Instrument matrix Z = [exog | instruments]; it must have full column
    // rank or the first stage is unidentified.
    let mut z = DMatrix::zeros(n, k1 + kz);
    z.columns_mut(0, k1).copy_from(exog);
    z.columns_mut(k1, kz).copy_from(instruments);
    let z_names: Vec<String> = exog_names
        .iter()
        .chain(instrument_names.iter())
        .cloned()
        .collect();
    let gram_z = z.transpose() * &z;
    let chol_z = solve_spd(&gram_z, "first-stage instrument matrix", &z_names, &z)?;

    // First stage: exogenous columns project to themselves exactly; only the
    // endogenous block is replaced by its instrument projection.
    let mut xhat = DMatrix::zeros(n, k1 + k2);
    xhat.columns_mut(0, k1).copy_from(exog);
    let mut first_stage_fitted = DMatrix::zeros(n, k2);
    if k2 > 0 {
        let ztx = z.transpose() * endog;
        let coefs = chol_z.solve(&ztx);
        first_stage_fitted = &z * coefs;
        xhat.columns_mut(k1, k2).copy_from(&first_stage_fitted);
    }

    let names: Vec<String> = exog_names
        .iter()
        .chain(endog_names.iter())
        .cloned()
        .collect();
    let k = k1 + k2;
    let gram = xhat.transpose() * &xhat;
    let chol = solve_spd(&gram, "second-stage design", &names, &xhat)?;
    let beta = chol.solve(&(xhat.transpose() * y));

    let mut x_actual = DMatrix::zeros(n, k);
    x_actual.columns_mut(0, k1).copy_from(exog);
    if k2 > 0 {
        x_actual.columns_mut(k1, k2).copy_from(endog);
    }
    let fitted = &x_actual * &beta;
    let residuals = y - &fitted;
    let rss = residuals.norm_squared();

    let bread = chol.inverse();
    let (covariance, n_clusters) = cluster_covariance(&xhat, &residuals, clusters, &bread)?;
    let standard_errors = DVector::from_iterator(k, (0..k).map(|i| covariance[(i, i)].sqrt()));

    let ybar = y.sum() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let adjusted_r_squared = if tss > 0.0 {
        1.0 - (rss / tss) * (n - 1) as f64 / (n - k) as f64
    } else {
        f64::NAN
    };

    // Robust Wald test on everything but the intercept.
    let q = k - 1;
    let wald_f = if q > 0 {
        let b = beta.rows(1, q).into_owned();
        let v = covariance.view((1, 1), (q, q)).into_owned();
        let vinv = match Cholesky::new(v.clone()) {
            Some(c) => c.inverse(),
            None => pseudoinverse(&v, 1e-12)?.pinv,
        };
        (b.transpose() * vinv * b)[(0, 0)] / q as f64
    } else {
        f64::NAN
    };
    let wald_df = (q, n_clusters - 1);

    // Durbin-Wu-Hausman via the control-function augmentation: add the
    // first-stage residuals to an OLS fit and test their joint significance.
    let mut dwh_chi2 = None;
    let mut dwh_p = None;
    if k2 > 0 {
        let fs_residuals = endog - &first_stage_fitted;
        if fs_residuals.norm() > 1e-10 * endog.norm().max(1.0) {
            let mut xa = DMatrix::zeros(n, k + k2);
            xa.columns_mut(0, k).copy_from(&x_actual);
            xa.columns_mut(k, k2).copy_from(&fs_residuals);
            let gram_a = xa.transpose() * &xa;
            if let Some(chol_a) = Cholesky::new(gram_a) {
                let beta_a = chol_a.solve(&(xa.transpose() * y));
                let resid_a = y - &xa * &beta_a;
                let bread_a = chol_a.inverse();
                let (cov_a, _) = cluster_covariance(&xa, &resid_a, clusters, &bread_a)?;
                let bv = beta_a.rows(k, k2).into_owned();
                let vv = cov_a.view((k, k), (k2, k2)).into_owned();
                let vinv = match Cholesky::new(vv.clone()) {
                    Some(c) => c.inverse(),
                    None => pseudoinverse(&vv, 1e-12)?.pinv,
                };
                let stat = (bv.transpose() * vinv * bv)[(0, 0)];
                let chi = ChiSquared::new(k2 as f64).expect("positive degrees of freedom");
                dwh_chi2 = Some(stat);
                dwh_p = Some(1.0 - chi.cdf(stat));
            }
        }
    }

    Ok(LinearFit {
        names,
        coefficients: beta,
        covariance,
        standard_errors,
        fitted,
        residuals,
        rss,
        adjusted_r_squared,
        wald_f,
        wald_df,
        dwh_chi2,
        dwh_df: k2,
        dwh_p,
        n_obs: n,
        n_clusters,
    })
}

/// Ordinary least squares as a degenerate instrumented fit (no endogenous
/// block). Provided for callers that need plain OLS with the same
/// cluster-robust machinery.
pub fn ols_regression(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    names: &[String],
    clusters: &[usize],
) -> Result<LinearFit> {
    let empty = DMatrix::zeros(y.len(), 0);
    iv_regression(y, x, names, &empty, &[], &empty, &[], clusters)
}
