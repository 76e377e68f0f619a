//! Store-traffic response to the price level: a first-differenced
//! instrumented regression of log transaction counts on a log price index,
//! with the instrument lag picked by first-stage strength and an
//! Anderson-Rubin construction that stays valid when the instrument is weak.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal};

use super::panel::ParticipationObs;
use super::tsls::iv_regression;
use crate::{Error, Result};

const MIN_DIFFERENCES: usize = 8;
const VARIATION_TOL: f64 = 1e-12;

/// Fitted traffic elasticity with its inference pieces. The differenced
/// series are kept so hypothesis tests can be evaluated at any null.
#[derive(Debug, Clone)]
pub struct ParticipationFit {
    /// Elasticity of transactions with respect to the price index.
    pub delta_hat: f64,
    /// Heteroskedasticity-robust standard error.
    pub standard_error: f64,
    /// Two-sided normal p-value for `delta = 0`.
    pub p_value: f64,
    /// Anderson-Rubin p-value at the null `delta = 0`.
    pub ar_p_value: f64,
    /// Homoskedastic F on the instrument in the first stage.
    pub first_stage_f: f64,
    /// Instrument lag (in quarters) that won the first-stage comparison.
    pub chosen_lag: usize,
    /// Differenced observations used.
    pub n_differences: usize,
    dy: DVector<f64>,
    dp: DVector<f64>,
    dz: DVector<f64>,
    trend: DVector<f64>,
}

fn sd(v: &DVector<f64>) -> f64 {
    let n = v.len() as f64;
    let mean = v.sum() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Ordinary least squares residual sum of squares of `y` on the given
/// columns, via the normal equations.
fn ols_rss(y: &DVector<f64>, cols: &[&DVector<f64>]) -> Result<f64> {
    let n = y.len();
    let k = cols.len();
    let mut x = DMatrix::zeros(n, k);
    for (c, col) in cols.iter().enumerate() {
        x.set_column(c, col);
    }
    let gram = x.transpose() * &x;
    let chol = gram.cholesky().ok_or_else(|| {
        Error::Identification("the hypothesis-test design is rank deficient".into())
    })?;
    let b = chol.solve(&(x.transpose() * y));
    let r = y - &x * b;
    Ok(r.dot(&r))
}

impl ParticipationFit {
    /// Anderson-Rubin p-value at the null `delta = delta0`: the F-test of the
    /// instrument in a regression of `dy - delta0 dp` on the exogenous
    /// columns and the instrument.
    pub fn ar_p(&self, delta0: f64) -> Result<f64> {
        let n = self.dy.len();
        let yy = &self.dy - delta0 * &self.dp;
        let ones = DVector::from_element(n, 1.0);
        let rss_u = ols_rss(&yy, &[&ones, &self.trend, &self.dz])?;
        let rss_r = ols_rss(&yy, &[&ones, &self.trend])?;
        let df2 = (n - 3) as f64;
        let f = ((rss_r - rss_u).max(0.0)) / (rss_u.max(1e-300) / df2);
        let dist = FisherSnedecor::new(1.0, df2)
            .map_err(|e| Error::Numerical(format!("F distribution: {e}")))?;
        Ok(1.0 - dist.cdf(f))
    }

    /// Grid points whose Anderson-Rubin p-value does not reject at the given
    /// confidence level (e.g. 0.95 keeps points with p >= 0.05).
    pub fn ar_confidence_set(&self, grid: &[f64], level: f64) -> Result<Vec<f64>> {
        if !(0.0 < level && level < 1.0) {
            return Err(Error::InvalidInput(format!(
                "confidence level must be in (0,1), got {level}"
            )));
        }
        let alpha = 1.0 - level;
        let mut kept = Vec::new();
        for &d in grid {
            if self.ar_p(d)? >= alpha {
                kept.push(d);
            }
        }
        Ok(kept)
    }
}

/// Fits the differenced instrumented regression
/// `dy = delta dp + a + b t + du`, instrumenting `dp` with `dz`.
/// Inference is heteroskedasticity-robust; the first-stage F and the
/// Anderson-Rubin p use homoskedastic F-tests.
pub fn differenced_iv(
    dy: &DVector<f64>,
    dp: &DVector<f64>,
    dz: &DVector<f64>,
    trend: &DVector<f64>,
) -> Result<ParticipationFit> {
    let n = dy.len();
    if dp.len() != n || dz.len() != n || trend.len() != n {
        return Err(Error::InvalidInput(format!(
            "differenced series disagree in length: {n}, {}, {}, {}",
            dp.len(),
            dz.len(),
            trend.len()
        )));
    }
    if n < MIN_DIFFERENCES {
        return Err(Error::Data(format!(
            "participation regression needs at least {MIN_DIFFERENCES} differenced \
             observations, got {n}"
        )));
    }
    if sd(dz) <= VARIATION_TOL || sd(dp) <= VARIATION_TOL {
        return Err(Error::Data(
            "prices show no variation across quarters; the first-stage F is undefined".into(),
        ));
    }

    let mut exog = DMatrix::zeros(n, 2);
    exog.set_column(0, &DVector::from_element(n, 1.0));
    exog.set_column(1, trend);
    let endog = DMatrix::from_column_slice(n, 1, dp.as_slice());
    let instruments = DMatrix::from_column_slice(n, 1, dz.as_slice());
    // Singleton clusters make the cluster-robust covariance coincide with
    // the heteroskedasticity-robust one.
    let clusters: Vec<usize> = (0..n).collect();
    let fit = iv_regression(
        dy,
        &exog,
        &["(intercept)".to_string(), "trend".to_string()],
        &endog,
        &["d_price_index".to_string()],
        &instruments,
        &["d_competitor_index".to_string()],
        &clusters,
    )?;
    let delta_hat = fit.coefficients[2];
    let standard_error = fit.standard_errors[2];
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p_value = 2.0 * (1.0 - normal.cdf((delta_hat / standard_error).abs()));

    // Homoskedastic first-stage F on the instrument.
    let ones = DVector::from_element(n, 1.0);
    let rss_u = ols_rss(dp, &[&ones, trend, dz])?;
    let rss_r = ols_rss(dp, &[&ones, trend])?;
    let first_stage_f = ((rss_r - rss_u).max(0.0)) / (rss_u.max(1e-300) / (n - 3) as f64);

    let mut out = ParticipationFit {
        delta_hat,
        standard_error,
        p_value,
        ar_p_value: 0.0,
        first_stage_f,
        chosen_lag: 0,
        n_differences: n,
        dy: dy.clone(),
        dp: dp.clone(),
        dz: dz.clone(),
        trend: trend.clone(),
    };
    out.ar_p_value = out.ar_p(0.0)?;
    Ok(out)
}

/// Differenced series for one instrument lag, pooled across stores.
struct DifferencedSample {
    dy: Vec<f64>,
    dp: Vec<f64>,
    dz: Vec<f64>,
    trend: Vec<f64>,
}

fn build_differences(obs: &[ParticipationObs], lag: i64) -> DifferencedSample {
    use std::collections::BTreeMap;
    let mut by_store: BTreeMap<usize, BTreeMap<i64, (f64, f64, f64)>> = BTreeMap::new();
    for o in obs {
        if o.transactions > 0.0 && o.price_index > 0.0 && o.competitor_index > 0.0 {
            by_store.entry(o.store).or_default().insert(
                o.quarter_ordinal,
                (o.transactions, o.price_index, o.competitor_index),
            );
        }
    }
    let mut out = DifferencedSample {
        dy: Vec::new(),
        dp: Vec::new(),
        dz: Vec::new(),
        trend: Vec::new(),
    };
    for series in by_store.values() {
        for (&t, &(n1, p1, _)) in series {
            let Some(&(n0, p0, _)) = series.get(&(t - 1)) else {
                continue;
            };
            let (Some(&(_, _, c1)), Some(&(_, _, c0))) =
                (series.get(&(t - lag)), series.get(&(t - 1 - lag)))
            else {
                continue;
            };
            out.dy.push((n1 / n0).ln());
            out.dp.push((p1 / p0).ln());
            out.dz.push((c1 / c0).ln());
            out.trend.push(t as f64);
        }
    }
    out
}

/// Traffic elasticity from store-quarter observations: first-differences the
/// logs, tries the competitor-price instrument at lags 0, 1, and 2 quarters,
/// keeps the lag with the strongest first stage, and fits the instrumented
/// regression on that sample.
pub fn participation_elasticity(obs: &[ParticipationObs]) -> Result<ParticipationFit> {
    let mut candidates = Vec::new();
    for lag in 0..=2i64 {
        let s = build_differences(obs, lag);
        let n = s.dy.len();
        if n < MIN_DIFFERENCES {
            continue;
        }
        let dy = DVector::from_vec(s.dy);
        let dp = DVector::from_vec(s.dp);
        let dz = DVector::from_vec(s.dz);
        let trend = DVector::from_vec(s.trend);
        if sd(&dz) <= VARIATION_TOL || sd(&dp) <= VARIATION_TOL {
            continue;
        }
        let ones = DVector::from_element(n, 1.0);
        let rss_u = ols_rss(&dp, &[&ones, &trend, &dz])?;
        let rss_r = ols_rss(&dp, &[&ones, &trend])?;
        let f = ((rss_r - rss_u).max(0.0)) / (rss_u.max(1e-300) / (n - 3) as f64);
        candidates.push((lag as usize, f, dy, dp, dz, trend));
    }
    let Some((lag, _, dy, dp, dz, trend)) = candidates
        .into_iter()
        .max_by(|a, b| a.1.partial_cmp(&b.1).expect("finite first-stage F"))
    else {
        // Distinguish scarcity from degeneracy for the caller.
        let n0 = build_differences(obs, 0).dy.len();
        if n0 < MIN_DIFFERENCES {
            return Err(Error::Data(format!(
                "participation regression needs at least {MIN_DIFFERENCES} differenced \
                 observations, got {n0}"
            )));
        }
        return Err(Error::Data(
            "prices show no variation across quarters; the first-stage F is undefined".into(),
        ));
    };
    let mut fit = differenced_iv(&dy, &dp, &dz, &trend)?;
    fit.chosen_lag = lag;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn fixture() -> (DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>) {
        let dz = DVector::from_column_slice(&[
            0.5, -0.2, 0.3, 0.1, -0.4, 0.6, -0.1, 0.2, -0.3, 0.4,
        ]);
        let dp_noise = [
            0.05, -0.02, 0.04, -0.01, 0.03, -0.05, 0.02, 0.01, -0.03, 0.02,
        ];
        let dy_noise = [
            0.01, -0.015, 0.02, 0.005, -0.01, 0.015, -0.005, 0.01, -0.02, 0.005,
        ];
        let trend = DVector::from_iterator(10, (0..10).map(|t| t as f64));
        let dp = DVector::from_iterator(10, (0..10).map(|i| 0.9 * dz[i] + dp_noise[i]));
        let dy =
            DVector::from_iterator(10, (0..10).map(|i| -dp[i] + 0.02 * trend[i] + dy_noise[i]));
        (dy, dp, dz, trend)
    }

    #[test]
    fn frozen_fixture_matches_the_reference_values() {
        let (dy, dp, dz, trend) = fixture();
        let fit = differenced_iv(&dy, &dp, &dz, &trend).unwrap();
        assert_relative_eq!(fit.delta_hat, -0.9635488308115544, max_relative = 1e-9);
        assert_relative_eq!(
            fit.standard_error,
            0.006333612895807796,
            max_relative = 1e-9
        );
        assert_relative_eq!(fit.first_stage_f, 711.8699740137398, max_relative = 1e-9);
        assert_relative_eq!(
            fit.ar_p(-1.0).unwrap(),
            0.0021687150133288258,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            fit.ar_p(0.0).unwrap(),
            2.189708869781981e-8,
            max_relative = 1e-6
        );
        assert_eq!(fit.ar_p_value, fit.ar_p(0.0).unwrap());
        assert!(fit.p_value < 1e-10);
        assert_eq!(fit.n_differences, 10);
    }

    #[test]
    fn confidence_set_is_the_unrejected_grid() {
        let (dy, dp, dz, trend) = fixture();
        let fit = differenced_iv(&dy, &dp, &dz, &trend).unwrap();
        let grid: Vec<f64> = (0..60).map(|i| -1.2 + 0.01 * i as f64).collect();
        let kept = fit.ar_confidence_set(&grid, 0.95).unwrap();
        assert!(!kept.is_empty());
        for &d in &grid {
            let in_set = kept.contains(&d);
            assert_eq!(in_set, fit.ar_p(d).unwrap() >= 0.05, "at {d}");
        }
        // The point estimate itself is never rejected.
        assert!(fit.ar_p(fit.delta_hat).unwrap() > fit.ar_p(0.0).unwrap());
    }

    fn synthetic_obs(
        n_stores: usize,
        n_quarters: usize,
        delta: f64,
        seed: u64,
    ) -> Vec<ParticipationObs> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        let costs: Vec<f64> = (0..n_quarters).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let mut prices = vec![vec![0.0; n_quarters]; n_stores];
        for (s, row) in prices.iter_mut().enumerate() {
            for (q, p) in row.iter_mut().enumerate() {
                *p = (0.5 + 0.4 * costs[q]
                    + 0.1 * rng.gen_range(-1.0..1.0)
                    + 0.02 * s as f64)
                    .exp();
            }
        }
        for s in 0..n_stores {
            for q in 0..n_quarters {
                let competitor: f64 = (0..n_stores)
                    .filter(|&o| o != s)
                    .map(|o| prices[o][q])
                    .sum::<f64>()
                    / (n_stores - 1) as f64;
                let ln_n = delta * prices[s][q].ln()
                    + 0.02 * q as f64
                    + 0.01 * rng.gen_range(-1.0..1.0);
                out.push(ParticipationObs {
                    store: s,
                    quarter_ordinal: q as i64,
                    transactions: ln_n.exp() * 100.0,
                    price_index: prices[s][q],
                    competitor_index: competitor,
                });
            }
        }
        out
    }

    #[test]
    fn recovers_the_generating_elasticity() {
        let obs = synthetic_obs(3, 16, -1.0, 4);
        let fit = participation_elasticity(&obs).unwrap();
        assert_eq!(fit.chosen_lag, 0, "contemporaneous cost link");
        assert_eq!(fit.n_differences, 3 * 15);
        assert!(
            (fit.delta_hat - -1.0).abs() < 0.2,
            "delta {}",
            fit.delta_hat
        );
        assert!(fit.first_stage_f > 10.0);
    }

    #[test]
    fn too_few_differences_is_an_error() {
        let obs = synthetic_obs(1, 5, -1.0, 1);
        let err = participation_elasticity(&obs).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
        assert!(err.to_string().contains("at least 8"));
    }

    #[test]
    fn constant_prices_are_degenerate() {
        let mut obs = synthetic_obs(2, 12, -1.0, 2);
        for o in &mut obs {
            o.price_index = 2.0;
            o.competitor_index = 2.0;
        }
        let err = participation_elasticity(&obs).unwrap_err();
        assert!(err.to_string().contains("no variation"));
    }

    #[test]
    fn lagged_instrument_wins_when_the_cost_link_is_lagged() {
        // Competitor prices move one quarter ahead of own prices, so the
        // lag-1 instrument has the stronger first stage.
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let n_quarters = 20;
        let costs: Vec<f64> = (0..n_quarters + 1).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let mut out = Vec::new();
        for s in 0..2usize {
            for q in 0..n_quarters {
                // Own price follows cost at q; the competitor index follows
                // cost at q+1 (it leads).
                let own = (0.5 + 0.4 * costs[q] + 0.05 * rng.gen_range(-1.0..1.0)).exp();
                let comp = (0.5 + 0.4 * costs[q + 1] + 0.01 * rng.gen_range(-1.0..1.0)).exp();
                let ln_n = -1.0 * own.ln() + 0.01 * rng.gen_range(-1.0..1.0);
                out.push(ParticipationObs {
                    store: s,
                    quarter_ordinal: q as i64,
                    transactions: ln_n.exp() * 50.0,
                    price_index: own,
                    competitor_index: comp,
                });
            }
        }
        let fit = participation_elasticity(&out).unwrap();
        assert_eq!(fit.chosen_lag, 1, "first-stage F should prefer the lead");
    }
}
