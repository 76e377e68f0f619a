//! Corner corrections for the panel fit: the iterated non-negative
//! least-squares control function, and the joint grid search that rebuilds
//! the demand projector from candidate series weights.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::fit::{
    assemble_design, run_iv, summarize_fit, CorrectionInfo, DesignSettings, FitResult, RoundInfo,
};
use super::panel::MarketPanel;
use super::tsls::iv_regression;
use crate::demand::ConsiderationSet;
use crate::linalg::{nnls, pseudoinverse};
use crate::{Error, Result};

const CF_TOLERANCE: f64 = 1e-6;

/// Rebuilds the inverse interaction matrix implied by fitted series weights:
/// I + sum_j alpha_j W^j, symmetrized and eigenvalue-floored so it is safe to
/// invert. With no proxy or no weights this is the identity.
pub(crate) fn recovered_inverse(
    alpha: &[f64],
    w: Option<&DMatrix<f64>>,
    k: usize,
) -> Result<DMatrix<f64>> {
    let mut b = DMatrix::identity(k, k);
    if let Some(w) = w {
        let mut power = DMatrix::identity(k, k);
        for &a in alpha {
            power = &power * w;
            b += a * &power;
        }
    } else if !alpha.is_empty() {
        return Err(Error::InvalidInput(
            "series weights were fitted but no proxy matrix was supplied".into(),
        ));
    }
    let mut sym = (&b + b.transpose()) / 2.0;
    let floor = 1e-8 * sym.trace().abs().max(1e-8) / k as f64;
    let min_eig = crate::linalg::min_symmetric_eigenvalue(&sym);
    if min_eig < floor {
        for i in 0..k {
            sym[(i, i)] += floor - min_eig;
        }
    }
    Ok(sym)
}

/// Per-market geometry reused across control-function rounds: the panel rows
/// of the market, the goods present, and the baskets fully supported there.
struct MarketBlock {
    rows: Vec<usize>,
    goods: Vec<usize>,
    baskets: DMatrix<f64>,
}

fn market_blocks(panel: &MarketPanel, a: &ConsiderationSet) -> Vec<MarketBlock> {
    let good_of_row = panel.good_of_row();
    let supports: Vec<Vec<usize>> = (0..a.n_baskets())
        .map(|c| {
            (0..a.n_goods())
                .filter(|&g| a.matrix()[(g, c)] > 0.0)
                .collect()
        })
        .collect();
    panel
        .market_rows()
        .into_values()
        .map(|rows| {
            let goods: Vec<usize> = rows.iter().map(|&r| good_of_row[r]).collect();
            let cols: Vec<usize> = (0..a.n_baskets())
                .filter(|&c| supports[c].iter().all(|g| goods.contains(g)))
                .collect();
            let mut baskets = DMatrix::zeros(goods.len(), cols.len());
            for (j, &c) in cols.iter().enumerate() {
                for (i, &g) in goods.iter().enumerate() {
                    baskets[(i, j)] = a.matrix()[(g, c)];
                }
            }
            MarketBlock {
                rows,
                goods,
                baskets,
            }
        })
        .collect()
}

/// Projects destandardized fitted demand onto each market's basket cone and
/// returns the wedge q-dagger minus its cone projection, in raw units.
fn cone_wedge(
    blocks: &[MarketBlock],
    q_dag: &DVector<f64>,
    m_hat: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let mut r = DVector::zeros(q_dag.len());
    for block in blocks {
        let target = DVector::from_iterator(
            block.rows.len(),
            block.rows.iter().map(|&row| q_dag[row]),
        );
        let wedge = if block.baskets.ncols() == 0 {
            target
        } else {
            let weight = m_hat
                .select_rows(block.goods.iter())
                .select_columns(block.goods.iter());
            let sol = nnls(&block.baskets, &target, &weight)?;
            target - &block.baskets * sol.z
        };
        for (i, &row) in block.rows.iter().enumerate() {
            r[row] = wedge[i];
        }
    }
    Ok(r)
}

/// The iterated non-negativity control function.
///
/// Each round fits the instrumented regression, rebuilds the interaction
/// matrix implied by the fitted series weights, projects the destandardized
/// fitted demand onto each market's basket cone, and moves the projection
/// residual into the dependent variable. Stops when the correction's
/// relative change falls below 1e-6 or after `max_rounds` (then the result
/// carries a warning and the round history instead of failing).
pub fn nn_control_function_fit(
    panel: &MarketPanel,
    w: Option<&DMatrix<f64>>,
    a: &ConsiderationSet,
    settings: &DesignSettings,
    max_rounds: usize,
) -> Result<FitResult> {
    if a.n_goods() != panel.goods.len() {
        return Err(Error::InvalidInput(format!(
            "consideration set covers {} goods but the panel has {}",
            a.n_goods(),
            panel.goods.len()
        )));
    }
    if max_rounds == 0 {
        return Err(Error::Config("max_rounds must be at least 1".into()));
    }
    let design = assemble_design(panel, w, settings)?;
    let blocks = market_blocks(panel, a);
    let k = panel.goods.len();

    let mut y = design.y.clone();
    let mut fit = run_iv(&design, &y)?;
    let mut r_prev: DVector<f64> = DVector::zeros(design.y.len());
    let mut r = r_prev.clone();
    let mut rounds = Vec::new();
    let mut converged = false;
    for round in 1..=max_rounds {
        let alpha = super::fit::series_weights(&fit.coefficients, &design);
        let b_hat = recovered_inverse(&alpha, w, k)?;
        let m_hat = Cholesky::new(b_hat)
            .ok_or_else(|| {
                Error::Numerical("recovered inverse interaction matrix is not positive definite".into())
            })?
            .inverse();
        let q_dag = fit.fitted.map(|v| v * design.sd_q + design.mean_q);
        r = cone_wedge(&blocks, &q_dag, &m_hat)?;
        let r_norm = r.norm();
        // A wedge at rounding level relative to demand itself is a slack
        // cone, not a moving fixed point.
        let relative_change = if r_norm <= 1e-9 * q_dag.norm().max(1e-12) {
            0.0
        } else {
            (&r - &r_prev).norm() / r_norm
        };
        rounds.push(RoundInfo {
            round,
            correction_norm: r_norm,
            relative_change,
        });
        if relative_change < CF_TOLERANCE {
            converged = true;
            break;
        }
        y = &design.y + &r / design.sd_q;
        fit = run_iv(&design, &y)?;
        r_prev = r.clone();
    }

    let warning = if converged {
        None
    } else {
        Some(format!(
            "correction did not reach a fixed point in {max_rounds} rounds; last relative change {:.3e}",
            rounds.last().map(|r| r.relative_change).unwrap_or(f64::NAN)
        ))
    };
    let mut result = summarize_fit(&fit, &design);
    result.correction = Some(CorrectionInfo {
        rounds,
        converged,
        warning,
        residual: r.iter().copied().collect(),
    });
    Ok(result)
}

/// Joint grid search over series weights: for each candidate, rebuilds the
/// implied demand projector per market (inverse interaction applied to the
/// basket span), transforms the design through it, fits, and keeps the
/// candidate with the smallest second-stage residual sum of squares.
pub fn lf_grid_fit(
    panel: &MarketPanel,
    w: Option<&DMatrix<f64>>,
    a: &ConsiderationSet,
    settings: &DesignSettings,
    alpha_grid: &[Vec<f64>],
) -> Result<FitResult> {
    if alpha_grid.is_empty() {
        return Err(Error::Config("the series-weight grid is empty".into()));
    }
    if a.n_goods() != panel.goods.len() {
        return Err(Error::InvalidInput(format!(
            "consideration set covers {} goods but the panel has {}",
            a.n_goods(),
            panel.goods.len()
        )));
    }
    if w.is_none() && alpha_grid.iter().any(|p| !p.is_empty()) {
        return Err(Error::Config(
            "grid points carry series weights but no proxy matrix was supplied".into(),
        ));
    }
    // The base design provides the dependent variable, components, and
    // instruments; the grid rebuilds the transformed regressors per point.
    let base = assemble_design(panel, None, settings)?;
    let blocks = market_blocks(panel, a);
    let k = panel.goods.len();
    let n = base.y.len();

    let mut best: Option<(f64, FitResult)> = None;
    for alpha in alpha_grid {
        let b = recovered_inverse(alpha, w, k)?;
        // Per-market projector B A (A' B A)^+ A' B applied to the price and
        // component columns, and to the constant: the projected intercept
        // carries the goods pattern the candidate implies for baseline
        // demand, which is what separates candidates when prices alone
        // barely move under the projector.
        let mut tp = DVector::zeros(n);
        let mut tone = DVector::zeros(n);
        let mut tc = DMatrix::zeros(n, base.component_scores.ncols());
        for block in &blocks {
            let b_sub = b
                .select_rows(block.goods.iter())
                .select_columns(block.goods.iter());
            let projector = if block.baskets.ncols() == 0 {
                DMatrix::zeros(block.goods.len(), block.goods.len())
            } else {
                let ba = &b_sub * &block.baskets;
                let gram = block.baskets.transpose() * &ba;
                let pinv = pseudoinverse(&gram, 1e-12)?.pinv;
                &ba * pinv * ba.transpose()
            };
            let p_m = DVector::from_iterator(
                block.rows.len(),
                block.rows.iter().map(|&r| panel.price[r]),
            );
            let tp_m = &projector * p_m;
            let tone_m = &projector * DVector::from_element(block.rows.len(), 1.0);
            for (i, &row) in block.rows.iter().enumerate() {
                tp[row] = tp_m[i];
                tone[row] = tone_m[i];
            }
            for c in 0..tc.ncols() {
                let x_m = DVector::from_iterator(
                    block.rows.len(),
                    block.rows.iter().map(|&r| base.component_scores[(r, c)]),
                );
                let tx_m = &projector * x_m;
                for (i, &row) in block.rows.iter().enumerate() {
                    tc[(row, c)] = tx_m[i];
                }
            }
        }

        let mean_tp = tp.sum() / n as f64;
        let var_tp = tp.iter().map(|v| (v - mean_tp).powi(2)).sum::<f64>() / n as f64;
        if var_tp.sqrt() <= 1e-12 * mean_tp.abs().max(1.0) {
            // A candidate that projects prices to a constant explains
            // nothing; skip it rather than fail the whole grid.
            continue;
        }
        let mut tp_std = tp.clone();
        let scale_tp = {
            let mut m = DMatrix::from_column_slice(n, 1, tp_std.as_slice());
            let s = super::design::standardize(&mut m)?;
            tp_std.copy_from(&m.column(0));
            s.scales[0]
        };
        let mut exog_cols: Vec<DVector<f64>> = vec![DVector::from_element(n, 1.0)];
        let mut exog_names: Vec<String> = vec!["(intercept)".into()];
        let mut push_std = |col: &DVector<f64>, name: String| {
            let mut col = col.clone();
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            if var.sqrt() <= 1e-12 * mean.abs().max(1.0) {
                return;
            }
            for v in col.iter_mut() {
                *v = (*v - mean) / var.sqrt();
            }
            exog_cols.push(col);
            exog_names.push(name);
        };
        push_std(&tone, "proj_one".into());
        for c in 0..tc.ncols() {
            push_std(&tc.column(c).into_owned(), format!("proj_pc_{}", c + 1));
        }
        let mut exog = DMatrix::zeros(n, exog_cols.len());
        for (c, col) in exog_cols.iter().enumerate() {
            exog.set_column(c, col);
        }
        let endog = DMatrix::from_column_slice(n, 1, tp_std.as_slice());
        let fit = iv_regression(
            &base.y,
            &exog,
            &exog_names,
            &endog,
            &["proj_price".to_string()],
            &base.instruments,
            &base.instrument_names,
            &base.clusters,
        )?;
        if best.as_ref().map_or(true, |(rss, _)| fit.rss < *rss) {
            let k1 = exog_names.len();
            let phi_bar_std = fit.coefficients[k1];
            let mut result = FitResult {
                names: fit.names.clone(),
                coefficients: fit.coefficients.iter().copied().collect(),
                standard_errors: fit.standard_errors.iter().copied().collect(),
                phi_bar: phi_bar_std / scale_tp * base.sd_q,
                phi_bar_std,
                eta: Vec::new(),
                alpha: alpha.clone(),
                adjusted_r_squared: fit.adjusted_r_squared,
                wald_f: fit.wald_f,
                wald_df: fit.wald_df,
                dwh_chi2: fit.dwh_chi2,
                dwh_df: fit.dwh_df,
                dwh_p: fit.dwh_p,
                rss: fit.rss,
                n_obs: fit.n_obs,
                n_regressors: fit.names.len(),
                n_clusters: fit.n_clusters,
                n_components_kept: base.n_components_kept,
                variance_explained: base.variance_explained,
                price_slope_of_row: vec![phi_bar_std / scale_tp * base.sd_q; n],
                mean_q: base.mean_q,
                sd_q: base.sd_q,
                mean_p: base.mean_p,
                sd_p: base.sd_p,
                correction: None,
                chosen_alpha: Some(alpha.clone()),
            };
            result.chosen_alpha = Some(alpha.clone());
            best = Some((fit.rss, result));
        }
    }
    best.map(|(_, fit)| fit).ok_or_else(|| {
        Error::Numerical("every grid candidate produced a degenerate transformed design".into())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::fit::tsls_fit;
    use crate::estimate::panel::{build_panel, PanelFilters, PanelKey, Quarter};
    use crate::estimate::synthetic::{synthetic_transactions, SyntheticConfig};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn loose() -> PanelFilters {
        PanelFilters {
            min_transactions: 1,
            ..PanelFilters::default()
        }
    }

    fn corner_free_panel(seed: u64) -> MarketPanel {
        let cfg = SyntheticConfig {
            n_goods: 5,
            n_stores: 3,
            n_quarters: 8,
            transactions_per_market: 6,
            seed,
            ..SyntheticConfig::default()
        };
        let (rows, _) = synthetic_transactions(&cfg).unwrap();
        build_panel(&rows, &loose()).unwrap()
    }

    #[test]
    fn slack_cone_reproduces_the_plain_fit_exactly() {
        // Singleton baskets for every good: fitted demand is positive, the
        // projection is exact, r = 0, and the loop stops at round one with
        // the naive coefficients.
        let panel = corner_free_panel(1);
        let a = ConsiderationSet::identity(panel.goods.len());
        let plain = tsls_fit(&panel, None, &DesignSettings::default()).unwrap();
        let cf =
            nn_control_function_fit(&panel, None, &a, &DesignSettings::default(), 10).unwrap();
        let info = cf.correction.as_ref().unwrap();
        assert!(info.converged);
        assert_eq!(info.rounds.len(), 1);
        assert!(info.residual.iter().all(|&v| v == 0.0));
        for (a, b) in cf.coefficients.iter().zip(&plain.coefficients) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn correction_satisfies_the_projection_optimality_conditions() {
        let cfg = SyntheticConfig {
            corner_heavy: true,
            n_stores: 3,
            n_quarters: 8,
            transactions_per_market: 6,
            seed: 7,
            ..SyntheticConfig::default()
        };
        let (rows, truth) = synthetic_transactions(&cfg).unwrap();
        let panel = build_panel(&rows, &loose()).unwrap();
        let a = remap_baskets(&truth.consideration_set, &panel);
        let settings = DesignSettings::default();
        // The wedge feeds back into the fit, so the fixed point arrives at a
        // geometric rate rather than in a handful of rounds.
        let cf = nn_control_function_fit(&panel, None, &a, &settings, 300).unwrap();
        let info = cf.correction.as_ref().unwrap();
        assert!(info.converged, "rounds: {:?}", info.rounds);
        assert!(info.residual.iter().any(|&v| v.abs() > 1e-8));

        // Recompute the wedge from the final fit: the fixed point moves by
        // less than the loop tolerance, and the basket gradient vanishes on
        // the active directions (KKT for the weighted projection).
        let design = assemble_design(&panel, None, &settings).unwrap();
        let r_vec = DVector::from_vec(info.residual.clone());
        let y = &design.y + &r_vec / design.sd_q;
        let fit = run_iv(&design, &y).unwrap();
        let q_dag = fit.fitted.map(|v| v * design.sd_q + design.mean_q);
        let blocks = market_blocks(&panel, &a);
        let m_hat = DMatrix::identity(a.n_goods(), a.n_goods());
        let r_again = cone_wedge(&blocks, &q_dag, &m_hat).unwrap();
        assert!((&r_again - &r_vec).norm() <= 1e-6 * r_again.norm().max(1e-12));
        for block in &blocks {
            if block.baskets.ncols() == 0 {
                continue;
            }
            let r_m = DVector::from_iterator(
                block.rows.len(),
                block.rows.iter().map(|&row| r_again[row]),
            );
            let grad = block.baskets.transpose() * &r_m;
            let scale = q_dag.amax().max(1.0);
            // Inactive baskets may push outward (negative gradient), active
            // ones must be orthogonal to the wedge.
            for v in grad.iter() {
                assert!(*v <= 1e-6 * scale, "gradient {v}");
            }
        }
    }

    /// The generator labels goods `good_00`..; the panel sorts them the same
    /// way, so the basket matrix carries over by index. This helper guards
    /// that assumption.
    fn remap_baskets(a: &ConsiderationSet, panel: &MarketPanel) -> ConsiderationSet {
        assert_eq!(a.n_goods(), panel.goods.len());
        for (i, g) in panel.goods.iter().enumerate() {
            assert_eq!(*g, format!("good_{i:02}"));
        }
        a.clone()
    }

    #[test]
    fn exhausted_rounds_carry_a_warning() {
        let cfg = SyntheticConfig {
            corner_heavy: true,
            n_stores: 3,
            n_quarters: 8,
            transactions_per_market: 6,
            seed: 7,
            ..SyntheticConfig::default()
        };
        let (rows, truth) = synthetic_transactions(&cfg).unwrap();
        let panel = build_panel(&rows, &loose()).unwrap();
        let a = remap_baskets(&truth.consideration_set, &panel);
        let cf =
            nn_control_function_fit(&panel, None, &a, &DesignSettings::default(), 1).unwrap();
        let info = cf.correction.as_ref().unwrap();
        assert!(!info.converged);
        assert!(info.warning.as_ref().unwrap().contains("1 rounds"));
        assert_eq!(info.rounds.len(), 1);
    }

    #[test]
    fn empty_grid_is_a_config_error() {
        let panel = corner_free_panel(2);
        let a = ConsiderationSet::identity(panel.goods.len());
        assert!(matches!(
            lf_grid_fit(&panel, None, &a, &DesignSettings::default(), &[]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn identity_projector_matches_a_hand_built_fit() {
        // Full-row-rank baskets collapse the projector to the recovered
        // inverse itself; with zero series weights that is the identity, so
        // the grid fit must equal a plain instrumented fit on the same
        // blocks.
        let panel = corner_free_panel(3);
        let a = ConsiderationSet::identity(panel.goods.len());
        let settings = DesignSettings::default();
        let grid = vec![vec![]];
        let fit = lf_grid_fit(&panel, None, &a, &settings, &grid).unwrap();

        let base = assemble_design(&panel, None, &settings).unwrap();
        let n = base.y.len();
        let mut exog = DMatrix::zeros(n, 1 + base.component_scores.ncols());
        let mut names = vec!["(intercept)".to_string()];
        for r in 0..n {
            exog[(r, 0)] = 1.0;
        }
        for c in 0..base.component_scores.ncols() {
            for r in 0..n {
                exog[(r, c + 1)] = base.component_scores[(r, c)];
            }
            names.push(format!("proj_pc_{}", c + 1));
        }
        let mut p = panel.price.clone();
        super::super::design::standardize_vector(&mut p).unwrap();
        let endog = DMatrix::from_column_slice(n, 1, p.as_slice());
        let hand = iv_regression(
            &base.y,
            &exog,
            &names,
            &endog,
            &["proj_price".to_string()],
            &base.instruments,
            &base.instrument_names,
            &base.clusters,
        )
        .unwrap();
        for (a, b) in fit.coefficients.iter().zip(hand.coefficients.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-8);
        }
        assert_eq!(fit.chosen_alpha.as_deref(), Some(&[][..]));
    }

    /// Hand-built panel with spatially propagated demand for the grid tests:
    /// q = B A (A'BA)^+ A'B (delta + phi p) per market with B = I + 0.3 W.
    fn spatial_panel() -> (MarketPanel, DMatrix<f64>, ConsiderationSet) {
        let k = 4;
        let n_stores = 2;
        let n_quarters = 12;
        let mut w = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    w[(i, j)] = if (i + j) % 2 == 0 { 0.4 } else { 0.15 };
                }
            }
        }
        let mut a_mat = DMatrix::zeros(k, 3);
        a_mat[(0, 0)] = 1.0;
        a_mat[(1, 1)] = 1.0;
        a_mat[(2, 2)] = 1.0;
        a_mat[(3, 2)] = 2.0;
        let a = ConsiderationSet::from_matrix(a_mat.clone()).unwrap();
        let true_alpha = [0.3];
        let b = recovered_inverse(&true_alpha, Some(&w), k).unwrap();
        let gram = a_mat.transpose() * &b * &a_mat;
        let pinv = pseudoinverse(&gram, 1e-12).unwrap().pinv;
        let sigma = &b * &a_mat * pinv * a_mat.transpose() * &b;

        let delta = DVector::from_column_slice(&[6.0, 5.5, 5.0, 4.5]);
        let phi = -0.5;
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let n = k * n_stores * n_quarters;
        let mut rows = Vec::new();
        let mut quantity = Vec::new();
        let mut price = Vec::new();
        let mut market_of_row = Vec::new();
        let mut covariates = DMatrix::zeros(n, 2);
        let mut instruments = DMatrix::zeros(n, 1);
        let mut at = 0;
        for s in 0..n_stores {
            for q in 0..n_quarters {
                let mut p_m = DVector::zeros(k);
                let mut z_m = DVector::zeros(k);
                for g in 0..k {
                    let z: f64 = rng.gen_range(-1.0..1.0);
                    z_m[g] = z;
                    p_m[g] = 2.0 + 0.9 * z + 0.1 * rng.gen_range(-1.0..1.0);
                }
                let q_m = &sigma * (&delta + phi * &p_m);
                for g in 0..k {
                    rows.push(PanelKey {
                        good: g,
                        store: s,
                        quarter: q,
                    });
                    quantity.push(q_m[g] + 0.01 * rng.gen_range(-1.0..1.0));
                    price.push(p_m[g]);
                    market_of_row.push(s * n_quarters + q);
                    covariates[(at, 0)] = (g as f64) / k as f64 + 0.05 * rng.gen_range(-1.0..1.0);
                    covariates[(at, 1)] = rng.gen_range(-1.0..1.0);
                    instruments[(at, 0)] = z_m[g];
                    at += 1;
                }
            }
        }
        let panel = MarketPanel {
            goods: (0..k).map(|g| format!("good_{g:02}")).collect(),
            stores: (0..n_stores).map(|s| format!("store_{s}")).collect(),
            quarters: (0..n_quarters)
                .map(|q| Quarter {
                    year: 2020 + (q / 4) as i32,
                    q: (q % 4 + 1) as u8,
                })
                .collect(),
            rows,
            quantity: DVector::from_vec(quantity),
            price: DVector::from_vec(price),
            covariates,
            covariate_names: vec!["quality".into(), "shelf".into()],
            instruments,
            instrument_names: vec!["z_comp_price".into()],
            market_of_row,
            market_transactions: vec![1.0; n_stores * n_quarters],
            category_l1_of_good: vec![0; k],
            category_l1_names: vec!["all".into()],
            instrument_fallbacks: 0,
            attrition: Default::default(),
        };
        (panel, w, a)
    }

    #[test]
    fn grid_search_selects_the_generating_weight() {
        let (panel, w, a) = spatial_panel();
        let grid: Vec<Vec<f64>> = vec![vec![0.0], vec![0.15], vec![0.3], vec![0.45]];
        let settings = DesignSettings {
            j_max: 1,
            ..DesignSettings::default()
        };
        let fit = lf_grid_fit(&panel, Some(&w), &a, &settings, &grid).unwrap();
        let chosen = fit.chosen_alpha.as_ref().unwrap()[0];
        assert!(
            (chosen - 0.3).abs() <= 0.15 + 1e-12,
            "selected {chosen}, expected the generating 0.3 within one grid step"
        );
    }

    #[test]
    fn single_point_grid_returns_that_point() {
        let (panel, w, a) = spatial_panel();
        let grid = vec![vec![0.25]];
        let fit = lf_grid_fit(
            &panel,
            Some(&w),
            &a,
            &DesignSettings::default(),
            &grid,
        )
        .unwrap();
        assert_eq!(fit.chosen_alpha, Some(vec![0.25]));
        assert_eq!(fit.alpha, vec![0.25]);
    }

    #[test]
    fn full_rank_baskets_collapse_to_the_series_path() {
        // With singleton baskets for every good the projector equals
        // I + alpha W itself, so transforming by it must match transforming
        // by the plain series expansion.
        let (panel, w, _) = spatial_panel();
        let a = ConsiderationSet::identity(panel.goods.len());
        let settings = DesignSettings {
            j_max: 1,
            ..DesignSettings::default()
        };
        let alpha = vec![0.3];
        let fit = lf_grid_fit(&panel, Some(&w), &a, &settings, &[alpha.clone()]).unwrap();

        // Plain path: apply B = I + 0.3 W per market directly.
        let base = assemble_design(&panel, None, &settings).unwrap();
        let n = base.y.len();
        let b = recovered_inverse(&alpha, Some(&w), panel.goods.len()).unwrap();
        let blocks = market_blocks(&panel, &a);
        let mut tp = DVector::zeros(n);
        let mut tc = DMatrix::zeros(n, base.component_scores.ncols());
        for block in &blocks {
            let b_sub = b
                .select_rows(block.goods.iter())
                .select_columns(block.goods.iter());
            let p_m = DVector::from_iterator(
                block.rows.len(),
                block.rows.iter().map(|&r| panel.price[r]),
            );
            let tpm = &b_sub * p_m;
            for (i, &row) in block.rows.iter().enumerate() {
                tp[row] = tpm[i];
            }
            for c in 0..tc.ncols() {
                let x_m = DVector::from_iterator(
                    block.rows.len(),
                    block.rows.iter().map(|&r| base.component_scores[(r, c)]),
                );
                let txm = &b_sub * x_m;
                for (i, &row) in block.rows.iter().enumerate() {
                    tc[(row, c)] = txm[i];
                }
            }
        }
        let mut tp_std = tp;
        super::super::design::standardize_vector(&mut tp_std).unwrap();
        let mut exog_cols = vec![DVector::from_element(n, 1.0)];
        let mut names = vec!["(intercept)".to_string()];
        for c in 0..tc.ncols() {
            let mut col: DVector<f64> = tc.column(c).into_owned();
            super::super::design::standardize_vector(&mut col).unwrap();
            exog_cols.push(col);
            names.push(format!("proj_pc_{}", c + 1));
        }
        let mut exog = DMatrix::zeros(n, exog_cols.len());
        for (c, col) in exog_cols.iter().enumerate() {
            exog.set_column(c, col);
        }
        let endog = DMatrix::from_column_slice(n, 1, tp_std.as_slice());
        let hand = iv_regression(
            &base.y,
            &exog,
            &names,
            &endog,
            &["proj_price".to_string()],
            &base.instruments,
            &base.instrument_names,
            &base.clusters,
        )
        .unwrap();
        for (x, y) in fit.coefficients.iter().zip(hand.coefficients.iter()) {
            assert_relative_eq!(x, y, epsilon = 1e-8);
        }
    }
}
