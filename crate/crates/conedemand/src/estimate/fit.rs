//! Panel-level fitting: assembling the instrumented design (standardization,
//! principal components, price interactions, spatial lags) and mapping the
//! fitted coefficients back to interpretable quantities.

use nalgebra::{DMatrix, DVector};

use super::design::{pca_reduce, spatial_lags, standardize, standardize_vector};
use super::panel::MarketPanel;
use super::tsls::{iv_regression, LinearFit};
use crate::{Error, Result};

/// Configuration of the design assembly.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignSettings {
    /// Highest spatial-lag power; 0 disables spatial lags even when a proxy
    /// matrix is supplied.
    pub j_max: usize,
    /// Share of covariate variance the kept principal components must reach.
    pub variance_target: f64,
    /// How many leading components form heterogeneous price coefficients.
    pub n_price_components: usize,
    /// Whether store/quarter fixed effects enter alongside the components.
    pub include_fixed_effects: bool,
}

impl Default for DesignSettings {
    fn default() -> Self {
        Self {
            j_max: 2,
            variance_target: 0.90,
            n_price_components: 10,
            include_fixed_effects: true,
        }
    }
}

/// The fully constructed regression blocks, all columns standardized, with
/// enough bookkeeping to destandardize the interesting coefficients.
#[derive(Debug, Clone)]
pub struct AssembledDesign {
    pub y: DVector<f64>,
    pub exog: DMatrix<f64>,
    pub exog_names: Vec<String>,
    pub endog: DMatrix<f64>,
    pub endog_names: Vec<String>,
    pub instruments: DMatrix<f64>,
    pub instrument_names: Vec<String>,
    pub clusters: Vec<usize>,
    pub mean_q: f64,
    pub sd_q: f64,
    pub mean_p: f64,
    pub sd_p: f64,
    /// Standardization scale of each endogenous column.
    pub endog_scales: Vec<f64>,
    /// Position of the main price column within the endogenous block.
    pub price_col: usize,
    /// Positions of the price-component interactions within the endogenous
    /// block, aligned with `component_scores` columns in `interaction_of`.
    pub interaction_cols: Vec<usize>,
    /// Component index behind each interaction column.
    pub interaction_of: Vec<usize>,
    /// Positions of the spatial price lags, ordered j = 1..=j_max; absent
    /// lags (dropped as constant) are None.
    pub lag_price_cols: Vec<Option<usize>>,
    /// Standardized principal-component scores (n x kept).
    pub component_scores: DMatrix<f64>,
    pub n_components_kept: usize,
    pub variance_explained: f64,
    /// Columns dropped for having no variance, by name.
    pub dropped_columns: Vec<String>,
}

/// Result of a panel-level fit, serializable as the toolkit's JSON report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    /// Own-price slope in raw units (quantity per currency unit).
    pub phi_bar: f64,
    /// Own-price coefficient in standardized units.
    pub phi_bar_std: f64,
    /// Heterogeneous price terms: component interactions, standardized.
    pub eta: Vec<(String, f64)>,
    /// Series weights on the spatial lags, in raw units relative to the
    /// own-price coefficient; entry j-1 corresponds to the j-th lag.
    pub alpha: Vec<f64>,
    pub adjusted_r_squared: f64,
    pub wald_f: f64,
    pub wald_df: (usize, usize),
    pub dwh_chi2: Option<f64>,
    pub dwh_df: usize,
    pub dwh_p: Option<f64>,
    pub rss: f64,
    pub n_obs: usize,
    pub n_regressors: usize,
    pub n_clusters: usize,
    pub n_components_kept: usize,
    pub variance_explained: f64,
    /// Raw-unit own-price slope per panel row (the heterogeneous
    /// coefficient evaluated at that row's components).
    pub price_slope_of_row: Vec<f64>,
    pub mean_q: f64,
    pub sd_q: f64,
    pub mean_p: f64,
    pub sd_p: f64,
    /// Present on control-function fits.
    pub correction: Option<CorrectionInfo>,
    /// Present on grid fits: the selected series weights.
    pub chosen_alpha: Option<Vec<f64>>,
}

/// Convergence record of the non-negativity control-function loop.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CorrectionInfo {
    pub rounds: Vec<RoundInfo>,
    pub converged: bool,
    pub warning: Option<String>,
    /// Final correction in raw quantity units, one entry per panel row.
    pub residual: Vec<f64>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct RoundInfo {
    pub round: usize,
    pub correction_norm: f64,
    pub relative_change: f64,
}

/// Growing orthonormal basis used to drop design columns that are exact (to
/// rounding) linear combinations of columns admitted before them. Catching
/// these during assembly names the redundant column; leaving them in would
/// surface later as an opaque factorization failure.
#[derive(Clone)]
struct RankGuard {
    basis: Vec<DVector<f64>>,
}

impl RankGuard {
    fn new() -> Self {
        Self { basis: Vec::new() }
    }

    /// Admits `col` unless it lies in the span of the admitted columns;
    /// two Gram-Schmidt sweeps keep the residual test stable.
    fn admit(&mut self, col: &DVector<f64>) -> bool {
        let scale = col.norm();
        if scale <= 1e-12 {
            return false;
        }
        let mut v = col.clone();
        for _ in 0..2 {
            for b in &self.basis {
                let proj = b.dot(&v);
                v.axpy(-proj, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm <= 1e-10 * scale {
            return false;
        }
        self.basis.push(v / norm);
        true
    }
}

/// Standardizes the columns of `m`, dropping constants; returns the kept
/// matrix, the kept names, the kept columns' scales, and the dropped names.
fn standardize_dropping_constants(
    m: &DMatrix<f64>,
    names: &[String],
) -> Result<(DMatrix<f64>, Vec<String>, Vec<f64>, Vec<String>)> {
    let n = m.nrows();
    let mut keep = Vec::new();
    let mut dropped = Vec::new();
    for c in 0..m.ncols() {
        let mean = m.column(c).sum() / n as f64;
        let var = m.column(c).iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        if var.sqrt() <= 1e-12 * mean.abs().max(1.0) {
            dropped.push(names[c].clone());
        } else {
            keep.push(c);
        }
    }
    let mut kept = m.select_columns(keep.iter());
    let std = standardize(&mut kept)?;
    let kept_names = keep.iter().map(|&c| names[c].clone()).collect();
    Ok((kept, kept_names, std.scales, dropped))
}

/// Builds the full standardized design from a panel: principal components of
/// the non-fixed-effect covariates, optional fixed effects, the price block
/// with component interactions, spatial lags of components, price, and
/// instruments, and the instrument block.
pub fn assemble_design(
    panel: &MarketPanel,
    w: Option<&DMatrix<f64>>,
    settings: &DesignSettings,
) -> Result<AssembledDesign> {
    if let Some(w) = w {
        if w.nrows() != panel.goods.len() {
            return Err(Error::InvalidInput(format!(
                "proxy matrix is {}x{} but the panel has {} goods",
                w.nrows(),
                w.ncols(),
                panel.goods.len()
            )));
        }
    }
    let n = panel.n_rows();
    let j_max = if w.is_some() { settings.j_max } else { 0 };
    let good_of_row = panel.good_of_row();
    let mut dropped_columns = Vec::new();

    let mut y = panel.quantity.clone();
    let (mean_q, sd_q) = standardize_vector(&mut y)?;
    let mut p_std = panel.price.clone();
    let (mean_p, sd_p) = standardize_vector(&mut p_std)?;
    if sd_p == 1.0 && p_std.amax() <= 1e-12 {
        return Err(Error::Data(
            "prices show no variation; the price coefficient is unidentified".into(),
        ));
    }

    // Covariates split into the fixed-effect block and the base block that
    // feeds the principal-component reduction.
    let is_fe =
        |name: &String| name.starts_with("store=") || name.starts_with("quarter=");
    let fe_cols: Vec<usize> = (0..panel.covariate_names.len())
        .filter(|&c| is_fe(&panel.covariate_names[c]))
        .collect();
    let base_cols: Vec<usize> = (0..panel.covariate_names.len())
        .filter(|&c| !is_fe(&panel.covariate_names[c]))
        .collect();
    let base = panel.covariates.select_columns(base_cols.iter());
    let base_names: Vec<String> = base_cols
        .iter()
        .map(|&c| panel.covariate_names[c].clone())
        .collect();
    let (base_std, _, _, mut base_dropped) =
        standardize_dropping_constants(&base, &base_names)?;
    dropped_columns.append(&mut base_dropped);

    let pca = pca_reduce(&base_std, settings.variance_target, settings.n_price_components)?;
    let mut component_scores = pca.scores.clone();
    let score_names: Vec<String> = (1..=pca.n_kept).map(|i| format!("pc_{i}")).collect();
    let comp_std = standardize(&mut component_scores)?;
    let _ = comp_std;

    // Exogenous block: intercept, fixed effects, components, component lags.
    // A rank guard admits columns in that order and records the casualties;
    // its basis then seeds the endogenous and instrument admissions, since
    // anything in the exogenous span is useless in either role.
    fn admit_block(
        guard: &mut RankGuard,
        block: &DMatrix<f64>,
        names: &[String],
        out_cols: &mut Vec<DVector<f64>>,
        out_names: &mut Vec<String>,
        dropped: &mut Vec<String>,
    ) {
        for c in 0..block.ncols() {
            let col = block.column(c).into_owned();
            if guard.admit(&col) {
                out_cols.push(col);
                out_names.push(names[c].clone());
            } else {
                dropped.push(names[c].clone());
            }
        }
    }

    let mut guard = RankGuard::new();
    let mut exog_cols: Vec<DVector<f64>> = Vec::new();
    let mut exog_names: Vec<String> = Vec::new();
    let one = DVector::from_element(n, 1.0);
    guard.admit(&one);
    exog_cols.push(one);
    exog_names.push("(intercept)".into());
    if settings.include_fixed_effects && !fe_cols.is_empty() {
        let fe = panel.covariates.select_columns(fe_cols.iter());
        let fe_names: Vec<String> = fe_cols
            .iter()
            .map(|&c| format!("fe:{}", panel.covariate_names[c]))
            .collect();
        let (fe_std, kept_names, _, mut fe_dropped) =
            standardize_dropping_constants(&fe, &fe_names)?;
        dropped_columns.append(&mut fe_dropped);
        admit_block(
            &mut guard,
            &fe_std,
            &kept_names,
            &mut exog_cols,
            &mut exog_names,
            &mut dropped_columns,
        );
    }
    admit_block(
        &mut guard,
        &component_scores,
        &score_names,
        &mut exog_cols,
        &mut exog_names,
        &mut dropped_columns,
    );
    if j_max > 0 {
        let w = w.expect("j_max > 0 only with a proxy matrix");
        let lags = spatial_lags(w, &good_of_row, &panel.market_of_row, &component_scores, j_max)?;
        let lag_names: Vec<String> = (1..=j_max)
            .flat_map(|j| score_names.iter().map(move |s| format!("lag{j}_{s}")))
            .collect();
        let (lag_std, kept_names, _, mut lag_dropped) =
            standardize_dropping_constants(&lags, &lag_names)?;
        dropped_columns.append(&mut lag_dropped);
        admit_block(
            &mut guard,
            &lag_std,
            &kept_names,
            &mut exog_cols,
            &mut exog_names,
            &mut dropped_columns,
        );
    }
    let mut exog = DMatrix::zeros(n, exog_cols.len());
    for (c, col) in exog_cols.iter().enumerate() {
        exog.set_column(c, col);
    }

    // Endogenous block: price, price-component interactions, price lags.
    // Admission continues from the exogenous basis: a column written here as
    // an exact combination of exogenous columns (or of earlier endogenous
    // ones) would poison the second-stage normal equations.
    let mut guard_endog = guard.clone();
    if !guard_endog.admit(&p_std) {
        return Err(Error::Data(
            "prices are collinear with the exogenous block; the price coefficient is unidentified"
                .into(),
        ));
    }
    let mut endog_cols: Vec<DVector<f64>> = vec![p_std.clone()];
    let mut endog_names: Vec<String> = vec!["price".into()];
    let mut endog_scales: Vec<f64> = vec![sd_p];
    let price_col = 0;
    let mut interaction_cols = Vec::new();
    let mut interaction_of = Vec::new();
    for &c in &pca.top_components {
        let mut col = DVector::zeros(n);
        for r in 0..n {
            col[r] = p_std[r] * component_scores[(r, c)];
        }
        let (_, scale) = standardize_vector(&mut col)?;
        if !guard_endog.admit(&col) {
            dropped_columns.push(format!("price_x_pc_{}", c + 1));
            continue;
        }
        interaction_cols.push(endog_cols.len());
        interaction_of.push(c);
        endog_cols.push(col);
        endog_names.push(format!("price_x_pc_{}", c + 1));
        endog_scales.push(scale);
    }
    let mut lag_price_cols: Vec<Option<usize>> = Vec::new();
    if j_max > 0 {
        let w = w.expect("j_max > 0 only with a proxy matrix");
        let p_raw = DMatrix::from_column_slice(n, 1, panel.price.as_slice());
        let lags = spatial_lags(w, &good_of_row, &panel.market_of_row, &p_raw, j_max)?;
        for j in 1..=j_max {
            let mut col: DVector<f64> = lags.column(j - 1).into_owned();
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            if var.sqrt() <= 1e-12 * mean.abs().max(1.0) {
                dropped_columns.push(format!("lag{j}_price"));
                lag_price_cols.push(None);
                continue;
            }
            let (_, scale) = standardize_vector(&mut col)?;
            if !guard_endog.admit(&col) {
                dropped_columns.push(format!("lag{j}_price"));
                lag_price_cols.push(None);
                continue;
            }
            lag_price_cols.push(Some(endog_cols.len()));
            endog_cols.push(col);
            endog_names.push(format!("lag{j}_price"));
            endog_scales.push(scale);
        }
    }
    let mut endog = DMatrix::zeros(n, endog_cols.len());
    for (c, col) in endog_cols.iter().enumerate() {
        endog.set_column(c, col);
    }

    // Instrument block: the panel instruments, their spatial lags, and the
    // primary instrument's component interactions (mirroring the price
    // interactions they identify). Admission restarts from the exogenous
    // basis alone, so an instrument may coincide with an endogenous column
    // (that is ordinary least squares) but not with the exogenous block or
    // an earlier instrument.
    let mut guard_inst = guard.clone();
    let mut inst_cols: Vec<DVector<f64>> = Vec::new();
    let mut instrument_names: Vec<String> = Vec::new();
    let (z_std, z_names, _, mut z_dropped) =
        standardize_dropping_constants(&panel.instruments, &panel.instrument_names)?;
    dropped_columns.append(&mut z_dropped);
    admit_block(
        &mut guard_inst,
        &z_std,
        &z_names,
        &mut inst_cols,
        &mut instrument_names,
        &mut dropped_columns,
    );
    if j_max > 0 {
        let w = w.expect("j_max > 0 only with a proxy matrix");
        let lags = spatial_lags(
            w,
            &good_of_row,
            &panel.market_of_row,
            &panel.instruments,
            j_max,
        )?;
        let lag_names: Vec<String> = (1..=j_max)
            .flat_map(|j| {
                panel
                    .instrument_names
                    .iter()
                    .map(move |z| format!("lag{j}_{z}"))
            })
            .collect();
        let (lag_std, kept, _, mut dropped) = standardize_dropping_constants(&lags, &lag_names)?;
        dropped_columns.append(&mut dropped);
        admit_block(
            &mut guard_inst,
            &lag_std,
            &kept,
            &mut inst_cols,
            &mut instrument_names,
            &mut dropped_columns,
        );
    }
    if !interaction_cols.is_empty() && !z_names.is_empty() {
        let mut inter = DMatrix::zeros(n, interaction_of.len());
        for (k, &c) in interaction_of.iter().enumerate() {
            for r in 0..n {
                inter[(r, k)] = z_std[(r, 0)] * component_scores[(r, c)];
            }
        }
        let inter_names: Vec<String> = interaction_of
            .iter()
            .map(|&c| format!("{}_x_pc_{}", z_names[0], c + 1))
            .collect();
        let (inter_std, kept, _, mut dropped) =
            standardize_dropping_constants(&inter, &inter_names)?;
        dropped_columns.append(&mut dropped);
        admit_block(
            &mut guard_inst,
            &inter_std,
            &kept,
            &mut inst_cols,
            &mut instrument_names,
            &mut dropped_columns,
        );
    }
    let mut instruments = DMatrix::zeros(n, inst_cols.len());
    for (c, col) in inst_cols.iter().enumerate() {
        instruments.set_column(c, col);
    }

    Ok(AssembledDesign {
        y,
        exog,
        exog_names,
        endog,
        endog_names,
        instruments,
        instrument_names,
        clusters: panel.market_of_row.clone(),
        mean_q,
        sd_q,
        mean_p,
        sd_p,
        endog_scales,
        price_col,
        interaction_cols,
        interaction_of,
        lag_price_cols,
        component_scores,
        n_components_kept: pca.n_kept,
        variance_explained: pca.variance_explained,
        dropped_columns,
    })
}

/// Runs the instrumented regression on an assembled design with an
/// alternative dependent variable (used by the control-function loop).
pub(crate) fn run_iv(design: &AssembledDesign, y: &DVector<f64>) -> Result<LinearFit> {
    iv_regression(
        y,
        &design.exog,
        &design.exog_names,
        &design.endog,
        &design.endog_names,
        &design.instruments,
        &design.instrument_names,
        &design.clusters,
    )
}

/// Series weights implied by fitted coefficients: each raw-unit lag
/// coefficient relative to the raw-unit own-price coefficient.
pub(crate) fn series_weights(b: &DVector<f64>, design: &AssembledDesign) -> Vec<f64> {
    let k1 = design.exog_names.len();
    let phi_raw_unit = b[k1 + design.price_col] / design.endog_scales[design.price_col];
    design
        .lag_price_cols
        .iter()
        .map(|slot| match slot {
            Some(c) => (b[k1 + c] / design.endog_scales[*c]) / phi_raw_unit,
            None => 0.0,
        })
        .collect()
}

/// Maps a low-level fit on an assembled design into a [`FitResult`].
pub(crate) fn summarize_fit(fit: &LinearFit, design: &AssembledDesign) -> FitResult {
    let k1 = design.exog_names.len();
    let b = &fit.coefficients;
    let phi_bar_std = b[k1 + design.price_col];
    let phi_bar = phi_bar_std / design.endog_scales[design.price_col] * design.sd_q;

    let eta: Vec<(String, f64)> = design
        .interaction_cols
        .iter()
        .map(|&c| (design.endog_names[c].clone(), b[k1 + c]))
        .collect();

    let alpha = series_weights(b, design);

    // Per-row own-price slope: the main effect plus the component
    // interactions evaluated at that row.
    let n = design.y.len();
    let mut price_slope_of_row = Vec::with_capacity(n);
    for r in 0..n {
        let mut slope_std = phi_bar_std;
        for (&col, &comp) in design.interaction_cols.iter().zip(&design.interaction_of) {
            slope_std += b[k1 + col] / design.endog_scales[col] * design.sd_p
                * design.component_scores[(r, comp)];
        }
        price_slope_of_row.push(slope_std * design.sd_q / design.sd_p);
    }

    FitResult {
        names: fit.names.clone(),
        coefficients: fit.coefficients.iter().copied().collect(),
        standard_errors: fit.standard_errors.iter().copied().collect(),
        phi_bar,
        phi_bar_std,
        eta,
        alpha,
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
        n_components_kept: design.n_components_kept,
        variance_explained: design.variance_explained,
        price_slope_of_row,
        mean_q: design.mean_q,
        sd_q: design.sd_q,
        mean_p: design.mean_p,
        sd_p: design.sd_p,
        correction: None,
        chosen_alpha: None,
    }
}

/// Two-stage least squares on the assembled panel design: prices (and their
/// interactions and spatial lags) instrumented by the competitor-price block,
/// inference clustered at the store-quarter level.
pub fn tsls_fit(
    panel: &MarketPanel,
    w: Option<&DMatrix<f64>>,
    settings: &DesignSettings,
) -> Result<FitResult> {
    let design = assemble_design(panel, w, settings)?;
    let fit = run_iv(&design, &design.y)?;
    Ok(summarize_fit(&fit, &design))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::synthetic::{synthetic_transactions, SyntheticConfig};
    use crate::estimate::panel::{build_panel, PanelFilters};
    use approx::assert_relative_eq;

    fn small_panel(seed: u64) -> MarketPanel {
        let cfg = SyntheticConfig {
            n_goods: 5,
            n_stores: 3,
            n_quarters: 8,
            transactions_per_market: 6,
            seed,
            ..SyntheticConfig::default()
        };
        let (rows, _) = synthetic_transactions(&cfg).unwrap();
        build_panel(
            &rows,
            &PanelFilters {
                min_transactions: 1,
                ..PanelFilters::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn assembled_design_is_standardized() {
        let panel = small_panel(1);
        let design = assemble_design(&panel, None, &DesignSettings::default()).unwrap();
        let n = design.y.len() as f64;
        let exog_tail = design.exog.columns(1, design.exog.ncols() - 1).into_owned();
        for block in [&exog_tail, &design.endog, &design.instruments] {
            for c in 0..block.ncols() {
                let mean = block.column(c).sum() / n;
                let var = block.column(c).iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                assert!(mean.abs() <= 1e-10, "column mean {mean}");
                assert!((var - 1.0).abs() <= 1e-8, "column variance {var}");
            }
        }
    }

    #[test]
    fn recovered_price_slope_is_in_raw_units() {
        let panel = small_panel(2);
        let fit = tsls_fit(&panel, None, &DesignSettings::default()).unwrap();
        // The generator uses phi = -0.4 with mild noise; the corner-free
        // fit should land in a generous neighborhood.
        assert!(fit.phi_bar < -0.1 && fit.phi_bar > -0.9, "phi {}", fit.phi_bar);
        assert_relative_eq!(
            fit.phi_bar,
            fit.phi_bar_std * fit.sd_q / fit.sd_p,
            max_relative = 1e-12
        );
        assert_eq!(fit.price_slope_of_row.len(), panel.n_rows());
        assert_eq!(fit.n_regressors, fit.names.len());
        assert!(fit.n_components_kept >= 1);
        assert!(fit.variance_explained >= 0.90 - 1e-12);
    }

    #[test]
    fn spatial_lag_columns_recover_series_weights() {
        let panel = small_panel(3);
        let k = panel.goods.len();
        // Uneven weights: under a uniform proxy the second lag of any column
        // is an exact combination of the column and its first lag, and the
        // assembly would rightly drop it.
        let mut w = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    w[(i, j)] = if (i + j) % 2 == 0 { 0.4 } else { 0.15 };
                }
            }
        }
        let fit = tsls_fit(&panel, Some(&w), &DesignSettings::default()).unwrap();
        assert_eq!(fit.alpha.len(), 2);
        assert!(fit.names.iter().any(|n| n == "lag1_price"));
        assert!(fit
            .names
            .iter()
            .any(|n| n.starts_with("lag2_pc_") || n == "lag2_price"));
    }

    #[test]
    fn heterogeneous_slopes_combine_main_and_interaction_terms() {
        let panel = small_panel(4);
        let fit = tsls_fit(&panel, None, &DesignSettings::default()).unwrap();
        // Every row slope differs from the pooled slope unless eta is zero,
        // and the mean row slope stays close to the pooled coefficient.
        let mean_slope: f64 =
            fit.price_slope_of_row.iter().sum::<f64>() / fit.price_slope_of_row.len() as f64;
        assert!((mean_slope - fit.phi_bar).abs() <= 0.3 * fit.phi_bar.abs() + 1e-6);
    }

    #[test]
    fn mismatched_proxy_dimension_is_rejected() {
        let panel = small_panel(5);
        let w = DMatrix::zeros(2, 2);
        assert!(matches!(
            tsls_fit(&panel, Some(&w), &DesignSettings::default()),
            Err(Error::InvalidInput(_))
        ));
    }
}
