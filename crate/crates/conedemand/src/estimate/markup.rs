//! Mark-up analytics on a fitted panel: per-market Lerner indices from the
//! implied demand Jacobian, revenue-weighted quarter summaries, fixed-basket
//! Laspeyres and Paasche indices, and percentile-transition matrices.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::control::recovered_inverse;
use super::fit::FitResult;
use super::panel::MarketPanel;
use crate::{Error, Result};

/// Who prices what, for the first-order conditions behind the Lerner solve.
#[derive(Debug, Clone)]
pub enum MarkupOwnership {
    /// Every good priced independently; the index reduces to the inverse
    /// own-price elasticity.
    Singleton,
    /// Explicit pattern: entry (i, j) is 1 when goods i and j share a
    /// price-setter, 0 otherwise.
    Matrix(DMatrix<f64>),
}

/// Intensive-margin adjustment: traffic elasticity with respect to the
/// store's log price index, from the participation regression.
#[derive(Debug, Clone, Copy)]
pub struct ParticipationCorrection {
    pub delta: f64,
}

/// One Lerner observation with its revenue bookkeeping.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MarkupRecord {
    pub good: usize,
    pub store: usize,
    pub quarter: usize,
    pub lerner: f64,
    pub revenue: f64,
    /// Revenue share within the quarter; shares sum to one per quarter.
    pub weight: f64,
    pub category: usize,
}

/// A good dropped from a market's Lerner solve, with the reason.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ExcludedMarkup {
    pub good: usize,
    pub store: usize,
    pub quarter: usize,
    pub reason: String,
}

/// Per-(good, store, quarter) Lerner indices plus quarter-level summaries.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MarkupTable {
    pub records: Vec<MarkupRecord>,
    pub excluded: Vec<ExcludedMarkup>,
    /// Revenue-weighted mean per quarter index, quarters ascending.
    pub quarter_means: Vec<(usize, f64)>,
    /// Percentiles [p10, p25, p50, p75, p90] per quarter.
    pub quarter_bands: Vec<(usize, [f64; 5])>,
    /// Trailing moving average of the quarter means over a four-quarter
    /// window (shorter at the start of the sample).
    pub moving_average: Vec<(usize, f64)>,
}

/// Fixed-basket mark-up indices and the pooled bin-transition matrix.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MarkupIndices {
    /// (quarter, value) weighted by first-quarter revenue shares.
    pub laspeyres: Vec<(usize, f64)>,
    /// (quarter, value) weighted by last-quarter revenue shares.
    pub paasche: Vec<(usize, f64)>,
    /// Key-quarter pairs missing from the Laspeyres basket.
    pub laspeyres_dropped: usize,
    pub paasche_dropped: usize,
    /// Adjacent-quarter transitions between within-category percentile bins,
    /// pooled over the sample; every row sums to one (bins never observed
    /// transit to themselves by convention).
    pub transitions: Vec<Vec<f64>>,
    pub n_bins: usize,
}

/// Lerner indices for one market: solves `(G o E) L = -1` with elasticities
/// `E[a][b] = J[a][b] p_b / q_a`. Returns one entry per good (`None` for
/// excluded goods) plus the exclusion reasons.
pub fn lerner_indices(
    jacobian: &DMatrix<f64>,
    prices: &DVector<f64>,
    quantities: &DVector<f64>,
    ownership: &MarkupOwnership,
) -> Result<(Vec<Option<f64>>, Vec<(usize, String)>)> {
    let k = jacobian.nrows();
    if jacobian.ncols() != k || prices.len() != k || quantities.len() != k {
        return Err(Error::InvalidInput(format!(
            "jacobian is {}x{} but {} prices and {} quantities were supplied",
            k,
            jacobian.ncols(),
            prices.len(),
            quantities.len()
        )));
    }
    if let MarkupOwnership::Matrix(g) = ownership {
        if g.nrows() != k || g.ncols() != k {
            return Err(Error::InvalidInput(format!(
                "ownership matrix is {}x{}, expected {k}x{k}",
                g.nrows(),
                g.ncols()
            )));
        }
    }

    let mut excluded = Vec::new();
    let mut usable = Vec::new();
    for a in 0..k {
        if quantities[a] <= 0.0 {
            excluded.push((a, format!("nonpositive quantity {:.3e}", quantities[a])));
            continue;
        }
        let own = jacobian[(a, a)] * prices[a] / quantities[a];
        if own >= 0.0 {
            excluded.push((a, format!("nonnegative own-price elasticity {own:.3e}")));
            continue;
        }
        usable.push(a);
    }

    let mut out = vec![None; k];
    match ownership {
        MarkupOwnership::Singleton => {
            for &a in &usable {
                let own = jacobian[(a, a)] * prices[a] / quantities[a];
                out[a] = Some(-1.0 / own);
            }
        }
        MarkupOwnership::Matrix(g) => {
            let m = usable.len();
            if m > 0 {
                let mut system = DMatrix::zeros(m, m);
                for (i, &a) in usable.iter().enumerate() {
                    for (j, &b) in usable.iter().enumerate() {
                        let e = jacobian[(a, b)] * prices[b] / quantities[a];
                        system[(i, j)] = g[(a, b)] * e;
                    }
                }
                let rhs = DVector::from_element(m, -1.0);
                let sol = system.lu().solve(&rhs).ok_or_else(|| {
                    Error::Numerical(
                        "the ownership-weighted elasticity system is singular".into(),
                    )
                })?;
                for (i, &a) in usable.iter().enumerate() {
                    out[a] = Some(sol[i]);
                }
            }
        }
    }
    Ok((out, excluded))
}

/// Linear-interpolation quantile of a sorted slice.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Lerner indices for every (good, store, quarter) in the panel.
///
/// The per-market Jacobian is the recovered inverse interaction matrix times
/// the fitted row-level price slopes. With a participation correction the
/// intensive-margin term `q_a * delta * w_b / P` is added, where `w_b` is the
/// good's revenue share in the market and `P` the revenue-weighted price
/// index, so the traffic response to the price index is not attributed to
/// per-customer demand.
pub fn markups(
    fit: &FitResult,
    panel: &MarketPanel,
    w: Option<&DMatrix<f64>>,
    ownership: &MarkupOwnership,
    participation: Option<ParticipationCorrection>,
) -> Result<MarkupTable> {
    if fit.price_slope_of_row.len() != panel.n_rows() {
        return Err(Error::InvalidInput(format!(
            "fit carries {} row slopes but the panel has {} rows",
            fit.price_slope_of_row.len(),
            panel.n_rows()
        )));
    }
    let k = panel.goods.len();
    let b_hat = recovered_inverse(&fit.alpha, w, k)?;
    let good_of_row = panel.good_of_row();

    let mut records = Vec::new();
    let mut excluded = Vec::new();
    for (_, rows) in panel.market_rows() {
        let m = rows.len();
        let goods: Vec<usize> = rows.iter().map(|&r| good_of_row[r]).collect();
        let p_m = DVector::from_iterator(m, rows.iter().map(|&r| panel.price[r]));
        let q_m = DVector::from_iterator(m, rows.iter().map(|&r| panel.quantity[r]));
        let mut jac = DMatrix::zeros(m, m);
        for a in 0..m {
            for b in 0..m {
                jac[(a, b)] = b_hat[(goods[a], goods[b])] * fit.price_slope_of_row[rows[b]];
            }
        }
        if let Some(corr) = participation {
            let revenue: Vec<f64> = (0..m).map(|i| p_m[i] * q_m[i]).collect();
            let total: f64 = revenue.iter().sum();
            if total > 0.0 {
                let index: f64 = (0..m).map(|i| revenue[i] / total * p_m[i]).sum();
                if index > 0.0 {
                    for a in 0..m {
                        for b in 0..m {
                            jac[(a, b)] += q_m[a] * corr.delta * revenue[b] / total / index;
                        }
                    }
                }
            }
        }
        let (lerner, dropped) = lerner_indices(&jac, &p_m, &q_m, ownership)?;
        let key0 = panel.rows[rows[0]];
        for (i, slot) in lerner.iter().enumerate() {
            if let Some(l) = slot {
                records.push(MarkupRecord {
                    good: goods[i],
                    store: key0.store,
                    quarter: key0.quarter,
                    lerner: *l,
                    revenue: p_m[i] * q_m[i],
                    weight: 0.0,
                    category: panel.category_l1_of_good[goods[i]],
                });
            }
        }
        for (i, reason) in dropped {
            excluded.push(ExcludedMarkup {
                good: goods[i],
                store: key0.store,
                quarter: key0.quarter,
                reason,
            });
        }
    }

    // Revenue shares within each quarter, then the summaries.
    let mut quarter_revenue: BTreeMap<usize, f64> = BTreeMap::new();
    for r in &records {
        *quarter_revenue.entry(r.quarter).or_insert(0.0) += r.revenue;
    }
    for r in &mut records {
        let total = quarter_revenue[&r.quarter];
        r.weight = if total > 0.0 { r.revenue / total } else { 0.0 };
    }

    let mut quarter_means = Vec::new();
    let mut quarter_bands = Vec::new();
    for (&quarter, _) in &quarter_revenue {
        let in_q: Vec<&MarkupRecord> = records.iter().filter(|r| r.quarter == quarter).collect();
        let mean: f64 = in_q.iter().map(|r| r.weight * r.lerner).sum();
        quarter_means.push((quarter, mean));
        let mut sorted: Vec<f64> = in_q.iter().map(|r| r.lerner).collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite Lerner values"));
        quarter_bands.push((
            quarter,
            [
                quantile(&sorted, 0.10),
                quantile(&sorted, 0.25),
                quantile(&sorted, 0.50),
                quantile(&sorted, 0.75),
                quantile(&sorted, 0.90),
            ],
        ));
    }
    let moving_average = quarter_means
        .iter()
        .enumerate()
        .map(|(i, &(q, _))| {
            let lo = i.saturating_sub(3);
            let window = &quarter_means[lo..=i];
            (q, window.iter().map(|&(_, v)| v).sum::<f64>() / window.len() as f64)
        })
        .collect();

    Ok(MarkupTable {
        records,
        excluded,
        quarter_means,
        quarter_bands,
        moving_average,
    })
}

/// Equal-mass percentile bin of each value within its group, by rank.
fn assign_bins(values: &[(usize, f64)], n_bins: usize) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .1
            .partial_cmp(&values[b].1)
            .expect("finite Lerner values")
    });
    let n = values.len();
    let mut out = Vec::with_capacity(n);
    for (rank, &idx) in order.iter().enumerate() {
        let bin = (rank * n_bins / n).min(n_bins - 1);
        out.push((values[idx].0, bin));
    }
    out
}

/// Fixed-basket indices over (good, store) keys and the pooled transition
/// matrix between within-category percentile bins.
pub fn markup_indices(table: &MarkupTable, n_bins: usize) -> Result<MarkupIndices> {
    if n_bins < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 percentile bins, got {n_bins}"
        )));
    }
    let quarters: Vec<usize> = table.quarter_means.iter().map(|&(q, _)| q).collect();
    if quarters.len() < 2 {
        return Err(Error::Data(
            "fixed-basket indices need at least two quarters".into(),
        ));
    }

    // (good, store) -> quarter -> (lerner, revenue).
    let mut by_key: BTreeMap<(usize, usize), BTreeMap<usize, (f64, f64)>> = BTreeMap::new();
    for r in &table.records {
        by_key
            .entry((r.good, r.store))
            .or_default()
            .insert(r.quarter, (r.lerner, r.revenue));
    }

    let basket_index = |base_quarter: usize| -> (Vec<(usize, f64)>, usize) {
        let weights: BTreeMap<(usize, usize), f64> = by_key
            .iter()
            .filter_map(|(&key, series)| {
                series.get(&base_quarter).map(|&(_, rev)| (key, rev))
            })
            .collect();
        let total: f64 = weights.values().sum();
        let mut dropped = 0;
        let mut series = Vec::new();
        for &q in &quarters {
            let mut num = 0.0;
            let mut den = 0.0;
            for (key, history) in &by_key {
                // A pair with data on exactly one side (observed this
                // quarter but absent from the base basket, or the reverse)
                // is excluded and counted; absent on both sides there is
                // nothing to drop.
                match (weights.get(key), history.get(&q)) {
                    (Some(&w), Some(&(lerner, _))) => {
                        num += w * lerner;
                        den += w;
                    }
                    (None, None) => {}
                    _ => dropped += 1,
                }
            }
            if den > 0.0 && total > 0.0 {
                series.push((q, num / den));
            }
        }
        (series, dropped)
    };
    let (laspeyres, laspeyres_dropped) = basket_index(quarters[0]);
    let (paasche, paasche_dropped) = basket_index(*quarters.last().expect("nonempty"));

    // Within-(category, quarter) percentile bins, then adjacent-quarter
    // transitions pooled over the whole sample.
    let mut bin_of: BTreeMap<(usize, usize, usize), usize> = BTreeMap::new();
    let mut groups: BTreeMap<(usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
    for (i, r) in table.records.iter().enumerate() {
        groups
            .entry((r.category, r.quarter))
            .or_default()
            .push((i, r.lerner));
    }
    for ((_, _), members) in groups {
        for (idx, bin) in assign_bins(&members, n_bins) {
            let r = &table.records[idx];
            bin_of.insert((r.good, r.store, r.quarter), bin);
        }
    }
    let mut counts = vec![vec![0.0; n_bins]; n_bins];
    for (good, store) in by_key.keys() {
        for pair in quarters.windows(2) {
            let (Some(&from), Some(&to)) = (
                bin_of.get(&(*good, *store, pair[0])),
                bin_of.get(&(*good, *store, pair[1])),
            ) else {
                continue;
            };
            counts[from][to] += 1.0;
        }
    }
    let transitions = counts
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let mass: f64 = row.iter().sum();
            if mass > 0.0 {
                row.into_iter().map(|v| v / mass).collect()
            } else {
                // No observed moves out of this bin: treat it as absorbing
                // so the matrix stays row-stochastic.
                (0..n_bins).map(|j| if i == j { 1.0 } else { 0.0 }).collect()
            }
        })
        .collect();

    Ok(MarkupIndices {
        laspeyres,
        paasche,
        laspeyres_dropped,
        paasche_dropped,
        transitions,
        n_bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::ConsiderationSet;
    use crate::equilibrium::bertrand_single_product;
    use crate::estimate::fit::{tsls_fit, DesignSettings};
    use crate::estimate::panel::{build_panel, PanelFilters};
    use crate::estimate::synthetic::{synthetic_transactions, SyntheticConfig};
    use crate::linalg::InteractionMatrix;
    use approx::assert_relative_eq;

    #[test]
    fn inverse_elasticity_rule() {
        let jac = DMatrix::from_row_slice(1, 1, &[-2.0]);
        let p = DVector::from_column_slice(&[1.0]);
        let q = DVector::from_column_slice(&[1.0]);
        let (lerner, excluded) =
            lerner_indices(&jac, &p, &q, &MarkupOwnership::Singleton).unwrap();
        assert!(excluded.is_empty());
        assert_relative_eq!(lerner[0].unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn zero_cost_bertrand_equilibrium_has_unit_lerner() {
        // With zero marginal cost the margin is the whole price, so the
        // index solved from the true Jacobian at equilibrium must be 1.
        let k = 3;
        let a = ConsiderationSet::identity(k);
        let mut m_raw = DMatrix::identity(k, k);
        m_raw[(0, 1)] = 0.3;
        m_raw[(1, 0)] = 0.3;
        m_raw[(1, 2)] = 0.2;
        m_raw[(2, 1)] = 0.2;
        let m = InteractionMatrix::new(m_raw.clone()).unwrap();
        let delta = DVector::from_column_slice(&[5.0, 4.0, 3.0]);
        let phi = -0.5;
        let eq = bertrand_single_product(&a, &m, &delta, phi).unwrap();
        let jac = m_raw
            .clone()
            .try_inverse()
            .unwrap()
            .scale(phi);
        let (lerner, excluded) =
            lerner_indices(&jac, &eq.prices, &eq.quantities, &MarkupOwnership::Singleton)
                .unwrap();
        assert!(excluded.is_empty());
        for slot in lerner {
            assert_relative_eq!(slot.unwrap(), 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn identity_ownership_matrix_matches_singleton() {
        let jac = DMatrix::from_row_slice(2, 2, &[-1.5, 0.4, 0.3, -2.5]);
        let p = DVector::from_column_slice(&[2.0, 3.0]);
        let q = DVector::from_column_slice(&[1.0, 1.5]);
        let (single, _) = lerner_indices(&jac, &p, &q, &MarkupOwnership::Singleton).unwrap();
        let (matrix, _) = lerner_indices(
            &jac,
            &p,
            &q,
            &MarkupOwnership::Matrix(DMatrix::identity(2, 2)),
        )
        .unwrap();
        for (a, b) in single.iter().zip(&matrix) {
            assert_relative_eq!(a.unwrap(), b.unwrap(), epsilon = 1e-14);
        }
    }

    #[test]
    fn upward_sloping_goods_are_excluded_with_reasons() {
        let jac = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, -2.0]);
        let p = DVector::from_column_slice(&[1.0, 1.0]);
        let q = DVector::from_column_slice(&[1.0, 1.0]);
        let (lerner, excluded) =
            lerner_indices(&jac, &p, &q, &MarkupOwnership::Singleton).unwrap();
        assert!(lerner[0].is_none());
        assert!(lerner[1].is_some());
        assert_eq!(excluded.len(), 1);
        assert!(excluded[0].1.contains("own-price elasticity"));
    }

    fn fitted_panel() -> (
        crate::estimate::fit::FitResult,
        crate::estimate::panel::MarketPanel,
    ) {
        let cfg = SyntheticConfig {
            n_goods: 5,
            n_stores: 3,
            n_quarters: 8,
            transactions_per_market: 6,
            seed: 11,
            ..SyntheticConfig::default()
        };
        let (rows, _) = synthetic_transactions(&cfg).unwrap();
        let panel = build_panel(
            &rows,
            &PanelFilters {
                min_transactions: 1,
                ..PanelFilters::default()
            },
        )
        .unwrap();
        let fit = tsls_fit(&panel, None, &DesignSettings::default()).unwrap();
        (fit, panel)
    }

    #[test]
    fn revenue_weights_sum_to_one_per_quarter() {
        let (fit, panel) = fitted_panel();
        let table = markups(&fit, &panel, None, &MarkupOwnership::Singleton, None).unwrap();
        assert!(!table.records.is_empty());
        let mut sums: BTreeMap<usize, f64> = BTreeMap::new();
        for r in &table.records {
            *sums.entry(r.quarter).or_insert(0.0) += r.weight;
        }
        for (_, s) in sums {
            assert_relative_eq!(s, 1.0, epsilon = 1e-12);
        }
        assert_eq!(table.quarter_means.len(), table.quarter_bands.len());
        assert_eq!(table.quarter_means.len(), table.moving_average.len());
        for (_, band) in &table.quarter_bands {
            for w in band.windows(2) {
                assert!(w[0] <= w[1] + 1e-12, "bands must be ordered: {band:?}");
            }
        }
    }

    #[test]
    fn zero_traffic_elasticity_leaves_markups_unchanged() {
        let (fit, panel) = fitted_panel();
        let plain = markups(&fit, &panel, None, &MarkupOwnership::Singleton, None).unwrap();
        let corrected = markups(
            &fit,
            &panel,
            None,
            &MarkupOwnership::Singleton,
            Some(ParticipationCorrection { delta: 0.0 }),
        )
        .unwrap();
        assert_eq!(plain.records.len(), corrected.records.len());
        for (a, b) in plain.records.iter().zip(&corrected.records) {
            assert_relative_eq!(a.lerner, b.lerner, epsilon = 1e-8);
        }
    }

    #[test]
    fn negative_traffic_elasticity_lowers_markups() {
        let (fit, panel) = fitted_panel();
        let plain = markups(&fit, &panel, None, &MarkupOwnership::Singleton, None).unwrap();
        let corrected = markups(
            &fit,
            &panel,
            None,
            &MarkupOwnership::Singleton,
            Some(ParticipationCorrection { delta: -0.8 }),
        )
        .unwrap();
        let mean =
            |t: &MarkupTable| t.quarter_means.iter().map(|&(_, v)| v).sum::<f64>();
        assert!(
            mean(&corrected) < mean(&plain),
            "correction should steepen demand and lower the index"
        );
    }

    /// Hand-built table: two goods in one store, constant Lerner per good.
    fn constant_table(weights_last: (f64, f64)) -> MarkupTable {
        let mut records = Vec::new();
        for quarter in 0..3 {
            let (rev_hi, rev_lo) = if quarter == 2 {
                weights_last
            } else {
                (1.0, 1.0)
            };
            records.push(MarkupRecord {
                good: 0,
                store: 0,
                quarter,
                lerner: 0.8,
                revenue: rev_hi,
                weight: rev_hi / (rev_hi + rev_lo),
                category: 0,
            });
            records.push(MarkupRecord {
                good: 1,
                store: 0,
                quarter,
                lerner: 0.2,
                revenue: rev_lo,
                weight: rev_lo / (rev_hi + rev_lo),
                category: 0,
            });
        }
        let quarter_means: Vec<(usize, f64)> = (0..3)
            .map(|q| {
                let in_q: Vec<&MarkupRecord> =
                    records.iter().filter(|r| r.quarter == q).collect();
                (q, in_q.iter().map(|r| r.weight * r.lerner).sum())
            })
            .collect();
        MarkupTable {
            records,
            excluded: Vec::new(),
            quarter_means,
            quarter_bands: Vec::new(),
            moving_average: Vec::new(),
        }
    }

    #[test]
    fn constant_markups_give_flat_equal_indices() {
        let table = constant_table((1.0, 1.0));
        let idx = markup_indices(&table, 2).unwrap();
        for (&(_, l), &(_, p)) in idx.laspeyres.iter().zip(&idx.paasche) {
            assert_relative_eq!(l, 0.5, epsilon = 1e-12);
            assert_relative_eq!(p, 0.5, epsilon = 1e-12);
        }
        assert_eq!(idx.laspeyres_dropped, 0);
        assert_eq!(idx.paasche_dropped, 0);
    }

    #[test]
    fn reallocation_toward_high_markup_goods_splits_the_indices() {
        // Final-quarter revenue swings to the high-mark-up good: the
        // Paasche basket (final weights) must sit above the Laspeyres one.
        let table = constant_table((9.0, 1.0));
        let idx = markup_indices(&table, 2).unwrap();
        let last = idx.laspeyres.len() - 1;
        assert!(idx.paasche[last].1 > idx.laspeyres[last].1 + 0.1);
    }

    #[test]
    fn transition_rows_are_stochastic() {
        let mut table = constant_table((1.0, 1.0));
        // Swap the two goods' Lerner values in the final quarter to force
        // movement between bins.
        for r in table.records.iter_mut().filter(|r| r.quarter == 2) {
            r.lerner = 1.0 - r.lerner;
        }
        let idx = markup_indices(&table, 2).unwrap();
        for row in &idx.transitions {
            assert_relative_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
        // The swap must show up off the diagonal.
        assert!(idx.transitions[0][1] > 0.0);
        assert!(idx.transitions[1][0] > 0.0);
    }

    #[test]
    fn missing_keys_are_counted_not_silently_ignored() {
        let mut table = constant_table((1.0, 1.0));
        // Remove the low-mark-up good from the final quarter.
        table.records.retain(|r| !(r.good == 1 && r.quarter == 2));
        let idx = markup_indices(&table, 2).unwrap();
        assert_eq!(idx.laspeyres_dropped, 1);
        // The final Paasche basket contains only the high-mark-up good.
        assert_eq!(idx.paasche_dropped, 2);
        assert!(idx.paasche.last().unwrap().1 > 0.75);
    }

    #[test]
    fn single_quarter_is_rejected() {
        let mut table = constant_table((1.0, 1.0));
        table.records.retain(|r| r.quarter == 0);
        table.quarter_means.truncate(1);
        assert!(matches!(
            markup_indices(&table, 2),
            Err(Error::Data(_))
        ));
    }
}
