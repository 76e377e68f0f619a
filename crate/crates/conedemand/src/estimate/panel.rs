//! Panel construction: filtering raw transactions and aggregating them to
//! (good, store, quarter) observations with covariates and instruments.

use nalgebra::{DMatrix, DVector};
use std::collections::{BTreeMap, BTreeSet};

use crate::{Error, Result};

/// A calendar quarter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub struct Quarter {
    pub year: i32,
    /// 1 through 4.
    pub q: u8,
}

impl Quarter {
    /// Total quarter count since year zero; consecutive quarters differ by 1.
    pub fn ordinal(&self) -> i64 {
        self.year as i64 * 4 + (self.q as i64 - 1)
    }
}

impl std::fmt::Display for Quarter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}Q{}", self.year, self.q)
    }
}

/// Parses an ISO-8601 date (`YYYY-MM-DD`) into its quarter and a month
/// ordinal used for the close-competitor filter.
pub fn parse_date(date: &str) -> Result<(Quarter, i64)> {
    let parts: Vec<&str> = date.split('-').collect();
    let bad = || Error::Data(format!("date {date:?} is not ISO-8601 (YYYY-MM-DD)"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let year: i32 = parts[0].parse().map_err(|_| bad())?;
    let month: u8 = parts[1].parse().map_err(|_| bad())?;
    let day: u8 = parts[2].parse().map_err(|_| bad())?;
    if !(1..=12).contains(&month) || !(1..=31).contains(&day) {
        return Err(bad());
    }
    let quarter = Quarter {
        year,
        q: (month - 1) / 3 + 1,
    };
    Ok((quarter, year as i64 * 12 + month as i64 - 1))
}

/// One line item of a transaction log, as read from the transaction CSV.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RawTransaction {
    pub transaction_id: String,
    pub store_id: String,
    /// ISO-8601 date (YYYY-MM-DD).
    pub date: String,
    pub product_id: String,
    pub quantity: f64,
    pub unit_price: f64,
    pub gross_value: f64,
    pub discount: f64,
    pub category_l1: String,
    pub category_l2: String,
    pub category_l3: String,
    /// 0 or 1.
    pub private_label: u8,
}

/// The four row filters applied before aggregation, each switchable.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PanelFilters {
    /// Products observed in fewer distinct transactions are dropped.
    pub min_transactions: usize,
    /// Drop products ever sold at a nonpositive unit price.
    pub drop_zero_price: bool,
    /// Drop products whose unit price never varies.
    pub require_price_variation: bool,
    /// Drop product-months in which no other store carries the product, so
    /// the competitor-price instrument is defined everywhere.
    pub require_close_competitor: bool,
}

impl Default for PanelFilters {
    fn default() -> Self {
        Self {
            min_transactions: 100,
            drop_zero_price: true,
            require_price_variation: true,
            require_close_competitor: true,
        }
    }
}

/// Row-level bookkeeping for the filters; the four drop counts plus the kept
/// count always sum to the input row count.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct AttritionReport {
    pub input_rows: usize,
    pub kept_rows: usize,
    pub few_transactions: usize,
    pub zero_price: usize,
    pub no_price_variation: usize,
    pub no_close_competitor: usize,
}

impl AttritionReport {
    pub fn dropped(&self) -> usize {
        self.few_transactions + self.zero_price + self.no_price_variation + self.no_close_competitor
    }
}

impl std::fmt::Display for AttritionReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} rows in, {} kept ({} few-transactions, {} zero-price, {} no-price-variation, {} no-close-competitor)",
            self.input_rows,
            self.kept_rows,
            self.few_transactions,
            self.zero_price,
            self.no_price_variation,
            self.no_close_competitor
        )
    }
}

/// Index triple identifying one panel observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct PanelKey {
    pub good: usize,
    pub store: usize,
    pub quarter: usize,
}

/// Aggregated estimation panel: one row per (good, store, quarter).
///
/// Quantities are participation-normalized (total units divided by the
/// store-quarter transaction count); prices are quantity-weighted averages.
/// Covariates put the category dummies, private-label flag, and presence
/// count first, followed by store and quarter fixed effects (names prefixed
/// `store=` and `quarter=`). Instruments are the competitor average price at
/// other stores, competitor counts at the three category levels, and their
/// one-quarter lags.
#[derive(Debug, Clone)]
pub struct MarketPanel {
    pub goods: Vec<String>,
    pub stores: Vec<String>,
    pub quarters: Vec<Quarter>,
    pub rows: Vec<PanelKey>,
    pub quantity: DVector<f64>,
    pub price: DVector<f64>,
    pub covariates: DMatrix<f64>,
    pub covariate_names: Vec<String>,
    pub instruments: DMatrix<f64>,
    pub instrument_names: Vec<String>,
    /// Cluster key per row: store * n_quarters + quarter.
    pub market_of_row: Vec<usize>,
    /// Distinct transaction count per market id (0 where a store-quarter is
    /// empty).
    pub market_transactions: Vec<f64>,
    /// Level-1 category index per good, for percentile binning.
    pub category_l1_of_good: Vec<usize>,
    pub category_l1_names: Vec<String>,
    /// Rows whose competitor-price instrument fell back to the good's own
    /// price because no other store carried the good that quarter.
    pub instrument_fallbacks: usize,
    pub attrition: AttritionReport,
}

impl MarketPanel {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_markets(&self) -> usize {
        let set: BTreeSet<usize> = self.market_of_row.iter().copied().collect();
        set.len()
    }

    pub fn good_of_row(&self) -> Vec<usize> {
        self.rows.iter().map(|k| k.good).collect()
    }

    /// Rows grouped by market id, in market order.
    pub fn market_rows(&self) -> BTreeMap<usize, Vec<usize>> {
        let mut map: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &m) in self.market_of_row.iter().enumerate() {
            map.entry(m).or_default().push(i);
        }
        map
    }

    /// Store-quarter observations for the participation regression: the
    /// transaction count, the store's own price index, and the average price
    /// index of the other stores active that quarter. Stores with no
    /// competitor that quarter are skipped.
    pub fn participation_observations(&self, revenue_weighted: bool) -> Vec<ParticipationObs> {
        let mut index: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
        for (i, key) in self.rows.iter().enumerate() {
            let weight = if revenue_weighted {
                self.price[i] * self.quantity[i]
            } else {
                1.0
            };
            let e = index.entry((key.store, key.quarter)).or_insert((0.0, 0.0));
            e.0 += weight * self.price[i];
            e.1 += weight;
        }
        let price_index: BTreeMap<(usize, usize), f64> = index
            .iter()
            .filter(|(_, (_, w))| *w > 0.0)
            .map(|(&k, &(num, den))| (k, num / den))
            .collect();
        let mut out = Vec::new();
        for (&(store, quarter), &own) in &price_index {
            let others: Vec<f64> = price_index
                .iter()
                .filter(|(&(s, q), _)| q == quarter && s != store)
                .map(|(_, &v)| v)
                .collect();
            if others.is_empty() {
                continue;
            }
            let market = store * self.quarters.len() + quarter;
            out.push(ParticipationObs {
                store,
                quarter_ordinal: self.quarters[quarter].ordinal(),
                transactions: self.market_transactions[market],
                price_index: own,
                competitor_index: others.iter().sum::<f64>() / others.len() as f64,
            });
        }
        out
    }
}

/// One store-quarter observation for the participation regression.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ParticipationObs {
    pub store: usize,
    pub quarter_ordinal: i64,
    pub transactions: f64,
    pub price_index: f64,
    pub competitor_index: f64,
}

/// Names the instrument columns emitted by [`build_panel`], in order.
pub const INSTRUMENT_NAMES: [&str; 8] = [
    "z_comp_price",
    "z_comp_price_lag",
    "z_n_cat1",
    "z_n_cat2",
    "z_n_cat3",
    "z_n_cat1_lag",
    "z_n_cat2_lag",
    "z_n_cat3_lag",
];

// Price variation below this relative spread counts as "no variation".
const PRICE_SPREAD_TOL: f64 = 1e-9;

struct ProductStats {
    transactions: BTreeSet<String>,
    min_price: f64,
    max_price: f64,
}

/// Applies the four §-style row filters and aggregates the survivors into a
/// [`MarketPanel`]. The attrition report accounts for every input row.
pub fn build_panel(transactions: &[RawTransaction], filters: &PanelFilters) -> Result<MarketPanel> {
    let mut report = AttritionReport {
        input_rows: transactions.len(),
        ..Default::default()
    };
    for (i, t) in transactions.iter().enumerate() {
        if !(t.quantity.is_finite() && t.quantity > 0.0) {
            return Err(Error::Data(format!(
                "row {i}: quantity must be a positive real, got {}",
                t.quantity
            )));
        }
        if !t.unit_price.is_finite() || t.unit_price < 0.0 {
            return Err(Error::Data(format!(
                "row {i}: unit price must be a nonnegative real, got {}",
                t.unit_price
            )));
        }
        parse_date(&t.date).map_err(|e| Error::Data(format!("row {i}: {e}")))?;
    }

    // Product-level statistics for the first three filters.
    let mut stats: BTreeMap<&str, ProductStats> = BTreeMap::new();
    for t in transactions {
        let s = stats.entry(&t.product_id).or_insert(ProductStats {
            transactions: BTreeSet::new(),
            min_price: f64::INFINITY,
            max_price: f64::NEG_INFINITY,
        });
        s.transactions.insert(t.transaction_id.clone());
        s.min_price = s.min_price.min(t.unit_price);
        s.max_price = s.max_price.max(t.unit_price);
    }
    let mut drop_reason: BTreeMap<&str, u8> = BTreeMap::new();
    for (product, s) in &stats {
        if s.transactions.len() < filters.min_transactions {
            drop_reason.insert(product, 1);
        } else if filters.drop_zero_price && s.min_price <= 0.0 {
            drop_reason.insert(product, 2);
        } else if filters.require_price_variation
            && s.max_price - s.min_price <= PRICE_SPREAD_TOL * s.max_price.abs().max(1.0)
        {
            drop_reason.insert(product, 3);
        }
    }

    let mut survivors: Vec<&RawTransaction> = Vec::new();
    for t in transactions {
        match drop_reason.get(t.product_id.as_str()) {
            Some(1) => report.few_transactions += 1,
            Some(2) => report.zero_price += 1,
            Some(3) => report.no_price_variation += 1,
            _ => survivors.push(t),
        }
    }

    // Close-competitor filter: the product must be on sale at some other
    // store in the same calendar month.
    if filters.require_close_competitor {
        let mut month_stores: BTreeMap<(&str, i64), BTreeSet<&str>> = BTreeMap::new();
        for t in &survivors {
            let (_, month) = parse_date(&t.date)?;
            month_stores
                .entry((&t.product_id, month))
                .or_default()
                .insert(&t.store_id);
        }
        let mut kept = Vec::with_capacity(survivors.len());
        for t in survivors {
            let (_, month) = parse_date(&t.date)?;
            if month_stores[&(t.product_id.as_str(), month)].len() >= 2 {
                kept.push(t);
            } else {
                report.no_close_competitor += 1;
            }
        }
        survivors = kept;
    }

    report.kept_rows = survivors.len();
    if survivors.is_empty() {
        return Err(Error::Data(format!(
            "no observations survive the filters: {report}"
        )));
    }

    // Identifier tables.
    let goods: Vec<String> = {
        let set: BTreeSet<&str> = survivors.iter().map(|t| t.product_id.as_str()).collect();
        set.into_iter().map(String::from).collect()
    };
    let stores: Vec<String> = {
        let set: BTreeSet<&str> = survivors.iter().map(|t| t.store_id.as_str()).collect();
        set.into_iter().map(String::from).collect()
    };
    let quarters: Vec<Quarter> = {
        let mut set: BTreeSet<Quarter> = BTreeSet::new();
        for t in &survivors {
            set.insert(parse_date(&t.date)?.0);
        }
        set.into_iter().collect()
    };
    let good_idx: BTreeMap<&str, usize> =
        goods.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();
    let store_idx: BTreeMap<&str, usize> =
        stores.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let quarter_idx: BTreeMap<Quarter, usize> =
        quarters.iter().enumerate().map(|(i, &q)| (q, i)).collect();

    // Good-level attributes, taken from each product's first surviving row.
    let mut cat_of_good: Vec<[String; 3]> = vec![Default::default(); goods.len()];
    let mut private_label: Vec<f64> = vec![0.0; goods.len()];
    let mut seen: Vec<bool> = vec![false; goods.len()];
    for t in &survivors {
        let g = good_idx[t.product_id.as_str()];
        if !seen[g] {
            cat_of_good[g] = [
                t.category_l1.clone(),
                t.category_l2.clone(),
                t.category_l3.clone(),
            ];
            private_label[g] = f64::from(t.private_label.min(1));
            seen[g] = true;
        }
    }

    // Aggregation to cells and store-quarter transaction counts.
    let mut cells: BTreeMap<(usize, usize, usize), (f64, f64)> = BTreeMap::new();
    let mut market_tx: BTreeMap<(usize, usize), BTreeSet<&str>> = BTreeMap::new();
    for t in &survivors {
        let g = good_idx[t.product_id.as_str()];
        let s = store_idx[t.store_id.as_str()];
        let q = quarter_idx[&parse_date(&t.date)?.0];
        let cell = cells.entry((s, q, g)).or_insert((0.0, 0.0));
        cell.0 += t.quantity;
        cell.1 += t.quantity * t.unit_price;
        market_tx.entry((s, q)).or_default().insert(&t.transaction_id);
    }

    let n_quarters = quarters.len();
    let mut market_transactions = vec![0.0; stores.len() * n_quarters];
    for (&(s, q), ids) in &market_tx {
        market_transactions[s * n_quarters + q] = ids.len() as f64;
    }

    let mut rows = Vec::with_capacity(cells.len());
    let mut quantity = Vec::with_capacity(cells.len());
    let mut price = Vec::with_capacity(cells.len());
    let mut market_of_row = Vec::with_capacity(cells.len());
    let mut price_cell: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
    for (&(s, q, g), &(units, value)) in &cells {
        let p = value / units;
        rows.push(PanelKey {
            good: g,
            store: s,
            quarter: q,
        });
        quantity.push(units / market_transactions[s * n_quarters + q]);
        price.push(p);
        market_of_row.push(s * n_quarters + q);
        price_cell.insert((g, s, q), p);
    }

    // Covariates: category dummies (drop-first), private label, presence
    // count, then store and quarter fixed effects (drop-first).
    let mut cat_names: [Vec<String>; 3] = Default::default();
    let mut cat_index_of_good: Vec<[usize; 3]> = vec![[0; 3]; goods.len()];
    for level in 0..3 {
        let set: BTreeSet<&str> = cat_of_good.iter().map(|c| c[level].as_str()).collect();
        cat_names[level] = set.into_iter().map(String::from).collect();
        for g in 0..goods.len() {
            cat_index_of_good[g][level] = cat_names[level]
                .iter()
                .position(|n| *n == cat_of_good[g][level])
                .expect("category name was collected from the same rows");
        }
    }
    let mut presence: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for key in &rows {
        *presence.entry((key.good, key.quarter)).or_insert(0.0) += 1.0;
    }

    let mut covariate_names: Vec<String> = Vec::new();
    for level in 0..3 {
        for name in cat_names[level].iter().skip(1) {
            covariate_names.push(format!("cat{}={}", level + 1, name));
        }
    }
    covariate_names.push("private_label".into());
    covariate_names.push("presence".into());
    for s in stores.iter().skip(1) {
        covariate_names.push(format!("store={s}"));
    }
    for q in quarters.iter().skip(1) {
        covariate_names.push(format!("quarter={q}"));
    }
    let mut covariates = DMatrix::zeros(rows.len(), covariate_names.len());
    for (r, key) in rows.iter().enumerate() {
        let mut c = 0;
        for level in 0..3 {
            for (j, _) in cat_names[level].iter().enumerate().skip(1) {
                covariates[(r, c)] = f64::from(cat_index_of_good[key.good][level] == j);
                c += 1;
            }
        }
        covariates[(r, c)] = private_label[key.good];
        c += 1;
        covariates[(r, c)] = presence[&(key.good, key.quarter)];
        c += 1;
        for s in 1..stores.len() {
            covariates[(r, c)] = f64::from(key.store == s);
            c += 1;
        }
        for q in 1..n_quarters {
            covariates[(r, c)] = f64::from(key.quarter == q);
            c += 1;
        }
    }

    // Instruments. The competitor average price and competitor counts are
    // computed at the quarter level; lags use the previous calendar quarter
    // and fall back to the current value when that quarter is absent.
    let competitor_avg = |g: usize, s: usize, q: usize| -> Option<f64> {
        let mut sum = 0.0;
        let mut count = 0;
        for other in 0..stores.len() {
            if other == s {
                continue;
            }
            if let Some(&p) = price_cell.get(&(g, other, q)) {
                sum += p;
                count += 1;
            }
        }
        (count > 0).then(|| sum / count as f64)
    };
    let mut cat_count: BTreeMap<(usize, usize, usize, usize), f64> = BTreeMap::new();
    for key in &rows {
        for level in 0..3 {
            let cat = cat_index_of_good[key.good][level];
            *cat_count
                .entry((key.store, key.quarter, level, cat))
                .or_insert(0.0) += 1.0;
        }
    }
    let count_others = |key: &PanelKey, level: usize, q: usize| -> Option<f64> {
        let cat = cat_index_of_good[key.good][level];
        cat_count
            .get(&(key.store, q, level, cat))
            .map(|&n| n - f64::from(price_cell.contains_key(&(key.good, key.store, q))))
    };
    let prev_quarter: Vec<Option<usize>> = quarters
        .iter()
        .map(|q| {
            quarters
                .iter()
                .position(|prev| prev.ordinal() == q.ordinal() - 1)
        })
        .collect();

    let mut instruments = DMatrix::zeros(rows.len(), INSTRUMENT_NAMES.len());
    let mut fallbacks = 0;
    for (r, key) in rows.iter().enumerate() {
        let current = match competitor_avg(key.good, key.store, key.quarter) {
            Some(v) => v,
            None => {
                fallbacks += 1;
                price[r]
            }
        };
        let lagged = prev_quarter[key.quarter]
            .and_then(|pq| competitor_avg(key.good, key.store, pq))
            .unwrap_or(current);
        instruments[(r, 0)] = current;
        instruments[(r, 1)] = lagged;
        for level in 0..3 {
            let now = count_others(key, level, key.quarter).unwrap_or(0.0);
            let lag = prev_quarter[key.quarter]
                .and_then(|pq| count_others(key, level, pq))
                .unwrap_or(now);
            instruments[(r, 2 + level)] = now;
            instruments[(r, 5 + level)] = lag;
        }
    }

    let category_l1_of_good = cat_index_of_good.iter().map(|c| c[0]).collect();
    Ok(MarketPanel {
        goods,
        stores,
        quarters,
        rows,
        quantity: DVector::from_vec(quantity),
        price: DVector::from_vec(price),
        covariates,
        covariate_names,
        instruments,
        instrument_names: INSTRUMENT_NAMES.iter().map(|s| s.to_string()).collect(),
        market_of_row,
        market_transactions,
        category_l1_of_good,
        category_l1_names: cat_names[0].clone(),
        instrument_fallbacks: fallbacks,
        attrition: report,
    })
}
