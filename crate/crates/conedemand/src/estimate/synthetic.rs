//! Synthetic transaction-log generators with known ground truth.
//!
//! Two designs share one price process. Prices carry a good-quarter cost
//! component common across stores (which makes the competitor-price
//! instrument relevant) plus a market-level demand shock (which makes price
//! endogenous: the same shock enters demand). The corner-free design has
//! every good purchasable alone, so quantities are exactly linear in price;
//! the corner-heavy design funnels the last goods through shared baskets so
//! the non-negativity constraint binds in a sizable share of markets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::panel::RawTransaction;
use crate::demand::ConsiderationSet;
use crate::linalg::nnls;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_goods: usize,
    pub n_stores: usize,
    pub n_quarters: usize,
    /// Transactions per store-quarter; every transaction contains every
    /// good sold that quarter, so participation normalization recovers the
    /// model quantity exactly.
    pub transactions_per_market: usize,
    /// True own-price slope.
    pub phi: f64,
    /// Strength of the demand shock inside the price equation; 0 makes
    /// prices exogenous.
    pub endogeneity: f64,
    /// Idiosyncratic demand noise half-width.
    pub noise: f64,
    /// Route demand through a restrictive basket set so corners bind.
    pub corner_heavy: bool,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_goods: 6,
            n_stores: 4,
            n_quarters: 12,
            transactions_per_market: 25,
            phi: -0.4,
            endogeneity: 0.6,
            noise: 0.3,
            corner_heavy: false,
            seed: 0,
        }
    }
}

/// Ground truth behind a generated log.
#[derive(Debug, Clone)]
pub struct SyntheticTruth {
    pub phi: f64,
    pub delta: Vec<f64>,
    /// The basket set demand was routed through (identity when corner-free).
    pub consideration_set: ConsiderationSet,
    /// Share of store-quarters where the non-negativity constraint moved
    /// demand (the unconstrained target fell outside the basket cone).
    pub corner_share: f64,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&stream.to_le_bytes());
    ChaCha20Rng::from_seed(key)
}

/// The corner-heavy basket matrix: singletons for all but the last two
/// goods, which are purchasable only through two bundles mixing them at
/// ratios 1:1 and 1:3. Both goods stay present in every market, but their
/// quantity ratio is confined to [1, 3]; demand shocks push it against a
/// face of that cone in a sizable share of markets.
fn corner_baskets(k: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(k, k);
    for g in 0..k - 2 {
        a[(g, g)] = 1.0;
    }
    a[(k - 2, k - 2)] = 1.0;
    a[(k - 1, k - 2)] = 1.0;
    a[(k - 2, k - 1)] = 1.0;
    a[(k - 1, k - 1)] = 3.0;
    a
}

/// Generates a transaction log from the configured design, returning the
/// rows and the ground truth. Deterministic in the seed.
pub fn synthetic_transactions(
    cfg: &SyntheticConfig,
) -> Result<(Vec<RawTransaction>, SyntheticTruth)> {
    let k = cfg.n_goods;
    if k < 4 || cfg.n_stores < 2 || cfg.n_quarters < 2 || cfg.transactions_per_market == 0 {
        return Err(Error::Config(
            "synthetic design needs >= 4 goods, >= 2 stores, >= 2 quarters, and >= 1 transaction per market"
                .into(),
        ));
    }
    if !(cfg.phi < 0.0) || cfg.endogeneity < 0.0 || cfg.noise < 0.0 {
        return Err(Error::Config(
            "synthetic design needs phi < 0 and nonnegative endogeneity/noise".into(),
        ));
    }

    // Intrinsic qualities: generous for singleton goods, lean for the
    // bundle-bound ones so their quantity ratio sits near the cone's lower
    // face and shocks regularly push it across.
    let mut delta: Vec<f64> = (0..k).map(|g| 8.0 + 4.0 * (g + 1) as f64 / k as f64).collect();
    if cfg.corner_heavy {
        delta[k - 2] = 2.0;
        delta[k - 1] = 2.2;
    }
    let a_matrix = if cfg.corner_heavy {
        corner_baskets(k)
    } else {
        DMatrix::identity(k, k)
    };
    let consideration_set = ConsiderationSet::from_matrix(a_matrix.clone())?;

    // Random components, each from its own counter-based stream.
    let mut rng_cost = stream_rng(cfg.seed, 0);
    let cost: Vec<Vec<f64>> = (0..cfg.n_quarters)
        .map(|_| (0..k).map(|_| rng_cost.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut rng_shock = stream_rng(cfg.seed, 1);
    let shock: Vec<Vec<f64>> = (0..cfg.n_stores)
        .map(|_| {
            (0..cfg.n_quarters)
                .map(|_| rng_shock.gen_range(-1.0..1.0))
                .collect()
        })
        .collect();
    let mut rng_price = stream_rng(cfg.seed, 2);
    let mut rng_demand = stream_rng(cfg.seed, 3);

    let mut rows = Vec::new();
    let mut corner_markets = 0usize;
    let n_markets = cfg.n_stores * cfg.n_quarters;
    for s in 0..cfg.n_stores {
        for q in 0..cfg.n_quarters {
            let e = shock[s][q];
            let mut prices = DVector::zeros(k);
            let mut target = DVector::zeros(k);
            for g in 0..k {
                let p = 2.5
                    + 0.8 * cost[q][g]
                    + 0.4 * cfg.endogeneity * e
                    + 0.15 * rng_price.gen_range(-1.0..1.0);
                let u = e + cfg.noise * rng_demand.gen_range(-1.0..1.0);
                prices[g] = p;
                target[g] = delta[g] + cfg.phi * p + u;
            }
            let quantities = if cfg.corner_heavy {
                let identity = DMatrix::identity(k, k);
                let sol = nnls(&a_matrix, &target, &identity)?;
                if sol.residual_norm > 1e-6 * target.norm().max(1.0) {
                    corner_markets += 1;
                }
                &a_matrix * &sol.z
            } else {
                target
            };

            let year = 2020 + (q / 4) as i32;
            let month = (q % 4) * 3 + 2;
            let date = format!("{year}-{month:02}-15");
            for t in 0..cfg.transactions_per_market {
                let tx = format!("s{s}q{q}t{t}");
                for g in 0..k {
                    if quantities[g] <= 1e-12 {
                        continue;
                    }
                    rows.push(RawTransaction {
                        transaction_id: tx.clone(),
                        store_id: format!("store_{s}"),
                        date: date.clone(),
                        product_id: format!("good_{g:02}"),
                        quantity: quantities[g],
                        unit_price: prices[g],
                        gross_value: quantities[g] * prices[g],
                        discount: 0.0,
                        category_l1: if g < k / 2 { "food" } else { "household" }.into(),
                        category_l2: format!("group_{}", g / 2),
                        category_l3: format!("item_{g:02}"),
                        private_label: (g % 2) as u8,
                    });
                }
            }
        }
    }

    Ok((
        rows,
        SyntheticTruth {
            phi: cfg.phi,
            delta,
            consideration_set,
            corner_share: corner_markets as f64 / n_markets as f64,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::panel::{build_panel, PanelFilters};

    #[test]
    fn generator_is_deterministic() {
        let cfg = SyntheticConfig::default();
        let (a, _) = synthetic_transactions(&cfg).unwrap();
        let (b, _) = synthetic_transactions(&cfg).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(serde_json::to_string(x).unwrap(), serde_json::to_string(y).unwrap());
        }
    }

    #[test]
    fn corner_free_log_survives_default_filters() {
        let (rows, truth) = synthetic_transactions(&SyntheticConfig::default()).unwrap();
        let panel = build_panel(&rows, &PanelFilters::default()).unwrap();
        assert_eq!(panel.goods.len(), 6);
        assert_eq!(panel.n_rows(), 6 * 4 * 12);
        assert_eq!(truth.corner_share, 0.0);
        assert_eq!(panel.instrument_fallbacks, 0);
    }

    #[test]
    fn corner_heavy_log_has_binding_markets() {
        let cfg = SyntheticConfig {
            corner_heavy: true,
            ..SyntheticConfig::default()
        };
        let (rows, truth) = synthetic_transactions(&cfg).unwrap();
        assert!(
            truth.corner_share > 0.05 && truth.corner_share < 0.95,
            "corner share {}",
            truth.corner_share
        );
        // The bundle-bound goods keep enough positive quarters to survive.
        let panel = build_panel(&rows, &PanelFilters::default()).unwrap();
        assert_eq!(panel.goods.len(), 6);
    }

    #[test]
    fn degenerate_configs_are_rejected() {
        let bad = SyntheticConfig {
            n_goods: 3,
            ..SyntheticConfig::default()
        };
        assert!(synthetic_transactions(&bad).is_err());
        let bad = SyntheticConfig {
            phi: 0.0,
            ..SyntheticConfig::default()
        };
        assert!(synthetic_transactions(&bad).is_err());
    }
}
