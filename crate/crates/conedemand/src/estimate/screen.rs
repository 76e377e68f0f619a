//! Assortment hygiene for the basket matrix: a posterior upper bound on each
//! good's never-observed singleton rate, and a cone-preserving reduction of
//! a transaction log to a smaller generating set.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use statrs::distribution::{Beta, ContinuousCDF};

use crate::copurchase::TransactionLog;
use crate::demand::ConsiderationSet;
use crate::{Error, Result};

/// Screen outcome for one good.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SingletonVerdict {
    pub good: usize,
    /// Transactions containing the good.
    pub appearances: usize,
    /// Transactions where the good is the only product.
    pub singleton_appearances: usize,
    /// One-sided upper credible bound on the singleton rate under a
    /// Jeffreys prior.
    pub upper_bound: f64,
    /// The 3/N heuristic for the zero-count case.
    pub rule_of_three: f64,
    /// True when the good was never seen alone and the bound clears the
    /// threshold.
    pub never_singleton: bool,
}

/// Upper credible bound at the given confidence for a rate with `s`
/// successes in `n` trials under the Jeffreys prior (posterior
/// Beta(s + 1/2, n - s + 1/2)).
pub fn jeffreys_upper_bound(s: usize, n: usize, confidence: f64) -> Result<f64> {
    if !(0.0 < confidence && confidence < 1.0) {
        return Err(Error::InvalidInput(format!(
            "confidence must be in (0,1), got {confidence}"
        )));
    }
    if s > n {
        return Err(Error::InvalidInput(format!(
            "cannot have {s} singleton appearances out of {n}"
        )));
    }
    if n == 0 {
        return Ok(1.0);
    }
    let beta = Beta::new(s as f64 + 0.5, (n - s) as f64 + 0.5)
        .map_err(|e| Error::Numerical(format!("Beta posterior: {e}")))?;
    // The stock quantile inversion is much coarser than the CDF it inverts;
    // bisecting the CDF directly recovers full precision.
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if beta.cdf(mid) < confidence {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Flags goods whose singleton rate is credibly below `threshold`: never
/// seen alone and with the Jeffreys upper bound under it.
pub fn singleton_screen(
    log: &TransactionLog,
    confidence: f64,
    threshold: f64,
) -> Result<Vec<SingletonVerdict>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidInput(format!(
            "threshold must be in (0,1), got {threshold}"
        )));
    }
    let mut out = Vec::with_capacity(log.n_products());
    for good in 0..log.n_products() {
        let transactions = log.transactions_of(good);
        let appearances = transactions.len();
        let singleton_appearances = transactions
            .iter()
            .filter(|&&t| log.products_in(t).len() == 1)
            .count();
        let upper_bound = jeffreys_upper_bound(singleton_appearances, appearances, confidence)?;
        out.push(SingletonVerdict {
            good,
            appearances,
            singleton_appearances,
            upper_bound,
            rule_of_three: if appearances > 0 {
                3.0 / appearances as f64
            } else {
                f64::INFINITY
            },
            never_singleton: singleton_appearances == 0 && upper_bound < threshold,
        });
    }
    Ok(out)
}

/// Reduces a transaction log to a smaller basket matrix spanning the same
/// cone.
///
/// Goods ever bought alone get one canonical singleton column. Every other
/// transaction is split into its part on non-singleton goods and its
/// singleton add-ons; transactions whose non-singleton part is empty are
/// rebuildable from the canonical columns and dropped. Within each group
/// sharing an identical non-singleton part, only members whose add-ons are
/// minimal survive (an add-on-free member beats everything; incomparable
/// add-ons are all kept). Each dropped transaction equals a kept one plus a
/// nonnegative singleton combination, so the generated cone is unchanged.
pub fn reduce_consideration_set(log: &TransactionLog) -> Result<ConsiderationSet> {
    let k = log.n_products();
    let n_t = log.n_transactions();
    // Basket quantities, not presence: proportional baskets with different
    // scales are distinct columns and must stay so.
    let mut dense = DMatrix::zeros(k, n_t);
    for g in 0..k {
        let ts = log.transactions_of(g);
        match log.quantities_of(g) {
            Some(qs) => {
                for (&t, &q) in ts.iter().zip(qs) {
                    dense[(g, t)] = q;
                }
            }
            None => {
                for &t in ts {
                    dense[(g, t)] = 1.0;
                }
            }
        }
    }

    let singleton_good: Vec<bool> = (0..k)
        .map(|g| {
            log.transactions_of(g)
                .iter()
                .any(|&t| log.products_in(t).len() == 1)
        })
        .collect();

    // One canonical column per singleton good: its first singleton
    // transaction.
    let mut canonical: BTreeMap<usize, usize> = BTreeMap::new();
    for t in 0..n_t {
        let support = log.products_in(t);
        if support.len() == 1 {
            canonical.entry(support[0]).or_insert(t);
        }
    }

    // Group multi-good transactions by their exact non-singleton part.
    // Grouping on the full vector (not just its support) is what makes the
    // drops provably cone-neutral.
    let mut groups: BTreeMap<Vec<u64>, Vec<usize>> = BTreeMap::new();
    for t in 0..n_t {
        let support = log.products_in(t);
        if support.is_empty() || support.len() == 1 {
            continue;
        }
        let reduced: Vec<u64> = (0..k)
            .map(|g| {
                if singleton_good[g] {
                    0.0f64.to_bits()
                } else {
                    dense[(g, t)].to_bits()
                }
            })
            .collect();
        if reduced.iter().all(|&b| b == 0.0f64.to_bits()) {
            continue;
        }
        groups.entry(reduced).or_default().push(t);
    }

    let mut kept: Vec<usize> = canonical.values().copied().collect();
    for members in groups.values() {
        let addon = |t: usize| -> Vec<f64> {
            (0..k)
                .filter(|&g| singleton_good[g])
                .map(|g| dense[(g, t)])
                .collect()
        };
        let mut survivors: Vec<usize> = Vec::new();
        'member: for &t in members {
            let s_t = addon(t);
            let mut replaced = Vec::new();
            for &other in &survivors {
                let s_o = addon(other);
                let o_le_t = s_o.iter().zip(&s_t).all(|(a, b)| a <= b);
                let t_le_o = s_t.iter().zip(&s_o).all(|(a, b)| a <= b);
                if o_le_t {
                    // Covers the equal case too: first member wins.
                    continue 'member;
                }
                if t_le_o {
                    replaced.push(other);
                }
            }
            survivors.retain(|o| !replaced.contains(o));
            survivors.push(t);
        }
        kept.extend(survivors);
    }
    kept.sort_unstable();

    if kept.is_empty() {
        return Err(Error::Data(
            "the transaction log has no usable transactions".into(),
        ));
    }
    let mut a = DMatrix::zeros(k, kept.len());
    for (j, &t) in kept.iter().enumerate() {
        a.set_column(j, &dense.column(t));
    }
    let basket_labels = kept
        .iter()
        .map(|&t| log.transaction_ids()[t].clone())
        .collect();
    ConsiderationSet::new(a, log.product_ids().to_vec(), basket_labels)
}
