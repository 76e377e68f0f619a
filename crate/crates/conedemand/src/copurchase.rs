//! Complement and substitute proxy matrices from transaction logs.
//!
//! Products bought together more often than a degree-preserving bipartite
//! null model predicts are flagged as complements; products sharing
//! complements while co-occurring significantly less than expected are
//! flagged as substitutes. Each flag carries a cosine-similarity weight:
//! purchase-pattern similarity for complements, and similarity of
//! complement profiles for substitutes.
//!
//! Everything runs off the sparse 0/1 product-by-transaction incidence; the
//! dense matrix formulas serve as test oracles.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// A product-by-transaction incidence log.
///
/// Stored sparsely: per product, the sorted transaction indices it appears
/// in. Quantities may be retained for downstream estimation but play no
/// role here; degrees count presence, not units.
#[derive(Debug, Clone)]
pub struct TransactionLog {
    n_products: usize,
    n_transactions: usize,
    /// `by_product[p]` = sorted transaction indices containing `p`.
    by_product: Vec<Vec<usize>>,
    /// `by_transaction[t]` = sorted product indices in `t`.
    by_transaction: Vec<Vec<usize>>,
    quantities: Option<Vec<Vec<f64>>>,
    product_ids: Vec<String>,
    transaction_ids: Vec<String>,
}

impl TransactionLog {
    /// Builds a log from `(product, transaction, quantity)` triples.
    /// Duplicate pairs are collapsed (quantities summed); every product and
    /// every transaction must appear at least once, and `K >= 2`.
    pub fn new(
        n_products: usize,
        n_transactions: usize,
        entries: &[(usize, usize, f64)],
        product_ids: Vec<String>,
        transaction_ids: Vec<String>,
    ) -> Result<Self> {
        if n_products < 2 {
            return Err(Error::InvalidInput(
                "a transaction log needs at least two products".into(),
            ));
        }
        if n_transactions == 0 {
            return Err(Error::InvalidInput(
                "a transaction log needs at least one transaction".into(),
            ));
        }
        if product_ids.len() != n_products || transaction_ids.len() != n_transactions {
            return Err(Error::InvalidInput(format!(
                "identifier counts ({}, {}) do not match log shape {}x{}",
                product_ids.len(),
                transaction_ids.len(),
                n_products,
                n_transactions
            )));
        }
        let mut qty = vec![std::collections::BTreeMap::<usize, f64>::new(); n_products];
        for &(p, t, q) in entries {
            if p >= n_products || t >= n_transactions {
                return Err(Error::InvalidInput(format!(
                    "entry ({p}, {t}) out of range for a {n_products}x{n_transactions} log"
                )));
            }
            if !q.is_finite() || q <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "quantity for product {p} in transaction {t} must be finite and positive, got {q}"
                )));
            }
            *qty[p].entry(t).or_insert(0.0) += q;
        }
        let by_product: Vec<Vec<usize>> = qty.iter().map(|m| m.keys().cloned().collect()).collect();
        let quantities: Vec<Vec<f64>> = qty.iter().map(|m| m.values().cloned().collect()).collect();
        let mut by_transaction = vec![Vec::new(); n_transactions];
        for (p, ts) in by_product.iter().enumerate() {
            for &t in ts {
                by_transaction[t].push(p);
            }
        }
        for (p, ts) in by_product.iter().enumerate() {
            if ts.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "product {:?} appears in no transaction",
                    product_ids[p]
                )));
            }
        }
        for (t, ps) in by_transaction.iter().enumerate() {
            if ps.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "transaction {:?} contains no products",
                    transaction_ids[t]
                )));
            }
        }
        Ok(Self {
            n_products,
            n_transactions,
            by_product,
            by_transaction,
            quantities: Some(quantities),
            product_ids,
            transaction_ids,
        })
    }

    /// Builds a log from a dense nonnegative matrix (nonzeros = presence),
    /// generating identifiers `p1..pK`, `t1..tT`.
    pub fn from_matrix(s: &DMatrix<f64>) -> Result<Self> {
        crate::linalg::check_finite(s, "incidence matrix")?;
        if s.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidInput(
                "incidence entries must be nonnegative".into(),
            ));
        }
        let mut entries = Vec::new();
        for p in 0..s.nrows() {
            for t in 0..s.ncols() {
                if s[(p, t)] > 0.0 {
                    entries.push((p, t, s[(p, t)]));
                }
            }
        }
        let product_ids = (1..=s.nrows()).map(|i| format!("p{i}")).collect();
        let transaction_ids = (1..=s.ncols()).map(|i| format!("t{i}")).collect();
        Self::new(s.nrows(), s.ncols(), &entries, product_ids, transaction_ids)
    }

    pub fn n_products(&self) -> usize {
        self.n_products
    }

    pub fn n_transactions(&self) -> usize {
        self.n_transactions
    }

    pub fn transactions_of(&self, product: usize) -> &[usize] {
        &self.by_product[product]
    }

    pub fn products_in(&self, transaction: usize) -> &[usize] {
        &self.by_transaction[transaction]
    }

    pub fn quantities_of(&self, product: usize) -> Option<&[f64]> {
        self.quantities.as_deref().map(|q| q[product].as_slice())
    }

    pub fn product_ids(&self) -> &[String] {
        &self.product_ids
    }

    pub fn transaction_ids(&self) -> &[String] {
        &self.transaction_ids
    }

    /// Dense 0/1 incidence (presence only).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.n_products, self.n_transactions);
        for (p, ts) in self.by_product.iter().enumerate() {
            for &t in ts {
                s[(p, t)] = 1.0;
            }
        }
        s
    }
}

/// The full proxy bundle for one log.
#[derive(Debug, Clone)]
pub struct ProxyMatrices {
    /// Complement proxy: significance mask times purchase-pattern cosine,
    /// hollow diagonal.
    pub w_c: DMatrix<f64>,
    /// Substitute proxy: shared-complement indicator times deficit mask
    /// times complement-profile cosine, hollow diagonal.
    pub w_s: DMatrix<f64>,
    /// 0/1 mask of significant co-purchase excess.
    pub a_c: DMatrix<f64>,
    /// 0/1 mask of significant co-purchase deficit.
    pub a_l: DMatrix<f64>,
    /// Null-model expected co-occurrence counts.
    pub mu: DMatrix<f64>,
    pub alpha_c: f64,
    pub alpha_l: f64,
}

/// Product degrees (transactions per good) and transaction degrees (goods
/// per transaction). Their sums agree: both count incidence edges.
pub fn degree_diagonals(log: &TransactionLog) -> (DVector<f64>, DVector<f64>) {
    let d_p = DVector::from_iterator(
        log.n_products(),
        log.by_product.iter().map(|ts| ts.len() as f64),
    );
    let d_t = DVector::from_iterator(
        log.n_transactions(),
        log.by_transaction.iter().map(|ps| ps.len() as f64),
    );
    (d_p, d_t)
}

/// Accumulates, for every unordered product pair in some common
/// transaction, the sum of `weight(t)` over shared transactions. Iterates
/// transactions in index order for deterministic rounding.
fn pair_accumulate(log: &TransactionLog, weight: impl Fn(usize) -> f64) -> DMatrix<f64> {
    let k = log.n_products();
    let mut acc = DMatrix::zeros(k, k);
    for t in 0..log.n_transactions() {
        let members = log.products_in(t);
        let w = weight(t);
        for (i, &a) in members.iter().enumerate() {
            for &b in &members[i + 1..] {
                acc[(a, b)] += w;
                acc[(b, a)] += w;
            }
        }
    }
    acc
}

/// Purchase-pattern cosine similarity between products.
///
/// Transactions are down-weighted by their size (small baskets signal
/// stronger ties), products by their degree; the result has unit diagonal
/// and entries in [0,1]. The diagonal is left in place here; proxies hollow
/// it at assembly.
pub fn complement_cosine(log: &TransactionLog) -> DMatrix<f64> {
    let (d_p, d_t) = degree_diagonals(log);
    let k = log.n_products();
    // Xi_ab = (sum over shared transactions of 1/d_t) / (d_a d_b).
    let mut xi = pair_accumulate(log, |t| 1.0 / d_t[t]);
    let mut xi_diag = vec![0.0; k];
    for p in 0..k {
        let s: f64 = log.transactions_of(p).iter().map(|&t| 1.0 / d_t[t]).sum();
        xi_diag[p] = s / (d_p[p] * d_p[p]);
    }
    for a in 0..k {
        for b in 0..k {
            if a != b {
                xi[(a, b)] /= d_p[a] * d_p[b];
            }
        }
    }
    DMatrix::from_fn(k, k, |a, b| {
        if a == b {
            1.0
        } else {
            // Clamp to [0,1]: exact by Cauchy-Schwarz, so this only sheds
            // last-bit roundoff.
            (xi[(a, b)] / (xi_diag[a].sqrt() * xi_diag[b].sqrt())).clamp(0.0, 1.0)
        }
    })
}

/// Expected co-occurrence counts under the degree-preserving bipartite
/// null: `mu_ab = d_a d_b (avg(d_t^2) - avg(d_t)) / (edges^2 / K)`.
pub fn bicm_expected(log: &TransactionLog) -> DMatrix<f64> {
    let (d_p, d_t) = degree_diagonals(log);
    let t = log.n_transactions() as f64;
    let k = log.n_products() as f64;
    let edges: f64 = d_t.sum();
    let sq: f64 = d_t.iter().map(|&d| d * d).sum();
    let factor = ((sq - edges) / t) / ((edges * edges) / k);
    let kk = log.n_products();
    DMatrix::from_fn(kk, kk, |a, b| d_p[a] * d_p[b] * factor)
}

/// Poisson CDF `F(c; mu) = P(X <= c)` by logarithmic summation: terms are
/// accumulated as `exp(j ln mu - mu - ln j!)` against a running maximum, so
/// large means cannot overflow the intermediate products.
pub fn poisson_cdf(c: i64, mu: f64) -> f64 {
    assert!(mu >= 0.0 && mu.is_finite(), "Poisson mean must be finite and nonnegative");
    if c < 0 {
        return 0.0;
    }
    if mu == 0.0 {
        return 1.0;
    }
    let ln_mu = mu.ln();
    // log-sum-exp with the largest term (at j = floor(mu) capped to c).
    let j_peak = (mu.floor() as i64).min(c).max(0);
    let log_term = |j: i64| -> f64 {
        j as f64 * ln_mu - mu - statrs::function::gamma::ln_gamma(j as f64 + 1.0)
    };
    let peak = log_term(j_peak);
    let mut sum = 0.0;
    for j in 0..=c {
        sum += (log_term(j) - peak).exp();
    }
    (peak + sum.ln()).exp().min(1.0)
}

/// Significance masks from the Poisson comparison of observed to expected
/// co-occurrence: excess (`1 - F(c-1) < alpha_c`) and deficit
/// (`F(c) < alpha_l`). Both symmetric and hollow; pairs with zero expected
/// co-occurrence are never flagged (both tests degenerate there).
pub fn significance_masks(
    log: &TransactionLog,
    alpha_c: f64,
    alpha_l: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !(alpha_c > 0.0 && alpha_c < 1.0 && alpha_l > 0.0 && alpha_l < 1.0) {
        return Err(Error::InvalidInput(format!(
            "significance levels must lie in (0,1), got alpha_c={alpha_c}, alpha_l={alpha_l}"
        )));
    }
    let mu = bicm_expected(log);
    let counts = pair_accumulate(log, |_| 1.0);
    let k = log.n_products();
    let mut a_c = DMatrix::zeros(k, k);
    let mut a_l = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in (a + 1)..k {
            let m = mu[(a, b)];
            if m <= 0.0 {
                continue;
            }
            let c = counts[(a, b)].round() as i64;
            if 1.0 - poisson_cdf(c - 1, m) < alpha_c {
                a_c[(a, b)] = 1.0;
                a_c[(b, a)] = 1.0;
            }
            if poisson_cdf(c, m) < alpha_l {
                a_l[(a, b)] = 1.0;
                a_l[(b, a)] = 1.0;
            }
        }
    }
    Ok((a_c, a_l))
}

/// Second-order cosine: similarity of two products' complement-similarity
/// profiles, `(C C)_ab / sqrt(rowsum_a rowsum_b)` for `C` the
/// purchase-pattern cosine (unit diagonal included).
pub fn substitute_cosine(cos_c: &DMatrix<f64>) -> DMatrix<f64> {
    let k = cos_c.nrows();
    let num = cos_c * cos_c;
    let row_sums: Vec<f64> = (0..k).map(|a| cos_c.row(a).sum()).collect();
    DMatrix::from_fn(k, k, |a, b| {
        (num[(a, b)] / (row_sums[a].sqrt() * row_sums[b].sqrt())).clamp(0.0, 1.0)
    })
}

/// Substitute measure: products must share at least one flagged complement,
/// co-occur significantly less than expected, and are then weighted by the
/// similarity of their complement profiles. Symmetric, hollow.
pub fn substitute_measure(
    a_c: &DMatrix<f64>,
    a_l: &DMatrix<f64>,
    cos_c: &DMatrix<f64>,
) -> DMatrix<f64> {
    let k = cos_c.nrows();
    let shared = a_c.transpose() * a_c;
    let cos_s = substitute_cosine(cos_c);
    DMatrix::from_fn(k, k, |a, b| {
        if a == b || shared[(a, b)] <= 0.0 {
            0.0
        } else {
            a_l[(a, b)] * cos_s[(a, b)]
        }
    })
}

/// Runs the full pipeline: cosine, null expectations, masks, and both
/// proxies, hollowing the diagonals.
pub fn build_proxy(log: &TransactionLog, alpha_c: f64, alpha_l: f64) -> Result<ProxyMatrices> {
    let cos_c = complement_cosine(log);
    let mu = bicm_expected(log);
    let (a_c, a_l) = significance_masks(log, alpha_c, alpha_l)?;
    let k = log.n_products();
    let w_c = DMatrix::from_fn(k, k, |a, b| if a == b { 0.0 } else { a_c[(a, b)] * cos_c[(a, b)] });
    let w_s = substitute_measure(&a_c, &a_l, &cos_c);
    Ok(ProxyMatrices {
        w_c,
        w_s,
        a_c,
        a_l,
        mu,
        alpha_c,
        alpha_l,
    })
}

/// Rows rescaled to sum to one (rows summing to zero are left untouched).
/// Optional post-processing before use as spatial weights; default usage
/// keeps raw proxies.
pub fn row_normalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for r in 0..m.nrows() {
        let s: f64 = m.row(r).sum();
        if s != 0.0 {
            for c in 0..m.ncols() {
                out[(r, c)] /= s;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::grocery_baskets;
    use approx::assert_abs_diff_eq;

    fn grocery_log() -> TransactionLog {
        TransactionLog::from_matrix(&grocery_baskets()).unwrap()
    }

    #[test]
    fn grocery_degrees_count_incidence() {
        let (d_p, d_t) = degree_diagonals(&grocery_log());
        assert_eq!(d_p.as_slice(), &[3.0, 4.0, 3.0]);
        assert_eq!(d_t.as_slice(), &[2.0, 2.0, 3.0, 3.0]);
    }

    #[test]
    fn single_transaction_with_all_goods() {
        let s = DMatrix::from_element(4, 1, 1.0);
        let log = TransactionLog::from_matrix(&s).unwrap();
        let (d_p, d_t) = degree_diagonals(&log);
        assert!(d_p.iter().all(|&d| d == 1.0));
        assert_eq!(d_t.as_slice(), &[4.0]);
    }

    #[test]
    fn identity_incidence_degrees_are_ones() {
        let log = TransactionLog::from_matrix(&DMatrix::identity(3, 3)).unwrap();
        let (d_p, d_t) = degree_diagonals(&log);
        assert!(d_p.iter().chain(d_t.iter()).all(|&d| d == 1.0));
    }

    #[test]
    fn log_rejects_empty_product_or_transaction() {
        let mut s = DMatrix::zeros(2, 2);
        s[(0, 0)] = 1.0;
        s[(0, 1)] = 1.0;
        assert!(TransactionLog::from_matrix(&s).is_err());
        let mut s2 = DMatrix::zeros(2, 2);
        s2[(0, 0)] = 1.0;
        s2[(1, 0)] = 1.0;
        assert!(TransactionLog::from_matrix(&s2).is_err());
    }

    #[test]
    fn cosine_is_one_for_identical_purchase_patterns() {
        // Products 0 and 1 appear in exactly the same transactions.
        let s = DMatrix::from_row_slice(
            3,
            3,
            &[
                1.0, 1.0, 0.0, //
                1.0, 1.0, 0.0, //
                0.0, 1.0, 1.0,
            ],
        );
        let cos = complement_cosine(&TransactionLog::from_matrix(&s).unwrap());
        assert_abs_diff_eq!(cos[(0, 1)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cosine_is_zero_for_disjoint_purchase_patterns() {
        let s = DMatrix::from_row_slice(
            2,
            4,
            &[
                1.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, 1.0,
            ],
        );
        let cos = complement_cosine(&TransactionLog::from_matrix(&s).unwrap());
        assert_eq!(cos[(0, 1)], 0.0);
    }

    /// Dense evaluation of the cosine: Xi = Dp^-1 S Dt^-1 S' Dp^-1, then
    /// normalize by the diagonal.
    fn dense_cosine(s: &DMatrix<f64>) -> DMatrix<f64> {
        let k = s.nrows();
        let bin = s.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
        let d_p = DMatrix::from_fn(k, k, |r, c| {
            if r == c {
                1.0 / bin.row(r).sum()
            } else {
                0.0
            }
        });
        let t = s.ncols();
        let d_t = DMatrix::from_fn(t, t, |r, c| {
            if r == c {
                1.0 / bin.column(r).sum()
            } else {
                0.0
            }
        });
        let xi: DMatrix<f64> = &d_p * &bin * d_t * bin.transpose() * &d_p;
        DMatrix::from_fn(k, k, |a, b| xi[(a, b)] / (xi[(a, a)].sqrt() * xi[(b, b)].sqrt()))
    }

    #[test]
    fn sparse_cosine_matches_dense_formula_on_grocery_log() {
        let sparse = complement_cosine(&grocery_log());
        let dense = dense_cosine(&grocery_baskets());
        assert_abs_diff_eq!(sparse, dense, epsilon = 1e-12);
    }

    #[test]
    fn expected_cooccurrence_matches_hand_value() {
        // d_milk = 3, d_bacon = 4, avg d_t^2 = 26/4, avg d_t = 10/4,
        // edges^2/K = 100/3: mu = 12 * 4 / (100/3) = 1.44.
        let mu = bicm_expected(&grocery_log());
        assert_abs_diff_eq!(mu[(0, 1)], 1.44, epsilon = 1e-12);
    }

    #[test]
    fn expected_cooccurrence_zero_for_singleton_transactions() {
        let mu = bicm_expected(&TransactionLog::from_matrix(&DMatrix::identity(3, 3)).unwrap());
        assert_eq!(mu.amax(), 0.0);
    }

    #[test]
    fn expected_cooccurrence_invariant_to_log_duplication() {
        // Duplicating every transaction doubles product degrees and the
        // edge count; the size normalization absorbs both and the
        // expectation is unchanged.
        let base = grocery_baskets();
        let mut doubled = DMatrix::zeros(3, 8);
        doubled.view_mut((0, 0), (3, 4)).copy_from(&base);
        doubled.view_mut((0, 4), (3, 4)).copy_from(&base);
        let mu1 = bicm_expected(&grocery_log());
        let mu2 = bicm_expected(&TransactionLog::from_matrix(&doubled).unwrap());
        assert_abs_diff_eq!(mu1, mu2, epsilon = 1e-12);
    }

    #[test]
    fn poisson_cdf_matches_direct_summation() {
        // Oracle: accumulate mu^j e^-mu / j! directly.
        let direct = |c: i64, mu: f64| -> f64 {
            let mut term = (-mu).exp();
            let mut sum = term;
            for j in 1..=c {
                term *= mu / j as f64;
                sum += term;
            }
            sum
        };
        for &(c, mu) in &[(0_i64, 5.0), (14, 5.0), (3, 0.7), (40, 22.5)] {
            assert_abs_diff_eq!(poisson_cdf(c, mu), direct(c, mu), epsilon = 1e-12);
        }
        assert_eq!(poisson_cdf(-1, 5.0), 0.0);
        assert_eq!(poisson_cdf(7, 0.0), 1.0);
        // Upper tail beyond 14 at mean 5: about 2.26e-4, comfortably under
        // a 1% threshold.
        assert_abs_diff_eq!(1.0 - poisson_cdf(14, 5.0), 2.2625367617668e-4, epsilon = 1e-15);
        assert_abs_diff_eq!(poisson_cdf(0, 5.0), (-5.0_f64).exp(), epsilon = 1e-16);
    }

    #[test]
    fn no_copurchases_is_never_flagged_complementary() {
        // Products 0 and 2 never co-occur: c = 0 gives upper tail 1.
        let s = DMatrix::from_row_slice(
            3,
            4,
            &[
                1.0, 1.0, 0.0, 0.0, //
                1.0, 1.0, 1.0, 1.0, //
                0.0, 0.0, 1.0, 1.0,
            ],
        );
        let log = TransactionLog::from_matrix(&s).unwrap();
        let (a_c, _) = significance_masks(&log, 0.5, 0.5).unwrap();
        assert_eq!(a_c[(0, 2)], 0.0);
    }

    #[test]
    fn deficit_mask_fires_on_zero_count_with_large_mean() {
        // A log engineered so one pair has expected co-occurrence above 5
        // but zero observed co-purchases: F(0) = e^-mu < 0.01. With uniform
        // transaction size the expectation is about K/4, hence the wide log.
        let k = 30;
        let t = 40;
        let mut s = DMatrix::zeros(k, t);
        // Products 0 and 1 each join many large transactions but never the
        // same one; the rest pad transaction sizes.
        for tx in 0..t {
            if tx % 2 == 0 {
                s[(0, tx)] = 1.0;
            } else {
                s[(1, tx)] = 1.0;
            }
            for p in 2..k {
                s[(p, tx)] = 1.0;
            }
        }
        let log = TransactionLog::from_matrix(&s).unwrap();
        let mu = bicm_expected(&log);
        assert!(mu[(0, 1)] > 5.0, "mu = {}", mu[(0, 1)]);
        let (_, a_l) = significance_masks(&log, 0.01, 0.01).unwrap();
        assert_eq!(a_l[(0, 1)], 1.0);
    }

    #[test]
    fn substitute_measure_zero_without_flagged_complements() {
        let k = 3;
        let a_c = DMatrix::zeros(k, k);
        let a_l = DMatrix::from_fn(k, k, |a, b| if a == b { 0.0 } else { 1.0 });
        let cos_c = complement_cosine(&grocery_log());
        let w_s = substitute_measure(&a_c, &a_l, &cos_c);
        assert_eq!(w_s.amax(), 0.0);
    }

    #[test]
    fn substitute_cosine_maximal_for_identical_complement_profiles() {
        // Rows 0 and 1 of the cosine identical by construction: the
        // second-order similarity between them is the largest in their rows.
        let cos_c = DMatrix::from_row_slice(
            3,
            3,
            &[
                1.0, 1.0, 0.2, //
                1.0, 1.0, 0.2, //
                0.2, 0.2, 1.0,
            ],
        );
        let cos_s = substitute_cosine(&cos_c);
        assert!(cos_s[(0, 1)] >= cos_s[(0, 2)]);
        assert_abs_diff_eq!(cos_s[(0, 1)], cos_s[(0, 0)], epsilon = 1e-12);
    }

    #[test]
    fn proxies_are_symmetric_hollow_and_bounded() {
        let proxy = build_proxy(&grocery_log(), 0.3, 0.3).unwrap();
        for m in [&proxy.w_c, &proxy.w_s, &proxy.a_c, &proxy.a_l] {
            assert_abs_diff_eq!(m.transpose(), m.clone_owned(), epsilon = 0.0);
            for i in 0..3 {
                assert_eq!(m[(i, i)], 0.0);
            }
            assert!(m.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn singleton_only_log_yields_zero_proxies() {
        let log = TransactionLog::from_matrix(&DMatrix::identity(4, 4)).unwrap();
        let proxy = build_proxy(&log, 0.01, 0.01).unwrap();
        assert_eq!(proxy.w_c.amax(), 0.0);
        assert_eq!(proxy.w_s.amax(), 0.0);
    }

    #[test]
    fn row_normalize_rows_sum_to_one_or_zero() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 6.0, 0.0, 0.0]);
        let n = row_normalize(&m);
        assert_abs_diff_eq!(n.row(0).sum(), 1.0, epsilon = 1e-15);
        assert_eq!(n.row(1).sum(), 0.0);
    }
}
