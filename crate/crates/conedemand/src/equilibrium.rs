//! Supply-side counterfactuals: Bertrand pricing under arbitrary ownership,
//! monopoly closed forms, welfare, and stock-out deltas.
//!
//! Marginal costs are zero throughout, so profit is revenue. All demand here
//! is the stationary constrained demand `q = Sigma (delta + phi p)` with
//! `Sigma = A(A'MA)^+ A'`; corner handling belongs to the demand module and
//! the simulation study layered on top.

use nalgebra::{DMatrix, DVector};

use crate::demand::ConsiderationSet;
use crate::linalg::{
    min_symmetric_eigenvalue, projector, pseudoinverse, InteractionMatrix, DEFAULT_REL_TOL,
};
use crate::{Error, Result};

/// Ownership structure: which goods share a firm.
#[derive(Debug, Clone)]
pub struct Ownership {
    g: DMatrix<f64>,
    firm_of: Vec<usize>,
    firm_ids: Vec<usize>,
}

impl Ownership {
    /// Builds the symmetric hollow 0/1 matrix `G` from a goods-to-firm map:
    /// `G_ab = 1` iff goods `a != b` share a firm.
    pub fn from_firms(firm_of: Vec<usize>) -> Result<Self> {
        if firm_of.is_empty() {
            return Err(Error::InvalidInput(
                "ownership requires at least one good".into(),
            ));
        }
        let k = firm_of.len();
        let g = DMatrix::from_fn(k, k, |a, b| {
            if a != b && firm_of[a] == firm_of[b] {
                1.0
            } else {
                0.0
            }
        });
        let mut firm_ids: Vec<usize> = firm_of.clone();
        firm_ids.sort_unstable();
        firm_ids.dedup();
        Ok(Self {
            g,
            firm_of,
            firm_ids,
        })
    }

    /// Every good its own firm: `G = 0`.
    pub fn single_product(k: usize) -> Self {
        Self::from_firms((0..k).collect()).expect("k >= 1")
    }

    /// One firm owns everything: `G = ones - I`.
    pub fn monopoly(k: usize) -> Self {
        Self::from_firms(vec![0; k]).expect("k >= 1")
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn firm_of(&self) -> &[usize] {
        &self.firm_of
    }

    /// Distinct firm identifiers in ascending order; aligns with the
    /// `profits` vector of an [`EquilibriumOutcome`].
    pub fn firm_ids(&self) -> &[usize] {
        &self.firm_ids
    }

    pub fn n_goods(&self) -> usize {
        self.firm_of.len()
    }
}

/// A computed pricing equilibrium (or candidate, for the uncertified
/// partial-ownership case).
#[derive(Debug, Clone)]
pub struct EquilibriumOutcome {
    /// Equilibrium prices. Negative computed entries are reported as-is and
    /// noted in `flags`, never clipped.
    pub prices: DVector<f64>,
    /// Stationary demand at those prices.
    pub quantities: DVector<f64>,
    /// Firm identifiers aligned with `profits`.
    pub firm_ids: Vec<usize>,
    /// Revenue per firm (zero marginal cost).
    pub profits: Vec<f64>,
    /// `q'delta - 1/2 q'Mq` at the equilibrium quantities.
    pub consumer_surplus: f64,
    /// Nullspace directions of the pricing system; empty means the
    /// equilibrium is unique, otherwise prices are a family and the reported
    /// vector is the minimum-norm member.
    pub multiplicity_basis: DMatrix<f64>,
    /// Sup-norm residual of the stacked first-order conditions at the
    /// reported prices.
    pub foc_residual: f64,
    /// Diagnostics: negative prices or quantities, uncertified cases.
    pub flags: Vec<String>,
}

/// Stock-out impact of removing one good from a monopolist's assortment.
#[derive(Debug, Clone)]
pub struct StockoutDelta {
    /// Change in optimal demand, full K-vector in original good order (the
    /// stocked-out good's entry is minus its former demand).
    pub delta_q: DVector<f64>,
    /// Change in aggregate profit.
    pub delta_profit: f64,
    /// Change in consumer surplus.
    pub delta_cs: f64,
}

/// `q'delta - 1/2 q'Mq`: consumer surplus of a quantity bundle.
pub fn consumer_surplus(m: &InteractionMatrix, delta: &DVector<f64>, q: &DVector<f64>) -> f64 {
    q.dot(delta) - 0.5 * (q.transpose() * m.matrix() * q)[(0, 0)]
}

fn validate_supply_inputs(
    a: &ConsiderationSet,
    m: &InteractionMatrix,
    delta: &DVector<f64>,
    phi: f64,
) -> Result<()> {
    if !phi.is_finite() || phi >= 0.0 {
        return Err(Error::ModelAssumption(format!(
            "phi must be a finite negative real, got {phi}"
        )));
    }
    if !delta.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("delta contains NaN or Inf".into()));
    }
    if delta.iter().any(|&d| d < 0.0) {
        return Err(Error::ModelAssumption(
            "marginal utilities delta must be nonnegative".into(),
        ));
    }
    if a.n_goods() != m.dim() || delta.len() != m.dim() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: baskets {} goods, interaction {}x{}, delta {}",
            a.n_goods(),
            m.dim(),
            m.dim(),
            delta.len()
        )));
    }
    Ok(())
}

fn negative_flags(prices: &DVector<f64>, quantities: &DVector<f64>) -> Vec<String> {
    let mut flags = Vec::new();
    for (i, &p) in prices.iter().enumerate() {
        if p < 0.0 {
            flags.push(format!("negative equilibrium price for good {}: {p:.6e}", i + 1));
        }
    }
    for (i, &q) in quantities.iter().enumerate() {
        if q < 0.0 {
            flags.push(format!(
                "negative equilibrium quantity for good {}: {q:.6e}",
                i + 1
            ));
        }
    }
    flags
}

/// Residual of the stacked per-firm first-order conditions
/// `Sigma delta + phi (Omega + Sigma + Sigma o G) p` at `p`.
fn foc_residual(
    sigma: &DMatrix<f64>,
    g: &DMatrix<f64>,
    delta: &DVector<f64>,
    phi: f64,
    p: &DVector<f64>,
) -> f64 {
    let k = sigma.nrows();
    let omega = DMatrix::from_fn(k, k, |r, c| if r == c { sigma[(r, r)] } else { 0.0 });
    let w = &omega + sigma + sigma.component_mul(g);
    (sigma * delta + (w * p).scale(phi)).amax()
}

fn firm_profits(own: &Ownership, prices: &DVector<f64>, quantities: &DVector<f64>) -> Vec<f64> {
    own.firm_ids()
        .iter()
        .map(|&fid| {
            (0..own.n_goods())
                .filter(|&i| own.firm_of()[i] == fid)
                .map(|i| prices[i] * quantities[i])
                .sum()
        })
        .collect()
}

/// Bertrand equilibrium when every good is sold by its own firm:
/// `p* = -(1/phi) (Omega + Sigma)^{-1} Sigma delta`, unique because
/// `Omega + Sigma` is invertible.
pub fn bertrand_single_product(
    a: &ConsiderationSet,
    m: &InteractionMatrix,
    delta: &DVector<f64>,
    phi: f64,
) -> Result<EquilibriumOutcome> {
    validate_supply_inputs(a, m, delta, phi)?;
    let sigma = projector(a.matrix(), m)?;
    let k = sigma.nrows();
    for i in 0..k {
        if sigma[(i, i)] <= 0.0 {
            return Err(Error::Numerical(format!(
                "diagonal of the demand projector must be strictly positive; good {} has {:.3e} \
                 (inconsistent with a valid basket matrix)",
                i + 1,
                sigma[(i, i)]
            )));
        }
    }
    let omega = DMatrix::from_fn(k, k, |r, c| if r == c { sigma[(r, r)] } else { 0.0 });
    let b = &omega + &sigma;
    let eig_min = min_symmetric_eigenvalue(&b);
    let eig_max = b.clone().symmetric_eigen().eigenvalues.amax();
    if eig_min <= 1e-10 * eig_max {
        return Err(Error::Numerical(format!(
            "Omega + Sigma is numerically singular (min/max eigenvalue {:.3e}/{:.3e}); \
             this contradicts its structural invertibility and indicates bad input",
            eig_min, eig_max
        )));
    }
    let rhs = (&sigma * delta).scale(-1.0 / phi);
    let prices = b
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .unwrap_or_else(|| {
            pseudoinverse(&b, DEFAULT_REL_TOL)
                .expect("finite matrix")
                .pinv
                * &rhs
        });
    let quantities = &sigma * (delta + prices.scale(phi));
    let own = Ownership::single_product(k);
    let profits = firm_profits(&own, &prices, &quantities);
    let cs = consumer_surplus(m, delta, &quantities);
    let flags = negative_flags(&prices, &quantities);
    let residual = foc_residual(&sigma, own.matrix(), delta, phi, &prices);
    Ok(EquilibriumOutcome {
        prices,
        quantities,
        firm_ids: own.firm_ids().to_vec(),
        profits,
        consumer_surplus: cs,
        multiplicity_basis: DMatrix::zeros(k, 0),
        foc_residual: residual,
        flags,
    })
}

/// Pricing under an arbitrary ownership structure via the stacked
/// first-order conditions `W = Omega + Sigma + Sigma o G`.
///
/// Returns the minimum-norm price solution and the nullspace of `W` as the
/// multiplicity basis. For full ownership (monopoly) every member of the
/// family yields the same quantities and profit; for partial multi-product
/// ownership no closed-form equilibrium exists and the candidate is flagged
/// rather than certified.
pub fn multiproduct_equilibrium(
    a: &ConsiderationSet,
    m: &InteractionMatrix,
    delta: &DVector<f64>,
    phi: f64,
    own: &Ownership,
) -> Result<EquilibriumOutcome> {
    validate_supply_inputs(a, m, delta, phi)?;
    if own.n_goods() != a.n_goods() {
        return Err(Error::InvalidInput(format!(
            "ownership covers {} goods but baskets have {}",
            own.n_goods(),
            a.n_goods()
        )));
    }
    let sigma = projector(a.matrix(), m)?;
    let k = sigma.nrows();
    let omega = DMatrix::from_fn(k, k, |r, c| if r == c { sigma[(r, r)] } else { 0.0 });
    let w = &omega + &sigma + sigma.component_mul(own.matrix());
    let w_pinv = pseudoinverse(&w, DEFAULT_REL_TOL)?;
    let prices = (&w_pinv.pinv * (&sigma * delta)).scale(-1.0 / phi);
    let quantities = &sigma * (delta + prices.scale(phi));
    let profits = firm_profits(own, &prices, &quantities);
    let cs = consumer_surplus(m, delta, &quantities);
    let mut flags = negative_flags(&prices, &quantities);
    let n_firms = own.firm_ids().len();
    let multi_product_firms = own
        .firm_ids()
        .iter()
        .filter(|&&fid| own.firm_of().iter().filter(|&&f| f == fid).count() > 1)
        .count();
    if n_firms > 1 && multi_product_firms > 0 {
        flags.push(
            "partial multi-product ownership: candidate prices satisfy the stacked \
             first-order conditions but are not a certified equilibrium"
                .into(),
        );
    }
    let residual = foc_residual(&sigma, own.matrix(), delta, phi, &prices);
    Ok(EquilibriumOutcome {
        prices,
        quantities,
        firm_ids: own.firm_ids().to_vec(),
        profits,
        consumer_surplus: cs,
        multiplicity_basis: w_pinv.nullspace_basis,
        foc_residual: residual,
        flags,
    })
}

/// Monopoly closed forms: `q* = 1/2 Sigma delta`,
/// `Pi = -(1/4phi) delta' Sigma delta`, `CS = 3/8 delta' Sigma delta`.
///
/// Prices are the minimum-norm member of the equilibrium family; quantities,
/// profit, and surplus are invariant across the family.
pub fn monopoly_closed_forms(
    a: &ConsiderationSet,
    m: &InteractionMatrix,
    delta: &DVector<f64>,
    phi: f64,
) -> Result<EquilibriumOutcome> {
    validate_supply_inputs(a, m, delta, phi)?;
    let sigma = projector(a.matrix(), m)?;
    let k = sigma.nrows();
    let quantities = (&sigma * delta).scale(0.5);
    let quad = delta.dot(&(&sigma * delta));
    let profit = -quad / (4.0 * phi);
    let cs = 0.375 * quad;
    // Minimum-norm price from W = 2 Sigma.
    let sigma_pinv = pseudoinverse(&sigma, DEFAULT_REL_TOL)?;
    let prices = (&sigma_pinv.pinv * (&sigma * delta)).scale(-1.0 / (2.0 * phi));
    let flags = negative_flags(&prices, &quantities);
    let g = Ownership::monopoly(k);
    let residual = foc_residual(&sigma, g.matrix(), delta, phi, &prices);
    Ok(EquilibriumOutcome {
        prices,
        quantities,
        firm_ids: vec![0],
        profits: vec![profit],
        consumer_surplus: cs,
        multiplicity_basis: sigma_pinv.nullspace_basis,
        foc_residual: residual,
        flags,
    })
}

/// Impact of stocking out `good` in the monopoly setting, from the closed
/// forms on the partition of `Sigma` (the original projector's blocks, not a
/// recomputed projector):
///
/// - surviving goods `j`: `dq_j = -1/2 sigma_ji delta_i`
/// - the good itself: `dq_i = -1/2 (sigma_ii delta_i + sigma_i' delta_-i)`
///   (it loses its whole former demand)
/// - `dPi = 1/(4phi) (sigma_ii delta_i^2 + 2 delta_i sigma_i' delta_-i)`
/// - `dCS = -3/8 (sigma_ii delta_i^2 + 2 delta_i sigma_i' delta_-i)`
///
/// so `dCS/dPi = -1.5 phi` identically.
pub fn stockout_delta(
    a: &ConsiderationSet,
    m: &InteractionMatrix,
    delta: &DVector<f64>,
    phi: f64,
    good: usize,
) -> Result<StockoutDelta> {
    validate_supply_inputs(a, m, delta, phi)?;
    let k = a.n_goods();
    if good >= k {
        return Err(Error::InvalidInput(format!(
            "good index {good} out of range for {k} goods"
        )));
    }
    let sigma = projector(a.matrix(), m)?;
    let sigma_ii = sigma[(good, good)];
    let delta_i = delta[good];
    // sigma_i' delta_-i: column `good` against delta, excluding the good.
    let cross: f64 = (0..k)
        .filter(|&j| j != good)
        .map(|j| sigma[(j, good)] * delta[j])
        .sum();
    let mut delta_q = DVector::zeros(k);
    for j in 0..k {
        if j == good {
            delta_q[j] = -0.5 * (sigma_ii * delta_i + cross);
        } else {
            delta_q[j] = -0.5 * sigma[(j, good)] * delta_i;
        }
    }
    let quad = sigma_ii * delta_i * delta_i + 2.0 * delta_i * cross;
    let delta_profit = quad / (4.0 * phi);
    // Algebraically -0.375 * quad; routed through delta_profit so the
    // welfare ratio dCS = -1.5 phi dPi holds to the last bit.
    let delta_cs = -1.5 * phi * delta_profit;
    Ok(StockoutDelta {
        delta_q,
        delta_profit,
        delta_cs,
    })
}
