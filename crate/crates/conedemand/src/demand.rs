//! Consumer demand with and without consideration-set constraints.
//!
//! The consumer maximizes quasi-linear quadratic utility. Unconstrained,
//! that yields the linear demand `q = M^{-1}(delta + phi p)`. When choice
//! runs through a basket matrix `A` (goods x baskets), demand lives in the
//! conical hull of `A`'s columns instead: `q = A z` with `z >= 0`, and the
//! linear map `M^{-1}` is replaced by the projector `Sigma = A(A'MA)^+ A'`.
//!
//! Two constraints can bind separately:
//! - LF (linear function): `A`'s columns fail to span every good direction,
//!   so some bundles are unreachable at any intensity.
//! - NN (non-negativity): the stationary basket intensities would be
//!   negative and clamp at zero, producing a corner solution.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{
    check_finite, cone_coverage, nnls, pseudoinverse, InteractionMatrix, DEFAULT_REL_TOL,
};
use crate::{Error, Result};

/// Relative threshold below which a basket intensity counts as clamped at
/// zero: `z_j < ACTIVE_REL_TOL * max(z)`.
pub const ACTIVE_REL_TOL: f64 = 1e-10;

/// A consideration set: the nonnegative goods-by-baskets matrix mapping
/// basket intensities to product quantities, plus display labels.
#[derive(Debug, Clone)]
pub struct ConsiderationSet {
    a: DMatrix<f64>,
    good_labels: Vec<String>,
    basket_labels: Vec<String>,
}

impl ConsiderationSet {
    /// Validates and wraps a basket matrix. Rejects empty matrices, negative
    /// or non-finite entries, zero rows/columns (a good in no basket, or an
    /// empty basket), and exactly duplicated rows/columns.
    ///
    /// Proportional-but-unequal columns are allowed: a double helping of the
    /// same basket is a distinct purchase option.
    pub fn new(
        a: DMatrix<f64>,
        good_labels: Vec<String>,
        basket_labels: Vec<String>,
    ) -> Result<Self> {
        check_finite(&a, "basket matrix")?;
        let (k, j) = a.shape();
        if k == 0 || j == 0 {
            return Err(Error::InvalidInput(
                "basket matrix must have at least one good and one basket".into(),
            ));
        }
        if good_labels.len() != k || basket_labels.len() != j {
            return Err(Error::InvalidInput(format!(
                "label counts ({}, {}) do not match matrix shape {}x{}",
                good_labels.len(),
                basket_labels.len(),
                k,
                j
            )));
        }
        if a.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidInput(
                "basket matrix entries must be nonnegative".into(),
            ));
        }
        for r in 0..k {
            if (0..j).all(|c| a[(r, c)] == 0.0) {
                return Err(Error::InvalidInput(format!(
                    "good {:?} appears in no basket (zero row)",
                    good_labels[r]
                )));
            }
        }
        for c in 0..j {
            if (0..k).all(|r| a[(r, c)] == 0.0) {
                return Err(Error::InvalidInput(format!(
                    "basket {:?} contains no goods (zero column)",
                    basket_labels[c]
                )));
            }
        }
        for r1 in 0..k {
            for r2 in (r1 + 1)..k {
                if (0..j).all(|c| a[(r1, c)] == a[(r2, c)]) {
                    return Err(Error::InvalidInput(format!(
                        "goods {:?} and {:?} have identical basket rows",
                        good_labels[r1], good_labels[r2]
                    )));
                }
            }
        }
        for c1 in 0..j {
            for c2 in (c1 + 1)..j {
                if (0..k).all(|r| a[(r, c1)] == a[(r, c2)]) {
                    return Err(Error::InvalidInput(format!(
                        "baskets {:?} and {:?} are identical columns",
                        basket_labels[c1], basket_labels[c2]
                    )));
                }
            }
        }
        Ok(Self {
            a,
            good_labels,
            basket_labels,
        })
    }

    /// Wraps a matrix with generated labels `g1..gK`, `b1..bJ`.
    pub fn from_matrix(a: DMatrix<f64>) -> Result<Self> {
        let good_labels = (1..=a.nrows()).map(|i| format!("g{i}")).collect();
        let basket_labels = (1..=a.ncols()).map(|i| format!("b{i}")).collect();
        Self::new(a, good_labels, basket_labels)
    }

    /// The identity consideration set (each good its own singleton basket):
    /// no constraint at all.
    pub fn identity(k: usize) -> Self {
        Self::from_matrix(DMatrix::identity(k, k)).expect("identity is a valid basket matrix")
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn n_goods(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_baskets(&self) -> usize {
        self.a.ncols()
    }

    pub fn good_labels(&self) -> &[String] {
        &self.good_labels
    }

    pub fn basket_labels(&self) -> &[String] {
        &self.basket_labels
    }
}

/// Demand primitives: marginal utilities `delta`, price sensitivity
/// `phi < 0`, and nonnegative prices, with `delta + phi p > 0` so every
/// good is desirable at current prices.
#[derive(Debug, Clone)]
pub struct DemandPrimitives {
    delta: DVector<f64>,
    phi: f64,
    prices: DVector<f64>,
}

impl DemandPrimitives {
    pub fn new(delta: DVector<f64>, phi: f64, prices: DVector<f64>) -> Result<Self> {
        if !delta.iter().all(|v| v.is_finite()) || !prices.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(
                "demand primitives contain NaN or Inf".into(),
            ));
        }
        if !phi.is_finite() || phi >= 0.0 {
            return Err(Error::ModelAssumption(format!(
                "phi must be a finite negative real, got {phi}"
            )));
        }
        if delta.len() != prices.len() {
            return Err(Error::InvalidInput(format!(
                "delta has {} entries but prices has {}",
                delta.len(),
                prices.len()
            )));
        }
        if delta.iter().any(|&d| d <= 0.0) {
            return Err(Error::ModelAssumption(
                "marginal utilities delta must be strictly positive".into(),
            ));
        }
        if prices.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidInput("prices must be nonnegative".into()));
        }
        for i in 0..delta.len() {
            if delta[i] + phi * prices[i] <= 0.0 {
                return Err(Error::ModelAssumption(format!(
                    "net marginal utility delta + phi*p must be positive; good {} has {}",
                    i + 1,
                    delta[i] + phi * prices[i]
                )));
            }
        }
        Ok(Self { delta, phi, prices })
    }

    pub fn delta(&self) -> &DVector<f64> {
        &self.delta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn prices(&self) -> &DVector<f64> {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.len() == 0
    }

    /// `delta + phi p`: the marginal utility net of prices that drives every
    /// demand expression.
    pub fn net_marginal_utility(&self) -> DVector<f64> {
        &self.delta + self.prices.scale(self.phi)
    }

    /// Same primitives at different prices (revalidated).
    pub fn with_prices(&self, prices: DVector<f64>) -> Result<Self> {
        Self::new(self.delta.clone(), self.phi, prices)
    }
}

/// Which constraints bind at a computed demand point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum BindingMode {
    /// Interior: constrained demand coincides with the unconstrained point.
    #[serde(rename = "none")]
    None,
    /// Some basket intensity clamps at zero, but the baskets span all goods.
    #[serde(rename = "NN-only")]
    NnOnly,
    /// The baskets fail to cover some good direction, but no intensity
    /// clamps.
    #[serde(rename = "LF-only")]
    LfOnly,
    /// Both constraints bind.
    #[serde(rename = "NN-and-LF")]
    NnAndLf,
}

impl std::fmt::Display for BindingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BindingMode::None => "none",
            BindingMode::NnOnly => "NN-only",
            BindingMode::LfOnly => "LF-only",
            BindingMode::NnAndLf => "NN-and-LF",
        };
        f.write_str(s)
    }
}

/// A computed demand point.
#[derive(Debug, Clone)]
pub struct DemandResult {
    /// Product quantities. Constrained solves report `q = A z` exactly;
    /// non-negativity is only guaranteed when it was enforced (other modes
    /// report negative components rather than clipping them).
    pub q: DVector<f64>,
    /// Basket intensities; `None` for unconstrained demand.
    pub z: Option<DVector<f64>>,
    /// Per-basket flag: intensity clamped at zero. `None` for unconstrained
    /// demand.
    pub lambda_active: Option<Vec<bool>>,
    /// Which constraints bind.
    pub binding_mode: BindingMode,
}

fn check_dims(a: Option<&ConsiderationSet>, m: &InteractionMatrix, prim: &DemandPrimitives) -> Result<()> {
    if m.dim() != prim.len() {
        return Err(Error::InvalidInput(format!(
            "interaction matrix is {}x{} but primitives have {} goods",
            m.dim(),
            m.dim(),
            prim.len()
        )));
    }
    if let Some(cs) = a {
        if cs.n_goods() != m.dim() {
            return Err(Error::InvalidInput(format!(
                "basket matrix has {} goods but interaction matrix is {}x{}",
                cs.n_goods(),
                m.dim(),
                m.dim()
            )));
        }
    }
    Ok(())
}

/// Unconstrained linear demand `q = M^{-1}(delta + phi p)`.
///
/// Negative components are reported, not clipped; the caller decides how to
/// handle non-negativity (or uses [`demand_constrained`] with the identity
/// consideration set and `enforce_nn`).
pub fn demand_unconstrained(
    m: &InteractionMatrix,
    prim: &DemandPrimitives,
) -> Result<DemandResult> {
    check_dims(None, m, prim)?;
    let q = m.solve(&prim.net_marginal_utility());
    Ok(DemandResult {
        q,
        z: None,
        lambda_active: None,
        binding_mode: BindingMode::None,
    })
}

/// Stationary basket intensities and their feasibility data.
struct ConstrainedSolve {
    z_min_norm: DVector<f64>,
    /// `Sigma (delta + phi p)`: the constrained demand before any
    /// non-negativity handling. Equals `A z_min_norm`.
    q_stationary: DVector<f64>,
}

fn constrained_stationary(
    a: &ConsiderationSet,
    m: &InteractionMatrix,
    prim: &DemandPrimitives,
) -> Result<ConstrainedSolve> {
    let t = prim.net_marginal_utility();
    let gram = a.matrix().transpose() * m.matrix() * a.matrix();
    let gram_pinv = pseudoinverse(&gram, DEFAULT_REL_TOL)?;
    // Pseudoinverse output is orthogonal to ker(A'MA) = ker(A), so this is
    // the minimum-norm member of the stationary family.
    let z_min_norm = &gram_pinv.pinv * (a.matrix().transpose() * &t);
    let q_stationary = a.matrix() * &z_min_norm;
    Ok(ConstrainedSolve {
        z_min_norm,
        q_stationary,
    })
}

fn classify(lf_binds: bool, nn_binds: bool) -> BindingMode {
    match (nn_binds, lf_binds) {
        (false, false) => BindingMode::None,
        (true, false) => BindingMode::NnOnly,
        (false, true) => BindingMode::LfOnly,
        (true, true) => BindingMode::NnAndLf,
    }
}

/// Flags baskets clamped at zero: `z_j < ACTIVE_REL_TOL * max(z)`. An
/// all-zero solution counts every basket as clamped.
fn active_flags(z: &DVector<f64>) -> Vec<bool> {
    let zmax = z.iter().cloned().fold(0.0_f64, f64::max);
    if zmax == 0.0 {
        return vec![true; z.len()];
    }
    z.iter().map(|&v| v < ACTIVE_REL_TOL * zmax).collect()
}

/// Consideration-set-constrained demand.
///
/// With `enforce_nn` off, returns the stationary point `q = Sigma(delta +
/// phi p)` with the minimum-norm intensities (which may be negative). With
/// `enforce_nn` on, intensities solve the M-weighted non-negative least
/// squares fit of the stationary demand, producing the corner solution.
pub fn demand_constrained(
    a: &ConsiderationSet,
    m: &InteractionMatrix,
    prim: &DemandPrimitives,
    enforce_nn: bool,
) -> Result<DemandResult> {
    check_dims(Some(a), m, prim)?;
    let sol = constrained_stationary(a, m, prim)?;
    let lf_binds = cone_coverage(a.matrix())?.iter().any(|&c| !c);

    if !enforce_nn {
        let j = a.n_baskets();
        return Ok(DemandResult {
            q: sol.q_stationary,
            z: Some(sol.z_min_norm),
            lambda_active: Some(vec![false; j]),
            binding_mode: classify(lf_binds, false),
        });
    }

    // If the minimum-norm stationary intensities are already nonnegative,
    // non-negativity is slack and they are the solution as they stand.
    // Jumping to an NNLS solve here would be wrong, not just wasteful: when
    // the stationary demand sits on a low-dimensional face of the cone, the
    // active-set method returns a sparse vertex representation, and the
    // active face read off it would spuriously shrink.
    let zscale = sol.z_min_norm.amax().max(1.0);
    if sol.z_min_norm.iter().all(|&v| v >= -1e-12 * zscale) {
        let z = sol.z_min_norm.map(|v| v.max(0.0));
        let q = a.matrix() * &z;
        let flags = active_flags(&z);
        let nn_binds = flags.iter().any(|&f| f);
        return Ok(DemandResult {
            q,
            z: Some(z),
            lambda_active: Some(flags),
            binding_mode: classify(lf_binds, nn_binds),
        });
    }

    let fit = nnls(a.matrix(), &sol.q_stationary, m.matrix())?;
    let q = a.matrix() * &fit.z;
    let flags = active_flags(&fit.z);
    let nn_binds = flags.iter().any(|&f| f);
    Ok(DemandResult {
        q,
        z: Some(fit.z),
        lambda_active: Some(flags),
        binding_mode: classify(lf_binds, nn_binds),
    })
}

/// The consideration set restricted to baskets that are in use (positive
/// intensity under the non-negative solve), along with the kept indices.
fn active_face(
    a: &ConsiderationSet,
    m: &InteractionMatrix,
    prim: &DemandPrimitives,
) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let nn = demand_constrained(a, m, prim, true)?;
    let z = nn.z.expect("constrained solve returns intensities");
    let zmax = z.iter().cloned().fold(0.0_f64, f64::max);
    let kept: Vec<usize> = (0..z.len())
        .filter(|&j| zmax > 0.0 && z[j] >= ACTIVE_REL_TOL * zmax)
        .collect();
    let face = a.matrix().select_columns(kept.iter());
    Ok((face, kept))
}

/// Price Jacobian of constrained demand on the active face: `phi * Sigma`
/// with clamped baskets' columns dropped before forming the projector.
///
/// At a corner this is the one-sided derivative from the face's interior.
/// If every basket clamps, demand is locally pinned at zero and the
/// Jacobian is the zero matrix.
pub fn jacobian(
    a: &ConsiderationSet,
    m: &InteractionMatrix,
    prim: &DemandPrimitives,
) -> Result<DMatrix<f64>> {
    check_dims(Some(a), m, prim)?;
    let (face, kept) = active_face(a, m, prim)?;
    if kept.is_empty() {
        return Ok(DMatrix::zeros(a.n_goods(), a.n_goods()));
    }
    let sigma = crate::linalg::projector(&face, m)?;
    Ok(sigma * prim.phi())
}

/// Price elasticities `E_ab = J_ab * p_b / q_a` at the non-negative
/// constrained demand point.
///
/// Errors when any good has zero demand (the elasticity denominator); the
/// message lists the offending goods.
pub fn elasticity(
    a: &ConsiderationSet,
    m: &InteractionMatrix,
    prim: &DemandPrimitives,
) -> Result<DMatrix<f64>> {
    check_dims(Some(a), m, prim)?;
    let nn = demand_constrained(a, m, prim, true)?;
    let offenders: Vec<&str> = (0..nn.q.len())
        .filter(|&g| nn.q[g] <= 0.0)
        .map(|g| a.good_labels()[g].as_str())
        .collect();
    if !offenders.is_empty() {
        return Err(Error::DivisionDomain(format!(
            "elasticity undefined at zero demand for goods: {}",
            offenders.join(", ")
        )));
    }
    let jac = jacobian(a, m, prim)?;
    let k = a.n_goods();
    let p = prim.prices();
    Ok(DMatrix::from_fn(k, k, |r, c| jac[(r, c)] * p[c] / nn.q[r]))
}

/// The corner-solution wedge: non-negative constrained demand minus the
/// stationary (sign-unrestricted) constrained demand. Zero exactly when no
/// intensity clamps.
pub fn corner_wedge(
    a: &ConsiderationSet,
    m: &InteractionMatrix,
    prim: &DemandPrimitives,
) -> Result<DVector<f64>> {
    check_dims(Some(a), m, prim)?;
    let free = demand_constrained(a, m, prim, false)?;
    let nn = demand_constrained(a, m, prim, true)?;
    Ok(&nn.q - &free.q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::{
        grocery_baskets, grocery_interaction, grocery_projector_printed, ones_bump, vec3,
    };
    use approx::assert_abs_diff_eq;

    fn grocery_set() -> ConsiderationSet {
        ConsiderationSet::new(
            grocery_baskets(),
            vec!["milk".into(), "bacon".into(), "pasta".into()],
            vec!["b1".into(), "b2".into(), "b3".into(), "b4".into()],
        )
        .unwrap()
    }

    fn toy_interaction() -> InteractionMatrix {
        InteractionMatrix::new(ones_bump(3, 0.1, 0.9)).unwrap()
    }

    fn toy_primitives() -> DemandPrimitives {
        DemandPrimitives::new(vec3(2.0, 2.0, 2.0), -0.1, vec3(1.0, 1.0, 1.0)).unwrap()
    }

    #[test]
    fn consideration_set_rejects_zero_row() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 0.0]);
        assert!(matches!(
            ConsiderationSet::from_matrix(a),
            Err(Error::InvalidInput(msg)) if msg.contains("zero row")
        ));
    }

    #[test]
    fn consideration_set_rejects_zero_column() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]);
        assert!(matches!(
            ConsiderationSet::from_matrix(a),
            Err(Error::InvalidInput(msg)) if msg.contains("zero column")
        ));
    }

    #[test]
    fn consideration_set_rejects_duplicate_rows() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0]);
        assert!(matches!(
            ConsiderationSet::from_matrix(a),
            Err(Error::InvalidInput(msg)) if msg.contains("identical basket rows")
        ));
    }

    #[test]
    fn consideration_set_rejects_duplicate_columns() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        assert!(matches!(
            ConsiderationSet::from_matrix(a),
            Err(Error::InvalidInput(msg)) if msg.contains("identical columns")
        ));
    }

    #[test]
    fn consideration_set_rejects_negative_entries() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, 2.0, 1.0]);
        assert!(ConsiderationSet::from_matrix(a).is_err());
    }

    #[test]
    fn consideration_set_allows_proportional_columns() {
        // The grocery matrix's column 4 is twice column 3: legal.
        assert_eq!(grocery_set().n_baskets(), 4);
    }

    #[test]
    fn primitives_reject_positive_phi() {
        assert!(DemandPrimitives::new(vec3(1.0, 1.0, 1.0), 0.5, vec3(0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn primitives_reject_nonpositive_net_utility() {
        // delta + phi p = 1 - 2 < 0 for the first good.
        assert!(DemandPrimitives::new(vec3(1.0, 3.0, 3.0), -1.0, vec3(2.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn primitives_reject_nonpositive_delta() {
        assert!(DemandPrimitives::new(vec3(0.0, 1.0, 1.0), -0.1, vec3(0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn primitives_reject_negative_prices() {
        assert!(DemandPrimitives::new(vec3(1.0, 1.0, 1.0), -0.1, vec3(-1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn unconstrained_matches_equicorrelated_closed_form() {
        // M = 0.1*ones + 0.9*I has M*ones = 1.2*ones, so q = 1.9/1.2 per
        // good = 19/12.
        let res = demand_unconstrained(&toy_interaction(), &toy_primitives()).unwrap();
        for g in 0..3 {
            assert_abs_diff_eq!(res.q[g], 19.0 / 12.0, epsilon = 1e-12);
        }
        assert!(res.z.is_none());
        assert_eq!(res.binding_mode, BindingMode::None);
    }

    #[test]
    fn unconstrained_identity_interaction_returns_shifted_delta() {
        let m = InteractionMatrix::new(DMatrix::identity(3, 3)).unwrap();
        let phi = -0.7;
        let prices = vec3(1.0, 2.0, 3.0);
        let c = 0.4;
        let delta = prices.scale(-phi).add_scalar(c);
        let prim = DemandPrimitives::new(delta, phi, prices).unwrap();
        let res = demand_unconstrained(&m, &prim).unwrap();
        for g in 0..3 {
            assert_abs_diff_eq!(res.q[g], c, epsilon = 1e-12);
        }
    }

    #[test]
    fn constrained_grocery_demand_matches_printed_values() {
        let res = demand_constrained(&grocery_set(), &toy_interaction(), &toy_primitives(), false)
            .unwrap();
        // Exact value is 38/35 = 1.0857..., printed as 1.09.
        assert_abs_diff_eq!(res.q[0], 38.0 / 35.0, epsilon = 1e-10);
        assert_abs_diff_eq!(res.q[1], 76.0 / 35.0, epsilon = 1e-10);
        assert_abs_diff_eq!(res.q[2], 38.0 / 35.0, epsilon = 1e-10);
        // Middle good rides along with every basket, so baskets cannot span
        // all goods: the LF constraint binds.
        assert_eq!(res.binding_mode, BindingMode::LfOnly);
        // q = A z exactly.
        let z = res.z.unwrap();
        let recon = grocery_set().matrix() * z;
        assert_abs_diff_eq!(recon, res.q, epsilon = 1e-14);
    }

    #[test]
    fn constrained_interior_nn_solve_agrees_with_stationary_point() {
        let free = demand_constrained(&grocery_set(), &toy_interaction(), &toy_primitives(), false)
            .unwrap();
        let nn = demand_constrained(&grocery_set(), &toy_interaction(), &toy_primitives(), true)
            .unwrap();
        assert_abs_diff_eq!(nn.q, free.q, epsilon = 1e-9);
    }

    #[test]
    fn constrained_identity_set_equals_unconstrained() {
        let m = toy_interaction();
        let prim = toy_primitives();
        let unc = demand_unconstrained(&m, &prim).unwrap();
        let con = demand_constrained(&ConsiderationSet::identity(3), &m, &prim, false).unwrap();
        assert_abs_diff_eq!(con.q, unc.q, epsilon = 1e-10);
        assert_eq!(con.binding_mode, BindingMode::None);
    }

    /// Corner fixture: one good's net utility is so low that the stationary
    /// intensities go negative and non-negativity clamps three baskets.
    /// The expected quantities were frozen from a nested grid search
    /// maximizing the utility objective directly over z >= 0 (final step
    /// 1e-5): z* = [0.70257, 0, 0, 0], q* = [1.40514, 1.40514, 0].
    fn corner_primitives() -> DemandPrimitives {
        DemandPrimitives::new(vec3(3.0, 1.2, 0.8), -0.5, vec3(1.0, 1.0, 1.0)).unwrap()
    }

    fn grocery_interaction_matrix() -> InteractionMatrix {
        InteractionMatrix::new(grocery_interaction()).unwrap()
    }

    #[test]
    fn constrained_corner_matches_grid_search_maximum() {
        let res = demand_constrained(
            &grocery_set(),
            &grocery_interaction_matrix(),
            &corner_primitives(),
            true,
        )
        .unwrap();
        assert_abs_diff_eq!(res.q[0], 1.40514, epsilon = 1e-3);
        assert_abs_diff_eq!(res.q[1], 1.40514, epsilon = 1e-3);
        assert_abs_diff_eq!(res.q[2], 0.0, epsilon = 1e-9);
        assert_eq!(res.binding_mode, BindingMode::NnAndLf);
        let flags = res.lambda_active.unwrap();
        assert_eq!(flags.iter().filter(|&&f| f).count(), 3);
    }

    #[test]
    fn jacobian_identity_set_is_phi_times_inverse() {
        let m_raw = ones_bump(3, 0.2, 0.8);
        let m = InteractionMatrix::new(m_raw.clone()).unwrap();
        let prim = toy_primitives();
        let jac = jacobian(&ConsiderationSet::identity(3), &m, &prim).unwrap();
        let expected = m_raw.try_inverse().unwrap() * prim.phi();
        assert_abs_diff_eq!(jac, expected, epsilon = 1e-10);
    }

    #[test]
    fn jacobian_interior_grocery_matches_printed_projector() {
        // Interior at these primitives, so the face is the whole set and
        // the Jacobian is phi * Sigma; compare against the printed
        // 3-decimal projector.
        let prim = toy_primitives();
        let jac = jacobian(&grocery_set(), &grocery_interaction_matrix(), &prim).unwrap();
        let expected = grocery_projector_printed() * prim.phi();
        assert_abs_diff_eq!(jac, expected, epsilon = 1e-3);
    }

    #[test]
    fn jacobian_off_diagonal_sign_flip_under_constraint() {
        // Unconstrained, milk and bacon are substitutes (positive
        // cross-price response); constrained, bacon rides along with every
        // basket and flips to a complement, while milk and pasta become
        // stronger substitutes.
        let m = grocery_interaction_matrix();
        let prim = toy_primitives();
        let unc = m.inverse() * prim.phi();
        let con = jacobian(&grocery_set(), &m, &prim).unwrap();
        assert!(unc[(0, 1)] > 0.0);
        assert!(con[(0, 1)] < 0.0);
        assert!(unc[(0, 2)] > 0.0);
        assert!(con[(0, 2)] > unc[(0, 2)]);
    }

    #[test]
    fn elasticity_diagonal_interaction_is_minus_identity() {
        let m = InteractionMatrix::new(DMatrix::identity(2, 2)).unwrap();
        let prim = DemandPrimitives::new(
            DVector::from_vec(vec![2.0, 2.0]),
            -1.0,
            DVector::from_vec(vec![1.0, 1.0]),
        )
        .unwrap();
        let e = elasticity(&ConsiderationSet::identity(2), &m, &prim).unwrap();
        assert_abs_diff_eq!(e, -DMatrix::identity(2, 2), epsilon = 1e-10);
    }

    #[test]
    fn elasticity_errors_on_zero_demand_naming_good() {
        let err = elasticity(
            &grocery_set(),
            &grocery_interaction_matrix(),
            &corner_primitives(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::DivisionDomain(ref msg) if msg.contains("pasta")
        ));
    }

    #[test]
    fn elasticity_sign_pattern_invariant_to_scaling_prices_and_delta() {
        let m = grocery_interaction_matrix();
        let base = toy_primitives();
        let scaled = DemandPrimitives::new(base.delta() * 2.0, base.phi(), base.prices() * 2.0)
            .unwrap();
        let e1 = elasticity(&grocery_set(), &m, &base).unwrap();
        let e2 = elasticity(&grocery_set(), &m, &scaled).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(e1[(r, c)].signum(), e2[(r, c)].signum());
            }
        }
    }

    #[test]
    fn corner_wedge_zero_at_interior() {
        let w = corner_wedge(&grocery_set(), &toy_interaction(), &toy_primitives()).unwrap();
        assert!(w.amax() < 1e-9);
    }

    #[test]
    fn corner_wedge_equals_demand_difference_and_is_consistent() {
        let a = grocery_set();
        let m = grocery_interaction_matrix();
        let prim = corner_primitives();
        let w = corner_wedge(&a, &m, &prim).unwrap();
        assert!(w.amax() > 0.1);
        let free = demand_constrained(&a, &m, &prim, false).unwrap();
        let nn = demand_constrained(&a, &m, &prim, true).unwrap();
        assert_abs_diff_eq!(w, &nn.q - &free.q, epsilon = 1e-12);
        // The reported quantities reconstruct exactly from intensities, so
        // the basket-space residual of the non-negative fit vanishes.
        let z = nn.z.unwrap();
        let resid = a.matrix().transpose() * m.matrix() * (&nn.q - a.matrix() * z);
        assert!(resid.amax() < 1e-8);
    }
}
