//! Deterministic numerical kernels: spectral pseudoinverse, weighted
//! projectors, active-set non-negative least squares, and cone diagnostics.
//!
//! All matrices are dense `f64` in column-major storage (the `nalgebra`
//! layout), and every reduction runs in a fixed order, so results are
//! reproducible across platforms to within floating-point determinism.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Relative singular-value cutoff used for rank decisions when the caller
/// does not supply one. Singular values below `REL_TOL * sigma_max` are
/// treated as exact zeros.
pub const DEFAULT_REL_TOL: f64 = 1e-12;

/// Absolute tolerance for the non-negative least squares KKT conditions.
pub const NNLS_KKT_TOL: f64 = 1e-8;

/// Verifies every entry is finite. All public entry points run this on
/// their inputs so NaN/Inf never propagate past construction.
pub fn check_finite(m: &DMatrix<f64>, name: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} contains NaN or Inf")))
    }
}

fn check_finite_vec(v: &DVector<f64>, name: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} contains NaN or Inf")))
    }
}

/// A symmetric positive-definite interaction matrix.
///
/// Positive definiteness is checked once at construction (smallest
/// eigenvalue above `1e-10 * trace / K`) and then relied upon everywhere,
/// so downstream code can invert and factor without re-validating.
#[derive(Debug, Clone)]
pub struct InteractionMatrix {
    m: DMatrix<f64>,
}

impl InteractionMatrix {
    /// Validates symmetry (to 1e-10 relative), finiteness, and positive
    /// definiteness, then wraps the matrix.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_finite(&m, "interaction matrix")?;
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidInput(format!(
                "interaction matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.amax().max(1.0);
        let asym = (&m - m.transpose()).amax();
        if asym > 1e-10 * scale {
            return Err(Error::ModelAssumption(format!(
                "interaction matrix is not symmetric (max asymmetry {asym:.3e})"
            )));
        }
        let k = m.nrows() as f64;
        let min_eig = min_symmetric_eigenvalue(&m);
        if min_eig <= 1e-10 * m.trace().abs() / k {
            return Err(Error::ModelAssumption(format!(
                "interaction matrix is not positive definite (min eigenvalue {min_eig:.3e})"
            )));
        }
        Ok(Self { m })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    /// Dense inverse. Safe because positive definiteness was established at
    /// construction.
    pub fn inverse(&self) -> DMatrix<f64> {
        self.m
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .unwrap_or_else(|| {
                // PD held at construction, so a Cholesky failure can only be
                // marginal conditioning; the pseudoinverse agrees to within
                // the rank cutoff in that regime.
                pseudoinverse(&self.m, DEFAULT_REL_TOL)
                    .expect("finite matrix")
                    .pinv
            })
    }

    /// Solves `M x = rhs` through the Cholesky factor.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match self.m.clone().cholesky() {
            Some(chol) => chol.solve(rhs),
            None => self.inverse() * rhs,
        }
    }
}

/// Smallest eigenvalue of a symmetric matrix (symmetrized before the solve
/// to shed roundoff).
pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Result of a spectral pseudoinverse.
#[derive(Debug, Clone)]
pub struct PseudoinverseResult {
    /// Moore–Penrose pseudoinverse.
    pub pinv: DMatrix<f64>,
    /// Numerical rank: singular values above `tolerance_used`.
    pub rank: usize,
    /// Columns span the kernel of the input; `rank + nullspace columns =
    /// input column count`.
    pub nullspace_basis: DMatrix<f64>,
    /// Absolute singular-value cutoff that was applied.
    pub tolerance_used: f64,
}

/// Moore–Penrose pseudoinverse via SVD with a relative spectral cutoff.
///
/// Singular values below `rel_tol * sigma_max` are zeroed rather than
/// inverted, which is what makes `(A'MA)^+` stable for rank-deficient
/// basket matrices.
pub fn pseudoinverse(m: &DMatrix<f64>, rel_tol: f64) -> Result<PseudoinverseResult> {
    check_finite(m, "pseudoinverse input")?;
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::InvalidInput(format!(
            "rel_tol must be in (0,1), got {rel_tol}"
        )));
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let v_t = svd.v_t.as_ref().expect("svd with v_t");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = rel_tol * sigma_max;
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > cutoff)
        .count();

    // pinv = V * diag(1/sigma over survivors) * U'
    let mut sigma_inv = DMatrix::zeros(v_t.nrows(), u.ncols());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            sigma_inv[(i, i)] = 1.0 / s;
        }
    }
    let pinv = v_t.transpose() * sigma_inv * u.transpose();

    // The SVD is thin, so recover the kernel from the symmetric
    // eigendecomposition of m'm. Rank is already decided by the singular
    // values; the kernel is spanned by the n - rank smallest eigenvectors
    // (roundoff can push their eigenvalues well above cutoff^2, so rank
    // count beats an eigenvalue threshold here).
    let gram = m.transpose() * m;
    let eig = ((&gram + gram.transpose()) * 0.5).symmetric_eigen();
    let n = m.ncols();
    let mut kernel_cols: Vec<usize> = (0..n).collect();
    kernel_cols.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("finite eigenvalues")
    });
    kernel_cols.truncate(n - rank);
    let mut nullspace_basis = DMatrix::zeros(n, kernel_cols.len());
    for (out_j, &j) in kernel_cols.iter().enumerate() {
        nullspace_basis.set_column(out_j, &eig.eigenvectors.column(j));
    }

    Ok(PseudoinverseResult {
        pinv,
        rank,
        nullspace_basis,
        tolerance_used: cutoff,
    })
}

/// The demand projector `Sigma = A (A'MA)^+ A'`.
///
/// Maps marginal utilities into product space through the basket structure:
/// with full-row-rank `A` it collapses to `M^{-1}`, and in general it is the
/// M-weighted projection of the unconstrained demand onto the basket span.
/// Symmetric positive semi-definite by construction.
pub fn projector(a: &DMatrix<f64>, m: &InteractionMatrix) -> Result<DMatrix<f64>> {
    check_finite(a, "basket matrix")?;
    if a.nrows() != m.dim() {
        return Err(Error::InvalidInput(format!(
            "basket matrix has {} rows but interaction matrix is {}x{}",
            a.nrows(),
            m.dim(),
            m.dim()
        )));
    }
    let gram = a.transpose() * m.matrix() * a;
    let pinv = pseudoinverse(&gram, DEFAULT_REL_TOL)?;
    let sigma = a * pinv.pinv * a.transpose();
    // Exact symmetry so downstream eigen-solves see a symmetric input.
    Ok((&sigma + sigma.transpose()) * 0.5)
}

/// Solution of a weighted non-negative least squares problem.
#[derive(Debug, Clone)]
pub struct NnlsSolution {
    /// The minimizer; nonnegative elementwise.
    pub z: DVector<f64>,
    /// `||design * z - target||` in the supplied weighted norm.
    pub residual_norm: f64,
    /// Indices clamped at zero.
    pub active_set: Vec<usize>,
    /// Active-set iterations used.
    pub iterations: usize,
}

/// Weighted non-negative least squares by Lawson–Hanson active sets:
/// minimizes `||design z - target||^2_weight` over `z >= 0`.
///
/// The weight must be symmetric positive semi-definite; it is factored
/// through its symmetric square root (with a `1e-12` diagonal load so
/// singular weights are usable) and the problem is solved in transformed
/// coordinates. Active sets are exact zeros, which the control-function
/// correction downstream depends on.
pub fn nnls(
    design: &DMatrix<f64>,
    target: &DVector<f64>,
    weight: &DMatrix<f64>,
) -> Result<NnlsSolution> {
    check_finite(design, "nnls design")?;
    check_finite_vec(target, "nnls target")?;
    check_finite(weight, "nnls weight")?;
    if design.nrows() != target.len() || weight.nrows() != design.nrows() {
        return Err(Error::InvalidInput(format!(
            "nnls dimensions do not conform: design {}x{}, target {}, weight {}x{}",
            design.nrows(),
            design.ncols(),
            target.len(),
            weight.nrows(),
            weight.ncols()
        )));
    }
    let root = symmetric_sqrt_loaded(weight);
    let e = &root * design;
    let f = &root * target;
    nnls_unweighted(&e, &f)
}

/// Symmetric PSD square root of `(w + w')/2 + 1e-12 I`, by eigenvalue
/// clamping. The load keeps singular weights factorable.
fn symmetric_sqrt_loaded(w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = w.nrows();
    let sym = (w + w.transpose()) * 0.5 + DMatrix::identity(n, n) * 1e-12;
    let eig = sym.symmetric_eigen();
    let mut root = DMatrix::zeros(n, n);
    for j in 0..n {
        let lam = eig.eigenvalues[j].max(0.0).sqrt();
        let col = eig.eigenvectors.column(j);
        for r in 0..n {
            for c in 0..n {
                root[(r, c)] += lam * col[r] * col[c];
            }
        }
    }
    root
}

/// Plain Lawson–Hanson on `min ||E z - f||` over `z >= 0`.
fn nnls_unweighted(e: &DMatrix<f64>, f: &DVector<f64>) -> Result<NnlsSolution> {
    let n = e.ncols();
    let max_iter = 10 * n.max(1);
    let mut passive = vec![false; n];
    let mut z = DVector::zeros(n);

    // Dual feasibility scale: gradient entries are compared against this so
    // the stopping rule is invariant to the problem's magnitude.
    let grad0 = e.transpose() * f;
    let scale = grad0.amax().max(1.0);
    let tol = 1e-12 * scale;

    let mut iterations = 0;
    while iterations < max_iter {
        // Gradient of 1/2 ||Ez - f||^2 is E'(Ez - f); w = -gradient.
        let w = e.transpose() * (f - e * &z);
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if !passive[j] && w[j] > tol {
                if best.map(|(_, bw)| w[j] > bw).unwrap_or(true) {
                    best = Some((j, w[j]));
                }
            }
        }
        let Some((enter, _)) = best else { break };
        passive[enter] = true;

        // Inner loop: least squares on the passive set, backtracking any
        // coordinates the solve pushed nonpositive.
        loop {
            iterations += 1;
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let ep = e.select_columns(idx.iter());
            let sub = ep.svd(true, true);
            let zp = sub
                .solve(f, 1e-13)
                .map_err(|msg| Error::Numerical(format!("nnls least-squares subsolve: {msg}")))?;

            if zp.iter().all(|&v| v > 0.0) {
                z = DVector::zeros(n);
                for (k, &j) in idx.iter().enumerate() {
                    z[j] = zp[k];
                }
                break;
            }

            // Step toward zp as far as nonnegativity allows, then retire the
            // coordinates that hit zero.
            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if zp[k] <= 0.0 {
                    let denom = z[j] - zp[k];
                    if denom > 0.0 {
                        alpha = alpha.min(z[j] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            let alpha = alpha.min(1.0).max(0.0);
            let mut znew = z.clone();
            for (k, &j) in idx.iter().enumerate() {
                znew[j] = z[j] + alpha * (zp[k] - z[j]);
            }
            for &j in &idx {
                if znew[j] <= tol.max(1e-14) {
                    znew[j] = 0.0;
                    passive[j] = false;
                }
            }
            z = znew;
            if iterations >= max_iter {
                let residual_norm = (f - e * &z).norm();
                return Err(Error::Convergence(format!(
                    "nnls hit the iteration cap ({max_iter}); best residual {residual_norm:.6e}"
                )));
            }
        }
    }

    let residual_norm = (f - e * &z).norm();
    let active_set: Vec<usize> = (0..n).filter(|&j| z[j] == 0.0).collect();
    Ok(NnlsSolution {
        z,
        residual_norm,
        active_set,
        iterations,
    })
}

/// For each good `k`, whether the basis vector `e_k` lies in the conical
/// hull of the basket columns, decided by an NNLS feasibility solve.
///
/// The consideration set binds as a linear-function constraint exactly when
/// some entry is false: demand can then no longer move each good
/// independently.
pub fn cone_coverage(a: &DMatrix<f64>) -> Result<Vec<bool>> {
    check_finite(a, "basket matrix")?;
    let k = a.nrows();
    let identity = DMatrix::identity(k, k);
    let mut out = Vec::with_capacity(k);
    for g in 0..k {
        let target = DVector::from_fn(k, |r, _| if r == g { 1.0 } else { 0.0 });
        let sol = nnls(a, &target, &identity)?;
        out.push(sol.residual_norm <= NNLS_KKT_TOL);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::{grocery_baskets, ones_bump};
    use approx::assert_abs_diff_eq;

    #[test]
    fn pseudoinverse_identity_is_identity() {
        let id = DMatrix::<f64>::identity(3, 3);
        let res = pseudoinverse(&id, DEFAULT_REL_TOL).unwrap();
        assert_eq!(res.rank, 3);
        assert_abs_diff_eq!(res.pinv, id, epsilon = 1e-12);
        assert_eq!(res.nullspace_basis.ncols(), 0);
    }

    #[test]
    fn pseudoinverse_zero_matrix_has_rank_zero() {
        let z = DMatrix::<f64>::zeros(2, 2);
        let res = pseudoinverse(&z, DEFAULT_REL_TOL).unwrap();
        assert_eq!(res.rank, 0);
        assert_abs_diff_eq!(res.pinv, z, epsilon = 0.0);
        assert_eq!(res.nullspace_basis.ncols(), 2);
    }

    #[test]
    fn pseudoinverse_rejects_non_finite() {
        let mut m = DMatrix::<f64>::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(
            pseudoinverse(&m, DEFAULT_REL_TOL),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn gram_of_dependent_rows_drops_rank() {
        // Row 2 = row 1 + row 3, so the 4x4 gram has rank 2 and the
        // pseudoinverse must zero out the two kernel directions.
        let a = grocery_baskets();
        let m = InteractionMatrix::new(ones_bump(3, 0.1, 0.9)).unwrap();
        let gram = a.transpose() * m.matrix() * &a;
        let res = pseudoinverse(&gram, DEFAULT_REL_TOL).unwrap();
        assert_eq!(res.rank, 2);
        assert_eq!(res.nullspace_basis.ncols(), 2);
        // Kernel columns really annihilate the gram.
        assert!((gram * &res.nullspace_basis).amax() < 1e-9);
    }

    #[test]
    fn projector_with_identity_baskets_is_inverse() {
        let m_raw = ones_bump(3, 0.2, 0.8);
        let m = InteractionMatrix::new(m_raw.clone()).unwrap();
        let a = DMatrix::identity(3, 3);
        let sigma = projector(&a, &m).unwrap();
        let m_inv = m_raw.try_inverse().unwrap();
        assert_abs_diff_eq!(sigma, m_inv, epsilon = 1e-10);
    }

    #[test]
    fn projector_rejects_indefinite_interaction() {
        let mut m = DMatrix::<f64>::identity(2, 2);
        m[(0, 0)] = -1.0;
        assert!(InteractionMatrix::new(m).is_err());
    }

    #[test]
    fn nnls_feasible_target_has_zero_residual() {
        let design = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let z_true = DVector::from_vec(vec![1.0, 2.0]);
        let target = &design * &z_true;
        let w = DMatrix::identity(3, 3);
        let sol = nnls(&design, &target, &w).unwrap();
        assert!(sol.residual_norm <= 1e-10);
        assert_abs_diff_eq!(sol.z, z_true, epsilon = 1e-8);
        assert!(sol.active_set.is_empty());
    }

    #[test]
    fn nnls_clamps_negative_component() {
        let design = DMatrix::identity(2, 2);
        let target = DVector::from_vec(vec![1.0, -1.0]);
        let w = DMatrix::identity(2, 2);
        let sol = nnls(&design, &target, &w).unwrap();
        assert_abs_diff_eq!(sol.z[0], 1.0, epsilon = 1e-12);
        assert_eq!(sol.z[1], 0.0);
        assert_eq!(sol.active_set, vec![1]);
        assert_abs_diff_eq!(sol.residual_norm, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cone_coverage_identity_covers_everything() {
        let a = DMatrix::<f64>::identity(3, 3);
        assert_eq!(cone_coverage(&a).unwrap(), vec![true, true, true]);
    }

    #[test]
    fn cone_coverage_with_linked_rows_blocks_all_goods() {
        // Row 2 = row 1 + row 3 forces (Az)_2 = (Az)_1 + (Az)_3 for every z,
        // so no standard basis vector is reachable.
        let a = grocery_baskets();
        assert_eq!(cone_coverage(&a).unwrap(), vec![false, false, false]);
    }

    #[test]
    fn cone_coverage_upper_triangular_pair() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert_eq!(cone_coverage(&a).unwrap(), vec![true, false]);
    }
}
