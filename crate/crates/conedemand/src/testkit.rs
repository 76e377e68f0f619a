//! Shared fixtures for unit tests: the worked grocery example and its
//! companion interaction matrices.

use nalgebra::{DMatrix, DVector};

/// Milk/bacon/pasta over four baskets. The middle good rides along with
/// every purchase (row 2 = row 1 + row 3), so the matrix is rank 2 and the
/// reachable bundles form a strict cone.
pub(crate) fn grocery_baskets() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        4,
        &[
            2.0, 0.0, 1.0, 2.0, //
            2.0, 2.0, 2.0, 4.0, //
            0.0, 2.0, 1.0, 2.0,
        ],
    )
}

/// `off*ones + diag*I`: equicorrelated interaction structure.
pub(crate) fn ones_bump(k: usize, off: f64, diag: f64) -> DMatrix<f64> {
    DMatrix::from_fn(k, k, |r, c| if r == c { off + diag } else { off })
}

/// The inverse interaction matrix printed alongside the grocery example
/// (all three goods mild substitutes).
pub(crate) fn grocery_inverse_interaction() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        3,
        &[
            1.140, -0.107, -0.370, //
            -0.107, 1.030, -0.107, //
            -0.370, -0.107, 1.140,
        ],
    )
}

/// Interaction matrix recovered by inverting `grocery_inverse_interaction`
/// (symmetrized to shed the 3-decimal rounding).
pub(crate) fn grocery_interaction() -> DMatrix<f64> {
    let inv = grocery_inverse_interaction()
        .try_inverse()
        .expect("printed inverse is nonsingular");
    (&inv + inv.transpose()) * 0.5
}

/// The constrained-demand projector printed alongside the grocery example;
/// note the negative milk-pasta entries (complement under constraint).
pub(crate) fn grocery_projector_printed() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        3,
        &[
            0.884, 0.257, -0.627, //
            0.257, 0.514, 0.257, //
            -0.627, 0.257, 0.884,
        ],
    )
}

pub(crate) fn vec3(a: f64, b: f64, c: f64) -> DVector<f64> {
    DVector::from_vec(vec![a, b, c])
}
