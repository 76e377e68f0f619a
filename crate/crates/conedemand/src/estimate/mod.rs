//! Demand estimation on transaction panels.
//!
//! The pipeline runs bottom-up: [`panel`] aggregates raw transactions into a
//! filtered store-quarter panel with competitor-price instruments; [`design`]
//! standardizes, reduces covariates to principal components, and builds
//! spatial lags through a proxy interaction matrix; [`tsls`] is the
//! cluster-robust two-stage least-squares kernel; [`fit`] assembles the full
//! instrumented design and maps coefficients back to raw units; [`control`]
//! layers the non-negativity control function and the projector grid search
//! on top; [`markup`] turns a fit into Lerner indices and fixed-basket
//! mark-up series; [`participation`] estimates the store-traffic elasticity
//! that corrects them; [`screen`] bounds never-seen singleton rates and
//! shrinks transaction logs to smaller generating sets. [`synthetic`]
//! provides data generators with known ground truth for all of it.

pub mod control;
pub mod design;
pub mod fit;
pub mod markup;
pub mod panel;
pub mod participation;
pub mod screen;
pub mod synthetic;
pub mod tsls;

pub use control::{lf_grid_fit, nn_control_function_fit};
pub use design::{pca_reduce, spatial_lags, standardize, Pca, Standardization};
pub use fit::{assemble_design, tsls_fit, AssembledDesign, CorrectionInfo, DesignSettings, FitResult, RoundInfo};
pub use markup::{
    lerner_indices, markup_indices, markups, ExcludedMarkup, MarkupIndices, MarkupOwnership,
    MarkupRecord, MarkupTable, ParticipationCorrection,
};
pub use panel::{
    build_panel, parse_date, AttritionReport, MarketPanel, PanelFilters, PanelKey,
    ParticipationObs, Quarter, RawTransaction,
};
pub use participation::{differenced_iv, participation_elasticity, ParticipationFit};
pub use screen::{
    jeffreys_upper_bound, reduce_consideration_set, singleton_screen, SingletonVerdict,
};
pub use synthetic::{synthetic_transactions, SyntheticConfig, SyntheticTruth};
pub use tsls::{iv_regression, ols_regression, LinearFit};
