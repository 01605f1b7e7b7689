//! Sparse generalized canonical correlation analysis (SGCCA).
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`]: exact linear maximization and Euclidean projection on the
//!   l1/l2 constraint sets, the building block of every solver.
//! * [`model`]: blocks, design graph, schemes, the objective and the inner components.
//! * [`bcd`]: block-coordinate solvers, including the binary-search baseline.
//! * [`gp`]: projected gradient ascent with Barzilai-Borwein steps (Horst scheme).
//! * [`lab`]: synthetic data, support-recovery metrics, design presets,
//!   sparsity grid search and CSV ingestion.
//!
//! Covariances use the `1/n` normalization throughout.

pub mod bcd;
pub mod error;
pub mod geometry;
pub mod gp;
pub mod lab;
pub mod model;
pub mod report;

pub use bcd::{
    baseline_update, bcd_sweep, fit_baseline, fit_bcd, init_coefs, random_feasible, BaselineUpdate,
    BcdConfig,
};
pub use error::{Error, Result};
pub use geometry::{
    find_phi_root, phi, project_l1_ball, project_omega, soft_threshold, solve_lm, solve_lm_p1_plus,
    solve_lm_p2_plus, solve_lm_p3_plus, Branch, LmSolution, MaxLevelSet, RootDomain, Variant,
};
pub use gp::{
    cross_spectral_norm, fit_gp, fit_gp_from_state, gradient_h, lipschitz_bound, next_step,
    project_product, BbState, GpConfig,
};
pub use lab::{
    design_preset, generate, grid_search, load_blocks, read_block, sensitivity, specificity,
    write_block, GenSpec, GridResult, GroundTruth,
};
pub use model::{
    block_cov, check_sparsity, identity_check, inner_component, objective_h, standardize_columns,
    BlockSet, CoefState, DesignGraph, Scheme,
};
pub use report::SolverReport;
