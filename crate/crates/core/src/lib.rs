//! Inference in linear models of independent α-stable variables.
//!
//! Work happens on parameters, never on densities: a model `Y = AX + Z`
//! with stable `X` and `Z` has stable marginals whose parameters follow
//! from `A` in closed form. The crate offers
//!
//! * scalar parameter algebra ([`stable`]),
//! * exact forward and posterior solves ([`exact`]),
//! * the iterative Stable-Jacobi solver ([`jacobi`]) and exact message
//!   passing on trees ([`tree`]),
//! * density recovery and characteristic-function checks ([`inversion`],
//!   [`oracle`]),
//! * a flow-network pipeline on top ([`flow`]).

// NaN must fail range checks, so `!(x > 0.0)` is intended throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Tests compare against rounded published values such as 0.70711.
#![cfg_attr(test, allow(clippy::approx_constant))]

pub mod error;
pub mod exact;
pub mod flow;
pub mod format;
pub mod inversion;
pub mod jacobi;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod stable;
pub mod tree;

pub use error::{Error, ErrorKind, Result};
pub use exact::{forward, forward_params, posterior, posterior_params, ForwardOptions, PosteriorResult, SkewWeighting};
pub use inversion::{density_at, pdf_from_cf, DensityGrid};
pub use jacobi::{jacobi_init, jacobi_run, jacobi_step, JacobiOptions, JacobiTrace, ShiftUpdate};
pub use linalg::{
    entrywise_abs_pow, entrywise_log_abs, normalize_unit_diagonal, signed_abs_pow, solve_linear, spectral_radius,
};
pub use model::{
    build_graph, check_convergence_conditions, load_model, save_model, ConvergenceReport, LinearStableModel, Side,
};
pub use oracle::{convolution_oracle, slicing_oracle_2var, OracleReport};
pub use stable::{
    add, cf_eval, from_transformed, make_cauchy, make_gaussian, make_levy, scale_shift, to_transformed, StableParams,
    TransformedParams,
};
pub use tree::{check_tree, csp_run, TreeCheck};

pub use nalgebra::DMatrix;

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
struct ReadmeDoctests;
