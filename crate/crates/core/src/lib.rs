//! Physics-informed extreme learning machines (PIELM) for linear PDEs on
//! space-time boxes.
//!
//! A randomized single-hidden-layer network `x ↦ Σᵢ Wᵢ σ(Aᵢ·x + bᵢ)` is
//! drawn once; only the output weights `W` are fitted, by one minimum-norm
//! least-squares solve over PDE residuals at interior collocation points
//! together with boundary and initial data rows.
//!
//! The pipeline is `sampling` → `assembly` → `lstsq` → `metrics`, with
//! `problem` describing the PDE and `features` the network.

// NaN must fail these checks, so `!(a < b)` is intended.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod error;
pub mod features;
pub mod lstsq;
pub mod metrics;
pub mod pipeline;
pub mod points;
pub mod problem;
pub mod sampling;

pub use assembly::{assemble, condition_report, ConditionReport, LinearSystem, RowBlocks, Scaling};
pub use error::{PielmError, Result};
pub use features::{Activation, DerivativeBackend, FeatureNetwork, MultiIndex};
pub use lstsq::{
    residual_stats, solve_min_norm, ResidualStats, SolveMethod, SolveOptions, SolveReport,
};
pub use metrics::{convergence_study, evaluate_error, fit_log_slope, ErrorReport, OracleOptions};
pub use pipeline::{run_pipeline, PipelineOutcome, PipelineSettings, SeedBundle};
pub use points::Points;
pub use problem::{
    black_scholes_volatilities, BoxDomain, HestonParams, Normalization, OperatorTerm, PdeProblem,
    ReferenceSolution,
};
pub use sampling::{CollocationSet, McBoundarySpec, McModel, NoiseMode};
