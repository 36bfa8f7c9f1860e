//! Bass martingale construction between two marginals in convex order.
//!
//! The library computes the stretched Brownian motion `M_t = F(t, B_t^alpha)`
//! matching prescribed initial and terminal laws, through measure-preserving
//! martingale Sinkhorn iterations in two formulations:
//!
//! - [`mpms_cdf`]: the CDF fixed point
//!   `G_a = G_mu0 ∘ (R_1 * (G_mu1^{-1} ∘ (R_1 * G_a)))`, with heat flows
//!   realized by an implicit finite-difference scheme, dual-objective
//!   tracking and W-infinity contraction diagnostics;
//! - [`mpms_density`]: the density formulation that solves the transport
//!   through the implicit relation `f1 = (alpha0 * R_1) / mu1(F1)` with
//!   clipping.
//!
//! Post-processing in [`surfaces`] produces the martingale interpolation
//! `mu_t = (R_{1-t} * F_1)_# (R_t * alpha_0)` and the local volatility
//! `sigma = F_x ∘ F^{-1}`. [`sinkhorn`] houses the classical entropic-OT
//! iteration as a structural reference, and [`market`] builds grid densities
//! from option chains via the Breeden-Litzenberger formula.

pub mod error;
pub mod heat;
pub mod market;
pub mod measures;
pub mod mpms_cdf;
pub mod mpms_density;
pub mod sinkhorn;
pub mod surfaces;
pub mod transport;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use heat::{gauss_convolve, BoundaryKind, HeatKernel, HeatPropagator, TailExtension};
pub use measures::{
    check_convex_order, density_from_spec, density_from_spec_with_limit, pushforward,
    w_inf_distance, ConvexOrderReport, DiscreteMeasure, Grid1D, MarginalSpec, TimeGrid,
};
pub use mpms_cdf::{mse_error, BassSolution, IterationRecord, MpmsCdfSolver, SolverConfig};
pub use mpms_density::{DensitySolverConfig, MpmsDensitySolver};
pub use sinkhorn::{SinkhornSolver, SinkhornState, SinkhornTrace};
pub use surfaces::{
    build_interpolation, local_vol, martingale_diagnostics, InterpolationSurface, LocalVolSurface,
    MartingaleReport,
};
pub use transport::{antiderivative, conjugate_value, monotone_map_between, ConvexPotential, MonotoneMap};
