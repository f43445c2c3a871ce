//! Stationary length distributions of closed product-form growth networks.
//!
//! A network holds `m` monomers shared between a free pool and `f` filaments.
//! Filaments are grouped into classes by their dissociation constant. The
//! crate computes the stationary laws of the free-pool size and of
//! individual filament lengths in three independent ways:
//!
//! * [`exact`]: finite-`m` evaluation through the representation of the
//!   product-form marginals as ratios of expectations over independent
//!   Poisson and geometric variables, carried out in the log domain;
//! * [`asymptotic`]: the large-`m` limit laws whose parameters solve
//!   equations built from large-deviations rate functions ([`ratefns`]);
//! * [`simulate`]: a Gillespie simulation of the attach/detach chain.
//!
//! [`applications`] covers fleet dimensioning and the single-bottleneck
//! marginal.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod applications;
pub mod asymptotic;
pub mod error;
pub mod exact;
pub mod model;
pub mod ratefns;
pub mod simulate;

pub use error::{Error, Result};
pub use model::{FilamentClass, NetworkModel, Regime, RegimeThresholds, ScaledParams};

/// Library version, stamped into every CLI output.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
