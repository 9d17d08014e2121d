//! Fluctuation identities for generalized refracted spectrally negative Lévy
//! processes, with an event-driven Monte Carlo simulator used to check them.
//!
//! The process U follows a Lévy process X while it is non-negative and a
//! second Lévy process Y while it is negative. All analytic quantities are
//! assembled from the scale functions of X and Y and integrals against the
//! jump measure of X.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod inversion;
pub mod levy;
pub mod mc;
pub mod quadrature;
pub mod refracted;
pub mod scale;
pub mod special;

pub use error::{Error, Result};
pub use levy::{Family, LevySpec, TruncatedSpec};
pub use mc::{
    convergence_study, errors_nonincreasing, simulate_exit, simulate_occupation, simulate_path,
    BiasBound, ConvergenceRow, EventKind, FunctionalEstimate, OccupationEstimate, PathEvent,
    SamplePath, SimConfig,
};
pub use quadrature::{CancelToken, Estimate, QuadOptions};
pub use refracted::{Certificate, DriftRefracted, Observable, RefractedEvaluator, RefractedSpec};
pub use scale::{BarrierMode, ScaleEvaluator};
