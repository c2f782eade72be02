//! Simulation and exact verification of weighted sums of stationary
//! Bernoulli random fields `X_j = f(ε_{j-k}, k ∈ Z^d)` driven by i.i.d.
//! innovations.
//!
//! The crate is organised bottom-up:
//!
//! * [`innovations`]: site-keyed reproducible i.i.d. noise and star coupling.
//! * [`fields`]: kernel, Volterra, difference and interval-construction models.
//! * [`weights`]: coefficient families `b_{n,j}` and their diagnostics.
//! * [`sums`]: weighted partial sums and closed-form variances.
//! * [`dependence`]: projective (Hannan) and coupling (Wu) coefficients, σ².
//! * [`oracle`]: exhaustive enumeration over Rademacher windows.
//! * [`harness`]: Monte Carlo experiments with goodness-of-fit verdicts.
//! * [`config`], [`output`]: experiment files and on-disk artefacts.

// NaN-aware comparisons (`!(x <= c)`) are deliberate; multi-index loops read
// better with explicit indices.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::excessive_precision)]

pub mod config;
pub mod dependence;
pub mod error;
pub mod fields;
pub mod harness;
pub mod innovations;
pub mod oracle;
pub mod output;
pub mod parallel;
pub mod stats;
pub mod sums;
pub mod svg;
pub mod weights;

pub use error::{Error, Result};
pub use fields::FieldModel;
pub use innovations::{InnovationField, InnovationSpec, LatticePoint};
pub use weights::WeightScheme;
