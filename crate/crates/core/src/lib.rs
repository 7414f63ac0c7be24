//! Receiver-side trajectory forecasting for cooperative vehicle safety.
//!
//! The crate models a host vehicle that tracks remote vehicles from
//! periodically broadcast safety messages, forecasts their motion while
//! messages are missing, classifies them into zones around the host and runs
//! a forward collision warning over the resulting context map.
//!
//! Module map:
//!
//! * [`trajectory`]: trips, geodetic conversion, CSV ingestion and a
//!   synthetic trip generator.
//! * [`gp`]: the compound RBF + linear Gaussian process with a
//!   leave-one-out training objective.
//! * [`bank`]: offline kernel bank generation, clustering and
//!   likelihood-based model selection.
//! * [`forecast`]: hybrid GP forecasting plus the kinematic and Kalman
//!   baselines behind one predictor interface.
//! * [`catc`]: local map, outlier gate, zone classification and app routing.
//! * [`safety`]: CAMP linear forward collision warning.
//! * [`channel`]: lossy broadcast emulation and experiment sweeps.
//! * [`metrics`]: tracking error, warning accuracy and fit-time profiling.
//! * [`harness`]: configuration, orchestration and the CLI commands.

// Negated comparisons are how validation rejects NaN; index loops walk
// parallel arrays.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bank;
pub mod catc;
pub mod channel;
pub mod error;
pub mod forecast;
pub mod gp;
pub mod harness;
pub mod metrics;
pub mod rng;
pub mod safety;
pub mod trajectory;

pub use error::{Error, Result};
