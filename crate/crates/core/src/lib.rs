//! Strategyproof facility location with predictions under the maximum-cost
//! objective, on the real line and in the l_p plane.
//!
//! The crate is organized bottom-up:
//!
//! - [`metric`]: points, profiles, outcomes and the objective.
//! - [`oracle`]: the optimal location (1-center) and prediction error.
//! - [`mechanism`]: the mechanisms, as pure maps to finite distributions.
//! - [`analysis`]: approximation ratios, guarantee curves, robustness probes.
//! - [`audit`]: grid-search audits of incentive and structural properties.
//! - [`instances`]: seeded random families and adversarial fixtures.
//! - [`harness`]: the command-line front end.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod audit;
pub mod error;
pub mod harness;
pub mod instances;
pub mod mechanism;
pub mod metric;
pub mod oracle;
pub mod report;

pub use error::{FacError, Result};
pub use mechanism::{Mechanism, MechanismId, MechanismSpec};
pub use metric::{Instance, MetricSpec, ObjectiveMode, Outcome, Point, Profile};
