//! Detecting which devices are active from one-bit energy measurements.
//!
//! Active devices send i.i.d. on-off keyed (OOK) preambles over a fast Rayleigh
//! fading channel, and the base station keeps one bit per channel-use from a
//! threshold energy detector. The slot output depends on the active set only
//! through the number `v` of active devices transmitting 'On', so the problem
//! is a noisy non-adaptive group test with `P(Z = 0 | v) = p_v`.
//!
//! The crate is organised as
//!
//! - [`model`]: domain types and the closed-form scalar laws,
//! - [`channel`]: preamble generation plus the full fading simulator and its
//!   statistically equivalent discrete fast path,
//! - [`capacity`]: the maximum rate of the weight-to-bit channel and the
//!   minimum identification cost derived from it,
//! - [`decoders`]: exhaustive ML, the threshold-test decoder, N-COMP and loopy
//!   belief propagation,
//! - [`metrics`]: recovery criteria and the seeded Monte Carlo estimator.

pub mod capacity;
pub mod channel;
pub mod decoders;
mod error;
pub mod metrics;
pub mod model;

pub use error::{Error, Result};
