//! Rate-level simulation of the alternative awaiting and broadcast (AAB)
//! protocol over two-way relay fading channels.
//!
//! Two sources (0 and 2) exchange data through a relay (1). Each round the
//! stronger uplink's surplus is parked in a relay buffer and later drained
//! when the opposite downlink is the stronger one. The crate covers:
//!
//! - [`channel`]: Nakagami-m fading with distance path loss and relay placement.
//! - [`rates`]: instantaneous capacities, rate pairs, power splits and
//!   Monte-Carlo ergodic estimates.
//! - [`relay_delay`]: the FIFO fluid-bit relay buffer and its delay statistics,
//!   plus an independent literal evaluation of the delay recursion.
//! - [`queueing`]: source buffers fed by Poisson packet arrivals.
//! - [`harness`]: sweep configuration, experiment drivers and CSV output.

pub mod bits;
pub mod channel;
pub mod error;
pub mod harness;
pub mod queueing;
pub mod rates;
pub mod relay_delay;
pub mod rng;

pub use bits::Bits;
pub use channel::{ChannelRealization, ChannelSampler, FadingConfig, Geometry, Placement};
pub use error::{Error, Result};
pub use rates::{ErgodicEstimate, InstantRates};
pub use relay_delay::{DelayMode, DelayStats, Direction, RelayBacklogQueue};
