//! Power control games on frequency-selective Gaussian interference channels.
//!
//! Users share `N` frequency bins and each splits a power budget across
//! them. Myopic users water-fill against the interference they currently
//! see; iterating that to a fixed point gives the Nash equilibrium. A
//! foresighted leader instead optimizes its allocation knowing how the
//! myopic followers will respond, which gives the Stackelberg equilibrium.
//!
//! Module map:
//!
//! - [`channel`]: channel realizations, normalization, the diagonal
//!   dominance filter and a multipath Rayleigh generator.
//! - [`waterfill`]: single-user water-filling (closed form and bisection)
//!   and achievable rates.
//! - [`game`]: iterative water-filling and follower sub-games.
//! - [`stackelberg`]: the leader's problem, an exhaustive grid oracle, the
//!   low-complexity dual ascent and two upper bounds.
//! - [`harness`]: Monte-Carlo experiments, empirical CDFs and the two
//!   worked examples.

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod game;
pub mod harness;
pub mod seed;
pub mod stackelberg;
pub mod waterfill;

pub use channel::{ChannelRealization, NormalizedChannel, RayleighProfile, Topology};
pub use error::{ChannelError, GameError, HarnessError, SolverError};
pub use game::{EquilibriumResult, GameConfig, UpdateSchedule};
pub use stackelberg::{LeaderProblem, Method, StackelbergResult};
pub use waterfill::{EffectiveNoise, PowerAllocation};

/// Converts a rate in nats to bits.
#[inline]
pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}
