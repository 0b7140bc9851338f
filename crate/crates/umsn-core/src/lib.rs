//! Core algorithms for cooperative underwater acoustic source tracking and
//! pursuit with a team of autonomous underwater vehicles.
//!
//! The crate is organised around the pipeline an individual vehicle runs:
//!
//! * [`world`] — planar unicycle kinematics, target trajectories, and noisy
//!   bearing sensing.
//! * [`channel`] — acoustic link budget (Thorp absorption, transmission
//!   loss, SNR), TDMA slot scheduling, probabilistic packet delivery, and
//!   the wire codec for intent/measurement packets.
//! * [`graph`] — SNR-weighted communication graphs, normalized Laplacians,
//!   and algebraic connectivity.
//! * [`estimator`] — pseudolinear bearing transform and moving-window batch
//!   weighted least squares for target position/velocity.
//! * [`planner`] — receding-horizon multi-objective planning over discrete
//!   heading increments with unscented-transform belief sampling, branch
//!   and bound search, and sequential multi-agent coordination.
//!
//! The crate is `no_std` (with `alloc`) so the algorithms can run both in
//! the simulation harness and on embedded vehicle computers. All functions
//! are deterministic: randomness enters only through caller-supplied RNGs.

#![no_std]
#![warn(missing_docs)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod channel;
pub mod estimator;
pub mod graph;
pub mod planner;
pub mod world;

/// Identifier of one agent (AUV) in the team. The wire format reserves
/// four bits, so valid ids are `0..=15`.
pub type AgentId = u8;

/// Largest agent id representable in the packet header.
pub const MAX_AGENT_ID: AgentId = 15;
