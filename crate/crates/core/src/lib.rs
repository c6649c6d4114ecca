//! Deceiving a reactive jammer onto a sacrificial victim channel.
//!
//! Users split each slot's power budget between a shared victim channel and
//! their own communication channel. A reactive jammer always attacks the
//! channel it senses as strongest, so a sufficiently loud victim channel
//! keeps the communication channels clean.
//!
//! The crate is organised as:
//!
//! - [`config`] scenario parameters and their key=value form
//! - [`model`] channel draws, allocations and the received-power quantities
//! - [`jammer`] the reactive jammer
//! - [`oracle`] full-knowledge solvers (convex program, modified linear
//!   program, brute force)
//! - [`bounds`] analytic expectations and lower bounds of the received power
//! - [`rl`] tabular Q-learning and successive refinement with TD(0)
//! - [`sim`] slot orchestration, metrics and baselines

pub mod bounds;
pub mod config;
pub mod csvfmt;
pub mod error;
pub mod jammer;
pub mod model;
pub mod oracle;
pub mod rl;
pub mod rng;
pub mod sim;

pub use config::ScenarioConfig;
pub use error::{Error, Result};
pub use model::{Allocation, ChannelState, SlotOutcome};
