//! Simulation and estimation toolkit for V2X vehicular positioning.
//!
//! The crate has two halves:
//!
//! * **Waveform-level ranging** — OFDM reference generation, two-tone probing,
//!   a multipath channel with exact fractional delays, and the ToA / PDoA
//!   range estimators ([`waveform`], [`channel`], [`ranging`]).
//! * **Hidden-vehicle positioning** — recovering a receiver with no
//!   line-of-sight to any anchor purely from the geometry of single-bounce
//!   multipath (AoD, AoA, TDoA per path), including multi-bounce
//!   classification and multi-epoch aggregation ([`scenario`], [`hvp`]).
//!
//! [`harness`] runs seeded Monte Carlo campaigns over both halves and
//! produces the CSV summaries consumed by the CLI.

// `!(x > 0.0)` style guards stay as written: the negation also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod files;
pub mod harness;
pub mod hvp;
pub mod ranging;
pub mod scenario;
pub mod waveform;

/// Propagation speed used throughout, meters per second.
///
/// Kept at the round 3e8 figure rather than the exact SI constant; scenario
/// files may override it via their `c` field.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

pub use channel::{ArrayConfig, ChannelTap, LinkBudget, PathLossModel};
pub use hvp::{LocusLine, PathLabel, PositionFix};
pub use ranging::{RangingResult, TonePair};
pub use scenario::{EpochObservation, PathObservation, Point2D, Scenario};
pub use waveform::{OfdmConfig, Waveform};
