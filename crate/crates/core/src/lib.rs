//! Behavior-state sequence analysis for MOBA match telemetry.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`telemetry`] parses (or [`synth`] generates) line-delimited match logs
//!    and resamples player positions onto a uniform tick grid.
//! 2. [`abstraction`] turns each player's tick stream into one of ten behavior
//!    states using ally/enemy proximity counts, and [`segmentation`] splits the
//!    result into early, mid and late game by tower falls.
//! 3. [`seqmine`] and [`dtw`] mine, plot, cluster and embed those sequences.
//! 4. [`annotation`] stores analyst label applications and measures
//!    inter-rater agreement; [`report`] aggregates label usage by segment.

pub mod abstraction;
pub mod annotation;
pub mod dtw;
pub mod fixtures;
pub mod report;
pub mod segmentation;
pub mod seqmine;
pub mod synth;
pub mod telemetry;

pub use abstraction::{BehaviorState, DssSequence, ProximityConfig, StateSequence};
pub use segmentation::{Segment, SegmentBoundaries};
pub use telemetry::{MatchLog, PlayerId, Position, Team};
