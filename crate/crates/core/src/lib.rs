//! Analytics for long-form reasoning traces annotated with backtrack severity.
//!
//! The crate ingests JSONL trace corpora, computes qualifying backtrack
//! events, gap-based burst statistics, timing and 20-bin progress profiles,
//! and replays completed-trace and prefix-causal early-exit filters under a
//! leakage-free leave-one-question protocol.

pub mod corpus;
pub mod error;
pub mod events;
pub mod filters;
pub mod profiles;
pub mod report;
pub mod stats;
pub mod synth;

pub(crate) mod util;

pub use corpus::{Corpus, MoveLabel, Segment, Trace};
pub use error::{Error, Result};

/// Number of equal-width relative-progress bins used by all profile analyses.
pub const BINS: usize = 20;
