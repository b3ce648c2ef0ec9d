//! Core algorithms for turning raw logs into weakly-labeled training data,
//! learning per-line anomaly scores from positive/unlabeled splits, and
//! grouping failure windows by root cause.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, command-line
//! orchestration and anything touching the filesystem live in the `loglab`
//! crate.
//!
//! Pipeline overview:
//!
//! ```text
//! raw text ─ ingest ─> LogMessage ─ parse ─> templates / attributes / contexts ─ taxonomy ─> α β γ scores
//!                          │
//!                          └─ weaklabel (failure windows) ─> P/U dataset ─ pumodel ─> ‖z‖ scores ─ eval
//!                                                                 │
//!                                                                 └─ rca (window vectors, clusters, balancing, ranking)
//! ```
#![cfg_attr(not(feature = "std"), no_std)]
#![warn(missing_debug_implementations, rust_2018_idioms)]

extern crate alloc;

mod error;
pub mod eval;
pub mod ingest;
pub mod math;
pub mod parse;
pub mod pumodel;
pub mod rca;
pub mod taxonomy;
pub mod weaklabel;

pub use error::{Error, Result};
