//! Graph neural networks for transductive node classification, with
//! calibration diagnostics (reliability diagrams, ECE, MECE) and post-hoc
//! calibrators including ratio-binned temperature scaling.
//!
//! The crate is organized bottom-up:
//!
//! - [`graph`]: attributed graphs, bundle loading, normalized adjacency, edge
//!   dropping, same-class-neighbor ratios and synthetic block models.
//! - [`sparse`] and [`nn`]: compressed-row matrices, dense matrices, Adam,
//!   dropout, early stopping and finite-difference gradient checks.
//! - [`models`]: GCN, GAT, SGC, gfNN and APPNP with hand-written backward passes.
//! - [`losses`]: cross-entropy and the binned calibration term with annealing.
//! - [`metrics`]: binning, reliability diagrams, ECE, MECE, NLL.
//! - [`calibrators`]: temperature scaling, histogram binning, isotonic
//!   regression, BBQ, and RBS/RRBS.
//! - [`harness`]: experiment configs, seed runs, sweeps, aggregation and reports.

pub mod calibrators;
pub mod error;
pub mod graph;
pub mod harness;
pub mod losses;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod rng;
pub mod sparse;

pub use error::{Error, Result};
