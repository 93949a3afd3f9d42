//! TAROT: an optimization-driven, per-segment FEC parameter controller,
//! together with an analytical HTTP adaptive streaming simulator used to
//! evaluate it.
//!
//! The crate is organised bottom-up:
//!
//! * [`fec`] - code-family-agnostic FEC arithmetic and the candidate library.
//! * [`loss`] - loss/goodput models and deterministic loss samplers.
//! * [`controller`] - the per-segment optimizer, its brute-force oracle and
//!   the redundancy-only baseline.
//! * [`abr`] - throughput and buffer-aware bitrate selection.
//! * [`sim`] - trace replay, manifests and the session engine.
//! * [`report`] - metrics aggregation, sweeps and CSV/JSON output.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::manual_clamp)]

pub mod abr;
pub mod controller;
pub mod error;
pub mod fec;
pub mod loss;
pub mod report;
pub mod sim;

pub use error::{Error, Result};
