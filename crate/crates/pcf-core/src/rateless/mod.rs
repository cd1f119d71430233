//! LT and Raptor coding over seeded generator graphs.
//!
//! The module provides a pluggable degree distribution (robust soliton by
//! default), LT encoding on reproducible random graphs, sum-product decoding
//! with optional per-source-bit prior LLRs, and a rate-0.95 (3,60) regular
//! LDPC precode that together form the Raptor code used by the simulator.
//!
//! Graphs and codes are immutable once built and can be shared across
//! threads; all decoding state lives inside a single decode call.

mod bp;
mod ldpc;
mod lt;
mod raptor;
mod soliton;

pub use ldpc::{build_regular_ldpc, LdpcCode};
pub use lt::{lt_decode, lt_encode, stream_consistency, LtGraph, StreamCheck};
pub use raptor::{raptor_decode, raptor_encode};
pub use soliton::{robust_soliton, DegreeDistribution};

pub(crate) use bp::{BpState, CheckObs};
pub(crate) use lt::run_bp;

use thiserror::Error;

/// Failures while building distributions, graphs, or codes.
#[derive(Debug, Error)]
pub enum RatelessError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("code construction failed: {0}")]
    Construction(String),
    #[error("unreadable distribution table at line {line}: {reason}")]
    BadTable { line: usize, reason: String },
}

/// How a decode attempt ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecodeStatus {
    /// Hard decisions are consistent with the stopping rule of the decoder.
    Success,
    /// Messages reached a fixed point without satisfying the stopping rule.
    Stalled,
    /// The iteration budget ran out first.
    IterationCap,
}

/// Output of a sum-product decode.
#[derive(Clone, Debug)]
pub struct DecodeResult {
    pub status: DecodeStatus,
    /// Hard decisions on the decoded block (sign of the posterior; an exact
    /// zero maps to bit 0).
    pub hard_bits: Vec<u8>,
    /// Posterior minus prior per bit, clipped to the LLR saturation range.
    pub extrinsic_source_llrs: Vec<f64>,
    pub iterations_used: usize,
}

impl DecodeResult {
    pub fn is_success(&self) -> bool {
        self.status == DecodeStatus::Success
    }
}
