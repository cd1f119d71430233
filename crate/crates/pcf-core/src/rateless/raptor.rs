//! Raptor coding: a rate-0.95 (3,60) LDPC precode composed with an LT code,
//! decoded jointly on the concatenated graph.

use super::bp::{BpState, CheckObs};
use super::ldpc::LdpcCode;
use super::lt::{lt_encode, run_bp, stream_consistency, LtGraph};
use super::soliton::DegreeDistribution;
use super::{DecodeResult, RatelessError};
use crate::channels::Observation;

/// Precode `info` into an LDPC codeword (the intermediate block), then LT
/// encode that block into `n` coded symbols.
pub fn raptor_encode(
    info: &[u8],
    ldpc: &LdpcCode,
    dist: &DegreeDistribution,
    seed: u64,
    n: usize,
) -> Result<(Vec<u8>, LtGraph, Vec<u8>), RatelessError> {
    let intermediate = ldpc.encode(info);
    let (coded, graph) = lt_encode(&intermediate, dist, seed, n)?;
    Ok((coded, graph, intermediate))
}

/// Joint sum-product decode over the LT checks (with their channel
/// observations) and the LDPC parity checks, which share the intermediate
/// variable nodes.
///
/// `hard_bits` covers the whole intermediate block; use
/// [`LdpcCode::extract_info`] to recover the payload. Success requires every
/// LDPC parity check to hold and the re-encoded LT symbols to agree with the
/// observations at their implied noise level, so a stream too short to pin
/// down the block (including one with no usable observations at all) never
/// reports success.
pub fn raptor_decode(
    observations: &[Observation],
    graph: &LtGraph,
    ldpc: &LdpcCode,
    max_iter: usize,
) -> DecodeResult {
    assert_eq!(
        graph.k, ldpc.n_variables,
        "LT graph must cover the LDPC codeword"
    );
    assert_eq!(
        observations.len(),
        graph.n,
        "one observation per coded symbol"
    );
    let mut bp = BpState::new(graph.k);
    for (j, obs) in observations.iter().enumerate() {
        if let Observation::Llr(l) = *obs {
            bp.add_check(CheckObs::Llr(l), &graph.adjacency[j]);
        }
    }
    let n_lt = bp.n_checks();
    ldpc.add_checks_to(&mut bp);
    let n_total = bp.n_checks();
    let priors = vec![0.0; graph.k];
    run_bp(&mut bp, &priors, max_iter, |bp, hard| {
        bp.count_unsatisfied(hard, n_lt..n_total) == 0
            && stream_consistency(graph, observations, hard).plausible
    })
}
