//! LT encoding and sum-product decoding on seeded generator graphs.

use super::bp::{BpState, CheckObs};
use super::soliton::DegreeDistribution;
use super::{DecodeResult, DecodeStatus, RatelessError};
use crate::channels::{Observation, LLR_MAX};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Bipartite generator graph of an LT code: coded symbol `j` is the XOR of
/// the source bits in `adjacency[j]`. `(k, n, distribution, seed)` fully
/// determine the graph, and prefixes are stable: building with a smaller `n`
/// yields the first rows of the longer graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LtGraph {
    pub k: usize,
    pub n: usize,
    /// Sorted, distinct source indices per coded symbol; never empty.
    pub adjacency: Vec<Vec<usize>>,
    pub seed: u64,
}

impl LtGraph {
    /// Draw `n` coded-symbol neighborhoods from the degree distribution.
    pub fn build(
        k: usize,
        n: usize,
        dist: &DegreeDistribution,
        seed: u64,
    ) -> Result<LtGraph, RatelessError> {
        if k == 0 || n == 0 {
            return Err(RatelessError::InvalidParam(format!(
                "graph needs k >= 1 and n >= 1, got k={k}, n={n}"
            )));
        }
        if dist.max_degree() > k {
            return Err(RatelessError::InvalidParam(format!(
                "distribution reaches degree {} on a block of {k}",
                dist.max_degree()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let adjacency = (0..n)
            .map(|_| {
                let d = dist.sample(&mut rng);
                let mut idx = rand::seq::index::sample(&mut rng, k, d).into_vec();
                idx.sort_unstable();
                idx
            })
            .collect();
        Ok(LtGraph {
            k,
            n,
            adjacency,
            seed,
        })
    }

    /// XOR the listed source bits for every coded symbol.
    pub fn encode(&self, source: &[u8]) -> Vec<u8> {
        assert_eq!(source.len(), self.k, "source length must match the graph");
        self.adjacency
            .iter()
            .map(|row| row.iter().fold(0u8, |acc, &i| acc ^ (source[i] & 1)))
            .collect()
    }

    /// The first `n` coded symbols of this graph (prefix stability makes this
    /// equal to rebuilding with the smaller length).
    pub fn truncated(&self, n: usize) -> LtGraph {
        assert!(n >= 1 && n <= self.n, "truncation length out of range");
        LtGraph {
            k: self.k,
            n,
            adjacency: self.adjacency[..n].to_vec(),
            seed: self.seed,
        }
    }

    /// Stack several graphs over the same source block into one decoding
    /// graph, in the order given. The merged graph is not seed-reproducible,
    /// so its seed field is zeroed.
    pub fn merged(parts: &[&LtGraph]) -> LtGraph {
        assert!(!parts.is_empty(), "nothing to merge");
        let k = parts[0].k;
        assert!(
            parts.iter().all(|g| g.k == k),
            "merged graphs must share the source block length"
        );
        let adjacency: Vec<Vec<usize>> = parts
            .iter()
            .flat_map(|g| g.adjacency.iter().cloned())
            .collect();
        LtGraph {
            k,
            n: adjacency.len(),
            adjacency,
            seed: 0,
        }
    }

    /// Plain-text edge list, one `coded_index source_index` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (j, row) in self.adjacency.iter().enumerate() {
            for &i in row {
                out.push_str(&format!("{j} {i}\n"));
            }
        }
        out
    }
}

/// Encode `source` into `n` coded symbols drawn from `dist`, returning the
/// codeword together with the generator graph that produced it.
pub fn lt_encode(
    source: &[u8],
    dist: &DegreeDistribution,
    seed: u64,
    n: usize,
) -> Result<(Vec<u8>, LtGraph), RatelessError> {
    let graph = LtGraph::build(source.len(), n, dist, seed)?;
    let coded = graph.encode(source);
    Ok((coded, graph))
}

/// Shared decode driver: sweep until the stopping rule fires, messages
/// freeze, or the iteration budget runs out.
pub(crate) fn run_bp(
    bp: &mut BpState,
    priors: &[f64],
    max_iter: usize,
    mut success: impl FnMut(&BpState, &[u8]) -> bool,
) -> DecodeResult {
    assert!(max_iter >= 1, "decoding needs at least one iteration");
    let mut status = DecodeStatus::IterationCap;
    let mut iterations_used = 0;
    for it in 1..=max_iter {
        let delta = bp.sweep(priors);
        iterations_used = it;
        let hard = bp.hard_decisions();
        if success(bp, &hard) {
            status = DecodeStatus::Success;
            break;
        }
        if delta < 1e-12 {
            status = DecodeStatus::Stalled;
            break;
        }
    }
    let extrinsic = bp
        .posteriors()
        .iter()
        .zip(priors)
        .map(|(&post, &pri)| (post - pri).clamp(-LLR_MAX, LLR_MAX))
        .collect();
    DecodeResult {
        status,
        hard_bits: bp.hard_decisions(),
        extrinsic_source_llrs: extrinsic,
        iterations_used,
    }
}

/// Sum-product decoding of the source block from coded-symbol observations.
///
/// Erased observations contribute nothing and are dropped from the decoding
/// graph. With erasure-or-certainty observations the message passing
/// degenerates to exact peeling: recovered bits saturate and the rest stay at
/// LLR zero, ending in `Stalled` when no resolvable symbol remains. Success
/// means the hard decisions satisfy every check with a non-erased
/// observation; an observation-free graph never reports success.
pub fn lt_decode(
    observations: &[Observation],
    graph: &LtGraph,
    priors: Option<&[f64]>,
    max_iter: usize,
) -> DecodeResult {
    assert_eq!(
        observations.len(),
        graph.n,
        "one observation per coded symbol"
    );
    let zeros;
    let priors = match priors {
        Some(p) => {
            assert_eq!(p.len(), graph.k, "one prior LLR per source bit");
            p
        }
        None => {
            zeros = vec![0.0; graph.k];
            &zeros
        }
    };
    let mut bp = BpState::new(graph.k);
    for (j, obs) in observations.iter().enumerate() {
        if let Observation::Llr(l) = *obs {
            bp.add_check(CheckObs::Llr(l), &graph.adjacency[j]);
        }
    }
    run_bp(&mut bp, priors, max_iter, |bp, hard| {
        bp.n_checks() > 0 && bp.count_unsatisfied(hard, 0..bp.n_checks()) == 0
    })
}

/// Agreement between decoded bits and the raw stream observations.
#[derive(Clone, Copy, Debug)]
pub struct StreamCheck {
    /// Non-erased observations inspected.
    pub n_effective: usize,
    /// Checks whose re-encoded parity disagrees with the observed hard bit.
    pub mismatches: usize,
    /// Average flip probability implied by the observation magnitudes.
    pub noise_estimate: f64,
    pub plausible: bool,
}

/// Likelihood-ratio test for whether `hard_bits` is the block the stream was
/// encoded from. Under that hypothesis each non-erased observation mismatches
/// its re-encoded parity with the channel flip probability, estimated from
/// the observation magnitudes as `mean(1/(1+e^|L|))`; under the alternative
/// (unrelated bits) it mismatches half the time. The test accepts when the
/// mismatch count stays below the crossing point of those two likelihoods,
/// which collapses to "every check agrees" as the flip estimate goes to zero.
///
/// `observations` may be a prefix of the stream, which is how streaming
/// receivers vet a decode before the tail has arrived.
pub fn stream_consistency(
    graph: &LtGraph,
    observations: &[Observation],
    hard_bits: &[u8],
) -> StreamCheck {
    assert!(observations.len() <= graph.n);
    assert_eq!(hard_bits.len(), graph.k);
    let mut n_effective = 0usize;
    let mut mismatches = 0usize;
    let mut flip_sum = 0.0f64;
    for (j, obs) in observations.iter().enumerate() {
        if let Observation::Llr(l) = *obs {
            n_effective += 1;
            flip_sum += 1.0 / (1.0 + l.abs().exp());
            let parity = graph.adjacency[j]
                .iter()
                .fold(0u8, |acc, &i| acc ^ (hard_bits[i] & 1));
            if parity != u8::from(l < 0.0) {
                mismatches += 1;
            }
        }
    }
    let noise_estimate = if n_effective > 0 {
        flip_sum / n_effective as f64
    } else {
        0.5
    };
    let plausible = n_effective > 0 && noise_estimate < 0.45 && {
        let allowed = n_effective as f64 * (2.0 * (1.0 - noise_estimate)).ln()
            / ((1.0 - noise_estimate) / noise_estimate).ln();
        mismatches as f64 <= allowed
    };
    StreamCheck {
        n_effective,
        mismatches,
        noise_estimate,
        plausible,
    }
}
