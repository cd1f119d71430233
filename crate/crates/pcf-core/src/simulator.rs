//! Frame-level Monte-Carlo trials of the relaying strategies and the batch
//! statistics that certify their throughput.
//!
//! A trial carries one information block through the diamond and reports
//! whether the destination recovered it, how many channel uses the frame
//! took, and how much every node transmitted. Batches run many seeded trials
//! in parallel and turn the outcomes into a certified rate. The
//! compress-and-forward protocols size a fixed frame from the planned
//! operating point and back the rate off until the empirical reliability
//! clears the target; the streaming protocols (decode-and-forward,
//! amplify-and-forward) let every trial run until its receiver locks and
//! read the rate off an order statistic of the stopping times.
//!
//! All randomness derives from per-trial seeds through independent
//! per-purpose streams, so outcomes are reproducible and do not depend on
//! event timing or thread scheduling.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::channels::{
    bpsk, cascade_channel, ChannelError, ChannelModel, Observation, LLR_MAX,
};
use crate::info::{correlation_model, quantized_crossover};
use crate::joint::{joint_decode, SideInfoModel};
use crate::optimizer::{
    af_rate, best_relay_df_rate, optimize_pcf, pure_cf_plan, NetworkCapacities, OptimizeOpts,
    PcfPlan,
};
use crate::rateless::{
    build_regular_ldpc, lt_decode, lt_encode, raptor_decode, raptor_encode, robust_soliton,
    run_bp, stream_consistency, BpState, CheckObs, DegreeDistribution, LdpcCode, LtGraph,
    RatelessError,
};

/// Seed of the shared precode; fixed so every node in a trial builds the
/// same code book.
const LDPC_SEED: u64 = 1;

/// Smallest non-zero rate back-off the certification ladder will try.
const MIN_MARGIN: f64 = 0.01;

/// How many times the ladder doubles the back-off before giving up.
const MAX_DOUBLINGS: usize = 6;

/// Refinement steps once a passing back-off is bracketed.
const BISECTION_STEPS: usize = 5;

/// Sum-product sweeps per streaming poll. Message state is warm-started
/// between polls, so the effective budget grows with the stream instead of
/// resetting at every attempt.
const STREAM_POLL_SWEEPS: usize = 12;

// Per-purpose randomness lanes within one trial seed.
const LANE_INFO: u64 = 0;
const LANE_STREAM_SEEDS: u64 = 1;
const LANE_S1_NOISE: u64 = 2;
const LANE_S2_NOISE: u64 = 3;
const LANE_R1_TIES: u64 = 4;
const LANE_R2_TIES: u64 = 5;
const LANE_R1D_NOISE: u64 = 6;
const LANE_R2D_NOISE: u64 = 7;
const LANE_AF_NOISE: u64 = 8;

/// Forwarding strategy a batch simulates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Protocol {
    /// Partial compress-and-forward: one relay compresses, the other
    /// alternates between compressing and amplifying.
    Pcf,
    /// Both relays compress for the whole frame.
    Cf,
    /// Both relays decode the message and re-encode it downstream.
    Df,
    /// The stronger relay path amplifies every symbol.
    Af,
}

impl Protocol {
    /// Lowercase tag used in reports and file output.
    pub fn label(self) -> &'static str {
        match self {
            Protocol::Pcf => "pcf",
            Protocol::Cf => "cf",
            Protocol::Df => "df",
            Protocol::Af => "af",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pcf" => Ok(Protocol::Pcf),
            "cf" => Ok(Protocol::Cf),
            "df" => Ok(Protocol::Df),
            "af" => Ok(Protocol::Af),
            other => Err(format!(
                "unknown protocol '{other}' (expected pcf, cf, df, or af)"
            )),
        }
    }
}

/// Why a simulation could not be set up or carried out.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation setup: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Code(#[from] RatelessError),
}

/// Inputs for a batch of trials of one protocol on one network draw.
#[derive(Clone, Debug)]
pub struct ProtocolConfig {
    pub protocol: Protocol,
    /// Information bits per frame.
    pub k: usize,
    pub ch_s1: ChannelModel,
    pub ch_s2: ChannelModel,
    pub ch_1d: ChannelModel,
    pub ch_2d: ChannelModel,
    /// Optional precomputed operating point; solved from the channels when
    /// absent.
    pub plan: Option<PcfPlan>,
    /// Fountain degree-distribution parameters.
    pub lt_c: f64,
    pub lt_delta: f64,
    /// Sum-product sweep budget for single-stream decoders.
    pub decoder_iterations: usize,
    /// Outer rounds of the two-stream exchange decoder.
    pub joint_iterations: usize,
    /// Sweeps per side inside one exchange round.
    pub inner_iterations: usize,
    /// First rate back-off the certification ladder tries.
    pub overhead_margin: f64,
    /// Channel uses between decode attempts in streaming trials.
    pub df_granularity: usize,
    /// Fraction of trials that must succeed before a rate is certified.
    pub reliability_target: f64,
    pub trials: usize,
    pub base_seed: u64,
}

impl ProtocolConfig {
    /// A configuration with library defaults for everything except the
    /// protocol and the four links.
    pub fn new(
        protocol: Protocol,
        ch_s1: ChannelModel,
        ch_s2: ChannelModel,
        ch_1d: ChannelModel,
        ch_2d: ChannelModel,
    ) -> Self {
        ProtocolConfig {
            protocol,
            k: 4000,
            ch_s1,
            ch_s2,
            ch_1d,
            ch_2d,
            plan: None,
            lt_c: 0.03,
            lt_delta: 0.5,
            decoder_iterations: 60,
            joint_iterations: 40,
            inner_iterations: 2,
            overhead_margin: 0.1,
            df_granularity: 100,
            reliability_target: 0.99,
            trials: 200,
            base_seed: 7,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for ch in [&self.ch_s1, &self.ch_s2, &self.ch_1d, &self.ch_2d] {
            ch.validate()?;
        }
        if self.k < 100 {
            return Err(SimError::InvalidConfig(format!(
                "block length {} is too small for the precode (need at least 100)",
                self.k
            )));
        }
        if self.trials == 0 {
            return Err(SimError::InvalidConfig("need at least one trial".into()));
        }
        if self.decoder_iterations == 0 || self.joint_iterations == 0 || self.inner_iterations == 0
        {
            return Err(SimError::InvalidConfig(
                "iteration budgets must be positive".into(),
            ));
        }
        if self.df_granularity == 0 {
            return Err(SimError::InvalidConfig(
                "attempt granularity must be positive".into(),
            ));
        }
        if !(self.overhead_margin >= 0.0 && self.overhead_margin.is_finite()) {
            return Err(SimError::InvalidConfig(format!(
                "overhead margin {} must be finite and non-negative",
                self.overhead_margin
            )));
        }
        if !(0.0..=1.0).contains(&self.reliability_target) {
            return Err(SimError::InvalidConfig(format!(
                "reliability target {} must lie in [0, 1]",
                self.reliability_target
            )));
        }
        if let Some(p) = &self.plan {
            let sane = p.rate.is_finite()
                && p.rate >= 0.0
                && (0.0..=1.0).contains(&p.alpha1)
                && p.alpha2 >= 0.0
                && p.rx >= 0.0
                && p.ry >= 0.0;
            if !sane {
                return Err(SimError::InvalidConfig(
                    "supplied operating point has out-of-range fields".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Everything measured in one frame-level trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialOutcome {
    pub success: bool,
    /// Channel uses consumed by the slowest leg of the frame.
    pub frame_uses: usize,
    /// Symbols the source put on the air.
    pub source_symbols: usize,
    /// Symbols each relay put on its destination link, in physical order.
    pub relay_symbols: [usize; 2],
    /// Decoder rounds spent across the trial's receivers.
    pub decoder_rounds: usize,
    pub seed: u64,
}

/// Aggregate of one trial batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchStats {
    /// Planned information rate before any back-off.
    pub nominal_rate: f64,
    /// Rate the batch actually certified: information bits over the frame
    /// length that met the reliability target, zero when none did.
    pub achieved_rate: f64,
    /// Fraction of trials that succeeded at the certified operating point.
    pub reliability: f64,
    pub trials: usize,
    pub mean_decoder_rounds: f64,
    /// Rate back-off at which the batch was certified (always zero for the
    /// streaming protocols, which have no fixed frame to pad).
    pub margin_used: f64,
}

/// Precomputed code book and operating point shared by every trial of one
/// configuration.
pub struct SimContext {
    pub ldpc: LdpcCode,
    pub dist: DegreeDistribution,
    pub caps: NetworkCapacities,
    pub plan: Option<PcfPlan>,
}

impl SimContext {
    pub fn new(cfg: &ProtocolConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let ldpc = build_regular_ldpc(intermediate_size(cfg.k), LDPC_SEED)?;
        let dist = robust_soliton(ldpc.n_variables, cfg.lt_c, cfg.lt_delta)?;
        let caps =
            NetworkCapacities::from_channels(&cfg.ch_s1, &cfg.ch_s2, &cfg.ch_1d, &cfg.ch_2d)?;
        let plan = match cfg.protocol {
            Protocol::Pcf => Some(cfg.plan.unwrap_or_else(|| {
                let model = correlation_model(&cfg.ch_s1, &cfg.ch_s2);
                optimize_pcf(&caps, &model, &OptimizeOpts::default())
            })),
            Protocol::Cf => Some(cfg.plan.unwrap_or_else(|| {
                let model = correlation_model(&cfg.ch_s1, &cfg.ch_s2);
                pure_cf_plan(&caps, &model)
            })),
            Protocol::Df | Protocol::Af => None,
        };
        Ok(SimContext {
            ldpc,
            dist,
            caps,
            plan,
        })
    }
}

/// Precode block length for `k` information bits: the next multiple of 20
/// at or above `k / 0.95`, matching the precode rate.
pub fn intermediate_size(k: usize) -> usize {
    ((k as f64 / 0.95).ceil() as usize).next_multiple_of(20)
}

/// Independent deterministic randomness stream for one purpose within a
/// trial, so noise on one link does not depend on traffic on another.
fn sub_rng(seed: u64, lane: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(lane.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

fn draw_info(ldpc: &LdpcCode, k: usize, seed: u64) -> Vec<u8> {
    debug_assert!(k <= ldpc.n_info());
    let mut info = vec![0u8; ldpc.n_info()];
    let mut rng = sub_rng(seed, LANE_INFO);
    for bit in info.iter_mut().take(k) {
        *bit = rng.random_range(0..2);
    }
    info
}

/// One-bit scalar quantization of channel observations: the sign of the
/// log-likelihood ratio, with erasures and exact ties resolved by a fair
/// coin. `quantized_crossover` reports the error rate of this map.
fn quantize(obs: &[Observation], rng: &mut impl Rng) -> Vec<u8> {
    obs.iter()
        .map(|o| match *o {
            Observation::Llr(l) if l > 0.0 => 0,
            Observation::Llr(l) if l < 0.0 => 1,
            _ => rng.random_range(0..2),
        })
        .collect()
}

/// Belief about a broadcast symbol implied by a belief about its quantized
/// copy: the LLR degrades through a crossover channel at the quantizer's
/// design error rate. Identity at zero error; saturated input comes out at
/// `ln((1-pe)/pe)`.
fn belief_through_quantizer(llr: f64, pe: f64) -> f64 {
    if pe <= 0.0 {
        llr
    } else {
        2.0 * ((1.0 - 2.0 * pe) * (0.5 * llr).tanh()).atanh()
    }
}

/// Sample-level amplify-and-forward over two soft-noise hops: the relay
/// rescales its complex-baseband observation to unit average power and the
/// destination forms the exact log-likelihood ratio of the compound
/// channel, whose effective signal-to-noise ratio is `g1*g2/(g1+g2+1)`.
fn af_biawgn_path(bits: &[u8], snr1: f64, snr2: f64, rng: &mut impl Rng) -> Vec<Observation> {
    if snr1 <= 0.0 || snr2 <= 0.0 {
        return vec![Observation::Llr(0.0); bits.len()];
    }
    let n1 = 1.0 / snr1;
    let n2 = 1.0 / snr2;
    let gain = (1.0 / (1.0 + n1)).sqrt();
    let dev1 = (n1 / 2.0).sqrt();
    let dev2 = (n2 / 2.0).sqrt();
    let denom = gain * gain * n1 + n2;
    bits.iter()
        .map(|&b| {
            let at_relay = bpsk(b) + dev1 * rng.sample::<f64, _>(StandardNormal);
            let at_dest = gain * at_relay + dev2 * rng.sample::<f64, _>(StandardNormal);
            Observation::Llr((4.0 * gain * at_dest / denom).clamp(-LLR_MAX, LLR_MAX))
        })
        .collect()
}

/// Observations at the destination after source symbols ride through an
/// amplifying relay. Soft-noise links get the sample-level path; erasure
/// and crossover links compose exactly, so they are sampled through the
/// cascade model.
fn af_path(
    bits: &[u8],
    ch_s: &ChannelModel,
    ch_d: &ChannelModel,
    rng: &mut impl Rng,
) -> Result<Vec<Observation>, ChannelError> {
    match (*ch_s, *ch_d) {
        (ChannelModel::BiAwgn(g1), ChannelModel::BiAwgn(g2)) => {
            Ok(af_biawgn_path(bits, g1, g2, rng))
        }
        _ => Ok(cascade_channel(ch_s, ch_d)?.transmit(bits, rng)),
    }
}

/// Symbol counts for one compress-and-forward frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameLayout {
    /// Broadcast symbols both relays observe and describe.
    pub broadcast: usize,
    /// Tail symbols the alternating relay amplifies instead of describing.
    pub amplified: usize,
    /// Fountain symbols carrying the alternating relay's description.
    pub desc_x: usize,
    /// Fountain symbols carrying the pure relay's description.
    pub desc_y: usize,
}

impl FrameLayout {
    /// Sizes every leg of a frame for `k` information bits at the plan's
    /// operating point, with the payload-bearing counts grown by `margin`:
    /// once for the outer code and once more for each description stream.
    pub fn size(plan: &PcfPlan, caps: &NetworkCapacities, k: usize, margin: f64) -> FrameLayout {
        debug_assert!(plan.rate > 0.0, "cannot size a frame for a dead plan");
        let caps = if plan.swapped { caps.swapped() } else { *caps };
        let grow = 1.0 + margin;
        let frame = (k as f64 * grow / plan.rate).ceil();
        let broadcast = ((plan.alpha1 * frame).ceil() as usize).min(frame as usize);
        let amplified = ((plan.alpha2 * frame).ceil() as usize).min(frame as usize);
        FrameLayout {
            broadcast,
            amplified,
            desc_x: stream_budget(broadcast as f64 * plan.rx, caps.c_1d, grow),
            desc_y: stream_budget(broadcast as f64 * plan.ry, caps.c_2d, grow),
        }
    }

    /// Channel uses the frame occupies: the alternating relay's leg carries
    /// its description plus both halves of the amplified exchange, the pure
    /// relay's leg only its description, and the slower leg ends the frame.
    pub fn frame_uses(&self) -> usize {
        let alternating = self.broadcast + self.desc_x + 2 * self.amplified;
        let pure = self.broadcast + self.desc_y;
        alternating.max(pure)
    }
}

/// Fountain symbols needed to push `bits` of description across a link of
/// capacity `cap`, padded by `grow`. Zero when there is nothing to send or
/// no link to send it on.
fn stream_budget(bits: f64, cap: f64, grow: f64) -> usize {
    if bits <= 1e-12 || cap <= 1e-12 {
        0
    } else {
        (bits * grow / cap).ceil() as usize
    }
}

/// Fountain-encodes a relay's quantized block and sends it down its link.
/// `None` when the plan allocates the stream no symbols.
fn send_description(
    bits: &[u8],
    dist: &DegreeDistribution,
    stream_seed: u64,
    n: usize,
    ch: &ChannelModel,
    rng: &mut ChaCha8Rng,
) -> Option<(Vec<Observation>, LtGraph)> {
    if n == 0 {
        return None;
    }
    let (coded, graph) =
        lt_encode(bits, dist, stream_seed, n).expect("description stream sized by the layout");
    Some((ch.transmit(&coded, rng), graph))
}

/// Runs one compress-and-forward frame (partial or pure, depending on the
/// plan) at the context's operating point backed off by `margin`.
pub fn run_pcf_trial_with(
    ctx: &SimContext,
    cfg: &ProtocolConfig,
    margin: f64,
    seed: u64,
) -> TrialOutcome {
    let plan = ctx.plan.expect("compress-and-forward trials carry a plan");
    let mut outcome = TrialOutcome {
        success: false,
        frame_uses: 0,
        source_symbols: 0,
        relay_symbols: [0, 0],
        decoder_rounds: 0,
        seed,
    };
    if plan.rate <= 0.0 {
        return outcome;
    }
    let layout = FrameLayout::size(&plan, &ctx.caps, cfg.k, margin);
    let (k1, k2) = (layout.broadcast, layout.amplified);
    let (n_x, n_y) = (layout.desc_x, layout.desc_y);
    outcome.frame_uses = layout.frame_uses();
    outcome.source_symbols = k1 + k2;
    let (alternating_sent, pure_sent) = (n_x + k2, n_y);
    outcome.relay_symbols = if plan.swapped {
        [pure_sent, alternating_sent]
    } else {
        [alternating_sent, pure_sent]
    };
    if k1 + k2 == 0 {
        return outcome;
    }

    // Work in role order: index 1 is the alternating relay, whatever the
    // physical labels say.
    let (ch_s1, ch_s2, ch_1d, ch_2d) = if plan.swapped {
        (&cfg.ch_s2, &cfg.ch_s1, &cfg.ch_2d, &cfg.ch_1d)
    } else {
        (&cfg.ch_s1, &cfg.ch_s2, &cfg.ch_1d, &cfg.ch_2d)
    };

    let mut rng_seeds = sub_rng(seed, LANE_STREAM_SEEDS);
    let source_seed: u64 = rng_seeds.random();
    let seed_x: u64 = rng_seeds.random();
    let seed_y: u64 = rng_seeds.random();

    let info = draw_info(&ctx.ldpc, cfg.k, seed);
    let (coded, source_graph, _intermediate) =
        raptor_encode(&info, &ctx.ldpc, &ctx.dist, source_seed, k1 + k2)
            .expect("outer encoder inputs are sized by the layout");

    // Broadcast phase: both relays quantize what they hear, describe it with
    // fountain streams, and the destination decodes the two correlated
    // descriptions jointly.
    let mut fused = vec![Observation::Erased; k1];
    if k1 > 0 {
        let model = SideInfoModel::new(quantized_crossover(ch_s1), quantized_crossover(ch_s2));
        let obs_r1 = ch_s1.transmit(&coded[..k1], &mut sub_rng(seed, LANE_S1_NOISE));
        let obs_r2 = ch_s2.transmit(&coded[..k1], &mut sub_rng(seed, LANE_S2_NOISE));
        let x_bits = quantize(&obs_r1, &mut sub_rng(seed, LANE_R1_TIES));
        let y_bits = quantize(&obs_r2, &mut sub_rng(seed, LANE_R2_TIES));
        let dist1 =
            robust_soliton(k1, cfg.lt_c, cfg.lt_delta).expect("soliton parameters validated");
        let side_x = send_description(
            &x_bits,
            &dist1,
            seed_x,
            n_x,
            ch_1d,
            &mut sub_rng(seed, LANE_R1D_NOISE),
        );
        let side_y = send_description(
            &y_bits,
            &dist1,
            seed_y,
            n_y,
            ch_2d,
            &mut sub_rng(seed, LANE_R2D_NOISE),
        );
        let (x_llrs, y_llrs) = match (&side_x, &side_y) {
            (Some((obs_x, graph_x)), Some((obs_y, graph_y))) => {
                let joint = joint_decode(
                    obs_x,
                    graph_x,
                    obs_y,
                    graph_y,
                    &model,
                    cfg.joint_iterations,
                    cfg.inner_iterations,
                );
                outcome.decoder_rounds += joint.joint_iterations;
                (joint.x_stream_llrs, joint.y_stream_llrs)
            }
            (Some((obs_x, graph_x)), None) => {
                let dec = lt_decode(obs_x, graph_x, None, cfg.decoder_iterations);
                outcome.decoder_rounds += dec.iterations_used;
                (dec.extrinsic_source_llrs, Vec::new())
            }
            (None, Some((obs_y, graph_y))) => {
                let dec = lt_decode(obs_y, graph_y, None, cfg.decoder_iterations);
                outcome.decoder_rounds += dec.iterations_used;
                (Vec::new(), dec.extrinsic_source_llrs)
            }
            (None, None) => (Vec::new(), Vec::new()),
        };
        // Each stream's own-check beliefs degrade through the matching
        // quantizer channel and add up; bits neither stream pinned down
        // stay erased rather than entering the outer decode as noise.
        for (i, slot) in fused.iter_mut().enumerate() {
            let mut l = 0.0;
            if let Some(&lx) = x_llrs.get(i) {
                l += belief_through_quantizer(lx, model.pe1);
            }
            if let Some(&ly) = y_llrs.get(i) {
                l += belief_through_quantizer(ly, model.pe2);
            }
            let l = l.clamp(-LLR_MAX, LLR_MAX);
            if l.abs() > 1e-9 {
                *slot = Observation::Llr(l);
            }
        }
    }

    // Alternating phase: the tail of the outer stream reaches the
    // destination through relay 1 by amplification.
    let mut channel_obs = fused;
    if k2 > 0 {
        channel_obs.extend(
            af_path(&coded[k1..], ch_s1, ch_1d, &mut sub_rng(seed, LANE_AF_NOISE))
                .expect("link kinds were validated with the capacities"),
        );
    }

    let dec = raptor_decode(&channel_obs, &source_graph, &ctx.ldpc, cfg.decoder_iterations);
    outcome.decoder_rounds += dec.iterations_used;
    outcome.success = dec.is_success() && ctx.ldpc.extract_info(&dec.hard_bits) == info;
    outcome
}

/// Streaming trials give up after this many channel uses.
fn stream_horizon(k: usize) -> usize {
    20 * k
}

fn poll_sweeps(cfg: &ProtocolConfig) -> usize {
    cfg.decoder_iterations.min(STREAM_POLL_SWEEPS).max(1)
}

/// Streaming sum-product receiver: the precode's parity checks are laid in
/// up front, coded-symbol checks are appended as observations arrive, and
/// messages stay warm between decode attempts.
struct StreamDecoder {
    bp: BpState,
    ldpc_checks: std::ops::Range<usize>,
    priors: Vec<f64>,
    rounds: usize,
}

impl StreamDecoder {
    fn new(ldpc: &LdpcCode) -> Self {
        let mut bp = BpState::new(ldpc.n_variables);
        ldpc.add_checks_to(&mut bp);
        let fixed = bp.n_checks();
        StreamDecoder {
            bp,
            ldpc_checks: 0..fixed,
            priors: vec![0.0; ldpc.n_variables],
            rounds: 0,
        }
    }

    /// Non-erased coded-symbol checks received so far.
    fn observed_checks(&self) -> usize {
        self.bp.n_checks() - self.ldpc_checks.end
    }

    fn push(&mut self, graph: &LtGraph, obs: &[Observation], range: std::ops::Range<usize>) {
        for j in range {
            if let Observation::Llr(l) = obs[j] {
                self.bp.add_check(CheckObs::Llr(l), &graph.adjacency[j]);
            }
        }
    }

    /// One warm-started decode attempt. `streams` lists every contributing
    /// (graph, observations, received-so-far) triple; the attempt accepts
    /// only when the precode syndrome is clean and every non-empty stream
    /// finds the decisions plausible.
    fn attempt(
        &mut self,
        max_iter: usize,
        streams: &[(&LtGraph, &[Observation], usize)],
    ) -> Option<Vec<u8>> {
        if !streams.iter().any(|&(_, _, len)| len > 0) {
            return None;
        }
        let parity = self.ldpc_checks.clone();
        let result = run_bp(&mut self.bp, &self.priors, max_iter, |bp, hard| {
            bp.count_unsatisfied(hard, parity.clone()) == 0
                && streams.iter().all(|&(graph, obs, len)| {
                    len == 0 || stream_consistency(graph, &obs[..len], hard).plausible
                })
        });
        self.rounds += result.iterations_used;
        result.is_success().then_some(result.hard_bits)
    }
}

/// Runs one decode-and-forward trial: the source streams the outer code,
/// each relay locks on independently and re-encodes the precoded block with
/// its own fountain stream, and the destination joins whatever streams
/// exist until its own decode sticks.
pub fn run_df_trial_with(ctx: &SimContext, cfg: &ProtocolConfig, seed: u64) -> TrialOutcome {
    let horizon = stream_horizon(cfg.k);
    let poll = cfg.df_granularity;

    let mut rng_seeds = sub_rng(seed, LANE_STREAM_SEEDS);
    let source_seed: u64 = rng_seeds.random();
    let relay_seeds = [rng_seeds.random::<u64>(), rng_seeds.random::<u64>()];

    let info = draw_info(&ctx.ldpc, cfg.k, seed);
    let (coded, source_graph, _intermediate) =
        raptor_encode(&info, &ctx.ldpc, &ctx.dist, source_seed, horizon)
            .expect("outer encoder inputs are validated");
    let relay_obs = [
        cfg.ch_s1.transmit(&coded, &mut sub_rng(seed, LANE_S1_NOISE)),
        cfg.ch_s2.transmit(&coded, &mut sub_rng(seed, LANE_S2_NOISE)),
    ];
    let down_channels = [&cfg.ch_1d, &cfg.ch_2d];
    let down_lanes = [LANE_R1D_NOISE, LANE_R2D_NOISE];

    struct DownStream {
        graph: LtGraph,
        obs: Vec<Observation>,
        start: usize,
        pushed: usize,
    }

    let mut relay_dec = [StreamDecoder::new(&ctx.ldpc), StreamDecoder::new(&ctx.ldpc)];
    let mut relay_lock: [Option<usize>; 2] = [None, None];
    let mut down: [Option<DownStream>; 2] = [None, None];
    let mut dest = StreamDecoder::new(&ctx.ldpc);
    let mut verdict: Option<(usize, bool)> = None;

    let mut prev_t = 0;
    let steps = horizon.div_ceil(poll);
    'clock: for step in 1..=steps {
        let t = (step * poll).min(horizon);
        for i in 0..2 {
            if relay_lock[i].is_some() {
                continue;
            }
            relay_dec[i].push(&source_graph, &relay_obs[i], prev_t..t);
            if relay_dec[i].observed_checks() < ctx.ldpc.n_info() {
                continue;
            }
            let streams = [(&source_graph, relay_obs[i].as_slice(), t)];
            if let Some(v_hat) = relay_dec[i].attempt(poll_sweeps(cfg), &streams) {
                relay_lock[i] = Some(t);
                if horizon > t {
                    let graph = LtGraph::build(
                        ctx.ldpc.n_variables,
                        horizon - t,
                        &ctx.dist,
                        relay_seeds[i],
                    )
                    .expect("relay stream construction");
                    let relay_coded = graph.encode(&v_hat);
                    let obs =
                        down_channels[i].transmit(&relay_coded, &mut sub_rng(seed, down_lanes[i]));
                    down[i] = Some(DownStream {
                        graph,
                        obs,
                        start: t,
                        pushed: 0,
                    });
                }
            }
        }
        let mut advanced = false;
        for s in down.iter_mut().flatten() {
            let avail = t.saturating_sub(s.start).min(s.obs.len());
            if avail > s.pushed {
                dest.push(&s.graph, &s.obs, s.pushed..avail);
                s.pushed = avail;
                advanced = true;
            }
        }
        if advanced && dest.observed_checks() >= ctx.ldpc.n_info() {
            let streams: Vec<(&LtGraph, &[Observation], usize)> = down
                .iter()
                .flatten()
                .map(|s| (&s.graph, s.obs.as_slice(), s.pushed))
                .collect();
            if let Some(hard) = dest.attempt(poll_sweeps(cfg), &streams) {
                verdict = Some((t, ctx.ldpc.extract_info(&hard) == info));
                break 'clock;
            }
        }
        prev_t = t;
    }

    let (t_end, success) = verdict.unwrap_or((horizon, false));
    // The source keeps broadcasting until every relay has locked (or the
    // frame ends); each relay talks from its lock to the end of the frame.
    let source_symbols = relay_lock
        .iter()
        .map(|lock| lock.unwrap_or(t_end).min(t_end))
        .max()
        .unwrap_or(t_end);
    let mut relay_symbols = [0usize; 2];
    for i in 0..2 {
        relay_symbols[i] = down[i]
            .as_ref()
            .map_or(0, |s| t_end.saturating_sub(s.start).min(s.obs.len()));
    }
    TrialOutcome {
        success,
        frame_uses: t_end,
        source_symbols,
        relay_symbols,
        decoder_rounds: relay_dec[0].rounds + relay_dec[1].rounds + dest.rounds,
        seed,
    }
}

/// Runs one amplify-and-forward trial through the stronger relay path. The
/// frame splits evenly between the source's and the relay's halves, so `m`
/// delivered symbols cost `2m` channel uses.
pub fn run_af_trial_with(ctx: &SimContext, cfg: &ProtocolConfig, seed: u64) -> TrialOutcome {
    let relay = usize::from(ctx.caps.c_af2 > ctx.caps.c_af1);
    let (ch_s, ch_d) = if relay == 1 {
        (&cfg.ch_s2, &cfg.ch_2d)
    } else {
        (&cfg.ch_s1, &cfg.ch_1d)
    };
    let slots = stream_horizon(cfg.k) / 2;
    let poll = cfg.df_granularity;

    let mut rng_seeds = sub_rng(seed, LANE_STREAM_SEEDS);
    let source_seed: u64 = rng_seeds.random();
    let info = draw_info(&ctx.ldpc, cfg.k, seed);
    let (coded, graph, _intermediate) =
        raptor_encode(&info, &ctx.ldpc, &ctx.dist, source_seed, slots)
            .expect("outer encoder inputs are validated");
    let obs = af_path(&coded, ch_s, ch_d, &mut sub_rng(seed, LANE_AF_NOISE))
        .expect("link kinds were validated with the capacities");

    let mut dec = StreamDecoder::new(&ctx.ldpc);
    let mut verdict: Option<(usize, bool)> = None;
    let mut prev = 0;
    let steps = slots.div_ceil(poll);
    for step in 1..=steps {
        let m = (step * poll).min(slots);
        dec.push(&graph, &obs, prev..m);
        prev = m;
        if dec.observed_checks() >= ctx.ldpc.n_info() {
            if let Some(hard) = dec.attempt(poll_sweeps(cfg), &[(&graph, obs.as_slice(), m)]) {
                verdict = Some((m, ctx.ldpc.extract_info(&hard) == info));
                break;
            }
        }
    }
    let (m_end, success) = verdict.unwrap_or((slots, false));
    let mut relay_symbols = [0usize; 2];
    relay_symbols[relay] = m_end;
    TrialOutcome {
        success,
        frame_uses: 2 * m_end,
        source_symbols: m_end,
        relay_symbols,
        decoder_rounds: dec.rounds,
        seed,
    }
}

fn collect_outcomes(ctx: &SimContext, cfg: &ProtocolConfig, margin: f64) -> Vec<TrialOutcome> {
    (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.base_seed.wrapping_add(i as u64);
            match cfg.protocol {
                Protocol::Pcf | Protocol::Cf => run_pcf_trial_with(ctx, cfg, margin, seed),
                Protocol::Df => run_df_trial_with(ctx, cfg, seed),
                Protocol::Af => run_af_trial_with(ctx, cfg, seed),
            }
        })
        .collect()
}

fn reliability_of(outcomes: &[TrialOutcome]) -> f64 {
    outcomes.iter().filter(|o| o.success).count() as f64 / outcomes.len() as f64
}

fn mean_rounds(outcomes: &[TrialOutcome]) -> f64 {
    outcomes.iter().map(|o| o.decoder_rounds as f64).sum::<f64>() / outcomes.len() as f64
}

/// Certifies a fixed-frame protocol: evaluates the planned rate first, then
/// walks the back-off ladder (double until passing, then bisect toward the
/// smallest passing margin).
fn coded_batch(ctx: &SimContext, cfg: &ProtocolConfig) -> BatchStats {
    let plan = ctx.plan.expect("coded batches carry a plan");
    let mut stats = BatchStats {
        nominal_rate: plan.rate.max(0.0),
        achieved_rate: 0.0,
        reliability: 0.0,
        trials: cfg.trials,
        mean_decoder_rounds: 0.0,
        margin_used: 0.0,
    };
    if plan.rate <= 0.0 {
        return stats;
    }
    let certify = |margin: f64, outcomes: &[TrialOutcome]| BatchStats {
        achieved_rate: cfg.k as f64 / outcomes[0].frame_uses.max(1) as f64,
        reliability: reliability_of(outcomes),
        mean_decoder_rounds: mean_rounds(outcomes),
        margin_used: margin,
        ..stats
    };

    let base = collect_outcomes(ctx, cfg, 0.0);
    if reliability_of(&base) >= cfg.reliability_target {
        return certify(0.0, &base);
    }
    let mut lo = 0.0f64;
    let mut hi = cfg.overhead_margin.max(MIN_MARGIN);
    let mut best = collect_outcomes(ctx, cfg, hi);
    let mut doublings = 0;
    while reliability_of(&best) < cfg.reliability_target && doublings < MAX_DOUBLINGS {
        lo = hi;
        hi *= 2.0;
        best = collect_outcomes(ctx, cfg, hi);
        doublings += 1;
    }
    if reliability_of(&best) < cfg.reliability_target {
        // Nothing certifiable: report the last attempt honestly, rate zero.
        stats.reliability = reliability_of(&best);
        stats.mean_decoder_rounds = mean_rounds(&best);
        stats.margin_used = hi;
        return stats;
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let probe = collect_outcomes(ctx, cfg, mid);
        if reliability_of(&probe) >= cfg.reliability_target {
            hi = mid;
            best = probe;
        } else {
            lo = mid;
        }
    }
    certify(hi, &best)
}

/// Certifies a streaming protocol: every trial runs to its own stopping
/// time and the rate is read off the quantile matching the reliability
/// target.
fn streaming_batch(ctx: &SimContext, cfg: &ProtocolConfig) -> BatchStats {
    let outcomes = collect_outcomes(ctx, cfg, 0.0);
    let nominal = match cfg.protocol {
        Protocol::Df => best_relay_df_rate(&ctx.caps),
        Protocol::Af => af_rate(&ctx.caps),
        _ => unreachable!("coded protocols take the margin ladder"),
    };
    let mut times: Vec<usize> = outcomes
        .iter()
        .filter(|o| o.success)
        .map(|o| o.frame_uses)
        .collect();
    times.sort_unstable();
    let quota = ((cfg.reliability_target * cfg.trials as f64).ceil() as usize).clamp(1, cfg.trials);
    let (achieved, reliability) = if times.len() >= quota {
        let cutoff = times[quota - 1];
        let within = outcomes
            .iter()
            .filter(|o| o.success && o.frame_uses <= cutoff)
            .count();
        (
            cfg.k as f64 / cutoff.max(1) as f64,
            within as f64 / cfg.trials as f64,
        )
    } else {
        (0.0, times.len() as f64 / cfg.trials as f64)
    };
    BatchStats {
        nominal_rate: nominal,
        achieved_rate: achieved,
        reliability,
        trials: cfg.trials,
        mean_decoder_rounds: mean_rounds(&outcomes),
        margin_used: 0.0,
    }
}

/// Runs a full batch for the configured protocol and certifies its rate.
pub fn run_batch(cfg: &ProtocolConfig) -> Result<BatchStats, SimError> {
    let ctx = SimContext::new(cfg)?;
    Ok(run_batch_with(&ctx, cfg))
}

/// Same as [`run_batch`] with a prebuilt context. The context must come
/// from an identical configuration.
pub fn run_batch_with(ctx: &SimContext, cfg: &ProtocolConfig) -> BatchStats {
    match cfg.protocol {
        Protocol::Pcf | Protocol::Cf => coded_batch(ctx, cfg),
        Protocol::Df | Protocol::Af => streaming_batch(ctx, cfg),
    }
}

/// Runs a single seeded trial of the configured protocol.
pub fn run_trial(cfg: &ProtocolConfig, seed: u64) -> Result<TrialOutcome, SimError> {
    let ctx = SimContext::new(cfg)?;
    Ok(match cfg.protocol {
        Protocol::Pcf | Protocol::Cf => run_pcf_trial_with(&ctx, cfg, cfg.overhead_margin, seed),
        Protocol::Df => run_df_trial_with(&ctx, cfg, seed),
        Protocol::Af => run_af_trial_with(&ctx, cfg, seed),
    })
}
