//! Joint decoding of two correlated LT streams.
//!
//! The destination receives two LT codewords that compress the same source
//! block as seen by two different observers, whose bits agree except for an
//! equivalent crossover. Two sum-product decoders run side by side and
//! exchange extrinsic beliefs through that crossover model: each decoder's
//! per-bit extrinsic LLR is mapped to a prior LLR for the same position of
//! the other decoder, attenuated by how reliable the correlation is.

use crate::channels::{Observation, LLR_MAX};
use crate::rateless::{BpState, CheckObs, LtGraph};

/// Correlation between the two observers' quantized bits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SideInfoModel {
    pub pe1: f64,
    pub pe2: f64,
    /// Probability the two bits agree: `pe1*pe2 + (1-pe1)*(1-pe2)`.
    pub agreement: f64,
    /// Complement of `agreement`.
    pub disagreement: f64,
}

impl SideInfoModel {
    pub fn new(pe1: f64, pe2: f64) -> Self {
        assert!(
            (0.0..=1.0).contains(&pe1) && (0.0..=1.0).contains(&pe2),
            "error rates must be probabilities"
        );
        let agreement = pe1 * pe2 + (1.0 - pe1) * (1.0 - pe2);
        SideInfoModel {
            pe1,
            pe2,
            agreement,
            disagreement: 1.0 - agreement,
        }
    }

    pub fn from_correlation(model: &crate::info::CorrelationModel) -> Self {
        SideInfoModel::new(model.pe1, model.pe2)
    }
}

/// P(y=0 | L) and P(y=1 | L), each computed from its own mixture so their
/// complementarity is a checkable property rather than an identity by
/// construction. `L` is the extrinsic LLR of the aligned bit `x` under the
/// log(P0/P1) convention, so the likelihood ratio `r = P(x=1)/P(x=0)` equals
/// `e^-L`.
pub fn side_info_probabilities(extrinsic_llr: f64, model: &SideInfoModel) -> (f64, f64) {
    let q1 = 1.0 / (1.0 + extrinsic_llr.exp()); // P(x=1) = r/(1+r)
    let q0 = 1.0 / (1.0 + (-extrinsic_llr).exp()); // P(x=0) = 1/(1+r)
    let p1 = model.agreement * q1 + model.disagreement * q0;
    let p0 = model.agreement * q0 + model.disagreement * q1;
    (p0, p1)
}

/// Prior LLR `log(P(y=0)/P(y=1))` induced on the other decoder's bit by an
/// extrinsic LLR on this one. At `pe1 = pe2 = 0` this is the identity map; in
/// general its magnitude never exceeds `log(agreement/disagreement)`, the
/// value reached at saturated input. Output is clamped to the LLR range.
pub fn side_info_prior(extrinsic_llr: f64, model: &SideInfoModel) -> f64 {
    let (p0, p1) = side_info_probabilities(extrinsic_llr, model);
    (p0.ln() - p1.ln()).clamp(-LLR_MAX, LLR_MAX)
}

/// Whether one side's message was recovered.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SideStatus {
    Success,
    Fail,
}

/// Outcome of a joint decode: per-side hard decisions over the shared block.
#[derive(Clone, Debug)]
pub struct JointDecodeResult {
    pub x_hat: Vec<u8>,
    pub y_hat: Vec<u8>,
    pub status_x: SideStatus,
    pub status_y: SideStatus,
    /// Belief each stream's own checks contribute about its block, per bit
    /// in LLR form (the posterior with the correlation-implied prior
    /// removed). Summing information across the two sides needs these
    /// rather than the posteriors, which already contain the exchange.
    pub x_stream_llrs: Vec<f64>,
    pub y_stream_llrs: Vec<f64>,
    pub joint_iterations: usize,
}

impl JointDecodeResult {
    pub fn both_succeeded(&self) -> bool {
        self.status_x == SideStatus::Success && self.status_y == SideStatus::Success
    }
}

/// Order in which the two decoders run within one exchange round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Schedule {
    /// Decoder X sweeps first and its fresh extrinsic feeds decoder Y within
    /// the same round.
    #[default]
    Serial,
    /// Both decoders sweep against the previous round's priors, then
    /// exchange.
    Parallel,
}

/// Mean absolute extrinsic and residual check violations per exchange round,
/// for debugging convergence.
#[derive(Clone, Copy, Debug)]
pub struct JointTraceRow {
    pub iteration: usize,
    pub mean_abs_extrinsic_x: f64,
    pub mean_abs_extrinsic_y: f64,
    pub unsatisfied_x: usize,
    pub unsatisfied_y: usize,
}

struct Side {
    bp: BpState,
    prior: Vec<f64>,
    extrinsic: Vec<f64>,
}

impl Side {
    fn build(graph: &LtGraph, observations: &[Observation]) -> Side {
        assert_eq!(observations.len(), graph.n, "one observation per symbol");
        let mut bp = BpState::new(graph.k);
        for (j, obs) in observations.iter().enumerate() {
            if let Observation::Llr(l) = *obs {
                bp.add_check(CheckObs::Llr(l), &graph.adjacency[j]);
            }
        }
        Side {
            bp,
            prior: vec![0.0; graph.k],
            extrinsic: vec![0.0; graph.k],
        }
    }

    /// Run `inner_iter` sweeps against the current priors and refresh the
    /// extrinsic beliefs. Returns the final sweep's largest message change.
    fn sweep(&mut self, inner_iter: usize) -> f64 {
        let mut delta = 0.0;
        for _ in 0..inner_iter {
            delta = self.bp.sweep(&self.prior);
            if delta < 1e-12 {
                break;
            }
        }
        for (e, (&post, &pri)) in self
            .extrinsic
            .iter_mut()
            .zip(self.bp.posteriors().iter().zip(&self.prior))
        {
            *e = (post - pri).clamp(-LLR_MAX, LLR_MAX);
        }
        delta
    }

    /// Map the other side's extrinsic beliefs into this side's priors,
    /// returning the largest prior movement.
    fn absorb(&mut self, other_extrinsic: &[f64], model: &SideInfoModel) -> f64 {
        let mut moved = 0.0f64;
        for (p, &e) in self.prior.iter_mut().zip(other_extrinsic) {
            let next = side_info_prior(e, model);
            moved = moved.max((next - *p).abs());
            *p = next;
        }
        moved
    }

    fn consistent(&self) -> bool {
        self.bp.n_checks() > 0
            && self
                .bp
                .count_unsatisfied(&self.bp.hard_decisions(), 0..self.bp.n_checks())
                == 0
    }
}

/// Decode two correlated LT streams with serial scheduling. See
/// [`joint_decode_full`] for the scheduling and tracing knobs.
pub fn joint_decode(
    obs_x: &[Observation],
    graph_x: &LtGraph,
    obs_y: &[Observation],
    graph_y: &LtGraph,
    model: &SideInfoModel,
    max_joint_iter: usize,
    inner_iter: usize,
) -> JointDecodeResult {
    joint_decode_full(
        obs_x,
        graph_x,
        obs_y,
        graph_y,
        model,
        max_joint_iter,
        inner_iter,
        Schedule::Serial,
        None,
    )
}

/// Full joint decoder. Each round runs `inner_iter` sum-product sweeps per
/// side and exchanges extrinsic beliefs through the correlation model; the
/// loop ends when both sides' hard decisions satisfy all observed checks,
/// when messages and priors freeze, or at `max_joint_iter` rounds. A side
/// with no usable observations never reports success, but still converges to
/// the correlation-implied copy of the other side. Deterministic throughout.
#[allow(clippy::too_many_arguments)]
pub fn joint_decode_full(
    obs_x: &[Observation],
    graph_x: &LtGraph,
    obs_y: &[Observation],
    graph_y: &LtGraph,
    model: &SideInfoModel,
    max_joint_iter: usize,
    inner_iter: usize,
    schedule: Schedule,
    mut trace: Option<&mut Vec<JointTraceRow>>,
) -> JointDecodeResult {
    assert_eq!(
        graph_x.k, graph_y.k,
        "both streams must describe the same block length"
    );
    assert!(max_joint_iter >= 1 && inner_iter >= 1);
    let mut x = Side::build(graph_x, obs_x);
    let mut y = Side::build(graph_y, obs_y);
    let mut joint_iterations = 0;
    for round in 1..=max_joint_iter {
        joint_iterations = round;
        let (dx, dy, moved) = match schedule {
            Schedule::Serial => {
                let dx = x.sweep(inner_iter);
                let m1 = y.absorb(&x.extrinsic, model);
                let dy = y.sweep(inner_iter);
                let m2 = x.absorb(&y.extrinsic, model);
                (dx, dy, m1.max(m2))
            }
            Schedule::Parallel => {
                let dx = x.sweep(inner_iter);
                let dy = y.sweep(inner_iter);
                let m1 = y.absorb(&x.extrinsic, model);
                let m2 = x.absorb(&y.extrinsic, model);
                (dx, dy, m1.max(m2))
            }
        };
        if let Some(rows) = trace.as_deref_mut() {
            let mean_abs = |v: &[f64]| v.iter().map(|e| e.abs()).sum::<f64>() / v.len() as f64;
            rows.push(JointTraceRow {
                iteration: round,
                mean_abs_extrinsic_x: mean_abs(&x.extrinsic),
                mean_abs_extrinsic_y: mean_abs(&y.extrinsic),
                unsatisfied_x: x
                    .bp
                    .count_unsatisfied(&x.bp.hard_decisions(), 0..x.bp.n_checks()),
                unsatisfied_y: y
                    .bp
                    .count_unsatisfied(&y.bp.hard_decisions(), 0..y.bp.n_checks()),
            });
        }
        if x.consistent() && y.consistent() {
            break;
        }
        if dx < 1e-12 && dy < 1e-12 && moved < 1e-12 {
            break;
        }
    }
    let status = |ok: bool| if ok { SideStatus::Success } else { SideStatus::Fail };
    JointDecodeResult {
        x_hat: x.bp.hard_decisions(),
        y_hat: y.bp.hard_decisions(),
        status_x: status(x.consistent()),
        status_y: status(y.consistent()),
        x_stream_llrs: x.extrinsic,
        y_stream_llrs: y.extrinsic,
        joint_iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::ChannelModel;
    use crate::rateless::{lt_decode, lt_encode, robust_soliton};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn saturated(coded: &[u8]) -> Vec<Observation> {
        coded
            .iter()
            .map(|&b| Observation::Llr(if b == 0 { LLR_MAX } else { -LLR_MAX }))
            .collect()
    }

    #[test]
    fn model_fields_are_complementary() {
        let m = SideInfoModel::new(0.1, 0.2);
        assert!((m.agreement - 0.74).abs() < 1e-12);
        assert!((m.agreement + m.disagreement - 1.0).abs() == 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        for _ in 0..200 {
            let m = SideInfoModel::new(0.5 * rng.random::<f64>(), 0.5 * rng.random::<f64>());
            assert!(m.agreement >= 0.5);
        }
    }

    #[test]
    fn uninformative_input_gives_zero_prior() {
        let m = SideInfoModel::new(0.1, 0.2);
        let (p0, p1) = side_info_probabilities(0.0, &m);
        assert!((p1 - 0.5).abs() < 1e-15);
        assert!((p0 - 0.5).abs() < 1e-15);
        assert_eq!(side_info_prior(0.0, &m), 0.0);
    }

    #[test]
    fn perfect_correlation_is_identity() {
        let m = SideInfoModel::new(0.0, 0.0);
        for l in [-7.5, -1.0, -0.1, 0.3, 2.0, 12.0] {
            assert!((side_info_prior(l, &m) - l).abs() < 1e-9, "l = {l}");
        }
    }

    #[test]
    fn saturated_input_reaches_the_correlation_bound() {
        // At r -> infinity (certain x = 1), P(y=1) = agreement = 0.74 and the
        // prior hits log(0.26/0.74) = -1.045969.
        let m = SideInfoModel::new(0.1, 0.2);
        let (_, p1) = side_info_probabilities(-1000.0, &m);
        assert!((p1 - 0.74).abs() < 1e-12);
        let bound = (0.26f64 / 0.74).ln();
        assert!((side_info_prior(-1000.0, &m) - bound).abs() < 1e-6);
        assert!((bound + 1.045969).abs() < 1e-6);
    }

    #[test]
    fn probabilities_stay_complementary_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..10_000 {
            let m = SideInfoModel::new(0.5 * rng.random::<f64>(), 0.5 * rng.random::<f64>());
            let l = 80.0 * (rng.random::<f64>() - 0.5);
            let (p0, p1) = side_info_probabilities(l, &m);
            assert!((p0 + p1 - 1.0).abs() <= 1e-12);
            let bound = (m.agreement / m.disagreement).ln().abs();
            assert!(side_info_prior(l, &m).abs() <= bound.min(LLR_MAX) + 1e-12);
            // Swapping the observers leaves the exchange unchanged.
            let swapped = SideInfoModel::new(m.pe2, m.pe1);
            assert_eq!(side_info_prior(l, &m), side_info_prior(l, &swapped));
        }
    }

    #[test]
    fn independently_decodable_streams_succeed_immediately() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let k = 40;
        let dist = robust_soliton(k, 0.1, 0.5).unwrap();
        let x: Vec<u8> = (0..k).map(|_| rng.random_range(0..2)).collect();
        // y differs from x in a couple of positions.
        let mut y = x.clone();
        y[3] ^= 1;
        y[17] ^= 1;
        let (cx, gx) = lt_encode(&x, &dist, 100, 200).unwrap();
        let (cy, gy) = lt_encode(&y, &dist, 101, 200).unwrap();
        let model = SideInfoModel::new(0.02, 0.03);
        let out = joint_decode(&saturated(&cx), &gx, &saturated(&cy), &gy, &model, 40, 2);
        assert!(out.both_succeeded());
        assert_eq!(out.x_hat, x);
        assert_eq!(out.y_hat, y);
    }

    #[test]
    fn erased_side_copies_its_partner_under_perfect_correlation() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let k = 100;
        let dist = robust_soliton(k, 0.05, 0.5).unwrap();
        let x: Vec<u8> = (0..k).map(|_| rng.random_range(0..2)).collect();
        let (cx, gx) = lt_encode(&x, &dist, 200, 400).unwrap();
        let gy = crate::rateless::LtGraph::build(k, 50, &dist, 201).unwrap();
        let erased = vec![Observation::Erased; 50];
        let model = SideInfoModel::new(0.0, 0.0);
        let out = joint_decode(&saturated(&cx), &gx, &erased, &gy, &model, 40, 2);
        assert_eq!(out.status_x, SideStatus::Success);
        assert_eq!(out.status_y, SideStatus::Fail);
        assert_eq!(out.x_hat, x);
        assert_eq!(out.y_hat, x);
    }

    #[test]
    fn uncorrelated_model_reduces_to_standalone_decoding() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let k = 60;
        let dist = robust_soliton(k, 0.1, 0.5).unwrap();
        let model = SideInfoModel::new(0.5, 0.1);
        assert_eq!(model.agreement, 0.5);
        for seed in 0..10u64 {
            let x: Vec<u8> = (0..k).map(|_| rng.random_range(0..2)).collect();
            let y: Vec<u8> = (0..k).map(|_| rng.random_range(0..2)).collect();
            let (cx, gx) = lt_encode(&x, &dist, 300 + seed, 100).unwrap();
            let (cy, gy) = lt_encode(&y, &dist, 400 + seed, 100).unwrap();
            let ox = saturated(&cx);
            let oy = saturated(&cy);
            let joint = joint_decode(&ox, &gx, &oy, &gy, &model, 40, 2);
            let solo_x = lt_decode(&ox, &gx, None, 80);
            let solo_y = lt_decode(&oy, &gy, None, 80);
            assert_eq!(
                joint.status_x == SideStatus::Success,
                solo_x.is_success(),
                "seed {seed}"
            );
            assert_eq!(
                joint.status_y == SideStatus::Success,
                solo_y.is_success(),
                "seed {seed}"
            );
            assert_eq!(joint.x_hat, solo_x.hard_bits);
            assert_eq!(joint.y_hat, solo_y.hard_bits);
        }
    }

    #[test]
    fn decoding_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(65);
        let k = 50;
        let dist = robust_soliton(k, 0.1, 0.5).unwrap();
        let x: Vec<u8> = (0..k).map(|_| rng.random_range(0..2)).collect();
        let y: Vec<u8> = x.iter().map(|&b| b ^ u8::from(rng.random_bool(0.1))).collect();
        let ch = ChannelModel::biawgn_from_db(3.0);
        let (cx, gx) = lt_encode(&x, &dist, 500, 90).unwrap();
        let (cy, gy) = lt_encode(&y, &dist, 501, 90).unwrap();
        let ox = ch.transmit(&cx, &mut rng);
        let oy = ch.transmit(&cy, &mut rng);
        let model = SideInfoModel::new(0.05, 0.05);
        let a = joint_decode(&ox, &gx, &oy, &gy, &model, 40, 2);
        let b = joint_decode(&ox, &gx, &oy, &gy, &model, 40, 2);
        assert_eq!(a.x_hat, b.x_hat);
        assert_eq!(a.y_hat, b.y_hat);
        assert_eq!(a.joint_iterations, b.joint_iterations);
        // The parallel schedule is also deterministic, if not identical.
        let c = joint_decode_full(
            &ox,
            &gx,
            &oy,
            &gy,
            &model,
            40,
            2,
            Schedule::Parallel,
            None,
        );
        let d = joint_decode_full(
            &ox,
            &gx,
            &oy,
            &gy,
            &model,
            40,
            2,
            Schedule::Parallel,
            None,
        );
        assert_eq!(c.x_hat, d.x_hat);
        assert_eq!(c.joint_iterations, d.joint_iterations);
    }

    #[test]
    fn correlation_help_never_hurts_on_average() {
        // Pick an operating point where standalone decoding of X succeeds
        // with middling probability, then check joint decoding with a good
        // correlated side does not do statistically worse.
        let k = 50;
        let dist = robust_soliton(k, 0.1, 0.5).unwrap();
        let model = SideInfoModel::new(0.02, 0.02);
        let trials = 200;
        let mut solo_ok = 0u32;
        let mut joint_ok = 0u32;
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        for seed in 0..trials {
            let x: Vec<u8> = (0..k).map(|_| rng.random_range(0..2)).collect();
            let y: Vec<u8> = x
                .iter()
                .map(|&b| b ^ u8::from(rng.random_bool(0.04)))
                .collect();
            let (cx, gx) = lt_encode(&x, &dist, 1000 + seed, 70).unwrap();
            let (cy, gy) = lt_encode(&y, &dist, 2000 + seed, 80).unwrap();
            let ox = saturated(&cx);
            let oy = saturated(&cy);
            if lt_decode(&ox, &gx, None, 80).hard_bits == x {
                solo_ok += 1;
            }
            let joint = joint_decode(&ox, &gx, &oy, &gy, &model, 40, 2);
            if joint.x_hat == x {
                joint_ok += 1;
            }
        }
        let solo = solo_ok as f64 / trials as f64;
        let joint = joint_ok as f64 / trials as f64;
        assert!(
            solo > 0.05 && solo < 0.95,
            "operating point drifted: standalone {solo}"
        );
        let stderr = (solo * (1.0 - solo) / trials as f64).sqrt();
        assert!(
            joint >= solo - 2.0 * stderr,
            "joint {joint} vs standalone {solo}"
        );
    }
}
