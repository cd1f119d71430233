//! Correlation structure between the source bit and the two relays' hard
//! decisions, and the information quantities the rate optimization needs.
//!
//! The source bit Z is uniform; each relay observes Z through its own link and
//! quantizes to one bit, so X and Y are conditionally independent given Z with
//! marginal error rates `pe1` and `pe2`. All entropies are computed by direct
//! enumeration of the 8-cell joint pmf; the closed forms serve as test oracles.

use crate::channels::{bsc_from_biawgn, ChannelModel};

/// Binary entropy h(p) in bits, with h(0) = h(1) = 0.
pub fn binary_entropy(p: f64) -> f64 {
    debug_assert!((-1e-12..=1.0 + 1e-12).contains(&p), "entropy domain: {p}");
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -(p * p.log2()) - (1.0 - p) * (1.0 - p).log2()
}

/// Probability that the two relays' quantized bits disagree:
/// `p_eq = pe1*(1-pe2) + pe2*(1-pe1)`.
pub fn equivalent_crossover(pe1: f64, pe2: f64) -> f64 {
    pe1 * (1.0 - pe2) + pe2 * (1.0 - pe1)
}

/// Joint distribution of (Z, X, Y): the source bit and the two relays' hard
/// decisions. `joint_pmf[z][x][y]` holds P(z, x, y).
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationModel {
    pub pe1: f64,
    pub pe2: f64,
    pub joint_pmf: [[[f64; 2]; 2]; 2],
}

impl CorrelationModel {
    /// Build from the two per-relay bit error rates.
    pub fn from_crossovers(pe1: f64, pe2: f64) -> Self {
        let flip = |differs: bool, pe: f64| if differs { pe } else { 1.0 - pe };
        let mut pmf = [[[0.0; 2]; 2]; 2];
        for z in 0..2 {
            for x in 0..2 {
                for y in 0..2 {
                    pmf[z][x][y] = 0.5 * flip(x != z, pe1) * flip(y != z, pe2);
                }
            }
        }
        CorrelationModel {
            pe1,
            pe2,
            joint_pmf: pmf,
        }
    }

    /// Same correlation with the two relays' roles exchanged.
    pub fn swapped(&self) -> Self {
        CorrelationModel::from_crossovers(self.pe2, self.pe1)
    }

    /// P(x != y), the crossover of the equivalent channel between the relays.
    pub fn p_eq(&self) -> f64 {
        equivalent_crossover(self.pe1, self.pe2)
    }
}

/// Per-relay quantized bit error rate induced by a source-to-relay link.
///
/// BSC passes its crossover through; BI-AWGN quantizes to `Q(sqrt(2*snr))`;
/// BEC erasures are filled with a fair coin at the relay, so half of them
/// flip: `pe = eps/2`.
pub fn quantized_crossover(ch: &ChannelModel) -> f64 {
    match *ch {
        ChannelModel::Bsc(p) => p,
        ChannelModel::BiAwgn(snr) => bsc_from_biawgn(snr),
        ChannelModel::Bec(e) => e / 2.0,
    }
}

/// Correlation model induced by the two source-to-relay links.
pub fn correlation_model(ch_s1: &ChannelModel, ch_s2: &ChannelModel) -> CorrelationModel {
    CorrelationModel::from_crossovers(quantized_crossover(ch_s1), quantized_crossover(ch_s2))
}

/// Entropies of the (Z, X, Y) triple in bits per symbol.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropySet {
    pub hx: f64,
    pub hy: f64,
    pub hx_given_y: f64,
    pub hy_given_x: f64,
    pub hxy: f64,
    pub i_z_xy: f64,
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// All entropy quantities by enumeration over the 8-cell pmf.
pub fn entropies(model: &CorrelationModel) -> EntropySet {
    let pmf = &model.joint_pmf;
    let mut hzxy = 0.0;
    let mut pxy = [[0.0; 2]; 2];
    for z in 0..2 {
        for x in 0..2 {
            for y in 0..2 {
                hzxy += plogp(pmf[z][x][y]);
                pxy[x][y] += pmf[z][x][y];
            }
        }
    }
    let px = [pxy[0][0] + pxy[0][1], pxy[1][0] + pxy[1][1]];
    let py = [pxy[0][0] + pxy[1][0], pxy[0][1] + pxy[1][1]];
    let hx = plogp(px[0]) + plogp(px[1]);
    let hy = plogp(py[0]) + plogp(py[1]);
    let hxy: f64 = pxy.iter().flatten().copied().map(plogp).sum();
    // Z is uniform by construction, so H(Z) = 1 and I(Z;X,Y) = 1 + H(X,Y) - H(Z,X,Y).
    let i_z_xy = 1.0 + hxy - hzxy;
    EntropySet {
        hx,
        hy,
        hx_given_y: hxy - hy,
        hy_given_x: hxy - hx,
        hxy,
        i_z_xy,
    }
}

/// Whether the description-rate pair can reconstruct both quantized sequences:
/// `rx >= H(X|Y)`, `ry >= H(Y|X)`, and `rx + ry >= H(X,Y)`.
pub fn sw_admissible(rx: f64, ry: f64, e: &EntropySet) -> bool {
    rx >= e.hx_given_y && ry >= e.hy_given_x && rx + ry >= e.hxy
}
