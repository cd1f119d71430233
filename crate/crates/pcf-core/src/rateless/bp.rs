//! Flooding sum-product engine shared by the LT, Raptor, and joint decoders.
//!
//! Checks are parity constraints over variable bits, optionally folded with a
//! channel observation of the corresponding coded symbol. Check-to-variable
//! messages persist across sweeps so a caller can interleave message passing
//! with prior updates (as the joint decoder does) without losing state.

use crate::channels::LLR_MAX;

/// What a check constrains the parity of its neighborhood to.
#[derive(Clone, Copy, Debug)]
pub(crate) enum CheckObs {
    /// Pure parity: the XOR of the neighbors is zero.
    Parity,
    /// The XOR equals a coded symbol observed through a channel with this LLR.
    Llr(f64),
}

pub(crate) struct BpState {
    n_vars: usize,
    check_off: Vec<usize>,
    check_var: Vec<usize>,
    /// tanh(L/2) of the folded observation; exactly 1.0 for pure parity.
    obs_factor: Vec<f64>,
    /// Hard value of the folded observation (0 for pure parity checks).
    obs_bit: Vec<u8>,
    c2v: Vec<f64>,
    posterior: Vec<f64>,
    started: bool,
}

impl BpState {
    pub(crate) fn new(n_vars: usize) -> Self {
        BpState {
            n_vars,
            check_off: vec![0],
            check_var: Vec::new(),
            obs_factor: Vec::new(),
            obs_bit: Vec::new(),
            c2v: Vec::new(),
            posterior: Vec::new(),
            started: false,
        }
    }

    /// Append one check. Returns its index.
    ///
    /// Checks may arrive between sweeps: a new check starts with zero
    /// outgoing messages and joins the flooding schedule on the next sweep,
    /// which is what lets streaming receivers grow the graph as symbols
    /// trickle in instead of rebuilding the decoder.
    pub(crate) fn add_check(&mut self, obs: CheckObs, vars: &[usize]) -> usize {
        debug_assert!(vars.iter().all(|&v| v < self.n_vars));
        self.check_var.extend_from_slice(vars);
        self.check_off.push(self.check_var.len());
        self.c2v.resize(self.check_var.len(), 0.0);
        match obs {
            CheckObs::Parity => {
                self.obs_factor.push(1.0);
                self.obs_bit.push(0);
            }
            CheckObs::Llr(l) => {
                let l = l.clamp(-LLR_MAX, LLR_MAX);
                self.obs_factor.push((0.5 * l).tanh());
                self.obs_bit.push(u8::from(l < 0.0));
            }
        }
        self.obs_factor.len() - 1
    }

    pub(crate) fn n_checks(&self) -> usize {
        self.obs_factor.len()
    }

    /// One flooding sweep: refresh every check-to-variable message from the
    /// previous posteriors, then rebuild the posteriors. Returns the largest
    /// message change, which hits zero exactly when the decoder has frozen.
    pub(crate) fn sweep(&mut self, priors: &[f64]) -> f64 {
        debug_assert_eq!(priors.len(), self.n_vars);
        if !self.started {
            self.posterior = priors.to_vec();
            self.started = true;
        }
        let mut max_delta = 0.0f64;
        let mut tanhs: Vec<f64> = Vec::new();
        let mut fwd: Vec<f64> = Vec::new();
        for c in 0..self.n_checks() {
            let lo = self.check_off[c];
            let hi = self.check_off[c + 1];
            let deg = hi - lo;
            tanhs.clear();
            tanhs.extend(
                (lo..hi).map(|e| (0.5 * (self.posterior[self.check_var[e]] - self.c2v[e])).tanh()),
            );
            // Exclusive products of the observation factor and all other
            // incident tanh values, via forward/backward passes (division-free
            // so exact zeros are handled).
            fwd.clear();
            fwd.push(self.obs_factor[c]);
            for i in 0..deg {
                let next = fwd[i] * tanhs[i];
                fwd.push(next);
            }
            let mut back = 1.0;
            for i in (0..deg).rev() {
                let msg = (2.0 * (fwd[i] * back).atanh()).clamp(-LLR_MAX, LLR_MAX);
                let delta = (msg - self.c2v[lo + i]).abs();
                if delta > max_delta {
                    max_delta = delta;
                }
                self.c2v[lo + i] = msg;
                back *= tanhs[i];
            }
        }
        self.posterior.copy_from_slice(priors);
        for e in 0..self.check_var.len() {
            self.posterior[self.check_var[e]] += self.c2v[e];
        }
        max_delta
    }

    /// Posteriors after the latest sweep (the priors before any sweep).
    pub(crate) fn posteriors(&self) -> &[f64] {
        &self.posterior
    }

    /// Sign decisions on the posteriors; exact zero maps to bit 0.
    pub(crate) fn hard_decisions(&self) -> Vec<u8> {
        self.posterior.iter().map(|&p| u8::from(p < 0.0)).collect()
    }

    /// How many checks in `ids` are violated by the given hard decisions.
    pub(crate) fn count_unsatisfied(&self, hard: &[u8], ids: std::ops::Range<usize>) -> usize {
        ids.filter(|&c| {
            let mut parity = 0u8;
            for e in self.check_off[c]..self.check_off[c + 1] {
                parity ^= hard[self.check_var[e]];
            }
            parity != self.obs_bit[c]
        })
        .count()
    }
}
