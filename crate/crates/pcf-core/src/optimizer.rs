//! Frame-allocation planning for the two-relay network.
//!
//! The planner splits the unit frame between the source broadcast
//! (`alpha1`), the two halves of the amplify-and-forward exchange
//! (`alpha2` each), and the compress-and-forward description transfers,
//! maximizing the delivered information rate subject to the link budgets
//! and the distributed-compression (Slepian-Wolf) constraints on the two
//! relay descriptions. Baseline rates for pure compress-and-forward,
//! best-relay decode-and-forward, and plain amplify-and-forward are
//! derived from the same capacity bookkeeping.

use std::fmt;

use crate::channels::{cascade_channel, ChannelError, ChannelModel};
use crate::info::{entropies, CorrelationModel, EntropySet};

/// Shannon capacities of the four physical links plus the end-to-end
/// amplify-and-forward capacities of the two relay paths, all in bits
/// per channel use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkCapacities {
    /// Source to relay 1.
    pub c_s1: f64,
    /// Source to relay 2.
    pub c_s2: f64,
    /// Relay 1 to destination.
    pub c_1d: f64,
    /// Relay 2 to destination.
    pub c_2d: f64,
    /// Source through relay 1 to destination when relay 1 amplifies.
    pub c_af1: f64,
    /// Source through relay 2 to destination when relay 2 amplifies.
    pub c_af2: f64,
}

impl NetworkCapacities {
    /// Computes every capacity from the four link models.
    pub fn from_channels(
        ch_s1: &ChannelModel,
        ch_s2: &ChannelModel,
        ch_1d: &ChannelModel,
        ch_2d: &ChannelModel,
    ) -> Result<Self, ChannelError> {
        for ch in [ch_s1, ch_s2, ch_1d, ch_2d] {
            ch.validate()?;
        }
        Ok(NetworkCapacities {
            c_s1: ch_s1.capacity(),
            c_s2: ch_s2.capacity(),
            c_1d: ch_1d.capacity(),
            c_2d: ch_2d.capacity(),
            c_af1: af_cascade_capacity(ch_s1, ch_1d)?,
            c_af2: af_cascade_capacity(ch_s2, ch_2d)?,
        })
    }

    /// The same network with the two relays relabeled.
    pub fn swapped(&self) -> Self {
        NetworkCapacities {
            c_s1: self.c_s2,
            c_s2: self.c_s1,
            c_1d: self.c_2d,
            c_2d: self.c_1d,
            c_af1: self.c_af2,
            c_af2: self.c_af1,
        }
    }
}

/// End-to-end capacity of a source -> relay -> destination path when the
/// relay forwards its observation without decoding.
///
/// Both hops must be the same channel kind. For erasure links the symbol
/// survives only if neither hop erases; for crossover links the flips
/// compose in series; for the soft-noise links the relay rescales its
/// noisy observation to unit power, which yields the usual cascade
/// signal-to-noise ratio `g1*g2 / (g1 + g2 + 1)`.
pub fn af_cascade_capacity(ch_s: &ChannelModel, ch_d: &ChannelModel) -> Result<f64, ChannelError> {
    Ok(cascade_channel(ch_s, ch_d)?.capacity())
}

/// A complete time-sharing and description-rate assignment.
///
/// `rx` and `ry` are the description rates, in bits per source symbol,
/// of the alternating relay and the pure compress-and-forward relay
/// respectively. `swapped` records whether the roles were exchanged
/// relative to the input labeling, i.e. whether relay 2 is the
/// alternating one. `rate` is the end-to-end information rate in bits
/// per channel use of the whole frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcfPlan {
    pub alpha1: f64,
    pub alpha2: f64,
    pub rx: f64,
    pub ry: f64,
    pub swapped: bool,
    pub rate: f64,
}

impl fmt::Display for PcfPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "alpha1={:.6}", self.alpha1)?;
        writeln!(f, "alpha2={:.6}", self.alpha2)?;
        writeln!(f, "rx={:.6}", self.rx)?;
        writeln!(f, "ry={:.6}", self.ry)?;
        writeln!(f, "swapped={}", self.swapped)?;
        write!(f, "rate={:.6}", self.rate)
    }
}

/// Step schedule for the projected gradient ascent.
#[derive(Debug, Clone, Copy)]
pub struct OptimizeOpts {
    /// Initial step size; halved whenever a step fails to improve.
    pub step: f64,
    /// Hard cap on ascent iterations.
    pub max_iters: usize,
    /// Stop once a successful step moves the iterate less than this.
    pub tol: f64,
}

impl Default for OptimizeOpts {
    fn default() -> Self {
        OptimizeOpts {
            step: 0.05,
            max_iters: 5000,
            tol: 1e-9,
        }
    }
}

/// Largest broadcast fraction compatible with both relay deadlines at the
/// given description rates.
///
/// The pure compress-and-forward relay needs `alpha1*ry <= (1-alpha1)*c_2d`
/// worth of airtime, and the alternating relay needs a nonnegative
/// amplify-and-forward residual after sending its description, which caps
/// `alpha1` at `c_1d/(c_1d+rx)`. A deadline with nothing to send and no
/// capacity imposes no bound at all.
fn alpha1_upper_bound(rx: f64, ry: f64, caps: &NetworkCapacities) -> f64 {
    let cf = if ry + caps.c_2d > 0.0 {
        caps.c_2d / (ry + caps.c_2d)
    } else {
        1.0
    };
    let af = if rx + caps.c_1d > 0.0 {
        caps.c_1d / (caps.c_1d + rx)
    } else {
        1.0
    };
    cf.min(af)
}

/// Frame rate delivered by a broadcast fraction and description-rate pair.
///
/// The first term is the information the two descriptions convey about the
/// broadcast symbols; the second term is the amplify-and-forward residual:
/// whatever airtime relay 1 has left after forwarding its description is
/// split evenly between fresh source symbols and their amplified copies,
/// each half delivering `c_af1/2` per use.
///
/// Panics if `caps.c_1d` is not positive; the callers special-case dead
/// forward links before evaluating.
pub fn pcf_objective(alpha1: f64, rx: f64, ry: f64, caps: &NetworkCapacities, e: &EntropySet) -> f64 {
    assert!(caps.c_1d > 0.0, "objective needs a live relay-1 forward link");
    let _ = ry;
    let af_time = 0.5 - alpha1 * (caps.c_1d + rx) / (2.0 * caps.c_1d);
    alpha1 * e.i_z_xy + af_time * caps.c_af1
}

/// Pulls a point into the feasible set by cycling through its defining
/// half-spaces until the iterate stops moving.
///
/// The description rates are projected onto the admissible-compression
/// region intersected with `ry <= rx`, and the broadcast fraction is then
/// clamped to `[0, alpha1_upper_bound]` evaluated at the current rates.
pub fn project_feasible(
    point: (f64, f64, f64),
    e: &EntropySet,
    caps: &NetworkCapacities,
) -> (f64, f64, f64) {
    let (mut a, mut rx, mut ry) = point;
    for _ in 0..500 {
        let prev = (a, rx, ry);
        rx = rx.max(e.hx_given_y);
        ry = ry.max(e.hy_given_x);
        if rx + ry < e.hxy {
            let d = 0.5 * (e.hxy - rx - ry);
            rx += d;
            ry += d;
        }
        if ry > rx {
            let m = 0.5 * (rx + ry);
            rx = m;
            ry = m;
        }
        a = a.clamp(0.0, alpha1_upper_bound(rx, ry, caps));
        let moved = (a - prev.0).abs().max((rx - prev.1).abs()).max((ry - prev.2).abs());
        if moved < 1e-10 {
            break;
        }
    }
    (a, rx, ry)
}

/// One projected-gradient ascent run for a fixed relay-role assignment.
fn solve_assignment(caps: &NetworkCapacities, model: &CorrelationModel, opts: &OptimizeOpts) -> PcfPlan {
    let e = entropies(model);
    if caps.c_1d <= 0.0 {
        // Relay 1 cannot forward anything, so the broadcast phase is useless
        // and the frame degenerates to the amplify-and-forward fallback.
        return finish_plan(0.0, e.hx, e.hy_given_x, caps, caps.c_af1 / 2.0);
    }
    let start = (
        alpha1_upper_bound(e.hx, e.hy_given_x, caps),
        e.hx,
        e.hy_given_x,
    );
    let mut p = project_feasible(start, &e, caps);
    let mut value = pcf_objective(p.0, p.1, p.2, caps, &e);
    for _ in 0..opts.max_iters {
        let g_a = e.i_z_xy - (caps.c_1d + p.1) / (2.0 * caps.c_1d) * caps.c_af1;
        let g_rx = -p.0 * caps.c_af1 / (2.0 * caps.c_1d);
        let mut step = opts.step;
        let mut accepted = None;
        while step >= 1e-10 {
            let cand = project_feasible((p.0 + step * g_a, p.1 + step * g_rx, p.2), &e, caps);
            let cand_value = pcf_objective(cand.0, cand.1, cand.2, caps, &e);
            if cand_value > value + 1e-15 {
                accepted = Some((cand, cand_value));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, cand_value)) = accepted else {
            break;
        };
        let moved = (cand.0 - p.0)
            .abs()
            .max((cand.1 - p.1).abs())
            .max((cand.2 - p.2).abs());
        p = cand;
        value = cand_value;
        if moved < opts.tol {
            break;
        }
    }
    finish_plan(p.0, p.1, p.2, caps, value)
}

/// Recovers the amplify-and-forward share and packages a plan.
fn finish_plan(alpha1: f64, rx: f64, ry: f64, caps: &NetworkCapacities, rate: f64) -> PcfPlan {
    let alpha2 = if caps.c_1d > 0.0 {
        (0.5 * (1.0 - alpha1 * (caps.c_1d + rx) / caps.c_1d)).max(0.0)
    } else {
        0.5 * (1.0 - alpha1)
    };
    PcfPlan {
        alpha1,
        alpha2,
        rx,
        ry,
        swapped: false,
        rate,
    }
}

/// Best partial compress-and-forward plan over both relay-role
/// assignments.
///
/// Runs the ascent once as labeled and once with the relays exchanged,
/// and returns the better plan; ties keep the input labeling.
pub fn optimize_pcf(caps: &NetworkCapacities, model: &CorrelationModel, opts: &OptimizeOpts) -> PcfPlan {
    let direct = solve_assignment(caps, model, opts);
    let mut exchanged = solve_assignment(&caps.swapped(), &model.swapped(), opts);
    exchanged.swapped = true;
    if exchanged.rate > direct.rate {
        exchanged
    } else {
        direct
    }
}

/// Best rate when both relays compress-and-forward for the whole frame.
///
/// With no amplify-and-forward residual the rate is the broadcast
/// fraction times the description quality, and the broadcast fraction is
/// capped by whichever relay's description misses its deadline first.
/// The cap is substituted into the objective so the ascent can trade the
/// two description rates against each other directly.
pub fn pure_cf_rate(caps: &NetworkCapacities, model: &CorrelationModel) -> f64 {
    pure_cf_plan(caps, model).rate
}

/// Full time-sharing assignment behind [`pure_cf_rate`], for driving
/// trial executions. `alpha2` is zero since no frame time is amplified,
/// and the description rates are not constrained to `ry <= rx` because
/// neither relay plays the alternating role.
pub fn pure_cf_plan(caps: &NetworkCapacities, model: &CorrelationModel) -> PcfPlan {
    let direct = pure_cf_assignment(caps, model);
    let exchanged = pure_cf_assignment(&caps.swapped(), &model.swapped());
    let (sol, swapped) = if exchanged.0 > direct.0 {
        (exchanged, true)
    } else {
        (direct, false)
    };
    PcfPlan {
        alpha1: sol.1,
        alpha2: 0.0,
        rx: sol.2,
        ry: sol.3,
        swapped,
        rate: sol.0,
    }
}

/// Returns (rate, alpha1, rx, ry) for one labeling.
fn pure_cf_assignment(caps: &NetworkCapacities, model: &CorrelationModel) -> (f64, f64, f64, f64) {
    let e = entropies(model);
    if e.i_z_xy <= 0.0 {
        return (0.0, 0.0, e.hx, e.hy_given_x);
    }
    let bound = |rx: f64, ry: f64| {
        let b1 = if rx + caps.c_1d > 0.0 {
            caps.c_1d / (rx + caps.c_1d)
        } else {
            1.0
        };
        let b2 = if ry + caps.c_2d > 0.0 {
            caps.c_2d / (ry + caps.c_2d)
        } else {
            1.0
        };
        (b1, b2)
    };
    let project = |mut rx: f64, mut ry: f64| {
        for _ in 0..500 {
            let prev = (rx, ry);
            rx = rx.max(e.hx_given_y);
            ry = ry.max(e.hy_given_x);
            if rx + ry < e.hxy {
                let d = 0.5 * (e.hxy - rx - ry);
                rx += d;
                ry += d;
            }
            if (rx - prev.0).abs().max((ry - prev.1).abs()) < 1e-10 {
                break;
            }
        }
        (rx, ry)
    };
    let value = |rx: f64, ry: f64| {
        let (b1, b2) = bound(rx, ry);
        e.i_z_xy * b1.min(b2)
    };
    let opts = OptimizeOpts::default();
    let (mut rx, mut ry) = project(e.hx, e.hy_given_x);
    let mut best = value(rx, ry);
    for _ in 0..opts.max_iters {
        let (b1, b2) = bound(rx, ry);
        // Relaxing the binding deadline is the only way to raise the cap, so
        // follow the gradient of the active branch of the minimum.
        let (g_rx, g_ry) = if b1 < b2 {
            (-e.i_z_xy * caps.c_1d / (rx + caps.c_1d).powi(2), 0.0)
        } else if b2 < b1 {
            (0.0, -e.i_z_xy * caps.c_2d / (ry + caps.c_2d).powi(2))
        } else {
            (
                -0.5 * e.i_z_xy * caps.c_1d / (rx + caps.c_1d).powi(2),
                -0.5 * e.i_z_xy * caps.c_2d / (ry + caps.c_2d).powi(2),
            )
        };
        let mut step = opts.step;
        let mut accepted = None;
        while step >= 1e-10 {
            let (cx, cy) = project(rx + step * g_rx, ry + step * g_ry);
            let cand = value(cx, cy);
            if cand > best + 1e-15 {
                accepted = Some((cx, cy, cand));
                break;
            }
            step *= 0.5;
        }
        let Some((cx, cy, cand)) = accepted else {
            break;
        };
        let moved = (cx - rx).abs().max((cy - ry).abs());
        rx = cx;
        ry = cy;
        best = cand;
        if moved < opts.tol {
            break;
        }
    }
    let (b1, b2) = bound(rx, ry);
    (best, b1.min(b2), rx, ry)
}

/// Rate of the stronger relay running decode-and-forward with twice the
/// forwarding bandwidth, the single-relay reference service.
///
/// For one relay the optimum listen fraction equalizes intake and
/// delivery, giving `2*c_s*c_d / (c_s + 2*c_d)`.
pub fn best_relay_df_rate(caps: &NetworkCapacities) -> f64 {
    let per_relay = |c_s: f64, c_d: f64| {
        if c_s <= 0.0 || c_d <= 0.0 {
            0.0
        } else {
            2.0 * c_s * c_d / (c_s + 2.0 * c_d)
        }
    };
    per_relay(caps.c_s1, caps.c_1d).max(per_relay(caps.c_s2, caps.c_2d))
}

/// Rate of the stronger relay amplifying for half the frame.
pub fn af_rate(caps: &NetworkCapacities) -> f64 {
    caps.c_af1.max(caps.c_af2) / 2.0
}
