//! Shared helpers for the acceptance suite: a brute-force grid reference for
//! the operating-point optimizer and feasibility measurement of returned
//! plans.

use pcf_core::info::{entropies, CorrelationModel, EntropySet};
use pcf_core::optimizer::{pcf_objective, NetworkCapacities, PcfPlan};

/// Prints the one-line verdict for a criterion and fails the test with the
/// same line when the criterion does not hold.
pub fn verdict(id: &str, ok: bool, detail: &str) {
    let line = format!("{id} {} {detail}", if ok { "PASS" } else { "FAIL" });
    println!("{line}");
    assert!(ok, "{line}");
}

/// Exhaustive reference for the plan optimizer: the best objective value on
/// an `n`-point-per-axis grid over the broadcast fraction and both
/// description rates, keeping only points that satisfy every plan
/// constraint, and trying both relay-role assignments.
pub fn grid_oracle(caps: &NetworkCapacities, model: &CorrelationModel, n: usize) -> f64 {
    let direct = grid_one(caps, &entropies(model), n);
    let exchanged = grid_one(&caps.swapped(), &entropies(&model.swapped()), n);
    direct.max(exchanged)
}

fn grid_one(caps: &NetworkCapacities, e: &EntropySet, n: usize) -> f64 {
    if caps.c_1d <= 0.0 {
        // With relay 1 unable to forward, every broadcast split wastes time
        // and the frame falls back to pure amplify-and-forward.
        return caps.c_af1 * 0.5;
    }
    let frac = |i: usize| i as f64 / (n - 1) as f64;
    let mut best = 0.0f64;
    for ia in 0..n {
        let alpha1 = frac(ia);
        for ix in 0..n {
            let rx = e.hx_given_y + (e.hx - e.hx_given_y) * frac(ix);
            // A nonnegative amplify-and-forward share caps the broadcast
            // fraction at c_1d / (c_1d + rx).
            if alpha1 * (caps.c_1d + rx) > caps.c_1d + 1e-12 {
                continue;
            }
            for iy in 0..n {
                let ry = e.hy_given_x + (e.hy - e.hy_given_x) * frac(iy);
                if ry > rx + 1e-12 || rx + ry < e.hxy - 1e-12 {
                    continue;
                }
                if alpha1 * ry > (1.0 - alpha1) * caps.c_2d + 1e-12 {
                    continue;
                }
                let v = pcf_objective(alpha1, rx, ry, caps, e);
                if v > best {
                    best = v;
                }
            }
        }
    }
    best
}

/// Largest constraint violation of a plan: time-share bounds, both relay
/// deadline inequalities, the amplify-and-forward share bound, and the
/// admissible-compression region with its rate ordering. Zero (up to slack)
/// means feasible.
pub fn plan_violation(
    plan: &PcfPlan,
    caps: &NetworkCapacities,
    model: &CorrelationModel,
) -> f64 {
    let (caps, model) = if plan.swapped {
        (caps.swapped(), model.swapped())
    } else {
        (*caps, model.clone())
    };
    let e = entropies(&model);
    let mut v = (-plan.alpha1).max(-plan.alpha2);
    v = v.max(plan.alpha1 + 2.0 * plan.alpha2 - 1.0);
    v = v.max(plan.alpha1 * plan.rx - (1.0 - plan.alpha1 - 2.0 * plan.alpha2) * caps.c_1d);
    v = v.max(plan.alpha1 * plan.ry - (1.0 - plan.alpha1) * caps.c_2d);
    if plan.ry + caps.c_2d > 0.0 {
        v = v.max(plan.alpha1 - caps.c_2d / (plan.ry + caps.c_2d));
    }
    if caps.c_1d > 0.0 {
        let alpha2_cap = 0.5 * (1.0 - plan.alpha1 * (caps.c_1d + plan.rx) / caps.c_1d);
        v = v.max(plan.alpha2 - alpha2_cap);
    }
    v = v.max(e.hx_given_y - plan.rx);
    v = v.max(e.hy_given_x - plan.ry);
    v = v.max(e.hxy - plan.rx - plan.ry);
    v.max(plan.ry - plan.rx)
}
