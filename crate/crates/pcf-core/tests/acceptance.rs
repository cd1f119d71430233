//! End-to-end acceptance gate for the toolkit. Each test measures one
//! numbered claim (C1 through C10) about the shipped behavior, prints a
//! single PASS/FAIL line with the measured values, and fails honestly when
//! the implementation cannot hit the target.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pcf_core::channels::{ChannelModel, Observation, LLR_MAX};
use pcf_core::experiments::{
    emit_csv, run_sweep, ResultRow, SweepConfig, SweepMode, SweepPoint, SweepProtocol,
    SweepVariable,
};
use pcf_core::info::{binary_entropy, entropies, CorrelationModel};
use pcf_core::joint::{joint_decode, side_info_prior, side_info_probabilities, SideInfoModel};
use pcf_core::optimizer::{optimize_pcf, NetworkCapacities, OptimizeOpts};
use pcf_core::rateless::{lt_decode, lt_encode, robust_soliton, LtGraph};

fn theory_series(rows: &[ResultRow], p: SweepProtocol) -> Vec<(f64, f64)> {
    rows.iter()
        .filter(|r| r.protocol == p)
        .map(|r| match r.sweep {
            SweepPoint::Scalar(v) => (v, r.theory_rate.expect("theory value")),
            SweepPoint::Pair(..) => unreachable!("scalar sweep"),
        })
        .collect()
}

fn sim_series(rows: &[ResultRow], p: SweepProtocol) -> Vec<(f64, f64)> {
    rows.iter()
        .filter(|r| r.protocol == p)
        .map(|r| match r.sweep {
            SweepPoint::Scalar(v) => (v, r.sim_rate.unwrap_or(0.0)),
            SweepPoint::Pair(..) => unreachable!("scalar sweep"),
        })
        .collect()
}

#[test]
fn c01_perfect_channel_plateau_matches_the_grid_oracle() {
    let t0 = Instant::now();
    let perfect = ChannelModel::Bec(0.0);
    let caps =
        NetworkCapacities::from_channels(&perfect, &perfect, &perfect, &perfect).unwrap();
    let model = CorrelationModel::from_crossovers(0.0, 0.0);
    let plan = optimize_pcf(&caps, &model, &OptimizeOpts::default());
    let grid = common::grid_oracle(&caps, &model, 200);
    let secs = t0.elapsed().as_secs_f64();
    let plateau_ok = (plan.rate - 0.5).abs() <= 1e-6;
    // The grid has finite resolution, so it can only sit below the solver;
    // a large excess either way would mean one of the two is broken.
    let grid_ok = plan.rate >= grid - 1e-4 && plan.rate <= grid + 1e-2;
    common::verdict(
        "C1",
        plateau_ok && grid_ok && secs < 10.0,
        &format!(
            "perfect-channel rate {:.6} vs stated 0.500000, grid oracle {:.6}, {secs:.1}s",
            plan.rate, grid
        ),
    );
}

#[test]
fn c02_erasure_curves_are_monotone_and_ordered() {
    let t0 = Instant::now();
    let cfg = SweepConfig::new(SweepVariable::BecNonErasure, 0.5, 1.0, 0.05);
    let rows = run_sweep(&cfg).unwrap();
    let pcf = theory_series(&rows, SweepProtocol::Pcf);
    let cf = theory_series(&rows, SweepProtocol::Cf);
    let df = theory_series(&rows, SweepProtocol::Df);

    let mut monotone = true;
    for p in [
        SweepProtocol::Pcf,
        SweepProtocol::Cf,
        SweepProtocol::Df,
        SweepProtocol::Af,
        SweepProtocol::Cutset,
    ] {
        for w in theory_series(&rows, p).windows(2) {
            if w[1].1 < w[0].1 - 1e-9 {
                monotone = false;
            }
        }
    }
    let endpoint_ok = pcf.last().unwrap().1 >= cf.last().unwrap().1 - 1e-9;

    // The hybrid should overtake decode-and-forward past some link quality
    // strictly inside the sweep, and stay ahead for every point after it.
    let above: Vec<usize> = pcf
        .iter()
        .zip(&df)
        .enumerate()
        .filter(|(_, (a, b))| a.1 > b.1 + 1e-12)
        .map(|(i, _)| i)
        .collect();
    let threshold_ok = match above.first() {
        Some(&i) => {
            i > 0 && pcf[i].0 < 1.0 && above.len() == pcf.len() - i
        }
        None => false,
    };
    let best_gap = pcf
        .iter()
        .zip(&df)
        .map(|(a, b)| a.1 - b.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let secs = t0.elapsed().as_secs_f64();
    common::verdict(
        "C2",
        monotone && endpoint_ok && threshold_ok && secs < 60.0,
        &format!(
            "monotone={monotone}, pcf(1.0)={:.4} vs cf(1.0)={:.4}, points with pcf>df {}/{}, best pcf-df gap {best_gap:.6}, {secs:.1}s",
            pcf.last().unwrap().1,
            cf.last().unwrap().1,
            above.len(),
            pcf.len()
        ),
    );
}

#[test]
fn c03_theory_crossover_lands_in_the_stated_window() {
    let t0 = Instant::now();
    let mut cfg = SweepConfig::new(SweepVariable::SnrDb, 0.0, 14.0, 0.1);
    cfg.protocols = vec![SweepProtocol::Pcf, SweepProtocol::Df];
    let rows = run_sweep(&cfg).unwrap();
    let pcf = theory_series(&rows, SweepProtocol::Pcf);
    let df = theory_series(&rows, SweepProtocol::Df);
    let crossover = pcf
        .iter()
        .zip(&df)
        .find(|(a, b)| a.1 > b.1 + 1e-12)
        .map(|(a, _)| a.0);
    let best_gap = pcf
        .iter()
        .zip(&df)
        .map(|(a, b)| a.1 - b.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let secs = t0.elapsed().as_secs_f64();
    let label = crossover.map_or("none".to_string(), |s| format!("{s:.1} dB"));
    common::verdict(
        "C3",
        matches!(crossover, Some(s) if (6.2..=7.2).contains(&s)) && secs < 60.0,
        &format!(
            "first SNR with pcf theory above df theory: {label} (window 6.2..7.2 dB), best pcf-df gap {best_gap:.6} bits, {secs:.1}s"
        ),
    );
}

#[test]
fn c04_simulated_crossover_exists_in_the_ci_window() {
    let t0 = Instant::now();
    let mut cfg = SweepConfig::new(SweepVariable::SnrDb, 6.0, 10.0, 1.0);
    cfg.protocols = vec![SweepProtocol::Pcf, SweepProtocol::Df];
    cfg.mode = SweepMode::Simulate;
    cfg.seed = 7;
    cfg.defaults.k = 1000;
    cfg.defaults.trials = 20;
    cfg.defaults.reliability_target = 0.9;
    cfg.defaults.overhead_margin = 0.4;
    let rows = run_sweep(&cfg).unwrap();
    let pcf = sim_series(&rows, SweepProtocol::Pcf);
    let df = sim_series(&rows, SweepProtocol::Df);
    let crossover = pcf
        .iter()
        .zip(&df)
        .find(|(a, b)| a.1 > b.1 + 1e-12)
        .map(|(a, _)| a.0);
    let gaps: Vec<String> = pcf
        .iter()
        .zip(&df)
        .map(|(a, b)| format!("{:+.3}@{}dB", a.1 - b.1, a.0))
        .collect();
    let secs = t0.elapsed().as_secs_f64();
    let label = crossover.map_or("none".to_string(), |s| format!("{s:.0} dB"));
    common::verdict(
        "C4",
        crossover.is_some(),
        &format!(
            "simulated pcf-df crossover at k=1000: {label} (window 6..10 dB); gaps {}; {secs:.0}s",
            gaps.join(" ")
        ),
    );
}

/// Desk-scale variant of C4: full block length and trial count. Run with
/// `cargo test -p pcf-core --test acceptance -- --ignored` and expect tens
/// of minutes.
#[test]
#[ignore = "desk-scale run: k=4000 with 200 trials per point"]
fn c04_full_simulated_crossover_at_desk_scale() {
    let mut cfg = SweepConfig::new(SweepVariable::SnrDb, 5.0, 10.0, 1.0);
    cfg.protocols = vec![SweepProtocol::Pcf, SweepProtocol::Df];
    cfg.mode = SweepMode::Simulate;
    cfg.seed = 7;
    cfg.defaults.k = 4000;
    cfg.defaults.trials = 200;
    cfg.defaults.overhead_margin = 0.3;
    let rows = run_sweep(&cfg).unwrap();
    let pcf = sim_series(&rows, SweepProtocol::Pcf);
    let df = sim_series(&rows, SweepProtocol::Df);
    let diffs: Vec<(f64, f64)> = pcf
        .iter()
        .zip(&df)
        .map(|(a, b)| (a.0, a.1 - b.1))
        .collect();
    let crossover = diffs.windows(2).find_map(|w| {
        let ((s0, d0), (s1, d1)) = (w[0], w[1]);
        (d0 <= 0.0 && d1 > 0.0).then(|| s0 + (s1 - s0) * (-d0) / (d1 - d0))
    });
    let label = crossover.map_or("none".to_string(), |s| format!("{s:.2} dB"));
    common::verdict(
        "C4-full",
        matches!(crossover, Some(s) if (6.5..=8.5).contains(&s)),
        &format!("interpolated simulated crossover {label} (window 6.5..8.5 dB)"),
    );
}

#[test]
fn c05_side_information_formulas_hold_on_random_draws() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC5);
    let mut worst_comp = 0.0f64;
    let mut worst_identity = 0.0f64;
    let mut worst_excess = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let l: f64 = rng.random_range(-29.0..29.0);
        let pe1: f64 = rng.random_range(0.0..=1.0);
        let pe2: f64 = rng.random_range(0.0..=1.0);
        let model = SideInfoModel::new(pe1, pe2);
        let (p0, p1) = side_info_probabilities(l, &model);
        worst_comp = worst_comp.max((p0 + p1 - 1.0).abs());

        // With error-free quantizers the prior must reproduce the incoming
        // belief exactly.
        let clean = SideInfoModel::new(0.0, 0.0);
        worst_identity = worst_identity.max((side_info_prior(l, &clean) - l).abs());

        // The correlation channel caps how much belief can cross sides.
        if model.agreement > 0.0 && model.disagreement > 0.0 {
            let bound = (model.agreement / model.disagreement).ln().abs();
            let prior = side_info_prior(l, &model).abs();
            worst_excess = worst_excess.max(prior - bound);
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let ok = worst_comp <= 1e-12 && worst_identity <= 1e-9 && worst_excess <= 1e-12;
    common::verdict(
        "C5",
        ok && secs < 5.0,
        &format!(
            "complement dev {worst_comp:.2e}, clean-prior identity dev {worst_identity:.2e}, bound excess {worst_excess:.2e}, {secs:.2}s"
        ),
    );
}

#[test]
fn c06_entropy_enumeration_matches_closed_forms() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC6);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let pe1: f64 = rng.random_range(0.0..=1.0);
        let pe2: f64 = rng.random_range(0.0..=1.0);
        let model = CorrelationModel::from_crossovers(pe1, pe2);
        let e = entropies(&model);
        let h_eq = binary_entropy(model.p_eq());
        let closed = [
            (e.hx, 1.0),
            (e.hy, 1.0),
            (e.hy_given_x, h_eq),
            (e.hx_given_y, h_eq),
            (e.hxy, 1.0 + h_eq),
            (
                e.i_z_xy,
                1.0 + h_eq - binary_entropy(pe1) - binary_entropy(pe2),
            ),
        ];
        for (got, want) in closed {
            worst = worst.max((got - want).abs());
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    common::verdict(
        "C6",
        worst <= 1e-9 && secs < 5.0,
        &format!("largest enumeration-vs-closed-form gap {worst:.2e} over 1000 models, {secs:.2}s"),
    );
}

#[test]
fn c07_optimizer_beats_the_grid_and_stays_feasible() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC7);
    let mut worst_shortfall = f64::NEG_INFINITY;
    let mut worst_violation = f64::NEG_INFINITY;
    for draw in 0..20 {
        let link = |rng: &mut ChaCha8Rng| {
            if draw % 2 == 0 {
                ChannelModel::Bec(rng.random_range(0.0..0.9))
            } else {
                ChannelModel::biawgn_from_db(rng.random_range(-2.0..14.0))
            }
        };
        let chs = [link(&mut rng), link(&mut rng), link(&mut rng), link(&mut rng)];
        let caps =
            NetworkCapacities::from_channels(&chs[0], &chs[1], &chs[2], &chs[3]).unwrap();
        let model = CorrelationModel::from_crossovers(
            rng.random_range(0.0..0.4),
            rng.random_range(0.0..0.4),
        );
        let plan = optimize_pcf(&caps, &model, &OptimizeOpts::default());
        let grid = common::grid_oracle(&caps, &model, 200);
        worst_shortfall = worst_shortfall.max(grid - plan.rate);
        worst_violation = worst_violation.max(common::plan_violation(&plan, &caps, &model));
    }
    let secs = t0.elapsed().as_secs_f64();
    let ok = worst_shortfall <= 1e-4 && worst_violation <= 1e-8 && secs < 300.0;
    common::verdict(
        "C7",
        ok,
        &format!(
            "worst grid shortfall {worst_shortfall:.2e} bits, worst constraint violation {worst_violation:.2e}, 20 draws, {secs:.1}s"
        ),
    );
}

/// Exact bitwise posteriors of a parity factor graph by enumerating all
/// source configurations; check j contributes weight e^{+l/2} when its
/// parity is even and e^{-l/2} when odd.
fn exact_posteriors(k: usize, checks: &[Vec<usize>], llrs: &[f64]) -> Vec<f64> {
    let mut mass0 = vec![0.0f64; k];
    let mut mass1 = vec![0.0f64; k];
    for cfg in 0usize..(1 << k) {
        let mut w = 1.0;
        for (j, vars) in checks.iter().enumerate() {
            let parity = vars.iter().fold(0, |acc, &v| acc ^ ((cfg >> v) & 1));
            w *= if parity == 0 {
                (llrs[j] / 2.0).exp()
            } else {
                (-llrs[j] / 2.0).exp()
            };
        }
        for i in 0..k {
            if (cfg >> i) & 1 == 0 {
                mass0[i] += w;
            } else {
                mass1[i] += w;
            }
        }
    }
    mass0
        .iter()
        .zip(&mass1)
        .map(|(a, b)| (a / b).ln())
        .collect()
}

#[test]
fn c08_belief_propagation_is_exact_on_trees_and_passes_beliefs_through() {
    let t0 = Instant::now();
    // Two cycle-free graphs on five source bits whose observations conflict,
    // so no hard-decision pattern satisfies every check and the decoder runs
    // to full message convergence.
    let toys: [(&[&[usize]], &[f64]); 2] = [
        (
            &[&[0], &[1], &[2], &[3], &[4], &[0, 1, 2], &[2, 3, 4]],
            &[1.2, 0.7, 1.9, 0.4, 1.1, -0.8, -1.5],
        ),
        (
            &[&[0], &[0, 1], &[1, 2], &[2, 3], &[3, 4], &[4]],
            &[1.3, -0.9, 0.5, -1.7, 0.8, -2.0],
        ),
    ];
    let mut worst = 0.0f64;
    for (checks, llrs) in toys {
        let adjacency: Vec<Vec<usize>> = checks.iter().map(|c| c.to_vec()).collect();
        let graph = LtGraph {
            k: 5,
            n: adjacency.len(),
            adjacency: adjacency.clone(),
            seed: 0,
        };
        let obs: Vec<Observation> = llrs.iter().map(|&l| Observation::Llr(l)).collect();
        let got = lt_decode(&obs, &graph, None, 60).extrinsic_source_llrs;
        let want = exact_posteriors(5, &adjacency, llrs);
        for (g, w) in got.iter().zip(&want) {
            worst = worst.max((g - w).abs());
        }
    }

    // Perfect correlation must copy the clean side's decisions onto a side
    // that observed nothing at all.
    let k1 = 100;
    let dist = robust_soliton(k1, 0.03, 0.5).unwrap();
    let clean = SideInfoModel::new(0.0, 0.0);
    let mut copied = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC8);
        let source: Vec<u8> = (0..k1).map(|_| rng.random_range(0..=1u8)).collect();
        let (coded, graph_x) = lt_encode(&source, &dist, seed, 140).unwrap();
        let obs_x: Vec<Observation> = coded
            .iter()
            .map(|&b| Observation::Llr(if b == 0 { LLR_MAX } else { -LLR_MAX }))
            .collect();
        let graph_y = LtGraph::build(k1, 120, &dist, seed.wrapping_add(977)).unwrap();
        let obs_y = vec![Observation::Erased; 120];
        let out = joint_decode(&obs_x, &graph_x, &obs_y, &graph_y, &clean, 40, 2);
        if out.y_hat == out.x_hat {
            copied += 1;
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let ok = worst <= 1e-9 && copied == 50 && secs < 60.0;
    common::verdict(
        "C8",
        ok,
        &format!(
            "tree posterior max dev {worst:.2e}, passthrough copies {copied}/50 seeds, {secs:.1}s"
        ),
    );
}

#[test]
fn c09_gain_grid_is_monotone_along_the_pure_cf_axis() {
    let t0 = Instant::now();
    let mut cfg = SweepConfig::new(SweepVariable::RelayGrid, 0.0, 14.0, 0.5);
    cfg.protocols = vec![SweepProtocol::Pcf, SweepProtocol::Df];
    let rows = run_sweep(&cfg).unwrap();
    let mut gain: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    for r in &rows {
        if let SweepPoint::Pair(a, b) = r.sweep {
            let cell = gain.entry((a.to_bits(), b.to_bits())).or_insert(0.0);
            let rate = r.theory_rate.expect("theory value");
            match r.protocol {
                SweepProtocol::Pcf => *cell += rate,
                SweepProtocol::Df => *cell -= rate,
                _ => unreachable!(),
            }
        }
    }
    let mut a_axis: Vec<u64> = gain.keys().map(|&(a, _)| a).collect();
    a_axis.dedup();
    let mut violations = 0usize;
    let mut pairs = 0usize;
    let mut worst_drop = 0.0f64;
    let mut worst_at = (0.0, 0.0, 0.0);
    for &a in &a_axis {
        let col: Vec<(f64, f64)> = gain
            .range((a, 0)..=(a, u64::MAX))
            .map(|(&(_, b), &g)| (f64::from_bits(b), g))
            .collect();
        for w in col.windows(2) {
            pairs += 1;
            let drop = w[0].1 - w[1].1;
            if drop > 1e-9 {
                violations += 1;
                if drop > worst_drop {
                    worst_drop = drop;
                    worst_at = (f64::from_bits(a), w[0].0, w[1].0);
                }
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    common::verdict(
        "C9",
        violations == 0 && secs < 120.0,
        &format!(
            "pcf-df gain drops along the relay-2 axis at {violations}/{pairs} adjacent pairs, worst {worst_drop:.4} bits at relay1 {:.1} dB between relay2 {:.1} and {:.1} dB, {secs:.1}s",
            worst_at.0, worst_at.1, worst_at.2
        ),
    );
}

#[test]
fn c10_sweep_output_is_byte_deterministic() {
    let mut cfg = SweepConfig::new(SweepVariable::SnrDb, 7.0, 8.0, 1.0);
    cfg.protocols = vec![SweepProtocol::Pcf, SweepProtocol::Df];
    cfg.mode = SweepMode::Both;
    cfg.seed = 13;
    cfg.defaults.k = 300;
    cfg.defaults.trials = 6;
    cfg.defaults.reliability_target = 0.75;
    cfg.defaults.overhead_margin = 0.8;
    cfg.defaults.df_granularity = 50;
    let dir = tempfile::tempdir().unwrap();
    let (first, second) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    emit_csv(&run_sweep(&cfg).unwrap(), &first).unwrap();
    emit_csv(&run_sweep(&cfg).unwrap(), &second).unwrap();
    let (a, b) = (
        std::fs::read(&first).unwrap(),
        std::fs::read(&second).unwrap(),
    );
    common::verdict(
        "C10",
        a == b && !a.is_empty(),
        &format!("two identical-config runs: {} vs {} bytes, equal={}", a.len(), b.len(), a == b),
    );
}
