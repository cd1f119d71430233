//! Config-driven sweeps over link quality: theory curves from the optimizer,
//! Monte-Carlo points from the simulator, CSV tables and SVG plots.
//!
//! A sweep is described by a TOML document:
//!
//! ```toml
//! sweep = "snr_db"            # bec_nonerasure | snr_db | relay_grid
//! start = 0.0
//! stop = 14.0
//! step = 1.0
//! mode = "theory"             # theory | simulate | both
//! protocols = ["pcf", "df"]   # subset of pcf, cf, df, af, cutset
//! seed = 7
//! out_csv = "rates.csv"       # optional output paths
//! out_plot = "rates.svg"
//!
//! [defaults]                  # simulation knobs, all optional
//! k = 4000
//! trials = 200
//!
//! [overrides.pcf]             # per-protocol knob overrides
//! k = 1000
//! ```
//!
//! The three sweep variables map onto the four links as follows:
//! `bec_nonerasure` sweeps the probability `q` that a symbol arrives and sets
//! every link to an erasure channel with rate `1 - q`; `snr_db` sets every
//! link to BPSK over AWGN at the swept SNR; `relay_grid` sweeps both relay
//! paths independently, giving relay 1 (source link and down link alike) the
//! first grid coordinate and relay 2 the second.
//!
//! Results land in rows sorted by sweep value then protocol, one row per
//! (point, protocol) pair even when a point fails: errors ride along in their
//! own column instead of aborting the sweep. The CSV schema is fixed:
//! `sweep,protocol,theory_rate,sim_rate,reliability,trials,seed,error`, with
//! six-decimal rates and empty cells for absent values, so identical configs
//! and seeds reproduce byte-identical files.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channels::ChannelModel;
use crate::info::{binary_entropy, correlation_model, equivalent_crossover};
use crate::optimizer::{
    af_rate, best_relay_df_rate, optimize_pcf, pure_cf_rate, NetworkCapacities, OptimizeOpts,
};
use crate::simulator::{run_batch, Protocol, ProtocolConfig};

#[derive(Debug, Error)]
pub enum SweepError {
    /// Parse or validation failure; the message carries the location.
    #[error("{0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("refusing to emit an empty result table")]
    EmptyTable,
}

/// Which link parameter a sweep walks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Probability that a symbol survives the erasure links.
    #[serde(rename = "bec_nonerasure")]
    BecNonErasure,
    /// One SNR in decibels shared by all four links.
    SnrDb,
    /// Independent per-relay SNRs on a square grid.
    RelayGrid,
}

/// How much of each row to fill in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    Theory,
    Simulate,
    Both,
}

/// One curve in a sweep: the four simulated protocols plus the cut-set
/// upper bound, which only exists as a theory curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepProtocol {
    Pcf,
    Cf,
    Df,
    Af,
    Cutset,
}

/// Every curve, in the order rows sort.
pub const ALL_PROTOCOLS: [SweepProtocol; 5] = [
    SweepProtocol::Pcf,
    SweepProtocol::Cf,
    SweepProtocol::Df,
    SweepProtocol::Af,
    SweepProtocol::Cutset,
];

impl SweepProtocol {
    pub fn label(self) -> &'static str {
        match self {
            SweepProtocol::Pcf => "pcf",
            SweepProtocol::Cf => "cf",
            SweepProtocol::Df => "df",
            SweepProtocol::Af => "af",
            SweepProtocol::Cutset => "cutset",
        }
    }

    /// The simulator protocol backing this curve, if it has one.
    pub fn simulated(self) -> Option<Protocol> {
        match self {
            SweepProtocol::Pcf => Some(Protocol::Pcf),
            SweepProtocol::Cf => Some(Protocol::Cf),
            SweepProtocol::Df => Some(Protocol::Df),
            SweepProtocol::Af => Some(Protocol::Af),
            SweepProtocol::Cutset => None,
        }
    }
}

impl fmt::Display for SweepProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SweepProtocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pcf" => Ok(SweepProtocol::Pcf),
            "cf" => Ok(SweepProtocol::Cf),
            "df" => Ok(SweepProtocol::Df),
            "af" => Ok(SweepProtocol::Af),
            "cutset" => Ok(SweepProtocol::Cutset),
            other => Err(format!(
                "unknown protocol '{other}' (expected pcf, cf, df, af, or cutset)"
            )),
        }
    }
}

/// Simulation knobs shared by every curve unless overridden per protocol.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Knobs {
    /// Information bits per frame.
    pub k: usize,
    pub trials: usize,
    pub decoder_iterations: usize,
    pub joint_iterations: usize,
    pub inner_iterations: usize,
    pub df_granularity: usize,
    pub reliability_target: f64,
    pub overhead_margin: f64,
    pub lt_c: f64,
    pub lt_delta: f64,
}

impl Default for Knobs {
    fn default() -> Self {
        Knobs {
            k: 4000,
            trials: 200,
            decoder_iterations: 60,
            joint_iterations: 40,
            inner_iterations: 2,
            df_granularity: 100,
            reliability_target: 0.99,
            overhead_margin: 0.1,
            lt_c: 0.03,
            lt_delta: 0.5,
        }
    }
}

/// Partial knob set layered on top of [`Knobs`] for one protocol.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KnobOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decoder_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joint_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub df_granularity: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reliability_target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overhead_margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lt_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lt_delta: Option<f64>,
}

impl KnobOverrides {
    pub fn apply(&self, base: Knobs) -> Knobs {
        Knobs {
            k: self.k.unwrap_or(base.k),
            trials: self.trials.unwrap_or(base.trials),
            decoder_iterations: self.decoder_iterations.unwrap_or(base.decoder_iterations),
            joint_iterations: self.joint_iterations.unwrap_or(base.joint_iterations),
            inner_iterations: self.inner_iterations.unwrap_or(base.inner_iterations),
            df_granularity: self.df_granularity.unwrap_or(base.df_granularity),
            reliability_target: self.reliability_target.unwrap_or(base.reliability_target),
            overhead_margin: self.overhead_margin.unwrap_or(base.overhead_margin),
            lt_c: self.lt_c.unwrap_or(base.lt_c),
            lt_delta: self.lt_delta.unwrap_or(base.lt_delta),
        }
    }
}

/// A full sweep description, deserialized from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub sweep: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    #[serde(default = "default_protocols")]
    pub protocols: Vec<SweepProtocol>,
    #[serde(default = "default_mode")]
    pub mode: SweepMode,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_plot: Option<PathBuf>,
    #[serde(default)]
    pub defaults: Knobs,
    /// Keyed by protocol label (`pcf`, `cf`, `df`, `af`, `cutset`).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, KnobOverrides>,
}

fn default_protocols() -> Vec<SweepProtocol> {
    ALL_PROTOCOLS.to_vec()
}

fn default_mode() -> SweepMode {
    SweepMode::Theory
}

fn default_seed() -> u64 {
    7
}

impl SweepConfig {
    /// A theory-mode sweep over all curves with library defaults.
    pub fn new(sweep: SweepVariable, start: f64, stop: f64, step: f64) -> Self {
        SweepConfig {
            sweep,
            start,
            stop,
            step,
            protocols: default_protocols(),
            mode: default_mode(),
            seed: default_seed(),
            out_csv: None,
            out_plot: None,
            defaults: Knobs::default(),
            overrides: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |msg: String| Err(SweepError::Config(msg));
        if !(self.step.is_finite() && self.step > 0.0) {
            return bad(format!("sweep step must be positive (got {})", self.step));
        }
        if !self.start.is_finite() || !self.stop.is_finite() || self.start > self.stop {
            return bad(format!(
                "empty sweep range: start {} exceeds stop {}",
                self.start, self.stop
            ));
        }
        if self.protocols.is_empty() {
            return bad("at least one protocol curve is required".into());
        }
        for (i, p) in self.protocols.iter().enumerate() {
            if self.protocols[..i].contains(p) {
                return bad(format!("duplicate protocol '{p}'"));
            }
        }
        if self.sweep == SweepVariable::BecNonErasure && !(self.start >= 0.0 && self.stop <= 1.0) {
            return bad(format!(
                "non-erasure probabilities must lie in [0, 1] (got {}..{})",
                self.start, self.stop
            ));
        }
        for key in self.overrides.keys() {
            SweepProtocol::from_str(key)
                .map_err(|e| SweepError::Config(format!("overrides section: {e}")))?;
        }
        Ok(())
    }

    /// Renders the config back to TOML; parsing the result reproduces `self`.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("sweep configs always serialize")
    }

    /// Knobs for one curve after applying its override section.
    pub fn knobs_for(&self, p: SweepProtocol) -> Knobs {
        self.overrides
            .get(p.label())
            .map(|o| o.apply(self.defaults))
            .unwrap_or(self.defaults)
    }
}

/// Parses and validates a TOML sweep description. Parse failures keep the
/// TOML reader's line and column information.
pub fn parse_config(text: &str) -> Result<SweepConfig, SweepError> {
    let cfg: SweepConfig = toml::from_str(text).map_err(|e| SweepError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// One sweep coordinate: a scalar for single-parameter sweeps, a pair of
/// per-relay values for grid sweeps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SweepPoint {
    Scalar(f64),
    Pair(f64, f64),
}

impl SweepPoint {
    fn key(self) -> (f64, f64) {
        match self {
            SweepPoint::Scalar(v) => (v, f64::NEG_INFINITY),
            SweepPoint::Pair(a, b) => (a, b),
        }
    }
}

impl fmt::Display for SweepPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepPoint::Scalar(v) => write!(f, "{v:.6}"),
            SweepPoint::Pair(a, b) => write!(f, "{a:.3}x{b:.3}"),
        }
    }
}

/// One (sweep point, protocol) cell of the result table.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub sweep: SweepPoint,
    pub protocol: SweepProtocol,
    pub theory_rate: Option<f64>,
    pub sim_rate: Option<f64>,
    pub reliability: Option<f64>,
    pub trials: Option<usize>,
    pub seed: u64,
    pub error: Option<String>,
}

/// The sweep coordinates a config enumerates, inclusive of both endpoints
/// (within floating-point slack) and squared up for grid sweeps.
pub fn sweep_points(cfg: &SweepConfig) -> Vec<SweepPoint> {
    let n = ((cfg.stop - cfg.start) / cfg.step + 1e-9).floor() as usize + 1;
    let axis: Vec<f64> = (0..n).map(|i| cfg.start + i as f64 * cfg.step).collect();
    match cfg.sweep {
        SweepVariable::BecNonErasure | SweepVariable::SnrDb => {
            axis.iter().map(|&v| SweepPoint::Scalar(v)).collect()
        }
        SweepVariable::RelayGrid => axis
            .iter()
            .flat_map(|&a| axis.iter().map(move |&b| SweepPoint::Pair(a, b)))
            .collect(),
    }
}

/// The four links (source to relay 1, source to relay 2, relay 1 down,
/// relay 2 down) a sweep point stands for.
pub fn channels_at(var: SweepVariable, point: SweepPoint) -> [ChannelModel; 4] {
    match (var, point) {
        (SweepVariable::BecNonErasure, SweepPoint::Scalar(q)) => {
            [ChannelModel::Bec(1.0 - q); 4]
        }
        (SweepVariable::SnrDb, SweepPoint::Scalar(db)) => [ChannelModel::biawgn_from_db(db); 4],
        (SweepVariable::RelayGrid, SweepPoint::Pair(r1, r2)) => {
            let a = ChannelModel::biawgn_from_db(r1);
            let b = ChannelModel::biawgn_from_db(r2);
            [a, b, a, b]
        }
        _ => unreachable!("sweep points always match their variable"),
    }
}

/// Capacity of the source broadcast when both relays listen at once, i.e.
/// of the single-input two-output channel formed by the two source links.
fn joint_reception_capacity(a: &ChannelModel, b: &ChannelModel) -> Result<f64, SweepError> {
    match (a, b) {
        (ChannelModel::Bec(e1), ChannelModel::Bec(e2)) => Ok(1.0 - e1 * e2),
        (ChannelModel::Bsc(p1), ChannelModel::Bsc(p2)) => Ok(1.0
            + binary_entropy(equivalent_crossover(*p1, *p2))
            - binary_entropy(*p1)
            - binary_entropy(*p2)),
        // Maximum-ratio combining of two AWGN looks at the same BPSK symbol:
        // the effective SNR is the sum.
        (ChannelModel::BiAwgn(s1), ChannelModel::BiAwgn(s2)) => {
            Ok(ChannelModel::BiAwgn(s1 + s2).capacity())
        }
        _ => Err(SweepError::Config(format!(
            "cut-set bound needs matching source-link kinds (got {} and {})",
            a.kind_name(),
            b.kind_name()
        ))),
    }
}

/// Max-flow/min-cut upper bound over half-duplex listen/talk schedules.
///
/// Each relay either listens or talks at any instant, so a schedule is a
/// point on the simplex over the four joint states (both listen; only one
/// talks; both talk). The bound maximizes, over schedules, the minimum of
/// the four cut flows: the source cut (whoever listens hears the
/// broadcast, jointly at `cs12` when both do), the two cuts isolating one
/// relay with the source, and the destination cut fed by the talking
/// relays on their orthogonal down links. A coarse-plus-refined grid over
/// the simplex resolves the concave piecewise-linear objective to about
/// one part in a thousand.
fn schedule_min_cut(caps: &NetworkCapacities, cs12: f64) -> f64 {
    let cut = |ll: f64, lt: f64, tl: f64, tt: f64| -> f64 {
        let source = ll * cs12 + lt * caps.c_s1 + tl * caps.c_s2;
        let around_relay_1 = (ll + tl) * caps.c_s2 + (tl + tt) * caps.c_1d;
        let around_relay_2 = (ll + lt) * caps.c_s1 + (lt + tt) * caps.c_2d;
        let sink = (tl + tt) * caps.c_1d + (lt + tt) * caps.c_2d;
        source.min(around_relay_1).min(around_relay_2).min(sink)
    };
    let n = 50usize;
    let mut best_value = 0.0f64;
    let mut best = [1.0, 0.0, 0.0, 0.0];
    for i in 0..=n {
        for j in 0..=n - i {
            for l in 0..=n - i - j {
                let t = [
                    i as f64 / n as f64,
                    j as f64 / n as f64,
                    l as f64 / n as f64,
                    (n - i - j - l) as f64 / n as f64,
                ];
                let v = cut(t[0], t[1], t[2], t[3]);
                if v > best_value {
                    best_value = v;
                    best = t;
                }
            }
        }
    }
    let fine = 0.002;
    for di in -10i64..=10 {
        for dj in -10i64..=10 {
            for dl in -10i64..=10 {
                let ll = best[0] + di as f64 * fine;
                let lt = best[1] + dj as f64 * fine;
                let tl = best[2] + dl as f64 * fine;
                let tt = 1.0 - ll - lt - tl;
                if ll < -1e-12 || lt < -1e-12 || tl < -1e-12 || tt < -1e-12 {
                    continue;
                }
                let v = cut(ll.max(0.0), lt.max(0.0), tl.max(0.0), tt.max(0.0));
                if v > best_value {
                    best_value = v;
                }
            }
        }
    }
    best_value
}

/// Theoretical rate of one curve over the given links.
pub fn theory_rate(p: SweepProtocol, chs: &[ChannelModel; 4]) -> Result<f64, SweepError> {
    let caps = NetworkCapacities::from_channels(&chs[0], &chs[1], &chs[2], &chs[3])
        .map_err(|e| SweepError::Config(e.to_string()))?;
    match p {
        SweepProtocol::Pcf => {
            let model = correlation_model(&chs[0], &chs[1]);
            Ok(optimize_pcf(&caps, &model, &OptimizeOpts::default()).rate)
        }
        SweepProtocol::Cf => {
            let model = correlation_model(&chs[0], &chs[1]);
            Ok(pure_cf_rate(&caps, &model))
        }
        SweepProtocol::Df => Ok(best_relay_df_rate(&caps)),
        SweepProtocol::Af => Ok(af_rate(&caps)),
        SweepProtocol::Cutset => {
            let cs12 = joint_reception_capacity(&chs[0], &chs[1])?;
            Ok(schedule_min_cut(&caps, cs12))
        }
    }
}

/// Decorrelates the per-row RNG streams the same way the simulator spreads
/// its per-purpose lanes.
fn row_seed(base: u64, point: usize, proto: usize) -> u64 {
    base.wrapping_add((point as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((proto as u64).wrapping_mul(0xD1B5_4A32_D192_ED03))
}

fn simulator_config(
    p: Protocol,
    chs: &[ChannelModel; 4],
    kn: &Knobs,
    seed: u64,
) -> ProtocolConfig {
    let mut cfg = ProtocolConfig::new(p, chs[0], chs[1], chs[2], chs[3]);
    cfg.k = kn.k;
    cfg.trials = kn.trials;
    cfg.decoder_iterations = kn.decoder_iterations;
    cfg.joint_iterations = kn.joint_iterations;
    cfg.inner_iterations = kn.inner_iterations;
    cfg.df_granularity = kn.df_granularity;
    cfg.reliability_target = kn.reliability_target;
    cfg.overhead_margin = kn.overhead_margin;
    cfg.lt_c = kn.lt_c;
    cfg.lt_delta = kn.lt_delta;
    cfg.base_seed = seed;
    cfg
}

fn point_rows(cfg: &SweepConfig, index: usize, point: SweepPoint) -> Vec<ResultRow> {
    let chs = channels_at(cfg.sweep, point);
    cfg.protocols
        .iter()
        .enumerate()
        .map(|(pi, &sp)| {
            let seed = row_seed(cfg.seed, index, pi);
            let mut row = ResultRow {
                sweep: point,
                protocol: sp,
                theory_rate: None,
                sim_rate: None,
                reliability: None,
                trials: None,
                seed,
                error: None,
            };
            if cfg.mode != SweepMode::Simulate {
                match theory_rate(sp, &chs) {
                    Ok(r) => row.theory_rate = Some(r),
                    Err(e) => {
                        row.error = Some(e.to_string());
                        return row;
                    }
                }
            }
            if cfg.mode != SweepMode::Theory {
                if let Some(p) = sp.simulated() {
                    let sim = simulator_config(p, &chs, &cfg.knobs_for(sp), seed);
                    match run_batch(&sim) {
                        Ok(stats) => {
                            row.sim_rate = Some(stats.achieved_rate);
                            row.reliability = Some(stats.reliability);
                            row.trials = Some(stats.trials);
                        }
                        Err(e) => row.error = Some(e.to_string()),
                    }
                }
            }
            row
        })
        .collect()
}

/// Runs the whole sweep: every point crossed with every requested curve.
///
/// Points fan out across the worker pool (and the simulator fans its trials
/// out below that); rows come back sorted by (sweep value, protocol), and a
/// failed cell records its error in the row instead of sinking the sweep.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<ResultRow>, SweepError> {
    cfg.validate()?;
    let points = sweep_points(cfg);
    let mut rows: Vec<ResultRow> = points
        .par_iter()
        .enumerate()
        .map(|(i, &pt)| point_rows(cfg, i, pt))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    rows.sort_by(|a, b| {
        let (ax, ay) = a.sweep.key();
        let (bx, by) = b.sweep.key();
        ax.total_cmp(&bx)
            .then(ay.total_cmp(&by))
            .then(a.protocol.cmp(&b.protocol))
    });
    Ok(rows)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Renders the result table as CSV with the fixed schema
/// `sweep,protocol,theory_rate,sim_rate,reliability,trials,seed,error`.
pub fn csv_string(table: &[ResultRow]) -> Result<String, SweepError> {
    if table.is_empty() {
        return Err(SweepError::EmptyTable);
    }
    let mut out = String::from("sweep,protocol,theory_rate,sim_rate,reliability,trials,seed,error\n");
    for r in table {
        let trials = r.trials.map(|t| t.to_string()).unwrap_or_default();
        let error = r.error.as_deref().map(csv_field).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.sweep,
            r.protocol,
            fmt_opt(r.theory_rate),
            fmt_opt(r.sim_rate),
            fmt_opt(r.reliability),
            trials,
            r.seed,
            error
        ));
    }
    Ok(out)
}

/// Writes [`csv_string`] output to a file.
pub fn emit_csv(table: &[ResultRow], path: &Path) -> Result<(), SweepError> {
    let out = csv_string(table)?;
    fs::write(path, out).map_err(|source| SweepError::Io {
        path: path.to_path_buf(),
        source,
    })
}

const PLOT_W: f64 = 720.0;
const PLOT_H: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;

fn curve_color(p: SweepProtocol) -> &'static str {
    match p {
        SweepProtocol::Pcf => "#1f77b4",
        SweepProtocol::Cf => "#ff7f0e",
        SweepProtocol::Df => "#2ca02c",
        SweepProtocol::Af => "#d62728",
        SweepProtocol::Cutset => "#9467bd",
    }
}

fn protocols_present(table: &[ResultRow]) -> Vec<SweepProtocol> {
    ALL_PROTOCOLS
        .into_iter()
        .filter(|p| table.iter().any(|r| r.protocol == *p))
        .collect()
}

fn row_value(r: &ResultRow) -> Option<f64> {
    r.theory_rate.or(r.sim_rate)
}

fn legend_svg(protocols: &[SweepProtocol]) -> String {
    let mut s = String::new();
    let x = PLOT_W - MARGIN_R + 15.0;
    for (i, &p) in protocols.iter().enumerate() {
        let y = MARGIN_T + 20.0 + 22.0 * i as f64;
        s.push_str(&format!(
            "<line x1=\"{x:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
            x + 24.0,
            curve_color(p)
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" class=\"legend\">{}</text>\n",
            x + 30.0,
            y + 4.0,
            p.label()
        ));
    }
    s
}

fn render_lines(table: &[ResultRow]) -> String {
    let xs: Vec<f64> = table
        .iter()
        .map(|r| match r.sweep {
            SweepPoint::Scalar(v) => v,
            SweepPoint::Pair(a, _) => a,
        })
        .collect();
    let mut x_lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut x_hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if x_hi - x_lo < 1e-12 {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    let y_hi = table
        .iter()
        .filter_map(row_value)
        .fold(1e-6f64, f64::max)
        * 1.08;
    let to_x = |v: f64| MARGIN_L + (v - x_lo) / (x_hi - x_lo) * (PLOT_W - MARGIN_L - MARGIN_R);
    let to_y = |v: f64| PLOT_H - MARGIN_B - v / y_hi * (PLOT_H - MARGIN_T - MARGIN_B);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" viewBox=\"0 0 {PLOT_W} {PLOT_H}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    // Axes and ticks.
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        PLOT_H - MARGIN_B,
        PLOT_W - MARGIN_R,
        PLOT_H - MARGIN_B,
        PLOT_H - MARGIN_B
    ));
    for i in 0..=4 {
        let fx = x_lo + (x_hi - x_lo) * i as f64 / 4.0;
        let fy = y_hi * i as f64 / 4.0;
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\" class=\"tick\">{fx:.2}</text>\n",
            to_x(fx),
            PLOT_H - MARGIN_B + 16.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\" class=\"tick\">{fy:.3}</text>\n",
            MARGIN_L - 6.0,
            to_y(fy) + 4.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" class=\"axis\">sweep value</text>\n",
        MARGIN_L + (PLOT_W - MARGIN_L - MARGIN_R) / 2.0,
        PLOT_H - 10.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" class=\"axis\" transform=\"rotate(-90 16 {:.1})\">rate (bits per use)</text>\n",
        MARGIN_T + (PLOT_H - MARGIN_T - MARGIN_B) / 2.0,
        MARGIN_T + (PLOT_H - MARGIN_T - MARGIN_B) / 2.0
    ));

    let protocols = protocols_present(table);
    for &p in &protocols {
        let series: Vec<(f64, f64)> = table
            .iter()
            .filter(|r| r.protocol == p)
            .filter_map(|r| match (r.sweep, row_value(r)) {
                (SweepPoint::Scalar(x), Some(y)) => Some((x, y)),
                _ => None,
            })
            .collect();
        if series.len() > 1 {
            let pts: Vec<String> = series
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", to_x(x), to_y(y)))
                .collect();
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                pts.join(" "),
                curve_color(p)
            ));
        }
        for r in table.iter().filter(|r| r.protocol == p) {
            if let (SweepPoint::Scalar(x), Some(y)) = (r.sweep, r.sim_rate) {
                svg.push_str(&format!(
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\" class=\"sim\"/>\n",
                    to_x(x),
                    to_y(y),
                    curve_color(p)
                ));
            }
        }
    }
    svg.push_str(&legend_svg(&protocols));
    svg.push_str("</svg>\n");
    svg
}

fn diverging_color(gain: f64, limit: f64) -> String {
    // Blue below zero, white at zero, red above.
    let t = (gain / limit).clamp(-1.0, 1.0);
    let (r, g, b) = if t < 0.0 {
        let u = -t;
        (
            255.0 + (33.0 - 255.0) * u,
            255.0 + (102.0 - 255.0) * u,
            255.0 + (172.0 - 255.0) * u,
        )
    } else {
        (
            255.0 + (178.0 - 255.0) * t,
            255.0 + (24.0 - 255.0) * t,
            255.0 + (43.0 - 255.0) * t,
        )
    };
    format!("rgb({},{},{})", r.round() as u8, g.round() as u8, b.round() as u8)
}

fn sorted_axis(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    v
}

fn render_gain_map(table: &[ResultRow]) -> Result<String, SweepError> {
    let pick = |p: SweepProtocol, a: f64, b: f64| -> Option<f64> {
        table
            .iter()
            .find(|r| {
                r.protocol == p
                    && matches!(r.sweep, SweepPoint::Pair(x, y)
                        if (x - a).abs() < 1e-12 && (y - b).abs() < 1e-12)
            })
            .and_then(row_value)
    };
    let has = |p: SweepProtocol| table.iter().any(|r| r.protocol == p);
    if !has(SweepProtocol::Pcf) || !has(SweepProtocol::Df) {
        return Err(SweepError::Config(
            "a relay-grid gain map needs both the pcf and df curves".into(),
        ));
    }
    let axis_a = sorted_axis(table.iter().filter_map(|r| match r.sweep {
        SweepPoint::Pair(a, _) => Some(a),
        _ => None,
    }));
    let axis_b = sorted_axis(table.iter().filter_map(|r| match r.sweep {
        SweepPoint::Pair(_, b) => Some(b),
        _ => None,
    }));
    let mut cells: Vec<(usize, usize, f64)> = Vec::new();
    for (i, &a) in axis_a.iter().enumerate() {
        for (j, &b) in axis_b.iter().enumerate() {
            if let (Some(p), Some(d)) = (pick(SweepProtocol::Pcf, a, b), pick(SweepProtocol::Df, a, b))
            {
                cells.push((i, j, p - d));
            }
        }
    }
    let limit = cells
        .iter()
        .map(|&(_, _, g)| g.abs())
        .fold(1e-12f64, f64::max);

    let cell_w = (PLOT_W - MARGIN_L - MARGIN_R) / axis_a.len() as f64;
    let cell_h = (PLOT_H - MARGIN_T - MARGIN_B) / axis_b.len() as f64;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" viewBox=\"0 0 {PLOT_W} {PLOT_H}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    for &(i, j, g) in &cells {
        let x = MARGIN_L + i as f64 * cell_w;
        // Larger relay-2 values sit higher up.
        let y = PLOT_H - MARGIN_B - (j + 1) as f64 * cell_h;
        svg.push_str(&format!(
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{cell_w:.2}\" height=\"{cell_h:.2}\" fill=\"{}\" class=\"cell\"/>\n",
            diverging_color(g, limit)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" class=\"axis\">relay 1 SNR (dB): {:.1} to {:.1}</text>\n",
        MARGIN_L + (PLOT_W - MARGIN_L - MARGIN_R) / 2.0,
        PLOT_H - 10.0,
        axis_a.first().unwrap_or(&0.0),
        axis_a.last().unwrap_or(&0.0)
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" class=\"axis\" transform=\"rotate(-90 16 {:.1})\">relay 2 SNR (dB): {:.1} to {:.1}</text>\n",
        MARGIN_T + (PLOT_H - MARGIN_T - MARGIN_B) / 2.0,
        MARGIN_T + (PLOT_H - MARGIN_T - MARGIN_B) / 2.0,
        axis_b.first().unwrap_or(&0.0),
        axis_b.last().unwrap_or(&0.0)
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" class=\"scale\">gain span: {:.4} to {:.4}</text>\n",
        PLOT_W - MARGIN_R + 15.0,
        PLOT_H - MARGIN_B,
        cells.iter().map(|c| c.2).fold(f64::INFINITY, f64::min),
        cells.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max)
    ));
    svg.push_str(&legend_svg(&protocols_present(table)));
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Writes the result table as a self-contained SVG: rate-versus-sweep lines
/// with one legend entry per protocol, or, for relay-grid tables, a heat map
/// of the rate gain of the hybrid scheme over decode-and-forward.
pub fn emit_plot(table: &[ResultRow], path: &Path) -> Result<(), SweepError> {
    if table.is_empty() {
        return Err(SweepError::EmptyTable);
    }
    let grid = table
        .iter()
        .any(|r| matches!(r.sweep, SweepPoint::Pair(..)));
    let svg = if grid {
        render_gain_map(table)?
    } else {
        render_lines(table)
    };
    fs::write(path, svg).map_err(|source| SweepError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Convenience driver: run the sweep and write whichever outputs the config
/// names. Returns the table for further inspection.
pub fn run_to_files(cfg: &SweepConfig) -> Result<Vec<ResultRow>, SweepError> {
    let rows = run_sweep(cfg)?;
    if let Some(p) = &cfg.out_csv {
        emit_csv(&rows, p)?;
    }
    if let Some(p) = &cfg.out_plot {
        emit_plot(&rows, p)?;
    }
    Ok(rows)
}
