//! Command-line front end for the diamond relay toolkit: theoretical rates,
//! Monte-Carlo batches, config-driven sweeps, and operating-point inspection.
//!
//! Links are written as `kind:value`, where `kind` is `bec` (value is the
//! erasure probability), `bsc` (crossover probability), or `biawgn` (SNR in
//! decibels). The `sweep` verb accepts either a TOML config file, command
//! line flags, or both; flags win over the file.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pcf_core::channels::ChannelModel;
use pcf_core::experiments::{
    csv_string, emit_csv, emit_plot, parse_config, run_sweep, theory_rate, SweepConfig, SweepMode,
    SweepProtocol, SweepVariable, ALL_PROTOCOLS,
};
use pcf_core::info::correlation_model;
use pcf_core::optimizer::{optimize_pcf, NetworkCapacities, OptimizeOpts};
use pcf_core::simulator::{run_batch, Protocol, ProtocolConfig};

fn parse_channel(s: &str) -> Result<ChannelModel, String> {
    let (kind, value) = s
        .split_once(':')
        .ok_or_else(|| format!("expected kind:value (e.g. bec:0.2 or biawgn:6), got '{s}'"))?;
    let v: f64 = value
        .trim()
        .parse()
        .map_err(|_| format!("'{value}' is not a number"))?;
    let ch = match kind.trim().to_ascii_lowercase().as_str() {
        "bec" => ChannelModel::Bec(v),
        "bsc" => ChannelModel::Bsc(v),
        "biawgn" => ChannelModel::biawgn_from_db(v),
        other => {
            return Err(format!(
                "unknown channel kind '{other}' (expected bec, bsc, or biawgn)"
            ))
        }
    };
    ch.validate().map_err(|e| e.to_string())?;
    Ok(ch)
}

fn parse_variable(s: &str) -> Result<SweepVariable, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "bec_nonerasure" => Ok(SweepVariable::BecNonErasure),
        "snr_db" => Ok(SweepVariable::SnrDb),
        "relay_grid" => Ok(SweepVariable::RelayGrid),
        other => Err(format!(
            "unknown sweep variable '{other}' (expected bec_nonerasure, snr_db, or relay_grid)"
        )),
    }
}

fn parse_mode(s: &str) -> Result<SweepMode, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "theory" => Ok(SweepMode::Theory),
        "simulate" => Ok(SweepMode::Simulate),
        "both" => Ok(SweepMode::Both),
        other => Err(format!(
            "unknown mode '{other}' (expected theory, simulate, or both)"
        )),
    }
}

/// The four links, individually or all at once.
#[derive(Args, Clone)]
struct LinkArgs {
    /// Shorthand setting every link at once.
    #[arg(long, value_parser = parse_channel)]
    all: Option<ChannelModel>,
    /// Source to relay 1.
    #[arg(long, value_parser = parse_channel)]
    s1: Option<ChannelModel>,
    /// Source to relay 2.
    #[arg(long, value_parser = parse_channel)]
    s2: Option<ChannelModel>,
    /// Relay 1 to destination.
    #[arg(long, value_parser = parse_channel)]
    d1: Option<ChannelModel>,
    /// Relay 2 to destination.
    #[arg(long, value_parser = parse_channel)]
    d2: Option<ChannelModel>,
}

impl LinkArgs {
    fn resolve(&self) -> Result<[ChannelModel; 4]> {
        let pick = |link: Option<ChannelModel>, name: &str| {
            link.or(self.all)
                .with_context(|| format!("missing link --{name} (or use --all)"))
        };
        Ok([
            pick(self.s1, "s1")?,
            pick(self.s2, "s2")?,
            pick(self.d1, "d1")?,
            pick(self.d2, "d2")?,
        ])
    }
}

#[derive(Parser)]
#[command(
    name = "pcf",
    version,
    about = "Rate analysis and simulation for a two-relay diamond network"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print theoretical rates for the given links.
    Theory {
        #[command(flatten)]
        links: LinkArgs,
        /// Curves to evaluate (default: all).
        #[arg(long, value_delimiter = ',')]
        protocols: Vec<SweepProtocol>,
    },
    /// Solve and print the hybrid operating point for the given links.
    Plan {
        #[command(flatten)]
        links: LinkArgs,
    },
    /// Run one Monte-Carlo batch and print its statistics.
    Simulate {
        #[command(flatten)]
        links: LinkArgs,
        /// Protocol to run (pcf, cf, df, or af).
        #[arg(long, default_value = "pcf")]
        protocol: Protocol,
        /// Information bits per frame.
        #[arg(short, long)]
        k: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reliability_target: Option<f64>,
        #[arg(long)]
        overhead_margin: Option<f64>,
        #[arg(long)]
        df_granularity: Option<usize>,
        #[arg(long)]
        joint_iterations: Option<usize>,
    },
    /// Run a sweep from a TOML config and/or flags; flags win.
    Sweep {
        /// TOML sweep description.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = parse_variable)]
        sweep: Option<SweepVariable>,
        #[arg(long)]
        start: Option<f64>,
        #[arg(long)]
        stop: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        /// Curves to run, comma separated.
        #[arg(long, value_delimiter = ',')]
        protocols: Option<Vec<SweepProtocol>>,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<SweepMode>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Information bits per frame for every curve.
        #[arg(short, long)]
        k: Option<usize>,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[arg(long)]
        out_plot: Option<PathBuf>,
    },
}

fn run_theory(links: &LinkArgs, protocols: &[SweepProtocol]) -> Result<()> {
    let chs = links.resolve()?;
    let list = if protocols.is_empty() {
        ALL_PROTOCOLS.to_vec()
    } else {
        protocols.to_vec()
    };
    for p in list {
        let rate = theory_rate(p, &chs)?;
        println!("{:<8}{rate:.6}", p.label());
    }
    Ok(())
}

fn run_plan(links: &LinkArgs) -> Result<()> {
    let chs = links.resolve()?;
    let caps = NetworkCapacities::from_channels(&chs[0], &chs[1], &chs[2], &chs[3])?;
    let model = correlation_model(&chs[0], &chs[1]);
    let plan = optimize_pcf(&caps, &model, &OptimizeOpts::default());
    println!("{plan}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_simulate(
    links: &LinkArgs,
    protocol: Protocol,
    k: Option<usize>,
    trials: Option<usize>,
    seed: Option<u64>,
    reliability_target: Option<f64>,
    overhead_margin: Option<f64>,
    df_granularity: Option<usize>,
    joint_iterations: Option<usize>,
) -> Result<()> {
    let chs = links.resolve()?;
    let mut cfg = ProtocolConfig::new(protocol, chs[0], chs[1], chs[2], chs[3]);
    if let Some(v) = k {
        cfg.k = v;
    }
    if let Some(v) = trials {
        cfg.trials = v;
    }
    if let Some(v) = seed {
        cfg.base_seed = v;
    }
    if let Some(v) = reliability_target {
        cfg.reliability_target = v;
    }
    if let Some(v) = overhead_margin {
        cfg.overhead_margin = v;
    }
    if let Some(v) = df_granularity {
        cfg.df_granularity = v;
    }
    if let Some(v) = joint_iterations {
        cfg.joint_iterations = v;
    }
    let stats = run_batch(&cfg)?;
    println!("protocol            {protocol}");
    println!("nominal_rate        {:.6}", stats.nominal_rate);
    println!("achieved_rate       {:.6}", stats.achieved_rate);
    println!("reliability         {:.6}", stats.reliability);
    println!("trials              {}", stats.trials);
    println!("margin_used         {:.6}", stats.margin_used);
    println!("mean_decoder_rounds {:.2}", stats.mean_decoder_rounds);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_sweep_cmd(
    config: Option<PathBuf>,
    sweep: Option<SweepVariable>,
    start: Option<f64>,
    stop: Option<f64>,
    step: Option<f64>,
    protocols: Option<Vec<SweepProtocol>>,
    mode: Option<SweepMode>,
    seed: Option<u64>,
    trials: Option<usize>,
    k: Option<usize>,
    out_csv: Option<PathBuf>,
    out_plot: Option<PathBuf>,
) -> Result<()> {
    let mut cfg = match &config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            parse_config(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => {
            let (Some(var), Some(a), Some(b), Some(s)) = (sweep, start, stop, step) else {
                bail!("pass --config, or all of --sweep, --start, --stop, and --step");
            };
            SweepConfig::new(var, a, b, s)
        }
    };
    if let Some(v) = sweep {
        cfg.sweep = v;
    }
    if let Some(v) = start {
        cfg.start = v;
    }
    if let Some(v) = stop {
        cfg.stop = v;
    }
    if let Some(v) = step {
        cfg.step = v;
    }
    if let Some(v) = protocols {
        cfg.protocols = v;
    }
    if let Some(v) = mode {
        cfg.mode = v;
    }
    if let Some(v) = seed {
        cfg.seed = v;
    }
    if let Some(v) = trials {
        cfg.defaults.trials = v;
    }
    if let Some(v) = k {
        cfg.defaults.k = v;
    }
    if let Some(v) = out_csv {
        cfg.out_csv = Some(v);
    }
    if let Some(v) = out_plot {
        cfg.out_plot = Some(v);
    }
    cfg.validate()?;

    let rows = run_sweep(&cfg)?;
    let errors = rows.iter().filter(|r| r.error.is_some()).count();
    if let Some(p) = &cfg.out_csv {
        emit_csv(&rows, p)?;
        eprintln!("wrote {} rows to {}", rows.len(), p.display());
    }
    if let Some(p) = &cfg.out_plot {
        emit_plot(&rows, p)?;
        eprintln!("wrote plot to {}", p.display());
    }
    if cfg.out_csv.is_none() && cfg.out_plot.is_none() {
        print!("{}", csv_string(&rows)?);
    }
    if errors > 0 {
        eprintln!("{errors} of {} rows recorded errors", rows.len());
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        // A global pool can only be installed once; later attempts fall back
        // to the existing pool, which is fine for a short-lived process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.cmd {
        Cmd::Theory { links, protocols } => run_theory(&links, &protocols),
        Cmd::Plan { links } => run_plan(&links),
        Cmd::Simulate {
            links,
            protocol,
            k,
            trials,
            seed,
            reliability_target,
            overhead_margin,
            df_granularity,
            joint_iterations,
        } => run_simulate(
            &links,
            protocol,
            k,
            trials,
            seed,
            reliability_target,
            overhead_margin,
            df_granularity,
            joint_iterations,
        ),
        Cmd::Sweep {
            config,
            sweep,
            start,
            stop,
            step,
            protocols,
            mode,
            seed,
            trials,
            k,
            out_csv,
            out_plot,
        } => run_sweep_cmd(
            config, sweep, start, stop, step, protocols, mode, seed, trials, k, out_csv, out_plot,
        ),
    }
}
