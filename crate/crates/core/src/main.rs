// Copyright 2026 ionflux Contributors
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ionflux::config::{parse_tiers, RunConfig};
use ionflux::dicke::Frame;
use ionflux::experiments::{self, Action, Scenario};

/// Worker threads for sweeps and parameter scans.
const WORKERS_ENV: &str = "IONFLUX_WORKERS";
const EXIT_PARTIAL_SWEEP: u8 = 5;

#[derive(Parser)]
#[command(name = "ionflux", version, about = "Floquet flux engineering in a three-ion chain")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file with dotted `key = value` entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `run.out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Frame of the Dicke propagation.
    #[arg(long, global = true, value_parser = parse_frame)]
    frame: Option<Frame>,
    /// Comma-separated model tiers: ising, xx, h_eff, xx_avg, dicke.
    #[arg(long, global = true)]
    tiers: Option<String>,
    /// Per-mode Fock cutoff.
    #[arg(long, global = true)]
    nmax: Option<usize>,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Normal modes and spin-spin couplings.
    Couplings,
    /// Averaged against exact Floquet couplings.
    FloquetCheck,
    /// Trajectories for the configured tiers.
    Evolve,
    /// Flux scan of the single-excitation spectrum and currents.
    Spectrum,
    /// Double-well relative phase.
    Phase,
    /// Repeat one action over a list of values of a config key.
    Sweep {
        /// Config key, dotted or by its last segment.
        #[arg(long)]
        param: String,
        /// Comma-separated values; fractions like 1/3 are accepted.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        /// Action per value.
        #[arg(long, default_value = "evolve")]
        run: String,
    },
    /// A named figure scenario.
    Scenario {
        /// fig1d, fig2, fig3, fig4 or floquet-scaling.
        name: String,
    },
}

fn parse_frame(s: &str) -> Result<Frame, String> {
    s.parse()
}

fn build_config(c: &Common) -> ionflux::Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for o in &c.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| ionflux::Error::Config { path: o.clone(), msg: "expected KEY=VALUE".into() })?;
        cfg.set(experiments::resolve_key(k.trim())?, v)?;
    }
    if let Some(out) = &c.out {
        cfg.out_dir = out.clone();
    }
    if let Some(f) = c.frame {
        cfg.frame = f;
    }
    if let Some(t) = &c.tiers {
        cfg.tiers = parse_tiers(t).map_err(|msg| ionflux::Error::Config { path: "--tiers".into(), msg })?;
    }
    if let Some(n) = c.nmax {
        cfg.n_max = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> ionflux::Result<u8> {
    let cfg = build_config(&cli.common)?;
    let out = cfg.out_dir.clone();
    let action = match &cli.command {
        Command::Couplings => Action::Couplings,
        Command::FloquetCheck => Action::FloquetCheck,
        Command::Evolve => Action::Evolve,
        Command::Spectrum => Action::Spectrum,
        Command::Phase => Action::Phase,
        Command::Scenario { name } => Action::Scenario(name.parse::<Scenario>()?),
        Command::Sweep { param, values, run } => {
            let report = experiments::sweep(param, values, &cfg, run.parse()?, &out)?;
            for e in &report.entries {
                match &e.error {
                    None => println!("{} = {}: ok ({})", report.parameter, e.value, e.dir.display()),
                    Some((code, m)) => eprintln!("{} = {}: failed [{code}] {m}", report.parameter, e.value),
                }
            }
            println!("index: {}", out.join("index.csv").display());
            return Ok(if report.failed() > 0 { EXIT_PARTIAL_SWEEP } else { 0 });
        }
    };
    let set = experiments::run_action(action, &cfg, &out)?;
    for f in &set.files {
        println!("{}", f.display());
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
