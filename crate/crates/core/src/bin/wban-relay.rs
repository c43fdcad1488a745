use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wban_relay::cli::{self, Output};
use wban_relay::config::{parse_angle_text, parse_config_with_overrides, parse_override};
use wban_relay::engine::SweepAxis;
use wban_relay::{Error, ProtocolKind, Result};

#[derive(Parser)]
#[command(name = "wban-relay", version, about = "Buffer-aided relay selection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV tables.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Master seed, overriding run.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override a configuration key, e.g. --set protocol.beta=0.5.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Omit the timestamp comment line from CSV output.
    #[arg(long)]
    no_header_timestamp: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation.
    Run(Common),
    /// Vary one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// source_power, beta, buffer_size or theta2.
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated values; angles accept forms like pi/30.
        #[arg(long, value_delimiter = ',', value_parser = parse_value, allow_hyphen_values = true)]
        values: Vec<f64>,
    },
    /// BER-vs-power curves for several protocols with shared random numbers.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated protocol names.
        #[arg(long, value_delimiter = ',')]
        protocols: Vec<ProtocolKind>,
    },
    /// Analytical delay and single-link BER tables.
    Analyze(Common),
    /// Oracle-versus-simulation checks.
    Validate(Common),
}

fn parse_value(s: &str) -> std::result::Result<f64, String> {
    parse_angle_text(s).ok_or_else(|| format!("cannot read `{s}` as a number"))
}

fn load(common: &Common) -> Result<(wban_relay::SimConfig, Output)> {
    let text = std::fs::read_to_string(&common.config)?;
    let mut overrides = common
        .set
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>>>()?;
    if let Some(seed) = common.seed {
        let seed = i64::try_from(seed).map_err(|_| Error::InvalidParameter {
            name: "run.seed".into(),
            reason: format!("{seed} exceeds the largest TOML integer"),
        })?;
        overrides.push(("run.seed".into(), toml::Value::Integer(seed)));
    }
    let config = parse_config_with_overrides(&text, &overrides)?;
    Ok((config, Output::new(&common.out, !common.no_header_timestamp)))
}

fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Run(common) => {
            let (config, out) = load(&common)?;
            let m = cli::run(&config, &out)?;
            println!(
                "delay {:.4}  ber {:.3e}  silent {:.4}  -> {}",
                m.avg_system_delay,
                m.ber_overall,
                m.silent_fraction,
                out.path("run.csv").display()
            );
        }
        Command::Sweep { common, axis, values } => {
            let (config, out) = load(&common)?;
            cli::sweep(&config, axis, &values, &out)?;
            println!("{}", out.path(&format!("sweep_{}.csv", axis.name())).display());
        }
        Command::Compare { common, protocols } => {
            let (config, out) = load(&common)?;
            cli::compare(&config, &protocols, &out)?;
            println!("{}", out.path("compare.csv").display());
        }
        Command::Analyze(common) => {
            let (config, out) = load(&common)?;
            cli::analyze(&config, &out)?;
            println!("{}", out.path("analyze.csv").display());
        }
        Command::Validate(common) => {
            let (config, out) = load(&common)?;
            let report = cli::validate_to(&config, &out)?;
            for c in &report.checks {
                println!(
                    "[{}] {}: measured {:.6e}, expected {:.6e}, tolerance {:.3e}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.measured,
                    c.expected,
                    c.tolerance
                );
            }
            return Ok(report.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
