//! `flashsim`: channel inspection, voltage optimization, calibration,
//! Monte-Carlo sweeps and LUT building for LDPC-coded MLC flash.
//!
//! Exit codes: 0 success, 1 i/o failure, 2 config error, 3 optimizer
//! failure, 4 missing dependency (calibration, LUT or alist file).

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use commands::{CliError, DminArgs, SweepOutputs};
use config::RunConfig;
use flashsim::readopt::{CostWeights, ReadScheme};
use flashsim::writeopt::WriteScheme;
use std::path::PathBuf;
use std::process::ExitCode;

const SEED_ENV: &str = "FLASHSIM_SEED";

#[derive(Parser, Debug)]
#[command(name = "flashsim", version, about = "LDPC-coded MLC flash channel toolkit")]
struct Cli {
    /// Run configuration file (sectioned key = value text).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Worker threads for Monte-Carlo work (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Master seed. Overrides FLASHSIM_SEED and the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

/// Operating point overrides.
#[derive(Args, Debug, Clone)]
struct PointArgs {
    /// Program/erase cycles.
    #[arg(long)]
    pe: Option<f64>,

    /// Retention time in hours.
    #[arg(long)]
    t_ret: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the state model, hard thresholds and page RBERs at one point.
    Inspect {
        #[command(flatten)]
        point: PointArgs,

        /// Write scheme used to place the programmed states.
        #[arg(long)]
        write_scheme: Option<WriteScheme>,

        /// Write a 512-point `v,entropy` trace CSV here.
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
    },

    /// Optimize write voltages; emits `v1,v2,cost,omega_msb,omega_lsb`.
    OptimizeWrite {
        #[command(flatten)]
        point: PointArgs,

        /// proposed, fixed, min-rber, mrd or mcc.
        #[arg(long)]
        scheme: Option<WriteScheme>,

        /// CSV destination (default: stdout).
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },

    /// Place read voltages; emits `theta_star,r1..r6,c1,c2,cost`.
    OptimizeRead {
        #[command(flatten)]
        point: PointArgs,

        /// proposed, uniform, mmi or entropy-fixed.
        #[arg(long)]
        scheme: Option<ReadScheme>,

        /// Entropy level for the entropy-fixed scheme.
        #[arg(long)]
        theta: Option<f64>,

        /// Cost weights `c1,c2`; replaces the calibration file.
        #[arg(long, value_parser = parse_weights, value_name = "C1,C2")]
        weights: Option<CostWeights>,

        /// Write scheme that fixes the state model being read.
        #[arg(long)]
        write_scheme: Option<WriteScheme>,

        /// CSV destination (default: stdout).
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },

    /// Fit the read cost weights from a Monte-Carlo theta sweep.
    Calibrate {
        /// Frames per theta point.
        #[arg(long)]
        frames: Option<u64>,

        /// Calibration file destination (default: output.calibration).
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },

    /// Coded BER over the PE x T grid; emits one CSV row per point.
    Sweep {
        /// Frame cap per grid point.
        #[arg(long)]
        frames: Option<u64>,

        /// Stop a point after this many bit errors (0 runs to the cap).
        #[arg(long)]
        min_events: Option<u64>,

        #[arg(long)]
        write_scheme: Option<WriteScheme>,

        #[arg(long)]
        read_scheme: Option<ReadScheme>,

        /// Cost weights `c1,c2` for proposed reads.
        #[arg(long, value_parser = parse_weights, value_name = "C1,C2")]
        weights: Option<CostWeights>,

        /// Take proposed write and read voltages from the LUT file.
        #[arg(long)]
        use_lut: bool,

        /// LUT file for --use-lut (default: output.lut).
        #[arg(long, value_name = "PATH")]
        lut: Option<PathBuf>,

        /// Also write the voltages used at each point to this CSV.
        #[arg(long, value_name = "PATH")]
        voltages_out: Option<PathBuf>,

        /// CSV destination (default: output.csv, else stdout).
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },

    /// Optimize write voltages and theta at every sweep grid point.
    BuildLut {
        /// Cost weights `c1,c2`; replaces the calibration file.
        #[arg(long, value_parser = parse_weights, value_name = "C1,C2")]
        weights: Option<CostWeights>,

        /// LUT destination (default: output.lut).
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },

    /// Estimate the minimum distance of the configured or a loaded code.
    Dmin {
        /// Information-set trials.
        #[arg(long)]
        effort: Option<usize>,

        /// Read the parity-check matrix from an alist file.
        #[arg(long, value_name = "PATH")]
        alist: Option<PathBuf>,

        /// Save the parity-check matrix as alist.
        #[arg(long, value_name = "PATH")]
        alist_out: Option<PathBuf>,
    },
}

fn parse_weights(s: &str) -> Result<CostWeights, String> {
    let (a, b) = s.split_once(',').ok_or("expected `c1,c2`")?;
    let c1 = a.trim().parse::<f64>().map_err(|e| format!("c1: {e}"))?;
    let c2 = b.trim().parse::<f64>().map_err(|e| format!("c2: {e}"))?;
    let w = CostWeights { c1, c2 };
    w.validate().map_err(|e| e.to_string())?;
    Ok(w)
}

fn apply_point(cfg: &mut RunConfig, p: &PointArgs) {
    if let Some(pe) = p.pe {
        cfg.channel.pe = pe;
    }
    if let Some(t) = p.t_ret {
        cfg.channel.t_ret = t;
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = commands::load_config(cli.config.as_deref())?;
    if let Ok(s) = std::env::var(SEED_ENV) {
        cfg.master_seed = s
            .trim()
            .parse()
            .map_err(|e| CliError::Config(format!("{SEED_ENV}=`{s}`: {e}")))?;
    }
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads {n}: {e}")))?;
    }
    match cli.command {
        Command::Inspect { point, write_scheme, trace } => {
            apply_point(&mut cfg, &point);
            if let Some(s) = write_scheme {
                cfg.write_scheme = s;
            }
            cfg.validate().map_err(CliError::Config)?;
            commands::inspect(&cfg, trace.as_deref())
        }
        Command::OptimizeWrite { point, scheme, out } => {
            apply_point(&mut cfg, &point);
            if let Some(s) = scheme {
                cfg.write_scheme = s;
            }
            cfg.validate().map_err(CliError::Config)?;
            commands::optimize_write(&cfg, out.as_deref())
        }
        Command::OptimizeRead {
            point,
            scheme,
            theta,
            weights,
            write_scheme,
            out,
        } => {
            apply_point(&mut cfg, &point);
            if let Some(s) = scheme {
                cfg.read_scheme = s;
            }
            if let Some(t) = theta {
                cfg.read.theta_fixed = t;
            }
            if let Some(s) = write_scheme {
                cfg.write_scheme = s;
            }
            cfg.validate().map_err(CliError::Config)?;
            commands::optimize_read(&cfg, weights, out.as_deref())
        }
        Command::Calibrate { frames, out } => {
            if let Some(f) = frames {
                cfg.calibrate.frames = f;
            }
            cfg.validate().map_err(CliError::Config)?;
            commands::calibrate(&cfg, out.as_deref())
        }
        Command::Sweep {
            frames,
            min_events,
            write_scheme,
            read_scheme,
            weights,
            use_lut,
            lut,
            voltages_out,
            out,
        } => {
            if let Some(f) = frames {
                cfg.frames = f;
            }
            if let Some(m) = min_events {
                cfg.min_events = m;
            }
            if let Some(s) = write_scheme {
                cfg.write_scheme = s;
            }
            if let Some(s) = read_scheme {
                cfg.read_scheme = s;
            }
            cfg.validate().map_err(CliError::Config)?;
            let outs = SweepOutputs {
                csv: out.or_else(|| cfg.output.csv.clone()),
                voltages: voltages_out.or_else(|| cfg.output.voltages.clone()),
                lut: (use_lut || lut.is_some()).then(|| lut.unwrap_or_else(|| cfg.output.lut.clone())),
            };
            commands::sweep(&cfg, weights, &outs)
        }
        Command::BuildLut { weights, out } => {
            cfg.validate().map_err(CliError::Config)?;
            commands::build_lut_cmd(&cfg, weights, out.as_deref())
        }
        Command::Dmin { effort, alist, alist_out } => {
            cfg.validate().map_err(CliError::Config)?;
            commands::dmin(&cfg, &DminArgs { effort, alist, alist_out })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("flashsim: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn weights_flag_parses_pairs() {
        assert_eq!(parse_weights("2, 0.5").unwrap(), CostWeights { c1: 2.0, c2: 0.5 });
        assert!(parse_weights("2").is_err());
        assert!(parse_weights("x,1").is_err());
    }

    #[test]
    fn flags_override_the_point() {
        let mut cfg = RunConfig::default();
        apply_point(&mut cfg, &PointArgs { pe: Some(100.0), t_ret: None });
        assert_eq!(cfg.channel.pe, 100.0);
        assert_eq!(cfg.channel.t_ret, 0.0);
    }
}
