//! Command-line entry point.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hgp_core::bank::KernelBank;
use hgp_core::harness::{
    cmd_cluster, cmd_demo, cmd_gen_trips, cmd_profile, cmd_sweep, cmd_train_bank, default_demo_script,
    predictor_context, ExperimentConfig,
};
use hgp_core::trajectory::ManeuverScript;
use hgp_core::{Error, Result};

#[derive(Parser)]
#[command(name = "hgp", version, about = "Trajectory forecasting and FCW under lossy V2X")]
struct Cli {
    /// Experiment configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build, cluster and extend a kernel bank on synthetic or recorded trips.
    TrainBank,
    /// Mean model persistency for each reduced bank size.
    Cluster {
        /// Unclustered bank, e.g. kernel-full.bank.json.
        #[arg(long)]
        bank: PathBuf,
    },
    /// PER and rate sweeps over every configured predictor.
    Sweep {
        /// Kernel bank for the hgp predictor (kernel.bank.json).
        #[arg(long)]
        bank: Option<PathBuf>,
        /// Position bank for the hgp-direct predictor.
        #[arg(long)]
        direct_bank: Option<PathBuf>,
    },
    /// One scenario end to end with CAM and FCW logs.
    Demo {
        /// Kernel bank for the hgp predictor (kernel.bank.json).
        #[arg(long)]
        bank: Option<PathBuf>,
        /// Position bank for the hgp-direct predictor.
        #[arg(long)]
        direct_bank: Option<PathBuf>,
        /// Maneuver script (TOML); a braking lead vehicle when omitted.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Packet error rate of the remote vehicle's broadcasts.
        #[arg(long, default_value_t = 0.8)]
        per: f64,
        /// bsm, cs, ca, kf, hgp or hgp-d.
        #[arg(long, default_value = "hgp")]
        predictor: String,
    },
    /// Fit time against window length.
    Profile,
    /// Write scenario trips as CSV.
    GenTrips {
        /// Scenario set: train, holdout or eval.
        #[arg(long, default_value = "eval")]
        purpose: String,
        /// Number of trips; the suite size when omitted.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Print the effective configuration as TOML.
    Config,
}

fn load_bank(path: Option<&Path>) -> Result<Option<KernelBank>> {
    path.map(KernelBank::load).transpose()
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli.out.as_path();
    match cli.command {
        Command::TrainBank => {
            let r = cmd_train_bank(&cfg, out)?;
            println!(
                "bank: {} models ({} before clustering), mean persistency {:.2} s, held-out new-model rate {:.4}",
                r.bank.len(),
                r.full.len(),
                r.stats.mean_persistency(),
                r.holdout.new_model_rate()
            );
        }
        Command::Cluster { bank } => {
            let full = KernelBank::load(&bank)?;
            for r in cmd_cluster(&cfg, &full, out)?.rows {
                println!(
                    "c_size {:>3}: {:>3} models, mean persistency {:.3} s",
                    r.c_size, r.models, r.mean_persistency_s
                );
            }
        }
        Command::Sweep { bank, direct_bank } => {
            let ctx = predictor_context(&cfg, load_bank(bank.as_deref())?, load_bank(direct_bank.as_deref())?);
            let report = cmd_sweep(&cfg, &ctx, out)?;
            for r in &report.per_rows {
                println!(
                    "per {:>4.2} {:>5}: p95 {:.3} m, fcw accuracy {:.4}",
                    r.per, r.predictor, r.pte.p95, r.fcw_accuracy
                );
            }
        }
        Command::Demo { bank, direct_bank, script, per, predictor } => {
            let script = match script {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
                    ManeuverScript::from_toml(&text)?
                }
                None => default_demo_script(),
            };
            let ctx = predictor_context(&cfg, load_bank(bank.as_deref())?, load_bank(direct_bank.as_deref())?);
            let r = cmd_demo(&cfg, &script, per, &predictor, &ctx, out)?;
            println!(
                "{} decisions, {} warnings ({} on forecast state), {} CAM rows",
                r.decisions, r.warnings, r.forecast_warnings, r.cam_rows
            );
        }
        Command::Profile => {
            let p = cmd_profile(&cfg, out)?;
            for t in &p.points {
                println!("tw {:>3}: median {:.3} ms", t.tw, t.median_ms);
            }
            println!(
                "quadratic fit {:.4} + {:.4} tw + {:.6} tw^2, rmse {:.4} ms",
                p.quadratic[0], p.quadratic[1], p.quadratic[2], p.rmse_ms
            );
        }
        Command::GenTrips { purpose, count } => {
            let n = cmd_gen_trips(&cfg, &purpose, count.unwrap_or(cfg.suite.trips), out)?.len();
            println!("wrote {n} files to {}", out.display());
        }
        Command::Config => print!("{}", cfg.to_toml()?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
