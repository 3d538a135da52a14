// SPDX-License-Identifier: Apache-2.0

//! `puf-gkm` command line.
//!
//! Exit codes: 0 success (rejected attacks included), 1 usage or parse
//! error, 2 a scenario assertion failed.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use puf_gkm::Geometry;

/// Seed used when neither `--seed` nor the environment provides one.
pub const DEFAULT_SEED: u64 = 2024;

#[derive(Parser, Debug)]
#[command(name = "puf-gkm", version, about = "MIPUF simulator and PUF-backed group key management")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Master seed; every generator is derived from it.
    #[arg(long, env = "PUF_GKM_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// MIPUF shape as nodes:m:nstages.
    #[arg(long)]
    pub geometry: Option<Geometry>,
    /// Single-PUF bit-error rate the noise is calibrated to.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Scenario script for `simulate`.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Flat key=value parameter file.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Independent repetitions where a command supports them.
    #[arg(long)]
    pub runs: Option<usize>,
}

impl Common {
    pub fn geometry(&self) -> Geometry {
        self.geometry.unwrap_or_default()
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Inter- and intra-configuration variation of one MIPUF.
    EvalPuf {
        #[command(flatten)]
        common: Common,
        /// Configurations compared pairwise.
        #[arg(long, default_value_t = 50)]
        configs: usize,
        /// Challenges per configuration pair.
        #[arg(long, default_value_t = 1000)]
        challenges: usize,
        /// Challenges of the reliability experiment.
        #[arg(long, default_value_t = 10_000)]
        intra_challenges: usize,
        /// Noisy re-evaluations per challenge.
        #[arg(long, default_value_t = 20)]
        repeats: usize,
    },
    /// Modeling attacks on a plain arbiter PUF and on the MIPUF.
    Attack {
        #[command(flatten)]
        common: Common,
        /// CRPs per dataset.
        #[arg(long, default_value_t = 10_000)]
        crps: usize,
        /// Response bit the models predict.
        #[arg(long, default_value_t = 0)]
        bit: usize,
        /// lr, es or both.
        #[arg(long, default_value = "both")]
        attack: commands::AttackChoice,
        /// Phases of the reconfiguration study; 0 skips it.
        #[arg(long, default_value_t = 3)]
        phases: usize,
        #[arg(long, default_value_t = 0.05)]
        learning_rate: f64,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 150)]
        generations: usize,
    },
    /// Runs a scenario script through the network simulator.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Closed-form cost tables and the energy comparison sweep.
    Cost {
        #[command(flatten)]
        common: Common,
    },
    /// CRP-exposure bound that triggers a complete rekey.
    RekeyBound {
        #[command(flatten)]
        common: Common,
        /// MIPUF nodes; defaults to the geometry.
        #[arg(long)]
        m: Option<u64>,
        /// PUFs per node; defaults to the geometry.
        #[arg(long)]
        n: Option<u64>,
        /// VC dimension of one PUF; defaults to stages + 1.
        #[arg(long)]
        k: Option<u64>,
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::EvalPuf {
            common,
            configs,
            challenges,
            intra_challenges,
            repeats,
        } => commands::eval_puf(&common, configs, challenges, intra_challenges, repeats),
        Command::Attack {
            common,
            crps,
            bit,
            attack,
            phases,
            learning_rate,
            epochs,
            generations,
        } => commands::attack(
            &common,
            &commands::AttackOptions {
                crps,
                bit,
                choice: attack,
                phases,
                learning_rate,
                epochs,
                generations,
            },
        ),
        Command::Simulate { common } => commands::simulate(&common),
        Command::Cost { common } => commands::cost(&common),
        Command::RekeyBound {
            common,
            m,
            n,
            k,
            delta,
            epsilon,
        } => commands::rekey_bound(&common, m, n, k, delta, epsilon),
    };
    match result {
        Ok(commands::Status::Ok) => ExitCode::SUCCESS,
        Ok(commands::Status::AssertionFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
