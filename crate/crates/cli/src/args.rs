use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Simulate multitype Lambda-coalescents and CSBPs and check their moment
/// duality.
///
/// Parameter files are JSON. A CSBP file has fields `d`, `B`, `c` and `mu`; a
/// coalescent file has `d`, `rho` and `Q`. Measures are lists of
/// `{"point": [...], "weight": w}` atoms. Types are numbered from 0.
///
/// Trajectories are written as CSV with header `rep,time,state`, where
/// `state` is JSON. Replicate `k` runs ChaCha8 seeded with the SplitMix64
/// output at counter `seed + (k + 1) * 0x9E3779B97F4A7C15`, so any single
/// trajectory can be reproduced alone.
///
/// Exit status: 0 on success, 1 when parameters fail validation or a check
/// fails, 2 on malformed input or any other error. COALBRANCH_THREADS caps
/// the number of worker threads.
#[derive(Debug, Parser)]
#[command(name = "coalbranch", version, allow_negative_numbers = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a parameter file and print the validation report.
    Validate {
        #[arg(long)]
        params: PathBuf,
        /// Report destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Map parameters across the homeomorphism at mass level z.
    Transform {
        /// `forward` maps a CSBP file to a coalescent file.
        #[arg(long, value_enum)]
        dir: Direction,
        /// Mass level, one positive value per type.
        #[arg(long, value_delimiter = ',', required = true)]
        z: Vec<f64>,
        /// Diagonal of B to restore on `inverse`; zeros when omitted.
        #[arg(long, visible_alias = "anchor", value_delimiter = ',', allow_hyphen_values = true)]
        a: Option<Vec<f64>>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Euler paths of the CSBP.
    SimulateCsbp {
        #[arg(long)]
        params: PathBuf,
        /// Initial mass, one nonnegative value per type.
        #[arg(long, value_delimiter = ',', required = true)]
        x0: Vec<f64>,
        #[command(flatten)]
        run: RunArgs,
        /// Euler step.
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// Frequency and total mass of two independent CSBPs, stopped when some
    /// total mass leaves (eps, L).
    SimulatePair {
        #[arg(long)]
        params: PathBuf,
        /// Initial frequencies in [0, 1].
        #[arg(long, value_delimiter = ',', required = true)]
        r0: Vec<f64>,
        /// Initial total masses.
        #[arg(long, value_delimiter = ',', required = true)]
        z0: Vec<f64>,
        /// Lower guard rail on every total mass.
        #[arg(long)]
        eps: f64,
        /// Upper guard rail on every total mass.
        #[arg(long = "L")]
        l: f64,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// Block-counting or partition-valued coalescent paths.
    ///
    /// Without `--z` the parameter file is a coalescent file. With `--z` it is
    /// a CSBP file and the dual chain at that mass level is simulated.
    SimulateCoalescent {
        #[arg(long, value_enum, default_value_t = CoalescentMode::Blocks)]
        mode: CoalescentMode,
        #[arg(long)]
        params: PathBuf,
        #[arg(long, value_delimiter = ',')]
        z: Option<Vec<f64>>,
        /// Initial block counts per type (blocks mode).
        #[arg(long, value_delimiter = ',', required_if_eq("mode", "blocks"))]
        n0: Option<Vec<u32>>,
        /// Type of each element 1..=M, starting from singletons (partition
        /// mode).
        #[arg(long, value_delimiter = ',', required_if_eq("mode", "partition"))]
        types: Option<Vec<usize>>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Paths of the frequency process, either the limiting jump-diffusion or
    /// the culling scheme at level n.
    SimulateFrequency {
        #[arg(long, value_enum)]
        mode: FrequencyMode,
        #[arg(long)]
        params: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        z: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        r0: Vec<f64>,
        #[command(flatten)]
        run: RunArgs,
        /// Euler step of the jump-diffusion (sde mode).
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Culling level (culling mode).
        #[arg(long, required_if_eq("mode", "culling"))]
        n: Option<u32>,
        /// Lower guard rail; 0.1 * min z when omitted (culling mode).
        #[arg(long)]
        eps: Option<f64>,
        /// Upper guard rail; 10 * max z when omitted (culling mode).
        #[arg(long = "L")]
        l: Option<f64>,
        /// Step of the inner pair simulation; 0.1 / n when omitted (culling
        /// mode).
        #[arg(long)]
        inner_dt: Option<f64>,
    },
    /// Compare E_r[R(t)^n] from the jump-diffusion with E_n[r^N(t)] from the
    /// dual block-counting chain.
    VerifyDuality {
        #[arg(long)]
        params: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        z: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        r: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<u32>,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Evaluate the backward side exactly instead of by Monte Carlo.
        #[arg(long)]
        exact_backward: bool,
        /// Largest |z-score| that still counts as agreement.
        #[arg(long, default_value_t = 3.0)]
        zthreshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Horizon.
    #[arg(long = "T")]
    pub horizon: f64,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CoalescentMode {
    Blocks,
    Partition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FrequencyMode {
    Sde,
    Culling,
}
