use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "qst",
    version,
    about = "Sparse multi-photon state recovery from coincidence measurements"
)]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the sensing matrix and write it to a cache file.
    BuildMatrix(BuildMatrixArgs),
    /// Draw (or load) a state and write its synthetic coincidence measurements.
    Simulate(SimulateArgs),
    /// Recover a state from measured coincidences.
    Recover(RecoverArgs),
    /// Monte Carlo sweep over sparsity or SNR.
    Sweep(SweepArgs),
    /// Single-photon impulse response of the array.
    Impulse(ImpulseArgs),
}

/// Every subcommand accepts `--config FILE`; it is expanded before parsing.
#[derive(Debug, Args)]
pub struct ConfigArg {
    /// JSON object of flag values; explicit flags take precedence.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct LatticeArgs {
    #[arg(long, default_value_t = 20)]
    pub waveguides: usize,
    /// Nearest-neighbour coupling C.
    #[arg(long, default_value_t = 1.0)]
    pub coupling: f64,
    /// Uniform propagation constant β.
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    /// Propagation length.
    #[arg(long, default_value_t = 2.5, conflicts_with = "cz")]
    pub z: f64,
    /// Coupling length C·z; sets z = cz / C.
    #[arg(long)]
    pub cz: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BasisChoice {
    Fock,
    Entangled,
}

#[derive(Debug, Clone, Args)]
pub struct BasisArgs {
    #[arg(long, default_value_t = 3)]
    pub photons: u32,
    /// Correlation order G.
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    #[arg(long, value_enum, default_value_t = BasisChoice::Fock)]
    pub basis: BasisChoice,
    /// Waveguide pair (1-based) of the entangled basis.
    #[arg(long, value_name = "A,B", value_parser = parse_pair, default_value = "3,7")]
    pub pair: (usize, usize),
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected A,B, got {s:?}"))?;
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    Ok((parse(a)?, parse(b)?))
}

#[derive(Debug, Args)]
pub struct BuildMatrixArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[command(flatten)]
    pub basis: BasisArgs,
    #[arg(long, value_name = "FILE")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 40)]
    pub max_support: usize,
    #[arg(long, default_value_t = 0.02)]
    pub rel_residual_tol: f64,
    /// Pruning threshold applied before the final refit.
    #[arg(long, default_value_t = 1e-6)]
    pub min_coefficient: f64,
    /// Report raw coefficients instead of renormalizing to unit sum.
    #[arg(long)]
    pub no_renormalize: bool,
    /// Skip the whole-dictionary refinement after the greedy stage.
    #[arg(long)]
    pub no_refine: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long, value_name = "FILE")]
    pub matrix: PathBuf,
    /// Ground-truth state (JSON); otherwise a random K-sparse state is drawn.
    #[arg(long, value_name = "FILE", conflicts_with = "sparsity")]
    pub state: Option<PathBuf>,
    #[arg(long, required_unless_present = "state")]
    pub sparsity: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Depolarization λ.
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Measurement SNR in dB; omit for noiseless.
    #[arg(long)]
    pub snr_db: Option<f64>,
    /// Coincidence CSV to write.
    #[arg(long, value_name = "FILE")]
    pub measurements: PathBuf,
    /// Run description (ground truth and noise settings) to write.
    #[arg(long, value_name = "FILE")]
    pub truth: PathBuf,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long, value_name = "FILE")]
    pub matrix: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub measurements: PathBuf,
    /// Run description from `simulate`; enables fidelity scoring.
    #[arg(long, value_name = "FILE")]
    pub truth: Option<PathBuf>,
    /// Recovery JSON (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    /// Trial CSV to append a scored row to (requires --truth).
    #[arg(long, value_name = "FILE", requires = "truth")]
    pub record: Option<PathBuf>,
    #[arg(long, default_value_t = 0.95)]
    pub threshold: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisChoice {
    Sparsity,
    Snr,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Cached matrix; built from the lattice/basis flags when omitted.
    #[arg(long, value_name = "FILE")]
    pub matrix: Option<PathBuf>,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[command(flatten)]
    pub basis: BasisArgs,
    #[arg(long, value_enum)]
    pub axis: AxisChoice,
    /// Sweep points, comma separated; integer ranges as `a..b` (inclusive).
    #[arg(long, value_name = "LIST")]
    pub values: String,
    /// Fixed sparsity for an SNR sweep.
    #[arg(long)]
    pub sparsity: Option<usize>,
    /// Fixed SNR for a sparsity sweep; omit for noiseless.
    #[arg(long)]
    pub snr_db: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub base_seed: u64,
    #[arg(long, default_value_t = 0.95)]
    pub threshold: f64,
    /// Aggregated CSV, one row per sweep point.
    #[arg(long, value_name = "FILE")]
    pub output: PathBuf,
    /// Per-trial CSV.
    #[arg(long, value_name = "FILE")]
    pub records: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct ImpulseArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    /// Input waveguide (1-based); defaults to the centre.
    #[arg(long)]
    pub input: Option<usize>,
    /// Add the infinite-array Bessel reference column.
    #[arg(long)]
    pub bessel: bool,
    /// CSV path (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}
