use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Default seed when neither `--seed` nor `INARAGG_SEED` is set.
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "inaragg",
    version,
    about = "Simulation, characteristic functions and limit diagnostics for aggregated randomized INAR(1) panels"
)]
pub struct Cli {
    /// Worker threads (default: all available cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo replicates of the aggregated partial-sum vector.
    Simulate(SimulateArgs),
    /// Characteristic function of the aggregated vector by quadrature over the mixing law.
    Cf(CfArgs),
    /// Distance to the limit exponent along a growth schedule of (n, N).
    Limit(LimitArgs),
    /// Statistical and numerical self-checks; exits 1 if any check fails.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file (default: stdout).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Output format (default: csv; JSON lines for `verify`).
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Manifest file (default: `<output>.manifest.json`, or stderr when writing to stdout).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Run from a JSON config or a previous manifest; model flags are then ignored.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Tail exponent of the mixing density near one; must exceed -1.
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Mixing shape: `beta` (solve for psi1), `beta:<a>`, `const:<c>` or `table:<path>`.
    /// Tables are CSV with header `x,psi`.
    #[arg(long, default_value = "beta:0")]
    pub psi: String,
    /// Limit of the shape at one. Required with plain `beta`; optional for tables.
    #[arg(long)]
    pub psi1: Option<f64>,
    /// Rescale a tabulated shape so the density integrates to one.
    #[arg(long)]
    pub normalize: bool,
    /// Innovation rate.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Comma-separated increasing times.
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub times: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CenteringArg {
    Conditional,
    SampleMean,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    /// Number of independent copies aggregated per replicate.
    #[arg(long = "N", default_value_t = 1)]
    pub copies: u64,
    /// Time-scale of the partial sums.
    #[arg(long = "n")]
    pub n: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    pub reps: u64,
    #[arg(long, env = "INARAGG_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = CenteringArg::Conditional)]
    pub centering: CenteringArg,
    /// Also write every simulated path as CSV (`replicate,copy,k,x`).
    #[arg(long)]
    pub dump_paths: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormulaArg {
    K,
    Ktilde,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// Tanh-sinh on geometric panels in the gap `1 - a`.
    De,
    /// Adaptive Gauss-Kronrod after a power substitution at the singular end.
    Gk,
}

#[derive(Debug, Args)]
pub struct QuadArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::De)]
    pub method: MethodArg,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub max_refinements: Option<u32>,
}

#[derive(Debug, Args)]
pub struct CfArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    #[command(flatten)]
    pub quad: QuadArgs,
    #[arg(long = "N", default_value_t = 1)]
    pub copies: u64,
    #[arg(long = "n")]
    pub n: Option<u64>,
    /// Frequency vectors, `;`-separated, each a comma list with one entry per time.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "grid")]
    pub thetas: Option<String>,
    /// Generated frequency grid `<count>:<radius>` along a rotating direction
    /// through the origin.
    #[arg(long, default_value = "15:3")]
    pub grid: String,
    /// Multiplier applied to the sums: a number, or `auto` for the limit scaling of the regime.
    #[arg(long, default_value = "1")]
    pub scale: String,
    #[arg(long, value_enum, default_value_t = FormulaArg::K)]
    pub formula: FormulaArg,
}

#[derive(Debug, Args)]
pub struct LimitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    #[command(flatten)]
    pub quad: QuadArgs,
    /// Frequency per time block (default: 1 for every block).
    #[arg(long, allow_hyphen_values = true)]
    pub thetas: Option<String>,
    /// Values of n (default: 8,16,32,64 for beta < 0, 16,32,64,128 for beta = 0).
    #[arg(long)]
    pub ns: Option<String>,
    /// `power:<p>` for N = n^p, `exp:<p>` for N = exp(ceil(n^p)), or
    /// `pairs:<n>=<N>,...` (default: power:4 for beta < 0, exp:0.7 for beta = 0).
    #[arg(long)]
    pub schedule: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    All,
    EmpiricalCf,
    Equality,
    Stationarity,
    Simulators,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub out: OutputArgs,
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    #[arg(long, env = "INARAGG_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Replicates per Monte Carlo check.
    #[arg(long, default_value_t = 100_000)]
    pub reps: u64,
    /// Largest number of time blocks in the equality sweep.
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    /// Random cases in the equality sweep.
    #[arg(long, default_value_t = 1000)]
    pub cases: usize,
    /// Largest n in the equality sweep.
    #[arg(long, default_value_t = 30)]
    pub n_max: u64,
    /// Debugging aid: shift the quadrature CF before comparing it with the
    /// simulation, which should make the empirical-CF check fail.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub inject_bias: f64,
}
