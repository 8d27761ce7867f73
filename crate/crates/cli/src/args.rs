use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "fwlasso", version, about = "Randomized Frank-Wolfe and coordinate descent for the Lasso")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic regression problem as LIBSVM files.
    Synth(SynthArgs),
    /// Solve at one regularization value.
    Solve(SolveArgs),
    /// Solve along a geometric grid of regularization values.
    Path(PathArgs),
    /// Compare solvers and sample sizes over a full path.
    Bench(BenchArgs),
    /// Run the built-in self-check suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Libsvm,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Standardize {
    Unit,
    Center,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Solver {
    Fw,
    Cd,
    Scd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StopRuleArg {
    /// Largest coefficient change at most epsilon.
    Change,
    /// Duality gap at most epsilon (p extra dot products per iteration).
    Gap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Appendix,
}

/// `N` or `random`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedArg {
    Fixed(u64),
    Random,
}

impl std::str::FromStr for SeedArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "random" {
            return Ok(SeedArg::Random);
        }
        s.parse()
            .map(SeedArg::Fixed)
            .map_err(|_| format!("expected a non-negative integer or 'random', got '{s}'"))
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub p: usize,
    /// Training rows.
    #[arg(long)]
    pub m: usize,
    /// Test rows; defaults to `--m`.
    #[arg(long)]
    pub m_test: Option<usize>,
    #[arg(long)]
    pub informative: usize,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 1.0)]
    pub coef_scale: f64,
    #[arg(long)]
    pub seed: Option<SeedArg>,
    /// Training file.
    #[arg(long)]
    pub out: PathBuf,
    /// Test file; defaults to the training path with `.test` appended.
    #[arg(long)]
    pub test_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "libsvm")]
    pub format: Format,
    /// Fixes the feature count of LIBSVM input.
    #[arg(long)]
    pub num_features: Option<usize>,
    #[arg(long, value_enum, default_value = "unit")]
    pub standardize: Standardize,
}

#[derive(Debug, Args)]
#[group(multiple = false)]
pub struct SamplingArgs {
    /// Fixed sample size.
    #[arg(long)]
    pub sample_size: Option<usize>,
    /// Sample size as a fraction of the feature count.
    #[arg(long)]
    pub sample_frac: Option<f64>,
    /// Sample size from a confidence level; see --sample-top and --active-est.
    #[arg(long)]
    pub sample_confidence: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value = "fw")]
    pub solver: Solver,
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// With --sample-confidence: hit the top fraction Q of coordinates.
    #[arg(long, requires = "sample_confidence", conflicts_with = "active_est")]
    pub sample_top: Option<f64>,
    /// With --sample-confidence: hit an active set of size S (default: the
    /// current nonzero count, re-estimated every iteration).
    #[arg(long, requires = "sample_confidence")]
    pub active_est: Option<usize>,
    #[arg(long, value_enum, default_value = "change")]
    pub stop_rule: StopRuleArg,
    /// Record the duality gap every N iterations in the trace.
    #[arg(long)]
    pub audit_gap: Option<usize>,
    #[arg(long)]
    pub seed: Option<SeedArg>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Destination file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub out_format: OutFormat,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// l1 radius (fw).
    #[arg(long, conflicts_with = "lambda")]
    pub delta: Option<f64>,
    /// Penalty (cd, scd).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Write the per-iteration trace (fw) instead of the coefficients.
    #[arg(long)]
    pub trace: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = 100)]
    pub grid_points: usize,
    /// Ratio between the largest and smallest grid value.
    #[arg(long, default_value_t = 100.0)]
    pub grid_ratio: f64,
    /// Held-out set scored at every point (same format and transform).
    #[arg(long)]
    pub test_data: Option<PathBuf>,
    /// Solve all points from zero, in parallel.
    #[arg(long)]
    pub parallel_cold: bool,
}

#[derive(Debug, Args)]
pub struct PathArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Solvers to compare.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "cd,fw")]
    pub solvers: Vec<Solver>,
    /// Sample fractions for fw, one column each.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.02,0.03")]
    pub sample_frac: Vec<f64>,
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    #[arg(long)]
    pub seed: Option<SeedArg>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "appendix")]
    pub suite: Suite,
    #[arg(long)]
    pub seed: Option<SeedArg>,
}
