use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const MIN_SAMPLES: u64 = 1_000;

#[derive(Debug, Parser)]
#[command(name = "occupancy", version, about = "Occupancy counts in the uniform multinomial urn model")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Root seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write to this file instead of standard output.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "OCCUPANCY_THREADS", default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Auto,
    Exact,
    Float,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct PointArgs {
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub m: u64,
    #[arg(long)]
    pub d: u64,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct BudgetArgs {
    /// Largest n and m for big-integer laws.
    #[arg(long, env = "OCCUPANCY_EXACT_MAX", default_value_t = 150)]
    pub exact_max: u64,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct SampleArgs {
    /// Monte Carlo sample count.
    #[arg(long, env = "OCCUPANCY_SAMPLES")]
    pub samples: Option<u64>,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct ThresholdArgs {
    /// Loads below this are on the left of the central band.
    #[arg(long, default_value_t = 0.01)]
    pub ratio_lo: f64,
    /// Loads above this are on the right of the central band.
    #[arg(long, default_value_t = 100.0)]
    pub ratio_hi: f64,
    /// Means below this count as bounded.
    #[arg(long, default_value_t = 50.0)]
    pub mu_threshold: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mean, variance and rate of the count.
    Moments {
        #[command(flatten)]
        point: PointArgs,
        /// Also print the moments as reduced fractions.
        #[arg(long)]
        exact: bool,
        /// Also list the standardized atom locations.
        #[arg(long)]
        atoms: bool,
    },
    /// Law of the count.
    Pmf {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
        mode: ModeArg,
        #[command(flatten)]
        budget: BudgetArgs,
        /// Emit the size-biased law instead.
        #[arg(long)]
        size_biased: bool,
    },
    /// Kolmogorov distance of the standardized count to the standard normal.
    Kolmogorov {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
        mode: ModeArg,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Coupled draws of the count and its size-biased version.
    Couple {
        #[command(flatten)]
        point: PointArgs,
        #[command(flatten)]
        samples: SampleArgs,
        #[command(flatten)]
        budget: BudgetArgs,
        /// Write the first draws as JSON lines to this file.
        #[arg(long)]
        dump: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        dump_count: u64,
        /// Include both configurations in dumped draws.
        #[arg(long)]
        verbose: bool,
    },
    /// Run the verification suites.
    Verify(VerifyArgs),
    /// Kolmogorov distances and bound quantities over a grid.
    Scan(ScanArgs),
    /// Place one point among the limiting regimes.
    Domain {
        #[command(flatten)]
        point: PointArgs,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
    /// New-species estimator from an occupancy counts file.
    Starr {
        /// File of `occupancy,count` lines.
        #[arg(long)]
        counts: PathBuf,
        #[arg(long)]
        n0: u64,
        /// Expected ball total; checked against the file.
        #[arg(long)]
        n: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Conditions,
    EfronStein,
    Helpers,
    Lemma32,
    Corollary,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    #[arg(long, default_value_t = 2)]
    pub d: u64,
    /// Urn counts of the condition grid.
    #[arg(long, value_delimiter = ',', default_values_t = [25u64, 50, 100, 200])]
    pub m_values: Vec<u64>,
    /// Loads of the condition grid.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0])]
    pub ratios: Vec<f64>,
    #[command(flatten)]
    pub samples: SampleArgs,
    /// Point for the variance sums.
    #[arg(long, default_value_t = 40)]
    pub es_n: u64,
    #[arg(long, default_value_t = 20)]
    pub es_m: u64,
    /// Allowed ratio of estimated variance to its growth bound.
    #[arg(long, default_value_t = 1e3)]
    pub ceiling: f64,
    /// Exponents `a` of the right-intermediate sequences.
    #[arg(long, value_delimiter = ',', default_values_t = [7.0])]
    pub a: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [1_000u64, 10_000, 100_000, 1_000_000])]
    pub sequence_m: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_values_t = [5u64, 6, 7, 8])]
    pub sequence_d: Vec<u64>,
    /// Exit with status 1 when a suite fails.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long, default_value_t = 2)]
    pub d: u64,
    /// Single point instead of a grid.
    #[arg(long, requires = "m", conflicts_with_all = ["m_values", "m_range", "ratios", "band"])]
    pub n: Option<u64>,
    #[arg(long)]
    pub m: Option<u64>,
    /// Explicit urn counts.
    #[arg(long, value_delimiter = ',', conflicts_with = "m_range")]
    pub m_values: Option<Vec<u64>>,
    /// Urn counts `lo:hi:step`.
    #[arg(long)]
    pub m_range: Option<String>,
    /// Explicit loads n/m.
    #[arg(long, value_delimiter = ',', conflicts_with = "band")]
    pub ratios: Option<Vec<f64>>,
    /// Evenly spaced loads `lo:hi:count`.
    #[arg(long)]
    pub band: Option<String>,
    #[command(flatten)]
    pub samples: SampleArgs,
    #[command(flatten)]
    pub budget: BudgetArgs,
    /// Largest n^2 m handled by the floating recursion before sampling.
    #[arg(long, default_value_t = 1e9)]
    pub float_budget: f64,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
}
