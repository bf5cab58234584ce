use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use spectrastat_core::changepoint::ConstantsReading;
use spectrastat_core::sampling::NoiseFamily;

#[derive(Debug, Parser)]
#[command(name = "spectrastat", version, about = "Random-matrix limit laws and high-dimensional covariance procedures")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Base seed; replicate r of case c uses stream (seed, c·2^40 + r).
    #[arg(long, global = true, default_value_t = 20_240_601)]
    pub seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    pub json_out: Option<PathBuf>,
    /// Also write a CSV rendering of the result.
    #[arg(long, global = true)]
    pub csv_out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample spectrum of a data matrix and its distance to the Marchenko–Pastur law.
    Esd(EsdArgs),
    /// Density and CDF curves of a limit law on a grid.
    Law(LawArgs),
    /// Build or verify the persisted Tracy–Widom table.
    Twtable {
        #[command(subcommand)]
        action: TwAction,
    },
    /// Covariance hypothesis tests.
    Test {
        #[command(subcommand)]
        test: TestCommand,
    },
    /// Spike detectability, eigenvalue limits and optional simulation.
    Spiked(SpikedArgs),
    /// Estimate the number of signals in a data matrix.
    Signals(SignalsArgs),
    /// Binary segmentation for covariance changepoints.
    Changepoint(ChangepointArgs),
    /// Seeded Monte Carlo experiments and plot data.
    Experiment {
        #[command(subcommand)]
        experiment: ExperimentCommand,
    },
}

#[derive(Debug, Args)]
pub struct EsdArgs {
    /// Data matrix, one observation per row.
    #[arg(long)]
    pub csv: PathBuf,
    /// Subtract the column means first (divisor n − 1).
    #[arg(long)]
    pub center: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LawKind {
    Mp,
    Semicircle,
    F,
    Tw,
}

#[derive(Debug, Args)]
pub struct LawArgs {
    #[arg(long, value_enum)]
    pub kind: LawKind,
    /// p/n for Marchenko–Pastur, numerator ratio for the F law.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Denominator ratio for the F law (must be below 1).
    #[arg(long)]
    pub gamma2: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    /// Grid size.
    #[arg(long, default_value_t = 401)]
    pub points: usize,
    #[arg(long)]
    pub lo: Option<f64>,
    #[arg(long)]
    pub hi: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum TwAction {
    /// Solve Painlevé II and write the (s, F1) table.
    Build {
        #[arg(long, default_value = "tw1_table.csv")]
        path: PathBuf,
    },
    /// Compare a persisted table with a fresh build.
    Verify {
        #[arg(long, default_value = "tw1_table.csv")]
        path: PathBuf,
        /// Largest tolerated CDF difference.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScalingArg {
    Threshold,
    Literal,
}

#[derive(Debug, Subcommand)]
pub enum TestCommand {
    /// Log-determinant test of Σ = Σ₀.
    OneSample {
        #[arg(long)]
        csv: PathBuf,
        /// Σ₀ as a p×p CSV matrix (default identity).
        #[arg(long)]
        sigma0_csv: Option<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Log-determinant test of the error covariance in Y = XB + E.
    Regression {
        #[arg(long)]
        y_csv: PathBuf,
        #[arg(long)]
        x_csv: PathBuf,
        #[arg(long)]
        sigma0_csv: Option<PathBuf>,
        /// Offset dimension (default: number of responses).
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Two-sample log-determinant test of Σ₁ = Σ₂.
    TwoSample {
        #[arg(long)]
        x_csv: PathBuf,
        #[arg(long)]
        y_csv: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Asymptotic power of the two-sample test.
    Power {
        #[arg(long)]
        p: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        /// Eigenvalues of Σ₁ (comma separated; one value is repeated p times).
        #[arg(long, value_delimiter = ',', required = true)]
        eig1: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        eig2: Vec<f64>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Largest-eigenvalue GLRT of Σ ∝ I.
    #[command(alias = "glrt")]
    Sphericity {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = ScalingArg::Threshold)]
        scaling: ScalingArg,
    },
    /// Largest root of the two-sample F matrix.
    FLargestRoot {
        #[arg(long)]
        x_csv: PathBuf,
        #[arg(long)]
        y_csv: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Wald-type largest-root test of LᵀB = B₀.
    Wald {
        #[arg(long)]
        y_csv: PathBuf,
        #[arg(long)]
        x_csv: PathBuf,
        #[arg(long)]
        l_csv: PathBuf,
        #[arg(long)]
        b0_csv: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
}

#[derive(Debug, Args)]
pub struct SpikedArgs {
    /// Population spikes (comma separated or repeated).
    #[arg(long, value_delimiter = ',', required = true)]
    pub ell: Vec<f64>,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    /// Simulate `reps` replicates with dimension p and n observations.
    #[arg(long, num_args = 3, value_names = ["P", "N", "REPS"])]
    pub simulate: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct SignalsArgs {
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long, default_value_t = 0.005)]
    pub alpha: f64,
    /// Include every tested step in the output.
    #[arg(long)]
    pub trace: bool,
    #[arg(long)]
    pub max_k: Option<usize>,
    #[arg(long)]
    pub center: bool,
}

#[derive(Debug, Args)]
pub struct ChangepointArgs {
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Minimum segment length (default max(5p, 30)).
    #[arg(long)]
    pub min_seg: Option<usize>,
    #[arg(long)]
    pub center: bool,
    #[arg(long, default_value = "contour")]
    pub reading: ConstantsReading,
    /// Keep the per-split normalized statistics of every scanned interval.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Args)]
pub struct CommonExperiment {
    #[arg(long)]
    pub reps: Option<usize>,
    /// Cases as n:p pairs, comma separated (default: the published grid).
    #[arg(long, value_delimiter = ',')]
    pub dims: Vec<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Directory for CSV, JSON and manifest files.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotArg {
    Mp,
    Tw,
    Spikes,
}

#[derive(Debug, Subcommand)]
pub enum ExperimentCommand {
    /// Largest-eigenvalue CDF of white Wishart matrices at nine percentiles.
    Table1(CommonExperiment),
    /// Signal-count recovery over noise families, n and K.
    SignalsFigure {
        #[command(flatten)]
        common: CommonExperiment,
        #[arg(long)]
        noise: Option<NoiseFamily>,
    },
    /// False positive rate of covariance binary segmentation.
    Fpr(CommonExperiment),
    /// Curves behind the density and spike figures.
    PlotData {
        #[arg(long, value_enum)]
        kind: PlotArg,
        #[arg(long, default_value_t = 801)]
        points: usize,
        /// Spike scatter: n, p and replicates.
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 50)]
        p: usize,
        #[arg(long, value_delimiter = ',', default_value = "2.5,1.5")]
        ell: Vec<f64>,
        #[arg(long, default_value_t = 50)]
        reps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}
