//! Command-line front end. [`run`] parses arguments and returns the process
//! exit code: 0 on success, 1 on numeric or validation failures, 2 on usage
//! errors.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::kernels::{KernelConfig, SequenceKernel, StructureKernel, SymbolKernel};

pub use commands::{
    bench_pair, bench_table, spike_comparison, BenchRow, FitDiagnostics, FitReport, SpikeComparison,
    STRUCTURE_PANELS,
};

#[derive(Debug, Parser)]
#[command(name = "seqkernels", version, about = "Decomposable sequence kernels: Grams, embeddings, classification")]
pub struct Cli {
    /// Seed for every random choice (data generation, CV splits, subsampling).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
    /// Normalize kernels to unit self-similarity (default).
    #[arg(long, global = true, overrides_with = "no_normalize", action = ArgAction::SetTrue)]
    pub normalize: bool,
    /// Use raw, unnormalized kernel values.
    #[arg(long = "no-normalize", global = true, overrides_with = "normalize", action = ArgAction::SetTrue)]
    pub no_normalize: bool,
    /// Output file (or directory for multi-file outputs); stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn normalize(&self) -> bool {
        !self.no_normalize
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a Gram matrix (binary file, or CSV with --csv / .csv path) and check it is PSD.
    Gram(GramArgs),
    /// Dump a structure-kernel matrix as CSV.
    StructureDump(StructureDumpArgs),
    /// Nested cross-validated SVM classification.
    Classify(ClassifyArgs),
    /// Kernel-PCA embedding as CSV.
    Embed(EmbedArgs),
    /// Fit kernel parameters by maximizing the GP marginal likelihood.
    Fit(FitArgs),
    /// Generate a toy dataset in SEQT format.
    GenToy(GenToyArgs),
    /// Time single-pair kernel evaluations across lengths.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelKind {
    Path,
    Exponential,
    Polynomial,
    Factorial,
    #[value(name = "ga", alias = "global-alignment")]
    Ga,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SymbolKind {
    Rbf,
    Linear,
    Delta,
}

#[derive(Debug, Clone, Args)]
pub struct KernelArgs {
    /// Structure kernel, or `ga` for global alignment.
    #[arg(long, value_enum, default_value_t = KernelKind::Path)]
    pub kernel: KernelKind,
    #[arg(long, value_enum, default_value_t = SymbolKind::Rbf)]
    pub symbol: SymbolKind,
    /// rbf / GA bandwidth; default: median pairwise symbol distance.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Path kernel horizontal/vertical step weight.
    #[arg(long, default_value_t = 0.3)]
    pub chv: f64,
    /// Path kernel diagonal step weight.
    #[arg(long, default_value_t = 0.3)]
    pub cd: f64,
    /// Exponential structure kernel width.
    #[arg(long, default_value_t = 16.0)]
    pub alpha: f64,
    /// Polynomial structure kernel offset.
    #[arg(long = "poly-c", default_value_t = 1.0)]
    pub poly_c: f64,
    #[arg(long, default_value_t = 2)]
    pub degree: u32,
    /// Factorial structure kernel shift.
    #[arg(long = "factorial-d", default_value_t = 0)]
    pub factorial_d: i64,
}

impl KernelArgs {
    pub fn structure(&self) -> Result<StructureKernel> {
        let s = match self.kernel {
            KernelKind::Path => StructureKernel::Path { chv: self.chv, cd: self.cd },
            KernelKind::Exponential => StructureKernel::Exponential { alpha: self.alpha },
            KernelKind::Polynomial => StructureKernel::Polynomial { c: self.poly_c, degree: self.degree },
            KernelKind::Factorial => StructureKernel::Factorial { d: self.factorial_d },
            KernelKind::Ga => {
                return Err(Error::Unsupported("global alignment has no structure matrix".into()))
            }
        };
        s.validate()?;
        Ok(s)
    }

    /// The configured kernel; `median` supplies the default bandwidth.
    pub fn build(&self, normalize: bool, median: impl FnOnce() -> Result<f64>) -> Result<SequenceKernel> {
        let needs_sigma = self.kernel == KernelKind::Ga || self.symbol == SymbolKind::Rbf;
        let sigma = match (self.sigma, needs_sigma) {
            (Some(s), _) => s,
            (None, true) => median()?,
            (None, false) => 1.0,
        };
        let kernel = if self.kernel == KernelKind::Ga {
            SequenceKernel::GlobalAlignment { sigma, normalize }
        } else {
            let symbol = match self.symbol {
                SymbolKind::Rbf => SymbolKernel::Rbf { sigma },
                SymbolKind::Linear => SymbolKernel::Linear,
                SymbolKind::Delta => SymbolKernel::Delta,
            };
            KernelConfig::new(symbol, self.structure()?).normalized(normalize).into()
        };
        kernel.validate()?;
        Ok(kernel)
    }
}

#[derive(Debug, Args)]
pub struct GramArgs {
    /// SEQT dataset.
    pub dataset: PathBuf,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Write CSV instead of the binary Gram format.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
pub struct StructureDumpArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Largest position (matrix is max-len x max-len).
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..=512))]
    pub max_len: u64,
    /// Write the five reference panels (one exponential, four path) into the --out directory.
    #[arg(long)]
    pub panels: bool,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    pub dataset: PathBuf,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Use the kernel exactly as given and tune only C (default: search the kernel grid).
    #[arg(long)]
    pub fixed: bool,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(2..))]
    pub outer_folds: u64,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(2..))]
    pub inner_folds: u64,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub outer_reps: u64,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    pub inner_reps: u64,
    /// SVM regularization grid.
    #[arg(long, value_delimiter = ',', default_values_t = crate::cv::C_GRID.to_vec())]
    pub c_grid: Vec<f64>,
    /// SMO KKT tolerance.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    /// Include wall-clock timings in the report (no longer bit-reproducible).
    #[arg(long)]
    pub record_timings: bool,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    pub dataset: PathBuf,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Number of principal components.
    #[arg(short, long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    pub p: u64,
    /// Fit kernel parameters by marginal likelihood before embedding.
    #[arg(long)]
    pub fit: bool,
    #[command(flatten)]
    pub fit_opts: FitOptArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FitOptArgs {
    /// Maximum gradient-ascent iterations.
    #[arg(long, default_value_t = 50)]
    pub budget: usize,
    /// Initial GP noise variance.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Keep the noise variance fixed.
    #[arg(long)]
    pub fixed_noise: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// SEQT dataset (not needed with --spike-experiment).
    #[arg(required_unless_present = "spike_experiment")]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub fit_opts: FitOptArgs,
    /// Generate sine/square waves with spikes and fit both labelings (waveform vs spike).
    #[arg(long)]
    pub spike_experiment: bool,
    #[command(flatten)]
    pub toy: SpikeToyArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SpikeToyArgs {
    #[arg(long, default_value_t = 10)]
    pub n_per_class: usize,
    /// Sequence length for the spike dataset.
    #[arg(long, default_value_t = 50)]
    pub len: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise_sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ToyKind {
    SineCosine,
    SineSquareSpike,
}

#[derive(Debug, Args)]
pub struct GenToyArgs {
    #[arg(value_enum)]
    pub kind: ToyKind,
    #[command(flatten)]
    pub toy: SpikeToyArgs,
    /// Shortest curve (sine-cosine).
    #[arg(long, default_value_t = 20)]
    pub len_min: usize,
    /// Longest curve (sine-cosine).
    #[arg(long, default_value_t = 100)]
    pub len_max: usize,
    /// Where to write the spike labeling (default: next to --out with a `.spike` suffix).
    #[arg(long)]
    pub spike_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, value_delimiter = ',', default_values_t = vec![64, 128, 256, 512])]
    pub lengths: Vec<usize>,
    /// Timing repetitions per length (median reported).
    #[arg(long, default_value_t = 7, value_parser = clap::value_parser!(u64).range(1..))]
    pub reps: u64,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Runs a parsed command, returning the exit code for non-error outcomes
/// (for instance 1 when a Gram fails the PSD check).
pub fn execute(cli: &Cli) -> Result<i32> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        builder = builder.num_threads(t as usize);
    }
    let pool = builder.build().map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    pool.install(|| commands::dispatch(cli))
}
