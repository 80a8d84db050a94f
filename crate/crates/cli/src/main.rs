//! wavescan: association testing between per-base count profiles and nearby
//! genotypes, with a wavelet-based hierarchical test, window baselines,
//! effect-profile estimation, a scenario simulator, and FDR utilities.

mod cmd_effects;
mod cmd_fdr;
mod cmd_scan;
mod cmd_simulate;
mod errors;
mod formats;
mod inputs;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "wavescan", version, about)]
struct Cli {
    /// Worker threads (0 = one per core)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Wavelet-based hierarchical likelihood-ratio scan
    Wavelet,
    /// Non-overlapping ~100bp windows, min-p statistic
    Window,
    /// The window method plus nine 50bp-shifted windows
    WindowShifted,
}

#[derive(clap::Args)]
pub struct ScanArgs {
    /// Site manifest TSV: site_id, chromosome, start, end
    #[arg(long)]
    manifest: PathBuf,
    /// Genotype TSV: variant_id, chromosome, position, dosages...
    #[arg(long)]
    genotypes: PathBuf,
    /// Library sizes TSV: individual_id, total_reads
    #[arg(long)]
    libsizes: PathBuf,
    /// Covariate TSV (individual_id, then K columns), e.g. principal components
    #[arg(long)]
    pc_file: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Test variants within this many bases of the site
    #[arg(long, default_value_t = 2000)]
    cis_window: u64,
    /// Permutations per site
    #[arg(long, default_value_t = 10_000)]
    permutations: usize,
    /// Stop permuting after this many exceedances (0 = never stop early)
    #[arg(long, default_value_t = 100)]
    adaptive_stop: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Results TSV to write
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
pub struct EffectsArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    genotypes: PathBuf,
    #[arg(long)]
    libsizes: PathBuf,
    #[arg(long)]
    pc_file: Option<PathBuf>,
    /// Site to profile
    #[arg(long)]
    site: String,
    /// Variant to profile (default: the strongest-associated one)
    #[arg(long)]
    variant: Option<String>,
    #[arg(long, default_value_t = 2000)]
    cis_window: u64,
    /// Report effects rescaled by each coefficient's raw standard deviation
    /// (approximate data-scale units instead of normalized units)
    #[arg(long)]
    raw_scale: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Null,
    NarrowStrong,
    BroadModest,
    OppositePair,
}

#[derive(clap::Args)]
pub struct SimulateArgs {
    /// Directory for the generated bundle (manifest, libsizes, genotypes,
    /// sites/, truth.tsv)
    #[arg(long)]
    out_dir: PathBuf,
    /// Scenario TOML; command-line overrides win over file values
    #[arg(long)]
    scenario_file: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    /// Number of sites to generate
    #[arg(long)]
    sites: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    individuals: Option<usize>,
    #[arg(long)]
    region_length: Option<usize>,
    #[arg(long)]
    maf: Option<f64>,
    #[arg(long)]
    depth: Option<f64>,
    #[arg(long)]
    multiplier: Option<f64>,
    /// Effect region(s) as start-end, e.g. --region 508-517 (repeatable)
    #[arg(long = "region")]
    regions: Vec<String>,
}

#[derive(clap::Args)]
pub struct FdrArgs {
    /// Results TSV produced by `scan` (q_value column is recomputed)
    #[arg(long)]
    results: PathBuf,
    /// Benjamini-Hochberg instead of Storey (fixes pi0 = 1)
    #[arg(long)]
    bh: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Scan every site for association with nearby variants
    Scan(ScanArgs),
    /// The window-based comparison scan (alias for scan with --method window)
    Baseline(ScanArgs),
    /// Per-base effect profile of one site/variant pair
    Effects(EffectsArgs),
    /// Generate a synthetic data bundle with known truth
    Simulate(SimulateArgs),
    /// Recompute q-values for an existing results file
    Fdr(FdrArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if cli.threads > 0 {
        pool = pool.num_threads(cli.threads);
    }
    let pool = pool
        .build()
        .map_err(|e| errors::fail("internal", format!("thread pool: {}", e)))?;

    match cli.command {
        Command::Scan(args) => {
            let method = args.method.unwrap_or(Method::Wavelet);
            pool.install(|| cmd_scan::run(&args, method))
        }
        Command::Baseline(args) => {
            let method = args.method.unwrap_or(Method::Window);
            pool.install(|| cmd_scan::run(&args, method))
        }
        Command::Effects(args) => pool.install(|| cmd_effects::run(&args)),
        Command::Simulate(args) => cmd_simulate::run(&args),
        Command::Fdr(args) => cmd_fdr::run(&args),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        match e.downcast_ref::<errors::CliError>() {
            Some(c) => eprintln!("{}", c),
            None => eprintln!("error[internal]: {:#}", e),
        }
        std::process::exit(1);
    }
}
