//! `fermi-income`: batch fitting of Fermi-Dirac, Bose-Einstein and
//! Boltzmann-Gibbs models to decile income tables.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fermi_income::fit::DEFAULT_REJECT_BELOW;
use fermi_income::ingest::{IncomeBasis, UnitHolder};
use fermi_income::{ModelFamily, TableKind};

#[derive(Parser)]
#[command(name = "fermi-income", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one or all model families to every table in the input files.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "fd")]
        family: FamilyArg,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Rank the three families by R² for every table.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Fit a multi-year series and report temperature and chemical-potential diagnostics.
    Series {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "fd")]
        family: FamilyArg,
        /// `year,growth_percent` CSV compared against changes in mu.
        #[arg(long)]
        proxy: Option<PathBuf>,
        /// Pair the mu change of year t with the proxy value of year t + lag.
        #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
        lag: i32,
        /// Keep rejected fits in the trend and symmetry reports.
        #[arg(long)]
        include_rejected: bool,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Generate a decile table lying on a model curve, optionally with noise.
    Synth(SynthArgs),
}

#[derive(Args, Clone)]
pub struct Common {
    /// Percent offset of a decile mean below its upper cumulative edge.
    #[arg(long, default_value_t = 5.0)]
    pub mean_offset: f64,
    /// Fits with R² below this are marked rejected.
    #[arg(long, default_value_t = DEFAULT_REJECT_BELOW)]
    pub reject_below: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    /// Number of Levenberg-Marquardt starts, the unperturbed guess included.
    #[arg(long, default_value_t = 8)]
    pub multistart: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Multiply every income by this factor before fitting.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Directory for the JSON report and plot data; the report goes to stdout otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Model parameters as `T,mu,c`.
    #[arg(long, value_parser = parse_params, allow_hyphen_values = true)]
    pub params: (f64, f64, f64),
    #[arg(long, value_enum, default_value = "fd")]
    pub family: FamilyArg,
    #[arg(long, value_parser = parse_kind, default_value = "upper")]
    pub kind: TableKind,
    /// Standard deviation of Gaussian noise added to each ln-percent level.
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5.0)]
    pub mean_offset: f64,
    #[arg(long, default_value = "Synthetic")]
    pub country: String,
    #[arg(long, default_value_t = 2000)]
    pub year: i32,
    #[arg(long)]
    pub month: Option<u8>,
    #[arg(long, value_parser = parse_basis, default_value = "net")]
    pub basis: IncomeBasis,
    #[arg(long, value_parser = parse_holder, default_value = "individual")]
    pub holder: UnitHolder,
    #[arg(long, default_value = "EUR")]
    pub currency: String,
    /// Write `synth.csv` here instead of printing the table.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Fd,
    Be,
    Bg,
    All,
}

impl FamilyArg {
    pub fn families(self) -> Vec<ModelFamily> {
        match self {
            FamilyArg::Fd => vec![ModelFamily::FermiDirac],
            FamilyArg::Be => vec![ModelFamily::BoseEinstein],
            FamilyArg::Bg => vec![ModelFamily::BoltzmannGibbs],
            FamilyArg::All => ModelFamily::ALL.to_vec(),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            FamilyArg::Fd => "fd",
            FamilyArg::Be => "be",
            FamilyArg::Bg => "bg",
            FamilyArg::All => "all",
        }
    }
}

fn parse_params(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [t, mu, c] => Ok((t, mu, c)),
        _ => Err(format!("expected T,mu,c but got {} values", parts.len())),
    }
}

fn parse_kind(s: &str) -> Result<TableKind, String> {
    s.parse()
}

fn parse_basis(s: &str) -> Result<IncomeBasis, String> {
    s.parse()
}

fn parse_holder(s: &str) -> Result<UnitHolder, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit { common, family, files } => commands::fit(&common, family, &files),
        Command::Compare { common, files } => commands::compare(&common, &files),
        Command::Series {
            common,
            family,
            proxy,
            lag,
            include_rejected,
            files,
        } => commands::series(&common, family, proxy.as_deref(), lag, include_rejected, &files),
        Command::Synth(args) => commands::synth(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fermi-income: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
