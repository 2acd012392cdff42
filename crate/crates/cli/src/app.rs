use std::collections::BTreeSet;
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pcaanon_core::metrics::DEFAULT_RIDGE;
use pcaanon_core::{Basis, Scaling};

use crate::commands::{self, Emit, RunConfig, StudyConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "pcaanon", version, about = "Utility-aware PCA anonymization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Remove leading principal components while the policy holds.
    Anonymize(AnonymizeArgs),
    /// Compare two datasets and print a utility report.
    Metrics(MetricsArgs),
    /// Image quality after component removal, plus stimuli for serve-mos.
    ImageStudy(ImageStudyArgs),
    /// Fit the four-parameter sigmoid to an `order,eigenvalue` CSV.
    FitEigen(FitEigenArgs),
    /// Serve a grading session prepared by image-study.
    ServeMos(ServeMosArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScalingArg {
    PerColumn,
    Global,
}

impl From<ScalingArg> for Scaling {
    fn from(s: ScalingArg) -> Self {
        match s {
            ScalingArg::PerColumn => Scaling::PerColumn,
            ScalingArg::Global => Scaling::Global,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BasisArg {
    Fixed,
    Recomputed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmitArg {
    ReportJson,
    HistoryCsv,
    ImagePgm,
}

#[derive(Debug, Args)]
pub struct AnonymizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Policy JSON, e.g. {"correlation": {"enabled": true, "threshold": 0.9}}.
    #[arg(long)]
    pub policy: PathBuf,
    #[arg(long)]
    pub max_k: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_RIDGE)]
    pub ridge: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "per-column")]
    pub scaling: ScalingArg,
    #[arg(long, value_enum, default_value = "fixed")]
    pub basis: BasisArg,
    /// Artifacts besides the CSV. Repeat or comma-separate.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "report-json")]
    pub emit: Vec<EmitArg>,
    /// Input has no header row.
    #[arg(long)]
    pub no_header: bool,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Original dataset.
    #[arg(long)]
    pub input: PathBuf,
    /// Released dataset.
    #[arg(long, alias = "output")]
    pub anonymized: PathBuf,
    /// Without a policy every metric is reported and passes.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_RIDGE)]
    pub ridge: f64,
    #[arg(long)]
    pub no_header: bool,
}

#[derive(Debug, Args)]
pub struct ImageStudyArgs {
    /// Binary PGM.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,2,5")]
    pub ks: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep the original row order.
    #[arg(long)]
    pub no_shuffle: bool,
    /// Leading eigenvalues recorded and fitted.
    #[arg(long, default_value_t = 5)]
    pub eigen_count: usize,
}

#[derive(Debug, Args)]
pub struct FitEigenArgs {
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeMosArgs {
    /// Directory written by image-study.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: IpAddr,
}

impl AnonymizeArgs {
    pub fn to_config(&self) -> CliResult<RunConfig> {
        let policy = commands::read_policy(&self.policy)?;
        let mut config = RunConfig::new(&self.input, &self.output, policy);
        config.max_k = self.max_k;
        config.ridge = self.ridge;
        config.seed = self.seed;
        config.scaling = self.scaling.into();
        config.basis = match self.basis {
            BasisArg::Fixed => Basis::Fixed,
            BasisArg::Recomputed => Basis::Recomputed,
        };
        config.emit = self
            .emit
            .iter()
            .map(|e| match e {
                EmitArg::ReportJson => Emit::ReportJson,
                EmitArg::HistoryCsv => Emit::HistoryCsv,
                EmitArg::ImagePgm => Emit::ImagePgm,
            })
            .collect::<BTreeSet<_>>();
        config.has_header = !self.no_header;
        Ok(config)
    }
}

/// Runs one subcommand and returns what belongs on stdout.
pub fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Anonymize(args) => {
            let summary = commands::cmd_anonymize(&args.to_config()?)?;
            Ok(commands::json_line(&summary))
        }
        Command::Metrics(args) => {
            let policy = args
                .policy
                .as_deref()
                .map(commands::read_policy)
                .transpose()?;
            let report = commands::cmd_metrics(
                &args.input,
                &args.anonymized,
                policy.as_ref(),
                args.ridge,
                !args.no_header,
            )?;
            Ok(commands::json_line(&report))
        }
        Command::ImageStudy(args) => {
            let report = commands::cmd_image_study(&StudyConfig {
                input: args.input,
                output_dir: args.output,
                ks: args.ks,
                seed: args.seed,
                shuffle: !args.no_shuffle,
                eigen_count: args.eigen_count,
            })?;
            Ok(commands::json_line(&report))
        }
        Command::FitEigen(args) => {
            let fit = commands::cmd_fit_eigen(&args.input)?;
            Ok(commands::json_line(&fit))
        }
        Command::ServeMos(args) => {
            let rt = tokio::runtime::Runtime::new()
                .map_err(|e| CliError::data(format!("cannot start runtime: {e}")))?;
            rt.block_on(crate::server::serve(
                &args.input,
                SocketAddr::new(args.bind, args.port),
            ))?;
            Ok(String::new())
        }
    }
}
