//! Batch subcommands: anonymize, metrics, image-study and fit-eigen.
//!
//! Every command is deterministic: the same inputs and flags produce
//! byte-identical artifacts.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pcaanon_core::imaging::{
    dataset_to_image, fit_sigmoid, load_image, mse, psnr, shuffle_rows,
    ssim_default, write_image, ImagePca, Psnr, Scaling, SHUFFLE_ALGORITHM,
};
use pcaanon_core::metrics::{evaluate, DEFAULT_RIDGE};
use pcaanon_core::pca::{anonymize_with, AnonymizeOptions, Basis, StopReason};
use pcaanon_core::{
    load_csv, write_csv, Dataset, HistoryEntry, Metric, SigmoidFit, UtilityPolicy, UtilityReport,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::mos::{Manifest, StimulusPair};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emit {
    ReportJson,
    HistoryCsv,
    ImagePgm,
}

/// Everything `anonymize` needs.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub policy: UtilityPolicy,
    pub max_k: Option<usize>,
    pub ridge: f64,
    pub scaling: Scaling,
    /// Recorded in the report. The anonymization itself draws no random numbers.
    pub seed: u64,
    pub emit: BTreeSet<Emit>,
    pub basis: Basis,
    pub has_header: bool,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, output: impl Into<PathBuf>, policy: UtilityPolicy) -> Self {
        RunConfig {
            input: input.into(),
            output: output.into(),
            policy,
            max_k: None,
            ridge: DEFAULT_RIDGE,
            scaling: Scaling::PerColumn,
            seed: 0,
            emit: BTreeSet::from([Emit::ReportJson]),
            basis: Basis::Fixed,
            has_header: true,
        }
    }

    pub fn report_path(&self) -> PathBuf {
        self.output.with_extension("report.json")
    }

    pub fn history_path(&self) -> PathBuf {
        self.output.with_extension("history.csv")
    }

    pub fn image_path(&self) -> PathBuf {
        self.output.with_extension("pgm")
    }
}

pub fn read_policy(path: &Path) -> CliResult<UtilityPolicy> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read policy {}: {e}", path.display())))?;
    UtilityPolicy::from_json(&text).map_err(|e| CliError::config(e.to_string()))
}

#[derive(Debug, Serialize)]
pub struct AnonymizeSummary {
    pub output: String,
    pub components_removed: usize,
    pub stopped_reason: StopReason,
    pub artifacts: Vec<String>,
}

#[derive(Serialize)]
struct AnonymizeReport<'a> {
    input: String,
    seed: u64,
    ridge: f64,
    basis: Basis,
    policy: serde_json::Value,
    eigenvalues: &'a [f64],
    components_removed: usize,
    stopped_reason: StopReason,
    history: &'a [HistoryEntry],
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    std::fs::write(path, bytes)
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

fn to_json_pretty<S: Serialize>(value: &S) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

pub fn cmd_anonymize(config: &RunConfig) -> CliResult<AnonymizeSummary> {
    if !(config.ridge >= 0.0) || !config.ridge.is_finite() {
        return Err(CliError::config(format!("invalid ridge {}", config.ridge)));
    }
    let policy = config.policy.clone().with_ridge(config.ridge);
    policy.validate().map_err(|e| CliError::config(e.to_string()))?;

    let a: Dataset = load_csv(&config.input, config.has_header)?;
    let result = anonymize_with(
        &a,
        &policy,
        &AnonymizeOptions {
            max_k: config.max_k,
            basis: config.basis,
        },
    )?;
    log::info!(
        "removed {} of {} components ({:?})",
        result.components_removed,
        a.n_cols(),
        result.stopped_reason
    );

    write_csv(&result.anonymized, &config.output)?;
    let mut artifacts = vec![config.output.display().to_string()];

    if config.emit.contains(&Emit::ReportJson) {
        let report = AnonymizeReport {
            input: config.input.display().to_string(),
            seed: config.seed,
            ridge: config.ridge,
            basis: config.basis,
            policy: serde_json::from_str(&policy.to_json()).expect("policy is JSON"),
            eigenvalues: &result.eigenvalues,
            components_removed: result.components_removed,
            stopped_reason: result.stopped_reason,
            history: &result.history,
        };
        let path = config.report_path();
        write_file(&path, to_json_pretty(&report))?;
        artifacts.push(path.display().to_string());
    }
    if config.emit.contains(&Emit::HistoryCsv) {
        let path = config.history_path();
        write_file(&path, history_csv(&result.history))?;
        artifacts.push(path.display().to_string());
    }
    if config.emit.contains(&Emit::ImagePgm) {
        let (img, _) = dataset_to_image(&result.anonymized, config.scaling)?;
        let path = config.image_path();
        write_image(&img, &path)?;
        artifacts.push(path.display().to_string());
    }

    Ok(AnonymizeSummary {
        output: config.output.display().to_string(),
        components_removed: result.components_removed,
        stopped_reason: result.stopped_reason,
        artifacts,
    })
}

/// `k,<metric…>,pass` with empty cells for disabled or undefined metrics.
pub fn history_csv(history: &[HistoryEntry]) -> String {
    let mut out = String::from("k");
    for m in Metric::ALL {
        out.push(',');
        out.push_str(m.name());
    }
    out.push_str(",pass\n");
    for entry in history {
        write!(out, "{}", entry.k).unwrap();
        for m in Metric::ALL {
            out.push(',');
            if let Some(v) = entry.report.value(m) {
                write!(out, "{v}").unwrap();
            }
        }
        writeln!(out, ",{}", entry.report.pass).unwrap();
    }
    out
}

/// Reports all five metrics against unreachable thresholds.
pub fn report_everything_policy() -> UtilityPolicy {
    UtilityPolicy::permissive()
}

pub fn cmd_metrics(
    a_path: &Path,
    b_path: &Path,
    policy: Option<&UtilityPolicy>,
    ridge: f64,
    has_header: bool,
) -> CliResult<UtilityReport> {
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(CliError::config(format!("invalid ridge {ridge}")));
    }
    let policy = policy
        .cloned()
        .unwrap_or_else(report_everything_policy)
        .with_ridge(ridge);
    let a: Dataset = load_csv(a_path, has_header)?;
    let b: Dataset = load_csv(b_path, has_header)?;
    Ok(evaluate(&a, &b, &policy)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QualityRow {
    pub k: usize,
    pub mse: f64,
    pub psnr: Psnr<f64>,
    pub ssim: f64,
    pub image: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyReport {
    pub input: String,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub shuffled: bool,
    pub shuffle_algorithm: String,
    pub reference: String,
    pub results: Vec<QualityRow>,
    pub eigen_decay: Vec<f64>,
    pub sigmoid_fit: Option<SigmoidFit>,
}

#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub input: PathBuf,
    pub output_dir: PathBuf,
    pub ks: Vec<usize>,
    pub seed: u64,
    pub shuffle: bool,
    pub eigen_count: usize,
}

pub const REFERENCE_ID: &str = "reference";

pub fn stimulus_id(k: usize) -> String {
    format!("k{k}")
}

/// Shuffles rows, removes the requested numbers of leading components and
/// scores each result against the shuffled reference. Writes one PGM per
/// stimulus, `study.json`, and a `manifest.json` for `serve-mos`.
pub fn cmd_image_study(config: &StudyConfig) -> CliResult<StudyReport> {
    let img = load_image(&config.input)?;
    if config.ks.is_empty() {
        return Err(CliError::config("--ks must list at least one value"));
    }
    if let Some(&bad) = config.ks.iter().find(|&&k| k >= img.width()) {
        return Err(CliError::config(format!(
            "k = {bad} out of range for an image {} columns wide",
            img.width()
        )));
    }
    if config.eigen_count > img.width() {
        return Err(CliError::config(format!(
            "eigen count {} exceeds image width {}",
            config.eigen_count,
            img.width()
        )));
    }
    std::fs::create_dir_all(&config.output_dir).map_err(|e| {
        CliError::data(format!(
            "cannot create {}: {e}",
            config.output_dir.display()
        ))
    })?;

    let reference = if config.shuffle {
        shuffle_rows(&img, config.seed)
    } else {
        img
    };
    let reference_file = format!("{REFERENCE_ID}.pgm");
    write_image(&reference, config.output_dir.join(&reference_file))?;

    let pca = ImagePca::<f64>::fit(&reference)?;
    let mut results = Vec::with_capacity(config.ks.len());
    for &k in &config.ks {
        let out = pca.remove(k)?;
        let file = format!("{}.pgm", stimulus_id(k));
        write_image(&out, config.output_dir.join(&file))?;
        results.push(QualityRow {
            k,
            mse: mse(&reference, &out)?,
            psnr: psnr(&reference, &out)?,
            ssim: ssim_default(&reference, &out)?,
            image: file,
        });
    }

    let decay = pca.eigenvalues()[..config.eigen_count].to_vec();
    let sigmoid_fit = if decay.len() >= 4 {
        let points: Vec<(f64, f64)> = decay
            .iter()
            .enumerate()
            .map(|(i, &v)| ((i + 1) as f64, v))
            .collect();
        match fit_sigmoid(&points) {
            Ok(fit) => Some(fit),
            Err(e) => {
                log::warn!("eigenvalue decay fit failed: {e}");
                None
            }
        }
    } else {
        None
    };

    let report = StudyReport {
        input: config.input.display().to_string(),
        width: reference.width(),
        height: reference.height(),
        seed: config.seed,
        shuffled: config.shuffle,
        shuffle_algorithm: SHUFFLE_ALGORITHM.to_owned(),
        reference: reference_file,
        results,
        eigen_decay: decay,
        sigmoid_fit,
    };
    write_file(&config.output_dir.join("study.json"), to_json_pretty(&report))?;

    let manifest = Manifest {
        session: format!("image-study-seed-{}", config.seed),
        pairs: config
            .ks
            .iter()
            .map(|&k| StimulusPair {
                id: stimulus_id(k),
                reference: REFERENCE_ID.to_owned(),
                test: stimulus_id(k),
                k,
            })
            .collect(),
    };
    write_file(
        &config.output_dir.join(crate::mos::MANIFEST_FILE),
        to_json_pretty(&manifest),
    )?;
    Ok(report)
}

/// Fits the sigmoid to an `order,eigenvalue` CSV.
pub fn cmd_fit_eigen(input: &Path) -> CliResult<SigmoidFit> {
    let table: Dataset = load_csv(input, true)?;
    if table.n_cols() != 2 {
        return Err(CliError::data(format!(
            "expected 2 columns (order,eigenvalue), found {}",
            table.n_cols()
        )));
    }
    let points: Vec<(f64, f64)> = table
        .values()
        .row_iter()
        .map(|r| (r[0], r[1]))
        .collect();
    Ok(fit_sigmoid(&points)?)
}

pub fn json_line<S: Serialize>(value: &S) -> String {
    to_json_pretty(value)
}
