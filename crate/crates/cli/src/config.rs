//! Command-line and configuration-file parsing.
//!
//! Every subcommand flag may also be given in a TOML file passed with
//! `--config`; the file holds common keys at the top level and one table per
//! subcommand. Flags override file values.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use qrdr::qcnn::experiment::Arm;
use qrdr::qrdr::{DataScaling, EvolutionPath};
use qrdr::qsvm::DEFAULT_GAMMA_GRID;
use qrdr::resonance::DEFAULT_C_GRID;

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_OUT: &str = "results";

#[derive(Debug, Parser)]
#[command(
    name = "qrdr",
    version,
    about = "Resonant dimensionality reduction experiments"
)]
pub struct Cli {
    /// TOML file with default values; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true, env = "QRDR_THREADS")]
    pub threads: Option<usize>,
    /// Directory receiving the report and any CSV side files.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run QRDR on a dataset and write the reduced features.
    Reduce(ReduceArgs),
    /// Sweep the resonant parameter and fit the error scaling.
    SweepC(SweepArgs),
    /// Cross-validate the least-squares SVM on raw or reduced features.
    Qsvm(QsvmArgs),
    /// Generate a labeled set of Ising ground states.
    TfimGen(TfimGenArgs),
    /// Train the phase classifiers on Ising ground states.
    QcnnTrain(QcnnArgs),
    /// Run the built-in invariant checks.
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Reduce(_) => "reduce",
            Command::SweepC(_) => "sweep-c",
            Command::Qsvm(_) => "qsvm",
            Command::TfimGen(_) => "tfim-gen",
            Command::QcnnTrain(_) => "qcnn-train",
            Command::Verify(_) => "verify",
        }
    }
}

/// Copies every field of `over` that is set onto `self`.
macro_rules! overlay {
    ($ty:ident { $($field:ident),* $(,)? }) => {
        impl $ty {
            pub fn overlay(self, over: Self) -> Self {
                Self { $($field: over.$field.or(self.$field)),* }
            }
        }
    };
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingArg {
    Raw,
    UnitTop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EvolutionArg {
    Blockwise,
    Dense,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FeaturesArg {
    Raw,
    Pca,
    Qrdr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GradientArg {
    FiniteDifference,
    ParameterShift,
}

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ReduceArgs {
    /// Sonar-style CSV (features, then an M/R label) or an Ising JSONL file.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Number of retained principal directions.
    #[arg(long)]
    pub r: Option<usize>,
    /// Resonant parameter; defaults to one hundredth of the minimum detuning.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long, value_enum)]
    pub scaling: Option<ScalingArg>,
    #[arg(long, value_enum)]
    pub evolution: Option<EvolutionArg>,
}
overlay!(ReduceArgs {
    dataset,
    r,
    c,
    scaling,
    evolution
});

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SweepArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub r: Option<usize>,
    /// Comma-separated resonant parameters.
    #[arg(long, value_delimiter = ',')]
    pub c_grid: Option<Vec<f64>>,
}
overlay!(SweepArgs { dataset, r, c_grid });

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct QsvmArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Feature source; `qrdr` when `--r` is given, `raw` otherwise.
    #[arg(long, value_enum)]
    pub features: Option<FeaturesArg>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub gamma_grid: Option<Vec<f64>>,
    /// Comma-separated R values for a repeated-holdout sweep.
    #[arg(long, value_delimiter = ',')]
    pub r_sweep: Option<Vec<usize>>,
    #[arg(long)]
    pub holdout_test: Option<usize>,
    #[arg(long)]
    pub holdout_repeats: Option<usize>,
}
overlay!(QsvmArgs {
    dataset,
    features,
    r,
    c,
    folds,
    gamma_grid,
    r_sweep,
    holdout_test,
    holdout_repeats
});

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct TfimGenArgs {
    #[arg(long)]
    pub n_sites: Option<usize>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub ratio_min: Option<f64>,
    #[arg(long)]
    pub ratio_max: Option<f64>,
    #[arg(long)]
    pub exclusion_low: Option<f64>,
    #[arg(long)]
    pub exclusion_high: Option<f64>,
    /// Output JSONL path; defaults to `tfim.jsonl` in the output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
}
overlay!(TfimGenArgs {
    n_sites,
    count,
    ratio_min,
    ratio_max,
    exclusion_low,
    exclusion_high,
    output
});

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct QcnnArgs {
    /// Ising JSONL file; generated from the fields below when absent.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub n_sites: Option<usize>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub data_seed: Option<u64>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub test_count: Option<usize>,
    /// Number of training seeds, counted up from `--seed`.
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long, value_enum)]
    pub gradient: Option<GradientArg>,
    #[arg(long)]
    pub fd_step: Option<f64>,
    /// Comma-separated subset of qcnn+qrdr, qcnn, mlp+dr, mlp.
    #[arg(long, value_delimiter = ',')]
    pub arms: Option<Vec<String>>,
}
overlay!(QcnnArgs {
    dataset,
    n_sites,
    count,
    data_seed,
    r,
    c,
    test_count,
    seeds,
    epochs,
    batch_size,
    learning_rate,
    layers,
    gradient,
    fd_step,
    arms
});

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct VerifyArgs {}

impl VerifyArgs {
    pub fn overlay(self, _over: Self) -> Self {
        self
    }
}

/// Contents of a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub reduce: Option<ReduceArgs>,
    pub sweep_c: Option<SweepArgs>,
    pub qsvm: Option<QsvmArgs>,
    pub tfim_gen: Option<TfimGenArgs>,
    pub qcnn_train: Option<QcnnArgs>,
    pub verify: Option<VerifyArgs>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::validation("config", format!("cannot read {}: {e}", path.display()))
        })?;
        toml::from_str(&text)
            .map_err(|e| CliError::validation("config", format!("{}: {e}", path.display())))
    }
}

/// Fully resolved, validated settings of one run. Serialized verbatim as the
/// config echo of the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,
    #[serde(flatten)]
    pub command: CommandConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum CommandConfig {
    Reduce(ReduceConfig),
    SweepC(SweepConfig),
    Qsvm(QsvmConfig),
    TfimGen(TfimGenConfig),
    QcnnTrain(QcnnConfig),
    Verify(VerifyConfig),
}

impl CommandConfig {
    pub fn name(&self) -> &'static str {
        match self {
            CommandConfig::Reduce(_) => "reduce",
            CommandConfig::SweepC(_) => "sweep-c",
            CommandConfig::Qsvm(_) => "qsvm",
            CommandConfig::TfimGen(_) => "tfim-gen",
            CommandConfig::QcnnTrain(_) => "qcnn-train",
            CommandConfig::Verify(_) => "verify",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReduceConfig {
    pub dataset: PathBuf,
    pub r: usize,
    pub c: Option<f64>,
    pub scaling: DataScaling,
    pub evolution: EvolutionPath,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub dataset: PathBuf,
    pub r: usize,
    pub c_grid: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QsvmConfig {
    pub dataset: PathBuf,
    pub features: FeaturesArg,
    pub r: Option<usize>,
    pub c: f64,
    pub folds: usize,
    pub gamma_grid: Vec<f64>,
    pub r_sweep: Option<Vec<usize>>,
    pub holdout_test: usize,
    pub holdout_repeats: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TfimGenConfig {
    pub n_sites: usize,
    pub count: usize,
    pub ratio_range: (f64, f64),
    pub exclusion: (f64, f64),
    pub output: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QcnnConfig {
    pub dataset: Option<PathBuf>,
    pub n_sites: usize,
    pub count: usize,
    pub data_seed: u64,
    pub r: usize,
    pub c: Option<f64>,
    pub test_count: usize,
    pub seeds: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub layers: usize,
    pub gradient: GradientArg,
    pub fd_step: f64,
    pub arms: Vec<Arm>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {}

/// Also returns the thread count, which is not part of the echo: it does not
/// change any result.
pub fn resolve(cli: Cli) -> Result<(ExperimentConfig, Option<usize>), CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let seed = cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    let out = cli
        .out
        .or(file.out)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let threads = cli.threads.or(file.threads);
    if threads == Some(0) {
        return Err(CliError::validation("threads", "must be at least 1"));
    }
    let command = match cli.command {
        Command::Reduce(a) => {
            CommandConfig::Reduce(resolve_reduce(file.reduce.unwrap_or_default().overlay(a))?)
        }
        Command::SweepC(a) => {
            CommandConfig::SweepC(resolve_sweep(file.sweep_c.unwrap_or_default().overlay(a))?)
        }
        Command::Qsvm(a) => {
            CommandConfig::Qsvm(resolve_qsvm(file.qsvm.unwrap_or_default().overlay(a))?)
        }
        Command::TfimGen(a) => CommandConfig::TfimGen(resolve_tfim(
            file.tfim_gen.unwrap_or_default().overlay(a),
            &out,
        )?),
        Command::QcnnTrain(a) => CommandConfig::QcnnTrain(resolve_qcnn(
            file.qcnn_train.unwrap_or_default().overlay(a),
        )?),
        Command::Verify(a) => {
            file.verify.unwrap_or_default().overlay(a);
            CommandConfig::Verify(VerifyConfig {})
        }
    };
    Ok((ExperimentConfig { seed, out, command }, threads))
}

fn existing(field: &'static str, path: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let path = path.ok_or_else(|| CliError::validation(field, "is required"))?;
    if !path.is_file() {
        return Err(CliError::validation(
            field,
            format!("{} does not exist", path.display()),
        ));
    }
    Ok(path)
}

fn positive(field: &'static str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::validation(
            field,
            format!("must be a positive finite number, got {v}"),
        ))
    }
}

fn at_least(field: &'static str, v: usize, min: usize) -> Result<usize, CliError> {
    if v >= min {
        Ok(v)
    } else {
        Err(CliError::validation(
            field,
            format!("must be at least {min}, got {v}"),
        ))
    }
}

fn resolve_reduce(a: ReduceArgs) -> Result<ReduceConfig, CliError> {
    let r = at_least(
        "r",
        a.r.ok_or_else(|| CliError::validation("r", "is required"))?,
        1,
    )?;
    let c = a.c.map(|c| positive("c", c)).transpose()?;
    Ok(ReduceConfig {
        dataset: existing("dataset", a.dataset)?,
        r,
        c,
        scaling: match a.scaling.unwrap_or(ScalingArg::Raw) {
            ScalingArg::Raw => DataScaling::Raw,
            ScalingArg::UnitTop => DataScaling::UnitTopEigenvalue,
        },
        evolution: match a.evolution.unwrap_or(EvolutionArg::Blockwise) {
            EvolutionArg::Blockwise => EvolutionPath::Blockwise,
            EvolutionArg::Dense => EvolutionPath::Dense,
        },
    })
}

fn resolve_sweep(a: SweepArgs) -> Result<SweepConfig, CliError> {
    let r = at_least(
        "r",
        a.r.ok_or_else(|| CliError::validation("r", "is required"))?,
        1,
    )?;
    let c_grid = a.c_grid.unwrap_or_else(|| DEFAULT_C_GRID.to_vec());
    if c_grid.is_empty() {
        return Err(CliError::validation("c-grid", "is empty"));
    }
    for &c in &c_grid {
        positive("c-grid", c)?;
    }
    Ok(SweepConfig {
        dataset: existing("dataset", a.dataset)?,
        r,
        c_grid,
    })
}

fn resolve_qsvm(a: QsvmArgs) -> Result<QsvmConfig, CliError> {
    let r = a.r.map(|r| at_least("r", r, 1)).transpose()?;
    let features = a.features.unwrap_or(if r.is_some() {
        FeaturesArg::Qrdr
    } else {
        FeaturesArg::Raw
    });
    if features != FeaturesArg::Raw && r.is_none() {
        return Err(CliError::validation(
            "r",
            "is required for reduced features",
        ));
    }
    let gamma_grid = a.gamma_grid.unwrap_or_else(|| DEFAULT_GAMMA_GRID.to_vec());
    if gamma_grid.is_empty() {
        return Err(CliError::validation("gamma-grid", "is empty"));
    }
    for &g in &gamma_grid {
        positive("gamma-grid", g)?;
    }
    if let Some(values) = &a.r_sweep {
        if values.is_empty() {
            return Err(CliError::validation("r-sweep", "is empty"));
        }
    }
    Ok(QsvmConfig {
        dataset: existing("dataset", a.dataset)?,
        features,
        r,
        c: positive("c", a.c.unwrap_or(0.004))?,
        folds: at_least("folds", a.folds.unwrap_or(8), 2)?,
        gamma_grid,
        r_sweep: a.r_sweep,
        holdout_test: at_least("holdout-test", a.holdout_test.unwrap_or(20), 1)?,
        holdout_repeats: at_least("holdout-repeats", a.holdout_repeats.unwrap_or(8), 1)?,
    })
}

fn resolve_tfim(a: TfimGenArgs, out: &Path) -> Result<TfimGenConfig, CliError> {
    let n_sites = a.n_sites.unwrap_or(8);
    if !(2..=16).contains(&n_sites) {
        return Err(CliError::validation(
            "n-sites",
            format!("must lie in 2..=16, got {n_sites}"),
        ));
    }
    let count = at_least("count", a.count.unwrap_or(200), 2)?;
    if count % 2 != 0 {
        return Err(CliError::validation(
            "count",
            "must be even (balanced classes)",
        ));
    }
    let ratio_range = (a.ratio_min.unwrap_or(0.2), a.ratio_max.unwrap_or(1.8));
    let exclusion = (
        a.exclusion_low.unwrap_or(0.95),
        a.exclusion_high.unwrap_or(1.05),
    );
    if !(ratio_range.0 >= 0.0 && ratio_range.0 < exclusion.0 && exclusion.0 <= 1.0) {
        return Err(CliError::validation(
            "ratio-min",
            "need 0 <= ratio-min < exclusion-low <= 1",
        ));
    }
    if !(1.0 <= exclusion.1 && exclusion.1 < ratio_range.1 && ratio_range.1.is_finite()) {
        return Err(CliError::validation(
            "ratio-max",
            "need 1 <= exclusion-high < ratio-max",
        ));
    }
    Ok(TfimGenConfig {
        n_sites,
        count,
        ratio_range,
        exclusion,
        output: a.output.unwrap_or_else(|| out.join("tfim.jsonl")),
    })
}

fn resolve_qcnn(a: QcnnArgs) -> Result<QcnnConfig, CliError> {
    let dataset = match a.dataset {
        Some(p) => Some(existing("dataset", Some(p))?),
        None => None,
    };
    let n_sites = a.n_sites.unwrap_or(8);
    if !(2..=16).contains(&n_sites) {
        return Err(CliError::validation(
            "n-sites",
            format!("must lie in 2..=16, got {n_sites}"),
        ));
    }
    let count = at_least("count", a.count.unwrap_or(200), 2)?;
    let test_count = at_least("test-count", a.test_count.unwrap_or(40), 1)?;
    if dataset.is_none() && test_count >= count {
        return Err(CliError::validation(
            "test-count",
            "must be smaller than count",
        ));
    }
    let arms = match a.arms {
        None => Arm::ALL.to_vec(),
        Some(names) => names
            .iter()
            .map(|n| {
                Arm::parse(n.trim())
                    .map_err(|_| CliError::validation("arms", format!("unknown arm {n:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?,
    };
    if arms.is_empty() {
        return Err(CliError::validation("arms", "is empty"));
    }
    Ok(QcnnConfig {
        dataset,
        n_sites,
        count,
        data_seed: a.data_seed.unwrap_or(DEFAULT_SEED),
        r: at_least("r", a.r.unwrap_or(16), 1)?,
        c: a.c.map(|c| positive("c", c)).transpose()?,
        test_count,
        seeds: at_least("seeds", a.seeds.unwrap_or(5), 1)?,
        epochs: at_least("epochs", a.epochs.unwrap_or(20), 1)?,
        batch_size: at_least("batch-size", a.batch_size.unwrap_or(20), 1)?,
        learning_rate: positive("learning-rate", a.learning_rate.unwrap_or(0.01))?,
        layers: at_least("layers", a.layers.unwrap_or(1), 1)?,
        gradient: a.gradient.unwrap_or(GradientArg::FiniteDifference),
        fd_step: positive("fd-step", a.fd_step.unwrap_or(1e-5))?,
        arms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<ExperimentConfig, CliError> {
        let cli = Cli::try_parse_from(std::iter::once("qrdr").chain(args.iter().copied())).unwrap();
        resolve(cli).map(|(c, _)| c)
    }

    fn sonar_path() -> String {
        format!("{}/../../data/sonar.all-data", env!("CARGO_MANIFEST_DIR"))
    }

    #[test]
    fn reduce_happy_path() {
        let cfg = parse(&[
            "reduce",
            "--dataset",
            &sonar_path(),
            "--r",
            "16",
            "--c",
            "0.004",
        ])
        .unwrap();
        assert_eq!(cfg.seed, 7);
        let CommandConfig::Reduce(r) = cfg.command else {
            panic!()
        };
        assert_eq!((r.r, r.c), (16, Some(0.004)));
    }

    #[test]
    fn zero_r_names_the_field() {
        let err = parse(&["reduce", "--dataset", &sonar_path(), "--r", "0"]).unwrap_err();
        assert!(
            matches!(&err, CliError::Validation { field, .. } if field == "r"),
            "{err}"
        );
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn missing_dataset_names_the_field() {
        let err = parse(&["sweep-c", "--dataset", "/nonexistent.csv", "--r", "4"]).unwrap_err();
        assert!(matches!(&err, CliError::Validation { field, .. } if field == "dataset"));
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(
            &path,
            format!(
                "seed = 3\n[qsvm]\ndataset = {:?}\nr = 8\nfolds = 4\n",
                sonar_path()
            ),
        )
        .unwrap();
        let cfg = parse(&["qsvm", "--config", path.to_str().unwrap(), "--folds", "8"]).unwrap();
        assert_eq!(cfg.seed, 3);
        let CommandConfig::Qsvm(q) = cfg.command else {
            panic!()
        };
        assert_eq!((q.r, q.folds, q.features), (Some(8), 8, FeaturesArg::Qrdr));
    }

    #[test]
    fn unknown_file_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(&path, "[reduce]\nbogus = 1\n").unwrap();
        let err = parse(&["reduce", "--config", path.to_str().unwrap()]).unwrap_err();
        assert!(matches!(&err, CliError::Validation { field, .. } if field == "config"));
    }

    #[test]
    fn echo_round_trips() {
        let cfg = parse(&["qcnn-train", "--arms", "qcnn,mlp", "--epochs", "3"]).unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"command\":\"qcnn-train\""));
        assert_eq!(
            serde_json::from_str::<ExperimentConfig>(&json).unwrap(),
            cfg
        );
    }
}
