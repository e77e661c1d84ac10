//! Dispatch from a resolved config to the library pipelines.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use qrdr::dataset::{kfold_split, load_sonar};
use qrdr::qcnn::experiment::{run_phase_experiment, PhaseExperimentConfig};
use qrdr::qcnn::{GradientMethod, TrainConfig};
use qrdr::qrdr::{run_qrdr_with, QrdrConfig};
use qrdr::qsvm::{
    cross_validate, r_sweep, r_sweep_csv, reduce_features, FeatureSource, HoldoutSpec,
};
use qrdr::resonance::sweep_c;
use qrdr::tfim::{generate_dataset, read_jsonl, write_jsonl, TfimDataset};
use qrdr::LabeledDataset;

use crate::config::{
    CommandConfig, ExperimentConfig, FeaturesArg, GradientArg, QcnnConfig, QsvmConfig,
    ReduceConfig, SweepConfig, TfimGenConfig,
};
use crate::error::CliError;
use crate::report::{write_text, Metrics, ReportRecord};
use crate::verify::run_checks;

/// Executes the configured pipeline, writes its side files and returns the report.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ReportRecord, CliError> {
    let out = cfg.out.as_path();
    let (metrics, artifacts) = match &cfg.command {
        CommandConfig::Reduce(c) => reduce(c, out)?,
        CommandConfig::SweepC(c) => sweep(c, out)?,
        CommandConfig::Qsvm(c) => qsvm(c, cfg.seed, out)?,
        CommandConfig::TfimGen(c) => tfim_gen(c, cfg.seed)?,
        CommandConfig::QcnnTrain(c) => qcnn_train(c, cfg.seed, out)?,
        CommandConfig::Verify(_) => verify(),
    };
    Ok(ReportRecord::new(cfg.clone(), metrics, artifacts))
}

fn is_jsonl(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "jsonl")
}

fn load_labeled(path: &Path) -> Result<LabeledDataset, CliError> {
    if is_jsonl(path) {
        let ds: TfimDataset<f64> = read_jsonl(path).map_err(CliError::at("loading dataset"))?;
        LabeledDataset::new(ds.matrix(), ds.labels()).map_err(CliError::at("loading dataset"))
    } else {
        load_sonar(path).map_err(CliError::at("loading dataset"))
    }
}

fn num(v: f64) -> Value {
    json!(v)
}

fn reduce(c: &ReduceConfig, out: &Path) -> Result<(Metrics, Vec<PathBuf>), CliError> {
    let ds = load_labeled(&c.dataset)?;
    let mut qcfg = QrdrConfig::new(c.r, c.c.unwrap_or(0.0));
    qcfg.scaling = c.scaling;
    qcfg.path = c.evolution;
    if c.c.is_none() {
        let probe = qrdr::qrdr::delta_min_for(
            &qrdr::pca::fit_pca(ds.x.view(), c.r).map_err(CliError::at("pca"))?,
            &qrdr::qrdr::RegisterLayout::for_problem(ds.features(), c.r, ds.len())
                .map_err(CliError::at("layout"))?,
        );
        qcfg.c = probe / 100.0;
    }
    let res = run_qrdr_with(ds.x.view(), &qcfg).map_err(CliError::at("qrdr"))?;
    let rec = res.record();
    let feats = res.reduced_features(ds.x.view());
    let path = out.join("reduce-features.csv");
    let reduced = ds
        .with_features(feats)
        .map_err(CliError::at("writing features"))?;
    write_text(&path, &reduced.to_csv_string())?;
    let mut m = Metrics::new();
    m.insert("samples".into(), json!(ds.len()));
    m.insert("features".into(), json!(ds.features()));
    m.insert("R".into(), json!(rec.r_target));
    m.insert("register_qubits".into(), json!(rec.r));
    m.insert("c".into(), num(rec.c));
    m.insert("t".into(), num(rec.t));
    m.insert("success_probability".into(), num(rec.success_probability));
    m.insert("epsilon".into(), num(rec.epsilon));
    m.insert("delta_min".into(), num(rec.delta_min));
    m.insert("variance_fraction".into(), num(rec.variance_fraction));
    m.insert("data_register_weight".into(), num(res.data_register_weight));
    m.insert("warnings".into(), json!(res.warnings));
    Ok((m, vec![path]))
}

fn sweep(c: &SweepConfig, out: &Path) -> Result<(Metrics, Vec<PathBuf>), CliError> {
    let ds = load_labeled(&c.dataset)?;
    let res = sweep_c(ds.x.view(), c.r, &c.c_grid).map_err(CliError::at("sweep-c"))?;
    let path = out.join(format!("sweep-c-R{}.csv", c.r));
    write_text(&path, &res.to_csv())?;
    let mut m = Metrics::new();
    m.insert("R".into(), json!(c.r));
    m.insert("points".into(), json!(res.points.len()));
    m.insert(
        "skipped".into(),
        json!(res.skipped.iter().map(|s| s.c).collect::<Vec<_>>()),
    );
    m.insert("correlation".into(), json!(res.fit.map(|f| f.correlation)));
    m.insert("fit_slope".into(), json!(res.fit.map(|f| f.slope)));
    m.insert("fit_intercept".into(), json!(res.fit.map(|f| f.intercept)));
    m.insert("epsilon_slope".into(), json!(res.epsilon_slope));
    m.insert("degenerate_fit".into(), json!(res.degenerate_fit));
    m.insert("delta_min".into(), num(res.delta_min));
    Ok((m, vec![path]))
}

fn qsvm(c: &QsvmConfig, seed: u64, out: &Path) -> Result<(Metrics, Vec<PathBuf>), CliError> {
    let ds = load_labeled(&c.dataset)?;
    let source = match (c.features, c.r) {
        (FeaturesArg::Raw, _) | (_, None) => FeatureSource::Raw,
        (FeaturesArg::Pca, Some(r)) => FeatureSource::Pca { r },
        (FeaturesArg::Qrdr, Some(r)) => FeatureSource::Qrdr { r, c: c.c },
    };
    let feats = reduce_features(ds.x.view(), source).map_err(CliError::at("feature reduction"))?;
    let reduced = ds
        .with_features(feats)
        .map_err(CliError::at("feature reduction"))?;
    let plan = kfold_split(&reduced, c.folds, seed).map_err(CliError::at("fold split"))?;
    let mut rep =
        cross_validate(&reduced, &plan, &c.gamma_grid).map_err(CliError::at("cross-validation"))?;
    rep.r = c.r.filter(|_| source != FeatureSource::Raw);
    let mut m = Metrics::new();
    m.insert("source".into(), json!(source));
    m.insert("folds".into(), json!(c.folds));
    m.insert("mean_accuracy".into(), num(rep.mean));
    m.insert("min_accuracy".into(), num(rep.min));
    m.insert("max_accuracy".into(), num(rep.max));
    m.insert("per_fold_accuracies".into(), json!(rep.per_fold_accuracies));
    m.insert("chosen_gammas".into(), json!(rep.chosen_gammas));
    m.insert("single_class_folds".into(), json!(rep.single_class_folds));
    let mut artifacts = Vec::new();
    if let Some(values) = &c.r_sweep {
        let holdout = HoldoutSpec {
            test_count: c.holdout_test,
            repeats: c.holdout_repeats,
            seed,
        };
        let reports =
            r_sweep(&ds, values, holdout, &c.gamma_grid).map_err(CliError::at("r-sweep"))?;
        let path = out.join("qsvm-r-sweep.csv");
        write_text(&path, &r_sweep_csv(&reports))?;
        artifacts.push(path);
        let rows: Vec<Value> = reports
            .iter()
            .map(|r| json!({"R": r.r, "mean": r.mean, "min": r.min, "max": r.max}))
            .collect();
        m.insert("r_sweep".into(), Value::Array(rows));
    }
    Ok((m, artifacts))
}

fn tfim_gen(c: &TfimGenConfig, seed: u64) -> Result<(Metrics, Vec<PathBuf>), CliError> {
    let ds: TfimDataset<f64> =
        generate_dataset(c.n_sites, c.count, c.ratio_range, c.exclusion, seed)
            .map_err(CliError::at("tfim generation"))?;
    if let Some(dir) = c.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Output {
            path: dir.display().to_string(),
            source,
        })?;
    }
    write_jsonl(&ds, &c.output).map_err(CliError::at("writing dataset"))?;
    let positives = ds.samples.iter().filter(|s| s.label > 0).count();
    let min_gap = ds
        .samples
        .iter()
        .map(|s| s.gap)
        .fold(f64::INFINITY, f64::min);
    let mut m = Metrics::new();
    m.insert("count".into(), json!(ds.samples.len()));
    m.insert("n_sites".into(), json!(c.n_sites));
    m.insert("paramagnetic".into(), json!(positives));
    m.insert("ferromagnetic".into(), json!(ds.samples.len() - positives));
    m.insert("min_gap".into(), num(min_gap));
    m.insert(
        "near_degenerate".into(),
        json!(ds.samples.iter().filter(|s| s.is_near_degenerate()).count()),
    );
    Ok((m, vec![c.output.clone()]))
}

fn qcnn_train(c: &QcnnConfig, seed: u64, out: &Path) -> Result<(Metrics, Vec<PathBuf>), CliError> {
    let ds: TfimDataset<f64> = match &c.dataset {
        Some(p) => read_jsonl(p).map_err(CliError::at("loading dataset"))?,
        None => generate_dataset(c.n_sites, c.count, (0.2, 1.8), (0.95, 1.05), c.data_seed)
            .map_err(CliError::at("tfim generation"))?,
    };
    let gradient = match c.gradient {
        GradientArg::FiniteDifference => GradientMethod::FiniteDifference { step: c.fd_step },
        GradientArg::ParameterShift => GradientMethod::Analytic,
    };
    let pcfg = PhaseExperimentConfig {
        r_target: c.r,
        c: c.c,
        test_count: c.test_count,
        seeds: (0..c.seeds as u64).map(|i| seed.wrapping_add(i)).collect(),
        arms: c.arms.clone(),
        qcnn_layers: c.layers,
        train: TrainConfig {
            epochs: c.epochs,
            batch_size: c.batch_size,
            learning_rate: c.learning_rate,
            seed,
            gradient,
        },
        ..PhaseExperimentConfig::default()
    };
    let rep = run_phase_experiment(&ds, &pcfg).map_err(CliError::at("qcnn training"))?;
    let history = out.join("qcnn-history.csv");
    write_text(&history, &rep.history_csv())?;
    let checkpoints = out.join("qcnn-checkpoints.json");
    let ckpt: Vec<Value> = rep
        .runs
        .iter()
        .map(|r| json!({"arm": r.arm, "seed": r.seed, "parameters": r.parameters}))
        .collect();
    write_text(
        &checkpoints,
        &serde_json::to_string(&ckpt).expect("checkpoints serialize"),
    )?;
    let mut m = Metrics::new();
    m.insert("qrdr".into(), json!(rep.qrdr));
    for s in &rep.summaries {
        m.insert(
            format!("{}", s.arm.name()),
            json!({
                "runs": s.runs,
                "mean_final_train_acc": s.mean_final_train_acc,
                "mean_final_test_acc": s.mean_final_test_acc,
                "mean_final_test_loss": s.mean_final_test_loss,
            }),
        );
    }
    Ok((m, vec![history, checkpoints]))
}

fn verify() -> (Metrics, Vec<PathBuf>) {
    let checks = run_checks();
    let mut m = Metrics::new();
    let all = checks.iter().all(|c| c.passed);
    for c in &checks {
        m.insert(
            c.name.to_string(),
            json!({"passed": c.passed, "detail": c.detail}),
        );
    }
    m.insert("all_passed".into(), json!(all));
    (m, vec![])
}
