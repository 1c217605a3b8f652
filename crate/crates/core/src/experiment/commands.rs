use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Preset};
use crate::annotations::{parse_annotation_file, ComponentClass};
use crate::dataset::{
    build_dataset, generate_synthetic_dataset, read_manifest, DatasetManifest, FsImageLoader, Split, MANIFEST_FILE,
};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::labels::LabelScheme;
use crate::metrics::{
    compare_reports, default_severity_map, material_flow, ConfusionMatrix, EvaluationReport, MaterialFlowReport,
    ReportDelta,
};
use crate::model::{
    build_classifier, evaluate_images, load_checkpoint, load_split, train, write_history_csv, CheckpointHeader,
    TrainingData,
};
use crate::plot::plot_history;

pub const DATASET_DIR: &str = "dataset";
pub const RUNS_DIR: &str = "runs";
pub const ABLATION_DIR: &str = "ablation";
pub const EVALUATIONS_DIR: &str = "evaluations";
pub const FLOW_DIR: &str = "flow";
pub const PLOTS_DIR: &str = "plots";
pub const DEFAULT_TARGET: &str = "battery";

/// Settings shared by every command.
#[derive(Debug, Clone)]
pub struct Context {
    /// Parsed config and its raw bytes.
    pub config: Option<(ExperimentConfig, Vec<u8>)>,
    pub out: PathBuf,
    /// Replaces both `split_seed` and `training.seed`.
    pub seed: Option<u64>,
    pub force: bool,
}

impl Context {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        Context {
            config: None,
            out: out.into(),
            seed: None,
            force: false,
        }
    }

    pub fn with_config_file(mut self, path: &Path) -> Result<Self> {
        self.config = Some(ExperimentConfig::load(path)?);
        Ok(self)
    }

    fn config(&self, verb: &str) -> Result<(ExperimentConfig, &[u8])> {
        let (cfg, raw) = self
            .config
            .as_ref()
            .ok_or_else(|| Error::Config(format!("`{verb}` needs --config")))?;
        let mut cfg = cfg.clone();
        if let Some(seed) = self.seed {
            cfg.split_seed = seed;
            cfg.training.seed = seed;
        }
        Ok((cfg, raw.as_slice()))
    }

    /// Clears `path` when forced, refuses when it already holds something.
    fn claim(&self, path: &Path) -> Result<()> {
        let occupied = path.is_file() || std::fs::read_dir(path).is_ok_and(|mut d| d.next().is_some());
        if !occupied {
            return Ok(());
        }
        if !self.force {
            return Err(Error::AlreadyExists(path.to_path_buf()));
        }
        let res = if path.is_dir() {
            std::fs::remove_dir_all(path)
        } else {
            std::fs::remove_file(path)
        };
        res.map_err(|e| Error::io(path, e))
    }

    fn check_free(&self, path: &Path) -> Result<()> {
        if path.exists() && !self.force {
            return Err(Error::AlreadyExists(path.to_path_buf()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BuildOutcome {
    pub manifest: DatasetManifest,
    pub manifest_path: PathBuf,
}

/// Crops and splits the configured annotation source into `<out>/dataset`.
pub fn cmd_build_dataset(ctx: &Context) -> Result<BuildOutcome> {
    let (cfg, _) = ctx.config("build-dataset")?;
    cfg.validate()?;
    let dir = ctx.out.join(DATASET_DIR);
    let (records, base) = if let Some(path) = &cfg.dataset.annotation_file {
        let parsed = parse_annotation_file(path)?;
        (Some(parsed.records), path.parent().unwrap_or(Path::new("")).to_path_buf())
    } else if cfg.dataset.synthetic.is_some() {
        (None, dir.join("raw"))
    } else {
        return Err(Error::Config("dataset.manifest_path points at an existing dataset; nothing to build".into()));
    };
    if let Some(r) = &records {
        if r.iter().all(|x| x.annotations.is_empty()) {
            return Err(Error::Schema("annotation file contains no components".into()));
        }
    }
    ctx.claim(&dir)?;
    let records = match records {
        Some(r) => r,
        None => generate_synthetic_dataset(cfg.dataset.synthetic.as_ref().unwrap(), &base)?.records,
    };
    let (manifest, manifest_path) = build_dataset(&records, &FsImageLoader::new(base), &dir, cfg.split_ratios, cfg.split_seed)?;
    Ok(BuildOutcome { manifest, manifest_path })
}

/// The configured manifest, building `<out>/dataset` first when needed.
pub fn resolve_manifest(ctx: &Context) -> Result<(DatasetManifest, PathBuf)> {
    let (cfg, _) = ctx.config("train")?;
    let path = match &cfg.dataset.manifest_path {
        Some(p) => p.clone(),
        None => {
            let p = ctx.out.join(DATASET_DIR).join(MANIFEST_FILE);
            if !p.is_file() {
                log::info!("no dataset at {}; building it", p.display());
                cmd_build_dataset(ctx)?;
            }
            p
        }
    };
    let dir = path.parent().unwrap_or(Path::new("")).to_path_buf();
    Ok((read_manifest(&path)?, dir))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentInfo {
    pub package_version: String,
    pub os: String,
    pub arch: String,
    pub backend: String,
    pub threads: usize,
}

impl EnvironmentInfo {
    pub fn current() -> Self {
        EnvironmentInfo {
            package_version: env!("CARGO_PKG_VERSION").to_string(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            backend: "candle-cpu".to_string(),
            threads: rayon::current_num_threads(),
        }
    }
}

/// Paths relative to the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifacts {
    pub config: PathBuf,
    pub checkpoint: PathBuf,
    pub history_csv: PathBuf,
    pub accuracy_plot: PathBuf,
    pub loss_plot: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_json: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow_json: Option<PathBuf>,
}

impl RunArtifacts {
    pub fn all(&self) -> Vec<&Path> {
        let mut v = vec![
            self.config.as_path(),
            self.checkpoint.as_path(),
            self.history_csv.as_path(),
            self.accuracy_plot.as_path(),
            self.loss_plot.as_path(),
        ];
        v.extend(self.report_json.as_deref());
        v.extend(self.flow_json.as_deref());
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub preset: Preset,
    /// The input config file, verbatim.
    pub config_snapshot: String,
    /// What actually ran: preset applied and seed override folded in.
    pub resolved_config: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_override: Option<u64>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub artifacts: RunArtifacts,
    pub environment: EnvironmentInfo,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_accuracy: Option<f64>,
}

pub const RUN_MANIFEST_FILE: &str = "run.json";

pub fn run_dir(out: &Path, run_id: &str) -> PathBuf {
    out.join(RUNS_DIR).join(run_id)
}

/// Trains the config under its own preset into `<out>/runs/<run_id>`.
pub fn cmd_train(ctx: &Context) -> Result<RunManifest> {
    let (cfg, _) = ctx.config("train")?;
    run_preset(ctx, cfg.preset)
}

fn run_preset(ctx: &Context, preset: Preset) -> Result<RunManifest> {
    let (cfg, raw) = ctx.config("train")?;
    let cfg = cfg.with_preset(preset);
    cfg.validate()?;
    let snapshot =
        String::from_utf8(raw.to_vec()).map_err(|_| Error::Config("config file is not valid UTF-8".into()))?;
    let run_id = cfg.run_id();
    let dir = run_dir(&ctx.out, &run_id);
    let started_at = Utc::now();

    let (manifest, dataset_dir) = resolve_manifest(ctx)?;
    let scheme = cfg.label_scheme;
    let data = TrainingData::from_manifest(&manifest, &dataset_dir, scheme, cfg.model.input_size)?;
    let model = build_classifier(&cfg.model, cfg.training.seed)?;
    ctx.claim(&dir)?;

    let (acc_name, loss_name) = crate::plot::plot_file_names(&run_id);
    let mut artifacts = RunArtifacts {
        config: "config.json".into(),
        checkpoint: "best.ckpt".into(),
        history_csv: "history.csv".into(),
        accuracy_plot: acc_name.into(),
        loss_plot: loss_name.into(),
        report_json: None,
        flow_json: None,
    };
    write_atomic(&dir.join(&artifacts.config), raw)?;
    log::info!("training {run_id}");
    let history = train(&model, &data, &cfg.augmentation, &cfg.training, &dir.join(&artifacts.checkpoint))?;
    write_history_csv(&dir.join(&artifacts.history_csv), &history.records)?;
    plot_history(&history.records, &run_id, &dir)?;

    let mut test_accuracy = None;
    if manifest.split_total(Split::Test) > 0 {
        let ckpt = dir.join(&artifacts.checkpoint);
        let (header, cm) = evaluate_checkpoint(&ckpt, &manifest, &dataset_dir, Split::Test)?;
        let report = EvaluationReport::from_confusion(&cm)?;
        let flow = material_flow(&cm, DEFAULT_TARGET, &default_severity_map())?;
        debug_assert_eq!(header.epoch, history.best_epoch);
        test_accuracy = Some(report.accuracy);
        artifacts.report_json = Some("report.json".into());
        artifacts.flow_json = Some("flow.json".into());
        write_json(&dir.join("report.json"), &report)?;
        write_json(&dir.join("flow.json"), &flow)?;
    }

    let run = RunManifest {
        run_id,
        preset,
        config_snapshot: snapshot,
        resolved_config: cfg,
        seed_override: ctx.seed,
        started_at,
        finished_at: Utc::now(),
        artifacts,
        environment: EnvironmentInfo::current(),
        best_epoch: history.best_epoch,
        stopped_epoch: history.stopped_epoch,
        test_accuracy,
    };
    for a in run.artifacts.all() {
        if !dir.join(a).is_file() {
            return Err(Error::Consistency(format!("artifact {} was not written", dir.join(a).display())));
        }
    }
    write_json(&dir.join(RUN_MANIFEST_FILE), &run)?;
    Ok(run)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Runs a checkpoint over one manifest split, in the checkpoint's label scheme.
pub fn evaluate_checkpoint(
    checkpoint: &Path,
    manifest: &DatasetManifest,
    dataset_dir: &Path,
    split: Split,
) -> Result<(CheckpointHeader, ConfusionMatrix)> {
    let (header, model) = load_checkpoint(checkpoint)?;
    let scheme = LabelScheme::from_classes(&header.classes).filter(|s| *s == header.label_scheme).ok_or_else(|| {
        Error::Consistency(format!(
            "checkpoint classes {:?} do not match its label scheme {:?}",
            header.classes, header.label_scheme
        ))
    })?;
    let mut theirs = manifest.classes.clone();
    theirs.sort();
    let mut ours = ComponentClass::ALL.to_vec();
    ours.sort();
    if theirs != ours {
        return Err(Error::Consistency(format!(
            "manifest classes {:?} cannot be mapped onto checkpoint classes {:?}",
            manifest.classes, header.classes
        )));
    }
    if manifest.split_total(split) == 0 {
        return Err(Error::Consistency(format!("the {split} split is empty")));
    }
    let data = load_split(manifest, dataset_dir, split, scheme, header.model_config.input_size)?;
    let cm = evaluate_images(&model, &data, &header.classes)?;
    Ok((header, cm))
}

#[derive(Debug, Clone)]
pub struct EvaluateOutcome {
    pub report: EvaluationReport,
    pub flow: MaterialFlowReport,
    pub report_path: PathBuf,
    pub flow_path: PathBuf,
}

/// Where `evaluate` and `flow` look when no checkpoint or manifest is given.
fn default_sources(ctx: &Context, checkpoint: Option<&Path>, manifest: Option<&Path>) -> Result<(PathBuf, DatasetManifest, PathBuf)> {
    let checkpoint = match checkpoint {
        Some(p) => p.to_path_buf(),
        None => {
            let (cfg, _) = ctx.config("evaluate")?;
            run_dir(&ctx.out, &cfg.resolved().run_id()).join("best.ckpt")
        }
    };
    let (manifest, dir) = match manifest {
        Some(p) => (read_manifest(p)?, p.parent().unwrap_or(Path::new("")).to_path_buf()),
        None => resolve_manifest(ctx)?,
    };
    Ok((checkpoint, manifest, dir))
}

pub fn cmd_evaluate(
    ctx: &Context,
    checkpoint: Option<&Path>,
    manifest: Option<&Path>,
    split: Split,
    target: &str,
) -> Result<EvaluateOutcome> {
    let (checkpoint, manifest, dataset_dir) = default_sources(ctx, checkpoint, manifest)?;
    let stem = checkpoint
        .parent()
        .and_then(|p| p.file_name())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into());
    let dir = ctx.out.join(EVALUATIONS_DIR);
    let report_path = dir.join(format!("{stem}_{split}_report.json"));
    let flow_path = dir.join(format!("{stem}_{split}_flow.json"));
    ctx.check_free(&report_path)?;
    ctx.check_free(&flow_path)?;

    let (_, cm) = evaluate_checkpoint(&checkpoint, &manifest, &dataset_dir, split)?;
    let flow = material_flow(&cm, target, &default_severity_map())?;
    let report = EvaluationReport::from_confusion(&cm)?;
    write_json(&report_path, &report)?;
    write_json(&flow_path, &flow)?;
    Ok(EvaluateOutcome {
        report,
        flow,
        report_path,
        flow_path,
    })
}

/// Material-flow report from a confusion JSON or a checkpoint evaluation.
pub fn cmd_flow(
    ctx: &Context,
    confusion: Option<&Path>,
    checkpoint: Option<&Path>,
    manifest: Option<&Path>,
    split: Split,
    target: &str,
) -> Result<(MaterialFlowReport, PathBuf)> {
    let cm = match confusion {
        Some(path) => {
            let text = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_slice::<ConfusionMatrix>(&text).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?
        }
        None => {
            let (ckpt, manifest, dir) = default_sources(ctx, checkpoint, manifest)?;
            evaluate_checkpoint(&ckpt, &manifest, &dir, split)?.1
        }
    };
    let flow = material_flow(&cm, target, &default_severity_map())?;
    let path = ctx.out.join(FLOW_DIR).join(format!("{target}_flow.json"));
    ctx.check_free(&path)?;
    write_json(&path, &flow)?;
    Ok((flow, path))
}

/// Renders `{run_id}_accuracy.png` and `{run_id}_loss.png` into `<out>/plots`.
pub fn cmd_plot(ctx: &Context, history: &Path, run_id: Option<&str>) -> Result<crate::plot::PlotPaths> {
    let records = crate::model::read_history_csv(history)?;
    let run_id = match run_id {
        Some(r) => r.to_string(),
        None => history
            .parent()
            .and_then(|p| p.file_name())
            .map(|s| s.to_string_lossy().into_owned())
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| "run".into()),
    };
    plot_history(&records, &run_id, &ctx.out.join(PLOTS_DIR))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRun {
    pub preset: Preset,
    pub run_id: String,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<EvaluationReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationDelta {
    pub preset: Preset,
    pub baseline: Preset,
    pub delta: ReportDelta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationComparison {
    pub complete: bool,
    pub runs: Vec<AblationRun>,
    pub deltas: Vec<AblationDelta>,
}

impl AblationComparison {
    pub fn render(&self) -> String {
        let pct = |v: f64| format!("{:.2}", 100.0 * v);
        let mut out = format!("{:<12} {:<10} {:>9} {:>10} {:>10}\n", "preset", "status", "accuracy", "macro P", "macro R");
        for r in &self.runs {
            let (a, p, rc) = r
                .report
                .as_ref()
                .map(|x| (pct(x.accuracy), pct(x.macro_precision), pct(x.macro_recall)))
                .unwrap_or_else(|| ("-".into(), "-".into(), "-".into()));
            out += &format!("{:<12} {:<10} {a:>9} {p:>10} {rc:>10}\n", r.preset.as_str(), r.status);
        }
        for d in &self.deltas {
            out += &format!("\n{} vs {}\n{}", d.preset.as_str(), d.baseline.as_str(), d.delta.render());
        }
        out
    }
}

pub const COMPARISON_FILE: &str = "comparison.json";

/// Runs the four_class, scratch and binary presets on one dataset and seed,
/// then compares each against four_class.
pub fn cmd_ablate(ctx: &Context, parallel: bool) -> Result<(AblationComparison, PathBuf)> {
    let (cfg, _) = ctx.config("ablate")?;
    for p in Preset::ABLATION {
        cfg.with_preset(p).validate()?;
    }
    let dir = ctx.out.join(ABLATION_DIR);
    ctx.claim(&dir)?;
    resolve_manifest(ctx)?;

    let one = |p: Preset| (p, run_preset(ctx, p));
    let results: Vec<(Preset, Result<RunManifest>)> = if parallel {
        Preset::ABLATION.par_iter().map(|&p| one(p)).collect()
    } else {
        Preset::ABLATION.iter().map(|&p| one(p)).collect()
    };

    let mut runs = Vec::new();
    let mut reports = BTreeMap::new();
    let mut first_error = None;
    for (preset, res) in results {
        let run_id = cfg.with_preset(preset).run_id();
        let run = match res {
            Ok(m) => {
                let report = match &m.artifacts.report_json {
                    Some(rel) => {
                        let bytes = std::fs::read(run_dir(&ctx.out, &run_id).join(rel)).map_err(|e| Error::io(rel, e))?;
                        Some(serde_json::from_slice::<EvaluationReport>(&bytes)?)
                    }
                    None => None,
                };
                if let Some(r) = &report {
                    reports.insert(preset.as_str(), r.clone());
                }
                AblationRun {
                    preset,
                    run_id,
                    status: "ok".into(),
                    error: None,
                    report,
                }
            }
            Err(e) => {
                let run = AblationRun {
                    preset,
                    run_id,
                    status: "failed".into(),
                    error: Some(e.to_string()),
                    report: None,
                };
                first_error.get_or_insert(e);
                run
            }
        };
        runs.push(run);
    }

    let mut deltas = Vec::new();
    if let Some(base) = reports.get(Preset::FourClass.as_str()) {
        if let Some(s) = reports.get(Preset::Scratch.as_str()) {
            deltas.push(AblationDelta {
                preset: Preset::Scratch,
                baseline: Preset::FourClass,
                delta: compare_reports(base, s, None)?,
            });
        }
        if let Some(b) = reports.get(Preset::Binary.as_str()) {
            deltas.push(AblationDelta {
                preset: Preset::Binary,
                baseline: Preset::FourClass,
                delta: compare_reports(base, b, Some(&LabelScheme::BatteryVsOther.mapping()))?,
            });
        }
    }
    let comparison = AblationComparison {
        complete: first_error.is_none(),
        runs,
        deltas,
    };
    let path = dir.join(COMPARISON_FILE);
    write_json(&path, &comparison)?;
    write_atomic(&dir.join("summary.txt"), comparison.render().as_bytes())?;
    match first_error {
        Some(e) => Err(e),
        None => Ok((comparison, path)),
    }
}
