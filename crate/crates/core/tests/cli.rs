use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pyrosort::experiment::RunManifest;
use pyrosort::model::{read_checkpoint_header, Classifier, ModelConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pyrosort"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    let out = bin().current_dir(dir).args(args).output().unwrap();
    if std::env::var_os("PYROSORT_TEST_ECHO").is_some() {
        eprintln!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const CONFIG: &str = r#"{
  "name": "cli",
  "dataset": {"synthetic": {"counts": {"metal_piece": 10, "battery": 10, "pcb": 10, "glass": 10}, "image_size": 96, "seed": 4}},
  "split_seed": 3,
  "model": {"backbone": "vgg_mini", "input_size": 32, "weights_path": "vgg_mini.safetensors"},
  "training": {"max_epochs": 2, "patience": 1, "batch_size": 8, "seed": 2},
  "preset": "scratch"
}
"#;

fn workspace(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), config).unwrap();
    let donor = Classifier::random(
        &ModelConfig {
            backbone: "vgg_mini".into(),
            pretrained: false,
            num_classes: 4,
            input_size: 32,
            weights_path: None,
        },
        77,
    )
    .unwrap();
    std::fs::write(dir.path().join("vgg_mini.safetensors"), donor.weights_bytes().unwrap()).unwrap();
    dir
}

fn read_run(dir: &Path, run_id: &str) -> (RunManifest, PathBuf) {
    let run_dir = dir.join("out/runs").join(run_id);
    let m = serde_json::from_slice(&std::fs::read(run_dir.join("run.json")).unwrap()).unwrap();
    (m, run_dir)
}

#[test]
fn build_dataset_refuses_rerun_without_force() {
    let ws = workspace(CONFIG);
    let first = run(ws.path(), &["--config", "cfg.json", "build-dataset"]);
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    assert!(stdout(&first).contains("Training"));
    assert!(stdout(&first).contains("Total                  10           10           10           10      40"));

    let again = run(ws.path(), &["--config", "cfg.json", "build-dataset"]);
    assert_eq!(code(&again), 2);
    assert!(stderr(&again).contains("already exists"));
    let forced = run(ws.path(), &["--config", "cfg.json", "--force", "build-dataset"]);
    assert_eq!(code(&forced), 0, "{}", stderr(&forced));
}

#[test]
fn empty_annotation_file_writes_nothing() {
    let ws = workspace(r#"{"name": "e", "dataset": {"annotation_file": "ann.json"}}"#);
    std::fs::write(ws.path().join("ann.json"), r#"{"images": []}"#).unwrap();
    let o = run(ws.path(), &["--config", "cfg.json", "build-dataset"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(!ws.path().join("out/dataset").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let ws = workspace(r#"{"name": "bad", "dataset": {}, "training": {"patience": 200}}"#);
    let o = run(ws.path(), &["--config", "cfg.json", "train"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let o = run(ws.path(), &["train"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--config"));
}

#[test]
fn non_finite_loss_exits_with_four() {
    let cfg = CONFIG.replace(r#""preset": "scratch""#, r#""preset": "four_class""#);
    let ws = workspace(&cfg);
    let poisoned = Classifier::random(
        &ModelConfig {
            backbone: "vgg_mini".into(),
            pretrained: false,
            num_classes: 4,
            input_size: 32,
            weights_path: None,
        },
        1,
    )
    .unwrap();
    let (_, w) = poisoned.named_vars().into_iter().find(|(n, _)| n == "classifier.0.weight").unwrap();
    // hidden units overflow to inf and the mixed-sign head turns them into NaN
    w.set(&w.as_tensor().affine(0.0, 1e38).unwrap()).unwrap();
    std::fs::write(ws.path().join("vgg_mini.safetensors"), poisoned.weights_bytes().unwrap()).unwrap();

    let o = run(ws.path(), &["--config", "cfg.json", "train"]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(stderr(&o).contains("non-finite loss at epoch 1"), "{}", stderr(&o));
}

#[test]
fn train_then_evaluate() {
    let ws = workspace(CONFIG);
    let o = run(ws.path(), &["--config", "cfg.json", "train"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (m, run_dir) = read_run(ws.path(), "cli-scratch");
    assert_eq!(m.config_snapshot.as_bytes(), CONFIG.as_bytes());
    assert_eq!(std::fs::read(run_dir.join("config.json")).unwrap(), CONFIG.as_bytes());
    assert!(!m.resolved_config.model.pretrained);
    for a in m.artifacts.all() {
        assert!(run_dir.join(a).is_file(), "{}", a.display());
    }
    let csv = std::fs::read_to_string(run_dir.join("history.csv")).unwrap();
    assert!(csv.starts_with("epoch,train_loss,train_accuracy,val_loss,val_accuracy\n"));
    assert!(m.stopped_epoch <= 2 && m.best_epoch >= 1);

    let again = run(ws.path(), &["--config", "cfg.json", "train"]);
    assert_eq!(code(&again), 2);

    let totals = |split: &str| {
        let o = run(ws.path(), &["--config", "cfg.json", "evaluate", "--split", split]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(stdout(&o).contains("actual\\pred"));
        assert!(stdout(&o).contains("battery stream"));
        let path = ws.path().join(format!("out/evaluations/cli-scratch_{split}_report.json"));
        let r: pyrosort::metrics::EvaluationReport = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
        assert!(ws.path().join(format!("out/evaluations/cli-scratch_{split}_flow.json")).is_file());
        r.confusion.iter().flatten().sum::<u64>()
    };
    assert_eq!(totals("val"), 8);
    assert_eq!(totals("test"), 4);
}

#[test]
fn binary_preset_writes_two_class_checkpoint() {
    let cfg = CONFIG.replace(r#""preset": "scratch""#, r#""preset": "binary""#);
    let ws = workspace(&cfg);
    let o = run(ws.path(), &["--config", "cfg.json", "--seed", "9", "train"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (m, run_dir) = read_run(ws.path(), "cli-binary");
    assert_eq!(m.seed_override, Some(9));
    assert_eq!(m.resolved_config.training.seed, 9);
    let header = read_checkpoint_header(&run_dir.join("best.ckpt")).unwrap();
    assert_eq!(header.model_config.num_classes, 2);
    assert!(header.model_config.pretrained);
    assert_eq!(header.classes, ["battery", "other"]);
}

#[test]
fn ablation_writes_three_runs_and_comparison() {
    let ws = workspace(CONFIG);
    let o = run(ws.path(), &["--config", "cfg.json", "ablate"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for id in ["cli-four_class", "cli-scratch", "cli-binary"] {
        assert!(ws.path().join("out/runs").join(id).join("run.json").is_file(), "{id}");
    }
    let c: pyrosort::experiment::AblationComparison =
        serde_json::from_slice(&std::fs::read(ws.path().join("out/ablation/comparison.json")).unwrap()).unwrap();
    assert!(c.complete);
    assert_eq!(c.runs.len(), 3);
    assert_eq!(c.deltas.len(), 2);
    let binary = c.deltas.iter().find(|d| d.preset == pyrosort::experiment::Preset::Binary).unwrap();
    assert_eq!(binary.delta.classes, ["battery", "other"]);
    let summary = std::fs::read_to_string(ws.path().join("out/ablation/summary.txt")).unwrap();
    assert!(summary.contains("scratch vs four_class"));
}

#[test]
fn ablation_failure_leaves_partial_results() {
    let cfg = CONFIG.replace("vgg_mini.safetensors", "missing.safetensors");
    let ws = workspace(&cfg);
    let o = run(ws.path(), &["--config", "cfg.json", "ablate"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("missing.safetensors"));
    let c: pyrosort::experiment::AblationComparison =
        serde_json::from_slice(&std::fs::read(ws.path().join("out/ablation/comparison.json")).unwrap()).unwrap();
    assert!(!c.complete);
    let status: Vec<_> = c.runs.iter().map(|r| r.status.as_str()).collect();
    assert_eq!(status, ["failed", "ok", "failed"]);
}

const TABLE_II: &str = r#"{"classes": ["metal_piece", "battery", "pcb", "glass"],
  "counts": [[13, 2, 6, 0], [0, 28, 2, 0], [5, 1, 17, 1], [4, 0, 2, 30]]}"#;

#[test]
fn flow_from_confusion_json() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("t2.json"), TABLE_II).unwrap();
    std::fs::write(dir.path().join("t5.json"), r#"{"classes": ["battery", "other"], "counts": [[26, 4], [0, 81]]}"#).unwrap();
    std::fs::write(dir.path().join("diag.json"), r#"{"classes": ["battery", "other"], "counts": [[5, 0], [0, 7]]}"#).unwrap();

    let o = run(dir.path(), &["--out", "o2", "flow", "--confusion", "t2.json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("purity 90.32%, recovery 93.33%"), "{}", stdout(&o));
    let r: pyrosort::metrics::MaterialFlowReport =
        serde_json::from_slice(&std::fs::read(dir.path().join("o2/flow/battery_flow.json")).unwrap()).unwrap();
    assert_eq!(r.stream_total(), 31);

    let o = run(dir.path(), &["--out", "o5", "flow", "--confusion", "t5.json"]);
    assert!(stdout(&o).contains("purity 100.00%"), "{}", stdout(&o));

    let o = run(dir.path(), &["--out", "od", "flow", "--confusion", "diag.json"]);
    assert!(stdout(&o).contains("no contaminants"));

    let o = run(dir.path(), &["--out", "ox", "flow", "--confusion", "t2.json", "--target", "plastic"]);
    assert_eq!(code(&o), 2);
    for c in ["metal_piece", "battery", "pcb", "glass"] {
        assert!(stderr(&o).contains(c));
    }
}

#[test]
fn plot_from_history() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("epoch,train_loss,train_accuracy,val_loss,val_accuracy\n");
    for e in 1..=20 {
        csv += &format!("{e},{},{},{},{}\n", 1.0 / e as f64, 0.5 + 0.02 * e as f64, 1.2 / e as f64, 0.45 + 0.02 * e as f64);
    }
    std::fs::create_dir_all(dir.path().join("r1")).unwrap();
    std::fs::write(dir.path().join("r1/history.csv"), &csv).unwrap();
    let o = run(dir.path(), &["plot", "--history", "r1/history.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let acc = dir.path().join("out/plots/r1_accuracy.png");
    let first = std::fs::read(&acc).unwrap();
    assert!(dir.path().join("out/plots/r1_loss.png").is_file());
    run(dir.path(), &["plot", "--history", "r1/history.csv"]);
    assert_eq!(std::fs::read(&acc).unwrap(), first);

    std::fs::write(dir.path().join("bad.csv"), "epoch,train_loss,train_accuracy,val_loss,val_accuracy\n1,0.1,0.2,0.3,0.4\n2,x,0.2,0.3,0.4\n").unwrap();
    let o = run(dir.path(), &["plot", "--history", "bad.csv", "--run-id", "bad"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("row 2"), "{}", stderr(&o));
}
