use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use affect::error::Error;
use affect::predictions::load_predictions;

fn affect(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_affect"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = affect(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    affect(dir, args).status.code().unwrap()
}

struct Workspace {
    _tmp: tempfile::TempDir,
    dir: PathBuf,
}

fn workspace() -> Workspace {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_path_buf();
    fs::write(
        dir.join("data.cfg"),
        "num_videos = 3\nframes_per_video = 30\ndescriptor_dim = 8\nmin_segment = 8\nmax_segment = 12\n",
    )
    .unwrap();
    fs::write(
        dir.join("backbone.cfg"),
        "feature_dim = 4\nhidden_dims = 8\nfrozen_prefix_depth = 1\nepochs = 2\n",
    )
    .unwrap();
    fs::write(
        dir.join("train.cfg"),
        "model_variant = 6\nblock_size = 3\nepochs = 2\nbatch_size = 8\nlstm_hidden = 3\nhead_hidden = 6\nlearning_rate = 0.001\n",
    )
    .unwrap();
    ok(&dir, &["gen-data", "--config", "data.cfg", "--out", "train"]);
    ok(&dir, &["gen-data", "--config", "data.cfg", "--seed", "7", "--out", "val"]);
    ok(&dir, &["pretrain", "--config", "backbone.cfg", "--manifest", "train/manifest.jsonl", "--out", "bb.bin"]);
    Workspace { _tmp: tmp, dir }
}

#[test]
fn train_predict_score_matches_eval() {
    let ws = workspace();
    let d = &ws.dir;
    let log = ok(
        d,
        &[
            "train", "--config", "train.cfg", "--manifest", "train/manifest.jsonl", "--val-manifest",
            "val/manifest.jsonl", "--backbone", "bb.bin", "--out", "ck.bin",
        ],
    );
    assert_eq!(log.lines().filter(|l| l.starts_with("epoch")).count(), 2);
    assert!(log.contains("val_va"));

    let report = ok(d, &["eval", "--checkpoint", "ck.bin", "--manifest", "val/manifest.jsonl", "--out", "eval.txt"]);
    assert_eq!(fs::read_to_string(d.join("eval.txt")).unwrap(), report);
    ok(d, &["predict", "--checkpoint", "ck.bin", "--manifest", "val/manifest.jsonl", "--out", "p.csv"]);
    let preds = load_predictions(&d.join("p.csv")).unwrap();
    assert_eq!(preds.len(), 90);
    assert!(preds.with_va());

    let expr = ok(d, &["score", "p.csv", "--manifest", "val/manifest.jsonl"]);
    let va = ok(d, &["score", "p.csv", "--manifest", "val/manifest.jsonl", "--track", "va"]);
    let mut combined: Vec<&str> = expr.lines().chain(va.lines()).collect();
    let mut full: Vec<&str> = report.lines().collect();
    combined.sort();
    full.sort();
    assert_eq!(combined, full);
    assert!(report.contains("va_score = "));
    assert_eq!(expr.lines().filter(|l| l.split(',').count() == 7).count(), 7);

    ok(d, &["fuse", "p.csv", "p.csv", "p.csv", "--out", "f.csv"]);
    let fused = load_predictions(&d.join("f.csv")).unwrap();
    for ((ka, a), (kb, b)) in preds.iter().zip(fused.iter()) {
        assert_eq!(ka, kb);
        for (x, y) in a.probs.iter().zip(&b.probs) {
            assert!((x - y).abs() <= 1e-12);
        }
        let (aa, av) = a.va.unwrap();
        let (ba, bv) = b.va.unwrap();
        assert!((aa - ba).abs() <= 1e-12 && (av - bv).abs() <= 1e-12);
    }
}

#[test]
fn same_seed_same_checkpoint_bytes() {
    let ws = workspace();
    let d = &ws.dir;
    for out in ["a.bin", "b.bin"] {
        ok(
            d,
            &["train", "--config", "train.cfg", "--manifest", "train/manifest.jsonl", "--backbone", "bb.bin", "--out", out],
        );
    }
    ok(
        d,
        &[
            "train", "--config", "train.cfg", "--seed", "3", "--manifest", "train/manifest.jsonl", "--backbone",
            "bb.bin", "--out", "c.bin",
        ],
    );
    let a = fs::read(d.join("a.bin")).unwrap();
    assert_eq!(a, fs::read(d.join("b.bin")).unwrap());
    assert_ne!(a, fs::read(d.join("c.bin")).unwrap());
}

#[test]
fn ablate_prints_six_rows() {
    let ws = workspace();
    let d = &ws.dir;
    fs::write(
        d.join("ablate.cfg"),
        "block_size = 3\nepochs = 1\nbatch_size = 8\nlstm_hidden = 3\nhead_hidden = 4\n",
    )
    .unwrap();
    let table = ok(
        d,
        &[
            "ablate", "--config", "ablate.cfg", "--manifest", "train/manifest.jsonl", "--val-manifest",
            "val/manifest.jsonl", "--backbone", "bb.bin", "--out", "ablation.tsv",
        ],
    );
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 7);
    assert!(lines[0].starts_with("model\tname\taccuracy"));
    for (i, line) in lines[1..].iter().enumerate() {
        let cells: Vec<&str> = line.split('\t').collect();
        assert_eq!(cells.len(), 8);
        assert_eq!(cells[0], (i + 1).to_string());
        assert_eq!(cells[7].is_empty(), i % 2 == 0);
    }
    assert_eq!(fs::read_to_string(d.join("ablation.tsv")).unwrap(), table);
}

#[test]
fn gradcheck_reports_every_component() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(tmp.path(), &["gradcheck", "--instances", "1", "--seed", "4"]);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 19);
    assert!(rows.iter().all(|r| r.ends_with(" ok")));
    for v in 1..=6 {
        assert!(rows.iter().any(|r| r.starts_with(&format!("variant{v} "))));
    }
}

#[test]
fn exit_codes() {
    let ws = workspace();
    let d = &ws.dir;
    assert_eq!(code(d, &["--help"]), 0);
    assert_eq!(code(d, &["train"]), 1);
    assert_eq!(code(d, &["frobnicate"]), 1);
    assert_eq!(code(d, &["score", "x.csv", "--manifest", "m", "--track", "au"]), 1);
    assert_eq!(code(d, &["fuse", "only.csv", "--out", "f.csv"]), 1);
    fs::write(d.join("typo.cfg"), "epoch = 3\n").unwrap();
    assert_eq!(
        code(d, &["train", "--config", "typo.cfg", "--manifest", "train/manifest.jsonl", "--backbone", "bb.bin", "--out", "x"]),
        1
    );
    assert_eq!(
        code(d, &["train", "--manifest", "train/manifest.jsonl", "--out", "x"]),
        1
    );
    assert_eq!(code(d, &["eval", "--checkpoint", "bb.bin", "--manifest", "val/manifest.jsonl"]), 2);
    assert_eq!(code(d, &["eval", "--checkpoint", "absent.bin", "--manifest", "val/manifest.jsonl"]), 2);
    fs::write(d.join("bad.jsonl"), "{\"descriptor_dim\": 8}\n{oops\n").unwrap();
    let out = affect(d, &["pretrain", "--manifest", "bad.jsonl", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.jsonl:2"));

    let text = fs::read_to_string(d.join("train/manifest.jsonl")).unwrap();
    let stripped: String = text
        .lines()
        .skip(1)
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            v["valence"] = serde_json::Value::Null;
            v["arousal"] = serde_json::Value::Null;
            v.to_string() + "\n"
        })
        .collect();
    fs::write(d.join("train/expr.jsonl"), format!("{{\"descriptor_dim\": 8}}\n{stripped}")).unwrap();
    let out = affect(
        d,
        &["train", "--config", "train.cfg", "--manifest", "train/expr.jsonl", "--backbone", "bb.bin", "--out", "x"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("valence-arousal"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn error_categories_map_to_exit_codes() {
    assert_eq!(Error::Usage("x".into()).exit_code(), 1);
    assert_eq!(Error::Core(affect_core::Error::Config("x".into())).exit_code(), 1);
    assert_eq!(Error::Core(affect_core::Error::Validation("x".into())).exit_code(), 2);
    assert_eq!(Error::Core(affect_core::Error::Coverage("x".into())).exit_code(), 2);
    assert_eq!(Error::integrity(Path::new("f"), "x").exit_code(), 2);
    assert_eq!(
        Error::Core(affect_core::Error::NonFinite { step: 3, detail: "nan".into() }).exit_code(),
        3
    );
    assert_eq!(Error::GradCheck("x".into()).exit_code(), 3);
}
