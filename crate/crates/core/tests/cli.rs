//! End-to-end runs of the binary on a small toy corpus.

use std::path::Path;
use std::process::Command;

use ctxmt::scat::write_scat;
use ctxmt::synth::{SynthConfig, ToyLanguage};
use ctxmt::text::write_corpus;

fn ctxmt(report_dir: &Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ctxmt"))
        .arg("--report-dir")
        .arg(report_dir)
        .args(args)
        .output()
        .expect("binary runs");
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap_or(-1), text)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn train_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let lang = ToyLanguage::new(SynthConfig::default(), 1).unwrap();
    let toy = lang.documents(20, 2, "t").unwrap();
    let corpus = d.join("corpus.txt");
    let scat = d.join("scat.jsonl");
    write_corpus(&corpus, &toy.iter().map(|t| t.doc.clone()).collect::<Vec<_>>()).unwrap();
    write_scat(&scat, &toy.iter().map(|t| t.example.clone()).collect::<Vec<_>>()).unwrap();
    let p = |x: &Path| x.to_str().unwrap().to_string();
    let (reports, out) = (d.join("reports"), d.join("model"));

    let (code, log) = ctxmt(
        &reports,
        &[
            "train", "--out", &p(&out), "--corpus", &p(&corpus), "--scat", &p(&scat),
            "--regime", "attnreg-rand", "--steps", "4", "--batch-size", "2", "--warmup", "2",
        ],
    );
    assert_eq!(code, 0, "{log}");
    for f in ["config.toml", "vocab.txt", "model.ckpt", "train_report.jsonl"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let ckpt = p(&out.join("model.ckpt"));

    let (code, log) = ctxmt(&reports, &["contrastive", "--checkpoint", &ckpt, "--set", &p(&scat)]);
    assert_eq!(code, 0, "{log}");
    let report = json(&reports.join("contrastive.json"));
    assert!(report["provenance"].is_object());
    assert_eq!(report.to_string().matches("\"accuracy\"").count(), 6, "{report}");

    let (code, log) = ctxmt(&reports, &["align-audit", "--checkpoint", &ckpt, "--scat", &p(&scat), "--limit", "5"]);
    assert_eq!(code, 0, "{log}");
    assert!(reports.join("align-audit.csv").exists());

    let (code, log) = ctxmt(
        &reports,
        &["translate", "--checkpoint", &ckpt, "--corpus", &p(&corpus), "--mode", "non-gold", "--beam", "1", "--max-len", "8"],
    );
    assert_eq!(code, 0, "{log}");
    assert!(json(&reports.join("translate.json"))["bleu"].is_number());

    let (code, log) = ctxmt(&reports, &["scat-stats", "--scat", &p(&scat)]);
    assert_eq!(code, 0, "{log}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = d.join("m");
    let missing = d.join("missing.txt");
    let (code, _) = ctxmt(d, &["train", "--out", out.to_str().unwrap(), "--lambda", "-1"]);
    assert_eq!(code, 1, "negative lambda is a validation error");
    let (code, _) = ctxmt(d, &["train", "--bogus"]);
    assert_eq!(code, 1, "usage errors are validation errors");
    let (code, _) = ctxmt(d, &["scat-stats", "--scat", missing.to_str().unwrap()]);
    assert_eq!(code, 2, "unreadable input is a runtime error");
}
