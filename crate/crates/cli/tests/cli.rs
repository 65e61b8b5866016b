mod common;

use std::path::Path;
use std::process::{Command, Output};

fn cftrack(args: &[&str], paths: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cftrack"));
    cmd.args(args);
    for (flag, p) in paths {
        cmd.arg(flag).arg(p);
    }
    cmd.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn track_writes_one_record_per_frame() {
    let tmp = tempfile::tempdir().unwrap();
    let seq = tmp.path().join("Toy");
    common::write_toy_sequence(&seq, 3, (1.0, 0.0), 9);
    let out = tmp.path().join("res/Toy.csv");
    let o = cftrack(&["track", "--gt-init"], &[("--seq", &seq), ("--out", &out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# config_hash="));
    assert!(lines[1].starts_with("frame,x,y,w,h,scale"));
    assert_eq!(lines.len(), 2 + 3);
}

#[test]
fn track_accepts_explicit_init_and_variant() {
    let tmp = tempfile::tempdir().unwrap();
    let seq = tmp.path().join("Toy");
    common::write_toy_sequence(&seq, 3, (0.0, 1.0), 4);
    let out = tmp.path().join("Toy.csv");
    let o = cftrack(
        &["track", "--variant", "EAMStaple_PSMD", "--init", "49,39,32,28"],
        &[("--seq", &seq), ("--out", &out)],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let first: Vec<f64> = text.lines().nth(2).unwrap().split(',').take(5).map(|v| v.parse().unwrap()).collect();
    assert_eq!(first, [1.0, 49.0, 39.0, 32.0, 28.0]);
}

#[test]
fn missing_sequence_is_a_usage_error() {
    let o = cftrack(&["track", "--out", "x.csv"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--seq"));
}

#[test]
fn unknown_variant_lists_valid_ones() {
    let o = cftrack(&["track", "--seq", "s", "--out", "o", "--variant", "KCF"], &[]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    for v in ["MDRCF", "EAMStaple", "EAMStaple_PSMD", "Staple_baseline", "always_update_ablation"] {
        assert!(e.contains(v), "{e}");
    }
}

#[test]
fn nonexistent_sequence_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cftrack(
        &["track"],
        &[("--seq", &tmp.path().join("nope")), ("--out", &tmp.path().join("o.csv"))],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bench_writes_results_and_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    common::write_toy_dataset(&data);
    let out = tmp.path().join("out");
    let o = cftrack(
        &["bench", "--variants", "MDRCF,Staple_baseline", "--jobs", "2"],
        &[("--dataset", &data), ("--out", &out)],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for label in ["MDRCF", "Staple_baseline"] {
        for seq in ["Drift", "Still"] {
            assert!(out.join(label).join(format!("{seq}.csv")).is_file());
        }
        assert!(out.join(label).join("precision_curve.csv").is_file());
        assert!(out.join(label).join("success_curve.csv").is_file());
    }
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(summary.starts_with("tracker,sequences,frames,precision_at_20,success_at_0.5,auc"));
    let attrs = std::fs::read_to_string(out.join("attributes.csv")).unwrap();
    assert!(attrs.contains("FM") && attrs.contains("IV"));

    let first = std::fs::read(out.join("summary.csv")).unwrap();
    let o = cftrack(
        &["bench", "--variants", "MDRCF,Staple_baseline", "--reuse"],
        &[("--dataset", &data), ("--out", &out)],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(out.join("summary.csv")).unwrap(), first);
}

#[test]
fn bench_gate_comparison_labels_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    common::write_toy_dataset(&data);
    let out = tmp.path().join("out");
    let o = cftrack(
        &["bench", "--gates", "psmd,psr,apce", "--psr-threshold", "5"],
        &[("--dataset", &data), ("--out", &out)],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    for label in ["MDRCF+psmd", "MDRCF+psr", "MDRCF+apce"] {
        assert!(summary.contains(label), "{summary}");
    }
}

#[test]
fn empty_dataset_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cftrack(&["bench"], &[("--dataset", tmp.path()), ("--out", &tmp.path().join("out"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn cn_table_has_expected_size() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cn.bin");
    let o = cftrack(&["cn-table"], &[("--out", &out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::metadata(&out).unwrap().len(), 32768 * 11 * 4);
}
