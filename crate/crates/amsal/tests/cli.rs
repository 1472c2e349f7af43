use std::path::Path;
use std::process::{Command, Output};

use amsal::core::Matrix;
use amsal::format::load_ids;
use amsal::load_matrix;

fn amsal(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amsal"))
        .args(args)
        .env("AMSAL_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = amsal(args, "1");
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn report(path: &Path) -> Vec<(String, f64)> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let (k, v) = l.split_once('=').unwrap();
            (k.to_string(), v.parse().unwrap())
        })
        .collect()
}

fn value(report: &[(String, f64)], key: &str) -> f64 {
    report.iter().find(|(k, _)| k == key).unwrap_or_else(|| panic!("{key} missing")).1
}

#[test]
fn synth_then_pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--n", "300", "--seed", "4", "--out", p(&data)]);
    let x = load_matrix(&data.join("x.bin")).unwrap();
    assert_eq!(x.shape(), (300, 8));
    assert_eq!(load_matrix(&data.join("z.bin")).unwrap().shape(), (2, 2));
    ok(&["pipeline", "--config", p(&data.join("pipeline.conf"))]);
    let run = data.join("run");
    for f in ["assignment.csv", "trace.csv", "eraser.amse", "x_erased.bin", "report.txt"] {
        assert!(run.join(f).is_file(), "{f} missing");
    }
    let erased = load_matrix(&run.join("x_erased.bin")).unwrap();
    assert_eq!(erased.shape(), x.shape());
    assert_eq!(load_ids(&run.join("assignment.csv")).unwrap().len(), 300);
    let trace = std::fs::read_to_string(run.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,seed,objective,accuracy\n"));
    let r = report(&run.join("report.txt"));
    let acc = value(&r, "alignment_accuracy");
    assert!(acc.max(1.0 - acc) > 0.9, "alignment accuracy {acc}");
}

#[test]
fn stages_chain_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = dir.path().join("stages");
    ok(&["synth", "--kind", "two-factor", "--n", "400", "--y-prior", "0.8", "--seed", "2", "--format", "csv", "--out", p(&data)]);
    let conf = data.join("pipeline.conf");
    ok(&["align", "--config", p(&conf), "--out", p(&out)]);
    let assignment = out.join("assignment.csv");
    ok(&["erase", "--config", p(&conf), "--assignment", p(&assignment), "--out", p(&out), "--format", "csv"]);
    let erased = out.join("x_erased.csv");
    let before = dir.path().join("before");
    ok(&["eval", "--config", p(&conf), "--out", p(&before)]);
    ok(&["eval", "--config", p(&conf), "--x", p(&erased), "--out", p(&out)]);
    let before = report(&before.join("report.txt"));
    let after = report(&out.join("report.txt"));
    assert!(value(&before, "task_accuracy") > 0.8);
    assert!(value(&after, "guarded_accuracy") < value(&before, "guarded_accuracy"));

    let reused = dir.path().join("reused");
    ok(&["erase", "--config", p(&conf), "--eraser", p(&out.join("eraser.amse")), "--out", p(&reused), "--format", "csv"]);
    let a: Matrix = load_matrix(&erased).unwrap();
    let b: Matrix = load_matrix(&reused.join("x_erased.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--n", "250", "--seed", "8", "--out", p(&data)]);
    let conf = data.join("pipeline.conf");
    let mut runs = Vec::new();
    for threads in ["1", "4", "0"] {
        let out = dir.path().join(format!("t{threads}"));
        let res = amsal(&["pipeline", "--config", p(&conf), "--seeds", "5", "--out", p(&out)], threads);
        assert!(res.status.success());
        runs.push(out);
    }
    for f in ["assignment.csv", "trace.csv", "eraser.amse", "x_erased.bin", "report.txt"] {
        let first = std::fs::read(runs[0].join(f)).unwrap();
        for other in &runs[1..] {
            assert_eq!(first, std::fs::read(other.join(f)).unwrap(), "{f} differs");
        }
    }
}

#[test]
fn partial_selection_without_labels_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--n", "100", "--out", p(&data)]);
    let res = amsal(&["pipeline", "--config", p(&data.join("pipeline.conf")), "--selection", "partial"], "1");
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("labels"));
}

#[test]
fn partial_selection_with_labels_runs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--n", "200", "--seed", "1", "--out", p(&data)]);
    let truth = load_ids(&data.join("truth.csv")).unwrap();
    let labels: String = (0..20).map(|i| format!("{i},{}\n", truth[i])).collect();
    std::fs::write(data.join("labels.csv"), format!("input,record\n{labels}")).unwrap();
    ok(&["pipeline", "--config", p(&data.join("pipeline.conf")), "--selection", "partial", "--labels", p(&data.join("labels.csv"))]);
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let missing = amsal(&["pipeline", "--x", p(&dir.path().join("nope.bin")), "--z", "z.bin"], "1");
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("amsal: error"));

    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "x = x.bin\nnot_a_key = 3\n").unwrap();
    let res = amsal(&["pipeline", "--config", p(&conf)], "1");
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 2"));

    let threads = amsal(&["synth", "--n", "50", "--out", p(&dir.path().join("s"))], "many");
    assert!(threads.status.success());
    let res = amsal(&["pipeline", "--config", p(&dir.path().join("s/pipeline.conf"))], "many");
    assert!(!res.status.success());
}
