//! The `rsnet` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

fn rsnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsnet")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const TINY: [&str; 18] = [
    "--set", "points_per_cube=64",
    "--set", "input_channels=8,8",
    "--set", "hidden_sizes=6,6",
    "--set", "output_channels=8",
    "--set", "resolution=0.1",
    "--set", "epochs=2",
    "--set", "lr=0.005",
    "--set", "batch_size=4",
    "--set", "class_weighting=median",
];

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.pts"), dir.path().join("b.pts"));
    for path in [&a, &b] {
        let o = rsnet(&["synth", "--seed", "3", "--points", "500", "--out", p(path)]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let many = dir.path().join("ctx.pts");
    assert!(rsnet(&["synth", "--kind", "context", "--count", "2", "--points", "300", "--out", p(&many)]).status.success());
    assert!(dir.path().join("ctx_0.pts").exists() && dir.path().join("ctx_1.pts").exists());
}

#[test]
fn train_eval_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("s.pts");
    assert!(rsnet(&["synth", "--seed", "1", "--points", "1500", "--out", p(&scene)]).status.success());
    let ckpt = dir.path().join("m.ckpt");

    let mut args = vec!["train", "--data", p(&scene), "--out", p(&ckpt), "--seed", "5"];
    args.extend(TINY);
    let o = rsnet(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("epoch")).count(), 2);

    // resuming a finished run trains nothing more and rewrites the same checkpoint
    let before = std::fs::read(&ckpt).unwrap();
    let o = rsnet(&["train", "--data", p(&scene), "--out", p(&ckpt), "--resume", p(&ckpt)]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&ckpt).unwrap(), before);

    let o = rsnet(&["eval", "--checkpoint", p(&ckpt), "--data", p(&scene)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("mIOU") && text.contains("bookcase"), "{text}");

    let labeled = dir.path().join("pred.pts");
    let o = rsnet(&["predict", "--checkpoint", p(&ckpt), "--data", p(&scene), "--out", p(&labeled)]);
    assert!(o.status.success());
    let pred = rsnet::pcio::read_cloud(&labeled).unwrap();
    assert_eq!(pred.len(), 1500);
    assert!(pred.labels.unwrap().iter().all(|&l| l < 6));
}

#[test]
fn gradcheck_single_case_passes() {
    let o = rsnet(&["gradcheck", "--case", "cell_lstm", "--seeds", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("gradcheck passed"));
}

#[test]
fn bench_prints_one_row_per_size_and_resolution() {
    let o = rsnet(&["bench", "--ns", "128,256", "--rs", "0.02,0.05", "--channels", "4", "--repeats", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split_whitespace().collect()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][3], rows[1][3]);
    assert_eq!(rows[2][3].parse::<u64>().unwrap(), 2 * rows[0][3].parse::<u64>().unwrap());
}

#[test]
fn exit_codes() {
    assert_eq!(rsnet(&["--help"]).status.code(), Some(0));
    assert_eq!(rsnet(&["train", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(rsnet(&["eval", "--checkpoint", "/nonexistent.ckpt", "--data", "/nonexistent.pts"]).status.code(), Some(1));
    assert_eq!(rsnet(&["gradcheck", "--case", "nope"]).status.code(), Some(1));
    let o = rsnet(&["sweep", "--set", "bogus_key=1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus_key"));
}
