//! End-to-end tests for the `laneforge` binary: exit codes, artifacts,
//! report shapes, and determinism.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_laneforge"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn write(path: &Path, text: &str) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, text).unwrap();
}

const CULANE_LANES: &str = "200.0 319.0 210.0 200.0 220.0 80.0\n400.0 319.0 390.0 150.0\n";
const TUSIMPLE_LINE: &str =
    "{\"lanes\":[[-2,300,310,320],[620,610,-2,-2]],\"h_samples\":[310,250,190,130],\"raw_file\":\"clips/c.jpg\"}\n";

#[test]
fn gen_targets_writes_artifact_triples() {
    let dir = tempfile::tempdir().unwrap();
    let ann = dir.path().join("ann");
    write(&ann.join("a.lines.txt"), CULANE_LANES);
    write(&ann.join("sub/t.jsonl"), TUSIMPLE_LINE);
    let out_dir = dir.path().join("targets");

    let out = run(&[
        "gen-targets",
        "--annotations",
        ann.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    for base in ["a", "sub_t_clips_c.jpg"] {
        for ext in ["hm.pgm", "theta.csv", "anchors.csv"] {
            assert!(
                out_dir.join(format!("{base}.{ext}")).exists(),
                "missing {base}.{ext}"
            );
        }
    }

    // 100x40 grid at the default 800x320 input and stride 8, 16-bit depth.
    let pgm = std::fs::read(out_dir.join("a.hm.pgm")).unwrap();
    let header = b"P5\n100 40\n65535\n";
    assert_eq!(&pgm[..header.len()], header);
    assert_eq!(pgm.len(), header.len() + 100 * 40 * 2);

    let anchors = std::fs::read_to_string(out_dir.join("a.anchors.csv")).unwrap();
    let lines: Vec<&str> = anchors.lines().collect();
    assert_eq!(lines[0], "s_x,s_y,theta,score");
    assert_eq!(lines.len(), 3, "two lanes -> two decoded anchors");

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["images"], 2);
    assert_eq!(summary["lanes"], 4);
    assert_eq!(summary["failed_files"], 0);
}

#[test]
fn gen_targets_logs_malformed_file_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let ann = dir.path().join("ann");
    write(&ann.join("good.lines.txt"), CULANE_LANES);
    write(&ann.join("bad.lines.txt"), "1 2 3\n");
    let out_dir = dir.path().join("targets");

    let out = run(&[
        "gen-targets",
        "--annotations",
        ann.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("odd number of coordinate tokens"));
    assert!(
        out_dir.join("good.hm.pgm").exists(),
        "good file still processed"
    );

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["images"], 1);
    assert_eq!(summary["failed_files"], 1);
}

#[test]
fn gen_targets_empty_dir_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let ann = dir.path().join("ann");
    std::fs::create_dir_all(&ann).unwrap();
    let out_dir = dir.path().join("targets");

    let out = run(&[
        "gen-targets",
        "--annotations",
        ann.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["images"], 0);
}

#[test]
fn gen_targets_missing_dir_is_usage_error() {
    let out = run(&["gen-targets", "--annotations", "/nonexistent-lf-path"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn loss_check_passes_within_tolerance() {
    let out = run(&["loss-check", "--trials", "50"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("max relative error"));
    assert!(text.contains("degeneration"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn loss_check_zero_trials_is_empty_success() {
    let out = run(&["loss-check", "--trials", "0"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("nothing checked"));
}

#[test]
fn loss_check_detects_injected_gradient_error() {
    let out = run(&["loss-check", "--trials", "50", "--break-grad"]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn eval_culane_reproduces_hand_count() {
    let dir = tempfile::tempdir().unwrap();
    let preds = dir.path().join("preds");
    let gts = dir.path().join("gts");
    write(
        &gts.join("a.lines.txt"),
        "200.0 319.0 210.0 200.0 220.0 80.0\n",
    );
    write(
        &preds.join("a.lines.txt"),
        "200.0 319.0 210.0 200.0 220.0 80.0\n600.0 319.0 590.0 100.0\n",
    );

    let out = run(&[
        "eval",
        "--preds",
        preds.to_str().unwrap(),
        "--gts",
        gts.to_str().unwrap(),
        "--mode",
        "culane",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let lines: Vec<String> = stdout(&out).lines().map(String::from).collect();
    assert_eq!(lines.len(), 2, "one image row plus summary");

    let row: serde_json::Value = serde_json::from_str(&lines[0]).unwrap();
    assert_eq!(row["file"], "a.lines.txt");
    assert_eq!((row["tp"].as_u64(), row["fp"].as_u64()), (Some(1), Some(1)));

    let summary: serde_json::Value = serde_json::from_str(&lines[1]).unwrap();
    assert_eq!(summary["summary"], true);
    assert_eq!(summary["precision"], 0.5);
    assert_eq!(summary["recall"], 1.0);
    assert!((summary["f1"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn eval_tusimple_reports_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let preds = dir.path().join("preds");
    let gts = dir.path().join("gts");
    write(
        &gts.join("gt.jsonl"),
        "{\"lanes\":[[100,110,120]],\"h_samples\":[160,170,180],\"raw_file\":\"a.jpg\"}\n",
    );
    write(
        &preds.join("pred.jsonl"),
        "{\"lanes\":[[105,115,125]],\"h_samples\":[160,170,180],\"raw_file\":\"a.jpg\"}\n",
    );

    let out = run(&[
        "eval",
        "--preds",
        preds.to_str().unwrap(),
        "--gts",
        gts.to_str().unwrap(),
        "--mode",
        "tusimple",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let lines: Vec<String> = stdout(&out).lines().map(String::from).collect();
    let summary: serde_json::Value = serde_json::from_str(lines.last().unwrap()).unwrap();
    assert_eq!(
        summary["acc"], 1.0,
        "5 px offsets are within the 20 px rule"
    );
    assert_eq!(summary["fpr"], 0.0);
    assert_eq!(summary["fnr"], 0.0);
}

#[test]
fn eval_missing_gt_dir_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let preds = dir.path().join("preds");
    std::fs::create_dir_all(&preds).unwrap();
    let out = run(&[
        "eval",
        "--preds",
        preds.to_str().unwrap(),
        "--gts",
        dir.path().join("missing").to_str().unwrap(),
        "--mode",
        "culane",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("does not exist"));
}

#[test]
fn eval_reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let preds = dir.path().join("preds");
    let gts = dir.path().join("gts");
    write(&gts.join("a.lines.txt"), CULANE_LANES);
    write(&preds.join("a.lines.txt"), CULANE_LANES);
    let (r1, r2) = (dir.path().join("r1.jsonl"), dir.path().join("r2.jsonl"));

    for report in [&r1, &r2] {
        let out = run(&[
            "eval",
            "--preds",
            preds.to_str().unwrap(),
            "--gts",
            gts.to_str().unwrap(),
            "--mode",
            "culane",
            "--out",
            report.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
    }
    assert_eq!(std::fs::read(&r1).unwrap(), std::fs::read(&r2).unwrap());
}

#[test]
fn kernel_bench_emits_rows_for_every_kernel() {
    let out = run(&["kernel-bench", "--sizes", "2x8x8"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "kernel,size,cells,ops,ns_per_cell");
    let kernels: Vec<&str> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(kernels, ["dconv5", "msa-c", "lka", "deform"]);
    for line in &lines[1..] {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[1], "2x8x8");
        assert_eq!(cols[2], "128");
        cols[3].parse::<u64>().expect("op count is an integer");
        cols[4].parse::<f64>().expect("timing is a float");
    }
}

#[test]
fn kernel_bench_is_deterministic_apart_from_timing() {
    let strip_timing = |text: String| -> Vec<String> {
        text.lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    let a = strip_timing(stdout(&run(&["kernel-bench", "--sizes", "2x8x8,3x5x9"])));
    let b = strip_timing(stdout(&run(&["kernel-bench", "--sizes", "2x8x8,3x5x9"])));
    assert_eq!(a, b);
}

#[test]
fn kernel_bench_oracle_check_runs_first() {
    let out = run(&["kernel-bench", "--sizes", "2x6x6", "--check-oracle"]);
    assert_eq!(code(&out), 0);
    assert!(stderr(&out).contains("oracle check: ok"));
}

#[test]
fn kernel_bench_rejects_unknown_variant_and_sizes() {
    assert_eq!(code(&run(&["kernel-bench", "--variant", "z"])), 2);
    assert_eq!(code(&run(&["kernel-bench", "--sizes", "8x8"])), 2);
}

#[test]
fn unknown_preset_is_usage_error() {
    let out = run(&["--preset", "kitti", "loss-check", "--trials", "1"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("unknown preset"));
}

#[test]
fn jobs_env_var_is_flag_fallback() {
    let out = bin()
        .args(["loss-check", "--trials", "5"])
        .env("LANEFORGE_JOBS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);

    let out = bin()
        .args(["loss-check", "--trials", "5"])
        .env("LANEFORGE_JOBS", "two")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}
