use std::path::Path;
use std::process::{Command, Output};

use cutlab_core::harness::csv::{partial_marker, schema_line};
use cutlab_core::harness::manifest::Manifest;
use cutlab_core::harness::parallel::run_parallel;
use cutlab_core::lattice::PercolationSample;
use cutlab_core::metric::{grow_ball, write_distance_map};

fn cutlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cutlab")).current_dir(dir).args(args).output().expect("run cutlab")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = cutlab(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

const RATE_CFG: &str = "d = 2\np = 0.7\nseed = 3\nevent = \"cutpoint\"\ns = [0.25, 0.5]\nx = [[0, 0], [0.25, 0]]\nn_grid = [6, 10]\nreplicates = 300\n";

#[test]
fn dislines_check_writes_one_row_per_instance() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["lemma-check", "--lemma", "dislines", "--instances", "100", "--seed", "1", "--out", "d.csv"]);
    let text = std::fs::read_to_string(dir.path().join("d.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# cutlab:lemma-check:v1"));
    assert_eq!(lines.next(), Some("instance,lemma,d,size,bound,achieved,pass,note"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.splitn(8, ',').collect()).collect();
    assert_eq!(rows.len(), 100);
    let mut passed = 0;
    for row in &rows {
        assert_eq!(row[1], "dislines");
        let achieved: f64 = row[5].parse().unwrap();
        // The separation bound can be out of reach; intersection never is.
        assert!(achieved > 0.0, "{row:?}");
        passed += (row[6] == "true") as usize;
    }
    assert!(passed >= 95, "{passed} of 100 rows pass");
}

#[test]
fn config_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("rate.cfg"), RATE_CFG).unwrap();
    ok(dir.path(), &["estimate-rate", "--config", "rate.cfg", "--out", "a.csv"]);
    ok(dir.path(), &["estimate-rate", "--config", "rate.cfg", "--out", "b.csv", "--workers", "3"]);
    let out = Command::new(env!("CARGO_BIN_EXE_cutlab"))
        .current_dir(dir.path())
        .env("CUTLAB_WORKERS", "2")
        .args(["estimate-rate", "--config", "rate.cfg", "--out", "c.csv"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let read = |name: &str| std::fs::read(dir.path().join(name)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_eq!(read("a.csv"), read("c.csv"));
    assert_eq!(read("a.csv.diagnostics.csv"), read("b.csv.diagnostics.csv"));
}

#[test]
fn ball_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["sample", "--d", "2", "--L", "10", "--p", "0.7", "--seed", "5", "--out", "s.bin"]);
    ok(dir.path(), &["ball", "--sample", "s.bin", "--source", "0,0", "--out", "ball.csv"]);
    let sample = PercolationSample::from_bytes(&std::fs::read(dir.path().join("s.bin")).unwrap()).unwrap();
    let origin = sample.spec().index_of(&[0, 0]).unwrap();
    let ball = grow_ball(&sample, origin, None).unwrap();
    let mut expected = Vec::new();
    schema_line(&mut expected, "ball").unwrap();
    write_distance_map(sample.spec(), &ball, &mut expected).unwrap();
    assert_eq!(std::fs::read(dir.path().join("ball.csv")).unwrap(), expected);
}

#[test]
fn exit_codes_separate_usage_config_and_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let usage = cutlab(p, &["frobnicate"]);
    assert_eq!(code(&usage), 1);
    assert!(!usage.stderr.is_empty());
    assert_eq!(code(&cutlab(p, &["sample", "--d", "2"])), 2, "missing L");
    assert_eq!(code(&cutlab(p, &["sample", "--d", "9", "--L", "2", "--p", "0.7", "--out", "x.bin"])), 2);
    std::fs::write(p.join("typo.cfg"), "d = 2\nreplicatse = 10\n").unwrap();
    let typo = cutlab(p, &["estimate-rate", "--config", "typo.cfg"]);
    assert_eq!(code(&typo), 2);
    assert!(String::from_utf8_lossy(&typo.stderr).contains("replicatse"));
    std::fs::write(p.join("bad.cfg"), "d = [\n").unwrap();
    assert_eq!(code(&cutlab(p, &["estimate-rate", "--config", "bad.cfg"])), 2);
    assert_eq!(code(&cutlab(p, &["ball", "--sample", "missing.bin", "--source", "0,0", "--out", "b.csv"])), 3);
    ok(p, &["sample", "--d", "2", "--L", "4", "--p", "0.6", "--seed", "1", "--out", "tiny.bin"]);
    let no_route = cutlab(p, &["route", "--sample", "tiny.bin", "--N", "4", "--epsilon", "0.25", "--mu", "1.1", "--source", "0,0", "--target", "3,0", "--out", "r.csv"]);
    assert_eq!(code(&no_route), 3);
}

#[test]
fn replay_reproduces_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["sample", "--d", "2", "--L", "8", "--p", "0.7", "--seed", "2", "--out", "s.bin"]);
    ok(p, &["cutpoint-scan", "--sample", "s.bin", "--out", "cp.csv"]);
    ok(p, &["replay", "--manifest", "cp.csv.manifest.json"]);

    let manifest = std::fs::read_to_string(p.join("cp.csv.manifest.json")).unwrap();
    let recorded = Manifest::from_bytes(manifest.as_bytes()).unwrap();
    let hash = &recorded.outputs[0].sha256;
    std::fs::write(p.join("forged.json"), manifest.replace(hash.as_str(), &"0".repeat(hash.len()))).unwrap();
    assert_eq!(code(&cutlab(p, &["replay", "--manifest", "forged.json"])), 3);

    ok(p, &["sample", "--d", "2", "--L", "8", "--p", "0.7", "--seed", "3", "--out", "s.bin"]);
    let moved = cutlab(p, &["replay", "--manifest", "cp.csv.manifest.json"]);
    assert_ne!(code(&moved), 0);
    assert!(String::from_utf8_lossy(&moved.stderr).contains("s.bin"));
}

#[test]
fn failing_replicate_leaves_a_partial_file() {
    let outcome = run_parallel(10_000, 4, |r| if r == 5000 { Err("induced failure".to_string()) } else { Ok(r * r) });
    let mut csv = Vec::new();
    schema_line(&mut csv, "fault").unwrap();
    csv.extend_from_slice(b"replicate,value\n");
    for (r, v) in outcome.results.iter().enumerate() {
        csv.extend_from_slice(format!("{r},{v}\n").as_bytes());
    }
    partial_marker(&mut csv, outcome.failure.as_ref().unwrap()).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2 + 5000 + 1);
    assert_eq!(lines[2 + 4999], "4999,24990001");
    assert_eq!(*lines.last().unwrap(), "# partial: replicate 5000 failed: induced failure");
}

#[test]
fn empty_plan_gives_a_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["lemma-check", "--lemma", "claim", "--instances", "0", "--out", "e.csv"]);
    let text = std::fs::read_to_string(dir.path().join("e.csv")).unwrap();
    assert_eq!(text, "# cutlab:lemma-check:v1\ninstance,lemma,d,size,bound,achieved,pass,note\n");
    let empty = run_parallel(0, 3, Ok::<u64, String>);
    assert!(empty.results.is_empty() && empty.failure.is_none());
}
