mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use prp_core::cli::{self, Command as Cmd, RunOptions};
use serde_json::Value;

fn prp(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_prp")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8(out.stdout).unwrap())
}

fn run_file(cmd: &str, file: &Path) -> (i32, Value) {
    let (code, out) = prp(&[cmd, "--instance", file.to_str().unwrap()]);
    (code, serde_json::from_str(&out).unwrap_or_else(|e| panic!("{cmd} {file:?}: {e}\n{out}")))
}

fn corpus_path(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus").join(format!("{name}.json"))
}

#[test]
fn corpus_matrix_exit_codes() {
    let expected: &[(&str, [i32; 9])] = &[
        // validate tangent cone stability quiver-export king metric-solve rhd deligne-simpson
        ("diagonal_polystable", [0, 0, 0, 0, 0, 0, 0, 0, 3]),
        ("diagonal_unstable", [0, 0, 0, 1, 0, 1, 1, 0, 3]),
        ("example_2_3_no_solution", [1, 1, 1, 1, 1, 1, 1, 0, 1]),
        ("example_2_3_solution", [0, 0, 0, 0, 0, 0, 0, 0, 0]),
        ("irreducible_stable", [0, 0, 0, 0, 0, 0, 0, 0, 3]),
        ("semisimple_monodromy", [0, 0, 0, 0, 0, 0, 0, 0, 1]),
        ("trivial_g0n3_r1", [0, 0, 0, 0, 0, 0, 0, 0, 0]),
        ("trivial_g1n1_r2", [0, 0, 0, 2, 0, 2, 0, 0, 3]),
        ("unipotent_monodromy", [0, 1, 1, 1, 0, 1, 1, 0, 1]),
    ];
    let start = Instant::now();
    let files = common::corpus_files();
    assert_eq!(files.len(), expected.len());
    for (name, codes) in expected {
        for (cmd, want) in Cmd::ALL.iter().zip(codes) {
            let (code, report) = run_file(cmd.name(), &corpus_path(name));
            assert_eq!(code, *want, "{name} {}: {report}", cmd.name());
            assert_eq!(report["command"], cmd.name());
            assert!(report["inputs_digest"].as_str().unwrap().len() == 64);
        }
    }
    assert!(start.elapsed() < Duration::from_secs(60), "corpus took {:?}", start.elapsed());
}

#[test]
fn reports_are_byte_reproducible() {
    let file = corpus_path("example_2_3_solution");
    for cmd in ["metric-solve", "cone", "stability", "rhd"] {
        let a = prp(&[cmd, "--instance", file.to_str().unwrap(), "--seed", "3"]);
        let b = prp(&[cmd, "--instance", file.to_str().unwrap(), "--seed", "3"]);
        assert_eq!(a, b, "{cmd}");
    }
}

#[test]
fn example_validates_with_expected_tangent_dimension() {
    let file = corpus_path("example_2_3_solution");
    let (code, report) = run_file("validate", &file);
    assert_eq!(code, 0);
    assert_eq!(report["result"]["verdict"], "valid");
    let (code, report) = run_file("tangent", &file);
    assert_eq!(code, 0);
    // r²(2g + n − 1) with r = 2, g = 0, n = 3.
    assert_eq!(report["result"]["dimension"], 8);
    let (code, report) = run_file("deligne-simpson", &file);
    assert_eq!(code, 0);
    assert_eq!(report["result"]["solution"], true);
}

#[test]
fn schema_errors_exit_three_with_paths() {
    let text = common::corpus("example_2_3_solution");
    let mut v: Value = serde_json::from_str(&text).unwrap();
    v["flags"].as_array_mut().unwrap().pop();
    let (code, report) = cli::run_on_text(Cmd::Validate, &v.to_string(), None, &RunOptions::default());
    assert_eq!(code, 3);
    assert_eq!(report["error"]["path"], "$/flags");

    let (code, report) = cli::run_on_text(Cmd::Validate, "{\"schema_version\": 1", None, &RunOptions::default());
    assert_eq!(code, 3);
    assert_eq!(report["error"]["path"], "$");

    let (code, _) = prp(&["validate", "--instance", "/nonexistent/instance.json"]);
    assert_eq!(code, 3);
    let (code, _) = prp(&["frobnicate"]);
    assert_eq!(code, 3);
}

#[test]
fn weights_file_overrides_instance_weights() {
    let text = common::corpus("diagonal_unstable");
    let opts = RunOptions::default();
    let (code, base) = cli::run_on_text(Cmd::Stability, &text, None, &opts);
    assert_eq!(code, 1);
    // The flag line always carries the larger weight, so it destabilizes for any weights.
    let (code, bare) = cli::run_on_text(Cmd::Stability, &text, Some("[[0, 1]]"), &opts);
    let (_, wrapped) = cli::run_on_text(Cmd::Stability, &text, Some("{\"weights\": [[0, 1]]}"), &opts);
    assert_eq!(code, 1);
    assert_eq!(bare["result"], wrapped["result"]);
    assert_ne!(bare["inputs_digest"], base["inputs_digest"]);
    let (code, report) = cli::run_on_text(Cmd::Stability, &text, Some("[[1, 0]]"), &opts);
    assert_eq!(code, 3, "{report}");
}

#[test]
fn help_exits_zero() {
    let (code, out) = prp(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("validate"));
}
