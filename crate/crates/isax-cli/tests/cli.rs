//! End-to-end checks of the binary: file formats, determinism, exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_isax"))
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("isax-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn generate(dir: &Path, name: &str, count: usize, length: usize, seed: u64) -> PathBuf {
    let out = dir.join(name);
    let status = bin()
        .args(["generate", "--count", &count.to_string(), "--length", &length.to_string()])
        .args(["--seed", &seed.to_string(), "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    out
}

fn build(dir: &Path, dataset: &Path, name: &str, count: usize, length: usize, threads: usize) -> PathBuf {
    let out = dir.join(name);
    let output = bin()
        .args(["build", "--dataset"])
        .arg(dataset)
        .args(["--count", &count.to_string(), "--length", &length.to_string()])
        .args(["--threads", &threads.to_string(), "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "build failed: {}", stderr(&output));
    out
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn generate_is_deterministic_and_sized() {
    let dir = workdir("generate");
    let a = generate(&dir, "a.bin", 100, 128, 42);
    let b = generate(&dir, "b.bin", 100, 128, 42);
    let c = generate(&dir, "c.bin", 100, 128, 43);
    assert_eq!(std::fs::metadata(&a).unwrap().len(), 51_200);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn build_is_deterministic_across_threads_and_reruns() {
    let dir = workdir("determinism");
    let data = generate(&dir, "data.bin", 3000, 64, 5);
    let one = build(&dir, &data, "one.isax", 3000, 64, 1);
    let two = build(&dir, &data, "two.isax", 3000, 64, 2);
    let rerun = build(&dir, &data, "rerun.isax", 3000, 64, 2);
    assert_eq!(std::fs::read(&one).unwrap(), std::fs::read(&two).unwrap());
    assert_eq!(std::fs::read(&two).unwrap(), std::fs::read(&rerun).unwrap());
}

#[test]
fn build_refuses_empty_and_mismatched_datasets() {
    let dir = workdir("badbuild");
    let data = generate(&dir, "data.bin", 10, 64, 1);

    let empty = bin()
        .args(["build", "--dataset"])
        .arg(&data)
        .args(["--count", "0", "--length", "64", "--out"])
        .arg(dir.join("x.isax"))
        .output()
        .unwrap();
    assert_eq!(empty.status.code(), Some(3), "{}", stderr(&empty));

    let mismatch = bin()
        .args(["build", "--dataset"])
        .arg(&data)
        .args(["--count", "11", "--length", "64", "--out"])
        .arg(dir.join("y.isax"))
        .output()
        .unwrap();
    assert_eq!(mismatch.status.code(), Some(3), "{}", stderr(&mismatch));

    // segment count not dividing the length is a usage problem
    let segments = bin()
        .args(["build", "--dataset"])
        .arg(&data)
        .args(["--count", "10", "--length", "64", "--segments", "7", "--out"])
        .arg(dir.join("z.isax"))
        .output()
        .unwrap();
    assert_eq!(segments.status.code(), Some(2), "{}", stderr(&segments));
}

#[test]
fn query_engines_verify_against_the_oracle() {
    let dir = workdir("query");
    let data = generate(&dir, "data.bin", 2000, 64, 9);
    let queries = generate(&dir, "queries.bin", 10, 64, 10);
    let index = build(&dir, &data, "index.isax", 2000, 64, 2);

    for engine in ["tree", "flat", "scan"] {
        let report = dir.join(format!("{engine}.report"));
        let output = bin()
            .args(["query", "--index"])
            .arg(&index)
            .args(["--dataset"])
            .arg(&data)
            .args(["--queries"])
            .arg(&queries)
            .args(["--engine", engine, "--threads", "2", "--verify", "--report"])
            .arg(&report)
            .output()
            .unwrap();
        assert!(output.status.success(), "engine {engine}: {}", stderr(&output));
        let text = std::fs::read_to_string(&report).unwrap();
        assert_eq!(text.lines().filter(|l| l.contains("verified=ok")).count(), 10);
        assert!(text.lines().last().unwrap().contains("verified=10/10"));
    }
}

#[test]
fn unknown_engine_is_a_usage_error() {
    let dir = workdir("engine");
    let output = bin()
        .args(["query", "--index", "i", "--dataset", "d", "--queries", "q"])
        .args(["--engine", "warp"])
        .current_dir(&dir)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn query_refuses_inconsistent_files() {
    let dir = workdir("inconsistent");
    let data = generate(&dir, "data.bin", 500, 64, 2);
    let index = build(&dir, &data, "index.isax", 500, 64, 1);

    // dataset that no longer matches the index header
    let short = generate(&dir, "short.bin", 400, 64, 2);
    let output = bin()
        .args(["query", "--index"])
        .arg(&index)
        .arg("--dataset")
        .arg(&short)
        .arg("--queries")
        .arg(&data)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3), "{}", stderr(&output));

    // queries whose length cannot match the index
    let odd = dir.join("odd.bin");
    std::fs::write(&odd, vec![0u8; 64 * 4 + 4]).unwrap();
    let output = bin()
        .args(["query", "--index"])
        .arg(&index)
        .arg("--dataset")
        .arg(&data)
        .arg("--queries")
        .arg(&odd)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3), "{}", stderr(&output));
}

#[test]
fn verification_failure_exits_with_its_own_code() {
    let dir = workdir("verifyfail");
    let data = generate(&dir, "data.bin", 500, 64, 11);
    let index = build(&dir, &data, "index.isax", 500, 64, 1);
    // a same-sized dataset from another seed: the index's words no longer
    // describe the raw values, so pruning goes wrong and answers diverge
    let other = generate(&dir, "other.bin", 500, 64, 12);
    let queries = generate(&dir, "queries.bin", 10, 64, 13);
    let output = bin()
        .args(["query", "--index"])
        .arg(&index)
        .arg("--dataset")
        .arg(&other)
        .arg("--queries")
        .arg(&queries)
        .args(["--engine", "tree", "--verify"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4), "{}", stderr(&output));
}
