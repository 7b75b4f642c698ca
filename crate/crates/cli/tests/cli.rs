use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use xvanon::{cosine_similarity, read_embeddings, EmbeddingFormat, EmbeddingSet};

fn xvanon(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xvanon"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = xvanon(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn load(path: PathBuf) -> EmbeddingSet {
    read_embeddings(&path, EmbeddingFormat::Csv).unwrap()
}

/// Small population plus one model per gender.
fn fixture() -> TempDir {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--speakers", "40", "--utts", "3", "--dim", "16", "--seed", "1", "--out", "pop.csv"]);
    ok(d, &["train", "--input", "pop.csv", "--components", "3", "--seed", "2", "--out", "model.json"]);
    dir
}

#[test]
fn zero_components_is_a_usage_error() {
    let dir = fixture();
    let out = xvanon(dir.path(), &["train", "--input", "pop.csv", "--components", "0", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_row_count_and_header() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["synth", "--speakers", "500", "--utts", "4", "--out", "pop.csv"]);
    let text = fs::read_to_string(dir.path().join("pop.csv")).unwrap();
    assert!(text.starts_with("# seed=0 version="));
    assert_eq!(load(dir.path().join("pop.csv")).len(), 2000);
}

#[test]
fn train_writes_one_model_per_gender() {
    let dir = fixture();
    assert!(dir.path().join("model_male.json").exists());
    assert!(dir.path().join("model_female.json").exists());
    ok(dir.path(), &["train", "--input", "pop.csv", "--components", "2", "--out", "m-{gender}.json"]);
    assert!(dir.path().join("m-male.json").exists());
    assert!(dir.path().join("m-female.json").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = fixture();
    let d = dir.path();
    let anon = ["anonymize", "--input", "pop.csv", "--model", "model_male.json", "--model", "model_female.json"];
    ok(d, &[&anon[..], &["--seed", "9", "--out", "a1.csv"]].concat());
    ok(d, &[&anon[..], &["--seed", "9", "--out", "a2.csv"]].concat());
    assert_eq!(fs::read(d.join("a1.csv")).unwrap(), fs::read(d.join("a2.csv")).unwrap());

    ok(d, &["train", "--input", "pop.csv", "--components", "3", "--seed", "2", "--out", "again.json"]);
    assert_eq!(fs::read(d.join("model_male.json")).unwrap(), fs::read(d.join("again_male.json")).unwrap());

    ok(d, &["--threads", "1", "asv-sim", "--input", "pop.csv", "--components", "2", "--n-far", "10", "--n-avg", "4", "--out", "s1.csv"]);
    ok(d, &["--threads", "3", "asv-sim", "--input", "pop.csv", "--components", "2", "--n-far", "10", "--n-avg", "4", "--out", "s2.csv"]);
    assert_eq!(fs::read(d.join("s1.csv")).unwrap(), fs::read(d.join("s2.csv")).unwrap());
}

#[test]
fn per_speaker_fakes_are_shared_across_utterances() {
    let dir = fixture();
    let d = dir.path();
    ok(d, &["anonymize", "--input", "pop.csv", "--model", "model_male.json", "--model", "model_female.json", "--out", "a.csv"]);
    let anon = load(d.join("a.csv"));
    for (_, group) in anon.group_by_speaker() {
        let first = group[0].vector();
        assert!(group.iter().all(|e| e.vector() == first));
    }
    ok(d, &["anonymize", "--input", "pop.csv", "--model", "model_male.json", "--model", "model_female.json", "--per-utterance", "--out", "u.csv"]);
    let per_utt = load(d.join("u.csv"));
    let (_, group) = per_utt.group_by_speaker().into_iter().next().unwrap();
    assert_ne!(group[0].vector(), group[1].vector());
}

#[test]
fn forced_dissimilarity_output() {
    let dir = fixture();
    let d = dir.path();
    let base = ["anonymize", "--input", "pop.csv", "--model", "model_male.json", "--model", "model_female.json", "--seed", "4"];
    ok(d, &[&base[..], &["--fd", "--fd-threshold", "0.3", "--out", "fd.csv"]].concat());
    let orig = load(d.join("pop.csv"));
    let fd = load(d.join("fd.csv"));
    for (o, a) in orig.iter().zip(fd.iter()) {
        assert_eq!(o.utterance_id(), a.utterance_id());
        assert!(cosine_similarity(o.vector(), a.vector()).unwrap() < 0.3);
    }

    ok(d, &[&base[..], &["--fd", "--fd-threshold", "1.0", "--out", "fd1.csv"]].concat());
    ok(d, &[&base[..], &["--out", "plain.csv"]].concat());
    assert_eq!(fs::read(d.join("fd1.csv")).unwrap(), fs::read(d.join("plain.csv")).unwrap());
}

#[test]
fn exhausted_rejection_exits_4() {
    let dir = fixture();
    let out = xvanon(
        dir.path(),
        &[
            "anonymize", "--input", "pop.csv", "--model", "model_male.json", "--model", "model_female.json",
            "--fd", "--fd-threshold", "-0.99", "--max-attempts", "2", "--out", "x.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(4));
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn dimension_mismatch_exits_2() {
    let dir = fixture();
    let d = dir.path();
    ok(d, &["synth", "--speakers", "10", "--dim", "8", "--out", "small.csv"]);
    let out = xvanon(d, &["anonymize", "--input", "small.csv", "--model", "model_male.json", "--model", "model_female.json", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let out = xvanon(d, &["baseline", "--input", "small.csv", "--pool", "pop.csv", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_exits_2() {
    let dir = TempDir::new().unwrap();
    let out = xvanon(dir.path(), &["train", "--input", "nope.csv", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_has_full_grid_per_gender() {
    let dir = fixture();
    let d = dir.path();
    ok(d, &["sweep", "--input", "pop.csv", "--components", "1,2,3,4,5,6", "--out", "sw.csv"]);
    let text = fs::read_to_string(d.join("sw.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.iter().filter(|r| r.starts_with("male,")).count(), 18);
    assert_eq!(rows.iter().filter(|r| r.starts_with("female,")).count(), 18);
}

#[test]
fn baseline_and_eval_ks_reports() {
    let dir = fixture();
    let d = dir.path();
    ok(d, &["synth", "--speakers", "30", "--utts", "2", "--dim", "16", "--seed", "8", "--out", "pool.csv"]);
    ok(d, &["baseline", "--input", "pop.csv", "--pool", "pool.csv", "--n-far", "10", "--n-avg", "4", "--out", "b.csv"]);
    assert_eq!(load(d.join("b.csv")).len(), 120);
    ok(d, &["eval-ks", "--a", "pop.csv", "--b", "b.csv", "--ecdf-a", "ea.csv", "--out", "ks.csv"]);
    let ks = fs::read_to_string(d.join("ks.csv")).unwrap();
    assert!(ks.lines().nth(1) == Some("gender,n_a,n_b,ks"));
    assert!(ks.lines().any(|l| l.starts_with("all,120,120,")));
    let ecdf = fs::read_to_string(d.join("ea.csv")).unwrap();
    assert_eq!(ecdf.lines().nth(1), Some("x,F"));
}

#[test]
fn asv_sim_rows_per_scenario_strategy_gender() {
    let dir = fixture();
    let d = dir.path();
    ok(d, &["asv-sim", "--input", "pop.csv", "--components", "2", "--strategy", "none", "--strategy", "ours", "--strategy", "baseline", "--n-far", "10", "--n-avg", "4", "--out", "m.csv"]);
    let text = fs::read_to_string(d.join("m.csv")).unwrap();
    assert_eq!(text.lines().nth(1), Some("scenario,strategy,gender,eer,cllr,cllr_min,n_genuine,n_impostor"));
    assert_eq!(text.lines().count(), 2 + 3 * 3 * 2);
}
