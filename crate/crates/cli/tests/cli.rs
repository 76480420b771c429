use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lowrank-itlab")).args(args).current_dir(cwd).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn gen_decode_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(run(&["gen", "--m", "3", "--r", "1", "--q", "3", "--seed", "5", "--out", "inst.json"], d).status.success());
    assert!(run(&["sample", "--m", "3", "--n", "9", "--seed", "2", "--out", "locs.json"], d).status.success());
    let inst: Value = serde_json::from_str(&fs::read_to_string(d.join("inst.json")).unwrap()).unwrap();

    let full = json(&run(&["decode", "--instance", "inst.json", "--locs", "locs.json"], d));
    assert_eq!(full["kind"], "Unique");
    assert_eq!(full["consistent_count"], 1);
    assert_eq!(full["reconstruction"], inst["s"]);

    let none = json(&run(&["decode", "--instance", "inst.json", "--n", "0", "--seed", "1"], d));
    assert_eq!(none["kind"], "Ambiguous");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let code = |args: &[&str]| run(args, d).status.code().unwrap();
    assert_eq!(code(&["gen", "--m", "0", "--r", "1", "--q", "2", "--seed", "1"]), 2);
    assert_eq!(code(&["gen", "--m", "2", "--r", "1", "--q", "4", "--semiring", "modq", "--seed", "1"]), 2);
    assert_eq!(code(&["pe", "--m", "5", "--r", "2", "--q", "5", "--n", "3", "--mode", "exact"]), 3);
    assert_eq!(code(&["decode", "--instance", "missing.json", "--n", "1", "--seed", "1"]), 4);
    assert_eq!(code(&["bounds", "gaussian", "--m", "4", "--r", "1", "--beta", "1", "--D", "0", "--hstar", "1"]), 2);
    assert_eq!(code(&["coverage", "--m", "10", "--r", "2"]), 2);

    fs::write(d.join("bad.json"), r#"{"m":2,"r":1,"q":2,"semiring":"integer","u":[[1],[1]],"v":[[1,1]],"s":[[1,1],[1,0]]}"#).unwrap();
    assert_eq!(code(&["decode", "--instance", "bad.json", "--n", "1", "--seed", "1"]), 2);

    let out = Command::new(env!("CARGO_BIN_EXE_lowrank-itlab"))
        .args(["bounds", "fano", "--m", "4", "--r", "1", "--q", "2", "--pe", "0"])
        .env("LOWRANK_ITLAB_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pe_and_coverage_json() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let exact = json(&run(&["pe", "--m", "2", "--r", "1", "--q", "2", "--n", "4", "--mode", "exact"], d));
    assert_eq!(exact["pe"], 0.0);
    assert_eq!(exact["mode"], "ExactAverage");
    let mc = json(&run(&["pe", "--m", "2", "--r", "1", "--q", "2", "--n", "0", "--mode", "mc", "--trials", "50", "--seed", "3"], d));
    assert_eq!(mc["trials"], 50);
    assert!(mc["ci95"].is_array());

    let cov = json(&run(&["coverage", "--m", "20", "--r", "1", "--alpha", "2", "--trials", "200", "--seed", "4", "--json"], d));
    for key in ["m", "r", "alpha", "n_used", "exact_marginal_tail", "chernoff_bound", "paper_bound", "mc_estimate", "mc_ci95", "trials"] {
        assert!(cov.get(key).is_some(), "missing {key}");
    }
    let text = run(&["coverage", "--m", "20", "--r", "1", "--alpha", "2", "--trials", "200", "--seed", "4"], d);
    assert!(String::from_utf8(text.stdout).unwrap().contains("monte carlo estimate"));
}

#[test]
fn entropy_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let src = json(&run(&["entropy", "source", "--m", "2", "--r", "1", "--q", "2"], d));
    assert_eq!(src["value_bits"], 2.771782222);
    assert_eq!(src["support_size"], 10);

    let lemma = json(&run(&["entropy", "lemma32", "--r", "1", "--q", "2"], d));
    assert_eq!(lemma["entropy"]["value_bits"], 0.5);
    assert_eq!(lemma["holds"], true);

    fs::write(d.join("corner.json"), r#"{"m":2,"locations":[[0,0]]}"#).unwrap();
    let agree = json(&run(&["entropy", "agreement", "--m", "2", "--r", "1", "--q", "2", "--locs", "corner.json", "--values", "0"], d));
    assert_eq!(agree["probability"], 0.75);

    let fano = json(&run(&["entropy", "fano", "--m", "1", "--r", "1", "--q", "2"], d));
    assert_eq!(fano["pe"], 0.25);
    assert_eq!(fano["holds"], true);

    let obs = json(&run(&["entropy", "obs", "--m", "2", "--r", "1", "--q", "2", "--locs", "corner.json"], d));
    assert!((obs["value_bits"].as_f64().unwrap() - 0.811278124).abs() < 1e-9);
}

#[test]
fn bounds_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let fano = json(&run(&["bounds", "fano", "--m", "100", "--r", "2", "--q", "16", "--pe", "0"], d));
    assert_eq!(fano["ceil"], 89);
    let ham = json(&run(&["bounds", "hamming", "--m", "100", "--r", "2", "--q", "16", "--D", "1", "--beta", "1"], d));
    assert!((ham["bound_value"].as_f64().unwrap() - 200.0 / 3.0).abs() < 1e-9);
    let exact = json(&run(&["bounds", "hamming", "--m", "2", "--r", "1", "--q", "2", "--D", "0", "--beta", "1", "--exact-hs", "--unit", "bits"], d));
    assert_eq!(exact["formula"], "hamming_rd_exact_hs");
    let gauss = json(&run(&["bounds", "gaussian", "--m", "10", "--r", "1", "--beta", "1", "--D", "0.1", "--hstar", "2"], d));
    assert!(gauss["variant_paper"]["bound_value"].is_number() && gauss["variant_derivation"]["bound_value"].is_number());

    fs::write(d.join("table.json"), r#"{"rows":[{"kind":"fano","m":100,"r":2,"q":16,"pe":0},{"kind":"hamming","m":100,"r":2,"q":16,"D":1,"beta":1}]}"#).unwrap();
    let out = run(&["bounds", "table", "--sweep", "table.json"], d);
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("formula,"));
}

#[test]
fn sweep_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("cfg.json"), r#"{"points":[{"m":2,"r":1,"q":2}],"n_grid":"all","mode":"exact","master_seed":1}"#).unwrap();
    assert!(run(&["sweep", "--config", "cfg.json", "--out", "out"], d).status.success());
    let csv = fs::read_to_string(d.join("out/results.csv")).unwrap();
    assert!(csv.starts_with("m,r,q,semiring,n,alpha,trials,failures,pe_hat,ci95_lo,ci95_hi,coverage_fail_hat,seed,mode,runtime_ms\n"));
    assert_eq!(csv.lines().count(), 6);

    assert!(run(&["plot", "--csv", "out/results.csv", "--x", "n", "--y", "coverage_fail_hat", "--out", "cov.svg"], d).status.success());
    assert!(fs::read_to_string(d.join("cov.svg")).unwrap().contains("<polyline"));

    fs::write(d.join("typo.json"), r#"{"points":[{"m":2,"r":1,"q":2}],"n_grid":"all","mode":"exact","master_seed":1,"trails":5}"#).unwrap();
    assert_eq!(run(&["sweep", "--config", "typo.json", "--out", "out2"], d).status.code(), Some(2));
}
