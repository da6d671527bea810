use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pseudoiid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pseudoiid")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stderr).expect("stderr is one JSON object")
}

const BLOCK_SPARSE: &str = r#"
[sample]
spec = { family = { kind = "block_sparse", block = 6 }, sigma_w2 = 1.0 }
dims = [[30, 30]]
"#;

#[test]
fn block_sparse_sample_has_one_triplet_per_kept_entry() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BLOCK_SPARSE);
    let out = dir.path().join("out");
    let o = pseudoiid(&["sample", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("sample_0_30x30.csv")).unwrap();
    assert_eq!(csv.lines().count(), 181);
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(out.join("sample.json")).unwrap()).unwrap();
    assert_eq!(meta["matrices"][0]["nnz"], 180);
    assert_eq!(meta["schema_version"], 1);
}

#[test]
fn reruns_are_byte_identical_and_seeds_matter() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BLOCK_SPARSE);
    let read = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = pseudoiid(&["sample", "--config", &cfg, "--seed", seed, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        fs::read(out.join("sample_0_30x30.csv")).unwrap()
    };
    assert_eq!(read("a", "9"), read("b", "9"));
    assert_ne!(read("a", "9"), read("c", "10"));
}

#[test]
fn missing_block_is_a_config_error_with_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BLOCK_SPARSE);
    let o = pseudoiid(&["eoc", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_json(&o);
    assert_eq!(e["error"]["kind"], "config");
    assert_eq!(e["error"]["path"], "eoc");
}

#[test]
fn missing_nested_key_reports_the_dotted_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[sample]\nspec = { family = { kind = \"iid_gaussian\" } }\ndims = [[2, 2]]\n");
    let o = pseudoiid(&["sample", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_json(&o);
    assert_eq!(e["error"]["path"], "sample.spec");
    assert!(e["error"]["message"].as_str().unwrap().contains("sigma_w2"));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[eoc]\nactivation = \"tanh\"\nsigma_b2 = [0.0]\ncolour = 3\n");
    let o = pseudoiid(&["eoc", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_json(&o)["error"]["message"].as_str().unwrap().contains("colour"));
}

#[test]
fn flag_errors_exit_with_config_code() {
    assert_eq!(pseudoiid(&["sample"]).status.code(), Some(2));
    assert_eq!(pseudoiid(&["sample", "--preset", "fig7", "--trials", "0"]).status.code(), Some(2));
    assert_eq!(pseudoiid(&["sample", "--preset", "nope"]).status.code(), Some(2));
    assert_eq!(pseudoiid(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(pseudoiid(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_failures_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    // A file where the output directory should go.
    let blocker = dir.path().join("taken");
    fs::write(&blocker, "x").unwrap();
    let o = pseudoiid(&["sample", "--preset", "fig7", "--out", blocker.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["error"]["kind"], "runtime");
}

#[test]
fn eoc_rows_for_tanh_and_relu() {
    let dir = tempfile::tempdir().unwrap();
    for (act, want) in [("tanh", 1.0), ("relu", 2.0)] {
        let cfg = write_config(dir.path(), &format!("[eoc]\nactivation = \"{act}\"\nsigma_b2 = [0.0]\n"));
        let out = dir.path().join(act);
        let o = pseudoiid(&["eoc", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let mut rdr = csv::Reader::from_path(out.join("eoc.csv")).unwrap();
        let row = rdr.records().next().unwrap().unwrap();
        let sigma_w2: f64 = row[1].parse().unwrap();
        assert!((sigma_w2 - want).abs() < 1e-4, "{act}: {sigma_w2}");
    }
}

#[test]
fn toy_posterior_writes_mean_and_variance() {
    let dir = tempfile::tempdir().unwrap();
    let o = pseudoiid(&["posterior", "--preset", "toy", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("posterior.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("index,mean,variance"));
    assert_eq!(text.lines().count(), 41);
}

#[test]
fn check_writes_one_curve_per_subject() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
[check]
budget = { n_list = [8, 16], trials = 1000 }

[[check.subjects]]
label = "gaussian"
spec = { family = { kind = "iid_gaussian" }, sigma_w2 = 1.0 }

[[check.subjects]]
control = { kind = "identical_coordinates", sigma_w2 = 1.0 }
"#,
    );
    let out = dir.path().join("out");
    let o = pseudoiid(&["check", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let files: Vec<&str> = summary["files"].as_array().unwrap().iter().map(|f| f.as_str().unwrap()).collect();
    assert_eq!(files.iter().filter(|f| f.starts_with("curve_")).count(), 2);
    let curve = fs::read_to_string(out.join(files.iter().find(|f| f.starts_with("curve_0")).unwrap())).unwrap();
    assert_eq!(curve.lines().next(), Some("n,estimate,stderr"));
    assert_eq!(curve.lines().count(), 3);
}

#[test]
fn check_rejects_ambiguous_subjects() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
[[check.subjects]]
spec = { family = { kind = "iid_gaussian" }, sigma_w2 = 1.0 }
control = { kind = "all_ones", sigma_w2 = 1.0 }
"#,
    );
    let o = pseudoiid(&["check", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"]["path"], "check.subjects[0]");
}

#[test]
fn compare_reports_fit_per_probe() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
[compare]
architecture = "fcn"
activation = "tanh"
depth = 2
widths = [40]
inputs = { kind = "sphere", dim = 5, count = 1 }
probes = [{ layer = 2, index = 0 }, { layer = 2, index = 1 }]
trials = 400
families = [{ family = { kind = "haar_orthogonal" }, sigma_w2 = 2.0 }]
"#,
    );
    let out = dir.path().join("out");
    let o = pseudoiid(&["compare", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let tag = "0_haar_orthogonal_w40";
    for f in [format!("ensemble_{tag}.csv"), format!("hist_{tag}_p1.csv"), format!("qq_{tag}_p0.csv")] {
        assert!(out.join(&f).exists(), "{f}");
    }
    let r: serde_json::Value = serde_json::from_slice(&fs::read(out.join(format!("compare_{tag}.json"))).unwrap()).unwrap();
    assert_eq!(r["marginal"].as_array().unwrap().len(), 2);
    assert_eq!(r["joint"]["target_covariance"][0][1], 0.0);
    assert!(r["independence"]["correlation"].is_number());
}
