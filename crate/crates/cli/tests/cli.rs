use std::path::Path;
use std::process::{Command, Output};

fn sfdma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sfdma")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const BLOBS: &str = r#"{
  "task": "inference", "users": 2, "bits": 8, "train_snr_db": 10, "powers": [1, 1],
  "epochs": 1, "batch_size": 32, "seed": 2,
  "dataset": { "kind": "blobs", "train": { "samples": 400, "classes": 3, "dim": 6, "separation": 6, "sigma": 1 }, "test_samples": 90 },
  "output_dir": "unused"
}"#;

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(str::to_owned).collect()
}

#[test]
fn train_then_sweep_writes_expected_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.json", BLOBS);
    let out = tmp.path().join("out");
    let o = out.to_str().unwrap();
    assert!(sfdma(&["train", "--config", &cfg, "--out", o]).status.success());
    assert!(out.join("checkpoint.json").exists());
    let metrics = lines(&out.join("metrics.csv"));
    assert_eq!(metrics[0], "epoch,user,ce,hyx,hxs,total,accuracy");
    assert_eq!(metrics.len(), 1 + 2);

    let s = sfdma(&["sweep", "--config", &cfg, "--out", o, "--snr-min", "-5", "--snr-max", "5", "--step", "5"]);
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    let sweep = lines(&out.join("sweep.csv"));
    assert_eq!(sweep[0], "snr_db,user,accuracy_pct");
    assert_eq!(sweep.len(), 1 + 3 * 2);
    for row in &sweep[1..] {
        let acc: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert!((0.0..=100.0).contains(&acc));
    }

    assert!(sfdma(&["xdecode", "--config", &cfg, "--out", o]).status.success());
    assert_eq!(lines(&out.join("crossdecode.csv")).len(), 1 + 4);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("xdecode_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "xdecode");
}

#[test]
fn seed_override_changes_the_model() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.json", BLOBS);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(sfdma(&["train", "--config", &cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(sfdma(&["train", "--config", &cfg, "--out", b.to_str().unwrap(), "--seed", "3"]).status.success());
    assert_ne!(std::fs::read(a.join("checkpoint.json")).unwrap(), std::fs::read(b.join("checkpoint.json")).unwrap());
}

#[test]
fn bad_configs_exit_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let unknown = config(tmp.path(), "u.json", &BLOBS.replace("\"seed\": 2", "\"seed\": 2, \"colour\": 1"));
    let o = sfdma(&["train", "--config", &unknown, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));

    let missing = config(
        tmp.path(),
        "m.json",
        &BLOBS.replace(r#"{ "kind": "blobs", "train": { "samples": 400, "classes": 3, "dim": 6, "separation": 6, "sigma": 1 }, "test_samples": 90 }"#, r#"{ "kind": "mnist", "path": "/nonexistent/mnist" }"#),
    );
    assert_eq!(sfdma(&["train", "--config", &missing, "--out", tmp.path().to_str().unwrap()]).status.code(), Some(2));

    let powers = config(tmp.path(), "p.json", &BLOBS.replace("[1, 1]", "[1]"));
    assert_eq!(sfdma(&["train", "--config", &powers, "--out", tmp.path().to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn unreachable_accuracy_target_exits_with_code_4() {
    let tmp = tempfile::tempdir().unwrap();
    let trace = config(tmp.path(), "t.csv", "t,g_ii,interference_power,sigma2\n0,1,0.1,0.1\n");
    let out = tmp.path().join("p");
    let o = sfdma(&["power", &trace, "--out", out.to_str().unwrap(), "--eta", "95"]);
    assert_eq!(o.status.code(), Some(4));
    let ok = sfdma(&["power", &trace, "--out", out.to_str().unwrap(), "--eta", "80"]);
    assert!(ok.status.success());
    let rows = lines(&out.join("power.csv"));
    let acc: f64 = rows[1].rsplit(',').next().unwrap().parse().unwrap();
    assert!((acc - 80.0).abs() < 1e-9);
}

#[test]
fn fit_then_outage_uses_the_fitted_model() {
    let tmp = tempfile::tempdir().unwrap();
    let mut data = String::from("sinr_db,accuracy_pct\n");
    for k in 0..15 {
        let s = 10f64.powf(-2.0 + 3.0 * k as f64 / 14.0);
        data.push_str(&format!("{},{}\n", 10.0 * s.log10(), 90.0 - 70.0 / (1.0 + (5.0 * s).powf(1.5))));
    }
    let input = config(tmp.path(), "d.csv", &data);
    let fit = tmp.path().join("fit");
    assert!(sfdma(&["fit-abg", &input, "--out", fit.to_str().unwrap()]).status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fit.join("fit.json")).unwrap()).unwrap();
    assert!((report["params"]["alpha"].as_f64().unwrap() - 90.0).abs() < 1e-6);

    let out = tmp.path().join("o");
    let abg = fit.join("fit.json");
    let args =
        ["outage", "--out", out.to_str().unwrap(), "--eta", "85", "--trials", "5000", "--abg", abg.to_str().unwrap()];
    assert!(sfdma(&args).status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("outage_summary.json")).unwrap()).unwrap();
    assert!((summary["params"]["alpha"].as_f64().unwrap() - 90.0).abs() < 1e-6);
    let policies = summary["policies"].as_array().unwrap();
    assert_eq!(policies.len(), 2);
    assert_eq!(policies[1]["outage"].as_f64(), Some(0.0));
    assert_eq!(lines(&out.join("outage_cdf_fixed.csv")).len(), 1 + 5000);
}
