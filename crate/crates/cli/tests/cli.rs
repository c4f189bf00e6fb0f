use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fungen::marketdata::load_market_csv;

fn fungen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fungen")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p
}

const BASE: &str = r#"
mode = "both"
seeds = [3]

[market.simulator]
d = 4
n_days = 300

[genfun]
name = "entropy"

[lambda]
kind = "constant"
value = 1.0
"#;

fn sorted_files(dir: &Path, suffix: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(suffix))
        .collect();
    v.sort();
    v
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn backtest_twice_gives_identical_series() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), BASE);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = fungen(&["backtest", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let fa = sorted_files(&a, ".csv");
    assert_eq!(fa.len(), 7, "{fa:?}");
    for f in &fa {
        let other = b.join(f.file_name().unwrap());
        assert_eq!(fs::read(f).unwrap(), fs::read(other).unwrap(), "{}", f.display());
    }
    let names: Vec<String> = fa.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    for stem in ["wealth", "gamma", "D", "E", "diversity", "ledger_additive", "ledger_multiplicative"] {
        assert!(names.iter().any(|n| n.ends_with(&format!("__{stem}.csv"))), "{stem}");
    }
    let summary = sorted_files(&a, "__summary.json");
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&summary[0]).unwrap()).unwrap();
    assert!(v["modes"]["additive"]["terminal_wealth"].as_f64().unwrap() > 0.0);
    assert!(v["metadata"]["created_at"].is_string());
    let ledger = fs::read_to_string(fa.iter().find(|p| p.to_string_lossy().ends_with("ledger_additive.csv")).unwrap())
        .unwrap();
    assert!(ledger.starts_with("day,theta_A01,theta_A02,theta_A03,theta_A04,phi_A01,"));
    assert!(ledger.lines().next().unwrap().ends_with(",C,v_begin,v_end,G,Gamma_defect,Gamma_closed"));
}

#[test]
fn multi_seed_fan_out_writes_aggregate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), BASE);
    let out = tmp.path().join("o");
    let o = fungen(&[
        "backtest",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "1",
        "2",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(sorted_files(&out, "__summary.json").len(), 3);
    let agg = sorted_files(&out, "__aggregate.json");
    assert_eq!(agg.len(), 1);
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&agg[0]).unwrap()).unwrap();
    assert_eq!(v["runs"].as_array().unwrap().len(), 3);
}

#[test]
fn small_c_near_the_boundary_asks_to_increase_c() {
    let tmp = tempfile::tempdir().unwrap();
    let body = r#"
mode = "multiplicative"
c = 0.0

[market.simulator]
d = 3
n_days = 200
vol = [0.0]

[genfun]
name = "quadratic"

[lambda]
kind = "exp_deterministic"
rate = -0.01
"#;
    let cfg = write_config(tmp.path(), body);
    let out = tmp.path().join("o");
    let o = fungen(&["backtest", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("increase c"), "{}", stderr(&o));

    let cfg = write_config(tmp.path(), &body.replace("c = 0.0", "c = 10.0"));
    let o = fungen(&["backtest", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn simulate_is_byte_stable_and_loads_back() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[market.simulator]\nd = 2\nn_days = 50\nseed = 9\n\n[genfun]\nname = \"entropy\"\n");
    let (a, b) = (tmp.path().join("a.csv"), tmp.path().join("b.csv"));
    for f in [&a, &b] {
        let o = fungen(&["simulate", "--config", cfg.to_str().unwrap(), "--out", f.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let text = fs::read_to_string(&a).unwrap();
    assert!(text.starts_with("date,asset_id,market_value,return_index,member\n"));
    let p = load_market_csv::<f64>(&a).unwrap();
    assert_eq!((p.n_days(), p.n_assets()), (50, 2));
}

#[test]
fn missing_corr_gives_uncorrelated_increments() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[market.simulator]\nd = 2\nn_days = 4000\nseed = 5\n\n[genfun]\nname = \"entropy\"\n");
    let f = tmp.path().join("m.csv");
    let o = fungen(&["simulate", "--config", cfg.to_str().unwrap(), "--out", f.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let p = load_market_csv::<f64>(&f).unwrap();
    let inc: Vec<(f64, f64)> = (1..p.n_days()).map(|l| (p.tr(l)[0].ln(), p.tr(l)[1].ln())).collect();
    let n = inc.len() as f64;
    let (ma, mb) = (inc.iter().map(|x| x.0).sum::<f64>() / n, inc.iter().map(|x| x.1).sum::<f64>() / n);
    let cov = inc.iter().map(|(a, b)| (a - ma) * (b - mb)).sum::<f64>() / n;
    let va = inc.iter().map(|(a, _)| (a - ma).powi(2)).sum::<f64>() / n;
    let vb = inc.iter().map(|(_, b)| (b - mb).powi(2)).sum::<f64>() / n;
    let rho = cov / (va * vb).sqrt();
    // 4 standard errors of a zero correlation
    assert!(rho.abs() < 4.0 / n.sqrt(), "rho = {rho}");
    assert!((va.sqrt() - 0.01).abs() < 1e-3);
}

#[test]
fn csv_market_source_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = write_config(tmp.path(), "[market.simulator]\nd = 3\nn_days = 80\n\n[genfun]\nname = \"entropy\"\n");
    let csv = tmp.path().join("market.csv");
    assert!(fungen(&["simulate", "--config", sim.to_str().unwrap(), "--out", csv.to_str().unwrap()]).status.success());
    let cfg = write_config(
        tmp.path(),
        "[market]\ncsv = \"market.csv\"\n\n[genfun]\nname = \"power_diversity\"\n\n[lambda]\nkind = \"moving_average\"\nwindow = 20\n",
    );
    let out = tmp.path().join("o");
    let o = fungen(&["backtest", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = fungen(&["verify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn verify_passes_by_default_and_catches_faults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), BASE);
    let out = tmp.path().join("o");
    let args = ["verify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    let o = fungen(&args);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    let text = stdout(&o);
    for suite in ["ledger_identity", "self_financing", "quadratic_oracle", "route_agreement", "gradient", "conditions"] {
        assert!(text.contains(&format!("PASS {suite}")), "{suite}\n{text}");
    }

    let o = fungen(&[&args[..], &["--inject-fault", "entropy-dg-sign"]].concat());
    assert!(!o.status.success());
    let text = stdout(&o);
    assert!(text.contains("FAIL ledger_identity"), "{text}");
    assert!(text.contains("FAIL gradient"), "{text}");

    let o = fungen(&[&args[..], &["--inject-fault", "convex-genfun"]].concat());
    assert!(!o.status.success());
    let text = stdout(&o);
    assert!(text.contains("FAIL conditions"), "{text}");
    assert!(text.contains("witness"), "{text}");
}

#[test]
fn config_errors_exit_with_code_two_and_field_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &BASE.replace("value = 1.0", "value = 1.0\nspeed = 2"));
    let o = fungen(&["backtest", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lambda"), "{}", stderr(&o));
}
