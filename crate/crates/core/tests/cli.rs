use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_seqattack"));
    cmd.env_remove("SEQATTACK_WORKERS");
    cmd
}

fn write(dir: &Path, name: &str, json: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(json).unwrap()).unwrap();
    path
}

fn run(args: &[&str], config: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn evaluate_config(strategy: Value, mu_alpha: f64, policy: Value) -> Value {
    serde_json::json!({
        "source": { "mu_alpha": mu_alpha },
        "strategy": strategy,
        "policy": policy,
    })
}

#[test]
fn evaluate_full_strength_med() {
    let dir = TempDir::new().unwrap();
    let cfg = evaluate_config(
        serde_json::json!({ "kind": "med", "lambda": 1.0 }),
        0.16,
        serde_json::json!({ "block_len": 5, "send_prob": 0.5, "mu_beta": 1.0 }),
    );
    let out = run(&["evaluate"], &write(dir.path(), "c.json", &cfg));
    assert_eq!(out.status.code(), Some(0));
    let rec = stdout_json(&out);
    let q = rec["result"]["qber"].as_f64().unwrap();
    assert!((q - (-0.64f64).exp() / 2.0).abs() < 1e-12);
    assert_eq!(rec["input"]["strategy"]["lambda"], 1.0);
    assert_eq!(rec["timestamp"], Value::Null);
}

#[test]
fn evaluate_zero_success_is_undefined() {
    let dir = TempDir::new().unwrap();
    let cfg = evaluate_config(
        serde_json::json!({ "kind": "usd" }),
        0.0,
        serde_json::json!({ "block_len": 5, "send_prob": 0.5, "mu_beta": 1.0 }),
    );
    let out = run(&["evaluate"], &write(dir.path(), "c.json", &cfg));
    assert_eq!(out.status.code(), Some(0));
    let rec = stdout_json(&out);
    assert_eq!(rec["result"]["qber"], "undefined");
    assert_eq!(rec["result"]["gain"], 0.0);
}

#[test]
fn evaluate_max_gain_matches_library() {
    let dir = TempDir::new().unwrap();
    let cfg = evaluate_config(
        serde_json::json!({ "kind": "usd" }),
        0.16,
        serde_json::json!({ "block_len": 3, "min_run": 2, "send_prob": 1.0, "mu_beta": 50.0 }),
    );
    let out = run(&["evaluate"], &write(dir.path(), "c.json", &cfg));
    let rec = stdout_json(&out);
    let p_succ = 1.0 - (-0.32f64).exp();
    let want = seqattack::block_analytics::max_gain_point(p_succ).unwrap();
    assert!((rec["result"]["gain"].as_f64().unwrap() - want.gain).abs() < 1e-6);
    assert!((rec["result"]["qber"].as_f64().unwrap() - want.qber.value().unwrap()).abs() < 1e-6);
    assert!((rec["result"]["dc"].as_f64().unwrap() - want.dc).abs() < 1e-6);
}

#[test]
fn config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let bad = serde_json::json!({ "source": { "mu_alpha": 0.16 }, "colour": "blue" });
    let out = run(&["evaluate"], &write(dir.path(), "bad.json", &bad));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    let out = run(&["evaluate"], &dir.path().join("missing.json"));
    assert_eq!(out.status.code(), Some(2));

    let no_policy = serde_json::json!({ "source": { "mu_alpha": 0.16 }, "strategy": { "kind": "usd" } });
    let out = run(&["evaluate"], &write(dir.path(), "np.json", &no_policy));
    assert_eq!(out.status.code(), Some(2));

    let bad_lambda = evaluate_config(
        serde_json::json!({ "kind": "med", "lambda": 0.01 }),
        0.16,
        serde_json::json!({ "block_len": 5, "send_prob": 0.5, "mu_beta": 1.0 }),
    );
    let out = run(&["evaluate"], &write(dir.path(), "bl.json", &bad_lambda));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verb_overrides_config_command() {
    let dir = TempDir::new().unwrap();
    let mut cfg = evaluate_config(
        serde_json::json!({ "kind": "usd" }),
        0.16,
        serde_json::json!({ "block_len": 5, "send_prob": 0.5, "mu_beta": 1.0 }),
    );
    cfg["command"] = "simulate".into();
    let path = write(dir.path(), "c.json", &cfg);
    let out = run(&["evaluate"], &path);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["command"], "evaluate");
    // Without a verb the config decides: simulate lacks its section.
    let out = run(&[], &path);
    assert_eq!(out.status.code(), Some(2));
}

fn simulate_config(n_blocks: u64) -> Value {
    serde_json::json!({
        "source": { "mu_alpha": 0.16 },
        "strategy": { "kind": "usd" },
        "policy": { "block_len": 5, "min_run": 3, "send_prob": 0.5, "mu_beta": 0.8 },
        "simulation": { "n_blocks": n_blocks },
        "seed": 7,
    })
}

#[test]
fn simulate_agrees_with_evaluate() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "s.json", &simulate_config(200_000));
    let sim = stdout_json(&run(&["simulate"], &path));
    let eval = stdout_json(&run(&["evaluate"], &path));
    for key in ["gain", "qber", "dc"] {
        let mean = sim["result"][key]["mean"].as_f64().unwrap();
        let se = sim["result"][key]["stderr"].as_f64().unwrap();
        let want = eval["result"][key].as_f64().unwrap();
        assert!((mean - want).abs() <= 4.0 * se, "{key}: {mean} +- {se} vs {want}");
    }
}

#[test]
fn simulate_is_reproducible_and_seed_overridable() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "s.json", &simulate_config(20_000));
    let a = run(&["simulate", "--workers", "1"], &path);
    let b = run(&["simulate", "--workers", "3"], &path);
    assert_eq!(a.stdout, b.stdout);
    let env = bin()
        .args(["simulate", "--config"])
        .arg(&path)
        .env("SEQATTACK_WORKERS", "2")
        .output()
        .unwrap();
    assert_eq!(a.stdout, env.stdout);
    let c = run(&["simulate", "--seed", "8"], &path);
    assert_ne!(a.stdout, c.stdout);
    assert_eq!(stdout_json(&c)["seed"], 8);
}

#[test]
fn simulate_zero_blocks_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = run(&["simulate"], &write(dir.path(), "s.json", &simulate_config(0)));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_needs_a_seed() {
    let dir = TempDir::new().unwrap();
    let mut cfg = simulate_config(100);
    cfg.as_object_mut().unwrap().remove("seed");
    let path = write(dir.path(), "s.json", &cfg);
    assert_eq!(run(&["simulate"], &path).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--seed", "1"], &path).status.code(), Some(0));
}

#[test]
fn med_lower_end_simulates_usd_targets() {
    let dir = TempDir::new().unwrap();
    let mut cfg = simulate_config(1000);
    let usd = stdout_json(&run(&["simulate"], &write(dir.path(), "u.json", &cfg)));
    cfg["strategy"] = serde_json::json!({ "kind": "med", "lambda_fraction": 0.0 });
    let med = stdout_json(&run(&["simulate"], &write(dir.path(), "m.json", &cfg)));
    for key in ["gain", "qber", "dc"] {
        let a = usd["result"]["closed_form"][key].as_f64().unwrap();
        let b = med["result"]["closed_form"][key].as_f64().unwrap();
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300), "{key}");
    }
}

fn frontier_config(dc_cap: Value) -> Value {
    serde_json::json!({
        "source": { "mu_alpha": 0.16 },
        "sweep": { "family": "usd", "block_lens": [3, 4, 5, 6, 7, 8, 9, 10, 11, 12], "dc_cap": dc_cap },
    })
}

#[test]
fn frontier_csv_shape_and_assess_round_trip() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "f.json", &frontier_config(1e-8.into()));
    let csv_path = dir.path().join("front.csv");
    let out = bin()
        .args(["frontier", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(&csv_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rec = stdout_json(&out);
    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert!(text.starts_with("gain,qber,dc,M,M_min,q,mu_beta,lambda,strategy\n"));
    assert!(!text.contains('\r'));
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len() as u64, rec["result"]["points"].as_u64().unwrap());
    let gains: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(gains.windows(2).all(|w| w[0] < w[1]));
    assert!(rows.iter().all(|r| r[2].parse::<f64>().unwrap() <= 1e-8));
    let g_max = seqattack::block_analytics::max_gain_point(1.0 - (-0.32f64).exp()).unwrap().gain;
    assert!(*gains.last().unwrap() <= g_max);

    let top = *gains.last().unwrap();
    let assess = serde_json::json!({
        "source": { "mu_alpha": 0.16 },
        "assess": {
            "frontier_csv": "front.csv",
            "points": [
                { "label": "dominated", "gain": top / 2.0, "qber": 0.3 },
                { "label": "too-fast", "gain": top * 2.0, "qber": 0.3 },
            ],
        },
    });
    let out = run(&["assess"], &write(dir.path(), "a.json", &assess));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rec = stdout_json(&out);
    let res = &rec["result"];
    assert_eq!(res["assessments"][0]["verdict"], "INSECURE_AGAINST_SEQUENTIAL");
    assert!(res["assessments"][0]["dominating"].is_object());
    assert_eq!(res["assessments"][1]["verdict"], "NOT_EXCLUDED");
    assert!(res["reconstruction"]["max_rel_diff"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn frontier_is_byte_identical_across_runs_and_workers() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "f.json", &frontier_config(1e-10.into()));
    let a = run(&["frontier", "--workers", "1"], &path);
    let b = run(&["frontier", "--workers", "4"], &path);
    let c = run(&["frontier"], &path);
    assert_eq!(a.status.code(), Some(0));
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn empty_frontier_exit_3() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "f.json", &frontier_config(0.0.into()));
    let out = run(&["frontier"], &path);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(String::from_utf8_lossy(&out.stdout), "gain,qber,dc,M,M_min,q,mu_beta,lambda,strategy\n");
}

#[test]
fn malformed_csv_names_line() {
    let dir = TempDir::new().unwrap();
    std::fs::write(
        dir.path().join("bad.csv"),
        "gain,qber,dc,M,M_min,q,mu_beta,lambda,strategy\n0.1,0.01,0,5,3,1,1,,usd\n0.2,zzz,0,5,3,1,1,,usd\n",
    )
    .unwrap();
    let cfg = serde_json::json!({
        "assess": { "frontier_csv": "bad.csv", "points": [{ "label": "x", "gain": 0.1, "qber": 0.1 }] },
    });
    let out = run(&["assess"], &write(dir.path(), "a.json", &cfg));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn verify_exit_codes() {
    let dir = TempDir::new().unwrap();
    let full = bin().arg("verify").output().unwrap();
    assert_eq!(full.status.code(), Some(0), "{}", String::from_utf8_lossy(&full.stderr));
    let full_cells = stdout_json(&full)["result"]["cells"].as_u64().unwrap();

    let usd = serde_json::json!({ "verify": { "strategies": [{ "kind": "usd" }] } });
    let out = run(&["verify"], &write(dir.path(), "u.json", &usd));
    assert_eq!(out.status.code(), Some(0));
    let usd_cells = stdout_json(&out)["result"]["cells"].as_u64().unwrap();
    assert!(usd_cells < full_cells);

    let mutated = serde_json::json!({ "verify": { "tilde_p_err_scale": 1.01, "monte_carlo": null } });
    let out = run(&["verify"], &write(dir.path(), "m.json", &mutated));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL"));
}

#[test]
fn out_flag_writes_json() {
    let dir = TempDir::new().unwrap();
    let cfg = evaluate_config(
        serde_json::json!({ "kind": "bob_device" }),
        0.2,
        serde_json::json!({ "block_len": 5, "send_prob": 0.5, "mu_beta": 1.0 }),
    );
    let path = write(dir.path(), "c.json", &cfg);
    let out_path = dir.path().join("r.json");
    let out = bin()
        .args(["evaluate", "--timestamp", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let rec: Value = serde_json::from_str(&std::fs::read_to_string(out_path).unwrap()).unwrap();
    assert!(rec["timestamp"].as_u64().unwrap() > 0);
    assert_eq!(rec["result"]["strategy"]["kind"], "bob_device");
}
