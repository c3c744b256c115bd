use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn inn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inn")).args(args).env_remove("INN_SEED").output().expect("spawn inn")
}

fn ok_json(args: &[&str]) -> Value {
    let out = inn(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn identity_grid(path: &Path, d: usize, n: usize) {
    let mut y = Vec::new();
    for i in 0..n.pow(d as u32) {
        let mut rest = i;
        let mut x = vec![0.0; d];
        for k in (0..d).rev() {
            x[k] = (rest % n) as f64 / n as f64;
            rest /= n;
        }
        y.extend(x);
    }
    fs::write(path, serde_json::json!({ "d": d, "n": n, "y": y }).to_string()).unwrap();
}

#[test]
fn help_lists_flags_with_defaults() {
    for (cmd, flag) in [
        ("construct", "--lifted"),
        ("rate-study", "--n-list"),
        ("pde-gen", "--cells"),
        ("pca", "--n-train"),
        ("train", "--c0"),
        ("eval", "--fnn"),
        ("verify", "--probes"),
    ] {
        let out = inn(&[cmd, "--help"]);
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.contains(flag), "{cmd} help lacks {flag}");
        assert!(text.contains("--seed") && text.contains("--threads"));
    }
    let text = String::from_utf8(inn(&["train", "--help"]).stdout).unwrap();
    assert!(text.contains("[default: 0.001]") && text.contains("[default: 20000]"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(inn(&["construct", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(inn(&["frobnicate"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"d":2,"n":2,"y":[0,0,1]}"#).unwrap();
    assert_eq!(inn(&["construct", "--grid", s(&bad)]).status.code(), Some(2));
    fs::write(&bad, "not json").unwrap();
    assert_eq!(inn(&["construct", "--grid", s(&bad)]).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(inn(&["construct", "--grid", s(&missing)]).status.code(), Some(2));
    assert_eq!(inn(&["pca", "--data", s(&missing), "--out-dir", s(dir.path())]).status.code(), Some(2));
}

#[test]
fn construct_identity_grid() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.json");
    identity_grid(&grid, 2, 4);
    let model = dir.path().join("m.json");
    let r = ok_json(&["construct", "--grid", s(&grid), "--eps", "0.25", "--out", s(&model)]);
    assert!(r["residual"].as_f64().unwrap() <= 0.25);
    assert!(r["certificate"]["product_forward"].as_f64().unwrap().is_finite());
    assert!(r["certificate"]["product_inverse"].as_f64().unwrap().is_finite());
    assert_eq!(inn(&["verify", "--model", s(&model), "--pairs", "2000"]).status.code(), Some(0));

    let lifted = dir.path().join("l.json");
    let r = ok_json(&["construct", "--grid", s(&grid), "--lifted", "--out", s(&lifted)]);
    assert!(r["residual"].as_f64().unwrap() <= 1e-10);
    assert_eq!(r["layers"].as_u64().unwrap(), 4 + 2 * 16);
}

#[test]
fn synthetic_construct_with_hr() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("g.json");
    let r = ok_json(&["construct", "--synthetic", "random", "--d", "3", "--n", "2", "--r", "0.9", "--save-grid", s(&grid)]);
    assert!(r["residual"].as_f64().unwrap() < 0.5);
    assert_eq!(r["r"].as_f64(), Some(0.9));
    let g: Value = serde_json::from_str(&fs::read_to_string(&grid).unwrap()).unwrap();
    assert_eq!(g["y"].as_array().unwrap().len(), 3 * 8);
}

#[test]
fn verify_flags_lifted_kill_layer() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("l.json");
    ok_json(&["construct", "--synthetic", "sine", "--n", "4", "--lifted", "--out", s(&model)]);
    let out = inn(&["verify", "--model", s(&model), "--pairs", "1000", "--probes", "200"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    let failing: Vec<&str> = text.lines().filter(|l| l.starts_with("FAIL")).collect();
    assert!(!failing.is_empty());
    assert!(failing.iter().all(|l| l.contains("kill_last")), "{failing:?}");
    assert!(text.contains("PASS round trip"));
}

#[test]
fn rate_study_csv_format() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rate.csv");
    let svg = dir.path().join("rate.svg");
    let out = inn(&["rate-study", "--fn", "sine", "--n-list", "4,8,16", "--samples", "500", "--out", s(&csv), "--plot", s(&svg)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,err_fwd,err_inv,bound_fwd,bound_inv,slope"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert_eq!(r.len(), 6);
        assert!(r[1] <= r[3], "empirical error above bound: {r:?}");
    }
    assert!(rows.iter().all(|r| r[5] == rows[0][5]));
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    assert_eq!(inn(&["rate-study", "--n-list", "8,4,16"]).status.code(), Some(2));
}

#[test]
fn pde_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let data = p("ds.json");
    let pca_dir = p("pca");
    let r = ok_json(&["pde-gen", "--m", "160", "--cells", "8", "--out", s(&data)]);
    assert_eq!(r["d_out"].as_u64(), Some(81));
    let manifest: Value = serde_json::from_str(&fs::read_to_string(&data).unwrap()).unwrap();
    for key in ["M", "d_in", "d_out", "seed", "h", "dtype"] {
        assert!(manifest.get(key).is_some(), "manifest lacks {key}");
    }
    assert_eq!(manifest["dtype"], "f64le");

    let split = ["--n-train", "60", "--n-test", "80", "--d", "4"];
    let mut args = vec!["pca", "--data", s(&data), "--out-dir", s(&pca_dir)];
    args.extend(split);
    let r = ok_json(&args);
    assert!(r["y"]["energy_fraction"].as_f64().unwrap() > 0.99);
    for f in ["basis_x.json", "basis_y.json", "weights.json", "report.json"] {
        assert!(p("pca").join(f).exists());
    }

    let run = p("run");
    let mut args = vec![
        "train",
        "--data",
        s(&data),
        "--pca-dir",
        s(&pca_dir),
        "--steps",
        "60",
        "--record-every",
        "20",
        "--hidden",
        "8",
        "--out-dir",
        s(&run),
    ];
    args.extend(split);
    let info = ok_json(&args);
    assert_eq!(info["steps"].as_u64(), Some(60));
    let hist = fs::read_to_string(run.join("history.csv")).unwrap();
    assert_eq!(hist.lines().next(), Some("step,loss,e_a_fwd,e_g_fwd,e_a_inv,e_g_inv"));
    assert_eq!(hist.lines().count(), 1 + 4);

    let rows = ok_json(&["eval", "--data", s(&data), "--run", s(&run), "--fnn", "--fnn-steps", "30", "--json"]);
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["model"], "INN");
    assert_eq!(rows[1]["model"], "FNN");
    let best = info["best_fwd_e_g"].as_f64().unwrap();
    assert!((rows[0]["e_g_fwd"].as_f64().unwrap() - best).abs() <= 1e-12 * best.max(1.0));

    for ck in ["best_fwd.json", "best_inv.json", "final.json"] {
        let out = inn(&["verify", "--model", s(&run.join(ck)), "--data", s(&data)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    }
}

#[test]
fn seeded_outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let gen = |name: &str, extra: &[&str]| {
        let mut args = vec!["pde-gen", "--m", "40", "--cells", "8", "--out"];
        let path = p(name);
        args.push(s(&path));
        args.extend(extra);
        assert!(inn(&args).status.success());
        fs::read(p(name).with_extension("bin")).unwrap()
    };
    let a = gen("a.json", &["--seed", "3"]);
    let b = gen("b.json", &["--seed", "3", "--threads", "1"]);
    let c = gen("c.json", &["--seed", "4"]);
    assert_eq!(a, b);
    assert_ne!(a, c);

    let e = p("e.json");
    let env_out = Command::new(env!("CARGO_BIN_EXE_inn"))
        .args(["pde-gen", "--m", "40", "--cells", "8", "--out", s(&e)])
        .env("INN_SEED", "3")
        .output()
        .unwrap();
    assert!(env_out.status.success());
    assert_eq!(fs::read(p("e.bin")).unwrap(), a);

    let a_json = p("a.json");
    let train = |out: &str| {
        let out_dir = p(out);
        let o = inn(&[
            "train",
            "--data",
            s(&a_json),
            "--n-train",
            "20",
            "--n-test",
            "20",
            "--d",
            "4",
            "--steps",
            "30",
            "--record-every",
            "10",
            "--hidden",
            "8",
            "--out-dir",
            s(&out_dir),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (fs::read(p(out).join("final.bin")).unwrap(), fs::read(p(out).join("history.csv")).unwrap())
    };
    assert_eq!(train("r1"), train("r2"));
}
