use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cqed-lmg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn out_arg(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn ground_sweep_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path(), "g.csv");
    let o = run(&[
        "ground-sweep",
        "--n",
        "10",
        "--h-min",
        "-2",
        "--h-max",
        "2",
        "--h-steps",
        "5",
        "--out",
        &out,
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = fs::read_to_string(&out).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert!(lines[0].starts_with("h_over_kappa,"));
    assert!(lines.len() > 5);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(format!("{out}.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["mode"], "ground-sweep");
    assert!(meta["columns"].is_array());
}

#[test]
fn invalid_configuration_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path(), "bad.csv");
    for args in [
        vec!["ground-sweep", "--n", "0"],
        vec!["bifurcation", "--gamma", "-1"],
        vec![
            "bifurcation",
            "--h-min",
            "-1",
            "--h-max",
            "1",
            "--h-steps",
            "1",
        ],
        vec!["ground-sweep", "--preset", "fig2a"],
        vec!["warp-drive"],
    ] {
        let mut args = args.clone();
        args.extend(["--out", out.as_str()]);
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!Path::new(&out).exists());
    }
}

#[test]
fn oversized_step_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path(), "t.csv");
    let o = run(&[
        "trajectory",
        "--h",
        "1",
        "--dt",
        "0.5",
        "--t-final",
        "1",
        "--out",
        &out,
    ]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "# bifurcation grid\ngamma = 0.2\nh_min = -1\nh_max = 1\nh_steps = 3\n",
    )
    .unwrap();
    let out = out_arg(dir.path(), "b.csv");
    let o = run(&[
        "bifurcation",
        "--config",
        cfg.to_str().unwrap(),
        "--h-steps",
        "5",
        "--out",
        &out,
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(format!("{out}.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["gamma"], 0.2);
    let csv = fs::read_to_string(&out).unwrap();
    let mut hs: Vec<_> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect();
    hs.dedup();
    assert_eq!(hs.len(), 5);

    fs::write(&cfg, "gamma = fast\n").unwrap();
    assert_eq!(
        run(&[
            "bifurcation",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            &out
        ])
        .status
        .code(),
        Some(2)
    );
    fs::write(&cfg, "colour = blue\n").unwrap();
    assert_eq!(
        run(&[
            "bifurcation",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            &out
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn pump_grid_converts_to_drive() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path(), "e.csv");
    let o = run(&[
        "bifurcation",
        "--gamma",
        "0.2",
        "--g0",
        "100",
        "--deltac",
        "2000",
        "--eta0-min",
        "0",
        "--eta0-max",
        "-1000",
        "--h-steps",
        "3",
        "--out",
        &out,
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = fs::read_to_string(&out).unwrap();
    let last_h: f64 = csv
        .lines()
        .last()
        .unwrap()
        .split(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    let expected = -2.0 * 100.0 * -1000.0 / (1.0 + 2000.0f64.powi(2));
    assert!((last_h - expected).abs() < 1e-10, "{last_h} vs {expected}");
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = out_arg(dir.path(), "a.csv");
    let b = out_arg(dir.path(), "b.csv");
    let args = ["trajectory", "--h", "0.5", "--t-final", "10"];
    for out in [&a, &b] {
        let mut v = args.to_vec();
        v.extend(["--out", out.as_str()]);
        assert_eq!(run(&v).status.code(), Some(0));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}
