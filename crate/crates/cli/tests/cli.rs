use std::path::Path;
use std::process::{Command, Output};

fn mtqed(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtqed"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn estimate_check_passes_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = mtqed(dir.path(), &["estimate", "--check", "--out", "est.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("est.json")).unwrap()).unwrap();
    let lam = &v["quantities"]["lambda_MT"];
    assert_eq!(lam["pass"], true);
    let x: f64 = lam["value"].to_string().parse().unwrap();
    assert!(x > 1.5e11 && x < 6e11);
    assert!(v["flags"]["e_vac_mismatch"].is_string());
}

#[test]
fn estimate_gate_failure_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    // a hundredfold volume pushes the lifetime outside its window
    let o = mtqed(
        dir.path(),
        &["estimate", "--check", "--set", "volume=5e-20 m^3", "--out", "est.json"],
    );
    assert_eq!(code(&o), 4);
    let o = mtqed(
        dir.path(),
        &["estimate", "--set", "volume=5e-20 m^3", "--out", "est.json"],
    );
    assert_eq!(code(&o), 0);
}

#[test]
fn unit_rules_give_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&mtqed(dir.path(), &["estimate", "--set", "t_r=1e-4"])), 2);
    assert_eq!(code(&mtqed(dir.path(), &["spectrum", "--set", "lambda=1 s"])), 2);
    assert_eq!(code(&mtqed(dir.path(), &["spectrum", "--set", "nonsense=1"])), 2);
    assert_eq!(code(&mtqed(dir.path(), &["spectrum", "--config", "missing.cfg"])), 2);
}

#[test]
fn solver_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = mtqed(
        dir.path(),
        &[
            "soliton",
            "--set",
            "roots=-1,0.2,1",
            "--set",
            "rho_lo=1",
            "--set",
            "rho_hi=2",
        ],
    );
    assert_eq!(code(&o), 3);
}

#[test]
fn config_file_and_symmetric_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("s.cfg"),
        "# resonant single emitter\nomega0 = 3\nlambda = 1\nN = 1\ngamma = 0.1\npoints = 1201\n",
    )
    .unwrap();
    let o = mtqed(dir.path(), &["spectrum", "--config", "s.cfg", "--out", "s.csv"]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    let max_left = rows
        .iter()
        .filter(|r| r.0 < 3.0)
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let max_right = rows
        .iter()
        .filter(|r| r.0 > 3.0)
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    assert!((max_left.0 + max_right.0 - 6.0).abs() < 1e-9);
}

#[test]
fn sweep_then_report_recovers_sqrt_law() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = [
        "sweep",
        "--set",
        "command=spectrum",
        "--set",
        "mode=numeric",
        "--set",
        "sweep_key=N",
        "--set",
        "sweep_values=1,4,9,16",
        "--out",
        "sweep.csv",
    ];
    assert_eq!(code(&mtqed(dir.path(), &sweep)), 0);
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert_eq!(
        code(&mtqed(dir.path(), &["cat", "--set", "points=4", "--out", "cat.csv"])),
        0
    );
    assert_eq!(
        code(&mtqed(
            dir.path(),
            &["report", "sweep.csv", "cat.csv", "--out", "r1.json"]
        )),
        0
    );
    assert_eq!(
        code(&mtqed(
            dir.path(),
            &["report", "sweep.csv", "cat.csv", "--out", "r2.json"]
        )),
        0
    );
    let r1 = std::fs::read(dir.path().join("r1.json")).unwrap();
    assert_eq!(r1, std::fs::read(dir.path().join("r2.json")).unwrap());
    let v: serde_json::Value = serde_json::from_slice(&r1).unwrap();
    let e: f64 = v["fits"]["splitting_vs_N"]["exponent"].to_string().parse().unwrap();
    assert!((e - 0.5).abs() < 0.01);
    let d: f64 = v["fits"]["rate_vs_D"]["exponent"].to_string().parse().unwrap();
    assert!((d - 2.0).abs() < 0.1);
    assert_eq!(v["pass"], true);
}

#[test]
fn report_rejects_empty_and_foreign_inputs() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&mtqed(dir.path(), &["report"])), 2);
    std::fs::write(dir.path().join("x.csv"), "a,b\n1,2\n").unwrap();
    assert_eq!(code(&mtqed(dir.path(), &["report", "x.csv"])), 2);
}

#[test]
fn outputs_are_reproducible_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let base = [
        "sweep",
        "--set",
        "command=cat",
        "--set",
        "sweep_key=n_avg",
        "--set",
        "sweep_values=4,6",
        "--set",
        "points=3",
    ];
    let mut one = base.to_vec();
    one.extend(["--jobs", "1", "--out", "a.csv"]);
    let mut many = base.to_vec();
    many.extend(["--jobs", "4", "--out", "b.csv"]);
    assert_eq!(code(&mtqed(dir.path(), &one)), 0);
    assert_eq!(code(&mtqed(dir.path(), &many)), 0);
    assert_eq!(
        std::fs::read(dir.path().join("a.csv")).unwrap(),
        std::fs::read(dir.path().join("b.csv")).unwrap()
    );
}

#[test]
fn evolve_and_soliton_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = mtqed(
        dir.path(),
        &["evolve", "--set", "t_max=2", "--set", "samples=5", "--out", "e.csv"],
    );
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("e.csv")).unwrap();
    assert!(text.starts_with("t,photons,sz,excitation,trace,purity,min_eigenvalue\n"));
    let o = mtqed(dir.path(), &["soliton", "--out", "k.csv"]);
    assert_eq!(code(&o), 0);
    assert!(std::fs::read_to_string(dir.path().join("k.csv"))
        .unwrap()
        .starts_with("xi,u,uprime\n"));
}
