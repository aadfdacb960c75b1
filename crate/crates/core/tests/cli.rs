use std::process::Command;

fn feec_sl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_feec-sl"))
}

#[test]
fn run_writes_energy_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# short run\nexp = exp1\nn = 4\ntau = 0.05\nT = 0.1\ngrid = 9\n").unwrap();
    let out = feec_sl()
        .args(["run", "--order", "1", "--conservative", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("steps=2"), "{stdout}");

    let energy = std::fs::read_to_string(dir.path().join("energy.csv")).unwrap();
    let rows: Vec<&str> = energy.lines().collect();
    assert_eq!(rows[0], "step,t,energy,dissipation,work,mu");
    assert_eq!(rows.len(), 4);
    let e: Vec<f64> = rows[1..].iter().map(|r| r.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert!((e[2] - e[0]).abs() <= 1e-10 * e[0]);

    let field = std::fs::read_to_string(dir.path().join("field_0.1000.csv")).unwrap();
    assert_eq!(field.lines().count(), 82);
    assert!(dir.path().join("errors.csv").exists());
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "exp = exp1\nn = 4\ntau = 0.05\nT = 0.05\norder = 2\ngrid = 3\n").unwrap();
    let out = feec_sl()
        .args(["run", "--exp", "exp3", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("exp3:"));
}

#[test]
fn converge_prints_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    std::fs::write(&cfg, "exp = exp1\nn = 4\ntau_per_h = 0.2\nT = 0.2\n").unwrap();
    let out = feec_sl()
        .args(["converge", "--order", "1", "--levels", "2", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("errors.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[2].split(',').nth(3).unwrap().parse::<f64>().is_ok());
}

#[test]
fn bad_input_exit_codes() {
    let out = feec_sl().args(["run", "--exp", "exp9"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "exp = exp1\ntau = -1\n").unwrap();
    let out = feec_sl().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = feec_sl()
        .args(["run", "--exp", "exp1", "--mesh"])
        .arg(dir.path().join("missing.mesh"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}
