use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn conical(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conical")).args(args).output().expect("spawn conical")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("cfg.toml");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Smaller profile grid and a coarse ε so a full pipeline run is quick.
const QUICK: &str = r#"
eps = [4e-2]

[pipeline]
profile_n = 128
profile_half_width = 10.0
"#;

#[test]
fn lz_table_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lz");
    let o = conical(&["run", "--scenario", "lz-table", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("lz_table.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("z,a,b_abs2,sum"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 121);
    for r in &rows {
        assert!((r[3] - 1.0).abs() < 1e-11);
        assert!((r[1] * r[1] - (-std::f64::consts::PI * r[0] * r[0]).exp()).abs() < 1e-12);
    }
    assert!(out.join("summary.json").exists());
}

#[test]
fn crossing_summary_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let out = dir.path().join("run");
    let out_s = out.to_str().unwrap();
    let o = conical(&["--config", &cfg, "--scenario", "isotropic-crossing", "--out", out_s]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("transferred mass"));
    let names = ["summary.json", "masses.csv", "transfer_4e-2.csv", "u_in_4e-2.bin", "u_plus_4e-2.bin", "u_minus_4e-2.bin"];
    let first: Vec<Vec<u8>> = names.iter().map(|n| fs::read(out.join(n)).unwrap()).collect();

    let json: serde_json::Value = serde_json::from_slice(&first[0]).unwrap();
    let run = &json["runs"][0];
    let m = run["transferred_mass"].as_f64().unwrap();
    assert!(m > 0.0 && m < 1.0);
    assert_eq!(run["transition"]["start"], "minus");
    assert!((run["transition"]["mass_plus_out"].as_f64().unwrap() - m).abs() < 1e-15);

    let o = conical(&["--config", &cfg, "--out", out_s]);
    assert!(o.status.success());
    for (n, bytes) in names.iter().zip(&first) {
        assert_eq!(&fs::read(out.join(n)).unwrap(), bytes, "{n} differs between runs");
    }
}

#[test]
fn validate_reports_ratios() {
    let o = conical(&["--validate", "--eps", "1e-2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    for name in ["sqrt(eps)/delta", "delta^3/eps", "eps^1.5/delta^4", "alpha/sqrt(eps)"] {
        assert!(s.contains(name), "{name} missing from\n{s}");
    }
    assert!(s.contains("validation passed"));
}

#[test]
fn validate_rejects_wide_window() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "delta = 0.9\neps = [1e-2]\n");
    let o = conical(&["validate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("delta^3/eps"));
    // a run refuses the same regime before computing anything
    let out = dir.path().join("never");
    let o = conical(&["--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!out.exists());
}

#[test]
fn validate_warns_on_large_gap() {
    let dir = tempfile::tempdir().unwrap();
    // α ≈ 1 = 10√ε at ε = 1e-2
    let cfg = write_config(dir.path(), "eps = [1e-2]\n[potential]\nid = \"shifted-linear\"\nalpha0 = 1.0\n");
    let o = conical(&["--validate", "--config", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let line = stdout(&o).lines().find(|l| l.contains("alpha/sqrt(eps)")).unwrap().to_string();
    assert!(line.contains("warn"), "{line}");
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        "eps = [0.7]\n",
        "scenario = \"nope\"\n",
        "unknown_key = 1\n",
        "eps = [1e-2\n",
        "[potential]\nid = \"quartic\"\n",
        "delta = \"fast\"\n",
    ] {
        let cfg = write_config(dir.path(), body);
        let o = conical(&["--validate", "--config", &cfg]);
        assert_eq!(o.status.code(), Some(2), "{body}: {}", stderr(&o));
    }
    let o = conical(&["--config", "/nonexistent/cfg.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let o = conical(&["--eps", "abc"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    // too short a horizon to reach the gap minimum
    let cfg = write_config(dir.path(), "[pipeline]\nhorizon = 0.1\n");
    let o = conical(&["--validate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn print_config_round_trips() {
    let o = conical(&["--print-config", "--scenario", "convergence", "--eps", "4e-2,2e-2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &text);
    let again = conical(&["--print-config", "--config", &cfg]);
    assert_eq!(stdout(&again), text);
    assert!(text.contains("scenario = \"convergence\""));
}
