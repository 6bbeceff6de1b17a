use std::path::Path;
use std::process::{Command, Output};

fn covland(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covland")).args(args).output().expect("run covland")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key))
        .unwrap_or_else(|| panic!("no '{key}' in\n{text}"))
        .trim()
        .parse()
        .unwrap()
}

fn last_row(path: &Path) -> Vec<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect()
}

#[test]
fn free_particle_localizes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fp.csv");
    let o = covland(&["simulate", "--preset", "fp-localization", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dq = field(&stdout(&o), "final dq[0]:");
    assert!((dq - 1.25).abs() < 1e-6, "dq = {dq}");
    assert!((last_row(&out)[1] - 1.25).abs() < 1e-6);
}

#[test]
fn trapped_packet_collapses() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cho.csv");
    let o = covland(&["simulate", "--preset", "cho-collapse", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let row = last_row(&out);
    assert!(row[1].abs() < 1e-12, "dq = {}", row[1]);
}

#[test]
fn confined_width_matches_diffusion() {
    let o = covland(&["simulate", "--preset", "qbm-confined"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let dq = field(&text, "final dq[0]:");
    let d = covland(&["diffusion", "--gamma", "1", "--omega", "1", "--temperature", "1"]);
    let width = field(&stdout(&d), "confined width gamma*D/omega^2 =");
    assert!((dq - width).abs() / width < 1e-4, "{dq} vs {width}");
}

#[test]
fn simulation_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        assert!(covland(&["simulate", "--preset", "einstein-diffusion", "--out", p.to_str().unwrap()]).status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn landscape_export_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        assert!(covland(&["landscape", "--preset", "landscape-trap", "--out", p.to_str().unwrap()]).status.success());
    }
    for label in ["bowl", "valley"] {
        let fa = dir.path().join(format!("a-{label}.csv"));
        let fb = dir.path().join(format!("b-{label}.csv"));
        assert_eq!(std::fs::read(&fa).unwrap(), std::fs::read(&fb).unwrap(), "{label}");
        assert!(dir.path().join(format!("a-{label}.toml")).exists());
    }
}

#[test]
fn free_particle_landscape_vanishes_on_zero_momentum_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fp.csv");
    let o = covland(&["landscape", "--mode", "fp", "--gamma", "1.5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("dq,dp,L"));
    let mut zero_row = 0;
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        if v[1] == 0.0 {
            zero_row += 1;
            assert!(v[2].abs() < 1e-12, "{line}");
        } else {
            assert!(v[2] > 0.0, "{line}");
        }
    }
    assert!(zero_row > 0);
    let sidecar = std::fs::read_to_string(dir.path().join("fp.toml")).unwrap();
    let table: toml::Table = sidecar.parse().unwrap();
    assert_eq!(table["mode"].as_str(), Some("fp"));
    assert_eq!(table["gamma"].as_float(), Some(1.5));
}

#[test]
fn diffusion_at_critical_damping() {
    let o = covland(&["diffusion", "--gamma", "2", "--omega", "1"]);
    assert!(o.status.success());
    let d = field(&stdout(&o), "D =");
    assert!((d - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-7, "{d}");
    assert!(stdout(&o).contains("regime = critical"));
}

#[test]
fn asymptotics_agree_with_simulation() {
    let o = covland(&["asymptotics", "--preset", "coupled-pair"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rows: Vec<_> = text.lines().skip_while(|l| !l.starts_with("entry,")).skip(1).collect();
    assert!(!rows.is_empty());
    for row in rows {
        let v: Vec<&str> = row.split(',').collect();
        let (p, q): (f64, f64) = (v[1].parse().unwrap(), v[2].parse().unwrap());
        assert!((p - q).abs() < 1e-6, "{row}");
    }
    let s = covland(&["simulate", "--preset", "coupled-pair"]);
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    let sim = stdout(&s);
    let predicted = field(&sim, "predicted dq[0]:");
    let reached = field(&sim, "final dq[0]:");
    assert!((predicted - reached).abs() < 1e-6, "{predicted} vs {reached}");
}

#[test]
fn sweep_writes_grid() {
    let o = covland(&["sweep", "--gamma", "1,2", "--omega", "1", "--temperature", "0,1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("gamma,omega,T,D,err"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn limits_table_for_trap() {
    let o = covland(&["limits", "--preset", "limits-trap"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).lines().count() > 2);
}

#[test]
fn exit_codes_follow_error_category() {
    assert_eq!(covland(&["bogus"]).status.code(), Some(2));
    assert_eq!(covland(&["simulate", "--preset", "nope"]).status.code(), Some(2));
    assert_eq!(covland(&["diffusion", "--gamma", "-1", "--omega", "1"]).status.code(), Some(3));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[scenario\nname = 1").unwrap();
    let o = covland(&["simulate", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
    let missing = dir.path().join("missing.toml");
    assert_ne!(covland(&["simulate", "--config", missing.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(covland(&["presets"]).status.code(), Some(0));
}
