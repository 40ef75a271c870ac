use std::path::Path;
use std::process::{Command, Output};

use cqi_sim::output::data_payload;

fn cqi_sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cqi-sim")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_omega_exits_1_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        write_config(dir.path(), "z.json", r#"{"kind":"zeno","params":{"epsilon":0.05},"output":{"path":"z.csv"}}"#);
    for cmd in ["run", "validate"] {
        let o = cqi_sim(&[cmd, &cfg]);
        assert_eq!(o.status.code(), Some(1));
        assert!(stderr(&o).contains("`omega`"), "{}", stderr(&o));
    }
}

#[test]
fn perturbativity_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "d.json",
        r#"{"kind":"detector-compare","params":{"coupling_alpha":0.5},"output":{"path":"d.csv"}}"#,
    );
    let o = cqi_sim(&["run", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("first order"), "{}", stderr(&o));
    assert!(!dir.path().join("d.csv").exists());
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(cqi_sim(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(cqi_sim(&["run", "/nonexistent/config.json"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "z.json",
        r#"{"kind":"zeno","params":{"omega":1,"epsilon":0.05},"output":{"path":"z.csv"}}"#,
    );
    let o = Command::new(env!("CARGO_BIN_EXE_cqi-sim"))
        .args(["run", &cfg])
        .env("CQI_SIM_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("CQI_SIM_THREADS"));
    assert_eq!(cqi_sim(&["run", &cfg, "--refine", "1"]).status.code(), Some(1));
}

#[test]
fn list_experiments_names_every_kind() {
    let o = cqi_sim(&["list-experiments"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for k in cqi_sim::Kind::ALL {
        assert!(text.lines().any(|l| l.starts_with(k.name())), "{}", k.name());
    }
}

#[test]
fn validate_accepts_shipped_configs() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        let o = cqi_sim(&["validate", p.to_str().unwrap()]);
        assert!(o.status.success(), "{}: {}", p.display(), stderr(&o));
        n += 1;
    }
    assert!(n >= 7);
}

#[test]
fn zeno_csv_is_rfc4180_with_header_block() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "z.json",
        r#"{"kind":"zeno","params":{"omega":1.0,"omega_epsilon":0.05},"output":{"path":"out/z.csv"}}"#,
    );
    let o = cqi_sim(&["run", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("out/z.csv")).unwrap();
    let header: Vec<&str> = text.lines().take_while(|l| l.starts_with('#')).collect();
    assert!(header.iter().any(|l| l.starts_with("# version: ")));
    assert!(header.iter().any(|l| l.starts_with("# generated_at: ")));
    let config = header.iter().find_map(|l| l.strip_prefix("# config: ")).unwrap();
    let config: serde_json::Value = serde_json::from_str(config).unwrap();
    assert_eq!(config["params"]["halvings"], 4);
    let body: String = text.split_inclusive('\n').filter(|l| !l.starts_with('#')).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let cols: Vec<String> = r.headers().unwrap().iter().map(str::to_string).collect();
    let ratio = cols.iter().position(|c| c == "ratio").unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 5);
    let first: f64 = rows[0][ratio].parse().unwrap();
    assert!((first - 0.5).abs() < 1e-12 && first <= 0.5125, "{first}");
}

#[test]
fn json_output_and_repeatability() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"kind":"chain","params":{"random":{"count":50}},"seed":3,"output":{"path":"c.json","format":"json"}}"#,
    );
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = cqi_sim(&["run", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read_to_string(out.join("c.json")).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(data_payload(&a), data_payload(&b));
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["header"]["tool"], "cqi-sim");
    assert_eq!(v["data"]["rows"].as_array().unwrap().len(), 50);
    assert_eq!(v["data"]["diagnostics"]["all_monotone"], true);
    let other = write_config(
        dir.path(),
        "c2.json",
        r#"{"kind":"chain","params":{"random":{"count":50}},"seed":4,"output":{"path":"c.json","format":"json"}}"#,
    );
    let out = dir.path().join("c");
    assert!(cqi_sim(&["run", &other, "--out", out.to_str().unwrap()]).status.success());
    assert_ne!(data_payload(&std::fs::read_to_string(out.join("c.json")).unwrap()), data_payload(&a));
}

#[test]
fn detector_compare_refine_adds_convergence_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "d.json", r#"{"kind":"detector-compare","output":{"path":"d.csv"}}"#);
    let o = cqi_sim(&["run", &cfg, "--refine", "1", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("d.csv")).unwrap();
    let body: String = text.split_inclusive('\n').filter(|l| !l.starts_with('#')).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let cols: Vec<String> = r.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(cols.last().unwrap(), "convergence");
    let rel = cols.iter().position(|c| c == "cqi_born_rel").unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    for row in &rows {
        let v: f64 = row[rel].parse().unwrap();
        assert!(v.abs() <= 1e-3, "{v}");
    }
}
