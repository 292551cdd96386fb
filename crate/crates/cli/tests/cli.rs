use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn vaisman(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vaisman"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

fn write_config(dir: &tempfile::TempDir, body: &str) -> String {
    let p = dir.path().join("run.toml");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn verify_hopf_succeeds() {
    let o = vaisman(&["verify", "--scenario", "hopf-diagonal"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    let records = v["reports"][0]["records"].as_array().unwrap();
    assert!(records.iter().all(|r| r["pass"] == true));
    assert!(records.iter().all(|r| r["anchor"].as_str().is_some_and(|a| !a.is_empty())));
    assert_eq!(v["reports"][0]["grid"]["points"], 725);
}

#[test]
fn indefinite_potential_is_a_positivity_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        r#"
potential = "u^2 - v^2"
[chart]
coordinates = ["u", "v", "x", "y"]
domain = [[-1, 1], [-1, 1], [0, 1], [0, 1]]
"#,
    );
    let o = vaisman(&["verify", "--config", &cfg]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("not positive definite"));
}

#[test]
fn malformed_expression_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        r#"
potential = "log("
[chart]
coordinates = ["u", "v", "x", "y"]
domain = [[-1, 1], [-1, 1], [0, 1], [0, 1]]
"#,
    );
    let o = vaisman(&["verify", "--config", &cfg]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 1, column"), "{err}");
}

#[test]
fn inline_flat_structure_verifies_and_deforms() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        r#"
potential = "(u1^2 + v1^2 + u2^2 + v2^2) / 4"
t_values = [0.05]
[chart]
coordinates = ["u1", "v1", "u2", "v2", "x", "y"]
domain = [[-1, 1], [-1, 1], [-1, 1], [-1, 1], [0, 1], [0, 1]]
[generator]
potential = "exp(-(u1^2 + v1^2)) * 0.1"
[grid]
lattice = 2
random = 100
"#,
    );
    assert_eq!(code(&vaisman(&["verify", "--config", &cfg])), 0);
    let o = vaisman(&["deform", "--config", &cfg]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&o)["reports"].as_array().unwrap().len(), 2);
}

#[test]
fn deform_at_zero_reproduces_the_source() {
    let o = vaisman(&["deform", "--scenario", "hopf-diagonal", "--t", "0"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    let src = v["reports"][0]["records"].as_array().unwrap();
    let def = v["reports"][1]["records"].as_array().unwrap();
    for r in src.iter().take(12) {
        let other = def.iter().find(|d| d["name"] == r["name"]).unwrap();
        assert_eq!(r, other);
    }
}

#[test]
fn deform_inside_the_bound_passes() {
    let o = vaisman(&["deform", "--scenario", "hopf-diagonal", "--t", "0.1", "--t", "-0.1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn inadmissible_t_needs_force() {
    let o = vaisman(&["deform", "--scenario", "hopf-diagonal", "--t", "0.45"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bound1"));
    let o = vaisman(&["deform", "--scenario", "hopf-diagonal", "--t", "0.45", "--force"]);
    assert_eq!(code(&o), 3);
    let v = json(&o);
    let r = &v["reports"][1];
    assert_eq!(r["certificate"]["bound1"]["pass"], false);
    assert_eq!(r["certificate"]["mu_min"]["pass"], true);
    assert!(r["records"].as_array().unwrap().iter().all(|x| x["pass"] == true));
}

#[test]
fn sweep_csv_has_one_row_per_t() {
    let o = vaisman(&["sweep", "--scenario", "hopf-diagonal", "--t-range", "-0.45:0.45:21", "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let mut rdr = csv::Reader::from_reader(o.stdout.as_slice());
    assert_eq!(rdr.headers().unwrap(), vec!["t", "min_eigenvalue", "max_det_error"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 21);
    for r in rows {
        let t: f64 = r[0].parse().unwrap();
        let eig: f64 = r[1].parse().unwrap();
        let err: f64 = r[2].parse().unwrap();
        assert!(t.abs() < 0.5 && eig > 0.0 && err <= 1e-7);
    }
}

#[test]
fn plot_data_is_written_next_to_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.json");
    let o = vaisman(&[
        "sweep",
        "--scenario",
        "hopf-diagonal",
        "--t-range",
        "-0.2:0.2:5",
        "--out",
        out.to_str().unwrap(),
        "--emit-plot-data",
    ]);
    assert_eq!(code(&o), 0);
    let plot = fs::read_to_string(dir.path().join("sweep.plot.csv")).unwrap();
    assert_eq!(plot.lines().count(), 6);
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["sweep"].as_array().unwrap().len(), 5);
}

#[test]
fn usage_and_config_errors_exit_with_one() {
    assert_eq!(code(&vaisman(&["verify", "--bogus"])), 1);
    assert_eq!(code(&vaisman(&["verify", "--scenario", "hopf-diagonal", "--format", "csv"])), 1);
    assert_eq!(code(&vaisman(&["deform", "--scenario", "hopf-diagonal"])), 1);
    assert_eq!(code(&vaisman(&["verify", "--scenario", "hopf-diagonal", "--t-range", "1:2"])), 1);
    assert_eq!(code(&vaisman(&["verify", "--scenario", "torus"])), 2);
}

#[test]
fn reports_are_byte_identical() {
    let args = ["deform", "--scenario", "hopf-diagonal", "--t", "0.2", "--seed", "99"];
    let a = vaisman(&args);
    let b = vaisman(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "execution = \"sequential\"\n");
    let mut seq_args = args.to_vec();
    seq_args.extend(["--config", &cfg]);
    let c = vaisman(&seq_args);
    let strip = |o: &Output| {
        let mut v = json(o);
        v["execution"] = Value::Null;
        v
    };
    assert_eq!(strip(&a), strip(&c));
}
