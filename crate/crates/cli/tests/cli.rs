use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const EXP_CONST: &str = r#"
[model]
k = 3

[model.arrivals]
type = "exponential"
rate = 1.0

[model.threshold]
type = "constant"
tau = 0.6931471805599453

[analysis]
points = 60

[simulation]
runs = 20000
seed = 5
"#;

const UNIFORM: &str = r#"
[model]
k = 1

[model.arrivals]
type = "uniform"
lower = 0.0
upper = 2.0

[model.threshold]
type = "constant"
tau = 1.0

[analysis]
points = 40
"#;

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Workspace {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn config(&self, name: &str, text: &str) -> PathBuf {
        let path = self.dir.path().join(name);
        fs::write(&path, text).unwrap();
        path
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn deltashock(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deltashock")).args(args).output().unwrap()
}

fn run(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    deltashock(&args)
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Significant digits of a `d.ddd…e±x` field.
fn significant_digits(field: &str) -> usize {
    let mantissa = field.split('e').next().unwrap();
    mantissa.chars().filter(|c| c.is_ascii_digit()).count()
}

#[test]
fn analyze_writes_agreeing_moments_and_curves() {
    let ws = Workspace::new();
    let cfg = ws.config("a.toml", EXP_CONST);
    let out = ws.out("a");
    let o = run("analyze", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let s = json(out.join("summary.json"));
    for method in ["general", "transform", "closed_form"] {
        let mean = s["moments"][method]["mean"].as_f64().unwrap();
        assert!((mean - 6.0).abs() < 6e-5, "{method}: {mean}");
    }
    assert!(s["max_relative_difference"]["mean"].as_f64().unwrap() < 1e-5);
    assert!(s["max_relative_difference"]["variance"].as_f64().unwrap() < 1e-5);
    assert_eq!(s["moments"]["closed_form_kind"], "exponential-constant");
    assert!(s["uniform_variance"].is_null());
    assert_eq!(s["inversion"]["failures"].as_array().unwrap().len(), 0);

    let csv = fs::read_to_string(out.join("curves.csv")).unwrap();
    assert!(csv.ends_with('\n') && !csv.ends_with("\n\n"));
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,pdf_closed_form,pdf_inverted,pdf_normal_approx,cdf_inverted");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 60);
    for row in &rows {
        assert_eq!(row.len(), 5);
        for field in row {
            assert_eq!(significant_digits(field), 17, "{field}");
            field.parse::<f64>().unwrap();
        }
        let closed: f64 = row[1].parse().unwrap();
        let inverted: f64 = row[2].parse().unwrap();
        assert!((closed - inverted).abs() < 1e-6);
    }
}

#[test]
fn analyze_degenerate_threshold_is_erlang() {
    let ws = Workspace::new();
    let cfg = ws.config("p1.toml", &EXP_CONST.replace("tau = 0.6931471805599453", "tau = 1000.0"));
    let out = ws.out("p1");
    let o = run("analyze", &cfg, &out, &["--grid", "0.5:8:16"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = json(out.join("summary.json"));
    assert!((s["moments"]["general"]["mean"].as_f64().unwrap() - 3.0).abs() < 1e-12);
    assert!((s["lethal_probability"].as_f64().unwrap() - 1.0).abs() < 1e-15);
    let csv = fs::read_to_string(out.join("curves.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        let erlang = f[0] * f[0] * (-f[0]).exp() / 2.0;
        assert!((f[1] - erlang).abs() < 1e-14, "{line}");
        assert!((f[2] - erlang).abs() < 1e-7, "{line}");
    }
}

#[test]
fn analyze_uniform_reports_variance_discrepancy_and_blank_closed_form() {
    let ws = Workspace::new();
    let cfg = ws.config("u.toml", UNIFORM);
    let out = ws.out("u");
    let o = run("analyze", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = json(out.join("summary.json"));
    let u = &s["uniform_variance"];
    assert!((u["reduced_formula"].as_f64().unwrap() - 7.0 / 3.0).abs() < 1e-12);
    assert!((u["general"].as_f64().unwrap() - 14.0 / 3.0).abs() < 1e-12);
    assert_eq!(u["reduced_formula_discrepancy"], true);
    assert!((s["moments"]["closed_form"]["mean"].as_f64().unwrap() - 2.0).abs() < 1e-14);
    let csv = fs::read_to_string(out.join("curves.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(1) == Some("")));
}

#[test]
fn simulate_is_deterministic_across_invocations_and_workers() {
    let ws = Workspace::new();
    let one = ws.config("w1.toml", &format!("{EXP_CONST}workers = 1\n"));
    let three = ws.config("w3.toml", &format!("{EXP_CONST}workers = 3\n"));
    let mut outputs = Vec::new();
    for (i, cfg) in [&one, &one, &three].iter().enumerate() {
        let out = ws.out(&format!("s{i}"));
        let o = run("simulate", cfg, &out, &["--runs", "150000"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        outputs.push((fs::read(out.join("simulation.json")).unwrap(), fs::read(out.join("ecdf.csv")).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);

    let s: Value = serde_json::from_slice(&outputs[0].0).unwrap();
    assert_eq!(s["verdict"], "PASS");
    let [lo, hi] = [s["mean_interval"][0].as_f64().unwrap(), s["mean_interval"][1].as_f64().unwrap()];
    assert!(lo < 6.0 && 6.0 < hi);
    assert!(String::from_utf8(outputs[0].1.clone()).unwrap().starts_with("t,ecdf\n"));
}

#[test]
fn seed_override_changes_output() {
    let ws = Workspace::new();
    let cfg = ws.config("a.toml", EXP_CONST);
    let a = run("simulate", &cfg, &ws.out("a"), &[]);
    let b = run("simulate", &cfg, &ws.out("b"), &["--seed", "6"]);
    assert_eq!((code(&a), code(&b)), (0, 0));
    let (ja, jb) = (json(ws.out("a").join("simulation.json")), json(ws.out("b").join("simulation.json")));
    assert_eq!(jb["seed"], 6);
    assert_ne!(ja["mean"], jb["mean"]);
}

#[test]
fn single_run_has_null_variance() {
    let ws = Workspace::new();
    let cfg = ws.config("one.toml", EXP_CONST);
    let out = ws.out("one");
    let o = run("simulate", &cfg, &out, &["--runs", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = json(out.join("simulation.json"));
    assert!(s["variance"].is_null());
    assert!(s["std_error_mean"].is_null());
    assert_eq!(s["verdict"], "UNDETERMINED");
    assert_eq!(s["runs"], 1);
}

#[test]
fn compare_passes_on_matching_models() {
    let ws = Workspace::new();
    let cfg = ws.config("c.toml", &EXP_CONST.replace("k = 3", "k = 2").replace("tau = 0.6931471805599453", "tau = 1.0"));
    let out = ws.out("c");
    let o = run("compare", &cfg, &out, &["--runs", "100000"]);
    assert_eq!(code(&o), 0, "{}\n{}", stderr(&o), String::from_utf8_lossy(&o.stdout));
    let r = json(out.join("compare.json"));
    assert_eq!(r["verdict"], "PASS");
    let ks = &r["ks"];
    assert!(ks["empirical_vs_inverted"].as_f64().unwrap() < ks["critical_value_1pct"].as_f64().unwrap());
    let methods: Vec<&str> = r["methods"].as_array().unwrap().iter().map(|m| m["method"].as_str().unwrap()).collect();
    assert_eq!(methods, ["general", "transform", "closed_form", "simulation"]);
}

#[test]
fn compare_fails_on_mismatched_models() {
    let ws = Workspace::new();
    let text = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/negative-control.toml")).unwrap();
    let cfg = ws.config("neg.toml", &text);
    let out = ws.out("neg");
    let o = run("compare", &cfg, &out, &[]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("FAILED"));
    let r = json(out.join("compare.json"));
    assert_eq!(r["verdict"], "FAIL");
}

#[test]
fn normal_approximation_improves_with_k() {
    let ws = Workspace::new();
    let base = EXP_CONST.replace("tau = 0.6931471805599453", "tau = 1.0");
    let mut ks = Vec::new();
    for k in [1, 100] {
        let cfg = ws.config(&format!("k{k}.toml"), &base.replace("k = 3", &format!("k = {k}")));
        let out = ws.out(&format!("k{k}"));
        let o = run("compare", &cfg, &out, &["--runs", "20000"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        ks.push(json(out.join("compare.json"))["ks"]["empirical_vs_normal"].as_f64().unwrap());
    }
    assert!(ks[1] < ks[0], "{ks:?}");
}

#[test]
fn invert_prints_a_single_point() {
    let ws = Workspace::new();
    let cfg = ws.config("i.toml", &EXP_CONST.replace("k = 3", "k = 1").replace("tau = 0.6931471805599453", "tau = 1.0"));
    let o = run("invert", &cfg, &ws.out("i"), &["--t", "1.0"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((r["cdf"]["value"].as_f64().unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-6);
    assert!((r["pdf"]["value"].as_f64().unwrap() - r["pdf_closed_form"].as_f64().unwrap()).abs() < 1e-7);

    let bad = run("invert", &cfg, &ws.out("i"), &["--t", "0"]);
    assert_eq!(code(&bad), 1);
}

#[test]
fn validation_errors_exit_with_one_and_name_the_line() {
    let ws = Workspace::new();
    let cfg = ws.config("bad.toml", &EXP_CONST.replace("rate = 1.0", "rate = -2.0"));
    let o = run("analyze", &cfg, &ws.out("bad"), &[]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("line 7") && err.contains("model.arrivals.rate"), "{err}");

    let o = deltashock(&["analyze"]);
    assert_eq!(code(&o), 1, "missing --config");
    let o = run("analyze", &ws.out("missing.toml"), &ws.out("x"), &[]);
    assert_eq!(code(&o), 1);
    let o = run("simulate", &ws.config("ok.toml", EXP_CONST), &ws.out("x"), &["--runs", "0"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--runs"));
    let o = run("analyze", &ws.config("ok.toml", EXP_CONST), &ws.out("x"), &["--grid", "5:1:10"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn numeric_failures_exit_with_two() {
    let ws = Workspace::new();
    // a target far below double precision cannot be met
    let text = EXP_CONST.replace("[analysis]\npoints = 60", "[analysis]\npoints = 60\ntolerance = 1e-17");
    let cfg = ws.config("tight.toml", &text);
    let o = run("invert", &cfg, &ws.out("t"), &["--t", "2.0"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn formats_select_outputs() {
    let ws = Workspace::new();
    let cfg = ws.config("f.toml", &format!("{EXP_CONST}\n[output]\nformats = [\"csv\"]\n"));
    let out = ws.out("f");
    let o = run("analyze", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.join("curves.csv").exists());
    assert!(!out.join("summary.json").exists());
}
