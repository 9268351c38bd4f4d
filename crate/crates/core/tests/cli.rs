use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const S3_PT: &str = r#"
[model]
kind = "product"
a = 3
kappa1 = 2.0
b = 2
kappa2 = 4.0
alpha = 1.5707963267948966

[submanifold]
dim = 3

[analysis]
expected = 1.5707963267948966
"#;

const DIFF_FUTURE: &str = r#"
[model]
kind = "constant"
n = 3
kappa = 0.0

[family]
j0 = [[0.0, 0.0], [0.0, 1.0]]
dj0 = [[1.0, 0.0], [0.0, 1.0]]

[analysis]
k = 1
kappa = 0.0
lambda = { c1 = 1.0, c2 = 1.0 }
w = [[0.0, 1.0]]
interval = [0.0, 3.0]
"#;

const TRANSVERSE: &str = r#"
[model]
kind = "product"
a = 3
kappa1 = 1.0
b = 3
kappa2 = 0.5
alpha = 0.7

[submanifold]
dim = 2
shape_op = [[0.3, 0.1], [0.1, -0.2]]

[analysis]
v = [[1.0, 0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.5, 0.5, 0.0]]
interval = [0.1, 1.0]
random_times = 20
seed = 7
"#;

fn focal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_focal")).args(args).env("NO_COLOR", "1").output().expect("run focal")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn focal_radius_passes_and_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s3.toml", S3_PT);
    let out = tmp.path().join("out");
    let o = focal(&["focal-radius", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("focal_radius = 1.570796"));
    assert!(!stdout(&o).contains('\x1b'));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert!((report["focal_radius"].as_f64().unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-6);
    assert!(!out.join("series.csv").exists());
}

#[test]
fn failed_check_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", &S3_PT.replace("expected = 1.5707963267948966", "expected = 1.4"));
    let o = focal(&["focal-radius", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn tol_flag_overrides_tolerance() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &S3_PT.replace("expected = 1.5707963267948966", "expected = 1.5707"));
    let args = |tol: &'static str| {
        focal(&["focal-radius", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap(), "--tol", tol])
    };
    assert_eq!(args("1e-6").status.code(), Some(2));
    assert_eq!(args("1e-3").status.code(), Some(0));
}

#[test]
fn config_errors_exit_one_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!("{S3_PT}k = 4\n");
    let line = body.lines().count();
    let cfg = write_config(tmp.path(), "k.toml", &body);
    let o = focal(&["compare", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(&format!("k.toml:{line}:")), "{}", stderr(&o));

    let cfg = write_config(tmp.path(), "syntax.toml", "[model]\nkind = \"constant\"\nn = [\n");
    let o = focal(&["focal-radius", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("syntax.toml:"), "{}", stderr(&o));

    let cfg = write_config(tmp.path(), "kind.toml", "[model]\nkind = \"torus\"\nn = 3\n");
    let o = focal(&["focal-radius", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("kind.toml:2:"), "{}", stderr(&o));

    let o = focal(&["focal-radius", "--config", tmp.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let cfg = write_config(tmp.path(), "ok.toml", S3_PT);
    let o = focal(&["focal-radius", "--config", cfg.to_str().unwrap(), "--step", "-1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("step"));

    // Usage errors must not collide with the failed-check code.
    assert_eq!(focal(&["focal-radius"]).status.code(), Some(1));
    assert_eq!(focal(&["--help"]).status.code(), Some(0));
}

#[test]
fn reproduce_and_list() {
    let tmp = tempfile::tempdir().unwrap();
    let o = focal(&["reproduce", "diff_future", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("equality recorded"));
    assert!(tmp.path().join("diff-future/report.json").exists());

    let o = focal(&["reproduce", "no-such-example"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("hopf-holn"));

    let o = focal(&["list-examples"]);
    assert_eq!(o.status.code(), Some(0));
    for id in focal_core::registry::examples().into_iter().map(|(id, _)| id) {
        assert!(stdout(&o).contains(&id));
    }
}

fn csv_of(args: &[&str]) -> String {
    let o = focal(args);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let out = args.iter().position(|a| *a == "--out").map(|i| args[i + 1]).unwrap();
    std::fs::read_to_string(Path::new(out).join("series.csv")).unwrap()
}

#[test]
fn csv_is_deterministic_and_fixed_format() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, body, sub) in [("cmp.toml", DIFF_FUTURE, "compare"), ("tr.toml", TRANSVERSE, "transverse-check")] {
        let cfg = write_config(tmp.path(), name, body);
        let a = tmp.path().join(format!("{name}.a"));
        let b = tmp.path().join(format!("{name}.b"));
        let run =
            |dir: &Path| csv_of(&[sub, "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--csv"]);
        let (x, y) = (run(&a), run(&b));
        assert_eq!(x, y, "{sub} CSV differs between runs");
        let mut lines = x.lines();
        assert_eq!(lines.next(), Some(focal_core::scenario::CSV_HEADER));
        for line in lines {
            let cells: Vec<&str> = line.split(',').collect();
            assert_eq!(cells.len(), 7);
            for c in cells {
                if c == "NaN" {
                    continue;
                }
                let mantissa = c.split('e').next().unwrap().trim_start_matches('-');
                assert_eq!(mantissa.len(), 18, "{c}: 17 significant digits expected");
                c.parse::<f64>().unwrap();
            }
        }
    }
}
