use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qbell::scan::ScanJob;

fn qbell(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbell")).args(args).output().expect("spawn qbell")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value_after(text: &str, prefix: &str) -> f64 {
    let line = text.lines().find(|l| l.starts_with(prefix)).unwrap_or_else(|| panic!("no '{prefix}' in {text}"));
    line.rsplit('=').next().unwrap().trim().parse().unwrap()
}

#[test]
fn max_bell_examples() {
    let o = qbell(&["max-bell", "--family", "isotropic", "--params", "1.0", "--d", "3", "--restarts", "4"]);
    assert_eq!(o.status.code(), Some(0));
    assert!((value_after(&stdout(&o), "max I_3") - 2.87293).abs() < 1e-5);

    let o = qbell(&["max-bell", "--family", "isotropic", "--params", "0.0", "--d", "3", "--restarts", "2"]);
    assert!(value_after(&stdout(&o), "max I_3").abs() < 1e-9);

    let o = qbell(&["max-bell", "--d", "2", "--family", "tetra2", "--params", "1,-1,1", "--restarts", "3"]);
    assert!((value_after(&stdout(&o), "max I_2") - 2.82843).abs() < 1e-5);
}

#[test]
fn max_bell_settings_dump_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("settings.json");
    let o = qbell(&[
        "max-bell",
        "--family",
        "line",
        "--params",
        "0.5,0.2,0.1",
        "--restarts",
        "2",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let dump: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let settings: qbell::cglmp::MeasurementSettings = serde_json::from_value(dump["settings"].clone()).unwrap();
    let rho = qbell::qstate::family_state(qbell::qstate::Family::Line, &[0.5, 0.2, 0.1], 3).unwrap();
    let v = qbell::cglmp::cglmp_value(&rho, &settings).unwrap();
    assert!((v - dump["value"].as_f64().unwrap()).abs() < 1e-12);
    assert_eq!(serde_json::to_value(&settings).unwrap(), dump["settings"]);
}

#[test]
fn max_bell_from_state_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("phi.json");
    let mut real = vec![vec![0.0; 4]; 4];
    for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
        real[i][j] = 0.5;
    }
    std::fs::write(&path, serde_json::json!({ "d": 2, "real": real }).to_string()).unwrap();
    let o = qbell(&["max-bell", "--state", path.to_str().unwrap(), "--restarts", "3", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["value"].as_f64().unwrap() - 2.0 * 2f64.sqrt()).abs() < 1e-6);
}

#[test]
fn input_errors_exit_2() {
    for args in [
        vec!["max-bell", "--family", "nope", "--params", "1"],
        vec!["max-bell", "--family", "line", "--params", "0.1,0.2"],
        vec!["max-bell", "--family", "line"],
        vec!["max-bell", "--family", "line", "--params", "1,x,2"],
        vec!["max-bell", "--family", "isotropic", "--params", "1", "--restarts", "0"],
        vec!["verify", "no-such-suite"],
        vec!["boundary", "--family", "tetra2", "--params", "0,0,0", "--kind", "cglmp_sphere"],
        vec!["frobnicate"],
    ] {
        let o = qbell(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn numerical_abort_exits_3() {
    // The maximally mixed state has no violation direction.
    let o = qbell(&["boundary", "--family", "isotropic", "--params", "0", "--d", "3", "--restarts", "2"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn boundary_isotropic() {
    let o = qbell(&["boundary", "--family", "isotropic", "--params", "1", "--d", "3", "--restarts", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let nu = value_after(&stdout(&o), "nu*");
    assert!((nu - (6.0 * 3f64.sqrt() - 9.0) / 2.0).abs() < 1e-6);

    let o = qbell(&["boundary", "--family", "line", "--params", "0.6961524227066319,0,0", "--kind", "cglmp_sphere"]);
    assert!(value_after(&stdout(&o), "cglmp_sphere boundary value").abs() < 1e-9);
}

#[test]
fn classify_json() {
    let o = qbell(&[
        "classify",
        "--family",
        "two_param",
        "--params",
        "0.2405,-0.05",
        "--restarts",
        "2",
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["ppt"], true);
    assert_eq!(v["bound_entangled"], true);
    assert_eq!(v["cglmp_violating"], false);
}

#[test]
fn concurrence_matches_closed_form_on_first_branch() {
    let o = qbell(&["concurrence", "--family", "line", "--params", "0.6,0.1,0.1", "--restarts", "1"]);
    let text = stdout(&o);
    let (lb, exact) = (value_after(&text, "C_m^2 lower bound"), value_after(&text, "closed form"));
    assert!((lb - exact).abs() < 1e-9, "{text}");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "restarts = 1\nmax_iterations = 1\n").unwrap();
    // One iteration cannot reach the maximum.
    let args = ["max-bell", "--family", "isotropic", "--params", "1", "--d", "2", "--config", cfg.to_str().unwrap()];
    let o = qbell(&args);
    assert!(value_after(&stdout(&o), "max I_2") < 2.8);
    std::fs::write(&cfg, "restarts = 1\nbogus = 1\n").unwrap();
    assert_eq!(qbell(&args).status.code(), Some(2));
    std::fs::write(&cfg, "{\"restarts\": 1, \"seed\": 5}").unwrap();
    let json = dir.path().join("cfg.json");
    std::fs::rename(&cfg, &json).unwrap();
    let o = qbell(&[
        "max-bell",
        "--family",
        "isotropic",
        "--params",
        "1",
        "--d",
        "2",
        "--config",
        json.to_str().unwrap(),
        "--restarts",
        "3",
    ]);
    assert!(stdout(&o).contains("restarts: 3"));
}

#[test]
fn verify_exit_codes() {
    let o = qbell(&["verify", "local-bound", "--samples", "3", "--restarts", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("brute force d=4"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("starved.toml");
    std::fs::write(&cfg, "restarts = 1\nmax_iterations = 1\n").unwrap();
    let o = qbell(&["verify", "analytic-max", "--dmax", "3", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL"));
}

fn scan_line(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "scan",
        "--family",
        "line",
        "--axis",
        "-0.1:0.6:3",
        "--axis",
        "0:0.3:2",
        "--axis",
        "0.1:0.1:2",
        "--tasks",
        "positivity,ppt,witness,cglmp",
        "--restarts",
        "2",
        "--seed",
        "11",
        "--output",
    ];
    args.push(out.to_str().unwrap());
    args.extend_from_slice(extra);
    qbell(&args)
}

#[test]
fn scan_is_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert_eq!(scan_line(&a, &[]).status.code(), Some(0));
    assert_eq!(scan_line(&b, &["--sequential"]).status.code(), Some(0));
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(x, y);
    let text = String::from_utf8(x).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 2 * 2);
    assert!(text.starts_with("alpha,beta,gamma,min_eig,ppt_min_eig,witness_1,witness_2,max_i_d,nu_star,cm2_lb,error\n"));
    assert!(!text.contains('\r'));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["records"], 12);
    assert_eq!(meta["seed"], 11);
}

#[test]
fn scan_json_and_unwritable_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("iso.json");
    let o = qbell(&[
        "scan",
        "--family",
        "isotropic",
        "--d",
        "3",
        "--axis",
        "0:1:3",
        "--tasks",
        "positivity,ppt",
        "--format",
        "json",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 3);

    let bad = dir.path().join("missing").join("x.csv");
    let o = qbell(&["scan", "--family", "isotropic", "--axis", "0:1:2", "--output", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = qbell(&["scan", "--family", "isotropic", "--axis", "0:1:1", "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

fn jobs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../jobs")
}

#[test]
fn shipped_job_files_are_valid() {
    let mut n = 0;
    for entry in std::fs::read_dir(jobs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let job = ScanJob::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert!(job.output.is_some(), "{}", path.display());
            n += 1;
        }
    }
    assert_eq!(n, 6);
}

#[test]
fn tetra2_job_runs_without_optimizer() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let job = jobs_dir().join("tetra2_regions.toml");
    let o = qbell(&["scan", "--job", job.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 41 * 41 * 41);
    // No optimizer output columns.
    assert!(text.lines().skip(1).all(|l| l.ends_with(",,,,")));
}
