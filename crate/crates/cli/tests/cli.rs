use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nanofiber(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nanofiber"))
        .args(args)
        .env_remove("NANOFIBER_CONFIG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

const REFERENCE_CALIBRATION: &str = "\
# reference path constants
kappa_g.value = 0.496
kappa_g.sigma = 0.021
kappa_r.value = 0.235
kappa_r.sigma = 0.013
eta_r.value = 0.148
eta_r.sigma = 0.003
";

fn write_calibration(dir: &Path) -> String {
    let p = dir.join("calibration.txt");
    std::fs::write(&p, REFERENCE_CALIBRATION).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        stdout(&nanofiber(&["simulate", "--seed", "7", "--duration", "30", "--out-dir", out.to_str().unwrap()]));
    }
    for f in ["guided.csv", "radiation.csv", "truth.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn calibrate_reproduces_reference_constant() {
    let dir = tempfile::tempdir().unwrap();
    let cal = write_calibration(dir.path());
    let v: Value = serde_json::from_str(&stdout(&nanofiber(&["calibrate", &cal]))).unwrap();
    assert!((v["c"]["value"].as_f64().unwrap() - 7.13).abs() < 0.01);
    assert!((v["c"]["sigma"].as_f64().unwrap() - 0.84).abs() < 0.02);
    assert!(v["consistency_error"].as_f64().unwrap() < 1e-12);

    let q: Value = serde_json::from_str(&stdout(&nanofiber(&["calibrate", &cal, "--propagation", "quadrature"]))).unwrap();
    assert!((q["c"]["sigma"].as_f64().unwrap() - 0.51).abs() < 0.01);
}

#[test]
fn analyze_pinned_rates() {
    let dir = tempfile::tempdir().unwrap();
    let cal = write_calibration(dir.path());
    let cal_json = dir.path().join("cal.json");
    stdout(&nanofiber(&["calibrate", &cal, "-o", cal_json.to_str().unwrap()]));
    let out = stdout(&nanofiber(&[
        "analyze",
        "--calibration",
        cal_json.to_str().unwrap(),
        "--guided-rate",
        "44.3",
        "--guided-sigma",
        "5.4",
        "--radiation-rate",
        "24.8",
        "--radiation-sigma",
        "3.7",
    ]));
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!((v["eta_c"]["value"].as_f64().unwrap() - 0.200).abs() < 0.001);
    assert!((v["eta_c"]["sigma"].as_f64().unwrap() - 0.062).abs() < 0.002);
}

#[test]
fn analyze_simulated_traces() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let cal = write_calibration(dir.path());
    stdout(&nanofiber(&["simulate", "--seed", "3", "--out-dir", d]));
    let g = format!("{d}/guided.csv");
    let r = format!("{d}/radiation.csv");
    let v: Value = serde_json::from_str(&stdout(&nanofiber(&[
        "analyze",
        "--guided",
        &g,
        "--radiation",
        &r,
        "--calibration",
        &cal,
    ])))
    .unwrap();
    let eta = &v["efficiency"]["eta_c"];
    let (value, sigma) = (eta["value"].as_f64().unwrap(), eta["sigma"].as_f64().unwrap());
    assert!((value - 0.2).abs() < 3.0 * sigma, "{value} ± {sigma}");
    assert_eq!(v["guided"]["segmentation"]["emitter_count"], 1);
}

#[test]
fn curve_csv_shape() {
    let out = stdout(&nanofiber(&["curve", "--x-min", "1", "--x-max", "2", "--steps", "4"]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "x,eta_c,gamma_he11,gamma_guided_total,gamma_radiation");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("1,"));
    for line in &lines[1..] {
        for field in line.split(',') {
            let digits = field.split('e').next().unwrap().chars().filter(char::is_ascii_digit).count();
            assert!(digits <= 7, "{field}");
        }
    }
}

#[test]
fn theory_output_is_deterministic() {
    let args = ["curve", "--x-min", "0.8", "--x-max", "1.6", "--steps", "3", "--format", "json"];
    assert_eq!(stdout(&nanofiber(&args)), stdout(&nanofiber(&args)));
}

#[test]
fn peaks_and_g2_on_simulated_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    stdout(&nanofiber(&["simulate", "--kind", "scan", "--seed", "2", "--out-dir", d]));
    let peaks = stdout(&nanofiber(&["peaks", &format!("{d}/scan.csv")]));
    assert_eq!(peaks.lines().count(), 9);

    stdout(&nanofiber(&[
        "simulate",
        "--kind",
        "stream",
        "--seed",
        "5",
        "--duration",
        "0.02",
        "--excitation-rate",
        "2e7",
        "--lifetime",
        "50e-9",
        "--off-rate",
        "0",
        "--background",
        "0,0",
        "--out-dir",
        d,
    ]));
    let g2 = stdout(&nanofiber(&["g2", &format!("{d}/photons_ch1.txt"), &format!("{d}/photons_ch2.txt"), "--format", "json"]));
    let v: Value = serde_json::from_str(&g2).unwrap();
    assert!(v["dip"].as_f64().unwrap() < 0.1);
}

#[test]
fn exit_codes() {
    assert_eq!(nanofiber(&["curve", "--bogus"]).status.code(), Some(2));
    assert_eq!(nanofiber(&["modes", "--x", "1", "--n1", "0.9"]).status.code(), Some(1));
    assert_eq!(nanofiber(&["peaks", "/nonexistent/scan.csv"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let flat = dir.path().join("flat.csv");
    let rows: String = (0..50).map(|i| format!("{},{}\n", i as f64 * 0.1, 7)).collect();
    std::fs::write(&flat, format!("time_s,counts\n{rows}")).unwrap();
    let cal = write_calibration(dir.path());
    let f = flat.to_str().unwrap();
    let o = nanofiber(&["analyze", "--guided", f, "--radiation", f, "--calibration", &cal]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "time_s,counts\n0,1\n0.1,x\n").unwrap();
    let o = nanofiber(&["peaks", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn help_lists_every_flag() {
    let cases: &[(&str, &[&str])] = &[
        ("curve", &["--n1", "--x-min", "--x-max", "--steps", "--orientation", "--denominator", "--m-max", "--propagation"]),
        ("enhancement", &["--na", "--lambda", "--d-min", "--d-max", "--normalization"]),
        ("analyze", &["--guided", "--radiation", "--calibration", "--fit-mode", "--rate-uncertainty"]),
        ("g2", &["--max-tau", "--tau-bin", "--normalization", "--duty-cycle"]),
        ("simulate", &["--seed", "--kind", "--eta", "--out-dir", "--split"]),
    ];
    for (cmd, flags) in cases {
        let help = stdout(&nanofiber(&[cmd, "--help"]));
        for f in *flags {
            assert!(help.contains(f), "{cmd} --help lacks {f}");
        }
    }
}

#[test]
fn config_file_sets_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("nanofiber.toml");
    std::fs::write(&cfg, "n1 = 2.0\nwavelength_nm = 1000.0\n").unwrap();
    let run = |extra: &[&str]| {
        let mut args = vec!["modes", "--x", "1.2"];
        args.extend_from_slice(extra);
        let o = Command::new(env!("CARGO_BIN_EXE_nanofiber"))
            .args(&args)
            .env("NANOFIBER_CONFIG", &cfg)
            .output()
            .unwrap();
        stdout(&o)
    };
    let from_env = run(&[]);
    let explicit = stdout(&nanofiber(&["modes", "--x", "1.2", "--n1", "2.0", "--lambda", "1000"]));
    assert_eq!(from_env, explicit);
    let overridden = run(&["--n1", "1.45", "--lambda", "780"]);
    assert_eq!(overridden, stdout(&nanofiber(&["modes", "--x", "1.2"])));

    std::fs::write(&cfg, "n_one = 2.0\n").unwrap();
    let o = nanofiber(&["modes", "--x", "1.2", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
