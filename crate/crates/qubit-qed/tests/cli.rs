use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qubit-qed"))
}

fn config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str], cfg: &Path) -> Output {
    let mut cmd = bin();
    cmd.args(args).arg("--config").arg(cfg);
    cmd.output().unwrap()
}

fn rows(out: &str) -> Vec<Vec<String>> {
    out.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn malformed_config_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "bad.cfg", "variant = spin\nm = not-a-number\n");
    let out = run(&["poles"], &cfg);
    assert_eq!(out.status.code(), Some(2));
    let cfg = config(&dir, "unknown.cfg", "variant = spin\nm = 1\ncolour = blue\n");
    assert_eq!(run(&["poles"], &cfg).status.code(), Some(2));
}

#[test]
fn scattering_at_negative_frequency_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "a.cfg", "variant = two-level\nm = 1\n");
    let out = run(&["scan", "--quantity", "scattering", "--omega-min", "-1", "--omega-max", "1", "--points", "5"], &cfg);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn strong_coupling_exits_4() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "strong.cfg", "variant = two-level\nm = 1\nd = 100\n");
    assert_eq!(run(&["verify", "--only", "crossing"], &cfg).status.code(), Some(4));
    assert_eq!(run(&["poles"], &cfg).status.code(), Some(4));
}

#[test]
fn free_spin_susceptibility() {
    let dir = TempDir::new().unwrap();
    // m = 1.3 keeps the integer grid away from the poles at ±2m.
    let cfg = config(&dir, "free.cfg", "variant = spin\nm = 1.3\nmu = 0\n");
    let out = run(&["scan", "--quantity", "susceptibility", "--order", "2", "--omega-min", "-5", "--omega-max", "5", "--points", "11"], &cfg);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# qubit-qed v1\nomega,channel,re,im,order,quantity\n"));
    let rows = rows(&text);
    assert_eq!(rows.len(), 11 * 3);
    for r in &rows {
        let (w, re, im): (f64, f64, f64) = (r[0].parse().unwrap(), r[2].parse().unwrap(), r[3].parse().unwrap());
        let expected = match r[1].as_str() {
            "plus" => -2.0 / (2.6 - w),
            "minus" => -2.0 / (2.6 + w),
            "zero" => 0.0,
            other => panic!("unexpected channel {other}"),
        };
        assert!((re - expected).abs() <= 1e-14 * expected.abs().max(1.0), "{r:?}");
        assert_eq!(im, 0.0);
    }
}

#[test]
fn polarizability_rows_satisfy_crossing() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "h.cfg", "variant = two-level\nm = 1\ne = 1\n");
    let out = run(&["scan", "--quantity", "alpha", "--order", "4", "--omega-min", "-3", "--omega-max", "3", "--points", "12"], &cfg);
    assert!(out.status.success());
    let rows = rows(&String::from_utf8(out.stdout).unwrap());
    let vals: Vec<(f64, f64, f64)> = rows.iter().map(|r| (r[0].parse().unwrap(), r[2].parse().unwrap(), r[3].parse().unwrap())).collect();
    let n = vals.len();
    for i in 0..n {
        let (w, re, im) = vals[i];
        let (wm, rem, imm) = vals[n - 1 - i];
        assert_eq!(w, -wm);
        assert!((re - rem).abs() <= 1e-10 * re.abs().max(1.0) && (im + imm).abs() <= 1e-10 * im.abs().max(1.0), "ω = {w}");
    }
}

#[test]
fn susceptibility_rows_satisfy_crossing() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "s.cfg", "variant = spin\nm = 1\nmu = 1\n");
    let out = run(&["scan", "--quantity", "chi", "--order", "4", "--omega-min", "-3", "--omega-max", "3", "--points", "13"], &cfg);
    assert!(out.status.success());
    let rows = rows(&String::from_utf8(out.stdout).unwrap());
    let value = |w: f64, ch: &str| -> (f64, f64) {
        let r = rows.iter().find(|r| r[0].parse::<f64>().unwrap() == w && r[1] == ch).unwrap();
        (r[2].parse().unwrap(), r[3].parse().unwrap())
    };
    for r in rows.iter().filter(|r| r[1] == "plus") {
        let w: f64 = r[0].parse().unwrap();
        let (pr, pi) = value(w, "plus");
        let (mr, mi) = value(-w, "minus");
        assert!((pr - mr).abs() <= 1e-10 * pr.abs().max(1.0) && (pi + mi).abs() <= 1e-10 * pi.abs().max(1.0), "ω = {w}");
        let (zr, zi) = value(w, "zero");
        let (zmr, zmi) = value(-w, "zero");
        assert!((zr - zmr).abs() <= 1e-10 * zr.abs().max(1.0) && (zi + zmi).abs() <= 1e-10 * zi.abs().max(1.0), "ω = {w}");
    }
}

#[test]
fn weak_coupling_poles_match_the_library() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "h.cfg", "variant = two-level\nm = 1\ne = 1\n");
    let out = run(&["poles"], &cfg);
    assert!(out.status.success());
    let model = qubit_qed::load_model(&cfg).unwrap();
    let expected = qubit_qed::locate_poles(&model, qubit_qed::Order::SecondPlusFourth, &Default::default()).unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), expected.len());
    for (line, pole) in text.lines().zip(&expected) {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        assert_eq!(f[1].parse::<f64>().unwrap(), pole.location.re);
        assert_eq!(f[2].parse::<f64>().unwrap(), pole.location.im);
    }
}

#[test]
fn free_two_level_poles() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "free.cfg", "variant = two-level\nm = 1\nd = 0\n");
    let out = run(&["poles", "--order", "2"], &cfg);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut found: Vec<(f64, f64)> = text
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split(',').map(str::trim).collect();
            (f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert_eq!(found.len(), 2);
    assert!((found[0].0 + 2.0).abs() < 1e-12 && (found[1].0 - 2.0).abs() < 1e-12);
    assert!(found.iter().all(|p| p.1.abs() < 1e-12));
}

#[test]
fn verify_single_check_passes() {
    let out = bin().args(["verify", "--only", "crossing", "--json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["checks"][0]["name"], "crossing");
    assert_eq!(v["checks"][0]["passed"], true);
    assert_eq!(bin().args(["verify", "--only", "nonsense"]).output().unwrap().status.code(), Some(2));
}

#[test]
fn scans_are_reproducible_across_runs_and_threads() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "s.cfg", "variant = spin\nm = 1\nmu = 1\n");
    let mut outputs = Vec::new();
    for (threads, format) in [("1", "json"), ("3", "json"), ("1", "csv"), ("2", "csv")] {
        let file = dir.path().join(format!("out-{threads}.{format}"));
        let status = bin()
            .env("QUBIT_QED_THREADS", threads)
            .args(["scan", "--quantity", "chi", "--order", "4", "--omega-min", "-3", "--omega-max", "3", "--points", "20", "--format", format, "--output"])
            .arg(&file)
            .arg("--config")
            .arg(&cfg)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(&file).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[2], outputs[3]);
}
