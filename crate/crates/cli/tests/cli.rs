use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn tfd(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tfd"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn tfd")
}

fn write(dir: &Path, name: &str, body: &str) {
    std::fs::write(dir.join(name), body).unwrap();
}

fn rows(text: &str) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "tfd failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn relax_starts_at_one_and_matches_mittag_leffler_without_tempering() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "r.json",
        r#"{"beta": [0.3, 0.8], "lambda": [0.0], "mu": [0.5, 4.0], "t": [0.0, 0.1, 2.0]}"#,
    );
    let out = stdout(&tfd(&["relax", "--config", "r.json"], dir.path()));
    let table = rows(&out);
    assert_eq!(table.len(), 12);
    for r in &table {
        let g: f64 = r[4].parse().unwrap();
        let ml: f64 = r[7].parse().unwrap();
        if r[3] == "0.0" {
            assert_eq!(g, 1.0);
            assert!(r[5].is_empty());
        } else {
            assert!((g - ml).abs() < 1e-9, "{r:?}");
            let dg: f64 = r[5].parse().unwrap();
            assert!(dg < 0.0);
        }
    }
}

#[test]
fn solve_single_mode_agrees_across_routes_and_vanishes_on_the_boundary() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "s.json",
        r#"{"params": {"beta": 0.6, "lambda": 1.5}, "domain": {"lengths": [2.0]},
            "initial": {"kind": "mode", "index": [2]}, "t": [0.0, 0.4],
            "x": [0.0, 0.3, 2.0], "methods": ["series", "subordination"]}"#,
    );
    let out = stdout(&tfd(&["solve", "--config", "s.json"], dir.path()));
    let table = rows(&out);
    assert_eq!(table.len(), 6);
    for r in &table {
        let x: f64 = r[1].parse().unwrap();
        let series: f64 = r[2].parse().unwrap();
        if x == 0.0 || x == 2.0 {
            assert_eq!(series, 0.0);
        }
        if r[0] != "0.0" {
            let sub: f64 = r[3].parse().unwrap();
            assert!((series - sub).abs() < 1e-8, "{r:?}");
        }
    }
}

#[test]
fn simulate_is_reproducible_and_paths_increase() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "p.json",
        r#"{"params": {"beta": 0.5, "lambda": 1.0}, "dx": 0.01, "n_paths": 4,
            "t_query": [0.2, 0.7], "seed": 11, "dump_paths": true}"#,
    );
    let read = |sub: &str, file: &str| std::fs::read(dir.path().join(sub).join(file)).unwrap();
    stdout(&tfd(
        &["simulate", "--config", "p.json", "--out", "a", "--threads", "1"],
        dir.path(),
    ));
    stdout(&tfd(
        &["simulate", "--config", "p.json", "--out", "b", "--threads", "2"],
        dir.path(),
    ));
    for file in ["inverse.csv", "paths.csv", "summary.csv"] {
        assert_eq!(read("a", file), read("b", file), "{file}");
    }

    let paths = rows(&String::from_utf8(read("a", "paths.csv")).unwrap());
    for w in paths.windows(2).filter(|w| w[0][0] == w[1][0]) {
        let (d0, d1): (f64, f64) = (w[0][2].parse().unwrap(), w[1][2].parse().unwrap());
        assert!(d1 > d0);
    }
    for r in rows(&String::from_utf8(read("a", "inverse.csv")).unwrap()) {
        let (lo, hi): (f64, f64) = (r[2].parse().unwrap(), r[3].parse().unwrap());
        assert!((hi - lo - 0.01).abs() < 1e-12);
    }
    let summary = rows(&String::from_utf8(read("a", "summary.csv")).unwrap());
    let rate: f64 = summary[0][5].parse().unwrap();
    assert!(rate > 0.1 && rate <= 1.0);

    stdout(&tfd(
        &["simulate", "--config", "p.json", "--out", "c", "--seed", "12"],
        dir.path(),
    ));
    assert_ne!(read("a", "inverse.csv"), read("c", "inverse.csv"));
}

#[test]
fn derivative_of_a_square_is_close_to_closed_form() {
    let dir = TempDir::new().unwrap();
    let mut data = String::from("t,value\n");
    for i in 0..=400 {
        let t = i as f64 / 400.0;
        data.push_str(&format!("{t},{}\n", t * t));
    }
    write(dir.path(), "sq.csv", &data);
    write(
        dir.path(),
        "d.json",
        r#"{"input": "sq.csv", "kind": "caputo", "beta": 0.5}"#,
    );
    let out = stdout(&tfd(&["derivative", "--config", "d.json"], dir.path()));
    let last = rows(&out).pop().unwrap();
    let d: f64 = last[1].parse().unwrap();
    // 2 t^{2−β} / Γ(3−β) at t = 1
    assert!((d - 1.504_505_556).abs() < 1e-3, "{d}");
}

#[test]
fn fast_validation_passes_and_is_byte_stable() {
    let dir = TempDir::new().unwrap();
    let a = tfd(&["validate", "--profile", "fast", "--out", "a.json"], dir.path());
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = tfd(
        &["validate", "--profile", "fast", "--out", "b.json", "--threads", "3"],
        dir.path(),
    );
    assert_eq!(b.status.code(), Some(0));
    let ja = std::fs::read(dir.path().join("a.json")).unwrap();
    assert_eq!(ja, std::fs::read(dir.path().join("b.json")).unwrap());
    let v: serde_json::Value = serde_json::from_slice(&ja).unwrap();
    assert_eq!(v["profile"], "fast");
    assert!(v["checks"].as_array().unwrap().len() > 10);
}

#[test]
fn bad_input_exits_with_two() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "typo.json",
        r#"{"beta": [0.5], "lambda": [0.0], "mu": [1.0], "t": [1.0], "tt": 1}"#,
    );
    write(
        dir.path(),
        "range.json",
        r#"{"beta": [1.5], "lambda": [0.0], "mu": [1.0], "t": [1.0]}"#,
    );
    write(dir.path(), "broken.json", r#"{"beta": [0.5"#);
    for cfg in ["typo.json", "range.json", "broken.json", "missing.json"] {
        let o = tfd(&["relax", "--config", cfg], dir.path());
        assert_eq!(o.status.code(), Some(2), "{cfg}");
        assert!(!o.stderr.is_empty());
    }
    assert_eq!(tfd(&["relax"], dir.path()).status.code(), Some(2));
    assert_eq!(tfd(&["teleport"], dir.path()).status.code(), Some(2));
    assert_eq!(
        tfd(&["validate", "--profile", "slow"], dir.path()).status.code(),
        Some(2)
    );
}
