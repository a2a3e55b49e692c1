use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn lsmm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsmm"))
        .args(args)
        .current_dir(dir)
        .env_remove("LSMM_LOG")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn run(dir: &Path, cmd: &str, cfg: &Value, out: &str) -> Output {
    write_config(dir, "cfg.json", cfg);
    lsmm(dir, &[cmd, "--config", "cfg.json", "--out", out])
}

/// Fourth-order system matched at `±i` by a model of order two.
fn fourth_order(pipeline: Value) -> Value {
    json!({
        "system": { "inline": {
            "A": [[-1.0, 0.0, 0.0, 0.0], [1.0, -2.0, 0.0, 0.0], [0.0, 1.0, -3.0, 0.0], [0.0, 0.0, 1.0, -4.0]],
            "B": [1.0, 0.0, 0.0, 0.0],
            "C": [0.0, 0.0, 0.0, 24.0]
        }},
        "interpolation": { "frequencies": [1.0] },
        "r": 2,
        "pipeline": pipeline,
        "sim": { "t_final": 60.0, "sample_dt": 0.05 }
    })
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_owned)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn model_file_round_trips_bit_identically() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let identity = json!({ "explicit": { "P": [[1.0, 0.0], [0.0, 1.0]] } });
    assert_eq!(
        code(&run(d, "reduce", &fourth_order(identity.clone()), "a")),
        0
    );
    let mut again = fourth_order(identity);
    again["model_file"] = json!("a/model.json");
    assert_eq!(code(&run(d, "reduce", &again, "b")), 0);
    let first = std::fs::read(d.join("a/model.json")).unwrap();
    let second = std::fs::read(d.join("b/model.json")).unwrap();
    assert_eq!(first, second);

    let model = read_json(&d.join("a/model.json"));
    for key in ["F", "G", "H", "P", "Delta", "Q", "T"] {
        assert!(!model[key].is_null(), "{key} missing");
    }
    assert!(model["T"]["re"].is_array() && model["T"]["im"].is_array());
}

#[test]
fn outputs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let cfg = fourth_order(json!("dominant"));
    for out in ["a", "b"] {
        assert_eq!(code(&run(d, "simulate", &cfg, out)), 0);
        assert_eq!(code(&run(d, "freqresp", &cfg, out)), 0);
    }
    for file in ["simulate.csv", "freqresp.csv"] {
        let a = std::fs::read(d.join("a").join(file)).unwrap();
        let b = std::fs::read(d.join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between runs");
    }

    // The seed selects the randomly generated system.
    let fss = |seed: &str, out: &str| {
        let o = lsmm(d, &["example", "fss", "--out", d.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        let o = lsmm(
            d,
            &[
                "reduce", "--config", "fss.json", "--seed", seed, "--out", out,
            ],
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(d.join(out).join("model.json")).unwrap()
    };
    assert_eq!(fss("7", "s1"), fss("7", "s2"));
    assert_ne!(fss("7", "s1"), fss("8", "s3"));
}

#[test]
fn csv_has_a_header_and_full_precision() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(
        code(&run(d, "simulate", &fourth_order(json!("dominant")), ".")),
        0
    );
    let text = std::fs::read_to_string(d.join("simulate.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,y,psi,e"));
    let cell = lines.nth(5).unwrap().split(',').nth(1).unwrap();
    let mantissa = cell.split('e').next().unwrap().trim_start_matches('-');
    assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let ok = fourth_order(json!("dominant"));
    assert_eq!(code(&run(d, "reduce", &ok, ".")), 0);
    assert_eq!(code(&run(d, "bound", &ok, ".")), 0);

    std::fs::write(d.join("bad.json"), "{\"system\": {").unwrap();
    assert_eq!(code(&lsmm(d, &["reduce", "--config", "bad.json"])), 2);
    assert_eq!(code(&lsmm(d, &["reduce", "--config", "missing.json"])), 2);
    assert_eq!(code(&lsmm(d, &["reduce"])), 2);
    assert_eq!(code(&lsmm(d, &["example", "nope"])), 2);

    let mut horizon = ok.clone();
    horizon["sim"]["t_final"] = json!(0.0);
    assert_eq!(code(&run(d, "simulate", &horizon, ".")), 2);

    let mut unstable = ok.clone();
    unstable["system"]["inline"]["A"][0][0] = json!(1.0);
    assert_eq!(code(&run(d, "bound", &unstable, ".")), 2);

    let mut real_points = ok.clone();
    real_points["interpolation"] =
        json!({ "points": [{ "re": -0.5, "im": 0.0 }, { "re": -0.25, "im": 0.0 }] });
    assert_eq!(code(&run(d, "bound", &real_points, ".")), 2);

    let mut both_sources = ok.clone();
    both_sources["system"]["fss"] = json!({});
    assert_eq!(code(&run(d, "reduce", &both_sources, ".")), 2);

    // With nu = 4 a single row of P generically has a kernel that is not
    // conditioned invariant, so the constraint F P + G L = P S has no solution.
    let mut relaxed = ok;
    relaxed["interpolation"] = json!({ "frequencies": [1.0, 2.0] });
    relaxed["r"] = json!(1);
    relaxed["pipeline"] = json!({ "relaxed": { "P": [[1.0, 0.3, -0.7, 0.2]] } });
    let out = run(d, "reduce", &relaxed, ".");
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("conditioned invariant"));
}

#[test]
fn first_order_lag_response_is_monotone() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let lag = json!({ "system": { "inline": { "A": [[-1.0]], "B": [1.0], "C": [1.0] } } });
    assert_eq!(code(&run(d, "freqresp", &lag, ".")), 0);
    let (header, rows) = csv_rows(&d.join("freqresp.csv"));
    assert_eq!(header, ["omega", "mag", "phase", "pole"]);
    assert_eq!(rows.len(), 400);
    assert!((rows[0][0] - 1e-2).abs() < 1e-15 && (rows[399][0] - 1e4).abs() < 1e-9);
    assert!((rows[0][1] - 1.0).abs() < 1e-3);
    assert!(rows[399][1] < 1e-3);
    assert!(rows.windows(2).all(|w| w[1][1] < w[0][1]));
}

#[test]
fn reduced_model_interpolates_at_the_generator_frequency() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let mut cfg = fourth_order(json!("dominant"));
    cfg["freq"] = json!({ "lo": 1.0, "hi": 1.0, "points": 1 });
    assert_eq!(code(&run(d, "freqresp", &cfg, ".")), 0);
    let (header, rows) = csv_rows(&d.join("freqresp.csv"));
    let rel = header.iter().position(|h| h == "rel_error").unwrap();
    assert!(rows[0][rel] < 1e-8, "relative error {}", rows[0][rel]);
}

#[test]
fn exact_matching_has_zero_index_and_error() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let mut cfg = fourth_order(json!({ "explicit": { "P": [[1.0, 0.0], [0.0, 1.0]] } }));
    cfg["sim"]["t_final"] = json!(40.0);
    assert_eq!(code(&run(d, "reduce", &cfg, ".")), 0);
    let report = read_json(&d.join("report.json"));
    let scale = 24.0f64.powi(2);
    assert!(report["index_J"].as_f64().unwrap() <= 1e-20 * scale);
    assert!(report["admissibility"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["ok"] == json!(true)));

    assert_eq!(code(&run(d, "simulate", &cfg, ".")), 0);
    let (_, rows) = csv_rows(&d.join("simulate.csv"));
    let tail = &rows[rows.len() / 2..];
    assert!(
        tail.iter().all(|r| r[3].abs() < 1e-7),
        "error does not vanish"
    );
    assert_eq!(code(&run(d, "bound", &cfg, ".")), 0);
    let bound = read_json(&d.join("bound.json"));
    assert!(bound["error_bound"].as_f64().unwrap() < 1e-9);
    assert!(bound["gamma_rms_estimate"].as_f64().unwrap() < 1e-7);
}

#[test]
fn fss_example_reduces_and_respects_the_bound() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(code(&lsmm(d, &["example", "fss"])), 0);
    assert_eq!(
        code(&lsmm(d, &["reduce", "--config", "fss.json", "--out", "r"])),
        0
    );
    let report = read_json(&d.join("r/report.json"));
    assert_eq!(report["n"], json!(60));
    assert_eq!(report["nu"], json!(24));
    assert_eq!(report["sigma_F"].as_array().unwrap().len(), 10);
    assert!(report["admissibility"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["ok"] == json!(true)));
    let out = lsmm(d, &["bound", "--config", "fss.json", "--out", "r"]);
    assert_eq!(code(&out), 0);
    let bound = read_json(&d.join("r/bound.json"));
    assert!(bound["ratio"].as_f64().unwrap() <= 1.0);
}

#[test]
fn inverter_example_improves_with_the_cubic_output() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(code(&lsmm(d, &["example", "inverter"])), 0);
    let out = lsmm(d, &["simulate", "--config", "inverter.json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (header, _) = csv_rows(&d.join("simulate.csv"));
    assert_eq!(header, ["t", "y", "psi", "e", "psi1", "psi3", "e1", "e3"]);
    let report = read_json(&d.join("simulate.json"));
    let (e1, e3) = (
        report["rms_e1"].as_f64().unwrap(),
        report["rms_e3"].as_f64().unwrap(),
    );
    assert!(e3 < e1, "rms e3 {e3:e} not below rms e1 {e1:e}");
}
