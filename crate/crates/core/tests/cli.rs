use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use heisenberg_semigroups::grid::{GridSpec, SampledField, Space};
use serde_json::Value;

fn heisen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heisen")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn without_timestamp(p: &Path) -> String {
    let mut v = read_json(p);
    v.as_object_mut().unwrap().remove("timestamp");
    serde_json::to_string(&v).unwrap()
}

#[test]
fn verify_single_suite() {
    let o = heisen(&["verify", "--suite", "group_conv.identity"]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8_lossy(&o.stdout);
    let row = out.lines().find(|l| l.starts_with("group_conv.identity")).unwrap();
    assert!(row.contains("PASS"));
}

#[test]
fn semigroup_all_routes_writes_three_files_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mu.json");
    let o = heisen(&[
        "semigroup", "--generator", "gamma_variance", "--t", "1", "--route", "all", "--grid", "12", "--extent", "6",
        "--output", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for route in ["fourier", "expm", "contour"] {
        let v = read_json(&dir.path().join(format!("mu.{route}.json")));
        for key in ["config", "results", "diagnostics", "version", "timestamp"] {
            assert!(v.get(key).is_some(), "{route}: missing {key}");
        }
        let r = &v["results"][0];
        assert_eq!(r["route"], route);
        let field = SampledField::from_json_value(&r["field"]).unwrap();
        assert_eq!(field.grid().points, vec![12, 12, 12]);
        assert!(r["diagnostics"]["mass"].as_f64().unwrap() <= 1.0 + 1e-6);
    }
    let diff = read_json(&dir.path().join("mu.diff.json"));
    let d = &diff["results"][0];
    assert!(d["fourier_vs_expm_theta0"].as_f64().unwrap() < 1e-8);
    assert!(d["contour_vs_expm"].as_f64().unwrap() < 1e-4);
    assert_eq!(diff["diagnostics"]["all_passed"], true);
}

#[test]
fn identical_config_gives_identical_json() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for name in ["a.json", "b.json"] {
        let out = dir.path().join(name);
        let o = heisen(&[
            "semigroup", "--t", "0.5,1", "--grid", "8", "--extent", "4", "--seed", "7", "--output",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0);
        texts.push(without_timestamp(&out).replace(name, ""));
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn csv_output_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nu.csv");
    let o = heisen(&[
        "semigroup", "--route", "fourier", "--theta", "0", "--grid", "8", "--extent", "4", "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let grid = GridSpec::cubic(1, 8, 4.0).unwrap();
    let f = SampledField::read_csv(&grid, Space::Position, fs::read(&out).unwrap().as_slice()).unwrap();
    assert!((f.integral().re - 1.0).abs() < 1e-10);
}

#[test]
fn perturb_writes_decay_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("decay.json");
    let o = heisen(&["perturb", "--t-list", "0.25,0.5,1,2,4", "--p", "5", "--report", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&out);
    let r = &v["results"];
    assert_eq!(r["p"], 5.0);
    assert_eq!(r["shells"].as_array().unwrap().len(), 2);
    assert_eq!(r["entries"].as_array().unwrap().len(), 5);
    assert!(r["entries"][0].get("C").is_some());
    assert!(r["ratio"].as_f64().unwrap() >= 1.0);
}

#[test]
fn gamma_csv_columns_and_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.csv");
    let o = heisen(&["gamma", "--t", "1", "--d", "1", "--radii", "0.5,1,2", "--output", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,r,density,predicted_asymptote");
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[2] - 0.5 * (-v[1]).exp()).abs() < 1e-12);
        assert!((v[3] - 0.5).abs() < 1e-12);
    }
}

#[test]
fn gamma_heisenberg_slopes() {
    let o = heisen(&["gamma", "--heisenberg", "--t", "0.5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout[o.stdout.iter().position(|&b| b == b'{').unwrap()..]).unwrap();
    let r = &v["results"][0];
    assert_eq!(r["predicted"], -2.0);
    assert!(r["heisenberg_slope"].as_f64().unwrap() < 0.0);
}

#[test]
fn config_file_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# fixture\ngrid = 8\nextent = 4\nt = 0.5\ngenerator = mix\ncomposition = 1*log1p + 0.1*pow(0.5)\n")
        .unwrap();
    let out = dir.path().join("mu.json");
    let o = heisen(&[
        "semigroup", "--config", cfg.to_str().unwrap(), "--extent", "5", "--output", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let c = &read_json(&out)["config"];
    assert_eq!(c["grid"], 8);
    assert_eq!(c["extent"], 5.0);
    assert_eq!(c["t"][0], 0.5);
    assert_eq!(c["generator"], "mix");
    assert_eq!(c["threads"], 1);
}

#[test]
fn invalid_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_cfg = dir.path().join("bad.cfg");
    fs::write(&bad_cfg, "colour = red\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["semigroup", "--route", "sideways"],
        vec!["semigroup", "--t", "-1"],
        vec!["semigroup", "--t", "1,x"],
        vec!["semigroup", "--generator", "nonexistent"],
        vec!["semigroup", "--grid", "7"],
        vec!["semigroup", "--grid", "32"],
        vec!["semigroup", "--route", "fourier", "--theta", "1"],
        vec!["semigroup", "--output", "out.txt"],
        vec!["semigroup", "--config", bad_cfg.to_str().unwrap()],
        vec!["verify", "--suite", "no.such.suite"],
        vec!["gamma", "--d", "0"],
        vec!["perturb", "--report", "r.csv"],
        vec!["frobnicate"],
    ];
    for args in cases {
        assert_eq!(code(&heisen(&args)), 2, "{args:?}");
    }
    assert_eq!(code(&heisen(&["--help"])), 0);
}
