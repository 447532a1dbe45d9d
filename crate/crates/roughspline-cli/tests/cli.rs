//! End-to-end tests that spawn the real binary and assert on exit codes,
//! stdout JSON, and the files it writes.

use roughspline::pointsets::{fill_distance, generate_halton, separation_radius};
use roughspline::Domain;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_roughspline"))
}

/// Per-test scratch directory; tests run in parallel, so the tag keeps them
/// apart.
fn tmp_dir(tag: &str) -> PathBuf {
    let p = std::env::temp_dir().join(format!("roughspline-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&p).unwrap();
    p
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {:?}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn stderr_text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A small, fast smooth study: exact grid, three levels.
fn smooth_config() -> Value {
    json!({
        "schema_version": 1,
        "study": {
            "kernel": {"d": 1, "m": 2, "mu": 0.0},
            "target": {"family": "sine", "d": 1, "frequency": std::f64::consts::TAU},
            "rough_order": 2,
            "domain": {"kind": "box", "bounds": [[0.0, 1.0]]},
            "levels": [8, 16, 32],
            "generator": {"kind": "jittered_grid", "jitter": 0.0, "seed": 7},
            "mesh_ratio_bound": 2.0,
            "quad_panels": 64,
            "timing": false
        },
        "output": {}
    })
}

#[test]
fn smooth_study_passes_check_and_writes_the_table() {
    let dir = tmp_dir("smooth");
    let cfg = dir.join("cfg.json");
    let csv = dir.join("out.csv");
    write(&cfg, &smooth_config().to_string());

    let out = bin()
        .args(["study", "run"])
        .arg(&cfg)
        .arg("--check")
        .arg("--csv")
        .arg(&csv)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_text(&out));

    let summary = stdout_json(&out);
    assert_eq!(summary["pass"], Value::Bool(true));
    assert_eq!(summary["predicted_rate"], json!(2.0));
    assert!(summary["fitted_slope"].as_f64().unwrap() >= 1.85);

    let table = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "level,n,h,q,mesh_ratio,l2_error,cond_est,wall_ms");
    assert_eq!(lines.len(), 4);
}

#[test]
fn seed_flag_overrides_the_config_and_is_deterministic() {
    let dir = tmp_dir("seed");
    let cfg = dir.join("cfg.json");
    let mut doc = smooth_config();
    doc["study"]["generator"] = json!({"kind": "jittered_grid", "jitter": 0.4, "seed": 3});
    write(&cfg, &doc.to_string());

    let run = |csv: &Path, seed: Option<&str>| {
        let mut c = bin();
        c.args(["study", "run"]).arg(&cfg).arg("--csv").arg(csv);
        if let Some(s) = seed {
            c.args(["--seed", s]);
        }
        let out = c.output().unwrap();
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_text(&out));
        std::fs::read(csv).unwrap()
    };
    let a = run(&dir.join("a.csv"), Some("99"));
    let b = run(&dir.join("b.csv"), Some("99"));
    let c = run(&dir.join("c.csv"), None);
    assert_eq!(a, b, "same seed must give byte-identical tables");
    assert_ne!(a, c, "overriding the seed must change the jittered nodes");
}

#[test]
fn negative_level_counts_are_rejected_naming_the_field() {
    let dir = tmp_dir("neglevel");
    let cfg = dir.join("cfg.json");
    let mut doc = smooth_config();
    doc["study"]["levels"] = json!([-4, 8]);
    write(&cfg, &doc.to_string());

    let out = bin().args(["study", "run"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr_text(&out).contains("study.levels"),
        "diagnostic must name the offending field: {}",
        stderr_text(&out)
    );
}

#[test]
fn unknown_keys_and_stale_schemas_are_rejected() {
    let dir = tmp_dir("schema");

    let cfg = dir.join("unknown.json");
    let mut doc = smooth_config();
    doc["study"]["typo_field"] = json!(1);
    write(&cfg, &doc.to_string());
    let out = bin().args(["study", "run"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_text(&out).contains("unknown field"));

    let cfg = dir.join("stale.json");
    let mut doc = smooth_config();
    doc["schema_version"] = json!(99);
    write(&cfg, &doc.to_string());
    let out = bin().args(["study", "run"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_text(&out).contains("schema_version"));
}

#[test]
fn an_undefined_rate_is_a_config_error_citing_the_continuity_condition() {
    let dir = tmp_dir("rate");
    let cfg = dir.join("cfg.json");
    // In d=2 with mu=0, order k=1 sits exactly on the continuity boundary.
    let doc = json!({
        "schema_version": 1,
        "study": {
            "kernel": {"d": 2, "m": 2, "mu": 0.0},
            "target": {"family": "sine", "d": 2, "frequency": 3.0},
            "rough_order": 1,
            "domain": {"kind": "box", "bounds": [[0.0, 1.0], [0.0, 1.0]]},
            "levels": [9, 16],
            "generator": {"kind": "halton"},
            "mesh_ratio_bound": 40.0,
            "quad_panels": 16,
            "timing": false
        },
        "output": {}
    });
    write(&cfg, &doc.to_string());

    let out = bin().args(["study", "run"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr_text(&out).contains("k + mu - d/2"),
        "stderr: {}",
        stderr_text(&out)
    );
}

#[test]
fn the_check_gate_exits_4_when_the_rate_falls_short() {
    let dir = tmp_dir("gate");
    let cfg = dir.join("cfg.json");
    // A cusp converges near first order; judging it against second order
    // must fail the gate (but only the gate).
    let mut doc = smooth_config();
    doc["study"]["target"] = json!({"family": "power_cusp", "center": [0.5], "alpha": 0.6});
    doc["study"]["levels"] = json!([8, 16, 32, 64]);
    doc["study"]["quad_panels"] = json!(128);
    write(&cfg, &doc.to_string());

    let out = bin().args(["study", "run"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "without --check: report only");
    let summary = stdout_json(&out);
    assert_eq!(summary["pass"], Value::Bool(false));

    let out = bin()
        .args(["study", "run"])
        .arg(&cfg)
        .arg("--check")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr_text(&out).contains("rate check failed"));
}

#[test]
fn a_study_where_every_level_fails_exits_3() {
    let dir = tmp_dir("allfail");
    let cfg = dir.join("cfg.json");
    // One node cannot carry the polynomial side conditions, so the single
    // level fails and the study has nothing to report.
    let mut doc = smooth_config();
    doc["study"]["levels"] = json!([1]);
    write(&cfg, &doc.to_string());

    let out = bin().args(["study", "run"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr_text(&out));
}

#[test]
fn nodes_analyze_reports_the_textbook_three_point_geometry() {
    let dir = tmp_dir("three");
    let pts = dir.join("pts.csv");
    write(&pts, "x1\n0\n0.5\n1\n");

    let out = bin().args(["nodes", "analyze"]).arg(&pts).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_text(&out));
    let v = stdout_json(&out);
    assert_eq!(v["h"], json!(0.25));
    assert_eq!(v["q"], json!(0.25));
    assert_eq!(v["mesh_ratio"], json!(1.0));
    assert_eq!(v["unisolvent_by_degree"], json!([true, true, true, false]));
}

#[test]
fn nodes_analyze_warns_on_a_single_point() {
    let dir = tmp_dir("single");
    let pts = dir.join("pts.csv");
    write(&pts, "x1\n0.42\n");

    let out = bin().args(["nodes", "analyze"]).arg(&pts).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["q"], Value::Null);
    assert_eq!(v["mesh_ratio"], Value::Null);
    assert!(v["warning"].as_str().unwrap().contains("two points"));
}

#[test]
fn nodes_analyze_rejects_malformed_csv() {
    let dir = tmp_dir("badcsv");
    let pts = dir.join("pts.csv");
    write(&pts, "x1\n0.1\nnot-a-number\n");

    let out = bin().args(["nodes", "analyze"]).arg(&pts).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let pts = dir.join("badheader.csv");
    write(&pts, "a,b\n0.1,0.2\n");
    let out = bin().args(["nodes", "analyze"]).arg(&pts).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn nodes_analyze_matches_the_library_bit_for_bit() {
    let dir = tmp_dir("bitexact");
    let ps = generate_halton(&Domain::unit_box(2), 1000).unwrap();
    let pts = dir.join("halton.csv");
    write(&pts, &ps.to_csv());

    let out = bin()
        .args(["nodes", "analyze"])
        .arg(&pts)
        .args(["--resolution", "257"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_text(&out));
    let v = stdout_json(&out);

    let h = fill_distance(&ps, 257).unwrap();
    let q = separation_radius(&ps).unwrap();
    assert_eq!(v["h"].as_f64().unwrap().to_bits(), h.to_bits());
    assert_eq!(v["q"].as_f64().unwrap().to_bits(), q.to_bits());
    assert_eq!(
        v["mesh_ratio"].as_f64().unwrap().to_bits(),
        (h / q).to_bits()
    );
    assert_eq!(v["n"], json!(1000));
}

#[test]
fn interp_eval_reproduces_linear_data() {
    let dir = tmp_dir("linear");
    let data = dir.join("data.csv");
    let points = dir.join("eval.csv");
    write(&data, "x1,value\n0,1\n0.25,1.5\n0.5,2\n0.75,2.5\n1,3\n");
    write(&points, "x1\n0.1\n0.33\n0.62\n0.9\n");

    let out = bin()
        .args(["interp", "eval", "--d", "1", "--m", "2", "--mu", "0"])
        .arg("--data")
        .arg(&data)
        .arg("--points")
        .arg(&points)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_text(&out));

    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,value"));
    for line in lines {
        let (x, v) = line.split_once(',').unwrap();
        let (x, v): (f64, f64) = (x.parse().unwrap(), v.parse().unwrap());
        assert!(
            (v - (1.0 + 2.0 * x)).abs() < 1e-9,
            "kernel interpolation must reproduce its polynomial tail: {line}"
        );
    }
}

#[test]
fn interp_eval_output_re_parses_to_the_library_values_bit_for_bit() {
    let dir = tmp_dir("roundtrip");
    let data = dir.join("data.csv");
    let points = dir.join("eval.csv");
    let out_csv = dir.join("vals.csv");
    write(
        &data,
        "x1,value\n0.05,0.31\n0.2,-1.7\n0.45,0.9\n0.7,2.2\n0.95,-0.4\n",
    );
    write(&points, "x1\n0.11\n0.39\n0.5\n0.83\n");

    let out = bin()
        .args(["interp", "eval", "--d", "1", "--m", "2", "--mu", "0.5"])
        .args(["--lo", "0", "--hi", "1"])
        .arg("--data")
        .arg(&data)
        .arg("--points")
        .arg(&points)
        .arg("--out")
        .arg(&out_csv)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_text(&out));

    // Rebuild the same problem in-process; shortest round-trip formatting
    // means the file must re-parse to the exact binary values.
    let kernel = roughspline::KernelSpec::new(1, 2, 0.5, None).unwrap();
    let nodes = vec![vec![0.05], vec![0.2], vec![0.45], vec![0.7], vec![0.95]];
    let values = vec![0.31, -1.7, 0.9, 2.2, -0.4];
    let ps = roughspline::PointSet::new(nodes, Domain::unit_box(1)).unwrap();
    let interp = roughspline::solve_interpolant(roughspline::InterpolationProblem {
        kernel,
        nodes: ps,
        values,
    })
    .unwrap();
    let want = interp
        .evaluate_many(&[vec![0.11], vec![0.39], vec![0.5], vec![0.83]])
        .unwrap();

    let text = std::fs::read_to_string(&out_csv).unwrap();
    let got: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split_once(',').unwrap().1.parse().unwrap())
        .collect();
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(&want) {
        assert_eq!(g.to_bits(), w.to_bits());
    }
}

fn probe_config(target: Value, k: u32) -> Value {
    json!({
        "schema_version": 1,
        "target": target,
        "k": k,
        "m": 2,
        "q_list": [0.125, 0.0625, 0.03125],
        "output": {}
    })
}

#[test]
fn surrogate_demo_measures_the_cusp_scaling_slope() {
    let dir = tmp_dir("probe");
    let cfg = dir.join("cfg.json");
    let csv = dir.join("probe.csv");
    write(
        &cfg,
        &probe_config(json!({"family": "power_cusp", "center": [0.5], "alpha": 0.6}), 1)
            .to_string(),
    );

    let out = bin()
        .args(["surrogate", "demo"])
        .arg(&cfg)
        .arg("--csv")
        .arg(&csv)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_text(&out));
    let v = stdout_json(&out);
    let slope = v["fitted_slope"].as_f64().unwrap();
    assert_eq!(v["reference_slope"], json!(-1.0));
    assert!(
        (slope + 1.0).abs() < 0.45,
        "seminorm growth should track q^(k-m): slope {slope}"
    );

    let table = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "q,seminorm");
    assert_eq!(lines.len(), 4);
}

#[test]
fn surrogate_demo_rejects_multidimensional_targets() {
    let dir = tmp_dir("probe2d");
    let cfg = dir.join("cfg.json");
    write(
        &cfg,
        &probe_config(json!({"family": "sine", "d": 2, "frequency": 3.0}), 1).to_string(),
    );

    let out = bin().args(["surrogate", "demo"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_text(&out).contains("d=1 only"));
}

#[test]
fn surrogate_demo_sees_a_flat_floor_on_low_degree_polynomials() {
    let dir = tmp_dir("probepoly");
    let cfg = dir.join("cfg.json");
    write(
        &cfg,
        &probe_config(json!({"family": "polynomial", "coeffs": [0.3, -1.1]}), 1).to_string(),
    );

    let out = bin().args(["surrogate", "demo"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_text(&out));
    let v = stdout_json(&out);
    assert!(
        v["max_seminorm"].as_f64().unwrap() < 1e-6,
        "order-2 seminorm of a degree-1 polynomial is pure noise: {v}"
    );
}

#[test]
fn study_predict_prints_the_rate_and_polices_continuity() {
    let out = bin()
        .args(["study", "predict", "--d", "1", "--m", "2", "--mu", "0.5", "--k", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["predicted_rate"], json!(1.5));
    assert_eq!(v["beta"], json!(4.0));

    let out = bin()
        .args(["study", "predict", "--d", "3", "--m", "2", "--mu", "0.0", "--k", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_text(&out).contains("k + mu - d/2"));
}
