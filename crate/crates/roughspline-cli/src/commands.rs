//! One function per subcommand. Each returns `Ok(())` for exit 0 or a
//! `CliFailure` carrying the exit code and a message for stderr; anything a
//! user can fix in the invocation or an input file is a config failure.

use crate::config::{load_json, require_schema, CliConfig, DemoConfig};
use crate::svg::{render, RatePlot};
use crate::{AnalyzeArgs, CliFailure, DemoArgs, EvalArgs, PredictArgs, StudyRunArgs};
use roughspline::pointsets::{fill_distance, is_unisolvent, parse_points_csv, separation_radius};
use roughspline::study::{fit_rate, StudyError, RATE_DOMINANCE_SLACK};
use roughspline::surrogate::seminorm_scaling_probe;
use roughspline::{
    run_study, solve_interpolant, Domain, InterpolationProblem, KernelSpec, NodeGenerator,
    PointSet, StudyReport,
};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Rank tolerance for the unisolvency verdicts printed by `nodes analyze`.
const UNISOLVENCY_TOL: f64 = 1e-10;

fn write_file(path: &Path, content: &str) -> Result<(), CliFailure> {
    std::fs::write(path, content)
        .map_err(|e| CliFailure::Config(format!("cannot write {}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, CliFailure> {
    std::fs::read_to_string(path)
        .map_err(|e| CliFailure::Config(format!("cannot read {}: {e}", path.display())))
}

/// Builds a box domain from --lo/--hi, or falls back when neither is given.
fn domain_from_flags(
    lo: Option<&[f64]>,
    hi: Option<&[f64]>,
    d: usize,
    fallback: impl FnOnce() -> Domain,
) -> Result<Domain, CliFailure> {
    match (lo, hi) {
        (None, None) => Ok(fallback()),
        (Some(lo), Some(hi)) => {
            if lo.len() != d || hi.len() != d {
                return Err(CliFailure::Config(format!(
                    "--lo and --hi must each have {d} components, got {} and {}",
                    lo.len(),
                    hi.len()
                )));
            }
            Ok(Domain::Box {
                bounds: lo.iter().zip(hi).map(|(&a, &b)| (a, b)).collect(),
            })
        }
        _ => Err(CliFailure::Config(
            "--lo and --hi must be given together".into(),
        )),
    }
}

/// Smallest box containing the nodes; degenerate axes widen by a half unit
/// so the box stays a valid domain.
fn tight_box(nodes: &[Vec<f64>]) -> Domain {
    let d = nodes[0].len();
    let bounds = (0..d)
        .map(|j| {
            let lo = nodes.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min);
            let hi = nodes.iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max);
            if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        })
        .collect();
    Domain::Box { bounds }
}

pub fn study_run(seed: Option<u64>, args: &StudyRunArgs) -> Result<(), CliFailure> {
    let mut doc: CliConfig = load_json(&args.config)?;
    require_schema(doc.schema_version)?;
    if let Some(s) = seed {
        if let NodeGenerator::JitteredGrid { seed, .. } = &mut doc.study.generator {
            *seed = s;
        }
    }
    let report = run_study(&doc.study).map_err(|e| match e {
        StudyError::AllLevelsFailed => CliFailure::Numeric(e.to_string()),
        other => CliFailure::Config(other.to_string()),
    })?;

    let pick = |flag: &Option<PathBuf>, config: Option<PathBuf>| flag.clone().or(config);
    if let Some(p) = pick(&args.csv, doc.output.csv) {
        write_file(&p, &report.to_csv())?;
    }
    if let Some(p) = pick(&args.json, doc.output.json) {
        write_file(&p, &report.to_json())?;
    }
    if let Some(p) = pick(&args.svg, doc.output.svg) {
        write_file(&p, &render(&RatePlot::from_report(&report)))?;
    }

    let summary = serde_json::json!({
        "levels": report.rows.len(),
        "fitted_slope": report.fitted_slope,
        "slope_stderr": report.slope_stderr,
        "predicted_rate": report.predicted_rate,
        "pass": report.pass,
    });
    println!("{summary}");

    if args.check && !report.pass {
        return Err(CliFailure::Check(check_failure(&report)));
    }
    Ok(())
}

fn check_failure(report: &StudyReport) -> String {
    match report.fitted_slope {
        Some(s) => format!(
            "rate check failed: fitted slope {s} is below predicted rate {} minus slack {}",
            report.predicted_rate, RATE_DOMINANCE_SLACK
        ),
        None => "rate check failed: no two usable levels sat above the error floor".into(),
    }
}

pub fn study_predict(args: &PredictArgs) -> Result<(), CliFailure> {
    let kernel = KernelSpec::new(args.d, args.m, args.mu, args.poly_degree)
        .map_err(|e| CliFailure::Config(e.to_string()))?;
    let rate = kernel
        .predicted_rate(args.k)
        .map_err(|e| CliFailure::Config(e.to_string()))?;
    let out = serde_json::json!({
        "d": kernel.d,
        "m": kernel.m,
        "mu": kernel.mu,
        "beta": kernel.beta,
        "poly_degree": kernel.poly_degree,
        "k": args.k,
        "predicted_rate": rate,
    });
    println!("{out}");
    Ok(())
}

pub fn nodes_analyze(args: &AnalyzeArgs) -> Result<(), CliFailure> {
    let text = read_file(&args.points)?;
    let pts = parse_points_csv(&text).map_err(|e| CliFailure::Config(e.to_string()))?;
    let d = pts[0].len();
    let domain = domain_from_flags(args.lo.as_deref(), args.hi.as_deref(), d, || {
        Domain::unit_box(d)
    })?;
    let ps = PointSet::new(pts, domain).map_err(|e| CliFailure::Config(e.to_string()))?;
    let h = fill_distance(&ps, args.resolution).map_err(|e| CliFailure::Config(e.to_string()))?;
    let q = separation_radius(&ps).ok();
    let unisolvent: Vec<bool> = (0..=3)
        .map(|deg| is_unisolvent(&ps, deg, UNISOLVENCY_TOL))
        .collect();
    let mut out = serde_json::json!({
        "n": ps.len(),
        "dim": ps.dim(),
        "h": h,
        "q": q,
        "mesh_ratio": q.map(|q| h / q),
        "unisolvent_by_degree": unisolvent,
    });
    if q.is_none() {
        out["warning"] =
            serde_json::Value::String("separation radius needs at least two points".into());
    }
    println!("{out}");
    Ok(())
}

/// Parses the data CSV for `interp eval`: header `x1,...,xd,value`, one node
/// and its data value per row.
fn parse_data_csv(text: &str, d: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>), CliFailure> {
    let mut want = String::new();
    for i in 1..=d {
        write!(want, "x{i},").unwrap();
    }
    want.push_str("value");

    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| CliFailure::Config("data CSV is empty".into()))?;
    let normalized: Vec<&str> = header.split(',').map(str::trim).collect();
    if normalized.join(",") != want {
        return Err(CliFailure::Config(format!(
            "data CSV header must be {want}, got {header:?}"
        )));
    }
    let mut nodes = Vec::new();
    let mut values = Vec::new();
    for (ln, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != d + 1 {
            return Err(CliFailure::Config(format!(
                "data CSV row {} has {} fields, expected {}",
                ln + 2,
                fields.len(),
                d + 1
            )));
        }
        let mut row = Vec::with_capacity(d + 1);
        for f in fields {
            let v: f64 = f.parse().map_err(|_| {
                CliFailure::Config(format!("bad number {f:?} on data CSV row {}", ln + 2))
            })?;
            row.push(v);
        }
        values.push(row.pop().unwrap());
        nodes.push(row);
    }
    if nodes.is_empty() {
        return Err(CliFailure::Config("data CSV has no rows".into()));
    }
    Ok((nodes, values))
}

pub fn interp_eval(args: &EvalArgs) -> Result<(), CliFailure> {
    let kernel = KernelSpec::new(args.d, args.m, args.mu, args.poly_degree)
        .map_err(|e| CliFailure::Config(e.to_string()))?;
    let d = args.d as usize;

    let (nodes, values) = parse_data_csv(&read_file(&args.data)?, d)?;
    let domain = domain_from_flags(args.lo.as_deref(), args.hi.as_deref(), d, || {
        tight_box(&nodes)
    })?;
    let ps = PointSet::new(nodes, domain).map_err(|e| CliFailure::Config(e.to_string()))?;
    let interp = solve_interpolant(InterpolationProblem {
        kernel,
        nodes: ps,
        values,
    })
    .map_err(|e| CliFailure::Numeric(e.to_string()))?;

    let eval_points =
        parse_points_csv(&read_file(&args.points)?).map_err(|e| CliFailure::Config(e.to_string()))?;
    if eval_points[0].len() != d {
        return Err(CliFailure::Config(format!(
            "evaluation points have dimension {}, expected {d}",
            eval_points[0].len()
        )));
    }
    let vals = interp
        .evaluate_many(&eval_points)
        .map_err(|e| CliFailure::Numeric(e.to_string()))?;

    let mut out = String::new();
    for i in 1..=d {
        write!(out, "x{i},").unwrap();
    }
    out.push_str("value\n");
    for (p, v) in eval_points.iter().zip(&vals) {
        for c in p {
            write!(out, "{c},").unwrap();
        }
        writeln!(out, "{v}").unwrap();
    }
    match &args.out {
        Some(path) => write_file(path, &out)?,
        None => print!("{out}"),
    }
    Ok(())
}

pub fn surrogate_demo(args: &DemoArgs) -> Result<(), CliFailure> {
    let doc: DemoConfig = load_json(&args.config)?;
    require_schema(doc.schema_version)?;
    if doc.target.dim() != 1 {
        return Err(CliFailure::Config("surrogate demo is d=1 only".into()));
    }
    let rows = seminorm_scaling_probe(&doc.target, doc.k, doc.m, &doc.q_list)
        .map_err(|e| CliFailure::Config(e.to_string()))?;

    let qs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let ss: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let slope = fit_rate(&qs, &ss, None).ok().map(|t| t.0);
    let max_seminorm = ss.iter().cloned().fold(0.0, f64::max);

    if let Some(p) = args.csv.clone().or(doc.output.csv) {
        let mut csv = String::from("q,seminorm\n");
        for (q, s) in &rows {
            writeln!(csv, "{q},{s}").unwrap();
        }
        write_file(&p, &csv)?;
    }

    let out = serde_json::json!({
        "points": rows.len(),
        "fitted_slope": slope,
        "reference_slope": doc.k as f64 - doc.m as f64,
        "max_seminorm": max_seminorm,
    });
    println!("{out}");
    Ok(())
}
