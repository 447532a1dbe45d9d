//! Refinement studies: solve the interpolation problem on a ladder of node
//! sets, measure the L2 error against the target on each rung, and fit the
//! decay exponent of error against fill distance for comparison with the
//! kernel's predicted rate.
//!
//! A study never judges the constant in front of the rate, only the
//! exponent: the theory controls `error <= C * h^rate` with an uncontrolled
//! `C`, so the harness fits `log error` against `log h` and checks the
//! slope. Levels whose mesh ratio exceeds the configured bound or whose
//! condition estimate exceeds the cap are excluded from the fit, as is the
//! coarsest level by default (pre-asymptotic). The quadrature resolution is
//! tied to the finest level and shared by every level so that differences
//! across levels are never quadrature artifacts.

use crate::interpolator::{solve_interpolant, Interpolant, InterpolationProblem};
use crate::kernels::{KernelError, KernelSpec};
use crate::pointsets::{
    generate_halton, generate_jittered_grid, geometry_stats, Domain, PointSet,
};
use crate::quadrature::integrate_box;
use crate::targets::TargetFunction;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::time::Instant;
use thiserror::Error;

/// Gauss points per axis per panel in [`l2_error`].
pub const L2_QUAD_ORDER: usize = 5;
/// Errors at or below this are treated as exact reproduction and excluded
/// from rate fits; fitting a slope through rounding noise is meaningless.
pub const ERROR_FLOOR: f64 = 1e-10;
/// Slack subtracted from the predicted rate when judging a fitted slope.
pub const RATE_DOMINANCE_SLACK: f64 = 0.15;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("levels must be a strictly increasing list of positive node counts")]
    BadLevels,
    #[error("fit window {lo}..={hi} does not address {n} levels")]
    FitWindowOutOfRange { lo: usize, hi: usize, n: usize },
    #[error("mesh ratio bound {0} must be at least 1")]
    MeshRatioBoundTooSmall(f64),
    #[error("condition cap {0} must be positive")]
    BadConditionCap(f64),
    #[error("dimension mismatch: kernel d={kernel}, target d={target}, domain d={domain}")]
    DimensionMismatch { kernel: usize, target: usize, domain: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("{panels} quadrature panels per axis, but the resolution rule needs {needed}")]
    QuadratureUnderresolved { panels: usize, needed: usize },
    #[error("rate fit needs at least 2 usable points above the error floor, found {0}")]
    InsufficientPoints(usize),
    #[error("rate fit inputs must be positive and finite")]
    NonpositiveInput,
    #[error("rate fit lists have lengths {h} and {e}")]
    FitLengthMismatch { h: usize, e: usize },
    #[error("every level failed to solve")]
    AllLevelsFailed,
}

/// How nodes are produced at each level.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeGenerator {
    /// Cell-centered grid with per-cell jitter; levels count nodes per axis.
    JitteredGrid { jitter: f64, seed: u64 },
    /// Halton low-discrepancy sequence; levels count total nodes.
    Halton,
}

/// A complete description of one convergence study.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub kernel: KernelSpec,
    pub target: TargetFunction,
    /// Smoothness order whose predicted rate the study is judged against.
    pub rough_order: u32,
    pub domain: Domain,
    /// Node counts, one per level: per axis for grids, total for Halton.
    pub levels: Vec<usize>,
    pub generator: NodeGenerator,
    /// Quasi-uniformity cap; levels with `h/q` above it leave the fit.
    pub mesh_ratio_bound: f64,
    /// Quadrature panels per axis for the L2 error, shared across levels.
    pub quad_panels: usize,
    /// Inclusive index range of levels entering the rate fit. `None` drops
    /// the coarsest level and keeps the rest.
    #[serde(default)]
    pub fit_window: Option<(usize, usize)>,
    /// Levels whose condition estimate exceeds this leave the fit.
    #[serde(default = "default_condition_cap")]
    pub condition_cap: f64,
    /// Record wall-clock times per level. Disable to make the emitted CSV
    /// and JSON byte-identical across runs of the same config and seed.
    #[serde(default = "default_timing")]
    pub timing: bool,
}

fn default_condition_cap() -> f64 {
    1e12
}

fn default_timing() -> bool {
    true
}

impl StudyConfig {
    /// Checks every config invariant that does not require running a level.
    pub fn validate(&self) -> Result<(), StudyError> {
        let d = self.kernel.d as usize;
        if self.target.dim() != d || self.domain.dim() != d {
            return Err(StudyError::DimensionMismatch {
                kernel: d,
                target: self.target.dim(),
                domain: self.domain.dim(),
            });
        }
        if self.levels.is_empty()
            || self.levels[0] == 0
            || !self.levels.windows(2).all(|w| w[0] < w[1])
        {
            return Err(StudyError::BadLevels);
        }
        if let Some((lo, hi)) = self.fit_window {
            if lo > hi || hi >= self.levels.len() {
                return Err(StudyError::FitWindowOutOfRange { lo, hi, n: self.levels.len() });
            }
        }
        if self.mesh_ratio_bound.is_nan() || self.mesh_ratio_bound < 1.0 {
            return Err(StudyError::MeshRatioBoundTooSmall(self.mesh_ratio_bound));
        }
        if self.condition_cap.is_nan() || self.condition_cap <= 0.0 {
            return Err(StudyError::BadConditionCap(self.condition_cap));
        }
        self.kernel.predicted_rate(self.rough_order)?;
        // Resolution rule against the finest level; coarser levels then
        // satisfy it automatically.
        let finest = *self.levels.last().unwrap();
        let needed = 2 * nodes_per_axis(finest, d, &self.generator);
        if self.quad_panels < needed {
            return Err(StudyError::QuadratureUnderresolved {
                panels: self.quad_panels,
                needed,
            });
        }
        Ok(())
    }
}

/// Nominal per-axis node count of a level, used by resolution rules.
fn nodes_per_axis(level: usize, d: usize, generator: &NodeGenerator) -> usize {
    match generator {
        NodeGenerator::JitteredGrid { .. } => level,
        NodeGenerator::Halton => (level as f64).powf(1.0 / d as f64).ceil() as usize,
    }
}

/// Scan density for fill-distance estimates, per axis per node: fine in low
/// dimension where it is cheap, coarser as the tensor grid grows.
fn fill_scan_factor(d: usize) -> usize {
    match d {
        1 => 16,
        2 => 8,
        _ => 4,
    }
}

/// One level's measurements. Fields are `None` where the level failed
/// before producing them; `error` carries the failure description.
#[derive(Debug, Clone, Serialize)]
pub struct LevelRow {
    /// Configured node count (per axis for grids, total for Halton).
    pub level: usize,
    /// Actual number of nodes generated.
    pub n: usize,
    pub h: Option<f64>,
    pub q: Option<f64>,
    pub mesh_ratio: Option<f64>,
    pub l2_error: Option<f64>,
    pub cond_est: Option<f64>,
    pub wall_ms: f64,
    /// Mesh ratio measured and within the configured bound.
    pub mesh_ok: bool,
    /// Condition estimate within the configured cap.
    pub cond_ok: bool,
    pub error: Option<String>,
}

/// The outcome of a study: per-level rows plus the fitted exponent.
#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub config_echo: StudyConfig,
    pub rows: Vec<LevelRow>,
    /// `None` when fewer than two usable errors sat above the floor.
    pub fitted_slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub predicted_rate: f64,
    /// True when the fitted slope reaches the predicted rate minus
    /// [`RATE_DOMINANCE_SLACK`], or when every usable level reproduced the
    /// target to the error floor (no rate left to measure).
    pub pass: bool,
}

impl StudyReport {
    /// CSV table of the rows. Missing values render as NaN; floats use
    /// Rust's shortest round-trip formatting, so the table re-parses to the
    /// exact binary values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,n,h,q,mesh_ratio,l2_error,cond_est,wall_ms\n");
        for r in &self.rows {
            let cell = |v: Option<f64>| v.unwrap_or(f64::NAN);
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.level,
                r.n,
                cell(r.h),
                cell(r.q),
                cell(r.mesh_ratio),
                cell(r.l2_error),
                cell(r.cond_est),
                r.wall_ms
            )
            .expect("string write cannot fail");
        }
        out
    }

    /// Pretty JSON of the whole report, config echo included.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The `(h, l2_error)` pairs the rate fit used, in level order. Useful
    /// for drawing the fitted line over exactly its own data.
    pub fn fit_points(&self) -> Vec<(f64, f64)> {
        fit_selection(&self.config_echo, &self.rows).0
    }
}

/// L2 distance between the target and the interpolant over the domain,
/// by tensor Gauss panels graded toward the target's singular points.
/// `quad_panels` must be at least twice the per-axis node count so the
/// quadrature resolves structure at the node scale.
pub fn l2_error(
    interp: &Interpolant,
    f: &TargetFunction,
    domain: &Domain,
    quad_panels: usize,
) -> Result<f64, StudyError> {
    let d = domain.dim();
    if f.dim() != d || interp.problem.nodes.dim() != d {
        return Err(StudyError::DimensionMismatch {
            kernel: interp.problem.nodes.dim(),
            target: f.dim(),
            domain: d,
        });
    }
    let n = interp.problem.nodes.len();
    let needed = 2 * ((n as f64).powf(1.0 / d as f64).ceil() as usize);
    if quad_panels < needed {
        return Err(StudyError::QuadratureUnderresolved { panels: quad_panels, needed });
    }
    let bounds = domain.bounding_box();
    // Boxes coincide with their bounding box; balls need clipping.
    let clip = matches!(domain, Domain::Ball { .. });
    let sq = integrate_box(&bounds, quad_panels, f.singular_points(), L2_QUAD_ORDER, |x| {
        if clip && !domain.contains(x, 0.0) {
            return 0.0;
        }
        let r = f.eval(x) - interp.evaluate(x).expect("dimension checked above");
        r * r
    });
    Ok(sq.max(0.0).sqrt())
}

/// Least-squares slope of `log e` against `log h` with its standard error,
/// over an inclusive index window (`None` means all points). Points with
/// error at or below [`ERROR_FLOOR`] are excluded; every windowed input
/// must be positive and finite.
pub fn fit_rate(
    h_list: &[f64],
    e_list: &[f64],
    window: Option<(usize, usize)>,
) -> Result<(f64, f64), StudyError> {
    if h_list.len() != e_list.len() {
        return Err(StudyError::FitLengthMismatch { h: h_list.len(), e: e_list.len() });
    }
    if h_list.is_empty() {
        return Err(StudyError::InsufficientPoints(0));
    }
    let (lo, hi) = window.unwrap_or((0, h_list.len() - 1));
    if lo > hi || hi >= h_list.len() {
        return Err(StudyError::FitWindowOutOfRange { lo, hi, n: h_list.len() });
    }
    let mut xs = Vec::with_capacity(hi - lo + 1);
    let mut ys = Vec::with_capacity(hi - lo + 1);
    for i in lo..=hi {
        let (h, e) = (h_list[i], e_list[i]);
        if h <= 0.0 || e <= 0.0 || !h.is_finite() || !e.is_finite() {
            return Err(StudyError::NonpositiveInput);
        }
        if e > ERROR_FLOOR {
            xs.push(h.ln());
            ys.push(e.ln());
        }
    }
    // `fit_line` also refuses coincident abscissas (slope undefined).
    crate::linalg::fit_line(&xs, &ys)
        .map(|(slope, _intercept, stderr)| (slope, stderr))
        .ok_or(StudyError::InsufficientPoints(xs.len()))
}

/// Runs one level end to end. Failures are recorded in the row, never
/// propagated: a study survives individual levels.
fn run_level(config: &StudyConfig, level: usize) -> LevelRow {
    let d = config.kernel.d as usize;
    let start = Instant::now();
    let mut row = LevelRow {
        level,
        n: 0,
        h: None,
        q: None,
        mesh_ratio: None,
        l2_error: None,
        cond_est: None,
        wall_ms: 0.0,
        mesh_ok: false,
        cond_ok: false,
        error: None,
    };
    let outcome: Result<(), String> = (|| {
        let nodes: PointSet = match &config.generator {
            // Offsetting the seed per level decorrelates the jitter
            // patterns while staying a pure function of (config, level).
            NodeGenerator::JitteredGrid { jitter, seed } => generate_jittered_grid(
                &config.domain,
                level,
                *jitter,
                seed.wrapping_add(level as u64),
            ),
            NodeGenerator::Halton => generate_halton(&config.domain, level),
        }
        .map_err(|e| e.to_string())?;
        row.n = nodes.len();

        let per_axis = nodes_per_axis(level, d, &config.generator);
        let resolution = fill_scan_factor(d) * per_axis + 1;
        let stats = geometry_stats(&nodes, resolution).map_err(|e| e.to_string())?;
        row.h = Some(stats.h);
        row.q = stats.q;
        row.mesh_ratio = stats.mesh_ratio;
        row.mesh_ok = stats.mesh_ratio.is_some_and(|r| r <= config.mesh_ratio_bound);

        let values: Vec<f64> = nodes.points().iter().map(|p| config.target.eval(p)).collect();
        let problem = InterpolationProblem::new(config.kernel.clone(), nodes, values)
            .map_err(|e| e.to_string())?;
        let interp = solve_interpolant(problem).map_err(|e| e.to_string())?;
        row.cond_est = Some(interp.condition_estimate);
        row.cond_ok = interp.condition_estimate <= config.condition_cap;

        let err = l2_error(&interp, &config.target, &config.domain, config.quad_panels)
            .map_err(|e| e.to_string())?;
        row.l2_error = Some(err);
        Ok(())
    })();
    if let Err(e) = outcome {
        row.error = Some(e);
    }
    if config.timing {
        row.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    }
    row
}

/// Runs the whole ladder: generates nodes, solves, measures, fits.
/// Levels are independent and run in parallel; the report lists them in
/// config order. A level that fails is marked and skipped by the fit; the
/// study only errors when every level failed.
/// The `(h, l2_error)` pairs the rate fit uses, plus the count of usable
/// rows before the error-floor cut. A row is usable when its level ran, it
/// passed the mesh-ratio and condition gates, and it lies inside the fit
/// window (default: everything but the coarsest level).
fn fit_selection(config: &StudyConfig, rows: &[LevelRow]) -> (Vec<(f64, f64)>, usize) {
    let (lo, hi) = config.fit_window.unwrap_or_else(|| {
        // Default: drop the coarsest level as pre-asymptotic, unless it is
        // all there is.
        if rows.len() >= 2 {
            (1, rows.len() - 1)
        } else {
            (0, 0)
        }
    });
    let mut pairs = Vec::new();
    let mut usable = 0usize;
    for row in &rows[lo..=hi] {
        if row.error.is_none() && row.mesh_ok && row.cond_ok {
            if let (Some(h), Some(e)) = (row.h, row.l2_error) {
                usable += 1;
                if e > ERROR_FLOOR {
                    pairs.push((h, e));
                }
            }
        }
    }
    (pairs, usable)
}

pub fn run_study(config: &StudyConfig) -> Result<StudyReport, StudyError> {
    config.validate()?;
    let predicted = config.kernel.predicted_rate(config.rough_order)?;

    let rows: Vec<LevelRow> = config
        .levels
        .par_iter()
        .map(|&level| run_level(config, level))
        .collect();
    if rows.iter().all(|r| r.error.is_some()) {
        return Err(StudyError::AllLevelsFailed);
    }

    let (pairs, usable) = fit_selection(config, &rows);
    let hs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let es: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (fitted_slope, slope_stderr) = match fit_rate(&hs, &es, None) {
        Ok((s, se)) => (Some(s), Some(se)),
        Err(_) => (None, None),
    };
    let pass = match fitted_slope {
        Some(s) => s >= predicted - RATE_DOMINANCE_SLACK,
        // No slope to fit: pass only when the window reproduced the target
        // exactly (every usable error at the floor).
        None => usable > 0 && pairs.is_empty(),
    };
    Ok(StudyReport {
        config_echo: config.clone(),
        rows,
        fitted_slope,
        slope_stderr,
        predicted_rate: predicted,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointsets::generate_jittered_grid;
    use crate::targets::{make_kernel_span_target, make_smooth_reference, SmoothReference};
    use approx::assert_relative_eq;

    fn unit_interval() -> Domain {
        Domain::unit_box(1)
    }

    fn sine_config(levels: Vec<usize>, quad_panels: usize) -> StudyConfig {
        StudyConfig {
            kernel: KernelSpec::new(1, 2, 0.0, None).unwrap(),
            target: make_smooth_reference(SmoothReference::Sine {
                d: 1,
                frequency: 2.0 * std::f64::consts::PI,
            })
            .unwrap(),
            rough_order: 2,
            domain: unit_interval(),
            levels,
            generator: NodeGenerator::JitteredGrid { jitter: 0.0, seed: 7 },
            mesh_ratio_bound: 2.0,
            quad_panels,
            fit_window: None,
            condition_cap: 1e12,
            timing: false,
        }
    }

    #[test]
    fn fit_rate_recovers_exact_power_laws() {
        // Two-point exact quadratic decay.
        let (slope, stderr) = fit_rate(&[0.1, 0.05], &[1e-2, 2.5e-3], None).unwrap();
        assert_relative_eq!(slope, 2.0, max_relative = 1e-12);
        assert_eq!(stderr, 0.0);

        // Five points on e = 3 h.
        let hs: Vec<f64> = (0..5).map(|i| 0.5f64.powi(i)).collect();
        let es: Vec<f64> = hs.iter().map(|h| 3.0 * h).collect();
        let (slope, stderr) = fit_rate(&hs, &es, None).unwrap();
        assert_relative_eq!(slope, 1.0, max_relative = 1e-12);
        assert!(stderr < 1e-12);
    }

    #[test]
    fn fit_rate_handles_noisy_data_within_tolerance() {
        // e = h^1.5 * (1 + 0.05 * noise) over 6 dyadic levels; the noise is
        // a fixed quasi-random sign pattern so the test is deterministic.
        let noise = [0.71, -0.42, 0.93, -0.18, 0.55, -0.86];
        let hs: Vec<f64> = (0..6).map(|i| 0.5f64.powi(i)).collect();
        let es: Vec<f64> = hs
            .iter()
            .zip(noise)
            .map(|(h, z)| h.powf(1.5) * (1.0 + 0.05 * z))
            .collect();
        let (slope, _) = fit_rate(&hs, &es, None).unwrap();
        assert!((slope - 1.5).abs() < 0.1, "slope {slope} not within 1.5 +- 0.1");
    }

    #[test]
    fn fit_rate_rejects_degenerate_inputs() {
        assert!(matches!(
            fit_rate(&[0.1], &[1e-2], None),
            Err(StudyError::InsufficientPoints(1))
        ));
        assert!(matches!(
            fit_rate(&[0.1, 0.05], &[1e-2, -1.0], None),
            Err(StudyError::NonpositiveInput)
        ));
        assert!(matches!(
            fit_rate(&[0.1, 0.0], &[1e-2, 1e-3], None),
            Err(StudyError::NonpositiveInput)
        ));
        assert!(matches!(
            fit_rate(&[0.1, 0.05], &[1e-2], None),
            Err(StudyError::FitLengthMismatch { h: 2, e: 1 })
        ));
        // Both points below the floor leave nothing to fit.
        assert!(matches!(
            fit_rate(&[0.1, 0.05], &[1e-12, 1e-13], None),
            Err(StudyError::InsufficientPoints(0))
        ));
        // Window selection applies before fitting.
        let hs = [0.2, 0.1, 0.05, 0.025];
        let es = [1.0, 1e-2, 2.5e-3, 6.25e-4];
        let (slope, _) = fit_rate(&hs, &es, Some((1, 3))).unwrap();
        assert_relative_eq!(slope, 2.0, max_relative = 1e-12);
        assert!(matches!(
            fit_rate(&hs, &es, Some((2, 4))),
            Err(StudyError::FitWindowOutOfRange { .. })
        ));
    }

    #[test]
    fn zero_data_has_zero_l2_error() {
        let kernel = KernelSpec::new(1, 2, 0.0, None).unwrap();
        let nodes = generate_jittered_grid(&unit_interval(), 6, 0.0, 0).unwrap();
        let problem =
            InterpolationProblem::new(kernel, nodes, vec![0.0; 6]).unwrap();
        let interp = solve_interpolant(problem).unwrap();
        let f = make_smooth_reference(SmoothReference::Polynomial { coeffs: vec![0.0] }).unwrap();
        let err = l2_error(&interp, &f, &unit_interval(), 16).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn l2_error_matches_a_trapezoid_oracle() {
        let kernel = KernelSpec::new(1, 2, 0.0, None).unwrap();
        let f = make_smooth_reference(SmoothReference::Sine {
            d: 1,
            frequency: 2.0 * std::f64::consts::PI,
        })
        .unwrap();
        let nodes = generate_jittered_grid(&unit_interval(), 9, 0.0, 0).unwrap();
        let values: Vec<f64> = nodes.points().iter().map(|p| f.eval(p)).collect();
        let interp =
            solve_interpolant(InterpolationProblem::new(kernel, nodes, values).unwrap()).unwrap();

        let fast = l2_error(&interp, &f, &unit_interval(), 32).unwrap();

        // Independent check: trapezoid rule on a uniform 1e5-interval grid.
        let n = 100_000usize;
        let mut acc = 0.0f64;
        for i in 0..=n {
            let x = i as f64 / n as f64;
            let r = f.eval(&[x]) - interp.evaluate(&[x]).unwrap();
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += w * r * r;
        }
        let oracle = (acc / n as f64).sqrt();
        assert_relative_eq!(fast, oracle, max_relative = 1e-6);
    }

    #[test]
    fn l2_error_enforces_the_resolution_rule() {
        let kernel = KernelSpec::new(1, 2, 0.0, None).unwrap();
        let nodes = generate_jittered_grid(&unit_interval(), 9, 0.0, 0).unwrap();
        let values = vec![0.0; 9];
        let interp =
            solve_interpolant(InterpolationProblem::new(kernel, nodes, values).unwrap()).unwrap();
        let f = make_smooth_reference(SmoothReference::Polynomial { coeffs: vec![0.0] }).unwrap();
        assert!(matches!(
            l2_error(&interp, &f, &unit_interval(), 17),
            Err(StudyError::QuadratureUnderresolved { panels: 17, needed: 18 })
        ));
    }

    #[test]
    fn in_span_targets_are_reproduced_at_every_level() {
        // Five kernel translates plus a linear tail; the weights are
        // orthogonal to linears, so this is a legal representer. The
        // cell-centered grids at 5, 15, 25, 45 nodes all contain the five
        // centers, so interpolation reproduces the target identically.
        let kernel = KernelSpec::new(1, 2, 0.0, None).unwrap();
        let centers = vec![vec![0.1], vec![0.3], vec![0.5], vec![0.7], vec![0.9]];
        let weights = vec![1.0, -2.0, 2.0, -2.0, 1.0];
        let target =
            make_kernel_span_target(kernel.clone(), centers, weights, vec![0.2, 0.3]).unwrap();
        let config = StudyConfig {
            kernel,
            target,
            rough_order: 2,
            domain: unit_interval(),
            levels: vec![5, 15, 25, 45],
            generator: NodeGenerator::JitteredGrid { jitter: 0.0, seed: 0 },
            mesh_ratio_bound: 2.0,
            quad_panels: 96,
            fit_window: None,
            condition_cap: 1e12,
            timing: false,
        };
        let report = run_study(&config).unwrap();
        for row in &report.rows {
            assert!(row.error.is_none(), "level {} failed: {:?}", row.level, row.error);
            let e = row.l2_error.unwrap();
            assert!(e <= 1e-8, "level {}: in-span error {e} above 1e-8", row.level);
        }
    }

    #[test]
    fn smooth_study_meets_the_predicted_rate() {
        let config = sine_config(vec![8, 16, 32, 64], 128);
        let report = run_study(&config).unwrap();
        assert_eq!(report.predicted_rate, 2.0);
        let slope = report.fitted_slope.expect("fit must succeed");
        assert!(slope >= 1.9, "fitted slope {slope} below 1.9");
        assert!(report.pass);
        // Jitter-free refinement: h strictly decreases, mesh ratio 1.
        for pair in report.rows.windows(2) {
            assert!(pair[1].h.unwrap() < pair[0].h.unwrap());
        }
        for row in &report.rows {
            assert_relative_eq!(row.mesh_ratio.unwrap(), 1.0, max_relative = 1e-9);
            assert!(row.mesh_ok && row.cond_ok);
        }
    }

    #[test]
    fn failed_levels_are_marked_and_the_study_continues() {
        // A single node cannot carry a linear tail: that level fails, the
        // rest proceed, and the fit uses what remains.
        let config = sine_config(vec![1, 8, 16], 32);
        let report = run_study(&config).unwrap();
        assert!(report.rows[0].error.is_some());
        assert!(report.rows[1].error.is_none());
        assert!(report.rows[2].error.is_none());
        assert!(report.fitted_slope.is_some());

        let hopeless = sine_config(vec![1], 2);
        assert!(matches!(run_study(&hopeless), Err(StudyError::AllLevelsFailed)));
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let good = sine_config(vec![8, 16], 32);

        let mut c = good.clone();
        c.levels = vec![16, 8];
        assert!(matches!(c.validate(), Err(StudyError::BadLevels)));
        c.levels = vec![];
        assert!(matches!(c.validate(), Err(StudyError::BadLevels)));
        c.levels = vec![0, 8];
        assert!(matches!(c.validate(), Err(StudyError::BadLevels)));

        let mut c = good.clone();
        c.fit_window = Some((1, 2));
        assert!(matches!(c.validate(), Err(StudyError::FitWindowOutOfRange { .. })));

        let mut c = good.clone();
        c.mesh_ratio_bound = 0.5;
        assert!(matches!(c.validate(), Err(StudyError::MeshRatioBoundTooSmall(_))));

        let mut c = good.clone();
        c.rough_order = 3;
        assert!(matches!(c.validate(), Err(StudyError::Kernel(_))));

        let mut c = good.clone();
        c.quad_panels = 16;
        assert!(matches!(
            c.validate(),
            Err(StudyError::QuadratureUnderresolved { panels: 16, needed: 32 })
        ));

        let mut c = good.clone();
        c.domain = Domain::unit_box(2);
        assert!(matches!(c.validate(), Err(StudyError::DimensionMismatch { .. })));
    }

    #[test]
    fn config_json_round_trips_and_rejects_unknown_keys() {
        let config = sine_config(vec![8, 16], 32);
        let text = serde_json::to_string(&config).unwrap();
        let back: StudyConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.levels, config.levels);
        assert_eq!(back.quad_panels, config.quad_panels);
        assert!(!back.timing);

        let broken = text.replacen('{', r#"{"surprise": 1, "#, 1);
        assert!(serde_json::from_str::<StudyConfig>(&broken).is_err());

        // Defaults fill in when optional fields are absent.
        let minimal: StudyConfig = serde_json::from_str(
            r#"{
                "kernel": {"d": 1, "m": 2, "mu": 0.0},
                "target": {"family": "sine", "d": 1, "frequency": 3.0},
                "rough_order": 2,
                "domain": {"kind": "box", "bounds": [[0.0, 1.0]]},
                "levels": [8, 16],
                "generator": {"kind": "halton"},
                "mesh_ratio_bound": 2.0,
                "quad_panels": 32
            }"#,
        )
        .unwrap();
        assert_eq!(minimal.condition_cap, 1e12);
        assert!(minimal.timing);
        assert!(minimal.fit_window.is_none());
    }

    #[test]
    fn reports_are_byte_identical_when_timing_is_off() {
        let mut config = sine_config(vec![8, 16, 24], 48);
        config.generator = NodeGenerator::JitteredGrid { jitter: 0.4, seed: 42 };
        let a = run_study(&config).unwrap();
        let b = run_study(&config).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.to_json(), b.to_json());

        let mut halton = sine_config(vec![8, 16, 32], 64);
        halton.generator = NodeGenerator::Halton;
        let a = run_study(&halton).unwrap();
        let b = run_study(&halton).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn csv_has_the_contract_header_and_nan_for_missing_fields() {
        let config = sine_config(vec![1, 8, 16], 32);
        let report = run_study(&config).unwrap();
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "level,n,h,q,mesh_ratio,l2_error,cond_est,wall_ms"
        );
        // The failed single-node level renders NaN for the unmeasured columns.
        let first = lines.next().unwrap();
        assert!(first.starts_with("1,1,"));
        assert!(first.contains("NaN"));
        assert_eq!(csv.lines().count(), 4);
    }
}
