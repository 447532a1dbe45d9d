//! Smooth surrogates that agree with a rough function at scattered nodes.
//!
//! Given a rough `f` and one-dimensional nodes of separation `q`, the
//! construction produces a C-infinity function `F` with `F(a) = f(a)` at
//! every node and higher-order seminorms that grow no faster than
//! `q^{k-m}`. It proceeds in two steps:
//!
//! 1. blend: inside the radius-`delta` ball around each node (`delta = q/4`)
//!    replace `f` by its local degree-`k` interpolating polynomial, joined
//!    back to `f` across the annulus `delta < |x-a| < 2 delta` by a smooth
//!    cutoff;
//! 2. mollify: convolve the blended function with a compactly supported
//!    bump of radius `delta` whose moments `1..k` vanish, so polynomial
//!    patches pass through the convolution with their node values intact.
//!
//! The scaling probe measures the order-`m` seminorm of `F` across a range
//! of separations for empirical comparison against the `q^{k-m}` rate.

use crate::linalg::SymmetricIndefinite;
use crate::pointsets::{separation_radius, Domain, PointSet, PointSetError};
use crate::quadrature::GaussLegendre;
use crate::targets::{beppo_levi_seminorm_of, TargetError, TargetFunction};
use nalgebra::DMatrix;
use thiserror::Error;

/// Patch radius as a fraction of the separation: `delta = q / 4`.
pub const PATCH_RADIUS_FACTOR: f64 = 0.25;
/// Moment residual allowed when constructing a bump.
pub const MOMENT_TOL: f64 = 1e-8;
/// Finite-difference step for probe derivatives, as a fraction of `delta`.
///
/// A second difference amplifies rounding noise in the quadrature-evaluated
/// surrogate by roughly `4 eps / h^2`; a step of `1e-2 * delta` keeps that
/// floor near 1e-8 for the patch radii the probe visits while the truncation
/// error stays at a negligible `(h / delta)^2` relative size.
pub const PROBE_FD_STEP_FACTOR: f64 = 1e-2;

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("moment system is numerically singular")]
    MomentSystemSingular,
    #[error("bump moment {j} is {value:e} after correction, above tolerance")]
    MomentsNotVanishing { j: u32, value: f64 },
    #[error("surrogate construction needs at least two distinct nodes")]
    InsufficientSeparation,
    #[error("surrogate construction is one-dimensional, got dimension {0}")]
    OneDimensionalOnly(usize),
    #[error("no central difference stencil of order {0} (orders 1..=4 supported)")]
    FdOrderUnsupported(u32),
    #[error("probe needs rough order k <= smooth order m, got k={k}, m={m}")]
    ProbeOrderInvalid { k: u32, m: u32 },
    #[error("probe separations must be finite, positive, and strictly decreasing")]
    BadScaleList,
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error(transparent)]
    Points(#[from] PointSetError),
}

/// C-infinity bump supported on `[-1, 1]`: the standard `exp(-1/(1-t^2))`
/// profile times a degree-`k` polynomial correction chosen so the integral
/// is one and moments `1..=k` vanish.
#[derive(Clone, Debug)]
pub struct MomentBump {
    k: u32,
    correction: Vec<f64>,
}

fn base_bump(t: f64) -> f64 {
    let s = 1.0 - t * t;
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

/// `int_{-1}^{1} t^n exp(-1/(1-t^2)) dt` by composite Gauss-Legendre.
fn base_moment(n: u32, panels: usize) -> f64 {
    let rule = GaussLegendre::new(32);
    let mut sum = 0.0;
    for i in 0..panels {
        let a = -1.0 + 2.0 * i as f64 / panels as f64;
        let b = -1.0 + 2.0 * (i + 1) as f64 / panels as f64;
        sum += rule.integrate(a, b, |t| t.powi(n as i32) * base_bump(t));
    }
    sum
}

/// Builds the order-`k` moment bump by solving the `(k+1) x (k+1)` Gram
/// system of monomial moments against the base profile, then verifying the
/// corrected moments with a finer quadrature.
pub fn make_moment_bump(k: u32) -> Result<MomentBump, SurrogateError> {
    let n = (k + 1) as usize;
    // Moments up to 2k are needed; reuse across matrix entries.
    let moments: Vec<f64> = (0..=2 * k).map(|j| base_moment(j, 16)).collect();
    let mut g = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            g[(j, i)] = moments[i + j];
        }
    }
    let factor = SymmetricIndefinite::factor(g).map_err(|_| SurrogateError::MomentSystemSingular)?;
    let mut rhs = vec![0.0; n];
    rhs[0] = 1.0;
    let correction = factor.solve(&rhs).map_err(|_| SurrogateError::MomentSystemSingular)?;
    let bump = MomentBump { k, correction };

    // Independent verification at doubled panel count.
    let rule = GaussLegendre::new(32);
    for j in 0..=k {
        let mut m = 0.0;
        let panels = 32;
        for i in 0..panels {
            let a = -1.0 + 2.0 * i as f64 / panels as f64;
            let b = -1.0 + 2.0 * (i + 1) as f64 / panels as f64;
            m += rule.integrate(a, b, |t| t.powi(j as i32) * bump.eval(t));
        }
        let target = if j == 0 { 1.0 } else { 0.0 };
        if (m - target).abs() > MOMENT_TOL {
            return Err(SurrogateError::MomentsNotVanishing { j, value: m - target });
        }
    }
    Ok(bump)
}

impl MomentBump {
    pub fn order(&self) -> u32 {
        self.k
    }

    /// The corrected bump at `t`; zero outside `[-1, 1]`.
    pub fn eval(&self, t: f64) -> f64 {
        let base = base_bump(t);
        if base == 0.0 {
            return 0.0;
        }
        let p = self.correction.iter().rev().fold(0.0, |acc, c| acc * t + c);
        p * base
    }

    /// The radius-`delta` rescaling `t -> eval(t/delta) / delta`.
    pub fn eval_scaled(&self, delta: f64, t: f64) -> f64 {
        self.eval(t / delta) / delta
    }
}

/// Newton divided-difference coefficients for interpolation at `xs`.
fn newton_coeffs(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut c = ys.to_vec();
    for level in 1..xs.len() {
        for i in (level..xs.len()).rev() {
            c[i] = (c[i] - c[i - 1]) / (xs[i] - xs[i - level]);
        }
    }
    c
}

fn newton_eval(xs: &[f64], coeffs: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for i in (0..coeffs.len()).rev() {
        acc = acc * (x - xs[i]) + coeffs[i];
    }
    acc
}

/// One local polynomial patch, stored in the scaled coordinate
/// `u = (x - node) / delta` for conditioning.
#[derive(Clone, Debug)]
struct Patch {
    node: f64,
    us: Vec<f64>,
    coeffs: Vec<f64>,
}

impl Patch {
    fn eval(&self, x: f64, delta: f64) -> f64 {
        newton_eval(&self.us, &self.coeffs, (x - self.node) / delta)
    }
}

/// Smooth monotone step with `chi(t) = 0` for `t <= 0` and `1` for `t >= 1`.
fn smooth_step(t: f64) -> f64 {
    fn s(t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            (-1.0 / t).exp()
        }
    }
    let a = s(t);
    let b = s(1.0 - t);
    if a == 0.0 {
        0.0
    } else if b == 0.0 {
        1.0
    } else {
        a / (a + b)
    }
}

/// The blended function `H`: local polynomial patches near the nodes, the
/// original function far away, joined by a smooth cutoff on the annuli.
#[derive(Clone, Debug)]
pub struct BlendedFunction {
    f: TargetFunction,
    nodes: Vec<f64>,
    patches: Vec<Patch>,
    delta: f64,
    k: u32,
}

/// Replaces `f` near every node by its degree-`k` local interpolating
/// polynomial. Interpolation points are `k+1` evenly spaced points on
/// `[a - delta/2, a + delta/2]` with the one nearest the node snapped onto
/// it, so `H(a) = f(a)` holds exactly.
pub fn blend_local_polynomials(
    f: &TargetFunction,
    nodes: &PointSet,
    k: u32,
) -> Result<BlendedFunction, SurrogateError> {
    if f.dim() != 1 || nodes.dim() != 1 {
        return Err(SurrogateError::OneDimensionalOnly(f.dim().max(nodes.dim())));
    }
    let q = match separation_radius(nodes) {
        Ok(q) => q,
        Err(PointSetError::Empty) | Err(PointSetError::FewerThanTwoPoints) => {
            return Err(SurrogateError::InsufficientSeparation)
        }
        Err(e) => return Err(e.into()),
    };
    let delta = q * PATCH_RADIUS_FACTOR;
    let mut xs: Vec<f64> = nodes.points().iter().map(|p| p[0]).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let patches = xs
        .iter()
        .map(|&a| {
            let mut us: Vec<f64> = if k == 0 {
                vec![0.0]
            } else {
                (0..=k).map(|i| -0.5 + i as f64 / k as f64).collect()
            };
            // Snap the point nearest the node onto it exactly.
            let nearest = us
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| a.abs().partial_cmp(&b.abs()).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            us[nearest] = 0.0;
            let ys: Vec<f64> = us.iter().map(|u| f.eval(&[a + u * delta])).collect();
            let coeffs = newton_coeffs(&us, &ys);
            Patch { node: a, us, coeffs }
        })
        .collect();

    Ok(BlendedFunction { f: f.clone(), nodes: xs, patches, delta, k })
}

impl BlendedFunction {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn degree(&self) -> u32 {
        self.k
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Index of the nearest node (patches are disjoint, so at most one can
    /// own any given point).
    fn nearest_node(&self, x: f64) -> usize {
        let i = self.nodes.partition_point(|n| *n < x);
        let mut best = if i < self.nodes.len() { i } else { i - 1 };
        if i > 0 && (x - self.nodes[i - 1]).abs() < (self.nodes[best] - x).abs() {
            best = i - 1;
        }
        best
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.nearest_node(x);
        let a = self.nodes[i];
        let r = (x - a).abs();
        if r <= self.delta {
            self.patches[i].eval(x, self.delta)
        } else if r < 2.0 * self.delta {
            let t = (r - self.delta) / self.delta;
            let chi = smooth_step(t);
            chi * self.f.eval(&[x]) + (1.0 - chi) * self.patches[i].eval(x, self.delta)
        } else {
            self.f.eval(&[x])
        }
    }

    /// Points where `H` switches formula or inherits a singularity of `f`;
    /// quadrature windows are split there.
    pub fn kinks(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(4 * self.nodes.len() + self.f.singular_points().len());
        for a in &self.nodes {
            out.extend([a - 2.0 * self.delta, a - self.delta, a + self.delta, a + 2.0 * self.delta]);
        }
        out.extend(self.f.singular_points().iter().map(|p| p[0]));
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup();
        out
    }
}

/// `(phi_delta * h)(x)` by 64-point Gauss-Legendre on `[x-delta, x+delta]`,
/// split at every kink of `h` inside the window. Each piece is integrated
/// under the substitution `t = mid + half * sin(pi v / 2)`: the cosine factor
/// flattens the integrand at the piece ends, which pushes the quadrature
/// error of the compactly supported bump down to roundoff. That matters
/// because derivatives of the surrogate are later taken by finite
/// differences of this value.
pub fn mollify(
    h: &impl Fn(f64) -> f64,
    kinks: &[f64],
    delta: f64,
    bump: &MomentBump,
    x: f64,
) -> f64 {
    assert!(delta > 0.0, "mollification radius must be positive");
    let rule = GaussLegendre::new(64);
    let lo = x - delta;
    let hi = x + delta;
    let mut cuts: Vec<f64> = vec![lo];
    cuts.extend(kinks.iter().copied().filter(|k| *k > lo && *k < hi));
    cuts.push(hi);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut sum = 0.0;
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            let mid = 0.5 * (w[0] + w[1]);
            let half = 0.5 * (w[1] - w[0]);
            sum += rule.integrate(-1.0, 1.0, |v| {
                let t = mid + half * (half_pi * v).sin();
                let jac = half * half_pi * (half_pi * v).cos();
                bump.eval_scaled(delta, x - t) * h(t) * jac
            });
        }
    }
    sum
}

/// The blended function together with its mollification: the smooth
/// surrogate `F = phi_delta * H`.
#[derive(Clone, Debug)]
pub struct SurrogatePair {
    blended: BlendedFunction,
    bump: MomentBump,
    kinks: Vec<f64>,
    /// Patch and mollification radius `q / 4`.
    pub delta: f64,
    /// Order of the local polynomial patches and vanishing moments.
    pub k: u32,
    /// Derivative order the surrogate is measured at.
    pub m: u32,
}

/// Builds the surrogate for `f` on the given nodes.
pub fn build_surrogate(
    f: &TargetFunction,
    nodes: &PointSet,
    k: u32,
    m: u32,
) -> Result<SurrogatePair, SurrogateError> {
    let blended = blend_local_polynomials(f, nodes, k)?;
    let bump = make_moment_bump(k)?;
    let kinks = blended.kinks();
    let delta = blended.delta();
    Ok(SurrogatePair { blended, bump, kinks, delta, k, m })
}

impl SurrogatePair {
    pub fn h_eval(&self, x: f64) -> f64 {
        self.blended.eval(x)
    }

    /// The smooth surrogate `F(x)`.
    pub fn f_eval(&self, x: f64) -> f64 {
        mollify(&|t| self.blended.eval(t), &self.kinks, self.delta, &self.bump, x)
    }

    pub fn blended(&self) -> &BlendedFunction {
        &self.blended
    }

    pub fn bump(&self) -> &MomentBump {
        &self.bump
    }
}

/// Central difference stencil for the order-`m` derivative (second-order
/// accurate), as (offset in steps, coefficient); the divisor is `h^m`.
fn central_stencil(m: u32) -> Option<&'static [(f64, f64)]> {
    match m {
        1 => Some(&[(-1.0, -0.5), (1.0, 0.5)]),
        2 => Some(&[(-1.0, 1.0), (0.0, -2.0), (1.0, 1.0)]),
        3 => Some(&[(-2.0, -0.5), (-1.0, 1.0), (1.0, -1.0), (2.0, 0.5)]),
        4 => Some(&[(-2.0, 1.0), (-1.0, -4.0), (0.0, 6.0), (1.0, -4.0), (2.0, 1.0)]),
        _ => None,
    }
}

/// Measures the order-`m` seminorm of the surrogate over `[0, 1]` for each
/// separation in `q_list`: nodes are placed at exact separation `q`, the
/// surrogate is built, and its `m`-th derivative is taken by central
/// differences of the quadrature-evaluated `F`. Returns `(q, estimate)`
/// pairs for slope fitting against the `q^{k-m}` reference.
pub fn seminorm_scaling_probe(
    f: &TargetFunction,
    k: u32,
    m: u32,
    q_list: &[f64],
) -> Result<Vec<(f64, f64)>, SurrogateError> {
    if f.dim() != 1 {
        return Err(SurrogateError::OneDimensionalOnly(f.dim()));
    }
    if k > m {
        return Err(SurrogateError::ProbeOrderInvalid { k, m });
    }
    if central_stencil(m).is_none() {
        return Err(SurrogateError::FdOrderUnsupported(m));
    }
    let decreasing = q_list.windows(2).all(|w| w[1] < w[0]);
    if q_list.is_empty() || !decreasing || q_list.iter().any(|q| !q.is_finite() || *q <= 0.0) {
        return Err(SurrogateError::BadScaleList);
    }

    let domain = Domain::unit_box(1);
    let mut out = Vec::with_capacity(q_list.len());
    for &q in q_list {
        let spacing = 2.0 * q;
        let count = (1.0 / spacing + 1e-9).floor() as usize;
        let points: Vec<Vec<f64>> = (0..=count).map(|j| vec![j as f64 * spacing]).collect();
        let nodes = PointSet::new(points, domain.clone())?;
        let pair = build_surrogate(f, &nodes, k, m)?;
        let delta = pair.delta;
        let h = PROBE_FD_STEP_FACTOR * delta;
        let stencil = central_stencil(m).unwrap();
        let deriv = |alpha: &[u32], x: &[f64]| -> f64 {
            let st = central_stencil(alpha[0]).expect("order checked above");
            let scale = h.powi(alpha[0] as i32);
            st.iter().map(|(off, c)| c * pair.f_eval(x[0] + off * h)).sum::<f64>() / scale
        };
        let _ = stencil;
        // Panels fine enough that each is a fraction of the patch radius.
        let panels = ((4.0 / delta).ceil() as usize).max(64);
        let est = beppo_levi_seminorm_of(1, m, &domain, panels, &[], &deriv)?;
        out.push((q, est));
    }
    Ok(out)
}
