//! Test functions with known smoothness metadata, exact derivative oracles,
//! and a Beppo-Levi seminorm evaluator.
//!
//! Each target carries the largest derivative order `k` whose order-`k`
//! seminorm over a bounded domain is finite (the unweighted case). Rough
//! families (power cusps, kernel translates) have a finite order; the smooth
//! references are marked unbounded. Derivatives are produced in closed form
//! by differentiating small symbolic term lists, so any order is available
//! away from the listed singular points.

use crate::kernels::KernelSpec;
use crate::pointsets::{multi_indices_exact, multi_indices_up_to, Domain};
use crate::quadrature::integrate_box;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest seminorm order with exactly representable multinomial weights.
pub const SEMINORM_ORDER_CAP: u32 = 20;

/// Boxed pointwise evaluator returned by
/// [`TargetFunction::derivative_closure`].
pub type DerivativeFn<'a> = Box<dyn Fn(&[f64]) -> f64 + Sync + Send + 'a>;

#[derive(Debug, Error)]
pub enum TargetError {
    #[error("cusp exponent must be positive, finite, and not an even integer, got {alpha}")]
    InvalidExponent { alpha: f64 },
    #[error("invalid target parameters: {0}")]
    InvalidParameters(String),
    #[error("point is {got}-d but the target lives in {want}-d")]
    DimensionMismatch { want: usize, got: usize },
    #[error("seminorm is implemented for weight exponent zero only, got {0}")]
    WeightedCaseUnsupported(f64),
    #[error("derivative order {requested} exceeds the exact-weight cap {cap}")]
    DerivativeOrderTooHigh { requested: u32, cap: u32 },
    #[error("seminorm evaluation needs a box domain")]
    BoxDomainRequired,
    #[error(
        "span weights do not annihilate the degree-{degree} polynomial tail (residual {residual:e})"
    )]
    SpanWeightsNotAdmissible { degree: usize, residual: f64 },
}

/// Largest order with a finite seminorm, or `Infinite` for C-infinity
/// targets with finite seminorms at every order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Smoothness {
    Finite(u32),
    Infinite,
}

/// Serializable descriptor of a target; the validated form is
/// [`TargetFunction`], obtained via `TryFrom`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetParams {
    /// `f(x) = |x - center|^alpha`.
    PowerCusp { center: Vec<f64>, alpha: f64 },
    /// `f(x) = prod_i sin(frequency * x_i)`.
    Sine { d: usize, frequency: f64 },
    /// `f(x) = exp(-|x - center|^2 / (2 width^2))`.
    GaussianBump { center: Vec<f64>, width: f64 },
    /// Univariate polynomial `sum_i coeffs[i] x^i` (one dimension).
    Polynomial { coeffs: Vec<f64> },
    /// `f(x) = sum_a weights[a] psi(|x - centers[a]|) + tail`, with the
    /// affine tail given as `tail[0] + sum_i tail[1+i] x_i`. Lies in the
    /// interpolation span of any node set containing the centers.
    KernelTranslates {
        kernel: KernelSpec,
        centers: Vec<Vec<f64>>,
        weights: Vec<f64>,
        tail: Vec<f64>,
    },
}

/// A validated target function with smoothness metadata and an exact
/// derivative oracle.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "TargetParams", into = "TargetParams")]
pub struct TargetFunction {
    d: usize,
    params: TargetParams,
    smoothness: Smoothness,
    singular: Vec<Vec<f64>>,
}

impl TryFrom<TargetParams> for TargetFunction {
    type Error = TargetError;
    fn try_from(p: TargetParams) -> Result<Self, TargetError> {
        match p {
            TargetParams::PowerCusp { center, alpha } => {
                let d = center.len();
                make_power_cusp(d, center, alpha)
            }
            TargetParams::Sine { d, frequency } => {
                make_smooth_reference(SmoothReference::Sine { d, frequency })
            }
            TargetParams::GaussianBump { center, width } => {
                make_smooth_reference(SmoothReference::GaussianBump { center, width })
            }
            TargetParams::Polynomial { coeffs } => {
                make_smooth_reference(SmoothReference::Polynomial { coeffs })
            }
            TargetParams::KernelTranslates { kernel, centers, weights, tail } => {
                make_kernel_span_target(kernel, centers, weights, tail)
            }
        }
    }
}

impl From<TargetFunction> for TargetParams {
    fn from(t: TargetFunction) -> TargetParams {
        t.params
    }
}

/// Largest integer strictly below `s` (`s > 0`), as smoothness metadata.
fn largest_order_below(s: f64) -> u32 {
    let f = s.floor();
    let k = if f == s { f - 1.0 } else { f };
    if k < 0.0 {
        0
    } else {
        k as u32
    }
}

/// Builds `|x - center|^alpha`. The order-`k` derivatives scale like
/// `|x - center|^{alpha - k}` near the center, so the order-`k` seminorm is
/// finite exactly when `k < alpha + d/2`; the largest such integer is stored.
pub fn make_power_cusp(d: usize, center: Vec<f64>, alpha: f64) -> Result<TargetFunction, TargetError> {
    if d == 0 || center.len() != d {
        return Err(TargetError::InvalidParameters(format!(
            "center has {} coordinates for dimension {d}",
            center.len()
        )));
    }
    if !center.iter().all(|c| c.is_finite()) {
        return Err(TargetError::InvalidParameters("center is not finite".into()));
    }
    let even_integer = alpha == 2.0 * (alpha / 2.0).round();
    if !alpha.is_finite() || alpha <= 0.0 || even_integer {
        // An even-integer exponent makes the cusp a polynomial: not rough.
        return Err(TargetError::InvalidExponent { alpha });
    }
    let k_max = largest_order_below(alpha + d as f64 / 2.0);
    Ok(TargetFunction {
        d,
        singular: vec![center.clone()],
        smoothness: Smoothness::Finite(k_max),
        params: TargetParams::PowerCusp { center, alpha },
    })
}

/// Parameter block for [`make_smooth_reference`].
#[derive(Clone, Debug)]
pub enum SmoothReference {
    Sine { d: usize, frequency: f64 },
    GaussianBump { center: Vec<f64>, width: f64 },
    Polynomial { coeffs: Vec<f64> },
}

/// Builds an infinitely smooth reference target.
pub fn make_smooth_reference(spec: SmoothReference) -> Result<TargetFunction, TargetError> {
    let (d, params) = match spec {
        SmoothReference::Sine { d, frequency } => {
            if d == 0 {
                return Err(TargetError::InvalidParameters("dimension must be positive".into()));
            }
            if !frequency.is_finite() || frequency == 0.0 {
                return Err(TargetError::InvalidParameters(format!(
                    "sine frequency must be finite and nonzero, got {frequency}"
                )));
            }
            (d, TargetParams::Sine { d, frequency })
        }
        SmoothReference::GaussianBump { center, width } => {
            let d = center.len();
            if d == 0 || !center.iter().all(|c| c.is_finite()) {
                return Err(TargetError::InvalidParameters("bump center is empty or not finite".into()));
            }
            if !width.is_finite() || width <= 0.0 {
                return Err(TargetError::InvalidParameters(format!(
                    "bump width must be positive, got {width}"
                )));
            }
            (d, TargetParams::GaussianBump { center, width })
        }
        SmoothReference::Polynomial { coeffs } => {
            if coeffs.is_empty() || !coeffs.iter().all(|c| c.is_finite()) {
                return Err(TargetError::InvalidParameters(
                    "polynomial needs at least one finite coefficient".into(),
                ));
            }
            (1, TargetParams::Polynomial { coeffs })
        }
    };
    Ok(TargetFunction { d, params, smoothness: Smoothness::Infinite, singular: Vec::new() })
}

/// Builds a member of the interpolation span: kernel translates plus an
/// affine tail. The weights must annihilate polynomials up to the kernel's
/// tail degree, which is what makes the function reproducible by
/// interpolation on any node set containing the centers.
pub fn make_kernel_span_target(
    kernel: KernelSpec,
    centers: Vec<Vec<f64>>,
    weights: Vec<f64>,
    tail: Vec<f64>,
) -> Result<TargetFunction, TargetError> {
    let d = kernel.d as usize;
    if centers.is_empty() || centers.len() != weights.len() {
        return Err(TargetError::InvalidParameters(format!(
            "{} centers for {} weights",
            centers.len(),
            weights.len()
        )));
    }
    if centers.iter().any(|c| c.len() != d) {
        return Err(TargetError::InvalidParameters("center dimension mismatch".into()));
    }
    if tail.len() != d + 1 {
        return Err(TargetError::InvalidParameters(format!(
            "affine tail needs {} coefficients, got {}",
            d + 1,
            tail.len()
        )));
    }
    if kernel.poly_degree < 1 && tail[1..].iter().any(|t| *t != 0.0) {
        return Err(TargetError::InvalidParameters(
            "linear tail part requires a kernel tail of degree at least 1".into(),
        ));
    }
    // Side conditions at the weights, in centroid-shifted monomials for
    // scale-robust thresholds.
    let mut centroid = vec![0.0; d];
    for c in &centers {
        for ax in 0..d {
            centroid[ax] += c[ax] / centers.len() as f64;
        }
    }
    let w_norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    for gamma in multi_indices_up_to(d, kernel.poly_degree) {
        let mut resid = 0.0;
        let mut col_max = 0.0f64;
        for (c, w) in centers.iter().zip(&weights) {
            let mut v = 1.0;
            for ax in 0..d {
                v *= (c[ax] - centroid[ax]).powi(gamma[ax] as i32);
            }
            col_max = col_max.max(v.abs());
            resid += w * v;
        }
        if resid.abs() > 1e-10 * w_norm * col_max.max(1e-30) {
            return Err(TargetError::SpanWeightsNotAdmissible {
                degree: kernel.poly_degree,
                residual: resid.abs(),
            });
        }
    }
    let k_max = largest_order_below(kernel.beta + d as f64 / 2.0);
    Ok(TargetFunction {
        d,
        singular: centers.clone(),
        smoothness: Smoothness::Finite(k_max),
        params: TargetParams::KernelTranslates { kernel, centers, weights, tail },
    })
}

/// One closed-form term `c * r^p * prod_i t_i^{e_i} * (log r)?` in shifted
/// coordinates `t = x - center`, `r = |t|`. The family is closed under
/// partial differentiation.
#[derive(Clone, Debug)]
struct RadialTerm {
    c: f64,
    p: f64,
    e: Vec<u32>,
    lg: bool,
}

fn diff_radial(terms: &[RadialTerm], j: usize) -> Vec<RadialTerm> {
    let mut out = Vec::with_capacity(terms.len() * 3);
    for t in terms {
        if t.c == 0.0 {
            continue;
        }
        let mut up = t.e.clone();
        up[j] += 1;
        if t.p != 0.0 {
            out.push(RadialTerm { c: t.c * t.p, p: t.p - 2.0, e: up.clone(), lg: t.lg });
        }
        if t.lg {
            out.push(RadialTerm { c: t.c, p: t.p - 2.0, e: up, lg: false });
        }
        if t.e[j] > 0 {
            let mut down = t.e.clone();
            down[j] -= 1;
            out.push(RadialTerm { c: t.c * t.e[j] as f64, p: t.p, e: down, lg: t.lg });
        }
    }
    out
}

fn eval_radial(terms: &[RadialTerm], center: &[f64], x: &[f64]) -> f64 {
    let r2: f64 = center.iter().zip(x).map(|(c, xi)| (xi - c) * (xi - c)).sum();
    let r = r2.sqrt();
    let lr = if terms.iter().any(|t| t.lg) { r.ln() } else { 0.0 };
    let mut sum = 0.0;
    for t in terms {
        let mut v = t.c;
        for (ax, e) in t.e.iter().enumerate() {
            if *e > 0 {
                v *= (x[ax] - center[ax]).powi(*e as i32);
            }
        }
        if t.p != 0.0 {
            v *= r.powf(t.p);
        }
        if t.lg {
            v *= lr;
        }
        sum += v;
    }
    sum
}

fn radial_terms_for(alpha: &[u32], p0: f64, lg: bool, d: usize) -> Vec<RadialTerm> {
    let mut terms = vec![RadialTerm { c: 1.0, p: p0, e: vec![0; d], lg }];
    for (j, cnt) in alpha.iter().enumerate() {
        for _ in 0..*cnt {
            terms = diff_radial(&terms, j);
        }
    }
    terms
}

/// Phase is stored in quarter turns so the oracle never adds pi/2 in floating
/// point: 0 -> sin, 1 -> cos, 2 -> -sin, 3 -> -cos.
fn sine_factor(omega_x: f64, phase: u8) -> f64 {
    match phase & 3 {
        0 => omega_x.sin(),
        1 => omega_x.cos(),
        2 => -omega_x.sin(),
        _ => -omega_x.cos(),
    }
}

fn affine_tail_derivative(tail: &[f64], alpha: &[u32], x: &[f64]) -> f64 {
    let order: u32 = alpha.iter().sum();
    match order {
        0 => tail[0] + tail[1..].iter().zip(x).map(|(t, xi)| t * xi).sum::<f64>(),
        1 => {
            let j = alpha.iter().position(|a| *a == 1).unwrap();
            tail[1 + j]
        }
        _ => 0.0,
    }
}

impl TargetFunction {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn params(&self) -> &TargetParams {
        &self.params
    }

    /// Points where the derivative oracle is not valid (the target itself is
    /// finite everywhere).
    pub fn singular_points(&self) -> &[Vec<f64>] {
        &self.singular
    }

    /// Smoothness metadata. Tracked for the unweighted case only; a nonzero
    /// weight exponent returns `None` and callers fall back to the kernel's
    /// rate prediction.
    pub fn k_max(&self, weight_exponent: f64) -> Option<Smoothness> {
        if weight_exponent == 0.0 {
            Some(self.smoothness)
        } else {
            None
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.d);
        self.derivative_closure(&vec![0; self.d])(x)
    }

    /// `D^alpha f` at `x`, valid away from the singular points. Convenience
    /// wrapper; hot loops should hold a [`Self::derivative_closure`].
    pub fn derivative(&self, alpha: &[u32], x: &[f64]) -> f64 {
        self.derivative_closure(alpha)(x)
    }

    /// Builds the order-`alpha` partial derivative once and returns it as a
    /// closure for repeated evaluation.
    pub fn derivative_closure(&self, alpha: &[u32]) -> DerivativeFn<'_> {
        assert_eq!(alpha.len(), self.d, "multi-index dimension mismatch");
        match &self.params {
            TargetParams::PowerCusp { center, alpha: a } => {
                let terms = radial_terms_for(alpha, *a, false, self.d);
                let center = center.clone();
                Box::new(move |x| eval_radial(&terms, &center, x))
            }
            TargetParams::Sine { frequency, .. } => {
                let omega = *frequency;
                let mut coeff = 1.0;
                let phases: Vec<u8> = alpha
                    .iter()
                    .map(|a| {
                        coeff *= omega.powi(*a as i32);
                        (*a % 4) as u8
                    })
                    .collect();
                Box::new(move |x| {
                    let mut v = coeff;
                    for (xi, ph) in x.iter().zip(&phases) {
                        v *= sine_factor(omega * xi, *ph);
                    }
                    v
                })
            }
            TargetParams::GaussianBump { center, width } => {
                // Terms c * prod t^e * exp(-r^2 / (2 w^2)), closed under
                // differentiation.
                let inv_w2 = 1.0 / (width * width);
                let mut terms: Vec<(f64, Vec<u32>)> = vec![(1.0, vec![0; self.d])];
                for (j, cnt) in alpha.iter().enumerate() {
                    for _ in 0..*cnt {
                        let mut next = Vec::with_capacity(terms.len() * 2);
                        for (c, e) in &terms {
                            if e[j] > 0 {
                                let mut down = e.clone();
                                down[j] -= 1;
                                next.push((c * e[j] as f64, down));
                            }
                            let mut up = e.clone();
                            up[j] += 1;
                            next.push((-c * inv_w2, up));
                        }
                        terms = next;
                    }
                }
                let center = center.clone();
                let half_inv_w2 = 0.5 * inv_w2;
                Box::new(move |x| {
                    let r2: f64 = center.iter().zip(x).map(|(c, xi)| (xi - c) * (xi - c)).sum();
                    let envelope = (-half_inv_w2 * r2).exp();
                    let mut sum = 0.0;
                    for (c, e) in &terms {
                        let mut v = *c;
                        for (ax, ei) in e.iter().enumerate() {
                            if *ei > 0 {
                                v *= (x[ax] - center[ax]).powi(*ei as i32);
                            }
                        }
                        sum += v;
                    }
                    sum * envelope
                })
            }
            TargetParams::Polynomial { coeffs } => {
                let mut dc = coeffs.clone();
                for _ in 0..alpha[0] {
                    dc = dc.iter().enumerate().skip(1).map(|(i, c)| i as f64 * c).collect();
                    if dc.is_empty() {
                        dc.push(0.0);
                    }
                }
                Box::new(move |x| {
                    let t = x[0];
                    dc.iter().rev().fold(0.0, |acc, c| acc * t + c)
                })
            }
            TargetParams::KernelTranslates { kernel, centers, weights, tail } => {
                let terms = radial_terms_for(alpha, kernel.beta, kernel.log_branch, self.d);
                let centers = centers.clone();
                let weights = weights.clone();
                let tail = tail.clone();
                let alpha = alpha.to_vec();
                Box::new(move |x| {
                    let mut sum = affine_tail_derivative(&tail, &alpha, x);
                    for (c, w) in centers.iter().zip(&weights) {
                        sum += w * eval_radial(&terms, c, x);
                    }
                    sum
                })
            }
        }
    }
}

fn factorial(n: u32) -> u128 {
    (1..=n as u128).product::<u128>().max(1)
}

/// Multinomial weight `k! / alpha!`, exact for `k` up to the cap.
pub fn multinomial_weight(k: u32, alpha: &[u32]) -> f64 {
    let denom: u128 = alpha.iter().map(|a| factorial(*a)).product();
    (factorial(k) / denom) as f64
}

/// Order-`k` seminorm `( sum_{|alpha|=k} (k!/alpha!) int |D^alpha g|^2 )^{1/2}`
/// over a box, with the derivatives supplied by the caller. Quadrature is
/// panel-wise Gauss-Legendre with grading toward the listed singular points.
pub fn beppo_levi_seminorm_of(
    d: usize,
    k: u32,
    domain: &Domain,
    panels: usize,
    singular: &[Vec<f64>],
    deriv: &(impl Fn(&[u32], &[f64]) -> f64 + Sync),
) -> Result<f64, TargetError> {
    if k > SEMINORM_ORDER_CAP {
        return Err(TargetError::DerivativeOrderTooHigh { requested: k, cap: SEMINORM_ORDER_CAP });
    }
    let bounds = match domain {
        Domain::Box { bounds } => bounds.clone(),
        Domain::Ball { .. } => return Err(TargetError::BoxDomainRequired),
    };
    if bounds.len() != d {
        return Err(TargetError::DimensionMismatch { want: d, got: bounds.len() });
    }
    let indices = multi_indices_exact(d, k as usize);
    let weights: Vec<f64> = indices.iter().map(|a| multinomial_weight(k, a)).collect();
    let value = integrate_box(&bounds, panels, singular, 5, |x: &[f64]| {
        indices
            .iter()
            .zip(&weights)
            .map(|(a, w)| {
                let v = deriv(a, x);
                w * v * v
            })
            .sum::<f64>()
    });
    Ok(value.max(0.0).sqrt())
}

/// Order-`k` seminorm of a target function over a box domain, unweighted
/// case only (`weight_exponent` must be zero).
pub fn beppo_levi_seminorm(
    f: &TargetFunction,
    k: u32,
    domain: &Domain,
    panels: usize,
    weight_exponent: f64,
) -> Result<f64, TargetError> {
    if weight_exponent != 0.0 {
        return Err(TargetError::WeightedCaseUnsupported(weight_exponent));
    }
    if k > SEMINORM_ORDER_CAP {
        return Err(TargetError::DerivativeOrderTooHigh { requested: k, cap: SEMINORM_ORDER_CAP });
    }
    let d = f.dim();
    let indices = multi_indices_exact(d, k as usize);
    let closures: Vec<_> = indices.iter().map(|a| f.derivative_closure(a)).collect();
    let weights: Vec<f64> = indices.iter().map(|a| multinomial_weight(k, a)).collect();
    let bounds = match domain {
        Domain::Box { bounds } => bounds.clone(),
        Domain::Ball { .. } => return Err(TargetError::BoxDomainRequired),
    };
    if bounds.len() != d {
        return Err(TargetError::DimensionMismatch { want: d, got: bounds.len() });
    }
    let value = integrate_box(&bounds, panels, &f.singular, 5, |x: &[f64]| {
        closures
            .iter()
            .zip(&weights)
            .map(|(g, w)| {
                let v = g(x);
                w * v * v
            })
            .sum::<f64>()
    });
    Ok(value.max(0.0).sqrt())
}
