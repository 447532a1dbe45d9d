//! Panel-based Gauss-Legendre quadrature with grading toward point
//! singularities.
//!
//! All integrals in this crate are desk scale: boxes in one or two (rarely
//! three) dimensions, integrands that are smooth except at a few known
//! points. The workhorse is a tensor product of 1-d panel decompositions,
//! five Gauss points per panel per axis, with panel boundaries snapped onto
//! the singular coordinates and geometrically graded panels (ratio 2) on
//! each side so that an algebraic singularity at a panel corner is resolved
//! without adaptive machinery.

use rayon::prelude::*;

/// Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the n-point rule by Newton iteration on the Legendre
    /// polynomial; accurate to machine precision for the sizes used here.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule order must be positive");
        let mut nodes = vec![0.0f64; n];
        let mut weights = vec![0.0f64; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Chebyshev-like initial guess for the i-th positive root.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_and_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-15 * x.abs().max(1.0) {
                    let (_, d2) = legendre_and_derivative(n, x);
                    dp = d2;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            let (_, d) = legendre_and_derivative(n, 0.0);
            nodes[n / 2] = 0.0;
            weights[n / 2] = 2.0 / (d * d);
        }
        Self { nodes, weights }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

/// Value and derivative of the Legendre polynomial P_n at x.
fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0f64;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Number of geometric sub-panels each graded panel is split into.
const GRADE_DEPTH: usize = 20;
/// How many panels on each side of a singular boundary get graded.
const GRADE_SPAN: usize = 2;

/// Splits `[lo, hi]` into at least `n_panels` panels. Interior boundaries
/// nearest to each singular coordinate are snapped onto it and the
/// neighboring panels are subdivided geometrically (ratio 2, finest cell
/// touching the singular point). Singular coordinates outside the interval
/// are ignored. Returned panels are contiguous, ascending, and cover
/// exactly `[lo, hi]`.
pub fn graded_panels(lo: f64, hi: f64, n_panels: usize, singular: &[f64]) -> Vec<(f64, f64)> {
    assert!(hi > lo, "empty interval");
    let n = n_panels.max(1);
    let width = hi - lo;
    let mut bounds: Vec<f64> = (0..=n).map(|i| lo + width * i as f64 / n as f64).collect();

    let mut snapped: Vec<usize> = Vec::new();
    let mut sing: Vec<f64> = singular
        .iter()
        .copied()
        .filter(|s| *s > lo && *s < hi)
        .collect();
    sing.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sing.dedup();
    for s in &sing {
        // Snap the nearest interior boundary onto the singular point, unless
        // an endpoint is closer in which case the grading below still sees
        // the point through the `snapped` record of the touched boundary.
        let mut best = 1usize;
        let mut best_d = f64::INFINITY;
        for (j, b) in bounds.iter().enumerate().take(n).skip(1) {
            let d = (b - s).abs();
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        bounds[best] = *s;
        snapped.push(best);
    }
    bounds.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // Identify which boundary indices now carry singular points.
    let singular_boundary = |b: f64| sing.contains(&b);

    let mut panels: Vec<(f64, f64)> = Vec::new();
    for w in bounds.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        panels.push((a, b));
    }

    // Geometric grading: panels within GRADE_SPAN of a singular boundary are
    // each replaced by GRADE_DEPTH sub-panels whose widths form a ratio-2
    // geometric sequence, finest toward the singular point.
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (idx, &(a, b)) in panels.iter().enumerate() {
        let mut toward_left = false;
        let mut toward_right = false;
        for back in 0..GRADE_SPAN {
            if idx >= back {
                let j = idx - back;
                if singular_boundary(panels[j].0) {
                    toward_left = true;
                }
            }
            let j = idx + back;
            if j < panels.len() && singular_boundary(panels[j].1) {
                toward_right = true;
            }
        }
        if toward_left && !toward_right {
            out.extend(geometric_split(a, b, GRADE_DEPTH, true));
        } else if toward_right && !toward_left {
            out.extend(geometric_split(a, b, GRADE_DEPTH, false));
        } else if toward_left && toward_right {
            let mid = 0.5 * (a + b);
            out.extend(geometric_split(a, mid, GRADE_DEPTH, true));
            out.extend(geometric_split(mid, b, GRADE_DEPTH, false));
        } else {
            out.push((a, b));
        }
    }
    out
}

/// Splits `[a, b]` into `depth` sub-panels with widths 1, 2, 4, ... (scaled),
/// finest at `a` when `fine_at_left`, else finest at `b`.
fn geometric_split(a: f64, b: f64, depth: usize, fine_at_left: bool) -> Vec<(f64, f64)> {
    let total: f64 = (2u64.pow(depth as u32) - 1) as f64;
    let w = b - a;
    let mut cuts = Vec::with_capacity(depth + 1);
    cuts.push(a);
    let mut acc = 0.0f64;
    for i in 0..depth {
        let piece = if fine_at_left {
            2u64.pow(i as u32) as f64
        } else {
            2u64.pow((depth - 1 - i) as u32) as f64
        };
        acc += piece;
        cuts.push(a + w * acc / total);
    }
    *cuts.last_mut().unwrap() = b;
    cuts.windows(2).map(|c| (c[0], c[1])).collect()
}

/// Integrates `f` over a box by tensor-product graded panels with an
/// `order`-point Gauss rule per axis per panel. `singular` lists point
/// singularities; each axis grades toward the projection of every singular
/// point. Panel contributions are accumulated in panel order regardless of
/// how the evaluation is scheduled, so the result is deterministic.
pub fn integrate_box<F>(
    bounds: &[(f64, f64)],
    n_panels: usize,
    singular: &[Vec<f64>],
    order: usize,
    f: F,
) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let d = bounds.len();
    assert!(d >= 1, "dimension must be at least 1");
    let rule = GaussLegendre::new(order);

    let axis_panels: Vec<Vec<(f64, f64)>> = (0..d)
        .map(|ax| {
            let coords: Vec<f64> = singular.iter().map(|s| s[ax]).collect();
            graded_panels(bounds[ax].0, bounds[ax].1, n_panels, &coords)
        })
        .collect();

    let counts: Vec<usize> = axis_panels.iter().map(|p| p.len()).collect();
    let total: usize = counts.iter().product();

    let cell_value = |cell: usize| -> f64 {
        let mut rem = cell;
        let mut panel = Vec::with_capacity(d);
        for ax in 0..d {
            let i = rem % counts[ax];
            rem /= counts[ax];
            panel.push(axis_panels[ax][i]);
        }
        // Tensor Gauss rule over this cell.
        let pts = rule.nodes.len();
        let mut idx = vec![0usize; d];
        let mut acc = 0.0f64;
        loop {
            let mut x = Vec::with_capacity(d);
            let mut w = 1.0f64;
            for ax in 0..d {
                let (a, b) = panel[ax];
                let half = 0.5 * (b - a);
                x.push(0.5 * (a + b) + half * rule.nodes[idx[ax]]);
                w *= half * rule.weights[idx[ax]];
            }
            acc += w * f(&x);
            // Odometer increment.
            let mut ax = 0;
            loop {
                idx[ax] += 1;
                if idx[ax] < pts {
                    break;
                }
                idx[ax] = 0;
                ax += 1;
                if ax == d {
                    return acc;
                }
            }
        }
    };

    // Parallel map, then an index-ordered serial sum: thread count never
    // changes the reduction order, so results stay bit-identical.
    let partials: Vec<f64> = (0..total).into_par_iter().map(cell_value).collect();
    partials.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_rule_small_orders_match_known_nodes() {
        let g1 = GaussLegendre::new(1);
        assert_relative_eq!(g1.nodes[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(g1.weights[0], 2.0, epsilon = 1e-15);

        let g2 = GaussLegendre::new(2);
        let r = 1.0 / 3.0f64.sqrt();
        assert_relative_eq!(g2.nodes[1], r, epsilon = 1e-15);
        assert_relative_eq!(g2.weights[0], 1.0, epsilon = 1e-15);

        let g5 = GaussLegendre::new(5);
        assert_relative_eq!(g5.weights[2], 128.0 / 225.0, epsilon = 1e-14);
        let w: f64 = g5.weights.iter().sum();
        assert_relative_eq!(w, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn gauss_rule_is_exact_on_polynomials() {
        // n points integrate degree 2n-1 exactly.
        for n in [2usize, 5, 8, 64] {
            let g = GaussLegendre::new(n);
            let deg = 2 * n - 1;
            let exact = |p: u32| -> f64 {
                // integral of x^p over [0,1]
                1.0 / (p as f64 + 1.0)
            };
            for p in [0u32, 1, deg as u32 / 2, deg as u32] {
                let v = g.integrate(0.0, 1.0, |x| x.powi(p as i32));
                assert_relative_eq!(v, exact(p), epsilon = 1e-13, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn graded_panels_snap_to_singular_point() {
        let panels = graded_panels(0.0, 1.0, 8, &[0.51]);
        assert!(panels.iter().any(|p| p.1 == 0.51 || p.0 == 0.51));
        // Coverage and contiguity.
        assert_eq!(panels.first().unwrap().0, 0.0);
        assert_eq!(panels.last().unwrap().1, 1.0);
        for w in panels.windows(2) {
            assert_eq!(w[0].1, w[1].0);
        }
        // Finest cell near the singular point is much smaller than uniform.
        let finest = panels
            .iter()
            .filter(|p| (p.0 - 0.51).abs() < 1e-12 || (p.1 - 0.51).abs() < 1e-12)
            .map(|p| p.1 - p.0)
            .fold(f64::INFINITY, f64::min);
        assert!(finest < 0.125 / 1000.0);
    }

    #[test]
    fn graded_panels_ignore_exterior_singularities() {
        let panels = graded_panels(0.0, 1.0, 4, &[-0.5, 1.5]);
        assert_eq!(panels.len(), 4);
    }

    #[test]
    fn integrable_singularity_is_captured() {
        // integral of |x - 1/2|^(-1/2) over [0,1] = 2*sqrt(2).
        let v = integrate_box(&[(0.0, 1.0)], 64, &[vec![0.5]], 5, |x| {
            (x[0] - 0.5).abs().powf(-0.5)
        });
        assert_relative_eq!(v, 2.0 * 2.0f64.sqrt(), max_relative = 2e-4);
    }

    #[test]
    fn box_integration_matches_separable_product() {
        // integral of x*y^2 over [0,1]x[0,2] = (1/2)*(8/3).
        let v = integrate_box(&[(0.0, 1.0), (0.0, 2.0)], 3, &[], 5, |x| x[0] * x[1] * x[1]);
        assert_relative_eq!(v, 0.5 * 8.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn smooth_integrand_converges_fast() {
        let f = |x: &[f64]| (2.0 * std::f64::consts::PI * x[0]).sin().powi(2);
        let v = integrate_box(&[(0.0, 1.0)], 16, &[], 5, f);
        assert_relative_eq!(v, 0.5, epsilon = 1e-12);
    }
}
