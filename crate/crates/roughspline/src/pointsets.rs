//! Node sets, their generators, and the geometry numbers that control
//! interpolation error: fill distance, separation radius, mesh ratio, and
//! polynomial unisolvency.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PointSetError {
    #[error("domain has empty interior")]
    DegenerateDomain,
    #[error("domain and points disagree on dimension: domain is {domain}-d, point {index} is {point}-d")]
    DimensionMismatch { domain: usize, index: usize, point: usize },
    #[error("point {index} lies outside the domain closure")]
    OutsideDomain { index: usize },
    #[error("points {i} and {j} coincide exactly")]
    DuplicatePoint { i: usize, j: usize },
    #[error("point set is empty")]
    Empty,
    #[error("separation radius needs at least two points")]
    FewerThanTwoPoints,
    #[error("candidate resolution must be at least 2, got {0}")]
    BadResolution(usize),
    #[error("grid node count per axis must be at least 1")]
    BadGridSize,
    #[error("jitter fraction must lie in [0, 1), got {0}")]
    BadJitter(f64),
    #[error("generator requires a box domain")]
    BoxDomainRequired,
    #[error("malformed points file: {0}")]
    MalformedCsv(String),
}

/// Region the nodes live in: an axis-aligned box or a closed ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Box { bounds: Vec<(f64, f64)> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Domain {
    pub fn unit_box(d: usize) -> Self {
        Domain::Box { bounds: vec![(0.0, 1.0); d] }
    }

    pub fn validate(&self) -> Result<(), PointSetError> {
        match self {
            Domain::Box { bounds } => {
                if bounds.is_empty() || bounds.iter().any(|(lo, hi)| lo >= hi || !lo.is_finite() || !hi.is_finite()) {
                    return Err(PointSetError::DegenerateDomain);
                }
            }
            Domain::Ball { center, radius } => {
                if center.is_empty() || !radius.is_finite() || *radius <= 0.0 || center.iter().any(|c| !c.is_finite()) {
                    return Err(PointSetError::DegenerateDomain);
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { bounds } => bounds.len(),
            Domain::Ball { center, .. } => center.len(),
        }
    }

    /// Membership in the closure, with an absolute slack `tol` for data that
    /// has been through serialization.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            Domain::Box { bounds } => bounds
                .iter()
                .zip(x)
                .all(|((lo, hi), xi)| *xi >= lo - tol && *xi <= hi + tol),
            Domain::Ball { center, radius } => dist(center, x) <= radius + tol,
        }
    }

    /// Smallest axis-aligned box containing the domain.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        match self {
            Domain::Box { bounds } => bounds.clone(),
            Domain::Ball { center, radius } => {
                center.iter().map(|c| (c - radius, c + radius)).collect()
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Box { bounds } => bounds
                .iter()
                .map(|(lo, hi)| (hi - lo) * (hi - lo))
                .sum::<f64>()
                .sqrt(),
            Domain::Ball { radius, .. } => 2.0 * radius,
        }
    }

    /// Midpoint and half-width per axis of the bounding box; the affine
    /// chart used to keep polynomial basis values near unit size.
    pub fn chart(&self) -> (Vec<f64>, Vec<f64>) {
        let bb = self.bounding_box();
        let center = bb.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
        let half = bb.iter().map(|(lo, hi)| 0.5 * (hi - lo)).collect();
        (center, half)
    }
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A finite set of pairwise-distinct points inside a domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    points: Vec<Vec<f64>>,
    domain: Domain,
}

impl PointSet {
    pub fn new(points: Vec<Vec<f64>>, domain: Domain) -> Result<Self, PointSetError> {
        domain.validate()?;
        if points.is_empty() {
            return Err(PointSetError::Empty);
        }
        let d = domain.dim();
        let tol = 1e-9 * domain.diameter();
        for (i, p) in points.iter().enumerate() {
            if p.len() != d {
                return Err(PointSetError::DimensionMismatch { domain: d, index: i, point: p.len() });
            }
            if !domain.contains(p, tol) {
                return Err(PointSetError::OutsideDomain { index: i });
            }
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if points[i] == points[j] {
                    return Err(PointSetError::DuplicatePoint { i, j });
                }
            }
        }
        Ok(Self { points, domain })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Points CSV with header `x1,...,xd`; floats are written in shortest
    /// round-trip form so parsing reproduces them bit for bit.
    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let mut s = String::new();
        let header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        s.push_str(&header.join(","));
        s.push('\n');
        for p in &self.points {
            let row: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// Parses a points CSV produced by [`PointSet::to_csv`] (header `x1,...,xd`,
/// one point per row). Returns the bare coordinates; pair them with a domain
/// through [`PointSet::new`].
pub fn parse_points_csv(text: &str) -> Result<Vec<Vec<f64>>, PointSetError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| PointSetError::MalformedCsv("empty file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    for (i, c) in cols.iter().enumerate() {
        let want = format!("x{}", i + 1);
        if *c != want {
            return Err(PointSetError::MalformedCsv(format!(
                "expected header column {} to be {want}, got {c:?}",
                i + 1
            )));
        }
    }
    let d = cols.len();
    let mut points = Vec::new();
    for (ln, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != d {
            return Err(PointSetError::MalformedCsv(format!(
                "row {} has {} fields, expected {d}",
                ln + 2,
                fields.len()
            )));
        }
        let mut p = Vec::with_capacity(d);
        for f in fields {
            let v: f64 = f
                .parse()
                .map_err(|_| PointSetError::MalformedCsv(format!("bad number {f:?} on row {}", ln + 2)))?;
            p.push(v);
        }
        points.push(p);
    }
    if points.is_empty() {
        return Err(PointSetError::MalformedCsv("no data rows".into()));
    }
    Ok(points)
}

/// One node per grid cell: the cell center plus a uniform jitter of at most
/// `jitter_fraction` of the half-cell per axis. Deterministic for a fixed
/// seed. On a box the mesh ratio stays bounded by
/// `sqrt(d) * (1 + jitter_fraction) / (1 - jitter_fraction)`.
pub fn generate_jittered_grid(
    domain: &Domain,
    n_per_axis: usize,
    jitter_fraction: f64,
    seed: u64,
) -> Result<PointSet, PointSetError> {
    let bounds = match domain {
        Domain::Box { bounds } => bounds.clone(),
        Domain::Ball { .. } => return Err(PointSetError::BoxDomainRequired),
    };
    domain.validate()?;
    if n_per_axis < 1 {
        return Err(PointSetError::BadGridSize);
    }
    if !(0.0..1.0).contains(&jitter_fraction) {
        return Err(PointSetError::BadJitter(jitter_fraction));
    }
    let d = bounds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let halves: Vec<f64> = bounds.iter().map(|(lo, hi)| 0.5 * (hi - lo) / n_per_axis as f64).collect();

    let total = n_per_axis.pow(d as u32);
    let mut points = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        let mut p = Vec::with_capacity(d);
        for ax in 0..d {
            let center = bounds[ax].0 + (2 * idx[ax] + 1) as f64 * halves[ax];
            let jitter = if jitter_fraction > 0.0 {
                rng.gen_range(-1.0..1.0) * jitter_fraction * halves[ax]
            } else {
                0.0
            };
            p.push(center + jitter);
        }
        points.push(p);
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < n_per_axis {
                break;
            }
            *slot = 0;
        }
    }
    PointSet::new(points, domain.clone())
}

/// First `n` points of the Halton sequence (bases: the first `d` primes,
/// starting from index 1), mapped affinely into the box.
pub fn generate_halton(domain: &Domain, n: usize) -> Result<PointSet, PointSetError> {
    let bounds = match domain {
        Domain::Box { bounds } => bounds.clone(),
        Domain::Ball { .. } => return Err(PointSetError::BoxDomainRequired),
    };
    domain.validate()?;
    if n < 1 {
        return Err(PointSetError::Empty);
    }
    let d = bounds.len();
    let bases = first_primes(d);
    let mut points = Vec::with_capacity(n);
    for i in 1..=n {
        let p: Vec<f64> = (0..d)
            .map(|ax| {
                let u = radical_inverse(i as u64, bases[ax]);
                bounds[ax].0 + u * (bounds[ax].1 - bounds[ax].0)
            })
            .collect();
        points.push(p);
    }
    PointSet::new(points, domain.clone())
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 0.0f64;
    let mut f = 1.0 / base as f64;
    while i > 0 {
        inv += (i % base) as f64 * f;
        i /= base;
        f /= base as f64;
    }
    inv
}

fn first_primes(count: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(count);
    let mut cand = 2u64;
    while primes.len() < count {
        if primes.iter().all(|p| !cand.is_multiple_of(*p)) {
            primes.push(cand);
        }
        cand += 1;
    }
    primes
}

/// Fill distance of the nodes in their domain: the largest distance from a
/// domain point to its nearest node, scanned over an inclusive grid with
/// `resolution` candidates per axis (restricted to the domain when it is a
/// ball). The scan never overestimates: the result is a lower bound on the
/// true fill distance with error at most `diameter * sqrt(d) / resolution`,
/// and it is monotone toward the truth as `resolution` grows.
pub fn fill_distance(ps: &PointSet, resolution: usize) -> Result<f64, PointSetError> {
    if resolution < 2 {
        return Err(PointSetError::BadResolution(resolution));
    }
    if ps.is_empty() {
        return Err(PointSetError::Empty);
    }
    let d = ps.dim();
    let bb = ps.domain().bounding_box();
    let is_ball = matches!(ps.domain(), Domain::Ball { .. });
    let total = resolution.pow(d as u32);
    let points = ps.points();
    let domain = ps.domain();

    let h = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut rem = flat;
            let mut x = [0.0f64; 8];
            for ax in 0..d {
                let i = rem % resolution;
                rem /= resolution;
                let (lo, hi) = bb[ax];
                x[ax] = lo + (hi - lo) * i as f64 / (resolution - 1) as f64;
            }
            let x = &x[..d];
            if is_ball && !domain.contains(x, 0.0) {
                return 0.0;
            }
            points
                .iter()
                .map(|p| dist(p, x))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max);
    Ok(h)
}

/// Separation radius: half the smallest pairwise distance. Exact scan.
pub fn separation_radius(ps: &PointSet) -> Result<f64, PointSetError> {
    let pts = ps.points();
    if pts.is_empty() {
        return Err(PointSetError::Empty);
    }
    if pts.len() < 2 {
        return Err(PointSetError::FewerThanTwoPoints);
    }
    let mut min = f64::INFINITY;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            min = min.min(dist(&pts[i], &pts[j]));
        }
    }
    Ok(0.5 * min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryStats {
    /// Fill distance (grid-scan lower bound).
    pub h: f64,
    /// Separation radius; `None` for a single point.
    pub q: Option<f64>,
    /// `h / q`; `None` when `q` is.
    pub mesh_ratio: Option<f64>,
}

pub fn geometry_stats(ps: &PointSet, resolution: usize) -> Result<GeometryStats, PointSetError> {
    let h = fill_distance(ps, resolution)?;
    let q = match separation_radius(ps) {
        Ok(q) => Some(q),
        Err(PointSetError::FewerThanTwoPoints) => None,
        Err(e) => return Err(e),
    };
    Ok(GeometryStats { h, q, mesh_ratio: q.map(|q| h / q) })
}

/// All multi-indices in `d` variables of total order at most `degree`,
/// in graded lexicographic order.
pub fn multi_indices_up_to(d: usize, degree: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for k in 0..=degree {
        out.extend(multi_indices_exact(d, k));
    }
    out
}

/// All multi-indices in `d` variables of total order exactly `k`.
pub fn multi_indices_exact(d: usize, k: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; d];
    fn rec(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, axis: usize, left: u32) {
        if axis + 1 == cur.len() {
            cur[axis] = left;
            out.push(cur.clone());
            return;
        }
        for v in (0..=left).rev() {
            cur[axis] = v;
            rec(out, cur, axis + 1, left - v);
        }
    }
    if d == 0 {
        return out;
    }
    rec(&mut out, &mut cur, 0, k as u32);
    out
}

/// Dimension of the polynomial space of degree `degree` in `d` variables.
pub fn poly_space_dim(d: usize, degree: usize) -> usize {
    // C(degree + d, d)
    let mut num = 1usize;
    for i in 1..=d {
        num = num * (degree + i) / i;
    }
    num
}

/// Whether the nodes determine polynomials of the given degree uniquely:
/// the collocation matrix of monomials (points recentered on their centroid
/// and rescaled, columns normalized) must have full numerical rank, smallest
/// singular value above `tol` relative to the largest.
pub fn is_unisolvent(ps: &PointSet, degree: usize, tol: f64) -> bool {
    let pts = ps.points();
    let d = ps.dim();
    let ell = poly_space_dim(d, degree);
    if pts.len() < ell {
        return false;
    }
    // Affine renormalization: rank is unchanged, conditioning is tamed, and
    // the check becomes invariant under translations and rotations in spirit
    // (exactly so for translations and scalings).
    let n = pts.len();
    let centroid: Vec<f64> = (0..d)
        .map(|ax| pts.iter().map(|p| p[ax]).sum::<f64>() / n as f64)
        .collect();
    let scale = pts
        .iter()
        .map(|p| dist(p, &centroid))
        .fold(0.0f64, f64::max)
        .max(1e-300);

    let indices = multi_indices_up_to(d, degree);
    let mut v = DMatrix::zeros(n, ell);
    for (i, p) in pts.iter().enumerate() {
        let y: Vec<f64> = (0..d).map(|ax| (p[ax] - centroid[ax]) / scale).collect();
        for (j, alpha) in indices.iter().enumerate() {
            v[(i, j)] = monomial(&y, alpha);
        }
    }
    for j in 0..ell {
        let norm = v.column(j).norm();
        if norm == 0.0 {
            return false;
        }
        for i in 0..n {
            v[(i, j)] /= norm;
        }
    }
    let sv = v.singular_values();
    let smax = sv.iter().fold(0.0f64, |a, b| a.max(*b));
    let smin = sv.iter().fold(f64::INFINITY, |a, b| a.min(*b));
    smax > 0.0 && smin > tol * smax
}

pub fn monomial(x: &[f64], alpha: &[u32]) -> f64 {
    x.iter()
        .zip(alpha)
        .map(|(xi, a)| xi.powi(*a as i32))
        .product()
}
