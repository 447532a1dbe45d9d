//! Polyharmonic radial kernels and their derived parameters.
//!
//! A kernel is determined by the ambient dimension `d`, a smoothness order
//! `m >= 1`, and a weight exponent `mu >= 0`. From these the radial profile
//! exponent is `beta = 2m + 2mu - d`, and the profile is
//!
//! ```text
//! psi(r) = r^beta            when beta is not an even integer,
//! psi(r) = r^beta * log(r)   when beta is a positive even integer,
//! ```
//!
//! the familiar thin-plate branch appearing at `d = 2, m = 2, mu = 0`.
//! Two more numbers ride along: `lambda = -2mu - d`, the algebraic decay
//! order of the weight transform that drives the convergence theory, and
//! the degree of the polynomial tail that must accompany the kernel for the
//! interpolation system to be solvable.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("dimension must be at least 1, got {0}")]
    BadDimension(u32),
    #[error("order m must be at least 1, got {0}")]
    BadOrder(u32),
    #[error("weight exponent mu must be finite and nonnegative, got {0}")]
    BadWeightExponent(f64),
    #[error("rough space is not continuously embedded: m + mu - d/2 = {0} must be positive")]
    RoughSpaceNotContinuous(f64),
    #[error("kernel exponent beta = 2m + 2mu - d must be positive, got {0}")]
    NonpositiveBeta(f64),
    #[error("polynomial degree {given} is below the solvability floor {floor}")]
    DegreeBelowFloor { given: usize, floor: usize },
    #[error("kernel radius must be nonnegative, got {0}")]
    NegativeRadius(f64),
    #[error("stored field {field} disagrees with the value derived from (d, m, mu)")]
    DerivedFieldMismatch { field: &'static str },
    #[error("smoothness order k = {k} outside 1..={m}")]
    KOutOfRange { k: u32, m: u32 },
    #[error("rate undefined: k + mu - d/2 = {0} must be positive")]
    RateNotDefined(f64),
}

/// A fully derived kernel description. Construct through [`KernelSpec::new`]
/// so the derived fields stay consistent with `(d, m, mu)`; deserialization
/// funnels through the same constructor, so a kernel read from JSON is as
/// valid as one built in code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelParams")]
pub struct KernelSpec {
    pub d: u32,
    pub m: u32,
    pub mu: f64,
    /// Radial exponent `2m + 2mu - d`.
    pub beta: f64,
    /// True when `beta` is a positive even integer and the profile carries
    /// the logarithmic factor.
    pub log_branch: bool,
    /// Weight transform decay order `-2mu - d`.
    pub lambda: f64,
    /// Degree of the appended polynomial tail.
    pub poly_degree: usize,
}

/// Wire form for a kernel: the generating triple `(d, m, mu)` plus optional
/// overrides. Derived fields may appear (full serialized specs round-trip)
/// but must then agree with the values recomputed from the triple.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelParams {
    d: u32,
    m: u32,
    mu: f64,
    #[serde(default)]
    poly_degree: Option<usize>,
    #[serde(default)]
    beta: Option<f64>,
    #[serde(default)]
    log_branch: Option<bool>,
    #[serde(default)]
    lambda: Option<f64>,
}

impl TryFrom<KernelParams> for KernelSpec {
    type Error = KernelError;

    fn try_from(p: KernelParams) -> Result<Self, KernelError> {
        let spec = KernelSpec::new(p.d, p.m, p.mu, p.poly_degree)?;
        if p.beta.is_some_and(|b| b != spec.beta) {
            return Err(KernelError::DerivedFieldMismatch { field: "beta" });
        }
        if p.log_branch.is_some_and(|l| l != spec.log_branch) {
            return Err(KernelError::DerivedFieldMismatch { field: "log_branch" });
        }
        if p.lambda.is_some_and(|l| l != spec.lambda) {
            return Err(KernelError::DerivedFieldMismatch { field: "lambda" });
        }
        Ok(spec)
    }
}

impl KernelSpec {
    /// Derives a kernel from `(d, m, mu)`. `poly_degree` overrides the
    /// default tail degree; it may exceed the solvability floor but never
    /// sit below it.
    pub fn new(d: u32, m: u32, mu: f64, poly_degree: Option<usize>) -> Result<Self, KernelError> {
        if d < 1 {
            return Err(KernelError::BadDimension(d));
        }
        if m < 1 {
            return Err(KernelError::BadOrder(m));
        }
        if !mu.is_finite() || mu < 0.0 {
            return Err(KernelError::BadWeightExponent(mu));
        }
        let half_d = d as f64 / 2.0;
        let embed = m as f64 + mu - half_d;
        if embed <= 0.0 {
            return Err(KernelError::RoughSpaceNotContinuous(embed));
        }
        let beta = 2.0 * (m as f64) + 2.0 * mu - d as f64;
        if beta <= 0.0 {
            return Err(KernelError::NonpositiveBeta(beta));
        }
        let log_branch = beta == beta.round() && (beta.round() as i64) % 2 == 0;
        let lambda = -2.0 * mu - d as f64;
        let floor = Self::degree_floor(beta, log_branch);
        let poly_degree = match poly_degree {
            None => floor,
            Some(g) if g >= floor => g,
            Some(g) => return Err(KernelError::DegreeBelowFloor { given: g, floor }),
        };
        Ok(Self { d, m, mu, beta, log_branch, lambda, poly_degree })
    }

    /// Minimal tail degree for a solvable system: one less than the order of
    /// conditional positive definiteness of the (sign-normalized) kernel.
    fn degree_floor(beta: f64, log_branch: bool) -> usize {
        if log_branch {
            (beta / 2.0) as usize
        } else {
            (beta / 2.0).ceil() as usize - 1
        }
    }

    /// Order of conditional positive definiteness of the profile once its
    /// sign is normalized; always `poly_degree_floor + 1`.
    pub fn cpd_order(&self) -> usize {
        Self::degree_floor(self.beta, self.log_branch) + 1
    }

    /// Sign that makes the kernel conditionally positive definite with
    /// respect to polynomials of degree `cpd_order() - 1`. The raw profile
    /// is used everywhere for assembly and evaluation; this sign only enters
    /// quadratic-form computations such as the native energy.
    pub fn cpd_sign(&self) -> f64 {
        if self.cpd_order().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    /// Radial profile value at `r >= 0`. Both branches vanish at `r = 0`;
    /// the logarithmic branch extends continuously there.
    pub fn eval(&self, r: f64) -> Result<f64, KernelError> {
        if r < 0.0 || r.is_nan() {
            return Err(KernelError::NegativeRadius(r));
        }
        Ok(self.eval_unchecked(r))
    }

    /// Same as [`KernelSpec::eval`] for radii already known to be
    /// nonnegative (norms are), skipping the domain check in hot loops.
    #[inline]
    pub fn eval_unchecked(&self, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        if self.log_branch {
            r.powf(self.beta) * r.ln()
        } else {
            r.powf(self.beta)
        }
    }

    /// Predicted L2 convergence-rate exponent for data of smoothness order
    /// `k`: the interpolation error contracts like `h^(k - lambda/2 - d/2)`
    /// on quasi-uniform nodes, which simplifies to `k + mu`.
    pub fn predicted_rate(&self, k: u32) -> Result<f64, KernelError> {
        if k < 1 || k > self.m {
            return Err(KernelError::KOutOfRange { k, m: self.m });
        }
        let cont = k as f64 + self.mu - self.d as f64 / 2.0;
        if cont <= 0.0 {
            return Err(KernelError::RateNotDefined(cont));
        }
        Ok(k as f64 - self.lambda / 2.0 - self.d as f64 / 2.0)
    }
}
