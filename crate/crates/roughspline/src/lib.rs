//! Scattered-data interpolation with polyharmonic radial basis functions.
//!
//! The crate builds interpolants of the form
//!
//! ```text
//! s(x) = sum_a b_a psi(|x - a|) + p(x)
//! ```
//!
//! where `psi` is a polyharmonic radial kernel (`r^beta`, or `r^beta log r`
//! when `beta` is a positive even integer) and `p` is a low-degree polynomial
//! tail pinned down by moment side conditions on the coefficients `b`.
//! Around that core sit the tools needed to measure how fast such
//! interpolants converge on data of limited smoothness:
//!
//! * [`kernels`]: kernel parameter derivation and predicted convergence rates,
//! * [`pointsets`]: node generation, fill distance, separation, unisolvency,
//! * [`interpolator`]: dense saddle-point assembly, solve, and evaluation,
//! * [`targets`]: reference functions with closed-form derivative oracles and
//!   integral smoothness seminorms,
//! * [`surrogate`]: a mollified local-polynomial smoothing construction with a
//!   separation-scaling probe,
//! * [`study`]: multi-level convergence studies with rate fitting and reports.

pub mod interpolator;
pub mod kernels;
pub mod linalg;
pub mod pointsets;
pub mod quadrature;
pub mod study;
pub mod surrogate;
pub mod targets;

pub use interpolator::{solve_interpolant, Interpolant, InterpolationProblem};
pub use kernels::KernelSpec;
pub use pointsets::{Domain, GeometryStats, PointSet};
pub use study::{run_study, NodeGenerator, StudyConfig, StudyReport};
pub use targets::TargetFunction;
