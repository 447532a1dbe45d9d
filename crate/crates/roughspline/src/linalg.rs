//! Dense linear algebra for symmetric indefinite systems.
//!
//! Saddle-point matrices assembled by the interpolator are symmetric but
//! strongly indefinite (the kernel block has a zero diagonal on the
//! polyharmonic branch), so plain Cholesky is out and the usual remedy is an
//! LDL^T factorization with Bunch-Kaufman partial pivoting: 1x1 and 2x2
//! diagonal pivots chosen so the multipliers stay bounded. This module
//! implements the unblocked lower-triangle variant together with a
//! Hager-style 1-norm condition estimator driven by the factorization.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is singular to working precision (zero pivot at column {0})")]
    Singular(usize),
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: matrix is {n}x{n} but right-hand side has length {rhs}")]
    DimensionMismatch { n: usize, rhs: usize },
}

/// Threshold parameter of the pivot strategy; the classical value that
/// balances element growth between 1x1 and 2x2 steps.
fn bk_alpha() -> f64 {
    (1.0 + 17.0f64.sqrt()) / 8.0
}

/// LDL^T factorization of a symmetric matrix with Bunch-Kaufman pivoting.
///
/// Only the lower triangle of the input is referenced. The factorization is
/// deterministic: identical input bytes produce identical factors and
/// identical solves.
pub struct SymmetricIndefinite {
    n: usize,
    /// Lower triangle holds the multipliers of L (strictly below the
    /// diagonal blocks) and the 1x1/2x2 blocks of D on the diagonal.
    f: DMatrix<f64>,
    /// LAPACK-style pivot record: `ipiv[k] = p >= 0` means a 1x1 pivot with
    /// rows/columns `k` and `p` interchanged; `ipiv[k] = ipiv[k+1] = -(p+1)`
    /// means a 2x2 pivot with rows/columns `k+1` and `p` interchanged.
    ipiv: Vec<i64>,
    one_norm: f64,
}

impl SymmetricIndefinite {
    /// Factors `a`, consuming it. `a` must be square; only the lower
    /// triangle is read.
    pub fn factor(a: DMatrix<f64>) -> Result<Self, LinalgError> {
        let (rows, cols) = a.shape();
        if rows != cols {
            return Err(LinalgError::NotSquare { rows, cols });
        }
        let n = rows;
        let one_norm = sym_one_norm_lower(&a);
        let mut f = a;
        let mut ipiv = vec![0i64; n];
        let alpha = bk_alpha();

        let mut k = 0usize;
        while k < n {
            let absakk = f[(k, k)].abs();
            // Largest off-diagonal magnitude in column k below the diagonal.
            let (imax, colmax) = {
                let mut im = k;
                let mut cm = 0.0f64;
                for i in (k + 1)..n {
                    let v = f[(i, k)].abs();
                    if v > cm {
                        cm = v;
                        im = i;
                    }
                }
                (im, cm)
            };

            if absakk.max(colmax) == 0.0 {
                return Err(LinalgError::Singular(k));
            }

            let mut kstep = 1usize;
            let kp: usize;
            if absakk >= alpha * colmax {
                kp = k;
            } else {
                // rowmax: largest off-diagonal magnitude in row imax of the
                // remaining block (lower storage: part row, part column).
                let mut rowmax = 0.0f64;
                for j in k..imax {
                    rowmax = rowmax.max(f[(imax, j)].abs());
                }
                for i in (imax + 1)..n {
                    rowmax = rowmax.max(f[(i, imax)].abs());
                }
                if absakk * rowmax >= alpha * colmax * colmax {
                    kp = k;
                } else if f[(imax, imax)].abs() >= alpha * rowmax {
                    kp = imax;
                } else {
                    kp = imax;
                    kstep = 2;
                }
            }

            // Interchange rows/columns kk and kp inside the trailing block
            // only; earlier columns of L stay put and the solve replays the
            // interchanges in factorization order instead.
            let kk = k + kstep - 1;
            if kp != kk {
                for j in (kk + 1)..kp {
                    f.swap((j, kk), (kp, j));
                }
                for i in (kp + 1)..n {
                    f.swap((i, kk), (i, kp));
                }
                f.swap((kk, kk), (kp, kp));
                if kstep == 2 {
                    f.swap((k + 1, k), (kp, k));
                }
            }

            if kstep == 1 {
                let d = f[(k, k)];
                if d == 0.0 {
                    return Err(LinalgError::Singular(k));
                }
                // Rank-1 update with the raw column, then scale the column
                // into multipliers; interleaving the two corrupts rows that
                // still need the raw values.
                for i in (k + 1)..n {
                    let lik = f[(i, k)] / d;
                    for j in (k + 1)..=i {
                        let fjk = f[(j, k)];
                        f[(i, j)] -= lik * fjk;
                    }
                }
                for i in (k + 1)..n {
                    f[(i, k)] /= d;
                }
                ipiv[k] = kp as i64;
                k += 1;
            } else {
                let d11 = f[(k, k)];
                let d21 = f[(k + 1, k)];
                let d22 = f[(k + 1, k + 1)];
                let det = d11 * d22 - d21 * d21;
                if det == 0.0 {
                    return Err(LinalgError::Singular(k));
                }
                let winv = |b1: f64, b2: f64| {
                    ((d22 * b1 - d21 * b2) / det, (d11 * b2 - d21 * b1) / det)
                };
                for i in (k + 2)..n {
                    let (w1, w2) = winv(f[(i, k)], f[(i, k + 1)]);
                    for j in (k + 2)..=i {
                        let fj1 = f[(j, k)];
                        let fj2 = f[(j, k + 1)];
                        f[(i, j)] -= w1 * fj1 + w2 * fj2;
                    }
                }
                for i in (k + 2)..n {
                    let (w1, w2) = winv(f[(i, k)], f[(i, k + 1)]);
                    f[(i, k)] = w1;
                    f[(i, k + 1)] = w2;
                }
                ipiv[k] = -(kp as i64) - 1;
                ipiv[k + 1] = -(kp as i64) - 1;
                k += 2;
            }
        }

        Ok(Self { n, f, ipiv, one_norm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// 1-norm of the original matrix, recorded before factoring.
    pub fn matrix_one_norm(&self) -> f64 {
        self.one_norm
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<(), LinalgError> {
        if b.len() != self.n {
            return Err(LinalgError::DimensionMismatch { n: self.n, rhs: b.len() });
        }
        let n = self.n;
        let f = &self.f;

        // Forward pass mirrors the factorization order: interchange, then
        // eliminate with the stored multipliers.
        let mut k = 0usize;
        while k < n {
            if self.ipiv[k] >= 0 {
                let kp = self.ipiv[k] as usize;
                b.swap(k, kp);
                for i in (k + 1)..n {
                    b[i] -= f[(i, k)] * b[k];
                }
                k += 1;
            } else {
                let kp = (-self.ipiv[k] - 1) as usize;
                b.swap(k + 1, kp);
                for i in (k + 2)..n {
                    b[i] -= f[(i, k)] * b[k] + f[(i, k + 1)] * b[k + 1];
                }
                k += 2;
            }
        }

        // Block-diagonal solve.
        let mut k = 0usize;
        while k < n {
            if self.ipiv[k] >= 0 {
                let d = f[(k, k)];
                if d == 0.0 {
                    return Err(LinalgError::Singular(k));
                }
                b[k] /= d;
                k += 1;
            } else {
                let d11 = f[(k, k)];
                let d21 = f[(k + 1, k)];
                let d22 = f[(k + 1, k + 1)];
                let det = d11 * d22 - d21 * d21;
                if det == 0.0 {
                    return Err(LinalgError::Singular(k));
                }
                let (b1, b2) = (b[k], b[k + 1]);
                b[k] = (d22 * b1 - d21 * b2) / det;
                b[k + 1] = (d11 * b2 - d21 * b1) / det;
                k += 2;
            }
        }

        // Backward pass: undo the forward steps in exact reverse order.
        let mut blocks = Vec::with_capacity(n);
        let mut k = 0usize;
        while k < n {
            if self.ipiv[k] >= 0 {
                blocks.push((k, 1usize));
                k += 1;
            } else {
                blocks.push((k, 2usize));
                k += 2;
            }
        }
        for &(k, step) in blocks.iter().rev() {
            if step == 1 {
                let kp = self.ipiv[k] as usize;
                let mut acc = 0.0;
                for i in (k + 1)..n {
                    acc += f[(i, k)] * b[i];
                }
                b[k] -= acc;
                b.swap(k, kp);
            } else {
                let kp = (-self.ipiv[k] - 1) as usize;
                let (mut a1, mut a2) = (0.0, 0.0);
                for i in (k + 2)..n {
                    a1 += f[(i, k)] * b[i];
                    a2 += f[(i, k + 1)] * b[i];
                }
                b[k] -= a1;
                b[k + 1] -= a2;
                b.swap(k + 1, kp);
            }
        }
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    /// Estimates the 1-norm condition number using Hager's method: a few
    /// solves steer a sign vector toward a near-maximizing column of the
    /// inverse. Deterministic and usually within a small factor of the truth.
    pub fn condition_estimate_one_norm(&self) -> Result<f64, LinalgError> {
        let n = self.n;
        if n == 0 {
            return Ok(0.0);
        }
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0f64;
        for _ in 0..5 {
            let y = self.solve(&x)?;
            let y_norm: f64 = y.iter().map(|v| v.abs()).sum();
            est = est.max(y_norm);
            let xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            // A is symmetric, so the transpose solve is the same solve.
            let z = self.solve(&xi)?;
            let (mut jmax, mut zmax) = (0usize, 0.0f64);
            for (j, v) in z.iter().enumerate() {
                if v.abs() > zmax {
                    zmax = v.abs();
                    jmax = j;
                }
            }
            let zx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zmax <= zx {
                break;
            }
            x.iter_mut().for_each(|v| *v = 0.0);
            x[jmax] = 1.0;
        }
        // Guard against early stagnation with an alternating probe, as the
        // LAPACK estimators do.
        let probe: Vec<f64> = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                s * (1.0 + i as f64 / (n.max(2) - 1) as f64)
            })
            .collect();
        let w = self.solve(&probe)?;
        let w_norm: f64 = w.iter().map(|v| v.abs()).sum::<f64>() * 2.0 / (3.0 * n as f64);
        est = est.max(w_norm);
        Ok(est * self.one_norm)
    }
}

/// 1-norm of a symmetric matrix given by its lower triangle.
fn sym_one_norm_lower(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut col_sums = vec![0.0f64; n];
    for j in 0..n {
        for i in j..n {
            let v = a[(i, j)].abs();
            col_sums[j] += v;
            if i != j {
                col_sums[i] += v;
            }
        }
    }
    col_sums.into_iter().fold(0.0, f64::max)
}

/// Ordinary least squares for a straight line `y = intercept + slope * x`.
///
/// Returns `(slope, intercept, slope_stderr)`. The standard error is the
/// usual OLS estimate; it is 0 when only two points are fitted.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let xbar = xs.iter().sum::<f64>() / nf;
    let ybar = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let stderr = if n == 2 {
        0.0
    } else {
        let ss_res: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| {
                let r = y - (intercept + slope * x);
                r * r
            })
            .sum();
        (ss_res / (nf - 2.0) / sxx).sqrt()
    };
    Some((slope, intercept, stderr))
}
