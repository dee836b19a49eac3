//! Dense linear algebra for the inference routines. The LU solver takes an
//! explicit singularity threshold.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Relative pivot threshold: a pivot below `SINGULAR_RTOL·‖M‖∞` is singular.
pub const SINGULAR_RTOL: f64 = 1e-12;

/// Matrices up to this size get an eigenvalue cross-check that overrides the
/// power-iteration estimate.
pub const CROSS_CHECK_MAX_N: usize = 8;

const SPECTRAL_SEED: u64 = 0x005e_ed0f_ca11;
const SPECTRAL_RESTARTS: u64 = 3;

/// `|A_ij|^α`.
pub fn entrywise_abs_pow(a: &DMatrix<f64>, alpha: f64) -> DMatrix<f64> {
    a.map(|x| abs_pow(x, alpha))
}

/// `sign(A_ij)·|A_ij|^α`.
pub fn signed_abs_pow(a: &DMatrix<f64>, alpha: f64) -> DMatrix<f64> {
    a.map(|x| if x == 0.0 { 0.0 } else { x.signum() * abs_pow(x, alpha) })
}

/// `log|A_ij|`, zero where `A_ij = 0`.
pub fn entrywise_log_abs(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.map(|x| if x == 0.0 { 0.0 } else { x.abs().ln() })
}

fn abs_pow(x: f64, alpha: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if alpha == 1.0 {
        x.abs()
    } else {
        x.abs().powf(alpha)
    }
}

/// Maximum absolute row sum.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn vec_inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// LU factorization with partial pivoting.
#[derive(Clone, Debug)]
pub struct LuFactor {
    lu: DMatrix<f64>,
    perm: Vec<usize>,
    min_pivot: f64,
}

impl LuFactor {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::ModelShape(format!(
                "LU needs a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        let threshold = SINGULAR_RTOL * inf_norm(m);
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let (p, pivot) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pivot > threshold) {
                return Err(Error::SingularMatrix { pivot, threshold });
            }
            min_pivot = min_pivot.min(pivot);
            if p != k {
                lu.swap_rows(p, k);
                perm.swap(p, k);
            }
            let diag = lu[(k, k)];
            for i in (k + 1)..n {
                let factor = lu[(i, k)] / diag;
                lu[(i, k)] = factor;
                if factor != 0.0 {
                    for j in (k + 1)..n {
                        lu[(i, j)] -= factor * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Self { lu, perm, min_pivot })
    }

    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.lu.nrows();
        let mut x = DVector::from_iterator(n, self.perm.iter().map(|&i| b[i]));
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        x
    }
}

/// Outcome of [`solve_with_stats`].
#[derive(Clone, Debug)]
pub struct LinearSolve {
    pub x: DVector<f64>,
    pub min_pivot: f64,
    /// `‖Mx − b‖∞` after one step of iterative refinement.
    pub residual: f64,
}

/// Solves `Mx = b` and reports the smallest pivot and final residual.
pub fn solve_with_stats(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<LinearSolve> {
    if m.nrows() != b.len() {
        return Err(Error::ModelShape(format!(
            "right-hand side has length {}, matrix has {} rows",
            b.len(),
            m.nrows()
        )));
    }
    let lu = LuFactor::new(m)?;
    let mut x = lu.solve(b);
    let r = b - m * &x;
    x += lu.solve(&r);
    let residual = vec_inf_norm(&(b - m * &x));
    Ok(LinearSolve {
        x,
        min_pivot: lu.min_pivot(),
        residual,
    })
}

/// Solves `Mx = b` by partial-pivoting LU.
pub fn solve_linear(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    solve_with_stats(m, b).map(|s| s.x)
}

/// Spectral radius with the default tolerance `1e-6` and `10000` iterations.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    spectral_radius_with(m, 1e-6, 10_000)
}

/// Estimate of `max |λ(M)|` within `tol·(1 + ρ)`.
///
/// Power iteration from a seeded random start. Each step fits the newest
/// iterate as a combination of the previous two, so a dominant complex pair
/// or a `±λ` pair is resolved as well as a single real eigenvalue.
/// Nonnegative matrices are shifted by `‖M‖∞/2`, which makes the Perron
/// root strictly dominant. Up to three restarts with fresh seeds are tried.
/// For `n ≤ 8` the estimate is checked against the eigenvalues of a real
/// Schur decomposition, which wins on disagreement. Larger matrices fall
/// back to the Schur eigenvalues only when every restart stagnates, which
/// happens when several eigenvalues share the dominant modulus.
pub fn spectral_radius_with(m: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::ModelShape(format!(
            "spectral radius needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let n = m.nrows();
    if n == 0 || m.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let shift = if m.iter().all(|&x| x >= 0.0) {
        0.5 * inf_norm(m)
    } else {
        0.0
    };

    let mut outcome = Err(f64::NAN);
    for attempt in 0..=SPECTRAL_RESTARTS {
        outcome = power_iterate(m, shift, tol, max_iter, SPECTRAL_SEED + attempt);
        if outcome.is_ok() {
            break;
        }
        log::debug!("spectral radius: restart {} after stagnation", attempt + 1);
    }

    if n <= CROSS_CHECK_MAX_N {
        if let Some(reference) = schur_spectral_radius(m) {
            return Ok(match outcome {
                Ok(rho) if (rho - reference).abs() <= tol * (1.0 + reference) => rho,
                _ => reference,
            });
        }
    }
    if outcome.is_err() {
        log::debug!("spectral radius: power iteration stagnated, using Schur eigenvalues");
        if let Some(reference) = schur_spectral_radius(m) {
            return Ok(reference);
        }
    }
    outcome.map_err(|estimate| Error::SpectralUnconverged {
        estimate,
        iterations: max_iter,
    })
}

fn schur_spectral_radius(m: &DMatrix<f64>) -> Option<f64> {
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 10_000)?;
    Some(schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Returns `Err(last_estimate)` on stagnation.
fn power_iterate(m: &DMatrix<f64>, shift: f64, tol: f64, max_iter: usize, seed: u64) -> std::result::Result<f64, f64> {
    let n = m.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let apply = |x: &DVector<f64>| -> DVector<f64> {
        let mut y = m * x;
        if shift != 0.0 {
            y.axpy(shift, x, 1.0);
        }
        y
    };

    let mut x = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
    let norm = x.norm();
    if norm == 0.0 {
        return Err(f64::NAN);
    }
    x /= norm;
    let mut q = apply(&x);
    let mut last = f64::NAN;
    let mut prev_change = 0.0;
    let mut stable_steps = 0;
    for _ in 0..max_iter {
        let qn = q.norm();
        if qn == 0.0 {
            // x landed in the null space of a nilpotent (shifted) operator
            return Ok((0.0 - shift).abs());
        }
        let r = apply(&q);
        let estimate = dominant_modulus(&x, &q, &r) - shift;
        let estimate = estimate.max(0.0);
        // remaining error of a geometrically converging sequence is about
        // change / (1 − rate)
        let change = (estimate - last).abs();
        let rate = if prev_change > 0.0 {
            (change / prev_change).min(0.999)
        } else {
            0.0
        };
        if change / (1.0 - rate) <= tol * (1.0 + estimate) {
            stable_steps += 1;
            if stable_steps >= 3 {
                return Ok(estimate);
            }
        } else {
            stable_steps = 0;
        }
        if change.is_finite() {
            prev_change = change;
        }
        last = estimate;
        x = q / qn;
        q = r / qn;
    }
    Err(last)
}

/// Largest root modulus of the two-term recurrence fitted to `x → q → r`,
/// where `x` is a unit vector, `q = Mx` and `r = Mq`.
fn dominant_modulus(x: &DVector<f64>, q: &DVector<f64>, r: &DVector<f64>) -> f64 {
    let g11 = q.dot(q);
    let g12 = q.dot(x);
    let g22 = x.dot(x);
    let det = g11 * g22 - g12 * g12;
    if det <= 1e-8 * g11 * g22 {
        return r.norm() / q.norm();
    }
    let h1 = r.dot(q);
    let h2 = r.dot(x);
    let a = (h1 * g22 - h2 * g12) / det;
    let b = (g11 * h2 - g12 * h1) / det;
    let disc = a * a + 4.0 * b;
    if disc >= 0.0 {
        let s = disc.sqrt();
        ((a + s) / 2.0).abs().max(((a - s) / 2.0).abs())
    } else {
        (-b).sqrt()
    }
}

/// `D^{−1/2} A D^{−1/2}` with `D = diag(A)`; returns the normalized matrix
/// and the diagonal of `D`.
pub fn normalize_unit_diagonal(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if !a.is_square() {
        return Err(Error::ModelShape(format!(
            "normalization needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let d = a.diagonal();
    if let Some((index, &value)) = d.iter().enumerate().find(|(_, &x)| !(x > 0.0)) {
        return Err(Error::NormalizationImpossible { index, value });
    }
    if d.iter().all(|&x| x == 1.0) {
        return Ok((a.clone(), d));
    }
    let s = d.map(|x| 1.0 / x.sqrt());
    let mut norm = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| s[i] * a[(i, j)] * s[j]);
    norm.fill_diagonal(1.0);
    Ok((norm, d))
}
