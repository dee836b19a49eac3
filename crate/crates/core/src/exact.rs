//! Closed-form forward propagation and posterior recovery for `Y = AX + Z`.
//!
//! Everything runs in transformed coordinates `(u, v, w) = (γ^α, βγ^α, δ)`,
//! where scales and skews are linear in `|A|^α` and `sign(A)⊙|A|^α`. The
//! location picks up a shift correction `ξ` that depends on `βγ`.

use std::f64::consts::FRAC_2_PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::linalg::solve_linear;
use crate::linalg::{entrywise_abs_pow, signed_abs_pow, solve_with_stats, LinearSolve};
use crate::model::{LinearStableModel, Side};
use crate::stable::{from_transformed_at, is_alpha_one, skew_scale, skew_tan, StableParams, TransformedParams};

/// How source skews are weighted when propagated through `A`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkewWeighting {
    /// `β_y γ_y^α = (sign(A)⊙|A|^α)(β_x γ_x^α) + β_z γ_z^α`. Matches the
    /// characteristic function of `AX + Z`.
    #[default]
    ScalePower,
    /// `β_y γ_y^α = (sign(A)⊙|A|^α)(β_x γ_x) + β_z γ_z`. Only agrees with
    /// the above when `α = 1` or every `γ = 1`.
    PlainScale,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ForwardOptions {
    pub skew: SkewWeighting,
}

/// Pivot and residual of one of the three posterior solves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub min_pivot: f64,
    pub residual: f64,
    pub rhs_norm: f64,
}

impl SolveStats {
    fn from_solve(s: &LinearSolve, rhs: &DVector<f64>) -> Self {
        Self {
            min_pivot: s.min_pivot,
            residual: s.residual,
            rhs_norm: rhs.amax(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub scale: SolveStats,
    pub skew: SolveStats,
    pub location: SolveStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorResult {
    pub x_given_y: Vec<StableParams>,
    pub solver_stats: SolverStats,
}

fn common_alpha(alpha: f64, rows: &[StableParams]) -> Result<()> {
    for p in rows {
        if p.alpha != alpha && !p.is_point_mass() {
            return Err(Error::AlphaMismatch {
                expected: alpha,
                found: p.alpha,
            });
        }
    }
    Ok(())
}

/// `ξ = s·[c_y − A c_x − c_z]` for α ≠ 1, and for α = 1
/// `ξ = (2/π)[c_y ln γ_y − (A⊙ln|A|) c_x − A(c_x ⊙ ln γ_x) − c_z ln γ_z]`,
/// where `c = βγ`.
pub(crate) struct ShiftTerms<'a> {
    pub alpha: f64,
    pub a: &'a DMatrix<f64>,
    pub c_y: &'a [f64],
    pub g_y: &'a [f64],
    pub c_x: &'a [f64],
    pub g_x: &'a [f64],
    pub c_z: Option<(&'a [f64], &'a [f64])>,
}

/// `c·ln γ`, zero when `c` or `γ` is zero.
pub(crate) fn c_log_gamma(c: f64, g: f64) -> f64 {
    if c == 0.0 || g <= 0.0 {
        0.0
    } else {
        c * g.ln()
    }
}

/// `A_ij ln|A_ij|`, zero on zero entries.
pub(crate) fn a_log_abs(a: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * a.abs().ln()
    }
}

impl ShiftTerms<'_> {
    pub fn compute(&self) -> DVector<f64> {
        let n = self.c_y.len();
        let a = self.a;
        if is_alpha_one(self.alpha) {
            DVector::from_fn(n, |i, _| {
                let mut acc = c_log_gamma(self.c_y[i], self.g_y[i]);
                for j in 0..n {
                    let aij = a[(i, j)];
                    acc -= a_log_abs(aij) * self.c_x[j] + aij * c_log_gamma(self.c_x[j], self.g_x[j]);
                }
                if let Some((c_z, g_z)) = self.c_z {
                    acc -= c_log_gamma(c_z[i], g_z[i]);
                }
                FRAC_2_PI * acc
            })
        } else {
            let t = skew_tan(self.alpha);
            if t == 0.0 {
                return DVector::zeros(n);
            }
            DVector::from_fn(n, |i, _| {
                let mut acc = self.c_y[i];
                for j in 0..n {
                    acc -= a[(i, j)] * self.c_x[j];
                }
                if let Some((c_z, _)) = self.c_z {
                    acc -= c_z[i];
                }
                t * acc
            })
        }
    }
}

/// Observation parameters of `Y = AX + Z` from source parameters.
pub fn forward(
    alpha: f64,
    a: &DMatrix<f64>,
    x: &[StableParams],
    z: Option<&[StableParams]>,
    opts: ForwardOptions,
) -> Result<Vec<StableParams>> {
    let n = x.len();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::ModelShape(format!(
            "A is {}x{} for {n} sources",
            a.nrows(),
            a.ncols()
        )));
    }
    if let Some(z) = z {
        if z.len() != n {
            return Err(Error::ModelShape(format!("{} noise rows for {n} sources", z.len())));
        }
        common_alpha(alpha, z)?;
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("A has non-finite entries".into()));
    }
    common_alpha(alpha, x)?;

    let b = entrywise_abs_pow(a, alpha);
    let s = signed_abs_pow(a, alpha);
    let g_x: Vec<f64> = x.iter().map(|p| p.gamma).collect();
    let c_x: Vec<f64> = x.iter().map(|p| p.beta * p.gamma).collect();
    let u_x = DVector::from_iterator(n, x.iter().map(|p| p.gamma.powf(alpha)));
    let d_x = DVector::from_iterator(n, x.iter().map(|p| p.delta));
    let zero = StableParams {
        alpha,
        beta: 0.0,
        gamma: 0.0,
        delta: 0.0,
    };
    let zs: Vec<StableParams> = z.map(<[_]>::to_vec).unwrap_or_else(|| vec![zero; n]);
    let g_z: Vec<f64> = zs.iter().map(|p| p.gamma).collect();
    let c_z: Vec<f64> = zs.iter().map(|p| p.beta * p.gamma).collect();
    let u_z = DVector::from_iterator(n, zs.iter().map(|p| p.gamma.powf(alpha)));
    let d_z = DVector::from_iterator(n, zs.iter().map(|p| p.delta));

    let u_y = &b * &u_x + &u_z;
    let v_y = match opts.skew {
        SkewWeighting::ScalePower => {
            let v_x = DVector::from_iterator(n, x.iter().map(|p| p.beta * p.gamma.powf(alpha)));
            let v_z = DVector::from_iterator(n, zs.iter().map(|p| p.beta * p.gamma.powf(alpha)));
            &s * v_x + v_z
        }
        SkewWeighting::PlainScale => &s * DVector::from_column_slice(&c_x) + DVector::from_column_slice(&c_z),
    };
    let g_y: Vec<f64> = u_y.iter().map(|&u| u.powf(1.0 / alpha)).collect();
    let beta_y: Vec<f64> = (0..n)
        .map(|i| {
            if u_y[i] > 0.0 {
                (v_y[i] / u_y[i]).clamp(-1.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    let c_y: Vec<f64> = (0..n).map(|i| beta_y[i] * g_y[i]).collect();
    let xi = ShiftTerms {
        alpha,
        a,
        c_y: &c_y,
        g_y: &g_y,
        c_x: &c_x,
        g_x: &g_x,
        c_z: Some((&c_z, &g_z)),
    }
    .compute();
    let d_y = a * d_x + d_z + xi;
    (0..n)
        .map(|i| StableParams::new(alpha, beta_y[i], g_y[i], d_y[i]))
        .collect()
}

/// Forward propagation of an x-side model; returns the y-side model.
pub fn forward_params(model: &LinearStableModel, opts: ForwardOptions) -> Result<LinearStableModel> {
    if model.side() != Side::X {
        return Err(Error::Validation(
            "forward propagation needs a model with x-side parameters".into(),
        ));
    }
    let y = forward(model.alpha(), model.matrix(), model.params(), model.noise(), opts)?;
    model.with_params(Side::Y, y)
}

struct RawPosterior {
    estimates: Vec<TransformedParams>,
    stats: SolverStats,
}

fn solve_posterior(alpha: f64, a: &DMatrix<f64>, y: &[StableParams]) -> Result<RawPosterior> {
    let n = y.len();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::ModelShape(format!(
            "A is {}x{} for {n} observations",
            a.nrows(),
            a.ncols()
        )));
    }
    common_alpha(alpha, y)?;
    let u_y = DVector::from_iterator(n, y.iter().map(|p| p.gamma.powf(alpha)));
    let v_y = DVector::from_iterator(n, y.iter().map(|p| p.beta * p.gamma.powf(alpha)));
    let d_y = DVector::from_iterator(n, y.iter().map(|p| p.delta));
    let g_y: Vec<f64> = y.iter().map(|p| p.gamma).collect();
    let c_y: Vec<f64> = y.iter().map(|p| p.beta * p.gamma).collect();

    // scales, then skews, then the locations that depend on both
    let scale = solve_with_stats(&entrywise_abs_pow(a, alpha), &u_y)?;
    let skew = solve_with_stats(&signed_abs_pow(a, alpha), &v_y)?;
    let u = &scale.x;
    let v = &skew.x;
    let g_x: Vec<f64> = u
        .iter()
        .map(|&u| if u > 0.0 { u.powf(1.0 / alpha) } else { 0.0 })
        .collect();
    let c_x: Vec<f64> = (0..n).map(|i| skew_scale(u[i], v[i], alpha)).collect();
    let xi = ShiftTerms {
        alpha,
        a,
        c_y: &c_y,
        g_y: &g_y,
        c_x: &c_x,
        g_x: &g_x,
        c_z: None,
    }
    .compute();
    let rhs = &d_y - xi;
    let location = solve_with_stats(a, &rhs)?;
    Ok(RawPosterior {
        estimates: (0..n)
            .map(|i| TransformedParams::new(u[i], v[i], location.x[i]))
            .collect(),
        stats: SolverStats {
            scale: SolveStats::from_solve(&scale, &u_y),
            skew: SolveStats::from_solve(&skew, &v_y),
            location: SolveStats::from_solve(&location, &rhs),
        },
    })
}

/// Posterior marginals of `X` given y-side parameters.
pub fn posterior(alpha: f64, a: &DMatrix<f64>, y: &[StableParams]) -> Result<PosteriorResult> {
    let raw = solve_posterior(alpha, a, y)?;
    let x_given_y = raw
        .estimates
        .iter()
        .enumerate()
        .map(|(i, tp)| from_transformed_at(tp, alpha, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorResult {
        x_given_y,
        solver_stats: raw.stats,
    })
}

/// Posterior in transformed coordinates, without checking that each
/// estimate is a valid stable law.
pub fn posterior_transformed(alpha: f64, a: &DMatrix<f64>, y: &[StableParams]) -> Result<Vec<TransformedParams>> {
    solve_posterior(alpha, a, y).map(|r| r.estimates)
}

/// Posterior marginals for a y-side model. Models with noise are rejected.
pub fn posterior_params(model: &LinearStableModel) -> Result<PosteriorResult> {
    if model.side() != Side::Y {
        return Err(Error::Validation(
            "posterior inference needs a model with y-side parameters".into(),
        ));
    }
    if model.noise().is_some() {
        return Err(Error::UnsupportedFeature(
            "posterior inference with a noise term is not supported".into(),
        ));
    }
    posterior(model.alpha(), model.matrix(), model.params())
}
