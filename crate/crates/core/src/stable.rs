//! Closed-form parameter arithmetic for the stable family.
//!
//! Parameters follow the 0-parameterization: `X ~ S(α, β, γ, δ)` means
//! `X = γ(Z − β tan(πα/2)) + δ` for α ≠ 1 and `X = γZ + δ` for α = 1, where
//! `Z` is the standardized variable of [`cf_eval_standard`]. In this
//! parameterization both the scalar affine map and the summation rule are
//! exact in the characteristic-function domain.

use std::f64::consts::{FRAC_2_PI, PI};

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ComplexValue = Complex<f64>;

/// `|α − 1|` below this selects the α = 1 branch.
pub const ALPHA_ONE_TOL: f64 = 1e-12;

/// Slack on `|v/u| ≤ 1` when converting back from transformed coordinates.
pub const SKEW_TOL: f64 = 1e-9;

pub fn is_alpha_one(alpha: f64) -> bool {
    (alpha - 1.0).abs() < ALPHA_ONE_TOL
}

/// `tan(πα/2)`, the α ≠ 1 skew coupling constant.
pub fn skew_tan(alpha: f64) -> f64 {
    if alpha == 2.0 {
        // tan(π) is not exactly zero in floating point.
        0.0
    } else {
        (PI * alpha / 2.0).tan()
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `x·ln x` with the `0·ln 0 = 0` convention.
pub(crate) fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// The four-parameter stable law S(α, β, γ, δ).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl StableParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, delta: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            gamma,
            delta,
        };
        p.validate()?;
        if alpha > 0.99 && alpha < 1.01 && !is_alpha_one(alpha) {
            log::warn!("alpha = {alpha} is close to 1: tan(pi*alpha/2) is ill-conditioned");
        }
        Ok(p)
    }

    /// Deterministic value `delta`, written S(α, 0, 0, δ).
    pub fn point_mass(alpha: f64, delta: f64) -> Result<Self> {
        Self::new(alpha, 0.0, 0.0, delta)
    }

    pub fn validate(&self) -> Result<()> {
        let Self {
            alpha,
            beta,
            gamma,
            delta,
        } = *self;
        if !(alpha.is_finite() && beta.is_finite() && gamma.is_finite() && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite stable parameters {self:?}")));
        }
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::InvalidArgument(format!("alpha = {alpha} outside (0, 2]")));
        }
        if beta.abs() > 1.0 {
            return Err(Error::InvalidArgument(format!("beta = {beta} outside [-1, 1]")));
        }
        if gamma < 0.0 {
            return Err(Error::InvalidArgument(format!("gamma = {gamma} is negative")));
        }
        Ok(())
    }

    pub fn is_point_mass(&self) -> bool {
        self.gamma == 0.0
    }

    /// Characteristic function `E[exp(itX)]`.
    pub fn cf(&self, t: f64) -> ComplexValue {
        cf_eval(self, t)
    }

    pub fn scale_shift(&self, a: f64, b: f64) -> Result<Self> {
        scale_shift(self, a, b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        add(self, other)
    }

    pub fn to_transformed(&self) -> TransformedParams {
        to_transformed(self)
    }
}

/// Linearized coordinates `(u, v, w) = (γ^α, β·γ^α, δ)`.
///
/// All matrix equations of the inference routines are affine in these.
/// `u` may go negative while an iterative solver is in flight.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TransformedParams {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl TransformedParams {
    pub fn new(u: f64, v: f64, w: f64) -> Self {
        Self { u, v, w }
    }

    pub fn is_physical(&self) -> bool {
        if self.u == 0.0 {
            self.v == 0.0
        } else {
            self.u > 0.0 && (self.v / self.u).abs() <= 1.0 + SKEW_TOL
        }
    }
}

/// `N(μ, σ²) = S(2, 0, σ/√2, μ)`.
pub fn make_gaussian(mu: f64, sigma: f64) -> Result<StableParams> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Gaussian sigma must be positive and finite, got {sigma}"
        )));
    }
    StableParams::new(2.0, 0.0, sigma / 2f64.sqrt(), mu)
}

/// `Cauchy(γ, δ) = S(1, 0, γ, δ)`.
pub fn make_cauchy(gamma: f64, delta: f64) -> Result<StableParams> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Cauchy gamma must be positive, got {gamma}"
        )));
    }
    StableParams::new(1.0, 0.0, gamma, delta)
}

/// `S(1/2, 1, γ, δ)`.
///
/// In the 0-parameterization this is a Lévy law whose support starts at
/// `δ − γ`; its density is `√(γ/2π)·exp(−γ/(2(x−δ+γ)))/(x−δ+γ)^{3/2}`.
pub fn make_levy(gamma: f64, delta: f64) -> Result<StableParams> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Levy gamma must be positive, got {gamma}"
        )));
    }
    StableParams::new(0.5, 1.0, gamma, delta)
}

/// Law of `aX + b` for `X ~ p`.
pub fn scale_shift(p: &StableParams, a: f64, b: f64) -> Result<StableParams> {
    if a == 0.0 || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "scale_shift needs finite a != 0 and finite b, got a = {a}, b = {b}"
        )));
    }
    Ok(StableParams {
        alpha: p.alpha,
        beta: sign(a) * p.beta,
        gamma: a.abs() * p.gamma,
        delta: a * p.delta + b,
    })
}

/// Law of `X₁ + X₂` for independent `X₁ ~ p1`, `X₂ ~ p2`.
///
/// A zero-scale operand is a point mass and only shifts the other one, even
/// when its nominal α differs.
pub fn add(p1: &StableParams, p2: &StableParams) -> Result<StableParams> {
    if p1.is_point_mass() {
        return Ok(StableParams {
            delta: p1.delta + p2.delta,
            ..*p2
        });
    }
    if p2.is_point_mass() {
        return Ok(StableParams {
            delta: p1.delta + p2.delta,
            ..*p1
        });
    }
    if p1.alpha != p2.alpha {
        return Err(Error::AlphaMismatch {
            expected: p1.alpha,
            found: p2.alpha,
        });
    }
    let alpha = p1.alpha;
    let u1 = p1.gamma.powf(alpha);
    let u2 = p2.gamma.powf(alpha);
    let u = u1 + u2;
    let beta = ((p1.beta * u1 + p2.beta * u2) / u).clamp(-1.0, 1.0);
    let gamma = u.powf(1.0 / alpha);
    let xi = if is_alpha_one(alpha) {
        FRAC_2_PI * (beta * xlogx(gamma) - p1.beta * xlogx(p1.gamma) - p2.beta * xlogx(p2.gamma))
    } else {
        skew_tan(alpha) * (beta * gamma - p1.beta * p1.gamma - p2.beta * p2.gamma)
    };
    Ok(StableParams {
        alpha,
        beta,
        gamma,
        delta: p1.delta + p2.delta + xi,
    })
}

/// Characteristic function of S(α, β, γ, δ) at `t`.
pub fn cf_eval(p: &StableParams, t: f64) -> ComplexValue {
    if t == 0.0 {
        return Complex::new(1.0, 0.0);
    }
    let phase = Complex::new(0.0, p.delta * t);
    if p.gamma == 0.0 {
        return phase.exp();
    }
    let s = p.gamma * t.abs();
    let sgn = sign(t);
    let exponent = if is_alpha_one(p.alpha) {
        Complex::new(-s, -p.beta * FRAC_2_PI * sgn * xlogx(s))
    } else {
        let sa = s.powf(p.alpha);
        Complex::new(-sa, p.beta * skew_tan(p.alpha) * sgn * (sa - s))
    };
    (exponent + phase).exp()
}

/// Characteristic function of the standardized variable `Z`:
/// `exp(−|t|^α[1 − iβ tan(πα/2) sign t])` for α ≠ 1 and
/// `exp(−|t|[1 + iβ (2/π) sign t log|t|])` for α = 1.
pub fn cf_eval_standard(alpha: f64, beta: f64, t: f64) -> Result<ComplexValue> {
    if !(alpha > 0.0 && alpha <= 2.0) || !(beta.abs() <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "standard cf needs 0 < alpha <= 2 and |beta| <= 1, got alpha = {alpha}, beta = {beta}"
        )));
    }
    if t == 0.0 {
        return Ok(Complex::new(1.0, 0.0));
    }
    let at = t.abs();
    let exponent = if is_alpha_one(alpha) {
        Complex::new(-at, -beta * FRAC_2_PI * sign(t) * xlogx(at))
    } else {
        let ta = at.powf(alpha);
        Complex::new(-ta, ta * beta * skew_tan(alpha) * sign(t))
    };
    Ok(exponent.exp())
}

pub fn to_transformed(p: &StableParams) -> TransformedParams {
    let u = p.gamma.powf(p.alpha);
    TransformedParams {
        u,
        v: p.beta * u,
        w: p.delta,
    }
}

/// Inverse of [`to_transformed`]; `|v/u|` is clamped to 1 after the
/// [`SKEW_TOL`] check.
pub fn from_transformed(tp: &TransformedParams, alpha: f64) -> Result<StableParams> {
    from_transformed_at(tp, alpha, 0)
}

pub(crate) fn from_transformed_at(tp: &TransformedParams, alpha: f64, index: usize) -> Result<StableParams> {
    if !(tp.u.is_finite() && tp.v.is_finite() && tp.w.is_finite()) {
        return Err(Error::NonphysicalScale { index, value: tp.u });
    }
    if tp.u < 0.0 {
        return Err(Error::NonphysicalScale { index, value: tp.u });
    }
    let beta = if tp.u == 0.0 {
        if tp.v != 0.0 {
            return Err(Error::NonphysicalSkew {
                index,
                value: tp.v.signum() * f64::INFINITY,
            });
        }
        0.0
    } else {
        let beta = tp.v / tp.u;
        if beta.abs() > 1.0 + SKEW_TOL {
            return Err(Error::NonphysicalSkew { index, value: beta });
        }
        beta.clamp(-1.0, 1.0)
    };
    StableParams::new(alpha, beta, tp.u.powf(1.0 / alpha), tp.w)
}

/// `β·γ` recovered from transformed coordinates, zero for non-positive `u`.
pub(crate) fn skew_scale(u: f64, v: f64, alpha: f64) -> f64 {
    if u > 0.0 {
        v * u.powf((1.0 - alpha) / alpha)
    } else {
        0.0
    }
}

impl StableParams {
    /// One row of the bulk CSV format `alpha,beta,gamma,delta`.
    pub fn to_csv_row(&self) -> String {
        use crate::format::sig17;
        format!(
            "{},{},{},{}",
            sig17(self.alpha),
            sig17(self.beta),
            sig17(self.gamma),
            sig17(self.delta)
        )
    }

    pub fn from_csv_row(row: &str) -> Result<Self> {
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!(
                "expected 4 columns alpha,beta,gamma,delta, got {}",
                fields.len()
            )));
        }
        let mut vals = [0.0; 4];
        for (slot, field) in vals.iter_mut().zip(&fields) {
            *slot = field
                .parse()
                .map_err(|_| Error::Parse(format!("not a number: {field:?}")))?;
        }
        Self::new(vals[0], vals[1], vals[2], vals[3])
    }
}
