//! Brute-force characteristic-function checks of the closed-form algebra.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{forward, posterior, ForwardOptions};
use crate::linalg::LuFactor;
use crate::stable::{add, cf_eval, ComplexValue, StableParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub max_abs_err: f64,
    /// Frequency at which the largest deviation occurred.
    pub argmax: f64,
    pub grid_spec: String,
}

impl OracleReport {
    fn new(grid_spec: impl Into<String>) -> Self {
        Self {
            max_abs_err: 0.0,
            argmax: 0.0,
            grid_spec: grid_spec.into(),
        }
    }

    fn record(&mut self, t: f64, err: f64) {
        if err > self.max_abs_err || err.is_nan() {
            self.max_abs_err = err;
            self.argmax = t;
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// `t_k = start + k·step`, `k = 0..=count`.
fn grid(start: f64, step: f64, count: usize) -> impl Iterator<Item = f64> + Clone {
    (0..=count).map(move |k| start + k as f64 * step)
}

/// Compares `cf(p1 ⊕ p2)` with `cf(p1)·cf(p2)` on `t ∈ [−10, 10]`, step 0.05.
pub fn convolution_oracle(p1: &StableParams, p2: &StableParams) -> Result<OracleReport> {
    if p1.alpha != p2.alpha {
        return Err(Error::AlphaMismatch {
            expected: p1.alpha,
            found: p2.alpha,
        });
    }
    if p1.is_point_mass() || p2.is_point_mass() {
        return Err(Error::InvalidArgument(
            "convolution oracle needs both scales positive".into(),
        ));
    }
    let sum = add(p1, p2)?;
    let mut report = OracleReport::new("t = -10 + 0.05k, k = 0..=400");
    for t in grid(-10.0, 0.05, 400) {
        let err = (cf_eval(&sum, t) - cf_eval(p1, t) * cf_eval(p2, t)).norm();
        report.record(t, err);
    }
    Ok(report)
}

/// Joint characteristic function of `(X, Y = AX)` for independent `X_j`:
/// `Φ(t, s) = Π_j φ_j(t_j + (Aᵀs)_j)`.
pub fn joint_cf(a: &DMatrix<f64>, x: &[StableParams], t: &[f64], s: &[f64]) -> ComplexValue {
    let mut out = ComplexValue::new(1.0, 0.0);
    for (j, xj) in x.iter().enumerate() {
        let mut arg = t[j];
        for (i, si) in s.iter().enumerate() {
            arg += a[(i, j)] * si;
        }
        out *= cf_eval(xj, arg);
    }
    out
}

/// Tabulates the joint cf of a two-variable model on `[−5, 5]²` (step 0.05)
/// in the `x` plane and in the `y` plane, and compares the axis slices with
/// the closed-form forward and posterior parameters.
pub fn slicing_oracle_2var(alpha: f64, a: &DMatrix<f64>, x: &[StableParams; 2]) -> Result<OracleReport> {
    if a.nrows() != 2 || a.ncols() != 2 {
        return Err(Error::ModelShape(format!(
            "expected a 2x2 matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    LuFactor::new(a)?;
    let y = forward(alpha, a, x, None, ForwardOptions::default())?;
    let post = posterior(alpha, a, &y)?.x_given_y;

    let axis: Vec<f64> = grid(-5.0, 0.05, 200).collect();
    let m = axis.len();
    let zero = [0.0, 0.0];
    let x_plane = DMatrix::from_fn(m, m, |p, q| joint_cf(a, x, &[axis[p], axis[q]], &zero));
    let y_plane = DMatrix::from_fn(m, m, |p, q| joint_cf(a, x, &zero, &[axis[p], axis[q]]));
    let origin = m / 2;
    debug_assert_eq!(axis[origin], 0.0);

    let mut report = OracleReport::new("t = -5 + 0.05k, k = 0..=200, per axis of x and y planes");
    for (k, &t) in axis.iter().enumerate() {
        let slices = [
            (x_plane[(k, origin)], &post[0]),
            (x_plane[(origin, k)], &post[1]),
            (y_plane[(k, origin)], &y[0]),
            (y_plane[(origin, k)], &y[1]),
        ];
        for (sliced, closed) in slices {
            report.record(t, (sliced - cf_eval(closed, t)).norm());
        }
    }
    Ok(report)
}
