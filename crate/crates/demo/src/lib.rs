//! Browser bindings for the demo page in `www/`.
//!
//! The plain functions are what the tests exercise; the `*_js` wrappers only
//! convert errors for JavaScript.

use stablecf::jacobi::jacobi_init;
use stablecf::{add, forward, pdf_from_cf, DMatrix, ForwardOptions, LinearStableModel, Side, StableParams};
use wasm_bindgen::prelude::*;

type DemoResult<T> = Result<T, String>;

/// Largest sweep count shown in the trace view.
pub const TRACE_SWEEPS: usize = 150;

fn params(alpha: f64, beta: f64, gamma: f64, delta: f64) -> DemoResult<StableParams> {
    StableParams::new(alpha, beta, gamma, delta).map_err(|e| e.to_string())
}

/// Density values at `x_k = x_min + k (x_max − x_min) / n`, `k < n`.
pub fn density_curve(
    alpha: f64,
    beta: f64,
    gamma: f64,
    delta: f64,
    x_min: f64,
    x_max: f64,
    n: usize,
) -> DemoResult<Vec<f64>> {
    let p = params(alpha, beta, gamma, delta)?;
    pdf_from_cf(&p, x_min, x_max, n)
        .map(|g| g.values)
        .map_err(|e| e.to_string())
}

/// `[alpha, beta, gamma, delta]` of `X1 + X2`.
pub fn sum_params(a: [f64; 4], b: [f64; 4]) -> DemoResult<[f64; 4]> {
    let p = params(a[0], a[1], a[2], a[3])?;
    let q = params(b[0], b[1], b[2], b[3])?;
    let s = add(&p, &q).map_err(|e| e.to_string())?;
    Ok([s.alpha, s.beta, s.gamma, s.delta])
}

/// `I + s (A₃ − I)`: `s = 1` is the published 3-user channel, `s = 0`
/// decouples the users.
pub fn scaled_cdma(s: f64) -> DMatrix<f64> {
    let a3 = DMatrix::from_row_slice(3, 3, &[7.0, -1.0, 3.0, -1.0, 7.0, 5.0, 3.0, -5.0, 7.0]) / 7.0;
    let id = DMatrix::identity(3, 3);
    &id + (a3 - &id) * s
}

#[wasm_bindgen]
#[derive(Clone, Debug, PartialEq)]
pub struct JacobiTraceView {
    rho_r: f64,
    rho_abs_r_alpha: f64,
    residuals: Vec<f64>,
    converged: bool,
}

#[wasm_bindgen]
impl JacobiTraceView {
    #[wasm_bindgen(getter)]
    pub fn rho_r(&self) -> f64 {
        self.rho_r
    }

    #[wasm_bindgen(getter)]
    pub fn rho_abs_r_alpha(&self) -> f64 {
        self.rho_abs_r_alpha
    }

    #[wasm_bindgen(getter)]
    pub fn residuals(&self) -> Vec<f64> {
        self.residuals.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn converged(&self) -> bool {
        self.converged
    }
}

/// Residual per sweep on the scaled channel at exponent `alpha`. Stops at
/// `1e-12` or on blow-up, at most [`TRACE_SWEEPS`] sweeps.
pub fn jacobi_trace(coupling: f64, alpha: f64) -> DemoResult<JacobiTraceView> {
    let a = scaled_cdma(coupling);
    let beta = if alpha == 2.0 { 0.0 } else { 0.5 };
    let x = vec![
        params(alpha, beta, 1.0, 1.0)?,
        params(alpha, 0.0, 1.5, -2.0)?,
        params(alpha, -beta, 0.8, 0.5)?,
    ];
    let err = |e: stablecf::Error| e.to_string();
    let y = forward(alpha, &a, &x, None, ForwardOptions::default()).map_err(err)?;
    let model = LinearStableModel::new(a, Side::Y, y, None, None).map_err(err)?;
    let report = stablecf::check_convergence_conditions(&model).map_err(err)?;
    let (problem, mut state) = jacobi_init(&model).map_err(err)?;
    let mut residuals = Vec::new();
    let mut converged = false;
    for _ in 0..TRACE_SWEEPS {
        let (next, res, _) = problem.sweep(&state, 0.0).map_err(err)?;
        let r = res.max();
        residuals.push(r);
        if !r.is_finite() || r > 1e12 {
            break;
        }
        if r <= 1e-12 {
            converged = true;
            break;
        }
        state = next;
    }
    Ok(JacobiTraceView {
        rho_r: report.rho_r,
        rho_abs_r_alpha: report.rho_abs_r_alpha,
        residuals,
        converged,
    })
}

#[wasm_bindgen(js_name = densityCurve)]
pub fn density_curve_js(
    alpha: f64,
    beta: f64,
    gamma: f64,
    delta: f64,
    x_min: f64,
    x_max: f64,
    n: usize,
) -> Result<Vec<f64>, JsError> {
    density_curve(alpha, beta, gamma, delta, x_min, x_max, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = sumParams)]
pub fn sum_params_js(a: Vec<f64>, b: Vec<f64>) -> Result<Vec<f64>, JsError> {
    let four = |v: Vec<f64>| -> Result<[f64; 4], JsError> {
        v.try_into()
            .map_err(|_| JsError::new("expected [alpha, beta, gamma, delta]"))
    };
    sum_params(four(a)?, four(b)?)
        .map(Vec::from)
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = jacobiTrace)]
pub fn jacobi_trace_js(coupling: f64, alpha: f64) -> Result<JacobiTraceView, JsError> {
    jacobi_trace(coupling, alpha).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_matches_cauchy() {
        let v = density_curve(1.0, 0.0, 1.0, 0.0, -8.0, 8.0, 256).unwrap();
        assert_eq!(v.len(), 256);
        assert!((v[128] - std::f64::consts::FRAC_1_PI).abs() < 1e-6);
    }

    #[test]
    fn bad_parameters_are_reported() {
        assert!(density_curve(2.5, 0.0, 1.0, 0.0, -1.0, 1.0, 64).is_err());
        assert!(sum_params([1.5, 0.0, 1.0, 0.0], [1.0, 0.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn skewed_cauchy_sum() {
        let s = sum_params([1.0, 1.0, 1.0, 0.0], [1.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(s[..3], [1.0, 1.0, 2.0]);
        assert!((s[3] - 4.0 * 2f64.ln() / std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn trace_converges_at_published_coupling() {
        let t = jacobi_trace(1.0, 1.5).unwrap();
        assert!(t.converged());
        assert!((t.rho_abs_r_alpha() - 0.6875).abs() < 1e-3);
        assert!(t.residuals().len() < TRACE_SWEEPS);
    }

    #[test]
    fn decoupled_channel_converges_immediately() {
        let t = jacobi_trace(0.0, 1.0).unwrap();
        assert!(t.converged());
        assert_eq!(t.rho_r(), 0.0);
        assert!(t.residuals().len() <= 3);
    }

    #[test]
    fn strong_coupling_stalls_or_blows_up() {
        let t = jacobi_trace(2.0, 1.5).unwrap();
        assert!(!t.converged());
        assert!(t.rho_abs_r_alpha() > 1.0);
    }
}
