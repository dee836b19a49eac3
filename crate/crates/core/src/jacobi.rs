//! Stable-Jacobi: synchronous fixed-point iteration for the posterior
//! marginals of `Y = AX`.
//!
//! `A` is first rescaled to a unit diagonal. Each sweep then performs one
//! Jacobi step on the three linear systems for `u = γ^α`, `v = βγ^α` and
//! `w = δ`, with the location shift evaluated from the previous iterate.

use std::f64::consts::FRAC_2_PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{a_log_abs, c_log_gamma};
use crate::linalg::{entrywise_abs_pow, normalize_unit_diagonal, signed_abs_pow};
use crate::model::{LinearStableModel, Side};
use crate::stable::{
    from_transformed_at, is_alpha_one, scale_shift, skew_scale, skew_tan, StableParams, TransformedParams,
};

/// Growth of the residual, relative to the first sweep, treated as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e12;

/// Form of the α = 1 location shift.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftUpdate {
    /// Includes `A(c ⊙ ln γ)`; the fixed point is the exact posterior.
    #[default]
    Consistent,
    /// Drops the `A(c ⊙ ln γ)` term. Its fixed point is biased whenever
    /// some posterior has `β ≠ 0` and `γ ≠ 1`.
    Printed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobiOptions {
    /// Stop once the L∞ change over `(u, v, w)` is at most this.
    pub tol: f64,
    pub max_iter: usize,
    /// `new = (1 − λ)·update + λ·old`.
    pub damping: f64,
    /// Keep a copy of every iterate in the trace.
    pub record_trace: bool,
    pub shift_update: ShiftUpdate,
}

impl Default for JacobiOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 10_000,
            damping: 0.0,
            record_trace: false,
            shift_update: ShiftUpdate::Consistent,
        }
    }
}

impl JacobiOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if !(0.0..=1.0).contains(&self.damping) {
            return Err(Error::InvalidArgument(format!(
                "damping must be in [0, 1], got {}",
                self.damping
            )));
        }
        Ok(())
    }
}

/// Iterate in normalized transformed coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobiState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub iteration: usize,
}

impl JacobiState {
    pub fn zeros(n: usize) -> Self {
        Self {
            u: vec![0.0; n],
            v: vec![0.0; n],
            w: vec![0.0; n],
            iteration: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// Per-block L∞ change of one sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepResidual {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl StepResidual {
    pub fn max(&self) -> f64 {
        self.u.max(self.v).max(self.w)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JacobiTrace {
    pub residual_u: Vec<f64>,
    pub residual_v: Vec<f64>,
    pub residual_w: Vec<f64>,
    /// Iterates after each sweep, when requested.
    pub snapshots: Option<Vec<JacobiState>>,
    pub final_iterations: usize,
    pub converged: bool,
    /// Matrix entries read in a single sweep.
    pub entry_visits_per_sweep: u64,
}

impl JacobiTrace {
    /// Joint L∞ residual of each sweep.
    pub fn residual_inf(&self) -> Vec<f64> {
        (0..self.residual_u.len())
            .map(|k| self.residual_u[k].max(self.residual_v[k]).max(self.residual_w[k]))
            .collect()
    }

    fn push(&mut self, r: StepResidual) {
        self.residual_u.push(r.u);
        self.residual_v.push(r.v);
        self.residual_w.push(r.w);
    }

    pub fn to_csv(&self) -> String {
        use crate::format::sig17;
        let mut out = String::from("iteration,residual_u,residual_v,residual_w\n");
        for k in 0..self.residual_u.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                k + 1,
                sig17(self.residual_u[k]),
                sig17(self.residual_v[k]),
                sig17(self.residual_w[k])
            ));
        }
        out
    }
}

/// A model prepared for iteration: normalized matrices and mapped observations.
#[derive(Clone, Debug)]
pub struct JacobiProblem {
    alpha: f64,
    a: DMatrix<f64>,
    abs_pow: DMatrix<f64>,
    signed_pow: DMatrix<f64>,
    /// `A ⊙ ln|A|`, only needed when α = 1.
    a_log: Option<DMatrix<f64>>,
    diag: Vec<f64>,
    u_y: Vec<f64>,
    v_y: Vec<f64>,
    d_y: Vec<f64>,
    /// Observation part of the shift: `c_y` or `c_y ln γ_y`.
    shift_y: Vec<f64>,
    shift_update: ShiftUpdate,
}

impl JacobiProblem {
    pub fn new(model: &LinearStableModel, shift_update: ShiftUpdate) -> Result<Self> {
        if model.side() != Side::Y {
            return Err(Error::Validation(
                "Stable-Jacobi needs a model with y-side parameters".into(),
            ));
        }
        if model.noise().is_some() {
            return Err(Error::UnsupportedFeature(
                "Stable-Jacobi with a noise term is not supported".into(),
            ));
        }
        let alpha = model.alpha();
        let (a, d) = normalize_unit_diagonal(model.matrix())?;
        let y: Vec<StableParams> = model
            .params()
            .iter()
            .zip(d.iter())
            .map(|(p, &di)| scale_shift(p, 1.0 / di.sqrt(), 0.0))
            .collect::<Result<_>>()?;
        let alpha_one = is_alpha_one(alpha);
        let shift_y = y
            .iter()
            .map(|p| {
                let c = p.beta * p.gamma;
                if alpha_one {
                    c_log_gamma(c, p.gamma)
                } else {
                    c
                }
            })
            .collect();
        Ok(Self {
            alpha,
            abs_pow: entrywise_abs_pow(&a, alpha),
            signed_pow: signed_abs_pow(&a, alpha),
            a_log: alpha_one.then(|| a.map(a_log_abs)),
            a,
            diag: d.iter().copied().collect(),
            u_y: y.iter().map(|p| p.gamma.powf(alpha)).collect(),
            v_y: y.iter().map(|p| p.beta * p.gamma.powf(alpha)).collect(),
            d_y: y.iter().map(|p| p.delta).collect(),
            shift_y,
            shift_update,
        })
    }

    pub fn len(&self) -> usize {
        self.u_y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_y.is_empty()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The unit-diagonal matrix actually iterated on.
    pub fn normalized_matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn init(&self) -> JacobiState {
        JacobiState::zeros(self.len())
    }

    /// One synchronous sweep. The count is the number of matrix entries read.
    pub fn sweep(&self, state: &JacobiState, damping: f64) -> Result<(JacobiState, StepResidual, u64)> {
        let n = self.len();
        if state.len() != n {
            return Err(Error::ModelShape(format!(
                "state has length {}, model has {n} variables",
                state.len()
            )));
        }
        let mut visits = 0u64;
        let mut off_diagonal = |m: &DMatrix<f64>, x: &[f64]| {
            let mut acc = vec![0.0; n];
            for (j, col) in m.column_iter().enumerate() {
                let xj = x[j];
                for (i, &mij) in col.iter().enumerate() {
                    if i != j {
                        acc[i] += mij * xj;
                    }
                }
                visits += n as u64;
            }
            acc
        };
        let su = off_diagonal(&self.abs_pow, &state.u);
        let sv = off_diagonal(&self.signed_pow, &state.v);
        let sw = off_diagonal(&self.a, &state.w);

        let alpha = self.alpha;
        let c: Vec<f64> = (0..n).map(|j| skew_scale(state.u[j], state.v[j], alpha)).collect();
        let mut xi = vec![0.0; n];
        match &self.a_log {
            None => {
                let t = skew_tan(alpha);
                for (j, col) in self.a.column_iter().enumerate() {
                    for (i, &aij) in col.iter().enumerate() {
                        xi[i] += aij * c[j];
                    }
                    visits += n as u64;
                }
                for (x, sy) in xi.iter_mut().zip(&self.shift_y) {
                    *x = t * (sy - *x);
                }
            }
            Some(l) => {
                let with_log = self.shift_update == ShiftUpdate::Consistent;
                let clg: Vec<f64> = (0..n)
                    .map(|j| {
                        let g = if state.u[j] > 0.0 { state.u[j] } else { 0.0 };
                        if with_log {
                            c_log_gamma(c[j], g)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                for j in 0..n {
                    let (lc, ac) = (l.column(j), self.a.column(j));
                    for i in 0..n {
                        xi[i] += lc[i] * c[j] + ac[i] * clg[j];
                    }
                    visits += n as u64;
                }
                for (x, sy) in xi.iter_mut().zip(&self.shift_y) {
                    *x = FRAC_2_PI * (sy - *x);
                }
            }
        }

        let mix = |update: f64, old: f64| {
            if damping == 0.0 {
                update
            } else {
                (1.0 - damping) * update + damping * old
            }
        };
        let mut next = JacobiState::zeros(n);
        let mut res = StepResidual::default();
        for i in 0..n {
            next.u[i] = mix(self.u_y[i] - su[i], state.u[i]);
            next.v[i] = mix(self.v_y[i] - sv[i], state.v[i]);
            next.w[i] = mix(self.d_y[i] - sw[i] - xi[i], state.w[i]);
            res.u = res.u.max((next.u[i] - state.u[i]).abs());
            res.v = res.v.max((next.v[i] - state.v[i]).abs());
            res.w = res.w.max((next.w[i] - state.w[i]).abs());
        }
        next.iteration = state.iteration + 1;
        if !res.max().is_finite() {
            return Err(Error::Divergence {
                iteration: next.iteration,
            });
        }
        Ok((next, res, visits))
    }

    /// Converts a state back to parameters of the original, unnormalized `X`.
    pub fn finish(&self, state: &JacobiState) -> Result<Vec<StableParams>> {
        (0..self.len())
            .map(|i| {
                let tp = TransformedParams::new(state.u[i], state.v[i], state.w[i]);
                let p = from_transformed_at(&tp, self.alpha, i)?;
                scale_shift(&p, 1.0 / self.diag[i].sqrt(), 0.0)
            })
            .collect()
    }
}

/// Prepares a model and returns the all-zero starting state.
pub fn jacobi_init(model: &LinearStableModel) -> Result<(JacobiProblem, JacobiState)> {
    let problem = JacobiProblem::new(model, ShiftUpdate::default())?;
    let state = problem.init();
    Ok((problem, state))
}

pub fn jacobi_step(problem: &JacobiProblem, state: &JacobiState, damping: f64) -> Result<JacobiState> {
    problem.sweep(state, damping).map(|(s, _, _)| s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobiResult {
    pub x_given_y: Vec<StableParams>,
    pub trace: JacobiTrace,
}

/// Iterates from zero until the joint residual drops to `tol`.
pub fn jacobi_run(model: &LinearStableModel, opts: &JacobiOptions) -> Result<JacobiResult> {
    opts.validate()?;
    let problem = JacobiProblem::new(model, opts.shift_update)?;
    let mut state = problem.init();
    let mut trace = JacobiTrace {
        snapshots: opts.record_trace.then(Vec::new),
        ..JacobiTrace::default()
    };
    let mut first = None;
    for _ in 0..opts.max_iter {
        let (next, res, visits) = problem.sweep(&state, opts.damping)?;
        state = next;
        trace.push(res);
        trace.entry_visits_per_sweep = visits;
        trace.final_iterations = state.iteration;
        if let Some(snaps) = trace.snapshots.as_mut() {
            snaps.push(state.clone());
        }
        let r = res.max();
        let r0 = *first.get_or_insert(r);
        if r > DIVERGENCE_FACTOR * r0 {
            return Err(Error::Divergence {
                iteration: state.iteration,
            });
        }
        if r <= opts.tol {
            trace.converged = true;
            log::debug!("Stable-Jacobi converged after {} sweeps", state.iteration);
            let x_given_y = problem.finish(&state)?;
            return Ok(JacobiResult { x_given_y, trace });
        }
    }
    let residual = trace.residual_inf().last().copied().unwrap_or(f64::NAN);
    Err(Error::NotConverged {
        iterations: trace.final_iterations,
        residual,
        trace: Box::new(trace),
    })
}
