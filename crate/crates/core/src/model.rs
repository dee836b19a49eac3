//! The linear stable model `Y = AX (+ Z)` and its on-disk form.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{entrywise_abs_pow, normalize_unit_diagonal, spectral_radius};
use crate::stable::StableParams;

/// Which side of `Y = AX` the model's parameters describe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Source parameters; used for forward propagation.
    X,
    /// Observation parameters; used for inference.
    Y,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearStableModel {
    alpha: f64,
    a: DMatrix<f64>,
    side: Side,
    params: Vec<StableParams>,
    noise: Option<Vec<StableParams>>,
    labels: Vec<String>,
}

impl LinearStableModel {
    pub fn new(
        a: DMatrix<f64>,
        side: Side,
        params: Vec<StableParams>,
        noise: Option<Vec<StableParams>>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let alpha = params
            .first()
            .map(|p| p.alpha)
            .ok_or_else(|| Error::Validation("model needs at least one variable".into()))?;
        let n = params.len();
        let labels = labels.unwrap_or_else(|| (0..n).map(|i| format!("x{i}")).collect());
        let model = Self {
            alpha,
            a,
            side,
            params,
            noise,
            labels,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let n = self.params.len();
        if n == 0 {
            return Err(Error::Validation("model needs at least one variable".into()));
        }
        if self.a.nrows() != n || self.a.ncols() != n {
            return Err(Error::ModelShape(format!(
                "A is {}x{} but there are {n} parameter rows",
                self.a.nrows(),
                self.a.ncols()
            )));
        }
        if self.labels.len() != n {
            return Err(Error::ModelShape(format!(
                "{} labels for {n} variables",
                self.labels.len()
            )));
        }
        if let Some((i, j)) = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .find(|&(i, j)| !self.a[(i, j)].is_finite())
        {
            return Err(Error::Validation(format!("A[{i}][{j}] is not finite")));
        }
        for i in 0..n {
            if self.a.row(i).iter().all(|&x| x == 0.0) {
                return Err(Error::Validation(format!("row {i} of A is all zero")));
            }
            if self.a.column(i).iter().all(|&x| x == 0.0) {
                return Err(Error::Validation(format!("column {i} of A is all zero")));
            }
        }
        let check = |what: &str, rows: &[StableParams]| -> Result<()> {
            for (i, p) in rows.iter().enumerate() {
                p.validate()
                    .map_err(|e| Error::Validation(format!("{what} row {i}: {e}")))?;
                if p.alpha != self.alpha {
                    return Err(Error::Validation(format!(
                        "{what} row {i}: alpha {} differs from model alpha {}",
                        p.alpha, self.alpha
                    )));
                }
            }
            Ok(())
        };
        check("params", &self.params)?;
        if let Some(noise) = &self.noise {
            if noise.len() != n {
                return Err(Error::ModelShape(format!(
                    "{} noise rows for {n} variables",
                    noise.len()
                )));
            }
            check("noise", noise)?;
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn params(&self) -> &[StableParams] {
        &self.params
    }

    pub fn noise(&self) -> Option<&[StableParams]> {
        self.noise.as_deref()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Same matrix and labels, different parameter side.
    pub fn with_params(&self, side: Side, params: Vec<StableParams>) -> Result<Self> {
        Self::new(self.a.clone(), side, params, None, Some(self.labels.clone()))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("model file line {} column {}: {e}", e.line(), e.column())))?;
        file.into_model()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&ModelFile::from_model(self)).expect("model file serialization cannot fail")
    }
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LinearStableModel> {
    let text = std::fs::read_to_string(path)?;
    LinearStableModel::from_json_str(&text)
}

pub fn save_model(model: &LinearStableModel, path: impl AsRef<Path>) -> Result<()> {
    let mut text = model.to_json_string();
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// On-disk JSON schema. Parameter rows are `[beta, gamma, delta]`, or
/// `[alpha, beta, gamma, delta]` when the row repeats the model alpha.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    side: Side,
    params: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    noise: Option<Vec<Vec<f64>>>,
}

impl ModelFile {
    fn from_model(model: &LinearStableModel) -> Self {
        let rows = |ps: &[StableParams]| ps.iter().map(|p| vec![p.beta, p.gamma, p.delta]).collect();
        Self {
            alpha: model.alpha,
            labels: Some(model.labels.clone()),
            a: model.a.row_iter().map(|r| r.iter().copied().collect()).collect(),
            side: model.side,
            params: rows(&model.params),
            noise: model.noise.as_deref().map(rows),
        }
    }

    fn into_model(self) -> Result<LinearStableModel> {
        let n = self.a.len();
        if n == 0 {
            return Err(Error::Parse("\"A\" has no rows".into()));
        }
        for (i, row) in self.a.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Parse(format!(
                    "\"A\" row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
        }
        let a = DMatrix::from_fn(n, n, |i, j| self.a[i][j]);
        let alpha = self.alpha;
        let params = parse_rows("params", &self.params, n, alpha)?;
        let noise = self
            .noise
            .as_ref()
            .map(|rows| parse_rows("noise", rows, n, alpha))
            .transpose()?;
        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return Err(Error::Parse(format!(
                    "\"labels\" has {} entries, expected {n}",
                    labels.len()
                )));
            }
        }
        LinearStableModel::new(a, self.side, params, noise, self.labels)
    }
}

fn parse_rows(what: &str, rows: &[Vec<f64>], n: usize, alpha: f64) -> Result<Vec<StableParams>> {
    if rows.len() < n {
        return Err(Error::Parse(format!(
            "\"{what}\" is missing row {} ({} rows for {n} variables)",
            rows.len(),
            rows.len()
        )));
    }
    if rows.len() > n {
        return Err(Error::Parse(format!(
            "\"{what}\" has {} rows for {n} variables",
            rows.len()
        )));
    }
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let (row_alpha, rest) = match row.len() {
                3 => (alpha, &row[..]),
                4 => (row[0], &row[1..]),
                len => {
                    return Err(Error::Parse(format!(
                        "\"{what}\" row {i} has {len} entries, expected [beta, gamma, delta]"
                    )))
                }
            };
            if row_alpha != alpha {
                return Err(Error::Validation(format!(
                    "\"{what}\" row {i}: alpha {row_alpha} differs from header alpha {alpha}"
                )));
            }
            StableParams::new(alpha, rest[0], rest[1], rest[2])
                .map_err(|e| Error::Validation(format!("\"{what}\" row {i}: {e}")))
        })
        .collect()
}

/// Spectral diagnostics for the Stable-Jacobi sufficient conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// `ρ(R)` with `R = I − A` (after normalization).
    pub rho_r: f64,
    /// `ρ(|R|)`, the Gaussian walk-summability radius.
    pub rho_abs_r: f64,
    /// `ρ(|R|^α)`.
    pub rho_abs_r_alpha: f64,
    /// `ρ(|R|^α) < 1`.
    pub condition1_holds: bool,
    /// `ρ(R) < 1`.
    pub condition2_holds: bool,
    /// Whether `A` had to be rescaled to a unit diagonal first.
    pub normalized: bool,
}

impl ConvergenceReport {
    pub fn both_hold(&self) -> bool {
        self.condition1_holds && self.condition2_holds
    }
}

/// Computes `ρ(R)` and `ρ(|R|^α)` for `R = I − D^{−1/2} A D^{−1/2}`.
pub fn check_convergence_conditions(model: &LinearStableModel) -> Result<ConvergenceReport> {
    convergence_report(model.matrix(), model.alpha())
}

pub fn convergence_report(a: &DMatrix<f64>, alpha: f64) -> Result<ConvergenceReport> {
    let (a_norm, d) = normalize_unit_diagonal(a)?;
    let normalized = d.iter().any(|&x| x != 1.0);
    let n = a_norm.nrows();
    let r = DMatrix::identity(n, n) - a_norm;
    let rho_r = spectral_radius(&r)?;
    let rho_abs_r = spectral_radius(&r.abs())?;
    let rho_abs_r_alpha = spectral_radius(&entrywise_abs_pow(&r, alpha))?;
    Ok(ConvergenceReport {
        rho_r,
        rho_abs_r,
        rho_abs_r_alpha,
        condition1_holds: rho_abs_r_alpha < 1.0,
        condition2_holds: rho_r < 1.0,
        normalized,
    })
}

/// Neighbor lists: `N(i) = { j ≠ i : A_ij ≠ 0 or A_ji ≠ 0 }`, ascending.
pub fn build_graph(a: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = a.nrows().min(a.ncols());
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && (a[(i, j)] != 0.0 || a[(j, i)] != 0.0))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn a3() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[7.0, -1.0, 3.0, -1.0, 7.0, 5.0, 3.0, -5.0, 7.0]) / 7.0
    }

    fn y_params(alpha: f64, n: usize) -> Vec<StableParams> {
        (0..n)
            .map(|i| StableParams::new(alpha, 0.1 * i as f64, 1.0 + i as f64, -0.5 * i as f64).unwrap())
            .collect()
    }

    #[test]
    fn cdma_conditions() {
        let model = LinearStableModel::new(a3(), Side::Y, y_params(1.5, 3), None, None).unwrap();
        let report = check_convergence_conditions(&model).unwrap();
        assert!((report.rho_abs_r_alpha - 0.6875).abs() < 1e-3);
        assert!(report.both_hold());
        assert!(!report.normalized);
        let abs_r = (DMatrix::identity(3, 3) - a3()).abs();
        assert!((spectral_radius(&abs_r).unwrap() - 0.9008).abs() < 1e-3);
    }

    #[test]
    fn identity_conditions() {
        for alpha in [0.5, 1.0, 2.0] {
            let model =
                LinearStableModel::new(DMatrix::identity(4, 4), Side::Y, y_params(alpha, 4), None, None).unwrap();
            let report = check_convergence_conditions(&model).unwrap();
            assert_eq!(report.rho_r, 0.0);
            assert_eq!(report.rho_abs_r_alpha, 0.0);
            assert!(report.both_hold());
        }
    }

    #[test]
    fn strong_coupling_fails_condition1() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let report = convergence_report(&a, 2.0).unwrap();
        assert!((report.rho_abs_r_alpha - 4.0).abs() < 1e-6);
        assert!(!report.condition1_holds);
    }

    #[test]
    fn conditions_normalize_first() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 4.0]);
        let report = convergence_report(&a, 2.0).unwrap();
        assert!(report.normalized);
        assert!((report.rho_r - 0.5).abs() < 1e-6);
        assert!((report.rho_abs_r_alpha - 0.25).abs() < 1e-6);
    }

    #[test]
    fn graph_examples() {
        assert!(build_graph(&DMatrix::identity(3, 3)).iter().all(|n| n.is_empty()));
        assert_eq!(build_graph(&a3()), vec![vec![1, 2], vec![0, 2], vec![0, 1]]);
        let mut tri = DMatrix::identity(4, 4);
        for i in 0..3 {
            tri[(i, i + 1)] = 0.3;
            tri[(i + 1, i)] = -0.2;
        }
        assert_eq!(build_graph(&tri), vec![vec![1], vec![0, 2], vec![1, 3], vec![2]]);
        // one-sided entries still link both ends
        let mut one_sided = DMatrix::identity(3, 3);
        one_sided[(0, 2)] = 1.0;
        assert_eq!(build_graph(&one_sided), vec![vec![2], vec![], vec![0]]);
    }

    #[test]
    fn model_validation() {
        let ok = LinearStableModel::new(a3(), Side::Y, y_params(1.5, 3), None, None);
        assert!(ok.is_ok());
        let mut zero_row = a3();
        zero_row.row_mut(1).fill(0.0);
        assert!(LinearStableModel::new(zero_row, Side::Y, y_params(1.5, 3), None, None).is_err());
        let mut mixed = y_params(1.5, 3);
        mixed[2].alpha = 1.2;
        assert!(LinearStableModel::new(a3(), Side::Y, mixed, None, None).is_err());
        assert!(LinearStableModel::new(a3(), Side::Y, y_params(1.5, 2), None, None).is_err());
        let mut nan = a3();
        nan[(0, 1)] = f64::NAN;
        assert!(LinearStableModel::new(nan, Side::Y, y_params(1.5, 3), None, None).is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let params = vec![
            StableParams::new(1.5, 0.3, 1.0 / 3.0, 0.1).unwrap(),
            StableParams::new(1.5, -1.0, 2.0f64.sqrt(), -1e-17).unwrap(),
            StableParams::new(1.5, 0.0, 7.25, 1e300).unwrap(),
        ];
        let noise = Some(y_params(1.5, 3));
        let model = LinearStableModel::new(
            a3(),
            Side::X,
            params,
            noise,
            Some(vec!["a".into(), "b".into(), "c".into()]),
        )
        .unwrap();
        let back = LinearStableModel::from_json_str(&model.to_json_string()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn json_schema_errors() {
        let base = r#"{"alpha": 1.5, "A": [[1, 0], [0, 1]], "side": "y", "params": PARAMS}"#;
        let with = |p: &str| base.replace("PARAMS", p);

        let bad_beta = LinearStableModel::from_json_str(&with("[[1.5, 1, 0], [0, 1, 0]]"));
        assert!(matches!(bad_beta, Err(Error::Validation(_))), "{bad_beta:?}");

        let missing = LinearStableModel::from_json_str(&with("[[0, 1, 0]]"));
        match missing {
            Err(Error::Parse(msg)) => assert!(msg.contains("missing row 1"), "{msg}"),
            other => panic!("{other:?}"),
        }

        let alpha_row = LinearStableModel::from_json_str(&with("[[1.2, 0, 1, 0], [0, 1, 0]]"));
        assert!(matches!(alpha_row, Err(Error::Validation(_))));

        let four_ok = LinearStableModel::from_json_str(&with("[[1.5, 0, 1, 0], [0, 1, 0]]"));
        assert!(four_ok.is_ok());

        let both_sides = r#"{"alpha": 1.5, "A": [[1]], "side": "y", "params": [[0, 1, 0]], "x_params": [[0, 1, 0]]}"#;
        assert!(matches!(
            LinearStableModel::from_json_str(both_sides),
            Err(Error::Parse(_))
        ));

        match LinearStableModel::from_json_str("{\"alpha\": 1.5,\n \"A\": [[1]],\n \"side\": \"z\"}") {
            Err(Error::Parse(msg)) => assert!(msg.contains("line"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a3.json");
        let model = LinearStableModel::new(a3(), Side::Y, y_params(1.5, 3), None, None).unwrap();
        save_model(&model, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), model);
        assert!(matches!(load_model(dir.path().join("nope.json")), Err(Error::Io(_))));
    }
}
