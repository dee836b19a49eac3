//! Network-flow pipeline: per-node fitted parameters in, per-node posterior
//! summaries out.
//!
//! Hidden flows `X_j` feed observed aggregates `Y_i` through weighted edges
//! `hidden → observed`. Observed and hidden ids are each sorted, and the
//! k-th observed node is paired with the k-th hidden node; that pairing
//! places edge weights into the square matrix `A` (row = observed,
//! column = hidden).

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{forward, ForwardOptions};
use crate::format::{sig17, sig6};
use crate::linalg::{normalize_unit_diagonal, spectral_radius};
use crate::model::{LinearStableModel, Side};
use crate::stable::{from_transformed, StableParams, TransformedParams};

/// Bins of the per-node histogram the parameter summary replaces.
pub const HISTOGRAM_BINS: usize = 40;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowParamRecord {
    pub node_id: String,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl FlowParamRecord {
    pub fn new(node_id: impl Into<String>, p: StableParams) -> Self {
        Self {
            node_id: node_id.into(),
            alpha: p.alpha,
            beta: p.beta,
            gamma: p.gamma,
            delta: p.delta,
        }
    }

    pub fn params(&self) -> Result<StableParams> {
        StableParams::new(self.alpha, self.beta, self.gamma, self.delta)
    }
}

const FLOW_HEADER: [&str; 5] = ["node_id", "alpha", "beta", "gamma", "delta"];

pub fn ingest_flow_params(path: impl AsRef<Path>) -> Result<Vec<FlowParamRecord>> {
    read_flow_params(std::fs::File::open(path)?)
}

/// Parses `node_id,alpha,beta,gamma,delta` rows. All rows must share alpha.
pub fn read_flow_params(reader: impl Read) -> Result<Vec<FlowParamRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.is_empty() {
        return Err(Error::Validation("flow parameter file is empty".into()));
    }
    if header.iter().ne(FLOW_HEADER) {
        return Err(Error::Parse(format!(
            "flow parameter header must be {}, got {}",
            FLOW_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for (k, row) in rdr.deserialize::<FlowParamRecord>().enumerate() {
        let line = k + 2;
        let rec = row.map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
        rec.params()
            .map_err(|e| Error::Validation(format!("line {line} ({}): {e}", rec.node_id)))?;
        if !seen.insert(rec.node_id.clone()) {
            return Err(Error::Validation(format!(
                "line {line}: duplicate node id {}",
                rec.node_id
            )));
        }
        records.push(rec);
    }
    let Some(first) = records.first() else {
        return Err(Error::Validation("flow parameter file has no records".into()));
    };
    let alpha = first.alpha;
    let offenders: Vec<String> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.alpha != alpha)
        .map(|(k, r)| format!("{} (line {}, alpha {})", r.node_id, k + 2, r.alpha))
        .collect();
    if !offenders.is_empty() {
        return Err(Error::Validation(format!(
            "all records must share alpha {alpha}; offenders: {}",
            offenders.join(", ")
        )));
    }
    Ok(records)
}

pub fn write_flow_params(records: &[FlowParamRecord]) -> String {
    let mut out = FLOW_HEADER.join(",");
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.node_id,
            sig17(r.alpha),
            sig17(r.beta),
            sig17(r.gamma),
            sig17(r.delta)
        ));
    }
    out
}

/// One `hidden → observed` edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyEdge {
    pub src_id: String,
    pub dst_id: String,
    pub weight: f64,
}

const TOPOLOGY_HEADER: [&str; 3] = ["src_id", "dst_id", "weight"];

pub fn read_topology(reader: impl Read) -> Result<Vec<TopologyEdge>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(TOPOLOGY_HEADER) {
        return Err(Error::Parse(format!(
            "topology header must be {}, got {}",
            TOPOLOGY_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    rdr.deserialize::<TopologyEdge>()
        .enumerate()
        .map(|(k, row)| {
            let edge = row.map_err(|e| Error::Parse(format!("topology line {}: {e}", k + 2)))?;
            if !edge.weight.is_finite() {
                return Err(Error::Validation(format!(
                    "topology line {}: weight is not finite",
                    k + 2
                )));
            }
            Ok(edge)
        })
        .collect()
}

pub fn load_topology(path: impl AsRef<Path>) -> Result<Vec<TopologyEdge>> {
    read_topology(std::fs::File::open(path)?)
}

pub fn write_topology(edges: &[TopologyEdge]) -> String {
    let mut out = TOPOLOGY_HEADER.join(",");
    out.push('\n');
    for e in edges {
        out.push_str(&format!("{},{},{}\n", e.src_id, e.dst_id, sig17(e.weight)));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationPartition {
    observed: BTreeSet<String>,
    hidden: BTreeSet<String>,
}

impl ObservationPartition {
    pub fn new(observed: impl IntoIterator<Item = String>, hidden: impl IntoIterator<Item = String>) -> Result<Self> {
        let observed: BTreeSet<String> = observed.into_iter().collect();
        let hidden: BTreeSet<String> = hidden.into_iter().collect();
        if let Some(id) = observed.intersection(&hidden).next() {
            return Err(Error::Validation(format!("node {id} is both observed and hidden")));
        }
        Ok(Self { observed, hidden })
    }

    /// Sorted observed ids.
    pub fn observed(&self) -> impl Iterator<Item = &str> {
        self.observed.iter().map(String::as_str)
    }

    /// Sorted hidden ids.
    pub fn hidden(&self) -> impl Iterator<Item = &str> {
        self.hidden.iter().map(String::as_str)
    }

    /// Nodes with a parameter record are observed; every other node named
    /// in the topology is hidden.
    pub fn from_records(records: &[FlowParamRecord], topology: &[TopologyEdge]) -> Result<Self> {
        let observed: BTreeSet<String> = records.iter().map(|r| r.node_id.clone()).collect();
        let hidden = topology
            .iter()
            .flat_map(|e| [&e.src_id, &e.dst_id])
            .filter(|id| !observed.contains(*id))
            .cloned()
            .collect::<BTreeSet<_>>();
        Self::new(observed, hidden)
    }

    pub fn is_observed(&self, id: &str) -> bool {
        self.observed.contains(id)
    }

    pub fn is_hidden(&self, id: &str) -> bool {
        self.hidden.contains(id)
    }

    pub fn len(&self) -> usize {
        self.observed.len() + self.hidden.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Assembles `Y = AX` with y-side parameters from the observed records.
///
/// Weights are used as given; the iterative solvers rescale `A` to a unit
/// diagonal themselves.
pub fn build_observation_model(
    records: &[FlowParamRecord],
    topology: &[TopologyEdge],
    partition: &ObservationPartition,
) -> Result<LinearStableModel> {
    if partition.hidden.is_empty() {
        return Err(Error::Validation("partition has no hidden nodes to infer".into()));
    }
    let n = partition.hidden.len();
    if partition.observed.len() != n {
        return Err(Error::ModelShape(format!(
            "{} observed nodes for {n} hidden nodes; the model must be square",
            partition.observed.len()
        )));
    }
    let row_of: BTreeMap<&str, usize> = partition.observed().enumerate().map(|(k, id)| (id, k)).collect();
    let col_of: BTreeMap<&str, usize> = partition.hidden().enumerate().map(|(k, id)| (id, k)).collect();
    let by_id: BTreeMap<&str, &FlowParamRecord> = records.iter().map(|r| (r.node_id.as_str(), r)).collect();

    let mut a = DMatrix::zeros(n, n);
    for (k, e) in topology.iter().enumerate() {
        for id in [&e.src_id, &e.dst_id] {
            if !partition.is_observed(id) && !partition.is_hidden(id) {
                return Err(Error::Validation(format!(
                    "topology edge {k} references unknown node {id}"
                )));
            }
        }
        let (Some(&j), Some(&i)) = (col_of.get(e.src_id.as_str()), row_of.get(e.dst_id.as_str())) else {
            return Err(Error::ModelShape(format!(
                "topology edge {k} ({} -> {}) must run from a hidden to an observed node",
                e.src_id, e.dst_id
            )));
        };
        a[(i, j)] += e.weight;
    }
    let y = partition
        .observed()
        .map(|id| {
            by_id
                .get(id)
                .ok_or_else(|| Error::Validation(format!("observed node {id} has no parameter record")))
                .and_then(|r| r.params())
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = partition.hidden().map(str::to_string).collect();
    LinearStableModel::new(a, Side::Y, y, None, Some(labels))
}

/// A generated stand-in for a measured flow network.
#[derive(Clone, Debug, PartialEq)]
pub struct Surrogate {
    /// Parameters of the observed nodes.
    pub records: Vec<FlowParamRecord>,
    pub topology: Vec<TopologyEdge>,
    pub partition: ObservationPartition,
    /// The hidden flows that generated the observations.
    pub hidden_truth: Vec<FlowParamRecord>,
}

/// Out-edges per hidden node in the surrogate.
const SURROGATE_FANOUT: usize = 3;

/// Builds a surrogate with `n` hidden and `n` observed Lévy-like flows
/// (α = 0.5, β = 1, γ near 1e-4, δ near 1) whose normalized coupling has
/// `ρ(I − A_norm) = target_rho`. Deterministic for a given seed.
pub fn synth_planetlab_surrogate(n: usize, target_rho: f64, seed: u64) -> Result<Surrogate> {
    if n < 2 {
        return Err(Error::Generation(format!("need at least 2 hidden nodes, got {n}")));
    }
    if !(target_rho > 0.0 && target_rho < 1.0) {
        return Err(Error::Generation(format!(
            "target rho must be in (0, 1), got {target_rho}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden: Vec<String> = (0..n).map(|k| format!("h{k:04}")).collect();
    let observed: Vec<String> = (0..n).map(|k| format!("o{k:04}")).collect();

    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = rng.random_range(0.8..1.2);
    }
    let fanout = SURROGATE_FANOUT.min(n - 1);
    for j in 0..n {
        let mut targets = BTreeSet::new();
        while targets.len() < fanout {
            let i = rng.random_range(0..n);
            if i != j {
                targets.insert(i);
            }
        }
        for i in targets {
            a[(i, j)] = rng.random_range(0.5..1.5);
        }
    }
    let (norm, _) = normalize_unit_diagonal(&a)?;
    let off = (norm - DMatrix::identity(n, n)).abs();
    let rho0 = spectral_radius(&off)?;
    if !(rho0 > 1e-12) {
        return Err(Error::Generation(format!(
            "coupling has spectral radius {rho0}; cannot rescale"
        )));
    }
    let k = target_rho / rho0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                a[(i, j)] *= k;
            }
        }
    }

    let truth: Vec<StableParams> = (0..n)
        .map(|_| {
            let gamma = 1e-4 * rng.random_range(0.5..1.5);
            let delta = rng.random_range(0.5..1.5);
            StableParams::new(0.5, 1.0, gamma, delta)
        })
        .collect::<Result<_>>()?;
    let y = forward(0.5, &a, &truth, None, ForwardOptions::default())?;

    let mut topology = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if a[(i, j)] != 0.0 {
                topology.push(TopologyEdge {
                    src_id: hidden[j].clone(),
                    dst_id: observed[i].clone(),
                    weight: a[(i, j)],
                });
            }
        }
    }
    Ok(Surrogate {
        records: observed
            .iter()
            .zip(&y)
            .map(|(id, p)| FlowParamRecord::new(id.clone(), *p))
            .collect(),
        topology,
        partition: ObservationPartition::new(observed, hidden.clone())?,
        hidden_truth: hidden
            .iter()
            .zip(&truth)
            .map(|(id, p)| FlowParamRecord::new(id.clone(), *p))
            .collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub node_id: String,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    /// Empty, `nonphysical-scale` or `nonphysical-skew`.
    pub flag: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub alpha: f64,
    pub rows: Vec<ReportRow>,
    pub storage_note: String,
}

/// Per-node summary of posterior estimates given in transformed coordinates.
/// Estimates that are not valid stable laws are kept and flagged.
pub fn report(ids: &[String], estimates: &[TransformedParams], alpha: f64) -> Result<FlowReport> {
    if ids.len() != estimates.len() {
        return Err(Error::ModelShape(format!(
            "{} ids for {} estimates",
            ids.len(),
            estimates.len()
        )));
    }
    let mut rows: Vec<ReportRow> = ids
        .iter()
        .zip(estimates)
        .map(|(id, tp)| match from_transformed(tp, alpha) {
            Ok(p) => ReportRow {
                node_id: id.clone(),
                beta: p.beta,
                gamma: p.gamma,
                delta: p.delta,
                flag: String::new(),
            },
            Err(e) => ReportRow {
                node_id: id.clone(),
                beta: if tp.u != 0.0 { tp.v / tp.u } else { f64::NAN },
                gamma: if tp.u >= 0.0 { tp.u.powf(1.0 / alpha) } else { f64::NAN },
                delta: tp.w,
                flag: e.code().to_string(),
            },
        })
        .collect();
    rows.sort_by(|a, b| a.node_id.cmp(&b.node_id));
    let n = rows.len();
    let storage_note = format!(
        "{n} nodes stored as 4 parameters each ({} values); {HISTOGRAM_BINS}-bin histograms would need {} values",
        4 * n,
        HISTOGRAM_BINS * n
    );
    Ok(FlowReport {
        alpha,
        rows,
        storage_note,
    })
}

/// [`report`] for estimates already converted to parameters.
pub fn report_params(ids: &[String], params: &[StableParams]) -> Result<FlowReport> {
    let alpha = params.first().map_or(f64::NAN, |p| p.alpha);
    let tps: Vec<TransformedParams> = params.iter().map(StableParams::to_transformed).collect();
    report(ids, &tps, alpha)
}

impl FlowReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("node_id\tbeta\tgamma\tdelta\tflag\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                r.node_id,
                sig6(r.beta),
                sig6(r.gamma),
                sig6(r.delta),
                r.flag
            ));
        }
        out.push_str(&format!("# {}\n", self.storage_note));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::posterior;
    use crate::jacobi::{jacobi_run, JacobiOptions};
    use crate::model::{load_model, save_model};

    const FLOWS: &str = "node_id,alpha,beta,gamma,delta\na,0.5,1,1e-4,1\nb,0.5,1,2e-4,1.5\n";

    #[test]
    fn ingest_examples() {
        let recs = read_flow_params(FLOWS.as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(
            recs[0],
            FlowParamRecord {
                node_id: "a".into(),
                alpha: 0.5,
                beta: 1.0,
                gamma: 1e-4,
                delta: 1.0
            }
        );

        let bad_alpha = "node_id,alpha,beta,gamma,delta\na,2.5,0,1,0\n";
        match read_flow_params(bad_alpha.as_bytes()) {
            Err(Error::Validation(msg)) => assert!(msg.contains("line 2"), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(read_flow_params("".as_bytes()), Err(Error::Validation(_))));
        assert!(matches!(
            read_flow_params("node_id,alpha,beta,gamma,delta\n".as_bytes()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn mixed_alpha_lists_offenders() {
        let text = "node_id,alpha,beta,gamma,delta\na,0.5,1,1,0\nb,1.5,0,1,0\nc,0.5,1,1,0\nd,1.2,0,1,0\n";
        match read_flow_params(text.as_bytes()) {
            Err(Error::Validation(msg)) => {
                assert!(msg.contains("b (line 3") && msg.contains("d (line 5"), "{msg}");
                assert!(!msg.contains("c (line"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ingest_parse_errors() {
        let text = "node_id,alpha,beta,gamma,delta\na,0.5,one,1,0\n";
        match read_flow_params(text.as_bytes()) {
            Err(Error::Parse(msg)) => assert!(msg.contains("line 2"), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(read_flow_params("id,a,b\n".as_bytes()), Err(Error::Parse(_))));
    }

    fn two_by_two() -> (Vec<FlowParamRecord>, Vec<TopologyEdge>, ObservationPartition) {
        let recs = vec![
            FlowParamRecord::new("y1", StableParams::new(2.0, 0.0, 1.0, 0.0).unwrap()),
            FlowParamRecord::new("y2", StableParams::new(2.0, 0.0, 1.0, 0.0).unwrap()),
        ];
        let edge = |s: &str, d: &str, w: f64| TopologyEdge {
            src_id: s.into(),
            dst_id: d.into(),
            weight: w,
        };
        let topo = vec![
            edge("x1", "y1", 1.0),
            edge("x2", "y1", 0.1),
            edge("x1", "y2", 0.1),
            edge("x2", "y2", 1.0),
        ];
        let part = ObservationPartition::new(
            ["y1".to_string(), "y2".to_string()],
            ["x1".to_string(), "x2".to_string()],
        )
        .unwrap();
        (recs, topo, part)
    }

    #[test]
    fn build_two_by_two() {
        let (recs, topo, part) = two_by_two();
        let model = build_observation_model(&recs, &topo, &part).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.1, 1.0]);
        assert_eq!(model.matrix(), &expected);
        assert_eq!(model.labels(), &["x1".to_string(), "x2".to_string()]);
        let out = jacobi_run(&model, &JacobiOptions::default()).unwrap();
        assert!((out.x_given_y[0].gamma.powi(2) - 1.0 / 1.01).abs() < 1e-8);
    }

    #[test]
    fn build_errors() {
        let (recs, mut topo, part) = two_by_two();
        let empty = ObservationPartition::new(["y1".to_string()], Vec::<String>::new()).unwrap();
        assert!(matches!(
            build_observation_model(&recs, &topo, &empty),
            Err(Error::Validation(_))
        ));
        topo.push(TopologyEdge {
            src_id: "y1".into(),
            dst_id: "x1".into(),
            weight: 1.0,
        });
        assert!(matches!(
            build_observation_model(&recs, &topo, &part),
            Err(Error::ModelShape(_))
        ));
        topo.pop();
        topo.push(TopologyEdge {
            src_id: "zz".into(),
            dst_id: "y1".into(),
            weight: 1.0,
        });
        assert!(matches!(
            build_observation_model(&recs, &topo, &part),
            Err(Error::Validation(_))
        ));
        assert!(ObservationPartition::new(["a".to_string()], ["a".to_string()]).is_err());
    }

    #[test]
    fn partition_from_records() {
        let (records, topo, part) = two_by_two();
        assert_eq!(ObservationPartition::from_records(&records, &topo).unwrap(), part);
    }

    #[test]
    fn surrogate_small() {
        let s = synth_planetlab_surrogate(2, 0.5, 1).unwrap();
        let model = build_observation_model(&s.records, &s.topology, &s.partition).unwrap();
        let (norm, _) = normalize_unit_diagonal(model.matrix()).unwrap();
        let rho = spectral_radius(&(DMatrix::identity(2, 2) - norm)).unwrap();
        assert!((0.375..=0.625).contains(&rho), "{rho}");
        assert!(synth_planetlab_surrogate(1, 0.5, 1).is_err());
        assert!(synth_planetlab_surrogate(4, 1.5, 1).is_err());
    }

    #[test]
    fn surrogate_is_deterministic() {
        let a = synth_planetlab_surrogate(40, 0.02, 7).unwrap();
        let b = synth_planetlab_surrogate(40, 0.02, 7).unwrap();
        assert_eq!(write_flow_params(&a.records), write_flow_params(&b.records));
        assert_eq!(write_topology(&a.topology), write_topology(&b.topology));
        assert_ne!(a, synth_planetlab_surrogate(40, 0.02, 8).unwrap());
    }

    #[test]
    fn surrogate_pipeline_recovers_truth() {
        let s = synth_planetlab_surrogate(60, 0.02, 3).unwrap();
        let recs = read_flow_params(write_flow_params(&s.records).as_bytes()).unwrap();
        let topo = read_topology(write_topology(&s.topology).as_bytes()).unwrap();
        let model = build_observation_model(&recs, &topo, &s.partition).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_model(&model, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), model);

        let tol = 1e-10;
        let jac = jacobi_run(
            &model,
            &JacobiOptions {
                tol,
                ..Default::default()
            },
        )
        .unwrap();
        let exact = posterior(model.alpha(), model.matrix(), model.params()).unwrap();
        for ((p, q), t) in jac.x_given_y.iter().zip(&exact.x_given_y).zip(&s.hidden_truth) {
            assert!((p.gamma - q.gamma).abs() <= 10.0 * tol);
            assert!((p.delta - q.delta).abs() <= 10.0 * tol);
            assert!((q.delta - t.delta).abs() < 1e-9 && (q.gamma - t.gamma).abs() < 1e-12);
        }
    }

    #[test]
    fn report_rows_and_flags() {
        let ids = vec!["b".to_string(), "a".to_string()];
        let est = vec![
            TransformedParams::new(1.0, 0.5, 2.0),
            TransformedParams::new(-1.0, 0.0, 0.0),
        ];
        let rep = report(&ids, &est, 1.5).unwrap();
        assert_eq!(rep.rows[0].node_id, "a");
        assert_eq!(rep.rows[0].flag, "nonphysical-scale");
        assert_eq!(rep.rows[1].flag, "");
        assert!(rep.storage_note.contains("8 values") && rep.storage_note.contains("80 values"));
        let tsv = rep.to_tsv();
        assert!(tsv.starts_with("node_id\tbeta\tgamma\tdelta\tflag\na\t"));
        assert!(rep.to_json().contains("\"storage_note\""));

        let one = report_params(&["n".to_string()], &[StableParams::new(0.5, 1.0, 1e-4, 1.0).unwrap()]).unwrap();
        assert_eq!(one.rows.len(), 1);
        assert!((one.rows[0].gamma - 1e-4).abs() < 1e-18);
    }
}
