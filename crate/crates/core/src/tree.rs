//! Exact message passing for tree-structured models.
//!
//! On a tree the posterior systems can be solved by passing messages along
//! edges, leaves to root and back. Each node carries `z = (u, v, w')` with
//! `u = γ^α`, `v = βγ^α` and the shifted location
//! `w' = δ − tan(πα/2)·βγ` (α ≠ 1) or `w' = δ − (2/π)·βγ·ln γ` (α = 1).
//! In these coordinates every equation is linear with one 3×3 block per
//! edge, and a message is a Schur-complement update for that block.

use std::f64::consts::FRAC_2_PI;

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{a_log_abs, c_log_gamma};
use crate::linalg::SINGULAR_RTOL;
use crate::model::{build_graph, LinearStableModel, Side};
use crate::stable::{from_transformed_at, is_alpha_one, skew_scale, skew_tan, StableParams, TransformedParams};

/// Outcome of [`check_tree`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TreeCheck {
    /// Connected and acyclic. `parent[root]` is `None`; `order` lists nodes
    /// so that every parent precedes its children.
    Tree {
        root: usize,
        parent: Vec<Option<usize>>,
        order: Vec<usize>,
    },
    /// A cycle, as a closed walk `c0 → c1 → … → c0` (first node not repeated).
    Cycle(Vec<usize>),
    /// The nodes reachable from node 0, when that is not everything.
    Disconnected(Vec<usize>),
}

impl TreeCheck {
    pub fn is_tree(&self) -> bool {
        matches!(self, TreeCheck::Tree { .. })
    }
}

/// Tests whether the graph of `A` is a tree, rooted at node 0.
pub fn check_tree(a: &DMatrix<f64>) -> TreeCheck {
    check_tree_rooted(&build_graph(a), 0)
}

fn check_tree_rooted(adj: &[Vec<usize>], root: usize) -> TreeCheck {
    let n = adj.len();
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    if n == 0 {
        return TreeCheck::Tree { root, parent, order };
    }
    let mut stack = vec![root];
    seen[root] = true;
    while let Some(i) = stack.pop() {
        order.push(i);
        for &j in &adj[i] {
            if Some(j) == parent[i] {
                continue;
            }
            if seen[j] {
                // j is already in the tree through another path: walk both
                // ends up to their common ancestor.
                return TreeCheck::Cycle(cycle_through(&parent, i, j));
            }
            seen[j] = true;
            parent[j] = Some(i);
            stack.push(j);
        }
    }
    if order.len() < n {
        let mut reached = order;
        reached.sort_unstable();
        return TreeCheck::Disconnected(reached);
    }
    TreeCheck::Tree { root, parent, order }
}

fn cycle_through(parent: &[Option<usize>], i: usize, j: usize) -> Vec<usize> {
    let path_up = |mut k: usize| {
        let mut path = vec![k];
        while let Some(p) = parent[k] {
            path.push(p);
            k = p;
        }
        path
    };
    let pi = path_up(i);
    let pj = path_up(j);
    let common = *pi.iter().find(|k| pj.contains(k)).expect("same component");
    let mut cycle: Vec<usize> = pi.iter().copied().take_while(|&k| k != common).collect();
    cycle.push(common);
    let down: Vec<usize> = pj.iter().copied().take_while(|&k| k != common).collect();
    cycle.extend(down.into_iter().rev());
    cycle
}

/// One directed message: additive updates to the receiver's block and
/// right-hand side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub from: usize,
    pub to: usize,
    /// Right-hand side update in `(u, v, w')` coordinates.
    pub payload: TransformedParams,
    /// Row-major 3×3 block update.
    pub gain: [[f64; 3]; 3],
}

impl Message {
    /// The message that changes nothing.
    pub fn unit(from: usize, to: usize) -> Self {
        Self {
            from,
            to,
            payload: TransformedParams::new(0.0, 0.0, 0.0),
            gain: [[0.0; 3]; 3],
        }
    }

    fn gain_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.gain[r][c])
    }

    fn payload_vector(&self) -> Vector3<f64> {
        Vector3::new(self.payload.u, self.payload.v, self.payload.w)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CspResult {
    pub x_given_y: Vec<StableParams>,
    /// Every message sent, in schedule order.
    pub messages: Vec<Message>,
}

struct BlockSystem<'a> {
    alpha: f64,
    a: &'a DMatrix<f64>,
    alpha_one: bool,
    rhs: Vec<Vector3<f64>>,
    adj: Vec<Vec<usize>>,
    norm: f64,
}

impl BlockSystem<'_> {
    fn block(&self, i: usize, j: usize) -> Matrix3<f64> {
        let aij = self.a[(i, j)];
        let p = aij.abs().powf(self.alpha);
        let coupling = if self.alpha_one {
            -FRAC_2_PI * a_log_abs(aij)
        } else {
            0.0
        };
        Matrix3::new(p, 0.0, 0.0, 0.0, aij.signum() * p, 0.0, 0.0, coupling, aij)
    }

    fn invert(&self, m: &Matrix3<f64>) -> Result<Matrix3<f64>> {
        let threshold = SINGULAR_RTOL * self.norm;
        let pivot = m[(0, 0)].abs().min(m[(1, 1)].abs()).min(m[(2, 2)].abs());
        if !(pivot > threshold) {
            return Err(Error::SingularMatrix { pivot, threshold });
        }
        m.try_inverse().ok_or(Error::SingularMatrix { pivot, threshold })
    }

    /// Block and right-hand side at `i` with every incoming message except
    /// the one from `skip`.
    fn cavity(&self, i: usize, skip: Option<usize>, inbox: &[Vec<Option<Message>>]) -> (Matrix3<f64>, Vector3<f64>) {
        let mut m = self.block(i, i);
        let mut b = self.rhs[i];
        for (slot, &k) in self.adj[i].iter().enumerate() {
            if Some(k) == skip {
                continue;
            }
            let msg = inbox[i][slot].as_ref().expect("message scheduled before use");
            m += msg.gain_matrix();
            b += msg.payload_vector();
        }
        (m, b)
    }

    fn message(&self, i: usize, j: usize, inbox: &[Vec<Option<Message>>]) -> Result<Message> {
        let (m, b) = self.cavity(i, Some(j), inbox);
        let inv = self.invert(&m)?;
        let m_ji = self.block(j, i);
        let gain = -(m_ji * inv * self.block(i, j));
        let eta = -(m_ji * inv * b);
        Ok(Message {
            from: i,
            to: j,
            payload: TransformedParams::new(eta[0], eta[1], eta[2]),
            gain: [
                [gain[(0, 0)], gain[(0, 1)], gain[(0, 2)]],
                [gain[(1, 0)], gain[(1, 1)], gain[(1, 2)]],
                [gain[(2, 0)], gain[(2, 1)], gain[(2, 2)]],
            ],
        })
    }
}

/// Exact posterior marginals on a tree, rooted at node 0.
pub fn csp_run(model: &LinearStableModel) -> Result<Vec<StableParams>> {
    csp_run_rooted(model, 0).map(|r| r.x_given_y)
}

/// [`csp_run`] with an explicit root. The marginals do not depend on it.
pub fn csp_run_rooted(model: &LinearStableModel, root: usize) -> Result<CspResult> {
    if model.side() != Side::Y {
        return Err(Error::Validation(
            "tree inference needs a model with y-side parameters".into(),
        ));
    }
    if model.noise().is_some() {
        return Err(Error::UnsupportedFeature(
            "tree inference with a noise term is not supported".into(),
        ));
    }
    let n = model.len();
    if root >= n {
        return Err(Error::InvalidArgument(format!(
            "root {root} out of range for {n} nodes"
        )));
    }
    let a = model.matrix();
    let adj = build_graph(a);
    let (parent, order) = match check_tree_rooted(&adj, root) {
        TreeCheck::Tree { parent, order, .. } => (parent, order),
        TreeCheck::Cycle(c) => return Err(Error::NotATree(format!("cycle through nodes {c:?}"))),
        TreeCheck::Disconnected(r) => {
            return Err(Error::NotATree(format!(
                "graph is disconnected; node {root} reaches only {} of {n} nodes",
                r.len()
            )))
        }
    };

    let alpha = model.alpha();
    let alpha_one = is_alpha_one(alpha);
    let tan = skew_tan(alpha);
    let rhs = model
        .params()
        .iter()
        .map(|p| {
            let u = p.gamma.powf(alpha);
            let c = p.beta * p.gamma;
            let shift = if alpha_one {
                FRAC_2_PI * c_log_gamma(c, p.gamma)
            } else {
                tan * c
            };
            Vector3::new(u, p.beta * u, p.delta - shift)
        })
        .collect();
    let norm = (0..n)
        .map(|i| a.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let sys = BlockSystem {
        alpha,
        a,
        alpha_one,
        rhs,
        adj,
        norm,
    };

    let mut inbox: Vec<Vec<Option<Message>>> = sys.adj.iter().map(|nb| vec![None; nb.len()]).collect();
    let mut messages = Vec::with_capacity(2 * n.saturating_sub(1));
    let mut deliver = |inbox: &mut Vec<Vec<Option<Message>>>, msg: Message| {
        let slot = sys.adj[msg.to].iter().position(|&k| k == msg.from).expect("tree edge");
        inbox[msg.to][slot] = Some(msg.clone());
        messages.push(msg);
    };
    // leaves to root
    for &i in order.iter().rev() {
        if let Some(p) = parent[i] {
            let msg = sys.message(i, p, &inbox)?;
            deliver(&mut inbox, msg);
        }
    }
    // root to leaves
    for &i in &order {
        for &j in &sys.adj[i] {
            if parent[j] == Some(i) {
                let msg = sys.message(i, j, &inbox)?;
                deliver(&mut inbox, msg);
            }
        }
    }

    let x_given_y = (0..n)
        .map(|i| {
            let (m, b) = sys.cavity(i, None, &inbox);
            let z = sys.invert(&m)? * b;
            let (u, v) = (z[0], z[1]);
            let c = skew_scale(u, v, alpha);
            let delta = if alpha_one {
                let g = if u > 0.0 { u } else { 0.0 };
                z[2] + FRAC_2_PI * c_log_gamma(c, g)
            } else {
                z[2] + tan * c
            };
            from_transformed_at(&TransformedParams::new(u, v, delta), alpha, i)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CspResult { x_given_y, messages })
}
