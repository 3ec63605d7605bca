//! Inference attacks on a target's initial value.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::views::{EveView, HbcView};
use super::AdversaryError;
use crate::numerics::{min_norm_least_squares, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMethod {
    HbcLeastSquares,
    EveLeastSquares,
    FullNeighborhood,
    EveUnitSigma,
}

/// Outcome of one attack. `truth` is filled in by the harness for scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub target: usize,
    pub coord: usize,
    pub truth: Option<f64>,
    pub estimate: f64,
    pub equations: usize,
    pub unknowns: usize,
    pub rank: usize,
    pub residual_norm: f64,
    pub method: AttackMethod,
}

impl AttackReport {
    pub fn with_truth(mut self, truth: f64) -> Self {
        self.truth = Some(truth);
        self
    }

    /// `|estimate − truth| / (1 + |truth|)`.
    pub fn rel_error(&self) -> Option<f64> {
        self.truth.map(|t| (self.estimate - t).abs() / (1.0 + t.abs()))
    }

    /// More unknowns than independent equations.
    pub fn underdetermined(&self) -> bool {
        self.rank < self.unknowns
    }
}

/// Writes `trial,target,true,estimate,rel_error,rank,eqs,unknowns`; targets
/// are 1-based.
pub fn write_reports_csv<W: Write>(reports: &[AttackReport], w: W) -> Result<(), AdversaryError> {
    let io = |e: csv::Error| AdversaryError::Io(e.to_string());
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["trial", "target", "true", "estimate", "rel_error", "rank", "eqs", "unknowns"])
        .map_err(io)?;
    for (trial, r) in reports.iter().enumerate() {
        out.serialize((
            trial,
            r.target + 1,
            r.truth.unwrap_or(f64::NAN),
            r.estimate,
            r.rel_error().unwrap_or(f64::NAN),
            r.rank,
            r.equations,
            r.unknowns,
        ))
        .map_err(io)?;
    }
    out.flush().map_err(|e| AdversaryError::Io(e.to_string()))
}

fn require_rounds(available: usize, needed: usize) -> Result<(), AdversaryError> {
    if available < needed {
        return Err(AdversaryError::TooFewRounds { needed, available });
    }
    Ok(())
}

/// Equation and unknown counts of the coalition's system for `L` legitimate
/// edges and one ratio edge: `3M − K + 2` and `(M + 2) + (M + 1) + 2L(M + 1)`.
pub fn hbc_system_size(m: usize, k: usize, legit_edges: usize) -> (usize, usize) {
    (3 * m + 2 - k, (m + 2) + (m + 1) + 2 * legit_edges * (m + 1))
}

/// Coalition attack on coordinate `coord` of `target`'s initial value.
///
/// Unknowns: `x_t(0..=M+1)`, `y_t(1..=M+1)`, and both message components on
/// every edge between `t` and a non-member for rounds `0..=M`. Equations: the
/// x and y updates for rounds `0..=M` and the ratio identity
/// `x_t(k) = z·y_t(k)` for `K+1 <= k <= M` read off one edge into the
/// coalition. Solved by minimum-norm least squares.
pub fn hbc_attack_coord(view: &HbcView, target: usize, m: usize, coord: usize) -> Result<AttackReport, AdversaryError> {
    let g = &view.graph;
    if target >= g.n() {
        return Err(AdversaryError::AgentOutOfRange { agent: target, n: g.n() });
    }
    if view.is_member(target) {
        return Err(AdversaryError::TargetCompromised);
    }
    if coord >= view.dim {
        return Err(AdversaryError::Unsupported(format!("coordinate {coord} of a {}-d view", view.dim)));
    }
    let k_hor = view.horizon;
    if m < k_hor + 1 {
        return Err(AdversaryError::Unsupported(format!("M = {m} must exceed K = {k_hor}")));
    }
    require_rounds(view.rounds(), m + 1)?;
    let d = view.dim;

    let in_edges = g.in_edges(target);
    let out_edges = g.out_edges(target);
    let legit: Vec<usize> = in_edges
        .iter()
        .chain(out_edges)
        .copied()
        .filter(|&e| view.slot(e).is_none())
        .collect();
    let ratio_edge = out_edges.iter().copied().find(|&e| view.slot(e).is_some());

    let x_idx = |k: usize| k;
    let y_idx = |k: usize| m + 2 + (k - 1);
    let base = 2 * m + 3;
    let mx_idx = |l: usize, k: usize| base + l * (m + 1) + k;
    let my_idx = |l: usize, k: usize| base + (legit.len() + l) * (m + 1) + k;
    let unknowns = base + 2 * legit.len() * (m + 1);
    let ratio_rows = if ratio_edge.is_some() { m - k_hor } else { 0 };
    let equations = 2 * (m + 1) + ratio_rows;

    let mut a = DenseMatrix::zeros(equations, unknowns);
    let mut b = vec![0.0; equations];
    let observed_x = |k: usize, e: usize| view.mx[k][view.slot(e).expect("observed") * d + coord];
    let observed_y = |k: usize, e: usize| view.my[k][view.slot(e).expect("observed")];
    let mut row = 0;
    for k in 0..=m {
        let s = if k <= k_hor { view.sigma[k][coord] } else { 1.0 };
        // x_t(k+1) − x_t(k) − s·(legit in − legit out) = s·(observed in − observed out)
        a.set(row, x_idx(k + 1), 1.0);
        a.set(row, x_idx(k), -1.0);
        let mut rhs = 0.0;
        for &e in in_edges {
            match legit.iter().position(|&l| l == e) {
                Some(l) => a.set(row, mx_idx(l, k), -s),
                None => rhs += observed_x(k, e),
            }
        }
        for &e in out_edges {
            match legit.iter().position(|&l| l == e) {
                Some(l) => a.set(row, mx_idx(l, k), s),
                None => rhs -= observed_x(k, e),
            }
        }
        b[row] = s * rhs;
        row += 1;

        // y_t(k+1) − y_t(k) − (legit in − legit out) = observed in − observed out
        a.set(row, y_idx(k + 1), 1.0);
        let mut rhs = 0.0;
        if k == 0 {
            rhs += 1.0;
        } else {
            a.set(row, y_idx(k), -1.0);
        }
        for &e in in_edges {
            match legit.iter().position(|&l| l == e) {
                Some(l) => a.set(row, my_idx(l, k), -1.0),
                None => rhs += observed_y(k, e),
            }
        }
        for &e in out_edges {
            match legit.iter().position(|&l| l == e) {
                Some(l) => a.set(row, my_idx(l, k), 1.0),
                None => rhs -= observed_y(k, e),
            }
        }
        b[row] = rhs;
        row += 1;
    }
    if let Some(e) = ratio_edge {
        for k in k_hor + 1..=m {
            let z = observed_x(k, e) / observed_y(k, e);
            a.set(row, x_idx(k), 1.0);
            a.set(row, y_idx(k), -z);
            row += 1;
        }
    }
    debug_assert_eq!(row, equations);

    let ls = min_norm_least_squares(&a, &b)?;
    Ok(AttackReport {
        target,
        coord,
        truth: None,
        estimate: ls.solution[x_idx(0)],
        equations,
        unknowns,
        rank: ls.rank,
        residual_norm: ls.residual_norm,
        method: AttackMethod::HbcLeastSquares,
    })
}

/// Scalar coalition attack.
pub fn hbc_attack(view: &HbcView, target: usize, m: usize) -> Result<AttackReport, AdversaryError> {
    hbc_attack_coord(view, target, m, 0)
}

/// `Σ_in m − Σ_out m` at agent `i` from a full message vector.
fn net_inflow(view_graph: &crate::graph::Digraph, msgs: &[f64], i: usize, d: usize, coord: usize) -> f64 {
    let received: f64 = view_graph.in_edges(i).iter().map(|&e| msgs[e * d + coord]).sum();
    let sent: f64 = view_graph.out_edges(i).iter().map(|&e| msgs[e * d + coord]).sum();
    received - sent
}

/// `y_t(k)` for `k = 0..=rounds`, telescoped from the messages and `y(0) = 1`.
pub fn eve_recover_y(view: &EveView, target: usize) -> Vec<f64> {
    let mut y = Vec::with_capacity(view.rounds() + 1);
    let mut cur = 1.0;
    y.push(cur);
    for my in &view.my {
        cur += net_inflow(&view.graph, my, target, 1, 0);
        y.push(cur);
    }
    y
}

/// `x_t(k)` for `K+1 <= k < rounds` from the ratio identity, indexed from
/// `K+1`.
pub fn eve_recover_x_tail(view: &EveView, target: usize, k_hor: usize, coord: usize) -> Result<Vec<f64>, AdversaryError> {
    let e = *view
        .graph
        .out_edges(target)
        .first()
        .ok_or(AdversaryError::NoRatioEdge)?;
    let y = eve_recover_y(view, target);
    Ok((k_hor + 1..view.rounds())
        .map(|k| view.mx[k][e * view.dim + coord] / view.my[k][e] * y[k])
        .collect())
}

/// Eavesdropper attack on coordinate `coord`.
///
/// With `y_t` and `x_t(K+1)` recovered, the only relation left is
/// `x_t(0) + Σ_{k<=K} σ(k)·Ξ_t(k) = x_t(K+1)` in the unknowns
/// `[x_t(0), σ(0..=K)]`; it is solved by minimum-norm least squares.
pub fn eve_attack_coord(
    view: &EveView,
    target: usize,
    m: usize,
    k_hor: usize,
    coord: usize,
) -> Result<AttackReport, AdversaryError> {
    let g = &view.graph;
    if target >= g.n() {
        return Err(AdversaryError::AgentOutOfRange { agent: target, n: g.n() });
    }
    require_rounds(view.rounds(), m + 1)?;
    if m < k_hor + 1 {
        return Err(AdversaryError::Unsupported(format!("M = {m} must exceed K = {k_hor}")));
    }
    let x_tail = eve_recover_x_tail(view, target, k_hor, coord)?;
    let unknowns = k_hor + 2;
    let mut a = DenseMatrix::zeros(1, unknowns);
    a.set(0, 0, 1.0);
    for k in 0..=k_hor {
        a.set(0, k + 1, net_inflow(g, &view.mx[k], target, view.dim, coord));
    }
    let ls = min_norm_least_squares(&a, &[x_tail[0]])?;
    Ok(AttackReport {
        target,
        coord,
        truth: None,
        estimate: ls.solution[0],
        equations: 1,
        unknowns,
        rank: ls.rank,
        residual_norm: ls.residual_norm,
        method: AttackMethod::EveLeastSquares,
    })
}

pub fn eve_attack(view: &EveView, target: usize, m: usize, k_hor: usize) -> Result<AttackReport, AdversaryError> {
    eve_attack_coord(view, target, m, k_hor, 0)
}

/// Exact recovery when every neighbor of `target` is in the coalition:
/// telescoped `y_t`, ratio identity at `K+1`, then
/// `x_t(0) = x_t(K+1) − Σ_{k<=K} σ(k)·Ξ_t(k)`.
pub fn full_neighborhood_reconstruction(view: &HbcView, target: usize) -> Result<AttackReport, AdversaryError> {
    let g = &view.graph;
    if target >= g.n() {
        return Err(AdversaryError::AgentOutOfRange { agent: target, n: g.n() });
    }
    if view.is_member(target) {
        return Err(AdversaryError::TargetCompromised);
    }
    let covered = g
        .in_neighbors(target)
        .iter()
        .chain(g.out_neighbors(target))
        .all(|&j| view.is_member(j));
    if !covered {
        return Err(AdversaryError::NeighborhoodNotCovered);
    }
    if view.dim != 1 {
        return Err(AdversaryError::Unsupported("scalar views only".into()));
    }
    let k_hor = view.horizon;
    require_rounds(view.rounds(), k_hor + 2)?;
    let slot = |e: usize| view.slot(e).expect("neighborhood covered");
    let inflow = |rows: &Vec<Vec<f64>>, k: usize| {
        let received: f64 = g.in_edges(target).iter().map(|&e| rows[k][slot(e)]).sum();
        let sent: f64 = g.out_edges(target).iter().map(|&e| rows[k][slot(e)]).sum();
        received - sent
    };
    let mut y = 1.0;
    for k in 0..=k_hor {
        y += inflow(&view.my, k);
    }
    let e = *g.out_edges(target).first().ok_or(AdversaryError::NoRatioEdge)?;
    let x_next = view.mx[k_hor + 1][slot(e)] / view.my[k_hor + 1][slot(e)] * y;
    let perturbation: f64 = (0..=k_hor).map(|k| view.sigma[k][0] * inflow(&view.mx, k)).sum();
    Ok(AttackReport {
        target,
        coord: 0,
        truth: None,
        estimate: x_next - perturbation,
        equations: 0,
        unknowns: 0,
        rank: 0,
        residual_norm: 0.0,
        method: AttackMethod::FullNeighborhood,
    })
}

/// Eavesdropper recovery for runs whose `σ(k)` are all 1:
/// `x_t(0) = x_t(K+1) − Σ_{k<=K} Ξ_t(k)`. `run_sigma` is the harness's
/// knowledge of the run and only gates applicability.
pub fn eve_reconstruction_sigma1(
    view: &EveView,
    target: usize,
    k_hor: usize,
    run_sigma: &[Vec<f64>],
) -> Result<AttackReport, AdversaryError> {
    if run_sigma.iter().flatten().any(|&s| s != 1.0) {
        return Err(AdversaryError::SigmaNotUnity);
    }
    if target >= view.graph.n() {
        return Err(AdversaryError::AgentOutOfRange {
            agent: target,
            n: view.graph.n(),
        });
    }
    if view.dim != 1 {
        return Err(AdversaryError::Unsupported("scalar views only".into()));
    }
    require_rounds(view.rounds(), k_hor + 2)?;
    let x_tail = eve_recover_x_tail(view, target, k_hor, 0)?;
    let perturbation: f64 = (0..=k_hor).map(|k| net_inflow(&view.graph, &view.mx[k], target, 1, 0)).sum();
    Ok(AttackReport {
        target,
        coord: 0,
        truth: None,
        estimate: x_tail[0] - perturbation,
        equations: 0,
        unknowns: 0,
        rank: 0,
        residual_norm: 0.0,
        method: AttackMethod::EveUnitSigma,
    })
}
