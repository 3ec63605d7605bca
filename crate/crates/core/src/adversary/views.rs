//! Adversary information sets as pure projections of a run.

use super::AdversaryError;
use crate::engine::RunRecord;
use crate::graph::Digraph;

/// What a coalition `H` of honest-but-curious agents sees.
///
/// Rounds index the outer vectors. Message entries follow `edges`, which
/// lists every edge with at least one endpoint in `H` in canonical order.
/// Weights are the coalition's own columns (self weight, then one entry per
/// out-edge) since those are the only weights its members choose.
#[derive(Debug, Clone, PartialEq)]
pub struct HbcView {
    pub graph: Digraph,
    pub members: Vec<usize>,
    pub dim: usize,
    /// Perturbation horizon `K` (public, as is `σ`).
    pub horizon: usize,
    /// Graph edge indices observed by the coalition.
    pub edges: Vec<usize>,
    /// `[k][member·d + c]`.
    pub x: Vec<Vec<f64>>,
    /// `[k][member]`.
    pub y: Vec<Vec<f64>>,
    /// `[k][slot·d + c]`, slot indexing `edges`.
    pub mx: Vec<Vec<f64>>,
    /// `[k][slot]`.
    pub my: Vec<Vec<f64>>,
    /// `[k][c]` for `k <= K`.
    pub sigma: Vec<Vec<f64>>,
    /// `[k][c]`: own x-side columns.
    pub c1: Vec<Vec<Vec<f64>>>,
    /// `[k]`: own y-side columns.
    pub c2: Vec<Vec<f64>>,
}

/// What an external eavesdropper sees: every message, nothing else.
#[derive(Debug, Clone, PartialEq)]
pub struct EveView {
    pub graph: Digraph,
    pub dim: usize,
    /// `[k][e·d + c]`.
    pub mx: Vec<Vec<f64>>,
    /// `[k][e]`.
    pub my: Vec<Vec<f64>>,
}

fn own_columns(g: &Digraph, members: &[usize], self_w: &[f64], edge_w: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for &j in members {
        out.push(self_w[j]);
        out.extend(g.out_edges(j).iter().map(|&e| edge_w[e]));
    }
    out
}

/// Projects a private run onto the coalition's information set.
pub fn build_hbc_view(run: &RunRecord, members: &[usize]) -> Result<HbcView, AdversaryError> {
    let g = &run.graph;
    let n = g.n();
    if members.is_empty() {
        return Err(AdversaryError::EmptyCoalition);
    }
    if let Some(&bad) = members.iter().find(|&&j| j >= n) {
        return Err(AdversaryError::AgentOutOfRange { agent: bad, n });
    }
    let mut members = members.to_vec();
    members.sort_unstable();
    members.dedup();
    if members.len() == n {
        return Err(AdversaryError::CoalitionIsEverything);
    }
    let inside = |i: usize| members.binary_search(&i).is_ok();
    let edges: Vec<usize> = g
        .edges()
        .iter()
        .enumerate()
        .filter(|(_, e)| inside(e.from) || inside(e.to))
        .map(|(idx, _)| idx)
        .collect();
    let d = run.dim;
    let x = run
        .states
        .iter()
        .map(|s| members.iter().flat_map(|&j| s.x_of(j).iter().copied()).collect())
        .collect();
    let y = run.states.iter().map(|s| members.iter().map(|&j| s.y[j]).collect()).collect();
    let mx = run
        .messages
        .iter()
        .map(|m| edges.iter().flat_map(|&e| m.mx_of(e, d).iter().copied()).collect())
        .collect();
    let my = run.messages.iter().map(|m| edges.iter().map(|&e| m.my[e]).collect()).collect();
    let s = &run.schedule;
    let c1 = (0..run.rounds)
        .map(|k| {
            (0..d)
                .map(|c| {
                    let w = s.c1(k, c);
                    own_columns(g, &members, &w.self_weight, &w.edge_weight)
                })
                .collect()
        })
        .collect();
    let c2 = (0..run.rounds)
        .map(|k| own_columns(g, &members, &s.c2(k).self_weight, &s.c2(k).edge_weight))
        .collect();
    Ok(HbcView {
        graph: g.clone(),
        members,
        dim: d,
        horizon: s.horizon().unwrap_or(0),
        edges,
        x,
        y,
        mx,
        my,
        sigma: s.sigma_rows().to_vec(),
        c1,
        c2,
    })
}

/// Projects a run onto the eavesdropper's information set.
pub fn build_eve_view(run: &RunRecord) -> EveView {
    EveView {
        graph: run.graph.clone(),
        dim: run.dim,
        mx: run.messages.iter().map(|m| m.mx.clone()).collect(),
        my: run.messages.iter().map(|m| m.my.clone()).collect(),
    }
}

impl HbcView {
    pub fn rounds(&self) -> usize {
        self.mx.len()
    }

    pub fn is_member(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    /// Slot of graph edge `e` in the observed message vectors.
    pub fn slot(&self, e: usize) -> Option<usize> {
        self.edges.binary_search(&e).ok()
    }

    /// Every observed number in a fixed order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for rows in [&self.x, &self.y, &self.mx, &self.my, &self.sigma, &self.c2] {
            out.extend(rows.iter().flatten());
        }
        out.extend(self.c1.iter().flatten().flatten());
        out
    }

    /// Largest per-entry [`relative_deviation`]; `None` if the views differ in
    /// structure.
    pub fn max_deviation(&self, other: &HbcView) -> Option<f64> {
        let same_shape = self.graph == other.graph
            && self.members == other.members
            && self.edges == other.edges
            && self.dim == other.dim
            && self.horizon == other.horizon
            && self.rounds() == other.rounds();
        same_shape.then(|| max_relative_deviation(&self.flatten(), &other.flatten())).flatten()
    }
}

impl EveView {
    pub fn rounds(&self) -> usize {
        self.mx.len()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.mx.iter().chain(&self.my).flatten().copied().collect()
    }

    pub fn max_deviation(&self, other: &EveView) -> Option<f64> {
        let same_shape = self.graph == other.graph && self.dim == other.dim && self.rounds() == other.rounds();
        same_shape.then(|| max_relative_deviation(&self.flatten(), &other.flatten())).flatten()
    }
}

/// `|a − b| / max(1, |a|, |b|)`.
pub fn relative_deviation(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

fn max_relative_deviation(a: &[f64], b: &[f64]) -> Option<f64> {
    (a.len() == b.len()).then(|| a.iter().zip(b).map(|(p, q)| relative_deviation(*p, *q)).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run_private_push_sum;
    use crate::graph::five_agent_network;
    use crate::weights::{build_schedule, ScheduleParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn g1_run() -> RunRecord {
        let g = five_agent_network();
        let s = build_schedule(&g, &ScheduleParams::new(2, 0.01, 20), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        run_private_push_sum(&g, &[40.0, 1.0, 2.0, 3.0, 4.0], &s, 20).unwrap()
    }

    #[test]
    fn hbc_view_contents() {
        let run = g1_run();
        let v = build_hbc_view(&run, &[4, 3]).unwrap();
        assert_eq!(v.members, vec![3, 4]);
        assert_eq!(v.sigma.len(), 3);
        assert_eq!(v.sigma, run.schedule.sigma_rows());
        // edges 1→4, 1→5, 3→4, 3→5, 4→1, 4→5, 5→1, 5→2 touch H
        assert_eq!(v.edges.len(), 8);
        assert!(v.slot(run.graph.edge_index(1, 2).unwrap()).is_none());
        assert_eq!(v.x[0], vec![3.0, 4.0]);
        assert!(!v.flatten().contains(&40.0));
        assert_eq!(v.rounds(), 20);
    }

    #[test]
    fn hbc_view_errors() {
        let run = g1_run();
        assert_eq!(build_hbc_view(&run, &[]), Err(AdversaryError::EmptyCoalition));
        assert_eq!(build_hbc_view(&run, &[0, 1, 2, 3, 4]), Err(AdversaryError::CoalitionIsEverything));
        assert!(matches!(build_hbc_view(&run, &[9]), Err(AdversaryError::AgentOutOfRange { .. })));
    }

    #[test]
    fn eve_view_has_messages_only() {
        let run = g1_run();
        let v = build_eve_view(&run);
        assert!(v.my.iter().all(|r| r.len() == run.graph.edge_count()));
        assert_eq!(v.rounds(), 20);
        let sigma0 = run.schedule.sigma(0, 0).unwrap();
        assert!(!v.flatten().contains(&sigma0));
        assert_eq!(v.max_deviation(&v.clone()), Some(0.0));
    }

    #[test]
    fn deviation_metric() {
        assert_eq!(relative_deviation(1e12, 1e12 + 1.0), 1.0 / (1e12 + 1.0));
        assert_eq!(relative_deviation(0.0, 1e-10), 1e-10);
    }
}
