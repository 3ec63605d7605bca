//! Alternate runs that leave an adversary's view unchanged.
//!
//! Each constructor changes the initial values and the round-0 x-side
//! weights (plus `σ(0)` for the eavesdropper) so that every observed
//! message and every round-1 state is preserved. The witness is then checked
//! by re-simulating, not trusted algebraically.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::views::{build_eve_view, build_hbc_view, relative_deviation};
use super::AdversaryError;
use crate::engine::{run_private_push_sum, RunRecord};
use crate::graph::Digraph;
use crate::weights::{MixingWeights, WeightSchedule, DEFAULT_C1_RANGE};

/// Where the legitimate neighbor sits relative to the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborCase {
    /// `legit ∈ N_t^out`.
    Out,
    /// `legit ∈ N_t^in \ N_t^out`.
    In,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HbcWitness {
    pub target: usize,
    pub legit: usize,
    pub delta: f64,
    pub case: NeighborCase,
    pub x0: Vec<f64>,
    pub schedule: WeightSchedule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EveWitness {
    pub delta_sigma: f64,
    pub x0: Vec<f64>,
    pub sigma0: f64,
    pub schedule: WeightSchedule,
}

/// Result of re-simulating a witness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessCheck {
    /// Largest per-entry relative deviation between the two views.
    pub max_view_deviation: f64,
    /// Largest relative deviation of `x(k)`, `y(k)` over `k >= 1`.
    pub max_state_deviation: f64,
    /// `‖x̃(0) − x(0)‖₂`.
    pub x0_distance: f64,
}

impl WitnessCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_view_deviation <= tol && self.x0_distance > 0.0
    }
}

/// JSON form of a witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessDocument {
    pub kind: String,
    pub x0_alternate: Vec<f64>,
    pub round0_c1: Vec<Vec<f64>>,
    pub sigma0_alternate: f64,
    pub max_view_deviation: f64,
}

impl WitnessDocument {
    pub fn hbc(g: &Digraph, w: &HbcWitness, check: &WitnessCheck) -> Self {
        Self {
            kind: format!("hbc:{:?}", w.case).to_lowercase(),
            x0_alternate: w.x0.clone(),
            round0_c1: w.schedule.c1(0, 0).to_dense(g).to_rows(),
            sigma0_alternate: w.schedule.sigma(0, 0).unwrap_or(f64::NAN),
            max_view_deviation: check.max_view_deviation,
        }
    }

    pub fn eve(g: &Digraph, w: &EveWitness, check: &WitnessCheck) -> Self {
        Self {
            kind: "eve".into(),
            x0_alternate: w.x0.clone(),
            round0_c1: w.schedule.c1(0, 0).to_dense(g).to_rows(),
            sigma0_alternate: w.sigma0,
            max_view_deviation: check.max_view_deviation,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("witness serializes")
    }
}

/// Neighbors of `target` outside the coalition, ascending.
pub fn legitimate_neighbors(g: &Digraph, members: &[usize], target: usize) -> Vec<usize> {
    let mut out: Vec<usize> = g
        .in_neighbors(target)
        .iter()
        .chain(g.out_neighbors(target))
        .copied()
        .filter(|j| !members.contains(j))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn scalar_private(run: &RunRecord) -> Result<f64, AdversaryError> {
    if run.dim != 1 {
        return Err(AdversaryError::Unsupported("scalar runs only".into()));
    }
    let sigma0 = run
        .schedule
        .sigma(0, 0)
        .ok_or_else(|| AdversaryError::Unsupported("run has no perturbation".into()))?;
    if sigma0 == 0.0 {
        return Err(AdversaryError::ZeroSigma);
    }
    Ok(sigma0)
}

/// Self weights never reach the wire, so they are redrawn from the x-side range.
fn fresh_self_weight<R: Rng>(rng: &mut R) -> f64 {
    let (lo, hi) = DEFAULT_C1_RANGE;
    rng.random_range(lo..hi)
}

/// Alternate run hiding a shift of `delta` between `target` and a legitimate
/// neighbor from the coalition `members`. With `legit = None` the smallest
/// legitimate neighbor is used.
pub fn construct_deniable_run_hbc<R: Rng>(
    run: &RunRecord,
    members: &[usize],
    target: usize,
    legit: Option<usize>,
    delta: f64,
    rng: &mut R,
) -> Result<HbcWitness, AdversaryError> {
    let g = &run.graph;
    let n = g.n();
    if let Some(&bad) = members.iter().chain([&target]).find(|&&j| j >= n) {
        return Err(AdversaryError::AgentOutOfRange { agent: bad, n });
    }
    if members.contains(&target) {
        return Err(AdversaryError::TargetCompromised);
    }
    let sigma = scalar_private(run)?;
    let candidates = legitimate_neighbors(g, members, target);
    let l = match legit {
        None => *candidates.first().ok_or(AdversaryError::NoLegitimateNeighbor)?,
        Some(l) if candidates.contains(&l) => l,
        Some(_) => return Err(AdversaryError::NotLegitimateNeighbor),
    };
    if delta == 0.0 || !delta.is_finite() {
        return Err(AdversaryError::DegenerateDelta);
    }
    let (xt, xl) = (run.x0[target], run.x0[l]);
    let (xt_new, xl_new) = (xt + delta, xl - delta);
    if xt_new == 0.0 || xl_new == 0.0 {
        return Err(AdversaryError::ZeroDivisorInitial);
    }

    let old = run.schedule.c1(0, 0);
    let mut w: MixingWeights = old.clone();
    let case = if g.out_neighbors(target).contains(&l) {
        NeighborCase::Out
    } else {
        NeighborCase::In
    };
    for &e in g.out_edges(target) {
        w.edge_weight[e] = if g.edges()[e].to == l {
            (sigma * old.edge_weight[e] * xt + delta) / (sigma * xt_new)
        } else {
            old.edge_weight[e] * xt / xt_new
        };
    }
    for &e in g.out_edges(l) {
        w.edge_weight[e] = if case == NeighborCase::In && g.edges()[e].to == target {
            (sigma * old.edge_weight[e] * xl - delta) / (sigma * xl_new)
        } else {
            old.edge_weight[e] * xl / xl_new
        };
    }
    w.self_weight[target] = fresh_self_weight(rng);
    w.self_weight[l] = fresh_self_weight(rng);

    let mut schedule = run.schedule.clone();
    schedule.set_round0_c1(0, w);
    let mut x0 = run.x0.clone();
    x0[target] = xt_new;
    x0[l] = xl_new;
    Ok(HbcWitness {
        target,
        legit: l,
        delta,
        case,
        x0,
        schedule,
    })
}

/// Alternate run with `x̃(0) = x(0) + Δσ·R·Δx(0)` that the eavesdropper cannot
/// tell apart. The round-0 scalar becomes `σ(0) − Δσ`.
pub fn construct_deniable_run_eve<R: Rng>(
    run: &RunRecord,
    delta_sigma: f64,
    rng: &mut R,
) -> Result<EveWitness, AdversaryError> {
    let g = &run.graph;
    let sigma = scalar_private(run)?;
    if delta_sigma == 0.0 || !delta_sigma.is_finite() {
        return Err(AdversaryError::DegenerateDeltaSigma);
    }
    let shift = g.incidence_matrix().apply(&run.messages[0].mx);
    let x0: Vec<f64> = run.x0.iter().zip(&shift).map(|(x, s)| x + delta_sigma * s).collect();
    if run.x0.iter().chain(&x0).any(|&v| v == 0.0) {
        return Err(AdversaryError::ZeroInitialValue);
    }
    let old = run.schedule.c1(0, 0);
    let mut w = old.clone();
    for (e, edge) in g.edges().iter().enumerate() {
        w.edge_weight[e] = old.edge_weight[e] * run.x0[edge.from] / x0[edge.from];
    }
    for s in w.self_weight.iter_mut() {
        *s = fresh_self_weight(rng);
    }
    let sigma0 = sigma - delta_sigma;
    let mut schedule = run.schedule.clone();
    schedule.set_round0_c1(0, w);
    schedule.set_round0_sigma(0, sigma0);
    Ok(EveWitness {
        delta_sigma,
        x0,
        sigma0,
        schedule,
    })
}

fn state_deviation(a: &RunRecord, b: &RunRecord) -> f64 {
    a.states
        .iter()
        .zip(&b.states)
        .skip(1)
        .flat_map(|(p, q)| p.x.iter().zip(&q.x).chain(p.y.iter().zip(&q.y)))
        .map(|(u, v)| relative_deviation(*u, *v))
        .fold(0.0, f64::max)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Re-runs the witness and compares the coalition's two views.
pub fn verify_hbc_witness(run: &RunRecord, members: &[usize], w: &HbcWitness) -> Result<WitnessCheck, AdversaryError> {
    let alt = run_private_push_sum(&run.graph, &w.x0, &w.schedule, run.rounds)?;
    let a = build_hbc_view(run, members)?;
    let b = build_hbc_view(&alt, members)?;
    Ok(WitnessCheck {
        max_view_deviation: a.max_deviation(&b).unwrap_or(f64::INFINITY),
        max_state_deviation: state_deviation(run, &alt),
        x0_distance: distance(&run.x0, &w.x0),
    })
}

/// Re-runs the witness and compares the eavesdropper's two views.
pub fn verify_eve_witness(run: &RunRecord, w: &EveWitness) -> Result<WitnessCheck, AdversaryError> {
    let alt = run_private_push_sum(&run.graph, &w.x0, &w.schedule, run.rounds)?;
    Ok(WitnessCheck {
        max_view_deviation: build_eve_view(run)
            .max_deviation(&build_eve_view(&alt))
            .unwrap_or(f64::INFINITY),
        max_state_deviation: state_deviation(run, &alt),
        x0_distance: distance(&run.x0, &w.x0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::five_agent_network;
    use crate::weights::{build_schedule, ScheduleParams, SigmaDist};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn run_with(x0: &[f64], sigma: SigmaDist, rounds: usize, seed: u64) -> RunRecord {
        let g = five_agent_network();
        let mut p = ScheduleParams::new(2, 0.01, rounds);
        p.sigma = sigma;
        let s = build_schedule(&g, &p, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        run_private_push_sum(&g, x0, &s, rounds).unwrap()
    }

    #[test]
    fn case_one_closed_form() {
        let g = five_agent_network();
        let mut run = run_with(&[10.0, 15.0, 1.0, 2.0, 3.0], SigmaDist::Constant(1.0), 10, 1);
        let e = g.edge_index(0, 1).unwrap();
        let mut w = run.schedule.c1(0, 0).clone();
        w.edge_weight[e] = 0.5;
        run.schedule.set_round0_c1(0, w);
        let wit = construct_deniable_run_hbc(&run, &[3, 4], 0, None, 5.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(wit.legit, 1);
        assert_eq!(wit.case, NeighborCase::Out);
        assert_eq!(&wit.x0[..2], &[15.0, 10.0]);
        assert_eq!(wit.x0.iter().sum::<f64>(), run.x0.iter().sum::<f64>());
        assert!((wit.schedule.c1(0, 0).edge_weight[e] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn hbc_witness_replays() {
        let run = run_with(&[40.0, 5.0, 6.0, 7.0, 8.0], SigmaDist::default(), 60, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for delta in [-5.0, 3.7, 100.0] {
            let w = construct_deniable_run_hbc(&run, &[3, 4], 0, None, delta, &mut rng).unwrap();
            let check = verify_hbc_witness(&run, &[3, 4], &w).unwrap();
            assert!(check.passes(1e-9), "delta {delta}: {check:?}");
        }
    }

    #[test]
    fn in_neighbor_case_replays() {
        // agent 3 (index 2) has in-neighbor 2 (index 1) and no edge back to it
        let run = run_with(&[40.0, 5.0, 6.0, 7.0, 8.0], SigmaDist::default(), 40, 4);
        let members = [0, 3, 4];
        let w = construct_deniable_run_hbc(&run, &members, 2, Some(1), 2.5, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(w.case, NeighborCase::In);
        let check = verify_hbc_witness(&run, &members, &w).unwrap();
        assert!(check.passes(1e-9), "{check:?}");
    }

    #[test]
    fn hbc_guards() {
        let run = run_with(&[10.0, 15.0, 1.0, 2.0, 3.0], SigmaDist::default(), 10, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut go = |members: &[usize], t, l, d| construct_deniable_run_hbc(&run, members, t, l, d, &mut rng);
        assert_eq!(go(&[3, 4], 0, None, 0.0).unwrap_err(), AdversaryError::DegenerateDelta);
        assert_eq!(go(&[3, 4], 0, None, -10.0).unwrap_err(), AdversaryError::ZeroDivisorInitial);
        assert_eq!(go(&[3, 4], 0, None, 15.0).unwrap_err(), AdversaryError::ZeroDivisorInitial);
        assert_eq!(go(&[1, 3, 4], 0, None, 1.0).unwrap_err(), AdversaryError::NoLegitimateNeighbor);
        assert_eq!(go(&[3, 4], 0, Some(2), 1.0).unwrap_err(), AdversaryError::NotLegitimateNeighbor);
        assert_eq!(go(&[0, 4], 0, None, 1.0).unwrap_err(), AdversaryError::TargetCompromised);
    }

    #[test]
    fn eve_witness_replays() {
        let run = run_with(&[40.0, 5.0, 6.0, 7.0, 8.0], SigmaDist::default(), 60, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xi = run.graph.incidence_matrix().apply(&run.messages[0].mx);
        let xi_norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        for ds in [0.5, -2.0, 10.0] {
            let w = construct_deniable_run_eve(&run, ds, &mut rng).unwrap();
            assert_eq!(w.sigma0, run.schedule.sigma(0, 0).unwrap() - ds);
            let check = verify_eve_witness(&run, &w).unwrap();
            assert!(check.passes(1e-9), "ds {ds}: {check:?}");
            assert!((check.x0_distance - ds.abs() * xi_norm).abs() <= 1e-9 * check.x0_distance);
        }
        assert_eq!(
            construct_deniable_run_eve(&run, 0.0, &mut rng).unwrap_err(),
            AdversaryError::DegenerateDeltaSigma
        );
        let zero = run_with(&[0.0, 5.0, 6.0, 7.0, 8.0], SigmaDist::default(), 10, 6);
        assert_eq!(
            construct_deniable_run_eve(&zero, 1.0, &mut rng).unwrap_err(),
            AdversaryError::ZeroInitialValue
        );
    }

    #[test]
    fn witness_json() {
        let run = run_with(&[40.0, 5.0, 6.0, 7.0, 8.0], SigmaDist::default(), 10, 6);
        let w = construct_deniable_run_eve(&run, 0.5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let check = verify_eve_witness(&run, &w).unwrap();
        let doc = WitnessDocument::eve(&run.graph, &w, &check);
        let back: WitnessDocument = serde_json::from_str(&doc.to_json()).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.round0_c1.len(), 5);
    }
}
