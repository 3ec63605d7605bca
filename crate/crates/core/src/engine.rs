//! Synchronous push-sum execution with full per-edge transcripts.
//!
//! Every round first forms the messages each agent sends along its
//! out-edges, then updates all agents from those messages and their own
//! round-`k` values. [`apply_round`] is the single update path, so replaying
//! a transcript reproduces the recorded states bit for bit.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Digraph;
use crate::weights::{MixingWeights, ScheduleKind, WeightSchedule};

/// Column sums of y-side weights must be 1 within this.
pub const STOCHASTIC_CHECK_TOL: f64 = 1e-9;
/// Relative tolerance on `Σ_i Ξ_i(k) = 0`.
pub const ZERO_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("schedule covers {available} rounds, {needed} requested")]
    ScheduleTooShort { needed: usize, available: usize },
    #[error("round {round}: y-side weights are not column-stochastic")]
    NotColumnStochastic { round: usize },
    #[error("schedule does not fit this protocol: {0}")]
    ScheduleMismatch(String),
    #[error("expected {expected} initial values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("round {round}: perturbations sum to {residual:e}, not zero")]
    MassLeak { round: usize, residual: f64 },
    #[error("round {round}: transcript does not match the graph")]
    TranscriptShape { round: usize },
    #[error("i/o: {0}")]
    Io(String),
}

/// `x`, `y`, `z` at one round. `x` and `z` are agent-major `n x d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub round: usize,
    pub dim: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl NetworkState {
    /// Round-0 state: `y = 1`, `z = x`.
    pub fn initial(x0: Vec<f64>, dim: usize) -> Self {
        let n = x0.len() / dim;
        Self {
            round: 0,
            dim,
            z: x0.clone(),
            x: x0,
            y: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn x_of(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn z_of(&self, i: usize) -> &[f64] {
        &self.z[i * self.dim..(i + 1) * self.dim]
    }

    /// Per-coordinate `Σ_i x_i`.
    pub fn x_sum(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.dim];
        for row in self.x.chunks(self.dim) {
            for (acc, v) in s.iter_mut().zip(row) {
                *acc += v;
            }
        }
        s
    }

    pub fn y_sum(&self) -> f64 {
        self.y.iter().sum()
    }

    pub fn min_y(&self) -> f64 {
        self.y.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn x_l1(&self) -> f64 {
        self.x.iter().map(|v| v.abs()).sum()
    }
}

/// Messages of one round in canonical edge order: `mx[e·d + c]` is
/// `C1(k)_{to,from}·x_from(k)` in coordinate `c`, `my[e]` is
/// `C2(k)_{to,from}·y_from(k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMessages {
    pub round: usize,
    pub mx: Vec<f64>,
    pub my: Vec<f64>,
}

impl RoundMessages {
    pub fn mx_of(&self, e: usize, dim: usize) -> &[f64] {
        &self.mx[e * dim..(e + 1) * dim]
    }
}

/// Which update rule a run used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    PushSum,
    PrivatePushSum,
    SumOneBaseline,
}

/// A complete run: configuration echo, every state and every message.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub protocol: Protocol,
    pub graph: Digraph,
    pub schedule: WeightSchedule,
    pub x0: Vec<f64>,
    pub dim: usize,
    pub rounds: usize,
    pub seed: Option<u64>,
    /// `states[k]` for `k = 0..=rounds`.
    pub states: Vec<NetworkState>,
    /// `messages[k]` for `k = 0..rounds`.
    pub messages: Vec<RoundMessages>,
    /// Per-coordinate `Σ_i Ξ_i(k)` for each perturbed round.
    pub xi_sums: Vec<Vec<f64>>,
}

impl RunRecord {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn horizon(&self) -> Option<usize> {
        self.schedule.horizon()
    }

    pub fn final_state(&self) -> &NetworkState {
        self.states.last().expect("a run has at least its initial state")
    }

    /// `1ᵀx(0)/n` per coordinate.
    pub fn average(&self) -> Vec<f64> {
        let n = self.graph.n() as f64;
        self.states[0].x_sum().into_iter().map(|s| s / n).collect()
    }

    /// First round whose state passes [`stopping_check`].
    pub fn first_hit(&self, target: &[f64], eps: f64) -> Option<usize> {
        self.states.iter().position(|s| stopping_check(s, target, eps))
    }

    /// Writes `round,agent,coord,x,y,z` rows; agents and coordinates 1-based.
    pub fn write_trajectory_csv<W: Write>(&self, w: W) -> Result<(), EngineError> {
        let io = |e: csv::Error| EngineError::Io(e.to_string());
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["round", "agent", "coord", "x", "y", "z"]).map_err(io)?;
        for s in &self.states {
            for i in 0..s.n() {
                for c in 0..s.dim {
                    out.serialize((s.round, i + 1, c + 1, s.x[i * s.dim + c], s.y[i], s.z[i * s.dim + c]))
                        .map_err(io)?;
                }
            }
        }
        out.flush().map_err(|e| EngineError::Io(e.to_string()))
    }

    pub fn transcript_document(&self) -> Vec<TranscriptRound> {
        self.messages
            .iter()
            .map(|m| TranscriptRound {
                round: m.round,
                edges: self
                    .graph
                    .edges()
                    .iter()
                    .enumerate()
                    .map(|(e, edge)| TranscriptEdge {
                        from: edge.from + 1,
                        to: edge.to + 1,
                        mx: m.mx_of(e, self.dim).to_vec(),
                        my: m.my[e],
                    })
                    .collect(),
            })
            .collect()
    }

    pub fn transcript_json(&self) -> String {
        serde_json::to_string_pretty(&self.transcript_document()).expect("transcript serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRound {
    pub round: usize,
    pub edges: Vec<TranscriptEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEdge {
    pub from: usize,
    pub to: usize,
    pub mx: Vec<f64>,
    pub my: f64,
}

/// Messages agents send in round `k` of `schedule` from `state`.
pub fn compute_messages(g: &Digraph, schedule: &WeightSchedule, state: &NetworkState) -> RoundMessages {
    let k = state.round;
    let d = state.dim;
    let c2 = schedule.c2(k);
    let c1: Vec<&MixingWeights> = (0..d).map(|c| schedule.c1(k, c)).collect();
    let mut mx = vec![0.0; g.edge_count() * d];
    let mut my = vec![0.0; g.edge_count()];
    for (e, edge) in g.edges().iter().enumerate() {
        my[e] = c2.edge_weight[e] * state.y[edge.from];
        for (c, w) in c1.iter().enumerate() {
            mx[e * d + c] = w.edge_weight[e] * state.x[edge.from * d + c];
        }
    }
    RoundMessages { round: k, mx, my }
}

/// Round-`k+1` state from round-`k` state and the round-`k` messages.
///
/// Perturbed rounds of a private schedule use
/// `x_i + σ(k)·(Σ_in m − Σ_out m)`; every other round uses
/// `C1(k)_{ii}·x_i + Σ_in m`. `y` always follows `C2(k)`. Also returns the
/// per-coordinate `Σ_i Ξ_i(k)` on perturbed rounds.
pub fn apply_round(
    g: &Digraph,
    schedule: &WeightSchedule,
    state: &NetworkState,
    msgs: &RoundMessages,
) -> (NetworkState, Option<Vec<f64>>) {
    let k = state.round;
    let d = state.dim;
    let n = g.n();
    let c2 = schedule.c2(k);
    let mut y = vec![0.0; n];
    for (i, yi) in y.iter_mut().enumerate() {
        let mut acc = c2.self_weight[i] * state.y[i];
        for &e in g.in_edges(i) {
            acc += msgs.my[e];
        }
        *yi = acc;
    }
    let mut x = vec![0.0; n * d];
    let perturbed = schedule.kind() == ScheduleKind::Private && schedule.is_perturbed(k);
    let mut xi_sum = perturbed.then(|| vec![0.0; d]);
    for c in 0..d {
        if let Some(sums) = xi_sum.as_mut() {
            let sigma = schedule.sigma(k, c).expect("private schedule has sigma for perturbed rounds");
            for i in 0..n {
                let received: f64 = g.in_edges(i).iter().map(|&e| msgs.mx[e * d + c]).sum();
                let sent: f64 = g.out_edges(i).iter().map(|&e| msgs.mx[e * d + c]).sum();
                let xi = received - sent;
                sums[c] += xi;
                x[i * d + c] = state.x[i * d + c] + sigma * xi;
            }
        } else {
            let w = schedule.c1(k, c);
            for i in 0..n {
                let mut acc = w.self_weight[i] * state.x[i * d + c];
                for &e in g.in_edges(i) {
                    acc += msgs.mx[e * d + c];
                }
                x[i * d + c] = acc;
            }
        }
    }
    let z = (0..n * d).map(|idx| x[idx] / y[idx / d]).collect();
    (
        NetworkState {
            round: k + 1,
            dim: d,
            x,
            y,
            z,
        },
        xi_sum,
    )
}

/// Round-by-round executor that keeps only the current state.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    graph: &'a Digraph,
    schedule: &'a WeightSchedule,
    state: NetworkState,
}

impl<'a> Simulator<'a> {
    pub fn new(graph: &'a Digraph, schedule: &'a WeightSchedule, x0: Vec<f64>) -> Result<Self, EngineError> {
        let dim = schedule.dim();
        let expected = graph.n() * dim;
        if x0.len() != expected {
            return Err(EngineError::DimensionMismatch {
                expected,
                got: x0.len(),
            });
        }
        Ok(Self {
            graph,
            schedule,
            state: NetworkState::initial(x0, dim),
        })
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    /// Advances one round and returns its messages and `Σ_i Ξ_i(k)`.
    pub fn step(&mut self) -> Result<(RoundMessages, Option<Vec<f64>>), EngineError> {
        let k = self.state.round;
        if k >= self.schedule.rounds() {
            return Err(EngineError::ScheduleTooShort {
                needed: k + 1,
                available: self.schedule.rounds(),
            });
        }
        let msgs = compute_messages(self.graph, self.schedule, &self.state);
        let (next, xi_sum) = apply_round(self.graph, self.schedule, &self.state, &msgs);
        if let Some(sums) = &xi_sum {
            let scale = 1.0 + self.state.x_l1();
            if let Some(&residual) = sums.iter().find(|s| s.abs() > ZERO_SUM_TOL * scale) {
                return Err(EngineError::MassLeak { round: k, residual });
            }
        }
        self.state = next;
        Ok((msgs, xi_sum))
    }
}

fn check_y_weights(g: &Digraph, schedule: &WeightSchedule, rounds: usize) -> Result<(), EngineError> {
    if schedule.rounds() < rounds {
        return Err(EngineError::ScheduleTooShort {
            needed: rounds,
            available: schedule.rounds(),
        });
    }
    for k in 0..rounds {
        if !schedule.c2(k).is_column_stochastic(g, STOCHASTIC_CHECK_TOL) {
            return Err(EngineError::NotColumnStochastic { round: k });
        }
    }
    Ok(())
}

fn execute(
    protocol: Protocol,
    g: &Digraph,
    x0: &[f64],
    schedule: &WeightSchedule,
    rounds: usize,
) -> Result<RunRecord, EngineError> {
    check_y_weights(g, schedule, rounds)?;
    let mut sim = Simulator::new(g, schedule, x0.to_vec())?;
    let mut states = Vec::with_capacity(rounds + 1);
    let mut messages = Vec::with_capacity(rounds);
    let mut xi_sums = Vec::new();
    states.push(sim.state().clone());
    for _ in 0..rounds {
        let (msgs, xi) = sim.step()?;
        messages.push(msgs);
        xi_sums.extend(xi);
        states.push(sim.state().clone());
    }
    Ok(RunRecord {
        protocol,
        graph: g.clone(),
        schedule: schedule.clone(),
        x0: x0.to_vec(),
        dim: schedule.dim(),
        rounds,
        seed: None,
        states,
        messages,
        xi_sums,
    })
}

/// Conventional push-sum: `x(k+1) = C(k)x(k)`, `y(k+1) = C(k)y(k)`.
pub fn run_push_sum(g: &Digraph, x0: &[f64], schedule: &WeightSchedule, rounds: usize) -> Result<RunRecord, EngineError> {
    if schedule.kind() != ScheduleKind::Conventional {
        return Err(EngineError::ScheduleMismatch("conventional push-sum needs C1 = C2 for every round".into()));
    }
    execute(Protocol::PushSum, g, x0, schedule, rounds)
}

fn check_private(schedule: &WeightSchedule, rounds: usize) -> Result<(), EngineError> {
    if schedule.kind() != ScheduleKind::Private {
        return Err(EngineError::ScheduleMismatch("private push-sum needs a perturbed schedule".into()));
    }
    let horizon = schedule.horizon().unwrap_or(0);
    if rounds <= horizon + 1 {
        return Err(EngineError::ScheduleMismatch(format!(
            "{rounds} rounds do not pass the horizon K = {horizon}"
        )));
    }
    Ok(())
}

/// Scalar private push-sum.
pub fn run_private_push_sum(
    g: &Digraph,
    x0: &[f64],
    schedule: &WeightSchedule,
    rounds: usize,
) -> Result<RunRecord, EngineError> {
    check_private(schedule, rounds)?;
    if schedule.dim() != 1 {
        return Err(EngineError::ScheduleMismatch(format!(
            "scalar run on a {}-dimensional schedule",
            schedule.dim()
        )));
    }
    execute(Protocol::PrivatePushSum, g, x0, schedule, rounds)
}

/// Vector private push-sum with per-coordinate weights and `Λ(k)`. `x0` is
/// agent-major `n x d` with `d = schedule.dim()`.
pub fn run_private_push_sum_vector(
    g: &Digraph,
    x0: &[f64],
    schedule: &WeightSchedule,
    rounds: usize,
) -> Result<RunRecord, EngineError> {
    check_private(schedule, rounds)?;
    execute(Protocol::PrivatePushSum, g, x0, schedule, rounds)
}

/// Sum-one baseline: `x(k+1) = C1(k)x(k)` with arbitrary-sign, sum-one
/// columns for `k <= K`.
pub fn run_protocol1_push_sum(
    g: &Digraph,
    x0: &[f64],
    schedule: &WeightSchedule,
    rounds: usize,
) -> Result<RunRecord, EngineError> {
    if schedule.kind() != ScheduleKind::Protocol1 {
        return Err(EngineError::ScheduleMismatch("baseline run needs a sum-one schedule".into()));
    }
    execute(Protocol::SumOneBaseline, g, x0, schedule, rounds)
}

/// Recomputes every state from the recorded messages and each agent's own
/// previous values.
pub fn replay(record: &RunRecord) -> Result<Vec<NetworkState>, EngineError> {
    let g = &record.graph;
    let mut state = NetworkState::initial(record.x0.clone(), record.dim);
    let mut out = vec![state.clone()];
    for (k, msgs) in record.messages.iter().enumerate() {
        if msgs.round != k || msgs.my.len() != g.edge_count() || msgs.mx.len() != g.edge_count() * record.dim {
            return Err(EngineError::TranscriptShape { round: k });
        }
        state = apply_round(g, &record.schedule, &state, msgs).0;
        out.push(state.clone());
    }
    Ok(out)
}

/// `max_i ‖z_i − target‖₂ < eps`; for `d = 1` this is the ∞-norm over agents.
pub fn stopping_check(state: &NetworkState, target: &[f64], eps: f64) -> bool {
    max_deviation(state, target) < eps
}

/// `max_i ‖z_i − target‖₂`.
pub fn max_deviation(state: &NetworkState, target: &[f64]) -> f64 {
    state
        .z
        .chunks(state.dim)
        .map(|zi| zi.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Stop rule agents can evaluate: `‖z(k+1) − z(k)‖_∞ < eps`.
pub fn practical_stop(prev: &NetworkState, next: &NetworkState, eps: f64) -> bool {
    prev.z.iter().zip(&next.z).all(|(a, b)| (a - b).abs() < eps)
}

/// Tolerance for the invariant suite.
pub const INVARIANT_TOL: f64 = 1e-9;

/// Worst observed values of the conservation and floor invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub rounds: usize,
    /// `max_k,c |1ᵀx_c(k) − 1ᵀx_c(0)|`.
    pub mass_residual: f64,
    /// `‖x(0)‖₁`.
    pub initial_l1: f64,
    /// `max_k ‖x(k)‖₁`.
    pub peak_l1: f64,
    /// `max_k |1ᵀy(k) − n|`.
    pub y_residual: f64,
    /// `min_{k>=1,i} y_i(k)`.
    pub min_y: f64,
    /// `η^N`.
    pub y_floor: f64,
    pub n: usize,
}

impl InvariantReport {
    /// Violations of the literal bounds, with mass measured against
    /// `1 + ‖x(0)‖₁`.
    pub fn literal_violations(&self) -> Vec<String> {
        self.violations(1.0 + self.initial_l1)
    }

    /// Violations with mass measured against `1 + max_k ‖x(k)‖₁`, the scale
    /// at which rounding enters during perturbed rounds.
    pub fn violations(&self, mass_scale: f64) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.mass_residual <= INVARIANT_TOL * mass_scale) {
            out.push(format!(
                "x mass drifted by {:e} (limit {:e})",
                self.mass_residual,
                INVARIANT_TOL * mass_scale
            ));
        }
        let n = self.n as f64;
        if !(self.y_residual <= INVARIANT_TOL * n) {
            out.push(format!("y mass drifted by {:e}", self.y_residual));
        }
        if self.rounds > 0 && !(self.min_y >= self.y_floor * (1.0 - 1e-12)) {
            out.push(format!("min y {:e} below floor {:e}", self.min_y, self.y_floor));
        }
        out
    }

    pub fn roundoff_violations(&self) -> Vec<String> {
        self.violations(1.0 + self.peak_l1)
    }
}

/// Accumulates [`InvariantReport`] one state at a time.
#[derive(Debug, Clone)]
pub struct InvariantTracker {
    mass0: Vec<f64>,
    report: InvariantReport,
}

impl InvariantTracker {
    pub fn new(initial: &NetworkState, eta: f64) -> Self {
        let n = initial.n();
        let l1 = initial.x_l1();
        Self {
            mass0: initial.x_sum(),
            report: InvariantReport {
                rounds: 0,
                mass_residual: 0.0,
                initial_l1: l1,
                peak_l1: l1,
                y_residual: (initial.y_sum() - n as f64).abs(),
                min_y: f64::INFINITY,
                y_floor: eta.powi(n as i32),
                n,
            },
        }
    }

    pub fn observe(&mut self, state: &NetworkState) {
        let r = &mut self.report;
        r.rounds = r.rounds.max(state.round);
        for (s, s0) in state.x_sum().iter().zip(&self.mass0) {
            r.mass_residual = r.mass_residual.max((s - s0).abs());
        }
        r.peak_l1 = r.peak_l1.max(state.x_l1());
        r.y_residual = r.y_residual.max((state.y_sum() - r.n as f64).abs());
        if state.round >= 1 {
            r.min_y = r.min_y.min(state.min_y());
        }
    }

    pub fn finish(self) -> InvariantReport {
        self.report
    }
}

/// Runs the invariant suite over a recorded run.
pub fn check_invariants(run: &RunRecord) -> InvariantReport {
    let mut t = InvariantTracker::new(&run.states[0], run.schedule.eta());
    for s in &run.states[1..] {
        t.observe(s);
    }
    t.finish()
}
