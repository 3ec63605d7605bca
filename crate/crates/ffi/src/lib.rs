//! C ABI over `pushsum-lab`.
//!
//! Graphs and runs are opaque handles released with their `_free`
//! functions. Every fallible call returns a [`PushsumStatus`]; on failure
//! [`pushsum_last_error`] describes the cause for the calling thread.
//! Agents are numbered from 1 at this boundary.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use pushsum_lab::adversary::{build_eve_view, build_hbc_view, eve_attack, hbc_attack, AdversaryError};
use pushsum_lab::analysis::consensus_error;
use pushsum_lab::cli::scenarios::rng_stream;
use pushsum_lab::engine::{run_private_push_sum, run_private_push_sum_vector, EngineError, RunRecord};
use pushsum_lab::graph::{five_agent_network, generate_ring_plus_random, Digraph, GraphError};
use pushsum_lab::numerics::{min_norm_least_squares, DenseMatrix, NumericsError};
use pushsum_lab::weights::{build_schedule, ScheduleParams, WeightError};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PushsumStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Graph = 3,
    Weights = 4,
    Engine = 5,
    Attack = 6,
    Numerics = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Opaque directed graph.
pub struct PushsumGraph {
    inner: Digraph,
}

/// Opaque recorded run.
pub struct PushsumRun {
    inner: RunRecord,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).expect("nul bytes removed"));
}

struct Failure(PushsumStatus, String);

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        Failure(PushsumStatus::Graph, e.to_string())
    }
}

impl From<WeightError> for Failure {
    fn from(e: WeightError) -> Self {
        Failure(PushsumStatus::Weights, e.to_string())
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        Failure(PushsumStatus::Engine, e.to_string())
    }
}

impl From<AdversaryError> for Failure {
    fn from(e: AdversaryError) -> Self {
        Failure(PushsumStatus::Attack, e.to_string())
    }
}

impl From<NumericsError> for Failure {
    fn from(e: NumericsError) -> Self {
        Failure(PushsumStatus::Numerics, e.to_string())
    }
}

fn invalid(msg: &str) -> Failure {
    Failure(PushsumStatus::InvalidArgument, msg.to_string())
}

fn null(name: &str) -> Failure {
    Failure(PushsumStatus::NullPointer, format!("{name} is null"))
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> PushsumStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PushsumStatus::Ok
        }
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            PushsumStatus::Panic
        }
    }
}

unsafe fn input<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, needed: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    if len < needed {
        return Err(Failure(
            PushsumStatus::BufferTooSmall,
            format!("{name} holds {len}, {needed} needed"),
        ));
    }
    Ok(slice::from_raw_parts_mut(p, needed))
}

unsafe fn write<T>(p: *mut T, v: T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    *p = v;
    Ok(())
}

unsafe fn graph_ref<'a>(g: *const PushsumGraph) -> Result<&'a Digraph, Failure> {
    g.as_ref().map(|g| &g.inner).ok_or_else(|| null("graph"))
}

unsafe fn run_ref<'a>(r: *const PushsumRun) -> Result<&'a RunRecord, Failure> {
    r.as_ref().map(|r| &r.inner).ok_or_else(|| null("run"))
}

fn zero_based(agent: u32, n: usize) -> Result<usize, Failure> {
    match agent as usize {
        a if a >= 1 && a <= n => Ok(a - 1),
        _ => Err(invalid("agent numbers run from 1 to n")),
    }
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn pushsum_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a graph from 1-based edge lists `from[i] -> to[i]`.
#[no_mangle]
pub unsafe extern "C" fn pushsum_graph_new(
    n: usize,
    from: *const u32,
    to: *const u32,
    edge_count: usize,
    out: *mut *mut PushsumGraph,
) -> PushsumStatus {
    guard(|| {
        let from = input(from, edge_count, "from")?;
        let to = input(to, edge_count, "to")?;
        let edges: Vec<(usize, usize)> = from.iter().zip(to).map(|(&a, &b)| (a as usize, b as usize)).collect();
        let g = Digraph::build(n, &edges)?;
        write(out, Box::into_raw(Box::new(PushsumGraph { inner: g })), "out")
    })
}

/// The built-in 5-agent network.
#[no_mangle]
pub unsafe extern "C" fn pushsum_graph_five_agent(out: *mut *mut PushsumGraph) -> PushsumStatus {
    guard(|| {
        write(
            out,
            Box::into_raw(Box::new(PushsumGraph {
                inner: five_agent_network(),
            })),
            "out",
        )
    })
}

/// Directed ring plus `extra_out` random out-neighbors per agent.
#[no_mangle]
pub unsafe extern "C" fn pushsum_graph_ring_plus_random(
    n: usize,
    extra_out: usize,
    seed: u64,
    out: *mut *mut PushsumGraph,
) -> PushsumStatus {
    guard(|| {
        let g = generate_ring_plus_random(n, extra_out, seed)?;
        write(out, Box::into_raw(Box::new(PushsumGraph { inner: g })), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn pushsum_graph_free(g: *mut PushsumGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Number of agents, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn pushsum_graph_agent_count(g: *const PushsumGraph) -> usize {
    g.as_ref().map_or(0, |g| g.inner.n())
}

/// Number of edges, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn pushsum_graph_edge_count(g: *const PushsumGraph) -> usize {
    g.as_ref().map_or(0, |g| g.inner.edge_count())
}

/// 1 if strongly connected, 0 otherwise or for a null handle.
#[no_mangle]
pub unsafe extern "C" fn pushsum_graph_is_strongly_connected(g: *const PushsumGraph) -> i32 {
    g.as_ref().map_or(0, |g| g.inner.is_strongly_connected() as i32)
}

/// Runs private push-sum for `rounds` rounds with default weight and
/// perturbation distributions. `x0` is agent-major with `n * dim` entries.
#[no_mangle]
pub unsafe extern "C" fn pushsum_run_private(
    g: *const PushsumGraph,
    x0: *const f64,
    dim: usize,
    horizon: usize,
    eta: f64,
    rounds: usize,
    seed: u64,
    out: *mut *mut PushsumRun,
) -> PushsumStatus {
    guard(|| {
        let g = graph_ref(g)?;
        if dim == 0 {
            return Err(invalid("dim must be positive"));
        }
        let x0 = input(x0, g.n() * dim, "x0")?;
        let mut params = ScheduleParams::new(horizon, eta, rounds);
        params.dim = dim;
        let s = build_schedule(g, &params, &mut rng_stream(seed, 1))?;
        let run = if dim == 1 {
            run_private_push_sum(g, x0, &s, rounds)?
        } else {
            run_private_push_sum_vector(g, x0, &s, rounds)?
        };
        write(
            out,
            Box::into_raw(Box::new(PushsumRun {
                inner: run.with_seed(seed),
            })),
            "out",
        )
    })
}

#[no_mangle]
pub unsafe extern "C" fn pushsum_run_free(r: *mut PushsumRun) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Rounds executed, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn pushsum_run_rounds(r: *const PushsumRun) -> usize {
    r.as_ref().map_or(0, |r| r.inner.rounds)
}

/// Copies `x`, `y`, `z` at `round`. `x` and `z` need `n * dim` entries, `y`
/// needs `n`; any of them may be null to skip it.
#[no_mangle]
pub unsafe extern "C" fn pushsum_run_state(
    r: *const PushsumRun,
    round: usize,
    x: *mut f64,
    x_len: usize,
    y: *mut f64,
    y_len: usize,
    z: *mut f64,
    z_len: usize,
) -> PushsumStatus {
    guard(|| {
        let run = run_ref(r)?;
        let s = run
            .states
            .get(round)
            .ok_or_else(|| invalid("round beyond the recorded run"))?;
        if !x.is_null() {
            output(x, x_len, s.x.len(), "x")?.copy_from_slice(&s.x);
        }
        if !y.is_null() {
            output(y, y_len, s.y.len(), "y")?.copy_from_slice(&s.y);
        }
        if !z.is_null() {
            output(z, z_len, s.z.len(), "z")?.copy_from_slice(&s.z);
        }
        Ok(())
    })
}

/// Writes `e(k)` for `k = 0..=rounds` (needs `rounds + 1` entries).
#[no_mangle]
pub unsafe extern "C" fn pushsum_run_consensus_error(r: *const PushsumRun, out: *mut f64, len: usize) -> PushsumStatus {
    guard(|| {
        let e = consensus_error(run_ref(r)?);
        output(out, len, e.len(), "out")?.copy_from_slice(&e);
        Ok(())
    })
}

/// Least-squares estimate of `target`'s initial value by the coalition
/// `members` from its first `m + 1` rounds of observations.
#[no_mangle]
pub unsafe extern "C" fn pushsum_attack_hbc(
    r: *const PushsumRun,
    members: *const u32,
    member_count: usize,
    target: u32,
    m: usize,
    estimate: *mut f64,
    rank: *mut usize,
) -> PushsumStatus {
    guard(|| {
        let run = run_ref(r)?;
        let n = run.graph.n();
        let members = input(members, member_count, "members")?
            .iter()
            .map(|&a| zero_based(a, n))
            .collect::<Result<Vec<_>, _>>()?;
        let view = build_hbc_view(run, &members)?;
        let rep = hbc_attack(&view, zero_based(target, n)?, m)?;
        write(estimate, rep.estimate, "estimate")?;
        if !rank.is_null() {
            *rank = rep.rank;
        }
        Ok(())
    })
}

/// Eavesdropper least-squares estimate of `target`'s initial value.
#[no_mangle]
pub unsafe extern "C" fn pushsum_attack_eve(
    r: *const PushsumRun,
    target: u32,
    m: usize,
    estimate: *mut f64,
) -> PushsumStatus {
    guard(|| {
        let run = run_ref(r)?;
        let horizon = run.horizon().ok_or_else(|| invalid("run has no perturbation horizon"))?;
        let rep = eve_attack(&build_eve_view(run), zero_based(target, run.graph.n())?, m, horizon)?;
        write(estimate, rep.estimate, "estimate")
    })
}

/// Minimum-norm least squares for a row-major `rows x cols` matrix. `x`
/// needs `cols` entries; `rank` and `residual` may be null.
#[no_mangle]
pub unsafe extern "C" fn pushsum_min_norm_lstsq(
    rows: usize,
    cols: usize,
    a: *const f64,
    b: *const f64,
    x: *mut f64,
    x_len: usize,
    rank: *mut usize,
    residual: *mut f64,
) -> PushsumStatus {
    guard(|| {
        let a = DenseMatrix::from_row_major(rows, cols, input(a, rows * cols, "a")?.to_vec())?;
        let ls = min_norm_least_squares(&a, input(b, rows, "b")?)?;
        output(x, x_len, cols, "x")?.copy_from_slice(&ls.solution);
        if !rank.is_null() {
            *rank = ls.rank;
        }
        if !residual.is_null() {
            *residual = ls.residual_norm;
        }
        Ok(())
    })
}
