//! Consensus error, the geometric rate bound `c·ρ^k`, and empirical rates.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{NetworkState, RunRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("tail fraction {0} must lie in (0, 1]")]
    BadTailFraction(f64),
    #[error("need at least two positive errors on the tail, found {0}")]
    NonPositiveError(usize),
    #[error("i/o: {0}")]
    Io(String),
}

/// `‖z − 1⊗avg‖₂` for one state.
pub fn state_error(state: &NetworkState, avg: &[f64]) -> f64 {
    state
        .z
        .chunks(state.dim)
        .flat_map(|zi| zi.iter().zip(avg).map(|(a, b)| (a - b) * (a - b)))
        .sum::<f64>()
        .sqrt()
}

/// `e(k)` for every recorded round.
pub fn consensus_error(run: &RunRecord) -> Vec<f64> {
    let avg = run.average();
    run.states.iter().map(|s| state_error(s, &avg)).collect()
}

/// Writes `round,error`.
pub fn write_error_csv<W: Write>(series: &[f64], w: W) -> Result<(), AnalysisError> {
    let io = |e: csv::Error| AnalysisError::Io(e.to_string());
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["round", "error"]).map_err(io)?;
    for (k, e) in series.iter().enumerate() {
        out.serialize((k, e)).map_err(io)?;
    }
    out.flush().map_err(|e| AnalysisError::Io(e.to_string()))
}

/// `ρ = (1 − η^{N−1})^{1/(N−1)}`, evaluated without cancellation.
pub fn theoretical_rho(n: usize, eta: f64) -> f64 {
    let m = (n - 1) as f64;
    ((-eta.powf(m)).ln_1p() / m).exp()
}

/// Constants of the bound `e(k) <= c·ρ^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBound {
    pub rho: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Scalar constant before the `√d` factor.
    pub c_scalar: f64,
    /// `√d · c_scalar`.
    pub c: f64,
    pub eta: f64,
    pub n: usize,
    pub horizon: usize,
    pub dim: usize,
    /// `‖x(k)‖₁` for `k = 0..=K+1`.
    pub x_l1_norms: Vec<f64>,
}

impl RateBound {
    pub fn envelope(&self, k: usize) -> f64 {
        self.c * self.rho.powi(k as i32)
    }

    pub fn to_json(&self, check: &BoundCheck) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            #[serde(flatten)]
            bound: &'a RateBound,
            holds: bool,
            worst_k: usize,
            worst_ratio: f64,
        }
        serde_json::to_string_pretty(&Doc {
            bound: self,
            holds: check.holds,
            worst_k: check.worst_k,
            worst_ratio: check.worst_ratio,
        })
        .expect("bound serializes")
    }
}

/// Bound constants from the norms `‖x(k)‖₁, k = 0..=K+1`. Conventional runs
/// use `K = 0`.
pub fn bound_from_norms(n: usize, eta: f64, horizon: usize, dim: usize, x_l1_norms: Vec<f64>) -> RateBound {
    assert_eq!(x_l1_norms.len(), horizon + 2, "need ‖x(k)‖₁ for k = 0..=K+1");
    let nf = n as f64;
    let rho = theoretical_rho(n, eta);
    let eta_n = eta.powi(n as i32);
    let rho_m = rho.powi(n as i32 - 1);
    let c0 = 2.0 * (1.0 + 1.0 / rho_m) / (1.0 - rho_m);
    let c1 = 2.0 * nf.sqrt() * c0 * x_l1_norms[horizon + 1] / eta_n / rho.powi(horizon as i32 + 2);
    let c2 = 2.0 * nf.sqrt() / eta_n - (nf - 1.0) / nf.sqrt();
    let c3 = c0 / (nf.sqrt() * eta_n * rho);
    let c_scalar = x_l1_norms
        .iter()
        .enumerate()
        .map(|(j, norm)| (c2 / rho.powi(j as i32) + c3) * norm)
        .fold(c1, f64::max);
    RateBound {
        rho,
        c0,
        c1,
        c2,
        c3,
        c_scalar,
        c: (dim as f64).sqrt() * c_scalar,
        eta,
        n,
        horizon,
        dim,
        x_l1_norms,
    }
}

/// Bound constants for a recorded run. For vector runs the per-coordinate
/// norms are maximized before the `√d` factor.
pub fn bound_constants(run: &RunRecord, eta: f64) -> RateBound {
    let horizon = run.horizon().unwrap_or(0);
    let d = run.dim;
    let norms = run.states[..=horizon + 1]
        .iter()
        .map(|s| {
            (0..d)
                .map(|c| s.x.iter().skip(c).step_by(d).map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max)
        })
        .collect();
    bound_from_norms(run.graph.n(), eta, horizon, d, norms)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub holds: bool,
    pub worst_k: usize,
    pub worst_ratio: f64,
}

/// Checks `e(k) <= c·ρ^k·(1 + 1e−9)` for every `k`.
pub fn verify_bound(series: &[f64], bound: &RateBound) -> BoundCheck {
    let mut worst = (0, 0.0);
    for (k, e) in series.iter().enumerate() {
        let ratio = e / bound.envelope(k);
        if ratio > worst.1 {
            worst = (k, ratio);
        }
    }
    BoundCheck {
        holds: worst.1 <= 1.0 + 1e-9,
        worst_k: worst.0,
        worst_ratio: worst.1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateFit {
    /// Per-round factor `exp(slope)` from `points` samples.
    Contraction { factor: f64, points: usize },
    /// Every error on the tail is exactly zero.
    ExactConvergence,
}

impl RateFit {
    pub fn factor(&self) -> Option<f64> {
        match self {
            RateFit::Contraction { factor, .. } => Some(*factor),
            RateFit::ExactConvergence => None,
        }
    }
}

/// Least-squares slope of `ln e(k)` over the last `tail_fraction` of the
/// series, zeros excluded.
pub fn fit_linear_rate(series: &[f64], tail_fraction: f64) -> Result<RateFit, AnalysisError> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(AnalysisError::BadTailFraction(tail_fraction));
    }
    let len = ((series.len() as f64) * tail_fraction).ceil() as usize;
    let start = series.len() - len.min(series.len());
    let pts: Vec<(f64, f64)> = series[start..]
        .iter()
        .enumerate()
        .filter(|(_, e)| **e > 0.0)
        .map(|(i, e)| ((start + i) as f64, e.ln()))
        .collect();
    if pts.is_empty() && series[start..].iter().all(|e| *e == 0.0) && len > 0 {
        return Ok(RateFit::ExactConvergence);
    }
    if pts.len() < 2 {
        return Err(AnalysisError::NonPositiveError(pts.len()));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    Ok(RateFit::Contraction {
        factor: (sxy / sxx).exp(),
        points: pts.len(),
    })
}

/// Roundoff floor of a run's error: `1e−14 · √(N·d) · max_k ‖x(k)‖₁`. Below
/// this, `e(k)` reflects accumulated rounding rather than contraction.
pub fn roundoff_floor(run: &RunRecord) -> f64 {
    let peak = run.states.iter().map(NetworkState::x_l1).fold(0.0, f64::max);
    1e-14 * ((run.graph.n() * run.dim) as f64).sqrt() * peak
}

/// Prefix of the series before it first drops below `floor`.
pub fn truncate_at_floor(series: &[f64], floor: f64) -> &[f64] {
    let end = series.iter().position(|&e| e < floor).unwrap_or(series.len());
    &series[..end]
}

/// Rounds after the horizon on which to fit a rate: from `K+1` up to the
/// roundoff floor.
pub fn informative_tail(run: &RunRecord, series: &[f64]) -> Vec<f64> {
    let start = (run.horizon().unwrap_or(0) + 1).min(series.len());
    truncate_at_floor(&series[start..], roundoff_floor(run)).to_vec()
}
