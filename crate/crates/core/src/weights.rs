//! Per-round mixing weights and the perturbation schedule.
//!
//! A round's weight matrix `C` is column-oriented: column `i` holds the
//! weights agent `i` applies to what it sends, `C[j][i]` for
//! `j ∈ N_i^out ∪ {i}`. Matrices are stored sparsely as one self weight per
//! agent plus one weight per edge in canonical edge order, which keeps
//! 1000-agent schedules over thousands of rounds in memory.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Digraph;
use crate::numerics::DenseMatrix;

/// Tolerance used when checking stochasticity of generated matrices.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("eta = {eta} must lie strictly between 0 and {max}")]
    EtaTooLarge { eta: f64, max: f64 },
    #[error("empty or invalid range ({lo}, {hi})")]
    BadRange { lo: f64, hi: f64 },
    #[error("perturbation horizon must be at least 1")]
    BadHorizon,
    #[error("{rounds} rounds do not extend past the perturbation horizon K = {horizon}")]
    TooFewRounds { rounds: usize, horizon: usize },
    #[error("vector dimension must be at least 1")]
    BadDimension,
    #[error("sigma distribution cannot produce a nonzero sigma(0)")]
    ZeroSigma,
    #[error("invalid sigma distribution: {0}")]
    BadSigma(String),
    #[error("schedule document is inconsistent: {0}")]
    Document(String),
}

/// One sparse `n x n` mixing matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingWeights {
    /// `C[i][i]`.
    pub self_weight: Vec<f64>,
    /// `C[to][from]` for each edge, canonical order.
    pub edge_weight: Vec<f64>,
}

impl MixingWeights {
    pub fn zeros(g: &Digraph) -> Self {
        Self {
            self_weight: vec![0.0; g.n()],
            edge_weight: vec![0.0; g.edge_count()],
        }
    }

    pub fn to_dense(&self, g: &Digraph) -> DenseMatrix {
        let n = g.n();
        let mut m = DenseMatrix::zeros(n, n);
        for (i, &w) in self.self_weight.iter().enumerate() {
            m.set(i, i, w);
        }
        for (e, edge) in g.edges().iter().enumerate() {
            m.set(edge.to, edge.from, self.edge_weight[e]);
        }
        m
    }

    /// Reads the supported entries of a dense matrix; fails if anything off
    /// the support is nonzero.
    pub fn from_dense(g: &Digraph, m: &DenseMatrix) -> Result<Self, WeightError> {
        let n = g.n();
        if m.rows() != n || m.cols() != n {
            return Err(WeightError::Document(format!(
                "expected {n}x{n} matrix, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let mut w = Self::zeros(g);
        let mut covered = 0usize;
        for i in 0..n {
            w.self_weight[i] = m.get(i, i);
            if m.get(i, i) != 0.0 {
                covered += 1;
            }
        }
        for (e, edge) in g.edges().iter().enumerate() {
            w.edge_weight[e] = m.get(edge.to, edge.from);
            if w.edge_weight[e] != 0.0 {
                covered += 1;
            }
        }
        let nonzero = m.as_slice().iter().filter(|v| **v != 0.0).count();
        if nonzero != covered {
            return Err(WeightError::Document("nonzero weight outside N_i^out ∪ {i}".into()));
        }
        Ok(w)
    }

    /// Sum of column `i`.
    pub fn column_sum(&self, g: &Digraph, i: usize) -> f64 {
        self.self_weight[i] + g.out_edges(i).iter().map(|&e| self.edge_weight[e]).sum::<f64>()
    }

    pub fn supported_entries(&self) -> impl Iterator<Item = f64> + '_ {
        self.self_weight.iter().chain(&self.edge_weight).copied()
    }

    pub fn is_column_stochastic(&self, g: &Digraph, tol: f64) -> bool {
        self.supported_entries().all(|v| v >= 0.0)
            && (0..g.n()).all(|i| (self.column_sum(g, i) - 1.0).abs() <= tol)
    }
}

/// Upper bound on admissible `eta`: `1 / (max_i |N_i^out| + 1)`.
pub fn max_eta(g: &Digraph) -> f64 {
    1.0 / (g.max_out_degree() as f64 + 1.0)
}

fn check_eta(g: &Digraph, eta: f64) -> Result<(), WeightError> {
    let max = max_eta(g);
    if !(eta > 0.0 && eta < max) {
        return Err(WeightError::EtaTooLarge { eta, max });
    }
    Ok(())
}

/// Column-stochastic weights with every supported entry in `(eta, 1)`.
///
/// Each column with `d` supported slots is `eta·1 + (1 − d·eta)·s`, `s`
/// uniform on the simplex (sorted uniform gaps).
pub fn generate_c2_round<R: Rng + ?Sized>(g: &Digraph, eta: f64, rng: &mut R) -> Result<MixingWeights, WeightError> {
    check_eta(g, eta)?;
    let mut w = MixingWeights::zeros(g);
    let mut cuts = Vec::new();
    for i in 0..g.n() {
        let outs = g.out_edges(i);
        let d = outs.len() + 1;
        let slack = 1.0 - d as f64 * eta;
        cuts.clear();
        cuts.extend((0..d - 1).map(|_| rng.random::<f64>()));
        cuts.sort_by(f64::total_cmp);
        let mut prev = 0.0;
        for (slot, &cut) in cuts.iter().chain(std::iter::once(&1.0)).enumerate() {
            let value = eta + slack * (cut - prev);
            prev = cut;
            if slot == 0 {
                w.self_weight[i] = value;
            } else {
                w.edge_weight[outs[slot - 1]] = value;
            }
        }
    }
    Ok(w)
}

/// Unconstrained x-side weights, i.i.d. uniform on `(lo, hi)` over the
/// support.
pub fn generate_c1_perturbation_round<R: Rng + ?Sized>(
    g: &Digraph,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<MixingWeights, WeightError> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(WeightError::BadRange { lo, hi });
    }
    let mut draw = || loop {
        let v = rng.random_range(lo..hi);
        if v != lo {
            break v;
        }
    };
    let self_weight = (0..g.n()).map(|_| draw()).collect();
    let edge_weight = (0..g.edge_count()).map(|_| draw()).collect();
    Ok(MixingWeights {
        self_weight,
        edge_weight,
    })
}

/// Default range of the perturbed x-side weights.
pub const DEFAULT_C1_RANGE: (f64, f64) = (-100.0, 100.0);

/// Default half-width of the sum-one baseline weights.
pub const PROTOCOL1_RANGE: f64 = 100.0;

/// Sum-one baseline weights: arbitrary reals, each column summing to 1. The
/// out-edge entries are uniform on `(−100, 100)` and the self weight closes
/// the column.
pub fn generate_protocol1_round<R: Rng + ?Sized>(g: &Digraph, rng: &mut R) -> MixingWeights {
    let mut w = MixingWeights::zeros(g);
    for i in 0..g.n() {
        let mut partial = 0.0;
        for &e in g.out_edges(i) {
            let v = rng.random_range(-PROTOCOL1_RANGE..PROTOCOL1_RANGE);
            w.edge_weight[e] = v;
            partial += v;
        }
        w.self_weight[i] = 1.0 - partial;
    }
    w
}

/// Nonnegative square matrix whose columns all sum to 1 within `tol`.
pub fn validate_column_stochastic(m: &DenseMatrix, tol: f64) -> bool {
    m.rows() == m.cols()
        && m.as_slice().iter().all(|&v| v >= 0.0)
        && m.column_sums().iter().all(|s| (s - 1.0).abs() <= tol)
}

/// Distribution of the perturbation scalars `sigma(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SigmaDist {
    /// Gaussian with the given mean and variance.
    Normal { mean: f64, variance: f64 },
    /// Every `sigma(k)` equal to this value.
    Constant(f64),
}

impl Default for SigmaDist {
    fn default() -> Self {
        SigmaDist::Normal {
            mean: 0.0,
            variance: 10.0,
        }
    }
}

impl SigmaDist {
    fn validate(&self) -> Result<(), WeightError> {
        match *self {
            SigmaDist::Normal { mean, variance } => Normal::new(mean, variance.sqrt())
                .map(|_| ())
                .map_err(|e| WeightError::BadSigma(e.to_string())),
            SigmaDist::Constant(v) if !v.is_finite() => Err(WeightError::BadSigma(format!("{v}"))),
            SigmaDist::Constant(0.0) => Err(WeightError::ZeroSigma),
            SigmaDist::Constant(_) => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            SigmaDist::Normal { mean, variance } => Normal::new(mean, variance.sqrt())
                .expect("validated sigma distribution")
                .sample(rng),
            SigmaDist::Constant(v) => v,
        }
    }
}

/// Which update rule a schedule is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `C1(k) = C2(k)` column-stochastic for every round.
    Conventional,
    /// Perturbed mass-preserving rounds `k <= K`, then conventional rounds.
    Private,
    /// Sum-one arbitrary-sign x-weights for `k <= K`, applied directly.
    Protocol1,
}

/// Inputs of [`build_schedule`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleParams {
    /// Perturbation horizon `K`.
    pub horizon: usize,
    pub eta: f64,
    pub rounds: usize,
    pub sigma: SigmaDist,
    pub c1_range: (f64, f64),
    /// Vector dimension `d` (1 for scalar states).
    pub dim: usize,
}

impl ScheduleParams {
    pub fn new(horizon: usize, eta: f64, rounds: usize) -> Self {
        Self {
            horizon,
            eta,
            rounds,
            sigma: SigmaDist::default(),
            c1_range: DEFAULT_C1_RANGE,
            dim: 1,
        }
    }
}

/// Round-indexed weights driving one run.
///
/// `c1(k, coord)` is the perturbed matrix for `k <= K` and `c2(k)` afterwards,
/// so the tie `C1(k) = C2(k)` for `k >= K+1` holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSchedule {
    kind: ScheduleKind,
    eta: f64,
    dim: usize,
    c2: Vec<MixingWeights>,
    /// `[k][coord]` for `k <= K`.
    c1_perturbed: Vec<Vec<MixingWeights>>,
    /// `[k][coord]` for `k <= K`; empty unless `kind == Private`.
    sigma: Vec<Vec<f64>>,
}

impl WeightSchedule {
    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rounds(&self) -> usize {
        self.c2.len()
    }

    /// `K`, or `None` for a conventional schedule.
    pub fn horizon(&self) -> Option<usize> {
        self.c1_perturbed.len().checked_sub(1)
    }

    pub fn is_perturbed(&self, k: usize) -> bool {
        k < self.c1_perturbed.len()
    }

    pub fn c2(&self, k: usize) -> &MixingWeights {
        &self.c2[k]
    }

    pub fn c1(&self, k: usize, coord: usize) -> &MixingWeights {
        match self.c1_perturbed.get(k) {
            Some(per_coord) => &per_coord[coord],
            None => &self.c2[k],
        }
    }

    pub fn sigma(&self, k: usize, coord: usize) -> Option<f64> {
        self.sigma.get(k).map(|s| s[coord])
    }

    pub fn sigma_rows(&self) -> &[Vec<f64>] {
        &self.sigma
    }

    /// Replaces the round-0 x-weights of coordinate `coord`.
    pub fn set_round0_c1(&mut self, coord: usize, w: MixingWeights) {
        self.c1_perturbed[0][coord] = w;
    }

    pub fn set_round0_sigma(&mut self, coord: usize, sigma: f64) {
        self.sigma[0][coord] = sigma;
    }

    /// Conventional schedule from explicit column-stochastic matrices.
    pub fn conventional(eta: f64, c2: Vec<MixingWeights>) -> Self {
        Self {
            kind: ScheduleKind::Conventional,
            eta,
            dim: 1,
            c2,
            c1_perturbed: Vec::new(),
            sigma: Vec::new(),
        }
    }

    /// Assembles a schedule from parts; shapes are checked against `g`.
    pub fn from_parts(
        g: &Digraph,
        kind: ScheduleKind,
        eta: f64,
        dim: usize,
        c2: Vec<MixingWeights>,
        c1_perturbed: Vec<Vec<MixingWeights>>,
        sigma: Vec<Vec<f64>>,
    ) -> Result<Self, WeightError> {
        let bad = |msg: &str| Err(WeightError::Document(msg.to_string()));
        if dim == 0 {
            return Err(WeightError::BadDimension);
        }
        let shape_ok = |w: &MixingWeights| w.self_weight.len() == g.n() && w.edge_weight.len() == g.edge_count();
        if !c2.iter().all(shape_ok) || !c1_perturbed.iter().flatten().all(shape_ok) {
            return bad("weight shape does not match graph");
        }
        if c1_perturbed.iter().any(|r| r.len() != dim) || sigma.iter().any(|r| r.len() != dim) {
            return bad("per-coordinate entries do not match dimension");
        }
        if c1_perturbed.len() > c2.len() {
            return bad("perturbed rounds exceed schedule length");
        }
        match kind {
            ScheduleKind::Conventional if !c1_perturbed.is_empty() || !sigma.is_empty() => {
                return bad("conventional schedule carries perturbations")
            }
            ScheduleKind::Private if sigma.len() != c1_perturbed.len() || sigma.is_empty() => {
                return bad("private schedule needs sigma(k) for every k <= K")
            }
            ScheduleKind::Protocol1 if !sigma.is_empty() || c1_perturbed.is_empty() => {
                return bad("sum-one schedule needs perturbed rounds and no sigma")
            }
            _ => {}
        }
        Ok(Self {
            kind,
            eta,
            dim,
            c2,
            c1_perturbed,
            sigma,
        })
    }
}

/// Builds a private-protocol schedule.
///
/// The rng is consumed in a fixed order (per round: C2, then for `k <= K`
/// the per-coordinate C1 and sigma), so a seed fully determines the schedule.
/// A drawn `sigma(0) = 0` is redrawn.
pub fn build_schedule<R: Rng + ?Sized>(g: &Digraph, params: &ScheduleParams, rng: &mut R) -> Result<WeightSchedule, WeightError> {
    validate_params(g, params)?;
    params.sigma.validate()?;
    let (lo, hi) = params.c1_range;
    let mut c2 = Vec::with_capacity(params.rounds);
    let mut c1_perturbed = Vec::with_capacity(params.horizon + 1);
    let mut sigma = Vec::with_capacity(params.horizon + 1);
    for k in 0..params.rounds {
        c2.push(generate_c2_round(g, params.eta, rng)?);
        if k <= params.horizon {
            let mut per_coord = Vec::with_capacity(params.dim);
            for _ in 0..params.dim {
                per_coord.push(generate_c1_perturbation_round(g, lo, hi, rng)?);
            }
            c1_perturbed.push(per_coord);
            let mut s = Vec::with_capacity(params.dim);
            for _ in 0..params.dim {
                let mut v = params.sigma.sample(rng);
                while k == 0 && v == 0.0 {
                    v = params.sigma.sample(rng);
                }
                s.push(v);
            }
            sigma.push(s);
        }
    }
    Ok(WeightSchedule {
        kind: ScheduleKind::Private,
        eta: params.eta,
        dim: params.dim,
        c2,
        c1_perturbed,
        sigma,
    })
}

/// Conventional push-sum schedule: fresh column-stochastic weights per round.
pub fn build_conventional_schedule<R: Rng + ?Sized>(
    g: &Digraph,
    eta: f64,
    rounds: usize,
    rng: &mut R,
) -> Result<WeightSchedule, WeightError> {
    let c2 = (0..rounds)
        .map(|_| generate_c2_round(g, eta, rng))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(WeightSchedule::conventional(eta, c2))
}

/// Sum-one baseline schedule: C1(k) from [`generate_protocol1_round`] for
/// `k <= K`, standard C2 throughout.
pub fn build_protocol1_schedule<R: Rng + ?Sized>(
    g: &Digraph,
    horizon: usize,
    eta: f64,
    rounds: usize,
    rng: &mut R,
) -> Result<WeightSchedule, WeightError> {
    let params = ScheduleParams::new(horizon, eta, rounds);
    validate_params(g, &params)?;
    let mut c2 = Vec::with_capacity(rounds);
    let mut c1_perturbed = Vec::with_capacity(horizon + 1);
    for k in 0..rounds {
        c2.push(generate_c2_round(g, eta, rng)?);
        if k <= horizon {
            c1_perturbed.push(vec![generate_protocol1_round(g, rng)]);
        }
    }
    Ok(WeightSchedule {
        kind: ScheduleKind::Protocol1,
        eta,
        dim: 1,
        c2,
        c1_perturbed,
        sigma: Vec::new(),
    })
}

fn validate_params(g: &Digraph, p: &ScheduleParams) -> Result<(), WeightError> {
    if p.horizon < 1 {
        return Err(WeightError::BadHorizon);
    }
    if p.rounds <= p.horizon + 1 {
        return Err(WeightError::TooFewRounds {
            rounds: p.rounds,
            horizon: p.horizon,
        });
    }
    if p.dim == 0 {
        return Err(WeightError::BadDimension);
    }
    check_eta(g, p.eta)
}

// ---------------------------------------------------------------------------
// JSON document: one entry per round with dense matrices.

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleDocument {
    pub n: usize,
    pub kind: ScheduleKind,
    pub eta: f64,
    pub dim: usize,
    pub horizon: Option<usize>,
    pub rounds: Vec<RoundDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundDocument {
    pub round: usize,
    /// Per-coordinate x-side matrix (rows of `C1(k)`).
    pub c1: Vec<Vec<Vec<f64>>>,
    pub c2: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
}

impl WeightSchedule {
    pub fn to_document(&self, g: &Digraph) -> ScheduleDocument {
        let rounds = (0..self.rounds())
            .map(|k| RoundDocument {
                round: k,
                c1: (0..self.dim).map(|c| self.c1(k, c).to_dense(g).to_rows()).collect(),
                c2: self.c2[k].to_dense(g).to_rows(),
                sigma: self.sigma.get(k).cloned(),
            })
            .collect();
        ScheduleDocument {
            n: g.n(),
            kind: self.kind,
            eta: self.eta,
            dim: self.dim,
            horizon: self.horizon(),
            rounds,
        }
    }

    pub fn to_json(&self, g: &Digraph) -> String {
        serde_json::to_string_pretty(&self.to_document(g)).expect("schedule serializes")
    }

    /// Rebuilds a schedule, rejecting documents that break the support rule
    /// or untie C1 from C2 after the horizon.
    pub fn from_document(g: &Digraph, doc: &ScheduleDocument) -> Result<Self, WeightError> {
        let err = |m: String| WeightError::Document(m);
        if doc.n != g.n() {
            return Err(err(format!("document has n = {}, graph has {}", doc.n, g.n())));
        }
        let dense = |rows: &Vec<Vec<f64>>| {
            DenseMatrix::from_rows(rows)
                .map_err(|e| err(e.to_string()))
                .and_then(|m| MixingWeights::from_dense(g, &m))
        };
        let perturbed = doc.horizon.map_or(0, |k| k + 1);
        let mut c2 = Vec::new();
        let mut c1_perturbed = Vec::new();
        let mut sigma = Vec::new();
        for (k, r) in doc.rounds.iter().enumerate() {
            if r.round != k {
                return Err(err(format!("round {} out of order", r.round)));
            }
            if r.c1.len() != doc.dim {
                return Err(err(format!("round {k}: expected {} c1 matrices", doc.dim)));
            }
            let c2k = dense(&r.c2)?;
            let c1k = r.c1.iter().map(dense).collect::<Result<Vec<_>, _>>()?;
            if k < perturbed {
                c1_perturbed.push(c1k);
                if let Some(s) = &r.sigma {
                    sigma.push(s.clone());
                }
            } else if c1k.iter().any(|w| *w != c2k) {
                return Err(err(format!("round {k}: C1 differs from C2 after the horizon")));
            }
            c2.push(c2k);
        }
        Self::from_parts(g, doc.kind, doc.eta, doc.dim, c2, c1_perturbed, sigma)
    }

    pub fn from_json(g: &Digraph, json: &str) -> Result<Self, WeightError> {
        let doc: ScheduleDocument = serde_json::from_str(json).map_err(|e| WeightError::Document(e.to_string()))?;
        Self::from_document(g, &doc)
    }
}
