//! Flat `key = value` scenario configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Command-line `--set`
//! overrides are applied after the file, in order. Agent numbers in the file
//! are 1-based.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::CliError;
use crate::graph::{five_agent_network, parse_generator_spec, Digraph};
use crate::weights::{SigmaDist, DEFAULT_C1_RANGE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Consensus,
    Scale,
    AttackHbc,
    AttackEve,
    Deniability,
    BoundCheck,
    GraphGen,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::Consensus,
        Scenario::Scale,
        Scenario::AttackHbc,
        Scenario::AttackEve,
        Scenario::Deniability,
        Scenario::BoundCheck,
        Scenario::GraphGen,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Consensus => "consensus",
            Scenario::Scale => "scale",
            Scenario::AttackHbc => "attack-hbc",
            Scenario::AttackEve => "attack-eve",
            Scenario::Deniability => "deniability",
            Scenario::BoundCheck => "bound-check",
            Scenario::GraphGen => "graph-gen",
        }
    }

    pub fn parse(s: &str) -> Result<Self, CliError> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown scenario {s:?}")))
    }
}

/// Where the topology comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphSpec {
    /// The built-in 5-agent network (`g1`).
    FiveAgent,
    /// `ring+k:<n>:<extra>:<seed>`.
    Generator(String),
    /// Edge-list file.
    File(PathBuf),
}

impl GraphSpec {
    pub fn parse(s: &str) -> Self {
        match s {
            "g1" => GraphSpec::FiveAgent,
            _ if s.starts_with("ring+k:") => GraphSpec::Generator(s.to_string()),
            _ => GraphSpec::File(PathBuf::from(s)),
        }
    }

    pub fn build(&self) -> Result<Digraph, CliError> {
        match self {
            GraphSpec::FiveAgent => Ok(five_agent_network()),
            GraphSpec::Generator(s) => Ok(parse_generator_spec(s).expect("prefix checked")?),
            GraphSpec::File(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                Ok(Digraph::from_text(&text)?)
            }
        }
    }
}

/// One initial-value item: a fixed number or a Gaussian draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValueSpec {
    Fixed(f64),
    Gaussian { mean: f64, variance: f64 },
}

/// Initial values per coordinate. Each coordinate lists agent values in
/// order; the last item repeats for the remaining agents.
///
/// Syntax: coordinates separated by `|`, items by `,`, e.g.
/// `40,gaussian(0,50)` or `gaussian(0,10)|gaussian(20,10)|gaussian(40,10)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialSpec {
    pub coords: Vec<Vec<ValueSpec>>,
}

impl InitialSpec {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let coords = s
            .split('|')
            .map(|c| split_items(c).iter().map(|item| parse_value(item)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        if coords.iter().any(Vec::is_empty) {
            return Err(CliError::Config(format!("empty x0 coordinate in {s:?}")));
        }
        Ok(Self { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Agent-major `n x d` values.
    pub fn realize<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>, CliError> {
        let d = self.dim();
        let mut out = vec![0.0; n * d];
        for (c, items) in self.coords.iter().enumerate() {
            if items.len() > n {
                return Err(CliError::Config(format!("x0 lists {} values for {n} agents", items.len())));
            }
            for i in 0..n {
                let item = items[i.min(items.len() - 1)];
                out[i * d + c] = match item {
                    ValueSpec::Fixed(v) => v,
                    ValueSpec::Gaussian { mean, variance } => Normal::new(mean, variance.sqrt())
                        .map_err(|e| CliError::Config(e.to_string()))?
                        .sample(rng),
                };
            }
        }
        Ok(out)
    }
}

fn split_items(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(cur.trim().to_string());
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

fn call_args<'a>(s: &'a str, name: &str) -> Option<Vec<&'a str>> {
    let inner = s.strip_prefix(name)?.strip_prefix('(')?.strip_suffix(')')?;
    Some(inner.split(',').map(str::trim).collect())
}

fn parse_f64(s: &str) -> Result<f64, CliError> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::Config(format!("not a finite number: {s:?}")))
}

fn parse_value(s: &str) -> Result<ValueSpec, CliError> {
    match call_args(s, "gaussian") {
        Some(args) if args.len() == 2 => {
            let variance = parse_f64(args[1])?;
            if variance < 0.0 {
                return Err(CliError::Config(format!("negative variance in {s:?}")));
            }
            Ok(ValueSpec::Gaussian {
                mean: parse_f64(args[0])?,
                variance,
            })
        }
        Some(_) => Err(CliError::Config(format!("gaussian takes (mean, variance): {s:?}"))),
        None => parse_f64(s).map(ValueSpec::Fixed),
    }
}

fn parse_sigma(s: &str) -> Result<SigmaDist, CliError> {
    if let Some(args) = call_args(s, "normal") {
        if args.len() == 2 {
            return Ok(SigmaDist::Normal {
                mean: parse_f64(args[0])?,
                variance: parse_f64(args[1])?,
            });
        }
    }
    if let Some(args) = call_args(s, "const") {
        if args.len() == 1 {
            return Ok(SigmaDist::Constant(parse_f64(args[0])?));
        }
    }
    Err(CliError::Config(format!("sigma must be normal(mean,var) or const(v): {s:?}")))
}

fn parse_list<T, F: Fn(&str) -> Result<T, CliError>>(s: &str, f: F) -> Result<Vec<T>, CliError> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(f).collect()
}

fn parse_usize(s: &str) -> Result<usize, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("not a non-negative integer: {s:?}")))
}

fn parse_agent(s: &str) -> Result<usize, CliError> {
    match parse_usize(s)? {
        0 => Err(CliError::Config("agents are numbered from 1".into())),
        a => Ok(a - 1),
    }
}

/// Every knob a scenario reads. Agent indices are 0-based here.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub graph: GraphSpec,
    pub x0: InitialSpec,
    pub horizon: usize,
    pub eta: f64,
    pub rounds: usize,
    pub seed: Option<u64>,
    pub trials: usize,
    pub sigma: SigmaDist,
    pub c1_range: (f64, f64),
    pub out: PathBuf,
    /// Coalition for the insider attack.
    pub members: Vec<usize>,
    pub target: usize,
    /// Legitimate neighbor for the insider witness; first available if unset.
    pub legit: Option<usize>,
    pub deltas: Vec<f64>,
    pub delta_sigmas: Vec<f64>,
    /// Consensus threshold on `max_i |z_i − avg|`.
    pub eps: f64,
    /// Threshold on `e(k)/e(0)` in the scale scenario.
    pub ratio_eps: f64,
    pub tail_fraction: f64,
    /// Horizons compared for the delay property.
    pub horizon_sweep: Vec<usize>,
    /// Trials of the positive controls.
    pub control_trials: usize,
    /// Trials of the vector eavesdropper variant.
    pub vector_trials: usize,
    /// Runs for the bound check.
    pub runs: usize,
}

impl ScenarioConfig {
    /// Experiment defaults for `scenario`; the seed is left unset.
    pub fn defaults(scenario: Scenario) -> Self {
        let mut cfg = ScenarioConfig {
            scenario,
            graph: GraphSpec::FiveAgent,
            x0: InitialSpec::parse("10,15,20,25,30").expect("static"),
            horizon: 2,
            eta: 0.01,
            rounds: 500,
            seed: None,
            trials: 1000,
            sigma: SigmaDist::default(),
            c1_range: DEFAULT_C1_RANGE,
            out: PathBuf::from("out"),
            members: vec![3, 4],
            target: 0,
            legit: None,
            deltas: vec![-5.0, 3.7, 100.0, 1e6],
            delta_sigmas: vec![0.5, -2.0, 10.0],
            eps: 1e-6,
            ratio_eps: 1e-6,
            tail_fraction: 0.5,
            horizon_sweep: vec![1, 2, 5],
            control_trials: 50,
            vector_trials: 24,
            runs: 100,
        };
        match scenario {
            Scenario::Scale => {
                cfg.graph = GraphSpec::Generator("ring+k:1000:5:1".into());
                cfg.x0 = InitialSpec::parse(&vec!["gaussian(0,1)"; 10].join("|")).expect("static");
                cfg.horizon = 3;
                cfg.eta = 0.05;
                cfg.rounds = 2000;
            }
            Scenario::AttackHbc | Scenario::AttackEve => {
                cfg.x0 = InitialSpec::parse("40,gaussian(0,50)").expect("static");
                cfg.rounds = 200;
            }
            Scenario::Deniability => {
                cfg.x0 = InitialSpec::parse("40,gaussian(0,50)").expect("static");
                cfg.rounds = 200;
            }
            Scenario::BoundCheck => cfg.rounds = 200,
            Scenario::GraphGen => cfg.graph = GraphSpec::Generator("ring+k:10:2:1".into()),
            Scenario::Consensus => {}
        }
        cfg
    }

    /// Applies one `key = value` pair.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key.trim() {
            "scenario" => self.scenario = Scenario::parse(v)?,
            "graph" => self.graph = GraphSpec::parse(v),
            "x0" => self.x0 = InitialSpec::parse(v)?,
            "K" | "horizon" => self.horizon = parse_usize(v)?,
            "eta" => self.eta = parse_f64(v)?,
            "rounds" | "M" => self.rounds = parse_usize(v)?,
            "seed" => {
                self.seed = Some(
                    v.parse()
                        .map_err(|_| CliError::Config(format!("seed must be a u64: {v:?}")))?,
                )
            }
            "trials" => self.trials = parse_usize(v)?,
            "sigma" => self.sigma = parse_sigma(v)?,
            "c1_range" => {
                let r = parse_list(v, parse_f64)?;
                if r.len() != 2 {
                    return Err(CliError::Config("c1_range takes lo,hi".into()));
                }
                self.c1_range = (r[0], r[1]);
            }
            "out" => self.out = PathBuf::from(v),
            "members" | "H" => self.members = parse_list(v, parse_agent)?,
            "target" => self.target = parse_agent(v)?,
            "legit" => self.legit = Some(parse_agent(v)?),
            "deltas" => self.deltas = parse_list(v, parse_f64)?,
            "delta_sigmas" => self.delta_sigmas = parse_list(v, parse_f64)?,
            "eps" => self.eps = parse_f64(v)?,
            "ratio_eps" => self.ratio_eps = parse_f64(v)?,
            "tail_fraction" => self.tail_fraction = parse_f64(v)?,
            "horizon_sweep" => self.horizon_sweep = parse_list(v, parse_usize)?,
            "control_trials" => self.control_trials = parse_usize(v)?,
            "vector_trials" => self.vector_trials = parse_usize(v)?,
            "runs" => self.runs = parse_usize(v)?,
            other => return Err(CliError::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key=value` text, one pair per line.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", no + 1)))?;
            self.set(k, v)
                .map_err(|e| CliError::Config(format!("line {}: {e}", no + 1)))?;
        }
        Ok(())
    }

    pub fn apply_override(&mut self, pair: &str) -> Result<(), CliError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects key=value, got {pair:?}")))?;
        self.set(k, v)
    }

    pub fn load(scenario: Scenario, path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut cfg = Self::defaults(scenario);
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            cfg.apply_text(&text)?;
        }
        for o in overrides {
            cfg.apply_override(o)?;
        }
        Ok(cfg)
    }

    pub fn dim(&self) -> usize {
        self.x0.dim()
    }

    /// Seed, required before any scenario runs.
    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::Config("a seed is required (seed = <u64> or --seed)".into()))
    }

    /// Checks numeric preconditions that do not need the graph.
    pub fn validate(&self) -> Result<(), CliError> {
        self.require_seed()?;
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad(format!("eta = {} must lie in (0, 1)", self.eta));
        }
        if !(self.c1_range.0 < self.c1_range.1) {
            return bad("c1_range needs lo < hi".into());
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return bad("tail_fraction must lie in (0, 1]".into());
        }
        if !(self.eps > 0.0 && self.ratio_eps > 0.0) {
            return bad("thresholds must be positive".into());
        }
        if self.rounds == 0 {
            return bad("rounds must be positive".into());
        }
        Ok(())
    }
}
