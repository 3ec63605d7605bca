//! Scenario implementations. Each returns its checks; the binary exits
//! non-zero if any check fails.
//!
//! Random streams derive from the configured seed: stream 0 draws `x0`,
//! stream 1 the single-run schedule, and trial `t` of a batch uses its own
//! stream, so results do not depend on scheduling across workers.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::{Scenario, ScenarioConfig};
use super::CliError;
use crate::adversary::{
    build_eve_view, build_hbc_view, construct_deniable_run_eve, construct_deniable_run_hbc, eve_attack,
    eve_attack_coord, eve_reconstruction_sigma1, full_neighborhood_reconstruction, hbc_attack, hbc_system_size,
    legitimate_neighbors, verify_eve_witness, verify_hbc_witness, write_reports_csv, AttackReport, WitnessDocument,
};
use crate::analysis::{
    bound_constants, consensus_error, fit_linear_rate, informative_tail, state_error, verify_bound,
    write_error_csv,
};
use crate::engine::{
    check_invariants, run_private_push_sum, run_private_push_sum_vector, InvariantReport, InvariantTracker,
    RunRecord, Simulator,
};
use crate::graph::Digraph;
use crate::weights::{build_schedule, ScheduleParams, SigmaDist, WeightSchedule};

/// Relative tolerance for replayed adversary views.
pub const REPLAY_TOL: f64 = 1e-9;
/// Relative tolerance for exact-recovery controls.
pub const RECOVERY_TOL: f64 = 1e-8;

const TRIAL_STREAM: u64 = 1_000;
const CONTROL_STREAM: u64 = 2_000_000;
const VECTOR_STREAM: u64 = 3_000_000;
const WITNESS_STREAM: u64 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            out += &format!("[{tag}] {}: {}\n", c.name, c.detail);
        }
        for f in &self.files {
            out += &format!("wrote {}\n", f.display());
        }
        out
    }
}

pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let p = self.dir.join(name);
        fs::write(&p, bytes)?;
        self.files.push(p);
        Ok(())
    }

    fn json(&mut self, name: &str, v: &Value) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
        s.push('\n');
        self.write(name, s.as_bytes())
    }
}

fn schedule_params(cfg: &ScenarioConfig, horizon: usize, rounds: usize, dim: usize) -> ScheduleParams {
    ScheduleParams {
        horizon,
        eta: cfg.eta,
        rounds,
        sigma: cfg.sigma,
        c1_range: cfg.c1_range,
        dim,
    }
}

fn private_run(g: &Digraph, x0: &[f64], s: &WeightSchedule, rounds: usize) -> Result<RunRecord, CliError> {
    Ok(if s.dim() == 1 {
        run_private_push_sum(g, x0, s, rounds)?
    } else {
        run_private_push_sum_vector(g, x0, s, rounds)?
    })
}

fn invariant_check(rep: &InvariantReport) -> Check {
    let v = rep.roundoff_violations();
    let literal = rep.literal_violations().is_empty();
    Check::new(
        "engine invariants",
        v.is_empty(),
        format!(
            "mass drift {:e} (peak ‖x‖₁ {:e}, literal bound {}), y drift {:e}, min y {:e} vs η^N {:e}{}",
            rep.mass_residual,
            rep.peak_l1,
            if literal { "met" } else { "exceeded" },
            rep.y_residual,
            rep.min_y,
            rep.y_floor,
            if v.is_empty() { String::new() } else { format!("; {}", v.join("; ")) }
        ),
    )
}

fn invariant_json(rep: &InvariantReport) -> Value {
    serde_json::to_value(rep).expect("report serializes")
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioReport, CliError> {
    cfg.validate()?;
    match cfg.scenario {
        Scenario::Consensus => consensus(cfg),
        Scenario::Scale => scale(cfg),
        Scenario::AttackHbc => attack_hbc(cfg),
        Scenario::AttackEve => attack_eve(cfg),
        Scenario::Deniability => deniability(cfg),
        Scenario::BoundCheck => bound_check(cfg),
        Scenario::GraphGen => graph_gen(cfg),
    }
}

fn first_below(series: &[f64], eps: f64) -> Option<usize> {
    series.iter().position(|&e| e < eps)
}

/// Nondecreasing with "never" ordered after every round.
fn nondecreasing(hits: &[Option<usize>]) -> bool {
    let key = |h: &Option<usize>| h.unwrap_or(usize::MAX);
    hits.windows(2).all(|w| key(&w[0]) <= key(&w[1]))
}

fn consensus(cfg: &ScenarioConfig) -> Result<ScenarioReport, CliError> {
    let seed = cfg.require_seed()?;
    let g = cfg.graph.build()?;
    let d = cfg.dim();
    let x0 = cfg.x0.realize(g.n(), &mut rng_stream(seed, 0))?;
    let schedule = build_schedule(&g, &schedule_params(cfg, cfg.horizon, cfg.rounds, d), &mut rng_stream(seed, 1))?;
    let run = private_run(&g, &x0, &schedule, cfg.rounds)?.with_seed(seed);
    let inv = check_invariants(&run);
    let mut checks = vec![invariant_check(&inv)];
    let mut out = Outputs::new(&cfg.out)?;
    if !checks[0].passed {
        return Ok(ScenarioReport {
            scenario: cfg.scenario,
            checks,
            files: out.files,
            summary: json!({ "invariants": invariant_json(&inv) }),
        });
    }

    let avg = run.average();
    let hit = run.first_hit(&avg, cfg.eps);
    checks.push(Check::new(
        "consensus",
        hit.is_some(),
        match hit {
            Some(k) => format!("max_i ‖z_i − x̄⁰‖ < {:e} first at round {k}", cfg.eps),
            None => format!("not within {:e} after {} rounds", cfg.eps, cfg.rounds),
        },
    ));
    let series = consensus_error(&run);
    let bound = bound_constants(&run, cfg.eta);
    let bc = verify_bound(&series, &bound);
    checks.push(Check::new(
        "rate bound",
        bc.holds,
        format!("c = {:e}, ρ = {}, worst e(k)/cρ^k = {:e} at k = {}", bound.c, bound.rho, bc.worst_ratio, bc.worst_k),
    ));
    let fit = fit_linear_rate(&informative_tail(&run, &series), cfg.tail_fraction)?;
    let factor = fit.factor();
    checks.push(Check::new(
        "empirical rate",
        factor.is_none_or(|f| f < 1.0),
        format!("{fit:?}"),
    ));

    let mut sweep = Vec::new();
    for &k in &cfg.horizon_sweep {
        let s = build_schedule(&g, &schedule_params(cfg, k, cfg.rounds, d), &mut rng_stream(seed, 1))?;
        let r = private_run(&g, &x0, &s, cfg.rounds)?;
        sweep.push((k, first_below(&consensus_error(&r), cfg.eps)));
    }
    let hits: Vec<Option<usize>> = sweep.iter().map(|s| s.1).collect();
    if sweep.len() > 1 {
        checks.push(Check::new(
            "horizon delay",
            nondecreasing(&hits),
            sweep
                .iter()
                .map(|(k, h)| match h {
                    Some(r) => format!("K={k}: e(k) < {:e} at {r}", cfg.eps),
                    None => format!("K={k}: never"),
                })
                .collect::<Vec<_>>()
                .join(", "),
        ));
    }

    let mut buf = Vec::new();
    run.write_trajectory_csv(&mut buf)?;
    out.write("trajectory.csv", &buf)?;
    let mut buf = Vec::new();
    write_error_csv(&series, &mut buf)?;
    out.write("error.csv", &buf)?;
    out.write("transcript.json", run.transcript_json().as_bytes())?;
    out.write("bound.json", bound.to_json(&bc).as_bytes())?;
    let summary = json!({
        "scenario": cfg.scenario.name(),
        "seed": seed,
        "n": g.n(),
        "dim": d,
        "K": cfg.horizon,
        "eta": cfg.eta,
        "rounds": cfg.rounds,
        "average": avg,
        "first_hit": hit,
        "final_error": series.last(),
        "fit": fit,
        "bound": { "c": bound.c, "rho": bound.rho, "holds": bc.holds, "worst_ratio": bc.worst_ratio },
        "horizon_sweep": sweep.iter().map(|(k, h)| json!({ "K": k, "first_below_eps": h })).collect::<Vec<_>>(),
        "invariants": invariant_json(&inv),
    });
    out.json("summary.json", &summary)?;
    Ok(ScenarioReport {
        scenario: cfg.scenario,
        checks,
        files: out.files,
        summary,
    })
}

fn scale(cfg: &ScenarioConfig) -> Result<ScenarioReport, CliError> {
    let seed = cfg.require_seed()?;
    let started = Instant::now();
    let g = cfg.graph.build()?;
    let d = cfg.dim();
    let x0 = cfg.x0.realize(g.n(), &mut rng_stream(seed, 0))?;
    let schedule = build_schedule(&g, &schedule_params(cfg, cfg.horizon, cfg.rounds, d), &mut rng_stream(seed, 1))?;
    let mut sim = Simulator::new(&g, &schedule, x0.clone())?;
    let n = g.n() as f64;
    let avg: Vec<f64> = (0..d).map(|c| x0.iter().skip(c).step_by(d).sum::<f64>() / n).collect();
    let mut tracker = InvariantTracker::new(sim.state(), cfg.eta);
    let mut series = vec![state_error(sim.state(), &avg)];
    for _ in 0..cfg.rounds {
        sim.step()?;
        tracker.observe(sim.state());
        series.push(state_error(sim.state(), &avg));
    }
    let elapsed = started.elapsed().as_secs_f64();
    let inv = tracker.finish();
    let e0 = series[0];
    let ratios: Vec<f64> = series.iter().map(|e| e / e0).collect();
    let hit = first_below(&ratios, cfg.ratio_eps);
    let floor = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let peak = inv.peak_l1;
    let start = cfg.horizon + 1;
    let tail_floor = 1e-14 * ((g.n() * d) as f64).sqrt() * peak;
    let informative = crate::analysis::truncate_at_floor(&series[start.min(series.len())..], tail_floor);
    let fit = fit_linear_rate(informative, cfg.tail_fraction)?;
    let checks = vec![
        invariant_check(&inv),
        Check::new(
            "relative error",
            hit.is_some(),
            match hit {
                Some(k) => format!("e(k)/e(0) < {:e} at round {k}", cfg.ratio_eps),
                None => format!(
                    "e(k)/e(0) bottoms out at {floor:e} within {} rounds (peak ‖x‖₁ {peak:e})",
                    cfg.rounds
                ),
            },
        ),
        Check::new("empirical rate", fit.factor().is_none_or(|f| f < 1.0), format!("{fit:?}")),
    ];
    let mut out = Outputs::new(&cfg.out)?;
    let mut buf = Vec::new();
    write_error_csv(&series, &mut buf)?;
    out.write("error.csv", &buf)?;
    let summary = json!({
        "scenario": cfg.scenario.name(),
        "seed": seed,
        "n": g.n(),
        "edges": g.edge_count(),
        "dim": d,
        "K": cfg.horizon,
        "eta": cfg.eta,
        "rounds": cfg.rounds,
        "first_ratio_below": hit,
        "min_ratio": floor,
        "fit": fit,
        "elapsed_seconds": elapsed,
        "invariants": invariant_json(&inv),
    });
    out.json("summary.json", &summary)?;
    Ok(ScenarioReport {
        scenario: cfg.scenario,
        checks,
        files: out.files,
        summary,
    })
}

/// Summary statistics of a sample.
pub fn describe(values: &[f64]) -> Value {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    json!({
        "mean": mean,
        "std": var.sqrt(),
        "min": sorted.first(),
        "q05": quantile(&sorted, 0.05),
        "q25": quantile(&sorted, 0.25),
        "median": quantile(&sorted, 0.5),
        "q75": quantile(&sorted, 0.75),
        "q95": quantile(&sorted, 0.95),
        "max": sorted.last(),
    })
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt()
}

pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile(&sorted, 0.5)
}

/// Runs `trials` fresh schedules with fixed `x0` and applies `attack` to each.
fn trial_batch<F>(
    g: &Digraph,
    x0: &[f64],
    params: &ScheduleParams,
    seed: u64,
    stream: u64,
    trials: usize,
    attack: F,
) -> Result<Vec<Vec<AttackReport>>, CliError>
where
    F: Fn(&RunRecord) -> Result<Vec<AttackReport>, CliError> + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = build_schedule(g, params, &mut rng_stream(seed, stream + t as u64))?;
            let run = private_run(g, x0, &s, params.rounds)?;
            attack(&run)
        })
        .collect()
}

fn privacy_checks(label: &str, reports: &[AttackReport], truth: f64) -> Vec<Check> {
    let est: Vec<f64> = reports.iter().map(|r| r.estimate).collect();
    let rel: Vec<f64> = reports.iter().filter_map(AttackReport::rel_error).collect();
    let sd = std_dev(&est);
    let med = median(&rel);
    vec![
        Check::new(
            &format!("{label} spread"),
            sd > 0.1 * truth.abs(),
            format!("std of estimates {sd:.4} vs 10% of |x| = {:.4} over {} trials", 0.1 * truth.abs(), est.len()),
        ),
        Check::new(
            &format!("{label} error"),
            med > 0.1,
            format!("median relative error {med:.4}"),
        ),
    ]
}

fn recovery_check(label: &str, reports: &[AttackReport]) -> Check {
    let errs: Vec<f64> = reports.iter().filter_map(AttackReport::rel_error).collect();
    let ok = errs.iter().filter(|e| **e <= RECOVERY_TOL).count();
    let worst = errs.iter().copied().fold(0.0, f64::max);
    Check::new(
        label,
        ok == reports.len(),
        format!("{ok}/{} within {RECOVERY_TOL:e}, worst {worst:e}", reports.len()),
    )
}

fn attack_hbc(cfg: &ScenarioConfig) -> Result<ScenarioReport, CliError> {
    let seed = cfg.require_seed()?;
    let g = cfg.graph.build()?;
    if cfg.dim() != 1 {
        return Err(CliError::Config("attack-hbc uses scalar states".into()));
    }
    let t = cfg.target;
    let x0 = cfg.x0.realize(g.n(), &mut rng_stream(seed, 0))?;
    let m = cfg.rounds;
    let params = schedule_params(cfg, cfg.horizon, m + 1, 1);
    let members = cfg.members.clone();
    let reports: Vec<AttackReport> = trial_batch(&g, &x0, &params, seed, TRIAL_STREAM, cfg.trials, |run| {
        let view = build_hbc_view(run, &members)?;
        Ok(vec![hbc_attack(&view, t, m)?.with_truth(x0[t])])
    })?
    .into_iter()
    .flatten()
    .collect();

    let legit = legitimate_neighbors(&g, &members, t);
    let legit_edges = g
        .in_edges(t)
        .iter()
        .chain(g.out_edges(t))
        .filter(|&&e| {
            let edge = g.edges()[e];
            !members.contains(&edge.from) && !members.contains(&edge.to)
        })
        .count();
    let (eqs, unk) = hbc_system_size(m, cfg.horizon, legit_edges);
    let mut checks = privacy_checks("insider estimate", &reports, x0[t]);
    let counts_ok = reports.iter().all(|r| r.equations == eqs && r.unknowns == unk && r.rank < r.unknowns);
    let max_rank = reports.iter().map(|r| r.rank).max().unwrap_or(0);
    checks.push(Check::new(
        "system size",
        counts_ok,
        format!("{eqs} equations, {unk} unknowns, rank at most {max_rank}"),
    ));

    let mut neighborhood: Vec<usize> = g.in_neighbors(t).iter().chain(g.out_neighbors(t)).copied().collect();
    neighborhood.sort_unstable();
    neighborhood.dedup();
    let controls: Vec<AttackReport> =
        trial_batch(&g, &x0, &params, seed, CONTROL_STREAM, cfg.control_trials, |run| {
            let view = build_hbc_view(run, &neighborhood)?;
            Ok(vec![full_neighborhood_reconstruction(&view, t)?.with_truth(x0[t])])
        })?
        .into_iter()
        .flatten()
        .collect();
    checks.push(recovery_check("full-neighborhood control", &controls));

    let mut out = Outputs::new(&cfg.out)?;
    let mut buf = Vec::new();
    write_reports_csv(&reports, &mut buf)?;
    out.write("attack.csv", &buf)?;
    let est: Vec<f64> = reports.iter().map(|r| r.estimate).collect();
    let rel: Vec<f64> = reports.iter().filter_map(AttackReport::rel_error).collect();
    let summary = json!({
        "scenario": cfg.scenario.name(),
        "seed": seed,
        "target": t + 1,
        "members": members.iter().map(|m| m + 1).collect::<Vec<_>>(),
        "legitimate_neighbors": legit.iter().map(|m| m + 1).collect::<Vec<_>>(),
        "truth": x0[t],
        "x0": x0,
        "M": m,
        "K": cfg.horizon,
        "trials": cfg.trials,
        "equations": eqs,
        "unknowns": unk,
        "max_rank": max_rank,
        "estimate": describe(&est),
        "rel_error": describe(&rel),
        "control_neighborhood": neighborhood.iter().map(|m| m + 1).collect::<Vec<_>>(),
        "control_max_rel_error": controls.iter().filter_map(AttackReport::rel_error).fold(0.0, f64::max),
    });
    out.json("summary.json", &summary)?;
    Ok(ScenarioReport {
        scenario: cfg.scenario,
        checks,
        files: out.files,
        summary,
    })
}

/// An 8x8 glyph of the digit zero, row-major, intensities in [0, 255].
pub fn digit_zero_glyph() -> Vec<f64> {
    const ROWS: [&str; 8] = [
        "..####..", ".##..##.", "##....##", "##....##", "##....##", "##....##", ".##..##.", "..####..",
    ];
    ROWS.iter()
        .flat_map(|r| r.chars().map(|c| if c == '#' { 255.0 } else { 0.0 }))
        .collect()
}

fn attack_eve(cfg: &ScenarioConfig) -> Result<ScenarioReport, CliError> {
    let seed = cfg.require_seed()?;
    let g = cfg.graph.build()?;
    if cfg.dim() != 1 {
        return Err(CliError::Config("attack-eve takes scalar x0; the vector variant is built in".into()));
    }
    let t = cfg.target;
    let k_hor = cfg.horizon;
    let x0 = cfg.x0.realize(g.n(), &mut rng_stream(seed, 0))?;
    let m = cfg.rounds;
    let params = schedule_params(cfg, k_hor, m + 1, 1);
    let reports: Vec<AttackReport> = trial_batch(&g, &x0, &params, seed, TRIAL_STREAM, cfg.trials, |run| {
        Ok(vec![eve_attack(&build_eve_view(run), t, m, k_hor)?.with_truth(x0[t])])
    })?
    .into_iter()
    .flatten()
    .collect();
    let mut checks = privacy_checks("eavesdropper estimate", &reports, x0[t]);

    let mut unit = params.clone();
    unit.sigma = SigmaDist::Constant(1.0);
    let controls: Vec<AttackReport> = trial_batch(&g, &x0, &unit, seed, CONTROL_STREAM, cfg.control_trials, |run| {
        let view = build_eve_view(run);
        Ok(vec![eve_reconstruction_sigma1(&view, t, k_hor, run.schedule.sigma_rows())?.with_truth(x0[t])])
    })?
    .into_iter()
    .flatten()
    .collect();
    checks.push(recovery_check("unit-sigma control", &controls));

    // Vector variant: the target holds a digit glyph, the rest N(0, 50).
    let glyph = digit_zero_glyph();
    let d = glyph.len();
    let mut vx0 = super::config::InitialSpec::parse("gaussian(0,50)")?
        .realize(g.n() * d, &mut rng_stream(seed, 0))?;
    vx0[t * d..(t + 1) * d].copy_from_slice(&glyph);
    let vparams = schedule_params(cfg, k_hor, m + 1, d);
    let per_trial = trial_batch(&g, &vx0, &vparams, seed, VECTOR_STREAM, cfg.vector_trials, |run| {
        let view = build_eve_view(run);
        (0..d)
            .map(|c| Ok(eve_attack_coord(&view, t, m, k_hor, c)?.with_truth(glyph[c])))
            .collect()
    })?;
    let vec_err: Vec<f64> = per_trial
        .iter()
        .map(|reps| {
            let num: f64 = reps.iter().map(|r| (r.estimate - r.truth.unwrap_or(0.0)).powi(2)).sum();
            let den: f64 = glyph.iter().map(|v| v * v).sum();
            num.sqrt() / (1.0 + den.sqrt())
        })
        .collect();
    let vmed = median(&vec_err);
    checks.push(Check::new(
        "vector eavesdropper error",
        vmed > 0.1,
        format!("median ‖x̂ − x‖/(1+‖x‖) = {vmed:.4} over {} trials, d = {d}", per_trial.len()),
    ));

    let mut out = Outputs::new(&cfg.out)?;
    let mut buf = Vec::new();
    write_reports_csv(&reports, &mut buf)?;
    out.write("attack.csv", &buf)?;
    let mut vcsv = csv::Writer::from_writer(Vec::new());
    vcsv.write_record(["trial", "coord", "true", "estimate"])
        .map_err(|e| CliError::Io(e.to_string()))?;
    for (trial, reps) in per_trial.iter().enumerate() {
        for r in reps {
            vcsv.serialize((trial, r.coord + 1, r.truth.unwrap_or(f64::NAN), r.estimate))
                .map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    out.write("attack_vector.csv", &vcsv.into_inner().map_err(|e| CliError::Io(e.to_string()))?)?;
    let est: Vec<f64> = reports.iter().map(|r| r.estimate).collect();
    let rel: Vec<f64> = reports.iter().filter_map(AttackReport::rel_error).collect();
    let summary = json!({
        "scenario": cfg.scenario.name(),
        "seed": seed,
        "target": t + 1,
        "truth": x0[t],
        "x0": x0,
        "M": m,
        "K": k_hor,
        "trials": cfg.trials,
        "equations": 1,
        "unknowns": k_hor + 2,
        "estimate": describe(&est),
        "rel_error": describe(&rel),
        "control_max_rel_error": controls.iter().filter_map(AttackReport::rel_error).fold(0.0, f64::max),
        "vector_trials": per_trial.len(),
        "vector_dim": d,
        "vector_rel_error": describe(&vec_err),
    });
    out.json("summary.json", &summary)?;
    Ok(ScenarioReport {
        scenario: cfg.scenario,
        checks,
        files: out.files,
        summary,
    })
}

fn deniability(cfg: &ScenarioConfig) -> Result<ScenarioReport, CliError> {
    let seed = cfg.require_seed()?;
    let g = cfg.graph.build()?;
    if cfg.dim() != 1 {
        return Err(CliError::Config("deniability uses scalar states".into()));
    }
    let x0 = cfg.x0.realize(g.n(), &mut rng_stream(seed, 0))?;
    let schedule = build_schedule(&g, &schedule_params(cfg, cfg.horizon, cfg.rounds, 1), &mut rng_stream(seed, 1))?;
    let run = run_private_push_sum(&g, &x0, &schedule, cfg.rounds)?.with_seed(seed);
    let inv = check_invariants(&run);
    let mut checks = vec![invariant_check(&inv)];
    let mut rng = rng_stream(seed, WITNESS_STREAM);
    let mut cases = Vec::new();
    let sum0: f64 = x0.iter().sum();
    let l1: f64 = x0.iter().map(|v| v.abs()).sum();
    for &delta in &cfg.deltas {
        let (name, outcome) = (format!("insider witness δ = {delta}"), (|| {
            let w = construct_deniable_run_hbc(&run, &cfg.members, cfg.target, cfg.legit, delta, &mut rng)?;
            let c = verify_hbc_witness(&run, &cfg.members, &w)?;
            Ok::<_, CliError>((w, c))
        })());
        match outcome {
            Ok((w, c)) => {
                let drift = (w.x0.iter().sum::<f64>() - sum0).abs();
                let sum_ok = drift <= 1e-9 * (1.0 + l1 + delta.abs());
                checks.push(Check::new(
                    &name,
                    c.passes(REPLAY_TOL) && sum_ok,
                    format!(
                        "{:?} case via agent {}, view deviation {:e}, ‖x̃⁰ − x⁰‖ = {:e}, sum drift {drift:e}",
                        w.case,
                        w.legit + 1,
                        c.max_view_deviation,
                        c.x0_distance
                    ),
                ));
                let mut doc = serde_json::to_value(WitnessDocument::hbc(&g, &w, &c)).expect("serializes");
                doc["delta"] = json!(delta);
                doc["check"] = serde_json::to_value(c).expect("serializes");
                cases.push(doc);
            }
            Err(e) => {
                checks.push(Check::new(&name, false, e.to_string()));
                cases.push(json!({ "kind": "hbc", "delta": delta, "error": e.to_string() }));
            }
        }
    }
    for &ds in &cfg.delta_sigmas {
        let name = format!("eavesdropper witness Δσ = {ds}");
        match construct_deniable_run_eve(&run, ds, &mut rng)
            .map_err(CliError::from)
            .and_then(|w| Ok((verify_eve_witness(&run, &w)?, w)))
        {
            Ok((c, w)) => {
                checks.push(Check::new(
                    &name,
                    c.passes(REPLAY_TOL),
                    format!(
                        "view deviation {:e}, ‖x̃⁰ − x⁰‖ = {:e}, σ̃(0) = {}",
                        c.max_view_deviation, c.x0_distance, w.sigma0
                    ),
                ));
                let mut doc = serde_json::to_value(WitnessDocument::eve(&g, &w, &c)).expect("serializes");
                doc["delta_sigma"] = json!(ds);
                doc["check"] = serde_json::to_value(c).expect("serializes");
                cases.push(doc);
            }
            Err(e) => {
                checks.push(Check::new(&name, false, e.to_string()));
                cases.push(json!({ "kind": "eve", "delta_sigma": ds, "error": e.to_string() }));
            }
        }
    }
    let mut out = Outputs::new(&cfg.out)?;
    let doc = json!({
        "seed": seed,
        "x0": x0,
        "target": cfg.target + 1,
        "members": cfg.members.iter().map(|m| m + 1).collect::<Vec<_>>(),
        "tolerance": REPLAY_TOL,
        "cases": cases,
    });
    out.json("deniability.json", &doc)?;
    let passed = checks.iter().filter(|c| c.passed).count();
    let summary = json!({
        "scenario": cfg.scenario.name(),
        "seed": seed,
        "cases_passed": passed,
        "cases": checks.len(),
        "invariants": invariant_json(&inv),
    });
    out.json("summary.json", &summary)?;
    Ok(ScenarioReport {
        scenario: cfg.scenario,
        checks,
        files: out.files,
        summary,
    })
}

fn bound_check(cfg: &ScenarioConfig) -> Result<ScenarioReport, CliError> {
    let seed = cfg.require_seed()?;
    let g = cfg.graph.build()?;
    let d = cfg.dim();
    let x0 = cfg.x0.realize(g.n(), &mut rng_stream(seed, 0))?;
    let params = schedule_params(cfg, cfg.horizon, cfg.rounds, d);
    let rows: Vec<Value> = (0..cfg.runs)
        .into_par_iter()
        .map(|r| {
            let s = build_schedule(&g, &params, &mut rng_stream(seed, TRIAL_STREAM + r as u64))?;
            let run = private_run(&g, &x0, &s, cfg.rounds)?;
            let series = consensus_error(&run);
            let b = bound_constants(&run, cfg.eta);
            let c = verify_bound(&series, &b);
            let fit = fit_linear_rate(&informative_tail(&run, &series), cfg.tail_fraction)?;
            Ok(json!({
                "run": r,
                "c": b.c,
                "rho": b.rho,
                "holds": c.holds,
                "worst_k": c.worst_k,
                "worst_ratio": c.worst_ratio,
                "fit": fit,
                "fit_below_one": fit.factor().is_none_or(|f| f < 1.0),
            }))
        })
        .collect::<Result<_, CliError>>()?;
    let holds = rows.iter().filter(|r| r["holds"] == true).count();
    let fits = rows.iter().filter(|r| r["fit_below_one"] == true).count();
    let worst = rows.iter().filter_map(|r| r["worst_ratio"].as_f64()).fold(0.0, f64::max);
    let checks = vec![
        Check::new(
            "rate bound",
            holds == rows.len(),
            format!("{holds}/{} runs within cρ^k, worst ratio {worst:e}", rows.len()),
        ),
        Check::new("empirical rate", fits == rows.len(), format!("{fits}/{} tails contract", rows.len())),
    ];
    let mut out = Outputs::new(&cfg.out)?;
    out.json("bound.json", &Value::Array(rows))?;
    let summary = json!({
        "scenario": cfg.scenario.name(),
        "seed": seed,
        "runs": cfg.runs,
        "holds": holds,
        "fits_below_one": fits,
        "worst_ratio": worst,
    });
    out.json("summary.json", &summary)?;
    Ok(ScenarioReport {
        scenario: cfg.scenario,
        checks,
        files: out.files,
        summary,
    })
}

fn graph_gen(cfg: &ScenarioConfig) -> Result<ScenarioReport, CliError> {
    let g = cfg.graph.build()?;
    let checks = vec![Check::new(
        "strong connectivity",
        g.is_strongly_connected(),
        format!("{} agents, {} edges, {} components", g.n(), g.edge_count(), g.scc_count()),
    )];
    let mut out = Outputs::new(&cfg.out)?;
    out.write("graph.txt", g.to_text().as_bytes())?;
    let summary = json!({
        "scenario": cfg.scenario.name(),
        "n": g.n(),
        "edges": g.edge_count(),
        "max_out_degree": g.max_out_degree(),
        "strongly_connected": g.is_strongly_connected(),
    });
    out.json("summary.json", &summary)?;
    Ok(ScenarioReport {
        scenario: cfg.scenario,
        checks,
        files: out.files,
        summary,
    })
}
