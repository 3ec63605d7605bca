//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Lines tagged INFO are diagnostics, not criteria.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use pushsum_lab::adversary::{
    build_eve_view, build_hbc_view, construct_deniable_run_eve, construct_deniable_run_hbc, eve_attack,
    eve_reconstruction_sigma1, full_neighborhood_reconstruction, hbc_attack, AttackReport,
};
use pushsum_lab::analysis::{bound_constants, consensus_error, fit_linear_rate, informative_tail, state_error, verify_bound};
use pushsum_lab::engine::{
    max_deviation, run_private_push_sum, run_private_push_sum_vector, run_push_sum, NetworkState, Simulator,
};
use pushsum_lab::graph::{five_agent_network, generate_ring_plus_random, Digraph};
use pushsum_lab::weights::{
    build_conventional_schedule, build_schedule, max_eta, ScheduleKind, ScheduleParams, SigmaDist, WeightSchedule,
};

const G1_X0: [f64; 5] = [10.0, 15.0, 20.0, 25.0, 30.0];
const G1_AVERAGE: f64 = 20.0;
const ETA: f64 = 0.01;
const K: usize = 2;

const C1_EPS: f64 = 1e-6;
const C1_MAX_ROUNDS: usize = 500;
const C1_MAX_SECONDS: f64 = 1.0;
const C2_TOL: f64 = 1e-9;
const C2_FLOOR_SLACK: f64 = 1e-12;
const C3_TOL: f64 = 1e-12;
const C4_SLACK: f64 = 1e-9;
const C5_EQUATIONS: usize = 600;
const C5_UNKNOWNS: usize = 805;
const C6_TRIALS: usize = 1000;
const C6_SPREAD: f64 = 0.1;
const C6_MEDIAN_ERR: f64 = 0.1;
const C6_MAX_SECONDS: f64 = 300.0;
const C7_TOL: f64 = 1e-8;
const C7_TRIALS: usize = 50;
const C8_TOL: f64 = 1e-9;
const C8_DELTAS: [f64; 4] = [-5.0, 3.7, 100.0, 1e6];
const C8_DELTA_SIGMAS: [f64; 3] = [0.5, -2.0, 10.0];
const C9_TOL: f64 = 1e-12;
const C10_RATIO: f64 = 1e-6;
const C10_BUDGET: usize = 2000;
const C10_MAX_SECONDS: f64 = 120.0;
const C11_EPS: f64 = 1e-6;
const C11_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

struct Outcome {
    passed: bool,
    detail: String,
    info: Vec<String>,
}

impl Outcome {
    fn new(passed: bool, detail: String) -> Self {
        Self {
            passed,
            detail,
            info: Vec::new(),
        }
    }

    fn info(mut self, line: String) -> Self {
        self.info.push(line);
        self
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn g1_private(seed: u64, horizon: usize, rounds: usize) -> WeightSchedule {
    build_schedule(&five_agent_network(), &ScheduleParams::new(horizon, ETA, rounds), &mut rng(seed)).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn dense(g: &Digraph, self_w: &[f64], edge_w: &[f64]) -> Vec<Vec<f64>> {
    let n = g.n();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        m[i][i] = self_w[i];
    }
    for (e, edge) in g.edges().iter().enumerate() {
        m[edge.to][edge.from] = edge_w[e];
    }
    m
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

fn matvec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(v).map(|(p, q)| p * q).sum()).collect()
}

fn c1_exact_consensus() -> Outcome {
    let g = five_agent_network();
    let start = Instant::now();
    let s = g1_private(0, K, C1_MAX_ROUNDS);
    let run = run_private_push_sum(&g, &G1_X0, &s, C1_MAX_ROUNDS).unwrap();
    let hit = run.first_hit(&[G1_AVERAGE], C1_EPS);
    let secs = start.elapsed().as_secs_f64();
    let avg = run.average()[0];
    let ok = hit.is_some() && secs < C1_MAX_SECONDS && avg == G1_AVERAGE;
    Outcome::new(
        ok,
        format!(
            "x̄⁰ = {avg}; every |z_i − 20| < {C1_EPS:e} from round {hit:?} (limit {C1_MAX_ROUNDS}); {secs:.3}s; final max dev {:e}",
            max_deviation(run.final_state(), &[G1_AVERAGE])
        ),
    )
}

fn c2_conservation() -> Outcome {
    let sizes = [3usize, 5, 10];
    let horizons = [1usize, 2, 5];
    let mut violations = 0;
    let mut rounds_checked = 0;
    let mut worst_mass = 0.0f64;
    let mut worst_peak_scaled = 0.0f64;
    let mut y_bad = 0;
    let mut floor_bad = 0;
    let mut per_k = [0usize; 3];
    for r in 0..100u64 {
        let n = sizes[(r % 3) as usize];
        let ki = ((r / 3) % 3) as usize;
        let g = generate_ring_plus_random(n, 1, r).unwrap();
        let eta = 0.5 * max_eta(&g);
        let mut rg = rng(10_000 + r);
        let x0: Vec<f64> = (0..n).map(|_| rg.random_range(-50.0..50.0)).collect();
        let s = build_schedule(&g, &ScheduleParams::new(horizons[ki], eta, 100), &mut rg).unwrap();
        let run = run_private_push_sum(&g, &x0, &s, 100).unwrap();
        let l1: f64 = x0.iter().map(|v| v.abs()).sum();
        let s0: f64 = x0.iter().sum();
        let peak = run.states.iter().map(NetworkState::x_l1).fold(0.0, f64::max);
        let floor = eta.powi(n as i32);
        let mut run_bad = false;
        for st in &run.states {
            rounds_checked += 1;
            let drift = (st.x_sum()[0] - s0).abs();
            worst_mass = worst_mass.max(drift / (1.0 + l1));
            worst_peak_scaled = worst_peak_scaled.max(drift / (1.0 + peak));
            if drift > C2_TOL * (1.0 + l1) {
                run_bad = true;
            }
            if (st.y_sum() - n as f64).abs() > C2_TOL * n as f64 {
                y_bad += 1;
                run_bad = true;
            }
            if st.round >= 1 && st.min_y() < floor * (1.0 - C2_FLOOR_SLACK) {
                floor_bad += 1;
                run_bad = true;
            }
        }
        if run_bad {
            violations += 1;
            per_k[ki] += 1;
        }
    }
    Outcome::new(
        violations == 0,
        format!(
            "{violations}/100 runs violate ({rounds_checked} rounds checked); worst |Δ1ᵀx|/(1+‖x(0)‖₁) = {worst_mass:e}; y violations {y_bad}; floor violations {floor_bad}"
        ),
    )
    .info(format!(
        "C2 runs with violations by K = 1, 2, 5: {per_k:?}; worst |Δ1ᵀx|/(1+max_k ‖x(k)‖₁) = {worst_peak_scaled:e} (roundoff scale)"
    ))
}

fn c3_oracle() -> Outcome {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for n in 3..=6usize {
        for extra in 0..=(n - 2).min(2) {
            let g = generate_ring_plus_random(n, extra, (n * 10 + extra) as u64).unwrap();
            let mut rg = rng(n as u64);
            let s = build_conventional_schedule(&g, 0.5 * max_eta(&g), 30, &mut rg).unwrap();
            let x0: Vec<f64> = (0..n).map(|_| rg.random_range(-10.0..10.0)).collect();
            let run = run_push_sum(&g, &x0, &s, 30).unwrap();
            let mut phi: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
            for k in 0..=30 {
                if k > 0 {
                    let c = s.c2(k - 1);
                    phi = matmul(&dense(&g, &c.self_weight, &c.edge_weight), &phi);
                }
                let x = matvec(&phi, &x0);
                let y = matvec(&phi, &vec![1.0; n]);
                for i in 0..n {
                    let st = &run.states[k];
                    worst = worst.max(rel(st.x[i], x[i])).max(rel(st.y[i], y[i])).max(rel(st.z[i], x[i] / y[i]));
                    checked += 1;
                }
            }
        }
    }
    Outcome::new(
        worst <= C3_TOL,
        format!("{checked} agent-rounds vs explicit Φ(k:0) products; worst relative deviation {worst:e} (limit {C3_TOL:e})"),
    )
}

fn c4_bound() -> Outcome {
    let g = five_agent_network();
    let mut holds = 0;
    let mut fits = 0;
    let mut worst_ratio = 0.0f64;
    let mut worst_fit = 0.0f64;
    let mut g1_c = 0.0;
    for seed in 0..100u64 {
        let s = g1_private(1000 + seed, K, 200);
        let run = run_private_push_sum(&g, &G1_X0, &s, 200).unwrap();
        let e = consensus_error(&run);
        let b = bound_constants(&run, ETA);
        if seed == 0 {
            g1_c = b.c;
        }
        let chk = verify_bound(&e, &b);
        holds += chk.holds as usize;
        worst_ratio = worst_ratio.max(chk.worst_ratio);
        let f = fit_linear_rate(&informative_tail(&run, &e), 0.5).unwrap().factor().unwrap_or(0.0);
        fits += (f < 1.0) as usize;
        worst_fit = worst_fit.max(f);
    }
    let mut holds10 = 0;
    let mut fits10 = 0;
    for seed in 0..10u64 {
        let g = generate_ring_plus_random(10, 2, seed).unwrap();
        let mut rg = rng(2000 + seed);
        let x0: Vec<f64> = (0..10).map(|_| rg.random_range(-50.0..50.0)).collect();
        let s = build_schedule(&g, &ScheduleParams::new(K, 0.05, 300), &mut rg).unwrap();
        let run = run_private_push_sum(&g, &x0, &s, 300).unwrap();
        let e = consensus_error(&run);
        let b = bound_constants(&run, 0.05);
        let chk = verify_bound(&e, &b);
        holds10 += chk.holds as usize;
        worst_ratio = worst_ratio.max(chk.worst_ratio);
        let f = fit_linear_rate(&informative_tail(&run, &e), 0.5).unwrap().factor().unwrap_or(0.0);
        fits10 += (f < 1.0) as usize;
        worst_fit = worst_fit.max(f);
    }
    let ok = holds == 100 && holds10 == 10 && fits == 100 && fits10 == 10 && worst_ratio <= 1.0 + C4_SLACK;
    Outcome::new(
        ok,
        format!(
            "bound holds G1 {holds}/100, n=10 {holds10}/10 (worst e/cρ^k {worst_ratio:e}); tail fit < 1 G1 {fits}/100, n=10 {fits10}/10 (worst factor {worst_fit:.4})"
        ),
    )
    .info(format!("C4 G1 defaults (first seed): c = {g1_c:e}, ρ = {}", 1.0 - 2.5e-9))
}

fn c5_counts() -> Outcome {
    let g = five_agent_network();
    let x0 = [40.0, -3.0, 7.0, 1.5, 9.0];
    let s = g1_private(5, K, 201);
    let run = run_private_push_sum(&g, &x0, &s, 201).unwrap();
    let view = build_hbc_view(&run, &[3, 4]).unwrap();
    let rep = hbc_attack(&view, 0, 200).unwrap();
    let ok = rep.equations == C5_EQUATIONS && rep.unknowns == C5_UNKNOWNS && rep.rank < C5_UNKNOWNS;
    Outcome::new(
        ok,
        format!("{} equations, {} unknowns, numerical rank {}", rep.equations, rep.unknowns, rep.rank),
    )
}

fn std_dev(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn attack_x0() -> Vec<f64> {
    let mut rg = rng(40);
    let nd = Normal::new(0.0, 50f64.sqrt()).unwrap();
    let mut x0: Vec<f64> = (0..5).map(|_| nd.sample(&mut rg)).collect();
    x0[0] = 40.0;
    x0
}

fn c6_attack_failure() -> Outcome {
    let g = five_agent_network();
    let x0 = attack_x0();
    let start = Instant::now();
    let mut hbc = Vec::with_capacity(C6_TRIALS);
    let mut eve = Vec::with_capacity(C6_TRIALS);
    for t in 0..C6_TRIALS as u64 {
        let s = g1_private(100_000 + t, K, 201);
        let run = run_private_push_sum(&g, &x0, &s, 201).unwrap();
        hbc.push(hbc_attack(&build_hbc_view(&run, &[3, 4]).unwrap(), 0, 200).unwrap().with_truth(40.0));
        eve.push(eve_attack(&build_eve_view(&run), 0, 200, K).unwrap().with_truth(40.0));
    }
    let secs = start.elapsed().as_secs_f64();
    let stats = |r: &[AttackReport]| {
        let est: Vec<f64> = r.iter().map(|a| a.estimate).collect();
        let err: Vec<f64> = r.iter().filter_map(AttackReport::rel_error).collect();
        (std_dev(&est), median(&err), median(&est))
    };
    let (hs, he, hm) = stats(&hbc);
    let (es, ee, em) = stats(&eve);
    let spread = C6_SPREAD * 40.0;
    let hbc_ok = hs > spread && he > C6_MEDIAN_ERR;
    let eve_ok = es > spread && ee > C6_MEDIAN_ERR;
    Outcome::new(
        hbc_ok && eve_ok && secs < C6_MAX_SECONDS,
        format!(
            "insider: std {hs:.3} (need > {spread}), median rel err {he:.3} [{}]; eavesdropper: std {es:.3e}, median rel err {ee:.3} [{}]; {secs:.1}s",
            if hbc_ok { "ok" } else { "fails" },
            if eve_ok { "ok" } else { "fails" },
        ),
    )
    .info(format!(
        "C6 median estimates: insider {hm:.3}, eavesdropper {em:.3e} (truth 40); eavesdropper min-norm solution shrinks x⁰ toward 0"
    ))
}

fn c7_controls() -> Outcome {
    let g = five_agent_network();
    let x0 = attack_x0();
    let mut hbc_ok = 0;
    let mut hbc_worst = 0.0f64;
    let mut misses = Vec::new();
    for t in 0..C7_TRIALS as u64 {
        let s = g1_private(200_000 + t, K, 10);
        let run = run_private_push_sum(&g, &x0, &s, 10).unwrap();
        let r = full_neighborhood_reconstruction(&build_hbc_view(&run, &[1, 3, 4]).unwrap(), 0)
            .unwrap()
            .with_truth(40.0);
        let e = r.rel_error().unwrap();
        hbc_worst = hbc_worst.max(e);
        if e <= C7_TOL {
            hbc_ok += 1;
        } else {
            misses.push(format!("{e:.1e}@|x(K+1)|={:.1e}", run.states[K + 1].x[0].abs()));
        }
    }
    let mut eve_ok = 0;
    let mut eve_worst = 0.0f64;
    for t in 0..C7_TRIALS as u64 {
        let mut p = ScheduleParams::new(K, ETA, 10);
        p.sigma = SigmaDist::Constant(1.0);
        let s = build_schedule(&g, &p, &mut rng(300_000 + t)).unwrap();
        let run = run_private_push_sum(&g, &x0, &s, 10).unwrap();
        let r = eve_reconstruction_sigma1(&build_eve_view(&run), 0, K, s.sigma_rows())
            .unwrap()
            .with_truth(40.0);
        let e = r.rel_error().unwrap();
        eve_worst = eve_worst.max(e);
        eve_ok += (e <= C7_TOL) as usize;
    }
    let out = Outcome::new(
        hbc_ok == C7_TRIALS && eve_ok == C7_TRIALS,
        format!(
            "full neighborhood {hbc_ok}/{C7_TRIALS} within {C7_TOL:e} (worst {hbc_worst:e}); unit σ {eve_ok}/{C7_TRIALS} (worst {eve_worst:e})"
        ),
    );
    if misses.is_empty() {
        out
    } else {
        out.info(format!("C7 full-neighborhood misses (error@state magnitude): {}", misses.join(", ")))
    }
}

fn normwise(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max) / scale
}

fn c8_deniability() -> Outcome {
    let g = five_agent_network();
    let x0 = attack_x0();
    let mut pass = 0;
    let mut total = 0;
    let mut worst = 0.0f64;
    let mut worst_normwise = 0.0f64;
    let mut wr = rng(8);
    for seed in 0..10u64 {
        let s = g1_private(400_000 + seed, K, 200);
        let run = run_private_push_sum(&g, &x0, &s, 200).unwrap();
        for &d in &C8_DELTAS {
            total += 1;
            let w = construct_deniable_run_hbc(&run, &[3, 4], 0, None, d, &mut wr).unwrap();
            let alt = run_private_push_sum(&g, &w.x0, &w.schedule, 200).unwrap();
            let (va, vb) = (build_hbc_view(&run, &[3, 4]).unwrap(), build_hbc_view(&alt, &[3, 4]).unwrap());
            let dev = va.max_deviation(&vb).unwrap();
            let sum_ok = (w.x0.iter().sum::<f64>() - x0.iter().sum::<f64>()).abs() <= 1e-9 * (1.0 + d.abs());
            worst = worst.max(dev);
            worst_normwise = worst_normwise.max(normwise(&va.flatten(), &vb.flatten()));
            if dev <= C8_TOL && w.x0 != x0 && sum_ok {
                pass += 1;
            }
        }
        for &ds in &C8_DELTA_SIGMAS {
            total += 1;
            let w = construct_deniable_run_eve(&run, ds, &mut wr).unwrap();
            let alt = run_private_push_sum(&g, &w.x0, &w.schedule, 200).unwrap();
            let (va, vb) = (build_eve_view(&run), build_eve_view(&alt));
            let dev = va.max_deviation(&vb).unwrap();
            worst = worst.max(dev);
            worst_normwise = worst_normwise.max(normwise(&va.flatten(), &vb.flatten()));
            if dev <= C8_TOL && w.x0 != x0 {
                pass += 1;
            }
        }
    }
    Outcome::new(
        pass == total,
        format!("{pass}/{total} witnesses replay within {C8_TOL:e} per entry; worst per-entry deviation {worst:e}"),
    )
    .info(format!(
        "C8 worst deviation relative to the largest view entry: {worst_normwise:e} (f64 rounding of perturbed-round magnitudes)"
    ))
}

fn c9_vector_reduction() -> Outcome {
    let g = five_agent_network();
    let rounds = 50;
    let mut worst = 0.0f64;
    let mut worst_oracle = 0.0f64;
    // d = 1 through the vector path.
    let s1 = g1_private(9, K, rounds);
    let a = run_private_push_sum(&g, &G1_X0, &s1, rounds).unwrap();
    let b = run_private_push_sum_vector(&g, &G1_X0, &s1, rounds).unwrap();
    for (p, q) in a.states.iter().zip(&b.states) {
        for (u, v) in p.x.iter().chain(&p.y).zip(q.x.iter().chain(&q.y)) {
            worst = worst.max(rel(*u, *v));
        }
    }
    // Each coordinate of a d = 3 run against a scalar run with that coordinate's weights.
    let d = 3;
    let mut p = ScheduleParams::new(K, ETA, rounds);
    p.dim = d;
    let sv = build_schedule(&g, &p, &mut rng(10)).unwrap();
    let mut rg = rng(11);
    let x0: Vec<f64> = (0..5 * d).map(|i| 20.0 * (i % d) as f64 + rg.random_range(-5.0..5.0)).collect();
    let v = run_private_push_sum_vector(&g, &x0, &sv, rounds).unwrap();
    for c in 0..d {
        let sc = WeightSchedule::from_parts(
            &g,
            ScheduleKind::Private,
            ETA,
            1,
            (0..rounds).map(|k| sv.c2(k).clone()).collect(),
            (0..=K).map(|k| vec![sv.c1(k, c).clone()]).collect(),
            (0..=K).map(|k| vec![sv.sigma(k, c).unwrap()]).collect(),
        )
        .unwrap();
        let xc: Vec<f64> = (0..5).map(|i| x0[i * d + c]).collect();
        let r = run_private_push_sum(&g, &xc, &sc, rounds).unwrap();
        for (st, vt) in r.states.iter().zip(&v.states) {
            for i in 0..5 {
                worst = worst.max(rel(st.x[i], vt.x[i * d + c])).max(rel(st.y[i], vt.y[i]));
            }
        }
    }
    // Independent scalar oracle: x ← x + σ(C1 − diag)x − σ·diag(offdiag column sums)x for k ≤ K.
    let mut x = G1_X0.to_vec();
    let mut y = vec![1.0; 5];
    for k in 0..rounds {
        let c2 = s1.c2(k);
        let m2 = dense(&g, &c2.self_weight, &c2.edge_weight);
        if k <= K {
            let c1 = s1.c1(k, 0);
            let m1 = dense(&g, &c1.self_weight, &c1.edge_weight);
            let sigma = s1.sigma(k, 0).unwrap();
            let xi: Vec<f64> = (0..5)
                .map(|i| {
                    let inflow: f64 = (0..5).filter(|&j| j != i).map(|j| m1[i][j] * x[j]).sum();
                    let outflow: f64 = (0..5).filter(|&j| j != i).map(|j| m1[j][i] * x[i]).sum();
                    inflow - outflow
                })
                .collect();
            x = x.iter().zip(&xi).map(|(a, b)| a + sigma * b).collect();
        } else {
            x = matvec(&m2, &x);
        }
        y = matvec(&m2, &y);
        for i in 0..5 {
            worst_oracle = worst_oracle.max(rel(x[i], a.states[k + 1].x[i])).max(rel(y[i], a.states[k + 1].y[i]));
        }
    }
    let peak = a.states.iter().map(NetworkState::x_l1).fold(0.0, f64::max);
    Outcome::new(
        worst <= C9_TOL,
        format!("vector path with d = 1 and per-coordinate d = 3 split over {rounds} rounds; worst relative deviation {worst:e}"),
    )
    .info(format!(
        "C9 dense scalar oracle vs engine: worst relative deviation {worst_oracle:e}; peak ‖x(k)‖₁ = {peak:e}"
    ))
}

fn c10_scale() -> Outcome {
    let start = Instant::now();
    let g = generate_ring_plus_random(1000, 5, 1).unwrap();
    let d = 10;
    let mut rg = rng(10);
    let nd = Normal::new(0.0, 1.0).unwrap();
    let x0: Vec<f64> = (0..1000 * d).map(|_| nd.sample(&mut rg)).collect();
    let mut p = ScheduleParams::new(3, 0.05, C10_BUDGET);
    p.dim = d;
    let s = build_schedule(&g, &p, &mut rg).unwrap();
    let avg: Vec<f64> = (0..d).map(|c| x0.iter().skip(c).step_by(d).sum::<f64>() / 1000.0).collect();
    let mut sim = Simulator::new(&g, &s, x0).unwrap();
    let e0 = state_error(sim.state(), &avg);
    let mut hit = None;
    let mut best = f64::INFINITY;
    let mut best_k = 0;
    let mut peak = sim.state().x_l1();
    for k in 1..=C10_BUDGET {
        sim.step().unwrap();
        peak = peak.max(sim.state().x_l1());
        let r = state_error(sim.state(), &avg) / e0;
        if r < best {
            best = r;
            best_k = k;
        }
        if r < C10_RATIO && hit.is_none() {
            hit = Some(k);
            break;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        hit.is_some() && secs < C10_MAX_SECONDS,
        format!(
            "n = 1000, {} edges, d = {d}: e(k)/e(0) < {C10_RATIO:e} at {hit:?}; smallest ratio {best:e} at round {best_k} within {C10_BUDGET}; {secs:.1}s",
            g.edge_count()
        ),
    )
    .info(format!(
        "C10 peak ‖x(k)‖₁ = {peak:e}; rounding at that magnitude bounds the attainable ratio"
    ))
}

fn c11_delay() -> Outcome {
    let g = five_agent_network();
    let mut ok = true;
    let mut lines = Vec::new();
    for &seed in &C11_SEEDS {
        let hits: Vec<Option<usize>> = [1usize, 2, 5]
            .iter()
            .map(|&k| {
                let s = g1_private(seed, k, 500);
                let run = run_private_push_sum(&g, &G1_X0, &s, 500).unwrap();
                consensus_error(&run).iter().position(|&e| e < C11_EPS)
            })
            .collect();
        let key = |h: &Option<usize>| h.unwrap_or(usize::MAX);
        ok &= hits.windows(2).all(|w| key(&w[0]) <= key(&w[1]));
        let fmt = |h: &Option<usize>| h.map_or("never".to_string(), |r| r.to_string());
        lines.push(format!("seed {seed}: {}/{}/{}", fmt(&hits[0]), fmt(&hits[1]), fmt(&hits[2])));
    }
    Outcome::new(
        ok,
        format!("first e(k) < {C11_EPS:e} for K = 1/2/5 ('never' sorts last): {}", lines.join("; ")),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("C1 exact consensus", c1_exact_consensus),
        ("C2 conservation laws", c2_conservation),
        ("C3 oracle equivalence", c3_oracle),
        ("C4 rate bound", c4_bound),
        ("C5 underdeterminacy counts", c5_counts),
        ("C6 attack failure", c6_attack_failure),
        ("C7 positive controls", c7_controls),
        ("C8 deniability", c8_deniability),
        ("C9 vector/scalar reduction", c9_vector_reduction),
        ("C10 scalability", c10_scale),
        ("C11 horizon delay", c11_delay),
    ];
    // Optional positional filters select criteria by name prefix, e.g. `-- C6 C9`.
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected: Vec<_> = criteria
        .into_iter()
        .filter(|(name, _)| filters.is_empty() || filters.iter().any(|f| name.split(' ').next() == Some(f.as_str())))
        .collect();
    let mut failed = 0;
    for &(name, f) in &selected {
        let outcome = catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|_| Outcome::new(false, "panicked".to_string()));
        let tag = if outcome.passed { "PASS" } else { "FAIL" };
        println!("{tag} {name}: {}", outcome.detail);
        for line in &outcome.info {
            println!("INFO {line}");
        }
        failed += !outcome.passed as usize;
    }
    println!("{} of {} criteria pass", selected.len() - failed, selected.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
