use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pushsum_lab::adversary::{
    build_eve_view, build_hbc_view, construct_deniable_run_eve, construct_deniable_run_hbc, eve_recover_x_tail,
    eve_recover_y, hbc_attack,
};
use pushsum_lab::analysis::{bound_constants, state_error};
use pushsum_lab::engine::{check_invariants, replay, run_private_push_sum, NetworkState, RunRecord};
use pushsum_lab::graph::{five_agent_network, generate_ring_plus_random, Digraph};
use pushsum_lab::numerics::{dot, min_norm_least_squares, numerical_rank, DenseMatrix};
use pushsum_lab::weights::{build_schedule, max_eta, ScheduleParams};

/// Deviation allowed between two views, relative to the larger peak `‖x(k)‖₁`
/// of the two runs.
const VIEW_ROUNDOFF: f64 = 1e-10;

fn private_run(g: &Digraph, horizon: usize, rounds: usize, seed: u64) -> RunRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0: Vec<f64> = (0..g.n()).map(|_| rng.random_range(-50.0..50.0)).collect();
    let eta = 0.5 * max_eta(g);
    let s = build_schedule(g, &ScheduleParams::new(horizon, eta, rounds), &mut rng).unwrap();
    run_private_push_sum(g, &x0, &s, rounds).unwrap()
}

fn graph_strategy() -> impl Strategy<Value = Digraph> {
    (3usize..=10, 0usize..=2, any::<u64>())
        .prop_map(|(n, extra, seed)| generate_ring_plus_random(n, extra.min(n - 2), seed).unwrap())
}

fn peak_l1(run: &RunRecord) -> f64 {
    run.states.iter().map(NetworkState::x_l1).fold(0.0, f64::max)
}

fn view_gap(a: &[f64], b: &[f64], run: &RunRecord, alt: &RunRecord) -> (f64, f64) {
    let worst = a.iter().zip(b).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    (worst, 1.0f64.max(peak_l1(run)).max(peak_l1(alt)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mass_and_y_are_conserved_to_roundoff(g in graph_strategy(), horizon in 1usize..=5, seed in any::<u64>()) {
        let run = private_run(&g, horizon, 60, seed);
        let report = check_invariants(&run);
        prop_assert!(report.roundoff_violations().is_empty(), "{:?}", report);
        prop_assert!(report.min_y >= report.y_floor * (1.0 - 1e-12));
    }

    #[test]
    fn replay_reproduces_every_state(g in graph_strategy(), horizon in 1usize..=4, seed in any::<u64>()) {
        let run = private_run(&g, horizon, 40, seed);
        let states = replay(&run).unwrap();
        prop_assert_eq!(states.len(), run.states.len());
        for (a, b) in states.iter().zip(&run.states) {
            prop_assert_eq!(&a.x, &b.x);
            prop_assert_eq!(&a.y, &b.y);
        }
    }

    #[test]
    fn generated_graphs_are_strongly_connected(n in 3usize..=40, extra in 0usize..=4, seed in any::<u64>()) {
        let extra = extra.min(n - 2);
        let g = generate_ring_plus_random(n, extra, seed).unwrap();
        prop_assert!(g.is_strongly_connected());
        prop_assert_eq!(g.edge_count(), n * (extra + 1));
        prop_assert!(g.edges().iter().all(|e| e.from != e.to));
        prop_assert_eq!(numerical_rank(&g.incidence_matrix().to_dense()).unwrap(), n - 1);
    }

    #[test]
    fn y_weights_are_column_stochastic_above_eta(g in graph_strategy(), seed in any::<u64>()) {
        let eta = 0.5 * max_eta(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = build_schedule(&g, &ScheduleParams::new(2, eta, 20), &mut rng).unwrap();
        for k in 0..20 {
            let c = s.c2(k);
            prop_assert!(c.is_column_stochastic(&g, 1e-12));
            prop_assert!(c.supported_entries().all(|w| w > eta && w < 1.0));
        }
    }

    #[test]
    fn schedules_are_deterministic_in_the_seed(g in graph_strategy(), seed in any::<u64>()) {
        let params = ScheduleParams::new(3, 0.5 * max_eta(&g), 15);
        let a = build_schedule(&g, &params, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = build_schedule(&g, &params, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn least_squares_satisfies_normal_equations(rows in 1usize..9, cols in 1usize..9, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = DenseMatrix::from_row_major(rows, cols, data).unwrap();
        let b: Vec<f64> = (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ls = min_norm_least_squares(&a, &b).unwrap();
        let ax = a.matvec(&ls.solution).unwrap();
        let r: Vec<f64> = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
        let at = a.transpose();
        for j in 0..cols {
            prop_assert!(dot(at.row(j), &r).abs() < 1e-10);
        }
        prop_assert_eq!(ls.rank, rows.min(cols));
    }

    #[test]
    fn rank_ignores_row_order(rows in 1usize..8, cols in 1usize..8, rank in 1usize..5, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = rank.min(rows).min(cols);
        let u: Vec<Vec<f64>> = (0..rows).map(|_| (0..r).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let v: Vec<Vec<f64>> = (0..r).map(|_| (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let m: Vec<Vec<f64>> = u
            .iter()
            .map(|ui| (0..cols).map(|j| (0..r).map(|t| ui[t] * v[t][j]).sum()).collect())
            .collect();
        let mut reversed = m.clone();
        reversed.reverse();
        let a = numerical_rank(&DenseMatrix::from_rows(&m).unwrap()).unwrap();
        let b = numerical_rank(&DenseMatrix::from_rows(&reversed).unwrap()).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(a, r);
    }

    #[test]
    fn state_error_ignores_agent_labels(x in prop::collection::vec(-100.0f64..100.0, 2..12), shift in 1usize..11) {
        let avg = [x.iter().sum::<f64>() / x.len() as f64];
        let mut rotated = x.clone();
        rotated.rotate_left(shift % x.len());
        let a = state_error(&NetworkState::initial(x, 1), &avg);
        let b = state_error(&NetworkState::initial(rotated, 1), &avg);
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn bound_constants_are_pure(horizon in 1usize..=3, seed in any::<u64>()) {
        let g = five_agent_network();
        let run = private_run(&g, horizon, 30, seed);
        let before = run.clone();
        let eta = run.schedule.eta();
        let a = bound_constants(&run, eta);
        let b = bound_constants(&run, eta);
        prop_assert_eq!(a, b);
        prop_assert_eq!(run, before);
    }

    #[test]
    fn eavesdropper_recovers_y_and_the_x_tail(g in graph_strategy(), horizon in 1usize..=3, seed in any::<u64>()) {
        let run = private_run(&g, horizon, 40, seed);
        let view = build_eve_view(&run);
        let scale = 1.0 + peak_l1(&run);
        for t in 0..g.n() {
            let y = eve_recover_y(&view, t);
            for (k, yk) in y.iter().enumerate().take(run.states.len()) {
                prop_assert!((yk - run.states[k].y[t]).abs() < 1e-9 * g.n() as f64);
            }
            let tail = eve_recover_x_tail(&view, t, horizon, 0).unwrap();
            for (j, xk) in tail.iter().enumerate() {
                let k = horizon + 1 + j;
                prop_assert!((xk - run.states[k].x[t]).abs() < 1e-9 * scale);
            }
        }
    }

    #[test]
    fn coalition_system_is_underdetermined(m in 4usize..=20, seed in any::<u64>()) {
        let g = five_agent_network();
        let run = private_run(&g, 2, m + 2, seed);
        let view = build_hbc_view(&run, &[3, 4]).unwrap();
        let report = hbc_attack(&view, 0, m).unwrap();
        prop_assert!(report.equations < report.unknowns);
        prop_assert!(report.underdetermined());
        prop_assert!(report.rank <= report.equations);
    }

    #[test]
    fn deniable_witnesses_exist_for_any_shift(
        exponent in prop::sample::select(vec![0i32, 1, 3, 6]),
        negative in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let delta = if negative { -1.0 } else { 1.0 } * 10f64.powi(exponent);
        let g = five_agent_network();
        let run = private_run(&g, 2, 40, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xdead);
        let members = [3, 4];

        let w = construct_deniable_run_hbc(&run, &members, 0, None, delta, &mut rng).unwrap();
        let sum = |v: &[f64]| v.iter().sum::<f64>();
        prop_assert!((sum(&w.x0) - sum(&run.x0)).abs() <= 1e-12 * (1.0 + delta.abs()));
        prop_assert!((w.x0[0] - run.x0[0] - delta).abs() <= 1e-12 * (1.0 + delta.abs()));
        let alt = run_private_push_sum(&g, &w.x0, &w.schedule, run.rounds).unwrap();
        let (a, b) = (build_hbc_view(&run, &members).unwrap(), build_hbc_view(&alt, &members).unwrap());
        let (worst, scale) = view_gap(&a.flatten(), &b.flatten(), &run, &alt);
        prop_assert!(worst <= VIEW_ROUNDOFF * scale, "{} vs {}", worst, scale);

        let e = construct_deniable_run_eve(&run, delta, &mut rng).unwrap();
        prop_assert!((sum(&e.x0) - sum(&run.x0)).abs() <= 1e-9 * (1.0 + delta.abs()));
        prop_assert!(e.x0 != run.x0);
        let alt = run_private_push_sum(&g, &e.x0, &e.schedule, run.rounds).unwrap();
        let (worst, scale) = view_gap(&build_eve_view(&run).flatten(), &build_eve_view(&alt).flatten(), &run, &alt);
        prop_assert!(worst <= VIEW_ROUNDOFF * scale, "{} vs {}", worst, scale);
    }
}
