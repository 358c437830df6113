// SPDX-License-Identifier: MIT OR Apache-2.0
use std::f64::consts::PI;

use frackpp::fronts::{records_at, Direction, Level};
use frackpp::solver::{
    init_state, run, steady_residual, steady_state, Collect, FrontGuard, InitialData, Scheme,
    SolutionState, SolverConfig, StopReason,
};
use frackpp::{Error, FracOrder, PeriodicGrid, ScalarField};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cell(n: usize) -> PeriodicGrid {
    PeriodicGrid::new(1, &[n], &[1.0], false).unwrap()
}

fn unit_mu() -> ScalarField {
    ScalarField::constant(&cell(8), 1.0)
}

fn cos_mu() -> ScalarField {
    ScalarField::from_fn(&cell(32), |x| 1.0 + 0.5 * (2.0 * PI * x[0]).cos()).unwrap()
}

fn cfg(dt: f64, t_end: f64, every: f64) -> SolverConfig {
    SolverConfig {
        dt,
        t_end,
        scheme: Scheme::Imex1,
        snapshot_times: SolverConfig::regular_times(every, t_end),
        front_guard: 0.8,
    }
}

fn guard() -> FrontGuard {
    FrontGuard {
        level: 0.1,
        directions: Direction::axes(1),
    }
}

#[test]
fn zero_length_run_emits_initial_snapshot_only() {
    let ord = FracOrder::new(0.25, 1).unwrap();
    let g = PeriodicGrid::cube(1, 256, 40.0, true).unwrap();
    let u0 = InitialData::Indicator { radius: 1.0, height: 1.0 }.sample(&g, ord).unwrap();
    let mut st = init_state(&u0, &unit_mu(), ord, &g).unwrap();
    let mut col = Collect::default();
    let rep = run(&mut st, &cfg(0.05, 0.0, 1.0), Some(&guard()), &mut [&mut col]).unwrap();
    assert_eq!(rep.steps, 0);
    assert_eq!(rep.stop, StopReason::TEnd);
    assert_eq!(col.frames.len(), 1);
    assert_eq!(rep.lines.len(), 1);
    assert!(rep.lines[0].mass > 0.0);
}

#[test]
fn tiny_box_trips_the_guard() {
    let ord = FracOrder::new(0.25, 1).unwrap();
    let g = PeriodicGrid::cube(1, 64, 4.0, true).unwrap();
    let u0 = InitialData::Indicator { radius: 1.0, height: 1.0 }.sample(&g, ord).unwrap();
    let mut st = init_state(&u0, &unit_mu(), ord, &g).unwrap();
    let rep = run(&mut st, &cfg(0.05, 8.0, 0.5), Some(&guard()), &mut []).unwrap();
    assert_eq!(rep.stop, StopReason::FrontGuard);
    assert!(rep.t < 8.0);
    assert_eq!(rep.lines.last().unwrap().stop, Some(StopReason::FrontGuard));
}

#[test]
fn fronts_grow_monotonically() {
    let ord = FracOrder::new(0.25, 1).unwrap();
    let g = PeriodicGrid::cube(1, 2048, 400.0, true).unwrap();
    let u0 = InitialData::Indicator { radius: 1.0, height: 1.0 }.sample(&g, ord).unwrap();
    let mut st = init_state(&u0, &unit_mu(), ord, &g).unwrap();
    let mut col = Collect::default();
    let c = cfg(0.05, 4.0, 0.5);
    run(&mut st, &c, Some(&guard()), &mut [&mut col]).unwrap();
    let lvl = Level::new(0.1, 1.0).unwrap();
    let dirs = Direction::axes(1);
    let mut prev = vec![(0.0, 0.0); dirs.len()];
    for (t, u) in col.frames.iter() {
        let recs = records_at(u, *t, &[lvl], &dirs, 0.8 * 200.0).unwrap();
        for (k, r) in recs.iter().enumerate() {
            assert!(r.r_outer >= prev[k].1 && r.r_inner >= prev[k].0, "t {t}: {r:?}");
            prev[k] = (r.r_inner, r.r_outer);
        }
    }
    assert!(prev[0].1 > 5.0);
}

#[test]
fn snapshot_times_are_hit_exactly() {
    let ord = FracOrder::new(0.3, 1).unwrap();
    let g = PeriodicGrid::cube(1, 128, 32.0, true).unwrap();
    let u0 = InitialData::Gaussian { width: 1.0, height: 0.5 }.sample(&g, ord).unwrap();
    let mut st = init_state(&u0, &unit_mu(), ord, &g).unwrap();
    let mut c = cfg(0.07, 1.0, 1.0);
    c.snapshot_times = vec![0.0, 0.3, 0.55, 1.0];
    let mut col = Collect::default();
    run(&mut st, &c, None, &mut [&mut col]).unwrap();
    let times: Vec<f64> = col.frames.iter().map(|f| f.0).collect();
    assert_eq!(times, vec![0.0, 0.3, 0.55, 1.0]);
}

/// Random nonnegative data: a few Gaussians with algebraic tails.
fn random_data(g: &PeriodicGrid, rng: &mut ChaCha8Rng) -> ScalarField {
    let bumps: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(-5.0..5.0),
                rng.random_range(0.5..2.0),
                rng.random_range(0.1..1.0),
            )
        })
        .collect();
    ScalarField::from_fn(g, |x| {
        bumps
            .iter()
            .map(|&(c, w, h)| h / (1.0 + ((x[0] - c) / w).powi(2)).powf(0.75))
            .sum::<f64>()
    })
    .unwrap()
}

#[test]
fn discrete_comparison_principle() {
    let ord = FracOrder::new(0.25, 1).unwrap();
    let g = PeriodicGrid::cube(1, 512, 64.0, true).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let c = cfg(0.02, 2.0, 0.25);
    for _ in 0..5 {
        let lo = random_data(&g, &mut rng);
        let extra = random_data(&g, &mut rng);
        let hi = lo.zip_map(&extra, |a, b| a + 0.5 * b).unwrap();
        let mut a = init_state(&lo, &cos_mu(), ord, &g).unwrap();
        let mut b = init_state(&hi, &cos_mu(), ord, &g).unwrap();
        let mut ca = Collect::default();
        let mut cb = Collect::default();
        run(&mut a, &c, None, &mut [&mut ca]).unwrap();
        run(&mut b, &c, None, &mut [&mut cb]).unwrap();
        for ((t, ua), (_, ub)) in ca.frames.iter().zip(&cb.frames) {
            for (x, y) in ua.values().iter().zip(ub.values()) {
                assert!(*x <= y + 1e-10, "t {t}: {x} > {y}");
            }
        }
    }
}

fn smooth_run(scheme: Scheme, dt: f64) -> ScalarField {
    let ord = FracOrder::new(0.4, 1).unwrap();
    let g = PeriodicGrid::cube(1, 256, 32.0, true).unwrap();
    let u0 = InitialData::Gaussian { width: 2.0, height: 0.8 }.sample(&g, ord).unwrap();
    let mut st = init_state(&u0, &cos_mu(), ord, &g).unwrap();
    let mut c = cfg(dt, 1.0, 1.0);
    c.scheme = scheme;
    run(&mut st, &c, None, &mut []).unwrap();
    st.u
}

fn sup_gap(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn time_step_refinement_orders() {
    for (scheme, order, lo, hi) in [(Scheme::Imex1, 1.0, 0.8, 1.2), (Scheme::Imex2, 2.0, 1.7, 2.3)] {
        let reference = smooth_run(scheme, 0.0025);
        let e1 = sup_gap(&smooth_run(scheme, 0.04), &reference);
        let e2 = sup_gap(&smooth_run(scheme, 0.02), &reference);
        let rate = (e1 / e2).log2();
        println!("{scheme:?}: errors {e1:.3e} {e2:.3e}, observed order {rate:.3} (expected {order})");
        assert!(rate > lo && rate < hi, "{scheme:?} rate {rate}");
    }
}

#[test]
fn constant_mu_steady_state() {
    let ord = FracOrder::new(0.3, 1).unwrap();
    for c in [1.0, 2.5] {
        let mu = ScalarField::constant(&cell(16), c);
        let up = steady_state(&mu, ord, 1e-10).unwrap();
        assert!(up.values().iter().all(|v| (v - c).abs() < 1e-9));
    }
}

#[test]
fn periodic_steady_state_dominates_min_mu() {
    let ord = FracOrder::new(0.25, 1).unwrap();
    let mu = cos_mu();
    let tol = 1e-10;
    let up = steady_state(&mu, ord, tol).unwrap();
    assert!(steady_residual(&up, &mu, ord).unwrap() <= tol);
    assert!(up.min() >= mu.min() - tol);
    assert!(up.max() <= mu.max());
}

#[test]
fn steady_state_with_weak_mu() {
    let ord = FracOrder::new(0.5, 1).unwrap();
    let mu = ScalarField::constant(&cell(8), 1e-3);
    assert!(steady_state(&mu, ord, 1e-8).is_ok());
}

#[test]
fn converges_to_steady_state_on_compacts() {
    let ord = FracOrder::new(0.25, 1).unwrap();
    let mu = cos_mu();
    let up = steady_state(&mu, ord, 1e-10).unwrap();
    let g = PeriodicGrid::cube(1, 1024, 64.0, true).unwrap();
    let u0 = InitialData::Indicator { radius: 1.0, height: 1.0 }.sample(&g, ord).unwrap();
    let mut st = init_state(&u0, &mu, ord, &g).unwrap();
    run(&mut st, &cfg(0.05, 15.0, 15.0), None, &mut []).unwrap();
    let up_box = frackpp::solver::tile(&up, &g).unwrap();
    let mut worst: f64 = 0.0;
    for flat in 0..g.len() {
        if g.point(flat)[0].abs() <= 2.0 {
            worst = worst.max((st.u.values()[flat] - up_box.values()[flat]).abs());
        }
    }
    println!("window gap to u_+ at t = 15: {worst:.3e}");
    assert!(worst < 1e-2);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let ord = FracOrder::new(0.3, 2).unwrap();
    let g = PeriodicGrid::cube(2, 64, 16.0, true).unwrap();
    let mu = ScalarField::from_fn(&PeriodicGrid::cube(2, 16, 1.0, false).unwrap(), |x| {
        1.0 + 0.5 * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).cos()
    })
    .unwrap();
    let u0 = InitialData::Gaussian { width: 1.5, height: 1.0 }.sample(&g, ord).unwrap();
    let go = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut st = init_state(&u0, &mu, ord, &g).unwrap();
            run(&mut st, &cfg(0.05, 0.5, 0.5), None, &mut []).unwrap();
            st.u
        })
    };
    let one = go(1);
    let four = go(4);
    assert!(one.values().iter().zip(four.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn logistic_growth_of_constant_state() {
    let ord = FracOrder::new(0.25, 1).unwrap();
    let g = PeriodicGrid::cube(1, 16, 4.0, true).unwrap();
    let mut st = SolutionState::new(ScalarField::constant(&g, 0.5), ScalarField::constant(&g, 1.0), ord).unwrap();
    run(&mut st, &cfg(0.01, 1.0, 1.0), None, &mut []).unwrap();
    let exact = 1.0 / (1.0 + (-1.0f64).exp());
    assert!((st.u.values()[0] - exact).abs() < 1e-3);
}

#[test]
fn overshooting_step_is_an_error() {
    let ord = FracOrder::new(0.25, 1).unwrap();
    let g = PeriodicGrid::cube(1, 16, 4.0, true).unwrap();
    let mut st = SolutionState::new(ScalarField::constant(&g, 3.0), ScalarField::constant(&g, 1.0), ord).unwrap();
    assert!(matches!(st.step(1.0, Scheme::Imex1), Err(Error::Undershoot { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn positivity_is_preserved(seed in 0u64..1000, alpha in 0.1f64..0.9, dt in 0.01f64..0.1) {
        let ord = FracOrder::new(alpha, 1).unwrap();
        let g = PeriodicGrid::cube(1, 256, 32.0, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u0 = random_data(&g, &mut rng);
        let mut st = init_state(&u0, &cos_mu(), ord, &g).unwrap();
        for _ in 0..20 {
            st.step(dt, Scheme::Imex1).unwrap();
            prop_assert!(st.u.min() >= 0.0);
        }
    }
}
