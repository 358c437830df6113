// SPDX-License-Identifier: MIT OR Apache-2.0
//! Cross-validation of the two discretizations of (−Δ)^α and of the K operator.

use std::f64::consts::PI;

use frackpp::fracop::{
    apply_k, apply_multiplier, default_cutoff, estimate_d, pv_quadrature, FractionalLaplacian,
};
use frackpp::{FracOrder, PeriodicGrid, ScalarField};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel_sup(a: &ScalarField, b: &ScalarField) -> f64 {
    let diff = a
        .values()
        .iter()
        .zip(b.values())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    diff / b.norm_inf()
}

fn box_1d(n: usize, l: f64) -> PeriodicGrid {
    PeriodicGrid::new(1, &[n], &[l], true).unwrap()
}

#[test]
fn plane_waves_are_eigenfunctions_for_every_lattice_mode() {
    let g = PeriodicGrid::new(2, &[16, 8], &[3.0, 2.0], false).unwrap();
    let ord = FracOrder::new(0.3, 2).unwrap();
    let op = FractionalLaplacian::new(&g, ord).unwrap();
    for m0 in 0..16 {
        for m1 in 0..8 {
            let k0 = g.wavenumber(0, m0);
            let k1 = g.wavenumber(1, m1);
            let f = ScalarField::from_fn(&g, |x| (k0 * x[0] + k1 * x[1] + 0.3).cos()).unwrap();
            let out = op.apply(&f).unwrap();
            let lam = (k0 * k0 + k1 * k1).powf(0.3);
            let expect = f.map(|v| lam * v).unwrap();
            let err = out
                .values()
                .iter()
                .zip(expect.values())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(err <= 1e-12 * lam.max(1.0), "mode ({m0},{m1}) err {err:e}");
        }
    }
}

#[test]
fn multiplier_is_linear() {
    let g = box_1d(128, 10.0);
    let ord = FracOrder::new(0.4, 1).unwrap();
    let f = ScalarField::from_fn(&g, |x| (-x[0] * x[0]).exp()).unwrap();
    let h = ScalarField::from_fn(&g, |x| (0.7 * x[0]).sin() / (1.0 + x[0] * x[0])).unwrap();
    let combo = f.zip_map(&h, |a, b| 2.5 * a - 1.5 * b).unwrap();
    let lhs = apply_multiplier(&combo, ord).unwrap();
    let rf = apply_multiplier(&f, ord).unwrap();
    let rh = apply_multiplier(&h, ord).unwrap();
    let rhs = rf.zip_map(&rh, |a, b| 2.5 * a - 1.5 * b).unwrap();
    assert!(rel_sup(&lhs, &rhs) < 1e-13);
}

#[test]
fn multiplier_matches_quadrature_on_smooth_decaying_functions() {
    let g = box_1d(512, 80.0);
    let tests: [(&str, fn(f64) -> f64); 3] = [
        ("gaussian", |x| (-x * x).exp()),
        ("modulated", |x| (-x * x / 4.0).exp() * x.cos()),
        ("algebraic", |x| 1.0 / (1.0 + x.powi(4))),
    ];
    for alpha in [0.25, 0.3, 0.4] {
        let ord = FracOrder::new(alpha, 1).unwrap();
        for (name, f) in tests {
            let field = ScalarField::from_fn(&g, |x| f(x[0])).unwrap();
            let a = apply_multiplier(&field, ord).unwrap();
            let b = pv_quadrature(&field, ord, default_cutoff(&g)).unwrap();
            let err = rel_sup(&b, &a);
            println!("alpha {alpha} {name}: relative gap {err:.3e}");
            assert!(err < 0.02, "alpha {alpha} {name}: {err}");
        }
    }
}

#[test]
fn multiplier_matches_quadrature_in_2d() {
    let g = PeriodicGrid::cube(2, 64, 16.0, true).unwrap();
    let ord = FracOrder::new(0.3, 2).unwrap();
    let f = ScalarField::from_fn(&g, |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1]) / 4.0).exp()).unwrap();
    let a = apply_multiplier(&f, ord).unwrap();
    let b = pv_quadrature(&f, ord, default_cutoff(&g)).unwrap();
    let err = rel_sup(&b, &a);
    println!("2-D relative gap {err:.3e}");
    assert!(err < 0.02);
}

fn random_trig(g: &PeriodicGrid, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = g.lengths()[0];
    let terms: Vec<(f64, f64, f64)> = (1..=4)
        .map(|m| {
            (
                2.0 * PI * m as f64 / l,
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
        })
        .collect();
    ScalarField::from_fn(g, |x| {
        terms
            .iter()
            .map(|(k, a, b)| a * (k * x[0]).cos() + b * (k * x[0]).sin())
            .sum()
    })
    .unwrap()
}

#[test]
fn quadrature_tracks_multiplier_on_trigonometric_polynomials() {
    // periodic data: the truncated-box tail leaves an h-independent floor,
    // which must still sit well inside one grid spacing
    let ord = FracOrder::new(0.25, 1).unwrap();
    let g = box_1d(256, 40.0);
    for seed in 0..3 {
        let f = random_trig(&g, seed);
        let a = apply_multiplier(&f, ord).unwrap();
        let b = pv_quadrature(&f, ord, default_cutoff(&g)).unwrap();
        let err = rel_sup(&b, &a);
        println!("trig polynomial seed {seed}: gap {err:.3e}");
        assert!(err < g.spacing(0));
        assert!(err < 0.02);
    }
}

#[test]
fn quadrature_gap_shrinks_under_refinement() {
    let ord = FracOrder::new(0.25, 1).unwrap();
    let errs: Vec<f64> = [64, 128, 256]
        .iter()
        .map(|&n| {
            let g = box_1d(n, 32.0);
            let f = ScalarField::from_fn(&g, |x| (-x[0] * x[0]).exp()).unwrap();
            let a = apply_multiplier(&f, ord).unwrap();
            let b = pv_quadrature(&f, ord, default_cutoff(&g)).unwrap();
            // box truncation dominates near the edges; look at the middle
            let mut diff = 0.0f64;
            for flat in 0..g.len() {
                if g.point(flat)[0].abs() <= 4.0 {
                    diff = diff.max((a.values()[flat] - b.values()[flat]).abs());
                }
            }
            diff / a.norm_inf()
        })
        .collect();
    println!("refinement gaps {errs:?}");
    assert!(errs[1] < 0.6 * errs[0] && errs[2] < 0.6 * errs[1]);
}

#[test]
fn quadrature_is_self_adjoint() {
    let g = box_1d(256, 40.0);
    let ord = FracOrder::new(0.3, 1).unwrap();
    let f = ScalarField::from_fn(&g, |x| (-(x[0] - 1.0).powi(2)).exp()).unwrap();
    let h = ScalarField::from_fn(&g, |x| (-(x[0] + 0.5).powi(2) / 2.0).exp() * (1.0 + 0.3 * x[0])).unwrap();
    let cut = default_cutoff(&g);
    let lhs = pv_quadrature(&f, ord, cut).unwrap().inner(&h).unwrap();
    let rhs = f.inner(&pv_quadrature(&h, ord, cut).unwrap()).unwrap();
    println!("self-adjoint gap {:.3e}", (lhs - rhs).abs() / lhs.abs());
    assert!((lhs - rhs).abs() <= 1e-3 * lhs.abs());
}

/// Product rule: K̃v = φ(−Δ)^α v + v(−Δ)^α φ − (−Δ)^α(φ v), every term by multiplier.
#[test]
fn k_quadrature_matches_product_rule_identity() {
    let g = box_1d(512, 32.0);
    let cell = PeriodicGrid::new(1, &[32], &[1.0], false).unwrap();
    let ord = FracOrder::new(0.25, 1).unwrap();
    let phi_cell = ScalarField::from_fn(&cell, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).cos()).unwrap();
    let phi = ScalarField::from_fn(&g, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).cos()).unwrap();
    let v = ScalarField::from_fn(&g, |x| (-x[0] * x[0] / 8.0).exp()).unwrap();
    let lap_v = apply_multiplier(&v, ord).unwrap();
    let lap_phi = apply_multiplier(&phi, ord).unwrap();
    let lap_prod = apply_multiplier(&phi.zip_map(&v, |a, b| a * b).unwrap(), ord).unwrap();
    let identity: Vec<f64> = (0..g.len())
        .map(|i| {
            phi.values()[i] * lap_v.values()[i] + v.values()[i] * lap_phi.values()[i]
                - lap_prod.values()[i]
        })
        .collect();
    let identity = ScalarField::new(g.clone(), identity).unwrap();
    let quad = apply_k(&v, &phi_cell, 1.0, ord).unwrap();
    let err = rel_sup(&quad, &identity);
    println!("K quadrature vs product rule: {err:.3e}");
    assert!(err < 0.03);
}

#[test]
fn k_is_bounded_by_measured_d() {
    let g = box_1d(256, 40.0);
    let cell = PeriodicGrid::new(1, &[32], &[1.0], false).unwrap();
    let ord = FracOrder::new(0.25, 1).unwrap();
    let phi_cell = ScalarField::from_fn(&cell, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).cos()).unwrap();
    let w = ScalarField::from_fn(&g, |x| 1.0 / (1.0 + x[0].abs().powf(1.5))).unwrap();
    let k = apply_k(&w, &phi_cell, 1.0, ord).unwrap();
    assert!(k.values().iter().all(|v| v.is_finite()));
    let est = estimate_d(ord, &phi_cell, -1.0, 1.0, &g, None).unwrap();
    let limit = g.half_width() / 2.0;
    for flat in 0..g.len() {
        let x = g.point(flat)[0];
        if x.abs() <= limit {
            assert!(k.values()[flat].abs() <= est.d * w.values()[flat] * (1.0 + 1e-12));
        }
    }
}

#[test]
fn d_estimate_is_scale_robust() {
    let g = box_1d(1024, 160.0);
    let cell = PeriodicGrid::new(1, &[32], &[1.0], false).unwrap();
    let ord = FracOrder::new(0.25, 1).unwrap();
    let phi_cell = ScalarField::from_fn(&cell, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).cos()).unwrap();
    let b = 0.05;
    let d1 = estimate_d(ord, &phi_cell, -1.2, b, &g, None).unwrap();
    let d8 = estimate_d(ord, &phi_cell, -1.2, 8.0 * b, &g, None).unwrap();
    println!("D({b}) = {d1:?}\nD({}) = {d8:?}", 8.0 * b);
    assert!(d1.d > 0.0 && d8.d > 0.0);
    assert!((d1.d - d8.d).abs() <= 0.25 * d1.d.max(d8.d));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn quadrature_nonnegative_at_strict_maximum(center in -3.0f64..3.0, width in 0.5f64..3.0, alpha in 0.1f64..0.9) {
        let g = box_1d(128, 24.0);
        let ord = FracOrder::new(alpha, 1).unwrap();
        let f = ScalarField::from_fn(&g, |x| (-(x[0] - center).powi(2) / width).exp()).unwrap();
        let q = pv_quadrature(&f, ord, default_cutoff(&g)).unwrap();
        let argmax = f
            .values()
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
            .0;
        prop_assert!(q.values()[argmax] >= 0.0);
    }
}
