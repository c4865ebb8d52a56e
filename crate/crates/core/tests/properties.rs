mod common;

use std::f64::consts::PI;

use common::*;
use proptest::prelude::*;
use trapnls::fourier::{Line, XGrid};
use trapnls::hermite::*;
use trapnls::limit::{evolve_rss, max_node_error, ProfileField};
use trapnls::nls::{apply_full_nonlinearity, profile_of, propagate_d, MixedField};
use trapnls::resonant::*;
use trapnls::scalar::inner;
use trapnls::C64;

fn field_from(b: &std::sync::Arc<HermiteBasis<f64>>, raw: &[(f64, f64)], top: usize) -> HermiteField<f64> {
    let c = b
        .levels()
        .iter()
        .zip(raw.iter().cycle())
        .map(|(&l, &(re, im))| if l <= top { C64::new(re, im) } else { C64::new(0.0, 0.0) })
        .collect();
    HermiteField::from_coeffs(b, c).unwrap()
}

fn coeff_vec() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn analyze_inverts_synthesize(d in 1usize..=3, n in 0usize..=5, raw in coeff_vec()) {
        let b = basis(d, n);
        let f = field_from(&b, &raw, n);
        let back = analyze(&b, &synthesize(&f)).unwrap();
        prop_assert!(max_abs_diff(&back.coeffs, &f.coeffs) <= 1e-12);
    }

    #[test]
    fn gram_matrix_is_identity(d in 1usize..=3, n in 0usize..=5) {
        let b = basis(d, n);
        let w = b.grid_weights(Grid::Analysis);
        let pts = b.grid_points(Grid::Analysis);
        let vals: Vec<Vec<f64>> = pts.chunks(d).map(|p| b.eval_modes(p)).collect();
        for i in 0..b.len() {
            for j in 0..b.len() {
                let g: f64 = vals.iter().zip(&w).map(|(v, &wt)| wt * v[i] * v[j]).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                prop_assert!((g - e).abs() <= 1e-12, "({i},{j}) = {g}");
            }
        }
    }

    #[test]
    fn harmonic_flow_is_unitary_and_pi_periodic(d in 1usize..=4, n in 0usize..=4, s in -10.0..10.0f64, raw in coeff_vec()) {
        let b = basis(d, n);
        let f = field_from(&b, &raw, n);
        let a = propagate_harmonic(&f, s);
        prop_assert!((a.norm_sqr() - f.norm_sqr()).abs() <= 1e-13 * f.norm_sqr().max(1.0));
        let shifted = propagate_harmonic(&f, s + PI);
        let expect = a.scaled(C64::from_polar(1.0, PI * d as f64));
        prop_assert!(max_abs_diff(&shifted.coeffs, &expect.coeffs) <= 1e-12);
    }

    #[test]
    fn commutation_identities_below_the_top_level(d in 1usize..=3, n in 1usize..=5, s in -3.0..3.0f64, raw in coeff_vec()) {
        let b = basis(d, n);
        let f = field_from(&b, &raw, n - 1);
        prop_assert!(commutator_check(&f, s) <= 1e-10);
    }

    #[test]
    fn hamiltonian_pairing_is_real(n in 0usize..=3, raw in coeff_vec()) {
        let b = basis(2, n);
        let t = build_interaction_tensor(&b);
        let f = field_from(&b, &raw, n);
        let tf = apply_t_tensor(&t, &f, &f, &f).unwrap();
        let q = inner(&f.coeffs, &tf.coeffs);
        prop_assert!(q.im.abs() <= 1e-12 * q.norm().max(1.0));
        prop_assert!(q.re >= -1e-12);
    }

    #[test]
    fn tensor_orbit_is_symmetric(n in 0usize..=3, picks in prop::collection::vec(0usize..1000, 4)) {
        let b = basis(2, n);
        let t = build_interaction_tensor(&b);
        let m: Vec<Mode> = picks.iter().map(|&p| b.modes()[p % b.len()]).collect();
        let (a, bb, c, e) = (&m[0], &m[1], &m[2], &m[3]);
        let v = t.get(a, bb, c, e);
        for img in [(c, bb, a, e), (a, e, c, bb), (c, e, a, bb), (bb, a, e, c), (e, a, bb, c), (bb, c, e, a), (e, c, bb, a)] {
            prop_assert_eq!(t.get(img.0, img.1, img.2, img.3), v);
        }
    }

    #[test]
    fn fourier_round_trip(log_n in 2u32..=8, l in 1.0..100.0f64, raw in coeff_vec()) {
        let n = 1usize << log_n;
        let grid = XGrid::new(l, n).unwrap();
        let line = Line { grid: grid.clone(), values: (0..n).map(|j| { let (a, b) = raw[j % raw.len()]; C64::new(a, b) }).collect() };
        let back = Line::from_spectrum(&grid, line.spectrum());
        prop_assert!(max_abs_diff(&back.values, &line.values) <= 1e-12);
        prop_assert!((grid.l2_sqr_spectral(&line.spectrum()) - line.mass()).abs() <= 1e-12 * line.mass().max(1.0));
    }

    #[test]
    fn full_nonlinearity_is_gauge_covariant(theta in -PI..PI, t in -2.0..2.0f64, raw in coeff_vec()) {
        let b = basis(2, 2);
        let grid = XGrid::new(8.0 * PI, 16).unwrap();
        let f = field_from(&b, &raw, 2);
        let u = MixedField::separable(&Line::from_fn(&grid, |x| C64::new((-x * x / 2.0).exp(), 0.0)), &f);
        let rot = C64::from_polar(1.0, theta);
        let a = apply_full_nonlinearity(&u.scaled(rot), &u.scaled(rot), &u.scaled(rot), t).unwrap();
        let e = apply_full_nonlinearity(&u, &u, &u, t).unwrap().scaled(rot);
        prop_assert!(a.l2_distance(&e).unwrap() <= 1e-12 * e.mass().sqrt().max(1.0));
        let back = profile_of(&propagate_d(&u, t), t);
        prop_assert!(back.l2_distance(&u).unwrap() <= 1e-12 * u.mass().sqrt().max(1.0));
    }
}

#[test]
fn rs_conservation_over_long_run() {
    let b = basis(2, 3);
    let t = build_interaction_tensor(&b);
    let mut r = rng(40);
    let f = random_field(&mut r, &b, 3);
    let f0 = f.scaled(C64::new(0.5 / f.norm(), 0.0));
    let c0 = conserved_quantities(&f0);
    let traj = evolve_rs(&t, &f0, 1.0, StepPlan::new(10.0, 1e-3, 500).unwrap()).unwrap();
    for s in &traj.states {
        let c = conserved_quantities(s);
        assert!((c.mass - c0.mass).abs() <= 1e-8 * c0.mass);
        assert!((c.kinetic_energy - c0.kinetic_energy).abs() <= 1e-8 * c0.kinetic_energy);
        assert!((c.hamiltonian - c0.hamiltonian).abs() <= 1e-7 * c0.hamiltonian);
    }
}

#[test]
fn rs_keeps_level_support_and_is_gauge_covariant() {
    let b = basis(2, 4);
    let t = build_interaction_tensor(&b);
    let mut r = rng(41);
    let f = project_level(&random_field(&mut r, &b, 4), 3).unwrap();
    let plan = StepPlan::new(2.0, 1e-2, 200).unwrap();
    let a = evolve_rs(&t, &f, -1.0, plan).unwrap();
    let end = a.last();
    let off = end.axpy(C64::new(-1.0, 0.0), &project_level(end, 3).unwrap());
    assert!(off.norm() <= 1e-12);
    let rot = C64::from_polar(1.0, 1.3);
    let g = evolve_rs(&t, &f.scaled(rot), -1.0, plan).unwrap();
    assert!(max_abs_diff(&g.last().coeffs, &end.scaled(rot).coeffs) <= 1e-13);
}

#[test]
fn rss_commutes_with_node_permutation() {
    let b = basis(2, 2);
    let t = build_interaction_tensor(&b);
    let mut r = rng(42);
    let fields: Vec<HermiteField<f64>> = (0..4).map(|_| random_field(&mut r, &b, 2).scaled(C64::new(0.3, 0.0))).collect();
    let p = ProfileField::from_fn(&b, 2.0 * PI, 4, |xi| fields[(xi as i64 + 2) as usize].coeffs.clone()).unwrap();
    let perm = [2usize, 0, 3, 1];
    let mut q = p.clone();
    for (m, &src) in perm.iter().enumerate() {
        q.node_mut(m).copy_from_slice(p.node(src));
    }
    let plan = StepPlan::new(1.0, 1e-2, 100).unwrap();
    let ep = evolve_rss(&t, &p, 1.0, plan).unwrap();
    let eq = evolve_rss(&t, &q, 1.0, plan).unwrap();
    for (m, &src) in perm.iter().enumerate() {
        assert_eq!(eq.last().node(m), ep.last().node(src));
    }
}

#[test]
fn rss_deviation_grows_at_most_exponentially() {
    // doubling the horizon at most squares the amplification of a small perturbation
    let b = basis(2, 3);
    let t = build_interaction_tensor(&b);
    let mut r = rng(43);
    let base = ProfileField::separable(&random_field(&mut r, &b, 3), 2.0 * PI, 4, |xi| C64::new(0.4 / (1.0 + xi * xi), 0.0)).unwrap();
    let bump = random_field(&mut r, &b, 3);
    let mut near = base.clone();
    for m in 0..near.nodes() {
        let node = near.node_mut(m);
        for (c, d) in node.iter_mut().zip(&bump.coeffs) {
            *c += d * 1e-6;
        }
    }
    let d0 = max_node_error(&base, &near).unwrap();
    let ratio = |tau: f64| {
        let plan = StepPlan::new(tau, 1e-2, 10_000).unwrap();
        let a = evolve_rss(&t, &base, 1.0, plan).unwrap();
        let c = evolve_rss(&t, &near, 1.0, plan).unwrap();
        max_node_error(a.last(), c.last()).unwrap() / d0
    };
    for tau in [1.0, 2.0, 4.0] {
        let (r1, r2) = (ratio(tau), ratio(2.0 * tau));
        let g = r1.max(1.0);
        assert!(r2 <= g * g * 1.01, "tau {tau}: {r1} -> {r2}");
    }
}
