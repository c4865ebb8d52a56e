use approx::assert_abs_diff_eq;
use std::sync::Arc;

use trapnls::hermite::*;
use trapnls::{Error, C};

fn basis(d: usize, n: usize, q: usize) -> Arc<HermiteBasis<f64>> {
    build_basis(BasisSpec::new(d, n, q).unwrap()).unwrap()
}

#[test]
fn node_bound_enforced() {
    assert!(BasisSpec::new(1, 0, 1).is_ok());
    assert!(matches!(BasisSpec::new(1, 1, 2), Err(Error::QuadratureBound { .. })));
    assert!(BasisSpec::new(5, 1, 3).is_err());
    assert!(BasisSpec::new(0, 1, 3).is_err());
}

#[test]
fn mode_counts() {
    assert_eq!(basis(2, 3, 7).len(), 10);
    assert_eq!(basis(3, 4, 9).len(), 35);
    let b = basis(2, 2, 5);
    assert_eq!(&b.modes()[1..3], &[[1, 0, 0, 0], [0, 1, 0, 0]]);
}

#[test]
fn eigen_and_degeneracy() {
    assert_eq!(eig_level(0, 2), 2.0);
    assert_eq!(eig_level(3, 2), 8.0);
    assert_eq!(eig_level(0, 1), 1.0);
    assert_eq!(level_degeneracy(5, 2), 6);
    assert_eq!(level_degeneracy(7, 1), 1);
    assert_eq!(level_degeneracy(0, 3), 1);
}

#[test]
fn gauss_hermite_small_rules() {
    let (x, w) = gauss_hermite(1);
    assert_abs_diff_eq!(x[0], 0.0);
    assert_abs_diff_eq!(w[0], std::f64::consts::PI.sqrt(), epsilon = 1e-14);
    let (x, w) = gauss_hermite(2);
    assert_abs_diff_eq!(x[1], 0.5f64.sqrt(), epsilon = 1e-14);
    assert_abs_diff_eq!(w[0], std::f64::consts::PI.sqrt() / 2.0, epsilon = 1e-14);
    let (_, w) = gauss_hermite(40);
    assert_abs_diff_eq!(w.iter().sum::<f64>(), std::f64::consts::PI.sqrt(), epsilon = 1e-13);
}

#[test]
fn psi3_psi5_orthogonal() {
    let b = basis(1, 8, 17);
    let r = b.rule(Grid::Analysis);
    let ip: f64 = (0..17).map(|i| r.weights[i] * r.table[i * 9 + 3] * r.table[i * 9 + 5]).sum();
    assert_abs_diff_eq!(ip, 0.0, epsilon = 1e-12);
}

#[test]
fn y_psi0_has_single_coefficient() {
    let b = basis(1, 4, 9);
    let pts = b.grid_points(Grid::Analysis);
    let vals: Vec<C<f64>> = pts
        .iter()
        .map(|&y| C::new(y * hermite_functions(0, y)[0], 0.0))
        .collect();
    let f = analyze(&b, &vals).unwrap();
    for (i, c) in f.coeffs.iter().enumerate() {
        let expect = if i == 1 { 0.5f64.sqrt() } else { 0.0 };
        assert_abs_diff_eq!(c.re, expect, epsilon = 1e-13);
        assert_abs_diff_eq!(c.im, 0.0, epsilon = 1e-13);
    }
}

#[test]
fn g0_samples_are_gaussian() {
    let b = basis(2, 4, 9);
    let mut f = HermiteField::unit(&b, &[0, 0, 0, 0]).unwrap();
    f.coeffs[0] = C::new(1.0, 0.0);
    let vals = synthesize(&f);
    let pts = b.grid_points(Grid::Analysis);
    for (v, p) in vals.iter().zip(pts.chunks(2)) {
        let g = (-(p[0] * p[0] + p[1] * p[1]) / 2.0).exp() / std::f64::consts::PI.sqrt();
        assert_abs_diff_eq!(v.re, g, epsilon = 1e-12);
    }
}

#[test]
fn g_n_norms_and_support() {
    let b = basis(2, 6, 13);
    let pi = std::f64::consts::PI;
    let g0 = special_g_n(&b, 0, false).unwrap();
    assert_abs_diff_eq!(g0.coeffs[0].re, pi.sqrt(), epsilon = 1e-12);
    let mut fact = 1.0;
    for n in 0..=6 {
        if n > 0 {
            fact *= n as f64;
        }
        let g = special_g_n(&b, n, n % 2 == 1).unwrap();
        assert_abs_diff_eq!(g.norm_sqr(), pi * fact, epsilon = 1e-10 * fact);
        let off: f64 = g
            .coeffs
            .iter()
            .zip(b.levels())
            .filter(|(_, &l)| l != n)
            .map(|(c, _)| c.norm_sqr())
            .sum();
        assert_eq!(off, 0.0);
    }
    assert!(special_g_n(&b, 7, false).is_err());
    assert!(special_g_n(&basis(1, 3, 7), 0, false).is_err());
}

#[test]
fn lens_matches_free_gaussian() {
    let b = basis(1, 20, 41);
    let f = HermiteField::unit(&b, &[0, 0, 0, 0]).unwrap();
    let t = 0.2;
    let pts: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.1).collect();
    let u = lens_map(&f, t, &pts).unwrap();
    let a = C::new(1.0, 2.0 * t);
    for (v, &x) in u.iter().zip(&pts) {
        let exact = (C::new(-x * x / 2.0, 0.0) / a).exp() / a.sqrt() * std::f64::consts::PI.powf(-0.25);
        assert!((v - exact).norm() <= 1e-10, "x = {x}: {v} vs {exact}");
    }
    let at0 = lens_map(&f, 0.0, &pts).unwrap();
    for (v, &x) in at0.iter().zip(&pts) {
        assert_abs_diff_eq!(v.re, f.eval(&[x]).re, epsilon = 1e-14);
    }
}

#[test]
fn commutator_on_ground_state() {
    let b = basis(2, 4, 9);
    let f = HermiteField::unit(&b, &[0, 0, 0, 0]).unwrap();
    assert!(commutator_check(&f, std::f64::consts::FRAC_PI_2) <= 1e-10);
    assert!(commutator_check(&f, 0.0) <= 1e-15);
}
