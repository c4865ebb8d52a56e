mod common;

use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use common::*;
use trapnls::hermite::{special_g_n, HermiteField};
use trapnls::resonant::*;
use trapnls::scalar::inner;
use trapnls::{Error, C64};

#[test]
fn coupling_values() {
    assert_eq!(coupling_mu(0), 0.5);
    assert_eq!(coupling_mu(1), 0.25);
    assert_eq!(coupling_mu(2), 0.375);
    // (2n)!/(2^{2n+1} n!) from factorials
    for n in 0..8u32 {
        let f = |k: u32| (1..=k).map(f64::from).product::<f64>();
        let direct = f(2 * n) / (2f64.powi(2 * n as i32 + 1) * f(n));
        assert_abs_diff_eq!(coupling_mu(n as usize), direct, epsilon = 1e-12 * direct);
    }
}

#[test]
fn ground_entries() {
    let t1 = build_interaction_tensor(&basis(1, 4));
    let z = [0u16; 4];
    let v = t1.get(&z, &z, &z, &z).unwrap();
    assert_abs_diff_eq!(v, 1.0 / (2.0 * PI).sqrt(), epsilon = 1e-14);
    let t2 = build_interaction_tensor(&basis(2, 3));
    assert_abs_diff_eq!(t2.get(&z, &z, &z, &z).unwrap(), 1.0 / (2.0 * PI), epsilon = 1e-14);
}

#[test]
fn selection_rules() {
    let b = basis(2, 4);
    let t = build_interaction_tensor(&b);
    let m = |a: u16, c: u16| [a, c, 0, 0];
    // odd parity in coordinate 0
    assert!(t.get(&m(1, 0), &m(0, 0), &m(0, 0), &m(0, 1)).is_none());
    // level rule violated
    assert!(t.get(&m(2, 0), &m(0, 0), &m(0, 0), &m(0, 0)).is_none());
    // admissible tuple present and symmetric
    let v = t.get(&m(1, 0), &m(1, 0), &m(0, 1), &m(0, 1)).unwrap();
    assert_eq!(t.get(&m(0, 1), &m(0, 1), &m(1, 0), &m(1, 0)), Some(v));
    assert_eq!(t.get(&m(1, 0), &m(0, 1), &m(0, 1), &m(1, 0)), Some(v));
    for &([a, bb, c, e], _) in t.canonical_entries() {
        let lv = |i: u32| b.levels()[i as usize];
        assert_eq!(lv(a) + lv(c), lv(bb) + lv(e));
    }
}

#[test]
fn vortices_are_stationary_directions() {
    for n in 0..=3 {
        let b = basis(2, 3 * n.max(1));
        let t = build_interaction_tensor(&b);
        let g = special_g_n(&b, n, false).unwrap();
        let tg = apply_t_tensor(&t, &g, &g, &g).unwrap();
        let resid = tg.axpy(C64::new(-coupling_mu(n), 0.0), &g).norm() / g.norm();
        assert!(resid <= 1e-10, "n = {n}: {resid}");
    }
}

#[test]
fn dipole_null_interaction() {
    let b = basis(2, 6);
    let t = build_interaction_tensor(&b);
    let g1 = special_g_n(&b, 1, false).unwrap();
    let out = apply_t_tensor(&t, &g1, &g1.conj(), &g1).unwrap();
    assert!(out.norm() <= 1e-12);
}

#[test]
fn tensor_and_quadrature_paths_agree() {
    let mut r = rng(7);
    for (d, n) in [(1, 6), (2, 4), (3, 2)] {
        let b = basis(d, n);
        let t = build_interaction_tensor(&b);
        for _ in 0..3 {
            let f = random_field(&mut r, &b, n);
            let g = random_field(&mut r, &b, n);
            let h = random_field(&mut r, &b, n);
            let a = apply_t_tensor(&t, &f, &g, &h).unwrap();
            let q = apply_t_quadrature(&f, &g, &h, 2 * n + 1).unwrap();
            assert!(max_abs_diff(&a.coeffs, &q.coeffs) <= 1e-12, "d={d}");
        }
    }
    let b = basis(2, 3);
    let z = HermiteField::zeros(&b);
    assert_eq!(apply_t_quadrature(&z, &z, &z, 7).unwrap().norm(), 0.0);
    assert!(matches!(apply_t_quadrature(&z, &z, &z, 6), Err(Error::QuadratureBound { .. })));
}

#[test]
fn quadrature_path_on_vortex() {
    let b = basis(2, 6);
    let g = special_g_n(&b, 2, false).unwrap();
    let out = apply_t_quadrature(&g, &g, &g, 13).unwrap();
    assert!(out.axpy(C64::new(-0.375, 0.0), &g).norm() / g.norm() < 1e-12);
}

#[test]
fn conserved_quantities_of_ground_vortex() {
    let b = basis(2, 4);
    let g0 = special_g_n(&b, 0, false).unwrap();
    let c = conserved_quantities(&g0);
    assert_abs_diff_eq!(c.mass, PI, epsilon = 1e-12);
    assert_abs_diff_eq!(c.kinetic_energy, 2.0 * PI, epsilon = 1e-12);
    assert_abs_diff_eq!(c.hamiltonian, PI / 2.0, epsilon = 1e-12);
    let z = conserved_quantities(&HermiteField::zeros(&b));
    assert_eq!((z.mass, z.kinetic_energy, z.hamiltonian), (0.0, 0.0, 0.0));
}

#[test]
fn hamiltonian_matches_tensor_pairing() {
    let mut r = rng(11);
    let b = basis(2, 5);
    let t = build_interaction_tensor(&b);
    for _ in 0..5 {
        let g = random_field(&mut r, &b, 5);
        let tg = apply_t_tensor(&t, &g, &g, &g).unwrap();
        let pair = inner(&g.coeffs, &tg.coeffs);
        let q = conserved_quantities(&g).hamiltonian;
        assert!(pair.im.abs() <= 1e-12 * q);
        assert_abs_diff_eq!(pair.re, q, epsilon = 1e-12 * q);
    }
}

#[test]
fn vortex_phase_rotation() {
    let b = basis(2, 3);
    let t = build_interaction_tensor(&b);
    let g = special_g_n(&b, 1, false).unwrap();
    let traj = evolve_rs(&t, &g, 1.0, StepPlan::new(5.0, 1e-3, 1000).unwrap()).unwrap();
    assert_eq!(traj.times.len(), 6);
    let expect = g.scaled(C64::from_polar(1.0, -0.25 * 5.0));
    let err = traj.last().axpy(C64::new(-1.0, 0.0), &expect).norm() / g.norm();
    assert!(err <= 1e-8, "{err}");
}

#[test]
fn zero_stays_zero_and_nan_aborts() {
    let b = basis(2, 2);
    let t = build_interaction_tensor(&b);
    let z = HermiteField::zeros(&b);
    let traj = evolve_rs(&t, &z, 1.0, StepPlan::new(1.0, 0.1, 1).unwrap()).unwrap();
    assert!(traj.states.iter().all(|s| s.norm() == 0.0));
    let mut bad = z.clone();
    bad.coeffs[0] = C64::new(f64::NAN, 0.0);
    assert!(matches!(
        evolve_rs(&t, &bad, 1.0, StepPlan::new(1.0, 0.1, 1).unwrap()),
        Err(Error::NonFinite { .. })
    ));
    assert!(StepPlan::new(1.0, 0.0, 1).is_err());
}

#[test]
fn cache_round_trip_is_bit_exact() {
    let b = basis(2, 4);
    let t = build_interaction_tensor(&b);
    let mut bytes = Vec::new();
    encode_tensor(&t, &mut bytes).unwrap();
    assert_eq!(&bytes[..4], b"RCT1");
    let back = decode_tensor(&b, &mut bytes.as_slice()).unwrap();
    assert_eq!(back.canonical_entries().len(), t.canonical_entries().len());
    for (x, y) in back.canonical_entries().iter().zip(t.canonical_entries()) {
        assert_eq!(x.0, y.0);
        assert_eq!(x.1.to_bits(), y.1.to_bits());
    }
    assert_eq!(back.expanded_len(), t.expanded_len());
    let mut again = Vec::new();
    encode_tensor(&back, &mut again).unwrap();
    assert_eq!(bytes, again);

    let mut r = rng(3);
    let f = random_field(&mut r, &b, 4);
    let a1 = apply_t_tensor(&t, &f, &f, &f).unwrap();
    let a2 = apply_t_tensor(&back, &f, &f, &f).unwrap();
    assert_eq!(a1.coeffs, a2.coeffs);

    let mut corrupt = bytes.clone();
    corrupt[0] = b'X';
    assert!(matches!(decode_tensor(&b, &mut corrupt.as_slice()), Err(Error::Cache(_))));
    let mut wrong_version = bytes.clone();
    wrong_version[4] = 9;
    assert!(matches!(decode_tensor(&b, &mut wrong_version.as_slice()), Err(Error::Cache(_))));
    assert!(matches!(decode_tensor(&basis(2, 3), &mut bytes.as_slice()), Err(Error::Cache(_))));
}

#[test]
fn cr_operator_on_zero_and_gaussian() {
    let z = Grid2::from_fn(24, 0.5, |_, _| C64::new(0.0, 0.0));
    let out = apply_cr_continuous(&z, CrQuadrature { n_theta: 8, r_max: 5.0, n_r: 21, stride: 1 }).unwrap();
    assert!(out.values.iter().all(|v| v.norm() == 0.0));
    let n = 60;
    let g = Grid2::from_fn(n, 0.2, |x: f64, y: f64| C64::new((-(x * x + y * y) / 2.0).exp(), 0.0));
    let q = CrQuadrature { n_theta: 16, r_max: 5.5, n_r: 45, stride: 3 };
    let out = apply_cr_continuous(&g, q).unwrap();
    // the Gaussian is an eigenfunction with eigenvalue 1 (value 1 at the origin)
    let idx: Vec<usize> = (0..n * n).filter(|k| (k / n) % 3 == 0 && (k % n) % 3 == 0).collect();
    let num: f64 = idx.iter().map(|&k| (out.values[k] * g.values[k].conj()).re).sum();
    let den: f64 = idx.iter().map(|&k| g.values[k].norm_sqr()).sum();
    let c = num / den;
    let resid: f64 = idx.iter().map(|&k| (out.values[k] - g.values[k] * c).norm_sqr()).sum::<f64>().sqrt();
    let rel = resid / (c * den.sqrt());
    assert!(rel < 0.01, "direction deviation {rel}, c = {c}");
    assert!((c - 1.0).abs() < 0.02, "c = {c}");
}

#[test]
fn dilation_commutes_without_time_rescaling() {
    // low-level data dilated by 1.05 stays well inside a level-14 truncation
    let b = basis(2, 14);
    let mut r = rng(31);
    let f = random_field(&mut r, &b, 2);
    let mu = 1.05;
    let pts = b.grid_points(trapnls::hermite::Grid::Analysis);
    let dilate = |g: &HermiteField<f64>| {
        let s: Vec<C64> = pts.chunks(2).map(|y| g.eval(&[mu * y[0], mu * y[1]]) * mu).collect();
        trapnls::hermite::analyze(&b, &s).unwrap()
    };
    let m = 2 * b.n_max() + 1;
    let lhs = {
        let fm = dilate(&f);
        apply_t_quadrature(&fm, &fm, &fm, m).unwrap()
    };
    let rhs = dilate(&apply_t_quadrature(&f, &f, &f, m).unwrap());
    assert!(lhs.axpy(C64::new(-1.0, 0.0), &rhs).norm() <= 1e-6 * rhs.norm());
    // the ground state keeps its rate under dilation
    let g0 = special_g_n(&b, 0, false).unwrap();
    let gd = dilate(&g0);
    let tg = apply_t_quadrature(&gd, &gd, &gd, m).unwrap();
    assert!(tg.axpy(C64::new(-0.5, 0.0), &gd).norm() <= 1e-8 * gd.norm());
}

#[test]
fn single_precision_vortex_eigenvalue() {
    let b = trapnls::hermite::build_basis::<f32>(trapnls::hermite::BasisSpec::minimal(2, 3).unwrap()).unwrap();
    let g = trapnls::hermite::special_g_n(&b, 1, false).unwrap();
    let t = trapnls::resonant::apply_t_quadrature(&g, &g, &g, 7).unwrap();
    let mu = trapnls::resonant::coupling_mu(1) as f32;
    let r: f32 = t.coeffs.iter().zip(&g.coeffs).map(|(a, c)| (a - c * mu).norm_sqr()).sum::<f32>().sqrt();
    assert!(r / g.norm() < 1e-5, "{r}");
}
