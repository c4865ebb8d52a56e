mod common;

use std::f64::consts::{E, PI};

use common::*;
use trapnls::analysis::*;
use trapnls::fourier::{Line, XGrid};
use trapnls::hermite::special_g_n;
use trapnls::limit::ProfileField;
use trapnls::nls::{propagate_d, MixedField};
use trapnls::resonant::{build_interaction_tensor, Trajectory};
use trapnls::{Error, C64};

fn gaussian(grid: &std::sync::Arc<XGrid<f64>>, amp: f64, w: f64) -> Line<f64> {
    Line::from_fn(grid, |x| C64::new(amp * (-x * x / (2.0 * w * w)).exp(), 0.0))
}

fn small_domain() -> Domain {
    Domain::new(3, 64.0 * PI, 256)
}

#[test]
fn decay_fit_recovers_power_laws() {
    let t = log_times(1.0, 100.0, 12);
    let half: Vec<f64> = t.iter().map(|s| 3.0 * s.powf(-0.5)).collect();
    let fit = decay_fit(&t, &half).unwrap();
    assert!((fit.slope + 0.5).abs() <= 1e-12);
    assert!((fit.intercept - 3f64.ln()).abs() <= 1e-12);
    assert!(fit.residual <= 1e-12);
    let flat = decay_fit(&t, &vec![2.0; t.len()]).unwrap();
    assert!(flat.slope.abs() <= 1e-14);
}

#[test]
fn decay_fit_rejects_bad_series() {
    let t = log_times(1.0, 100.0, 12);
    let mut v: Vec<f64> = t.iter().map(|s| 1.0 / s).collect();
    assert!(decay_fit(&t[..7], &v[..7]).is_err());
    assert!(decay_fit(&log_times(1.0, 5.0, 12), &v).is_err());
    v[3] = 0.0;
    assert!(matches!(decay_fit(&t, &v), Err(Error::InvalidParameter(_))));
}

#[test]
fn free_dispersion_decays_like_inverse_square_root() {
    let b = basis(2, 1);
    let grid = XGrid::new(512.0 * PI, 4096).unwrap();
    let u = MixedField::separable(&gaussian(&grid, 1.0, 1.0), &special_g_n(&b, 1, false).unwrap()).to_spectral();
    let ts = log_times(10.0, 100.0, 10);
    let sup: Vec<f64> = ts.iter().map(|&t| propagate_d(&u, t).linf_h1()).collect();
    let fit = decay_fit(&ts, &sup).unwrap();
    assert!((fit.slope + 0.5).abs() <= 0.1, "slope {}", fit.slope);
}

#[test]
fn separability_spectrum_of_rank_one_and_rank_two_profiles() {
    let b = basis(2, 3);
    let g0 = special_g_n(&b, 0, false).unwrap();
    let g1 = special_g_n(&b, 1, false).unwrap();
    let p = ProfileField::separable(&g0, 8.0 * PI, 32, |xi| C64::new((-xi * xi).exp(), 0.3)).unwrap();
    let s = separability_spectrum(&p);
    assert!(s[1] <= 1e-12 * s[0]);
    assert_eq!(sigma_ratio(&p), s[1] / s[0]);
    // orthogonal pieces in both factors: singular values are the product norms
    let l_x = 8.0 * PI;
    let q = ProfileField::from_fn(&b, l_x, 32, |xi| {
        let (a, c) = (if xi < 0.0 { 1.0 } else { 0.0 }, if xi >= 0.0 { 0.5 } else { 0.0 });
        g0.scaled(C64::new(a, 0.0)).axpy(C64::new(c, 0.0), &g1).coeffs
    })
    .unwrap();
    let s = separability_spectrum(&q);
    let n = 16f64.sqrt();
    assert!((s[0] - n * g0.norm()).abs() <= 1e-12);
    assert!((s[1] - 0.5 * n * g1.norm()).abs() <= 1e-12);
    assert!(s[2] <= 1e-12);
}

#[test]
fn scattering_distance_of_identical_and_linear_trajectories() {
    let b = basis(2, 2);
    let grid = XGrid::new(32.0 * PI, 128).unwrap();
    let u0 = MixedField::separable(&gaussian(&grid, 0.1, 1.5), &special_g_n(&b, 1, false).unwrap());
    let g0 = u0.to_profile();
    let ts = [1.0, 2.0, E, 4.0];
    let taus: Vec<f64> = ts.iter().map(|t| PI * t.ln()).collect();
    let samples: Vec<(f64, MixedField<f64>)> = ts.iter().map(|&t| (t, propagate_d(&MixedField::from_profile(&g0).unwrap(), t))).collect();
    let frozen = Trajectory { times: taus.clone(), states: vec![g0.clone(); 4] };
    for r in scattering_distance(&samples, &frozen, 2).unwrap() {
        assert!(r.l2 <= 1e-12 && r.sobolev <= 1e-12, "{r:?}");
    }
    // a rotating limit profile sits at distance |e^{i tau} - 1| ||G0||
    let rotating = Trajectory {
        times: taus.clone(),
        states: taus
            .iter()
            .map(|&s| {
                let mut p = g0.clone();
                p.data.iter_mut().for_each(|c| *c *= C64::from_polar(1.0, s));
                p
            })
            .collect(),
    };
    let norm = u0.mass().sqrt();
    for r in scattering_distance(&samples, &rotating, 0).unwrap() {
        let expect = (C64::from_polar(1.0, r.tau) - 1.0).norm() * norm;
        assert!((r.l2 - expect).abs() <= 1e-10 * norm, "{r:?} vs {expect}");
        assert!((r.sobolev - expect).abs() <= 1e-10 * norm);
    }
}

#[test]
fn scattering_distance_rejects_clock_mismatch() {
    let b = basis(2, 1);
    let grid = XGrid::new(8.0 * PI, 16).unwrap();
    let u = MixedField::separable(&gaussian(&grid, 0.1, 1.0), &special_g_n(&b, 0, false).unwrap());
    let g = Trajectory { times: vec![0.0, 1.0], states: vec![u.to_profile(); 2] };
    // tau = ln 2 is not pi ln 2
    let err = scattering_distance(&[(2.0, u.clone())], &Trajectory { times: vec![2f64.ln()], states: vec![u.to_profile()] }, 0);
    assert!(matches!(err, Err(Error::ClockMismatch(_))));
    assert!(matches!(scattering_distance(&[(0.5, u)], &g, 0), Err(Error::ClockMismatch(_))));
}

#[test]
fn stationary_phase_guards_and_limit() {
    let b = basis(2, 1);
    let tensor = build_interaction_tensor(&b);
    let g1 = special_g_n(&b, 1, false).unwrap();
    // a wide profile on a short window wraps
    let grid = XGrid::new(16.0 * PI, 128).unwrap();
    let f = MixedField::separable(&gaussian(&grid, 1.0, 1.5), &g1).to_spectral();
    assert!(matches!(stationary_phase_ratio(&tensor, &f, &[50.0], 3), Err(Error::Wrap(_))));
    assert!(stationary_phase_ratio(&tensor, &f, &[0.0], 3).is_err());
    let wide = XGrid::new(512.0 * PI, 4096).unwrap();
    let f = MixedField::separable(&gaussian(&wide, 1.0, 1.5), &g1).to_spectral();
    let rows = stationary_phase_ratio(&tensor, &f, &[20.0, 80.0], 3).unwrap();
    assert!(rows[1].distance < rows[0].distance / 4.0);
    assert!((rows[1].ratio - 1.0).abs() <= 0.05, "{:?}", rows);
}

#[test]
fn report_validation_and_output() {
    let mut rep = ExperimentReport::new("demo", &serde_json::json!({ "a": 1 }), 9).unwrap();
    let mut s = Series::new("s", &["t", "v"]);
    s.push(vec![1.0, 0.5]);
    s.push(vec![2.0, 0.25]);
    rep.series.push(s);
    rep.verdicts.insert("slope".into(), -1.0);
    rep.validate().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = rep.write(dir.path()).unwrap();
    assert_eq!(paths.len(), 2);
    let csv = std::fs::read_to_string(&paths[0]).unwrap();
    assert_eq!(csv, "t,v\n1,0.5\n2,0.25\n");
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&paths[1]).unwrap()).unwrap();
    assert_eq!(summary["verdicts"]["slope"], -1.0);
    assert_eq!(summary["seed"], 9);
    // the same configuration always lands in the same files
    assert_eq!(rep.write(dir.path()).unwrap(), paths);
    let mut other = rep.clone();
    other.seed = 10;
    assert_ne!(other.config_hash(), rep.config_hash());

    let mut bad = rep.clone();
    bad.series[0].rows.reverse();
    assert!(bad.validate().is_err());
    let mut bad = rep.clone();
    bad.series[0].rows[0][1] = f64::NAN;
    assert!(matches!(bad.validate(), Err(Error::NonFinite { .. })));
    assert!(bad.write(dir.path()).is_err());
}

#[test]
fn zero_data_gives_zero_drift_and_zero_windows() {
    let ctx = Context::default();
    let w = WaveOperatorConfig {
        domain: small_domain(),
        eps: 0.0,
        t1: 2.0 * E,
        samples: 3,
        dt: 0.05,
        dtau: 0.1,
        ..Default::default()
    };
    let rep = wave_operator(&w, &ctx).unwrap();
    assert_eq!(rep.verdict("max_drift"), Some(0.0));
    let m = MatchedLimitConfig {
        domain: Domain::new(2, 16.0 * PI, 64),
        eps: 0.0,
        samples_per_window: 2,
        dt: 0.02,
        dtau: 0.05,
        ..Default::default()
    };
    let rep = matched_limit(&m, &ctx).unwrap();
    for k in 0..3 {
        assert_eq!(rep.verdict(&format!("window_max_{k}")), Some(0.0));
    }
    assert_eq!(rep.series("windows").unwrap().rows.len(), 6);
}

#[test]
fn wave_operator_requires_late_start() {
    let cfg = WaveOperatorConfig { t0: 2.0, ..Default::default() };
    assert!(matches!(wave_operator(&cfg, &Context::default()), Err(Error::InvalidParameter(_))));
}

#[test]
fn small_amplitude_quasi1d_agrees_linearly() {
    let cfg = Quasi1dConfig {
        domain: small_domain(),
        eps: 1e-3,
        t1: 2.0 * E,
        samples: 4,
        dt: 0.02,
        dtau: 0.1,
        ..Default::default()
    };
    let rep = quasi1d(&cfg, &Context::default()).unwrap();
    assert!(rep.verdict("max_mismatch").unwrap() <= 1e-5);
    assert!(rep.verdict("end_no_phase").unwrap() > 0.1);
    rep.validate().unwrap();
}

#[test]
fn dipole_without_antivortex_is_the_single_vortex_reduction() {
    let ctx = Context::default();
    let common = (small_domain(), 0.05, 2.0 * E, 4, 0.02, 0.1);
    let d = DipoleConfig {
        domain: common.0.clone(),
        eps: common.1,
        minus: 0.0,
        width_plus: 2.0,
        t1: common.2,
        samples: common.3,
        dt: common.4,
        dtau: common.5,
        symmetric_span: 0.0,
        ..Default::default()
    };
    let q = Quasi1dConfig {
        domain: common.0,
        vortex: 1,
        eps: common.1,
        width: 2.0,
        t1: common.2,
        samples: common.3,
        dt: common.4,
        dtau: common.5,
        ..Default::default()
    };
    let a = vortex_dipole(&d, &ctx).unwrap().series("mismatch").unwrap().column("mismatch").unwrap();
    let b = quasi1d(&q, &ctx).unwrap().series("mismatch").unwrap().column("mismatch").unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-10 + 1e-6 * y, "{x} vs {y}");
    }
}

#[test]
fn symmetric_dipole_stays_symmetric() {
    let cfg = DipoleConfig {
        domain: small_domain(),
        minus: 1.0,
        width_minus: 2.0,
        t1: 1.5 * E,
        samples: 2,
        dt: 0.02,
        dtau: 0.1,
        symmetric_span: 0.5,
        ..Default::default()
    };
    let rep = vortex_dipole(&cfg, &Context::default()).unwrap();
    assert!(rep.verdict("symmetric_defect").unwrap() <= 1e-10);
    assert!(rep.verdict("symmetric_defect_xpm").unwrap() <= 1e-10);
}

#[test]
fn non_separability_on_a_small_grid() {
    let cfg = SeparabilityConfig { n_max: 4, nodes: 16, tau_end: 0.5, dtau: 0.05, samples: 2, vortex_dt: 0.05, ..Default::default() };
    let rep = non_separability(&cfg, &Context::default()).unwrap();
    assert!(rep.verdict("initial_ratio").unwrap() >= 0.01);
    assert!(rep.verdict("min_over_initial").unwrap() >= 0.5);
    assert!(rep.verdict("vortex_max_ratio").unwrap() <= 1e-10);
}

#[test]
fn tensor_cache_is_written_and_reused() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = Context { cache_dir: Some(dir.path().to_path_buf()) };
    let b = Domain::new(2, 8.0 * PI, 16).basis().unwrap();
    let t1 = ctx.tensor(&b).unwrap();
    let path = dir.path().join(tensor_cache_name(&b.spec()));
    assert!(path.exists());
    let t2 = ctx.tensor(&b).unwrap();
    assert_eq!(t1.canonical_entries(), t2.canonical_entries());
}

#[test]
fn log_times_hit_both_ends() {
    let t = log_times(E, 10.0 * E, 5);
    assert_eq!(t.len(), 5);
    assert_eq!(t[0], E);
    assert_eq!(t[4], 10.0 * E);
    assert!(t.windows(2).all(|w| w[1] > w[0]));
    assert!(((t[1] / t[0]) - (t[2] / t[1])).abs() <= 1e-12);
}

#[test]
fn lowered_s_nodes_fail_the_quadrature_criterion_with_a_diagnosis() {
    use trapnls::acceptance::{run, AcceptanceConfig};
    let c = run(3, &AcceptanceConfig { m_s: Some(5), ..Default::default() });
    assert!(!c.passed);
    assert!(c.detail.contains("M_s = 5"), "{}", c.detail);
    let ok = run(3, &AcceptanceConfig::default());
    assert!(ok.passed, "{ok}");
    assert!(!run(99, &AcceptanceConfig::default()).passed);
}
