//! The acceptance suite: fifteen measurable checks with fixed tolerances.
//!
//! A criterion never panics; errors surface as a failed verdict whose detail names the cause.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{self, Context};
use crate::error::{Error, Result};
use crate::fourier::{Line, XGrid};
use crate::hermite::{build_basis, commutator_check, lens_map, special_g_n, BasisSpec, HermiteBasis, HermiteField};
use crate::limit::{evolve_rss, z_norm, ProfileField};
use crate::nls::{evolve_cnls, EvolutionConfig, MixedField};
use crate::resonant::{
    apply_cr_continuous, apply_t_quadrature, apply_t_tensor, conserved_quantities, coupling_mu, evolve_rs, CrQuadrature,
    Grid2, StepPlan,
};
use crate::C64;

type Basis = Arc<HermiteBasis<f64>>;

pub const CRITERIA: u32 = 15;

#[derive(Clone, Debug, Default)]
pub struct AcceptanceConfig {
    pub context: Context,
    /// Overrides the `s`-node count of the tensor/quadrature comparison (criterion 3).
    pub m_s: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Criterion {
    pub id: u32,
    pub name: &'static str,
    pub measured: f64,
    pub bound: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {:>2} {:<34} measured {:<12.4e} bound {:<16} ({:.1}s) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measured,
            self.bound,
            self.seconds,
            self.detail
        )
    }
}

struct Outcome {
    measured: f64,
    bound: String,
    passed: bool,
    detail: String,
}

fn upper(measured: f64, bound: f64, detail: String) -> Outcome {
    Outcome { measured, bound: format!("<= {bound:e}"), passed: measured <= bound, detail }
}

pub fn name(id: u32) -> &'static str {
    match id {
        1 => "stationary eigen-solutions",
        2 => "null interaction",
        3 => "tensor vs quadrature",
        4 => "resonant-system conservation",
        5 => "two-frequency quasi-periodicity",
        6 => "limit-system Z-norm conservation",
        7 => "continuous resonant consistency",
        8 => "stationary-phase limit",
        9 => "modified-scattering windows",
        10 => "quasi-1D reduction",
        11 => "vortex dipole XPM",
        12 => "dispersive decay",
        13 => "non-separability witness",
        14 => "lens and commutation identities",
        15 => "splitting order",
        _ => "unknown",
    }
}

pub fn run(id: u32, cfg: &AcceptanceConfig) -> Criterion {
    let start = std::time::Instant::now();
    let out = match id {
        1 => eigen_solutions(),
        2 => null_interaction(cfg),
        3 => tensor_vs_quadrature(cfg),
        4 => rs_conservation(cfg),
        5 => quasi_periodic(cfg),
        6 => z_conservation(cfg),
        7 => cr_consistency(),
        8 => stationary_phase(cfg),
        9 => matched_limit(cfg),
        10 => quasi1d(cfg),
        11 => dipole(cfg),
        12 => decay(cfg),
        13 => separability(cfg),
        14 => identities(),
        15 => splitting_order(),
        _ => Err(Error::InvalidParameter(format!("no criterion {id}"))),
    };
    let out = out.unwrap_or_else(|e| Outcome {
        measured: f64::NAN,
        bound: "-".into(),
        passed: false,
        detail: format!("error: {e}"),
    });
    Criterion {
        id,
        name: name(id),
        measured: out.measured,
        bound: out.bound,
        passed: out.passed && out.measured.is_finite(),
        detail: out.detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn run_all(cfg: &AcceptanceConfig) -> Vec<Criterion> {
    (1..=CRITERIA).map(|id| run(id, cfg)).collect()
}

fn basis(n_max: usize) -> Result<Basis> {
    build_basis(BasisSpec::minimal(2, n_max)?)
}

fn rel(a: &HermiteField<f64>, b: &HermiteField<f64>) -> f64 {
    a.axpy(C64::new(-1.0, 0.0), b).norm()
}

fn random_field(rng: &mut ChaCha8Rng, b: &Basis, top: usize, norm: f64) -> Result<HermiteField<f64>> {
    let c = b
        .levels()
        .iter()
        .map(|&l| if l <= top { C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) } else { C64::new(0.0, 0.0) })
        .collect();
    let f = HermiteField::from_coeffs(b, c)?;
    Ok(f.scaled(C64::new(norm / f.norm(), 0.0)))
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn eigen_solutions() -> Result<Outcome> {
    let b = basis(12)?;
    let m_s = 2 * b.n_max() + 1;
    let mut worst = 0.0f64;
    let mut detail = String::new();
    for n in 0..=4 {
        let mu = factorial(2 * n) / (2f64.powi(2 * n as i32 + 1) * factorial(n));
        if (mu - coupling_mu(n)).abs() > 1e-15 {
            return Err(Error::InvalidParameter(format!("coupling_mu({n}) = {} but closed form gives {mu}", coupling_mu(n))));
        }
        let g = special_g_n(&b, n, false)?;
        let e = rel(&apply_t_quadrature(&g, &g, &g, m_s)?, &g.scaled(C64::new(mu, 0.0))) / g.norm();
        detail += &format!("n={n}:{e:.1e} ");
        worst = worst.max(e);
    }
    Ok(upper(worst, 1e-10, detail.trim_end().into()))
}

fn null_interaction(cfg: &AcceptanceConfig) -> Result<Outcome> {
    let b = basis(8)?;
    let t = cfg.context.tensor(&b)?;
    let g = special_g_n(&b, 1, false)?;
    let v = apply_t_tensor(&t, &g, &special_g_n(&b, 1, true)?, &g)?.norm();
    Ok(upper(v, 1e-10, "n_max=8".into()))
}

fn tensor_vs_quadrature(cfg: &AcceptanceConfig) -> Result<Outcome> {
    let b = basis(8)?;
    let t = cfg.context.tensor(&b)?;
    let m_s = cfg.m_s.unwrap_or(2 * b.n_max() + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let fs: Vec<HermiteField<f64>> = (0..3).map(|_| random_field(&mut rng, &b, 8, 1.0)).collect::<Result<_>>()?;
        let a = apply_t_tensor(&t, &fs[0], &fs[1], &fs[2])?;
        let q = apply_t_quadrature(&fs[0], &fs[1], &fs[2], m_s).map_err(|e| match e {
            Error::QuadratureBound { .. } => Error::InvalidParameter(format!("M_s = {m_s} is below 2 n_max + 1 = 17: {e}")),
            e => e,
        })?;
        worst = worst.max(rel(&a, &q) / a.norm().max(1.0));
    }
    Ok(upper(worst, 1e-12, format!("20 random triples, n_max=8, M_s={m_s}")))
}

fn rs_conservation(cfg: &AcceptanceConfig) -> Result<Outcome> {
    let b = basis(8)?;
    let t = cfg.context.tensor(&b)?;
    let f0 = random_field(&mut ChaCha8Rng::seed_from_u64(4), &b, 8, 0.5)?;
    let c0 = conserved_quantities(&f0);
    let traj = evolve_rs(&t, &f0, 1.0, StepPlan::new(10.0, 1e-3, 100)?)?;
    let (mut dm, mut dk, mut dq) = (0.0f64, 0.0f64, 0.0f64);
    for s in &traj.states {
        let c = conserved_quantities(s);
        dm = dm.max((c.mass - c0.mass).abs() / c0.mass);
        dk = dk.max((c.kinetic_energy - c0.kinetic_energy).abs() / c0.kinetic_energy);
        dq = dq.max((c.hamiltonian - c0.hamiltonian).abs() / c0.hamiltonian);
    }
    Ok(Outcome {
        measured: dm.max(dk),
        bound: "<= 1e-8 (Q <= 1e-7)".into(),
        passed: dm <= 1e-8 && dk <= 1e-8 && dq <= 1e-7,
        detail: format!("mass {dm:.1e}, kinetic {dk:.1e}, hamiltonian {dq:.1e}"),
    })
}

fn quasi_periodic(cfg: &AcceptanceConfig) -> Result<Outcome> {
    let b = basis(3)?;
    let t = cfg.context.tensor(&b)?;
    let (gp, gm) = (special_g_n(&b, 1, false)?, special_g_n(&b, 1, true)?);
    let (cp, cm) = (0.8, 0.6);
    let kappa = 1.0;
    let f0 = gp.scaled(C64::new(cp, 0.0)).axpy(C64::new(cm, 0.0), &gm);
    let tau = 20.0;
    let end = evolve_rs(&t, &f0, kappa, StepPlan::new(tau, 1e-3, usize::MAX)?)?.last().clone();
    let coeff = |g: &HermiteField<f64>| crate::scalar::inner(&g.coeffs, &end.coeffs) / g.norm_sqr();
    let mut worst = 0.0f64;
    let mut detail = String::new();
    for (g, c, o, tag) in [(&gp, cp, cm, "+"), (&gm, cm, cp, "-")] {
        let w = kappa / 4.0 * (c * c + 2.0 * o * o);
        let expect = C64::from_polar(c, -w * tau);
        let got = coeff(g);
        let ph = (got / expect).arg().abs();
        let md = (got.norm() - c).abs();
        detail += &format!("{tag}: phase {ph:.1e} modulus {md:.1e} ");
        worst = worst.max(ph).max(md);
    }
    Ok(upper(worst, 1e-6, detail.trim_end().into()))
}

fn z_conservation(cfg: &AcceptanceConfig) -> Result<Outcome> {
    let b = basis(3)?;
    let t = cfg.context.tensor(&b)?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let fields: Vec<HermiteField<f64>> = (0..64).map(|_| random_field(&mut rng, &b, 3, 1.0)).collect::<Result<_>>()?;
    let l_x = 16.0 * PI;
    let dxi = 2.0 * PI / l_x;
    let g0 = ProfileField::from_fn(&b, l_x, 64, |xi| {
        let m = ((xi / dxi).round() as i64).rem_euclid(64) as usize;
        fields[m].scaled(C64::new(0.8 * (-xi * xi / 4.0).exp(), 0.0)).coeffs
    })?;
    let z0 = z_norm(&g0);
    let traj = evolve_rss(&t, &g0, 1.0, StepPlan::new(10.0, 1e-2, 50)?)?;
    let drift = traj.states.iter().map(|s| (z_norm(s) - z0).abs() / z0).fold(0.0, f64::max);
    Ok(upper(drift, 1e-6, format!("64 nodes, n_max=3, Z0={z0:.3}")))
}

/// Proportionality constant between the continuous resonant operator and `T`,
/// fitted on grid samples, and the relative residual of that fit.
pub fn cr_constant(f: &HermiteField<f64>, quad: CrQuadrature, n: usize, h: f64) -> Result<(f64, f64)> {
    let g = Grid2::from_fn(n, h, |x: f64, y: f64| f.eval(&[x, y]));
    let out = apply_cr_continuous(&g, quad)?;
    let tf = apply_t_quadrature(f, f, f, 2 * f.basis().n_max() + 1)?;
    let idx: Vec<usize> = (0..n * n).filter(|k| (k / n) % quad.stride == 0 && (k % n) % quad.stride == 0).collect();
    let tv: Vec<C64> = idx.iter().map(|&k| tf.eval(&[g.coord(k / n), g.coord(k % n)])).collect();
    let num: C64 = idx.iter().zip(&tv).map(|(&k, t)| out.values[k] * t.conj()).sum();
    let den: f64 = tv.iter().map(|t| t.norm_sqr()).sum();
    let c = num / den;
    let res = idx.iter().zip(&tv).map(|(&k, t)| (out.values[k] - t * c).norm_sqr()).sum::<f64>().sqrt();
    Ok((c.re, res / (c.norm() * den.sqrt())))
}

fn cr_consistency() -> Result<Outcome> {
    let b = basis(6)?;
    let mixed = random_field(&mut ChaCha8Rng::seed_from_u64(7), &b, 2, PI.sqrt())?;
    let quad = CrQuadrature { n_theta: 16, r_max: 5.5, n_r: 45, stride: 6 };
    let mut cs = Vec::new();
    let mut detail = String::new();
    for (tag, f) in [("g0", special_g_n(&b, 0, false)?), ("g1", special_g_n(&b, 1, false)?), ("mixed", mixed)] {
        let (c, r) = cr_constant(&f, quad, 120, 0.1)?;
        detail += &format!("{tag}: c={c:.4} fit {r:.1e} ");
        cs.push(c);
    }
    let mean = cs.iter().sum::<f64>() / cs.len() as f64;
    let spread = cs.iter().map(|c| (c - mean).abs() / mean).fold(0.0, f64::max);
    Ok(upper(spread, 0.01, detail.trim_end().into()))
}

fn verdict(r: &analysis::ExperimentReport, key: &str) -> Result<f64> {
    r.verdict(key).ok_or_else(|| Error::InvalidParameter(format!("{} reports no {key}", r.id)))
}

fn stationary_phase(cfg: &AcceptanceConfig) -> Result<Outcome> {
    let r = analysis::stationary_phase(&analysis::StationaryPhaseConfig::default(), &cfg.context)?;
    let (slope, ratio) = (verdict(&r, "slope")?, verdict(&r, "ratio_at")?);
    Ok(Outcome {
        measured: slope,
        bound: "<= -1, ratio 1±0.05".into(),
        passed: slope <= -1.0 && (ratio - 1.0).abs() <= 0.05,
        detail: format!("slope {slope:.3}, ratio at t=50 {ratio:.4}"),
    })
}

fn matched_limit(cfg: &AcceptanceConfig) -> Result<Outcome> {
    let r = analysis::matched_limit(&analysis::MatchedLimitConfig::default(), &cfg.context)?;
    let w: Vec<f64> = (0..3).map(|k| verdict(&r, &format!("window_max_{k}"))).collect::<Result<_>>()?;
    let a: Vec<f64> = (0..3).map(|k| verdict(&r, &format!("window_max_log_clock_{k}"))).collect::<Result<_>>()?;
    let dec = verdict(&r, "decreasing")? == 1.0;
    let clock = verdict(&r, "clock_beats_ablation")? == 1.0;
    Ok(Outcome {
        measured: w[2] / w[0],
        bound: "decreasing, < ablation".into(),
        passed: dec && clock,
        detail: format!("windows {:.2e} {:.2e} {:.2e}; ln t clock {:.2e} {:.2e} {:.2e}", w[0], w[1], w[2], a[0], a[1], a[2]),
    })
}

fn quasi1d(cfg: &AcceptanceConfig) -> Result<Outcome> {
    let mut passed = true;
    let mut worst = 0.0f64;
    let mut detail = String::new();
    for n in [0, 1] {
        let c = analysis::Quasi1dConfig { vortex: n, ..Default::default() };
        let r = analysis::quasi1d(&c, &cfg.context)?;
        let (m, cr, pr) = (verdict(&r, "max_mismatch")?, verdict(&r, "coupling_ratio")?, verdict(&r, "phase_ratio")?);
        passed &= m <= 0.1 && cr >= 3.0 && pr >= 10.0;
        worst = worst.max(m);
        detail += &format!("n={n}: mismatch {m:.1e}, coupling ablation x{cr:.1}, phase ablation x{pr:.0}; ");
    }
    Ok(Outcome { measured: worst, bound: "<= 0.1, x3, x10".into(), passed, detail: detail.trim_end_matches("; ").into() })
}

fn dipole(cfg: &AcceptanceConfig) -> Result<Outcome> {
    let r = analysis::vortex_dipole(&analysis::DipoleConfig::default(), &cfg.context)?;
    let ratio = verdict(&r, "xpm_ratio")?;
    let sym = verdict(&r, "symmetric_defect")?.max(verdict(&r, "symmetric_defect_xpm")?);
    Ok(Outcome {
        measured: ratio,
        bound: ">= 2, symmetry 1e-10".into(),
        passed: ratio >= 2.0 && sym <= 1e-10,
        detail: format!("end mismatch {:.1e}, symmetric defect {sym:.1e}", verdict(&r, "end_mismatch")?),
    })
}

fn decay(cfg: &AcceptanceConfig) -> Result<Outcome> {
    let r = analysis::wave_operator(&analysis::WaveOperatorConfig::default(), &cfg.context)?;
    let s = verdict(&r, "decay_slope")?;
    Ok(Outcome {
        measured: s,
        bound: "-0.5 ± 0.1".into(),
        passed: (s + 0.5).abs() <= 0.1,
        detail: format!(
            "t in [e, 10e], fit residual {:.1e}, drift {:.1e} (10 eps^3 = {:.1e})",
            verdict(&r, "decay_residual")?,
            verdict(&r, "max_drift_3t0")?,
            verdict(&r, "drift_bound")?
        ),
    })
}

fn separability(cfg: &AcceptanceConfig) -> Result<Outcome> {
    let r = analysis::non_separability(&analysis::SeparabilityConfig::default(), &cfg.context)?;
    let (init, frac, vort) =
        (verdict(&r, "initial_ratio")?, verdict(&r, "min_over_initial")?, verdict(&r, "vortex_max_ratio")?);
    Ok(Outcome {
        measured: frac,
        bound: ">= 0.5, vortex 1e-6".into(),
        passed: init >= 0.01 && frac >= 0.5 && vort <= 1e-6,
        detail: format!("initial sigma2/sigma1 {init:.3}, vortex {vort:.1e}"),
    })
}

fn identities() -> Result<Outcome> {
    // free evolution of psi_0 (x) psi_1 in closed form
    let b = basis(10)?;
    let f = HermiteField::unit(&b, &[1, 0, 0, 0])?;
    let mut lens = 0.0f64;
    let pts: Vec<f64> = (-12..=12).flat_map(|i| (-12..=12).flat_map(move |j| [i as f64 * 0.3, j as f64 * 0.3])).collect();
    for t in [0.1, 0.4, 1.5] {
        let a = C64::new(1.0, 2.0 * t);
        let u = lens_map(&f, t, &pts)?;
        for (v, p) in u.iter().zip(pts.chunks(2)) {
            let g = |x: f64| (C64::new(-x * x / 2.0, 0.0) / a).exp() / a.sqrt() * PI.powf(-0.25);
            let exact = g(p[0]) * g(p[1]) * (2f64.sqrt() * p[0]) / a;
            lens = lens.max((v - exact).norm());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut comm = 0.0f64;
    for s in [0.3, 1.0, 2.5] {
        comm = comm.max(commutator_check(&random_field(&mut rng, &b, 9, 1.0)?, s));
    }
    Ok(upper(lens.max(comm), 1e-10, format!("lens {lens:.1e}, commutators {comm:.1e}")))
}

/// Error ratio of `evolve_cnls` under dt-halving on `eps = 0.05` Gaussian-vortex data
/// over `t in [0, 1]`, against a `dt/32` reference.
pub fn splitting_ratio(dt: f64) -> Result<(f64, f64, f64)> {
    let b = basis(3)?;
    let grid = XGrid::new(16.0 * PI, 64)?;
    let g1 = special_g_n(&b, 1, false)?;
    let u0 = MixedField::separable(&Line::from_fn(&grid, |x| C64::new(0.05 * (-x * x / 4.0).exp(), 0.0)), &g1);
    let run = |h: f64| -> Result<MixedField<f64>> {
        let cfg = EvolutionConfig { kappa: 1.0, dt: h, t_start: 0.0, t_end: 1.0, sample_every: usize::MAX };
        Ok(evolve_cnls(&u0, &cfg)?.last().clone())
    };
    let reference = run(dt / 32.0)?;
    let e1 = run(dt)?.l2_distance(&reference)?;
    let e2 = run(dt / 2.0)?.l2_distance(&reference)?;
    Ok((e1 / e2, e1, e2))
}

fn splitting_order() -> Result<Outcome> {
    let (ratio, e1, e2) = splitting_ratio(0.1)?;
    Ok(Outcome {
        measured: ratio,
        bound: "in [3.5, 4.5]".into(),
        passed: (3.5..=4.5).contains(&ratio),
        detail: format!("errors {e1:.2e} -> {e2:.2e}"),
    })
}
