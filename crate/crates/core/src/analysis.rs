//! Windowed experiments on the asymptotic behaviour of small solutions, with their
//! diagnostics (scattering distance, separability spectrum, stationary phase, decay fits).
//!
//! Everything here is `f64`. Profiles live on the dual grid of the x-window, so a
//! profile and a mixed field of the same window convert losslessly.

use std::collections::BTreeMap;
use std::io::Write;
use std::f64::consts::{E, PI};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fourier::{Line, XGrid};
use crate::hermite::{analyze, build_basis, special_g_n, BasisSpec, Grid, HermiteBasis, HermiteField};
use crate::limit::{apply_r, evolve_rss, s_norm, ProfileField};
use crate::nls::{
    apply_n0, evolve_1d_nls, evolve_cnls_with, evolve_resonant_truncated_with, evolve_xpm, profile_of, propagate_d, psi1_explicit, EvolutionConfig,
    MixedField, XpmCoupling,
};
use crate::resonant::{build_interaction_tensor, coupling_mu, load_or_build_tensor, InteractionTensor, StepPlan, Trajectory};
use crate::C64;

type Basis = Arc<HermiteBasis<f64>>;
type Tensor = InteractionTensor<f64>;
type Profile = ProfileField<f64>;
type Mixed = MixedField<f64>;

/// Largest mass fraction allowed within 10% of the window edge.
pub const WRAP_TOLERANCE: f64 = 1e-6;

/// Trap basis (always `d = 2`) and periodic x-window of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Domain {
    pub n_max: usize,
    /// Quadrature nodes per axis; 0 selects `2 n_max + 1`.
    pub quad_nodes: usize,
    pub l_x: f64,
    pub n_x: usize,
}

impl Default for Domain {
    fn default() -> Self {
        Domain { n_max: 3, quad_nodes: 0, l_x: 64.0 * PI, n_x: 512 }
    }
}

impl Domain {
    pub fn new(n_max: usize, l_x: f64, n_x: usize) -> Self {
        Domain { n_max, quad_nodes: 0, l_x, n_x }
    }

    pub fn spec(&self) -> Result<BasisSpec> {
        let q = if self.quad_nodes == 0 { 2 * self.n_max + 1 } else { self.quad_nodes };
        BasisSpec::new(2, self.n_max, q)
    }

    pub fn basis(&self) -> Result<Basis> {
        build_basis(self.spec()?)
    }

    pub fn grid(&self) -> Result<Arc<XGrid<f64>>> {
        XGrid::new(self.l_x, self.n_x)
    }
}

/// Where interaction tensors come from.
#[derive(Clone, Debug, Default)]
pub struct Context {
    /// Directory of `RCT1` cache files; tensors are built in memory when unset.
    pub cache_dir: Option<PathBuf>,
}

impl Context {
    pub fn tensor(&self, basis: &Basis) -> Result<Tensor> {
        match &self.cache_dir {
            Some(dir) => load_or_build_tensor(basis, &dir.join(tensor_cache_name(&basis.spec()))),
            None => Ok(build_interaction_tensor(basis)),
        }
    }
}

pub fn tensor_cache_name(spec: &BasisSpec) -> String {
    format!("rct1-d{}-n{}-q{}.bin", spec.d, spec.n_max, spec.quad_nodes)
}

/// A named table whose first column is the time variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Series { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub id: String,
    pub params: serde_json::Value,
    pub seed: u64,
    pub series: Vec<Series>,
    /// Fitted exponents, drifts and ratios; booleans are stored as 0 / 1.
    pub verdicts: BTreeMap<String, f64>,
}

impl ExperimentReport {
    pub fn new<P: Serialize>(id: &str, params: &P, seed: u64) -> Result<Self> {
        Ok(ExperimentReport {
            id: id.into(),
            params: serde_json::to_value(params)?,
            seed,
            series: Vec::new(),
            verdicts: BTreeMap::new(),
        })
    }

    pub fn verdict(&self, key: &str) -> Option<f64> {
        self.verdicts.get(key).copied()
    }

    fn set(&mut self, key: &str, v: f64) {
        self.verdicts.insert(key.into(), v);
    }

    fn flag(&mut self, key: &str, v: bool) {
        self.set(key, if v { 1.0 } else { 0.0 });
    }

    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    /// Every series has nondecreasing time and finite entries; every verdict is finite.
    pub fn validate(&self) -> Result<()> {
        for s in &self.series {
            for w in s.rows.windows(2) {
                if !(w[1][0] >= w[0][0]) {
                    return Err(Error::InvalidParameter(format!("series {} is not ordered in time", s.name)));
                }
            }
            if s.rows.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { time: f64::NAN, context: format!("series {}", s.name) });
            }
        }
        if let Some((k, _)) = self.verdicts.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { time: f64::NAN, context: format!("verdict {k}") });
        }
        Ok(())
    }

    /// Hex digest of the id, parameters and seed; used in output file names.
    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.id.as_bytes());
        h.update(serde_json::to_vec(&self.params).unwrap_or_default());
        h.update(self.seed.to_le_bytes());
        hex::encode(&h.finalize()[..8])
    }

    /// One CSV per series plus a JSON summary, written atomically.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        self.validate()?;
        std::fs::create_dir_all(dir)?;
        let stem = format!("{}-{}", self.id, self.config_hash());
        let mut paths = Vec::new();
        let mut files = Vec::new();
        for s in &self.series {
            let name = format!("{stem}-{}.csv", s.name);
            let path = dir.join(&name);
            crate::io::write_atomic(&path, |w| {
                let mut wr = csv::Writer::from_writer(w);
                wr.write_record(&s.columns)?;
                for r in &s.rows {
                    wr.write_record(r.iter().map(|v| v.to_string()))?;
                }
                wr.flush()?;
                Ok(())
            })?;
            files.push(serde_json::json!({ "name": s.name, "columns": s.columns, "file": name }));
            paths.push(path);
        }
        let summary = serde_json::json!({
            "id": self.id,
            "params": self.params,
            "seed": self.seed,
            "verdicts": self.verdicts,
            "series": files,
        });
        let path = dir.join(format!("{stem}.json"));
        crate::io::write_atomic(&path, |w| {
            serde_json::to_writer_pretty(&mut *w, &summary)?;
            w.write_all(b"\n")?;
            Ok(())
        })?;
        paths.push(path);
        Ok(paths)
    }
}

/// Time sampling for the clock `tau(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clock {
    /// `tau = pi ln t`.
    PiLog,
    /// `tau = ln t` (ablation).
    Log,
}

impl Clock {
    pub fn tau(self, t: f64) -> f64 {
        match self {
            Clock::PiLog => PI * t.ln(),
            Clock::Log => t.ln(),
        }
    }
}

// ---------------------------------------------------------------- helpers

fn gaussian(grid: &Arc<XGrid<f64>>, amp: f64, width: f64, center: f64) -> Line<f64> {
    Line::from_fn(grid, |x| {
        let z = (x - center) / width;
        C64::new(amp * (-z * z / 2.0).exp(), 0.0)
    })
}

/// `n` log-spaced times from `t0` to `t1` inclusive.
pub fn log_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![t0];
    }
    let (a, b) = (t0.ln(), t1.ln());
    (0..n)
        .map(|k| if k + 1 == n { t1 } else { (a + (b - a) * k as f64 / (n - 1) as f64).exp() })
        .collect()
}

/// `a - b` on a shared frequency grid.
pub fn profile_diff(a: &Profile, b: &Profile) -> Result<Profile> {
    if a.basis().spec() != b.basis().spec() || a.nodes() != b.nodes() || a.l_x() != b.l_x() {
        return Err(Error::BasisMismatch);
    }
    let mut d = a.clone();
    for (x, y) in d.data.iter_mut().zip(&b.data) {
        *x -= y;
    }
    Ok(d)
}

/// Physical `L^2` norm of the field whose transform is the profile.
fn profile_l2(p: &Profile) -> f64 {
    (2.0 * PI * p.mass()).sqrt()
}

fn rss_advance(tensor: &Tensor, g: &Profile, kappa: f64, span: f64, dtau: f64) -> Result<Profile> {
    if span <= 0.0 {
        return Ok(g.clone());
    }
    let traj = evolve_rss(tensor, g, kappa, StepPlan::new(span, dtau, usize::MAX)?)?;
    Ok(traj.last().clone())
}

fn cnls_advance(u: &Mixed, kappa: f64, t_a: f64, t_b: f64, dt: f64) -> Result<Mixed> {
    let cfg = EvolutionConfig { kappa, dt, t_start: t_a, t_end: t_b, sample_every: usize::MAX };
    evolve_cnls_with(u, &cfg, |_, _| Ok(()))
}

fn nls_advance(psi: &Line<f64>, mu: f64, kappa: f64, t_a: f64, t_b: f64, dt: f64) -> Result<Line<f64>> {
    let cfg = EvolutionConfig { kappa, dt, t_start: t_a, t_end: t_b, sample_every: usize::MAX };
    Ok(evolve_1d_nls(psi, mu, &cfg)?.last().clone())
}

fn xpm_advance(
    pair: &(Line<f64>, Line<f64>),
    coupling: XpmCoupling,
    kappa: f64,
    t_a: f64,
    t_b: f64,
    dt: f64,
) -> Result<(Line<f64>, Line<f64>)> {
    let cfg = EvolutionConfig { kappa, dt, t_start: t_a, t_end: t_b, sample_every: usize::MAX };
    Ok(evolve_xpm(&pair.0, &pair.1, coupling, &cfg)?.last().clone())
}

/// `U(t) = e^{itD} G`, spectral.
pub fn seeded(g: &Profile, t: f64) -> Result<Mixed> {
    Ok(propagate_d(&MixedField::from_profile(g)?, t))
}

fn wrap_guard(u: &Mixed, t: f64) -> Result<()> {
    let w = u.wrap_fraction();
    if w > WRAP_TOLERANCE {
        return Err(Error::Wrap(format!("mass fraction {w:e} near the window edge at t = {t}")));
    }
    Ok(())
}

fn rel_distance(u: &Mixed, target: &Mixed) -> Result<f64> {
    let n = u.mass().sqrt();
    let d = u.l2_distance(target)?;
    Ok(if n > 0.0 { d / n } else { d })
}

fn phase(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

/// Profile of `amp * exp(-(x - c)^2 / 2 w^2) f(y)`, i.e. its transform in x.
fn product_profile(grid: &Arc<XGrid<f64>>, amp: f64, width: f64, center: f64, f: &HermiteField<f64>) -> Profile {
    MixedField::separable(&gaussian(grid, amp, width, center), f).to_profile()
}

fn check_times(t0: f64, t1: f64, min_t0: f64) -> Result<()> {
    if !(t0 >= min_t0 - 1e-12) || !(t1 > t0) || !t1.is_finite() {
        return Err(Error::InvalidParameter(format!("need {min_t0} <= t0 < t1, got [{t0}, {t1}]")));
    }
    Ok(())
}

/// Max over the last `fraction` of the samples (at least one).
fn end_window_max(values: &[f64], fraction: f64) -> f64 {
    let k = ((values.len() as f64 * fraction).ceil() as usize).clamp(1, values.len().max(1));
    values[values.len().saturating_sub(k)..].iter().copied().fold(0.0, f64::max)
}

// ---------------------------------------------------------------- diagnostics

/// One row of [`scattering_distance`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScatterRow {
    pub t: f64,
    pub tau: f64,
    pub l2: f64,
    pub sobolev: f64,
}

/// `||e^{-itD} U(t) - G(pi ln t)||` in `L^2` and `H^order`, for every sample of `u`.
/// Each `t` must hit a recorded time of `g` on the `pi ln t` clock.
pub fn scattering_distance(u: &[(f64, Mixed)], g: &Trajectory<Profile>, order: u32) -> Result<Vec<ScatterRow>> {
    let mut rows = Vec::with_capacity(u.len());
    for (t, ut) in u {
        if !(*t >= 1.0) {
            return Err(Error::ClockMismatch(format!("t = {t} precedes the clock origin t = 1")));
        }
        let tau = Clock::PiLog.tau(*t);
        let k = g
            .times
            .iter()
            .position(|&s| (s - tau).abs() <= 1e-9 * tau.abs().max(1.0))
            .ok_or_else(|| Error::ClockMismatch(format!("no limit-profile sample at tau = {tau} (t = {t})")))?;
        let f = profile_of(ut, *t).to_profile();
        let d = profile_diff(&f, &g.states[k])?;
        rows.push(ScatterRow { t: *t, tau, l2: profile_l2(&d), sobolev: s_norm(&d, order)?.sobolev });
    }
    Ok(rows)
}

/// Singular values (descending) of the matrix `G^(xi_m, mode_k)`.
pub fn separability_spectrum(p: &Profile) -> Vec<f64> {
    let len = p.basis().len();
    let m = DMatrix::from_fn(p.nodes(), len, |r, c| p.data[r * len + c]);
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// `sigma_2 / sigma_1`, zero for rank <= 1 data.
pub fn sigma_ratio(p: &Profile) -> f64 {
    let s = separability_spectrum(p);
    match (s.first(), s.get(1)) {
        (Some(&a), Some(&b)) if a > 0.0 => b / a,
        _ => 0.0,
    }
}

/// Least-squares fit of `log v = slope log t + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in `log v`.
    pub residual: f64,
}

/// Log-log slope of a positive series with at least 8 samples spanning a decade.
pub fn decay_fit(t: &[f64], v: &[f64]) -> Result<DecayFit> {
    if t.len() != v.len() {
        return Err(Error::Shape { expected: t.len(), got: v.len() });
    }
    if t.len() < 8 {
        return Err(Error::InvalidParameter(format!("decay fit needs >= 8 samples, got {}", t.len())));
    }
    if t.iter().chain(v).any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::InvalidParameter("decay fit needs positive finite values".into()));
    }
    let (lo, hi) = t.iter().fold((f64::MAX, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    if hi < 10.0 * lo * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter(format!("samples span [{lo}, {hi}], less than a decade")));
    }
    let x: Vec<f64> = t.iter().map(|a| a.ln()).collect();
    let y: Vec<f64> = v.iter().map(|a| a.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (x.iter().zip(&y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum::<f64>() / n).sqrt();
    Ok(DecayFit { slope, intercept, residual })
}

/// One row of [`stationary_phase_ratio`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StationaryRow {
    pub t: f64,
    /// `||N_0^t[F,F,F] - (pi/t) R[F,F,F]||_{L^2}`.
    pub distance: f64,
    /// `t ||N_0^t|| / (pi ||R||)`.
    pub ratio: f64,
}

/// Frozen-profile comparison of `N_0^t` with its stationary-phase limit `(pi/t) R`.
pub fn stationary_phase_ratio(tensor: &Tensor, f: &Mixed, t_list: &[f64], m_s: usize) -> Result<Vec<StationaryRow>> {
    if tensor.basis().spec() != f.basis().spec() {
        return Err(Error::BasisMismatch);
    }
    let r = MixedField::from_profile(&apply_r(tensor, &f.to_profile())?)?;
    let r_norm = r.mass().sqrt();
    let mut rows = Vec::with_capacity(t_list.len());
    for &t in t_list {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!("stationary phase needs t > 0, got {t}")));
        }
        wrap_guard(&propagate_d(f, t).to_physical(), t)?;
        let n0 = apply_n0(f, f, f, t, m_s)?;
        let distance = n0.l2_distance(&r.scaled(C64::new(PI / t, 0.0)))?;
        let ratio = if r_norm > 0.0 { t * n0.mass().sqrt() / (PI * r_norm) } else { 0.0 };
        rows.push(StationaryRow { t, distance, ratio });
    }
    Ok(rows)
}

// ---------------------------------------------------------------- experiments

/// Vortex profile `eps * gauss(x / width) g_n(y)` transformed in x.
fn vortex_profile(basis: &Basis, grid: &Arc<XGrid<f64>>, eps: f64, width: f64, n: usize) -> Result<Profile> {
    let g = special_g_n(basis, n, false)?;
    Ok(product_profile(grid, eps, width, 0.0, &g))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveOperatorConfig {
    pub domain: Domain,
    pub eps: f64,
    /// Vortex index `n` of the limit profile `eps * gauss g_n`.
    pub vortex: usize,
    pub width: f64,
    pub kappa: f64,
    pub t0: f64,
    pub t1: f64,
    pub samples: usize,
    pub dt: f64,
    pub dtau: f64,
    pub order: u32,
}

impl Default for WaveOperatorConfig {
    fn default() -> Self {
        WaveOperatorConfig {
            domain: Domain::new(3, 256.0 * PI, 2048),
            eps: 0.05,
            vortex: 1,
            width: 2.0,
            kappa: 1.0,
            t0: E,
            t1: 10.0 * E,
            samples: 21,
            dt: 0.01,
            dtau: 0.05,
            order: 2,
        }
    }
}

/// Seeds `U(t0) = e^{i t0 D} G(pi ln t0)`, runs CNLS to `t1` and tracks the drift
/// `||e^{-itD} U(t) - G(pi ln t)||_S` and the `L^inf_x H^1_y` decay.
pub fn wave_operator(cfg: &WaveOperatorConfig, ctx: &Context) -> Result<ExperimentReport> {
    check_times(cfg.t0, cfg.t1, E)?;
    let basis = cfg.domain.basis()?;
    let grid = cfg.domain.grid()?;
    let tensor = ctx.tensor(&basis)?;
    let times = log_times(cfg.t0, cfg.t1, cfg.samples.max(2));
    let mut g = rss_advance(&tensor, &vortex_profile(&basis, &grid, cfg.eps, cfg.width, cfg.vortex)?, cfg.kappa, PI * cfg.t0.ln(), cfg.dtau)?;
    let mut u = seeded(&g, cfg.t0)?;
    let mut series = Series::new("drift", &["t", "drift_s", "drift_l2", "linf_h1"]);
    for (j, &t) in times.iter().enumerate() {
        if j > 0 {
            let tp = times[j - 1];
            u = cnls_advance(&u, cfg.kappa, tp, t, cfg.dt)?;
            g = rss_advance(&tensor, &g, cfg.kappa, PI * (t.ln() - tp.ln()), cfg.dtau)?;
        }
        wrap_guard(&u, t)?;
        let d = profile_diff(&profile_of(&u, t).to_profile(), &g)?;
        series.push(vec![t, s_norm(&d, cfg.order)?.s_norm, profile_l2(&d), u.linf_h1()]);
    }
    let mut rep = ExperimentReport::new("wave-operator", cfg, 0)?;
    let ts = series.column("t").unwrap_or_default();
    let drift = series.column("drift_s").unwrap_or_default();
    let linf = series.column("linf_h1").unwrap_or_default();
    let early = ts.iter().zip(&drift).filter(|(t, _)| **t <= 3.0 * cfg.t0 * (1.0 + 1e-12)).map(|(_, d)| *d).fold(0.0, f64::max);
    rep.set("max_drift_3t0", early);
    rep.set("max_drift", drift.iter().copied().fold(0.0, f64::max));
    rep.set("drift_bound", 10.0 * cfg.eps.powi(3));
    if linf.iter().all(|v| *v > 0.0) && cfg.t1 >= 10.0 * cfg.t0 * (1.0 - 1e-12) {
        let fit = decay_fit(&ts, &linf)?;
        rep.set("decay_slope", fit.slope);
        rep.set("decay_residual", fit.residual);
    }
    rep.series.push(series);
    Ok(rep)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quasi1dVariant {
    /// `(i d_t - d_xx) psi = kappa mu_n |psi|^2 psi`.
    FixedCoupling,
    /// The explicit `pi kappa mu_n / t` solution.
    LogModified,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Quasi1dConfig {
    pub domain: Domain,
    pub vortex: usize,
    pub eps: f64,
    pub width: f64,
    pub kappa: f64,
    pub t0: f64,
    pub t1: f64,
    pub samples: usize,
    pub dt: f64,
    pub dtau: f64,
    pub variant: Quasi1dVariant,
    /// Coupling multiplier of the ablated comparison.
    pub ablation_factor: f64,
    /// Fraction of the samples forming the end window.
    pub end_fraction: f64,
}

impl Default for Quasi1dConfig {
    fn default() -> Self {
        Quasi1dConfig {
            domain: Domain::new(4, 256.0 * PI, 2048),
            vortex: 0,
            eps: 0.05,
            width: 2.0,
            kappa: 1.0,
            t0: E,
            t1: 10.0 * E,
            samples: 21,
            dt: 0.01,
            dtau: 0.05,
            variant: Quasi1dVariant::FixedCoupling,
            ablation_factor: 1.2,
            end_fraction: 0.25,
        }
    }
}

/// CNLS from wave-operator-seeded vortex data against `psi(t,x) e^{i lambda_n t} g_n(y)`.
pub fn quasi1d(cfg: &Quasi1dConfig, ctx: &Context) -> Result<ExperimentReport> {
    check_times(cfg.t0, cfg.t1, 1.0)?;
    let basis = cfg.domain.basis()?;
    let grid = cfg.domain.grid()?;
    let tensor = ctx.tensor(&basis)?;
    let n = cfg.vortex;
    let gn = special_g_n(&basis, n, false)?;
    let lam = basis.eig(n);
    let mu = coupling_mu(n);
    let g0 = vortex_profile(&basis, &grid, cfg.eps, cfg.width, n)?;
    let g = rss_advance(&tensor, &g0, cfg.kappa, PI * cfg.t0.ln(), cfg.dtau)?;
    let mut u = seeded(&g, cfg.t0)?;
    let strip = |line: Line<f64>, t: f64| Line { values: line.values.iter().map(|v| v * phase(-lam * t)).collect(), ..line };
    let phi = strip(seeded(&g0, 1.0)?.project_onto(&gn)?, 1.0);
    let mut psi = strip(u.project_onto(&gn)?, cfg.t0);
    let mut psi_abl = psi.clone();
    let times = log_times(cfg.t0, cfg.t1, cfg.samples.max(2));
    let mut series = Series::new("mismatch", &["t", "mismatch", "mismatch_ablated", "mismatch_no_phase"]);
    for (j, &t) in times.iter().enumerate() {
        if j > 0 {
            let tp = times[j - 1];
            u = cnls_advance(&u, cfg.kappa, tp, t, cfg.dt)?;
            if cfg.variant == Quasi1dVariant::FixedCoupling {
                psi = nls_advance(&psi, mu, cfg.kappa, tp, t, cfg.dt)?;
                psi_abl = nls_advance(&psi_abl, mu * cfg.ablation_factor, cfg.kappa, tp, t, cfg.dt)?;
            }
        }
        if cfg.variant == Quasi1dVariant::LogModified {
            psi = psi1_explicit(&phi, t, mu, cfg.kappa)?;
            psi_abl = psi1_explicit(&phi, t, mu * cfg.ablation_factor, cfg.kappa)?;
        }
        wrap_guard(&u, t)?;
        let target = |p: &Line<f64>, ph: f64| MixedField::separable(p, &gn).scaled(phase(ph));
        series.push(vec![
            t,
            rel_distance(&u, &target(&psi, lam * t))?,
            rel_distance(&u, &target(&psi_abl, lam * t))?,
            rel_distance(&u, &target(&psi, 0.0))?,
        ]);
    }
    let mut rep = ExperimentReport::new("quasi1d", cfg, 0)?;
    let col = |k: &str| series.column(k).unwrap_or_default();
    let (m, a, p) = (col("mismatch"), col("mismatch_ablated"), col("mismatch_no_phase"));
    let end = end_window_max(&m, cfg.end_fraction);
    rep.set("max_mismatch", m.iter().copied().fold(0.0, f64::max));
    rep.set("end_mismatch", end);
    rep.set("end_ablated", end_window_max(&a, cfg.end_fraction));
    rep.set("end_no_phase", end_window_max(&p, cfg.end_fraction));
    rep.set("coupling_ratio", end_window_max(&a, cfg.end_fraction) / end);
    rep.set("phase_ratio", end_window_max(&p, cfg.end_fraction) / end);
    rep.series.push(series);
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DipoleConfig {
    pub domain: Domain,
    pub eps: f64,
    /// Amplitudes of the `g_1` and `conj(g_1)` parts.
    pub plus: f64,
    pub minus: f64,
    pub width_plus: f64,
    pub width_minus: f64,
    pub kappa: f64,
    pub t0: f64,
    pub t1: f64,
    pub samples: usize,
    pub dt: f64,
    pub dtau: f64,
    pub end_fraction: f64,
    /// Length of the extra run with `plus = minus` (0 skips it).
    pub symmetric_span: f64,
}

impl Default for DipoleConfig {
    fn default() -> Self {
        DipoleConfig {
            domain: Domain::new(3, 256.0 * PI, 2048),
            eps: 0.05,
            plus: 1.0,
            minus: 0.6,
            width_plus: 2.0,
            width_minus: 1.5,
            kappa: 1.0,
            t0: E,
            t1: 10.0 * E,
            samples: 21,
            dt: 0.01,
            dtau: 0.05,
            end_fraction: 0.25,
            symmetric_span: 2.0,
        }
    }
}

/// CNLS from a seeded vortex/antivortex superposition against the XPM pair, with the
/// cross term switched off as ablation.
pub fn vortex_dipole(cfg: &DipoleConfig, ctx: &Context) -> Result<ExperimentReport> {
    check_times(cfg.t0, cfg.t1, 1.0)?;
    let basis = cfg.domain.basis()?;
    let grid = cfg.domain.grid()?;
    let tensor = ctx.tensor(&basis)?;
    let g1 = special_g_n(&basis, 1, false)?;
    let g1c = special_g_n(&basis, 1, true)?;
    let lam = basis.eig(1);
    let dipole = |a: f64, wa: f64, b: f64, wb: f64| -> Profile {
        let mut p = product_profile(&grid, cfg.eps * a, wa, 0.0, &g1);
        let q = product_profile(&grid, cfg.eps * b, wb, 0.0, &g1c);
        for (x, y) in p.data.iter_mut().zip(&q.data) {
            *x += y;
        }
        p
    };
    let g0 = dipole(cfg.plus, cfg.width_plus, cfg.minus, cfg.width_minus);
    let g = rss_advance(&tensor, &g0, cfg.kappa, PI * cfg.t0.ln(), cfg.dtau)?;
    let mut u = seeded(&g, cfg.t0)?;
    let strip = |line: Line<f64>, t: f64| Line { values: line.values.iter().map(|v| v * phase(-lam * t)).collect(), ..line };
    let start = (strip(u.project_onto(&g1)?, cfg.t0), strip(u.project_onto(&g1c)?, cfg.t0));
    let (mut xpm, mut dec) = (start.clone(), start);
    let decoupled = XpmCoupling { cross: 0.0, ..XpmCoupling::default() };
    let target = |pair: &(Line<f64>, Line<f64>), t: f64| -> Result<Mixed> {
        MixedField::separable(&pair.0, &g1).axpy(C64::new(1.0, 0.0), &MixedField::separable(&pair.1, &g1c)).map(|m| m.scaled(phase(lam * t)))
    };
    let times = log_times(cfg.t0, cfg.t1, cfg.samples.max(2));
    let mut series = Series::new("mismatch", &["t", "mismatch", "mismatch_decoupled"]);
    for (j, &t) in times.iter().enumerate() {
        if j > 0 {
            let tp = times[j - 1];
            u = cnls_advance(&u, cfg.kappa, tp, t, cfg.dt)?;
            xpm = xpm_advance(&xpm, XpmCoupling::default(), cfg.kappa, tp, t, cfg.dt)?;
            dec = xpm_advance(&dec, decoupled, cfg.kappa, tp, t, cfg.dt)?;
        }
        wrap_guard(&u, t)?;
        series.push(vec![t, rel_distance(&u, &target(&xpm, t)?)?, rel_distance(&u, &target(&dec, t)?)?]);
    }
    let mut rep = ExperimentReport::new("vortex-dipole", cfg, 0)?;
    let m = series.column("mismatch").unwrap_or_default();
    let a = series.column("mismatch_decoupled").unwrap_or_default();
    let end = end_window_max(&m, cfg.end_fraction);
    rep.set("max_mismatch", m.iter().copied().fold(0.0, f64::max));
    rep.set("end_mismatch", end);
    rep.set("end_decoupled", end_window_max(&a, cfg.end_fraction));
    rep.set("xpm_ratio", end_window_max(&a, cfg.end_fraction) / end);
    rep.series.push(series);

    if cfg.symmetric_span > 0.0 {
        let gs = dipole(1.0, cfg.width_plus, 1.0, cfg.width_plus);
        let gs = rss_advance(&tensor, &gs, cfg.kappa, PI * cfg.t0.ln(), cfg.dtau)?;
        let us = cnls_advance(&seeded(&gs, cfg.t0)?, cfg.kappa, cfg.t0, cfg.t0 + cfg.symmetric_span, cfg.dt)?;
        let (p, q) = (us.project_onto(&g1)?, us.project_onto(&g1c)?);
        let scale = p.linf().max(f64::MIN_POSITIVE);
        let defect = p.values.iter().zip(&q.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale;
        rep.set("symmetric_defect", defect);
        let pair = (p.clone(), p);
        let (xp, xm) = xpm_advance(&pair, XpmCoupling::default(), cfg.kappa, 0.0, cfg.symmetric_span, cfg.dt)?;
        let xd = xp.values.iter().zip(&xm.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        rep.set("symmetric_defect_xpm", xd / scale);
    }
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeparabilityConfig {
    pub n_max: usize,
    pub nodes: usize,
    pub l_x: f64,
    pub eps: f64,
    /// Width parameter `r(xi)` sweeps `[r_min, r_max]` along a tanh ramp.
    pub r_min: f64,
    pub r_max: f64,
    pub kappa: f64,
    pub tau_end: f64,
    pub dtau: f64,
    pub samples: usize,
    /// Vortex index of the rank-one comparison run.
    pub vortex: usize,
    pub vortex_dt: f64,
}

impl Default for SeparabilityConfig {
    fn default() -> Self {
        SeparabilityConfig {
            n_max: 6,
            nodes: 64,
            l_x: 16.0 * PI,
            eps: 0.5,
            r_min: 1.0,
            r_max: 2.0,
            kappa: 1.0,
            tau_end: 5.0,
            dtau: 0.01,
            samples: 10,
            vortex: 1,
            vortex_dt: 0.01,
        }
    }
}

/// `sigma_2 / sigma_1` along the limit flow of a width-modulated Gaussian profile, and
/// along the resonant truncation of a vortex.
pub fn non_separability(cfg: &SeparabilityConfig, ctx: &Context) -> Result<ExperimentReport> {
    let basis = build_basis(BasisSpec::minimal(2, cfg.n_max)?)?;
    let tensor = ctx.tensor(&basis)?;
    let pts = basis.grid_points(Grid::Analysis);
    let (r0, r1) = (cfg.r_min, cfg.r_max);
    let r_of = |xi: f64| r0 + (r1 - r0) * (1.0 + xi.tanh()) / 2.0;
    let seed = ProfileField::from_fn(&basis, cfg.l_x, cfg.nodes, |xi| {
        let r = r_of(xi);
        let amp = cfg.eps * (-xi * xi / 2.0).exp() * r;
        let vals: Vec<C64> = pts
            .chunks(2)
            .map(|y| C64::new(amp * (-(y[0] * y[0] + y[1] * y[1]) * r * r / 2.0).exp(), 0.0))
            .collect();
        analyze(&basis, &vals).map(|f| f.coeffs).unwrap_or_default()
    })?;
    let gn = special_g_n(&basis, cfg.vortex, false)?;
    let vortex = ProfileField::separable(&gn, cfg.l_x, cfg.nodes, |xi| C64::new(cfg.eps * (-xi * xi / 2.0).exp(), 0.0))?;
    let every = ((cfg.tau_end / cfg.dtau).round() as usize / cfg.samples.max(1)).max(1);
    let a = evolve_rss(&tensor, &seed, cfg.kappa, StepPlan::new(cfg.tau_end, cfg.dtau, every)?)?;
    let mut series = Series::new("seed", &["tau", "sigma_ratio"]);
    for (tau, p) in a.times.iter().zip(&a.states) {
        series.push(vec![*tau, sigma_ratio(p)]);
    }
    // the vortex comparison runs the resonant truncation of CNLS over the same tau range
    let t_end = (cfg.tau_end / PI).exp();
    let steps = ((t_end - 1.0) / cfg.vortex_dt).ceil() as usize;
    let rt = EvolutionConfig {
        kappa: cfg.kappa,
        dt: cfg.vortex_dt,
        t_start: 1.0,
        t_end,
        sample_every: (steps / cfg.samples.max(1)).max(1),
    };
    let mut vseries = Series::new("vortex", &["t", "sigma_ratio"]);
    evolve_resonant_truncated_with(&MixedField::from_profile(&vortex)?, &rt, 2 * cfg.n_max + 1, |t, w| {
        vseries.push(vec![t, sigma_ratio(&w.to_profile())]);
        Ok(())
    })?;
    let seed_col = series.column("sigma_ratio").unwrap_or_default();
    let vort_col = vseries.column("sigma_ratio").unwrap_or_default();
    let mut rep = ExperimentReport::new("non-separability", cfg, 0)?;
    let init = seed_col.first().copied().unwrap_or(0.0);
    let min = seed_col.iter().copied().fold(f64::INFINITY, f64::min);
    rep.set("initial_ratio", init);
    rep.set("min_ratio", min);
    rep.set("min_over_initial", if init > 0.0 { min / init } else { 0.0 });
    rep.set("vortex_max_ratio", vort_col.iter().copied().fold(0.0, f64::max));
    rep.series.push(vseries);
    rep.series.push(series);
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationaryPhaseConfig {
    pub domain: Domain,
    pub vortex: usize,
    pub width: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub samples: usize,
    /// Extra time at which the ratio is reported.
    pub ratio_time: f64,
    /// `s`-nodes of `N_0`; 0 selects `2 n_max + 1`.
    pub m_s: usize,
}

impl Default for StationaryPhaseConfig {
    fn default() -> Self {
        StationaryPhaseConfig {
            domain: Domain::new(1, 512.0 * PI, 4096),
            vortex: 1,
            width: 1.5,
            t_min: 10.0,
            t_max: 100.0,
            samples: 9,
            ratio_time: 50.0,
            m_s: 0,
        }
    }
}

/// Frozen Gaussian-vortex profile: decay of `N_0^t - (pi/t) R` and the ratio at `ratio_time`.
pub fn stationary_phase(cfg: &StationaryPhaseConfig, ctx: &Context) -> Result<ExperimentReport> {
    let basis = cfg.domain.basis()?;
    let grid = cfg.domain.grid()?;
    let tensor = ctx.tensor(&basis)?;
    let gn = special_g_n(&basis, cfg.vortex, false)?;
    let f = MixedField::separable(&gaussian(&grid, 1.0, cfg.width, 0.0), &gn).to_spectral();
    let m_s = if cfg.m_s == 0 { 2 * basis.n_max() + 1 } else { cfg.m_s };
    let times = log_times(cfg.t_min, cfg.t_max, cfg.samples);
    let rows = stationary_phase_ratio(&tensor, &f, &times, m_s)?;
    let mut series = Series::new("stationary", &["t", "distance", "ratio"]);
    for r in &rows {
        series.push(vec![r.t, r.distance, r.ratio]);
    }
    let fit = decay_fit(&times, &rows.iter().map(|r| r.distance).collect::<Vec<_>>())?;
    let at = stationary_phase_ratio(&tensor, &f, &[cfg.ratio_time], m_s)?[0];
    let mut rep = ExperimentReport::new("stationary-phase", cfg, 0)?;
    rep.set("slope", fit.slope);
    rep.set("fit_residual", fit.residual);
    rep.set("ratio_at", at.ratio);
    rep.series.push(series);
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchedLimitConfig {
    pub domain: Domain,
    pub eps: f64,
    pub width: f64,
    pub kappa: f64,
    /// Highest level of the random initial trap profile.
    pub top_level: usize,
    pub seed: u64,
    /// Windows are `[T_n, T_{n+1}]`, `T_n = e^{n/pi}`, for `n = first_window ..`.
    pub first_window: usize,
    pub windows: usize,
    pub samples_per_window: usize,
    pub dt: f64,
    pub dtau: f64,
    pub order: u32,
}

impl Default for MatchedLimitConfig {
    fn default() -> Self {
        MatchedLimitConfig {
            domain: Domain::new(4, 64.0 * PI, 512),
            eps: 0.05,
            width: 1.0,
            kappa: 1.0,
            top_level: 2,
            seed: 7,
            first_window: 1,
            windows: 3,
            samples_per_window: 8,
            dt: 1e-3,
            dtau: 0.01,
            order: 2,
        }
    }
}

/// Random trap profile on levels `<= top`, normalized to `||g_0||`.
pub fn random_trap_profile(basis: &Basis, top: usize, seed: u64) -> Result<HermiteField<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<C64> = basis
        .levels()
        .iter()
        .map(|&l| {
            let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if l <= top {
                z
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    let f = HermiteField::from_coeffs(basis, c)?;
    let n = f.norm();
    Ok(if n > 0.0 { f.scaled(C64::new(PI.sqrt() / n, 0.0)) } else { f })
}

/// At each `T_n` the limit flow restarts from the current profile; reports the sup over
/// the window of `||F(t) - G_n(pi ln t)||_S`, and the same with the `ln t` clock.
pub fn matched_limit(cfg: &MatchedLimitConfig, ctx: &Context) -> Result<ExperimentReport> {
    if cfg.windows == 0 || cfg.samples_per_window == 0 {
        return Err(Error::InvalidParameter("need at least one window and one sample".into()));
    }
    let basis = cfg.domain.basis()?;
    let grid = cfg.domain.grid()?;
    let tensor = ctx.tensor(&basis)?;
    let f = random_trap_profile(&basis, cfg.top_level, cfg.seed)?;
    let mut u = MixedField::separable(&gaussian(&grid, cfg.eps, cfg.width, 0.0), &f).to_spectral();
    let t_of = |tau: f64| (tau / PI).exp();
    let first = cfg.first_window as f64;
    let mut t = 1.0;
    let t_first = t_of(first);
    u = cnls_advance(&u, cfg.kappa, t, t_first, cfg.dt)?;
    t = t_first;
    let mut series = Series::new("windows", &["t", "window", "distance", "distance_log_clock"]);
    let mut rep = ExperimentReport::new("matched-limit", cfg, cfg.seed)?;
    let (mut maxima, mut ablated) = (Vec::new(), Vec::new());
    let step = 1.0 / cfg.samples_per_window as f64;
    for w in 0..cfg.windows {
        let tau_n = first + w as f64;
        let mut g = profile_of(&u, t).to_profile();
        let mut g_log = g.clone();
        let (mut best, mut best_log) = (0.0f64, 0.0f64);
        for j in 1..=cfg.samples_per_window {
            let tn = t_of(tau_n + j as f64 * step);
            u = cnls_advance(&u, cfg.kappa, t, tn, cfg.dt)?;
            g = rss_advance(&tensor, &g, cfg.kappa, step, cfg.dtau)?;
            g_log = rss_advance(&tensor, &g_log, cfg.kappa, step / PI, cfg.dtau)?;
            t = tn;
            wrap_guard(&u, t)?;
            let prof = profile_of(&u, t).to_profile();
            let d = s_norm(&profile_diff(&prof, &g)?, cfg.order)?.s_norm;
            let dl = s_norm(&profile_diff(&prof, &g_log)?, cfg.order)?.s_norm;
            best = best.max(d);
            best_log = best_log.max(dl);
            series.push(vec![t, (cfg.first_window + w) as f64, d, dl]);
        }
        rep.set(&format!("window_max_{w}"), best);
        rep.set(&format!("window_max_log_clock_{w}"), best_log);
        maxima.push(best);
        ablated.push(best_log);
    }
    rep.flag("decreasing", maxima.windows(2).all(|p| p[1] < p[0]));
    rep.flag("clock_beats_ablation", maxima.iter().zip(&ablated).all(|(m, a)| m < a));
    rep.series.push(series);
    Ok(rep)
}
