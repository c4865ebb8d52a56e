//! Split-step and RK4 solvers on the periodic x-window times the Hermite basis.
//!
//! `D = -d_xx + H`. The linear flow `e^{itD}` multiplies the transform value at
//! `(xi, level n)` by `e^{it(xi^2 + 2n + d)}`, so `U = e^{itD} U0` solves `(i d_t + D) U = 0`.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fourier::{Line, XGrid};
use crate::hermite::{Grid, HermiteBasis, HermiteField};
use crate::limit::{s_norm, z_norm, ProfileField};
use crate::resonant::Trajectory;
use crate::scalar::{all_finite, cis, czero, Real, C};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Repr {
    Physical,
    Spectral,
}

/// `U(x, y)` as Hermite coefficients per x-sample (physical) or per frequency (spectral).
#[derive(Clone, Debug)]
pub struct MixedField<T: Real> {
    basis: Arc<HermiteBasis<T>>,
    grid: Arc<XGrid<T>>,
    repr: Repr,
    /// Mode-major: `data[k * n_x + j]`.
    pub data: Vec<C<T>>,
}

impl<T: Real> MixedField<T> {
    pub fn zeros(basis: &Arc<HermiteBasis<T>>, grid: &Arc<XGrid<T>>, repr: Repr) -> Self {
        MixedField { basis: basis.clone(), grid: grid.clone(), repr, data: vec![czero(); basis.len() * grid.n_x()] }
    }

    /// Physical field with `U(x_j, .) = f(x_j)` (coefficient vectors).
    pub fn from_fn<F: Fn(T) -> Vec<C<T>>>(basis: &Arc<HermiteBasis<T>>, grid: &Arc<XGrid<T>>, f: F) -> Result<Self> {
        let mut u = Self::zeros(basis, grid, Repr::Physical);
        let n = grid.n_x();
        for (j, &x) in grid.x().iter().enumerate() {
            let c = f(x);
            if c.len() != basis.len() {
                return Err(Error::Shape { expected: basis.len(), got: c.len() });
            }
            for (k, v) in c.into_iter().enumerate() {
                u.data[k * n + j] = v;
            }
        }
        Ok(u)
    }

    /// `psi(x) f(y)`.
    pub fn separable(psi: &Line<T>, f: &HermiteField<T>) -> Self {
        let n = psi.grid.n_x();
        let mut u = Self::zeros(f.basis(), &psi.grid, Repr::Physical);
        for (k, c) in f.coeffs.iter().enumerate() {
            for (j, p) in psi.values.iter().enumerate() {
                u.data[k * n + j] = p * c;
            }
        }
        u
    }

    pub fn basis(&self) -> &Arc<HermiteBasis<T>> {
        &self.basis
    }

    pub fn grid(&self) -> &Arc<XGrid<T>> {
        &self.grid
    }

    pub fn repr(&self) -> Repr {
        self.repr
    }

    pub fn mode_line(&self, k: usize) -> &[C<T>] {
        let n = self.grid.n_x();
        &self.data[k * n..(k + 1) * n]
    }

    fn check_layout(&self, other: &Self) -> Result<()> {
        if self.basis.spec() != other.basis.spec() || *self.grid != *other.grid {
            return Err(Error::BasisMismatch);
        }
        Ok(())
    }

    pub fn to_spectral(&self) -> Self {
        match self.repr {
            Repr::Spectral => self.clone(),
            Repr::Physical => {
                let mut out = self.clone();
                let n = self.grid.n_x();
                out.data.par_chunks_mut(n).for_each(|line| self.grid.forward(line));
                out.repr = Repr::Spectral;
                out
            }
        }
    }

    pub fn to_physical(&self) -> Self {
        match self.repr {
            Repr::Physical => self.clone(),
            Repr::Spectral => {
                let mut out = self.clone();
                let n = self.grid.n_x();
                out.data.par_chunks_mut(n).for_each(|line| self.grid.inverse(line));
                out.repr = Repr::Physical;
                out
            }
        }
    }

    /// `||U||^2_{L^2_{x,y}}`.
    pub fn mass(&self) -> T {
        let s: T = self.data.iter().map(|c| c.norm_sqr()).sum();
        match self.repr {
            Repr::Physical => s * self.grid.dx(),
            Repr::Spectral => s * self.grid.dxi() * T::lit(2.0) * T::PI(),
        }
    }

    /// `int sum_k lambda_k |U_k|^2 dx`.
    pub fn ke_y(&self) -> T {
        let n = self.grid.n_x();
        let s: T = self
            .data
            .chunks(n)
            .zip(self.basis.levels())
            .map(|(line, &l)| self.basis.eig(l) * line.iter().map(|c| c.norm_sqr()).sum::<T>())
            .sum();
        match self.repr {
            Repr::Physical => s * self.grid.dx(),
            Repr::Spectral => s * self.grid.dxi() * T::lit(2.0) * T::PI(),
        }
    }

    /// `sup_x (sum_k lambda_k |U_k(x)|^2)^{1/2}`, an `L^inf_x H^1_y` norm.
    pub fn linf_h1(&self) -> T {
        let p = self.to_physical();
        let n = self.grid.n_x();
        let mut acc = vec![T::zero(); n];
        for (line, &l) in p.data.chunks(n).zip(self.basis.levels()) {
            let w = self.basis.eig(l);
            for (a, c) in acc.iter_mut().zip(line) {
                *a = *a + w * c.norm_sqr();
            }
        }
        acc.into_iter().fold(T::zero(), T::max).sqrt()
    }

    /// `sup_x |U(x, y)|` over the analysis nodes.
    pub fn linf(&self) -> T {
        let p = self.to_physical();
        let n = self.grid.n_x();
        (0..n)
            .into_par_iter()
            .map(|j| {
                let c = p.column(j);
                self.basis
                    .synthesize_coeffs(Grid::Analysis, &c)
                    .iter()
                    .map(|v| v.norm())
                    .fold(T::zero(), T::max)
            })
            .reduce(T::zero, T::max)
    }

    pub(crate) fn column(&self, j: usize) -> Vec<C<T>> {
        let n = self.grid.n_x();
        (0..self.basis.len()).map(|k| self.data[k * n + j]).collect()
    }

    /// `<f, U(x, .)> / ||f||^2` for each x (physical samples).
    pub fn project_onto(&self, f: &HermiteField<T>) -> Result<Line<T>> {
        if f.basis().spec() != self.basis.spec() {
            return Err(Error::BasisMismatch);
        }
        let p = self.to_physical();
        let n = self.grid.n_x();
        let nf = f.norm_sqr();
        let mut vals = vec![czero(); n];
        for (k, c) in f.coeffs.iter().enumerate() {
            if *c == czero() {
                continue;
            }
            for (v, u) in vals.iter_mut().zip(&p.data[k * n..(k + 1) * n]) {
                *v = *v + c.conj() * u;
            }
        }
        Ok(Line { grid: self.grid.clone(), values: vals.into_iter().map(|v| v / nf).collect() })
    }

    /// `||U - other||_{L^2}` (any representations).
    pub fn l2_distance(&self, other: &Self) -> Result<T> {
        self.check_layout(other)?;
        let a = self.to_spectral();
        let b = other.to_spectral();
        let s: T = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).norm_sqr()).sum();
        Ok((s * self.grid.dxi() * T::lit(2.0) * T::PI()).sqrt())
    }

    pub fn scaled(&self, s: C<T>) -> Self {
        MixedField { data: self.data.iter().map(|c| c * s).collect(), ..self.clone() }
    }

    /// `self + s * other`, in the representation of `self`.
    pub fn axpy(&self, s: C<T>, other: &Self) -> Result<Self> {
        self.check_layout(other)?;
        let o = if other.repr == self.repr {
            other.clone()
        } else if self.repr == Repr::Spectral {
            other.to_spectral()
        } else {
            other.to_physical()
        };
        Ok(MixedField { data: self.data.iter().zip(&o.data).map(|(a, b)| a + b * s).collect(), ..self.clone() })
    }

    /// Mass fraction with `|xi|` above two thirds of the resolved band.
    pub fn alias_fraction(&self) -> T {
        let s = self.to_spectral();
        let n = self.grid.n_x();
        let cut = self.grid.xi_max() * T::lit(2.0 / 3.0);
        let mut hi = T::zero();
        let mut tot = T::zero();
        for line in s.data.chunks(n) {
            for (c, &xi) in line.iter().zip(self.grid.xi()) {
                let m = c.norm_sqr();
                tot = tot + m;
                if xi.abs() > cut {
                    hi = hi + m;
                }
            }
        }
        if tot == T::zero() {
            T::zero()
        } else {
            hi / tot
        }
    }

    /// Mass fraction within 10% of the window edge.
    pub fn wrap_fraction(&self) -> T {
        let p = self.to_physical();
        let n = self.grid.n_x();
        let cut = self.grid.l_x() * T::lit(0.4);
        let mut hi = T::zero();
        let mut tot = T::zero();
        for line in p.data.chunks(n) {
            for (c, &x) in line.iter().zip(self.grid.x()) {
                let m = c.norm_sqr();
                tot = tot + m;
                if x.abs() > cut {
                    hi = hi + m;
                }
            }
        }
        if tot == T::zero() {
            T::zero()
        } else {
            hi / tot
        }
    }

    /// Transform values on the sorted frequency grid.
    pub fn to_profile(&self) -> ProfileField<T> {
        let s = self.to_spectral();
        let n = self.grid.n_x();
        let len = self.basis.len();
        let mut p = ProfileField::zeros(&self.basis, self.grid.l_x(), n).expect("valid window");
        for (m, &src) in self.grid.sorted_order().iter().enumerate() {
            for k in 0..len {
                p.data[m * len + k] = s.data[k * n + src];
            }
        }
        p
    }

    /// Spectral field from a profile whose node count equals the window size.
    pub fn from_profile(p: &ProfileField<T>) -> Result<Self> {
        let grid = p.window()?;
        let n = grid.n_x();
        let len = p.basis().len();
        let mut u = Self::zeros(p.basis(), &grid, Repr::Spectral);
        for (m, &dst) in grid.sorted_order().iter().enumerate() {
            for k in 0..len {
                u.data[k * n + dst] = p.data[m * len + k];
            }
        }
        Ok(u)
    }
}

/// Multiply spectral data by `e^{i (tx xi^2 + sy lambda_n)}`.
fn phase_split<T: Real>(u: &mut MixedField<T>, tx: T, sy: T) {
    debug_assert_eq!(u.repr, Repr::Spectral);
    let n = u.grid.n_x();
    let xphase: Vec<C<T>> = u.grid.xi().iter().map(|&xi| cis(tx * xi * xi)).collect();
    let basis = u.basis.clone();
    u.data.par_chunks_mut(n).zip(basis.levels().par_iter()).for_each(|(line, &l)| {
        let yp = cis(sy * basis.eig(l));
        for (c, p) in line.iter_mut().zip(&xphase) {
            *c = *c * p * yp;
        }
    });
}

/// `e^{itD} U`, returned in spectral form.
pub fn propagate_d<T: Real>(u: &MixedField<T>, t: T) -> MixedField<T> {
    let mut s = u.to_spectral();
    phase_split(&mut s, t, t);
    s
}

/// The profile `F = e^{-itD} U`.
pub fn profile_of<T: Real>(u: &MixedField<T>, t: T) -> MixedField<T> {
    propagate_d(u, -t)
}

/// Pointwise `F conj(G) H` on the product lattice, projected back to coefficients (physical in, physical out).
fn triple_product<T: Real>(f: &MixedField<T>, g: &MixedField<T>, h: &MixedField<T>) -> MixedField<T> {
    let n = f.grid.n_x();
    let basis = &f.basis;
    let cols: Vec<Vec<C<T>>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let a = basis.synthesize_coeffs(Grid::Product, &f.column(j));
            let b = basis.synthesize_coeffs(Grid::Product, &g.column(j));
            let c = basis.synthesize_coeffs(Grid::Product, &h.column(j));
            let prod: Vec<C<T>> = a.iter().zip(&b).zip(&c).map(|((x, y), z)| x * y.conj() * z).collect();
            basis.analyze_coeffs(Grid::Product, &prod)
        })
        .collect();
    let mut out = MixedField::zeros(basis, &f.grid, Repr::Physical);
    for (j, col) in cols.into_iter().enumerate() {
        for (k, v) in col.into_iter().enumerate() {
            out.data[k * n + j] = v;
        }
    }
    out
}

/// `N^t[F,G,H] = e^{-itD}(e^{itD}F conj(e^{itD}G) e^{itD}H)`, spectral output.
pub fn apply_full_nonlinearity<T: Real>(
    f: &MixedField<T>,
    g: &MixedField<T>,
    h: &MixedField<T>,
    t: T,
) -> Result<MixedField<T>> {
    f.check_layout(g)?;
    f.check_layout(h)?;
    let a = propagate_d(f, t).to_physical();
    let b = propagate_d(g, t).to_physical();
    let c = propagate_d(h, t).to_physical();
    Ok(profile_of(&triple_product(&a, &b, &c), t))
}

/// `N_0^t[F,G,H]`: the `s`-average over `[0, pi)` (`m_s` nodes) of
/// `e^{it d_xx - isH}(e^{-it d_xx + isH}F conj(..G) (..H))`, spectral output.
pub fn apply_n0<T: Real>(
    f: &MixedField<T>,
    g: &MixedField<T>,
    h: &MixedField<T>,
    t: T,
    m_s: usize,
) -> Result<MixedField<T>> {
    f.check_layout(g)?;
    f.check_layout(h)?;
    let required = 2 * f.basis.n_max() + 1;
    if m_s < required {
        return Err(Error::QuadratureBound { what: "N0 s-nodes", got: m_s, required });
    }
    let fs = f.to_spectral();
    let gs = g.to_spectral();
    let hs = h.to_spectral();
    let same_gh = std::ptr::eq(g, h) || g.data == h.data;
    let mut acc = MixedField::zeros(&f.basis, &f.grid, Repr::Spectral);
    for m in 0..m_s {
        let s = T::PI() * T::from_usize_lossy(m) / T::from_usize_lossy(m_s);
        let prop = |x: &MixedField<T>| {
            let mut y = x.clone();
            phase_split(&mut y, t, s);
            y.to_physical()
        };
        let a = prop(&fs);
        let b = prop(&gs);
        let c = if same_gh { b.clone() } else { prop(&hs) };
        let mut p = triple_product(&a, &b, &c).to_spectral();
        phase_split(&mut p, -t, -s);
        for (o, v) in acc.data.iter_mut().zip(&p.data) {
            *o = *o + v;
        }
    }
    let inv = T::one() / T::from_usize_lossy(m_s);
    Ok(acc.scaled(C::new(inv, T::zero())))
}

/// Time stepping parameters for the split-step and RK4 solvers.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvolutionConfig {
    pub kappa: f64,
    pub dt: f64,
    pub t_start: f64,
    pub t_end: f64,
    /// Record every this many steps (the final state is always recorded).
    pub sample_every: usize,
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_end >= self.t_start) {
            return Err(Error::InvalidParameter(format!(
                "t_end = {} precedes t_start = {}",
                self.t_end, self.t_start
            )));
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidParameter("sample_every must be >= 1".into()));
        }
        Ok(())
    }

    fn plan(&self) -> crate::resonant::StepPlan {
        crate::resonant::StepPlan { t_end: self.t_end - self.t_start, dt: self.dt, sample_every: self.sample_every }
    }
}

/// Exact substep of `i dU/dt = kappa |U|^2 U` on the product lattice, projected in increment form.
/// Each x-column is then rescaled to its incoming norm, which the projected flow conserves.
fn nonlinear_substep<T: Real>(u: &mut MixedField<T>, kappa: T, dt: T) {
    debug_assert_eq!(u.repr, Repr::Physical);
    let n = u.grid.n_x();
    let basis = u.basis.clone();
    let cols: Vec<Vec<C<T>>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let col = u.column(j);
            if col.iter().all(|c| *c == czero()) {
                return col;
            }
            let vals = basis.synthesize_coeffs(Grid::Product, &col);
            let inc: Vec<C<T>> = vals
                .iter()
                .map(|v| {
                    let th = -kappa * dt * v.norm_sqr();
                    // e^{i th} - 1 without cancellation
                    let half = th / T::lit(2.0);
                    let em1 = C::new(-T::lit(2.0) * half.sin() * half.sin(), th.sin());
                    v * em1
                })
                .collect();
            let mut out: Vec<C<T>> =
                col.iter().zip(basis.analyze_coeffs(Grid::Product, &inc)).map(|(c, v)| c + v).collect();
            let before: T = col.iter().map(|c| c.norm_sqr()).sum();
            let after: T = out.iter().map(|c| c.norm_sqr()).sum();
            if after > T::zero() {
                let s = (before / after).sqrt();
                out.iter_mut().for_each(|c| *c = *c * s);
            }
            out
        })
        .collect();
    for (j, col) in cols.into_iter().enumerate() {
        for (k, v) in col.into_iter().enumerate() {
            u.data[k * n + j] = v;
        }
    }
}

fn abort_if_nonfinite<T: Real>(data: &[C<T>], t: f64, what: &str) -> Result<()> {
    if all_finite(data) {
        Ok(())
    } else {
        Err(Error::NonFinite { time: t, context: what.into() })
    }
}

/// Strang splitting for `(i d_t + D) U = kappa |U|^2 U`. `observe(t, U)` sees the
/// initial state and every recorded state (spectral representation).
pub fn evolve_cnls_with<T: Real, F>(u0: &MixedField<T>, cfg: &EvolutionConfig, mut observe: F) -> Result<MixedField<T>>
where
    F: FnMut(f64, &MixedField<T>) -> Result<()>,
{
    cfg.validate()?;
    let plan = cfg.plan();
    let kappa = T::lit(cfg.kappa);
    let mut u = u0.to_spectral();
    let mut t = cfg.t_start;
    observe(t, &u)?;
    let mut warned = false;
    for k in 0..plan.steps() {
        let h = plan.step_len(k);
        let half = T::lit(h / 2.0);
        phase_split(&mut u, half, half);
        let mut p = u.to_physical();
        nonlinear_substep(&mut p, kappa, T::lit(h));
        u = p.to_spectral();
        phase_split(&mut u, half, half);
        t += h;
        abort_if_nonfinite(&u.data, t, "CNLS split step")?;
        if plan.records(k) {
            if !warned && u.alias_fraction() > T::lit(1e-8) {
                log::warn!("t = {t}: spectral content above 2/3 of the band; refine n_x");
                warned = true;
            }
            observe(t, &u)?;
        }
    }
    Ok(u)
}

/// [`evolve_cnls_with`] collecting the recorded states.
pub fn evolve_cnls<T: Real>(u0: &MixedField<T>, cfg: &EvolutionConfig) -> Result<Trajectory<MixedField<T>>> {
    let mut traj = Trajectory { times: Vec::new(), states: Vec::new() };
    evolve_cnls_with(u0, cfg, |t, u| {
        traj.times.push(t);
        traj.states.push(u.clone());
        Ok(())
    })?;
    Ok(traj)
}

/// RK4 on `i dW/dt = kappa N_0^t[W,W,W]` (W is a profile).
pub fn evolve_resonant_truncated_with<T: Real, F>(
    w0: &MixedField<T>,
    cfg: &EvolutionConfig,
    m_s: usize,
    mut observe: F,
) -> Result<MixedField<T>>
where
    F: FnMut(f64, &MixedField<T>) -> Result<()>,
{
    cfg.validate()?;
    let plan = cfg.plan();
    let mi = C::new(T::zero(), -T::lit(cfg.kappa));
    let rhs = |t: f64, w: &MixedField<T>| -> Result<MixedField<T>> {
        Ok(apply_n0(w, w, w, T::lit(t), m_s)?.scaled(mi))
    };
    let mut w = w0.to_spectral();
    let mut t = cfg.t_start;
    observe(t, &w)?;
    let two = C::new(T::lit(2.0), T::zero());
    for k in 0..plan.steps() {
        let h = plan.step_len(k);
        let hh = T::lit(h);
        let half = C::new(hh / T::lit(2.0), T::zero());
        let k1 = rhs(t, &w)?;
        let k2 = rhs(t + h / 2.0, &w.axpy(half, &k1)?)?;
        let k3 = rhs(t + h / 2.0, &w.axpy(half, &k2)?)?;
        let k4 = rhs(t + h, &w.axpy(C::new(hh, T::zero()), &k3)?)?;
        let sixth = C::new(hh / T::lit(6.0), T::zero());
        let sum = k1.axpy(two, &k2)?.axpy(two, &k3)?.axpy(C::new(T::one(), T::zero()), &k4)?;
        w = w.axpy(sixth, &sum)?;
        t += h;
        abort_if_nonfinite(&w.data, t, "resonant-truncated RK4")?;
        if plan.records(k) {
            observe(t, &w)?;
        }
    }
    Ok(w)
}

pub fn evolve_resonant_truncated<T: Real>(
    w0: &MixedField<T>,
    cfg: &EvolutionConfig,
    m_s: usize,
) -> Result<Trajectory<MixedField<T>>> {
    let mut traj = Trajectory { times: Vec::new(), states: Vec::new() };
    evolve_resonant_truncated_with(w0, cfg, m_s, |t, w| {
        traj.times.push(t);
        traj.states.push(w.clone());
        Ok(())
    })?;
    Ok(traj)
}

/// Free step `psi^ <- e^{i h xi^2} psi^` on physical samples.
fn free_step<T: Real>(line: &mut [C<T>], grid: &XGrid<T>, h: T) {
    grid.forward(line);
    for (c, &xi) in line.iter_mut().zip(grid.xi()) {
        *c = *c * cis(h * xi * xi);
    }
    grid.inverse(line);
}

/// Strang splitting for `(i d_t - d_xx) psi = kappa mu |psi|^2 psi`.
pub fn evolve_1d_nls<T: Real>(psi0: &Line<T>, mu: T, cfg: &EvolutionConfig) -> Result<Trajectory<Line<T>>> {
    cfg.validate()?;
    let plan = cfg.plan();
    let g = T::lit(cfg.kappa) * mu;
    let grid = psi0.grid.clone();
    let mut v = psi0.values.clone();
    let mut t = cfg.t_start;
    let mut traj = Trajectory { times: vec![t], states: vec![psi0.clone()] };
    for k in 0..plan.steps() {
        let h = plan.step_len(k);
        let hh = T::lit(h);
        free_step(&mut v, &grid, hh / T::lit(2.0));
        for c in v.iter_mut() {
            *c = *c * cis(-g * hh * c.norm_sqr());
        }
        free_step(&mut v, &grid, hh / T::lit(2.0));
        t += h;
        abort_if_nonfinite(&v, t, "1D NLS split step")?;
        if plan.records(k) {
            traj.times.push(t);
            traj.states.push(Line { grid: grid.clone(), values: v.clone() });
        }
    }
    Ok(traj)
}

/// Couplings of the dipole system
/// `(i d_t - d_xx) psi_+- = (kappa/4)(self_c |psi_+-|^2 + cross |psi_-+|^2) psi_+-`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct XpmCoupling {
    pub self_c: f64,
    pub cross: f64,
}

impl Default for XpmCoupling {
    fn default() -> Self {
        XpmCoupling { self_c: 1.0, cross: 2.0 }
    }
}

/// Strang splitting for the cross-phase-modulation pair.
pub fn evolve_xpm<T: Real>(
    plus0: &Line<T>,
    minus0: &Line<T>,
    coupling: XpmCoupling,
    cfg: &EvolutionConfig,
) -> Result<Trajectory<(Line<T>, Line<T>)>> {
    cfg.validate()?;
    if *plus0.grid != *minus0.grid {
        return Err(Error::BasisMismatch);
    }
    let plan = cfg.plan();
    let grid = plus0.grid.clone();
    let q = T::lit(cfg.kappa / 4.0);
    let (a, b) = (T::lit(coupling.self_c), T::lit(coupling.cross));
    let mut p = plus0.values.clone();
    let mut m = minus0.values.clone();
    let mut t = cfg.t_start;
    let mut traj = Trajectory { times: vec![t], states: vec![(plus0.clone(), minus0.clone())] };
    for k in 0..plan.steps() {
        let h = plan.step_len(k);
        let hh = T::lit(h);
        free_step(&mut p, &grid, hh / T::lit(2.0));
        free_step(&mut m, &grid, hh / T::lit(2.0));
        for (x, y) in p.iter_mut().zip(m.iter_mut()) {
            let (px, my) = (x.norm_sqr(), y.norm_sqr());
            *x = *x * cis(-q * hh * (a * px + b * my));
            *y = *y * cis(-q * hh * (a * my + b * px));
        }
        free_step(&mut p, &grid, hh / T::lit(2.0));
        free_step(&mut m, &grid, hh / T::lit(2.0));
        t += h;
        abort_if_nonfinite(&p, t, "XPM split step")?;
        abort_if_nonfinite(&m, t, "XPM split step")?;
        if plan.records(k) {
            traj.times.push(t);
            traj.states.push((Line { grid: grid.clone(), values: p.clone() }, Line { grid: grid.clone(), values: m.clone() }));
        }
    }
    Ok(traj)
}

/// `psi^(t, xi) = phi^(xi) e^{-i pi kappa mu |phi^(xi)|^2 ln t} e^{i (t - 1) xi^2}`, `t >= 1`.
///
/// Solves `(i d_t - d_xx) psi = (pi kappa mu / t) F^{-1}(|psi^|^2 psi^)` with `psi(1) = phi`.
pub fn psi1_explicit<T: Real>(phi: &Line<T>, t: T, mu: T, kappa: T) -> Result<Line<T>> {
    if !(t >= T::one()) {
        return Err(Error::InvalidParameter(format!("psi1 needs t >= 1, got {t}")));
    }
    let c = T::PI() * kappa * mu * t.ln();
    let spec: Vec<C<T>> = phi
        .spectrum()
        .into_iter()
        .zip(phi.grid.xi())
        .map(|(v, &xi)| v * cis(-c * v.norm_sqr() + (t - T::one()) * xi * xi))
        .collect();
    Ok(Line::from_spectrum(&phi.grid, spec))
}

/// One row of the CSV series export.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    pub mass: f64,
    pub ke_y: f64,
    pub linf: f64,
    pub z_norm: f64,
    pub s_norm: f64,
}

/// Diagnostics of `U(t)`; the Z and S norms are those of the profile `e^{-itD}U`.
pub fn series_row<T: Real>(u: &MixedField<T>, t: f64, order: u32) -> Result<SeriesRow> {
    let prof = profile_of(u, T::lit(t)).to_profile();
    Ok(SeriesRow {
        t,
        mass: u.mass().to_f64_lossy(),
        ke_y: u.ke_y().to_f64_lossy(),
        linf: u.linf_h1().to_f64_lossy(),
        z_norm: z_norm(&prof).to_f64_lossy(),
        s_norm: s_norm(&prof, order)?.s_norm.to_f64_lossy(),
    })
}

pub fn write_series_csv(path: &Path, rows: &[SeriesRow]) -> Result<()> {
    crate::io::write_atomic(path, |w| {
        let mut wr = csv::Writer::from_writer(w);
        for r in rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    })
}

const MIXED_MAGIC: &[u8; 4] = b"MXF1";
const SNAPSHOT_VERSION: u32 = 1;

/// `MXF1` snapshot: magic, u32 version, u32 d, u32 n_max, u64 n_x, u64 modes,
/// f64 t, f64 L_x, u8 representation (0 physical, 1 spectral), then mode-major (re, im) f64 pairs.
pub fn encode_mixed<T: Real, W: Write>(u: &MixedField<T>, t: f64, out: &mut W) -> Result<()> {
    let spec = u.basis.spec();
    out.write_all(MIXED_MAGIC)?;
    out.write_u32::<LittleEndian>(SNAPSHOT_VERSION)?;
    out.write_u32::<LittleEndian>(spec.d as u32)?;
    out.write_u32::<LittleEndian>(spec.n_max as u32)?;
    out.write_u64::<LittleEndian>(u.grid.n_x() as u64)?;
    out.write_u64::<LittleEndian>(u.basis.len() as u64)?;
    out.write_f64::<LittleEndian>(t)?;
    out.write_f64::<LittleEndian>(u.grid.l_x().to_f64_lossy())?;
    out.write_u8(match u.repr {
        Repr::Physical => 0,
        Repr::Spectral => 1,
    })?;
    for c in &u.data {
        out.write_f64::<LittleEndian>(c.re.to_f64_lossy())?;
        out.write_f64::<LittleEndian>(c.im.to_f64_lossy())?;
    }
    Ok(())
}

pub fn decode_mixed<T: Real, R: Read>(basis: &Arc<HermiteBasis<T>>, input: &mut R) -> Result<(MixedField<T>, f64)> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MIXED_MAGIC {
        return Err(Error::Cache("bad mixed snapshot magic".into()));
    }
    let version = input.read_u32::<LittleEndian>()?;
    if version != SNAPSHOT_VERSION {
        return Err(Error::Cache(format!("unsupported mixed snapshot version {version}")));
    }
    let d = input.read_u32::<LittleEndian>()? as usize;
    let n_max = input.read_u32::<LittleEndian>()? as usize;
    let n_x = input.read_u64::<LittleEndian>()? as usize;
    let modes = input.read_u64::<LittleEndian>()? as usize;
    if d != basis.d() || n_max != basis.n_max() || modes != basis.len() {
        return Err(Error::Cache("mixed snapshot does not match basis".into()));
    }
    let t = input.read_f64::<LittleEndian>()?;
    let l_x = input.read_f64::<LittleEndian>()?;
    let repr = match input.read_u8()? {
        0 => Repr::Physical,
        1 => Repr::Spectral,
        r => return Err(Error::Cache(format!("unknown representation tag {r}"))),
    };
    let grid = XGrid::new(T::lit(l_x), n_x)?;
    let mut u = MixedField::zeros(basis, &grid, repr);
    for c in &mut u.data {
        let re = input.read_f64::<LittleEndian>()?;
        let im = input.read_f64::<LittleEndian>()?;
        *c = C::new(T::lit(re), T::lit(im));
    }
    Ok((u, t))
}

pub fn save_mixed<T: Real>(u: &MixedField<T>, t: f64, path: &Path) -> Result<()> {
    crate::io::write_atomic(path, |w| encode_mixed(u, t, w))
}

pub fn load_mixed<T: Real>(basis: &Arc<HermiteBasis<T>>, path: &Path) -> Result<(MixedField<T>, f64)> {
    decode_mixed(basis, &mut BufReader::new(File::open(path)?))
}
