//! The resonant trilinear operator `T`, its conserved quantities and the flow `i dg/dtau = kappa T[g,g,g]`.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hermite::{harmonic_phases, Grid, HermiteBasis, HermiteField, Mode, MAX_DIM};
use crate::scalar::{all_finite, czero, Real, C};

/// `(2n)! / (2^{2n+1} n!)`, the `L^4`/`L^2` coupling of the vortex `g_n`.
pub fn coupling_mu(n: usize) -> f64 {
    (1..=n).fold(0.5, |acc, j| acc * (n + j) as f64 / 4.0)
}

type Quad = [u32; 4];

/// Sparse real tensor `C(a,b,c,e) = int psi_a psi_b psi_c psi_e` on resonant tuples.
///
/// Indices are positions in the basis mode list. `T[f,g,h]_e = sum C f_a conj(g_b) h_c`.
#[derive(Clone)]
pub struct InteractionTensor<T> {
    basis: Arc<HermiteBasis<T>>,
    canonical: Vec<(Quad, T)>,
    // per output mode e: (a, b, c, value)
    by_output: Vec<Vec<(u32, u32, u32, T)>>,
}

impl<T: Real> std::fmt::Debug for InteractionTensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InteractionTensor")
            .field("spec", &self.basis.spec())
            .field("canonical", &self.canonical.len())
            .field("expanded", &self.expanded_len())
            .finish()
    }
}

fn canonical_key(q: Quad) -> Quad {
    let [a, b, c, e] = q;
    let p1 = (a.min(c), a.max(c));
    let p2 = (b.min(e), b.max(e));
    let (p1, p2) = if p2 < p1 { (p2, p1) } else { (p1, p2) };
    [p1.0, p2.0, p1.1, p2.1]
}

fn orbit(q: Quad) -> Vec<Quad> {
    let [a, b, c, e] = q;
    let mut out = Vec::with_capacity(8);
    for &(x, y, z, w) in &[(a, b, c, e), (b, a, e, c)] {
        out.push([x, y, z, w]);
        out.push([z, y, x, w]);
        out.push([x, w, z, y]);
        out.push([z, w, x, y]);
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// 1D quartic integrals `int psi_i psi_j psi_k psi_l`, flattened `(n+1)^4`.
fn quartic_table<T: Real>(basis: &HermiteBasis<T>) -> Vec<T> {
    let side = basis.n_max() + 1;
    let rule = basis.rule(Grid::Product);
    let mut out = vec![T::zero(); side.pow(4)];
    for i in 0..side {
        for j in 0..side {
            for k in 0..side {
                for l in 0..side {
                    if (i + j + k + l) % 2 == 1 {
                        continue;
                    }
                    let mut acc = T::zero();
                    for (n, &w) in rule.weights.iter().enumerate() {
                        let row = &rule.table[n * side..(n + 1) * side];
                        acc = acc + w * row[i] * row[j] * row[k] * row[l];
                    }
                    out[((i * side + j) * side + k) * side + l] = acc;
                }
            }
        }
    }
    out
}

fn parity_ok(d: usize, a: &Mode, b: &Mode, c: &Mode, e: &Mode) -> bool {
    (0..d).all(|j| (a[j] + b[j] + c[j] + e[j]) % 2 == 0)
}

/// Tabulate all resonant, parity-admissible entries by exact quadrature.
pub fn build_interaction_tensor<T: Real>(basis: &Arc<HermiteBasis<T>>) -> InteractionTensor<T> {
    let d = basis.d();
    let n = basis.n_max();
    let side = n + 1;
    let q4 = quartic_table(basis);
    let modes = basis.modes();
    let levels = basis.levels();
    let per_output: Vec<Vec<(Quad, T)>> = (0..modes.len())
        .into_par_iter()
        .map(|ei| {
            let e = &modes[ei];
            let le = levels[ei];
            let mut list = Vec::new();
            for (ai, a) in modes.iter().enumerate() {
                for (ci, c) in modes.iter().enumerate() {
                    let lsum = levels[ai] + levels[ci];
                    if lsum < le || lsum - le > n {
                        continue;
                    }
                    for bi in basis.level_range(lsum - le) {
                        let b = &modes[bi];
                        if !parity_ok(d, a, b, c, e) {
                            continue;
                        }
                        let q = [ai as u32, bi as u32, ci as u32, ei as u32];
                        if canonical_key(q) != q {
                            continue;
                        }
                        let v = (0..d).fold(T::one(), |acc, j| {
                            let idx = ((a[j] as usize * side + b[j] as usize) * side + c[j] as usize) * side
                                + e[j] as usize;
                            acc * q4[idx]
                        });
                        list.push((q, v));
                    }
                }
            }
            list
        })
        .collect();
    let mut canonical: Vec<(Quad, T)> = per_output.into_iter().flatten().collect();
    sort_by_components(basis, &mut canonical);
    InteractionTensor::from_canonical(basis, canonical)
}

fn sort_by_components<T: Real>(basis: &HermiteBasis<T>, entries: &mut [(Quad, T)]) {
    let modes = basis.modes();
    let d = basis.d();
    let key = |q: &Quad| -> Vec<u16> { q.iter().flat_map(|&i| modes[i as usize][..d].to_vec()).collect() };
    entries.sort_by_cached_key(|(q, _)| key(q));
}

impl<T: Real> InteractionTensor<T> {
    pub fn basis(&self) -> &Arc<HermiteBasis<T>> {
        &self.basis
    }

    /// Entries with one representative per symmetry orbit, sorted by multi-index components.
    pub fn canonical_entries(&self) -> &[([u32; 4], T)] {
        &self.canonical
    }

    pub fn len(&self) -> usize {
        self.canonical.len()
    }

    pub fn is_empty(&self) -> bool {
        self.canonical.is_empty()
    }

    /// Number of stored ordered tuples (all symmetry images).
    pub fn expanded_len(&self) -> usize {
        self.by_output.iter().map(Vec::len).sum()
    }

    /// Value for an arbitrary tuple of multi-indices, `None` if not stored.
    pub fn get(&self, a: &Mode, b: &Mode, c: &Mode, e: &Mode) -> Option<T> {
        let idx = |m: &Mode| self.basis.mode_index(m).map(|i| i as u32);
        let (a, b, c, e) = (idx(a)?, idx(b)?, idx(c)?, idx(e)?);
        self.by_output[e as usize]
            .iter()
            .find(|&&(x, y, z, _)| (x, y, z) == (a, b, c))
            .map(|&(_, _, _, v)| v)
    }

    fn from_canonical(basis: &Arc<HermiteBasis<T>>, canonical: Vec<(Quad, T)>) -> Self {
        let mut by_output = vec![Vec::new(); basis.len()];
        for &(q, v) in &canonical {
            for [a, b, c, e] in orbit(q) {
                by_output[e as usize].push((a, b, c, v));
            }
        }
        for list in &mut by_output {
            list.sort_unstable_by_key(|&(a, b, c, _)| (a, b, c));
        }
        InteractionTensor { basis: basis.clone(), canonical, by_output }
    }
}

/// `T[f, g, h]` by contraction with the stored tensor.
pub fn apply_t_tensor<T: Real>(
    tensor: &InteractionTensor<T>,
    f: &HermiteField<T>,
    g: &HermiteField<T>,
    h: &HermiteField<T>,
) -> Result<HermiteField<T>> {
    for x in [f, g, h] {
        if x.basis().spec() != tensor.basis.spec() {
            return Err(Error::BasisMismatch);
        }
    }
    Ok(HermiteField::from_coeffs(&tensor.basis, apply_t_raw(tensor, &f.coeffs, &g.coeffs, &h.coeffs))
        .expect("length matches basis"))
}

pub(crate) fn apply_t_raw<T: Real>(tensor: &InteractionTensor<T>, f: &[C<T>], g: &[C<T>], h: &[C<T>]) -> Vec<C<T>> {
    let one = |list: &Vec<(u32, u32, u32, T)>| {
        list.iter().fold(czero::<T>(), |acc, &(a, b, c, v)| {
            acc + f[a as usize] * g[b as usize].conj() * h[c as usize] * v
        })
    };
    if tensor.expanded_len() > 20_000 {
        tensor.by_output.par_iter().map(one).collect()
    } else {
        tensor.by_output.iter().map(one).collect()
    }
}

/// `T[f, g, h]` as the `s`-average over `[0, pi)` of `e^{-isH}(e^{isH}f conj(e^{isH}g) e^{isH}h)`
/// with `m_s` equispaced nodes.
pub fn apply_t_quadrature<T: Real>(
    f: &HermiteField<T>,
    g: &HermiteField<T>,
    h: &HermiteField<T>,
    m_s: usize,
) -> Result<HermiteField<T>> {
    f.check_basis(g)?;
    f.check_basis(h)?;
    let basis = f.basis();
    let required = 2 * basis.n_max() + 1;
    if m_s < required {
        return Err(Error::QuadratureBound { what: "T quadrature s-nodes", got: m_s, required });
    }
    let mut acc = vec![czero::<T>(); basis.len()];
    let levels = basis.levels();
    for m in 0..m_s {
        let s = T::PI() * T::from_usize_lossy(m) / T::from_usize_lossy(m_s);
        let ph = harmonic_phases(basis, s);
        let rot = |x: &HermiteField<T>| -> Vec<C<T>> {
            x.coeffs.iter().zip(levels).map(|(c, &l)| c * ph[l]).collect()
        };
        let fg = basis.synthesize_coeffs(Grid::Product, &rot(f));
        let gg = basis.synthesize_coeffs(Grid::Product, &rot(g));
        let hg = basis.synthesize_coeffs(Grid::Product, &rot(h));
        let prod: Vec<C<T>> = fg.iter().zip(&gg).zip(&hg).map(|((a, b), c)| a * b.conj() * c).collect();
        let back = basis.analyze_coeffs(Grid::Product, &prod);
        for ((o, b), &l) in acc.iter_mut().zip(back).zip(levels) {
            *o = *o + b * ph[l].conj();
        }
    }
    let inv = T::one() / T::from_usize_lossy(m_s);
    HermiteField::from_coeffs(basis, acc.into_iter().map(|c| c * inv).collect())
}

/// Mass, kinetic energy and Hamiltonian of a field.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct ConservedReport<T> {
    pub mass: T,
    pub kinetic_energy: T,
    pub hamiltonian: T,
}

/// `M = ||g||^2`, `KE = sum lambda_p ||g_p||^2` and
/// `Q = (2/pi) int_{-pi/4}^{pi/4} int |e^{i lambda H} g|^4` by an exact equispaced average.
pub fn conserved_quantities<T: Real>(field: &HermiteField<T>) -> ConservedReport<T> {
    let basis = field.basis();
    let mass = field.norm_sqr();
    let kinetic_energy = field
        .coeffs
        .iter()
        .zip(basis.levels())
        .map(|(c, &l)| basis.eig(l) * c.norm_sqr())
        .sum();
    let m = 2 * basis.n_max() + 1;
    let w = basis.grid_weights(Grid::Product);
    let mut q = T::zero();
    for k in 0..m {
        let lam = -T::FRAC_PI_4() + T::FRAC_PI_2() * T::from_usize_lossy(k) / T::from_usize_lossy(m);
        let ph = harmonic_phases(basis, lam);
        let rot: Vec<C<T>> = field.coeffs.iter().zip(basis.levels()).map(|(c, &l)| c * ph[l]).collect();
        let vals = basis.synthesize_coeffs(Grid::Product, &rot);
        q = q + vals.iter().zip(&w).map(|(v, &wi)| wi * v.norm_sqr() * v.norm_sqr()).sum::<T>();
    }
    ConservedReport { mass, kinetic_energy, hamiltonian: q / T::from_usize_lossy(m) }
}

/// Right-hand side `-i kappa T[g,g,g]`.
fn rs_rhs<T: Real>(tensor: &InteractionTensor<T>, kappa: T, g: &[C<T>]) -> Vec<C<T>> {
    let mi = C::new(T::zero(), -kappa);
    apply_t_raw(tensor, g, g, g).into_iter().map(|v| v * mi).collect()
}

/// One classical RK4 step of `dy/dt = rhs(y)`.
pub(crate) fn rk4_step<T: Real, F>(y: &[C<T>], dt: T, rhs: F) -> Vec<C<T>>
where
    F: Fn(&[C<T>]) -> Vec<C<T>>,
{
    let half = dt / T::lit(2.0);
    let shift = |k: &[C<T>], s: T| -> Vec<C<T>> { y.iter().zip(k).map(|(a, b)| a + b * s).collect() };
    let k1 = rhs(y);
    let k2 = rhs(&shift(&k1, half));
    let k3 = rhs(&shift(&k2, half));
    let k4 = rhs(&shift(&k3, dt));
    let sixth = dt / T::lit(6.0);
    let two = T::lit(2.0);
    y.iter()
        .enumerate()
        .map(|(i, v)| v + (k1[i] + k2[i] * two + k3[i] * two + k4[i]) * sixth)
        .collect()
}

/// Fixed-step integration plan. Samples are recorded every `sample_every` steps,
/// always including the initial and final states.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StepPlan {
    pub t_end: f64,
    pub dt: f64,
    pub sample_every: usize,
}

impl StepPlan {
    pub fn new(t_end: f64, dt: f64, sample_every: usize) -> Result<Self> {
        let p = StepPlan { t_end, dt, sample_every };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidParameter(format!("t_end = {} must be nonnegative", self.t_end)));
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidParameter("sample_every must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of steps; the last step is shortened so the run ends exactly at `t_end`.
    pub fn steps(&self) -> usize {
        let n = self.t_end / self.dt;
        let r = n.round();
        if (n - r).abs() < 1e-9 * n.max(1.0) {
            r as usize
        } else {
            n.ceil() as usize
        }
    }

    pub(crate) fn step_len(&self, k: usize) -> f64 {
        let n = self.steps();
        if k + 1 == n {
            self.t_end - self.dt * (n - 1) as f64
        } else {
            self.dt
        }
    }

    pub(crate) fn records(&self, k: usize) -> bool {
        let n = self.steps();
        (k + 1) % self.sample_every == 0 || k + 1 == n
    }
}

/// Sampled states of a Hermite-field evolution.
#[derive(Clone, Debug)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
}

impl<S> Trajectory<S> {
    pub fn last(&self) -> &S {
        self.states.last().expect("trajectory holds the initial state")
    }
}

/// RK4 integration of `i dg/dtau = kappa T[g,g,g]`.
pub fn evolve_rs<T: Real>(
    tensor: &InteractionTensor<T>,
    f0: &HermiteField<T>,
    kappa: T,
    plan: StepPlan,
) -> Result<Trajectory<HermiteField<T>>> {
    plan.validate()?;
    if f0.basis().spec() != tensor.basis().spec() {
        return Err(Error::BasisMismatch);
    }
    let mut traj = Trajectory { times: vec![0.0], states: vec![f0.clone()] };
    let mut y = f0.coeffs.clone();
    let mut t = 0.0;
    for k in 0..plan.steps() {
        let h = plan.step_len(k);
        y = rk4_step(&y, T::lit(h), |v| rs_rhs(tensor, kappa, v));
        t += h;
        if !all_finite(&y) {
            return Err(Error::NonFinite { time: t, context: "resonant system RK4".into() });
        }
        if plan.records(k) {
            traj.times.push(t);
            traj.states.push(HermiteField::from_coeffs(f0.basis(), y.clone())?);
        }
    }
    Ok(traj)
}

/// Square sample grid centered at the origin: `x_i = (i - (n-1)/2) h`, row index is `xi_1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid2<T> {
    pub n: usize,
    pub h: T,
    pub values: Vec<C<T>>,
}

impl<T: Real> Grid2<T> {
    pub fn coord(&self, i: usize) -> T {
        (T::from_usize_lossy(i) - T::from_usize_lossy(self.n - 1) / T::lit(2.0)) * self.h
    }

    pub fn from_fn<F: Fn(T, T) -> C<T>>(n: usize, h: T, f: F) -> Self {
        let mut g = Grid2 { n, h, values: Vec::with_capacity(n * n) };
        for i in 0..n {
            for j in 0..n {
                let v = f(g.coord(i), g.coord(j));
                g.values.push(v);
            }
        }
        g
    }

    pub fn half_width(&self) -> T {
        self.coord(self.n - 1)
    }

    /// Bilinear interpolation, zero outside the grid.
    pub fn interp(&self, x: T, y: T) -> C<T> {
        let off = T::from_usize_lossy(self.n - 1) / T::lit(2.0);
        let u = x / self.h + off;
        let v = y / self.h + off;
        let last = T::from_usize_lossy(self.n - 1);
        if !(u >= T::zero() && v >= T::zero() && u <= last && v <= last) {
            return czero();
        }
        let i = u.floor().to_usize().unwrap_or(0).min(self.n - 2);
        let j = v.floor().to_usize().unwrap_or(0).min(self.n - 2);
        let fu = u - T::from_usize_lossy(i);
        let fv = v - T::from_usize_lossy(j);
        let at = |a: usize, b: usize| self.values[a * self.n + b];
        let one = T::one();
        at(i, j) * ((one - fu) * (one - fv))
            + at(i + 1, j) * (fu * (one - fv))
            + at(i, j + 1) * ((one - fu) * fv)
            + at(i + 1, j + 1) * (fu * fv)
    }
}

/// Quadrature extents for [`apply_cr_continuous`].
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CrQuadrature {
    /// Angles in `[0, pi)`.
    pub n_theta: usize,
    /// Radial integration range `[-r_max, r_max]` for both radii.
    pub r_max: f64,
    pub n_r: usize,
    /// Evaluate every `stride`-th output node per axis (others are left at zero).
    pub stride: usize,
}

impl Default for CrQuadrature {
    fn default() -> Self {
        CrQuadrature { n_theta: 32, r_max: 6.0, n_r: 49, stride: 1 }
    }
}

/// Continuous resonant operator on a 2D grid,
/// `(1/pi^2) int_0^pi int int f(xi + r1 e) conj g(xi + r1 e + r2 e') h(xi + r2 e') dr1 dr2 dtheta`
/// with `e = (cos theta, sin theta)` and `e'` its rotation by `pi/2`.
pub fn apply_cr_continuous<T: Real>(samples: &Grid2<T>, quad: CrQuadrature) -> Result<Grid2<T>> {
    if samples.n < 2 || samples.values.len() != samples.n * samples.n {
        return Err(Error::Shape { expected: samples.n * samples.n, got: samples.values.len() });
    }
    if quad.n_theta == 0 || quad.n_r < 2 || quad.stride == 0 || !(quad.r_max > 0.0) {
        return Err(Error::InvalidParameter(format!("bad CR quadrature {quad:?}")));
    }
    let r_max = T::lit(quad.r_max);
    if r_max > samples.half_width() * T::lit(2.0) {
        return Err(Error::InvalidParameter(format!(
            "radial extent {} exceeds twice the grid half-width {}",
            quad.r_max,
            samples.half_width().to_f64_lossy()
        )));
    }
    let dr = T::lit(2.0) * r_max / T::from_usize_lossy(quad.n_r - 1);
    let radii: Vec<(T, T)> = (0..quad.n_r)
        .map(|k| {
            let w = if k == 0 || k + 1 == quad.n_r { dr / T::lit(2.0) } else { dr };
            (-r_max + dr * T::from_usize_lossy(k), w)
        })
        .collect();
    let dtheta = T::PI() / T::from_usize_lossy(quad.n_theta);
    let dirs: Vec<(T, T)> = (0..quad.n_theta)
        .map(|k| {
            let th = dtheta * T::from_usize_lossy(k);
            (th.cos(), th.sin())
        })
        .collect();
    let pref = dtheta / (T::PI() * T::PI());
    let n = samples.n;
    let rows: Vec<Vec<C<T>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![czero::<T>(); n];
            if i % quad.stride != 0 {
                return row;
            }
            let x = samples.coord(i);
            for (j, out) in row.iter_mut().enumerate() {
                if j % quad.stride != 0 {
                    continue;
                }
                let y = samples.coord(j);
                let mut acc = czero::<T>();
                for &(c, s) in &dirs {
                    let hv: Vec<C<T>> = radii.iter().map(|&(r2, _)| samples.interp(x - r2 * s, y + r2 * c)).collect();
                    for &(r1, w1) in &radii {
                        let (ax, ay) = (x + r1 * c, y + r1 * s);
                        let fv = samples.interp(ax, ay);
                        if fv == czero() {
                            continue;
                        }
                        let mut inner = czero::<T>();
                        for (k, &(r2, w2)) in radii.iter().enumerate() {
                            if hv[k] == czero() {
                                continue;
                            }
                            inner = inner + samples.interp(ax - r2 * s, ay + r2 * c).conj() * hv[k] * w2;
                        }
                        acc = acc + fv * inner * w1;
                    }
                }
                *out = acc * pref;
            }
            row
        })
        .collect();
    Ok(Grid2 { n, h: samples.h, values: rows.into_iter().flatten().collect() })
}

const CACHE_MAGIC: &[u8; 4] = b"RCT1";
const CACHE_VERSION: u32 = 1;

/// Write canonical entries in the little-endian `RCT1` layout to `out`.
pub fn encode_tensor<T: Real, W: Write>(tensor: &InteractionTensor<T>, out: &mut W) -> Result<()> {
    let spec = tensor.basis.spec();
    out.write_all(CACHE_MAGIC)?;
    out.write_u32::<LittleEndian>(CACHE_VERSION)?;
    out.write_u32::<LittleEndian>(spec.d as u32)?;
    out.write_u32::<LittleEndian>(spec.n_max as u32)?;
    out.write_u64::<LittleEndian>(tensor.canonical.len() as u64)?;
    let modes = tensor.basis.modes();
    for (q, v) in &tensor.canonical {
        for &i in q {
            for &k in &modes[i as usize][..spec.d] {
                out.write_u16::<LittleEndian>(k)?;
            }
        }
        out.write_f64::<LittleEndian>(v.to_f64_lossy())?;
    }
    Ok(())
}

/// Header fields of an `RCT1` stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct CacheHeader {
    pub version: u32,
    pub d: u32,
    pub n_max: u32,
    pub count: u64,
}

pub fn read_cache_header<R: Read>(input: &mut R) -> Result<CacheHeader> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic).map_err(|_| Error::Cache("truncated header".into()))?;
    if &magic != CACHE_MAGIC {
        return Err(Error::Cache(format!("bad magic {:?}, expected \"RCT1\"", String::from_utf8_lossy(&magic))));
    }
    let version = input.read_u32::<LittleEndian>()?;
    if version != CACHE_VERSION {
        return Err(Error::Cache(format!("unsupported version {version}, expected {CACHE_VERSION}")));
    }
    Ok(CacheHeader {
        version,
        d: input.read_u32::<LittleEndian>()?,
        n_max: input.read_u32::<LittleEndian>()?,
        count: input.read_u64::<LittleEndian>()?,
    })
}

/// Decode an `RCT1` stream for the given basis.
pub fn decode_tensor<T: Real, R: Read>(basis: &Arc<HermiteBasis<T>>, input: &mut R) -> Result<InteractionTensor<T>> {
    let hdr = read_cache_header(input)?;
    let spec = basis.spec();
    if hdr.d as usize != spec.d || hdr.n_max as usize != spec.n_max {
        return Err(Error::Cache(format!(
            "cache holds d = {}, n_max = {}; basis has d = {}, n_max = {}",
            hdr.d, hdr.n_max, spec.d, spec.n_max
        )));
    }
    let mut canonical = Vec::with_capacity(hdr.count.min(1 << 24) as usize);
    for _ in 0..hdr.count {
        let mut q = [0u32; 4];
        for slot in &mut q {
            let mut m: Mode = [0; MAX_DIM];
            for k in m.iter_mut().take(spec.d) {
                *k = input.read_u16::<LittleEndian>().map_err(|_| Error::Cache("truncated entries".into()))?;
            }
            *slot = basis
                .mode_index(&m)
                .ok_or_else(|| Error::Cache(format!("mode {:?} outside basis", &m[..spec.d])))? as u32;
        }
        let v = input.read_f64::<LittleEndian>().map_err(|_| Error::Cache("truncated entries".into()))?;
        if canonical_key(q) != q {
            return Err(Error::Cache("entry is not in canonical form".into()));
        }
        canonical.push((q, T::lit(v)));
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(Error::Cache("trailing bytes after entries".into()));
    }
    Ok(InteractionTensor::from_canonical(basis, canonical))
}

/// Atomically write the tensor cache to `path`.
pub fn save_tensor_cache<T: Real>(tensor: &InteractionTensor<T>, path: &Path) -> Result<()> {
    crate::io::write_atomic(path, |w| encode_tensor(tensor, w))
}

pub fn load_tensor_cache<T: Real>(basis: &Arc<HermiteBasis<T>>, path: &Path) -> Result<InteractionTensor<T>> {
    let mut r = BufReader::new(File::open(path)?);
    decode_tensor(basis, &mut r)
}

/// Load the cache at `path` if it matches the basis, otherwise build and save it.
pub fn load_or_build_tensor<T: Real>(basis: &Arc<HermiteBasis<T>>, path: &Path) -> Result<InteractionTensor<T>> {
    if path.exists() {
        return load_tensor_cache(basis, path);
    }
    let t = build_interaction_tensor(basis);
    save_tensor_cache(&t, path)?;
    Ok(t)
}
