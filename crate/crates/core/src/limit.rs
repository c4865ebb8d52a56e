//! The limit system: a frequency-parameterized family of resonant flows, and the Z / S norms.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fourier::XGrid;
use crate::hermite::{HermiteBasis, HermiteField};
use crate::resonant::{apply_t_raw, conserved_quantities, rk4_step, InteractionTensor, StepPlan, Trajectory};
use crate::scalar::{all_finite, czero, Real, C};

/// `G^(xi, y)` sampled on a uniform frequency grid, one Hermite field per node.
///
/// The grid is `xi_m = (m - M/2) dxi` with `dxi = 2 pi / L_x`, i.e. the sorted
/// dual grid of an `M`-point window of length `L_x`.
#[derive(Clone, Debug)]
pub struct ProfileField<T: Real> {
    basis: Arc<HermiteBasis<T>>,
    l_x: T,
    xi: Vec<T>,
    /// Node-major: `data[m * modes + k]`.
    pub data: Vec<C<T>>,
}

impl<T: Real> ProfileField<T> {
    pub fn zeros(basis: &Arc<HermiteBasis<T>>, l_x: T, nodes: usize) -> Result<Self> {
        if nodes == 0 || nodes % 2 == 1 {
            return Err(Error::InvalidParameter(format!("profile node count {nodes} must be even and positive")));
        }
        if !(l_x > T::zero()) {
            return Err(Error::InvalidParameter("window length must be positive".into()));
        }
        let dxi = T::lit(2.0) * T::PI() / l_x;
        let xi = (0..nodes)
            .map(|m| dxi * (T::from_usize_lossy(m) - T::from_usize_lossy(nodes / 2)))
            .collect();
        Ok(ProfileField { basis: basis.clone(), l_x, xi, data: vec![czero(); nodes * basis.len()] })
    }

    /// Profile with node values `f(xi)` (coefficient vectors of length `basis.len()`).
    pub fn from_fn<F>(basis: &Arc<HermiteBasis<T>>, l_x: T, nodes: usize, f: F) -> Result<Self>
    where
        F: Fn(T) -> Vec<C<T>>,
    {
        let mut p = Self::zeros(basis, l_x, nodes)?;
        let len = basis.len();
        for m in 0..nodes {
            let v = f(p.xi[m]);
            if v.len() != len {
                return Err(Error::Shape { expected: len, got: v.len() });
            }
            p.data[m * len..(m + 1) * len].copy_from_slice(&v);
        }
        Ok(p)
    }

    /// Rank-one profile `phi(xi) f`.
    pub fn separable<F: Fn(T) -> C<T>>(f: &HermiteField<T>, l_x: T, nodes: usize, phi: F) -> Result<Self> {
        Self::from_fn(f.basis(), l_x, nodes, |xi| {
            let a = phi(xi);
            f.coeffs.iter().map(|c| c * a).collect()
        })
    }

    pub fn basis(&self) -> &Arc<HermiteBasis<T>> {
        &self.basis
    }

    pub fn l_x(&self) -> T {
        self.l_x
    }

    pub fn xi(&self) -> &[T] {
        &self.xi
    }

    pub fn dxi(&self) -> T {
        T::lit(2.0) * T::PI() / self.l_x
    }

    pub fn nodes(&self) -> usize {
        self.xi.len()
    }

    pub fn node(&self, m: usize) -> &[C<T>] {
        let len = self.basis.len();
        &self.data[m * len..(m + 1) * len]
    }

    pub fn node_mut(&mut self, m: usize) -> &mut [C<T>] {
        let len = self.basis.len();
        &mut self.data[m * len..(m + 1) * len]
    }

    pub fn node_field(&self, m: usize) -> HermiteField<T> {
        HermiteField::from_coeffs(&self.basis, self.node(m).to_vec()).expect("node length matches basis")
    }

    fn same_layout(&self, other: &Self) -> bool {
        self.basis.spec() == other.basis.spec() && self.l_x == other.l_x && self.xi.len() == other.xi.len()
    }

    /// Discrete mass `sum_m dxi ||G(xi_m)||^2`.
    pub fn mass(&self) -> T {
        self.dxi() * self.data.iter().map(|c| c.norm_sqr()).sum::<T>()
    }

    /// `sum_m dxi sum_p lambda_p ||G_p(xi_m)||^2`.
    pub fn kinetic_energy(&self) -> T {
        let b = &self.basis;
        let len = b.len();
        let s: T = self
            .data
            .iter()
            .enumerate()
            .map(|(i, c)| b.eig(b.levels()[i % len]) * c.norm_sqr())
            .sum();
        self.dxi() * s
    }

    /// `sum_m dxi Q(G(xi_m))`.
    pub fn hamiltonian(&self) -> T {
        let q: T = (0..self.nodes())
            .map(|m| conserved_quantities(&self.node_field(m)).hamiltonian)
            .sum();
        self.dxi() * q
    }

    /// Window grid whose transform values are this profile (the node count must be a power of two).
    pub fn window(&self) -> Result<Arc<XGrid<T>>> {
        XGrid::new(self.l_x, self.nodes())
    }
}

/// `R[G,G,G]`: the operator `T` applied node by node.
pub fn apply_r<T: Real>(tensor: &InteractionTensor<T>, profile: &ProfileField<T>) -> Result<ProfileField<T>> {
    if profile.basis.spec() != tensor.basis().spec() {
        return Err(Error::BasisMismatch);
    }
    let len = profile.basis.len();
    let data: Vec<C<T>> = profile
        .data
        .par_chunks(len)
        .flat_map_iter(|g| apply_t_raw(tensor, g, g, g))
        .collect();
    Ok(ProfileField { data, ..profile.clone() })
}

/// RK4 on `i dG(xi)/dtau = kappa T[G(xi), G(xi), G(xi)]`, independently per node.
pub fn evolve_rss<T: Real>(
    tensor: &InteractionTensor<T>,
    g0: &ProfileField<T>,
    kappa: T,
    plan: StepPlan,
) -> Result<Trajectory<ProfileField<T>>> {
    plan.validate()?;
    if g0.basis.spec() != tensor.basis().spec() {
        return Err(Error::BasisMismatch);
    }
    let len = g0.basis.len();
    let steps = plan.steps();
    let mi = C::new(T::zero(), -kappa);
    let per_node: Vec<Result<Vec<Vec<C<T>>>>> = g0
        .data
        .par_chunks(len)
        .map(|start| {
            let mut samples = Vec::new();
            let mut y = start.to_vec();
            let idle = y.iter().all(|c| *c == czero());
            let mut t = 0.0;
            for k in 0..steps {
                let h = plan.step_len(k);
                t += h;
                if !idle {
                    y = rk4_step(&y, T::lit(h), |v| {
                        apply_t_raw(tensor, v, v, v).into_iter().map(|w| w * mi).collect()
                    });
                    if !all_finite(&y) {
                        return Err(Error::NonFinite { time: t, context: "limit system RK4".into() });
                    }
                }
                if plan.records(k) {
                    samples.push(y.clone());
                }
            }
            Ok(samples)
        })
        .collect();
    let per_node = per_node.into_iter().collect::<Result<Vec<_>>>()?;
    let mut traj = Trajectory { times: vec![0.0], states: vec![g0.clone()] };
    let mut t = 0.0;
    let mut s = 0;
    for k in 0..steps {
        t += plan.step_len(k);
        if plan.records(k) {
            let data = per_node.iter().flat_map(|node| node[s].iter().copied()).collect();
            traj.times.push(t);
            traj.states.push(ProfileField { data, ..g0.clone() });
            s += 1;
        }
    }
    Ok(traj)
}

/// `sup_xi (1 + xi^2)^2 sum_p (1 + p) ||G_p(xi)||^2`, square-rooted.
pub fn z_norm<T: Real>(profile: &ProfileField<T>) -> T {
    let b = &profile.basis;
    let len = b.len();
    let mut sup = T::zero();
    for (m, &xi) in profile.xi.iter().enumerate() {
        let w = T::one() + xi * xi;
        let h1: T = profile.data[m * len..(m + 1) * len]
            .iter()
            .zip(b.levels())
            .map(|(c, &p)| (T::one() + T::from_usize_lossy(p)) * c.norm_sqr())
            .sum();
        sup = sup.max(w * w * h1);
    }
    sup.sqrt()
}

/// Diagnostic norms of a profile.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct NormReport<T> {
    pub z_norm: T,
    /// `H^N` part, weight `(1 + xi^2 + lambda_n)^N` on squared coefficients.
    pub sobolev: T,
    /// `||x F||_{L^2}` with the centered window coordinate.
    pub x_weighted: T,
    /// `sobolev + x_weighted`.
    pub s_norm: T,
    /// `||(1 - d_xx)^4 F||_S`.
    pub s_plus_smooth: T,
    /// `||x F||_S`.
    pub s_plus_x: T,
}

/// `H^N`-type norm of node-major data on sorted nodes `xi`.
fn sobolev_part<T: Real>(basis: &HermiteBasis<T>, xi: &[T], dxi: T, data: &[C<T>], order: u32) -> T {
    let len = basis.len();
    let mut acc = T::zero();
    for (m, &x) in xi.iter().enumerate() {
        for (k, c) in data[m * len..(m + 1) * len].iter().enumerate() {
            let w = T::one() + x * x + basis.eig(basis.levels()[k]);
            acc = acc + w.powi(order as i32) * c.norm_sqr();
        }
    }
    (T::lit(2.0) * T::PI() * dxi * acc).sqrt()
}

/// Multiply by `x^power` in physical space (sorted-node data in, sorted-node data out).
fn times_x<T: Real>(window: &XGrid<T>, len: usize, data: &[C<T>], power: i32) -> Vec<C<T>> {
    let n = window.n_x();
    let perm = window.sorted_order();
    let mut out = vec![czero(); n * len];
    let mut line = vec![czero(); n];
    for k in 0..len {
        for (m, &p) in perm.iter().enumerate() {
            line[p] = data[m * len + k];
        }
        window.inverse(&mut line);
        for (v, &x) in line.iter_mut().zip(window.x()) {
            *v = *v * x.powi(power);
        }
        window.forward(&mut line);
        for (m, &p) in perm.iter().enumerate() {
            out[m * len + k] = line[p];
        }
    }
    out
}

fn x_l2<T: Real>(window: &XGrid<T>, len: usize, data: &[C<T>], power: i32) -> T {
    let n = window.n_x();
    let perm = window.sorted_order();
    let mut line = vec![czero(); n];
    let mut acc = T::zero();
    for k in 0..len {
        for (m, &p) in perm.iter().enumerate() {
            line[p] = data[m * len + k];
        }
        window.inverse(&mut line);
        acc = acc
            + line
                .iter()
                .zip(window.x())
                .map(|(v, &x)| v.norm_sqr() * x.powi(2 * power))
                .sum::<T>();
    }
    (acc * window.dx()).sqrt()
}

/// Largest supported Sobolev order.
pub const MAX_SOBOLEV_ORDER: u32 = 40;

/// Z, S and S+ norms. The profile's node count must be a power of two (it is read as
/// the transform of a field on the periodic window `[-L/2, L/2)`).
pub fn s_norm<T: Real>(profile: &ProfileField<T>, order: u32) -> Result<NormReport<T>> {
    if order > MAX_SOBOLEV_ORDER {
        return Err(Error::InvalidParameter(format!("Sobolev order {order} exceeds {MAX_SOBOLEV_ORDER}")));
    }
    let window = profile.window()?;
    let b = &profile.basis;
    let edge = T::one() + window.xi_max().powi(2) + b.eig(b.n_max());
    if !edge.powi((order + 8) as i32).is_finite() {
        return Err(Error::InvalidParameter(format!("Sobolev order {order} overflows at the band edge")));
    }
    let len = b.len();
    let dxi = profile.dxi();
    let sob = |data: &[C<T>]| sobolev_part(b, &profile.xi, dxi, data, order);
    let sobolev = sob(&profile.data);
    let x_weighted = x_l2(&window, len, &profile.data, 1);

    let mut smooth = profile.data.clone();
    for (m, &x) in profile.xi.iter().enumerate() {
        let w = (T::one() + x * x).powi(4);
        for c in &mut smooth[m * len..(m + 1) * len] {
            *c = *c * w;
        }
    }
    let s_plus_smooth = sob(&smooth) + x_l2(&window, len, &smooth, 1);
    let xf = times_x(&window, len, &profile.data, 1);
    let s_plus_x = sob(&xf) + x_l2(&window, len, &profile.data, 2);
    Ok(NormReport {
        z_norm: z_norm(profile),
        sobolev,
        x_weighted,
        s_norm: sobolev + x_weighted,
        s_plus_smooth,
        s_plus_x,
    })
}

/// One record of a limit-system trajectory export.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RssRecord {
    pub tau: f64,
    pub z_norm: f64,
    pub mass: f64,
    pub ke: f64,
    #[serde(rename = "Q_total")]
    pub q_total: f64,
}

pub fn rss_records<T: Real>(traj: &Trajectory<ProfileField<T>>) -> Vec<RssRecord> {
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&tau, p)| RssRecord {
            tau,
            z_norm: z_norm(p).to_f64_lossy(),
            mass: p.mass().to_f64_lossy(),
            ke: p.kinetic_energy().to_f64_lossy(),
            q_total: p.hamiltonian().to_f64_lossy(),
        })
        .collect()
}

/// Write one JSON object per line.
pub fn write_jsonl<S: serde::Serialize>(path: &Path, records: &[S]) -> Result<()> {
    crate::io::write_atomic(path, |w| {
        for r in records {
            serde_json::to_writer(&mut *w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

const PROFILE_MAGIC: &[u8; 4] = b"PRF1";
const SNAPSHOT_VERSION: u32 = 1;

/// `PRF1` snapshot: magic, u32 version, u32 d, u32 n_max, u64 nodes, u64 modes,
/// f64 tau, f64 L_x, then `nodes * modes` (re, im) f64 pairs, all little-endian.
pub fn encode_profile<T: Real, W: Write>(p: &ProfileField<T>, tau: f64, out: &mut W) -> Result<()> {
    let spec = p.basis.spec();
    out.write_all(PROFILE_MAGIC)?;
    out.write_u32::<LittleEndian>(SNAPSHOT_VERSION)?;
    out.write_u32::<LittleEndian>(spec.d as u32)?;
    out.write_u32::<LittleEndian>(spec.n_max as u32)?;
    out.write_u64::<LittleEndian>(p.nodes() as u64)?;
    out.write_u64::<LittleEndian>(p.basis.len() as u64)?;
    out.write_f64::<LittleEndian>(tau)?;
    out.write_f64::<LittleEndian>(p.l_x.to_f64_lossy())?;
    for c in &p.data {
        out.write_f64::<LittleEndian>(c.re.to_f64_lossy())?;
        out.write_f64::<LittleEndian>(c.im.to_f64_lossy())?;
    }
    Ok(())
}

pub fn decode_profile<T: Real, R: Read>(basis: &Arc<HermiteBasis<T>>, input: &mut R) -> Result<(ProfileField<T>, f64)> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != PROFILE_MAGIC {
        return Err(Error::Cache("bad profile snapshot magic".into()));
    }
    let version = input.read_u32::<LittleEndian>()?;
    if version != SNAPSHOT_VERSION {
        return Err(Error::Cache(format!("unsupported profile snapshot version {version}")));
    }
    let d = input.read_u32::<LittleEndian>()? as usize;
    let n_max = input.read_u32::<LittleEndian>()? as usize;
    let nodes = input.read_u64::<LittleEndian>()? as usize;
    let modes = input.read_u64::<LittleEndian>()? as usize;
    let spec = basis.spec();
    if d != spec.d || n_max != spec.n_max || modes != basis.len() {
        return Err(Error::Cache("profile snapshot does not match basis".into()));
    }
    let tau = input.read_f64::<LittleEndian>()?;
    let l_x = input.read_f64::<LittleEndian>()?;
    let mut p = ProfileField::zeros(basis, T::lit(l_x), nodes)?;
    for c in &mut p.data {
        let re = input.read_f64::<LittleEndian>()?;
        let im = input.read_f64::<LittleEndian>()?;
        *c = C::new(T::lit(re), T::lit(im));
    }
    Ok((p, tau))
}

pub fn save_profile<T: Real>(p: &ProfileField<T>, tau: f64, path: &Path) -> Result<()> {
    crate::io::write_atomic(path, |w| encode_profile(p, tau, w))
}

pub fn load_profile<T: Real>(basis: &Arc<HermiteBasis<T>>, path: &Path) -> Result<(ProfileField<T>, f64)> {
    decode_profile(basis, &mut BufReader::new(File::open(path)?))
}

/// Largest node-wise coefficient difference, for comparing trajectories.
pub fn max_node_error<T: Real>(a: &ProfileField<T>, b: &ProfileField<T>) -> Result<T> {
    if !a.same_layout(b) {
        return Err(Error::BasisMismatch);
    }
    let len = a.basis.len();
    Ok(a.data
        .chunks(len)
        .zip(b.data.chunks(len))
        .map(|(x, y)| crate::scalar::diff_norm(x, y))
        .fold(T::zero(), T::max))
}
