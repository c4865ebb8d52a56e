//! Hermite eigenbasis of the isotropic harmonic oscillator `H = sum_j (-d_j^2 + y_j^2)`.
//!
//! Level `n` (multi-indices with `|k| = n`) has eigenvalue `2n + d`. Functions are
//! represented by coefficients over all modes with `|k| <= n_max`.
//!
//! Phase convention: `e^{isH}` multiplies level `n` by `e^{is(2n+d)}`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{cis, czero, norm_sqr, Real, C};

/// Largest supported trap dimension.
pub const MAX_DIM: usize = 4;

/// Multi-index of a Hermite mode. Components past `d` are zero.
pub type Mode = [u16; MAX_DIM];

/// Size parameters of a Hermite basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct BasisSpec {
    pub d: usize,
    pub n_max: usize,
    pub quad_nodes: usize,
}

impl BasisSpec {
    pub fn new(d: usize, n_max: usize, quad_nodes: usize) -> Result<Self> {
        let spec = BasisSpec { d, n_max, quad_nodes };
        spec.validate()?;
        Ok(spec)
    }

    /// Spec with the smallest admissible node count, `2 n_max + 1`.
    pub fn minimal(d: usize, n_max: usize) -> Result<Self> {
        Self::new(d, n_max, 2 * n_max + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d > MAX_DIM {
            return Err(Error::InvalidSpec(format!("d = {} not in 1..=4", self.d)));
        }
        if self.n_max > u16::MAX as usize / 4 {
            return Err(Error::InvalidSpec(format!("n_max = {} too large", self.n_max)));
        }
        if self.quad_nodes < 2 * self.n_max + 1 {
            return Err(Error::QuadratureBound {
                what: "basis quadrature",
                got: self.quad_nodes,
                required: 2 * self.n_max + 1,
            });
        }
        Ok(())
    }

    pub fn mode_count(&self) -> usize {
        binomial(self.n_max + self.d, self.d)
    }
}

/// `lambda_n = 2n + d`.
pub fn eig_level(n: usize, d: usize) -> f64 {
    (2 * n + d) as f64
}

/// Number of multi-indices in `N_0^d` with `|k| = n`.
pub fn level_degeneracy(n: usize, d: usize) -> usize {
    if d == 0 {
        return usize::from(n == 0);
    }
    binomial(n + d - 1, d - 1)
}

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Gauss–Hermite rule for weight `e^{-x^2}`: ascending nodes and weights.
pub fn gauss_hermite(q: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(q >= 1, "at least one node");
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let nf = q as f64;
    let mut x = vec![0.0f64; q];
    let mut w = vec![0.0f64; q];
    let m = q.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 1.0;
        for _ in 0..200 {
            let (mut p1, mut p2) = (pim4, 0.0f64);
            for j in 1..=q {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / (pp * pp);
        x[q - 1 - i] = -z;
        w[q - 1 - i] = w[i];
    }
    if q % 2 == 1 {
        x[q / 2] = 0.0;
    }
    x.reverse();
    w.reverse();
    (x, w)
}

/// Normalized 1D Hermite functions `psi_0..=psi_n` at `x` by the stable recurrence.
pub fn hermite_functions<T: Real>(n: usize, x: T) -> Vec<T> {
    let mut out = Vec::with_capacity(n + 1);
    let p0 = T::PI().powf(T::lit(-0.25)) * (-x * x / T::lit(2.0)).exp();
    out.push(p0);
    if n == 0 {
        return out;
    }
    out.push(T::SQRT_2() * x * p0);
    for k in 1..n {
        let kf = T::from_usize_lossy(k);
        let a = (T::lit(2.0) / (kf + T::one())).sqrt();
        let b = (kf / (kf + T::one())).sqrt();
        let next = a * x * out[k] - b * out[k - 1];
        out.push(next);
    }
    out
}

/// A one-dimensional quadrature rule with its Hermite table.
///
/// `weights` integrate against `dy` (the Gaussian factor is folded in).
#[derive(Clone, Debug)]
pub struct QuadRule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
    /// `table[i * (n_max + 1) + k] = psi_k(nodes[i])`.
    pub table: Vec<T>,
}

impl<T: Real> QuadRule<T> {
    fn build(nodes: Vec<f64>, weights: Vec<f64>, n_max: usize) -> Self {
        let mut table = Vec::with_capacity(nodes.len() * (n_max + 1));
        for &x in &nodes {
            table.extend(hermite_functions(n_max, T::lit(x)));
        }
        QuadRule {
            nodes: nodes.into_iter().map(T::lit).collect(),
            weights: weights.into_iter().map(T::lit).collect(),
            table,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Which tensor grid a transform uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Grid {
    /// Gauss–Hermite nodes; exact for products of two basis functions.
    Analysis,
    /// Nodes scaled by `1/sqrt(2)`; exact for products of four basis functions.
    Product,
}

/// Hermite basis tables for a given [`BasisSpec`].
pub struct HermiteBasis<T> {
    spec: BasisSpec,
    modes: Vec<Mode>,
    levels: Vec<usize>,
    level_start: Vec<usize>,
    cube_index: Vec<usize>,
    index: HashMap<Mode, usize>,
    analysis: QuadRule<T>,
    product: QuadRule<T>,
}

impl<T> fmt::Debug for HermiteBasis<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HermiteBasis")
            .field("spec", &self.spec)
            .field("modes", &self.modes.len())
            .finish()
    }
}

/// Build the basis tables. Fails if `quad_nodes < 2 n_max + 1`.
pub fn build_basis<T: Real>(spec: BasisSpec) -> Result<Arc<HermiteBasis<T>>> {
    HermiteBasis::new(spec).map(Arc::new)
}

fn push_modes(d: usize, level: usize, prefix: &mut Vec<u16>, out: &mut Vec<Mode>) {
    if prefix.len() == d - 1 {
        let used: usize = prefix.iter().map(|&k| k as usize).sum();
        let mut m = [0u16; MAX_DIM];
        m[..d - 1].copy_from_slice(prefix);
        m[d - 1] = (level - used) as u16;
        out.push(m);
        return;
    }
    let used: usize = prefix.iter().map(|&k| k as usize).sum();
    for k in (0..=level - used).rev() {
        prefix.push(k as u16);
        push_modes(d, level, prefix, out);
        prefix.pop();
    }
}

impl<T: Real> HermiteBasis<T> {
    pub fn new(spec: BasisSpec) -> Result<Self> {
        spec.validate()?;
        let d = spec.d;
        let n = spec.n_max;
        let mut modes = Vec::with_capacity(spec.mode_count());
        let mut levels = Vec::new();
        let mut level_start = Vec::with_capacity(n + 2);
        for level in 0..=n {
            level_start.push(modes.len());
            push_modes(d, level, &mut Vec::with_capacity(d), &mut modes);
            levels.resize(modes.len(), level);
        }
        level_start.push(modes.len());
        let side = n + 1;
        let cube_index = modes
            .iter()
            .map(|m| m[..d].iter().fold(0usize, |acc, &k| acc * side + k as usize))
            .collect();
        let index = modes.iter().enumerate().map(|(i, &m)| (m, i)).collect();

        let (x, w) = gauss_hermite(spec.quad_nodes);
        let big_w: Vec<f64> = x.iter().zip(&w).map(|(xi, wi)| wi * (xi * xi).exp()).collect();
        let s2 = std::f64::consts::SQRT_2;
        let px: Vec<f64> = x.iter().map(|v| v / s2).collect();
        let pw: Vec<f64> = big_w.iter().map(|v| v / s2).collect();

        Ok(HermiteBasis {
            spec,
            modes,
            levels,
            level_start,
            cube_index,
            index,
            analysis: QuadRule::build(x, big_w, n),
            product: QuadRule::build(px, pw, n),
        })
    }

    pub fn spec(&self) -> BasisSpec {
        self.spec
    }

    pub fn d(&self) -> usize {
        self.spec.d
    }

    pub fn n_max(&self) -> usize {
        self.spec.n_max
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Level `|k|` of each mode, aligned with [`Self::modes`].
    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    /// Index range of the modes at level `n`.
    pub fn level_range(&self, n: usize) -> std::ops::Range<usize> {
        self.level_start[n]..self.level_start[n + 1]
    }

    pub fn mode_index(&self, mode: &Mode) -> Option<usize> {
        self.index.get(mode).copied()
    }

    /// Position of mode `i` inside the dense `(n_max+1)^d` coefficient cube.
    pub fn cube_index(&self) -> &[usize] {
        &self.cube_index
    }

    /// Eigenvalue `2n + d` as a scalar.
    pub fn eig(&self, n: usize) -> T {
        T::from_usize_lossy(2 * n + self.spec.d)
    }

    pub fn rule(&self, grid: Grid) -> &QuadRule<T> {
        match grid {
            Grid::Analysis => &self.analysis,
            Grid::Product => &self.product,
        }
    }

    /// Number of points on the tensor grid, `q^d`.
    pub fn grid_len(&self) -> usize {
        self.spec.quad_nodes.pow(self.spec.d as u32)
    }

    /// Tensor-grid points, axis 0 slowest, flattened with `d` coordinates per point.
    pub fn grid_points(&self, grid: Grid) -> Vec<T> {
        let d = self.spec.d;
        let q = self.spec.quad_nodes;
        let nodes = &self.rule(grid).nodes;
        let mut out = Vec::with_capacity(self.grid_len() * d);
        for flat in 0..self.grid_len() {
            let mut rem = flat;
            let mut idx = [0usize; MAX_DIM];
            for j in (0..d).rev() {
                idx[j] = rem % q;
                rem /= q;
            }
            out.extend(idx[..d].iter().map(|&i| nodes[i]));
        }
        out
    }

    /// Tensor-grid weights (product of 1D weights), aligned with [`Self::grid_points`].
    pub fn grid_weights(&self, grid: Grid) -> Vec<T> {
        let d = self.spec.d;
        let q = self.spec.quad_nodes;
        let w = &self.rule(grid).weights;
        (0..self.grid_len())
            .map(|flat| {
                let mut rem = flat;
                let mut acc = T::one();
                for _ in 0..d {
                    acc = acc * w[rem % q];
                    rem /= q;
                }
                acc
            })
            .collect()
    }

    /// Evaluate `sum_k c_k psi_k` on a tensor grid.
    pub fn synthesize_coeffs(&self, grid: Grid, coeffs: &[C<T>]) -> Vec<C<T>> {
        let d = self.spec.d;
        let side = self.spec.n_max + 1;
        let q = self.spec.quad_nodes;
        let mut cube = vec![czero(); side.pow(d as u32)];
        for (c, &ci) in coeffs.iter().zip(&self.cube_index) {
            cube[ci] = *c;
        }
        // psi table is [node][k], which is exactly an (out = q) x (in = side) matrix.
        let mat = &self.rule(grid).table;
        let mut shape = [side; MAX_DIM];
        for axis in 0..d {
            cube = contract_axis(&cube, &shape[..d], axis, mat, q, side);
            shape[axis] = q;
        }
        cube
    }

    /// Quadrature projections `<h, psi_k>` from tensor-grid samples of `h`.
    pub fn analyze_coeffs(&self, grid: Grid, values: &[C<T>]) -> Vec<C<T>> {
        let d = self.spec.d;
        let side = self.spec.n_max + 1;
        let q = self.spec.quad_nodes;
        let rule = self.rule(grid);
        let mut mat = vec![T::zero(); side * q];
        for i in 0..q {
            for k in 0..side {
                mat[k * q + i] = rule.weights[i] * rule.table[i * side + k];
            }
        }
        let mut data = values.to_vec();
        let mut shape = [q; MAX_DIM];
        for axis in 0..d {
            data = contract_axis(&data, &shape[..d], axis, &mat, side, q);
            shape[axis] = side;
        }
        self.cube_index.iter().map(|&ci| data[ci]).collect()
    }

    /// Values of all basis modes at one point.
    pub fn eval_modes(&self, point: &[T]) -> Vec<T> {
        let d = self.spec.d;
        let n = self.spec.n_max;
        let tables: Vec<Vec<T>> = point[..d].iter().map(|&x| hermite_functions(n, x)).collect();
        self.modes
            .iter()
            .map(|m| (0..d).fold(T::one(), |acc, j| acc * tables[j][m[j] as usize]))
            .collect()
    }
}

/// Apply `mat` (`out_len x in_len`, row-major) along `axis` of a row-major array.
pub(crate) fn contract_axis<T: Real>(
    data: &[C<T>],
    shape: &[usize],
    axis: usize,
    mat: &[T],
    out_len: usize,
    in_len: usize,
) -> Vec<C<T>> {
    debug_assert_eq!(shape[axis], in_len);
    let pre: usize = shape[..axis].iter().product();
    let post: usize = shape[axis + 1..].iter().product();
    let mut out = vec![czero(); pre * out_len * post];
    for p in 0..pre {
        for o in 0..out_len {
            let row = &mat[o * in_len..(o + 1) * in_len];
            let dst = &mut out[(p * out_len + o) * post..(p * out_len + o + 1) * post];
            for (i, &m) in row.iter().enumerate() {
                if m == T::zero() {
                    continue;
                }
                let src = &data[(p * in_len + i) * post..(p * in_len + i + 1) * post];
                for (dv, sv) in dst.iter_mut().zip(src) {
                    *dv = *dv + *sv * m;
                }
            }
        }
    }
    out
}

/// A function on `R^d` expanded in the Hermite basis.
#[derive(Clone)]
pub struct HermiteField<T> {
    basis: Arc<HermiteBasis<T>>,
    pub coeffs: Vec<C<T>>,
}

impl<T: Real> fmt::Debug for HermiteField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HermiteField")
            .field("spec", &self.basis.spec)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl<T: Real> HermiteField<T> {
    pub fn zeros(basis: &Arc<HermiteBasis<T>>) -> Self {
        HermiteField { basis: basis.clone(), coeffs: vec![czero(); basis.len()] }
    }

    pub fn from_coeffs(basis: &Arc<HermiteBasis<T>>, coeffs: Vec<C<T>>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::Shape { expected: basis.len(), got: coeffs.len() });
        }
        Ok(HermiteField { basis: basis.clone(), coeffs })
    }

    /// Unit coefficient on a single mode.
    pub fn unit(basis: &Arc<HermiteBasis<T>>, mode: &Mode) -> Result<Self> {
        let idx = basis.mode_index(mode).ok_or_else(|| {
            let level = mode.iter().map(|&k| k as usize).sum();
            Error::LevelOutOfRange { level, n_max: basis.n_max() }
        })?;
        let mut f = Self::zeros(basis);
        f.coeffs[idx] = C::new(T::one(), T::zero());
        Ok(f)
    }

    pub fn basis(&self) -> &Arc<HermiteBasis<T>> {
        &self.basis
    }

    pub fn same_basis(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.basis, &other.basis) || self.basis.spec == other.basis.spec
    }

    pub fn check_basis(&self, other: &Self) -> Result<()> {
        if self.same_basis(other) {
            Ok(())
        } else {
            Err(Error::BasisMismatch)
        }
    }

    /// `L^2` norm squared (the basis is orthonormal).
    pub fn norm_sqr(&self) -> T {
        norm_sqr(&self.coeffs)
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    pub fn scaled(&self, s: C<T>) -> Self {
        HermiteField { basis: self.basis.clone(), coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn conj(&self) -> Self {
        HermiteField { basis: self.basis.clone(), coeffs: self.coeffs.iter().map(|c| c.conj()).collect() }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: C<T>, other: &Self) -> Self {
        HermiteField {
            basis: self.basis.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b * s).collect(),
        }
    }

    /// Highest level carrying a coefficient above `tol` in modulus.
    pub fn top_level(&self, tol: T) -> Option<usize> {
        self.coeffs
            .iter()
            .zip(self.basis.levels())
            .filter(|(c, _)| c.norm() > tol)
            .map(|(_, &l)| l)
            .max()
    }

    /// Point evaluation.
    pub fn eval(&self, point: &[T]) -> C<T> {
        let vals = self.basis.eval_modes(point);
        self.coeffs.iter().zip(vals).fold(czero(), |acc, (c, v)| acc + c * v)
    }
}

/// Coefficients from samples on the analysis grid.
pub fn analyze<T: Real>(basis: &Arc<HermiteBasis<T>>, grid_values: &[C<T>]) -> Result<HermiteField<T>> {
    if grid_values.len() != basis.grid_len() {
        return Err(Error::Shape { expected: basis.grid_len(), got: grid_values.len() });
    }
    HermiteField::from_coeffs(basis, basis.analyze_coeffs(Grid::Analysis, grid_values))
}

/// Samples on the analysis grid.
pub fn synthesize<T: Real>(field: &HermiteField<T>) -> Vec<C<T>> {
    field.basis.synthesize_coeffs(Grid::Analysis, &field.coeffs)
}

/// Projection onto level `n`.
pub fn project_level<T: Real>(field: &HermiteField<T>, n: usize) -> Result<HermiteField<T>> {
    let basis = field.basis();
    if n > basis.n_max() {
        return Err(Error::LevelOutOfRange { level: n, n_max: basis.n_max() });
    }
    let range = basis.level_range(n);
    let mut out = HermiteField::zeros(basis);
    out.coeffs[range.clone()].copy_from_slice(&field.coeffs[range]);
    Ok(out)
}

/// Per-level phases `e^{is(2n+d)}`, `n = 0..=n_max`.
pub fn harmonic_phases<T: Real>(basis: &HermiteBasis<T>, s: T) -> Vec<C<T>> {
    (0..=basis.n_max()).map(|n| cis(s * basis.eig(n))).collect()
}

/// `e^{isH} f`.
pub fn propagate_harmonic<T: Real>(field: &HermiteField<T>, s: T) -> HermiteField<T> {
    let basis = field.basis();
    let ph = harmonic_phases(basis, s);
    let coeffs = field.coeffs.iter().zip(basis.levels()).map(|(c, &l)| c * ph[l]).collect();
    HermiteField { basis: basis.clone(), coeffs }
}

/// Free Schrödinger evolution `e^{it Laplacian} f` evaluated at `points`
/// (flattened, `d` coordinates each) through the lens transform.
pub fn lens_map<T: Real>(field: &HermiteField<T>, t: T, points: &[T]) -> Result<Vec<C<T>>> {
    let d = field.basis().d();
    if points.len() % d != 0 {
        return Err(Error::Shape { expected: d * (points.len() / d + 1), got: points.len() });
    }
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let scale_sq = T::one() + four * t * t;
    let scale = scale_sq.sqrt();
    let tau = (two * t).atan() / two;
    let v = propagate_harmonic(field, -tau);
    let amp = scale_sq.powf(-T::from_usize_lossy(d) / four);
    let mut out = Vec::with_capacity(points.len() / d);
    let mut buf = vec![T::zero(); d];
    for p in points.chunks(d) {
        let r2: T = p.iter().map(|&x| x * x).sum();
        for (b, &x) in buf.iter_mut().zip(p) {
            *b = x / scale;
        }
        out.push(v.eval(&buf) * cis(r2 * t / scale_sq) * amp);
    }
    Ok(out)
}

/// Coefficients of `g_n(y) = (y1 + i y2)^n e^{-|y|^2/2}` (or of its conjugate), `d = 2`.
pub fn special_g_n<T: Real>(basis: &Arc<HermiteBasis<T>>, n: usize, conjugate: bool) -> Result<HermiteField<T>> {
    if basis.d() != 2 {
        return Err(Error::Dimension { required: 2, got: basis.d() });
    }
    if n > basis.n_max() {
        return Err(Error::LevelOutOfRange { level: n, n_max: basis.n_max() });
    }
    let pts = basis.grid_points(Grid::Analysis);
    let sign = if conjugate { -T::one() } else { T::one() };
    let samples: Vec<C<T>> = pts
        .chunks(2)
        .map(|p| {
            let z = C::new(p[0], sign * p[1]);
            z.powu(n as u32) * (-(p[0] * p[0] + p[1] * p[1]) / T::lit(2.0)).exp()
        })
        .collect();
    let mut f = analyze(basis, &samples)?;
    // exact support is level n; clear quadrature rounding elsewhere
    let range = basis.level_range(n);
    for (i, c) in f.coeffs.iter_mut().enumerate() {
        if !range.contains(&i) {
            *c = czero();
        }
    }
    Ok(f)
}

/// `y_j f`, truncated at `n_max`.
pub fn mul_y<T: Real>(field: &HermiteField<T>, j: usize) -> HermiteField<T> {
    ladder(field, j, T::one())
}

/// `d/dy_j f`, truncated at `n_max`.
pub fn d_y<T: Real>(field: &HermiteField<T>, j: usize) -> HermiteField<T> {
    ladder(field, j, -T::one())
}

// y psi_k = sqrt(k/2) psi_{k-1} + sqrt((k+1)/2) psi_{k+1}
// d psi_k = sqrt(k/2) psi_{k-1} - sqrt((k+1)/2) psi_{k+1}
fn ladder<T: Real>(field: &HermiteField<T>, j: usize, up_sign: T) -> HermiteField<T> {
    let basis = field.basis();
    let mut out = HermiteField::zeros(basis);
    let half = T::lit(0.5);
    for (m, c) in basis.modes().iter().zip(&field.coeffs) {
        let k = m[j] as usize;
        let kf = T::from_usize_lossy(k);
        if k > 0 {
            let mut lo = *m;
            lo[j] -= 1;
            if let Some(idx) = basis.mode_index(&lo) {
                out.coeffs[idx] = out.coeffs[idx] + c * (kf * half).sqrt();
            }
        }
        let mut hi = *m;
        hi[j] += 1;
        if let Some(idx) = basis.mode_index(&hi) {
            out.coeffs[idx] = out.coeffs[idx] + c * (up_sign * ((kf + T::one()) * half).sqrt());
        }
    }
    out
}

/// Largest residual over `j` of the two identities
/// `d_j e^{isH} = e^{isH}(cos 2s d_j + i sin 2s y_j)` and
/// `y_j e^{isH} = e^{isH}(cos 2s y_j + i sin 2s d_j)`.
///
/// Exact when `f` has no content at level `n_max`.
pub fn commutator_check<T: Real>(field: &HermiteField<T>, s: T) -> T {
    let two = T::lit(2.0);
    let (sn, cs) = (two * s).sin_cos();
    let c = C::new(cs, T::zero());
    let is = C::new(T::zero(), sn);
    let prop = propagate_harmonic(field, s);
    let mut worst = T::zero();
    for j in 0..field.basis().d() {
        let dy = d_y(field, j);
        let yy = mul_y(field, j);
        let lhs1 = d_y(&prop, j);
        let rhs1 = propagate_harmonic(&dy.scaled(c).axpy(is, &yy), s);
        let lhs2 = mul_y(&prop, j);
        let rhs2 = propagate_harmonic(&yy.scaled(c).axpy(is, &dy), s);
        let r1 = crate::scalar::diff_norm(&lhs1.coeffs, &rhs1.coeffs);
        let r2 = crate::scalar::diff_norm(&lhs2.coeffs, &rhs2.coeffs);
        worst = worst.max(r1).max(r2);
    }
    worst
}
