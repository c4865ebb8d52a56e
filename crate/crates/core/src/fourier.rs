//! Periodic x-window with the transform `F^(xi) = (1/2pi) int e^{-ix xi} F(x) dx`.
//!
//! Points are `x_j = -L/2 + j dx`; frequencies are kept in FFT order,
//! `xi_k = 2 pi k / L` with `k = 0, 1, .., N/2 - 1, -N/2, .., -1`.

use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::{czero, Real, C};

pub struct XGrid<T: Real> {
    l_x: T,
    n_x: usize,
    x: Vec<T>,
    xi: Vec<T>,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
}

impl<T: Real> fmt::Debug for XGrid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("XGrid").field("l_x", &self.l_x).field("n_x", &self.n_x).finish()
    }
}

impl<T: Real> PartialEq for XGrid<T> {
    fn eq(&self, other: &Self) -> bool {
        self.l_x == other.l_x && self.n_x == other.n_x
    }
}

impl<T: Real> XGrid<T> {
    pub fn new(l_x: T, n_x: usize) -> Result<Arc<Self>> {
        if !(l_x > T::zero()) || !l_x.is_finite() {
            return Err(Error::InvalidParameter(format!("window length {l_x} must be positive")));
        }
        if n_x < 2 || !n_x.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("n_x = {n_x} must be a power of two >= 2")));
        }
        let dx = l_x / T::from_usize_lossy(n_x);
        let half = l_x / T::lit(2.0);
        let x = (0..n_x).map(|j| -half + dx * T::from_usize_lossy(j)).collect();
        let dxi = T::lit(2.0) * T::PI() / l_x;
        let xi = (0..n_x)
            .map(|k| {
                let kk = if k < n_x / 2 { k as f64 } else { k as f64 - n_x as f64 };
                dxi * T::lit(kk)
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Arc::new(XGrid {
            l_x,
            n_x,
            x,
            xi,
            fwd: planner.plan_fft_forward(n_x),
            inv: planner.plan_fft_inverse(n_x),
        }))
    }

    pub fn l_x(&self) -> T {
        self.l_x
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn dx(&self) -> T {
        self.l_x / T::from_usize_lossy(self.n_x)
    }

    pub fn dxi(&self) -> T {
        T::lit(2.0) * T::PI() / self.l_x
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }

    /// Frequencies in FFT order.
    pub fn xi(&self) -> &[T] {
        &self.xi
    }

    /// Largest resolved `|xi|`.
    pub fn xi_max(&self) -> T {
        self.dxi() * T::from_usize_lossy(self.n_x / 2)
    }

    /// Physical samples to transform values, in place.
    pub fn forward(&self, data: &mut [C<T>]) {
        debug_assert_eq!(data.len(), self.n_x);
        self.fwd.process(data);
        let s = self.dx() / (T::lit(2.0) * T::PI());
        for (k, v) in data.iter_mut().enumerate() {
            *v = if k % 2 == 0 { *v * s } else { *v * (-s) };
        }
    }

    /// Transform values to physical samples, in place.
    pub fn inverse(&self, data: &mut [C<T>]) {
        debug_assert_eq!(data.len(), self.n_x);
        let s = self.dxi();
        for (k, v) in data.iter_mut().enumerate() {
            *v = if k % 2 == 0 { *v * s } else { *v * (-s) };
        }
        self.inv.process(data);
    }

    /// Permutation from sorted-ascending frequency order to FFT order: `sorted[m] = fft[perm[m]]`.
    pub fn sorted_order(&self) -> Vec<usize> {
        let h = self.n_x / 2;
        (0..self.n_x).map(|m| (m + h) % self.n_x).collect()
    }

    /// `L^2` norm squared of physical samples.
    pub fn l2_sqr_physical(&self, data: &[C<T>]) -> T {
        self.dx() * data.iter().map(|v| v.norm_sqr()).sum::<T>()
    }

    /// `L^2` norm squared from transform values (Parseval with the `1/2pi` convention).
    pub fn l2_sqr_spectral(&self, data: &[C<T>]) -> T {
        T::lit(2.0) * T::PI() * self.dxi() * data.iter().map(|v| v.norm_sqr()).sum::<T>()
    }
}

/// A scalar field on the x-window, stored as physical samples.
#[derive(Clone, Debug)]
pub struct Line<T: Real> {
    pub grid: Arc<XGrid<T>>,
    pub values: Vec<C<T>>,
}

impl<T: Real> Line<T> {
    pub fn from_fn<F: Fn(T) -> C<T>>(grid: &Arc<XGrid<T>>, f: F) -> Self {
        Line { grid: grid.clone(), values: grid.x().iter().map(|&x| f(x)).collect() }
    }

    pub fn zeros(grid: &Arc<XGrid<T>>) -> Self {
        Line { grid: grid.clone(), values: vec![czero(); grid.n_x()] }
    }

    pub fn spectrum(&self) -> Vec<C<T>> {
        let mut v = self.values.clone();
        self.grid.forward(&mut v);
        v
    }

    pub fn from_spectrum(grid: &Arc<XGrid<T>>, mut spec: Vec<C<T>>) -> Self {
        grid.inverse(&mut spec);
        Line { grid: grid.clone(), values: spec }
    }

    pub fn mass(&self) -> T {
        self.grid.l2_sqr_physical(&self.values)
    }

    pub fn linf(&self) -> T {
        self.values.iter().map(|v| v.norm()).fold(T::zero(), T::max)
    }
}
