#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trapnls::hermite::{build_basis, BasisSpec, HermiteBasis, HermiteField};
use trapnls::C64;

pub fn basis(d: usize, n_max: usize) -> Arc<HermiteBasis<f64>> {
    build_basis(BasisSpec::minimal(d, n_max).unwrap()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_coeffs(rng: &mut ChaCha8Rng, len: usize) -> Vec<C64> {
    (0..len)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

/// Random field with content only on levels `<= top`.
pub fn random_field(rng: &mut ChaCha8Rng, b: &Arc<HermiteBasis<f64>>, top: usize) -> HermiteField<f64> {
    let mut c = random_coeffs(rng, b.len());
    for (v, &l) in c.iter_mut().zip(b.levels()) {
        if l > top {
            *v = C64::new(0.0, 0.0);
        }
    }
    HermiteField::from_coeffs(b, c).unwrap()
}

pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
