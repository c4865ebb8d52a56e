//! Spectral solvers for the cubic Schrödinger equation with a partial harmonic trap.

pub mod acceptance;
pub mod analysis;
pub mod error;
pub mod fourier;
pub mod hermite;
pub mod io;
pub mod limit;
pub mod nls;
pub mod resonant;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{Real, C};

pub type C64 = C<f64>;
pub type HermiteBasis64 = hermite::HermiteBasis<f64>;
pub type HermiteField64 = hermite::HermiteField<f64>;
pub type InteractionTensor64 = resonant::InteractionTensor<f64>;
pub type ProfileField64 = limit::ProfileField<f64>;
pub type MixedField64 = nls::MixedField<f64>;
pub type XGrid64 = fourier::XGrid<f64>;
