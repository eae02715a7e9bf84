//! dimlab: dual-panel HDR display simulation and backlight-dimming laboratory.
//!
//! The crate models the optical chain of an LED-backlit HDR display
//! (backlight grid, diffusion kernel, liquid-crystal transmittance),
//! implements classical and optimization-based dimming algorithms, a small
//! power-conditioned convolutional backlight predictor with its own
//! reverse-mode differentiation, and the perceptual quality / power metrics
//! used to compare them.
//!
//! All numeric code is generic over the scalar type via [`scalar::Real`]
//! (`f32` or `f64`); the aliases below fix the default `f64` precision used
//! by the CLI.

pub mod display;
pub mod dimmers;
pub mod error;
pub mod fftconv;
pub mod hdrio;
pub mod metrics;
pub mod net;
pub mod optim;
pub mod raster;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

/// Default scalar for end-user entry points.
pub type Scalar = f64;

pub type HdrImage = hdrio::HdrImage<Scalar>;
pub type LumaMap = hdrio::LumaMap<Scalar>;
pub type Raster = raster::Raster<Scalar>;
// pub type Backlight = display::Backlight<Scalar>;
// pub type BacklightLayout = display::BacklightLayout<Scalar>;
// pub type DisplayConfig = display::DisplayConfig<Scalar>;
// pub type Psf = display::Psf<Scalar>;
// pub type LossConfig = optim::LossConfig<Scalar>;
// pub type OptimConfig = optim::OptimConfig<Scalar>;
// pub type PuCurve = metrics::PuCurve<Scalar>;
