//! Photon-number statistics of twin beams.
//!
//! The crate covers exact Mandel-Rice kernels for the three-component twin-beam model,
//! a seeded Monte Carlo detector, non-classicality criteria with bootstrap errors,
//! model reconstruction from detected histograms and Laguerre-series intensity
//! quasi-distributions.
//!
//! The distribution and intensity kernels are generic over the scalar type; the
//! aliases below fix it to `f64`.

// `!(x > 0.0)` guards reject NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod criteria;
pub mod dist;
pub mod error;
pub mod histogram;
pub mod intensity;
pub mod io;
pub mod reconstruct;
pub mod scalar;
pub mod simulator;
pub mod special;

pub use error::{Error, Result};
pub use histogram::{JointHistogram, ShotRecord};
pub use scalar::Real;

pub type ModeParams = dist::ModeParams<f64>;
pub type TwbModel = dist::TwbModel<f64>;
pub type JointDistribution = dist::JointDistribution<f64>;
pub type Distribution1D = dist::Distribution1D<f64>;
pub type IntensityGrid = intensity::IntensityGrid<f64>;
pub type IntensityProfile = intensity::IntensityProfile<f64>;

pub type ModeParamsF32 = dist::ModeParams<f32>;
pub type TwbModelF32 = dist::TwbModel<f32>;
pub type JointDistributionF32 = dist::JointDistribution<f32>;
pub type Distribution1DF32 = dist::Distribution1D<f32>;
pub type IntensityGridF32 = intensity::IntensityGrid<f32>;
