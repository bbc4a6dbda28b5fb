//! Flexural mode-pair physics of suspended elliptical nanowaveguides.
//!
//! A nanowaveguide with a slightly elliptical cross section supports two
//! nondegenerate flexural modes per order, vibrating along the principal
//! axes of the ellipse. The frequency ratio of each pair converges to the
//! cross-section ellipticity with increasing order, which turns a vibration
//! spectrum into a subnanometer ellipticity gauge.
//!
//! This crate provides the forward chain (cross-section geometry, the
//! clamped–clamped Euler–Bernoulli eigenproblem, mode-pair prediction,
//! equipartition amplitudes, synthetic thermomechanical spectra) and the
//! inverse chain (peak detection, double-Lorentzian fitting, order
//! assignment, convergence fitting, ellipticity and probe-angle recovery).
//!
//! The crate is `no_std`-compatible (`alloc` required); disable the default
//! `std` feature for embedded or wasm use.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analyze;
pub mod beam;
pub mod error;
pub mod lm;
pub mod splitting;
pub mod synth;
pub mod thermal;
pub mod xsection;

mod bandeig;

pub use error::Error;
pub use xsection::{EllipseSection, Material};
