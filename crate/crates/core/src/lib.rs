//! Models how a reflected signal path corrupts the Doppler estimate of a
//! frequency-locked loop (FLL).
//!
//! When a receiver tracks a carrier that arrives over a line-of-sight path plus
//! a specular reflection, the arctangent frequency discriminator does not
//! average the two Doppler shifts. Over most of each beat period it sits on the
//! Doppler of the *stronger* ray, and once per beat period it produces a sharp
//! excursion whose integrated area is exactly ±π radians. After the loop
//! filter, those excursions become a bounded sawtooth perturbation around the
//! strong-ray Doppler.
//!
//! The crate is organised around that story:
//!
//! - [`geometry`] maps receiver velocity and arrival directions to per-path
//!   Doppler shifts and beat rates.
//! - [`signal`] synthesizes pre-correlation baseband samples for a set of rays
//!   and reduces them through a correlate-and-integrate stage, plus the
//!   equivalent closed-form post-correlation model.
//! - [`discriminator`] implements the arctangent discriminator (complex and
//!   I/Q forms) and its two-ray closed form.
//! - [`beat`] analyses the discriminator output over a beat period: the
//!   ±1 step function of the amplitude ratio, period-averaged Doppler,
//!   deviation waveforms, and their areas.
//! - [`tracking`] runs the reference closed loop and the idealised
//!   spike-chain/filter response, including steady-state perturbation bounds.
//! - [`numerics`] holds the shared adaptive quadrature rule.
//!
//! Samples are complex baseband values represented as [`Complex64`], with the
//! real part as the in-phase component and the imaginary part as quadrature.

pub mod beat;
pub mod discriminator;
pub mod error;
pub mod geometry;
pub mod numerics;
pub mod signal;
pub mod tracking;

pub use error::Error;
pub use num_complex::Complex64;

/// Crate-wide result type.
pub type Result<T> = core::result::Result<T, Error>;
