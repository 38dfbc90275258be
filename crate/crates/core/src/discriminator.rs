//! The arctangent frequency discriminator and its two-ray closed form.
//!
//! An FLL estimates frequency from the angle swept between two successive
//! correlator outputs: δΦ = angle(S(t)·conj(S(t − Δt))). For a two-ray
//! signal that angle has an exact closed form, built from three intermediate
//! quantities: the common phase advance Δμ, the differential advance Δγ, and
//! the instantaneous differential phase δ(t). The closed form is what makes
//! the beat-period analysis in [`crate::beat`] tractable.

use crate::{Complex64, Error, Result};

/// Magnitudes below this are treated as exact zeros when deciding whether the
/// closed form sits on a singular point.
const SINGULAR_EPS: f64 = 1e-300;

/// A two-ray post-correlation signal and the discriminator timing, the full
/// parameterization of the closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoRayParams {
    /// Amplitude of ray 0 (the direct ray), ≥ 0.
    pub b0: f64,
    /// Amplitude of ray 1 (the reflection), ≥ 0.
    pub b1: f64,
    /// Received frequency of ray 0, rad/s.
    pub omega0: f64,
    /// Received frequency of ray 1, rad/s.
    pub omega1: f64,
    /// Phase offset of ray 0, rad.
    pub phi0: f64,
    /// Phase offset of ray 1, rad.
    pub phi1: f64,
    /// Replica frequency ω_R, rad/s.
    pub replica_freq: f64,
    /// Discriminator interval Δt, seconds.
    pub delta_t: f64,
}

impl TwoRayParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        b0: f64,
        b1: f64,
        omega0: f64,
        omega1: f64,
        phi0: f64,
        phi1: f64,
        replica_freq: f64,
        delta_t: f64,
    ) -> Result<Self> {
        if !(b0 >= 0.0) || !(b1 >= 0.0) || !b0.is_finite() || !b1.is_finite() {
            return Err(Error::InvalidInput {
                what: "ray amplitudes",
                why: "must be finite and >= 0",
            });
        }
        if b0 == 0.0 && b1 == 0.0 {
            return Err(Error::InvalidInput {
                what: "ray amplitudes",
                why: "must not both be zero",
            });
        }
        if !(delta_t > 0.0) || !delta_t.is_finite() {
            return Err(Error::InvalidInput {
                what: "delta_t",
                why: "must be finite and > 0",
            });
        }
        let finite = [omega0, omega1, phi0, phi1, replica_freq]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput {
                what: "two-ray parameters",
                why: "frequencies and phases must be finite",
            });
        }
        Ok(Self {
            b0,
            b1,
            omega0,
            omega1,
            phi0,
            phi1,
            replica_freq,
            delta_t,
        })
    }

    /// Amplitude ratio β = b1/b0. Infinite when the direct ray is absent.
    pub fn beta(&self) -> f64 {
        self.b1 / self.b0
    }

    /// Frequency error of ray `l` relative to the replica.
    fn freq_error(&self, l: usize) -> f64 {
        if l == 0 {
            self.omega0 - self.replica_freq
        } else {
            self.omega1 - self.replica_freq
        }
    }
}

/// The three phase quantities the closed form is written in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntermediateParams {
    /// Common-mode phase advance over Δt: ((δω₀ + δω₁)/2)·Δt, rad.
    pub delta_mu: f64,
    /// Differential phase advance over Δt: ((ω₀ − ω₁)/2)·Δt, rad.
    pub delta_gamma: f64,
    /// Frequency difference ω₀ − ω₁, rad/s.
    pub freq_diff: f64,
    /// Phase-offset difference φ₀ − φ₁, rad.
    pub phase_diff: f64,
}

impl IntermediateParams {
    /// Instantaneous differential phase δ(t) = (ω₀ − ω₁)·t − Δγ + (φ₀ − φ₁).
    pub fn delta_at(&self, t: f64) -> f64 {
        self.freq_diff * t - self.delta_gamma + self.phase_diff
    }
}

/// Computes Δμ, Δγ, and the pieces of δ(t) for a two-ray configuration.
///
/// The replica frequency cancels out of Δγ and δ(t); it only shifts Δμ.
pub fn intermediate_params(p: &TwoRayParams) -> IntermediateParams {
    IntermediateParams {
        delta_mu: 0.5 * (p.freq_error(0) + p.freq_error(1)) * p.delta_t,
        delta_gamma: 0.5 * (p.omega0 - p.omega1) * p.delta_t,
        freq_diff: p.omega0 - p.omega1,
        phase_diff: p.phi0 - p.phi1,
    }
}

/// The sample-level arctangent discriminator:
/// angle(s_now·conj(s_prev))/Δt, rad/s.
///
/// Fails with [`Error::IndeterminatePhase`] when either correlator output is
/// zero, since the swept angle is then undefined.
pub fn atan_discriminator(s_now: Complex64, s_prev: Complex64, delta_t: f64) -> Result<f64> {
    if !(delta_t > 0.0) {
        return Err(Error::InvalidInput {
            what: "delta_t",
            why: "must be > 0",
        });
    }
    let product = s_now * s_prev.conj();
    if product.re == 0.0 && product.im == 0.0 {
        return Err(Error::IndeterminatePhase);
    }
    Ok(product.arg() / delta_t)
}

/// The same discriminator written on I/Q accumulator pairs:
/// atan2(cross, dot)/Δt with cross = I_prev·Q_now − I_now·Q_prev and
/// dot = I_prev·I_now + Q_prev·Q_now. Algebraically identical to
/// [`atan_discriminator`]; both forms are kept so they can check each other.
pub fn atan_discriminator_iq(
    i_prev: f64,
    q_prev: f64,
    i_now: f64,
    q_now: f64,
    delta_t: f64,
) -> Result<f64> {
    if !(delta_t > 0.0) {
        return Err(Error::InvalidInput {
            what: "delta_t",
            why: "must be > 0",
        });
    }
    let cross = i_prev * q_now - i_now * q_prev;
    let dot = i_prev * i_now + q_prev * q_now;
    if cross == 0.0 && dot == 0.0 {
        return Err(Error::IndeterminatePhase);
    }
    Ok(cross.atan2(dot) / delta_t)
}

/// The oscillatory part of the closed-form discriminator, δΦ(t) − Δμ:
///
/// atan2((b₀² − b₁²)·sin Δγ, (b₀² + b₁²)·cos Δγ + 2·b₀·b₁·cos δ(t))
///
/// in (−π, π]. This is also the instantaneous Doppler-estimate deviation from
/// the two rays' average frequency, times Δt, which is what the beat analysis
/// integrates over a period.
///
/// Fails with [`Error::SingularPoint`] when both atan2 arguments vanish
/// (equal amplitudes with the composite phasor passing through zero).
pub fn composite_phase_term(p: &TwoRayParams, t: f64) -> Result<f64> {
    let im = intermediate_params(p);
    let delta = im.delta_at(t);
    let num = (p.b0 * p.b0 - p.b1 * p.b1) * im.delta_gamma.sin();
    let den =
        (p.b0 * p.b0 + p.b1 * p.b1) * im.delta_gamma.cos() + 2.0 * p.b0 * p.b1 * delta.cos();
    if num.abs() < SINGULAR_EPS && den.abs() < SINGULAR_EPS {
        return Err(Error::SingularPoint);
    }
    Ok(num.atan2(den))
}

/// Closed-form discriminator phase change for a two-ray signal at time `t`:
/// δΦ(t) = Δμ + [`composite_phase_term`], radians. δΦ differs from Δμ by at
/// most π, and equals the sample-level discriminator times Δt wherever the
/// total stays within the principal branch.
pub fn two_ray_discriminator(p: &TwoRayParams, t: f64) -> Result<f64> {
    let im = intermediate_params(p);
    Ok(im.delta_mu + composite_phase_term(p, t)?)
}
