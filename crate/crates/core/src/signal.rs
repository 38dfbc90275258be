//! Multipath baseband synthesis and the correlate-and-integrate stage.
//!
//! A received signal is a sum of rays, each a delayed, Doppler-shifted,
//! phase-rotated copy of the same spreading code. The receiver multiplies by
//! a local replica (code times carrier) and averages over one coherent
//! integration interval. For frequency errors small over that interval, the
//! result per ray is its code-correlation amplitude spinning at the ray's
//! frequency error: the post-correlation model handled by
//! [`synthesize_postcorrelation`].
//!
//! Time is continuous; sampling happens only on the uniform midpoint grid of
//! the integrate-and-dump stage. Code delays that are integer multiples of
//! the sample period keep every chip transition on a sample-cell boundary,
//! which makes the midpoint Riemann sum exact for the code product.

use crate::{Complex64, Error, Result};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Chips per code period in the default configuration.
pub const DEFAULT_CODE_CHIPS: usize = 1023;
/// Default chipping rate, chips/s.
pub const DEFAULT_CHIP_RATE: f64 = 1.023e6;
/// Default complex sample rate, samples/s.
pub const DEFAULT_SAMPLE_RATE: f64 = 4.092e6;
/// Default coherent integration time, s.
pub const DEFAULT_COHERENT_TIME: f64 = 1e-3;

/// Fewest samples allowed per coherent integration.
const MIN_SAMPLES_PER_INTEGRATION: usize = 100;

/// Frequency-error spread treated as "all rays at the same frequency".
const COLLAPSE_FREQ_TOL: f64 = 1e-12;

/// Wraps a phase into [−π, π).
pub fn normalize_phase(phase: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    let p = phase.rem_euclid(tau);
    if p >= std::f64::consts::PI {
        p - tau
    } else {
        p
    }
}

/// One propagation path of the received signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    /// Carrier amplitude, > 0.
    pub amplitude: f64,
    /// Carrier Doppler shift of this path, rad/s.
    pub doppler: f64,
    /// Carrier phase offset, stored in [−π, π).
    pub phase: f64,
    /// Code delay, seconds.
    pub code_delay: f64,
}

impl Ray {
    /// Builds a ray, normalizing the phase into [−π, π).
    pub fn new(amplitude: f64, doppler: f64, phase: f64, code_delay: f64) -> Result<Self> {
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return Err(Error::InvalidInput {
                what: "ray amplitude",
                why: "must be finite and > 0",
            });
        }
        if !doppler.is_finite() || !phase.is_finite() || !code_delay.is_finite() {
            return Err(Error::InvalidInput {
                what: "ray parameters",
                why: "doppler, phase, and code delay must be finite",
            });
        }
        Ok(Self {
            amplitude,
            doppler,
            phase: normalize_phase(phase),
            code_delay,
        })
    }
}

/// One ray as seen after correlation: amplitude includes the code-correlation
/// loss, and the frequency is the error relative to the replica.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostRay {
    /// Post-correlation amplitude, ≥ 0.
    pub amplitude: f64,
    /// Frequency error relative to the replica, rad/s.
    pub freq_error: f64,
    /// Phase offset, rad.
    pub phase: f64,
}

impl PostRay {
    pub fn new(amplitude: f64, freq_error: f64, phase: f64) -> Result<Self> {
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(Error::InvalidInput {
                what: "post-correlation amplitude",
                why: "must be finite and >= 0",
            });
        }
        if !freq_error.is_finite() || !phase.is_finite() {
            return Err(Error::InvalidInput {
                what: "post-correlation ray",
                why: "frequency error and phase must be finite",
            });
        }
        Ok(Self {
            amplitude,
            freq_error,
            phase,
        })
    }
}

/// A periodic ±1 spreading code.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeSequence {
    /// Chip values, each +1 or −1.
    pub chips: Vec<i8>,
    /// Duration of one chip, seconds.
    pub chip_period: f64,
}

impl CodeSequence {
    pub fn new(chips: Vec<i8>, chip_period: f64) -> Result<Self> {
        if chips.is_empty() {
            return Err(Error::InvalidInput {
                what: "code",
                why: "must contain at least one chip",
            });
        }
        if chips.iter().any(|&c| c != 1 && c != -1) {
            return Err(Error::InvalidInput {
                what: "code",
                why: "chips must be +1 or -1",
            });
        }
        if !(chip_period > 0.0) || !chip_period.is_finite() {
            return Err(Error::InvalidInput {
                what: "chip period",
                why: "must be finite and > 0",
            });
        }
        Ok(Self { chips, chip_period })
    }

    /// Duration of one full code repetition, seconds.
    pub fn period(&self) -> f64 {
        self.chips.len() as f64 * self.chip_period
    }

    /// Code value at time `t`, extended periodically in both directions.
    pub fn chip_at(&self, t: f64) -> f64 {
        let n = self.chips.len() as i64;
        let idx = (t / self.chip_period).floor() as i64;
        self.chips[idx.rem_euclid(n) as usize] as f64
    }
}

/// Generates a seeded random ±1 code. The same seed always yields the same
/// chips on every platform.
pub fn generate_code(seed: u64, n_chips: usize, chip_period: f64) -> Result<CodeSequence> {
    if n_chips == 0 {
        return Err(Error::InvalidInput {
            what: "code length",
            why: "must be at least one chip",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chips = Vec::with_capacity(n_chips);
    let mut word = 0u64;
    let mut bits_left = 0u32;
    for _ in 0..n_chips {
        if bits_left == 0 {
            word = rng.next_u64();
            bits_left = 64;
        }
        chips.push(if word & 1 == 1 { 1 } else { -1 });
        word >>= 1;
        bits_left -= 1;
    }
    CodeSequence::new(chips, chip_period)
}

/// Normalized code autocorrelation at a continuous lag:
/// R(lag) = (1/T_code)·∫ c(t − lag)·c(t) dt over one code period.
///
/// Evaluated exactly: the integral is piecewise linear in the lag between
/// cyclic whole-chip correlations, so no numerical integration is involved.
/// R(0) = 1, and the lag is taken modulo the code period.
pub fn code_autocorr(code: &CodeSequence, lag: f64) -> f64 {
    let n = code.chips.len();
    let mut x = lag.rem_euclid(code.period()) / code.chip_period;
    if x >= n as f64 {
        x = 0.0;
    }
    let k = x.floor() as usize;
    let r = x - k as f64;
    let rho = |m: usize| -> f64 {
        let m = m % n;
        let mut acc: i64 = 0;
        for i in 0..n {
            let j = (i + n - m) % n;
            acc += (code.chips[i] * code.chips[j]) as i64;
        }
        acc as f64 / n as f64
    };
    if r == 0.0 {
        rho(k)
    } else {
        (1.0 - r) * rho(k) + r * rho(k + 1)
    }
}

/// Everything the correlator stage needs to know about one integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisConfig {
    /// Nominal carrier frequency ω the rays' Dopplers are offsets from, rad/s.
    pub carrier_center: f64,
    /// Replica carrier frequency ω_R, rad/s.
    pub replica_frequency: f64,
    /// Replica code delay, seconds.
    pub replica_code_delay: f64,
    /// Coherent integration time T, seconds.
    pub integration_time: f64,
    /// Complex sample rate, samples/s.
    pub sample_rate: f64,
}

impl SynthesisConfig {
    pub fn new(
        carrier_center: f64,
        replica_frequency: f64,
        replica_code_delay: f64,
        integration_time: f64,
        sample_rate: f64,
    ) -> Result<Self> {
        let cfg = Self {
            carrier_center,
            replica_frequency,
            replica_code_delay,
            integration_time,
            sample_rate,
        };
        if !(integration_time > 0.0)
            || !(sample_rate > 0.0)
            || !integration_time.is_finite()
            || !sample_rate.is_finite()
        {
            return Err(Error::InvalidInput {
                what: "synthesis config",
                why: "integration time and sample rate must be finite and > 0",
            });
        }
        if !carrier_center.is_finite()
            || !replica_frequency.is_finite()
            || !replica_code_delay.is_finite()
        {
            return Err(Error::InvalidInput {
                what: "synthesis config",
                why: "frequencies and replica delay must be finite",
            });
        }
        if cfg.n_samples() < MIN_SAMPLES_PER_INTEGRATION {
            return Err(Error::InvalidInput {
                what: "synthesis config",
                why: "sample_rate * integration_time must be at least 100 samples",
            });
        }
        Ok(cfg)
    }

    /// Samples per coherent integration.
    pub fn n_samples(&self) -> usize {
        (self.sample_rate * self.integration_time).round() as usize
    }
}

impl Default for SynthesisConfig {
    /// Baseband GPS-like defaults: 1 ms integration at 4.092 Msps.
    fn default() -> Self {
        Self {
            carrier_center: 0.0,
            replica_frequency: 0.0,
            replica_code_delay: 0.0,
            integration_time: DEFAULT_COHERENT_TIME,
            sample_rate: DEFAULT_SAMPLE_RATE,
        }
    }
}

/// Synthesizes pre-correlation baseband samples for an interval starting at
/// `t_start`: s(t) = Σ_l A_l·exp(j((ω + ω_d,l)·t + φ_l))·c(t − τ_l), sampled
/// at the midpoints of `cfg.n_samples()` uniform cells.
pub fn synthesize_precorrelation(
    rays: &[Ray],
    code: &CodeSequence,
    cfg: &SynthesisConfig,
    t_start: f64,
) -> Result<Vec<Complex64>> {
    if rays.is_empty() {
        return Err(Error::InvalidInput {
            what: "rays",
            why: "at least one ray is required",
        });
    }
    let n = cfg.n_samples();
    let dt = 1.0 / cfg.sample_rate;
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for ray in rays {
        let omega = cfg.carrier_center + ray.doppler;
        for (k, sample) in out.iter_mut().enumerate() {
            let t = t_start + (k as f64 + 0.5) * dt;
            let chip = code.chip_at(t - ray.code_delay);
            let phase = omega * t + ray.phase;
            *sample += Complex64::from_polar(ray.amplitude * chip, phase);
        }
    }
    Ok(out)
}

/// Correlates received samples against the replica and averages:
/// S = (1/T)·Σ_k s(t_k)·conj(replica(t_k))·dt, with the replica
/// exp(j·ω_R·t)·c(t − τ) evaluated on the same midpoint grid starting at
/// `t_start`.
pub fn correlate_integrate(
    received: &[Complex64],
    cfg: &SynthesisConfig,
    code: &CodeSequence,
    t_start: f64,
) -> Result<Complex64> {
    let n = cfg.n_samples();
    if received.len() != n {
        return Err(Error::InvalidInput {
            what: "received samples",
            why: "length must equal sample_rate * integration_time",
        });
    }
    let dt = 1.0 / cfg.sample_rate;
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, &s) in received.iter().enumerate() {
        let t = t_start + (k as f64 + 0.5) * dt;
        let chip = code.chip_at(t - cfg.replica_code_delay);
        let replica = Complex64::from_polar(chip, cfg.replica_frequency * t);
        acc += s * replica.conj();
    }
    Ok(acc / n as f64)
}

/// Evaluates the post-correlation model at time `t`:
/// S(t) = Σ_l B_l·exp(j(δω_l·t + φ_l)).
pub fn synthesize_postcorrelation(rays: &[PostRay], t: f64) -> Complex64 {
    rays.iter()
        .map(|r| Complex64::from_polar(r.amplitude, r.freq_error * t + r.phase))
        .sum()
}

/// Collapses a set of post-correlation rays that share one frequency error
/// into a single (amplitude, phase) phasor, the zero-relative-motion case.
///
/// Fails with [`Error::NotCollapsible`] when the frequency errors spread by
/// more than 1e-12 rad/s. A fully cancelled set returns amplitude 0 with
/// phase 0.
pub fn zero_speed_collapse(rays: &[PostRay]) -> Result<(f64, f64)> {
    if rays.is_empty() {
        return Err(Error::InvalidInput {
            what: "rays",
            why: "at least one ray is required",
        });
    }
    let min = rays.iter().map(|r| r.freq_error).fold(f64::INFINITY, f64::min);
    let max = rays
        .iter()
        .map(|r| r.freq_error)
        .fold(f64::NEG_INFINITY, f64::max);
    let spread = max - min;
    if spread > COLLAPSE_FREQ_TOL {
        return Err(Error::NotCollapsible { spread });
    }
    let sum: Complex64 = rays
        .iter()
        .map(|r| Complex64::from_polar(r.amplitude, r.phase))
        .sum();
    let amplitude = sum.norm();
    let phase = if amplitude == 0.0 { 0.0 } else { sum.arg() };
    Ok((amplitude, phase))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn default_code(seed: u64) -> CodeSequence {
        generate_code(seed, DEFAULT_CODE_CHIPS, 1.0 / DEFAULT_CHIP_RATE).unwrap()
    }

    /// Constant +1 "code": turns synthesis into pure tones.
    fn tone_code() -> CodeSequence {
        CodeSequence::new(vec![1], 1.0 / DEFAULT_CHIP_RATE).unwrap()
    }

    #[test]
    fn code_generation_is_deterministic() {
        let a = default_code(42);
        let b = default_code(42);
        let c = default_code(43);
        assert_eq!(a.chips, b.chips);
        assert_ne!(a.chips, c.chips);
        assert!(a.chips.iter().all(|&x| x == 1 || x == -1));
    }

    #[test]
    fn autocorr_peak_is_unity() {
        let code = default_code(1);
        assert_eq!(code_autocorr(&code, 0.0), 1.0);
        assert_eq!(code_autocorr(&code, code.period()), 1.0);
    }

    #[test]
    fn autocorr_matches_discrete_cyclic_sum_at_whole_chips() {
        let code = default_code(2);
        let n = code.chips.len();
        for k in [1usize, 2, 7, 511, 1022] {
            let direct: i64 = (0..n)
                .map(|i| (code.chips[i] * code.chips[(i + n - k) % n]) as i64)
                .sum();
            let expected = direct as f64 / n as f64;
            let got = code_autocorr(&code, k as f64 * code.chip_period);
            assert!((got - expected).abs() < 1e-12, "lag {k}: {got} vs {expected}");
        }
    }

    #[test]
    fn autocorr_off_peak_is_small() {
        let code = default_code(3);
        let bound = 2.0 / (code.chips.len() as f64).sqrt();
        assert!(code_autocorr(&code, code.chip_period).abs() < bound);
        let half = code_autocorr(&code, 0.5 * code.chip_period);
        assert!((half - 0.5).abs() < bound, "half-chip value {half}");
    }

    #[test]
    fn autocorr_is_periodic_and_handles_negative_lags() {
        let code = default_code(4);
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..20 {
            let lag = rng.gen_range(-2.0..2.0) * code.period();
            let a = code_autocorr(&code, lag);
            let b = code_autocorr(&code, lag + code.period());
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_tone_has_unit_magnitude() {
        let code = tone_code();
        let cfg = SynthesisConfig::default();
        let ray = Ray::new(1.0, 250.0, 0.3, 0.0).unwrap();
        let samples = synthesize_precorrelation(&[ray], &code, &cfg, 0.0).unwrap();
        assert_eq!(samples.len(), 4092);
        for s in samples {
            assert!((s.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn synthesis_is_linear_in_amplitude() {
        let code = default_code(6);
        let cfg = SynthesisConfig::default();
        let ray = Ray::new(0.7, 100.0, -0.4, 2.5e-7).unwrap();
        let doubled = Ray::new(1.4, 100.0, -0.4, 2.5e-7).unwrap();
        let twice = synthesize_precorrelation(&[ray, ray], &code, &cfg, 0.0).unwrap();
        let direct = synthesize_precorrelation(&[doubled], &code, &cfg, 0.0).unwrap();
        for (a, b) in twice.iter().zip(&direct) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn opposed_phases_cancel() {
        let code = default_code(7);
        let cfg = SynthesisConfig::default();
        let up = Ray::new(1.0, 50.0, 0.0, 0.0).unwrap();
        let down = Ray::new(1.0, 50.0, -PI, 0.0).unwrap();
        let samples = synthesize_precorrelation(&[up, down], &code, &cfg, 0.0).unwrap();
        for s in samples {
            assert!(s.norm() < 1e-12);
        }
    }

    #[test]
    fn correlating_a_matched_replica_gives_unity() {
        let code = default_code(8);
        let cfg = SynthesisConfig {
            carrier_center: 2.0 * PI * 1000.0,
            replica_frequency: 2.0 * PI * 1000.0,
            ..SynthesisConfig::default()
        };
        let ray = Ray::new(1.0, 0.0, 0.0, 0.0).unwrap();
        let samples = synthesize_precorrelation(&[ray], &code, &cfg, 0.0).unwrap();
        let s = correlate_integrate(&samples, &cfg, &code, 0.0).unwrap();
        assert!((s.re - 1.0).abs() < 1e-9, "re {}", s.re);
        assert!(s.im.abs() < 1e-9, "im {}", s.im);
    }

    #[test]
    fn misaligned_code_correlates_to_noise_floor() {
        let code = default_code(9);
        let cfg = SynthesisConfig::default();
        let delay = 1.5 * code.chip_period;
        let ray = Ray::new(1.0, 0.0, 0.0, delay).unwrap();
        let samples = synthesize_precorrelation(&[ray], &code, &cfg, 0.0).unwrap();
        let s = correlate_integrate(&samples, &cfg, &code, 0.0).unwrap();
        assert!(s.norm() < 0.05, "correlation {}", s.norm());
        assert!(code_autocorr(&code, delay).abs() < 0.05);
    }

    #[test]
    fn two_ray_passthrough_matches_postcorrelation_model() {
        // Code transitions on sample boundaries: delays are integer samples.
        let code = default_code(10);
        let dt = 1.0 / DEFAULT_SAMPLE_RATE;
        let t_sec = DEFAULT_COHERENT_TIME;
        let cfg = SynthesisConfig {
            replica_frequency: 2.0 * PI * 500.0,
            replica_code_delay: 8.0 * dt,
            ..SynthesisConfig::default()
        };
        let rays = [
            Ray::new(1.2, 2.0 * PI * 500.0 + 4.0, 0.7, 8.0 * dt).unwrap(),
            Ray::new(0.5, 2.0 * PI * 500.0 - 7.0, -1.1, 11.0 * dt).unwrap(),
        ];
        let samples = synthesize_precorrelation(&rays, &code, &cfg, 0.0).unwrap();
        let s = correlate_integrate(&samples, &cfg, &code, 0.0).unwrap();
        let post: Vec<PostRay> = rays
            .iter()
            .map(|r| {
                let gain = code_autocorr(&code, r.code_delay - cfg.replica_code_delay);
                PostRay::new(
                    r.amplitude * gain,
                    r.doppler + cfg.carrier_center - cfg.replica_frequency,
                    r.phase,
                )
                .unwrap()
            })
            .collect();
        let expected = synthesize_postcorrelation(&post, 0.5 * t_sec);
        let mag_err = (s.norm() - expected.norm()).abs() / expected.norm();
        let phase_err = (s * expected.conj()).arg().abs();
        assert!(mag_err < 0.01, "magnitude error {mag_err}");
        assert!(phase_err < 0.01, "phase error {phase_err}");
    }

    #[test]
    fn off_grid_delay_error_shrinks_with_sample_rate() {
        // Delays off the sample grid straddle chip edges; the Riemann-sum
        // error is real but falls as the grid refines.
        let code = default_code(11);
        let delay = 0.37 * code.chip_period;
        let mut errors = Vec::new();
        for factor in [1.0, 4.0] {
            let cfg = SynthesisConfig {
                sample_rate: DEFAULT_SAMPLE_RATE * factor,
                ..SynthesisConfig::default()
            };
            let ray = Ray::new(1.0, 3.0, 0.2, delay).unwrap();
            let samples = synthesize_precorrelation(&[ray], &code, &cfg, 0.0).unwrap();
            let s = correlate_integrate(&samples, &cfg, &code, 0.0).unwrap();
            let expected = code_autocorr(&code, delay);
            errors.push((s.norm() - expected).abs());
        }
        assert!(
            errors[1] < errors[0],
            "expected refinement to help: {errors:?}"
        );
    }

    #[test]
    fn postcorrelation_examples() {
        let single = [PostRay::new(1.0, 0.0, 0.0).unwrap()];
        let s = synthesize_postcorrelation(&single, 12.3);
        assert_eq!(s, Complex64::new(1.0, 0.0));

        let pair = [
            PostRay::new(1.0, 0.0, 0.0).unwrap(),
            PostRay::new(1.0, 0.0, PI / 2.0).unwrap(),
        ];
        let s = synthesize_postcorrelation(&pair, 0.0);
        assert!((s.norm() - 2.0_f64.sqrt()).abs() < 1e-12);
        assert!((s.arg() - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn collapse_reconstructs_the_summed_phasor() {
        let mut rng = StdRng::seed_from_u64(20);
        for _ in 0..50 {
            let freq = rng.gen_range(-100.0..100.0);
            let rays: Vec<PostRay> = (0..rng.gen_range(2..6))
                .map(|_| {
                    PostRay::new(
                        rng.gen_range(0.0..2.0),
                        freq,
                        rng.gen_range(-PI..PI),
                    )
                    .unwrap()
                })
                .collect();
            let (amp, phase) = zero_speed_collapse(&rays).unwrap();
            let direct: Complex64 = rays
                .iter()
                .map(|r| Complex64::from_polar(r.amplitude, r.phase))
                .sum();
            assert!((amp - direct.norm()).abs() < 1e-12);
            if amp > 1e-9 {
                let diff = normalize_phase(phase - direct.arg());
                assert!(diff.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn collapse_rejects_spread_frequencies() {
        let rays = [
            PostRay::new(1.0, 0.0, 0.0).unwrap(),
            PostRay::new(1.0, 1e-6, 0.0).unwrap(),
        ];
        match zero_speed_collapse(&rays) {
            Err(Error::NotCollapsible { spread }) => assert!((spread - 1e-6).abs() < 1e-18),
            other => panic!("expected NotCollapsible, got {other:?}"),
        }
    }

    #[test]
    fn phase_normalization_wraps_into_half_open_interval() {
        assert_eq!(normalize_phase(PI), -PI);
        assert!((normalize_phase(3.0 * PI) + PI).abs() < 1e-12);
        assert!((normalize_phase(-PI) + PI).abs() < 1e-15);
        let ray = Ray::new(1.0, 0.0, 5.0 * PI, 0.0).unwrap();
        assert!(ray.phase >= -PI && ray.phase < PI);
    }

    #[test]
    fn constructors_reject_bad_values() {
        assert!(Ray::new(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(Ray::new(-1.0, 0.0, 0.0, 0.0).is_err());
        assert!(PostRay::new(-0.1, 0.0, 0.0).is_err());
        assert!(CodeSequence::new(vec![], 1e-6).is_err());
        assert!(CodeSequence::new(vec![1, 0], 1e-6).is_err());
        assert!(CodeSequence::new(vec![1, -1], 0.0).is_err());
        assert!(SynthesisConfig::new(0.0, 0.0, 0.0, 1e-3, 50_000.0).is_err());
        assert!(SynthesisConfig::new(0.0, 0.0, 0.0, 0.0, 1e6).is_err());
    }

    #[test]
    fn correlate_rejects_length_mismatch() {
        let code = tone_code();
        let cfg = SynthesisConfig::default();
        let samples = vec![Complex64::new(1.0, 0.0); 10];
        assert!(correlate_integrate(&samples, &cfg, &code, 0.0).is_err());
    }
}
