//! Beat-period structure of the two-ray discriminator output.
//!
//! Two rays at different frequencies beat against each other with period
//! T_beat = 2π/|ω₀ − ω₁|. Averaged over that period, the oscillatory part of
//! the discriminator contributes Δγ·f(β, Δγ), where f collapses to a step
//! function of the amplitude ratio β alone: +1 when the direct ray dominates
//! (β < 1), −1 when the reflection dominates (β > 1), 0 at equal amplitudes.
//! The FLL therefore reports the *stronger* ray's Doppler, not a weighted
//! average, and the remaining zero-mean deviation waveform carries exactly
//! ±π radians of area per beat period concentrated in one sharp excursion.
//!
//! [`f_integral`] evaluates f by quadrature; [`classify_step`] states the
//! step value directly. Keeping both routes independent lets each check the
//! other.

use crate::discriminator::{composite_phase_term, intermediate_params, TwoRayParams};
use crate::numerics::{simpson_converge, Quadrature, QUAD_TOL};
use crate::{Error, Result};
use std::f64::consts::{FRAC_PI_2, PI};

/// Amplitude ratios this close to 1 count as exactly balanced.
const BETA_STEP_TOL: f64 = 1e-12;
/// The step integral refuses ratios this close to its singularity.
const BETA_SINGULAR_GUARD: f64 = 1e-6;
/// Tolerance on the area under one beat period of the deviation waveform.
const AREA_TOL: f64 = 1e-9;

/// Beat timing between two frequencies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeatSpec {
    /// Beat frequency |ω₀ − ω₁|, rad/s.
    pub omega_beat: f64,
    /// Beat period 2π/ω_beat, seconds; infinite when the beat vanishes.
    pub t_beat: f64,
    /// Average frequency (ω₀ + ω₁)/2, rad/s.
    pub omega_avg: f64,
}

impl BeatSpec {
    /// True when the two frequencies coincide and no beat exists.
    pub fn is_zero_beat(&self) -> bool {
        self.omega_beat == 0.0
    }
}

/// Computes the beat structure of a frequency pair.
pub fn beat_spec(omega0: f64, omega1: f64) -> BeatSpec {
    let omega_beat = (omega0 - omega1).abs();
    let t_beat = if omega_beat == 0.0 {
        f64::INFINITY
    } else {
        2.0 * PI / omega_beat
    };
    BeatSpec {
        omega_beat,
        t_beat,
        omega_avg: 0.5 * (omega0 + omega1),
    }
}

/// The step function's three values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepValue {
    /// β > 1: the reflection dominates.
    MinusOne,
    /// β = 1: balanced amplitudes.
    Zero,
    /// β < 1: the direct ray dominates.
    PlusOne,
}

impl StepValue {
    /// The numeric step value.
    pub fn value(self) -> f64 {
        match self {
            StepValue::MinusOne => -1.0,
            StepValue::Zero => 0.0,
            StepValue::PlusOne => 1.0,
        }
    }
}

/// States the step value of the amplitude ratio directly: −1 above unity,
/// +1 below, 0 within 1e-12 of it. `beta` must be ≥ 0 (infinity allowed).
pub fn classify_step(beta: f64) -> StepValue {
    debug_assert!(beta >= 0.0);
    if (beta - 1.0).abs() <= BETA_STEP_TOL {
        StepValue::Zero
    } else if beta > 1.0 {
        StepValue::MinusOne
    } else {
        StepValue::PlusOne
    }
}

/// Evaluates the period-average factor
///
/// f(β, Δγ) = (1/(2π·Δγ))·∫₀^{2π} atan2((1−β²)·sin Δγ, (1+β²)·cos Δγ + 2β·cos δ) dδ
///
/// by point-doubling Simpson quadrature. Per the step theorem the converged
/// value is ±1 (or would be 0 at β = 1, where the integrand is singular and
/// the evaluation is refused). β = 0 and β = ∞ make the integrand constant,
/// so those return exactly ±1 with `points = 0`.
///
/// Requires Δγ ∈ (0, π/2] and |β − 1| ≥ 1e-6.
pub fn f_integral(beta: f64, delta_gamma: f64) -> Result<Quadrature> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidInput {
            what: "beta",
            why: "must be >= 0",
        });
    }
    if !(delta_gamma > 0.0 && delta_gamma <= FRAC_PI_2) {
        return Err(Error::InvalidInput {
            what: "delta_gamma",
            why: "must lie in (0, pi/2]",
        });
    }
    if beta == 0.0 {
        return Ok(Quadrature {
            value: 1.0,
            residual: 0.0,
            points: 0,
        });
    }
    if beta.is_infinite() {
        return Ok(Quadrature {
            value: -1.0,
            residual: 0.0,
            points: 0,
        });
    }
    if (beta - 1.0).abs() < BETA_SINGULAR_GUARD {
        return Err(Error::NearUnityRatio { beta });
    }
    // Work with the ratio folded below 1 so huge β cannot overflow β² and the
    // β ↔ 1/β antisymmetry is exact: dividing both atan2 arguments by β²
    // flips the numerator's sign and leaves the denominator's value.
    let (b, sign) = if beta > 1.0 { (1.0 / beta, -1.0) } else { (beta, 1.0) };
    let num = (1.0 - b * b) * delta_gamma.sin();
    let den_c = (1.0 + b * b) * delta_gamma.cos();
    let two_b = 2.0 * b;
    let scale = 2.0 * PI * delta_gamma;
    let q = simpson_converge(
        |d| num.atan2(den_c + two_b * d.cos()),
        0.0,
        2.0 * PI,
        QUAD_TOL * scale,
    )?;
    Ok(Quadrature {
        value: sign * q.value / scale,
        residual: q.residual / scale,
        points: q.points,
    })
}

/// Period-averaged Doppler estimate of a two-ray FLL: the dominant ray's
/// Doppler, or the midpoint at exactly balanced amplitudes.
pub fn period_avg_doppler(omega_d0: f64, omega_d1: f64, beta: f64) -> f64 {
    match classify_step(beta) {
        StepValue::PlusOne => omega_d0,
        StepValue::MinusOne => omega_d1,
        StepValue::Zero => 0.5 * (omega_d0 + omega_d1),
    }
}

fn beat_domain(p: &TwoRayParams) -> Result<(f64, f64)> {
    let im = intermediate_params(p);
    if im.freq_diff == 0.0 {
        return Err(Error::ZeroBeat);
    }
    if im.delta_gamma.abs() > FRAC_PI_2 {
        return Err(Error::InvalidInput {
            what: "delta_gamma",
            why: "differential advance per interval must not exceed pi/2",
        });
    }
    Ok((im.delta_gamma, 2.0 * PI / im.freq_diff.abs()))
}

/// Zero-mean deviation of the discriminator from its period average at time
/// `t`:
///
/// δψ(t) = atan2((b₀² − b₁²)·sin Δγ, (b₀² + b₁²)·cos Δγ + 2·b₀·b₁·cos δ(t)) − Δγ·f
///
/// in radians, with f the step value of β. At β = 1 the waveform degenerates
/// into a chain of delta functions and has no pointwise value; evaluate the
/// 1 ± ε limits instead.
pub fn deviation_waveform(p: &TwoRayParams, t: f64) -> Result<f64> {
    let (delta_gamma, _) = beat_domain(p)?;
    let step = classify_step(p.beta());
    if step == StepValue::Zero {
        return Err(Error::DeltaFunctionWaveform);
    }
    Ok(composite_phase_term(p, t)? - delta_gamma * step.value())
}

/// Integrates the instantaneous Doppler deviation from the rays' average
/// frequency over one beat period:
///
/// ∫₀^{T_beat} (ω̃_d(t) − ω_avg) dt = (1/Δt)·∫₀^{T_beat} (δΦ(t) − Δμ) dt
///
/// in radians. The result is ±π: positive when the dominant ray's frequency
/// lies above the average, negative when below.
pub fn deviation_area(p: &TwoRayParams) -> Result<f64> {
    let (_, t_beat) = beat_domain(p)?;
    if classify_step(p.beta()) == StepValue::Zero {
        return Err(Error::DeltaFunctionWaveform);
    }
    let q = simpson_converge(
        |t| {
            composite_phase_term(p, t)
                .expect("no singular instants away from the beta = 1 ridge")
        },
        0.0,
        t_beat,
        AREA_TOL * p.delta_t,
    )?;
    Ok(q.value / p.delta_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn two_ray(b0: f64, b1: f64, w0: f64, w1: f64, phi0: f64, phi1: f64) -> TwoRayParams {
        TwoRayParams::new(b0, b1, w0, w1, phi0, phi1, 0.5 * (w0 + w1), 1e-3).unwrap()
    }

    #[test]
    fn beat_spec_worked_example() {
        let b = beat_spec(120.0, 100.0);
        assert_eq!(b.omega_beat, 20.0);
        assert!((b.t_beat - 0.31416).abs() < 1e-5);
        assert!((b.t_beat - 2.0 * PI / 20.0).abs() < 1e-12);
        assert_eq!(b.omega_avg, 110.0);
        assert!(!b.is_zero_beat());
    }

    #[test]
    fn beat_spec_is_symmetric_and_flags_zero_beat() {
        let ab = beat_spec(350.0, 410.0);
        let ba = beat_spec(410.0, 350.0);
        assert_eq!(ab, ba);
        let zero = beat_spec(100.0, 100.0);
        assert!(zero.is_zero_beat());
        assert!(zero.t_beat.is_infinite());
        assert_eq!(zero.omega_avg, 100.0);
    }

    #[test]
    fn classify_step_examples() {
        assert_eq!(classify_step(2.0), StepValue::MinusOne);
        assert_eq!(classify_step(0.5), StepValue::PlusOne);
        assert_eq!(classify_step(1.0), StepValue::Zero);
        assert_eq!(classify_step(1.0 + 9e-13), StepValue::Zero);
        assert_eq!(classify_step(1.0 - 9e-13), StepValue::Zero);
        assert_eq!(classify_step(1.0 + 1e-11), StepValue::MinusOne);
        assert_eq!(classify_step(f64::INFINITY), StepValue::MinusOne);
        assert_eq!(classify_step(0.0), StepValue::PlusOne);
    }

    #[test]
    fn f_integral_matches_the_step_on_sample_points() {
        for (beta, dg) in [
            (10.0, 0.01),
            (0.5, 1.0),
            (1e4, 1e-6),
            (1e-4, FRAC_PI_2),
            (1.001001, 0.1),
        ] {
            let q = f_integral(beta, dg).unwrap();
            let expected = classify_step(beta).value();
            assert!(
                (q.value - expected).abs() < 1e-9,
                "beta {beta} dg {dg}: f {} vs {expected}",
                q.value
            );
        }
    }

    #[test]
    fn f_integral_extremes_are_exact() {
        let zero = f_integral(0.0, 0.3).unwrap();
        assert_eq!(zero.value, 1.0);
        assert_eq!(zero.points, 0);
        let inf = f_integral(f64::INFINITY, 0.3).unwrap();
        assert_eq!(inf.value, -1.0);
    }

    #[test]
    fn f_integral_is_antisymmetric_in_log_beta() {
        for beta in [1.5, 3.0, 12.0, 250.0] {
            let plus = f_integral(beta, 0.2).unwrap().value;
            let minus = f_integral(1.0 / beta, 0.2).unwrap().value;
            assert_eq!(plus, -minus, "beta {beta}");
        }
    }

    #[test]
    fn f_integral_ignores_delta_gamma() {
        for beta in [0.3, 7.0] {
            let reference = f_integral(beta, 1e-6).unwrap().value;
            for dg in [1e-3, 0.1, 1.0, FRAC_PI_2] {
                let v = f_integral(beta, dg).unwrap().value;
                assert!(
                    (v - reference).abs() < 1e-9,
                    "beta {beta} dg {dg}: {v} vs {reference}"
                );
            }
        }
    }

    #[test]
    fn f_integral_guards_its_domain() {
        assert!(matches!(
            f_integral(1.0 + 1e-7, 0.1),
            Err(Error::NearUnityRatio { .. })
        ));
        assert!(f_integral(2.0, 0.0).is_err());
        assert!(f_integral(2.0, 1.6).is_err());
        assert!(f_integral(-0.5, 0.1).is_err());
    }

    #[test]
    fn period_average_picks_the_dominant_ray() {
        assert_eq!(period_avg_doppler(400.0, 200.0, 2.0), 200.0);
        assert_eq!(period_avg_doppler(400.0, 200.0, 0.5), 400.0);
        assert_eq!(period_avg_doppler(400.0, 200.0, 1.0), 300.0);
    }

    #[test]
    fn single_ray_has_no_deviation() {
        let p = two_ray(1.0, 0.0, 1100.0, 900.0, 0.3, 0.0);
        for k in 0..50 {
            let t = k as f64 * 1e-3;
            let d = deviation_waveform(&p, t).unwrap();
            assert!(d.abs() < 1e-12, "t {t}: {d}");
        }
    }

    #[test]
    fn deviation_waveform_has_zero_period_average() {
        for beta in [0.1, 0.8, 1.25, 10.0] {
            let p = two_ray(1.0, beta, 1100.0, 900.0, 0.4, -0.9);
            let t_beat = 2.0 * PI / 200.0;
            let q = simpson_converge(
                |t| deviation_waveform(&p, t).unwrap(),
                0.0,
                t_beat,
                1e-12,
            )
            .unwrap();
            let mean = q.value / t_beat;
            assert!(mean.abs() < 1e-9, "beta {beta}: mean {mean}");
        }
    }

    #[test]
    fn deviation_spike_sits_at_half_period_for_aligned_phases() {
        let p = two_ray(1.0, 0.9, 1100.0, 900.0, 0.0, 0.0);
        let t_beat = 2.0 * PI / 200.0;
        let mut peak_t = 0.0;
        let mut peak = 0.0;
        for k in 0..200_000 {
            let t = k as f64 / 200_000.0 * t_beat;
            let d = deviation_waveform(&p, t).unwrap().abs();
            if d > peak {
                peak = d;
                peak_t = t;
            }
        }
        let frac = peak_t / t_beat;
        assert!((0.49..=0.52).contains(&frac), "peak at {frac} of a period");
    }

    #[test]
    fn deviation_waveform_rejects_balanced_amplitudes() {
        let p = two_ray(1.0, 1.0, 1100.0, 900.0, 0.3, 0.0);
        assert!(matches!(
            deviation_waveform(&p, 0.1),
            Err(Error::DeltaFunctionWaveform)
        ));
        assert!(matches!(
            deviation_area(&p),
            Err(Error::DeltaFunctionWaveform)
        ));
    }

    #[test]
    fn deviation_needs_a_beat() {
        let p = two_ray(1.0, 0.5, 1000.0, 1000.0, 0.3, 0.0);
        assert!(matches!(deviation_waveform(&p, 0.0), Err(Error::ZeroBeat)));
        assert!(matches!(deviation_area(&p), Err(Error::ZeroBeat)));
    }

    #[test]
    fn deviation_area_signs_follow_the_dominant_ray() {
        // Dominant ray above the average frequency: +π; below: −π.
        let cases = [
            (0.5, 1100.0, 900.0, PI),
            (2.0, 1100.0, 900.0, -PI),
            (0.5, 900.0, 1100.0, -PI),
            (2.0, 900.0, 1100.0, PI),
        ];
        for (beta, w0, w1, expected) in cases {
            let p = two_ray(1.0, beta, w0, w1, 0.7, -0.4);
            let area = deviation_area(&p).unwrap();
            assert!(
                (area - expected).abs() < 1e-8,
                "beta {beta} w0 {w0}: area {area} vs {expected}"
            );
        }
    }

    #[test]
    fn deviation_area_is_phase_invariant() {
        let mut rng = StdRng::seed_from_u64(40);
        for _ in 0..20 {
            let p = two_ray(
                1.0,
                0.6,
                1050.0,
                950.0,
                rng.gen_range(-PI..PI),
                rng.gen_range(-PI..PI),
            );
            let area = deviation_area(&p).unwrap();
            assert!((area - PI).abs() < 1e-8, "area {area}");
        }
    }
}
