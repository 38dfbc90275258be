//! Reference FLL closed loop and the idealised spike-chain filter response.
//!
//! The loop follows the classic chain: correlate over one coherent interval,
//! difference successive correlator outputs through the arctangent
//! discriminator, average over a short noncoherent window, low-pass filter,
//! and steer the replica NCO with the filtered Doppler estimate. The filter
//! is a single-pole low-pass advanced with its exact exponential step, so
//! the discrete loop inherits the continuous filter's time constant without
//! discretization drift.
//!
//! In the balanced-amplitude limit the discriminator's beat-period excursions
//! become an impulse train of area ±π per beat period. [`spike_chain_response`]
//! feeds exactly that train to the filter, and [`perturbation_bounds`] states
//! the resulting steady-state envelope in closed form.

use crate::signal::{
    correlate_integrate, synthesize_precorrelation, CodeSequence, Ray, SynthesisConfig,
    DEFAULT_COHERENT_TIME, DEFAULT_SAMPLE_RATE,
};
use crate::{Complex64, Error, Result};
use std::f64::consts::PI;

/// Consecutive pinned-discriminator epochs tolerated before declaring loss of
/// lock.
const LOCK_PIN_LIMIT: usize = 10;
/// |δΦ| at or above this counts as pinned at the ±π wrap.
const LOCK_PIN_THRESHOLD: f64 = PI - 1e-9;

/// Closed-loop timing, filtering, and initialisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopConfig {
    /// Discriminator interval and epoch spacing Δt, seconds.
    pub delta_t: f64,
    /// Coherent integration time per epoch, seconds (≤ delta_t).
    pub coherent_time: f64,
    /// One-sided loop filter bandwidth, Hz.
    pub filter_bandwidth: f64,
    /// Noncoherent averaging window, epochs.
    pub navg_window: usize,
    /// Doppler estimate the replica starts at, rad/s.
    pub initial_doppler: f64,
    /// Nominal carrier frequency ω, rad/s.
    pub carrier_center: f64,
    /// Complex sample rate for sample-level runs, samples/s.
    pub sample_rate: f64,
}

impl LoopConfig {
    pub fn new(
        delta_t: f64,
        coherent_time: f64,
        filter_bandwidth: f64,
        navg_window: usize,
        initial_doppler: f64,
        carrier_center: f64,
        sample_rate: f64,
    ) -> Result<Self> {
        if !(delta_t > 0.0) || !delta_t.is_finite() {
            return Err(Error::InvalidInput {
                what: "delta_t",
                why: "must be finite and > 0",
            });
        }
        if !(coherent_time > 0.0) || coherent_time > delta_t {
            return Err(Error::InvalidInput {
                what: "coherent_time",
                why: "must be in (0, delta_t]",
            });
        }
        if !(filter_bandwidth > 0.0) || !filter_bandwidth.is_finite() {
            return Err(Error::InvalidInput {
                what: "filter_bandwidth",
                why: "must be finite and > 0",
            });
        }
        if navg_window == 0 {
            return Err(Error::InvalidInput {
                what: "navg_window",
                why: "must be at least 1",
            });
        }
        if !initial_doppler.is_finite() || !carrier_center.is_finite() {
            return Err(Error::InvalidInput {
                what: "loop frequencies",
                why: "initial doppler and carrier center must be finite",
            });
        }
        if !(sample_rate > 0.0) || (sample_rate * coherent_time).round() < 100.0 {
            return Err(Error::InvalidInput {
                what: "sample_rate",
                why: "must give at least 100 samples per coherent integration",
            });
        }
        Ok(Self {
            delta_t,
            coherent_time,
            filter_bandwidth,
            navg_window,
            initial_doppler,
            carrier_center,
            sample_rate,
        })
    }

    /// Filter time constant τ = 1/(2π·bandwidth), seconds.
    pub fn filter_time_constant(&self) -> f64 {
        1.0 / (2.0 * PI * self.filter_bandwidth)
    }
}

impl Default for LoopConfig {
    /// 1 ms epochs, 1 Hz bandwidth, no noncoherent averaging, baseband
    /// carrier, 4.092 Msps.
    fn default() -> Self {
        Self {
            delta_t: DEFAULT_COHERENT_TIME,
            coherent_time: DEFAULT_COHERENT_TIME,
            filter_bandwidth: 1.0,
            navg_window: 1,
            initial_doppler: 0.0,
            carrier_center: 0.0,
            sample_rate: DEFAULT_SAMPLE_RATE,
        }
    }
}

/// Everything the loop carries from one epoch to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopState {
    /// Replica NCO phase accumulated up to the current epoch start, rad.
    pub accumulated_phase: f64,
    /// Loop filter state: the filtered Doppler estimate, rad/s.
    pub filter_memory: f64,
    /// Ring of recent raw Doppler measurements for noncoherent averaging.
    pub navg_buffer: Vec<f64>,
    /// Replica frequency in effect for the current epoch, rad/s.
    pub current_replica_freq: f64,
    navg_cursor: usize,
}

impl LoopState {
    fn new(cfg: &LoopConfig) -> Self {
        Self {
            accumulated_phase: 0.0,
            filter_memory: cfg.initial_doppler,
            navg_buffer: Vec::with_capacity(cfg.navg_window),
            current_replica_freq: cfg.carrier_center + cfg.initial_doppler,
            navg_cursor: 0,
        }
    }

    fn push_measurement(&mut self, value: f64, window: usize) {
        if self.navg_buffer.len() < window {
            self.navg_buffer.push(value);
        } else {
            self.navg_buffer[self.navg_cursor] = value;
            self.navg_cursor = (self.navg_cursor + 1) % window;
        }
    }

    fn averaged_measurement(&self) -> f64 {
        self.navg_buffer.iter().sum::<f64>() / self.navg_buffer.len() as f64
    }
}

/// Per-epoch Doppler estimates from a loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopTrace {
    /// Epoch completion times, seconds.
    pub times: Vec<f64>,
    /// Filtered Doppler estimates, rad/s.
    pub doppler: Vec<f64>,
}

impl LoopTrace {
    /// Mean Doppler estimate over `from ≤ t < to`, or `None` when the window
    /// holds no epochs.
    pub fn time_average(&self, from: f64, to: f64) -> Option<f64> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (&t, &d) in self.times.iter().zip(&self.doppler) {
            if t >= from && t < to {
                sum += d;
                count += 1;
            }
        }
        (count > 0).then(|| sum / count as f64)
    }

    /// The final Doppler estimate.
    pub fn last(&self) -> Option<f64> {
        self.doppler.last().copied()
    }
}

/// One exact step of the first-order low-pass filter:
/// out = input + (state − input)·exp(−dt/τ).
pub fn loop_filter_step(state: f64, input: f64, dt: f64, tau: f64) -> f64 {
    input + (state - input) * (-dt / tau).exp()
}

/// Drives the loop over `duration` with a caller-supplied correlator stage.
/// `measure(epoch, t_start, state)` returns the complex correlator output for
/// the epoch, phased against the continuous NCO.
fn run_loop<F>(cfg: &LoopConfig, duration: f64, mut measure: F) -> Result<LoopTrace>
where
    F: FnMut(usize, f64, &LoopState) -> Result<Complex64>,
{
    let n_epochs = (duration / cfg.delta_t).round() as usize;
    if n_epochs < 2 {
        return Err(Error::InvalidInput {
            what: "duration",
            why: "must span at least two epochs",
        });
    }
    let tau = cfg.filter_time_constant();
    let mut state = LoopState::new(cfg);
    let mut trace = LoopTrace {
        times: Vec::with_capacity(n_epochs - 1),
        doppler: Vec::with_capacity(n_epochs - 1),
    };
    let mut prev_output: Option<Complex64> = None;
    let mut prev_replica = state.current_replica_freq;
    let mut pinned = 0usize;
    for epoch in 0..n_epochs {
        let t_start = epoch as f64 * cfg.delta_t;
        let output = measure(epoch, t_start, &state)?;
        if let Some(prev) = prev_output {
            let product = output * prev.conj();
            if product.re == 0.0 && product.im == 0.0 {
                return Err(Error::IndeterminatePhase);
            }
            let dphi = product.arg();
            if dphi.abs() >= LOCK_PIN_THRESHOLD {
                pinned += 1;
                if pinned > LOCK_PIN_LIMIT {
                    return Err(Error::LossOfLock {
                        epoch,
                        limit: LOCK_PIN_LIMIT,
                    });
                }
            } else {
                pinned = 0;
            }
            // The discriminator measures the signal against the mean of the
            // two replica frequencies it spans; adding that mean back gives
            // an unbiased absolute-frequency measurement even while the NCO
            // is slewing.
            let raw = 0.5 * (state.current_replica_freq + prev_replica) - cfg.carrier_center
                + dphi / cfg.delta_t;
            state.push_measurement(raw, cfg.navg_window);
            state.filter_memory = loop_filter_step(
                state.filter_memory,
                state.averaged_measurement(),
                cfg.delta_t,
                tau,
            );
            trace.times.push(t_start + cfg.coherent_time);
            trace.doppler.push(state.filter_memory);
        }
        state.accumulated_phase += state.current_replica_freq * cfg.delta_t;
        prev_replica = state.current_replica_freq;
        state.current_replica_freq = cfg.carrier_center + state.filter_memory;
        prev_output = Some(output);
    }
    Ok(trace)
}

/// Runs the closed loop against sample-level synthesis: every epoch
/// synthesizes pre-correlation samples for the rays and reduces them through
/// [`correlate_integrate`] with the replica the NCO currently commands.
///
/// The replica code delay is held at zero, so rays should carry delays
/// relative to a code-locked replica.
pub fn run_closed_loop(
    rays: &[Ray],
    code: &CodeSequence,
    cfg: &LoopConfig,
    duration: f64,
) -> Result<LoopTrace> {
    run_loop(cfg, duration, |_, t_start, state| {
        let synth = SynthesisConfig {
            carrier_center: cfg.carrier_center,
            replica_frequency: state.current_replica_freq,
            replica_code_delay: 0.0,
            integration_time: cfg.coherent_time,
            sample_rate: cfg.sample_rate,
        };
        let samples = synthesize_precorrelation(rays, code, &synth, t_start)?;
        let raw = correlate_integrate(&samples, &synth, code, t_start)?;
        // correlate_integrate references the replica phase to ω_R·t; rotate
        // into the NCO's accumulated phase so epochs stay phase-continuous.
        let rotation = state.accumulated_phase - state.current_replica_freq * t_start;
        Ok(raw * Complex64::from_polar(1.0, -rotation))
    })
}

/// Runs the closed loop directly on the post-correlation model, skipping
/// sample synthesis: each epoch evaluates the rays' summed phasor at the
/// interval midpoint against the continuous replica NCO. Code correlation
/// losses are not modelled (ray amplitudes are used as-is), which matches
/// code-locked scenes; use it for sweeps once sample-level agreement has
/// been established.
pub fn run_closed_loop_postcorr(rays: &[Ray], cfg: &LoopConfig, duration: f64) -> Result<LoopTrace> {
    if rays.is_empty() {
        return Err(Error::InvalidInput {
            what: "rays",
            why: "at least one ray is required",
        });
    }
    run_loop(cfg, duration, |_, t_start, state| {
        let t_mid = t_start + 0.5 * cfg.coherent_time;
        let replica_phase =
            state.accumulated_phase + state.current_replica_freq * (t_mid - t_start);
        let mut sum = Complex64::new(0.0, 0.0);
        for ray in rays {
            let phase = (cfg.carrier_center + ray.doppler) * t_mid + ray.phase - replica_phase;
            sum += Complex64::from_polar(ray.amplitude, phase);
        }
        Ok(sum)
    })
}

/// The balanced-amplitude limit of the discriminator output: an impulse of
/// area π (signed) once per beat period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeChainSpec {
    /// Interval between impulses, seconds.
    pub beat_period: f64,
    /// Impulse area, rad. Always exactly π.
    pub spike_magnitude: f64,
    /// Impulse polarity, +1.0 or −1.0.
    pub spike_sign: f64,
    /// Loop filter time constant τ, seconds.
    pub filter_time_constant: f64,
}

impl SpikeChainSpec {
    pub fn new(beat_period: f64, spike_sign: f64, filter_time_constant: f64) -> Result<Self> {
        if !(beat_period > 0.0) || !beat_period.is_finite() {
            return Err(Error::InvalidInput {
                what: "beat_period",
                why: "must be finite and > 0",
            });
        }
        if spike_sign != 1.0 && spike_sign != -1.0 {
            return Err(Error::InvalidInput {
                what: "spike_sign",
                why: "must be +1 or -1",
            });
        }
        if !(filter_time_constant > 0.0) || !filter_time_constant.is_finite() {
            return Err(Error::InvalidInput {
                what: "filter_time_constant",
                why: "must be finite and > 0",
            });
        }
        Ok(Self {
            beat_period,
            spike_magnitude: PI,
            spike_sign,
            filter_time_constant,
        })
    }
}

/// First-order filter response to the impulse train, sampled every `dt`:
/// each impulse lifts the output by ±π/τ instantaneously and the output
/// decays exponentially in between. Impulses land on the nearest sample.
///
/// Requires `dt ≤ τ/100` and `duration ≥ 10` beat periods so the trace
/// resolves the sawtooth and reaches steady state.
pub fn spike_chain_response(spec: &SpikeChainSpec, duration: f64, dt: f64) -> Result<LoopTrace> {
    if !(dt > 0.0) || dt > spec.filter_time_constant / 100.0 {
        return Err(Error::InvalidInput {
            what: "dt",
            why: "must be in (0, tau/100]",
        });
    }
    if duration < 10.0 * spec.beat_period {
        return Err(Error::InvalidInput {
            what: "duration",
            why: "must cover at least 10 beat periods",
        });
    }
    let n = (duration / dt).round() as usize;
    let decay = (-dt / spec.filter_time_constant).exp();
    let jump = spec.spike_sign * spec.spike_magnitude / spec.filter_time_constant;
    let mut trace = LoopTrace {
        times: Vec::with_capacity(n),
        doppler: Vec::with_capacity(n),
    };
    let mut y = 0.0;
    let mut next_spike = 0u64;
    for k in 0..n {
        let t = k as f64 * dt;
        if k > 0 {
            y *= decay;
        }
        while next_spike as f64 * spec.beat_period <= t + 0.5 * dt {
            y += jump;
            next_spike += 1;
        }
        trace.times.push(t);
        trace.doppler.push(y);
    }
    Ok(trace)
}

/// Steady-state envelope of the spike-chain response, referenced to its
/// period-averaged level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationBounds {
    /// Trough below the period mean, rad/s (≤ 0).
    pub min_rad_s: f64,
    /// Peak above the period mean, rad/s (≥ 0).
    pub max_rad_s: f64,
    /// Trough as line-of-sight speed, m/s.
    pub min_mps: f64,
    /// Peak as line-of-sight speed, m/s.
    pub max_mps: f64,
    /// Trough over the ray-pair speed separation λ·ω_beat/(2π).
    pub min_normalized: f64,
    /// Peak over the ray-pair speed separation.
    pub max_normalized: f64,
}

/// Closed-form steady-state bounds of the spike-chain response.
///
/// With x = T_beat/τ, the post-spike peak sits (π/τ)·(1/(1 − e^(−x)) − 1/x)
/// above the period mean and the pre-spike trough exactly π/τ below the
/// peak, so the peak-to-trough width is λ·π/(2π·τ) in speed units no matter
/// the beat period. Speeds are normalized by λ·ω_beat/(2π), the speed
/// separation of the two rays.
pub fn perturbation_bounds(t_beat: f64, tau: f64, wavelength: f64) -> Result<PerturbationBounds> {
    if !(t_beat > 0.0) || !t_beat.is_finite() {
        return Err(Error::InvalidInput {
            what: "t_beat",
            why: "must be finite and > 0",
        });
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidInput {
            what: "tau",
            why: "must be finite and > 0",
        });
    }
    if !(wavelength > 0.0) || !wavelength.is_finite() {
        return Err(Error::InvalidInput {
            what: "wavelength",
            why: "must be finite and > 0",
        });
    }
    let x = t_beat / tau;
    let one_minus_exp = -(-x).exp_m1();
    let max_rad_s = (PI / tau) * (1.0 / one_minus_exp - 1.0 / x);
    let min_rad_s = max_rad_s - PI / tau;
    let to_mps = wavelength / (2.0 * PI);
    let to_norm = t_beat / (2.0 * PI);
    Ok(PerturbationBounds {
        min_rad_s,
        max_rad_s,
        min_mps: min_rad_s * to_mps,
        max_mps: max_rad_s * to_mps,
        min_normalized: min_rad_s * to_norm,
        max_normalized: max_rad_s * to_norm,
    })
}
