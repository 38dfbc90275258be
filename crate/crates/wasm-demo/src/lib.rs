//! Browser bindings for the interactive two-ray multipath demo.
//!
//! Each export returns a flattened array of (x, y) pairs ready for canvas
//! plotting. Inputs are clamped into safe ranges instead of erroring, so a
//! slider can never take the page down.

use std::f64::consts::{FRAC_PI_2, PI};

use fll_multipath::beat::{classify_step, f_integral};
use fll_multipath::discriminator::{composite_phase_term, TwoRayParams};
use fll_multipath::geometry::GPS_L1_WAVELENGTH;
use fll_multipath::tracking::{spike_chain_response, SpikeChainSpec};
use wasm_bindgen::prelude::*;

fn clamp(x: f64, lo: f64, hi: f64) -> f64 {
    if x.is_nan() {
        lo
    } else {
        x.clamp(lo, hi)
    }
}

/// Beat-averaged step value against amplitude ratio, as (log10 beta, f)
/// pairs over ratios in [1e-3, 1e3].
#[wasm_bindgen]
pub fn step_function_curve(delta_gamma: f64, points: usize) -> Vec<f64> {
    let gamma = clamp(delta_gamma, 1e-6, FRAC_PI_2 - 1e-6);
    let n = points.clamp(16, 512);
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let log_beta = -3.0 + 6.0 * i as f64 / (n - 1) as f64;
        let beta = 10f64.powf(log_beta);
        let f = f_integral(beta, gamma)
            .map(|q| q.value)
            .unwrap_or_else(|_| classify_step(beta).value());
        out.push(log_beta);
        out.push(f);
    }
    out
}

/// One beat period of the normalized Doppler observable, as
/// (t / T_beat, observable / average frequency) pairs.
#[wasm_bindgen]
pub fn doppler_waveform(beta: f64, beat_ratio: f64, points: usize) -> Vec<f64> {
    let mut beta = clamp(beta, 0.0, 100.0);
    if (beta - 1.0).abs() < 2e-9 {
        beta = 1.0 + 2e-9;
    }
    let ratio = clamp(beat_ratio, 1e-3, 0.5);
    let n = points.clamp(64, 8192);

    let omega_av = 2.0 * PI * 100.0;
    let delta_t = 1e-3;
    let omega_beat = ratio * omega_av;
    let t_beat = 2.0 * PI / omega_beat;
    let params = TwoRayParams::new(
        1.0,
        beta,
        omega_av + 0.5 * omega_beat,
        omega_av - 0.5 * omega_beat,
        0.0,
        0.0,
        omega_av,
        delta_t,
    )
    .expect("clamped parameters are always valid");

    let mut out = Vec::with_capacity(2 * (n + 1));
    let mut last = 1.0;
    for k in 0..=n {
        let x = k as f64 / n as f64;
        if let Ok(dev) = composite_phase_term(&params, x * t_beat) {
            last = 1.0 + dev / (delta_t * omega_av);
        }
        out.push(x);
        out.push(last);
    }
    out
}

/// Loop filter response to the balanced-ratio impulse train, as
/// (t seconds, perturbation m/s) pairs at 128 samples per beat period.
#[wasm_bindgen]
pub fn spike_response_curve(beat_period: f64, tau: f64, periods: usize) -> Vec<f64> {
    let t_b = clamp(beat_period, 0.02, 2.0);
    let tau = clamp(tau, 0.02, 2.0);
    let periods = periods.clamp(10, 40);

    let mut per_period = 128usize;
    while t_b / per_period as f64 > tau / 100.0 {
        per_period *= 2;
    }
    let dt = t_b / per_period as f64;
    let spec = SpikeChainSpec::new(t_b, 1.0, tau).expect("clamped parameters are always valid");
    let trace = spike_chain_response(&spec, periods as f64 * t_b, dt)
        .expect("clamped parameters are always valid");

    let stride = per_period / 128;
    let to_mps = GPS_L1_WAVELENGTH / (2.0 * PI);
    let mut out = Vec::new();
    for i in (0..trace.times.len()).step_by(stride) {
        out.push(trace.times[i]);
        out.push(trace.doppler[i] * to_mps);
    }
    out
}
