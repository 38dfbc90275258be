//! Adaptive quadrature shared by the beat analysis.
//!
//! Composite Simpson built from trapezoid refinement: each doubling of the
//! interval count only evaluates the new midpoints, and the Simpson value is
//! recovered from two successive trapezoid sums. Refinement stops when two
//! successive Simpson estimates agree within the requested tolerance.

use crate::{Error, Result};

/// First Simpson estimate uses this many subintervals.
pub const QUAD_START_INTERVALS: u64 = 1 << 10;
/// Refinement stops with an error once the interval count would exceed this.
pub const QUAD_MAX_INTERVALS: u64 = 1 << 22;
/// Default agreement required between successive estimates.
pub const QUAD_TOL: f64 = 1e-12;

/// A converged quadrature estimate and how hard it was to get.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    /// The integral estimate.
    pub value: f64,
    /// Difference between the last two successive estimates.
    pub residual: f64,
    /// Number of grid points behind the final estimate.
    pub points: u64,
}

/// Integrates `f` over `[a, b]`, doubling the grid until two successive
/// composite-Simpson estimates differ by less than `tol`.
pub fn simpson_converge(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<Quadrature> {
    debug_assert!(b > a);
    let mut n = QUAD_START_INTERVALS / 2;
    let mut h = (b - a) / n as f64;
    let mut trap = {
        let interior: f64 = (1..n).map(|k| f(a + k as f64 * h)).sum();
        h * (0.5 * (f(a) + f(b)) + interior)
    };
    let mut prev_simpson = None;
    loop {
        let mids: f64 = (0..n).map(|k| f(a + (k as f64 + 0.5) * h)).sum();
        let trap_fine = 0.5 * trap + 0.5 * h * mids;
        let simpson = (4.0 * trap_fine - trap) / 3.0;
        n *= 2;
        h *= 0.5;
        if let Some(prev) = prev_simpson {
            let residual = f64::abs(simpson - prev);
            if residual < tol {
                return Ok(Quadrature {
                    value: simpson,
                    residual,
                    points: n + 1,
                });
            }
            if n >= QUAD_MAX_INTERVALS {
                return Err(Error::QuadratureDidNotConverge {
                    residual,
                    points: n + 1,
                });
            }
        }
        prev_simpson = Some(simpson);
        trap = trap_fine;
    }
}
