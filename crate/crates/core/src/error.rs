//! Error type shared by all modules.

use thiserror::Error;

/// Everything that can go wrong across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A constructor or operation was handed a value outside its domain.
    #[error("invalid {what}: {why}")]
    InvalidInput {
        what: &'static str,
        why: &'static str,
    },

    /// A raypath index referred past the end of the scene's path list.
    #[error("raypath index {index} out of range for {len} paths")]
    RaypathIndex { index: usize, len: usize },

    /// The line-of-sight path is too close to perpendicular to the velocity
    /// (or the receiver is not moving), so ratios against its projection are
    /// undefined.
    #[error("line-of-sight projection |cos| = {cos_los:e} is below 1e-9; ratio undefined")]
    DegenerateLosGeometry { cos_los: f64 },

    /// Both correlator outputs fed to the discriminator were zero, so the
    /// phase change over the interval is indeterminate.
    #[error("correlator output is zero; discriminator phase is indeterminate")]
    IndeterminatePhase,

    /// The two-ray closed form was evaluated exactly at a singular instant
    /// (equal amplitudes with the composite phasor passing through zero).
    #[error("two-ray discriminator evaluated at a singular instant (both atan2 arguments zero)")]
    SingularPoint,

    /// The amplitude ratio is too close to 1 for the step integral to be
    /// evaluated; classify the step directly instead.
    #[error("amplitude ratio {beta} is within 1e-6 of unity; step integral is singular there")]
    NearUnityRatio { beta: f64 },

    /// Point-doubling quadrature hit its interval cap before two successive
    /// estimates agreed.
    #[error("quadrature did not converge: residual {residual:e} after {points} points")]
    QuadratureDidNotConverge { residual: f64, points: u64 },

    /// The two rays share one frequency, so there is no beat period to
    /// analyse.
    #[error("rays share the same frequency; beat period is infinite")]
    ZeroBeat,

    /// At amplitude ratio exactly 1 the deviation waveform degenerates into a
    /// chain of delta functions and has no pointwise value.
    #[error("amplitude ratio is 1: deviation waveform is a delta-function chain; use the 1±ε limits")]
    DeltaFunctionWaveform,

    /// Ray frequency errors differ, so the set does not collapse to a single
    /// equivalent ray.
    #[error("frequency errors spread over {spread:e} rad/s; rays do not collapse to one phasor")]
    NotCollapsible { spread: f64 },

    /// The discriminator stayed pinned at ±π long enough that the loop can no
    /// longer be considered locked.
    #[error("loss of lock at epoch {epoch}: discriminator pinned at ±π for more than {limit} epochs")]
    LossOfLock { epoch: usize, limit: usize },
}
