//! Receiver kinematics mapped to per-path Doppler shifts.
//!
//! Each arriving ray is described by the unit vector pointing from the
//! receiver toward the source of that ray (for a reflection, toward the
//! reflector). The carrier Doppler contributed by receiver motion is the
//! negative projection of the velocity on that direction, scaled by the
//! carrier wavenumber.

use crate::{Error, Result};

/// GPS L1 carrier wavelength in meters.
pub const GPS_L1_WAVELENGTH: f64 = 0.190_293_672;

/// Projections smaller than this count as perpendicular geometry.
const MIN_COS_LOS: f64 = 1e-9;

/// Receiver motion plus the set of directions signal energy arrives from.
///
/// `raypath_units[0]` is the line-of-sight path; any further entries are
/// reflections. Directions are stored unit-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicScene {
    /// Receiver velocity in m/s.
    pub receiver_velocity: [f64; 3],
    /// Unit vectors from the receiver toward each path's apparent source.
    pub raypath_units: Vec<[f64; 3]>,
    /// Carrier wavelength in meters.
    pub wavelength: f64,
    /// Doppler contributed by transmitter motion, rad/s (shared by all paths).
    pub transmitter_doppler: f64,
}

impl KinematicScene {
    /// Builds a scene, normalizing every raypath direction.
    pub fn new(
        receiver_velocity: [f64; 3],
        raypaths: Vec<[f64; 3]>,
        wavelength: f64,
        transmitter_doppler: f64,
    ) -> Result<Self> {
        if !(wavelength > 0.0) || !wavelength.is_finite() {
            return Err(Error::InvalidInput {
                what: "wavelength",
                why: "must be finite and > 0",
            });
        }
        if raypaths.is_empty() {
            return Err(Error::InvalidInput {
                what: "raypaths",
                why: "at least the line-of-sight path is required",
            });
        }
        let mut units = Vec::with_capacity(raypaths.len());
        for u in raypaths {
            let n = norm(u);
            if !(n > 0.0) || !n.is_finite() {
                return Err(Error::InvalidInput {
                    what: "raypath direction",
                    why: "must have nonzero finite norm",
                });
            }
            units.push([u[0] / n, u[1] / n, u[2] / n]);
        }
        Ok(Self {
            receiver_velocity,
            raypath_units: units,
            wavelength,
            transmitter_doppler,
        })
    }

    /// Builds a planar scene from arrival angles measured against the
    /// velocity direction: the receiver moves along +x at `speed` and path
    /// `i` arrives from `angles_rad[i]` in the x-y plane.
    ///
    /// Angles are a convenience entry point; the unit-vector form is
    /// canonical and this constructor delegates to it.
    pub fn from_angles(
        speed: f64,
        angles_rad: &[f64],
        wavelength: f64,
        transmitter_doppler: f64,
    ) -> Result<Self> {
        if !(speed >= 0.0) || !speed.is_finite() {
            return Err(Error::InvalidInput {
                what: "speed",
                why: "must be finite and >= 0",
            });
        }
        let raypaths = angles_rad
            .iter()
            .map(|&a| [a.cos(), a.sin(), 0.0])
            .collect();
        Self::new([speed, 0.0, 0.0], raypaths, wavelength, transmitter_doppler)
    }

    /// Receiver speed in m/s.
    pub fn speed(&self) -> f64 {
        norm(self.receiver_velocity)
    }

    fn path(&self, index: usize) -> Result<[f64; 3]> {
        self.raypath_units
            .get(index)
            .copied()
            .ok_or(Error::RaypathIndex {
                index,
                len: self.raypath_units.len(),
            })
    }

    /// cos of the angle between the velocity and path `index`, i.e. v̂·û.
    /// Zero for a stationary receiver.
    fn cos_theta(&self, index: usize) -> Result<f64> {
        let u = self.path(index)?;
        let s = self.speed();
        if s == 0.0 {
            return Ok(0.0);
        }
        Ok(dot(self.receiver_velocity, u) / s)
    }
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Doppler shift contributed by receiver motion along path `index`:
/// −(2π/λ)·(v·û), rad/s. Motion toward the source lowers the phase rate,
/// hence the sign.
pub fn doppler_from_velocity(scene: &KinematicScene, index: usize) -> Result<f64> {
    let u = scene.path(index)?;
    Ok(-(2.0 * std::f64::consts::PI / scene.wavelength) * dot(scene.receiver_velocity, u))
}

/// Total carrier Doppler on path `index`: receiver motion plus the shared
/// transmitter contribution.
pub fn combined_doppler(scene: &KinematicScene, index: usize) -> Result<f64> {
    Ok(doppler_from_velocity(scene, index)? + scene.transmitter_doppler)
}

/// Ratio of the reflected path's velocity projection to the line-of-sight
/// projection, cos(θ_nlos)/cos(θ_los).
///
/// This is the factor by which a loop that locks onto the reflection scales
/// the apparent along-track speed. Fails when the line-of-sight projection is
/// within 1e-9 of zero (perpendicular geometry or a stationary receiver).
pub fn nlos_ratio(scene: &KinematicScene, nlos_index: usize) -> Result<f64> {
    let cos_nlos = scene.cos_theta(nlos_index)?;
    let cos_los = scene.cos_theta(0)?;
    if cos_los.abs() < MIN_COS_LOS {
        return Err(Error::DegenerateLosGeometry { cos_los });
    }
    Ok(cos_nlos / cos_los)
}

/// Beat frequency between two paths from the kinematics alone:
/// (2π·speed/λ)·|cos θ_a − cos θ_b|, rad/s. Zero for a stationary receiver.
pub fn beat_frequency_kinematic(scene: &KinematicScene, a: usize, b: usize) -> Result<f64> {
    let ca = scene.cos_theta(a)?;
    let cb = scene.cos_theta(b)?;
    Ok(2.0 * std::f64::consts::PI * scene.speed() / scene.wavelength * (ca - cb).abs())
}

/// Along-path speed implied by a Doppler magnitude: λ·|ω|/(2π), m/s.
pub fn projected_speed_from_doppler(doppler: f64, wavelength: f64) -> f64 {
    wavelength * doppler.abs() / (2.0 * std::f64::consts::PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn l1_scene(speed: f64, angles: &[f64]) -> KinematicScene {
        KinematicScene::from_angles(speed, angles, GPS_L1_WAVELENGTH, 0.0).unwrap()
    }

    #[test]
    fn head_on_doppler_at_l1() {
        // 10 m/s straight at the source: ω = −2π·10/λ.
        let scene = l1_scene(10.0, &[0.0]);
        let w = doppler_from_velocity(&scene, 0).unwrap();
        assert!((w - (-2.0 * PI * 10.0 / GPS_L1_WAVELENGTH)).abs() < 1e-9);
        assert!((w + 330.1836).abs() < 5e-4, "got {w}");
    }

    #[test]
    fn doppler_is_linear_in_speed() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..50 {
            let angle = rng.gen_range(-PI..PI);
            let s1: f64 = rng.gen_range(0.1..50.0);
            let k: f64 = rng.gen_range(0.1..10.0);
            let w1 = doppler_from_velocity(&l1_scene(s1, &[angle]), 0).unwrap();
            let w2 = doppler_from_velocity(&l1_scene(k * s1, &[angle]), 0).unwrap();
            assert!((w2 - k * w1).abs() < 1e-9 * w1.abs().max(1.0));
        }
    }

    #[test]
    fn angle_entry_point_matches_unit_vectors() {
        let mut rng = StdRng::seed_from_u64(12);
        for _ in 0..50 {
            let angle = rng.gen_range(-PI..PI);
            let speed = rng.gen_range(0.1..30.0);
            let by_angle = l1_scene(speed, &[angle]);
            let by_unit = KinematicScene::new(
                [speed, 0.0, 0.0],
                vec![[angle.cos(), angle.sin(), 0.0]],
                GPS_L1_WAVELENGTH,
                0.0,
            )
            .unwrap();
            let wa = doppler_from_velocity(&by_angle, 0).unwrap();
            let wu = doppler_from_velocity(&by_unit, 0).unwrap();
            assert!((wa - wu).abs() < 1e-12 * wa.abs().max(1.0));
        }
    }

    #[test]
    fn directions_are_normalized_on_construction() {
        let scene = KinematicScene::new(
            [5.0, 0.0, 0.0],
            vec![[10.0, 0.0, 0.0]],
            GPS_L1_WAVELENGTH,
            0.0,
        )
        .unwrap();
        assert!((scene.raypath_units[0][0] - 1.0).abs() < 1e-15);
        let w = doppler_from_velocity(&scene, 0).unwrap();
        assert!((w + 2.0 * PI * 5.0 / GPS_L1_WAVELENGTH).abs() < 1e-9);
    }

    #[test]
    fn transmitter_doppler_adds_to_all_paths() {
        let scene =
            KinematicScene::from_angles(10.0, &[0.2, 1.1], GPS_L1_WAVELENGTH, 37.5).unwrap();
        for i in 0..2 {
            let total = combined_doppler(&scene, i).unwrap();
            let rx_only = doppler_from_velocity(&scene, i).unwrap();
            assert!((total - rx_only - 37.5).abs() < 1e-12);
        }
    }

    #[test]
    fn nlos_ratio_matches_doppler_ratio() {
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..50 {
            let th0 = rng.gen_range(-1.2..1.2);
            let th1 = rng.gen_range(-PI..PI);
            let scene = l1_scene(rng.gen_range(0.5..20.0), &[th0, th1]);
            let ratio = nlos_ratio(&scene, 1).unwrap();
            let w0 = doppler_from_velocity(&scene, 0).unwrap();
            let w1 = doppler_from_velocity(&scene, 1).unwrap();
            assert!((ratio - w1 / w0).abs() < 1e-9 * ratio.abs().max(1.0));
        }
    }

    #[test]
    fn perpendicular_los_is_degenerate() {
        // Build the perpendicular direction explicitly so cos θ_LOS is exactly 0.
        let scene = KinematicScene::new(
            [10.0, 0.0, 0.0],
            vec![[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]],
            GPS_L1_WAVELENGTH,
            0.0,
        )
        .unwrap();
        match nlos_ratio(&scene, 1) {
            Err(Error::DegenerateLosGeometry { .. }) => {}
            other => panic!("expected degenerate geometry, got {other:?}"),
        }
    }

    #[test]
    fn beat_frequency_matches_doppler_difference() {
        let mut rng = StdRng::seed_from_u64(14);
        for _ in 0..50 {
            let scene = l1_scene(
                rng.gen_range(0.5..20.0),
                &[rng.gen_range(-PI..PI), rng.gen_range(-PI..PI)],
            );
            let beat = beat_frequency_kinematic(&scene, 0, 1).unwrap();
            let w0 = doppler_from_velocity(&scene, 0).unwrap();
            let w1 = doppler_from_velocity(&scene, 1).unwrap();
            assert!((beat - (w0 - w1).abs()).abs() < 1e-9 * beat.max(1.0));
        }
    }

    #[test]
    fn stationary_receiver_has_no_beat() {
        let scene = KinematicScene::new(
            [0.0, 0.0, 0.0],
            vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            GPS_L1_WAVELENGTH,
            0.0,
        )
        .unwrap();
        assert_eq!(beat_frequency_kinematic(&scene, 0, 1).unwrap(), 0.0);
        assert_eq!(doppler_from_velocity(&scene, 1).unwrap(), 0.0);
    }

    #[test]
    fn projected_speed_of_filter_jump() {
        // A 2π² rad/s Doppler step at L1 reads as 0.5978 m/s of line-of-sight speed.
        let jump = 2.0 * PI * PI;
        let v = projected_speed_from_doppler(jump, GPS_L1_WAVELENGTH);
        assert!((v - 0.5978).abs() < 5e-5, "got {v}");
        assert_eq!(v, projected_speed_from_doppler(-jump, GPS_L1_WAVELENGTH));
    }

    #[test]
    fn path_index_out_of_range_errors() {
        let scene = l1_scene(1.0, &[0.0]);
        match doppler_from_velocity(&scene, 3) {
            Err(Error::RaypathIndex { index: 3, len: 1 }) => {}
            other => panic!("expected index error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(KinematicScene::from_angles(1.0, &[0.0], 0.0, 0.0).is_err());
        assert!(KinematicScene::from_angles(1.0, &[0.0], -1.0, 0.0).is_err());
        assert!(KinematicScene::from_angles(1.0, &[], 0.19, 0.0).is_err());
        assert!(
            KinematicScene::new([1.0, 0.0, 0.0], vec![[0.0, 0.0, 0.0]], 0.19, 0.0).is_err()
        );
    }
}
