#![allow(dead_code)]

use bendbeam_core::geometry::{ArrayGeometry, Obstacle, Trajectory};
use bendbeam_core::pipeline::Scenario;

pub const CARRIER_HZ: f64 = 300e9;
/// Trajectory length over Rayleigh distance in the full-scale setup (15 m / 80 m).
pub const DEPTH_FRACTION: f64 = 15.0 / 80.0;
pub const FULL_SCALE_Z_MAX: f64 = 15.0;
pub const FULL_SCALE_BETAS: [f64; 3] = [0.0005, 0.0008, 0.001];

/// Desk-scale analogue of the full-scale setup: the trajectory spans the same
/// fraction of the Rayleigh distance and `beta` is rescaled so the end slope
/// `2 beta z_max` matches.
#[derive(Clone, Copy, Debug)]
pub struct Desk {
    pub n: usize,
    pub z_min: f64,
    pub z_max: f64,
    pub beta: f64,
}

pub fn desk(n: usize, full_beta: f64) -> Desk {
    let geom = ArrayGeometry::from_frequency(n, CARRIER_HZ, None).unwrap();
    let z_max = DEPTH_FRACTION * geom.rayleigh_distance_nominal();
    Desk { n, z_min: z_max / 10.0, z_max, beta: full_beta * FULL_SCALE_Z_MAX / z_max }
}

impl Desk {
    pub fn geometry(&self) -> ArrayGeometry {
        ArrayGeometry::from_frequency(self.n, CARRIER_HZ, None).unwrap()
    }

    pub fn trajectory(&self) -> Trajectory {
        Trajectory::parabola(self.beta, self.z_min, self.z_max).unwrap()
    }

    pub fn scenario(&self, m: usize, obstacles: Vec<Obstacle>) -> Scenario {
        Scenario::new(self.geometry(), self.trajectory(), m, obstacles).unwrap()
    }
}

/// Alternative desk `beta` keeping `x(z_max) / L` at its full-scale value
/// (225 beta / 0.2 m) rather than the end slope.
pub fn shape_matched_beta(d: &Desk, full_beta: f64) -> f64 {
    let l = d.geometry().aperture_nominal();
    full_beta * 225.0 / 0.2 * l / (d.z_max * d.z_max)
}

pub fn db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Prints the one-line verdict and fails the test on a hard failure.
pub fn verdict(id: &str, pass: bool, detail: &str) {
    println!("criterion {id}: {} | {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} failed: {detail}");
}
