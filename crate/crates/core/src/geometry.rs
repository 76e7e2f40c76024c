//! Array layout, trajectories, trajectory sampling and obstacles.
//!
//! Everything lives in the x–z plane: the array sits on the x-axis with its
//! first element at the origin and the beam propagates towards +z.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::SPEED_OF_LIGHT;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub z: f64,
}

impl Point2 {
    pub const fn new(x: f64, z: f64) -> Self {
        Self { x, z }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        libm::hypot(self.x - other.x, self.z - other.z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.z.is_finite()
    }
}

/// Uniform linear array on the x-axis. Element `n` (0-based) sits at
/// `x = -n * spacing`: the first element is at the origin, where trajectories
/// are launched, and the aperture extends along -x so that a curve bending
/// towards +x has its tangent feet on the array.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrayGeometry {
    num_antennas: usize,
    spacing: f64,
    wavelength: f64,
    antenna_x: Vec<f64>,
}

impl ArrayGeometry {
    pub fn new(num_antennas: usize, spacing: f64, wavelength: f64) -> Result<Self> {
        if num_antennas == 0 {
            return Err(invalid("num_antennas", "must be at least 1"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(invalid("spacing", format!("must be positive, got {spacing}")));
        }
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(invalid("wavelength", format!("must be positive, got {wavelength}")));
        }
        let antenna_x = (0..num_antennas).map(|n| 0.0 - n as f64 * spacing).collect();
        Ok(Self { num_antennas, spacing, wavelength, antenna_x })
    }

    /// Geometry from a carrier frequency; `spacing = None` means half a wavelength.
    pub fn from_frequency(num_antennas: usize, carrier_hz: f64, spacing: Option<f64>) -> Result<Self> {
        if !(carrier_hz > 0.0 && carrier_hz.is_finite()) {
            return Err(invalid("carrier_frequency_hz", format!("must be positive, got {carrier_hz}")));
        }
        let wavelength = SPEED_OF_LIGHT / carrier_hz;
        Self::new(num_antennas, spacing.unwrap_or(wavelength / 2.0), wavelength)
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    pub fn antenna_x(&self) -> &[f64] {
        &self.antenna_x
    }

    pub fn antenna(&self, n: usize) -> Point2 {
        Point2::new(self.antenna_x[n], 0.0)
    }

    /// Extent of the element positions, `(N - 1) * spacing`.
    pub fn aperture_physical(&self) -> f64 {
        (self.num_antennas - 1) as f64 * self.spacing
    }

    /// `N * spacing`, the convention that gives the round 80 m figure for
    /// 400 half-wavelength elements at 300 GHz.
    pub fn aperture_nominal(&self) -> f64 {
        self.num_antennas as f64 * self.spacing
    }

    /// `2 L^2 / lambda` with the physical aperture.
    pub fn rayleigh_distance(&self) -> f64 {
        let l = self.aperture_physical();
        2.0 * l * l / self.wavelength
    }

    /// `2 L^2 / lambda` with the nominal aperture.
    pub fn rayleigh_distance_nominal(&self) -> f64 {
        let l = self.aperture_nominal();
        2.0 * l * l / self.wavelength
    }
}

/// Monotone piecewise-cubic interpolant (Steffen's method).
///
/// Node derivatives come from the parabola through neighbouring points,
/// limited to preserve monotonicity, so quadratic data is reproduced exactly
/// wherever the limiter is inactive.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedCurve {
    z: Vec<f64>,
    x: Vec<f64>,
    slope: Vec<f64>,
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl TabulatedCurve {
    pub fn new(z: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        if z.len() != x.len() {
            return Err(Error::InvalidTrajectory(format!("{} z values but {} x values", z.len(), x.len())));
        }
        if z.len() < 2 {
            return Err(Error::InvalidTrajectory("need at least two tabulated points".into()));
        }
        if z.iter().chain(&x).any(|v| !v.is_finite()) {
            return Err(Error::InvalidTrajectory("non-finite tabulated value".into()));
        }
        if z.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidTrajectory("z values must be strictly increasing".into()));
        }
        let n = z.len();
        let h: Vec<f64> = z.windows(2).map(|w| w[1] - w[0]).collect();
        let s: Vec<f64> = (0..n - 1).map(|i| (x[i + 1] - x[i]) / h[i]).collect();
        let mut slope = alloc::vec![0.0; n];
        if n == 2 {
            slope[0] = s[0];
            slope[1] = s[0];
        } else {
            for i in 1..n - 1 {
                let p = (s[i - 1] * h[i] + s[i] * h[i - 1]) / (h[i - 1] + h[i]);
                slope[i] = (sign(s[i - 1]) + sign(s[i])) * s[i - 1].abs().min(s[i].abs()).min(0.5 * p.abs());
            }
            let end = |s0: f64, s1: f64, h0: f64, h1: f64| {
                let p = s0 * (1.0 + h0 / (h0 + h1)) - s1 * h0 / (h0 + h1);
                if p * s0 <= 0.0 {
                    0.0
                } else if p.abs() > 2.0 * s0.abs() {
                    2.0 * s0
                } else {
                    p
                }
            };
            slope[0] = end(s[0], s[1], h[0], h[1]);
            slope[n - 1] = end(s[n - 2], s[n - 3], h[n - 2], h[n - 3]);
        }
        Ok(Self { z, x, slope })
    }

    pub fn z_bounds(&self) -> (f64, f64) {
        (self.z[0], self.z[self.z.len() - 1])
    }

    fn segment(&self, z: f64) -> usize {
        let n = self.z.len();
        match self.z.binary_search_by(|v| v.total_cmp(&z)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Value and first derivative; linear extrapolation outside the table.
    pub fn eval_with_slope(&self, z: f64) -> (f64, f64) {
        let (lo, hi) = self.z_bounds();
        let last = self.z.len() - 1;
        if z < lo {
            return (self.x[0] + self.slope[0] * (z - lo), self.slope[0]);
        }
        if z > hi {
            return (self.x[last] + self.slope[last] * (z - hi), self.slope[last]);
        }
        let i = self.segment(z);
        let h = self.z[i + 1] - self.z[i];
        let s = (self.x[i + 1] - self.x[i]) / h;
        let (d0, d1) = (self.slope[i], self.slope[i + 1]);
        let a = (d0 + d1 - 2.0 * s) / (h * h);
        let b = (3.0 * s - 2.0 * d0 - d1) / h;
        let t = z - self.z[i];
        let value = ((a * t + b) * t + d0) * t + self.x[i];
        let slope = (3.0 * a * t + 2.0 * b) * t + d0;
        (value, slope)
    }

    /// Secant slopes never decrease, i.e. the tabulated data is convex.
    pub fn is_convex(&self) -> bool {
        let s: Vec<f64> =
            self.z.windows(2).zip(self.x.windows(2)).map(|(z, x)| (x[1] - x[0]) / (z[1] - z[0])).collect();
        let scale = s.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        s.windows(2).all(|w| w[1] >= w[0] - 1e-12 * scale)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrajectoryKind {
    /// `x = beta z^2`.
    Parabola {
        beta: f64,
    },
    Tabulated(TabulatedCurve),
}

/// Desired beam path `x = f(z)` over `[z_min, z_max]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    kind: TrajectoryKind,
    z_min: f64,
    z_max: f64,
}

fn check_range(z_min: f64, z_max: f64) -> Result<()> {
    if !(z_min >= 0.0 && z_min.is_finite()) {
        return Err(invalid("z_range", format!("z_min must be >= 0, got {z_min}")));
    }
    if !(z_max > z_min && z_max.is_finite()) {
        return Err(invalid("z_range", format!("z_max must exceed z_min, got [{z_min}, {z_max}]")));
    }
    Ok(())
}

impl Trajectory {
    pub fn parabola(beta: f64, z_min: f64, z_max: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid("beta", format!("must be positive, got {beta}")));
        }
        check_range(z_min, z_max)?;
        Ok(Self { kind: TrajectoryKind::Parabola { beta }, z_min, z_max })
    }

    /// Tabulated curve; the range defaults to the table extent and must lie inside it.
    pub fn tabulated(z: Vec<f64>, x: Vec<f64>, z_range: Option<(f64, f64)>) -> Result<Self> {
        let curve = TabulatedCurve::new(z, x)?;
        let (lo, hi) = curve.z_bounds();
        let (z_min, z_max) = z_range.unwrap_or((lo, hi));
        check_range(z_min, z_max)?;
        if z_min < lo || z_max > hi {
            return Err(invalid("z_range", format!("[{z_min}, {z_max}] exceeds the table [{lo}, {hi}]")));
        }
        if !curve.is_convex() {
            log::warn!("tabulated trajectory is not convex; the tangent method may not apply");
        }
        Ok(Self { kind: TrajectoryKind::Tabulated(curve), z_min, z_max })
    }

    pub fn kind(&self) -> &TrajectoryKind {
        &self.kind
    }

    pub fn z_range(&self) -> (f64, f64) {
        (self.z_min, self.z_max)
    }

    pub fn beta(&self) -> Option<f64> {
        match self.kind {
            TrajectoryKind::Parabola { beta } => Some(beta),
            TrajectoryKind::Tabulated(_) => None,
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.eval_with_slope(z).0
    }

    pub fn derivative(&self, z: f64) -> f64 {
        self.eval_with_slope(z).1
    }

    pub fn eval_with_slope(&self, z: f64) -> (f64, f64) {
        match &self.kind {
            TrajectoryKind::Parabola { beta } => (beta * z * z, 2.0 * beta * z),
            TrajectoryKind::Tabulated(c) => c.eval_with_slope(z),
        }
    }

    pub fn is_convex(&self) -> bool {
        match &self.kind {
            TrajectoryKind::Parabola { .. } => true,
            TrajectoryKind::Tabulated(c) => c.is_convex(),
        }
    }

    /// Interval searched for tangent points. A parabola is analytic down to
    /// its vertex, so tangents may touch it anywhere in `[0, z_max]`.
    pub fn tangent_domain(&self) -> (f64, f64) {
        match &self.kind {
            TrajectoryKind::Parabola { .. } => (0.0, self.z_max),
            TrajectoryKind::Tabulated(_) => (self.z_min, self.z_max),
        }
    }

    /// Largest `|f'(z)|` on the range, found on a fine grid.
    pub fn max_abs_slope(&self) -> f64 {
        let steps = 1024;
        (0..=steps)
            .map(|i| {
                let z = self.z_min + (self.z_max - self.z_min) * i as f64 / steps as f64;
                self.derivative(z).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Points `(x_m, z_m)` on the trajectory, `z_m` strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePoints {
    points: Vec<Point2>,
}

impl SamplePoints {
    /// Wraps explicit points; `z` must be strictly increasing.
    pub fn from_points(points: Vec<Point2>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("samples", "need at least one point"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidTrajectory("non-finite sample point".into()));
        }
        if points.windows(2).any(|w| w[1].z <= w[0].z) {
            return Err(invalid("samples", "z must be strictly increasing"));
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn last(&self) -> Point2 {
        self.points[self.points.len() - 1]
    }
}

/// `count` points uniformly spaced in z over the trajectory's range, both ends included.
pub fn sample_trajectory(traj: &Trajectory, count: usize) -> Result<SamplePoints> {
    if count < 2 {
        return Err(invalid("num_samples", format!("must be at least 2, got {count}")));
    }
    let (z_min, z_max) = traj.z_range();
    let step = (z_max - z_min) / (count - 1) as f64;
    let mut points = Vec::with_capacity(count);
    for m in 0..count {
        let z = if m == count - 1 { z_max } else { z_min + step * m as f64 };
        let x = traj.eval(z);
        if !x.is_finite() {
            return Err(Error::InvalidTrajectory(format!("f({z}) is not finite")));
        }
        points.push(Point2::new(x, z));
    }
    Ok(SamplePoints { points })
}

/// Axis-aligned rectangle in the x–z plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Obstacle {
    pub x_lo: f64,
    pub x_hi: f64,
    pub z_lo: f64,
    pub z_hi: f64,
}

impl Obstacle {
    pub fn new(x: (f64, f64), z: (f64, f64)) -> Result<Self> {
        let (x_lo, x_hi) = x;
        let (z_lo, z_hi) = z;
        if !(x_lo < x_hi) || !x_lo.is_finite() || !x_hi.is_finite() {
            return Err(invalid("obstacle.x", format!("need x_lo < x_hi, got [{x_lo}, {x_hi}]")));
        }
        if !(z_lo < z_hi) || !z_lo.is_finite() || !z_hi.is_finite() {
            return Err(invalid("obstacle.z", format!("need z_lo < z_hi, got [{z_lo}, {z_hi}]")));
        }
        if !(z_lo > 0.0) {
            return Err(invalid("obstacle.z", format!("must not touch the array plane, z_lo = {z_lo}")));
        }
        Ok(Self { x_lo, x_hi, z_lo, z_hi })
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x_lo && p.x <= self.x_hi && p.z >= self.z_lo && p.z <= self.z_hi
    }
}

/// Whether the closed segment `a -> b` meets the closed rectangle (Liang–Barsky clipping).
pub fn segment_blocked(a: Point2, b: Point2, obs: &Obstacle) -> bool {
    // Canonical endpoint order makes the test exactly symmetric.
    let (a, b) = if (a.x, a.z) <= (b.x, b.z) { (a, b) } else { (b, a) };
    let dx = b.x - a.x;
    let dz = b.z - a.z;
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for (p, q) in [(-dx, a.x - obs.x_lo), (dx, obs.x_hi - a.x), (-dz, a.z - obs.z_lo), (dz, obs.z_hi - a.z)] {
        if p == 0.0 {
            if q < 0.0 {
                return false;
            }
        } else {
            let t = q / p;
            if p < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}

/// Whether any obstacle blocks the segment.
pub fn any_blocked(a: Point2, b: Point2, obstacles: &[Obstacle]) -> bool {
    obstacles.iter().any(|o| segment_blocked(a, b, o))
}
