//! Power fields over x-z grids and along trajectories.

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use crate::channel::{channel_at, received_power, Beamformer};
use crate::error::{invalid, Error, Result};
use crate::geometry::{ArrayGeometry, Obstacle, Point2, SamplePoints, Trajectory};

/// Floor of the rendered dynamic range, dB below the map maximum.
pub const DB_FLOOR: f64 = -80.0;

/// Uniform grid with `nx` columns along x and `nz` rows along z, both ends inclusive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub z_min: f64,
    pub z_max: f64,
    pub nz: usize,
}

impl GridSpec {
    /// 400 x 400 cells over `x in [-0.05, max x + 0.05]`, `z in (0, 1.1 z_max]`.
    pub fn default_for(traj: &Trajectory) -> Self {
        let (z_lo, z_hi) = traj.z_range();
        let x_top = (0..=256)
            .map(|i| traj.eval(z_lo + (z_hi - z_lo) * i as f64 / 256.0))
            .fold(f64::NEG_INFINITY, f64::max)
            .max(0.0);
        let nz = 400;
        let z_top = 1.1 * z_hi;
        Self { x_min: -0.05, x_max: x_top + 0.05, nx: 400, z_min: z_top / nz as f64, z_max: z_top, nz }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.nz == 0 {
            return Err(invalid("grid", "axes must be nonempty"));
        }
        let finite = [self.x_min, self.x_max, self.z_min, self.z_max].iter().all(|v| v.is_finite());
        if !finite || self.x_max < self.x_min || self.z_max < self.z_min {
            return Err(invalid("grid", "axis bounds must be finite and ordered"));
        }
        if (self.nx > 1 && self.x_max == self.x_min) || (self.nz > 1 && self.z_max == self.z_min) {
            return Err(invalid("grid", "multi-point axis needs a nonzero span"));
        }
        if !(self.z_min > 0.0) {
            return Err(invalid("grid.z_min", "grid must lie in front of the array (z > 0)"));
        }
        Ok(())
    }

    pub fn x_axis(&self) -> Vec<f64> {
        axis(self.x_min, self.x_max, self.nx)
    }

    pub fn z_axis(&self) -> Vec<f64> {
        axis(self.z_min, self.z_max, self.nz)
    }
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return alloc::vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i + 1 == n { hi } else { lo + step * i as f64 }).collect()
}

/// Linear power, row-major with rows along z and columns along x.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldGrid {
    pub x_axis: Vec<f64>,
    pub z_axis: Vec<f64>,
    pub power: Vec<f64>,
}

impl FieldGrid {
    /// Assembles a grid from row blocks computed separately (e.g. in parallel).
    pub fn from_rows(spec: &GridSpec, rows: Vec<f64>) -> Result<Self> {
        if rows.len() != spec.nx * spec.nz {
            return Err(Error::DimensionMismatch { expected: spec.nx * spec.nz, found: rows.len() });
        }
        Ok(Self { x_axis: spec.x_axis(), z_axis: spec.z_axis(), power: rows })
    }

    pub fn nx(&self) -> usize {
        self.x_axis.len()
    }

    pub fn nz(&self) -> usize {
        self.z_axis.len()
    }

    pub fn at(&self, iz: usize, ix: usize) -> f64 {
        self.power[iz * self.nx() + ix]
    }

    pub fn row(&self, iz: usize) -> &[f64] {
        &self.power[iz * self.nx()..(iz + 1) * self.nx()]
    }

    pub fn max_power(&self) -> f64 {
        self.power.iter().cloned().fold(0.0, f64::max)
    }

    /// Power in dB relative to the map maximum, clamped at `floor_db`.
    pub fn to_db(&self, floor_db: f64) -> Vec<f64> {
        let peak = self.max_power();
        self.power.iter().map(|&p| relative_db(p, peak, floor_db)).collect()
    }

    /// Column index of the strongest cell in every row (first on ties).
    pub fn ridge(&self) -> Vec<usize> {
        (0..self.nz())
            .map(|iz| {
                let row = self.row(iz);
                let mut best = 0;
                for (j, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }

    /// Fraction of rows (restricted to `z_window`) whose maximum lies within
    /// `cells` columns of the trajectory.
    pub fn ridge_tracking_fraction(&self, traj: &Trajectory, z_window: (f64, f64), cells: usize) -> f64 {
        let dx = if self.nx() > 1 { self.x_axis[1] - self.x_axis[0] } else { f64::INFINITY };
        let ridge = self.ridge();
        let mut total = 0usize;
        let mut hits = 0usize;
        for (iz, &z) in self.z_axis.iter().enumerate() {
            if z < z_window.0 || z > z_window.1 {
                continue;
            }
            total += 1;
            let x_peak = self.x_axis[ridge[iz]];
            if (x_peak - traj.eval(z)).abs() <= cells as f64 * dx * (1.0 + 1e-9) {
                hits += 1;
            }
        }
        if total == 0 {
            0.0
        } else {
            hits as f64 / total as f64
        }
    }
}

pub fn relative_db(p: f64, peak: f64, floor_db: f64) -> f64 {
    if peak <= 0.0 || p <= 0.0 {
        return floor_db;
    }
    (10.0 * libm::log10(p / peak)).max(floor_db)
}

/// Power over rows `rows` of the grid, row-major.
pub fn evaluate_rows(
    w: &Beamformer,
    geom: &ArrayGeometry,
    spec: &GridSpec,
    obstacles: &[Obstacle],
    rows: Range<usize>,
) -> Result<Vec<f64>> {
    spec.validate()?;
    if w.len() != geom.num_antennas() {
        return Err(Error::DimensionMismatch { expected: geom.num_antennas(), found: w.len() });
    }
    let xs = spec.x_axis();
    let zs = spec.z_axis();
    let mut out = Vec::with_capacity(rows.len() * xs.len());
    for iz in rows {
        for &x in &xs {
            let h = channel_at(geom, Point2::new(x, zs[iz]), obstacles)?;
            out.push(received_power(w, &h));
        }
    }
    Ok(out)
}

pub fn evaluate_grid(
    w: &Beamformer,
    geom: &ArrayGeometry,
    spec: &GridSpec,
    obstacles: &[Obstacle],
) -> Result<FieldGrid> {
    let power = evaluate_rows(w, geom, spec, obstacles, 0..spec.nz)?;
    FieldGrid::from_rows(spec, power)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryProfile {
    pub label: String,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub power: Vec<f64>,
}

pub fn profile_along_trajectory(
    w: &Beamformer,
    geom: &ArrayGeometry,
    samples: &SamplePoints,
    obstacles: &[Obstacle],
    label: &str,
) -> Result<TrajectoryProfile> {
    if w.len() != geom.num_antennas() {
        return Err(Error::DimensionMismatch { expected: geom.num_antennas(), found: w.len() });
    }
    let mut power = Vec::with_capacity(samples.len());
    for &p in samples.points() {
        power.push(received_power(w, &channel_at(geom, p, obstacles)?));
    }
    Ok(TrajectoryProfile {
        label: label.into(),
        x: samples.points().iter().map(|p| p.x).collect(),
        z: samples.points().iter().map(|p| p.z).collect(),
        power,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonMetrics {
    pub label: String,
    pub p_min: f64,
    /// Power at the last sample, where the user sits.
    pub p_user: f64,
    pub p_max: f64,
    /// `10 log10(p_max / p_min)`; infinite when `p_min` is zero.
    pub ripple_db: f64,
}

impl ComparisonMetrics {
    pub fn from_profile(profile: &TrajectoryProfile) -> Result<Self> {
        if profile.power.is_empty() {
            return Err(invalid("profile", "empty trajectory profile"));
        }
        let p_min = profile.power.iter().cloned().fold(f64::INFINITY, f64::min);
        let p_max = profile.power.iter().cloned().fold(0.0, f64::max);
        let p_user = *profile.power.last().unwrap_or(&0.0);
        let ripple_db = if p_max == p_min {
            0.0
        } else if p_min > 0.0 {
            10.0 * libm::log10(p_max / p_min)
        } else {
            f64::INFINITY
        };
        Ok(Self { label: profile.label.clone(), p_min, p_user, p_max, ripple_db })
    }
}

/// Metrics for each profile, in input order. All profiles must share sample points.
pub fn compare_schemes(profiles: &[TrajectoryProfile]) -> Result<Vec<ComparisonMetrics>> {
    if let Some(first) = profiles.first() {
        for p in &profiles[1..] {
            if p.z != first.z || p.x != first.x || p.power.len() != first.power.len() {
                return Err(Error::MismatchedSampling);
            }
        }
    }
    profiles.iter().map(ComparisonMetrics::from_profile).collect()
}
