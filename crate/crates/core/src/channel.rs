//! Spherical-wave channels, blockage nulling and received power.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::geometry::{any_blocked, ArrayGeometry, Obstacle, Point2, SamplePoints};
use crate::linalg::{abs, dot, norm2, polar, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Phase-only weights of modulus `1/sqrt(N)`.
    Abf,
    /// Free amplitude and phase, unit total power.
    Dbf,
}

impl Scheme {
    pub fn label(&self) -> &'static str {
        match self {
            Scheme::Abf => "abf",
            Scheme::Dbf => "dbf",
        }
    }
}

/// Gains from every antenna to one target point.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelVector {
    pub gains: Vec<C64>,
    pub target: Point2,
}

impl ChannelVector {
    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.gains.iter().map(|g| g.norm_sqr()).sum()
    }
}

/// One channel vector per sample point, `M x N`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelMatrix {
    rows: Vec<ChannelVector>,
    num_antennas: usize,
}

impl ChannelMatrix {
    pub fn from_rows(rows: Vec<ChannelVector>) -> Result<Self> {
        let num_antennas = rows.first().map(|r| r.len()).ok_or_else(|| invalid("channel", "no rows"))?;
        if let Some(bad) = rows.iter().find(|r| r.len() != num_antennas) {
            return Err(Error::DimensionMismatch { expected: num_antennas, found: bad.len() });
        }
        Ok(Self { rows, num_antennas })
    }

    pub fn rows(&self) -> &[ChannelVector] {
        &self.rows
    }

    pub fn num_points(&self) -> usize {
        self.rows.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }
}

/// Transmit weight vector together with the constraint set it satisfies.
#[derive(Clone, Debug, PartialEq)]
pub struct Beamformer {
    weights: Vec<C64>,
    scheme: Scheme,
}

impl Beamformer {
    /// Validates the scheme constraint (`|w_n| = 1/sqrt(N)` or `||w|| = 1`).
    pub fn new(weights: Vec<C64>, scheme: Scheme) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("weights", "empty beamformer"));
        }
        if weights.iter().any(|w| !w.re.is_finite() || !w.im.is_finite()) {
            return Err(invalid("weights", "non-finite weight"));
        }
        let n = weights.len() as f64;
        match scheme {
            Scheme::Abf => {
                let target = 1.0 / libm::sqrt(n);
                if let Some(w) = weights.iter().find(|&&w| (abs(w) - target).abs() > 1e-9 * target) {
                    return Err(invalid("weights", alloc::format!("ABF weight modulus {} != 1/sqrt(N)", abs(*w))));
                }
            }
            Scheme::Dbf => {
                let p: f64 = weights.iter().map(|w| w.norm_sqr()).sum();
                if (p - 1.0).abs() > 1e-9 {
                    return Err(invalid("weights", alloc::format!("DBF total power {p} != 1")));
                }
            }
        }
        Ok(Self { weights, scheme })
    }

    /// `w_n = exp(j phi_n) / sqrt(N)`.
    pub fn from_phases(phases: &[f64]) -> Self {
        let amp = 1.0 / libm::sqrt(phases.len() as f64);
        let weights = phases.iter().map(|&p| polar(amp, p)).collect();
        Self { weights, scheme: Scheme::Abf }
    }

    /// Any nonzero vector rescaled to unit norm.
    pub fn dbf_normalized(weights: &[C64]) -> Result<Self> {
        let nrm = norm2(weights);
        if !(nrm > 0.0 && nrm.is_finite()) {
            return Err(invalid("weights", "cannot normalize a zero vector"));
        }
        Ok(Self { weights: weights.iter().map(|w| w / nrm).collect(), scheme: Scheme::Dbf })
    }

    /// `h / ||h||`, the single-point optimum under the DBF constraint.
    pub fn matched_filter(h: &ChannelVector) -> Result<Self> {
        Self::dbf_normalized(&h.gains)
    }

    pub fn weights(&self) -> &[C64] {
        &self.weights
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Multiplies every weight by `exp(j theta)`.
    pub fn rotated(&self, theta: f64) -> Self {
        let r = polar(1.0, theta);
        Self { weights: self.weights.iter().map(|w| w * r).collect(), scheme: self.scheme }
    }
}

/// Free-space gain `lambda / (4 pi d) * exp(j 2 pi d / lambda)`.
pub fn free_space_gain(distance: f64, wavelength: f64) -> C64 {
    let cycles = distance / wavelength;
    let frac = cycles - libm::floor(cycles);
    polar(wavelength / (4.0 * PI * distance), 2.0 * PI * frac)
}

/// Channel from every antenna to `target`; blocked links are exactly zero.
pub fn channel_at(geom: &ArrayGeometry, target: Point2, obstacles: &[Obstacle]) -> Result<ChannelVector> {
    let lambda = geom.wavelength();
    let mut gains = Vec::with_capacity(geom.num_antennas());
    for n in 0..geom.num_antennas() {
        let ant = geom.antenna(n);
        let d = ant.distance(&target);
        if !(d > 0.0) {
            return Err(Error::DegenerateGeometry { antenna: n });
        }
        if !obstacles.is_empty() && any_blocked(ant, target, obstacles) {
            gains.push(C64::new(0.0, 0.0));
        } else {
            gains.push(free_space_gain(d, lambda));
        }
    }
    Ok(ChannelVector { gains, target })
}

pub fn build_channel_matrix(
    geom: &ArrayGeometry,
    samples: &SamplePoints,
    obstacles: &[Obstacle],
) -> Result<ChannelMatrix> {
    let rows = samples.points().iter().map(|&p| channel_at(geom, p, obstacles)).collect::<Result<Vec<_>>>()?;
    ChannelMatrix::from_rows(rows)
}

/// `|w^H h|^2`. Panics if the dimensions differ.
pub fn received_power(w: &Beamformer, h: &ChannelVector) -> f64 {
    assert_eq!(w.len(), h.len(), "beamformer and channel dimensions differ");
    dot(w.weights(), &h.gains).norm_sqr()
}

/// Power at every sample point.
pub fn power_profile(w: &Beamformer, h: &ChannelMatrix) -> Vec<f64> {
    h.rows().iter().map(|row| received_power(w, row)).collect()
}

/// Smallest received power over the rows and the first row attaining it.
pub fn min_trajectory_power(w: &Beamformer, h: &ChannelMatrix) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for (m, row) in h.rows().iter().enumerate() {
        let p = received_power(w, row);
        if p < best.0 {
            best = (p, m);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_trajectory, Trajectory};
    use proptest::prelude::*;

    const LAMBDA: f64 = 0.001;

    fn single() -> ArrayGeometry {
        ArrayGeometry::new(1, 0.0005, LAMBDA).unwrap()
    }

    #[test]
    fn one_wavelength_is_real() {
        let h = channel_at(&single(), Point2::new(0.0, LAMBDA), &[]).unwrap();
        let g = h.gains[0];
        assert!((g.re - 1.0 / (4.0 * PI)).abs() < 1e-15);
        assert!(g.im.abs() < 1e-15);
    }

    #[test]
    fn half_wavelength_flips_sign() {
        let h = channel_at(&single(), Point2::new(0.0, LAMBDA / 2.0), &[]).unwrap();
        let g = h.gains[0];
        assert!((g.norm() - 1.0 / (2.0 * PI)).abs() < 1e-14);
        assert!((g.re + 1.0 / (2.0 * PI)).abs() < 1e-14);
        assert!(g.im.abs() < 1e-14);
    }

    #[test]
    fn antenna_coincident_target_is_degenerate() {
        let g = ArrayGeometry::new(3, 0.0005, LAMBDA).unwrap();
        let err = channel_at(&g, Point2::new(-0.0005, 0.0), &[]).unwrap_err();
        assert_eq!(err, Error::DegenerateGeometry { antenna: 1 });
    }

    #[test]
    fn obstacle_nulls_exactly_the_blocked_links() {
        let g = ArrayGeometry::new(4, 0.0005, LAMBDA).unwrap();
        let target = Point2::new(0.0, 0.01);
        // Covers the lines of sight of the first two antennas only.
        let obs = Obstacle::new((-0.0003, 0.0002), (0.004, 0.005)).unwrap();
        let h = channel_at(&g, target, &[obs]).unwrap();
        for n in 0..4 {
            let blocked = crate::geometry::segment_blocked(g.antenna(n), target, &obs);
            assert_eq!(h.gains[n] == C64::new(0.0, 0.0), blocked, "antenna {n}");
        }
        assert_eq!(h.gains[0], C64::new(0.0, 0.0));
        assert_eq!(h.gains[1], C64::new(0.0, 0.0));
        assert!(h.gains[2].norm() > 0.0 && h.gains[3].norm() > 0.0);
    }

    #[test]
    fn matrix_rows_match_channel_at() {
        let g = ArrayGeometry::new(5, 0.0005, LAMBDA).unwrap();
        let s = SamplePoints::from_points(std::vec![Point2::new(0.001, 0.02)]).unwrap();
        let h = build_channel_matrix(&g, &s, &[]).unwrap();
        assert_eq!(h.num_points(), 1);
        assert_eq!(h.rows()[0], channel_at(&g, Point2::new(0.001, 0.02), &[]).unwrap());
    }

    #[test]
    fn full_scale_amplitudes_follow_distance() {
        let g = ArrayGeometry::from_frequency(400, 300e9, None).unwrap();
        let t = Trajectory::parabola(0.0008, 15.0 / 200.0, 15.0).unwrap();
        let s = sample_trajectory(&t, 200).unwrap();
        let h = build_channel_matrix(&g, &s, &[]).unwrap();
        for row in h.rows() {
            let mut pairs: std::vec::Vec<(f64, f64)> =
                (0..400).map(|n| (g.antenna(n).distance(&row.target), row.gains[n].norm())).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in pairs.windows(2) {
                if w[1].0 > w[0].0 {
                    assert!(w[1].1 < w[0].1);
                }
            }
            assert!(row.gains.iter().all(|g| g.norm() > 0.0));
        }
    }

    #[test]
    fn received_power_examples() {
        let h = ChannelVector {
            gains: std::vec![C64::new(0.3, -0.1), C64::new(-0.2, 0.5), C64::new(0.05, 0.05)],
            target: Point2::new(0.0, 1.0),
        };
        let mf = Beamformer::matched_filter(&h).unwrap();
        assert!((received_power(&mf, &h) - h.norm_sqr()).abs() < 1e-15);

        let a = C64::new(0.7, 0.2);
        let h2 = ChannelVector { gains: std::vec![a, -a], target: Point2::new(0.0, 1.0) };
        let w = Beamformer::from_phases(&[0.0, 0.0]);
        assert!(received_power(&w, &h2) < 1e-30);

        let orth = Beamformer::dbf_normalized(&[C64::new(1.0, 0.0), a / a.norm()]).unwrap();
        let h3 = ChannelVector { gains: std::vec![C64::new(1.0, 0.0), -(a / a.norm())], target: Point2::new(0.0, 1.0) };
        assert!(received_power(&orth, &h3) < 1e-30);
    }

    #[test]
    fn min_power_breaks_ties_by_first_index() {
        let row = ChannelVector { gains: std::vec![C64::new(0.1, 0.0)], target: Point2::new(0.0, 1.0) };
        let big = ChannelVector { gains: std::vec![C64::new(1.0, 0.0)], target: Point2::new(0.0, 2.0) };
        let h = ChannelMatrix::from_rows(std::vec![big, row.clone(), row]).unwrap();
        let w = Beamformer::from_phases(&[0.0]);
        let (p, m) = min_trajectory_power(&w, &h);
        assert_eq!(m, 1);
        assert!((p - 0.01).abs() < 1e-15);
    }

    #[test]
    fn matched_filter_is_not_the_trajectory_minimizer() {
        let g = ArrayGeometry::from_frequency(32, 300e9, None).unwrap();
        let t = Trajectory::parabola(0.125, 0.0096, 0.096).unwrap();
        let s = sample_trajectory(&t, 40).unwrap();
        let h = build_channel_matrix(&g, &s, &[]).unwrap();
        let target = 10;
        let w = Beamformer::matched_filter(&h.rows()[target]).unwrap();
        let powers = power_profile(&w, &h);
        let (_, argmin) = min_trajectory_power(&w, &h);
        assert_ne!(argmin, target);
        assert!(powers[target] >= powers.iter().cloned().fold(0.0, f64::max) - 1e-30);
    }

    #[test]
    fn beamformer_validation() {
        assert!(Beamformer::new(std::vec![C64::new(1.0, 0.0); 4], Scheme::Abf).is_err());
        assert!(Beamformer::new(std::vec![C64::new(0.5, 0.0); 4], Scheme::Abf).is_ok());
        assert!(Beamformer::new(std::vec![C64::new(0.5, 0.0); 4], Scheme::Dbf).is_ok());
        assert!(Beamformer::new(std::vec![C64::new(0.6, 0.0); 4], Scheme::Dbf).is_err());
        assert!(Beamformer::dbf_normalized(&[C64::new(0.0, 0.0)]).is_err());
    }

    fn arb_vec(n: usize) -> impl Strategy<Value = std::vec::Vec<C64>> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| C64::new(a, b)), n)
    }

    proptest! {
        #[test]
        fn amplitude_and_phase_laws(x in -0.05f64..0.05, z in 0.001f64..2.0, n in 1usize..12) {
            let g = ArrayGeometry::new(n, 0.0005, LAMBDA).unwrap();
            let h = channel_at(&g, Point2::new(x, z), &[]).unwrap();
            for (i, gain) in h.gains.iter().enumerate() {
                let d = g.antenna(i).distance(&Point2::new(x, z));
                prop_assert!((gain.norm() * d - LAMBDA / (4.0 * PI)).abs() < 1e-14);
                let derot = gain * C64::from_polar(1.0, -2.0 * PI * d / LAMBDA);
                prop_assert!(derot.re > 0.0);
                prop_assert!(derot.im.abs() < 1e-9 * derot.re.max(1e-300) + 1e-12 * gain.norm());
            }
        }

        #[test]
        fn power_is_phase_invariant_and_bounded(w in arb_vec(6), h in arb_vec(6), theta in -7.0f64..7.0) {
            prop_assume!(norm2(&w) > 1e-3);
            let bf = Beamformer::dbf_normalized(&w).unwrap();
            let ch = ChannelVector { gains: h, target: Point2::new(0.0, 1.0) };
            let p = received_power(&bf, &ch);
            let pr = received_power(&bf.rotated(theta), &ch);
            prop_assert!((p - pr).abs() <= 1e-12 * (1.0 + p));
            prop_assert!(p <= ch.norm_sqr() * (1.0 + 1e-12));
        }
    }
}
