//! Tangent-method baseline.
//!
//! Each array point `A` steers its sub-array along the line through `A` that
//! touches the trajectory at `B`; integrating the resulting local phase
//! gradient along the aperture gives a phase-only (ABF) profile.
//!
//! For a curve launched from the origin and bending towards +x, tangent
//! lines meet the array axis at `x_a <= 0`, which is where the aperture lies.
//! Antenna `n` sits at `x_a = -u_n`, `u_n` being its distance from the first
//! element (the launch point), and profiles are written in terms of `u`.
//!
//! Profiles use the usual tangent-method convention in which a positive
//! phase slope steers towards +x. Received power here is `|w^H h|^2` with
//! `h ~ exp(+j k d)`, so [`tm_beamformer`] applies the conjugate phase.

use alloc::vec::Vec;

use crate::channel::Beamformer;
use crate::error::{invalid, Error, Result};
use crate::geometry::{ArrayGeometry, Trajectory, TrajectoryKind};

/// Trapezoid sub-intervals per antenna spacing.
pub const SUBINTERVALS_PER_SPACING: usize = 64;

/// Per-antenna phases in radians, shifted so the first entry is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseProfile {
    phases: Vec<f64>,
    /// Antennas whose tangent point fell outside the trajectory and were clamped.
    pub clamped: usize,
}

impl PhaseProfile {
    pub fn new(mut phases: Vec<f64>) -> Result<Self> {
        if phases.is_empty() {
            return Err(invalid("phases", "empty profile"));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(invalid("phases", "non-finite phase"));
        }
        let first = phases[0];
        phases.iter_mut().for_each(|p| *p -= first);
        Ok(Self { phases, clamped: 0 })
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }
}

/// Which steering law the profile integrates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseLaw {
    /// `dphi/dx = k f'(z_B)` (small departure angles).
    Paraxial,
    /// `dphi/dx = k f'(z_B) / sqrt(1 + f'(z_B)^2)`.
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Tangent {
    Found(f64),
    BelowRange,
    AboveRange,
}

fn residual(traj: &Trajectory, z: f64, x_a: f64) -> f64 {
    let (f, df) = traj.eval_with_slope(z);
    f - z * df - x_a
}

fn locate_tangent(traj: &Trajectory, x_a: f64) -> Tangent {
    let tol = 1e-10 * x_a.abs().max(1.0);
    let (lo, mut hi) = traj.tangent_domain();
    let r_lo = residual(traj, lo, x_a);
    if r_lo.abs() <= tol {
        return Tangent::Found(lo);
    }
    if r_lo < 0.0 {
        return Tangent::BelowRange;
    }
    let mut r_hi = residual(traj, hi, x_a);
    if matches!(traj.kind(), TrajectoryKind::Parabola { .. }) {
        // The parabola continues analytically past z_max.
        let mut grow = 0;
        while r_hi > tol && grow < 200 {
            hi = 2.0 * hi + 1.0;
            r_hi = residual(traj, hi, x_a);
            grow += 1;
        }
    }
    if r_hi.abs() <= tol {
        return Tangent::Found(hi);
    }
    if r_hi > 0.0 {
        return Tangent::AboveRange;
    }
    // Residual is non-increasing for convex f: f - z f' has derivative -z f''.
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let r = residual(traj, mid, x_a);
        if r > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let ra = residual(traj, a, x_a).abs();
    let rb = residual(traj, b, x_a).abs();
    Tangent::Found(if ra <= rb { a } else { b })
}

/// Tangent point `z_b` with `x_a = f(z_b) - z_b f'(z_b)`.
pub fn tangent_point(traj: &Trajectory, x_a: f64) -> Result<f64> {
    match locate_tangent(traj, x_a) {
        Tangent::Found(z) => Ok(z),
        _ => Err(Error::TangentUnreachable { x_a }),
    }
}

/// Like [`tangent_point`] but assigns the boundary tangent when none exists.
/// The flag reports whether clamping happened.
pub fn tangent_point_clamped(traj: &Trajectory, x_a: f64) -> (f64, bool) {
    let (lo, hi) = traj.tangent_domain();
    match locate_tangent(traj, x_a) {
        Tangent::Found(z) => (z, false),
        Tangent::BelowRange => (lo, true),
        Tangent::AboveRange => (hi, true),
    }
}

/// Numerically integrated tangent-method profile (composite trapezoid).
pub fn phase_profile(traj: &Trajectory, geom: &ArrayGeometry, law: PhaseLaw) -> Result<PhaseProfile> {
    if !traj.is_convex() {
        log::warn!("trajectory is not convex; tangent-method phases may be meaningless");
    }
    let k = geom.wavenumber();
    let n = geom.num_antennas();
    let du = geom.spacing() / SUBINTERVALS_PER_SPACING as f64;
    let mut clamped = 0usize;
    let mut integrand = |u: f64| -> f64 {
        let (z_b, was_clamped) = tangent_point_clamped(traj, -u);
        if was_clamped && u > 0.0 {
            clamped += 1;
        }
        let slope = traj.derivative(z_b);
        match law {
            PhaseLaw::Paraxial => k * slope,
            PhaseLaw::Exact => k * slope / libm::sqrt(1.0 + slope * slope),
        }
    };

    let mut phases = Vec::with_capacity(n);
    phases.push(0.0);
    let mut acc = 0.0;
    let mut left = integrand(0.0);
    for idx in 1..n {
        let u0 = geom.antenna_x()[0] - geom.antenna_x()[idx - 1];
        for s in 1..=SUBINTERVALS_PER_SPACING {
            let right = integrand(u0 + s as f64 * du);
            acc += 0.5 * du * (left + right);
            left = right;
        }
        // Foot points run towards -x, so the phase is minus the accumulated integral.
        phases.push(-acc);
    }
    if clamped > 0 {
        log::warn!("{clamped} quadrature nodes used the boundary tangent");
    }
    let mut profile = PhaseProfile::new(phases)?;
    profile.clamped = clamped;
    Ok(profile)
}

pub fn paraxial_phase_profile(traj: &Trajectory, geom: &ArrayGeometry) -> Result<PhaseProfile> {
    phase_profile(traj, geom, PhaseLaw::Paraxial)
}

pub fn exact_phase_profile(traj: &Trajectory, geom: &ArrayGeometry) -> Result<PhaseProfile> {
    phase_profile(traj, geom, PhaseLaw::Exact)
}

/// `phi(u) = -(4/3) sqrt(beta) k u^{3/2}` for a parabola `x = beta z^2`.
pub fn parabola_phase_closed_form(beta: f64, geom: &ArrayGeometry) -> Result<PhaseProfile> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(invalid("beta", alloc::format!("must be positive, got {beta}")));
    }
    let k = geom.wavenumber();
    let x0 = geom.antenna_x()[0];
    let c = -4.0 / 3.0 * libm::sqrt(beta) * k;
    let phases = geom.antenna_x().iter().map(|&x| c * libm::pow(x0 - x, 1.5)).collect();
    PhaseProfile::new(phases)
}

/// `w_n = exp(-j phi_n) / sqrt(N)`, which steers each sub-array along its tangent line.
pub fn tm_beamformer(profile: &PhaseProfile, num_antennas: usize) -> Result<Beamformer> {
    if profile.len() != num_antennas {
        return Err(Error::DimensionMismatch { expected: num_antennas, found: profile.len() });
    }
    let conj: Vec<f64> = profile.phases().iter().map(|p| -p).collect();
    Ok(Beamformer::from_phases(&conj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_channel_matrix, power_profile, received_power};
    use crate::geometry::sample_trajectory;
    use crate::C64;

    fn desk(n: usize) -> ArrayGeometry {
        ArrayGeometry::from_frequency(n, 300e9, None).unwrap()
    }

    #[test]
    fn parabola_tangent_matches_closed_form_root() {
        let beta = 0.0008;
        let t = Trajectory::parabola(beta, 0.0, 15.0).unwrap();
        for u in [0.0, 1e-4, 0.01, 0.1, 0.18, 0.5] {
            let z = tangent_point(&t, -u).unwrap();
            let expected = libm::sqrt(u / beta);
            assert!((z - expected).abs() <= 1e-9 * (1.0 + expected), "u={u}: {z} vs {expected}");
            assert!(residual(&t, z, -u).abs() <= 1e-10 * u.max(1.0));
        }
        assert_eq!(tangent_point(&t, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn positive_foot_is_unreachable() {
        let t = Trajectory::parabola(0.001, 0.0, 15.0).unwrap();
        assert!(matches!(tangent_point(&t, 0.01), Err(Error::TangentUnreachable { .. })));
    }

    #[test]
    fn tabulated_tangent_residual() {
        let zs: std::vec::Vec<f64> = (0..=40).map(|i| 0.5 + i as f64 * 0.25).collect();
        let xs: std::vec::Vec<f64> = zs.iter().map(|z| 0.002 * z * z * z + 0.001 * z * z).collect();
        let t = Trajectory::tabulated(zs, xs, None).unwrap();
        for x_a in [-0.01, -0.05, -0.2, -1.0] {
            let z = tangent_point(&t, x_a).unwrap();
            assert!(residual(&t, z, x_a).abs() <= 1e-10, "x_a={x_a}");
        }
        // Beyond the last tabulated point: clamped to the boundary.
        let (z, clamped) = tangent_point_clamped(&t, -1e3);
        assert!(clamped);
        assert_eq!(z, 10.5);
    }

    #[test]
    fn closed_form_value() {
        // beta = 0.0008, lambda = 1 mm, u = 0.1 m.
        let g = ArrayGeometry::new(2, 0.1, 0.001).unwrap();
        let p = parabola_phase_closed_form(0.0008, &g).unwrap();
        // Independent evaluation: -(4/3) * sqrt(8e-4) * 2000 pi * 0.1^1.5.
        let expected = -(4.0 / 3.0) * 0.028284271247461905 * 6283.185307179586 * 0.0316227766016838;
        assert!((p.phases()[1] - expected).abs() < 1e-9);
        assert!((p.phases()[1] + 7.49).abs() < 0.01);
        assert_eq!(p.phases()[0], 0.0);
    }

    #[test]
    fn closed_form_homogeneity() {
        let g1 = ArrayGeometry::new(5, 0.001, 0.001).unwrap();
        let g2 = ArrayGeometry::new(5, 0.004, 0.001).unwrap();
        let a = parabola_phase_closed_form(0.01, &g1).unwrap();
        let b = parabola_phase_closed_form(0.01, &g2).unwrap();
        for (x, y) in a.phases().iter().zip(b.phases()) {
            assert!((y - 8.0 * x).abs() < 1e-9 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn paraxial_matches_closed_form() {
        let g = desk(64);
        let beta = 0.03125;
        let t = Trajectory::parabola(beta, 0.0384, 0.384).unwrap();
        let num = paraxial_phase_profile(&t, &g).unwrap();
        let closed = parabola_phase_closed_form(beta, &g).unwrap();
        let worst = num.phases().iter().zip(closed.phases()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-3, "max deviation {worst} rad");
        assert_eq!(num.clamped, 0);
    }

    #[test]
    fn flat_trajectory_gives_zero_profile() {
        let t = Trajectory::tabulated(std::vec![0.0, 1.0, 2.0], std::vec![0.0, 0.0, 0.0], None).unwrap();
        let p = paraxial_phase_profile(&t, &desk(8)).unwrap();
        assert!(p.phases().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn magnitude_grows_along_the_array() {
        let t = Trajectory::parabola(0.125, 0.0096, 0.096).unwrap();
        let p = paraxial_phase_profile(&t, &desk(32)).unwrap();
        assert!(p.phases().windows(2).all(|w| w[1].abs() >= w[0].abs()));
        let e = exact_phase_profile(&t, &desk(32)).unwrap();
        assert!(e.phases().windows(2).all(|w| w[1].abs() >= w[0].abs()));
    }

    #[test]
    fn exact_and_paraxial_agree_to_first_order() {
        let g = desk(32);
        let gap = |beta: f64| {
            let t = Trajectory::parabola(beta, 0.0, 0.1).unwrap();
            let a = paraxial_phase_profile(&t, &g).unwrap();
            let b = exact_phase_profile(&t, &g).unwrap();
            a.phases().iter().zip(b.phases()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        };
        let mut beta = 0.5;
        let mut prev = gap(beta);
        for _ in 0..4 {
            beta /= 2.0;
            let next = gap(beta);
            assert!(next * 2.0 <= prev, "{next} vs {prev}");
            prev = next;
        }
    }

    #[test]
    fn tm_beamformer_properties() {
        let zero = PhaseProfile::new(std::vec![0.0; 6]).unwrap();
        let w = tm_beamformer(&zero, 6).unwrap();
        for c in w.weights() {
            assert!((c - C64::new(1.0 / 6f64.sqrt(), 0.0)).norm() < 1e-15);
        }
        assert!(tm_beamformer(&zero, 5).is_err());

        let g = desk(32);
        let t = Trajectory::parabola(0.125, 0.0096, 0.096).unwrap();
        let w = tm_beamformer(&paraxial_phase_profile(&t, &g).unwrap(), 32).unwrap();
        for c in w.weights() {
            assert!((c.norm() - 1.0 / 32f64.sqrt()).abs() < 1e-15);
        }
        let h = build_channel_matrix(&g, &sample_trajectory(&t, 40).unwrap(), &[]).unwrap();
        let prof = power_profile(&w, &h);
        assert!(prof.iter().all(|p| p.is_finite() && *p > 0.0));
    }

    #[test]
    fn tm_field_follows_the_bend() {
        // Full-scale parabola: the lateral field peak drifts towards +x along the curve.
        let g = ArrayGeometry::from_frequency(400, 300e9, None).unwrap();
        let t = Trajectory::parabola(0.0008, 0.5, 15.0).unwrap();
        let w = tm_beamformer(&paraxial_phase_profile(&t, &g).unwrap(), 400).unwrap();
        let mut last = f64::NEG_INFINITY;
        for z in [9.0, 12.0, 15.0] {
            let xs: std::vec::Vec<f64> = (0..=600).map(|i| -0.1 + 0.4 * i as f64 / 600.0).collect();
            let peak = xs
                .iter()
                .map(|&x| {
                    (
                        x,
                        received_power(
                            &w,
                            &crate::channel::channel_at(&g, crate::geometry::Point2::new(x, z), &[]).unwrap(),
                        ),
                    )
                })
                .fold((0.0, 0.0), |b, c| if c.1 > b.1 { c } else { b })
                .0;
            assert!((peak - t.eval(z)).abs() < 0.03, "z={z}: peak at {peak}, curve at {}", t.eval(z));
            assert!(peak > last);
            last = peak;
        }
    }

    #[test]
    fn constant_offset_leaves_power_unchanged() {
        let g = desk(16);
        let t = Trajectory::parabola(0.125, 0.0096, 0.096).unwrap();
        let p = paraxial_phase_profile(&t, &g).unwrap();
        let shifted: std::vec::Vec<f64> = p.phases().iter().map(|v| v + 1.234).collect();
        let w1 = Beamformer::from_phases(p.phases());
        let w2 = Beamformer::from_phases(&shifted);
        let h = crate::channel::channel_at(&g, crate::Point2::new(0.001, 0.05), &[]).unwrap();
        let (a, b) = (received_power(&w1, &h), received_power(&w2, &h));
        assert!((a - b).abs() <= 1e-12 * a);
    }
}
