//! End-to-end synthesis of one scenario with either method.

use alloc::vec::Vec;

use crate::channel::{build_channel_matrix, min_trajectory_power, Beamformer, ChannelMatrix, Scheme};
use crate::error::Result;
use crate::geometry::{sample_trajectory, ArrayGeometry, Obstacle, SamplePoints, Trajectory, TrajectoryKind};
use crate::linalg::CMatrix;
use crate::maxmin::{solve_maxmin, SolverConfig, SolverState};
use crate::tangent::{phase_profile, tm_beamformer, PhaseLaw, PhaseProfile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// Max-min design under the given constraint set.
    Proposed(Scheme),
    /// Tangent-method baseline (paraxial phase law).
    Tangent,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Proposed(s) => s.label(),
            Method::Tangent => "tangent",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub geometry: ArrayGeometry,
    pub trajectory: Trajectory,
    pub samples: SamplePoints,
    pub obstacles: Vec<Obstacle>,
}

impl Scenario {
    pub fn new(
        geometry: ArrayGeometry,
        trajectory: Trajectory,
        num_samples: usize,
        obstacles: Vec<Obstacle>,
    ) -> Result<Self> {
        let samples = sample_trajectory(&trajectory, num_samples)?;
        Ok(Self { geometry, trajectory, samples, obstacles })
    }

    pub fn channels(&self) -> Result<ChannelMatrix> {
        build_channel_matrix(&self.geometry, &self.samples, &self.obstacles)
    }
}

#[derive(Clone, Debug)]
pub struct Synthesis {
    pub method: Method,
    pub beamformer: Beamformer,
    /// Present for the proposed method.
    pub state: Option<SolverState>,
    /// Tangent-method phases; computed for parabolas also as the warm start.
    pub phase_profile: Option<PhaseProfile>,
    /// Minimum power over the sample points.
    pub p_min: f64,
}

/// Tangent-method beamformer for the scenario trajectory.
pub fn tangent_design(scenario: &Scenario) -> Result<(Beamformer, PhaseProfile)> {
    let profile = phase_profile(&scenario.trajectory, &scenario.geometry, PhaseLaw::Paraxial)?;
    let w = tm_beamformer(&profile, scenario.geometry.num_antennas())?;
    Ok((w, profile))
}

pub fn synthesize(scenario: &Scenario, method: Method, cfg: &SolverConfig) -> Result<Synthesis> {
    let h = scenario.channels()?;
    match method {
        Method::Tangent => {
            let (w, profile) = tangent_design(scenario)?;
            let (p_min, _) = min_trajectory_power(&w, &h);
            Ok(Synthesis { method, beamformer: w, state: None, phase_profile: Some(profile), p_min })
        }
        Method::Proposed(scheme) => {
            let cfg = SolverConfig { scheme, ..*cfg };
            let (v0, profile) = match scenario.trajectory.kind() {
                TrajectoryKind::Parabola { .. } => {
                    let (w, profile) = tangent_design(scenario)?;
                    (Some(CMatrix::outer(w.weights(), w.weights())), Some(profile))
                }
                TrajectoryKind::Tabulated(_) => (None, None),
            };
            let (w, state) = solve_maxmin(&h, &cfg, v0.as_ref())?;
            let (p_min, _) = min_trajectory_power(&w, &h);
            Ok(Synthesis { method, beamformer: w, state: Some(state), phase_profile: profile, p_min })
        }
    }
}
