//! Scenario files. The grammar is TOML; see `docs/FORMATS.md` for every key.

use std::path::{Path, PathBuf};

use bendbeam_core::fieldmap::GridSpec;
use bendbeam_core::maxmin::SolverConfig;
use bendbeam_core::pipeline::{Method, Scenario};
use bendbeam_core::{ArrayGeometry, Obstacle, Scheme, Trajectory};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeName {
    Abf,
    Dbf,
    Tangent,
}

impl SchemeName {
    pub fn method(self) -> Method {
        match self {
            SchemeName::Abf => Method::Proposed(Scheme::Abf),
            SchemeName::Dbf => Method::Proposed(Scheme::Dbf),
            SchemeName::Tangent => Method::Tangent,
        }
    }

    pub fn label(self) -> &'static str {
        self.method().label()
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "abf" => Ok(SchemeName::Abf),
            "dbf" => Ok(SchemeName::Dbf),
            "tangent" | "tm" => Ok(SchemeName::Tangent),
            other => Err(CliError::config("scheme", format!("unknown scheme `{other}`, expected abf, dbf or tangent"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpacingKeyword {
    #[serde(rename = "half-wavelength")]
    HalfWavelength,
}

/// Element spacing: a length in meters or the keyword `"half-wavelength"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Spacing {
    Meters(f64),
    Keyword(SpacingKeyword),
}

impl Default for Spacing {
    fn default() -> Self {
        Spacing::Keyword(SpacingKeyword::HalfWavelength)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryKindName {
    Parabola,
    Tabulated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub kind: TrajectoryKindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// `[z_min, z_max]` in meters. Required for parabolas.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_range: Option<[f64; 2]>,
    /// `[z, x]` pairs in meters, z increasing. Tabulated curves only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleConfig {
    pub x: [f64; 2],
    pub z: [f64; 2],
}

/// Optional replacements for the solver defaults.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_init: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_restart: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_growth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_gap_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obj_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_sca_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_penalty_rounds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sdp_gap_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sdp_feas_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sdp_max_iterations: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nz: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_range: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub carrier_frequency_hz: f64,
    pub num_antennas: usize,
    #[serde(default)]
    pub spacing: Spacing,
    pub num_samples: usize,
    /// Single scheme. Mutually exclusive with `schemes`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schemes: Option<Vec<SchemeName>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    pub trajectory: TrajectoryConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub obstacles: Vec<ObstacleConfig>,
    #[serde(default)]
    pub solver: SolverOverrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(field, format!("must be positive and finite, got {v}")))
    }
}

/// Prefixes a core parameter error with the config section it came from.
fn from_core(section: &str, e: bendbeam_core::Error) -> CliError {
    match e {
        bendbeam_core::Error::InvalidParameter { field, reason } => {
            CliError::config(format!("{section}{field}"), reason)
        }
        other => CliError::config(section.trim_end_matches('.'), other.to_string()),
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text)
            .map_err(|e| CliError::config("config", e.message().to_string() + &span_hint(text, e.span())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config always serializes")
    }

    /// Checks every field and builds the core objects once.
    pub fn validate(&self) -> Result<()> {
        self.scenario()?;
        self.schemes()?;
        self.solver_config(Scheme::Abf)?;
        self.grid_spec()?;
        Ok(())
    }

    pub fn schemes(&self) -> Result<Vec<SchemeName>> {
        let list = match (&self.scheme, &self.schemes) {
            (Some(_), Some(_)) => {
                return Err(CliError::config("schemes", "give either `scheme` or `schemes`, not both"))
            }
            (Some(s), None) => vec![*s],
            (None, Some(v)) => v.clone(),
            (None, None) => return Err(CliError::config("scheme", "missing; set `scheme` or `schemes`")),
        };
        if list.is_empty() {
            return Err(CliError::config("schemes", "must list at least one scheme"));
        }
        for (i, s) in list.iter().enumerate() {
            if list[..i].contains(s) {
                return Err(CliError::config("schemes", format!("`{}` listed twice", s.label())));
            }
        }
        Ok(list)
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        positive("carrier_frequency_hz", self.carrier_frequency_hz)?;
        if self.num_antennas == 0 {
            return Err(CliError::config("num_antennas", "must be at least 1"));
        }
        let spacing = match self.spacing {
            Spacing::Meters(d) => {
                positive("spacing", d)?;
                Some(d)
            }
            Spacing::Keyword(SpacingKeyword::HalfWavelength) => None,
        };
        ArrayGeometry::from_frequency(self.num_antennas, self.carrier_frequency_hz, spacing)
            .map_err(|e| from_core("", e))
    }

    pub fn trajectory(&self) -> Result<Trajectory> {
        let t = &self.trajectory;
        let range = match t.z_range {
            Some([lo, hi]) => {
                if !(lo > 0.0 && lo.is_finite()) {
                    return Err(CliError::config("trajectory.z_range", format!("z_min must be positive, got {lo}")));
                }
                if !(hi > lo && hi.is_finite()) {
                    return Err(CliError::config(
                        "trajectory.z_range",
                        format!("z_max must exceed z_min, got [{lo}, {hi}]"),
                    ));
                }
                Some((lo, hi))
            }
            None => None,
        };
        match t.kind {
            TrajectoryKindName::Parabola => {
                let beta = t.beta.ok_or_else(|| CliError::config("trajectory.beta", "required for a parabola"))?;
                positive("trajectory.beta", beta)?;
                if t.points.is_some() {
                    return Err(CliError::config("trajectory.points", "only valid for tabulated trajectories"));
                }
                let (lo, hi) =
                    range.ok_or_else(|| CliError::config("trajectory.z_range", "required for a parabola"))?;
                Trajectory::parabola(beta, lo, hi).map_err(|e| from_core("trajectory.", e))
            }
            TrajectoryKindName::Tabulated => {
                if t.beta.is_some() {
                    return Err(CliError::config("trajectory.beta", "only valid for parabolas"));
                }
                let pts = t
                    .points
                    .as_ref()
                    .ok_or_else(|| CliError::config("trajectory.points", "required for a tabulated curve"))?;
                let z = pts.iter().map(|p| p[0]).collect();
                let x = pts.iter().map(|p| p[1]).collect();
                let traj = Trajectory::tabulated(z, x, range).map_err(|e| from_core("trajectory.", e))?;
                if traj.z_range().0 <= 0.0 {
                    return Err(CliError::config("trajectory.points", "the curve must start at z > 0"));
                }
                Ok(traj)
            }
        }
    }

    pub fn obstacles(&self) -> Result<Vec<Obstacle>> {
        self.obstacles
            .iter()
            .enumerate()
            .map(|(i, o)| {
                Obstacle::new((o.x[0], o.x[1]), (o.z[0], o.z[1])).map_err(|e| match e {
                    bendbeam_core::Error::InvalidParameter { field, reason } => {
                        CliError::config(format!("obstacles[{i}].{}", field.trim_start_matches("obstacle.")), reason)
                    }
                    other => from_core(&format!("obstacles[{i}]."), other),
                })
            })
            .collect()
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let geometry = self.geometry()?;
        let trajectory = self.trajectory()?;
        if self.num_samples < 2 {
            return Err(CliError::config("num_samples", format!("must be at least 2, got {}", self.num_samples)));
        }
        let obstacles = self.obstacles()?;
        Scenario::new(geometry, trajectory, self.num_samples, obstacles).map_err(|e| from_core("", e))
    }

    pub fn solver_config(&self, scheme: Scheme) -> Result<SolverConfig> {
        let o = &self.solver;
        let mut cfg = SolverConfig::for_scheme(scheme);
        cfg.rho_init = o.rho_init.unwrap_or(cfg.rho_init);
        cfg.rho_restart = o.rho_restart.unwrap_or(cfg.rho_restart);
        cfg.rho_growth = o.rho_growth.unwrap_or(cfg.rho_growth);
        cfg.rank_gap_tol = o.rank_gap_tol.unwrap_or(cfg.rank_gap_tol);
        cfg.obj_tol = o.obj_tol.unwrap_or(cfg.obj_tol);
        cfg.max_sca_iters = o.max_sca_iters.unwrap_or(cfg.max_sca_iters);
        cfg.max_penalty_rounds = o.max_penalty_rounds.unwrap_or(cfg.max_penalty_rounds);
        if let Some(v) = o.sdp_gap_tol {
            positive("solver.sdp_gap_tol", v)?;
            cfg.sdp.gap_tol = v;
        }
        if let Some(v) = o.sdp_feas_tol {
            positive("solver.sdp_feas_tol", v)?;
            cfg.sdp.feas_tol = v;
        }
        if let Some(v) = o.sdp_max_iterations {
            if v == 0 {
                return Err(CliError::config("solver.sdp_max_iterations", "must be at least 1"));
            }
            cfg.sdp.max_iterations = v;
        }
        cfg.validate().map_err(|e| from_core("solver.", e))?;
        Ok(cfg)
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        let mut spec = GridSpec::default_for(&self.trajectory()?);
        if let Some(g) = &self.grid {
            if let Some(nx) = g.nx {
                spec.nx = nx;
            }
            if let Some(nz) = g.nz {
                spec.nz = nz;
            }
            if let Some([lo, hi]) = g.x_range {
                spec.x_min = lo;
                spec.x_max = hi;
            }
            if let Some([lo, hi]) = g.z_range {
                spec.z_min = lo;
                spec.z_max = hi;
            }
        }
        spec.validate().map_err(|e| from_core("", e))?;
        Ok(spec)
    }
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) => {
            let line = text[..r.start.min(text.len())].matches('\n').count() + 1;
            format!(" (line {line})")
        }
        None => String::new(),
    }
}
