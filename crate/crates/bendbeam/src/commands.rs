//! Subcommand drivers: each loads a scenario, runs the core pipeline and writes artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bendbeam_core::fieldmap::{evaluate_rows, profile_along_trajectory, ComparisonMetrics, FieldGrid, GridSpec};
use bendbeam_core::maxmin::MaxMinStatus;
use bendbeam_core::pipeline::{synthesize, Method, Scenario, Synthesis};
use bendbeam_core::{ArrayGeometry, Beamformer, Obstacle, Scheme};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ObstacleConfig, ScenarioConfig, SchemeName};
use crate::error::{CliError, Result};
use crate::formats::{self, MetricsRecord, SweepRow};

/// Environment variable that overrides the output directory when `--out` is absent.
pub const OUT_ENV: &str = "BENDBEAM_OUT";
pub const DEFAULT_OUT: &str = "bendbeam-out";

#[derive(Clone, Debug, Default)]
pub struct Options {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub scheme: Option<String>,
    pub jobs: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Beta,
    NumAntennas,
    NumSamples,
}

impl SweepParam {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "beta" => Ok(SweepParam::Beta),
            "N" | "n" | "num_antennas" => Ok(SweepParam::NumAntennas),
            "M" | "m" | "num_samples" => Ok(SweepParam::NumSamples),
            other => Err(CliError::config("--param", format!("unknown parameter `{other}`, expected beta, N or M"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Beta => "beta",
            SweepParam::NumAntennas => "N",
            SweepParam::NumSamples => "M",
        }
    }

    fn apply(self, cfg: &mut ScenarioConfig, value: f64) -> Result<()> {
        let count = |field: &str| {
            if value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(CliError::config(field, format!("sweep value {value} is not a positive integer")))
            }
        };
        match self {
            SweepParam::Beta => cfg.trajectory.beta = Some(value),
            SweepParam::NumAntennas => cfg.num_antennas = count("num_antennas")?,
            SweepParam::NumSamples => cfg.num_samples = count("num_samples")?,
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub enum Command {
    Synthesize,
    Fieldmap { beamformer: Option<PathBuf> },
    Profile { beamformer: Option<PathBuf> },
    Compare,
    Sweep { param: SweepParam, values: Vec<f64> },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synthesize => "synthesize",
            Command::Fieldmap { .. } => "fieldmap",
            Command::Profile { .. } => "profile",
            Command::Compare => "compare",
            Command::Sweep { .. } => "sweep",
        }
    }
}

/// Where a finished run left its artifacts and whether every part succeeded.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub complete: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.complete {
            0
        } else {
            1
        }
    }
}

pub fn run(cmd: &Command, opts: &Options) -> Result<Outcome> {
    let mut config = ScenarioConfig::load(&opts.config)?;
    if let Some(s) = &opts.scheme {
        config.scheme = Some(SchemeName::parse(s)?);
        config.schemes = None;
    }
    if let Command::Sweep { values, .. } = cmd {
        if values.is_empty() {
            return Err(CliError::config("--values", "need at least one value"));
        }
    } else {
        config.validate()?;
    }
    if opts.jobs == Some(0) {
        return Err(CliError::config("--jobs", "must be at least 1"));
    }
    let out_dir = resolve_out_dir(opts.out.as_deref(), &config);
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;

    let mut ctx = Context::new(cmd.name(), config, out_dir);
    let body = |ctx: &mut Context| match cmd {
        Command::Synthesize => cmd_synthesize(ctx),
        Command::Fieldmap { beamformer } => cmd_fieldmap(ctx, beamformer.as_deref()),
        Command::Profile { beamformer } => cmd_profile(ctx, beamformer.as_deref()),
        Command::Compare => cmd_compare(ctx),
        Command::Sweep { param, values } => cmd_sweep(ctx, *param, values),
    };
    let result = match opts.jobs {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| CliError::Run(format!("cannot start {k} worker threads: {e}")))?
            .install(|| body(&mut ctx)),
        None => body(&mut ctx),
    };
    if let Err(e) = &result {
        ctx.error = Some(e.to_string());
    }
    ctx.write_manifest()?;
    result?;
    Ok(Outcome { out_dir: ctx.out_dir.clone(), complete: ctx.runs.iter().all(|r| r.status != "failed") })
}

/// `--out`, then `$BENDBEAM_OUT`, then `output_dir` from the file, then `./bendbeam-out`.
pub fn resolve_out_dir(flag: Option<&Path>, config: &ScenarioConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    config.output_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

#[derive(Clone, Debug, Serialize)]
struct SolverSummary {
    status: &'static str,
    rounds: usize,
    iterations: usize,
    sdr_bound: f64,
    rank_gap: f64,
    final_rho: f64,
    degenerate_eigenvector: bool,
}

#[derive(Clone, Debug, Serialize)]
struct RunRecord {
    scheme: String,
    /// `ok`, `rank_gap_open` or `failed`.
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    solver: Option<SolverSummary>,
    seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    status: &'static str,
    partial: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: &'a Option<String>,
    config_sha256: String,
    seed: u64,
    config: &'a ScenarioConfig,
    obstacles: &'a [ObstacleConfig],
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<GridRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: &'a Option<SweepRecord>,
    runs: &'a [RunRecord],
    artifacts: &'a [String],
    timings_s: &'a BTreeMap<String, f64>,
}

#[derive(Clone, Copy, Debug, Serialize)]
struct GridRecord {
    x_min: f64,
    x_max: f64,
    nx: usize,
    z_min: f64,
    z_max: f64,
    nz: usize,
}

impl From<GridSpec> for GridRecord {
    fn from(g: GridSpec) -> Self {
        Self { x_min: g.x_min, x_max: g.x_max, nx: g.nx, z_min: g.z_min, z_max: g.z_max, nz: g.nz }
    }
}

#[derive(Clone, Debug, Serialize)]
struct SweepRecord {
    param: &'static str,
    values: Vec<f64>,
}

struct Context {
    command: &'static str,
    config: ScenarioConfig,
    out_dir: PathBuf,
    started: Instant,
    grid: Option<GridSpec>,
    sweep: Option<SweepRecord>,
    runs: Vec<RunRecord>,
    artifacts: Vec<String>,
    timings: BTreeMap<String, f64>,
    error: Option<String>,
}

impl Context {
    fn new(command: &'static str, config: ScenarioConfig, out_dir: PathBuf) -> Self {
        Self {
            command,
            config,
            out_dir,
            started: Instant::now(),
            grid: None,
            sweep: None,
            runs: Vec::new(),
            artifacts: Vec::new(),
            timings: BTreeMap::new(),
            error: None,
        }
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let v = f();
        *self.timings.entry(stage.to_string()).or_default() += t0.elapsed().as_secs_f64();
        v
    }

    fn single_scheme(&self) -> Result<SchemeName> {
        match self.config.schemes()?.as_slice() {
            [one] => Ok(*one),
            _ => Err(CliError::config("schemes", format!("`{}` runs one scheme; pick it with --scheme", self.command))),
        }
    }

    fn write_manifest(&mut self) -> Result<()> {
        self.timings.insert("total".into(), self.started.elapsed().as_secs_f64());
        let failed = self.runs.iter().filter(|r| r.status == "failed").count();
        let (status, partial) = if self.error.is_some() || (failed > 0 && failed == self.runs.len()) {
            ("failed", !self.artifacts.is_empty())
        } else if failed > 0 {
            ("partial", true)
        } else {
            ("ok", false)
        };
        let artifacts: Vec<String> = self.artifacts.clone();
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            status,
            partial,
            error: &self.error,
            config_sha256: config_hash(&self.config),
            seed: self.config.seed,
            config: &self.config,
            obstacles: &self.config.obstacles,
            grid: self.grid.map(GridRecord::from),
            sweep: &self.sweep,
            runs: &self.runs,
            artifacts: &artifacts,
            timings_s: &self.timings,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Run(e.to_string()))? + "\n";
        let path = self.out_dir.join("manifest.json");
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }
}

/// SHA-256 of the canonical TOML form of the effective configuration.
pub fn config_hash(config: &ScenarioConfig) -> String {
    let digest = Sha256::digest(config.to_toml_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

struct MethodRun {
    scheme: SchemeName,
    outcome: std::result::Result<Synthesis, String>,
    seconds: f64,
}

impl MethodRun {
    fn failed(&self) -> bool {
        match &self.outcome {
            Err(_) => true,
            Ok(s) => s.state.as_ref().is_some_and(|st| st.status == MaxMinStatus::SubproblemFailed),
        }
    }

    fn record(&self, sweep_value: Option<f64>) -> RunRecord {
        let (p_min, solver, error) = match &self.outcome {
            Ok(s) => {
                let solver = s.state.as_ref().map(|st| SolverSummary {
                    status: st.status.label(),
                    rounds: st.rounds,
                    iterations: st.trace_log.len(),
                    sdr_bound: st.sdr_bound,
                    rank_gap: st.rank_gap(),
                    final_rho: st.rho * st.power_scale,
                    degenerate_eigenvector: st.degenerate,
                });
                (Some(s.p_min), solver, None)
            }
            Err(e) => (None, None, Some(e.clone())),
        };
        let status = if self.failed() {
            "failed"
        } else if solver.as_ref().is_some_and(|s| s.status == MaxMinStatus::RankGapOpen.label()) {
            "rank_gap_open"
        } else {
            "ok"
        };
        RunRecord {
            scheme: self.scheme.label().into(),
            status,
            sweep_value,
            p_min,
            solver,
            seconds: self.seconds,
            error,
        }
    }
}

fn run_method(config: &ScenarioConfig, scenario: &Scenario, scheme: SchemeName) -> MethodRun {
    let t0 = Instant::now();
    let outcome = (|| {
        let cfg = config.solver_config(match scheme.method() {
            Method::Proposed(s) => s,
            Method::Tangent => Scheme::Abf,
        })?;
        synthesize(scenario, scheme.method(), &cfg).map_err(CliError::from)
    })()
    .map_err(|e| e.to_string());
    if let Err(e) = &outcome {
        log::error!("{}: {e}", scheme.label());
    }
    MethodRun { scheme, outcome, seconds: t0.elapsed().as_secs_f64() }
}

fn write_synthesis(ctx: &mut Context, scenario: &Scenario, s: &Synthesis) -> Result<()> {
    ctx.write("beamformer.csv", formats::beamformer_csv(&s.beamformer).as_bytes())?;
    if let Some(st) = &s.state {
        ctx.write("trace.csv", formats::trace_csv(&st.trace_log).as_bytes())?;
    }
    if let (Method::Tangent, Some(p)) = (s.method, &s.phase_profile) {
        ctx.write("phase_profile.csv", formats::phase_profile_csv(p, &scenario.geometry).as_bytes())?;
    }
    Ok(())
}

/// Runs one scheme, records it, and returns the beamformer when usable.
fn synthesize_one(ctx: &mut Context, scenario: &Scenario) -> Result<Option<Beamformer>> {
    let scheme = ctx.single_scheme()?;
    let config = ctx.config.clone();
    let run = ctx.time("synthesize", || run_method(&config, scenario, scheme));
    ctx.runs.push(run.record(None));
    match &run.outcome {
        Ok(s) => {
            write_synthesis(ctx, scenario, s)?;
            Ok((!run.failed()).then(|| s.beamformer.clone()))
        }
        Err(_) => Ok(None),
    }
}

fn cmd_synthesize(ctx: &mut Context) -> Result<()> {
    let scenario = ctx.config.scenario()?;
    synthesize_one(ctx, &scenario)?;
    Ok(())
}

fn load_beamformer(path: &Path, n: usize) -> Result<Beamformer> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("--beamformer", format!("cannot read {}: {e}", path.display())))?;
    let w = formats::parse_beamformer_csv(&text)?;
    if w.len() != n {
        return Err(CliError::config("--beamformer", format!("{} weights for a {n}-element array", w.len())));
    }
    Ok(w)
}

/// The beamformer to evaluate: from `--beamformer` when given, else freshly synthesized.
fn obtain_beamformer(
    ctx: &mut Context,
    scenario: &Scenario,
    file: Option<&Path>,
) -> Result<Option<(String, Beamformer)>> {
    match file {
        Some(path) => Ok(Some(("beamformer".into(), load_beamformer(path, scenario.geometry.num_antennas())?))),
        None => {
            let label = ctx.single_scheme()?.label().to_string();
            Ok(synthesize_one(ctx, scenario)?.map(|w| (label, w)))
        }
    }
}

/// Grid power with rows spread over the rayon pool; identical to the serial result.
pub fn evaluate_grid_parallel(
    w: &Beamformer,
    geom: &ArrayGeometry,
    spec: &GridSpec,
    obstacles: &[Obstacle],
) -> bendbeam_core::Result<FieldGrid> {
    let rows: Vec<Vec<f64>> = (0..spec.nz)
        .into_par_iter()
        .map(|iz| evaluate_rows(w, geom, spec, obstacles, iz..iz + 1))
        .collect::<bendbeam_core::Result<_>>()?;
    FieldGrid::from_rows(spec, rows.concat())
}

fn cmd_fieldmap(ctx: &mut Context, file: Option<&Path>) -> Result<()> {
    let scenario = ctx.config.scenario()?;
    let spec = ctx.config.grid_spec()?;
    ctx.grid = Some(spec);
    let Some((_, w)) = obtain_beamformer(ctx, &scenario, file)? else {
        return Ok(());
    };
    let grid = ctx.time("fieldmap", || evaluate_grid_parallel(&w, &scenario.geometry, &spec, &scenario.obstacles))?;
    ctx.write("field.csv", formats::field_csv(&grid).as_bytes())?;
    ctx.write("field.pgm", &formats::field_pgm(&grid))?;
    Ok(())
}

fn cmd_profile(ctx: &mut Context, file: Option<&Path>) -> Result<()> {
    let scenario = ctx.config.scenario()?;
    let Some((label, w)) = obtain_beamformer(ctx, &scenario, file)? else {
        return Ok(());
    };
    let profile = profile_along_trajectory(&w, &scenario.geometry, &scenario.samples, &scenario.obstacles, &label)?;
    let metrics = ComparisonMetrics::from_profile(&profile)?;
    let status = ctx.runs.first().map(|r| r.status).unwrap_or("ok");
    ctx.write("profiles.csv", formats::profiles_csv(&[profile]).as_bytes())?;
    ctx.write("metrics.json", formats::metrics_json(vec![MetricsRecord::ok(&label, status, &metrics)]).as_bytes())?;
    Ok(())
}

fn cmd_compare(ctx: &mut Context) -> Result<()> {
    let schemes = ctx.config.schemes()?;
    if schemes.len() < 2 {
        return Err(CliError::config("schemes", "compare needs at least two schemes"));
    }
    let scenario = ctx.config.scenario()?;
    let config = ctx.config.clone();
    let runs: Vec<MethodRun> =
        ctx.time("synthesize", || schemes.par_iter().map(|&s| run_method(&config, &scenario, s)).collect());

    let mut profiles = Vec::new();
    let mut records = Vec::new();
    for run in &runs {
        let record = run.record(None);
        let label = run.scheme.label();
        match (&run.outcome, run.failed()) {
            (Ok(s), false) => {
                let profile = profile_along_trajectory(
                    &s.beamformer,
                    &scenario.geometry,
                    &scenario.samples,
                    &scenario.obstacles,
                    label,
                )?;
                records.push(MetricsRecord::ok(label, record.status, &ComparisonMetrics::from_profile(&profile)?));
                profiles.push(profile);
            }
            (Ok(_), true) => records.push(MetricsRecord::failed(label, "subproblem failed".into())),
            (Err(e), _) => records.push(MetricsRecord::failed(label, e.clone())),
        }
        ctx.runs.push(record);
    }
    ctx.write("profiles.csv", formats::profiles_csv(&profiles).as_bytes())?;
    ctx.write("metrics.json", formats::metrics_json(records).as_bytes())?;
    Ok(())
}

type SweepOutcome = std::result::Result<(MethodRun, Option<ComparisonMetrics>), String>;

fn cmd_sweep(ctx: &mut Context, param: SweepParam, values: &[f64]) -> Result<()> {
    let schemes = ctx.config.schemes()?;
    ctx.sweep = Some(SweepRecord { param: param.name(), values: values.to_vec() });
    let base = ctx.config.clone();
    let jobs: Vec<(f64, SchemeName)> = values.iter().flat_map(|&v| schemes.iter().map(move |&s| (v, s))).collect();

    let results: Vec<(f64, SchemeName, SweepOutcome)> = ctx.time("sweep", || {
        jobs.par_iter()
            .map(|&(value, scheme)| {
                let res = (|| {
                    let mut cfg = base.clone();
                    param.apply(&mut cfg, value)?;
                    let scenario = cfg.scenario()?;
                    let run = run_method(&cfg, &scenario, scheme);
                    let metrics = match (&run.outcome, run.failed()) {
                        (Ok(s), false) => Some(ComparisonMetrics::from_profile(&profile_along_trajectory(
                            &s.beamformer,
                            &scenario.geometry,
                            &scenario.samples,
                            &scenario.obstacles,
                            scheme.label(),
                        )?)?),
                        _ => None,
                    };
                    Ok::<_, CliError>((run, metrics))
                })();
                (value, scheme, res.map_err(|e| e.to_string()))
            })
            .collect()
    });

    let mut rows = Vec::new();
    for (value, scheme, res) in results {
        let label = scheme.label();
        let (record, metrics) = match res {
            Ok((run, metrics)) => {
                let rec = run.record(Some(value));
                let m = match (&metrics, &run.outcome) {
                    (Some(m), _) => MetricsRecord::ok(label, rec.status, m),
                    (None, Err(e)) => MetricsRecord::failed(label, e.clone()),
                    (None, Ok(_)) => MetricsRecord::failed(label, "subproblem failed".into()),
                };
                (rec, m)
            }
            Err(e) => {
                log::error!("{}={value} {label}: {e}", param.name());
                let rec = RunRecord {
                    scheme: label.into(),
                    status: "failed",
                    sweep_value: Some(value),
                    p_min: None,
                    solver: None,
                    seconds: 0.0,
                    error: Some(e.clone()),
                };
                (rec, MetricsRecord::failed(label, e))
            }
        };
        ctx.runs.push(record);
        rows.push(SweepRow { param: param.name().into(), value, record: metrics });
    }
    ctx.write("sweep.csv", formats::sweep_csv(&rows).as_bytes())?;
    Ok(())
}
