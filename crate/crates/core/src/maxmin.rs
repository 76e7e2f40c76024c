//! Penalty-based successive convex approximation for the max-min
//! beamforming problem, plus rank-one extraction.
//!
//! The relaxed problem lifts `w` to `V = w w^H`. A penalty
//! `rho * (Tr V - sigma_max(V))` pushes `V` back to rank one; the concave
//! part `-sigma_max` is linearized at the current iterate so every inner step
//! is a convex subproblem solved by [`crate::sdp`].

use alloc::vec::Vec;

use crate::channel::{Beamformer, ChannelMatrix, Scheme};
use crate::error::{invalid, Error, Result};
use crate::linalg::{abs, arg, eigh, norm2, CMatrix, C64};
use crate::sdp::{min_sample_power, solve_subproblem_with, ConstraintKind, SdpSettings, SolveStatus, SubproblemSpec};

/// Relative width inside which the top eigenvalue counts as repeated.
pub const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub scheme: Scheme,
    /// Penalty of the first round. Zero means the first round is the plain relaxation.
    pub rho_init: f64,
    /// Penalty used after the relaxation round when its rank gap is still open.
    pub rho_restart: f64,
    pub rho_growth: f64,
    pub rank_gap_tol: f64,
    pub obj_tol: f64,
    pub max_sca_iters: usize,
    pub max_penalty_rounds: usize,
    pub sdp: SdpSettings,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Abf,
            rho_init: 0.0,
            rho_restart: 1e-2,
            rho_growth: 3.0,
            rank_gap_tol: 1e-4,
            obj_tol: 1e-6,
            max_sca_iters: 100,
            max_penalty_rounds: 12,
            sdp: SdpSettings::default(),
        }
    }
}

impl SolverConfig {
    pub fn for_scheme(scheme: Scheme) -> Self {
        Self { scheme, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho_init >= 0.0 && self.rho_init.is_finite()) {
            return Err(invalid("rho_init", "must be finite and nonnegative"));
        }
        if !(self.rho_restart > 0.0 && self.rho_restart.is_finite()) {
            return Err(invalid("rho_restart", "must be positive"));
        }
        if !(self.rho_growth > 1.0 && self.rho_growth.is_finite()) {
            return Err(invalid("rho_growth", "must be greater than 1"));
        }
        if !(self.rank_gap_tol > 0.0) {
            return Err(invalid("rank_gap_tol", "must be positive"));
        }
        if !(self.obj_tol > 0.0) {
            return Err(invalid("obj_tol", "must be positive"));
        }
        if self.max_sca_iters == 0 {
            return Err(invalid("max_sca_iters", "must be at least 1"));
        }
        if self.max_penalty_rounds == 0 {
            return Err(invalid("max_penalty_rounds", "must be at least 1"));
        }
        Ok(())
    }
}

/// One row of the convergence table. Powers and penalties are in linear SI units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub round: usize,
    pub rho: f64,
    pub t: f64,
    /// `t - rho * fhat(V | V_prev)` of the accepted iterate.
    pub surrogate: f64,
    pub rank_gap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaxMinStatus {
    /// Rank gap closed within tolerance.
    Optimal,
    /// Penalty rounds exhausted with the rank gap still open.
    RankGapOpen,
    /// A subproblem broke down; the state holds the best iterate reached.
    SubproblemFailed,
}

impl MaxMinStatus {
    pub fn label(&self) -> &'static str {
        match self {
            MaxMinStatus::Optimal => "optimal",
            MaxMinStatus::RankGapOpen => "rank_gap_open",
            MaxMinStatus::SubproblemFailed => "subproblem_failed",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolverState {
    pub v: CMatrix,
    /// `min_m Tr(R_m V)` of the final iterate.
    pub t: f64,
    /// Final penalty, relative to `power_scale`.
    pub rho: f64,
    /// Power unit used for the penalty: the relaxation optimum when positive.
    pub power_scale: f64,
    /// Optimum of the plain relaxation, an upper bound on any rank-one design.
    pub sdr_bound: f64,
    pub trace_log: Vec<TraceEntry>,
    pub status: MaxMinStatus,
    pub rounds: usize,
    /// The extracted beamformer came from a repeated top eigenvalue.
    pub degenerate: bool,
}

impl SolverState {
    pub fn rank_gap(&self) -> f64 {
        rank_gap(&self.v).unwrap_or(f64::NAN)
    }
}

/// Principal eigenpair with the canonical choice for repeated eigenvalues.
#[derive(Clone, Debug)]
pub struct TopEigen {
    pub value: f64,
    pub vector: Vec<C64>,
    pub degenerate: bool,
}

fn check_hermitian(v: &CMatrix) -> Result<()> {
    if !v.is_square() {
        return Err(Error::DimensionMismatch { expected: v.rows(), found: v.cols() });
    }
    let dev = v.max_hermitian_deviation();
    if dev > 1e-8 * (1.0 + v.frobenius_norm()) {
        return Err(Error::NotHermitian { deviation: dev });
    }
    Ok(())
}

/// `Tr(V) - sigma_max(V)`.
pub fn rank_gap(v: &CMatrix) -> Result<f64> {
    check_hermitian(v)?;
    let eig = eigh(&v.hermitian_part())?;
    Ok(v.trace().re - eig.max_value())
}

/// Top eigenpair of a Hermitian matrix. When the top eigenvalue is repeated
/// the vector is the normalized projection of the first basis vector with a
/// nonzero projection onto the eigenspace, so the choice is reproducible.
pub fn top_eigenpair(v: &CMatrix) -> Result<TopEigen> {
    check_hermitian(v)?;
    let n = v.rows();
    let eig = eigh(&v.hermitian_part())?;
    let top = eig.max_value();
    let width = DEGENERACY_TOL * top.abs().max(f64::MIN_POSITIVE);
    let cluster: Vec<usize> = (0..n).filter(|&j| top - eig.values[j] <= width).collect();
    if cluster.len() == 1 {
        let mut vector = eig.vector(n - 1);
        canonicalize_phase(&mut vector);
        return Ok(TopEigen { value: top, vector, degenerate: false });
    }
    log::warn!("top eigenvalue has multiplicity {}; using canonical eigenvector", cluster.len());
    let basis: Vec<Vec<C64>> = cluster.iter().map(|&j| eig.vector(j)).collect();
    for e in 0..n {
        let mut p = alloc::vec![C64::new(0.0, 0.0); n];
        for b in &basis {
            // Projection of e_e onto b is b * conj(b[e]).
            let c = b[e].conj();
            for (pi, bi) in p.iter_mut().zip(b) {
                *pi += bi * c;
            }
        }
        let nrm = norm2(&p);
        if nrm > 1e-6 {
            p.iter_mut().for_each(|x| *x /= nrm);
            canonicalize_phase(&mut p);
            return Ok(TopEigen { value: top, vector: p, degenerate: true });
        }
    }
    Err(Error::NoPrincipalComponent)
}

/// Rotates so the first significant entry is real and positive.
fn canonicalize_phase(v: &mut [C64]) {
    let max = v.iter().map(|&c| abs(c)).fold(0.0, f64::max);
    if let Some(first) = v.iter().find(|&&c| abs(c) > 1e-12 * max).copied() {
        let rot = first.conj() / abs(first);
        v.iter_mut().for_each(|c| *c *= rot);
    }
}

/// Majorant of the rank penalty `f(V) = Tr V - sigma_max(V)` around `V_ref`.
/// Returns `fhat(V | V_ref)` and its gradient `I - s s^H`.
pub fn linearized_penalty(v: &CMatrix, v_ref: &CMatrix) -> Result<(f64, CMatrix)> {
    check_hermitian(v)?;
    if v.rows() != v_ref.rows() {
        return Err(Error::DimensionMismatch { expected: v_ref.rows(), found: v.rows() });
    }
    let top = top_eigenpair(v_ref)?;
    let s = &top.vector;
    let value = v.trace().re - top.value - (v.quad_form(s) - v_ref.quad_form(s));
    let mut grad = CMatrix::identity(v.rows());
    grad.add_scaled(-1.0, &CMatrix::outer(s, s));
    Ok((value, grad))
}

/// Rank-one beamformer from the principal component of `V`.
pub fn extract_beamformer(v: &CMatrix, scheme: Scheme) -> Result<Beamformer> {
    extract_with_flag(v, scheme).map(|(w, _)| w)
}

fn extract_with_flag(v: &CMatrix, scheme: Scheme) -> Result<(Beamformer, bool)> {
    if v.frobenius_norm() == 0.0 {
        return Err(Error::NoPrincipalComponent);
    }
    let top = top_eigenpair(v)?;
    if top.value <= 0.0 {
        return Err(Error::NoPrincipalComponent);
    }
    let w = match scheme {
        Scheme::Abf => {
            let phases: Vec<f64> = top.vector.iter().map(|&c| arg(c)).collect();
            let p0 = phases[0];
            let shifted: Vec<f64> = phases.iter().map(|p| p - p0).collect();
            Beamformer::from_phases(&shifted)
        }
        Scheme::Dbf => Beamformer::dbf_normalized(&top.vector)?,
    };
    Ok((w, top.degenerate))
}

fn constraint_kind(scheme: Scheme) -> ConstraintKind {
    match scheme {
        Scheme::Abf => ConstraintKind::DiagEqual,
        Scheme::Dbf => ConstraintKind::TraceEqual,
    }
}

fn initial_v(n: usize) -> CMatrix {
    let mut v = CMatrix::identity(n);
    v.scale_mut(1.0 / n as f64);
    v
}

struct Run<'a> {
    channels: &'a [Vec<C64>],
    cfg: &'a SolverConfig,
    kind: ConstraintKind,
    log: Vec<TraceEntry>,
    failed: bool,
}

impl Run<'_> {
    fn solve(&mut self, c: CMatrix, rho: f64, warm: &CMatrix) -> Option<CMatrix> {
        let spec = SubproblemSpec { channels: self.channels.to_vec(), linear_term: c, constraint: self.kind, rho };
        match solve_subproblem_with(&spec, Some(warm), &self.cfg.sdp) {
            Ok(sol) if sol.status == SolveStatus::Optimal => Some(sol.v),
            Ok(sol) => {
                log::warn!("subproblem ended with status {:?} (gap {:e})", sol.status, sol.residuals.gap);
                if sol.status == SolveStatus::Infeasible {
                    self.failed = true;
                    None
                } else {
                    Some(sol.v)
                }
            }
            Err(e) => {
                log::warn!("subproblem failed: {e}");
                self.failed = true;
                None
            }
        }
    }

    /// Inner SCA loop at a fixed absolute penalty. Returns the last accepted iterate.
    fn sca(&mut self, mut v: CMatrix, rho: f64, round: usize) -> Result<CMatrix> {
        let mut prev = None;
        for _ in 0..self.cfg.max_sca_iters {
            let top = top_eigenpair(&v)?;
            let s = &top.vector;
            let sigma = top.value;
            let t_cur = min_sample_power(self.channels, &v);
            let stay = t_cur - rho * (v.trace().re - sigma);
            let prev_value = *prev.get_or_insert(stay);

            let next = match self.solve(CMatrix::outer(s, s), rho, &v) {
                Some(n) => n,
                None => break,
            };
            let t_next = min_sample_power(self.channels, &next);
            let fhat = next.trace().re - sigma - (next.quad_form(s) - v.quad_form(s));
            let surrogate = t_next - rho * fhat;
            if surrogate < stay {
                // The subproblem solve was not accurate enough to improve on the current point.
                break;
            }
            v = next;
            self.log.push(TraceEntry {
                iteration: self.log.len(),
                round,
                rho,
                t: t_next,
                surrogate,
                rank_gap: rank_gap(&v)?,
            });
            let change = (surrogate - prev_value).abs() / surrogate.abs().max(f64::MIN_POSITIVE);
            prev = Some(surrogate);
            if change < self.cfg.obj_tol {
                break;
            }
        }
        Ok(v)
    }
}

/// Runs the penalty/SCA loop and extracts a rank-one beamformer.
pub fn solve_maxmin(h: &ChannelMatrix, cfg: &SolverConfig, v0: Option<&CMatrix>) -> Result<(Beamformer, SolverState)> {
    cfg.validate()?;
    let n = h.num_antennas();
    let m = h.num_points();
    if n == 0 || m == 0 {
        return Err(invalid("channels", "need at least one antenna and one sample"));
    }
    let channels: Vec<Vec<C64>> = h.rows().iter().map(|r| r.gains.clone()).collect();
    let start = match v0 {
        Some(v) if v.rows() == n && v.cols() == n => v.clone(),
        Some(v) => return Err(Error::DimensionMismatch { expected: n, found: v.rows() }),
        None => initial_v(n),
    };
    let mut run = Run { channels: &channels, cfg, kind: constraint_kind(cfg.scheme), log: Vec::new(), failed: false };

    // Round 0: the plain relaxation. Its optimum bounds every rank-one design.
    let relaxed = run.solve(CMatrix::zeros(n, n), 0.0, &start);
    let mut v = match relaxed {
        Some(v) => v,
        None => start.clone(),
    };
    let sdr_bound = min_sample_power(&channels, &v);
    let power_scale = if sdr_bound > 0.0 {
        sdr_bound
    } else {
        channels.iter().map(|c| crate::linalg::norm2_sqr(c)).fold(0.0, f64::max).max(f64::MIN_POSITIVE)
    };
    run.log.push(TraceEntry {
        iteration: 0,
        round: 0,
        rho: 0.0,
        t: sdr_bound,
        surrogate: sdr_bound,
        rank_gap: rank_gap(&v)?,
    });

    let closed = |v: &CMatrix| -> Result<bool> { Ok(rank_gap(v)? <= cfg.rank_gap_tol * v.trace().re) };

    let mut rho_rel = if cfg.rho_init > 0.0 { cfg.rho_init } else { cfg.rho_restart };
    let mut rounds = 0;
    let mut status = MaxMinStatus::RankGapOpen;
    if run.failed {
        status = MaxMinStatus::SubproblemFailed;
    } else if cfg.rho_init == 0.0 && closed(&v)? {
        status = MaxMinStatus::Optimal;
        rho_rel = 0.0;
    } else {
        for round in 1..=cfg.max_penalty_rounds {
            rounds = round;
            v = run.sca(v, rho_rel * power_scale, round)?;
            if run.failed {
                status = MaxMinStatus::SubproblemFailed;
                break;
            }
            if closed(&v)? {
                status = MaxMinStatus::Optimal;
                break;
            }
            if round < cfg.max_penalty_rounds {
                rho_rel *= cfg.rho_growth;
            }
        }
    }

    let (w, degenerate) = extract_with_flag(&v, cfg.scheme)?;
    let t = min_sample_power(&channels, &v);
    let state =
        SolverState { v, t, rho: rho_rel, power_scale, sdr_bound, trace_log: run.log, status, rounds, degenerate };
    Ok((w, state))
}
