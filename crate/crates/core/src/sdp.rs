//! Convex subproblem of the max-min design:
//!
//! ```text
//! maximize    t + rho * Re Tr(C V) - rho * Tr(V)
//! subject to  h_m^H V h_m >= t          for every sample m
//!             V(n, n) = 1/N   (ABF)   or   Tr(V) = 1   (DBF)
//!             V Hermitian positive semidefinite
//! ```
//!
//! Solved by an infeasible primal-dual path-following method on the complex
//! Hermitian cone (HKM search direction, Mehrotra predictor-corrector). The
//! sample constraints carry a nonnegative slack and `t` is kept as a free
//! variable, which turns into the dual equality `sum_m y_m = 1`. Every
//! constraint matrix is rank one or diagonal, so the Schur complement is
//! assembled from `X h_m` and `Z^{-1} h_m` products instead of full
//! `A_i X A_j Z^{-1}` traces.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::linalg::{cholesky, dot, eigvalsh, hpd_inverse, lower_inverse, norm2_sqr, CMatrix, RealCholesky, C64};

/// Equality constraint on the diagonal of `V`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    /// `V(n, n) = 1/N` for every `n` (analog beamforming).
    DiagEqual,
    /// `Tr(V) = 1` (digital beamforming).
    TraceEqual,
}

#[derive(Clone, Debug)]
pub struct SubproblemSpec {
    /// Channel vectors `h_m`; the constraint matrices are `R_m = h_m h_m^H`.
    pub channels: Vec<Vec<C64>>,
    /// Hermitian linear term `C`.
    pub linear_term: CMatrix,
    pub constraint: ConstraintKind,
    pub rho: f64,
}

impl SubproblemSpec {
    pub fn num_antennas(&self) -> usize {
        self.linear_term.rows()
    }

    pub fn r_matrix(&self, m: usize) -> CMatrix {
        CMatrix::outer(&self.channels[m], &self.channels[m])
    }

    /// `t + rho Re Tr(C V) - rho Tr(V)` with the best `t` for this `V`.
    pub fn objective(&self, v: &CMatrix) -> f64 {
        let t = min_sample_power(&self.channels, v);
        t + self.rho * (self.linear_term.re_trace_product(v) - v.trace().re)
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_antennas();
        if n == 0 {
            return Err(invalid("linear_term", "empty matrix"));
        }
        if !self.linear_term.is_square() {
            return Err(Error::DimensionMismatch { expected: n, found: self.linear_term.cols() });
        }
        if self.channels.is_empty() {
            return Err(invalid("channels", "need at least one sample"));
        }
        if let Some(h) = self.channels.iter().find(|h| h.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: h.len() });
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(invalid("rho", "must be finite and nonnegative"));
        }
        let dev = self.linear_term.max_hermitian_deviation();
        if dev > 1e-10 * (1.0 + self.linear_term.frobenius_norm()) {
            return Err(Error::NotHermitian { deviation: dev });
        }
        Ok(())
    }
}

/// `min_m h_m^H V h_m`.
pub fn min_sample_power(channels: &[Vec<C64>], v: &CMatrix) -> f64 {
    channels.iter().map(|h| v.quad_form(h)).fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    /// Numerical breakdown; the best iterate so far is returned.
    Infeasible,
}

/// Scaled residuals of the returned point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    /// Duality gap relative to `1 + |primal objective| + |dual objective|`.
    pub gap: f64,
}

#[derive(Clone, Debug)]
pub struct SubproblemSolution {
    pub v: CMatrix,
    /// `min_m Tr(R_m V)`.
    pub t: f64,
    pub objective: f64,
    pub status: SolveStatus,
    pub residuals: Residuals,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdpSettings {
    pub gap_tol: f64,
    pub feas_tol: f64,
    /// Gap accepted as optimal when the iteration stalls.
    pub accept_gap: f64,
    pub max_iterations: usize,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self { gap_tol: 1e-10, feas_tol: 1e-9, accept_gap: 1e-6, max_iterations: 200 }
    }
}

pub fn solve_subproblem(spec: &SubproblemSpec, warm_start: Option<&CMatrix>) -> Result<SubproblemSolution> {
    solve_subproblem_with(spec, warm_start, &SdpSettings::default())
}

pub fn solve_subproblem_with(
    spec: &SubproblemSpec,
    warm_start: Option<&CMatrix>,
    settings: &SdpSettings,
) -> Result<SubproblemSolution> {
    spec.validate()?;
    let n = spec.num_antennas();

    // Normalize so the strongest sample has unit channel energy.
    let scale = spec.channels.iter().map(|h| norm2_sqr(h)).fold(0.0, f64::max);
    let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
    let inv_sqrt = 1.0 / libm::sqrt(scale);
    let g: Vec<Vec<C64>> = spec.channels.iter().map(|h| h.iter().map(|c| c * inv_sqrt).collect()).collect();
    let rho = spec.rho / scale;
    let mut cost = CMatrix::identity(n);
    cost.add_scaled(-1.0, &spec.linear_term.hermitian_part());
    cost.scale_mut(rho);

    let problem = Ipm { n, g, cost, kind: spec.constraint };
    let start = warm_start.filter(|v| v.rows() == n && v.cols() == n);
    let raw = problem.run(start, settings);

    let (x, iterations, status, residuals) = raw?;
    let v = snap_to_constraints(&x, spec.constraint);
    let t = min_sample_power(&spec.channels, &v);
    let objective = t + spec.rho * (spec.linear_term.re_trace_product(&v) - v.trace().re);
    Ok(SubproblemSolution { v, t, objective, status, residuals, iterations })
}

/// Hermitian part, rescaled to satisfy the equality constraints exactly.
fn snap_to_constraints(x: &CMatrix, kind: ConstraintKind) -> CMatrix {
    let mut v = x.hermitian_part();
    let n = v.rows();
    match kind {
        ConstraintKind::DiagEqual => {
            let d: Vec<f64> = (0..n)
                .map(|i| {
                    let vii = v[(i, i)].re;
                    if vii > 0.0 {
                        1.0 / libm::sqrt(vii * n as f64)
                    } else {
                        1.0
                    }
                })
                .collect();
            for i in 0..n {
                for j in 0..n {
                    v[(i, j)] *= d[i] * d[j];
                }
                v[(i, i)] = C64::new(1.0 / n as f64, 0.0);
            }
        }
        ConstraintKind::TraceEqual => {
            let tr = v.trace().re;
            if tr > 0.0 {
                v.scale_mut(1.0 / tr);
            }
        }
    }
    v
}

struct Ipm {
    n: usize,
    /// Normalized channels.
    g: Vec<Vec<C64>>,
    /// Minimization cost on `V` (the objective is `<cost, V> - t`).
    cost: CMatrix,
    kind: ConstraintKind,
}

#[derive(Clone)]
struct Iterate {
    x: CMatrix,
    w: Vec<f64>,
    t: f64,
    y: Vec<f64>,
    z_mat: CMatrix,
    z: Vec<f64>,
}

struct Direction {
    dx: CMatrix,
    dw: Vec<f64>,
    dt: f64,
    dy: Vec<f64>,
    dz_mat: CMatrix,
    dz: Vec<f64>,
}

type RunOutput = (CMatrix, usize, SolveStatus, Residuals);

impl Ipm {
    fn m(&self) -> usize {
        self.g.len()
    }

    fn num_eq(&self) -> usize {
        match self.kind {
            ConstraintKind::DiagEqual => self.n,
            ConstraintKind::TraceEqual => 1,
        }
    }

    fn b_eq(&self) -> f64 {
        match self.kind {
            ConstraintKind::DiagEqual => 1.0 / self.n as f64,
            ConstraintKind::TraceEqual => 1.0,
        }
    }

    /// `A(K)`: sample rows `Re h^H K h`, then the equality rows.
    fn apply_a(&self, k: &CMatrix) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.m() + self.num_eq());
        for h in &self.g {
            out.push(dot(h, &k.mul_vec(h)).re);
        }
        match self.kind {
            ConstraintKind::DiagEqual => out.extend((0..self.n).map(|i| k[(i, i)].re)),
            ConstraintKind::TraceEqual => out.push(k.trace().re),
        }
        out
    }

    /// `A^*(y) = sum_m y_m h_m h_m^H + diag(y_eq)` (or `y_eq I`).
    fn apply_at(&self, y: &[f64]) -> CMatrix {
        let n = self.n;
        let mut out = CMatrix::zeros(n, n);
        for (h, &ym) in self.g.iter().zip(y) {
            if ym == 0.0 {
                continue;
            }
            for i in 0..n {
                let hi = h[i] * ym;
                for j in 0..n {
                    out[(i, j)] += hi * h[j].conj();
                }
            }
        }
        let m = self.m();
        match self.kind {
            ConstraintKind::DiagEqual => {
                for i in 0..n {
                    out[(i, i)].re += y[m + i];
                }
            }
            ConstraintKind::TraceEqual => out.add_diag(y[m]),
        }
        out
    }

    fn initial_point(&self, warm: Option<&CMatrix>) -> Result<Iterate> {
        let n = self.n;
        let m = self.m();
        let mut x = CMatrix::identity(n);
        x.scale_mut(1.0 / n as f64);
        if let Some(v) = warm {
            // Blend a feasible warm start with the analytic center of the constraint set.
            let feasible = match self.kind {
                ConstraintKind::DiagEqual => (0..n).all(|i| (v[(i, i)].re - 1.0 / n as f64).abs() < 1e-6 / n as f64),
                ConstraintKind::TraceEqual => (v.trace().re - 1.0).abs() < 1e-6,
            };
            if feasible && v.max_hermitian_deviation() < 1e-8 {
                x.scale_mut(0.5);
                x.add_scaled(0.5, &v.hermitian_part());
            }
        }

        let y_samples = 1.0 / m as f64;
        let mut base = self.cost.clone();
        let mut yy = vec![0.0; m + self.num_eq()];
        yy[..m].iter_mut().for_each(|v| *v = y_samples);
        base.add_scaled(-1.0, &self.apply_at(&yy));
        let eig = eigvalsh(&base)?;
        let (lo, hi) = (eig[0], eig[n - 1]);
        let eta = (hi - 2.0 * lo).max(-lo + 1e-3 * (1.0 + hi.abs())).max(1e-3);
        let mut z_mat = base;
        z_mat.add_diag(eta);
        for v in &mut yy[m..] {
            *v = -eta;
        }

        let a = self.apply_a(&x);
        let a_min = a[..m].iter().cloned().fold(f64::INFINITY, f64::min);
        let tau = (m as f64 * eta / n as f64).max(1e-6);
        let t = a_min - tau;
        let w: Vec<f64> = a[..m].iter().map(|am| am - t).collect();
        let z = vec![y_samples; m];
        Ok(Iterate { x, w, t, y: yy, z_mat, z })
    }

    fn run(&self, warm: Option<&CMatrix>, settings: &SdpSettings) -> Result<RunOutput> {
        let n = self.n;
        let m = self.m();
        let neq = self.num_eq();
        let dim = m + neq;
        let nu = (n + m) as f64;
        let mut it = self.initial_point(warm)?;
        let b_eq = self.b_eq();
        let cost_norm = 1.0 + self.cost.frobenius_norm();

        let mut best: Option<(CMatrix, Residuals)> = None;
        let mut status = SolveStatus::MaxIterations;
        let mut iterations = 0;

        for iter in 0..settings.max_iterations {
            iterations = iter;
            // Residuals.
            let ax = self.apply_a(&it.x);
            let mut r_p = vec![0.0; dim];
            for i in 0..m {
                r_p[i] = -ax[i] + it.w[i] + it.t;
            }
            for i in m..dim {
                r_p[i] = b_eq - ax[i];
            }
            let mut r_d = self.cost.clone();
            r_d.add_scaled(-1.0, &self.apply_at(&it.y));
            r_d.add_scaled(-1.0, &it.z_mat);
            let r_z: Vec<f64> = (0..m).map(|i| it.y[i] - it.z[i]).collect();
            let r_t = 1.0 - it.y[..m].iter().sum::<f64>();

            let xz = it.x.re_trace_product(&it.z_mat);
            let wz: f64 = it.w.iter().zip(&it.z).map(|(a, b)| a * b).sum();
            let mu = (xz + wz) / nu;
            let pobj = self.cost.re_trace_product(&it.x) - it.t;
            let dobj = b_eq * it.y[m..].iter().sum::<f64>();
            let gap = (xz + wz).max((pobj - dobj).abs()) / (1.0 + pobj.abs() + dobj.abs());
            let pinf = libm::sqrt(r_p.iter().map(|v| v * v).sum::<f64>()) / (1.0 + b_eq * libm::sqrt(neq as f64));
            let dinf = (r_d.frobenius_norm() + libm::sqrt(norm_sq(&r_z)) + r_t.abs()) / cost_norm;
            let res = Residuals { primal: pinf, dual: dinf, gap };
            if best.as_ref().is_none_or(|(_, r)| score(&res) <= score(r)) {
                best = Some((it.x.clone(), res));
            }
            if gap <= settings.gap_tol && pinf <= settings.feas_tol && dinf <= settings.feas_tol {
                status = SolveStatus::Optimal;
                break;
            }

            let z_inv = match hpd_inverse(&it.z_mat) {
                Some(v) => v,
                None => {
                    status = SolveStatus::Infeasible;
                    break;
                }
            };
            let schur = match self.schur(&it, &z_inv) {
                Some(s) => s,
                None => {
                    status = SolveStatus::Infeasible;
                    break;
                }
            };
            let mut e = vec![0.0; dim];
            e[..m].iter_mut().for_each(|v| *v = 1.0);
            let s_inv_e = schur.solve(&e);
            let e_s_e: f64 = s_inv_e[..m].iter().sum();
            let x_rd_zinv = it.x.matmul(&r_d).matmul(&z_inv).hermitian_part();

            let ctx = StepContext {
                it: &it,
                z_inv: &z_inv,
                schur: &schur,
                s_inv_e: &s_inv_e,
                e_s_e,
                r_p: &r_p,
                r_d: &r_d,
                r_z: &r_z,
                r_t,
                x_rd_zinv: &x_rd_zinv,
            };

            // Predictor.
            let zero_g = vec![0.0; m];
            let pred = self.direction(&ctx, None, &zero_g);
            let (ap, ad) = match (self.max_step_primal(&it, &pred), self.max_step_dual(&it, &pred)) {
                (Some(ap), Some(ad)) => (ap.min(1.0), ad.min(1.0)),
                _ => {
                    status = SolveStatus::Infeasible;
                    break;
                }
            };
            let mut xa = it.x.clone();
            xa.add_scaled(ap, &pred.dx);
            let mut za = it.z_mat.clone();
            za.add_scaled(ad, &pred.dz_mat);
            let wz_aff: f64 = (0..m).map(|i| (it.w[i] + ap * pred.dw[i]) * (it.z[i] + ad * pred.dz[i])).sum();
            let mu_aff = (xa.re_trace_product(&za) + wz_aff) / nu;
            let sigma = libm::pow((mu_aff / mu).clamp(0.0, 1.0), 3.0);

            // Corrector.
            let mut comp = pred.dx.matmul(&pred.dz_mat);
            comp.scale_mut(-1.0);
            comp.add_diag(sigma * mu);
            let g_lp: Vec<f64> = (0..m).map(|i| sigma * mu - pred.dw[i] * pred.dz[i]).collect();
            let dir = self.direction(&ctx, Some(&comp), &g_lp);
            let (ap, ad) = match (self.max_step_primal(&it, &dir), self.max_step_dual(&it, &dir)) {
                (Some(ap), Some(ad)) => (ap, ad),
                _ => {
                    status = SolveStatus::Infeasible;
                    break;
                }
            };
            let gamma = 0.9 + 0.09 * ap.min(ad).min(1.0);
            let ap = (gamma * ap).min(1.0);
            let ad = (gamma * ad).min(1.0);
            if ap < 1e-12 && ad < 1e-12 {
                status = if gap <= settings.accept_gap { SolveStatus::Optimal } else { SolveStatus::Infeasible };
                break;
            }

            it.x.add_scaled(ap, &dir.dx);
            it.x = it.x.hermitian_part();
            for i in 0..m {
                it.w[i] += ap * dir.dw[i];
            }
            it.t += ap * dir.dt;
            for i in 0..dim {
                it.y[i] += ad * dir.dy[i];
            }
            it.z_mat.add_scaled(ad, &dir.dz_mat);
            it.z_mat = it.z_mat.hermitian_part();
            for i in 0..m {
                it.z[i] += ad * dir.dz[i];
            }
            iterations = iter + 1;
        }

        let (x, res) = best.ok_or(Error::NumericalBreakdown("interior-point method produced no iterate"))?;
        if status != SolveStatus::Optimal && res.gap <= settings.accept_gap && res.primal <= 1e-7 && res.dual <= 1e-7 {
            status = SolveStatus::Optimal;
        }
        Ok((x, iterations, status, res))
    }

    /// HKM Schur complement `Re Tr(A_i X A_j Z^{-1})` plus the slack block.
    fn schur(&self, it: &Iterate, z_inv: &CMatrix) -> Option<RealCholesky> {
        let n = self.n;
        let m = self.m();
        let dim = m + self.num_eq();
        let xh: Vec<Vec<C64>> = self.g.iter().map(|h| it.x.mul_vec(h)).collect();
        let zh: Vec<Vec<C64>> = self.g.iter().map(|h| z_inv.mul_vec(h)).collect();
        let mut s = vec![0.0; dim * dim];
        for a in 0..m {
            for b in a..m {
                // (h_a^H X h_b)(h_b^H Z^{-1} h_a)
                let v = (dot(&self.g[a], &xh[b]) * dot(&self.g[b], &zh[a])).re;
                s[a * dim + b] = v;
                s[b * dim + a] = v;
            }
            s[a * dim + a] += it.w[a] / it.z[a];
        }
        match self.kind {
            ConstraintKind::DiagEqual => {
                for a in 0..m {
                    for k in 0..n {
                        let v = (xh[a][k].conj() * zh[a][k]).re;
                        s[a * dim + m + k] = v;
                        s[(m + k) * dim + a] = v;
                    }
                }
                for k in 0..n {
                    for l in 0..n {
                        s[(m + k) * dim + m + l] = (it.x[(k, l)] * z_inv[(l, k)]).re;
                    }
                }
            }
            ConstraintKind::TraceEqual => {
                for a in 0..m {
                    let v = dot(&xh[a], &zh[a]).re;
                    s[a * dim + m] = v;
                    s[m * dim + a] = v;
                }
                s[m * dim + m] = it.x.re_trace_product(z_inv);
            }
        }
        if let Some(f) = RealCholesky::factor(&s, dim) {
            return Some(f);
        }
        let max_diag = (0..dim).map(|i| s[i * dim + i].abs()).fold(0.0, f64::max);
        for i in 0..dim {
            s[i * dim + i] += 1e-13 * max_diag.max(f64::MIN_POSITIVE);
        }
        RealCholesky::factor(&s, dim)
    }

    fn direction(&self, ctx: &StepContext<'_>, comp: Option<&CMatrix>, g_lp: &[f64]) -> Direction {
        let m = self.m();
        let dim = m + self.num_eq();
        let it = ctx.it;

        // K1 = sym(G Z^{-1}) - X - sym(X R_d Z^{-1})
        let mut k1 = match comp {
            Some(gm) => gm.matmul(ctx.z_inv).hermitian_part(),
            None => CMatrix::zeros(self.n, self.n),
        };
        k1.add_scaled(-1.0, &it.x);
        k1.add_scaled(-1.0, ctx.x_rd_zinv);

        let ak1 = self.apply_a(&k1);
        let mut rhs = vec![0.0; dim];
        for i in 0..dim {
            rhs[i] = ctx.r_p[i] - ak1[i];
        }
        for i in 0..m {
            rhs[i] += (g_lp[i] - it.w[i] * it.z[i] + it.w[i] * ctx.r_z[i]) / it.z[i];
        }
        let s_inv_rhs = ctx.schur.solve(&rhs);
        let e_s_rhs: f64 = s_inv_rhs[..m].iter().sum();
        let dt = (ctx.r_t - e_s_rhs) / ctx.e_s_e;
        let dy: Vec<f64> = (0..dim).map(|i| s_inv_rhs[i] + ctx.s_inv_e[i] * dt).collect();

        let mut dz_mat = ctx.r_d.clone();
        dz_mat.add_scaled(-1.0, &self.apply_at(&dy));
        let mut dx = match comp {
            Some(gm) => gm.matmul(ctx.z_inv).hermitian_part(),
            None => CMatrix::zeros(self.n, self.n),
        };
        dx.add_scaled(-1.0, &it.x);
        dx.add_scaled(-1.0, &it.x.matmul(&dz_mat).matmul(ctx.z_inv).hermitian_part());

        let dz: Vec<f64> = (0..m).map(|i| dy[i] - ctx.r_z[i]).collect();
        let dw: Vec<f64> = (0..m).map(|i| (g_lp[i] - it.w[i] * it.z[i] - it.w[i] * dz[i]) / it.z[i]).collect();
        Direction { dx, dw, dt, dy, dz_mat, dz }
    }

    fn max_step_primal(&self, it: &Iterate, d: &Direction) -> Option<f64> {
        Some(psd_step(&it.x, &d.dx)?.min(lp_step(&it.w, &d.dw)))
    }

    fn max_step_dual(&self, it: &Iterate, d: &Direction) -> Option<f64> {
        Some(psd_step(&it.z_mat, &d.dz_mat)?.min(lp_step(&it.z, &d.dz)))
    }
}

struct StepContext<'a> {
    it: &'a Iterate,
    z_inv: &'a CMatrix,
    schur: &'a RealCholesky,
    s_inv_e: &'a [f64],
    e_s_e: f64,
    r_p: &'a [f64],
    r_d: &'a CMatrix,
    r_z: &'a [f64],
    r_t: f64,
    x_rd_zinv: &'a CMatrix,
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn score(r: &Residuals) -> f64 {
    r.gap.max(r.primal).max(r.dual)
}

/// Largest `alpha` keeping `X + alpha dX` positive semidefinite.
fn psd_step(x: &CMatrix, dx: &CMatrix) -> Option<f64> {
    let l = cholesky(x)?;
    let linv = lower_inverse(&l);
    let m = linv.matmul(dx).matmul(&linv.adjoint());
    let lam = eigvalsh(&m).ok()?;
    let lo = lam[0];
    Some(if lo < 0.0 { -1.0 / lo } else { f64::INFINITY })
}

fn lp_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter().zip(dv).filter(|(_, d)| **d < 0.0).map(|(a, d)| -a / d).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigh;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
    }

    fn random_channels(n: usize, m: usize, seed: u64) -> Vec<Vec<C64>> {
        let mut s = seed;
        (0..m).map(|_| (0..n).map(|_| C64::new(lcg(&mut s), lcg(&mut s))).collect()).collect()
    }

    fn spec(channels: Vec<Vec<C64>>, kind: ConstraintKind, rho: f64, c: Option<CMatrix>) -> SubproblemSpec {
        let n = channels[0].len();
        SubproblemSpec { channels, linear_term: c.unwrap_or_else(|| CMatrix::zeros(n, n)), constraint: kind, rho }
    }

    fn check_invariants(sol: &SubproblemSolution, sp: &SubproblemSpec) {
        let n = sp.num_antennas();
        assert!(sol.v.max_hermitian_deviation() <= 1e-10);
        let lam = eigh(&sol.v).unwrap().values;
        assert!(lam[0] >= -1e-8, "min eigenvalue {}", lam[0]);
        match sp.constraint {
            ConstraintKind::DiagEqual => {
                for i in 0..n {
                    assert!((sol.v[(i, i)].re - 1.0 / n as f64).abs() <= 1e-7);
                }
            }
            ConstraintKind::TraceEqual => assert!((sol.v.trace().re - 1.0).abs() <= 1e-7),
        }
        for h in &sp.channels {
            assert!(sol.v.quad_form(h) >= sol.t - 1e-7 * (1.0 + sol.t.abs()));
        }
    }

    #[test]
    fn single_antenna_abf() {
        let h = vec![vec![C64::new(0.3, -0.4)]];
        let sp = spec(h, ConstraintKind::DiagEqual, 0.0, None);
        let sol = solve_subproblem(&sp, None).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.v[(0, 0)].re - 1.0).abs() < 1e-12);
        assert!((sol.t - 0.25).abs() < 1e-12);
    }

    #[test]
    fn single_point_dbf_is_rayleigh_quotient() {
        let h = random_channels(6, 1, 11);
        let energy = norm2_sqr(&h[0]);
        let sp = spec(h, ConstraintKind::TraceEqual, 0.0, None);
        let sol = solve_subproblem(&sp, None).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.t - energy).abs() <= 1e-7 * energy, "{} vs {}", sol.t, energy);
        check_invariants(&sol, &sp);
    }

    #[test]
    fn single_point_abf_relaxation_is_tight() {
        // One constraint: the SDR optimum is the co-phased power (sum |h_n|)^2 / N.
        let h = random_channels(5, 1, 5);
        let l1: f64 = h[0].iter().map(|c| c.norm()).sum();
        let sp = spec(h, ConstraintKind::DiagEqual, 0.0, None);
        let sol = solve_subproblem(&sp, None).unwrap();
        let expected = l1 * l1 / 5.0;
        assert!((sol.t - expected).abs() <= 1e-7 * expected);
        check_invariants(&sol, &sp);
    }

    #[test]
    fn invariants_on_random_instances() {
        for (seed, kind, rho) in [
            (1, ConstraintKind::DiagEqual, 0.0),
            (2, ConstraintKind::TraceEqual, 0.0),
            (3, ConstraintKind::DiagEqual, 0.5),
            (4, ConstraintKind::TraceEqual, 2.0),
        ] {
            let h = random_channels(8, 12, seed);
            let s = &h[0];
            let nrm = libm::sqrt(norm2_sqr(s));
            let unit: Vec<C64> = s.iter().map(|c| c / nrm).collect();
            let sp = spec(h.clone(), kind, rho, Some(CMatrix::outer(&unit, &unit)));
            let sol = solve_subproblem(&sp, None).unwrap();
            assert_eq!(sol.status, SolveStatus::Optimal, "seed {seed}");
            check_invariants(&sol, &sp);
            assert!(sol.residuals.gap <= 1e-6);
        }
    }

    #[test]
    fn zero_rho_t_is_min_power() {
        let h = random_channels(6, 9, 77);
        let sp = spec(h.clone(), ConstraintKind::DiagEqual, 0.0, None);
        let sol = solve_subproblem(&sp, None).unwrap();
        let direct = min_sample_power(&h, &sol.v);
        assert!((sol.t - direct).abs() <= 1e-6 * direct);
    }

    #[test]
    fn adding_a_sample_cannot_raise_t() {
        let h = random_channels(6, 10, 99);
        let few = solve_subproblem(&spec(h[..6].to_vec(), ConstraintKind::DiagEqual, 0.0, None), None).unwrap();
        let all = solve_subproblem(&spec(h, ConstraintKind::DiagEqual, 0.0, None), None).unwrap();
        assert!(all.t <= few.t * (1.0 + 1e-7));
    }

    #[test]
    fn diagonal_phase_rotation_maps_solutions() {
        let h = random_channels(5, 7, 21);
        let phases = [0.3, -1.2, 2.5, 0.0, 1.7];
        let rotated: Vec<Vec<C64>> =
            h.iter().map(|hm| hm.iter().zip(&phases).map(|(c, p)| c * C64::from_polar(1.0, *p)).collect()).collect();
        let a = solve_subproblem(&spec(h, ConstraintKind::DiagEqual, 0.0, None), None).unwrap();
        let b = solve_subproblem(&spec(rotated.clone(), ConstraintKind::DiagEqual, 0.0, None), None).unwrap();
        assert!((a.objective - b.objective).abs() <= 1e-6 * a.objective.abs());
        // D V* D^H is optimal for the rotated problem.
        let d =
            CMatrix::from_fn(5, 5, |i, j| if i == j { C64::from_polar(1.0, phases[i]) } else { C64::new(0.0, 0.0) });
        let mapped = d.matmul(&a.v).matmul(&d.adjoint());
        let t_mapped = min_sample_power(&rotated, &mapped);
        assert!((t_mapped - b.t).abs() <= 1e-6 * b.t);
    }

    #[test]
    fn warm_start_does_not_change_the_optimum() {
        let h = random_channels(6, 8, 8);
        let sp = spec(h, ConstraintKind::DiagEqual, 0.0, None);
        let cold = solve_subproblem(&sp, None).unwrap();
        let warm = solve_subproblem(&sp, Some(&cold.v)).unwrap();
        assert!((cold.t - warm.t).abs() <= 1e-7 * cold.t);
    }

    #[test]
    fn rejects_malformed_specs() {
        let h = random_channels(3, 2, 1);
        let mut sp = spec(h.clone(), ConstraintKind::DiagEqual, -1.0, None);
        assert!(solve_subproblem(&sp, None).is_err());
        sp.rho = 0.0;
        sp.linear_term = CMatrix::zeros(4, 4);
        assert!(solve_subproblem(&sp, None).is_err());
        let mut c = CMatrix::zeros(3, 3);
        c[(0, 1)] = C64::new(1.0, 0.0);
        sp.linear_term = c;
        assert!(matches!(solve_subproblem(&sp, None), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn fully_blocked_sample_forces_zero() {
        let mut h = random_channels(4, 3, 4);
        h[1] = vec![C64::new(0.0, 0.0); 4];
        let sol = solve_subproblem(&spec(h, ConstraintKind::DiagEqual, 0.0, None), None).unwrap();
        assert!(sol.t.abs() <= 1e-8);
    }
}
