//! Multi-view subspace clustering by ADMM: per-view self-representation
//! with column-sparse error, a low-rank representation tensor fitted by
//! the adaptive network inside the S subproblem, and monotone penalty
//! schedules on both constraint blocks.

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{als_fit, attn_decompose, AlsOptions, AttnConfig};
use crate::tensor::DenseTensor;
use crate::topology::FactorSet;

/// A multi-view problem: per-view feature matrices (features x samples),
/// the target cluster count, and the 4-way split of the sample axis used
/// when lifting the representation tensor to 5th order.
#[derive(Debug, Clone)]
pub struct MscProblem {
    pub views: Vec<DMatrix<f64>>,
    pub n_clusters: usize,
    pub reshape_dims: [usize; 4],
}

impl MscProblem {
    pub fn new(
        views: Vec<DMatrix<f64>>,
        n_clusters: usize,
        reshape_dims: Option<[usize; 4]>,
    ) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::InvalidArgument("at least one view required".into()));
        }
        let samples = views[0].ncols();
        if samples == 0 {
            return Err(Error::InvalidArgument("views have no samples".into()));
        }
        for (v, x) in views.iter().enumerate() {
            if x.ncols() != samples {
                return Err(Error::ShapeMismatch(format!(
                    "view {v} has {} samples, view 0 has {samples}",
                    x.ncols()
                )));
            }
        }
        if n_clusters == 0 || n_clusters > samples {
            return Err(Error::InvalidArgument(format!(
                "cluster count {n_clusters} out of range for {samples} samples"
            )));
        }
        let dims = match reshape_dims {
            Some(d) => d,
            None => choose_reshape_dims(samples, n_clusters),
        };
        if dims[0] * dims[1] != samples || dims[2] * dims[3] != samples {
            return Err(Error::ShapeMismatch(format!(
                "reshape dims {dims:?} do not factor the sample count {samples}"
            )));
        }
        Ok(Self {
            views,
            n_clusters,
            reshape_dims: dims,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.views[0].ncols()
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    fn five_d_shape(&self) -> Vec<usize> {
        vec![
            self.reshape_dims[0],
            self.reshape_dims[1],
            self.reshape_dims[2],
            self.reshape_dims[3],
            self.n_views(),
        ]
    }
}

/// Splits the sample axis: prefer a factor pair containing the cluster
/// count when it divides the sample count, otherwise the divisor pair
/// closest to square. Both halves of the 4-way split use the same pair.
pub fn choose_reshape_dims(samples: usize, n_clusters: usize) -> [usize; 4] {
    if n_clusters >= 1 && samples % n_clusters == 0 {
        let per = samples / n_clusters;
        return [n_clusters, per, n_clusters, per];
    }
    let mut best = (1usize, samples);
    for a in 1..=samples {
        if a * a > samples {
            break;
        }
        if samples % a == 0 {
            best = (a, samples / a);
        }
    }
    [best.0, best.1, best.0, best.1]
}

/// How the low-rank representation S is produced each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SUpdate {
    /// Adaptive tensor-network fit (the real model).
    Network,
    /// `S = Z + W/rho` exactly; infinite-capacity diagnostic that isolates
    /// the ADMM plumbing from the network fit.
    PassThrough,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MscConfig {
    /// Weight on the column-sparse error term.
    pub lambda: f64,
    pub mu0: f64,
    pub rho0: f64,
    pub eta: f64,
    pub tol: f64,
    pub mu_max: f64,
    pub rho_max: f64,
    pub iter_max: usize,
    /// Full topology re-learn happens on iterations 1, 1+interval, ...;
    /// every other iteration refits only the cached topology's values.
    pub topology_refresh_interval: usize,
    pub s_update: SUpdate,
    pub attn: AttnConfig,
}

impl Default for MscConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            mu0: 1e-5,
            rho0: 1e-4,
            eta: 2.0,
            tol: 1e-7,
            mu_max: 1e10,
            rho_max: 1e10,
            iter_max: 200,
            topology_refresh_interval: 5,
            s_update: SUpdate::Network,
            attn: AttnConfig {
                epsilon: 0.3,
                tol_als: 1e-9,
                iter_max_als: 60,
                iter_max_inc: 8,
                fit_restarts: 4,
                restart_sweeps: 30,
                max_rank: 6,
                ..AttnConfig::default()
            },
        }
    }
}

impl MscConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 {
            return Err(Error::InvalidArgument("lambda must be >= 0".into()));
        }
        if self.mu0 <= 0.0 || self.rho0 <= 0.0 || self.tol <= 0.0 {
            return Err(Error::InvalidArgument(
                "mu0, rho0 and tol must be positive".into(),
            ));
        }
        if self.eta <= 1.0 {
            return Err(Error::InvalidArgument("eta must exceed 1".into()));
        }
        if self.topology_refresh_interval == 0 {
            return Err(Error::InvalidArgument(
                "topology_refresh_interval must be >= 1".into(),
            ));
        }
        self.attn.validate()
    }
}

/// All mutable ADMM state.
#[derive(Debug, Clone)]
pub struct AdmmState {
    /// Per-view self-representation, samples x samples.
    pub z: Vec<DMatrix<f64>>,
    /// Column-sparse error, stacked over views (sum of feature dims rows).
    pub e: DMatrix<f64>,
    /// Per-view multipliers on the reconstruction constraint.
    pub y: Vec<DMatrix<f64>>,
    /// Low-rank representation tensor, samples x samples x views.
    pub s: DenseTensor,
    /// Multiplier tensor on the Z = S constraint.
    pub w: DenseTensor,
    pub mu: f64,
    pub rho: f64,
    /// 1-based iteration counter; 0 before the first iteration.
    pub t: usize,
    /// Topology carried between refresh iterations.
    pub cached: Option<FactorSet>,
}

impl AdmmState {
    pub fn init(problem: &MscProblem, cfg: &MscConfig) -> Result<Self> {
        let i = problem.n_samples();
        let v = problem.n_views();
        let total_rows: usize = problem.views.iter().map(|x| x.nrows()).sum();
        Ok(Self {
            z: vec![DMatrix::zeros(i, i); v],
            e: DMatrix::zeros(total_rows, i),
            y: problem
                .views
                .iter()
                .map(|x| DMatrix::zeros(x.nrows(), i))
                .collect(),
            s: DenseTensor::zeros(vec![i, i, v])?,
            w: DenseTensor::zeros(vec![i, i, v])?,
            mu: cfg.mu0,
            rho: cfg.rho0,
            t: 0,
            cached: None,
        })
    }

    /// Frontal slice v of a (samples, samples, views) tensor as a matrix.
    fn tensor_slice(t: &DenseTensor, i: usize, v: usize) -> DMatrix<f64> {
        let block = &t.data()[v * i * i..(v + 1) * i * i];
        DMatrix::from_column_slice(i, i, block)
    }

    pub fn s_slice(&self, v: usize) -> DMatrix<f64> {
        let i = self.z[0].nrows();
        Self::tensor_slice(&self.s, i, v)
    }

    pub fn w_slice(&self, v: usize) -> DMatrix<f64> {
        let i = self.z[0].nrows();
        Self::tensor_slice(&self.w, i, v)
    }

    /// Row block of the stacked error matrix belonging to view v.
    pub fn e_view(&self, problem: &MscProblem, v: usize) -> DMatrix<f64> {
        let offset: usize = problem.views[..v].iter().map(|x| x.nrows()).sum();
        let rows = problem.views[v].nrows();
        self.e.rows(offset, rows).into_owned()
    }
}

/// Stacks per-view square matrices into a (samples, samples, views)
/// tensor.
pub fn stack_views(mats: &[DMatrix<f64>]) -> Result<DenseTensor> {
    if mats.is_empty() {
        return Err(Error::InvalidArgument("no matrices to stack".into()));
    }
    let i = mats[0].nrows();
    let mut data = Vec::with_capacity(i * i * mats.len());
    for m in mats {
        if m.nrows() != i || m.ncols() != i {
            return Err(Error::ShapeMismatch(format!(
                "stack: expected {i}x{i}, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        data.extend_from_slice(m.as_slice());
    }
    DenseTensor::new(vec![i, i, mats.len()], data)
}

fn z_rhs(state: &AdmmState, problem: &MscProblem, v: usize) -> DMatrix<f64> {
    let x = &problem.views[v];
    let xt = x.transpose();
    let e_v = state.e_view(problem, v);
    let num = &xt * &state.y[v] + state.mu * (&xt * x) - state.mu * (&xt * &e_v)
        - state.w_slice(v);
    num / state.rho + state.s_slice(v)
}

/// Closed-form per-view representation update; solves the stationarity
/// system `(I + (mu/rho) X^T X) Z = rhs` fresh. The driver caches the
/// factorization across views and iterations with an unchanged ratio.
pub fn update_z(state: &AdmmState, problem: &MscProblem, v: usize) -> Result<DMatrix<f64>> {
    let x = &problem.views[v];
    let i = problem.n_samples();
    let ratio = state.mu / state.rho;
    let lhs = DMatrix::identity(i, i) + ratio * (x.transpose() * x);
    let chol = lhs
        .cholesky()
        .ok_or_else(|| Error::LinearSolve("I + (mu/rho) X^T X not SPD".into()))?;
    Ok(chol.solve(&z_rhs(state, problem, v)))
}

/// Column-wise l2,1 shrinkage of the stacked residual matrix with
/// threshold `lambda / mu`.
pub fn update_e(state: &AdmmState, problem: &MscProblem, lambda: f64) -> DMatrix<f64> {
    let i = problem.n_samples();
    let total_rows = state.e.nrows();
    let mut d = DMatrix::zeros(total_rows, i);
    let mut offset = 0;
    for (v, x) in problem.views.iter().enumerate() {
        let block = x - x * &state.z[v] + &state.y[v] / state.mu;
        d.rows_mut(offset, x.nrows()).copy_from(&block);
        offset += x.nrows();
    }
    let threshold = lambda / state.mu;
    let mut e = DMatrix::zeros(total_rows, i);
    for c in 0..i {
        let col = d.column(c);
        let norm = col.norm();
        if norm > threshold {
            let scale = (norm - threshold) / norm;
            e.column_mut(c).copy_from(&(col * scale));
        }
    }
    e
}

/// Info about one S update.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SFitInfo {
    pub refreshed: bool,
    /// Fit error of the network against its target tensor.
    pub fit_rse: f64,
    pub sweeps: usize,
    pub storage_cost: usize,
    pub converged: bool,
}

/// Fits the low-rank representation: lifts `Z + W/rho` to 5th order,
/// re-learns the topology on refresh iterations (1, 1+interval, ...) and
/// refits only factor values otherwise, then folds the reconstruction
/// back to (samples, samples, views).
pub fn update_s(
    state: &AdmmState,
    problem: &MscProblem,
    cfg: &MscConfig,
) -> Result<(DenseTensor, Option<FactorSet>, SFitInfo)> {
    let i = problem.n_samples();
    let v = problem.n_views();
    let z3 = stack_views(&state.z)?;
    let f3 = z3.add(&state.w.scale(1.0 / state.rho))?;
    if cfg.s_update == SUpdate::PassThrough {
        return Ok((
            f3,
            None,
            SFitInfo {
                refreshed: false,
                fit_rse: 0.0,
                sweeps: 0,
                storage_cost: 0,
                converged: true,
            },
        ));
    }
    let f5 = f3.reshape(problem.five_d_shape())?;
    if f5.frobenius_norm() == 0.0 {
        return Ok((
            DenseTensor::zeros(vec![i, i, v])?,
            None,
            SFitInfo {
                refreshed: false,
                fit_rse: 0.0,
                sweeps: 0,
                storage_cost: 0,
                converged: true,
            },
        ));
    }
    let refresh = state.cached.is_none()
        || (state.t.max(1) - 1) % cfg.topology_refresh_interval == 0;
    // Value-only refit of the carried topology; also the incumbent a
    // re-learned topology has to beat, since swapping in a worse fit
    // would jolt the multiplier fixed point.
    let incumbent = match &state.cached {
        Some(cached) => {
            let out = als_fit(
                &f5,
                cached,
                &AlsOptions {
                    tol: cfg.attn.tol_als,
                    iter_max: cfg.attn.iter_max_als,
                    ridge: cfg.attn.ridge,
                },
            )?;
            let fit_rse = out.rse_trace.last().copied().unwrap_or(f64::NAN);
            let sweeps = out.sweeps;
            Some((out.factors, fit_rse, sweeps))
        }
        None => None,
    };
    let (factors, fit_rse, sweeps, converged, refreshed) = if refresh {
        let attn_cfg = AttnConfig {
            rng_seed: cfg
                .attn
                .rng_seed
                .wrapping_add((state.t as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)),
            ..cfg.attn.clone()
        };
        let result = attn_decompose(&f5, &attn_cfg)?;
        match incumbent {
            Some((factors, fit_rse, sweeps)) if fit_rse <= result.final_rse => {
                (factors, fit_rse, sweeps, true, false)
            }
            _ => (
                result.factors,
                result.final_rse,
                result.sweeps_used,
                result.converged,
                true,
            ),
        }
    } else {
        let (factors, fit_rse, sweeps) = incumbent.expect("cached checked above");
        (factors, fit_rse, sweeps, true, false)
    };
    let s5 = factors.contract()?;
    let s3 = s5.reshape(vec![i, i, v])?;
    let info = SFitInfo {
        refreshed,
        fit_rse,
        sweeps,
        storage_cost: factors.storage_cost(),
        converged,
    };
    Ok((s3, Some(factors), info))
}

/// Multiplier and penalty updates: `Y_v += mu (X_v - X_v Z_v - E_v)`,
/// `W += rho (Z - S)`, then both penalties scale by eta up to their caps.
pub fn update_multipliers(
    state: &mut AdmmState,
    problem: &MscProblem,
    cfg: &MscConfig,
) -> Result<()> {
    update_y(state, problem);
    update_w(state)?;
    state.mu = (cfg.eta * state.mu).min(cfg.mu_max);
    state.rho = (cfg.eta * state.rho).min(cfg.rho_max);
    Ok(())
}

fn update_y(state: &mut AdmmState, problem: &MscProblem) {
    for (v, x) in problem.views.iter().enumerate() {
        let resid = x - x * &state.z[v] - state.e_view(problem, v);
        state.y[v] += state.mu * resid;
    }
}

fn update_w(state: &mut AdmmState) -> Result<()> {
    let z3 = stack_views(&state.z)?;
    let delta = z3.sub(&state.s)?.scale(state.rho);
    state.w = state.w.add(&delta)?;
    Ok(())
}

/// Max-abs residuals: reconstruction `max_v ||X_v - X_v Z_v - E_v||_inf`
/// and match `max_v ||Z_v - S_v||_inf`.
pub fn residuals(state: &AdmmState, problem: &MscProblem) -> (f64, f64) {
    let mut recon = 0.0f64;
    let mut matching = 0.0f64;
    for (v, x) in problem.views.iter().enumerate() {
        let r = x - x * &state.z[v] - state.e_view(problem, v);
        recon = recon.max(r.amax());
        let m = &state.z[v] - state.s_slice(v);
        matching = matching.max(m.amax());
    }
    (recon, matching)
}

/// Per-iteration diagnostics of a solve.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MscDiagnostics {
    pub recon_trace: Vec<f64>,
    pub match_trace: Vec<f64>,
    pub mu_trace: Vec<f64>,
    pub rho_trace: Vec<f64>,
    pub s_fits: Vec<SFitInfo>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct MscOutcome {
    pub z: Vec<DMatrix<f64>>,
    pub diagnostics: MscDiagnostics,
}

/// The full ADMM loop in the listed update order: Z per view, E, Y per
/// view, S through the network fit, W, penalty schedule, then the
/// stopping test on both residuals.
pub fn solve(problem: &MscProblem, cfg: &MscConfig) -> Result<MscOutcome> {
    cfg.validate()?;
    let mut state = AdmmState::init(problem, cfg)?;
    let mut diag = MscDiagnostics::default();
    let mut zcache: Option<(f64, Vec<Cholesky<f64, Dyn>>)> = None;
    let i = problem.n_samples();
    for t in 1..=cfg.iter_max {
        state.t = t;
        let ratio = state.mu / state.rho;
        let rebuild = match &zcache {
            Some((r, _)) => *r != ratio,
            None => true,
        };
        if rebuild {
            let chols = problem
                .views
                .iter()
                .map(|x| {
                    let lhs = DMatrix::identity(i, i) + ratio * (x.transpose() * x);
                    lhs.cholesky()
                        .ok_or_else(|| Error::LinearSolve("I + (mu/rho) X^T X not SPD".into()))
                })
                .collect::<Result<Vec<_>>>()?;
            zcache = Some((ratio, chols));
        }
        let (_, chols) = zcache.as_ref().expect("built above");
        for v in 0..problem.n_views() {
            state.z[v] = chols[v].solve(&z_rhs(&state, problem, v));
        }
        state.e = update_e(&state, problem, cfg.lambda);
        update_y(&mut state, problem);
        let (s, cached, info) = update_s(&state, problem, cfg)?;
        state.s = s;
        state.cached = cached;
        update_w(&mut state)?;
        state.mu = (cfg.eta * state.mu).min(cfg.mu_max);
        state.rho = (cfg.eta * state.rho).min(cfg.rho_max);

        let (recon, matching) = residuals(&state, problem);
        diag.recon_trace.push(recon);
        diag.match_trace.push(matching);
        diag.mu_trace.push(state.mu);
        diag.rho_trace.push(state.rho);
        diag.s_fits.push(info);
        diag.iterations = t;
        if recon.max(matching) <= cfg.tol {
            diag.converged = true;
            break;
        }
    }
    Ok(MscOutcome {
        z: state.z,
        diagnostics: diag,
    })
}

/// Affinity matrix `M = (1/V) sum_v |Z_v| + |Z_v^T|`; symmetric and
/// nonnegative by construction.
pub fn build_affinity(zs: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    if zs.is_empty() {
        return Err(Error::InvalidArgument("no representation matrices".into()));
    }
    let i = zs[0].nrows();
    let mut m = DMatrix::zeros(i, i);
    for z in zs {
        if z.nrows() != i || z.ncols() != i {
            return Err(Error::ShapeMismatch(format!(
                "affinity: expected {i}x{i}, got {}x{}",
                z.nrows(),
                z.ncols()
            )));
        }
        for r in 0..i {
            for c in 0..i {
                m[(r, c)] += z[(r, c)].abs() + z[(c, r)].abs();
            }
        }
    }
    Ok(m / zs.len() as f64)
}
