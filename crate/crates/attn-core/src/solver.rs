//! Adaptive-topology network decomposition: least-squares fitting of a
//! fully connected network, redundant-edge scoring and pruning, and a
//! greedy per-edge rank increment loop.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{rse, DenseTensor};
use crate::topology::{FactorSet, TopologyGraph};

/// Deltas below this are fit noise; the gap rule treats them as equal so
/// a "gap" between two noise-level values never triggers pruning.
const DEFAULT_DELTA_FLOOR: f64 = 1e-6;

/// Perturbation magnitudes (relative to factor RMS) cycled across
/// restarts when a fit stalls above its target.
const KICK_SCALES: [f64; 2] = [0.5, 1.0];

/// Configuration for the adaptive decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttnConfig {
    /// Initial uniform edge rank; at least 2 so the starting graph is
    /// fully connected.
    pub r_init: usize,
    /// Relative change of consecutive reconstructions that stops a sweep
    /// loop.
    pub tol_als: f64,
    /// Sweep cap for full fits.
    pub iter_max_als: usize,
    /// Target reconstruction error of the whole decomposition.
    pub epsilon: f64,
    /// Rank added to the chosen edge per committed increment.
    pub step_a: usize,
    /// Sweeps used to settle each probe candidate.
    pub probe_sweeps: usize,
    /// Smallest sorted-delta ratio gap that triggers pruning.
    pub prune_gap_ratio: f64,
    /// Ridge added to the normal equations of each subproblem.
    pub ridge: f64,
    /// Cap on committed rank increments.
    pub iter_max_inc: usize,
    /// Stall restarts allowed in full fits. Plain ALS on fully connected
    /// networks sits down in local minima from most random starts; seeded
    /// perturbation restarts around the stall escape them reliably, fresh
    /// restarts do not.
    pub fit_restarts: usize,
    /// Sweep cap per restart segment (the first segment uses
    /// `iter_max_als`).
    pub restart_sweeps: usize,
    /// Deltas below this count as zero for the prune gap rule.
    pub prune_delta_floor: f64,
    /// Hard cap on any single edge rank during greedy growth; keeps the
    /// per-factor rank-mode product, and with it the normal-equation
    /// sizes, bounded.
    pub max_rank: usize,
    pub rng_seed: u64,
}

impl Default for AttnConfig {
    fn default() -> Self {
        Self {
            r_init: 2,
            tol_als: 1e-6,
            iter_max_als: 300,
            epsilon: 1e-3,
            step_a: 1,
            probe_sweeps: 3,
            prune_gap_ratio: 5.0,
            ridge: 1e-12,
            iter_max_inc: 50,
            fit_restarts: 24,
            restart_sweeps: 35,
            prune_delta_floor: DEFAULT_DELTA_FLOOR,
            max_rank: 12,
            rng_seed: 0,
        }
    }
}

impl AttnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r_init < 2 {
            return Err(Error::InvalidArgument(
                "r_init must be >= 2 to keep the initial graph fully connected".into(),
            ));
        }
        if self.tol_als <= 0.0 || self.epsilon <= 0.0 || self.ridge <= 0.0 {
            return Err(Error::InvalidArgument(
                "tol_als, epsilon and ridge must be positive".into(),
            ));
        }
        if self.step_a < 1 {
            return Err(Error::InvalidArgument("step_a must be >= 1".into()));
        }
        if self.prune_gap_ratio <= 1.0 {
            return Err(Error::InvalidArgument(
                "prune_gap_ratio must exceed 1".into(),
            ));
        }
        if self.max_rank < self.r_init {
            return Err(Error::InvalidArgument(
                "max_rank must be >= r_init".into(),
            ));
        }
        Ok(())
    }

    fn als_options(&self) -> AlsOptions {
        AlsOptions {
            tol: self.tol_als,
            iter_max: self.iter_max_als,
            ridge: self.ridge,
        }
    }
}

/// Options for one alternating-least-squares run.
#[derive(Debug, Clone, Copy)]
pub struct AlsOptions {
    pub tol: f64,
    pub iter_max: usize,
    pub ridge: f64,
}

/// Result of an ALS run.
#[derive(Debug, Clone)]
pub struct AlsOutcome {
    pub factors: FactorSet,
    /// Reconstruction error against the input after each sweep.
    pub rse_trace: Vec<f64>,
    pub sweeps: usize,
}

/// Score of one edge: reconstruction error after collapsing it to rank 1,
/// and the increase over the base fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeDelta {
    pub edge: (usize, usize),
    pub rse_without: f64,
    pub delta: f64,
}

/// One probe candidate during a rank-increment step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncrementCandidate {
    pub edge: (usize, usize),
    /// Probe reconstruction error against the input tensor; the commit
    /// criterion.
    pub probe_rse: f64,
    /// Relative change against the previous reconstruction, logged
    /// alongside (the definition the scoring formula is written against).
    pub probe_change: f64,
}

/// One committed rank increment with the full candidate table behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementStep {
    pub committed: (usize, usize),
    pub probe_rse: f64,
    pub candidates: Vec<IncrementCandidate>,
    /// Reconstruction error after the follow-up full fit.
    pub rse_after_refit: f64,
}

/// Full output of the adaptive decomposition.
#[derive(Debug, Clone)]
pub struct AttnResult {
    pub factors: FactorSet,
    /// Per-sweep reconstruction error across all full fits, in order.
    pub rse_trace: Vec<f64>,
    pub delta_table: Vec<EdgeDelta>,
    pub pruned_edges: Vec<(usize, usize)>,
    pub increments: Vec<IncrementStep>,
    pub final_rse: f64,
    pub sweeps_used: usize,
    pub converged: bool,
}

impl AttnResult {
    pub fn storage_cost(&self) -> usize {
        self.factors.storage_cost()
    }
}

fn solve_normal_equations(
    gram: &DMatrix<f64>,
    rhs: &DMatrix<f64>,
    ridge: f64,
) -> Result<DMatrix<f64>> {
    let n = gram.nrows();
    let mut lhs = gram.clone();
    for k in 0..n {
        lhs[(k, k)] += ridge;
    }
    if let Some(chol) = lhs.clone().cholesky() {
        return Ok(chol.solve(rhs));
    }
    lhs.lu()
        .solve(rhs)
        .ok_or_else(|| Error::LinearSolve("normal equations are singular".into()))
}

/// One in-place ALS sweep over all factors; returns the new reconstruction.
fn als_sweep(x: &DenseTensor, f: &mut FactorSet, ridge: f64) -> Result<DenseTensor> {
    let n = f.topology().n_factors();
    for mode in 0..n {
        let a = f.except_matrix(mode)?;
        let x_n = x.mode_n_unfold(mode)?;
        // min over G of ||X_(n) - G A||_F: (A A^T + ridge I) G^T = A X_(n)^T.
        let gram = &a * a.transpose();
        let rhs = &a * x_n.transpose();
        let g_t = solve_normal_equations(&gram, &rhs, ridge)?;
        let g = g_t.transpose();
        let shape = f.topology().factor_shape(mode);
        let factor = DenseTensor::new(shape, g.as_slice().to_vec())?;
        f.set_factor(mode, factor)?;
    }
    f.contract()
}

/// Alternating least squares over the network's factors.
///
/// Each subproblem is solved exactly through ridge-regularized normal
/// equations; the loop stops when the relative change between consecutive
/// reconstructions drops below `opts.tol` or `opts.iter_max` sweeps ran.
pub fn als_fit(x: &DenseTensor, init: &FactorSet, opts: &AlsOptions) -> Result<AlsOutcome> {
    if init.topology().mode_sizes() != x.shape() {
        return Err(Error::ShapeMismatch(format!(
            "network mode sizes {:?} do not match tensor shape {:?}",
            init.topology().mode_sizes(),
            x.shape()
        )));
    }
    let mut f = init.clone();
    let mut recon = f.contract()?;
    let mut trace = Vec::new();
    let mut sweeps = 0;
    for _ in 0..opts.iter_max {
        let last = recon;
        recon = als_sweep(x, &mut f, opts.ridge)?;
        sweeps += 1;
        trace.push(rse(&recon, x)?);
        let last_norm = last.frobenius_norm();
        if last_norm > 0.0 {
            let change = recon.sub(&last)?.frobenius_norm() / last_norm;
            if change <= opts.tol {
                break;
            }
        }
    }
    Ok(AlsOutcome {
        factors: f,
        rse_trace: trace,
        sweeps,
    })
}

/// Runs exactly `sweeps` ALS sweeps with no early stop; used for probes.
fn als_probe(x: &DenseTensor, f: &mut FactorSet, sweeps: usize, ridge: f64) -> Result<DenseTensor> {
    let mut recon = f.contract()?;
    for _ in 0..sweeps {
        recon = als_sweep(x, f, ridge)?;
    }
    Ok(recon)
}

/// Adds seeded noise (relative to each factor's RMS entry) to every factor.
fn kick_factors(f: &FactorSet, scale: f64, rng: &mut impl Rng) -> Result<FactorSet> {
    let mut g = f.clone();
    for k in 0..f.topology().n_factors() {
        let fk = f.factor(k);
        let noise = scale * rms(fk.data()).max(f64::MIN_POSITIVE);
        let data: Vec<f64> = fk
            .data()
            .iter()
            .map(|v| v + noise * rng.sample::<f64, _>(StandardNormal))
            .collect();
        g.set_factor(k, DenseTensor::new(fk.shape().to_vec(), data)?)?;
    }
    Ok(g)
}

/// Restart controls for [`fit_network`].
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub als: AlsOptions,
    /// Stall restarts after the first segment; 0 reduces to plain ALS.
    pub restarts: usize,
    /// Sweep cap for each restart segment.
    pub restart_sweeps: usize,
    /// Stop as soon as the best fit reaches this error.
    pub target_rse: f64,
    pub rng_seed: u64,
}

/// Outcome of a restarted fit; `rse_trace` concatenates the per-segment
/// ALS traces and `segment_starts` marks where each segment begins
/// (monotonicity holds within a segment, not across a restart kick).
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub factors: FactorSet,
    pub rse_trace: Vec<f64>,
    pub segment_starts: Vec<usize>,
    pub sweeps: usize,
    pub best_rse: f64,
}

/// Fits a network by alternating least squares with seeded perturbation
/// restarts: when a segment stalls above `target_rse`, the stalled factors
/// are kicked with noise and refit, and the best segment result overall is
/// returned. With `restarts == 0` this is a single plain ALS run.
pub fn fit_network(x: &DenseTensor, init: &FactorSet, opts: &FitOptions) -> Result<FitOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
    let mut current = init.clone();
    let mut trace = Vec::new();
    let mut segment_starts = Vec::new();
    let mut sweeps = 0;
    let mut best: Option<(f64, FactorSet)> = None;
    for segment in 0..=opts.restarts {
        let seg_opts = AlsOptions {
            iter_max: if segment == 0 {
                opts.als.iter_max
            } else {
                opts.restart_sweeps
            },
            ..opts.als
        };
        segment_starts.push(trace.len());
        let out = als_fit(x, &current, &seg_opts)?;
        sweeps += out.sweeps;
        trace.extend_from_slice(&out.rse_trace);
        let reached = out.rse_trace.last().copied().unwrap_or(f64::INFINITY);
        if best.as_ref().map_or(true, |(b, _)| reached < *b) {
            best = Some((reached, out.factors.clone()));
        }
        let (best_rse, best_factors) = best.as_ref().expect("set above");
        if *best_rse <= opts.target_rse || segment == opts.restarts {
            break;
        }
        // Kicking around the best point found so far beats both fresh
        // restarts and kicks off the latest stall.
        current = kick_factors(
            best_factors,
            KICK_SCALES[segment % KICK_SCALES.len()],
            &mut rng,
        )?;
    }
    let (best_rse, factors) = best.expect("at least one segment ran");
    Ok(FitOutcome {
        factors,
        rse_trace: trace,
        segment_starts,
        sweeps,
        best_rse,
    })
}

/// Collapses edge (i, j) to rank 1, replacing the corresponding rank mode
/// of both factors by its mean slice.
fn collapse_edge(f: &FactorSet, i: usize, j: usize) -> Result<FactorSet> {
    let mut topo = f.topology().clone();
    let mut factors = f.factors().to_vec();
    for &(node, other) in &[(i, j), (j, i)] {
        let pos = topo.rank_mode_position(node, other);
        factors[node] = factors[node].mean_axis_keep(pos)?;
    }
    topo.set_rank(i, j, 1)?;
    FactorSet::new(topo, factors)
}

/// Scores every present edge by the reconstruction error observed after
/// collapsing it to rank 1 and re-settling with a few probe sweeps. The
/// base factors are left untouched.
pub fn score_edges(x: &DenseTensor, f: &FactorSet, cfg: &AttnConfig) -> Result<Vec<EdgeDelta>> {
    let base_rse = rse(&f.contract()?, x)?;
    let mut table = Vec::new();
    for (i, j) in f.topology().present_edges() {
        let mut probe = collapse_edge(f, i, j)?;
        let recon = als_probe(x, &mut probe, cfg.probe_sweeps, cfg.ridge)?;
        let rse_without = rse(&recon, x)?;
        table.push(EdgeDelta {
            edge: (i, j),
            rse_without,
            delta: rse_without - base_rse,
        });
    }
    Ok(table)
}

/// Applies the largest-ratio-gap rule to a delta table: sort ascending,
/// find the largest ratio between consecutive values, and prune everything
/// below that gap when the ratio reaches `prune_gap_ratio`. Deltas under
/// `prune_delta_floor` are clamped up to it, so gaps between noise-level
/// values never fire. Never selects every edge.
pub fn prune_redundant(delta_table: &[EdgeDelta], cfg: &AttnConfig) -> Vec<(usize, usize)> {
    if delta_table.len() < 2 {
        return Vec::new();
    }
    let mut sorted = delta_table.to_vec();
    sorted.sort_by(|a, b| {
        a.delta
            .partial_cmp(&b.delta)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.edge.cmp(&b.edge))
    });
    let floor = cfg.prune_delta_floor.max(f64::MIN_POSITIVE);
    let mut best_ratio = f64::NEG_INFINITY;
    let mut best_split = None;
    for k in 0..sorted.len() - 1 {
        let ratio = sorted[k + 1].delta.max(floor) / sorted[k].delta.max(floor);
        if ratio > best_ratio {
            best_ratio = ratio;
            best_split = Some(k);
        }
    }
    match best_split {
        Some(k) if best_ratio >= cfg.prune_gap_ratio => {
            sorted[..=k].iter().map(|d| d.edge).collect()
        }
        _ => Vec::new(),
    }
}

fn rms(data: &[f64]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    (data.iter().map(|x| x * x).sum::<f64>() / data.len() as f64).sqrt()
}

/// Appends `extra` slices along one mode, filled with small seeded noise
/// scaled to 1e-2 of the factor's RMS entry magnitude.
fn pad_rank_mode(
    t: &DenseTensor,
    mode: usize,
    extra: usize,
    rng: &mut impl Rng,
) -> Result<DenseTensor> {
    let order = t.order();
    let mut perm = Vec::with_capacity(order);
    perm.push(mode);
    perm.extend((0..order).filter(|&m| m != mode));
    let fronted = t.permute(&perm)?;
    let old = t.shape()[mode];
    let scale = {
        let r = rms(t.data());
        if r > 0.0 {
            1e-2 * r
        } else {
            1e-2
        }
    };
    let mut data = Vec::with_capacity(fronted.len() / old * (old + extra));
    for chunk in fronted.data().chunks(old) {
        data.extend_from_slice(chunk);
        for _ in 0..extra {
            let z: f64 = rng.sample(StandardNormal);
            data.push(scale * z);
        }
    }
    let mut fronted_shape: Vec<usize> = fronted.shape().to_vec();
    fronted_shape[0] = old + extra;
    let padded = DenseTensor::new(fronted_shape, data)?;
    let mut inv = vec![0usize; order];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    padded.permute(&inv)
}

/// Grows edge (i, j) by `step` and pads both incident factors.
fn grow_edge(f: &FactorSet, i: usize, j: usize, step: usize, rng: &mut impl Rng) -> Result<FactorSet> {
    let mut topo = f.topology().clone();
    let mut factors = f.factors().to_vec();
    for &(node, other) in &[(i, j), (j, i)] {
        let pos = topo.rank_mode_position(node, other);
        factors[node] = pad_rank_mode(&factors[node], pos, step, rng)?;
    }
    let r = topo.rank(i, j);
    topo.set_rank(i, j, r + step)?;
    FactorSet::new(topo, factors)
}

fn probe_seed(base: u64, step: usize, edge: (usize, usize)) -> u64 {
    base.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add((step as u64) << 32)
        .wrapping_add((edge.0 as u64) << 16)
        .wrapping_add(edge.1 as u64)
}

/// Output of the greedy rank-increment loop.
#[derive(Debug, Clone)]
pub struct IncrementOutcome {
    pub factors: FactorSet,
    pub steps: Vec<IncrementStep>,
    pub rse_trace: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

/// Greedy rank growth: while the fit misses `epsilon`, provisionally bump
/// each retained edge by `step_a`, settle it with probe sweeps, commit the
/// candidate with the lowest probe error (lexicographic tie-break), then
/// refine with a full fit. Rank-1 edges are never re-grown.
pub fn greedy_rank_increment(
    x: &DenseTensor,
    f: &FactorSet,
    cfg: &AttnConfig,
) -> Result<IncrementOutcome> {
    cfg.validate()?;
    let mut current = f.clone();
    let mut steps: Vec<IncrementStep> = Vec::new();
    let mut trace = Vec::new();
    let mut sweeps = 0;
    loop {
        let recon = current.contract()?;
        let cur_rse = rse(&recon, x)?;
        if cur_rse <= cfg.epsilon {
            return Ok(IncrementOutcome {
                factors: current,
                steps,
                rse_trace: trace,
                sweeps,
                converged: true,
            });
        }
        if steps.len() >= cfg.iter_max_inc {
            return Ok(IncrementOutcome {
                factors: current,
                steps,
                rse_trace: trace,
                sweeps,
                converged: false,
            });
        }
        let candidates_edges: Vec<(usize, usize)> = current
            .topology()
            .present_edges()
            .into_iter()
            .filter(|&(i, j)| current.topology().rank(i, j) + cfg.step_a <= cfg.max_rank)
            .collect();
        if candidates_edges.is_empty() {
            return Ok(IncrementOutcome {
                factors: current,
                steps,
                rse_trace: trace,
                sweeps,
                converged: false,
            });
        }
        let recon_norm = recon.frobenius_norm();
        let mut candidates = Vec::with_capacity(candidates_edges.len());
        let mut best: Option<(f64, (usize, usize), FactorSet)> = None;
        for (i, j) in candidates_edges {
            let mut rng = ChaCha8Rng::seed_from_u64(probe_seed(cfg.rng_seed, steps.len(), (i, j)));
            let mut cand = grow_edge(&current, i, j, cfg.step_a, &mut rng)?;
            let cand_recon = als_probe(x, &mut cand, cfg.probe_sweeps, cfg.ridge)?;
            let probe_rse = rse(&cand_recon, x)?;
            let probe_change = if recon_norm > 0.0 {
                cand_recon.sub(&recon)?.frobenius_norm() / recon_norm
            } else {
                f64::NAN
            };
            candidates.push(IncrementCandidate {
                edge: (i, j),
                probe_rse,
                probe_change,
            });
            // Strict < keeps the lexicographically first edge on ties.
            if best.as_ref().map_or(true, |(b, _, _)| probe_rse < *b) {
                best = Some((probe_rse, (i, j), cand));
            }
        }
        let (probe_rse, committed, cand) = best.expect("at least one candidate");
        let refit = als_fit(x, &cand, &cfg.als_options())?;
        sweeps += refit.sweeps;
        let rse_after_refit = *refit.rse_trace.last().unwrap_or(&probe_rse);
        trace.extend_from_slice(&refit.rse_trace);
        current = refit.factors;
        steps.push(IncrementStep {
            committed,
            probe_rse,
            candidates,
            rse_after_refit,
        });
    }
}

/// The full adaptive decomposition: fit a uniform-rank fully connected
/// network, score and prune redundant edges, then grow ranks greedily
/// until the target error or the increment cap is reached.
pub fn attn_decompose(x: &DenseTensor, cfg: &AttnConfig) -> Result<AttnResult> {
    cfg.validate()?;
    if x.order() < 3 {
        return Err(Error::InvalidArgument(format!(
            "adaptive decomposition expects order >= 3, got {}",
            x.order()
        )));
    }
    if x.frobenius_norm() == 0.0 {
        return Err(Error::ZeroNormReference);
    }
    let topo = TopologyGraph::uniform(x.shape().to_vec(), cfg.r_init)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let init = FactorSet::random(topo, &mut rng);

    let fit_opts = FitOptions {
        als: cfg.als_options(),
        restarts: cfg.fit_restarts,
        restart_sweeps: cfg.restart_sweeps,
        target_rse: cfg.epsilon,
        rng_seed: cfg.rng_seed.wrapping_add(1),
    };
    let fit = fit_network(x, &init, &fit_opts)?;
    let mut trace = fit.rse_trace.clone();
    let mut sweeps = fit.sweeps;
    let mut factors = fit.factors;

    let delta_table = score_edges(x, &factors, cfg)?;
    let pruned = prune_redundant(&delta_table, cfg);
    if !pruned.is_empty() {
        for &(i, j) in &pruned {
            factors = collapse_edge(&factors, i, j)?;
        }
        let refit = fit_network(
            x,
            &factors,
            &FitOptions {
                rng_seed: cfg.rng_seed.wrapping_add(2),
                ..fit_opts
            },
        )?;
        trace.extend_from_slice(&refit.rse_trace);
        sweeps += refit.sweeps;
        factors = refit.factors;
    }

    let inc = greedy_rank_increment(x, &factors, cfg)?;
    trace.extend_from_slice(&inc.rse_trace);
    sweeps += inc.sweeps;
    let factors = inc.factors;
    let final_rse = rse(&factors.contract()?, x)?;

    Ok(AttnResult {
        factors,
        rse_trace: trace,
        delta_table,
        pruned_edges: pruned,
        increments: inc.steps,
        final_rse,
        sweeps_used: sweeps,
        converged: final_rse <= cfg.epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn planted(topo: &TopologyGraph, seed: u64) -> (DenseTensor, FactorSet) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = FactorSet::random(topo.clone(), &mut rng);
        (f.contract().unwrap(), f)
    }

    fn chain_in_complete(dims: &[usize], chain_rank: usize) -> TopologyGraph {
        let n = dims.len();
        let mut topo = TopologyGraph::uniform(dims.to_vec(), 1).unwrap();
        for k in 0..n - 1 {
            topo.set_rank(k, k + 1, chain_rank).unwrap();
        }
        topo
    }

    #[test]
    fn config_validation() {
        let mut cfg = AttnConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.r_init = 1;
        assert!(cfg.validate().is_err());
        cfg.r_init = 2;
        cfg.epsilon = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn als_recovers_rank_one_tensor() {
        // Outer-product input, all ranks 1: exact model class.
        let topo = TopologyGraph::uniform(vec![4, 5, 3], 1).unwrap();
        let (x, _) = planted(&topo, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let init = FactorSet::random(topo, &mut rng);
        let out = als_fit(
            &x,
            &init,
            &AlsOptions {
                tol: 1e-14,
                iter_max: 10,
                ridge: 1e-12,
            },
        )
        .unwrap();
        let final_rse = *out.rse_trace.last().unwrap();
        assert!(final_rse <= 1e-8, "rse {final_rse}");
    }

    #[test]
    fn restarted_fit_recovers_planted_uniform_rank_two() {
        // Plain ALS lands in local minima on most of these instances; the
        // restarted fit must recover a large majority.
        let mut hits = 0;
        for seed in 0..10u64 {
            let topo = TopologyGraph::uniform(vec![4, 4, 4, 4], 2).unwrap();
            let (x, _) = planted(&topo, 1000 + seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let init = FactorSet::random(topo, &mut rng);
            let out = fit_network(
                &x,
                &init,
                &FitOptions {
                    als: AlsOptions {
                        tol: 1e-8,
                        iter_max: 60,
                        ridge: 1e-12,
                    },
                    restarts: 60,
                    restart_sweeps: 35,
                    target_rse: 1e-3,
                    rng_seed: 5000 + seed,
                },
            )
            .unwrap();
            if out.best_rse <= 1e-3 {
                hits += 1;
            }
        }
        assert!(hits >= 8, "only {hits}/10 planted fits recovered");
    }

    #[test]
    fn fit_network_without_restarts_is_plain_als() {
        let topo = TopologyGraph::uniform(vec![3, 4, 3], 2).unwrap();
        let (x, _) = planted(&topo, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let init = FactorSet::random(topo, &mut rng);
        let als = AlsOptions {
            tol: 1e-8,
            iter_max: 40,
            ridge: 1e-12,
        };
        let plain = als_fit(&x, &init, &als).unwrap();
        let wrapped = fit_network(
            &x,
            &init,
            &FitOptions {
                als,
                restarts: 0,
                restart_sweeps: 10,
                target_rse: 0.0,
                rng_seed: 9,
            },
        )
        .unwrap();
        assert_eq!(plain.rse_trace, wrapped.rse_trace);
        assert_eq!(plain.factors, wrapped.factors);
    }

    #[test]
    fn als_rse_trace_non_increasing() {
        let topo = TopologyGraph::uniform(vec![4, 4, 4], 2).unwrap();
        let (x, _) = planted(&topo, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let init = FactorSet::random(TopologyGraph::uniform(vec![4, 4, 4], 2).unwrap(), &mut rng);
        let out = als_fit(
            &x,
            &init,
            &AlsOptions {
                tol: 0.0,
                iter_max: 40,
                ridge: 1e-12,
            },
        )
        .unwrap();
        for w in out.rse_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-8, "trace increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn als_rejects_mismatched_shapes() {
        let topo = TopologyGraph::uniform(vec![4, 4, 4], 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let init = FactorSet::random(topo, &mut rng);
        let x = DenseTensor::zeros(vec![4, 4, 5]).unwrap();
        assert!(als_fit(&x, &init, &AlsOptions { tol: 1e-6, iter_max: 1, ridge: 1e-12 }).is_err());
    }

    #[test]
    fn score_edges_flags_genuine_rank_one_edge() {
        // Planted network where edge (0,2) is genuinely rank 1; fitting at
        // uniform rank 2 and collapsing (0,2) should barely move the error.
        let mut topo = TopologyGraph::uniform(vec![4, 4, 4], 2).unwrap();
        topo.set_rank(0, 2, 1).unwrap();
        let (x, _) = planted(&topo, 21);
        let fit_topo = TopologyGraph::uniform(vec![4, 4, 4], 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let init = FactorSet::random(fit_topo, &mut rng);
        let cfg = AttnConfig::default();
        let out = als_fit(&x, &init, &cfg.als_options()).unwrap();
        let table = score_edges(&x, &out.factors, &cfg).unwrap();
        let d02 = table
            .iter()
            .find(|d| d.edge == (0, 2))
            .expect("edge present");
        assert!(d02.delta <= 1e-6, "delta for planted rank-1 edge: {}", d02.delta);
    }

    #[test]
    fn score_edges_orders_tiny_delta_for_unused_edge() {
        // One planted edge at genuine rank 1 among rank-2 edges the fit can
        // represent exactly: its delta must be the smallest of the table.
        let mut ok = 0;
        for seed in 0..6u64 {
            let mut topo = TopologyGraph::uniform(vec![4, 4, 4], 2).unwrap();
            topo.set_rank(0, 2, 1).unwrap();
            let (x, _) = planted(&topo, 300 + seed);
            let cfg = AttnConfig {
                rng_seed: seed,
                ..AttnConfig::default()
            };
            let fit_topo = TopologyGraph::uniform(vec![4, 4, 4], cfg.r_init).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let init = FactorSet::random(fit_topo, &mut rng);
            let fitted = fit_network(
                &x,
                &init,
                &FitOptions {
                    als: cfg.als_options(),
                    restarts: cfg.fit_restarts,
                    restart_sweeps: cfg.restart_sweeps,
                    target_rse: 1e-8,
                    rng_seed: seed,
                },
            )
            .unwrap();
            let table = score_edges(&x, &fitted.factors, &cfg).unwrap();
            let min_edge = table
                .iter()
                .min_by(|a, b| a.delta.partial_cmp(&b.delta).unwrap())
                .unwrap();
            if min_edge.edge == (0, 2) && min_edge.delta <= 1e-4 {
                ok += 1;
            }
        }
        assert!(ok >= 5, "unused edge ranked smallest in {ok}/6 seeds");
    }

    #[test]
    fn deltas_never_meaningfully_negative() {
        for seed in 0..5u64 {
            let topo = TopologyGraph::uniform(vec![3, 4, 3], 2).unwrap();
            let (x, _) = planted(&topo, 40 + seed);
            let cfg = AttnConfig::default();
            let fit_topo = TopologyGraph::uniform(vec![3, 4, 3], 2).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let init = FactorSet::random(fit_topo, &mut rng);
            let fitted = als_fit(&x, &init, &cfg.als_options()).unwrap();
            for d in score_edges(&x, &fitted.factors, &cfg).unwrap() {
                assert!(d.delta >= -1e-8, "delta {} on edge {:?}", d.delta, d.edge);
            }
        }
    }

    fn table(deltas: &[f64]) -> Vec<EdgeDelta> {
        deltas
            .iter()
            .enumerate()
            .map(|(k, &d)| EdgeDelta {
                edge: (0, k + 1),
                rse_without: d,
                delta: d,
            })
            .collect()
    }

    #[test]
    fn prune_gap_rule_examples() {
        let cfg = AttnConfig::default(); // gap ratio 5
        let pruned = prune_redundant(&table(&[1e-7, 2e-7, 0.3, 0.4]), &cfg);
        assert_eq!(pruned, vec![(0, 1), (0, 2)]);
        assert!(prune_redundant(&table(&[0.2, 0.2, 0.2]), &cfg).is_empty());
        assert!(prune_redundant(&table(&[0.5]), &cfg).is_empty());
        assert!(prune_redundant(&[], &cfg).is_empty());
    }

    #[test]
    fn prune_never_selects_every_edge() {
        let cfg = AttnConfig::default();
        // Huge gap between the two entries: only the first may be pruned.
        let pruned = prune_redundant(&table(&[1e-9, 0.9]), &cfg);
        assert_eq!(pruned.len(), 1);
        // Permutation invariance: the rule sees only the multiset.
        let t1 = table(&[0.3, 1e-7, 0.4, 2e-7]);
        let mut p1 = prune_redundant(&t1, &cfg)
            .iter()
            .map(|e| t1.iter().position(|d| d.edge == *e).unwrap())
            .map(|k| t1[k].delta)
            .collect::<Vec<_>>();
        p1.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(p1, vec![1e-7, 2e-7]);
    }

    #[test]
    fn greedy_increment_no_op_when_converged() {
        let topo = TopologyGraph::uniform(vec![4, 4, 4], 2).unwrap();
        let (x, f) = planted(&topo, 61);
        let cfg = AttnConfig {
            epsilon: 0.5,
            ..AttnConfig::default()
        };
        // The planted factors reproduce x exactly; rse 0 <= epsilon.
        let out = greedy_rank_increment(&x, &f, &cfg).unwrap();
        assert!(out.converged);
        assert!(out.steps.is_empty());
        assert_eq!(out.factors, f);
    }

    #[test]
    fn greedy_increment_recovers_planted_chain_ranks() {
        let mut hits = 0;
        for seed in 0..6u64 {
            let topo = chain_in_complete(&[4, 4, 4, 4], 3);
            let (x, _) = planted(&topo, 500 + seed);
            let cfg = AttnConfig {
                epsilon: 1e-3,
                rng_seed: seed,
                ..AttnConfig::default()
            };
            let result = attn_decompose(&x, &cfg).unwrap();
            // Commits must stay on retained (non-pruned) edges, and each
            // commit must be the probe minimum of its step.
            for step in &result.increments {
                assert!(!result.pruned_edges.contains(&step.committed));
                let min = step
                    .candidates
                    .iter()
                    .map(|c| c.probe_rse)
                    .fold(f64::INFINITY, f64::min);
                assert!(step.probe_rse <= min + 1e-15);
            }
            if result.converged {
                hits += 1;
            }
        }
        assert!(hits >= 4, "{hits}/6 seeds converged");
    }

    #[test]
    fn attn_on_rank_one_tensor_prunes_nothing_and_fits() {
        let topo = TopologyGraph::uniform(vec![4, 4, 4], 1).unwrap();
        let (x, _) = planted(&topo, 71);
        let cfg = AttnConfig {
            epsilon: 1e-6,
            ..AttnConfig::default()
        };
        let result = attn_decompose(&x, &cfg).unwrap();
        // Over-parameterized exact fit: all deltas tiny, no gap, no prune.
        assert!(result.pruned_edges.is_empty());
        assert!(result.final_rse <= 1e-6, "rse {}", result.final_rse);
    }

    #[test]
    fn attn_decompose_is_deterministic() {
        let topo = chain_in_complete(&[4, 4, 4], 3);
        let (x, _) = planted(&topo, 81);
        let cfg = AttnConfig {
            epsilon: 1e-3,
            rng_seed: 1234,
            iter_max_inc: 10,
            ..AttnConfig::default()
        };
        let a = attn_decompose(&x, &cfg).unwrap();
        let b = attn_decompose(&x, &cfg).unwrap();
        assert_eq!(a.pruned_edges, b.pruned_edges);
        assert_eq!(
            a.factors.topology().rank_matrix(),
            b.factors.topology().rank_matrix()
        );
        assert_eq!(a.final_rse, b.final_rse);
        assert_eq!(a.rse_trace, b.rse_trace);
    }

    #[test]
    fn attn_result_final_rse_matches_factors() {
        let topo = TopologyGraph::uniform(vec![3, 3, 3], 2).unwrap();
        let (x, _) = planted(&topo, 91);
        let cfg = AttnConfig {
            epsilon: 1e-4,
            iter_max_inc: 5,
            ..AttnConfig::default()
        };
        let result = attn_decompose(&x, &cfg).unwrap();
        let check = rse(&result.factors.contract().unwrap(), &x).unwrap();
        assert!((check - result.final_rse).abs() <= 1e-12);
    }

    #[test]
    fn attn_rejects_low_order_input() {
        let x = DenseTensor::new(vec![3, 3], vec![1.0; 9]).unwrap();
        assert!(attn_decompose(&x, &AttnConfig::default()).is_err());
    }

    #[test]
    fn increments_only_grow_retained_edges_by_step() {
        let topo = chain_in_complete(&[4, 4, 4, 4], 3);
        let (x, _) = planted(&topo, 101);
        let cfg = AttnConfig {
            epsilon: 1e-3,
            rng_seed: 7,
            iter_max_inc: 8,
            ..AttnConfig::default()
        };
        let result = attn_decompose(&x, &cfg).unwrap();
        // Reconstruct the expected rank matrix from the increment log.
        let mut expect = TopologyGraph::uniform(vec![4, 4, 4, 4], cfg.r_init).unwrap();
        for &(i, j) in &result.pruned_edges {
            expect.set_rank(i, j, 1).unwrap();
        }
        for step in &result.increments {
            let (i, j) = step.committed;
            let r = expect.rank(i, j);
            assert!(r >= 2, "committed increment on a pruned edge");
            expect.set_rank(i, j, r + cfg.step_a).unwrap();
        }
        assert_eq!(
            expect.rank_matrix(),
            result.factors.topology().rank_matrix()
        );
    }
}
