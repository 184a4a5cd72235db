//! Reference decompositions for the reconstruction comparison: Tucker by
//! HOOI, tensor-train and tensor-ring by ALS over the corresponding chain
//! and cycle topologies, and the plain fully connected network fit.

use std::io::Write;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::top_left_singular_vectors;
use crate::solver::{als_fit, fit_network, AlsOptions, FitOptions};
use crate::tensor::{rse, DenseTensor};
use crate::topology::{FactorSet, TopologyGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineMethod {
    Tucker,
    Tt,
    Tr,
    Fctn,
}

impl std::fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            BaselineMethod::Tucker => "tucker",
            BaselineMethod::Tt => "tt",
            BaselineMethod::Tr => "tr",
            BaselineMethod::Fctn => "fctn",
        };
        write!(f, "{name}")
    }
}

impl std::str::FromStr for BaselineMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tucker" => Ok(BaselineMethod::Tucker),
            "tt" => Ok(BaselineMethod::Tt),
            "tr" => Ok(BaselineMethod::Tr),
            "fctn" => Ok(BaselineMethod::Fctn),
            other => Err(Error::InvalidArgument(format!(
                "unknown baseline method '{other}'"
            ))),
        }
    }
}

/// Method plus its rank vector. Rank arity depends on the method:
/// Tucker takes N ranks, TT N-1 bond ranks, TR N bond ranks, and the
/// fully connected network N(N-1)/2 edge ranks in lexicographic
/// (i, j), i < j order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub method: BaselineMethod,
    pub ranks: Vec<usize>,
    pub iter_max: usize,
    pub tol: f64,
    pub ridge: f64,
    /// Stall restarts for the looped topologies (ring, complete graph).
    pub fit_restarts: usize,
    pub restart_sweeps: usize,
    pub rng_seed: u64,
}

impl BaselineSpec {
    pub fn new(method: BaselineMethod, ranks: Vec<usize>) -> Self {
        Self {
            method,
            ranks,
            iter_max: 300,
            tol: 1e-6,
            ridge: 1e-12,
            fit_restarts: 24,
            restart_sweeps: 35,
            rng_seed: 0,
        }
    }

    /// Uniform edge ranks for the fully connected method on an
    /// order-`n` tensor.
    pub fn fctn_uniform(n: usize, rank: usize) -> Self {
        Self::new(BaselineMethod::Fctn, vec![rank; n * (n - 1) / 2])
    }

    fn expected_arity(&self, order: usize) -> usize {
        match self.method {
            BaselineMethod::Tucker => order,
            BaselineMethod::Tt => order - 1,
            BaselineMethod::Tr => order,
            BaselineMethod::Fctn => order * (order - 1) / 2,
        }
    }

    pub fn validate(&self, order: usize) -> Result<()> {
        let expect = self.expected_arity(order);
        if self.ranks.len() != expect {
            return Err(Error::InvalidArgument(format!(
                "{} on an order-{} tensor takes {} ranks, got {}",
                self.method,
                order,
                expect,
                self.ranks.len()
            )));
        }
        if self.ranks.iter().any(|&r| r == 0) {
            return Err(Error::InvalidArgument("ranks must be >= 1".into()));
        }
        Ok(())
    }
}

/// Fitted factors: network topologies share [`FactorSet`]; Tucker keeps
/// its core plus per-mode bases.
#[derive(Debug, Clone)]
pub enum BaselineFactors {
    Network(FactorSet),
    Tucker {
        core: DenseTensor,
        bases: Vec<DMatrix<f64>>,
    },
}

#[derive(Debug, Clone)]
pub struct BaselineResult {
    pub method: BaselineMethod,
    pub factors: BaselineFactors,
    pub reconstruction: DenseTensor,
    pub final_rse: f64,
    pub rse_trace: Vec<f64>,
    pub iters_used: usize,
    pub storage_cost: usize,
}

/// Tensor-times-matrix along one mode: folds `m * unfold(t, mode)` back.
fn ttm(t: &DenseTensor, m: &DMatrix<f64>, mode: usize) -> Result<DenseTensor> {
    let unfolded = t.mode_n_unfold(mode)?;
    if m.ncols() != unfolded.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "ttm: matrix has {} columns, mode {} has size {}",
            m.ncols(),
            mode,
            unfolded.nrows()
        )));
    }
    let product = m * unfolded;
    let mut shape = t.shape().to_vec();
    shape[mode] = m.nrows();
    DenseTensor::fold_n(&product, mode, &shape)
}

fn tucker_decompose(x: &DenseTensor, spec: &BaselineSpec) -> Result<BaselineResult> {
    let n = x.order();
    let x_norm = x.frobenius_norm();
    if x_norm == 0.0 {
        return Err(Error::ZeroNormReference);
    }
    let ranks: Vec<usize> = spec
        .ranks
        .iter()
        .zip(x.shape())
        .map(|(&r, &dim)| r.min(dim))
        .collect();
    // HOSVD init.
    let mut bases: Vec<DMatrix<f64>> = (0..n)
        .map(|mode| {
            x.mode_n_unfold(mode)
                .map(|m| top_left_singular_vectors(&m, ranks[mode]))
        })
        .collect::<Result<_>>()?;
    let mut trace = Vec::new();
    let mut iters = 0;
    let mut prev_rse = f64::INFINITY;
    for _ in 0..spec.iter_max.max(1) {
        for mode in 0..n {
            let mut y = x.clone();
            for (m, basis) in bases.iter().enumerate() {
                if m != mode {
                    y = ttm(&y, &basis.transpose(), m)?;
                }
            }
            bases[mode] = top_left_singular_vectors(&y.mode_n_unfold(mode)?, ranks[mode]);
        }
        let mut core = x.clone();
        for (m, basis) in bases.iter().enumerate() {
            core = ttm(&core, &basis.transpose(), m)?;
        }
        iters += 1;
        // Orthonormal bases give ||X - recon||^2 = ||X||^2 - ||core||^2.
        let core_norm = core.frobenius_norm();
        let fit = (1.0 - (core_norm / x_norm).powi(2)).max(0.0).sqrt();
        trace.push(fit);
        if (prev_rse - fit).abs() <= spec.tol {
            break;
        }
        prev_rse = fit;
    }
    let mut core = x.clone();
    for (m, basis) in bases.iter().enumerate() {
        core = ttm(&core, &basis.transpose(), m)?;
    }
    let mut recon = core.clone();
    for (m, basis) in bases.iter().enumerate() {
        recon = ttm(&recon, basis, m)?;
    }
    let final_rse = rse(&recon, x)?;
    let storage = core.len() + bases.iter().map(|b| b.nrows() * b.ncols()).sum::<usize>();
    Ok(BaselineResult {
        method: BaselineMethod::Tucker,
        factors: BaselineFactors::Tucker { core, bases },
        reconstruction: recon,
        final_rse,
        rse_trace: trace,
        iters_used: iters,
        storage_cost: storage,
    })
}

/// Sequential truncated factorization producing chain cores at the given
/// bond ranks; exact whenever the bond ranks cover the unfolding ranks.
fn tt_svd_init(x: &DenseTensor, bond_ranks: &[usize]) -> Result<FactorSet> {
    let n = x.order();
    let dims = x.shape().to_vec();
    let mut bonds = Vec::with_capacity(n + 1);
    bonds.push(1usize);
    bonds.extend_from_slice(bond_ranks);
    bonds.push(1);
    let topo = TopologyGraph::chain(dims.clone(), bond_ranks)?;
    let mut factors: Vec<Option<DenseTensor>> = vec![None; n];
    let mut rest: usize = dims.iter().product();
    let mut c = DMatrix::from_vec(dims[0], rest / dims[0], x.data().to_vec());
    for k in 0..n {
        let rows = bonds[k] * dims[k];
        debug_assert_eq!(c.nrows(), rows);
        let r_next = bonds[k + 1];
        let core_mat = if k + 1 == n {
            c.clone()
        } else {
            let u = top_left_singular_vectors(&c, r_next);
            let remainder = u.transpose() * &c; // r_next x rest
            rest /= dims[k];
            let next_rows = r_next * dims[k + 1];
            let flat: Vec<f64> = remainder.as_slice().to_vec();
            let next = DMatrix::from_vec(next_rows, flat.len() / next_rows, flat);
            let out = u;
            c = next;
            out
        };
        // core_mat is (bonds[k] * dims[k]) x bonds[k+1], column-major, so it
        // reads as a (left bond, physical, right bond) tensor.
        let core = DenseTensor::new(
            vec![bonds[k], dims[k], bonds[k + 1]],
            core_mat.as_slice().to_vec(),
        )?;
        let reordered = core.permute(&[1, 0, 2])?;
        let factor = DenseTensor::new(topo.factor_shape(k), reordered.into_data())?;
        factors[k] = Some(factor);
    }
    FactorSet::new(topo, factors.into_iter().map(|f| f.unwrap()).collect())
}

fn network_decompose(
    x: &DenseTensor,
    spec: &BaselineSpec,
    topo: TopologyGraph,
    init: Option<FactorSet>,
    restarts: usize,
) -> Result<(FactorSet, Vec<f64>, usize)> {
    let init = match init {
        Some(f) => f,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
            FactorSet::random(topo, &mut rng)
        }
    };
    let als = AlsOptions {
        tol: spec.tol,
        iter_max: spec.iter_max,
        ridge: spec.ridge,
    };
    if restarts == 0 {
        let out = als_fit(x, &init, &als)?;
        let sweeps = out.sweeps;
        return Ok((out.factors, out.rse_trace, sweeps));
    }
    let out = fit_network(
        x,
        &init,
        &FitOptions {
            als,
            restarts,
            restart_sweeps: spec.restart_sweeps,
            target_rse: spec.tol,
            rng_seed: spec.rng_seed.wrapping_add(1),
        },
    )?;
    Ok((out.factors, out.rse_trace, out.sweeps))
}

/// Runs the requested reference decomposition.
pub fn decompose(x: &DenseTensor, spec: &BaselineSpec) -> Result<BaselineResult> {
    if x.order() < 2 {
        return Err(Error::InvalidArgument(
            "baseline decompositions expect order >= 2".into(),
        ));
    }
    spec.validate(x.order())?;
    match spec.method {
        BaselineMethod::Tucker => tucker_decompose(x, spec),
        BaselineMethod::Tt => {
            let capped: Vec<usize> = tt_cap_ranks(x.shape(), &spec.ranks);
            let init = tt_svd_init(x, &capped)?;
            let (factors, trace, iters) =
                network_decompose(x, spec, init.topology().clone(), Some(init), 0)?;
            finish_network(x, BaselineMethod::Tt, factors, trace, iters)
        }
        BaselineMethod::Tr => {
            let topo = TopologyGraph::cycle(x.shape().to_vec(), &spec.ranks)?;
            let (factors, trace, iters) =
                network_decompose(x, spec, topo, None, spec.fit_restarts)?;
            finish_network(x, BaselineMethod::Tr, factors, trace, iters)
        }
        BaselineMethod::Fctn => {
            let n = x.order();
            let mut topo = TopologyGraph::uniform(x.shape().to_vec(), 1)?;
            let mut idx = 0;
            for i in 0..n {
                for j in i + 1..n {
                    topo.set_rank(i, j, spec.ranks[idx])?;
                    idx += 1;
                }
            }
            let (factors, trace, iters) =
                network_decompose(x, spec, topo, None, spec.fit_restarts)?;
            finish_network(x, BaselineMethod::Fctn, factors, trace, iters)
        }
    }
}

/// TT bond ranks cannot exceed the unfolding dimensions on either side.
fn tt_cap_ranks(dims: &[usize], ranks: &[usize]) -> Vec<usize> {
    let n = dims.len();
    (0..n - 1)
        .map(|k| {
            let left: usize = dims[..=k].iter().product();
            let right: usize = dims[k + 1..].iter().product();
            ranks[k].min(left).min(right)
        })
        .collect()
}

fn finish_network(
    x: &DenseTensor,
    method: BaselineMethod,
    factors: FactorSet,
    trace: Vec<f64>,
    iters: usize,
) -> Result<BaselineResult> {
    let reconstruction = factors.contract()?;
    let final_rse = rse(&reconstruction, x)?;
    let storage_cost = factors.storage_cost();
    Ok(BaselineResult {
        method,
        factors: BaselineFactors::Network(factors),
        reconstruction,
        final_rse,
        rse_trace: trace,
        iters_used: iters,
        storage_cost,
    })
}

/// One row of the reconstruction comparison table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub rse: f64,
    pub time_seconds: f64,
    pub storage_cost: usize,
}

/// Emits the comparison table as CSV with a fixed header.
pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], w: &mut W) -> Result<()> {
    writeln!(w, "Method,RSE,Time,StorageCost")?;
    for row in rows {
        writeln!(
            w,
            "{},{:.6},{:.3},{}",
            row.method, row.rse, row.time_seconds, row.storage_cost
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn random_tensor(shape: &[usize], seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len: usize = shape.iter().product();
        let data: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        DenseTensor::new(shape.to_vec(), data).unwrap()
    }

    #[test]
    fn rank_arity_validation() {
        let x = random_tensor(&[3, 3, 3], 1);
        for (method, good, bad) in [
            (BaselineMethod::Tucker, 3usize, 2usize),
            (BaselineMethod::Tt, 2, 3),
            (BaselineMethod::Tr, 3, 1),
            (BaselineMethod::Fctn, 3, 4),
        ] {
            assert!(decompose(&x, &BaselineSpec::new(method, vec![2; good])).is_ok());
            assert!(decompose(&x, &BaselineSpec::new(method, vec![2; bad])).is_err());
        }
    }

    #[test]
    fn tucker_full_ranks_is_exact() {
        let x = random_tensor(&[4, 3, 5], 7);
        let spec = BaselineSpec::new(BaselineMethod::Tucker, vec![4, 3, 5]);
        let out = decompose(&x, &spec).unwrap();
        assert!(out.final_rse <= 1e-10, "rse {}", out.final_rse);
        assert_eq!(out.storage_cost, 4 * 3 * 5 + 16 + 9 + 25);
    }

    #[test]
    fn tt_recovers_planted_chain() {
        // Exact TT-rank-(2,2,2) 4th-order tensor fitted at those ranks.
        let topo = TopologyGraph::chain(vec![4, 4, 4, 4], &[2, 2, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let truth = FactorSet::random(topo, &mut rng);
        let x = truth.contract().unwrap();
        let spec = BaselineSpec::new(BaselineMethod::Tt, vec![2, 2, 2]);
        let out = decompose(&x, &spec).unwrap();
        assert!(out.final_rse <= 1e-6, "rse {}", out.final_rse);
    }

    #[test]
    fn tr_all_rank_one_fits_outer_product() {
        let topo = TopologyGraph::uniform(vec![3, 4, 5], 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let truth = FactorSet::random(topo, &mut rng);
        let x = truth.contract().unwrap();
        let spec = BaselineSpec::new(BaselineMethod::Tr, vec![1, 1, 1]);
        let out = decompose(&x, &spec).unwrap();
        assert!(out.final_rse <= 1e-6, "rse {}", out.final_rse);
    }

    #[test]
    fn fctn_fits_planted_instance() {
        let topo = TopologyGraph::uniform(vec![4, 4, 4], 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let truth = FactorSet::random(topo, &mut rng);
        let x = truth.contract().unwrap();
        let spec = BaselineSpec {
            rng_seed: 2,
            ..BaselineSpec::fctn_uniform(3, 2)
        };
        let out = decompose(&x, &spec).unwrap();
        assert!(out.final_rse <= 1e-3, "rse {}", out.final_rse);
        match &out.factors {
            BaselineFactors::Network(f) => {
                assert_eq!(out.storage_cost, f.storage_cost());
            }
            _ => panic!("expected network factors"),
        }
    }

    #[test]
    fn storage_accounting_matches_topology_definition() {
        // TT at bond ranks (2,3) on dims (4,5,6):
        // factors (4,2,1), (5,2,3), (6,1,3) -> 8 + 30 + 18.
        let x = random_tensor(&[4, 5, 6], 13);
        let out = decompose(&x, &BaselineSpec::new(BaselineMethod::Tt, vec![2, 3])).unwrap();
        assert_eq!(out.storage_cost, 8 + 30 + 18);
    }

    #[test]
    fn comparison_csv_format() {
        let rows = vec![ComparisonRow {
            method: "tt".into(),
            rse: 0.137,
            time_seconds: 1.25,
            storage_cost: 4047,
        }];
        let mut buf = Vec::new();
        write_comparison_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("Method,RSE,Time,StorageCost\n"));
        assert!(text.contains("tt,0.137000,1.250,4047"));
    }
}
