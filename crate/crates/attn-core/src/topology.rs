//! Tensor-network topologies: a symmetric edge-rank matrix over N factors
//! plus the factor tensors themselves, with full and leave-one-out network
//! contraction.
//!
//! Rank-1 edges are materialized as singleton dimensions rather than
//! structurally deleted, so factor mode order stays canonical across
//! pruning events: factor `n` always has shape
//! `(I_n, R_{0,n}, ..., R_{n-1,n}, R_{n,n+1}, ..., R_{n,N-1})`.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{contract_pair, DenseTensor};

/// Symmetric positive edge-rank matrix over `n_factors` nodes; rank 1
/// means the edge is absent. Diagonal entries are unused and fixed to 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyGraph {
    mode_sizes: Vec<usize>,
    ranks: Vec<Vec<usize>>,
}

impl TopologyGraph {
    /// Builds a topology from a full N x N rank matrix.
    pub fn new(mode_sizes: Vec<usize>, ranks: Vec<Vec<usize>>) -> Result<Self> {
        let n = mode_sizes.len();
        if n < 2 {
            return Err(Error::InvalidArgument(
                "a topology needs at least 2 factors".into(),
            ));
        }
        if mode_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!(
                "mode sizes must be >= 1, got {mode_sizes:?}"
            )));
        }
        if ranks.len() != n || ranks.iter().any(|row| row.len() != n) {
            return Err(Error::ShapeMismatch(format!(
                "rank matrix must be {n}x{n}"
            )));
        }
        for i in 0..n {
            if ranks[i][i] != 0 {
                return Err(Error::InvalidArgument(format!(
                    "rank matrix diagonal must be 0, got {} at ({i},{i})",
                    ranks[i][i]
                )));
            }
            for j in 0..n {
                if i != j {
                    if ranks[i][j] != ranks[j][i] {
                        return Err(Error::InvalidArgument(format!(
                            "rank matrix must be symmetric: ({i},{j})"
                        )));
                    }
                    if ranks[i][j] == 0 {
                        return Err(Error::InvalidArgument(format!(
                            "edge ranks must be >= 1, got 0 at ({i},{j})"
                        )));
                    }
                }
            }
        }
        Ok(Self { mode_sizes, ranks })
    }

    /// Complete graph at a uniform rank.
    pub fn uniform(mode_sizes: Vec<usize>, rank: usize) -> Result<Self> {
        let n = mode_sizes.len();
        let mut ranks = vec![vec![rank; n]; n];
        for (i, row) in ranks.iter_mut().enumerate() {
            row[i] = 0;
        }
        Self::new(mode_sizes, ranks)
    }

    /// Chain topology (tensor-train): `bond_ranks[k]` joins nodes k, k+1.
    pub fn chain(mode_sizes: Vec<usize>, bond_ranks: &[usize]) -> Result<Self> {
        let n = mode_sizes.len();
        if bond_ranks.len() + 1 != n {
            return Err(Error::InvalidArgument(format!(
                "chain over {n} nodes needs {} bond ranks, got {}",
                n - 1,
                bond_ranks.len()
            )));
        }
        let mut ranks = vec![vec![1usize; n]; n];
        for (i, row) in ranks.iter_mut().enumerate() {
            row[i] = 0;
        }
        for (k, &r) in bond_ranks.iter().enumerate() {
            ranks[k][k + 1] = r;
            ranks[k + 1][k] = r;
        }
        Self::new(mode_sizes, ranks)
    }

    /// Cycle topology (tensor-ring): `bond_ranks[k]` joins nodes k, k+1,
    /// with the last entry closing the ring between nodes 0 and N-1.
    pub fn cycle(mode_sizes: Vec<usize>, bond_ranks: &[usize]) -> Result<Self> {
        let n = mode_sizes.len();
        if bond_ranks.len() != n {
            return Err(Error::InvalidArgument(format!(
                "cycle over {n} nodes needs {n} bond ranks, got {}",
                bond_ranks.len()
            )));
        }
        let mut ranks = vec![vec![1usize; n]; n];
        for (i, row) in ranks.iter_mut().enumerate() {
            row[i] = 0;
        }
        for k in 0..n - 1 {
            ranks[k][k + 1] = bond_ranks[k];
            ranks[k + 1][k] = bond_ranks[k];
        }
        ranks[0][n - 1] = bond_ranks[n - 1];
        ranks[n - 1][0] = bond_ranks[n - 1];
        Self::new(mode_sizes, ranks)
    }

    pub fn n_factors(&self) -> usize {
        self.mode_sizes.len()
    }

    pub fn mode_sizes(&self) -> &[usize] {
        &self.mode_sizes
    }

    pub fn rank(&self, i: usize, j: usize) -> usize {
        self.ranks[i][j]
    }

    pub fn rank_matrix(&self) -> &[Vec<usize>] {
        &self.ranks
    }

    pub fn set_rank(&mut self, i: usize, j: usize, rank: usize) -> Result<()> {
        if i == j || i >= self.n_factors() || j >= self.n_factors() {
            return Err(Error::InvalidArgument(format!("bad edge ({i},{j})")));
        }
        if rank == 0 {
            return Err(Error::InvalidArgument("edge rank must be >= 1".into()));
        }
        self.ranks[i][j] = rank;
        self.ranks[j][i] = rank;
        Ok(())
    }

    /// All node pairs `(i, j)` with `i < j`, in lexicographic order.
    pub fn all_edges(&self) -> Vec<(usize, usize)> {
        let n = self.n_factors();
        let mut edges = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j));
            }
        }
        edges
    }

    /// Pairs with rank > 1, i.e. edges actually present.
    pub fn present_edges(&self) -> Vec<(usize, usize)> {
        self.all_edges()
            .into_iter()
            .filter(|&(i, j)| self.ranks[i][j] > 1)
            .collect()
    }

    /// Canonical shape of factor `n`: its physical mode first, then one
    /// rank mode per other node in ascending node order.
    pub fn factor_shape(&self, n: usize) -> Vec<usize> {
        let mut shape = Vec::with_capacity(self.n_factors());
        shape.push(self.mode_sizes[n]);
        for m in 0..self.n_factors() {
            if m != n {
                shape.push(self.ranks[n][m]);
            }
        }
        shape
    }

    /// Position of the edge-(n, other) rank mode within factor n's shape.
    pub fn rank_mode_position(&self, n: usize, other: usize) -> usize {
        debug_assert_ne!(n, other);
        if other < n {
            other + 1
        } else {
            other
        }
    }

    /// True when the rank->1 edges split the node set into more than one
    /// connected component.
    pub fn is_disconnected(&self) -> bool {
        let n = self.n_factors();
        let mut visited = vec![false; n];
        let mut stack = vec![0usize];
        visited[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if i != j && self.ranks[i][j] > 1 && !visited[j] {
                    visited[j] = true;
                    stack.push(j);
                }
            }
        }
        visited.iter().any(|&v| !v)
    }
}

/// A dangling leg of a network node during contraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Leg {
    /// Physical mode of factor n (size I_n).
    Phys(usize),
    /// Rank mode of edge (i, j), i < j.
    Edge(usize, usize),
}

#[derive(Debug, Clone)]
struct Node {
    tensor: DenseTensor,
    legs: Vec<Leg>,
    /// Smallest original factor index merged into this node; tie-break key.
    origin: usize,
}

fn contract_nodes(a: &Node, b: &Node) -> Result<Node> {
    let mut pairs = Vec::new();
    for (ia, la) in a.legs.iter().enumerate() {
        if let Some(ib) = b.legs.iter().position(|lb| lb == la) {
            pairs.push((ia, ib));
        }
    }
    let tensor = contract_pair(&a.tensor, &b.tensor, &pairs)?;
    let paired_a: Vec<usize> = pairs.iter().map(|&(ia, _)| ia).collect();
    let paired_b: Vec<usize> = pairs.iter().map(|&(_, ib)| ib).collect();
    let mut legs: Vec<Leg> = a
        .legs
        .iter()
        .enumerate()
        .filter(|(ia, _)| !paired_a.contains(ia))
        .map(|(_, &l)| l)
        .collect();
    legs.extend(
        b.legs
            .iter()
            .enumerate()
            .filter(|(ib, _)| !paired_b.contains(ib))
            .map(|(_, &l)| l),
    );
    Ok(Node {
        tensor,
        legs,
        origin: a.origin.min(b.origin),
    })
}

/// Size of the tensor produced by contracting nodes `a` and `b`.
fn merge_cost(a: &Node, b: &Node) -> u128 {
    let shared: u128 = a
        .legs
        .iter()
        .enumerate()
        .filter(|(_, la)| b.legs.contains(la))
        .map(|(ia, _)| a.tensor.shape()[ia] as u128)
        .product();
    let sa: u128 = a.tensor.len() as u128;
    let sb: u128 = b.tensor.len() as u128;
    (sa / shared) * (sb / shared)
}

/// Contracts a list of labeled nodes down to one, greedily picking the
/// cheapest intermediate at each step with a deterministic lexicographic
/// tie-break on origin indices.
fn contract_all_greedy(mut nodes: Vec<Node>) -> Result<Node> {
    while nodes.len() > 1 {
        let mut best: Option<(u128, usize, usize)> = None;
        for p in 0..nodes.len() {
            for q in p + 1..nodes.len() {
                let cost = merge_cost(&nodes[p], &nodes[q]);
                let key = (
                    cost,
                    nodes[p].origin.min(nodes[q].origin),
                    nodes[p].origin.max(nodes[q].origin),
                );
                let better = match best {
                    None => true,
                    Some((c, o1, o2)) => key < (c, o1, o2),
                };
                if better {
                    best = Some(key);
                    // Remember positions through origins; positions shift on
                    // removal, origins do not.
                }
            }
        }
        // Origins are unique: each is the min factor index of a disjoint
        // merged set, so they identify nodes across removals.
        let (_, o1, o2) = best.expect("nodes.len() > 1");
        let p_pos = nodes.iter().position(|n| n.origin == o1).unwrap();
        let q_pos = nodes.iter().position(|n| n.origin == o2).unwrap();
        let (lo, hi) = (p_pos.min(q_pos), p_pos.max(q_pos));
        let b = nodes.remove(hi);
        let a = nodes.remove(lo);
        nodes.push(contract_nodes(&a, &b)?);
    }
    Ok(nodes.pop().expect("non-empty node list"))
}

/// Contracts nodes strictly left to right: ((n0 * n1) * n2) * ...
fn contract_all_sequential(nodes: Vec<Node>) -> Result<Node> {
    let mut iter = nodes.into_iter();
    let mut acc = iter.next().expect("non-empty node list");
    for node in iter {
        acc = contract_nodes(&acc, &node)?;
    }
    Ok(acc)
}

/// Permutes a fully contracted node so its legs appear in `want` order.
fn arrange(node: Node, want: &[Leg]) -> Result<DenseTensor> {
    if node.legs.len() != want.len() {
        return Err(Error::ShapeMismatch(format!(
            "contraction left {} dangling legs, expected {}",
            node.legs.len(),
            want.len()
        )));
    }
    let perm: Vec<usize> = want
        .iter()
        .map(|l| {
            node.legs
                .iter()
                .position(|m| m == l)
                .ok_or_else(|| Error::ShapeMismatch(format!("missing leg {l:?}")))
        })
        .collect::<Result<_>>()?;
    node.tensor.permute(&perm)
}

/// The factor tensors of a network together with their topology.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    topology: TopologyGraph,
    factors: Vec<DenseTensor>,
}

impl FactorSet {
    pub fn new(topology: TopologyGraph, factors: Vec<DenseTensor>) -> Result<Self> {
        if factors.len() != topology.n_factors() {
            return Err(Error::ShapeMismatch(format!(
                "{} factors for a {}-node topology",
                factors.len(),
                topology.n_factors()
            )));
        }
        for (n, f) in factors.iter().enumerate() {
            let expect = topology.factor_shape(n);
            if f.shape() != expect.as_slice() {
                return Err(Error::ShapeMismatch(format!(
                    "factor {n} has shape {:?}, expected {:?}",
                    f.shape(),
                    expect
                )));
            }
        }
        Ok(Self { topology, factors })
    }

    /// Random factors with i.i.d. standard normal entries.
    pub fn random(topology: TopologyGraph, rng: &mut impl Rng) -> Self {
        let factors = (0..topology.n_factors())
            .map(|n| {
                let shape = topology.factor_shape(n);
                let len: usize = shape.iter().product();
                let data: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
                DenseTensor::new(shape, data).expect("shape/data consistent by construction")
            })
            .collect();
        Self { topology, factors }
    }

    pub fn topology(&self) -> &TopologyGraph {
        &self.topology
    }

    pub fn factors(&self) -> &[DenseTensor] {
        &self.factors
    }

    pub fn factor(&self, n: usize) -> &DenseTensor {
        &self.factors[n]
    }

    /// Replaces factor `n`, keeping the canonical shape invariant.
    pub fn set_factor(&mut self, n: usize, factor: DenseTensor) -> Result<()> {
        let expect = self.topology.factor_shape(n);
        if factor.shape() != expect.as_slice() {
            return Err(Error::ShapeMismatch(format!(
                "factor {n} has shape {:?}, expected {:?}",
                factor.shape(),
                expect
            )));
        }
        self.factors[n] = factor;
        Ok(())
    }

    /// Consumes the set, handing out topology and factors.
    pub fn into_parts(self) -> (TopologyGraph, Vec<DenseTensor>) {
        (self.topology, self.factors)
    }

    /// Total element count over all factors (singleton rank modes count 1).
    pub fn storage_cost(&self) -> usize {
        self.factors.iter().map(|f| f.len()).sum()
    }

    /// Diagnostic: pruning can leave the graph in several components, in
    /// which case the contraction factorizes into an outer product.
    pub fn is_disconnected(&self) -> bool {
        self.topology.is_disconnected()
    }

    fn node(&self, n: usize) -> Node {
        let mut legs = Vec::with_capacity(self.topology.n_factors());
        legs.push(Leg::Phys(n));
        for m in 0..self.topology.n_factors() {
            if m != n {
                legs.push(Leg::Edge(n.min(m), n.max(m)));
            }
        }
        Node {
            tensor: self.factors[n].clone(),
            legs,
            origin: n,
        }
    }

    fn phys_legs(&self, skip: Option<usize>) -> Vec<Leg> {
        (0..self.topology.n_factors())
            .filter(|&m| Some(m) != skip)
            .map(Leg::Phys)
            .collect()
    }

    /// Contracts the whole network into the represented tensor, with modes
    /// in factor order. Uses the greedy cheapest-intermediate order.
    pub fn contract(&self) -> Result<DenseTensor> {
        let nodes: Vec<Node> = (0..self.topology.n_factors())
            .map(|n| self.node(n))
            .collect();
        let merged = contract_all_greedy(nodes)?;
        arrange(merged, &self.phys_legs(None))
    }

    /// Same result as [`contract`](Self::contract), pairing factors
    /// strictly in node order. Kept as a cross-check for the greedy order.
    pub fn contract_sequential(&self) -> Result<DenseTensor> {
        let nodes: Vec<Node> = (0..self.topology.n_factors())
            .map(|n| self.node(n))
            .collect();
        let merged = contract_all_sequential(nodes)?;
        arrange(merged, &self.phys_legs(None))
    }

    /// Contraction of every factor except `n`.
    ///
    /// Dangling modes are ordered as all rank modes incident to `n` (other
    /// node ascending) followed by all physical modes (node ascending), so
    /// that reshaping the result to a matrix with `prod(ranks)` rows makes
    /// `X_(n) = G(n)_(1) * A` hold exactly when the network reproduces X.
    pub fn contract_except(&self, n: usize) -> Result<DenseTensor> {
        let nf = self.topology.n_factors();
        if n >= nf {
            return Err(Error::ModeOutOfRange { mode: n, order: nf });
        }
        let nodes: Vec<Node> = (0..nf).filter(|&m| m != n).map(|m| self.node(m)).collect();
        let merged = contract_all_greedy(nodes)?;
        let mut want: Vec<Leg> = (0..nf)
            .filter(|&m| m != n)
            .map(|m| Leg::Edge(n.min(m), n.max(m)))
            .collect();
        want.extend(self.phys_legs(Some(n)));
        arrange(merged, &want)
    }

    /// [`contract_except`](Self::contract_except) reshaped to the
    /// `prod(R_{m,n}) x prod(I_m, m != n)` matrix of the ALS subproblem.
    pub fn except_matrix(&self, n: usize) -> Result<nalgebra::DMatrix<f64>> {
        let a = self.contract_except(n)?;
        let rows: usize = (0..self.topology.n_factors())
            .filter(|&m| m != n)
            .map(|m| self.topology.rank(n, m))
            .product();
        let cols = a.len() / rows;
        Ok(nalgebra::DMatrix::from_vec(rows, cols, a.into_data()))
    }

    /// Writes a JSON manifest plus one raw tensor file per factor.
    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        for (n, f) in self.factors.iter().enumerate() {
            let name = format!("factor_{n}.attn");
            f.save(dir.join(&name))?;
            files.push(name);
        }
        let manifest = FactorSetManifest {
            n_factors: self.topology.n_factors(),
            mode_sizes: self.topology.mode_sizes().to_vec(),
            ranks: self.topology.rank_matrix().to_vec(),
            factor_files: files,
        };
        let json = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(dir.join("network.json"), json)?;
        Ok(())
    }

    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let text = std::fs::read_to_string(dir.join("network.json"))?;
        let manifest: FactorSetManifest = serde_json::from_str(&text)?;
        if manifest.factor_files.len() != manifest.n_factors {
            return Err(Error::Malformed(
                "factor file count does not match n_factors".into(),
            ));
        }
        let topology = TopologyGraph::new(manifest.mode_sizes, manifest.ranks)?;
        let factors = manifest
            .factor_files
            .iter()
            .map(|f| DenseTensor::load(dir.join(f)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(topology, factors)
    }
}

#[derive(Serialize, Deserialize)]
struct FactorSetManifest {
    n_factors: usize,
    mode_sizes: Vec<usize>,
    ranks: Vec<Vec<usize>>,
    factor_files: Vec<String>,
}

/// Direct evaluation of the network contraction by brute-force summation
/// over every edge-rank tuple. Exponential; only for small oracles.
pub fn contract_network_oracle(f: &FactorSet) -> Result<DenseTensor> {
    let topo = f.topology();
    let n = topo.n_factors();
    let edges = topo.all_edges();
    let edge_ranks: Vec<usize> = edges.iter().map(|&(i, j)| topo.rank(i, j)).collect();
    let out_shape = topo.mode_sizes().to_vec();
    DenseTensor::from_fn(out_shape, |phys| {
        let mut total = 0.0;
        let mut r_idx = vec![0usize; edges.len()];
        loop {
            let mut term = 1.0;
            for node in 0..n {
                let mut idx = Vec::with_capacity(n);
                idx.push(phys[node]);
                for other in 0..n {
                    if other == node {
                        continue;
                    }
                    let e = (node.min(other), node.max(other));
                    let pos = edges.iter().position(|&x| x == e).unwrap();
                    idx.push(r_idx[pos]);
                }
                term *= f.factor(node).get(&idx);
            }
            total += term;
            let mut k = 0;
            loop {
                if k == edges.len() {
                    return total;
                }
                r_idx[k] += 1;
                if r_idx[k] < edge_ranks[k] {
                    break;
                }
                r_idx[k] = 0;
                k += 1;
            }
        }
    })
}
