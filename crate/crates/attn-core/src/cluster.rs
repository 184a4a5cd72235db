//! Spectral clustering on an affinity matrix and external clustering
//! metrics: accuracy by optimal assignment, pair-counting F/P/R,
//! normalized mutual information and the adjusted Rand index.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEGREE_FLOOR: f64 = 1e-12;
pub const KMEANS_RESTARTS: usize = 20;
pub const KMEANS_MAX_ITERS: usize = 300;

/// The six external metrics. All but the adjusted Rand index live in
/// [0, 1]; AR can be negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub f_score: f64,
    pub precision: f64,
    pub recall: f64,
    pub nmi: f64,
    pub ar: f64,
    pub acc: f64,
}

/// Labels plus metrics for one clustering trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterReport {
    pub labels: Vec<usize>,
    pub metrics: Option<Metrics>,
    pub seed: u64,
    pub restarts: usize,
}

/// Normalized-cut spectral clustering: symmetric normalization of the
/// affinity, rows of the k leading eigenvectors normalized to unit length,
/// then seeded k-means. Zero degrees are floored at 1e-12 with a warning.
pub fn spectral_cluster(m: &DMatrix<f64>, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = m.nrows();
    if m.ncols() != n || n == 0 {
        return Err(Error::ShapeMismatch(format!(
            "affinity must be square, got {}x{}",
            n,
            m.ncols()
        )));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cluster count {k} out of range for {n} points"
        )));
    }
    let sym_tol = 1e-8 * (1.0 + m.amax());
    for r in 0..n {
        for c in r..n {
            if (m[(r, c)] - m[(c, r)]).abs() > sym_tol {
                return Err(Error::InvalidArgument(
                    "affinity matrix is not symmetric".into(),
                ));
            }
            if m[(r, c)] < -sym_tol {
                return Err(Error::InvalidArgument(
                    "affinity matrix has negative entries".into(),
                ));
            }
        }
    }
    if k == 1 {
        return Ok(vec![0; n]);
    }
    let mut inv_sqrt_deg = Vec::with_capacity(n);
    for r in 0..n {
        let mut degree: f64 = m.row(r).iter().sum();
        if degree < DEGREE_FLOOR {
            log::warn!("isolated vertex {r}: degree {degree:.3e} floored");
            degree = DEGREE_FLOOR;
        }
        inv_sqrt_deg.push(1.0 / degree.sqrt());
    }
    // Largest eigenvectors of D^-1/2 M D^-1/2 = smallest of the Laplacian.
    let normalized = DMatrix::from_fn(n, n, |r, c| m[(r, c)] * inv_sqrt_deg[r] * inv_sqrt_deg[c]);
    let eig = SymmetricEigen::new(normalized);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut embedding = DMatrix::zeros(n, k);
    for (col, &idx) in order.iter().take(k).enumerate() {
        embedding.set_column(col, &eig.eigenvectors.column(idx));
    }
    for r in 0..n {
        let norm = embedding.row(r).norm();
        if norm > DEGREE_FLOOR {
            for c in 0..k {
                embedding[(r, c)] /= norm;
            }
        }
    }
    let (labels, _) = kmeans(&embedding, k, seed, KMEANS_RESTARTS, KMEANS_MAX_ITERS);
    Ok(labels)
}

fn sq_dist(points: &DMatrix<f64>, r: usize, center: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (c, &cv) in center.iter().enumerate() {
        let d = points[(r, c)] - cv;
        acc += d * d;
    }
    acc
}

/// Lloyd's k-means over the rows of `points` with k-means++ seeding,
/// `restarts` independent seeded runs, and empty-cluster repair by
/// reseeding from the farthest point. Returns the labels and objective of
/// the best run (ties go to the earliest restart).
pub fn kmeans(
    points: &DMatrix<f64>,
    k: usize,
    seed: u64,
    restarts: usize,
    max_iters: usize,
) -> (Vec<usize>, f64) {
    let n = points.nrows();
    let dim = points.ncols();
    if k >= n {
        // Each point its own cluster (or more clusters than points).
        return ((0..n).map(|r| r.min(k - 1)).collect(), 0.0);
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(restart as u64));
        // k-means++ seeding.
        let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
        let first = rng.random_range(0..n);
        centers.push(points.row(first).iter().copied().collect());
        let mut d2: Vec<f64> = (0..n).map(|r| sq_dist(points, r, &centers[0])).collect();
        while centers.len() < k {
            let total: f64 = d2.iter().sum();
            let pick = if total <= 0.0 {
                rng.random_range(0..n)
            } else {
                let mut target = rng.random_range(0.0..total);
                let mut chosen = n - 1;
                for (r, &w) in d2.iter().enumerate() {
                    if target < w {
                        chosen = r;
                        break;
                    }
                    target -= w;
                }
                chosen
            };
            centers.push(points.row(pick).iter().copied().collect());
            for r in 0..n {
                d2[r] = d2[r].min(sq_dist(points, r, centers.last().unwrap()));
            }
        }
        let mut labels = vec![0usize; n];
        let mut objective = f64::INFINITY;
        for _ in 0..max_iters {
            let mut changed = false;
            let mut new_objective = 0.0;
            for r in 0..n {
                let mut best_c = 0;
                let mut best_d = f64::INFINITY;
                for (c, center) in centers.iter().enumerate() {
                    let d = sq_dist(points, r, center);
                    if d < best_d {
                        best_d = d;
                        best_c = c;
                    }
                }
                if labels[r] != best_c {
                    labels[r] = best_c;
                    changed = true;
                }
                new_objective += best_d;
            }
            // Recompute centers; repair empties from the farthest point.
            let mut counts = vec![0usize; k];
            let mut sums = vec![vec![0.0f64; dim]; k];
            for r in 0..n {
                counts[labels[r]] += 1;
                for c in 0..dim {
                    sums[labels[r]][c] += points[(r, c)];
                }
            }
            for c in 0..k {
                if counts[c] == 0 {
                    let far = (0..n)
                        .max_by(|&a, &b| {
                            sq_dist(points, a, &centers[labels[a]])
                                .partial_cmp(&sq_dist(points, b, &centers[labels[b]]))
                                .unwrap_or(std::cmp::Ordering::Equal)
                        })
                        .unwrap();
                    centers[c] = points.row(far).iter().copied().collect();
                    labels[far] = c;
                    changed = true;
                } else {
                    for d in 0..dim {
                        centers[c][d] = sums[c][d] / counts[c] as f64;
                    }
                }
            }
            objective = new_objective;
            if !changed {
                break;
            }
        }
        if best.as_ref().map_or(true, |(b, _)| objective < *b) {
            best = Some((objective, labels));
        }
    }
    let (objective, labels) = best.expect("at least one restart");
    (labels, objective)
}

fn check_lengths(a: &[usize], b: &[usize]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "label sequences differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("empty label sequences".into()));
    }
    Ok(())
}

fn contingency(a: &[usize], b: &[usize]) -> (Vec<Vec<usize>>, Vec<usize>, Vec<usize>) {
    let ka = a.iter().copied().max().unwrap_or(0) + 1;
    let kb = b.iter().copied().max().unwrap_or(0) + 1;
    let mut table = vec![vec![0usize; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let row_sums: Vec<usize> = table.iter().map(|row| row.iter().sum()).collect();
    let mut col_sums = vec![0usize; kb];
    for row in &table {
        for (c, &v) in row.iter().enumerate() {
            col_sums[c] += v;
        }
    }
    (table, row_sums, col_sums)
}

/// Hungarian algorithm (Jonker-Volgenant row reduction) on a square cost
/// matrix; returns the column assigned to each row.
fn hungarian_min(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut p = vec![0usize; n + 1]; // p[j] = row assigned to column j
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Clustering accuracy: the best fraction of agreeing samples over all
/// one-to-one relabelings, found by optimal assignment on the contingency
/// table.
pub fn accuracy(true_labels: &[usize], pred_labels: &[usize]) -> Result<f64> {
    check_lengths(true_labels, pred_labels)?;
    let (table, _, _) = contingency(true_labels, pred_labels);
    let ka = table.len();
    let kb = table[0].len();
    let n = ka.max(kb);
    let max_count = table
        .iter()
        .flat_map(|r| r.iter())
        .copied()
        .max()
        .unwrap_or(0) as i64;
    // Pad to square and flip counts into costs.
    let cost: Vec<Vec<i64>> = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| {
                    let count = if r < ka && c < kb { table[r][c] as i64 } else { 0 };
                    max_count - count
                })
                .collect()
        })
        .collect();
    let assignment = hungarian_min(&cost);
    let matched: usize = assignment
        .iter()
        .enumerate()
        .filter(|&(r, &c)| r < ka && c < kb)
        .map(|(r, &c)| table[r][c])
        .sum();
    Ok(matched as f64 / true_labels.len() as f64)
}

/// Pair-counting precision, recall and F-score. Degenerate denominators
/// (no same-cluster pairs on one side) yield 0 by convention.
pub fn pairwise_prf(true_labels: &[usize], pred_labels: &[usize]) -> Result<(f64, f64, f64)> {
    check_lengths(true_labels, pred_labels)?;
    if true_labels.len() < 2 {
        return Err(Error::InvalidArgument(
            "pair counting needs at least 2 samples".into(),
        ));
    }
    let n = true_labels.len();
    let mut tp = 0u64;
    let mut pred_pairs = 0u64;
    let mut true_pairs = 0u64;
    for a in 0..n {
        for b in a + 1..n {
            let same_true = true_labels[a] == true_labels[b];
            let same_pred = pred_labels[a] == pred_labels[b];
            if same_true {
                true_pairs += 1;
            }
            if same_pred {
                pred_pairs += 1;
            }
            if same_true && same_pred {
                tp += 1;
            }
        }
    }
    let precision = if pred_pairs > 0 {
        tp as f64 / pred_pairs as f64
    } else {
        0.0
    };
    let recall = if true_pairs > 0 {
        tp as f64 / true_pairs as f64
    } else {
        0.0
    };
    let f = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok((f, precision, recall))
}

fn entropy(counts: &[usize], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information with arithmetic-mean normalization.
/// When both partitions are single-cluster (zero entropy on both sides)
/// they are identical as partitions, so the value is 1.
pub fn nmi(true_labels: &[usize], pred_labels: &[usize]) -> Result<f64> {
    check_lengths(true_labels, pred_labels)?;
    let n = true_labels.len() as f64;
    let (table, row_sums, col_sums) = contingency(true_labels, pred_labels);
    let h_true = entropy(&row_sums, n);
    let h_pred = entropy(&col_sums, n);
    if h_true + h_pred == 0.0 {
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for (r, row) in table.iter().enumerate() {
        for (c, &count) in row.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let p = count as f64 / n;
            let pr = row_sums[r] as f64 / n;
            let pc = col_sums[c] as f64 / n;
            mi += p * (p / (pr * pc)).ln();
        }
    }
    Ok((2.0 * mi / (h_true + h_pred)).clamp(0.0, 1.0))
}

fn choose2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index from the contingency table. A zero adjustment
/// denominator (both partitions trivial) returns 1.
pub fn adjusted_rand(true_labels: &[usize], pred_labels: &[usize]) -> Result<f64> {
    check_lengths(true_labels, pred_labels)?;
    let n = true_labels.len();
    let (table, row_sums, col_sums) = contingency(true_labels, pred_labels);
    let sum_cells: f64 = table
        .iter()
        .flat_map(|row| row.iter())
        .map(|&c| choose2(c))
        .sum();
    let sum_rows: f64 = row_sums.iter().map(|&c| choose2(c)).sum();
    let sum_cols: f64 = col_sums.iter().map(|&c| choose2(c)).sum();
    let total = choose2(n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_rows * sum_cols / total;
    let max_index = 0.5 * (sum_rows + sum_cols);
    let denom = max_index - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((sum_cells - expected) / denom)
}

/// All six metrics at once.
pub fn evaluate(true_labels: &[usize], pred_labels: &[usize]) -> Result<Metrics> {
    let (f_score, precision, recall) = pairwise_prf(true_labels, pred_labels)?;
    Ok(Metrics {
        f_score,
        precision,
        recall,
        nmi: nmi(true_labels, pred_labels)?,
        ar: adjusted_rand(true_labels, pred_labels)?,
        acc: accuracy(true_labels, pred_labels)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;

    #[test]
    fn identical_labelings_score_one() {
        let labels = vec![0, 0, 1, 1, 2, 2, 1];
        let m = evaluate(&labels, &labels).unwrap();
        for v in [m.f_score, m.precision, m.recall, m.nmi, m.ar, m.acc] {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn relabeling_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let truth: Vec<usize> = (0..60).map(|_| rng.random_range(0..4)).collect();
        let pred: Vec<usize> = (0..60).map(|_| rng.random_range(0..4)).collect();
        let base = evaluate(&truth, &pred).unwrap();
        for _ in 0..20 {
            let mut perm: Vec<usize> = (0..4).collect();
            perm.shuffle(&mut rng);
            let relabeled: Vec<usize> = pred.iter().map(|&l| perm[l]).collect();
            let m = evaluate(&truth, &relabeled).unwrap();
            assert!((m.acc - base.acc).abs() < 1e-12);
            assert!((m.nmi - base.nmi).abs() < 1e-12);
            assert!((m.ar - base.ar).abs() < 1e-12);
            assert!((m.f_score - base.f_score).abs() < 1e-12);
        }
    }

    #[test]
    fn fixture_values_match_oracles() {
        // Enumerating all 6 pairs of (0,0,1,1) vs (0,1,1,1): one true
        // positive pair {3,4}, three predicted pairs, two true pairs.
        let truth = vec![0, 0, 1, 1];
        let pred = vec![0, 1, 1, 1];
        let (f, p, r) = pairwise_prf(&truth, &pred).unwrap();
        assert!((p - 1.0 / 3.0).abs() < 1e-12);
        assert!((r - 0.5).abs() < 1e-12);
        assert!((f - 0.4).abs() < 1e-12);
        // Exhaustive assignment over the 2 bijections gives 3/4 matched.
        assert!((accuracy(&truth, &pred).unwrap() - 0.75).abs() < 1e-12);
        // Contingency (2,0;1,1): AR denominator terms by hand.
        let ar = adjusted_rand(&truth, &pred).unwrap();
        assert!((ar - 0.0).abs() < 1e-12, "ar {ar}");
        // NMI by direct formula evaluation over the contingency cells
        // (1,1;0,2): p(0,0)=1/4, p(0,1)=1/4, p(1,1)=1/2.
        let mi = 0.25 * (0.25f64 / (0.5 * 0.25)).ln()
            + 0.25 * (0.25f64 / (0.5 * 0.75)).ln()
            + 0.5 * (0.5f64 / (0.5 * 0.75)).ln();
        let h_true = 2.0f64.ln();
        let h_pred = -(0.25f64.ln() * 0.25 + 0.75f64.ln() * 0.75);
        let expect = 2.0 * mi / (h_true + h_pred);
        assert!((nmi(&truth, &pred).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn accuracy_matches_brute_force_permutations() {
        fn brute(truth: &[usize], pred: &[usize], k: usize) -> f64 {
            let mut perm: Vec<usize> = (0..k).collect();
            let mut best = 0usize;
            // Heap's algorithm over all permutations.
            fn heaps(perm: &mut Vec<usize>, n: usize, truth: &[usize], pred: &[usize], best: &mut usize) {
                if n == 1 {
                    let matched = truth
                        .iter()
                        .zip(pred)
                        .filter(|&(&t, &p)| t == perm[p])
                        .count();
                    *best = (*best).max(matched);
                    return;
                }
                for i in 0..n {
                    heaps(perm, n - 1, truth, pred, best);
                    if n % 2 == 0 {
                        perm.swap(i, n - 1);
                    } else {
                        perm.swap(0, n - 1);
                    }
                }
            }
            heaps(&mut perm, k, truth, pred, &mut best);
            best as f64 / truth.len() as f64
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let k = 2 + (trial % 4);
            let truth: Vec<usize> = (0..30).map(|_| rng.random_range(0..k)).collect();
            let pred: Vec<usize> = (0..30).map(|_| rng.random_range(0..k)).collect();
            let fast = accuracy(&truth, &pred).unwrap();
            let slow = brute(&truth, &pred, k);
            assert!((fast - slow).abs() < 1e-12, "trial {trial}: {fast} vs {slow}");
        }
    }

    #[test]
    fn ar_near_zero_for_independent_labelings() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let truth: Vec<usize> = (0..1000).map(|_| rng.random_range(0..4)).collect();
        let pred: Vec<usize> = (0..1000).map(|_| rng.random_range(0..4)).collect();
        let ar = adjusted_rand(&truth, &pred).unwrap();
        assert!(ar.abs() <= 0.05, "ar {ar}");
    }

    #[test]
    fn degenerate_conventions() {
        let ones = vec![0usize; 5];
        assert_eq!(nmi(&ones, &ones).unwrap(), 1.0);
        let other = vec![0, 0, 0, 1, 1];
        assert_eq!(nmi(&ones, &other).unwrap(), 0.0);
        // All-singleton prediction: no predicted pairs.
        let truth = vec![0, 0, 1, 1];
        let pred = vec![0, 1, 2, 3];
        let (f, p, r) = pairwise_prf(&truth, &pred).unwrap();
        assert_eq!((f, p, r), (0.0, 0.0, 0.0));
        assert!(accuracy(&truth, &[0, 0]).is_err());
    }

    #[test]
    fn spectral_separates_block_diagonal_affinity() {
        let n = 12;
        let mut m = DMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                if (r < 6) == (c < 6) {
                    m[(r, c)] = 1.0;
                }
            }
        }
        let labels = spectral_cluster(&m, 2, 3).unwrap();
        let truth: Vec<usize> = (0..n).map(|r| usize::from(r < 6)).collect();
        assert!((accuracy(&truth, &labels).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(spectral_cluster(&m, 1, 3).unwrap(), vec![0; n]);
    }

    #[test]
    fn spectral_recovers_planted_partition_with_noise() {
        let mut hits = 0;
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let n = 30;
            let block = |r: usize| r / 10;
            let mut m = DMatrix::zeros(n, n);
            for r in 0..n {
                for c in r..n {
                    let inside = block(r) == block(c);
                    let base = if inside { 1.0 } else { 0.0 };
                    // 5% cross-block noise links.
                    let noisy = if !inside && rng.random_range(0.0..1.0) < 0.05 {
                        0.5
                    } else {
                        0.0
                    };
                    let w = base + noisy;
                    m[(r, c)] = w;
                    m[(c, r)] = w;
                }
            }
            let labels = spectral_cluster(&m, 3, seed).unwrap();
            let truth: Vec<usize> = (0..n).map(block).collect();
            if (accuracy(&truth, &labels).unwrap() - 1.0).abs() < 1e-12 {
                hits += 1;
            }
        }
        assert!(hits >= 9, "planted partition recovered in {hits}/10 seeds");
    }

    #[test]
    fn spectral_is_deterministic_per_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 15;
        let raw = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.0..1.0));
        let m = &raw * raw.transpose();
        let a = spectral_cluster(&m, 3, 42).unwrap();
        let b = spectral_cluster(&m, 3, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn spectral_rejects_bad_affinity() {
        let mut m = DMatrix::from_element(3, 3, 1.0);
        m[(0, 1)] = 2.0; // asymmetric
        assert!(spectral_cluster(&m, 2, 0).is_err());
        let m = DMatrix::from_element(3, 3, -1.0);
        assert!(spectral_cluster(&m, 2, 0).is_err());
    }

    #[test]
    fn kmeans_objective_non_increasing_preserved_by_best_pick() {
        // The returned objective must be the minimum over restarts and
        // stay consistent with its labels.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let points = DMatrix::from_fn(40, 2, |r, _| {
            if r < 20 {
                rng.random_range(-1.0..-0.5)
            } else {
                rng.random_range(0.5..1.0)
            }
        });
        let (labels, objective) = kmeans(&points, 2, 5, 10, 100);
        // Recompute the objective from labels and centroids.
        let mut sums = vec![vec![0.0f64; 2]; 2];
        let mut counts = vec![0usize; 2];
        for r in 0..40 {
            counts[labels[r]] += 1;
            for c in 0..2 {
                sums[labels[r]][c] += points[(r, c)];
            }
        }
        let centers: Vec<Vec<f64>> = sums
            .iter()
            .zip(&counts)
            .map(|(s, &cnt)| s.iter().map(|v| v / cnt as f64).collect())
            .collect();
        let recomputed: f64 = (0..40).map(|r| sq_dist(&points, r, &centers[labels[r]])).sum();
        assert!(recomputed <= objective + 1e-9);
    }
}
