//! Small dense linear-algebra helpers.
//!
//! Leading singular subspaces are computed through symmetric
//! eigendecomposition of the Gram matrix rather than `DMatrix::svd`,
//! which can silently return non-converged results.

use nalgebra::{DMatrix, SymmetricEigen};

/// Indices of eigenvalues sorted descending.
fn eigen_order(values: &nalgebra::DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order
}

/// The `k` leading left singular vectors of `m`, as columns.
pub fn top_left_singular_vectors(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let k = k.min(m.nrows());
    let gram = m * m.transpose();
    let eig = SymmetricEigen::new(gram);
    let order = eigen_order(&eig.eigenvalues);
    let mut u = DMatrix::zeros(m.nrows(), k);
    for (col, &idx) in order.iter().take(k).enumerate() {
        u.set_column(col, &eig.eigenvectors.column(idx));
    }
    u
}

/// Rank-`r` factorization `b ~= l^T * r_mat` with the truncation error of
/// the leading-singular-value expansion; exact when `rank(b) <= r`.
pub fn split_low_rank(b: &DMatrix<f64>, r: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let gram = b.transpose() * b;
    let eig = SymmetricEigen::new(gram);
    let order = eigen_order(&eig.eigenvalues);
    let mut l = DMatrix::zeros(r, b.nrows());
    let mut rm = DMatrix::zeros(r, b.ncols());
    for (slot, &idx) in order.iter().take(r.min(order.len())).enumerate() {
        let sigma = eig.eigenvalues[idx].max(0.0).sqrt();
        if sigma <= 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(idx);
        let bv = b * v; // sigma * u
        let shalf = sigma.sqrt();
        for c in 0..b.nrows() {
            l[(slot, c)] = bv[c] / shalf;
        }
        for c in 0..b.ncols() {
            rm[(slot, c)] = shalf * v[c];
        }
    }
    (l, rm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn leading_vectors_are_orthonormal_and_span() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // Rank-2 matrix plus nothing else.
        let a = DMatrix::from_fn(6, 2, |_, _| rng.random_range(-1.0..1.0));
        let b = DMatrix::from_fn(2, 9, |_, _| rng.random_range(-1.0..1.0));
        let m = &a * &b;
        let u = top_left_singular_vectors(&m, 2);
        let gram = u.transpose() * &u;
        assert!((gram - DMatrix::identity(2, 2)).norm() < 1e-10);
        // Projection captures everything.
        let resid = &m - &u * (u.transpose() * &m);
        assert!(resid.norm() < 1e-10);
    }

    #[test]
    fn split_is_exact_at_sufficient_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = DMatrix::from_fn(7, 3, |_, _| rng.random_range(-1.0..1.0));
        let b = DMatrix::from_fn(3, 5, |_, _| rng.random_range(-1.0..1.0));
        let m = &a * &b;
        let (l, r) = split_low_rank(&m, 3);
        assert!((l.transpose() * r - &m).norm() < 1e-10);
    }
}
