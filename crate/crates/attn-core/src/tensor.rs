//! Dense N-way tensors with a fixed column-major (first-index-fastest)
//! linearization, plus the handful of primitives everything else is built
//! on: mode-n unfolding/folding, reshape, Frobenius norms and generalized
//! pairwise contraction.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Magic bytes at the head of the raw tensor file format.
pub const TENSOR_MAGIC: &[u8; 4] = b"ATTN";
/// Current raw tensor file format version.
pub const TENSOR_FORMAT_VERSION: u32 = 1;

/// Dense real-valued tensor of arbitrary order.
///
/// Data is stored flat in column-major order: the first index varies
/// fastest. All public operations preserve this convention, including
/// file I/O. Modes are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    /// Builds a tensor from a shape and flat column-major data.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::InvalidArgument("tensor order must be >= 1".into()));
        }
        if shape.iter().any(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!(
                "all mode sizes must be >= 1, got {shape:?}"
            )));
        }
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "data length {} does not match shape {:?} (expected {})",
                data.len(),
                shape,
                expected
            )));
        }
        Ok(Self { shape, data })
    }

    /// All-zero tensor of the given shape.
    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let len: usize = shape.iter().product();
        Self::new(shape, vec![0.0; len])
    }

    /// Tensor whose entry at each multi-index is produced by `f`.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len: usize = shape.iter().product();
        let order = shape.len();
        let mut idx = vec![0usize; order];
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f(&idx));
            for k in 0..order {
                idx[k] += 1;
                if idx[k] < shape[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Self::new(shape, data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Column-major strides for the current shape.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.shape.len()];
        for k in 1..self.shape.len() {
            strides[k] = strides[k - 1] * self.shape[k - 1];
        }
        strides
    }

    /// Linear offset of a multi-index.
    pub fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut lin = 0usize;
        let mut stride = 1usize;
        for (k, &i) in idx.iter().enumerate() {
            debug_assert!(i < self.shape[k]);
            lin += i * stride;
            stride *= self.shape[k];
        }
        lin
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.linear_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let lin = self.linear_index(idx);
        self.data[lin] = value;
    }

    /// Reorders modes: output mode `k` is input mode `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let n = self.order();
        if perm.len() != n {
            return Err(Error::InvalidArgument(format!(
                "permutation length {} != order {}",
                perm.len(),
                n
            )));
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || seen[p] {
                return Err(Error::InvalidArgument(format!(
                    "invalid mode permutation {perm:?}"
                )));
            }
            seen[p] = true;
        }
        // Identity permutations are common on hot paths.
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return Ok(self.clone());
        }
        let in_strides = self.strides();
        let new_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let src_strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
        let mut out = vec![0.0; self.data.len()];
        let mut idx = vec![0usize; n];
        let mut src = 0usize;
        // Odometer walk over the output in storage order.
        for slot in out.iter_mut() {
            *slot = self.data[src];
            for k in 0..n {
                idx[k] += 1;
                src += src_strides[k];
                if idx[k] < new_shape[k] {
                    break;
                }
                src -= src_strides[k] * new_shape[k];
                idx[k] = 0;
            }
        }
        Self::new(new_shape, out)
    }

    /// Mode-n unfolding: an `I_n x prod(I_m, m != n)` matrix whose columns
    /// are mode-n fibers, remaining modes enumerated in ascending order,
    /// first index fastest.
    pub fn mode_n_unfold(&self, mode: usize) -> Result<DMatrix<f64>> {
        let n = self.order();
        if mode >= n {
            return Err(Error::ModeOutOfRange { mode, order: n });
        }
        let rows = self.shape[mode];
        let cols = self.data.len() / rows;
        if mode == 0 {
            // Already in the right layout.
            return Ok(DMatrix::from_vec(rows, cols, self.data.clone()));
        }
        let mut perm = Vec::with_capacity(n);
        perm.push(mode);
        perm.extend((0..n).filter(|&m| m != mode));
        let permuted = self.permute(&perm)?;
        Ok(DMatrix::from_vec(rows, cols, permuted.data))
    }

    /// Inverse of [`mode_n_unfold`](Self::mode_n_unfold) for a target shape.
    pub fn fold_n(matrix: &DMatrix<f64>, mode: usize, shape: &[usize]) -> Result<Self> {
        let n = shape.len();
        if mode >= n {
            return Err(Error::ModeOutOfRange { mode, order: n });
        }
        let total: usize = shape.iter().product();
        if matrix.nrows() != shape[mode] || matrix.nrows() * matrix.ncols() != total {
            return Err(Error::ShapeMismatch(format!(
                "matrix {}x{} cannot fold to shape {:?} along mode {}",
                matrix.nrows(),
                matrix.ncols(),
                shape,
                mode
            )));
        }
        let mut permuted_shape = Vec::with_capacity(n);
        permuted_shape.push(shape[mode]);
        permuted_shape.extend((0..n).filter(|&m| m != mode).map(|m| shape[m]));
        let t = Self::new(permuted_shape, matrix.as_slice().to_vec())?;
        if mode == 0 {
            return Ok(t);
        }
        // Output mode k takes permuted mode inv[k].
        let mut inv = vec![0usize; n];
        inv[mode] = 0;
        for m in 0..n {
            match m.cmp(&mode) {
                std::cmp::Ordering::Less => inv[m] = m + 1,
                std::cmp::Ordering::Greater => inv[m] = m,
                std::cmp::Ordering::Equal => {}
            }
        }
        t.permute(&inv)
    }

    /// Replaces the shape metadata, keeping the flat data untouched.
    pub fn reshape(&self, new_shape: Vec<usize>) -> Result<Self> {
        let expected: usize = new_shape.iter().product();
        if expected != self.data.len() || new_shape.iter().any(|&s| s == 0) {
            return Err(Error::ShapeMismatch(format!(
                "cannot reshape {:?} ({} elements) to {:?}",
                self.shape,
                self.data.len(),
                new_shape
            )));
        }
        Self::new(new_shape, self.data.clone())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
    }

    /// Mean over one mode, keeping it as a singleton dimension.
    pub fn mean_axis_keep(&self, mode: usize) -> Result<Self> {
        let unfolded = self.mode_n_unfold(mode)?;
        let means = unfolded.row_mean();
        let mut shape = self.shape.clone();
        shape[mode] = 1;
        let mean_mat = DMatrix::from_row_slice(1, unfolded.ncols(), means.as_slice());
        Self::fold_n(&mean_mat, mode, &shape)
    }

    /// Elementwise sum; shapes must match exactly.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "add: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Self::new(self.shape.clone(), data)
    }

    /// Elementwise difference; shapes must match exactly.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "sub: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Self::new(self.shape.clone(), data)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    /// Writes the raw little-endian tensor format.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(TENSOR_MAGIC)?;
        w.write_u32::<LittleEndian>(TENSOR_FORMAT_VERSION)?;
        w.write_u32::<LittleEndian>(self.order() as u32)?;
        for &s in &self.shape {
            w.write_u64::<LittleEndian>(s as u64)?;
        }
        for &x in &self.data {
            w.write_f64::<LittleEndian>(x)?;
        }
        Ok(())
    }

    /// Reads the raw little-endian tensor format.
    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != TENSOR_MAGIC {
            return Err(Error::UnsupportedFormat(format!(
                "bad magic {magic:?}, expected {TENSOR_MAGIC:?}"
            )));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != TENSOR_FORMAT_VERSION {
            return Err(Error::Malformed(format!(
                "unsupported tensor format version {version}"
            )));
        }
        let order = r.read_u32::<LittleEndian>()? as usize;
        if order == 0 {
            return Err(Error::Malformed("tensor order 0 in file".into()));
        }
        let mut shape = Vec::with_capacity(order);
        for _ in 0..order {
            let s = r.read_u64::<LittleEndian>()? as usize;
            if s == 0 {
                return Err(Error::Malformed("zero mode size in file".into()));
            }
            shape.push(s);
        }
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(r.read_f64::<LittleEndian>()?);
        }
        Self::new(shape, data)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }
}

/// Relative standard error `||recon - reference||_F / ||reference||_F`.
pub fn rse(reconstruction: &DenseTensor, reference: &DenseTensor) -> Result<f64> {
    if reconstruction.shape() != reference.shape() {
        return Err(Error::ShapeMismatch(format!(
            "rse: {:?} vs {:?}",
            reconstruction.shape(),
            reference.shape()
        )));
    }
    let ref_norm = reference.frobenius_norm();
    if ref_norm == 0.0 {
        return Err(Error::ZeroNormReference);
    }
    let diff: f64 = reconstruction
        .data()
        .iter()
        .zip(reference.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(diff.sqrt() / ref_norm)
}

/// Contracts `a` with `b` over the given `(mode_of_a, mode_of_b)` pairs.
///
/// Output modes are a's unpaired modes in ascending order followed by b's
/// unpaired modes in ascending order. An empty pair list yields the outer
/// product. A contraction that would leave no dangling modes returns a
/// single-element tensor of shape `[1]`.
pub fn contract_pair(
    a: &DenseTensor,
    b: &DenseTensor,
    pairs: &[(usize, usize)],
) -> Result<DenseTensor> {
    let na = a.order();
    let nb = b.order();
    let mut used_a = vec![false; na];
    let mut used_b = vec![false; nb];
    for &(ma, mb) in pairs {
        if ma >= na {
            return Err(Error::ModeOutOfRange {
                mode: ma,
                order: na,
            });
        }
        if mb >= nb {
            return Err(Error::ModeOutOfRange {
                mode: mb,
                order: nb,
            });
        }
        if used_a[ma] || used_b[mb] {
            return Err(Error::InvalidArgument(format!(
                "mode paired twice in contraction: ({ma}, {mb})"
            )));
        }
        if a.shape()[ma] != b.shape()[mb] {
            return Err(Error::ShapeMismatch(format!(
                "paired modes differ in size: a[{}]={} vs b[{}]={}",
                ma,
                a.shape()[ma],
                mb,
                b.shape()[mb]
            )));
        }
        used_a[ma] = true;
        used_b[mb] = true;
    }

    let free_a: Vec<usize> = (0..na).filter(|&m| !used_a[m]).collect();
    let free_b: Vec<usize> = (0..nb).filter(|&m| !used_b[m]).collect();

    let mut perm_a: Vec<usize> = free_a.clone();
    perm_a.extend(pairs.iter().map(|&(ma, _)| ma));
    let mut perm_b: Vec<usize> = pairs.iter().map(|&(_, mb)| mb).collect();
    perm_b.extend(free_b.iter().copied());

    let shared: usize = pairs.iter().map(|&(ma, _)| a.shape()[ma]).product();
    let rows: usize = free_a.iter().map(|&m| a.shape()[m]).product();
    let cols: usize = free_b.iter().map(|&m| b.shape()[m]).product();

    let a_perm = a.permute(&perm_a)?;
    let b_perm = b.permute(&perm_b)?;
    let a_mat = DMatrix::from_vec(rows, shared, a_perm.into_data());
    let b_mat = DMatrix::from_vec(shared, cols, b_perm.into_data());
    let c = a_mat * b_mat;

    let mut out_shape: Vec<usize> = free_a.iter().map(|&m| a.shape()[m]).collect();
    out_shape.extend(free_b.iter().map(|&m| b.shape()[m]));
    if out_shape.is_empty() {
        out_shape.push(1);
    }
    DenseTensor::new(out_shape, c.as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(shape: &[usize], seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len: usize = shape.iter().product();
        let data: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        DenseTensor::new(shape.to_vec(), data).unwrap()
    }

    #[test]
    fn new_rejects_bad_lengths() {
        assert!(DenseTensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(DenseTensor::new(vec![2, 0], vec![]).is_err());
        assert!(DenseTensor::new(vec![], vec![]).is_err());
    }

    #[test]
    fn unfold_matrix_mode_zero_is_identity() {
        let t = DenseTensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = t.mode_n_unfold(0).unwrap();
        assert_eq!(m, DMatrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn unfold_enumerated_fibers() {
        // 2x2x2 tensor with data 1..8 in storage order. Mode-0 unfolding is
        // 2x4 with first column (1,2); verify every entry against the
        // index-arithmetic oracle for all three modes.
        let t = DenseTensor::new(vec![2, 2, 2], (1..=8).map(|x| x as f64).collect()).unwrap();
        let m0 = t.mode_n_unfold(0).unwrap();
        assert_eq!(m0.column(0).as_slice(), &[1.0, 2.0]);
        for mode in 0..3 {
            let m = t.mode_n_unfold(mode).unwrap();
            let rest: Vec<usize> = (0..3).filter(|&k| k != mode).collect();
            for i0 in 0..2 {
                for i1 in 0..2 {
                    for i2 in 0..2 {
                        let idx = [i0, i1, i2];
                        let col = idx[rest[0]] + 2 * idx[rest[1]];
                        assert_eq!(m[(idx[mode], col)], t.get(&idx));
                    }
                }
            }
        }
    }

    #[test]
    fn fold_unfold_round_trip_is_exact() {
        let t = random_tensor(&[3, 4, 5], 7);
        for mode in 0..3 {
            let m = t.mode_n_unfold(mode).unwrap();
            let back = DenseTensor::fold_n(&m, mode, t.shape()).unwrap();
            assert_eq!(back, t);
        }
    }

    #[test]
    fn fold_matches_index_oracle() {
        // Random 6x4 matrix folded to (2,2,6) along mode 2: entry (i2, col)
        // of the matrix must land at tensor index (i0,i1,i2) with
        // col = i0 + 2*i1.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = DMatrix::from_fn(6, 4, |_, _| rng.random_range(-1.0..1.0));
        let t = DenseTensor::fold_n(&m, 2, &[2, 2, 6]).unwrap();
        for i0 in 0..2 {
            for i1 in 0..2 {
                for i2 in 0..6 {
                    assert_eq!(t.get(&[i0, i1, i2]), m[(i2, i0 + 2 * i1)]);
                }
            }
        }
        assert_eq!(t.mode_n_unfold(2).unwrap(), m);
    }

    #[test]
    fn fold_rejects_inconsistent_shapes() {
        let m = DMatrix::from_element(2, 3, 1.0);
        assert!(DenseTensor::fold_n(&m, 0, &[2, 2, 2]).is_err());
        assert!(DenseTensor::fold_n(&m, 3, &[2, 3]).is_err());
    }

    #[test]
    fn unfold_rejects_out_of_range_mode() {
        let t = random_tensor(&[2, 2], 1);
        assert!(matches!(
            t.mode_n_unfold(2),
            Err(Error::ModeOutOfRange { mode: 2, order: 2 })
        ));
    }

    #[test]
    fn reshape_preserves_flat_data() {
        let t = random_tensor(&[11, 15, 11, 15, 3], 5);
        let r = t.reshape(vec![165, 165, 3]).unwrap();
        assert_eq!(r.data(), t.data());
        let back = r.reshape(vec![11, 15, 11, 15, 3]).unwrap();
        assert_eq!(back, t);
        assert!(t.reshape(vec![165, 165, 4]).is_err());
    }

    #[test]
    fn frobenius_norm_basics() {
        let z = DenseTensor::zeros(vec![3, 3]).unwrap();
        assert_eq!(z.frobenius_norm(), 0.0);
        let ones = DenseTensor::new(vec![2, 2, 2], vec![1.0; 8]).unwrap();
        assert!((ones.frobenius_norm() - 8.0f64.sqrt()).abs() < 1e-15);
        let t = random_tensor(&[4, 5, 2], 9);
        let oracle: f64 = t.data().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((t.frobenius_norm() - oracle).abs() <= 1e-12);
    }

    #[test]
    fn rse_basics_and_scale_covariance() {
        let x = random_tensor(&[3, 4], 11);
        assert_eq!(rse(&x, &x).unwrap(), 0.0);
        let zero = DenseTensor::zeros(vec![3, 4]).unwrap();
        assert!((rse(&zero, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(rse(&x, &zero), Err(Error::ZeroNormReference)));
        for c in [0.25, 1.5, -2.0] {
            let scaled = x.scale(c);
            assert!((rse(&scaled, &x).unwrap() - (c - 1.0f64).abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn contract_ones_is_matrix_product() {
        let a = DenseTensor::new(vec![2, 3], vec![1.0; 6]).unwrap();
        let b = DenseTensor::new(vec![3, 4], vec![1.0; 12]).unwrap();
        let c = contract_pair(&a, &b, &[(1, 0)]).unwrap();
        assert_eq!(c.shape(), &[2, 4]);
        assert!(c.data().iter().all(|&x| (x - 3.0).abs() < 1e-15));
    }

    #[test]
    fn contract_matches_triple_loop_oracle() {
        let a = random_tensor(&[3, 3, 3], 21);
        let b = random_tensor(&[3, 3, 3], 22);
        let c = contract_pair(&a, &b, &[(2, 0)]).unwrap();
        assert_eq!(c.shape(), &[3, 3, 3, 3]);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let mut acc = 0.0;
                        for s in 0..3 {
                            acc += a.get(&[i, j, s]) * b.get(&[s, k, l]);
                        }
                        assert!((c.get(&[i, j, k, l]) - acc).abs() <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn contract_multi_pair_matches_loop_oracle() {
        let a = random_tensor(&[2, 3, 4], 31);
        let b = random_tensor(&[4, 2, 5], 32);
        // Contract a's modes (2,0) against b's (0,1).
        let c = contract_pair(&a, &b, &[(2, 0), (0, 1)]).unwrap();
        assert_eq!(c.shape(), &[3, 5]);
        for j in 0..3 {
            for l in 0..5 {
                let mut acc = 0.0;
                for i in 0..2 {
                    for k in 0..4 {
                        acc += a.get(&[i, j, k]) * b.get(&[k, i, l]);
                    }
                }
                assert!((c.get(&[j, l]) - acc).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn contract_singleton_shared_mode_is_outer_product() {
        let a = random_tensor(&[3, 1], 41);
        let b = random_tensor(&[1, 4], 42);
        let c = contract_pair(&a, &b, &[(1, 0)]).unwrap();
        assert_eq!(c.shape(), &[3, 4]);
        for i in 0..3 {
            for j in 0..4 {
                let expect = a.get(&[i, 0]) * b.get(&[0, j]);
                assert!((c.get(&[i, j]) - expect).abs() < 1e-15);
            }
        }
        // Empty pair list is the plain outer product of all modes.
        let d = contract_pair(&a, &b, &[]).unwrap();
        assert_eq!(d.shape(), &[3, 1, 1, 4]);
    }

    #[test]
    fn contract_rejects_bad_pairs() {
        let a = random_tensor(&[2, 3], 1);
        let b = random_tensor(&[4, 2], 2);
        assert!(contract_pair(&a, &b, &[(1, 0)]).is_err()); // size mismatch
        assert!(contract_pair(&a, &b, &[(0, 1), (0, 0)]).is_err()); // duplicate
    }

    #[test]
    fn mean_axis_keep_averages_fibers() {
        let t = DenseTensor::new(vec![2, 3], vec![1.0, 3.0, 2.0, 4.0, 5.0, 7.0]).unwrap();
        let m = t.mean_axis_keep(0).unwrap();
        assert_eq!(m.shape(), &[1, 3]);
        assert_eq!(m.data(), &[2.0, 3.0, 6.0]);
        let m1 = t.mean_axis_keep(1).unwrap();
        assert_eq!(m1.shape(), &[2, 1]);
        assert!((m1.get(&[0, 0]) - (1.0 + 2.0 + 5.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn file_round_trip_bit_exact() {
        let t = random_tensor(&[4, 3, 2], 55);
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let back = DenseTensor::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, t);
        assert!(DenseTensor::read_from(&mut &buf[1..]).is_err());
    }

    #[test]
    fn permute_round_trip() {
        let t = random_tensor(&[2, 3, 4, 5], 77);
        let perm = [2, 0, 3, 1];
        let p = t.permute(&perm).unwrap();
        assert_eq!(p.shape(), &[4, 2, 5, 3]);
        let mut inv = [0usize; 4];
        for (k, &pk) in perm.iter().enumerate() {
            inv[pk] = k;
        }
        assert_eq!(p.permute(&inv).unwrap(), t);
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..4 {
                    for l in 0..5 {
                        assert_eq!(p.get(&[k, i, l, j]), t.get(&[i, j, k, l]));
                    }
                }
            }
        }
    }
}
