//! Dense tensors, outer-product pooling, and the multilinear plumbing
//! (mode products, unfoldings) used by the higher-order EPN path.
//!
//! Storage is dense and row-major over `dims`: the last index varies fastest.
//! Super-symmetric tensors are stored in full; super-symmetry is a flag that
//! is set by constructors that guarantee it and can be re-checked with
//! [`DenseTensor::check_super_symmetry`].

use std::cmp::Ordering;

use nalgebra::DMatrix;

use crate::error::{invalid, shape, Result};

/// Absolute tolerance used when checking super-symmetry.
pub const SUPER_SYMMETRY_TOL: f64 = 1e-12;

/// A batch of `d`-dimensional feature vectors with per-vector weights and a
/// mean vector subtracted before pooling.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    vectors: Vec<Vec<f64>>,
    weights: Vec<f64>,
    mean: Vec<f64>,
}

impl FeatureSet {
    /// Unit weights and a zero mean.
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let n = vectors.len();
        let d = vectors.first().map(Vec::len).unwrap_or(0);
        Self::with_weights_and_mean(vectors, vec![1.0; n], vec![0.0; d])
    }

    pub fn with_weights(vectors: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let d = vectors.first().map(Vec::len).unwrap_or(0);
        Self::with_weights_and_mean(vectors, weights, vec![0.0; d])
    }

    pub fn with_weights_and_mean(
        vectors: Vec<Vec<f64>>,
        weights: Vec<f64>,
        mean: Vec<f64>,
    ) -> Result<Self> {
        if vectors.is_empty() {
            return invalid("feature set must contain at least one vector");
        }
        let d = vectors[0].len();
        if d == 0 {
            return invalid("feature vectors must have dimension >= 1");
        }
        if let Some((n, v)) = vectors.iter().enumerate().find(|(_, v)| v.len() != d) {
            return shape(format!(
                "vector {n} has dimension {} but vector 0 has dimension {d}",
                v.len()
            ));
        }
        if weights.len() != vectors.len() {
            return shape(format!(
                "{} weights supplied for {} vectors",
                weights.len(),
                vectors.len()
            ));
        }
        if let Some((n, w)) = weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0)) {
            return invalid(format!("weight {n} is {w}; weights must be non-negative"));
        }
        if mean.len() != d {
            return shape(format!(
                "mean has dimension {} but vectors have dimension {d}",
                mean.len()
            ));
        }
        if vectors.iter().flatten().chain(&mean).any(|x| !x.is_finite()) {
            return invalid("feature set contains non-finite values");
        }
        Ok(Self {
            vectors,
            weights,
            mean,
        })
    }

    /// Replace the mean with the column mean of the vectors (covariance
    /// rather than auto-correlation pooling).
    pub fn centered(mut self) -> Self {
        let n = self.vectors.len() as f64;
        let mut mean = vec![0.0; self.dim()];
        for v in &self.vectors {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        self.mean = mean;
        self
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// `w_n (φ_n − μ)` for every vector.
    pub(crate) fn scaled_centered(&self) -> Vec<Vec<f64>> {
        self.vectors
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v.iter().zip(&self.mean).map(|(x, m)| w * (x - m)).collect())
            .collect()
    }
}

/// Dense real tensor of order `r` stored row-major over `dims`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
    super_symmetric: bool,
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if dims.is_empty() {
            return invalid("tensor order must be >= 1");
        }
        if dims.contains(&0) {
            return invalid(format!("tensor dimensions must be positive, got {dims:?}"));
        }
        let len: usize = dims.iter().product();
        if len != data.len() {
            return shape(format!(
                "dims {dims:?} need {len} coefficients, got {}",
                data.len()
            ));
        }
        Ok(Self {
            dims,
            data,
            super_symmetric: false,
        })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let len = dims.iter().product();
        Self::new(dims, vec![0.0; len])
    }

    /// Order-2 tensor from a matrix.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = m.shape();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(m[(i, j)]);
            }
        }
        Self::new(vec![rows, cols], data)
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.order() != 2 {
            return shape(format!("expected an order-2 tensor, got order {}", self.order()));
        }
        Ok(DMatrix::from_row_slice(self.dims[0], self.dims[1], &self.data))
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn is_super_symmetric(&self) -> bool {
        self.super_symmetric
    }

    /// Check every coefficient against all its index permutations and set the
    /// flag accordingly. Returns the flag.
    pub fn check_super_symmetry(&mut self, tol: f64) -> bool {
        self.super_symmetric = self.super_symmetry_defect() <= tol;
        self.super_symmetric
    }

    /// Largest absolute deviation between a coefficient and any of its index
    /// permutations; infinity when dims are not all equal.
    pub fn super_symmetry_defect(&self) -> f64 {
        let d = self.dims[0];
        if self.dims.iter().any(|&x| x != d) {
            return f64::INFINITY;
        }
        let perms = permutations(self.order());
        let mut worst = 0.0f64;
        let mut permuted = vec![0; self.order()];
        for (flat, &value) in self.data.iter().enumerate() {
            let idx = self.unravel(flat);
            for p in &perms {
                for (slot, &src) in permuted.iter_mut().zip(p) {
                    *slot = idx[src];
                }
                worst = worst.max((value - self.data[self.offset(&permuted)]).abs());
            }
        }
        worst
    }

    pub(crate) fn mark_super_symmetric(mut self) -> Self {
        self.super_symmetric = true;
        self
    }

    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.dims.len());
        index
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims.len()];
        for (slot, &d) in idx.iter_mut().zip(&self.dims).rev() {
            *slot = flat % d;
            flat /= d;
        }
        idx
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let o = self.offset(index);
        self.data[o] = value;
        self.super_symmetric = false;
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        DenseTensor::new(self.dims.clone(), data)
    }

    pub fn scale(&self, c: f64) -> DenseTensor {
        DenseTensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|x| c * x).collect(),
            super_symmetric: self.super_symmetric,
        }
    }

    pub(crate) fn same_shape(&self, other: &DenseTensor) -> Result<()> {
        if self.dims != other.dims {
            return shape(format!("dims {:?} vs {:?}", self.dims, other.dims));
        }
        Ok(())
    }
}

fn permutations(r: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::with_capacity(r), &mut vec![false; r], &mut out);
    out
}

/// The `r`-fold outer product `x ⊗ x ⊗ … ⊗ x`.
pub fn outer_power(x: &[f64], r: usize) -> Result<DenseTensor> {
    if x.is_empty() {
        return invalid("outer_power of an empty vector");
    }
    if r == 0 {
        return invalid("outer_power order must be >= 1");
    }
    let d = x.len();
    let mut data = vec![0.0; d.pow(r as u32)];
    accumulate_outer_power(&mut data, x, r, 1.0);
    Ok(DenseTensor::new(vec![d; r], data)?.mark_super_symmetric())
}

/// `out += scale · ⊗_r x`, filling coefficients in row-major order.
fn accumulate_outer_power(out: &mut [f64], x: &[f64], r: usize, scale: f64) {
    if r == 1 {
        for (o, xi) in out.iter_mut().zip(x) {
            *o += scale * xi;
        }
        return;
    }
    let block = out.len() / x.len();
    for (chunk, &xi) in out.chunks_mut(block).zip(x) {
        if xi != 0.0 {
            accumulate_outer_power(chunk, x, r - 1, scale * xi);
        }
    }
}

/// Weighted, mean-centred tensor feature map
/// `(1/N) Σ_n w_n^r ⊗_r (φ_n − μ)`.
///
/// Terms are summed in a canonical order (sorted by their scaled vectors) so
/// the result does not depend on the order of the input pairs.
pub fn pool(fs: &FeatureSet, r: usize) -> Result<DenseTensor> {
    if r < 2 {
        return invalid(format!("pooling order must be >= 2, got {r}"));
    }
    let d = fs.dim();
    let mut terms = fs.scaled_centered();
    terms.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    });
    let mut data = vec![0.0; d.pow(r as u32)];
    for v in &terms {
        accumulate_outer_power(&mut data, v, r, 1.0);
    }
    let n = fs.len() as f64;
    data.iter_mut().for_each(|x| *x /= n);
    Ok(DenseTensor::new(vec![d; r], data)?.mark_super_symmetric())
}

pub fn frobenius_norm(t: &DenseTensor) -> f64 {
    inner_unchecked(t, t).sqrt()
}

pub fn inner(a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    a.same_shape(b)?;
    Ok(inner_unchecked(a, b))
}

fn inner_unchecked(a: &DenseTensor, b: &DenseTensor) -> f64 {
    a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum()
}

/// Contract mode `mode` (0-based) with the vector `v`; the result has order
/// `r − 1`. Contracting an order-1 tensor is rejected since the result would
/// be a scalar; use [`inner`] for that.
pub fn mode_product(t: &DenseTensor, v: &[f64], mode: usize) -> Result<DenseTensor> {
    if mode >= t.order() {
        return invalid(format!("mode {mode} out of range for order {}", t.order()));
    }
    if t.order() < 2 {
        return invalid("mode_product needs an order >= 2 tensor");
    }
    if v.len() != t.dims[mode] {
        return shape(format!(
            "vector of length {} against mode {mode} of size {}",
            v.len(),
            t.dims[mode]
        ));
    }
    let outer: usize = t.dims[..mode].iter().product();
    let inner_len: usize = t.dims[mode + 1..].iter().product();
    let dm = t.dims[mode];
    let mut data = vec![0.0; outer * inner_len];
    for o in 0..outer {
        for (k, &vk) in v.iter().enumerate() {
            let src = &t.data[(o * dm + k) * inner_len..(o * dm + k + 1) * inner_len];
            let dst = &mut data[o * inner_len..(o + 1) * inner_len];
            for (y, x) in dst.iter_mut().zip(src) {
                *y += vk * x;
            }
        }
    }
    let mut dims = t.dims.clone();
    dims.remove(mode);
    DenseTensor::new(dims, data)
}

/// Mode product with a matrix: `Y = X ×_mode A`, where `A` is `m × dims[mode]`
/// and `Y[.., i, ..] = Σ_k A[i,k] X[.., k, ..]`.
pub fn mode_matrix_product(t: &DenseTensor, a: &DMatrix<f64>, mode: usize) -> Result<DenseTensor> {
    if mode >= t.order() {
        return invalid(format!("mode {mode} out of range for order {}", t.order()));
    }
    if a.ncols() != t.dims[mode] {
        return shape(format!(
            "matrix with {} columns against mode {mode} of size {}",
            a.ncols(),
            t.dims[mode]
        ));
    }
    let m = a.nrows();
    let outer: usize = t.dims[..mode].iter().product();
    let inner_len: usize = t.dims[mode + 1..].iter().product();
    let dm = t.dims[mode];
    let mut data = vec![0.0; outer * m * inner_len];
    for o in 0..outer {
        for i in 0..m {
            let dst_start = (o * m + i) * inner_len;
            for k in 0..dm {
                let aik = a[(i, k)];
                if aik == 0.0 {
                    continue;
                }
                let src = &t.data[(o * dm + k) * inner_len..(o * dm + k + 1) * inner_len];
                let dst = &mut data[dst_start..dst_start + inner_len];
                for (y, x) in dst.iter_mut().zip(src) {
                    *y += aik * x;
                }
            }
        }
    }
    let mut dims = t.dims.clone();
    dims[mode] = m;
    DenseTensor::new(dims, data)
}

/// Mode-`mode` unfolding (0-based): rows are indexed by the chosen mode and
/// columns by the remaining indices in increasing mode order with the
/// earliest remaining mode varying fastest. For an order-3 tensor the mode-0
/// unfolding is `[X[:,:,0], X[:,:,1], …]`.
pub fn unfold(t: &DenseTensor, mode: usize) -> Result<DMatrix<f64>> {
    if mode >= t.order() {
        return invalid(format!("mode {mode} out of range for order {}", t.order()));
    }
    let rows = t.dims[mode];
    let cols = t.data.len() / rows;
    let mut m = DMatrix::zeros(rows, cols);
    for (flat, &x) in t.data.iter().enumerate() {
        let idx = t.unravel(flat);
        m[(idx[mode], unfold_column(&t.dims, &idx, mode))] = x;
    }
    Ok(m)
}

/// Inverse of [`unfold`].
pub fn refold(m: &DMatrix<f64>, dims: &[usize], mode: usize) -> Result<DenseTensor> {
    let mut t = DenseTensor::zeros(dims.to_vec())?;
    if mode >= t.order() {
        return invalid(format!("mode {mode} out of range for order {}", t.order()));
    }
    let rows = dims[mode];
    if m.nrows() != rows || m.ncols() * rows != t.data.len() {
        return shape(format!(
            "unfolded matrix {}x{} does not match dims {dims:?} at mode {mode}",
            m.nrows(),
            m.ncols()
        ));
    }
    for flat in 0..t.data.len() {
        let idx = t.unravel(flat);
        t.data[flat] = m[(idx[mode], unfold_column(dims, &idx, mode))];
    }
    Ok(t)
}

fn unfold_column(dims: &[usize], idx: &[usize], mode: usize) -> usize {
    let mut col = 0;
    let mut stride = 1;
    for (k, (&i, &d)) in idx.iter().zip(dims).enumerate() {
        if k != mode {
            col += i * stride;
            stride *= d;
        }
    }
    col
}
