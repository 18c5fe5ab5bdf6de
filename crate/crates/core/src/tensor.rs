//! Dense K-way arrays and the multilinear algebra on them.
//!
//! # Storage convention
//!
//! A tensor with dimensions `(n_1, ..., n_K)` is stored as a flat vector
//! in vectorization order with the mode-0 index fastest and the mode-K-1
//! index slowest: the linear index of `(i_1, ..., i_K)` (0-based) is
//!
//! ```text
//! i_1 + n_1 * (i_2 + n_2 * (i_3 + ...))
//! ```
//!
//! This is the column-major generalization, so for `K = 2` the layout is
//! an ordinary column-major matrix. Under this convention the vectorized
//! Tucker product satisfies `vec(S x {C_1..C_K}) = (C_K kron ... kron C_1) vec(S)`,
//! i.e. Kronecker factors appear in reverse mode order.
//!
//! Mode indices in this module are 0-based.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default relative singular-value threshold for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Dense K-way array with an optional observation mask.
///
/// Unobserved entries carry a NaN sentinel in `values` and are never read
/// by the numeric kernels; algorithms that cannot handle missing entries
/// reject masked tensors up front.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    values: Vec<f64>,
    mask: Option<Vec<bool>>,
}

impl DenseTensor {
    /// Builds a fully observed tensor; `values.len()` must equal the
    /// product of `dims`.
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&n| n == 0) {
            return Err(Error::InvalidArgument(
                "tensor dimensions must be positive".into(),
            ));
        }
        let n: usize = dims.iter().product();
        if values.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "value buffer has length {}, dimensions require {}",
                values.len(),
                n
            )));
        }
        Ok(Self {
            dims,
            values,
            mask: None,
        })
    }

    /// Builds a tensor with an observation mask (`true` = observed).
    pub fn with_mask(dims: Vec<usize>, values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        let mut t = Self::new(dims, values)?;
        if mask.len() != t.values.len() {
            return Err(Error::ShapeMismatch(format!(
                "mask has length {}, expected {}",
                mask.len(),
                t.values.len()
            )));
        }
        t.mask = Some(mask);
        Ok(t)
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let n: usize = dims.iter().product();
        Self::new(dims, vec![0.0; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn is_observed(&self, linear: usize) -> bool {
        self.mask.as_ref().map_or(true, |m| m[linear])
    }

    pub fn is_fully_observed(&self) -> bool {
        self.mask.as_ref().map_or(true, |m| m.iter().all(|&b| b))
    }

    /// Drops the mask, keeping the values as they are.
    pub fn clear_mask(&mut self) {
        self.mask = None;
    }

    /// Linear index of a 0-based multi-index, mode 0 fastest.
    pub fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut lin = 0;
        for k in (0..self.dims.len()).rev() {
            debug_assert!(idx[k] < self.dims[k]);
            lin = lin * self.dims[k] + idx[k];
        }
        lin
    }

    /// Multi-index of a linear index.
    pub fn multi_index(&self, mut linear: usize) -> Vec<usize> {
        let mut idx = Vec::with_capacity(self.dims.len());
        for &n in &self.dims {
            idx.push(linear % n);
            linear /= n;
        }
        idx
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[self.linear_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let lin = self.linear_index(idx);
        self.values[lin] = v;
    }

    /// Squared Frobenius norm over all entries.
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Elementwise difference; dimensions must match.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::ShapeMismatch(format!(
                "cannot subtract tensors with dims {:?} and {:?}",
                self.dims, other.dims
            )));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Self::new(self.dims.clone(), values)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            dims: self.dims.clone(),
            values: self.values.iter().map(|v| a * v).collect(),
            mask: self.mask.clone(),
        }
    }
}

/// Tucker model: core array, orthonormal factor matrices and a scale.
///
/// Factor `k` has shape `n_k x r_k` with orthonormal columns; the model
/// represents the array `sigma * core x {U_1, ..., U_K}`.
#[derive(Debug, Clone)]
pub struct TuckerModel {
    pub core: DenseTensor,
    pub factors: Vec<DMatrix<f64>>,
    pub sigma: f64,
}

const ORTHONORMALITY_TOL: f64 = 1e-10;

impl TuckerModel {
    /// Validates shapes, `r_k <= n_k` and column orthonormality to 1e-10.
    pub fn new(core: DenseTensor, factors: Vec<DMatrix<f64>>, sigma: f64) -> Result<Self> {
        if factors.len() != core.order() {
            return Err(Error::ShapeMismatch(format!(
                "{} factors for an order-{} core",
                factors.len(),
                core.order()
            )));
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidArgument("sigma must be positive".into()));
        }
        for (k, u) in factors.iter().enumerate() {
            if u.ncols() != core.dims()[k] {
                return Err(Error::ShapeMismatch(format!(
                    "factor {} has {} columns, core dimension is {}",
                    k,
                    u.ncols(),
                    core.dims()[k]
                )));
            }
            if u.ncols() > u.nrows() {
                return Err(Error::InvalidArgument(format!(
                    "factor {} has more columns than rows ({}x{})",
                    k,
                    u.nrows(),
                    u.ncols()
                )));
            }
            if orthonormality_defect(u) > ORTHONORMALITY_TOL {
                return Err(Error::InvalidArgument(format!(
                    "factor {} does not have orthonormal columns",
                    k
                )));
            }
        }
        Ok(Self {
            core,
            factors,
            sigma,
        })
    }

    pub fn ranks(&self) -> &[usize] {
        self.core.dims()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|u| u.nrows()).collect()
    }

    /// The represented array `sigma * core x {U_1..U_K}`.
    pub fn reconstruct(&self) -> DenseTensor {
        let t = tucker_product(&self.core, &self.factors)
            .expect("model shapes were validated on construction");
        if self.sigma == 1.0 {
            t
        } else {
            t.scaled(self.sigma)
        }
    }
}

/// `max |U^T U - I|` over all entries.
pub fn orthonormality_defect(u: &DMatrix<f64>) -> f64 {
    let g = u.transpose() * u;
    let r = g.nrows();
    let mut worst = 0.0f64;
    for i in 0..r {
        for j in 0..r {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

fn check_mode(t_order: usize, mode: usize) -> Result<()> {
    if mode >= t_order {
        Err(Error::ModeOutOfRange {
            mode,
            order: t_order,
        })
    } else {
        Ok(())
    }
}

/// Strides around `mode`: product of dimensions before (`inner`) and
/// after (`outer`) it.
fn mode_strides(dims: &[usize], mode: usize) -> (usize, usize) {
    let inner: usize = dims[..mode].iter().product();
    let outer: usize = dims[mode + 1..].iter().product();
    (inner, outer)
}

/// Mode-k matricization: an `n_k x prod_{j != k} n_j` matrix whose
/// columns are indexed by the remaining modes, fastest-first with mode k
/// removed. `matricize` and [`refold`] are exact inverses.
pub fn matricize(t: &DenseTensor, mode: usize) -> Result<DMatrix<f64>> {
    check_mode(t.order(), mode)?;
    let dims = t.dims();
    let q = dims[mode];
    let (inner, outer) = mode_strides(dims, mode);
    let ncols = inner * outer;
    let mut data = vec![0.0; q * ncols];
    let tv = t.values();
    for oo in 0..outer {
        let base = oo * q * inner;
        for row in 0..q {
            let src = &tv[base + row * inner..base + (row + 1) * inner];
            for (ii, &v) in src.iter().enumerate() {
                data[(oo * inner + ii) * q + row] = v;
            }
        }
    }
    Ok(DMatrix::from_vec(q, ncols, data))
}

/// Inverse of [`matricize`]: rebuilds the tensor with dimensions `dims`
/// from its mode-k matricization.
pub fn refold(m: &DMatrix<f64>, mode: usize, dims: &[usize]) -> Result<DenseTensor> {
    check_mode(dims.len(), mode)?;
    let q = dims[mode];
    let (inner, outer) = mode_strides(dims, mode);
    if m.nrows() != q || m.ncols() != inner * outer {
        return Err(Error::ShapeMismatch(format!(
            "matrix is {}x{}, mode-{} refold of dims {:?} requires {}x{}",
            m.nrows(),
            m.ncols(),
            mode,
            dims,
            q,
            inner * outer
        )));
    }
    let md = m.as_slice(); // column-major
    let mut values = vec![0.0; q * inner * outer];
    for oo in 0..outer {
        let base = oo * q * inner;
        for row in 0..q {
            let dst = &mut values[base + row * inner..base + (row + 1) * inner];
            for (ii, dv) in dst.iter_mut().enumerate() {
                *dv = md[(oo * inner + ii) * q + row];
            }
        }
    }
    DenseTensor::new(dims.to_vec(), values)
}

/// Multiplies mode `mode` of `t` by the matrix `a` (`p x n_mode`),
/// producing a tensor with `n_mode` replaced by `p`.
pub fn mode_multiply(t: &DenseTensor, a: &DMatrix<f64>, mode: usize) -> Result<DenseTensor> {
    check_mode(t.order(), mode)?;
    let dims = t.dims();
    let q = dims[mode];
    if a.ncols() != q {
        return Err(Error::ShapeMismatch(format!(
            "mode-{} factor has {} columns, tensor dimension is {}",
            mode,
            a.ncols(),
            q
        )));
    }
    let p = a.nrows();
    let (inner, outer) = mode_strides(dims, mode);
    let mut out = vec![0.0; inner * p * outer];
    let tv = t.values();
    let ad = a.as_slice(); // column-major: a[(r, c)] = ad[c * p + r]
    for oo in 0..outer {
        let tbase = oo * q * inner;
        let obase = oo * p * inner;
        for qi in 0..q {
            let src = &tv[tbase + qi * inner..tbase + (qi + 1) * inner];
            let acol = &ad[qi * p..(qi + 1) * p];
            for (pi, &w) in acol.iter().enumerate() {
                if w != 0.0 {
                    let dst = &mut out[obase + pi * inner..obase + (pi + 1) * inner];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += w * s;
                    }
                }
            }
        }
    }
    let mut new_dims = dims.to_vec();
    new_dims[mode] = p;
    DenseTensor::new(new_dims, out)
}

/// Tucker product `core x {C_1, ..., C_K}`, computed as K successive
/// mode products (the Kronecker form is never materialized). Factor `k`
/// must have as many columns as core dimension `k`; the output has the
/// factors' row counts as its dimensions.
pub fn tucker_product(core: &DenseTensor, factors: &[DMatrix<f64>]) -> Result<DenseTensor> {
    if factors.len() != core.order() {
        return Err(Error::ShapeMismatch(format!(
            "{} factors for an order-{} core",
            factors.len(),
            core.order()
        )));
    }
    let mut out = core.clone();
    for (k, a) in factors.iter().enumerate() {
        out = mode_multiply(&out, a, k)?;
    }
    Ok(out)
}

/// Orthonormal basis of the orthogonal complement of the column space of
/// `m` (`n x k`, `k < n`, full column rank): the trailing `n - k` columns
/// of the full Q factor of a Householder QR of `m`.
pub fn orthonormal_complement(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let k = m.ncols();
    assert!(k < n, "complement requires fewer columns than rows");
    // Householder factorization of a working copy, column-major.
    let mut a: Vec<f64> = m.as_slice().to_vec();
    let mut vs: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut taus: Vec<f64> = Vec::with_capacity(k);
    for j in 0..k {
        let col = &a[j * n..(j + 1) * n];
        let norm: f64 = col[j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            vs.push(Vec::new());
            taus.push(0.0);
            continue;
        }
        let alpha = if col[j] >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = col[j..].to_vec();
        v[0] -= alpha;
        let beta: f64 = v.iter().map(|x| x * x).sum();
        if beta == 0.0 {
            vs.push(Vec::new());
            taus.push(0.0);
            continue;
        }
        let tau = 2.0 / beta;
        // apply the reflector to the trailing columns
        for c in j + 1..k {
            let colc = &mut a[c * n..(c + 1) * n];
            let w: f64 = v.iter().zip(&colc[j..]).map(|(vi, xi)| vi * xi).sum();
            for (vi, xi) in v.iter().zip(colc[j..].iter_mut()) {
                *xi -= tau * w * vi;
            }
        }
        vs.push(v);
        taus.push(tau);
    }
    // complement columns: Q e_t for t = k..n, reflectors applied in reverse
    let mut out = DMatrix::zeros(n, n - k);
    let mut e = vec![0.0f64; n];
    for t in 0..(n - k) {
        e.iter_mut().for_each(|x| *x = 0.0);
        e[k + t] = 1.0;
        for j in (0..k).rev() {
            if taus[j] == 0.0 {
                continue;
            }
            let v = &vs[j];
            let w: f64 = v.iter().zip(&e[j..]).map(|(vi, xi)| vi * xi).sum();
            for (vi, xi) in v.iter().zip(e[j..].iter_mut()) {
                *xi -= taus[j] * w * vi;
            }
        }
        for (i, &val) in e.iter().enumerate() {
            out[(i, t)] = val;
        }
    }
    out
}

/// Top `r` left singular vectors of `m`, sign-fixed; when `r` exceeds the
/// number of singular vectors the thin SVD provides, the basis is
/// completed with an orthonormal complement (the extra directions carry
/// zero singular value and any completion spans them).
pub(crate) fn top_left_singular_vectors(m: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("u requested");
    let have = u.ncols().min(r);
    let mut top = u.columns(0, have).clone_owned();
    sign_fix_columns(&mut top);
    if have < r {
        let comp = orthonormal_complement(&top);
        let mut full = DMatrix::zeros(m.nrows(), r);
        full.columns_mut(0, have).copy_from(&top);
        let mut extra = comp.columns(0, r - have).clone_owned();
        sign_fix_columns(&mut extra);
        full.columns_mut(have, r - have).copy_from(&extra);
        return full;
    }
    top
}

/// Flips column signs so each column's largest-magnitude entry is
/// positive. Makes SVD-derived factors reproducible.
pub fn sign_fix_columns(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0usize;
        let mut best_abs = 0.0f64;
        for (i, &v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Higher-order SVD truncated to `ranks`: factor `k` holds the top
/// `r_k` left singular vectors of the mode-k matricization (sign-fixed),
/// and the core is the projection of `t` onto those bases. The returned
/// model has `sigma = 1`.
pub fn hosvd(t: &DenseTensor, ranks: &[usize]) -> Result<TuckerModel> {
    if ranks.len() != t.order() {
        return Err(Error::ShapeMismatch(format!(
            "{} ranks for an order-{} tensor",
            ranks.len(),
            t.order()
        )));
    }
    for (k, (&r, &n)) in ranks.iter().zip(t.dims()).enumerate() {
        if r == 0 || r > n {
            return Err(Error::InvalidArgument(format!(
                "rank {} at mode {} must be in 1..={}",
                r, k, n
            )));
        }
    }
    let mut factors = Vec::with_capacity(t.order());
    for (k, &r) in ranks.iter().enumerate() {
        let m = matricize(t, k)?;
        factors.push(top_left_singular_vectors(&m, r));
    }
    let mut core = t.clone();
    for (k, u) in factors.iter().enumerate() {
        core = mode_multiply(&core, &u.transpose(), k)?;
    }
    TuckerModel::new(core, factors, 1.0)
}

/// Multilinear rank: for each mode, the number of singular values of the
/// matricization exceeding `tol` times the largest one.
pub fn multilinear_rank(t: &DenseTensor, tol: f64) -> Result<Vec<usize>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let mut ranks = Vec::with_capacity(t.order());
    for k in 0..t.order() {
        let m = matricize(t, k)?;
        let sv = m.singular_values();
        let top = sv.iter().cloned().fold(0.0f64, f64::max);
        let r = sv.iter().filter(|&&s| s > tol * top).count();
        ranks.push(r);
    }
    Ok(ranks)
}
