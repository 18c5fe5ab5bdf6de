//! Chain and estimator quality metrics.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor::{matricize, sign_fix_columns, DenseTensor};

/// Effective sample size of a scalar trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ess {
    pub value: f64,
    /// Set when the trace is constant; the value is then the trace length.
    pub degenerate: bool,
}

/// Effective sample size `N / (1 + 2 sum rho_t)` with the autocovariance
/// sum truncated by the initial-positive-sequence rule: consecutive
/// autocorrelation pairs are added while their sum stays positive. The
/// estimate is capped at N.
pub fn effective_sample_size(trace: &[f64]) -> Result<Ess> {
    let n = trace.len();
    if n < 10 {
        return Err(Error::InvalidArgument(format!(
            "effective sample size needs at least 10 points, got {}",
            n
        )));
    }
    if trace.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("trace".into()));
    }
    let lo = trace.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = trace.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Ok(Ess {
            value: n as f64,
            degenerate: true,
        });
    }
    let mean = trace.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = trace.iter().map(|v| v - mean).collect();
    let gamma = |t: usize| -> f64 {
        centered[..n - t]
            .iter()
            .zip(&centered[t..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let g0 = gamma(0);
    // paired sums rho_{2m} + rho_{2m+1}, added while positive
    let mut rho_sum = 0.0; // sum of rho_t for t >= 0 over accepted pairs
    let mut m = 0usize;
    loop {
        let t0 = 2 * m;
        let t1 = 2 * m + 1;
        if t1 >= n {
            break;
        }
        let pair = (gamma(t0) + gamma(t1)) / g0;
        if pair <= 0.0 {
            break;
        }
        rho_sum += pair;
        m += 1;
    }
    let tau = (2.0 * rho_sum - 1.0).max(1.0);
    Ok(Ess {
        value: (n as f64 / tau).min(n as f64),
        degenerate: false,
    })
}

/// Relative squared estimation error `||truth - estimate||^2 / ||truth||^2`.
pub fn relative_squared_error(truth: &DenseTensor, estimate: &DenseTensor) -> Result<f64> {
    if truth.dims() != estimate.dims() {
        return Err(Error::ShapeMismatch(format!(
            "dims {:?} vs {:?}",
            truth.dims(),
            estimate.dims()
        )));
    }
    let denom = truth.norm_sq();
    if denom == 0.0 {
        return Err(Error::DegenerateData("zero-norm reference array".into()));
    }
    Ok(truth.sub(estimate)?.norm_sq() / denom)
}

/// Eigenvalues of the mode-k Gram matrix `M_(k) M_(k)^T`, normalized to
/// sum to one and sorted in descending order.
pub fn normalized_eigenspectrum(m: &DenseTensor, mode: usize) -> Result<Vec<f64>> {
    let mk = matricize(m, mode)?;
    let gram = &mk * mk.transpose();
    let eig = gram.symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let total: f64 = vals.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateData("zero array has no eigenspectrum".into()));
    }
    for v in vals.iter_mut() {
        *v /= total;
    }
    Ok(vals)
}

/// Sequentially removes per-index means along every mode (mode 0 through
/// K-1). Annihilates additive main effects; idempotent, and the mode
/// order does not change the result.
pub fn center_all_modes(m: &DenseTensor) -> DenseTensor {
    let mut out = m.clone();
    let dims = out.dims().to_vec();
    for (mode, &nk) in dims.iter().enumerate() {
        let inner: usize = dims[..mode].iter().product();
        let outer: usize = dims[mode + 1..].iter().product();
        let count = (inner * outer) as f64;
        for j in 0..nk {
            let mut sum = 0.0;
            for oo in 0..outer {
                let base = (oo * nk + j) * inner;
                sum += out.values()[base..base + inner].iter().sum::<f64>();
            }
            let mean = sum / count;
            for oo in 0..outer {
                let base = (oo * nk + j) * inner;
                for v in &mut out.values_mut()[base..base + inner] {
                    *v -= mean;
                }
            }
        }
    }
    out
}

/// Top `count` left singular vectors of the mode-k matricization, with
/// each vector's largest-magnitude entry made positive.
pub fn mode_singular_vectors(m: &DenseTensor, mode: usize, count: usize) -> Result<DMatrix<f64>> {
    let mk = matricize(m, mode)?;
    if count > mk.nrows() {
        return Err(Error::InvalidArgument(format!(
            "requested {} singular vectors, mode {} has dimension {}",
            count,
            mode,
            mk.nrows()
        )));
    }
    let svd = mk.svd(true, false);
    let u = svd.u.expect("u requested");
    let mut top = u.columns(0, count).clone_owned();
    sign_fix_columns(&mut top);
    Ok(top)
}
