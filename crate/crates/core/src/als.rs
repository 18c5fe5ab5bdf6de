//! Alternating least-squares baseline via higher-order orthogonal
//! iteration, with iterative imputation for partially observed arrays.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor::{
    hosvd, matricize, mode_multiply, tucker_product, DenseTensor, TuckerModel,
};

pub const DEFAULT_MAX_ITER: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-9;

/// Result of an orthogonal-iteration fit.
#[derive(Debug, Clone)]
pub struct HooiFit {
    pub model: TuckerModel,
    /// Fitted array of the same dimensions as the input.
    pub fitted: DenseTensor,
    /// Residual sum of squares after each sweep (for [`hooi_impute`],
    /// the residual over observed entries after each outer pass).
    pub rss: Vec<f64>,
    pub iterations: usize,
}

/// Least-squares Tucker approximation of a fully observed array by
/// higher-order orthogonal iteration. Factors are initialized by the
/// truncated higher-order SVD and updated cyclically; each update takes
/// the top left singular vectors of the matricized array projected onto
/// the other modes' current bases. Stops when the relative change in
/// residual sum of squares drops below `tol` or after `max_iter` sweeps.
///
/// Fitting at full rank returns the data array itself.
pub fn hooi(y: &DenseTensor, ranks: &[usize], max_iter: usize, tol: f64) -> Result<HooiFit> {
    hooi_with_init(y, ranks, max_iter, tol, None)
}

pub(crate) fn hooi_with_init(
    y: &DenseTensor,
    ranks: &[usize],
    max_iter: usize,
    tol: f64,
    init: Option<&[DMatrix<f64>]>,
) -> Result<HooiFit> {
    if !y.is_fully_observed() {
        return Err(Error::MissingEntries(
            "hooi requires a fully observed array; use hooi_impute".into(),
        ));
    }
    validate_ranks(y.dims(), ranks)?;
    let order = y.order();

    if ranks == y.dims() {
        // full-rank fit: the least-squares estimate is the data itself
        let factors: Vec<_> = y.dims().iter().map(|&n| DMatrix::identity(n, n)).collect();
        let mut fitted = y.clone();
        fitted.clear_mask();
        let model = TuckerModel::new(fitted.clone(), factors, 1.0)?;
        return Ok(HooiFit {
            model,
            fitted,
            rss: vec![0.0],
            iterations: 0,
        });
    }

    let mut factors = match init {
        Some(f) => f.to_vec(),
        None => hosvd(y, ranks)?.factors,
    };
    let norm_sq = y.norm_sq();
    let mut rss_trace = Vec::new();
    let mut prev_rss = f64::INFINITY;
    let mut sweeps = 0usize;
    for _ in 0..max_iter {
        for k in 0..order {
            // project every other mode onto its current basis
            let mut g = y.clone();
            for j in 0..order {
                if j != k {
                    g = mode_multiply(&g, &factors[j].transpose(), j)?;
                }
            }
            let gk = matricize(&g, k)?;
            factors[k] = crate::tensor::top_left_singular_vectors(&gk, ranks[k]);
        }
        sweeps += 1;
        let core = project_core(y, &factors)?;
        // orthonormal factors: ||Y - M||^2 = ||Y||^2 - ||core||^2
        let rss = (norm_sq - core.norm_sq()).max(0.0);
        rss_trace.push(rss);
        let converged = prev_rss.is_finite()
            && (prev_rss - rss).abs() <= tol * prev_rss.max(f64::MIN_POSITIVE);
        prev_rss = rss;
        if converged || rss == 0.0 {
            break;
        }
    }
    let core = project_core(y, &factors)?;
    let fitted = tucker_product(&core, &factors)?;
    let model = TuckerModel::new(core, factors, 1.0)?;
    Ok(HooiFit {
        model,
        fitted,
        rss: rss_trace,
        iterations: sweeps,
    })
}

fn project_core(y: &DenseTensor, factors: &[DMatrix<f64>]) -> Result<DenseTensor> {
    let mut core = y.clone();
    core.clear_mask();
    for (k, u) in factors.iter().enumerate() {
        core = mode_multiply(&core, &u.transpose(), k)?;
    }
    Ok(core)
}

fn validate_ranks(dims: &[usize], ranks: &[usize]) -> Result<()> {
    if ranks.len() != dims.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} ranks for an order-{} array",
            ranks.len(),
            dims.len()
        )));
    }
    for (k, (&r, &n)) in ranks.iter().zip(dims).enumerate() {
        if r == 0 || r > n {
            return Err(Error::InvalidArgument(format!(
                "rank {} at mode {} must be in 1..={}",
                r, k, n
            )));
        }
    }
    Ok(())
}

/// Least-squares fit of a partially observed array: alternates an
/// orthogonal-iteration fit on the completed array with overwriting the
/// unobserved entries by the current fitted values. Observed entries are
/// never modified, and unobserved input values are never read. Each
/// refit is warm-started from the previous factors, so the residual over
/// observed entries is nonincreasing.
pub fn hooi_impute(y: &DenseTensor, ranks: &[usize], max_iter: usize, tol: f64) -> Result<HooiFit> {
    if y.is_fully_observed() {
        let mut full = y.clone();
        full.clear_mask();
        return hooi(&full, ranks, max_iter, tol);
    }
    validate_ranks(y.dims(), ranks)?;
    let mask = y.mask().expect("not fully observed");

    // every slice of every mode needs at least one observed entry
    let dims = y.dims().to_vec();
    for (mode, &nk) in dims.iter().enumerate() {
        let inner: usize = dims[..mode].iter().product();
        let outer: usize = dims[mode + 1..].iter().product();
        for j in 0..nk {
            let mut seen = false;
            'scan: for oo in 0..outer {
                let base = (oo * nk + j) * inner;
                for ii in 0..inner {
                    if mask[base + ii] {
                        seen = true;
                        break 'scan;
                    }
                }
            }
            if !seen {
                return Err(Error::UnidentifiableSlice { mode, index: j });
            }
        }
    }

    let observed: Vec<usize> = (0..y.len()).filter(|&i| mask[i]).collect();
    let missing: Vec<usize> = (0..y.len()).filter(|&i| !mask[i]).collect();
    let obs_mean =
        observed.iter().map(|&i| y.values()[i]).sum::<f64>() / observed.len().max(1) as f64;

    let mut work = DenseTensor::new(dims.clone(), y.values().to_vec())?;
    for &i in &missing {
        work.values_mut()[i] = obs_mean;
    }

    let mut rss_trace = Vec::new();
    let mut prev = f64::INFINITY;
    let mut fit = None;
    let mut factors: Option<Vec<DMatrix<f64>>> = None;
    let mut outer_iters = 0usize;
    for _ in 0..max_iter {
        let f = hooi_with_init(&work, ranks, max_iter, tol, factors.as_deref())?;
        outer_iters += 1;
        let obs_rss: f64 = observed
            .iter()
            .map(|&i| {
                let d = y.values()[i] - f.fitted.values()[i];
                d * d
            })
            .sum();
        rss_trace.push(obs_rss);
        for &i in &missing {
            work.values_mut()[i] = f.fitted.values()[i];
        }
        factors = Some(f.model.factors.clone());
        fit = Some(f);
        if prev.is_finite() {
            let denom = prev.max(f64::MIN_POSITIVE);
            if (prev - obs_rss).abs() <= tol * denom {
                break;
            }
        }
        prev = obs_rss;
    }
    let f = fit.expect("at least one outer iteration");
    Ok(HooiFit {
        model: f.model,
        fitted: f.fitted,
        rss: rss_trace,
        iterations: outer_iters,
    })
}
