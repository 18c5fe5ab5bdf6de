//! Scale-free Tucker decomposition via the extended rank likelihood.
//!
//! The observed array is modeled as variable-specific nondecreasing
//! transformations of a latent array `Z` that follows the normal Tucker
//! model with `sigma^2` pinned to 1 (the scale would be confounded with
//! the transformations). Inference conditions on the event `Z in R(Y)`:
//! within each slice of the variable mode, the latent values preserve
//! every strict ordering among observed entries. Ties impose no
//! constraint, missing entries impose none on others.
//!
//! The latent update visits each slice in index order and redraws its
//! entries in blocks of equal observed value, blocks in increasing value
//! order and entries within a block in linear index order, followed by
//! the missing entries in linear index order. Grouping by value makes
//! the full-conditional truncation bounds a running maximum below and a
//! suffix minimum above, so a slice costs O(m log m) once for the level
//! sort and O(m) per sweep. Because only the value *order* enters the
//! grouping, the whole trajectory is invariant, bit for bit, to strictly
//! increasing per-slice transformations of the data.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::normal_tdm::{parameter_sweep, ChainConfig, ChainState, McmcSamples, PriorFamily, PriorSpec};
use crate::kernels::sample_truncated_normal;
use crate::rng::RngStream;
use crate::tensor::{tucker_product, DenseTensor};

/// Linear indices of slice `j` along `mode`, in increasing order.
fn slice_indices(dims: &[usize], mode: usize, j: usize) -> Vec<usize> {
    let nk = dims[mode];
    let inner: usize = dims[..mode].iter().product();
    let outer: usize = dims[mode + 1..].iter().product();
    let mut out = Vec::with_capacity(inner * outer);
    for oo in 0..outer {
        let base = (oo * nk + j) * inner;
        out.extend(base..base + inner);
    }
    out
}

/// Per-slice grouping of entries by observed value, fixed for the whole
/// chain. Only the ordering of the groups is retained.
#[derive(Debug, Clone)]
struct SliceLevels {
    /// Observed entries grouped by value; groups in increasing value
    /// order, entries within a group in linear index order.
    blocks: Vec<Vec<usize>>,
    /// Missing entries in linear index order.
    missing: Vec<usize>,
}

#[derive(Debug, Clone)]
struct LatentLayout {
    slices: Vec<SliceLevels>,
}

fn build_layout(y: &DenseTensor, variable_mode: usize) -> Result<LatentLayout> {
    let order = y.order();
    if variable_mode >= order {
        return Err(Error::ModeOutOfRange {
            mode: variable_mode,
            order,
        });
    }
    let dims = y.dims();
    let mut slices = Vec::with_capacity(dims[variable_mode]);
    for j in 0..dims[variable_mode] {
        let idxs = slice_indices(dims, variable_mode, j);
        let mut observed: Vec<usize> = Vec::new();
        let mut missing: Vec<usize> = Vec::new();
        for &i in &idxs {
            let v = y.values()[i];
            if y.is_observed(i) && v.is_finite() {
                observed.push(i);
            } else {
                missing.push(i);
            }
        }
        // group by value; stable sort keeps linear order within ties
        observed.sort_by(|&a, &b| {
            y.values()[a]
                .partial_cmp(&y.values()[b])
                .expect("observed values are finite")
        });
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for &i in &observed {
            let v = y.values()[i];
            match blocks.last() {
                Some(last) if y.values()[last[0]] == v => {
                    blocks.last_mut().unwrap().push(i);
                }
                _ => blocks.push(vec![i]),
            }
        }
        slices.push(SliceLevels { blocks, missing });
    }
    Ok(LatentLayout { slices })
}

/// Latent array plus the fixed per-slice level grouping.
#[derive(Debug, Clone)]
pub struct LatentState {
    pub z: DenseTensor,
    layout: LatentLayout,
    pub variable_mode: usize,
}

impl LatentState {
    /// Builds the layout and initializes the latent array with
    /// [`initialize_latent`].
    pub fn new(y: &DenseTensor, variable_mode: usize) -> Result<Self> {
        let layout = build_layout(y, variable_mode)?;
        let z = initialize_latent(y, variable_mode)?;
        Ok(Self {
            z,
            layout,
            variable_mode,
        })
    }
}

/// Deterministic latent initialization: within each slice, observed
/// values map to normal scores (the standard normal quantile of
/// mid-rank / (m + 1), ties sharing a score); missing entries start at
/// zero. The result satisfies the rank constraints by construction.
pub fn initialize_latent(y: &DenseTensor, variable_mode: usize) -> Result<DenseTensor> {
    let layout = build_layout(y, variable_mode)?;
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let mut z = DenseTensor::zeros(y.dims().to_vec())?;
    for slice in &layout.slices {
        let m_obs: usize = slice.blocks.iter().map(|b| b.len()).sum();
        let mut rank_start = 1usize;
        for block in &slice.blocks {
            let t = block.len();
            // mid-rank of the tie group, 1-based
            let mid = rank_start as f64 + (t as f64 - 1.0) / 2.0;
            let p = mid / (m_obs as f64 + 1.0);
            let score = std.inverse_cdf(p);
            for &i in block {
                z.values_mut()[i] = score;
            }
            rank_start += t;
        }
        for &i in &slice.missing {
            z.values_mut()[i] = 0.0;
        }
    }
    Ok(z)
}

/// Reference truncation bounds for one entry of a slice: the largest
/// current latent value among entries with strictly smaller observed
/// value, and the smallest among entries with strictly larger observed
/// value (infinite when the comparison set is empty). Missing
/// observations (NaN) constrain nothing.
pub fn compute_bounds(y_slice: &[f64], z_slice: &[f64], index: usize) -> (f64, f64) {
    let yi = y_slice[index];
    if yi.is_nan() {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    for (j, (&yj, &zj)) in y_slice.iter().zip(z_slice).enumerate() {
        if j == index || yj.is_nan() {
            continue;
        }
        if yj < yi {
            lower = lower.max(zj);
        } else if yj > yi {
            upper = upper.min(zj);
        }
    }
    (lower, upper)
}

/// One Gibbs pass over the latent array given the current mean `m`:
/// every observed entry is redrawn from N(m, 1) truncated to its current
/// bounds, every missing entry from the unconstrained N(m, 1).
pub fn update_latent(
    state: &mut LatentState,
    mean: &DenseTensor,
    rng: &mut RngStream,
) -> Result<()> {
    if mean.dims() != state.z.dims() {
        return Err(Error::ShapeMismatch(format!(
            "mean array dims {:?} do not match latent dims {:?}",
            mean.dims(),
            state.z.dims()
        )));
    }
    for slice in &state.layout.slices {
        let nblocks = slice.blocks.len();
        // suffix minima of the current latent values over higher blocks
        let mut sufmin = vec![f64::INFINITY; nblocks + 1];
        for t in (0..nblocks).rev() {
            let block_min = slice.blocks[t]
                .iter()
                .map(|&i| state.z.values()[i])
                .fold(f64::INFINITY, f64::min);
            sufmin[t] = sufmin[t + 1].min(block_min);
        }
        let mut running_lower = f64::NEG_INFINITY;
        for (t, block) in slice.blocks.iter().enumerate() {
            let upper = sufmin[t + 1];
            let lower = running_lower;
            if !(lower < upper) {
                return Err(Error::DegenerateData(
                    "latent ordering corrupted: truncation bounds inverted".into(),
                ));
            }
            let mut block_max = f64::NEG_INFINITY;
            for &i in block {
                let draw = sample_truncated_normal(mean.values()[i], lower, upper, rng)?;
                state.z.values_mut()[i] = draw;
                block_max = block_max.max(draw);
            }
            running_lower = running_lower.max(block_max);
        }
        for &i in &slice.missing {
            state.z.values_mut()[i] = mean.values()[i] + rng.standard_normal();
        }
    }
    Ok(())
}

/// Checks the rank constraints: within every variable slice, strictly
/// ordered observed values have strictly ordered latent values.
pub fn rank_consistent(y: &DenseTensor, z: &DenseTensor, variable_mode: usize) -> bool {
    let dims = y.dims();
    for j in 0..dims[variable_mode] {
        let idxs = slice_indices(dims, variable_mode, j);
        for (a_pos, &a) in idxs.iter().enumerate() {
            let ya = y.values()[a];
            if !y.is_observed(a) || ya.is_nan() {
                continue;
            }
            for &bidx in &idxs[a_pos + 1..] {
                let yb = y.values()[bidx];
                if !y.is_observed(bidx) || yb.is_nan() {
                    continue;
                }
                let (za, zb) = (z.values()[a], z.values()[bidx]);
                if (ya < yb && !(za < zb)) || (yb < ya && !(zb < za)) {
                    return false;
                }
            }
        }
    }
    true
}

/// Runs the scale-free sampler: the parameter sweep of the normal model
/// (with the data replaced by the current latent array and the scale
/// pinned to 1) alternates with the constrained latent update. The
/// returned posterior-mean array lives on the latent scale.
pub fn run_sftd_chain(
    y: &DenseTensor,
    ranks: &[usize],
    prior: &PriorSpec,
    config: &ChainConfig,
    variable_mode: usize,
) -> Result<McmcSamples> {
    config.validate()?;
    let mut latent = LatentState::new(y, variable_mode)?;
    // something must pin the latent scale beyond the prior
    if latent
        .layout
        .slices
        .iter()
        .all(|s| s.blocks.len() < 2)
    {
        return Err(Error::DegenerateData(
            "every slice is constant; the rank constraints carry no information".into(),
        ));
    }

    let mut state = ChainState::init(&latent.z, ranks, prior, RngStream::new(config.seed))?;
    state.sigma_sq = 1.0;

    let track_lambdas = prior.family == PriorFamily::Heteroscedastic;
    let order = state.factors.len();
    let mut accept_counts = vec![0usize; if track_lambdas { order } else { 0 }];
    let n_saved = config.saved_draws();
    let mut samples = McmcSamples {
        sigma_sq: Vec::with_capacity(n_saved),
        tau_sq: Vec::with_capacity(n_saved),
        lambdas: Vec::with_capacity(if track_lambdas { n_saved } else { 0 }),
        ranks: state.ranks().to_vec(),
        mean_m: DenseTensor::zeros(state.dims())?,
        n_saved: 0,
        iterations: config.iterations,
        burn_in: config.burn_in,
        thin: config.thin,
        seed: config.seed,
        lambda_accept: Vec::new(),
        saved_models: if config.save_models {
            Some(Vec::with_capacity(n_saved))
        } else {
            None
        },
    };
    let mut mean_sum = DenseTensor::zeros(state.dims())?;

    for iter in 1..=config.iterations {
        let accepted = parameter_sweep(&latent.z, &mut state, prior, config.vmf_sweeps, false)?;
        for (c, &a) in accept_counts.iter_mut().zip(&accepted) {
            if a {
                *c += 1;
            }
        }
        debug_assert_eq!(state.sigma_sq, 1.0);
        let m = tucker_product(&state.core, &state.factors)?;
        update_latent(&mut latent, &m, &mut state.rng)?;

        if iter > config.burn_in && (iter - config.burn_in) % config.thin == 0 {
            samples.sigma_sq.push(1.0);
            samples.tau_sq.push(state.tau_sq);
            if track_lambdas {
                samples.lambdas.push(state.lambdas.iter().flatten().cloned().collect());
            }
            for (acc, v) in mean_sum.values_mut().iter_mut().zip(m.values()) {
                *acc += v;
            }
            if let Some(models) = samples.saved_models.as_mut() {
                models.push(state.model()?);
            }
            samples.n_saved += 1;
        }
    }
    let count = samples.n_saved.max(1) as f64;
    for v in mean_sum.values_mut() {
        *v /= count;
    }
    samples.mean_m = mean_sum;
    samples.lambda_accept = accept_counts
        .iter()
        .map(|&c| c as f64 / config.iterations as f64)
        .collect();
    Ok(samples)
}

/// Kendall's tau-b between two vectors, skipping pairs where either
/// element is missing (NaN). Computed in O(n log n) by sorting on the
/// first variable and counting inversions of the second with a merge
/// sort, with the usual tie corrections.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "vectors of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    let mut pairs: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(&a, &b)| (a, b))
        .collect();
    let n = pairs.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "fewer than 2 complete pairs".into(),
        ));
    }
    pairs.sort_by(|p, q| {
        p.0.partial_cmp(&q.0)
            .unwrap()
            .then(p.1.partial_cmp(&q.1).unwrap())
    });
    let n0 = n as f64 * (n as f64 - 1.0) / 2.0;
    // ties in x, and joint ties
    let mut n1 = 0.0f64;
    let mut n3 = 0.0f64;
    {
        let mut i = 0;
        while i < n {
            let mut j = i + 1;
            while j < n && pairs[j].0 == pairs[i].0 {
                j += 1;
            }
            let t = (j - i) as f64;
            n1 += t * (t - 1.0) / 2.0;
            let mut a = i;
            while a < j {
                let mut b = a + 1;
                while b < j && pairs[b].1 == pairs[a].1 {
                    b += 1;
                }
                let tt = (b - a) as f64;
                n3 += tt * (tt - 1.0) / 2.0;
                a = b;
            }
            i = j;
        }
    }
    // discordant pairs: inversions of the y sequence
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0f64; n];
    let swaps = merge_count(&mut ys, &mut buf, 0, n);
    // ties in y from the now-sorted sequence
    let mut n2 = 0.0f64;
    {
        let mut i = 0;
        while i < n {
            let mut j = i + 1;
            while j < n && ys[j] == ys[i] {
                j += 1;
            }
            let t = (j - i) as f64;
            n2 += t * (t - 1.0) / 2.0;
            i = j;
        }
    }
    let denom = ((n0 - n1) * (n0 - n2)).sqrt();
    if denom == 0.0 {
        return Err(Error::DegenerateData(
            "kendall tau undefined for a constant vector".into(),
        ));
    }
    Ok(((n0 - n1 - n2 + n3) - 2.0 * swaps as f64) / denom)
}

/// Merge sort on `v[lo..hi]` returning the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut [f64], lo: usize, hi: usize) -> u64 {
    if hi - lo < 2 {
        return 0;
    }
    let mid = (lo + hi) / 2;
    let mut swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
    let (mut i, mut j, mut k) = (lo, mid, lo);
    while i < mid && j < hi {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            buf[k] = v[j];
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    while i < mid {
        buf[k] = v[i];
        i += 1;
        k += 1;
    }
    while j < hi {
        buf[k] = v[j];
        j += 1;
        k += 1;
    }
    v[lo..hi].copy_from_slice(&buf[lo..hi]);
    swaps
}
