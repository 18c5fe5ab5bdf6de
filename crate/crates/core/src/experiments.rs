//! Simulation harness: estimator comparison tables, eigenvalue-difference
//! curves, the posterior equivariance check and a synthetic ordinal
//! relational benchmark.
//!
//! Everything is deterministic given the root seeds: each (condition,
//! replicate, estimator) triple derives its own random stream, so
//! replicates can run in parallel without affecting results.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::als::hooi;
use crate::diagnostics::{normalized_eigenspectrum, relative_squared_error};
use crate::error::{Error, Result};
use crate::kernels::sample_stiefel_uniform;
use crate::normal_tdm::{run_chain, ChainConfig, PriorSpec, SigmaPrior};
use crate::rng::{derive_seed, RngStream};
use crate::sftd::{kendall_tau, run_sftd_chain};
use crate::tensor::{mode_multiply, tucker_product, DenseTensor};

/// One cell of the simulation design.
#[derive(Debug, Clone, PartialEq)]
pub struct SimCondition {
    pub dims: Vec<usize>,
    /// True multilinear rank of the mean array.
    pub r0: Vec<usize>,
    /// Signal scale of the core prior used to generate the data.
    pub psi: f64,
    /// Rank at which the estimators are fit.
    pub fitted_r: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
}

impl SimCondition {
    pub fn label(&self) -> String {
        let fmt = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join("x")
        };
        format!(
            "r0={} psi={} fit={}",
            fmt(&self.r0),
            self.psi,
            fmt(&self.fitted_r)
        )
    }

    fn validate(&self) -> Result<()> {
        for (which, r) in [("true", &self.r0), ("fitted", &self.fitted_r)] {
            if r.len() != self.dims.len()
                || r.iter().zip(&self.dims).any(|(&rk, &nk)| rk == 0 || rk > nk)
            {
                return Err(Error::InvalidArgument(format!(
                    "{} rank {:?} incompatible with dims {:?}",
                    which, r, self.dims
                )));
            }
        }
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("need at least one replicate".into()));
        }
        Ok(())
    }
}

/// Draws one dataset: uniform Stiefel factors, a normal core with
/// variance `psi * (prod r0_k^2)^(-1/3)` per entry, mean array
/// `M = S x {U}` and standard normal noise. Returns `(Y, M)`.
pub fn generate_synthetic(
    cond: &SimCondition,
    rng: &mut RngStream,
) -> Result<(DenseTensor, DenseTensor)> {
    cond.validate()?;
    let factors: Vec<_> = cond
        .dims
        .iter()
        .zip(&cond.r0)
        .map(|(&n, &r)| sample_stiefel_uniform(n, r, rng))
        .collect::<Result<_>>()?;
    let rank_scale: f64 = cond.r0.iter().map(|&r| (r * r) as f64).product::<f64>();
    let sd = (cond.psi * rank_scale.powf(-1.0 / 3.0)).sqrt();
    let r: usize = cond.r0.iter().product();
    let core = DenseTensor::new(
        cond.r0.clone(),
        (0..r).map(|_| sd * rng.standard_normal()).collect(),
    )?;
    let m = tucker_product(&core, &factors)?;
    let mut y = m.clone();
    for v in y.values_mut() {
        *v += rng.standard_normal();
    }
    Ok((y, m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// Alternating least squares (orthogonal iteration).
    Als,
    /// Posterior mean under the homoscedastic core prior.
    Hom,
    /// Posterior mean under the heteroscedastic core prior.
    Het,
}

impl Estimator {
    pub fn label(&self) -> &'static str {
        match self {
            Estimator::Als => "ALS",
            Estimator::Hom => "HOM",
            Estimator::Het => "HET",
        }
    }
}

/// Knobs for [`run_table`].
#[derive(Debug, Clone)]
pub struct TableOptions {
    /// Schedule for the Bayesian fits; the seed field is ignored (seeds
    /// are derived per condition and replicate).
    pub chain: ChainConfig,
    pub als_max_iter: usize,
    pub als_tol: f64,
    /// Keep every fitted array and truth, for eigenspectrum curves.
    pub keep_fits: bool,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self {
            chain: desk_chain_config(),
            als_max_iter: crate::als::DEFAULT_MAX_ITER,
            als_tol: crate::als::DEFAULT_TOL,
            keep_fits: false,
        }
    }
}

/// Mean relative squared errors per estimator and condition, plus the
/// per-replicate values (and, optionally, every fitted array).
#[derive(Debug, Clone)]
pub struct TableReport {
    pub conditions: Vec<SimCondition>,
    pub estimators: Vec<Estimator>,
    /// `mean_rse[e][c]` averages the replicates of condition `c` under
    /// estimator `e`.
    pub mean_rse: Vec<Vec<f64>>,
    pub replicate_rse: Vec<Vec<Vec<f64>>>,
    /// `fits[e][c][rep]`, present when `keep_fits` was set.
    pub fits: Option<Vec<Vec<Vec<DenseTensor>>>>,
    pub truths: Option<Vec<Vec<DenseTensor>>>,
}

impl TableReport {
    pub fn cell(&self, estimator: Estimator, cond_idx: usize) -> f64 {
        let e = self
            .estimators
            .iter()
            .position(|&x| x == estimator)
            .expect("estimator present");
        self.mean_rse[e][cond_idx]
    }
}

struct JobResult {
    cond_idx: usize,
    rep: usize,
    rse: Vec<f64>,
    fits: Option<Vec<DenseTensor>>,
    truth: Option<DenseTensor>,
}

fn fit_one(
    estimator: Estimator,
    y: &DenseTensor,
    cond: &SimCondition,
    opts: &TableOptions,
    seed: u64,
) -> Result<DenseTensor> {
    match estimator {
        Estimator::Als => Ok(hooi(y, &cond.fitted_r, opts.als_max_iter, opts.als_tol)?.fitted),
        Estimator::Hom | Estimator::Het => {
            let mut prior = match estimator {
                Estimator::Hom => PriorSpec::homoscedastic(&cond.dims, &cond.fitted_r),
                _ => PriorSpec::heteroscedastic(&cond.dims),
            };
            if cond.fitted_r == cond.dims {
                // full-rank fit: the reciprocal prior is improper here
                prior = prior.with_sigma_prior(SigmaPrior::ProperGamma {
                    shape: 0.5,
                    rate: 0.5,
                });
            }
            let config = ChainConfig {
                seed,
                ..opts.chain.clone()
            };
            Ok(run_chain(y, &cond.fitted_r, &prior, &config)?.mean_m)
        }
    }
}

/// Fits every estimator to every replicate of every condition and
/// averages the relative squared errors. Replicates run in parallel;
/// all randomness is derived from the condition seeds.
pub fn run_table(
    conditions: &[SimCondition],
    estimators: &[Estimator],
    opts: &TableOptions,
) -> Result<TableReport> {
    for c in conditions {
        c.validate()?;
    }
    let jobs: Vec<(usize, usize)> = conditions
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| (0..c.replicates).map(move |rep| (ci, rep)))
        .collect();

    let results: Vec<JobResult> = jobs
        .par_iter()
        .map(|&(ci, rep)| -> Result<JobResult> {
            let cond = &conditions[ci];
            let base = derive_seed(cond.seed, rep as u64);
            let mut data_rng = RngStream::new(derive_seed(base, 1));
            let (y, m_true) = generate_synthetic(cond, &mut data_rng)?;
            let mut rse = Vec::with_capacity(estimators.len());
            let mut fits = if opts.keep_fits { Some(Vec::new()) } else { None };
            for (ei, &est) in estimators.iter().enumerate() {
                let fit = fit_one(est, &y, cond, opts, derive_seed(base, 100 + ei as u64))?;
                rse.push(relative_squared_error(&m_true, &fit)?);
                if let Some(f) = fits.as_mut() {
                    f.push(fit);
                }
            }
            Ok(JobResult {
                cond_idx: ci,
                rep,
                rse,
                fits,
                truth: if opts.keep_fits { Some(m_true) } else { None },
            })
        })
        .collect::<Result<_>>()?;

    let ne = estimators.len();
    let mut replicate_rse: Vec<Vec<Vec<f64>>> = (0..ne)
        .map(|_| {
            conditions
                .iter()
                .map(|c| vec![f64::NAN; c.replicates])
                .collect()
        })
        .collect();
    let mut fits: Option<Vec<Vec<Vec<Option<DenseTensor>>>>> = opts.keep_fits.then(|| {
        (0..ne)
            .map(|_| {
                conditions
                    .iter()
                    .map(|c| vec![None; c.replicates])
                    .collect()
            })
            .collect()
    });
    let mut truths: Option<Vec<Vec<Option<DenseTensor>>>> = opts.keep_fits.then(|| {
        conditions
            .iter()
            .map(|c| vec![None; c.replicates])
            .collect()
    });
    for job in results {
        for (e, &v) in job.rse.iter().enumerate() {
            replicate_rse[e][job.cond_idx][job.rep] = v;
        }
        if let (Some(fits), Some(job_fits)) = (fits.as_mut(), job.fits) {
            for (e, f) in job_fits.into_iter().enumerate() {
                fits[e][job.cond_idx][job.rep] = Some(f);
            }
        }
        if let (Some(truths), Some(t)) = (truths.as_mut(), job.truth) {
            truths[job.cond_idx][job.rep] = Some(t);
        }
    }
    let mean_rse = replicate_rse
        .iter()
        .map(|row| {
            row.iter()
                .map(|reps| reps.iter().sum::<f64>() / reps.len() as f64)
                .collect()
        })
        .collect();
    let unwrap_fits = |v: Vec<Vec<Vec<Option<DenseTensor>>>>| {
        v.into_iter()
            .map(|per_est| {
                per_est
                    .into_iter()
                    .map(|per_cond| {
                        per_cond
                            .into_iter()
                            .map(|t| t.expect("every job reported"))
                            .collect()
                    })
                    .collect()
            })
            .collect()
    };
    Ok(TableReport {
        conditions: conditions.to_vec(),
        estimators: estimators.to_vec(),
        mean_rse,
        replicate_rse,
        fits: fits.map(unwrap_fits),
        truths: truths.map(|v| {
            v.into_iter()
                .map(|per_cond| {
                    per_cond
                        .into_iter()
                        .map(|t| t.expect("every job reported"))
                        .collect()
                })
                .collect()
        }),
    })
}

/// Desk-scale design: dims (24, 20, 16), true ranks (6,5,4) and
/// (12,10,8), signal scales 1000 and 2000, five replicates. The
/// misspecified variant fits at twice the true rank (capped at the
/// dimensions, where it becomes a full-rank fit).
pub fn desk_conditions(misspecified: bool, seed: u64) -> Vec<SimCondition> {
    build_conditions(
        vec![24, 20, 16],
        &[vec![6, 5, 4], vec![12, 10, 8]],
        misspecified,
        5,
        seed,
    )
}

/// Full-scale design matching the reference study: dims (60, 50, 40),
/// true ranks (6,5,4) and (30,25,20), ten replicates.
pub fn paper_conditions(misspecified: bool, seed: u64) -> Vec<SimCondition> {
    build_conditions(
        vec![60, 50, 40],
        &[vec![6, 5, 4], vec![30, 25, 20]],
        misspecified,
        10,
        seed,
    )
}

fn build_conditions(
    dims: Vec<usize>,
    r0s: &[Vec<usize>],
    misspecified: bool,
    replicates: usize,
    seed: u64,
) -> Vec<SimCondition> {
    let mut out = Vec::new();
    for r0 in r0s {
        for &psi in &[1000.0, 2000.0] {
            let fitted_r = if misspecified {
                r0.iter()
                    .zip(&dims)
                    .map(|(&r, &n)| (2 * r).min(n))
                    .collect()
            } else {
                r0.clone()
            };
            let idx = out.len() as u64;
            out.push(SimCondition {
                dims: dims.clone(),
                r0: r0.clone(),
                psi,
                fitted_r,
                replicates,
                seed: derive_seed(seed, idx),
            });
        }
    }
    out
}

/// Desk-scale schedule: 6000 iterations, 1000 burn-in, thinning 10.
pub fn desk_chain_config() -> ChainConfig {
    ChainConfig {
        iterations: 6000,
        burn_in: 1000,
        thin: 10,
        ..ChainConfig::default()
    }
}

/// Full-scale schedule: 11000 iterations, 1000 burn-in, thinning 10.
pub fn paper_chain_config() -> ChainConfig {
    ChainConfig::default()
}

/// Per-replicate difference between the normalized mode-k eigenspectrum
/// of each fit and of the corresponding truth.
pub fn eigen_difference_curves(
    fits: &[DenseTensor],
    truths: &[DenseTensor],
    mode: usize,
) -> Result<Vec<Vec<f64>>> {
    if fits.len() != truths.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} fits vs {} truths",
            fits.len(),
            truths.len()
        )));
    }
    fits.iter()
        .zip(truths)
        .map(|(f, t)| {
            let sf = normalized_eigenspectrum(f, mode)?;
            let st = normalized_eigenspectrum(t, mode)?;
            Ok(sf.iter().zip(&st).map(|(a, b)| a - b).collect())
        })
        .collect()
}

/// Outcome of the posterior equivariance check.
#[derive(Debug, Clone)]
pub struct EquivarianceReport {
    /// Frobenius norm of the mean difference between the transformed-data
    /// posterior mean and the transformed posterior mean.
    pub deviation_norm: f64,
    /// Monte Carlo standard error of that norm under the null, combined
    /// over both arms.
    pub combined_se_norm: f64,
    /// `deviation_norm / combined_se_norm`, the pass statistic.
    pub deviation_ratio: f64,
    pub max_abs_deviation: f64,
    /// Scale read-back: mean of `sigma_hat(aWY) - a sigma_hat(Y)`, its
    /// standard error, and the standardized statistic.
    pub sigma_scale_diff: f64,
    pub sigma_scale_se: f64,
    pub sigma_scale_z: f64,
    pub chains_per_arm: usize,
}

/// Checks posterior equivariance under `y -> a * W y` with `W` a random
/// per-mode orthogonal rotation (applied through mode products; the
/// Kronecker matrix is never formed). Both arms run `chains_per_arm`
/// independent chains under the homoscedastic prior; the deviation of
/// the posterior means is reported relative to its combined Monte Carlo
/// standard error.
pub fn equivariance_check(
    dims: &[usize],
    ranks: &[usize],
    a: f64,
    psi: f64,
    seed: u64,
    chain: &ChainConfig,
    chains_per_arm: usize,
) -> Result<EquivarianceReport> {
    if !(a > 0.0) {
        return Err(Error::InvalidArgument("scale must be positive".into()));
    }
    if chains_per_arm < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 chains per arm for a Monte Carlo standard error".into(),
        ));
    }
    let cond = SimCondition {
        dims: dims.to_vec(),
        r0: ranks.to_vec(),
        psi,
        fitted_r: ranks.to_vec(),
        replicates: 1,
        seed,
    };
    let mut data_rng = RngStream::new(derive_seed(seed, 1));
    let (y, _) = generate_synthetic(&cond, &mut data_rng)?;

    let mut w_rng = RngStream::new(derive_seed(seed, 2));
    let rotations: Vec<_> = dims
        .iter()
        .map(|&n| sample_stiefel_uniform(n, n, &mut w_rng))
        .collect::<Result<_>>()?;
    let mut yt = y.clone();
    for (k, w) in rotations.iter().enumerate() {
        yt = mode_multiply(&yt, w, k)?;
    }
    let yt = yt.scaled(a);

    let prior = PriorSpec::homoscedastic(dims, ranks);
    let jobs: Vec<(usize, bool)> = (0..chains_per_arm)
        .flat_map(|g| [(g, true), (g, false)])
        .collect();
    let fits: Vec<(usize, bool, DenseTensor, f64)> = jobs
        .par_iter()
        .map(|&(g, transformed)| -> Result<(usize, bool, DenseTensor, f64)> {
            let tag = if transformed { 100 } else { 200 } + g as u64;
            let config = ChainConfig {
                seed: derive_seed(seed, tag),
                ..chain.clone()
            };
            let data = if transformed { &yt } else { &y };
            let samples = run_chain(data, ranks, &prior, &config)?;
            let mean_sigma = samples.mean_sigma();
            Ok((g, transformed, samples.mean_m, mean_sigma))
        })
        .collect::<Result<_>>()?;

    let n = y.len();
    let mut diffs: Vec<Vec<f64>> = vec![Vec::new(); chains_per_arm];
    let mut sigma1 = vec![0.0; chains_per_arm];
    let mut sigma2 = vec![0.0; chains_per_arm];
    let mut arm1: Vec<Option<DenseTensor>> = vec![None; chains_per_arm];
    let mut arm2: Vec<Option<DenseTensor>> = vec![None; chains_per_arm];
    for (g, transformed, m, sig) in fits {
        if transformed {
            arm1[g] = Some(m);
            sigma1[g] = sig;
        } else {
            arm2[g] = Some(m);
            sigma2[g] = sig;
        }
    }
    for g in 0..chains_per_arm {
        let m1 = arm1[g].take().expect("arm populated");
        let m2 = arm2[g].take().expect("arm populated");
        let mut mapped = m2;
        for (k, w) in rotations.iter().enumerate() {
            mapped = mode_multiply(&mapped, w, k)?;
        }
        let mapped = mapped.scaled(a);
        diffs[g] = m1
            .values()
            .iter()
            .zip(mapped.values())
            .map(|(x, y)| x - y)
            .collect();
    }

    let g = chains_per_arm as f64;
    let mut dev_norm_sq = 0.0;
    let mut se_norm_sq = 0.0;
    let mut max_abs: f64 = 0.0;
    for i in 0..n {
        let mean = diffs.iter().map(|d| d[i]).sum::<f64>() / g;
        let var = diffs
            .iter()
            .map(|d| (d[i] - mean) * (d[i] - mean))
            .sum::<f64>()
            / (g - 1.0);
        dev_norm_sq += mean * mean;
        se_norm_sq += var / g;
        max_abs = max_abs.max(mean.abs());
    }
    let mean1 = sigma1.iter().sum::<f64>() / g;
    let mean2 = sigma2.iter().sum::<f64>() / g;
    let var1 = sigma1.iter().map(|x| (x - mean1) * (x - mean1)).sum::<f64>() / (g - 1.0);
    let var2 = sigma2.iter().map(|x| (x - mean2) * (x - mean2)).sum::<f64>() / (g - 1.0);
    let sigma_diff = mean1 - a * mean2;
    let sigma_se = (var1 / g + a * a * var2 / g).sqrt();

    let deviation_norm = dev_norm_sq.sqrt();
    let combined_se_norm = se_norm_sq.sqrt().max(1e-300);
    Ok(EquivarianceReport {
        deviation_norm,
        combined_se_norm,
        deviation_ratio: deviation_norm / combined_se_norm,
        max_abs_deviation: max_abs,
        sigma_scale_diff: sigma_diff,
        sigma_scale_se: sigma_se,
        sigma_scale_z: sigma_diff.abs() / sigma_se.max(1e-300),
        chains_per_arm,
    })
}

/// Identity case of the equivariance check: `a = 1`, `W = I`, matched
/// seeds. Returns the deviation norm, which must be exactly zero.
pub fn equivariance_identity_deviation(
    dims: &[usize],
    ranks: &[usize],
    seed: u64,
    chain: &ChainConfig,
) -> Result<f64> {
    let cond = SimCondition {
        dims: dims.to_vec(),
        r0: ranks.to_vec(),
        psi: 200.0,
        fitted_r: ranks.to_vec(),
        replicates: 1,
        seed,
    };
    let mut data_rng = RngStream::new(derive_seed(seed, 1));
    let (y, _) = generate_synthetic(&cond, &mut data_rng)?;
    let prior = PriorSpec::homoscedastic(dims, ranks);
    let config = ChainConfig {
        seed: derive_seed(seed, 3),
        ..chain.clone()
    };
    let m1 = run_chain(&y, ranks, &prior, &config)?.mean_m;
    let m2 = run_chain(&y, ranks, &prior, &config)?.mean_m;
    Ok(m1.sub(&m2)?.norm())
}

/// Shape of the per-slice discretization in the ordinal benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkewProfile {
    /// Zero-inflated counts in 0..=7 with a geometric tail; the
    /// zero-inflation mass varies across variable slices.
    Heavy,
    /// No transformation: the continuous latent data are observed.
    Identity,
}

/// Per-slice rank associations of the scale-free and least-squares fits.
#[derive(Debug, Clone)]
pub struct OrdinalReport {
    pub tau_sftd: Vec<f64>,
    pub tau_als: Vec<f64>,
}

/// Synthetic ordinal relational benchmark: a low-rank-plus-noise latent
/// array on (n, n, p) with the self-relation diagonal masked, pushed
/// through per-slice monotone discretization (or observed directly), fit
/// by the scale-free sampler and by least squares with imputation, and
/// compared by per-slice Kendall rank association with the observed
/// entries.
pub fn ordinal_benchmark(
    dims: &[usize],
    ranks: &[usize],
    skew: SkewProfile,
    seed: u64,
    chain: &ChainConfig,
) -> Result<OrdinalReport> {
    if dims.len() != 3 || dims[0] != dims[1] {
        return Err(Error::InvalidArgument(
            "the relational benchmark needs dims (n, n, p)".into(),
        ));
    }
    let n = dims[0];
    let p = dims[2];
    let total: usize = dims.iter().product();
    let r: usize = ranks.iter().product();
    let rank_scale: f64 = ranks.iter().map(|&rk| (rk * rk) as f64).product::<f64>();
    // aim for a per-entry signal variance of about 4
    let psi = 4.0 * total as f64 * rank_scale.powf(1.0 / 3.0) / r as f64;
    let cond = SimCondition {
        dims: dims.to_vec(),
        r0: ranks.to_vec(),
        psi,
        fitted_r: ranks.to_vec(),
        replicates: 1,
        seed,
    };
    let mut rng = RngStream::new(derive_seed(seed, 10));
    let (zlat, _) = generate_synthetic(&cond, &mut rng)?;

    // mask the self-relation diagonal
    let mut mask = vec![true; total];
    for k in 0..p {
        for i in 0..n {
            mask[zlat.linear_index(&[i, i, k])] = false;
        }
    }

    let mut values = vec![f64::NAN; total];
    for k in 0..p {
        // observed entries of slice k in linear order
        let mut idxs = Vec::with_capacity(n * n - n);
        for j in 0..n {
            for i in 0..n {
                let lin = zlat.linear_index(&[i, j, k]);
                if mask[lin] {
                    idxs.push(lin);
                }
            }
        }
        match skew {
            SkewProfile::Identity => {
                for &lin in &idxs {
                    values[lin] = zlat.values()[lin];
                }
            }
            SkewProfile::Heavy => {
                // per-slice zero-inflation between 0.55 and 0.95
                let p0 = if p > 1 {
                    0.55 + 0.4 * k as f64 / (p as f64 - 1.0)
                } else {
                    0.75
                };
                let decay: f64 = 0.5;
                let mut cum = vec![0.0f64; 8];
                let wsum: f64 = (0..7).map(|c| decay.powi(c)).sum();
                cum[0] = p0;
                for c in 1..8 {
                    cum[c] = cum[c - 1] + (1.0 - p0) * decay.powi(c as i32 - 1) / wsum;
                }
                let m = idxs.len();
                let mut order: Vec<usize> = (0..m).collect();
                order.sort_by(|&a, &b| {
                    zlat.values()[idxs[a]]
                        .partial_cmp(&zlat.values()[idxs[b]])
                        .unwrap()
                });
                for (pos, &oi) in order.iter().enumerate() {
                    let u = (pos as f64 + 0.5) / m as f64;
                    let count = cum.iter().take(7).filter(|&&c| u > c).count();
                    values[idxs[oi]] = count as f64;
                }
            }
        }
    }
    let y = DenseTensor::with_mask(dims.to_vec(), values, mask.clone())?;

    let prior = PriorSpec::heteroscedastic(dims);
    let config = ChainConfig {
        seed: derive_seed(seed, 11),
        ..chain.clone()
    };
    let sftd_fit = run_sftd_chain(&y, ranks, &prior, &config, 2)?.mean_m;
    let als_fit = crate::als::hooi_impute(&y, ranks, 200, 1e-9)?.fitted;

    let mut tau_sftd = Vec::with_capacity(p);
    let mut tau_als = Vec::with_capacity(p);
    for k in 0..p {
        let mut ys = Vec::new();
        let mut ms = Vec::new();
        let mut ma = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let lin = y.linear_index(&[i, j, k]);
                if mask[lin] {
                    ys.push(y.values()[lin]);
                    ms.push(sftd_fit.values()[lin]);
                    ma.push(als_fit.values()[lin]);
                }
            }
        }
        tau_sftd.push(kendall_tau(&ms, &ys)?);
        tau_als.push(kendall_tau(&ma, &ys)?);
    }
    Ok(OrdinalReport { tau_sftd, tau_als })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes the mean-RSE table: one row per estimator, one column per
/// condition.
pub fn write_rse_csv(report: &TableReport, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    write!(w, "estimator")?;
    for c in &report.conditions {
        write!(w, ",{}", c.label())?;
    }
    writeln!(w)?;
    for (e, est) in report.estimators.iter().enumerate() {
        write!(w, "{}", est.label())?;
        for v in &report.mean_rse[e] {
            write!(w, ",{}", v)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Writes per-replicate errors in long form.
pub fn write_rse_replicates_csv(report: &TableReport, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "estimator,condition,replicate,rse")?;
    for (e, est) in report.estimators.iter().enumerate() {
        for (c, cond) in report.conditions.iter().enumerate() {
            for (rep, v) in report.replicate_rse[e][c].iter().enumerate() {
                writeln!(w, "{},{},{},{}", est.label(), cond.label(), rep + 1, v)?;
            }
        }
    }
    Ok(())
}

/// Writes plot-ready eigenvalue-difference curves (requires a table run
/// with `keep_fits`).
pub fn write_eigen_curves_csv(report: &TableReport, mode: usize, path: &Path) -> Result<()> {
    let fits = report.fits.as_ref().ok_or_else(|| {
        Error::InvalidArgument("eigenvalue curves need a table run that kept its fits".into())
    })?;
    let truths = report.truths.as_ref().expect("kept with fits");
    let mut w = create(path)?;
    writeln!(w, "condition,estimator,replicate,position,diff")?;
    for (e, est) in report.estimators.iter().enumerate() {
        for (c, cond) in report.conditions.iter().enumerate() {
            let curves = eigen_difference_curves(&fits[e][c], &truths[c], mode)?;
            for (rep, curve) in curves.iter().enumerate() {
                for (pos, v) in curve.iter().enumerate() {
                    writeln!(
                        w,
                        "{},{},{},{},{}",
                        cond.label(),
                        est.label(),
                        rep + 1,
                        pos + 1,
                        v
                    )?;
                }
            }
        }
    }
    Ok(())
}

/// Writes the equivariance report as metric,value rows.
pub fn write_equivariance_csv(report: &EquivarianceReport, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "metric,value")?;
    writeln!(w, "deviation_norm,{}", report.deviation_norm)?;
    writeln!(w, "combined_se_norm,{}", report.combined_se_norm)?;
    writeln!(w, "deviation_ratio,{}", report.deviation_ratio)?;
    writeln!(w, "max_abs_deviation,{}", report.max_abs_deviation)?;
    writeln!(w, "sigma_scale_diff,{}", report.sigma_scale_diff)?;
    writeln!(w, "sigma_scale_se,{}", report.sigma_scale_se)?;
    writeln!(w, "sigma_scale_z,{}", report.sigma_scale_z)?;
    writeln!(w, "chains_per_arm,{}", report.chains_per_arm)?;
    Ok(())
}

/// Writes the per-slice rank associations of both fits.
pub fn write_ordinal_csv(report: &OrdinalReport, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "slice,tau_sftd,tau_als")?;
    for (i, (s, a)) in report.tau_sftd.iter().zip(&report.tau_als).enumerate() {
        writeln!(w, "{},{},{}", i + 1, s, a)?;
    }
    Ok(())
}
