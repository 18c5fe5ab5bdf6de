//! Gibbs sampler for the normal Tucker decomposition model
//!
//! ```text
//! y = sigma * U s + sigma * e,   e ~ N(0, I),   U = U_K kron ... kron U_1
//! ```
//!
//! under the invariant prior (reciprocal density on `sigma`, independent
//! uniform Stiefel factors) and a zero-mean normal prior on the
//! vectorized core `s` with diagonal covariance `Psi`. `Psi` is either
//! `tau^2 I` (homoscedastic), the separable heteroscedastic form
//! `tau^2 (Lambda_K kron ... kron Lambda_1)` with each `Lambda_k` a
//! positive diagonal summing to one (mode-specific eigenvalue
//! shrinkage), or held fixed.
//!
//! One iteration draws, in order: `sigma^2` marginally over `s`, then
//! `s | sigma^2`, then each factor from its matrix von Mises-Fisher full
//! conditional, then `tau^2` (conjugate inverse-gamma) and, in the
//! heteroscedastic model, each `Lambda_k` by a Dirichlet random-walk
//! Metropolis-Hastings step.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernels::{
    sample_inverse_gamma, sample_simplex_proposal, sample_vmf_matrix_from, DEFAULT_VMF_SWEEPS,
};
use crate::rng::RngStream;
use crate::tensor::{
    hosvd, matricize, mode_multiply, orthonormality_defect, tucker_product, DenseTensor,
    TuckerModel,
};

/// Numerical floor applied to eigenvalue weights inside shrinkage
/// computations; draws themselves are unconstrained beyond the simplex.
const LAMBDA_FLOOR: f64 = 1e-12;

/// Orthonormality drift beyond which a factor is re-orthonormalized.
const FACTOR_DRIFT_TOL: f64 = 1e-8;

/// Covariance family of the core prior.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorFamily {
    /// `Psi = tau^2 I`.
    Homoscedastic,
    /// `Psi = tau^2 (Lambda_K kron ... kron Lambda_1)` with simplex
    /// diagonals, all updated in the chain.
    Heteroscedastic,
    /// `Psi` held fixed at `tau_sq` times the separable diagonal built
    /// from `lambdas` (identity weights when `None`); no hyperparameter
    /// updates.
    FixedPsi {
        tau_sq: f64,
        lambdas: Option<Vec<Vec<f64>>>,
    },
}

/// Prior on the error scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaPrior {
    /// Improper density proportional to `1/sigma`; equivariant, but
    /// improper at a full-rank fit.
    ImproperReciprocal,
    /// Gamma(shape, rate) prior on the precision `1/sigma^2`; required
    /// when the fitted rank equals the array dimensions.
    ProperGamma { shape: f64, rate: f64 },
}

/// Prior specification for the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub family: PriorFamily,
    /// Prior shape numerator of the inverse-gamma(nu0/2, tau0^2/2) law
    /// on `tau^2`.
    pub nu0: f64,
    pub tau0_sq: f64,
    pub sigma_prior: SigmaPrior,
    /// Scale of the Dirichlet random-walk proposal; the effective
    /// concentration at mode k is `mh_concentration * r_k`.
    pub mh_concentration: f64,
}

impl PriorSpec {
    /// Homoscedastic default: `nu0 = 1`, `tau0^2 = prod n_k / r_k`, so
    /// the prior magnitude of the mean array matches that of the error.
    pub fn homoscedastic(dims: &[usize], ranks: &[usize]) -> Self {
        let tau0_sq = dims
            .iter()
            .zip(ranks)
            .map(|(&n, &r)| n as f64 / r as f64)
            .product();
        Self {
            family: PriorFamily::Homoscedastic,
            nu0: 1.0,
            tau0_sq,
            sigma_prior: SigmaPrior::ImproperReciprocal,
            mh_concentration: 100.0,
        }
    }

    /// Heteroscedastic default: `nu0 = 1`, `tau0^2 = prod n_k` (the
    /// simplex weights make the prior magnitude match the error again).
    pub fn heteroscedastic(dims: &[usize]) -> Self {
        let tau0_sq = dims.iter().map(|&n| n as f64).product();
        Self {
            family: PriorFamily::Heteroscedastic,
            nu0: 1.0,
            tau0_sq,
            sigma_prior: SigmaPrior::ImproperReciprocal,
            mh_concentration: 100.0,
        }
    }

    pub fn fixed_psi(tau_sq: f64, lambdas: Option<Vec<Vec<f64>>>) -> Self {
        Self {
            family: PriorFamily::FixedPsi { tau_sq, lambdas },
            nu0: 1.0,
            tau0_sq: 1.0,
            sigma_prior: SigmaPrior::ImproperReciprocal,
            mh_concentration: 100.0,
        }
    }

    pub fn with_sigma_prior(mut self, sigma_prior: SigmaPrior) -> Self {
        self.sigma_prior = sigma_prior;
        self
    }

    pub fn with_nu0(mut self, nu0: f64) -> Self {
        self.nu0 = nu0;
        self
    }

    pub fn with_tau0_sq(mut self, tau0_sq: f64) -> Self {
        self.tau0_sq = tau0_sq;
        self
    }

    pub fn with_mh_concentration(mut self, c: f64) -> Self {
        self.mh_concentration = c;
        self
    }

    fn uses_lambdas(&self) -> bool {
        matches!(
            self.family,
            PriorFamily::Heteroscedastic
                | PriorFamily::FixedPsi {
                    lambdas: Some(_),
                    ..
                }
        )
    }
}

/// Iteration schedule and bookkeeping knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    /// A state is saved every `thin`-th iteration after burn-in.
    pub thin: usize,
    pub seed: u64,
    /// Internal Gibbs sweeps per matrix von Mises-Fisher draw.
    pub vmf_sweeps: usize,
    /// Keep every saved (core, factors, sigma) triple, not just traces.
    pub save_models: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            iterations: 11_000,
            burn_in: 1000,
            thin: 10,
            seed: 0,
            vmf_sweeps: DEFAULT_VMF_SWEEPS,
            save_models: false,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return Err(Error::InvalidArgument(format!(
                "need burn_in < iterations, got {} / {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidArgument("thin must be at least 1".into()));
        }
        if self.vmf_sweeps == 0 {
            return Err(Error::InvalidArgument("vmf_sweeps must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of states the schedule saves.
    pub fn saved_draws(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// Current state of one chain. The factors are kept orthonormal to 1e-8
/// (re-orthonormalized if numerical drift ever exceeds that).
#[derive(Debug, Clone)]
pub struct ChainState {
    pub sigma_sq: f64,
    pub tau_sq: f64,
    /// One simplex vector per mode; uniform and unused outside the
    /// heteroscedastic/fixed families.
    pub lambdas: Vec<Vec<f64>>,
    /// Core array on the standardized scale (the model mean is
    /// `sigma * core x {U}`).
    pub core: DenseTensor,
    pub factors: Vec<DMatrix<f64>>,
    pub rng: RngStream,
}

impl ChainState {
    /// Deterministic initialization from a truncated higher-order SVD of
    /// the data: factors from the HOSVD, `sigma^2` from its residual,
    /// the core rescaled by `sigma`, uniform eigenvalue weights.
    pub fn init(
        y: &DenseTensor,
        ranks: &[usize],
        prior: &PriorSpec,
        rng: RngStream,
    ) -> Result<Self> {
        let model = hosvd(y, ranks)?;
        let fitted = model.reconstruct();
        let rss = y.sub(&fitted)?.norm_sq();
        let n = y.len() as f64;
        let base = (y.norm_sq() / n).max(1e-12);
        let sigma_sq = (rss / n).clamp(1e-6 * base, base).max(1e-300);
        let sigma = sigma_sq.sqrt();
        let s: Vec<f64> = model.core.values().iter().map(|v| v / sigma).collect();
        let s_norm_sq: f64 = s.iter().map(|v| v * v).sum();
        let r: usize = ranks.iter().product();

        let lambdas: Vec<Vec<f64>> = match &prior.family {
            PriorFamily::FixedPsi {
                lambdas: Some(ls), ..
            } => {
                if ls.len() != ranks.len()
                    || ls.iter().zip(ranks).any(|(l, &r)| l.len() != r)
                {
                    return Err(Error::ShapeMismatch(
                        "fixed eigenvalue weights do not match the fitted ranks".into(),
                    ));
                }
                ls.clone()
            }
            _ => ranks
                .iter()
                .map(|&rk| vec![1.0 / rk as f64; rk])
                .collect(),
        };
        let tau_sq = match &prior.family {
            PriorFamily::FixedPsi { tau_sq, .. } => *tau_sq,
            PriorFamily::Homoscedastic => (s_norm_sq / r as f64).max(1e-8),
            PriorFamily::Heteroscedastic => s_norm_sq.max(1e-8),
        };
        Ok(Self {
            sigma_sq,
            tau_sq,
            lambdas,
            core: DenseTensor::new(ranks.to_vec(), s)?,
            factors: model.factors,
            rng,
        })
    }

    pub fn ranks(&self) -> &[usize] {
        self.core.dims()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|u| u.nrows()).collect()
    }

    /// Validated snapshot of the current Tucker model.
    pub fn model(&self) -> Result<TuckerModel> {
        TuckerModel::new(self.core.clone(), self.factors.clone(), self.sigma_sq.sqrt())
    }

    /// Current mean array `sigma * core x {U}`.
    pub fn mean_array(&self) -> Result<DenseTensor> {
        Ok(tucker_product(&self.core, &self.factors)?.scaled(self.sigma_sq.sqrt()))
    }

    /// Diagonal of the separable eigenvalue weight matrix
    /// `Lambda_K kron ... kron Lambda_1` in vectorization order (unit
    /// weights for the homoscedastic family), floored entrywise.
    fn lambda_diag(&self, prior: &PriorSpec) -> Vec<f64> {
        let r: usize = self.ranks().iter().product();
        if !prior.uses_lambdas() {
            return vec![1.0; r];
        }
        let mut diag = vec![1.0f64];
        for lk in &self.lambdas {
            let len = diag.len();
            let mut next = vec![0.0; len * lk.len()];
            for (ik, &l) in lk.iter().enumerate() {
                let l = l.max(LAMBDA_FLOOR);
                for (j, &d) in diag.iter().enumerate() {
                    next[j + len * ik] = d * l;
                }
            }
            diag = next;
        }
        diag
    }

    /// Diagonal of the prior covariance `Psi` of `s`.
    fn psi_diag(&self, prior: &PriorSpec) -> Vec<f64> {
        let mut d = self.lambda_diag(prior);
        for v in d.iter_mut() {
            *v *= self.tau_sq;
        }
        d
    }
}

/// `U^T y` computed by successive mode-k products with the transposed
/// factors; the Kronecker-product matrix is never formed.
fn project_to_core(y: &DenseTensor, factors: &[DMatrix<f64>]) -> Result<DenseTensor> {
    let mut out = y.clone();
    out.clear_mask();
    for (k, u) in factors.iter().enumerate() {
        out = mode_multiply(&out, &u.transpose(), k)?;
    }
    Ok(out)
}

/// Shape and rate of the gamma full conditional of the precision
/// `1/sigma^2`, with `s` integrated out. The quadratic form
/// `y' (U Psi U' + I)^{-1} y` is evaluated through the orthonormality
/// identity as `y'y - (U'y)' PsiTilde (U'y)` with
/// `PsiTilde = (Psi^{-1} + I)^{-1}` diagonal.
pub fn sigma_posterior(y: &DenseTensor, state: &ChainState, prior: &PriorSpec) -> Result<(f64, f64)> {
    let uty = project_to_core(y, &state.factors)?;
    let psi = state.psi_diag(prior);
    let mut q = y.norm_sq();
    for (&u, &p) in uty.values().iter().zip(&psi) {
        let shrink = p / (1.0 + p);
        if !shrink.is_finite() {
            return Err(Error::DegenerateEigenvalues);
        }
        q -= shrink * u * u;
    }
    let q = q.max(1e-300);
    let n = y.len() as f64;
    let (a, b) = match prior.sigma_prior {
        SigmaPrior::ImproperReciprocal => (0.0, 0.0),
        SigmaPrior::ProperGamma { shape, rate } => (shape, rate),
    };
    Ok((n / 2.0 + a, q / 2.0 + b))
}

/// Mean and variance vectors of the normal full conditional of `s`:
/// mean `PsiTilde U'y / sigma`, covariance `PsiTilde` (diagonal).
pub fn core_posterior(
    y: &DenseTensor,
    state: &ChainState,
    prior: &PriorSpec,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let uty = project_to_core(y, &state.factors)?;
    let psi = state.psi_diag(prior);
    let sigma = state.sigma_sq.sqrt();
    let mut mean = Vec::with_capacity(psi.len());
    let mut var = Vec::with_capacity(psi.len());
    for (&u, &p) in uty.values().iter().zip(&psi) {
        let shrink = p / (1.0 + p);
        if !shrink.is_finite() {
            return Err(Error::DegenerateEigenvalues);
        }
        mean.push(shrink * u / sigma);
        var.push(shrink);
    }
    Ok((mean, var))
}

/// Draws `s` from its normal full conditional given the current scale.
pub fn update_core(y: &DenseTensor, state: &mut ChainState, prior: &PriorSpec) -> Result<()> {
    let (mean, var) = core_posterior(y, state, prior)?;
    let values: Vec<f64> = mean
        .iter()
        .zip(&var)
        .map(|(&m, &v)| m + v.sqrt() * state.rng.standard_normal())
        .collect();
    state.core = DenseTensor::new(state.ranks().to_vec(), values)?;
    Ok(())
}

/// Step 1 of the sweep: draws `sigma^2` from its inverse-gamma full
/// conditional marginally over `s`, then `s` given the new scale.
pub fn update_sigma_and_core(
    y: &DenseTensor,
    state: &mut ChainState,
    prior: &PriorSpec,
) -> Result<()> {
    let (shape, rate) = sigma_posterior(y, state, prior)?;
    state.sigma_sq = sample_inverse_gamma(shape, rate, &mut state.rng)?;
    update_core(y, state, prior)
}

/// Natural parameter of the matrix von Mises-Fisher full conditional of
/// factor `k`: `H_k = Y_(k) U_{-k} S_(k)^T / sigma`, with the projection
/// `Y_(k) U_{-k}` computed through mode products.
pub fn factor_potential(y: &DenseTensor, state: &ChainState, mode: usize) -> Result<DMatrix<f64>> {
    let order = state.factors.len();
    if mode >= order {
        return Err(Error::ModeOutOfRange { mode, order });
    }
    let mut g = y.clone();
    g.clear_mask();
    for (j, u) in state.factors.iter().enumerate() {
        if j != mode {
            g = mode_multiply(&g, &u.transpose(), j)?;
        }
    }
    let gk = matricize(&g, mode)?;
    let sk = matricize(&state.core, mode)?;
    let h = gk * sk.transpose() / state.sigma_sq.sqrt();
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("factor potential at mode {}", mode)));
    }
    Ok(h)
}

/// Step 2 of the sweep for one mode: redraws `U_k` from vMF(`H_k`) via
/// column Gibbs started at the current factor.
pub fn update_factor(
    y: &DenseTensor,
    state: &mut ChainState,
    mode: usize,
    vmf_sweeps: usize,
) -> Result<()> {
    let h = factor_potential(y, state, mode)?;
    let current = state.factors[mode].clone();
    let mut u = sample_vmf_matrix_from(&h, &current, vmf_sweeps, &mut state.rng)?;
    if orthonormality_defect(&u) > FACTOR_DRIFT_TOL {
        let qr = u.qr();
        let rm = qr.r();
        let mut q = qr.q();
        for j in 0..q.ncols() {
            if rm[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        u = q;
    }
    state.factors[mode] = u;
    Ok(())
}

/// Draws `tau^2` from its conjugate inverse-gamma full conditional
/// `1/tau^2 ~ gamma((nu0 + r)/2, (tau0^2 + s' D^{-1} s)/2)` where `D` is
/// the separable eigenvalue diagonal (identity in the homoscedastic
/// family). No-op for a fixed covariance.
pub fn update_tau_sq(state: &mut ChainState, prior: &PriorSpec) -> Result<()> {
    if matches!(prior.family, PriorFamily::FixedPsi { .. }) {
        return Ok(());
    }
    let diag = state.lambda_diag(prior);
    let q: f64 = state
        .core
        .values()
        .iter()
        .zip(&diag)
        .map(|(&s, &d)| s * s / d)
        .sum();
    let r: usize = state.ranks().iter().product();
    let shape = (prior.nu0 + r as f64) / 2.0;
    let rate = (prior.tau0_sq + q) / 2.0;
    state.tau_sq = sample_inverse_gamma(shape, rate, &mut state.rng)?;
    Ok(())
}

/// Log-density of the current core under `N(0, tau^2 D)` with the mode-k
/// eigenvalue weights replaced by `candidate`. Used by the
/// Metropolis-Hastings update and by tests as a direct evaluation.
pub fn lambda_log_likelihood(state: &ChainState, mode: usize, candidate: &[f64]) -> f64 {
    let ranks = state.ranks().to_vec();
    let r: usize = ranks.iter().product();
    let mut idx = vec![0usize; ranks.len()];
    let mut total = -(r as f64) * 0.5 * (2.0 * std::f64::consts::PI).ln();
    for lin in 0..r {
        let mut d = state.tau_sq;
        for (k, &i) in idx.iter().enumerate() {
            let l = if k == mode {
                candidate[i]
            } else {
                state.lambdas[k][i]
            };
            d *= l.max(LAMBDA_FLOOR);
        }
        let s = state.core.values()[lin];
        total += -0.5 * (d.ln() + s * s / d);
        // odometer increment
        for (k, ik) in idx.iter_mut().enumerate() {
            *ik += 1;
            if *ik < ranks[k] {
                break;
            }
            *ik = 0;
        }
    }
    total
}

/// One Metropolis-Hastings proposal per mode for the eigenvalue weights
/// (uniform simplex prior, so only the likelihood and proposal densities
/// enter the ratio). Returns the per-mode acceptance indicators.
/// Requires the heteroscedastic family.
pub fn update_lambdas(state: &mut ChainState, prior: &PriorSpec) -> Result<Vec<bool>> {
    if prior.family != PriorFamily::Heteroscedastic {
        return Err(Error::InvalidArgument(
            "eigenvalue weights are only updated under the heteroscedastic family".into(),
        ));
    }
    let ranks = state.ranks().to_vec();
    let order = ranks.len();
    let r: usize = ranks.iter().product();
    let mut accepted = Vec::with_capacity(order);
    for k in 0..order {
        let rk = ranks[k];
        if rk == 1 {
            accepted.push(true);
            continue;
        }
        // grouped sufficient statistics: for each level j of mode k,
        // A_j = sum of s_i^2 / (tau^2 prod_{m != k} lambda_m) over entries
        // with i_k = j, and B_j = r / r_k entries contribute ln lambda_j.
        let mut a = vec![0.0f64; rk];
        let mut idx = vec![0usize; order];
        for lin in 0..r {
            let mut rest = state.tau_sq;
            for (m, &i) in idx.iter().enumerate() {
                if m != k {
                    rest *= state.lambdas[m][i].max(LAMBDA_FLOOR);
                }
            }
            let s = state.core.values()[lin];
            a[idx[k]] += s * s / rest;
            for (m, im) in idx.iter_mut().enumerate() {
                *im += 1;
                if *im < ranks[m] {
                    break;
                }
                *im = 0;
            }
        }
        let b = (r / rk) as f64;
        let log_term = |lambda: &[f64]| -> f64 {
            lambda
                .iter()
                .zip(&a)
                .map(|(&l, &aj)| {
                    let l = l.max(LAMBDA_FLOOR);
                    -0.5 * (b * l.ln() + aj / l)
                })
                .sum()
        };
        let current = state.lambdas[k].clone();
        let concentration = prior.mh_concentration * rk as f64;
        let (proposal, log_fwd, log_rev) =
            sample_simplex_proposal(&current, concentration, &mut state.rng)?;
        let log_acc = log_term(&proposal) - log_term(&current) + log_rev - log_fwd;
        let take = log_acc.is_finite() && state.rng.uniform().ln() < log_acc;
        if take {
            state.lambdas[k] = proposal;
        }
        accepted.push(take);
    }
    Ok(accepted)
}

/// One full Gibbs iteration. `update_sigma` is disabled by the
/// scale-free sampler, which pins `sigma^2 = 1`.
pub(crate) fn parameter_sweep(
    y: &DenseTensor,
    state: &mut ChainState,
    prior: &PriorSpec,
    vmf_sweeps: usize,
    update_sigma: bool,
) -> Result<Vec<bool>> {
    if update_sigma {
        update_sigma_and_core(y, state, prior)?;
    } else {
        update_core(y, state, prior)?;
    }
    for k in 0..state.factors.len() {
        update_factor(y, state, k, vmf_sweeps)?;
    }
    update_tau_sq(state, prior)?;
    if prior.family == PriorFamily::Heteroscedastic {
        update_lambdas(state, prior)
    } else {
        Ok(Vec::new())
    }
}

/// Thinned draws and accumulated posterior-mean array from one chain.
#[derive(Debug, Clone)]
pub struct McmcSamples {
    pub sigma_sq: Vec<f64>,
    pub tau_sq: Vec<f64>,
    /// Per saved draw: eigenvalue weights of every mode, concatenated in
    /// mode order (empty when the family carries none).
    pub lambdas: Vec<Vec<f64>>,
    /// Fitted ranks, giving the layout of each `lambdas` row.
    pub ranks: Vec<usize>,
    /// Arithmetic mean of `sigma * core x {U}` over the saved draws.
    pub mean_m: DenseTensor,
    pub n_saved: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Per-mode Metropolis-Hastings acceptance rates (heteroscedastic
    /// runs only).
    pub lambda_accept: Vec<f64>,
    pub saved_models: Option<Vec<TuckerModel>>,
}

impl McmcSamples {
    /// Trace of one eigenvalue weight.
    pub fn lambda_trace(&self, mode: usize, entry: usize) -> Vec<f64> {
        let offset: usize = self.ranks[..mode].iter().sum::<usize>() + entry;
        self.lambdas.iter().map(|row| row[offset]).collect()
    }

    /// Posterior mean of `sigma` from the saved trace.
    pub fn mean_sigma(&self) -> f64 {
        self.sigma_sq.iter().map(|v| v.sqrt()).sum::<f64>() / self.sigma_sq.len().max(1) as f64
    }
}

/// Runs the Gibbs sampler on a fully observed array and returns thinned
/// traces plus the posterior-mean array.
pub fn run_chain(
    y: &DenseTensor,
    ranks: &[usize],
    prior: &PriorSpec,
    config: &ChainConfig,
) -> Result<McmcSamples> {
    config.validate()?;
    if !y.is_fully_observed() {
        return Err(Error::MissingEntries(
            "the normal sampler requires a fully observed array".into(),
        ));
    }
    if y.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("data array".into()));
    }
    if ranks == y.dims() && prior.sigma_prior == SigmaPrior::ImproperReciprocal {
        return Err(Error::ImproperFullRankFit);
    }
    let mut state = ChainState::init(y, ranks, prior, RngStream::new(config.seed))?;
    run_chain_from(y, &mut state, prior, config, true)
}

/// Drives an initialized state through the schedule; shared by the
/// normal and scale-free samplers.
pub(crate) fn run_chain_from(
    y: &DenseTensor,
    state: &mut ChainState,
    prior: &PriorSpec,
    config: &ChainConfig,
    update_sigma: bool,
) -> Result<McmcSamples> {
    let order = state.factors.len();
    let track_lambdas = prior.family == PriorFamily::Heteroscedastic;
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
        let accepted = parameter_sweep(y, state, prior, config.vmf_sweeps, update_sigma)?;
        for (c, &a) in accept_counts.iter_mut().zip(&accepted) {
            if a {
                *c += 1;
            }
        }
        if iter > config.burn_in && (iter - config.burn_in) % config.thin == 0 {
            samples.sigma_sq.push(state.sigma_sq);
            samples.tau_sq.push(state.tau_sq);
            if track_lambdas {
                let row: Vec<f64> = state.lambdas.iter().flatten().cloned().collect();
                samples.lambdas.push(row);
            }
            let m = state.mean_array()?;
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
