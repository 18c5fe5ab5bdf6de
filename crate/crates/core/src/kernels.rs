//! Seeded sampling primitives for the Gibbs samplers.
//!
//! Everything here draws from an [`RngStream`] and is bit-reproducible
//! given the seed and call sequence. The module provides only the
//! kernels the samplers need: uniform Stiefel draws, the matrix
//! von Mises-Fisher distribution, truncated normals, inverse gammas and
//! Dirichlet random-walk proposals on the simplex.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Beta, Distribution, Exp1, Gamma};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::orthonormal_complement;

/// Internal Gibbs sweeps per matrix von Mises-Fisher draw.
pub const DEFAULT_VMF_SWEEPS: usize = 5;

/// Standardized distance beyond which truncated-normal sampling switches
/// from inverse-CDF to tail rejection.
const TAIL_SWITCH: f64 = 5.0;

/// Uniform draw from the Stiefel manifold of `n x r` matrices with
/// orthonormal columns: a standard normal matrix is filled column by
/// column and orthonormalized by QR with the R diagonal forced positive.
pub fn sample_stiefel_uniform(n: usize, r: usize, rng: &mut RngStream) -> Result<DMatrix<f64>> {
    if r > n || r == 0 {
        return Err(Error::InvalidArgument(format!(
            "Stiefel draw requires 0 < r <= n, got n={} r={}",
            n, r
        )));
    }
    let data: Vec<f64> = (0..n * r).map(|_| rng.standard_normal()).collect();
    let g = DMatrix::from_vec(n, r, data);
    let qr = g.qr();
    let rm = qr.r();
    let mut q = qr.q();
    for j in 0..r {
        if rm[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// Draw from the vector von Mises-Fisher distribution on the unit sphere
/// with natural parameter `eta` (density proportional to `exp(eta^T u)`).
/// `eta = 0` gives the uniform distribution on the sphere.
pub fn sample_vmf_vector(eta: &DVector<f64>, rng: &mut RngStream) -> Result<DVector<f64>> {
    if eta.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("vMF natural parameter".into()));
    }
    let m = eta.len();
    if m == 0 {
        return Err(Error::InvalidArgument("empty vMF parameter".into()));
    }
    if m == 1 {
        // two-point sphere: P(+1) = 1 / (1 + exp(-2 eta))
        let p = 1.0 / (1.0 + (-2.0 * eta[0]).exp());
        let v = if rng.uniform() < p { 1.0 } else { -1.0 };
        return Ok(DVector::from_element(1, v));
    }
    let kappa = eta.norm();
    if kappa < 1e-14 {
        return Ok(uniform_sphere(m, rng));
    }
    let mu = eta / kappa;
    let w = sample_wood_cosine(kappa, m, rng);
    // tangent direction: normal draw projected off mu, normalized
    let v = loop {
        let g = DVector::from_fn(m, |_, _| rng.standard_normal());
        let proj = &g - &mu * mu.dot(&g);
        let nrm = proj.norm();
        if nrm > 1e-12 {
            break proj / nrm;
        }
    };
    Ok(&mu * w + v * (1.0 - w * w).max(0.0).sqrt())
}

fn uniform_sphere(m: usize, rng: &mut RngStream) -> DVector<f64> {
    loop {
        let g = DVector::from_fn(m, |_, _| rng.standard_normal());
        let nrm = g.norm();
        if nrm > 1e-12 {
            return g / nrm;
        }
    }
}

/// Wood's rejection sampler for the cosine `w` of the angle to the mean
/// direction, with density proportional to
/// `(1 - w^2)^((m-3)/2) exp(kappa w)` on (-1, 1).
fn sample_wood_cosine(kappa: f64, m: usize, rng: &mut RngStream) -> f64 {
    let d = (m - 1) as f64;
    let b = d / (2.0 * kappa + (4.0 * kappa * kappa + d * d).sqrt());
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + d * (1.0 - x0 * x0).ln();
    let beta = Beta::new(d / 2.0, d / 2.0).expect("valid Beta parameters");
    loop {
        let z: f64 = beta.sample(rng);
        let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        let base = 1.0 - x0 * w;
        if base <= 0.0 {
            continue;
        }
        let u: f64 = rng.uniform();
        if kappa * w + d * base.ln() - c >= u.ln() {
            return w.clamp(-1.0, 1.0);
        }
    }
}

/// Draw from the matrix von Mises-Fisher distribution on the Stiefel
/// manifold, density proportional to `etr(U^T H)`, starting the internal
/// column Gibbs scan from a uniform draw.
///
/// `H = 0` delegates to [`sample_stiefel_uniform`] (the density is
/// constant). Single-column `H` is drawn exactly.
pub fn sample_vmf_matrix(h: &DMatrix<f64>, rng: &mut RngStream) -> Result<DMatrix<f64>> {
    if h.ncols() > 1 && h.amax() > 0.0 {
        let init = sample_stiefel_uniform(h.nrows(), h.ncols(), rng)?;
        sample_vmf_matrix_from(h, &init, DEFAULT_VMF_SWEEPS, rng)
    } else {
        sample_vmf_matrix_from(h, &DMatrix::zeros(0, 0), DEFAULT_VMF_SWEEPS, rng)
    }
}

/// Matrix von Mises-Fisher draw via column-wise Gibbs started at `init`
/// (the current value of the chain being updated), running `sweeps` full
/// passes. Each column is drawn exactly from a vector von Mises-Fisher
/// distribution on the unit sphere of the orthogonal complement of the
/// remaining columns.
pub fn sample_vmf_matrix_from(
    h: &DMatrix<f64>,
    init: &DMatrix<f64>,
    sweeps: usize,
    rng: &mut RngStream,
) -> Result<DMatrix<f64>> {
    let (n, r) = h.shape();
    if r > n || r == 0 || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "vMF parameter must be n x r with 0 < r <= n, got {}x{}",
            n, r
        )));
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("vMF matrix parameter".into()));
    }
    if h.amax() == 0.0 {
        // constant density over the manifold
        return sample_stiefel_uniform(n, r, rng);
    }
    if r == 1 {
        let u = sample_vmf_vector(&h.column(0).clone_owned(), rng)?;
        return Ok(DMatrix::from_column_slice(n, 1, u.as_slice()));
    }
    if init.shape() != (n, r) {
        return Err(Error::ShapeMismatch(format!(
            "vMF Gibbs start must be {}x{}, got {}x{}",
            n,
            r,
            init.nrows(),
            init.ncols()
        )));
    }

    // Rotate so the potential has orthogonal columns: with H = P D V^T,
    // the chain runs in Y = X V against the potential P D, and maps back
    // through V^T at the end.
    let svd = h.clone().svd(true, true);
    let p = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut htil = p;
    for (j, mut col) in htil.column_iter_mut().enumerate() {
        col *= svd.singular_values[j];
    }
    let mut y = init * vt.transpose();

    let mut others = DMatrix::zeros(n, r - 1);
    for _ in 0..sweeps {
        for j in 0..r {
            let mut c = 0;
            for jj in 0..r {
                if jj != j {
                    others.set_column(c, &y.column(jj));
                    c += 1;
                }
            }
            let basis = orthonormal_complement(&others);
            let eta = basis.transpose() * htil.column(j);
            let z = sample_vmf_vector(&eta, rng)?;
            y.set_column(j, &(&basis * z));
        }
    }
    Ok(y * vt)
}

/// Draw from N(mean, 1) conditioned to the open interval (lower, upper);
/// either bound may be infinite. Moderate regions use the inverse CDF;
/// intervals lying more than 5 standard deviations into a tail use
/// exponential tail rejection.
pub fn sample_truncated_normal(
    mean: f64,
    lower: f64,
    upper: f64,
    rng: &mut RngStream,
) -> Result<f64> {
    if !(lower < upper) {
        return Err(Error::InvalidArgument(format!(
            "truncation bounds must satisfy lower < upper, got ({}, {})",
            lower, upper
        )));
    }
    let a = lower - mean;
    let b = upper - mean;
    if a == f64::NEG_INFINITY && b == f64::INFINITY {
        return Ok(mean + rng.standard_normal());
    }
    let x = if a >= TAIL_SWITCH {
        sample_upper_tail(a, b, rng)
    } else if b <= -TAIL_SWITCH {
        -sample_upper_tail(-b, -a, rng)
    } else {
        let std = Normal::new(0.0, 1.0).expect("unit normal");
        let pa = if a == f64::NEG_INFINITY { 0.0 } else { std.cdf(a) };
        let pb = if b == f64::INFINITY { 1.0 } else { std.cdf(b) };
        if pb - pa <= 0.0 {
            // interval narrower than CDF resolution
            0.5 * (a + b)
        } else {
            let u = pa + (pb - pa) * rng.uniform();
            std.inverse_cdf(u)
        }
    };
    let mut x = x;
    if a.is_finite() && x <= a {
        x = a.next_up();
    }
    if b.is_finite() && x >= b {
        x = b.next_down();
    }
    Ok(mean + x)
}

/// Exponential rejection for the standard normal restricted to (a, b)
/// with `a` deep in the upper tail; `b` may be infinite.
fn sample_upper_tail(a: f64, b: f64, rng: &mut RngStream) -> f64 {
    let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let e: f64 = Exp1.sample(rng);
        let x = a + e / alpha;
        if x >= b {
            continue;
        }
        let rho = (-(x - alpha) * (x - alpha) / 2.0).exp();
        if rng.uniform() <= rho {
            return x;
        }
    }
}

/// Inverse-gamma draw with rate parameterization: the reciprocal is
/// gamma(shape, rate) with mean shape/rate.
pub fn sample_inverse_gamma(shape: f64, rate: f64, rng: &mut RngStream) -> Result<f64> {
    if !(shape > 0.0) || !(rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "inverse-gamma parameters must be positive and finite, got shape={} rate={}",
            shape, rate
        )));
    }
    let gamma = Gamma::new(shape, 1.0 / rate).expect("validated parameters");
    loop {
        let g: f64 = gamma.sample(rng);
        if g > 0.0 && g.is_finite() {
            return Ok(1.0 / g);
        }
    }
}

/// Dirichlet random-walk proposal on the simplex: the proposal is
/// Dirichlet(concentration * current + 1/2), and both transition
/// log-densities are returned for the Metropolis-Hastings correction.
pub fn sample_simplex_proposal(
    current: &[f64],
    concentration: f64,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, f64, f64)> {
    let r = current.len();
    if r == 0 {
        return Err(Error::InvalidArgument("empty simplex vector".into()));
    }
    if current.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(
            "simplex entries must be strictly positive".into(),
        ));
    }
    let sum: f64 = current.iter().sum();
    if (sum - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!(
            "simplex vector sums to {}, expected 1",
            sum
        )));
    }
    if !(concentration > 0.0) {
        return Err(Error::InvalidArgument(
            "proposal concentration must be positive".into(),
        ));
    }
    if r == 1 {
        return Ok((vec![1.0], 0.0, 0.0));
    }
    let alpha_fwd: Vec<f64> = current.iter().map(|&v| concentration * v + 0.5).collect();
    let mut proposal = vec![0.0f64; r];
    let mut total = 0.0;
    for (p, &a) in proposal.iter_mut().zip(&alpha_fwd) {
        let g = Gamma::new(a, 1.0).expect("positive shape");
        let mut draw: f64 = g.sample(rng);
        while draw <= 0.0 || !draw.is_finite() {
            draw = g.sample(rng);
        }
        *p = draw;
        total += draw;
    }
    for p in proposal.iter_mut() {
        *p /= total;
    }
    let alpha_rev: Vec<f64> = proposal.iter().map(|&v| concentration * v + 0.5).collect();
    let log_forward = dirichlet_log_pdf(&proposal, &alpha_fwd);
    let log_reverse = dirichlet_log_pdf(current, &alpha_rev);
    Ok((proposal, log_forward, log_reverse))
}

fn dirichlet_log_pdf(x: &[f64], alpha: &[f64]) -> f64 {
    let alpha_sum: f64 = alpha.iter().sum();
    let mut lp = ln_gamma(alpha_sum);
    for (&xi, &ai) in x.iter().zip(alpha) {
        lp += (ai - 1.0) * xi.ln() - ln_gamma(ai);
    }
    lp
}
