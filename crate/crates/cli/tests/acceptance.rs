//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with its measured numbers (run with `--nocapture` to see
//! them). The two desk-scale simulation tables are computed once and
//! shared; a lock keeps the heavy computations from competing for the
//! thread pool so their runtimes stay meaningful.
//!
//! The full-scale study (hours) is behind `--ignored`.

use std::collections::BTreeMap;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use tuckermc::diagnostics::relative_squared_error;
use tuckermc::experiments::{
    desk_chain_config, desk_conditions, eigen_difference_curves, equivariance_check,
    equivariance_identity_deviation, ordinal_benchmark, paper_chain_config, paper_conditions,
    run_table, Estimator, SkewProfile, TableOptions, TableReport,
};
use tuckermc::kernels::{sample_truncated_normal, sample_vmf_matrix};
use tuckermc::normal_tdm::{
    lambda_log_likelihood, sigma_posterior, update_lambdas, ChainConfig, ChainState, PriorSpec,
};
use tuckermc::sftd::run_sftd_chain;
use tuckermc::tensor::{matricize, mode_multiply, refold, tucker_product, DenseTensor};
use tuckermc::RngStream;

/// Root seed of the whole acceptance suite.
const SEED: u64 = 2026;

const ALL_ESTIMATORS: [Estimator; 3] = [Estimator::Als, Estimator::Hom, Estimator::Het];

static HEAVY: Mutex<()> = Mutex::new(());
static DESK_CORRECT: OnceLock<(TableReport, f64)> = OnceLock::new();
static DESK_MISSPEC: OnceLock<(TableReport, f64)> = OnceLock::new();

fn desk_correct() -> &'static (TableReport, f64) {
    DESK_CORRECT.get_or_init(|| {
        let _guard = HEAVY.lock().unwrap();
        let opts = TableOptions {
            chain: desk_chain_config(),
            ..TableOptions::default()
        };
        let start = Instant::now();
        let report = run_table(&desk_conditions(false, SEED), &ALL_ESTIMATORS, &opts)
            .expect("correct-rank desk table");
        (report, start.elapsed().as_secs_f64())
    })
}

fn desk_misspec() -> &'static (TableReport, f64) {
    DESK_MISSPEC.get_or_init(|| {
        let _guard = HEAVY.lock().unwrap();
        let opts = TableOptions {
            chain: desk_chain_config(),
            keep_fits: true,
            ..TableOptions::default()
        };
        let start = Instant::now();
        let report = run_table(&desk_conditions(true, SEED), &ALL_ESTIMATORS, &opts)
            .expect("misspecified desk table");
        (report, start.elapsed().as_secs_f64())
    })
}

fn print_table(report: &TableReport) {
    for (c, cond) in report.conditions.iter().enumerate() {
        println!(
            "    {}: ALS={:.3} HOM={:.3} HET={:.3}",
            cond.label(),
            report.cell(Estimator::Als, c),
            report.cell(Estimator::Hom, c),
            report.cell(Estimator::Het, c)
        );
    }
}

#[test]
fn criterion_1_table1_desk_gate() {
    let (report, secs) = desk_correct();
    print_table(report);
    for (c, cond) in report.conditions.iter().enumerate() {
        let als = report.cell(Estimator::Als, c);
        let hom = report.cell(Estimator::Hom, c);
        let het = report.cell(Estimator::Het, c);
        assert!(
            hom <= als,
            "{}: RSE(HOM)={} exceeds RSE(ALS)={}",
            cond.label(),
            hom,
            als
        );
        assert!(
            (hom - het).abs() <= 0.02,
            "{}: |RSE(HOM) - RSE(HET)| = {} exceeds 0.02",
            cond.label(),
            (hom - het).abs()
        );
    }
    assert!(
        *secs <= 1200.0,
        "desk table took {:.0}s, budget is 20 minutes",
        secs
    );
    println!(
        "criterion 1 (correct-rank estimator table, desk scale): PASS \
         (RSE(HOM) <= RSE(ALS) and |HOM - HET| <= 0.02 in all 4 cells; {:.0}s)",
        secs
    );
}

#[test]
fn criterion_2_table2_desk_gate() {
    let (missp, _) = desk_misspec();
    let (correct, _) = desk_correct();
    print_table(missp);
    // the reference pattern cell: low rank, low signal, fitted at twice
    // the true rank
    let c = 0;
    assert_eq!(missp.conditions[c].r0, vec![6, 5, 4]);
    assert_eq!(missp.conditions[c].psi, 1000.0);
    assert_eq!(missp.conditions[c].fitted_r, vec![12, 10, 8]);
    let als = missp.cell(Estimator::Als, c);
    let hom = missp.cell(Estimator::Hom, c);
    let het = missp.cell(Estimator::Het, c);
    let het_correct = correct.cell(Estimator::Het, c);
    assert!(
        (het - het_correct).abs() <= 0.03,
        "RSE(HET) misspecified {} drifts more than 0.03 from its correctly-specified value {}",
        het,
        het_correct
    );
    assert!(
        hom >= 1.3 * het,
        "RSE(HOM)={} is not at least 1.3x RSE(HET)={}",
        hom,
        het
    );
    assert!(
        als >= 2.0 * hom,
        "RSE(ALS)={} is not at least 2x RSE(HOM)={}",
        als,
        hom
    );
    // the same robustness holds on the other low-rank cell
    let c2 = 1;
    let het2 = missp.cell(Estimator::Het, c2);
    assert!((het2 - correct.cell(Estimator::Het, c2)).abs() <= 0.03);
    assert!(missp.cell(Estimator::Hom, c2) >= 1.3 * het2);
    println!(
        "criterion 2 (misspecified-rank table, desk scale): PASS \
         (pattern cell: HET {:.3} vs correct {:.3}, HOM/HET {:.2}, ALS/HOM {:.2})",
        het,
        het_correct,
        hom / het,
        als / hom
    );
}

#[test]
fn criterion_3_eigenvalue_difference_curves() {
    let (missp, _) = desk_misspec();
    let fits = missp.fits.as_ref().expect("fits kept");
    let truths = missp.truths.as_ref().expect("truths kept");
    let hom_idx = 1;
    let het_idx = 2;
    assert_eq!(missp.estimators[hom_idx], Estimator::Hom);
    assert_eq!(missp.estimators[het_idx], Estimator::Het);
    let mut ratios = Vec::new();
    for (c, cond) in missp.conditions.iter().enumerate() {
        let zero_from = cond.r0[0]; // positions beyond the true mode-1 rank
        let mean_abs = |eidx: usize| -> f64 {
            let curves = eigen_difference_curves(&fits[eidx][c], &truths[c], 0).unwrap();
            let mut total = 0.0;
            let mut count = 0usize;
            for curve in &curves {
                for &d in &curve[zero_from..] {
                    total += d.abs();
                    count += 1;
                }
            }
            total / count as f64
        };
        let hom = mean_abs(hom_idx);
        let het = mean_abs(het_idx);
        println!(
            "    {}: mean |diff| over true-zero positions HOM={:.5} HET={:.5} ratio={:.1}",
            cond.label(),
            hom,
            het,
            hom / het
        );
        assert!(
            hom >= 3.0 * het,
            "{}: HET not 3x closer on zero eigenvalues (HOM {} vs HET {})",
            cond.label(),
            hom,
            het
        );
        ratios.push(hom / het);
    }
    println!(
        "criterion 3 (zero-eigenvalue recovery under misspecified rank): PASS \
         (HOM/HET mean-absolute-difference ratios {:?} all >= 3)",
        ratios.iter().map(|r| (r * 10.0).round() / 10.0).collect::<Vec<_>>()
    );
}

#[test]
fn criterion_4_equivariance() {
    let chain = ChainConfig {
        iterations: 20_000,
        burn_in: 2000,
        thin: 10,
        ..ChainConfig::default()
    };
    let report = equivariance_check(&[6, 5, 4], &[2, 2, 2], 3.0, 200.0, SEED, &chain, 4).unwrap();
    assert!(
        report.deviation_ratio <= 3.0,
        "posterior-mean deviation ratio {} exceeds 3 combined MC standard errors",
        report.deviation_ratio
    );
    assert!(
        report.sigma_scale_z <= 3.0,
        "scale read-back z = {} exceeds 3",
        report.sigma_scale_z
    );
    let identity = equivariance_identity_deviation(&[6, 5, 4], &[2, 2, 2], SEED, &chain).unwrap();
    assert_eq!(identity, 0.0, "identity transformation with matched seeds must be exact");
    println!(
        "criterion 4 (posterior equivariance under y -> aWy): PASS \
         (deviation ratio {:.2} <= 3, scale z {:.2} <= 3, identity case exactly 0)",
        report.deviation_ratio, report.sigma_scale_z
    );
}

#[test]
fn criterion_5_scale_freeness_bit_exact() {
    use std::process::Command;
    let tmp = tempfile::TempDir::new().unwrap();
    // discrete relational-style data with a masked diagonal
    let dims = [8usize, 8, 4];
    let mut rng = RngStream::new(SEED ^ 0x5f7d);
    let n: usize = dims.iter().product();
    let mut values = vec![0.0f64; n];
    let mut mask = vec![true; n];
    let t0 = DenseTensor::zeros(dims.to_vec()).unwrap();
    for lin in 0..n {
        let idx = t0.multi_index(lin);
        if idx[0] == idx[1] {
            mask[lin] = false;
            values[lin] = f64::NAN;
        } else {
            values[lin] = (rng.uniform() * 5.0).floor().min(4.0);
        }
    }
    let y = DenseTensor::with_mask(dims.to_vec(), values.clone(), mask.clone()).unwrap();
    // per-slice strictly increasing transforms, different per slice
    let mut tv = values;
    for lin in 0..n {
        if mask[lin] {
            let j = t0.multi_index(lin)[2] as f64;
            tv[lin] = (j + 2.0) * (tv[lin] * 0.7).exp() + j;
        }
    }
    let yt = DenseTensor::with_mask(dims.to_vec(), tv, mask).unwrap();

    let y_path = tmp.path().join("y.csv");
    let yt_path = tmp.path().join("yt.csv");
    tuckermc_cli::ingest::write_long_csv(&y, &y_path).unwrap();
    tuckermc_cli::ingest::write_long_csv(&yt, &yt_path).unwrap();

    let run = |data: &std::path::Path, out: &std::path::Path| {
        let status = Command::new(env!("CARGO_BIN_EXE_tuckermc"))
            .args([
                "fit-sftd",
                "--data",
                data.to_str().unwrap(),
                "--dims",
                "8,8,4",
                "--ranks",
                "2,2,2",
                "--iterations",
                "3000",
                "--burn-in",
                "500",
                "--thin",
                "5",
                "--seed",
                "11",
                "--output-dir",
                out.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
    };
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    run(&y_path, &out_a);
    run(&yt_path, &out_b);
    for f in ["traces.csv", "mhat.csv"] {
        let a = std::fs::read(out_a.join(f)).unwrap();
        let b = std::fs::read(out_b.join(f)).unwrap();
        assert_eq!(
            a, b,
            "{} differs between the raw and monotone-transformed runs",
            f
        );
    }
    println!(
        "criterion 5 (scale-freeness): PASS (trace files and posterior-mean arrays \
         byte-identical under per-slice monotone transforms with matched seeds)"
    );
}

#[test]
fn criterion_6_ordinal_benchmark() {
    let chain = ChainConfig {
        iterations: 6000,
        burn_in: 1000,
        thin: 10,
        ..ChainConfig::default()
    };
    let report = ordinal_benchmark(&[20, 20, 10], &[4, 4, 2], SkewProfile::Heavy, SEED, &chain)
        .unwrap();
    let total = report.tau_sftd.len();
    let wins = report
        .tau_sftd
        .iter()
        .zip(&report.tau_als)
        .filter(|(s, a)| s >= a)
        .count();
    println!(
        "    heavy skew per-slice tau (SFTD vs ALS): {:?}",
        report
            .tau_sftd
            .iter()
            .zip(&report.tau_als)
            .map(|(s, a)| format!("{:.2}/{:.2}", s, a))
            .collect::<Vec<_>>()
    );
    assert!(
        wins as f64 >= 0.9 * total as f64,
        "scale-free fit wins only {}/{} slices under heavy skew",
        wins,
        total
    );
    // continuous, untransformed data: the two estimators agree closely
    let identity =
        ordinal_benchmark(&[20, 20, 10], &[4, 4, 2], SkewProfile::Identity, SEED, &chain).unwrap();
    for (k, (s, a)) in identity
        .tau_sftd
        .iter()
        .zip(&identity.tau_als)
        .enumerate()
    {
        assert!(
            (s - a).abs() < 0.05,
            "slice {}: continuous-case tau gap {} >= 0.05",
            k,
            (s - a).abs()
        );
    }
    println!(
        "criterion 6 (ordinal relational benchmark): PASS \
         (SFTD rank association >= ALS on {}/{} slices under heavy skew; \
         continuous case agrees within 0.05 per slice)",
        wins, total
    );
}

/// Simpson quadrature on [a, b].
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut total = f(a) + f(b);
    for i in 1..n {
        total += if i % 2 == 0 { 2.0 } else { 4.0 } * f(a + i as f64 * h);
    }
    total * h / 3.0
}

fn ks_vmf_circle() -> (f64, f64) {
    // matrix vMF on the circle reduces to the von Mises distribution
    let kappa = 2.0;
    let n = 100_000usize;
    let mut rng = RngStream::new(SEED ^ 0xc1cc);
    let h = DMatrix::from_column_slice(2, 1, &[kappa, 0.0]);
    let mut angles: Vec<f64> = (0..n)
        .map(|_| {
            let u = sample_vmf_matrix(&h, &mut rng).unwrap();
            u[(1, 0)].atan2(u[(0, 0)])
        })
        .collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // numerically integrated von Mises CDF on a fine grid
    let grid_n = 40_000usize;
    let lo = -std::f64::consts::PI;
    let step = 2.0 * std::f64::consts::PI / grid_n as f64;
    let density = |t: f64| (kappa * t.cos()).exp();
    let mut cdf = Vec::with_capacity(grid_n + 1);
    let mut acc = 0.0;
    cdf.push(0.0);
    for i in 0..grid_n {
        let a = lo + i as f64 * step;
        acc += simpson(density, a, a + step, 4);
        cdf.push(acc);
    }
    let total = acc;
    let eval_cdf = |t: f64| -> f64 {
        let pos = ((t - lo) / step).clamp(0.0, grid_n as f64);
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        let lo_v = cdf[i.min(grid_n)];
        let hi_v = cdf[(i + 1).min(grid_n)];
        (lo_v + frac * (hi_v - lo_v)) / total
    };
    let mut d: f64 = 0.0;
    for (i, &t) in angles.iter().enumerate() {
        let f = eval_cdf(t);
        d = d.max((f - i as f64 / n as f64).abs());
        d = d.max(((i + 1) as f64 / n as f64 - f).abs());
    }
    // asymptotic Kolmogorov critical value at alpha = 0.01
    (d, 1.6276 / (n as f64).sqrt())
}

fn truncated_normal_moments_check() {
    let mut rng = RngStream::new(SEED ^ 0x7bc);
    let configs = [
        (0.3, f64::NEG_INFINITY, f64::INFINITY),
        (0.0, 0.0, f64::INFINITY),
        (1.0, f64::NEG_INFINITY, -1.0),
        (0.0, 1.5, 2.5),
        (-0.3, -0.5, 0.3),
        (0.0, 6.0, f64::INFINITY),
    ];
    for &(mu, lo, hi) in &configs {
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_truncated_normal(mu, lo, hi, &mut rng).unwrap())
            .collect();
        assert!(draws.iter().all(|&x| x > lo && x < hi));
        // stable evaluation of the analytic truncated moments
        let a = lo.max(mu - 12.0);
        let b = hi.min(mu + 12.0);
        let f = |x: f64| (-(x - mu) * (x - mu) / 2.0).exp();
        let m0 = simpson(f, a, b, 100_000);
        let m_target = simpson(|x| x * f(x), a, b, 100_000) / m0;
        let v_target = simpson(|x| (x - m_target) * (x - m_target) * f(x), a, b, 100_000) / m0;
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
        let se_mean = (var / n as f64).sqrt();
        let sq: Vec<f64> = draws.iter().map(|x| (x - mean) * (x - mean)).collect();
        let sq_mean = sq.iter().sum::<f64>() / n as f64;
        let se_var = (sq.iter().map(|x| (x - sq_mean) * (x - sq_mean)).sum::<f64>()
            / (n as f64 - 1.0)
            / n as f64)
            .sqrt();
        assert!(
            (mean - m_target).abs() <= 4.0 * se_mean,
            "({},{},{}): mean {} vs {}",
            mu,
            lo,
            hi,
            mean,
            m_target
        );
        assert!(
            (var - v_target).abs() <= 4.0 * se_var + 1e-9,
            "({},{},{}): var {} vs {}",
            mu,
            lo,
            hi,
            var,
            v_target
        );
    }
}

fn woodbury_identity_check() -> f64 {
    // quadratic form through the diagonal identity vs dense inversion
    let dims = [3usize, 2];
    let ranks = [2usize, 2];
    let mut rng = RngStream::new(SEED ^ 0x3d);
    let n: usize = dims.iter().product();
    let y = DenseTensor::new(
        dims.to_vec(),
        (0..n).map(|_| rng.standard_normal()).collect(),
    )
    .unwrap();
    let factors: Vec<_> = dims
        .iter()
        .zip(&ranks)
        .map(|(&nk, &rk)| tuckermc::kernels::sample_stiefel_uniform(nk, rk, &mut rng).unwrap())
        .collect();
    let lambdas: Vec<Vec<f64>> = vec![vec![0.7, 0.3], vec![0.45, 0.55]];
    let state = ChainState {
        sigma_sq: 0.9,
        tau_sq: 1.7,
        lambdas: lambdas.clone(),
        core: DenseTensor::zeros(ranks.to_vec()).unwrap(),
        factors: factors.clone(),
        rng: RngStream::new(1),
    };
    let prior = PriorSpec::heteroscedastic(&dims);
    let (_, rate) = sigma_posterior(&y, &state, &prior).unwrap();
    let q = 2.0 * rate;

    // dense oracle
    let mut u = DMatrix::identity(1, 1);
    for f in &factors {
        u = f.kronecker(&u);
    }
    let mut psi = Vec::new();
    for &l2 in &lambdas[1] {
        for &l1 in &lambdas[0] {
            psi.push(1.7 * l1 * l2);
        }
    }
    let c = &u * DMatrix::from_diagonal(&DVector::from_vec(psi)) * u.transpose()
        + DMatrix::identity(n, n);
    let yv = DVector::from_vec(y.values().to_vec());
    let oracle = (yv.transpose() * c.try_inverse().unwrap() * &yv)[(0, 0)];
    ((q - oracle) / oracle).abs()
}

fn tensor_identity_checks() -> (f64, f64) {
    let mut rng = RngStream::new(SEED ^ 0x9e);
    let core = DenseTensor::new(
        vec![2, 2, 2],
        (0..8).map(|_| rng.standard_normal()).collect(),
    )
    .unwrap();
    let factors: Vec<DMatrix<f64>> = (0..3)
        .map(|_| DMatrix::from_fn(4, 2, |_, _| rng.standard_normal()))
        .collect();
    let prod = tucker_product(&core, &factors).unwrap();

    // vec identity against the reverse-ordered Kronecker matrix
    let mut big = DMatrix::identity(1, 1);
    for f in &factors {
        big = f.kronecker(&big);
    }
    let vec_core = DVector::from_vec(core.values().to_vec());
    let oracle = big * vec_core;
    let scale = oracle.amax();
    let kron_err = prod
        .values()
        .iter()
        .zip(oracle.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max)
        / scale;

    // matricized identity for every mode
    let mut mat_err = 0.0f64;
    for k in 0..3 {
        let others: Vec<DMatrix<f64>> = (0..3)
            .filter(|&j| j != k)
            .map(|j| factors[j].clone())
            .collect();
        let mut rev = DMatrix::identity(1, 1);
        for f in &others {
            rev = f.kronecker(&rev);
        }
        let lhs = matricize(&prod, k).unwrap();
        let rhs = &factors[k] * matricize(&core, k).unwrap() * rev.transpose();
        mat_err = mat_err.max((lhs - rhs).amax() / scale);
    }
    // round trip is exact
    for k in 0..3 {
        let m = matricize(&prod, k).unwrap();
        let back = refold(&m, k, prod.dims()).unwrap();
        assert_eq!(back.values(), prod.values());
    }
    (kron_err, mat_err)
}

fn lambda_mh_wasserstein() -> f64 {
    // toy conditional posterior of the mode-1 weights with r = (2, 1):
    // lambda_11 has a one-dimensional grid posterior
    let s = [1.0f64, 0.6];
    let tau_sq = 1.5f64;
    let prior = PriorSpec::heteroscedastic(&[6, 4]);
    let mut state = ChainState {
        sigma_sq: 1.0,
        tau_sq,
        lambdas: vec![vec![0.5, 0.5], vec![1.0]],
        core: DenseTensor::new(vec![2, 1], s.to_vec()).unwrap(),
        factors: vec![DMatrix::identity(6, 2), DMatrix::identity(4, 1)],
        rng: RngStream::new(SEED ^ 0x11a),
    };
    let draws: Vec<f64> = (0..200_000)
        .map(|_| {
            update_lambdas(&mut state, &prior).unwrap();
            state.lambdas[0][0]
        })
        .collect();
    // sanity: the grouped update agrees with the direct log-density
    let base = lambda_log_likelihood(&state, 0, &[0.6, 0.4])
        - lambda_log_likelihood(&state, 0, &[0.3, 0.7]);
    assert!(base.is_finite());

    // grid posterior of lambda over (0, 1)
    let grid_n = 8000usize;
    let log_post = |l: f64| -> f64 {
        -0.5 * ((tau_sq * l).ln() + (tau_sq * (1.0 - l)).ln())
            - 0.5 * (s[0] * s[0] / (tau_sq * l) + s[1] * s[1] / (tau_sq * (1.0 - l)))
    };
    let mut grid_cdf = Vec::with_capacity(grid_n);
    let mut acc = 0.0;
    let max_lp = (1..grid_n)
        .map(|i| log_post(i as f64 / grid_n as f64))
        .fold(f64::NEG_INFINITY, f64::max);
    for i in 1..=grid_n {
        let l = (i as f64 - 0.5) / grid_n as f64;
        acc += (log_post(l) - max_lp).exp();
        grid_cdf.push(acc);
    }
    let total = acc;

    // Wasserstein-1 distance between the empirical and grid laws
    let mut sorted = draws;
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let nd = sorted.len() as f64;
    let mut w1 = 0.0;
    for i in 0..grid_n {
        let x = (i as f64 + 0.5) / grid_n as f64;
        let f_grid = grid_cdf[i] / total;
        let f_emp = sorted.partition_point(|&v| v <= x) as f64 / nd;
        w1 += (f_grid - f_emp).abs() / grid_n as f64;
    }
    w1
}

#[test]
fn criterion_7_sampler_unit_suites() {
    let (d, crit) = ks_vmf_circle();
    assert!(
        d < crit,
        "vMF circle KS statistic {} exceeds the alpha=0.01 critical value {}",
        d,
        crit
    );
    truncated_normal_moments_check();
    let wb = woodbury_identity_check();
    assert!(wb < 1e-10, "quadratic-form identity off by {}", wb);
    let (kron_err, mat_err) = tensor_identity_checks();
    assert!(kron_err < 1e-10, "Kronecker identity off by {}", kron_err);
    assert!(mat_err < 1e-10, "matricized identity off by {}", mat_err);
    let w1 = lambda_mh_wasserstein();
    assert!(
        w1 <= 0.02,
        "eigenvalue-weight MH chain is {} away from the grid posterior (Wasserstein)",
        w1
    );
    println!(
        "criterion 7 (sampler unit suites): PASS (KS {:.4} < {:.4}; truncated moments within \
         4 SE; quadratic identity {:.1e}; tensor identities {:.1e}/{:.1e}; MH Wasserstein {:.4})",
        d, crit, wb, kron_err, mat_err, w1
    );
}

#[test]
fn criterion_8_moment_invariants() {
    let dims = [4usize, 3, 3];
    let ranks = [2usize, 2, 2];
    let sigma = 1.3f64;
    let tau_sq = 2.0f64;
    let mut rng = RngStream::new(SEED ^ 0x8a1);
    let factors: Vec<DMatrix<f64>> = dims
        .iter()
        .zip(&ranks)
        .map(|(&n, &r)| tuckermc::kernels::sample_stiefel_uniform(n, r, &mut rng).unwrap())
        .collect();
    let lambdas: Vec<Vec<f64>> = vec![vec![0.65, 0.35], vec![0.5, 0.5], vec![0.8, 0.2]];
    // diagonal of the separable weight matrix in vectorization order
    let mut lam_diag = vec![1.0f64];
    for lk in &lambdas {
        let len = lam_diag.len();
        let mut next = vec![0.0; len * lk.len()];
        for (ik, &l) in lk.iter().enumerate() {
            for (j, &d) in lam_diag.iter().enumerate() {
                next[j + len * ik] = d * l;
            }
        }
        lam_diag = next;
    }

    let n1 = dims[0];
    let rest: usize = dims[1] * dims[2];
    let sims = 20_000usize;
    let mut y_acc = vec![Vec::with_capacity(sims); n1 * n1];
    let mut m_acc = vec![Vec::with_capacity(sims); n1 * n1];
    for _ in 0..sims {
        let s: Vec<f64> = lam_diag
            .iter()
            .map(|&d| (tau_sq * d).sqrt() * rng.standard_normal())
            .collect();
        let core = DenseTensor::new(ranks.to_vec(), s).unwrap();
        let m = tucker_product(&core, &factors).unwrap().scaled(sigma);
        let mut y = m.clone();
        for v in y.values_mut() {
            *v += sigma * rng.standard_normal();
        }
        let ym = matricize(&y, 0).unwrap();
        let mm = matricize(&m, 0).unwrap();
        let yg = &ym * ym.transpose();
        let mg = &mm * mm.transpose();
        for i in 0..n1 * n1 {
            y_acc[i].push(yg.as_slice()[i]);
            m_acc[i].push(mg.as_slice()[i]);
        }
    }
    // targets: E[Y1 Y1'] = sigma^2 (tau^2 U1 L1 U1' + n2 n3 I),
    //          E[M1 M1'] = sigma^2 tau^2 U1 L1 U1'
    let l1 = DMatrix::from_diagonal(&DVector::from_vec(lambdas[0].clone()));
    let low_rank = &factors[0] * l1 * factors[0].transpose() * (sigma * sigma * tau_sq);
    let mut max_z: f64 = 0.0;
    for i in 0..n1 {
        for j in 0..n1 {
            let flat = j * n1 + i; // column-major
            let y_target =
                low_rank[(i, j)] + if i == j { sigma * sigma * rest as f64 } else { 0.0 };
            let m_target = low_rank[(i, j)];
            for (acc, target, label) in [
                (&y_acc[flat], y_target, "data"),
                (&m_acc[flat], m_target, "mean"),
            ] {
                let mean = acc.iter().sum::<f64>() / sims as f64;
                let var = acc.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
                    / (sims as f64 - 1.0);
                let se = (var / sims as f64).sqrt().max(1e-12);
                let z = (mean - target).abs() / se;
                max_z = max_z.max(z);
                assert!(
                    z <= 4.0,
                    "{} Gram entry ({},{}): {} vs {} is {:.1} SEs off",
                    label,
                    i,
                    j,
                    mean,
                    target,
                    z
                );
            }
        }
    }
    println!(
        "criterion 8 (second-moment invariants on dims (4,3,3)): PASS (max |z| = {:.2} <= 4)",
        max_z
    );
}

fn assert_close_to_paper(report: &TableReport, expected: &[(Estimator, [f64; 4])], what: &str) {
    for (est, cells) in expected {
        for (c, &target) in cells.iter().enumerate() {
            let got = report.cell(*est, c);
            assert!(
                (got - target).abs() <= 0.03,
                "{} {} condition {}: RSE {} vs reference {} (tolerance 0.03)",
                what,
                est.label(),
                c,
                got,
                target
            );
        }
    }
}

/// Full-scale reproduction of the correctly-specified study. Hours of
/// compute; run with `cargo test -p tuckermc-cli --test acceptance --release -- --ignored`.
#[test]
#[ignore]
fn full_scale_table1() {
    let opts = TableOptions {
        chain: paper_chain_config(),
        ..TableOptions::default()
    };
    let report = run_table(&paper_conditions(false, SEED), &ALL_ESTIMATORS, &opts).unwrap();
    print_table(&report);
    assert_close_to_paper(
        &report,
        &[
            (Estimator::Als, [0.195, 0.088, 0.848, 0.379]),
            (Estimator::Hom, [0.165, 0.082, 0.485, 0.280]),
            (Estimator::Het, [0.165, 0.082, 0.489, 0.281]),
        ],
        "table 1",
    );
    println!("full-scale correctly-specified table: PASS (all cells within 0.03 of the reference)");
}

/// Full-scale misspecified-rank study.
#[test]
#[ignore]
fn full_scale_table2() {
    let opts = TableOptions {
        chain: paper_chain_config(),
        ..TableOptions::default()
    };
    let report = run_table(&paper_conditions(true, SEED), &ALL_ESTIMATORS, &opts).unwrap();
    print_table(&report);
    assert_close_to_paper(
        &report,
        &[
            (Estimator::Als, [0.855, 0.404, 4.840, 2.420]),
            (Estimator::Hom, [0.260, 0.141, 1.364, 0.840]),
            (Estimator::Het, [0.166, 0.082, 0.495, 0.284]),
        ],
        "table 2",
    );
    println!("full-scale misspecified table: PASS (all cells within 0.03 of the reference)");
}

#[test]
fn acceptance_artifacts_written() {
    // writes the desk-scale tables where a reviewer can inspect them
    let (correct, _) = desk_correct();
    let (missp, _) = desk_misspec();
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).unwrap();
    tuckermc::experiments::write_rse_csv(correct, &dir.join("table1_desk.csv")).unwrap();
    tuckermc::experiments::write_rse_csv(missp, &dir.join("table2_desk.csv")).unwrap();
    tuckermc::experiments::write_eigen_curves_csv(missp, 0, &dir.join("eigcurves_desk.csv"))
        .unwrap();
    println!("acceptance artifacts in {}", dir.display());
}
