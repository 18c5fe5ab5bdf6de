//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use tuckermc::als::{hooi, hooi_impute, DEFAULT_MAX_ITER, DEFAULT_TOL};
use tuckermc::diagnostics::effective_sample_size;
use tuckermc::experiments::{
    self, desk_chain_config, desk_conditions, equivariance_check, ordinal_benchmark,
    paper_chain_config, paper_conditions, Estimator, SkewProfile, TableOptions,
};
use tuckermc::normal_tdm::run_chain;
use tuckermc::sftd::run_sftd_chain;
use tuckermc::tensor::hosvd;
use tuckermc::{ChainConfig, DenseTensor, McmcSamples, PriorSpec};

use tuckermc_cli::config::{parse_sigma_prior, parse_usize_list, Resolver};
use tuckermc_cli::ingest::{read_long_csv, write_long_csv};
use tuckermc_cli::outputs::{
    write_eigenspectra, write_manifest, write_singular_vectors, write_tau_table, write_traces,
    OutputDir,
};
use crate::{DecomposeArgs, FitNormalArgs, FitSftdArgs, SimulateArgs, SummarizeArgs};

const DEFAULT_OUTPUT_DIR: &str = "tuckermc-out";

fn validate_ranks_against_dims(ranks: &[usize], dims: &[usize]) -> Result<()> {
    if ranks.len() != dims.len() || ranks.iter().zip(dims).any(|(&r, &n)| r > n) {
        bail!(
            "ranks {:?} are incompatible with dims {:?} (need one rank per mode, each at most the dimension)",
            ranks,
            dims
        );
    }
    Ok(())
}

/// 1-based variable mode from config, defaulting to the last mode.
fn resolve_variable_mode(r: &mut Resolver, flag: Option<usize>, order: usize) -> Result<usize> {
    let vm = r.parse_or("variable_mode", flag, order)?;
    if vm < 1 || vm > order {
        bail!("variable_mode must be in 1..={}, got {}", order, vm);
    }
    Ok(vm - 1)
}

pub fn decompose(args: DecomposeArgs) -> Result<()> {
    const KEYS: &[&str] = &[
        "method",
        "data",
        "dims",
        "ranks",
        "max_iter",
        "tol",
        "variable_mode",
        "output_dir",
    ];
    let started = Instant::now();
    let mut r = Resolver::new(args.config.as_deref(), KEYS)?;
    let method = r.string_required("method", args.method);
    let data = r.string_required("data", args.data);
    let dims_s = r.string_required("dims", args.dims);
    let ranks_s = r.string_required("ranks", args.ranks);
    let max_iter = r.parse_or("max_iter", args.max_iter, DEFAULT_MAX_ITER)?;
    let tol = r.parse_or("tol", args.tol, DEFAULT_TOL)?;
    let out_dir = r.string_or("output_dir", args.output_dir, DEFAULT_OUTPUT_DIR);

    let dims_v = dims_s.as_deref().map(|s| parse_usize_list(s, "dims")).transpose()?;
    let order = dims_v.as_ref().map(|d| d.len()).unwrap_or(1);
    let variable_mode = resolve_variable_mode(&mut r, args.variable_mode, order)?;
    let ranks_v = ranks_s.as_deref().map(|s| parse_usize_list(s, "ranks")).transpose()?;
    let config = r.finish()?; // reports every missing required key at once
    let (dims, ranks) = (dims_v.unwrap(), ranks_v.unwrap());
    validate_ranks_against_dims(&ranks, &dims)?;
    let method = method.unwrap().to_ascii_lowercase();
    let y = read_long_csv(Path::new(&data.unwrap()), &dims)?;

    let mut stats = BTreeMap::new();
    let fitted: DenseTensor = match method.as_str() {
        "hosvd" => {
            if !y.is_fully_observed() {
                bail!("hosvd requires a fully observed array; use --method hooi for masked data");
            }
            hosvd(&y, &ranks)?.reconstruct()
        }
        "hooi" => {
            let fit = if y.is_fully_observed() {
                hooi(&y, &ranks, max_iter, tol)?
            } else {
                hooi_impute(&y, &ranks, max_iter, tol)?
            };
            stats.insert("iterations".into(), fit.iterations as f64);
            if let Some(rss) = fit.rss.last() {
                stats.insert("final_rss".into(), *rss);
            }
            fit.fitted
        }
        other => bail!("method must be hosvd or hooi, got {:?}", other),
    };

    let mut out = OutputDir::create(&out_dir)?;
    write_long_csv(&fitted, &out.path("mhat.csv"))?;
    write_eigenspectra(&mut out, &fitted)?;
    write_singular_vectors(&mut out, &fitted)?;
    write_tau_table(&mut out, &fitted, &y, variable_mode)?;
    write_manifest(
        &mut out,
        "decompose",
        config,
        stats,
        started.elapsed().as_secs_f64(),
    )?;
    println!(
        "decompose ({}) finished in {:.2}s; outputs in {}",
        method,
        started.elapsed().as_secs_f64(),
        out.root.display()
    );
    Ok(())
}

struct FitCommon {
    y: DenseTensor,
    ranks: Vec<usize>,
    prior: PriorSpec,
    chain: ChainConfig,
    variable_mode: usize,
    out_dir: String,
    config: BTreeMap<String, String>,
}

#[allow(clippy::too_many_arguments)]
fn resolve_fit(
    r: &mut Resolver,
    family_flag: Option<String>,
    family_default: Option<&str>,
    data: Option<String>,
    dims: Option<String>,
    ranks: Option<String>,
    schedule: (usize, usize, usize),
    chain_flags: (Option<usize>, Option<usize>, Option<usize>, Option<u64>),
    prior_flags: (Option<f64>, Option<f64>, Option<String>, Option<f64>),
    vmf_sweeps: Option<usize>,
    variable_mode: Option<usize>,
    output_dir: Option<String>,
) -> Result<FitCommon> {
    let family = match family_default {
        Some(d) => Some(r.string_or("family", family_flag, d)),
        None => r.string_required("family", family_flag),
    };
    let data = r.string_required("data", data);
    let dims_s = r.string_required("dims", dims);
    let ranks_s = r.string_required("ranks", ranks);
    let (it_flag, burn_flag, thin_flag, seed_flag) = chain_flags;
    let iterations = r.parse_or("iterations", it_flag, schedule.0)?;
    let burn_in = r.parse_or("burn_in", burn_flag, schedule.1)?;
    let thin = r.parse_or("thin", thin_flag, schedule.2)?;
    let seed = r.parse_or("seed", seed_flag, 0u64)?;
    let sweeps = r.parse_or("vmf_sweeps", vmf_sweeps, tuckermc::kernels::DEFAULT_VMF_SWEEPS)?;
    let (nu0_flag, tau0_flag, sigma_flag, mh_flag) = prior_flags;
    let nu0 = r.parse_optional("nu0", nu0_flag)?;
    let tau0_sq = r.parse_optional("tau0_sq", tau0_flag)?;
    let sigma_prior = match r.raw_optional("sigma_prior", sigma_flag) {
        Some(s) => Some(parse_sigma_prior(&s)?),
        None => None,
    };
    let mh = r.parse_optional("mh_concentration", mh_flag)?;
    let out_dir = r.string_or("output_dir", output_dir, DEFAULT_OUTPUT_DIR);

    let dims_v = dims_s.as_deref().map(|s| parse_usize_list(s, "dims")).transpose()?;
    let order = dims_v.as_ref().map(|d| d.len()).unwrap_or(1);
    let vmode = resolve_variable_mode(r, variable_mode, order)?;
    let ranks_v = ranks_s.as_deref().map(|s| parse_usize_list(s, "ranks")).transpose()?;

    let mut config = r.finish()?;
    let (dims, ranks) = (dims_v.unwrap(), ranks_v.unwrap());
    validate_ranks_against_dims(&ranks, &dims)?;

    let family = family.unwrap().to_ascii_lowercase();
    let mut prior = match family.as_str() {
        "hom" => PriorSpec::homoscedastic(&dims, &ranks),
        "het" => PriorSpec::heteroscedastic(&dims),
        other => bail!("family must be hom or het, got {:?}", other),
    };
    if let Some(v) = nu0 {
        prior = prior.with_nu0(v);
    }
    if let Some(v) = tau0_sq {
        prior = prior.with_tau0_sq(v);
    }
    if let Some(v) = sigma_prior {
        prior = prior.with_sigma_prior(v);
    }
    if let Some(v) = mh {
        prior = prior.with_mh_concentration(v);
    }
    // record the effective hyperparameters in the manifest
    config.insert("nu0".into(), prior.nu0.to_string());
    config.insert("tau0_sq".into(), prior.tau0_sq.to_string());
    config
        .entry("sigma_prior".into())
        .or_insert_with(|| "improper".into());
    config.insert("mh_concentration".into(), prior.mh_concentration.to_string());

    let y = read_long_csv(Path::new(&data.unwrap()), &dims)?;
    Ok(FitCommon {
        y,
        ranks,
        prior,
        chain: ChainConfig {
            iterations,
            burn_in,
            thin,
            seed,
            vmf_sweeps: sweeps,
            save_models: false,
        },
        variable_mode: vmode,
        out_dir,
        config,
    })
}

fn sampler_stats(samples: &McmcSamples, with_sigma: bool) -> BTreeMap<String, f64> {
    let mut stats = BTreeMap::new();
    if with_sigma {
        stats.insert("mean_sigma".into(), samples.mean_sigma());
    }
    for (mode, rate) in samples.lambda_accept.iter().enumerate() {
        stats.insert(format!("lambda_accept_mode_{}", mode + 1), *rate);
    }
    stats
}

pub fn fit_normal(args: FitNormalArgs) -> Result<()> {
    const KEYS: &[&str] = &[
        "family",
        "data",
        "dims",
        "ranks",
        "iterations",
        "burn_in",
        "thin",
        "seed",
        "nu0",
        "tau0_sq",
        "sigma_prior",
        "mh_concentration",
        "vmf_sweeps",
        "variable_mode",
        "output_dir",
    ];
    let started = Instant::now();
    let mut r = Resolver::new(args.config.as_deref(), KEYS)?;
    let common = resolve_fit(
        &mut r,
        args.family,
        None,
        args.data,
        args.dims,
        args.ranks,
        (11_000, 1000, 10),
        (args.iterations, args.burn_in, args.thin, args.seed),
        (args.nu0, args.tau0_sq, args.sigma_prior, args.mh_concentration),
        args.vmf_sweeps,
        args.variable_mode,
        args.output_dir,
    )?;
    let samples = run_chain(&common.y, &common.ranks, &common.prior, &common.chain)?;

    let mut out = OutputDir::create(&common.out_dir)?;
    write_traces(&mut out, &samples, true)?;
    write_long_csv(&samples.mean_m, &out.path("mhat.csv"))?;
    write_eigenspectra(&mut out, &samples.mean_m)?;
    write_singular_vectors(&mut out, &samples.mean_m)?;
    write_tau_table(&mut out, &samples.mean_m, &common.y, common.variable_mode)?;
    write_manifest(
        &mut out,
        "fit-normal",
        common.config,
        sampler_stats(&samples, true),
        started.elapsed().as_secs_f64(),
    )?;
    println!(
        "fit-normal: {} saved draws in {:.2}s; outputs in {}",
        samples.n_saved,
        started.elapsed().as_secs_f64(),
        out.root.display()
    );
    Ok(())
}

pub fn fit_sftd(args: FitSftdArgs) -> Result<()> {
    const KEYS: &[&str] = &[
        "family",
        "data",
        "dims",
        "ranks",
        "iterations",
        "burn_in",
        "thin",
        "seed",
        "nu0",
        "tau0_sq",
        "mh_concentration",
        "vmf_sweeps",
        "variable_mode",
        "output_dir",
    ];
    let started = Instant::now();
    let mut r = Resolver::new(args.config.as_deref(), KEYS)?;
    let common = resolve_fit(
        &mut r,
        args.family,
        Some("het"),
        args.data,
        args.dims,
        args.ranks,
        (55_000, 5000, 10),
        (args.iterations, args.burn_in, args.thin, args.seed),
        (args.nu0, args.tau0_sq, None, args.mh_concentration),
        args.vmf_sweeps,
        args.variable_mode,
        args.output_dir,
    )?;
    let samples = run_sftd_chain(
        &common.y,
        &common.ranks,
        &common.prior,
        &common.chain,
        common.variable_mode,
    )?;

    let mut out = OutputDir::create(&common.out_dir)?;
    write_traces(&mut out, &samples, false)?;
    write_long_csv(&samples.mean_m, &out.path("mhat.csv"))?;
    write_eigenspectra(&mut out, &samples.mean_m)?;
    write_singular_vectors(&mut out, &samples.mean_m)?;
    write_tau_table(&mut out, &samples.mean_m, &common.y, common.variable_mode)?;
    write_manifest(
        &mut out,
        "fit-sftd",
        common.config,
        sampler_stats(&samples, false),
        started.elapsed().as_secs_f64(),
    )?;
    println!(
        "fit-sftd: {} saved draws in {:.2}s; outputs in {}",
        samples.n_saved,
        started.elapsed().as_secs_f64(),
        out.root.display()
    );
    Ok(())
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    const KEYS: &[&str] = &[
        "seed",
        "full_scale",
        "replicates",
        "iterations",
        "burn_in",
        "thin",
        "dims",
        "ranks",
        "a",
        "psi",
        "chains_per_arm",
        "skew",
        "output_dir",
    ];
    let started = Instant::now();
    let kind = args.kind.to_ascii_lowercase();
    let mut r = Resolver::new(args.config.as_deref(), KEYS)?;
    let seed = r.parse_or("seed", args.seed, 0u64)?;
    let full_scale = r.parse_or(
        "full_scale",
        if args.full_scale { Some(true) } else { None },
        false,
    )?;
    let out_dir = r.string_or("output_dir", args.output_dir, DEFAULT_OUTPUT_DIR);

    match kind.as_str() {
        "table1" | "table2" | "eigcurves" => {
            let misspecified = kind != "table1";
            let mut conditions = if full_scale {
                paper_conditions(misspecified, seed)
            } else {
                desk_conditions(misspecified, seed)
            };
            let default_chain = if full_scale {
                paper_chain_config()
            } else {
                desk_chain_config()
            };
            if let Some(reps) = r.parse_optional("replicates", args.replicates)? {
                for c in conditions.iter_mut() {
                    c.replicates = reps;
                }
            }
            let chain = ChainConfig {
                iterations: r.parse_or("iterations", args.iterations, default_chain.iterations)?,
                burn_in: r.parse_or("burn_in", args.burn_in, default_chain.burn_in)?,
                thin: r.parse_or("thin", args.thin, default_chain.thin)?,
                ..default_chain
            };
            let config = r.finish()?;
            let opts = TableOptions {
                chain,
                keep_fits: kind == "eigcurves",
                ..TableOptions::default()
            };
            let estimators = [Estimator::Als, Estimator::Hom, Estimator::Het];
            let report = experiments::run_table(&conditions, &estimators, &opts)?;
            let mut out = OutputDir::create(&out_dir)?;
            experiments::write_rse_csv(&report, &out.path("rse.csv"))?;
            experiments::write_rse_replicates_csv(&report, &out.path("rse_replicates.csv"))?;
            if kind == "eigcurves" {
                experiments::write_eigen_curves_csv(&report, 0, &out.path("eigcurves.csv"))?;
            }
            write_manifest(
                &mut out,
                &format!("simulate {}", kind),
                config,
                BTreeMap::new(),
                started.elapsed().as_secs_f64(),
            )?;
            for (c, cond) in report.conditions.iter().enumerate() {
                println!(
                    "{}: ALS={:.3} HOM={:.3} HET={:.3}",
                    cond.label(),
                    report.cell(Estimator::Als, c),
                    report.cell(Estimator::Hom, c),
                    report.cell(Estimator::Het, c)
                );
            }
        }
        "equivariance" => {
            let dims = parse_usize_list(&r.string_or("dims", args.dims, "6,5,4"), "dims")?;
            let ranks = parse_usize_list(&r.string_or("ranks", args.ranks, "2,2,2"), "ranks")?;
            let a = r.parse_or("a", args.a, 3.0)?;
            let psi = r.parse_or("psi", args.psi, 200.0)?;
            let chains = r.parse_or("chains_per_arm", args.chains_per_arm, 4usize)?;
            let chain = ChainConfig {
                iterations: r.parse_or("iterations", args.iterations, 20_000)?,
                burn_in: r.parse_or("burn_in", args.burn_in, 2000)?,
                thin: r.parse_or("thin", args.thin, 10)?,
                ..ChainConfig::default()
            };
            let config = r.finish()?;
            let report = equivariance_check(&dims, &ranks, a, psi, seed, &chain, chains)?;
            let mut out = OutputDir::create(&out_dir)?;
            experiments::write_equivariance_csv(&report, &out.path("equivariance.csv"))?;
            let mut stats = BTreeMap::new();
            stats.insert("deviation_ratio".into(), report.deviation_ratio);
            stats.insert("sigma_scale_z".into(), report.sigma_scale_z);
            write_manifest(
                &mut out,
                "simulate equivariance",
                config,
                stats,
                started.elapsed().as_secs_f64(),
            )?;
            println!(
                "equivariance: deviation ratio {:.3} (norm {:.4} / combined SE {:.4}), scale z {:.3}",
                report.deviation_ratio,
                report.deviation_norm,
                report.combined_se_norm,
                report.sigma_scale_z
            );
        }
        "ordinal" => {
            let dims = parse_usize_list(&r.string_or("dims", args.dims, "20,20,10"), "dims")?;
            let ranks = parse_usize_list(&r.string_or("ranks", args.ranks, "4,4,2"), "ranks")?;
            let skew = match r.string_or("skew", args.skew, "heavy").to_ascii_lowercase().as_str() {
                "heavy" => SkewProfile::Heavy,
                "none" => SkewProfile::Identity,
                other => bail!("skew must be heavy or none, got {:?}", other),
            };
            let chain = ChainConfig {
                iterations: r.parse_or("iterations", args.iterations, 6000)?,
                burn_in: r.parse_or("burn_in", args.burn_in, 1000)?,
                thin: r.parse_or("thin", args.thin, 10)?,
                ..ChainConfig::default()
            };
            let config = r.finish()?;
            let report = ordinal_benchmark(&dims, &ranks, skew, seed, &chain)?;
            let mut out = OutputDir::create(&out_dir)?;
            experiments::write_ordinal_csv(&report, &out.path("tau.csv"))?;
            let wins = report
                .tau_sftd
                .iter()
                .zip(&report.tau_als)
                .filter(|(s, a)| s >= a)
                .count();
            let mut stats = BTreeMap::new();
            stats.insert(
                "sftd_win_fraction".into(),
                wins as f64 / report.tau_sftd.len() as f64,
            );
            write_manifest(
                &mut out,
                "simulate ordinal",
                config,
                stats,
                started.elapsed().as_secs_f64(),
            )?;
            println!(
                "ordinal: scale-free fit has higher rank association on {}/{} slices",
                wins,
                report.tau_sftd.len()
            );
        }
        other => bail!(
            "simulate kind must be one of table1, table2, eigcurves, equivariance, ordinal; got {:?}",
            other
        ),
    }
    Ok(())
}

pub fn summarize(args: SummarizeArgs) -> Result<()> {
    const KEYS: &[&str] = &["dir", "ess_threshold"];
    let mut r = Resolver::new(args.config.as_deref(), KEYS)?;
    let dir = r.string_required("dir", args.dir);
    let threshold = r.parse_or("ess_threshold", args.ess_threshold, 300.0)?;
    let _ = r.finish()?;
    let dir = dir.unwrap();

    let traces_path = Path::new(&dir).join("traces.csv");
    let mut reader = csv::Reader::from_path(&traces_path)
        .with_context(|| format!("cannot open {}", traces_path.display()))?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for record in reader.records() {
        let record = record?;
        for (i, field) in record.iter().enumerate() {
            columns[i].push(field.parse().context("trace values must be numeric")?);
        }
    }

    let out_path = Path::new(&dir).join("ess.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&out_path)?);
    use std::io::Write;
    writeln!(w, "trace,ess,degenerate,flagged")?;
    let mut any_flagged = false;
    for (name, column) in headers.iter().zip(&columns) {
        if name == "iteration" {
            continue;
        }
        let ess = effective_sample_size(column)
            .map_err(|e| anyhow!("trace {}: {}", name, e))?;
        let flagged = !ess.degenerate && ess.value < threshold;
        any_flagged |= flagged;
        writeln!(
            w,
            "{},{},{},{}",
            name, ess.value, ess.degenerate, flagged
        )?;
        let mut note = String::new();
        if ess.degenerate {
            note = " (constant trace)".to_string();
        } else if flagged {
            note = format!(" [BELOW {}]", threshold);
        }
        println!("trace {}: ESS {:.1}{}", name, ess.value, note);
    }
    if !any_flagged {
        println!("all effective sample sizes at or above {}", threshold);
    }
    Ok(())
}
