use std::time::Instant;
use tuckermc::experiments::*;
use tuckermc::normal_tdm::ChainConfig;

fn main() {
    let what = std::env::args().nth(1).unwrap_or_default();
    match what.as_str() {
        "margin" => {
            // low-rank/low-signal misspecified cell across seeds
            for seed in [1u64, 2026, 4711] {
                let conds = vec![SimCondition {
                    dims: vec![24, 20, 16],
                    r0: vec![6, 5, 4],
                    psi: 1000.0,
                    fitted_r: vec![12, 10, 8],
                    replicates: 5,
                    seed: tuckermc::rng::derive_seed(seed, 0),
                }];
                let opts = TableOptions { chain: desk_chain_config(), ..TableOptions::default() };
                let t = Instant::now();
                let rep = run_table(&conds, &[Estimator::Als, Estimator::Hom, Estimator::Het], &opts).unwrap();
                let (a, h, e) = (rep.cell(Estimator::Als, 0), rep.cell(Estimator::Hom, 0), rep.cell(Estimator::Het, 0));
                println!("seed {}: ALS={:.3} HOM={:.3} HET={:.3} | ALS/HOM={:.3} HOM/HET={:.3} ({:.0}s)", seed, a, h, e, a / h, h / e, t.elapsed().as_secs_f64());
            }
        }
        "ordinal" => {
            let chain = ChainConfig { iterations: 6000, burn_in: 1000, thin: 10, ..ChainConfig::default() };
            for (label, skew) in [("heavy", SkewProfile::Heavy), ("none", SkewProfile::Identity)] {
                let t = Instant::now();
                let rep = ordinal_benchmark(&[20, 20, 8], &[4, 4, 2], skew, 2026, &chain).unwrap();
                let wins = rep.tau_sftd.iter().zip(&rep.tau_als).filter(|(s, a)| s >= a).count();
                let maxdiff = rep.tau_sftd.iter().zip(&rep.tau_als).map(|(s, a)| (s - a).abs()).fold(0.0f64, f64::max);
                println!("{}: wins {}/8, max|diff|={:.3} ({:.0}s)", label, wins, maxdiff, t.elapsed().as_secs_f64());
                println!("  sftd: {:?}", rep.tau_sftd.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>());
                println!("  als : {:?}", rep.tau_als.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>());
            }
        }
        "equiv" => {
            let chain = ChainConfig { iterations: 20_000, burn_in: 2000, thin: 10, ..ChainConfig::default() };
            let t = Instant::now();
            let rep = equivariance_check(&[6, 5, 4], &[2, 2, 2], 3.0, 200.0, 2026, &chain, 4).unwrap();
            println!(
                "equivariance: ratio={:.3} (norm {:.4}, se {:.4}), sigma z={:.3} ({:.0}s)",
                rep.deviation_ratio, rep.deviation_norm, rep.combined_se_norm, rep.sigma_scale_z, t.elapsed().as_secs_f64()
            );
        }
        _ => eprintln!("usage: timing margin|ordinal|equiv"),
    }
}
