//! Writers for the per-run output files and the run manifest.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;
use tuckermc::diagnostics::{center_all_modes, mode_singular_vectors, normalized_eigenspectrum};
use tuckermc::sftd::kendall_tau;
use tuckermc::{DenseTensor, McmcSamples};

pub struct OutputDir {
    pub root: PathBuf,
    pub written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &str) -> Result<Self> {
        let root = PathBuf::from(root);
        std::fs::create_dir_all(&root)
            .with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(Self {
            root,
            written: Vec::new(),
        })
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.root.join(name)
    }

    fn writer(&mut self, name: &str) -> Result<std::io::BufWriter<std::fs::File>> {
        let path = self.path(name);
        Ok(std::io::BufWriter::new(
            std::fs::File::create(&path)
                .with_context(|| format!("cannot create {}", path.display()))?,
        ))
    }
}

/// Scalar traces: one row per saved draw with the actual iteration
/// number. The scale column is omitted for scale-free runs (`sigma^2`
/// is pinned to 1 there); eigenvalue-weight columns appear only when
/// the run carried them, labeled `lambda_<mode>_<entry>` (1-based).
pub fn write_traces(out: &mut OutputDir, samples: &McmcSamples, with_sigma: bool) -> Result<()> {
    let mut w = out.writer("traces.csv")?;
    write!(w, "iteration")?;
    if with_sigma {
        write!(w, ",sigma_sq")?;
    }
    write!(w, ",tau_sq")?;
    let has_lambdas = !samples.lambdas.is_empty();
    if has_lambdas {
        for (mode, &rk) in samples.ranks.iter().enumerate() {
            for entry in 1..=rk {
                write!(w, ",lambda_{}_{}", mode + 1, entry)?;
            }
        }
    }
    writeln!(w)?;
    for i in 0..samples.n_saved {
        let iteration = samples.burn_in + (i + 1) * samples.thin;
        write!(w, "{}", iteration)?;
        if with_sigma {
            write!(w, ",{}", samples.sigma_sq[i])?;
        }
        write!(w, ",{}", samples.tau_sq[i])?;
        if has_lambdas {
            for v in &samples.lambdas[i] {
                write!(w, ",{}", v)?;
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Normalized eigenspectrum of every mode of `m`: mode,position,value.
pub fn write_eigenspectra(out: &mut OutputDir, m: &DenseTensor) -> Result<()> {
    let mut w = out.writer("eigenspectra.csv")?;
    writeln!(w, "mode,position,value")?;
    for mode in 0..m.order() {
        let spec = normalized_eigenspectrum(m, mode)?;
        for (pos, v) in spec.iter().enumerate() {
            writeln!(w, "{},{},{}", mode + 1, pos + 1, v)?;
        }
    }
    Ok(())
}

/// First two left singular vectors of each mode of the centered array
/// (per-index means removed along every mode first): mode,vector,index,value.
pub fn write_singular_vectors(out: &mut OutputDir, m: &DenseTensor) -> Result<()> {
    let centered = center_all_modes(m);
    let mut w = out.writer("singular_vectors.csv")?;
    writeln!(w, "mode,vector,index,value")?;
    for mode in 0..m.order() {
        let count = 2.min(m.dims()[mode]);
        let vecs = mode_singular_vectors(&centered, mode, count)?;
        for v in 0..count {
            for i in 0..vecs.nrows() {
                writeln!(w, "{},{},{},{}", mode + 1, v + 1, i + 1, vecs[(i, v)])?;
            }
        }
    }
    Ok(())
}

/// Kendall rank association between the fit and the observed data,
/// per slice of the variable mode: slice,tau. Slices where the
/// association is undefined (constant data) report NA.
pub fn write_tau_table(
    out: &mut OutputDir,
    fit: &DenseTensor,
    y: &DenseTensor,
    variable_mode: usize,
) -> Result<()> {
    let dims = y.dims();
    let nk = dims[variable_mode];
    let inner: usize = dims[..variable_mode].iter().product();
    let outer: usize = dims[variable_mode + 1..].iter().product();
    let mut w = out.writer("tau.csv")?;
    writeln!(w, "slice,tau")?;
    for j in 0..nk {
        let mut ys = Vec::with_capacity(inner * outer);
        let mut ms = Vec::with_capacity(inner * outer);
        for oo in 0..outer {
            let base = (oo * nk + j) * inner;
            for lin in base..base + inner {
                if y.is_observed(lin) && y.values()[lin].is_finite() {
                    ys.push(y.values()[lin]);
                    ms.push(fit.values()[lin]);
                }
            }
        }
        match kendall_tau(&ms, &ys) {
            Ok(t) => writeln!(w, "{},{}", j + 1, t)?,
            Err(_) => writeln!(w, "{},NA", j + 1)?,
        }
    }
    Ok(())
}

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    /// Fully resolved configuration: defaults, file values and flag
    /// overrides merged. Rerunning the command with exactly these values
    /// reproduces every output byte for byte.
    pub config: BTreeMap<String, String>,
    pub versions: BTreeMap<String, String>,
    pub stats: BTreeMap<String, f64>,
    pub wall_time_secs: f64,
    pub outputs: Vec<String>,
}

pub fn write_manifest(
    out: &mut OutputDir,
    command: &str,
    config: BTreeMap<String, String>,
    stats: BTreeMap<String, f64>,
    wall_time_secs: f64,
) -> Result<()> {
    let mut versions = BTreeMap::new();
    versions.insert("tuckermc".to_string(), tuckermc::VERSION.to_string());
    versions.insert(
        "tuckermc-cli".to_string(),
        env!("CARGO_PKG_VERSION").to_string(),
    );
    let manifest = RunManifest {
        command: command.to_string(),
        config,
        versions,
        stats,
        wall_time_secs,
        outputs: {
            let mut o = out.written.clone();
            o.push("manifest.json".to_string());
            o
        },
    };
    let path = out.path("manifest.json");
    let file = std::fs::File::create(&path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    serde_json::to_writer_pretty(file, &manifest)?;
    Ok(())
}
