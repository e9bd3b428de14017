//! The `design`, `pattern`, `simulate` and `verify` commands.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::array_geometry::{build_steering_matrices, Region, PSI_V_MAX};
use crate::codebook::{baseline_dft_codebook, Codebook, CodebookKind};
use crate::codeword_design::{omega_gamma_diagnostics, Designer};
use crate::error::{Error, Result};
use crate::ideal_pattern::{gain_raster, integral_budget, integral_reference_gain, pattern_vector, IdealGain};
use crate::polarization_channel::{complex_gaussian, rotate, stack_weighted};
use crate::runner::codebook_io::{read_codebook, write_codebook};
use crate::runner::config::ExperimentConfig;
use crate::simulation::simulate_rate_with;

/// Formats a real with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Internal(format!("{other:?}")),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Default file name for a codebook of `kind`.
pub fn codebook_file_name(kind: CodebookKind) -> &'static str {
    match kind {
        CodebookKind::Proposed => "codebook_proposed.bin",
        CodebookKind::Baseline => "codebook_baseline.bin",
    }
}

/// Designs the proposed (or baseline) codebook, writes it under the output
/// directory and prints a per-region SE table. Returns the written path.
pub fn cmd_design(cfg: &ExperimentConfig, baseline: bool, out: &mut dyn Write) -> Result<PathBuf> {
    let params = cfg.polarization.params()?;
    let cb = if baseline {
        baseline_dft_codebook(&cfg.grid, &params, &cfg.array)?
    } else {
        Codebook::design(&Designer::new(cfg.array, cfg.grid, params, cfg.design)?)?
    };
    ensure_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join(codebook_file_name(cb.kind));
    write_codebook(&path, &cb)?;

    writeln!(out, "{:>3} {:>3} {:>24} {:>9}", "p", "q", "se", "candidate")?;
    for e in &cb.entries {
        let cand = e.candidate.map_or("-".to_string(), |(a, b)| format!("({a},{b})"));
        writeln!(out, "{:>3} {:>3} {:>24} {:>9}", e.region.p, e.region.q, fmt_real(e.se), cand)?;
    }
    writeln!(out, "wrote {} codewords to {}", cb.len(), path.display())?;
    Ok(path)
}

/// Which codewords a pattern raster covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternTarget {
    Region(Region),
    /// Entrywise maximum over the whole codebook.
    All,
}

impl std::str::FromStr for PatternTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(PatternTarget::All);
        }
        let bad = || Error::invalid(format!("region must be `all` or `p,q`, got `{s}`"));
        let (p, q) = s.trim_matches(|c| c == '(' || c == ')').split_once(',').ok_or_else(bad)?;
        let p = p.trim().parse().map_err(|_| bad())?;
        let q = q.trim().parse().map_err(|_| bad())?;
        Ok(PatternTarget::Region(Region::new(p, q)))
    }
}

/// Midpoint nodes of `n` equal cells on `(lo, hi)`.
pub fn midpoints(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / n as f64;
    (0..n).map(|k| lo + step * (k as f64 + 0.5)).collect()
}

/// Gain raster over the design rectangle: `psi_h` on `(-pi, pi)` and
/// `psi_v` on `(-pi/sqrt 2, pi/sqrt 2)`, `n_h x n_v` midpoint nodes.
pub struct Raster {
    pub psi_h: Vec<f64>,
    pub psi_v: Vec<f64>,
    pub gains: DMatrix<f64>,
}

pub fn pattern_raster(cb: &Codebook, target: PatternTarget, n_h: usize, n_v: usize) -> Result<Raster> {
    if n_h == 0 || n_v == 0 {
        return Err(Error::invalid("raster dimensions must be positive"));
    }
    let psi_h = midpoints(-PI, PI, n_h);
    let psi_v = midpoints(-PSI_V_MAX, PSI_V_MAX, n_v);
    let raster = |c: &DVector<Complex64>| gain_raster(c, &cb.params, &cb.array, &psi_h, &psi_v);
    let gains = match target {
        PatternTarget::Region(r) => raster(&cb.entry(r)?.codeword)?,
        PatternTarget::All => {
            let mut acc = DMatrix::from_element(n_h, n_v, f64::NEG_INFINITY);
            for e in &cb.entries {
                acc.zip_apply(&raster(&e.codeword)?, |a, b| *a = a.max(b));
            }
            acc
        }
    };
    Ok(Raster { psi_h, psi_v, gains })
}

pub fn write_raster_csv(path: &Path, r: &Raster) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["psi_h", "psi_v", "gain"]).map_err(csv_err)?;
    for (a, &x) in r.psi_h.iter().enumerate() {
        for (b, &y) in r.psi_v.iter().enumerate() {
            w.write_record([fmt_real(x), fmt_real(y), fmt_real(r.gains[(a, b)])])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes the raster CSV for one region or the whole codebook.
pub fn cmd_pattern(
    cfg: &ExperimentConfig,
    codebook: &Path,
    target: PatternTarget,
    resolution: (usize, usize),
    out: &mut dyn Write,
) -> Result<PathBuf> {
    let cb = read_codebook(codebook)?;
    let raster = pattern_raster(&cb, target, resolution.0, resolution.1)?;
    ensure_dir(&cfg.output_dir)?;
    let name = match target {
        PatternTarget::All => "pattern_all.csv".to_string(),
        PatternTarget::Region(r) => format!("pattern_{}_{}.csv", r.p, r.q),
    };
    let path = cfg.output_dir.join(name);
    write_raster_csv(&path, &raster)?;
    writeln!(out, "wrote {}x{} raster to {}", resolution.0, resolution.1, path.display())?;
    Ok(path)
}

fn codebook_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Simulates every codebook under the configured channel and writes
/// `rates.csv`. All codebooks share the same random numbers.
pub fn cmd_simulate(cfg: &ExperimentConfig, codebooks: &[PathBuf], out: &mut dyn Write) -> Result<PathBuf> {
    if codebooks.is_empty() {
        return Err(Error::invalid("simulate needs at least one codebook file"));
    }
    let params = cfg.polarization.params()?;
    let mut curves = Vec::with_capacity(codebooks.len());
    for path in codebooks {
        let cb = read_codebook(path)?;
        if cb.array != cfg.array {
            return Err(Error::config(
                "array",
                format!("{} was designed for {:?}, config has {:?}", path.display(), cb.array, cfg.array),
            ));
        }
        if cb.grid != cfg.grid {
            return Err(Error::config(
                "grid",
                format!("{} was designed for {:?}, config has {:?}", path.display(), cb.grid, cfg.grid),
            ));
        }
        let id = codebook_id(path);
        curves.push(simulate_rate_with(&cb.codewords(), &id, &cfg.simulation, &cfg.grid, &params, &cfg.array)?);
    }
    ensure_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join("rates.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    w.write_record(["snr_db", "codebook_id", "mean_rate", "upper_bound", "n_trials", "seed"])
        .map_err(csv_err)?;
    for c in &curves {
        for k in 0..c.snr_db.len() {
            w.write_record([
                fmt_real(c.snr_db[k]),
                c.codebook_id.clone(),
                fmt_real(c.mean_rate[k]),
                fmt_real(c.upper_bound[k]),
                c.n_trials.to_string(),
                c.seed.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    for c in &curves {
        let rates: Vec<String> = c.mean_rate.iter().map(|r| format!("{r:.4}")).collect();
        writeln!(out, "{}: {}", c.codebook_id, rates.join(" "))?;
    }
    writeln!(out, "wrote {}", path.display())?;
    Ok(path)
}

/// Knobs for `verify`; `g_scale != 1` perturbs the ideal gain so the
/// `G x area` check can be seen to fail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub n_random: usize,
    pub n_equality: usize,
    pub g_scale: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            n_random: 50,
            n_equality: 5,
            g_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{tag} {:<22} {}", c.name, c.detail);
        }
        s
    }
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> DVector<Complex64> {
    let v = DVector::from_fn(n, |_, _| complex_gaussian(rng));
    let norm = v.norm();
    v / Complex64::from(norm)
}

/// Numerical checks of the integral bound, its equality family, the flat
/// ideal gain identity and the zero-gain subspace.
pub fn verify(cfg: &ExperimentConfig, opts: VerifyOptions) -> Result<VerifyReport> {
    let array = &cfg.array;
    let params = cfg.polarization.params()?;
    let budget = integral_budget(array);
    // The midpoint rule is exact for these trigonometric polynomials once
    // the node count exceeds twice the array length.
    let quad_n = 64.max(2 * array.m_h.max(array.m_v) + 2);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.simulation.rng_seed);
    let m = array.total_elements();
    let mut checks = Vec::new();

    let mut worst = 0.0f64;
    for _ in 0..opts.n_random {
        let c = random_unit(m, &mut rng);
        worst = worst.max(integral_reference_gain(&c, &params, array, quad_n)? / budget);
    }
    checks.push(CheckResult {
        name: "integral_bound",
        passed: worst <= 1.005,
        detail: format!(
            "max integral/bound = {worst:.9} over {} random codewords (bound {:.12})",
            opts.n_random, budget
        ),
    });

    let b = params.norm_b();
    let mut worst_rel = 0.0f64;
    for _ in 0..opts.n_equality {
        let x = random_unit(array.elements_per_pol(), &mut rng);
        let c = rotate(params.phi, &stack_weighted(params.rho_pv() * b, params.rho_ph() * b, &x));
        let integral = integral_reference_gain(&c, &params, array, quad_n)?;
        worst_rel = worst_rel.max((integral / budget - 1.0).abs());
    }
    checks.push(CheckResult {
        name: "integral_equality",
        passed: worst_rel <= 0.005,
        detail: format!("max relative error = {worst_rel:.3e} over {} equality codewords", opts.n_equality),
    });

    let g = IdealGain::new(&cfg.grid, array).value() * opts.g_scale;
    let product = g * cfg.grid.region_area();
    let rel = (product - budget).abs() / budget;
    checks.push(CheckResult {
        name: "ideal_gain_area",
        passed: rel <= 1e-12,
        detail: format!("G*area = {product:.15e}, bound = {budget:.15e}, relative error = {rel:.3e}"),
    });

    let basis = omega_gamma_diagnostics(&params, array);
    let sm = build_steering_matrices(&cfg.grid, array);
    let mut worst_gain = 0.0f64;
    for col in basis.omega.column_iter() {
        let c = rotate(params.phi, &col.into_owned());
        let c = &c / Complex64::from(c.norm());
        let pv = pattern_vector(&c, &sm, &params, array)?;
        worst_gain = worst_gain.max(pv.gains.iter().cloned().fold(0.0, f64::max));
    }
    checks.push(CheckResult {
        name: "omega_zero_gain",
        passed: worst_gain <= 1e-12,
        detail: format!("max section gain of Omega generators = {worst_gain:.3e}"),
    });

    let cross = (basis.omega.adjoint() * &basis.gamma).iter().map(|z| z.norm()).fold(0.0, f64::max);
    checks.push(CheckResult {
        name: "omega_gamma_orthogonal",
        passed: cross <= 1e-12,
        detail: format!("max |<omega, gamma>| = {cross:.3e}"),
    });

    Ok(VerifyReport { checks })
}

pub fn cmd_verify(cfg: &ExperimentConfig, opts: VerifyOptions, out: &mut dyn Write) -> Result<VerifyReport> {
    let report = verify(cfg, opts)?;
    out.write_all(report.render().as_bytes())?;
    Ok(report)
}
