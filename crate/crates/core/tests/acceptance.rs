//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::f64::consts::{FRAC_PI_4, PI};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dpbeam::array_geometry::{build_steering_matrices, section_centers, upa_response_unpaired, ArrayConfig, Region, RegionGrid};
use dpbeam::codebook::{baseline_dft_codebook, Codebook};
use dpbeam::codeword_design::{dual_pol_beamformer, omega_gamma_diagnostics, DesignSettings, Designer};
use dpbeam::hybrid_factorization::{build_dictionary, omp_factorize};
use dpbeam::ideal_pattern::{integral_budget, integral_reference_gain, pattern_vector, reference_gain, IdealGain};
use dpbeam::polarization_channel::{complex_gaussian, rotate, PolarizationParams};
use dpbeam::simulation::{beam_align, min_region_gain, simulate_rate, SimulationConfig};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn nominal() -> PolarizationParams {
    PolarizationParams::new(0.3, FRAC_PI_4, Complex64::from(1.0), Complex64::from(1.0)).unwrap()
}

fn random_unit<R: Rng>(n: usize, rng: &mut R) -> DVector<Complex64> {
    let v = DVector::from_fn(n, |_, _| complex_gaussian(rng));
    let norm = v.norm();
    v / Complex64::from(norm)
}

fn random_params<R: Rng>(rng: &mut R) -> PolarizationParams {
    PolarizationParams::new(
        rng.random_range(0.05..1.0),
        rng.random_range(-PI..PI),
        complex_gaussian(rng),
        complex_gaussian(rng),
    )
    .unwrap()
}

fn integral_bound() -> Outcome {
    let start = Instant::now();
    let cfg = ArrayConfig::new(4, 4).unwrap();
    let budget = integral_budget(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let params = random_params(&mut rng);
        let c = random_unit(cfg.total_elements(), &mut rng);
        worst = worst.max(integral_reference_gain(&c, &params, &cfg, 128).unwrap() / budget);
    }
    let mut worst_eq = 0.0f64;
    for _ in 0..5 {
        let params = random_params(&mut rng);
        let x = random_unit(cfg.elements_per_pol(), &mut rng);
        let c = dual_pol_beamformer(&x, &params).unwrap();
        let i = integral_reference_gain(&c, &params, &cfg, 128).unwrap();
        worst_eq = worst_eq.max((i / budget - 1.0).abs());
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1.005 && worst_eq <= 0.005 && elapsed < Duration::from_secs(30),
        format!(
            "random max integral/bound = {worst:.6}, equality family max rel err = {worst_eq:.2e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn gain_area_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let cfg = ArrayConfig::new(rng.random_range(1..=32), rng.random_range(1..=32)).unwrap();
        let grid = RegionGrid::new(rng.random_range(1..=12), rng.random_range(1..=12), 1, 1).unwrap();
        let product = IdealGain::new(&grid, &cfg).value() * grid.region_area();
        worst = worst.max((product - integral_budget(&cfg)).abs() / integral_budget(&cfg));
    }
    outcome(worst <= 1e-12, format!("max relative error of G*area = {worst:.2e} over 20 tuples"))
}

fn design_example_se_band() -> Outcome {
    let cfg = ArrayConfig::new(8, 16).unwrap();
    let grid = RegionGrid::new(6, 6, 7, 7).unwrap();
    let region = Region::new(3, 3);
    let designer = Designer::new(cfg, grid, nominal(), DesignSettings::default()).unwrap();
    let proposed = designer.design_region_codeword(region).unwrap().se;
    let center = upa_response_unpaired(grid.region_center(region), &cfg);
    let baseline = designer
        .squared_error_of(region, &dual_pol_beamformer(&center, &nominal()).unwrap())
        .unwrap();
    let in_band = (1.0..=1.9).contains(&proposed);
    let ordered = proposed < baseline;
    outcome(
        in_band && ordered,
        format!(
            "proposed SE = {proposed:.4} (band [1.0, 1.9]: {}), baseline SE = {baseline:.4} (proposed < baseline: {})",
            if in_band { "in" } else { "out" },
            ordered
        ),
    )
}

fn min_gain_ordering() -> Outcome {
    let cfg = ArrayConfig::new(6, 10).unwrap();
    let grid = RegionGrid::new(5, 5, 7, 7).unwrap();
    let p = nominal();
    let designer = Designer::new(cfg, grid, p, DesignSettings::default()).unwrap();
    let proposed = Codebook::design(&designer).unwrap();
    let baseline = baseline_dft_codebook(&grid, &p, &cfg).unwrap();
    let mut losing = Vec::new();
    for (a, b) in proposed.entries.iter().zip(&baseline.entries) {
        let ga = min_region_gain(&a.codeword, a.region, &grid, &p, &cfg).unwrap();
        let gb = min_region_gain(&b.codeword, b.region, &grid, &p, &cfg).unwrap();
        if ga.partial_cmp(&gb) != Some(std::cmp::Ordering::Greater) {
            losing.push(format!("{}: {ga:.4} vs {gb:.4}", a.region));
        }
    }
    let n = proposed.len();
    let detail = if losing.is_empty() {
        format!("proposed min gain exceeds baseline in all {n} regions")
    } else {
        format!(
            "proposed min gain <= baseline in {}/{n} regions, e.g. {}",
            losing.len(),
            losing.iter().take(3).cloned().collect::<Vec<_>>().join("; ")
        )
    };
    outcome(losing.is_empty(), detail)
}

fn narrow_beam_min_gain_example() -> Outcome {
    let cfg = ArrayConfig::new(8, 16).unwrap();
    let grid = RegionGrid::new(6, 6, 7, 7).unwrap();
    let p = nominal();
    let region = Region::new(3, 3);
    let designer = Designer::new(cfg, grid, p, DesignSettings::default()).unwrap();
    let proposed = designer.design_region_codeword(region).unwrap().c;
    let narrow = dual_pol_beamformer(&upa_response_unpaired(grid.region_center(region), &cfg), &p).unwrap();
    let a = min_region_gain(&proposed, region, &grid, &p, &cfg).unwrap();
    let b = min_region_gain(&narrow, region, &grid, &p, &cfg).unwrap();
    outcome(b < a, format!("region (3,3) min gain: proposed {a:.6}, narrow beam {b:.6}"))
}

fn rate_ordering() -> Outcome {
    let start = Instant::now();
    let cfg = ArrayConfig::new(4, 8).unwrap();
    let grid = RegionGrid::new(5, 4, 7, 7).unwrap();
    let p = nominal();
    let designer = Designer::new(cfg, grid, p, DesignSettings::default()).unwrap();
    let proposed = Codebook::design(&designer).unwrap();
    let baseline = baseline_dft_codebook(&grid, &p, &cfg).unwrap();
    let sim = SimulationConfig {
        snr_db_grid: (0..=6).map(|k| 5.0 * k as f64).collect(),
        n_trials: 2000,
        rng_seed: 2024,
        ..SimulationConfig::default()
    };
    let a = simulate_rate(&proposed, "proposed", &sim).unwrap();
    let b = simulate_rate(&baseline, "baseline", &sim).unwrap();
    let elapsed = start.elapsed();

    let ordered = a.mean_rate.iter().zip(&b.mean_rate).all(|(x, y)| x >= y);
    let bounded = |c: &dpbeam::simulation::RateCurve| {
        (0..c.snr_db.len()).all(|k| c.mean_rate[k] <= c.upper_bound[k] + 3.0 * c.std_err[k])
    };
    let gap: Vec<f64> = a.mean_rate.iter().zip(&b.mean_rate).map(|(x, y)| x - y).collect();
    let gap_grows = gap.windows(2).all(|w| w[1] >= w[0]);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(",");
    outcome(
        ordered && bounded(&a) && bounded(&b) && gap_grows && elapsed < Duration::from_secs(300),
        format!(
            "proposed=[{}] baseline=[{}] bound=[{}] gap=[{}] (ordered {ordered}, bounded {}, gap non-decreasing {gap_grows}), {:.1}s",
            fmt(&a.mean_rate),
            fmt(&b.mean_rate),
            fmt(&a.upper_bound),
            fmt(&gap),
            bounded(&a) && bounded(&b),
            elapsed.as_secs_f64()
        ),
    )
}

fn omp_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(106);

    let cfg = ArrayConfig::new(3, 3).unwrap();
    let d = build_dictionary(&cfg, 2, 2, 4).unwrap();
    let mut one_atom = true;
    for j in [0, 17, 101, d.len() - 1] {
        let t = d.columns.column(j).into_owned();
        let o = omp_factorize(&t, &d, 1).unwrap();
        one_atom &= o.selected == vec![j] && o.residual_norms[0] < 1e-10;
    }

    let cfg = ArrayConfig::new(4, 4).unwrap();
    let d = build_dictionary(&cfg, 1, 1, 2).unwrap();
    let mut worst_sparse = 0.0f64;
    for _ in 0..20 {
        let mut idx: Vec<usize> = Vec::new();
        while idx.len() < 3 {
            let j = rng.random_range(0..d.len());
            if idx.iter().all(|k| k / 2 != j / 2) {
                idx.push(j);
            }
        }
        let t = d.columns.select_columns(&idx) * random_unit(3, &mut rng);
        let t = &t / Complex64::from(t.norm());
        worst_sparse = worst_sparse.max(omp_factorize(&t, &d, 3).unwrap().residual_norms[2]);
    }

    let cfg = ArrayConfig::new(4, 2).unwrap();
    let d = build_dictionary(&cfg, 2, 2, 4).unwrap();
    let modulus = 1.0 / (cfg.total_elements() as f64).sqrt();
    let mut monotone = true;
    let mut worst_mod = 0.0f64;
    for _ in 0..100 {
        let t = random_unit(cfg.total_elements(), &mut rng);
        let o = omp_factorize(&t, &d, 6).unwrap();
        monotone &= o.residual_norms.windows(2).all(|w| w[1] <= w[0]);
        for z in o.beamformer.f_analog.iter() {
            worst_mod = worst_mod.max((z.norm() - modulus).abs());
        }
    }
    outcome(
        one_atom && worst_sparse < 1e-8 && monotone && worst_mod <= 1e-12,
        format!(
            "one-atom {one_atom}, 3-sparse max residual {worst_sparse:.2e}, monotone {monotone}, max |modulus err| {worst_mod:.2e}"
        ),
    )
}

fn oracle_equivalences() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(107);

    let mut align_ok = true;
    let cws: Vec<_> = (0..15).map(|_| random_unit(24, &mut rng)).collect();
    for _ in 0..200 {
        let h = DVector::from_fn(24, |_, _| complex_gaussian(&mut rng));
        let got = beam_align(&h, &cws, 3.0, false, &mut rng).unwrap();
        let gains: Vec<f64> = cws.iter().map(|c| h.dotc(c).norm_sqr()).collect();
        let mut best = 0;
        for (i, g) in gains.iter().enumerate() {
            if *g > gains[best] {
                best = i;
            }
        }
        align_ok &= got == best;
    }

    let cfg = ArrayConfig::new(3, 5).unwrap();
    let grid = RegionGrid::new(3, 2, 2, 3).unwrap();
    let sm = build_steering_matrices(&grid, &cfg);
    let mut worst_pattern = 0.0f64;
    for _ in 0..10 {
        let params = random_params(&mut rng);
        let c = random_unit(cfg.total_elements(), &mut rng);
        let pv = pattern_vector(&c, &sm, &params, &cfg).unwrap();
        for region in grid.regions() {
            let idx = grid.region_section_indices(region);
            for (sf, j) in section_centers(region, &grid).unwrap().into_iter().zip(idx) {
                worst_pattern = worst_pattern.max((pv.gains[j] - reference_gain(sf, &c, &params, &cfg).unwrap()).abs());
            }
        }
    }

    let mut worst_omega = 0.0f64;
    for _ in 0..5 {
        let params = random_params(&mut rng);
        let basis = omega_gamma_diagnostics(&params, &cfg);
        let coeffs = random_unit(cfg.elements_per_pol(), &mut rng);
        let w = rotate(params.phi, &(&basis.omega * coeffs));
        let w = &w / Complex64::from(w.norm());
        let pv = pattern_vector(&w, &sm, &params, &cfg).unwrap();
        worst_omega = worst_omega.max(pv.gains.iter().cloned().fold(0.0, f64::max));
    }

    outcome(
        align_ok && worst_pattern <= 1e-12 && worst_omega <= 1e-12,
        format!(
            "noise-free align = argmax {align_ok}, pattern vs pointwise max err {worst_pattern:.2e}, Omega max gain {worst_omega:.2e}"
        ),
    )
}

fn run_cli(args: &[&str], out: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_dpbeam"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let overrides = ["--seed", "77", "--override", "simulation.n_trials=300"];
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let dir = root.path().join(run);
        let ok = run_cli(&[&["design"][..], &overrides].concat(), &dir)
            && run_cli(&[&["design", "--baseline"][..], &overrides].concat(), &dir)
            && run_cli(
                &[
                    &[
                        "simulate",
                        dir.join("codebook_proposed.bin").to_str().unwrap(),
                        dir.join("codebook_baseline.bin").to_str().unwrap(),
                    ][..],
                    &overrides,
                ]
                .concat(),
                &dir,
            );
        if !ok {
            return outcome(false, format!("CLI run {run} failed"));
        }
        files.push(dir);
    }
    let names = [
        "codebook_proposed.bin",
        "codebook_proposed.bin.json",
        "codebook_baseline.bin",
        "codebook_baseline.bin.json",
        "rates.csv",
    ];
    let differing: Vec<&str> = names
        .iter()
        .copied()
        .filter(|n| std::fs::read(files[0].join(n)).ok() != std::fs::read(files[1].join(n)).ok())
        .collect();
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} output files byte-identical across two runs", names.len())
        } else {
            format!("differing outputs: {}", differing.join(", "))
        },
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("integral_bound", integral_bound),
        ("gain_area_identity", gain_area_identity),
        ("design_example_se_band", design_example_se_band),
        ("min_gain_ordering", min_gain_ordering),
        ("min_gain_narrow_beam_example", narrow_beam_min_gain_example),
        ("rate_ordering_and_bound", rate_ordering),
        ("omp_correctness", omp_correctness),
        ("oracle_equivalences", oracle_equivalences),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        println!("{} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.passed);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
