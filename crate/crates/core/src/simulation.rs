//! Beam alignment, region gain metrics and Monte-Carlo rate evaluation.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::array_geometry::{build_steering_matrices, ArrayConfig, Region, RegionGrid};
use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::ideal_pattern::{pattern_vector, rate_upper_bound, PatternVector};
use crate::polarization_channel::{complex_gaussian, db_to_linear, sample_channel, ChannelConfig, PolarizationParams};

fn default_snr_grid() -> Vec<f64> {
    (0..=6).map(|k| 5.0 * k as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    /// `P / sigma^2` in dB; `-inf` maps to zero.
    pub snr_db_grid: Vec<f64>,
    pub n_trials: usize,
    pub channel: ChannelConfig,
    /// Adds unit-variance noise to every training measurement.
    pub noisy_training: bool,
    pub rng_seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            snr_db_grid: default_snr_grid(),
            n_trials: 2000,
            channel: ChannelConfig::default(),
            noisy_training: true,
            rng_seed: 1,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::invalid("n_trials must be at least 1"));
        }
        if self.snr_db_grid.is_empty() {
            return Err(Error::invalid("snr_db_grid must be non-empty"));
        }
        if self.snr_db_grid.iter().any(|s| s.is_nan() || *s == f64::INFINITY) {
            return Err(Error::invalid("snr_db_grid entries must be finite or -inf"));
        }
        self.channel.validate()
    }

    /// Short hex digest identifying this configuration.
    pub fn config_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(format!("{self:?}").as_bytes());
        hasher.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Index of the largest value; ties go to the lowest index.
fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

/// Selects the codeword maximizing `|sqrt(snr) h^H c_i + n_i|^2` for given
/// per-codeword noise samples (pass an empty slice for noise-free training).
pub fn beam_align_with_noise(
    h: &DVector<Complex64>,
    codewords: &[DVector<Complex64>],
    snr_linear: f64,
    noise: &[Complex64],
) -> Result<usize> {
    if codewords.is_empty() {
        return Err(Error::invalid("codebook is empty"));
    }
    if !noise.is_empty() && noise.len() != codewords.len() {
        return Err(Error::LengthMismatch {
            expected: codewords.len(),
            found: noise.len(),
        });
    }
    let amp = Complex64::from(snr_linear.sqrt());
    Ok(argmax(codewords.iter().enumerate().map(|(i, c)| {
        let y = amp * h.dotc(c);
        let n = noise.get(i).copied().unwrap_or_default();
        (y + n).norm_sqr()
    })))
}

/// Beam alignment by received training power; returns the codeword position.
pub fn beam_align<R: Rng + ?Sized>(
    h: &DVector<Complex64>,
    codewords: &[DVector<Complex64>],
    snr_linear: f64,
    noisy: bool,
    rng: &mut R,
) -> Result<usize> {
    let noise: Vec<Complex64> = if noisy {
        (0..codewords.len()).map(|_| complex_gaussian(rng)).collect()
    } else {
        Vec::new()
    };
    beam_align_with_noise(h, codewords, snr_linear, &noise)
}

/// [`beam_align`] over a codebook, returning the selected region.
pub fn beam_align_region<R: Rng + ?Sized>(
    h: &DVector<Complex64>,
    codebook: &Codebook,
    snr_linear: f64,
    noisy: bool,
    rng: &mut R,
) -> Result<Region> {
    let idx = beam_align(h, &codebook.codewords(), snr_linear, noisy, rng)?;
    Ok(codebook.entries[idx].region)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionGainStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl RegionGainStats {
    /// Max-to-min ratio; infinite when the minimum is zero.
    pub fn ripple(&self) -> f64 {
        if self.min > 0.0 {
            self.max / self.min
        } else {
            f64::INFINITY
        }
    }
}

pub fn region_gain_stats(pattern: &PatternVector, region: Region) -> Result<RegionGainStats> {
    pattern.grid.check_region(region)?;
    let gains = pattern.region_gains(region);
    let min = gains.iter().copied().fold(f64::INFINITY, f64::min);
    let max = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = gains.iter().sum::<f64>() / gains.len() as f64;
    Ok(RegionGainStats { min, max, mean })
}

fn codeword_region_stats(
    c: &DVector<Complex64>,
    region: Region,
    grid: &RegionGrid,
    params: &PolarizationParams,
    cfg: &ArrayConfig,
) -> Result<RegionGainStats> {
    grid.check_region(region)?;
    let sm = build_steering_matrices(grid, cfg);
    region_gain_stats(&pattern_vector(c, &sm, params, cfg)?, region)
}

/// Minimum section gain of `c` inside `region`.
pub fn min_region_gain(
    c: &DVector<Complex64>,
    region: Region,
    grid: &RegionGrid,
    params: &PolarizationParams,
    cfg: &ArrayConfig,
) -> Result<f64> {
    Ok(codeword_region_stats(c, region, grid, params, cfg)?.min)
}

/// Max-to-min section gain ratio of `c` inside `region`.
pub fn ripple(
    c: &DVector<Complex64>,
    region: Region,
    grid: &RegionGrid,
    params: &PolarizationParams,
    cfg: &ArrayConfig,
) -> Result<f64> {
    Ok(codeword_region_stats(c, region, grid, params, cfg)?.ripple())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub codebook_id: String,
    pub config_hash: String,
    pub seed: u64,
    pub n_trials: usize,
    pub snr_db: Vec<f64>,
    pub mean_rate: Vec<f64>,
    /// Standard error of each mean rate.
    pub std_err: Vec<f64>,
    pub upper_bound: Vec<f64>,
    pub mean_h_norm_sq: f64,
}

struct TrialOutcome {
    rates: Vec<f64>,
    h_norm_sq: f64,
}

fn run_trial(
    t: usize,
    codewords: &[DVector<Complex64>],
    snrs: &[f64],
    sim: &SimulationConfig,
    params: &PolarizationParams,
    cfg: &ArrayConfig,
) -> Result<TrialOutcome> {
    let mut channel_rng = ChaCha8Rng::seed_from_u64(sim.rng_seed);
    channel_rng.set_stream(2 * t as u64);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(sim.rng_seed);
    noise_rng.set_stream(2 * t as u64 + 1);

    let realization = sample_channel(&sim.channel, params, cfg, &mut channel_rng);
    let h = &realization.h;
    // The same noise samples serve every SNR point.
    let noise: Vec<Complex64> = if sim.noisy_training {
        (0..codewords.len()).map(|_| complex_gaussian(&mut noise_rng)).collect()
    } else {
        Vec::new()
    };
    let rates = snrs
        .iter()
        .map(|&snr| {
            let idx = beam_align_with_noise(h, codewords, snr, &noise)?;
            Ok((snr * h.dotc(&codewords[idx]).norm_sqr()).ln_1p() / std::f64::consts::LN_2)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialOutcome {
        rates,
        h_norm_sq: h.norm_squared(),
    })
}

/// Monte-Carlo mean rate `E[log2(1 + snr |h^H c|^2)]` after beam alignment.
///
/// Trial `t` draws its channel from stream `2t` and its training noise from
/// stream `2t + 1` of the master seed, so all SNR points and all codebooks of
/// equal size see the same random numbers.
pub fn simulate_rate_with(
    codewords: &[DVector<Complex64>],
    codebook_id: &str,
    sim: &SimulationConfig,
    grid: &RegionGrid,
    params: &PolarizationParams,
    cfg: &ArrayConfig,
) -> Result<RateCurve> {
    sim.validate()?;
    params.validate()?;
    cfg.validate()?;
    grid.validate()?;
    if codewords.is_empty() {
        return Err(Error::invalid("codebook is empty"));
    }
    if let Some(c) = codewords.iter().find(|c| c.len() != cfg.total_elements()) {
        return Err(Error::LengthMismatch {
            expected: cfg.total_elements(),
            found: c.len(),
        });
    }
    let snrs: Vec<f64> = sim.snr_db_grid.iter().map(|&d| db_to_linear(d)).collect();
    let outcomes = (0..sim.n_trials)
        .into_par_iter()
        .map(|t| run_trial(t, codewords, &snrs, sim, params, cfg))
        .collect::<Result<Vec<_>>>()?;

    let n = sim.n_trials as f64;
    let mut mean_rate = Vec::with_capacity(snrs.len());
    let mut std_err = Vec::with_capacity(snrs.len());
    for k in 0..snrs.len() {
        let mean = outcomes.iter().map(|o| o.rates[k]).sum::<f64>() / n;
        let var = if sim.n_trials > 1 {
            outcomes.iter().map(|o| (o.rates[k] - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        mean_rate.push(mean);
        std_err.push((var / n).sqrt());
    }
    let mean_h_norm_sq = outcomes.iter().map(|o| o.h_norm_sq).sum::<f64>() / n;
    let upper_bound = snrs
        .iter()
        .map(|&snr| rate_upper_bound(snr, mean_h_norm_sq, grid, cfg))
        .collect();

    Ok(RateCurve {
        codebook_id: codebook_id.to_string(),
        config_hash: sim.config_hash(),
        seed: sim.rng_seed,
        n_trials: sim.n_trials,
        snr_db: sim.snr_db_grid.clone(),
        mean_rate,
        std_err,
        upper_bound,
        mean_h_norm_sq,
    })
}

/// [`simulate_rate_with`] using the codebook's own array, grid and
/// polarization parameters.
pub fn simulate_rate(codebook: &Codebook, codebook_id: &str, sim: &SimulationConfig) -> Result<RateCurve> {
    simulate_rate_with(
        &codebook.codewords(),
        codebook_id,
        sim,
        &codebook.grid,
        &codebook.params,
        &codebook.array,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_geometry::upa_response_unpaired;
    use crate::codebook::baseline_dft_codebook;
    use crate::codeword_design::{DesignSettings, Designer};
    use crate::ideal_pattern::{ideal_pattern_vector, IdealGain};
    use crate::polarization_channel::{los_component, LosGains};
    use std::f64::consts::FRAC_PI_4;

    fn params() -> PolarizationParams {
        PolarizationParams::new(0.3, FRAC_PI_4, Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)).unwrap()
    }

    fn small_setup() -> (ArrayConfig, RegionGrid) {
        (ArrayConfig::new(4, 4).unwrap(), RegionGrid::new(2, 2, 3, 3).unwrap())
    }

    fn random_codewords(n: usize, m: usize, seed: u64) -> Vec<DVector<Complex64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let v = DVector::from_fn(m, |_, _| complex_gaussian(&mut rng));
                let norm = v.norm();
                v / Complex64::from(norm)
            })
            .collect()
    }

    #[test]
    fn noise_free_alignment_is_exhaustive_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cws = random_codewords(12, 32, 4);
        for _ in 0..50 {
            let h = DVector::from_fn(32, |_, _| complex_gaussian(&mut rng));
            let got = beam_align(&h, &cws, 10.0, false, &mut rng).unwrap();
            let gains: Vec<f64> = cws.iter().map(|c| h.dotc(c).norm_sqr()).collect();
            let best = gains.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(gains[got], best);
            assert_eq!(gains.iter().position(|&g| g == best).unwrap(), got);
        }
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let c = random_codewords(1, 8, 1).remove(0);
        let cws = vec![c.clone(), c.clone(), c];
        let h = DVector::from_element(8, Complex64::new(1.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(beam_align(&h, &cws, 1.0, false, &mut rng).unwrap(), 0);
    }

    #[test]
    fn single_codeword_always_selected() {
        let (cfg, grid) = small_setup();
        let mut cb = baseline_dft_codebook(&grid, &params(), &cfg).unwrap();
        cb.entries.truncate(1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let h = DVector::from_fn(32, |_, _| complex_gaussian(&mut rng));
            assert_eq!(beam_align_region(&h, &cb, 1.0, true, &mut rng).unwrap(), Region::new(1, 1));
        }
    }

    #[test]
    fn noise_free_selection_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cws = random_codewords(9, 16, 6);
        for _ in 0..30 {
            let h = DVector::from_fn(16, |_, _| complex_gaussian(&mut rng));
            let a = beam_align(&h, &cws, 1.0, false, &mut rng).unwrap();
            let b = beam_align(&(&h * Complex64::from(7.5)), &cws, 1.0, false, &mut rng).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn empty_codebook_rejected() {
        let h = DVector::from_element(4, Complex64::new(1.0, 0.0));
        assert!(beam_align_with_noise(&h, &[], 1.0, &[]).is_err());
    }

    #[test]
    fn los_at_region_center_selects_that_region() {
        let cfg = ArrayConfig::new(8, 16).unwrap();
        let grid = RegionGrid::new(6, 6, 7, 7).unwrap();
        let p = params();
        let designer = Designer::new(cfg, grid, p, DesignSettings::default()).unwrap();
        let cb = Codebook::design(&designer).unwrap();
        let cws = cb.codewords();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for region in [Region::new(3, 3), Region::new(1, 6), Region::new(5, 2)] {
            let sf = grid.region_center(region);
            let a = upa_response_unpaired(sf, &cfg);
            let rho = crate::polarization_channel::stack_weighted(p.rho_pv(), p.rho_ph(), &a);
            let h = crate::polarization_channel::rotate(p.phi, &rho);
            let gains: Vec<f64> = cws.iter().map(|c| h.dotc(c).norm_sqr()).collect();
            let oracle = argmax(gains.iter().copied());
            let got = beam_align(&h, &cws, 1.0, false, &mut rng).unwrap();
            assert_eq!(got, oracle);
            assert_eq!(cb.entries[got].region, region);
        }
    }

    #[test]
    fn ideal_pattern_stats() {
        let (cfg, grid) = small_setup();
        let region = Region::new(2, 1);
        let ideal = ideal_pattern_vector(region, &grid, &cfg).unwrap();
        let s = region_gain_stats(&ideal, region).unwrap();
        let g = IdealGain::new(&grid, &cfg).value();
        assert_eq!(s.min, g);
        assert_eq!(s.ripple(), 1.0);
    }

    #[test]
    fn ripple_at_least_one() {
        let (cfg, grid) = small_setup();
        for (i, c) in random_codewords(10, 32, 8).iter().enumerate() {
            let region = Region::new(1 + i % 2, 1 + (i / 2) % 2);
            assert!(ripple(c, region, &grid, &params(), &cfg).unwrap() >= 1.0);
        }
    }

    fn small_sim(seed: u64) -> SimulationConfig {
        SimulationConfig {
            snr_db_grid: vec![f64::NEG_INFINITY, 0.0, 10.0, 20.0],
            n_trials: 64,
            rng_seed: seed,
            ..SimulationConfig::default()
        }
    }

    #[test]
    fn zero_snr_gives_zero_rate() {
        let (cfg, grid) = small_setup();
        let cb = baseline_dft_codebook(&grid, &params(), &cfg).unwrap();
        let curve = simulate_rate(&cb, "baseline", &small_sim(1)).unwrap();
        assert_eq!(curve.mean_rate[0], 0.0);
        assert_eq!(curve.upper_bound[0], 0.0);
    }

    #[test]
    fn rate_monotone_in_snr() {
        let (cfg, grid) = small_setup();
        let cb = baseline_dft_codebook(&grid, &params(), &cfg).unwrap();
        let curve = simulate_rate(&cb, "baseline", &small_sim(2)).unwrap();
        for w in curve.mean_rate.windows(2) {
            assert!(w[1] >= w[0], "{:?}", curve.mean_rate);
        }
    }

    #[test]
    fn rate_deterministic_under_seed() {
        let (cfg, grid) = small_setup();
        let cb = baseline_dft_codebook(&grid, &params(), &cfg).unwrap();
        let a = simulate_rate(&cb, "b", &small_sim(11)).unwrap();
        let b = simulate_rate(&cb, "b", &small_sim(11)).unwrap();
        assert_eq!(a, b);
        let c = simulate_rate(&cb, "b", &small_sim(12)).unwrap();
        assert_ne!(a.mean_rate, c.mean_rate);
    }

    #[test]
    fn invalid_sim_config_rejected() {
        let mut s = small_sim(1);
        s.n_trials = 0;
        assert!(s.validate().is_err());
        let mut s = small_sim(1);
        s.snr_db_grid.clear();
        assert!(s.validate().is_err());
        let mut s = small_sim(1);
        s.snr_db_grid.push(f64::NAN);
        assert!(s.validate().is_err());
    }

    #[test]
    fn los_only_channel_rate_matches_direct_gain() {
        let (cfg, grid) = small_setup();
        let p = params();
        let cb = baseline_dft_codebook(&grid, &p, &cfg).unwrap();
        let channel = ChannelConfig {
            k_factor: 1e300,
            n_nlos: 0,
            phi_jitter: 0.0,
            los_angles: Some((0.2, -0.1)),
            los_gains: LosGains::Known,
            ..ChannelConfig::default()
        };
        let sim = SimulationConfig {
            snr_db_grid: vec![10.0],
            n_trials: 3,
            channel,
            noisy_training: false,
            rng_seed: 0,
        };
        let curve = simulate_rate(&cb, "b", &sim).unwrap();
        let h = los_component(0.2, -0.1, &p, &cfg).unwrap() * Complex64::from((cfg.elements_per_pol() as f64).sqrt());
        let best = cb.codewords().iter().map(|c| h.dotc(c).norm_sqr()).fold(0.0, f64::max);
        let expected = (10.0 * best).ln_1p() / std::f64::consts::LN_2;
        assert!((curve.mean_rate[0] - expected).abs() < 1e-9, "{} vs {expected}", curve.mean_rate[0]);
    }
}
