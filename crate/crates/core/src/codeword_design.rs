//! Squared-error codeword design.
//!
//! For each region the designer enumerates pairs of unit-modulus phase
//! vectors `(q_h, q_v)`, forms the closed-form single-polarization beam
//! `(D_{h,p} q_h) (x) (D_{v,q} q_v)`, lifts it to both polarizations with
//! `b R(phi) ([rho_pv; rho_ph] (x) c_single)`, factorizes the result into a
//! hybrid beamformer, and keeps the hybrid codeword whose pattern vector is
//! closest to the flat ideal pattern.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array_geometry::{build_steering_matrices, ArrayConfig, Region, RegionGrid, SteeringMatrices};
use crate::error::{Error, Result};
use crate::hybrid_factorization::{build_dictionary, omp_factorize, AnalogDictionary, HybridBeamformer};
use crate::ideal_pattern::{
    check_unit, effective_single_pol, ideal_pattern_vector, pattern_vector, section_response, IdealGain,
    PatternVector,
};
use crate::polarization_channel::{rotate, stack_weighted, PolarizationParams};

/// A pair of unit-modulus phase vectors and its position in the enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVectorCandidate {
    pub q_lh: DVector<Complex64>,
    pub q_lv: DVector<Complex64>,
    /// Zero-based `(l_h index, l_v index)` into the candidate lists.
    pub index: (usize, usize),
}

/// Family of phase vectors enumerated per axis.
pub trait CandidateSet: Send + Sync {
    fn vectors(&self, len: usize) -> Vec<DVector<Complex64>>;
}

/// Linear phase ramps `e^{j theta (i-1)}` with slopes
/// `theta = -pi + 2 pi l / B`, `l = 1..=B`.
#[derive(Debug, Clone, Copy)]
pub struct PhaseRamps {
    pub b_grid: usize,
}

impl CandidateSet for PhaseRamps {
    fn vectors(&self, len: usize) -> Vec<DVector<Complex64>> {
        candidate_phase_vectors(self.b_grid, len)
    }
}

pub fn candidate_phase_vectors(b_grid: usize, len: usize) -> Vec<DVector<Complex64>> {
    (1..=b_grid)
        .map(|l| {
            let slope = -PI + 2.0 * PI * l as f64 / b_grid as f64;
            DVector::from_fn(len, |i, _| Complex64::from_polar(1.0, slope * i as f64))
        })
        .collect()
}

/// Normalized `(D_{h,p} q_h) (x) (D_{v,q} q_v)`.
pub fn single_pol_beamformer(
    cand: &PhaseVectorCandidate,
    region: Region,
    sm: &SteeringMatrices,
) -> Result<DVector<Complex64>> {
    sm.grid.check_region(region)?;
    if cand.q_lh.len() != sm.grid.l_h || cand.q_lv.len() != sm.grid.l_v {
        return Err(Error::LengthMismatch {
            expected: sm.grid.l_h,
            found: cand.q_lh.len(),
        });
    }
    let u = (sm.region_block_h(region.p) * &cand.q_lh).kronecker(&(sm.region_block_v(region.q) * &cand.q_lv));
    let n = u.norm();
    if !(n > 1e-14) {
        return Err(Error::Degenerate(format!(
            "candidate {:?} cancels the region steering vectors",
            cand.index
        )));
    }
    Ok(u / Complex64::from(n))
}

/// `b R(phi) ([rho_pv; rho_ph] (x) c_single)`.
pub fn dual_pol_beamformer(c_single: &DVector<Complex64>, params: &PolarizationParams) -> Result<DVector<Complex64>> {
    let b = params.norm_b();
    if !b.is_finite() {
        return Err(Error::InvalidParams("effective polarization gains are both zero".into()));
    }
    let n = c_single.norm();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("single-pol beamformer norm {n} is not 1")));
    }
    Ok(rotate(
        params.phi,
        &stack_weighted(params.rho_pv() * b, params.rho_ph() * b, c_single),
    ))
}

/// Ideal complex amplitude `sqrt(G) (e_p (x) q_h (x) e_q (x) q_v)` laid out in
/// `D` column order.
pub fn ideal_amplitude(
    cand: &PhaseVectorCandidate,
    region: Region,
    grid: &RegionGrid,
    cfg: &ArrayConfig,
) -> Result<DVector<Complex64>> {
    grid.check_region(region)?;
    let sg = IdealGain::new(grid, cfg).value().sqrt();
    let mut t = DVector::zeros(grid.total_sections());
    let h0 = (region.p - 1) * grid.l_h;
    let v0 = (region.q - 1) * grid.l_v;
    for i in 0..grid.l_h {
        for k in 0..grid.l_v {
            t[grid.section_index(h0 + i, v0 + k)] = cand.q_lh[i] * cand.q_lv[k] * sg;
        }
    }
    Ok(t)
}

/// Complex section response `b ([rho_pv; rho_ph] (x) D)^H R(phi)^H c`.
pub fn amplitude_response(
    c: &DVector<Complex64>,
    sm: &SteeringMatrices,
    params: &PolarizationParams,
    cfg: &ArrayConfig,
) -> DVector<Complex64> {
    section_response(&effective_single_pol(c, params), sm, cfg)
}

/// Least-squares scale `gamma = r^H t / ||r||^2` aligning a response `r` to a
/// target amplitude `t`.
pub fn gamma_from_response(response: &DVector<Complex64>, target: &DVector<Complex64>) -> Result<Complex64> {
    if response.len() != target.len() {
        return Err(Error::LengthMismatch {
            expected: target.len(),
            found: response.len(),
        });
    }
    let energy = response.norm_squared();
    if !(energy > 0.0) {
        return Err(Error::Degenerate("codeword has no pattern response".into()));
    }
    Ok(response.dotc(target) / energy)
}

pub fn gamma_constant(
    c: &DVector<Complex64>,
    region: Region,
    sm: &SteeringMatrices,
    params: &PolarizationParams,
    cfg: &ArrayConfig,
    cand: &PhaseVectorCandidate,
) -> Result<Complex64> {
    let r = amplitude_response(c, sm, params, cfg);
    let t = ideal_amplitude(cand, region, &sm.grid, cfg)?;
    gamma_from_response(&r, &t)
}

/// Generators of the zero-gain set Omega and its orthogonal complement Gamma,
/// both in the effective (`R(phi)^H c`) domain. Column `l` uses the unit
/// vector `e_l`.
#[derive(Debug, Clone)]
pub struct OmegaGammaBasis {
    pub omega: DMatrix<Complex64>,
    pub gamma: DMatrix<Complex64>,
}

pub fn omega_gamma_diagnostics(params: &PolarizationParams, cfg: &ArrayConfig) -> OmegaGammaBasis {
    let n = cfg.elements_per_pol();
    let (pv, ph) = (params.rho_pv(), params.rho_ph());
    let zero = Complex64::from(0.0);
    let omega = DMatrix::from_fn(2 * n, n, |i, l| match i {
        i if i == l => -ph.conj(),
        i if i == n + l => pv.conj(),
        _ => zero,
    });
    let gamma = DMatrix::from_fn(2 * n, n, |i, l| match i {
        i if i == l => pv,
        i if i == n + l => ph,
        _ => zero,
    });
    OmegaGammaBasis { omega, gamma }
}

/// Numerical rank from singular values.
pub fn numerical_rank(m: &DMatrix<Complex64>, tol: f64) -> usize {
    let sv = m.clone().singular_values();
    let top = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|s| **s > tol * top.max(1.0)).count()
}

pub fn squared_error(ideal: &PatternVector, other: &PatternVector) -> Result<f64> {
    if ideal.len() != other.len() {
        return Err(Error::LengthMismatch {
            expected: ideal.len(),
            found: other.len(),
        });
    }
    if ideal.grid != other.grid {
        return Err(Error::invalid("pattern vectors use different region grids"));
    }
    Ok(ideal
        .gains
        .iter()
        .zip(&other.gains)
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// Design knobs shared by every region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignSettings {
    /// Phase-grid size per axis; `b_grid^2` candidate pairs per region.
    pub b_grid: usize,
    /// RF chains.
    pub n_rf: usize,
    pub oversample_h: usize,
    pub oversample_v: usize,
    pub pol_phases: usize,
}

impl Default for DesignSettings {
    fn default() -> Self {
        DesignSettings {
            b_grid: 3,
            n_rf: 4,
            oversample_h: 2,
            oversample_v: 2,
            pol_phases: 4,
        }
    }
}

impl DesignSettings {
    pub fn validate(&self) -> Result<()> {
        if self.b_grid == 0 {
            return Err(Error::invalid("b_grid must be >= 1"));
        }
        if self.n_rf == 0 {
            return Err(Error::invalid("n_rf must be >= 1"));
        }
        if self.oversample_h == 0 || self.oversample_v == 0 || self.pol_phases == 0 {
            return Err(Error::invalid("dictionary oversampling and pol_phases must be >= 1"));
        }
        Ok(())
    }
}

/// Hybrid codeword chosen for one region.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignedCodeword {
    pub region: Region,
    pub c: DVector<Complex64>,
    pub hybrid: HybridBeamformer,
    pub candidate: PhaseVectorCandidate,
    /// Squared error of the hybrid codeword's pattern against the ideal.
    pub se: f64,
}

/// Everything computed for one candidate pair.
#[derive(Debug, Clone)]
pub struct CandidateEvaluation {
    pub candidate: PhaseVectorCandidate,
    pub c_single: DVector<Complex64>,
    pub c_dual: DVector<Complex64>,
    pub hybrid: HybridBeamformer,
    pub hybrid_codeword: DVector<Complex64>,
    pub se_closed_form: f64,
    pub se_hybrid: f64,
}

/// Precomputed state for designing every region of one configuration.
pub struct Designer {
    pub array: ArrayConfig,
    pub grid: RegionGrid,
    pub params: PolarizationParams,
    pub settings: DesignSettings,
    pub steering: SteeringMatrices,
    pub dictionary: AnalogDictionary,
    candidates: Box<dyn CandidateSet>,
}

impl std::fmt::Debug for Designer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Designer")
            .field("array", &self.array)
            .field("grid", &self.grid)
            .field("params", &self.params)
            .field("settings", &self.settings)
            .finish_non_exhaustive()
    }
}

impl Designer {
    pub fn new(
        array: ArrayConfig,
        grid: RegionGrid,
        params: PolarizationParams,
        settings: DesignSettings,
    ) -> Result<Self> {
        array.validate()?;
        grid.validate()?;
        params.validate()?;
        settings.validate()?;
        let dictionary = build_dictionary(&array, settings.oversample_h, settings.oversample_v, settings.pol_phases)?;
        if dictionary.len() < settings.n_rf {
            return Err(Error::invalid(format!(
                "dictionary has {} atoms, fewer than n_rf = {}",
                dictionary.len(),
                settings.n_rf
            )));
        }
        Ok(Designer {
            steering: build_steering_matrices(&grid, &array),
            dictionary,
            candidates: Box::new(PhaseRamps {
                b_grid: settings.b_grid,
            }),
            array,
            grid,
            params,
            settings,
        })
    }

    /// Replaces the phase-ramp family with another candidate generator.
    pub fn with_candidates(mut self, set: Box<dyn CandidateSet>) -> Self {
        self.candidates = set;
        self
    }

    /// Candidate pairs in lexicographic `(l_h, l_v)` order.
    pub fn candidate_pairs(&self) -> Vec<PhaseVectorCandidate> {
        let hs = self.candidates.vectors(self.grid.l_h);
        let vs = self.candidates.vectors(self.grid.l_v);
        let mut out = Vec::with_capacity(hs.len() * vs.len());
        for (i, qh) in hs.iter().enumerate() {
            for (k, qv) in vs.iter().enumerate() {
                out.push(PhaseVectorCandidate {
                    q_lh: qh.clone(),
                    q_lv: qv.clone(),
                    index: (i, k),
                });
            }
        }
        out
    }

    pub fn pattern(&self, c: &DVector<Complex64>) -> Result<PatternVector> {
        pattern_vector(c, &self.steering, &self.params, &self.array)
    }

    pub fn ideal(&self, region: Region) -> Result<PatternVector> {
        ideal_pattern_vector(region, &self.grid, &self.array)
    }

    /// SE of an arbitrary unit-norm codeword against the ideal pattern of
    /// `region`.
    pub fn squared_error_of(&self, region: Region, c: &DVector<Complex64>) -> Result<f64> {
        check_unit(c, &self.array)?;
        squared_error(&self.ideal(region)?, &self.pattern(c)?)
    }

    pub fn evaluate_candidate(&self, region: Region, cand: &PhaseVectorCandidate) -> Result<CandidateEvaluation> {
        let ideal = self.ideal(region)?;
        let c_single = single_pol_beamformer(cand, region, &self.steering)?;
        let c_dual = dual_pol_beamformer(&c_single, &self.params)?;
        let omp = omp_factorize(&c_dual, &self.dictionary, self.settings.n_rf)?;
        let hybrid_codeword = omp.beamformer.codeword();
        let se_closed_form = squared_error(&ideal, &self.pattern(&c_dual)?)?;
        let se_hybrid = squared_error(&ideal, &self.pattern(&hybrid_codeword)?)?;
        Ok(CandidateEvaluation {
            candidate: cand.clone(),
            c_single,
            c_dual,
            hybrid: omp.beamformer,
            hybrid_codeword,
            se_closed_form,
            se_hybrid,
        })
    }

    pub fn evaluate_candidates(&self, region: Region) -> Result<Vec<CandidateEvaluation>> {
        self.grid.check_region(region)?;
        self.candidate_pairs()
            .par_iter()
            .map(|cand| self.evaluate_candidate(region, cand))
            .collect()
    }

    /// Minimum-SE hybrid codeword for `region`; ties go to the lowest
    /// candidate pair.
    pub fn design_region_codeword(&self, region: Region) -> Result<DesignedCodeword> {
        let evals = self.evaluate_candidates(region)?;
        let mut best: Option<CandidateEvaluation> = None;
        for e in evals {
            if best.as_ref().is_none_or(|b| e.se_hybrid < b.se_hybrid) {
                best = Some(e);
            }
        }
        let best = best.ok_or_else(|| Error::invalid("candidate set is empty"))?;
        Ok(DesignedCodeword {
            region,
            c: best.hybrid_codeword,
            hybrid: best.hybrid,
            candidate: best.candidate,
            se: best.se_hybrid,
        })
    }

    /// One codeword per region, p-major.
    pub fn design_codebook(&self) -> Result<Vec<DesignedCodeword>> {
        let regions: Vec<Region> = self.grid.regions().collect();
        regions.par_iter().map(|r| self.design_region_codeword(*r)).collect()
    }

    /// Correlation objective of a single-pol beam for a candidate:
    /// `|sqrt(G) t^H D^H c_s|^2 / ||D^H c_s||^2` with `t` the unit-modulus
    /// region amplitude of the candidate.
    pub fn correlation_objective(
        &self,
        region: Region,
        cand: &PhaseVectorCandidate,
        c_single: &DVector<Complex64>,
    ) -> Result<f64> {
        let t = ideal_amplitude(cand, region, &self.grid, &self.array)?;
        let r = section_response(c_single, &self.steering, &self.array);
        Ok(r.dotc(&t).norm_sqr() / r.norm_squared())
    }

    /// Sum of single-pol section gains inside `region`.
    pub fn in_region_power(&self, region: Region, c_single: &DVector<Complex64>) -> f64 {
        let r = section_response(c_single, &self.steering, &self.array);
        self.grid
            .region_section_indices(region)
            .into_iter()
            .map(|j| r[j].norm_sqr())
            .sum()
    }
}
