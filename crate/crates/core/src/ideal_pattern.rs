//! Reference gain, section-sampled pattern vectors, the flat ideal pattern and
//! the rate upper bound it attains.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::array_geometry::{
    upa_response_unpaired, ArrayConfig, Region, RegionGrid, SpatialFrequency, SteeringMatrices,
};
use crate::error::{Error, Result};
use crate::polarization_channel::{rotate, rotate_adjoint, stack_weighted, PolarizationParams};

/// Tolerance on `||c|| = 1` accepted by the gain routines.
pub const UNIT_NORM_TOL: f64 = 1e-9;

/// Gains sampled at the lattice section centers, in `D` column order.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternVector {
    pub gains: Vec<f64>,
    pub grid: RegionGrid,
}

impl PatternVector {
    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    /// Entries belonging to `region`, horizontal-major.
    pub fn region_gains(&self, region: Region) -> Vec<f64> {
        self.grid
            .region_section_indices(region)
            .into_iter()
            .map(|j| self.gains[j])
            .collect()
    }
}

/// Flat gain of the ideal pattern, `G = Q sqrt(2) / (M_h M_v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdealGain(pub f64);

impl IdealGain {
    pub fn new(grid: &RegionGrid, cfg: &ArrayConfig) -> Self {
        IdealGain(grid.num_regions() as f64 * SQRT_2 / cfg.elements_per_pol() as f64)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Integral budget `(2 pi)^2 / (M_h M_v)` shared by every unit-norm codeword.
pub fn integral_budget(cfg: &ArrayConfig) -> f64 {
    4.0 * PI * PI / cfg.elements_per_pol() as f64
}

pub(crate) fn check_unit(c: &DVector<Complex64>, cfg: &ArrayConfig) -> Result<()> {
    if c.len() != cfg.total_elements() {
        return Err(Error::LengthMismatch {
            expected: cfg.total_elements(),
            found: c.len(),
        });
    }
    let n = c.norm();
    if (n - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::invalid(format!("codeword norm {n} is not 1")));
    }
    Ok(())
}

/// Unit-norm polarization-matched steering vector
/// `b R(phi) ([rho_pv; rho_ph] (x) d(sf))`.
pub fn matched_vector(sf: SpatialFrequency, params: &PolarizationParams, cfg: &ArrayConfig) -> DVector<Complex64> {
    let d = upa_response_unpaired(sf, cfg);
    let b = params.norm_b();
    rotate(params.phi, &stack_weighted(params.rho_pv() * b, params.rho_ph() * b, &d))
}

/// Reference gain `|matched_vector(sf)^H c|^2`.
pub fn reference_gain(
    sf: SpatialFrequency,
    c: &DVector<Complex64>,
    params: &PolarizationParams,
    cfg: &ArrayConfig,
) -> Result<f64> {
    check_unit(c, cfg)?;
    Ok(matched_vector(sf, params, cfg).dotc(c).norm_sqr())
}

/// Collapses a dual-pol codeword onto the single-pol vector seen by the
/// matched steering vectors: `b (conj(rho_pv) c'_1 + conj(rho_ph) c'_2)` with
/// `c' = R(phi)^H c`. The reference gain at `sf` is `|d(sf)^H w|^2`.
pub fn effective_single_pol(c: &DVector<Complex64>, params: &PolarizationParams) -> DVector<Complex64> {
    let n = c.len() / 2;
    let eff = rotate_adjoint(params.phi, c);
    let b = params.norm_b();
    let a = params.rho_pv().conj() * b;
    let z = params.rho_ph().conj() * b;
    DVector::from_fn(n, |i, _| a * eff[i] + z * eff[n + i])
}

/// `W` with `W[i, k] = w[i * m_v + k]`.
fn as_grid(w: &DVector<Complex64>, cfg: &ArrayConfig) -> DMatrix<Complex64> {
    DMatrix::from_fn(cfg.m_h, cfg.m_v, |i, k| w[i * cfg.m_v + k])
}

/// Complex amplitude response `D^H w` of a single-pol vector, in `D` order.
pub(crate) fn section_response(w: &DVector<Complex64>, sm: &SteeringMatrices, cfg: &ArrayConfig) -> DVector<Complex64> {
    // (D_h (x) D_v)^H vec(W) = vec_rowmajor(D_h^H W conj(D_v))
    let r = sm.d_h.adjoint() * as_grid(w, cfg) * sm.d_v.conjugate();
    let cols_v = sm.grid.cols_v();
    DVector::from_fn(sm.grid.total_sections(), |j, _| r[(j / cols_v, j % cols_v)])
}

/// Pattern vector of a codeword: the reference gain at every section center.
pub fn pattern_vector(
    c: &DVector<Complex64>,
    sm: &SteeringMatrices,
    params: &PolarizationParams,
    cfg: &ArrayConfig,
) -> Result<PatternVector> {
    check_unit(c, cfg)?;
    let w = effective_single_pol(c, params);
    let gains = section_response(&w, sm, cfg).iter().map(|z| z.norm_sqr()).collect();
    Ok(PatternVector { gains, grid: sm.grid })
}

/// Ideal pattern vector of `region`: `G` on its `L` sections, zero elsewhere.
pub fn ideal_pattern_vector(region: Region, grid: &RegionGrid, cfg: &ArrayConfig) -> Result<PatternVector> {
    grid.check_region(region)?;
    let g = IdealGain::new(grid, cfg).value();
    let mut gains = vec![0.0; grid.total_sections()];
    for j in grid.region_section_indices(region) {
        gains[j] = g;
    }
    Ok(PatternVector { gains, grid: *grid })
}

/// Midpoint-rule integral of the reference gain over `[-pi, pi]^2` with
/// `n x n` nodes.
pub fn integral_reference_gain(
    c: &DVector<Complex64>,
    params: &PolarizationParams,
    cfg: &ArrayConfig,
    n: usize,
) -> Result<f64> {
    check_unit(c, cfg)?;
    if n < 64 {
        return Err(Error::invalid(format!("quadrature_n = {n} is below 64")));
    }
    let w = as_grid(&effective_single_pol(c, params), cfg);
    let step = 2.0 * PI / n as f64;
    let nodes: Vec<f64> = (0..n).map(|k| -PI + step * (k as f64 + 0.5)).collect();
    let resp = ula_nodes(cfg.m_h, &nodes).adjoint() * w * ula_nodes(cfg.m_v, &nodes).conjugate();
    // Row-by-row summation keeps the reduction order fixed.
    let total: f64 = resp
        .row_iter()
        .map(|row| row.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum();
    Ok(total * step * step)
}

fn ula_nodes(m: usize, psis: &[f64]) -> DMatrix<Complex64> {
    DMatrix::from_fn(m, psis.len(), |i, k| {
        Complex64::from_polar(1.0 / (m as f64).sqrt(), psis[k] * i as f64)
    })
}

/// Reference gain of `c` on the tensor grid `psi_h x psi_v`; entry `(a, b)`
/// is the gain at `(psi_h[a], psi_v[b])`.
pub fn gain_raster(
    c: &DVector<Complex64>,
    params: &PolarizationParams,
    cfg: &ArrayConfig,
    psi_h: &[f64],
    psi_v: &[f64],
) -> Result<DMatrix<f64>> {
    check_unit(c, cfg)?;
    let w = as_grid(&effective_single_pol(c, params), cfg);
    let resp = ula_nodes(cfg.m_h, psi_h).adjoint() * w * ula_nodes(cfg.m_v, psi_v).conjugate();
    Ok(resp.map(|z| z.norm_sqr()))
}

/// Rate upper bound `log2(1 + snr ||h||^2 G)` in bits/s/Hz.
pub fn rate_upper_bound(snr_linear: f64, h_norm_sq: f64, grid: &RegionGrid, cfg: &ArrayConfig) -> f64 {
    (snr_linear * h_norm_sq * IdealGain::new(grid, cfg).value()).ln_1p() / std::f64::consts::LN_2
}
