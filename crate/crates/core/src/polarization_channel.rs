//! Dual-polarized MISO channel: orientation rotation, XPD weighting and the
//! Rician LOS/NLOS mixture.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::array_geometry::{paired_frequencies, upa_response_paired, upa_response_unpaired, ArrayConfig};
use crate::error::{Error, Result};

/// XPD, orientation difference and the two complex path gains seen by a
/// vertically polarized receive antenna.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationParams {
    pub chi: f64,
    pub phi: f64,
    pub zeta_vv: Complex64,
    pub zeta_hv: Complex64,
}

impl PolarizationParams {
    pub fn new(chi: f64, phi: f64, zeta_vv: Complex64, zeta_hv: Complex64) -> Result<Self> {
        let p = PolarizationParams {
            chi,
            phi,
            zeta_vv,
            zeta_hv,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.chi) {
            return Err(Error::InvalidParams(format!("chi = {} outside [0, 1]", self.chi)));
        }
        if !self.phi.is_finite() {
            return Err(Error::InvalidParams("phi must be finite".into()));
        }
        if !(self.zeta_vv.is_finite() && self.zeta_hv.is_finite()) {
            return Err(Error::InvalidParams("path gains must be finite".into()));
        }
        if !self.norm_b().is_finite() {
            return Err(Error::InvalidParams(
                "effective polarization gains are both zero".into(),
            ));
        }
        Ok(())
    }

    /// `rho_pv = sqrt(1/(1+chi)) zeta_vv`.
    pub fn rho_pv(&self) -> Complex64 {
        self.zeta_vv * (1.0 / (1.0 + self.chi)).sqrt()
    }

    /// `rho_ph = sqrt(chi/(1+chi)) zeta_hv`.
    pub fn rho_ph(&self) -> Complex64 {
        self.zeta_hv * (self.chi / (1.0 + self.chi)).sqrt()
    }

    /// Normalization `b = (|rho_pv|^2 + |rho_ph|^2)^(-1/2)`.
    pub fn norm_b(&self) -> f64 {
        (self.rho_pv().norm_sqr() + self.rho_ph().norm_sqr()).sqrt().recip()
    }

    pub fn with_phi(&self, phi: f64) -> Self {
        PolarizationParams { phi, ..*self }
    }
}

/// `R(phi) = [[cos, -sin], [sin, cos]] (x) I_{m_half}`.
pub fn givens_rotation(phi: f64, m_half: usize) -> DMatrix<Complex64> {
    let (s, c) = phi.sin_cos();
    let block = DMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::from(c),
            Complex64::from(-s),
            Complex64::from(s),
            Complex64::from(c),
        ],
    );
    block.kronecker(&DMatrix::identity(m_half, m_half))
}

/// `R(phi) x` without forming the matrix.
pub fn rotate(phi: f64, x: &DVector<Complex64>) -> DVector<Complex64> {
    let n = x.len() / 2;
    let (s, c) = phi.sin_cos();
    DVector::from_fn(2 * n, |i, _| {
        if i < n {
            x[i] * c - x[n + i] * s
        } else {
            x[i - n] * s + x[i] * c
        }
    })
}

/// `R(phi)^H x` without forming the matrix.
pub fn rotate_adjoint(phi: f64, x: &DVector<Complex64>) -> DVector<Complex64> {
    rotate(-phi, x)
}

/// Stacks `[top * a; bottom * a]`.
pub(crate) fn stack_weighted(top: Complex64, bottom: Complex64, a: &DVector<Complex64>) -> DVector<Complex64> {
    let n = a.len();
    DVector::from_fn(2 * n, |i, _| if i < n { top * a[i] } else { bottom * a[i - n] })
}

fn los_from_response(a: &DVector<Complex64>, params: &PolarizationParams) -> DVector<Complex64> {
    rotate(params.phi, &stack_weighted(params.rho_pv(), params.rho_ph(), a))
}

/// LOS component `R(phi) [rho_pv a; rho_ph a]` for the physical (paired)
/// array response.
pub fn los_component(
    theta_az: f64,
    theta_el: f64,
    params: &PolarizationParams,
    cfg: &ArrayConfig,
) -> Result<DVector<Complex64>> {
    let a = upa_response_paired(theta_az, theta_el, cfg)?;
    Ok(los_from_response(&a, params))
}

/// Where the LOS path gains come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LosGains {
    /// Use the `zeta` values of the supplied [`PolarizationParams`].
    Known,
    /// Draw a fresh unit-variance circular Gaussian pair per realization.
    Drawn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// Rician K-factor, linear scale.
    pub k_factor: f64,
    pub n_nlos: usize,
    pub phi_nominal: f64,
    /// Half-width of the uniform perturbation applied to `phi_nominal`.
    pub phi_jitter: f64,
    pub az_range: (f64, f64),
    pub el_range: (f64, f64),
    /// Fixed LOS direction; drawn per realization when `None`.
    pub los_angles: Option<(f64, f64)>,
    pub los_gains: LosGains,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            k_factor: db_to_linear(13.2),
            n_nlos: 3,
            phi_nominal: FRAC_PI_4,
            phi_jitter: std::f64::consts::PI / 36.0,
            az_range: (-FRAC_PI_2, FRAC_PI_2),
            el_range: (-FRAC_PI_4, FRAC_PI_4),
            los_angles: None,
            los_gains: LosGains::Known,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_factor >= 0.0) {
            return Err(Error::invalid("k_factor must be non-negative"));
        }
        if !(self.phi_jitter >= 0.0) || !self.phi_nominal.is_finite() {
            return Err(Error::invalid("phi_jitter must be non-negative and phi finite"));
        }
        let (a0, a1) = self.az_range;
        let (e0, e1) = self.el_range;
        if !(a0 < a1 && a0 >= -FRAC_PI_2 && a1 <= FRAC_PI_2) {
            return Err(Error::invalid("az_range must be an increasing subrange of [-pi/2, pi/2]"));
        }
        if !(e0 < e1 && e0 >= -FRAC_PI_4 && e1 <= FRAC_PI_4) {
            return Err(Error::invalid("el_range must be an increasing subrange of [-pi/4, pi/4]"));
        }
        if let Some((az, el)) = self.los_angles {
            if !crate::array_geometry::angles_in_sector(az, el) {
                return Err(Error::invalid("fixed LOS angles outside the sector"));
            }
        }
        Ok(())
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// One draw of the channel and the random quantities that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: DVector<Complex64>,
    pub los_angles: (f64, f64),
    pub phi_drawn: f64,
    /// `(zeta_vv, zeta_hv)` of the LOS path followed by each NLOS path.
    pub path_gains: Vec<(Complex64, Complex64)>,
}

/// Unit-variance circular complex Gaussian sample.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn draw_in_open<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    loop {
        let x = lo + (hi - lo) * rng.random::<f64>();
        if x > lo && x < hi {
            return x;
        }
    }
}

fn draw_angles<R: Rng + ?Sized>(cfg: &ChannelConfig, rng: &mut R) -> (f64, f64) {
    let az = draw_in_open(rng, cfg.az_range.0, cfg.az_range.1);
    let el = draw_in_open(rng, cfg.el_range.0, cfg.el_range.1);
    (az, el)
}

/// Draws one channel realization.
///
/// Draw order: `phi`, LOS angles (if not fixed), LOS gains (if drawn), then
/// per NLOS path its angles and gain pair. NLOS paths share `chi` and the
/// drawn `phi` with the LOS path and are summed with weight `1/sqrt(n_nlos)`.
pub fn sample_channel<R: Rng + ?Sized>(
    cfg: &ChannelConfig,
    base: &PolarizationParams,
    array: &ArrayConfig,
    rng: &mut R,
) -> ChannelRealization {
    let phi = if cfg.phi_jitter > 0.0 {
        cfg.phi_nominal - cfg.phi_jitter + 2.0 * cfg.phi_jitter * rng.random::<f64>()
    } else {
        cfg.phi_nominal
    };
    let los_angles = match cfg.los_angles {
        Some(a) => a,
        None => draw_angles(cfg, rng),
    };
    let los_gains = match cfg.los_gains {
        LosGains::Known => (base.zeta_vv, base.zeta_hv),
        LosGains::Drawn => (complex_gaussian(rng), complex_gaussian(rng)),
    };

    let path = |angles: (f64, f64), gains: (Complex64, Complex64)| {
        let a = upa_response_unpaired(paired_frequencies(angles.0, angles.1, array), array);
        let p = PolarizationParams {
            chi: base.chi,
            phi,
            zeta_vv: gains.0,
            zeta_hv: gains.1,
        };
        los_from_response(&a, &p)
    };

    let m = array.total_elements();
    let scale = array.elements_per_pol() as f64;
    let k = cfg.k_factor;
    let mut path_gains = vec![los_gains];

    let mut h = if k > 0.0 {
        path(los_angles, los_gains) * Complex64::from((scale * k / (1.0 + k)).sqrt())
    } else {
        DVector::zeros(m)
    };
    if cfg.n_nlos > 0 {
        let mut nlos = DVector::<Complex64>::zeros(m);
        for _ in 0..cfg.n_nlos {
            let angles = draw_angles(cfg, rng);
            let gains = (complex_gaussian(rng), complex_gaussian(rng));
            path_gains.push(gains);
            nlos += path(angles, gains);
        }
        let w = (scale / (1.0 + k)).sqrt() / (cfg.n_nlos as f64).sqrt();
        h += nlos * Complex64::from(w);
    }

    ChannelRealization {
        h,
        los_angles,
        phi_drawn: phi,
        path_gains,
    }
}
