//! Planar-array geometry in the spatial-frequency domain.
//!
//! Beam design works with unpaired spatial frequencies `(psi_h, psi_v)`; the
//! physical channel uses the paired azimuth/elevation response. The design
//! rectangle `(-pi, pi) x (-pi/sqrt2, pi/sqrt2)` is split into `q_h x q_v`
//! regions, each of which is split again into `l_h x l_v` lattice sections.
//!
//! Flattening convention used everywhere in the crate: horizontal index outer,
//! vertical index inner, i.e. element `(i, k)` of an `m_h x m_v` array lives at
//! `i * m_v + k`, and section `(kh, kv)` of the full grid lives at
//! `kh * (q_v * l_v) + kv`. This matches `D = D_h (x) D_v`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper edge of the vertical design range, `pi / sqrt(2)`.
pub const PSI_V_MAX: f64 = PI / SQRT_2;

/// Dual-polarized uniform planar array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub m_h: usize,
    pub m_v: usize,
    #[serde(default = "half_wavelength")]
    pub d_h_over_lambda: f64,
    #[serde(default = "half_wavelength")]
    pub d_v_over_lambda: f64,
}

fn half_wavelength() -> f64 {
    0.5
}

impl ArrayConfig {
    /// Half-wavelength spaced array.
    pub fn new(m_h: usize, m_v: usize) -> Result<Self> {
        let cfg = ArrayConfig {
            m_h,
            m_v,
            d_h_over_lambda: 0.5,
            d_v_over_lambda: 0.5,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_h == 0 || self.m_v == 0 {
            return Err(Error::invalid(format!(
                "array dimensions must be positive, got {}x{}",
                self.m_h, self.m_v
            )));
        }
        if !(self.d_h_over_lambda > 0.0 && self.d_h_over_lambda.is_finite())
            || !(self.d_v_over_lambda > 0.0 && self.d_v_over_lambda.is_finite())
        {
            return Err(Error::invalid("element spacings must be positive and finite"));
        }
        Ok(())
    }

    /// Elements per polarization, `M/2 = m_h * m_v`.
    pub fn elements_per_pol(&self) -> usize {
        self.m_h * self.m_v
    }

    /// Total dual-polarized element count `M`.
    pub fn total_elements(&self) -> usize {
        2 * self.m_h * self.m_v
    }
}

/// A point `(psi_h, psi_v)` in the unpaired spatial-frequency plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialFrequency {
    pub psi_h: f64,
    pub psi_v: f64,
}

impl SpatialFrequency {
    pub fn new(psi_h: f64, psi_v: f64) -> Self {
        SpatialFrequency { psi_h, psi_v }
    }

    /// Constructs a frequency pair and checks it lies strictly inside the
    /// design rectangle.
    pub fn in_design_range(psi_h: f64, psi_v: f64) -> Result<Self> {
        let sf = SpatialFrequency { psi_h, psi_v };
        if sf.is_in_design_range() {
            Ok(sf)
        } else {
            Err(Error::invalid(format!(
                "spatial frequency ({psi_h}, {psi_v}) outside (-pi, pi) x (-pi/sqrt2, pi/sqrt2)"
            )))
        }
    }

    pub fn is_in_design_range(&self) -> bool {
        self.psi_h > -PI && self.psi_h < PI && self.psi_v > -PSI_V_MAX && self.psi_v < PSI_V_MAX
    }
}

/// Half-open interval `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x < self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// One quantized region `B(p, q)`; indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Region {
    pub p: usize,
    pub q: usize,
}

impl Region {
    pub fn new(p: usize, q: usize) -> Self {
        Region { p, q }
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.p, self.q)
    }
}

/// Quantization of the design rectangle into regions and lattice sections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionGrid {
    pub q_h: usize,
    pub q_v: usize,
    pub l_h: usize,
    pub l_v: usize,
}

impl RegionGrid {
    pub fn new(q_h: usize, q_v: usize, l_h: usize, l_v: usize) -> Result<Self> {
        let grid = RegionGrid { q_h, q_v, l_h, l_v };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q_h == 0 || self.q_v == 0 || self.l_h == 0 || self.l_v == 0 {
            return Err(Error::invalid(format!(
                "grid counts must be positive, got Q={}x{} L={}x{}",
                self.q_h, self.q_v, self.l_h, self.l_v
            )));
        }
        Ok(())
    }

    /// Number of regions `Q`.
    pub fn num_regions(&self) -> usize {
        self.q_h * self.q_v
    }

    /// Sections per region `L`.
    pub fn sections_per_region(&self) -> usize {
        self.l_h * self.l_v
    }

    pub fn total_sections(&self) -> usize {
        self.num_regions() * self.sections_per_region()
    }

    /// Horizontal lattice size `Q_h * L_h` (columns of `D_h`).
    pub fn cols_h(&self) -> usize {
        self.q_h * self.l_h
    }

    /// Vertical lattice size `Q_v * L_v` (columns of `D_v`).
    pub fn cols_v(&self) -> usize {
        self.q_v * self.l_v
    }

    pub fn check_region(&self, region: Region) -> Result<()> {
        if region.p == 0 || region.p > self.q_h || region.q == 0 || region.q > self.q_v {
            return Err(Error::invalid(format!(
                "region {region} outside 1..={} x 1..={}",
                self.q_h, self.q_v
            )));
        }
        Ok(())
    }

    /// All regions in p-major order.
    pub fn regions(&self) -> impl Iterator<Item = Region> + '_ {
        (1..=self.q_h).flat_map(move |p| (1..=self.q_v).map(move |q| Region { p, q }))
    }

    /// Zero-based position of `region` in [`RegionGrid::regions`] order.
    pub fn region_ordinal(&self, region: Region) -> usize {
        (region.p - 1) * self.q_v + (region.q - 1)
    }

    /// Flattened column index of lattice section `(kh, kv)` in `D`.
    pub fn section_index(&self, kh: usize, kv: usize) -> usize {
        kh * self.cols_v() + kv
    }

    /// Column indices of `D` belonging to `region`, horizontal-major.
    pub fn region_section_indices(&self, region: Region) -> Vec<usize> {
        let h0 = (region.p - 1) * self.l_h;
        let v0 = (region.q - 1) * self.l_v;
        let mut out = Vec::with_capacity(self.sections_per_region());
        for i in 0..self.l_h {
            for k in 0..self.l_v {
                out.push(self.section_index(h0 + i, v0 + k));
            }
        }
        out
    }

    /// Area of a single region, `2 sqrt(2) pi^2 / Q`.
    pub fn region_area(&self) -> f64 {
        (2.0 * PI / self.q_h as f64) * (2.0 * PI / (SQRT_2 * self.q_v as f64))
    }

    /// Horizontal frequency of lattice column `kh` of `D_h`.
    pub fn lattice_psi_h(&self, kh: usize) -> f64 {
        let n = self.cols_h() as f64;
        -PI + PI / n + 2.0 * PI * kh as f64 / n
    }

    /// Vertical frequency of lattice column `kv` of `D_v`.
    pub fn lattice_psi_v(&self, kv: usize) -> f64 {
        let n = self.cols_v() as f64;
        (-PI + PI / n + 2.0 * PI * kv as f64 / n) / SQRT_2
    }

    /// Midpoint of a region.
    pub fn region_center(&self, region: Region) -> SpatialFrequency {
        let (h, v) = region_bounds_unchecked(region, self);
        SpatialFrequency::new(0.5 * (h.lo + h.hi), 0.5 * (v.lo + v.hi))
    }
}

/// Response of an `m`-element half-wavelength ULA at spatial frequency `psi`:
/// `(1/sqrt m) [1, e^{j psi}, ..., e^{j psi (m-1)}]`.
pub fn ula_response(psi: f64, m: usize) -> Result<DVector<Complex64>> {
    if m == 0 {
        return Err(Error::invalid("ULA needs at least one element"));
    }
    if !psi.is_finite() {
        return Err(Error::invalid("spatial frequency must be finite"));
    }
    Ok(ula_unchecked(psi, m))
}

pub(crate) fn ula_unchecked(psi: f64, m: usize) -> DVector<Complex64> {
    let scale = 1.0 / (m as f64).sqrt();
    DVector::from_fn(m, |k, _| Complex64::from_polar(scale, psi * k as f64))
}

/// UPA response in the unpaired domain, `d_h(psi_h) (x) d_v(psi_v)`.
pub fn upa_response_unpaired(sf: SpatialFrequency, cfg: &ArrayConfig) -> DVector<Complex64> {
    ula_unchecked(sf.psi_h, cfg.m_h).kronecker(&ula_unchecked(sf.psi_v, cfg.m_v))
}

/// Paired spatial frequencies produced by a plane wave from
/// `(theta_az, theta_el)`.
pub fn paired_frequencies(theta_az: f64, theta_el: f64, cfg: &ArrayConfig) -> SpatialFrequency {
    SpatialFrequency::new(
        2.0 * PI * cfg.d_h_over_lambda * theta_az.sin() * theta_el.cos(),
        2.0 * PI * cfg.d_v_over_lambda * theta_el.sin(),
    )
}

/// Whether `(theta_az, theta_el)` lies in the open sector
/// `(-pi/2, pi/2) x (-pi/4, pi/4)`.
pub fn angles_in_sector(theta_az: f64, theta_el: f64) -> bool {
    theta_az > -FRAC_PI_2 && theta_az < FRAC_PI_2 && theta_el > -FRAC_PI_4 && theta_el < FRAC_PI_4
}

/// Physical UPA response `a_h(theta_az, theta_el) (x) a_v(theta_el)`.
pub fn upa_response_paired(theta_az: f64, theta_el: f64, cfg: &ArrayConfig) -> Result<DVector<Complex64>> {
    if !angles_in_sector(theta_az, theta_el) {
        return Err(Error::invalid(format!(
            "angles ({theta_az}, {theta_el}) outside the (-pi/2,pi/2) x (-pi/4,pi/4) sector"
        )));
    }
    Ok(upa_response_unpaired(paired_frequencies(theta_az, theta_el, cfg), cfg))
}

/// Bounds of region `B(p, q)` as half-open intervals in `psi_h` and `psi_v`.
pub fn region_bounds(region: Region, grid: &RegionGrid) -> Result<(Interval, Interval)> {
    grid.check_region(region)?;
    Ok(region_bounds_unchecked(region, grid))
}

fn region_bounds_unchecked(region: Region, grid: &RegionGrid) -> (Interval, Interval) {
    let (p, q) = (region.p as f64, region.q as f64);
    let qh = grid.q_h as f64;
    let qv = grid.q_v as f64;
    let h = Interval {
        lo: -PI + 2.0 * PI * (p - 1.0) / qh,
        hi: -PI + 2.0 * PI * p / qh,
    };
    let v = Interval {
        lo: -PSI_V_MAX + 2.0 * PI * (q - 1.0) / (SQRT_2 * qv),
        hi: -PSI_V_MAX + 2.0 * PI * q / (SQRT_2 * qv),
    };
    (h, v)
}

/// Centers of the `l_h x l_v` lattice sections of a region, horizontal-major.
pub fn section_centers(region: Region, grid: &RegionGrid) -> Result<Vec<SpatialFrequency>> {
    grid.check_region(region)?;
    let h0 = (region.p - 1) * grid.l_h;
    let v0 = (region.q - 1) * grid.l_v;
    let mut out = Vec::with_capacity(grid.sections_per_region());
    for i in 0..grid.l_h {
        for k in 0..grid.l_v {
            out.push(SpatialFrequency::new(
                grid.lattice_psi_h(h0 + i),
                grid.lattice_psi_v(v0 + k),
            ));
        }
    }
    Ok(out)
}

/// Section steering matrices `D_h`, `D_v` and `D = D_h (x) D_v`.
#[derive(Debug, Clone)]
pub struct SteeringMatrices {
    pub grid: RegionGrid,
    pub d_h: DMatrix<Complex64>,
    pub d_v: DMatrix<Complex64>,
    pub d: DMatrix<Complex64>,
}

impl SteeringMatrices {
    /// `D_h` columns of region column `p` (the `D_{h,p}` block).
    pub fn region_block_h(&self, p: usize) -> DMatrix<Complex64> {
        self.d_h.columns((p - 1) * self.grid.l_h, self.grid.l_h).into_owned()
    }

    /// `D_v` columns of region row `q` (the `D_{v,q}` block).
    pub fn region_block_v(&self, q: usize) -> DMatrix<Complex64> {
        self.d_v.columns((q - 1) * self.grid.l_v, self.grid.l_v).into_owned()
    }
}

pub fn build_steering_matrices(grid: &RegionGrid, cfg: &ArrayConfig) -> SteeringMatrices {
    let d_h = DMatrix::from_fn(cfg.m_h, grid.cols_h(), |i, kh| {
        Complex64::from_polar(1.0 / (cfg.m_h as f64).sqrt(), grid.lattice_psi_h(kh) * i as f64)
    });
    let d_v = DMatrix::from_fn(cfg.m_v, grid.cols_v(), |k, kv| {
        Complex64::from_polar(1.0 / (cfg.m_v as f64).sqrt(), grid.lattice_psi_v(kv) * k as f64)
    });
    let d = d_h.kronecker(&d_v);
    SteeringMatrices {
        grid: *grid,
        d_h,
        d_v,
        d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn ula_zero_phase_and_alternation() {
        let v = ula_response(0.0, 4).unwrap();
        assert!(v.iter().all(|z| close(*z, Complex64::new(0.5, 0.0), 1e-15)));
        let v = ula_response(PI, 2).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!(close(v[0], Complex64::new(s, 0.0), 1e-15));
        assert!(close(v[1], Complex64::new(-s, 0.0), 1e-15));
    }

    #[test]
    fn ula_rejects_empty_array() {
        assert!(matches!(ula_response(0.3, 0), Err(Error::InvalidArgument(_))));
        assert!(ula_response(f64::NAN, 3).is_err());
    }

    #[test]
    fn ula_inner_product_is_dirichlet_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let m = rng.random_range(1..40);
            let a = rng.random_range(-PI..PI);
            let b = rng.random_range(-PI..PI);
            let inner = ula_response(a, m).unwrap().dotc(&ula_response(b, m).unwrap()).norm();
            let delta = b - a;
            let half = delta / 2.0;
            let expected = if half.sin().abs() < 1e-9 {
                1.0
            } else {
                ((m as f64) * half).sin().abs() / ((m as f64) * half.sin().abs())
            };
            assert!((inner - expected).abs() < 1e-10, "m={m} delta={delta}");
        }
    }

    #[test]
    fn unpaired_response_is_kronecker_of_ulas() {
        let cfg = ArrayConfig::new(2, 2).unwrap();
        let v = upa_response_unpaired(SpatialFrequency::new(0.0, 0.0), &cfg);
        assert!(v.iter().all(|z| close(*z, Complex64::new(0.5, 0.0), 1e-15)));

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = ArrayConfig::new(5, 3).unwrap();
        for _ in 0..100 {
            let sf = SpatialFrequency::new(
                rng.random_range(-PI..PI),
                rng.random_range(-PSI_V_MAX..PSI_V_MAX),
            );
            let v = upa_response_unpaired(sf, &cfg);
            let h = ula_unchecked(sf.psi_h, cfg.m_h);
            let w = ula_unchecked(sf.psi_v, cfg.m_v);
            for i in 0..cfg.m_h {
                for k in 0..cfg.m_v {
                    assert_eq!(v[i * cfg.m_v + k], h[i] * w[k]);
                }
            }
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn paired_response_matches_direct_phases() {
        let cfg = ArrayConfig::new(4, 3).unwrap();
        let v = upa_response_paired(0.0, 0.0, &cfg).unwrap();
        let s = 1.0 / 12f64.sqrt();
        assert!(v.iter().all(|z| close(*z, Complex64::new(s, 0.0), 1e-15)));

        let az = 0.4;
        let p = upa_response_paired(az, 0.0, &cfg).unwrap();
        let u = upa_response_unpaired(SpatialFrequency::new(PI * az.sin(), 0.0), &cfg);
        assert!((p - u).norm() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let az = rng.random_range(-1.5..1.5);
            let el = rng.random_range(-0.78..0.78);
            let v = upa_response_paired(az, el, &cfg).unwrap();
            for i in 0..cfg.m_h {
                for k in 0..cfg.m_v {
                    let phase = 2.0 * PI * 0.5 * (i as f64) * az.sin() * el.cos()
                        + 2.0 * PI * 0.5 * (k as f64) * el.sin();
                    let direct = Complex64::from_polar(s, phase);
                    assert!(close(v[i * cfg.m_v + k], direct, 1e-12));
                }
            }
        }
        assert!(upa_response_paired(1.6, 0.0, &cfg).is_err());
        assert!(upa_response_paired(0.0, -0.8, &cfg).is_err());
    }

    #[test]
    fn region_bounds_examples() {
        let g = RegionGrid::new(2, 2, 1, 1).unwrap();
        let (h, v) = region_bounds(Region::new(1, 1), &g).unwrap();
        assert_eq!((h.lo, h.hi), (-PI, 0.0));
        assert!((v.lo + PSI_V_MAX).abs() < 1e-15 && v.hi.abs() < 1e-15);

        let g = RegionGrid::new(6, 6, 1, 1).unwrap();
        let (h, _) = region_bounds(Region::new(3, 3), &g).unwrap();
        assert!((h.lo + PI / 3.0).abs() < 1e-15);
        assert!(h.hi.abs() < 1e-15);

        assert!(region_bounds(Region::new(0, 1), &g).is_err());
        assert!(region_bounds(Region::new(1, 7), &g).is_err());
    }

    #[test]
    fn regions_tile_the_design_rectangle() {
        for (qh, qv) in [(1, 1), (2, 3), (6, 6), (5, 4), (7, 2)] {
            let g = RegionGrid::new(qh, qv, 1, 1).unwrap();
            let total: f64 = g
                .regions()
                .map(|r| {
                    let (h, v) = region_bounds(r, &g).unwrap();
                    h.width() * v.width()
                })
                .sum();
            assert!((total - 2.0 * PI * 2.0 * PI / SQRT_2).abs() < 1e-12);
            // Adjacent intervals share edges exactly.
            for p in 1..qh {
                let (a, _) = region_bounds(Region::new(p, 1), &g).unwrap();
                let (b, _) = region_bounds(Region::new(p + 1, 1), &g).unwrap();
                assert!((a.hi - b.lo).abs() < 1e-15);
            }
            for q in 1..qv {
                let (_, a) = region_bounds(Region::new(1, q), &g).unwrap();
                let (_, b) = region_bounds(Region::new(1, q + 1), &g).unwrap();
                assert!((a.hi - b.lo).abs() < 1e-15);
            }
            let (h, _) = region_bounds(Region::new(qh, 1), &g).unwrap();
            let (_, v) = region_bounds(Region::new(1, qv), &g).unwrap();
            assert!((h.hi - PI).abs() < 1e-12 && (v.hi - PSI_V_MAX).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_frequency_belongs_to_exactly_one_region() {
        let g = RegionGrid::new(4, 4, 1, 1).unwrap();
        let psi_h = 0.0;
        let hits = g
            .regions()
            .filter(|r| region_bounds(*r, &g).unwrap().0.contains(psi_h) && r.q == 1)
            .count();
        assert_eq!(hits, 1);
    }

    #[test]
    fn section_center_examples() {
        let g = RegionGrid::new(1, 1, 1, 1).unwrap();
        let c = section_centers(Region::new(1, 1), &g).unwrap();
        assert_eq!(c.len(), 1);
        assert!(c[0].psi_h.abs() < 1e-15);

        let g = RegionGrid::new(6, 5, 7, 3).unwrap();
        let c = section_centers(Region::new(1, 1), &g).unwrap();
        assert!((c[0].psi_h - (-PI + PI / 42.0)).abs() < 1e-15);
        assert!((c[0].psi_v - (-PSI_V_MAX + PI / (SQRT_2 * 15.0))).abs() < 1e-15);
        // Horizontal-major ordering.
        assert_eq!(c[1].psi_h, c[0].psi_h);
        assert!(c[1].psi_v > c[0].psi_v);
        assert!(c[3].psi_h > c[0].psi_h);
    }

    #[test]
    fn section_centers_lie_inside_their_region() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..30 {
            let g = RegionGrid::new(
                rng.random_range(1..8),
                rng.random_range(1..8),
                rng.random_range(1..9),
                rng.random_range(1..9),
            )
            .unwrap();
            for r in g.regions() {
                let (h, v) = region_bounds(r, &g).unwrap();
                for sf in section_centers(r, &g).unwrap() {
                    assert!(h.lo < sf.psi_h && sf.psi_h < h.hi);
                    assert!(v.lo < sf.psi_v && sf.psi_v < v.hi);
                }
            }
        }
    }

    #[test]
    fn steering_matrix_columns_match_section_centers() {
        let cfg = ArrayConfig::new(3, 4).unwrap();
        let g = RegionGrid::new(3, 2, 2, 3).unwrap();
        let sm = build_steering_matrices(&g, &cfg);
        assert_eq!(sm.d.shape(), (12, g.total_sections()));
        assert_eq!(sm.region_block_h(1).shape(), (3, 2));
        assert_eq!(sm.region_block_v(1).shape(), (4, 3));

        for r in g.regions() {
            let idx = g.region_section_indices(r);
            for (j, sf) in idx.iter().zip(section_centers(r, &g).unwrap()) {
                let col = sm.d.column(*j);
                let resp = upa_response_unpaired(sf, &cfg);
                assert!((col - resp).norm() < 1e-14);
            }
        }
        let gram = sm.d.adjoint() * &sm.d;
        for j in 0..gram.nrows() {
            assert!((gram[(j, j)].re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn region_blocks_select_region_columns() {
        let cfg = ArrayConfig::new(4, 2).unwrap();
        let g = RegionGrid::new(3, 3, 2, 2).unwrap();
        let sm = build_steering_matrices(&g, &cfg);
        let b = sm.region_block_h(2);
        for l in 0..2 {
            assert_eq!(b.column(l), sm.d_h.column(2 + l));
        }
    }
}
