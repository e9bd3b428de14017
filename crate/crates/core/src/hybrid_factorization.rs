//! Fully connected hybrid beamformers `c = F v` obtained by orthogonal matching
//! pursuit over a dictionary of phase-only stacked array responses.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::array_geometry::{ula_unchecked, ArrayConfig};
use crate::error::{Error, Result};

const LS_REGULARIZER: f64 = 1e-12;

/// Analog matrix with entries of modulus `1/sqrt(M)` and a digital weight
/// vector, one entry per RF chain.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridBeamformer {
    pub f_analog: DMatrix<Complex64>,
    pub v_digital: DVector<Complex64>,
}

impl HybridBeamformer {
    pub fn codeword(&self) -> DVector<Complex64> {
        &self.f_analog * &self.v_digital
    }

    pub fn n_rf(&self) -> usize {
        self.v_digital.len()
    }
}

/// Candidate analog columns `(1/sqrt 2) [a; e^{j beta} a]`.
#[derive(Debug, Clone)]
pub struct AnalogDictionary {
    pub columns: DMatrix<Complex64>,
    pub oversample_h: usize,
    pub oversample_v: usize,
    pub pol_phases: usize,
}

impl AnalogDictionary {
    pub fn len(&self) -> usize {
        self.columns.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.ncols() == 0
    }
}

/// Builds the dictionary over an `(oh M_h) x (ov M_v)` grid of unpaired
/// frequencies `-pi + 2 pi k / (o M)` and `pol_phases` uniform phase offsets.
/// Column order: horizontal frequency, vertical frequency, phase offset.
pub fn build_dictionary(
    cfg: &ArrayConfig,
    oversample_h: usize,
    oversample_v: usize,
    pol_phases: usize,
) -> Result<AnalogDictionary> {
    if oversample_h == 0 || oversample_v == 0 || pol_phases == 0 {
        return Err(Error::invalid("oversampling factors and pol_phases must be >= 1"));
    }
    let nh = oversample_h * cfg.m_h;
    let nv = oversample_v * cfg.m_v;
    let half = cfg.elements_per_pol();
    let mut columns = DMatrix::<Complex64>::zeros(2 * half, nh * nv * pol_phases);
    let mut col = 0;
    for kh in 0..nh {
        let dh = ula_unchecked(-PI + 2.0 * PI * kh as f64 / nh as f64, cfg.m_h);
        for kv in 0..nv {
            let dv = ula_unchecked(-PI + 2.0 * PI * kv as f64 / nv as f64, cfg.m_v);
            let a = dh.kronecker(&dv) * Complex64::from(std::f64::consts::FRAC_1_SQRT_2);
            for t in 0..pol_phases {
                let beta = Complex64::from_polar(1.0, 2.0 * PI * t as f64 / pol_phases as f64);
                let mut c = columns.column_mut(col);
                c.rows_mut(0, half).copy_from(&a);
                c.rows_mut(half, half).copy_from(&(&a * beta));
                col += 1;
            }
        }
    }
    Ok(AnalogDictionary {
        columns,
        oversample_h,
        oversample_v,
        pol_phases,
    })
}

/// Full OMP trace.
#[derive(Debug, Clone)]
pub struct OmpOutcome {
    pub beamformer: HybridBeamformer,
    /// Selected dictionary columns, in selection order.
    pub selected: Vec<usize>,
    /// Residual norm after each iteration.
    pub residual_norms: Vec<f64>,
    /// Least-squares digital weights before the final unit-norm rescaling.
    pub v_least_squares: DVector<Complex64>,
}

/// Greedy OMP: pick the column with the largest `|a^H r|` (lowest index on
/// ties), refit all weights by least squares, repeat `n_rf` times, then scale
/// `v` so that `||F v|| = 1`.
pub fn omp_factorize(target: &DVector<Complex64>, dict: &AnalogDictionary, n_rf: usize) -> Result<OmpOutcome> {
    let atoms = &dict.columns;
    if n_rf == 0 {
        return Err(Error::invalid("n_rf must be >= 1"));
    }
    if target.len() != atoms.nrows() {
        return Err(Error::LengthMismatch {
            expected: atoms.nrows(),
            found: target.len(),
        });
    }
    if atoms.ncols() < n_rf {
        return Err(Error::invalid(format!(
            "dictionary has {} columns, fewer than n_rf = {n_rf}",
            atoms.ncols()
        )));
    }

    let mut selected: Vec<usize> = Vec::with_capacity(n_rf);
    let mut taken = vec![false; atoms.ncols()];
    let mut residual = target.clone();
    let mut residual_norms = Vec::with_capacity(n_rf);
    let mut v = DVector::zeros(0);
    let mut f = DMatrix::zeros(atoms.nrows(), 0);

    for _ in 0..n_rf {
        let corr = atoms.adjoint() * &residual;
        let mut best: Option<(usize, f64)> = None;
        for (j, z) in corr.iter().enumerate() {
            if taken[j] {
                continue;
            }
            let m = z.norm();
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((j, m));
            }
        }
        let (j, _) = best.ok_or_else(|| Error::Internal("no candidate column left".into()))?;
        taken[j] = true;
        selected.push(j);

        f = atoms.select_columns(&selected);
        v = least_squares(&f, target)?;
        residual = target - &f * &v;
        residual_norms.push(residual.norm());
    }

    let fv_norm = (&f * &v).norm();
    if !(fv_norm > 0.0) {
        return Err(Error::Degenerate("hybrid approximation vanished".into()));
    }
    let v_unit = &v / Complex64::from(fv_norm);
    Ok(OmpOutcome {
        beamformer: HybridBeamformer {
            f_analog: f,
            v_digital: v_unit,
        },
        selected,
        residual_norms,
        v_least_squares: v,
    })
}

fn least_squares(f: &DMatrix<Complex64>, target: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    let n = f.ncols();
    let gram = f.adjoint() * f + DMatrix::<Complex64>::identity(n, n) * Complex64::from(LS_REGULARIZER);
    let rhs = f.adjoint() * target;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Internal("singular least-squares system".into()))?;
    Ok(chol.solve(&rhs))
}
