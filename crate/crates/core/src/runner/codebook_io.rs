//! Versioned binary codebook files with a JSON metadata sidecar.
//!
//! All integers are `u32` and all reals `f64`, little-endian; a complex
//! number is written as `re` then `im`.
//!
//! ```text
//! magic        "DPCB"
//! version      u32 (= 1)
//! geometry     8 bytes: leading bytes of SHA-256 over the geometry block
//! kind         u32 (1 = proposed, 2 = baseline)
//! geometry block:
//!   m_h, m_v                 u32
//!   d_h, d_v                 f64   (spacings over wavelength)
//!   q_h, q_v, l_h, l_v       u32
//! chi, phi                   f64
//! zeta_vv, zeta_hv           complex
//! n_entries                  u32
//! per entry (p-major region order):
//!   p, q                     u32   (1-based)
//!   se                       f64
//!   cand_h, cand_v           u32   (u32::MAX when absent)
//!   n_rf                     u32   (0 = fully digital)
//!   codeword                 M complex
//!   F                        M x n_rf complex, column-major (if n_rf > 0)
//!   v                        n_rf complex                  (if n_rf > 0)
//! ```

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::array_geometry::{ArrayConfig, Region, RegionGrid};
use crate::codebook::{Codebook, CodebookEntry, CodebookKind};
use crate::codeword_design::DesignSettings;
use crate::error::{Error, Result};
use crate::hybrid_factorization::HybridBeamformer;
use crate::polarization_channel::PolarizationParams;

pub const MAGIC: &[u8; 4] = b"DPCB";
pub const FORMAT_VERSION: u32 = 1;
const NO_CANDIDATE: u32 = u32::MAX;

fn geometry_block(array: &ArrayConfig, grid: &RegionGrid) -> Result<Vec<u8>> {
    let mut w = Vec::new();
    put_u32(&mut w, array.m_h)?;
    put_u32(&mut w, array.m_v)?;
    w.extend_from_slice(&array.d_h_over_lambda.to_le_bytes());
    w.extend_from_slice(&array.d_v_over_lambda.to_le_bytes());
    for x in [grid.q_h, grid.q_v, grid.l_h, grid.l_v] {
        put_u32(&mut w, x)?;
    }
    Ok(w)
}

/// Leading bytes of the SHA-256 of the geometry block, tying a codebook to
/// its array and region grid.
pub fn geometry_hash(array: &ArrayConfig, grid: &RegionGrid) -> Result<[u8; 8]> {
    let digest = Sha256::digest(geometry_block(array, grid)?);
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    Ok(out)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn put_u32(w: &mut Vec<u8>, x: usize) -> Result<()> {
    let x = u32::try_from(x).map_err(|_| Error::invalid(format!("{x} does not fit in u32")))?;
    w.extend_from_slice(&x.to_le_bytes());
    Ok(())
}

fn put_f64(w: &mut Vec<u8>, x: f64) {
    w.extend_from_slice(&x.to_le_bytes());
}

fn put_c64(w: &mut Vec<u8>, z: Complex64) {
    put_f64(w, z.re);
    put_f64(w, z.im);
}

/// Serializes a codebook into the binary layout above.
pub fn encode(cb: &Codebook) -> Result<Vec<u8>> {
    let mut w = Vec::new();
    w.extend_from_slice(MAGIC);
    w.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    w.extend_from_slice(&geometry_hash(&cb.array, &cb.grid)?);
    w.extend_from_slice(&cb.kind.code().to_le_bytes());
    w.extend_from_slice(&geometry_block(&cb.array, &cb.grid)?);
    put_f64(&mut w, cb.params.chi);
    put_f64(&mut w, cb.params.phi);
    put_c64(&mut w, cb.params.zeta_vv);
    put_c64(&mut w, cb.params.zeta_hv);
    put_u32(&mut w, cb.entries.len())?;
    let m = cb.array.total_elements();
    for e in &cb.entries {
        if e.codeword.len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                found: e.codeword.len(),
            });
        }
        put_u32(&mut w, e.region.p)?;
        put_u32(&mut w, e.region.q)?;
        put_f64(&mut w, e.se);
        match e.candidate {
            Some((a, b)) => {
                put_u32(&mut w, a)?;
                put_u32(&mut w, b)?;
            }
            None => {
                w.extend_from_slice(&NO_CANDIDATE.to_le_bytes());
                w.extend_from_slice(&NO_CANDIDATE.to_le_bytes());
            }
        }
        put_u32(&mut w, e.hybrid.as_ref().map_or(0, |h| h.n_rf()))?;
        e.codeword.iter().for_each(|z| put_c64(&mut w, *z));
        if let Some(h) = &e.hybrid {
            if h.f_analog.nrows() != m {
                return Err(Error::LengthMismatch {
                    expected: m,
                    found: h.f_analog.nrows(),
                });
            }
            // nalgebra storage is column-major.
            h.f_analog.iter().for_each(|z| put_c64(&mut w, *z));
            h.v_digital.iter().for_each(|z| put_c64(&mut w, *z));
        }
    }
    Ok(w)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn c64(&mut self) -> Result<Complex64> {
        Ok(Complex64::new(self.f64()?, self.f64()?))
    }

    fn c64s(&mut self, n: usize) -> Result<Vec<Complex64>> {
        // Bound the allocation by what the buffer can actually hold.
        if n.saturating_mul(16) > self.buf.len() - self.pos {
            return Err(Error::Format(format!("truncated at byte {}", self.pos)));
        }
        (0..n).map(|_| self.c64()).collect()
    }
}

/// Parses the binary layout, checking magic, version and geometry hash.
pub fn decode(bytes: &[u8]) -> Result<Codebook> {
    let mut r = Cursor { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let stored_hash: [u8; 8] = r.take(8)?.try_into().expect("8 bytes");
    let kind_code = r.u32()?;
    let kind = CodebookKind::from_code(kind_code)
        .ok_or_else(|| Error::Format(format!("unknown codebook kind {kind_code}")))?;
    let array = ArrayConfig {
        m_h: r.usize()?,
        m_v: r.usize()?,
        d_h_over_lambda: r.f64()?,
        d_v_over_lambda: r.f64()?,
    };
    let grid = RegionGrid {
        q_h: r.usize()?,
        q_v: r.usize()?,
        l_h: r.usize()?,
        l_v: r.usize()?,
    };
    array.validate().map_err(|e| Error::Format(e.to_string()))?;
    grid.validate().map_err(|e| Error::Format(e.to_string()))?;
    if geometry_hash(&array, &grid)? != stored_hash {
        return Err(Error::Format("geometry hash mismatch".into()));
    }
    let params = PolarizationParams {
        chi: r.f64()?,
        phi: r.f64()?,
        zeta_vv: r.c64()?,
        zeta_hv: r.c64()?,
    };
    params.validate().map_err(|e| Error::Format(e.to_string()))?;
    let n = r.usize()?;
    let m = array.total_elements();
    let mut entries = Vec::with_capacity(n.min(grid.num_regions()));
    for _ in 0..n {
        let region = Region::new(r.usize()?, r.usize()?);
        grid.check_region(region).map_err(|e| Error::Format(e.to_string()))?;
        let se = r.f64()?;
        let (ch, cv) = (r.u32()?, r.u32()?);
        let candidate = (ch != NO_CANDIDATE).then_some((ch as usize, cv as usize));
        let n_rf = r.usize()?;
        let codeword = DVector::from_vec(r.c64s(m)?);
        let hybrid = if n_rf > 0 {
            let f = DMatrix::from_vec(m, n_rf, r.c64s(m.saturating_mul(n_rf))?);
            let v = DVector::from_vec(r.c64s(n_rf)?);
            Some(HybridBeamformer {
                f_analog: f,
                v_digital: v,
            })
        } else {
            None
        };
        entries.push(CodebookEntry {
            region,
            codeword,
            hybrid,
            candidate,
            se,
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(Codebook {
        kind,
        array,
        grid,
        params,
        settings: None,
        entries,
    })
}

/// Metadata written next to the binary file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format_version: u32,
    pub kind: CodebookKind,
    pub geometry_hash: String,
    pub array: ArrayConfig,
    pub grid: RegionGrid,
    pub params: PolarizationParams,
    pub settings: Option<DesignSettings>,
    pub regions: Vec<SidecarRegion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarRegion {
    pub p: usize,
    pub q: usize,
    pub se: f64,
    pub candidate: Option<(usize, usize)>,
    pub n_rf: usize,
}

pub fn sidecar(cb: &Codebook) -> Result<Sidecar> {
    Ok(Sidecar {
        format_version: FORMAT_VERSION,
        kind: cb.kind,
        geometry_hash: hex(&geometry_hash(&cb.array, &cb.grid)?),
        array: cb.array,
        grid: cb.grid,
        params: cb.params,
        settings: cb.settings,
        regions: cb
            .entries
            .iter()
            .map(|e| SidecarRegion {
                p: e.region.p,
                q: e.region.q,
                se: e.se,
                candidate: e.candidate,
                n_rf: e.hybrid.as_ref().map_or(0, |h| h.n_rf()),
            })
            .collect(),
    })
}

/// Path of the JSON sidecar for a codebook file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the binary file and its sidecar.
pub fn write_codebook(path: &Path, cb: &Codebook) -> Result<()> {
    let bytes = encode(cb)?;
    std::fs::File::create(path)?.write_all(&bytes)?;
    let json = serde_json::to_string_pretty(&sidecar(cb)?).map_err(|e| Error::Internal(e.to_string()))?;
    std::fs::write(sidecar_path(path), json + "\n")?;
    Ok(())
}

/// Reads a binary codebook, restoring design settings from the sidecar when
/// one is present.
pub fn read_codebook(path: &Path) -> Result<Codebook> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut cb = decode(&bytes)?;
    if let Ok(text) = std::fs::read_to_string(sidecar_path(path)) {
        let meta: Sidecar = serde_json::from_str(&text).map_err(|e| Error::Format(format!("sidecar: {e}")))?;
        if meta.geometry_hash != hex(&geometry_hash(&cb.array, &cb.grid)?) {
            return Err(Error::Format("sidecar does not match codebook geometry".into()));
        }
        cb.settings = meta.settings;
    }
    Ok(cb)
}
