//! Region-indexed codebooks, designed or baseline.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array_geometry::{upa_response_unpaired, ArrayConfig, Region, RegionGrid};
use crate::codeword_design::{dual_pol_beamformer, DesignSettings, Designer};
use crate::error::{Error, Result};
use crate::hybrid_factorization::HybridBeamformer;
use crate::polarization_channel::PolarizationParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodebookKind {
    /// Squared-error hybrid design.
    Proposed,
    /// Polarization-matched narrow beam at every region center.
    Baseline,
}

impl CodebookKind {
    pub fn code(self) -> u32 {
        match self {
            CodebookKind::Proposed => 1,
            CodebookKind::Baseline => 2,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            1 => Some(CodebookKind::Proposed),
            2 => Some(CodebookKind::Baseline),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodebookEntry {
    pub region: Region,
    /// Unit-norm codeword `c`.
    pub codeword: DVector<Complex64>,
    /// Analog/digital split; `None` for fully digital codewords.
    pub hybrid: Option<HybridBeamformer>,
    /// Winning candidate pair for designed entries.
    pub candidate: Option<(usize, usize)>,
    /// Squared error against the region's ideal pattern.
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub kind: CodebookKind,
    pub array: ArrayConfig,
    pub grid: RegionGrid,
    pub params: PolarizationParams,
    pub settings: Option<DesignSettings>,
    /// One entry per region, p-major.
    pub entries: Vec<CodebookEntry>,
}

impl Codebook {
    /// Runs the squared-error design over every region.
    pub fn design(designer: &Designer) -> Result<Codebook> {
        let entries = designer
            .design_codebook()?
            .into_iter()
            .map(|d| CodebookEntry {
                region: d.region,
                codeword: d.c,
                hybrid: Some(d.hybrid),
                candidate: Some(d.candidate.index),
                se: d.se,
            })
            .collect();
        Ok(Codebook {
            kind: CodebookKind::Proposed,
            array: designer.array,
            grid: designer.grid,
            params: designer.params,
            settings: Some(designer.settings),
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn codewords(&self) -> Vec<DVector<Complex64>> {
        self.entries.iter().map(|e| e.codeword.clone()).collect()
    }

    pub fn entry(&self, region: Region) -> Result<&CodebookEntry> {
        self.grid.check_region(region)?;
        self.entries
            .iter()
            .find(|e| e.region == region)
            .ok_or_else(|| Error::invalid(format!("codebook has no entry for region {region}")))
    }
}

/// Baseline codebook: `dual_pol_beamformer(d(center of region))` per region.
pub fn baseline_dft_codebook(grid: &RegionGrid, params: &PolarizationParams, cfg: &ArrayConfig) -> Result<Codebook> {
    // The designer is only used for its steering matrices and SE routine, so
    // the dictionary is kept minimal.
    let designer = Designer::new(
        *cfg,
        *grid,
        *params,
        DesignSettings {
            b_grid: 1,
            n_rf: 1,
            oversample_h: 1,
            oversample_v: 1,
            pol_phases: 1,
        },
    )?;
    let entries = grid
        .regions()
        .map(|region| {
            let center = grid.region_center(region);
            let c = dual_pol_beamformer(&upa_response_unpaired(center, cfg), params)?;
            let se = designer.squared_error_of(region, &c)?;
            Ok(CodebookEntry {
                region,
                codeword: c,
                hybrid: None,
                candidate: None,
                se,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Codebook {
        kind: CodebookKind::Baseline,
        array: *cfg,
        grid: *grid,
        params: *params,
        settings: None,
        entries,
    })
}
