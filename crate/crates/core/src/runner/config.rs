//! Experiment configuration: a TOML file with one table per component, plus
//! dotted-key overrides from the command line.

use std::f64::consts::FRAC_PI_4;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::array_geometry::{ArrayConfig, RegionGrid};
use crate::codeword_design::DesignSettings;
use crate::error::{Error, Result};
use crate::polarization_channel::{complex_gaussian, PolarizationParams};
use crate::simulation::SimulationConfig;

/// Where the polarization path gains `zeta_vv`, `zeta_hv` come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum ZetaSource {
    /// Fixed values, each written as `[re, im]`.
    Fixed { vv: Complex64, hv: Complex64 },
    /// One unit-variance circular Gaussian pair drawn from `seed`.
    Seeded { seed: u64 },
}

impl Default for ZetaSource {
    fn default() -> Self {
        ZetaSource::Fixed {
            vv: Complex64::new(1.0, 0.0),
            hv: Complex64::new(1.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarizationSection {
    pub chi: f64,
    /// Nominal polarization rotation used for design.
    pub phi: f64,
    #[serde(default)]
    pub zeta: ZetaSource,
}

impl Default for PolarizationSection {
    fn default() -> Self {
        PolarizationSection {
            chi: 0.3,
            phi: FRAC_PI_4,
            zeta: ZetaSource::default(),
        }
    }
}

impl PolarizationSection {
    pub fn params(&self) -> Result<PolarizationParams> {
        let (vv, hv) = match self.zeta {
            ZetaSource::Fixed { vv, hv } => (vv, hv),
            ZetaSource::Seeded { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (complex_gaussian(&mut rng), complex_gaussian(&mut rng))
            }
        };
        PolarizationParams::new(self.chi, self.phi, vv, hv)
    }
}

fn default_array() -> ArrayConfig {
    ArrayConfig {
        m_h: 8,
        m_v: 16,
        d_h_over_lambda: 0.5,
        d_v_over_lambda: 0.5,
    }
}

fn default_grid() -> RegionGrid {
    RegionGrid {
        q_h: 6,
        q_v: 6,
        l_h: 7,
        l_v: 7,
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_array")]
    pub array: ArrayConfig,
    #[serde(default = "default_grid")]
    pub grid: RegionGrid,
    #[serde(default)]
    pub polarization: PolarizationSection,
    #[serde(default)]
    pub design: DesignSettings,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            array: default_array(),
            grid: default_grid(),
            polarization: PolarizationSection::default(),
            design: DesignSettings::default(),
            simulation: SimulationConfig::default(),
            output_dir: default_output_dir(),
        }
    }
}

fn require(ok: bool, key: &str, message: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(key, message))
    }
}

fn positive_finite(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

impl ExperimentConfig {
    /// Checks every nested invariant, naming the offending key on failure.
    pub fn validate(&self) -> Result<()> {
        let a = &self.array;
        require(a.m_h >= 1, "array.m_h", "must be >= 1")?;
        require(a.m_v >= 1, "array.m_v", "must be >= 1")?;
        require(positive_finite(a.d_h_over_lambda), "array.d_h_over_lambda", "must be positive and finite")?;
        require(positive_finite(a.d_v_over_lambda), "array.d_v_over_lambda", "must be positive and finite")?;

        let g = &self.grid;
        require(g.q_h >= 1, "grid.q_h", "must be >= 1")?;
        require(g.q_v >= 1, "grid.q_v", "must be >= 1")?;
        require(g.l_h >= 1, "grid.l_h", "must be >= 1")?;
        require(g.l_v >= 1, "grid.l_v", "must be >= 1")?;

        let p = &self.polarization;
        require((0.0..=1.0).contains(&p.chi), "polarization.chi", "must lie in [0, 1]")?;
        require(p.phi.is_finite(), "polarization.phi", "must be finite")?;
        if let ZetaSource::Fixed { vv, hv } = p.zeta {
            require(vv.is_finite(), "polarization.zeta.vv", "must be finite")?;
            require(hv.is_finite(), "polarization.zeta.hv", "must be finite")?;
        }
        p.params().map_err(|e| Error::config("polarization.zeta", e.to_string()))?;

        let d = &self.design;
        require(d.b_grid >= 1, "design.b_grid", "must be >= 1")?;
        require(d.n_rf >= 1, "design.n_rf", "must be >= 1")?;
        require(d.oversample_h >= 1, "design.oversample_h", "must be >= 1")?;
        require(d.oversample_v >= 1, "design.oversample_v", "must be >= 1")?;
        require(d.pol_phases >= 1, "design.pol_phases", "must be >= 1")?;

        let s = &self.simulation;
        require(s.n_trials >= 1, "simulation.n_trials", "must be >= 1")?;
        require(!s.snr_db_grid.is_empty(), "simulation.snr_db_grid", "must be non-empty")?;
        require(
            s.snr_db_grid.iter().all(|x| !x.is_nan() && *x != f64::INFINITY),
            "simulation.snr_db_grid",
            "entries must be finite or -inf",
        )?;
        let c = &s.channel;
        require(c.k_factor >= 0.0, "simulation.channel.k_factor", "must be non-negative")?;
        require(c.phi_nominal.is_finite(), "simulation.channel.phi_nominal", "must be finite")?;
        require(c.phi_jitter >= 0.0, "simulation.channel.phi_jitter", "must be non-negative")?;
        c.validate()
            .map_err(|e| Error::config("simulation.channel", e.to_string()))?;
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_table(parse_table(text)?)
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: ExperimentConfig = table
            .clone()
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(error_key(&e, &table), e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads `path` (or the defaults when `None`) and applies `key=value`
    /// overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => parse_table(&std::fs::read_to_string(p)?)?,
            None => toml::Table::try_from(ExperimentConfig::default())
                .map_err(|e| Error::Internal(e.to_string()))?,
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_table(table)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Internal(e.to_string()))
    }
}

fn parse_table(text: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>()
        .map_err(|e| Error::config("<file>", e.message().to_string()))
}

/// Best-effort dotted path for a deserialization error. The deserializer
/// names the offending field but not its parent tables, so the field is
/// looked up in the source table.
fn error_key(e: &toml::de::Error, table: &toml::Table) -> String {
    let msg = e.message();
    let Some(field) = msg.split('`').nth(1) else {
        return "<root>".to_string();
    };
    find_key(table, field, "").unwrap_or_else(|| field.to_string())
}

fn find_key(table: &toml::Table, field: &str, prefix: &str) -> Option<String> {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    if table.contains_key(field) {
        return Some(join(field));
    }
    table.iter().find_map(|(k, v)| v.as_table().and_then(|t| find_key(t, field, &join(k))))
}

/// Applies one `dotted.key=value` override; the value is read as a TOML
/// literal, falling back to a bare string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(spec, "override must have the form key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));

    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(key, "empty key segment"));
    }
    let mut node = table;
    for (i, part) in parts[..parts.len() - 1].iter().enumerate() {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(parts[..=i].join("."), "is not a table"))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
