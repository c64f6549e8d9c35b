//! TOML configuration (`schema = "tilekmc-config/1"`).
//!
//! ```toml
//! schema = "tilekmc-config/1"
//!
//! [simulation]
//! lattice_side = 64
//! substrate_energy = 0.5
//! bonds = { e11 = 0.5, e22 = 0.5, e12 = 0.5 }
//!
//! [sweep]
//! id = "mini"
//! e12 = { start = 0.1, stop = 1.0, step = 0.1 }
//! substrate_energy = [0.5, 1.0]
//! ```
//!
//! Every field has a default, so an empty `[simulation]` table describes a
//! 256x256 two-species run.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complexity::ParamPoint;
use crate::energetics::{BondTable, EnergyModel};
use crate::kmc::SimConfig;
use crate::lattice::{LabelId, SpeciesDescriptor, SpeciesSet};

pub const SCHEMA: &str = "tilekmc-config/1";

/// Sweep steps default to this many events per tile the coverage cap allows.
pub const STEPS_PER_TILE: u64 = 40;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("unsupported schema {found:?}, expected {SCHEMA:?}")]
    Schema { found: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("range for {0} is empty")]
    EmptyRange(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema: String,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

impl Default for ConfigFile {
    fn default() -> Self {
        ConfigFile {
            schema: SCHEMA.to_string(),
            simulation: SimulationSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

impl ConfigFile {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if cfg.schema != SCHEMA {
            return Err(ConfigError::Schema { found: cfg.schema });
        }
        cfg.simulation.resolve(None, cfg.simulation.seed)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub lattice_side: usize,
    pub max_coverage: f64,
    pub substrate_energy: f64,
    pub rotation_energy: f64,
    pub tt0: f64,
    pub deposition_rate: f64,
    /// Defaults to `STEPS_PER_TILE` times the tile cap.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    pub seed: u64,
    pub bonds: BondsSection,
    /// Defaults to species `A` (all sides `1`) and `B` (all sides `2`) at equal shares.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub species: Vec<SpeciesEntry>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            lattice_side: 256,
            max_coverage: 0.25,
            substrate_energy: 0.5,
            rotation_energy: 1.3,
            tt0: 0.028,
            deposition_rate: 5e-5,
            steps: None,
            seed: 0,
            bonds: BondsSection::default(),
            species: Vec::new(),
        }
    }
}

/// Either a named preset, an explicit label list with pair energies, or the
/// two-label shortcut `e11`/`e22`/`e12`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BondsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<PairEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e11: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e22: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e12: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairEntry {
    pub a: String,
    pub b: String,
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesEntry {
    pub name: String,
    /// Labels on the north, east, south and west sides.
    pub edges: [String; 4],
    pub concentration: f64,
}

impl BondsSection {
    fn is_two_label(&self) -> bool {
        self.preset.is_none() && self.labels.is_none()
    }

    fn build(&self) -> Result<BondTable, ConfigError> {
        let shortcut = self.e11.is_some() || self.e22.is_some() || self.e12.is_some();
        match (&self.preset, &self.labels) {
            (Some(_), Some(_)) => Err(ConfigError::Invalid("bonds: give either preset or labels, not both".into())),
            _ if shortcut && !self.is_two_label() => Err(ConfigError::Invalid(
                "bonds: e11/e22/e12 cannot be combined with preset or labels".into(),
            )),
            (Some(p), None) => {
                let mut t = match p.as_str() {
                    "functional-groups" => BondTable::functional_groups(),
                    other => return Err(ConfigError::Invalid(format!("unknown bond preset {other:?}"))),
                };
                self.apply_pairs(&mut t)?;
                Ok(t)
            }
            (None, Some(labels)) => {
                let mut t = BondTable::new(labels.iter().cloned());
                self.apply_pairs(&mut t)?;
                Ok(t)
            }
            (None, None) => {
                if !self.pairs.is_empty() {
                    return Err(ConfigError::Invalid("bonds: pairs need a labels list or preset".into()));
                }
                Ok(BondTable::two_label(
                    self.e11.unwrap_or(0.5),
                    self.e22.unwrap_or(0.5),
                    self.e12.unwrap_or(0.5),
                ))
            }
        }
    }

    fn apply_pairs(&self, t: &mut BondTable) -> Result<(), ConfigError> {
        for p in &self.pairs {
            let a = t.label_id(&p.a).map_err(|e| ConfigError::Invalid(e.to_string()))?;
            let b = t.label_id(&p.b).map_err(|e| ConfigError::Invalid(e.to_string()))?;
            t.set(a, b, p.energy);
        }
        Ok(())
    }
}

impl SimulationSection {
    /// Run configuration for one simulation. A parameter point overrides the
    /// substrate energy and the two-label bond energies.
    pub fn resolve(&self, point: Option<ParamPoint>, seed: u64) -> Result<SimConfig, ConfigError> {
        let mut bonds_cfg = self.bonds.clone();
        let mut substrate = self.substrate_energy;
        if let Some(p) = point {
            if !bonds_cfg.is_two_label() {
                return Err(ConfigError::Invalid(
                    "parameter sweeps need the two-label bond shortcut (e11/e22/e12)".into(),
                ));
            }
            bonds_cfg.e11 = Some(p.e11);
            bonds_cfg.e22 = Some(p.e22);
            bonds_cfg.e12 = Some(p.e12);
            substrate = p.substrate;
        }
        let bonds = bonds_cfg.build()?;
        let species = self.species_set(&bonds)?;
        let energy = EnergyModel::new(bonds, substrate, self.rotation_energy, self.tt0, self.deposition_rate)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let mut cfg = SimConfig {
            lattice_side: self.lattice_side,
            species,
            energy,
            max_coverage: self.max_coverage,
            steps: 0,
            seed,
        };
        cfg.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.steps = self.steps.unwrap_or(STEPS_PER_TILE * cfg.max_tiles() as u64);
        if cfg.steps == 0 {
            return Err(ConfigError::Invalid("steps must be positive".into()));
        }
        Ok(cfg)
    }

    fn species_set(&self, bonds: &BondTable) -> Result<SpeciesSet, ConfigError> {
        let entries = if self.species.is_empty() {
            if bonds.label_count() < 2 {
                return Err(ConfigError::Invalid("default species need labels \"1\" and \"2\"".into()));
            }
            let side = |l: &str| [l, l, l, l].map(String::from);
            vec![
                SpeciesEntry {
                    name: "A".into(),
                    edges: side(&bonds.labels()[0]),
                    concentration: 0.5,
                },
                SpeciesEntry {
                    name: "B".into(),
                    edges: side(&bonds.labels()[1]),
                    concentration: 0.5,
                },
            ]
        } else {
            self.species.clone()
        };
        let mut out = Vec::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            let mut labels: [LabelId; 4] = [0; 4];
            for (k, name) in e.edges.iter().enumerate() {
                labels[k] = bonds
                    .label_id(name)
                    .map_err(|err| ConfigError::Invalid(format!("species {}: {err}", e.name)))?;
            }
            let id = u8::try_from(i + 1).map_err(|_| ConfigError::Invalid("too many species".into()))?;
            out.push(SpeciesDescriptor::new(id, e.name.clone(), labels, e.concentration));
        }
        SpeciesSet::new(out, bonds.label_count()).map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

/// A parameter axis: one value, a list, or an inclusive stepped span.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RangeSpec {
    Value(f64),
    Values(Vec<f64>),
    Span { start: f64, stop: f64, step: f64 },
}

impl RangeSpec {
    pub fn span(start: f64, stop: f64, step: f64) -> Self {
        RangeSpec::Span { start, stop, step }
    }

    /// Values on the axis, rounded to 1e-12 so that `0.1 * 3` prints as `0.3`.
    pub fn values(&self, name: &str) -> Result<Vec<f64>, ConfigError> {
        let round = |x: f64| (x * 1e12).round() / 1e12;
        let v: Vec<f64> = match self {
            RangeSpec::Value(x) => vec![*x],
            RangeSpec::Values(xs) => xs.clone(),
            RangeSpec::Span { start, stop, step } => {
                if !(*step > 0.0) || stop < start {
                    return Err(ConfigError::EmptyRange(name.to_string()));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                (0..=n).map(|i| start + i as f64 * step).collect()
            }
        };
        if v.is_empty() {
            return Err(ConfigError::EmptyRange(name.to_string()));
        }
        if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
            return Err(ConfigError::Invalid(format!("{name}: non-finite value {bad}")));
        }
        Ok(v.into_iter().map(round).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub id: String,
    pub substrate_energy: RangeSpec,
    pub e11: RangeSpec,
    pub e22: RangeSpec,
    pub e12: RangeSpec,
    pub seeds_per_point: u32,
    pub base_seed: u64,
}

impl Default for SweepSection {
    fn default() -> Self {
        let bonds = RangeSpec::span(0.1, 1.0, 0.1);
        SweepSection {
            id: "sweep".into(),
            substrate_energy: RangeSpec::span(0.5, 1.0, 0.1),
            e11: bonds.clone(),
            e22: bonds.clone(),
            e12: bonds,
            seeds_per_point: 1,
            base_seed: 0,
        }
    }
}
