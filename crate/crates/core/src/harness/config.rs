use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::plan::Variant;
use crate::rank1::LatticeSource;

/// Default cap on `|I|` for grid points.
pub const DEFAULT_MAX_CARD: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    OversamplingFull,
    OversamplingReduction,
    SampleRatio,
    ApproxG3,
    Roundtrip,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::OversamplingFull,
        Experiment::OversamplingReduction,
        Experiment::SampleRatio,
        Experiment::ApproxG3,
        Experiment::Roundtrip,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::OversamplingFull => "oversampling-full",
            Experiment::OversamplingReduction => "oversampling-reduction",
            Experiment::SampleRatio => "sample-ratio",
            Experiment::ApproxG3 => "approx-g3",
            Experiment::Roundtrip => "roundtrip",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown experiment {s:?}")))
    }
}

/// Frequency-set family of a grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// `H^d_{R,even}`; grid over `dims × radii`.
    #[default]
    HyperbolicCross,
    /// `s` distinct points of `[-R, R]^d`; grid over `dims × radii × sizes × seeds`.
    Random,
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hyperbolic-cross" => Ok(Family::HyperbolicCross),
            "random" => Ok(Family::Random),
            _ => Err(Error::invalid(format!(
                "unknown family {s:?} (expected hyperbolic-cross or random)"
            ))),
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_repetitions() -> usize {
    1
}

fn default_source() -> LatticeSource {
    LatticeSource::Lat1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub family: Family,
    pub dims: Vec<usize>,
    pub radii: Vec<u64>,
    /// Cardinalities of random sets.
    #[serde(default)]
    pub sizes: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Random sets per grid point; rows report the maximum.
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_source")]
    pub source: LatticeSource,
    /// Overrides the variant implied by the experiment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    /// Grid points with a larger `|I|` are skipped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_card: Option<u64>,
    /// Truncation order of the `g_3` coefficient table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    /// Cache file for the `g_3` coefficient table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g3_table: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Desk-scale defaults for each experiment.
    pub fn preset(experiment: Experiment) -> Self {
        let pow2 = |hi: u32| (1..=hi).map(|j| 1u64 << j).collect::<Vec<_>>();
        let base = ExperimentConfig {
            experiment,
            family: Family::HyperbolicCross,
            dims: (2..=9).collect(),
            radii: pow2(10),
            sizes: Vec::new(),
            seeds: vec![0],
            repetitions: 1,
            source: LatticeSource::Lat1,
            variant: None,
            max_card: None,
            k_max: None,
            g3_table: None,
            output: None,
        };
        match experiment {
            Experiment::OversamplingFull | Experiment::OversamplingReduction => base,
            Experiment::SampleRatio => ExperimentConfig {
                dims: vec![2, 3, 5],
                radii: pow2(8),
                source: LatticeSource::Cbc,
                max_card: Some(10_000),
                ..base
            },
            Experiment::ApproxG3 => ExperimentConfig {
                dims: vec![2, 3, 5, 8],
                ..base
            },
            Experiment::Roundtrip => ExperimentConfig {
                family: Family::Random,
                dims: vec![2, 3, 6, 10],
                radii: vec![64],
                sizes: vec![10, 100, 1000],
                ..base
            },
        }
    }

    /// Random-set oversampling with the reduction variant.
    pub fn random_reduction_preset() -> Self {
        ExperimentConfig {
            family: Family::Random,
            dims: vec![2, 3, 4, 6, 10, 100, 1000, 10_000],
            radii: vec![64],
            sizes: vec![10, 100, 1000, 10_000],
            repetitions: 10,
            source: LatticeSource::Cbc,
            max_card: None,
            ..Self::preset(Experiment::OversamplingReduction)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse {
            line: e
                .span()
                .map(|s| text[..s.start].lines().count().max(1))
                .unwrap_or(0),
            msg: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.radii.is_empty() || self.seeds.is_empty() {
            return Err(Error::invalid("dims, radii and seeds must be non-empty"));
        }
        if self.dims.contains(&0) {
            return Err(Error::invalid("dimensions must be positive"));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions must be at least 1"));
        }
        if self.source == LatticeSource::User {
            return Err(Error::invalid("experiments need lat1, lat2 or cbc lattices"));
        }
        match self.family {
            Family::Random => {
                if self.sizes.is_empty() || self.sizes.contains(&0) {
                    return Err(Error::invalid("random sets need positive sizes"));
                }
                if self.radii.contains(&0) {
                    return Err(Error::invalid("random sets need a positive radius"));
                }
            }
            Family::HyperbolicCross => {
                if self.experiment == Experiment::Roundtrip && self.radii.contains(&0) {
                    return Err(Error::invalid("radii must be positive"));
                }
            }
        }
        if self.experiment == Experiment::ApproxG3 && self.family != Family::HyperbolicCross {
            return Err(Error::invalid("approx-g3 runs on hyperbolic crosses"));
        }
        let implied = match self.experiment {
            Experiment::OversamplingFull => Some(Variant::Full),
            Experiment::OversamplingReduction => Some(Variant::Reduction),
            _ => None,
        };
        if let (Some(v), Some(i)) = (self.variant, implied) {
            if v != i {
                return Err(Error::invalid(format!(
                    "experiment {} implies the {i} variant",
                    self.experiment
                )));
            }
        }
        if self.experiment == Experiment::ApproxG3 && self.variant == Some(Variant::Reduction) {
            return Err(Error::invalid("approx-g3 averages over full-variant lattices"));
        }
        Ok(())
    }

    pub fn variant(&self) -> Variant {
        match self.experiment {
            Experiment::OversamplingFull => Variant::Full,
            Experiment::OversamplingReduction => Variant::Reduction,
            _ => self.variant.unwrap_or(Variant::Full),
        }
    }

    pub fn max_card(&self) -> u64 {
        self.max_card.unwrap_or(DEFAULT_MAX_CARD)
    }

    /// SHA-256 of the TOML form without the output path.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        Sha256::digest(c.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
