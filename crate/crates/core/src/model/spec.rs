use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four decomposer variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Basic,
    Noise,
    Ssvep,
    Erp,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [Self::Basic, Self::Noise, Self::Ssvep, Self::Erp];

    pub fn tag(self) -> u32 {
        match self {
            Self::Basic => 0,
            Self::Noise => 1,
            Self::Ssvep => 2,
            Self::Erp => 3,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Basic => "basic",
            Self::Noise => "noise",
            Self::Ssvep => "ssvep",
            Self::Erp => "erp",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown architecture `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvLayerSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
}

impl ConvLayerSpec {
    pub fn new(in_channels: usize, out_channels: usize, kernel_size: usize) -> Self {
        Self { in_channels, out_channels, kernel_size }
    }
}

/// Layer layout of a detector: causal conv + ReLU stages, ending either in a
/// non-negative signal or, with `final_scalar`, a dense map to one non-negative value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectorSpec {
    pub layers: Vec<ConvLayerSpec>,
    pub final_scalar: bool,
}

impl DetectorSpec {
    pub fn signal(layers: Vec<ConvLayerSpec>) -> Self {
        Self { layers, final_scalar: false }
    }

    pub fn scalar(layers: Vec<ConvLayerSpec>) -> Self {
        Self { layers, final_scalar: true }
    }

    /// `depth` single-channel layers of width `kernel`.
    pub fn single_channel(depth: usize, kernel: usize) -> Self {
        Self::signal(vec![ConvLayerSpec::new(1, 1, kernel); depth])
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.layers.first().ok_or_else(|| Error::Config("detector needs at least one layer".into()))?;
        if first.in_channels != 1 {
            return Err(Error::Config(format!("first detector layer must take 1 channel, got {}", first.in_channels)));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.kernel_size == 0 || l.out_channels == 0 || l.in_channels == 0 {
                return Err(Error::Config(format!("detector layer {i} has a zero dimension")));
            }
        }
        for (i, w) in self.layers.windows(2).enumerate() {
            if w[0].out_channels != w[1].in_channels {
                return Err(Error::Config(format!(
                    "detector layer {} emits {} channels but layer {} expects {}",
                    i,
                    w[0].out_channels,
                    i + 1,
                    w[1].in_channels
                )));
            }
        }
        Ok(())
    }

    pub fn output_channels(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_channels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AtomSpec {
    pub length: usize,
    /// One atom shared by every detector in the bank.
    pub shared: bool,
    /// Atom spans the whole signal and is scaled, not convolved.
    pub full_length: bool,
}

impl AtomSpec {
    pub fn convolutional(length: usize) -> Self {
        Self { length, shared: false, full_length: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::Config("atom length must be at least 1".into()));
        }
        Ok(())
    }
}

/// User-facing model layout, as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Detector-atom pairs (basic, ssvep, erp).
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    /// Pairs in the signal estimator (noise).
    #[serde(default = "default_pairs")]
    pub signal_pairs: usize,
    /// Pairs in the noise estimator (noise).
    #[serde(default = "default_pairs")]
    pub noise_pairs: usize,
    /// Atom length; the ERP variant always uses the signal length.
    #[serde(default = "default_atom_length")]
    pub atom_length: usize,
    #[serde(default = "default_layers")]
    pub detector_layers: Vec<ConvLayerSpec>,
}

fn default_pairs() -> usize {
    4
}

fn default_atom_length() -> usize {
    32
}

fn default_layers() -> Vec<ConvLayerSpec> {
    vec![ConvLayerSpec::new(1, 1, 16)]
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            pairs: default_pairs(),
            signal_pairs: default_pairs(),
            noise_pairs: default_pairs(),
            atom_length: default_atom_length(),
            detector_layers: default_layers(),
        }
    }
}
