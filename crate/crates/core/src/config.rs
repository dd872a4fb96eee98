//! Versioned TOML schemas for training runs and synthetic data specs.
//!
//! Training run:
//!
//! ```toml
//! version = 1
//! [model]
//! pairs = 4
//! atom_length = 32
//! detector_layers = [{ in_channels = 1, out_channels = 1, kernel_size = 16 }]
//! [train]
//! epochs = 1000
//! batch_size = 100
//! lr = 0.001
//! alpha_sparsity_schedule = [[0, 0.0], [4000, 1e-4]]
//! ```
//!
//! Synthetic data (`kind` selects which table is read):
//!
//! ```toml
//! version = 1
//! kind = "basic"   # basic | ssvep | noise | erp
//! count = 100      # basic, noise
//! [basic]
//! length = 256
//! atoms = [[0.0, 1.0, 0.5]]
//! activation_density = 0.01
//! amplitude_range = [0.5, 1.5]
//! noise_sigma = 0.05
//! seed = 7
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::synth::{ErpSynthSpec, NoiseMixSpec, SsvepSynthSpec, Stimulus, SynthSpec};
use crate::trainer::TrainConfig;

pub const CONFIG_VERSION: u32 = 1;

fn check_version(v: u32) -> Result<()> {
    if v != CONFIG_VERSION {
        return Err(Error::Config(format!("version: unsupported config version {v}, expected {CONFIG_VERSION}")));
    }
    Ok(())
}

fn parse_toml<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = parse_toml(text)?;
        check_version(cfg.version)?;
        cfg.train.validate().map_err(|e| Error::Config(format!("train: {e}")))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    Basic,
    Ssvep,
    Noise,
    Erp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthFile {
    pub version: u32,
    pub kind: SynthKind,
    /// Number of signals (basic, noise).
    #[serde(default)]
    pub count: Option<usize>,
    /// Trials per class (ssvep, erp).
    #[serde(default)]
    pub n_per_class: Option<usize>,
    /// Write the binary dataset form instead of text.
    #[serde(default)]
    pub binary: bool,
    #[serde(default)]
    pub basic: Option<SynthSpec>,
    #[serde(default)]
    pub ssvep: Option<SsvepSynthSpec>,
    #[serde(default)]
    pub stimuli: Option<Vec<Stimulus>>,
    #[serde(default)]
    pub noise: Option<NoiseMixSpec>,
    #[serde(default)]
    pub erp: Option<ErpSynthSpec>,
}

impl SynthFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        let f: Self = parse_toml(text)?;
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        check_version(self.version)?;
        let missing = |field: &str| Error::Config(format!("{field}: required for kind {:?}", self.kind));
        let prefix = |field: &'static str| move |e: Error| Error::Config(format!("{field}: {e}"));
        match self.kind {
            SynthKind::Basic => {
                self.count.ok_or_else(|| missing("count"))?;
                self.basic.as_ref().ok_or_else(|| missing("basic"))?.validate().map_err(prefix("basic"))?;
            }
            SynthKind::Noise => {
                self.count.ok_or_else(|| missing("count"))?;
                let n = self.noise.as_ref().ok_or_else(|| missing("noise"))?;
                n.signal.validate().map_err(prefix("noise.signal"))?;
                if n.artifact.is_empty() || n.artifact.len() > n.signal.length {
                    return Err(Error::Config("noise.artifact: must be non-empty and fit in the signal".into()));
                }
                if !(0.0..=1.0).contains(&n.event_rate) {
                    return Err(Error::Config("noise.event_rate: must lie in [0, 1]".into()));
                }
            }
            SynthKind::Ssvep => {
                self.n_per_class.ok_or_else(|| missing("n_per_class"))?;
                let s = self.ssvep.as_ref().ok_or_else(|| missing("ssvep"))?;
                s.validate().map_err(prefix("ssvep"))?;
                let stimuli = self.stimuli.as_ref().ok_or_else(|| missing("stimuli"))?;
                if stimuli.is_empty() {
                    return Err(Error::Config("stimuli: at least one stimulus is required".into()));
                }
                for st in stimuli {
                    s.period(st.frequency).map_err(prefix("stimuli"))?;
                }
            }
            SynthKind::Erp => {
                self.n_per_class.ok_or_else(|| missing("n_per_class"))?;
                self.erp.as_ref().ok_or_else(|| missing("erp"))?.validate().map_err(prefix("erp"))?;
            }
        }
        Ok(())
    }

    /// Replaces the generator seed of the active spec.
    pub fn set_seed(&mut self, seed: u64) {
        match self.kind {
            SynthKind::Basic => self.basic.iter_mut().for_each(|s| s.seed = seed),
            SynthKind::Noise => self.noise.iter_mut().for_each(|s| s.signal.seed = seed),
            SynthKind::Ssvep => self.ssvep.iter_mut().for_each(|s| s.seed = seed),
            SynthKind::Erp => self.erp.iter_mut().for_each(|s| s.seed = seed),
        }
    }

    pub fn seed(&self) -> u64 {
        match self.kind {
            SynthKind::Basic => self.basic.as_ref().map_or(0, |s| s.seed),
            SynthKind::Noise => self.noise.as_ref().map_or(0, |s| s.signal.seed),
            SynthKind::Ssvep => self.ssvep.as_ref().map_or(0, |s| s.seed),
            SynthKind::Erp => self.erp.as_ref().map_or(0, |s| s.seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_config_defaults_and_schedule() {
        let cfg = RunConfig::from_toml(
            "version = 1\n[train]\nepochs = 10\nalpha_sparsity_schedule = [[0, 0.0], [5, 1e-4]]\n",
        )
        .unwrap();
        assert_eq!(cfg.train.batch_size, 100);
        assert_eq!(cfg.train.beta1, 0.5);
        assert_eq!(cfg.train.alpha_sparsity_schedule, vec![(0, 0.0), (5, 1e-4)]);
        assert_eq!(cfg.model.pairs, 4);
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn run_config_errors_name_fields() {
        let e = RunConfig::from_toml("version = 2\n[train]\nepochs = 1\n").unwrap_err();
        assert!(e.to_string().contains("version"));
        let e = RunConfig::from_toml("version = 1\n[train]\nepochs = 0\n").unwrap_err();
        assert!(e.to_string().contains("epochs"));
        let e = RunConfig::from_toml("version = 1\n[train]\nepochs = 1\nbogus = 3\n").unwrap_err();
        assert!(e.to_string().contains("bogus"));
    }

    #[test]
    fn synth_file_requires_kind_table() {
        let e = SynthFile::from_toml("version = 1\nkind = \"basic\"\ncount = 3\n").unwrap_err();
        assert!(e.to_string().contains("basic"));
        let ok = SynthFile::from_toml(
            "version = 1\nkind = \"basic\"\ncount = 3\n[basic]\nlength = 8\natoms = [[1.0]]\n\
             activation_density = 0.1\namplitude_range = [1.0, 1.0]\nnoise_sigma = 0.0\n",
        )
        .unwrap();
        assert_eq!(ok.count, Some(3));
    }
}
