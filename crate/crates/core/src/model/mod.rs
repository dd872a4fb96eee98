//! Decomposer architectures built from detector-atom pairs.

mod bank;
mod basic;
mod erp;
mod noise;
mod serialize;
mod spec;
mod ssvep;

pub use bank::{BankNodes, ConvParams, DenseParams, Detector, Pair, PairBank};
pub use basic::BasicDecomposer;
pub use erp::ErpDecomposer;
pub use noise::NoiseDecomposer;
pub use serialize::{load_model, read_model, save_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use spec::{Architecture, AtomSpec, ConvLayerSpec, DetectorSpec, ModelConfig};
pub use ssvep::SsvepDecomposer;

use rand::Rng;

use crate::error::{Error, Result};
use crate::grad::{NodeId, ParamStore, Tape};
use crate::scalar::{round_f32, Scalar};

/// Tape nodes of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardNodes {
    /// Detector outputs of every pair, bank by bank.
    pub activations: Vec<NodeId>,
    /// Pair outputs, aligned with `activations`.
    pub components: Vec<NodeId>,
    pub reconstruction: NodeId,
    /// `(s_hat, n_hat)` for the noise-reduction variant.
    pub estimates: Option<(NodeId, NodeId)>,
}

/// Plain-value result of decomposing one signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition<F> {
    pub components: Vec<Vec<F>>,
    pub activations: Vec<Vec<F>>,
    pub reconstruction: Vec<F>,
    pub signal_estimate: Option<Vec<F>>,
    pub noise_estimate: Option<Vec<F>>,
}

/// Behaviour shared by every architecture.
pub trait Decompose<F: Scalar> {
    fn architecture(&self) -> Architecture;

    fn store(&self) -> &ParamStore<F>;

    fn store_mut(&mut self) -> &mut ParamStore<F>;

    /// Pair banks in declaration order (signal estimator first for the noise variant).
    fn banks(&self) -> Vec<&PairBank>;

    /// Required input length, for architectures with full-length atoms.
    fn signal_length(&self) -> Option<usize> {
        None
    }

    fn forward_tape(&self, tape: &mut Tape<F>, x: NodeId) -> Result<ForwardNodes>;

    fn check_input(&self, len: usize) -> Result<()> {
        match self.signal_length() {
            Some(t) if t != len => Err(Error::Config(format!("model expects signals of length {t}, got {len}"))),
            _ => Ok(()),
        }
    }

    fn decompose(&self, x: &[F]) -> Result<Decomposition<F>> {
        self.check_input(x.len())?;
        let mut tape = Tape::new();
        let input = tape.signal(x);
        let out = self.forward_tape(&mut tape, input)?;
        let grab = |ids: &[NodeId]| ids.iter().map(|&id| tape.value(id).to_vec()).collect::<Vec<_>>();
        Ok(Decomposition {
            components: grab(&out.components),
            activations: grab(&out.activations),
            reconstruction: tape.value(out.reconstruction).to_vec(),
            signal_estimate: out.estimates.map(|(s, _)| tape.value(s).to_vec()),
            noise_estimate: out.estimates.map(|(_, n)| tape.value(n).to_vec()),
        })
    }

    fn num_components(&self) -> usize {
        self.banks().iter().map(|b| b.len()).sum()
    }

    /// Revives pair `dead` of `bank` from `donor`; see [`PairBank::reassign`].
    fn reassign(&mut self, bank: usize, dead: usize, donor: usize) -> Result<()> {
        let b = self.banks().get(bank).map(|b| (*b).clone()).ok_or_else(|| Error::Usage(format!("no bank {bank}")))?;
        b.reassign(self.store_mut(), dead, donor)
    }

    /// Rounds every parameter to single precision, the precision models are stored at.
    fn quantize_f32(&mut self) {
        for p in self.store_mut().iter_mut() {
            p.values.iter_mut().for_each(|v| *v = round_f32(*v));
        }
    }
}

/// Any of the four architectures.
#[derive(Debug, Clone, PartialEq)]
pub enum Decomposer<F> {
    Basic(BasicDecomposer<F>),
    Noise(NoiseDecomposer<F>),
    Ssvep(SsvepDecomposer<F>),
    Erp(ErpDecomposer<F>),
}

macro_rules! delegate {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            Decomposer::Basic($m) => $e,
            Decomposer::Noise($m) => $e,
            Decomposer::Ssvep($m) => $e,
            Decomposer::Erp($m) => $e,
        }
    };
}

impl<F: Scalar> Decompose<F> for Decomposer<F> {
    fn architecture(&self) -> Architecture {
        delegate!(self, m => m.architecture())
    }

    fn store(&self) -> &ParamStore<F> {
        delegate!(self, m => m.store())
    }

    fn store_mut(&mut self) -> &mut ParamStore<F> {
        delegate!(self, m => m.store_mut())
    }

    fn banks(&self) -> Vec<&PairBank> {
        delegate!(self, m => m.banks())
    }

    fn signal_length(&self) -> Option<usize> {
        delegate!(self, m => m.signal_length())
    }

    fn forward_tape(&self, tape: &mut Tape<F>, x: NodeId) -> Result<ForwardNodes> {
        delegate!(self, m => m.forward_tape(tape, x))
    }
}

impl<F: Scalar> Decomposer<F> {
    /// Builds a randomly initialized model of the given architecture for signals of length `signal_len`.
    pub fn build<R: Rng + ?Sized>(
        arch: Architecture,
        config: &ModelConfig,
        signal_len: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let det = DetectorSpec::signal(config.detector_layers.clone());
        Ok(match arch {
            Architecture::Basic => Self::Basic(BasicDecomposer::new(config.pairs, det, config.atom_length, rng)?),
            Architecture::Noise => Self::Noise(NoiseDecomposer::new(
                config.signal_pairs,
                config.noise_pairs,
                det,
                config.atom_length,
                rng,
            )?),
            Architecture::Ssvep => Self::Ssvep(SsvepDecomposer::new(config.pairs, det, config.atom_length, rng)?),
            Architecture::Erp => Self::Erp(ErpDecomposer::new(
                config.pairs,
                DetectorSpec::scalar(config.detector_layers.clone()),
                signal_len,
                rng,
            )?),
        })
    }
}

impl<F> From<BasicDecomposer<F>> for Decomposer<F> {
    fn from(m: BasicDecomposer<F>) -> Self {
        Self::Basic(m)
    }
}

impl<F> From<NoiseDecomposer<F>> for Decomposer<F> {
    fn from(m: NoiseDecomposer<F>) -> Self {
        Self::Noise(m)
    }
}

impl<F> From<SsvepDecomposer<F>> for Decomposer<F> {
    fn from(m: SsvepDecomposer<F>) -> Self {
        Self::Ssvep(m)
    }
}

impl<F> From<ErpDecomposer<F>> for Decomposer<F> {
    fn from(m: ErpDecomposer<F>) -> Self {
        Self::Erp(m)
    }
}
