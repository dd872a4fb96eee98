use rand::Rng;

use super::bank::PairBank;
use super::spec::{Architecture, AtomSpec, DetectorSpec};
use super::{Decompose, ForwardNodes};
use crate::error::Result;
use crate::grad::{NodeId, ParamId, ParamStore, Tape};
use crate::scalar::Scalar;

/// Signal and noise estimators in series: the noise estimate is computed from
/// the raw input and subtracted before the signal estimator runs.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDecomposer<F> {
    store: ParamStore<F>,
    signal: PairBank,
    noise: PairBank,
}

impl<F: Scalar> NoiseDecomposer<F> {
    pub fn new<R: Rng + ?Sized>(
        signal_pairs: usize,
        noise_pairs: usize,
        detector: DetectorSpec,
        atom_len: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut store = ParamStore::new();
        let atom = AtomSpec::convolutional(atom_len);
        let signal = PairBank::init(&mut store, "signal", signal_pairs, detector.clone(), atom, 0, rng)?;
        let noise = PairBank::init(&mut store, "noise", noise_pairs, detector, atom, 0, rng)?;
        Ok(Self { store, signal, noise })
    }

    pub fn signal_bank(&self) -> &PairBank {
        &self.signal
    }

    pub fn noise_bank(&self) -> &PairBank {
        &self.noise
    }

    pub fn signal_params(&self) -> Vec<ParamId> {
        self.signal.param_ids()
    }

    pub fn noise_params(&self) -> Vec<ParamId> {
        self.noise.param_ids()
    }

    /// `(s_hat, n_hat)` with `n_hat = N_N(x)` and `s_hat = N_S(x - n_hat)`.
    pub fn forward(&self, x: &[F]) -> Result<(Vec<F>, Vec<F>)> {
        let d = self.decompose(x)?;
        Ok((d.signal_estimate.unwrap_or_default(), d.noise_estimate.unwrap_or_default()))
    }
}

impl<F: Scalar> Decompose<F> for NoiseDecomposer<F> {
    fn architecture(&self) -> Architecture {
        Architecture::Noise
    }

    fn store(&self) -> &ParamStore<F> {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore<F> {
        &mut self.store
    }

    fn banks(&self) -> Vec<&PairBank> {
        vec![&self.signal, &self.noise]
    }

    fn forward_tape(&self, tape: &mut Tape<F>, x: NodeId) -> Result<ForwardNodes> {
        let n = self.noise.forward(tape, &self.store, x)?;
        let cleaned = tape.sub(x, n.sum)?;
        let s = self.signal.forward(tape, &self.store, cleaned)?;
        let reconstruction = tape.add(s.sum, n.sum)?;
        let mut activations = s.activations;
        activations.extend(n.activations);
        let mut components = s.components;
        components.extend(n.components);
        Ok(ForwardNodes { activations, components, reconstruction, estimates: Some((s.sum, n.sum)) })
    }
}
