use rand::Rng;

use super::bank::PairBank;
use super::spec::{Architecture, AtomSpec, DetectorSpec};
use super::{Decompose, ForwardNodes};
use crate::error::Result;
use crate::grad::{NodeId, ParamStore, Tape};
use crate::scalar::Scalar;

/// Scalar detectors weighting full-length atoms: `x_hat = sum_p d_p(x) a_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErpDecomposer<F> {
    store: ParamStore<F>,
    bank: PairBank,
    signal_len: usize,
}

impl<F: Scalar> ErpDecomposer<F> {
    pub fn new<R: Rng + ?Sized>(n: usize, detector: DetectorSpec, signal_len: usize, rng: &mut R) -> Result<Self> {
        let mut store = ParamStore::new();
        let detector = DetectorSpec { final_scalar: true, ..detector };
        let atom = AtomSpec { length: signal_len, shared: false, full_length: true };
        let bank = PairBank::init(&mut store, "erp", n, detector, atom, signal_len, rng)?;
        Ok(Self { store, bank, signal_len })
    }

    pub fn bank(&self) -> &PairBank {
        &self.bank
    }

    /// Detector weights `d_p(x)` and the weighted sum of atoms.
    pub fn forward(&self, x: &[F]) -> Result<(Vec<F>, Vec<F>)> {
        let d = self.decompose(x)?;
        Ok((d.activations.iter().map(|z| z[0]).collect(), d.reconstruction))
    }
}

impl<F: Scalar> Decompose<F> for ErpDecomposer<F> {
    fn architecture(&self) -> Architecture {
        Architecture::Erp
    }

    fn store(&self) -> &ParamStore<F> {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore<F> {
        &mut self.store
    }

    fn banks(&self) -> Vec<&PairBank> {
        vec![&self.bank]
    }

    fn signal_length(&self) -> Option<usize> {
        Some(self.signal_len)
    }

    fn forward_tape(&self, tape: &mut Tape<F>, x: NodeId) -> Result<ForwardNodes> {
        self.check_input(tape.shape(x).1)?;
        let b = self.bank.forward(tape, &self.store, x)?;
        Ok(ForwardNodes {
            activations: b.activations,
            components: b.components,
            reconstruction: b.sum,
            estimates: None,
        })
    }
}
