use rand::Rng;

use super::bank::PairBank;
use super::spec::{Architecture, AtomSpec, DetectorSpec};
use super::{Decompose, ForwardNodes};
use crate::error::Result;
use crate::grad::{NodeId, ParamStore, Tape};
use crate::scalar::Scalar;

/// `N` independent detector-atom pairs; the reconstruction is the sum of their outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct BasicDecomposer<F> {
    store: ParamStore<F>,
    bank: PairBank,
}

impl<F: Scalar> BasicDecomposer<F> {
    pub fn new<R: Rng + ?Sized>(n: usize, detector: DetectorSpec, atom_len: usize, rng: &mut R) -> Result<Self> {
        let mut store = ParamStore::new();
        let bank = PairBank::init(&mut store, "bank0", n, detector, AtomSpec::convolutional(atom_len), 0, rng)?;
        Ok(Self { store, bank })
    }

    pub fn bank(&self) -> &PairBank {
        &self.bank
    }

    /// Components `A_n(D_n(x))` and their sum.
    pub fn forward(&self, x: &[F]) -> Result<(Vec<Vec<F>>, Vec<F>)> {
        let d = self.decompose(x)?;
        Ok((d.components, d.reconstruction))
    }

    pub fn detect_dead_atoms(&self, threshold: F) -> Result<Vec<usize>> {
        self.bank.detect_dead_atoms(&self.store, threshold)
    }
}

impl<F: Scalar> Decompose<F> for BasicDecomposer<F> {
    fn architecture(&self) -> Architecture {
        Architecture::Basic
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

    fn forward_tape(&self, tape: &mut Tape<F>, x: NodeId) -> Result<ForwardNodes> {
        let b = self.bank.forward(tape, &self.store, x)?;
        Ok(ForwardNodes {
            activations: b.activations,
            components: b.components,
            reconstruction: b.sum,
            estimates: None,
        })
    }
}
