use rand::Rng;

use super::bank::PairBank;
use super::spec::{Architecture, AtomSpec, DetectorSpec};
use super::{Decompose, ForwardNodes};
use crate::error::Result;
use crate::grad::{NodeId, ParamId, ParamStore, Tape};
use crate::scalar::Scalar;

/// One detector per stimulus class, all convolving the same atom.
#[derive(Debug, Clone, PartialEq)]
pub struct SsvepDecomposer<F> {
    store: ParamStore<F>,
    bank: PairBank,
}

impl<F: Scalar> SsvepDecomposer<F> {
    pub fn new<R: Rng + ?Sized>(classes: usize, detector: DetectorSpec, atom_len: usize, rng: &mut R) -> Result<Self> {
        let mut store = ParamStore::new();
        let atom = AtomSpec { length: atom_len, shared: true, full_length: false };
        let bank = PairBank::init(&mut store, "ssvep", classes, detector, atom, 0, rng)?;
        Ok(Self { store, bank })
    }

    pub fn bank(&self) -> &PairBank {
        &self.bank
    }

    /// The single atom parameter every detector feeds.
    pub fn atom_id(&self) -> ParamId {
        self.bank.pairs[0].atom
    }

    pub fn forward(&self, x: &[F]) -> Result<(Vec<Vec<F>>, Vec<F>)> {
        let d = self.decompose(x)?;
        Ok((d.components, d.reconstruction))
    }
}

impl<F: Scalar> Decompose<F> for SsvepDecomposer<F> {
    fn architecture(&self) -> Architecture {
        Architecture::Ssvep
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
