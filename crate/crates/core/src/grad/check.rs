//! Central-difference verification of tape gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::param::ParamStore;
use super::tape::{NodeId, Tape};
use crate::error::Result;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct FiniteDiff {
    pub step: f64,
    /// Coordinates checked per parameter; `None` checks all of them.
    pub max_coords: Option<usize>,
    pub seed: u64,
}

impl Default for FiniteDiff {
    fn default() -> Self {
        Self { step: 1e-6, max_coords: None, seed: 0 }
    }
}

/// Result of a gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteDiffReport {
    pub max_rel_error: f64,
    pub coords_checked: usize,
}

/// Compares the tape gradient of `loss` against central differences.
///
/// The error for a coordinate is `|analytic - numeric| / max(1, |analytic|)`;
/// the report carries the maximum over all checked coordinates. `loss` must
/// rebuild the whole computation from the store it is handed.
pub fn finite_diff_check<F, L>(store: &ParamStore<F>, opts: FiniteDiff, mut loss: L) -> Result<FiniteDiffReport>
where
    F: Scalar,
    L: FnMut(&ParamStore<F>, &mut Tape<F>) -> Result<NodeId>,
{
    let mut tape = Tape::new();
    let root = loss(store, &mut tape)?;
    let mut analytic = store.zero_gradients();
    tape.backward(root, &mut analytic)?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut probe = store.clone();
    let h = F::lit(opts.step);
    let mut eval = |s: &ParamStore<F>| -> Result<f64> {
        let mut t = Tape::new();
        let r = loss(s, &mut t)?;
        Ok(t.scalar(r).to_f64_lossy())
    };

    let mut worst = 0.0f64;
    let mut checked = 0;
    for p in store.iter() {
        let coords: Vec<usize> = match opts.max_coords {
            Some(k) if k < p.len() => sample(&mut rng, p.len(), k).into_vec(),
            _ => (0..p.len()).collect(),
        };
        for i in coords {
            let orig = p.values[i];
            probe.values_mut(p.id)[i] = orig + h;
            let up = eval(&probe)?;
            probe.values_mut(p.id)[i] = orig - h;
            let down = eval(&probe)?;
            probe.values_mut(p.id)[i] = orig;
            let numeric = (up - down) / (2.0 * opts.step);
            let a = analytic.get(p.id)[i].to_f64_lossy();
            let err = (a - numeric).abs() / a.abs().max(1.0);
            worst = worst.max(err);
            checked += 1;
        }
    }
    Ok(FiniteDiffReport { max_rel_error: worst, coords_checked: checked })
}
