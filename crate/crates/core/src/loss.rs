//! Training objectives, in two forms: plain evaluations over slices and
//! differentiable builders on a [`Tape`].
//!
//! Reconstruction terms are mean squared errors over time; the sparsity term
//! is a plain sum of absolute activations.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grad::{NodeId, Tape};
use crate::scalar::Scalar;
use crate::signal::NoiseMask;

/// Which noise-estimator objective is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoisePhase {
    /// Fit the noise bank to the input inside noise events only.
    Initial,
    /// Fit noise plus signal estimates inside noise events.
    Refined,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub alpha_sparsity: f64,
    pub phase: NoisePhase,
}

impl LossWeights {
    pub fn new(alpha_sparsity: f64, phase: NoisePhase) -> Result<Self> {
        if !(alpha_sparsity >= 0.0) {
            return Err(Error::Config(format!("alpha_sparsity must be >= 0, got {alpha_sparsity}")));
        }
        Ok(Self { alpha_sparsity, phase })
    }
}

fn mean_sq<F: Scalar>(it: impl Iterator<Item = F>, n: usize) -> F {
    if n == 0 {
        return F::zero();
    }
    it.map(|v| v * v).sum::<F>() / F::lit(n as f64)
}

pub fn fidelity_loss<F: Scalar>(x: &[F], reconstruction: &[F]) -> Result<F> {
    check_len(x.len(), reconstruction.len())?;
    Ok(mean_sq(x.iter().zip(reconstruction).map(|(&a, &b)| a - b), x.len()))
}

/// Per-class objective: reconstruct when the label matches, stay silent otherwise.
pub fn supervised_loss<F: Scalar>(x: &[F], label: usize, class: usize, reconstruction: &[F]) -> Result<F> {
    check_len(x.len(), reconstruction.len())?;
    if label == class {
        fidelity_loss(x, reconstruction)
    } else {
        Ok(mean_sq(reconstruction.iter().copied(), reconstruction.len()))
    }
}

pub fn sparsity_loss<F: Scalar, S: AsRef<[F]>>(activations: &[S]) -> F {
    activations.iter().flat_map(|z| z.as_ref().iter()).map(|v| v.abs()).sum()
}

/// Signal-estimator objective: the two estimates together should explain the input.
pub fn noise_loss_s<F: Scalar>(x: &[F], s_hat: &[F], n_hat: &[F]) -> Result<F> {
    check_len(x.len(), s_hat.len())?;
    check_len(x.len(), n_hat.len())?;
    Ok(mean_sq(x.iter().zip(s_hat).zip(n_hat).map(|((&x, &s), &n)| x - (s + n)), x.len()))
}

/// Noise-estimator objective. `s_hat` is required in the refined phase and ignored in the initial one.
pub fn noise_loss_n<F: Scalar>(
    x: &[F],
    n_hat: &[F],
    mask: &NoiseMask,
    phase: NoisePhase,
    s_hat: Option<&[F]>,
) -> Result<F> {
    check_len(x.len(), n_hat.len())?;
    check_len(x.len(), mask.len())?;
    let s = match (phase, s_hat) {
        (NoisePhase::Refined, None) => return Err(Error::Usage("refined noise loss needs the signal estimate".into())),
        (NoisePhase::Refined, Some(s)) => {
            check_len(x.len(), s.len())?;
            Some(s)
        }
        (NoisePhase::Initial, _) => None,
    };
    let flags = mask.flags();
    let inside = flags.iter().filter(|&&f| f).count();
    let outside = flags.len() - inside;
    let fit =
        mean_sq((0..x.len()).filter(|&i| flags[i]).map(|i| x[i] - n_hat[i] - s.map_or(F::zero(), |s| s[i])), inside);
    let quiet = mean_sq((0..x.len()).filter(|&i| !flags[i]).map(|i| n_hat[i]), outside);
    Ok(fit + quiet)
}

/// Reconstruction error of the summed components plus the energy of every non-target component.
pub fn ssvep_loss<F: Scalar, S: AsRef<[F]>>(x: &[F], components: &[S], label: usize) -> Result<F> {
    if label >= components.len() {
        return Err(Error::InvalidValue(format!("label {label} out of range for {} components", components.len())));
    }
    let mut total = vec![F::zero(); x.len()];
    for c in components {
        let c = c.as_ref();
        check_len(x.len(), c.len())?;
        total.iter_mut().zip(c).for_each(|(t, &v)| *t += v);
    }
    let l1 = fidelity_loss(x, &total)?;
    let l2: F = components
        .iter()
        .enumerate()
        .filter(|&(l, _)| l != label)
        .map(|(_, c)| mean_sq(c.as_ref().iter().copied(), c.as_ref().len()))
        .sum();
    Ok(l1 + l2)
}

/// Differentiable counterparts of the functions above.
pub mod tape {
    use super::*;

    pub fn fidelity<F: Scalar>(t: &mut Tape<F>, x: NodeId, reconstruction: NodeId) -> Result<NodeId> {
        let d = t.sub(x, reconstruction)?;
        Ok(t.mean_square(d))
    }

    pub fn supervised<F: Scalar>(
        t: &mut Tape<F>,
        x: NodeId,
        label: usize,
        class: usize,
        reconstruction: NodeId,
    ) -> Result<NodeId> {
        if label == class {
            fidelity(t, x, reconstruction)
        } else {
            Ok(t.mean_square(reconstruction))
        }
    }

    pub fn sparsity<F: Scalar>(t: &mut Tape<F>, activations: &[NodeId]) -> Result<NodeId> {
        let sums: Vec<NodeId> = activations.iter().map(|&z| t.sum_abs(z)).collect();
        if sums.is_empty() {
            return Ok(t.constant(F::zero()));
        }
        t.add_n(&sums)
    }

    pub fn noise_s<F: Scalar>(t: &mut Tape<F>, x: NodeId, s_hat: NodeId, n_hat: NodeId) -> Result<NodeId> {
        let both = t.add(s_hat, n_hat)?;
        fidelity(t, x, both)
    }

    pub fn noise_n<F: Scalar>(
        t: &mut Tape<F>,
        x: NodeId,
        n_hat: NodeId,
        mask: &NoiseMask,
        phase: NoisePhase,
        s_hat: Option<NodeId>,
    ) -> Result<NodeId> {
        let explained = match (phase, s_hat) {
            (NoisePhase::Refined, None) => {
                return Err(Error::Usage("refined noise loss needs the signal estimate".into()))
            }
            (NoisePhase::Refined, Some(s)) => t.add(n_hat, s)?,
            (NoisePhase::Initial, _) => n_hat,
        };
        let flags: Arc<[bool]> = mask.flags().into();
        let resid = t.sub(x, explained)?;
        let fit = t.masked_mean_square(resid, flags.clone(), true)?;
        let quiet = t.masked_mean_square(n_hat, flags, false)?;
        t.add(fit, quiet)
    }

    pub fn ssvep<F: Scalar>(t: &mut Tape<F>, x: NodeId, components: &[NodeId], label: usize) -> Result<NodeId> {
        if label >= components.len() {
            return Err(Error::InvalidValue(format!("label {label} out of range for {} components", components.len())));
        }
        let total = t.add_n(components)?;
        let mut terms = vec![fidelity(t, x, total)?];
        for (l, &c) in components.iter().enumerate() {
            if l != label {
                terms.push(t.mean_square(c));
            }
        }
        t.add_n(&terms)
    }
}
