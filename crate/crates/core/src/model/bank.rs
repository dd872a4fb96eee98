//! Detector-atom pairs and the banks that sum them.

use std::collections::HashMap;

use rand::Rng;

use super::spec::{AtomSpec, DetectorSpec};
use crate::error::{Error, Result};
use crate::grad::{NodeId, ParamId, ParamStore, Tape};
use crate::scalar::Scalar;

fn uniform<F: Scalar, R: Rng + ?Sized>(rng: &mut R, len: usize, bound: f64) -> Vec<F> {
    (0..len).map(|_| F::lit(rng.random_range(-bound..=bound))).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvParams {
    pub kernel: ParamId,
    pub bias: ParamId,
    pub out_channels: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseParams {
    pub weight: ParamId,
    pub bias: ParamId,
}

/// Parameter handles of one detector network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Detector {
    pub convs: Vec<ConvParams>,
    pub head: Option<DenseParams>,
}

impl Detector {
    /// Registers freshly initialized parameters; `input_len` sizes the dense head of scalar detectors.
    pub fn init<F: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        prefix: &str,
        spec: &DetectorSpec,
        input_len: usize,
        rng: &mut R,
    ) -> Result<Self> {
        spec.validate()?;
        let mut convs = Vec::with_capacity(spec.layers.len());
        for (k, l) in spec.layers.iter().enumerate() {
            let bound = 1.0 / ((l.in_channels * l.kernel_size) as f64).sqrt();
            let n = l.out_channels * l.in_channels * l.kernel_size;
            let kernel = store.add(
                format!("{prefix}.conv{k}.weight"),
                vec![l.out_channels, l.in_channels, l.kernel_size],
                uniform(rng, n, bound),
            )?;
            let bias = store.add(
                format!("{prefix}.conv{k}.bias"),
                vec![l.out_channels],
                uniform(rng, l.out_channels, bound),
            )?;
            convs.push(ConvParams { kernel, bias, out_channels: l.out_channels });
        }
        let head = if spec.final_scalar {
            let fan_in = spec.output_channels() * input_len;
            if fan_in == 0 {
                return Err(Error::Config("scalar detector needs a positive input length".into()));
            }
            let bound = 1.0 / (fan_in as f64).sqrt();
            let weight = store.add(format!("{prefix}.head.weight"), vec![1, fan_in], uniform(rng, fan_in, bound))?;
            let bias = store.add(format!("{prefix}.head.bias"), vec![1], uniform(rng, 1, bound))?;
            Some(DenseParams { weight, bias })
        } else {
            None
        };
        Ok(Self { convs, head })
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids: Vec<ParamId> = self.convs.iter().flat_map(|c| [c.kernel, c.bias]).collect();
        if let Some(h) = &self.head {
            ids.extend([h.weight, h.bias]);
        }
        ids
    }

    /// Non-negative activation: a `1 x T` signal, or `1 x 1` for scalar detectors.
    pub fn forward<F: Scalar>(&self, tape: &mut Tape<F>, store: &ParamStore<F>, x: NodeId) -> Result<NodeId> {
        let mut h = x;
        let last = self.convs.len() - 1;
        for (k, c) in self.convs.iter().enumerate() {
            let w = tape.param(store, c.kernel);
            let b = tape.param(store, c.bias);
            h = tape.conv(h, w, Some(b), c.out_channels)?;
            if k < last || self.head.is_some() {
                h = tape.relu(h);
            }
        }
        if let Some(head) = &self.head {
            let w = tape.param(store, head.weight);
            let b = tape.param(store, head.bias);
            h = tape.dense(h, w, Some(b))?;
        } else if self.convs[last].out_channels > 1 {
            h = tape.sum_channels(h);
        }
        Ok(tape.relu(h))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pair {
    pub detector: Detector,
    pub atom: ParamId,
}

/// Tape nodes produced by one bank.
#[derive(Debug, Clone)]
pub struct BankNodes {
    pub activations: Vec<NodeId>,
    pub components: Vec<NodeId>,
    pub sum: NodeId,
}

/// `N` detector-atom pairs whose outputs add up to the bank's reconstruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairBank {
    pub detector_spec: DetectorSpec,
    pub atom_spec: AtomSpec,
    pub pairs: Vec<Pair>,
}

impl PairBank {
    /// Builds `n` pairs. Shared-atom banks register a single atom parameter.
    pub fn init<F: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        prefix: &str,
        n: usize,
        detector_spec: DetectorSpec,
        atom_spec: AtomSpec,
        input_len: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("a bank needs at least one pair".into()));
        }
        atom_spec.validate()?;
        if detector_spec.final_scalar != atom_spec.full_length {
            return Err(Error::Config("scalar detectors pair with full-length atoms and vice versa".into()));
        }
        if atom_spec.full_length && atom_spec.length != input_len {
            return Err(Error::Config(format!(
                "full-length atoms must match the signal length {input_len}, got {}",
                atom_spec.length
            )));
        }
        let atom_bound = 1.0 / (atom_spec.length as f64).sqrt();
        let shared = if atom_spec.shared {
            Some(store.add(
                format!("{prefix}.atom"),
                vec![atom_spec.length],
                uniform(rng, atom_spec.length, atom_bound),
            )?)
        } else {
            None
        };
        let mut pairs = Vec::with_capacity(n);
        for i in 0..n {
            let detector =
                Detector::init(store, &format!("{prefix}.pair{i}.detector"), &detector_spec, input_len, rng)?;
            let atom = match shared {
                Some(id) => id,
                None => store.add(
                    format!("{prefix}.pair{i}.atom"),
                    vec![atom_spec.length],
                    uniform(rng, atom_spec.length, atom_bound),
                )?,
            };
            pairs.push(Pair { detector, atom });
        }
        Ok(Self { detector_spec, atom_spec, pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Distinct atom parameters, in pair order.
    pub fn atom_ids(&self) -> Vec<ParamId> {
        let mut ids: Vec<ParamId> = Vec::new();
        for p in &self.pairs {
            if !ids.contains(&p.atom) {
                ids.push(p.atom);
            }
        }
        ids
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids: Vec<ParamId> = self.pairs.iter().flat_map(|p| p.detector.param_ids()).collect();
        ids.extend(self.atom_ids());
        ids
    }

    pub fn forward<F: Scalar>(&self, tape: &mut Tape<F>, store: &ParamStore<F>, x: NodeId) -> Result<BankNodes> {
        let mut atoms: HashMap<ParamId, NodeId> = HashMap::new();
        let mut activations = Vec::with_capacity(self.len());
        let mut components = Vec::with_capacity(self.len());
        for pair in &self.pairs {
            let z = pair.detector.forward(tape, store, x)?;
            let a = *atoms.entry(pair.atom).or_insert_with(|| tape.param(store, pair.atom));
            let c = if self.atom_spec.full_length {
                let (_, len) = tape.shape(x);
                if len != self.atom_spec.length {
                    return Err(Error::Config(format!(
                        "input length {len} does not match atom length {}",
                        self.atom_spec.length
                    )));
                }
                tape.scale_by(z, a)?
            } else {
                tape.conv(z, a, None, 1)?
            };
            activations.push(z);
            components.push(c);
        }
        let sum = tape.add_n(&components)?;
        Ok(BankNodes { activations, components, sum })
    }

    /// Euclidean norm of each pair's atom.
    pub fn atom_norms<F: Scalar>(&self, store: &ParamStore<F>) -> Vec<F> {
        self.pairs.iter().map(|p| store.get(p.atom).norm()).collect()
    }

    /// Pairs whose atom norm falls below `threshold` times the median atom norm.
    pub fn detect_dead_atoms<F: Scalar>(&self, store: &ParamStore<F>, threshold: F) -> Result<Vec<usize>> {
        if !(threshold > F::zero()) {
            return Err(Error::Config("dead-atom threshold must be positive".into()));
        }
        let norms = self.atom_norms(store);
        let cut = threshold * median(&norms);
        Ok(norms.iter().enumerate().filter(|(_, &n)| n < cut).map(|(i, _)| i).collect())
    }

    /// Revives pair `dead` by splitting pair `donor`: the dead detector becomes a
    /// copy of the donor's, the first half of the donor atom moves to the dead
    /// pair and the donor keeps the second half. The two pairs together then
    /// produce exactly what the donor produced before.
    pub fn reassign<F: Scalar>(&self, store: &mut ParamStore<F>, dead: usize, donor: usize) -> Result<()> {
        if dead == donor {
            return Err(Error::Usage(format!("cannot reassign pair {dead} to itself")));
        }
        let n = self.len();
        if dead >= n || donor >= n {
            return Err(Error::Usage(format!("pair index out of range for a bank of {n}")));
        }
        let (k, r) = (&self.pairs[dead], &self.pairs[donor]);
        if k.atom == r.atom {
            return Err(Error::Config("pairs sharing one atom cannot be reassigned".into()));
        }
        let (len_k, len_r) = (store.get(k.atom).len(), store.get(r.atom).len());
        if len_k != len_r {
            return Err(Error::Config(format!("atom lengths differ: {len_k} vs {len_r}")));
        }
        for (dst, src) in k.detector.param_ids().into_iter().zip(r.detector.param_ids()) {
            let v = store.values(src).to_vec();
            store.values_mut(dst).copy_from_slice(&v);
        }
        let donor_atom = store.values(r.atom).to_vec();
        let split = len_r.div_ceil(2);
        let zero = F::zero();
        {
            let a_k = store.values_mut(k.atom);
            a_k[..split].copy_from_slice(&donor_atom[..split]);
            a_k[split..].iter_mut().for_each(|v| *v = zero);
        }
        store.values_mut(r.atom)[..split].iter_mut().for_each(|v| *v = zero);
        Ok(())
    }

    /// Pairs each dead index with a distinct live donor, busiest donors first.
    pub fn plan_reassignment<F: Scalar>(&self, dead: &[usize], energies: &[F]) -> Vec<(usize, usize)> {
        let mut live: Vec<usize> = (0..self.len()).filter(|i| !dead.contains(i)).collect();
        live.sort_by(|&a, &b| {
            let (ea, eb) =
                (energies.get(a).copied().unwrap_or(F::zero()), energies.get(b).copied().unwrap_or(F::zero()));
            eb.partial_cmp(&ea).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
        });
        dead.iter().copied().zip(live).collect()
    }
}

pub(crate) fn median<F: Scalar>(values: &[F]) -> F {
    if values.is_empty() {
        return F::zero();
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / F::lit(2.0)
    }
}
