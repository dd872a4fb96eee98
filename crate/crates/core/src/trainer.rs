//! Mini-batch training of any decomposer with Adam.
//!
//! Each epoch shuffles the samples with a `ChaCha8Rng` seeded from the
//! config (one generator for the whole run, so epoch order depends only on
//! the seed), splits them into batches (the last may be partial), and takes
//! one optimizer step per batch on the mean per-sample loss.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grad::{AdamConfig, AdamState, Gradients, ParamId, Tape};
use crate::loss::{self, NoisePhase};
use crate::model::{Architecture, Decompose};
use crate::scalar::Scalar;
use crate::signal::{Dataset, NoiseMask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_wd")]
    pub weight_decay: f64,
    /// `(start_epoch, alpha)` steps; alpha is 0 before the first entry.
    #[serde(default)]
    pub alpha_sparsity_schedule: Vec<(usize, f64)>,
    /// Divide the sparsity weight by the signal length.
    #[serde(default)]
    pub normalize_sparsity: bool,
    /// Epoch at which the noise estimator switches to the refined objective.
    #[serde(default)]
    pub noise_phase_switch_epoch: Option<usize>,
    /// Dead-atom check period in epochs; 0 disables reassignment.
    #[serde(default)]
    pub reassign_check_every: usize,
    #[serde(default = "default_reassign_threshold")]
    pub reassign_threshold: f64,
    /// Class index of each pair; enables the per-class supervised objective (basic and erp).
    #[serde(default)]
    pub class_groups: Option<Vec<usize>>,
    #[serde(default)]
    pub seed: u64,
}

fn default_batch() -> usize {
    100
}
fn default_lr() -> f64 {
    1e-3
}
fn default_beta1() -> f64 {
    0.5
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}
fn default_wd() -> f64 {
    1e-5
}
fn default_reassign_threshold() -> f64 {
    1e-3
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            batch_size: default_batch(),
            lr: default_lr(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
            weight_decay: default_wd(),
            alpha_sparsity_schedule: vec![],
            normalize_sparsity: false,
            noise_phase_switch_epoch: None,
            reassign_check_every: 0,
            reassign_threshold: default_reassign_threshold(),
            class_groups: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, beta1: self.beta1, beta2: self.beta2, eps: self.eps, weight_decay: self.weight_decay }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.lr >= 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("lr must be >= 0 and betas in [0, 1)".into()));
        }
        if !(self.eps > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config("eps must be > 0 and weight_decay >= 0".into()));
        }
        if self.alpha_sparsity_schedule.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Config("alpha_sparsity_schedule epochs must be strictly increasing".into()));
        }
        if self.alpha_sparsity_schedule.iter().any(|&(_, a)| !(a >= 0.0)) {
            return Err(Error::Config("alpha_sparsity values must be >= 0".into()));
        }
        if !(self.reassign_threshold > 0.0) {
            return Err(Error::Config("reassign_threshold must be positive".into()));
        }
        Ok(())
    }
}

/// Active sparsity weight and noise phase at `epoch`.
pub fn apply_schedules(config: &TrainConfig, epoch: usize) -> (f64, NoisePhase) {
    let alpha =
        config.alpha_sparsity_schedule.iter().take_while(|&&(start, _)| start <= epoch).last().map_or(0.0, |&(_, a)| a);
    let phase = match config.noise_phase_switch_epoch {
        Some(s) if epoch >= s => NoisePhase::Refined,
        _ => NoisePhase::Initial,
    };
    (alpha, phase)
}

/// The loss a model is trained with.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// Mean squared reconstruction error.
    Fidelity,
    /// Per-class decomposers: pair `n` belongs to class `groups[n]`.
    Supervised { groups: Vec<usize> },
    /// Separate signal- and noise-estimator losses driven by noise masks.
    Noise,
    /// Reconstruction plus energy of non-target class components.
    Ssvep,
}

impl Objective {
    /// Picks the objective for an architecture, checking the dataset carries what it needs.
    pub fn select<F: Scalar, M: Decompose<F> + ?Sized>(
        model: &M,
        config: &TrainConfig,
        data: &Dataset<F>,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Incompatible("dataset is empty".into()));
        }
        let t = data.signal_len().unwrap_or(0);
        if let Some(need) = model.signal_length() {
            if need != t {
                return Err(Error::Incompatible(format!("model expects length {need}, dataset has {t}")));
            }
        }
        let arch = model.architecture();
        let n = model.num_components();
        let obj = match (arch, &config.class_groups) {
            (Architecture::Noise, _) => {
                if data.masks().is_none() {
                    return Err(Error::Incompatible("the noise architecture needs noise masks".into()));
                }
                Objective::Noise
            }
            (Architecture::Ssvep, _) => {
                if !data.has_labels() {
                    return Err(Error::Incompatible("the ssvep architecture needs class labels".into()));
                }
                if data.num_classes() > n {
                    return Err(Error::Incompatible(format!(
                        "{} classes in the data but only {n} detectors",
                        data.num_classes()
                    )));
                }
                Objective::Ssvep
            }
            (Architecture::Basic | Architecture::Erp, Some(groups)) => {
                if groups.len() != n {
                    return Err(Error::Config(format!("class_groups has {} entries for {n} pairs", groups.len())));
                }
                if !data.has_labels() {
                    return Err(Error::Incompatible("supervised training needs class labels".into()));
                }
                Objective::Supervised { groups: groups.clone() }
            }
            (Architecture::Basic | Architecture::Erp, None) => Objective::Fidelity,
        };
        Ok(obj)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reassignment {
    pub bank: usize,
    pub dead: usize,
    pub donor: usize,
}

/// Means over the epoch's samples.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub total: f64,
    /// Data term of the objective (everything but the sparsity penalty).
    pub fidelity: f64,
    pub sparsity: f64,
    /// Mean squared error of the full reconstruction.
    pub reconstruction_mse: f64,
    pub alpha: f64,
    pub reassignments: Vec<Reassignment>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `epoch,total,fidelity,sparsity,reassigns`
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,total,fidelity,sparsity,reassigns\n");
        for r in &self.records {
            let _ = writeln!(s, "{},{},{},{},{}", r.epoch, r.total, r.fidelity, r.sparsity, r.reassignments.len());
        }
        s
    }
}

struct SampleOutcome<F> {
    grads: Gradients<F>,
    fidelity: f64,
    sparsity: f64,
    reconstruction_mse: f64,
    energies: Vec<Vec<f64>>,
}

/// Stateful training loop; [`train`] drives it over a fixed dataset, callers
/// that swap datasets between epochs can call [`Trainer::epoch`] directly.
pub struct Trainer<F> {
    config: TrainConfig,
    objective: Objective,
    adam: AdamState<F>,
    rng: ChaCha8Rng,
    epoch: usize,
    /// Per-bank, per-pair output energy over the most recent batch.
    last_energies: Vec<Vec<f64>>,
}

impl<F: Scalar> Trainer<F> {
    pub fn new<M: Decompose<F> + ?Sized>(model: &M, config: TrainConfig, data: &Dataset<F>) -> Result<Self> {
        config.validate()?;
        let objective = Objective::select(model, &config, data)?;
        let adam = AdamState::new(config.adam(), model.store());
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let last_energies = model.banks().iter().map(|b| vec![0.0; b.len()]).collect();
        Ok(Self { config, objective, adam, rng, epoch: 0, last_energies })
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn adam(&self) -> &AdamState<F> {
        &self.adam
    }

    pub fn next_epoch(&self) -> usize {
        self.epoch
    }

    /// Runs one epoch over `data`.
    pub fn epoch<M: Decompose<F> + ?Sized>(&mut self, model: &mut M, data: &Dataset<F>) -> Result<EpochRecord> {
        if data.is_empty() {
            return Err(Error::Incompatible("dataset is empty".into()));
        }
        let epoch = self.epoch;
        let (alpha, phase) = apply_schedules(&self.config, epoch);
        let weight = if self.config.normalize_sparsity { alpha / data.signal_len().unwrap_or(1) as f64 } else { alpha };
        let reassignments = if self.config.reassign_check_every > 0
            && epoch > 0
            && epoch.is_multiple_of(self.config.reassign_check_every)
        {
            self.reassign_dead(model)?
        } else {
            vec![]
        };

        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.rng);
        let (mut fid, mut spa, mut rec) = (0.0, 0.0, 0.0);
        for (b, batch) in order.chunks(self.config.batch_size).enumerate() {
            let mut acc = model.store().zero_gradients();
            let mut energies: Vec<Vec<f64>> = self.last_energies.iter().map(|e| vec![0.0; e.len()]).collect();
            for &i in batch {
                let out = self.sample(model, data, i, weight, phase)?;
                acc.add_assign(&out.grads);
                fid += out.fidelity;
                spa += out.sparsity;
                rec += out.reconstruction_mse;
                for (e, o) in energies.iter_mut().zip(&out.energies) {
                    e.iter_mut().zip(o).for_each(|(a, b)| *a += b);
                }
            }
            acc.scale(F::one() / F::lit(batch.len() as f64));
            if !acc.is_finite() || !(fid + spa).is_finite() {
                let norms: Vec<String> =
                    model.store().iter().map(|p| format!("{}={:.3e}", p.name, p.norm().to_f64_lossy())).collect();
                return Err(Error::Numeric(format!(
                    "non-finite loss or gradient at epoch {epoch}, batch {b}; parameter norms: {}",
                    norms.join(", ")
                )));
            }
            let store = model.store_mut();
            store.zero_grad();
            store.accumulate(&acc);
            self.adam.step(store);
            self.last_energies = energies;
        }
        let n = data.len() as f64;
        let (fidelity, sparsity) = (fid / n, spa / n);
        self.epoch += 1;
        Ok(EpochRecord {
            epoch,
            total: fidelity + weight * sparsity,
            fidelity,
            sparsity,
            reconstruction_mse: rec / n,
            alpha,
            reassignments,
        })
    }

    fn reassign_dead<M: Decompose<F> + ?Sized>(&mut self, model: &mut M) -> Result<Vec<Reassignment>> {
        let threshold = F::lit(self.config.reassign_threshold);
        let mut plan = Vec::new();
        for (bi, bank) in model.banks().iter().enumerate() {
            if bank.atom_spec.shared {
                continue;
            }
            let dead = bank.detect_dead_atoms(model.store(), threshold)?;
            if dead.is_empty() {
                continue;
            }
            let energies: Vec<F> = self.last_energies[bi].iter().map(|&e| F::lit(e)).collect();
            for (dead, donor) in bank.plan_reassignment(&dead, &energies) {
                plan.push(Reassignment { bank: bi, dead, donor });
            }
        }
        for r in &plan {
            model.reassign(r.bank, r.dead, r.donor)?;
            let bank = model.banks()[r.bank].clone();
            for idx in [r.dead, r.donor] {
                let pair = &bank.pairs[idx];
                for id in pair.detector.param_ids().into_iter().chain([pair.atom]) {
                    self.adam.reset_moments(id);
                }
            }
        }
        Ok(plan)
    }

    fn sample<M: Decompose<F> + ?Sized>(
        &self,
        model: &M,
        data: &Dataset<F>,
        i: usize,
        alpha: f64,
        phase: NoisePhase,
    ) -> Result<SampleOutcome<F>> {
        let s = &data.samples()[i];
        let x = s.signal.as_slice();
        let mut tape = Tape::new();
        let xn = tape.signal(x);
        let out = model.forward_tape(&mut tape, xn)?;
        let mut grads = model.store().zero_gradients();
        let a = F::lit(alpha);
        let label = || s.label.ok_or_else(|| Error::Incompatible(format!("sample {i} has no label")));

        let (fidelity, sparsity) = match &self.objective {
            Objective::Noise => {
                let (s_hat, n_hat) =
                    out.estimates.ok_or_else(|| Error::Usage("noise objective on a non-noise model".into()))?;
                let mask: &NoiseMask = &data.masks().ok_or_else(|| Error::Incompatible("missing masks".into()))?[i];
                let banks = model.banks();
                let n_signal = banks[0].len();
                let signal_ids: Vec<ParamId> = banks[0].param_ids();
                let noise_ids: Vec<ParamId> = banks[1].param_ids();
                let ls = loss::tape::noise_s(&mut tape, xn, s_hat, n_hat)?;
                let ln = loss::tape::noise_n(&mut tape, xn, n_hat, mask, phase, Some(s_hat))?;
                let sp_s = loss::tape::sparsity(&mut tape, &out.activations[..n_signal])?;
                let sp_n = loss::tape::sparsity(&mut tape, &out.activations[n_signal..])?;
                let ws = tape.scale(sp_s, a);
                let wn = tape.scale(sp_n, a);
                let root_s = tape.add(ls, ws)?;
                let root_n = tape.add(ln, wn)?;
                let mut gs = model.store().zero_gradients();
                tape.backward(root_s, &mut gs)?;
                gs.retain(|id| signal_ids.contains(&id));
                let mut gn = model.store().zero_gradients();
                tape.backward(root_n, &mut gn)?;
                gn.retain(|id| noise_ids.contains(&id));
                grads.add_assign(&gs);
                grads.add_assign(&gn);
                (tape.scalar(ls) + tape.scalar(ln), tape.scalar(sp_s) + tape.scalar(sp_n))
            }
            obj => {
                let data_term = match obj {
                    Objective::Fidelity => loss::tape::fidelity(&mut tape, xn, out.reconstruction)?,
                    Objective::Ssvep => loss::tape::ssvep(&mut tape, xn, &out.components, label()?)?,
                    Objective::Supervised { groups } => {
                        let y = label()?;
                        let classes = groups.iter().copied().max().map_or(0, |m| m + 1);
                        let mut terms = Vec::with_capacity(classes);
                        for c in 0..classes {
                            let members: Vec<_> =
                                out.components.iter().zip(groups).filter(|(_, &g)| g == c).map(|(&n, _)| n).collect();
                            if members.is_empty() {
                                continue;
                            }
                            let recon = tape.add_n(&members)?;
                            terms.push(loss::tape::supervised(&mut tape, xn, y, c, recon)?);
                        }
                        tape.add_n(&terms)?
                    }
                    Objective::Noise => unreachable!(),
                };
                let sp = loss::tape::sparsity(&mut tape, &out.activations)?;
                let weighted = tape.scale(sp, a);
                let root = tape.add(data_term, weighted)?;
                tape.backward(root, &mut grads)?;
                (tape.scalar(data_term), tape.scalar(sp))
            }
        };
        let recon_mse = loss::fidelity_loss(x, tape.value(out.reconstruction))?;

        let mut energies = Vec::new();
        let mut k = 0;
        for bank in model.banks() {
            let mut e = Vec::with_capacity(bank.len());
            for _ in 0..bank.len() {
                e.push(tape.value(out.components[k]).iter().map(|v| v.to_f64_lossy().powi(2)).sum());
                k += 1;
            }
            energies.push(e);
        }
        Ok(SampleOutcome {
            grads,
            fidelity: fidelity.to_f64_lossy(),
            sparsity: sparsity.to_f64_lossy(),
            reconstruction_mse: recon_mse.to_f64_lossy(),
            energies,
        })
    }
}

/// Trains `model` in place for `config.epochs` epochs.
pub fn train<F: Scalar, M: Decompose<F> + ?Sized>(
    model: &mut M,
    data: &Dataset<F>,
    config: &TrainConfig,
) -> Result<TrainHistory> {
    let mut trainer = Trainer::new(model, config.clone(), data)?;
    let mut history = TrainHistory::default();
    for _ in 0..config.epochs {
        history.records.push(trainer.epoch(model, data)?);
    }
    Ok(history)
}

/// Mean reconstruction MSE of `model` over `data`.
pub fn mean_reconstruction_mse<F: Scalar, M: Decompose<F> + ?Sized>(model: &M, data: &Dataset<F>) -> Result<f64> {
    let mut total = 0.0;
    for s in data.samples() {
        let d = model.decompose(s.signal.as_slice())?;
        total += loss::fidelity_loss(s.signal.as_slice(), &d.reconstruction)?.to_f64_lossy();
    }
    Ok(total / data.len().max(1) as f64)
}
