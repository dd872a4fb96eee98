use datom::grad::{finite_diff_check, FiniteDiff};
use datom::loss;
use datom::model::DetectorSpec;
use datom::synth::{gen_basic, hann_wavelet, SynthSpec};
use datom::trainer::{mean_reconstruction_mse, Trainer};
use datom::{
    train, BasicDecomposer, Dataset, Decompose, Error, LabeledSample, NoiseDecomposer, ParamStore, Signal,
    SsvepDecomposer, TrainConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn two_atom_data(n: usize) -> Dataset<f64> {
    let spec = SynthSpec {
        length: 64,
        atoms: vec![hann_wavelet(12, 1.0), hann_wavelet(12, 2.0)],
        activation_density: 0.03,
        amplitude_range: (0.5, 1.5),
        noise_sigma: 0.0,
        relative_noise: false,
        seed: 21,
    };
    gen_basic(&spec, n).unwrap().dataset
}

fn small_model(seed: u64) -> BasicDecomposer<f64> {
    BasicDecomposer::new(2, DetectorSpec::single_channel(1, 8), 12, &mut rng(seed)).unwrap()
}

#[test]
fn training_reduces_fidelity_loss() {
    let data = two_atom_data(40);
    let mut model = small_model(1);
    let history = train(&mut model, &data, &TrainConfig { epochs: 500, batch_size: 10, ..Default::default() }).unwrap();
    assert_eq!(history.len(), 500);
    let first = history.records[0].fidelity;
    let last = history.records[499].fidelity;
    assert!(last < 0.1 * first, "{first} -> {last}");
}

#[test]
fn zero_learning_rate_changes_nothing() {
    let data = two_atom_data(10);
    let mut model = small_model(2);
    let before = model.clone();
    assert!(matches!(
        train(&mut model, &data, &TrainConfig { epochs: 0, ..Default::default() }),
        Err(Error::Config(_))
    ));
    let history = train(&mut model, &data, &TrainConfig { epochs: 1, lr: 0.0, ..Default::default() }).unwrap();
    assert_eq!(history.len(), 1);
    assert_eq!(
        model.store().iter().map(|p| p.values.clone()).collect::<Vec<_>>(),
        before.store().iter().map(|p| p.values.clone()).collect::<Vec<_>>()
    );
}

#[test]
fn same_seed_same_history() {
    let data = two_atom_data(30);
    let config = TrainConfig {
        epochs: 20,
        batch_size: 7,
        seed: 5,
        alpha_sparsity_schedule: vec![(10, 1e-3)],
        ..Default::default()
    };
    let run = || {
        let mut m = small_model(3);
        let h = train(&mut m, &data, &config).unwrap();
        (h.to_csv(), m)
    };
    let (a, ma) = run();
    let (b, mb) = run();
    assert_eq!(a, b);
    assert_eq!(ma, mb);
    assert_eq!(a.lines().next().unwrap(), "epoch,total,fidelity,sparsity,reassigns");
    assert_eq!(a.lines().count(), 21);
}

#[test]
fn sparsity_pressure_shrinks_activations() {
    let data = two_atom_data(30);
    let mut model = small_model(4);
    let config =
        TrainConfig { epochs: 1000, batch_size: 10, alpha_sparsity_schedule: vec![(0, 1e-3)], ..Default::default() };
    let h = train(&mut model, &data, &config).unwrap();
    let mean = |r: &[datom::trainer::EpochRecord]| r.iter().map(|e| e.sparsity).sum::<f64>() / r.len() as f64;
    assert!(mean(&h.records[900..]) <= mean(&h.records[..100]));
}

#[test]
fn dead_atom_is_revived_without_changing_fidelity() {
    let data = two_atom_data(20);
    let mut model = BasicDecomposer::<f64>::new(3, DetectorSpec::single_channel(1, 8), 12, &mut rng(6)).unwrap();
    let dead = model.bank().pairs[1].atom;
    model.store_mut().values_mut(dead).iter_mut().for_each(|v| *v = 0.0);
    let config = TrainConfig {
        epochs: 3,
        batch_size: 5,
        reassign_check_every: 2,
        lr: 0.0,
        weight_decay: 0.0,
        ..Default::default()
    };
    let mut trainer = Trainer::new(&model, config, &data).unwrap();
    trainer.epoch(&mut model, &data).unwrap();
    trainer.epoch(&mut model, &data).unwrap();
    let before = mean_reconstruction_mse(&model, &data).unwrap();
    let rec = trainer.epoch(&mut model, &data).unwrap();
    assert_eq!(rec.reassignments.len(), 1);
    assert_eq!(rec.reassignments[0].dead, 1);
    assert!(model.store().get(dead).norm() > 0.0);
    let after = mean_reconstruction_mse(&model, &data).unwrap();
    assert!((after - before).abs() < 1e-8);
}

#[test]
fn non_finite_parameters_abort() {
    let data = two_atom_data(5);
    let mut model = small_model(7);
    let atom = model.bank().pairs[0].atom;
    model.store_mut().values_mut(atom)[0] = f64::NAN;
    let err = train(&mut model, &data, &TrainConfig { epochs: 1, ..Default::default() }).unwrap_err();
    match err {
        Error::Numeric(msg) => assert!(msg.contains("epoch 0") && msg.contains("batch 0")),
        other => panic!("expected numeric error, got {other:?}"),
    }
}

#[test]
fn architecture_data_requirements() {
    let unlabeled = two_atom_data(4);
    let ssvep = SsvepDecomposer::<f64>::new(2, DetectorSpec::single_channel(1, 4), 4, &mut rng(1)).unwrap();
    assert!(matches!(Trainer::new(&ssvep, TrainConfig::default(), &unlabeled), Err(Error::Incompatible(_))));
    let noise = NoiseDecomposer::<f64>::new(1, 1, DetectorSpec::single_channel(1, 4), 4, &mut rng(1)).unwrap();
    assert!(matches!(Trainer::new(&noise, TrainConfig::default(), &unlabeled), Err(Error::Incompatible(_))));
}

#[test]
fn per_class_objective_uses_groups() {
    let samples = two_atom_data(6)
        .samples()
        .iter()
        .enumerate()
        .map(|(i, s)| LabeledSample { signal: s.signal.clone(), label: Some(i % 2) })
        .collect();
    let data = Dataset::new(samples, None).unwrap();
    let mut model = BasicDecomposer::<f64>::new(4, DetectorSpec::single_channel(1, 4), 6, &mut rng(2)).unwrap();
    let config = TrainConfig { epochs: 2, batch_size: 3, class_groups: Some(vec![0, 0, 1, 1]), ..Default::default() };
    assert_eq!(train(&mut model, &data, &config).unwrap().len(), 2);
    let bad = TrainConfig { class_groups: Some(vec![0, 1]), ..config };
    assert!(train(&mut model, &data, &bad).is_err());
}

#[test]
fn full_basic_loss_gradient_matches_finite_differences() {
    let x: Vec<f64> = (0..64).map(|i| ((i * 37 % 11) as f64 - 5.0) / 5.0).collect();
    let model = BasicDecomposer::<f64>::new(2, DetectorSpec::single_channel(2, 5), 8, &mut rng(9)).unwrap();
    let mut probe = model.clone();
    let report = finite_diff_check(model.store(), FiniteDiff::default(), |store: &ParamStore<f64>, tape| {
        *probe.store_mut() = store.clone();
        let xn = tape.signal(&x);
        let out = probe.forward_tape(tape, xn)?;
        let f = loss::tape::fidelity(tape, xn, out.reconstruction)?;
        let s = loss::tape::sparsity(tape, &out.activations)?;
        let s = tape.scale(s, 1e-3);
        tape.add(f, s)
    })
    .unwrap();
    assert!(report.max_rel_error < 1e-5, "{report:?}");
    assert_eq!(report.coords_checked, model.store().num_values());
}

#[test]
fn signal_rejects_nan_inputs() {
    assert!(Signal::new(vec![0.0, f64::NAN]).is_err());
}
