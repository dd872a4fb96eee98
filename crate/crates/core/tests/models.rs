use datom::model::{read_model, write_model, ConvLayerSpec, DetectorSpec, PairBank};
use datom::signal::{atom_conv, causal_conv, ConvKernel};
use datom::{
    BasicDecomposer, Decompose, Decomposer, ErpDecomposer, Error, MultiSignal, NoiseDecomposer, ParamStore, Signal,
    SsvepDecomposer, Tape,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_signal(seed: u64, t: usize) -> Vec<f64> {
    let mut r = rng(seed);
    (0..t).map(|_| r.random_range(-1.0..1.0)).collect()
}

fn impulse(t: usize, at: usize) -> Vec<f64> {
    let mut x = vec![0.0; t];
    x[at] = 1.0;
    x
}

/// Turns every detector in `bank` into a pass-through ReLU (`z = relu(x)`).
fn identity_detectors(bank: &PairBank, store: &mut ParamStore<f64>) {
    for pair in &bank.pairs {
        for conv in &pair.detector.convs {
            let k = store.values_mut(conv.kernel);
            k.iter_mut().for_each(|v| *v = 0.0);
            k[0] = 1.0;
            store.values_mut(conv.bias).iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

fn zero_atoms(bank: &PairBank, store: &mut ParamStore<f64>) {
    for id in bank.atom_ids() {
        store.values_mut(id).iter_mut().for_each(|v| *v = 0.0);
    }
}

#[test]
fn zero_atoms_reconstruct_nothing() {
    let mut m = BasicDecomposer::<f64>::new(3, DetectorSpec::single_channel(2, 5), 7, &mut rng(1)).unwrap();
    let bank = m.bank().clone();
    zero_atoms(&bank, m.store_mut());
    let d = m.decompose(&random_signal(2, 40)).unwrap();
    assert!(d.reconstruction.iter().all(|&v| v == 0.0));
}

#[test]
fn impulse_detector_places_atom() {
    let mut m = BasicDecomposer::<f64>::new(1, DetectorSpec::single_channel(1, 3), 2, &mut rng(1)).unwrap();
    let bank = m.bank().clone();
    identity_detectors(&bank, m.store_mut());
    m.store_mut().values_mut(bank.pairs[0].atom).copy_from_slice(&[2.0, 3.0]);
    let (components, recon) = m.forward(&impulse(8, 3)).unwrap();
    assert_eq!(components[0], vec![0.0, 0.0, 0.0, 2.0, 3.0, 0.0, 0.0, 0.0]);
    assert_eq!(recon, components[0]);
}

#[test]
fn identical_pairs_give_identical_components() {
    let mut m = BasicDecomposer::<f64>::new(
        2,
        DetectorSpec::signal(vec![ConvLayerSpec::new(1, 2, 4), ConvLayerSpec::new(2, 1, 3)]),
        5,
        &mut rng(4),
    )
    .unwrap();
    let bank = m.bank().clone();
    let (a, b) = (&bank.pairs[0], &bank.pairs[1]);
    let ids_a: Vec<_> = a.detector.param_ids().into_iter().chain([a.atom]).collect();
    let ids_b: Vec<_> = b.detector.param_ids().into_iter().chain([b.atom]).collect();
    for (src, dst) in ids_a.into_iter().zip(ids_b) {
        let v = m.store().values(src).to_vec();
        m.store_mut().values_mut(dst).copy_from_slice(&v);
    }
    let d = m.decompose(&random_signal(5, 30)).unwrap();
    assert_eq!(d.components[0], d.components[1]);
}

#[test]
fn basic_forward_matches_direct_summation() {
    let m = BasicDecomposer::<f64>::new(
        3,
        DetectorSpec::signal(vec![ConvLayerSpec::new(1, 2, 4), ConvLayerSpec::new(2, 2, 3)]),
        6,
        &mut rng(8),
    )
    .unwrap();
    let x = random_signal(9, 50);
    let d = m.decompose(&x).unwrap();
    let store = m.store();
    let mut total = vec![0.0; x.len()];
    for (k, pair) in m.bank().pairs.iter().enumerate() {
        let mut h = Signal::new(x.clone()).unwrap().to_multi();
        let n_layers = pair.detector.convs.len();
        for (li, conv) in pair.detector.convs.iter().enumerate() {
            let p = store.get(conv.kernel);
            let kernel = ConvKernel::new(p.shape[0], p.shape[1], p.shape[2], p.values.clone()).unwrap();
            let pre = causal_conv(&h, &kernel, Some(store.values(conv.bias))).unwrap();
            h = if li + 1 < n_layers {
                datom::signal::relu(&pre)
            } else {
                // channels merge before the final rectification
                let sum: Vec<f64> =
                    (0..x.len()).map(|t| (0..pre.channels()).map(|c| pre.channel(c)[t]).sum()).collect();
                MultiSignal::from_channels(vec![sum.iter().map(|v| v.max(0.0)).collect()]).unwrap()
            };
        }
        assert_eq!(h.channel(0), &d.activations[k][..]);
        let z = Signal::new(h.channel(0).to_vec()).unwrap();
        let c = atom_conv(&z, store.values(pair.atom)).unwrap();
        for (a, b) in c.as_slice().iter().zip(&d.components[k]) {
            assert!((a - b).abs() < 1e-12);
        }
        total.iter_mut().zip(c.as_slice()).for_each(|(t, v)| *t += v);
    }
    for (a, b) in total.iter().zip(&d.reconstruction) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn noise_model_chains_two_banks() {
    let m = NoiseDecomposer::<f64>::new(2, 2, DetectorSpec::single_channel(1, 4), 6, &mut rng(3)).unwrap();
    let x = random_signal(4, 40);
    let (s_hat, n_hat) = m.forward(&x).unwrap();
    let mut tape = Tape::new();
    let xn = tape.signal(&x);
    let n = m.noise_bank().forward(&mut tape, m.store(), xn).unwrap();
    let n_vals = tape.value(n.sum).to_vec();
    let cleaned: Vec<f64> = x.iter().zip(&n_vals).map(|(a, b)| a - b).collect();
    let cn = tape.signal(&cleaned);
    let s = m.signal_bank().forward(&mut tape, m.store(), cn).unwrap();
    assert_eq!(n_hat, n_vals);
    assert_eq!(s_hat, tape.value(s.sum));
}

#[test]
fn noise_model_zeroed_banks() {
    let base = NoiseDecomposer::<f64>::new(2, 2, DetectorSpec::single_channel(1, 4), 6, &mut rng(3)).unwrap();
    let x = random_signal(5, 40);

    let mut quiet_noise = base.clone();
    let bank = quiet_noise.noise_bank().clone();
    zero_atoms(&bank, quiet_noise.store_mut());
    let (s_hat, n_hat) = quiet_noise.forward(&x).unwrap();
    assert!(n_hat.iter().all(|&v| v == 0.0));
    let mut tape = Tape::new();
    let xn = tape.signal(&x);
    let direct = quiet_noise.signal_bank().forward(&mut tape, quiet_noise.store(), xn).unwrap();
    assert_eq!(s_hat, tape.value(direct.sum));

    let mut quiet_signal = base;
    let bank = quiet_signal.signal_bank().clone();
    zero_atoms(&bank, quiet_signal.store_mut());
    let (s_hat, _) = quiet_signal.forward(&x).unwrap();
    assert!(s_hat.iter().all(|&v| v == 0.0));
}

#[test]
fn ssvep_atom_is_shared() {
    let mut m = SsvepDecomposer::<f64>::new(3, DetectorSpec::single_channel(1, 3), 4, &mut rng(6)).unwrap();
    assert_eq!(m.bank().atom_ids(), vec![m.atom_id()]);
    let bank = m.bank().clone();
    identity_detectors(&bank, m.store_mut());
    let x: Vec<f64> = random_signal(7, 20).iter().map(|v| v.abs() + 0.1).collect();
    let before = m.decompose(&x).unwrap();
    let id = m.atom_id();
    m.store_mut().values_mut(id)[0] += 0.5;
    let after = m.decompose(&x).unwrap();
    for k in 0..3 {
        assert_ne!(before.components[k], after.components[k]);
    }
}

#[test]
fn ssvep_impulse_copies_shared_atom() {
    let mut m = SsvepDecomposer::<f64>::new(2, DetectorSpec::single_channel(1, 2), 3, &mut rng(6)).unwrap();
    let bank = m.bank().clone();
    identity_detectors(&bank, m.store_mut());
    let id = m.atom_id();
    m.store_mut().values_mut(id).copy_from_slice(&[0.5, -1.0, 2.0]);
    let (components, _) = m.forward(&impulse(6, 1)).unwrap();
    for c in components {
        assert_eq!(c, vec![0.0, 0.5, -1.0, 2.0, 0.0, 0.0]);
    }
}

fn erp_with_weights(weights: &[f64], atoms: &[Vec<f64>]) -> ErpDecomposer<f64> {
    let t = atoms[0].len();
    let det = DetectorSpec::scalar(vec![ConvLayerSpec::new(1, 1, 2)]);
    let mut m = ErpDecomposer::<f64>::new(weights.len(), det, t, &mut rng(2)).unwrap();
    let bank = m.bank().clone();
    let store = m.store_mut();
    for ((pair, &w), a) in bank.pairs.iter().zip(weights).zip(atoms) {
        for conv in &pair.detector.convs {
            store.values_mut(conv.kernel).iter_mut().for_each(|v| *v = 0.0);
            store.values_mut(conv.bias).iter_mut().for_each(|v| *v = 0.0);
        }
        let head = pair.detector.head.as_ref().expect("scalar detector has a head");
        store.values_mut(head.weight).iter_mut().for_each(|v| *v = 0.0);
        store.values_mut(head.bias)[0] = w;
        store.values_mut(pair.atom).copy_from_slice(a);
    }
    m
}

#[test]
fn erp_reconstruction_is_weighted_atoms() {
    let x = random_signal(1, 4);
    let zero = erp_with_weights(&[0.0], &[vec![1.0, 2.0, 3.0, 4.0]]);
    assert!(zero.forward(&x).unwrap().1.iter().all(|&v| v == 0.0));

    let single = erp_with_weights(&[1.5], &[vec![1.0, -2.0, 0.5, 4.0]]);
    let (w, recon) = single.forward(&x).unwrap();
    assert_eq!(w, vec![1.5]);
    assert_eq!(recon, vec![1.5, -3.0, 0.75, 6.0]);

    let pair = erp_with_weights(&[2.0, 0.5], &[vec![1.0, 0.0, -1.0, 2.0], vec![4.0, 2.0, 2.0, 0.0]]);
    let (_, recon) = pair.forward(&x).unwrap();
    assert_eq!(recon, vec![4.0, 1.0, -1.0, 4.0]);
}

#[test]
fn erp_rejects_wrong_length() {
    let m =
        ErpDecomposer::<f64>::new(2, DetectorSpec::scalar(vec![ConvLayerSpec::new(1, 1, 2)]), 16, &mut rng(1)).unwrap();
    assert!(matches!(m.decompose(&random_signal(1, 15)), Err(Error::Config(_))));
}

#[test]
fn reassignment_splits_donor_atom() {
    let mut m = BasicDecomposer::<f64>::new(2, DetectorSpec::single_channel(1, 3), 4, &mut rng(1)).unwrap();
    let bank = m.bank().clone();
    m.store_mut().values_mut(bank.pairs[1].atom).copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
    m.reassign(0, 0, 1).unwrap();
    assert_eq!(m.store().values(bank.pairs[0].atom), &[1.0, 2.0, 0.0, 0.0]);
    assert_eq!(m.store().values(bank.pairs[1].atom), &[0.0, 0.0, 3.0, 4.0]);
    let kernel_k = m.store().values(bank.pairs[0].detector.convs[0].kernel).to_vec();
    assert_eq!(kernel_k, m.store().values(bank.pairs[1].detector.convs[0].kernel));
}

#[test]
fn reassignment_errors() {
    let mut m = BasicDecomposer::<f64>::new(2, DetectorSpec::single_channel(1, 3), 4, &mut rng(1)).unwrap();
    assert!(matches!(m.reassign(0, 1, 1), Err(Error::Usage(_))));
    let bank = m.bank().clone();
    m.store_mut().get_mut(bank.pairs[0].atom).values.push(0.0);
    assert!(matches!(m.reassign(0, 0, 1), Err(Error::Config(_))));
}

#[test]
fn reassignment_preserves_output() {
    let mut m = BasicDecomposer::<f64>::new(3, DetectorSpec::single_channel(2, 5), 9, &mut rng(11)).unwrap();
    let bank = m.bank().clone();
    zero_atoms(&PairBank { pairs: vec![bank.pairs[0].clone()], ..bank.clone() }, m.store_mut());
    let before = m.clone();
    m.reassign(0, 0, 2).unwrap();
    for seed in 0..10 {
        let x = random_signal(seed, 64);
        let (old, old_r) = before.forward(&x).unwrap();
        let (new, new_r) = m.forward(&x).unwrap();
        for t in 0..x.len() {
            assert!((new[0][t] + new[2][t] - old[2][t]).abs() < 1e-12);
            assert!((new_r[t] - old_r[t]).abs() < 1e-12);
        }
    }
}

#[test]
fn dead_atom_detection() {
    let mut m = BasicDecomposer::<f64>::new(3, DetectorSpec::single_channel(1, 3), 2, &mut rng(1)).unwrap();
    let bank = m.bank().clone();
    let set = |m: &mut BasicDecomposer<f64>, norms: [f64; 3]| {
        for (pair, n) in bank.pairs.iter().zip(norms) {
            m.store_mut().values_mut(pair.atom).copy_from_slice(&[n, 0.0]);
        }
    };
    set(&mut m, [1.0, 1.0, 1.0]);
    assert!(m.detect_dead_atoms(1e-3).unwrap().is_empty());
    set(&mut m, [1.0, 0.0, 1.0]);
    assert_eq!(m.detect_dead_atoms(1e-3).unwrap(), vec![1]);
    set(&mut m, [1.0, 1.0, 1e-6]);
    assert_eq!(m.detect_dead_atoms(1e-3).unwrap(), vec![2]);
    assert!(m.detect_dead_atoms(0.0).is_err());
}

fn all_models() -> Vec<Decomposer<f32>> {
    let det = DetectorSpec::signal(vec![ConvLayerSpec::new(1, 2, 4), ConvLayerSpec::new(2, 1, 3)]);
    vec![
        BasicDecomposer::new(3, det.clone(), 6, &mut rng(1)).unwrap().into(),
        NoiseDecomposer::new(2, 2, det.clone(), 5, &mut rng(2)).unwrap().into(),
        SsvepDecomposer::new(3, det, 8, &mut rng(3)).unwrap().into(),
        ErpDecomposer::new(2, DetectorSpec::scalar(vec![ConvLayerSpec::new(1, 2, 4)]), 32, &mut rng(4)).unwrap().into(),
    ]
}

#[test]
fn serialization_roundtrip_is_bit_identical() {
    let x: Vec<f32> = random_signal(9, 32).iter().map(|&v| v as f32).collect();
    for model in all_models() {
        let mut bytes = Vec::new();
        write_model(&model, &mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"DTMM");
        let back: Decomposer<f32> = read_model(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, model);
        let (a, b) = (model.decompose(&x).unwrap(), back.decompose(&x).unwrap());
        assert_eq!(a, b);
    }
}

#[test]
fn quantized_f64_model_survives_roundtrip() {
    let mut model: Decomposer<f64> =
        BasicDecomposer::new(2, DetectorSpec::single_channel(1, 4), 6, &mut rng(5)).unwrap().into();
    model.quantize_f32();
    let mut bytes = Vec::new();
    write_model(&model, &mut bytes).unwrap();
    let back: Decomposer<f64> = read_model(&mut bytes.as_slice()).unwrap();
    let x = random_signal(6, 40);
    let (a, b) = (model.decompose(&x).unwrap(), back.decompose(&x).unwrap());
    assert!(a.reconstruction.iter().zip(&b.reconstruction).all(|(p, q)| p.to_bits() == q.to_bits()));
}

#[test]
fn corrupt_model_files_are_rejected() {
    let model = all_models().remove(0);
    let mut bytes = Vec::new();
    write_model(&model, &mut bytes).unwrap();

    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(matches!(read_model::<f32>(&mut bad_magic.as_slice()), Err(Error::Format(_))));

    let truncated = &bytes[..bytes.len() - 3];
    assert!(read_model::<f32>(&mut &truncated[..]).is_err());

    let mut trailing = bytes.clone();
    trailing.push(0);
    assert!(matches!(read_model::<f32>(&mut trailing.as_slice()), Err(Error::Format(_))));

    let mut nan = bytes.clone();
    let n = nan.len();
    nan[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
    assert!(read_model::<f32>(&mut nan.as_slice()).is_err());
}

proptest! {
    #[test]
    fn conv_is_linear(
        x in prop::collection::vec(-10.0f64..10.0, 1..40),
        k in prop::collection::vec(-2.0f64..2.0, 1..8),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        seed in 0u64..1000,
    ) {
        let y = random_signal(seed, x.len());
        let kernel = ConvKernel::single(k).unwrap();
        let conv = |v: &[f64]| causal_conv(&Signal::new(v.to_vec()).unwrap().to_multi(), &kernel, None).unwrap().channel(0).to_vec();
        let mixed: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let (cx, cy, cm) = (conv(&x), conv(&y), conv(&mixed));
        for t in 0..x.len() {
            prop_assert!((cm[t] - (a * cx[t] + b * cy[t])).abs() < 1e-9);
        }
    }

    #[test]
    fn conv_is_causal(
        x in prop::collection::vec(-10.0f64..10.0, 2..40),
        k in prop::collection::vec(-2.0f64..2.0, 1..8),
        cut in 0usize..40,
    ) {
        let cut = cut % x.len();
        let kernel = ConvKernel::single(k).unwrap();
        let conv = |v: &[f64]| causal_conv(&Signal::new(v.to_vec()).unwrap().to_multi(), &kernel, None).unwrap().channel(0).to_vec();
        let mut changed = x.clone();
        changed[cut..].iter_mut().for_each(|v| *v += 1.0);
        let (a, b) = (conv(&x), conv(&changed));
        prop_assert_eq!(&a[..cut], &b[..cut]);
    }
}
