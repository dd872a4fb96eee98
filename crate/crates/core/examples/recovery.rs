//! Trains a basic decomposer on synthetic sparse-atom data and reports the
//! held-out reconstruction error.
//!
//! `cargo run --release --example recovery -- [pairs] [epochs]`

use datom::model::DetectorSpec;
use datom::synth::{gen_basic, hann_wavelet, SynthSpec};
use datom::trainer::{mean_reconstruction_mse, Trainer};
use datom::{BasicDecomposer, Decompose, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> datom::Result<()> {
    let mut args = std::env::args().skip(1);
    let pairs: usize = args.next().map_or(4, |s| s.parse().expect("pairs must be an integer"));
    let epochs: usize = args.next().map_or(500, |s| s.parse().expect("epochs must be an integer"));

    let spec = SynthSpec {
        length: 256,
        atoms: [0.0, 1.0, 2.0, 3.0].iter().map(|&c| hann_wavelet(32, c)).collect(),
        activation_density: 0.01,
        amplitude_range: (0.5, 1.5),
        noise_sigma: 0.05,
        relative_noise: true,
        seed: 7,
    };
    let data = gen_basic::<f64>(&spec, 600)?.dataset;
    let (train, test) = data.split_at(500);
    let power =
        test.samples().iter().map(|s| s.signal.as_slice().iter().map(|v| v * v).sum::<f64>() / 256.0).sum::<f64>()
            / test.len() as f64;

    let mut model =
        BasicDecomposer::<f64>::new(pairs, DetectorSpec::single_channel(1, 16), 32, &mut ChaCha8Rng::seed_from_u64(1))?;
    let mut trainer = Trainer::new(&model, TrainConfig { epochs, ..Default::default() }, &train)?;
    for e in 0..epochs {
        let r = trainer.epoch(&mut model, &train)?;
        if e % (epochs / 10).max(1) == 0 || e + 1 == epochs {
            let held_out = (mean_reconstruction_mse(&model, &test)? / power).sqrt();
            println!("epoch {e:>5}  train fidelity {:.3e}  held-out RMSE/RMS {held_out:.4}", r.fidelity);
        }
    }
    println!("atom norms: {:?}", model.bank().atom_norms(model.store()));
    Ok(())
}
