use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use datom::io::read_dataset;
use datom::metrics::{nmae, rmse};
use datom::model::{load_model, save_model, ConvLayerSpec, DetectorSpec};
use datom::{BasicDecomposer, Dataset64, Decompose, Decomposer64, ErpDecomposer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

const BASIC_SPEC: &str = r#"
version = 1
kind = "basic"
count = 20

[basic]
length = 64
atoms = [[0.0, 0.5, 1.0, 0.5, 0.0, -0.5, -1.0, -0.5], [1.0, -1.0, 1.0, -1.0]]
activation_density = 0.04
amplitude_range = [0.5, 1.5]
noise_sigma = 0.01
"#;

fn datom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_datom")).args(args).output().expect("run datom")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth_basic(dir: &TempDir, name: &str, seed: &str) -> PathBuf {
    let spec = dir.path().join("spec.toml");
    fs::write(&spec, BASIC_SPEC).unwrap();
    let out = dir.path().join(name);
    let o = datom(&["synth", p(&spec), "--out", p(&out), "--seed", seed, "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn synth_writes_dataset_matching_spec() {
    let dir = TempDir::new().unwrap();
    let out = synth_basic(&dir, "data", "3");
    let text = fs::read_to_string(out.join("dataset.txt")).unwrap();
    assert!(text.starts_with("datom-dataset v1, T=64, n=20, labels=0, masks=0"));
    assert!(out.join("truth.txt").exists());
    assert!(fs::read_to_string(out.join("synth.toml")).unwrap().contains("seed = 3"));
}

#[test]
fn synth_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = synth_basic(&dir, "a", "9");
    let b = synth_basic(&dir, "b", "9");
    for f in ["dataset.txt", "truth.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    let c = synth_basic(&dir, "c", "10");
    assert_ne!(fs::read(a.join("dataset.txt")).unwrap(), fs::read(c.join("dataset.txt")).unwrap());
}

#[test]
fn malformed_spec_exits_2_and_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("bad.toml");
    fs::write(&spec, BASIC_SPEC.replace("activation_density = 0.04", "activation_density = 1.5")).unwrap();
    let out = dir.path().join("out");
    let o = datom(&["synth", p(&spec), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("activation_density"));
    assert!(!out.exists());

    fs::write(&spec, "version = 1\nkind = \"basic\"\ncount = 'x'\n").unwrap();
    assert_eq!(datom(&["synth", p(&spec), "--out", p(&out)]).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn train_decompose_eval_inspect() {
    let dir = TempDir::new().unwrap();
    let data = synth_basic(&dir, "data", "1").join("dataset.txt");
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        "version = 1\n[model]\npairs = 2\natom_length = 8\n\
         detector_layers = [{ in_channels = 1, out_channels = 1, kernel_size = 6 }]\n\
         [train]\nepochs = 200\nbatch_size = 10\n",
    )
    .unwrap();
    let run = dir.path().join("run");
    let o =
        datom(&["train", "--arch", "basic", p(&data), "--config", p(&config), "--out", p(&run), "--seed", "4", "-q"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let history = read_csv(&run.join("history.csv"));
    assert_eq!(history[0].join(","), "epoch,total,fidelity,sparsity,reassigns");
    assert_eq!(history.len(), 201);
    let fid = |row: &Vec<String>| row[2].parse::<f64>().unwrap();
    assert!(fid(&history[200]) < fid(&history[1]));
    let manifest = fs::read_to_string(run.join("manifest.toml")).unwrap();
    assert!(manifest.contains("seed = 4") && manifest.contains("arch = \"basic\""));

    // the manifest alone reproduces the model file
    let again = dir.path().join("again");
    let o = datom(&[
        "train",
        "--arch",
        "basic",
        p(&data),
        "--config",
        p(&run.join("manifest.toml")),
        "--out",
        p(&again),
        "-q",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(run.join("model.dtmm")).unwrap(), fs::read(again.join("model.dtmm")).unwrap());

    let model_path = run.join("model.dtmm");
    let dec = dir.path().join("dec");
    assert!(datom(&["decompose", p(&model_path), p(&data), "--out", p(&dec), "-q"]).status.success());
    let metrics = read_csv(&dec.join("metrics.csv"));
    assert_eq!(metrics.len(), 21);
    let model: Decomposer64 = load_model(&model_path).unwrap();
    let dataset: Dataset64 = read_dataset(&data).unwrap();
    for (row, s) in metrics[1..].iter().zip(dataset.samples()) {
        let d = model.decompose(s.signal.as_slice()).unwrap();
        let want = rmse(s.signal.as_slice(), &d.reconstruction).unwrap();
        let got: f64 = row[1].parse().unwrap();
        assert!(got.is_finite() && (got - want).abs() <= 1e-12 * want.max(1.0));
    }
    let sample = read_csv(&dec.join("sample_0000.csv"));
    assert_eq!(sample[0].join(","), "t,signal,reconstruction,component_0,component_1");
    assert_eq!(sample.len(), 65);

    let ev = dir.path().join("eval");
    let truth = dir.path().join("data").join("truth.txt");
    let o = datom(&["eval", p(&model_path), p(&data), "--truth", p(&truth), "--fs", "128", "--out", p(&ev), "-q"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let eval = fs::read_to_string(ev.join("eval.csv")).unwrap();
    assert!(eval.contains("component_1_rmse"));
    assert_eq!(read_csv(&ev.join("spectrum_component_0.csv")).len(), 34);

    let atoms = dir.path().join("atoms");
    assert!(datom(&["inspect-atoms", p(&model_path), "--out", p(&atoms), "-q"]).status.success());
    assert_eq!(read_csv(&atoms.join("norms.csv")).len(), 3);
    for (k, pair) in model.banks()[0].pairs.iter().enumerate() {
        let rows = read_csv(&atoms.join(format!("atom_0_{k}.csv")));
        let values: Vec<f32> = rows[1..].iter().map(|r| r[1].parse::<f64>().unwrap() as f32).collect();
        let stored: Vec<f32> = model.store().values(pair.atom).iter().map(|&v| v as f32).collect();
        assert_eq!(values, stored);
    }
}

#[test]
fn zero_model_reconstructs_nothing() {
    let dir = TempDir::new().unwrap();
    let data = synth_basic(&dir, "data", "2").join("dataset.txt");
    let mut m =
        BasicDecomposer::<f64>::new(3, DetectorSpec::single_channel(1, 4), 5, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
    for id in m.bank().atom_ids() {
        m.store_mut().values_mut(id).iter_mut().for_each(|v| *v = 0.0);
    }
    let model_path = dir.path().join("zero.dtmm");
    save_model(&Decomposer64::from(m), &model_path).unwrap();

    let dec = dir.path().join("dec");
    assert!(datom(&["decompose", p(&model_path), p(&data), "--out", p(&dec), "-q"]).status.success());
    for row in &read_csv(&dec.join("metrics.csv"))[1..] {
        assert_eq!(row[3].parse::<f64>().unwrap(), 1.0);
    }
    for row in &read_csv(&dec.join("sample_0003.csv"))[1..] {
        assert_eq!(row[2].parse::<f64>().unwrap(), 0.0);
    }
    let dataset: Dataset64 = read_dataset(&data).unwrap();
    let x = dataset.samples()[0].signal.as_slice();
    assert_eq!(nmae(x, &vec![0.0; x.len()]).unwrap(), 1.0);

    let atoms = dir.path().join("atoms");
    assert!(datom(&["inspect-atoms", p(&model_path), "--out", p(&atoms), "-q"]).status.success());
    let norms = read_csv(&atoms.join("norms.csv"));
    assert_eq!(norms.len(), 4);
    assert!(norms[1..].iter().all(|r| r[3].parse::<f64>().unwrap() == 0.0));
    assert!(atoms.join("atom_0_2.csv").exists());
}

#[test]
fn incompatible_inputs_exit_3() {
    let dir = TempDir::new().unwrap();
    let data = synth_basic(&dir, "data", "5").join("dataset.txt");
    for arch in ["ssvep", "noise"] {
        let out = dir.path().join(arch);
        let o = datom(&["train", "--arch", arch, p(&data), "--epochs", "1", "--out", p(&out), "-q"]);
        assert_eq!(o.status.code(), Some(3), "{arch}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!out.exists());
    }

    let erp = ErpDecomposer::<f64>::new(
        2,
        DetectorSpec::scalar(vec![ConvLayerSpec::new(1, 1, 3)]),
        32,
        &mut ChaCha8Rng::seed_from_u64(0),
    )
    .unwrap();
    let model_path = dir.path().join("erp.dtmm");
    save_model(&Decomposer64::from(erp), &model_path).unwrap();
    let o = datom(&["decompose", p(&model_path), p(&data), "--out", p(&dir.path().join("dec")), "-q"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn corrupt_model_exits_5() {
    let dir = TempDir::new().unwrap();
    let model_path = dir.path().join("junk.dtmm");
    fs::write(&model_path, b"DTMM\x01\x00\x00\x00garbage").unwrap();
    let o = datom(&["inspect-atoms", p(&model_path), "--out", p(&dir.path().join("atoms"))]);
    assert_eq!(o.status.code(), Some(5));
    let o = datom(&["inspect-atoms", p(&dir.path().join("missing.dtmm")), "--out", p(&dir.path().join("atoms"))]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(datom(&["train", "--arch", "fancy", "x.txt"]).status.code(), Some(2));
    assert_eq!(datom(&["frobnicate"]).status.code(), Some(2));
}
