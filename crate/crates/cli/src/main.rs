//! `datom`: generate synthetic data, train decomposers, decompose and evaluate signals.
//!
//! Exit codes: 0 ok, 2 invalid spec or arguments, 3 incompatible inputs,
//! 4 numeric failure, 5 I/O or file-format error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use datom::config::{RunConfig, SynthFile, SynthKind, CONFIG_VERSION};
use datom::io::{read_dataset, truth_from_text, truth_to_text, write_dataset_binary, write_dataset_text};
use datom::metrics::{mae, nmae, periodogram, rmse, EvalReport, Spectrum};
use datom::model::{load_model, save_model};
use datom::synth::{gen_basic, gen_erp, gen_noise_mixture, gen_ssvep};
use datom::trainer::{TrainHistory, Trainer};
use datom::{Architecture, Dataset64, Decompose, Decomposer64, Error};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "datom", version, about = "Detector-atom decomposition of single-channel signals")]
struct Cli {
    /// Seed for data generation, initialization and shuffling (overrides config files).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; nothing is written outside it.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Run configuration (TOML) or a manifest from a previous run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Suppress progress output.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset and its ground truth from a spec file.
    Synth { spec: PathBuf },
    /// Train a decomposer on a dataset.
    Train {
        #[arg(long, value_parser = parse_arch)]
        arch: Architecture,
        dataset: PathBuf,
        /// Override the configured number of epochs.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Write per-sample components, reconstruction and metrics.
    Decompose { model: PathBuf, dataset: PathBuf },
    /// Summarize reconstruction quality and component spectra.
    Eval {
        model: PathBuf,
        dataset: PathBuf,
        /// Ground-truth components written by `synth`.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Sampling rate for the spectra, in Hz.
        #[arg(long, default_value_t = 1.0)]
        fs: f64,
    },
    /// Export every atom and a table of atom norms.
    InspectAtoms { model: PathBuf },
}

fn parse_arch(s: &str) -> Result<Architecture, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Everything needed to repeat a training run.
#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    tool_version: String,
    arch: String,
    seed: u64,
    dataset: PathBuf,
    model: PathBuf,
    out_dir: PathBuf,
    config: RunConfig,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Usage(_) | Error::InvalidValue(_) => 2,
        Error::Incompatible(_) | Error::LengthMismatch { .. } => 3,
        Error::Numeric(_) => 4,
        Error::Io(_) | Error::Format(_) => 5,
    }
}

fn read_text(path: &Path) -> datom::Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> datom::Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

struct Ctx {
    out: PathBuf,
    seed: Option<u64>,
    quiet: bool,
}

impl Ctx {
    fn out_dir(&self) -> datom::Result<&Path> {
        fs::create_dir_all(&self.out)?;
        Ok(&self.out)
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn load_run_config(path: Option<&Path>) -> datom::Result<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig { version: CONFIG_VERSION, model: Default::default(), train: Default::default() });
    };
    let text = read_text(path)?;
    // a manifest carries its run configuration in a `config` table
    if let Ok(m) = toml::from_str::<RunManifest>(&text) {
        return Ok(m.config);
    }
    RunConfig::from_toml(&text)
}

fn cmd_synth(ctx: &Ctx, spec_path: &Path) -> datom::Result<()> {
    let mut spec = SynthFile::from_toml(&read_text(spec_path)?)?;
    if let Some(seed) = ctx.seed {
        spec.set_seed(seed);
    }
    let (data, truth): (Dataset64, Vec<Vec<Vec<f64>>>) = match spec.kind {
        SynthKind::Basic => {
            let out = gen_basic(spec.basic.as_ref().expect("validated"), spec.count.expect("validated"))?;
            (out.dataset, out.components)
        }
        SynthKind::Ssvep => {
            let stimuli = spec.stimuli.as_deref().expect("validated");
            let out =
                gen_ssvep(spec.ssvep.as_ref().expect("validated"), stimuli, spec.n_per_class.expect("validated"))?;
            (out.dataset, out.components)
        }
        SynthKind::Noise => {
            let out = gen_noise_mixture(spec.noise.as_ref().expect("validated"), spec.count.expect("validated"))?;
            let truth = out.clean.iter().zip(&out.artifacts).map(|(s, n)| vec![s.clone(), n.clone()]).collect();
            (out.dataset, truth)
        }
        SynthKind::Erp => {
            let erp = spec.erp.as_ref().expect("validated");
            let out = gen_erp(erp, spec.n_per_class.expect("validated"))?;
            let truth = out.components(erp);
            (out.dataset, truth)
        }
    };
    let truth_text = truth_to_text(&truth)?;
    let dir = ctx.out_dir()?;
    let data_path = if spec.binary {
        let p = dir.join("dataset.dtmd");
        write_dataset_binary(&p, &data)?;
        p
    } else {
        let p = dir.join("dataset.txt");
        write_dataset_text(&p, &data)?;
        p
    };
    write(&dir.join("truth.txt"), truth_text)?;
    let resolved = toml::to_string(&spec).map_err(|e| Error::Config(e.to_string()))?;
    write(&dir.join("synth.toml"), resolved)?;
    ctx.say(format!(
        "wrote {} signals of length {} to {} (seed {})",
        data.len(),
        data.signal_len().unwrap_or(0),
        data_path.display(),
        spec.seed()
    ));
    Ok(())
}

fn cmd_train(
    ctx: &Ctx,
    config_path: Option<&Path>,
    arch: Architecture,
    dataset: &Path,
    epochs: Option<usize>,
) -> datom::Result<()> {
    let mut config = load_run_config(config_path)?;
    if let Some(e) = epochs {
        config.train.epochs = e;
    }
    if let Some(s) = ctx.seed {
        config.train.seed = s;
    }
    config.train.validate()?;
    let data: Dataset64 = read_dataset(dataset)?;
    let t = data.signal_len().ok_or_else(|| Error::Incompatible("dataset is empty".into()))?;
    let mut model = Decomposer64::build(arch, &config.model, t, &mut ChaCha8Rng::seed_from_u64(config.train.seed))?;
    model.quantize_f32();
    let mut trainer = Trainer::new(&model, config.train.clone(), &data)?;
    let mut history = TrainHistory::default();
    let every = (config.train.epochs / 10).max(1);
    for e in 0..config.train.epochs {
        let r = trainer.epoch(&mut model, &data)?;
        if e % every == 0 || e + 1 == config.train.epochs {
            ctx.say(format!("epoch {e}: loss {:.6e} fidelity {:.6e}", r.total, r.fidelity));
        }
        history.records.push(r);
    }
    model.quantize_f32();
    let dir = ctx.out_dir()?;
    let model_path = dir.join("model.dtmm");
    save_model(&model, &model_path)?;
    write(&dir.join("history.csv"), history.to_csv())?;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        arch: arch.name().to_string(),
        seed: config.train.seed,
        dataset: dataset.to_path_buf(),
        model: model_path.clone(),
        out_dir: dir.to_path_buf(),
        config,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    write(&dir.join("manifest.toml"), text)?;
    ctx.say(format!("saved {}", model_path.display()));
    Ok(())
}

fn load_pair(model: &Path, dataset: &Path) -> datom::Result<(Decomposer64, Dataset64)> {
    let model: Decomposer64 = load_model(model)?;
    let data: Dataset64 = read_dataset(dataset)?;
    if let (Some(want), Some(got)) = (model.signal_length(), data.signal_len()) {
        if want != got {
            return Err(Error::Incompatible(format!("model expects signals of length {want}, dataset has {got}")));
        }
    }
    Ok((model, data))
}

fn cmd_decompose(ctx: &Ctx, model: &Path, dataset: &Path) -> datom::Result<()> {
    let (model, data) = load_pair(model, dataset)?;
    let mut rows = Vec::with_capacity(data.len());
    let mut files = Vec::with_capacity(data.len());
    for s in data.samples() {
        let x = s.signal.as_slice();
        let d = model.decompose(x)?;
        let mut csv = String::from("t,signal,reconstruction");
        for k in 0..d.components.len() {
            let _ = write!(csv, ",component_{k}");
        }
        csv.push('\n');
        for t in 0..x.len() {
            let _ = write!(csv, "{t},{},{}", x[t], d.reconstruction[t]);
            for c in &d.components {
                let _ = write!(csv, ",{}", c[t]);
            }
            csv.push('\n');
        }
        files.push(csv);
        rows.push((rmse(x, &d.reconstruction)?, mae(x, &d.reconstruction)?, nmae(x, &d.reconstruction)?));
    }
    let dir = ctx.out_dir()?;
    let width = data.len().to_string().len().max(4);
    for (i, csv) in files.iter().enumerate() {
        write(&dir.join(format!("sample_{i:0width$}.csv")), csv)?;
    }
    let mut metrics = String::from("sample,rmse,mae,nmae\n");
    for (i, (r, a, n)) in rows.iter().enumerate() {
        let _ = writeln!(metrics, "{i},{r},{a},{n}");
    }
    write(&dir.join("metrics.csv"), metrics)?;
    ctx.say(format!("decomposed {} signals into {}", data.len(), dir.display()));
    Ok(())
}

fn mean_spectrum(spectra: &[Spectrum<f64>]) -> Spectrum<f64> {
    let mut power = vec![0.0; spectra[0].power.len()];
    for s in spectra {
        power.iter_mut().zip(&s.power).for_each(|(a, b)| *a += b);
    }
    power.iter_mut().for_each(|p| *p /= spectra.len() as f64);
    Spectrum { frequencies: spectra[0].frequencies.clone(), power }
}

fn cmd_eval(ctx: &Ctx, model: &Path, dataset: &Path, truth: Option<&Path>, fs_hz: f64) -> datom::Result<()> {
    let (model, data) = load_pair(model, dataset)?;
    let truth = truth.map(|p| read_text(p).and_then(|t| truth_from_text::<f64>(&t))).transpose()?;
    if let Some(tr) = &truth {
        if tr.len() != data.len() {
            return Err(Error::Incompatible(format!("truth has {} samples, dataset has {}", tr.len(), data.len())));
        }
    }
    let decomps =
        data.samples().iter().map(|s| model.decompose(s.signal.as_slice())).collect::<datom::Result<Vec<_>>>()?;
    let mut report = EvalReport::from_pairs(
        data.samples().iter().zip(&decomps).map(|(s, d)| (s.signal.as_slice(), d.reconstruction.as_slice())),
    )?;
    let n_comp = model.num_components();
    if let Some(tr) = &truth {
        let k = tr[0].len();
        if k != n_comp || tr.iter().any(|c| c.len() != k) {
            return Err(Error::Incompatible(format!("truth has {k} components per sample, model has {n_comp}")));
        }
        report.component_rmse = (0..k)
            .map(|c| {
                let total =
                    tr.iter().zip(&decomps).map(|(t, d)| rmse(&t[c], &d.components[c])).sum::<datom::Result<f64>>()?;
                Ok(total / tr.len() as f64)
            })
            .collect::<datom::Result<_>>()?;
    }
    report.spectra = (0..n_comp)
        .map(|c| {
            let per =
                decomps.iter().map(|d| periodogram(&d.components[c], fs_hz)).collect::<datom::Result<Vec<_>>>()?;
            Ok(mean_spectrum(&per))
        })
        .collect::<datom::Result<_>>()?;
    let dir = ctx.out_dir()?;
    write(&dir.join("eval.csv"), report.to_csv())?;
    for (c, s) in report.spectra.iter().enumerate() {
        write(&dir.join(format!("spectrum_component_{c}.csv")), s.to_csv())?;
    }
    ctx.say(format!("rmse {:.6} mae {:.6} nmae {:.6}", report.rmse, report.mae, report.nmae));
    Ok(())
}

fn cmd_inspect_atoms(ctx: &Ctx, model: &Path) -> datom::Result<()> {
    let model: Decomposer64 = load_model(model)?;
    let store = model.store();
    let mut files = Vec::new();
    let mut norms = String::from("bank,pair,length,norm\n");
    for (b, bank) in model.banks().iter().enumerate() {
        for (k, pair) in bank.pairs.iter().enumerate() {
            let atom = store.get(pair.atom);
            let mut csv = String::from("index,value\n");
            for (i, v) in atom.values.iter().enumerate() {
                let _ = writeln!(csv, "{i},{v}");
            }
            files.push((format!("atom_{b}_{k}.csv"), csv));
            let _ = writeln!(norms, "{b},{k},{},{}", atom.len(), atom.norm());
        }
    }
    let dir = ctx.out_dir()?;
    for (name, csv) in &files {
        write(&dir.join(name), csv)?;
    }
    write(&dir.join("norms.csv"), norms)?;
    ctx.say(format!("wrote {} atoms to {}", files.len(), dir.display()));
    Ok(())
}

fn run(cli: Cli) -> datom::Result<()> {
    let ctx = Ctx { out: cli.out, seed: cli.seed, quiet: cli.quiet };
    match cli.command {
        Command::Synth { spec } => cmd_synth(&ctx, &spec),
        Command::Train { arch, dataset, epochs } => cmd_train(&ctx, cli.config.as_deref(), arch, &dataset, epochs),
        Command::Decompose { model, dataset } => cmd_decompose(&ctx, &model, &dataset),
        Command::Eval { model, dataset, truth, fs } => cmd_eval(&ctx, &model, &dataset, truth.as_deref(), fs),
        Command::InspectAtoms { model } => cmd_inspect_atoms(&ctx, &model),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
