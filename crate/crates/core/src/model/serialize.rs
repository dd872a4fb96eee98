//! Binary model files.
//!
//! Layout, all integers `u32` little-endian:
//!
//! ```text
//! "DTMM" version arch signal_len n_banks
//! per bank:  n_pairs atom_len shared full_length n_layers (in out kernel)*n_layers
//! n_params
//! per param: n_values f32*n_values
//! ```
//!
//! Parameters appear in declaration order. Values are stored as `f32`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::bank::PairBank;
use super::spec::{Architecture, AtomSpec, ConvLayerSpec, DetectorSpec};
use super::{BasicDecomposer, Decompose, Decomposer, ErpDecomposer, NoiseDecomposer, SsvepDecomposer};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MODEL_MAGIC: &[u8; 4] = b"DTMM";
pub const MODEL_VERSION: u32 = 1;

fn put(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn to_u32(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("value {v} does not fit the model format")))
}

pub fn write_model<F: Scalar>(model: &Decomposer<F>, w: &mut impl Write) -> Result<()> {
    w.write_all(MODEL_MAGIC)?;
    put(w, MODEL_VERSION)?;
    put(w, model.architecture().tag())?;
    put(w, to_u32(model.signal_length().unwrap_or(0))?)?;
    let banks = model.banks();
    put(w, to_u32(banks.len())?)?;
    for b in banks {
        put(w, to_u32(b.len())?)?;
        put(w, to_u32(b.atom_spec.length)?)?;
        put(w, b.atom_spec.shared as u32)?;
        put(w, b.atom_spec.full_length as u32)?;
        put(w, to_u32(b.detector_spec.layers.len())?)?;
        for l in &b.detector_spec.layers {
            put(w, to_u32(l.in_channels)?)?;
            put(w, to_u32(l.out_channels)?)?;
            put(w, to_u32(l.kernel_size)?)?;
        }
    }
    let store = model.store();
    put(w, to_u32(store.len())?)?;
    for p in store.iter() {
        put(w, to_u32(p.len())?)?;
        for &v in &p.values {
            w.write_all(&(v.to_f64_lossy() as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn save_model<F: Scalar>(model: &Decomposer<F>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(model, &mut w)?;
    w.flush()?;
    Ok(())
}

struct Cursor<R> {
    inner: R,
}

impl<R: Read> Cursor<R> {
    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.inner.read_exact(&mut b).map_err(truncated)?;
        Ok(u32::from_le_bytes(b))
    }

    fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    fn f32(&mut self) -> Result<f32> {
        let mut b = [0u8; 4];
        self.inner.read_exact(&mut b).map_err(truncated)?;
        Ok(f32::from_le_bytes(b))
    }

    fn flag(&mut self) -> Result<bool> {
        match self.u32()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(Error::Format(format!("expected a 0/1 flag, found {v}"))),
        }
    }
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("model file is truncated".into())
    } else {
        Error::Io(e)
    }
}

struct BankHeader {
    pairs: usize,
    atom: AtomSpec,
    layers: Vec<ConvLayerSpec>,
}

pub fn read_model<F: Scalar>(r: &mut impl Read) -> Result<Decomposer<F>> {
    let mut c = Cursor { inner: r };
    let mut magic = [0u8; 4];
    c.inner.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MODEL_MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    let version = c.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::Format(format!("unsupported model version {version}")));
    }
    let tag = c.u32()?;
    let arch = Architecture::from_tag(tag).ok_or_else(|| Error::Format(format!("unknown architecture tag {tag}")))?;
    let signal_len = c.usize()?;
    let n_banks = c.usize()?;
    if n_banks > 16 {
        return Err(Error::Format(format!("implausible bank count {n_banks}")));
    }
    let mut headers = Vec::with_capacity(n_banks);
    for _ in 0..n_banks {
        let pairs = c.usize()?;
        let length = c.usize()?;
        let shared = c.flag()?;
        let full_length = c.flag()?;
        let n_layers = c.usize()?;
        if n_layers > 1024 {
            return Err(Error::Format(format!("implausible layer count {n_layers}")));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            layers.push(ConvLayerSpec::new(c.usize()?, c.usize()?, c.usize()?));
        }
        headers.push(BankHeader { pairs, atom: AtomSpec { length, shared, full_length }, layers });
    }

    let expected_banks = if arch == Architecture::Noise { 2 } else { 1 };
    if headers.len() != expected_banks {
        return Err(Error::Format(format!("{arch} model needs {expected_banks} bank(s), file has {}", headers.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let h0 = &headers[0];
    let build = |e: Error| Error::Format(format!("inconsistent layer table: {e}"));
    let mut model: Decomposer<F> = match arch {
        Architecture::Basic => {
            BasicDecomposer::new(h0.pairs, DetectorSpec::signal(h0.layers.clone()), h0.atom.length, &mut rng)
                .map_err(build)?
                .into()
        }
        Architecture::Noise => {
            let h1 = &headers[1];
            if h1.layers != h0.layers || h1.atom.length != h0.atom.length {
                return Err(Error::Format("noise estimator banks must share layout".into()));
            }
            NoiseDecomposer::new(h0.pairs, h1.pairs, DetectorSpec::signal(h0.layers.clone()), h0.atom.length, &mut rng)
                .map_err(build)?
                .into()
        }
        Architecture::Ssvep => {
            SsvepDecomposer::new(h0.pairs, DetectorSpec::signal(h0.layers.clone()), h0.atom.length, &mut rng)
                .map_err(build)?
                .into()
        }
        Architecture::Erp => {
            ErpDecomposer::new(h0.pairs, DetectorSpec::scalar(h0.layers.clone()), signal_len, &mut rng)
                .map_err(build)?
                .into()
        }
    };
    for (bank, h) in model.banks().iter().zip(&headers) {
        if !same_layout(bank, h) {
            return Err(Error::Format("bank layout does not match the architecture".into()));
        }
    }

    let n_params = c.usize()?;
    if n_params != model.store().len() {
        return Err(Error::Format(format!("expected {} parameter blobs, file has {n_params}", model.store().len())));
    }
    for p in model.store_mut().iter_mut() {
        let n = c.usize()?;
        if n != p.len() {
            return Err(Error::Format(format!("parameter `{}` has {} values, file has {n}", p.name, p.len())));
        }
        for v in p.values.iter_mut() {
            let x = c.f32()?;
            if !x.is_finite() {
                return Err(Error::Format(format!("non-finite value in parameter `{}`", p.name)));
            }
            *v = F::lit(x as f64);
        }
    }
    let mut rest = [0u8; 1];
    if c.inner.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after model data".into()));
    }
    Ok(model)
}

fn same_layout(bank: &PairBank, h: &BankHeader) -> bool {
    bank.len() == h.pairs && bank.atom_spec == h.atom && bank.detector_spec.layers == h.layers
}

pub fn load_model<F: Scalar>(path: impl AsRef<Path>) -> Result<Decomposer<F>> {
    let mut r = BufReader::new(File::open(path)?);
    read_model(&mut r)
}
