//! Dataset files.
//!
//! Text form: a header line
//!
//! ```text
//! datom-dataset v1, T=<int>, n=<int>, labels=<0|1>, masks=<0|1>
//! ```
//!
//! then one record per line: `T` comma-separated samples, then the integer
//! label if `labels=1`, then the mask as a string of `0`/`1` characters if
//! `masks=1`.
//!
//! Binary form: `DTMD`, then `u32` version, `T`, `n`, flags (bit 0 labels,
//! bit 1 masks), then `n * T` little-endian `f32` samples row-major, then `n`
//! `u32` labels and `n * T` mask bytes when flagged.
//!
//! Ground-truth files reuse the text framing: one record per hidden
//! component trace, sample-major, with the label column holding the
//! component index.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signal::{Dataset, LabeledSample, NoiseMask, Signal};

pub const DATASET_MAGIC: &[u8; 4] = b"DTMD";
pub const DATASET_VERSION: u32 = 1;
const HEADER_TAG: &str = "datom-dataset v1";

pub fn dataset_to_text<F: Scalar>(data: &Dataset<F>) -> String {
    let t = data.signal_len().unwrap_or(0);
    let labels = data.has_labels();
    let masks = data.masks();
    let mut out =
        format!("{HEADER_TAG}, T={t}, n={}, labels={}, masks={}\n", data.len(), labels as u8, masks.is_some() as u8);
    for (i, s) in data.samples().iter().enumerate() {
        let mut first = true;
        for v in s.signal.as_slice() {
            if !first {
                out.push(',');
            }
            first = false;
            let _ = write!(out, "{v}");
        }
        if labels {
            let _ = write!(out, ",{}", s.label.unwrap_or(0));
        }
        if let Some(m) = masks {
            out.push(',');
            out.extend(m[i].flags().iter().map(|&f| if f { '1' } else { '0' }));
        }
        out.push('\n');
    }
    out
}

struct Header {
    t: usize,
    n: usize,
    labels: bool,
    masks: bool,
}

fn parse_header(line: &str) -> Result<Header> {
    let mut parts = line.split(',').map(str::trim);
    if parts.next() != Some(HEADER_TAG) {
        return Err(Error::Format(format!("expected `{HEADER_TAG}` header, found `{line}`")));
    }
    let mut field = |name: &str| -> Result<usize> {
        let p = parts.next().ok_or_else(|| Error::Format(format!("header is missing `{name}`")))?;
        let v = p
            .strip_prefix(name)
            .and_then(|r| r.strip_prefix('='))
            .ok_or_else(|| Error::Format(format!("expected `{name}=...` in header, found `{p}`")))?;
        v.parse().map_err(|_| Error::Format(format!("bad value for `{name}`: `{v}`")))
    };
    let t = field("T")?;
    let n = field("n")?;
    let labels = field("labels")?;
    let masks = field("masks")?;
    if labels > 1 || masks > 1 {
        return Err(Error::Format("labels and masks flags must be 0 or 1".into()));
    }
    if t == 0 {
        return Err(Error::Format("T must be positive".into()));
    }
    Ok(Header { t, n, labels: labels == 1, masks: masks == 1 })
}

pub fn dataset_from_text<F: Scalar>(text: &str) -> Result<Dataset<F>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, head) = lines.next().ok_or_else(|| Error::Format("empty dataset file".into()))?;
    let h = parse_header(head)?;
    let mut samples = Vec::with_capacity(h.n);
    let mut masks = Vec::new();
    for (lineno, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let expected = h.t + h.labels as usize + h.masks as usize;
        if fields.len() != expected {
            return Err(Error::Format(format!(
                "line {}: expected {expected} fields, found {}",
                lineno + 1,
                fields.len()
            )));
        }
        let values = fields[..h.t]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map(F::lit)
                    .map_err(|_| Error::Format(format!("line {}: bad sample `{f}`", lineno + 1)))
            })
            .collect::<Result<Vec<F>>>()?;
        let signal = Signal::new(values).map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
        let label = if h.labels {
            let f = fields[h.t];
            Some(f.parse().map_err(|_| Error::Format(format!("line {}: bad label `{f}`", lineno + 1)))?)
        } else {
            None
        };
        if h.masks {
            let m = fields[expected - 1];
            if m.len() != h.t {
                return Err(Error::Format(format!(
                    "line {}: mask has {} flags, expected {}",
                    lineno + 1,
                    m.len(),
                    h.t
                )));
            }
            let flags = m
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(Error::Format(format!("line {}: mask character `{c}`", lineno + 1))),
                })
                .collect::<Result<Vec<bool>>>()?;
            masks.push(NoiseMask::new(flags));
        }
        samples.push(LabeledSample { signal, label });
    }
    if samples.len() != h.n {
        return Err(Error::Format(format!("header declares {} records, found {}", h.n, samples.len())));
    }
    Dataset::new(samples, h.masks.then_some(masks))
}

pub fn dataset_to_binary<F: Scalar>(data: &Dataset<F>) -> Vec<u8> {
    let t = data.signal_len().unwrap_or(0);
    let labels = data.has_labels();
    let masks = data.masks();
    let flags = labels as u32 | ((masks.is_some() as u32) << 1);
    let mut out = Vec::with_capacity(20 + data.len() * t * 5);
    out.extend_from_slice(DATASET_MAGIC);
    for v in [DATASET_VERSION, t as u32, data.len() as u32, flags] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for s in data.samples() {
        for v in s.signal.as_slice() {
            out.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
        }
    }
    if labels {
        for s in data.samples() {
            out.extend_from_slice(&(s.label.unwrap_or(0) as u32).to_le_bytes());
        }
    }
    if let Some(m) = masks {
        for mask in m {
            out.extend(mask.flags().iter().map(|&f| f as u8));
        }
    }
    out
}

pub fn dataset_from_binary<F: Scalar>(bytes: &[u8]) -> Result<Dataset<F>> {
    let short = || Error::Format("binary dataset is truncated".into());
    if bytes.len() < 20 || &bytes[..4] != DATASET_MAGIC {
        return Err(Error::Format("not a binary dataset (bad magic)".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let (version, t, n, flags) = (word(0), word(1) as usize, word(2) as usize, word(3));
    if version != DATASET_VERSION {
        return Err(Error::Format(format!("unsupported dataset version {version}")));
    }
    if t == 0 || flags > 3 {
        return Err(Error::Format("bad dataset header".into()));
    }
    let (labels, has_masks) = (flags & 1 == 1, flags & 2 == 2);
    let mut pos: usize = 20;
    let mut take = |len: usize| -> Result<&[u8]> {
        let end = pos.checked_add(len).filter(|&e| e <= bytes.len()).ok_or_else(short)?;
        let s = &bytes[pos..end];
        pos = end;
        Ok(s)
    };
    let raw = take(n.checked_mul(t).and_then(|v| v.checked_mul(4)).ok_or_else(short)?)?;
    let mut signals = Vec::with_capacity(n);
    for row in raw.chunks_exact(4 * t) {
        let v: Vec<F> = row.chunks_exact(4).map(|b| F::lit(f32::from_le_bytes(b.try_into().unwrap()) as f64)).collect();
        signals.push(Signal::new(v).map_err(|e| Error::Format(e.to_string()))?);
    }
    let label_vals: Vec<Option<usize>> = if labels {
        take(4 * n)?.chunks_exact(4).map(|b| Some(u32::from_le_bytes(b.try_into().unwrap()) as usize)).collect()
    } else {
        vec![None; n]
    };
    let masks = if has_masks {
        let raw = take(n * t)?;
        let masks = raw
            .chunks_exact(t)
            .map(|row| {
                row.iter()
                    .map(|&b| match b {
                        0 => Ok(false),
                        1 => Ok(true),
                        _ => Err(Error::Format(format!("mask byte {b}"))),
                    })
                    .collect::<Result<Vec<bool>>>()
                    .map(NoiseMask::new)
            })
            .collect::<Result<Vec<_>>>()?;
        Some(masks)
    } else {
        None
    };
    if take(1).is_ok() {
        return Err(Error::Format("trailing bytes after dataset".into()));
    }
    let samples = signals.into_iter().zip(label_vals).map(|(signal, label)| LabeledSample { signal, label }).collect();
    Dataset::new(samples, masks)
}

/// Reads either form, detected from the first bytes.
pub fn read_dataset<F: Scalar>(path: impl AsRef<Path>) -> Result<Dataset<F>> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(DATASET_MAGIC) {
        dataset_from_binary(&bytes)
    } else {
        let text =
            std::str::from_utf8(&bytes).map_err(|_| Error::Format("dataset is neither text nor binary".into()))?;
        dataset_from_text(text)
    }
}

pub fn write_dataset_text<F: Scalar>(path: impl AsRef<Path>, data: &Dataset<F>) -> Result<()> {
    fs::write(path, dataset_to_text(data))?;
    Ok(())
}

pub fn write_dataset_binary<F: Scalar>(path: impl AsRef<Path>, data: &Dataset<F>) -> Result<()> {
    fs::write(path, dataset_to_binary(data))?;
    Ok(())
}

/// Encodes `[sample][component]` traces in the text framing.
pub fn truth_to_text<F: Scalar>(components: &[Vec<Vec<F>>]) -> Result<String> {
    let mut samples = Vec::new();
    for comps in components {
        for (k, c) in comps.iter().enumerate() {
            samples.push(LabeledSample { signal: Signal::new(c.clone())?, label: Some(k) });
        }
    }
    Ok(dataset_to_text(&Dataset::new(samples, None)?))
}

/// Inverse of [`truth_to_text`]; a label of 0 starts a new sample.
pub fn truth_from_text<F: Scalar>(text: &str) -> Result<Vec<Vec<Vec<F>>>> {
    let data: Dataset<F> = dataset_from_text(text)?;
    let mut out: Vec<Vec<Vec<F>>> = Vec::new();
    for s in data.samples() {
        let k = s.label.ok_or_else(|| Error::Format("ground-truth records need component indices".into()))?;
        if k == 0 {
            out.push(Vec::new());
        }
        let cur =
            out.last_mut().ok_or_else(|| Error::Format("first ground-truth record must be component 0".into()))?;
        if cur.len() != k {
            return Err(Error::Format(format!("component index {k} out of sequence")));
        }
        cur.push(s.signal.as_slice().to_vec());
    }
    Ok(out)
}
