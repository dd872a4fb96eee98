//! Time-series containers and the causal convolution primitives every
//! architecture is built from.

use crate::conv;
use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

/// A finite, non-empty single-channel time series.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal<F> {
    samples: Vec<F>,
}

impl<F: Scalar> Signal<F> {
    pub fn new(samples: Vec<F>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidValue("signal must have at least one sample".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidValue(format!("non-finite sample at index {i}")));
        }
        Ok(Self { samples })
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len > 0, "signal length must be positive");
        Self { samples: vec![F::zero(); len] }
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn as_slice(&self) -> &[F] {
        &self.samples
    }

    pub fn into_vec(self) -> Vec<F> {
        self.samples
    }

    pub fn to_multi(&self) -> MultiSignal<F> {
        MultiSignal { channels: 1, len: self.len(), data: self.samples.clone() }
    }
}

impl<F> AsRef<[F]> for Signal<F> {
    fn as_ref(&self) -> &[F] {
        &self.samples
    }
}

/// `C` channels of equal length `T`, stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSignal<F> {
    channels: usize,
    len: usize,
    data: Vec<F>,
}

impl<F: Scalar> MultiSignal<F> {
    pub fn from_channels(channels: Vec<Vec<F>>) -> Result<Self> {
        let c = channels.len();
        if c == 0 {
            return Err(Error::Config("multi-signal needs at least one channel".into()));
        }
        let len = channels[0].len();
        if len == 0 {
            return Err(Error::InvalidValue("channels must be non-empty".into()));
        }
        let mut data = Vec::with_capacity(c * len);
        for ch in channels {
            check_len(len, ch.len())?;
            data.extend(ch);
        }
        Ok(Self { channels: c, len, data })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn channel(&self, c: usize) -> &[F] {
        &self.data[c * self.len..(c + 1) * self.len]
    }

    pub fn as_flat(&self) -> &[F] {
        &self.data
    }
}

/// A `[c_out, c_in, width]` convolution kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel<F> {
    pub c_out: usize,
    pub c_in: usize,
    pub width: usize,
    pub weights: Vec<F>,
}

impl<F: Scalar> ConvKernel<F> {
    pub fn new(c_out: usize, c_in: usize, width: usize, weights: Vec<F>) -> Result<Self> {
        if c_out == 0 || c_in == 0 || width == 0 {
            return Err(Error::Config(format!("kernel dimensions must be positive, got [{c_out}, {c_in}, {width}]")));
        }
        check_len(c_out * c_in * width, weights.len())?;
        Ok(Self { c_out, c_in, width, weights })
    }

    /// Single input and output channel.
    pub fn single(weights: Vec<F>) -> Result<Self> {
        let w = weights.len();
        Self::new(1, 1, w, weights)
    }
}

/// Causal multi-channel convolution with zero left padding; the output keeps length `T`.
pub fn causal_conv<F: Scalar>(
    x: &MultiSignal<F>,
    kernel: &ConvKernel<F>,
    bias: Option<&[F]>,
) -> Result<MultiSignal<F>> {
    if kernel.c_in != x.channels {
        return Err(Error::Config(format!("kernel expects {} input channels, signal has {}", kernel.c_in, x.channels)));
    }
    if let Some(b) = bias {
        check_len(kernel.c_out, b.len())?;
    }
    let mut out = vec![F::zero(); kernel.c_out * x.len];
    conv::forward(&x.data, x.channels, x.len, &kernel.weights, kernel.c_out, kernel.width, bias, &mut out);
    Ok(MultiSignal { channels: kernel.c_out, len: x.len, data: out })
}

pub fn relu<F: Scalar>(x: &MultiSignal<F>) -> MultiSignal<F> {
    MultiSignal { channels: x.channels, len: x.len, data: x.data.iter().map(|&v| v.max(F::zero())).collect() }
}

/// Places `atom` at every time index, scaled by the activation there.
pub fn atom_conv<F: Scalar>(z: &Signal<F>, atom: &[F]) -> Result<Signal<F>> {
    if atom.is_empty() {
        return Err(Error::Config("atom length must be at least 1".into()));
    }
    let mut out = vec![F::zero(); z.len()];
    conv::forward(z.as_slice(), 1, z.len(), atom, 1, atom.len(), None, &mut out);
    Ok(Signal { samples: out })
}

/// Per-time-index noise flags aligned with a signal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoiseMask {
    flags: Vec<bool>,
}

impl NoiseMask {
    pub fn new(flags: Vec<bool>) -> Self {
        Self { flags }
    }

    pub fn all(len: usize, value: bool) -> Self {
        Self { flags: vec![value; len] }
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }
}

/// A signal with an optional class index (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample<F> {
    pub signal: Signal<F>,
    pub label: Option<usize>,
}

/// A collection of equal-length samples with optional noise masks.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<F> {
    samples: Vec<LabeledSample<F>>,
    masks: Option<Vec<NoiseMask>>,
}

impl<F: Scalar> Dataset<F> {
    pub fn new(samples: Vec<LabeledSample<F>>, masks: Option<Vec<NoiseMask>>) -> Result<Self> {
        if let Some(first) = samples.first() {
            let t = first.signal.len();
            for s in &samples {
                check_len(t, s.signal.len())?;
            }
            let labeled = samples.iter().filter(|s| s.label.is_some()).count();
            if labeled != 0 && labeled != samples.len() {
                return Err(Error::Config("either every sample or none must carry a label".into()));
            }
        }
        if let Some(m) = &masks {
            check_len(samples.len(), m.len())?;
            for (mask, s) in m.iter().zip(&samples) {
                check_len(s.signal.len(), mask.len())?;
            }
        }
        Ok(Self { samples, masks })
    }

    pub fn unlabeled(signals: Vec<Signal<F>>) -> Result<Self> {
        Self::new(signals.into_iter().map(|signal| LabeledSample { signal, label: None }).collect(), None)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Common signal length, `None` for an empty dataset.
    pub fn signal_len(&self) -> Option<usize> {
        self.samples.first().map(|s| s.signal.len())
    }

    pub fn samples(&self) -> &[LabeledSample<F>] {
        &self.samples
    }

    pub fn masks(&self) -> Option<&[NoiseMask]> {
        self.masks.as_deref()
    }

    pub fn has_labels(&self) -> bool {
        !self.samples.is_empty() && self.samples.iter().all(|s| s.label.is_some())
    }

    pub fn num_classes(&self) -> usize {
        self.samples.iter().filter_map(|s| s.label).max().map_or(0, |m| m + 1)
    }

    /// Splits off the samples at `index..` into a new dataset.
    pub fn split_at(&self, index: usize) -> (Self, Self) {
        let index = index.min(self.len());
        let (a, b) = self.samples.split_at(index);
        let (ma, mb) = match &self.masks {
            Some(m) => {
                let (x, y) = m.split_at(index);
                (Some(x.to_vec()), Some(y.to_vec()))
            }
            None => (None, None),
        };
        (Self { samples: a.to_vec(), masks: ma }, Self { samples: b.to_vec(), masks: mb })
    }
}
