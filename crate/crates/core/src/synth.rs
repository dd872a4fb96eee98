//! Ground-truth generators for the forward models each architecture assumes.
//!
//! All generators use a `ChaCha8Rng` seeded from the spec, so output is
//! reproducible bit for bit. Activations are Bernoulli(density) per time index
//! with amplitudes uniform in the configured range; background noise is white
//! Gaussian.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signal::{Dataset, LabeledSample, NoiseMask, Signal};

/// Adds `amplitude * waveform` starting at `onset` (may be negative), clipped to the signal.
pub fn place<F: Scalar>(out: &mut [F], waveform: &[F], onset: isize, amplitude: F) {
    for (j, &w) in waveform.iter().enumerate() {
        let i = onset + j as isize;
        if i >= 0 && (i as usize) < out.len() {
            out[i as usize] += amplitude * w;
        }
    }
}

fn rms<F: Scalar>(x: &[F]) -> F {
    (x.iter().map(|&v| v * v).sum::<F>() / F::lit(x.len() as f64)).sqrt()
}

fn normal(sigma: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, sigma).map_err(|e| Error::Config(format!("noise sigma {sigma}: {e}")))
}

/// Sparse convolutional forward model: `x = sum_n atom_n * z_n + noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub length: usize,
    pub atoms: Vec<Vec<f64>>,
    /// Probability of an activation at each time index, per atom.
    pub activation_density: f64,
    pub amplitude_range: (f64, f64),
    pub noise_sigma: f64,
    /// Interpret `noise_sigma` as a fraction of each clean signal's RMS.
    #[serde(default)]
    pub relative_noise: bool,
    #[serde(default)]
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::Config("length must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.activation_density) {
            return Err(Error::Config(format!("activation_density {} outside [0, 1]", self.activation_density)));
        }
        let (lo, hi) = self.amplitude_range;
        if !(lo <= hi) {
            return Err(Error::Config(format!("amplitude_range ({lo}, {hi}) is empty")));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config("noise_sigma must be >= 0".into()));
        }
        for (i, a) in self.atoms.iter().enumerate() {
            if a.is_empty() || a.len() > self.length {
                return Err(Error::Config(format!("atom {i} has length {}, must be in 1..={}", a.len(), self.length)));
            }
        }
        Ok(())
    }
}

/// Generated signals with the latent structure that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput<F> {
    pub dataset: Dataset<F>,
    /// `[sample][source]` activation signals (basic), per-flash gain trains (SSVEP) or empty.
    pub activations: Vec<Vec<Vec<F>>>,
    /// `[sample][source]` clean component traces; they sum to `signal - noise`.
    pub components: Vec<Vec<Vec<F>>>,
    /// `[sample]` additive background noise.
    pub noise: Vec<Vec<F>>,
}

pub fn gen_basic<F: Scalar>(spec: &SynthSpec, n: usize) -> Result<SynthOutput<F>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    gen_basic_with(spec, n, &mut rng)
}

fn gen_basic_with<F: Scalar>(spec: &SynthSpec, n: usize, rng: &mut ChaCha8Rng) -> Result<SynthOutput<F>> {
    let t = spec.length;
    let (lo, hi) = spec.amplitude_range;
    let atoms: Vec<Vec<F>> = spec.atoms.iter().map(|a| a.iter().map(|&v| F::lit(v)).collect()).collect();
    let gauss = normal(1.0)?;
    let mut out =
        SynthOutput { dataset: Dataset::new(vec![], None)?, activations: vec![], components: vec![], noise: vec![] };
    let mut signals = Vec::with_capacity(n);
    for _ in 0..n {
        let mut acts = Vec::with_capacity(atoms.len());
        let mut comps = Vec::with_capacity(atoms.len());
        for atom in &atoms {
            let mut z = vec![F::zero(); t];
            let mut c = vec![F::zero(); t];
            for (i, zi) in z.iter_mut().enumerate() {
                if rng.random::<f64>() < spec.activation_density {
                    let amp = if lo == hi { lo } else { rng.random_range(lo..hi) };
                    *zi = F::lit(amp);
                    place(&mut c, atom, i as isize, *zi);
                }
            }
            acts.push(z);
            comps.push(c);
        }
        let mut x = vec![F::zero(); t];
        for c in &comps {
            x.iter_mut().zip(c).for_each(|(a, &b)| *a += b);
        }
        let sigma = if spec.relative_noise { spec.noise_sigma * rms(&x).to_f64_lossy() } else { spec.noise_sigma };
        let eta: Vec<F> = (0..t).map(|_| F::lit(sigma * gauss.sample(rng))).collect();
        x.iter_mut().zip(&eta).for_each(|(a, &b)| *a += b);
        signals.push(Signal::new(x)?);
        out.activations.push(acts);
        out.components.push(comps);
        out.noise.push(eta);
    }
    out.dataset = Dataset::unlabeled(signals)?;
    Ok(out)
}

/// Periodic flash responses: `x = sum_l g_l v(t - l*tau + phi) + noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsvepSynthSpec {
    pub length: usize,
    pub sampling_rate: f64,
    pub flash_response: Vec<f64>,
    /// Per-flash gains are uniform in this range.
    pub gain_range: (f64, f64),
    pub noise_sigma: f64,
    /// Draw a uniformly random phase per trial instead of using the class phase.
    #[serde(default)]
    pub random_phase: bool,
    #[serde(default)]
    pub seed: u64,
}

/// One stimulus class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stimulus {
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

impl SsvepSynthSpec {
    /// Flash period in samples, `round(fs / f)`.
    pub fn period(&self, frequency: f64) -> Result<usize> {
        if !(frequency > 0.0) {
            return Err(Error::Config(format!("stimulus frequency must be positive, got {frequency}")));
        }
        let p = (self.sampling_rate / frequency).round();
        if !(p >= 2.0) {
            return Err(Error::Config(format!(
                "frequency {frequency} Hz gives a period under 2 samples at {} Hz",
                self.sampling_rate
            )));
        }
        Ok(p as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 || self.flash_response.is_empty() {
            return Err(Error::Config("length and flash_response must be non-empty".into()));
        }
        if !(self.sampling_rate > 0.0) {
            return Err(Error::Config("sampling_rate must be positive".into()));
        }
        if !(self.gain_range.0 <= self.gain_range.1) || !(self.noise_sigma >= 0.0) {
            return Err(Error::Config("invalid gain_range or noise_sigma".into()));
        }
        Ok(())
    }
}

/// Generates `n_per_class` trials per stimulus, labeled by stimulus index.
///
/// Flash `l` starts at sample `l * period - round(phase * fs)`; flashes that
/// begin before sample 0 but overlap the window are included.
pub fn gen_ssvep<F: Scalar>(spec: &SsvepSynthSpec, stimuli: &[Stimulus], n_per_class: usize) -> Result<SynthOutput<F>> {
    spec.validate()?;
    let periods = stimuli.iter().map(|s| spec.period(s.frequency)).collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gauss = normal(1.0)?;
    let v: Vec<F> = spec.flash_response.iter().map(|&x| F::lit(x)).collect();
    let t = spec.length as isize;
    let (glo, ghi) = spec.gain_range;
    let mut samples = Vec::new();
    let mut out =
        SynthOutput { dataset: Dataset::new(vec![], None)?, activations: vec![], components: vec![], noise: vec![] };
    for _ in 0..n_per_class {
        for (class, (stim, &period)) in stimuli.iter().zip(&periods).enumerate() {
            let offset = if spec.random_phase {
                rng.random_range(0..period) as isize
            } else {
                (stim.phase * spec.sampling_rate).round() as isize
            };
            let p = period as isize;
            let mut clean = vec![F::zero(); spec.length];
            let mut train = vec![F::zero(); spec.length];
            // first flash index whose response still reaches sample 0
            let mut l = (offset - v.len() as isize + 1).div_euclid(p).min(0);
            loop {
                let onset = l * p - offset;
                if onset >= t {
                    break;
                }
                let g = F::lit(if glo == ghi { glo } else { rng.random_range(glo..ghi) });
                if onset + v.len() as isize > 0 {
                    place(&mut clean, &v, onset, g);
                    if onset >= 0 {
                        train[onset as usize] = g;
                    }
                }
                l += 1;
            }
            let eta: Vec<F> = (0..spec.length).map(|_| F::lit(spec.noise_sigma * gauss.sample(&mut rng))).collect();
            let x: Vec<F> = clean.iter().zip(&eta).map(|(&a, &b)| a + b).collect();
            samples.push(LabeledSample { signal: Signal::new(x)?, label: Some(class) });
            out.activations.push(vec![train]);
            out.components.push(vec![clean]);
            out.noise.push(eta);
        }
    }
    out.dataset = Dataset::new(samples, None)?;
    Ok(out)
}

/// Brain-like signal plus transient artifacts at random events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseMixSpec {
    pub signal: SynthSpec,
    pub artifact: Vec<f64>,
    /// Probability of an artifact onset at each time index.
    pub event_rate: f64,
    pub artifact_amplitude: (f64, f64),
}

/// Mixtures with their hidden parts. `components[i] = [s_i, n_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseMixOutput<F> {
    pub dataset: Dataset<F>,
    pub clean: Vec<Vec<F>>,
    pub artifacts: Vec<Vec<F>>,
}

/// `x = s + n`; the mask flags every index covered by a placed artifact window.
pub fn gen_noise_mixture<F: Scalar>(spec: &NoiseMixSpec, n: usize) -> Result<NoiseMixOutput<F>> {
    spec.signal.validate()?;
    if spec.artifact.is_empty() || spec.artifact.len() > spec.signal.length {
        return Err(Error::Config("artifact must be non-empty and fit in the signal".into()));
    }
    if !(0.0..=1.0).contains(&spec.event_rate) {
        return Err(Error::Config("event_rate must lie in [0, 1]".into()));
    }
    let (alo, ahi) = spec.artifact_amplitude;
    if !(alo <= ahi) {
        return Err(Error::Config("artifact_amplitude range is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.signal.seed);
    let base = gen_basic_with::<F>(&spec.signal, n, &mut rng)?;
    let art: Vec<F> = spec.artifact.iter().map(|&v| F::lit(v)).collect();
    let t = spec.signal.length;
    let mut samples = Vec::with_capacity(n);
    let mut masks = Vec::with_capacity(n);
    let mut clean = Vec::with_capacity(n);
    let mut artifacts = Vec::with_capacity(n);
    for s in base.dataset.samples() {
        let s = s.signal.as_slice().to_vec();
        let mut noise = vec![F::zero(); t];
        let mut flags = vec![false; t];
        for i in 0..t {
            if rng.random::<f64>() < spec.event_rate {
                let amp = if alo == ahi { alo } else { rng.random_range(alo..ahi) };
                place(&mut noise, &art, i as isize, F::lit(amp));
                flags[i..(i + art.len()).min(t)].iter_mut().for_each(|f| *f = true);
            }
        }
        let x: Vec<F> = s.iter().zip(&noise).map(|(&a, &b)| a + b).collect();
        samples.push(LabeledSample { signal: Signal::new(x)?, label: None });
        masks.push(NoiseMask::new(flags));
        clean.push(s);
        artifacts.push(noise);
    }
    Ok(NoiseMixOutput { dataset: Dataset::new(samples, Some(masks))?, clean, artifacts })
}

/// Time-locked components with class-dependent gains: `x = sum_p g_p v_p + noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErpSynthSpec {
    /// Component waveforms, each spanning the whole signal.
    pub waveforms: Vec<Vec<f64>>,
    /// `[class][component]` gain mean.
    pub gain_mean: Vec<Vec<f64>>,
    /// `[class][component]` gain standard deviation.
    pub gain_sd: Vec<Vec<f64>>,
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ErpSynthSpec {
    pub fn validate(&self) -> Result<usize> {
        let t = self.waveforms.first().map(|w| w.len()).unwrap_or(0);
        if t == 0 || self.waveforms.iter().any(|w| w.len() != t) {
            return Err(Error::Config("waveforms must be non-empty and share one length".into()));
        }
        let p = self.waveforms.len();
        if self.gain_mean.is_empty() || self.gain_mean.len() != self.gain_sd.len() {
            return Err(Error::Config("gain_mean and gain_sd need one row per class".into()));
        }
        for (m, s) in self.gain_mean.iter().zip(&self.gain_sd) {
            if m.len() != p || s.len() != p || s.iter().any(|&v| !(v >= 0.0)) {
                return Err(Error::Config("every gain row needs one non-negative entry per waveform".into()));
            }
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config("noise_sigma must be >= 0".into()));
        }
        Ok(t)
    }
}

/// ERP trials plus the gains drawn for each (`[sample][component]`).
#[derive(Debug, Clone, PartialEq)]
pub struct ErpOutput<F> {
    pub dataset: Dataset<F>,
    pub gains: Vec<Vec<F>>,
    pub noise: Vec<Vec<F>>,
}

impl<F: Scalar> ErpOutput<F> {
    pub fn components(&self, spec: &ErpSynthSpec) -> Vec<Vec<Vec<F>>> {
        self.gains
            .iter()
            .map(|g| spec.waveforms.iter().zip(g).map(|(w, &gp)| w.iter().map(|&v| gp * F::lit(v)).collect()).collect())
            .collect()
    }
}

pub fn gen_erp<F: Scalar>(spec: &ErpSynthSpec, n_per_class: usize) -> Result<ErpOutput<F>> {
    let t = spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gauss = normal(1.0)?;
    let mut samples = Vec::new();
    let mut gains = Vec::new();
    let mut noise = Vec::new();
    for _ in 0..n_per_class {
        for (class, (means, sds)) in spec.gain_mean.iter().zip(&spec.gain_sd).enumerate() {
            let g: Vec<F> = means.iter().zip(sds).map(|(&m, &s)| F::lit(m + s * gauss.sample(&mut rng))).collect();
            let mut x = vec![F::zero(); t];
            for (w, &gp) in spec.waveforms.iter().zip(&g) {
                x.iter_mut().zip(w).for_each(|(a, &v)| *a += gp * F::lit(v));
            }
            let eta: Vec<F> = (0..t).map(|_| F::lit(spec.noise_sigma * gauss.sample(&mut rng))).collect();
            x.iter_mut().zip(&eta).for_each(|(a, &b)| *a += b);
            samples.push(LabeledSample { signal: Signal::new(x)?, label: Some(class) });
            gains.push(g);
            noise.push(eta);
        }
    }
    Ok(ErpOutput { dataset: Dataset::new(samples, None)?, gains, noise })
}

/// Hann-windowed cosine bump of `len` samples, a convenient smooth test waveform.
pub fn hann_wavelet(len: usize, cycles: f64) -> Vec<f64> {
    (0..len)
        .map(|i| {
            let u = (i as f64 + 0.5) / len as f64;
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * u).cos();
            w * (2.0 * std::f64::consts::PI * cycles * u).cos()
        })
        .collect()
}
