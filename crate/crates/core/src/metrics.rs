//! Reconstruction error measures and periodogram spectra.

use std::fmt::Write as _;

use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

pub fn rmse<F: Scalar>(x: &[F], x_hat: &[F]) -> Result<F> {
    check_len(x.len(), x_hat.len())?;
    if x.is_empty() {
        return Err(Error::InvalidValue("rmse of empty signals".into()));
    }
    let ms = x.iter().zip(x_hat).map(|(&a, &b)| (a - b) * (a - b)).sum::<F>() / F::lit(x.len() as f64);
    Ok(ms.sqrt())
}

pub fn mae<F: Scalar>(x: &[F], x_hat: &[F]) -> Result<F> {
    check_len(x.len(), x_hat.len())?;
    if x.is_empty() {
        return Err(Error::InvalidValue("mae of empty signals".into()));
    }
    Ok(x.iter().zip(x_hat).map(|(&a, &b)| (a - b).abs()).sum::<F>() / F::lit(x.len() as f64))
}

/// Mean absolute amplitude.
pub fn mean_amplitude<F: Scalar>(x: &[F]) -> F {
    if x.is_empty() {
        return F::zero();
    }
    x.iter().map(|v| v.abs()).sum::<F>() / F::lit(x.len() as f64)
}

/// MAE divided by the mean absolute amplitude of `x`.
pub fn nmae<F: Scalar>(x: &[F], x_hat: &[F]) -> Result<F> {
    let ma = mean_amplitude(x);
    if ma == F::zero() {
        return Err(Error::InvalidValue("nmae is undefined for an all-zero reference".into()));
    }
    Ok(mae(x, x_hat)? / ma)
}

/// Pearson correlation; zero when either input is constant.
pub fn correlation<F: Scalar>(a: &[F], b: &[F]) -> Result<F> {
    check_len(a.len(), b.len())?;
    let n = F::lit(a.len() as f64);
    let ma = a.iter().copied().sum::<F>() / n;
    let mb = b.iter().copied().sum::<F>() / n;
    let (mut sab, mut saa, mut sbb) = (F::zero(), F::zero(), F::zero());
    for (&x, &y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == F::zero() || sbb == F::zero() {
        return Ok(F::zero());
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// One-sided power spectral density.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<F> {
    pub frequencies: Vec<F>,
    pub power: Vec<F>,
}

impl<F: Scalar> Spectrum<F> {
    /// Frequency spacing `fs / T`.
    pub fn resolution(&self) -> F {
        if self.frequencies.len() > 1 {
            self.frequencies[1] - self.frequencies[0]
        } else {
            F::zero()
        }
    }

    /// Frequency of the largest bin, ignoring DC.
    pub fn peak_frequency(&self) -> F {
        let mut best = (F::zero(), F::neg_infinity());
        for (&f, &p) in self.frequencies.iter().zip(&self.power).skip(1) {
            if p > best.1 {
                best = (f, p);
            }
        }
        best.0
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("frequency,power\n");
        for (f, p) in self.frequencies.iter().zip(&self.power) {
            let _ = writeln!(s, "{f},{p}");
        }
        s
    }
}

/// Periodogram `|DFT(x)|^2 / (fs * T)` on bins `0..=T/2`, doubled except at
/// DC and Nyquist so that `sum(power) * fs / T` equals the mean square of `x`.
///
/// The DFT is evaluated directly in O(T^2).
pub fn periodogram<F: Scalar>(x: &[F], sampling_rate: F) -> Result<Spectrum<F>> {
    let t = x.len();
    if t < 2 {
        return Err(Error::InvalidValue("periodogram needs at least two samples".into()));
    }
    if !(sampling_rate > F::zero()) {
        return Err(Error::InvalidValue("sampling rate must be positive".into()));
    }
    let xs: Vec<f64> = x.iter().map(|v| v.to_f64_lossy()).collect();
    let fs = sampling_rate.to_f64_lossy();
    // twiddle table: angle 2*pi*m/T for m in 0..T
    let (cos, sin): (Vec<f64>, Vec<f64>) = (0..t)
        .map(|m| {
            let a = 2.0 * std::f64::consts::PI * m as f64 / t as f64;
            (a.cos(), a.sin())
        })
        .unzip();
    let half = t / 2;
    let mut frequencies = Vec::with_capacity(half + 1);
    let mut power = Vec::with_capacity(half + 1);
    for k in 0..=half {
        let (mut re, mut im) = (0.0, 0.0);
        for (n, &v) in xs.iter().enumerate() {
            let m = (k * n) % t;
            re += v * cos[m];
            im -= v * sin[m];
        }
        let mut p = (re * re + im * im) / (fs * t as f64);
        if k != 0 && !(t.is_multiple_of(2) && k == half) {
            p *= 2.0;
        }
        frequencies.push(F::lit(k as f64 * fs / t as f64));
        power.push(F::lit(p));
    }
    Ok(Spectrum { frequencies, power })
}

/// Aggregate error figures for a set of reconstructions.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport<F> {
    pub rmse: F,
    pub mae: F,
    pub nmae: F,
    /// RMSE of each estimated component against its ground truth, when known.
    pub component_rmse: Vec<F>,
    pub spectra: Vec<Spectrum<F>>,
}

impl<F: Scalar> EvalReport<F> {
    /// Means of per-signal metrics over `(x, x_hat)` pairs.
    pub fn from_pairs<'a, I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a [F], &'a [F])>,
    {
        let (mut r, mut a, mut n, mut count) = (F::zero(), F::zero(), F::zero(), 0usize);
        for (x, xh) in pairs {
            r += rmse(x, xh)?;
            a += mae(x, xh)?;
            n += nmae(x, xh)?;
            count += 1;
        }
        if count == 0 {
            return Err(Error::InvalidValue("no signals to evaluate".into()));
        }
        let c = F::lit(count as f64);
        Ok(Self { rmse: r / c, mae: a / c, nmae: n / c, component_rmse: vec![], spectra: vec![] })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value\n");
        let _ = writeln!(s, "rmse,{}", self.rmse);
        let _ = writeln!(s, "mae,{}", self.mae);
        let _ = writeln!(s, "nmae,{}", self.nmae);
        for (i, c) in self.component_rmse.iter().enumerate() {
            let _ = writeln!(s, "component_{i}_rmse,{c}");
        }
        s
    }
}
