//! Unit-spaced real time series, periodic means and the periodogram.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Ordered, unit-spaced, finite real samples. Sample `i` sits at time
/// `start_index + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    start_index: i64,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_start(values, 0)
    }

    pub fn with_start(values: Vec<f64>, start_index: i64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { values, start_index })
    }

    /// Builds a series from `f(t)` evaluated at `t = 0..n`.
    pub fn from_fn(n: usize, f: impl FnMut(usize) -> f64) -> Result<Self> {
        Self::new((0..n).map(f).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn start_index(&self) -> i64 {
        self.start_index
    }

    /// Time stamp of sample `i`.
    pub fn time(&self, i: usize) -> i64 {
        self.start_index + i as i64
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }
}

/// The mean at each phase `s = i mod p` of a period.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicMean {
    pub period: usize,
    pub means: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Averages all samples sharing a phase. `n` need not be a multiple of `p`.
pub fn periodic_mean(series: &TimeSeries, p: usize) -> Result<PeriodicMean> {
    periodic_mean_of(series.values(), p)
}

pub(crate) fn periodic_mean_of(values: &[f64], p: usize) -> Result<PeriodicMean> {
    let n = values.len();
    if p < 1 || p > n {
        return Err(Error::InvalidPeriod { period: p, n });
    }
    let mut sums = vec![0.0; p];
    let mut counts = vec![0usize; p];
    for (i, &v) in values.iter().enumerate() {
        sums[i % p] += v;
        counts[i % p] += 1;
    }
    let means = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    Ok(PeriodicMean { period: p, means, counts })
}

/// Tiles the phase means cyclically to length `n`.
pub fn extend_periodic(pm: &PeriodicMean, n: usize) -> Result<TimeSeries> {
    if n == 0 {
        return Err(Error::EmptySeries);
    }
    TimeSeries::from_fn(n, |i| pm.means[i % pm.period])
}

/// One-sided power spectrum at the Fourier frequencies `j / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
}

impl Spectrum {
    /// Frequency of the strongest bin (lowest frequency on ties).
    pub fn peak_frequency(&self) -> f64 {
        let mut best = 0;
        for (j, &p) in self.power.iter().enumerate() {
            if p > self.power[best] {
                best = j;
            }
        }
        self.frequencies[best]
    }
}

/// Discrete periodogram, `power_j = |DFT_j|^2 / n` for `j = 0..=n/2`.
pub fn periodogram(series: &TimeSeries) -> Result<Spectrum> {
    let n = series.len();
    if n < 2 {
        return Err(Error::SeriesTooShort { needed: 1, got: n });
    }
    let mut buf: Vec<Complex64> = series.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let bins = n / 2 + 1;
    let frequencies = (0..bins).map(|j| j as f64 / n as f64).collect();
    let power = buf[..bins].iter().map(|c| c.norm_sqr() / n as f64).collect();
    Ok(Spectrum { frequencies, power })
}
