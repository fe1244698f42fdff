//! Kolmogorov-Zurbenko (KZ) low-pass filters and their Fourier-transform
//! (KZFT) band-pass extension.
//!
//! A `KZ(m, k)` filter is `k` passes of a centered moving average of odd
//! length `m`. Its direct form is a single symmetric convolution with the
//! coefficients of `(1 + z + ... + z^(m-1))^k / m^k`. The KZFT filter applies
//! the same weights modulated by `exp(-i 2 pi nu u)`, which moves the pass
//! band from zero frequency to `nu`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Arguments of one KZFT band-pass filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    /// Window length in samples; odd.
    pub m: usize,
    /// Number of iterations.
    pub k: usize,
    /// Center frequency in cycles per sample.
    pub nu: f64,
}

impl FilterSpec {
    pub fn new(m: usize, k: usize, nu: f64) -> Result<Self> {
        check_mk(m, k)?;
        if !(0.0..=0.5).contains(&nu) {
            return Err(Error::invalid(format!("nu must lie in [0, 0.5], got {nu}")));
        }
        Ok(Self { m, k, nu })
    }

    /// Number of taps, `k(m-1) + 1`.
    pub fn support(&self) -> usize {
        self.k * (self.m - 1) + 1
    }
}

fn check_mk(m: usize, k: usize) -> Result<()> {
    if m == 0 || m.is_multiple_of(2) {
        return Err(Error::invalid(format!("m must be a positive odd integer, got {m}")));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    Ok(())
}

/// Boundary handling for taps that fall outside the series.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgePolicy {
    /// Drop out-of-range taps and rescale the rest to sum to one. Output keeps
    /// the input length and time alignment.
    #[default]
    Renormalize,
    /// Emit only points whose full window lies inside the series.
    Truncate,
}

/// Symmetric KZ weights indexed `u = -h..=h`, `h = k(m-1)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    pub m: usize,
    pub k: usize,
    pub weights: Vec<f64>,
}

impl CoefficientTable {
    pub fn half_width(&self) -> usize {
        (self.weights.len() - 1) / 2
    }

    /// Weight at offset `u`, zero outside the support.
    pub fn weight(&self, u: i64) -> f64 {
        let idx = u + self.half_width() as i64;
        if idx < 0 {
            return 0.0;
        }
        self.weights.get(idx as usize).copied().unwrap_or(0.0)
    }
}

/// Coefficients of `(1 + z + ... + z^(m-1))^k`, divided by `m^k`.
///
/// The polynomial is expanded by repeated convolution in integer arithmetic;
/// the single division at the end keeps every weight correctly rounded.
pub fn kz_coefficients(m: usize, k: usize) -> Result<CoefficientTable> {
    check_mk(m, k)?;
    let weights = match integer_expansion(m, k) {
        Some((counts, total)) => counts.iter().map(|&c| c as f64 / total as f64).collect(),
        // m^k overflows u128: convolve normalized weights instead.
        None => {
            let window = vec![1.0 / m as f64; m];
            (1..k).fold(window.clone(), |acc, _| convolve(&acc, &window))
        }
    };
    Ok(CoefficientTable { m, k, weights })
}

fn integer_expansion(m: usize, k: usize) -> Option<(Vec<u128>, u128)> {
    let total = (m as u128).checked_pow(k as u32)?;
    let mut acc = vec![1u128; m];
    for _ in 1..k {
        let mut next = vec![0u128; acc.len() + m - 1];
        for (i, &a) in acc.iter().enumerate() {
            for slot in &mut next[i..i + m] {
                *slot += a;
            }
        }
        acc = next;
    }
    Some((acc, total))
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Complex-valued series produced by a KZFT filter.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSeries {
    pub values: Vec<Complex64>,
    pub start_index: i64,
}

impl ComplexSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Direct-form convolution of real weights times complex modulation `taps`
/// against `x`, honoring the edge policy. `weights` must be symmetric with odd
/// length. Returns the output values and the index of the first output sample.
fn convolve_edges<T>(
    x: &[f64],
    weights: &[f64],
    taps: &[T],
    edge: EdgePolicy,
    zero: T,
    scale: impl Fn(T, f64) -> T,
    mul_add: impl Fn(T, &T, f64) -> T,
) -> Result<(Vec<T>, usize)>
where
    T: Copy,
{
    let n = x.len();
    let span = weights.len() - 1;
    let h = span / 2;
    let full = |t: usize| {
        let mut acc = zero;
        for (j, tap) in taps.iter().enumerate() {
            acc = mul_add(acc, tap, x[t + j - h]);
        }
        acc
    };
    match edge {
        EdgePolicy::Truncate => {
            if n <= span {
                return Err(Error::SeriesTooShort { needed: span, got: n });
            }
            Ok(((h..n - h).map(full).collect(), h))
        }
        EdgePolicy::Renormalize => {
            let out = (0..n)
                .map(|t| {
                    if t >= h && t + h < n {
                        return full(t);
                    }
                    let lo = h.saturating_sub(t);
                    let hi = (n - 1 - t + h).min(span);
                    let mut acc = zero;
                    let mut mass = 0.0;
                    for j in lo..=hi {
                        acc = mul_add(acc, &taps[j], x[t + j - h]);
                        mass += weights[j];
                    }
                    scale(acc, 1.0 / mass)
                })
                .collect();
            Ok((out, 0))
        }
    }
}

/// Applies `KZ(m, k)` in direct (single convolution) form.
pub fn kz_apply(series: &TimeSeries, m: usize, k: usize, edge: EdgePolicy) -> Result<TimeSeries> {
    let table = kz_coefficients(m, k)?;
    let w = &table.weights;
    let (out, offset) = convolve_edges(series.values(), w, w, edge, 0.0, |a, s| a * s, |acc, tap, x| acc + tap * x)?;
    TimeSeries::with_start(out, series.start_index() + offset as i64)
}

/// Applies `KZ(m, k)` as `k` successive centered moving averages of length
/// `m`, each computed with a running sum. Each pass drops `(m-1)/2` points at
/// both ends, so the result matches [`kz_apply`] with [`EdgePolicy::Truncate`].
pub fn kz_apply_iterated(series: &TimeSeries, m: usize, k: usize) -> Result<TimeSeries> {
    check_mk(m, k)?;
    let n = series.len();
    let span = k * (m - 1);
    if n <= span {
        return Err(Error::SeriesTooShort { needed: span, got: n });
    }
    let mut cur = series.values().to_vec();
    for _ in 0..k {
        cur = moving_average(&cur, m);
    }
    TimeSeries::with_start(cur, series.start_index() + (span / 2) as i64)
}

fn moving_average(x: &[f64], m: usize) -> Vec<f64> {
    let inv = 1.0 / m as f64;
    let mut sum: f64 = x[..m].iter().sum();
    let mut out = Vec::with_capacity(x.len() + 1 - m);
    out.push(sum * inv);
    for i in m..x.len() {
        sum += x[i] - x[i - m];
        out.push(sum * inv);
    }
    out
}

/// Applies the KZFT band-pass filter centered at `spec.nu`:
/// `out(t) = sum_u w(u) exp(-i 2 pi nu u) X(t + u)`.
pub fn kzft_apply(series: &TimeSeries, spec: &FilterSpec, edge: EdgePolicy) -> Result<ComplexSeries> {
    let table = kz_coefficients(spec.m, spec.k)?;
    let h = table.half_width() as i64;
    let taps: Vec<Complex64> = table
        .weights
        .iter()
        .enumerate()
        .map(|(j, &w)| {
            let u = j as i64 - h;
            w * Complex64::from_polar(1.0, -2.0 * PI * spec.nu * u as f64)
        })
        .collect();
    let (values, offset) = convolve_edges(
        series.values(),
        &table.weights,
        &taps,
        edge,
        Complex64::new(0.0, 0.0),
        |a, s| a * s,
        |acc, tap, x| acc + tap * x,
    )?;
    Ok(ComplexSeries { values, start_index: series.start_index() + offset as i64 })
}

/// Real signal carried by a one-sided band-pass output: `2 Re(cs(t))`.
///
/// A KZFT filter centered at `nu` keeps only the `+nu` line of a real
/// sinusoid; doubling the real part restores its full amplitude.
pub fn reconstruct_component(cs: &ComplexSeries) -> Result<TimeSeries> {
    TimeSeries::with_start(cs.values.iter().map(|c| 2.0 * c.re).collect(), cs.start_index)
}

/// Squared gain of `KZFT(m, k, nu)` at frequency `lambda`:
/// `(sin(pi m d) / (m sin(pi d)))^(2k)` with `d = lambda - nu`.
pub fn energy_transfer(lambda: f64, m: usize, k: usize, nu: f64) -> f64 {
    let d = lambda - nu;
    // For odd m the kernel magnitude has period 1 in d.
    let x = d - d.round();
    if x == 0.0 {
        return 1.0;
    }
    let g = (PI * m as f64 * x).sin() / (m as f64 * (PI * x).sin());
    g.powi(2 * k as i32)
}

/// Approximate half-power frequency offset of a `KZ(m, k)` filter.
pub fn half_power_cutoff(m: usize, k: usize) -> Result<f64> {
    check_mk(m, k)?;
    if m == 1 {
        return Err(Error::UndefinedCutoff { m });
    }
    let c = 0.5f64.powf(1.0 / (2.0 * k as f64));
    let m2 = (m * m) as f64;
    Ok(6f64.sqrt() / PI * ((1.0 - c) / (m2 - c)).sqrt())
}

/// One band-pass filter per period: centered at `1/p`, `k = 1`, and `m` the
/// smallest odd integer strictly above `narrow_factor * 2 / d`, where `d` is
/// the distance to the nearest other center (or to zero frequency when only
/// one period is given). Both neighbours then sit on or beyond the first
/// zero of the transfer function.
pub fn select_filter_specs(periods: &[usize], narrow_factor: f64) -> Result<Vec<FilterSpec>> {
    if periods.is_empty() {
        return Err(Error::invalid("at least one period is required"));
    }
    if !(narrow_factor >= 1.0 && narrow_factor.is_finite()) {
        return Err(Error::invalid(format!("narrow_factor must be >= 1, got {narrow_factor}")));
    }
    for (i, &p) in periods.iter().enumerate() {
        if p < 2 {
            return Err(Error::PeriodTooSmall { period: p });
        }
        if periods[..i].contains(&p) {
            return Err(Error::DegenerateSeparation { period: p });
        }
    }

    periods
        .iter()
        .map(|&p| {
            // 2 / d in terms of periods: 2pq / |p - q| for the nearest q,
            // or 2p against zero frequency.
            let two_over_d = if periods.len() == 1 {
                2.0 * p as f64
            } else {
                periods
                    .iter()
                    .filter(|&&q| q != p)
                    .map(|&q| 2.0 * (p * q) as f64 / p.abs_diff(q) as f64)
                    .fold(0.0, f64::max)
            };
            let m = next_odd_above(narrow_factor * two_over_d);
            FilterSpec::new(m, 1, 1.0 / p as f64)
        })
        .collect()
}

/// Smallest odd integer strictly greater than `x`.
fn next_odd_above(x: f64) -> usize {
    let r = x.round();
    let base = if (x - r).abs() < 1e-9 * x.max(1.0) { r + 1.0 } else { x.ceil() };
    let m = base as usize;
    if m.is_multiple_of(2) {
        m + 1
    } else {
        m
    }
}
