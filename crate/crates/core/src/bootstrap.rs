//! Periodic block bootstrap of a single periodic component.
//!
//! Samples are split into `p` phase subsets (`i mod p`). A resample fills
//! every output slot `t` with a uniform draw, with replacement, from the
//! subset of phase `t mod p`; slots draw independently.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seed::SeedSpec;
use crate::series::{periodic_mean_of, TimeSeries};

/// Congruence classes of `0..n` modulo `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhasePartition {
    pub period: usize,
    pub subsets: Vec<Vec<usize>>,
}

pub fn phase_partition(n: usize, p: usize) -> Result<PhasePartition> {
    if p < 1 || p > n {
        return Err(Error::InvalidPeriod { period: p, n });
    }
    let subsets = (0..p).map(|s| (s..n).step_by(p).collect()).collect();
    Ok(PhasePartition { period: p, subsets })
}

fn check_period(n: usize, p: usize) -> Result<()> {
    if p < 1 || p > n {
        return Err(Error::InvalidPeriod { period: p, n });
    }
    Ok(())
}

/// Number of samples with index `i < n` and `i mod p == s`.
fn phase_count(n: usize, p: usize, s: usize) -> usize {
    (n - s).div_ceil(p)
}

/// One periodic block bootstrap resample of `series`.
pub fn pbb_resample<R: Rng + ?Sized>(series: &TimeSeries, p: usize, rng: &mut R) -> Result<TimeSeries> {
    let n = series.len();
    check_period(n, p)?;
    let x = series.values();
    let counts: Vec<usize> = (0..p).map(|s| phase_count(n, p, s)).collect();
    let out = (0..n)
        .map(|t| {
            let s = t % p;
            x[s + p * rng.random_range(0..counts[s])]
        })
        .collect();
    TimeSeries::with_start(out, series.start_index())
}

/// Periodic means of one resample without materializing it. Consumes the
/// generator exactly as [`pbb_resample`] does and accumulates in the same
/// order as `periodic_mean`, so the result is bit-identical to
/// `periodic_mean(pbb_resample(..))`.
fn resampled_means<R: Rng + ?Sized>(x: &[f64], p: usize, counts: &[usize], rng: &mut R) -> Vec<f64> {
    let mut sums = vec![0.0; p];
    for t in 0..x.len() {
        let s = t % p;
        sums[s] += x[s + p * rng.random_range(0..counts[s])];
    }
    sums.iter().zip(counts).map(|(s, &c)| s / c as f64).collect()
}

/// `B x p` matrix of resampled periodic means, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapRun {
    pub period: usize,
    pub resamples: usize,
    pub estimates: Vec<f64>,
    pub seed: SeedSpec,
}

impl BootstrapRun {
    pub fn row(&self, b: usize) -> &[f64] {
        &self.estimates[b * self.period..(b + 1) * self.period]
    }

    pub fn get(&self, b: usize, s: usize) -> f64 {
        self.estimates[b * self.period + s]
    }

    /// The `B` resampled means of phase `s`.
    pub fn column(&self, s: usize) -> Vec<f64> {
        (0..self.resamples).map(|b| self.get(b, s)).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.estimates.chunks_exact(self.period)
    }
}

/// Runs `resamples` bootstrap replicates. Replicate `b` draws from the
/// substream `seed.child(b)`, so the result does not depend on how the work
/// is scheduled across threads.
pub fn bootstrap_periodic_means(
    series: &TimeSeries,
    p: usize,
    resamples: usize,
    seed: &SeedSpec,
) -> Result<BootstrapRun> {
    let n = series.len();
    check_period(n, p)?;
    if resamples < 1 {
        return Err(Error::InsufficientResamples { got: resamples });
    }
    let x = series.values();
    let counts = periodic_mean_of(x, p)?.counts;
    let rows: Vec<Vec<f64>> = (0..resamples)
        .into_par_iter()
        .map(|b| resampled_means(x, p, &counts, &mut seed.child(b as u64).rng()))
        .collect();
    Ok(BootstrapRun { period: p, resamples, estimates: rows.concat(), seed: seed.clone() })
}

/// Pointwise confidence band.
#[derive(Debug, Clone, PartialEq)]
pub struct CiBand {
    pub lower: Vec<f64>,
    pub point: Vec<f64>,
    pub upper: Vec<f64>,
    pub alpha: f64,
}

impl CiBand {
    pub fn len(&self) -> usize {
        self.point.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point.is_empty()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.upper.iter().zip(&self.lower).map(|(u, l)| u - l).collect()
    }

    /// Repeats the band cyclically to length `n`.
    pub fn tile(&self, n: usize) -> CiBand {
        let rep = |v: &Vec<f64>| (0..n).map(|t| v[t % v.len()]).collect();
        CiBand { lower: rep(&self.lower), point: rep(&self.point), upper: rep(&self.upper), alpha: self.alpha }
    }
}

/// Quantile of sorted data with linear interpolation between order
/// statistics at 1-based rank `h = (len - 1) q + 1`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    match sorted.get(lo + 1) {
        Some(&next) if frac > 0.0 => sorted[lo] + frac * (next - sorted[lo]),
        _ => sorted[lo],
    }
}

/// Percentile band from the resampled values at each time point: the
/// `alpha/2` and `1 - alpha/2` quantiles around the resample mean.
pub fn ci_band<S: AsRef<[f64]>>(samples: &[S], alpha: f64) -> Result<CiBand> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let mut band = CiBand {
        lower: Vec::with_capacity(samples.len()),
        point: Vec::with_capacity(samples.len()),
        upper: Vec::with_capacity(samples.len()),
        alpha,
    };
    let mut buf = Vec::new();
    for s in samples {
        let vals = s.as_ref();
        if vals.len() < 2 {
            return Err(Error::InsufficientResamples { got: vals.len() });
        }
        buf.clear();
        buf.extend_from_slice(vals);
        buf.sort_unstable_by(f64::total_cmp);
        band.lower.push(quantile_sorted(&buf, alpha / 2.0));
        band.upper.push(quantile_sorted(&buf, 1.0 - alpha / 2.0));
        band.point.push(vals.iter().sum::<f64>() / vals.len() as f64);
    }
    Ok(band)
}

/// Per-phase band of a run, tiled to length `n`.
pub fn phase_band(run: &BootstrapRun, n: usize, alpha: f64) -> Result<CiBand> {
    let cols: Vec<Vec<f64>> = (0..run.period).map(|s| run.column(s)).collect();
    Ok(ci_band(&cols, alpha)?.tile(n))
}
