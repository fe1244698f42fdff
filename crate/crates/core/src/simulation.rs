//! Monte-Carlo comparison of the filtered (VMBPBB) and unfiltered (PBB)
//! bootstraps on two-sine signals in Gaussian noise.
//!
//! Every repetition draws a fresh series and runs both pipelines on it with
//! the same resampling substreams, so metric differences come only from the
//! band-pass step.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::bootstrap::CiBand;
use crate::error::{Error, Result};
use crate::kz::EdgePolicy;
use crate::pipeline::{run_pipeline, Mode, PipelineConfig};
use crate::seed::{splitmix64, SeedSpec};
use crate::series::TimeSeries;

const DATA_STREAM: u64 = 0;
const RESAMPLE_STREAM: u64 = 1;

/// Signal-to-noise specification `signal:noise`; noise variance is
/// `noise / signal` times the total signal power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snr {
    pub signal: f64,
    pub noise: f64,
}

impl Snr {
    pub const fn new(signal: f64, noise: f64) -> Self {
        Self { signal, noise }
    }

    pub fn noise_variance(&self, signal_power: f64) -> f64 {
        self.noise / self.signal * signal_power
    }
}

impl std::fmt::Display for Snr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.signal, self.noise)
    }
}

impl std::str::FromStr for Snr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("expected SNR as `signal:noise`, got {s:?}"));
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        let signal: f64 = a.trim().parse().map_err(|_| bad())?;
        let noise: f64 = b.trim().parse().map_err(|_| bad())?;
        if !(signal > 0.0 && noise >= 0.0 && signal.is_finite() && noise.is_finite()) {
            return Err(bad());
        }
        Ok(Self { signal, noise })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub p1: usize,
    pub p2: usize,
    pub snr: Snr,
    pub n: usize,
    pub resamples: usize,
    pub reps: usize,
    pub seed: SeedSpec,
    pub narrow_factor: f64,
    /// Phase of both sines at `t = 0`, in radians.
    pub phase_offset: f64,
    pub alpha: f64,
    pub edge: EdgePolicy,
}

impl ScenarioConfig {
    /// The reduced-cost defaults: `n = 1000`, `B = 200`, 50 repetitions.
    pub fn desk(p1: usize, p2: usize, snr: Snr, master_seed: u64) -> Self {
        Self {
            p1,
            p2,
            snr,
            n: 1000,
            resamples: 200,
            reps: 50,
            seed: SeedSpec::new(master_seed),
            narrow_factor: 1.0,
            phase_offset: 0.0,
            alpha: 0.05,
            edge: EdgePolicy::Renormalize,
        }
    }

    /// Full-cost settings: `B = 1000` and 1000 repetitions.
    pub fn paper(p1: usize, p2: usize, snr: Snr, master_seed: u64) -> Self {
        Self { resamples: 1000, reps: 1000, ..Self::desk(p1, p2, snr, master_seed) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p1 == self.p2 {
            return Err(Error::DegenerateSeparation { period: self.p1 });
        }
        for p in [self.p1, self.p2] {
            if p < 2 {
                return Err(Error::PeriodTooSmall { period: p });
            }
        }
        if self.n < 2 * self.p1.max(self.p2) {
            return Err(Error::SeriesTooShort { needed: 2 * self.p1.max(self.p2) - 1, got: self.n });
        }
        if self.reps < 1 {
            return Err(Error::invalid("reps must be at least 1"));
        }
        if self.resamples < 2 {
            return Err(Error::InsufficientResamples { got: self.resamples });
        }
        if !(self.snr.signal > 0.0 && self.snr.noise >= 0.0) {
            return Err(Error::invalid(format!("invalid SNR {}", self.snr)));
        }
        Ok(())
    }

    /// Identifier of the data-generating scenario. Symmetric in the two
    /// periods and independent of filter settings, so swapped or re-filtered
    /// runs see the same series.
    pub fn scenario_id(&self) -> u64 {
        let (lo, hi) = (self.p1.min(self.p2), self.p1.max(self.p2));
        [lo as u64, hi as u64, self.snr.signal.to_bits(), self.snr.noise.to_bits()]
            .iter()
            .fold(0x5eed, |h, &v| splitmix64(h ^ v))
    }

    fn repetition_seed(&self, r: usize) -> SeedSpec {
        self.seed.child(self.scenario_id()).child(r as u64)
    }

    fn pipeline(&self, mode: Mode, seed: SeedSpec) -> PipelineConfig {
        PipelineConfig {
            periods: vec![self.p1, self.p2],
            resamples: self.resamples,
            seed,
            narrow_factor: self.narrow_factor,
            edge: self.edge,
            mode,
            alpha: self.alpha,
        }
    }
}

/// Noise-free components of a simulated series.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueSignals {
    pub comp1: TimeSeries,
    pub comp2: TimeSeries,
    pub mpc: TimeSeries,
    pub noise_sigma: f64,
}

/// Two unit-amplitude sines plus i.i.d. Gaussian noise scaled to the SNR.
pub fn generate_mpc<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<(TimeSeries, TrueSignals)> {
    let sine = |p: usize| TimeSeries::from_fn(cfg.n, |t| (2.0 * PI * t as f64 / p as f64 + cfg.phase_offset).sin());
    let comp1 = sine(cfg.p1)?;
    let comp2 = sine(cfg.p2)?;
    let mpc = TimeSeries::new(comp1.values().iter().zip(comp2.values()).map(|(a, b)| a + b).collect())?;
    // two unit sines carry power 1/2 each
    let noise_sigma = cfg.snr.noise_variance(1.0).sqrt();
    let series = if noise_sigma == 0.0 {
        mpc.clone()
    } else {
        TimeSeries::new(mpc.values().iter().map(|v| v + noise_sigma * rng.sample::<f64, _>(StandardNormal)).collect())?
    };
    Ok((series, TrueSignals { comp1, comp2, mpc, noise_sigma }))
}

/// Median over `t` of the PBB-to-VMBPBB band width ratio.
pub fn ci_ratio(band_pbb: &CiBand, band_vm: &CiBand) -> Result<f64> {
    if band_pbb.len() != band_vm.len() {
        return Err(Error::LengthMismatch { expected: band_vm.len(), got: band_pbb.len() });
    }
    let ratios = band_pbb
        .widths()
        .iter()
        .zip(band_vm.widths())
        .enumerate()
        .map(|(t, (wp, wv))| if wv > 0.0 { Ok(wp / wv) } else { Err(Error::DegenerateBand { index: t }) })
        .collect::<Result<Vec<_>>>()?;
    Ok(median(&ratios))
}

/// Fraction of time points where `truth` falls outside the band.
pub fn outside_fraction(band: &CiBand, truth: &TimeSeries) -> Result<f64> {
    if band.len() != truth.len() {
        return Err(Error::LengthMismatch { expected: band.len(), got: truth.len() });
    }
    let outside = truth.values().iter().enumerate().filter(|&(t, &v)| v < band.lower[t] || v > band.upper[t]).count();
    Ok(outside as f64 / truth.len() as f64)
}

/// Squared Pearson correlation, in percent.
pub fn r2_percent(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { expected: a.len(), got: b.len() });
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok(100.0 * sab * sab / (saa * sbb))
}

/// Squared correlation (percent) between `truth` and the pointwise median of
/// the per-repetition point estimates.
pub fn r2_against_truth(point_estimates: &[TimeSeries], truth: &TimeSeries) -> Result<f64> {
    let n = truth.len();
    if point_estimates.is_empty() {
        return Err(Error::invalid("no point estimates"));
    }
    if let Some(bad) = point_estimates.iter().find(|p| p.len() != n) {
        return Err(Error::LengthMismatch { expected: n, got: bad.len() });
    }
    let med: Vec<f64> =
        (0..n).map(|t| median(&point_estimates.iter().map(|p| p.values()[t]).collect::<Vec<_>>())).collect();
    r2_percent(&med, truth.values())
}

/// Median, averaging the two middle values for even lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Metrics of one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionRecord {
    pub rep: usize,
    pub ci_ratio: f64,
    pub r2_vmbpbb: f64,
    pub r2_pbb: f64,
    pub outside_vmbpbb: f64,
    pub outside_pbb: f64,
}

/// Summary of a scenario over its repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMetrics {
    pub ci_ratio_median: f64,
    pub r2_vmbpbb: f64,
    pub r2_pbb: f64,
    pub r2_diff: f64,
    pub outside_frac_vmbpbb: f64,
    pub outside_frac_pbb: f64,
    pub reps_completed: usize,
}

impl ScenarioMetrics {
    /// Medians over repetitions of every per-repetition metric.
    pub fn from_records(records: &[RepetitionRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::invalid("no repetitions to summarize"));
        }
        let col = |f: fn(&RepetitionRecord) -> f64| median(&records.iter().map(f).collect::<Vec<_>>());
        let r2_vmbpbb = col(|r| r.r2_vmbpbb);
        let r2_pbb = col(|r| r.r2_pbb);
        Ok(Self {
            ci_ratio_median: col(|r| r.ci_ratio),
            r2_vmbpbb,
            r2_pbb,
            r2_diff: r2_vmbpbb - r2_pbb,
            outside_frac_vmbpbb: col(|r| r.outside_vmbpbb),
            outside_frac_pbb: col(|r| r.outside_pbb),
            reps_completed: records.len(),
        })
    }
}

/// Full output of [`run_scenario_detailed`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub metrics: ScenarioMetrics,
    pub records: Vec<RepetitionRecord>,
    pub points_vmbpbb: Vec<TimeSeries>,
    pub points_pbb: Vec<TimeSeries>,
    pub truth: TimeSeries,
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioMetrics> {
    Ok(run_scenario_detailed(cfg)?.metrics)
}

pub fn run_scenario_detailed(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    cfg.validate()?;
    let reps = (0..cfg.reps).into_par_iter().map(|r| run_repetition(cfg, r)).collect::<Result<Vec<_>>>()?;
    let truth = reps[0].3.clone();
    let mut records = Vec::with_capacity(reps.len());
    let mut points_vmbpbb = Vec::with_capacity(reps.len());
    let mut points_pbb = Vec::with_capacity(reps.len());
    for (rec, vm, pbb, _) in reps {
        records.push(rec);
        points_vmbpbb.push(vm);
        points_pbb.push(pbb);
    }
    let metrics = ScenarioMetrics::from_records(&records)?;
    Ok(ScenarioOutcome { metrics, records, points_vmbpbb, points_pbb, truth })
}

fn run_repetition(cfg: &ScenarioConfig, r: usize) -> Result<(RepetitionRecord, TimeSeries, TimeSeries, TimeSeries)> {
    let seed = cfg.repetition_seed(r);
    let (series, truth) = generate_mpc(cfg, &mut seed.child(DATA_STREAM).rng())?;
    let resample_seed = seed.child(RESAMPLE_STREAM);
    let pbb = run_pipeline(&series, &cfg.pipeline(Mode::Pbb, resample_seed.clone()))?;
    let vm = run_pipeline(&series, &cfg.pipeline(Mode::Vmbpbb, resample_seed))?;
    let record = RepetitionRecord {
        rep: r,
        ci_ratio: ci_ratio(&pbb.aggregate_band, &vm.aggregate_band)?,
        r2_vmbpbb: r2_percent(vm.aggregate_point.values(), truth.mpc.values())?,
        r2_pbb: r2_percent(pbb.aggregate_point.values(), truth.mpc.values())?,
        outside_vmbpbb: outside_fraction(&vm.aggregate_band, &truth.mpc)?,
        outside_pbb: outside_fraction(&pbb.aggregate_band, &truth.mpc)?,
    };
    Ok((record, vm.aggregate_point, pbb.aggregate_point, truth.mpc))
}

/// One populated cell of the comparison grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub p1: usize,
    pub p2: usize,
    pub snr: Snr,
    pub narrow_factor: f64,
    /// Set when the automatic narrowing rule replaced the base factor.
    pub narrowed: bool,
    pub metrics: ScenarioMetrics,
    #[serde(skip)]
    pub records: Vec<RepetitionRecord>,
}

/// Cells whose filters are narrowed by a factor of two in faithful mode:
/// periods {10, 25} at SNR 1:2 and 1:5.
pub fn needs_narrowing(p1: usize, p2: usize, snr: Snr) -> bool {
    let pair = (p1.min(p2), p1.max(p2)) == (10, 25);
    let ratio = snr.noise / snr.signal;
    pair && (ratio == 2.0 || ratio == 5.0)
}

/// Every unordered pair of distinct periods at every SNR, in SNR-major order.
pub fn grid_cells(periods: &[usize], snrs: &[Snr]) -> Result<Vec<(usize, usize, Snr)>> {
    if periods.len() < 2 {
        return Err(Error::invalid("a grid needs at least two periods"));
    }
    for (i, &p) in periods.iter().enumerate() {
        if periods[..i].contains(&p) {
            return Err(Error::DegenerateSeparation { period: p });
        }
    }
    let mut cells = Vec::new();
    for &snr in snrs {
        for i in 0..periods.len() {
            for j in i + 1..periods.len() {
                cells.push((periods[i], periods[j], snr));
            }
        }
    }
    Ok(cells)
}

pub fn run_grid(periods: &[usize], snrs: &[Snr], base: &ScenarioConfig, paper_faithful: bool) -> Result<Vec<GridCell>> {
    grid_cells(periods, snrs)?
        .into_par_iter()
        .map(|(p1, p2, snr)| {
            let narrowed = paper_faithful && needs_narrowing(p1, p2, snr);
            let narrow_factor = if narrowed { 2.0 } else { base.narrow_factor };
            let cfg = ScenarioConfig { p1, p2, snr, narrow_factor, ..base.clone() };
            let outcome = run_scenario_detailed(&cfg)?;
            Ok(GridCell { p1, p2, snr, narrow_factor, narrowed, metrics: outcome.metrics, records: outcome.records })
        })
        .collect()
}
