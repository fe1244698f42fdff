//! Band-pass decomposition, per-component periodic bootstrap and aggregation
//! into bands for the combined periodic mean.
//!
//! In [`Mode::Vmbpbb`] each period gets its own KZFT band-pass component
//! before it is bootstrapped with block length equal to that period. In
//! [`Mode::Pbb`] every period bootstraps the unfiltered series, which is the
//! same procedure with an all-pass filter.
//!
//! Replicate `b` of the aggregate is the sum over components of replicate
//! `b` of each component's periodic mean, evaluated at `t mod p`. No
//! centering is applied, so a non-zero series mean is counted once per
//! component in PBB mode.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{bootstrap_periodic_means, ci_band, phase_band, BootstrapRun, CiBand};
use crate::error::{Error, Result};
use crate::kz::{kzft_apply, reconstruct_component, select_filter_specs, EdgePolicy, FilterSpec};
use crate::seed::SeedSpec;
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Vmbpbb,
    Pbb,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Vmbpbb => "vmbpbb",
            Mode::Pbb => "pbb",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub periods: Vec<usize>,
    pub resamples: usize,
    pub seed: SeedSpec,
    #[serde(default = "default_narrow_factor")]
    pub narrow_factor: f64,
    #[serde(default)]
    pub edge: EdgePolicy,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_narrow_factor() -> f64 {
    1.0
}

fn default_alpha() -> f64 {
    0.05
}

impl PipelineConfig {
    pub fn new(periods: Vec<usize>, resamples: usize, seed: SeedSpec) -> Self {
        Self {
            periods,
            resamples,
            seed,
            narrow_factor: 1.0,
            edge: EdgePolicy::Renormalize,
            mode: Mode::Vmbpbb,
            alpha: 0.05,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.periods.is_empty() {
            return Err(Error::invalid("at least one period is required"));
        }
        for (i, &p) in self.periods.iter().enumerate() {
            if p < 2 {
                return Err(Error::PeriodTooSmall { period: p });
            }
            if self.periods[..i].contains(&p) {
                return Err(Error::DegenerateSeparation { period: p });
            }
            if p > n {
                return Err(Error::InvalidPeriod { period: p, n });
            }
        }
        if self.resamples < 2 {
            return Err(Error::InsufficientResamples { got: self.resamples });
        }
        Ok(())
    }
}

/// Filter applied ahead of a component's bootstrap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ComponentFilter {
    AllPass,
    Kzft(FilterSpec),
}

impl ComponentFilter {
    pub fn apply(&self, series: &TimeSeries, edge: EdgePolicy) -> Result<TimeSeries> {
        match self {
            ComponentFilter::AllPass => Ok(series.clone()),
            ComponentFilter::Kzft(spec) => reconstruct_component(&kzft_apply(series, spec, edge)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentResult {
    pub period: usize,
    pub filter: ComponentFilter,
    pub component_series: TimeSeries,
    pub run: BootstrapRun,
    pub band: CiBand,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcResult {
    pub mode: Mode,
    pub components: Vec<ComponentResult>,
    pub aggregate_point: TimeSeries,
    pub aggregate_band: CiBand,
    pub warnings: Vec<String>,
}

impl MpcResult {
    /// Aggregate replicate `b` at every time point.
    pub fn aggregate_trajectory(&self, b: usize) -> Vec<f64> {
        let n = self.aggregate_point.len();
        let runs = sorted_runs(&self.components);
        (0..n).map(|t| aggregate_at(&runs, b, t)).collect()
    }
}

/// Separates `series` into one real band-pass component per period.
pub fn decompose(
    series: &TimeSeries,
    periods: &[usize],
    narrow_factor: f64,
    edge: EdgePolicy,
) -> Result<Vec<TimeSeries>> {
    select_filter_specs(periods, narrow_factor)?
        .iter()
        .map(|spec| reconstruct_component(&kzft_apply(series, spec, edge)?))
        .collect()
}

/// Substream for the component with the given period. Keyed by the period
/// value so that reordering the period list leaves every stream unchanged.
pub fn component_seed(seed: &SeedSpec, period: usize) -> SeedSpec {
    seed.child(period as u64)
}

pub fn run_pipeline(series: &TimeSeries, cfg: &PipelineConfig) -> Result<MpcResult> {
    cfg.validate(series.len())?;
    let filters: Vec<ComponentFilter> = match cfg.mode {
        Mode::Vmbpbb => {
            select_filter_specs(&cfg.periods, cfg.narrow_factor)?.into_iter().map(ComponentFilter::Kzft).collect()
        }
        Mode::Pbb => vec![ComponentFilter::AllPass; cfg.periods.len()],
    };
    run_with_filters(series, cfg, &filters)
}

/// Runs the pipeline with caller-chosen filters, one per period.
/// `cfg.mode` is only recorded on the result.
pub fn run_with_filters(series: &TimeSeries, cfg: &PipelineConfig, filters: &[ComponentFilter]) -> Result<MpcResult> {
    let n = series.len();
    cfg.validate(n)?;
    if filters.len() != cfg.periods.len() {
        return Err(Error::LengthMismatch { expected: cfg.periods.len(), got: filters.len() });
    }

    let components = cfg
        .periods
        .par_iter()
        .zip(filters.par_iter())
        .map(|(&p, filter)| {
            let component_series = filter.apply(series, cfg.edge)?;
            let run = bootstrap_periodic_means(&component_series, p, cfg.resamples, &component_seed(&cfg.seed, p))?;
            let band = phase_band(&run, n, cfg.alpha)?;
            Ok(ComponentResult { period: p, filter: *filter, component_series, run, band })
        })
        .collect::<Result<Vec<_>>>()?;

    let aggregate_band = aggregate_band(&components, n, cfg.resamples, cfg.alpha)?;
    let aggregate_point = TimeSeries::with_start(aggregate_band.point.clone(), series.start_index())?;

    let mut warnings = Vec::new();
    if cfg.mode == Mode::Pbb && cfg.periods.len() > 1 {
        if let Some(w) = mean_offset_warning(series) {
            warnings.push(w);
        }
    }

    Ok(MpcResult { mode: cfg.mode, components, aggregate_point, aggregate_band, warnings })
}

/// Runs ordered by period, so the floating-point sum is independent of the
/// order periods were listed in.
fn sorted_runs(components: &[ComponentResult]) -> Vec<&BootstrapRun> {
    let mut runs: Vec<&BootstrapRun> = components.iter().map(|c| &c.run).collect();
    runs.sort_by_key(|r| r.period);
    runs
}

fn aggregate_at(runs: &[&BootstrapRun], b: usize, t: usize) -> f64 {
    runs.iter().map(|r| r.get(b, t % r.period)).sum()
}

fn aggregate_band(components: &[ComponentResult], n: usize, resamples: usize, alpha: f64) -> Result<CiBand> {
    let runs = sorted_runs(components);
    // The aggregate repeats with the lcm of the periods.
    let cycle = runs.iter().try_fold(1usize, |acc, r| {
        let l = lcm(acc, r.period);
        (l < n).then_some(l)
    });
    let span = cycle.unwrap_or(n);
    let samples: Vec<Vec<f64>> =
        (0..span).into_par_iter().map(|t| (0..resamples).map(|b| aggregate_at(&runs, b, t)).collect()).collect();
    Ok(ci_band(&samples, alpha)?.tile(n))
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

/// Warns when the series mean is more than three standard errors from zero.
fn mean_offset_warning(series: &TimeSeries) -> Option<String> {
    let n = series.len();
    if n < 2 {
        return None;
    }
    let mean = series.mean();
    let var = series.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    (mean.abs() > 3.0 * se).then(|| {
        format!(
            "series mean {mean:.6} is {:.1} standard errors from zero; PBB aggregation counts it once per component",
            mean.abs() / se
        )
    })
}
