//! Variable multiple bandpass periodic block bootstrap (VMBPBB).
//!
//! A series that carries several periodic components is split with one
//! KZFT band-pass filter per period ([`kz`]), each component is resampled by
//! a periodic block bootstrap at its own period ([`bootstrap`]), and the
//! component replicates are summed into confidence bands for the combined
//! periodic mean ([`pipeline`]). [`simulation`] compares the method against
//! the unfiltered periodic block bootstrap on simulated two-sine series.

pub mod bootstrap;
pub mod error;
pub mod kz;
pub mod pipeline;
pub mod seed;
pub mod series;
pub mod simulation;

pub use bootstrap::{
    bootstrap_periodic_means, ci_band, pbb_resample, phase_band, phase_partition, BootstrapRun, CiBand, PhasePartition,
};
pub use error::{Error, Result};
pub use kz::{
    energy_transfer, half_power_cutoff, kz_apply, kz_apply_iterated, kz_coefficients, kzft_apply,
    reconstruct_component, select_filter_specs, CoefficientTable, ComplexSeries, EdgePolicy, FilterSpec,
};
pub use pipeline::{
    component_seed, decompose, run_pipeline, run_with_filters, ComponentFilter, ComponentResult, Mode, MpcResult,
    PipelineConfig,
};
pub use seed::{SeedSpec, StreamRng};
pub use series::{extend_periodic, periodic_mean, periodogram, PeriodicMean, Spectrum, TimeSeries};
pub use simulation::{
    ci_ratio, generate_mpc, outside_fraction, r2_against_truth, run_grid, run_scenario, run_scenario_detailed,
    GridCell, RepetitionRecord, ScenarioConfig, ScenarioMetrics, ScenarioOutcome, Snr, TrueSignals,
};
