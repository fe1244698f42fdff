//! Shared inputs for the benchmarks.

use std::f64::consts::PI;

use vmbpbb::TimeSeries;

/// Sum of unit sines at periods 50 and 100 plus a deterministic wobble.
pub fn two_sines(n: usize) -> TimeSeries {
    TimeSeries::from_fn(n, |t| {
        let t = t as f64;
        (2.0 * PI * t / 50.0).sin() + (2.0 * PI * t / 100.0).sin() + 0.3 * (0.7 * t).sin() * (1.3 * t).cos()
    })
    .expect("finite samples")
}
