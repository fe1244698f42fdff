//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vmbpbb::{
    energy_transfer, kzft_apply, reconstruct_component, run_grid, run_pipeline, select_filter_specs, CiBand,
    EdgePolicy, FilterSpec, GridCell, Mode, PipelineConfig, RepetitionRecord, ScenarioConfig, ScenarioMetrics,
    SeedSpec, Snr, TimeSeries,
};

use crate::error::{CliError, CliResult};
use crate::io::{fmt_f64, read_json, read_series, write_columns, write_rows, Table};
use crate::manifest::{unix_now, RunManifest};
use crate::{FilterArgs, ReportArgs, RunArgs, Scale, SimulateArgs, TransferArgs};

const DEFAULT_PERIODS: [usize; 5] = [10, 25, 50, 100, 250];
const DEFAULT_SNRS: [&str; 3] = ["1:2", "1:5", "1:10"];
const DEFAULT_RESAMPLES: usize = 1000;

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))
}

/// `out.csv` -> `out.manifest.json` in the same directory.
fn sibling_manifest(output: &Path) -> PathBuf {
    let stem = output.file_stem().map_or_else(|| "output".into(), |s| s.to_string_lossy().into_owned());
    output.with_file_name(format!("{stem}.manifest.json"))
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

pub fn filter(a: FilterArgs) -> CliResult<()> {
    let started = unix_now();
    let series = read_series(&a.input)?;
    let edge: EdgePolicy = a.edge.into();
    let (specs, names): (Vec<FilterSpec>, Vec<String>) = if a.spec.is_empty() {
        for &p in &a.periods {
            if p > series.len() {
                return Err(vmbpbb::Error::InvalidPeriod { period: p, n: series.len() }.into());
            }
        }
        let specs = select_filter_specs(&a.periods, a.narrow_factor)?;
        (specs, a.periods.iter().map(|p| format!("component_{p}")).collect())
    } else {
        (a.spec.clone(), (1..=a.spec.len()).map(|i| format!("component_{i}")).collect())
    };

    let comps = specs
        .iter()
        .map(|s| reconstruct_component(&kzft_apply(&series, s, edge)?))
        .collect::<vmbpbb::Result<Vec<TimeSeries>>>()?;

    // Rows follow the input time axis; truncated components leave blanks.
    let mut header = vec!["t".to_string()];
    header.extend(names);
    let rows: Vec<Vec<String>> = (0..series.len())
        .map(|i| {
            let t = series.time(i);
            let mut row = vec![t.to_string()];
            for c in &comps {
                let j = t - c.start_index();
                row.push(if j >= 0 && (j as usize) < c.len() {
                    fmt_f64(c.values()[j as usize])
                } else {
                    String::new()
                });
            }
            row
        })
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(&a.output, &header_refs, &rows)?;

    #[derive(Serialize)]
    struct Resolved<'a> {
        periods: &'a [usize],
        specs: &'a [FilterSpec],
        narrow_factor: f64,
        edge: EdgePolicy,
    }
    let config = to_value(&Resolved { periods: &a.periods, specs: &specs, narrow_factor: a.narrow_factor, edge });
    let mut manifest = RunManifest::new("filter", config, None, started);
    manifest.input(&a.input)?;
    manifest.output(&a.output);
    manifest.write(&sibling_manifest(&a.output))
}

/// Settings accepted in a `run` configuration file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunFile {
    periods: Option<Vec<usize>>,
    resamples: Option<usize>,
    seed: Option<u64>,
    narrow_factor: Option<f64>,
    edge: Option<EdgePolicy>,
    mode: Option<Mode>,
    alpha: Option<f64>,
}

fn check_alpha(alpha: f64) -> CliResult<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn write_band(path: &Path, start: i64, band: &CiBand) -> CliResult<()> {
    let names = ["lower", "point", "upper"].map(String::from);
    write_columns(path, start, &names, &[&band.lower, &band.point, &band.upper])
}

pub fn run(a: RunArgs) -> CliResult<()> {
    let started = unix_now();
    let file: RunFile = match &a.config {
        Some(p) => read_json(p)?,
        None => RunFile::default(),
    };
    let periods = a
        .periods
        .or(file.periods)
        .ok_or_else(|| CliError::Config("periods are required (--periods or config)".into()))?;
    let seed = a.seed.or(file.seed).ok_or_else(|| CliError::Config("a seed is required (--seed or config)".into()))?;
    let mut cfg =
        PipelineConfig::new(periods, a.resamples.or(file.resamples).unwrap_or(DEFAULT_RESAMPLES), SeedSpec::new(seed));
    cfg.mode = a.mode.map(Mode::from).or(file.mode).unwrap_or_default();
    cfg.alpha = a.alpha.or(file.alpha).unwrap_or(cfg.alpha);
    cfg.narrow_factor = a.narrow_factor.or(file.narrow_factor).unwrap_or(cfg.narrow_factor);
    cfg.edge = a.edge.map(EdgePolicy::from).or(file.edge).unwrap_or_default();
    check_alpha(cfg.alpha)?;

    let series = read_series(&a.input)?;
    let result = run_pipeline(&series, &cfg)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }

    create_dir(&a.output_dir)?;
    let mut manifest = RunManifest::new("run", to_value(&cfg), Some(seed), started);
    manifest.input(&a.input)?;
    let start = series.start_index();
    let agg = a.output_dir.join("aggregate.csv");
    write_band(&agg, start, &result.aggregate_band)?;
    manifest.output(&agg);
    for c in &result.components {
        let path = a.output_dir.join(format!("component_{}.csv", c.period));
        write_band(&path, start, &c.band)?;
        manifest.output(&path);
    }
    manifest.write(&a.output_dir.join("manifest.json"))
}

/// Settings accepted in a `simulate` configuration file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateFile {
    periods: Option<Vec<usize>>,
    snrs: Option<Vec<String>>,
    n: Option<usize>,
    resamples: Option<usize>,
    reps: Option<usize>,
    seed: Option<u64>,
    narrow_factor: Option<f64>,
    phase_offset: Option<f64>,
    alpha: Option<f64>,
    edge: Option<EdgePolicy>,
    paper_faithful: Option<bool>,
}

#[derive(Debug, Serialize)]
struct ResolvedGrid {
    periods: Vec<usize>,
    snrs: Vec<String>,
    paper_faithful: bool,
    scale: &'static str,
    n: usize,
    resamples: usize,
    reps: usize,
    seed: u64,
    narrow_factor: f64,
    phase_offset: f64,
    alpha: f64,
    edge: EdgePolicy,
}

fn parse_snr(s: &str) -> CliResult<Snr> {
    s.parse::<Snr>().map_err(|e| CliError::Config(e.to_string()))
}

pub fn simulate(a: SimulateArgs) -> CliResult<()> {
    let started = unix_now();
    let file: SimulateFile = match &a.config {
        Some(p) => read_json(p)?,
        None => SimulateFile::default(),
    };
    let seed = a.seed.or(file.seed).ok_or_else(|| CliError::Config("a seed is required (--seed or config)".into()))?;
    let periods = file.periods.unwrap_or_else(|| DEFAULT_PERIODS.to_vec());
    let snr_text = file.snrs.unwrap_or_else(|| DEFAULT_SNRS.iter().map(|s| s.to_string()).collect());
    let snrs = snr_text.iter().map(|s| parse_snr(s)).collect::<CliResult<Vec<_>>>()?;

    let template = match a.scale {
        Scale::Desk => ScenarioConfig::desk(periods[0], periods[0], Snr::new(1.0, 1.0), seed),
        Scale::Paper => {
            eprintln!(
                "warning: paper scale runs 1000 resamples x 1000 repetitions per cell; a full grid can take hours"
            );
            ScenarioConfig::paper(periods[0], periods[0], Snr::new(1.0, 1.0), seed)
        }
    };
    let base = ScenarioConfig {
        n: file.n.unwrap_or(template.n),
        resamples: a.resamples.or(file.resamples).unwrap_or(template.resamples),
        reps: a.reps.or(file.reps).unwrap_or(template.reps),
        narrow_factor: file.narrow_factor.unwrap_or(template.narrow_factor),
        phase_offset: file.phase_offset.unwrap_or(template.phase_offset),
        alpha: file.alpha.unwrap_or(template.alpha),
        edge: file.edge.unwrap_or(template.edge),
        ..template
    };
    check_alpha(base.alpha)?;
    let paper_faithful = a.paper_faithful || file.paper_faithful.unwrap_or(false);

    let resolved = ResolvedGrid {
        periods: periods.clone(),
        snrs: snrs.iter().map(Snr::to_string).collect(),
        paper_faithful,
        scale: match a.scale {
            Scale::Desk => "desk",
            Scale::Paper => "paper",
        },
        n: base.n,
        resamples: base.resamples,
        reps: base.reps,
        seed,
        narrow_factor: base.narrow_factor,
        phase_offset: base.phase_offset,
        alpha: base.alpha,
        edge: base.edge,
    };

    let cells = run_grid(&periods, &snrs, &base, paper_faithful)?;

    create_dir(&a.output_dir)?;
    let mut manifest = RunManifest::new("simulate", to_value(&resolved), Some(seed), started);
    if let Some(p) = &a.config {
        manifest.input(p)?;
    }
    for path in write_tables(&a.output_dir, &cells)? {
        manifest.output(&path);
    }
    let reps_path = a.output_dir.join("repetitions.csv");
    write_repetitions(&reps_path, &cells)?;
    manifest.output(&reps_path);
    manifest.write(&a.output_dir.join("manifest.json"))
}

const REPETITION_HEADER: [&str; 11] = [
    "snr",
    "p1",
    "p2",
    "narrow_factor",
    "narrowed",
    "rep",
    "ci_ratio",
    "r2_vmbpbb",
    "r2_pbb",
    "outside_vmbpbb",
    "outside_pbb",
];

fn write_repetitions(path: &Path, cells: &[GridCell]) -> CliResult<()> {
    let mut rows = Vec::new();
    for c in cells {
        for r in &c.records {
            rows.push(vec![
                c.snr.to_string(),
                c.p1.to_string(),
                c.p2.to_string(),
                fmt_f64(c.narrow_factor),
                c.narrowed.to_string(),
                r.rep.to_string(),
                fmt_f64(r.ci_ratio),
                fmt_f64(r.r2_vmbpbb),
                fmt_f64(r.r2_pbb),
                fmt_f64(r.outside_vmbpbb),
                fmt_f64(r.outside_pbb),
            ]);
        }
    }
    write_rows(path, &REPETITION_HEADER, &rows)
}

/// Writes `table1.csv`, `table2.csv` and `coverage.csv`.
fn write_tables(dir: &Path, cells: &[GridCell]) -> CliResult<Vec<PathBuf>> {
    let mut periods: Vec<usize> = cells.iter().flat_map(|c| [c.p1, c.p2]).collect();
    periods.sort_unstable();
    periods.dedup();
    let mut snrs: Vec<String> = Vec::new();
    for c in cells {
        let s = c.snr.to_string();
        if !snrs.contains(&s) {
            snrs.push(s);
        }
    }
    let lookup: BTreeMap<(String, usize, usize), &GridCell> =
        cells.iter().map(|c| ((c.snr.to_string(), c.p1.min(c.p2), c.p1.max(c.p2)), c)).collect();

    let period_names: Vec<String> = periods.iter().map(|p| p.to_string()).collect();
    let mut header: Vec<&str> = vec!["snr", "period"];
    header.extend(period_names.iter().map(String::as_str));
    header.push("narrowed");

    let matrix = |value: fn(&ScenarioMetrics) -> f64| -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for snr in &snrs {
            for (i, &pi) in periods.iter().enumerate() {
                let mut row = vec![snr.clone(), pi.to_string()];
                let mut narrowed = Vec::new();
                for (j, &pj) in periods.iter().enumerate() {
                    let cell = if j > i { lookup.get(&(snr.clone(), pi, pj)) } else { None };
                    match cell {
                        Some(c) => {
                            row.push(fmt_f64(value(&c.metrics)));
                            if c.narrowed {
                                narrowed.push(format!("*{pj}"));
                            }
                        }
                        None => row.push(String::new()),
                    }
                }
                row.push(narrowed.join(" "));
                rows.push(row);
            }
        }
        rows
    };

    let t1 = dir.join("table1.csv");
    write_rows(&t1, &header, &matrix(|m| m.ci_ratio_median))?;
    let t2 = dir.join("table2.csv");
    write_rows(&t2, &header, &matrix(|m| m.r2_diff))?;

    let cov = dir.join("coverage.csv");
    let mut rows = Vec::new();
    for snr in &snrs {
        for (key, c) in &lookup {
            if &key.0 != snr {
                continue;
            }
            let m = &c.metrics;
            rows.push(vec![
                snr.clone(),
                key.1.to_string(),
                key.2.to_string(),
                fmt_f64(c.narrow_factor),
                c.narrowed.to_string(),
                m.reps_completed.to_string(),
                fmt_f64(m.ci_ratio_median),
                fmt_f64(m.r2_vmbpbb),
                fmt_f64(m.r2_pbb),
                fmt_f64(m.r2_diff),
                fmt_f64(m.outside_frac_vmbpbb),
                fmt_f64(m.outside_frac_pbb),
            ]);
        }
    }
    write_rows(
        &cov,
        &[
            "snr",
            "p1",
            "p2",
            "narrow_factor",
            "narrowed",
            "reps",
            "ci_ratio_median",
            "r2_vmbpbb",
            "r2_pbb",
            "r2_diff",
            "outside_frac_vmbpbb",
            "outside_frac_pbb",
        ],
        &rows,
    )?;
    Ok(vec![t1, t2, cov])
}

pub fn transfer(a: TransferArgs) -> CliResult<()> {
    let started = unix_now();
    let mut specs = Vec::new();
    for &m in &a.m {
        for &k in &a.k {
            for &nu in &a.nu {
                specs.push(FilterSpec::new(m, k, nu)?);
            }
        }
    }
    specs.extend(a.spec.iter().copied());

    let lambdas: Vec<f64> = match &a.lambda {
        Some(l) => l.clone(),
        None => {
            if a.points < 2 || a.lambda_max.is_nan() || a.lambda_max <= 0.0 {
                return Err(CliError::Config("need --points >= 2 and --lambda-max > 0".into()));
            }
            (0..a.points).map(|i| a.lambda_max * i as f64 / (a.points - 1) as f64).collect()
        }
    };

    let mut rows = Vec::with_capacity(specs.len() * lambdas.len());
    for s in &specs {
        for &l in &lambdas {
            rows.push(vec![
                s.m.to_string(),
                s.k.to_string(),
                fmt_f64(s.nu),
                fmt_f64(l),
                fmt_f64(energy_transfer(l, s.m, s.k, s.nu)),
            ]);
        }
    }
    write_rows(&a.output, &["m", "k", "nu", "lambda", "energy"], &rows)?;

    #[derive(Serialize)]
    struct Resolved<'a> {
        specs: &'a [FilterSpec],
        lambdas: &'a [f64],
    }
    let mut manifest =
        RunManifest::new("transfer", to_value(&Resolved { specs: &specs, lambdas: &lambdas }), None, started);
    manifest.output(&a.output);
    manifest.write(&sibling_manifest(&a.output))
}

type CellKey = (String, usize, usize);
/// SNR, narrow factor, narrowed flag and records of one cell.
type CellLog = (Snr, f64, bool, Vec<RepetitionRecord>);

pub fn report(a: ReportArgs) -> CliResult<()> {
    let started = unix_now();
    let path = &a.input;
    let table = Table::read(path)?;
    let cols: Vec<usize> = REPETITION_HEADER.iter().map(|h| table.column(path, h)).collect::<CliResult<_>>()?;

    // Cells in order of first appearance.
    let mut order: Vec<CellKey> = Vec::new();
    let mut groups: BTreeMap<CellKey, CellLog> = BTreeMap::new();
    for (line, row) in &table.rows {
        let f = |i: usize| row[cols[i]].as_str();
        let line = *line;
        let snr: Snr = f(0).parse().map_err(|_| CliError::Parse {
            path: path.clone(),
            line,
            msg: format!("bad snr `{}`", f(0)),
        })?;
        let p1: usize = Table::parse(path, line, f(1), "p1")?;
        let p2: usize = Table::parse(path, line, f(2), "p2")?;
        let narrow_factor: f64 = Table::parse(path, line, f(3), "narrow_factor")?;
        let narrowed: bool = Table::parse(path, line, f(4), "narrowed")?;
        let record = RepetitionRecord {
            rep: Table::parse(path, line, f(5), "rep")?,
            ci_ratio: Table::parse(path, line, f(6), "ci_ratio")?,
            r2_vmbpbb: Table::parse(path, line, f(7), "r2_vmbpbb")?,
            r2_pbb: Table::parse(path, line, f(8), "r2_pbb")?,
            outside_vmbpbb: Table::parse(path, line, f(9), "outside_vmbpbb")?,
            outside_pbb: Table::parse(path, line, f(10), "outside_pbb")?,
        };
        let key = (f(0).to_string(), p1, p2);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_insert_with(|| (snr, narrow_factor, narrowed, Vec::new())).3.push(record);
    }
    if order.is_empty() {
        return Err(CliError::Parse { path: path.clone(), line: 2, msg: "no repetitions".into() });
    }

    let cells = order
        .into_iter()
        .map(|key| {
            let (snr, narrow_factor, narrowed, records) = groups.remove(&key).expect("key recorded on insert");
            let metrics = ScenarioMetrics::from_records(&records)?;
            Ok(GridCell { p1: key.1, p2: key.2, snr, narrow_factor, narrowed, metrics, records })
        })
        .collect::<CliResult<Vec<_>>>()?;

    create_dir(&a.output_dir)?;
    let mut manifest = RunManifest::new("report", serde_json::Value::Null, None, started);
    manifest.input(path)?;
    for p in write_tables(&a.output_dir, &cells)? {
        manifest.output(&p);
    }
    manifest.write(&a.output_dir.join("manifest.json"))
}
