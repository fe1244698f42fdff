use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use vmbpbb::{generate_mpc, ScenarioConfig, SeedSpec, Snr};

fn vmbpbb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vmbpbb")).args(args).env_remove("VMBPBB_THREADS").output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = vmbpbb(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_series(path: &Path, values: &[f64]) {
    let mut s = String::from("t,value\n");
    for (t, v) in values.iter().enumerate() {
        s.push_str(&format!("{t},{v:.16e}\n"));
    }
    fs::write(path, s).unwrap();
}

fn two_sines(n: usize) -> Vec<f64> {
    (0..n).map(|t| (2.0 * PI * t as f64 / 50.0).sin() + (2.0 * PI * t as f64 / 100.0).sin()).collect()
}

/// Noisy (50,100) series at SNR 1:10.
fn noisy_series(seed: u64) -> Vec<f64> {
    let cfg = ScenarioConfig::desk(50, 100, Snr::new(1.0, 10.0), seed);
    let (s, _) = generate_mpc(&cfg, &mut SeedSpec::new(seed).rng()).unwrap();
    s.into_values()
}

/// Column `name` of a CSV file; blank cells become `None`.
fn column(path: &Path, name: &str) -> Vec<Option<f64>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let idx = rdr.headers().unwrap().iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            let f = &r[idx];
            if f.is_empty() {
                None
            } else {
                Some(f.parse().unwrap())
            }
        })
        .collect()
}

fn values(path: &Path, name: &str) -> Vec<f64> {
    column(path, name).into_iter().map(|v| v.unwrap()).collect()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        Self { dir: TempDir::new().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

#[test]
fn filter_separates_two_sines() {
    let fx = Fixture::new();
    let input = fx.path("in.csv");
    let output = fx.path("components.csv");
    let x = two_sines(1000);
    write_series(&input, &x);
    ok(&["filter", "-i", p(&input), "--periods", "50,100", "-o", p(&output)]);

    for (name, period) in [("component_50", 50.0), ("component_100", 100.0)] {
        let c = values(&output, name);
        assert_eq!(c.len(), 1000);
        let err: f64 = (100..900).map(|t| (c[t] - (2.0 * PI * t as f64 / period).sin()).powi(2)).sum::<f64>() / 800.0;
        assert!(err.sqrt() < 0.05, "{name}: rms {}", err.sqrt());
    }
    let t = values(&output, "t");
    assert_eq!(t[0], 0.0);
    assert_eq!(t[999], 999.0);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fx.path("components.manifest.json")).unwrap()).unwrap();
    let digest = manifest["inputs"][0]["sha256"].as_str().unwrap();
    assert_eq!(digest.len(), 64);
    assert_eq!(manifest["config"]["specs"][0]["m"], 201);
}

#[test]
fn explicit_spec_matches_automatic_choice() {
    let fx = Fixture::new();
    let input = fx.path("in.csv");
    write_series(&input, &two_sines(600));
    let auto = fx.path("auto.csv");
    let manual = fx.path("manual.csv");
    ok(&["filter", "-i", p(&input), "--periods", "50,100", "-o", p(&auto)]);
    ok(&["filter", "-i", p(&input), "--spec", "m=201,k=1,nu=0.02", "-o", p(&manual)]);
    assert_eq!(values(&auto, "component_50"), values(&manual, "component_1"));
}

#[test]
fn truncated_filter_leaves_edges_blank() {
    let fx = Fixture::new();
    let input = fx.path("in.csv");
    write_series(&input, &two_sines(300));
    let out = fx.path("c.csv");
    ok(&["filter", "-i", p(&input), "--spec", "m=21,k=1,nu=0.02", "--edge", "truncate", "-o", p(&out)]);
    let c = column(&out, "component_1");
    assert_eq!(c.len(), 300);
    assert!(c[..10].iter().all(Option::is_none));
    assert!(c[10..290].iter().all(Option::is_some));
    assert!(c[290..].iter().all(Option::is_none));
}

#[test]
fn output_numbers_round_trip() {
    let fx = Fixture::new();
    let input = fx.path("in.csv");
    let x: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin() / 3.0 + 1e-9 * i as f64).collect();
    write_series(&input, &x);
    let out = fx.path("id.csv");
    // m = 1 at nu = 0 passes the series through; the real-part doubling is exact.
    ok(&["filter", "-i", p(&input), "--spec", "m=1,k=1,nu=0", "-o", p(&out)]);
    let y = values(&out, "component_1");
    for (a, b) in x.iter().zip(&y) {
        assert_eq!((2.0 * a).to_bits(), b.to_bits());
    }
}

#[test]
fn malformed_input_reports_line_and_category() {
    let fx = Fixture::new();
    let cases = [
        ("empty.csv", "", "1"),
        ("header.csv", "time,value\n0,1\n", "1"),
        ("number.csv", "t,value\n0,1.0\n1,abc\n2,3\n", "3"),
        ("gap.csv", "t,value\n0,1\n1,2\n3,4\n", "4"),
        ("nan.csv", "t,value\n0,1\n1,NaN\n", "3"),
        ("short.csv", "t,value\n0,1\n1\n", "3"),
    ];
    for (name, body, line) in cases {
        let input = fx.path(name);
        fs::write(&input, body).unwrap();
        let out = vmbpbb(&["filter", "-i", p(&input), "--periods", "2", "-o", p(&fx.path("o.csv"))]);
        assert_eq!(out.status.code(), Some(3), "{name}: {}", stderr(&out));
        let msg = stderr(&out);
        assert!(msg.starts_with("error[data]"), "{name}: {msg}");
        assert!(msg.contains(&format!("{name}:{line}:")), "{name}: {msg}");
    }
}

#[test]
fn period_longer_than_series_is_rejected() {
    let fx = Fixture::new();
    let input = fx.path("in.csv");
    write_series(&input, &two_sines(40));
    let out = vmbpbb(&["filter", "-i", p(&input), "--periods", "50", "-o", p(&fx.path("o.csv"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("period 50"), "{}", stderr(&out));
}

#[test]
fn missing_input_is_an_io_error() {
    let fx = Fixture::new();
    let out = vmbpbb(&["filter", "-i", p(&fx.path("nope.csv")), "--periods", "5", "-o", p(&fx.path("o.csv"))]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).starts_with("error[io]"));
}

#[test]
fn run_is_reproducible_across_invocations_and_threads() {
    let fx = Fixture::new();
    let input = fx.path("in.csv");
    write_series(&input, &noisy_series(3));
    let a = fx.path("a");
    let b = fx.path("b");
    ok(&["run", "-i", p(&input), "--periods", "50,100", "-B", "100", "--seed", "9", "-o", p(&a), "--threads", "1"]);
    ok(&["run", "-i", p(&input), "--periods", "100,50", "-B", "100", "--seed", "9", "-o", p(&b), "--threads", "4"]);
    for f in ["aggregate.csv", "component_50.csv", "component_100.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let header = fs::read_to_string(a.join("aggregate.csv")).unwrap();
    assert!(header.starts_with("t,lower,point,upper\n"));

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 9);
    assert_eq!(manifest["config"]["resamples"], 100);
    assert_eq!(manifest["threads"], 1);
}

#[test]
fn thread_count_from_environment() {
    let fx = Fixture::new();
    let input = fx.path("in.csv");
    write_series(&input, &noisy_series(4));
    let a = fx.path("a");
    let b = fx.path("b");
    ok(&["run", "-i", p(&input), "--periods", "50,100", "-B", "50", "--seed", "1", "-o", p(&a)]);
    let out = Command::new(env!("CARGO_BIN_EXE_vmbpbb"))
        .args(["run", "-i", p(&input), "--periods", "50,100", "-B", "50", "--seed", "1", "-o", p(&b)])
        .env("VMBPBB_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["threads"], 2);
    assert_eq!(fs::read(a.join("aggregate.csv")).unwrap(), fs::read(b.join("aggregate.csv")).unwrap());
}

fn widths(dir: &Path) -> Vec<f64> {
    let f = dir.join("aggregate.csv");
    values(&f, "upper").iter().zip(values(&f, "lower")).map(|(u, l)| u - l).collect()
}

#[test]
fn pbb_band_is_much_wider_than_vmbpbb() {
    let fx = Fixture::new();
    let input = fx.path("in.csv");
    write_series(&input, &noisy_series(11));
    let vm = fx.path("vm");
    let pbb = fx.path("pbb");
    let common = ["--periods", "50,100", "-B", "200", "--seed", "5"];
    let mut args = vec!["run", "-i", p(&input), "-o", p(&vm), "--mode", "vmbpbb"];
    args.extend(common);
    ok(&args);
    let mut args = vec!["run", "-i", p(&input), "-o", p(&pbb), "--mode", "pbb"];
    args.extend(common);
    ok(&args);

    let mut ratios: Vec<f64> = widths(&pbb).iter().zip(widths(&vm)).map(|(a, b)| a / b).collect();
    ratios.sort_by(f64::total_cmp);
    let median = ratios[ratios.len() / 2];
    assert!(median > 2.0, "median width ratio {median}");
}

#[test]
fn larger_alpha_gives_narrower_bands() {
    let fx = Fixture::new();
    let input = fx.path("in.csv");
    write_series(&input, &noisy_series(12));
    let wide = fx.path("w");
    let narrow = fx.path("n");
    ok(&["run", "-i", p(&input), "--periods", "50,100", "-B", "200", "--seed", "2", "-o", p(&wide)]);
    ok(&[
        "run",
        "-i",
        p(&input),
        "--periods",
        "50,100",
        "-B",
        "200",
        "--seed",
        "2",
        "--alpha",
        "0.5",
        "-o",
        p(&narrow),
    ]);
    for (a, b) in widths(&narrow).iter().zip(widths(&wide)) {
        assert!(*a < b, "{a} !< {b}");
    }
}

#[test]
fn run_config_file_and_flag_precedence() {
    let fx = Fixture::new();
    let input = fx.path("in.csv");
    write_series(&input, &noisy_series(13));
    let cfg = fx.path("run.json");
    fs::write(&cfg, r#"{"periods": [50, 100], "resamples": 40, "seed": 77, "mode": "pbb"}"#).unwrap();
    let out = fx.path("o");
    ok(&["run", "-i", p(&input), "--config", p(&cfg), "-B", "30", "-o", p(&out)]);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["resamples"], 30);
    assert_eq!(manifest["config"]["mode"], "pbb");
    assert_eq!(manifest["master_seed"], 77);

    fs::write(&cfg, r#"{"periods": [50, 100], "bogus": 1}"#).unwrap();
    let bad = vmbpbb(&["run", "-i", p(&input), "--config", p(&cfg), "--seed", "1", "-o", p(&out)]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).starts_with("error[config]"));
}

#[test]
fn run_config_errors_use_config_exit_code() {
    let fx = Fixture::new();
    let input = fx.path("in.csv");
    write_series(&input, &two_sines(200));
    let o = p(&fx.path("o")).to_string();
    for args in [
        vec!["--periods", "50,100"],
        vec!["--periods", "50,50", "--seed", "1"],
        vec!["--periods", "50", "--seed", "1", "-B", "1"],
        vec!["--periods", "50", "--seed", "1", "--alpha", "1.5"],
    ] {
        let mut full = vec!["run", "-i", p(&input), "-o", &o];
        full.extend(args.iter());
        let out = vmbpbb(&full);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", stderr(&out));
        assert!(stderr(&out).starts_with("error[config]"));
    }
}

const SMALL_GRID: &str = r#"{
    "periods": [25, 10, 50],
    "snrs": ["1:5", "1:10"],
    "n": 300,
    "resamples": 20,
    "reps": 3,
    "seed": 123
}"#;

fn table_rows(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let mut rows = vec![rdr.headers().unwrap().iter().map(String::from).collect()];
    rows.extend(rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()));
    rows
}

#[test]
fn simulate_writes_tables_and_report_rebuilds_them() {
    let fx = Fixture::new();
    let cfg = fx.path("grid.json");
    fs::write(&cfg, SMALL_GRID).unwrap();
    let sim = fx.path("sim");
    ok(&["simulate", "--config", p(&cfg), "--paper-faithful", "-o", p(&sim)]);

    let t1 = table_rows(&sim.join("table1.csv"));
    assert_eq!(t1[0], ["snr", "period", "10", "25", "50", "narrowed"]);
    assert_eq!(t1.len(), 1 + 2 * 3);
    for block in t1[1..].chunks(3) {
        let populated = block.iter().flat_map(|r| &r[2..5]).filter(|c| !c.is_empty()).count();
        assert_eq!(populated, 3);
        for (i, row) in block.iter().enumerate() {
            assert!(row[2 + i].is_empty(), "diagonal must be blank");
        }
    }
    // Only the (10,25) cell at 1:5 is narrowed.
    assert_eq!(t1[1][5], "*25");
    assert!(t1[2..].iter().all(|r| r[5].is_empty()));

    let reps = table_rows(&sim.join("repetitions.csv"));
    assert_eq!(reps.len(), 1 + 2 * 3 * 3);
    let cov = table_rows(&sim.join("coverage.csv"));
    assert_eq!(cov.len(), 1 + 6);

    let rep = fx.path("rep");
    ok(&["report", "-i", p(&sim.join("repetitions.csv")), "-o", p(&rep)]);
    for f in ["table1.csv", "table2.csv", "coverage.csv"] {
        assert_eq!(fs::read(sim.join(f)).unwrap(), fs::read(rep.join(f)).unwrap(), "{f}");
    }

    let again = fx.path("again");
    ok(&["simulate", "--config", p(&cfg), "--paper-faithful", "-o", p(&again), "--threads", "1"]);
    assert_eq!(fs::read(sim.join("repetitions.csv")).unwrap(), fs::read(again.join("repetitions.csv")).unwrap());
}

#[test]
fn simulate_rejects_duplicate_periods() {
    let fx = Fixture::new();
    let cfg = fx.path("grid.json");
    fs::write(&cfg, r#"{"periods": [10, 25, 10], "seed": 1, "reps": 1, "resamples": 2}"#).unwrap();
    let out = vmbpbb(&["simulate", "--config", p(&cfg), "-o", p(&fx.path("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error[config]"));
}

#[test]
fn simulate_requires_a_seed() {
    let fx = Fixture::new();
    let out = vmbpbb(&["simulate", "-o", p(&fx.path("o"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn paper_scale_warns_and_proceeds() {
    let fx = Fixture::new();
    let cfg = fx.path("grid.json");
    fs::write(&cfg, r#"{"periods": [10, 25], "snrs": ["1:2"], "n": 100, "seed": 1}"#).unwrap();
    let sim = fx.path("sim");
    let out = ok(&["simulate", "--config", p(&cfg), "--scale", "paper", "--reps", "2", "-B", "10", "-o", p(&sim)]);
    assert!(stderr(&out).contains("warning: paper scale"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(sim.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["scale"], "paper");
    assert_eq!(manifest["config"]["reps"], 2);
}

#[test]
fn transfer_curves() {
    let fx = Fixture::new();
    let out = fx.path("t.csv");

    ok(&["transfer", "--m", "5", "--k", "1,2,3,4,5", "--lambda", "0.2", "-o", p(&out)]);
    let e = values(&out, "energy");
    assert_eq!(e.len(), 5);
    assert!(e.iter().all(|&v| v < 1e-12), "{e:?}");

    ok(&["transfer", "--m", "5,11,21,41,81", "--points", "2001", "-o", p(&out)]);
    let (m, l, e) = (values(&out, "m"), values(&out, "lambda"), values(&out, "energy"));
    for mm in [5.0, 11.0, 21.0, 41.0, 81.0] {
        let idx: Vec<usize> = (0..m.len()).filter(|&i| m[i] == mm).collect();
        let first_min = idx.windows(3).find(|w| e[w[1]] <= e[w[0]] && e[w[1]] <= e[w[2]]).unwrap()[1];
        assert!((l[first_min] - 1.0 / mm).abs() <= 2.5e-4, "m={mm}: {}", l[first_min]);
        assert!(e[first_min] < 1e-4);
    }

    ok(&[
        "transfer",
        "--spec",
        "m=201,k=1,nu=0.02",
        "--spec",
        "m=201,k=1,nu=0.01",
        "--lambda",
        "0.01,0.02",
        "-o",
        p(&out),
    ]);
    let (nu, l, e) = (values(&out, "nu"), values(&out, "lambda"), values(&out, "energy"));
    for i in 0..nu.len() {
        if nu[i] != l[i] {
            assert!(e[i] < 0.05, "nu {} at {}: {}", nu[i], l[i], e[i]);
        }
    }
    assert!(fx.path("t.manifest.json").exists());
}

#[test]
fn invalid_spec_is_a_usage_error() {
    let fx = Fixture::new();
    let out = vmbpbb(&["transfer", "--spec", "m=4,k=1,nu=0", "-o", p(&fx.path("t.csv"))]);
    assert_eq!(out.status.code(), Some(2));
}
