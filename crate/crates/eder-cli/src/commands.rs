//! Subcommand implementations shared by the binary and the test suites.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use eder_core::bench::{bench_determinant, DetBenchRow};
use eder_core::experiment::{run_seed, MetricsRecord};

use crate::config::ExperimentConfig;
use crate::metrics;

/// Failure classes mapped onto process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration or arguments; exit code 1. Each string is one
    /// violation.
    Validation(Vec<String>),
    /// I/O or execution failure; exit code 2.
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(errors) => {
                writeln!(f, "configuration is invalid:")?;
                for e in errors {
                    writeln!(f, "  - {e}")?;
                }
                Ok(())
            }
            CliError::Runtime(message) => write!(f, "{message}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

fn load_validated(config_path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", config_path.display())))?;
    let config =
        ExperimentConfig::parse(&text, config_path).map_err(|e| CliError::Validation(vec![e]))?;
    let validation = config.validate();
    for w in &validation.warnings {
        eprintln!("warning: {w}");
    }
    if !validation.errors.is_empty() {
        return Err(CliError::Validation(validation.errors));
    }
    Ok(config)
}

/// Executes every seed of a validated config in parallel and returns the
/// records grouped by seed in config order.
pub fn execute(config: &ExperimentConfig) -> Result<Vec<MetricsRecord>, CliError> {
    let params = config.to_params();
    let seeds = config.run.seeds.clone();
    let results: Vec<Result<Vec<MetricsRecord>, String>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let params = &params;
                scope.spawn(move || run_seed(params, seed).map_err(|e| e.to_string()))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("seed thread does not panic"))
            .collect()
    });
    let mut records = Vec::new();
    for result in results {
        records.extend(result.map_err(CliError::Runtime)?);
    }
    Ok(records)
}

fn ensure_output_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

fn write_metrics(path: &Path, records: &[MetricsRecord]) -> Result<(), CliError> {
    metrics::write_csv(path, records)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// `run <config>`: executes all seeds and writes `metrics.csv` (plus
/// `metrics.json` when asked) into the config's output directory.
pub fn cmd_run(config_path: &Path, json: bool) -> Result<PathBuf, CliError> {
    let config = load_validated(config_path)?;
    let records = execute(&config)?;
    ensure_output_dir(&config.run.output_dir)?;
    let csv_path = config.run.output_dir.join("metrics.csv");
    write_metrics(&csv_path, &records)?;
    if json {
        let json_path = config.run.output_dir.join("metrics.json");
        metrics::write_json(&json_path, &records)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", json_path.display())))?;
    }
    println!("wrote {} ({} rows)", csv_path.display(), records.len());
    Ok(csv_path)
}

/// Sweepable configuration axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    SegmentLength,
    TopM,
    RejectionSampling,
    Cholesky,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::SegmentLength => "b",
            SweepAxis::TopM => "m",
            SweepAxis::RejectionSampling => "rejection_sampling",
            SweepAxis::Cholesky => "cholesky",
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum AxisValue {
    Count(usize),
    Flag(bool),
}

impl AxisValue {
    fn label(self) -> String {
        match self {
            AxisValue::Count(n) => n.to_string(),
            AxisValue::Flag(true) => "on".to_string(),
            AxisValue::Flag(false) => "off".to_string(),
        }
    }
}

fn parse_axis_values(axis: SweepAxis, raw: &[String]) -> Result<Vec<AxisValue>, CliError> {
    if raw.is_empty() {
        return Err(CliError::Validation(vec![
            "sweep needs at least one --values entry".to_string(),
        ]));
    }
    let mut errors = Vec::new();
    let mut values = Vec::new();
    for v in raw {
        match axis {
            SweepAxis::SegmentLength | SweepAxis::TopM => match v.parse::<usize>() {
                Ok(n) if n >= 1 => values.push(AxisValue::Count(n)),
                _ => errors.push(format!(
                    "axis {} takes positive integers, got {v:?}",
                    axis.name()
                )),
            },
            SweepAxis::RejectionSampling | SweepAxis::Cholesky => {
                match v.to_ascii_lowercase().as_str() {
                    "on" | "true" => values.push(AxisValue::Flag(true)),
                    "off" | "false" => values.push(AxisValue::Flag(false)),
                    _ => errors.push(format!("axis {} takes on/off, got {v:?}", axis.name())),
                }
            }
        }
    }
    if errors.is_empty() {
        Ok(values)
    } else {
        Err(CliError::Validation(errors))
    }
}

fn apply_axis(config: &mut ExperimentConfig, axis: SweepAxis, value: AxisValue) {
    match (axis, value) {
        (SweepAxis::SegmentLength, AxisValue::Count(n)) => config.diversity.segment_length = n,
        (SweepAxis::TopM, AxisValue::Count(n)) => {
            config.sampler.top_m = crate::config::TopMField::Count(n as u64)
        }
        (SweepAxis::RejectionSampling, AxisValue::Flag(flag)) => {
            config.diversity.use_rejection_sampling = flag
        }
        (SweepAxis::Cholesky, AxisValue::Flag(flag)) => config.diversity.use_cholesky = flag,
        _ => unreachable!("axis values are parsed per axis"),
    }
}

/// One row of the sweep summary.
#[derive(Debug, Clone)]
pub struct SweepSummaryRow {
    pub value: String,
    /// Mean over seeds of the final evaluation success rate.
    pub final_success_rate: f64,
    /// Mean over seeds of the final cumulative acceptance rate.
    pub mean_acceptance_rate: f64,
    /// Wall time for the whole value (all seeds), milliseconds.
    pub total_wall_ms: f64,
}

/// Final-evaluation aggregates of a record set, grouped by seed.
pub fn final_aggregates(records: &[MetricsRecord]) -> (f64, f64) {
    let mut last_by_seed: std::collections::BTreeMap<u64, &MetricsRecord> =
        std::collections::BTreeMap::new();
    for r in records {
        let entry = last_by_seed.entry(r.seed).or_insert(r);
        if r.step >= entry.step {
            *entry = r;
        }
    }
    let n = last_by_seed.len() as f64;
    let success: f64 = last_by_seed.values().map(|r| r.success_rate).sum();
    let acceptance: f64 = last_by_seed.values().map(|r| r.acceptance_rate).sum();
    (success / n, acceptance / n)
}

/// `sweep <config> --axis <name> --values <list>`: runs the config once per
/// axis value (all seeds each), writing one metrics file per value and an
/// aggregate summary CSV.
pub fn cmd_sweep(
    config_path: &Path,
    axis: SweepAxis,
    raw_values: &[String],
) -> Result<PathBuf, CliError> {
    let base = load_validated(config_path)?;
    let values = parse_axis_values(axis, raw_values)?;
    ensure_output_dir(&base.run.output_dir)?;

    let mut summary = Vec::with_capacity(values.len());
    for value in values {
        let mut config = base.clone();
        apply_axis(&mut config, axis, value);
        let validation = config.validate();
        if !validation.errors.is_empty() {
            return Err(CliError::Validation(validation.errors));
        }
        let started = Instant::now();
        let records = execute(&config)?;
        let total_wall_ms = started.elapsed().as_secs_f64() * 1e3;
        let label = value.label();
        let path = config
            .run
            .output_dir
            .join(format!("sweep_{}_{}.csv", axis.name(), label));
        write_metrics(&path, &records)?;
        let (final_success_rate, mean_acceptance_rate) = final_aggregates(&records);
        summary.push(SweepSummaryRow {
            value: label,
            final_success_rate,
            mean_acceptance_rate,
            total_wall_ms,
        });
        println!("wrote {}", path.display());
    }

    let summary_path = base
        .run
        .output_dir
        .join(format!("sweep_{}_summary.csv", axis.name()));
    let mut text = String::from("value,final_success_rate,mean_acceptance_rate,total_wall_ms\n");
    for row in &summary {
        text.push_str(&format!(
            "{},{:.6},{:.6},{:.3}\n",
            row.value, row.final_success_rate, row.mean_acceptance_rate, row.total_wall_ms
        ));
    }
    std::fs::write(&summary_path, text)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", summary_path.display())))?;
    println!("wrote {}", summary_path.display());
    Ok(summary_path)
}

/// `bench-det`: times both determinant backends and prints one row per
/// matrix order.
pub fn cmd_bench_det(
    orders: &[usize],
    trials: usize,
    dim: usize,
) -> Result<Vec<DetBenchRow>, CliError> {
    let mut errors = Vec::new();
    if orders.is_empty() {
        errors.push("bench-det needs at least one --b value".to_string());
    }
    if trials < 100 {
        errors.push(format!("--trials must be >= 100, got {trials}"));
    }
    for &b in orders {
        if b == 0 {
            errors.push("--b values must be >= 1".to_string());
        } else if b > dim {
            errors.push(format!("--b {b} exceeds --dim {dim}"));
        }
    }
    if !errors.is_empty() {
        return Err(CliError::Validation(errors));
    }
    let rows = bench_determinant(orders, trials, dim, 0);
    println!(
        "{:>4}  {:>14}  {:>14}  {:>8}  {:>16}",
        "b", "cholesky ns", "lu ns", "ratio", "max disagreement"
    );
    for row in &rows {
        println!(
            "{:>4}  {:>14.1}  {:>14.1}  {:>8.3}  {:>16.3e}",
            row.order, row.cholesky_ns, row.lu_ns, row.ratio, row.max_disagreement
        );
    }
    Ok(rows)
}

/// `validate <config>`: prints either the filled config or every violation.
pub fn cmd_validate(config_path: &Path) -> Result<(), CliError> {
    let config = load_validated(config_path)?;
    println!("ok: effective configuration\n");
    print!("{}", config.to_toml());
    Ok(())
}
