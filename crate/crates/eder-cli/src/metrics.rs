//! Metrics file I/O.
//!
//! One CSV row per (seed, evaluation step), floats at six decimal places,
//! rows grouped by seed in config order. The writing path is fully
//! deterministic: identical records produce identical bytes regardless of
//! how many threads produced them.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use eder_core::experiment::MetricsRecord;

/// Exact metrics CSV header.
pub const METRICS_HEADER: &str = "seed,step,success_rate,mean_return,buffer_fill,mean_segment_diversity,acceptance_rate,wall_ms_scoring,wall_ms_sampling";

/// Renders records to CSV text (header + one row per record).
pub fn render_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{},{:.6},{:.6},{:.6},{:.6}",
            r.seed,
            r.step,
            r.success_rate,
            r.mean_return,
            r.buffer_fill,
            r.mean_segment_diversity,
            r.acceptance_rate,
            r.wall_ms_scoring,
            r.wall_ms_sampling,
        )
        .expect("writing to a String cannot fail");
    }
    out
}

pub fn write_csv(path: &Path, records: &[MetricsRecord]) -> io::Result<()> {
    fs::write(path, render_csv(records))
}

/// JSON mirror of the same records.
pub fn write_json(path: &Path, records: &[MetricsRecord]) -> io::Result<()> {
    let text = serde_json::to_string_pretty(records).expect("records serialize");
    fs::write(path, text + "\n")
}

/// A parsed metrics row (numbers as written, at CSV precision).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub seed: u64,
    pub step: u64,
    pub success_rate: f64,
    pub mean_return: f64,
    pub buffer_fill: u64,
    pub mean_segment_diversity: f64,
    pub acceptance_rate: f64,
    pub wall_ms_scoring: f64,
    pub wall_ms_sampling: f64,
}

/// Parses a metrics CSV produced by [`write_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<MetricsRow>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == METRICS_HEADER => {}
        other => return Err(format!("unexpected metrics header: {other:?}")),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 9 {
                return Err(format!(
                    "row {}: expected 9 fields, got {}",
                    i + 2,
                    fields.len()
                ));
            }
            let parse_u = |s: &str| s.parse::<u64>().map_err(|e| format!("row {}: {e}", i + 2));
            let parse_f = |s: &str| s.parse::<f64>().map_err(|e| format!("row {}: {e}", i + 2));
            Ok(MetricsRow {
                seed: parse_u(fields[0])?,
                step: parse_u(fields[1])?,
                success_rate: parse_f(fields[2])?,
                mean_return: parse_f(fields[3])?,
                buffer_fill: parse_u(fields[4])?,
                mean_segment_diversity: parse_f(fields[5])?,
                acceptance_rate: parse_f(fields[6])?,
                wall_ms_scoring: parse_f(fields[7])?,
                wall_ms_sampling: parse_f(fields[8])?,
            })
        })
        .collect()
}

pub fn read_csv(path: &Path) -> Result<Vec<MetricsRow>, String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(seed: u64, step: u64) -> MetricsRecord {
        MetricsRecord {
            seed,
            step,
            success_rate: 0.8,
            mean_return: 0.8,
            buffer_fill: 123,
            mean_segment_diversity: 0.456789123,
            acceptance_rate: 0.75,
            wall_ms_scoring: 0.0,
            wall_ms_sampling: 0.0,
        }
    }

    #[test]
    fn header_is_bit_exact() {
        let text = render_csv(&[]);
        assert_eq!(text, format!("{METRICS_HEADER}\n"));
    }

    #[test]
    fn rows_round_trip_at_csv_precision() {
        let text = render_csv(&[record(0, 100), record(1, 100)]);
        let rows = parse_csv(&text).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].seed, 0);
        assert_eq!(rows[0].buffer_fill, 123);
        assert!((rows[0].mean_segment_diversity - 0.456789).abs() < 1e-9);
    }

    #[test]
    fn parse_rejects_foreign_header() {
        assert!(parse_csv("a,b,c\n").is_err());
    }
}
