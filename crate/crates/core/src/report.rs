//! Report documents and their canonical serializations.
//!
//! JSON output has sorted keys, two-space indentation and every float
//! printed with 9 significant digits, so identical inputs give identical
//! bytes. CSV is a flat projection with one row per (artist, space,
//! condition).

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::protocol::{AggregateReport, ConditionMetrics, EvalConfig};

pub const REPORT_SCHEMA: &str = "namegap-report/1";

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub cov_divisor: String,
    /// Embeddings enter the Gaussian fits without L2 normalization.
    pub fad_normalization: &'static str,
    pub pooling: crate::protocol::Pooling,
    pub spaces: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BarRow {
    pub artist: String,
    pub space: String,
    pub condition: String,
    pub value: f64,
    /// Spread across descriptor sets, present on the aggregated styled row.
    pub std: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MatrixPanel {
    pub space: String,
    /// Row labels: artist whose references were used.
    pub targets: Vec<String>,
    /// Column labels: artist whose descriptors were used.
    pub sources: Vec<String>,
    pub delta: Vec<Vec<f64>>,
}

/// Figure-ready tables: FAD bars, median min-distance bars and Δ matrices,
/// one entry per artist and space.
#[derive(Debug, Clone, Serialize)]
pub struct Panels {
    pub fad: Vec<BarRow>,
    pub min_distance: Vec<BarRow>,
    pub cross_artist: Vec<MatrixPanel>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument {
    pub schema: &'static str,
    pub tool_version: &'static str,
    pub config: ConfigEcho,
    pub report: AggregateReport,
    pub panels: Panels,
}

impl ReportDocument {
    pub fn new(report: AggregateReport, config: EvalConfig, spaces: Vec<String>) -> Self {
        let panels = panels(&report);
        Self {
            schema: REPORT_SCHEMA,
            tool_version: env!("CARGO_PKG_VERSION"),
            config: ConfigEcho {
                cov_divisor: config.cov_divisor.to_string(),
                fad_normalization: "none",
                pooling: config.pooling,
                spaces,
            },
            report,
            panels,
        }
    }

    pub fn to_canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        let mut out = String::new();
        write_value(&mut out, &value, 0);
        out.push('\n');
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["artist", "space", "condition", "n_clips", "fad", "dmin_median", "centroid_sim_mean"])
            .expect("in-memory write");
        for cell in &self.report.cells {
            let rows = [&cell.baseline, &cell.artist_name].into_iter().chain(&cell.styled).chain(&cell.cross_styled);
            for m in rows {
                w.write_record(csv_row(&cell.artist, &cell.space, m)).expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

fn csv_row(artist: &str, space: &str, m: &ConditionMetrics) -> [String; 7] {
    [
        artist.to_owned(),
        space.to_owned(),
        m.condition.to_string(),
        m.n_clips.to_string(),
        format_sig9(m.fad),
        format_sig9(m.dmin_median),
        format_sig9(m.centroid_sim_mean),
    ]
}

fn panels(report: &AggregateReport) -> Panels {
    let mut fad = Vec::new();
    let mut min_distance = Vec::new();
    for cell in &report.cells {
        let bar = |condition: String, value: f64, std: Option<f64>| BarRow {
            artist: cell.artist.clone(),
            space: cell.space.clone(),
            condition,
            value,
            std,
        };
        for m in [&cell.baseline, &cell.artist_name].into_iter().chain(&cell.styled) {
            fad.push(bar(m.condition.to_string(), m.fad, None));
            min_distance.push(bar(m.condition.to_string(), m.dmin_median, None));
        }
        fad.push(bar("styled_mean".into(), cell.fad_summary.styled_fad_mean, Some(cell.fad_summary.styled_fad_std)));
        min_distance.push(bar("styled_pooled".into(), cell.styled_dmin_median_pooled, None));
    }
    let cross_artist = report
        .cross_artist
        .iter()
        .map(|m| MatrixPanel {
            space: m.space.clone(),
            targets: m.artists.clone(),
            sources: m.artists.clone(),
            delta: m.entries.iter().map(|row| row.iter().map(|e| e.delta.delta).collect()).collect(),
        })
        .collect();
    Panels { fad, min_distance, cross_artist }
}

/// Fixed 9-significant-digit rendering. Magnitudes in `[1e-5, 1e15)` are
/// positional, others use an exponent; both are valid JSON numbers.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0.00000000".to_owned();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = mantissa.strip_prefix('-').map_or(("", mantissa), |m| ("-", m));
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    if !(-5..15).contains(&exp) {
        return format!("{sign}{mantissa}e{exp}");
    }
    if exp < 0 {
        return format!("{sign}0.{}{digits}", "0".repeat((-exp - 1) as usize));
    }
    let split = exp as usize + 1;
    if split >= digits.len() {
        format!("{sign}{digits}{}.0", "0".repeat(split - digits.len()))
    } else {
        format!("{sign}{}.{}", &digits[..split], &digits[split..])
    }
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn write_value(out: &mut String, v: &Value, level: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_u64(), n.as_i64(), n.as_f64()) {
            (Some(u), _, _) if !n.is_f64() => write!(out, "{u}").expect("string write"),
            (_, Some(i), _) if !n.is_f64() => write!(out, "{i}").expect("string write"),
            (_, _, Some(f)) => out.push_str(&format_sig9(f)),
            _ => out.push_str("null"),
        },
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                indent(out, level + 1);
                write_value(out, item, level + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            indent(out, level);
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                indent(out, level + 1);
                out.push_str(&serde_json::to_string(k).expect("key serializes"));
                out.push_str(": ");
                write_value(out, &map[k.as_str()], level + 1);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            indent(out, level);
            out.push('}');
        }
    }
}

/// Writes `contents` to a temporary file beside `path` and renames it into
/// place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(3.0), "3.00000000");
        assert_eq!(format_sig9(2.5f64.sqrt()), "1.58113883");
        assert_eq!(format_sig9(-0.15), "-0.150000000");
        assert_eq!(format_sig9(0.0), "0.00000000");
        assert_eq!(format_sig9(-0.0), "0.00000000");
        assert_eq!(format_sig9(123456.789), "123456.789");
        assert_eq!(format_sig9(1234567890.0), "1234567890.0");
        assert_eq!(format_sig9(1e-7), "1.00000000e-7");
        assert_eq!(format_sig9(2.5e20), "2.50000000e20");
        assert_eq!(format_sig9(0.000012345), "0.0000123450000");
    }

    #[test]
    fn formatted_values_parse_back_within_precision() {
        for &x in &[1.0 / 3.0, -7.25e-3, 9.999999999, 1e-300, 6.02e23] {
            let back: f64 = format_sig9(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 1e-8, "{x} -> {back}");
        }
    }

    #[test]
    fn canonical_writer_sorts_keys() {
        let mut out = String::new();
        write_value(&mut out, &json!({"b": [1, 2.5], "a": {"z": null, "y": "q\"s"}, "c": []}), 0);
        assert_eq!(
            out,
            "{\n  \"a\": {\n    \"y\": \"q\\\"s\",\n    \"z\": null\n  },\n  \"b\": [\n    1,\n    2.50000000\n  ],\n  \"c\": []\n}"
        );
        let parsed: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(parsed["b"][1], json!(2.5));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
