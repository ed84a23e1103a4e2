//! Writing results as CSV or JSON, and reading them back.
//!
//! CSV files start with `#` comment lines holding the metadata, followed by
//! a header row and one row per grid point. Values carry 9 significant
//! digits, so reading one back is accurate to a relative 5e-9. JSON files
//! hold one document `{"metadata": ..., "tables": [...]}` and round-trip
//! exactly.
//!
//! Everything except the wall-time line is a pure function of the effective
//! spec, so two runs of one spec give byte-identical data sections.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{Column, ExperimentResult, Metadata, OutputFormat, Table};

/// Formats `x` with 9 significant digits in `%g` style: fixed notation for
/// exponents in `-5..9`, scientific otherwise, trailing zeros removed.
pub fn format_sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        trim_zeros(&format!("{x:.*}", (8 - exp) as usize))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

#[derive(Serialize, Deserialize)]
struct JsonMetadata {
    spec_fingerprint: String,
    #[serde(flatten)]
    metadata: Metadata,
}

#[derive(Serialize, Deserialize)]
struct JsonDocument {
    metadata: JsonMetadata,
    tables: Vec<Table>,
}

/// Renders `result` in `format`. Only the first table goes into CSV; every
/// experiment produces exactly one.
pub fn render(result: &ExperimentResult, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Csv => render_csv(result),
        OutputFormat::Json => {
            let doc = JsonDocument {
                metadata: JsonMetadata {
                    spec_fingerprint: result.spec_fingerprint.clone(),
                    metadata: result.metadata.clone(),
                },
                tables: result.tables.clone(),
            };
            let mut text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Domain(e.to_string()))?;
            text.push('\n');
            Ok(text)
        }
    }
}

fn render_csv(result: &ExperimentResult) -> Result<String> {
    let meta = &result.metadata;
    let mut out = String::new();
    let _ = writeln!(out, "# kind: {}", meta.kind.as_str());
    let _ = writeln!(out, "# seed: {}", meta.seed);
    let _ = writeln!(out, "# trials: {}", meta.trials);
    let _ = writeln!(out, "# spec_fingerprint: {}", result.spec_fingerprint);
    let _ = writeln!(out, "# wall_time_s: {:.3}", meta.wall_time_s);
    for (column, n) in &meta.failures {
        let _ = writeln!(out, "# failures.{column}: {n}");
    }
    for (key, value) in &meta.notes {
        let _ = writeln!(out, "# note.{key}: {value}");
    }
    let spec = serde_json::to_string(&meta.effective_spec).map_err(|e| Error::Domain(e.to_string()))?;
    let _ = writeln!(out, "# effective_spec: {spec}");

    let table = result.table();
    let mut writer = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Domain(format!("csv encoding: {e}"));
    writer
        .write_record(table.columns.iter().map(|c| c.name.as_str()))
        .map_err(csv_err)?;
    for row in 0..table.n_rows() {
        writer
            .write_record(table.columns.iter().map(|c| format_sig9(c.values[row])))
            .map_err(csv_err)?;
    }
    let body = writer.into_inner().map_err(|e| Error::Domain(e.to_string()))?;
    out.push_str(&String::from_utf8(body).expect("ascii output"));
    Ok(out)
}

/// Writes `result` to `path` in `format`.
pub fn emit_result(result: &ExperimentResult, format: OutputFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = render(result, format)?;
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// The lines of an emitted file that depend only on the spec: everything
/// but the wall-time comment.
pub fn data_section(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with("# wall_time_s") && !l.trim_start().starts_with("\"wall_time_s\""))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Reads the table of a CSV file written by [`emit_result`].
pub fn read_csv(path: impl AsRef<Path>) -> Result<Table> {
    let path = path.as_ref();
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let text = std::fs::read_to_string(path).map_err(io)?;
    parse_csv(&text).map_err(|message| Error::Config {
        path: path.to_path_buf(),
        message,
    })
}

fn parse_csv(text: &str) -> std::result::Result<Table, String> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    let mut columns: Vec<Column> = headers
        .iter()
        .map(|name| Column {
            name: name.to_string(),
            values: Vec::new(),
        })
        .collect();
    for record in reader.records() {
        let record = record.map_err(|e| e.to_string())?;
        for (column, field) in columns.iter_mut().zip(record.iter()) {
            let v = field
                .parse::<f64>()
                .map_err(|e| format!("column {}: bad number {field:?}: {e}", column.name))?;
            column.values.push(v);
        }
    }
    let kind = text
        .lines()
        .find_map(|l| l.strip_prefix("# kind: "))
        .unwrap_or("table")
        .to_string();
    Ok(Table { name: kind, columns })
}

/// Reads a JSON file written by [`emit_result`].
pub fn read_json(path: impl AsRef<Path>) -> Result<ExperimentResult> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let doc: JsonDocument = serde_json::from_str(&text).map_err(|e| Error::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(ExperimentResult {
        spec_fingerprint: doc.metadata.spec_fingerprint,
        metadata: doc.metadata.metadata,
        tables: doc.tables,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run, ExperimentKind, ExperimentSpec};

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(200.0), "200");
        assert_eq!(format_sig9(0.1), "0.1");
        assert_eq!(format_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig9(-2.0 / 3.0), "-0.666666667");
        assert_eq!(format_sig9(123456789.4), "123456789");
        assert_eq!(format_sig9(1234567891.0), "1.23456789e9");
        assert_eq!(format_sig9(1.5e-7), "1.5e-7");
        assert_eq!(format_sig9(0.00012345678912), "0.000123456789");
        assert_eq!(format_sig9(9.999999999), "10");
        assert_eq!(format_sig9(f64::NAN), "nan");
        assert_eq!(format_sig9(0.0), "0");
    }

    #[test]
    fn sig9_relative_error_bound() {
        for &x in &[std::f64::consts::PI, 1e-12 / 7.0, 6.02214076e23 / 3.0, -0.0123456789123] {
            let back: f64 = format_sig9(x).parse().unwrap();
            assert!(((back - x) / x).abs() <= 5e-9, "{x} -> {back}");
        }
    }

    fn sample() -> ExperimentResult {
        let mut spec = ExperimentSpec::defaults(ExperimentKind::LearningCurve);
        spec.trials = 4;
        spec.system.iterations = 30;
        spec.system.es_grid_step = 0.1;
        run(&spec).unwrap()
    }

    #[test]
    fn csv_layout_and_round_trip() {
        let res = sample();
        let text = render(&res, OutputFormat::Csv).unwrap();
        let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(header, "iteration,msd_mf,msd_zf,msd_mmse");
        assert!(text.lines().next().unwrap().starts_with("# kind: learning_curve"));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        emit_result(&res, OutputFormat::Csv, &path).unwrap();
        let table = read_csv(&path).unwrap();
        assert_eq!(table.n_rows(), 30);
        for (a, b) in res.table().columns.iter().zip(&table.columns) {
            assert_eq!(a.name, b.name);
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() <= 5e-9 * x.abs(), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let res = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        emit_result(&res, OutputFormat::Json, &path).unwrap();
        let back = read_json(&path).unwrap();
        assert_eq!(back, res);
        let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let keys: Vec<_> = doc.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys, ["metadata", "tables"]);
    }

    #[test]
    fn nan_survives_both_formats() {
        let mut res = sample();
        res.tables[0].columns[1].values[0] = f64::NAN;
        let dir = tempfile::tempdir().unwrap();
        let json = dir.path().join("n.json");
        emit_result(&res, OutputFormat::Json, &json).unwrap();
        assert!(read_json(&json).unwrap().tables[0].columns[1].values[0].is_nan());
        let csv = dir.path().join("n.csv");
        emit_result(&res, OutputFormat::Csv, &csv).unwrap();
        assert!(read_csv(&csv).unwrap().columns[1].values[0].is_nan());
    }

    #[test]
    fn data_section_ignores_wall_time() {
        let a = sample();
        let mut b = a.clone();
        b.metadata.wall_time_s += 12.5;
        for format in [OutputFormat::Csv, OutputFormat::Json] {
            let (ra, rb) = (render(&a, format).unwrap(), render(&b, format).unwrap());
            assert_ne!(ra, rb);
            assert_eq!(data_section(&ra), data_section(&rb));
        }
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let res = sample();
        let err = emit_result(&res, OutputFormat::Csv, "/nonexistent-dir/x.csv").unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }
}
