//! CSV and JSON writers with a fixed column order and 6 significant digits.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{SegmentRecord, SessionReport};

use super::metrics::{summarize, MetricsSummary};

pub const SCHEMA_VERSION: u32 = 1;

pub const SUMMARY_HEADER: [&str; 11] = [
    "mode",
    "loss",
    "strategy",
    "abr",
    "quality",
    "rebuffer_s",
    "rebuffer_pct",
    "overhead_pct",
    "avg_bitrate_bps",
    "decision_us_mean",
    "decision_us_p99",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl Format {
    /// `.csv` selects CSV, anything else JSON.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Json,
        }
    }
}

/// Rounds to 6 significant digits.
pub fn round_sig(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.5e}").parse().expect("formatted float parses")
}

pub fn format_sig(v: f64) -> String {
    format!("{}", round_sig(v))
}

/// One aggregated table row keyed by (mode, loss, strategy, abr).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub mode: String,
    pub loss: String,
    pub strategy: String,
    pub abr: String,
    #[serde(flatten)]
    pub metrics: MetricsSummary,
}

impl SummaryRow {
    pub fn from_report(report: &SessionReport) -> Self {
        SummaryRow {
            mode: report.mode.to_string(),
            loss: report.loss.clone(),
            strategy: report.strategy.to_string(),
            abr: report.abr.to_string(),
            metrics: summarize(report),
        }
    }

    fn numbers(&self) -> [f64; 7] {
        let m = &self.metrics;
        [
            m.quality,
            m.rebuffer_s,
            m.rebuffer_pct,
            m.overhead_pct,
            m.avg_bitrate_bps,
            m.decision_us_mean,
            m.decision_us_p99,
        ]
    }

    /// Same row with every metric rounded to the declared precision.
    pub fn rounded(&self) -> Self {
        let m = &self.metrics;
        SummaryRow {
            metrics: MetricsSummary {
                quality: round_sig(m.quality),
                rebuffer_s: round_sig(m.rebuffer_s),
                rebuffer_pct: round_sig(m.rebuffer_pct),
                overhead_pct: round_sig(m.overhead_pct),
                avg_bitrate_bps: round_sig(m.avg_bitrate_bps),
                decision_us_mean: round_sig(m.decision_us_mean),
                decision_us_p99: round_sig(m.decision_us_p99),
            },
            ..self.clone()
        }
    }
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for row in rows {
        let mut fields = vec![row.mode.clone(), row.loss.clone(), row.strategy.clone(), row.abr.clone()];
        fields.extend(row.numbers().iter().map(|v| format_sig(*v)));
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_summary_csv<R: Read>(input: R) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != SUMMARY_HEADER {
        return Err(Error::parse("csv header", format!("unexpected columns {header:?}")));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| Error::parse(format!("csv row {} column {}", line + 1, SUMMARY_HEADER[i]), rec[i].to_string()))
        };
        rows.push(SummaryRow {
            mode: rec[0].to_string(),
            loss: rec[1].to_string(),
            strategy: rec[2].to_string(),
            abr: rec[3].to_string(),
            metrics: MetricsSummary {
                quality: num(4)?,
                rebuffer_s: num(5)?,
                rebuffer_pct: num(6)?,
                overhead_pct: num(7)?,
                avg_bitrate_bps: num(8)?,
                decision_us_mean: num(9)?,
                decision_us_p99: num(10)?,
            },
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub schema_version: u32,
    pub columns: Vec<String>,
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    pub fn new(rows: &[SummaryRow]) -> Self {
        SummaryTable {
            schema_version: SCHEMA_VERSION,
            columns: SUMMARY_HEADER.iter().map(|s| s.to_string()).collect(),
            rows: rows.iter().map(SummaryRow::rounded).collect(),
        }
    }
}

pub fn write_summary_json<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, &SummaryTable::new(rows))?;
    Ok(())
}

pub fn read_summary_json<R: Read>(input: R) -> Result<Vec<SummaryRow>> {
    let table: SummaryTable = serde_json::from_reader(input)?;
    if table.schema_version != SCHEMA_VERSION {
        return Err(Error::parse(
            "schema_version",
            format!("expected {SCHEMA_VERSION}, got {}", table.schema_version),
        ));
    }
    Ok(table.rows)
}

/// Timing totals of one session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionTotals {
    pub segments: usize,
    pub startup_s: f64,
    pub play_s: f64,
    pub rebuffer_s: f64,
    pub idle_s: f64,
    pub wall_s: f64,
    pub source_bytes: u64,
    pub repair_bytes: f64,
}

/// JSON document produced by a single run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDocument {
    pub schema_version: u32,
    pub summary: SummaryRow,
    pub totals: SessionTotals,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<Vec<SegmentRecord>>,
}

impl RunDocument {
    pub fn new(report: &SessionReport, per_segment: bool) -> Self {
        RunDocument {
            schema_version: SCHEMA_VERSION,
            summary: SummaryRow::from_report(report).rounded(),
            totals: SessionTotals {
                segments: report.segments.len(),
                startup_s: report.startup_s,
                play_s: report.play_s,
                rebuffer_s: report.rebuffer_s,
                idle_s: report.idle_s,
                wall_s: report.wall_s,
                source_bytes: report.total_source_bytes(),
                repair_bytes: report.total_repair_bytes(),
            },
            segments: per_segment.then(|| report.segments.clone()),
        }
    }
}

pub const SEGMENT_HEADER: [&str; 20] = [
    "index",
    "representation",
    "bitrate_bps",
    "quality",
    "codec",
    "n",
    "k",
    "S",
    "fallback",
    "source_bytes",
    "repair_bytes",
    "download_s",
    "encoding_s",
    "idle_s",
    "buffer_before",
    "buffer_after",
    "rebuffer_s",
    "sampled_loss",
    "smoothed_loss",
    "decision_us",
];

/// Per-segment dump for time-series analysis.
pub fn write_segments_csv<W: Write>(segments: &[SegmentRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SEGMENT_HEADER)?;
    for s in segments {
        w.write_record([
            s.index.to_string(),
            s.representation.to_string(),
            format_sig(s.bitrate),
            format_sig(s.quality),
            s.fec.codec.kind.to_string(),
            s.fec.n.to_string(),
            s.fec.k.to_string(),
            s.fec.symbol_size.to_string(),
            s.fallback.to_string(),
            s.source_bytes.to_string(),
            format_sig(s.repair_bytes),
            format_sig(s.download_s),
            format_sig(s.encoding_s),
            format_sig(s.idle_s),
            format_sig(s.buffer_before),
            format_sig(s.buffer_after),
            format_sig(s.rebuffer_s),
            format_sig(s.sampled_loss),
            format_sig(s.smoothed_loss),
            format_sig(s.decision_us),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Writes summary rows to `path`, format chosen by extension.
pub fn write_summary_file(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    match Format::from_path(path) {
        Format::Csv => write_summary_csv(rows, &mut out)?,
        Format::Json => write_summary_json(rows, &mut out)?,
    }
    out.flush().map_err(|e| Error::io(path, e))
}
