//! Error-log serialization.
//!
//! One CSV row per error record, denormalized with the run-level context so
//! a file is self-describing. The header and field order are part of the
//! tool's compatibility contract and byte-stable across runs; floats are
//! written with Rust's shortest-round-trip formatting.

use std::io::{self, BufRead, Write};

use crate::error::ModelError;
use crate::harness::{DataPattern, ErrorLog, ErrorRecord, RecordSink, RunMeta};
use crate::variation::{EnvConditions, TimingParam, TimingParams};

pub const CSV_HEADER: &str =
    "run_id,trp_ns,trcd_ns,tras_ns,twr_ns,temp_c,refresh_ms,pattern,iteration,ext_row,ext_col,beat,bit,param";

fn format_row(meta: &RunMeta, rec: &ErrorRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        meta.run_id,
        meta.applied.trp_ns,
        meta.applied.trcd_ns,
        meta.applied.tras_ns,
        meta.applied.twr_ns,
        meta.env.temperature_c,
        meta.env.refresh_interval_ms,
        rec.pattern.name(),
        rec.iteration,
        rec.ext_row,
        rec.ext_col,
        rec.beat,
        rec.bit,
        rec.param.label()
    )
}

/// Write a materialized log, header included.
pub fn write_log_csv<W: Write>(w: &mut W, log: &ErrorLog) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for rec in &log.records {
        writeln!(w, "{}", format_row(&log.meta, rec))?;
    }
    Ok(())
}

/// Record sink that streams rows straight to a writer, so full-device scans
/// never hold their records in memory.
pub struct CsvSink<W: Write> {
    w: W,
    meta: RunMeta,
    error: Option<io::Error>,
    pub records_written: u64,
}

impl<W: Write> CsvSink<W> {
    pub fn new(mut w: W, meta: RunMeta) -> io::Result<Self> {
        writeln!(w, "{CSV_HEADER}")?;
        Ok(CsvSink {
            w,
            meta,
            error: None,
            records_written: 0,
        })
    }

    /// Surface any write error deferred from [`RecordSink::record`].
    pub fn finish(mut self) -> io::Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.w.flush()?;
        Ok(self.w)
    }
}

impl<W: Write> RecordSink for CsvSink<W> {
    fn record(&mut self, rec: ErrorRecord) {
        if self.error.is_some() {
            return;
        }
        if let Err(e) = writeln!(self.w, "{}", format_row(&self.meta, &rec)) {
            self.error = Some(e);
        }
        self.records_written += 1;
    }
}

fn parse_line(line: &str, lineno: usize) -> Result<(RunMeta, ErrorRecord), ModelError> {
    let bad = |why: String| ModelError::invalid("error log csv", format!("line {lineno}: {why}"));
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 14 {
        return Err(bad(format!("expected 14 fields, got {}", fields.len())));
    }
    let float = |idx: usize, name: &str| -> Result<f64, ModelError> {
        fields[idx]
            .parse::<f64>()
            .map_err(|_| bad(format!("{name} is not a number: {:?}", fields[idx])))
    };
    let int = |idx: usize, name: &str| -> Result<u64, ModelError> {
        fields[idx]
            .parse::<u64>()
            .map_err(|_| bad(format!("{name} is not an integer: {:?}", fields[idx])))
    };
    let meta = RunMeta {
        run_id: fields[0].to_string(),
        applied: TimingParams {
            trp_ns: float(1, "trp_ns")?,
            trcd_ns: float(2, "trcd_ns")?,
            tras_ns: float(3, "tras_ns")?,
            twr_ns: float(4, "twr_ns")?,
        },
        env: EnvConditions::new(float(5, "temp_c")?, float(6, "refresh_ms")?),
    };
    let rec = ErrorRecord {
        pattern: DataPattern::parse(fields[7])
            .map_err(|e| bad(format!("bad pattern: {e}")))?,
        iteration: int(8, "iteration")? as u32,
        ext_row: int(9, "ext_row")?,
        ext_col: int(10, "ext_col")? as u32,
        beat: int(11, "beat")? as u8,
        bit: int(12, "bit")? as u8,
        param: TimingParam::parse(fields[13])
            .ok_or_else(|| bad(format!("unknown param {:?}", fields[13])))?,
    };
    Ok((meta, rec))
}

/// Stream a log file into a sink, returning the metadata of each run seen
/// (runs are contiguous blocks sharing a run id).
pub fn fold_log_csv<R: BufRead>(
    r: R,
    sink: &mut dyn RecordSink,
) -> Result<Vec<RunMeta>, ModelError> {
    let mut runs: Vec<RunMeta> = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| ModelError::invalid("error log csv", e.to_string()))?;
        if i == 0 {
            if line != CSV_HEADER {
                return Err(ModelError::invalid(
                    "error log csv",
                    format!("line 1: header mismatch, got {line:?}"),
                ));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let (meta, rec) = parse_line(&line, i + 1)?;
        match runs.last() {
            Some(last) if last.run_id == meta.run_id => {
                if *last != meta {
                    return Err(ModelError::invalid(
                        "error log csv",
                        format!("line {}: run {} changes its metadata mid-file", i + 1, meta.run_id),
                    ));
                }
            }
            _ => runs.push(meta),
        }
        sink.record(rec);
    }
    Ok(runs)
}

/// Materialize a log file; errors if it holds anything but exactly one run.
pub fn read_single_run_csv<R: BufRead>(r: R) -> Result<ErrorLog, ModelError> {
    let mut records: Vec<ErrorRecord> = Vec::new();
    let mut runs = fold_log_csv(r, &mut records)?;
    match (runs.len(), runs.pop()) {
        (1, Some(meta)) => Ok(ErrorLog { meta, records }),
        (0, _) => Err(ModelError::invalid("error log csv", "file holds no records")),
        (n, _) => Err(ModelError::invalid(
            "error log csv",
            format!("expected one run, file holds {n}"),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn sample_log() -> ErrorLog {
        let meta = RunMeta {
            run_id: "abc123def456".to_string(),
            applied: TimingParams {
                trcd_ns: 13.75,
                tras_ns: 35.0,
                trp_ns: 7.5,
                twr_ns: 15.0,
            },
            env: EnvConditions::new(85.0, 256.0),
        };
        let records = vec![
            ErrorRecord {
                pattern: DataPattern::parse("0101-stripe").unwrap(),
                iteration: 0,
                ext_row: 17,
                ext_col: 3,
                beat: 2,
                bit: 5,
                param: TimingParam::Trp,
            },
            ErrorRecord {
                pattern: DataPattern::parse("0101-inv-stripe").unwrap(),
                iteration: 1,
                ext_row: 32767,
                ext_col: 511,
                beat: 7,
                bit: 0,
                param: TimingParam::Trcd,
            },
        ];
        ErrorLog { meta, records }
    }

    #[test]
    fn csv_bytes_are_pinned() {
        let mut buf = Vec::new();
        write_log_csv(&mut buf, &sample_log()).unwrap();
        let expected = "\
run_id,trp_ns,trcd_ns,tras_ns,twr_ns,temp_c,refresh_ms,pattern,iteration,ext_row,ext_col,beat,bit,param
abc123def456,7.5,13.75,35,15,85,256,0101-stripe,0,17,3,2,5,trp
abc123def456,7.5,13.75,35,15,85,256,0101-inv-stripe,1,32767,511,7,0,trcd
";
        assert_eq!(String::from_utf8(buf).unwrap(), expected);
    }

    #[test]
    fn csv_round_trips() {
        let log = sample_log();
        let mut buf = Vec::new();
        write_log_csv(&mut buf, &log).unwrap();
        let back = read_single_run_csv(Cursor::new(buf)).unwrap();
        assert_eq!(back, log);
    }

    #[test]
    fn streaming_sink_produces_identical_bytes() {
        let log = sample_log();
        let mut whole = Vec::new();
        write_log_csv(&mut whole, &log).unwrap();

        let mut sink = CsvSink::new(Vec::new(), log.meta.clone()).unwrap();
        for rec in &log.records {
            sink.record(*rec);
        }
        assert_eq!(sink.records_written, 2);
        let streamed = sink.finish().unwrap();
        assert_eq!(streamed, whole);
    }

    #[test]
    fn reader_reports_line_anchored_failures() {
        let text = format!("{CSV_HEADER}\nnot,enough,fields\n");
        let err = read_single_run_csv(Cursor::new(text)).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");

        let bad_header = "run_id,wrong\nwhatever";
        let err = read_single_run_csv(Cursor::new(bad_header)).unwrap_err().to_string();
        assert!(err.contains("header"), "{err}");

        let mut buf = Vec::new();
        write_log_csv(&mut buf, &sample_log()).unwrap();
        let mut text = String::from_utf8(buf).unwrap();
        text.push_str("abc123def456,7.5,13.75,35,15,85,256,0101-stripe,0,17,3,2,5,nonsense\n");
        let err = read_single_run_csv(Cursor::new(text)).unwrap_err().to_string();
        assert!(err.contains("line 4") && err.contains("nonsense"), "{err}");
    }

    #[test]
    fn multiple_runs_are_grouped_and_rejected_by_single_run_reader() {
        let mut log_a = sample_log();
        let mut buf = Vec::new();
        write_log_csv(&mut buf, &log_a).unwrap();
        // Append a second run with a different id.
        log_a.meta.run_id = "fedcba987654".to_string();
        for rec in &log_a.records {
            buf.extend_from_slice(format_row(&log_a.meta, rec).as_bytes());
            buf.push(b'\n');
        }
        let mut records = Vec::new();
        let runs = fold_log_csv(Cursor::new(buf.clone()), &mut records).unwrap();
        assert_eq!(runs.len(), 2);
        assert_eq!(records.len(), 4);
        assert!(read_single_run_csv(Cursor::new(buf)).is_err());
    }
}
