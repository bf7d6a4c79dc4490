use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::RoundMetrics;

pub const CSV_HEADER: &str =
    "round,model_time,grad_norm_sq,consensus_err,dist_to_opt,bits_sent,dual_residual";

fn row(m: &RoundMetrics) -> String {
    // both `{}` and `{:e}` print the shortest text that parses back exactly
    format!(
        "{},{},{:e},{:e},{:e},{},{:e}",
        m.round,
        m.model_time,
        m.grad_norm_sq,
        m.consensus_err,
        m.dist_to_opt,
        m.bits_sent,
        m.dual_residual
    )
}

/// Streams metric rows to a file as they are produced.
pub struct CsvSink {
    out: BufWriter<File>,
}

impl CsvSink {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{CSV_HEADER}")?;
        Ok(Self { out })
    }

    pub fn write(&mut self, m: &RoundMetrics) -> Result<()> {
        writeln!(self.out, "{}", row(m))?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn emit_csv(metrics: &[RoundMetrics], path: impl AsRef<Path>) -> Result<()> {
    if metrics.is_empty() {
        return Err(Error::param("no metrics to write"));
    }
    let mut sink = CsvSink::create(path)?;
    for m in metrics {
        sink.write(m)?;
    }
    sink.flush()
}

/// Reads back a file written by [`emit_csv`]. `stacked_x_norm` is not stored
/// and comes back as NaN.
pub fn parse_csv(text: &str) -> Result<Vec<RoundMetrics>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "missing metrics header".into(),
            })
        }
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = |message: String| Error::Parse {
                line: i + 2,
                message,
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(bad(format!("expected 7 columns, got {}", f.len())));
            }
            let float = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
            let int = |s: &str| s.parse::<u64>().map_err(|e| bad(format!("{s:?}: {e}")));
            Ok(RoundMetrics {
                round: int(f[0])?,
                model_time: float(f[1])?,
                grad_norm_sq: float(f[2])?,
                consensus_err: float(f[3])?,
                dist_to_opt: float(f[4])?,
                bits_sent: int(f[5])?,
                dual_residual: float(f[6])?,
                stacked_x_norm: f64::NAN,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metric(k: u64) -> RoundMetrics {
        RoundMetrics {
            round: k,
            model_time: 124.0 * k as f64,
            grad_norm_sq: 0.1f64.powi(k as i32) / 3.0,
            consensus_err: 1.0 / (k as f64 + 7.0),
            dist_to_opt: if k == 0 { f64::NAN } else { 2e-300 },
            bits_sent: 4160 * k,
            dual_residual: 1.2345678901234567e-17,
            stacked_x_norm: 0.0,
        }
    }

    #[test]
    fn three_rows_four_lines_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let series: Vec<_> = (0..3).map(metric).collect();
        emit_csv(&series, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        let back = parse_csv(&text).unwrap();
        for (a, b) in series.iter().zip(&back) {
            assert_eq!(a.round, b.round);
            assert_eq!(a.grad_norm_sq.to_bits(), b.grad_norm_sq.to_bits());
            assert_eq!(a.consensus_err.to_bits(), b.consensus_err.to_bits());
            assert_eq!(a.dual_residual.to_bits(), b.dual_residual.to_bits());
            assert_eq!(a.bits_sent, b.bits_sent);
            assert!(a.dist_to_opt.is_nan() == b.dist_to_opt.is_nan());
        }
    }

    #[test]
    fn empty_series_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_csv(&[], dir.path().join("x.csv")).is_err());
        assert!(parse_csv("round\n").is_err());
        assert!(parse_csv(&format!("{CSV_HEADER}\n1,2,3\n")).is_err());
    }
}
