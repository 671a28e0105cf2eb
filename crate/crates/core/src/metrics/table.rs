use std::io::Write;

use serde::{Deserialize, Serialize};

use super::MetricsError;

pub const METRICS_HEADER: &str = "sent\tidx\ttoken\tdistance\tsurprisal\tentropy\tentropy_delta\tcontent\texhausted";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub sent: usize,
    pub idx: usize,
    pub token: String,
    pub distance: usize,
    pub surprisal: f64,
    pub entropy: f64,
    pub entropy_delta: f64,
    pub content: bool,
    pub exhausted: bool,
}

/// Floats use the shortest representation that reads back exactly.
pub fn write_metrics_tsv<W: Write>(mut out: W, rows: &[MetricRow]) -> std::io::Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.sent,
            r.idx,
            r.token,
            r.distance,
            r.surprisal,
            r.entropy,
            r.entropy_delta,
            r.content as u8,
            r.exhausted as u8
        )?;
    }
    Ok(())
}

fn flag(s: &str) -> Result<bool, String> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(format!("expected 0 or 1, found `{s}`")),
    }
}

pub fn read_metrics_tsv(text: &str) -> Result<Vec<MetricRow>, MetricsError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == METRICS_HEADER => {}
        _ => {
            return Err(MetricsError::Table {
                line: 1,
                msg: "missing or wrong header".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| MetricsError::Table { line: i + 1, msg };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 9 {
            return Err(err(format!("expected 9 columns, found {}", f.len())));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|e| err(format!("`{s}`: {e}")));
        let real = |s: &str| s.parse::<f64>().map_err(|e| err(format!("`{s}`: {e}")));
        rows.push(MetricRow {
            sent: int(f[0])?,
            idx: int(f[1])?,
            token: f[2].to_string(),
            distance: int(f[3])?,
            surprisal: real(f[4])?,
            entropy: real(f[5])?,
            entropy_delta: real(f[6])?,
            content: flag(f[7]).map_err(err)?,
            exhausted: flag(f[8]).map_err(err)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_only() {
        let mut buf = Vec::new();
        write_metrics_tsv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{METRICS_HEADER}\n"));
        assert_eq!(METRICS_HEADER.split('\t').count(), 9);
    }

    #[test]
    fn round_trip_is_exact() {
        let rows = vec![
            MetricRow {
                sent: 0,
                idx: 0,
                token: "Alice".into(),
                distance: 3,
                surprisal: 1.0 / 3.0,
                entropy: std::f64::consts::PI,
                entropy_delta: -1e-300,
                content: true,
                exhausted: false,
            },
            MetricRow {
                sent: 0,
                idx: 1,
                token: "was".into(),
                distance: 1,
                surprisal: 12.345678901234567,
                entropy: 0.0,
                entropy_delta: -std::f64::consts::PI,
                content: false,
                exhausted: true,
            },
        ];
        let mut buf = Vec::new();
        write_metrics_tsv(&mut buf, &rows).unwrap();
        let back = read_metrics_tsv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn bad_rows_are_located() {
        let text = format!("{METRICS_HEADER}\n0\t0\ta\t1\t0.5\t0\t0\t2\t0\n");
        match read_metrics_tsv(&text) {
            Err(MetricsError::Table { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
