use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Result};
use rnng_core::metrics::read_metrics_tsv;

use crate::io::{read, read_summary, SUMMARY};

const EXPECTED: [&str; 5] = [SUMMARY, "loss.tsv", "metrics.tsv", "sweep.tsv", "lrt.tsv"];

fn describe(name: &str, xs: &[f64]) -> String {
    if xs.is_empty() {
        return format!("  {name:<14} (no rows)\n");
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let q = |p: f64| v[((v.len() - 1) as f64 * p).round() as usize];
    format!(
        "  {name:<14} mean {mean:>8.3}  min {:>8.3}  median {:>8.3}  max {:>8.3}\n",
        v[0],
        q(0.5),
        v[v.len() - 1]
    )
}

fn metrics_section(text: &str, title: &str) -> Result<String> {
    let rows = read_metrics_tsv(text)?;
    let mut s = format!("{title}: {} words", rows.len());
    let exhausted = rows.iter().filter(|r| r.exhausted).count();
    let content = rows.iter().filter(|r| r.content).count();
    writeln!(s, ", {content} content, {exhausted} exhausted")?;
    s += &describe("distance", &rows.iter().map(|r| r.distance as f64).collect::<Vec<_>>());
    s += &describe("surprisal", &rows.iter().map(|r| r.surprisal).collect::<Vec<_>>());
    s += &describe("entropy", &rows.iter().map(|r| r.entropy).collect::<Vec<_>>());
    s += &describe("entropy_delta", &rows.iter().map(|r| r.entropy_delta).collect::<Vec<_>>());
    Ok(s)
}

/// Human-readable summary of the files found in a run directory.
pub fn pipeline_report(dir: &Path) -> Result<String> {
    let mut s = format!("run directory {}\n", dir.display());
    let mut found = 0;
    let summary = dir.join(SUMMARY);
    if summary.is_file() {
        found += 1;
        s += "\nsummary\n";
        for (k, v) in read_summary(&summary)? {
            writeln!(s, "  {k:<28} {v}")?;
        }
    }
    let loss = dir.join("loss.tsv");
    if loss.is_file() {
        found += 1;
        let text = read(&loss)?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        let rows: Vec<&str> = lines.filter(|l| !l.is_empty()).collect();
        let col = header.split('\t').nth(2).unwrap_or("perplexity");
        if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
            let get = |l: &str| l.split('\t').nth(2).unwrap_or("-").to_string();
            writeln!(s, "\ntraining: {} epochs, {col} {} -> {}", rows.len() - 1, get(first), get(last))?;
        }
    }
    let metrics = dir.join("metrics.tsv");
    if metrics.is_file() {
        found += 1;
        s.push('\n');
        s += &metrics_section(&read(&metrics)?, "metrics")?;
    }
    let sweep = dir.join("sweep.tsv");
    if sweep.is_file() {
        found += 1;
        s += "\nbeam sweep\n";
        for line in read(&sweep)?.lines() {
            writeln!(s, "  {}", line.replace('\t', "  "))?;
        }
        for line in read(&sweep)?.lines().skip(1) {
            let Some(k) = line.split('\t').next() else { continue };
            let path = dir.join(format!("metrics_k{k}.tsv"));
            if path.is_file() {
                s.push('\n');
                s += &metrics_section(&read(&path)?, &format!("k = {k}"))?;
            }
        }
    }
    for name in ["clusters.tsv", "lrt.tsv"] {
        let path = dir.join(name);
        if path.is_file() {
            found += 1;
            writeln!(s, "\n{name}")?;
            for line in read(&path)?.lines() {
                writeln!(s, "  {}", line.replace('\t', "  "))?;
            }
        }
    }
    if found == 0 {
        bail!(
            "{} holds none of the expected files ({}, clusters.tsv)",
            dir.display(),
            EXPECTED.join(", ")
        );
    }
    Ok(s)
}
