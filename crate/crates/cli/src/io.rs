//! File helpers shared by the commands.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rnng_core::corpus::{read_treebank, tokenize_line, Tree};

use crate::config::Config;

pub const RESOLVED_CONFIG: &str = "config.resolved";
pub const SUMMARY: &str = "summary.tsv";

/// Creates the output directory and writes the resolved configuration.
pub fn prepare_out(cfg: &Config) -> Result<PathBuf> {
    let dir = cfg.path("out").context("no output directory")?;
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write(&dir.join(RESOLVED_CONFIG), &cfg.render())?;
    Ok(dir)
}

pub fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn load_trees(path: &Path) -> Result<Vec<Tree>> {
    let trees = read_treebank(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    if trees.is_empty() {
        bail!("{} holds no trees", path.display());
    }
    Ok(trees)
}

/// Tokenized sentences from a bracketed treebank (yields) or plain text
/// (one sentence per non-empty line).
pub fn load_sentences(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = read(path)?;
    if text.trim_start().starts_with('(') {
        return Ok(load_trees(path)?.iter().map(yield_of).collect());
    }
    let s: Vec<Vec<String>> = text.lines().map(tokenize_line).filter(|t| !t.is_empty()).collect();
    if s.is_empty() {
        bail!("{} holds no sentences", path.display());
    }
    Ok(s)
}

pub fn yield_of(t: &Tree) -> Vec<String> {
    t.words().iter().map(|w| w.to_string()).collect()
}

/// `key<TAB>value` lines.
pub fn write_summary(dir: &Path, rows: &[(&str, String)]) -> Result<()> {
    let mut s = String::new();
    for (k, v) in rows {
        s.push_str(&format!("{k}\t{v}\n"));
    }
    write(&dir.join(SUMMARY), &s)
}

pub fn read_summary(path: &Path) -> Result<Vec<(String, String)>> {
    Ok(read(path)?
        .lines()
        .filter_map(|l| l.split_once('\t'))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect())
}
