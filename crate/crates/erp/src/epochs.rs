use std::fs;
use std::io::Write;
use std::ops::Range;
use std::path::{Path, PathBuf};

use crate::error::{ErpError, Result};

pub const DATA_FILE: &str = "data.bin";
pub const META_FILE: &str = "meta.tsv";
const MAGIC: &[u8; 8] = b"ERPEPOCH";
const VERSION: u32 = 1;

/// Fixed metadata columns, in file order; numeric columns follow.
pub const META_FIXED: [&str; 5] = ["subject", "sent", "idx", "token", "content"];

/// Per-epoch metadata, stored column-wise.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpochMeta {
    pub subject: Vec<String>,
    pub sent: Vec<usize>,
    pub idx: Vec<usize>,
    pub token: Vec<String>,
    pub content: Vec<bool>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl EpochMeta {
    pub fn len(&self) -> usize {
        self.subject.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subject.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// Adds or replaces a numeric column.
    pub fn set_column(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.len() {
            return Err(ErpError::Invalid(format!(
                "column '{name}' has {} values for {} epochs",
                values.len(),
                self.len()
            )));
        }
        match self.columns.iter_mut().find(|(n, _)| n == name) {
            Some((_, v)) => *v = values,
            None => self.columns.push((name.to_string(), values)),
        }
        Ok(())
    }

    pub fn select(&self, rows: &[usize]) -> EpochMeta {
        EpochMeta {
            subject: rows.iter().map(|&r| self.subject[r].clone()).collect(),
            sent: rows.iter().map(|&r| self.sent[r]).collect(),
            idx: rows.iter().map(|&r| self.idx[r]).collect(),
            token: rows.iter().map(|&r| self.token[r].clone()).collect(),
            content: rows.iter().map(|&r| self.content[r]).collect(),
            columns: self
                .columns
                .iter()
                .map(|(n, v)| (n.clone(), rows.iter().map(|&r| v[r]).collect()))
                .collect(),
        }
    }

    /// Subjects in order of first appearance, each with its epoch indices.
    pub fn subjects(&self) -> Vec<(String, Vec<usize>)> {
        let mut out: Vec<(String, Vec<usize>)> = Vec::new();
        for (i, s) in self.subject.iter().enumerate() {
            match out.iter_mut().find(|(n, _)| n == s) {
                Some((_, v)) => v.push(i),
                None => out.push((s.clone(), vec![i])),
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        let n = self.len();
        let lens = [self.sent.len(), self.idx.len(), self.token.len(), self.content.len()];
        if lens.iter().any(|&l| l != n) {
            return Err(ErpError::Invalid("metadata columns differ in length".into()));
        }
        for (i, (name, v)) in self.columns.iter().enumerate() {
            if v.len() != n {
                return Err(ErpError::Invalid(format!("column '{name}' has {} values for {n} epochs", v.len())));
            }
            if META_FIXED.contains(&name.as_str()) || self.columns[..i].iter().any(|(m, _)| m == name) {
                return Err(ErpError::Invalid(format!("column name '{name}' used twice")));
            }
        }
        Ok(())
    }

    pub fn to_tsv(&self) -> String {
        let mut s = META_FIXED.join("\t");
        for (n, _) in &self.columns {
            s.push('\t');
            s.push_str(n);
        }
        s.push('\n');
        for i in 0..self.len() {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}",
                self.subject[i], self.sent[i], self.idx[i], self.token[i], self.content[i] as u8
            ));
            for (_, v) in &self.columns {
                s.push_str(&format!("\t{:?}", v[i]));
            }
            s.push('\n');
        }
        s
    }

    pub fn from_tsv(text: &str, path: &Path) -> Result<EpochMeta> {
        let bad = |line: usize, msg: String| ErpError::Format {
            path: path.to_path_buf(),
            record: format!("line {line}"),
            msg,
        };
        let mut lines = text.lines().enumerate();
        let header: Vec<&str> = match lines.next() {
            Some((_, h)) => h.split('\t').collect(),
            None => return Err(bad(1, "empty file".into())),
        };
        if header.len() < META_FIXED.len() || header[..META_FIXED.len()] != META_FIXED {
            return Err(bad(1, format!("header must start with {}", META_FIXED.join(" "))));
        }
        let mut m = EpochMeta {
            columns: header[META_FIXED.len()..].iter().map(|n| (n.to_string(), Vec::new())).collect(),
            ..EpochMeta::default()
        };
        for (i, line) in lines {
            let ln = i + 1;
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != header.len() {
                return Err(bad(ln, format!("expected {} fields, found {}", header.len(), f.len())));
            }
            let int = |k: usize| f[k].parse::<usize>().map_err(|_| bad(ln, format!("{}: not an integer: '{}'", header[k], f[k])));
            m.subject.push(f[0].to_string());
            m.sent.push(int(1)?);
            m.idx.push(int(2)?);
            m.token.push(f[3].to_string());
            m.content.push(match f[4] {
                "0" => false,
                "1" => true,
                other => return Err(bad(ln, format!("content: expected 0 or 1, found '{other}'"))),
            });
            for (k, (name, col)) in m.columns.iter_mut().enumerate() {
                let raw = f[META_FIXED.len() + k];
                col.push(raw.parse().map_err(|_| bad(ln, format!("{name}: not a number: '{raw}'")))?);
            }
        }
        m.validate().map_err(|e| bad(0, e.to_string()))?;
        Ok(m)
    }
}

/// Epoched multichannel signal. `data` is laid out epoch-major, then
/// channel, then time.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet {
    pub data: Vec<f64>,
    pub n_channels: usize,
    pub n_times: usize,
    pub sample_rate: f64,
    /// Time of the first sample, in seconds from word onset.
    pub tmin: f64,
    pub channels: Vec<String>,
    /// Undirected neighbour pairs `(a, b)` with `a < b`.
    pub adjacency: Vec<(usize, usize)>,
    pub meta: EpochMeta,
}

/// Number of samples spanning `[tmin, tmax]` inclusively.
pub fn samples_for(tmin: f64, tmax: f64, sample_rate: f64) -> usize {
    ((tmax - tmin) * sample_rate).round() as usize + 1
}

/// Sorts, orients and deduplicates neighbour pairs.
pub fn normalize_adjacency(pairs: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut v: Vec<(usize, usize)> = pairs.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    v.sort_unstable();
    v.dedup();
    v
}

impl EpochSet {
    pub fn n_epochs(&self) -> usize {
        self.meta.len()
    }

    pub fn epoch_len(&self) -> usize {
        self.n_channels * self.n_times
    }

    pub fn epoch(&self, e: usize) -> &[f64] {
        let l = self.epoch_len();
        &self.data[e * l..(e + 1) * l]
    }

    pub fn value(&self, e: usize, c: usize, t: usize) -> f64 {
        self.data[(e * self.n_channels + c) * self.n_times + t]
    }

    pub fn tmax(&self) -> f64 {
        self.time(self.n_times - 1)
    }

    pub fn time(&self, t: usize) -> f64 {
        self.tmin + t as f64 / self.sample_rate
    }

    /// Sample indices whose times fall in `[t0, t1]`.
    pub fn window(&self, t0: f64, t1: f64) -> Result<Range<usize>> {
        let eps = 1e-9 / self.sample_rate;
        if t0 > t1 || t0 < self.tmin - eps || t1 > self.tmax() + eps {
            return Err(ErpError::Config(format!(
                "window {t0}..{t1} s is outside the epoch span {}..{} s",
                self.tmin,
                self.tmax()
            )));
        }
        let lo = ((t0 - self.tmin) * self.sample_rate - 1e-9).ceil().max(0.0) as usize;
        let hi = ((t1 - self.tmin) * self.sample_rate + 1e-9).floor() as usize;
        Ok(lo..(hi + 1).min(self.n_times))
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(ErpError::Invalid(m));
        if self.n_channels == 0 || self.n_times == 0 {
            return fail("no channels or no samples".into());
        }
        if self.channels.len() != self.n_channels {
            return fail(format!("{} channel names for {} channels", self.channels.len(), self.n_channels));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite() && self.tmin.is_finite()) {
            return fail("sample rate must be positive and the window finite".into());
        }
        if self.data.len() != self.n_epochs() * self.epoch_len() {
            return fail(format!(
                "{} values for {} epochs x {} channels x {} samples",
                self.data.len(),
                self.n_epochs(),
                self.n_channels,
                self.n_times
            ));
        }
        if let Some(&(a, b)) = self.adjacency.iter().find(|&&(a, b)| a >= b || b >= self.n_channels) {
            return fail(format!("bad adjacency pair ({a}, {b})"));
        }
        if normalize_adjacency(&self.adjacency) != self.adjacency {
            return fail("adjacency pairs must be sorted and unique".into());
        }
        self.meta.validate()
    }

    /// Keeps the listed epochs, in the given order.
    pub fn select(&self, rows: &[usize]) -> EpochSet {
        let mut data = Vec::with_capacity(rows.len() * self.epoch_len());
        for &r in rows {
            data.extend_from_slice(self.epoch(r));
        }
        EpochSet {
            data,
            meta: self.meta.select(rows),
            channels: self.channels.clone(),
            adjacency: self.adjacency.clone(),
            ..*self
        }
    }

    pub fn scaled(&self, factor: f64) -> EpochSet {
        EpochSet {
            data: self.data.iter().map(|x| x * factor).collect(),
            ..self.clone()
        }
    }

    /// Writes `data.bin` and `meta.tsv` into `dir`, creating it if needed.
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.validate()?;
        let io = |path: PathBuf| move |source| ErpError::Io { path, source };
        fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
        let mut b = Vec::with_capacity(64 + self.data.len() * 8);
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        for n in [self.n_epochs(), self.n_channels, self.n_times] {
            b.extend_from_slice(&(n as u64).to_le_bytes());
        }
        b.extend_from_slice(&self.sample_rate.to_le_bytes());
        b.extend_from_slice(&self.tmin.to_le_bytes());
        b.extend_from_slice(&self.tmax().to_le_bytes());
        for name in &self.channels {
            b.extend_from_slice(&(name.len() as u32).to_le_bytes());
            b.extend_from_slice(name.as_bytes());
        }
        b.extend_from_slice(&(self.adjacency.len() as u64).to_le_bytes());
        for &(x, y) in &self.adjacency {
            b.extend_from_slice(&(x as u32).to_le_bytes());
            b.extend_from_slice(&(y as u32).to_le_bytes());
        }
        for v in &self.data {
            b.extend_from_slice(&v.to_le_bytes());
        }
        let dp = dir.join(DATA_FILE);
        fs::File::create(&dp).and_then(|mut f| f.write_all(&b)).map_err(io(dp))?;
        let mp = dir.join(META_FILE);
        fs::write(&mp, self.meta.to_tsv()).map_err(io(mp))
    }

    pub fn load(dir: &Path) -> Result<EpochSet> {
        let dp = dir.join(DATA_FILE);
        let bytes = fs::read(&dp).map_err(|source| ErpError::Io { path: dp.clone(), source })?;
        let mut r = Reader { b: &bytes, pos: 0, path: &dp };
        if r.take(8, "magic")? != MAGIC {
            return Err(r.bad("magic", "not an epoch bundle".into()));
        }
        let version = u32::from_le_bytes(r.take(4, "version")?.try_into().unwrap());
        if version != VERSION {
            return Err(r.bad("version", format!("unsupported version {version}")));
        }
        let n_epochs = r.u64("n_epochs")? as usize;
        let n_channels = r.u64("n_channels")? as usize;
        let n_times = r.u64("n_times")? as usize;
        let sample_rate = r.f64("sample_rate")?;
        let tmin = r.f64("tmin")?;
        let tmax = r.f64("tmax")?;
        let mut channels = Vec::with_capacity(n_channels);
        for c in 0..n_channels {
            let field = format!("channel {c}");
            let len = u32::from_le_bytes(r.take(4, &field)?.try_into().unwrap()) as usize;
            let raw = r.take(len, &field)?;
            channels.push(String::from_utf8(raw.to_vec()).map_err(|_| r.bad(&field, "not UTF-8".into()))?);
        }
        let n_pairs = r.u64("adjacency count")? as usize;
        let mut adjacency = Vec::with_capacity(n_pairs.min(1 << 20));
        for p in 0..n_pairs {
            let field = format!("adjacency pair {p}");
            let raw = r.take(8, &field)?;
            let a = u32::from_le_bytes(raw[..4].try_into().unwrap()) as usize;
            let b = u32::from_le_bytes(raw[4..].try_into().unwrap()) as usize;
            adjacency.push((a, b));
        }
        let count = n_epochs
            .checked_mul(n_channels)
            .and_then(|x| x.checked_mul(n_times))
            .ok_or_else(|| r.bad("dims", "dimensions overflow".into()))?;
        if bytes.len() - r.pos != count * 8 {
            return Err(r.bad(
                "data",
                format!("expected {count} values, found {} bytes", bytes.len() - r.pos),
            ));
        }
        let data: Vec<f64> = bytes[r.pos..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mp = dir.join(META_FILE);
        let text = fs::read_to_string(&mp).map_err(|source| ErpError::Io { path: mp.clone(), source })?;
        let meta = EpochMeta::from_tsv(&text, &mp)?;
        if meta.len() != n_epochs {
            return Err(ErpError::Format {
                path: mp,
                record: "rows".into(),
                msg: format!("{} metadata rows for {n_epochs} epochs", meta.len()),
            });
        }
        let set = EpochSet {
            data,
            n_channels,
            n_times,
            sample_rate,
            tmin,
            channels,
            adjacency,
            meta,
        };
        let fmt = |record: &str, msg: String| ErpError::Format {
            path: dp.clone(),
            record: record.into(),
            msg,
        };
        if n_times > 0 && (set.tmax() - tmax).abs() > 1e-9 {
            return Err(fmt("tmax", format!("{tmax} does not match {n_times} samples from {tmin} at {sample_rate} Hz")));
        }
        set.validate().map_err(|e| fmt("header", e.to_string()))?;
        Ok(set)
    }
}

struct Reader<'a> {
    b: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn bad(&self, record: &str, msg: String) -> ErpError {
        ErpError::Format {
            path: self.path.to_path_buf(),
            record: record.into(),
            msg,
        }
    }

    fn take(&mut self, n: usize, field: &str) -> Result<&'a [u8]> {
        if self.b.len() - self.pos < n {
            return Err(self.bad(field, format!("truncated at byte {}", self.pos)));
        }
        let s = &self.b[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self, field: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, field)?.try_into().unwrap()))
    }

    fn f64(&mut self, field: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, field)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> EpochSet {
        EpochSet {
            data: (0..2 * 2 * 3).map(|i| i as f64 * 0.5 - 1.0).collect(),
            n_channels: 2,
            n_times: 3,
            sample_rate: 10.0,
            tmin: -0.1,
            channels: vec!["A".into(), "B".into()],
            adjacency: vec![(0, 1)],
            meta: EpochMeta {
                subject: vec!["s1".into(), "s2".into()],
                sent: vec![0, 0],
                idx: vec![0, 1],
                token: vec!["the".into(), "cat".into()],
                content: vec![false, true],
                columns: vec![("x".into(), vec![0.1, -2.5])],
            },
        }
    }

    #[test]
    fn window_indices() {
        let e = tiny();
        assert_eq!(e.window(0.0, 0.1).unwrap(), 1..3);
        assert_eq!(e.window(-0.1, 0.1).unwrap(), 0..3);
        assert_eq!(e.window(0.05, 0.1).unwrap(), 2..3);
        assert!(e.window(0.0, 0.2).is_err());
    }

    #[test]
    fn round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let e = tiny();
        e.save(dir.path()).unwrap();
        assert_eq!(EpochSet::load(dir.path()).unwrap(), e);

        let mp = dir.path().join(META_FILE);
        let text = fs::read_to_string(&mp).unwrap().replace("\t1\t-2.5", "\tyes\t-2.5");
        fs::write(&mp, text).unwrap();
        let msg = EpochSet::load(dir.path()).unwrap_err().to_string();
        assert!(msg.contains("line 3") && msg.contains("content"), "{msg}");

        e.save(dir.path()).unwrap();
        let dp = dir.path().join(DATA_FILE);
        let mut b = fs::read(&dp).unwrap();
        b.truncate(b.len() - 3);
        fs::write(&dp, b).unwrap();
        let msg = EpochSet::load(dir.path()).unwrap_err().to_string();
        assert!(msg.contains("data"), "{msg}");
    }

    #[test]
    fn subjects_group_in_order() {
        let mut m = tiny().meta;
        m = m.select(&[1, 0, 1]);
        assert_eq!(m.subjects(), vec![("s2".to_string(), vec![0, 2]), ("s1".to_string(), vec![1])]);
    }
}
