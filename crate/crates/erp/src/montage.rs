use crate::epochs::{normalize_adjacency, EpochSet};
use crate::error::{ErpError, Result};

/// Channel names with neighbour pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Montage {
    pub channels: Vec<String>,
    pub adjacency: Vec<(usize, usize)>,
}

/// Lays channel rows out front to back, each row spread evenly over
/// `[-width, width]`. Channels are neighbours when adjacent in a row, or in
/// adjacent rows with horizontal offset at most `max_dx`.
pub fn montage_from_rows(rows: &[(&[&str], f64)], max_dx: f64) -> Montage {
    let mut channels = Vec::new();
    let mut pos: Vec<Vec<(usize, f64)>> = Vec::new();
    for &(names, width) in rows {
        let n = names.len();
        let mut row = Vec::new();
        for (i, name) in names.iter().enumerate() {
            let x = if n == 1 { 0.0 } else { width * (-1.0 + 2.0 * i as f64 / (n - 1) as f64) };
            row.push((channels.len(), x));
            channels.push(name.to_string());
        }
        pos.push(row);
    }
    let mut pairs = Vec::new();
    for (r, row) in pos.iter().enumerate() {
        for w in row.windows(2) {
            pairs.push((w[0].0, w[1].0));
        }
        if let Some(next) = pos.get(r + 1) {
            for &(a, xa) in row {
                for &(b, xb) in next {
                    if (xa - xb).abs() <= max_dx + 1e-12 {
                        pairs.push((a, b));
                    }
                }
            }
        }
    }
    Montage {
        channels,
        adjacency: normalize_adjacency(&pairs),
    }
}

/// Sixteen channels on a 4 x 4 grid; neighbours are the grid's
/// horizontal and vertical neighbours.
pub fn grid16() -> Montage {
    montage_from_rows(
        &[
            (&["F3", "F1", "F2", "F4"], 1.0),
            (&["C3", "C1", "C2", "C4"], 1.0),
            (&["P3", "P1", "P2", "P4"], 1.0),
            (&["PO7", "O1", "O2", "PO8"], 1.0),
        ],
        0.2,
    )
}

/// 61 channels of the 10-10 system in nine rows.
pub fn standard61() -> Montage {
    montage_from_rows(
        &[
            (&["Fp1", "Fpz", "Fp2"], 0.5),
            (&["AF7", "AF3", "AFz", "AF4", "AF8"], 0.6),
            (&["F7", "F5", "F3", "F1", "Fz", "F2", "F4", "F6", "F8"], 1.0),
            (&["FT7", "FC5", "FC3", "FC1", "FCz", "FC2", "FC4", "FC6", "FT8"], 1.0),
            (&["T7", "C5", "C3", "C1", "Cz", "C2", "C4", "C6", "T8"], 1.0),
            (&["TP7", "CP5", "CP3", "CP1", "CPz", "CP2", "CP4", "CP6", "TP8"], 1.0),
            (&["P7", "P5", "P3", "P1", "Pz", "P2", "P4", "P6", "P8"], 1.0),
            (&["PO7", "PO3", "POz", "PO4", "PO8"], 0.6),
            (&["O1", "Oz", "O2"], 0.5),
        ],
        0.2,
    )
}

pub fn montage_by_name(name: &str) -> Result<Montage> {
    match name {
        "grid16" => Ok(grid16()),
        "standard61" => Ok(standard61()),
        other => Err(ErpError::Config(format!("unknown montage '{other}' (grid16, standard61)"))),
    }
}

/// Neighbour lists built from undirected pairs.
#[derive(Debug, Clone)]
pub struct Adjacency {
    neighbours: Vec<Vec<usize>>,
}

impl Adjacency {
    pub fn new(n_channels: usize, pairs: &[(usize, usize)]) -> Result<Adjacency> {
        let mut neighbours = vec![Vec::new(); n_channels];
        for &(a, b) in pairs {
            if a >= n_channels || b >= n_channels || a == b {
                return Err(ErpError::Invalid(format!("bad adjacency pair ({a}, {b})")));
            }
            neighbours[a].push(b);
            neighbours[b].push(a);
        }
        for n in &mut neighbours {
            n.sort_unstable();
            n.dedup();
        }
        Ok(Adjacency { neighbours })
    }

    pub fn of(e: &EpochSet) -> Result<Adjacency> {
        Adjacency::new(e.n_channels, &e.adjacency)
    }

    pub fn neighbours(&self, c: usize) -> &[usize] {
        &self.neighbours[c]
    }

    pub fn are_neighbours(&self, a: usize, b: usize) -> bool {
        self.neighbours[a].binary_search(&b).is_ok()
    }

    pub fn n_channels(&self) -> usize {
        self.neighbours.len()
    }
}

/// A channel set and a time window in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub name: String,
    pub channels: Vec<String>,
    pub tmin: f64,
    pub tmax: f64,
}

impl Region {
    /// N400: central-posterior, 300-500 ms. P600: posterior, 600-700 ms.
    /// ANT: anterior, 200-400 ms. Channel lists cover both built-in
    /// montages; channels missing from a set are skipped.
    pub fn preset(name: &str) -> Result<Region> {
        let (chans, tmin, tmax): (&[&str], f64, f64) = match name {
            "N400" => (
                &["C1", "Cz", "C2", "CP1", "CPz", "CP2", "P1", "Pz", "P2"],
                0.3,
                0.5,
            ),
            "P600" => (
                &["P3", "P1", "Pz", "P2", "P4", "PO7", "PO3", "POz", "PO4", "PO8", "O1", "Oz", "O2"],
                0.6,
                0.7,
            ),
            "ANT" => (
                &["Fp1", "Fpz", "Fp2", "AF3", "AFz", "AF4", "F3", "F1", "Fz", "F2", "F4"],
                0.2,
                0.4,
            ),
            other => return Err(ErpError::Region(format!("unknown preset '{other}' (N400, P600, ANT)"))),
        };
        Ok(Region {
            name: name.to_string(),
            channels: chans.iter().map(|c| c.to_string()).collect(),
            tmin,
            tmax,
        })
    }

    /// Channel indices present in `e`.
    pub fn resolve(&self, e: &EpochSet) -> Vec<usize> {
        self.channels.iter().filter_map(|c| e.channel_index(c)).collect()
    }
}

/// Mean over the region's channels and window samples, one value per epoch.
pub fn roi_average(e: &EpochSet, region: &Region) -> Result<Vec<f64>> {
    let chans = region.resolve(e);
    if chans.is_empty() {
        return Err(ErpError::Region(format!("'{}' has no channels in this epoch set", region.name)));
    }
    let w = e.window(region.tmin, region.tmax).map_err(|m| ErpError::Region(format!("'{}': {m}", region.name)))?;
    if w.is_empty() {
        return Err(ErpError::Region(format!("'{}' window holds no samples", region.name)));
    }
    let count = (chans.len() * w.len()) as f64;
    Ok((0..e.n_epochs())
        .map(|i| {
            let ep = e.epoch(i);
            let s: f64 = chans
                .iter()
                .map(|&c| ep[c * e.n_times + w.start..c * e.n_times + w.end].iter().sum::<f64>())
                .sum();
            s / count
        })
        .collect())
}
