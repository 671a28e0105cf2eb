use std::collections::VecDeque;
use std::ops::Range;

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::design::{build_design, permutation, Ols};
use crate::epochs::EpochSet;
use crate::error::{ErpError, Result};
use crate::fit::{axpy, fit_pointwise};
use crate::montage::Adjacency;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    pub n_perm: usize,
    /// Two-sided pointwise p value that sets the cluster-forming |t|.
    pub threshold_p: f64,
    pub tmin: f64,
    pub tmax: f64,
    pub seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            n_perm: 1000,
            threshold_p: 0.05,
            tmin: 0.0,
            tmax: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    /// `(channel, sample)` pairs; samples index the full epoch.
    pub members: Vec<(usize, usize)>,
    /// Sum of t over the members.
    pub mass: f64,
    pub p: f64,
    pub polarity: Polarity,
}

impl ClusterResult {
    pub fn time_span(&self) -> (usize, usize) {
        let lo = self.members.iter().map(|m| m.1).min().unwrap_or(0);
        let hi = self.members.iter().map(|m| m.1).max().unwrap_or(0);
        (lo, hi)
    }

    pub fn channels(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.members.iter().map(|m| m.0).collect();
        c.sort_unstable();
        c.dedup();
        c
    }
}

#[derive(Debug, Clone)]
pub struct ClusterTest {
    /// Sorted by p, then by decreasing |mass|.
    pub clusters: Vec<ClusterResult>,
    pub t_threshold: f64,
    pub window: Range<usize>,
    /// Group t per `(channel, sample - window.start)`, channel-major.
    pub t_map: Vec<f64>,
    /// Largest |cluster mass| of each permutation (0 when none formed).
    pub null_max: Vec<f64>,
    pub subjects: Vec<String>,
    /// Lag-1 residual autocorrelation of each subject's full-model fit.
    pub ar1: Vec<f64>,
}

impl ClusterTest {
    pub fn significant(&self, alpha: f64) -> impl Iterator<Item = &ClusterResult> {
        self.clusters.iter().filter(move |c| c.p < alpha)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the row permutation applied to `subject` in permutation `index`.
pub fn permutation_seed(seed: u64, index: usize, subject: usize) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ index as u64) ^ subject as u64)
}

/// One-sample t per cell over subjects (rows of `betas`). Cells with zero
/// spread get t = 0.
pub fn group_t(betas: &[Vec<f64>]) -> Vec<f64> {
    let s = betas.len() as f64;
    let cells = betas[0].len();
    let mut mean = vec![0.0; cells];
    for b in betas {
        axpy(&mut mean, 1.0 / s, b);
    }
    let mut ss = vec![0.0; cells];
    for b in betas {
        for ((v, x), m) in ss.iter_mut().zip(b).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    mean.iter()
        .zip(&ss)
        .map(|(m, v)| {
            let se = (v / (s - 1.0) / s).sqrt();
            if se > 0.0 {
                m / se
            } else {
                0.0
            }
        })
        .collect()
}

/// Connected suprathreshold components of a channel-major t map with `nw`
/// samples per channel. Cells connect along time within a channel and
/// across neighbouring channels at the same sample; clusters never mix
/// signs. Returns `(cells, mass, polarity)` with cells as `c * nw + t`.
pub fn find_clusters(t: &[f64], nw: usize, threshold: f64, adj: &Adjacency) -> Vec<(Vec<usize>, f64, Polarity)> {
    let sign = |x: f64| {
        if x > threshold {
            1i8
        } else if x < -threshold {
            -1
        } else {
            0
        }
    };
    let mut seen = vec![false; t.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..t.len() {
        let s = sign(t[start]);
        if s == 0 || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut cells = Vec::new();
        let mut mass = 0.0;
        while let Some(x) = queue.pop_front() {
            cells.push(x);
            mass += t[x];
            let (c, k) = (x / nw, x % nw);
            let mut visit = |y: usize| {
                if !seen[y] && sign(t[y]) == s {
                    seen[y] = true;
                    queue.push_back(y);
                }
            };
            if k > 0 {
                visit(x - 1);
            }
            if k + 1 < nw {
                visit(x + 1);
            }
            for &n in adj.neighbours(c) {
                visit(n * nw + k);
            }
        }
        cells.sort_unstable();
        let pol = if s > 0 { Polarity::Positive } else { Polarity::Negative };
        out.push((cells, mass, pol));
    }
    out
}

fn max_abs_mass(t: &[f64], nw: usize, threshold: f64, adj: &Adjacency) -> f64 {
    find_clusters(t, nw, threshold, adj)
        .iter()
        .map(|c| c.1.abs())
        .fold(0.0, f64::max)
}

struct Subject {
    rows: Vec<usize>,
    /// Target row of the design's pseudo-inverse.
    weights: Vec<f64>,
}

/// Target betas of one subject over the window, with row `i` weighted by
/// `weights[perm[i]]`.
fn window_betas(e: &EpochSet, s: &Subject, perm: Option<&[usize]>, w: &Range<usize>) -> Vec<f64> {
    let nw = w.len();
    let mut b = vec![0.0; e.n_channels * nw];
    for (i, &row) in s.rows.iter().enumerate() {
        let a = s.weights[perm.map_or(i, |p| p[i])];
        let ep = e.epoch(row);
        for c in 0..e.n_channels {
            let src = &ep[c * e.n_times + w.start..c * e.n_times + w.end];
            axpy(&mut b[c * nw..(c + 1) * nw], a, src);
        }
    }
    b
}

/// Per-subject regressions of the epochs on intercept, controls and target;
/// group t on the target betas; clusters of suprathreshold t; cluster p
/// from the maxima of `n_perm` row-permuted refits.
pub fn cluster_permutation_test(
    e: &EpochSet,
    target: &str,
    controls: &[&str],
    adj: &Adjacency,
    cfg: &ClusterConfig,
) -> Result<ClusterTest> {
    if cfg.n_perm < 100 {
        return Err(ErpError::Config(format!("n_perm must be at least 100, got {}", cfg.n_perm)));
    }
    if !(cfg.threshold_p > 0.0 && cfg.threshold_p < 1.0) {
        return Err(ErpError::Config(format!("threshold p must lie in (0, 1), got {}", cfg.threshold_p)));
    }
    if adj.n_channels() != e.n_channels {
        return Err(ErpError::Config(format!(
            "adjacency covers {} channels, data has {}",
            adj.n_channels(),
            e.n_channels
        )));
    }
    let window = e.window(cfg.tmin, cfg.tmax)?;
    let nw = window.len();
    let groups = e.meta.subjects();
    if groups.len() < 2 {
        return Err(ErpError::Config("a group test needs at least two subjects".into()));
    }
    let mut subjects = Vec::with_capacity(groups.len());
    let mut ar1 = Vec::with_capacity(groups.len());
    for (_, rows) in &groups {
        let sub = e.select(rows);
        let d = build_design(&sub.meta, Some(target), controls)?;
        let k = d.target.expect("target requested");
        let ols = Ols::new(&d)?;
        ar1.push(fit_pointwise(&sub, &d)?.ar1);
        subjects.push(Subject {
            rows: rows.clone(),
            weights: ols.pinv.row(k).iter().copied().collect(),
        });
    }
    let df = (subjects.len() - 1) as f64;
    let t_threshold = StudentsT::new(0.0, 1.0, df)
        .map_err(|err| ErpError::Config(err.to_string()))?
        .inverse_cdf(1.0 - cfg.threshold_p / 2.0);

    let observed: Vec<Vec<f64>> = subjects.iter().map(|s| window_betas(e, s, None, &window)).collect();
    let t_map = group_t(&observed);
    let found = find_clusters(&t_map, nw, t_threshold, adj);

    let null_max: Vec<f64> = (0..cfg.n_perm)
        .into_par_iter()
        .map(|q| {
            let betas: Vec<Vec<f64>> = subjects
                .iter()
                .enumerate()
                .map(|(si, s)| {
                    let perm = permutation(s.rows.len(), permutation_seed(cfg.seed, q, si));
                    window_betas(e, s, Some(&perm), &window)
                })
                .collect();
            max_abs_mass(&group_t(&betas), nw, t_threshold, adj)
        })
        .collect();

    let denom = (cfg.n_perm + 1) as f64;
    let mut clusters: Vec<ClusterResult> = found
        .into_iter()
        .map(|(cells, mass, polarity)| {
            let exceed = null_max.iter().filter(|&&m| m >= mass.abs()).count();
            ClusterResult {
                members: cells.iter().map(|&x| (x / nw, window.start + x % nw)).collect(),
                mass,
                p: (exceed + 1) as f64 / denom,
                polarity,
            }
        })
        .collect();
    clusters.sort_by(|a, b| a.p.total_cmp(&b.p).then(b.mass.abs().total_cmp(&a.mass.abs())));
    Ok(ClusterTest {
        clusters,
        t_threshold,
        window,
        t_map,
        null_max,
        subjects: groups.into_iter().map(|g| g.0).collect(),
        ar1,
    })
}
