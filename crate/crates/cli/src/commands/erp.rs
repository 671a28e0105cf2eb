use std::collections::HashMap;

use anyhow::{bail, Context, Result};
use erp_regress::montage::montage_by_name;
use erp_regress::{
    build_design, cluster_permutation_test, lrt_compare, roi_average, synth_epochs, Adjacency, ClusterConfig, Effect,
    EpochSet, Polarity, Region, Stimuli, Stimulus, SynthSpec,
};
use log::{info, warn};
use rnng_core::metrics::{read_metrics_tsv, MetricRow};

use crate::config::{Config, ConfigError};
use crate::io::{prepare_out, read, write, write_summary};

pub const CLUSTERS: &str = "clusters.tsv";
pub const LRT: &str = "lrt.tsv";

/// Predictor columns taken from a metrics table.
const METRIC_COLUMNS: [&str; 5] = ["distance", "surprisal", "entropy", "entropy_delta", "position"];

fn metric_values(r: &MetricRow) -> [f64; 5] {
    [r.distance as f64, r.surprisal, r.entropy, r.entropy_delta, r.idx as f64]
}

fn load_metrics(cfg: &Config) -> Result<Option<Vec<MetricRow>>> {
    cfg.path("metrics")
        .map(|p| read_metrics_tsv(&read(&p)?).with_context(|| format!("reading {}", p.display())))
        .transpose()
}

/// Attaches metric columns to the epochs by `(sent, idx)`; drops epochs
/// whose word exhausted the search. Returns the number dropped.
fn join_metrics(e: &mut EpochSet, rows: &[MetricRow]) -> Result<usize> {
    let by_key: HashMap<(usize, usize), &MetricRow> = rows.iter().map(|r| ((r.sent, r.idx), r)).collect();
    let mut keep = Vec::new();
    let mut matched = Vec::new();
    for i in 0..e.n_epochs() {
        let key = (e.meta.sent[i], e.meta.idx[i]);
        let r = by_key
            .get(&key)
            .with_context(|| format!("epoch {i} (sentence {}, word {}) has no metrics row", key.0, key.1))?;
        if r.token != e.meta.token[i] {
            bail!(
                "epoch {i}: token '{}' does not match metrics token '{}' at sentence {}, word {}",
                e.meta.token[i],
                r.token,
                key.0,
                key.1
            );
        }
        if !r.exhausted {
            keep.push(i);
            matched.push(*r);
        }
    }
    let dropped = e.n_epochs() - keep.len();
    *e = e.select(&keep);
    for (j, name) in METRIC_COLUMNS.iter().enumerate() {
        e.meta.set_column(name, matched.iter().map(|r| metric_values(r)[j]).collect())?;
    }
    Ok(dropped)
}

fn regions(cfg: &Config) -> Result<Vec<Region>> {
    cfg.list("roi")
        .iter()
        .map(|name| {
            if name == "custom" {
                let channels = cfg.list("roi_channels");
                let (Some(tmin), Some(tmax)) = (cfg.get("roi_tmin"), cfg.get("roi_tmax")) else {
                    return Err(ConfigError(vec!["a custom region needs roi_tmin and roi_tmax".into()]).into());
                };
                if channels.is_empty() {
                    return Err(ConfigError(vec!["a custom region needs roi_channels".into()]).into());
                }
                Ok(Region {
                    name: "custom".into(),
                    channels,
                    tmin: tmin.parse()?,
                    tmax: tmax.parse()?,
                })
            } else {
                Ok(Region::preset(name)?)
            }
        })
        .collect()
}

fn check_regress(cfg: &Config) -> Result<(), ConfigError> {
    let mut errors = Vec::new();
    if cfg.int("n_perm") < 100 {
        errors.push(format!("n_perm must be at least 100, got {}", cfg.int("n_perm")));
    }
    for key in ["threshold_p", "alpha"] {
        let p = cfg.float(key);
        if !(p > 0.0 && p < 1.0) {
            errors.push(format!("{key} must lie in (0, 1), got {p}"));
        }
    }
    if cfg.list("target").is_empty() {
        errors.push("target names no predictor".into());
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(ConfigError(errors))
    }
}

pub fn regress(cfg: &Config) -> Result<()> {
    check_regress(cfg)?;
    let out = prepare_out(cfg)?;
    let dir = cfg.path("epochs").unwrap();
    let mut e = EpochSet::load(&dir)?;
    let loaded = e.n_epochs();
    let mut dropped = 0;
    if let Some(rows) = load_metrics(cfg)? {
        dropped = join_metrics(&mut e, &rows)?;
        if dropped > 0 {
            warn!("dropped {dropped} epochs whose word exhausted the beam search");
        }
    }
    if cfg.flag("content_only") {
        let keep: Vec<usize> = (0..e.n_epochs()).filter(|&i| e.meta.content[i]).collect();
        e = e.select(&keep);
    }
    if e.n_epochs() == 0 {
        bail!("no epochs left after filtering");
    }
    info!("{} of {loaded} epochs enter the regression", e.n_epochs());

    let targets = cfg.list("target");
    let controls = cfg.list("controls");
    let control_refs: Vec<&str> = controls.iter().map(String::as_str).collect();
    let regions = regions(cfg)?;
    let adj = Adjacency::of(&e)?;
    let cc = ClusterConfig {
        n_perm: cfg.int("n_perm"),
        threshold_p: cfg.float("threshold_p"),
        tmin: cfg.float("tmin"),
        tmax: cfg.float("tmax"),
        seed: cfg.u64("seed"),
    };
    let alpha = cfg.float("alpha");
    let k = cfg.text("k");

    let mut clusters =
        String::from("target\tcluster\tpolarity\tmass\tp\tn_members\tchannels\tt_start\tt_end\n");
    let mut ar1 = Vec::new();
    let mut n_significant = 0;
    for target in &targets {
        info!("cluster test for '{target}' ({} permutations)", cc.n_perm);
        let test = cluster_permutation_test(&e, target, &control_refs, &adj, &cc)?;
        ar1 = test.ar1.clone();
        n_significant += test.significant(alpha).count();
        for (i, c) in test.clusters.iter().enumerate() {
            let (t0, t1) = c.time_span();
            let names: Vec<&str> = c.channels().iter().map(|&ch| e.channels[ch].as_str()).collect();
            let pol = match c.polarity {
                Polarity::Positive => "+",
                Polarity::Negative => "-",
            };
            clusters.push_str(&format!(
                "{target}\t{i}\t{pol}\t{:.4}\t{:.4}\t{}\t{}\t{:.4}\t{:.4}\n",
                c.mass,
                c.p,
                c.members.len(),
                names.join(","),
                e.time(t0),
                e.time(t1)
            ));
        }
    }
    write(&out.join(CLUSTERS), &clusters)?;

    let tests = targets.len() * regions.len();
    let corrected = alpha / tests.max(1) as f64;
    let mut lrt = format!("target\tk\troi\tchi2\tdf\tp\tsignificant_at_{corrected:.4}\n");
    let d0 = build_design(&e.meta, None, &control_refs)?;
    for target in &targets {
        let d1 = build_design(&e.meta, Some(target), &control_refs)?;
        for region in &regions {
            let y = roi_average(&e, region)?;
            let r = lrt_compare(&y, &d0, &d1, &e.meta.subject)?;
            lrt.push_str(&format!(
                "{target}\t{k}\t{}\t{:.4}\t{}\t{:.6}\t{}\n",
                region.name,
                r.chi2,
                r.df,
                r.p,
                r.p < corrected
            ));
        }
    }
    write(&out.join(LRT), &lrt)?;

    let mean_ar1 = ar1.iter().sum::<f64>() / ar1.len().max(1) as f64;
    info!("mean lag-1 residual autocorrelation {mean_ar1:.2}");
    write_summary(
        &out,
        &[
            ("command", "regress".into()),
            ("epochs_loaded", loaded.to_string()),
            ("epochs_dropped_exhausted", dropped.to_string()),
            ("epochs_used", e.n_epochs().to_string()),
            ("subjects", e.meta.subjects().len().to_string()),
            ("targets", targets.join(",")),
            ("significant_clusters", n_significant.to_string()),
            ("mean_residual_ar1", format!("{mean_ar1:.4}")),
        ],
    )
}

fn stimuli_from(rows: &[MetricRow]) -> Stimuli {
    Stimuli {
        names: METRIC_COLUMNS.iter().map(|s| s.to_string()).collect(),
        rows: rows
            .iter()
            .map(|r| Stimulus {
                sent: r.sent,
                idx: r.idx,
                token: r.token.clone(),
                content: r.content,
                values: metric_values(r).to_vec(),
            })
            .collect(),
    }
}

pub fn synth(cfg: &Config) -> Result<()> {
    let out = prepare_out(cfg)?;
    let effect = match cfg.get("effect_predictor") {
        Some(p) => Some(Effect {
            predictor: p.to_string(),
            channels: cfg.list("effect_channels"),
            tmin: cfg.float("effect_tmin"),
            tmax: cfg.float("effect_tmax"),
            amplitude: cfg.float("effect_amplitude"),
        }),
        None => None,
    };
    let spec = SynthSpec {
        subjects: cfg.int("subjects"),
        epochs_per_subject: cfg.int("epochs_per_subject"),
        montage: montage_by_name(cfg.text("montage"))?,
        sample_rate: cfg.float("sample_rate"),
        tmin: cfg.float("tmin"),
        tmax: cfg.float("tmax"),
        noise_sd: cfg.float("noise_sd"),
        temporal_ar: cfg.float("temporal_ar"),
        subject_sd: cfg.float("subject_sd"),
        predictors: cfg.list("predictors"),
        stimuli: load_metrics(cfg)?.map(|rows| stimuli_from(&rows)),
        effect,
        seed: cfg.u64("seed"),
    };
    let e = synth_epochs(&spec)?;
    let dir = out.join("epochs");
    e.save(&dir)?;
    info!("wrote {} epochs to {}", e.n_epochs(), dir.display());
    write_summary(
        &out,
        &[
            ("command", "synth".into()),
            ("epochs", e.n_epochs().to_string()),
            ("channels", e.n_channels.to_string()),
            ("samples", e.n_times.to_string()),
            ("predictors", e.meta.column_names().join(",")),
        ],
    )
}
