use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::cluster::permutation_seed;
use crate::epochs::{samples_for, EpochMeta, EpochSet};
use crate::error::{ErpError, Result};
use crate::montage::{standard61, Montage};

/// `amplitude * predictor` added on `channels` over `[tmin, tmax]` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Effect {
    pub predictor: String,
    pub channels: Vec<String>,
    pub tmin: f64,
    pub tmax: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stimulus {
    pub sent: usize,
    pub idx: usize,
    pub token: String,
    pub content: bool,
    pub values: Vec<f64>,
}

/// Word-level predictors shared by every subject.
#[derive(Debug, Clone, PartialEq)]
pub struct Stimuli {
    pub names: Vec<String>,
    pub rows: Vec<Stimulus>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub subjects: usize,
    /// Ignored when `stimuli` is set; every subject then sees every row.
    pub epochs_per_subject: usize,
    pub montage: Montage,
    pub sample_rate: f64,
    pub tmin: f64,
    pub tmax: f64,
    pub noise_sd: f64,
    /// AR(1) coefficient of the noise along time within an epoch.
    pub temporal_ar: f64,
    /// Standard deviation of each subject's per-channel offset.
    pub subject_sd: f64,
    /// Names of independent standard-normal predictors, drawn afresh for
    /// each subject; used when `stimuli` is unset.
    pub predictors: Vec<String>,
    pub stimuli: Option<Stimuli>,
    pub effect: Option<Effect>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            subjects: 20,
            epochs_per_subject: 100,
            montage: standard61(),
            sample_rate: 500.0,
            tmin: -0.3,
            tmax: 1.0,
            noise_sd: 1.0,
            temporal_ar: 0.8,
            subject_sd: 0.5,
            predictors: vec!["target".into(), "control".into()],
            stimuli: None,
            effect: None,
            seed: 0,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ErpError::Config(m));
        if self.subjects == 0 || self.montage.channels.is_empty() {
            return bad("need at least one subject and one channel".into());
        }
        if self.stimuli.as_ref().map_or(self.epochs_per_subject == 0, |s| s.rows.is_empty()) {
            return bad("need at least one epoch per subject".into());
        }
        if !(self.sample_rate > 0.0 && self.tmax > self.tmin) {
            return bad("need a positive sample rate and tmax > tmin".into());
        }
        if !(self.noise_sd >= 0.0 && self.subject_sd >= 0.0 && self.temporal_ar.abs() < 1.0) {
            return bad("noise sds must be non-negative and |temporal_ar| < 1".into());
        }
        if let Some(s) = &self.stimuli {
            if let Some(r) = s.rows.iter().find(|r| r.values.len() != s.names.len()) {
                return bad(format!("stimulus {}:{} has {} values for {} names", r.sent, r.idx, r.values.len(), s.names.len()));
            }
        }
        if let Some(e) = &self.effect {
            if !self.predictor_names().contains(&e.predictor) {
                return bad(format!("effect predictor '{}' is not generated", e.predictor));
            }
            if let Some(c) = e.channels.iter().find(|c| !self.montage.channels.contains(c)) {
                return bad(format!("effect channel '{c}' is not in the montage"));
            }
            if e.tmin > e.tmax || e.tmin < self.tmin || e.tmax > self.tmax {
                return bad(format!("effect window {}..{} s is outside the epoch", e.tmin, e.tmax));
            }
        }
        Ok(())
    }

    fn predictor_names(&self) -> Vec<String> {
        match &self.stimuli {
            Some(s) => s.names.clone(),
            None => self.predictors.clone(),
        }
    }
}

/// Gaussian-noise epochs, optionally with an injected predictor effect.
/// Each subject draws from its own seeded stream, so output does not
/// depend on thread scheduling.
pub fn synth_epochs(spec: &SynthSpec) -> Result<EpochSet> {
    spec.validate()?;
    let n_ch = spec.montage.channels.len();
    let n_t = samples_for(spec.tmin, spec.tmax, spec.sample_rate);
    let per = spec.stimuli.as_ref().map_or(spec.epochs_per_subject, |s| s.rows.len());
    let names = spec.predictor_names();
    let epoch_len = n_ch * n_t;

    let mut set = EpochSet {
        data: vec![0.0; spec.subjects * per * epoch_len],
        n_channels: n_ch,
        n_times: n_t,
        sample_rate: spec.sample_rate,
        tmin: spec.tmin,
        channels: spec.montage.channels.clone(),
        adjacency: spec.montage.adjacency.clone(),
        meta: EpochMeta::default(),
    };
    let template = match &spec.effect {
        Some(e) => {
            let w = set.window(e.tmin, e.tmax)?;
            let k = names.iter().position(|n| *n == e.predictor).unwrap();
            let chans: Vec<usize> = e.channels.iter().filter_map(|c| set.channel_index(c)).collect();
            Some((k, chans, w, e.amplitude))
        }
        None => None,
    };

    let metas: Vec<(Vec<Vec<f64>>, Vec<bool>)> = set
        .data
        .par_chunks_mut(per * epoch_len)
        .enumerate()
        .map(|(s, block)| {
            let mut rng = ChaCha8Rng::seed_from_u64(permutation_seed(spec.seed, usize::MAX, s));
            let offsets: Vec<f64> = (0..n_ch).map(|_| spec.subject_sd * rng.sample::<f64, _>(StandardNormal)).collect();
            let mut values = Vec::with_capacity(per);
            let mut content = Vec::with_capacity(per);
            for i in 0..per {
                let row: Vec<f64> = match &spec.stimuli {
                    Some(st) => st.rows[i].values.clone(),
                    None => names.iter().map(|_| rng.sample(StandardNormal)).collect(),
                };
                content.push(match &spec.stimuli {
                    Some(st) => st.rows[i].content,
                    None => rng.random_bool(0.5),
                });
                let ep = &mut block[i * epoch_len..(i + 1) * epoch_len];
                let innov = (1.0 - spec.temporal_ar * spec.temporal_ar).sqrt();
                for c in 0..n_ch {
                    let mut x: f64 = rng.sample(StandardNormal);
                    for t in 0..n_t {
                        if t > 0 {
                            x = spec.temporal_ar * x + innov * rng.sample::<f64, _>(StandardNormal);
                        }
                        ep[c * n_t + t] = offsets[c] + spec.noise_sd * x;
                    }
                }
                if let Some((k, chans, w, amp)) = &template {
                    let a = amp * row[*k];
                    for &c in chans {
                        ep[c * n_t + w.start..c * n_t + w.end].iter_mut().for_each(|v| *v += a);
                    }
                }
                values.push(row);
            }
            (values, content)
        })
        .collect();

    let m = &mut set.meta;
    m.columns = names.iter().map(|n| (n.clone(), Vec::new())).collect();
    for (s, (values, content)) in metas.into_iter().enumerate() {
        for (i, row) in values.into_iter().enumerate() {
            m.subject.push(format!("s{:02}", s + 1));
            match &spec.stimuli {
                Some(st) => {
                    m.sent.push(st.rows[i].sent);
                    m.idx.push(st.rows[i].idx);
                    m.token.push(st.rows[i].token.clone());
                }
                None => {
                    m.sent.push(i / 10);
                    m.idx.push(i % 10);
                    m.token.push(format!("w{i}"));
                }
            }
            for (col, v) in m.columns.iter_mut().zip(row) {
                col.1.push(v);
            }
        }
        m.content.extend(content);
    }
    set.validate()?;
    Ok(set)
}
