use rayon::prelude::*;

use super::{parse_sentence, BeamConfig, BeamError};
use crate::corpus::Tree;
use crate::metrics::{bracket_f1, labeled_spans, metric_rows, BracketScore, MetricRow, MetricsError, StopList};
use crate::rnng::Rnng;

/// Results of parsing a list of sentences with one beam setting.
#[derive(Debug, Clone)]
pub struct CorpusParse {
    pub trees: Vec<Option<Tree>>,
    pub rows: Vec<MetricRow>,
    /// `(sentence, message)` for sentences without a parse.
    pub failures: Vec<(usize, String)>,
    /// Words whose search hit the iteration cap.
    pub exhausted_words: usize,
    /// Present when gold trees were supplied. Failed sentences contribute
    /// their gold brackets and no predicted ones.
    pub f1: Option<BracketScore>,
}

/// Parses every sentence (in parallel; output order follows input order).
pub fn parse_corpus(
    model: &Rnng,
    sentences: &[Vec<String>],
    gold: Option<&[Tree]>,
    cfg: &BeamConfig,
    stop: &StopList,
) -> Result<CorpusParse, BeamError> {
    cfg.validate()?;
    let results: Vec<Result<(Tree, Vec<MetricRow>), String>> = sentences
        .par_iter()
        .enumerate()
        .map(|(i, toks)| {
            let parsed = parse_sentence(model, toks, cfg).map_err(|e| e.to_string())?;
            let rows = metric_rows(i, toks, &parsed.records, stop).map_err(|e| e.to_string())?;
            Ok((parsed.tree, rows))
        })
        .collect();
    let mut out = CorpusParse {
        trees: Vec::with_capacity(sentences.len()),
        rows: Vec::new(),
        failures: Vec::new(),
        exhausted_words: 0,
        f1: None,
    };
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok((tree, rows)) => {
                out.exhausted_words += rows.iter().filter(|r| r.exhausted).count();
                out.rows.extend(rows);
                out.trees.push(Some(tree));
            }
            Err(msg) => {
                out.failures.push((i, msg));
                out.trees.push(None);
            }
        }
    }
    if let Some(gold) = gold {
        out.f1 = Some(score_partial(gold, &out.trees).map_err(|e| BeamError::Config(e.to_string()))?);
    }
    Ok(out)
}

/// Bracket counts where `None` predictions contribute gold brackets only.
pub fn score_partial(gold: &[Tree], predicted: &[Option<Tree>]) -> Result<BracketScore, MetricsError> {
    if gold.len() != predicted.len() {
        return Err(MetricsError::CountMismatch {
            gold: gold.len(),
            predicted: predicted.len(),
        });
    }
    let mut total = BracketScore::default();
    for (i, (g, p)) in gold.iter().zip(predicted).enumerate() {
        let (m, gc, pc) = match p {
            Some(p) => {
                let s = bracket_f1(std::slice::from_ref(g), std::slice::from_ref(p))
                    .map_err(|_| MetricsError::YieldMismatch { sentence: i })?;
                (s.matched, s.gold, s.predicted)
            }
            None => (0, labeled_spans(g).len(), 0),
        };
        total.matched += m;
        total.gold += gc;
        total.predicted += pc;
        total.per_sentence.push((m, gc, pc));
    }
    Ok(total)
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub config: BeamConfig,
    pub parse: CorpusParse,
}

/// One corpus parse per action beam size; word beam and fast-track count
/// follow the defaults for each `k`.
pub fn beam_sweep(
    model: &Rnng,
    sentences: &[Vec<String>],
    gold: Option<&[Tree]>,
    ks: &[usize],
    max_iterations: usize,
    stop: &StopList,
) -> Result<Vec<SweepReport>, BeamError> {
    ks.iter()
        .map(|&k| {
            let config = BeamConfig {
                max_iterations,
                ..BeamConfig::with_k(k)
            };
            Ok(SweepReport {
                config,
                parse: parse_corpus(model, sentences, gold, &config, stop)?,
            })
        })
        .collect()
}
