use std::path::Path;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use neural::Checkpoint;
use rnng_core::beam::{parse_corpus, score_partial, BeamConfig, CorpusParse};
use rnng_core::corpus::{parse_bracketed, Tree};
use rnng_core::lm::LanguageModel;
use rnng_core::metrics::{write_metrics_tsv, MetricRow, StopList};
use rnng_core::rnng::{Rnng, Variant};

use crate::config::{Config, ConfigError};
use crate::io::{load_sentences, load_trees, prepare_out, read, write, write_summary, yield_of};

pub const METRICS: &str = "metrics.tsv";
pub const TREES: &str = "trees.txt";
pub const SWEEP: &str = "sweep.tsv";

fn load_model(cfg: &Config) -> Result<Rnng> {
    let path = cfg.path("model").unwrap();
    let ck = Checkpoint::load(&path).with_context(|| format!("loading {}", path.display()))?;
    let model = Rnng::from_checkpoint(&ck).with_context(|| format!("reading model {}", path.display()))?;
    if let Some(v) = cfg.get("variant") {
        let want: Variant = v.parse().map_err(anyhow::Error::msg)?;
        if want != model.variant() {
            bail!("--variant {want} requested but {} holds a {} model", path.display(), model.variant());
        }
    }
    Ok(model)
}

/// Sentences to parse and, when available, their gold trees.
fn inputs(cfg: &Config) -> Result<(Vec<Vec<String>>, Option<Vec<Tree>>)> {
    let gold = cfg.path("gold").map(|p| load_trees(&p)).transpose()?;
    let sentences = match (cfg.path("input"), &gold) {
        (Some(p), _) => load_sentences(&p)?,
        (None, Some(g)) => g.iter().map(yield_of).collect(),
        (None, None) => return Err(ConfigError(vec!["one of `input` or `gold` is required".into()]).into()),
    };
    if let Some(g) = &gold {
        if g.len() != sentences.len() {
            bail!("{} input sentences but {} gold trees", sentences.len(), g.len());
        }
        for (i, (s, t)) in sentences.iter().zip(g).enumerate() {
            if *s != yield_of(t) {
                bail!("sentence {i} differs from the yield of its gold tree");
            }
        }
    }
    Ok((sentences, gold))
}

fn stop_list(cfg: &Config) -> Result<StopList> {
    Ok(match cfg.path("stop_words") {
        Some(p) => StopList::parse(&read(&p)?),
        None => StopList::default(),
    })
}

fn beam_config(cfg: &Config, k: usize) -> Result<BeamConfig> {
    let mut b = BeamConfig::with_k(k);
    if let Some(w) = cfg.opt_int("word_beam") {
        b.k_word = w;
    }
    if let Some(f) = cfg.opt_int("fast_track") {
        b.k_ft = f;
    }
    b.max_iterations = cfg.int("max_iterations");
    b.validate().map_err(|e| ConfigError(vec![e.to_string()]))?;
    Ok(b)
}

fn metrics_text(rows: &[MetricRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_metrics_tsv(&mut buf, rows)?;
    Ok(String::from_utf8(buf)?)
}

fn report_failures(p: &CorpusParse) {
    for (i, msg) in &p.failures {
        warn!("sentence {i}: no parse ({msg})");
    }
    if p.exhausted_words > 0 {
        warn!("{} words hit the iteration cap", p.exhausted_words);
    }
}

fn f1_fields(p: &CorpusParse) -> Vec<(&'static str, String)> {
    match &p.f1 {
        Some(s) => vec![
            ("f1", format!("{:.2}", s.f1())),
            ("precision", format!("{:.2}", s.precision())),
            ("recall", format!("{:.2}", s.recall())),
        ],
        None => vec![("f1", "-".into())],
    }
}

pub fn parse(cfg: &Config) -> Result<()> {
    let out = prepare_out(cfg)?;
    let model = load_model(cfg)?;
    let (sentences, gold) = inputs(cfg)?;
    let beam = beam_config(cfg, cfg.int("k"))?;
    info!(
        "parsing {} sentences with k = {}, word beam {}, fast-track {}",
        sentences.len(),
        beam.k,
        beam.k_word,
        beam.k_ft
    );
    let p = parse_corpus(&model, &sentences, gold.as_deref(), &beam, &stop_list(cfg)?)?;
    report_failures(&p);
    if cfg.flag("emit_metrics") {
        write(&out.join(METRICS), &metrics_text(&p.rows)?)?;
    }
    if cfg.flag("emit_trees") {
        let mut s = String::new();
        for t in &p.trees {
            if let Some(t) = t {
                s.push_str(&t.to_string());
            }
            s.push('\n');
        }
        write(&out.join(TREES), &s)?;
    }
    let mut summary = vec![
        ("command", "parse".to_string()),
        ("variant", model.variant().to_string()),
        ("sentences", sentences.len().to_string()),
        ("k", beam.k.to_string()),
        ("word_beam", beam.k_word.to_string()),
        ("fast_track", beam.k_ft.to_string()),
        ("failures", p.failures.len().to_string()),
        ("exhausted_words", p.exhausted_words.to_string()),
    ];
    summary.extend(f1_fields(&p));
    write_summary(&out, &summary)
}

pub fn sweep(cfg: &Config) -> Result<()> {
    let out = prepare_out(cfg)?;
    let model = load_model(cfg)?;
    let (sentences, gold) = inputs(cfg)?;
    let stop = stop_list(cfg)?;
    let ks = match cfg.opt_int("k") {
        Some(k) => vec![k],
        None => cfg.int_list("ks"),
    };
    let mut table = String::from("k\tword_beam\tfast_track\tf1\tfailures\texhausted_words\n");
    for k in ks {
        let beam = beam_config(cfg, k)?;
        info!("sweep: k = {k}");
        let p = parse_corpus(&model, &sentences, gold.as_deref(), &beam, &stop)?;
        report_failures(&p);
        write(&out.join(format!("metrics_k{k}.tsv")), &metrics_text(&p.rows)?)?;
        let f1 = p.f1.as_ref().map_or("-".into(), |s| format!("{:.2}", s.f1()));
        table.push_str(&format!(
            "{}\t{}\t{}\t{f1}\t{}\t{}\n",
            beam.k,
            beam.k_word,
            beam.k_ft,
            p.failures.len(),
            p.exhausted_words
        ));
    }
    write(&out.join(SWEEP), &table)?;
    write_summary(
        &out,
        &[
            ("command", "sweep".into()),
            ("variant", model.variant().to_string()),
            ("sentences", sentences.len().to_string()),
        ],
    )
}

pub fn lm_surprisal(cfg: &Config) -> Result<()> {
    let out = prepare_out(cfg)?;
    let path = cfg.path("model").unwrap();
    let ck = Checkpoint::load(&path).with_context(|| format!("loading {}", path.display()))?;
    let lm = LanguageModel::from_checkpoint(&ck).with_context(|| format!("reading model {}", path.display()))?;
    let sentences = load_sentences(&cfg.path("input").unwrap())?;
    let mut s = String::from("sent\tidx\ttoken\tsurprisal\n");
    for (i, toks) in sentences.iter().enumerate() {
        for (j, (tok, v)) in toks.iter().zip(lm.surprisal_series(toks)?).enumerate() {
            s.push_str(&format!("{i}\t{j}\t{tok}\t{v}\n"));
        }
    }
    write(&out.join("lm_surprisal.tsv"), &s)?;
    write_summary(
        &out,
        &[
            ("command", "lm-surprisal".into()),
            ("sentences", sentences.len().to_string()),
            ("perplexity", format!("{:.4}", lm.perplexity(&sentences)?)),
        ],
    )
}

/// Predicted trees one per line; a blank line marks a failed parse.
fn read_predictions(path: &Path) -> Result<Vec<Option<Tree>>> {
    read(path)?
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if l.trim().is_empty() {
                Ok(None)
            } else {
                parse_bracketed(l)
                    .map(Some)
                    .with_context(|| format!("{}: line {}", path.display(), i + 1))
            }
        })
        .collect()
}

pub fn score_f1(cfg: &Config) -> Result<()> {
    let gold = load_trees(&cfg.path("gold").unwrap())?;
    let pred = read_predictions(&cfg.path("pred").unwrap())?;
    let score = score_partial(&gold, &pred)?;
    println!("{}", score.summary());
    if cfg.get("out").is_some() {
        let out = prepare_out(cfg)?;
        write(&out.join("f1_sentences.tsv"), &score.per_sentence_tsv())?;
        write_summary(
            &out,
            &[
                ("command", "score-f1".into()),
                ("sentences", gold.len().to_string()),
                ("failures", pred.iter().filter(|p| p.is_none()).count().to_string()),
                ("f1", format!("{:.2}", score.f1())),
                ("precision", format!("{:.2}", score.precision())),
                ("recall", format!("{:.2}", score.recall())),
            ],
        )?;
    }
    Ok(())
}
