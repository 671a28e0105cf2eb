use anyhow::{bail, Context, Result};
use log::info;
use neural::AdamConfig;
use rnng_core::corpus::{Tree, Vocab};
use rnng_core::lm::{LanguageModel, LmConfig, LmTrainer};
use rnng_core::metrics::action_perplexity;
use rnng_core::rnng::{Limits, Rnng, RnngConfig, RnngTrainer, Variant};

use crate::config::Config;
use crate::gradient::gradient_suite;
use crate::io::{load_sentences, load_trees, prepare_out, write, write_summary};

pub const RNNG_MODEL: &str = "model.json";
pub const LM_MODEL: &str = "lm.json";
pub const LOSS: &str = "loss.tsv";

fn adam(cfg: &Config) -> AdamConfig {
    AdamConfig {
        learning_rate: cfg.float("lr"),
        clip: cfg.float("clip"),
        ..AdamConfig::default()
    }
}

pub fn train_rnng(cfg: &Config) -> Result<()> {
    let out = prepare_out(cfg)?;
    let trees = load_trees(&cfg.path("train").unwrap())?;
    let eval_set = match cfg.path("dev") {
        Some(p) => ("dev", load_trees(&p)?),
        None => ("train", trees.clone()),
    };
    let variant: Variant = cfg.text("variant").parse().map_err(anyhow::Error::msg)?;
    let seed = cfg.u64("seed");
    let model_cfg = RnngConfig {
        embed_size: cfg.int("embed"),
        hidden_size: cfg.int("hidden"),
        mlp_hidden: cfg.int("mlp"),
        variant,
        limits: Limits {
            max_open: cfg.int("max_open"),
            ..Limits::default()
        },
        seed,
        init_scale: cfg.float("init_scale"),
    };
    let mut model = Rnng::new(model_cfg, Vocab::build(&trees, cfg.int("min_count"))?)?;
    let data = model.oracles(&trees)?;
    let mut trainer = RnngTrainer::new(adam(cfg), cfg.int("batch_size").max(1), seed);
    let first = action_perplexity(&model, &eval_set.1)?;
    info!("epoch 0: {} action perplexity {first:.4}", eval_set.0);
    let mut loss = format!("epoch\ttrain_loss\t{}_action_perplexity\n0\t-\t{first:?}\n", eval_set.0);
    let mut last = first;
    for epoch in 1..=cfg.int("epochs") {
        let l = trainer.epoch(&mut model, &data)?;
        last = action_perplexity(&model, &eval_set.1)?;
        info!("epoch {epoch}: loss {l:.4}, {} action perplexity {last:.4}", eval_set.0);
        loss.push_str(&format!("{epoch}\t{l:?}\t{last:?}\n"));
    }
    write(&out.join(LOSS), &loss)?;
    model
        .to_checkpoint()
        .save(out.join(RNNG_MODEL))
        .context("saving checkpoint")?;
    write_summary(
        &out,
        &[
            ("command", "train-rnng".into()),
            ("variant", variant.to_string()),
            ("sentences", trees.len().to_string()),
            ("epochs", cfg.int("epochs").to_string()),
            ("initial_action_perplexity", format!("{first:.4}")),
            ("final_action_perplexity", format!("{last:.4}")),
            ("perplexity_set", eval_set.0.into()),
        ],
    )
}

/// Flat one-constituent trees, so the vocabulary builder can read plain
/// sentences.
fn as_trees(sentences: &[Vec<String>]) -> Vec<Tree> {
    sentences
        .iter()
        .map(|s| Tree::node("S", s.iter().map(|w| Tree::leaf(w.as_str())).collect()))
        .collect()
}

pub fn train_lm(cfg: &Config) -> Result<()> {
    let out = prepare_out(cfg)?;
    let train = load_sentences(&cfg.path("train").unwrap())?;
    let eval_set = match cfg.path("dev") {
        Some(p) => ("dev", load_sentences(&p)?),
        None => ("train", train.clone()),
    };
    let seed = cfg.u64("seed");
    let lm_cfg = LmConfig {
        embed_size: cfg.int("embed"),
        hidden_size: cfg.int("hidden"),
        seed,
        init_scale: cfg.float("init_scale"),
    };
    let mut model = LanguageModel::new(lm_cfg, Vocab::build(&as_trees(&train), cfg.int("min_count"))?)?;
    let data: Vec<Vec<usize>> = train.iter().map(|s| model.encode(s)).collect();
    let mut trainer = LmTrainer::new(adam(cfg), cfg.int("batch_size").max(1), seed);
    let first = model.perplexity(&eval_set.1)?;
    info!("epoch 0: {} perplexity {first:.4}", eval_set.0);
    let mut loss = format!("epoch\ttrain_loss\t{}_perplexity\n0\t-\t{first:?}\n", eval_set.0);
    let mut last = first;
    for epoch in 1..=cfg.int("epochs") {
        let l = trainer.epoch(&mut model, &data)?;
        last = model.perplexity(&eval_set.1)?;
        info!("epoch {epoch}: loss {l:.4}, {} perplexity {last:.4}", eval_set.0);
        loss.push_str(&format!("{epoch}\t{l:?}\t{last:?}\n"));
    }
    write(&out.join(LOSS), &loss)?;
    model.to_checkpoint().save(out.join(LM_MODEL)).context("saving checkpoint")?;
    write_summary(
        &out,
        &[
            ("command", "train-lm".into()),
            ("sentences", train.len().to_string()),
            ("epochs", cfg.int("epochs").to_string()),
            ("initial_perplexity", format!("{first:.4}")),
            ("final_perplexity", format!("{last:.4}")),
            ("perplexity_set", eval_set.0.into()),
        ],
    )
}

pub fn grad_check(cfg: &Config) -> Result<()> {
    let rows = gradient_suite(cfg.u64("seeds"), cfg.float("tolerance"))?;
    let mut table = String::from("check\tseed\tmax_rel_error\tworst_param\tanalytic\tnumeric\tcoords\tpassed\n");
    for r in &rows {
        table.push_str(&format!(
            "{}\t{}\t{:.3e}\t{}\t{:.6e}\t{:.6e}\t{}\t{}\n",
            r.check,
            r.seed,
            r.report.max_rel_error,
            r.report.worst_param,
            r.report.worst_analytic,
            r.report.worst_numeric,
            r.report.coords_checked,
            r.report.passed()
        ));
    }
    print!("{table}");
    if cfg.get("out").is_some() {
        let out = prepare_out(cfg)?;
        write(&out.join("gradcheck.tsv"), &table)?;
    }
    let failed = rows.iter().filter(|r| !r.report.passed()).count();
    if failed > 0 {
        bail!("{failed} of {} gradient checks exceeded the tolerance", rows.len());
    }
    Ok(())
}
