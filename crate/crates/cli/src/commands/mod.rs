use anyhow::Result;

use crate::config::{key, Config, Key, Kind};
use crate::{Command, Common, Overrides};

mod erp;
mod parse;
mod report;
mod train;

pub use report::pipeline_report;

const VARIANTS: &[&str] = &["full", "no-comp"];

const TRAIN_RNNG: &[Key] = &[
    key("train", Kind::Text, None),
    key("dev", Kind::Text, Some("")),
    key("out", Kind::Text, None),
    key("seed", Kind::Int, Some("1")),
    key("variant", Kind::Choice(VARIANTS), Some("full")),
    key("epochs", Kind::Int, Some("50")),
    key("batch_size", Kind::Int, Some("10")),
    key("lr", Kind::Float, Some("0.01")),
    key("clip", Kind::Float, Some("5")),
    key("embed", Kind::Int, Some("24")),
    key("hidden", Kind::Int, Some("32")),
    key("mlp", Kind::Int, Some("32")),
    key("init_scale", Kind::Float, Some("0.1")),
    key("min_count", Kind::Int, Some("1")),
    key("max_open", Kind::Int, Some("40")),
];

const TRAIN_LM: &[Key] = &[
    key("train", Kind::Text, None),
    key("dev", Kind::Text, Some("")),
    key("out", Kind::Text, None),
    key("seed", Kind::Int, Some("1")),
    key("epochs", Kind::Int, Some("50")),
    key("batch_size", Kind::Int, Some("10")),
    key("lr", Kind::Float, Some("0.01")),
    key("clip", Kind::Float, Some("5")),
    key("embed", Kind::Int, Some("24")),
    key("hidden", Kind::Int, Some("32")),
    key("init_scale", Kind::Float, Some("0.1")),
    key("min_count", Kind::Int, Some("1")),
];

const PARSE: &[Key] = &[
    key("model", Kind::Text, None),
    key("variant", Kind::Choice(VARIANTS), Some("")),
    key("input", Kind::Text, Some("")),
    key("gold", Kind::Text, Some("")),
    key("out", Kind::Text, None),
    key("seed", Kind::Int, Some("1")),
    key("k", Kind::Int, Some("100")),
    key("word_beam", Kind::Int, Some("")),
    key("fast_track", Kind::Int, Some("")),
    key("max_iterations", Kind::Int, Some("80")),
    key("stop_words", Kind::Text, Some("")),
    key("emit_metrics", Kind::Bool, Some("false")),
    key("emit_trees", Kind::Bool, Some("false")),
];

const SWEEP: &[Key] = &[
    key("model", Kind::Text, None),
    key("variant", Kind::Choice(VARIANTS), Some("")),
    key("input", Kind::Text, Some("")),
    key("gold", Kind::Text, Some("")),
    key("out", Kind::Text, None),
    key("seed", Kind::Int, Some("1")),
    key("ks", Kind::IntList, Some("10,20,50,100,200")),
    key("k", Kind::Int, Some("")),
    key("word_beam", Kind::Int, Some("")),
    key("fast_track", Kind::Int, Some("")),
    key("max_iterations", Kind::Int, Some("80")),
    key("stop_words", Kind::Text, Some("")),
];

const LM_SURPRISAL: &[Key] = &[
    key("model", Kind::Text, None),
    key("input", Kind::Text, None),
    key("out", Kind::Text, None),
    key("seed", Kind::Int, Some("1")),
];

const SCORE_F1: &[Key] = &[
    key("gold", Kind::Text, None),
    key("pred", Kind::Text, None),
    key("out", Kind::Text, Some("")),
    key("seed", Kind::Int, Some("1")),
];

const REGRESS: &[Key] = &[
    key("epochs", Kind::Text, None),
    key("metrics", Kind::Text, Some("")),
    key("target", Kind::Text, None),
    key("controls", Kind::Text, Some("")),
    key("out", Kind::Text, None),
    key("seed", Kind::Int, Some("1")),
    key("n_perm", Kind::Int, Some("1000")),
    key("threshold_p", Kind::Float, Some("0.05")),
    key("alpha", Kind::Float, Some("0.05")),
    key("tmin", Kind::Float, Some("0")),
    key("tmax", Kind::Float, Some("1")),
    key("roi", Kind::Text, Some("N400,P600,ANT")),
    key("roi_channels", Kind::Text, Some("")),
    key("roi_tmin", Kind::Float, Some("")),
    key("roi_tmax", Kind::Float, Some("")),
    key("content_only", Kind::Bool, Some("true")),
    key("k", Kind::Text, Some("-")),
];

const SYNTH: &[Key] = &[
    key("out", Kind::Text, None),
    key("seed", Kind::Int, Some("1")),
    key("metrics", Kind::Text, Some("")),
    key("subjects", Kind::Int, Some("20")),
    key("epochs_per_subject", Kind::Int, Some("100")),
    key("montage", Kind::Choice(&["standard61", "grid16"]), Some("standard61")),
    key("sample_rate", Kind::Float, Some("500")),
    key("tmin", Kind::Float, Some("-0.3")),
    key("tmax", Kind::Float, Some("1")),
    key("noise_sd", Kind::Float, Some("1")),
    key("temporal_ar", Kind::Float, Some("0.8")),
    key("subject_sd", Kind::Float, Some("0.5")),
    key("predictors", Kind::Text, Some("target,control")),
    key("effect_predictor", Kind::Text, Some("")),
    key("effect_channels", Kind::Text, Some("")),
    key("effect_tmin", Kind::Float, Some("0.3")),
    key("effect_tmax", Kind::Float, Some("0.5")),
    key("effect_amplitude", Kind::Float, Some("0")),
];

const GRAD_CHECK: &[Key] = &[
    key("out", Kind::Text, Some("")),
    key("seed", Kind::Int, Some("1")),
    key("seeds", Kind::Int, Some("20")),
    key("tolerance", Kind::Float, Some("1e-4")),
];

fn resolve(name: &str, schema: &[Key], common: &Common, build: impl FnOnce(&mut Overrides)) -> Result<Config> {
    let mut o = Overrides::from_common(common)?;
    build(&mut o);
    Ok(Config::resolve(name, schema, common.config.as_deref(), &o.0)?)
}

pub fn dispatch(cmd: &Command) -> Result<()> {
    match cmd {
        Command::TrainRnng {
            common,
            train,
            dev,
            variant,
            epochs,
            batch_size,
            lr,
        } => {
            let cfg = resolve("train-rnng", TRAIN_RNNG, common, |o| {
                o.opt("train", train.as_ref());
                o.opt("dev", dev.as_ref());
                o.opt("variant", variant.as_ref());
                o.opt("epochs", epochs.as_ref());
                o.opt("batch_size", batch_size.as_ref());
                o.opt("lr", lr.as_ref());
            })?;
            train::train_rnng(&cfg)
        }
        Command::TrainLm {
            common,
            train,
            dev,
            epochs,
            batch_size,
            lr,
        } => {
            let cfg = resolve("train-lm", TRAIN_LM, common, |o| {
                o.opt("train", train.as_ref());
                o.opt("dev", dev.as_ref());
                o.opt("epochs", epochs.as_ref());
                o.opt("batch_size", batch_size.as_ref());
                o.opt("lr", lr.as_ref());
            })?;
            train::train_lm(&cfg)
        }
        Command::Parse {
            common,
            beam,
            variant,
            emit_metrics,
            emit_trees,
        } => {
            let cfg = resolve("parse", PARSE, common, |o| {
                o.beam(beam);
                o.opt("variant", variant.as_ref());
                o.flag("emit_metrics", *emit_metrics);
                o.flag("emit_trees", *emit_trees);
            })?;
            parse::parse(&cfg)
        }
        Command::Sweep { common, beam, ks } => {
            let cfg = resolve("sweep", SWEEP, common, |o| {
                o.beam(beam);
                o.opt("ks", ks.as_ref());
            })?;
            parse::sweep(&cfg)
        }
        Command::LmSurprisal { common, model, input } => {
            let cfg = resolve("lm-surprisal", LM_SURPRISAL, common, |o| {
                o.opt("model", model.as_ref());
                o.opt("input", input.as_ref());
            })?;
            parse::lm_surprisal(&cfg)
        }
        Command::ScoreF1 { common, gold, pred } => {
            let cfg = resolve("score-f1", SCORE_F1, common, |o| {
                o.opt("gold", gold.as_ref());
                o.opt("pred", pred.as_ref());
            })?;
            parse::score_f1(&cfg)
        }
        Command::Regress {
            common,
            epochs,
            metrics,
            target,
            controls,
            n_perm,
            threshold_p,
            roi,
        } => {
            let cfg = resolve("regress", REGRESS, common, |o| {
                o.opt("epochs", epochs.as_ref());
                o.opt("metrics", metrics.as_ref());
                o.opt("target", target.as_ref());
                o.opt("controls", controls.as_ref());
                o.opt("n_perm", n_perm.as_ref());
                o.opt("threshold_p", threshold_p.as_ref());
                o.opt("roi", roi.as_ref());
            })?;
            erp::regress(&cfg)
        }
        Command::Synth { common, metrics } => {
            let cfg = resolve("synth", SYNTH, common, |o| o.opt("metrics", metrics.as_ref()))?;
            erp::synth(&cfg)
        }
        Command::GradCheck {
            common,
            seeds,
            tolerance,
        } => {
            let cfg = resolve("grad-check", GRAD_CHECK, common, |o| {
                o.opt("seeds", seeds.as_ref());
                o.opt("tolerance", tolerance.as_ref());
            })?;
            train::grad_check(&cfg)
        }
        Command::Report { dir } => {
            print!("{}", pipeline_report(dir)?);
            Ok(())
        }
    }
}
