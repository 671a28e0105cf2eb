//! Gradient checks of the LSTM step, the composition function and a full
//! sentence loss.

use anyhow::Result;
use neural::{finite_diff_check, GradCheckOptions, GradCheckReport, Init, LstmCell, ParamSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rnng_core::corpus::{toy_treebank, Vocab};
use rnng_core::rnng::{Rnng, RnngConfig, Variant};

#[derive(Debug, Clone)]
pub struct GradRow {
    pub check: &'static str,
    pub seed: u64,
    pub report: GradCheckReport,
}

fn lstm_step(seed: u64, opts: GradCheckOptions) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (nin, nh) = (rng.random_range(2..6), rng.random_range(2..7));
    let mut ps = ParamSet::new();
    let cell = LstmCell::new(&mut ps, "lstm", nin, nh, &Init { seed, scale: 0.5 })?;
    let mut vec = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    let (x, h, c) = (vec(nin), vec(nh), vec(nh));
    let pick = seed as usize % nh;
    Ok(finite_diff_check(
        &ps,
        |g| {
            let (x, h, c) = (g.input(x.clone()), g.input(h.clone()), g.input(c.clone()));
            let (h1, c1) = cell.step(g, x, h, c)?;
            let both = g.concat(&[h1, c1]);
            let s = g.log_softmax(both, None)?;
            g.pick(s, pick)
        },
        opts,
    )?)
}

/// Runs every check for `seeds` seeds.
pub fn gradient_suite(seeds: u64, tolerance: f64) -> Result<Vec<GradRow>> {
    let trees = toy_treebank(20, 77);
    let vocab = Vocab::build(&trees, 1)?;
    let mut rows = Vec::new();
    for seed in 0..seeds {
        let opts = GradCheckOptions {
            seed,
            tolerance,
            coords_per_param: 8,
            ..GradCheckOptions::default()
        };
        rows.push(GradRow {
            check: "lstm-step",
            seed,
            report: lstm_step(seed, opts)?,
        });
        let small = |variant| RnngConfig {
            embed_size: 6,
            hidden_size: 8,
            mlp_hidden: 8,
            init_scale: 0.3,
            ..RnngConfig::small(variant, seed)
        };
        let full = Rnng::new(small(Variant::Full), vocab.clone())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0);
        let mother = rng.random_range(0..full.num_nonterminals());
        let words: Vec<usize> = (0..rng.random_range(1..5))
            .map(|_| rng.random_range(0..vocab.num_words()))
            .collect();
        rows.push(GradRow {
            check: "composition",
            seed,
            report: full.grad_check_composition(mother, &words, opts)?,
        });
        let variant = if seed % 2 == 0 { Variant::Full } else { Variant::NoComp };
        let m = Rnng::new(small(variant), vocab.clone())?;
        let o = m.oracle(&trees[seed as usize % trees.len()])?;
        rows.push(GradRow {
            check: "sentence",
            seed,
            report: m.grad_check(&o, opts)?,
        });
    }
    Ok(rows)
}
