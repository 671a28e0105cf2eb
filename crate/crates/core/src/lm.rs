//! Word-level LSTM language model, the non-syntactic baseline.
//!
//! Sentences are read after a begin marker and must predict an end marker,
//! which counts as one event in perplexity but never appears in surprisal
//! series.

use std::collections::BTreeMap;

use neural::{Adam, AdamConfig, Checkpoint, Graph, Init, LstmCell, ParamId, ParamSet, Var};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Vocab;
use crate::error::ModelError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    pub embed_size: usize,
    pub hidden_size: usize,
    pub seed: u64,
    pub init_scale: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            embed_size: 256,
            hidden_size: 256,
            seed: 0,
            init_scale: 0.1,
        }
    }
}

impl LmConfig {
    pub fn small(seed: u64) -> Self {
        LmConfig {
            embed_size: 24,
            hidden_size: 32,
            seed,
            ..LmConfig::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct LanguageModel {
    config: LmConfig,
    vocab: Vocab,
    params: ParamSet,
    emb: ParamId,
    cell: LstmCell,
    h0: ParamId,
    c0: ParamId,
    out_w: ParamId,
    out_b: ParamId,
}

impl LanguageModel {
    pub fn new(config: LmConfig, vocab: Vocab) -> Result<Self, ModelError> {
        let init = Init {
            seed: config.seed,
            scale: config.init_scale,
        };
        let v = vocab.num_words() + 1;
        let (e, h) = (config.embed_size, config.hidden_size);
        let mut params = ParamSet::new();
        let emb = params.add("lm.emb", init.uniform("lm.emb", vec![v, e]))?;
        let cell = LstmCell::new(&mut params, "lm.lstm", e, h, &init)?;
        let h0 = params.add("lm.h0", init.uniform("lm.h0", vec![h]))?;
        let c0 = params.add("lm.c0", init.uniform("lm.c0", vec![h]))?;
        let out_w = params.add("lm.out.w", init.uniform("lm.out.w", vec![v, h]))?;
        let out_b = params.add("lm.out.b", init.uniform("lm.out.b", vec![v]))?;
        Ok(LanguageModel {
            config,
            vocab,
            params,
            emb,
            cell,
            h0,
            c0,
            out_w,
            out_b,
        })
    }

    pub fn config(&self) -> &LmConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Id of the begin marker on input and the end marker on output.
    pub fn boundary(&self) -> usize {
        self.vocab.num_words()
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        self.vocab.map_sentence(tokens)
    }

    fn check_ids(&self, ids: &[usize]) -> Result<(), ModelError> {
        match ids.iter().find(|&&w| w >= self.boundary()) {
            Some(w) => Err(ModelError::InvalidAction {
                action: format!("word id {w} outside the vocabulary"),
            }),
            None => Ok(()),
        }
    }

    /// Per-position output log-distributions: position `i` predicts word
    /// `i`, and the last one predicts the end marker.
    fn predictions(&self, g: &mut Graph, ids: &[usize]) -> Result<Vec<Var>, ModelError> {
        let mut h = g.param(self.h0);
        let mut c = g.param(self.c0);
        let mut out = Vec::with_capacity(ids.len() + 1);
        let inputs = std::iter::once(self.boundary()).chain(ids.iter().copied());
        for w in inputs {
            let x = g.lookup(self.emb, w)?;
            (h, c) = self.cell.step(g, x, h, c)?;
            let logits = g.affine(self.out_w, h, Some(self.out_b))?;
            out.push(g.log_softmax(logits, None)?);
        }
        Ok(out)
    }

    /// Log-probability of the sentence including its end marker, as a graph
    /// node.
    pub fn sentence_logprob_graph(&self, g: &mut Graph, ids: &[usize]) -> Result<Var, ModelError> {
        self.check_ids(ids)?;
        let preds = self.predictions(g, ids)?;
        let targets = ids.iter().copied().chain(std::iter::once(self.boundary()));
        let terms = preds
            .into_iter()
            .zip(targets)
            .map(|(p, t)| g.pick(p, t))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(g.sum(&terms)?)
    }

    /// Natural-log probability of the words alone (no end marker).
    pub fn prefix_logprob(&self, ids: &[usize]) -> Result<f64, ModelError> {
        self.check_ids(ids)?;
        let mut g = Graph::new(&self.params);
        let preds = self.predictions(&mut g, ids)?;
        let mut terms = Vec::with_capacity(ids.len());
        for (p, &t) in preds.iter().zip(ids) {
            terms.push(g.pick(*p, t)?);
        }
        if terms.is_empty() {
            return Ok(0.0);
        }
        let s = g.sum(&terms)?;
        Ok(g.scalar(s))
    }

    /// `-log2 P(w_i | w_1..w_{i-1})` for each token.
    pub fn surprisal_series<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<f64>, ModelError> {
        let ids = self.encode(tokens);
        let mut g = Graph::new(&self.params);
        let preds = self.predictions(&mut g, &ids)?;
        Ok(preds
            .iter()
            .zip(&ids)
            .map(|(p, &w)| (-g.value(*p)[w] / std::f64::consts::LN_2).max(0.0))
            .collect())
    }

    /// `exp(mean NLL)` over all words and end markers.
    pub fn perplexity(&self, sentences: &[Vec<String>]) -> Result<f64, ModelError> {
        let (nll, events) = self.corpus_nll(sentences)?;
        if events == 0 {
            return Err(ModelError::EmptyCorpus);
        }
        Ok((nll / events as f64).exp())
    }

    /// Summed NLL and event count (words plus one end marker per sentence).
    pub fn corpus_nll(&self, sentences: &[Vec<String>]) -> Result<(f64, usize), ModelError> {
        let mut nll = 0.0;
        let mut events = 0;
        for s in sentences {
            let ids = self.encode(s);
            let mut g = Graph::new(&self.params);
            let lp = self.sentence_logprob_graph(&mut g, &ids)?;
            nll -= g.scalar(lp);
            events += ids.len() + 1;
        }
        Ok((nll, events))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut meta = BTreeMap::new();
        meta.insert("model".into(), "lstm-lm".into());
        meta.insert(
            "config".into(),
            serde_json::to_value(&self.config).expect("config serializes"),
        );
        meta.insert("vocab_hash".into(), self.vocab.fingerprint().into());
        meta.insert("vocab".into(), self.vocab.to_json().into());
        Checkpoint::from_params(&self.params, meta)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, ModelError> {
        let bad = |m: &str| ModelError::Checkpoint(m.to_string());
        if ck.meta_str("model")? != "lstm-lm" {
            return Err(bad("not a language-model checkpoint"));
        }
        let config: LmConfig = serde_json::from_value(
            ck.metadata.get("config").cloned().ok_or_else(|| bad("missing config"))?,
        )
        .map_err(|e| bad(&e.to_string()))?;
        let vocab = Vocab::from_json(ck.meta_str("vocab")?).map_err(|e| bad(&e.to_string()))?;
        if vocab.fingerprint() != ck.meta_str("vocab_hash")? {
            return Err(bad("vocabulary hash mismatch"));
        }
        let mut m = LanguageModel::new(config, vocab)?;
        ck.load_into(&mut m.params)?;
        Ok(m)
    }
}

/// Minibatch Adam training on next-word prediction.
#[derive(Debug, Clone)]
pub struct LmTrainer {
    pub optimizer: Adam,
    pub batch_size: usize,
    pub seed: u64,
    epochs: u64,
}

impl LmTrainer {
    pub fn new(config: AdamConfig, batch_size: usize, seed: u64) -> Self {
        LmTrainer {
            optimizer: Adam::new(config),
            batch_size: batch_size.max(1),
            seed,
            epochs: 0,
        }
    }

    /// One update; returns the mean per-event loss before the update.
    pub fn train_step(&mut self, model: &mut LanguageModel, batch: &[Vec<usize>]) -> Result<f64, ModelError> {
        let events: usize = batch.iter().map(|s| s.len() + 1).sum();
        if batch.is_empty() {
            return Err(ModelError::EmptyCorpus);
        }
        let mut total = 0.0;
        for ids in batch {
            let grads = {
                let mut g = Graph::new(model.params());
                let lp = model.sentence_logprob_graph(&mut g, ids)?;
                total -= g.scalar(lp);
                let loss = g.scale(lp, -1.0 / events as f64);
                g.backward(loss)?
            };
            model.params_mut().accumulate(&grads);
        }
        self.optimizer.step(model.params_mut())?;
        Ok(total / events as f64)
    }

    /// A shuffled pass; returns the mean per-event loss.
    pub fn epoch(&mut self, model: &mut LanguageModel, data: &[Vec<usize>]) -> Result<f64, ModelError> {
        if data.is_empty() {
            return Err(ModelError::EmptyCorpus);
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ self.epochs.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        order.shuffle(&mut rng);
        self.epochs += 1;
        let mut total = 0.0;
        let mut events = 0;
        for chunk in order.chunks(self.batch_size) {
            let batch: Vec<Vec<usize>> = chunk.iter().map(|&i| data[i].clone()).collect();
            let n: usize = batch.iter().map(|s| s.len() + 1).sum();
            total += self.train_step(model, &batch)? * n as f64;
            events += n;
        }
        Ok(total / events as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_bracketed, toy_treebank, Tree};

    fn toks(t: &Tree) -> Vec<String> {
        t.words().iter().map(|w| w.to_string()).collect()
    }

    fn model(trees: &[Tree]) -> LanguageModel {
        LanguageModel::new(LmConfig::small(4), Vocab::build(trees, 1).unwrap()).unwrap()
    }

    #[test]
    fn chain_rule_identity() {
        let trees = toy_treebank(10, 1);
        let m = model(&trees);
        for t in &trees {
            let w = toks(t);
            let s: f64 = m.surprisal_series(&w).unwrap().iter().sum();
            let direct = -m.prefix_logprob(&m.encode(&w)).unwrap() / std::f64::consts::LN_2;
            assert!((s - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn uniform_output_gives_vocab_perplexity() {
        let trees = toy_treebank(10, 1);
        let mut m = model(&trees);
        let w = m.params().id("lm.out.w").unwrap();
        let b = m.params().id("lm.out.b").unwrap();
        m.params_mut().get_mut(w).values_mut().fill(0.0);
        m.params_mut().get_mut(b).values_mut().fill(0.0);
        let sents: Vec<Vec<String>> = trees.iter().map(toks).collect();
        let v = (m.vocab().num_words() + 1) as f64;
        assert!((m.perplexity(&sents).unwrap() - v).abs() < 1e-9);
        for s in m.surprisal_series(&sents[0]).unwrap() {
            assert!((s - v.log2()).abs() < 1e-12);
        }
        assert!(m.perplexity(&[]).is_err());
    }

    #[test]
    fn perplexity_two_paths() {
        let trees = toy_treebank(10, 2);
        let m = model(&trees);
        let sents: Vec<Vec<String>> = trees.iter().map(toks).collect();
        let mut nll = 0.0;
        let mut n = 0;
        for s in &sents {
            let bits: f64 = m.surprisal_series(s).unwrap().iter().sum();
            let ids = m.encode(s);
            let mut g = Graph::new(m.params());
            let whole = m.sentence_logprob_graph(&mut g, &ids).unwrap();
            let eos = -g.scalar(whole) - bits * std::f64::consts::LN_2;
            assert!(eos > 0.0);
            nll += bits * std::f64::consts::LN_2 + eos;
            n += s.len() + 1;
        }
        assert!(((nll / n as f64).exp() - m.perplexity(&sents).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn repeated_sentence_is_learned() {
        let trees = vec![parse_bracketed("(S (NP the cat) (VP sleeps))").unwrap()];
        let mut m = model(&trees);
        let ids = vec![m.encode(&toks(&trees[0]))];
        let mut tr = LmTrainer::new(
            AdamConfig {
                learning_rate: 0.02,
                ..AdamConfig::default()
            },
            1,
            0,
        );
        let first = tr.train_step(&mut m, &ids).unwrap();
        let mut last = first;
        for _ in 0..150 {
            last = tr.train_step(&mut m, &ids).unwrap();
        }
        assert!(last < 0.05, "{first} -> {last}");
        let s = m.surprisal_series(&toks(&trees[0])).unwrap();
        assert!(s.iter().all(|&x| x < 0.2), "{s:?}");
    }

    #[test]
    fn checkpoint_round_trip() {
        let trees = toy_treebank(5, 1);
        let m = model(&trees);
        let back = LanguageModel::from_checkpoint(&m.to_checkpoint()).unwrap();
        let w = toks(&trees[0]);
        assert_eq!(m.surprisal_series(&w).unwrap(), back.surprisal_series(&w).unwrap());
    }
}
