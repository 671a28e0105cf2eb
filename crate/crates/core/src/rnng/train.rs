use neural::{finite_diff_check, Adam, AdamConfig, GradCheckOptions, GradCheckReport, Graph, NeuralError, Var};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::Rnng;
use super::{sentence_done, valid_actions, DerivationShape, Transition, Variant};
use crate::corpus::{tree_to_actions, ActionKind, Tree};
use crate::error::ModelError;

/// A gold tree with its id-mapped oracle derivation.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSentence {
    pub tree: Tree,
    pub tokens: Vec<String>,
    pub transitions: Vec<Transition>,
}

impl OracleSentence {
    pub fn num_words(&self) -> usize {
        self.tokens.len()
    }
}

struct Slot {
    emb: Var,
    h: Var,
    c: Var,
    open: bool,
}

impl Rnng {
    pub fn oracle(&self, tree: &Tree) -> Result<OracleSentence, ModelError> {
        let actions = tree_to_actions(tree);
        Ok(OracleSentence {
            tree: tree.clone(),
            tokens: tree.words().iter().map(|w| w.to_string()).collect(),
            transitions: self.encode_actions(&actions)?,
        })
    }

    pub fn oracles(&self, trees: &[Tree]) -> Result<Vec<OracleSentence>, ModelError> {
        trees.iter().map(|t| self.oracle(t)).collect()
    }

    /// Teacher-forced sum of action log-probabilities as a graph node.
    /// Parameters are read only through `g`, so the result is differentiable.
    pub fn sentence_logprob_graph(&self, g: &mut Graph, o: &OracleSentence) -> Result<Var, ModelError> {
        let n = o.num_words();
        let (h0, c0) = self.initial_graph(g);
        let mut stack: Vec<Slot> = Vec::new();
        let mut frames: Vec<(usize, usize)> = Vec::new();
        let mut words = 0;
        let mut finished = false;
        let mut terms = Vec::with_capacity(2 * o.transitions.len());
        for (index, &t) in o.transitions.iter().enumerate() {
            let mismatch = |reason: &str| ModelError::OracleMismatch {
                index,
                action: self.describe(t),
                reason: reason.to_string(),
            };
            let shape = DerivationShape {
                open_count: frames.len(),
                innermost_children: frames.last().map_or(0, |f| f.1),
                words_emitted: words,
                finished,
            };
            let valid = valid_actions(&shape, sentence_done(words, Some(n)), self.limits());
            if !valid.contains(t.kind()) {
                return Err(mismatch("not a valid action here"));
            }
            let summary = stack.last().map_or(h0, |s| s.h);
            let (a, nt, w) = self.score_graph(g, summary, valid, t.kind() == ActionKind::Nt, t.kind() == ActionKind::Gen)?;
            terms.push(g.pick(a, t.kind().index())?);
            let (below_h, below_c) = stack.last().map_or((h0, c0), |s| (s.h, s.c));
            match t {
                Transition::Nt(x) => {
                    let lp = nt.expect("nonterminal scores requested");
                    terms.push(g.pick(lp, x).map_err(|_| mismatch("label out of range"))?);
                    let emb = self.nt_graph(g, x)?;
                    let (h, c) = self.push_graph(g, below_h, below_c, emb)?;
                    stack.push(Slot { emb, h, c, open: true });
                    frames.push((x, 0));
                }
                Transition::Gen(id) => {
                    if words >= n {
                        return Err(mismatch("more words than the sentence has"));
                    }
                    let lp = w.expect("word scores requested");
                    terms.push(g.pick(lp, id).map_err(|_| mismatch("word out of range"))?);
                    let emb = self.word_graph(g, id)?;
                    let (h, c) = self.push_graph(g, below_h, below_c, emb)?;
                    stack.push(Slot { emb, h, c, open: false });
                    frames.last_mut().expect("GEN is valid only inside a constituent").1 += 1;
                    words += 1;
                }
                Transition::Reduce => {
                    let (label, _) = frames.pop().expect("REDUCE is valid only inside a constituent");
                    let emb = match self.variant() {
                        Variant::Full => {
                            let mut daughters = Vec::new();
                            loop {
                                let s = stack.pop().ok_or_else(|| mismatch("stack underflow"))?;
                                if s.open {
                                    break;
                                }
                                daughters.push(s.emb);
                            }
                            daughters.reverse();
                            self.compose_graph(g, label, &daughters)?
                        }
                        Variant::NoComp => self.close_graph(g, label)?,
                    };
                    let (bh, bc) = stack.last().map_or((h0, c0), |s| (s.h, s.c));
                    let (h, c) = self.push_graph(g, bh, bc, emb)?;
                    stack.push(Slot { emb, h, c, open: false });
                    if let Some(f) = frames.last_mut() {
                        f.1 += 1;
                    }
                    finished = frames.is_empty();
                }
            }
        }
        if !finished || words != n {
            return Err(ModelError::OracleMismatch {
                index: o.transitions.len(),
                action: "<end>".into(),
                reason: "derivation is incomplete".into(),
            });
        }
        Ok(g.sum(&terms)?)
    }

    /// Log joint probability of a tree and its words, accumulated action by
    /// action through the same state machine the parser uses.
    pub fn tree_logprob(&self, tree: &Tree) -> Result<f64, ModelError> {
        let o = self.oracle(tree)?;
        self.oracle_logprob(&o)
    }

    pub fn oracle_logprob(&self, o: &OracleSentence) -> Result<f64, ModelError> {
        let n = o.num_words();
        let mut s = self.init_state();
        for (index, &t) in o.transitions.iter().enumerate() {
            s = self.apply_action(&s, t, Some(n)).map_err(|e| ModelError::OracleMismatch {
                index,
                action: self.describe(t),
                reason: e.to_string(),
            })?;
        }
        Ok(s.log_prob())
    }

    /// Summed negative log-likelihood and action count over `batch`.
    pub fn batch_nll(&self, batch: &[OracleSentence]) -> Result<(f64, usize), ModelError> {
        let mut total = 0.0;
        let mut actions = 0;
        for o in batch {
            let mut g = Graph::new(self.params());
            let lp = self.sentence_logprob_graph(&mut g, o)?;
            total -= g.scalar(lp);
            actions += o.transitions.len();
        }
        Ok((total, actions))
    }

    /// Finite-difference check of the teacher-forced loss of one sentence.
    pub fn grad_check(&self, o: &OracleSentence, opts: GradCheckOptions) -> Result<GradCheckReport, ModelError> {
        // surface oracle problems as model errors before the closure hides them
        self.batch_nll(std::slice::from_ref(o))?;
        let report = finite_diff_check(
            self.params(),
            |g| {
                let lp = self.sentence_logprob_graph(g, o).map_err(|e| match e {
                    ModelError::Neural(n) => n,
                    other => NeuralError::External(other.to_string()),
                })?;
                Ok(g.scale(lp, -1.0))
            },
            opts,
        )?;
        Ok(report)
    }

    /// Finite-difference check of the composition function alone, on
    /// `mother` over the embeddings of `words`.
    pub fn grad_check_composition(
        &self,
        mother: usize,
        words: &[usize],
        opts: GradCheckOptions,
    ) -> Result<GradCheckReport, ModelError> {
        let loss = |g: &mut Graph| -> Result<Var, ModelError> {
            let daughters = words.iter().map(|&w| self.word_graph(g, w)).collect::<Result<Vec<_>, _>>()?;
            let v = self.compose_graph(g, mother, &daughters)?;
            let s = g.log_softmax(v, None)?;
            Ok(g.pick(s, 0)?)
        };
        loss(&mut Graph::new(self.params()))?;
        Ok(finite_diff_check(
            self.params(),
            |g| {
                loss(g).map_err(|e| match e {
                    ModelError::Neural(n) => n,
                    other => NeuralError::External(other.to_string()),
                })
            },
            opts,
        )?)
    }
}

/// Minibatch Adam training under teacher forcing.
#[derive(Debug, Clone)]
pub struct RnngTrainer {
    pub optimizer: Adam,
    pub batch_size: usize,
    pub seed: u64,
    epochs: u64,
}

impl RnngTrainer {
    pub fn new(config: AdamConfig, batch_size: usize, seed: u64) -> Self {
        RnngTrainer {
            optimizer: Adam::new(config),
            batch_size: batch_size.max(1),
            seed,
            epochs: 0,
        }
    }

    /// One update on `batch`; returns the mean per-action loss measured
    /// before the update.
    pub fn train_step(&mut self, model: &mut Rnng, batch: &[OracleSentence]) -> Result<f64, ModelError> {
        let actions: usize = batch.iter().map(|o| o.transitions.len()).sum();
        if actions == 0 {
            return Err(ModelError::EmptyCorpus);
        }
        let mut total = 0.0;
        for o in batch {
            let grads = {
                let mut g = Graph::new(model.params());
                let lp = model.sentence_logprob_graph(&mut g, o)?;
                total -= g.scalar(lp);
                let loss = g.scale(lp, -1.0 / actions as f64);
                g.backward(loss)?
            };
            model.params_mut().accumulate(&grads);
        }
        self.optimizer.step(model.params_mut())?;
        Ok(total / actions as f64)
    }

    /// A shuffled pass over `data`; returns the mean per-action loss.
    pub fn epoch(&mut self, model: &mut Rnng, data: &[OracleSentence]) -> Result<f64, ModelError> {
        if data.is_empty() {
            return Err(ModelError::EmptyCorpus);
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ self.epochs.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        order.shuffle(&mut rng);
        self.epochs += 1;
        let mut total = 0.0;
        let mut actions = 0;
        for chunk in order.chunks(self.batch_size) {
            let batch: Vec<OracleSentence> = chunk.iter().map(|&i| data[i].clone()).collect();
            let n: usize = batch.iter().map(|o| o.transitions.len()).sum();
            total += self.train_step(model, &batch)? * n as f64;
            actions += n;
        }
        Ok(total / actions as f64)
    }

    pub fn epochs_done(&self) -> u64 {
        self.epochs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_bracketed, toy_treebank, Vocab};
    use crate::rnng::RnngConfig;

    fn model_for(trees: &[Tree], variant: Variant, seed: u64) -> Rnng {
        let vocab = Vocab::build(trees, 1).unwrap();
        Rnng::new(RnngConfig::small(variant, seed), vocab).unwrap()
    }

    #[test]
    fn logprob_paths_agree() {
        let trees = toy_treebank(20, 2);
        for variant in [Variant::Full, Variant::NoComp] {
            let m = model_for(&trees, variant, 5);
            for t in &trees[..5] {
                let o = m.oracle(t).unwrap();
                let direct = m.tree_logprob(t).unwrap();
                let mut g = Graph::new(m.params());
                let v = m.sentence_logprob_graph(&mut g, &o).unwrap();
                assert!((direct - g.scalar(v)).abs() < 1e-10, "{direct} vs {}", g.scalar(v));
                assert!(direct <= 0.0);
            }
        }
    }

    #[test]
    fn forced_move_grammar_has_zero_cost() {
        let trees = vec![parse_bracketed("(X a)").unwrap()];
        let mut m = model_for(&trees, Variant::Full, 1);
        // one word and one label: only the action choice itself is uncertain
        let lp = m.tree_logprob(&trees[0]).unwrap();
        assert!(lp < 0.0);
        let data = m.oracles(&trees).unwrap();
        let mut tr = RnngTrainer::new(
            AdamConfig {
                learning_rate: 0.05,
                ..AdamConfig::default()
            },
            1,
            0,
        );
        let first = tr.train_step(&mut m, &data).unwrap();
        let mut last = first;
        for _ in 0..200 {
            last = tr.train_step(&mut m, &data).unwrap();
        }
        assert!(last < 0.05 * first.max(1e-3), "{first} -> {last}");
    }

    #[test]
    fn replay_without_update_is_identical() {
        let trees = toy_treebank(8, 3);
        let m = model_for(&trees, Variant::Full, 2);
        let data = m.oracles(&trees).unwrap();
        assert_eq!(m.batch_nll(&data).unwrap(), m.batch_nll(&data).unwrap());
    }

    #[test]
    fn corrupted_oracle_reports_index() {
        let trees = vec![parse_bracketed("(S (NP a b) (VP c))").unwrap()];
        let m = model_for(&trees, Variant::Full, 1);
        let mut o = m.oracle(&trees[0]).unwrap();
        o.transitions.insert(1, Transition::Reduce);
        match m.batch_nll(&[o]) {
            Err(ModelError::OracleMismatch { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected mismatch, got {other:?}"),
        }
    }

    #[test]
    fn sentence_gradients_match_finite_differences() {
        let trees = vec![parse_bracketed("(S (NP the cat) (VP sleeps))").unwrap()];
        for variant in [Variant::Full, Variant::NoComp] {
            let m = model_for(&trees, variant, 9);
            let o = m.oracle(&trees[0]).unwrap();
            let r = m.grad_check(&o, GradCheckOptions::default()).unwrap();
            assert!(r.passed(), "{variant}: {r:?}");
        }
    }
}
