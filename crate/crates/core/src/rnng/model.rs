use std::collections::BTreeMap;
use std::rc::Rc;

use neural::{Activation, BiLstm, Checkpoint, Graph, Init, LstmCell, Mlp, ParamId, ParamSet, Var};
use serde::{Deserialize, Serialize};

use super::state::{Constituent, HistoryNode, OpenFrame, ParserState, StackEntry, StackNode, StackSymbol};
use super::{sentence_done, valid_actions, Limits, Transition, ValidActions, Variant};
use crate::corpus::{actions_to_tree, Action, ActionKind, Tree, Vocab};
use crate::error::ModelError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnngConfig {
    pub embed_size: usize,
    pub hidden_size: usize,
    pub mlp_hidden: usize,
    pub variant: Variant,
    pub limits: Limits,
    pub seed: u64,
    pub init_scale: f64,
}

impl Default for RnngConfig {
    fn default() -> Self {
        RnngConfig {
            embed_size: 170,
            hidden_size: 170,
            mlp_hidden: 170,
            variant: Variant::Full,
            limits: Limits::default(),
            seed: 0,
            init_scale: 0.1,
        }
    }
}

impl RnngConfig {
    /// Narrow layers for tests and toy corpora.
    pub fn small(variant: Variant, seed: u64) -> Self {
        RnngConfig {
            embed_size: 24,
            hidden_size: 32,
            mlp_hidden: 32,
            variant,
            seed,
            ..RnngConfig::default()
        }
    }
}

#[derive(Debug, Clone)]
struct Parts {
    word_emb: ParamId,
    nt_emb: ParamId,
    close_emb: Option<ParamId>,
    stack: LstmCell,
    h0: ParamId,
    c0: ParamId,
    action: Mlp,
    nonterminal: Mlp,
    word: Mlp,
    comp: Option<BiLstm>,
}

const SCORER_ACTS: [Activation; 2] = [Activation::Tanh, Activation::Identity];

/// Log-probabilities at one state. Masked action kinds carry
/// [`neural::MASKED_LOG_PROB`]; label and word tables are present only
/// when the corresponding kind is valid.
#[derive(Debug, Clone)]
pub struct Scores {
    pub valid: ValidActions,
    pub action: [f64; 3],
    pub nonterminal: Option<Vec<f64>>,
    pub word: Option<Vec<f64>>,
}

impl Scores {
    pub fn log_prob(&self, t: Transition) -> Option<f64> {
        if !self.valid.contains(t.kind()) {
            return None;
        }
        let a = self.action[t.kind().index()];
        match t {
            Transition::Reduce => Some(a),
            Transition::Nt(x) => self.nonterminal.as_ref()?.get(x).map(|l| a + l),
            Transition::Gen(w) => self.word.as_ref()?.get(w).map(|l| a + l),
        }
    }
}

/// Parameters and vocabulary of one grammar.
#[derive(Debug, Clone)]
pub struct Rnng {
    config: RnngConfig,
    vocab: Vocab,
    params: ParamSet,
    parts: Parts,
}

impl Rnng {
    pub fn new(config: RnngConfig, vocab: Vocab) -> Result<Self, ModelError> {
        let mut params = ParamSet::new();
        let init = Init {
            seed: config.seed,
            scale: config.init_scale,
        };
        let (e, h, m) = (config.embed_size, config.hidden_size, config.mlp_hidden);
        let (nw, nn) = (vocab.num_words(), vocab.num_nonterminals());
        let word_emb = params.add("word_emb", init.uniform("word_emb", vec![nw, e]))?;
        let nt_emb = params.add("nt_emb", init.uniform("nt_emb", vec![nn, e]))?;
        let stack = LstmCell::new(&mut params, "stack", e, h, &init)?;
        let h0 = params.add("stack.h0", init.uniform("stack.h0", vec![h]))?;
        let c0 = params.add("stack.c0", init.uniform("stack.c0", vec![h]))?;
        let action = Mlp::new(&mut params, "action", &[h, m, 3], &SCORER_ACTS, &init)?;
        let nonterminal = Mlp::new(&mut params, "nonterminal", &[h, m, nn], &SCORER_ACTS, &init)?;
        let word = Mlp::new(&mut params, "word", &[h, m, nw], &SCORER_ACTS, &init)?;
        let (close_emb, comp) = match config.variant {
            Variant::Full => (None, Some(BiLstm::new(&mut params, "comp", e, e, e, &init)?)),
            Variant::NoComp => (
                Some(params.add("close_emb", init.uniform("close_emb", vec![nn, e]))?),
                None,
            ),
        };
        Ok(Rnng {
            config,
            vocab,
            params,
            parts: Parts {
                word_emb,
                nt_emb,
                close_emb,
                stack,
                h0,
                c0,
                action,
                nonterminal,
                word,
                comp,
            },
        })
    }

    pub fn config(&self) -> &RnngConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn limits(&self) -> &Limits {
        &self.config.limits
    }

    pub fn set_limits(&mut self, limits: Limits) {
        self.config.limits = limits;
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn stack_cell(&self) -> &LstmCell {
        &self.parts.stack
    }

    pub fn num_nonterminals(&self) -> usize {
        self.vocab.num_nonterminals()
    }

    // ---- graph-level building blocks shared by training and parsing ----

    pub(crate) fn initial_graph(&self, g: &mut Graph) -> (Var, Var) {
        (g.param(self.parts.h0), g.param(self.parts.c0))
    }

    pub(crate) fn push_graph(&self, g: &mut Graph, h: Var, c: Var, emb: Var) -> Result<(Var, Var), ModelError> {
        Ok(self.parts.stack.step(g, emb, h, c)?)
    }

    pub(crate) fn word_graph(&self, g: &mut Graph, w: usize) -> Result<Var, ModelError> {
        Ok(g.lookup(self.parts.word_emb, w)?)
    }

    pub(crate) fn nt_graph(&self, g: &mut Graph, x: usize) -> Result<Var, ModelError> {
        Ok(g.lookup(self.parts.nt_emb, x)?)
    }

    pub(crate) fn close_graph(&self, g: &mut Graph, x: usize) -> Result<Var, ModelError> {
        let id = self.parts.close_emb.ok_or_else(|| ModelError::InvalidAction {
            action: "close bracket in a composing model".into(),
        })?;
        Ok(g.lookup(id, x)?)
    }

    pub(crate) fn compose_graph(&self, g: &mut Graph, mother: usize, daughters: &[Var]) -> Result<Var, ModelError> {
        if daughters.is_empty() {
            return Err(ModelError::EmptyComposition);
        }
        let comp = self.parts.comp.as_ref().ok_or_else(|| ModelError::InvalidAction {
            action: "composition in the composition-free variant".into(),
        })?;
        let mut seq = Vec::with_capacity(daughters.len() + 1);
        seq.push(self.nt_graph(g, mother)?);
        seq.extend_from_slice(daughters);
        Ok(comp.encode(g, &seq)?)
    }

    /// Masked action log-probabilities plus, on demand, label and word
    /// log-probabilities, all conditioned on `summary`.
    pub(crate) fn score_graph(
        &self,
        g: &mut Graph,
        summary: Var,
        valid: ValidActions,
        want_nt: bool,
        want_word: bool,
    ) -> Result<(Var, Option<Var>, Option<Var>), ModelError> {
        let logits = self.parts.action.forward(g, summary)?;
        let action = g.log_softmax(logits, Some(&valid.mask()))?;
        let nt = if want_nt && valid.nt {
            let l = self.parts.nonterminal.forward(g, summary)?;
            Some(g.log_softmax(l, None)?)
        } else {
            None
        };
        let word = if want_word && valid.gen {
            let l = self.parts.word.forward(g, summary)?;
            Some(g.log_softmax(l, None)?)
        } else {
            None
        };
        Ok((action, nt, word))
    }

    // ---- persistent-state interface used by search ----

    pub fn init_state(&self) -> ParserState {
        let h: Rc<[f64]> = self.params.get(self.parts.h0).values().into();
        let c: Rc<[f64]> = self.params.get(self.parts.c0).values().into();
        ParserState {
            top: None,
            open: None,
            base_h: h,
            base_c: c,
            history: None,
            open_count: 0,
            words_emitted: 0,
            num_actions: 0,
            log_prob: 0.0,
            finished: false,
        }
    }

    /// All distributions at `s`. `sentence_len` is the length of the sentence
    /// being derived, or `None` for unconstrained generation.
    pub fn scores(&self, s: &ParserState, sentence_len: Option<usize>) -> Result<Scores, ModelError> {
        let valid = valid_actions(
            &s.shape(),
            sentence_done(s.words_emitted, sentence_len),
            &self.config.limits,
        );
        let mut out = Scores {
            valid,
            action: [neural::MASKED_LOG_PROB; 3],
            nonterminal: None,
            word: None,
        };
        if valid.is_empty() {
            return Ok(out);
        }
        let mut g = Graph::new(&self.params);
        let summary = g.input(s.summary().to_vec());
        let (a, nt, w) = self.score_graph(&mut g, summary, valid, true, true)?;
        out.action.copy_from_slice(g.value(a));
        out.nonterminal = nt.map(|v| g.value(v).to_vec());
        out.word = w.map(|v| g.value(v).to_vec());
        Ok(out)
    }

    pub fn score_actions(&self, s: &ParserState, sentence_len: Option<usize>) -> Result<[f64; 3], ModelError> {
        Ok(self.scores(s, sentence_len)?.action)
    }

    pub fn score_nonterminal(&self, s: &ParserState) -> Result<Vec<f64>, ModelError> {
        let mut g = Graph::new(&self.params);
        let summary = g.input(s.summary().to_vec());
        let l = self.parts.nonterminal.forward(&mut g, summary)?;
        let lp = g.log_softmax(l, None)?;
        Ok(g.value(lp).to_vec())
    }

    pub fn score_word(&self, s: &ParserState) -> Result<Vec<f64>, ModelError> {
        let mut g = Graph::new(&self.params);
        let summary = g.input(s.summary().to_vec());
        let l = self.parts.word.forward(&mut g, summary)?;
        let lp = g.log_softmax(l, None)?;
        Ok(g.value(lp).to_vec())
    }

    /// Every valid successor of `s` with its log-probability. Lexical
    /// successors are limited to `GEN(next_word)`, and omitted when
    /// `next_word` is `None`. Order: labels ascending, REDUCE, GEN.
    pub fn successors(
        &self,
        s: &ParserState,
        next_word: Option<usize>,
        sentence_len: Option<usize>,
    ) -> Result<Vec<(Transition, f64)>, ModelError> {
        let valid = valid_actions(
            &s.shape(),
            sentence_done(s.words_emitted, sentence_len),
            &self.config.limits,
        );
        if valid.is_empty() {
            return Ok(Vec::new());
        }
        let mut g = Graph::new(&self.params);
        let summary = g.input(s.summary().to_vec());
        let (a, nt, w) = self.score_graph(&mut g, summary, valid, true, next_word.is_some())?;
        let a = g.value(a);
        let mut out = Vec::new();
        if let Some(nt) = nt {
            let base = a[ActionKind::Nt.index()];
            out.extend(g.value(nt).iter().enumerate().map(|(x, l)| (Transition::Nt(x), base + l)));
        }
        if valid.reduce {
            out.push((Transition::Reduce, a[ActionKind::Reduce.index()]));
        }
        if let (Some(w), Some(target)) = (w, next_word) {
            let lp = g.value(w).get(target).ok_or_else(|| ModelError::InvalidAction {
                action: format!("GEN({target}) outside the vocabulary"),
            })?;
            out.push((Transition::Gen(target), a[ActionKind::Gen.index()] + lp));
        }
        Ok(out)
    }

    pub fn transition_log_prob(
        &self,
        s: &ParserState,
        t: Transition,
        sentence_len: Option<usize>,
    ) -> Result<f64, ModelError> {
        self.scores(s, sentence_len)?
            .log_prob(t)
            .ok_or_else(|| ModelError::InvalidAction {
                action: self.describe(t),
            })
    }

    /// Scores and applies `t`; the source state is untouched.
    pub fn apply_action(
        &self,
        s: &ParserState,
        t: Transition,
        sentence_len: Option<usize>,
    ) -> Result<ParserState, ModelError> {
        let lp = self.transition_log_prob(s, t, sentence_len)?;
        self.advance(s, t, lp)
    }

    /// Applies `t`, adding the already-computed `log_prob` to the running
    /// score. Only structural legality is checked here.
    pub fn advance(&self, s: &ParserState, t: Transition, log_prob: f64) -> Result<ParserState, ModelError> {
        let invalid = || ModelError::InvalidAction {
            action: self.describe(t),
        };
        if s.finished {
            return Err(invalid());
        }
        let mut g = Graph::new(&self.params);
        let mut next = s.clone();
        next.log_prob += log_prob;
        next.num_actions += 1;
        next.history = Some(Rc::new(HistoryNode {
            transition: t,
            prev: s.history.clone(),
        }));
        match t {
            Transition::Nt(x) => {
                if x >= self.num_nonterminals() {
                    return Err(invalid());
                }
                let emb = self.nt_graph(&mut g, x)?;
                next.top = Some(self.push_node(&mut g, s, s.top.clone(), StackSymbol::Open(x), emb, true)?);
                next.open = Some(Rc::new(OpenFrame {
                    label: x,
                    children: 0,
                    below: s.open.clone(),
                }));
                next.open_count += 1;
            }
            Transition::Gen(w) => {
                let frame = s.open.as_ref().ok_or_else(invalid)?;
                if w >= self.vocab.num_words() {
                    return Err(invalid());
                }
                let emb = self.word_graph(&mut g, w)?;
                next.top = Some(self.push_node(&mut g, s, s.top.clone(), StackSymbol::Word(w), emb, false)?);
                next.open = Some(Rc::new(OpenFrame {
                    label: frame.label,
                    children: frame.children + 1,
                    below: frame.below.clone(),
                }));
                next.words_emitted += 1;
            }
            Transition::Reduce => {
                let frame = s.open.as_ref().ok_or_else(invalid)?;
                if frame.children == 0 {
                    return Err(invalid());
                }
                match self.config.variant {
                    Variant::Full => {
                        let mut daughters = Vec::new();
                        let mut cur = s.top.clone();
                        loop {
                            let node = cur.ok_or_else(invalid)?;
                            if node.entry.is_open_nonterminal {
                                cur = node.below.clone();
                                break;
                            }
                            daughters.push(node.entry.clone());
                            cur = node.below.clone();
                        }
                        daughters.reverse();
                        let dvars: Vec<Var> = daughters
                            .iter()
                            .map(|d| g.input(d.embedding.to_vec()))
                            .collect();
                        let composed = self.compose_graph(&mut g, frame.label, &dvars)?;
                        let symbol = StackSymbol::Closed(Rc::new(Constituent {
                            label: frame.label,
                            daughters: daughters.into_iter().map(|d| d.symbol).collect(),
                        }));
                        next.top = Some(self.push_node(&mut g, s, cur, symbol, composed, false)?);
                    }
                    Variant::NoComp => {
                        let emb = self.close_graph(&mut g, frame.label)?;
                        next.top = Some(self.push_node(
                            &mut g,
                            s,
                            s.top.clone(),
                            StackSymbol::CloseBracket(frame.label),
                            emb,
                            false,
                        )?);
                        // the matching open bracket stays on the stack but is no longer open
                    }
                }
                next.open = frame.below.as_ref().map(|p| {
                    Rc::new(OpenFrame {
                        label: p.label,
                        children: p.children + 1,
                        below: p.below.clone(),
                    })
                });
                next.open_count -= 1;
                next.finished = next.open_count == 0;
            }
        }
        Ok(next)
    }

    fn push_node(
        &self,
        g: &mut Graph,
        s: &ParserState,
        below: Option<Rc<StackNode>>,
        symbol: StackSymbol,
        emb: Var,
        is_open: bool,
    ) -> Result<Rc<StackNode>, ModelError> {
        let (bh, bc) = match &below {
            Some(n) => (n.h.clone(), n.c.clone()),
            None => (s.base_h.clone(), s.base_c.clone()),
        };
        let h = g.input(bh.to_vec());
        let c = g.input(bc.to_vec());
        let (h2, c2) = self.push_graph(g, h, c, emb)?;
        let depth = below.as_ref().map_or(0, |n| n.depth) + 1;
        Ok(Rc::new(StackNode {
            entry: StackEntry {
                symbol,
                embedding: g.value(emb).into(),
                is_open_nonterminal: is_open,
            },
            h: g.value(h2).into(),
            c: g.value(c2).into(),
            below,
            depth,
        }))
    }

    /// Composition of a mother label and daughter vectors into one
    /// stack-entry vector.
    pub fn compose(&self, mother: usize, daughters: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
        let mut g = Graph::new(&self.params);
        let vars: Vec<Var> = daughters.iter().map(|d| g.input(d.clone())).collect();
        let out = self.compose_graph(&mut g, mother, &vars)?;
        Ok(g.value(out).to_vec())
    }

    /// Runs the stack LSTM from scratch over the stored entry embeddings.
    /// Should reproduce `s.summary()` exactly.
    pub fn recompute_summary(&self, s: &ParserState) -> Result<Vec<f64>, ModelError> {
        let mut g = Graph::new(&self.params);
        let (mut h, mut c) = self.initial_graph(&mut g);
        for e in s.entries() {
            let x = g.input(e.embedding.to_vec());
            (h, c) = self.push_graph(&mut g, h, c, x)?;
        }
        Ok(g.value(h).to_vec())
    }

    pub fn word_embedding(&self, w: usize) -> Vec<f64> {
        let e = self.config.embed_size;
        self.params.get(self.parts.word_emb).values()[w * e..(w + 1) * e].to_vec()
    }

    pub fn describe(&self, t: Transition) -> String {
        match t {
            Transition::Nt(x) if x < self.num_nonterminals() => format!("NT({})", self.vocab.nonterminal(x)),
            Transition::Gen(w) if w < self.vocab.num_words() => format!("GEN({})", self.vocab.word(w)),
            Transition::Nt(x) => format!("NT(#{x})"),
            Transition::Gen(w) => format!("GEN(#{w})"),
            Transition::Reduce => "REDUCE".into(),
        }
    }

    /// Maps a symbolic oracle onto ids. Words go through the unknown-word
    /// classes, with the first word treated as sentence-initial.
    pub fn encode_actions(&self, actions: &[Action]) -> Result<Vec<Transition>, ModelError> {
        let mut words = 0;
        actions
            .iter()
            .map(|a| match a {
                Action::Nt(x) => self
                    .vocab
                    .nonterminal_id(x)
                    .map(Transition::Nt)
                    .ok_or_else(|| ModelError::UnknownNonterminal(x.clone())),
                Action::Gen(w) => {
                    let id = self.vocab.map_token(w, words == 0);
                    words += 1;
                    Ok(Transition::Gen(id))
                }
                Action::Reduce => Ok(Transition::Reduce),
            })
            .collect()
    }

    /// Rebuilds a tree from a derivation, taking surface words from `tokens`.
    pub fn transitions_to_tree<S: AsRef<str>>(&self, ts: &[Transition], tokens: &[S]) -> Result<Tree, ModelError> {
        let mut i = 0;
        let actions: Vec<Action> = ts
            .iter()
            .map(|t| match *t {
                Transition::Nt(x) => Action::Nt(self.vocab.nonterminal(x).to_string()),
                Transition::Gen(w) => {
                    let word = tokens
                        .get(i)
                        .map(|s| s.as_ref().to_string())
                        .unwrap_or_else(|| self.vocab.word(w).to_string());
                    i += 1;
                    Action::Gen(word)
                }
                Transition::Reduce => Action::Reduce,
            })
            .collect();
        Ok(actions_to_tree(&actions)?)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut meta = BTreeMap::new();
        meta.insert("model".into(), "rnng".into());
        meta.insert("variant".into(), self.config.variant.to_string().into());
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
        if ck.meta_str("model")? != "rnng" {
            return Err(bad("not an RNNG checkpoint"));
        }
        let config: RnngConfig = serde_json::from_value(
            ck.metadata.get("config").cloned().ok_or_else(|| bad("missing config"))?,
        )
        .map_err(|e| bad(&e.to_string()))?;
        let vocab = Vocab::from_json(ck.meta_str("vocab")?).map_err(|e| bad(&e.to_string()))?;
        if vocab.fingerprint() != ck.meta_str("vocab_hash")? {
            return Err(bad("vocabulary hash mismatch"));
        }
        let mut m = Rnng::new(config, vocab)?;
        ck.load_into(&mut m.params)?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_bracketed, tree_to_actions};

    fn toy_model(variant: Variant) -> Rnng {
        let trees: Vec<Tree> = ["(S (NP the hungry cat) (VP meows))", "(S (NP a cat) (VP sees (NP the cat)))"]
            .iter()
            .map(|l| parse_bracketed(l).unwrap())
            .collect();
        let vocab = Vocab::build(&trees, 1).unwrap();
        Rnng::new(RnngConfig::small(variant, 3), vocab).unwrap()
    }

    fn run(m: &Rnng, line: &str, upto: usize) -> ParserState {
        let t = parse_bracketed(line).unwrap();
        let ts = m.encode_actions(&tree_to_actions(&t)).unwrap();
        let n = t.num_terminals();
        let mut s = m.init_state();
        for &a in &ts[..upto] {
            s = m.apply_action(&s, a, Some(n)).unwrap();
        }
        s
    }

    #[test]
    fn init_state_is_empty_and_deterministic() {
        let m = toy_model(Variant::Full);
        let a = m.init_state();
        let b = m.init_state();
        assert_eq!(a.open_count(), 0);
        assert_eq!(a.log_prob(), 0.0);
        assert_eq!(a.summary(), b.summary());
    }

    #[test]
    fn forced_first_move() {
        let m = toy_model(Variant::Full);
        let s = m.init_state();
        let a = m.score_actions(&s, Some(4)).unwrap();
        assert_eq!(a[ActionKind::Nt.index()], 0.0);
    }

    #[test]
    fn full_reduce_shrinks_stack_by_daughters_minus_one() {
        let m = toy_model(Variant::Full);
        // after NT(S) NT(NP) GEN GEN GEN
        let before = run(&m, "(S (NP the hungry cat) (VP meows))", 5);
        let after = m.apply_action(&before, Transition::Reduce, Some(4)).unwrap();
        assert_eq!(before.stack_len(), 5);
        assert_eq!(after.stack_len(), 2);
        assert_eq!(before.stack_len() - after.stack_len(), 3);
        match &after.top_entry().unwrap().symbol {
            StackSymbol::Closed(c) => {
                let the = m.vocab().word_id("the").unwrap();
                let hungry = m.vocab().word_id("hungry").unwrap();
                let cat = m.vocab().word_id("cat").unwrap();
                assert_eq!(
                    c.daughters,
                    vec![StackSymbol::Word(the), StackSymbol::Word(hungry), StackSymbol::Word(cat)]
                );
            }
            other => panic!("expected closed constituent, got {other:?}"),
        }
        // source state untouched
        assert_eq!(before.stack_len(), 5);
        assert_eq!(before.open_count(), 2);
    }

    #[test]
    fn nocomp_reduce_pushes_close_bracket() {
        let m = toy_model(Variant::NoComp);
        let before = run(&m, "(S (NP the hungry cat) (VP meows))", 5);
        let after = m.apply_action(&before, Transition::Reduce, Some(4)).unwrap();
        assert_eq!(after.stack_len(), before.stack_len() + 1);
        let np = m.vocab().nonterminal_id("NP").unwrap();
        let entries = after.entries();
        // "(NP the hungry cat )NP" takes five slots
        let region: Vec<&StackSymbol> = entries[1..].iter().map(|e| &e.symbol).collect();
        assert_eq!(region.len(), 5);
        assert_eq!(region[0], &StackSymbol::Open(np));
        assert_eq!(region[4], &StackSymbol::CloseBracket(np));
        assert_eq!(after.open_count(), 1);
    }

    #[test]
    fn gen_counts_words_only() {
        let m = toy_model(Variant::Full);
        let s = run(&m, "(S (NP the hungry cat) (VP meows))", 2);
        let the = m.vocab().word_id("the").unwrap();
        let s2 = m.apply_action(&s, Transition::Gen(the), Some(4)).unwrap();
        assert_eq!(s2.words_emitted(), s.words_emitted() + 1);
        assert_eq!(s2.open_count(), s.open_count());
        assert!(s2.log_prob() < s.log_prob());
    }

    #[test]
    fn invalid_actions_rejected() {
        let m = toy_model(Variant::Full);
        let s = m.init_state();
        assert!(m.apply_action(&s, Transition::Reduce, Some(1)).is_err());
        assert!(m.apply_action(&s, Transition::Gen(0), Some(1)).is_err());
        let s = run(&m, "(S (NP the hungry cat) (VP meows))", 1);
        assert!(m.apply_action(&s, Transition::Reduce, Some(4)).is_err());
    }

    #[test]
    fn compose_needs_daughters_and_is_order_sensitive() {
        let m = toy_model(Variant::Full);
        assert!(matches!(m.compose(0, &[]), Err(ModelError::EmptyComposition)));
        let u = m.word_embedding(15);
        let v = m.word_embedding(16);
        let w = m.word_embedding(17);
        let x = m.compose(0, &[u.clone(), v.clone(), w.clone()]).unwrap();
        assert_eq!(x.len(), m.config().embed_size);
        assert_eq!(x, m.compose(0, &[u.clone(), v.clone(), w.clone()]).unwrap());
        assert_ne!(x, m.compose(0, &[w, v, u]).unwrap());
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = toy_model(Variant::NoComp);
        let ck = m.to_checkpoint();
        let back = Rnng::from_checkpoint(&neural::Checkpoint::from_json(&ck.to_json().unwrap()).unwrap()).unwrap();
        assert_eq!(back.config(), m.config());
        let s = run(&m, "(S (NP the hungry cat) (VP meows))", 6);
        let s2 = run(&back, "(S (NP the hungry cat) (VP meows))", 6);
        assert_eq!(s.log_prob(), s2.log_prob());
    }
}
