//! Word-synchronous beam search with fast-tracking.
//!
//! Each word is reached by repeatedly expanding the structural frontier
//! (`thisword`) until at least `k` analyses have generated the word
//! (`nextword`), then handing the best `k_word` of them to the next word.

mod scripted;
mod sweep;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use scripted::{ScriptedModel, ScriptedState};
pub use sweep::{beam_sweep, parse_corpus, score_partial, CorpusParse, SweepReport};

use crate::corpus::Tree;
use crate::error::ModelError;
use crate::rnng::{ParserState, Rnng, Transition};

/// What search needs from a generative model.
pub trait IncrementalModel {
    type State: Clone;

    fn initial(&self) -> Self::State;
    fn log_prob(&self, s: &Self::State) -> f64;
    fn words_emitted(&self, s: &Self::State) -> usize;
    fn is_finished(&self, s: &Self::State) -> bool;
    fn transitions(&self, s: &Self::State) -> Vec<Transition>;

    /// Valid one-step continuations with their log-probabilities (not the
    /// accumulated score). Lexical continuations are limited to
    /// `GEN(next_word)` and absent when `next_word` is `None`. The order
    /// must be deterministic.
    fn successors(
        &self,
        s: &Self::State,
        next_word: Option<usize>,
        sentence_len: usize,
    ) -> Result<Vec<(Transition, f64)>, ModelError>;

    fn advance(&self, s: &Self::State, t: Transition, log_prob: f64) -> Result<Self::State, ModelError>;
}

impl IncrementalModel for Rnng {
    type State = ParserState;

    fn initial(&self) -> ParserState {
        self.init_state()
    }

    fn log_prob(&self, s: &ParserState) -> f64 {
        s.log_prob()
    }

    fn words_emitted(&self, s: &ParserState) -> usize {
        s.words_emitted()
    }

    fn is_finished(&self, s: &ParserState) -> bool {
        s.is_finished()
    }

    fn transitions(&self, s: &ParserState) -> Vec<Transition> {
        s.transitions()
    }

    fn successors(
        &self,
        s: &ParserState,
        next_word: Option<usize>,
        sentence_len: usize,
    ) -> Result<Vec<(Transition, f64)>, ModelError> {
        Rnng::successors(self, s, next_word, Some(sentence_len))
    }

    fn advance(&self, s: &ParserState, t: Transition, log_prob: f64) -> Result<ParserState, ModelError> {
        Rnng::advance(self, s, t, log_prob)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeamConfig {
    /// Action beam.
    pub k: usize,
    /// Word beam.
    pub k_word: usize,
    /// Fast-track count.
    pub k_ft: usize,
    /// Maximum passes of the search loop per word.
    pub max_iterations: usize,
}

impl BeamConfig {
    /// `k_word = k/10` and `k_ft = k/100`, each at least 1.
    pub fn with_k(k: usize) -> Self {
        BeamConfig {
            k,
            k_word: (k / 10).max(1),
            k_ft: (k / 100).max(1),
            max_iterations: 80,
        }
    }

    pub fn validate(&self) -> Result<(), BeamError> {
        let mut problems = Vec::new();
        if self.k == 0 {
            problems.push("k must be positive".to_string());
        }
        if self.k_word == 0 || self.k_word > self.k {
            problems.push(format!("word beam {} must lie in 1..={}", self.k_word, self.k));
        }
        if self.k_ft > self.k {
            problems.push(format!("fast-track count {} exceeds k = {}", self.k_ft, self.k));
        }
        if self.max_iterations == 0 {
            problems.push("max_iterations must be positive".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(BeamError::Config(problems.join("; ")))
        }
    }
}

/// Why the search loop for one word stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchExit {
    /// `nextword` reached `k`.
    Full,
    /// Every structural analysis was expanded; `nextword` holds all
    /// reachable analyses within the limits and is exact.
    SpaceExhausted,
    /// The iteration cap stopped the loop before `nextword` reached `k`.
    CapReached,
}

impl fmt::Display for SearchExit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SearchExit::Full => "full",
            SearchExit::SpaceExhausted => "space-exhausted",
            SearchExit::CapReached => "cap-reached",
        })
    }
}

/// Trace of the search for one word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRecord {
    pub word_index: usize,
    /// Passes through the search loop.
    pub iterations: usize,
    /// Candidate count generated on each pass, before pruning.
    pub fringe_sizes: Vec<usize>,
    pub fast_tracked: usize,
    /// Log-probabilities of `nextword` before word-beam pruning, best first.
    pub nextword_log_probs: Vec<f64>,
    pub returned_size: usize,
    /// Log of the summed probability of the incoming word beam.
    pub prior_log_mass: f64,
    /// Log of the summed probability of the returned word beam.
    pub posterior_log_mass: f64,
    pub exit: SearchExit,
}

impl SearchRecord {
    pub fn nextword_size(&self) -> usize {
        self.nextword_log_probs.len()
    }

    /// True when the cap cut the search short.
    pub fn exhausted(&self) -> bool {
        self.exit == SearchExit::CapReached
    }
}

#[derive(Debug, Error)]
pub enum BeamError {
    #[error("invalid beam configuration: {0}")]
    Config(String),
    #[error("empty input beam at word {0}")]
    EmptyBeam(usize),
    #[error("search found no analysis of word {word_index} (`{token}`)")]
    DeadEnd {
        word_index: usize,
        token: String,
        records: Vec<SearchRecord>,
    },
    #[error("no analysis could be completed after the final word")]
    NoCompletion { records: Vec<SearchRecord> },
    #[error("empty sentence")]
    EmptySentence,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Numerically stable `log(sum(exp(xs)))`; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Keeps the `k` best items by `score`, best first; ties keep insertion
/// order.
pub fn prune_top_k<T>(mut items: Vec<T>, k: usize, score: impl Fn(&T) -> f64) -> Vec<T> {
    items.sort_by(|a, b| score(b).total_cmp(&score(a)));
    items.truncate(k);
    items
}

struct Candidate {
    parent: usize,
    transition: Transition,
    delta: f64,
    score: f64,
}

/// Runs the search loop for the word at `word_index` and returns the word
/// beam, best first, plus the trace.
pub fn advance_word<M: IncrementalModel>(
    model: &M,
    thisword: Vec<M::State>,
    target: usize,
    word_index: usize,
    sentence_len: usize,
    cfg: &BeamConfig,
) -> Result<(Vec<M::State>, SearchRecord), BeamError> {
    cfg.validate()?;
    if thisword.is_empty() {
        return Err(BeamError::EmptyBeam(word_index));
    }
    let prior: Vec<f64> = thisword.iter().map(|s| model.log_prob(s)).collect();
    let prior_log_mass = if word_index == 0 { 0.0 } else { log_sum_exp(&prior) };

    let mut thisword = thisword;
    let mut nextword: Vec<M::State> = Vec::new();
    let mut fringe_sizes = Vec::new();
    let mut fast_tracked = 0;
    let exit = loop {
        if nextword.len() >= cfg.k {
            break SearchExit::Full;
        }
        if thisword.is_empty() {
            break SearchExit::SpaceExhausted;
        }
        if fringe_sizes.len() == cfg.max_iterations {
            break SearchExit::CapReached;
        }
        let mut fringe = Vec::new();
        for (i, s) in thisword.iter().enumerate() {
            let base = model.log_prob(s);
            for (t, lp) in model.successors(s, Some(target), sentence_len)? {
                fringe.push(Candidate {
                    parent: i,
                    transition: t,
                    delta: lp,
                    score: base + lp,
                });
            }
        }
        fringe_sizes.push(fringe.len());

        if cfg.k_ft > 0 {
            let lexical: Vec<usize> = (0..fringe.len()).filter(|&i| fringe[i].transition.is_lexical()).collect();
            let promoted = prune_top_k(lexical, cfg.k_ft, |&i| fringe[i].score);
            let mut taken = vec![false; fringe.len()];
            for &i in &promoted {
                let c = &fringe[i];
                nextword.push(model.advance(&thisword[c.parent], c.transition, c.delta)?);
                taken[i] = true;
            }
            fast_tracked += promoted.len();
            let mut i = 0;
            fringe.retain(|_| {
                i += 1;
                !taken[i - 1]
            });
        }

        let kept = prune_top_k(fringe, cfg.k, |c| c.score);
        let mut next_this = Vec::new();
        for c in kept {
            let s = model.advance(&thisword[c.parent], c.transition, c.delta)?;
            if c.transition.is_lexical() {
                nextword.push(s);
            } else {
                next_this.push(s);
            }
        }
        thisword = next_this;
    };

    if nextword.is_empty() {
        return Err(BeamError::DeadEnd {
            word_index,
            token: String::new(),
            records: Vec::new(),
        });
    }
    let nextword = prune_top_k(nextword, usize::MAX, |s| model.log_prob(s));
    let nextword_log_probs: Vec<f64> = nextword.iter().map(|s| model.log_prob(s)).collect();
    let mut beam = nextword;
    beam.truncate(cfg.k_word);
    let posterior: Vec<f64> = beam.iter().map(|s| model.log_prob(s)).collect();
    let record = SearchRecord {
        word_index,
        iterations: fringe_sizes.len(),
        fringe_sizes,
        fast_tracked,
        nextword_log_probs,
        returned_size: beam.len(),
        prior_log_mass,
        posterior_log_mass: log_sum_exp(&posterior),
        exit,
    };
    Ok((beam, record))
}

/// Best complete analysis of a sentence and the per-word traces.
#[derive(Debug, Clone)]
pub struct BeamParse<S> {
    pub best: S,
    pub best_log_prob: f64,
    pub records: Vec<SearchRecord>,
    /// Completed analyses, best first.
    pub completed: Vec<S>,
}

/// Chains [`advance_word`] over `words`, then closes every analysis in the
/// final word beam with REDUCE actions alone and keeps the most probable.
pub fn parse_ids<M: IncrementalModel>(
    model: &M,
    words: &[usize],
    cfg: &BeamConfig,
) -> Result<BeamParse<M::State>, BeamError> {
    cfg.validate()?;
    if words.is_empty() {
        return Err(BeamError::EmptySentence);
    }
    let n = words.len();
    let mut beam = vec![model.initial()];
    let mut records = Vec::with_capacity(n);
    for (i, &w) in words.iter().enumerate() {
        match advance_word(model, beam, w, i, n, cfg) {
            Ok((b, r)) => {
                beam = b;
                records.push(r);
            }
            Err(BeamError::DeadEnd { word_index, token, .. }) => {
                return Err(BeamError::DeadEnd {
                    word_index,
                    token,
                    records,
                })
            }
            Err(e) => return Err(e),
        }
    }
    let mut completed = Vec::new();
    for s in beam {
        if let Some(done) = complete(model, s, n)? {
            completed.push(done);
        }
    }
    let completed = prune_top_k(completed, usize::MAX, |s| model.log_prob(s));
    let Some(best) = completed.first().cloned() else {
        return Err(BeamError::NoCompletion { records });
    };
    Ok(BeamParse {
        best_log_prob: model.log_prob(&best),
        best,
        records,
        completed,
    })
}

fn complete<M: IncrementalModel>(model: &M, mut s: M::State, n: usize) -> Result<Option<M::State>, BeamError> {
    while !model.is_finished(&s) {
        let reduce = model
            .successors(&s, None, n)?
            .into_iter()
            .find(|(t, _)| *t == Transition::Reduce);
        match reduce {
            Some((t, lp)) => s = model.advance(&s, t, lp)?,
            None => return Ok(None),
        }
    }
    Ok(Some(s))
}

/// A parsed sentence with its tree.
#[derive(Debug, Clone)]
pub struct ParsedSentence {
    pub tree: Tree,
    pub log_prob: f64,
    pub records: Vec<SearchRecord>,
}

/// Parses surface tokens with an RNNG.
pub fn parse_sentence<S: AsRef<str>>(model: &Rnng, tokens: &[S], cfg: &BeamConfig) -> Result<ParsedSentence, BeamError> {
    let ids = model.vocab().map_sentence(tokens);
    let out = parse_ids(model, &ids, cfg).map_err(|e| match e {
        BeamError::DeadEnd {
            word_index, records, ..
        } => BeamError::DeadEnd {
            word_index,
            token: tokens[word_index].as_ref().to_string(),
            records,
        },
        other => other,
    })?;
    let tree = model.transitions_to_tree(&out.best.transitions(), tokens)?;
    Ok(ParsedSentence {
        tree,
        log_prob: out.best_log_prob,
        records: out.records,
    })
}
