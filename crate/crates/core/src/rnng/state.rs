use std::rc::Rc;

use super::{DerivationShape, Transition};

/// Symbolic content of a stack slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StackSymbol {
    Open(usize),
    Word(usize),
    /// A completed constituent (full variant).
    Closed(Rc<Constituent>),
    /// `)X` marker (composition-free variant).
    CloseBracket(usize),
}

/// Completed constituent recorded on the stack by a composing REDUCE.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constituent {
    pub label: usize,
    pub daughters: Vec<StackSymbol>,
}

#[derive(Debug, Clone)]
pub struct StackEntry {
    pub symbol: StackSymbol,
    pub embedding: Rc<[f64]>,
    /// Pushed by NT. The composition-free variant keeps the flag after the
    /// bracket is closed; the open count lives on the state.
    pub is_open_nonterminal: bool,
}

/// Stack cell plus the stack-LSTM state after reading it, so popping
/// restores the previous summary without recomputation.
#[derive(Debug)]
pub(crate) struct StackNode {
    pub entry: StackEntry,
    pub h: Rc<[f64]>,
    pub c: Rc<[f64]>,
    pub below: Option<Rc<StackNode>>,
    pub depth: usize,
}

#[derive(Debug)]
pub(crate) struct OpenFrame {
    pub label: usize,
    pub children: usize,
    pub below: Option<Rc<OpenFrame>>,
}

#[derive(Debug)]
pub(crate) struct HistoryNode {
    pub transition: Transition,
    pub prev: Option<Rc<HistoryNode>>,
}

/// Immutable snapshot of one partial derivation. Cloning is cheap and
/// successors share structure with their parent.
#[derive(Debug, Clone)]
pub struct ParserState {
    pub(crate) top: Option<Rc<StackNode>>,
    pub(crate) open: Option<Rc<OpenFrame>>,
    pub(crate) base_h: Rc<[f64]>,
    pub(crate) base_c: Rc<[f64]>,
    pub(crate) history: Option<Rc<HistoryNode>>,
    pub(crate) open_count: usize,
    pub(crate) words_emitted: usize,
    pub(crate) num_actions: usize,
    pub(crate) log_prob: f64,
    pub(crate) finished: bool,
}

impl ParserState {
    pub fn open_count(&self) -> usize {
        self.open_count
    }

    pub fn words_emitted(&self) -> usize {
        self.words_emitted
    }

    pub fn log_prob(&self) -> f64 {
        self.log_prob
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn stack_len(&self) -> usize {
        self.top.as_ref().map_or(0, |n| n.depth)
    }

    /// Final hidden state of the stack LSTM.
    pub fn summary(&self) -> &[f64] {
        self.top.as_ref().map_or(&self.base_h, |n| &n.h)
    }

    pub fn shape(&self) -> DerivationShape {
        DerivationShape {
            open_count: self.open_count,
            innermost_children: self.open.as_ref().map_or(0, |f| f.children),
            words_emitted: self.words_emitted,
            finished: self.finished,
        }
    }

    /// Stack entries from bottom to top.
    pub fn entries(&self) -> Vec<&StackEntry> {
        let mut out = Vec::with_capacity(self.stack_len());
        let mut cur = self.top.as_deref();
        while let Some(n) = cur {
            out.push(&n.entry);
            cur = n.below.as_deref();
        }
        out.reverse();
        out
    }

    pub fn top_entry(&self) -> Option<&StackEntry> {
        self.top.as_deref().map(|n| &n.entry)
    }

    /// Actions taken so far, oldest first.
    pub fn transitions(&self) -> Vec<Transition> {
        let mut out = Vec::with_capacity(self.num_actions);
        let mut cur = self.history.as_deref();
        while let Some(n) = cur {
            out.push(n.transition);
            cur = n.prev.as_deref();
        }
        out.reverse();
        out
    }

    pub fn last_transition(&self) -> Option<Transition> {
        self.history.as_ref().map(|n| n.transition)
    }
}
