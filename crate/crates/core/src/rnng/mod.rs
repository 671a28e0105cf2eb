//! Recurrent neural network grammar: a stack-LSTM summarizes the partial
//! derivation, three MLPs turn that summary into distributions over action
//! kinds, nonterminal labels and words, and closing a constituent either
//! composes it into a single vector (full variant) or pushes a labeled
//! close-bracket symbol (composition-free variant).

mod model;
mod state;
mod train;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use model::{Rnng, RnngConfig, Scores};
pub use state::{Constituent, ParserState, StackEntry, StackSymbol};
pub use train::{OracleSentence, RnngTrainer};

use crate::corpus::ActionKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Full,
    NoComp,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Full => "full",
            Variant::NoComp => "no-comp",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(Variant::Full),
            "no-comp" | "nocomp" => Ok(Variant::NoComp),
            _ => Err(format!("unknown variant `{s}` (expected full or no-comp)")),
        }
    }
}

/// Action over id-mapped symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Transition {
    Nt(usize),
    Gen(usize),
    Reduce,
}

impl Transition {
    pub fn kind(self) -> ActionKind {
        match self {
            Transition::Nt(_) => ActionKind::Nt,
            Transition::Gen(_) => ActionKind::Gen,
            Transition::Reduce => ActionKind::Reduce,
        }
    }

    pub fn is_lexical(self) -> bool {
        matches!(self, Transition::Gen(_))
    }
}

/// Search limits that keep derivations finite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub max_open: usize,
    /// Allow closing the outermost constituent before the known sentence
    /// has been consumed.
    pub allow_early_close: bool,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_open: 40,
            allow_early_close: false,
        }
    }
}

/// The parts of a derivation that decide which actions are legal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct DerivationShape {
    pub open_count: usize,
    /// Children attached so far to the innermost open constituent.
    pub innermost_children: usize,
    pub words_emitted: usize,
    pub finished: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ValidActions {
    pub nt: bool,
    pub reduce: bool,
    pub gen: bool,
}

impl ValidActions {
    pub fn contains(&self, k: ActionKind) -> bool {
        match k {
            ActionKind::Nt => self.nt,
            ActionKind::Reduce => self.reduce,
            ActionKind::Gen => self.gen,
        }
    }

    pub fn mask(&self) -> [bool; 3] {
        [self.nt, self.reduce, self.gen]
    }

    pub fn is_empty(&self) -> bool {
        !(self.nt || self.reduce || self.gen)
    }

    pub fn kinds(&self) -> Vec<ActionKind> {
        ActionKind::ALL.into_iter().filter(|k| self.contains(*k)).collect()
    }
}

/// `sentence_done` says whether every word of the sentence being derived has
/// been generated; in purely generative use pass `true`.
pub fn valid_actions(shape: &DerivationShape, sentence_done: bool, limits: &Limits) -> ValidActions {
    if shape.finished {
        return ValidActions::default();
    }
    let open = shape.open_count;
    ValidActions {
        nt: open < limits.max_open,
        gen: open >= 1,
        reduce: open >= 1
            && shape.innermost_children > 0
            && (open > 1 || sentence_done || limits.allow_early_close),
    }
}

/// Sentence-relative done flag used by all scoring paths.
pub fn sentence_done(words_emitted: usize, sentence_len: Option<usize>) -> bool {
    sentence_len.is_none_or(|n| words_emitted >= n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_state_allows_only_nt() {
        let v = valid_actions(&DerivationShape::default(), false, &Limits::default());
        assert_eq!(v.kinds(), vec![ActionKind::Nt]);
    }

    #[test]
    fn after_nt_and_gen_everything_is_open() {
        // NT(S) GEN(a) on a two-word sentence
        let shape = DerivationShape {
            open_count: 1,
            innermost_children: 1,
            words_emitted: 1,
            finished: false,
        };
        let v = valid_actions(&shape, true, &Limits::default());
        assert_eq!(v.kinds(), vec![ActionKind::Nt, ActionKind::Reduce, ActionKind::Gen]);
        // mid-sentence the root may not close
        let v = valid_actions(&shape, false, &Limits::default());
        assert_eq!(v.kinds(), vec![ActionKind::Nt, ActionKind::Gen]);
        let early = Limits {
            allow_early_close: true,
            ..Limits::default()
        };
        assert!(valid_actions(&shape, false, &early).reduce);
    }

    #[test]
    fn fresh_constituent_cannot_close() {
        let shape = DerivationShape {
            open_count: 2,
            innermost_children: 0,
            words_emitted: 0,
            finished: false,
        };
        let v = valid_actions(&shape, true, &Limits::default());
        assert!(!v.reduce);
        assert!(v.nt && v.gen);
    }

    #[test]
    fn open_limit_blocks_nt() {
        let shape = DerivationShape {
            open_count: 3,
            innermost_children: 0,
            ..Default::default()
        };
        let lim = Limits {
            max_open: 3,
            allow_early_close: false,
        };
        assert!(!valid_actions(&shape, false, &lim).nt);
        let done = DerivationShape {
            finished: true,
            ..Default::default()
        };
        assert!(valid_actions(&done, true, &lim).is_empty());
    }
}
