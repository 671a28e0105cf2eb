//! Bracketed trees, oracle action sequences, vocabularies and the toy
//! treebank.

mod oracle;
pub mod toy;
mod tree;
mod vocab;

pub use oracle::{actions_to_tree, bracket_symbols, tree_to_actions, Action, ActionKind};
pub use toy::toy_treebank;
pub use tree::{parse_bracketed, read_treebank, Tree};
pub use vocab::{unk_class, Vocab, UNK_CLASSES};

/// Splits one line of pre-tokenized text.
pub fn tokenize_line(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_string).collect()
}
