use std::fmt;

use serde::{Deserialize, Serialize};

use super::tree::Tree;
use crate::error::ActionSeqError;

/// One derivation step: open a constituent, generate a word, or close the
/// most recent open constituent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Nt(String),
    Gen(String),
    Reduce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionKind {
    Nt,
    Reduce,
    Gen,
}

impl ActionKind {
    pub const ALL: [ActionKind; 3] = [ActionKind::Nt, ActionKind::Reduce, ActionKind::Gen];

    pub fn index(self) -> usize {
        match self {
            ActionKind::Nt => 0,
            ActionKind::Reduce => 1,
            ActionKind::Gen => 2,
        }
    }
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::Nt(_) => ActionKind::Nt,
            Action::Gen(_) => ActionKind::Gen,
            Action::Reduce => ActionKind::Reduce,
        }
    }

    pub fn symbol(&self) -> Option<&str> {
        match self {
            Action::Nt(s) | Action::Gen(s) => Some(s),
            Action::Reduce => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Nt(x) => write!(f, "NT({x})"),
            Action::Gen(w) => write!(f, "GEN({w})"),
            Action::Reduce => f.write_str("REDUCE"),
        }
    }
}

/// Depth-first (top-down, left-to-right) derivation of `tree`.
pub fn tree_to_actions(tree: &Tree) -> Vec<Action> {
    fn walk(t: &Tree, out: &mut Vec<Action>) {
        match t {
            Tree::Leaf(w) => out.push(Action::Gen(w.clone())),
            Tree::Node { label, children } => {
                out.push(Action::Nt(label.clone()));
                children.iter().for_each(|c| walk(c, out));
                out.push(Action::Reduce);
            }
        }
    }
    let mut out = Vec::with_capacity(2 * tree.num_nonterminals() + tree.num_terminals());
    walk(tree, &mut out);
    out
}

/// Replays an action sequence into the tree it derives.
pub fn actions_to_tree(actions: &[Action]) -> Result<Tree, ActionSeqError> {
    let mut open: Vec<(String, Vec<Tree>)> = Vec::new();
    let mut root: Option<Tree> = None;
    for (index, a) in actions.iter().enumerate() {
        if root.is_some() {
            return Err(ActionSeqError::AfterRoot { index });
        }
        match a {
            Action::Nt(x) => open.push((x.clone(), Vec::new())),
            Action::Gen(w) => match open.last_mut() {
                Some((_, kids)) => kids.push(Tree::Leaf(w.clone())),
                None => return Err(ActionSeqError::GenOutsideConstituent { index }),
            },
            Action::Reduce => {
                let (label, children) = open.pop().ok_or(ActionSeqError::ReduceWithoutOpen { index })?;
                if children.is_empty() {
                    return Err(ActionSeqError::EmptyConstituent { index });
                }
                let t = Tree::Node { label, children };
                match open.last_mut() {
                    Some((_, kids)) => kids.push(t),
                    None => root = Some(t),
                }
            }
        }
    }
    root.ok_or(ActionSeqError::Incomplete {
        index: actions.len(),
    })
}

/// Bracket-symbol rendering used by the composition-free model: `(X` for
/// each opened constituent, words as themselves, `)X` for each closing.
pub fn bracket_symbols(tree: &Tree) -> Vec<String> {
    tree_to_actions(tree)
        .into_iter()
        .scan(Vec::<String>::new(), |open, a| {
            Some(match a {
                Action::Nt(x) => {
                    let s = format!("({x}");
                    open.push(x);
                    s
                }
                Action::Gen(w) => w,
                Action::Reduce => format!("){}", open.pop().unwrap_or_default()),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_bracketed;

    fn nt(x: &str) -> Action {
        Action::Nt(x.into())
    }
    fn gen(w: &str) -> Action {
        Action::Gen(w.into())
    }

    #[test]
    fn hungry_cat_oracle() {
        let t = parse_bracketed("(S (NP the hungry cat) (VP meows))").unwrap();
        let want = vec![
            nt("S"),
            nt("NP"),
            gen("the"),
            gen("hungry"),
            gen("cat"),
            Action::Reduce,
            nt("VP"),
            gen("meows"),
            Action::Reduce,
            Action::Reduce,
        ];
        assert_eq!(tree_to_actions(&t), want);
        assert_eq!(actions_to_tree(&want).unwrap(), t);
    }

    #[test]
    fn single_node() {
        let t = parse_bracketed("(X a)").unwrap();
        let a = tree_to_actions(&t);
        assert_eq!(a, vec![nt("X"), gen("a"), Action::Reduce]);
        assert_eq!(actions_to_tree(&a).unwrap().to_string(), "(X a)");
    }

    #[test]
    fn malformed_sequences_name_first_bad_index() {
        assert_eq!(
            actions_to_tree(&[nt("X"), Action::Reduce]),
            Err(ActionSeqError::EmptyConstituent { index: 1 })
        );
        assert_eq!(
            actions_to_tree(&[Action::Reduce]),
            Err(ActionSeqError::ReduceWithoutOpen { index: 0 })
        );
        assert_eq!(
            actions_to_tree(&[gen("a")]),
            Err(ActionSeqError::GenOutsideConstituent { index: 0 })
        );
        assert_eq!(
            actions_to_tree(&[nt("X"), gen("a"), Action::Reduce, nt("Y")]),
            Err(ActionSeqError::AfterRoot { index: 3 })
        );
        assert_eq!(
            actions_to_tree(&[nt("X"), gen("a")]),
            Err(ActionSeqError::Incomplete { index: 2 })
        );
    }

    #[test]
    fn bracket_symbol_prefix_matches_length_seven_string() {
        let t = parse_bracketed("(S (NP the hungry cat) (VP meows))").unwrap();
        let syms = bracket_symbols(&t);
        assert_eq!(
            &syms[..7],
            &["(S", "(NP", "the", "hungry", "cat", ")NP", "(VP"]
        );
        assert_eq!(syms.len(), 2 * 3 + 4);
        assert_eq!(bracket_symbols(&parse_bracketed("(X a)").unwrap()), vec!["(X", "a", ")X"]);
    }
}
