use std::fmt;

use crate::error::ParseTreeError;

/// Phrase-structure tree. Terminals carry words, nodes carry nonterminal
/// labels and at least one child.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Tree {
    Node { label: String, children: Vec<Tree> },
    Leaf(String),
}

impl Tree {
    pub fn node(label: impl Into<String>, children: Vec<Tree>) -> Tree {
        Tree::Node {
            label: label.into(),
            children,
        }
    }

    pub fn leaf(word: impl Into<String>) -> Tree {
        Tree::Leaf(word.into())
    }

    pub fn label(&self) -> &str {
        match self {
            Tree::Node { label, .. } => label,
            Tree::Leaf(w) => w,
        }
    }

    pub fn children(&self) -> &[Tree] {
        match self {
            Tree::Node { children, .. } => children,
            Tree::Leaf(_) => &[],
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Tree::Leaf(_))
    }

    /// Terminal yield, left to right.
    pub fn words(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_words(&mut out);
        out
    }

    fn collect_words<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Tree::Leaf(w) => out.push(w),
            Tree::Node { children, .. } => children.iter().for_each(|c| c.collect_words(out)),
        }
    }

    pub fn num_nonterminals(&self) -> usize {
        match self {
            Tree::Leaf(_) => 0,
            Tree::Node { children, .. } => 1 + children.iter().map(Tree::num_nonterminals).sum::<usize>(),
        }
    }

    pub fn num_terminals(&self) -> usize {
        match self {
            Tree::Leaf(_) => 1,
            Tree::Node { children, .. } => children.iter().map(Tree::num_terminals).sum(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Tree::Leaf(_) => 0,
            Tree::Node { children, .. } => 1 + children.iter().map(Tree::depth).max().unwrap_or(0),
        }
    }

    /// Labeled spans `(label, start, end)` over word positions, end exclusive,
    /// in preorder.
    pub fn spans(&self) -> Vec<(String, usize, usize)> {
        let mut out = Vec::new();
        self.collect_spans(0, &mut out);
        out
    }

    fn collect_spans(&self, start: usize, out: &mut Vec<(String, usize, usize)>) -> usize {
        match self {
            Tree::Leaf(_) => start + 1,
            Tree::Node { label, children } => {
                let slot = out.len();
                out.push((label.clone(), start, start));
                let mut end = start;
                for c in children {
                    end = c.collect_spans(end, out);
                }
                out[slot].2 = end;
                end
            }
        }
    }

    /// True when the tree satisfies the structural invariants: nonterminal
    /// root and no childless nonterminals.
    pub fn is_well_formed(&self) -> bool {
        fn ok(t: &Tree) -> bool {
            match t {
                Tree::Leaf(_) => true,
                Tree::Node { children, .. } => !children.is_empty() && children.iter().all(ok),
            }
        }
        !self.is_leaf() && ok(self)
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tree::Leaf(w) => f.write_str(w),
            Tree::Node { label, children } => {
                write!(f, "({label}")?;
                for c in children {
                    write!(f, " {c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

struct Reader<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    text: &'a str,
}

impl Reader<'_> {
    fn offset(&self) -> usize {
        self.chars.get(self.pos).map(|c| c.0).unwrap_or(self.text.len())
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.1.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn token(&mut self) -> String {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| !c.is_whitespace() && c != '(' && c != ')')
        {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().map(|c| c.1).collect()
    }

    fn expect_open(&mut self) -> Result<(), ParseTreeError> {
        self.skip_ws();
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => Err(ParseTreeError::Unexpected {
                offset: self.offset(),
                found: c,
            }),
            None => Err(ParseTreeError::UnexpectedEnd {
                offset: self.offset(),
            }),
        }
    }

    /// Parses after the opening bracket has been consumed.
    fn bracket(&mut self) -> Result<Option<Tree>, ParseTreeError> {
        let open_at = self.chars[self.pos - 1].0;
        self.skip_ws();
        let label = self.token();
        let mut children = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                None => {
                    return Err(ParseTreeError::UnexpectedEnd {
                        offset: self.offset(),
                    })
                }
                Some(')') => {
                    self.pos += 1;
                    break;
                }
                Some('(') => {
                    self.pos += 1;
                    if let Some(t) = self.bracket()? {
                        children.push(t);
                    }
                }
                Some(_) => children.push(Tree::Leaf(self.token())),
            }
        }
        if label.is_empty() {
            // unlabeled outer wrapper, as in "( (S ...) )"
            return match children.len() {
                0 => Ok(None),
                1 if !children[0].is_leaf() => Ok(children.pop()),
                _ => Err(ParseTreeError::MissingLabel { offset: open_at }),
            };
        }
        if children.is_empty() {
            return Err(ParseTreeError::EmptyConstituent { offset: open_at });
        }
        Ok(Some(Tree::Node { label, children }))
    }
}

/// Parses one bracketed tree such as `(S (NP the cat) (VP meows))`.
pub fn parse_bracketed(line: &str) -> Result<Tree, ParseTreeError> {
    let mut r = Reader {
        chars: line.char_indices().collect(),
        pos: 0,
        text: line,
    };
    r.expect_open()?;
    let tree = r
        .bracket()?
        .ok_or(ParseTreeError::EmptyConstituent { offset: 0 })?;
    r.skip_ws();
    if let Some(c) = r.peek() {
        return Err(ParseTreeError::Trailing {
            offset: r.offset(),
            found: c,
        });
    }
    Ok(tree)
}

/// Reads one tree per non-blank line.
pub fn read_treebank(text: &str) -> Result<Vec<Tree>, ParseTreeError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            parse_bracketed(l).map_err(|e| ParseTreeError::Line {
                line: i + 1,
                source: Box::new(e),
            })
        })
        .collect()
}
