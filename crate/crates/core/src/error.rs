use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseTreeError {
    #[error("unexpected end of input at offset {offset}")]
    UnexpectedEnd { offset: usize },
    #[error("unexpected `{found}` at offset {offset}")]
    Unexpected { offset: usize, found: char },
    #[error("empty constituent at offset {offset}")]
    EmptyConstituent { offset: usize },
    #[error("unlabeled bracket at offset {offset} must wrap exactly one tree")]
    MissingLabel { offset: usize },
    #[error("trailing `{found}` at offset {offset}")]
    Trailing { offset: usize, found: char },
    #[error("line {line}: {source}")]
    Line {
        line: usize,
        source: Box<ParseTreeError>,
    },
}

/// Malformed oracle action sequence; `index` is the first offending action.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActionSeqError {
    #[error("action {index}: REDUCE with no open constituent")]
    ReduceWithoutOpen { index: usize },
    #[error("action {index}: REDUCE would close an empty constituent")]
    EmptyConstituent { index: usize },
    #[error("action {index}: GEN outside any open constituent")]
    GenOutsideConstituent { index: usize },
    #[error("action {index}: action after the root was completed")]
    AfterRoot { index: usize },
    #[error("action {index}: sequence ends with open constituents")]
    Incomplete { index: usize },
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error(transparent)]
    Parse(#[from] ParseTreeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("vocabulary table line {line}: {msg}")]
    VocabTable { line: usize, msg: String },
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Neural(#[from] neural::NeuralError),
    #[error("action {action} is not valid in this state")]
    InvalidAction { action: String },
    #[error("oracle action {index} ({action}) is invalid: {reason}")]
    OracleMismatch {
        index: usize,
        action: String,
        reason: String,
    },
    #[error("unknown nonterminal `{0}`")]
    UnknownNonterminal(String),
    #[error("composition needs at least one daughter")]
    EmptyComposition,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Actions(#[from] ActionSeqError),
}
