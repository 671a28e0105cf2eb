//! Generative neural phrase-structure grammars and the machinery to parse
//! with them incrementally and read complexity measures off the search.

pub mod beam;
pub mod corpus;
pub mod error;
pub mod lm;
pub mod metrics;
pub mod rnng;

pub use error::{ActionSeqError, CorpusError, ModelError, ParseTreeError};
