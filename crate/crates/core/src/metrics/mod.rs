//! Incremental complexity metrics read off beam-search traces, bracket F1
//! and perplexity.
//!
//! All information quantities are in bits. Entropy delta at the first word
//! of a sentence is taken against an entropy of 0 before the sentence.

mod f1;
mod table;

use std::collections::HashSet;
use std::f64::consts::LN_2;

use thiserror::Error;

pub use f1::{bracket_f1, labeled_spans, BracketScore};
pub use table::{read_metrics_tsv, write_metrics_tsv, MetricRow, METRICS_HEADER};

use crate::beam::{log_sum_exp, SearchRecord};
use crate::corpus::Tree;
use crate::error::ModelError;
use crate::rnng::Rnng;

/// Largest amount by which the posterior log mass may exceed the prior
/// before it counts as an inconsistency rather than rounding.
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("posterior log mass {posterior} exceeds prior log mass {prior}")]
    MassInconsistent { prior: f64, posterior: f64 },
    #[error("gold has {gold} sentences but prediction has {predicted}")]
    CountMismatch { gold: usize, predicted: usize },
    #[error("sentence {sentence}: predicted yield differs from gold")]
    YieldMismatch { sentence: usize },
    #[error("metrics table line {line}: {msg}")]
    Table { line: usize, msg: String },
    #[error("no words to average over")]
    NoWords,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Passes through the search loop needed to reach the word.
pub fn distance(r: &SearchRecord) -> usize {
    r.iterations
}

/// `(prior - posterior) / ln 2` for log masses. Rounding below
/// [`MASS_TOLERANCE`] is clamped to zero.
pub fn surprisal(prior_log_mass: f64, posterior_log_mass: f64) -> Result<f64, MetricsError> {
    let d = prior_log_mass - posterior_log_mass;
    if d < -MASS_TOLERANCE || d.is_nan() {
        return Err(MetricsError::MassInconsistent {
            prior: prior_log_mass,
            posterior: posterior_log_mass,
        });
    }
    Ok(d.max(0.0) / LN_2)
}

/// Shannon entropy in bits of the renormalized distribution given by
/// unnormalized log-probabilities.
pub fn entropy(log_probs: &[f64]) -> f64 {
    if log_probs.len() <= 1 {
        return 0.0;
    }
    let z = log_sum_exp(log_probs);
    let h: f64 = log_probs
        .iter()
        .map(|lp| {
            let l = lp - z;
            let p = l.exp();
            if p > 0.0 {
                -p * l
            } else {
                0.0
            }
        })
        .sum();
    (h / LN_2).max(0.0)
}

pub fn entropy_delta(prev: f64, cur: f64) -> f64 {
    cur - prev
}

/// Function words, lowercase. Anything else counts as a content word.
pub const DEFAULT_STOP_WORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are", "as", "at", "be",
    "because", "been", "before", "being", "below", "between", "both", "but", "by", "can", "could", "did", "do",
    "does", "doing", "down", "during", "each", "few", "for", "from", "further", "had", "has", "have", "having", "he",
    "her", "here", "hers", "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its",
    "itself", "just", "me", "might", "more", "most", "must", "my", "myself", "no", "nor", "not", "now", "of", "off",
    "on", "once", "only", "or", "other", "ought", "our", "ours", "ourselves", "out", "over", "own", "same", "shall",
    "she", "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them", "themselves", "then",
    "there", "these", "they", "this", "those", "through", "to", "too", "under", "until", "up", "upon", "very", "was",
    "we", "were", "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with", "would", "you",
    "your", "yours", "yourself", "yourselves", "near",
];

#[derive(Debug, Clone)]
pub struct StopList {
    words: HashSet<String>,
}

impl Default for StopList {
    fn default() -> Self {
        StopList::new(DEFAULT_STOP_WORDS.iter().copied())
    }
}

impl StopList {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        StopList {
            words: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }

    /// One word per line; `#` starts a comment.
    pub fn parse(text: &str) -> Self {
        StopList::new(
            text.lines()
                .map(|l| l.split('#').next().unwrap_or("").trim())
                .filter(|l| !l.is_empty()),
        )
    }

    /// Content words contain a letter and are not on the list.
    pub fn is_content(&self, token: &str) -> bool {
        token.chars().any(char::is_alphabetic) && !self.words.contains(&token.to_lowercase())
    }
}

/// One metric row per word of a parsed sentence.
pub fn metric_rows<S: AsRef<str>>(
    sentence: usize,
    tokens: &[S],
    records: &[SearchRecord],
    stop: &StopList,
) -> Result<Vec<MetricRow>, MetricsError> {
    let mut prev = 0.0;
    tokens
        .iter()
        .zip(records)
        .map(|(tok, r)| {
            let h = entropy(&r.nextword_log_probs);
            let row = MetricRow {
                sent: sentence,
                idx: r.word_index,
                token: tok.as_ref().to_string(),
                distance: distance(r),
                surprisal: surprisal(r.prior_log_mass, r.posterior_log_mass)?,
                entropy: h,
                entropy_delta: entropy_delta(prev, h),
                content: stop.is_content(tok.as_ref()),
                exhausted: r.exhausted(),
            };
            prev = h;
            Ok(row)
        })
        .collect()
}

/// `exp(total action NLL / word count)` over gold trees: perplexity per
/// word of the joint tree-and-string events.
pub fn action_perplexity(model: &Rnng, trees: &[Tree]) -> Result<f64, MetricsError> {
    let mut nll = 0.0;
    let mut words = 0;
    for t in trees {
        nll -= model.tree_logprob(t)?;
        words += t.num_terminals();
    }
    if words == 0 {
        return Err(MetricsError::NoWords);
    }
    Ok((nll / words as f64).exp())
}
