use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::tree::Tree;
use crate::error::CorpusError;

/// Orthographic classes for out-of-vocabulary words. They occupy the first
/// word ids of every vocabulary.
pub const UNK_CLASSES: [&str; 15] = [
    "<unk>",
    "<unk-cap>",
    "<unk-allcaps>",
    "<unk-num>",
    "<unk-hyph>",
    "<unk-punct>",
    "<unk-ing>",
    "<unk-ion>",
    "<unk-ity>",
    "<unk-est>",
    "<unk-ed>",
    "<unk-ly>",
    "<unk-er>",
    "<unk-al>",
    "<unk-s>",
];

// Checked in order, after the lowercase test.
const SUFFIXES: [(&str, &str); 9] = [
    ("ing", "<unk-ing>"),
    ("ion", "<unk-ion>"),
    ("ity", "<unk-ity>"),
    ("est", "<unk-est>"),
    ("ed", "<unk-ed>"),
    ("ly", "<unk-ly>"),
    ("er", "<unk-er>"),
    ("al", "<unk-al>"),
    ("s", "<unk-s>"),
];

/// Unknown class for a word not in the vocabulary. Capitalization is
/// ignored sentence-initially, where it carries no information.
pub fn unk_class(word: &str, sentence_initial: bool) -> &'static str {
    if word.chars().any(|c| c.is_ascii_digit()) {
        return "<unk-num>";
    }
    if !word.chars().any(char::is_alphanumeric) {
        return "<unk-punct>";
    }
    if word.contains('-') {
        return "<unk-hyph>";
    }
    let first_upper = word.chars().next().is_some_and(char::is_uppercase);
    if first_upper && !sentence_initial {
        let letters: Vec<char> = word.chars().filter(|c| c.is_alphabetic()).collect();
        return if letters.len() > 1 && letters.iter().all(|c| c.is_uppercase()) {
            "<unk-allcaps>"
        } else {
            "<unk-cap>"
        };
    }
    let lower = word.to_lowercase();
    SUFFIXES
        .iter()
        .find(|(suf, _)| lower.len() > suf.len() + 1 && lower.ends_with(suf))
        .map(|(_, c)| *c)
        .unwrap_or("<unk>")
}

/// Word and nonterminal inventories with dense ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    words: Vec<String>,
    counts: Vec<usize>,
    nonterminals: Vec<String>,
    min_count: usize,
    #[serde(skip)]
    word_ids: HashMap<String, usize>,
    #[serde(skip)]
    nt_ids: HashMap<String, usize>,
}

fn ranked(counts: HashMap<String, usize>) -> Vec<(String, usize)> {
    let mut v: Vec<_> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

impl Vocab {
    /// Words seen at least `min_count` times get their own id, ranked by
    /// frequency then lexicographically; everything else falls back to an
    /// unknown class.
    pub fn build(trees: &[Tree], min_count: usize) -> Result<Vocab, CorpusError> {
        if trees.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        let mut wc: HashMap<String, usize> = HashMap::new();
        let mut nc: HashMap<String, usize> = HashMap::new();
        for t in trees {
            for w in t.words() {
                *wc.entry(w.to_string()).or_default() += 1;
            }
            for (label, _, _) in t.spans() {
                *nc.entry(label).or_default() += 1;
            }
        }
        let mut words: Vec<String> = UNK_CLASSES.iter().map(|s| s.to_string()).collect();
        let mut counts = vec![0; UNK_CLASSES.len()];
        let mut rare = Vec::new();
        for (w, c) in ranked(wc) {
            if c >= min_count.max(1) && !UNK_CLASSES.contains(&w.as_str()) {
                words.push(w);
                counts.push(c);
            } else {
                rare.push((w, c));
            }
        }
        let nonterminals = ranked(nc).into_iter().map(|(n, _)| n).collect();
        let mut v = Vocab {
            words,
            counts,
            nonterminals,
            min_count,
            word_ids: HashMap::new(),
            nt_ids: HashMap::new(),
        };
        v.reindex();
        // rare words are counted under the class they map to mid-sentence
        for (w, c) in rare {
            let id = v.word_ids[unk_class(&w, false)];
            v.counts[id] += c;
        }
        Ok(v)
    }

    fn reindex(&mut self) {
        self.word_ids = self.words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        self.nt_ids = self
            .nonterminals
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
    }

    pub fn from_json(text: &str) -> serde_json::Result<Vocab> {
        let mut v: Vocab = serde_json::from_str(text)?;
        v.reindex();
        Ok(v)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("vocabulary serializes")
    }

    pub fn num_words(&self) -> usize {
        self.words.len()
    }

    pub fn num_nonterminals(&self) -> usize {
        self.nonterminals.len()
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn nonterminal(&self, id: usize) -> &str {
        &self.nonterminals[id]
    }

    pub fn nonterminal_id(&self, label: &str) -> Option<usize> {
        self.nt_ids.get(label).copied()
    }

    pub fn word_id(&self, word: &str) -> Option<usize> {
        self.word_ids.get(word).copied()
    }

    pub fn count(&self, id: usize) -> usize {
        self.counts[id]
    }

    /// Total: known words map to themselves, everything else to its class.
    pub fn map_token(&self, word: &str, sentence_initial: bool) -> usize {
        self.word_ids
            .get(word)
            .copied()
            .unwrap_or_else(|| self.word_ids[unk_class(word, sentence_initial)])
    }

    pub fn map_sentence<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens
            .iter()
            .enumerate()
            .map(|(i, w)| self.map_token(w.as_ref(), i == 0))
            .collect()
    }

    pub fn is_unk(&self, id: usize) -> bool {
        id < UNK_CLASSES.len()
    }

    /// `word<TAB>id<TAB>count` rows.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        for (i, w) in self.words.iter().enumerate() {
            let _ = writeln!(s, "{w}\t{i}\t{}", self.counts[i]);
        }
        s
    }

    /// Stable 64-bit fingerprint of both inventories.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for s in self.words.iter().chain(std::iter::once(&"\u{0}".to_string())).chain(&self.nonterminals) {
            for b in s.bytes().chain(std::iter::once(0xff)) {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        format!("{h:016x}")
    }
}
