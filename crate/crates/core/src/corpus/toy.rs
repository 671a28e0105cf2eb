//! A small, nearly unambiguous phrase-structure language with five
//! nonterminals and twenty words, used for desk-scale training and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tree::Tree;

pub const DETERMINERS: [&str; 2] = ["the", "a"];
pub const NOUNS: [&str; 6] = ["cat", "queen", "rabbit", "hatter", "dog", "tea"];
pub const ADJECTIVES: [&str; 3] = ["hungry", "mad", "white"];
pub const INTRANSITIVE: [&str; 2] = ["sleeps", "meows"];
pub const TRANSITIVE: [&str; 4] = ["sees", "chases", "follows", "likes"];
pub const PREPOSITIONS: [&str; 3] = ["with", "near", "under"];

pub const NONTERMINALS: [&str; 5] = ["S", "NP", "VP", "PP", "ADJP"];

/// Every word of the language.
pub fn lexicon() -> Vec<&'static str> {
    DETERMINERS
        .iter()
        .chain(&NOUNS)
        .chain(&ADJECTIVES)
        .chain(&INTRANSITIVE)
        .chain(&TRANSITIVE)
        .chain(&PREPOSITIONS)
        .copied()
        .collect()
}

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> Tree {
    Tree::leaf(xs[rng.random_range(0..xs.len())])
}

fn noun_phrase(rng: &mut ChaCha8Rng, depth: usize) -> Tree {
    let mut kids = vec![pick(rng, &DETERMINERS)];
    let r: f64 = rng.random();
    if r < 0.25 {
        kids.push(Tree::node("ADJP", vec![pick(rng, &ADJECTIVES)]));
    }
    kids.push(pick(rng, &NOUNS));
    if depth < 2 && rng.random::<f64>() < 0.15 {
        kids.push(prep_phrase(rng, depth + 1));
    }
    Tree::node("NP", kids)
}

fn prep_phrase(rng: &mut ChaCha8Rng, depth: usize) -> Tree {
    Tree::node("PP", vec![pick(rng, &PREPOSITIONS), noun_phrase(rng, depth)])
}

fn verb_phrase(rng: &mut ChaCha8Rng) -> Tree {
    let r: f64 = rng.random();
    if r < 0.3 {
        Tree::node("VP", vec![pick(rng, &INTRANSITIVE)])
    } else if r < 0.5 {
        Tree::node("VP", vec![pick(rng, &INTRANSITIVE), prep_phrase(rng, 1)])
    } else {
        Tree::node("VP", vec![pick(rng, &TRANSITIVE), noun_phrase(rng, 1)])
    }
}

/// One sentence `(S NP VP)` of the toy language.
pub fn sample_tree(rng: &mut ChaCha8Rng) -> Tree {
    Tree::node("S", vec![noun_phrase(rng, 0), verb_phrase(rng)])
}

/// `n` sentences drawn deterministically from `seed`.
pub fn toy_treebank(n: usize, seed: u64) -> Vec<Tree> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sample_tree(&mut rng)).collect()
}

/// Random well-formed tree over arbitrary labels and words, for property
/// tests of the oracle. Depth counts nonterminal levels.
pub fn random_tree(rng: &mut impl Rng, max_depth: usize, labels: &[&str], words: &[&str]) -> Tree {
    fn go(rng: &mut impl Rng, depth: usize, max_depth: usize, labels: &[&str], words: &[&str]) -> Tree {
        let n = rng.random_range(1..=3);
        let kids = (0..n)
            .map(|_| {
                if depth + 1 < max_depth && rng.random_bool(0.4) {
                    go(rng, depth + 1, max_depth, labels, words)
                } else {
                    Tree::leaf(words[rng.random_range(0..words.len())])
                }
            })
            .collect();
        Tree::node(labels[rng.random_range(0..labels.len())], kids)
    }
    go(rng, 0, max_depth.max(1), labels, words)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inventory_sizes() {
        assert_eq!(lexicon().len(), 20);
        let trees = toy_treebank(300, 1);
        let mut labels: Vec<String> = trees
            .iter()
            .flat_map(|t| t.spans().into_iter().map(|s| s.0))
            .collect();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), 5);
        assert!(trees.iter().all(Tree::is_well_formed));
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(toy_treebank(10, 4), toy_treebank(10, 4));
        assert_ne!(toy_treebank(10, 4), toy_treebank(10, 5));
    }
}
