use std::collections::HashMap;
use std::fmt::Write as _;

use super::MetricsError;
use crate::corpus::Tree;

/// Labeled spans `(label, start, end)` of every nonterminal, root
/// included, with repeats kept.
pub fn labeled_spans(t: &Tree) -> Vec<(String, usize, usize)> {
    t.spans()
}

/// Micro-averaged labeled bracket counts. Scores are percentages.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BracketScore {
    pub matched: usize,
    pub gold: usize,
    pub predicted: usize,
    /// `(matched, gold, predicted)` per sentence.
    pub per_sentence: Vec<(usize, usize, usize)>,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        100.0 * a as f64 / b as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl BracketScore {
    pub fn precision(&self) -> f64 {
        ratio(self.matched, self.predicted)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.matched, self.gold)
    }

    pub fn f1(&self) -> f64 {
        harmonic(self.precision(), self.recall())
    }

    /// Text summary.
    pub fn summary(&self) -> String {
        format!(
            "sentences\t{}\nmatched\t{}\ngold\t{}\npredicted\t{}\nprecision\t{:.2}\nrecall\t{:.2}\nf1\t{:.2}\n",
            self.per_sentence.len(),
            self.matched,
            self.gold,
            self.predicted,
            self.precision(),
            self.recall(),
            self.f1()
        )
    }

    /// `sent matched gold predicted f1` rows.
    pub fn per_sentence_tsv(&self) -> String {
        let mut s = String::from("sent\tmatched\tgold\tpredicted\tf1\n");
        for (i, &(m, g, p)) in self.per_sentence.iter().enumerate() {
            let _ = writeln!(s, "{i}\t{m}\t{g}\t{p}\t{}", harmonic(ratio(m, p), ratio(m, g)));
        }
        s
    }
}

pub fn bracket_f1(gold: &[Tree], predicted: &[Tree]) -> Result<BracketScore, MetricsError> {
    if gold.len() != predicted.len() {
        return Err(MetricsError::CountMismatch {
            gold: gold.len(),
            predicted: predicted.len(),
        });
    }
    let mut score = BracketScore::default();
    for (i, (g, p)) in gold.iter().zip(predicted).enumerate() {
        if g.words() != p.words() {
            return Err(MetricsError::YieldMismatch { sentence: i });
        }
        let gs = labeled_spans(g);
        let ps = labeled_spans(p);
        let mut pool: HashMap<&(String, usize, usize), usize> = HashMap::new();
        for s in &gs {
            *pool.entry(s).or_default() += 1;
        }
        let mut matched = 0;
        for s in &ps {
            if let Some(c) = pool.get_mut(s) {
                if *c > 0 {
                    *c -= 1;
                    matched += 1;
                }
            }
        }
        score.matched += matched;
        score.gold += gs.len();
        score.predicted += ps.len();
        score.per_sentence.push((matched, gs.len(), ps.len()));
    }
    Ok(score)
}
