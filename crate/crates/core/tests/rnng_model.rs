use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rnng_core::corpus::{parse_bracketed, toy_treebank, Tree, Vocab};
use rnng_core::rnng::{Limits, ParserState, Rnng, RnngConfig, StackSymbol, Transition, Variant};

fn model(trees: &[Tree], variant: Variant, seed: u64) -> Rnng {
    Rnng::new(RnngConfig::small(variant, seed), Vocab::build(trees, 1).unwrap()).unwrap()
}

fn hash_state(s: &ParserState) -> u64 {
    let mut h = DefaultHasher::new();
    for x in s.summary() {
        x.to_bits().hash(&mut h);
    }
    s.log_prob().to_bits().hash(&mut h);
    s.stack_len().hash(&mut h);
    s.open_count().hash(&mut h);
    h.finish()
}

/// Every valid (kind, symbol) completion, with its joint log-probability.
fn completions(m: &Rnng, s: &ParserState, n: Option<usize>) -> Vec<(Transition, f64)> {
    let sc = m.scores(s, n).unwrap();
    let mut out = Vec::new();
    for x in 0..m.num_nonterminals() {
        if let Some(lp) = sc.log_prob(Transition::Nt(x)) {
            out.push((Transition::Nt(x), lp));
        }
    }
    if let Some(lp) = sc.log_prob(Transition::Reduce) {
        out.push((Transition::Reduce, lp));
    }
    for w in 0..m.vocab().num_words() {
        if let Some(lp) = sc.log_prob(Transition::Gen(w)) {
            out.push((Transition::Gen(w), lp));
        }
    }
    out
}

#[test]
fn normalization_persistence_and_summaries_along_oracles() {
    let trees = toy_treebank(12, 3);
    for variant in [Variant::Full, Variant::NoComp] {
        let m = model(&trees, variant, 7);
        for t in &trees {
            let o = m.oracle(t).unwrap();
            let n = Some(o.num_words());
            let mut s = m.init_state();
            for &a in &o.transitions {
                let total: f64 = completions(&m, &s, n).iter().map(|(_, lp)| lp.exp()).sum();
                assert!((total - 1.0).abs() < 1e-8, "mass {total}");
                let before = hash_state(&s);
                let next = m.apply_action(&s, a, n).unwrap();
                assert_eq!(hash_state(&s), before, "source state mutated");
                assert_eq!(m.recompute_summary(&next).unwrap(), next.summary());
                s = next;
            }
            assert!(s.is_finished());
            assert_eq!(s.log_prob(), m.tree_logprob(t).unwrap());
        }
    }
}

#[test]
fn gen_probability_factorizes() {
    let trees = toy_treebank(5, 1);
    let m = model(&trees, Variant::Full, 2);
    let o = m.oracle(&trees[0]).unwrap();
    let n = Some(o.num_words());
    let s = m.apply_action(&m.init_state(), o.transitions[0], n).unwrap();
    let s = m.apply_action(&s, o.transitions[1], n).unwrap();
    let sc = m.scores(&s, n).unwrap();
    let words = m.score_word(&s).unwrap();
    let acts = m.score_actions(&s, n).unwrap();
    for w in [15, 16, 20] {
        let joint = sc.log_prob(Transition::Gen(w)).unwrap().exp();
        assert!((joint - acts[2].exp() * words[w].exp()).abs() < 1e-15);
    }
    let lse: f64 = words.iter().map(|l| l.exp()).sum();
    assert!((lse - 1.0).abs() < 1e-9);
    let nts: f64 = m.score_nonterminal(&s).unwrap().iter().map(|l| l.exp()).sum();
    assert!((nts - 1.0).abs() < 1e-9);
}

#[test]
fn untrained_zero_scorer_is_uniform_over_actions() {
    let trees = toy_treebank(5, 1);
    let mut m = model(&trees, Variant::Full, 2);
    for name in ["action.1.w", "action.1.b"] {
        let id = m.params().id(name).unwrap();
        m.params_mut().get_mut(id).values_mut().fill(0.0);
    }
    let o = m.oracle(&trees[0]).unwrap();
    let mut s = m.init_state();
    for &a in &o.transitions[..3] {
        s = m.apply_action(&s, a, None).unwrap();
    }
    // NT(S) NT(NP) GEN(w): all three kinds are open
    for lp in m.score_actions(&s, None).unwrap() {
        assert!((lp + 3f64.ln()).abs() < 1e-12);
    }
}

#[test]
fn one_label_one_word_grammar_is_forced() {
    let trees = vec![parse_bracketed("(X a)").unwrap()];
    let mut m = model(&trees, Variant::Full, 1);
    m.set_limits(Limits {
        max_open: 1,
        allow_early_close: false,
    });
    let s = m.init_state();
    assert_eq!(m.score_nonterminal(&s).unwrap(), vec![0.0]);
    let s = m.apply_action(&s, Transition::Nt(0), Some(1)).unwrap();
    assert_eq!(m.score_actions(&s, Some(1)).unwrap()[2], 0.0);
}

#[test]
fn full_reduce_records_daughters_in_order() {
    let trees = vec![parse_bracketed("(S (NP the hungry cat) (VP meows))").unwrap()];
    let m = model(&trees, Variant::Full, 4);
    let o = m.oracle(&trees[0]).unwrap();
    let mut s = m.init_state();
    for &a in &o.transitions[..5] {
        s = m.apply_action(&s, a, Some(4)).unwrap();
    }
    let words: Vec<StackSymbol> = s.entries()[2..].iter().map(|e| e.symbol.clone()).collect();
    let reduced = m.apply_action(&s, Transition::Reduce, Some(4)).unwrap();
    match &reduced.top_entry().unwrap().symbol {
        StackSymbol::Closed(c) => {
            assert_eq!(c.daughters, words);
            assert_eq!(m.vocab().nonterminal(c.label), "NP");
        }
        other => panic!("{other:?}"),
    }
}

fn enumerate(m: &Rnng, s: &ParserState, n: Option<usize>, max_words: usize, acc: &mut Vec<f64>) {
    if s.is_finished() {
        acc.push(s.log_prob());
        return;
    }
    for (t, lp) in completions(m, s, n) {
        if matches!(t, Transition::Gen(_)) && s.words_emitted() == max_words {
            continue;
        }
        let next = m.advance(s, t, lp).unwrap();
        enumerate(m, &next, n, max_words, acc);
    }
}

#[test]
fn bounded_derivation_mass_is_at_most_one() {
    let trees = vec![parse_bracketed("(S (A a) b)").unwrap()];
    let mut m = model(&trees, Variant::Full, 5);
    m.set_limits(Limits {
        max_open: 2,
        allow_early_close: false,
    });
    // generative mode, all lengths up to 2
    let mut acc = Vec::new();
    enumerate(&m, &m.init_state(), None, 2, &mut acc);
    let total: f64 = acc.iter().map(|l| l.exp()).sum();
    assert!(total > 0.0 && total <= 1.0, "{total}");
    // known length: derivations of exactly two words
    let mut acc = Vec::new();
    enumerate(&m, &m.init_state(), Some(2), 2, &mut acc);
    let total2: f64 = acc.iter().map(|l| l.exp()).sum();
    assert!(total2 > 0.0 && total2 <= 1.0, "{total2}");
    // tree_logprob of an enumerated tree agrees with the enumeration path
    let lp = m.tree_logprob(&trees[0]).unwrap();
    assert!(acc.iter().any(|x| (x - lp).abs() < 1e-12));
}

#[test]
fn variants_share_everything_but_reduce() {
    let trees = toy_treebank(20, 8);
    let full = model(&trees, Variant::Full, 3);
    let plain = model(&trees, Variant::NoComp, 3);
    for t in &trees {
        let o = full.oracle(t).unwrap();
        let n = Some(o.num_words());
        let (mut a, mut b) = (full.init_state(), plain.init_state());
        for &x in &o.transitions {
            let (sa, sb) = (full.scores(&a, n).unwrap(), plain.scores(&b, n).unwrap());
            assert_eq!(sa.action, sb.action);
            assert_eq!(sa.word, sb.word);
            assert_eq!(sa.nonterminal, sb.nonterminal);
            if x == Transition::Reduce {
                break;
            }
            a = full.apply_action(&a, x, n).unwrap();
            b = plain.apply_action(&b, x, n).unwrap();
        }
    }
}
