use super::IncrementalModel;
use crate::error::ModelError;
use crate::rnng::Transition;

/// A derivation under a [`ScriptedModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedState {
    pub history: Vec<Transition>,
    pub open: usize,
    pub words: usize,
    pub log_prob: f64,
    pub finished: bool,
}

/// Generative model whose next-action distribution is an arbitrary function
/// of the action history. Used to hand-check search behaviour.
///
/// The rule returns `(action, probability)` pairs. Lexical entries for any
/// word other than the one being searched for are dropped, as are REDUCEs
/// with nothing open.
pub struct ScriptedModel<F> {
    rule: F,
}

impl<F> ScriptedModel<F>
where
    F: Fn(&[Transition]) -> Vec<(Transition, f64)>,
{
    pub fn new(rule: F) -> Self {
        ScriptedModel { rule }
    }
}

impl<F> IncrementalModel for ScriptedModel<F>
where
    F: Fn(&[Transition]) -> Vec<(Transition, f64)>,
{
    type State = ScriptedState;

    fn initial(&self) -> ScriptedState {
        ScriptedState {
            history: Vec::new(),
            open: 0,
            words: 0,
            log_prob: 0.0,
            finished: false,
        }
    }

    fn log_prob(&self, s: &ScriptedState) -> f64 {
        s.log_prob
    }

    fn words_emitted(&self, s: &ScriptedState) -> usize {
        s.words
    }

    fn is_finished(&self, s: &ScriptedState) -> bool {
        s.finished
    }

    fn transitions(&self, s: &ScriptedState) -> Vec<Transition> {
        s.history.clone()
    }

    fn successors(
        &self,
        s: &ScriptedState,
        next_word: Option<usize>,
        _sentence_len: usize,
    ) -> Result<Vec<(Transition, f64)>, ModelError> {
        if s.finished {
            return Ok(Vec::new());
        }
        Ok((self.rule)(&s.history)
            .into_iter()
            .filter(|(t, p)| {
                *p > 0.0
                    && match t {
                        Transition::Gen(w) => next_word == Some(*w),
                        Transition::Reduce => s.open > 0,
                        Transition::Nt(_) => true,
                    }
            })
            .map(|(t, p)| (t, p.ln()))
            .collect())
    }

    fn advance(&self, s: &ScriptedState, t: Transition, log_prob: f64) -> Result<ScriptedState, ModelError> {
        let mut next = s.clone();
        next.history.push(t);
        next.log_prob += log_prob;
        match t {
            Transition::Nt(_) => next.open += 1,
            Transition::Gen(_) => next.words += 1,
            Transition::Reduce => {
                if s.open == 0 {
                    return Err(ModelError::InvalidAction {
                        action: "REDUCE".into(),
                    });
                }
                next.open -= 1;
                next.finished = next.open == 0;
            }
        }
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::{advance_word, parse_ids, BeamConfig, SearchExit};

    #[test]
    fn forced_lexical_model_takes_one_pass() {
        // NT(0) first, then GEN of any of 200 words or REDUCE
        let m = ScriptedModel::new(|h: &[Transition]| {
            if h.is_empty() {
                vec![(Transition::Nt(0), 1.0)]
            } else {
                let mut v: Vec<_> = (0..200).map(|w| (Transition::Gen(w), 0.9 / 200.0)).collect();
                if h.len() > 1 {
                    v.push((Transition::Reduce, 0.1));
                }
                v
            }
        });
        let cfg = BeamConfig::with_k(100);
        let start = m.advance(&m.initial(), Transition::Nt(0), 0.0).unwrap();
        let (beam, rec) = advance_word(&m, vec![start], 7, 0, 2, &cfg).unwrap();
        assert_eq!(rec.iterations, 1);
        assert_eq!(beam.len(), 1);
        assert_eq!(rec.exit, SearchExit::SpaceExhausted);
    }

    #[test]
    fn single_word_sentence() {
        let m = ScriptedModel::new(|h: &[Transition]| match h.len() {
            0 => vec![(Transition::Nt(0), 1.0)],
            1 => vec![(Transition::Gen(0), 1.0)],
            _ => vec![(Transition::Reduce, 1.0)],
        });
        let out = parse_ids(&m, &[0], &BeamConfig::with_k(10)).unwrap();
        assert_eq!(
            out.best.history,
            vec![Transition::Nt(0), Transition::Gen(0), Transition::Reduce]
        );
        assert_eq!(out.best_log_prob, 0.0);
        assert_eq!(out.records[0].iterations, 2);
    }
}
