//! Length-normalized beam search over any step-wise scorer.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// A left-to-right model: given a state and the previous token, returns
/// log-probabilities over the next token and the advanced state.
pub trait Scorer {
    type State: Clone;

    fn start(&self) -> Result<Self::State>;

    fn step(&self, state: &Self::State, prev: usize) -> Result<(Vec<f64>, Self::State)>;
}

#[derive(Debug, Clone)]
pub struct Hypothesis<S> {
    /// Emitted tokens, without the start symbol; ends with the end symbol
    /// when the model chose to stop.
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    pub state: S,
    pub finished: bool,
}

impl<S> Hypothesis<S> {
    /// Cumulative log-probability divided by the token count.
    pub fn score(&self) -> f64 {
        self.log_prob / self.tokens.len().max(1) as f64
    }
}

/// Expands the best `beam` partial hypotheses at each step. A hypothesis
/// finishes when it emits `eos` or reaches `max_len` tokens. Search stops
/// once `beam` hypotheses have finished or none remain alive; finished
/// hypotheses are returned best first by normalized score.
pub fn beam_search<M: Scorer>(
    model: &M,
    bos: usize,
    eos: usize,
    beam: usize,
    max_len: usize,
) -> Result<Vec<Hypothesis<M::State>>> {
    if beam == 0 {
        return Err(Error::invalid("beam size must be at least 1"));
    }
    if max_len == 0 {
        return Err(Error::invalid("max_len must be at least 1"));
    }
    let mut live = vec![Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
        state: model.start()?,
        finished: false,
    }];
    let mut finished: Vec<Hypothesis<M::State>> = Vec::new();

    while !live.is_empty() && finished.len() < beam {
        let mut expanded = Vec::with_capacity(live.len());
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (h, hyp) in live.iter().enumerate() {
            let prev = hyp.tokens.last().copied().unwrap_or(bos);
            let (log_probs, next) = model.step(&hyp.state, prev)?;
            for (w, &lp) in log_probs.iter().enumerate() {
                if lp.is_finite() {
                    candidates.push((hyp.log_prob + lp, h, w));
                }
            }
            expanded.push(next);
        }
        candidates.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        let mut next_live = Vec::with_capacity(beam);
        for &(log_prob, h, w) in candidates.iter().take(beam) {
            let mut tokens = live[h].tokens.clone();
            tokens.push(w);
            let done = w == eos || tokens.len() >= max_len;
            let hyp = Hypothesis {
                tokens,
                log_prob,
                state: expanded[h].clone(),
                finished: done,
            };
            if done {
                finished.push(hyp);
            } else {
                next_live.push(hyp);
            }
        }
        live = next_live;
    }
    // stable: equal scores keep the order in which they finished
    finished.sort_by(|a, b| b.score().partial_cmp(&a.score()).unwrap_or(Ordering::Equal));
    Ok(finished)
}

/// Picks the most probable token at every step (lowest id on ties).
pub fn greedy<M: Scorer>(model: &M, bos: usize, eos: usize, max_len: usize) -> Result<Hypothesis<M::State>> {
    if max_len == 0 {
        return Err(Error::invalid("max_len must be at least 1"));
    }
    let mut hyp = Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
        state: model.start()?,
        finished: false,
    };
    while !hyp.finished {
        let prev = hyp.tokens.last().copied().unwrap_or(bos);
        let (log_probs, next) = model.step(&hyp.state, prev)?;
        let w = crate::condense::argmax(&log_probs);
        hyp.log_prob += log_probs[w];
        hyp.tokens.push(w);
        hyp.state = next;
        hyp.finished = w == eos || hyp.tokens.len() >= max_len;
    }
    Ok(hyp)
}

/// Scores every sequence the search could produce and returns the best by
/// normalized score, preferring the lexicographically smaller sequence on
/// ties. Exponential; for oracle checks on tiny models only.
pub fn exhaustive_best<M: Scorer>(model: &M, bos: usize, eos: usize, max_len: usize) -> Result<Option<(Vec<usize>, f64)>> {
    fn walk<M: Scorer>(
        model: &M,
        state: &M::State,
        prefix: &mut Vec<usize>,
        log_prob: f64,
        ctx: (usize, usize, usize),
        best: &mut Option<(Vec<usize>, f64)>,
    ) -> Result<()> {
        let (bos, eos, max_len) = ctx;
        let prev = prefix.last().copied().unwrap_or(bos);
        let (log_probs, next) = model.step(state, prev)?;
        for (w, &lp) in log_probs.iter().enumerate() {
            if !lp.is_finite() {
                continue;
            }
            prefix.push(w);
            let total = log_prob + lp;
            if w == eos || prefix.len() >= max_len {
                let score = total / prefix.len() as f64;
                if best.as_ref().map_or(true, |(_, s)| score > *s) {
                    *best = Some((prefix.clone(), score));
                }
            } else {
                walk(model, &next, prefix, total, ctx, best)?;
            }
            prefix.pop();
        }
        Ok(())
    }
    let mut best = None;
    walk(model, &model.start()?, &mut Vec::new(), 0.0, (bos, eos, max_len), &mut best)?;
    Ok(best)
}
