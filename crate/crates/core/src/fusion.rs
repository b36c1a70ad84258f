//! Multi-source fusion of review encodings.

use std::collections::BTreeMap;

use crate::condense::{CondenseModel, ReviewEncoding};
use crate::error::{Error, Result};
use crate::tensor_core::{Mode, Tape, Tensor, Var};

/// Number of negative summaries per fusion-loss term.
pub const NUM_NEGATIVES: usize = 5;

/// Condense output for every review of a cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterEncodings {
    pub review_encodings: Vec<Tensor>,
    pub word_encodings: Vec<Vec<Tensor>>,
    pub word_ids: Vec<Vec<usize>>,
}

impl ClusterEncodings {
    pub fn from_reviews(encodings: Vec<ReviewEncoding>, word_ids: Vec<Vec<usize>>) -> Result<Self> {
        if encodings.is_empty() {
            return Err(Error::invalid("a cluster needs at least one review"));
        }
        if encodings.len() != word_ids.len()
            || encodings
                .iter()
                .zip(&word_ids)
                .any(|(e, w)| e.word_encodings.len() != w.len())
        {
            return Err(Error::invalid("word ids not aligned with word encodings"));
        }
        let (review_encodings, word_encodings) = encodings
            .into_iter()
            .map(|e| (e.d, e.word_encodings))
            .unzip();
        Ok(ClusterEncodings {
            review_encodings,
            word_encodings,
            word_ids,
        })
    }

    pub fn encode(condense: &CondenseModel, reviews: &[Vec<usize>]) -> Result<Self> {
        let encs = reviews
            .iter()
            .map(|r| condense.encode_review(r))
            .collect::<Result<Vec<_>>>()?;
        Self::from_reviews(encs, reviews.to_vec())
    }

    pub fn len(&self) -> usize {
        self.review_encodings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.review_encodings.is_empty()
    }

    /// `d̄`, the mean review encoding.
    pub fn mean_encoding(&self) -> Tensor {
        Tensor::mean_of(&self.review_encodings).expect("non-empty, equal shapes")
    }

    pub fn review_matrix(&self) -> Tensor {
        Tensor::stack_rows(&self.review_encodings).expect("equal widths")
    }
}

/// One averaged encoding per distinct input word, ordered by word id.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedWords {
    pub unique_words: Vec<usize>,
    /// `[V, D]`
    pub encodings: Tensor,
    pub counts: Vec<usize>,
}

impl FusedWords {
    pub fn len(&self) -> usize {
        self.unique_words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unique_words.is_empty()
    }
}

/// Averages all token encodings that share a word id.
pub fn fuse_words(encodings: &ClusterEncodings) -> Result<FusedWords> {
    let mut sums: BTreeMap<usize, (Vec<f64>, usize)> = BTreeMap::new();
    for (ids, encs) in encodings.word_ids.iter().zip(&encodings.word_encodings) {
        for (&w, h) in ids.iter().zip(encs) {
            let entry = sums
                .entry(w)
                .or_insert_with(|| (vec![0.0; h.len()], 0));
            for (a, x) in entry.0.iter_mut().zip(h.data()) {
                *a += x;
            }
            entry.1 += 1;
        }
    }
    if sums.is_empty() {
        return Err(Error::invalid("cluster has no tokens"));
    }
    let mut unique_words = Vec::with_capacity(sums.len());
    let mut rows = Vec::with_capacity(sums.len());
    let mut counts = Vec::with_capacity(sums.len());
    for (w, (sum, n)) in sums {
        unique_words.push(w);
        rows.push(Tensor::vector(sum.into_iter().map(|x| x / n as f64).collect()));
        counts.push(n);
    }
    Ok(FusedWords {
        unique_words,
        encodings: Tensor::stack_rows(&rows)?,
        counts,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct PooledVars {
    pub d_prime: Var,
    pub weights: Var,
}

/// Attentive pooling: `a = softmax(D W_p q)`, `d' = Σ a_i d_i`, with the
/// reviews stacked as rows of `reviews` (`[N, D]`).
pub fn pool_reviews(tape: &mut Tape<'_>, reviews: Var, query: Var, w_p: Var) -> Result<PooledVars> {
    let projected = tape.matvec(w_p, query)?;
    let scores = tape.matvec(reviews, projected)?;
    let weights = tape.softmax(scores)?;
    let reviews_t = tape.transpose(reviews)?;
    let d_prime = tape.matvec(reviews_t, weights)?;
    Ok(PooledVars { d_prime, weights })
}

/// Tensor-level pooling; returns `(d', a)`.
pub fn pool_review_tensors(reviews: &[Tensor], query: &Tensor, w_p: &Tensor) -> Result<(Tensor, Tensor)> {
    let mut tape = Tape::new(Mode::Eval);
    let r = tape.constant(Tensor::stack_rows(reviews)?)?;
    let q = tape.constant_ref(query)?;
    let w = tape.constant_ref(w_p)?;
    let pooled = pool_reviews(&mut tape, r, q, w)?;
    Ok((
        tape.value(pooled.d_prime).clone(),
        tape.value(pooled.weights).clone(),
    ))
}

/// `Σ_i max(0, 1 - d'·z + d'·n_i)` over exactly five negatives.
pub fn fusion_loss(tape: &mut Tape<'_>, d_prime: Var, gold: Var, negatives: &[Var]) -> Result<Var> {
    if negatives.len() != NUM_NEGATIVES {
        return Err(Error::invalid(format!(
            "fusion loss takes {NUM_NEGATIVES} negatives, got {}",
            negatives.len()
        )));
    }
    let positive = tape.dot(d_prime, gold)?;
    let margin = tape.affine(positive, -1.0, 1.0)?;
    let mut terms = Vec::with_capacity(NUM_NEGATIVES);
    for &n in negatives {
        let neg = tape.dot(d_prime, n)?;
        let slack = tape.add(margin, neg)?;
        terms.push(tape.relu(slack)?);
    }
    tape.sum_all(&terms)
}
