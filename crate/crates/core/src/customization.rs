//! Zero-shot customization: pool the input reviews against the mean
//! encoding of background reviews that express a need, instead of against
//! the cluster's own mean encoding. Parameters are never touched.

use crate::abstractive::{AbstractModel, PreparedCluster};
use crate::condense::CondenseModel;
use crate::data::{Corpus, Vocabulary};
use crate::error::{Error, Result};
use crate::tensor_core::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundSet {
    pub label: String,
    /// Base-vocabulary ids.
    pub reviews: Vec<Vec<usize>>,
}

impl BackgroundSet {
    pub fn new(label: &str, reviews: Vec<Vec<usize>>) -> Result<Self> {
        let reviews: Vec<Vec<usize>> = reviews.into_iter().filter(|r| !r.is_empty()).collect();
        if reviews.is_empty() {
            return Err(Error::invalid(format!("background set '{label}' has no reviews")));
        }
        Ok(BackgroundSet {
            label: label.to_string(),
            reviews,
        })
    }

    /// Every review of `corpus`, or the first `limit` of them.
    pub fn from_corpus(label: &str, corpus: &Corpus, vocab: &Vocabulary, limit: Option<usize>) -> Result<Self> {
        let reviews = corpus
            .reviews()
            .take(limit.unwrap_or(usize::MAX))
            .map(|r| vocab.encode(&r.tokens))
            .collect();
        Self::new(label, reviews)
    }
}

/// `d̂`, the mean Condense encoding of the background reviews.
pub fn build_query(background: &BackgroundSet, condense: &CondenseModel) -> Result<Tensor> {
    if background.reviews.is_empty() {
        return Err(Error::invalid("empty background set"));
    }
    let encodings = background
        .reviews
        .iter()
        .map(|r| condense.encode_review(r).map(|e| e.d))
        .collect::<Result<Vec<_>>>()?;
    Tensor::mean_of(&encodings)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CustomSummary {
    /// Extended-vocabulary ids, without the end symbol.
    pub ids: Vec<usize>,
    pub pool_weights: Tensor,
}

/// General-purpose summarization with `query` in place of `d̄`.
pub fn summarize_customized(
    model: &AbstractModel,
    cluster: &PreparedCluster,
    query: &Tensor,
    beam: usize,
    max_len: usize,
    use_extracts: bool,
) -> Result<CustomSummary> {
    let ctx = model.decoder_context_with(cluster, Some(query), use_extracts)?;
    Ok(CustomSummary {
        ids: model.decode_ids(&ctx, beam, max_len)?,
        pool_weights: ctx.pool_weights,
    })
}
