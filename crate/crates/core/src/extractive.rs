//! Centroid-based review selection.

use std::cmp::Ordering;

use crate::condense::CondenseModel;
use crate::error::{Error, Result};
use crate::tensor_core::Tensor;

/// Maps a review to a fixed-width vector.
pub trait Embedder {
    fn embed(&self, tokens: &[usize]) -> Result<Tensor>;
}

/// Mean of the Condense word-level encodings of a review.
pub struct CondenseEmbedder<'a>(pub &'a CondenseModel);

impl Embedder for CondenseEmbedder<'_> {
    fn embed(&self, tokens: &[usize]) -> Result<Tensor> {
        if tokens.is_empty() {
            return Err(Error::invalid("cannot embed an empty review"));
        }
        let enc = self.0.encode_review(tokens)?;
        Tensor::mean_of(&enc.word_encodings)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Distance {
    #[default]
    Euclidean,
    Cosine,
}

impl Distance {
    pub fn between(self, a: &Tensor, b: &Tensor) -> f64 {
        match self {
            Distance::Euclidean => a
                .data()
                .iter()
                .zip(b.data())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Distance::Cosine => 1.0 - a.cosine(b),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentroidSelection {
    pub centroid: Tensor,
    /// Nearest first; equal distances keep the lower index first.
    pub selected: Vec<usize>,
    pub distances: Vec<f64>,
}

/// The `k` embeddings nearest to their centroid.
pub fn select_nearest(embeddings: &[Tensor], k: usize, distance: Distance) -> Result<CentroidSelection> {
    let n = embeddings.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} must lie in 1..={n}")));
    }
    let centroid = Tensor::mean_of(embeddings)?;
    let distances: Vec<f64> = embeddings
        .iter()
        .map(|e| distance.between(e, &centroid))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        distances[a]
            .partial_cmp(&distances[b])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(k);
    Ok(CentroidSelection {
        centroid,
        selected: order,
        distances,
    })
}

pub fn select_top_k(
    reviews: &[Vec<usize>],
    k: usize,
    embedder: &dyn Embedder,
    distance: Distance,
) -> Result<CentroidSelection> {
    if k > reviews.len() {
        return Err(Error::invalid(format!("k = {k} exceeds {} reviews", reviews.len())));
    }
    let embeddings = reviews
        .iter()
        .map(|r| embedder.embed(r))
        .collect::<Result<Vec<_>>>()?;
    select_nearest(&embeddings, k, distance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condense::CondenseConfig;

    struct Lookup(Vec<Tensor>);

    impl Embedder for Lookup {
        fn embed(&self, tokens: &[usize]) -> Result<Tensor> {
            Ok(self.0[tokens[0]].clone())
        }
    }

    #[test]
    fn identical_reviews_pick_lowest_indices() {
        let e = Tensor::vector(vec![1.0, 2.0]);
        let sel = select_nearest(&vec![e; 5], 3, Distance::Euclidean).unwrap();
        assert_eq!(sel.selected, vec![0, 1, 2]);
    }

    #[test]
    fn k_equals_n_returns_all() {
        let embs: Vec<Tensor> = (0..4).map(|i| Tensor::vector(vec![i as f64, 0.0])).collect();
        let mut sel = select_nearest(&embs, 4, Distance::Euclidean).unwrap().selected;
        sel.sort();
        assert_eq!(sel, vec![0, 1, 2, 3]);
    }

    #[test]
    fn outlier_excluded() {
        let embs = vec![
            Tensor::vector(vec![0.0, 0.1]),
            Tensor::vector(vec![0.1, 0.0]),
            Tensor::vector(vec![50.0, 50.0]),
            Tensor::vector(vec![0.0, -0.1]),
            Tensor::vector(vec![-0.1, 0.0]),
        ];
        let reviews: Vec<Vec<usize>> = (0..5).map(|i| vec![i]).collect();
        let sel = select_top_k(&reviews, 4, &Lookup(embs), Distance::Euclidean).unwrap();
        let mut s = sel.selected.clone();
        s.sort();
        assert_eq!(s, vec![0, 1, 3, 4]);
    }

    #[test]
    fn k_out_of_range_rejected() {
        let reviews = vec![vec![0], vec![1]];
        let embs = vec![Tensor::vector(vec![0.0]), Tensor::vector(vec![1.0])];
        assert!(select_top_k(&reviews, 3, &Lookup(embs.clone()), Distance::Euclidean).is_err());
        assert!(select_nearest(&embs, 0, Distance::Euclidean).is_err());
    }

    #[test]
    fn cosine_distance_available() {
        let embs = vec![
            Tensor::vector(vec![1.0, 0.0]),
            Tensor::vector(vec![1.0, 1.0]),
            Tensor::vector(vec![0.0, 1.0]),
        ];
        let sel = select_nearest(&embs, 1, Distance::Cosine).unwrap();
        assert_eq!(sel.selected, vec![1]);
    }

    fn tiny_condense() -> CondenseModel {
        CondenseModel::init(
            CondenseConfig {
                vocab_size: 10,
                embedding_dim: 4,
                hidden_dim: 3,
                dropout: 0.5,
            },
            1,
        )
    }

    #[test]
    fn condense_embedder_means_word_encodings() {
        let m = tiny_condense();
        let emb = CondenseEmbedder(&m);
        let enc = m.encode_review(&[5]).unwrap();
        assert_eq!(emb.embed(&[5]).unwrap(), enc.word_encodings[0]);
        let enc = m.encode_review(&[5, 7]).unwrap();
        let mean = Tensor::mean_of(&enc.word_encodings).unwrap();
        let got = emb.embed(&[5, 7]).unwrap();
        for (a, b) in got.data().iter().zip(mean.data()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(emb.embed(&[5, 7]).unwrap(), got);
        assert!(emb.embed(&[]).is_err());
    }
}
