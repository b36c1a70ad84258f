use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::corpus::{Corpus, ReviewCluster};
use crate::error::{Error, Result};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const TITLE: &str = "<title>";

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const BOS_ID: usize = 2;
pub const EOS_ID: usize = 3;
pub const TITLE_ID: usize = 4;

pub const RESERVED: [&str; 5] = [PAD, UNK, BOS, EOS, TITLE];

/// Token ↔ id bijection with the five reserved tokens at ids 0–4.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    min_frequency: usize,
}

/// A cluster mapped to ids. Input words missing from the base vocabulary get
/// per-cluster ids starting at `base_size`, in order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedCluster {
    pub id: String,
    pub title: Option<String>,
    pub reviews: Vec<Vec<usize>>,
    pub summary: Option<Vec<usize>>,
    pub extended: Vec<String>,
    pub base_size: usize,
}

impl EncodedCluster {
    /// Size of base plus extended vocabulary.
    pub fn total_vocab(&self) -> usize {
        self.base_size + self.extended.len()
    }
}

impl Vocabulary {
    pub fn from_tokens<I, S>(tokens: I, min_frequency: usize) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocabulary {
            tokens: Vec::new(),
            index: HashMap::new(),
            min_frequency,
        };
        for t in RESERVED.iter().map(|s| s.to_string()).chain(tokens.into_iter().map(Into::into)) {
            if !v.index.contains_key(&t) {
                v.index.insert(t.clone(), v.tokens.len());
                v.tokens.push(t);
            }
        }
        v
    }

    /// Keeps tokens seen at least `min_frequency` times across reviews and
    /// summaries, most frequent first (ties alphabetical).
    pub fn build(corpus: &Corpus, min_frequency: usize) -> Result<Self> {
        if min_frequency == 0 {
            return Err(Error::invalid("min_frequency must be at least 1"));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for cluster in &corpus.clusters {
            let texts = cluster.reviews.iter().chain(cluster.summary.as_ref());
            for review in texts {
                for t in &review.tokens {
                    *counts.entry(t.as_str()).or_default() += 1;
                }
            }
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(t, c)| c >= min_frequency && !RESERVED.contains(&t))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        Ok(Self::from_tokens(kept.into_iter().map(|(t, _)| t), min_frequency))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn min_frequency(&self) -> usize {
        self.min_frequency
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    /// Maps ids back to tokens; extended ids resolve through `extended`.
    pub fn decode(&self, ids: &[usize], extended: &[String]) -> Vec<String> {
        ids.iter()
            .map(|&i| match self.tokens.get(i) {
                Some(t) => t.clone(),
                None => extended
                    .get(i - self.len())
                    .cloned()
                    .unwrap_or_else(|| UNK.to_string()),
            })
            .collect()
    }

    pub fn encode_cluster(&self, cluster: &ReviewCluster) -> EncodedCluster {
        let base = self.len();
        let mut extended: Vec<String> = Vec::new();
        let mut ext_index: HashMap<String, usize> = HashMap::new();
        let reviews = cluster
            .reviews
            .iter()
            .map(|r| {
                r.tokens
                    .iter()
                    .map(|t| match self.get(t) {
                        Some(id) => id,
                        None => *ext_index.entry(t.clone()).or_insert_with(|| {
                            extended.push(t.clone());
                            base + extended.len() - 1
                        }),
                    })
                    .collect()
            })
            .collect();
        let summary = cluster.summary.as_ref().map(|s| {
            s.tokens
                .iter()
                .map(|t| {
                    self.get(t)
                        .or_else(|| ext_index.get(t).copied())
                        .unwrap_or(UNK_ID)
                })
                .collect()
        });
        EncodedCluster {
            id: cluster.id.clone(),
            title: cluster.title.clone(),
            reviews,
            summary,
            extended,
            base_size: base,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() < RESERVED.len() || lines[..RESERVED.len()] != RESERVED {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: "vocabulary must start with the reserved tokens".into(),
            });
        }
        Ok(Self::from_tokens(lines[RESERVED.len()..].iter().copied(), 1))
    }
}

/// Replaces extended ids with the unknown id.
pub fn to_base(ids: &[usize], base_size: usize) -> Vec<usize> {
    ids.iter()
        .map(|&i| if i < base_size { i } else { UNK_ID })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::corpus::{Review, ReviewCluster};

    fn cluster(reviews: &[&str], summary: Option<&str>) -> ReviewCluster {
        ReviewCluster::from_text("c", None, reviews, summary)
    }

    fn corpus(clusters: Vec<ReviewCluster>) -> Corpus {
        Corpus::new(clusters)
    }

    #[test]
    fn reserved_ids_fixed() {
        let v = Vocabulary::build(&corpus(vec![]), 2).unwrap();
        assert_eq!(v.len(), 5);
        for (i, t) in RESERVED.iter().enumerate() {
            assert_eq!(v.id(t), i);
        }
    }

    #[test]
    fn frequent_token_kept() {
        let text = vec!["the"; 10].join(" ");
        let v = Vocabulary::build(&corpus(vec![cluster(&[&text], None)]), 2).unwrap();
        assert_eq!(v.id("the"), 5);
    }

    #[test]
    fn min_frequency_one_keeps_all() {
        let c = corpus(vec![cluster(&["a b c", "c d"], Some("e"))]);
        let v = Vocabulary::build(&c, 1).unwrap();
        assert_eq!(v.len(), 5 + 5);
    }

    #[test]
    fn hand_counted_fixture() {
        // counts: good 3, film 2, plot 2, bad 1, acting 1, great 1
        let c = corpus(vec![cluster(
            &["good film good plot", "bad acting", "great film plot good"],
            None,
        )]);
        let v = Vocabulary::build(&c, 2).unwrap();
        let kept: Vec<&str> = (5..v.len()).map(|i| v.token(i).unwrap()).collect();
        assert_eq!(kept, vec!["good", "film", "plot"]);
        assert_eq!(v.id("bad"), UNK_ID);
    }

    #[test]
    fn zero_min_frequency_rejected() {
        assert!(Vocabulary::build(&corpus(vec![]), 0).is_err());
    }

    #[test]
    fn encode_decode_identity_on_kept() {
        let c = corpus(vec![cluster(&["a a b b c"], None)]);
        let v = Vocabulary::build(&c, 2).unwrap();
        let toks: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let ids = v.encode(&toks);
        assert_eq!(v.decode(&ids, &[]), vec!["a", "b", UNK]);
    }

    #[test]
    fn extended_ids_for_oov_inputs() {
        let train = corpus(vec![cluster(&["good good film film"], None)]);
        let v = Vocabulary::build(&train, 2).unwrap();
        let c = cluster(&["good zorbo film", "zorbo quux"], Some("zorbo is good nope"));
        let enc = v.encode_cluster(&c);
        let base = v.len();
        assert_eq!(enc.extended, vec!["zorbo", "quux"]);
        assert_eq!(enc.reviews[0], vec![v.id("good"), base, v.id("film")]);
        assert_eq!(enc.reviews[1], vec![base, base + 1]);
        assert_eq!(
            enc.summary.as_ref().unwrap(),
            &vec![base, UNK_ID, v.id("good"), UNK_ID]
        );
        assert_eq!(v.decode(&enc.reviews[1], &enc.extended), vec!["zorbo", "quux"]);
        assert_eq!(to_base(&enc.reviews[1], base), vec![UNK_ID, UNK_ID]);
    }

    #[test]
    fn file_round_trip() {
        let c = corpus(vec![cluster(&["x y x y"], None)]);
        let v = Vocabulary::build(&c, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.txt");
        v.save(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("<pad>\n<unk>\n<s>\n</s>\n<title>\n"));
        let w = Vocabulary::load(&p).unwrap();
        assert_eq!(w.len(), v.len());
        assert_eq!(w.id("y"), v.id("y"));
        let _ = Review::from_text("unused");
    }
}
