use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tokenize::{mask_title, tokenize};
use crate::error::{Error, Result};

pub const MAX_REVIEW_TOKENS: usize = 60;
pub const MAX_SUMMARY_TOKENS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct Review {
    pub raw_text: String,
    pub tokens: Vec<String>,
}

impl Review {
    pub fn from_text(text: &str) -> Self {
        Review {
            raw_text: text.to_string(),
            tokens: tokenize(text),
        }
    }

    fn prepared(text: &str, title: Option<&str>, max_len: usize) -> Self {
        let mut tokens = tokenize(text);
        if let Some(title) = title {
            tokens = mask_title(&tokens, title);
        }
        tokens.truncate(max_len);
        Review {
            raw_text: text.to_string(),
            tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReviewCluster {
    pub id: String,
    pub title: Option<String>,
    pub reviews: Vec<Review>,
    pub summary: Option<Review>,
}

impl ReviewCluster {
    /// Tokenizes, title-masks and truncates raw texts.
    pub fn from_text<S: AsRef<str>>(
        id: &str,
        title: Option<&str>,
        reviews: &[S],
        summary: Option<&str>,
    ) -> Self {
        ReviewCluster {
            id: id.to_string(),
            title: title.map(str::to_string),
            reviews: reviews
                .iter()
                .map(|r| Review::prepared(r.as_ref(), title, MAX_REVIEW_TOKENS))
                .collect(),
            summary: summary.map(|s| Review::prepared(s, title, MAX_SUMMARY_TOKENS)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Dev,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CorpusStats {
    pub clusters: usize,
    pub reviews_per_cluster: f64,
    pub tokens_per_review: f64,
    pub tokens_per_summary: f64,
}

impl CorpusStats {
    pub fn compute(clusters: &[ReviewCluster]) -> Self {
        let n_reviews: usize = clusters.iter().map(|c| c.reviews.len()).sum();
        let review_tokens: usize = clusters
            .iter()
            .flat_map(|c| &c.reviews)
            .map(|r| r.tokens.len())
            .sum();
        let summaries: Vec<&Review> = clusters.iter().filter_map(|c| c.summary.as_ref()).collect();
        let summary_tokens: usize = summaries.iter().map(|s| s.tokens.len()).sum();
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        CorpusStats {
            clusters: clusters.len(),
            reviews_per_cluster: ratio(n_reviews, clusters.len()),
            tokens_per_review: ratio(review_tokens, n_reviews),
            tokens_per_summary: ratio(summary_tokens, summaries.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub clusters: Vec<ReviewCluster>,
    pub split: Split,
    stats: CorpusStats,
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    title: Option<String>,
    reviews: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    summary: Option<String>,
}

impl Corpus {
    pub fn new(clusters: Vec<ReviewCluster>) -> Self {
        let stats = CorpusStats::compute(&clusters);
        Corpus {
            clusters,
            split: Split::Train,
            stats,
        }
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn stats(&self) -> &CorpusStats {
        &self.stats
    }

    /// True when the stored statistics equal a fresh recomputation.
    pub fn verify_stats(&self) -> bool {
        CorpusStats::compute(&self.clusters) == self.stats
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// All reviews of all clusters, in order.
    pub fn reviews(&self) -> impl Iterator<Item = &Review> {
        self.clusters.iter().flat_map(|c| &c.reviews)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut clusters = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let rec: Record = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
            if rec.reviews.is_empty() {
                return Err(err(format!("cluster `{}` has no reviews", rec.id)));
            }
            clusters.push(ReviewCluster::from_text(
                &rec.id,
                rec.title.as_deref(),
                &rec.reviews,
                rec.summary.as_deref(),
            ));
        }
        Ok(Corpus::new(clusters))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for c in &self.clusters {
            let rec = Record {
                id: c.id.clone(),
                title: c.title.clone(),
                reviews: c.reviews.iter().map(|r| r.raw_text.clone()).collect(),
                summary: c.summary.as_ref().map(|s| s.raw_text.clone()),
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }
}

/// Reads a line-delimited JSON corpus: one cluster per line with `id`,
/// `reviews`, and optional `summary` and `title`.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let text = fs::read_to_string(path)?;
    Corpus::parse(&text, path)
}
