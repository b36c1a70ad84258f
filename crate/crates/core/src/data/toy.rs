//! Synthetic review clusters with planted aspect and sentiment markers.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::corpus::{Corpus, Review, ReviewCluster};
use crate::error::{Error, Result};

const REVIEW_TEMPLATES: &[&str] = &[
    "the {a} was {s}",
    "i thought the {a} felt {s}",
    "{s} {a} overall",
    "honestly the {a} is {s}",
    "{t} has {s} {a}",
    "what {s} {a} in this one",
];

const SUMMARY_TEMPLATE: &str = "{t} is a film with {s} {a} .";

const FILLER: &[&str] = &[
    "the", "was", "i", "thought", "felt", "overall", "honestly", "is", "has", "what", "in",
    "this", "one", "a", "film", "with", ".",
];

const SYLLABLES: &[&str] = &["ka", "lo", "mi", "zu", "ren", "tor", "bel", "vin", "sa", "dro"];

#[derive(Debug, Clone, PartialEq)]
pub struct MarkerSet {
    pub name: String,
    pub markers: Vec<String>,
}

impl MarkerSet {
    pub fn new(name: &str, markers: &[&str]) -> Self {
        MarkerSet {
            name: name.to_string(),
            markers: markers.iter().map(|m| m.to_string()).collect(),
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.markers.iter().any(|m| m == token)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToySpec {
    pub clusters: usize,
    pub reviews_per_cluster: usize,
    pub aspects: Vec<MarkerSet>,
    pub sentiments: [MarkerSet; 2],
    pub seed: u64,
}

impl ToySpec {
    /// Two aspects (acting, plot) and two sentiments.
    pub fn standard(clusters: usize, reviews_per_cluster: usize, seed: u64) -> Self {
        ToySpec {
            clusters,
            reviews_per_cluster,
            aspects: vec![
                MarkerSet::new("acting", &["acting", "performance", "cast"]),
                MarkerSet::new("plot", &["plot", "story", "script"]),
            ],
            sentiments: [
                MarkerSet::new("positive", &["great", "superb", "wonderful"]),
                MarkerSet::new("negative", &["awful", "dull", "weak"]),
            ],
            seed,
        }
    }

    pub fn aspect_index(&self, name: &str) -> Option<usize> {
        self.aspects.iter().position(|a| a.name == name)
    }

    fn validate(&self) -> Result<()> {
        if self.aspects.len() < 2 {
            return Err(Error::invalid("toy corpus needs at least two aspects"));
        }
        if self.reviews_per_cluster == 0 {
            return Err(Error::invalid("toy corpus needs at least one review per cluster"));
        }
        let mut seen: HashSet<&str> = FILLER.iter().copied().collect();
        for set in self.aspects.iter().chain(&self.sentiments) {
            if set.markers.is_empty() {
                return Err(Error::invalid(format!("marker set `{}` is empty", set.name)));
            }
            for m in &set.markers {
                if !seen.insert(m.as_str()) {
                    return Err(Error::invalid(format!(
                        "marker `{m}` of `{}` overlaps another marker set or template word",
                        set.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Index of the aspect whose marker occurs in `tokens`, if any.
    pub fn aspect_of(&self, tokens: &[String]) -> Option<usize> {
        tokens
            .iter()
            .find_map(|t| self.aspects.iter().position(|a| a.contains(t)))
    }

    /// Marker occurrences per aspect in a token sequence.
    pub fn aspect_counts(&self, tokens: &[String]) -> Vec<usize> {
        self.aspects
            .iter()
            .map(|a| tokens.iter().filter(|t| a.contains(t)).count())
            .collect()
    }
}

/// Ground-truth labels planted in one generated cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyLabels {
    pub majority_aspect: usize,
    pub review_aspects: Vec<usize>,
    pub majority_sentiment: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyCorpus {
    pub corpus: Corpus,
    pub labels: Vec<ToyLabels>,
}

fn fill(template: &str, title: &str, aspect: &str, sentiment: &str) -> String {
    template
        .replace("{t}", title)
        .replace("{a}", aspect)
        .replace("{s}", sentiment)
}

fn make_title(rng: &mut ChaCha8Rng, used: &mut HashSet<String>) -> String {
    loop {
        let n = rng.gen_range(2..=3);
        let mut name: String = (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect();
        if used.contains(&name) {
            name.push_str(&used.len().to_string());
        }
        if used.insert(name.clone()) {
            let mut chars = name.chars();
            let first = chars.next().unwrap().to_uppercase().collect::<String>();
            return first + chars.as_str();
        }
    }
}

/// Generates clusters whose reviews each mention exactly one aspect marker
/// and one sentiment marker. Every cluster has a strict majority aspect
/// (and sentiment); the gold summary names each by its first marker.
pub fn generate_toy_corpus(spec: &ToySpec) -> Result<ToyCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.reviews_per_cluster;
    let mut titles = HashSet::new();
    let mut clusters = Vec::with_capacity(spec.clusters);
    let mut labels = Vec::with_capacity(spec.clusters);
    for c in 0..spec.clusters {
        let title = make_title(&mut rng, &mut titles);
        let major = rng.gen_range(0..spec.aspects.len());
        let major_count = if n >= 3 { rng.gen_range(n / 2 + 1..n) } else { n };
        let mut review_aspects: Vec<usize> = (0..n)
            .map(|i| {
                if i < major_count {
                    major
                } else {
                    let others: Vec<usize> = (0..spec.aspects.len()).filter(|&a| a != major).collect();
                    *others.choose(&mut rng).unwrap()
                }
            })
            .collect();
        review_aspects.shuffle(&mut rng);

        let sentiment = rng.gen_range(0..2);
        let sentiment_count = if n >= 3 { rng.gen_range(n / 2 + 1..=n) } else { n };
        let mut review_sentiments: Vec<usize> = (0..n)
            .map(|i| if i < sentiment_count { sentiment } else { 1 - sentiment })
            .collect();
        review_sentiments.shuffle(&mut rng);

        let mut texts = Vec::with_capacity(n);
        for (&a, &s) in review_aspects.iter().zip(&review_sentiments) {
            let aw = spec.aspects[a].markers.choose(&mut rng).unwrap().as_str();
            let sw = spec.sentiments[s].markers.choose(&mut rng).unwrap().as_str();
            let template = REVIEW_TEMPLATES.choose(&mut rng).unwrap();
            texts.push(fill(template, &title, aw, sw));
        }
        let summary = fill(
            SUMMARY_TEMPLATE,
            &title,
            &spec.aspects[major].markers[0],
            &spec.sentiments[sentiment].markers[0],
        );
        clusters.push(ReviewCluster::from_text(
            &format!("toy-{c}"),
            Some(&title),
            &texts,
            Some(&summary),
        ));
        labels.push(ToyLabels {
            majority_aspect: major,
            review_aspects,
            majority_sentiment: sentiment,
        });
    }
    Ok(ToyCorpus {
        corpus: Corpus::new(clusters),
        labels,
    })
}

/// Reviews that all talk about one aspect, with mixed sentiment.
pub fn generate_background(spec: &ToySpec, aspect: usize, count: usize, seed: u64) -> Result<Vec<Review>> {
    spec.validate()?;
    if aspect >= spec.aspects.len() {
        return Err(Error::invalid(format!("no aspect with index {aspect}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let aw = spec.aspects[aspect].markers.choose(&mut rng).unwrap();
            let sw = spec.sentiments[rng.gen_range(0..2)].markers.choose(&mut rng).unwrap();
            // Background reviews are about other films; drop the title slot.
            let template = loop {
                let t = REVIEW_TEMPLATES.choose(&mut rng).unwrap();
                if !t.contains("{t}") {
                    break t;
                }
            };
            Review::from_text(&fill(template, "", aw, sw))
        })
        .collect())
}
