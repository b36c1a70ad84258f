//! ROUGE-1/2/L F1 and ROUGE-SU4 recall, without stemming or stopword
//! removal, plus brute-force counters used as test oracles.

use serde::Serialize;

use crate::data::{unmask_title, Corpus};
use crate::error::{Error, Result};

/// Largest word distance `j - i` inside a skip-bigram (up to four words
/// may be skipped).
pub const SKIP_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Scores {
    /// From an overlap count and the two totals; empty sides give zeros.
    pub fn from_counts(overlap: usize, candidate_total: usize, reference_total: usize) -> Self {
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let precision = ratio(overlap, candidate_total);
        let recall = ratio(overlap, reference_total);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Scores { precision, recall, f1 }
    }
}

fn warn_if_empty<T>(reference: &[T]) {
    if reference.is_empty() {
        log::warn!("empty reference; scores are zero");
    }
}

/// Size of the clipped multiset intersection of two sorted lists.
fn sorted_overlap<K: Ord>(a: &[K], b: &[K]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

fn sorted_ngrams<T: Ord>(tokens: &[T], n: usize) -> Vec<&[T]> {
    let mut grams: Vec<&[T]> = if tokens.len() >= n { tokens.windows(n).collect() } else { Vec::new() };
    grams.sort_unstable();
    grams
}

pub fn rouge_n<T: Ord>(candidate: &[T], reference: &[T], n: usize) -> Scores {
    warn_if_empty(reference);
    let c = sorted_ngrams(candidate, n);
    let r = sorted_ngrams(reference, n);
    Scores::from_counts(sorted_overlap(&c, &r), c.len(), r.len())
}

/// Longest common subsequence length.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

pub fn rouge_l<T: PartialEq>(candidate: &[T], reference: &[T]) -> Scores {
    warn_if_empty(reference);
    Scores::from_counts(lcs_len(candidate, reference), candidate.len(), reference.len())
}

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Unit<'a, T> {
    Unigram(&'a T),
    SkipBigram(&'a T, &'a T),
}

fn su_units<T: Ord>(tokens: &[T]) -> Vec<Unit<'_, T>> {
    let mut units: Vec<Unit<'_, T>> = tokens.iter().map(Unit::Unigram).collect();
    for i in 0..tokens.len() {
        for j in i + 1..tokens.len().min(i + SKIP_WINDOW + 1) {
            units.push(Unit::SkipBigram(&tokens[i], &tokens[j]));
        }
    }
    units.sort_unstable();
    units
}

/// Unigrams together with in-window skip-bigrams; `recall` is the
/// reported figure.
pub fn rouge_su4<T: Ord>(candidate: &[T], reference: &[T]) -> Scores {
    warn_if_empty(reference);
    let c = su_units(candidate);
    let r = su_units(reference);
    Scores::from_counts(sorted_overlap(&c, &r), c.len(), r.len())
}

/// Brute-force counters: straightforward scans with no sorting or dynamic
/// programming. Exponential in places; meant for short sequences.
pub mod oracle {
    use super::{Scores, SKIP_WINDOW};

    fn clipped<G: PartialEq>(cand: &[G], reference: &[G]) -> usize {
        let mut total = 0;
        for (i, g) in cand.iter().enumerate() {
            if cand[..i].contains(g) {
                continue;
            }
            let a = cand.iter().filter(|x| *x == g).count();
            let b = reference.iter().filter(|x| *x == g).count();
            total += a.min(b);
        }
        total
    }

    fn ngrams<T: Clone>(tokens: &[T], n: usize) -> Vec<Vec<T>> {
        let mut out = Vec::new();
        let mut i = 0;
        while i + n <= tokens.len() {
            out.push(tokens[i..i + n].to_vec());
            i += 1;
        }
        out
    }

    pub fn rouge_n<T: Clone + PartialEq>(candidate: &[T], reference: &[T], n: usize) -> Scores {
        let c = ngrams(candidate, n);
        let r = ngrams(reference, n);
        Scores::from_counts(clipped(&c, &r), c.len(), r.len())
    }

    fn is_subsequence<T: PartialEq>(needle: &[&T], hay: &[T]) -> bool {
        let mut it = hay.iter();
        needle.iter().all(|x| it.any(|y| y == *x))
    }

    /// Tries every subsequence of the candidate (at most 2^len of them).
    pub fn lcs_len<T: PartialEq>(candidate: &[T], reference: &[T]) -> usize {
        let n = candidate.len();
        assert!(n < 20, "brute-force LCS is exponential");
        let mut best = 0;
        for mask in 0u32..(1 << n) {
            let sub: Vec<&T> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| &candidate[i]).collect();
            if sub.len() > best && is_subsequence(&sub, reference) {
                best = sub.len();
            }
        }
        best
    }

    pub fn rouge_l<T: PartialEq>(candidate: &[T], reference: &[T]) -> Scores {
        Scores::from_counts(lcs_len(candidate, reference), candidate.len(), reference.len())
    }

    fn su_units<T: Clone>(tokens: &[T]) -> Vec<(T, Option<T>)> {
        let mut out: Vec<(T, Option<T>)> = tokens.iter().map(|t| (t.clone(), None)).collect();
        for i in 0..tokens.len() {
            for j in 0..tokens.len() {
                if i < j && j - i <= SKIP_WINDOW {
                    out.push((tokens[i].clone(), Some(tokens[j].clone())));
                }
            }
        }
        out
    }

    pub fn rouge_su4<T: Clone + PartialEq>(candidate: &[T], reference: &[T]) -> Scores {
        let c = su_units(candidate);
        let r = su_units(reference);
        Scores::from_counts(clipped(&c, &r), c.len(), r.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceMetrics {
    pub id: String,
    pub rouge1_f1: f64,
    pub rouge2_f1: f64,
    #[serde(rename = "rougeL_f1")]
    pub rouge_l_f1: f64,
    pub rouge_su4_recall: f64,
}

impl InstanceMetrics {
    pub fn score<S: AsRef<str>>(id: &str, candidate: &[S], reference: &[S]) -> Self {
        let c: Vec<&str> = candidate.iter().map(AsRef::as_ref).collect();
        let r: Vec<&str> = reference.iter().map(AsRef::as_ref).collect();
        InstanceMetrics {
            id: id.to_string(),
            rouge1_f1: rouge_n(&c, &r, 1).f1,
            rouge2_f1: rouge_n(&c, &r, 2).f1,
            rouge_l_f1: rouge_l(&c, &r).f1,
            rouge_su4_recall: rouge_su4(&c, &r).recall,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub instances: Vec<InstanceMetrics>,
    pub rouge1_f1: f64,
    pub rouge2_f1: f64,
    #[serde(rename = "rougeL_f1")]
    pub rouge_l_f1: f64,
    pub rouge_su4_recall: f64,
}

impl MetricReport {
    pub fn from_instances(instances: Vec<InstanceMetrics>) -> Self {
        let n = instances.len().max(1) as f64;
        let mean = |f: fn(&InstanceMetrics) -> f64| instances.iter().map(f).sum::<f64>() / n;
        MetricReport {
            rouge1_f1: mean(|m| m.rouge1_f1),
            rouge2_f1: mean(|m| m.rouge2_f1),
            rouge_l_f1: mean(|m| m.rouge_l_f1),
            rouge_su4_recall: mean(|m| m.rouge_su4_recall),
            instances,
        }
    }

    /// `metric<TAB>value` lines.
    pub fn to_text(&self) -> String {
        format!(
            "rouge1_f1\t{:.6}\nrouge2_f1\t{:.6}\nrougeL_f1\t{:.6}\nrouge_su4_recall\t{:.6}\n",
            self.rouge1_f1, self.rouge2_f1, self.rouge_l_f1, self.rouge_su4_recall
        )
    }

    /// One JSON record per instance.
    pub fn to_jsonl(&self) -> String {
        self.instances
            .iter()
            .map(|m| serde_json::to_string(m).expect("plain struct") + "\n")
            .collect()
    }
}

/// Scores tokenized predictions against the gold summaries of `corpus`,
/// one prediction per cluster that has a summary, in corpus order. Gold
/// summaries get their titles restored first.
pub fn evaluate_corpus(predictions: &[Vec<String>], corpus: &Corpus) -> Result<MetricReport> {
    let golds: Vec<_> = corpus
        .clusters
        .iter()
        .filter_map(|c| c.summary.as_ref().map(|s| (c, s)))
        .collect();
    if golds.len() != predictions.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} gold summaries",
            predictions.len(),
            golds.len()
        )));
    }
    let instances = golds
        .iter()
        .zip(predictions)
        .map(|((cluster, gold), pred)| {
            let reference = unmask_title(&gold.tokens, cluster.title.as_deref());
            InstanceMetrics::score(&cluster.id, pred, &reference)
        })
        .collect();
    Ok(MetricReport::from_instances(instances))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{tokenize, ReviewCluster};
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn identical_is_one() {
        let a = toks("the cat sat on the mat");
        for s in [rouge_n(&a, &a, 1), rouge_n(&a, &a, 2), rouge_l(&a, &a), rouge_su4(&a, &a)] {
            assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn disjoint_is_zero() {
        let a = toks("a b c");
        let b = toks("d e f");
        assert_eq!(rouge_n(&a, &b, 1).f1, 0.0);
        assert_eq!(rouge_l(&a, &b).f1, 0.0);
        assert_eq!(rouge_su4(&a, &b).recall, 0.0);
    }

    #[test]
    fn clipped_unigrams() {
        let s = rouge_n(&toks("the cat sat"), &toks("the cat slept on the mat"), 1);
        assert_eq!(s.precision, 2.0 / 3.0);
        assert_eq!(s.recall, 2.0 / 6.0);
        assert!((s.f1 - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn lcs_examples() {
        let s = rouge_l(&toks("the cat"), &toks("the cat sat"));
        assert_eq!((s.precision, s.recall), (1.0, 2.0 / 3.0));
        assert!((s.f1 - 0.8).abs() < 1e-15);
        assert_eq!(lcs_len(&toks("a b c"), &toks("c b a")), 1);
    }

    #[test]
    fn skip_bigram_window() {
        // a _ _ _ _ b: distance 5 is inside the window, 6 is not
        let near = toks("a x x x x b");
        let far = toks("a x x x x x b");
        let target = toks("a b");
        let hit = |c: &[String]| {
            su_units(c)
                .iter()
                .any(|u| matches!(u, Unit::SkipBigram(x, y) if x.as_str() == "a" && y.as_str() == "b"))
        };
        assert!(hit(&near));
        assert!(!hit(&far));
        // reference "a b": units a, b, (a,b) -> all three covered by `near`
        assert_eq!(rouge_su4(&near, &target).recall, 1.0);
        assert!((rouge_su4(&far, &target).recall - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_reference_scores_zero() {
        let a = toks("a b");
        let e: Vec<String> = Vec::new();
        assert_eq!(rouge_n(&a, &e, 1), Scores::default());
        assert_eq!(rouge_l(&a, &e), Scores::default());
        assert_eq!(rouge_su4(&a, &e), Scores::default());
    }

    #[test]
    fn exhaustive_small_alphabet_matches_oracle() {
        // lengths up to 4 here; the acceptance suite covers up to 6
        let mut seqs: Vec<Vec<u8>> = vec![vec![]];
        let mut frontier = vec![vec![]];
        for _ in 0..4 {
            let mut next = Vec::new();
            for s in &frontier {
                for t in 0..4u8 {
                    let mut x: Vec<u8> = s.clone();
                    x.push(t);
                    next.push(x);
                }
            }
            seqs.extend(next.iter().cloned());
            frontier = next;
        }
        for a in &seqs {
            for b in &seqs {
                assert_eq!(rouge_n(a, b, 1), oracle::rouge_n(a, b, 1));
                assert_eq!(rouge_n(a, b, 2), oracle::rouge_n(a, b, 2));
                assert_eq!(rouge_l(a, b), oracle::rouge_l(a, b));
                assert_eq!(rouge_su4(a, b), oracle::rouge_su4(a, b));
            }
        }
    }

    fn corpus_with(golds: &[&str]) -> Corpus {
        Corpus::new(
            golds
                .iter()
                .enumerate()
                .map(|(i, g)| ReviewCluster::from_text(&format!("c{i}"), Some("Kalo Ren"), &["fine"], Some(g)))
                .collect(),
        )
    }

    #[test]
    fn corpus_perfect_and_half() {
        let corpus = corpus_with(&["kalo ren is great", "dull plot"]);
        let preds = vec![toks("kalo ren is great"), toks("dull plot")];
        let r = evaluate_corpus(&preds, &corpus).unwrap();
        assert_eq!((r.rouge1_f1, r.rouge2_f1, r.rouge_l_f1, r.rouge_su4_recall), (1.0, 1.0, 1.0, 1.0));

        let preds = vec![toks("kalo ren is great"), toks("zzz qqq")];
        let r = evaluate_corpus(&preds, &corpus).unwrap();
        assert_eq!((r.rouge1_f1, r.rouge2_f1, r.rouge_l_f1, r.rouge_su4_recall), (0.5, 0.5, 0.5, 0.5));
    }

    #[test]
    fn corpus_fixture_means() {
        let corpus = corpus_with(&["the cat slept on the mat", "the cat sat", "a b c"]);
        let preds = vec![toks("the cat sat"), toks("the cat"), toks("c b a")];
        let r = evaluate_corpus(&preds, &corpus).unwrap();
        assert!((r.rouge1_f1 - (4.0 / 9.0 + 0.8 + 1.0) / 3.0).abs() < 1e-15);
        assert!((r.rouge_l_f1 - (2.0 * (2.0 / 3.0) * (1.0 / 3.0) / 1.0 + 0.8 + 1.0 / 3.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn titles_restored_before_scoring() {
        let corpus = corpus_with(&["kalo ren is great"]);
        assert_eq!(corpus.clusters[0].summary.as_ref().unwrap().tokens[0], "<title>");
        let r = evaluate_corpus(&[toks("kalo ren is great")], &corpus).unwrap();
        assert_eq!(r.rouge1_f1, 1.0);
    }

    #[test]
    fn count_mismatch_rejected() {
        let corpus = corpus_with(&["a", "b"]);
        assert!(evaluate_corpus(&[toks("a")], &corpus).is_err());
    }

    #[test]
    fn report_formats() {
        let corpus = corpus_with(&["a b"]);
        let r = evaluate_corpus(&[toks("a b")], &corpus).unwrap();
        assert!(r.to_text().contains("rougeL_f1\t1.000000"));
        assert!(r.to_jsonl().contains("\"rougeL_f1\":1.0"));
    }

    fn seq() -> impl Strategy<Value = Vec<u8>> {
        proptest::collection::vec(0u8..6, 0..10)
    }

    proptest! {
        #[test]
        fn f1_is_symmetric(a in seq(), b in seq()) {
            prop_assert_eq!(rouge_n(&a, &b, 1).f1, rouge_n(&b, &a, 1).f1);
            prop_assert_eq!(rouge_n(&a, &b, 2).f1, rouge_n(&b, &a, 2).f1);
            prop_assert_eq!(rouge_l(&a, &b).f1, rouge_l(&b, &a).f1);
        }

        #[test]
        fn appending_reference_token_keeps_recall(a in seq(), b in seq(), k in 0usize..10) {
            prop_assume!(!b.is_empty());
            let mut longer = a.clone();
            longer.push(b[k % b.len()]);
            prop_assert!(rouge_n(&longer, &b, 1).recall >= rouge_n(&a, &b, 1).recall);
            prop_assert!(rouge_n(&longer, &b, 2).recall >= rouge_n(&a, &b, 2).recall);
            prop_assert!(rouge_l(&longer, &b).recall >= rouge_l(&a, &b).recall);
            prop_assert!(rouge_su4(&longer, &b).recall >= rouge_su4(&a, &b).recall);
        }

        #[test]
        fn scores_in_unit_interval(a in seq(), b in seq()) {
            for s in [rouge_n(&a, &b, 1), rouge_n(&a, &b, 2), rouge_l(&a, &b), rouge_su4(&a, &b)] {
                for x in [s.precision, s.recall, s.f1] {
                    prop_assert!((0.0..=1.0).contains(&x));
                }
            }
        }
    }
}
