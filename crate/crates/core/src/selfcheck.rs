//! Built-in verification suites: gradient checks, distribution validity,
//! and oracle comparisons for beam search, ROUGE and centroid extraction.
//! Each suite is deterministic given its seed.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::abstractive::{AbstractConfig, AbstractModel, AbstractVars, PreparedCluster};
use crate::beam::{beam_search, exhaustive_best, Scorer};
use crate::condense::{CondenseConfig, CondenseModel, CondenseVars};
use crate::data::{EncodedCluster, BOS_ID, EOS_ID, RESERVED};
use crate::error::Result;
use crate::evaluation::{self, Scores, SKIP_WINDOW};
use crate::extractive::{select_top_k, Distance, Embedder};
use crate::fusion::{fusion_loss, pool_reviews, NUM_NEGATIVES};
use crate::nn::register;
use crate::tensor_core::{grad_check, uniform, GradCheckConfig, ParameterSet, Tensor};

pub const GRAD_TOLERANCE: f64 = 1e-4;
pub const SUM_TOLERANCE: f64 = 1e-6;
const REDRAW_SCALE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn tiny_condense(vocab: usize, rng: &mut ChaCha8Rng) -> CondenseModel {
    CondenseModel::init(
        CondenseConfig {
            vocab_size: vocab,
            embedding_dim: rng.gen_range(2..=4),
            hidden_dim: rng.gen_range(2..=3),
            dropout: 0.5,
        },
        rng.gen(),
    )
}

fn random_tokens(rng: &mut ChaCha8Rng, len: usize, lo: usize, hi: usize) -> Vec<usize> {
    (0..len).map(|_| rng.gen_range(lo..hi)).collect()
}

/// A random cluster over ids `RESERVED.len()..base + extended`.
fn random_cluster(rng: &mut ChaCha8Rng, base: usize, reviews: usize, max_len: usize) -> EncodedCluster {
    let extended = rng.gen_range(0..=2);
    let lo = RESERVED.len();
    let total = base + extended;
    let review = |rng: &mut ChaCha8Rng| {
        let len = rng.gen_range(1..=max_len);
        random_tokens(rng, len, lo, total)
    };
    let reviews: Vec<Vec<usize>> = (0..reviews).map(|_| review(rng)).collect();
    let summary = review(rng);
    EncodedCluster {
        id: "random".into(),
        title: None,
        reviews,
        summary: Some(summary),
        extended: (0..extended).map(|i| format!("x{i}")).collect(),
        base_size: base,
    }
}

/// Replaces every parameter with uniform draws in ±`REDRAW_SCALE`. Initial
/// scales give gradients small enough to drown in finite-difference
/// roundoff.
fn redraw(params: &mut ParameterSet, rng: &mut ChaCha8Rng) {
    for (_, t) in params.iter_mut() {
        for x in t.data_mut() {
            *x = rng.gen_range(-REDRAW_SCALE..REDRAW_SCALE);
        }
    }
}

/// Worst relative error of analytic against central-difference gradients
/// on `condense_loss`, `fusion_loss` and the full abstract loss with
/// extracts, over `instances` random small problems each.
pub fn gradient_suite(seed: u64, instances: usize) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gc = |seed| GradCheckConfig {
        seed,
        ..GradCheckConfig::default()
    };
    let mut worst = [0.0f64; 3];

    for _ in 0..instances {
        let vocab = rng.gen_range(7..=10);
        let mut model = tiny_condense(vocab, &mut rng);
        redraw(&mut model.params, &mut rng);
        let len = rng.gen_range(1..=5);
        let tokens = random_tokens(&mut rng, len, RESERVED.len(), vocab);
        let cfg = model.config;
        let r = grad_check(&model.params, &gc(rng.gen()), |tape, p| {
            CondenseVars::register(tape, p, cfg, true)?.reconstruction_loss(tape, &tokens)
        })?;
        worst[0] = worst[0].max(r.max_rel_error);
    }

    for _ in 0..instances {
        let d = rng.gen_range(2..=5);
        let n = rng.gen_range(1..=4);
        let mut params = ParameterSet::new();
        params.insert("W_p", uniform(&mut rng, &[d, d], 1.0));
        params.insert("gold", uniform(&mut rng, &[d], 1.0));
        for j in 0..NUM_NEGATIVES {
            params.insert(format!("neg{j}"), uniform(&mut rng, &[d], 1.0));
        }
        let reviews = uniform(&mut rng, &[n, d], 1.0);
        let query = uniform(&mut rng, &[d], 1.0);
        let r = grad_check(&params, &gc(rng.gen()), |tape, p| {
            let w_p = register(tape, p, "W_p", true)?;
            let gold = register(tape, p, "gold", true)?;
            let negatives = (0..NUM_NEGATIVES)
                .map(|j| register(tape, p, &format!("neg{j}"), true))
                .collect::<Result<Vec<_>>>()?;
            let rv = tape.constant(reviews.clone())?;
            let q = tape.constant(query.clone())?;
            let pooled = pool_reviews(tape, rv, q, w_p)?;
            fusion_loss(tape, pooled.d_prime, gold, &negatives)
        })?;
        worst[1] = worst[1].max(r.max_rel_error);
    }

    for _ in 0..instances {
        let vocab = rng.gen_range(8..=10);
        let mut condense = tiny_condense(vocab, &mut rng);
        redraw(&mut condense.params, &mut rng);
        let mut config = AbstractConfig::for_condense(&condense);
        config.use_extracts = true;
        config.k = rng.gen_range(1..=2);
        config.attention_dim = rng.gen_range(2..=4);
        let mut model = AbstractModel::init(config, Some(&condense), rng.gen())?;
        redraw(&mut model.params, &mut rng);
        let reviews = rng.gen_range(2..=3);
        let cluster = random_cluster(&mut rng, vocab, reviews, 4);
        let prepared = PreparedCluster::new(&condense, &cluster, config.k)?;
        let d = config.encoding_dim;
        let negatives: Vec<Tensor> = (0..NUM_NEGATIVES).map(|_| uniform(&mut rng, &[d], 1.0)).collect();
        let r = grad_check(&model.params, &gc(rng.gen()), |tape, p| {
            AbstractVars::register(tape, p, config, true)?.abstract_loss(tape, &prepared, &negatives)
        })?;
        worst[2] = worst[2].max(r.max_rel_error);
    }

    let passed = worst.iter().all(|&w| w <= GRAD_TOLERANCE);
    Ok(CheckOutcome {
        name: "gradients",
        passed,
        detail: format!(
            "max relative error condense {:.2e}, fusion {:.2e}, abstract {:.2e} over {instances} instances each",
            worst[0], worst[1], worst[2]
        ),
    })
}

/// Random decoder steps on random small models; every attention vector,
/// copy distribution and output mixture must be a distribution and every
/// gate strictly inside (0, 1).
pub fn distribution_suite(seed: u64, steps: usize) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut done = 0;
    let mut worst_sum = 0.0f64;
    let mut min_entry = f64::INFINITY;
    let mut gate_range = (f64::INFINITY, f64::NEG_INFINITY);
    while done < steps {
        let vocab = rng.gen_range(8..=12);
        let condense = tiny_condense(vocab, &mut rng);
        let mut config = AbstractConfig::for_condense(&condense);
        config.use_extracts = rng.gen_bool(0.5);
        config.k = rng.gen_range(1..=3);
        let mut model = AbstractModel::init(config, Some(&condense), rng.gen())?;
        // spread the parameters so the gate and attention are not all flat
        let scale = rng.gen_range(0.5..4.0);
        for (_, t) in model.params.iter_mut() {
            for x in t.data_mut() {
                *x *= scale;
            }
        }
        let reviews = rng.gen_range(1..=4);
        let cluster = random_cluster(&mut rng, vocab, reviews, 6);
        let prepared = PreparedCluster::new(&condense, &cluster, config.k)?;
        let ctx = model.decoder_context(&prepared, None)?;
        let mut state = model.init_state(&ctx);
        let mut prev = BOS_ID;
        for _ in 0..20 {
            let (out, next) = model.decode_step(&ctx, &state, prev)?;
            for dist in [&out.attention, &out.copy, &out.p] {
                worst_sum = worst_sum.max((dist.data().iter().sum::<f64>() - 1.0).abs());
                min_entry = dist.data().iter().copied().fold(min_entry, f64::min);
            }
            gate_range = (gate_range.0.min(out.gate), gate_range.1.max(out.gate));
            done += 1;
            if done == steps {
                break;
            }
            state = next;
            prev = rng.gen_range(0..ctx.total_vocab);
            if prev == EOS_ID {
                break;
            }
        }
    }
    let passed = worst_sum <= SUM_TOLERANCE && min_entry >= 0.0 && gate_range.0 > 0.0 && gate_range.1 < 1.0;
    Ok(CheckOutcome {
        name: "distributions",
        passed,
        detail: format!(
            "{steps} steps, max |sum - 1| {worst_sum:.2e}, min entry {min_entry:.2e}, gate in [{:.4}, {:.4}]",
            gate_range.0, gate_range.1
        ),
    })
}

/// Next-token log-probabilities indexed by (step, previous token).
struct RandomTable {
    vocab: usize,
    log_probs: Vec<Vec<f64>>,
}

impl RandomTable {
    fn new(rng: &mut ChaCha8Rng, vocab: usize, max_len: usize) -> Self {
        let rows = max_len * (vocab + 1);
        let log_probs = (0..rows)
            .map(|_| {
                let logits: Vec<f64> = (0..vocab).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z = logits.iter().map(|x| (x - m).exp()).sum::<f64>().ln() + m;
                logits.iter().map(|x| x - z).collect()
            })
            .collect();
        RandomTable { vocab, log_probs }
    }
}

impl Scorer for RandomTable {
    type State = usize;

    fn start(&self) -> Result<usize> {
        Ok(0)
    }

    fn step(&self, t: &usize, prev: usize) -> Result<(Vec<f64>, usize)> {
        let prev = if prev < self.vocab { prev } else { self.vocab };
        Ok((self.log_probs[t * (self.vocab + 1) + prev].clone(), t + 1))
    }
}

/// Beam search with a beam covering every sequence against exhaustive
/// enumeration on random table models.
pub fn beam_oracle_suite(seed: u64, models: usize) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0;
    for _ in 0..models {
        let vocab = rng.gen_range(2..=5);
        let max_len = rng.gen_range(1..=3);
        let eos = rng.gen_range(0..vocab);
        let table = RandomTable::new(&mut rng, vocab, max_len);
        let beam = vocab.pow(max_len as u32);
        let got = beam_search(&table, usize::MAX, eos, beam, max_len)?;
        let want = exhaustive_best(&table, usize::MAX, eos, max_len)?;
        let same = match (got.first(), want) {
            (Some(h), Some((tokens, score))) => h.tokens == tokens && h.score() == score,
            (None, None) => true,
            _ => false,
        };
        if !same {
            mismatches += 1;
        }
    }
    Ok(CheckOutcome {
        name: "beam oracle",
        passed: mismatches == 0,
        detail: format!("{mismatches} mismatches over {models} random models"),
    })
}

/// Every sequence of length `0..=max_len` over `alphabet` symbols.
fn all_sequences(alphabet: u8, max_len: usize) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(frontier.len() * alphabet as usize);
        for s in &frontier {
            for a in 0..alphabet {
                let mut t: Vec<u8> = s.clone();
                t.push(a);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn same_scores(a: Scores, b: Scores) -> bool {
    a.precision.to_bits() == b.precision.to_bits()
        && a.recall.to_bits() == b.recall.to_bits()
        && a.f1.to_bits() == b.f1.to_bits()
}

/// Brute-force counts for one sequence, gathered once so that comparing a
/// pair is a handful of table lookups.
struct Profile {
    len: usize,
    unigrams: Vec<usize>,
    bigrams: Vec<usize>,
    /// Unigram counts followed by in-window skip-bigram counts.
    su_units: Vec<usize>,
    /// Per length `l`, a bitset over the `alphabet^l` sequences of that
    /// length marking which are subsequences.
    subsequences: Vec<Vec<u64>>,
}

impl Profile {
    fn new(seq: &[u8], alphabet: usize, max_len: usize) -> Self {
        let a = alphabet;
        let mut unigrams = vec![0; a];
        let mut bigrams = vec![0; a * a];
        let mut su_units = vec![0; a + a * a];
        for (i, &x) in seq.iter().enumerate() {
            unigrams[x as usize] += 1;
            su_units[x as usize] += 1;
            if let Some(&y) = seq.get(i + 1) {
                bigrams[x as usize * a + y as usize] += 1;
            }
            for (j, &y) in seq.iter().enumerate() {
                if i < j && j - i <= SKIP_WINDOW {
                    su_units[a + x as usize * a + y as usize] += 1;
                }
            }
        }
        let mut subsequences: Vec<Vec<u64>> = (0..=max_len).map(|l| vec![0; a.pow(l as u32).div_ceil(64)]).collect();
        for mask in 0u32..(1 << seq.len()) {
            let mut index = 0;
            let mut l = 0;
            for (i, &x) in seq.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    index = index * a + x as usize;
                    l += 1;
                }
            }
            subsequences[l][index / 64] |= 1 << (index % 64);
        }
        Profile {
            len: seq.len(),
            unigrams,
            bigrams,
            su_units,
            subsequences,
        }
    }

    fn scores(&self, reference: &Profile) -> [Scores; 4] {
        let clipped = |a: &[usize], b: &[usize]| a.iter().zip(b).map(|(x, y)| x.min(y)).sum::<usize>();
        let total = |a: &[usize]| a.iter().sum::<usize>();
        let lcs = (0..=self.len.min(reference.len))
            .rev()
            .find(|&l| {
                self.subsequences[l]
                    .iter()
                    .zip(&reference.subsequences[l])
                    .any(|(x, y)| x & y != 0)
            })
            .unwrap_or(0);
        [
            Scores::from_counts(clipped(&self.unigrams, &reference.unigrams), self.len, reference.len),
            Scores::from_counts(
                clipped(&self.bigrams, &reference.bigrams),
                total(&self.bigrams),
                total(&reference.bigrams),
            ),
            Scores::from_counts(lcs, self.len, reference.len),
            Scores::from_counts(
                clipped(&self.su_units, &reference.su_units),
                total(&self.su_units),
                total(&reference.su_units),
            ),
        ]
    }
}

/// ROUGE-1/2/L/SU4 against brute-force counters on every ordered pair of
/// sequences up to `max_len` over `alphabet` symbols, compared bit for bit.
pub fn rouge_oracle_suite(alphabet: u8, max_len: usize) -> CheckOutcome {
    let seqs = all_sequences(alphabet, max_len);
    let profiles: Vec<Profile> = seqs
        .iter()
        .map(|s| Profile::new(s, alphabet as usize, max_len))
        .collect();
    let mut mismatches = 0usize;
    let mut first_bad = None;
    for (cand, cp) in seqs.iter().zip(&profiles) {
        for (reference, rp) in seqs.iter().zip(&profiles) {
            let want = cp.scores(rp);
            let got = [
                evaluation::rouge_n(cand, reference, 1),
                evaluation::rouge_n(cand, reference, 2),
                evaluation::rouge_l(cand, reference),
                evaluation::rouge_su4(cand, reference),
            ];
            if !got.iter().zip(&want).all(|(g, w)| same_scores(*g, *w)) {
                mismatches += 1;
                first_bad.get_or_insert_with(|| (cand.clone(), reference.clone()));
            }
        }
    }
    let pairs = seqs.len() * seqs.len();
    let mut detail = format!("{mismatches} mismatches over {pairs} pairs (length <= {max_len}, alphabet {alphabet})");
    if let Some((c, r)) = first_bad {
        detail.push_str(&format!(", first at {c:?} vs {r:?}"));
    }
    CheckOutcome {
        name: "rouge oracle",
        passed: mismatches == 0,
        detail,
    }
}

/// Review `[i]` embeds as row `i` of the table.
struct RowEmbedder(Vec<Tensor>);

impl Embedder for RowEmbedder {
    fn embed(&self, tokens: &[usize]) -> Result<Tensor> {
        Ok(self.0[tokens[0]].clone())
    }
}

/// Picks the `k` nearest rows one at a time by linear scan, lowest index
/// first among equals.
fn nearest_by_scan(rows: &[Tensor], k: usize) -> Vec<usize> {
    let n = rows.len();
    let dim = rows[0].len();
    let mut centroid = vec![0.0; dim];
    for r in rows {
        for (c, x) in centroid.iter_mut().zip(r.data()) {
            *c += x;
        }
    }
    for c in centroid.iter_mut() {
        *c /= n as f64;
    }
    let dist: Vec<f64> = rows
        .iter()
        .map(|r| {
            r.data()
                .iter()
                .zip(&centroid)
                .map(|(x, c)| (x - c) * (x - c))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let mut taken = vec![false; n];
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<usize> = None;
        for i in 0..n {
            if !taken[i] && best.map_or(true, |b| dist[i] < dist[b]) {
                best = Some(i);
            }
        }
        let b = best.expect("k <= n");
        taken[b] = true;
        out.push(b);
    }
    out
}

/// `select_top_k` against a selection-by-scan oracle on random instances,
/// some with duplicated rows to force distance ties.
pub fn extraction_oracle_suite(seed: u64, instances: usize) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0;
    for _ in 0..instances {
        let n = rng.gen_range(1..=50);
        let dim = rng.gen_range(1..=8);
        let mut rows: Vec<Tensor> = (0..n).map(|_| uniform(&mut rng, &[dim], 1.0)).collect();
        if n > 2 && rng.gen_bool(0.5) {
            for _ in 0..rng.gen_range(1..=n / 2) {
                let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
                rows[a] = rows[b].clone();
            }
        }
        let k = rng.gen_range(1..=n);
        let reviews: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        let got = select_top_k(&reviews, k, &RowEmbedder(rows.clone()), Distance::Euclidean)?;
        if got.selected != nearest_by_scan(&rows, k) {
            mismatches += 1;
        }
    }
    Ok(CheckOutcome {
        name: "extraction oracle",
        passed: mismatches == 0,
        detail: format!("{mismatches} mismatches over {instances} random instances"),
    })
}

/// Every suite at its full size.
pub fn run_all(seed: u64) -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        gradient_suite(seed, 3)?,
        distribution_suite(seed, 1000)?,
        beam_oracle_suite(seed, 20)?,
        rouge_oracle_suite(4, 6),
        extraction_oracle_suite(seed, 100)?,
    ])
}
