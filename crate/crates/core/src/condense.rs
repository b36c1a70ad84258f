//! The Condense model: a BiLSTM autoencoder that turns each review into a
//! review encoding `d` and one encoding per token.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use std::path::Path;

use crate::data::{Vocabulary, BOS_ID, UNK_ID};
use crate::error::{Error, Result};
use crate::nn::{bilstm, init_lstm, register, Lstm, LstmState, INIT_SCALE};
use crate::tensor_core::{uniform, Mode, ParameterSet, Tape, Tensor, Var, DEFAULT_DROPOUT};
use crate::training::{fit, TrainConfig, TrainReport};

pub const PREFIX: &str = "condense";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CondenseConfig {
    pub vocab_size: usize,
    pub embedding_dim: usize,
    /// Hidden size of each direction; encodings are twice this wide.
    pub hidden_dim: usize,
    pub dropout: f64,
}

impl CondenseConfig {
    pub fn new(vocab_size: usize) -> Self {
        CondenseConfig {
            vocab_size,
            embedding_dim: 128,
            hidden_dim: 128,
            dropout: DEFAULT_DROPOUT,
        }
    }

    pub fn encoding_dim(&self) -> usize {
        2 * self.hidden_dim
    }
}

/// Encodings of one review.
#[derive(Debug, Clone, PartialEq)]
pub struct ReviewEncoding {
    pub d: Tensor,
    pub word_encodings: Vec<Tensor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CondenseModel {
    pub config: CondenseConfig,
    pub params: ParameterSet,
}

/// Condense parameters registered on a tape.
pub struct CondenseVars {
    config: CondenseConfig,
    embedding: Var,
    fwd: Lstm,
    bwd: Lstm,
    dec: Lstm,
    out_w: Var,
    out_b: Var,
}

pub struct EncodedVars {
    pub d: Var,
    pub words: Vec<Var>,
}

fn name(part: &str) -> String {
    format!("{PREFIX}.{part}")
}

impl CondenseModel {
    pub fn init(config: CondenseConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (v, e, h) = (config.vocab_size, config.embedding_dim, config.hidden_dim);
        let mut params = ParameterSet::new();
        params.insert(name("embedding"), uniform(&mut rng, &[v, e], INIT_SCALE));
        init_lstm(&mut params, &name("enc_fwd"), e, h, &mut rng);
        init_lstm(&mut params, &name("enc_bwd"), e, h, &mut rng);
        init_lstm(&mut params, &name("dec"), e, 2 * h, &mut rng);
        params.insert(name("out.w"), uniform(&mut rng, &[v, 2 * h], INIT_SCALE));
        params.insert(name("out.b"), Tensor::zeros(&[v]));
        CondenseModel { config, params }
    }

    pub fn from_params(config: CondenseConfig, params: ParameterSet) -> Result<Self> {
        let probe = CondenseModel::init(config, 0);
        for (n, t) in probe.params.iter() {
            let got = params.get(n)?;
            if got.shape() != t.shape() {
                return Err(Error::shape(
                    "condense parameters",
                    format!("{n}: {:?} vs {:?}", got.shape(), t.shape()),
                ));
            }
        }
        Ok(CondenseModel {
            config,
            params: params.subset(&format!("{PREFIX}.")),
        })
    }

    /// Overwrites embedding rows from a whitespace-separated text file with
    /// one `word v_1 .. v_E` line per word. Words outside `vocab` are
    /// skipped. Returns how many rows were replaced.
    pub fn load_embeddings(&mut self, vocab: &Vocabulary, path: &Path) -> Result<usize> {
        let text = std::fs::read_to_string(path)?;
        let dim = self.config.embedding_dim;
        let table = self.params.get_mut(&name("embedding"))?;
        let mut replaced = 0;
        for (i, line) in text.lines().enumerate() {
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let values = fields
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
            if values.len() != dim {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: format!("{} values, embedding width is {dim}", values.len()),
                });
            }
            if let Some(id) = vocab.get(word) {
                table.data_mut()[id * dim..(id + 1) * dim].copy_from_slice(&values);
                replaced += 1;
            }
        }
        Ok(replaced)
    }

    pub fn vars<'p>(&'p self, tape: &mut Tape<'p>, trainable: bool) -> Result<CondenseVars> {
        CondenseVars::register(tape, &self.params, self.config, trainable)
    }

    /// Eval-mode encoding of one review.
    pub fn encode_review(&self, tokens: &[usize]) -> Result<ReviewEncoding> {
        let mut tape = Tape::new(Mode::Eval);
        let vars = self.vars(&mut tape, false)?;
        let enc = vars.encode(&mut tape, tokens)?;
        Ok(ReviewEncoding {
            d: tape.value(enc.d).clone(),
            word_encodings: enc.words.iter().map(|&w| tape.value(w).clone()).collect(),
        })
    }

    /// Per-position output distributions (eval mode, teacher forcing).
    pub fn reconstruction_distributions(&self, tokens: &[usize]) -> Result<Vec<Tensor>> {
        let mut tape = Tape::new(Mode::Eval);
        let vars = self.vars(&mut tape, false)?;
        let enc = vars.encode(&mut tape, tokens)?;
        let dists = vars.reconstruction_distributions(&mut tape, enc.d, tokens)?;
        Ok(dists.iter().map(|&p| tape.value(p).clone()).collect())
    }

    /// Eval-mode `L_condense` of one review.
    pub fn loss(&self, tokens: &[usize]) -> Result<f64> {
        let mut tape = Tape::new(Mode::Eval);
        let vars = self.vars(&mut tape, false)?;
        let l = vars.reconstruction_loss(&mut tape, tokens)?;
        Ok(tape.scalar(l))
    }

    pub fn mean_loss(&self, instances: &[Vec<usize>]) -> Result<f64> {
        let mut total = 0.0;
        for x in instances {
            total += self.loss(x)?;
        }
        Ok(total / instances.len().max(1) as f64)
    }

    /// Greedy reconstruction: argmax token at every position, conditioned on
    /// the encoding and the gold previous token.
    pub fn reconstruct_argmax(&self, tokens: &[usize]) -> Result<Vec<usize>> {
        Ok(self
            .reconstruction_distributions(tokens)?
            .iter()
            .map(|p| argmax(p.data()))
            .collect())
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

impl CondenseVars {
    pub fn register<'p>(
        tape: &mut Tape<'p>,
        params: &'p ParameterSet,
        config: CondenseConfig,
        trainable: bool,
    ) -> Result<Self> {
        Ok(CondenseVars {
            config,
            embedding: register(tape, params, &name("embedding"), trainable)?,
            fwd: Lstm::register(tape, params, &name("enc_fwd"), trainable)?,
            bwd: Lstm::register(tape, params, &name("enc_bwd"), trainable)?,
            dec: Lstm::register(tape, params, &name("dec"), trainable)?,
            out_w: register(tape, params, &name("out.w"), trainable)?,
            out_b: register(tape, params, &name("out.b"), trainable)?,
        })
    }

    fn embed(&self, tape: &mut Tape<'_>, token: usize) -> Result<Var> {
        let id = if token < self.config.vocab_size { token } else { UNK_ID };
        tape.embedding_lookup(self.embedding, id)
    }

    /// BiLSTM pass: `h_i = [fwd_i; bwd_i]`, `d = [fwd_M; bwd_1]`.
    pub fn encode(&self, tape: &mut Tape<'_>, tokens: &[usize]) -> Result<EncodedVars> {
        if tokens.is_empty() {
            return Err(Error::invalid("cannot encode an empty review"));
        }
        let mut inputs = Vec::with_capacity(tokens.len());
        for &t in tokens {
            let e = self.embed(tape, t)?;
            inputs.push(tape.dropout(e, self.config.dropout)?);
        }
        let out = bilstm(tape, &self.fwd, &self.bwd, &inputs)?;
        Ok(EncodedVars {
            d: out.summary,
            words: out.states,
        })
    }

    /// Decoder logits for each target position, starting from `z_0 = d`.
    pub fn reconstruction_logits(&self, tape: &mut Tape<'_>, d: Var, target: &[usize]) -> Result<Vec<Var>> {
        if target.is_empty() {
            return Err(Error::invalid("empty reconstruction target"));
        }
        let c = tape.constant(Tensor::zeros(&[self.config.encoding_dim()]))?;
        let mut state = LstmState { h: d, c };
        let mut prev = BOS_ID;
        let mut logits = Vec::with_capacity(target.len());
        for &t in target {
            let x = self.embed(tape, prev)?;
            state = self.dec.step(tape, x, state)?;
            let z = tape.dropout(state.h, self.config.dropout)?;
            let proj = tape.matvec(self.out_w, z)?;
            logits.push(tape.add(proj, self.out_b)?);
            prev = t;
        }
        Ok(logits)
    }

    pub fn reconstruction_distributions(&self, tape: &mut Tape<'_>, d: Var, target: &[usize]) -> Result<Vec<Var>> {
        self.reconstruction_logits(tape, d, target)?
            .into_iter()
            .map(|l| tape.softmax(l))
            .collect()
    }

    /// Encode then reconstruct; the summed cross-entropy over positions.
    pub fn reconstruction_loss(&self, tape: &mut Tape<'_>, tokens: &[usize]) -> Result<Var> {
        let enc = self.encode(tape, tokens)?;
        let logits = self.reconstruction_logits(tape, enc.d, tokens)?;
        let terms = logits
            .iter()
            .zip(tokens)
            .map(|(&l, &t)| tape.cross_entropy(l, base_id(t, self.config.vocab_size)))
            .collect::<Result<Vec<_>>>()?;
        tape.sum_all(&terms)
    }
}

fn base_id(token: usize, vocab: usize) -> usize {
    if token < vocab {
        token
    } else {
        UNK_ID
    }
}

/// `-Σ log p_t(target_t)` over per-position distributions, with
/// probabilities floored before the log.
pub fn condense_loss(tape: &mut Tape<'_>, distributions: &[Var], target: &[usize]) -> Result<Var> {
    if distributions.len() != target.len() || target.is_empty() {
        return Err(Error::invalid(format!(
            "{} distributions for {} target tokens",
            distributions.len(),
            target.len()
        )));
    }
    let mut terms = Vec::with_capacity(target.len());
    for (&p, &t) in distributions.iter().zip(target) {
        let pt = tape.pick(p, t)?;
        let lp = tape.log(pt)?;
        terms.push(tape.affine(lp, -1.0, 0.0)?);
    }
    tape.sum_all(&terms)
}

/// Trains on reviews (and summaries) given as base-vocabulary id sequences.
/// Early stopping uses the mean dev reconstruction loss.
pub fn train_condense(
    model: &mut CondenseModel,
    instances: &[Vec<usize>],
    dev: &[Vec<usize>],
    config: &TrainConfig,
) -> Result<TrainReport> {
    let cfg = model.config;
    let instances: Vec<&Vec<usize>> = instances.iter().filter(|x| !x.is_empty()).collect();
    let mut params = std::mem::take(&mut model.params);
    let report = fit(
        &mut params,
        &instances,
        config,
        |tape, p, x, _| {
            let vars = CondenseVars::register(tape, p, cfg, true)?;
            vars.reconstruction_loss(tape, x)
        },
        |p| {
            if dev.is_empty() {
                return Ok(None);
            }
            let m = CondenseModel { config: cfg, params: p.clone() };
            Ok(Some(-m.mean_loss(dev)?))
        },
    );
    model.params = params;
    report
}
