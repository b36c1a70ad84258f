//! The Abstract model: attentive pooling over review encodings, an LSTM
//! decoder with attention and copying over fused word encodings, and an
//! optional salience state driven by centroid-nearest extracts.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::beam::{beam_search, Hypothesis, Scorer};
use crate::condense::{condense_loss, CondenseModel};
use crate::data::{EncodedCluster, BOS_ID, EOS_ID, UNK_ID};
use crate::error::{Error, Result};
use crate::extractive::{select_nearest, CentroidSelection, Distance};
use crate::fusion::{fuse_words, fusion_loss, pool_reviews, ClusterEncodings, FusedWords, NUM_NEGATIVES};
use crate::nn::{bilstm, init_lstm, register, Lstm, LstmState, INIT_SCALE};
use crate::tensor_core::{uniform, Mode, ParameterSet, Tape, Tensor, Var, DEFAULT_DROPOUT};
use crate::training::{fit, TrainConfig, TrainReport};

pub const PREFIX: &str = "abstract";
pub const DEFAULT_K: usize = 5;
pub const DEFAULT_MAX_LEN: usize = 40;
pub const DEFAULT_BEAM: usize = 5;

fn name(part: &str) -> String {
    format!("{PREFIX}.{part}")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbstractConfig {
    pub vocab_size: usize,
    pub embedding_dim: usize,
    /// Width of Condense encodings and of the decoder state `s`.
    pub encoding_dim: usize,
    pub attention_dim: usize,
    pub use_extracts: bool,
    pub k: usize,
    pub dropout: f64,
    pub fusion_loss: bool,
}

impl AbstractConfig {
    pub fn for_condense(condense: &CondenseModel) -> Self {
        let c = condense.config;
        AbstractConfig {
            vocab_size: c.vocab_size,
            embedding_dim: c.embedding_dim,
            encoding_dim: c.encoding_dim(),
            attention_dim: c.encoding_dim(),
            use_extracts: true,
            k: DEFAULT_K,
            dropout: DEFAULT_DROPOUT,
            fusion_loss: true,
        }
    }

    /// Width of `ŝ`.
    pub fn state_dim(&self) -> usize {
        if self.use_extracts {
            2 * self.encoding_dim
        } else {
            self.encoding_dim
        }
    }
}

/// Everything the frozen Condense model contributes to one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedCluster {
    pub id: String,
    pub title: Option<String>,
    pub reviews: Vec<Vec<usize>>,
    pub encodings: ClusterEncodings,
    pub review_matrix: Tensor,
    /// `d̄`
    pub mean_query: Tensor,
    pub fused: FusedWords,
    pub selection: CentroidSelection,
    pub extended: Vec<String>,
    pub base_size: usize,
    pub gold: Option<Vec<usize>>,
    /// Condense encoding `z` of the gold summary.
    pub gold_encoding: Option<Tensor>,
}

impl PreparedCluster {
    pub fn new(condense: &CondenseModel, cluster: &EncodedCluster, k: usize) -> Result<Self> {
        let encodings = ClusterEncodings::encode(condense, &cluster.reviews)?;
        let fused = fuse_words(&encodings)?;
        let embeddings = encodings
            .word_encodings
            .iter()
            .map(|w| Tensor::mean_of(w))
            .collect::<Result<Vec<_>>>()?;
        let selection = select_nearest(&embeddings, k.min(encodings.len()), Distance::Euclidean)?;
        let gold = cluster.summary.clone().filter(|s| !s.is_empty());
        let gold_encoding = match &gold {
            Some(s) => Some(condense.encode_review(s)?.d),
            None => None,
        };
        Ok(PreparedCluster {
            id: cluster.id.clone(),
            title: cluster.title.clone(),
            reviews: cluster.reviews.clone(),
            review_matrix: encodings.review_matrix(),
            mean_query: encodings.mean_encoding(),
            encodings,
            fused,
            selection,
            extended: cluster.extended.clone(),
            base_size: cluster.base_size,
            gold,
            gold_encoding,
        })
    }

    pub fn total_vocab(&self) -> usize {
        self.base_size + self.extended.len()
    }

    /// Selected reviews concatenated, nearest to the centroid first.
    pub fn extract_tokens(&self) -> Vec<usize> {
        self.selection
            .selected
            .iter()
            .flat_map(|&i| self.reviews[i].iter().copied())
            .collect()
    }

    /// Gold summary followed by the end symbol.
    pub fn targets(&self) -> Option<Vec<usize>> {
        self.gold.as_ref().map(|g| {
            let mut t = g.clone();
            t.push(EOS_ID);
            t
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbstractModel {
    pub config: AbstractConfig,
    pub params: ParameterSet,
}

/// Abstract parameters registered on a tape.
pub struct AbstractVars {
    config: AbstractConfig,
    embedding: Var,
    w_p: Var,
    dec: Lstm,
    salience: Option<(Lstm, Lstm, Lstm)>,
    w_h: Var,
    w_s: Var,
    b_a: Var,
    v: Var,
    w_g: Var,
    b_g: Var,
    v_s: Var,
    v_c: Var,
    v_y: Var,
}

/// Per-cluster quantities shared by every decoding step.
#[derive(Debug, Clone)]
pub struct ContextVars {
    pub d_prime: Var,
    pub pool_weights: Var,
    words_t: Var,
    word_proj: Var,
    word_index: Vec<usize>,
    total_vocab: usize,
    pub salience_init: Option<LstmState>,
}

#[derive(Debug, Clone, Copy)]
pub struct StateVars {
    pub s: LstmState,
    pub r: Option<LstmState>,
}

#[derive(Debug, Clone, Copy)]
pub struct StepVars {
    pub attention: Var,
    pub context: Var,
    pub gate: Var,
    pub generation: Var,
    pub copy: Var,
    pub p: Var,
}

impl AbstractModel {
    /// Fresh parameters. The word embedding starts as a copy of the
    /// Condense embedding when the shapes agree.
    pub fn init(config: AbstractConfig, condense: Option<&CondenseModel>, seed: u64) -> Result<Self> {
        let (v, e, d, a) = (
            config.vocab_size,
            config.embedding_dim,
            config.encoding_dim,
            config.attention_dim,
        );
        if config.use_extracts && d % 2 != 0 {
            return Err(Error::invalid("salience encoder needs an even encoding width"));
        }
        let ds = config.state_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParameterSet::new();
        let embedding = match condense.map(|c| c.params.get("condense.embedding")).transpose()? {
            Some(t) if t.shape() == [v, e] => t.clone(),
            _ => uniform(&mut rng, &[v, e], INIT_SCALE),
        };
        params.insert(name("embedding"), embedding);
        let mut w_p = Tensor::identity(d);
        for x in w_p.data_mut() {
            *x += rng.gen_range(-0.01..0.01);
        }
        params.insert(name("W_p"), w_p);
        init_lstm(&mut params, &name("dec"), e, d, &mut rng);
        params.insert(name("attn.W_h"), uniform(&mut rng, &[a, d], INIT_SCALE));
        params.insert(name("attn.W_s"), uniform(&mut rng, &[a, ds], INIT_SCALE));
        params.insert(name("attn.b_a"), Tensor::zeros(&[a]));
        params.insert(name("attn.v"), uniform(&mut rng, &[a], INIT_SCALE));
        params.insert(name("gen.W_g"), uniform(&mut rng, &[v, ds + d], INIT_SCALE));
        params.insert(name("gen.b_g"), Tensor::zeros(&[v]));
        params.insert(name("gate.v_s"), uniform(&mut rng, &[ds], INIT_SCALE));
        params.insert(name("gate.v_c"), uniform(&mut rng, &[d], INIT_SCALE));
        params.insert(name("gate.v_y"), uniform(&mut rng, &[e], INIT_SCALE));
        if config.use_extracts {
            init_lstm(&mut params, &name("sal_enc_fwd"), e, d / 2, &mut rng);
            init_lstm(&mut params, &name("sal_enc_bwd"), e, d / 2, &mut rng);
            init_lstm(&mut params, &name("sal_dec"), e, d, &mut rng);
        }
        Ok(AbstractModel { config, params })
    }

    pub fn from_params(config: AbstractConfig, params: &ParameterSet) -> Result<Self> {
        let probe = AbstractModel::init(config, None, 0)?;
        for (n, t) in probe.params.iter() {
            let got = params.get(n)?;
            if got.shape() != t.shape() {
                return Err(Error::shape(
                    "abstract parameters",
                    format!("{n}: {:?} vs {:?}", got.shape(), t.shape()),
                ));
            }
        }
        Ok(AbstractModel {
            config,
            params: params.subset(&format!("{PREFIX}.")),
        })
    }

    pub fn vars<'p>(&'p self, tape: &mut Tape<'p>, trainable: bool) -> Result<AbstractVars> {
        AbstractVars::register(tape, &self.params, self.config, trainable)
    }

    /// Eval-mode decoding context; `query` replaces `d̄` when given.
    pub fn decoder_context(&self, cluster: &PreparedCluster, query: Option<&Tensor>) -> Result<DecoderContext> {
        self.decoder_context_with(cluster, query, true)
    }

    /// As [`decoder_context`](Self::decoder_context); with `use_extracts`
    /// false a model trained with extracts starts its salience state at
    /// zero instead of encoding the extract.
    pub fn decoder_context_with(
        &self,
        cluster: &PreparedCluster,
        query: Option<&Tensor>,
        use_extracts: bool,
    ) -> Result<DecoderContext> {
        let mut tape = Tape::new(Mode::Eval);
        let vars = self.vars(&mut tape, false)?;
        let ctx = vars.context(&mut tape, cluster, query)?;
        let value = |v: Var| tape.value(v).clone();
        let salience_init = ctx.salience_init.map(|s| {
            if use_extracts {
                (value(s.h), value(s.c))
            } else {
                let zero = Tensor::zeros(&[self.config.encoding_dim]);
                (zero.clone(), zero)
            }
        });
        Ok(DecoderContext {
            d_prime: value(ctx.d_prime),
            pool_weights: value(ctx.pool_weights),
            words_t: value(ctx.words_t),
            word_proj: value(ctx.word_proj),
            word_index: ctx.word_index.clone(),
            total_vocab: ctx.total_vocab,
            salience_init,
        })
    }

    pub fn init_state(&self, ctx: &DecoderContext) -> DecoderState {
        DecoderState {
            s: (ctx.d_prime.clone(), ctx.d_prime.clone()),
            r: ctx.salience_init.clone(),
            t: 0,
        }
    }

    /// One eval-mode decoder step.
    pub fn decode_step(&self, ctx: &DecoderContext, state: &DecoderState, prev: usize) -> Result<(StepOutput, DecoderState)> {
        let mut tape = Tape::new(Mode::Eval);
        let vars = self.vars(&mut tape, false)?;
        let cv = ContextVars {
            d_prime: tape.constant_ref(&ctx.d_prime)?,
            pool_weights: tape.constant_ref(&ctx.pool_weights)?,
            words_t: tape.constant_ref(&ctx.words_t)?,
            word_proj: tape.constant_ref(&ctx.word_proj)?,
            word_index: ctx.word_index.clone(),
            total_vocab: ctx.total_vocab,
            salience_init: None,
        };
        let pair = |tape: &mut Tape<'_>, (h, c): &(Tensor, Tensor)| -> Result<LstmState> {
            Ok(LstmState {
                h: tape.constant(h.clone())?,
                c: tape.constant(c.clone())?,
            })
        };
        let sv = StateVars {
            s: pair(&mut tape, &state.s)?,
            r: state.r.as_ref().map(|r| pair(&mut tape, r)).transpose()?,
        };
        let (step, next) = vars.step(&mut tape, &cv, sv, prev)?;
        let value = |v: Var| tape.value(v).clone();
        let out = StepOutput {
            attention: value(step.attention),
            context: value(step.context),
            gate: tape.scalar(step.gate),
            generation: value(step.generation),
            copy: value(step.copy),
            p: value(step.p),
        };
        let next = DecoderState {
            s: (value(next.s.h), value(next.s.c)),
            r: next.r.map(|r| (value(r.h), value(r.c))),
            t: state.t + 1,
        };
        Ok((out, next))
    }

    /// Ranked beam-search hypotheses (extended ids, ending in the end symbol
    /// when the model stopped on its own).
    pub fn beam_search(&self, ctx: &DecoderContext, beam: usize, max_len: usize) -> Result<Vec<Hypothesis<DecoderState>>> {
        beam_search(&StepScorer { model: self, ctx }, BOS_ID, EOS_ID, beam, max_len)
    }

    /// Best hypothesis without the end symbol.
    pub fn summarize_ids(&self, cluster: &PreparedCluster, query: Option<&Tensor>, beam: usize, max_len: usize) -> Result<Vec<usize>> {
        let ctx = self.decoder_context(cluster, query)?;
        self.decode_ids(&ctx, beam, max_len)
    }

    pub fn decode_ids(&self, ctx: &DecoderContext, beam: usize, max_len: usize) -> Result<Vec<usize>> {
        let hyps = self.beam_search(ctx, beam, max_len)?;
        let mut tokens = hyps
            .into_iter()
            .next()
            .map(|h| h.tokens)
            .unwrap_or_default();
        if tokens.last() == Some(&EOS_ID) {
            tokens.pop();
        }
        Ok(tokens)
    }

    /// Eval-mode `L_abstract` with explicit negatives.
    pub fn loss(&self, cluster: &PreparedCluster, negatives: &[Tensor]) -> Result<f64> {
        let mut tape = Tape::new(Mode::Eval);
        let vars = self.vars(&mut tape, false)?;
        let l = vars.abstract_loss(&mut tape, cluster, negatives)?;
        Ok(tape.scalar(l))
    }
}

/// Tensor-valued decoding context for one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderContext {
    pub d_prime: Tensor,
    pub pool_weights: Tensor,
    words_t: Tensor,
    word_proj: Tensor,
    pub word_index: Vec<usize>,
    pub total_vocab: usize,
    pub salience_init: Option<(Tensor, Tensor)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    /// Hidden and cell of the main decoder.
    pub s: (Tensor, Tensor),
    /// Hidden and cell of the salience decoder.
    pub r: Option<(Tensor, Tensor)>,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub attention: Tensor,
    pub context: Tensor,
    pub gate: f64,
    /// Over the base vocabulary.
    pub generation: Tensor,
    /// Over base plus extended ids.
    pub copy: Tensor,
    pub p: Tensor,
}

struct StepScorer<'a> {
    model: &'a AbstractModel,
    ctx: &'a DecoderContext,
}

impl Scorer for StepScorer<'_> {
    type State = DecoderState;

    fn start(&self) -> Result<DecoderState> {
        Ok(self.model.init_state(self.ctx))
    }

    fn step(&self, state: &DecoderState, prev: usize) -> Result<(Vec<f64>, DecoderState)> {
        let (out, next) = self.model.decode_step(self.ctx, state, prev)?;
        let log_probs = out
            .p
            .data()
            .iter()
            .map(|&x| if x > 0.0 { x.ln() } else { f64::NEG_INFINITY })
            .collect();
        Ok((log_probs, next))
    }
}

impl AbstractVars {
    pub fn register<'p>(
        tape: &mut Tape<'p>,
        params: &'p ParameterSet,
        config: AbstractConfig,
        trainable: bool,
    ) -> Result<Self> {
        let reg = |tape: &mut Tape<'p>, part: &str| register(tape, params, &name(part), trainable);
        let salience = if config.use_extracts {
            Some((
                Lstm::register(tape, params, &name("sal_enc_fwd"), trainable)?,
                Lstm::register(tape, params, &name("sal_enc_bwd"), trainable)?,
                Lstm::register(tape, params, &name("sal_dec"), trainable)?,
            ))
        } else {
            None
        };
        Ok(AbstractVars {
            config,
            embedding: reg(tape, "embedding")?,
            w_p: reg(tape, "W_p")?,
            dec: Lstm::register(tape, params, &name("dec"), trainable)?,
            salience,
            w_h: reg(tape, "attn.W_h")?,
            w_s: reg(tape, "attn.W_s")?,
            b_a: reg(tape, "attn.b_a")?,
            v: reg(tape, "attn.v")?,
            w_g: reg(tape, "gen.W_g")?,
            b_g: reg(tape, "gen.b_g")?,
            v_s: reg(tape, "gate.v_s")?,
            v_c: reg(tape, "gate.v_c")?,
            v_y: reg(tape, "gate.v_y")?,
        })
    }

    /// Extended and out-of-range ids read the unknown-word embedding.
    fn embed(&self, tape: &mut Tape<'_>, token: usize) -> Result<Var> {
        let id = if token < self.config.vocab_size { token } else { UNK_ID };
        tape.embedding_lookup(self.embedding, id)
    }

    /// Pools the reviews against `query` (default `d̄`), loads the fused
    /// word table and, with extracts enabled, encodes the extract.
    pub fn context(&self, tape: &mut Tape<'_>, cluster: &PreparedCluster, query: Option<&Tensor>) -> Result<ContextVars> {
        let d = self.config.encoding_dim;
        let query = query.unwrap_or(&cluster.mean_query);
        if query.shape() != [d] || cluster.review_matrix.cols() != d {
            return Err(Error::shape(
                "pool_reviews",
                format!(
                    "query {:?}, reviews {:?}, W_p [{d}, {d}]",
                    query.shape(),
                    cluster.review_matrix.shape()
                ),
            ));
        }
        let reviews = tape.constant(cluster.review_matrix.clone())?;
        let q = tape.constant(query.clone())?;
        let pooled = pool_reviews(tape, reviews, q, self.w_p)?;
        let words = tape.constant(cluster.fused.encodings.clone())?;
        let words_t = tape.transpose(words)?;
        let w_h_t = tape.transpose(self.w_h)?;
        let word_proj = tape.matmul(words, w_h_t)?;
        let salience_init = match &self.salience {
            Some((fwd, bwd, _)) => {
                let tokens = cluster.extract_tokens();
                if tokens.is_empty() {
                    return Err(Error::invalid("extracts enabled but the selection is empty"));
                }
                let mut inputs = Vec::with_capacity(tokens.len());
                for t in tokens {
                    let e = self.embed(tape, t)?;
                    inputs.push(tape.dropout(e, self.config.dropout)?);
                }
                let out = bilstm(tape, fwd, bwd, &inputs)?;
                let c = tape.constant(Tensor::zeros(&[d]))?;
                Some(LstmState { h: out.summary, c })
            }
            None => None,
        };
        Ok(ContextVars {
            d_prime: pooled.d_prime,
            pool_weights: pooled.weights,
            words_t,
            word_proj,
            word_index: cluster.fused.unique_words.clone(),
            total_vocab: cluster.total_vocab(),
            salience_init,
        })
    }

    /// Hidden and cell both start at `d'`; `r_0` comes from the salience encoder.
    pub fn init_state(&self, ctx: &ContextVars) -> StateVars {
        StateVars {
            s: LstmState {
                h: ctx.d_prime,
                c: ctx.d_prime,
            },
            r: ctx.salience_init,
        }
    }

    pub fn step(&self, tape: &mut Tape<'_>, ctx: &ContextVars, state: StateVars, prev: usize) -> Result<(StepVars, StateVars)> {
        let x = self.embed(tape, prev)?;
        let s = self.dec.step(tape, x, state.s)?;
        let r = match (&self.salience, state.r) {
            (Some((_, _, dec)), Some(r)) => Some(dec.step(tape, x, r)?),
            (None, None) => None,
            _ => return Err(Error::invalid("salience state does not match the configuration")),
        };
        let s_hat = match r {
            Some(r) => tape.concat(&[s.h, r.h])?,
            None => s.h,
        };

        let query = tape.matvec(self.w_s, s_hat)?;
        let query = tape.add(query, self.b_a)?;
        let pre = tape.add_row(ctx.word_proj, query)?;
        let act = tape.tanh(pre)?;
        let scores = tape.matvec(act, self.v)?;
        let attention = tape.softmax(scores)?;
        let context = tape.matvec(ctx.words_t, attention)?;

        let s_drop = tape.dropout(s_hat, self.config.dropout)?;
        let features = tape.concat(&[s_drop, context])?;
        let logits = tape.matvec(self.w_g, features)?;
        let logits = tape.add(logits, self.b_g)?;
        if !tape.value(logits).is_finite() {
            return Err(Error::NonFinite {
                op: "decode_step".into(),
                detail: format!("generation logits at prev token {prev}"),
            });
        }
        let generation = tape.softmax(logits)?;

        let gs = tape.dot(self.v_s, s_hat)?;
        let gc = tape.dot(self.v_c, context)?;
        let gy = tape.dot(self.v_y, x)?;
        let g = tape.sum_all(&[gs, gc, gy])?;
        let gate = tape.sigmoid(g)?;

        let copy = tape.scatter_add(attention, &ctx.word_index, ctx.total_vocab)?;
        let p = mix(tape, gate, generation, copy, ctx.total_vocab)?;
        Ok((
            StepVars {
                attention,
                context,
                gate,
                generation,
                copy,
                p,
            },
            StateVars { s, r },
        ))
    }

    /// Teacher-forced per-step output distributions.
    pub fn distributions(&self, tape: &mut Tape<'_>, ctx: &ContextVars, targets: &[usize]) -> Result<Vec<Var>> {
        let mut state = self.init_state(ctx);
        let mut prev = BOS_ID;
        let mut out = Vec::with_capacity(targets.len());
        for &y in targets {
            let (step, next) = self.step(tape, ctx, state, prev)?;
            out.push(step.p);
            state = next;
            prev = y;
        }
        Ok(out)
    }

    /// `-Σ log p_t(y_t)` over `targets` (extended ids allowed).
    pub fn generation_loss(&self, tape: &mut Tape<'_>, ctx: &ContextVars, targets: &[usize]) -> Result<Var> {
        let dists = self.distributions(tape, ctx, targets)?;
        condense_loss(tape, &dists, targets)
    }

    /// `L_generate + L_fuse`; the fusion term is skipped when disabled in
    /// the configuration.
    pub fn abstract_loss(&self, tape: &mut Tape<'_>, cluster: &PreparedCluster, negatives: &[Tensor]) -> Result<Var> {
        let targets = cluster
            .targets()
            .ok_or_else(|| Error::invalid(format!("cluster {} has no gold summary", cluster.id)))?;
        let ctx = self.context(tape, cluster, None)?;
        let generate = self.generation_loss(tape, &ctx, &targets)?;
        if !self.config.fusion_loss {
            return Ok(generate);
        }
        let z = cluster
            .gold_encoding
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("cluster {} has no gold encoding", cluster.id)))?;
        let z = tape.constant(z.clone())?;
        let negs = negatives
            .iter()
            .map(|n| tape.constant(n.clone()))
            .collect::<Result<Vec<_>>>()?;
        let fuse = fusion_loss(tape, ctx.d_prime, z, &negs)?;
        tape.add(generate, fuse)
    }
}

/// `σ·pad(p_g) + (1 − σ)·p_c`.
pub fn mix(tape: &mut Tape<'_>, gate: Var, generation: Var, copy: Var, total_vocab: usize) -> Result<Var> {
    let padded = tape.pad_to(generation, total_vocab)?;
    let gen_part = tape.scale_by(padded, gate)?;
    let rest = tape.affine(gate, -1.0, 1.0)?;
    let copy_part = tape.scale_by(copy, rest)?;
    tape.add(gen_part, copy_part)
}

/// Five gold encodings of other clusters: distinct when at least five
/// exist, otherwise drawn with replacement.
pub fn sample_negatives(clusters: &[PreparedCluster], current: usize, rng: &mut impl Rng) -> Result<Vec<Tensor>> {
    let others: Vec<&Tensor> = clusters
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != current)
        .filter_map(|(_, c)| c.gold_encoding.as_ref())
        .collect();
    if others.is_empty() {
        return Err(Error::invalid("negative sampling needs another cluster with a gold summary"));
    }
    Ok(if others.len() >= NUM_NEGATIVES {
        sample(rng, others.len(), NUM_NEGATIVES)
            .into_iter()
            .map(|i| others[i].clone())
            .collect()
    } else {
        (0..NUM_NEGATIVES)
            .map(|_| others[rng.gen_range(0..others.len())].clone())
            .collect()
    })
}

/// Trains the Abstract parameters with Condense frozen (its outputs are
/// already baked into `clusters`). `dev_score` is called once per epoch.
pub fn train_abstract<D>(model: &mut AbstractModel, clusters: &[PreparedCluster], config: &TrainConfig, mut dev_score: D) -> Result<TrainReport>
where
    D: FnMut(&AbstractModel) -> Result<Option<f64>>,
{
    let cfg = model.config;
    let items: Vec<usize> = (0..clusters.len())
        .filter(|&i| clusters[i].gold.is_some())
        .collect();
    let mut params = std::mem::take(&mut model.params);
    let report = fit(
        &mut params,
        &items,
        config,
        |tape, p, &i, rng| {
            let vars = AbstractVars::register(tape, p, cfg, true)?;
            let negatives = if cfg.fusion_loss {
                sample_negatives(clusters, i, rng)?
            } else {
                Vec::new()
            };
            vars.abstract_loss(tape, &clusters[i], &negatives)
        },
        |p| {
            dev_score(&AbstractModel {
                config: cfg,
                params: p.clone(),
            })
        },
    );
    model.params = params;
    report
}
