//! End-to-end glue: corpus text to prepared clusters, trained models to
//! surface summaries, and checkpoint files for both stages.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::abstractive::{AbstractConfig, AbstractModel, PreparedCluster};
use crate::condense::{CondenseConfig, CondenseModel};
use crate::data::{detokenize, unmask_title, Corpus, ReviewCluster, Vocabulary};
use crate::error::{Error, Result};
use crate::tensor_core::{load_checkpoint, save_checkpoint, ParameterSet, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Condense,
    Abstract,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub stage: Stage,
    pub condense: CondenseConfig,
    #[serde(default)]
    pub abstract_config: Option<AbstractConfig>,
    /// The resolved run configuration that produced the checkpoint.
    #[serde(default)]
    pub run: serde_json::Value,
}

/// The vocabulary file that sits next to a checkpoint.
pub fn vocab_path(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".vocab");
    PathBuf::from(s)
}

/// Reviews and gold summaries as base-vocabulary ids: the Condense
/// training instances.
pub fn condense_instances(corpus: &Corpus, vocab: &Vocabulary) -> Vec<Vec<usize>> {
    corpus
        .clusters
        .iter()
        .flat_map(|c| c.reviews.iter().chain(c.summary.as_ref()))
        .map(|r| vocab.encode(&r.tokens))
        .filter(|r| !r.is_empty())
        .collect()
}

pub fn save_models(
    path: &Path,
    vocab: &Vocabulary,
    condense: &CondenseModel,
    abstract_model: Option<&AbstractModel>,
    run: serde_json::Value,
) -> Result<()> {
    let meta = CheckpointMeta {
        stage: if abstract_model.is_some() { Stage::Abstract } else { Stage::Condense },
        condense: condense.config,
        abstract_config: abstract_model.map(|m| m.config),
        run,
    };
    let mut params = condense.params.clone();
    if let Some(m) = abstract_model {
        params.extend(m.params.clone());
    }
    let meta = serde_json::to_value(meta).map_err(|e| Error::invalid(e.to_string()))?;
    save_checkpoint(path, &params, meta)?;
    vocab.save(&vocab_path(path))
}

pub struct LoadedModels {
    pub vocab: Vocabulary,
    pub condense: CondenseModel,
    pub abstract_model: Option<AbstractModel>,
    pub meta: CheckpointMeta,
}

pub fn load_models(path: &Path) -> Result<LoadedModels> {
    let (params, meta): (ParameterSet, _) = load_checkpoint(path)?;
    let meta: CheckpointMeta = serde_json::from_value(meta).map_err(|e| Error::Checkpoint {
        path: path.to_path_buf(),
        message: format!("bad metadata: {e}"),
    })?;
    let vocab = Vocabulary::load(&vocab_path(path))?;
    if vocab.len() != meta.condense.vocab_size {
        return Err(Error::Checkpoint {
            path: path.to_path_buf(),
            message: format!(
                "vocabulary has {} entries, model expects {}",
                vocab.len(),
                meta.condense.vocab_size
            ),
        });
    }
    let condense = CondenseModel::from_params(meta.condense, params.clone())?;
    let abstract_model = meta
        .abstract_config
        .map(|c| AbstractModel::from_params(c, &params))
        .transpose()?;
    Ok(LoadedModels {
        vocab,
        condense,
        abstract_model,
        meta,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub id: String,
    /// Surface tokens with the title restored.
    pub tokens: Vec<String>,
    pub text: String,
    pub pool_weights: Tensor,
}

/// A trained two-stage system ready for inference.
pub struct Summarizer {
    pub vocab: Vocabulary,
    pub condense: CondenseModel,
    pub model: AbstractModel,
}

impl Summarizer {
    pub fn from_loaded(loaded: LoadedModels) -> Result<Self> {
        let model = loaded
            .abstract_model
            .ok_or_else(|| Error::invalid("checkpoint holds no abstract model; train the abstract stage first"))?;
        Ok(Summarizer {
            vocab: loaded.vocab,
            condense: loaded.condense,
            model,
        })
    }

    pub fn prepare(&self, cluster: &ReviewCluster) -> Result<PreparedCluster> {
        prepare_cluster(&self.vocab, &self.condense, cluster, self.model.config.k)
    }

    /// Extended ids to surface tokens, title restored.
    pub fn render(&self, cluster: &PreparedCluster, ids: &[usize]) -> Vec<String> {
        let tokens = self.vocab.decode(ids, &cluster.extended);
        unmask_title(&tokens, cluster.title.as_deref())
    }

    pub fn summarize(
        &self,
        cluster: &PreparedCluster,
        query: Option<&Tensor>,
        beam: usize,
        max_len: usize,
        use_extracts: bool,
    ) -> Result<Summary> {
        let ctx = self.model.decoder_context_with(cluster, query, use_extracts)?;
        let ids = self.model.decode_ids(&ctx, beam, max_len)?;
        let tokens = self.render(cluster, &ids);
        Ok(Summary {
            id: cluster.id.clone(),
            text: detokenize(&tokens),
            tokens,
            pool_weights: ctx.pool_weights,
        })
    }
}

pub fn prepare_cluster(
    vocab: &Vocabulary,
    condense: &CondenseModel,
    cluster: &ReviewCluster,
    k: usize,
) -> Result<PreparedCluster> {
    if cluster.reviews.iter().all(|r| r.tokens.is_empty()) {
        return Err(Error::invalid(format!("cluster {} has only empty reviews", cluster.id)));
    }
    let mut encoded = vocab.encode_cluster(cluster);
    encoded.reviews.retain(|r| !r.is_empty());
    PreparedCluster::new(condense, &encoded, k)
}

pub fn prepare_corpus(vocab: &Vocabulary, condense: &CondenseModel, corpus: &Corpus, k: usize) -> Result<Vec<PreparedCluster>> {
    corpus
        .clusters
        .iter()
        .map(|c| prepare_cluster(vocab, condense, c, k))
        .collect()
}
