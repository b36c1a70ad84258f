//! Corpus files, tokenization, vocabularies, and synthetic corpora.

mod corpus;
mod tokenize;
mod toy;
mod vocab;

pub use corpus::{
    load_corpus, Corpus, CorpusStats, Review, ReviewCluster, Split, MAX_REVIEW_TOKENS,
    MAX_SUMMARY_TOKENS,
};
pub use tokenize::{detokenize, mask_title, tokenize, unmask_title};
pub use toy::{generate_background, generate_toy_corpus, MarkerSet, ToyCorpus, ToyLabels, ToySpec};
pub use vocab::{
    to_base, EncodedCluster, Vocabulary, BOS, BOS_ID, EOS, EOS_ID, PAD, PAD_ID, RESERVED, TITLE,
    TITLE_ID, UNK, UNK_ID,
};
